"""Tail-bound arithmetic and the Monte Carlo verification harness."""

import math

import numpy as np
import pytest

from mmtl.core import ConfigError, DataError, LossKind
from mmtl.theory import (FiniteEnvironment, default_environment,
                         estimate_rademacher, lemma1_bound, markov_rhs,
                         theorem1_rhs, verify_tail_bound)


class TestBoundArithmetic:
    def test_lemma1_values(self):
        assert lemma1_bound(1, 0.2, 50) == pytest.approx(
            math.log(10) / 50, abs=1e-9)
        assert lemma1_bound(4, 0.1, 100) == pytest.approx(
            math.log(80) / 100, abs=1e-9)

    def test_lemma1_scales_inversely_with_t(self):
        assert lemma1_bound(3, 0.05, 250) == pytest.approx(
            10 * lemma1_bound(3, 0.05, 2500))

    def test_theorem1_value(self):
        expected = (math.log(80) + math.log(101)) / 100
        assert theorem1_rhs(4, 0.1, 100, 1.0) == pytest.approx(
            expected, abs=1e-9)

    def test_theorem1_unit_hypothesis_bound_adds_nothing(self):
        # ceil(1) = 1 so the log B term vanishes.
        assert theorem1_rhs(2, 0.2, 40, 1.0) == pytest.approx(
            lemma1_bound(2, 0.2, 40) + math.log(41) / 40, abs=1e-12)

    def test_theorem1_doubling_classes(self):
        t, delta, b = 60, 0.1, 3.0
        diff = theorem1_rhs(8, delta, t, b) - theorem1_rhs(4, delta, t, b)
        assert diff == pytest.approx(math.log(2) / t, abs=1e-12)

    def test_markov(self):
        assert markov_rhs(0.2, 0.0, 0.5) == pytest.approx(0.4, abs=1e-12)
        assert markov_rhs(0.3, 0.1, 0.25) == pytest.approx(
            2 * markov_rhs(0.3, 0.1, 0.5))

    def test_validation(self):
        with pytest.raises(ConfigError):
            lemma1_bound(0, 0.1, 10)
        with pytest.raises(ConfigError):
            lemma1_bound(2, 1.5, 10)
        with pytest.raises(ConfigError):
            theorem1_rhs(10, 0.1, 2, 0.0)
        with pytest.raises(ConfigError):
            markov_rhs(0.1, 0.0, 0.0)


class TestRademacherEstimate:
    def test_single_example_is_exact(self):
        x = np.array([[3.0, 4.0]])
        # m = 1: the sign cancels inside the norm, giving bound * ||x||.
        assert estimate_rademacher(x, 2.0, n_draws=16, seed=0) == pytest.approx(
            2.0 * 5.0, abs=1e-12)

    def test_orthonormal_rows(self):
        m = 8
        # For orthonormal rows, ||signs @ X|| = sqrt(m) for every sign
        # vector, so the estimate is deterministic: bound / sqrt(m).
        est = estimate_rademacher(np.eye(m), 3.0, n_draws=32, seed=1)
        assert est == pytest.approx(3.0 / math.sqrt(m), abs=1e-12)

    def test_homogeneity(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((6, 4))
        a = estimate_rademacher(X, 1.0, n_draws=64, seed=5)
        b = estimate_rademacher(2.5 * X, 1.0, n_draws=64, seed=5)
        assert b == pytest.approx(2.5 * a, rel=1e-12)


class TestVerifyTailBound:
    def test_default_environment_tail(self):
        env = default_environment()
        report = verify_tail_bound(env, 50, gamma=0.25, delta=0.1,
                                   meta_reps=100, seed=7)
        d = report.to_dict()
        assert d["empirical_tail_freq"] <= 0.1
        assert d["lemma1_bound"] == pytest.approx(lemma1_bound(env.C, 0.1, 50))
        assert 0.0 <= d["skip_rate"] <= 1.0
        assert d["mean_tail_estimate"] >= 0.0

    def test_tail_estimate_decreases_with_t(self):
        env = default_environment()
        means = [
            verify_tail_bound(env, t, gamma=0.25, delta=0.1, meta_reps=200,
                              seed=7).mean_tail_estimate
            for t in (25, 100)
        ]
        assert means[1] < means[0]

    def test_infeasible_gamma_raises(self):
        env = default_environment()
        with pytest.raises(DataError):
            verify_tail_bound(env, 25, gamma=1e-9, delta=0.1, meta_reps=20,
                              seed=3)

    def test_default_environment_validation(self):
        with pytest.raises(ConfigError):
            default_environment(C=1)
        with pytest.raises(ConfigError):
            default_environment(C=6)

    def test_environment_requires_clipped_loss(self):
        env = default_environment()
        with pytest.raises(ConfigError):
            FiniteEnvironment(
                representations=env.representations,
                task_sampler=env.task_sampler,
                noise_sigma=env.noise_sigma,
                per_task_hypothesis_bound=env.per_task_hypothesis_bound,
                m=env.m,
                loss=LossKind("squared"),
            )
