"""EP/AEP parameterizations: prediction, risks, penalties, projections,
and per-task risk gradients."""

import numpy as np
import pytest

from mmtl.core import (ConfigError, DataError, LossKind, MultiTaskDataset,
                       TaskSample, empirical_risk)
from mmtl.models import (AepConfig, AepParams, EpConfig, EpParams, predict,
                         project_feasible, regularizer_value,
                         risk_gradient_contribution, risk_vector)

SQ = LossKind("squared")


def small_dataset(seed=0, T=3, d=2, m=4):
    rng = np.random.default_rng(seed)
    tasks = tuple(TaskSample(t, rng.standard_normal((m, d)),
                             rng.standard_normal(m)) for t in range(T))
    return MultiTaskDataset(tasks, d)


class TestPredict:
    def test_ep(self):
        model = EpParams([1.0, 0.0], [[0.0, 1.0]])
        assert predict(model, 0, [1.0, 1.0]) == 2.0

    def test_ep_zero_offsets_is_shared_model(self):
        model = EpParams([2.0, -1.0], np.zeros((3, 2)))
        x = np.array([0.5, 0.5])
        assert all(predict(model, t, x) == predict(model, 0, x) for t in range(3))

    def test_aep(self):
        assert predict(AepParams([[2.0, 0.0]]), 0, [3.0, 1.0]) == 6.0

    def test_errors(self):
        model = AepParams([[1.0, 0.0]])
        with pytest.raises(DataError):
            predict(model, 5, [1.0, 0.0])
        with pytest.raises(DataError):
            predict(model, 0, [1.0])


class TestRiskVector:
    def test_zero_model(self):
        data = small_dataset()
        risks = risk_vector(EpParams.zeros(data.T, data.d), data, SQ)
        expected = [np.mean(t.y ** 2) for t in data.tasks]
        assert np.allclose(risks, expected)

    def test_matches_per_task_loop(self):
        data = small_dataset(1)
        rng = np.random.default_rng(2)
        model = AepParams(rng.standard_normal((data.T, data.d)))
        risks = risk_vector(model, data, SQ)
        for t, task in enumerate(data.tasks):
            direct = empirical_risk(task, lambda x, t=t: predict(model, t, x), SQ)
            assert risks[t] == pytest.approx(direct)

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            risk_vector(EpParams.zeros(2, 2), small_dataset(), SQ)


class TestRegularizer:
    def test_values(self):
        ep = EpParams([1.0, 0.0], np.zeros((4, 2)))
        assert regularizer_value(ep, EpConfig("regularized", lam0=2.0,
                                              lam1=1.0)) == 2.0
        aep = AepParams(np.diag([3.0, 1.0]))
        assert regularizer_value(aep, AepConfig("regularized",
                                                lam=0.5)) == pytest.approx(2.0)
        assert regularizer_value(AepParams.zeros(2, 2),
                                 AepConfig("regularized", lam=1.0)) == 0.0

    def test_constrained_config_rejected(self):
        with pytest.raises(ConfigError):
            regularizer_value(EpParams.zeros(1, 1),
                              EpConfig("constrained", tau0=1.0, tau1=1.0))


class TestProjectFeasible:
    def test_ep(self):
        cfg = EpConfig("constrained", tau0=1.0, tau1=2.0)
        model = EpParams([3.0, 4.0], [[0.0, 1.0], [0.0, 4.0]])
        out = project_feasible(model, cfg)
        assert np.allclose(out.v0, [0.6, 0.8])
        assert np.allclose(out.Vt, [[0.0, 1.0], [0.0, 2.0]])
        again = project_feasible(out, cfg)
        assert np.allclose(again.v0, out.v0) and np.allclose(again.Vt, out.Vt)

    def test_aep(self):
        out = project_feasible(AepParams(np.diag([3.0, 1.0])),
                               AepConfig("constrained", r=2.0))
        assert np.allclose(out.W, np.diag([2.0, 0.0]), atol=1e-8)

    def test_regularized_config_rejected(self):
        with pytest.raises(ConfigError):
            project_feasible(EpParams.zeros(1, 1),
                             EpConfig("regularized", lam0=1.0, lam1=1.0))


class TestRiskGradient:
    def test_hand_example(self):
        data = MultiTaskDataset((TaskSample(0, [[1.0, 0.0]], [1.0]),), 2)
        g_shared, g_task = risk_gradient_contribution(
            EpParams.zeros(1, 2), data, SQ, 0)
        assert np.allclose(g_shared, [-2.0, 0.0])
        assert np.allclose(g_task, [-2.0, 0.0])

    def test_hinge_inactive_margins(self):
        data = MultiTaskDataset((TaskSample(0, [[1.0]], [1.0]),), 1,
                                "classification")
        direction = risk_gradient_contribution(AepParams([[5.0]]), data,
                                               LossKind("hinge"), 0)
        assert np.allclose(direction, 0.0)

    def test_finite_differences(self):
        data = small_dataset(3)
        rng = np.random.default_rng(4)
        W = rng.standard_normal((data.T, data.d))
        eps = 1e-6
        for t in range(data.T):
            direction = risk_gradient_contribution(AepParams(W), data, SQ, t)
            for j in range(data.d):
                Wp, Wm = W.copy(), W.copy()
                Wp[t, j] += eps
                Wm[t, j] -= eps
                num = (risk_vector(AepParams(Wp), data, SQ)[t]
                       - risk_vector(AepParams(Wm), data, SQ)[t]) / (2 * eps)
                assert direction[t, j] == pytest.approx(num, abs=1e-5)

    def test_unknown_task(self):
        with pytest.raises(DataError):
            risk_gradient_contribution(EpParams.zeros(3, 2), small_dataset(),
                                       SQ, 7)


class TestConfigs:
    def test_validation(self):
        with pytest.raises(ConfigError):
            EpConfig("constrained", tau0=1.0)
        with pytest.raises(ConfigError):
            EpConfig("regularized", lam0=-1.0, lam1=1.0)
        with pytest.raises(ConfigError):
            AepConfig("ball", r=1.0)
        with pytest.raises(ConfigError):
            AepConfig("constrained", r=0.0)
