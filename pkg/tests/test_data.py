"""Dataset construction: two-modes generator, CSV task tables, IDX files,
and the one-vs-one tournament pipeline."""

import numpy as np
import pytest

from mmtl.core import ConfigError, DataError
from mmtl.data import (TableSchema, TaskTable, TournamentSpec, TwoModesConfig,
                       build_tournament_tasks, generate_ltl_two_modes_test_tasks,
                       generate_two_modes, keyed_rng, load_idx_images,
                       load_idx_labels, load_task_table, tournament_decode,
                       two_modes_center, write_idx_images, write_idx_labels,
                       write_task_table)


class TestTwoModes:
    def test_default_shapes(self):
        train, test, true_params = generate_two_modes(TwoModesConfig())
        assert train.T == 55 and test.T == 55 and train.d == 10
        assert all(t.m == 5 for t in train.tasks)
        assert all(t.m == 50 for t in test.tasks)
        assert true_params.shape == (55, 10)

    def test_center_on_sphere(self):
        cfg = TwoModesConfig(seed=4)
        assert np.linalg.norm(two_modes_center(cfg)) == pytest.approx(
            cfg.mode_radius)

    def test_deterministic(self):
        a = generate_two_modes(TwoModesConfig(seed=9))
        b = generate_two_modes(TwoModesConfig(seed=9))
        assert np.array_equal(a[0].tasks[3].X, b[0].tasks[3].X)
        assert np.array_equal(a[2], b[2])

    def test_degenerate_sigmas(self):
        cfg = TwoModesConfig(sigma_task=0.0, sigma_noise=0.0, seed=1)
        _, _, W = generate_two_modes(cfg)
        mu = two_modes_center(cfg)
        assert np.allclose(W[:50], mu)
        assert np.allclose(W[50:], -2.0 * mu)

    def test_mode_means(self):
        # Type-1 task parameters average to mu (3-sigma Monte Carlo check).
        cfg = TwoModesConfig(n_type1=4000, n_type2=1, sigma_task=0.5, seed=2)
        _, _, W = generate_two_modes(cfg)
        mu = two_modes_center(cfg)
        se = cfg.sigma_task / np.sqrt(4000)
        assert np.all(np.abs(W[:4000].mean(axis=0) - mu) < 3 * se + 1e-9)

    def test_ltl_tasks(self):
        cfg = TwoModesConfig(seed=5)
        mu = two_modes_center(cfg)
        train, test = generate_ltl_two_modes_test_tasks(cfg, mu, 55)
        assert train.T == 55 and test.T == 55
        assert all(t.m == cfg.m_train for t in train.tasks)
        with pytest.raises(DataError):
            generate_ltl_two_modes_test_tasks(cfg, mu[:3], 10)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TwoModesConfig(n_type1=0)
        with pytest.raises(ConfigError):
            TwoModesConfig(sigma_task=-1.0)

    def test_keyed_rng_streams_differ(self):
        a = keyed_rng(0, 1).standard_normal(4)
        b = keyed_rng(0, 2).standard_normal(4)
        assert not np.allclose(a, b)


SCHEMA = TableSchema(task_column="tid", feature_columns=("a", "b"),
                     target_column="y")


def write_toy_table(path, bad_cell=None):
    lines = ["tid,a,b,y"]
    for t in range(3):
        for i in range(4):
            y = "oops" if bad_cell == (t, i) else str(t + 0.5 * i)
            lines.append("task%d,%d,%d,%s" % (t, i, t, y))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestTaskTable:
    def test_split_counts(self, tmp_path):
        path = tmp_path / "toy.csv"
        write_toy_table(path)
        table = load_task_table(path, SCHEMA, holdout=1)
        train, test = table.to_datasets()
        assert train.T == 3 and test.T == 3
        assert all(t.m == 3 for t in train.tasks)
        assert all(t.m == 1 for t in test.tasks)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("tid,a,y\nt,1,2\n", encoding="utf-8")
        with pytest.raises(DataError, match="missing columns"):
            load_task_table(path, SCHEMA, holdout=0)

    def test_non_numeric_cell_names_row(self, tmp_path):
        path = tmp_path / "toy.csv"
        write_toy_table(path, bad_cell=(1, 2))
        with pytest.raises(DataError, match="row 8"):
            load_task_table(path, SCHEMA, holdout=1)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "toy.csv"
        write_toy_table(path)
        table = load_task_table(path, SCHEMA, holdout=1, seed=3)
        out = tmp_path / "copy.csv"
        write_task_table(table, out, SCHEMA)
        again = load_task_table(out, SCHEMA, holdout=1, seed=3, shuffle=False)
        assert again.T == table.T and again.d == table.d

    def test_computer_shaped_table(self, computer_csv):
        schema = TableSchema(task_column="person",
                             feature_columns=tuple("f%d" % j for j in range(13)),
                             target_column="rating")
        table = load_task_table(computer_csv, schema, holdout=4)
        train, test = table.to_datasets()
        assert train.T == 189 and train.d == 13
        assert all(t.m == 16 for t in train.tasks)
        assert all(t.m == 4 for t in test.tasks)


class TestIdx:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(6)
        images = np.round(rng.random((7, 12)) * 255) / 255
        labels = rng.integers(0, 10, 7)
        write_idx_images(tmp_path / "im.idx", images, 3, 4)
        write_idx_labels(tmp_path / "lb.idx", labels)
        assert np.allclose(load_idx_images(tmp_path / "im.idx"), images)
        assert np.array_equal(load_idx_labels(tmp_path / "lb.idx"), labels)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(b"\x00" * 16)
        with pytest.raises(DataError, match="magic"):
            load_idx_images(path)
        with pytest.raises(DataError):
            load_idx_labels(path)


class TestTournament:
    def test_pairs_lexicographic(self):
        spec = TournamentSpec()
        assert spec.n_pairs == 45
        assert spec.pairs[0] == (0, 1)
        assert spec.pairs[-1] == (8, 9)
        assert spec.pairs == sorted(spec.pairs)

    def test_three_class_fixture(self):
        rng = np.random.default_rng(7)
        images = rng.random((30, 9))
        labels = np.repeat([0, 1, 2], 10)
        spec = TournamentSpec(n_classes=3, pca_dim=4, train_fraction=0.5)
        dataset, projection, mean = build_tournament_tasks(images, labels, spec)
        assert dataset.T == 3 and dataset.d == 4
        assert projection.shape == (9, 4) and mean.shape == (9,)
        for task in dataset.tasks:
            assert set(np.unique(task.y)) == {-1.0, 1.0}

    def test_missing_class(self):
        rng = np.random.default_rng(8)
        with pytest.raises(DataError, match="absent"):
            build_tournament_tasks(rng.random((10, 4)), np.zeros(10, dtype=int),
                                   TournamentSpec(n_classes=2, pca_dim=2,
                                                  train_fraction=0.5))

    def test_decode_unanimous(self):
        spec = TournamentSpec()
        scores = [1.0 if a == 0 else -1.0 for (a, b) in spec.pairs]
        assert tournament_decode(scores, spec) == 0

    def test_decode_matches_vote_count(self):
        spec = TournamentSpec()
        rng = np.random.default_rng(9)
        for _ in range(50):
            scores = rng.standard_normal(45)
            votes = np.zeros(10, dtype=int)
            for (a, b), s in zip(spec.pairs, scores):
                votes[a if s >= 0 else b] += 1
            assert tournament_decode(scores, spec) == int(np.argmax(votes))

    def test_decode_wrong_length(self):
        with pytest.raises(DataError):
            tournament_decode(np.zeros(10), TournamentSpec())
