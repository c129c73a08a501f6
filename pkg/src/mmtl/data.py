"""Dataset construction: the two-modes synthetic generator, schema-mapped
tabular task ingestion, and the pairwise-tournament reduction for image
classification data in IDX format.

All randomness flows through keyed generators derived from
``numpy.random.SeedSequence(entropy=seed, spawn_key=stream)``, so every
draw is reproducible independent of execution order. The underlying bit
generator is NumPy's default PCG64.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ConfigError, DataError, MultiTaskDataset, TaskSample
from .linalg import pca_fit_transform

_STREAM_MU = 0
_STREAM_TRAIN = 1
_STREAM_LTL = 2
_STREAM_SPLIT = 3


def keyed_rng(seed: int, *stream: int) -> np.random.Generator:
    """Deterministic generator keyed by (seed, stream indices)."""
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=tuple(int(s) for s in stream))
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# Two-modes synthetic generator


@dataclass(frozen=True)
class TwoModesConfig:
    """Two clusters of linear regression tasks.

    Type-1 task parameters are Gaussian around a center mu drawn uniformly
    from the sphere of radius ``mode_radius``; type-2 parameters are
    Gaussian around -2*mu. Inputs are products of standard normals and
    targets are linear plus centered Gaussian noise.
    """

    d: int = 10
    n_type1: int = 50
    n_type2: int = 5
    mode_radius: float = 5.0
    sigma_task: float = 0.5
    sigma_noise: float = 1.0
    m_train: int = 5
    m_test: int = 50
    seed: int = 0

    def __post_init__(self):
        if min(self.d, self.n_type1, self.n_type2, self.m_train, self.m_test) < 1:
            raise ConfigError("dimensions, counts, and sample sizes must be >= 1")
        if self.sigma_task < 0 or self.sigma_noise < 0:
            raise ConfigError("sigmas must be nonnegative")
        if not self.mode_radius > 0:
            raise ConfigError("mode_radius must be positive")


def two_modes_center(cfg: TwoModesConfig) -> np.ndarray:
    """The cluster center mu used by a given config/seed (radius-scaled)."""
    g = keyed_rng(cfg.seed, _STREAM_MU).standard_normal(cfg.d)
    return cfg.mode_radius * g / np.linalg.norm(g)


def _draw_tasks(cfg: TwoModesConfig, mu: np.ndarray, n1: int, n2: int,
                stream: int, seed: int):
    params = np.empty((n1 + n2, cfg.d))
    train_tasks, test_tasks = [], []
    for t in range(n1 + n2):
        rng = keyed_rng(seed, stream, t)
        center = mu if t < n1 else -2.0 * mu
        w = center + cfg.sigma_task * rng.standard_normal(cfg.d)
        params[t] = w
        X = rng.standard_normal((cfg.m_train + cfg.m_test, cfg.d))
        y = X @ w + cfg.sigma_noise * rng.standard_normal(cfg.m_train + cfg.m_test)
        train_tasks.append(TaskSample(t, X[:cfg.m_train], y[:cfg.m_train]))
        test_tasks.append(TaskSample(t, X[cfg.m_train:], y[cfg.m_train:]))
    train = MultiTaskDataset(tuple(train_tasks), cfg.d, "regression")
    test = MultiTaskDataset(tuple(test_tasks), cfg.d, "regression")
    return train, test, params


def generate_two_modes(cfg: TwoModesConfig):
    """Generate the training-task population.

    Returns (train, test, true_params): two datasets over the same T =
    n_type1 + n_type2 tasks (per-task m_train / m_test points) and the
    (T, d) matrix of true task parameters.
    """
    mu = two_modes_center(cfg)
    return _draw_tasks(cfg, mu, cfg.n_type1, cfg.n_type2, _STREAM_TRAIN, cfg.seed)


def generate_ltl_two_modes_test_tasks(cfg: TwoModesConfig, mu: np.ndarray,
                                      n_tasks: int, seed: int | None = None):
    """Draw fresh tasks from the same environment for LTL evaluation.

    Mode proportions follow the config's n_type1 : n_type2 ratio. ``seed``
    defaults to the config seed (the LTL draw uses its own stream either
    way).
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (cfg.d,):
        raise DataError("mu dimension %d != config dimension %d"
                        % (mu.size, cfg.d))
    if n_tasks < 1:
        raise ConfigError("n_tasks must be >= 1")
    n1 = round(n_tasks * cfg.n_type1 / (cfg.n_type1 + cfg.n_type2))
    n2 = n_tasks - n1
    use_seed = cfg.seed if seed is None else seed
    train, test, _ = _draw_tasks(cfg, mu, n1, n2, _STREAM_LTL, use_seed)
    return train, test


# ---------------------------------------------------------------------------
# Tabular task ingestion


@dataclass(frozen=True)
class TableSchema:
    """Column mapping for CSV task tables."""

    task_column: str
    feature_columns: tuple[str, ...]
    target_column: str

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        if not self.feature_columns:
            raise ConfigError("schema needs at least one feature column")


@dataclass(frozen=True)
class TaskTable:
    """Rows grouped per task with a train/test split per task.

    ``task_keys`` preserves the original task identifiers; tasks are
    indexed 0..T-1 in first-appearance order.
    """

    task_keys: tuple[str, ...]
    X: tuple[np.ndarray, ...]          # per task, (n_t, d)
    y: tuple[np.ndarray, ...]          # per task, (n_t,)
    train_idx: tuple[np.ndarray, ...]
    test_idx: tuple[np.ndarray, ...]

    @property
    def T(self) -> int:
        return len(self.task_keys)

    @property
    def d(self) -> int:
        return self.X[0].shape[1]

    def to_datasets(self, kind: str = "regression"):
        """Materialize (train, test) MultiTaskDatasets from the split."""
        train_tasks, test_tasks = [], []
        for t in range(self.T):
            train_tasks.append(TaskSample(t, self.X[t][self.train_idx[t]],
                                          self.y[t][self.train_idx[t]]))
            test_tasks.append(TaskSample(t, self.X[t][self.test_idx[t]],
                                         self.y[t][self.test_idx[t]]))
        return (MultiTaskDataset(tuple(train_tasks), self.d, kind),
                MultiTaskDataset(tuple(test_tasks), self.d, kind))


def load_task_table(path, schema: TableSchema, holdout: int,
                    seed: int = 0, shuffle: bool = True) -> TaskTable:
    """Load a UTF-8 CSV with a header row into a TaskTable.

    ``holdout`` rows per task are held out as the test split after a
    seeded per-task shuffle (set ``shuffle=False`` to hold out the last
    rows in file order).
    """
    if holdout < 0:
        raise ConfigError("holdout must be nonnegative")
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = [schema.task_column, *schema.feature_columns, schema.target_column]
        missing = [c for c in needed if c not in header]
        if missing:
            raise DataError("missing columns in %s: %s" % (path.name, missing))
        groups: dict[str, list[tuple[np.ndarray, float]]] = {}
        order: list[str] = []
        for i, row in enumerate(reader, start=2):
            try:
                x = np.array([float(row[c]) for c in schema.feature_columns])
                target = float(row[schema.target_column])
            except (TypeError, ValueError):
                raise DataError("non-numeric cell at %s row %d" % (path.name, i))
            key = row[schema.task_column]
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append((x, target))
    if not order:
        raise DataError("no data rows in %s" % path.name)
    X, y, train_idx, test_idx = [], [], [], []
    for t, key in enumerate(order):
        rows = groups[key]
        if len(rows) <= holdout:
            raise DataError("task %r has %d rows, cannot hold out %d"
                            % (key, len(rows), holdout))
        X.append(np.stack([r[0] for r in rows]))
        y.append(np.array([r[1] for r in rows]))
        idx = np.arange(len(rows))
        if shuffle:
            idx = keyed_rng(seed, _STREAM_SPLIT, t).permutation(idx)
        cut = len(rows) - holdout
        train_idx.append(np.sort(idx[:cut]))
        test_idx.append(np.sort(idx[cut:]))
    return TaskTable(tuple(order), tuple(X), tuple(y),
                     tuple(train_idx), tuple(test_idx))


def write_task_table(table: TaskTable, path, schema: TableSchema) -> None:
    """Write a TaskTable back out under the given schema (row order: task
    by task, original row order)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema.task_column, *schema.feature_columns,
                         schema.target_column])
        for t, key in enumerate(table.task_keys):
            for x, target in zip(table.X[t], table.y[t]):
                writer.writerow([key, *(repr(float(v)) for v in x),
                                 repr(float(target))])


def write_dataset_dump(train: MultiTaskDataset, test: MultiTaskDataset,
                       csv_path, sidecar_path, config_echo: dict) -> None:
    """Dump a generated dataset pair as CSV plus a JSON sidecar with the
    generating config."""
    d = train.d
    schema = TableSchema("task", tuple("f%d" % j for j in range(d)), "target")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema.task_column, "split", *schema.feature_columns,
                         schema.target_column])
        for split, ds in (("train", train), ("test", test)):
            for task in ds.tasks:
                for x, target in zip(task.X, task.y):
                    writer.writerow([task.task_id, split,
                                     *(repr(float(v)) for v in x),
                                     repr(float(target))])
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(config_echo, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# IDX images and the pairwise tournament reduction

_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def load_idx_images(path) -> np.ndarray:
    """Read an IDX image file into a (n, rows*cols) float array in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise DataError("IDX image file too short: %s" % path)
    magic, n, rows, cols = struct.unpack(">iiii", raw[:16])
    if magic != _IDX_IMAGES_MAGIC:
        raise DataError("bad IDX image magic 0x%08x in %s" % (magic, path))
    data = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if data.size != n * rows * cols:
        raise DataError("IDX image payload size mismatch in %s" % path)
    return data.reshape(n, rows * cols).astype(float) / 255.0


def load_idx_labels(path) -> np.ndarray:
    """Read an IDX label file into an int array; labels must be 0..9."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise DataError("IDX label file too short: %s" % path)
    magic, n = struct.unpack(">ii", raw[:8])
    if magic != _IDX_LABELS_MAGIC:
        raise DataError("bad IDX label magic 0x%08x in %s" % (magic, path))
    labels = np.frombuffer(raw, dtype=np.uint8, offset=8)
    if labels.size != n:
        raise DataError("IDX label payload size mismatch in %s" % path)
    if labels.size and labels.max() > 9:
        raise DataError("IDX labels out of range 0-9 in %s" % path)
    return labels.astype(int)


def write_idx_images(path, images: np.ndarray, rows: int, cols: int) -> None:
    """Write (n, rows*cols) values in [0, 1] as an IDX image file."""
    images = np.asarray(images)
    n = images.shape[0]
    payload = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">iiii", _IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(payload.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">ii", _IDX_LABELS_MAGIC, labels.size))
        fh.write(labels.tobytes())


@dataclass(frozen=True)
class TournamentSpec:
    """All-pairs reduction of an n-class problem to binary tasks."""

    n_classes: int = 10
    pca_dim: int = 50
    train_fraction: float = 0.02

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError("need at least two classes")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ConfigError("train_fraction must lie in (0, 1]")
        if self.pca_dim < 1:
            raise ConfigError("pca_dim must be >= 1")

    @property
    def pairs(self) -> list[tuple[int, int]]:
        """The unordered class pairs in lexicographic order."""
        return [(a, b) for a in range(self.n_classes)
                for b in range(a + 1, self.n_classes)]

    @property
    def n_pairs(self) -> int:
        return self.n_classes * (self.n_classes - 1) // 2


def build_tournament_tasks(images: np.ndarray, labels: np.ndarray,
                           spec: TournamentSpec):
    """Build the binary one-vs-one task dataset from raw training images.

    PCA (to ``spec.pca_dim``) is fit on the full training set; per class
    only the first ceil(train_fraction * class size) images in file order
    are retained. Task (a, b) labels class a as +1 and class b as -1.

    Returns (dataset, projection, mean): the classification dataset, the
    (d, pca_dim) PCA projection, and the (d,) column mean needed to map
    further images into the same feature space.
    """
    images = np.asarray(images, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if images.shape[0] != labels.shape[0]:
        raise DataError("image/label count mismatch")
    mean = images.mean(axis=0)
    projection, reduced = pca_fit_transform(images, spec.pca_dim)
    kept: dict[int, np.ndarray] = {}
    for c in range(spec.n_classes):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            raise DataError("class %d absent from the training subsample" % c)
        keep = math.ceil(spec.train_fraction * idx.size)
        kept[c] = reduced[idx[:keep]]
    tasks = []
    for task_id, (a, b) in enumerate(spec.pairs):
        X = np.vstack([kept[a], kept[b]])
        y = np.concatenate([np.ones(len(kept[a])), -np.ones(len(kept[b]))])
        tasks.append(TaskSample(task_id, X, y))
    dataset = MultiTaskDataset(tuple(tasks), spec.pca_dim, "classification")
    return dataset, projection, mean


def build_mnist_tournament(images_path, labels_path, spec: TournamentSpec):
    """IDX-file front end for :func:`build_tournament_tasks`."""
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    return build_tournament_tasks(images, labels, spec)


def tournament_features(images: np.ndarray, projection: np.ndarray,
                        mean: np.ndarray) -> np.ndarray:
    """Map raw images into the tournament's PCA feature space."""
    return (np.asarray(images, dtype=float) - mean) @ projection


def tournament_decode(scores, spec: TournamentSpec) -> int:
    """Round-robin max-wins decoding of one input's pairwise scores.

    Score >= 0 (including exactly 0) votes for the lexicographically-first
    class of the pair; the class with the most votes wins, ties broken by
    the lowest class index.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size != spec.n_pairs:
        raise DataError("expected %d pairwise scores, got %d"
                        % (spec.n_pairs, scores.size))
    votes = np.zeros(spec.n_classes, dtype=int)
    for (a, b), s in zip(spec.pairs, scores):
        if s >= 0:
            votes[a] += 1
        else:
            votes[b] += 1
    return int(np.argmax(votes))
