"""Shared fixtures: synthetic image/label IDX files and a rating-table CSV."""

import csv

import numpy as np
import pytest

from mmtl.data import write_idx_images, write_idx_labels

IMAGE_SIDE = 8
N_PER_CLASS = 400
N_TRAIN_IMAGES = 3000


@pytest.fixture(scope="session")
def idx_files(tmp_path_factory):
    """Ten-class synthetic image corpus in IDX format.

    Classes are Gaussian blobs around well-separated means in pixel
    space, so linear one-vs-one classifiers can succeed, with enough
    overlap that capacity still matters.
    """
    root = tmp_path_factory.mktemp("idx")
    rng = np.random.default_rng(5)
    dim = IMAGE_SIDE * IMAGE_SIDE
    means = rng.standard_normal((10, dim)) * 2.0
    images, labels = [], []
    for c in range(10):
        images.append(np.clip(means[c] + rng.standard_normal((N_PER_CLASS, dim)),
                              -4, 4))
        labels.append(np.full(N_PER_CLASS, c))
    X = np.vstack(images)
    y = np.concatenate(labels)
    perm = rng.permutation(y.size)
    X = (X[perm] + 4) / 8  # into [0, 1]
    y = y[perm]
    paths = {
        "train_images": root / "train_images.idx",
        "train_labels": root / "train_labels.idx",
        "test_images": root / "test_images.idx",
        "test_labels": root / "test_labels.idx",
    }
    write_idx_images(paths["train_images"], X[:N_TRAIN_IMAGES],
                     IMAGE_SIDE, IMAGE_SIDE)
    write_idx_labels(paths["train_labels"], y[:N_TRAIN_IMAGES])
    write_idx_images(paths["test_images"], X[N_TRAIN_IMAGES:],
                     IMAGE_SIDE, IMAGE_SIDE)
    write_idx_labels(paths["test_labels"], y[N_TRAIN_IMAGES:])
    return {k: str(v) for k, v in paths.items()}


@pytest.fixture(scope="session")
def computer_csv(tmp_path_factory):
    """Synthetic stand-in for a per-person product-rating table.

    189 rater tasks, 20 rows each, 13 binary features, ratings on a 0-10
    scale generated from noisy per-rater linear preferences.
    """
    path = tmp_path_factory.mktemp("tables") / "ratings.csv"
    rng = np.random.default_rng(11)
    d = 13
    shared = rng.standard_normal(d)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["person"] + ["f%d" % j for j in range(d)] + ["rating"])
        for t in range(189):
            w = shared + 0.5 * rng.standard_normal(d)
            for _ in range(20):
                x = rng.integers(0, 2, d).astype(float)
                rating = float(np.clip(round(x @ w + 0.3 * rng.standard_normal()),
                                       0, 10))
                writer.writerow(["p%03d" % t] + [int(v) for v in x] + [rating])
    return str(path)
