"""Classification data: IDX ingestion, PCA reduction, splits and a synthetic fallback."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import BadMagic, CountMismatch, IoError, RangeViolation, TruncatedFile

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class ClassificationDataset:
    features: np.ndarray  # (P, d)
    labels: np.ndarray  # (P,) int
    train_index: np.ndarray
    test_index: np.ndarray

    def __post_init__(self):
        if len(np.intersect1d(self.train_index, self.test_index)):
            raise ValueError("train and test index sets overlap")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def test_fraction(self) -> float:
        return len(self.test_index) / (len(self.train_index) + len(self.test_index))

    def split(self):
        return (
            self.features[self.train_index],
            self.labels[self.train_index],
            self.features[self.test_index],
            self.labels[self.test_index],
        )


def split_indices(n: int, test_fraction: float = 0.2, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def one_hot_targets(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """One-vs-rest targets in {-1, +1}."""
    y = -np.ones((len(labels), n_classes))
    y[np.arange(len(labels)), labels] = 1.0
    return y


# ----------------------------------------------------------------------- IDX


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _parse_idx(raw: bytes, magic: int, name: str) -> tuple[tuple[int, ...], bytes]:
    if len(raw) < 4:
        raise TruncatedFile(f"{name}: missing header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagic(f"{name}: magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFile(f"{name}: header needs {header} bytes, file has {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims))
    body = raw[header:]
    if len(body) < size:
        raise TruncatedFile(f"{name}: expected {size} data bytes, found {len(body)}")
    return dims, body[:size]


def read_idx_images(path) -> np.ndarray:
    dims, body = _parse_idx(_read_bytes(path), IDX_IMAGES_MAGIC, str(path))
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(dims[0], dims[1] * dims[2])
    return pixels.astype(float) / 255.0


def read_idx_labels(path) -> np.ndarray:
    _, body = _parse_idx(_read_bytes(path), IDX_LABELS_MAGIC, str(path))
    return np.frombuffer(body, dtype=np.uint8).astype(np.int64)


def load_idx(images_path, labels_path, test_fraction: float = 0.2, seed: int = 0) -> ClassificationDataset:
    """Parse an IDX image/label pair into flattened rows scaled to [0, 1]."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    train, test = split_indices(len(labels), test_fraction, seed)
    return ClassificationDataset(images, labels, train, test)


def write_idx(path, array: np.ndarray, labels: bool = False) -> None:
    """Write uint8 data in IDX format (used to build fixtures)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = IDX_LABELS_MAGIC if labels else IDX_IMAGES_MAGIC
    ndim = magic & 0xFF
    if array.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array")
    header = struct.pack(">I", magic) + struct.pack(f">{ndim}I", *array.shape)
    try:
        Path(path).write_bytes(header + array.tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


# ----------------------------------------------------------------------- PCA


@dataclass
class PCABasis:
    mean: np.ndarray
    components: np.ndarray  # (d, k), orthonormal columns
    explained_variance: np.ndarray
    col_min: np.ndarray
    col_max: np.ndarray

    def project(self, data: np.ndarray, scale: bool = True) -> np.ndarray:
        z = (np.asarray(data, dtype=float) - self.mean) @ self.components
        if not scale:
            return z
        span = np.where(self.col_max > self.col_min, self.col_max - self.col_min, 1.0)
        return (z - self.col_min) / span

    def reconstruct(self, projected: np.ndarray) -> np.ndarray:
        """Inverse of ``project(data, scale=False)``."""
        return projected @ self.components.T + self.mean


def pca_reduce(data: np.ndarray, k: int) -> tuple[np.ndarray, PCABasis]:
    """Top-``k`` principal components, each column min-max scaled to [0, 1].

    Each basis vector is signed so that its largest-magnitude entry is positive.
    """
    data = np.asarray(data, dtype=float)
    p, d = data.shape
    if not 1 <= k <= min(p, d):
        raise RangeViolation(f"k={k} outside [1, {min(p, d)}]")
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / max(p - 1, 1)
    w, v = np.linalg.eigh(cov)
    order = np.argsort(-w, kind="stable")[:k]
    w, v = w[order], v[:, order]
    pivot = np.argmax(np.abs(v), axis=0)
    v = v * np.sign(v[pivot, np.arange(k)])
    z = centered @ v
    basis = PCABasis(mean, v, w, z.min(axis=0), z.max(axis=0))
    return basis.project(data), basis


# ----------------------------------------------------------------- synthetic


def gaussian_mixture(
    n_samples: int = 10000,
    n_classes: int = 10,
    dim: int = 20,
    separation: float = 1.0,
    seed: int = 0,
    test_fraction: float = 0.2,
) -> ClassificationDataset:
    """Seeded Gaussian mixture: class means ~ N(0, separation^2), unit noise."""
    rng = np.random.default_rng(seed)
    means = separation * rng.standard_normal((n_classes, dim))
    labels = rng.integers(0, n_classes, n_samples)
    features = means[labels] + rng.standard_normal((n_samples, dim))
    train, test = split_indices(n_samples, test_fraction, seed)
    return ClassificationDataset(features, labels, train, test)
