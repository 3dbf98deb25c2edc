"""Experiment datasets: generated cosine data, MNIST (IDX files) and fraud CSV.

Every loader returns a :class:`Dataset` whose features are min-max scaled into
``[0, pi]``, the domain on which an RX angle encoding is injective.  The
scaling record and the preprocessing choices travel with the data in
``provenance`` and are written to a JSON sidecar by :meth:`Dataset.dump`.
"""
from __future__ import annotations

import csv
import gzip
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .model import CLASSIFICATION, REGRESSION

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
ENCODING_RANGE = np.pi


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    task: str
    provenance: dict = field(default_factory=dict)
    scale_min: np.ndarray | None = None
    scale_max: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise InputError("x must be (rows, J) with one target per row")
        if self.scale_min is None:
            self.scale_min = np.zeros(self.dim)
            self.scale_max = np.full(self.dim, ENCODING_RANGE)

    def __len__(self):
        return self.x.shape[0]

    @property
    def dim(self):
        return self.x.shape[1]

    def rows(self):
        return list(zip(self.x, self.y))

    def subset(self, index):
        return Dataset(self.x[index], self.y[index], self.task, self.provenance,
                       self.scale_min, self.scale_max)

    def inverse_transform(self, x):
        """Undo the min-max scaling back to raw feature units."""
        span = np.where(self.scale_max > self.scale_min, self.scale_max - self.scale_min, 1.0)
        return self.scale_min + np.asarray(x) / ENCODING_RANGE * span

    def dump(self, path):
        """Write ``path`` as CSV (x_1..x_J, y) plus ``path.json`` with provenance."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x_{j + 1}" for j in range(self.dim)] + ["y"])
            for xi, yi in zip(self.x, self.y):
                writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])
        sidecar = {
            "task": self.task,
            "rows": len(self),
            "dim": self.dim,
            "scale_min": [float(v) for v in self.scale_min],
            "scale_max": [float(v) for v in self.scale_max],
            "provenance": self.provenance,
        }
        path.with_name(path.name + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def minmax_scale(x):
    """Scale each column onto ``[0, pi]``; constant columns map to 0."""
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (x - lo) / span * ENCODING_RANGE, lo, hi


def cosine_target(x):
    return 0.7 * np.mean(np.cos(np.atleast_2d(x)), axis=1)


def gen_cosine(n, dim, seed=0):
    """Rows uniform on ``[0, pi]^dim`` with ``y = 0.7 * mean_j cos(x_j)``."""
    if n < 1:
        raise InputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, ENCODING_RANGE, size=(n, dim))
    prov = {"source": "cosine", "target": "0.7*mean(cos(x_j))", "seed": seed}
    return Dataset(x, cosine_target(x), REGRESSION, prov)


# -- IDX ---------------------------------------------------------------------

def _open_bytes(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path, expected_magic):
    """Parse an IDX file into a uint8 array of its declared shape."""
    raw = _open_bytes(path)
    if len(raw) < 4:
        raise FormatError(f"{path}: file too short for an IDX header", offset=len(raw))
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise FormatError(
            f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}", offset=0)
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated IDX header", offset=len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])
    size = int(np.prod(dims))
    if len(raw) < header_end + size:
        raise FormatError(
            f"{path}: truncated IDX payload, expected {size} bytes", offset=len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header_end).reshape(dims)


def write_idx(path, array):
    """Write a uint8 array as IDX (magic 0x0000 08 <ndim>, big-endian dims)."""
    array = np.asarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    Path(path).write_bytes(header + array.tobytes())


def pca_project(x, dim):
    """Project centred rows onto the top ``dim`` principal axes."""
    centred = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    axes = vt[:dim]
    # fix the sign of each axis so projections are reproducible
    signs = np.sign(axes[np.arange(axes.shape[0]), np.argmax(np.abs(axes), axis=1)])
    axes = axes * signs[:, None]
    return centred @ axes.T, axes


def _balanced_sample(labels, classes, n_per_class, rng):
    picked = []
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        if idx.size < n_per_class:
            raise InputError(
                f"class {cls} has {idx.size} rows, {n_per_class - idx.size} short of "
                f"the {n_per_class} requested")
        picked.append(np.sort(rng.choice(idx, size=n_per_class, replace=False)))
    return np.concatenate(picked)


def load_mnist(images_path, labels_path, dim, digits=(0, 1), n_per_class=100, seed=0):
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    for d in digits:
        if not np.any(labels == d):
            raise InputError(f"digit {d} does not occur in {labels_path}")
    rng = np.random.default_rng(seed)
    keep = _balanced_sample(labels, digits, n_per_class, rng)
    pixels = images[keep].reshape(keep.size, -1).astype(np.float64) / 255.0
    projected, _ = pca_project(pixels, dim)
    scaled, lo, hi = minmax_scale(projected)
    y = (labels[keep] == digits[1]).astype(np.float64)
    prov = {
        "source": "mnist",
        "images": str(images_path),
        "labels": str(labels_path),
        "digits": list(digits),
        "reduction": f"pca-{dim}",
        "n_per_class": n_per_class,
        "seed": seed,
    }
    return Dataset(scaled, y, CLASSIFICATION, prov, lo, hi)


# -- fraud CSV ---------------------------------------------------------------

def point_biserial(feature, labels):
    """Pearson correlation between a numeric column and a 0/1 label."""
    f = feature - feature.mean()
    l = labels - labels.mean()
    denom = np.sqrt(np.sum(f * f) * np.sum(l * l))
    return 0.0 if denom == 0 else float(np.sum(f * l) / denom)


def read_fraud_csv(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        if "Class" not in header:
            raise FormatError(f"{path}: header has no 'Class' column")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}: line {lineno} has {len(row)} fields, "
                                  f"expected {len(header)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from None
    table = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    label_col = header.index("Class")
    labels = table[:, label_col]
    if not np.all(np.isin(labels, (0.0, 1.0))):
        raise FormatError(f"{path}: 'Class' column must be 0/1")
    names = [h for i, h in enumerate(header) if i != label_col]
    features = np.delete(table, label_col, axis=1)
    return names, features, labels


def load_fraud(csv_path, dim, n_per_class=100, seed=0):
    names, features, labels = read_fraud_csv(csv_path)
    if dim > len(names):
        raise InputError(f"requested {dim} features but the file has {len(names)}")
    corr = np.array([abs(point_biserial(features[:, i], labels)) for i in range(len(names))])
    # stable sort: ties resolve by column order
    chosen = np.argsort(-corr, kind="stable")[:dim]
    rng = np.random.default_rng(seed)
    keep = _balanced_sample(labels, (0.0, 1.0), n_per_class, rng)
    scaled, lo, hi = minmax_scale(features[keep][:, chosen])
    prov = {
        "source": "fraud",
        "file": str(csv_path),
        "features": [names[i] for i in chosen],
        "selection": "abs point-biserial correlation with Class",
        "n_per_class": n_per_class,
        "seed": seed,
    }
    return Dataset(scaled, labels[keep], CLASSIFICATION, prov, lo, hi)


# -- stand-in data files -----------------------------------------------------

def write_digits_idx(directory, prefix="digits"):
    """Write scikit-learn's bundled 8x8 handwritten digits as IDX files.

    Used where the real MNIST files are unavailable; the pair of files has
    the same layout as ``train-images-idx3-ubyte`` / ``train-labels-idx1-ubyte``.
    """
    from sklearn.datasets import load_digits

    digits = load_digits()
    images = np.clip(np.round(digits.images * (255.0 / 16.0)), 0, 255).astype(np.uint8)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    img_path = directory / f"{prefix}-images-idx3-ubyte"
    lbl_path = directory / f"{prefix}-labels-idx1-ubyte"
    write_idx(img_path, images)
    write_idx(lbl_path, digits.target.astype(np.uint8))
    return img_path, lbl_path


def write_synthetic_fraud(path, n_rows=4000, fraud_rate=0.1, seed=0):
    """Write a fraud-style CSV: Time, V1..V28, Amount, Class.

    Legitimate rows are standard normal in V1..V28.  Fraud rows shift a few
    components and inflate their spread, so a handful of columns carry most of
    the class signal, as in the public card-fraud data.
    """
    rng = np.random.default_rng(seed)
    n_fraud = int(round(n_rows * fraud_rate))
    labels = np.zeros(n_rows)
    labels[rng.choice(n_rows, n_fraud, replace=False)] = 1.0
    v = rng.standard_normal((n_rows, 28))
    shift = np.zeros(28)
    shift[[2, 3, 9, 10, 11, 13, 15, 16]] = [-1.6, 1.3, -1.1, 1.0, -1.4, -1.8, -0.9, -1.2]
    fraud = labels == 1
    v[fraud] = v[fraud] * 1.4 + shift
    time_col = np.sort(rng.uniform(0, 172800, n_rows))
    amount = np.round(rng.lognormal(3.0, 1.2, n_rows) * np.where(fraud, 1.5, 1.0), 2)
    header = ["Time"] + [f"V{i}" for i in range(1, 29)] + ["Amount", "Class"]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(n_rows):
            writer.writerow([f"{time_col[i]:.1f}"] + [f"{val:.6f}" for val in v[i]]
                            + [f"{amount[i]:.2f}", str(int(labels[i]))])
    return Path(path)
