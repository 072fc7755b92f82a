"""Datasets of labelled complex Doppler-time matrices.

Includes zero padding to a uniform width, deterministic splitters, the CVDS
binary file format and a seeded synthetic two-class gesture generator.

CVDS layout (little-endian)::

    "CVDS" | version u16 = 1 | reserved u16 = 0 | count u32 | height u32 | width u32
    then per sample: label u8, height*width (re f32, im f32) pairs, row-major
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

MAGIC = b"CVDS"
VERSION = 1
_HEADER = struct.Struct("<4sHHIII")


class CVDSFormatError(ValueError):
    """A CVDS file is malformed or cannot represent the dataset."""


class Sample(NamedTuple):
    matrix: np.ndarray
    label: int


@dataclass
class Dataset:
    """``x`` is ``(n, height, width)`` complex128, ``y`` holds 0/1 labels."""

    x: np.ndarray
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.complex128)
        self.y = np.asarray(self.y, dtype=np.uint8)
        if self.x.ndim != 3 or len(self.x) == 0:
            raise ValueError("dataset needs at least one (height, width) sample")
        if self.y.shape != (len(self.x),):
            raise ValueError(f"{len(self.y)} labels for {len(self.x)} samples")
        if np.any(self.y > 1):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("dataset contains NaN or Inf")

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i) -> Sample:
        return Sample(self.x[i], int(self.y[i]))

    @property
    def height(self) -> int:
        return self.x.shape[1]

    @property
    def width(self) -> int:
        return self.x.shape[2]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.x[idx], self.y[idx], self.name)


def pad_uniform(raw: Sequence[np.ndarray], labels: Sequence[int], target_width: int,
                name: str = "") -> Dataset:
    """Right-pad every matrix with complex zeros up to ``target_width`` columns."""
    if not raw:
        raise ValueError("no samples to pad")
    heights = {np.shape(m)[0] for m in raw}
    if len(heights) != 1:
        raise ValueError(f"samples have differing heights {sorted(heights)}")
    height = heights.pop()
    out = np.zeros((len(raw), height, target_width), dtype=np.complex128)
    for i, m in enumerate(raw):
        m = np.asarray(m)
        if m.shape[1] > target_width:
            raise ValueError(f"sample {i} width {m.shape[1]} exceeds target {target_width}")
        out[i, :, : m.shape[1]] = m
    return Dataset(out, np.asarray(labels), name)


# --- splitters --------------------------------------------------------------

@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    val: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.intp))

    def __post_init__(self):
        if len(self.train) == 0:
            raise ValueError("training partition is empty")
        parts = [set(self.train.tolist()), set(self.val.tolist()), set(self.test.tolist())]
        if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
            raise ValueError("partitions overlap")


def _floor_frac(frac: float, n: int) -> int:
    # guards against 0.29 * 100 == 28.999999999999996
    return int(math.floor(frac * n + 1e-9))


def split_holdout(n: int, train_frac: float = 0.8, seed: int = 0,
                  val_frac: float = 0.0) -> SplitIndices:
    """Seeded shuffle, then ``floor(train_frac*n)`` train, ``floor(val_frac*n)`` val, rest test."""
    if not 0 < train_frac < 1 or not 0 <= val_frac < 1 or train_frac + val_frac >= 1:
        raise ValueError(f"bad fractions train={train_frac} val={val_frac}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = _floor_frac(train_frac, n)
    n_val = _floor_frac(val_frac, n)
    if n_train == 0 or n_train + n_val >= n:
        raise ValueError(f"{n} samples cannot fill every partition")
    return SplitIndices(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
    )


def kfold(n: int, k: int, seed: int = 0) -> list[SplitIndices]:
    """``k`` folds of near-equal size (differing by at most one); fold ``i`` is the test set."""
    if not 2 <= k <= n:
        raise ValueError(f"k={k} outside 2..{n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append(SplitIndices(train=np.sort(train), test=np.sort(test)))
    return out


def loocv(n: int) -> list[SplitIndices]:
    """Leave-one-out in natural order: fold ``i`` tests sample ``i``."""
    if n < 2:
        raise ValueError("leave-one-out needs at least two samples")
    idx = np.arange(n)
    return [SplitIndices(train=np.delete(idx, i), test=idx[i:i + 1]) for i in range(n)]


# --- CVDS -------------------------------------------------------------------

def _record_dtype(height: int, width: int) -> np.dtype:
    return np.dtype([("label", "u1"), ("data", "<c8", (height, width))])


def cvds_write(ds: Dataset, path) -> None:
    if len(ds) == 0:
        raise CVDSFormatError("refusing to write an empty dataset")
    n, h, w = ds.x.shape
    if max(n, h, w) >= 2**32:
        raise CVDSFormatError("dimension does not fit in u32")
    with np.errstate(over="ignore"):
        single = ds.x.astype(np.complex64)
    if not np.all(np.isfinite(single)):
        raise CVDSFormatError("values overflow single precision")
    records = np.empty(n, dtype=_record_dtype(h, w))
    records["label"] = ds.y
    records["data"] = single
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0, n, h, w))
        fh.write(records.tobytes())


def cvds_read(path) -> Dataset:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise CVDSFormatError("file shorter than the CVDS header")
    magic, version, _reserved, n, h, w = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CVDSFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CVDSFormatError(f"unsupported CVDS version {version}")
    if n == 0 or h == 0 or w == 0:
        raise CVDSFormatError(f"empty dimensions n={n} h={h} w={w}")
    record = 1 + 8 * h * w
    expected = _HEADER.size + n * record
    if expected > len(blob):
        raise CVDSFormatError(f"truncated: header promises {expected} bytes, file has {len(blob)}")
    if expected < len(blob):
        raise CVDSFormatError(f"{len(blob) - expected} trailing bytes after the last sample")
    records = np.frombuffer(blob, dtype=_record_dtype(h, w), count=n, offset=_HEADER.size)
    labels = records["label"]
    if np.any(labels > 1):
        raise CVDSFormatError("label out of range")
    return Dataset(records["data"].astype(np.complex128), labels.copy(), Path(path).stem)


def fingerprint(ds: Dataset) -> dict:
    """Dims, count and a SHA-256 over the stored (single-precision) bytes and labels."""
    import hashlib

    digest = hashlib.sha256()
    digest.update(ds.x.astype("<c8").tobytes())
    digest.update(ds.y.tobytes())
    return {"count": len(ds), "height": ds.height, "width": ds.width,
            "sha256": digest.hexdigest()}


# --- synthetic gestures -------------------------------------------------------

def _ridge(height, centres, width_bins):
    bins = np.arange(height)[:, None]
    return np.exp(-0.5 * ((bins - centres[None, :]) / width_bins) ** 2)


def _oscillatory(rng, height, width):
    # full-duration stripe whose Doppler centre swings sinusoidally
    t = np.arange(width)
    swing = rng.uniform(0.18, 0.24) * height
    cycles = rng.uniform(1.0, 1.25)
    phase0 = rng.uniform(-0.3, 0.3)
    centres = height / 2 + swing * np.sin(2 * np.pi * cycles * t / width + phase0)
    omega = rng.uniform(0.6, 0.9)
    drift = rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * t / width)
    carrier = np.exp(1j * (omega * t + drift))
    return _ridge(height, centres, 1.2) * carrier[None, :]


def _burst(rng, height, width):
    # short linear chirp occupying a fraction of the time axis
    t = np.arange(width)
    length = int(round(rng.uniform(0.3, 0.4) * width))
    start = int(rng.integers(width // 4, width - length - width // 8 + 1))
    active = (t >= start) & (t < start + length)
    slope = rng.uniform(0.4, 0.6) * height / length
    centres = 0.25 * height + slope * (t - start)
    kappa = rng.uniform(0.02, 0.05)
    carrier = np.exp(1j * (0.8 * t + kappa * (t - start) ** 2)) * active
    return _ridge(height, centres, 1.2) * carrier[None, :]


def synth_gestures(n_per_class: int, height: int, width: int,
                   noise_sigma: float = 0.05, seed: int = 0) -> Dataset:
    """Two-class synthetic Doppler-time set with unit-amplitude signatures.

    Class 0 is an oscillating Doppler stripe spanning the whole time axis;
    class 1 a short linear-chirp burst. Circular complex Gaussian noise of
    total standard deviation ``noise_sigma`` is added. Samples are ordered
    class 0 first.
    """
    if height < 8 or width < 8:
        raise ValueError(f"synthetic samples need at least 8x8, got {height}x{width}")
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if not noise_sigma >= 0:
        raise ValueError("noise_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    noise_rng = np.random.default_rng([seed, 1])
    x = np.empty((2 * n_per_class, height, width), dtype=np.complex128)
    for i in range(n_per_class):
        x[i] = _oscillatory(rng, height, width)
    for i in range(n_per_class):
        x[n_per_class + i] = _burst(rng, height, width)
    if noise_sigma > 0:
        scale = noise_sigma / math.sqrt(2.0)
        x += scale * (noise_rng.standard_normal(x.shape) + 1j * noise_rng.standard_normal(x.shape))
    y = np.repeat(np.array([0, 1], dtype=np.uint8), n_per_class)
    return Dataset(x, y, f"synth-{height}x{width}")
