"""Synthetic training sets and dataset I/O.

Three two-attribute generators mirror the benchmark families used throughout:
two-blob normals, normal points labeled by a fixed hyperplane, and a strongly
correlated band.  All coordinates are rounded to the 1/1024 grid and clamped
to the fixed-point codec range, and generation is deterministic given the
stream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .noise import FixedPointCodec, round_to_grid

SET2_W0 = np.array([2.0, -1.0])
SET2_B0 = -3.0
SET2_MARGIN = 0.2
SET3_SEPARATOR = (np.array([1.0, -1.0]), -1.0)


@dataclass(frozen=True)
class TrainingSet:
    """Labeled real-vector examples plus their fixed-point encoding metadata."""

    X: np.ndarray          # (N, k) float64, values on the 1/1024 grid
    labels: np.ndarray     # (N,) ints in {0, 1}
    codec: FixedPointCodec

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] < 1:
            raise ValueError("X must be a non-empty (N, k) array")
        if self.labels.shape != (self.X.shape[0],):
            raise ValueError("labels must be one per example")

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def k(self):
        return self.X.shape[1]

    def quantized(self):
        """The examples as the protocol sees them: encoded then decoded."""
        out = np.empty_like(self.X)
        for i in range(self.N):
            for j in range(self.k):
                out[i, j] = self.codec.decode_int(self.codec.encode_int(self.X[i, j]))
        return out


def _clamp_to_codec(X, codec):
    lo = -codec.offset
    hi = 2.0 ** codec.n1 - codec.offset - codec.resolution
    return np.clip(X, lo + codec.resolution, hi - codec.resolution)


def _finalize(X, labels, codec):
    X = round_to_grid(_clamp_to_codec(X, codec))
    return TrainingSet(X, labels.astype(int), codec)


def _is_separable(tset, max_loops=2000):
    """Plain perceptron pass oracle, local to avoid a module cycle."""
    w = np.zeros(tset.k)
    b = 0.0
    for _ in range(max_loops):
        changed = False
        for x, c in zip(tset.X, tset.labels):
            d = 1 if w @ x + b > 0 else 0
            if d != c:
                w = w + (c - d) * x
                b = b + (c - d)
                changed = True
        if not changed:
            return True
    return False


SET1_MARGIN = 0.15  # geometric clearance from the natural midline x1 = x2


def generate_set1(N, rng, codec=None):
    """Two class-conditional normal blobs, means (2,6) and (6,2), unit
    covariance.  Draws are regenerated until every point clears the natural
    midline x1 = x2 by SET1_MARGIN (separability with a working margin; about
    one draw in five is rejected)."""
    if N % 2:
        raise ValueError("N must be even (half the examples per class)")
    codec = codec or FixedPointCodec(n=14, n1=4, offset=4.0)
    for _ in range(200):
        half = N // 2
        X = np.vstack([
            rng.normal((2.0, 6.0), 1.0, size=(half, 2)),
            rng.normal((6.0, 2.0), 1.0, size=(N - half, 2)),
        ])
        labels = np.concatenate([np.zeros(half, int), np.ones(N - half, int)])
        signed = (X[:, 0] - X[:, 1]) * np.where(labels == 1, 1.0, -1.0)
        if signed.min() / np.sqrt(2.0) < SET1_MARGIN:
            continue
        tset = _finalize(X, labels, codec)
        if _is_separable(tset):
            return tset
    raise RuntimeError("could not draw a separable sample for set 1")


def generate_set2(N, rng, codec=None):
    """Normal(3, 2^2) coordinates labeled by the fixed plane w0=(2,-1), b0=-3.

    Examples closer than SET2_MARGIN to the plane are redrawn, so the set is
    separable by (w0, b0) with a margin.
    """
    codec = codec or FixedPointCodec(n=15, n1=5, offset=8.0)
    rows = []
    while len(rows) < N:
        x = rng.normal(3.0, 2.0, size=2)
        if abs(SET2_W0 @ x + SET2_B0) >= SET2_MARGIN:
            rows.append(x)
    X = np.array(rows)
    labels = (X @ SET2_W0 + SET2_B0 > 0).astype(int)
    return _finalize(X, labels, codec)


def generate_set3(N, rng, codec=None):
    """Strongly correlated band: x2 ~ U[0,8], x1 = x2 + U[0,0.5]; with a
    fifty-fifty chance the example is class 1 and x1 is shifted by +1.5."""
    codec = codec or FixedPointCodec(n=14, n1=4, offset=0.0)
    X = np.empty((N, 2))
    labels = np.empty(N, int)
    for i in range(N):
        r1 = rng.uniform(0.0, 0.5)
        r2 = rng.uniform(0.0, 8.0)
        x2 = r2
        x1 = x2 + r1
        if rng.random() < 0.5:
            labels[i] = 0
        else:
            labels[i] = 1
            x1 += 1.5
        X[i] = (x1, x2)
    return _finalize(X, labels, codec)


GENERATORS = {"gen1": generate_set1, "gen2": generate_set2, "gen3": generate_set3}


def save_csv(tset, path):
    """Write the set as CSV with header x1,...,xk,class."""
    header = ",".join(f"x{j + 1}" for j in range(tset.k)) + ",class"
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for x, c in zip(tset.X, tset.labels):
            fh.write(",".join(repr(float(v)) for v in x) + f",{int(c)}\n")


def load_csv(path, codec=None):
    """Load a CSV written by :func:`save_csv`; exact round trip on the grid."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"empty dataset file: {path}")
    header = lines[0].split(",")
    if header[-1] != "class" or any(
        h != f"x{j + 1}" for j, h in enumerate(header[:-1])
    ):
        raise ValueError(f"bad dataset header {header!r} (want x1,...,xk,class)")
    k = len(header) - 1
    X, labels = [], []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != k + 1:
            raise ValueError(f"row has {len(parts)} fields, header promises {k + 1}")
        X.append([float(v) for v in parts[:-1]])
        labels.append(int(parts[-1]))
    X = np.array(X)
    if codec is None:
        span = max(1.0, float(np.abs(X).max()) + 1.0)
        n1 = max(1, int(np.ceil(np.log2(2.0 * span))))
        codec = FixedPointCodec(n=n1 + 10, n1=n1, offset=float(2.0 ** (n1 - 1)))
    return TrainingSet(X, np.array(labels, int), codec)


def parse_dataset_spec(spec, default_n=64):
    """Build a set from a CLI spec: "gen2:N=64:seed=7" or "file:<path>"."""
    parts = spec.split(":")
    head = parts[0]
    if head == "file":
        return load_csv(":".join(parts[1:]))
    if head not in GENERATORS:
        raise ValueError(f"unknown dataset spec {spec!r}")
    n, seed = default_n, 0
    for part in parts[1:]:
        key, _, value = part.partition("=")
        if key == "N":
            n = int(value)
        elif key == "seed":
            seed = int(value)
        else:
            raise ValueError(f"unknown dataset option {key!r}")
    return GENERATORS[head](n, np.random.default_rng(seed))


def with_codec(tset, codec):
    return replace(tset, codec=codec)
