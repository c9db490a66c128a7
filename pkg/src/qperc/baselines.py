"""Classical randomization baselines and density reconstruction.

The classical way to publish a training set is to add noise from a *public*
distribution and let the model owner undo the damage statistically: estimate
the original per-class density from the distorted samples and the known noise
density, then learn on data resampled from the estimate.  Four methods are
compared against the quantum protocol:

  uniform   - uniform noise on [-delta, delta], no reconstruction
  normal    - normal noise, sd 0.484*delta (same 1.9*delta privacy), no recon
  recon1d   - uniform noise + per-attribute (marginal) reconstruction
  recon2d   - uniform noise + joint two-attribute reconstruction, O(N L^k)

Reconstruction is the iterative Bayes update on an L-cell grid: starting from
a uniform density h, repeatedly replace h(a) by the average over samples of
the posterior cell probability  P(noise = s - a) h(a) / sum_a' P(...) h(a'),
until the L1 change drops below a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import TrainingSet
from .noise import round_to_grid
from .perceptron import DEFAULT_T, train_classical

NORMAL_SD_FACTOR = 0.484  # same 95% privacy amount as uniform [-d, d]

METHOD_KINDS = ("uniform", "normal", "recon1d", "recon2d")


@dataclass(frozen=True)
class BaselineMethod:
    """A classical randomization method and its reconstruction knobs."""

    kind: str
    delta: float
    grid_size: int = 20
    iterations: int = 50
    tol: float = 1e-4

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.delta < 0 or self.grid_size < 2:
            raise ValueError("need delta >= 0 and grid_size >= 2")

    @property
    def noise_kind(self):
        return "normal" if self.kind == "normal" else "uniform"


# -- public noise densities used by the reconstruction ----------------------


@dataclass(frozen=True)
class UniformNoise:
    delta: float

    @property
    def pad(self):
        return 3.0 * self.delta

    def pdf(self, d):
        d = np.asarray(d, dtype=float)
        if self.delta <= 0:
            return np.zeros_like(d)  # degenerate; callers use point-mass fallback
        return np.where(np.abs(d) <= self.delta, 1.0 / (2.0 * self.delta), 0.0)


@dataclass(frozen=True)
class NormalNoise:
    sd: float

    @property
    def pad(self):
        return 3.0 * self.sd

    def pdf(self, d):
        d = np.asarray(d, dtype=float)
        if self.sd <= 0:
            return np.zeros_like(d)
        z = d / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * np.sqrt(2.0 * np.pi))


def noise_model(kind, delta):
    if kind == "uniform":
        return UniformNoise(delta)
    if kind == "normal":
        return NormalNoise(NORMAL_SD_FACTOR * delta)
    raise ValueError(f"unknown noise kind {kind!r}")


@dataclass
class DensityGrid:
    """Per-cell probability masses over a 1-D or 2-D axis-aligned grid."""

    edges: list                 # one (L+1,) array per axis
    masses: np.ndarray          # (L,) or (L, L), sums to 1

    def __post_init__(self):
        total = float(self.masses.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"cell masses sum to {total}, not 1")
        if np.any(self.masses < -1e-12):
            raise ValueError("cell masses must be non-negative")

    @property
    def dims(self):
        return len(self.edges)

    def centers(self, axis):
        e = self.edges[axis]
        return 0.5 * (e[:-1] + e[1:])

    def l1_distance(self, other):
        return float(np.abs(self.masses - other.masses).sum())

    def sample(self, n, rng):
        """Draw points: a cell by mass, then uniform inside the cell."""
        flat = self.masses.reshape(-1)
        cells = rng.choice(flat.size, size=n, p=flat / flat.sum())
        out = np.empty((n, self.dims))
        if self.dims == 1:
            e = self.edges[0]
            out[:, 0] = e[cells] + rng.random(n) * (e[cells + 1] - e[cells])
        else:
            L2 = self.masses.shape[1]
            rows, cols = cells // L2, cells % L2
            e0, e1 = self.edges
            out[:, 0] = e0[rows] + rng.random(n) * (e0[rows + 1] - e0[rows])
            out[:, 1] = e1[cols] + rng.random(n) * (e1[cols + 1] - e1[cols])
        return out

    def to_rows(self):
        """(cell index..., mass) rows for CSV dumps."""
        if self.dims == 1:
            return [(int(i), float(m)) for i, m in enumerate(self.masses)]
        return [(int(i), int(j), float(self.masses[i, j]))
                for i in range(self.masses.shape[0])
                for j in range(self.masses.shape[1])]


def distort(tset, delta, kind="uniform", rng=None):
    """Publishable copy of a training set: independent per-attribute noise,
    labels unchanged, values rounded to the 1/1024 grid.  The noise
    distribution here is public, unlike the private generator of the quantum
    protocol."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if kind == "uniform":
        noise = rng.uniform(-delta, delta, size=tset.X.shape)
    elif kind == "normal":
        noise = rng.normal(0.0, NORMAL_SD_FACTOR * delta, size=tset.X.shape)
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return replace(tset, X=round_to_grid(tset.X + noise))


def _grid_edges(samples, pad, L):
    lo = float(samples.min()) - pad
    hi = float(samples.max()) + pad
    if hi - lo < 1e-9:
        lo -= 0.5
        hi += 0.5
    return np.linspace(lo, hi, L + 1)


def _em_iterate(likelihood, iterations, tol):
    """Shared Bayes-update loop.  likelihood: (N, cells) non-negative, every
    row must have some support.

    Each sweep is two matrix-vector products (posterior denominators, then
    the h-weighted column averages), so cost is O(N * cells) per sweep with
    no N x cells temporaries.
    """
    n, cells = likelihood.shape
    h = np.full(cells, 1.0 / cells)
    for _ in range(max(1, iterations)):
        denom = likelihood @ h
        denom[denom <= 0] = 1.0
        h_new = h * (likelihood.T @ (1.0 / denom)) / n
        delta_l1 = float(np.abs(h_new - h).sum())
        h = h_new
        if delta_l1 < tol:
            break
    h = np.clip(h, 0.0, None)
    return h / h.sum()


def reconstruct_1d(samples, noise, L=20, iterations=50, tol=1e-4, edges=None):
    """Estimate one attribute's density from distorted samples.

    ``noise`` is the public noise model (UniformNoise / NormalNoise).  With
    degenerate zero-width noise the estimate is exactly the empirical
    histogram.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise ValueError("need at least one sample")
    if edges is None:
        edges = _grid_edges(samples, noise.pad, L)
    centers = 0.5 * (edges[:-1] + edges[1:])
    likelihood = noise.pdf(samples[:, None] - centers[None, :])
    # Samples with no support anywhere (zero-width noise, or noise narrower
    # than a cell) become point masses on their containing cell, which makes
    # the zero-noise limit reproduce the empirical histogram exactly.
    dead = np.nonzero(likelihood.sum(axis=1) <= 0)[0]
    if dead.size:
        cell = np.clip(np.searchsorted(edges, samples[dead], side="right") - 1,
                       0, L - 1)
        likelihood[dead, cell] = 1.0
    masses = _em_iterate(likelihood, iterations, tol)
    return DensityGrid([edges], masses)


def reconstruct_2d(samples, noise, L=20, iterations=50, tol=1e-4, edges=None):
    """Joint two-attribute reconstruction on an L x L grid.

    The per-sample likelihood factorizes over axes (independent per-attribute
    noise), so the sweeps run on the two (N, L) factor matrices and the joint
    N x L^2 likelihood is never materialized; cost stays O(N L^2) per sweep.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise ValueError("need (N, 2) samples")
    n = samples.shape[0]
    if n == 0:
        raise ValueError("need at least one sample")
    if edges is None:
        edges = [_grid_edges(samples[:, a], noise.pad, L) for a in range(2)]
    factors = []
    for a in range(2):
        centers = 0.5 * (edges[a][:-1] + edges[a][1:])
        factors.append(noise.pdf(samples[:, a:a + 1] - centers[None, :]))
    mx, my = factors
    dead = np.nonzero((mx.sum(axis=1) <= 0) | (my.sum(axis=1) <= 0))[0]
    if dead.size:
        # point mass on the containing joint cell
        for factor, axis in ((mx, 0), (my, 1)):
            cell = np.clip(
                np.searchsorted(edges[axis], samples[dead, axis],
                                side="right") - 1, 0, L - 1)
            factor[dead, :] = 0.0
            factor[dead, cell] = 1.0

    h = np.full((L, L), 1.0 / (L * L))
    for _ in range(max(1, iterations)):
        denom = ((mx @ h) * my).sum(axis=1)
        denom[denom <= 0] = 1.0
        h_new = h * (mx.T @ (my / denom[:, None])) / n
        delta_l1 = float(np.abs(h_new - h).sum())
        h = h_new
        if delta_l1 < tol:
            break
    h = np.clip(h, 0.0, None)
    return DensityGrid(edges, h / h.sum())


def empirical_grid(samples, edges):
    """Plain histogram masses on given edges (comparison oracle)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1 or samples.shape[1] == 1:
        h, _ = np.histogram(samples.reshape(-1), bins=edges[0])
        return DensityGrid([edges[0]], h / h.sum())
    h, _, _ = np.histogram2d(samples[:, 0], samples[:, 1],
                             bins=[edges[0], edges[1]])
    return DensityGrid(edges, h / h.sum())


def _resample_per_class(dist_set, method, rng):
    """Reconstruct per-class densities from a distorted set and resample a
    synthetic training set of the same per-class sizes."""
    noise = noise_model(method.noise_kind, method.delta)
    xs, cs = [], []
    for c in np.unique(dist_set.labels):
        cls = dist_set.X[dist_set.labels == c]
        n_c = cls.shape[0]
        if method.kind == "recon2d":
            grid = reconstruct_2d(cls, noise, L=method.grid_size,
                                  iterations=method.iterations, tol=method.tol)
            pts = grid.sample(n_c, rng)
        else:  # recon1d: independent marginals per attribute
            cols = []
            for a in range(dist_set.k):
                grid = reconstruct_1d(cls[:, a], noise, L=method.grid_size,
                                      iterations=method.iterations,
                                      tol=method.tol)
                cols.append(grid.sample(n_c, rng)[:, 0])
            pts = np.column_stack(cols)
        xs.append(pts)
        cs.append(np.full(n_c, c, dtype=int))
    return np.vstack(xs), np.concatenate(cs)


def train_baseline(tset, method, rng, T=DEFAULT_T, reps=1):
    """Run one classical method ``reps`` times; success is always judged
    against the original undistorted set."""
    records = []
    for _ in range(reps):
        dist = distort(tset, method.delta, method.noise_kind, rng)
        if method.kind in ("uniform", "normal"):
            train_X, train_c = dist.X, dist.labels
        else:
            train_X, train_c = _resample_per_class(dist, method, rng)
        _, record = train_classical(train_X, train_c, T=T,
                                    eval_X=tset.X, eval_labels=tset.labels)
        records.append(record)
    return records


# ---------------------------------------------------------------------------
# Estimator API
# ---------------------------------------------------------------------------


class RandomizedBaselinePerceptron(ClassifierMixin, BaseEstimator):
    """Perceptron trained the classical privacy-preserving way: fit() distorts
    the data with public noise (optionally reconstructing and resampling
    first) and learns on the published copy.

    Parameters
    ----------
    method : {"uniform", "normal", "recon1d", "recon2d"}
    delta : float
        Noise half-width (uniform) / scale (normal uses sd 0.484*delta).
    grid_size, iterations : int
        Reconstruction grid resolution and Bayes-update sweep cap.
    T : int
        Perceptron outer-loop cap.
    """

    def __init__(self, method="uniform", delta=1.0, grid_size=20,
                 iterations=50, T=DEFAULT_T, random_state=None):
        self.method = method
        self.delta = delta
        self.grid_size = grid_size
        self.iterations = iterations
        self.T = T
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        from .perceptron import _auto_codec
        tset = TrainingSet(np.asarray(X, float), np.asarray(y, int),
                           _auto_codec(X))
        spec = BaselineMethod(self.method, self.delta, self.grid_size,
                              self.iterations)
        rng = np.random.default_rng(self.random_state)
        dist = distort(tset, spec.delta, spec.noise_kind, rng)
        if spec.kind in ("uniform", "normal"):
            train_X, train_c = dist.X, dist.labels
        else:
            train_X, train_c = _resample_per_class(dist, spec, rng)
        clf, record = train_classical(train_X, train_c, T=self.T,
                                      eval_X=X, eval_labels=y)
        self.w_ = clf.w
        self.b_ = clf.b
        self.record_ = record
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "w_")
        X = check_array(X)
        return (X @ self.w_ + self.b_ > 0).astype(int)


class NoisyDensityEstimator(BaseEstimator):
    """Density estimation from noise-distorted samples (fit) with resampling
    (sample); the fitted grid is exposed as ``grid_``.

    Parameters
    ----------
    noise : {"uniform", "normal"}
        Public noise family that produced the distortion.
    delta : float
        Noise scale used during distortion.
    grid_size, iterations, tol
        Bayes-update knobs.
    """

    def __init__(self, noise="uniform", delta=1.0, grid_size=20,
                 iterations=50, tol=1e-4):
        self.noise = noise
        self.delta = delta
        self.grid_size = grid_size
        self.iterations = iterations
        self.tol = tol

    def fit(self, X, y=None):
        X = check_array(X)
        if X.shape[1] not in (1, 2):
            raise ValueError("supports 1 or 2 attributes")
        model = noise_model(self.noise, self.delta)
        if X.shape[1] == 1:
            self.grid_ = reconstruct_1d(X[:, 0], model, L=self.grid_size,
                                        iterations=self.iterations, tol=self.tol)
        else:
            self.grid_ = reconstruct_2d(X, model, L=self.grid_size,
                                        iterations=self.iterations, tol=self.tol)
        self.n_features_in_ = X.shape[1]
        return self

    def sample(self, n, random_state=None):
        check_is_fitted(self, "grid_")
        return self.grid_.sample(n, np.random.default_rng(random_state))
