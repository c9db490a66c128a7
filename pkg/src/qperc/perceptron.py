"""Perceptron training: the plain algorithm and the privacy-preserving
two-party variant built on the quantum data system.

In the two-party training, the model owner (Bob) holds only (w, b).  For each
visit the data owner (Alice) re-permutes her database with a per-pass XOR
mask, answers the classification query through the three-round data system on
the undistorted fixed-point encoding, and publishes a distorted copy
x' = x + r (private mean-zero noise, rounded to 1/1024) that drives the
weight update when the answer disagrees with the label.

For an honest query strategy the data system provably returns exactly
classify(w, b, quantized x) and never aborts, so training supports two exact
modes: "full" runs every query through the branch-state protocol; "fast"
substitutes the proven-equal classical answer (identical trajectories, same
streams).  Attack strategies always use the full protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import TrainingSet
from .noise import FixedPointCodec, NoiseGenerator, parse_generator
from .protocol import BobStrategy, ProtocolParams, run_data_system
from .qstate import RegisterLayout

DEFAULT_T = 40000


@dataclass
class Classifier:
    """Linear threshold classifier: class 1 iff w.x + b > 0 (strictly)."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise ValueError("classifier parameters must be finite")


def classify(clf, x):
    """Strict threshold rule; ties (w.x + b == 0) fall to class 0."""
    x = np.asarray(x, dtype=float)
    if x.shape != clf.w.shape:
        raise ValueError(f"dimension mismatch: x {x.shape} vs w {clf.w.shape}")
    return 1 if float(clf.w @ x + clf.b) > 0 else 0


@dataclass
class TrainRecord:
    terminated: bool
    rounds: int
    updates: int
    success: bool
    detection_events: int = 0

    def __post_init__(self):
        if self.success and not self.terminated:
            raise ValueError("success requires termination")


@dataclass
class LeakLedger:
    """Per-example tally of what an attacking query strategy read."""

    bits_by_example: dict = field(default_factory=dict)
    examples_read: int = 0        # protocol runs completed undetected
    detected_at: tuple | None = None  # (outer loop, step, example index)

    def record(self, example, n_bits):
        self.bits_by_example[example] = self.bits_by_example.get(example, 0) + n_bits
        self.examples_read += 1


def _as_rows(X):
    return [tuple(map(float, row)) for row in np.asarray(X, dtype=float)]


def _predict_all(w, b, rows):
    return [1 if sum(wj * xj for wj, xj in zip(w, row)) + b > 0 else 0
            for row in rows]


def train_classical(train_X, train_labels, T=DEFAULT_T, eval_X=None,
                    eval_labels=None):
    """The plain perceptron loop: full passes until one makes no update.

    Success is judged against (eval_X, eval_labels) when given, else against
    the training data itself.
    """
    rows = _as_rows(train_X)
    labels = [int(c) for c in train_labels]
    k = len(rows[0])
    w = [0.0] * k
    b = 0.0
    rounds = 0
    updates = 0
    terminated = False
    for t in range(1, T + 1):
        changed = 0
        for row, c in zip(rows, labels):
            s = b
            for j in range(k):
                s += w[j] * row[j]
            d = 1 if s > 0 else 0
            if d != c:
                delta = c - d
                for j in range(k):
                    w[j] += delta * row[j]
                b += delta
                changed += 1
        rounds = t
        updates += changed
        if changed == 0:
            terminated = True
            break

    ev_rows = rows if eval_X is None else _as_rows(eval_X)
    ev_labels = labels if eval_labels is None else [int(c) for c in eval_labels]
    success = terminated and _predict_all(w, b, ev_rows) == ev_labels
    return Classifier(np.array(w), b), TrainRecord(terminated, rounds, updates, success)


def _pad_to_power_of_two(n, rng):
    """Index list 0..n-1 plus random duplicates up to the next power of two.

    The XOR permutation mask is only a bijection on power-of-two sizes.
    """
    size = 1 << max(1, math.ceil(math.log2(n)))
    idx = list(range(n))
    if size > n:
        idx.extend(int(v) for v in rng.integers(0, n, size=size - n))
    return idx


def train_quantum(tset, generator, alice_rng, bob_rng, T=DEFAULT_T,
                  strategy=None, codec=None, protocol_mode="auto"):
    """Run the two-party training; returns (Classifier, TrainRecord, LeakLedger).

    Any detection reported by the data system aborts the whole training
    immediately (terminated stays False).  ``protocol_mode``: "full" runs each
    query through the quantum simulation, "fast" uses the proven-equivalent
    direct answer (honest strategy only), "auto" picks fast for honest.
    """
    if strategy is None:
        strategy = BobStrategy.honest()
    codec = codec or tset.codec
    honest = strategy.kind == "honest"
    if protocol_mode == "auto":
        protocol_mode = "fast" if honest else "full"
    if protocol_mode == "fast" and not honest:
        raise ValueError("the fast path is exact only for the honest strategy")

    k = tset.k
    rows_true = _as_rows(tset.X)
    rows_q = _as_rows(tset.quantized())
    labels = [int(c) for c in tset.labels]

    # The protocol gets a dedicated sub-stream so that the fast path (which
    # never invokes it) consumes the training stream identically and the two
    # modes produce byte-identical trajectories.
    protocol_seed = int(alice_rng.integers(1 << 62))
    full = protocol_mode == "full"
    if full:
        layout = RegisterLayout(codec.n, k)
        codes = [codec.encode_vector_int(row) for row in tset.X]
        state = {"w": [0.0] * k, "b": 0.0}

        def f_int(data_int, _state=state, _codec=codec, _k=k):
            x = _codec.decode_vector_int(data_int, _k)
            return 1 if sum(w * v for w, v in zip(_state["w"], x)) + _state["b"] > 0 else 0

        params = ProtocolParams(layout, f_int=f_int,
                                alice_rng=np.random.default_rng(protocol_seed),
                                bob_rng=bob_rng)

    idx = _pad_to_power_of_two(tset.N, alice_rng)
    size = len(idx)

    w = [0.0] * k
    b = 0.0
    rounds = 0
    updates = 0
    terminated = False
    detections = 0
    ledger = LeakLedger()

    for t in range(1, T + 1):
        mask = int(alice_rng.integers(size))
        noise = generator.sample(alice_rng, size=(size, k))
        changed = 0
        for i in range(size):
            j = idx[i ^ mask]
            row_q = rows_q[j]
            s = b
            for a in range(k):
                s += w[a] * row_q[a]
            d_direct = 1 if s > 0 else 0

            if full:
                state["w"] = w
                state["b"] = b
                outcome = run_data_system(codes[j], params, strategy)
                if outcome.detected:
                    detections += 1
                    ledger.detected_at = (t, i, j)
                    record = TrainRecord(False, t, updates, False, detections)
                    return Classifier(np.array(w), b), record, ledger
                d = outcome.answer
                if honest and d != d_direct:
                    raise AssertionError(
                        "honest data-system answer diverged from the classifier"
                    )
                if not honest:
                    ledger.record(j, len(outcome.leaked_bits))
            else:
                d = d_direct

            c = labels[j]
            if d != c:
                delta = c - d
                row_true = rows_true[j]
                for a in range(k):
                    w[a] += delta * (row_true[a] + noise[i, a])
                b += delta
                changed += 1
        rounds = t
        updates += changed
        if changed == 0:
            terminated = True
            break

    success = terminated and _predict_all(w, b, rows_true) == labels
    record = TrainRecord(terminated, rounds, updates, success, detections)
    return Classifier(np.array(w), b), record, ledger


def permuted_indices(n_examples, mask):
    """The visit order one pass uses under XOR mask (a bijection for any mask
    when n_examples is a power of two)."""
    return [i ^ mask for i in range(n_examples)]


# ---------------------------------------------------------------------------
# Estimator API
# ---------------------------------------------------------------------------


def _auto_codec(X, fractional_bits=10):
    """Codec wide enough for the data with 1/1024 resolution."""
    span = max(2.0, float(np.abs(X).max()) * 1.25 + 1.0)
    n1 = max(1, int(math.ceil(math.log2(2.0 * span))))
    return FixedPointCodec(n=n1 + fractional_bits, n1=n1, offset=float(2 ** (n1 - 1)))


class PerceptronClassifier(ClassifierMixin, BaseEstimator):
    """Plain perceptron with the strict zero-threshold rule and whole-pass
    stopping criterion.

    Parameters
    ----------
    T : int
        Upper bound on full passes over the data.
    """

    def __init__(self, T=DEFAULT_T):
        self.T = T

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        clf, record = train_classical(X, y, T=self.T)
        self.w_ = clf.w
        self.b_ = clf.b
        self.record_ = record
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "w_")
        X = check_array(X)
        return (X @ self.w_ + self.b_ > 0).astype(int)


class PrivateQuantumPerceptron(ClassifierMixin, BaseEstimator):
    """Two-party privacy-preserving perceptron.

    fit(X, y) plays both parties: the data side holds (X, y) and its private
    noise generator; the model side sees only query answers and distorted
    examples.  The learned plane is exposed as ``w_``, ``b_``.

    Parameters
    ----------
    noise : str or NoiseGenerator
        Private generator spec, e.g. "R2:delta=0.5".
    T : int
        Outer-loop cap.
    attack : BobStrategy or None
        Optional dishonest query strategy (forces the full protocol path).
    protocol_mode : {"auto", "fast", "full"}
        Whether queries run through the branch-state simulation.
    codec : FixedPointCodec or None
        Fixed-point encoding; derived from the data when omitted.
    random_state : int, SeedSequence or None
        Seeds two independent sub-streams (one per party).
    """

    def __init__(self, noise="R0:delta=1", T=DEFAULT_T, attack=None,
                 protocol_mode="auto", codec=None, random_state=None):
        self.noise = noise
        self.T = T
        self.attack = attack
        self.protocol_mode = protocol_mode
        self.codec = codec
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        gen = self.noise
        if isinstance(gen, str):
            gen = parse_generator(gen)
        codec = self.codec or _auto_codec(X)
        tset = TrainingSet(np.asarray(X, float), np.asarray(y, int), codec)
        seq = np.random.SeedSequence(self.random_state) \
            if not isinstance(self.random_state, np.random.SeedSequence) \
            else self.random_state
        alice_seq, bob_seq = seq.spawn(2)
        clf, record, ledger = train_quantum(
            tset, gen,
            alice_rng=np.random.default_rng(alice_seq),
            bob_rng=np.random.default_rng(bob_seq),
            T=self.T, strategy=self.attack, codec=codec,
            protocol_mode=self.protocol_mode,
        )
        self.w_ = clf.w
        self.b_ = clf.b
        self.record_ = record
        self.leak_ledger_ = ledger
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "w_")
        X = check_array(X)
        return (X @ self.w_ + self.b_ > 0).astype(int)
