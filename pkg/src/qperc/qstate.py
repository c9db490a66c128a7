"""Exact simulation of the structured states arising in the data-system protocol.

Every gate in the protocol (CNOT from the result qubit, Z on the result qubit,
SWAP of two data qubits, CNOT copies into ancillas) maps computational basis
states to computational basis states up to sign, and the only superposition
source is the initial |+> on the result qubit.  A state is therefore an exact
short list of weighted basis branches; honest runs and all modeled attacks
never need more than two branches, which makes 60+ data qubits simulable.

A dense statevector oracle (``to_dense`` / ``run_trace_dense``) covers systems
of up to 14 qubits and is used to cross-check the branch simulation.

Qubit indexing: qubit 0 is the result qubit, data qubits are 1..n*k (the first
data qubit is the most significant bit of attribute 1), ancillas follow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-9
DENSE_MAX_QUBITS = 14

_SQRT_HALF = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class RegisterLayout:
    """Register sizes: n bits per attribute, k attributes, optional ancillas."""

    n: int
    k: int
    ancilla_qubits: int = 0

    def __post_init__(self):
        if self.n < 1 or self.k < 1 or self.ancilla_qubits < 0:
            raise ValueError("need n >= 1, k >= 1, ancilla_qubits >= 0")

    @property
    def data_qubits(self):
        return self.n * self.k

    @property
    def total_qubits(self):
        return 1 + self.data_qubits + self.ancilla_qubits

    # --- bit layout: integer reads [result][data 1..nk][ancilla 1..A] MSB->LSB

    @property
    def result_mask(self):
        return 1 << (self.total_qubits - 1)

    def data_bit_mask(self, m):
        """Mask of data qubit m, 1-indexed, 1 = most significant bit."""
        if not (1 <= m <= self.data_qubits):
            raise ValueError(f"data qubit index {m} out of range 1..{self.data_qubits}")
        return 1 << (self.ancilla_qubits + self.data_qubits - m)

    def ancilla_bit_mask(self, j):
        if not (1 <= j <= self.ancilla_qubits):
            raise ValueError(f"ancilla index {j} out of range")
        return 1 << (self.ancilla_qubits - j)

    def qubit_mask(self, q):
        """Mask of global qubit q (0 = result, 1..nk data, then ancillas)."""
        if q == 0:
            return self.result_mask
        if q <= self.data_qubits:
            return self.data_bit_mask(q)
        return self.ancilla_bit_mask(q - self.data_qubits)

    def pack(self, result_bit, data_int, ancilla_int=0):
        return (
            (result_bit << (self.total_qubits - 1))
            | (data_int << self.ancilla_qubits)
            | ancilla_int
        )

    def result_bit(self, bits):
        return (bits >> (self.total_qubits - 1)) & 1

    def data_int(self, bits):
        return (bits >> self.ancilla_qubits) & ((1 << self.data_qubits) - 1)

    def ancilla_int(self, bits):
        return bits & ((1 << self.ancilla_qubits) - 1)


def bits_to_str(value, width):
    return format(value, f"0{width}b")


def str_to_bits(s):
    if not s or any(c not in "01" for c in s):
        raise ValueError(f"not a bit string: {s!r}")
    return int(s, 2)


def flip_data_bit(layout, data_int, m):
    """Flip data bit m (1-indexed, MSB first) of an nk-bit data integer."""
    return data_int ^ (1 << (layout.data_qubits - m))


def swap_data_bits(layout, data_int, m):
    """Exchange data bits 1 and m of an nk-bit data integer."""
    if m == 1:
        return data_int
    p1 = layout.data_qubits - 1
    pm = layout.data_qubits - m
    if ((data_int >> p1) & 1) != ((data_int >> pm) & 1):
        data_int ^= (1 << p1) | (1 << pm)
    return data_int


class BranchState:
    """A quantum state as a short list of (amplitude, basis bit-pattern) pairs.

    Treated as immutable: every operation returns a new state.  Bit patterns
    are integers laid out per :class:`RegisterLayout`.
    """

    __slots__ = ("layout", "branches")

    def __init__(self, layout, branches, _validate=True):
        self.layout = layout
        self.branches = list(branches)
        if _validate:
            self.validate()

    def validate(self):
        norm = 0.0
        seen = set()
        for amp, bits in self.branches:
            norm += abs(amp) ** 2
            if bits in seen:
                raise ValueError("duplicate basis pattern in branch list")
            seen.add(bits)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {norm} deviates from 1")

    def amplitude(self, bits):
        for amp, b in self.branches:
            if b == bits:
                return amp
        return 0.0

    def data_patterns(self):
        """Distinct data-register patterns across branches."""
        return {self.layout.data_int(bits) for _, bits in self.branches}

    def __repr__(self):
        lo = self.layout
        parts = []
        for amp, bits in self.branches:
            s = f"r={lo.result_bit(bits)} d={bits_to_str(lo.data_int(bits), lo.data_qubits)}"
            if lo.ancilla_qubits:
                s += f" a={bits_to_str(lo.ancilla_int(bits), lo.ancilla_qubits)}"
            parts.append(f"({amp:.4g}) {s}")
        return "BranchState[" + ", ".join(parts) + "]"


def _as_data_int(layout, y):
    if isinstance(y, str):
        if len(y) != layout.data_qubits:
            raise ValueError(
                f"data string length {len(y)} != {layout.data_qubits} data qubits"
            )
        return str_to_bits(y)
    y = int(y)
    if not (0 <= y < 1 << layout.data_qubits):
        raise ValueError("data value out of range for layout")
    return y


def prepare_test_state(layout, y, u, m):
    """Prepare the two-branch protocol state for parameters (y, u, m).

    m = 0 is the computational form |+>|y> (u must be 0).  For m >= 1 the
    second branch has data bit m flipped relative to y and carries the phase
    (-1)**u:  (|0>|y> + (-1)**u |1>|y xor e_m>) / sqrt(2).
    """
    if layout.ancilla_qubits:
        raise ValueError("test states carry no ancillas")
    y_int = _as_data_int(layout, y)
    if not (0 <= m <= layout.data_qubits):
        raise ValueError(f"m={m} out of range 0..{layout.data_qubits}")
    if u not in (0, 1):
        raise ValueError("u must be 0 or 1")
    if m == 0:
        if u != 0:
            raise ValueError("m=0 (computational state) requires u=0")
        second = y_int
        phase = _SQRT_HALF
    else:
        second = flip_data_bit(layout, y_int, m)
        phase = -_SQRT_HALF if u else _SQRT_HALF
    return BranchState(
        layout,
        [(_SQRT_HALF, layout.pack(0, y_int)), (phase, layout.pack(1, second))],
        _validate=False,
    )


def apply_uf(state, f):
    """Apply the oracle-controlled phase: branches with result bit 1 pick up
    the sign (-1)**f(data).  ``f`` takes the data register as a bit string."""
    lo = state.layout
    width = lo.data_qubits
    out = []
    for amp, bits in state.branches:
        if lo.result_bit(bits) and f(bits_to_str(lo.data_int(bits), width)):
            amp = -amp
        out.append((amp, bits))
    return BranchState(lo, out, _validate=False)


def _apply_uf_int(state, f_int):
    """Hot-path variant of :func:`apply_uf` with an integer-keyed oracle."""
    lo = state.layout
    out = []
    for amp, bits in state.branches:
        if lo.result_bit(bits) and f_int(lo.data_int(bits)):
            amp = -amp
        out.append((amp, bits))
    return BranchState(lo, out, _validate=False)


# Gate descriptors for apply_gate / traces:
#   ("CNOT",)        controlled-X, result qubit -> data qubit 1
#   ("Z",)           Z on the result qubit
#   ("SWAP", m)      exchange data qubits 1 and m
#   ("COPY", i, j)   controlled-X, data qubit i -> ancilla j


def apply_gate(state, gate):
    """Apply one protocol gate; each maps basis branches to basis branches."""
    lo = state.layout
    kind = gate[0]
    out = []
    if kind == "CNOT":
        d1 = lo.data_bit_mask(1)
        for amp, bits in state.branches:
            if lo.result_bit(bits):
                bits ^= d1
            out.append((amp, bits))
    elif kind == "Z":
        for amp, bits in state.branches:
            if lo.result_bit(bits):
                amp = -amp
            out.append((amp, bits))
    elif kind == "SWAP":
        m = gate[1]
        p1 = lo.data_bit_mask(1)
        pm = lo.data_bit_mask(m)
        for amp, bits in state.branches:
            b1 = bool(bits & p1)
            if b1 != bool(bits & pm):
                bits ^= p1 | pm
            out.append((amp, bits))
    elif kind == "COPY":
        i, j = gate[1], gate[2]
        di = lo.data_bit_mask(i)
        aj = lo.ancilla_bit_mask(j)
        for amp, bits in state.branches:
            if bits & di:
                bits ^= aj
            out.append((amp, bits))
    else:
        raise ValueError(f"unknown gate {gate!r}")
    return BranchState(lo, out, _validate=False)


def add_ancillas(state, count):
    """Append ``count`` fresh |0> ancilla qubits (new least significant bits)."""
    lo = state.layout
    new_layout = RegisterLayout(lo.n, lo.k, lo.ancilla_qubits + count)
    branches = [(amp, bits << count) for amp, bits in state.branches]
    return BranchState(new_layout, branches, _validate=False)


def measure_computational(state, qubits, rng):
    """Measure a set of qubits in the computational basis.

    Returns ``(outcome, collapsed_state, probability)`` where ``outcome`` is a
    tuple of bits in the order the qubit indices were given.
    """
    qubits = list(qubits)
    if not qubits:
        raise ValueError("qubit set must be non-empty")
    lo = state.layout
    masks = [lo.qubit_mask(q) for q in qubits]
    sel = 0
    for mk in masks:
        sel |= mk

    groups = {}
    for amp, bits in state.branches:
        key = bits & sel
        prob, members = groups.get(key, (0.0, []))
        groups[key] = (prob + abs(amp) ** 2, members + [(amp, bits)])

    keys = sorted(groups)
    r = rng.random()
    acc = 0.0
    chosen = keys[-1]
    for key in keys:
        acc += groups[key][0]
        if r < acc:
            chosen = key
            break

    prob, members = groups[chosen]
    scale = 1.0 / math.sqrt(prob)
    collapsed = BranchState(lo, [(amp * scale, bits) for amp, bits in members],
                            _validate=False)
    outcome = tuple(1 if chosen & mk else 0 for mk in masks)
    return outcome, collapsed, prob


def measure_data(state, rng):
    """Measure all data qubits; returns (data_int, collapsed, probability)."""
    lo = state.layout
    groups = {}
    for amp, bits in state.branches:
        key = lo.data_int(bits)
        prob, members = groups.get(key, (0.0, []))
        groups[key] = (prob + abs(amp) ** 2, members + [(amp, bits)])
    keys = sorted(groups)
    r = rng.random()
    acc = 0.0
    chosen = keys[-1]
    for key in keys:
        acc += groups[key][0]
        if r < acc:
            chosen = key
            break
    prob, members = groups[chosen]
    scale = 1.0 / math.sqrt(prob)
    collapsed = BranchState(lo, [(amp * scale, bits) for amp, bits in members],
                            _validate=False)
    return chosen, collapsed, prob


def plus_probability(state):
    """P(result reads +) = sum over non-result patterns s of |a(0,s)+a(1,s)|^2 / 2.

    A pattern mismatch on data or ancilla qubits between the two branches
    therefore gives 1/2 exactly.
    """
    lo = state.layout
    rmask = lo.result_mask
    pairs = {}  # keyed by the non-result part of the pattern
    for amp, bits in state.branches:
        key = bits & ~rmask
        a0, a1 = pairs.get(key, (0.0, 0.0))
        if bits & rmask:
            a1 += amp
        else:
            a0 += amp
        pairs[key] = (a0, a1)
    return sum(abs(a0 + a1) ** 2 for a0, a1 in pairs.values()) / 2.0


def measure_result_pm(state, rng):
    """Measure the result qubit in the {|+>, |->} basis.

    Returns ``(outcome, probability)`` with outcome "+" or "-" and the
    probability of the sampled outcome.
    """
    p_plus = plus_probability(state)
    if rng.random() < p_plus:
        return "+", p_plus
    return "-", 1.0 - p_plus


# ---------------------------------------------------------------------------
# Dense statevector oracle
# ---------------------------------------------------------------------------


@dataclass
class DenseState:
    """Reference statevector over all 2**total_qubits basis states (<= 14 qubits)."""

    layout: RegisterLayout
    amplitudes: np.ndarray

    def validate(self):
        norm = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"dense norm {norm} deviates from 1")


def to_dense(state):
    lo = state.layout
    if lo.total_qubits > DENSE_MAX_QUBITS:
        raise ValueError(
            f"system of {lo.total_qubits} qubits too large for the dense oracle"
        )
    vec = np.zeros(1 << lo.total_qubits, dtype=complex)
    for amp, bits in state.branches:
        vec[bits] = amp
    return DenseState(lo, vec)


def dense_apply_gate(dense, gate):
    lo = dense.layout
    vec = dense.amplitudes
    size = vec.shape[0]
    idx = np.arange(size)
    kind = gate[0]
    if kind == "Z":
        out = np.where(idx & lo.result_mask, -vec, vec)
        return DenseState(lo, out)
    if kind == "CNOT":
        control, target = lo.result_mask, lo.data_bit_mask(1)
    elif kind == "COPY":
        control, target = lo.data_bit_mask(gate[1]), lo.ancilla_bit_mask(gate[2])
    elif kind == "SWAP":
        p1, pm = lo.data_bit_mask(1), lo.data_bit_mask(gate[1])
        differs = ((idx & p1) != 0) != ((idx & pm) != 0)
        source = np.where(differs, idx ^ (p1 | pm), idx)
        return DenseState(lo, vec[source])
    else:
        raise ValueError(f"unknown gate {gate!r}")
    source = np.where(idx & control, idx ^ target, idx)
    return DenseState(lo, vec[source])


def dense_apply_uf(dense, f):
    lo = dense.layout
    vec = dense.amplitudes.copy()
    width = lo.data_qubits
    nz = np.nonzero(vec)[0]
    for i in nz:
        i = int(i)
        if lo.result_bit(i) and f(bits_to_str(lo.data_int(i), width)):
            vec[i] = -vec[i]
    return DenseState(lo, vec)


def dense_measure_computational(dense, qubits, rng):
    lo = dense.layout
    masks = [lo.qubit_mask(q) for q in qubits]
    sel = 0
    for mk in masks:
        sel |= mk
    idx = np.arange(dense.amplitudes.shape[0])
    weights = np.abs(dense.amplitudes) ** 2
    keys = idx & sel
    uniq = np.unique(keys[weights > 0])
    probs = np.array([weights[keys == key].sum() for key in uniq])
    r = rng.random()
    chosen = uniq[min(np.searchsorted(np.cumsum(probs), r), len(uniq) - 1)]
    prob = float(probs[list(uniq).index(chosen)])
    vec = np.where(keys == chosen, dense.amplitudes, 0.0) / math.sqrt(prob)
    outcome = tuple(1 if chosen & mk else 0 for mk in masks)
    return outcome, DenseState(lo, vec), prob


def dense_plus_probability(dense):
    lo = dense.layout
    vec = dense.amplitudes
    half = vec.shape[0] // 2
    return float(np.sum(np.abs(vec[:half] + vec[half:]) ** 2) / 2.0)


# ---------------------------------------------------------------------------
# Trace execution on both back ends
#
# A trace is a list of steps:
#   ("prepare", y_int, u, m)   -- must come first
#   ("uf", f)                  -- f maps a data bit string to 0/1
#   ("gate", gate_tuple)
#   ("measure", (q, ...))      -- computational measurement of listed qubits
#   ("measure_pm",)            -- +/- measurement of the result qubit
# ---------------------------------------------------------------------------


def run_trace(layout, trace, rng):
    """Run a trace on the branch simulator; returns (outcomes, final state)."""
    state = None
    outcomes = []
    for step in trace:
        op = step[0]
        if op == "prepare":
            state = prepare_test_state(layout, step[1], step[2], step[3])
        elif op == "uf":
            state = apply_uf(state, step[1])
        elif op == "gate":
            state = apply_gate(state, step[1])
        elif op == "measure":
            outcome, state, _ = measure_computational(state, step[1], rng)
            outcomes.append(outcome)
        elif op == "measure_pm":
            outcome, _ = measure_result_pm(state, rng)
            outcomes.append(outcome)
        else:
            raise ValueError(f"unknown trace step {step!r}")
    return outcomes, state


def run_trace_dense(layout, trace, rng):
    """Run the same trace language on the dense oracle; returns (outcomes, DenseState)."""
    dense = None
    outcomes = []
    for step in trace:
        op = step[0]
        if op == "prepare":
            dense = to_dense(prepare_test_state(layout, step[1], step[2], step[3]))
        elif op == "uf":
            dense = dense_apply_uf(dense, step[1])
        elif op == "gate":
            dense = dense_apply_gate(dense, step[1])
        elif op == "measure":
            outcome, dense, _ = dense_measure_computational(dense, step[1], rng)
            outcomes.append(outcome)
        elif op == "measure_pm":
            p_plus = dense_plus_probability(dense)
            outcomes.append("+" if rng.random() < p_plus else "-")
        else:
            raise ValueError(f"unknown trace step {step!r}")
    return outcomes, dense


def branch_outcome_distribution(layout, trace):
    """Exact joint distribution of all measurement outcomes of a trace."""

    def walk(state, steps, prob, outcome):
        if not steps:
            yield outcome, prob
            return
        step, rest = steps[0], steps[1:]
        op = step[0]
        if op == "prepare":
            yield from walk(prepare_test_state(layout, step[1], step[2], step[3]),
                            rest, prob, outcome)
        elif op == "uf":
            yield from walk(apply_uf(state, step[1]), rest, prob, outcome)
        elif op == "gate":
            yield from walk(apply_gate(state, step[1]), rest, prob, outcome)
        elif op == "measure":
            lo = state.layout
            masks = [lo.qubit_mask(q) for q in step[1]]
            sel = 0
            for mk in masks:
                sel |= mk
            groups = {}
            for amp, bits in state.branches:
                key = bits & sel
                p, members = groups.get(key, (0.0, []))
                groups[key] = (p + abs(amp) ** 2, members + [(amp, bits)])
            for key, (p, members) in sorted(groups.items()):
                if p <= 0:
                    continue
                scale = 1.0 / math.sqrt(p)
                collapsed = BranchState(
                    lo, [(a * scale, b) for a, b in members], _validate=False)
                out = tuple(1 if key & mk else 0 for mk in masks)
                yield from walk(collapsed, rest, prob * p, outcome + (out,))
        elif op == "measure_pm":
            p_plus = plus_probability(state)
            for sym, p in (("+", p_plus), ("-", 1.0 - p_plus)):
                if p > 1e-15:
                    yield from walk(state, rest, prob * p, outcome + (sym,))
        else:
            raise ValueError(f"unknown trace step {step!r}")

    dist = {}
    for outcome, prob in walk(None, list(trace), 1.0, ()):
        dist[outcome] = dist.get(outcome, 0.0) + prob
    return dist


def dense_outcome_distribution(layout, trace):
    """Same joint outcome distribution, computed on the dense oracle."""

    def walk(dense, steps, prob, outcome):
        if not steps:
            yield outcome, prob
            return
        step, rest = steps[0], steps[1:]
        op = step[0]
        if op == "prepare":
            d = to_dense(prepare_test_state(layout, step[1], step[2], step[3]))
            yield from walk(d, rest, prob, outcome)
        elif op == "uf":
            yield from walk(dense_apply_uf(dense, step[1]), rest, prob, outcome)
        elif op == "gate":
            yield from walk(dense_apply_gate(dense, step[1]), rest, prob, outcome)
        elif op == "measure":
            lo = dense.layout
            masks = [lo.qubit_mask(q) for q in step[1]]
            sel = 0
            for mk in masks:
                sel |= mk
            idx = np.arange(dense.amplitudes.shape[0])
            weights = np.abs(dense.amplitudes) ** 2
            keys = idx & sel
            for key in np.unique(keys[weights > 1e-30]):
                p = float(weights[keys == key].sum())
                vec = np.where(keys == key, dense.amplitudes, 0.0) / math.sqrt(p)
                out = tuple(1 if key & mk else 0 for mk in masks)
                yield from walk(DenseState(lo, vec), rest, prob * p,
                                outcome + (out,))
        elif op == "measure_pm":
            p_plus = dense_plus_probability(dense)
            for sym, p in (("+", p_plus), ("-", 1.0 - p_plus)):
                if p > 1e-15:
                    yield from walk(dense, rest, prob * p, outcome + (sym,))
        else:
            raise ValueError(f"unknown trace step {step!r}")

    dist = {}
    for outcome, prob in walk(None, list(trace), 1.0, ()):
        dist[outcome] = dist.get(outcome, 0.0) + prob
    return dist
