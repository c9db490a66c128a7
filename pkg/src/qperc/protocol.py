"""The three-round cheat-sensitive data system.

One execution answers a single query f(x): the data owner runs three compute
rounds in random order, one on the real input x and two on a shared decoy
(y, u, m).  The querying party acts on each state through a pluggable
strategy; any information-gaining deviation risks detection either at the
data-register check inside a round or when the two decoy rounds disagree.

Round mechanics (honest):
  1. prepare |+>|y>, then CNOT(result -> data 1), Z^u on the result qubit,
     SWAP(data 1, data m)   [no gates when m = 0, the computational form]
  2. send to Bob, who applies the oracle phase U_f
  3. undo the gates in reverse, measure all data qubits (terminate unless the
     outcome is y), measure the result qubit in the +/- basis
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .qstate import (
    BranchState,
    RegisterLayout,
    add_ancillas,
    apply_gate,
    _apply_uf_int,
    bits_to_str,
    flip_data_bit,
    measure_computational,
    measure_data,
    measure_result_pm,
    prepare_test_state,
    str_to_bits,
    swap_data_bits,
)

DETECTION_SITES = ("none", "data-mismatch", "test-mismatch")


@dataclass
class ProtocolParams:
    """Per-execution wiring: register layout, Bob's oracle, both parties' streams.

    ``f`` takes the data register as a bit string; ``f_int`` (same predicate on
    the integer encoding) can be supplied directly on hot paths.  Alice and Bob
    must never share a randomness stream.
    """

    layout: RegisterLayout
    f: callable = None
    alice_rng: object = None
    bob_rng: object = None
    f_int: callable = None
    record_transcript: bool = False

    def __post_init__(self):
        if self.alice_rng is None or self.bob_rng is None:
            raise ValueError("both alice_rng and bob_rng are required")
        if self.alice_rng is self.bob_rng:
            raise ValueError("Alice and Bob must not share a randomness stream")
        if self.f_int is None:
            if self.f is None:
                raise ValueError("an oracle f (or f_int) is required")
            width = self.layout.data_qubits
            fn = self.f
            self.f_int = lambda d: fn(bits_to_str(d, width))


@dataclass(frozen=True)
class BobStrategy:
    """Tagged description of how Bob treats each received state.

    kinds: honest | measure-subset | entangle-copy | guess-mu |
    measure-and-resend.  ``qubits`` are 1-indexed data-qubit positions for the
    subset attacks.  ``attack_rounds`` selects in which of the three rounds the
    deviation is applied (honest behaviour elsewhere); the default is all
    three, matching the analysis that a reader must measure every round or
    miss the real input with probability at least 1/3.
    """

    kind: str = "honest"
    qubits: tuple = ()
    attack_rounds: frozenset = frozenset({1, 2, 3})

    def __post_init__(self):
        if self.kind not in ("honest", "measure-subset", "entangle-copy",
                             "guess-mu", "measure-and-resend"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind in ("measure-subset", "entangle-copy") and not self.qubits:
            raise ValueError(f"{self.kind} needs a non-empty qubit set")

    @staticmethod
    def honest():
        return BobStrategy("honest")

    @staticmethod
    def measure_subset(qubits, attack_rounds=frozenset({1, 2, 3})):
        return BobStrategy("measure-subset", tuple(sorted(qubits)), attack_rounds)

    @staticmethod
    def entangle_copy(qubits, attack_rounds=frozenset({1, 2, 3})):
        return BobStrategy("entangle-copy", tuple(sorted(qubits)), attack_rounds)

    @staticmethod
    def guess_mu():
        return BobStrategy("guess-mu")

    @staticmethod
    def measure_and_resend():
        return BobStrategy("measure-and-resend")


@dataclass
class ProtocolOutcome:
    """Result of one full Algorithm-style execution."""

    answer: int | None
    detected: bool
    detection_site: str
    leaked_bits: list
    rounds_executed: int
    transcript: list = field(default_factory=list)
    attack_info: dict = field(default_factory=dict)


class _RunState:
    """Bob's mutable per-execution memory (guesses, observed strings, reads)."""

    __slots__ = ("m_guess", "u_guess", "observed", "round_records")

    def __init__(self):
        self.m_guess = None
        self.u_guess = None
        self.observed = []   # data strings Bob has fully measured this run
        self.round_records = {}  # round index -> list of (data qubit, bit)


def _bob_act(state, params, strategy, run, round_index):
    """Apply Bob's action for one round; returns (state, copied_sources)."""
    lo = params.layout
    nk = lo.data_qubits
    kind = strategy.kind
    if kind != "honest" and round_index not in strategy.attack_rounds:
        kind = "honest"

    if kind == "honest":
        return _apply_uf_int(state, params.f_int), None

    if kind == "measure-subset":
        outcome, collapsed, _ = measure_computational(state, strategy.qubits,
                                                      params.bob_rng)
        run.round_records[round_index] = list(zip(strategy.qubits, outcome))
        return _apply_uf_int(collapsed, params.f_int), None

    if kind == "entangle-copy":
        state = add_ancillas(state, len(strategy.qubits))
        for j, q in enumerate(strategy.qubits, start=1):
            state = apply_gate(state, ("COPY", q, j))
        return _apply_uf_int(state, params.f_int), strategy.qubits

    if kind == "guess-mu":
        mg, ug = run.m_guess, run.u_guess
        u_read, y_read = _measure_in_guessed_basis(state, mg, params.bob_rng)
        # Bob's certain bits: every position except the guessed flip position.
        value = swap_data_bits(lo, y_read, mg)
        run.round_records[round_index] = [
            (q, (value >> (nk - q)) & 1) for q in range(1, nk + 1) if q != mg
        ]
        rebuilt = prepare_test_state(lo, value, ug, mg)
        return _apply_uf_int(rebuilt, params.f_int), None

    if kind == "measure-and-resend":
        outcome, _, _ = measure_computational(state, range(0, nk + 1),
                                              params.bob_rng)
        r = outcome[0]
        z = 0
        for bit in outcome[1:]:
            z = (z << 1) | bit
        run.round_records[round_index] = [
            (q, (z >> (nk - q)) & 1) for q in range(1, nk + 1)
        ]
        mg = _estimate_flip_position(lo, z, run.observed, params.bob_rng)
        run.observed.append(z)
        ug = int(params.bob_rng.integers(2))
        # Branch-aware fabrication: a result read of 1 means z was the flipped
        # branch, so the unflipped branch content is z with bit mg flipped.
        first = z if r == 0 else flip_data_bit(lo, z, mg)
        fabricated = prepare_test_state(lo, first, ug, mg)
        return _apply_uf_int(fabricated, params.f_int), None

    raise AssertionError(kind)


def _estimate_flip_position(layout, z, observed, rng):
    """Guess the decoy flip position: a previously seen string differing from
    z in exactly one data bit pins it down; otherwise guess uniformly."""
    nk = layout.data_qubits
    for prev in observed:
        diff = prev ^ z
        if diff and diff & (diff - 1) == 0:
            return nk - diff.bit_length() + 1
    return 1 + int(rng.integers(nk))


def _measure_in_guessed_basis(state, m_guess, rng):
    """Measure the whole register in the decoy-state basis for flip position
    m_guess; outcomes label states (|0>|v> + (-1)**u |1>|v xor e_m>)/sqrt(2).

    Returns the sampled (u, y) label where y is the pre-preparation string
    Bob infers.  The collapsed state is not returned: the attacker immediately
    re-prepares from the label.
    """
    lo = state.layout
    candidates = set()
    for _, bits in state.branches:
        z = lo.data_int(bits)
        if lo.result_bit(bits):
            z = flip_data_bit(lo, z, m_guess)
        candidates.add(swap_data_bits(lo, z, m_guess))

    outcomes = []
    total = 0.0
    for y in sorted(candidates):
        v = swap_data_bits(lo, y, m_guess)
        a0 = state.amplitude(lo.pack(0, v))
        a1 = state.amplitude(lo.pack(1, flip_data_bit(lo, v, m_guess)))
        for u in (0, 1):
            amp = (a0 + (a1 if u == 0 else -a1)) / math.sqrt(2.0)
            p = abs(amp) ** 2
            if p > 1e-15:
                outcomes.append(((u, y), p))
                total += p
    r = rng.random() * total
    acc = 0.0
    for (u, y), p in outcomes:
        acc += p
        if r < acc:
            return u, y
    return outcomes[-1][0]


def alice_compute(y, u, m, params, strategy, run, round_index, transcript):
    """One compute round; returns (result_bit, detected, state_after)."""
    lo = params.layout
    nk = lo.data_qubits
    if m == 0:
        state = prepare_test_state(lo, y, 0, 0)
    else:
        state = prepare_test_state(lo, swap_data_bits(lo, y, m), u, m)

    state, copied_sources = _bob_act(state, params, strategy, run, round_index)

    if m >= 1:
        state = apply_gate(state, ("SWAP", m))
        if u:
            state = apply_gate(state, ("Z",))
        state = apply_gate(state, ("CNOT",))
        if transcript is not None:
            transcript.append(f"round {round_index} gate SWAP 1 {m}")
            if u:
                transcript.append(f"round {round_index} gate Z")
            transcript.append(f"round {round_index} gate CNOT")

    data_out, state, p_data = measure_data(state, params.alice_rng)
    if transcript is not None:
        transcript.append(
            f"round {round_index} measure data outcome={bits_to_str(data_out, nk)}"
            f" expect={bits_to_str(y, nk)} p={p_data:.6g}"
        )
    if data_out != y:
        return None, True, state

    pm, p_pm = measure_result_pm(state, params.alice_rng)
    if transcript is not None:
        transcript.append(f"round {round_index} measure result outcome={pm} p={p_pm:.6g}")

    if copied_sources is not None:
        # Bob reads his retained copy qubits.  The read commutes with Alice's
        # +/- measurement, so sampling the marginal here is exact.
        anc = range(nk + 1, nk + 1 + len(copied_sources))
        outcome, _, _ = measure_computational(state, anc, params.bob_rng)
        run.round_records[round_index] = list(zip(copied_sources, outcome))

    return (0 if pm == "+" else 1), False, state


def run_data_system(x, params, strategy=BobStrategy.honest(), draws=None):
    """Execute the full three-round data system for input x.

    x may be a bit string or an integer over the nk data qubits.  Returns a
    :class:`ProtocolOutcome`; detection is a normal outcome, not an error.
    ``draws`` optionally pins Alice's (i, y, u, m) for exhaustive testing.
    """
    lo = params.layout
    nk = lo.data_qubits
    x_int = str_to_bits(x) if isinstance(x, str) else int(x)
    arng = params.alice_rng

    if draws is None:
        i_data = 1 + int(arng.integers(3))
        y_int = int(arng.integers(1 << nk))
        u = int(arng.integers(2))
        m = 1 + int(arng.integers(nk))
    else:
        i_data, y_int, u, m = draws

    run = _RunState()
    if strategy.kind == "guess-mu":
        run.m_guess = 1 + int(params.bob_rng.integers(nk))
        run.u_guess = int(params.bob_rng.integers(2))

    transcript = None
    if params.record_transcript:
        transcript = [
            f"run n={lo.n} k={lo.k} x={bits_to_str(x_int, nk)} i={i_data}"
            f" y={bits_to_str(y_int, nk)} u={u} m={m} strategy={strategy.kind}"
        ]

    attack_info = {"i_data": i_data, "m_true": m, "u_true": u}
    if strategy.kind == "guess-mu":
        attack_info["m_guess"] = run.m_guess
        attack_info["u_guess"] = run.u_guess
        attack_info["read_ok"] = run.m_guess == m

    def finish(answer, detected, site, rounds):
        leaked = []
        for r, records in sorted(run.round_records.items()):
            if r != i_data or r > rounds:
                continue
            for q, bit in records:
                if bit == (x_int >> (nk - q)) & 1:
                    leaked.append((q, bit))
        if transcript is not None:
            ans = "none" if answer is None else str(answer)
            transcript.append(
                f"result answer={ans} detected={str(detected).lower()}"
                f" site={site} rounds={rounds}"
            )
            for q, bit in leaked:
                transcript.append(f"leak q={q} bit={bit}")
        return ProtocolOutcome(answer, detected, site, leaked, rounds,
                               transcript or [], attack_info)

    test_results = []
    data_result = None
    for r in (1, 2, 3):
        if r == i_data:
            ry, ru, rm, kind = x_int, 0, 0, "data"
        else:
            ry, ru, rm, kind = y_int, u, m, "test"
        if transcript is not None:
            transcript.append(
                f"round {r} input kind={kind} y={bits_to_str(ry, nk)} u={ru} m={rm}"
            )
        result, detected, _ = alice_compute(ry, ru, rm, params, strategy, run,
                                            r, transcript)
        if detected:
            return finish(None, True, "data-mismatch", r)
        if kind == "data":
            data_result = result
        else:
            test_results.append(result)

    if test_results[0] != test_results[1]:
        return finish(None, True, "test-mismatch", 3)
    return finish(data_result, False, "none", 3)


def transcript_text(outcome):
    """Serialize an outcome's transcript to the line-oriented debug format."""
    return "\n".join(outcome.transcript) + "\n"
