"""Closed-form privacy arithmetic: interval privacy amounts, detection
probabilities for basis-measurement attacks, and the expected number of
training examples read before the first detection."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

SCOPES = ("attribute", "example")


@dataclass(frozen=True)
class PrivacyReport:
    """An interval-privacy statement: x localized to length `amount` with
    `confidence` percent certainty by the named method."""

    amount: float
    confidence: float
    method: str

    def __post_init__(self):
        if self.amount < 0 or not (0 < self.confidence <= 100):
            raise ValueError("need amount >= 0 and 0 < confidence <= 100")


def privacy_amount_uniform(delta, confidence=95.0):
    """Interval length for uniform noise on [-delta, delta] at c% confidence:
    2*c*delta/100 (1.9*delta at 95%)."""
    return 2.0 * confidence * delta / 100.0


def s2_privacy_lower_bound(delta, confidence=95.0):
    """Privacy amount of the published distorted example in the update step.

    The one answer bit halves the uniform-noise amount, and the querying party
    does not even know the generator family, so this is a lower bound.
    """
    return privacy_amount_uniform(delta, confidence) / 2.0


def detection_probability(n, n2, k, scope, n1=None, exact=False):
    """Probability a basis-measurement attack at reading depth n2 is caught.

    Attribute scope (privacy of one attribute cut to 2**(n1-n2)):
    (n2-1)/(2nk).  Example scope (every attribute cut): (n2*k-1)/(2nk).
    n1 cancels from both and is accepted only for report labeling.
    """
    if not (1 <= n2 <= n) or k < 1:
        raise ValueError("need 1 <= n2 <= n and k >= 1")
    if scope == "attribute":
        num = n2 - 1
    elif scope == "example":
        num = n2 * k - 1
    else:
        raise ValueError(f"scope must be one of {SCOPES}")
    p = Fraction(num, 2 * n * k)
    return p if exact else float(p)


def expected_leak_count(n, n2, k, exact=False):
    """Mean number of examples fully read (example scope, depth n2) before the
    first detection: 2n/n2 + 2n/(n2*(n2*k-1)) - 1.

    Identity: equals (1-p)/p with p = (n2*k-1)/(2nk), the mean of successes
    before the first failure in a geometric sequence.
    """
    if not (1 <= n2 <= n) or k < 1:
        raise ValueError("need 1 <= n2 <= n and k >= 1")
    if n2 * k <= 1:
        raise ValueError("n2*k must exceed 1 (otherwise detection never occurs)")
    value = (
        Fraction(2 * n, n2)
        + Fraction(2 * n, n2 * (n2 * k - 1))
        - 1
    )
    return value if exact else float(value)


def attack_qubits(n, n2, k, scope):
    """Data-qubit index set a reader measures to reach privacy level 2**(n1-n2).

    One bit of each target always comes free from the answer of f, so the set
    skips the first attribute's leading bit: attribute scope measures bits
    2..n2 of attribute 1 (n2-1 qubits); example scope additionally measures
    bits 1..n2 of every other attribute (n2*k-1 qubits total).
    """
    if not (2 <= n2 <= n):
        raise ValueError("need 2 <= n2 <= n (n2=1 reads nothing beyond the answer)")
    qubits = list(range(2, n2 + 1))
    if scope == "example":
        for j in range(1, k):
            base = j * n
            qubits.extend(range(base + 1, base + n2 + 1))
    elif scope != "attribute":
        raise ValueError(f"scope must be one of {SCOPES}")
    return tuple(qubits)


def privacy_table(n, k, n2_values, n1=None):
    """Rows of (n2, attribute-scope detection, example-scope detection,
    expected leak count, privacy level label) for the CLI table."""
    rows = []
    for n2 in n2_values:
        level = f"2^({n1}-{n2})" if n1 is not None else f"2^(n1-{n2})"
        rows.append({
            "n2": n2,
            "p_detect_attribute": detection_probability(n, n2, k, "attribute"),
            "p_detect_example": detection_probability(n, n2, k, "example"),
            "expected_examples_read": (
                expected_leak_count(n, n2, k) if n2 * k > 1 else float("inf")
            ),
            "privacy_level": level,
        })
    return rows
