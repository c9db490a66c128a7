"""Private random-noise generators and the fixed-point attribute codec.

The data provider distorts published training vectors with mean-zero noise
drawn from one of five generator families (R0..R4).  Every sample is rounded
to the 1/1024 grid.  The same module houses the fixed-point codec that maps
real attribute values onto the n-bit strings carried by the data qubits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRID = 1024  # all generated numbers are rounded to multiples of 1/1024

GENERATOR_KINDS = ("R0", "R1", "R2", "R3", "R4")

# Positive draws of R4 are replaced by a uniform draw from (0, R4_CUTOFF * delta].
# The printed constant makes the mean only approximately zero (exact zero mean
# would need 2*sqrt(2/pi) ~ 1.5958); we keep it verbatim and document the
# ~0.06% * delta bias instead of correcting it.
R4_CUTOFF = 1.5934


def round_to_grid(x):
    """Round to the nearest multiple of 1/1024, halves away from zero.

    Works on scalars and numpy arrays.  Half-away-from-zero keeps the
    rounding sign-symmetric so it cannot introduce a mean bias.
    """
    scaled = np.asarray(x, dtype=float) * GRID
    out = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5) / GRID
    if np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class NoiseGenerator:
    """One of the private generators R0..R4 with scale parameter delta."""

    kind: str
    delta: float

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.delta <= 0:
            raise ValueError("delta must be positive")

    def sample(self, rng, size=None):
        """Draw samples, rounded to the 1/1024 grid.

        Parameters
        ----------
        rng : numpy.random.Generator
            Explicit pseudorandom stream; no hidden global state.
        size : int, tuple or None
            None returns a scalar float.
        """
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        d = self.delta
        kind = self.kind

        if kind in ("R0", "R1", "R2"):
            r = rng.uniform(-d, d, size=n)
            if kind == "R1":
                r = np.where(r > 0, r + 0.5 * d, np.where(r < 0, r - 0.5 * d, r))
            elif kind == "R2":
                r = np.where(r > 0, 2.0 * r, np.where(r < 0, r - 0.5 * d, r))
        else:
            r = rng.normal(0.0, d, size=n)
            if kind == "R4":
                pos = r > 0
                npos = int(np.count_nonzero(pos))
                if npos:
                    # redraw uniformly from the half-open interval (0, cutoff*d]
                    u = rng.uniform(0.0, R4_CUTOFF * d, size=npos)
                    r[pos] = R4_CUTOFF * d - u  # maps [0, c*d) -> (0, c*d]

        r = round_to_grid(r)
        if scalar:
            return float(r[0])
        return r.reshape(size)

    def spec_string(self):
        return f"{self.kind}:delta={self.delta:g}"


def parse_generator(spec):
    """Parse a generator spec string such as ``"R2:delta=0.5"``."""
    parts = spec.strip().split(":")
    kind = parts[0].upper()
    delta = 1.0
    for part in parts[1:]:
        key, _, value = part.partition("=")
        if key.strip() != "delta":
            raise ValueError(f"unknown generator option {key!r} in {spec!r}")
        delta = float(value)
    return NoiseGenerator(kind, delta)


class CodecRangeError(ValueError):
    """Value falls outside the representable fixed-point range."""


@dataclass(frozen=True)
class FixedPointCodec:
    """Fixed-point codec: n total bits, n1 of them before the binary point.

    A public constant ``offset`` is added before encoding so that negative
    attributes land in the representable range [0, 2**n1).  The offset is a
    known shift and does not affect privacy.  Bit strings are most significant
    bit first, so flipping the first bit changes the decoded value by 2**(n1-1).
    """

    n: int
    n1: int
    offset: float = 0.0

    def __post_init__(self):
        if not (1 <= self.n1 <= self.n):
            raise ValueError("need 1 <= n1 <= n")

    @property
    def resolution(self):
        return 2.0 ** (self.n1 - self.n)

    def encode_int(self, value):
        """Encode a real value to the integer whose binary digits are the code."""
        shifted = value + self.offset
        if not (0.0 <= shifted < 2.0 ** self.n1):
            raise CodecRangeError(
                f"value {value} (+offset {self.offset}) outside [0, 2^{self.n1})"
            )
        q = int(np.floor(shifted / self.resolution + 0.5))
        if q >= 1 << self.n:  # rounding pushed us past the top of the range
            raise CodecRangeError(f"value {value} rounds past the top of the range")
        return q

    def decode_int(self, code):
        if not (0 <= code < 1 << self.n):
            raise ValueError(f"code {code} does not fit in {self.n} bits")
        return code * self.resolution - self.offset

    def encode(self, value):
        """Encode a real value to an n-character bit string (MSB first)."""
        return format(self.encode_int(value), f"0{self.n}b")

    def decode(self, bits):
        """Decode an n-character bit string back to a real value."""
        if len(bits) != self.n:
            raise ValueError(f"expected {self.n} bits, got {len(bits)}")
        return self.decode_int(int(bits, 2))

    def encode_vector_int(self, x):
        """Encode a length-k vector into one n*k-bit integer, attribute 1 first."""
        code = 0
        for v in x:
            code = (code << self.n) | self.encode_int(v)
        return code

    def decode_vector_int(self, code, k):
        """Inverse of :meth:`encode_vector_int`."""
        mask = (1 << self.n) - 1
        vals = [self.decode_int((code >> (self.n * (k - 1 - j))) & mask) for j in range(k)]
        return np.array(vals)
