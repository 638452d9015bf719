"""GF(4) arithmetic, LFSR m-sequences and pseudorandom phase sequence sets.

Elements of GF(4) are stored as integer labels in the polynomial basis
modulo x^2 + x + 1::

    0 -> 0,  1 -> 1,  2 -> w,  3 -> w^2 = w + 1

The same labels double as Z4 symbols for the 4-ary phase mapping
(label * pi/2), which is why they are kept as plain integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# exp/log over the cyclic group <w> of order 3
_EXP = (1, 2, 3)
_LOG = {1: 0, 2: 1, 3: 2}

MUL_TABLE = np.array(
    [[0 if a == 0 or b == 0 else _EXP[(_LOG[a] + _LOG[b]) % 3] for b in range(4)]
     for a in range(4)],
    dtype=np.int8,
)

# Lexicographically first primitive polynomial per degree, (c0, ..., c_{s-1}).
# Checked by verify_primitive before first use; never trusted blindly.
DEFAULT_POLYS = {
    1: (2,),            # x + w
    2: (2, 1),          # x^2 + x + w
    3: (2, 1, 1),       # x^3 + x^2 + x + w
    4: (2, 0, 1, 1),    # x^4 + x^3 + x^2 + w
    5: (2, 0, 0, 0, 1), # x^5 + x^4 + w
}

_SYMBOLS = ("0", "1", "w", "w^2")


class NotPrimitiveError(ValueError):
    """The feedback polynomial does not generate a maximal-length sequence."""

    def __init__(self, poly, period):
        self.poly = poly
        self.period = period
        super().__init__(
            f"{poly} is not primitive: period {period} != {4 ** poly.degree - 1}"
        )


def _check_label(x):
    if x not in (0, 1, 2, 3):
        raise ValueError(f"GF(4) label must be in 0..3, got {x!r}")


def gf4_add(a: int, b: int) -> int:
    """Characteristic-2 addition: XOR of the two basis bits."""
    _check_label(a)
    _check_label(b)
    return a ^ b


def gf4_mul(a: int, b: int) -> int:
    _check_label(a)
    _check_label(b)
    return int(MUL_TABLE[a, b])


@dataclass(frozen=True)
class PrimitivePoly:
    """Monic x^s + c_{s-1} x^{s-1} + ... + c_0 over GF(4).

    ``coeffs`` holds ``(c_0, ..., c_{s-1})``; the leading 1 is implicit.
    Construction only validates the labels. Primitivity is a separate,
    exhaustive check (:func:`verify_primitive`).
    """

    coeffs: tuple[int, ...]

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("polynomial degree must be at least 1")
        for c in coeffs:
            _check_label(c)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def __str__(self):
        terms = [f"x^{self.degree}" if self.degree > 1 else "x"]
        for power in range(self.degree - 1, -1, -1):
            c = self.coeffs[power]
            if c == 0:
                continue
            mono = "" if power == 0 else ("x" if power == 1 else f"x^{power}")
            if power == 0:
                terms.append(_SYMBOLS[c])
            elif c == 1:
                terms.append(mono)
            else:
                terms.append(f"{_SYMBOLS[c]}*{mono}")
        return " + ".join(terms)


def _as_poly(poly) -> PrimitivePoly:
    return poly if isinstance(poly, PrimitivePoly) else PrimitivePoly(tuple(poly))


def _lfsr_run(coeffs, steps):
    """Yield successive outputs a_0, a_1, ... of the seeded recurrence."""
    s = len(coeffs)
    state = [0] * (s - 1) + [1]
    for _ in range(steps):
        yield state[0]
        # a_k = sum_j c_{s-j} a_{k-j}; state[i] holds a_{k-s+i}
        nxt = 0
        for c, x in zip(coeffs, state):
            nxt ^= MUL_TABLE[c, x]
        state = state[1:] + [int(nxt)]


def lfsr_period(poly) -> int:
    """Period of the LFSR state sequence from seed (0, ..., 0, 1).

    Found by exhaustive cycle detection: step until the seed state recurs.
    A zero constant term makes the map non-invertible, so the seed may never
    recur and the period is undefined.
    """
    poly = _as_poly(poly)
    if poly.coeffs[0] == 0:
        raise ValueError(f"{poly}: zero constant term, LFSR period undefined")
    s = poly.degree
    seed = (0,) * (s - 1) + (1,)
    state = seed
    for k in range(1, 4 ** s + 1):
        nxt = 0
        for c, x in zip(poly.coeffs, state):
            nxt ^= MUL_TABLE[c, x]
        state = state[1:] + (int(nxt),)
        if state == seed:
            return k
    raise AssertionError("an invertible LFSR on 4^s states must cycle")


def verify_primitive(poly) -> bool:
    poly = _as_poly(poly)
    return lfsr_period(poly) == 4 ** poly.degree - 1


def lfsr_m_sequence(poly) -> np.ndarray:
    """One full period (length 4^s - 1) of the m-sequence driven by ``poly``.

    The first ``s`` outputs are the seed (0, ..., 0, 1). Raises
    :class:`NotPrimitiveError` naming the measured period otherwise.
    """
    poly = _as_poly(poly)
    period = lfsr_period(poly)
    if period != 4 ** poly.degree - 1:
        raise NotPrimitiveError(poly, period)
    return np.fromiter(_lfsr_run(poly.coeffs, period), dtype=np.int8, count=period)


@lru_cache(maxsize=None)
def default_poly(s: int) -> PrimitivePoly:
    if s not in DEFAULT_POLYS:
        raise ValueError(f"no default polynomial for degree {s}; pass one explicitly")
    poly = PrimitivePoly(DEFAULT_POLYS[s])
    period = lfsr_period(poly)
    if period != 4 ** s - 1:
        raise NotPrimitiveError(poly, period)
    return poly


def phase_of(label):
    """4-ary phase of a Z4 label: 0, pi/2, pi, 3pi/2. Works on arrays too."""
    arr = np.asarray(label)
    if arr.size and (arr.min() < 0 or arr.max() > 3):
        raise ValueError("Z4 label must be in 0..3")
    out = arr * (np.pi / 2)
    return float(out) if out.ndim == 0 else out


def phasor(labels) -> np.ndarray:
    """exp(i * phase_of(labels)), exact: table lookup instead of cos/sin."""
    return np.array([1, 1j, -1, -1j])[np.asarray(labels)]


@dataclass(frozen=True, eq=False)
class PpsSet:
    """The N = 4^s orthogonal-candidate phase sequences over one polynomial.

    ``sequences[a]`` is the Z4 label array of sequence ``a`` (read-only).
    Sequence 0 is all zero; sequence j >= 1 is the base m-sequence cyclically
    shifted left by j - 1 with a single zero appended at index N - 1.
    """

    poly: PrimitivePoly
    sequences: np.ndarray

    @property
    def s(self) -> int:
        return self.poly.degree

    @property
    def N(self) -> int:
        return self.sequences.shape[1]

    def __len__(self):
        return self.sequences.shape[0]

    def __getitem__(self, index) -> np.ndarray:
        return self.sequences[self.check_index(index)]

    def check_index(self, index) -> int:
        if not isinstance(index, (int, np.integer)) or not 0 <= index < len(self):
            raise IndexError(f"sequence index {index!r} out of range 0..{len(self) - 1}")
        return int(index)

    def phases(self, index) -> np.ndarray:
        return phase_of(self[index])

    def __eq__(self, other):
        if not isinstance(other, PpsSet):
            return NotImplemented
        return self.poly == other.poly and np.array_equal(self.sequences, other.sequences)

    def __hash__(self):
        return hash(self.poly)


def build_pps_set(poly) -> PpsSet:
    poly = _as_poly(poly)
    base = lfsr_m_sequence(poly)
    N = 4 ** poly.degree
    seqs = np.zeros((N, N), dtype=np.int8)
    for j in range(1, N):
        seqs[j, : N - 1] = np.roll(base, -(j - 1))
    seqs.setflags(write=False)
    return PpsSet(poly, seqs)


@lru_cache(maxsize=None)
def default_pps_set(s: int) -> PpsSet:
    return build_pps_set(default_poly(s))


def label_counts(seq) -> np.ndarray:
    """Occurrences of labels 0..3 in one sequence."""
    return np.bincount(np.asarray(seq), minlength=4)


def sequence_orthogonality(pps: PpsSet, a: int, b: int) -> complex:
    """(1/N) sum_k exp(i(lambda_k^b - lambda_k^a)), summed exactly in Z4."""
    diff = (pps[b].astype(np.int16) - pps[a]) % 4
    return complex(phasor(diff).sum() / pps.N)


def gram_matrix(pps: PpsSet) -> np.ndarray:
    """N x N matrix of :func:`sequence_orthogonality` over every pair."""
    z = phasor(pps.sequences)
    return z.conj() @ z.T / pps.N


def pps_to_dict(pps: PpsSet) -> dict:
    return {
        "s": pps.s,
        "N": pps.N,
        "polynomial": list(pps.poly.coeffs),
        "sequences": pps.sequences.tolist(),
    }


def pps_to_json(pps: PpsSet) -> str:
    """Canonical JSON: fixed key order, one sequence per line, trailing newline."""
    d = pps_to_dict(pps)
    rows = ",\n    ".join(json.dumps(row, separators=(",", ":")) for row in d["sequences"])
    return (
        "{\n"
        f'  "s": {d["s"]},\n'
        f'  "N": {d["N"]},\n'
        f'  "polynomial": {json.dumps(d["polynomial"])},\n'
        f'  "sequences": [\n    {rows}\n  ]\n'
        "}\n"
    )


def pps_from_dict(d: dict) -> PpsSet:
    """Rebuild from the polynomial and check the stored sequences agree."""
    pps = build_pps_set(d["polynomial"])
    if d.get("s", pps.s) != pps.s or d.get("N", pps.N) != pps.N:
        raise ValueError("PPS document: s/N inconsistent with polynomial degree")
    stored = d.get("sequences")
    if stored is not None and not np.array_equal(np.asarray(stored), pps.sequences):
        raise ValueError("PPS document: sequences do not match the polynomial")
    return pps


def pps_from_json(text: str) -> PpsSet:
    return pps_from_dict(json.loads(text))
