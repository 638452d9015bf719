"""Mode-state assembly, density matrices, partial traces and entanglement entropy.

Basis ordering: party 0 (the first field of the ensemble) is the most
significant qubit, so amplitude index ``q_0 q_1 ... q_{n-1}`` read as binary.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from functools import reduce
from itertools import combinations

import numpy as np

from .fields import FieldEnsemble
from .gf4 import phasor

DEFAULT_PARTY_CAP = 10
NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
EIG_FLOOR = 1e-12


class DensityMatrixError(ValueError):
    """A density matrix failed one of its invariants; carries the measured defect."""


def tensor(*vectors) -> np.ndarray:
    """Kronecker product, first argument most significant."""
    return reduce(np.kron, (np.asarray(v, dtype=complex) for v in vectors), np.ones(1, complex))


def party_label(i: int) -> str:
    return string.ascii_lowercase[i] if i < 26 else f"p{i}"


@dataclass(frozen=True)
class ModeState:
    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2 ** self.n,):
            raise ValueError(f"state of {self.n} parties needs {2 ** self.n} amplitudes")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def fidelity(self, other) -> float:
        """|<other|self>|^2 for unit vectors; blind to global phase."""
        other = other.amplitudes if isinstance(other, ModeState) else np.asarray(other, complex)
        return float(abs(np.vdot(other, self.amplitudes)) ** 2)


def assemble_mode_state(ens: FieldEnsemble, cap: int = DEFAULT_PARTY_CAP) -> ModeState:
    """sum_k exp(-i lambda^(s)_k) psi_1^k (x) ... (x) psi_n^k, normalized.

    lambda^(s) is the sum of the ensemble's original PPS phases. The sum's
    normalization stands in for the unspecified constant, and the outer
    sequence-valued global phase is dropped.
    """
    n = ens.n
    if n > cap:
        raise ValueError(f"{n} parties exceeds the assembly cap of {cap}")
    total_labels = sum(ens.pps[i].astype(np.int64) for i in ens.indices) % 4
    weights = phasor(total_labels).conj()
    # (N, 2^n): per-unit tensor product, party 0 most significant
    per_unit = np.ones((ens.N, 1), dtype=complex)
    for f in ens.fields:
        per_unit = (per_unit[:, :, None] * f.units[:, None, :]).reshape(ens.N, -1)
    amps = weights @ per_unit
    norm = np.linalg.norm(amps)
    if norm < NORM_TOL:
        raise ValueError("assembled mode state has zero norm; ensemble is inconsistent")
    return ModeState(amps / norm, n)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    parties: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        parties = tuple(self.parties)
        dim = 2 ** len(parties)
        if m.shape != (dim, dim):
            raise ValueError(f"{len(parties)} parties need a {dim}x{dim} matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "parties", parties)

    @property
    def m(self) -> int:
        return len(self.parties)

    def defects(self) -> dict:
        m = self.matrix
        return {
            "hermitian": float(np.max(np.abs(m - m.conj().T))),
            "trace": float(abs(np.trace(m) - 1)),
            "min_eigenvalue": float(np.min(np.linalg.eigvalsh((m + m.conj().T) / 2))),
        }

    def validate(self) -> DensityMatrix:
        d = self.defects()
        if d["hermitian"] >= HERMITIAN_TOL:
            raise DensityMatrixError(f"not Hermitian: max |rho - rho^dag| = {d['hermitian']:.3g}")
        if d["trace"] >= TRACE_TOL:
            raise DensityMatrixError(f"trace off by {d['trace']:.3g}")
        if d["min_eigenvalue"] <= -PSD_TOL:
            raise DensityMatrixError(f"not PSD: min eigenvalue {d['min_eigenvalue']:.3g}")
        return self


def density_matrix(state: ModeState) -> DensityMatrix:
    if abs(state.norm - 1) > NORM_TOL:
        raise ValueError(f"state norm {state.norm!r} != 1")
    v = state.amplitudes
    return DensityMatrix(np.outer(v, v.conj()), tuple(range(state.n))).validate()


@dataclass(frozen=True)
class Bipartition:
    """Split of parties into A (kept) and B (traced out)."""

    A: tuple
    B: tuple

    @classmethod
    def of(cls, keep, n: int) -> Bipartition:
        keep = tuple(sorted(set(keep)))
        if not keep or len(keep) >= n or keep[0] < 0 or keep[-1] >= n:
            raise ValueError(f"{keep} is not a non-empty proper subset of {n} parties")
        return cls(keep, tuple(p for p in range(n) if p not in keep))

    def label(self) -> str:
        return "".join(map(party_label, self.A)) + "|" + "".join(map(party_label, self.B))

    def swapped(self) -> Bipartition:
        return Bipartition(self.B, self.A)


def bipartitions(n: int):
    """Every unordered non-trivial bipartition, with party 0 always in A."""
    rest = range(1, n)
    for r in range(n - 1):
        for extra in combinations(rest, r):
            yield Bipartition.of((0,) + extra, n)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduce ``rho`` onto the parties in ``keep`` (a Bipartition or positions).

    ``keep`` names positions within ``rho.parties``.
    """
    if isinstance(keep, Bipartition):
        if len(keep.A) + len(keep.B) != rho.m:
            raise ValueError(f"bipartition of {len(keep.A) + len(keep.B)} parties on a {rho.m}-party matrix")
        keep = keep.A
    keep = sorted(set(keep))
    m = rho.m
    if not keep or any(not 0 <= p < m for p in keep):
        raise ValueError(f"invalid subsystem {keep} for {m} parties")
    traced = [p for p in range(m) if p not in keep]
    t = rho.matrix.reshape((2,) * (2 * m))
    # trace pairs (p, p + m) from the highest axis down so lower axis numbers stay valid
    for p in sorted(traced, reverse=True):
        t = np.trace(t, axis1=p, axis2=p + t.ndim // 2)
    dim = 2 ** len(keep)
    return DensityMatrix(t.reshape(dim, dim), tuple(rho.parties[p] for p in keep))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S = -sum p log2 p over eigenvalues, in bits.

    Eigenvalues under 1e-12 count as zero and the rest are clamped to [0, 1]
    so float noise cannot reach the logarithm.
    """
    rho.validate()
    p = np.linalg.eigvalsh(rho.matrix)
    p = np.clip(p, 0.0, 1.0)
    p = p[p >= EIG_FLOOR]
    return float(max(0.0, -np.sum(p * np.log2(p))))


def entanglement_report(ens: FieldEnsemble, cap: int = DEFAULT_PARTY_CAP) -> dict:
    """S of the reduced state on A for every bipartition of the assembled state."""
    rho = density_matrix(assemble_mode_state(ens, cap))
    return {bp: von_neumann_entropy(partial_trace(rho, bp)) for bp in bipartitions(ens.n)}


def _complex_rows(a) -> list:
    a = np.atleast_1d(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def state_to_json(state: ModeState) -> str:
    return json.dumps({"n": state.n, "amplitudes": _complex_rows(state.amplitudes)}) + "\n"


def density_to_json(rho: DensityMatrix) -> str:
    """Row-major [re, im] pairs."""
    return json.dumps({"parties": list(rho.parties), "matrix": _complex_rows(rho.matrix)}) + "\n"


def density_from_json(text: str) -> DensityMatrix:
    d = json.loads(text)
    a = np.asarray(d["matrix"], dtype=float)
    return DensityMatrix(a[..., 0] + 1j * a[..., 1], tuple(d["parties"]))


def _fmt(z: complex, digits: int) -> str:
    re = round(z.real, digits) + 0.0
    im = round(z.imag, digits) + 0.0
    if im == 0:
        return f"{re:.{digits}f}"
    return f"{re:.{digits}f}{im:+.{digits}f}j"


def format_density(rho: DensityMatrix, digits: int = 3) -> str:
    """Plain-text table with |q...) row/column labels; at most 4 parties."""
    if rho.m > 4:
        raise ValueError("pretty-printing is limited to 4 parties")
    labels = [format(i, f"0{rho.m}b") for i in range(2 ** rho.m)]
    cells = [[_fmt(z, digits) for z in row] for row in rho.matrix]
    width = max(max(len(c) for row in cells for c in row), rho.m + 2)
    head = " " * (rho.m + 3) + " ".join(f"|{lab})".rjust(width) for lab in labels)
    lines = [head]
    for lab, row in zip(labels, cells):
        lines.append(f"|{lab}) " + " ".join(c.rjust(width) for c in row))
    return "\n".join(lines)
