"""Projection measurement and correlation analysis over sequence units.

Every correlation here is the literal sum over the N sequence units. The
closed forms in :func:`expected_correlation` exist for reporting only and are
never used to produce a measured value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .fields import ClassicalField, FieldEnsemble, Kind

REAL_TOL = 1e-12
CHSH_QUANTUM_BOUND = 2 * math.sqrt(2)
CHSH_CLASSICAL_BOUND = 2.0

# (theta_a, theta_a', theta_b, theta_b') reaching |B| = 2 sqrt 2 for each kind
DEFAULT_CHSH_ANGLES = {
    Kind.PSI_PLUS: (math.pi / 4, -math.pi / 4, 0.0, math.pi / 2),
    Kind.PSI_MINUS: (math.pi / 4, -math.pi / 4, 0.0, math.pi / 2),
    Kind.PHI_PLUS: (math.pi / 4, -math.pi / 4, 0.0, -math.pi / 2),
    Kind.PHI_MINUS: (math.pi / 4, -math.pi / 4, math.pi, math.pi / 2),
    Kind.PRODUCT: (math.pi / 4, -math.pi / 4, 0.0, math.pi / 2),
}


@dataclass(frozen=True)
class CorrelationResult:
    value: float
    n: int
    C: float
    N: int
    angles: tuple
    per_unit: np.ndarray | None = None

    def __float__(self):
        return self.value

    def to_dict(self, kind=None) -> dict:
        d = {"kind": kind, "angles": list(self.angles), "E": self.value, "C": self.C, "N": self.N}
        if kind is None:
            del d["kind"]
        return d


def _check_angle(theta):
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"projection angle must be finite, got {theta}")
    return theta


def projection_results(f: ClassicalField, theta: float) -> np.ndarray:
    """Per-unit (psi|P(theta)|psi) for all k at once.

    P(theta) = [[0, e^{i theta}], [e^{-i theta}, 0]], so the expectation is
    c1 c0* e^{i theta} + c.c., real by construction.
    """
    theta = _check_angle(theta)
    z = f.c1 * f.c0.conj() * np.exp(1j * theta)
    val = z + z.conj()
    residue = float(np.max(np.abs(val.imag))) if val.size else 0.0
    if residue > REAL_TOL:
        raise ArithmeticError(f"projection result not real: imaginary residue {residue:.3g}")
    return val.real


def project_unit(f: ClassicalField, k: int, theta: float) -> float:
    if not 0 <= k < f.N:
        raise IndexError(f"unit index {k} out of range 0..{f.N - 1}")
    theta = _check_angle(theta)
    z = f.c1[k] * np.conj(f.c0[k]) * np.exp(1j * theta)
    val = z + np.conj(z)
    if abs(val.imag) > REAL_TOL:
        raise ArithmeticError(f"projection result not real: imaginary residue {abs(val.imag):.3g}")
    return float(val.real)


def normalization(kind, n: int) -> float:
    """C = 1/2^(n-1) for mode-exchanged ensembles; 1 for un-exchanged products.

    Exchange leaves half of each unit's product term in the oscillating
    cos(sum theta) part; a product ensemble has no such split.
    """
    return 1.0 if Kind.parse(kind) is Kind.PRODUCT else 1.0 / 2 ** (n - 1)


def _correlate_fields(fields, angles, N, C, keep_per_unit) -> CorrelationResult:
    angles = tuple(_check_angle(t) for t in angles)
    if len(angles) != len(fields):
        raise ValueError(f"{len(fields)} fields but {len(angles)} angles")
    n = len(fields)
    prod = np.ones(N)
    for f, theta in zip(fields, angles):
        prod = prod * projection_results(f, theta)
    value = float(np.sum(prod) / (N * C))
    return CorrelationResult(value, n, C, N, angles, prod if keep_per_unit else None)


def correlate(ens: FieldEnsemble, angles, keep_per_unit=False) -> CorrelationResult:
    """E = (1 / (N C)) sum_k prod_i P(theta_i, k), C from :func:`normalization`."""
    return _correlate_fields(ens.fields, angles, ens.N, normalization(ens.kind, ens.n), keep_per_unit)


def marginal_correlate(ens: FieldEnsemble, parties, angles) -> CorrelationResult:
    """Two-party correlation over a subset of a GHZ ensemble (C = 1/2)."""
    if ens.kind is not Kind.GHZ:
        raise ValueError(f"marginal correlation is defined for GHZ ensembles, got {ens.kind.value}")
    parties = tuple(parties)
    if len(parties) != 2 or parties[0] == parties[1]:
        raise ValueError(f"marginal needs exactly 2 distinct parties, got {parties}")
    for p in parties:
        if not 0 <= p < ens.n:
            raise IndexError(f"party {p} out of range 0..{ens.n - 1}")
    return _correlate_fields([ens[p] for p in parties], angles, ens.N, 0.5, False)


def max_marginal(ens: FieldEnsemble, angle_grid) -> float:
    """Largest |E| over every 2-party marginal and every angle pair in the grid."""
    worst = 0.0
    for pair in combinations(range(ens.n), 2):
        for ta in angle_grid:
            for tb in angle_grid:
                worst = max(worst, abs(marginal_correlate(ens, pair, (ta, tb)).value))
    return worst


def _require_pair(ens):
    if ens.n != 2:
        raise ValueError(f"CHSH needs a 2-party ensemble, got n={ens.n}")


def chsh_terms(ens: FieldEnsemble, ta, ta2, tb, tb2):
    """The four correlations E(a,b), E(a,b'), E(a',b'), E(a',b)."""
    _require_pair(ens)
    return tuple(
        correlate(ens, pair).value for pair in ((ta, tb), (ta, tb2), (ta2, tb2), (ta2, tb))
    )


def chsh(ens: FieldEnsemble, ta, ta2, tb, tb2) -> float:
    """|B| = |E(a,b) - E(a,b') + E(a',b') + E(a',b)|."""
    e1, e2, e3, e4 = chsh_terms(ens, ta, ta2, tb, tb2)
    return abs(e1 - e2 + e3 + e4)


def correlation_matrix(ens: FieldEnsemble, grid_a, grid_b) -> np.ndarray:
    """E(theta_a, theta_b) on a grid for a 2-party ensemble, same sum as correlate."""
    _require_pair(ens)
    pa = np.stack([projection_results(ens[0], t) for t in grid_a])
    pb = np.stack([projection_results(ens[1], t) for t in grid_b])
    return pa @ pb.T / (ens.N * normalization(ens.kind, 2))


def chsh_grid_search(ens: FieldEnsemble, points: int = 24):
    """Maximum |B| over a uniform angle grid on [0, 2pi); returns (|B|, angles)."""
    grid = np.arange(points) * (2 * np.pi / points)
    E = correlation_matrix(ens, grid, grid)
    # B[a, a2, b, b2]
    B = (E[:, None, :, None] - E[:, None, None, :]
         + E[None, :, None, :] + E[None, :, :, None])
    idx = np.unravel_index(np.argmax(np.abs(B)), B.shape)
    return float(np.abs(B[idx])), tuple(float(grid[i]) for i in idx)


def correlation_sweep(ens: FieldEnsemble, angles, party: int, grid):
    """Vary one party's angle over ``grid`` with the others held at ``angles``."""
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    if not 0 <= party < ens.n:
        raise IndexError(f"party {party} out of range 0..{ens.n - 1}")
    angles = list(angles)
    if len(angles) != ens.n:
        raise ValueError(f"{ens.n} fields but {len(angles)} angles")
    out = []
    for theta in grid:
        angles[party] = theta
        out.append((float(theta), correlate(ens, angles).value))
    return out


def expected_correlation(kind, angles) -> float:
    """Closed-form correlation each construction is meant to reproduce."""
    kind = Kind.parse(kind)
    angles = [float(t) for t in angles]
    if kind is Kind.PRODUCT:
        return math.prod(math.cos(t) for t in angles)
    if kind is Kind.GHZ:
        return math.cos(sum(angles))
    ta, tb = angles
    return {
        Kind.PSI_PLUS: math.cos(ta + tb),
        Kind.PSI_MINUS: -math.cos(ta + tb),
        Kind.PHI_PLUS: math.cos(ta - tb),
        Kind.PHI_MINUS: -math.cos(ta - tb),
    }[kind]
