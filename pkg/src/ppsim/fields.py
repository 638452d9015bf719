"""PPS-modulated classical fields and the mode-exchange constructions.

A field is stored unit by unit: ``units[k] = (c0_k, c1_k)`` are the
amplitudes of modes |0) and |1) at sequence unit k. This form is closed under
mode exchange and sigma_x, which the factored (alpha, beta, PPS) form is not.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .gf4 import PpsSet, build_pps_set, phase_of, phasor

NORM_TOL = 1e-12
SNAP_TOL = 1e-9
_INV_SQRT2 = 1 / np.sqrt(2)


class Kind(enum.Enum):
    PRODUCT = "product"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    GHZ = "ghz"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown ensemble kind {text!r}") from None

    @property
    def is_bell(self):
        return self in BELL_VARIANTS


_ALIASES = {
    "ψ⁺": "psi+", "psi_plus": "psi+",
    "ψ⁻": "psi-", "psi_minus": "psi-",
    "φ⁺": "phi+", "phi_plus": "phi+",
    "φ⁻": "phi-", "phi_minus": "phi-",
}

BELL_VARIANTS = (Kind.PSI_PLUS, Kind.PSI_MINUS, Kind.PHI_PLUS, Kind.PHI_MINUS)


@dataclass(frozen=True, eq=False)
class ClassicalField:
    pps_index: int
    units: np.ndarray  # (N, 2) complex, read-only

    def __post_init__(self):
        units = np.array(self.units, dtype=complex)
        if units.ndim != 2 or units.shape[1] != 2:
            raise ValueError(f"field units must have shape (N, 2), got {units.shape}")
        units.setflags(write=False)
        object.__setattr__(self, "units", units)

    @property
    def N(self) -> int:
        return self.units.shape[0]

    @property
    def c0(self) -> np.ndarray:
        return self.units[:, 0]

    @property
    def c1(self) -> np.ndarray:
        return self.units[:, 1]

    def with_units(self, c0, c1) -> ClassicalField:
        return ClassicalField(self.pps_index, np.stack([c0, c1], axis=1))

    def unit_norms(self) -> np.ndarray:
        return np.sum(np.abs(self.units) ** 2, axis=1)

    def __eq__(self, other):
        if not isinstance(other, ClassicalField):
            return NotImplemented
        return self.pps_index == other.pps_index and np.array_equal(self.units, other.units)

    __hash__ = None


@dataclass(frozen=True)
class RelativePhaseSequence:
    """Per-unit phase of |1) relative to |0), as exact quarter turns."""

    quarters: np.ndarray  # int labels 0..3, phase = quarters * pi/2

    @property
    def phases(self) -> np.ndarray:
        return phase_of(self.quarters)

    @property
    def N(self) -> int:
        return len(self.quarters)

    def phase_sum(self) -> complex:
        """sum_k exp(i gamma_k); zero for an RPS built from two distinct PPSs."""
        return complex(phasor(self.quarters).sum())


def prepare_field(pps: PpsSet, index: int, alpha: complex, beta: complex) -> ClassicalField:
    """exp(i lambda^(index)) (alpha|0) + beta|1)), materialized unit by unit."""
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1) > NORM_TOL:
        raise ValueError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
    z = phasor(pps[index])
    return ClassicalField(pps.check_index(index), np.stack([alpha * z, beta * z], axis=1))


def balanced_field(pps: PpsSet, index: int) -> ClassicalField:
    return prepare_field(pps, index, _INV_SQRT2, _INV_SQRT2)


def _same_length(a: ClassicalField, b: ClassicalField):
    if a.N != b.N:
        raise ValueError(f"field length mismatch: {a.N} vs {b.N}")


def field_inner_product(a: ClassicalField, b: ClassicalField) -> complex:
    _same_length(a, b)
    return complex(np.sum(a.units.conj() * b.units) / a.N)


def mode_exchange_pair(a: ClassicalField, b: ClassicalField):
    """Swap the |1) components of two fields. An involution."""
    _same_length(a, b)
    if a.pps_index == b.pps_index:
        raise ValueError("mode exchange needs fields on distinct PPSs")
    return a.with_units(a.c0, b.c1), b.with_units(b.c0, a.c1)


def apply_sigma_x(f: ClassicalField) -> ClassicalField:
    return f.with_units(f.c1, f.c0)


def add_pi_to_mode1(f: ClassicalField) -> ClassicalField:
    return f.with_units(f.c0, -f.c1)


def extract_rps(f: ClassicalField) -> RelativePhaseSequence:
    """gamma_k = arg(c1_k) - arg(c0_k), snapped to a quarter turn.

    Raises if a mode amplitude vanishes or a phase sits farther than 1e-9
    from a multiple of pi/2; both mean the field was not built by the
    constructions here.
    """
    c0, c1 = f.c0, f.c1
    if np.any(np.abs(c0) < SNAP_TOL) or np.any(np.abs(c1) < SNAP_TOL):
        raise ValueError("relative phase undefined: a unit has an empty mode")
    gamma = np.angle(c1 * c0.conj())
    q = gamma / (np.pi / 2)
    snapped = np.rint(q)
    defect = float(np.max(np.abs(q - snapped)) * (np.pi / 2))
    if defect > SNAP_TOL:
        raise ValueError(f"relative phase off the pi/2 lattice by {defect:.3g} rad")
    return RelativePhaseSequence(snapped.astype(np.int8) % 4)


@dataclass(frozen=True, eq=False)
class FieldEnsemble:
    """n fields sharing one PPS set; the simulation of an n-particle state."""

    pps: PpsSet
    fields: tuple
    kind: Kind

    def __post_init__(self):
        fields = tuple(self.fields)
        object.__setattr__(self, "fields", fields)
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if not fields:
            raise ValueError("ensemble needs at least one field")
        if len(fields) > len(self.pps):
            raise ValueError(
                f"{len(fields)} fields requested but only {len(self.pps)} sequences exist"
            )
        indices = [f.pps_index for f in fields]
        if len(set(indices)) != len(indices):
            raise ValueError(f"duplicate PPS indices in ensemble: {indices}")
        for f in fields:
            if f.N != self.pps.N:
                raise ValueError(f"field length {f.N} != sequence length {self.pps.N}")

    @property
    def n(self) -> int:
        return len(self.fields)

    @property
    def N(self) -> int:
        return self.pps.N

    @property
    def indices(self) -> tuple:
        return tuple(f.pps_index for f in self.fields)

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    def __getitem__(self, i) -> ClassicalField:
        return self.fields[i]

    def exchanged(self, i: int, j: int) -> FieldEnsemble:
        """Exchange |1) modes of fields i and j; every other field is untouched."""
        fields = list(self.fields)
        fields[i], fields[j] = mode_exchange_pair(fields[i], fields[j])
        return FieldEnsemble(self.pps, tuple(fields), self.kind)

    def rps(self) -> list:
        return [extract_rps(f) for f in self.fields]


def _distinct(indices):
    indices = [int(i) for i in indices]
    if len(set(indices)) != len(indices):
        raise ValueError(f"PPS indices must be pairwise distinct, got {indices}")
    return indices


def default_indices(n: int) -> tuple:
    """PPS indices 0..n-1: the all-zero sequence plus consecutive shifts.

    Consecutive shift offsets stay clear of the (N-1)/3 decimation offset at
    which two shifted GF(4) m-sequences differ by a constant factor and stop
    being orthogonal after phase mapping.
    """
    return tuple(range(n))


def make_product(pps: PpsSet, indices=(0, 1)) -> FieldEnsemble:
    """Un-exchanged balanced fields: the product-state simulation."""
    fields = tuple(balanced_field(pps, i) for i in _distinct(indices))
    return FieldEnsemble(pps, fields, Kind.PRODUCT)


def make_bell(pps: PpsSet, ia: int = 0, ib: int = 1, variant="psi+") -> FieldEnsemble:
    variant = Kind.parse(variant)
    if not variant.is_bell:
        raise ValueError(f"{variant.value} is not a Bell variant")
    if ia == ib:
        raise ValueError("Bell pair needs two distinct PPS indices")
    a, b = mode_exchange_pair(balanced_field(pps, ia), balanced_field(pps, ib))
    if variant in (Kind.PSI_MINUS, Kind.PHI_MINUS):
        b = add_pi_to_mode1(b)
    if variant in (Kind.PHI_PLUS, Kind.PHI_MINUS):
        b = apply_sigma_x(b)
    return FieldEnsemble(pps, (a, b), variant)


def cyclic_exchange(fields):
    """Field i receives the |1) component of field i+1 (indices mod n)."""
    fields = list(fields)
    n = len(fields)
    return tuple(fields[i].with_units(fields[i].c0, fields[(i + 1) % n].c1) for i in range(n))


def make_ghz(pps: PpsSet, indices) -> FieldEnsemble:
    indices = _distinct(indices)
    if len(indices) < 3:
        raise ValueError("GHZ simulation needs at least 3 fields")
    if len(indices) > len(pps):
        raise ValueError(f"n={len(indices)} exceeds the {len(pps)} available sequences")
    fields = cyclic_exchange(balanced_field(pps, i) for i in indices)
    return FieldEnsemble(pps, fields, Kind.GHZ)


def make_ensemble(pps: PpsSet, kind, n=None, indices=None) -> FieldEnsemble:
    """Build any supported ensemble with default indices unless given."""
    kind = Kind.parse(kind)
    if indices is None:
        if n is None:
            n = 3 if kind is Kind.GHZ else 2
        if n > len(pps):
            raise ValueError(f"n={n} exceeds the {len(pps)} available sequences")
        indices = default_indices(n)
    if kind is Kind.PRODUCT:
        return make_product(pps, indices)
    if kind is Kind.GHZ:
        return make_ghz(pps, indices)
    if len(indices) != 2:
        raise ValueError("Bell ensembles have exactly 2 fields")
    return make_bell(pps, indices[0], indices[1], kind)


def rps_zero_sum_defect(ens: FieldEnsemble) -> int:
    """Number of units where the RPSs of the ensemble do not sum to 0 mod 2pi."""
    total = sum(r.quarters.astype(np.int16) for r in ens.rps()) % 4
    return int(np.count_nonzero(total))


def ensemble_to_dict(ens: FieldEnsemble) -> dict:
    return {
        "kind": ens.kind.value,
        "pps": {"s": ens.pps.s, "polynomial": list(ens.pps.poly.coeffs)},
        "indices": list(ens.indices),
        "fields": [
            np.stack([f.c0.real, f.c0.imag, f.c1.real, f.c1.imag], axis=1).tolist()
            for f in ens.fields
        ],
    }


def ensemble_to_json(ens: FieldEnsemble) -> str:
    return json.dumps(ensemble_to_dict(ens)) + "\n"


def ensemble_from_dict(d: dict) -> FieldEnsemble:
    pps = build_pps_set(d["pps"]["polynomial"])
    if d["pps"].get("s", pps.s) != pps.s:
        raise ValueError("ensemble document: s inconsistent with polynomial")
    fields = []
    for idx, units in zip(d["indices"], d["fields"]):
        u = np.asarray(units, dtype=float)
        if u.ndim != 2 or u.shape[1] != 4:
            raise ValueError("ensemble document: each unit must be [re0, im0, re1, im1]")
        fields.append(ClassicalField(int(idx), np.stack([u[:, 0] + 1j * u[:, 1],
                                                         u[:, 2] + 1j * u[:, 3]], axis=1)))
    if len(fields) != len(d["fields"]):
        raise ValueError("ensemble document: indices and fields differ in length")
    return FieldEnsemble(pps, tuple(fields), Kind.parse(d["kind"]))


def ensemble_from_json(text: str) -> FieldEnsemble:
    return ensemble_from_dict(json.loads(text))
