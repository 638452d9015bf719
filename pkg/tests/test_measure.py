import itertools
import math

import numpy as np
import pytest

from ppsim.fields import Kind, balanced_field, extract_rps, make_bell, make_ghz, make_product
from ppsim.gf4 import default_pps_set
from ppsim.measure import (
    CHSH_QUANTUM_BOUND,
    DEFAULT_CHSH_ANGLES,
    chsh,
    chsh_grid_search,
    correlate,
    correlation_matrix,
    correlation_sweep,
    expected_correlation,
    marginal_correlate,
    project_unit,
    projection_results,
)

TOL = 1e-9
GRID16 = np.linspace(-math.pi, math.pi, 16, endpoint=False)
SQ = 1 / math.sqrt(2)


@pytest.fixture(scope="module")
def pps2():
    return default_pps_set(2)


@pytest.fixture(scope="module")
def pps3():
    return default_pps_set(3)


# -- quantum oracle: <psi| P(t1) x ... x P(tn) |psi> on explicit state vectors ----

def P(theta):
    return np.array([[0, np.exp(1j * theta)], [np.exp(-1j * theta), 0]])


def qm_expectation(state, angles):
    op = np.ones((1, 1))
    for t in angles:
        op = np.kron(op, P(t))
    return float(np.real(np.vdot(state, op @ state)))


def ket(*pairs):
    """Sum of coefficient * |bits) for (coeff, 'bits') pairs."""
    n = len(pairs[0][1])
    v = np.zeros(2 ** n, complex)
    for c, bits in pairs:
        v[int(bits, 2)] += c
    return v


ORACLE_STATES = {
    Kind.PSI_PLUS: ket((SQ, "00"), (SQ, "11")),
    Kind.PSI_MINUS: ket((SQ, "00"), (-SQ, "11")),
    Kind.PHI_PLUS: ket((SQ, "01"), (SQ, "10")),
    Kind.PHI_MINUS: ket((SQ, "01"), (-SQ, "10")),
}


@pytest.mark.parametrize("kind", list(ORACLE_STATES))
def test_closed_forms_agree_with_quantum_oracle(kind):
    for ta, tb in itertools.product(GRID16[::3], repeat=2):
        assert expected_correlation(kind, (ta, tb)) == pytest.approx(
            qm_expectation(ORACLE_STATES[kind], (ta, tb)), abs=1e-12)


# -- projection -------------------------------------------------------------------

def test_project_unit_examples(pps2):
    f = balanced_field(pps2, 4)
    assert project_unit(f, 0, 0.0) == pytest.approx(1, abs=1e-12)
    assert project_unit(f, 3, math.pi / 2) == pytest.approx(0, abs=1e-12)


def test_project_unit_gamma_pi_gives_minus_one(pps2):
    ens = make_bell(pps2, 0, 2, "psi+")
    gamma = extract_rps(ens[0]).quarters
    k = int(np.flatnonzero(gamma == 2)[0])
    assert project_unit(ens[0], k, 0.0) == pytest.approx(-1, abs=1e-12)


def test_projection_law(pps2):
    for ens in (make_bell(pps2, 1, 2, "psi+"), make_ghz(pps2, (0, 1, 2))):
        for f in ens:
            gamma = extract_rps(f).phases
            for theta in np.linspace(0, 2 * math.pi, 32, endpoint=False):
                expected = np.cos(theta + gamma)
                assert np.max(np.abs(projection_results(f, theta) - expected)) < 1e-12
                assert project_unit(f, 5, theta) == pytest.approx(expected[5], abs=1e-12)


def test_projection_errors(pps2):
    f = balanced_field(pps2, 1)
    with pytest.raises(IndexError):
        project_unit(f, 16, 0.0)
    with pytest.raises(ValueError):
        project_unit(f, 0, math.inf)


# -- correlate ----------------------------------------------------------------------

def test_correlate_examples(pps2):
    assert correlate(make_bell(pps2, 0, 1), (math.pi / 6, math.pi / 3)).value == pytest.approx(0, abs=TOL)
    ghz = make_ghz(pps2, (0, 1, 2))
    assert correlate(ghz, (0.3, -0.1, -0.2)).value == pytest.approx(1, abs=TOL)
    assert correlate(ghz, (math.pi, 0, 0)).value == pytest.approx(-1, abs=TOL)
    assert correlate(make_product(pps2), (0, 0)).value == pytest.approx(1, abs=TOL)


def test_product_normalization_is_one(pps2):
    r = correlate(make_product(pps2, (0, 1, 2)), (0.1, 0.2, 0.3))
    assert r.C == 1.0
    assert r.value == pytest.approx(math.cos(0.1) * math.cos(0.2) * math.cos(0.3), abs=TOL)


def test_correlate_normalization(pps2):
    r = correlate(make_ghz(pps2, (0, 1, 2)), (0, 0, 0), keep_per_unit=True)
    assert r.C == 0.25 and r.n == 3 and r.N == 16
    assert r.per_unit.shape == (16,)
    assert r.value == pytest.approx(r.per_unit.sum() / (16 * 0.25))


@pytest.mark.parametrize("kind", ["product", "psi+", "psi-", "phi+", "phi-"])
def test_two_party_grid(pps2, kind):
    ens = make_product(pps2, (0, 1)) if kind == "product" else make_bell(pps2, 0, 1, kind)
    for ta, tb in itertools.product(GRID16, repeat=2):
        assert abs(correlate(ens, (ta, tb)).value - expected_correlation(kind, (ta, tb))) < TOL


@pytest.mark.parametrize("s, n", [(2, 3), (2, 5), (3, 4), (3, 7)])
def test_ghz_random_angles(s, n):
    ens = make_ghz(default_pps_set(s), range(n))
    rng = np.random.default_rng(n)
    for angles in rng.uniform(-math.pi, math.pi, (100, n)):
        assert abs(correlate(ens, angles).value - math.cos(angles.sum())) < TOL


def test_pps_invisible_for_product(pps2):
    ref = make_product(pps2, (0, 1))
    rng = np.random.default_rng(1)
    for idx in [(2, 3), (5, 11), (15, 4), (1, 6)]:
        other = make_product(pps2, idx)
        for angles in rng.uniform(-3, 3, (20, 2)):
            assert correlate(other, angles).value == pytest.approx(correlate(ref, angles).value, abs=1e-12)


def test_boundedness(pps2):
    rng = np.random.default_rng(7)
    for ens in (make_bell(pps2, 0, 1, "phi-"), make_ghz(pps2, (0, 1, 2)), make_product(pps2, (3, 4, 5))):
        for angles in rng.uniform(-10, 10, (300, ens.n)):
            assert abs(correlate(ens, angles).value) <= 1 + TOL


def test_permutation_symmetry(pps2):
    ens = make_ghz(pps2, (0, 1, 2))
    rng = np.random.default_rng(3)
    from ppsim.fields import FieldEnsemble
    for perm in itertools.permutations(range(3)):
        permuted = FieldEnsemble(pps2, tuple(ens[i] for i in perm), ens.kind)
        for angles in rng.uniform(-3, 3, (10, 3)):
            a = correlate(ens, angles).value
            b = correlate(permuted, [angles[i] for i in perm]).value
            assert a == pytest.approx(b, abs=1e-12)


def test_arity_mismatch(pps2):
    with pytest.raises(ValueError):
        correlate(make_bell(pps2, 0, 1), (0.0,))


# -- marginals ------------------------------------------------------------------------

def test_ghz3_marginals_vanish_s2(pps2):
    ens = make_ghz(pps2, (0, 1, 2))
    for pair in itertools.combinations(range(3), 2):
        for ta, tb in itertools.product(GRID16, repeat=2):
            assert abs(marginal_correlate(ens, pair, (ta, tb)).value) < TOL


def test_ghz4_marginals_vanish_s3(pps3):
    ens = make_ghz(pps3, range(4))
    for pair in itertools.combinations(range(4), 2):
        for ta, tb in itertools.product(GRID16[::2], repeat=2):
            assert abs(marginal_correlate(ens, pair, (ta, tb)).value) < TOL


def test_ghz4_marginals_at_s2_split_by_adjacency(pps2):
    # adjacent parties cancel; the opposite pairs (0, 2), (1, 3) do not at s=2
    ens = make_ghz(pps2, range(4))
    for pair in itertools.combinations(range(4), 2):
        worst = max(abs(marginal_correlate(ens, pair, (ta, tb)).value)
                    for ta, tb in itertools.product(GRID16, repeat=2))
        if pair in ((0, 2), (1, 3)):
            assert worst > 0.5
        else:
            assert worst < TOL


def _marginals_all_null(labels):
    """Direct Z4 check: every +-gamma_i +-gamma_j phase sum vanishes."""
    n = len(labels)
    g = [(labels[(i + 1) % n] - labels[i]) % 4 for i in range(n)]
    for i, j in itertools.combinations(range(n), 2):
        for sign in (1, -1):
            if abs(np.exp(1j * np.pi / 2 * ((g[i] + sign * g[j]) % 4)).sum()) > TOL:
                return False
    return True


def test_no_index_choice_nulls_ghz4_marginals_at_s2(pps2):
    """Exhaustive: at s=2 some 2-party GHZ-4 marginal is always nonzero."""
    seqs = pps2.sequences.astype(int)
    found = [idx for idx in itertools.permutations(range(16), 4)
             if idx[0] == min(idx) and _marginals_all_null([seqs[i] for i in idx])]
    assert found == []
    ens = make_ghz(pps2, range(4))
    worst = max(abs(marginal_correlate(ens, pair, (ta, tb)).value)
                for pair in itertools.combinations(range(4), 2)
                for ta, tb in itertools.product(GRID16[::4], repeat=2))
    assert worst > 0.1


def test_marginal_errors(pps2):
    with pytest.raises(ValueError):
        marginal_correlate(make_bell(pps2, 0, 1), (0, 1), (0, 0))
    ghz = make_ghz(pps2, (0, 1, 2))
    with pytest.raises(ValueError):
        marginal_correlate(ghz, (0, 1, 2), (0, 0, 0))
    with pytest.raises(ValueError):
        marginal_correlate(ghz, (1, 1), (0, 0))


def test_bell_pair_not_nulled(pps2):
    ens = make_bell(pps2, 0, 1)
    assert correlate(ens, (0.2, 0.3)).value == pytest.approx(math.cos(0.5), abs=TOL)


# -- CHSH ---------------------------------------------------------------------------------

def test_chsh_psi_plus_reaches_quantum_bound(pps2):
    B = chsh(make_bell(pps2, 0, 1), math.pi / 4, -math.pi / 4, 0, math.pi / 2)
    assert B == pytest.approx(2 * math.sqrt(2), abs=TOL)


@pytest.mark.parametrize("kind", [Kind.PSI_PLUS, Kind.PSI_MINUS, Kind.PHI_PLUS, Kind.PHI_MINUS])
def test_chsh_default_angles_reach_bound(pps2, kind):
    B = chsh(make_bell(pps2, 0, 1, kind), *DEFAULT_CHSH_ANGLES[kind])
    assert B == pytest.approx(CHSH_QUANTUM_BOUND, abs=TOL)


def test_default_angles_are_grid_maxima():
    """Closed-form grid search oracle: each variant's angle set attains the max on a pi/12 grid."""
    grid = [i * math.pi / 12 for i in range(-12, 12)]
    for kind in (Kind.PSI_PLUS, Kind.PHI_PLUS, Kind.PHI_MINUS):
        E = {(a, b): expected_correlation(kind, (a, b)) for a in grid for b in grid}
        best = max(abs(E[a, b] - E[a, b2] + E[a2, b2] + E[a2, b])
                   for a, a2, b, b2 in itertools.product(grid[::3], repeat=4))
        ta, ta2, tb, tb2 = DEFAULT_CHSH_ANGLES[kind]
        f = lambda x, y: expected_correlation(kind, (x, y))
        at_default = abs(f(ta, tb) - f(ta, tb2) + f(ta2, tb2) + f(ta2, tb))
        assert best == pytest.approx(2 * math.sqrt(2), abs=1e-12)
        assert at_default == pytest.approx(best, abs=1e-12)


def test_chsh_product_below_classical_bound(pps2):
    ens = make_product(pps2)
    assert chsh(ens, math.pi / 4, -math.pi / 4, 0, math.pi / 2) <= 2 + TOL
    rng = np.random.default_rng(11)
    for q in rng.uniform(-math.pi, math.pi, (500, 4)):
        assert chsh(ens, *q) <= 2 + TOL


def test_chsh_bell_never_above_tsirelson(pps2):
    ens = make_bell(pps2, 0, 1, "psi-")
    rng = np.random.default_rng(12)
    for q in rng.uniform(-math.pi, math.pi, (500, 4)):
        assert chsh(ens, *q) <= CHSH_QUANTUM_BOUND + TOL


def test_chsh_grid_search(pps2):
    B, angles = chsh_grid_search(make_bell(pps2, 0, 1, "phi-"), points=8)
    assert B == pytest.approx(CHSH_QUANTUM_BOUND, abs=TOL)
    assert len(angles) == 4
    B, _ = chsh_grid_search(make_product(pps2), points=8)
    assert B <= 2 + TOL


def test_correlation_matrix_matches_correlate(pps2):
    ens = make_bell(pps2, 0, 1, "phi+")
    E = correlation_matrix(ens, GRID16[:4], GRID16[4:8])
    for i, a in enumerate(GRID16[:4]):
        for j, b in enumerate(GRID16[4:8]):
            assert E[i, j] == pytest.approx(correlate(ens, (a, b)).value, abs=1e-12)


def test_chsh_wrong_arity(pps2):
    with pytest.raises(ValueError):
        chsh(make_ghz(pps2, (0, 1, 2)), 0, 0, 0, 0)


# -- sweeps -------------------------------------------------------------------------------

def test_sweep_ghz(pps2):
    grid = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    out = correlation_sweep(make_ghz(pps2, (0, 1, 2)), (0, 0, 0), 0, grid)
    assert [t for t, _ in out] == pytest.approx(list(grid))
    assert [e for _, e in out] == pytest.approx(list(np.cos(grid)), abs=TOL)


def test_sweep_psi_minus(pps2):
    grid = np.linspace(0, 2 * math.pi, 12, endpoint=False)
    out = correlation_sweep(make_bell(pps2, 0, 1, "psi-"), (0, 0.4), 0, grid)
    assert [e for _, e in out] == pytest.approx(list(-np.cos(grid + 0.4)), abs=TOL)


def test_sweep_single_point_matches_correlate(pps2):
    ens = make_bell(pps2, 0, 1)
    ((t, e),) = correlation_sweep(ens, (0, 0.7), 0, [0.3])
    assert e == correlate(ens, (0.3, 0.7)).value


def test_sweep_errors(pps2):
    ens = make_bell(pps2, 0, 1)
    with pytest.raises(IndexError):
        correlation_sweep(ens, (0, 0), 2, [0.0])
    with pytest.raises(ValueError):
        correlation_sweep(ens, (0, 0), 0, [])
