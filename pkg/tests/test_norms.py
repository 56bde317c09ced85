import math

import numpy as np
import pytest

from wplab.norms import (
    PolyMatrix,
    binomial_family,
    column_row_gap,
    multiplier_norm_scan,
    psi_T_phi,
    transpose_gap_experiment,
    transpose_norm_chain,
)
from wplab.operators import spectral_norm, tuple_mult_matrix
from wplab.space_core import Poly, SpaceSpec, random_poly
from wplab.weak_product import Verdict, certify_mult_factorization

HARDY = SpaceSpec.hardy()
DA2 = SpaceSpec.drury_arveson(2)
z1, z2 = Poly.variable(2, 0), Poly.variable(2, 1)


def double_sum_oracle(psi_rows, phi_rows):
    """(Psi^T Phi)_ij = sum_k phi_kj psi_ki written out with plain lists."""
    n, m = len(psi_rows[0]), len(phi_rows[0])
    out = [[Poly.zero(2) for _ in range(m)] for _ in range(n)]
    for k in range(len(psi_rows)):
        for i in range(n):
            for j in range(m):
                out[i][j] = out[i][j] + phi_rows[k][j] * psi_rows[k][i]
    return out


# -- binomial family -------------------------------------------------------


def test_binomial_family_examples():
    assert binomial_family(0) == [Poly.constant(2)]
    assert binomial_family(1) == [z2, z1]
    fam = binomial_family(2)
    assert fam[0] == z2**2 and fam[2] == z1**2
    assert fam[1].coefficient((1, 1)) == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        binomial_family(-1)


def test_binomial_family_sums_to_power_of_inner_product():
    # sum |psi_k(z)|^2 = |z|^(2n), which is why the row has norm one
    rng = np.random.default_rng(0)
    w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    for n in range(6):
        total = sum(abs(p.evaluate(w)) ** 2 for p in binomial_family(n))
        assert total == pytest.approx(np.vdot(w, w).real ** n, rel=1e-12)


def test_gap_examples():
    r1 = column_row_gap(DA2, binomial_family(1), 4)
    assert abs(r1.col_norm.value - math.sqrt(2)) <= 1e-8
    assert 0.9 < r1.row_norm.value <= 1 + 1e-9
    assert r1.expected_ratio == pytest.approx(math.sqrt(2))
    r3 = column_row_gap(DA2, binomial_family(3), 8)
    assert abs(r3.col_norm.value - 2) <= 1e-8
    for N in (0, 3, 7):
        g = column_row_gap(HARDY, [Poly.variable(1, 0)], N)
        assert g.row_norm.value == pytest.approx(1) and g.col_norm.value == pytest.approx(1)


def test_binomial_row_norm_matches_lapack():
    for n in range(1, 5):
        R = tuple_mult_matrix(DA2, binomial_family(n), "row", n + 3).entries
        assert spectral_norm(R) == pytest.approx(1, abs=1e-12)


# -- Psi^T Phi -------------------------------------------------------------


def test_psi_t_phi_examples():
    out = psi_T_phi(PolyMatrix.column([z2, z1]), PolyMatrix.column([Poly.constant(2), Poly.zero(2)]))
    assert out == PolyMatrix.of([[z2]])
    one = PolyMatrix.of([[Poly.constant(2)]])
    assert psi_T_phi(one, one) == one
    out = psi_T_phi(PolyMatrix.column([z1, z2]), PolyMatrix.column([z2, z1]))
    assert out == PolyMatrix.of([[2 * z1 * z2]])


def test_psi_t_phi_matches_double_sum():
    rng = np.random.default_rng(5)
    for k, n, m in [(1, 1, 1), (2, 3, 1), (3, 2, 4), (4, 1, 2)]:
        psi = [[random_poly(rng, 2, 2) for _ in range(n)] for _ in range(k)]
        phi = [[random_poly(rng, 2, 2) for _ in range(m)] for _ in range(k)]
        assert psi_T_phi(PolyMatrix.of(psi), PolyMatrix.of(phi)) == PolyMatrix.of(double_sum_oracle(psi, phi))


def test_psi_t_phi_shape_mismatch():
    with pytest.raises(ValueError):
        psi_T_phi(PolyMatrix.column([z1, z2]), PolyMatrix.column([z1]))


def test_polymatrix_validation():
    with pytest.raises(ValueError):
        PolyMatrix.of([[z1, z2], [z1]])
    with pytest.raises(ValueError):
        PolyMatrix.of([[z1, Poly.variable(1, 0)]])
    m = PolyMatrix.of([[z1, z2]])
    assert m.transpose() == PolyMatrix.column([z1, z2])


# -- certificates ----------------------------------------------------------


def test_certificate_trivial_consistent():
    one = Poly.constant(2)
    assert certify_mult_factorization(DA2, one, [one], [one], 3).verdict is Verdict.CONSISTENT


def test_certificate_normalized_columns_consistent():
    s = 1 / math.sqrt(2)
    cert = certify_mult_factorization(DA2, (z1**2 + z2**2) / 2, [s * z1, s * z2], [s * z1, s * z2], 4)
    assert cert.verdict is Verdict.CONSISTENT
    assert cert.identity_defect <= 1e-15
    assert cert.column_norm_phi.value == pytest.approx(1, abs=1e-9)


def test_certificate_unit_variables_are_refuted_as_columns():
    # (z1, z2) has row norm 1 but column norm sqrt(2) on H^2_2
    cert = certify_mult_factorization(DA2, z1**2 + z2**2, [z1, z2], [z1, z2], 4)
    assert cert.identity_defect == 0
    assert cert.column_norm_phi.value == pytest.approx(math.sqrt(2), abs=1e-8)
    assert cert.verdict is Verdict.REFUTED


def test_certificate_scaled_columns_refuted():
    cert = certify_mult_factorization(DA2, z1**2 + z2**2, [2 * z1, 2 * z2], [z1 / 2, z2 / 2], 4, tol=1e-6)
    assert cert.identity_defect == 0
    assert cert.verdict is Verdict.REFUTED
    assert cert.column_norm_phi.value > 1 + 1e-6


def test_certificate_identity_failure():
    cert = certify_mult_factorization(DA2, z1, [z1], [z2], 2)
    assert cert.verdict is Verdict.IDENTITY_FAILED
    assert not cert.ok


def test_certificate_length_mismatch():
    with pytest.raises(ValueError):
        certify_mult_factorization(DA2, z1, [z1, z2], [z1], 2)


def test_hardy_certificate():
    z = Poly.variable(1, 0)
    assert certify_mult_factorization(HARDY, z**2, [z], [z], 5).ok


# -- transpose gap ---------------------------------------------------------


@pytest.mark.parametrize("n,N,expected", [(1, 4, math.sqrt(2)), (3, 8, 2.0)])
def test_transpose_gap_examples(n, N, expected):
    gap = transpose_gap_experiment(DA2, n, N)
    assert abs(gap.report.col_norm.value - expected) <= 1e-8
    assert gap.certificate_ok
    assert gap.theta.rows == n + 1 and gap.theta.cols == n + 1
    # first column is the binomial family, the rest vanish
    assert [gap.theta[k, 0] for k in range(n + 1)] == binomial_family(n)
    assert all(gap.theta[k, j].is_zero() for k in range(n + 1) for j in range(1, n + 1))


def test_transpose_gap_without_gap():
    gap = transpose_gap_experiment(DA2, 0, 3)
    assert gap.report.ratio == pytest.approx(1)


def test_transpose_gap_in_three_variables():
    gap = transpose_gap_experiment(SpaceSpec.drury_arveson(3), 2, 4)
    assert abs(gap.report.col_norm.value - math.sqrt(3)) <= 1e-8
    assert gap.certificate_ok


def test_transpose_gap_needs_several_variables():
    with pytest.raises(ValueError):
        transpose_gap_experiment(HARDY, 1, 3)


def test_transpose_norm_chain():
    # Psi with rows of the binomial family: ||Psi^T||^2 = ||sum R_i^* R_i|| <= n kappa^2 ||Psi||^2
    psi = PolyMatrix.of([binomial_family(2), [z1, z2, Poly.zero(2)]])
    ch = transpose_norm_chain(DA2, psi, 5)
    assert ch.transpose_norm**2 == pytest.approx(ch.gram_sum_norm, rel=1e-9)
    assert ch.gram_sum_norm <= ch.n * max(r**2 for r in ch.row_norms) * (1 + 1e-9)
    assert max(ch.row_norms) <= ch.kappa * max(ch.column_norms) * (1 + 1e-9)
    for c in ch.column_norms:
        assert c <= ch.psi_norm * (1 + 1e-9)
    assert ch.transpose_norm <= math.sqrt(ch.n) * ch.kappa * ch.psi_norm * (1 + 1e-9)


def test_multiplier_norm_scan_monotone():
    phi = 1 + z1 * z2 - 0.3 * z2**2
    vals = [e.value for e in multiplier_norm_scan(DA2, phi, range(7))]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
