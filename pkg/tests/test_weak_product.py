import math

import numpy as np
import pytest

from wplab.operators import hankel_matrix, mult_matrix, spectral_norm
from wplab.space_core import Poly, SpaceSpec, norm, random_poly
from wplab.weak_product import (
    ALSOptions,
    InfeasibleFactorization,
    SearchOptions,
    factorization_of,
    hardy_h1_quadrature,
    pairing,
    wp_bracket,
    wp_lower_bound,
    wp_upper_bound,
)

HARDY = SpaceSpec.hardy()
DA2 = SpaceSpec.drury_arveson(2)
DIRICHLET = SpaceSpec.dirichlet()
z = Poly.variable(1, 0)
z1, z2 = Poly.variable(2, 0), Poly.variable(2, 1)


def test_pairing_examples():
    assert pairing(HARDY, (1 + z) ** 2, z**2) == pytest.approx(1)
    for sp in (HARDY, DA2, DIRICHLET):
        one = Poly.constant(sp.d)
        assert pairing(sp, one, one) == pytest.approx(1)
    assert pairing(HARDY, z, z**3) == 0


# -- lower bound -----------------------------------------------------------


def test_lower_bound_monomial():
    lb = wp_lower_bound(HARDY, z**2, 2)
    assert lb.value == pytest.approx(1, abs=1e-12)
    assert lb.hankel_norm == pytest.approx(1, abs=1e-12)
    assert abs(lb.pairing) == pytest.approx(1, abs=1e-12)
    # the winning symbol only carries the z^2 coefficient
    assert set(lb.witness.terms) == {(2,)}


def test_lower_bound_zero():
    lb = wp_lower_bound(HARDY, Poly.zero(1), 3)
    assert lb.value == 0 and lb.witness is None


def test_lower_bound_hardy_square():
    lb = wp_lower_bound(HARDY, (1 + z) ** 2, 4)
    assert lb.value >= 1.5
    assert lb.value <= 2 + 1e-9


def test_lower_bound_is_certified_by_its_witness():
    h = 1 + 2 * z1 * z2 - 1j * z2**2
    lb = wp_lower_bound(DA2, h, 2, SearchOptions(restarts=1, max_evals=400))
    H = hankel_matrix(DA2, lb.witness, 2, 2).entries
    assert lb.value == pytest.approx(abs(pairing(DA2, h, lb.witness)) / spectral_norm(H), rel=1e-9)


def test_lower_bound_is_seeded():
    h = 1 + z + 0.5 * z**3
    a = wp_lower_bound(HARDY, h, 3, SearchOptions(seed=3, restarts=2, max_evals=500))
    b = wp_lower_bound(HARDY, h, 3, SearchOptions(seed=3, restarts=2, max_evals=500))
    assert a == b


# -- upper bound -----------------------------------------------------------


def test_upper_bound_hardy_square():
    ub = wp_upper_bound(HARDY, (1 + z) ** 2, 1, 1)
    assert ub.value == pytest.approx(2, abs=1e-8)
    (f, g), = ub.factorization.pairs
    # the pair is (1+z, 1+z) up to a scalar
    assert norm(HARDY, f) == pytest.approx(norm(HARDY, g), rel=1e-6)
    assert ub.factorization.defect <= 1e-9


def test_upper_bound_monomial_split():
    ub = wp_upper_bound(HARDY, z**4, 1, 2)
    assert ub.value == pytest.approx(1, abs=1e-8)


def test_upper_bound_seeded_pair_cannot_get_worse():
    f, g = 1 + z1 - 0.5j * z2, z2 + 2 * z1 * z2
    h = f * g
    ub = wp_upper_bound(DA2, h, 1, 2, ALSOptions(seed_pairs=[(f, g)], restarts=0))
    assert ub.value <= norm(DA2, f) * norm(DA2, g) + 1e-12
    assert ub.factorization.defect <= 1e-9


def test_upper_bound_history_is_monotone():
    rng = np.random.default_rng(12)
    for _ in range(5):
        h = random_poly(rng, 2, 3)
        ub = wp_upper_bound(DA2, h, 2, 3, ALSOptions(restarts=1, max_iter=100))
        hist = ub.history
        assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(hist, hist[1:]))


def test_upper_bound_zero_and_infeasible():
    assert wp_upper_bound(HARDY, Poly.zero(1), 1, 1).value == 0
    with pytest.raises(InfeasibleFactorization):
        wp_upper_bound(HARDY, z**5, 1, 2)
    with pytest.raises(ValueError):
        wp_upper_bound(HARDY, z, 0, 1)


def test_upper_bound_dirichlet_beats_trivial_split():
    h = 1 + z + z**2 / 3
    ub = wp_upper_bound(DIRICHLET, h, 2, 2)
    assert ub.factorization.defect <= 1e-9
    assert ub.value <= norm(DIRICHLET, h) + 1e-12


def test_factorization_of_reports_cost_and_defect():
    fact = factorization_of(HARDY, (1 + z) ** 2, [(1 + z, 1 + z)])
    assert fact.cost == pytest.approx(2)
    assert fact.defect == 0
    bad = factorization_of(HARDY, z, [(z, z)])
    assert bad.defect == pytest.approx(math.sqrt(2))


def test_multiplier_contracts_weak_product_norm():
    # ||theta h|| <= ||T_theta|| ||h|| via the factorization (theta f_i, g_i)
    h = 1 + z1 * z2 + 0.5 * z2
    theta = 0.5 * (z1 + z2)
    up = wp_upper_bound(DA2, h, 2, 1)
    D = 1
    t_norm = spectral_norm(mult_matrix(DA2, theta, D).entries)
    seeds = [(theta * f, g) for f, g in up.factorization.pairs]
    seeded = wp_upper_bound(DA2, theta * h, len(seeds), D + 1, ALSOptions(seed_pairs=seeds, restarts=0))
    assert seeded.factorization.defect <= 1e-9
    assert seeded.value <= t_norm * up.value + 1e-9


# -- bracket and H^1 -------------------------------------------------------


def test_quadrature_examples():
    assert hardy_h1_quadrature(Poly.constant(1)) == pytest.approx(1, abs=1e-12)
    assert hardy_h1_quadrature((1 + z) ** 2) == pytest.approx(2, abs=1e-9)
    assert hardy_h1_quadrature(z**7) == pytest.approx(1, abs=1e-12)


def test_quadrature_closed_form_with_kink():
    # mean of |1 + e^{it}| = 4/pi
    assert hardy_h1_quadrature(1 + z) == pytest.approx(4 / math.pi, abs=1e-8)


def test_quadrature_guards():
    with pytest.raises(ValueError):
        hardy_h1_quadrature(z**3, Q=8)
    with pytest.raises(ValueError):
        hardy_h1_quadrature(z1)


@pytest.mark.parametrize("k", [0, 1, 4])
def test_bracket_monomials(k):
    br = wp_bracket(HARDY, z**k, 1, max(1, (k + 1) // 2))
    assert br.lower == pytest.approx(1, abs=1e-8)
    assert br.upper == pytest.approx(1, abs=1e-8)
    assert br.h1_oracle == pytest.approx(1, abs=1e-9)


def test_bracket_zero():
    br = wp_bracket(HARDY, Poly.zero(1), 1, 1)
    assert br.lower == 0 and br.upper == 0


def test_bracket_square_contains_oracle():
    br = wp_bracket(HARDY, (1 + z) ** 2, 2, 3)
    assert br.lower - 1e-8 <= br.h1_oracle <= br.upper + 1e-8
    assert br.lower >= 1.5


def test_bracket_not_hardy_has_no_oracle():
    br = wp_bracket(DA2, z1 * z2, 1, 1, search=SearchOptions(restarts=1, max_evals=300))
    assert br.h1_oracle is None
    assert br.lower <= br.upper + 1e-8
