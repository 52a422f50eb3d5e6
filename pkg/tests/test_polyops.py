import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ldpcsdp.ensemble import DegreeDistribution, InvalidInput
from ldpcsdp.polyops import (DensePolynomial, constraint_basis, p_coefficients, phi_cross_check, pi_transform,
                             pi_transform_matrix, poly_compose, poly_eval)

from conftest import REFERENCE_X5_LAMBDA, lam, normalized_reference, random_simplex

coeff_lists = st.lists(st.floats(-10, 10, allow_nan=False), min_size=0, max_size=12)


def test_dense_polynomial_trims_and_zero_convention():
    assert DensePolynomial([1, 2, 0, 0]).coefficients.tolist() == [1, 2]
    z = DensePolynomial([0, 0])
    assert z.degree == -1 and z.coefficients.size == 0
    assert str(DensePolynomial([1, -2, 3])) == "1 - 2·x + 3·x^2"


def test_arithmetic():
    p, q = DensePolynomial([1, 1]), DensePolynomial([1, -1])
    assert p * q == DensePolynomial([1, 0, -1])
    assert p + q == DensePolynomial([2])
    assert p - p == DensePolynomial()
    assert p**3 == DensePolynomial([1, 3, 3, 1])
    assert 2 * p == DensePolynomial([2, 2])


def test_poly_eval_examples():
    assert poly_eval(DensePolynomial([1, 2, 3]), 0) == 1
    assert poly_eval(DensePolynomial([1, 2, 3]), 1) == 6
    assert poly_eval(DensePolynomial([0, 1, -1]), 0.5) == 0.25
    assert np.allclose(poly_eval(DensePolynomial([0, 1]), np.arange(3.0)), [0, 1, 2])


def test_poly_compose_examples():
    x2 = DensePolynomial([0, 0, 1])
    assert poly_compose(x2, DensePolynomial([1, -1])) == DensePolynomial([1, -2, 1])
    f = DensePolynomial([3, -1, 4, 1, 5])
    assert poly_compose(f, DensePolynomial([0, 1])) == f
    assert poly_compose(DensePolynomial([0, 0, 0, 1]), DensePolynomial([1, -2])).coefficients.tolist() == [1, -6, 12, -8]


@given(coeff_lists, st.lists(st.floats(-2, 2), min_size=1, max_size=4), st.floats(-1, 1))
def test_compose_distributes_over_evaluation(fc, gc, x):
    f, g = DensePolynomial(fc), DensePolynomial(gc)
    lhs = poly_eval(poly_compose(f, g), x)
    rhs = poly_eval(f, poly_eval(g, x))
    scale = 1 + sum(abs(c) for c in fc) * (1 + sum(abs(c) for c in gc)) ** max(len(fc), 1)
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_p_coefficients_examples():
    assert p_coefficients(lam({2: 1.0}), DegreeDistribution({2: 1.0}, kind="check"), 0.5) == DensePolynomial([0, 0.5])
    # eps = 1 is outside ChannelParam's open interval; check the same identity at the compose level
    inner = 1 - poly_compose(DensePolynomial([0, 1]), DensePolynomial([1, -1]))
    assert DensePolynomial([0, 1]) - poly_compose(DensePolynomial([0, 0, 1]), inner) == DensePolynomial([0, 1, -1])
    p = p_coefficients(normalized_reference(REFERENCE_X5_LAMBDA), DegreeDistribution({6: 1.0}, kind="check"), 0.49)
    assert p.degree == 30 and p.coefficient(0) == 0.0
    lam2 = 0.4021 / sum(REFERENCE_X5_LAMBDA.values())
    assert p.coefficient(1) == pytest.approx(1 - 0.49 * lam2 * 5, abs=1e-12)
    assert 1 - 0.49 * 0.4021 * 5 == pytest.approx(0.01485, abs=1e-5)


def test_p_coefficients_rejects_wrong_types():
    with pytest.raises(InvalidInput):
        p_coefficients({2: 1.0}, DegreeDistribution({2: 1.0}), 0.5)
    with pytest.raises(InvalidInput):
        p_coefficients(lam({2: 1.0}), DegreeDistribution({2: 1.0}), 1.0)


def test_p_coefficients_matches_direct_evaluation(rng):
    for _ in range(20):
        dv, dc = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        l = lam(dict(zip(range(2, dv + 1), random_simplex(rng, dv - 1))))
        r = DegreeDistribution(dict(zip(range(2, dc + 1), random_simplex(rng, dc - 1))), kind="check")
        eps = float(rng.uniform(0.05, 0.95))
        p = p_coefficients(l, r, eps)
        assert p.degree <= (dv - 1) * (dc - 1)
        xs = np.linspace(0, 1, 57)
        assert np.allclose(poly_eval(p, xs), xs - l(1 - r(1 - eps * xs)), atol=1e-12)
        assert p.coefficient(1) == pytest.approx(1 - eps * l[2] * r.derivative_at_one(), abs=1e-12)


def test_constraint_basis_reassembles_p():
    rho = DegreeDistribution({5: 0.3, 6: 0.7}, kind="check")
    l = lam({2: 0.3, 4: 0.2, 6: 0.5})
    h = constraint_basis(rho, 0.4, [2, 3, 4, 5, 6])
    rebuilt = DensePolynomial([0, 1]) - sum((l[d] * hd for d, hd in zip(range(2, 7), h)), DensePolynomial())
    assert np.allclose(rebuilt.padded(26)[1:], p_coefficients(l, rho, 0.4).padded(26)[1:], atol=1e-14)


def test_phi_cross_check_examples():
    assert phi_cross_check(lam({2: 1.0}), 1, 0.5) == p_coefficients(lam({2: 1.0}), DegreeDistribution({2: 1.0}), 0.5)
    assert np.allclose(phi_cross_check(lam({3: 1.0}), 1, 0.999999).coefficients, [0, 1, -0.999999**2])
    l = normalized_reference(REFERENCE_X5_LAMBDA)
    a = phi_cross_check(l, 5, 0.49).padded(31)
    b = p_coefficients(l, DegreeDistribution({6: 1.0}, kind="check"), 0.49).padded(31)
    assert np.max(np.abs(a - b)) <= 1e-9


def test_phi_cross_check_rejects_non_monomial():
    with pytest.raises(InvalidInput):
        phi_cross_check(lam({2: 1.0}), DegreeDistribution({5: 0.5, 6: 0.5}, kind="check"), 0.4)
    assert phi_cross_check(lam({3: 1.0}), DegreeDistribution({4: 1.0}, kind="check"), 0.4) == \
        phi_cross_check(lam({3: 1.0}), 3, 0.4)


def test_pi_transform_examples():
    assert pi_transform(DensePolynomial([0, 1, -1])) == DensePolynomial([0, 0, 1])
    assert pi_transform(DensePolynomial([1])) == DensePolynomial([1])
    assert pi_transform(DensePolynomial()) == DensePolynomial()
    for b in (-3.0, -2.0, 0.5, 7.0):
        assert pi_transform(DensePolynomial([1, b, 1])) == DensePolynomial([1, 0, 2 + b, 0, 2 + b])


def test_pi_transform_rejects_small_q():
    with pytest.raises(InvalidInput):
        pi_transform(DensePolynomial([0, 0, 1]), q=1)


def test_pi_transform_binomial_table():
    # Pi_{2j} = sum_i C(q-i+1, j-i+1) p_{i-1}, the closed-form coefficient table
    rng = np.random.default_rng(3)
    for q in range(0, 12):
        p = DensePolynomial(rng.normal(size=q + 1))
        pi = pi_transform(p, q).padded(2 * q + 1)
        for j in range(q + 1):
            table = sum(math.comb(q - i + 1, j - i + 1) * p.coefficient(i - 1) for i in range(1, j + 2))
            assert pi[2 * j] == pytest.approx(table, rel=1e-12, abs=1e-12)
        assert np.all(pi[1::2] == 0)
        assert np.allclose(pi_transform_matrix(q) @ p.padded(q + 1), pi, rtol=1e-12, atol=1e-12)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=5), st.integers(0, 2))
@settings(max_examples=80)
def test_nonnegativity_transfers_to_the_line(coeffs, extra):
    p = DensePolynomial(coeffs)
    if p.degree < 1:
        return
    pi = pi_transform(p, p.degree + extra)
    on_unit = poly_eval(p, np.linspace(0, 1, 2001)).min()
    t = np.tan(np.linspace(-np.pi / 2, np.pi / 2, 4001)[1:-1])
    on_line = (poly_eval(pi, t) / (1 + t**2) ** (p.degree + extra)).min()
    # the rescaled Pi at t is p(sin^2) so the two minima over dense grids agree
    assert on_line == pytest.approx(on_unit, abs=1e-3 * (1 + np.abs(coeffs).max()))


def test_constraint_values_match_coefficients():
    from ldpcsdp.polyops import constraint_values

    rho = DegreeDistribution({4: 0.5, 7: 0.5}, kind="check")
    degrees = [2, 3, 5, 8]
    y = np.linspace(0.01, 1, 40)
    direct = constraint_values(rho, 0.37, degrees, y)
    via_coeffs = np.stack([poly_eval(h, y) / y for h in constraint_basis(rho, 0.37, degrees)], axis=1)
    assert np.allclose(direct, via_coeffs, rtol=1e-10, atol=1e-13)
    with pytest.raises(InvalidInput):
        constraint_values(rho, 0.37, degrees, np.array([0.0, 0.5]))


def test_composition_is_correctly_rounded():
    # large alternating coefficients; the composition must match an exact rational reference
    from fractions import Fraction

    l, eps = lam({8: 1.0}), 0.9
    p = p_coefficients(l, DegreeDistribution({8: 1.0}, kind="check"), eps)
    e = Fraction(eps)
    inner = [Fraction(0)] + [(-1) ** (k + 1) * math.comb(7, k) * e**k for k in range(1, 8)]
    power = [Fraction(1)]
    for _ in range(7):
        out = [Fraction(0)] * (len(power) + 7)
        for i, a in enumerate(power):
            for j, b in enumerate(inner):
                out[i + j] += a * b
        power = out
    exact = [-c for c in power]
    exact[1] += 1
    assert p.coefficients.tolist() == [float(c) for c in exact[: p.degree + 1]]
