from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from sepsplit.cli import load_model
from sepsplit.formal import (ZPolynomial, energy_identity_residual, evaluate_formal,
                             formal_separatrix, formal_u, mu_series, normal_form_residual,
                             reexpand_at_singularity)
from sepsplit.hamiltonian import cubic_model
from sepsplit.numeric import mpf, working_precision

nonzero = st.fractions(-3, 3, max_denominator=6).filter(lambda q: q != 0)
any_q = st.fractions(-3, 3, max_denominator=6)


@st.composite
def potentials(draw):
    table = {(1, 1): draw(nonzero), (0, 3): draw(nonzero)}
    for key in [(0, 4), (1, 2), (2, 1), (0, 5)]:
        table[key] = draw(any_q)
    return table


def table_of(H):
    return {k: v for k, v in H.potential_table().items() if k[1] != 0}


def test_cubic_base_coefficients():
    sep = formal_separatrix(table_of(cubic_model()), 6)
    assert sep.p[1].c == [Fraction(-1, 2), Fraction(3, 2)]
    assert sep.mu[2] == Fraction(1, 4)
    # the cubic series terminates
    assert all(not sep.p[k].c for k in range(2, 7))
    assert all(m == 0 for m in sep.mu[3:])


@settings(max_examples=25, deadline=None)
@given(potentials())
def test_energy_identity_exact(table):
    sep = formal_separatrix(table, 5)
    for k in range(3, 7):
        assert not energy_identity_residual(sep, k).c
    assert sep.p[1][1] == 1 / (2 * table[(0, 3)])
    assert all(len(sep.p[k]) <= k + 1 for k in range(1, 6))


@settings(max_examples=10, deadline=None)
@given(potentials())
def test_mu_series_matches_exponent(table):
    # eps is the saddle exponent: V''(x_saddle) = -eps^2, up to O(eps^(2N))
    from sepsplit.hamiltonian import PolyHamiltonian, find_equilibrium
    terms = {(0, 2, 0, 0, 0, 0): Fraction(1, 2), (0, 0, 2, 0, 0, 0): Fraction(1, 2),
             (0, 0, 0, 2, 0, 0): Fraction(1, 2)}
    for (k, l), c in table.items():
        terms[(l, 0, 0, 0, k, 0)] = c
    H = PolyHamiltonian(terms)
    N = 6
    sep = formal_separatrix(table, N)
    with working_precision(192):
        errs = []
        for e in ("0.02", "0.01"):
            eps = mpf(e)
            try:
                lam = find_equilibrium(H, mu_series(sep, eps), 0).lam
            except ArithmeticError:
                return
            errs.append(abs(lam / eps - 1))
        if errs[1] < 1e-45:
            return
        assert gmpy2.log(errs[0] / errs[1]) / gmpy2.log(2) > 2 * N - 0.5


def test_laurent_first_order_vanishes():
    for name in ("cubic_coupled", "quartic"):
        H = load_model(name)
        sep = formal_separatrix(table_of(H), 14)
        u = formal_u(H.frequency_table(), sep, 13)
        lau = reexpand_at_singularity(sep, u, M=12, mmax=1)
        assert all(v == 0 for v in lau.A[1].values())
        assert all(v == 0 for v in lau.B[1].values())
        assert any(v != 0 for v in lau.A[0].values())


def test_reexpand_needs_enough_orders():
    H = cubic_model()
    sep = formal_separatrix(table_of(H), 4)
    with pytest.raises(ValueError):
        reexpand_at_singularity(sep, None, M=12, mmax=1)


def test_residual_slope():
    H = load_model("quartic")
    with working_precision(256):
        sep = formal_separatrix(table_of(H), 8)
        for N in (4, 6):
            r = [abs(normal_form_residual(sep, mpf(e), mpf(1), N)) for e in ("0.1", "0.05")]
            slope = gmpy2.log(r[0] / r[1]) / gmpy2.log(2)
            assert abs(slope - (2 * N + 2)) < 0.1


def test_evaluate_formal_cubic_closed_form():
    sep = formal_separatrix(table_of(cubic_model()), 3)
    eps, t = mpf("0.3"), mpf("2.5")
    x, y, _, _ = evaluate_formal(sep, eps, t)
    sech2 = 1 / gmpy2.cosh(eps * t / 2) ** 2
    assert abs(x - eps ** 2 * (-mpf(1) / 2 + 3 * sech2 / 2)) < 1e-35
    # y = dx/dt
    h = mpf(2) ** -40
    xd = (evaluate_formal(sep, eps, t + h)[0] - evaluate_formal(sep, eps, t - h)[0]) / (2 * h)
    assert abs(y - xd) < 1e-20


def test_frequency_series_leading_term():
    H = load_model("cubic_coupled")
    sep = formal_separatrix(table_of(H), 7)
    u = formal_u(H.frequency_table(), sep, 6)
    assert u.omega[0] == 1


def test_zpolynomial_arithmetic():
    a = ZPolynomial([1, 2])
    b = ZPolynomial([0, 0, 3])
    assert (a * b).c == [0, 0, 3, 6]
    assert (a + b)(Fraction(1, 2)) == 1 + 1 + Fraction(3, 4)
    assert ZPolynomial([1, 0, 0]).degree == 0
