import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from sepsplit.cli import load_model
from sepsplit.hamiltonian import cubic_model
from sepsplit.melnikov import (melnikov_model_residue, melnikov_profile_quadrature,
                               melnikov_quadrature, melnikov_residue, melnikov_residue_exact,
                               stokes_derivative, stokes_derivative_quadrature)
from sepsplit.numeric import mpf


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("eps", ["0.3", "0.4", "0.5"])
def test_profile_quadrature_matches_exact_residue(m, eps):
    q = melnikov_profile_quadrature(m, 1, 1, mpf(eps)).M
    r = melnikov_residue_exact(m, 1, 1, mpf(eps))
    assert abs(q - r) <= 1e-8 * abs(r)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.25, 0.6), st.floats(0.5, 2.0))
def test_leading_formula_is_the_leading_term(eps, omega):
    # for m = 1 the displayed closed form drops only exponentially small terms
    eps, omega = mpf(eps), mpf(omega)
    exact = melnikov_residue_exact(1, 1, omega, eps)
    lead = gmpy2.mpc(0, 1) * melnikov_residue(1, 1, omega, eps)
    x = gmpy2.const_pi() * omega / eps
    assert abs(exact - lead) <= 4 * gmpy2.exp(-2 * x) * abs(exact)


def test_exact_residue_scaling():
    eps = mpf("0.4")
    base = melnikov_residue_exact(2, 1, 1, eps)
    assert abs(melnikov_residue_exact(2, 3, 1, eps) - 3 * base) < 1e-14 * abs(base)
    assert abs(melnikov_residue_exact(2, 1, 1, eps, amplitude=2) - 4 * base) < 1e-14 * abs(base)
    with pytest.raises(ValueError):
        melnikov_residue_exact(0, 1, 1, eps)


@pytest.mark.parametrize("mu", ["0.01", "0.05", "0.2"])
def test_model_quadrature_vs_residue(mu):
    H = load_model("cubic")
    q = melnikov_quadrature(H, mpf(mu)).M
    r = melnikov_model_residue(H, mpf(mu)).M
    assert abs(q - r) <= 1e-15 * abs(r)  # window truncation e^-40
    # the forcing is x1 x2 so M is purely imaginary
    assert abs(q.real) <= 1e-25 * abs(q)


@pytest.mark.parametrize("model", ["cubic_coupled", "inner_cubic"])
def test_closed_and_ode_quadrature_agree(model):
    H = load_model(model)
    mu = mpf("0.05")
    a = melnikov_quadrature(H, mu, method="closed").M
    b = melnikov_quadrature(H, mu, method="ode").M
    assert abs(a - b) <= 1e-15 * abs(a)


def test_quartic_needs_ode_quadrature():
    H = load_model("quartic")
    with pytest.raises(ValueError):
        melnikov_quadrature(H, mpf("0.05"), method="closed")
    assert abs(melnikov_quadrature(H, mpf("0.05")).M) > 0


def test_unforced_model_has_zero_integral():
    assert melnikov_quadrature(cubic_model(), mpf("0.05")).M == 0


def test_stokes_derivative_residue_vs_quadrature():
    H = load_model("inner_cubic")
    d = stokes_derivative(H, 1, -1)
    q = stokes_derivative_quadrature(H, 1, -1)
    assert abs(d.integral - q) <= 1e-25 * abs(q)
    assert abs(abs(d.pairing) - 4 * gmpy2.const_pi()) < 1e-30
    assert abs(d.pairing + gmpy2.sqrt(mpf(2)) * d.integral) < 1e-30
