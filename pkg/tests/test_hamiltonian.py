from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from sepsplit.cli import bundled_models, load_model
from sepsplit.hamiltonian import (PhaseField, apply_J, cubic_model, evaluate, find_equilibrium,
                                  format_hamiltonian, parse_hamiltonian, symplectic_pair)
from sepsplit.numeric import mpf

small = st.floats(-2, 2, allow_nan=False)
vec = st.lists(small, min_size=4, max_size=4)


def test_parse_round_trip():
    H = cubic_model(a=-1, b=-3, c=Fraction(1, 2), c0=1)
    assert parse_hamiltonian(format_hamiltonian(H)) == H


def test_bundled_models_match_constructors():
    assert load_model("cubic") == cubic_model(c0=1)
    assert load_model("cubic_coupled") == cubic_model(c=Fraction(1, 2), c0=1)
    assert load_model("inner_cubic") == cubic_model(a=-1, b=-3, c0=1)
    assert {"cubic", "quartic"} <= set(bundled_models())


@pytest.mark.parametrize("text, msg", [
    ("1 0 0 0 0 1\n", "expected 6"),
    ("1 0 0 0 0 0 1\n1 0 0 0 0 0 2\n", "duplicate"),
    ("1 0 0 0 0 0 x\n", "bad coefficient"),
    ("-1 0 0 0 0 0 1\n", "negative"),
    ("zeta = 1\n1 0 0 0 0 0 1\n", "unknown constant"),
    ("# only a comment\n", "no monomials"),
])
def test_parse_errors(text, msg):
    with pytest.raises(ValueError, match=msg):
        parse_hamiltonian(text)


def test_potential_and_frequency_tables():
    H = cubic_model(c=Fraction(1, 2))
    assert H.potential_table() == {(1, 1): -1, (0, 3): Fraction(1, 3)}
    assert H.frequency_table() == {(0, 0): 1, (0, 1): Fraction(1, 2)}


@given(vec, vec)
def test_symplectic_pair_antisymmetric(u, w):
    u, w = [mpf(a) for a in u], [mpf(a) for a in w]
    assert symplectic_pair(u, w) == -symplectic_pair(w, u)
    # Omega(u, w) = <u, J w>
    Jw = apply_J(w)
    assert abs(symplectic_pair(u, w) - sum(a * b for a, b in zip(u, Jw))) < 1e-30


@settings(max_examples=20, deadline=None)
@given(vec)
def test_vector_field_is_hamiltonian(p):
    H = cubic_model(c=Fraction(1, 2), c0=1)
    F = PhaseField(H, mpf("0.1"), mpf("0.01"))
    p = [mpf(a) for a in p]
    f, g = F.vector_field(p), F.gradient(p)
    # dH/dt = 0 along the flow
    assert abs(sum(a * b for a, b in zip(f, g))) < 1e-30
    assert F.energy(p) == evaluate(H, p, mpf("0.1"), mpf("0.01"))


@pytest.mark.parametrize("model", ["cubic", "cubic_coupled", "inner_cubic", "quartic"])
@pytest.mark.parametrize("mu", ["0.01", "0.1"])
def test_equilibrium_spectrum(model, mu):
    H = load_model(model)
    mu, nu = mpf(mu), mpf("0.01")
    eq = find_equilibrium(H, mu, nu)
    F = PhaseField(H, mu, nu)
    assert max(abs(v) for v in F.gradient(eq.location)) < 1e-30
    A = F.linear_matrix(eq.location)
    iw = gmpy2.mpc(0, eq.omega)
    for i in range(4):
        assert abs(sum(A[i][j] * eq.v[j] for j in range(4)) - iw * eq.v[i]) < 1e-30
        assert abs(sum(A[i][j] * eq.w_unstable[j] for j in range(4))
                   - eq.lam * eq.w_unstable[i]) < 1e-30
    assert eq.lam > 0 and eq.omega > 0
    assert abs(symplectic_pair(eq.v, [z.conjugate() for z in eq.v]) - gmpy2.mpc(0, -2)) < 1e-30
    assert eq.v[2].imag == 0 and eq.v[2].real > 0


def test_cubic_equilibrium_closed_form():
    eq = find_equilibrium(cubic_model(), mpf("0.04"), 0)
    assert abs(eq.location[0] + mpf("0.2")) < 1e-35
    assert abs(eq.lam - gmpy2.sqrt(mpf("0.4"))) < 1e-35
    assert eq.omega == 1
