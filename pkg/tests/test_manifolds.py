import gmpy2
import pytest

from sepsplit.cli import load_model
from sepsplit.hamiltonian import find_equilibrium, symplectic_pair
from sepsplit.manifolds import (compute_splitting, default_config, mu_for_lambda,
                                section_sign)
from sepsplit.melnikov import melnikov_quadrature
from sepsplit.numeric import mpc, mpf

H = load_model("cubic")
MU = mpf("0.2")


@pytest.fixture(scope="module")
def small_nu():
    from sepsplit.numeric import working_precision
    with working_precision(128):
        yield compute_splitting(H, MU, mpf("1e-6"), default_config(128))


def test_splitting_matches_melnikov_at_small_nu(small_nu):
    M = melnikov_quadrature(H, MU).M
    theta1 = small_nu.measurement.theta[0]
    assert abs(abs(theta1) / (mpf("1e-6") * abs(M) / 2) - 1) < 1e-6


def test_basis_pairings(small_nu):
    p = small_nu.basis.pairings
    assert abs(p[(1, 2)] - gmpy2.mpc(0, 2)) < 1e-25
    assert abs(p[(3, 4)] - 1) < 1e-25
    for key in [(1, 3), (1, 4), (2, 3), (2, 4)]:
        assert abs(p[key]) < 1e-25
    xi = small_nu.basis.xi
    assert abs(symplectic_pair(xi[0], xi[1]) - p[(1, 2)]) < 1e-30


def test_theta_symmetries(small_nu):
    m = small_nu.measurement
    assert abs(m.theta[1] - mpc(m.theta[0]).conjugate()) < 1e-25
    assert abs(m.E_e1 - 2 * abs(m.theta[0]) ** 2) < 1e-30
    assert abs(m.E_h1 + m.omega / m.lam * m.E_e1) < 1e-30
    # the time origin puts theta3 at zero
    assert abs(m.theta[2]) < 1e-25
    assert not m.upper_bound


def test_time_origin_postcondition(small_nu):
    d = small_nu.measurement.delta0
    xi3 = small_nu.basis.xi[2]
    lhs = abs(symplectic_pair(d, xi3))
    assert lhs <= 1e-3 * gmpy2.sqrt(sum(abs(v) ** 2 for v in d)) * gmpy2.sqrt(
        sum(abs(v) ** 2 for v in xi3))


def test_seed_checks(small_nu):
    diag = small_nu.diagnostics
    assert diag["seed_mismatch_unstable"] < 1e-3
    assert diag["seed_mismatch_stable"] < 1e-3


def test_null_perturbation_gives_zero():
    m = compute_splitting(H, MU, 0, default_config(128), window=False).measurement
    assert m.E_e1 <= max(m.noise_floor, mpf(1e-60))


def test_linear_in_nu():
    a = compute_splitting(H, MU, mpf("1e-6"), default_config(128)).measurement.theta[0]
    b = compute_splitting(H, MU, mpf("2e-6"), default_config(128)).measurement.theta[0]
    assert abs(b / a - 2) < 1e-5


def test_seed_time_independence():
    nu = mpf("1e-4")
    eq = find_equilibrium(H, MU, nu)
    base = compute_splitting(H, MU, nu, default_config(128))
    T = base.T_seed
    other = compute_splitting(H, MU, nu, default_config(128), T_seed=T - 2 / eq.lam)
    a, b = abs(base.measurement.theta[0]), abs(other.measurement.theta[0])
    assert abs(a / b - 1) < 1e-8


def test_coupled_model_converges_to_melnikov():
    Hc = load_model("cubic_coupled")
    mu = mpf("0.05")
    M = abs(melnikov_quadrature(Hc, mu).M)
    errs = []
    for nu in ("2e-3", "1e-3"):
        m = compute_splitting(Hc, mu, mpf(nu), default_config(128)).measurement
        errs.append(abs(abs(m.theta[0]) / (mpf(nu) * M / 2) - 1))
    # O(nu) relative error halves (or better) with nu
    assert errs[1] < 0.6 * errs[0]


def test_mu_for_lambda():
    nu = mpf("0.01")
    mu = mu_for_lambda(H, mpf("0.45"), nu)
    assert abs(find_equilibrium(H, mu, nu).lam - mpf("0.45")) < 1e-30


def test_section_sign():
    assert section_sign("unstable", 1) == 1
    assert section_sign("unstable", -1) == -1
    assert section_sign("stable", 1) == -1
    assert section_sign("stable", -1) == 1


def test_left_loop_model():
    # a = -1, b = -3 puts the loop on the other side of the saddle
    Hi = load_model("inner_cubic")
    mu = mpf("0.05")
    res = compute_splitting(Hi, mu, mpf("1e-6"), default_config(128))
    assert res.diagnostics["offset_unstable"] < 0
    M = abs(melnikov_quadrature(Hi, mu).M)
    assert abs(abs(res.measurement.theta[0]) / (mpf("1e-6") * M / 2) - 1) < 1e-4
