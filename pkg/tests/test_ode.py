import gmpy2
import pytest

from sepsplit.hamiltonian import cubic_model
from sepsplit.numeric import mpc, mpf
from sepsplit.ode import (ComplexPath, IntegrationError, IntegratorConfig, energy_drift,
                          integrate_flow)

H = cubic_model(c0=1)
MU = mpf("0.01")
CFG = IntegratorConfig(precision_bits=128, abs_tol=1e-30, rel_tol=1e-30)


def saddle_start(x2=1):
    return [-gmpy2.sqrt(MU), mpf(0), mpf(x2), mpf(0)]


@pytest.mark.parametrize("method", ["taylor", "extrapolation"])
def test_elliptic_period_return(method):
    cfg = IntegratorConfig(precision_bits=128, abs_tol=1e-28, rel_tol=1e-28, method=method)
    x0 = saddle_start()
    tr = integrate_flow(H, MU, 0, x0, ComplexPath((0, 2 * gmpy2.const_pi())), cfg, record=False)
    assert max(abs(a - b) for a, b in zip(tr.end[1], x0)) < 1e-24


def test_closed_complex_loop_returns():
    # a small loop in complex time encloses no singularity of the solution
    x0 = [mpf("0.3"), mpf("0.1"), mpf("0.05"), mpf(0)]
    loop = (0, 1, mpc(1, 1), mpc(0, 1), 0)
    tr = integrate_flow(H, MU, mpf("0.01"), x0, ComplexPath(loop), CFG, record=False)
    assert max(abs(a - b) for a, b in zip(tr.end[1], x0)) < 1e-26


def test_path_independence():
    x0 = [mpf("0.3"), mpf("0.1"), mpf("0.05"), mpf(0)]
    end = mpc("1.5", "0.7")
    a = integrate_flow(H, MU, mpf("0.01"), x0, ComplexPath((0, end)), CFG, record=False)
    b = integrate_flow(H, MU, mpf("0.01"), x0, ComplexPath((0, mpc(0, "0.7"), end)), CFG,
                       record=False)
    assert max(abs(u - v) for u, v in zip(a.end[1], b.end[1])) < 1e-26


def test_energy_conserved_along_homoclinic():
    # the unperturbed loop from x1 = 2 sqrt(mu) (turning point)
    x0 = [2 * gmpy2.sqrt(MU), mpf(0), mpf(0), mpf(0)]
    tr = integrate_flow(H, MU, 0, x0, ComplexPath((0, 40)), CFG)
    assert energy_drift(tr) < 1e-28
    assert abs(tr.end[1][0] + gmpy2.sqrt(MU)) < 1e-3


def test_event_stops_at_crossing():
    x0 = saddle_start()
    tr = integrate_flow(H, MU, 0, x0, ComplexPath((0, 4)), CFG, event=(2, 1))
    assert abs(tr.event - gmpy2.const_pi() / 2) < 1e-25
    assert abs(tr.end[1][2]) < 1e-25


def test_blowup_is_reported():
    x0 = [mpf(-3), mpf(0), mpf(0), mpf(0)]
    with pytest.raises(IntegrationError):
        integrate_flow(H, MU, 0, x0, ComplexPath((0, 10)), CFG)


def test_variational_columns_match_finite_differences():
    x0 = [mpf("0.2"), mpf("-0.1"), mpf("0.05"), mpf("0.02")]
    e = [mpf(1), mpf(0), mpf(0), mpf(0)]
    nu = mpf("0.01")
    path = ComplexPath((0, 3))
    tr = integrate_flow(H, MU, nu, x0, path, CFG, columns=[e], record=False)
    h = mpf(2) ** -40
    hi = integrate_flow(H, MU, nu, [x0[0] + h] + x0[1:], path, CFG, record=False).end[1]
    lo = integrate_flow(H, MU, nu, [x0[0] - h] + x0[1:], path, CFG, record=False).end[1]
    fd = [(a - b) / (2 * h) for a, b in zip(hi, lo)]
    assert max(abs(a - b) for a, b in zip(tr.column(0), fd)) < 1e-18


def test_complex_columns_on_real_path():
    x0 = saddle_start(x2=0)
    v = [0, 0, mpc(1), mpc(0, 1)]
    tr = integrate_flow(H, MU, 0, x0, ComplexPath((0, 1)), CFG, columns=[v], record=False)
    # elliptic eigenvector rotates as exp(i t)
    ph = gmpy2.exp(gmpy2.mpc(0, 1))
    assert max(abs(a - ph * b) for a, b in zip(tr.column(0), v)) < 1e-26


@pytest.mark.parametrize("kw", [
    {"precision_bits": 40},
    {"abs_tol": 1e-60, "rel_tol": 1e-60},
    {"method": "rk4"},
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_path_validation():
    with pytest.raises(ValueError):
        ComplexPath((0,))
    with pytest.raises(ValueError):
        ComplexPath((0, 1, 1))
