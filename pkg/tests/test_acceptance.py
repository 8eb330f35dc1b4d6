"""
Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".  Run alone with
``python tests/test_acceptance.py``.
"""
import sys
import time
from fractions import Fraction

import gmpy2
import pytest

from sepsplit.cli import load_model
from sepsplit.formal import formal_separatrix, formal_u, normal_form_residual, reexpand_at_singularity
from sepsplit.hamiltonian import cubic_model, symplectic_pair
from sepsplit.manifolds import compute_splitting, default_config, mu_for_lambda
from sepsplit.melnikov import (melnikov_profile_quadrature, melnikov_quadrature,
                               melnikov_residue, melnikov_residue_exact, stokes_derivative)
from sepsplit.numeric import mpf, working_precision
from sepsplit.ode import ComplexPath, IntegratorConfig, integrate_flow
from sepsplit.stokes import compute_stokes

SWEEP = ("0.60", "0.50", "0.42", "0.35")


def table_of(H):
    return {k: v for k, v in H.potential_table().items() if k[1] != 0}


def test_1_formal_series_exactness(report):
    sep = formal_separatrix(table_of(cubic_model()), 8)
    exact = sep.p[1][1] == Fraction(3, 2) and sep.p[1][0] == Fraction(-1, 2)
    worst = 0
    for mu in ("1e-2", "1e-3", "1e-4"):
        mu = mpf(mu)
        eps = gmpy2.root(4 * mu, 4)
        err = abs(sum(mpf(sep.mu[k]) * eps ** (2 * k) for k in range(2, 5)) - mu)
        worst = max(worst, float(err / mu ** 3))
    ok = report("1 formal-series exactness", exact and worst <= 1,
                f"p11 = {sep.p[1][1]}, p10 = {sep.p[1][0]}, max |mu series - mu| / mu^3 = {worst:.1e}")
    assert ok


def test_2_series_residual_scaling(report):
    H = load_model("quartic")
    with working_precision(256):
        sep = formal_separatrix(table_of(H), 8)
        slopes = {}
        for N in (4, 6):
            r = [abs(normal_form_residual(sep, mpf(e), mpf(1), N)) for e in ("0.1", "0.05", "0.025")]
            slopes[N] = [float(gmpy2.log(r[i] / r[i + 1]) / gmpy2.log(2)) for i in range(2)]
    ok = all(abs(s - (2 * N + 2)) <= 0.5 for N, ss in slopes.items() for s in ss)
    detail = ", ".join(f"N={N}: " + "/".join(f"{s:.3f}" for s in ss) + f" (target {2 * N + 2})"
                       for N, ss in slopes.items())
    assert report("2 series residual scaling", ok, detail)


def test_3_laurent_triviality(report):
    nz = 0
    for name in ("cubic", "cubic_coupled", "quartic"):
        H = load_model(name)
        sep = formal_separatrix(table_of(H), 14)
        u = formal_u(H.frequency_table(), sep, 13)
        lau = reexpand_at_singularity(sep, u, M=12, mmax=1)
        nz += sum(1 for d in (lau.A[1], lau.B[1]) for v in d.values() if v != 0)
    assert report("3 Laurent triviality", nz == 0,
                  f"nonzero first-order coefficients through M = 12 on three models: {nz}")


def test_4_integrator_fidelity(report):
    H = cubic_model(c0=1)
    mu, nu = mpf("0.01"), mpf("0.01")
    cfg = IntegratorConfig(precision_bits=128, abs_tol=1e-30, rel_tol=1e-30)
    x0 = [-gmpy2.sqrt(mu), mpf(0), mpf(1), mpf(0)]
    tr = integrate_flow(H, mu, 0, x0, ComplexPath((0, 2 * gmpy2.const_pi())), cfg, record=False)
    ret = max(abs(a - b) for a, b in zip(tr.end[1], x0))
    res = compute_splitting(H, mu, nu, default_config(128))
    xi = res.basis.xi
    drift = mpf(0)
    for T in (20, -20):
        tr = integrate_flow(H, mu, nu, res.x_minus.origin_state, ComplexPath((0, T)), cfg,
                            columns=xi, record=False)
        cols = [tr.column(c) for c in range(4)]
        drift = max(drift, *(abs(symplectic_pair(cols[i], cols[j]) - symplectic_pair(xi[i], xi[j]))
                             for i in range(4) for j in range(i + 1, 4)))
    ok = ret <= 1e-25 and drift <= 1e-20
    assert report("4 integrator fidelity", ok,
                  f"period return {float(ret):.2e} (<= 1e-25), pairing drift {float(drift):.2e} (<= 1e-20)")


def _melnikov_table(closed):
    worst = 0
    for m in (1, 2, 3):
        for eps in ("0.3", "0.4", "0.5"):
            q = melnikov_profile_quadrature(m, 1, 1, mpf(eps)).M
            r = closed(m, mpf(eps))
            worst = max(worst, float(abs(q - r) / abs(r)))
    return worst


def test_5_melnikov_equivalence_displayed_formula(report):
    # the displayed closed form keeps only the leading Laurent term of z^m
    worst = _melnikov_table(lambda m, e: gmpy2.mpc(0, 1) * melnikov_residue(m, 1, 1, e))
    assert report("5 Melnikov equivalence (displayed closed form)", worst <= 1e-8,
                  f"max relative difference {worst:.2e} (<= 1e-8)")


def test_5_melnikov_equivalence_exact_residue(report):
    worst = _melnikov_table(lambda m, e: melnikov_residue_exact(m, 1, 1, e))
    assert report("5 Melnikov equivalence (full residue sum)", worst <= 1e-8,
                  f"max relative difference {worst:.2e} (<= 1e-8)")


def test_6_melnikov_splitting_consistency(report):
    H = cubic_model(c0=1)
    ratios = {}
    for nu in ("1e-2", "5e-3"):
        nu = mpf(nu)
        mu = mu_for_lambda(H, mpf("0.45"), nu)
        m = compute_splitting(H, mu, nu, default_config(128)).measurement
        M = melnikov_quadrature(H, mu).M
        ratios[float(nu)] = abs(m.theta[0]) / (nu * abs(M) / 2)
    r1, r2 = ratios[1e-2], ratios[5e-3]
    # the ratio deviates from 1 at O(nu^2)
    rich = (4 * r2 - r1) / 3
    ok = all(abs(r - 1) <= 0.1 for r in ratios.values()) and abs(rich - 1) < abs(r2 - 1)
    assert report("6 Melnikov-splitting consistency", ok,
                  f"ratio {float(r1):.6f} (nu=1e-2), {float(r2):.6f} (nu=5e-3), "
                  f"Richardson {float(rich):.8f}")


def test_7_stokes_extraction(report):
    H = load_model("inner_cubic")
    with working_precision(192):
        nu = mpf("1e-2")
        r = compute_stokes(H, nu, tau_match=30).result
        rate = r.fit["rate"]
        pred = abs(stokes_derivative(H, 1, -1).pairing)
        rel = abs(abs(r.b0) / nu / pred - 1)
    ok = abs(rate - 1) <= 0.2 and rel <= 0.15
    assert report("7 Stokes extraction", ok,
                  f"rate {float(rate):.3f} (omega0 = 1, 20%), |b0|/nu = {float(abs(r.b0) / nu):.6f} "
                  f"vs {float(pred):.6f}, relative {float(rel):.1e} (<= 0.15)")


def _sweep(H, nu, bits):
    vals = []
    with working_precision(bits):
        for lam in SWEEP:
            mu = mu_for_lambda(H, mpf(lam), mpf(nu))
            m = compute_splitting(H, mu, mpf(nu), default_config(bits)).measurement
            vals.append(m)
    return vals


def test_8_asymptotic_law(report):
    H = cubic_model(c0=1)
    t0 = time.time()
    ms = _sweep(H, "1e-2", 192)
    scaled = [m.E_e1 * gmpy2.exp(2 * gmpy2.const_pi() * m.omega / m.lam) for m in ms]
    with working_precision(192):
        a0 = compute_stokes(H, mpf("1e-2"), tau_match=30).result.a0
    steps = [abs(scaled[i + 1] / scaled[i] - 1) for i in range(len(scaled) - 1)]
    limit = scaled[-1]
    ok = (all(s > 0 for s in scaled) and steps[-1] <= 0.25 and abs(limit / a0 - 1) <= 0.3)
    assert report("8 asymptotic law", ok,
                  "E e^(2 pi omega/lambda) = " + ", ".join(f"{float(s):.6g}" for s in scaled)
                  + f"; last step {float(steps[-1]):.1e}; stokes a0 {float(a0):.6g}, "
                  f"relative {float(abs(limit / a0 - 1)):.1e} ({time.time() - t0:.0f} s)")


def test_9_integrable_null(report):
    H = cubic_model(c0=1)
    worst = 0
    with working_precision(192):
        for lam in SWEEP:
            mu = mu_for_lambda(H, mpf(lam), 0)
            m = compute_splitting(H, mu, 0, default_config(192), window=False).measurement
            if not (m.E_e1 == 0 or m.upper_bound):
                worst = max(worst, float(m.E_e1))
        b0s = [compute_stokes(load_model(n), 0, tau_match=30).result.b0
               for n in ("cubic", "inner_cubic")]
    ok = worst == 0 and all(b == 0 for b in b0s)
    assert report("9 integrable null test", ok,
                  f"E_e1 above noise floor: {worst:.1e}; b0 = {[complex(b) for b in b0s]}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
