"""
Invariant suite run by ``sepsplit verify``.

Each check returns ``(name, passed, detail)``.  The quick suite takes a few
seconds on the bundled cubic model; ``quick=False`` adds the Stokes checks.
"""
import gmpy2

from .numeric import mpc, mpf, working_precision


def _load(model):
    from .cli import load_model
    return load_model(model)


def check_formal(H):
    from .formal import energy_identity_residual, formal_separatrix
    table = {k: v for k, v in H.potential_table().items() if k[1] != 0}
    sep = formal_separatrix(table, 6)
    bad = [k for k in range(2, 7) if any(energy_identity_residual(sep, k).c)]
    return "formal energy identity", not bad, f"orders 2..6 exact, failing {bad}"


def check_laurent(H):
    from .formal import formal_separatrix, formal_u, reexpand_at_singularity
    table = {k: v for k, v in H.potential_table().items() if k[1] != 0}
    M = 8
    sep = formal_separatrix(table, M + 2)
    u = formal_u(H.frequency_table(), sep, M + 1)
    lau = reexpand_at_singularity(sep, u, M=M, mmax=1)
    nz = sum(1 for d in (lau.A[1], lau.B[1]) for v in d.values() if v != 0)
    nz_u = sum(1 for k, v in lau.U[1].items() if v != 0 and k != 1)
    return ("Laurent triviality", nz == 0 and nz_u == 0,
            f"nonzero first-order coefficients: A,B {nz}, U {nz_u}")


def check_period():
    from .hamiltonian import cubic_model
    from .ode import ComplexPath, IntegratorConfig, integrate_flow
    H = cubic_model()
    cfg = IntegratorConfig(precision_bits=128, abs_tol=1e-30, rel_tol=1e-30)
    x0 = [mpf(0), mpf(0), mpf(1), mpf(0)]
    mu = mpf("0.01")
    eq_x = -gmpy2.sqrt(mu)
    x0[0] = eq_x
    T = 2 * gmpy2.const_pi()
    tr = integrate_flow(H, mu, 0, x0, ComplexPath((0, T)), cfg, record=False)
    err = max(abs(a - b) for a, b in zip(tr.end[1], x0))
    return "elliptic period return", err <= 1e-25, f"error {float(err):.2e}"


def check_equilibrium(H, mu, nu):
    from .hamiltonian import PhaseField, find_equilibrium, symplectic_pair
    eq = find_equilibrium(H, mu, nu)
    A = PhaseField(H, mu, nu).linear_matrix(eq.location)
    Av = [sum(A[i][j] * eq.v[j] for j in range(4)) for i in range(4)]
    r = max(abs(a - gmpy2.mpc(0, eq.omega) * b) for a, b in zip(Av, eq.v))
    pair = symplectic_pair(eq.v, [z.conjugate() for z in eq.v])
    ok = r < 1e-30 and abs(pair - gmpy2.mpc(0, -2)) < 1e-30
    return "equilibrium eigen-relations", ok, f"residual {float(r):.2e}"


def check_splitting(H, mu):
    from .manifolds import compute_splitting, default_config
    from .melnikov import melnikov_quadrature
    nu = mpf("1e-6")
    res = compute_splitting(H, mu, nu, default_config(128))
    m = res.measurement
    pairs = res.basis.pairings
    drift = max(abs(pairs[(1, 2)] - gmpy2.mpc(0, 2)), abs(pairs[(3, 4)] - 1),
                *(abs(v) for k, v in pairs.items() if k not in ((1, 2), (3, 4))))
    M = melnikov_quadrature(H, mu).M
    pred = nu * abs(M) / 2
    out = [("variational pairings", drift <= 1e-20, f"max defect {float(drift):.2e}")]
    if pred > 0:
        rel = abs(abs(m.theta[0]) / pred - 1)
        out.append(("splitting vs Melnikov", rel <= 1e-3, f"relative difference {float(rel):.2e}"))
    conj = abs(m.theta[1] - mpc(m.theta[0]).conjugate())
    out.append(("theta2 = conj(theta1)", conj <= 1e-20 * (1 + abs(m.theta[0])),
                f"{float(conj):.2e}"))
    null = compute_splitting(H, mu, 0, default_config(128), window=False).measurement
    out.append(("integrable null test", null.E_e1 <= max(null.noise_floor, mpf(1e-50)),
                f"E_e1 {float(null.E_e1):.2e}"))
    return out


def check_melnikov():
    from .melnikov import melnikov_profile_quadrature, melnikov_residue_exact
    worst = mpf(0)
    for m in (1, 2, 3):
        for eps in ("0.3", "0.5"):
            q = melnikov_profile_quadrature(m, 1, 1, mpf(eps)).M
            r = melnikov_residue_exact(m, 1, 1, mpf(eps))
            worst = max(worst, abs(q - r) / abs(q))
    return "Melnikov quadrature vs residue", worst <= 1e-8, f"max relative {float(worst):.2e}"


def check_stokes(H):
    from .stokes import compute_stokes
    nul = compute_stokes(H, 0, tau_match=30).result
    out = [("Stokes null test", abs(nul.b0) == 0, f"|b0| {float(abs(nul.b0)):.2e}")]
    r = compute_stokes(H, mpf("0.01"), tau_match=30).result
    rate = r.fit.get("rate")
    ok = rate is not None and abs(rate - 1) < mpf("0.2")
    out.append(("Stokes convergence rate", ok, f"rate {float(rate or 0):.3f}"))
    return out


def run_checks(model="cubic", quick=True):
    H = _load(model)
    results = []
    with working_precision(128):
        mu = mpf("0.01")
        results.append(check_formal(H))
        results.append(check_laurent(H))
        results.append(check_period())
        results.append(check_equilibrium(H, mu, mpf("0.01")))
        results.extend(check_splitting(H, mpf("0.05")))
        results.append(check_melnikov())
    if not quick:
        with working_precision(192):
            results.extend(check_stokes(H))
    return [(n, bool(p), d) for n, p, d in results]
