"""
Inner equation near the complex singularity and the Stokes constant.

The inner Hamiltonian ``H0`` is the member of the family at which the
saddle-center is born: the equilibrium is degenerate, with a nilpotent
Jordan block on the hyperbolic side and frequency ``omega0`` on the elliptic
side.  Its solutions asymptotic to the equilibrium admit the formal
expansion

    X0(tau) ~ sum_k a_k tau^(-k),   a_2 = alpha n,

and the elliptic variational solution

    eta0(tau) ~ exp(i omega0 tau) sum_k e_k tau^(-k),   e_0 = v.

The two separatrix branches ``X0+`` (from Re tau -> +inf) and ``X0-``
(from Re tau -> -inf) are integrated from ``tau = +-tau_match`` into the
lower half plane and down the imaginary axis; the Stokes constant is

    b0 = lim_{Im tau -> -inf} Omega(X0+ - X0-, eta0).
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import gmpy2

from .hamiltonian import (Poly, PolyHamiltonian, _hamiltonian_eigen_squares,
                          elliptic_eigenvector, symplectic_pair)
from .numeric import det3, mpc, mpf, norm, solve_linear
from .ode import ComplexPath, IntegratorConfig, integrate_flow


def _exact(x):
    """Exact rational value of a binary floating point number."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    n, d = mpf(x).as_integer_ratio()
    return Fraction(int(n), int(d))


# ---------------------------------------------------------------------------
# degenerate member


@dataclass
class InnerHamiltonian:
    """Inner Hamiltonian translated to its degenerate equilibrium.

    Attributes
    ----------
    H0 : PolyHamiltonian
        Parameter-free polynomial (evaluate at mu = nu = 0).
    shift : list
        Location of the degenerate equilibrium in the original coordinates.
    mu_star : real
        Parameter value of the degenerate member (0 when nu = 0 for models
        whose saddle-center is born at mu = 0).
    omega0 : real
    """
    H0: PolyHamiltonian
    shift: list
    mu_star: object
    omega0: object
    nu: object


def _adjugate4(S):
    adj = [[0] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(4):
            minor = [[S[r][c] for c in range(4) if c != i] for r in range(4) if r != j]
            cof = det3(minor)
            adj[i][j] = cof if (i + j) % 2 == 0 else -cof
    return adj


def degenerate_member(H, nu, guess=None, max_iter=100):
    """Solve grad H = 0 and det H'' = 0 for (x, mu) at fixed nu.

    Newton's method in the five unknowns (x1, y1, x2, y2, mu), started at
    the origin with mu = 0 unless ``guess`` is given.
    """
    P = H.with_mu_variable(nu if nu == 0 else mpf(nu))
    g = [P.diff(i) for i in range(4)]
    S = [[gi.diff(j) for j in range(4)] for gi in g]
    dS = [[[S[a][b].diff(k) for k in range(5)] for b in range(4)] for a in range(4)]
    J1 = [[gi.diff(k) for k in range(5)] for gi in g]
    z = [mpf(0)] * 5 if guess is None else [mpf(v) for v in guess]
    tol = mpf(2) ** (-gmpy2.get_context().precision + 16)
    for _ in range(max_iter):
        Sv = [[S[a][b](z) for b in range(4)] for a in range(4)]
        F = [gi(z) for gi in g]
        adj = _adjugate4(Sv)
        F.append(sum(Sv[0][b] * adj[b][0] for b in range(4)))
        J = [[J1[i][k](z) for k in range(5)] for i in range(4)]
        J.append([sum(adj[b][a] * dS[a][b][k](z) for a in range(4) for b in range(4))
                  for k in range(5)])
        step = solve_linear(J, F)
        z = [a - b for a, b in zip(z, step)]
        if norm(step) <= tol * (1 + norm(z)):
            break
    else:
        raise ArithmeticError("degenerate equilibrium iteration did not converge")
    return z[:4], z[4]


def inner_hamiltonian(H, nu):
    """Translate H to its degenerate member, returning an InnerHamiltonian."""
    x, mu_s = degenerate_member(H, nu)
    xs = [_exact(v) for v in x]
    mus = _exact(mu_s)
    nus = _exact(nu)
    P = H.specialize(mus, nus)
    out = {}
    for (i1, j1, i2, j2), c in P.terms.items():
        # expand c (X + s)^e for every variable
        parts = [[(k, comb(e, k) * s ** (e - k)) for k in range(e + 1)]
                 for e, s in zip((i1, j1, i2, j2), xs)]
        for a, ca in parts[0]:
            for b, cb in parts[1]:
                for d, cd in parts[2]:
                    for e, ce in parts[3]:
                        if a + b + d + e == 0:
                            continue
                        key = (a, b, d, e, 0, 0)
                        out[key] = out.get(key, 0) + c * ca * cb * cd * ce
    # drop linear terms left by rounding of the shift
    for key in [k for k in out if sum(k[:4]) == 1]:
        out.pop(key)
    H0 = PolyHamiltonian(out, {})
    A = _linear_matrix(H0)
    _, om2 = _hamiltonian_eigen_squares(A)
    return InnerHamiltonian(H0, [mpf(v) for v in xs], mpf(mus), gmpy2.sqrt(om2), nu)


def _linear_matrix(H0):
    P = H0.specialize(0, 0)
    S = [[mpf(0)] * 4 for _ in range(4)]
    for k, c in P.terms.items():
        if sum(k) != 2:
            continue
        idx = [i for i, e in enumerate(k) for _ in range(e)]
        a, b = idx
        if a == b:
            S[a][a] = 2 * mpf(c)
        else:
            S[a][b] = S[b][a] = mpf(c)
    return [S[1], [-v for v in S[0]], S[3], [-v for v in S[2]]]


# ---------------------------------------------------------------------------
# formal series in 1/tau


def _series_mul(a, b, n):
    out = [0] * (n + 1)
    for i, x in enumerate(a[:n + 1]):
        if x == 0:
            continue
        for j in range(0, n + 1 - i):
            if j >= len(b):
                break
            out[i + j] += x * b[j]
    return out


def _poly_on_series(poly, X, n):
    """Coefficients 0..n of poly(X) for series X (lists indexed by power)."""
    powers = [[[1] + [0] * n] for _ in range(len(X))]
    out = [0] * (n + 1)
    for exps, c in poly.terms.items():
        term = [c] + [0] * n
        for i, e in enumerate(exps):
            if e:
                pw = powers[i]
                while len(pw) <= e:
                    pw.append(_series_mul(pw[-1], X[i], n))
                term = _series_mul(term, pw[e], n)
        out = [u + v for u, v in zip(out, term)]
    return out


def _split_linear(poly):
    """(linear part, higher-order part) of a polynomial without constant."""
    lin = {k: v for k, v in poly.terms.items() if sum(k) == 1}
    hi = {k: v for k, v in poly.terms.items() if sum(k) >= 2}
    return Poly(lin, poly.nvars), Poly(hi, poly.nvars)


def _matvec(M, v):
    return [sum(M[i][j] * v[j] for j in range(len(v))) for i in range(len(M))]


@dataclass
class InnerSeries:
    """Formal expansions of X0 and eta0 at tau = infinity.

    Attributes
    ----------
    a : list
        ``a[k]`` is the x-coordinate coefficient of tau^(-k) in X0 (real).
    e : list
        ``e[k]`` is the coefficient of tau^(-k) in exp(-i omega0 tau) eta0.
    basis : list
        Columns n, g, v, conj(v) of the Jordan/elliptic basis.
    alpha : real
        Leading amplitude, X0 ~ alpha n tau^(-2).
    resonance_residual : real
        Compatibility defect at the time-shift resonance (should vanish).
    """
    a: list
    e: list
    basis: list
    alpha: object
    omega0: object
    resonance_residual: object

    def x(self, tau, order=None):
        return _eval_series(self.a, tau, order)

    def eta(self, tau, order=None):
        vals, err = _eval_series(self.e, tau, order)
        ph = gmpy2.exp(gmpy2.mpc(0, 1) * self.omega0 * tau)
        return [ph * v for v in vals], err * abs(ph)


def _eval_series(coeffs, tau, order=None):
    """Sum with optimal truncation; returns (value, size of last term kept)."""
    tau = mpc(tau)
    inv = 1 / tau
    n = len(coeffs) - 1 if order is None else min(order, len(coeffs) - 1)
    acc = [mpc(0)] * 4
    p = mpc(1)
    best = None
    last = mpf(0)
    for k in range(n + 1):
        term = [p * mpc(c) for c in coeffs[k]]
        size = norm(term)
        if k > 4 and best is not None and size > best:
            break
        if size > 0:
            best = size if best is None else min(best, size)
        acc = [u + t for u, t in zip(acc, term)]
        last = size
        p *= inv
    return acc, last


def _jordan_basis(A, omega0):
    """Columns (n, g, v, conj v) with A g = n, A n = 0, A v = i omega0 v."""
    A2 = [[sum(A[i][k] * A[k][j] for k in range(4)) for j in range(4)] for i in range(4)]
    P = [[A2[i][j] + (omega0 * omega0 if i == j else 0) for j in range(4)]
         for i in range(4)]
    # columns of A^2 + omega0^2 span the generalized kernel
    best, size = None, -1
    for j in range(4):
        col = [P[i][j] for i in range(4)]
        im = _matvec(A, col)
        s = norm(im) / (norm(col) or 1)
        if norm(col) > 0 and s > size:
            best, size = col, s
    g = best
    n = _matvec(A, g)
    scale = abs(n[0]) if abs(n[0]) > 0 else norm(n)
    if n[0] < 0:
        scale = -scale
    n = [c / scale for c in n]
    g = [c / scale for c in g]
    v = elliptic_eigenvector(A, omega0)
    return [[mpc(c) for c in n], [mpc(c) for c in g], v, [z.conjugate() for z in v]]


def _inverse(B):
    cols = []
    for j in range(4):
        e = [mpc(1) if i == j else mpc(0) for i in range(4)]
        cols.append(solve_linear(B, e))
    return [[cols[j][i] for j in range(4)] for i in range(4)]


def inner_series(inner, order=40):
    """Formal expansions of X0 and eta0 through tau^(-order).

    Raises ArithmeticError when the time-shift resonance is incompatible
    (logarithmic terms would be required).
    """
    H0 = inner.H0
    w0 = mpf(inner.omega0)
    P = H0.specialize(0, 0)
    g = [P.diff(i) for i in range(4)]
    F = [g[1], g[0].map_coefficients(lambda c: -c), g[3], g[2].map_coefficients(lambda c: -c)]
    F = [f.map_coefficients(mpf) for f in F]
    NL = [_split_linear(f)[1] for f in F]
    A = _linear_matrix(H0)
    cols = _jordan_basis(A, w0)
    B = [[cols[j][i] for j in range(4)] for i in range(4)]
    Binv = _inverse(B)
    iw = gmpy2.mpc(0, w0)
    N = order + 2
    Y = [[mpc(0)] * 4 for _ in range(N + 1)]

    def to_x(upto):
        X = [[0] * (upto + 1) for _ in range(4)]
        for k in range(2, upto + 1):
            xk = _matvec(B, Y[k])
            for i in range(4):
                X[i][k] = xk[i].real
        return X

    def nl(m, upto):
        X = to_x(upto)
        vals = [_poly_on_series(f, X, m)[m] for f in NL]
        return _matvec(Binv, [mpc(v) for v in vals])

    # leading amplitude from the tau^-4 balance: 6 alpha = alpha^2 Q_g(n)
    Y[2] = [mpc(1), mpc(0), mpc(0), mpc(0)]
    qg = nl(4, 2)[1]
    alpha = 6 / qg
    if abs(alpha.imag) > abs(alpha) * mpf(2) ** (-gmpy2.get_context().precision // 2):
        raise ArithmeticError("complex leading amplitude")
    alpha = mpc(alpha.real)
    Y[2] = [alpha, mpc(0), mpc(0), mpc(0)]
    n3 = nl(3, 2)
    Y[3] = [mpc(0), -2 * alpha - n3[0], (-2 * Y[2][2] - n3[2]) / iw,
            (-2 * Y[2][3] - n3[3]) / (-iw)]
    resid = mpf(0)
    for j in range(3, N - 1):
        nj1 = nl(j + 1, j - 1)

        def G(p):
            Y[j][0] = mpc(p)
            q = -j * Y[j][0] - nj1[0]
            return (j + 1) * q + nl(j + 2, j)[1]

        g0 = G(0)
        slope = G(1) - g0
        if (j + 1) * j == 12:
            resid = abs(g0)
            p = mpc(0)
        else:
            p = -g0 / slope
        Y[j][0] = mpc(p.real)
        Y[j + 1] = [mpc(0), -j * Y[j][0] - nj1[0], (-j * Y[j][2] - nj1[2]) / iw,
                    (-j * Y[j][3] - nj1[3]) / (-iw)]
    scale = max(abs(alpha), 1)
    if resid > scale * mpf(2) ** (-gmpy2.get_context().precision // 2):
        raise ArithmeticError("resonant term incompatible: logarithmic inner series")
    a = [[mpf(0)] * 4 for _ in range(order + 1)]
    for k in range(2, order + 1):
        a[k] = [c.real for c in _matvec(B, Y[k])]

    # variational series: A(tau) = B^-1 DF(X) B = Lambda + sum_{j>=2} A_j tau^-j
    X = [[a[k][i] for k in range(order + 1)] for i in range(4)]
    DF = [[NL[i].diff(j) for j in range(4)] for i in range(4)]
    DFs = [[_poly_on_series(DF[i][j], X, order) for j in range(4)] for i in range(4)]
    Aj = []
    for k in range(order + 1):
        M = [[mpc(DFs[i][j][k]) for j in range(4)] for i in range(4)]
        Aj.append([[sum(Binv[i][r] * sum(M[r][s] * B[s][j] for s in range(4))
                        for r in range(4)) for j in range(4)] for i in range(4)])
    E = [[mpc(0)] * 4 for _ in range(order + 1)]
    E[0] = [mpc(0), mpc(0), mpc(1), mpc(0)]
    for k in range(1, order + 1):
        S = [mpc(0)] * 4
        for j in range(2, k + 1):
            t = _matvec(Aj[j], E[k - j])
            S = [u + w for u, w in zip(S, t)]
        if k >= 2:
            E[k - 1][2] = -S[2] / (k - 1)
        E[k][1] = ((k - 1) * E[k - 1][1] + S[1]) / iw
        E[k][0] = ((k - 1) * E[k - 1][0] + S[0] + E[k][1]) / iw
        E[k][3] = ((k - 1) * E[k - 1][3] + S[3]) / (2 * iw)
    e = [_matvec(B, Ek) for Ek in E[:order]]
    return InnerSeries(a, e, cols, alpha.real, w0, resid)


# ---------------------------------------------------------------------------
# inner solutions


@dataclass
class InnerSolution:
    """Inner separatrix on a path into the lower half plane.

    ``samples`` maps each T in ``T_list`` to the state at tau = -iT (with the
    eta0 column appended on the minus side).
    """
    side: str
    tau_match: object
    samples: dict
    matching_error: object
    path: object
    trajectory: object = None
    energy_error: object = None


@dataclass
class EtaSolution:
    samples: dict
    matching_error: object


def descent_path(side, tau_match, T_list, T_entry=None):
    """Vertices from +-tau_match down to -i T for T in ``T_list``."""
    R = mpf(tau_match)
    T_list = sorted(mpf(t) for t in T_list)
    T1 = T_list[0] if T_entry is None else mpf(T_entry)
    s = 1 if side == "plus" else -1
    verts = [gmpy2.mpc(s * R, 0), gmpy2.mpc(s * R, -T1), gmpy2.mpc(0, -T1)]
    verts += [gmpy2.mpc(0, -t) for t in T_list if t > T1]
    return ComplexPath(tuple(verts))


def _default_cfg(cfg):
    if cfg is not None:
        return cfg
    bits = gmpy2.get_context().precision
    tol = 2.0 ** (-bits + 24)
    return IntegratorConfig(precision_bits=bits, abs_tol=tol, rel_tol=tol)


def solve_inner(inner, side, tau_match, T_list, cfg=None, series=None, with_eta=None):
    """Integrate X0+ (side 'plus') or X0- (side 'minus') down the imaginary axis.

    The minus side also transports eta0 unless ``with_eta`` is False.
    """
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    cfg = _default_cfg(cfg)
    series = series or inner_series(inner)
    with_eta = (side == "minus") if with_eta is None else with_eta
    path = descent_path(side, tau_match, T_list)
    tau0 = path.vertices[0]
    x0, err = series.x(tau0)
    cols = []
    if with_eta:
        eta, eerr = series.eta(tau0)
        cols = [eta]
        err = max(err, eerr)
    tr = integrate_flow(inner.H0, 0, 0, [c.real for c in x0], path, cfg,
                        columns=cols, record=False)
    samples = {}
    for t, state, _ in tr.at_vertices():
        if t.real == 0:
            samples[-t.imag] = state
    F0 = tr.energy
    e_err = max(abs(F0(s[:4])) for s in samples.values()) if F0 else None
    return InnerSolution(side, mpf(tau_match), samples, err, path, tr, e_err)


def solve_eta0(X0_minus):
    """eta0 samples from a minus-side solution integrated with its column."""
    samples = {T: s[4:8] for T, s in X0_minus.samples.items()}
    if not samples or any(len(s) != 4 for s in samples.values()):
        raise ValueError("minus-side solution carries no eta0 column")
    return EtaSolution(samples, X0_minus.matching_error)


# ---------------------------------------------------------------------------
# extrapolation


@dataclass
class StokesResult:
    pairing_samples: list
    b0: object
    fit: dict
    an: list = field(default_factory=list)
    bn: list = field(default_factory=list)
    delta_norms: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def a0(self):
        return gmpy2.norm(mpc(self.b0)) / 2


def assemble_an(bs):
    """a_n = 1/2 sum_k b_k conj(b_{n-k}) (real part) for n < len(bs)."""
    out = []
    for n in range(len(bs)):
        s = sum(mpc(bs[k]) * mpc(bs[n - k]).conjugate() for k in range(n + 1))
        out.append((s / 2).real)
    return out


def _lstsq(rows, rhs):
    n = len(rows[0])
    G = [[sum(r[i] * r[j] for r in rows) for j in range(n)] for i in range(n)]
    h = [sum(r[i] * y for r, y in zip(rows, rhs)) for i in range(n)]
    return solve_linear(G, h)


def fit_pairing(samples, omega0=None):
    """Extrapolate pairing samples v(T) -> b0.

    Differences ``d_j = v_{j+1} - v_j`` are fitted as
    ``log|d| = c + k log T - r T``; the tail beyond the last sample is summed
    as a geometric series with the last complex ratio.

    Returns
    -------
    b0, dict(rate, exponent, residual, ratio, used, unreliable, spread)
    """
    pts = sorted(samples, key=lambda p: p[0])
    T = [mpf(p[0]) for p in pts]
    v = [mpc(p[1]) for p in pts]
    d = [v[j + 1] - v[j] for j in range(len(v) - 1)]
    # keep the decaying prefix of the differences
    keep = 1
    while keep < len(d) and abs(d[keep]) < abs(d[keep - 1]) and abs(d[keep]) > 0:
        keep += 1
    info = {"used": keep + 1, "unreliable": False}
    if keep < 2 or all(abs(x) == 0 for x in d[:keep]):
        info.update(rate=None, exponent=None, residual=None, spread=None,
                    unreliable=keep < 2 and any(abs(x) > 0 for x in d))
        return v[min(keep, len(v) - 1)], info

    def extrap(upto):
        q = d[upto - 1] / d[upto - 2]
        if abs(q) >= 1:
            return v[upto], q
        return v[upto] + d[upto - 1] * q / (1 - q), q

    b0, q = extrap(keep)
    Tm = [(T[j] + T[j + 1]) / 2 for j in range(keep)]
    logs = [gmpy2.log(abs(x)) for x in d[:keep]]
    if keep >= 3:
        rows = [[mpf(1), gmpy2.log(t), -t] for t in Tm]
        c, k, r = _lstsq(rows, logs)
        res = max(abs(c + k * gmpy2.log(t) - r * t - y) for t, y in zip(Tm, logs))
    else:
        k = mpf(0)
        r = (logs[0] - logs[1]) / (Tm[1] - Tm[0])
        res = mpf(0)
    spread = mpf(0)
    if keep >= 3:
        alt, _ = extrap(keep - 1)
        spread = abs(alt - b0)
    info.update(rate=r, exponent=k, residual=res, ratio=q, spread=spread)
    if omega0 is not None and r is not None:
        info["unreliable"] = bool(abs(r / mpf(omega0) - 1) > mpf("0.5"))
    return b0, info


def stokes_b0(X_plus, X_minus, eta0=None, T_list=None, omega0=None):
    """Stokes constant from the two inner solutions and eta0.

    Parameters
    ----------
    X_plus, X_minus : InnerSolution
    eta0 : EtaSolution, optional
        Defaults to the column carried by ``X_minus``.
    """
    eta0 = eta0 or solve_eta0(X_minus)
    Ts = sorted(T_list or X_plus.samples.keys())
    samples, dn = [], []
    for t in Ts:
        d = [a - b for a, b in zip(X_plus.samples[t][:4], X_minus.samples[t][:4])]
        samples.append((t, symplectic_pair(d, eta0.samples[t])))
        dn.append((t, norm(d)))
    b0, info = fit_pairing(samples, omega0)
    return StokesResult(samples, b0, info, delta_norms=dn)


def stokes_bn(n, formal=None):
    """Higher Stokes constants.

    b1 vanishes identically when the parameter series has no eps^2 term:
    then the first inner correction H1 is zero, so X1 = 0 and eta1 = 0 and
    every term of the b1 pairing is zero.  n >= 2 is not implemented.
    """
    if n == 0:
        raise ValueError("use stokes_b0 for n = 0")
    if n == 1:
        if formal is not None and formal.mu[1] != 0:
            raise NotImplementedError("b1 with a nonzero eps^2 parameter term")
        return mpc(0)
    raise NotImplementedError("b_n for n >= 2 is not implemented")


@dataclass
class StokesComputation:
    inner: InnerHamiltonian
    series: InnerSeries
    result: StokesResult
    plus: InnerSolution
    minus: InnerSolution


def compute_stokes(H, nu, tau_match=40, T_list=None, cfg=None, order=None,
                   formal=None, parallel=None):
    """b0, b1 and a0, a1 for the family H at fixed nu.

    Parameters
    ----------
    tau_match : real
        Matching radius on the real tau axis.
    T_list : sequence of reals
        Depths -Im tau at which the pairing is sampled.
    parallel : callable, optional
        ``map``-like callable used to run the two sides concurrently.
    """
    T_list = list(T_list or range(4, 26, 2))
    inner = inner_hamiltonian(H, nu)
    order = order or int(min(max(mpf(inner.omega0) * mpf(tau_match), 12), 60))
    series = inner_series(inner, order)
    cfg = _default_cfg(cfg)
    if parallel is None:
        plus = solve_inner(inner, "plus", tau_match, T_list, cfg, series)
        minus = solve_inner(inner, "minus", tau_match, T_list, cfg, series)
    else:
        plus, minus = parallel(_solve_side, [(inner, s, tau_match, T_list, cfg, series)
                                             for s in ("plus", "minus")])
    res = stokes_b0(plus, minus, T_list=T_list, omega0=inner.omega0)
    b1 = stokes_bn(1, formal)
    res.bn = [res.b0, b1]
    res.an = assemble_an(res.bn)
    res.diagnostics.update({
        "matching_error": max(plus.matching_error, minus.matching_error),
        "energy_error": max(plus.energy_error or 0, minus.energy_error or 0),
        "series_order": order,
        "resonance_residual": series.resonance_residual,
        "omega0": inner.omega0,
        "mu_star": inner.mu_star,
        "alpha": series.alpha,
    })
    return StokesComputation(inner, series, res, plus, minus)


def _solve_side(args):
    return solve_inner(*args)
