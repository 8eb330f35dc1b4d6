"""
First-order (in nu) predictions of the splitting.

The Melnikov integral is

    M = i * int exp(i Phi(t)) (dR/dx2 - i dR/dy2) dt,
    Phi(t) = int_0^t dV/dI(x0(s), 0) ds,

taken along the separatrix ``x0`` of the integrable system with the
equilibrium translated to the origin.  For cubic potentials the separatrix
is ``x0 = x_s + A z(lambda t)`` with ``z = 1/cosh^2(s/2)`` and the integral
can be evaluated exactly by residues at ``s = i pi``.
"""
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import gmpy2
import mpmath

from .formal import Laurent, w_profile, z_laurent
from .hamiltonian import PolyHamiltonian, Poly, find_equilibrium
from .numeric import from_mpmath, mpc, mpf, to_mpmath


@dataclass(frozen=True)
class MelnikovResult:
    M: object
    method: str
    mu: object = None
    eps: object = None
    error: object = None
    omega: object = None
    amplitude: object = None


# ---------------------------------------------------------------------------
# closed forms


def melnikov_residue(m, c0, omega, eps):
    """Leading-order closed form for R = c0 x1^m x2 with x0 = eps^2 z(s).

    Returns ``2 pi (-1)^(m-1) c0 omega^(2m-1) 2^(2m)
    / ((2m-1)! (exp(pi omega/eps) + exp(-pi omega/eps)))``.  This keeps only
    the leading Laurent term of ``z^m`` at the pole; see
    ``melnikov_residue_exact`` for the full residue.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    omega, eps, c0 = mpf(omega), mpf(eps), mpf(c0)
    pi = gmpy2.const_pi()
    x = pi * omega / eps
    num = 2 * pi * (-1) ** (m - 1) * c0 * omega ** (2 * m - 1) * 4 ** m
    return num / (factorial(2 * m - 1) * (gmpy2.exp(x) + gmpy2.exp(-x)))


def _zprime_laurent(hi):
    return z_laurent(hi + 1).derivative()


def residue_integral(terms, omega, lam):
    """int_R exp(i omega t) G(z(lam t), z'(lam t)) dt by residues.

    Parameters
    ----------
    terms : dict
        ``{(b, j): coeff}`` for G = sum coeff z'^b z^j with b in {0, 1} and
        j + b >= 1 (G must vanish as t -> +-inf).
    omega, lam : positive reals

    Notes
    -----
    With ``s = lam t`` the integrand is 2 pi i-periodic up to the factor
    ``exp(-2 pi omega / lam)``; summing the residues at ``s = i pi (2k+1)``
    gives ``2 pi i r / (lam (exp(pi omega/lam) - exp(-pi omega/lam)))`` with
    ``r`` the residue of ``exp(i omega sigma / lam) G`` at ``sigma = 0``.
    """
    omega, lam = mpf(omega), mpf(lam)
    laurent = {}
    for (b, j), coeff in terms.items():
        if j + b < 1:
            raise ValueError("integrand must vanish at the saddle")
        term = _z_power(j, 3 * b)
        if b:
            term = term * _zprime_laurent(2 * j + 2)
        for power, c in term.t.items():
            if power < 0:
                laurent[power] = laurent.get(power, 0) + mpc(coeff) * mpf(c)
    a = gmpy2.mpc(0, omega / lam)
    res = gmpy2.mpc(0)
    for power, c in laurent.items():
        n = -power - 1
        res += c * a ** n / factorial(n)
    pi = gmpy2.const_pi()
    x = pi * omega / lam
    return 2 * pi * gmpy2.mpc(0, 1) * res / (lam * (gmpy2.exp(x) - gmpy2.exp(-x)))


def _z_power(j, hi):
    out = Laurent({0: 1}, hi + 2 * j)
    if j:
        zz = z_laurent(hi + 2 * j)
        for _ in range(j):
            out = out * zz
    return out


def melnikov_residue_exact(m, c0, omega, eps, amplitude=1):
    """Exact residue value of M for R = c0 x1^m x2 along x0 = A eps^2 z(eps t).

    ``M = i c0 A^m eps^(2m) int exp(i omega t) z(eps t)^m dt``, with the
    integral summed over all poles ``s = i pi (2k + 1)`` in the upper half
    plane, which gives the denominator ``exp(pi omega/eps) -
    exp(-pi omega/eps)``.
    """
    if m < 1:
        raise ValueError("m must be a positive integer")
    eps = mpf(eps)
    A = mpf(amplitude)
    val = residue_integral({(0, m): 1}, omega, eps)
    return gmpy2.mpc(0, 1) * mpf(c0) * (A * eps * eps) ** m * val


def melnikov_profile_quadrature(m, c0, omega, eps, amplitude=1, T=None):
    """Direct tanh-sinh quadrature of M for R = c0 x1^m x2 on x0 = A eps^2 z.

    The interval [-T, T] (default T = 40/eps) is split at multiples of the
    forcing period so every panel sees at most one oscillation.
    """
    omega, eps, c0, A = (to_mpmath(mpf(v)) for v in (omega, eps, c0, amplitude))
    T = 40 / eps if T is None else to_mpmath(mpf(T))
    scale = c0 * (A * eps * eps) ** m

    def f(t):
        s = eps * t
        z = 1 / mpmath.cosh(s / 2) ** 2
        return mpmath.expj(omega * t) * z ** m

    val, err = _panel_quad(f, T, omega)
    M = 1j * scale * val
    return MelnikovResult(from_mpmath(mpmath.mpc(M)), "quadrature", eps=from_mpmath(eps),
                          error=from_mpmath(abs(scale) * err), omega=from_mpmath(omega),
                          amplitude=from_mpmath(A))


def _panel_quad(f, T, omega):
    period = 2 * mpmath.pi / omega
    n = int(mpmath.ceil(T / period))
    edges = [-n * period + k * period for k in range(2 * n + 1)]
    total, err = mpmath.mpf(0), mpmath.mpf(0)
    for a, b in zip(edges, edges[1:]):
        v, e = mpmath.quad(f, [a, b], error=True, method="tanh-sinh")
        total += v
        err += e
    return total, err


# ---------------------------------------------------------------------------
# model-based integral


def _poly1(coeffs):
    """dict power -> coeff helpers for polynomials in one variable."""
    return {k: v for k, v in coeffs.items() if v != 0}


@dataclass(frozen=True)
class SeparatrixProfile:
    """Data of the integrable separatrix of y^2/2 + V(x, 0)."""
    x_saddle: object
    lam: object
    omega: object
    amplitude: object
    cubic: bool
    V: dict
    dVdI: dict


def _split_model(H, mu):
    """Integrable part V(x,0), dV/dI(x,0) and the nu-linear perturbation."""
    mu_f = mu if isinstance(mu, (int, Fraction)) else mpf(mu)
    V, W = {}, {}
    R = {}
    for (i1, j1, i2, j2, km, kn), c in H.terms.items():
        val = c * mu_f ** km if isinstance(mu_f, (int, Fraction)) else mpf(c) * mu_f ** km
        if kn == 0:
            if j1 == 0 and i2 == 0 and j2 == 0:
                V[i1] = V.get(i1, 0) + val
            elif j1 == 0 and (i2, j2) == (2, 0):
                W[i1] = W.get(i1, 0) + 2 * val
            elif (j1, i2, j2) == (2, 0, 0) and i1 == 0:
                if c != Fraction(1, 2) or km:
                    raise ValueError("kinetic term must be y1^2/2")
        elif kn == 1:
            key = (i1, j1, i2, j2)
            R[key] = R.get(key, 0) + val
    return _poly1(V), _poly1(W), Poly(R, 4)


def separatrix_profile(H, mu):
    V, W, _ = _split_model(H, mu)
    eq = find_equilibrium(H.nu_free(), mu, 0)
    xs = eq.location[0]
    deg = max(V)
    cubic = deg == 3
    A = None
    if cubic:
        A = eq.lam ** 2 / (2 * mpf(V[3]))
    return SeparatrixProfile(xs, eq.lam, eq.omega, A, cubic, V, W)


def _eval1(poly, x):
    acc = 0
    for k, c in poly.items():
        acc = acc + mpf(c) * x ** k
    return acc


def _forcing(R, W, xs, omega):
    """g(x1, y1) = (dR/dx2 - i dR/dy2)(x1, y1, 0, 0) corrected by the O(nu)
    shift of the equilibrium."""
    Rx2, Ry2 = R.diff(2), R.diff(3)
    p0 = [xs, 0, 0, 0]
    gx0, gy0 = Rx2(p0), Ry2(p0)

    def g(x, y):
        pt = [x, y, 0, 0]
        ratio = _eval1(W, x) / omega
        return (Rx2(pt) - gx0 * ratio) - gmpy2.mpc(0, 1) * (Ry2(pt) - gy0 * ratio)
    return g


def melnikov_quadrature(H, mu, T=None, method=None):
    """M for the nu-linear part of ``H`` along the separatrix at ``mu``.

    Parameters
    ----------
    H : PolyHamiltonian
        ``y1^2/2 + V(x1, I)`` plus terms linear in nu (the perturbation R).
    mu : real
    T : real, optional
        Half-width of the integration window, default 40/lambda.
    method : {"closed", "ode"}, optional
        Separatrix evaluation: closed form (cubic V) or co-integration of
        the phase along a numerically integrated separatrix.  Defaults to
        the closed form when available.
    """
    prof = separatrix_profile(H, mu)
    _, W, R = _split_model(H, mu)
    if R.is_zero() or (R.diff(2).is_zero() and R.diff(3).is_zero()):
        return MelnikovResult(gmpy2.mpc(0), "quadrature", mu, prof.lam, mpf(0), prof.omega,
                              prof.amplitude)
    method = method or ("closed" if prof.cubic else "ode")
    T = mpf(40) / prof.lam if T is None else mpf(T)
    g = _forcing(R, W, prof.x_saddle, prof.omega)
    if method == "closed":
        if not prof.cubic:
            raise ValueError("closed-form separatrix needs a cubic potential")
        return _closed_quadrature(prof, W, g, T, mu)
    return _ode_quadrature(H, mu, prof, W, R, T)


def _closed_quadrature(prof, W, g, T, mu):
    lam, A, xs = (to_mpmath(v) for v in (prof.lam, prof.amplitude, prof.x_saddle))
    # dV/dI(xs + A z, 0) = sum beta_l z^l
    beta = {}
    for k, c in W.items():
        for l in range(k + 1):
            coef = mpmath.binomial(k, l) * to_mpmath(mpf(c)) * xs ** (k - l) * A ** l
            beta[l] = beta.get(l, 0) + coef
    beta0 = beta.get(0, mpmath.mpf(0))
    prof_w = {l: [to_mpmath(mpf(a)) for a in w_profile(l)] for l in beta if l >= 1}

    def phase(t):
        s = lam * t
        ph = beta0 * t
        if prof_w:
            ch, sh = mpmath.cosh(s / 2), mpmath.sinh(s / 2)
            S = lambda j: sh / ch ** (2 * j + 1)  # noqa: E731
            for l, w in prof_w.items():
                ph += beta[l] * sum(a * S(j) for j, a in enumerate(w)) / lam
        return ph

    def f(t):
        s = lam * t
        ch = mpmath.cosh(s / 2)
        z = 1 / ch ** 2
        zp = -mpmath.sinh(s / 2) / ch ** 3
        x = from_mpmath(xs + A * z)
        y = from_mpmath(A * lam * zp)
        return mpmath.expj(phase(t)) * to_mpmath(mpc(g(x, y)))

    val, err = _panel_quad(f, to_mpmath(T), beta0)
    M = mpmath.mpc(0, 1) * val
    return MelnikovResult(from_mpmath(M), "quadrature", mu, prof.lam, from_mpmath(err),
                          prof.omega, prof.amplitude)


def _ode_quadrature(H, mu, prof, W, R, T):
    from .ode import ComplexPath, IntegratorConfig, PolySystem, integrate_system
    from .numeric import current_precision

    V = prof.V
    xs = prof.x_saddle
    apex = _apex(V, xs)
    # state (x, y, E, I): x' = y, y' = -V'(x), E' = i W(x) E, I' = E g(x, y)
    rhs = [{(0, 1, 0, 0): 1}, {}, {}, {}]
    for k, c in V.items():
        if k >= 1:
            rhs[1][(k - 1, 0, 0, 0)] = rhs[1].get((k - 1, 0, 0, 0), 0) - k * mpf(c)
    I1 = gmpy2.mpc(0, 1)
    for k, c in W.items():
        rhs[2][(k, 0, 1, 0)] = I1 * mpf(c)
    Rx2, Ry2 = R.diff(2), R.diff(3)
    p0 = [xs, 0, 0, 0]
    gx0, gy0 = Rx2(p0), Ry2(p0)
    for (i1, j1, i2, j2), c in Rx2.terms.items():
        if i2 == 0 and j2 == 0:
            key = (i1, j1, 1, 0)
            rhs[3][key] = rhs[3].get(key, 0) + mpf(c)
    for (i1, j1, i2, j2), c in Ry2.terms.items():
        if i2 == 0 and j2 == 0:
            key = (i1, j1, 1, 0)
            rhs[3][key] = rhs[3].get(key, 0) - I1 * mpf(c)
    for k, c in W.items():
        key = (k, 0, 1, 0)
        rhs[3][key] = rhs[3].get(key, 0) - (gx0 - I1 * gy0) * mpf(c) / prof.omega
    system = PolySystem(rhs, [(0, 2, "base"), (2, 4, None)])
    system.convert(mpc)
    prec = current_precision()
    cfg = IntegratorConfig(precision_bits=prec, abs_tol=2.0 ** (-prec + 24),
                           rel_tol=2.0 ** (-prec + 24), blowup=1e12)
    start = [mpc(apex), mpc(0), mpc(1), mpc(0)]
    ends = []
    for sign in (1, -1):
        tr = integrate_system(system, start, ComplexPath((0, sign * T)), cfg, record=False)
        ends.append(tr.end[1][3])
    M = I1 * (ends[0] - ends[1])
    tail = abs(_eval1(V, apex) * 0) + gmpy2.exp(-prof.lam * T)
    return MelnikovResult(M, "ode", mu, prof.lam, tail, prof.omega, prof.amplitude)


def _apex(V, xs):
    """Turning point of the separatrix: V(x) = V(xs), x != xs."""
    deg = max(V)
    coeffs = [to_mpmath(mpf(V.get(k, 0))) for k in range(deg, -1, -1)]
    vs = mpmath.polyval(coeffs, to_mpmath(xs))
    coeffs[-1] -= vs
    roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)
    xs_m = to_mpmath(xs)
    best = None
    for r in roots:
        if abs(mpmath.im(r)) > mpmath.mpf(10) ** (-mpmath.mp.dps // 2):
            continue
        r = mpmath.re(r)
        if abs(r - xs_m) < mpmath.mpf(10) ** (-mpmath.mp.dps // 3):
            continue
        mid = (r + xs_m) / 2
        if mpmath.polyval(coeffs, mid) >= 0:
            continue
        if best is None or abs(r - xs_m) < abs(best - xs_m):
            best = r
    if best is None:
        raise ArithmeticError("no separatrix turning point")
    # polish
    x = from_mpmath(best)
    dV = {k - 1: k * c for k, c in V.items() if k}
    for _ in range(20):
        x = x - (_eval1(V, x) - _eval1(V, xs)) / _eval1(dV, x)
    return x


def melnikov_model_residue(H, mu):
    """Exact residue value of M for a cubic potential with constant dV/dI.

    The forcing must be polynomial in (x1, y1) at x2 = y2 = 0.
    """
    prof = separatrix_profile(H, mu)
    _, W, R = _split_model(H, mu)
    if not prof.cubic:
        raise ValueError("residue evaluation needs a cubic potential")
    if any(k > 0 for k in W):
        raise ValueError("residue evaluation needs dV/dI independent of x1")
    A, lam, xs = prof.amplitude, prof.lam, prof.x_saddle
    Rx2, Ry2 = R.diff(2), R.diff(3)
    I1 = gmpy2.mpc(0, 1)
    G = {}
    for poly, factor in ((Rx2, 1), (Ry2, -I1)):
        for (i1, j1, i2, j2), c in poly.terms.items():
            if i2 or j2:
                continue
            # x = xs + A z, y = A lam z'; z'^2 = z^2 - z^3
            xpow = _binomial_z(i1, xs, A)
            ypow = _zprime_power(j1, A * lam)
            for (b, j), v in _mul_zz(xpow, ypow).items():
                G[(b, j)] = G.get((b, j), 0) + factor * mpf(c) * v
    G = {k: v for k, v in G.items() if k != (0, 0)}
    val = residue_integral(G, prof.omega, lam)
    return MelnikovResult(I1 * val, "residue", mu, lam, mpf(0), prof.omega, A)


def _binomial_z(n, xs, A):
    out = {}
    for l in range(n + 1):
        c = mpmath.binomial(n, l)
        out[(0, l)] = mpf(to_mpmath(1) * c) * xs ** (n - l) * A ** l
    return out


def _zprime_power(n, scale):
    # (z')^n = z'^(n mod 2) (z^2 - z^3)^(n // 2)
    poly = {0: 1}
    for _ in range(n // 2):
        nxt = {}
        for k, v in poly.items():
            nxt[k + 2] = nxt.get(k + 2, 0) + v
            nxt[k + 3] = nxt.get(k + 3, 0) - v
        poly = nxt
    b = n % 2
    return {(b, k): v * scale ** n for k, v in poly.items()}


def _mul_zz(a, b):
    out = {}
    for (b1, j1), v1 in a.items():
        for (b2, j2), v2 in b.items():
            if b1 + b2 == 2:
                for dj, f in ((2, 1), (3, -1)):
                    key = (0, j1 + j2 + dj)
                    out[key] = out.get(key, 0) + f * v1 * v2
            else:
                key = (b1 + b2, j1 + j2)
                out[key] = out.get(key, 0) + v1 * v2
    return out


# ---------------------------------------------------------------------------
# derivative of the Stokes constant


@dataclass(frozen=True)
class StokesDerivative:
    """Derivative of the Stokes constant at nu = 0.

    Attributes
    ----------
    integral : complex
        ``int exp(i omega0 s) d_{zbar2} R0(X0(s)) ds`` along Im s < 0.
    pairing : complex
        The same quantity in the normalization of ``Omega(delta0, eta0)``
        with ``eta0 ~ exp(i omega0 tau)(0, 0, 1, i)``, equal to
        ``-sqrt(2) * integral``.
    """
    integral: object
    pairing: object
    informational: str = ""


def _inner_forcing_laurent(R0, v03):
    """Laurent coefficients of d_{zbar2} R0 at X0 = (k s^-2, -2k s^-3, 0, 0)."""
    kappa = -2 / Fraction(v03)
    Rx2, Ry2 = R0.diff(2), R0.diff(3)
    sqrt2 = gmpy2.sqrt(mpf(2))
    out = {}
    for poly, factor in ((Rx2, gmpy2.mpc(1)), (Ry2, gmpy2.mpc(0, 1))):
        for (i1, j1, i2, j2), c in poly.terms.items():
            if i2 or j2:
                continue
            power = -2 * i1 - 3 * j1
            coef = mpf(Fraction(c) * kappa ** i1 * (-2 * kappa) ** j1) if isinstance(
                c, (int, Fraction)) else mpf(c) * mpf(kappa) ** i1 * mpf(-2 * kappa) ** j1
            out[power] = out.get(power, 0) + factor * coef / sqrt2
    return out


def stokes_derivative(R0, omega0, v03=-1):
    """b0'(0) for H = y1^2/2 + omega0 I + v03 x1^3 + nu R0, by residues.

    Parameters
    ----------
    R0 : Poly or PolyHamiltonian
        Perturbation in (x1, y1, x2, y2); a PolyHamiltonian contributes its
        nu-linear terms at mu = 0.
    """
    if isinstance(R0, PolyHamiltonian):
        R0 = Poly({k[:4]: v for k, v in R0.terms.items() if k[5] == 1 and k[4] == 0}, 4)
    lau = _inner_forcing_laurent(R0, v03)
    omega0 = mpf(omega0)
    a = gmpy2.mpc(0, omega0)
    res = gmpy2.mpc(0)
    for power, c in lau.items():
        if power <= -1:
            n = -power - 1
            res += c * a ** n / factorial(n)
    val = 2 * gmpy2.const_pi() * gmpy2.mpc(0, 1) * res
    note = "" if lau else "perturbation does not depend on zbar2"
    return StokesDerivative(val, -gmpy2.sqrt(mpf(2)) * val, note)


def stokes_derivative_quadrature(R0, omega0, v03=-1, height=1):
    """Cross-check of ``stokes_derivative`` by oscillatory quadrature on Im s = -height."""
    if isinstance(R0, PolyHamiltonian):
        R0 = Poly({k[:4]: v for k, v in R0.terms.items() if k[5] == 1 and k[4] == 0}, 4)
    lau = {k: to_mpmath(v) for k, v in _inner_forcing_laurent(R0, v03).items()}
    if not lau:
        return gmpy2.mpc(0)
    w = to_mpmath(mpf(omega0))
    hgt = to_mpmath(mpf(height))

    def f(u):
        s = mpmath.mpc(u, -hgt)
        return mpmath.exp(1j * w * s) * sum(c * s ** p for p, c in lau.items())

    right = mpmath.quadosc(f, [0, mpmath.inf], omega=w)
    left = mpmath.quadosc(lambda u: f(-u), [0, mpmath.inf], omega=w)
    return from_mpmath(mpmath.mpc(right + left))
