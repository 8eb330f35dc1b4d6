"""
Exact-rational formal series for the separatrix loop of the normal form.

The loop is written in the variable ``z = 1/cosh^2(s/2)`` with ``s = eps t``
and ``eps = lambda_mu``.  The identities ``(z')^2 = z^2 - z^3`` and
``z'' = z - 3 z^2 / 2`` reduce every derivative to polynomials in ``z`` and
at most one factor of ``z'``.

Conventions
-----------
* ``x1 = sum_k eps^(2k) p_k(z)``, ``mu = sum_k mu_k eps^(2k)`` (k >= 2) and
  the energy form ``eps^2 (dx/ds)^2 + 2 V(x) + C = 0`` holds order by order
  with ``C = sum_k C_k eps^(2k)`` (the potential is taken without its
  x-independent terms).
* ``y1 = sum_k eps^(2k+1) q_k(s)`` with
  ``q_k = sum_l q_kl sinh(s/2)/cosh^(2l+1)(s/2)``.
* Odd profiles ``S_l(s) = sinh(s/2)/cosh^(2l+1)(s/2)``; ``S_0 = tanh(s/2)``.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import gmpy2

from .numeric import mpc, mpf


# ---------------------------------------------------------------------------
# polynomials in z


class ZPolynomial:
    """Polynomial in z with exact rational coefficients (index = power)."""

    __slots__ = ("c",)

    def __init__(self, coeffs=()):
        c = [Fraction(v) for v in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.c = c

    @classmethod
    def monomial(cls, power, coeff=1):
        return cls([0] * power + [coeff])

    @property
    def degree(self):
        return len(self.c) - 1

    def __getitem__(self, i):
        return self.c[i] if 0 <= i < len(self.c) else Fraction(0)

    def __len__(self):
        return len(self.c)

    def __eq__(self, other):
        if not isinstance(other, ZPolynomial):
            other = ZPolynomial([other])
        return self.c == other.c

    def __hash__(self):
        return hash(tuple(self.c))

    def __add__(self, other):
        if not isinstance(other, ZPolynomial):
            other = ZPolynomial([other])
        n = max(len(self.c), len(other.c))
        return ZPolynomial([self[i] + other[i] for i in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return ZPolynomial([-v for v in self.c])

    def __sub__(self, other):
        return self + (-other if isinstance(other, ZPolynomial) else -Fraction(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, ZPolynomial):
            f = Fraction(other)
            return ZPolynomial([v * f for v in self.c])
        if not self.c or not other.c:
            return ZPolynomial()
        out = [Fraction(0)] * (len(self.c) + len(other.c) - 1)
        for i, a in enumerate(self.c):
            if a:
                for j, b in enumerate(other.c):
                    out[i + j] += a * b
        return ZPolynomial(out)

    __rmul__ = __mul__

    def shift(self, k):
        """Multiply by z^k (k >= 0)."""
        return ZPolynomial([0] * k + self.c) if self.c else ZPolynomial()

    def dz(self):
        return ZPolynomial([i * v for i, v in enumerate(self.c)][1:])

    def __call__(self, z):
        acc = 0
        for v in reversed(self.c):
            acc = acc * z + (mpf(v) if not isinstance(z, Fraction) else v)
        return acc

    def __repr__(self):
        return f"ZPolynomial({[str(v) for v in self.c]})"


Z = ZPolynomial([0, 1])
ZPRIME_SQ = ZPolynomial([0, 0, 1, -1])          # (z')^2 = z^2 - z^3
ZPP = ZPolynomial([0, 1, Fraction(-3, 2)])      # z'' = z - 3/2 z^2


def _series_mul(a, b, order):
    """Product of two e-series of ZPolynomials, truncated after ``order``."""
    out = [ZPolynomial() for _ in range(order + 1)]
    for i, ai in enumerate(a[:order + 1]):
        if not ai.c:
            continue
        for j in range(min(len(b), order + 1 - i)):
            if b[j].c:
                out[i + j] = out[i + j] + ai * b[j]
    return out


def _series_pow_table(x, lmax, order):
    pw = [[ZPolynomial([1])] + [ZPolynomial() for _ in range(order)]]
    for _ in range(lmax):
        pw.append(_series_mul(pw[-1], x, order))
    return pw


def _scalar_series_pow_table(m, kmax, order):
    """Powers of a scalar e-series (list of Fractions)."""
    pw = [[Fraction(1)] + [Fraction(0)] * order]
    for _ in range(kmax):
        prev = pw[-1]
        nxt = [Fraction(0)] * (order + 1)
        for i, a in enumerate(prev):
            if a:
                for j in range(order + 1 - i):
                    if m[j]:
                        nxt[i + j] += a * m[j]
        pw.append(nxt)
    return pw


# ---------------------------------------------------------------------------
# exact linear algebra


def solve_exact(rows, rhs, ncols):
    """Solve a consistent (possibly overdetermined) rational linear system.

    Raises ``ArithmeticError`` when the system is rank deficient in the
    unknowns or inconsistent.
    """
    M = [list(r) + [b] for r, b in zip(rows, rhs)]
    nrows = len(M)
    pivots = []
    r = 0
    for col in range(ncols):
        piv = next((i for i in range(r, nrows) if M[i][col] != 0), None)
        if piv is None:
            raise ArithmeticError("degenerate triangular solve")
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][col]
        M[r] = [v * inv for v in M[r]]
        for i in range(nrows):
            if i != r and M[i][col] != 0:
                f = M[i][col]
                Mi, Mr = M[i], M[r]
                M[i] = [a - f * b for a, b in zip(Mi, Mr)]
        pivots.append(r)
        r += 1
    for i in range(r, nrows):
        if M[i][ncols] != 0:
            raise ArithmeticError("inconsistent system")
    return [M[i][ncols] for i in range(ncols)]


# ---------------------------------------------------------------------------
# formal separatrix


@dataclass(frozen=True)
class FormalSeparatrix:
    """Coefficients of the formal separatrix through order N.

    Attributes
    ----------
    p : list of ZPolynomial
        ``p[k]`` for k = 1..N (``p[0]`` is the zero polynomial).
    q : list of list of Fraction
        ``q[k][l]`` for l = 0..k (``q[k][0] = 0``).
    mu : list of Fraction
        ``mu[k]``, nonzero from k = 2, through k = N + 1.
    C : list of Fraction
        Energy constants ``C[k]`` through k = N + 2.
    """
    p: list
    q: list
    mu: list
    C: list
    order: int
    v: dict = field(default_factory=dict)

    def x_coefficients(self, k):
        return self.p[k]


def _normalize_table(v_coeffs):
    table = {}
    for (k, l), c in v_coeffs.items():
        c = Fraction(c)
        if c != 0:
            table[(int(k), int(l))] = c
    return table


def _energy_series(table, p, mu, order):
    """Coefficients (in e = eps^2) of e (dx/ds)^2 + 2 V(x) up to ``order``.

    ``p`` and ``mu`` are lists indexed by order (missing entries are zero);
    terms of V without x are dropped.
    """
    x = [p[i] if i < len(p) else ZPolynomial() for i in range(order + 1)]
    dx = [xi.dz() for xi in x]
    dx2 = _series_mul(dx, dx, order - 1)
    out = [ZPolynomial() for _ in range(order + 1)]
    for i, t in enumerate(dx2):
        if i + 1 <= order:
            out[i + 1] = out[i + 1] + t * ZPRIME_SQ
    lmax = max((l for (_, l) in table), default=0)
    kmax = max((k for (k, _) in table), default=0)
    xp = _series_pow_table(x, lmax, order)
    m = [mu[i] if i < len(mu) else Fraction(0) for i in range(order + 1)]
    mp = _scalar_series_pow_table(m, kmax, order)
    for (k, l), c in table.items():
        if l == 0:
            continue
        xs, ms = xp[l], mp[k]
        for i in range(order + 1):
            if not ms[i]:
                continue
            f = 2 * c * ms[i]
            for j in range(order + 1 - i):
                if xs[j].c:
                    out[i + j] = out[i + j] + xs[j] * f
    return out


def formal_separatrix(v_coeffs, N=8):
    """Solve the energy-form equation order by order in exact arithmetic.

    Parameters
    ----------
    v_coeffs : dict
        ``{(k, l): v_kl}`` with ``V(x) = sum v_kl mu^k x^l``.
    N : int
        Number of orders of ``p_k`` to compute.

    Returns
    -------
    FormalSeparatrix
    """
    table = _normalize_table(v_coeffs)
    for l in (0, 1, 2):
        if table.get((0, l), 0) != 0:
            raise ValueError(f"v_0{l} must vanish at the bifurcation")
    v03, v11 = table.get((0, 3), 0), table.get((1, 1), 0)
    if v03 * v11 == 0:
        raise ValueError("need v03 * v11 != 0")
    if N < 1:
        raise ValueError("order must be positive")

    p11 = 1 / (2 * v03)
    p10 = -1 / (6 * v03)
    p = [ZPolynomial(), ZPolynomial([p10, p11])]
    mu = [Fraction(0), Fraction(0), -1 / (12 * v03 * v11)]
    C = [Fraction(0)] * 3
    p1 = p[1]
    base = 2 * (3 * v03 * p1 * p1 + v11 * mu[2])
    for n in range(2, N + 1):
        known = _energy_series(table, p, mu, n + 2)[n + 2]
        cols = []
        for l in range(n + 1):
            pn = ZPolynomial.monomial(l)
            cols.append(2 * p11 * pn.dz() * ZPRIME_SQ + base * pn)
        cols.append(2 * v11 * p1)
        cols.append(ZPolynomial([1]))
        neq = n + 3
        width = max(neq, len(known), max(len(c) for c in cols))
        rows = [[c[i] for c in cols] for i in range(width)]
        rhs = [-known[i] for i in range(width)]
        sol = solve_exact(rows, rhs, n + 3)
        p.append(ZPolynomial(sol[:n + 1]))
        mu.append(sol[n + 1])
    # energy constants from the complete series
    energy = _energy_series(table, p, mu, N + 2)
    C = [Fraction(0)] * (N + 3)
    for k in range(3, N + 3):
        poly = energy[k]
        C[k] = -poly[0]
        if any(poly[i] != 0 for i in range(1, len(poly))) and k <= N + 1:
            raise ArithmeticError(f"energy identity fails at order {k}")
    q = [[Fraction(0)]]
    for k in range(1, N + 1):
        q.append([-l * p[k][l] for l in range(k + 1)])
    return FormalSeparatrix(p, q, mu, C, N, table)


def energy_identity_residual(sep, order):
    """Polynomial coefficients of the energy form at ``order`` (should be 0)."""
    e = _energy_series(sep.v, sep.p, sep.mu, order)[order]
    return e + sep.C[order] if order < len(sep.C) else e


def mu_series(sep, eps, kmax=None):
    """sum_{k <= kmax} mu_k eps^(2k)."""
    kmax = len(sep.mu) - 1 if kmax is None else kmax
    e2 = eps * eps
    return sum(sep.mu[k] * e2 ** k for k in range(2, kmax + 1))


def normal_form_residual(sep, eps, s, truncation=None):
    """Residual of the truncated separatrix in y1' = -dV/dx1 at s = eps t.

    Keeps ``p_k`` and ``mu_k`` for k up to ``truncation`` (default: the full
    order).  The x1 equation holds identically, so this is the whole defect;
    it scales like ``v11 mu_{N+1} eps^(2N+2)``.
    """
    n = sep.order if truncation is None else min(truncation, sep.order)
    eps = mpf(eps)
    e2 = eps * eps
    z, _ = _z_and_zprime(s)
    x = sum(e2 ** k * sep.p[k](z) for k in range(1, n + 1))
    # d/ds sinh(s/2) / cosh(s/2)^(2l+1) = (-2l z^l + (2l+1) z^(l+1)) / 2
    ydot = e2 * sum(
        e2 ** k * sum(mpf(sep.q[k][l]) * (-2 * l * z ** l + (2 * l + 1) * z ** (l + 1)) / 2
                      for l in range(1, k + 1))
        for k in range(1, n + 1))
    mu = mpf(mu_series(sep, eps, n))
    dV = sum(mpf(c) * mu ** k * l * x ** (l - 1) for (k, l), c in sep.v.items() if l)
    return ydot + dV


# ---------------------------------------------------------------------------
# odd profiles and the angle series


def w_profile(l):
    """Coefficients of w_l = int_0^s z^l ds over the odd profiles S_0..S_{l-1}.

    Uses w_1 = 2 S_0 and w_l = 2/(2l-1) ((l-1) w_{l-1} + S_{l-1}).
    """
    if l < 1:
        raise ValueError("l >= 1")
    w = [Fraction(2)]
    for k in range(2, l + 1):
        f = Fraction(2, 2 * k - 1)
        w = [f * (k - 1) * a for a in w] + [f]
    return w


@dataclass(frozen=True)
class FormalU:
    """Angle series u = omega_mu t + sum eps^(2k+1) u_k(s).

    ``omega[k]`` are the frequency coefficients and ``u[k][l]`` the
    coefficient of S_l in u_k (l = 0..k).
    """
    omega: list
    u: list
    order: int


def _frequency_series(w_coeffs, sep, order):
    table = _normalize_table(w_coeffs)
    lmax = max((l for (_, l) in table), default=0)
    kmax = max((k for (k, _) in table), default=0)
    x = [sep.p[i] if i < len(sep.p) else ZPolynomial() for i in range(order + 1)]
    xp = _series_pow_table(x, lmax, order)
    m = [sep.mu[i] if i < len(sep.mu) else Fraction(0) for i in range(order + 1)]
    mp = _scalar_series_pow_table(m, kmax, order)
    g = [ZPolynomial() for _ in range(order + 1)]
    for (k, l), c in table.items():
        for i in range(order + 1):
            if mp[k][i]:
                for j in range(order + 1 - i):
                    if xp[l][j].c:
                        g[i + j] = g[i + j] + xp[l][j] * (c * mp[k][i])
    return g


def formal_u(w_coeffs, sep, N=None):
    """Formal angle series from the frequency table ``{(k, l): w_kl}``.

    ``w_kl`` are the coefficients of dV/dI at I = 0, i.e.
    ``dV/dI(x, 0) = sum w_kl mu^k x^l``.  Constants of integration are
    fixed by ``u_k(0) = 0``.
    """
    N = sep.order - 1 if N is None else N
    if N + 1 > sep.order:
        raise ValueError("separatrix order too low for the requested angle order")
    g = _frequency_series(w_coeffs, sep, N + 1)
    omega = [g[n][0] for n in range(N + 2)]
    u = []
    for k in range(N + 1):
        gk = g[k + 1]
        coeffs = [Fraction(0)] * (k + 1)
        for l in range(1, len(gk)):
            if gk[l]:
                for j, a in enumerate(w_profile(l)):
                    coeffs[j] += gk[l] * a
        u.append(coeffs)
    return FormalU(omega, u, N)


@dataclass(frozen=True)
class FormalXi2:
    """xi2 = (0, 0, 1, i) exp(i u);  ``conjugate`` selects xi1."""
    u: FormalU
    direction: tuple = (0, 0, 1, 1j)
    conjugate: bool = False


def formal_xi2(u):
    return FormalXi2(u)


def formal_xi1(u):
    return FormalXi2(u, (0, 0, 1, -1j), True)


# ---------------------------------------------------------------------------
# the algebra spanned by s^a z'^b z^j


class SechAlgebra:
    """Sparse elements sum c * s^a * z'^b * z^j with a >= 0, b in {0, 1}."""

    __slots__ = ("t",)

    def __init__(self, terms=None):
        self.t = {k: Fraction(v) for k, v in (terms or {}).items() if v != 0}

    @classmethod
    def from_z(cls, poly, a=0, b=0, shift=0):
        return cls({(a, b, j + shift): c for j, c in enumerate(poly.c) if c})

    def __add__(self, other):
        out = dict(self.t)
        for k, v in other.t.items():
            out[k] = out.get(k, 0) + v
        return SechAlgebra(out)

    def __sub__(self, other):
        return self + other * (-1)

    def __mul__(self, other):
        if not isinstance(other, SechAlgebra):
            f = Fraction(other)
            return SechAlgebra({k: v * f for k, v in self.t.items()})
        out = {}
        for (a1, b1, j1), c1 in self.t.items():
            for (a2, b2, j2), c2 in other.t.items():
                a, c = a1 + a2, c1 * c2
                if b1 + b2 == 2:
                    for dj, f in ((2, 1), (3, -1)):
                        key = (a, 0, j1 + j2 + dj)
                        out[key] = out.get(key, 0) + c * f
                else:
                    key = (a, b1 + b2, j1 + j2)
                    out[key] = out.get(key, 0) + c
        return SechAlgebra(out)

    __rmul__ = __mul__

    def ds(self):
        out = {}

        def put(k, v):
            out[k] = out.get(k, 0) + v
        for (a, b, j), c in self.t.items():
            if a:
                put((a - 1, b, j), a * c)
            if b == 0:
                if j:
                    put((a, 1, j - 1), j * c)
            else:
                put((a, 0, j + 1), c * (1 + j))
                put((a, 0, j + 2), -c * (Fraction(3, 2) + j))
        return SechAlgebra(out)

    def is_zero(self):
        return not self.t

    def __eq__(self, other):
        return (self - other).is_zero()

    def __call__(self, s):
        z, zp = _z_and_zprime(s)
        total = 0
        for (a, b, j), c in self.t.items():
            term = mpf(c) * (s ** a if a else 1) * (zp if b else 1) * z ** j
            total = total + term
        return total

    def __repr__(self):
        return f"SechAlgebra({ {k: str(v) for k, v in sorted(self.t.items())} })"


def _z_and_zprime(s):
    half = s / 2
    ch = gmpy2.cosh(half)
    sh = gmpy2.sinh(half)
    z = 1 / (ch * ch)
    return z, -sh * z / ch


@dataclass(frozen=True)
class FormalXi4:
    """v_k = c_k(z) s z' + z^(-1) d_{k+2}(z);  xi4 = eps^-4 (v, eps dv/ds, 0, 0)."""
    c: list
    d: list
    secular: list
    order: int

    def v(self, k):
        return (SechAlgebra.from_z(self.c[k], a=1, b=1)
                + SechAlgebra.from_z(self.d[k], shift=-1))


def formal_xi4(sep, N=None):
    """Solve the Wronskian hierarchy for the complementary variational solution.

    The k-th equation is ``sum_{j} (p'_{j+1} v'_{k-j} - p''_{j+1} v_{k-j})
    = delta_{k0}`` (derivatives in s) and ``v_k`` is restricted to the
    shape ``c_k(z) s z' + z^{-1} d_{k+2}(z)`` with deg c_k <= k and
    deg d_{k+2} <= k + 2, which removes the homogeneous solution ``z'``.
    """
    N = sep.order - 1 if N is None else N
    if N + 1 > sep.order:
        raise ValueError("separatrix order too low")
    P = [None] + [SechAlgebra.from_z(sep.p[k]) for k in range(1, N + 2)]
    dP = [None] + [x.ds() for x in P[1:]]
    ddP = [None] + [x.ds() for x in dP[1:]]
    vs, cs, ds, secular = [], [], [], []
    for k in range(N + 1):
        rhs = SechAlgebra({(0, 0, 0): 1}) if k == 0 else SechAlgebra()
        for j in range(1, k + 1):
            vk = vs[k - j]
            rhs = rhs - (dP[j + 1] * vk.ds() - ddP[j + 1] * vk)
        basis = []
        for i in range(k + 1):
            basis.append(SechAlgebra({(1, 1, i): 1}))
        for i in range(k + 3):
            basis.append(SechAlgebra({(0, 0, i - 1): 1}))
        images = [dP[1] * b.ds() - ddP[1] * b for b in basis]
        keys = sorted(set(rhs.t).union(*(im.t for im in images)))
        rows = [[im.t.get(key, Fraction(0)) for im in images] for key in keys]
        sol = solve_exact(rows, [rhs.t.get(key, Fraction(0)) for key in keys], len(basis))
        c = ZPolynomial(sol[:k + 1])
        d = ZPolynomial(sol[k + 1:])
        cs.append(c)
        ds.append(d)
        secular.append(bool(c.c))
        vs.append(SechAlgebra.from_z(c, a=1, b=1) + SechAlgebra.from_z(d, shift=-1))
    return FormalXi4(cs, ds, secular, N)


# ---------------------------------------------------------------------------
# Laurent re-expansion at s = i pi


def z_laurent(hi):
    """Laurent series of z(i pi + sigma) = -1/sinh^2(sigma/2), exact to sigma^hi."""
    n = hi // 2 + 2
    # f(x) = sinh(x)/x with x = sigma/2, as a series in sigma^2
    f = [Fraction(1, factorial(2 * i + 1) * 4 ** i) for i in range(n)]
    inv = [Fraction(0)] * n
    inv[0] = Fraction(1)
    for i in range(1, n):
        inv[i] = -sum(f[j] * inv[i - j] for j in range(1, i + 1))
    inv2 = [sum(inv[j] * inv[i - j] for j in range(i + 1)) for i in range(n)]
    return Laurent({2 * i - 2: -4 * inv2[i] for i in range(n)}, hi)


def z_inverse_laurent(hi):
    """1/z = -sinh^2(sigma/2) = -(cosh(sigma) - 1)/2, exact to sigma^hi."""
    return Laurent({2 * i: -Fraction(1, 2 * factorial(2 * i))
                    for i in range(1, hi // 2 + 1)}, hi)


class Laurent:
    """Truncated Laurent series in a single variable: {power: Fraction}."""

    __slots__ = ("t", "hi")

    def __init__(self, terms, hi):
        self.hi = hi
        self.t = {k: Fraction(v) for k, v in terms.items() if v != 0 and k <= hi}

    def __mul__(self, other):
        if not isinstance(other, Laurent):
            return Laurent({k: v * other for k, v in self.t.items()}, self.hi)
        lo_a = min(self.t, default=0)
        lo_b = min(other.t, default=0)
        hi = min(self.hi + lo_b, other.hi + lo_a)
        out = {}
        for k1, v1 in self.t.items():
            for k2, v2 in other.t.items():
                k = k1 + k2
                if k <= hi:
                    out[k] = out.get(k, 0) + v1 * v2
        return Laurent(out, hi)

    def __add__(self, other):
        hi = min(self.hi, other.hi)
        out = dict(self.t)
        for k, v in other.t.items():
            out[k] = out.get(k, 0) + v
        return Laurent(out, hi)

    def derivative(self):
        return Laurent({k - 1: k * v for k, v in self.t.items() if k}, self.hi - 1)

    def __getitem__(self, k):
        if k > self.hi:
            raise KeyError(f"power {k} beyond truncation {self.hi}")
        return self.t.get(k, Fraction(0))


def poly_of_z_laurent(poly, hi):
    """p(z) as a Laurent series in sigma, exact through sigma^hi."""
    deg = poly.degree
    if deg < 0:
        return Laurent({}, hi)
    zz = z_laurent(hi + 2 * deg)
    acc = Laurent({0: poly[deg]}, hi + 2 * deg)
    for i in range(deg - 1, -1, -1):
        acc = acc * zz + Laurent({0: poly[i]}, acc.hi)
    assert acc.hi >= hi
    return Laurent(acc.t, hi)


def profile_laurent(j, hi):
    """S_j(i pi + sigma) exact through sigma^hi, using S_j = -z^(j-1) z'."""
    zp = z_laurent(hi + 2 * max(j - 1, 0) + 1).derivative()
    base = z_inverse_laurent(hi + 3) if j == 0 else poly_of_z_laurent(
        ZPolynomial.monomial(j - 1), hi + 3)
    out = base * zp * (-1)
    assert out.hi >= hi
    return Laurent(out.t, hi)


@dataclass(frozen=True)
class LaurentExpansion:
    """Inner re-expansion regrouped by powers of eps at fixed tau.

    ``A[m]``, ``B[m]``, ``U[m]`` map tau-powers to exact rationals, truncated
    below at tau^(-2M) (``A``) and tau^(-2M-1) (``B``, ``U``).
    """
    A: list
    B: list
    U: list
    M: int
    p_tilde: dict
    q_tilde: dict
    u_tilde: dict


def reexpand_at_singularity(sep, u, M=12, mmax=1):
    """Laurent data about s = i pi regrouped in powers of eps.

    Requires the separatrix through order ``mmax + M`` and the angle series
    through order ``mmax + M``.
    """
    kmax = mmax + M
    if sep.order < kmax:
        raise ValueError(f"separatrix order must be at least {kmax}")
    if u is not None and u.order < kmax:
        raise ValueError(f"angle order must be at least {kmax}")
    hi = 2 * mmax
    p_t, q_t, u_t = {}, {}, {}
    for k in range(1, kmax + 1):
        pl = poly_of_z_laurent(sep.p[k], hi + 1)
        ql = pl.derivative()
        if any(power % 2 for power in pl.t):
            raise ArithmeticError("odd power in an even profile")
        for l in range(-k, mmax + 1):
            p_t[(k, l)] = pl[2 * l]
            q_t[(k, l)] = ql[2 * l - 1]
    if u is not None:
        for k in range(0, kmax + 1):
            acc = Laurent({}, hi)
            for j, coef in enumerate(u.u[k]):
                if coef:
                    acc = acc + profile_laurent(j, hi) * coef
            if any(power % 2 == 0 for power in acc.t):
                raise ArithmeticError("even power in an odd profile")
            for l in range(-k, mmax + 1):
                u_t[(k, l)] = acc[2 * l - 1]
    A, B, U = [], [], []
    for m in range(mmax + 1):
        A.append({2 * l: p_t.get((m - l, l), Fraction(0))
                  for l in range(-M, m) if m - l >= 1})
        B.append({2 * l - 1: q_t.get((m - l, l), Fraction(0))
                  for l in range(-M, m) if m - l >= 1})
        if u is not None:
            Um = {2 * l - 1: u_t.get((m - l, l), Fraction(0))
                  for l in range(-M, m + 1) if m - l >= 0}
            Um[1] = Um.get(1, Fraction(0)) + u.omega[m]
            U.append(Um)
    return LaurentExpansion(A, B, U, M, p_t, q_t, u_t)


# ---------------------------------------------------------------------------
# numerical evaluation


def _s_profile(l, s):
    half = s / 2
    return gmpy2.sinh(half) / gmpy2.cosh(half) ** (2 * l + 1)


def evaluate_formal(series, eps, t, truncation=None, margin=None):
    """Evaluate a formal object numerically.

    Parameters
    ----------
    series : FormalSeparatrix, FormalU, FormalXi2, FormalXi4 or ZPolynomial
    eps : real
    t : real or complex time (s = eps t)
    truncation : int, optional
        Highest order kept; defaults to all available orders.
    margin : real, optional
        Raise ``ValueError`` when s is closer than this to +-i pi.

    Returns
    -------
    list or number
        A phase point for separatrix and variational objects, a scalar for
        the angle series and for a bare polynomial in z.
    """
    eps = mpf(eps)
    is_complex = isinstance(t, (complex, gmpy2.mpc))
    t = mpc(t) if is_complex else mpf(t)
    s = eps * t
    if margin is not None and is_complex:
        for sing in (gmpy2.mpc(0, gmpy2.const_pi()), gmpy2.mpc(0, -gmpy2.const_pi())):
            if abs(s - sing) < margin:
                raise ValueError("evaluation point too close to the pole at s = +-i pi")
    e2 = eps * eps
    if isinstance(series, ZPolynomial):
        z, _ = _z_and_zprime(s)
        return series(z)
    if isinstance(series, FormalSeparatrix):
        n = series.order if truncation is None else min(truncation, series.order)
        z, _ = _z_and_zprime(s)
        x = y = 0
        for k in range(n, 0, -1):
            x = (x + series.p[k](z)) * e2
            qk = sum(mpf(series.q[k][l]) * _s_profile(l, s) for l in range(1, k + 1))
            y = (y + qk) * e2
        return [x, y * eps, 0 * x, 0 * x]
    if isinstance(series, FormalU):
        n = series.order if truncation is None else min(truncation, series.order)
        om = sum(mpf(series.omega[k]) * e2 ** k for k in range(min(n + 1, len(series.omega))))
        acc = om * t
        for k in range(n + 1):
            uk = sum(mpf(c) * _s_profile(l, s) for l, c in enumerate(series.u[k]))
            acc = acc + eps ** (2 * k + 1) * uk
        return acc
    if isinstance(series, FormalXi2):
        phase = evaluate_formal(series.u, eps, t, truncation)
        if series.conjugate:
            phase = -phase
        e = gmpy2.exp(mpc(phase) * gmpy2.mpc(0, 1))
        return [0 * e, 0 * e, e, e * mpc(series.direction[3])]
    if isinstance(series, FormalXi4):
        n = series.order if truncation is None else min(truncation, series.order)
        v = dv = 0
        for k in range(n, -1, -1):
            vk = series.v(k)
            v = v * e2 + vk(s)
            dv = dv * e2 + vk.ds()(s)
        scale = e2 * e2
        return [v / scale, eps * dv / scale, 0 * v, 0 * v]
    raise TypeError(f"cannot evaluate {type(series).__name__}")
