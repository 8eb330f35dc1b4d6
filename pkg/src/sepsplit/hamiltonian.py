"""
Polynomial Hamiltonians of two degrees of freedom with parameters (mu, nu).

Phase points are ordered (x1, y1, x2, y2).  The vector field is
(dH/dy1, -dH/dx1, dH/dy2, -dH/dx2) and the symplectic form is
dx1^dy1 + dx2^dy2.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import gmpy2
import mpmath

from .numeric import (det4, from_mpmath, mpc, mpf, norm, null_vector4, solve_linear,
                      to_mpmath)

CONSTANT_NAMES = ("a", "b", "c", "omega0")
_CONSTANT_ALIASES = {"ω₀": "omega0", "w0": "omega0", "omega_0": "omega0"}


class Poly:
    """Sparse polynomial: a mapping from exponent tuples to coefficients."""

    __slots__ = ("terms", "nvars")

    def __init__(self, terms, nvars):
        self.nvars = nvars
        self.terms = {tuple(k): v for k, v in terms.items() if v != 0}

    def __call__(self, vals):
        total = 0
        powers = [[1] for _ in range(self.nvars)]
        for exps, c in self.terms.items():
            term = c
            for i, e in enumerate(exps):
                if e:
                    pw = powers[i]
                    while len(pw) <= e:
                        pw.append(pw[-1] * vals[i])
                    term = term * pw[e]
            total = total + term
        return total

    def diff(self, i):
        out = {}
        for exps, c in self.terms.items():
            e = exps[i]
            if e:
                k = exps[:i] + (e - 1,) + exps[i + 1:]
                out[k] = out.get(k, 0) + c * e
        return Poly(out, self.nvars)

    def map_coefficients(self, f):
        return Poly({k: f(v) for k, v in self.terms.items()}, self.nvars)

    def degree(self):
        return max((sum(k) for k in self.terms), default=0)

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Poly(out, self.nvars)

    def __repr__(self):
        return f"Poly({self.terms!r})"


@dataclass(frozen=True)
class PolyHamiltonian:
    """Polynomial H(x1, y1, x2, y2; mu, nu).

    Parameters
    ----------
    terms : dict
        Multi-index (i1, j1, i2, j2, kmu, knu) -> exact rational coefficient.
    constants : dict
        Optional named model constants a, b, c, omega0.
    """
    terms: dict
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in self.terms.items():
            k = tuple(int(e) for e in k)
            if len(k) != 6 or min(k) < 0:
                raise ValueError(f"bad multi-index {k}")
            v = Fraction(v)
            if v != 0:
                clean[k] = v
        object.__setattr__(self, "terms", clean)

    def specialize(self, mu, nu):
        """Phase-space polynomial at fixed (mu, nu).

        Exact when mu and nu are rationals, otherwise mpfr coefficients.
        """
        exact = all(isinstance(p, (int, Fraction)) for p in (mu, nu))
        if not exact:
            mu, nu = mpf(mu), mpf(nu)
        out = {}
        for (i1, j1, i2, j2, km, kn), c in self.terms.items():
            val = c * mu ** km * nu ** kn if exact else mpf(c) * mu ** km * nu ** kn
            key = (i1, j1, i2, j2)
            out[key] = out.get(key, 0) + val
        return Poly(out, 4)

    def with_mu_variable(self, nu):
        """Polynomial in (x1, y1, x2, y2, mu) at fixed nu."""
        exact = isinstance(nu, (int, Fraction))
        out = {}
        for (i1, j1, i2, j2, km, kn), c in self.terms.items():
            val = c * nu ** kn if exact else mpf(c) * mpf(nu) ** kn
            key = (i1, j1, i2, j2, km)
            out[key] = out.get(key, 0) + val
        return Poly(out, 5)

    def potential_table(self):
        """Coefficients v_kl of the potential on the invariant plane.

        Returns the dict {(k, l): v_kl} of H(x, 0, 0, 0) at nu = 0, that is
        sum v_kl mu^k x^l.
        """
        out = {}
        for (i1, j1, i2, j2, km, kn), c in self.terms.items():
            if j1 == 0 and i2 == 0 and j2 == 0 and kn == 0:
                out[(km, i1)] = out.get((km, i1), 0) + c
        return out

    def frequency_table(self):
        """Coefficients w_kl of dV/dI at I = 0, sum w_kl mu^k x^l."""
        out = {}
        for (i1, j1, i2, j2, km, kn), c in self.terms.items():
            if j1 == 0 and kn == 0 and (i2, j2) == (2, 0):
                out[(km, i1)] = out.get((km, i1), 0) + 2 * c
        return out

    def nu_free(self):
        """The integrable part (terms without nu)."""
        return PolyHamiltonian({k: v for k, v in self.terms.items() if k[5] == 0},
                               dict(self.constants))


def cubic_model(a=1, b=1, c=0, omega0=1, c0=0, m=1):
    """H = y1^2/2 + omega0 I - a mu x1 + b x1^3/3 + c x1 I + nu c0 x1^m x2."""
    a, b, c, omega0 = (Fraction(v) for v in (a, b, c, omega0))
    t = {
        (0, 2, 0, 0, 0, 0): Fraction(1, 2),
        (0, 0, 2, 0, 0, 0): omega0 / 2,
        (0, 0, 0, 2, 0, 0): omega0 / 2,
        (1, 0, 0, 0, 1, 0): -a,
        (3, 0, 0, 0, 0, 0): b / 3,
    }
    if c:
        t[(1, 0, 2, 0, 0, 0)] = c / 2
        t[(1, 0, 0, 2, 0, 0)] = c / 2
    if c0:
        t[(m, 0, 1, 0, 0, 1)] = Fraction(c0)
    return PolyHamiltonian(t, {"a": a, "b": b, "c": c, "omega0": omega0})


def parse_hamiltonian(text):
    """Parse the monomial-table text format.

    Each data line is ``i1 j1 i2 j2 kmu knu coefficient`` with the
    coefficient an exact rational ``p/q`` or a decimal.  Lines of the form
    ``name = value`` set the model constants.  ``#`` starts a comment.
    Duplicate multi-indices are rejected.
    """
    terms, constants = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            name, value = (s.strip() for s in line.split("=", 1))
            name = _CONSTANT_ALIASES.get(name, name)
            if name not in CONSTANT_NAMES:
                raise ValueError(f"line {lineno}: unknown constant {name!r}")
            constants[name] = _parse_coefficient(value, lineno)
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ValueError(f"line {lineno}: expected 6 exponents and a coefficient")
        try:
            idx = tuple(int(p) for p in parts[:6])
        except ValueError:
            raise ValueError(f"line {lineno}: exponents must be integers") from None
        if min(idx) < 0:
            raise ValueError(f"line {lineno}: negative exponent")
        if idx in terms:
            raise ValueError(f"line {lineno}: duplicate multi-index {idx}")
        terms[idx] = _parse_coefficient(parts[6], lineno)
    if not terms:
        raise ValueError("no monomials found")
    return PolyHamiltonian(terms, constants)


def _parse_coefficient(s, lineno):
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"line {lineno}: bad coefficient {s!r}") from None


def load_hamiltonian(path):
    return parse_hamiltonian(Path(path).read_text())


def format_hamiltonian(H):
    lines = [f"{k} = {v}" for k, v in sorted(H.constants.items())]
    for idx in sorted(H.terms):
        lines.append(" ".join(str(e) for e in idx) + f" {H.terms[idx]}")
    return "\n".join(lines) + "\n"


def evaluate(H, p, mu, nu):
    """Value of H at the phase point ``p``."""
    return H.specialize(mu, nu)(p)


class PhaseField:
    """Gradient, vector field and Hessian of H at fixed parameters."""

    def __init__(self, H, mu, nu):
        self.poly = H.specialize(mu, nu)
        self.grad = [self.poly.diff(i) for i in range(4)]
        self.hess = [[g.diff(j) for j in range(4)] for g in self.grad]

    def energy(self, p):
        return self.poly(p)

    def gradient(self, p):
        return [g(p) for g in self.grad]

    def vector_field(self, p):
        g = self.gradient(p)
        return [g[1], -g[0], g[3], -g[2]]

    def hessian(self, p):
        return [[h(p) for h in row] for row in self.hess]

    def linear_matrix(self, p):
        """J H''(p)."""
        S = self.hessian(p)
        return [S[1], [-v for v in S[0]], S[3], [-v for v in S[2]]]


def vector_field(H, p, mu, nu):
    return PhaseField(H, mu, nu).vector_field(p)


def symplectic_pair(u, w):
    """Omega(u, w) = u_x1 w_y1 - u_y1 w_x1 + u_x2 w_y2 - u_y2 w_x2."""
    return u[0] * w[1] - u[1] * w[0] + u[2] * w[3] - u[3] * w[2]


def apply_J(v):
    """J v for the (x1, y1, x2, y2) ordering."""
    return [v[1], -v[0], v[3], -v[2]]


@dataclass(frozen=True)
class EquilibriumData:
    location: list
    lam: object
    omega: object
    v: list
    w_unstable: list
    w_stable: list
    mu: object = None
    nu: object = None
    residual: object = None

    @property
    def v_real(self):
        return [z.real for z in self.v]

    @property
    def v_imag(self):
        return [z.imag for z in self.v]


def newton_tolerance():
    return gmpy2.mul_2exp(gmpy2.mpfr(1), -gmpy2.get_context().precision + 12)


def _potential_saddle(H, mu, nu):
    """Real critical point of V(x1) = H(x1, 0, 0, 0) with V'' < 0, nearest 0."""
    coeffs = {}
    for (i1, j1, i2, j2, kmu, knu), c in H.terms.items():
        if j1 or i2 or j2 or i1 == 0:
            continue
        val = mpf(c) * mpf(mu) ** kmu * mpf(nu) ** knu
        coeffs[i1] = coeffs.get(i1, 0) + val
    deg = max(coeffs, default=0)
    if deg < 2:
        raise ArithmeticError("potential has no critical point")
    # V'(x) = sum i c_i x^(i-1), highest degree first for polyroots
    dv = [to_mpmath(i * coeffs.get(i, 0)) for i in range(deg, 0, -1)]
    while dv and dv[0] == 0:
        dv.pop(0)
    if len(dv) == 1:
        raise ArithmeticError("potential has no critical point")
    roots = mpmath.polyroots(dv, maxsteps=200, extraprec=64) if len(dv) > 2 else [-dv[1] / dv[0]]
    best = None
    for r in roots:
        r = mpmath.mpc(r)
        if abs(r.imag) > mpmath.mpf(2) ** (-mpmath.mp.prec // 2) * (1 + abs(r)):
            continue
        x = from_mpmath(r.real)
        v2 = sum(i * (i - 1) * c * x ** (i - 2) for i, c in coeffs.items() if i >= 2)
        if v2 < 0 and (best is None or abs(x) < abs(best)):
            best = x
    if best is None:
        raise ArithmeticError("no saddle of the potential at these parameters")
    return best


def find_equilibrium(H, mu, nu, guess=None, max_iter=200):
    """Locate the saddle-centre equilibrium and its linear data.

    Parameters
    ----------
    H : PolyHamiltonian
    mu, nu : real
        Parameters; mu > 0.
    guess : sequence, optional
        Starting point.  Defaults to the saddle of the potential
        V(x1) = H(x1, 0, 0, 0) closest to the origin.

    Returns
    -------
    EquilibriumData
        Eigenvector v for +i omega normalized so Omega(v, conj v) = -2i with
        real positive x2-component; w_unstable/w_stable are unit vectors with
        positive x1-component.
    """
    F = PhaseField(H, mu, nu)
    if guess is None:
        guess = [_potential_saddle(H, mu, nu), 0, 0, 0]
    x = [mpf(g) for g in guess]
    tol = newton_tolerance()
    for _ in range(max_iter):
        g = F.gradient(x)
        step = solve_linear(F.hessian(x), g)
        x = [xi - si for xi, si in zip(x, step)]
        if norm(step) <= tol * (1 + norm(x)):
            break
    else:
        raise ArithmeticError("Newton iteration for the equilibrium did not converge")
    residual = norm(F.gradient(x))
    A = F.linear_matrix(x)
    lam2, om2 = _hamiltonian_eigen_squares(A)
    if not (lam2 > 0 and om2 > 0):
        raise ArithmeticError("not a saddle-center at these parameters")
    lam, omega = gmpy2.sqrt(lam2), gmpy2.sqrt(om2)
    v = elliptic_eigenvector(A, omega)
    wu = _real_eigvec(A, lam)
    ws = _real_eigvec(A, -lam)
    return EquilibriumData(x, lam, omega, v, wu, ws, mu, nu, residual)


def elliptic_eigenvector(A, omega):
    """Eigenvector of A for +i omega with Omega(v, conj v) = -2i.

    The phase is fixed by making the x2-component real and positive.
    """
    v = _eigvec(A, gmpy2.mpc(0, omega))
    pair = symplectic_pair(v, [z.conjugate() for z in v])
    k = (pair / gmpy2.mpc(0, -2)).real
    if k <= 0:
        raise ArithmeticError("elliptic eigenvector has the wrong Krein sign")
    scale = gmpy2.sqrt(k)
    v = [z / scale for z in v]
    ph = v[2]
    if ph == 0:
        raise ArithmeticError("elliptic eigenvector has no x2-component")
    rot = ph.conjugate() / abs(ph)
    v = [z * rot for z in v]
    v[2] = gmpy2.mpc(v[2].real, 0)
    return v


def _hamiltonian_eigen_squares(A):
    """Return (lambda^2, omega^2) from lambda^4 + e2 lambda^2 + e4 = 0."""
    tr2 = sum(A[i][j] * A[j][i] for i in range(4) for j in range(4))
    e2 = -tr2 / 2
    e4 = det4(A)
    disc = e2 * e2 - 4 * e4
    if disc < 0:
        raise ArithmeticError("complex quartet: not a saddle-center")
    r = gmpy2.sqrt(disc)
    L1, L2 = (-e2 + r) / 2, (-e2 - r) / 2
    return L1, -L2


def _eigvec(A, ev):
    M = [[mpc(A[i][j]) - (ev if i == j else 0) for j in range(4)] for i in range(4)]
    return [mpc(z) for z in null_vector4(M)]


def _real_eigvec(A, ev):
    M = [[A[i][j] - (ev if i == j else 0) for j in range(4)] for i in range(4)]
    w = null_vector4(M)
    n = norm(w)
    w = [c / n for c in w]
    if w[0] < 0:
        w = [-c for c in w]
    return w
