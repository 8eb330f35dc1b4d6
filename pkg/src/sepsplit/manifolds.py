"""
Stable and unstable separatrix solutions, their variational basis and the
projections of the splitting vector.

Time is normalized so that the unstable solution crosses the section
``y1 = 0`` at t = 0 (the apex of the loop).  The elliptic variational
solution is ``xi2(t) ~ exp(i omega t) v`` as t -> -inf, ``xi1`` is its
real-symmetric partner, ``xi3`` is the velocity of the unstable solution and
``xi4`` completes the symplectic basis:

    Omega(xi1, xi2) = 2i,  Omega(xi3, xi4) = 1,  other pairings vanish.

The splitting vector ``delta = x_plus - x_minus`` is decomposed as
``delta = theta1 xi1 + theta2 xi2 + theta3 xi3 + theta4 xi4``.
"""
from dataclasses import dataclass, field

import gmpy2

from .formal import evaluate_formal, formal_separatrix
from .hamiltonian import PhaseField, find_equilibrium, symplectic_pair
from .numeric import mpc, mpf, norm, solve_linear
from .ode import ComplexPath, IntegratorConfig, integrate_flow

def _i():
    return gmpy2.mpc(0, 1)


@dataclass
class SeparatrixSolution:
    side: str
    seed_time: object
    seed_state: list
    origin_state: list
    origin_shift: object
    trajectory: object = None
    seed_check: object = None
    offset: object = None


@dataclass
class VariationalBasis:
    """Basis at t = 0 (and the transport trajectory).

    ``xi`` holds the four vectors at t = 0; ``pairings`` the six pairings
    Omega(xi_i, xi_j), i < j, keyed by (i, j) with 1-based labels.
    """
    xi: list
    pairings: dict
    x_minus: SeparatrixSolution
    condition: object = None


@dataclass
class SplittingMeasurement:
    delta0: list
    theta: list
    E_e1: object
    E_h1: object
    delta_norm: object
    drift: object
    noise_floor: object
    upper_bound: bool
    lam: object
    omega: object
    diagnostics: dict = field(default_factory=dict)

    @property
    def log_scaled(self):
        """log E_e1 + 2 pi omega / lambda."""
        if self.E_e1 <= 0:
            return None
        return gmpy2.log(self.E_e1) + 2 * gmpy2.const_pi() * self.omega / self.lam


def default_config(precision_bits=128, tol=None):
    tol = tol if tol is not None else 2.0 ** (-precision_bits + 28)
    return IntegratorConfig(precision_bits=precision_bits, abs_tol=tol, rel_tol=tol)


def normal_form_eps(sep, mu):
    """Solve mu = sum mu_k eps^(2k) for eps by Newton's method."""
    mu = mpf(mu)
    m2 = mpf(sep.mu[2])
    e2 = gmpy2.sqrt(mu / m2)
    for _ in range(100):
        f = -mu
        df = mpf(0)
        for k in range(2, len(sep.mu)):
            c = mpf(sep.mu[k])
            f += c * e2 ** k
            df += k * c * e2 ** (k - 1)
        step = f / df
        e2 -= step
        if abs(step) <= abs(e2) * mpf(2) ** (-gmpy2.get_context().precision + 8):
            break
    return gmpy2.sqrt(e2)


def _formal_data(H, N):
    table = H.potential_table()
    table = {k: v for k, v in table.items() if k[1] != 0}
    return formal_separatrix(table, N)


def seed_separatrix(H, mu, nu, eq, side, T_seed, offset=None, sep=None, eps=None,
                    check_tol=1e-3):
    """Initial point on the local unstable (stable) manifold.

    The point is ``p + offset * w`` with ``w`` the unstable (stable)
    eigenvector.  When ``offset`` is None it is taken from the formal
    separatrix evaluated at ``t = -T_seed`` (``+T_seed``), so that the flow
    reaches the section near t = 0.  The formal point is also returned as a
    cross-check: the two must agree in (x1, y1) to relative accuracy
    ``check_tol``.

    Returns
    -------
    point, offset, relative disagreement
    """
    if side not in ("unstable", "stable"):
        raise ValueError("side must be 'unstable' or 'stable'")
    w = eq.w_unstable if side == "unstable" else eq.w_stable
    t = -mpf(T_seed) if side == "unstable" else mpf(T_seed)
    formal_pt = None
    if sep is not None:
        eps = eps if eps is not None else normal_form_eps(sep, mu)
        formal_pt = evaluate_formal(sep, eps, t)
        # displacement from the formal saddle, which ignores the O(nu^2)
        # shift of the true equilibrium
        saddle = sum(mpf(sep.p[k](0)) * eps ** (2 * k) for k in range(1, sep.order + 1))
        formal_pt = [formal_pt[0] - saddle, formal_pt[1]]
    if offset is None:
        if formal_pt is None:
            raise ValueError("offset or formal separatrix required")
        offset = formal_pt[0] / w[0]
    offset = mpf(offset)
    point = [p + offset * c for p, c in zip(eq.location, w)]
    mismatch = None
    if formal_pt is not None:
        d = norm([offset * w[0] - formal_pt[0], offset * w[1] - formal_pt[1]])
        mismatch = d / abs(offset)
        if mismatch > check_tol:
            raise ValueError(f"seed offset too large: formal and linear seeds differ by "
                             f"{float(mismatch):.3e} relative")
    return point, offset, mismatch


def _seed_time(eq, sep, eps, target_offset):
    """T with formal displacement approximately ``target_offset``."""
    p11 = abs(mpf(sep.p[1][1]))
    return gmpy2.log(4 * p11 * eps * eps / target_offset) / eq.lam


def section_sign(side, offset):
    """Sign of y1 just before the apex crossing, in integration direction.

    A loop to the right of the saddle (positive offset) has y1 > 0 before
    the apex on the unstable branch; the stable branch is integrated
    backward, which flips the sign.
    """
    s = 1 if offset > 0 else -1
    return s if side == "unstable" else -s


def mu_for_lambda(H, lam, nu, guess=None, sep=None, tol=None):
    """Parameter mu at which the saddle exponent equals ``lam``.

    Secant iteration on ``find_equilibrium(H, mu, nu).lam``, started from the
    formal relation mu = sum mu_k lam^(2k).
    """
    lam = mpf(lam)
    if guess is None:
        sep = sep or _formal_data(H, 4)
        guess = sum(mpf(c) * lam ** (2 * k) for k, c in enumerate(sep.mu))
    tol = tol or mpf(2) ** (-gmpy2.get_context().precision + 16)
    m0 = mpf(guess)
    f0 = find_equilibrium(H, m0, nu).lam - lam
    m1 = m0 * (1 + mpf(2) ** -20)
    for _ in range(60):
        f1 = find_equilibrium(H, m1, nu).lam - lam
        if f1 == f0:
            break
        m0, m1, f0 = m1, m1 - f1 * (m1 - m0) / (f1 - f0), f1
        if abs(m1 - m0) <= tol * abs(m1):
            break
    return m1


def trace_separatrix(H, mu, nu, eq, side, T_seed, cfg, offset=None, sep=None,
                     columns=(), record=False, span=None):
    """Integrate a separatrix from its seed to the first section crossing.

    Returns a SeparatrixSolution whose trajectory ends at the crossing; the
    crossing defines t = 0 of this solution.
    """
    seed, offset, mismatch = seed_separatrix(H, mu, nu, eq, side, T_seed, offset, sep)
    T = mpf(T_seed)
    span = span if span is not None else 3 * T
    if side == "unstable":
        path = ComplexPath((-T, -T + span))
    else:
        path = ComplexPath((T, T - span))
    event = (1, section_sign(side, offset))
    tr = integrate_flow(H, mu, nu, seed, path, cfg, event=event, columns=columns,
                        record=record)
    if tr.event is None:
        raise ArithmeticError(f"no section crossing found on the {side} separatrix")
    te = tr.event
    te = te.real if isinstance(te, gmpy2.mpc) else te
    origin = tr.end[1][:4]
    return SeparatrixSolution(side, T, seed, origin, te, tr, mismatch, offset)


def _xi4_start(xi1, xi2, xi3):
    """Minimum-norm real xi4 with Omega(xi1, xi4) =  Omega(xi2, xi4) = 0 and Omega(xi3, xi4) = 1."""
    # Omega(u, w) = (J^T u) . w  with  J^T u = (-u_y1, u_x1, -u_y2, u_x2)
    def row(u):
        return [-u[1], u[0], -u[3], u[2]]
    r2 = row(xi2)
    rows = [[a.real for a in r2], [a.imag for a in r2], [mpf(a) for a in row(xi3)]]
    rhs = [mpf(0), mpf(0), mpf(1)]
    G = [[sum(a * b for a, b in zip(ri, rj)) for rj in rows] for ri in rows]
    y = solve_linear(G, rhs)
    return [sum(y[k] * rows[k][j] for k in range(3)) for j in range(4)], G


def _pairings(xi):
    return {(i + 1, j + 1): symplectic_pair(xi[i], xi[j])
            for i in range(4) for j in range(i + 1, 4)}


def build_variational_basis(H, mu, nu, x_minus, eq, T_seed, cfg, record=False):
    """Variational basis at t = 0 along the unstable solution.

    ``xi2`` is transported from the seed together with the unstable solution
    (which is re-integrated from ``x_minus.seed_state``).  ``xi3`` is the
    velocity at t = 0.  ``xi4`` is fixed only up to adding multiples of
    ``xi3``; it is constructed at t = 0 as the minimum-norm real solution of
    its pairing conditions.  Transporting it from the seed instead would
    start it with norm ~ 1/offset and amplify integration error along the
    unstable direction by exp(lambda T).

    Returns
    -------
    (VariationalBasis, SeparatrixSolution)
    """
    F = PhaseField(H, mu, nu)
    T = mpf(T_seed)
    seed = x_minus.seed_state
    w = mpf(eq.omega)
    phase = gmpy2.exp(_i() * w * (-T))
    xi2 = [phase * c for c in eq.v]
    path = ComplexPath((-T, -T + 3 * T))
    tr = integrate_flow(H, mu, nu, seed, path, cfg,
                        event=(1, section_sign("unstable", x_minus.offset)),
                        columns=[xi2], record=record)
    if tr.event is None:
        raise ArithmeticError("no section crossing found on the unstable separatrix")
    te = tr.event.real if isinstance(tr.event, gmpy2.mpc) else tr.event
    state = tr.end[1]
    origin = state[:4]
    # shift time so the crossing is t = 0: xi2 ~ exp(i omega t) v
    rot = gmpy2.exp(-_i() * w * te)
    b2 = [mpc(z) * rot for z in state[4:8]]
    b1 = [z.conjugate() for z in b2]
    b3 = F.vector_field(origin)
    b4, gram = _xi4_start(b1, b2, b3)
    xi = [b1, b2, b3, b4]
    xm = SeparatrixSolution("unstable", T, seed, origin, te, tr, x_minus.seed_check,
                            x_minus.offset)
    return VariationalBasis(xi, _pairings(xi), xm, _condition(gram)), xm


def _condition(G):
    n = len(G)
    inv = []
    for j in range(n):
        e = [mpf(1) if i == j else mpf(0) for i in range(n)]
        inv.append(solve_linear(G, e))
    nG = max(sum(abs(v) for v in row) for row in G)
    nI = max(sum(abs(inv[j][i]) for j in range(n)) for i in range(n))
    return nG * nI


def _flow_to(H, mu, nu, x, t1, cfg, columns=()):
    if t1 == 0:
        return list(x), [list(c) for c in columns]
    tr = integrate_flow(H, mu, nu, x, ComplexPath((0, t1)), cfg, columns=columns,
                        record=False)
    st = tr.end[1]
    return st[:4], [st[4 + 4 * k:8 + 4 * k] for k in range(len(columns))]


def normalize_time_origin(H, mu, nu, x_plus, basis, cfg, max_iter=8):
    """Shift the stable solution in time so that Omega(delta(0), xi4(0)) = 0.

    The unstable solution keeps its section crossing as t = 0.  The stable
    crossing point is moved along its own orbit by the root ``sigma`` of
    ``Omega(x_plus(sigma) - x_minus(0), xi4(0))``; the derivative of this
    function is ``Omega(xi3, xi4) = 1`` to leading order.

    Returns the adjusted stable state at t = 0, the shift and the residual
    ``Omega(delta(0), xi3(0))`` as a diagnostic.
    """
    F = PhaseField(H, mu, nu)
    xm = basis.x_minus.origin_state
    xi3, xi4 = basis.xi[2], basis.xi[3]
    xp0 = x_plus.origin_state
    sigma = mpf(0)
    xp = list(xp0)
    tol = mpf(2) ** (-gmpy2.get_context().precision + 20)
    f = None
    for _ in range(max_iter):
        delta = [a - b for a, b in zip(xp, xm)]
        f = symplectic_pair(delta, xi4)
        df = symplectic_pair(F.vector_field(xp), xi4)
        step = f / df
        sigma -= step
        xp, _ = _flow_to(H, mu, nu, xp0, sigma, cfg)
        if abs(step) <= tol * (1 + abs(sigma)):
            break
    delta = [a - b for a, b in zip(xp, xm)]
    res = symplectic_pair(delta, xi4)
    diag = symplectic_pair(delta, xi3)
    return xp, sigma, {"theta3_residual": res, "omega_delta_xi3": diag}


def measure_splitting(x_plus_state, basis, lam, omega, H=None, mu=None, nu=None,
                      cfg=None, window=True, npoints=9, noise=None):
    """Projections of delta(0) and the elliptic energy estimate.

    Parameters
    ----------
    x_plus_state : list
        Stable solution at the normalized t = 0.
    basis : VariationalBasis
    window : bool
        Also measure |theta1(t)| on t in [-1/lambda, 1/lambda] (needs H,
        mu, nu, cfg).
    """
    xm = basis.x_minus.origin_state
    xi1, xi2, xi3, xi4 = basis.xi
    delta = [a - b for a, b in zip(x_plus_state, xm)]
    two_i = gmpy2.mpc(0, 2)
    th1 = symplectic_pair(delta, xi2) / two_i
    th2 = -symplectic_pair(delta, xi1) / two_i
    th3 = symplectic_pair(delta, xi4)
    th4 = -symplectic_pair(delta, xi3)
    E = 2 * gmpy2.norm(mpc(th1))
    dn = norm(delta)
    drift = None
    samples = []
    if window and H is not None:
        samples = theta1_window(H, mu, nu, x_plus_state, basis, lam, cfg, npoints)
        mags = [abs(v) for _, v in samples]
        top = max(mags)
        drift = (top - min(mags)) / top if top > 0 else mpf(0)
    noise = noise if noise is not None else mpf(0)
    floor = 1000 * noise * noise
    upper = E <= floor
    Eh = -mpf(omega) / mpf(lam) * E
    diag = {"theta1_window": samples}
    return SplittingMeasurement(delta, [th1, th2, th3, th4], E, Eh, dn, drift, floor,
                                upper, lam, omega, diag)


def theta1_window(H, mu, nu, x_plus_state, basis, lam, cfg, npoints=9):
    """theta1(t) at ``npoints`` times spread over [-1/lambda, 1/lambda]."""
    xm = basis.x_minus.origin_state
    xi2 = basis.xi[1]
    L = 1 / mpf(lam)
    half = npoints // 2
    out = [(mpf(0), symplectic_pair([a - b for a, b in zip(x_plus_state, xm)], xi2)
            / gmpy2.mpc(0, 2))]
    for sign in (1, -1):
        times = [sign * L * k / half for k in range(1, half + 1)]
        path = ComplexPath(tuple([mpf(0)] + times))
        tm = integrate_flow(H, mu, nu, xm, path, cfg, columns=[xi2])
        tp = integrate_flow(H, mu, nu, x_plus_state, path, cfg)
        vm = tm.at_vertices()[1:]
        vp = tp.at_vertices()[1:]
        for (t, sm, _), (_, sp, _) in zip(vm, vp):
            d = [a - b for a, b in zip(sp[:4], sm[:4])]
            out.append((t, symplectic_pair(d, sm[4:8]) / gmpy2.mpc(0, 2)))
    out.sort(key=lambda p: p[0])
    return out


@dataclass
class SplittingResult:
    mu: object
    nu: object
    equilibrium: object
    measurement: SplittingMeasurement
    basis: VariationalBasis
    x_plus: SeparatrixSolution
    x_minus: SeparatrixSolution
    sigma: object
    T_seed: object
    diagnostics: dict


def compute_splitting(H, mu, nu, cfg=None, T_seed=None, offset_target=None, N=8,
                      window=True):
    """Full measurement of the splitting at (mu, nu).

    Parameters
    ----------
    cfg : IntegratorConfig
    T_seed : real, optional
        Seeding time; by default chosen so the seed displacement is about
        ``offset_target`` (default sqrt(tol) eps^2).
    """
    cfg = cfg or default_config()
    eq = find_equilibrium(H, mu, nu)
    sep = _formal_data(H, N)
    eps = normal_form_eps(sep, mu)
    if T_seed is None:
        target = offset_target or gmpy2.sqrt(mpf(cfg.tol)) * eps * eps
        T_seed = _seed_time(eq, sep, eps, mpf(target))
    T_seed = mpf(T_seed)
    seed_u = seed_separatrix(H, mu, nu, eq, "unstable", T_seed, sep=sep, eps=eps)
    xm0 = SeparatrixSolution("unstable", T_seed, seed_u[0], None, None, None,
                             seed_u[2], seed_u[1])
    basis, xm = build_variational_basis(H, mu, nu, xm0, eq, T_seed, cfg)
    xp = trace_separatrix(H, mu, nu, eq, "stable", T_seed, cfg, sep=sep)
    xp_state, sigma, ndiag = normalize_time_origin(H, mu, nu, xp, basis, cfg)
    F = PhaseField(H, mu, nu)
    h0 = F.energy(eq.location)
    noise = max(abs(F.energy(xm.origin_state) - h0), abs(F.energy(xp_state) - h0),
                mpf(cfg.tol))
    meas = measure_splitting(xp_state, basis, eq.lam, eq.omega, H, mu, nu, cfg,
                             window=window, noise=noise)
    diag = dict(ndiag)
    diag.update({
        "energy_error": noise,
        "seed_mismatch_unstable": seed_u[2],
        "seed_mismatch_stable": xp.seed_check,
        "offset_unstable": seed_u[1],
        "offset_stable": xp.offset,
        "basis_condition": basis.condition,
        "eps_normal_form": eps,
    })
    meas.diagnostics.update(diag)
    return SplittingResult(mu, nu, eq, meas, basis, xp, xm, sigma, T_seed, diag)
