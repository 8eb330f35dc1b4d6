"""
High-order Taylor integration of polynomial vector fields in extended precision.

The vector field is compiled into a tree of monomials so that the Taylor
coefficients of every product are obtained by Cauchy convolution (automatic
differentiation).  Integration proceeds along piecewise-linear paths in
complex time; each segment is traversed with complex steps ``h = d * |h|``
with ``d`` the unit direction of the segment.

A Gragg-Bulirsch-Stoer extrapolation integrator is provided as an
independent cross-check.
"""
import math
import operator
from dataclasses import dataclass

import gmpy2

from .hamiltonian import PhaseField
from .numeric import mpc, mpf

_mul = operator.mul


class IntegrationError(ArithmeticError):
    """Base class of integration failures."""


class SingularityProximity(IntegrationError):
    """The step size collapsed, as it does next to a pole of the solution."""


class BlowUp(IntegrationError):
    """A capped block of the state exceeded its norm bound."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration parameters.

    Attributes
    ----------
    precision_bits : int
    abs_tol, rel_tol : float
        Local error tolerance per step is ``max(abs_tol, rel_tol * |x|)``
        evaluated block by block.
    max_step : float
    method : {"taylor", "extrapolation"}
    order : int or None
        Taylor order; chosen from the tolerance when None.
    max_steps : int
    blowup : float
        Norm cap for the phase-space block.
    """
    precision_bits: int = 128
    abs_tol: float = 1e-30
    rel_tol: float = 1e-30
    max_step: float = 2.0
    method: str = "taylor"
    order: int = None
    max_steps: int = 200000
    blowup: float = 1e6

    def __post_init__(self):
        floor = 2.0 ** (-self.precision_bits + 16)
        if self.abs_tol <= floor and self.rel_tol <= floor:
            raise ValueError("tolerance not representable at this precision")
        if self.method not in ("taylor", "extrapolation"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.precision_bits < 53:
            raise ValueError("precision must be at least 53 bits")

    @property
    def tol(self):
        return min(self.abs_tol, self.rel_tol)

    def taylor_order(self):
        if self.order:
            return self.order
        return int(math.ceil(-0.5 * math.log(self.tol))) + 2


@dataclass(frozen=True)
class ComplexPath:
    """Piecewise-linear path through complex time vertices."""
    vertices: tuple

    def __post_init__(self):
        verts = tuple(self.vertices)
        if len(verts) < 2:
            raise ValueError("a path needs at least two vertices")
        for a, b in zip(verts, verts[1:]):
            if a == b:
                raise ValueError("consecutive vertices must differ")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def line(cls, t0, t1):
        return cls((t0, t1))

    def is_real(self):
        return all(not isinstance(v, (complex, gmpy2.mpc)) or v.imag == 0
                   for v in self.vertices)

    def length(self):
        return sum(abs(complex(b) - complex(a)) for a, b in zip(self.vertices, self.vertices[1:]))


@dataclass
class Trajectory:
    """Samples ``(t, state)`` along a path; ``state`` is the full system state.

    ``nbase`` leading components are the phase point; the rest are
    variational columns of four components each.
    """
    samples: list
    energy_reference: object
    nbase: int = 4
    energy: object = None
    event: object = None
    path: ComplexPath = None
    steps: int = 0

    @property
    def start(self):
        return self.samples[0]

    @property
    def end(self):
        return self.samples[-1]

    def base(self, i=-1):
        return self.samples[i][1][:self.nbase]

    def column(self, c, i=-1):
        s = self.samples[i][1]
        return s[self.nbase + 4 * c:self.nbase + 4 * c + 4]

    @property
    def ncolumns(self):
        return (len(self.samples[0][1]) - self.nbase) // 4

    def at_vertices(self):
        return [s for s in self.samples if s[2]]


class PolySystem:
    """Polynomial ODE ``x_i' = sum_m c_im x^m`` compiled for Taylor jets.

    Parameters
    ----------
    rhs : list of dict
        One dict per component mapping exponent tuples to coefficients.
    blocks : list of (start, stop, cap)
        Component groups used for error control; ``cap`` is a norm bound or
        None.
    """

    def __init__(self, rhs, blocks=None):
        self.n = len(rhs)
        self.blocks = blocks or [(0, self.n, None)]
        index = {}
        nodes = []          # (parent_source, var)
        for i in range(self.n):
            e = [0] * self.n
            e[i] = 1
            index[tuple(e)] = i

        def source(exps):
            if exps in index:
                return index[exps]
            last = max(i for i, e in enumerate(exps) if e)
            parent = exps[:last] + (exps[last] - 1,) + exps[last + 1:]
            p = source(parent)
            idx = self.n + len(nodes)
            nodes.append((p, last))
            index[exps] = idx
            return idx

        compiled, consts = [], []
        for poly in rhs:
            terms, const = [], 0
            for exps, c in poly.items():
                exps = tuple(exps)
                if c == 0:
                    continue
                if not any(exps):
                    const = const + c
                else:
                    terms.append((c, source(exps)))
            compiled.append(terms)
            consts.append(const)
        self.nodes = nodes
        self.terms = compiled
        self.consts = consts

    def convert(self, conv):
        self.terms = [[(conv(c), s) for c, s in t] for t in self.terms]
        self.consts = [conv(c) if c != 0 else 0 for c in self.consts]

    def jets(self, x0, order):
        """Taylor coefficients X[i][k], k = 0..order, of the solution through x0."""
        n = self.n
        jet = [[x] for x in x0] + [[] for _ in self.nodes]
        nodes, terms, consts = self.nodes, self.terms, self.consts
        for k in range(order):
            for j, (p, v) in enumerate(nodes):
                a, b = jet[p], jet[v]
                jet[n + j].append(sum(map(_mul, a[:k + 1], b[k::-1])))
            kp1 = k + 1
            for i in range(n):
                acc = consts[i] if k == 0 else 0
                for c, s in terms[i]:
                    acc = acc + c * jet[s][k]
                jet[i].append(acc / kp1)
        return jet[:n]

    def rhs(self, x):
        j = self.jets(x, 1)
        return [c[1] for c in j]


def hamiltonian_system(H, mu, nu, ncols=0):
    """Polynomial system for the flow and ``ncols`` variational columns."""
    F = PhaseField(H, mu, nu)
    base = [F.grad[1], F.grad[0], F.grad[3], F.grad[2]]
    signs = [1, -1, 1, -1]
    n = 4 + 4 * ncols
    rhs = []
    for i in range(4):
        d = {}
        for exps, c in base[i].terms.items():
            d[exps + (0,) * (n - 4)] = signs[i] * c
        rhs.append(d)
    # row i of J H'': d/dt xi_i = sign_i * sum_b H''[partner_i][b] xi_b
    partner = [1, 0, 3, 2]
    for col in range(ncols):
        off = 4 + 4 * col
        for i in range(4):
            d = {}
            for b in range(4):
                for exps, c in F.hess[partner[i]][b].terms.items():
                    e = list(exps) + [0] * (n - 4)
                    e[off + b] += 1
                    key = tuple(e)
                    d[key] = d.get(key, 0) + signs[i] * c
            rhs.append(d)
    blocks = [(0, 4, "base")] + [(4 + 4 * c, 8 + 4 * c, None) for c in range(ncols)]
    return PolySystem(rhs, blocks), F


def _block_norm(vec, a, b):
    return max((abs(v) for v in vec[a:b]), default=0)


class TaylorStepper:
    """Adaptive Taylor steps with order and step size from the tolerance."""

    def __init__(self, system, cfg):
        self.system = system
        self.cfg = cfg
        self.order = cfg.taylor_order()
        self.abs_tol = mpf(cfg.abs_tol)
        self.rel_tol = mpf(cfg.rel_tol)

    def propose(self, x):
        """Jets at x and the admissible step length."""
        p = self.order
        jet = self.system.jets(x, p)
        h = None
        for a, b, _ in self.system.blocks:
            scale = max(self.abs_tol, self.rel_tol * _block_norm(x, a, b))
            for k in (p - 1, p):
                nk = max(abs(jet[i][k]) for i in range(a, b))
                if nk == 0:
                    continue
                hk = (scale / nk) ** (mpf(1) / k)
                h = hk if h is None or hk < h else h
        return jet, h

    @staticmethod
    def evaluate(jet, h):
        out = []
        for c in jet:
            acc = c[-1]
            for v in reversed(c[:-1]):
                acc = acc * h + v
            out.append(acc)
        return out


class ExtrapolationStepper:
    """Gragg-Bulirsch-Stoer modified-midpoint extrapolation."""

    def __init__(self, system, cfg):
        self.system = system
        self.cfg = cfg
        self.kmax = max(8, min(40, int(-math.log10(cfg.tol) / 1.5) + 4))
        self.tol = mpf(cfg.tol)
        self.h = None

    def _midpoint(self, x, h, n):
        f = self.system.rhs
        sub = h / n
        z0 = x
        fx = f(x)
        z1 = [a + sub * b for a, b in zip(x, fx)]
        for _ in range(n - 1):
            fz = f(z1)
            z0, z1 = z1, [a + 2 * sub * b for a, b in zip(z0, fz)]
        fz = f(z1)
        return [(a + b + sub * c) / 2 for a, b, c in zip(z0, z1, fz)]

    def step(self, x, h):
        """One extrapolated step; returns (state, error estimate)."""
        T = []
        ns = [2 * (j + 1) for j in range(self.kmax)]
        err = None
        for j, n in enumerate(ns):
            row = [self._midpoint(x, h, n)]
            for k in range(1, j + 1):
                r = (mpf(ns[j]) / ns[j - k]) ** 2 - 1
                row.append([a + (a - b) / r for a, b in zip(row[k - 1], T[j - 1][k - 1])])
            T.append(row)
            if j >= 3:
                err = max(abs(a - b) for a, b in zip(row[-1], row[-2]))
                scale = max(mpf(1), max(abs(v) for v in row[-1]))
                if err <= self.tol * scale:
                    return row[-1], err, j
        return T[-1][-1], err, self.kmax


def _path_points(path, conv):
    if conv is mpf:
        return [mpf(v.real) if isinstance(v, (complex, gmpy2.mpc)) else mpf(v)
                for v in path.vertices]
    return [conv(v) for v in path.vertices]


def integrate_system(system, start, path, cfg, event=None, conv=mpc, record=True,
                     energy=None):
    """Integrate a compiled polynomial system along ``path``.

    Parameters
    ----------
    system : PolySystem
    start : list
        Initial state at ``path.vertices[0]``.
    path : ComplexPath
    cfg : IntegratorConfig
    event : tuple (component, sign), optional
        Stop at the first zero of ``state[component]`` crossed from
        ``sign`` to ``-sign`` (real paths only).
    conv : callable
        Number conversion (``mpf`` for real problems, ``mpc`` otherwise).
    energy : callable, optional
        Evaluated on the base block to report the energy reference.

    Returns
    -------
    Trajectory
    """
    verts = _path_points(path, conv)
    x = [conv(v) for v in start]
    t = verts[0]
    samples = [(t, x, True)]
    if cfg.method == "taylor":
        stepper = TaylorStepper(system, cfg)
    else:
        stepper = ExtrapolationStepper(system, cfg)
    caps = [(a, b) for a, b, cap in system.blocks if cap == "base"]
    cap = mpf(cfg.blowup)
    steps = 0
    max_step = mpf(cfg.max_step)
    for seg_end in verts[1:]:
        delta = seg_end - t
        length = abs(delta)
        direction = delta / length
        done = mpf(0)
        seg_start = t
        while done < length:
            steps += 1
            if steps > cfg.max_steps:
                raise IntegrationError("maximum number of steps exceeded")
            remaining = length - done
            if cfg.method == "taylor":
                jet, hlen = stepper.propose(x)
                if hlen is None:
                    hlen = remaining
                hlen = min(hlen, max_step)
                if hlen < length * mpf(2) ** (-cfg.precision_bits // 2) and hlen < remaining:
                    raise SingularityProximity(f"step size collapsed near t = {complex(t)}")
                last = hlen >= remaining
                if last:
                    hlen = remaining
                h = direction * hlen
                xn = stepper.evaluate(jet, h)
            else:
                hlen = stepper.h or min(max_step, remaining, mpf(0.1))
                while True:
                    last = hlen >= remaining
                    if last:
                        hlen = remaining
                    xn, err, used = stepper.step(x, direction * hlen)
                    scale = max(mpf(1), max(abs(v) for v in xn))
                    if err is not None and err <= stepper.tol * scale:
                        break
                    hlen = hlen / 2
                    if hlen < length * mpf(2) ** (-cfg.precision_bits // 2):
                        raise SingularityProximity(f"step size collapsed near t = {complex(t)}")
                stepper.h = min(max_step, hlen * (mpf(1.5) if used < stepper.kmax // 2 else 1))
                h = direction * hlen
                jet = None
            if event is not None:
                comp, sign = event
                before, after = x[comp], xn[comp]
                if _crossed(before, after, sign):
                    th = _event_root(jet, stepper, x, h, comp, system, cfg)
                    xe = _state_at(jet, stepper, x, h * th)
                    te = t + h * th
                    samples.append((te, xe, True))
                    return _finish(samples, energy, system, steps, path, event=te)
            done = hlen + done if not last else length
            t = seg_start + direction * done if not last else seg_end
            x = xn
            for a, b in caps:
                if _block_norm(x, a, b) > cap:
                    raise BlowUp(f"state norm exceeded {cfg.blowup} at t = {complex(t)}")
            if record or last:
                samples.append((t, x, last))
    return _finish(samples, energy, system, steps, path)


def _crossed(before, after, sign):
    b = before.real if isinstance(before, gmpy2.mpc) else before
    a = after.real if isinstance(after, gmpy2.mpc) else after
    return (sign > 0 and b > 0 and a <= 0) or (sign < 0 and b < 0 and a >= 0)


def _state_at(jet, stepper, x, h):
    if jet is not None:
        return TaylorStepper.evaluate(jet, h)
    xn, _, _ = stepper.step(x, h)
    return xn


def _event_root(jet, stepper, x, h, comp, system, cfg):
    """Fraction th in (0, 1] of the step at which component ``comp`` vanishes."""
    lo, hi = mpf(0), mpf(1)
    th = mpf(1) / 2
    if jet is not None:
        c = jet[comp]
        hp = [h ** k for k in range(len(c))]
        coeffs = [v * w for v, w in zip(c, hp)]
        dco = [k * coeffs[k] for k in range(1, len(coeffs))]
        val = lambda s: _re(sum(v * s ** k for k, v in enumerate(coeffs)))  # noqa: E731
        dval = lambda s: _re(sum(v * s ** k for k, v in enumerate(dco)))  # noqa: E731
    else:
        val = lambda s: _re(_state_at(None, stepper, x, h * s)[comp])  # noqa: E731
        dval = None
    f_lo = val(lo)
    for _ in range(200):
        f = val(th)
        if (f > 0) == (f_lo > 0):
            lo, f_lo = th, f
        else:
            hi = th
        d = dval(th) if dval else None
        nxt = th - f / d if d else None
        if nxt is None or not (lo < nxt < hi):
            nxt = (lo + hi) / 2
        if abs(nxt - th) <= mpf(2) ** (-cfg.precision_bits + 4):
            return nxt
        th = nxt
    return th


def _re(v):
    return v.real if isinstance(v, gmpy2.mpc) else v


def _finish(samples, energy, system, steps, path, event=None):
    ref = energy(samples[0][1][:4]) if energy else None
    tr = Trajectory(samples, ref, 4, energy, event, path, steps)
    return tr


def _is_real_number(v):
    if isinstance(v, (complex, gmpy2.mpc)):
        return v.imag == 0
    return True


def integrate_flow(H, mu, nu, start, path, cfg=None, event=None, columns=(), record=True):
    """Integrate the Hamiltonian flow (and optional variational columns).

    Parameters
    ----------
    H : PolyHamiltonian
    mu, nu : real parameters
    start : sequence of 4 numbers
    path : ComplexPath or sequence of vertices
    cfg : IntegratorConfig
    event : tuple, optional
        ``(component, sign)`` stopping condition, see ``integrate_system``.
    columns : sequence of 4-vectors
        Initial values of variational solutions co-integrated with the flow.

    Returns
    -------
    Trajectory
        Samples hold the phase point followed by the columns.  On real
        paths with real data, complex columns are transported as pairs of
        real columns internally and recombined.
    """
    cfg = cfg or IntegratorConfig()
    if not isinstance(path, ComplexPath):
        path = ComplexPath(tuple(path))
    columns = [list(c) for c in columns]
    real = path.is_real() and all(_is_real_number(v) for v in start)
    split = []
    if real:
        real_cols = []
        for c in columns:
            if all(_is_real_number(v) for v in c):
                real_cols.append([_re(mpc(v)) if isinstance(v, (complex, gmpy2.mpc)) else mpf(v)
                                  for v in c])
                split.append(False)
            else:
                cc = [mpc(v) for v in c]
                real_cols.append([v.real for v in cc])
                real_cols.append([v.imag for v in cc])
                split.append(True)
        cols = real_cols
        conv = mpf
    else:
        cols = [[mpc(v) for v in c] for c in columns]
        conv = mpc
    system, F = hamiltonian_system(H, mu, nu, len(cols))
    system.convert(mpf)
    state = [conv(v) for v in start] + [v for c in cols for v in c]
    tr = integrate_system(system, state, path, cfg, event=event, conv=conv,
                          record=record, energy=F.energy)
    if real and any(split):
        tr.samples = [(t, _merge_columns(s, split), flag) for t, s, flag in tr.samples]
    return tr


def _merge_columns(state, split):
    out = list(state[:4])
    pos = 4
    for sp in split:
        if sp:
            re, im = state[pos:pos + 4], state[pos + 4:pos + 8]
            out.extend(gmpy2.mpc(a, b) for a, b in zip(re, im))
            pos += 8
        else:
            out.extend(state[pos:pos + 4])
            pos += 4
    return out


def integrate_variational(H, mu, nu, base, xi_start, cfg=None):
    """Transport variational solutions along the path of ``base``.

    The base trajectory is re-integrated together with the columns so the
    linearization is evaluated on the same solution.

    Parameters
    ----------
    base : Trajectory
        Provides the start point and path.
    xi_start : 4-vector or list of 4-vectors
    """
    cols = xi_start if xi_start and isinstance(xi_start[0], (list, tuple)) else [xi_start]
    start = base.samples[0][1][:4]
    return integrate_flow(H, mu, nu, start, base.path, cfg, columns=cols)


def energy_drift(traj):
    """max |H(sample) - H(start)| over the samples."""
    if not traj.samples:
        raise ValueError("empty trajectory")
    f = traj.energy
    ref = f(traj.samples[0][1][:4]) if traj.energy_reference is None else traj.energy_reference
    return max(abs(f(s[1][:4]) - ref) for s in traj.samples)
