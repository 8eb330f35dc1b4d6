"""
Command-line front end.

    python -m sepsplit <subcommand> [options]

Subcommands: formal, equilibrium, trace, split, stokes, melnikov, verify.
Exit status is 0 on success, 1 when a computation fails (a JSON error
record goes to stderr) and 2 on usage or input errors.
"""
import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from importlib import resources
from pathlib import Path

import gmpy2

from .hamiltonian import find_equilibrium, load_hamiltonian, parse_hamiltonian
from .numeric import mpc, mpf, to_decimal_string, working_precision
from .ode import ComplexPath, IntegrationError, IntegratorConfig, integrate_flow

MIN_PRECISION = 64


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def bundled_models():
    return sorted(p.name[:-4] for p in resources.files("sepsplit.models").iterdir()
                  if p.name.endswith(".ham"))


def load_model(name):
    """Hamiltonian from a file path or the name of a bundled model."""
    path = Path(name)
    try:
        if path.exists():
            return load_hamiltonian(path)
        res = resources.files("sepsplit.models").joinpath(f"{name}.ham")
        if res.is_file():
            return parse_hamiltonian(res.read_text())
    except ValueError as exc:
        raise UsageError(f"malformed Hamiltonian file {name}: {exc}") from None
    raise UsageError(f"no such model file or bundled model: {name}")


def parse_list(text, conv=str):
    if text is None:
        return None
    return [conv(s.strip()) for s in text.split(",") if s.strip()]


def parse_real(s):
    try:
        Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a real number: {s!r}") from None
    return mpf(s) if "/" not in s else mpf(Fraction(s))


def parse_complex(s):
    s = s.strip()
    if "j" not in s and "i" not in s:
        return parse_real(s)
    try:
        z = complex(s.replace("i", "j"))
    except ValueError:
        raise UsageError(f"not a complex number: {s!r}") from None
    return gmpy2.mpc(mpf(repr(z.real)), mpf(repr(z.imag)))


def fmt(x, digits=None):
    """Decimal string for a real number."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, Fraction)):
        return str(x)
    return to_decimal_string(mpf(x), digits)


def fmt_c(z, digits=None):
    z = mpc(z)
    return [fmt(z.real, digits), fmt(z.imag, digits)]


def emit(args, rows=None, header=None, obj=None):
    """Write a CSV table or a JSON object to --out or stdout."""
    fmt_name = getattr(args, "format", None)
    if obj is None and fmt_name == "json":
        obj = {"precision": args.precision, "rows": [dict(zip(header, r)) for r in rows]}
    if obj is not None:
        text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args):
    tol = float(args.tol) if args.tol else 2.0 ** (-args.precision + 28)
    return IntegratorConfig(precision_bits=args.precision, abs_tol=tol, rel_tol=tol)


def _pool_map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


# ---------------------------------------------------------------------------
# subcommands


def cmd_formal(args):
    from .formal import formal_separatrix, formal_u
    H = load_model(args.model)
    N = args.order or 8
    table = {k: v for k, v in H.potential_table().items() if k[1] != 0}
    sep = formal_separatrix(table, N + 1)
    u = formal_u(H.frequency_table(), sep, N)
    r = lambda q: f"{q.numerator}/{q.denominator}"  # noqa: E731
    obj = {
        "order": N,
        "p": [[r(c) for c in sep.p[k].c] for k in range(1, N + 1)],
        "q": [[r(c) for c in sep.q[k]] for k in range(1, N + 1)],
        "mu": [r(c) for c in sep.mu[:N + 2]],
        "C": [r(c) for c in sep.C[:N + 3]],
        "u": [[r(c) for c in row] for row in u.u],
        "omega": [r(c) for c in u.omega],
    }
    emit(args, obj=obj)


def cmd_equilibrium(args):
    H = load_model(args.model)
    mus = parse_list(args.mu, parse_real) or [mpf("0.01")]
    nu = parse_real(args.nu)
    header = ["mu", "nu", "x1", "y1", "x2", "y2", "lambda", "omega", "residual"]
    rows = []
    for mu in mus:
        eq = find_equilibrium(H, mu, nu)
        rows.append([fmt(mu), fmt(nu)] + [fmt(c) for c in eq.location]
                    + [fmt(eq.lam), fmt(eq.omega), fmt(eq.residual, 6)])
    emit(args, rows, header)


def cmd_trace(args):
    from .formal import evaluate_formal
    from .manifolds import _formal_data, normal_form_eps
    H = load_model(args.model)
    mu = parse_real(args.mu or "0.01")
    nu = parse_real(args.nu)
    if args.start:
        start = parse_list(args.start, parse_real)
        if len(start) != 4:
            raise UsageError("--start needs four comma-separated numbers")
    else:
        sep = _formal_data(H, args.order or 8)
        eq = find_equilibrium(H, mu, nu)
        eps = normal_form_eps(sep, mu)
        apex = evaluate_formal(sep, eps, mpf(0))
        saddle = sum(mpf(sep.p[k](0)) * eps ** (2 * k) for k in range(1, sep.order + 1))
        start = [eq.location[0] + apex[0] - saddle, mpf(0), eq.location[2], eq.location[3]]
    verts = parse_list(args.path or "0,20", parse_complex)
    tr = integrate_flow(H, mu, nu, start, ComplexPath(tuple(verts)), _config(args))
    h0 = tr.energy(tr.samples[0][1][:4])
    header = ["re_t", "im_t"]
    for name in ("x1", "y1", "x2", "y2"):
        header += [f"re_{name}", f"im_{name}"]
    header.append("energy_error")
    rows = []
    for t, x, _ in tr.samples:
        t = mpc(t)
        row = [fmt(t.real), fmt(t.imag)]
        for c in x[:4]:
            row += fmt_c(c)
        row.append(fmt(abs(tr.energy(x[:4]) - h0), 6))
        rows.append(row)
    emit(args, rows, header)


def _split_point(job):
    from .manifolds import compute_splitting, mu_for_lambda, default_config
    model, mu, lam, nu, bits, tol, order = job
    with working_precision(bits):
        H = parse_hamiltonian(model)
        nu = mpf(nu)
        if mu is None:
            mu = mu_for_lambda(H, mpf(lam), nu)
        mu = mpf(mu)
        cfg = default_config(bits, tol)
        res = compute_splitting(H, mu, nu, cfg, N=order)
        m = res.measurement
        ls = m.log_scaled
        return [fmt(mu), fmt(nu), fmt(m.lam), fmt(m.omega), fmt(abs(m.theta[0])),
                fmt(m.E_e1), fmt(m.E_h1), fmt(m.drift, 6) if m.drift is not None else "",
                fmt(m.noise_floor, 6), fmt(m.upper_bound),
                fmt(ls) if ls is not None and not m.upper_bound else "",
                fmt(abs(m.theta[2]), 6), fmt(abs(m.theta[3]), 6),
                fmt(m.delta_norm, 6), fmt(m.diagnostics["energy_error"], 6)]


def cmd_split(args):
    from .hamiltonian import format_hamiltonian
    H = load_model(args.model)
    text = format_hamiltonian(H)
    mus = parse_list(args.mu)
    lams = parse_list(args.lam)
    if not mus and not lams:
        raise UsageError("give --mu or --lam")
    for v in (mus or []) + (lams or []):
        parse_real(v)
    parse_real(args.nu)
    tol = float(args.tol) if args.tol else None
    jobs = [(text, m, None, args.nu, args.precision, tol, args.order or 8) for m in mus or []]
    jobs += [(text, None, l, args.nu, args.precision, tol, args.order or 8) for l in lams or []]
    rows = _pool_map(_split_point, jobs, args.jobs)
    rows.sort(key=lambda r: mpf(r[0]))
    header = ["mu", "nu", "lambda", "omega", "abs_theta1", "E_e1", "E_h1", "theta1_drift",
              "noise_floor", "upper_bound", "log_E_e1_plus_2pi_omega_over_lambda",
              "abs_theta3", "abs_theta4", "delta_norm", "energy_error"]
    emit(args, rows, header)


def cmd_stokes(args):
    from .manifolds import _formal_data
    from .stokes import compute_stokes
    H = load_model(args.model)
    nu = parse_real(args.nu)
    T_list = parse_list(args.T, parse_real) if args.T else None
    tau = parse_real(args.tau_match)
    res = compute_stokes(H, nu, tau_match=tau, T_list=T_list, cfg=_config(args),
                         order=args.order, formal=_formal_data(H, 4))
    r = res.result
    fit = {}
    for k, v in r.fit.items():
        if isinstance(v, gmpy2.mpc):
            fit[k] = fmt_c(v, 20)
        elif isinstance(v, (bool, int)) or v is None:
            fit[k] = v
        else:
            fit[k] = fmt(v, 20)
    obj = {
        "precision": args.precision,
        "nu": fmt(nu),
        "tau_match": fmt(tau),
        "b0": fmt_c(r.b0),
        "a0": fmt(r.a0),
        "bn": [fmt_c(b) for b in r.bn],
        "an": [fmt(a) for a in r.an],
        "fit": fit,
        "samples": [{"T": fmt(t), "pairing": fmt_c(v)} for t, v in r.pairing_samples],
        "diagnostics": {k: fmt(v, 12) for k, v in r.diagnostics.items()},
    }
    emit(args, obj=obj)


def cmd_melnikov(args):
    from .melnikov import (melnikov_model_residue, melnikov_profile_quadrature,
                           melnikov_quadrature, melnikov_residue, melnikov_residue_exact)
    if args.mu:
        H = load_model(args.model)
        header = ["mu", "M_quadrature_re", "M_quadrature_im", "M_residue_re", "M_residue_im",
                  "rel_diff", "quadrature_error"]
        rows = []
        for mu in parse_list(args.mu, parse_real):
            q = melnikov_quadrature(H, mu)
            r = melnikov_model_residue(H, mu)
            rel = abs(q.M - r.M) / abs(r.M) if abs(r.M) > 0 else abs(q.M)
            rows.append([fmt(mu)] + fmt_c(q.M) + fmt_c(r.M) + [fmt(rel, 6), fmt(q.error, 6)])
        emit(args, rows, header)
        return
    m = args.m
    if m < 1:
        raise UsageError("--m must be a positive integer")
    c0, w0 = parse_real(args.c0), parse_real(args.omega0)
    header = ["eps", "M_quadrature_re", "M_quadrature_im", "M_residue_re", "M_residue_im",
              "rel_diff", "M_exact_re", "M_exact_im", "rel_diff_exact"]
    rows = []
    for eps in parse_list(args.eps or "0.3,0.4,0.5", parse_real):
        q = melnikov_profile_quadrature(m, c0, w0, eps).M
        # the displayed closed form is real; M itself carries the factor i
        r = gmpy2.mpc(0, melnikov_residue(m, c0, w0, eps))
        x = melnikov_residue_exact(m, c0, w0, eps)
        rows.append([fmt(eps)] + fmt_c(q) + fmt_c(r) + [fmt(abs(q - r) / abs(q), 6)]
                    + fmt_c(x) + [fmt(abs(q - x) / abs(q), 6)])
    emit(args, rows, header)


def cmd_verify(args):
    from .verify import run_checks
    results = run_checks(args.model, quick=not args.full)
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    if args.out:
        Path(args.out).write_text(json.dumps(
            [{"check": n, "passed": p, "detail": d} for n, p, d in results],
            sort_keys=True, indent=1) + "\n")
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="sepsplit",
                                description="Exponentially small separatrix splitting "
                                            "at a saddle-center.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default="csv"):
        sp.add_argument("--model", default="cubic",
                        help="Hamiltonian file or bundled model (%s)" % ", ".join(bundled_models()))
        sp.add_argument("--precision", type=int, default=128, help="mantissa bits")
        sp.add_argument("--tol", default=None, help="integrator tolerance")
        sp.add_argument("--order", type=int, default=None, help="series order")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        sp.add_argument("--nu", default="0", help="perturbation strength")
        sp.add_argument("--mu", default=None, help="comma-separated parameter values")

    sp = sub.add_parser("formal", help="formal separatrix and angle coefficients (JSON)")
    common(sp, "json")
    sp.set_defaults(func=cmd_formal)

    sp = sub.add_parser("equilibrium", help="saddle-center location and spectrum")
    common(sp)
    sp.set_defaults(func=cmd_equilibrium)

    sp = sub.add_parser("trace", help="integrate the flow along a complex-time path")
    common(sp)
    sp.add_argument("--start", default=None, help="x1,y1,x2,y2 (default: loop apex)")
    sp.add_argument("--path", default=None, help="comma-separated complex vertices")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("split", help="measure the splitting over a parameter sweep")
    common(sp)
    sp.add_argument("--lam", default=None, help="comma-separated target exponents")
    sp.set_defaults(func=cmd_split)

    sp = sub.add_parser("stokes", help="Stokes constant of the inner equation (JSON)")
    common(sp, "json")
    sp.set_defaults(precision=192)
    sp.add_argument("--tau-match", default="40", help="matching radius")
    sp.add_argument("--T", default=None, help="comma-separated descent depths")
    sp.set_defaults(func=cmd_stokes)

    sp = sub.add_parser("melnikov", help="Melnikov integral: quadrature vs residues")
    common(sp)
    sp.add_argument("--m", type=int, default=1, help="power of x1 in R = c0 x1^m x2")
    sp.add_argument("--c0", default="1")
    sp.add_argument("--omega0", default="1")
    sp.add_argument("--eps", default=None, help="comma-separated eps values")
    sp.set_defaults(func=cmd_melnikov)

    sp = sub.add_parser("verify", help="run the invariant suite")
    common(sp)
    sp.add_argument("--full", action="store_true", help="include the slower checks")
    sp.set_defaults(func=cmd_verify)
    return p


def _error(kind, exc, code):
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__,
                                 "message": str(exc)}, sort_keys=True) + "\n")
    return code


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.precision < MIN_PRECISION:
        return _error("usage", UsageError(f"precision must be at least {MIN_PRECISION} bits"), 2)
    if args.jobs is not None and args.jobs < 1:
        return _error("usage", UsageError("--jobs must be positive"), 2)
    try:
        with working_precision(args.precision):
            code = args.func(args)
    except UsageError as exc:
        return _error("usage", exc, 2)
    except (ArithmeticError, IntegrationError, ValueError, NotImplementedError) as exc:
        return _error("computation", exc, 1)
    return code or 0


def main():
    sys.exit(run())
