"""
Extended-precision plumbing shared by the numerical modules.

All phase-space arithmetic uses gmpy2 ``mpfr``/``mpc`` numbers at the
precision of the current gmpy2 context.  mpmath is kept in sync so that
special functions and quadrature run at the same precision.
"""
from contextlib import contextmanager
from fractions import Fraction

import gmpy2
import mpmath

DEFAULT_PRECISION = 128


@contextmanager
def working_precision(bits):
    """Set gmpy2 and mpmath to ``bits`` of mantissa inside the block."""
    bits = int(bits)
    if bits < 53:
        raise ValueError("precision below 53 bits is not supported")
    with gmpy2.context(gmpy2.get_context(), precision=bits,
                             real_prec=bits, imag_prec=bits):
        with mpmath.workprec(bits):
            yield


def current_precision():
    return gmpy2.get_context().precision


def mpf(x):
    """Convert a Fraction, int, float, str, mpmath or gmpy2 number to mpfr."""
    if isinstance(x, Fraction):
        return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
    if isinstance(x, mpmath.mpf):
        sign, man, exp, _ = x._mpf_
        if not man:
            if exp:
                return gmpy2.mpfr(float(x))
            return gmpy2.mpfr(0)
        v = gmpy2.mul_2exp(gmpy2.mpfr(int(man)), int(exp))
        return -v if sign else v
    return gmpy2.mpfr(x)


def mpc(x, y=None):
    """Convert to mpc; ``y`` is an optional imaginary part."""
    if y is not None:
        return gmpy2.mpc(mpf(x), mpf(y))
    if isinstance(x, gmpy2.mpc):
        return gmpy2.mpc(x)
    if isinstance(x, mpmath.mpc):
        return gmpy2.mpc(mpf(x.real), mpf(x.imag))
    if isinstance(x, complex):
        return gmpy2.mpc(x)
    return gmpy2.mpc(mpf(x))


def to_mpmath(x):
    """Convert a gmpy2 number (real or complex) to mpmath."""
    if isinstance(x, gmpy2.mpc):
        return mpmath.mpc(to_mpmath(x.real), to_mpmath(x.imag))
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    x = gmpy2.mpfr(x)
    if gmpy2.is_zero(x):
        return mpmath.mpf(0)
    man, exp = x.as_mantissa_exp()
    return mpmath.mpf((int(man), int(exp)))


def from_mpmath(x):
    if isinstance(x, mpmath.mpc):
        return mpc(x)
    return mpf(x)


def cabs(x):
    """Absolute value returning mpfr for real or complex input."""
    return abs(x)


def norm(v):
    """Euclidean norm of a sequence of gmpy2 numbers."""
    s = gmpy2.mpfr(0)
    for a in v:
        s += gmpy2.norm(a) if isinstance(a, gmpy2.mpc) else a * a
    return gmpy2.sqrt(s)


def max_abs(v):
    return max((abs(a) for a in v), default=gmpy2.mpfr(0))


def to_decimal_string(x, digits=None):
    """Decimal string for a real gmpy2/mpmath number at full precision."""
    if digits is None:
        digits = int(current_precision() * 0.30103) + 1
    return mpmath.nstr(to_mpmath(mpf(x) if not isinstance(x, mpmath.mpf) else x),
                       digits, min_fixed=-5, max_fixed=5)


def solve_linear(A, b):
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Works for any field supporting ``abs``, so exact Fractions and gmpy2
    numbers alike.

    Parameters
    ----------
    A : list of lists
        Square matrix (not modified).
    b : list
        Right-hand side.
    """
    n = len(A)
    M = [list(row) + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(M[r][col]))
        if M[piv][col] == 0:
            raise ZeroDivisionError("singular matrix")
        M[col], M[piv] = M[piv], M[col]
        pivot = M[col][col]
        for r in range(col + 1, n):
            f = M[r][col] / pivot
            if f != 0:
                Mr, Mc = M[r], M[col]
                for c in range(col, n + 1):
                    Mr[c] -= f * Mc[c]
    x = [0] * n
    for r in range(n - 1, -1, -1):
        s = M[r][n]
        for c in range(r + 1, n):
            s -= M[r][c] * x[c]
        x[r] = s / M[r][r]
    return x


def det3(m):
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def det4(m):
    total = 0
    for j in range(4):
        minor = [[m[r][c] for c in range(4) if c != j] for r in range(1, 4)]
        term = m[0][j] * det3(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def null_vector4(m):
    """Null vector of a rank-3 4x4 matrix from its adjugate.

    Every column of adj(m) lies in the kernel; the largest one is returned.
    """
    best, best_norm = None, -1
    for j in range(4):
        col = []
        for i in range(4):
            minor = [[m[r][c] for c in range(4) if c != i] for r in range(4) if r != j]
            cof = det3(minor)
            col.append(cof if (i + j) % 2 == 0 else -cof)
        nrm = norm(col)
        if nrm > best_norm:
            best, best_norm = col, nrm
    return best
