"""Exact rational linear algebra and small numeric utilities.

Everything here operates on ``fractions.Fraction`` entries (lists of rows) so
identities can be checked with no rounding at all.  Floating-point callers use
the same routines with ``float`` entries; comparisons are then up to the
caller's tolerance.
"""

from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

from .errors import ParseError

Fr = Fraction


def parse_rational(value, field: str = "value") -> Fraction:
    """Parse an exact rational from ``"num/den"``, a decimal string, or an int.

    Decimal strings are read as exact decimal fractions ("0.25" -> 1/4).
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ParseError(f"{field}: booleans are not rationals")
    if isinstance(value, int):
        return Fr(value)
    if isinstance(value, float):
        # JSON numbers arrive as floats; treat the decimal literal as exact.
        return Fr(repr(value))
    if isinstance(value, str):
        text = value.strip()
        try:
            if "/" in text:
                num, den = text.split("/")
                return Fr(int(num.strip()), int(den.strip()))
            return Fr(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"{field}: malformed rational {value!r}") from exc
    raise ParseError(f"{field}: cannot parse rational from {type(value).__name__}")


def format_rational(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    return repr(x)


# ---------------------------------------------------------------------------
# matrices as list-of-rows


def identity_matrix(n, one=Fr(1), zero=Fr(0)):
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


def mat_transpose(M):
    return [list(col) for col in zip(*M)]


def mat_mul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row_a = A[i]
        out.append([sum(row_a[t] * B[t][j] for t in range(k)) for j in range(m)])
    return out


def mat_vec(M, v):
    return [sum(row[t] * v[t] for t in range(len(v))) for row in M]


def _one_over(x):
    """Exact reciprocal: Fractions for int/Fraction pivots, floats otherwise."""
    if isinstance(x, (int, Fraction)):
        return Fr(1) / Fr(x)
    return 1.0 / x


def det(M):
    """Determinant by fraction-preserving Gaussian elimination."""
    n = len(M)
    if n == 0:
        return Fr(1)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    A = [list(row) for row in M]
    sign = 1
    acc = Fr(1)
    for c in range(n):
        piv = None
        for r in range(c, n):
            if A[r][c] != 0:
                piv = r
                break
        if piv is None:
            return 0 * A[0][0]
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            sign = -sign
        acc = acc * A[c][c]
        inv = _one_over(A[c][c])
        for r in range(c + 1, n):
            if A[r][c] != 0:
                f = A[r][c] * inv
                A[r] = [A[r][k] - f * A[c][k] for k in range(c, n)]
                A[r] = [0] * c + A[r]
    return sign * acc


def mat_inverse(M):
    """Inverse by Gauss-Jordan; raises ZeroDivisionError on singular input."""
    n = len(M)
    A = [list(row) + [Fr(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        piv = None
        for r in range(c, n):
            if A[r][c] != 0:
                piv = r
                break
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        A[c], A[piv] = A[piv], A[c]
        ic = _one_over(A[c][c])
        A[c] = [x * ic for x in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return [row[n:] for row in A]


def mat_rank(M) -> int:
    if not M:
        return 0
    A = [list(row) for row in M]
    rows, cols = len(A), len(A[0])
    rank = 0
    for c in range(cols):
        piv = None
        for r in range(rank, rows):
            if A[r][c] != 0:
                piv = r
                break
        if piv is None:
            continue
        A[rank], A[piv] = A[piv], A[rank]
        inv = _one_over(A[rank][c])
        for r in range(rank + 1, rows):
            if A[r][c] != 0:
                f = A[r][c] * inv
                A[r] = [A[r][k] - f * A[rank][k] for k in range(cols)]
        rank += 1
        if rank == rows:
            break
    return rank


def submatrix(M, rows, cols):
    return [[M[r][c] for c in cols] for r in rows]


def index_tuples(n: int, g: int):
    """Strictly increasing g-tuples from range(n), lexicographic order."""
    return list(combinations(range(n), g))


def compound(M, g):
    """Matrix of all g x g minors, rows/cols indexed by increasing tuples.

    ``g = 0`` yields the 1 x 1 matrix [1], the natural empty-minor convention.
    """
    if g == 0:
        return [[Fr(1)]]
    p, q = len(M), len(M[0])
    row_t = index_tuples(p, g)
    col_t = index_tuples(q, g)
    return [[det(submatrix(M, rs, cs)) for cs in col_t] for rs in row_t]


def dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def norm_sq(v):
    return sum(a * a for a in v)


def frobenius_sq(M):
    return sum(x * x for row in M for x in row)


def sup_norm(v) -> int:
    return max(abs(x) for x in v) if v else 0


def op_norm_float(M) -> float:
    """Spectral norm of a rational/float matrix, evaluated in floats."""
    import numpy as np

    arr = np.array([[float(x) for x in row] for row in M], dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.svd(arr, compute_uv=False)[0])


# ---------------------------------------------------------------------------
# exact comparisons against rational powers

def _as_ratio(delta):
    if isinstance(delta, Fraction):
        return delta.numerator, delta.denominator
    if isinstance(delta, int):
        return delta, 1
    return None


def le_pow(x, base: int, delta) -> bool:
    """Exact test ``x <= base**delta`` for x >= 0 rational and delta = p/q.

    Falls back to floats when either side is not exact.
    """
    ratio = _as_ratio(delta)
    if ratio is not None and isinstance(x, (int, Fraction)) and x >= 0:
        p, q = ratio
        return x**q <= Fr(base) ** p
    return float(x) <= float(base) ** float(delta)


def ge_pow(x, base: int, delta) -> bool:
    """Exact test ``x >= base**delta`` (same conventions as :func:`le_pow`)."""
    ratio = _as_ratio(delta)
    if ratio is not None and isinstance(x, (int, Fraction)) and x >= 0:
        p, q = ratio
        return x**q >= Fr(base) ** p
    return float(x) >= float(base) ** float(delta)


def floor_pow(base: int, delta) -> int:
    """Largest integer r with r <= base**delta (delta in (0,1), base >= 0)."""
    r = 0
    while le_pow(r + 1, base, delta):
        r += 1
    return r


def ceil_pow(base: int, delta) -> int:
    """Smallest integer c with c >= base**delta."""
    c = 0
    while not ge_pow(c, base, delta):
        c += 1
    return c


# ---------------------------------------------------------------------------
# complex rationals for exact block matrices


class QQi:
    """Gaussian rational: exact complex number with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fr(re)
        self.im = Fr(im)

    def __add__(self, other):
        other = _coerce(other)
        return QQi(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return QQi(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __mul__(self, other):
        other = _coerce(other)
        return QQi(self.re * other.re - self.im * other.im,
                   self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        den = other.re * other.re + other.im * other.im
        if den == 0:
            raise ZeroDivisionError("division by zero QQi")
        return QQi((self.re * other.re + self.im * other.im) / den,
                   (self.im * other.re - self.re * other.im) / den)

    def conjugate(self):
        return QQi(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __abs__(self) -> float:
        return math.sqrt(float(self.abs2()))

    def __eq__(self, other):
        try:
            other = _coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def __repr__(self):
        return f"QQi({self.re}, {self.im})"


def _coerce(x):
    if isinstance(x, QQi):
        return x
    if isinstance(x, (int, Fraction)):
        return QQi(x, 0)
    raise TypeError(f"cannot coerce {type(x).__name__} to QQi")


def value_abs(v) -> float:
    """Magnitude of a block-matrix entry (QQi, Fraction, complex or float)."""
    if isinstance(v, QQi):
        return abs(v)
    return abs(complex(v)) if isinstance(v, complex) else abs(float(v))


def value_is_zero(v) -> bool:
    if isinstance(v, QQi):
        return not v
    return v == 0


# ---------------------------------------------------------------------------
# exact interval unions (used by the frequency-measure estimates)


def merge_intervals(intervals):
    """Union of closed intervals with exactly comparable endpoints.

    Returns disjoint intervals sorted by left endpoint; touching intervals
    are coalesced.
    """
    items = sorted((lo, hi) for lo, hi in intervals if hi >= lo)
    merged = []
    for lo, hi in items:
        if merged and lo <= merged[-1][1]:
            if hi > merged[-1][1]:
                merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return merged


def intervals_measure(intervals):
    return sum((hi - lo for lo, hi in intervals), start=Fr(0))
