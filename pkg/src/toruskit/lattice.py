"""Flat-torus lattice geometry: dual bases, quadratic forms, minor identities.

The central objects are a generator matrix ``V`` (columns generate the
lattice), its inverse-transpose ``W``, and the quadratic form
``mu(j) = |W j|^2`` whose values are the Laplacian eigenvalues of the torus.
All identity-grade computations run in exact rational arithmetic; a floating
mode exists for large enumerations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from . import exact
from .errors import (
    DependentVectors,
    DimensionMismatch,
    IdentityViolation,
    InvalidOrder,
    ShapeMismatch,
    SingularGenerators,
)

Fr = Fraction

DEFAULT_TOLERANCE = 1e-9

EXACT = "exact"
FLOATING = "floating"


@dataclass(frozen=True)
class LatticeBasis:
    """Generator matrix V (columns are the generators) and dual matrix W = V^{-T}."""

    d: int
    V: tuple
    W: tuple
    mode: str = EXACT
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def exact(self) -> bool:
        return self.mode == EXACT

    def V_rows(self):
        return [list(r) for r in self.V]

    def W_rows(self):
        return [list(r) for r in self.W]

    def W_inverse_rows(self):
        # W^{-1} = V^T, no extra inversion needed
        return exact.mat_transpose(self.V_rows())

    def to_dict(self):
        fmt = exact.format_rational if self.exact else (lambda x: x)
        return {
            "matrix": [[fmt(x) for x in row] for row in self.V],
            "mode": self.mode,
            "tolerance": self.tolerance,
        }


def _freeze(rows):
    return tuple(tuple(r) for r in rows)


def new_lattice(V, mode: str = EXACT, tolerance: float = DEFAULT_TOLERANCE) -> LatticeBasis:
    """Build a lattice basis from a square matrix of generator columns.

    ``V`` is given as rows (row-major); entries may be ints, Fractions,
    "num/den" strings or decimals.  Raises SingularGenerators when the
    generators are linearly dependent.
    """
    rows = [list(r) for r in V]
    d = len(rows)
    if d == 0 or any(len(r) != d for r in rows):
        raise ShapeMismatch("generator matrix must be square and nonempty")
    if mode == EXACT:
        rows = [[exact.parse_rational(x, f"V[{i}][{j}]") for j, x in enumerate(r)]
                for i, r in enumerate(rows)]
        if exact.det(rows) == 0:
            raise SingularGenerators("generator matrix has zero determinant")
        W = exact.mat_transpose(exact.mat_inverse(rows))
        return LatticeBasis(d=d, V=_freeze(rows), W=_freeze(W), mode=EXACT,
                            tolerance=tolerance)
    if mode == FLOATING:
        import numpy as np

        arr = np.array([[float(x) for x in r] for r in rows], dtype=float)
        scale = max(1.0, float(np.abs(arr).max()))
        if abs(np.linalg.det(arr)) <= tolerance * scale**d:
            raise SingularGenerators("generator matrix numerically singular")
        W = np.linalg.inv(arr).T
        return LatticeBasis(d=d, V=_freeze(arr.tolist()), W=_freeze(W.tolist()),
                            mode=FLOATING, tolerance=tolerance)
    raise ValueError(f"unknown mode {mode!r}")


def _check_dim(basis: LatticeBasis, v, name: str = "j") -> None:
    if len(v) != basis.d:
        raise DimensionMismatch(
            f"{name} has length {len(v)}, lattice dimension is {basis.d}")


def mu(basis: LatticeBasis, j):
    """Laplacian eigenvalue of mode j: squared euclidean length of W j."""
    _check_dim(basis, j)
    Wj = exact.mat_vec(basis.W_rows(), list(j))
    return exact.norm_sq(Wj)


def bilinear(basis: LatticeBasis, y, y2):
    """Scalar product <W y, W y2>; polarization of :func:`mu`."""
    _check_dim(basis, y, "y")
    _check_dim(basis, y2, "y2")
    W = basis.W_rows()
    return exact.dot(exact.mat_vec(W, list(y)), exact.mat_vec(W, list(y2)))


def mu_bounds(basis: LatticeBasis):
    """Floats (c, C) with c*|j|^2 <= mu(j) <= C*|j|^2 (euclidean |j|)."""
    import numpy as np

    arr = np.array([[float(x) for x in row] for row in basis.W], dtype=float)
    sv = np.linalg.svd(arr, compute_uv=False)
    return float(sv[-1] ** 2), float(sv[0] ** 2)


def compound_matrix(M, g: int):
    """g-th compound: all g x g minors, indexed by increasing tuples (lex).

    Entry at (row tuple a, column tuple b) is the determinant of the
    submatrix of M with rows a and columns b.
    """
    rows = [list(r) for r in M]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ShapeMismatch("compound_matrix needs a rectangular matrix")
    p, q = len(rows), len(rows[0])
    if not 1 <= g <= min(p, q):
        raise InvalidOrder(f"order {g} outside 1..{min(p, q)}")
    return exact.compound(rows, g)


def cauchy_binet_det(M, N):
    """det(M N) via the sum over g-minors; independent of direct evaluation.

    M is g x d and N is d x g with g <= d.
    """
    Mr = [list(r) for r in M]
    Nr = [list(r) for r in N]
    if not Mr or not Nr:
        raise ShapeMismatch("empty factor")
    g, d = len(Mr), len(Mr[0])
    if len(Nr) != d or any(len(r) != g for r in Nr) or any(len(r) != d for r in Mr):
        raise ShapeMismatch(f"incompatible shapes {g}x{d} and {len(Nr)}x{len(Nr[0])}")
    if g > d:
        raise ShapeMismatch("needs g <= d")
    total = Fr(0)
    cols = list(range(g))
    for sel in combinations(range(d), g):
        a = exact.det(exact.submatrix(Mr, range(g), sel))
        b = exact.det(exact.submatrix(Nr, sel, cols))
        total = total + a * b
    return total


@dataclass(frozen=True)
class GramIdentity:
    """Result of the Gram-determinant minor identity for integer vectors."""

    det: object               # Gram determinant under bilinear(.,.)
    p: tuple                  # integer minor vector, length C(d, g)
    image_norm_sq: object     # |C_g(W) p|^2, equals det exactly in exact mode
    lower_bound: object       # certified positive floor |p|^2 / frob(C_g(W^-1))^2

    def as_pair(self):
        return self.det, self.p


def gram_det_identity(basis: LatticeBasis, fs) -> GramIdentity:
    """Gram determinant of integer vectors against the minor-vector identity.

    Returns the determinant of the Gram matrix of ``fs`` under the lattice
    scalar product together with the integer vector ``p`` of g x g minors of
    the column matrix F; checks det = |C_g(W) p|^2 and the uniform positive
    floor coming from the invertibility of the compound matrix.
    """
    vecs = [list(map(int, f)) for f in fs]
    g = len(vecs)
    if g == 0:
        raise DependentVectors("need at least one vector")
    for f in vecs:
        _check_dim(basis, f, "f")
    d = basis.d
    if g > d:
        raise DependentVectors(f"{g} vectors in dimension {d} are dependent")
    F_cols = exact.mat_transpose(vecs)  # d x g, columns are the f_i
    A = [[bilinear(basis, vecs[i], vecs[l]) for l in range(g)] for i in range(g)]
    det_a = exact.det(A)
    if det_a == 0:
        raise DependentVectors("Gram determinant vanishes: vectors dependent")
    p = [exact.det(exact.submatrix(F_cols, sel, range(g)))
         for sel in combinations(range(d), g)]
    cw = exact.compound(basis.W_rows(), g)
    image = exact.mat_vec(cw, p)
    image_sq = exact.norm_sq(image)
    p_sq = exact.norm_sq(p)
    if basis.exact:
        if det_a != image_sq:
            raise IdentityViolation("Gram determinant != |C_g(W) p|^2")
        if all(x == 0 for x in p):
            raise IdentityViolation("independent vectors produced p = 0")
        frob = exact.frobenius_sq(exact.compound(basis.W_inverse_rows(), g))
        floor = p_sq / frob
        if det_a < floor:
            raise IdentityViolation("Gram determinant below certified floor")
    else:
        scale = max(abs(float(det_a)), abs(float(image_sq)), 1.0)
        if abs(float(det_a) - float(image_sq)) > basis.tolerance * scale:
            raise IdentityViolation("Gram identity residual above tolerance")
        frob = exact.frobenius_sq(exact.compound(basis.W_inverse_rows(), g))
        floor = float(p_sq) / float(frob)
    return GramIdentity(det=det_a, p=tuple(p), image_norm_sq=image_sq,
                        lower_bound=floor)
