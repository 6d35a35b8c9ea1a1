"""Finite-box block operators: diagonal splitting, homological equation, decay.

A block matrix here is a finitely supported map ``(j, j') -> value`` over a
box ``[-N, N]^d``, one mode per index.  Values may be exact Gaussian rationals
(:class:`toruskit.exact.QQi`), Fractions or plain complex numbers; all exact
statements hold entrywise when the inputs are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import exact
from .errors import BoxMismatch, IntraClusterEntry
from .clusters import ClusterPartition
from .lattice import LatticeBasis, mu

Fr = Fraction


@dataclass(frozen=True)
class BlockMatrix:
    box_radius: int
    d: int
    entries: dict  # (j, j') -> value, zeros never stored

    @staticmethod
    def from_entries(box_radius: int, d: int, items) -> "BlockMatrix":
        entries = {}
        for (j, j2), v in dict(items).items():
            j, j2 = tuple(int(x) for x in j), tuple(int(x) for x in j2)
            if len(j) != d or len(j2) != d:
                raise BoxMismatch("entry index dimension mismatch")
            if max(exact.sup_norm(j), exact.sup_norm(j2)) > box_radius:
                raise BoxMismatch("entry outside the box")
            if not exact.value_is_zero(v):
                entries[(j, j2)] = v
        return BlockMatrix(box_radius, d, entries)

    def same_box(self, other) -> bool:
        return self.box_radius == other.box_radius and self.d == other.d

    def get(self, j, j2):
        return self.entries.get((tuple(j), tuple(j2)), 0)

    def __add__(self, other) -> "BlockMatrix":
        if not self.same_box(other):
            raise BoxMismatch("adding block matrices from different boxes")
        out = dict(self.entries)
        for k, v in other.entries.items():
            w = out.get(k, 0) + v
            if exact.value_is_zero(w):
                out.pop(k, None)
            else:
                out[k] = w
        return BlockMatrix(self.box_radius, self.d, out)

    def __eq__(self, other):
        return (isinstance(other, BlockMatrix) and self.same_box(other)
                and self.entries == other.entries)

    def support(self):
        return sorted(self.entries)

    def to_triplets(self):
        """JSON-ready triplet list; exact values rendered as num/den strings."""
        rows = []
        for (j, j2), v in sorted(self.entries.items()):
            if isinstance(v, exact.QQi):
                re, im = exact.format_rational(v.re), exact.format_rational(v.im)
            elif isinstance(v, (int, Fraction)):
                re, im = exact.format_rational(Fr(v)), "0"
            else:
                c = complex(v)
                re, im = c.real, c.imag
            rows.append({"j": list(j), "j_prime": list(j2), "re": re, "im": im})
        return rows

    @staticmethod
    def from_triplets(box_radius: int, d: int, rows) -> "BlockMatrix":
        items = {}
        for rec in rows:
            j = tuple(int(x) for x in rec["j"])
            j2 = tuple(int(x) for x in rec["j_prime"])
            re, im = rec["re"], rec["im"]
            if isinstance(re, (str, int)) and isinstance(im, (str, int)):
                v = exact.QQi(exact.parse_rational(re, "re"),
                              exact.parse_rational(im, "im"))
            else:
                v = complex(float(re), float(im))
            items[(j, j2)] = v
        return BlockMatrix.from_entries(box_radius, d, items)


def dn_split(Q: BlockMatrix, partition: ClusterPartition):
    """Split into the intra-cluster part and the cross-cluster part.

    The two parts recombine to Q exactly, entry by entry.
    """
    if Q.box_radius != partition.box_radius or Q.d != partition.d:
        raise BoxMismatch("matrix and partition on different boxes")
    diag = {}
    cross = {}
    for (j, j2), v in Q.entries.items():
        if partition.assignment[j] == partition.assignment[j2]:
            diag[(j, j2)] = v
        else:
            cross[(j, j2)] = v
    return (BlockMatrix(Q.box_radius, Q.d, diag),
            BlockMatrix(Q.box_radius, Q.d, cross))


@dataclass(frozen=True)
class HomologicalSolution:
    X: BlockMatrix
    R: BlockMatrix
    delta: object


def _gap_above_threshold(gap, s: int, delta) -> bool:
    # |gap| >= (1/4) * s**delta, exact when both sides are rational powers
    return exact.ge_pow(4 * abs(gap), s, delta)


def solve_homological(basis: LatticeBasis, W_ND: BlockMatrix,
                      partition: ClusterPartition, delta) -> HomologicalSolution:
    """Solve the commutator equation for a cross-cluster interaction.

    Where the eigenvalue gap clears ``(|j|+|j'|)**delta / 4`` the entry is
    divided by the gap (building X); elsewhere it is moved, negated, into the
    remainder R.  The identity ``gap * X = W + R`` then holds entrywise with
    no error term.
    """
    if W_ND.box_radius != partition.box_radius or W_ND.d != partition.d:
        raise BoxMismatch("matrix and partition on different boxes")
    x_entries = {}
    r_entries = {}
    for (j, j2), w in W_ND.entries.items():
        if partition.assignment[j] == partition.assignment[j2]:
            raise IntraClusterEntry(f"entry {(j, j2)} is intra-cluster")
        gap = mu(basis, j2) - mu(basis, j)
        s = exact.sup_norm(j) + exact.sup_norm(j2)
        if _gap_above_threshold(gap, s, delta):
            x_entries[(j, j2)] = w / gap
        else:
            r_entries[(j, j2)] = -w
    return HomologicalSolution(
        X=BlockMatrix(W_ND.box_radius, W_ND.d, x_entries),
        R=BlockMatrix(W_ND.box_radius, W_ND.d, r_entries),
        delta=delta,
    )


def homological_residual(basis: LatticeBasis, W_ND: BlockMatrix,
                         solution: HomologicalSolution):
    """First nonzero value of gap*X - W - R over the joint support, else None."""
    keys = set(W_ND.entries) | set(solution.X.entries) | set(solution.R.entries)
    for j, j2 in sorted(keys):
        gap = mu(basis, j2) - mu(basis, j)
        res = gap * solution.X.get(j, j2) - W_ND.get(j, j2) - solution.R.get(j, j2)
        if not exact.value_is_zero(res):
            return (j, j2), res
    return None


def cluster_weight_operator(partition: ClusterPartition) -> BlockMatrix:
    """Diagonal operator constant on clusters with value (max |j| in cluster)^2.

    Commutes exactly with every intra-cluster block matrix.
    """
    entries = {}
    for c in partition.clusters:
        w = c.M_alpha**2
        if w == 0:
            continue
        for j in c.members:
            entries[(j, j)] = Fr(w)
    return BlockMatrix(partition.box_radius, partition.d, entries)


def commutator(A: BlockMatrix, diag: BlockMatrix) -> BlockMatrix:
    """[A, D] for diagonal D: entry (j,j') scaled by D_{j'j'} - D_{jj}."""
    if not A.same_box(diag):
        raise BoxMismatch("commutator operands on different boxes")
    out = {}
    for (j, j2), v in A.entries.items():
        factor = diag.get(j2, j2) - diag.get(j, j)
        w = v * factor
        if not exact.value_is_zero(w):
            out[(j, j2)] = w
    return BlockMatrix(A.box_radius, A.d, out)


def norm_equivalence_constants(partition: ClusterPartition, r: float = 1.0):
    """Floats (c, C) comparing the cluster-weight norm with the Sobolev norm.

    Computed over the box from the weight ratios; a cluster whose maximal
    mode is the origin alone yields c = 0, reported as-is.
    """
    lo, hi = math.inf, 0.0
    weight = {}
    for c in partition.clusters:
        for j in c.members:
            weight[j] = c.M_alpha**2
    for j, w in weight.items():
        t = w / (1.0 + sum(x * x for x in j))
        lo, hi = min(lo, t), max(hi, t)
    if not weight:
        return 0.0, 0.0
    return lo ** (r / 2.0), hi ** (r / 2.0)


@dataclass
class DecayProfile:
    sigma: float
    seminorms: dict      # N -> sup over entries of |v| (1+|j-j'|)^N (1+|j|+|j'|)^-sigma
    s_norms: dict        # s -> space-only decay norm

    def to_dict(self):
        return {"sigma": self.sigma,
                "seminorms": {str(k): v for k, v in sorted(self.seminorms.items())},
                "s_norms": {str(k): v for k, v in sorted(self.s_norms.items())}}


def decay_profile(Q: BlockMatrix, sigma, n_list, s_list=()) -> DecayProfile:
    """Off-diagonal decay seminorms and the weighted row-sup decay norm.

    The s-norm is the space-only specialization of the time-space decay norm:
    ``|Q|_s^2 = sum_h max(1, |h|)^{2s} (sup_{j-j'=h} |Q_j^{j'}|)^2``.
    """
    if not n_list:
        raise ValueError("need at least one decay order")
    seminorms = {int(n): 0.0 for n in n_list}
    sup_by_offset = {}
    for (j, j2), v in Q.entries.items():
        a = exact.value_abs(v)
        if a == 0.0:
            continue
        off = max(abs(x - y) for x, y in zip(j, j2)) if Q.d else 0
        size = exact.sup_norm(j) + exact.sup_norm(j2)
        base = a / (1.0 + size) ** float(sigma)
        for n in seminorms:
            seminorms[n] = max(seminorms[n], base * (1.0 + off) ** n)
        h = tuple(x - y for x, y in zip(j, j2))
        if a > sup_by_offset.get(h, 0.0):
            sup_by_offset[h] = a
    s_norms = {}
    for s in s_list:
        total = 0.0
        for h, a in sup_by_offset.items():
            total += max(1, exact.sup_norm(h)) ** (2 * float(s)) * a * a
        s_norms[float(s)] = math.sqrt(total)
    return DecayProfile(sigma=float(sigma), seminorms=seminorms, s_norms=s_norms)


def verify_remainder_support(solution: HomologicalSolution,
                             delta=None) -> list:
    """Remainder entries must sit far off-diagonal: |j-j'| >= (|j|+|j'|)**delta / 2.

    Returns the violating index pairs (empty whenever the partition separation
    holds, since near pairs with small eigenvalue gaps would have been linked).
    """
    delta = solution.delta if delta is None else delta
    bad = []
    for (j, j2) in solution.R.support():
        off = max(abs(x - y) for x, y in zip(j, j2))
        s = exact.sup_norm(j) + exact.sup_norm(j2)
        if not exact.ge_pow(2 * off, s, delta):
            bad.append((j, j2))
    return bad


def random_cross_cluster_matrix(partition: ClusterPartition, count: int,
                                rng) -> BlockMatrix:
    """Random exact-valued matrix supported on cross-cluster pairs.

    Used by experiments and tests; ``rng`` is a ``random.Random``.
    """
    sites = sorted(partition.assignment)
    entries = {}
    attempts = 0
    while len(entries) < count and attempts < 50 * count:
        attempts += 1
        j = sites[rng.randrange(len(sites))]
        j2 = sites[rng.randrange(len(sites))]
        if partition.assignment[j] == partition.assignment[j2]:
            continue
        v = exact.QQi(Fr(rng.randint(-9, 9), rng.randint(1, 9)),
                      Fr(rng.randint(-9, 9), rng.randint(1, 9)))
        if v:
            entries[(j, j2)] = v
    return BlockMatrix(partition.box_radius, partition.d, entries)
