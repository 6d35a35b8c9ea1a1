"""Eigenvalue clustering on integer boxes: chains, partitions, verification.

A mode ``j`` is paired with its eigenvalue through ``Phi(j) = (j, mu_j)``.
Chains link modes whose Phi-images stay within a fixed distance; the cluster
partition is the transitive closure of the one-step relation whose distance
budget grows like ``(|j| + |j'|)**delta``.  Norms on multi-indices are
sup-norms throughout; the Phi-difference uses the sup of the spatial part and
the eigenvalue gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import NamedTuple

from . import exact
from .errors import DeltaOutOfRange, SearchTruncated
from .lattice import LatticeBasis, mu
from .search import PathSearchResult, UnionFind, longest_path

Fr = Fraction


def chain_exponent(d: int) -> int:
    """Dimensional exponent bounding chain lengths: 2(2d+1)d."""
    return 2 * (2 * d + 1) * d


def delta_max(d: int) -> Fraction:
    """Upper end of the guaranteed delta range: 1/(2*chain_exponent(d) + 2)."""
    return Fr(1, 2 * chain_exponent(d) + 2)


class PhiPoint(NamedTuple):
    j: tuple
    mu: object


def phi(basis: LatticeBasis, j) -> PhiPoint:
    """Pair a mode with its eigenvalue."""
    jt = tuple(int(x) for x in j)
    return PhiPoint(jt, mu(basis, jt))


def phi_distance(basis: LatticeBasis, j, j2):
    """Sup-norm of Phi(j2) - Phi(j): max of spatial gap and eigenvalue gap."""
    spatial = max(abs(a - b) for a, b in zip(j, j2))
    gap = mu(basis, j2) - mu(basis, j)
    return max(Fr(spatial) if isinstance(gap, Fraction) else float(spatial),
               abs(gap))


def is_gamma_link(basis: LatticeBasis, j, j2, gamma) -> bool:
    """True when Phi(j) and Phi(j2) are within gamma (sup-norm)."""
    if tuple(j) == tuple(j2):
        raise ValueError("link requires distinct modes")
    return phi_distance(basis, j, j2) <= gamma


def relation_link(basis: LatticeBasis, j, j2, delta) -> bool:
    """One step of the cluster relation: Phi-gap at most (|j|+|j2|)**delta."""
    s = exact.sup_norm(j) + exact.sup_norm(j2)
    dist = phi_distance(basis, j, j2)
    return exact.le_pow(dist, s, delta)


@dataclass(frozen=True)
class GammaChain:
    """Ordered distinct modes with consecutive Phi-gaps at most gamma."""

    sites: tuple
    gamma: object

    @property
    def length(self) -> int:
        return len(self.sites) - 1

    def is_valid(self, basis: LatticeBasis) -> bool:
        if len(set(self.sites)) != len(self.sites):
            return False
        return all(is_gamma_link(basis, a, b, self.gamma)
                   for a, b in zip(self.sites, self.sites[1:]))


@dataclass
class ChainSearchResult:
    length: int
    witness: GammaChain
    truncated: bool
    expanded: int


def box_sites(radius: int, d: int):
    """All integer vectors of sup-norm at most radius, lexicographic."""
    return [tuple(p) for p in product(range(-radius, radius + 1), repeat=d)]


def _box_adjacency(basis, sites, index, link_radius, accept):
    """Sorted adjacency lists for the symmetric predicate ``accept``."""
    d = basis.d
    offsets = [o for o in product(range(-link_radius, link_radius + 1), repeat=d)
               if o > tuple([0] * d)]
    adjacency = [[] for _ in sites]
    for i, j in enumerate(sites):
        for o in offsets:
            j2 = tuple(a + b for a, b in zip(j, o))
            k = index.get(j2)
            if k is not None and accept(j, j2):
                adjacency[i].append(k)
                adjacency[k].append(i)
    return [sorted(nbrs) for nbrs in adjacency]


def max_chain_length(basis: LatticeBasis, box_radius: int, gamma,
                     length_cap=None, node_budget: int = 2_000_000,
                     on_truncate: str = "return") -> ChainSearchResult:
    """Maximal chain length over the box, by exact search.

    Returns the best chain found; when the node budget or ``length_cap``
    is hit the result is a lower bound and is flagged (or raised as
    SearchTruncated when ``on_truncate='raise'``).
    """
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    if box_radius < 1:
        raise ValueError("box_radius must be at least 1")
    sites = box_sites(box_radius, basis.d)
    index = {j: i for i, j in enumerate(sites)}
    link_radius = min(int(math.floor(float(gamma))), 2 * box_radius)
    adjacency = _box_adjacency(
        basis, sites, index, link_radius,
        lambda a, b: phi_distance(basis, a, b) <= gamma)
    raw: PathSearchResult = longest_path(adjacency, length_cap=length_cap,
                                         node_budget=node_budget)
    witness = GammaChain(tuple(sites[i] for i in raw.path), gamma)
    result = ChainSearchResult(raw.length, witness, raw.truncated, raw.expanded)
    if raw.truncated and on_truncate == "raise":
        raise SearchTruncated("chain search truncated", result=result)
    return result


# ---------------------------------------------------------------------------
# cluster partitions


@dataclass(frozen=True)
class ClusterInfo:
    id: int
    members: tuple
    m_alpha: int
    M_alpha: int
    boundary: bool

    @property
    def diameter(self) -> int:
        if len(self.members) < 2:
            return 0
        return max(max(abs(a - b) for a, b in zip(x, y))
                   for i, x in enumerate(self.members)
                   for y in self.members[i + 1:])


@dataclass(frozen=True)
class ClusterPartition:
    box_radius: int
    d: int
    delta: object
    margin: int
    assignment: dict
    clusters: tuple

    def cluster_of(self, j) -> int:
        return self.assignment[tuple(j)]

    def to_dict(self):
        delta = (exact.format_rational(self.delta)
                 if isinstance(self.delta, Fraction) else self.delta)
        return {
            "box_radius": self.box_radius,
            "d": self.d,
            "delta": delta,
            "margin": self.margin,
            "clusters": [
                {
                    "id": c.id,
                    "members": [list(j) for j in c.members],
                    "m_alpha": c.m_alpha,
                    "M_alpha": c.M_alpha,
                    "boundary": c.boundary,
                }
                for c in self.clusters
            ],
        }

    @classmethod
    def from_dict(cls, data) -> "ClusterPartition":
        clusters = []
        assignment = {}
        for rec in data["clusters"]:
            members = tuple(tuple(int(x) for x in j) for j in rec["members"])
            info = ClusterInfo(id=int(rec["id"]), members=members,
                               m_alpha=int(rec["m_alpha"]),
                               M_alpha=int(rec["M_alpha"]),
                               boundary=bool(rec["boundary"]))
            clusters.append(info)
            for j in members:
                assignment[j] = info.id
        delta = data["delta"]
        if isinstance(delta, str):
            delta = exact.parse_rational(delta, "delta")
        return cls(box_radius=int(data["box_radius"]), d=int(data["d"]),
                   delta=delta, margin=int(data["margin"]),
                   assignment=assignment, clusters=tuple(clusters))


def build_partition(basis: LatticeBasis, box_radius: int, delta,
                    enforce_delta_bound: bool = True) -> ClusterPartition:
    """Connected components of the one-step relation, restricted to the box.

    Clusters with a member within ``margin`` of the box boundary are flagged:
    their membership could change on a larger box, because one-step links are
    spatially local with range at most ceil((2N)**delta).

    The guaranteed range is 0 < delta < delta_max(d); larger deltas still
    define a partition but lose the theorem backing, so they are refused
    unless ``enforce_delta_bound`` is switched off.
    """
    d = basis.d
    if not 0 < float(delta) < 1:
        raise DeltaOutOfRange(f"delta {delta} outside (0, 1)")
    if enforce_delta_bound:
        bound = delta_max(d)
        in_range = (delta < bound) if isinstance(delta, (int, Fraction)) \
            else float(delta) < float(bound)
        if not in_range:
            raise DeltaOutOfRange(
                f"delta {delta} >= delta_max({d}) = {bound}; "
                "pass enforce_delta_bound=False to build anyway")
    sites = box_sites(box_radius, d)
    index = {j: i for i, j in enumerate(sites)}
    link_radius = max(1, exact.floor_pow(2 * box_radius, delta))
    uf = UnionFind(len(sites))
    offsets = [o for o in product(range(-link_radius, link_radius + 1), repeat=d)
               if o > tuple([0] * d)]
    for i, j in enumerate(sites):
        for o in offsets:
            j2 = tuple(a + b for a, b in zip(j, o))
            k = index.get(j2)
            if k is not None and relation_link(basis, j, j2, delta):
                uf.union(i, k)
    margin = exact.ceil_pow(2 * box_radius, delta) + 1
    groups = sorted((sorted(sites[i] for i in grp) for grp in uf.groups()),
                    key=lambda g: g[0])
    clusters = []
    assignment = {}
    for cid, members in enumerate(groups):
        sups = [exact.sup_norm(j) for j in members]
        boundary = any(box_radius - s <= margin for s in sups)
        info = ClusterInfo(id=cid, members=tuple(members),
                           m_alpha=min(sups), M_alpha=max(sups),
                           boundary=boundary)
        clusters.append(info)
        for j in members:
            assignment[j] = cid
    return ClusterPartition(box_radius=box_radius, d=d, delta=delta,
                            margin=margin, assignment=assignment,
                            clusters=tuple(clusters))


@dataclass
class VerificationReport:
    """Outcome of the separation / dyadicity scan over a partition."""

    separation_violations: list
    dyadic_violations: list
    growth_violations: list
    pairs_checked: int
    interior_clusters: int
    boundary_clusters: int
    fitted_threshold: int
    fitted_constant: float
    fitted_exponent: float
    cluster_stats: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (not self.separation_violations and not self.dyadic_violations
                and not self.growth_violations)

    def to_dict(self):
        return {
            "separation_violations": [
                [list(a), list(b)] for a, b in self.separation_violations],
            "dyadic_violations": self.dyadic_violations,
            "growth_violations": [
                [list(a), list(b)] for a, b in self.growth_violations],
            "pairs_checked": self.pairs_checked,
            "interior_clusters": self.interior_clusters,
            "boundary_clusters": self.boundary_clusters,
            "fitted_threshold": self.fitted_threshold,
            "fitted_constant": self.fitted_constant,
            "fitted_exponent": self.fitted_exponent,
            "cluster_stats": self.cluster_stats,
            "ok": self.ok,
        }


def verify_cluster_properties(basis: LatticeBasis, partition: ClusterPartition,
                              threshold_override=None,
                              constant_override=None) -> VerificationReport:
    """Check cross-cluster separation and dyadicity on interior clusters.

    Cross-cluster pairs (both clusters interior) must satisfy
    ``|j1-j2| + |mu_1-mu_2| > (|j1|+|j2|)**delta``; any violation is an
    implementation bug and is returned as data.  Dyadicity is
    ``M_alpha <= 2*m_alpha`` above a threshold which is fitted (the largest
    interior M_alpha violating the 2:1 rule) unless overridden.  The growth
    constant of intra-cluster spreads is fitted and reported, never assumed.
    """
    N, d, delta = partition.box_radius, partition.d, partition.delta
    interior = {c.id for c in partition.clusters if not c.boundary}
    sites = box_sites(N, d)
    link_radius = max(1, exact.floor_pow(2 * N, delta))
    offsets = [o for o in product(range(-link_radius, link_radius + 1), repeat=d)
               if o > tuple([0] * d)]
    mu_cache = {j: mu(basis, j) for j in sites}
    violations = []
    pairs = 0
    for j in sites:
        cid = partition.assignment[j]
        for o in offsets:
            j2 = tuple(a + b for a, b in zip(j, o))
            cid2 = partition.assignment.get(j2)
            if cid2 is None or cid2 == cid:
                continue
            if cid not in interior or cid2 not in interior:
                continue
            pairs += 1
            spread = max(abs(a - b) for a, b in zip(j, j2)) \
                + abs(mu_cache[j] - mu_cache[j2])
            s = exact.sup_norm(j) + exact.sup_norm(j2)
            # separation demands spread > s**delta; record failures
            if exact.le_pow(spread, s, delta):
                violations.append((j, j2))

    exponent = (chain_exponent(d) + 1) * float(delta)
    fitted_c = 0.0
    fitted_e = 0.0
    growth_bad = []
    stats = []
    for c in partition.clusters:
        if c.boundary or c.id not in interior:
            continue
        members = c.members
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                j, j2 = members[a], members[b]
                spread = float(max(abs(x - y) for x, y in zip(j, j2))
                               + abs(mu_cache[j] - mu_cache[j2]))
                s = exact.sup_norm(j) + exact.sup_norm(j2)
                ratio = spread / float(s) ** exponent
                fitted_c = max(fitted_c, ratio)
                if constant_override is not None and ratio > float(constant_override):
                    growth_bad.append((j, j2))
                if s >= 2 and spread > 0:
                    fitted_e = max(fitted_e, math.log(spread) / math.log(s))
        stats.append({"id": c.id, "size": len(members), "m_alpha": c.m_alpha,
                      "M_alpha": c.M_alpha, "diameter": c.diameter})

    fitted_t = 0
    for c in partition.clusters:
        if not c.boundary and c.M_alpha > 2 * c.m_alpha:
            fitted_t = max(fitted_t, c.M_alpha)
    threshold = fitted_t if threshold_override is None else threshold_override
    dyadic_bad = [c.id for c in partition.clusters
                  if not c.boundary and c.M_alpha > 2 * c.m_alpha
                  and c.M_alpha > threshold]
    return VerificationReport(
        separation_violations=violations,
        dyadic_violations=dyadic_bad,
        growth_violations=growth_bad,
        pairs_checked=pairs,
        interior_clusters=len(interior),
        boundary_clusters=len(partition.clusters) - len(interior),
        fitted_threshold=threshold,
        fitted_constant=fitted_c,
        fitted_exponent=fitted_e,
        cluster_stats=stats,
    )


@dataclass
class ScalingRow:
    gamma: object
    length: int
    truncated: bool


@dataclass
class ScalingResult:
    rows: list
    slope: float
    slope_bound: int
    witnesses: list

    @property
    def slope_ok(self) -> bool:
        return self.slope <= self.slope_bound + 1e-9


def chain_scaling_experiment(basis: LatticeBasis, gammas, box_radius: int,
                             length_cap=None, node_budget: int = 2_000_000,
                             on_truncate: str = "return") -> ScalingResult:
    """Maximal chain length as a function of gamma, with a log-log slope fit.

    The fitted slope must stay below the dimensional exponent.  Truncated
    searches mark their row; with ``on_truncate='raise'`` the underlying
    SearchTruncated propagates instead.
    """
    rows = []
    witnesses = []
    for gamma in gammas:
        if gamma < 2:
            raise ValueError("scaling experiment expects gamma >= 2")
        res = max_chain_length(basis, box_radius, gamma,
                               length_cap=length_cap, node_budget=node_budget,
                               on_truncate=on_truncate)
        rows.append(ScalingRow(gamma, res.length, res.truncated))
        witnesses.append(res.witness)
    pts = [(math.log(float(r.gamma)), math.log(r.length))
           for r in rows if r.length >= 1]
    if len(pts) >= 2:
        n = len(pts)
        sx = sum(x for x, _ in pts)
        sy = sum(y for _, y in pts)
        sxx = sum(x * x for x, _ in pts)
        sxy = sum(x * y for x, y in pts)
        denom = n * sxx - sx * sx
        slope = (n * sxy - sx * sy) / denom if denom else 0.0
    else:
        slope = 0.0
    return ScalingResult(rows=rows, slope=slope,
                         slope_bound=chain_exponent(basis.d),
                         witnesses=witnesses)
