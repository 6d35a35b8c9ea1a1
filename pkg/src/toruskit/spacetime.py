"""Quasi-periodic wave / Schroedinger diagonal operators on space-time lattices.

Sites are indexed by ``(ell, j, a)`` with ``ell`` the time-Fourier index,
``j`` the space mode and ``a`` a sign (fixed +1 for the wave kind).  The wave
symbol is ``-(lam*wbar.ell + theta)^2 + mu_j + m`` and the Schroedinger symbol
``-a (lam*wbar.ell + theta) + mu_j + m``; a site is singular when the symbol
has modulus below 1.  Everything identity-grade runs on Fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import NamedTuple

from . import exact
from .errors import (
    DependentVectors,
    DimensionMismatch,
    GammaOutOfRange,
    IdentityViolation,
    SearchTruncated,
    ValidationError,
)
from .lattice import LatticeBasis, bilinear, mu
from .search import longest_path

Fr = Fraction

NLW = "nlw"
NLS = "nls"


def _signs(kind: str):
    if kind == NLW:
        return (1,)
    if kind == NLS:
        return (-1, 1)
    raise ValidationError(f"unknown symbol kind {kind!r}")


@dataclass(frozen=True)
class FrequencyParams:
    """Scalar data of the operator symbols: direction, scaling, shift, mass."""

    n: int
    omega_bar: tuple
    gamma0: object
    tau0: object
    lam: object
    theta: object
    mass: object

    def __post_init__(self):
        if len(self.omega_bar) != self.n:
            raise DimensionMismatch("omega_bar length disagrees with n")
        one_norm = sum(abs(w) for w in self.omega_bar)
        if one_norm > 1:
            raise ValidationError(f"|omega_bar|_1 = {one_norm} exceeds 1")
        lam = float(self.lam)
        if not 0.5 <= lam <= 1.5:
            raise ValidationError(f"lambda {self.lam} outside [1/2, 3/2]")
        if self.mass <= 0:
            raise ValidationError("mass must be positive")
        if self.gamma0 <= 0:
            raise ValidationError("gamma0 must be positive")
        if self.tau0 < self.n:
            raise ValidationError("tau0 must be at least n")

    @classmethod
    def create(cls, omega_bar, gamma0, tau0, lam=Fr(1), theta=Fr(0), mass=Fr(1),
               dio_ell_max: int | None = None) -> "FrequencyParams":
        wb = tuple(exact.parse_rational(w, "omega_bar") for w in omega_bar)
        params = cls(n=len(wb), omega_bar=wb,
                     gamma0=exact.parse_rational(gamma0, "gamma0"),
                     tau0=exact.parse_rational(tau0, "tau0"),
                     lam=exact.parse_rational(lam, "lambda"),
                     theta=exact.parse_rational(theta, "theta"),
                     mass=exact.parse_rational(mass, "mass"))
        if dio_ell_max:
            res = diophantine_check(params.omega_bar, params.gamma0,
                                    params.tau0, dio_ell_max)
            if not res.passed:
                raise ValidationError(
                    f"omega_bar fails the Diophantine floor at ell={res.worst_ell}; "
                    f"largest admissible gamma0 is {res.max_gamma0}")
        return params

    def omega(self):
        return tuple(self.lam * w for w in self.omega_bar)

    def omega_dot(self, ell):
        if len(ell) != self.n:
            raise DimensionMismatch("ell length disagrees with n")
        return self.lam * sum(w * l for w, l in zip(self.omega_bar, ell))

    def to_dict(self):
        f = exact.format_rational
        return {"omega_bar": [f(w) for w in self.omega_bar],
                "gamma0": f(self.gamma0), "tau0": f(self.tau0),
                "lambda": f(self.lam), "theta": f(self.theta),
                "mass": f(self.mass)}


class SpaceTimeSite(NamedTuple):
    ell: tuple
    j: tuple
    a: int = 1


def site_distance(s1: SpaceTimeSite, s2: SpaceTimeSite) -> int:
    """Sup-distance on the space-time lattice; a pure sign flip counts 1."""
    if s1.ell == s2.ell and s1.j == s2.j:
        return 0 if s1.a == s2.a else 1
    return max(max(abs(a - b) for a, b in zip(s1.ell, s2.ell)),
               max(abs(a - b) for a, b in zip(s1.j, s2.j)))


def symbol_nlw(basis: LatticeBasis, params: FrequencyParams, ell, j):
    """Wave symbol: -(lam*wbar.ell + theta)^2 + mu_j + mass."""
    y = params.omega_dot(ell) + params.theta
    return -(y * y) + mu(basis, j) + params.mass


def symbol_nls(basis: LatticeBasis, params: FrequencyParams, ell, j, a):
    """Schroedinger symbol: -a (lam*wbar.ell + theta) + mu_j + mass."""
    if a not in (1, -1):
        raise ValidationError("sign a must be +1 or -1")
    y = params.omega_dot(ell) + params.theta
    return -a * y + mu(basis, j) + params.mass


def symbol(basis, params, site: SpaceTimeSite, kind: str):
    if kind == NLW:
        return symbol_nlw(basis, params, site.ell, site.j)
    return symbol_nls(basis, params, site.ell, site.j, site.a)


def is_singular(basis, params, site: SpaceTimeSite, kind: str) -> bool:
    """Strict sublevel test |symbol| < 1; boundary values are regular."""
    return abs(symbol(basis, params, site, kind)) < 1


def enumerate_singular_sites(basis: LatticeBasis, params: FrequencyParams,
                             kind: str, ell_radius: int, j_radius: int,
                             threads: int = 1):
    """All singular sites in the box, in lexicographic (ell, j, a) order."""
    signs = _signs(kind)
    ells = [tuple(e) for e in product(range(-ell_radius, ell_radius + 1),
                                      repeat=params.n)]
    js = [tuple(v) for v in product(range(-j_radius, j_radius + 1),
                                    repeat=basis.d)]
    mu_cache = {j: mu(basis, j) for j in js}
    rho = {j: mu_cache[j] + params.mass for j in js}

    def scan(ell_chunk):
        found = []
        for ell in ell_chunk:
            y = params.omega_dot(ell) + params.theta
            if kind == NLW:
                y2 = y * y
                for j in js:
                    if abs(rho[j] - y2) < 1:
                        found.append(SpaceTimeSite(ell, j, 1))
            else:
                for j in js:
                    for a in signs:
                        if abs(rho[j] - a * y) < 1:
                            found.append(SpaceTimeSite(ell, j, a))
        return found

    if threads > 1 and len(ells) > 4 * threads:
        from concurrent.futures import ThreadPoolExecutor

        size = (len(ells) + threads - 1) // threads
        chunks = [ells[i:i + size] for i in range(0, len(ells), size)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(scan, chunks))
        sites = [s for part in parts for s in part]
    else:
        sites = scan(ells)
    sites.sort()
    return sites


def section_multiplicity(sites) -> int:
    """Largest number of sites sharing one space mode."""
    counts = {}
    for s in sites:
        counts[s.j] = counts.get(s.j, 0) + 1
    return max(counts.values()) if counts else 0


@dataclass(frozen=True)
class SingularChain:
    sites: tuple
    gamma: object

    @property
    def length(self) -> int:
        return len(self.sites) - 1

    @property
    def section_count(self) -> int:
        return section_multiplicity(self.sites)

    def min_exponent(self) -> float:
        """Smallest C with length <= (max(K,2) * gamma)^C."""
        if self.length <= 1:
            return 0.0
        base = max(self.section_count, 2) * float(self.gamma)
        return math.log(self.length) / math.log(base)

    def is_valid(self, basis, params, kind) -> bool:
        if len(set(self.sites)) != len(self.sites):
            return False
        if any(not is_singular(basis, params, s, kind) for s in self.sites):
            return False
        return all(site_distance(a, b) <= self.gamma
                   for a, b in zip(self.sites, self.sites[1:]))


@dataclass
class ChainSurvey:
    chains: list
    gamma: object
    site_count: int
    truncated: bool
    fitted_exponent: float

    def max_length(self) -> int:
        return max((c.length for c in self.chains), default=0)


def enumerate_singular_chains(basis: LatticeBasis, params: FrequencyParams,
                              kind: str, ell_radius: int, j_radius: int,
                              gamma, length_cap=None,
                              node_budget: int = 2_000_000,
                              exponent_bound=None,
                              threads: int = 1,
                              on_truncate: str = "return") -> ChainSurvey:
    """Longest chain of singular sites per link-graph component.

    Components are explored by budgeted exact search; each reported chain is
    not extendable at either end, canonically oriented (smaller endpoint
    first), and carries its section count and the minimal exponent making the
    polynomial length bound tight.  With ``exponent_bound`` set, chains
    breaking ``L <= (max(K,2)*gamma)^bound`` raise IdentityViolation.
    """
    sites = enumerate_singular_sites(basis, params, kind, ell_radius, j_radius,
                                     threads=threads)
    index = {s: i for i, s in enumerate(sites)}
    radius = int(math.floor(float(gamma)))
    adjacency = [[] for _ in sites]
    offsets = [o for o in product(range(-radius, radius + 1),
                                  repeat=params.n + basis.d)]
    signs = _signs(kind)
    for i, s in enumerate(sites):
        for o in offsets:
            ell2 = tuple(a + b for a, b in zip(s.ell, o[:params.n]))
            j2 = tuple(a + b for a, b in zip(s.j, o[params.n:]))
            for a2 in signs:
                cand = SpaceTimeSite(ell2, j2, a2)
                k = index.get(cand)
                if k is None or k <= i:
                    continue
                if site_distance(s, cand) <= gamma:
                    adjacency[i].append(k)
                    adjacency[k].append(i)
    adjacency = [sorted(nbrs) for nbrs in adjacency]

    from .search import connected_components

    chains = []
    truncated = False
    for comp in connected_components(adjacency):
        sub_index = {v: t for t, v in enumerate(comp)}
        sub_adj = [[sub_index[w] for w in adjacency[v] if w in sub_index]
                   for v in comp]
        res = longest_path(sub_adj, length_cap=length_cap,
                           node_budget=node_budget)
        truncated = truncated or res.truncated
        path = [comp[t] for t in res.path]
        if res.truncated:
            # a budget-cut path may still be extendable; grow it greedily so
            # every reported chain is maximal w.r.t. extension
            used = set(path)
            for at_end in (True, False):
                while True:
                    tip = path[-1] if at_end else path[0]
                    nxt = next((w for w in adjacency[tip] if w not in used),
                               None)
                    if nxt is None:
                        break
                    used.add(nxt)
                    if at_end:
                        path.append(nxt)
                    else:
                        path.insert(0, nxt)
        path_sites = tuple(sites[v] for v in path)
        if path_sites and path_sites[-1] < path_sites[0]:
            path_sites = tuple(reversed(path_sites))
        chains.append(SingularChain(path_sites, gamma))
    chains.sort(key=lambda c: (-c.length, c.sites))
    fitted = max((c.min_exponent() for c in chains), default=0.0)
    if exponent_bound is not None:
        for c in chains:
            if c.length >= 2:
                base = max(c.section_count, 2) * float(gamma)
                if math.log(c.length) > exponent_bound * math.log(base) + 1e-12:
                    raise IdentityViolation(
                        f"chain of length {c.length} breaks the exponent bound "
                        f"{exponent_bound}")
    survey = ChainSurvey(chains=chains, gamma=gamma, site_count=len(sites),
                         truncated=truncated, fitted_exponent=fitted)
    if truncated and on_truncate == "raise":
        raise SearchTruncated("chain survey truncated", result=survey)
    return survey


# ---------------------------------------------------------------------------
# chain-restricted bilinear form and its determinant identity


@dataclass(frozen=True)
class ChainBilinearData:
    """Difference vectors of a chain and the restricted bilinear form.

    ``l_vectors`` and ``k_vectors`` are the time and space differences against
    the anchor; the form value on ``f_i = (omega.l_i, k_i)`` pairs is
    ``-(omega.l_i)(omega.l_i') + <W k_i, W k_i'>``.
    """

    basis: LatticeBasis
    params: FrequencyParams
    l_vectors: tuple
    k_vectors: tuple

    @property
    def g(self) -> int:
        return len(self.l_vectors)

    def omega_bar_dots(self):
        return [sum(w * l for w, l in zip(self.params.omega_bar, lv))
                for lv in self.l_vectors]

    def f_vectors(self, lam=None):
        lam = self.params.lam if lam is None else lam
        return [(lam * wd, *kv) for wd, kv in
                zip(self.omega_bar_dots(), self.k_vectors)]

    def S_bar(self):
        wd = self.omega_bar_dots()
        return [[wd[i] * wd[l] for l in range(self.g)] for i in range(self.g)]

    def R(self):
        return [[bilinear(self.basis, self.k_vectors[i], self.k_vectors[l])
                 for l in range(self.g)] for i in range(self.g)]

    def A(self, lam=None):
        lam = self.params.lam if lam is None else lam
        xi = lam * lam
        S, R = self.S_bar(), self.R()
        return [[R[i][l] - xi * S[i][l] for l in range(self.g)]
                for i in range(self.g)]

    def det_A(self, lam=None):
        return exact.det(self.A(lam))


def chain_bilinear_data(basis: LatticeBasis, params: FrequencyParams, chain,
                        anchor: int, indices) -> ChainBilinearData:
    """Difference data for selected chain positions against an anchor.

    Raises DependentVectors when the selected f-vectors do not span a space of
    their own count (rank computed exactly at the configured lambda).
    """
    sites = chain.sites if isinstance(chain, SingularChain) else tuple(chain)
    base = sites[anchor]
    ls, ks = [], []
    for q in indices:
        s = sites[q]
        ls.append(tuple(a - b for a, b in zip(s.ell, base.ell)))
        ks.append(tuple(a - b for a, b in zip(s.j, base.j)))
    data = ChainBilinearData(basis=basis, params=params,
                             l_vectors=tuple(ls), k_vectors=tuple(ks))
    rows = [list(f) for f in data.f_vectors()]
    if exact.mat_rank(rows) < data.g:
        raise DependentVectors("selected difference vectors are dependent")
    return data


@dataclass
class ChainDetIdentity:
    """Minor data certifying det A(lam) = eta - lam^2 zeta."""

    p: tuple
    m_coeffs: tuple
    eta: object
    zeta: object
    residual: float
    gram_positive: bool
    m_bound_limit: int
    m_bound_ok: bool

    def det_value(self, lam):
        return self.eta - lam * lam * self.zeta


def chain_det_identity(data: ChainBilinearData,
                       lambdas=(Fr(1, 2), Fr(1), Fr(3, 2))) -> ChainDetIdentity:
    """Expand det A(lam) into minor data and verify it at three spreads.

    ``p`` collects the g x g minors of the space differences; each ``m``
    coefficient is the signed Laplace expansion of the time column against a
    choice of g-1 space coordinates.  The identity
    ``det A(lam) = |C_g(W) p|^2 - lam^2 |C_{g-1}(W) (wbar x m)|^2`` is affine
    in lam^2, so two evaluation points determine it and the third is the
    consistency check; in exact mode any nonzero residual raises.
    """
    basis, params, g = data.basis, data.params, data.g
    d, n = basis.d, params.n
    if len(set(lambdas)) < 3:
        raise ValidationError("need three distinct evaluation points")
    K_cols = exact.mat_transpose([list(k) for k in data.k_vectors])  # d x g
    if g <= d:
        p = tuple(int(exact.det(exact.submatrix(K_cols, sel, range(g))))
                  for sel in combinations(range(d), g))
        cw = exact.compound(basis.W_rows(), g)
        eta = exact.norm_sq(exact.mat_vec(cw, list(p)))
    else:
        p = ()
        eta = Fr(0)

    m_coeffs = []
    for sel in combinations(range(d), g - 1):
        # rows i of the space block restricted to the chosen coordinates
        block = [[data.k_vectors[i][c] for c in sel] for i in range(g)]
        m_vec = [0] * n
        for i in range(g):
            minor = [row for t, row in enumerate(block) if t != i]
            cof = int(exact.det(minor)) * (-1) ** i
            if cof:
                for t in range(n):
                    m_vec[t] += cof * data.l_vectors[i][t]
        m_coeffs.append(tuple(m_vec))
    omega_x_m = [sum(w * x for w, x in zip(params.omega_bar, mv))
                 for mv in m_coeffs]
    cw1 = exact.compound(basis.W_rows(), g - 1)
    zeta = exact.norm_sq(exact.mat_vec(cw1, omega_x_m))

    residual = Fr(0) if basis.exact else 0.0
    for lam in lambdas:
        lhs = data.det_A(lam)
        rhs = eta - lam * lam * zeta
        diff = abs(lhs - rhs)
        residual = max(residual, diff)
    if basis.exact:
        if residual != 0:
            raise IdentityViolation(f"determinant identity residual {residual}")
    else:
        scale = max(1.0, abs(float(eta)), abs(float(zeta)))
        if float(residual) > basis.tolerance * scale:
            raise IdentityViolation("determinant identity residual above tolerance")

    # Gram positivity at xi = -1: the form phi_1 + phi_2 is a scalar product
    S, R = data.S_bar(), data.R()
    gram = exact.det([[R[i][l] + S[i][l] for l in range(g)] for i in range(g)])
    gram_positive = gram > 0

    max_l = max((exact.sup_norm(l) for l in data.l_vectors), default=0)
    max_k = max((exact.sup_norm(k) for k in data.k_vectors), default=0)
    limit = g * math.factorial(g - 1) * max_l * max_k ** (g - 1)
    m_ok = all(exact.sup_norm(mv) <= limit for mv in m_coeffs)
    return ChainDetIdentity(p=p, m_coeffs=tuple(m_coeffs), eta=eta, zeta=zeta,
                            residual=float(residual),
                            gram_positive=gram_positive,
                            m_bound_limit=limit, m_bound_ok=m_ok)


# ---------------------------------------------------------------------------
# theta sublevel covering


def _isqrt_floor_inv_sqrt(m) -> int:
    """floor(1/sqrt(m)) for rational m > 0, exactly."""
    k = 0
    while (k + 1) * (k + 1) * m <= 1:
        k += 1
    return k


def max_cover_intervals(mass, kind: str) -> int:
    """Interval budget of the covering: 2(floor(1/sqrt(m)) + 1) resp. 2."""
    if kind == NLW:
        return 2 * (_isqrt_floor_inv_sqrt(mass) + 1)
    return 2


@dataclass
class SublevelCover:
    """Exact theta-intervals where the symbol modulus drops to eps."""

    kind: str
    intervals: list          # float (lo, hi) pairs, sorted
    rho: object              # mu_j + mass
    eps: object
    shift: object            # lam * (wbar . ell)
    a: int = 1

    def contains(self, theta: float, slack: float = 1e-9) -> bool:
        return any(lo - slack <= theta <= hi + slack for lo, hi in self.intervals)

    def max_length(self) -> float:
        return max((hi - lo for lo, hi in self.intervals), default=0.0)

    def length_bound_exact(self, mass) -> bool:
        """Exact test: every interval length at most eps / sqrt(mass).

        For the wave kind with two branches this reduces to
        ``rho >= mass + eps^2/(4 mass)``; with a single branch to
        ``4(rho + eps) <= eps^2 / mass``; the linear kind compares
        ``2 eps <= eps/sqrt(mass)`` i.e. ``4 mass <= 1``.
        """
        rho, eps = self.rho, self.eps
        if self.kind == NLS:
            return 4 * mass <= 1
        if not self.intervals:
            return True
        if rho - eps > 0:
            return rho >= mass + eps * eps / (4 * mass)
        return 4 * (rho + eps) * mass <= eps * eps


def theta_sublevel_cover(basis: LatticeBasis, params: FrequencyParams,
                         ell, j, N: int, tau1: int, kind: str,
                         a: int = 1) -> SublevelCover:
    """Solve |symbol(theta)| <= N^{-tau1} for theta, exactly.

    The wave symbol is quadratic in theta: the sublevel set is at most two
    intervals obtained from square roots of rational bounds.  The linear kind
    yields a single interval of rational endpoints and length 2 N^{-tau1}.
    """
    if N <= 1:
        raise ValidationError("N must exceed 1")
    if int(tau1) != tau1 or tau1 < 1:
        raise ValidationError("tau1 must be a positive integer")
    eps = Fr(1, int(N) ** int(tau1))
    rho = mu(basis, j) + params.mass
    shift = params.omega_dot(ell)
    if kind == NLS:
        center = a * rho - shift
        lo, hi = center - eps, center + eps
        return SublevelCover(kind=NLS, intervals=[(float(lo), float(hi))],
                             rho=rho, eps=eps, shift=shift, a=a)
    if kind != NLW:
        raise ValidationError(f"unknown symbol kind {kind!r}")
    sh = float(shift)
    if rho + eps < 0:
        intervals = []
    elif rho - eps > 0:
        lo_r, hi_r = math.sqrt(float(rho - eps)), math.sqrt(float(rho + eps))
        intervals = [(-hi_r - sh, -lo_r - sh), (lo_r - sh, hi_r - sh)]
    else:
        hi_r = math.sqrt(float(rho + eps))
        intervals = [(-hi_r - sh, hi_r - sh)]
    return SublevelCover(kind=NLW, intervals=sorted(intervals),
                         rho=rho, eps=eps, shift=shift, a=1)


# ---------------------------------------------------------------------------
# Diophantine floor and frequency-set measure


def convergent_direction(coeffs) -> tuple:
    """Two-component rational direction from continued-fraction coefficients.

    The value [a0; a1, a2, ...] built from ``coeffs`` gives a ratio p/q whose
    best rational approximations are exactly its convergents, so truncating a
    badly-approximable number (all-ones coefficients: the golden ratio)
    manufactures directions with a strong Diophantine floor at every scale
    the truncation resolves.  Scaled to unit 1-norm.
    """
    if not coeffs or any(int(a) != a or a < 1 for a in coeffs):
        raise ValidationError("coefficients must be positive integers")
    num, den = int(coeffs[-1]), 1
    for a in reversed(coeffs[:-1]):
        num, den = int(a) * num + den, num
    total = num + den
    return (Fr(den, total), Fr(num, total))


@dataclass
class DiophantineResult:
    passed: bool
    worst_ell: tuple
    max_gamma0: object    # largest gamma0 that would pass at this tau0


def diophantine_check(omega_bar, gamma0, tau0, ell_max: int) -> DiophantineResult:
    """Exhaustive floor check |wbar . ell| >= 2 gamma0 / |ell|^tau0.

    Scans 0 < |ell| <= ell_max (one representative per +-pair) and reports the
    minimizing ell together with the largest gamma0 the vector supports.
    """
    if ell_max < 1:
        raise ValidationError("ell_max must be at least 1")
    n = len(omega_bar)
    tau_int = int(tau0) if float(tau0) == int(tau0) else None
    best = None
    worst = None
    zero = tuple([0] * n)
    for ell in product(range(-ell_max, ell_max + 1), repeat=n):
        if ell <= zero:
            continue
        dot = abs(sum(w * l for w, l in zip(omega_bar, ell)))
        sup = exact.sup_norm(ell)
        score = dot * (Fr(sup) ** tau_int if tau_int is not None
                       else float(sup) ** float(tau0)) / 2
        if best is None or score < best:
            best, worst = score, ell
    return DiophantineResult(passed=bool(gamma0 <= best), worst_ell=worst,
                             max_gamma0=best)


def compound_floor(basis: LatticeBasis) -> Fraction:
    """Certified positive floor for minor-vector images, min over orders.

    Uses the Frobenius norm of the compound of W^{-1}, which dominates the
    operator norm, so the floor is safe (and rational).
    """
    winv = basis.W_inverse_rows()
    return min(Fr(1) / exact.frobenius_sq(exact.compound(winv, g))
               for g in range(1, basis.d + 1))


@dataclass
class MeasureResult:
    lambda_measure: float
    xi_intervals: list       # exact (lo, hi) pairs in xi = lambda^2
    xi_measure: object
    pairs_total: int
    pairs_excluding: int
    fully_excluded: bool
    grid_membership: list | None = None


def excluded_lambda_measure(basis: LatticeBasis, omega_bar, gamma, tau: int,
                            g: int, p_max: int, m_max: int,
                            lambda_grid=None) -> MeasureResult:
    """Exact measure of the lambda set where some minor polynomial is small.

    For every integer pair ``(p, m)`` in range the polynomial
    ``eta_p - xi zeta_m`` is affine in ``xi = lambda^2``; the sublevel set
    ``|P| < gamma/(1+|m|^tau)`` is an exact rational interval in xi.  The
    union is merged exactly and the returned measure is the total length of
    its square-root image inside [1/2, 3/2] (no sampling anywhere).
    """
    d, n = basis.d, len(omega_bar)
    wb = [exact.parse_rational(w, "omega_bar") for w in omega_bar]
    gamma = exact.parse_rational(gamma, "gamma")
    floor = compound_floor(basis)
    if not 0 < gamma <= floor / 4:
        raise GammaOutOfRange(f"gamma must lie in (0, {floor}/4]")
    if not 1 <= g <= d + 1:
        raise ValidationError(f"order g={g} outside 1..{d + 1}")

    if g <= d:
        cw = exact.compound(basis.W_rows(), g)
        p_dim = len(cw)
        etas = set()
        for p in product(range(-p_max, p_max + 1), repeat=p_dim):
            etas.add(exact.norm_sq(exact.mat_vec(cw, list(p))))
        eta_values = sorted(etas)
        p_count = (2 * p_max + 1) ** p_dim
    else:
        eta_values = [Fr(0)]
        p_count = 1

    cw1 = exact.compound(basis.W_rows(), g - 1)
    m_dim = len(cw1) * n
    lo_xi, hi_xi = Fr(1, 4), Fr(9, 4)
    intervals = []
    fully = False
    pairs_total = 0
    pairs_excluding = 0
    for m in product(range(-m_max, m_max + 1), repeat=m_dim):
        m_sup = exact.sup_norm(m)
        eps = gamma / (1 + Fr(m_sup) ** int(tau))
        blocks = [m[t * n:(t + 1) * n] for t in range(len(cw1))]
        wxm = [sum(w * x for w, x in zip(wb, blk)) for blk in blocks]
        zeta = exact.norm_sq(exact.mat_vec(cw1, wxm))
        for eta in eta_values:
            pairs_total += 1
            if eta == 0 and m_sup == 0:
                continue  # excluded pair (0, 0)
            if zeta == 0:
                if eta < eps:
                    fully = True
                    intervals.append((lo_xi, hi_xi))
                    pairs_excluding += 1
                continue
            lo = max(lo_xi, (eta - eps) / zeta)
            hi = min(hi_xi, (eta + eps) / zeta)
            if hi > lo:
                intervals.append((lo, hi))
                pairs_excluding += 1
    merged = exact.merge_intervals(intervals)
    xi_measure = exact.intervals_measure(merged)
    lam_measure = sum(math.sqrt(float(hi)) - math.sqrt(float(lo))
                      for lo, hi in merged)
    membership = None
    if lambda_grid is not None:
        membership = []
        for lam in lambda_grid:
            xi = exact.parse_rational(lam, "lambda") ** 2
            membership.append(any(lo <= xi <= hi for lo, hi in merged))
    return MeasureResult(lambda_measure=lam_measure, xi_intervals=merged,
                         xi_measure=xi_measure, pairs_total=pairs_total,
                         pairs_excluding=pairs_excluding, fully_excluded=fully,
                         grid_membership=membership)


def symbol_floor_membership(basis: LatticeBasis, params: FrequencyParams,
                            N0: int, tau: int, kind: str):
    """Check |symbol| >= N0^{-tau} on the whole N0-box at theta = 0.

    Returns (True, None) or (False, witness site).
    """
    if N0 < 1:
        raise ValidationError("N0 must be at least 1")
    floor = Fr(1, int(N0) ** int(tau))
    at_zero = FrequencyParams(n=params.n, omega_bar=params.omega_bar,
                              gamma0=params.gamma0, tau0=params.tau0,
                              lam=params.lam, theta=Fr(0), mass=params.mass)
    signs = _signs(kind)
    for ell in product(range(-N0, N0 + 1), repeat=params.n):
        for j in product(range(-N0, N0 + 1), repeat=basis.d):
            for a in signs:
                site = SpaceTimeSite(tuple(ell), tuple(j), a)
                if abs(symbol(basis, at_zero, site, kind)) < floor:
                    return False, site
    return True, None


# ---------------------------------------------------------------------------
# per-pair bilinear bounds along chains


@dataclass
class PairBoundReport:
    empirical_constant: float
    worst_pair: tuple | None
    pair_count: int
    step_bound_ok: bool | None     # theta-eliminating step bound (linear kind)
    max_step_mu_gap: float

    def to_dict(self):
        return {"empirical_constant": self.empirical_constant,
                "worst_pair": list(self.worst_pair) if self.worst_pair else None,
                "pair_count": self.pair_count,
                "step_bound_ok": self.step_bound_ok,
                "max_step_mu_gap": self.max_step_mu_gap}


def chain_pair_bounds(basis: LatticeBasis, params: FrequencyParams,
                      chain: SingularChain, kind: str) -> PairBoundReport:
    """Empirical constant of the quadratic pair bound along a singular chain.

    For every ordered pair the bilinear form of the anchor against the
    difference is compared with ``|q - q0|^2 gamma^2``; the reported constant
    is the smallest one making all bounds hold.  For the linear kind the
    theta-free consecutive-step inequality (budget ``2(m+1)``) is also
    replayed.
    """
    sites = chain.sites
    gamma = chain.gamma
    mu_vals = [mu(basis, s.j) for s in sites]
    worst = None
    best_c = 0.0
    pair_count = 0
    for q0, s0 in enumerate(sites):
        x0 = params.omega_dot(s0.ell) + params.theta
        for q, s in enumerate(sites):
            if q == q0:
                continue
            diff_j = tuple(a - b for a, b in zip(s.j, s0.j))
            space = bilinear(basis, s0.j, diff_j)
            if kind == NLW:
                xq = params.omega_dot(s.ell) + params.theta
                lhs = abs(-x0 * (xq - x0) + space)
            else:
                lhs = abs(space)
            denom = (q - q0) ** 2 * float(gamma) ** 2
            ratio = float(lhs) / denom
            pair_count += 1
            if ratio > best_c:
                best_c = ratio
                worst = (q0, q)
    step_ok = None
    max_gap = 0.0
    if len(sites) >= 2:
        budget = 2 * (abs(params.mass) + 1)
        step_ok = True if kind == NLS else None
        for q in range(len(sites) - 1):
            gap = abs(mu_vals[q + 1] - mu_vals[q])
            max_gap = max(max_gap, float(gap))
            if kind == NLS:
                s, s2 = sites[q], sites[q + 1]
                wdl = params.omega_dot(tuple(a - b for a, b in
                                             zip(s2.ell, s.ell)))
                if s.a == s2.a:
                    val = abs((mu_vals[q + 1] - mu_vals[q]) - s.a * wdl)
                else:
                    val = abs((mu_vals[q + 1] + mu_vals[q]) - s2.a * wdl)
                if val > budget:
                    step_ok = False
    return PairBoundReport(empirical_constant=best_c, worst_pair=worst,
                           pair_count=pair_count, step_bound_ok=step_ok,
                           max_step_mu_gap=max_gap)
