"""Operator symbols, singular chains, determinant identity, coverings, measures."""

import math
import random
from fractions import Fraction as Fr

import pytest

from toruskit.errors import (
    DependentVectors,
    GammaOutOfRange,
    IdentityViolation,
    ValidationError,
)
from toruskit.lattice import bilinear, mu, new_lattice
from toruskit.spacetime import (
    NLS,
    NLW,
    ChainBilinearData,
    FrequencyParams,
    SpaceTimeSite,
    chain_bilinear_data,
    chain_det_identity,
    chain_pair_bounds,
    compound_floor,
    diophantine_check,
    enumerate_singular_chains,
    enumerate_singular_sites,
    excluded_lambda_measure,
    is_singular,
    max_cover_intervals,
    site_distance,
    symbol_floor_membership,
    symbol_nls,
    symbol_nlw,
    theta_sublevel_cover,
)

B1 = new_lattice([[1]])
B2 = new_lattice([[1, 0], [0, 1]])


def params(mass="1", lam="1", theta="0", omega=("1",), gamma0="1/2", tau0=1):
    return FrequencyParams.create(omega, gamma0, tau0, lam, theta, mass)


def test_symbol_values():
    p = params(mass="1/2")
    assert symbol_nlw(B1, p, (0,), (0,)) == Fr(1, 2)
    p1 = params(mass="1")
    assert symbol_nlw(B1, p1, (1,), (1,)) == 1       # -1 + 1 + 1
    # root case: lam*wbar.ell + theta = sqrt(mu + m)
    p2 = params(mass="3", lam="1", theta="1")        # ell=1 -> y = 2, mu=1
    assert symbol_nlw(B1, p2, (1,), (1,)) == 0
    p3 = params(mass="1", lam="1", theta="1/2")
    assert symbol_nls(B1, p3, (1,), (0,), 1) == Fr(-1, 2)
    assert symbol_nls(B1, p3, (0,), (0,), 1) == Fr(1, 2)


def test_nls_sign_flip_identity():
    rng = random.Random(0)
    p = params(mass="7/3", lam="5/4", theta="2/7")
    for _ in range(25):
        ell = (rng.randint(-9, 9),)
        j = (rng.randint(-9, 9),)
        total = symbol_nls(B1, p, ell, j, 1) + symbol_nls(B1, p, ell, j, -1)
        assert total == 2 * (mu(B1, j) + p.mass)


def test_singular_boundary_is_regular():
    p = params(mass="1")
    site = SpaceTimeSite((0,), (0,), 1)
    assert abs(symbol_nlw(B1, p, (0,), (0,))) == 1
    assert not is_singular(B1, p, site, NLW)
    assert is_singular(B1, params(mass="1/2"), site, NLW)
    assert not is_singular(B1, params(mass="2"), site, NLW)


def test_site_distance():
    a = SpaceTimeSite((0,), (0,), 1)
    b = SpaceTimeSite((0,), (0,), -1)
    assert site_distance(a, b) == 1
    assert site_distance(a, a) == 0
    c = SpaceTimeSite((3,), (-1,), -1)
    assert site_distance(a, c) == 3


def test_enumerate_sites_empty_when_mass_dominates():
    p = params(mass="100")
    assert enumerate_singular_sites(B1, p, NLW, 3, 3) == []


def test_enumerate_sites_replay_filter():
    p = params(mass="1/2")
    sites = enumerate_singular_sites(B1, p, NLW, 12, 12)
    assert sites == sorted(sites)
    for s in sites:
        assert abs(symbol_nlw(B1, p, s.ell, s.j)) < 1
    # near the cone: |y^2 - mu - m| < 1
    for s in sites:
        y = float(p.lam) * s.ell[0]
        assert abs(y * y - s.j[0] ** 2 - 0.5) < 1


def test_enumerate_sites_nls_both_signs():
    p = params(mass="1/2")
    sites = enumerate_singular_sites(B1, p, NLS, 10, 3)
    assert {s.a for s in sites} == {-1, 1}
    for s in sites:
        assert abs(symbol_nls(B1, p, s.ell, s.j, s.a)) < 1


def test_enumerate_sites_threads_match_serial():
    p = params(mass="1/2")
    serial = enumerate_singular_sites(B1, p, NLW, 15, 15)
    threaded = enumerate_singular_sites(B1, p, NLW, 15, 15, threads=3)
    assert serial == threaded


def test_singular_chains_empty_box():
    p = params(mass="100")
    survey = enumerate_singular_chains(B1, p, NLW, 3, 3, 2)
    assert survey.chains == [] and survey.site_count == 0


def test_singular_chains_replay_and_exponent():
    p = params(mass="1/2")
    survey = enumerate_singular_chains(B1, p, NLW, 30, 30, 2)
    assert survey.site_count == 123  # two cone lines plus (+-1, 0)
    assert not survey.truncated
    for chain in survey.chains:
        assert chain.is_valid(B1, p, NLW)
        if chain.length >= 2:
            base = max(chain.section_count, 2) * 2.0
            assert chain.length <= base ** survey.fitted_exponent * (1 + 1e-9)
    assert math.isfinite(survey.fitted_exponent)
    with pytest.raises(IdentityViolation):
        enumerate_singular_chains(B1, p, NLW, 30, 30, 2, exponent_bound=0.5)


def test_truncated_chains_still_maximal():
    from toruskit.spacetime import enumerate_singular_chains as survey_fn

    p = params(mass="1/2")
    survey = survey_fn(B1, p, NLW, 20, 20, 2, length_cap=5)
    assert survey.truncated
    top = survey.chains[0]
    assert top.is_valid(B1, p, NLW)
    sites = set(enumerate_singular_sites(B1, p, NLW, 20, 20))
    members = set(top.sites)
    for tip in (top.sites[0], top.sites[-1]):
        assert not any(t not in members and site_distance(tip, t) <= 2
                       for t in sites)


def test_chain_bilinear_g1():
    p = params(mass="1")
    ch = [SpaceTimeSite((0,), (0, 0), 1), SpaceTimeSite((1,), (3, 4), 1)]
    data = chain_bilinear_data(B2, p, ch, 0, [1])
    A = data.A()
    assert A == [[Fr(24)]]  # -(w.l)^2 + <k,k> = -1 + 25
    assert data.S_bar() == [[Fr(1)]]
    assert data.R() == [[Fr(25)]]


def test_chain_bilinear_pure_space():
    p = params(mass="1")
    ch = [SpaceTimeSite((5,), (0, 0), 1), SpaceTimeSite((5,), (1, 2), 1),
          SpaceTimeSite((5,), (2, -1), 1)]
    data = chain_bilinear_data(B2, p, ch, 0, [1, 2])
    assert data.S_bar() == [[0, 0], [0, 0]]
    assert data.A() == data.R()
    A = data.A()
    assert A[0][1] == A[1][0]


def test_chain_bilinear_rejects_dependent():
    p = params(mass="1")
    ch = [SpaceTimeSite((0,), (0, 0), 1), SpaceTimeSite((1,), (1, 0), 1),
          SpaceTimeSite((2,), (2, 0), 1)]
    with pytest.raises(DependentVectors):
        chain_bilinear_data(B2, p, ch, 0, [1, 2])


def test_chain_det_identity_g1():
    p = params(mass="1")
    ch = [SpaceTimeSite((0,), (0, 0), 1), SpaceTimeSite((1,), (3, 4), 1)]
    data = chain_bilinear_data(B2, p, ch, 0, [1])
    ident = chain_det_identity(data)
    assert ident.p == (3, 4)
    assert ident.eta == 25
    assert ident.m_coeffs == ((1,),)
    assert ident.zeta == 1
    assert ident.residual == 0.0
    assert ident.gram_positive
    assert ident.det_value(Fr(1)) == 24
    assert data.det_A(Fr(2)) == 25 - 4


def test_chain_det_identity_zero_time_part():
    # all time indices equal: the lam^2 part vanishes and the determinant
    # reduces to the Gram minor identity
    p = params(mass="1")
    rng = random.Random(1)
    for _ in range(20):
        ks = []
        while len(ks) < 2:
            cand = (rng.randint(-4, 4), rng.randint(-4, 4))
            if cand not in ks and any(cand):
                ks.append(cand)
        data = ChainBilinearData(basis=B2, params=p,
                                 l_vectors=((0,), (0,)),
                                 k_vectors=tuple(ks))
        ident = chain_det_identity(data)
        assert ident.zeta == 0
        assert all(m == (0,) for m in ident.m_coeffs)
        gram = [[bilinear(B2, a, b) for b in ks] for a in ks]
        from toruskit import exact
        assert ident.det_value(Fr(1)) == exact.det(gram)


def test_chain_det_identity_random_and_g_above_d():
    from toruskit.errors import SingularGenerators

    rng = random.Random(2)
    trials = 0
    while trials < 60:
        d = rng.randint(1, 4)
        n = rng.randint(1, 3)
        g = rng.randint(1, d + 1)
        basis = None
        while basis is None:
            try:
                basis = new_lattice([[Fr(rng.randint(-3, 3), rng.randint(1, 2))
                                      for _ in range(d)] for _ in range(d)])
            except SingularGenerators:
                basis = None
        raw = [Fr(rng.randint(-5, 5)) for _ in range(n)]
        total = sum(abs(x) for x in raw) + 1
        wb = tuple(x / total for x in raw)
        p = FrequencyParams(n=n, omega_bar=wb, gamma0=Fr(1, 100), tau0=Fr(n),
                            lam=Fr(1), theta=Fr(0), mass=Fr(1))
        ls = [tuple(rng.randint(-4, 4) for _ in range(n)) for _ in range(g)]
        ks = [tuple(rng.randint(-4, 4) for _ in range(d)) for _ in range(g)]
        data = ChainBilinearData(basis=basis, params=p,
                                 l_vectors=tuple(ls), k_vectors=tuple(ks))
        ident = chain_det_identity(data)   # raises on any mismatch
        assert ident.m_bound_ok
        if g == d + 1:
            assert ident.p == () and ident.eta == 0
        trials += 1


def test_gram_positivity_detects_independence():
    p = params(mass="1")
    ch = [SpaceTimeSite((0,), (0, 0), 1), SpaceTimeSite((1,), (1, 0), 1),
          SpaceTimeSite((2,), (0, 1), 1)]
    data = chain_bilinear_data(B2, p, ch, 0, [1, 2])
    ident = chain_det_identity(data)
    assert ident.gram_positive
    assert (ident.p, ident.m_coeffs) != ((0,), ((0,),))


# ---------------------------------------------------------------------------
# theta sublevel covers


def test_cover_two_intervals_near_unit_roots():
    p = params(mass="1")
    cov = theta_sublevel_cover(B1, p, (0,), (0,), 10, 2, NLW)
    assert len(cov.intervals) == 2
    lo1, hi1 = cov.intervals[1]
    assert lo1 == pytest.approx(math.sqrt(0.99))
    assert hi1 == pytest.approx(math.sqrt(1.01))
    # exact sublevel width slightly exceeds eps/sqrt(m) at mu = 0 (by ~eps^2/8m^2)
    width = hi1 - lo1
    assert width == pytest.approx(math.sqrt(1.01) - math.sqrt(0.99))
    assert width <= 0.01 * (1 + 2e-5)
    assert not cov.length_bound_exact(p.mass)


def test_cover_bound_holds_off_origin():
    p = params(mass="1")
    for j in ((1,), (2,), (5,)):
        cov = theta_sublevel_cover(B1, p, (0,), j, 10, 2, NLW)
        assert len(cov.intervals) == 2
        assert cov.length_bound_exact(p.mass)
        assert cov.max_length() <= 0.01 / math.sqrt(float(p.mass)) * (1 + 1e-12)


def test_cover_counts():
    assert max_cover_intervals(Fr(1), NLW) == 4
    assert max_cover_intervals(Fr(1, 4), NLW) == 6
    assert max_cover_intervals(Fr(4), NLW) == 2
    assert max_cover_intervals(Fr(1), NLS) == 2


def test_cover_soundness_by_sampling():
    import numpy as np

    rng = random.Random(3)
    for _ in range(40):
        m = Fr(rng.randint(25, 400), 100)
        lam = Fr(rng.randint(50, 150), 100)
        ell = (rng.randint(-10, 10),)
        j = (rng.randint(1, 10),)
        p = FrequencyParams(n=1, omega_bar=(Fr(1),), gamma0=Fr(1, 2),
                            tau0=Fr(1), lam=lam, theta=Fr(0), mass=m)
        cov = theta_sublevel_cover(B1, p, ell, j, 10, 2, NLW)
        rho, shift = float(cov.rho), float(cov.shift)
        radius = abs(shift) + math.sqrt(rho + 1) + 1
        thetas = np.linspace(-radius, radius, 4001)
        vals = -((shift + thetas) ** 2) + rho
        inside = np.abs(vals) <= 0.01
        for theta in thetas[inside]:
            assert cov.contains(float(theta), slack=1e-9)


def test_cover_nls_single_interval():
    p = params(mass="1", lam="1")
    cov = theta_sublevel_cover(B1, p, (3,), (2,), 10, 3, NLS, a=-1)
    assert len(cov.intervals) == 1
    lo, hi = cov.intervals[0]
    assert hi - lo == pytest.approx(2e-3)
    center = -(4 + 1) - 3  # a(mu+m) - lam*wbar.ell
    assert (lo + hi) / 2 == pytest.approx(center)


def test_cover_argument_validation():
    p = params(mass="1")
    with pytest.raises(ValidationError):
        theta_sublevel_cover(B1, p, (0,), (0,), 1, 2, NLW)
    with pytest.raises(ValidationError):
        theta_sublevel_cover(B1, p, (0,), (0,), 10, 0, NLW)


# ---------------------------------------------------------------------------
# Diophantine floor, measure, lambda floor


def test_diophantine_single_frequency():
    res = diophantine_check((Fr(1),), Fr(1, 2), 1, 10)
    assert res.passed and res.max_gamma0 == Fr(1, 2)
    assert not diophantine_check((Fr(1),), Fr(2, 3), 1, 10).passed


def test_diophantine_resonant_direction():
    res = diophantine_check((Fr(1, 2), Fr(1, 2)), Fr(1, 1000), 2, 5)
    assert not res.passed
    assert res.max_gamma0 == 0
    assert abs(sum(a * b for a, b in zip(res.worst_ell, (1, -1)))) in (0, 2)


def test_diophantine_golden_like_direction():
    # convergent-based direction: (408, 577)/986 approximates (1, sqrt 2)/denom
    wb = (Fr(408, 986), Fr(577, 986))
    res = diophantine_check(wb, Fr(1, 10**7), 2, 12)
    assert res.passed
    assert res.max_gamma0 > 0


def test_convergent_direction_constructor():
    from toruskit.spacetime import convergent_direction

    wb = convergent_direction([1] * 12)     # golden-ratio convergent 233/144
    assert sum(abs(w) for w in wb) == 1
    assert wb[1] / wb[0] == Fr(233, 144)
    res = diophantine_check(wb, Fr(1, 2000), 2, 12)
    assert res.passed
    with pytest.raises(ValidationError):
        convergent_direction([0, 2])


def test_measure_zero_when_m_range_empty():
    # p != 0, m = 0: constant polynomials stay above gamma
    res = excluded_lambda_measure(B2, ("1",), Fr(1, 100), 6, 2, 2, 0)
    assert res.lambda_measure == 0.0
    assert res.xi_intervals == []


def test_measure_single_mode_interval():
    # p = 0 forced, single m block: one interval of known exact length
    res = excluded_lambda_measure(B1, ("1",), Fr(1, 100), 0, 1, 0, 1)
    # d=1, g=1: zeta_m = m^2 for W=1; m=+-1 gives |1 - xi m^2|... eta=0:
    # excluded xi in (-eps, eps)/1 intersect [1/4, 9/4] = empty
    assert res.lambda_measure == 0.0


def test_measure_exact_interval_endpoints():
    # p=0, wbar=1/2, m=+-1, tau=1, gamma=1/5: eps = 1/10, zeta = 1/4,
    # excluded xi = (-2/5, 2/5) clipped to [1/4, 9/4] -> exactly [1/4, 2/5]
    import math

    res = excluded_lambda_measure(B1, ("1/2",), Fr(1, 5), 1, 1, 0, 1)
    assert res.xi_intervals == [(Fr(1, 4), Fr(2, 5))]
    assert res.xi_measure == Fr(3, 20)
    assert res.lambda_measure == pytest.approx(math.sqrt(0.4) - 0.5)


def test_measure_monotone_and_exact_union():
    gammas = [Fr(1, 1000), Fr(1, 100), Fr(1, 20)]
    values = []
    for gamma in gammas:
        res = excluded_lambda_measure(B2, ("1",), gamma, 6, 2, 2, 2)
        values.append(res.lambda_measure)
        # union bounded by the sum of individual lengths in lambda
        assert res.lambda_measure <= float(res.xi_measure)  # sqrt shrinks on [1/4, ...]
    assert values == sorted(values)
    assert values[0] < values[-1]


def test_measure_gamma_range_guard():
    with pytest.raises(GammaOutOfRange):
        excluded_lambda_measure(B2, ("1",), Fr(10), 6, 2, 1, 1)
    with pytest.raises(GammaOutOfRange):
        excluded_lambda_measure(B2, ("1",), Fr(0), 6, 2, 1, 1)
    assert compound_floor(B2) == Fr(1, 2)


def test_measure_grid_membership():
    gamma = Fr(1, 100)
    res = excluded_lambda_measure(B2, ("1",), gamma, 6, 2, 2, 2,
                                  lambda_grid=[Fr(1, 2), Fr(1), Fr(3, 2)])
    assert res.grid_membership is not None
    for lam, member in zip([Fr(1, 2), Fr(1), Fr(3, 2)], res.grid_membership):
        xi = lam * lam
        inside = any(lo <= xi <= hi for lo, hi in res.xi_intervals)
        assert member == inside


def test_symbol_floor_membership():
    p = params(mass="3")
    ok, witness = symbol_floor_membership(B1, p, 3, 2, NLW)
    # resonance at ell=2, j=1: (2)^2 = 1 + 3 -> symbol 0
    assert not ok and witness == SpaceTimeSite((-2,), (-1,), 1)
    p2 = params(mass="1/3")
    ok2, _ = symbol_floor_membership(B1, p2, 2, 3, NLS)
    assert ok2 == all(
        abs(symbol_nls(B1, FrequencyParams(n=1, omega_bar=(Fr(1),),
                                           gamma0=Fr(1, 2), tau0=Fr(1),
                                           lam=p2.lam, theta=Fr(0),
                                           mass=p2.mass),
                       (l,), (j,), a)) >= Fr(1, 8)
        for l in range(-2, 3) for j in range(-2, 3) for a in (1, -1))


def test_chain_pair_bounds_trivial_and_nls():
    p = params(mass="1/2")
    from toruskit.spacetime import SingularChain

    single = SingularChain((SpaceTimeSite((0,), (0,), 1),), 2)
    rep = chain_pair_bounds(B1, p, single, NLW)
    assert rep.empirical_constant == 0.0 and rep.pair_count == 0

    survey = enumerate_singular_chains(B1, p, NLS, 15, 3, 2)
    assert survey.chains
    for chain in survey.chains:
        rep = chain_pair_bounds(B1, p, chain, NLS)
        assert rep.step_bound_ok in (None, True)
        denom_bound = rep.empirical_constant
        # replay: no pair exceeds the reported constant
        for q0 in range(len(chain.sites)):
            for q in range(len(chain.sites)):
                if q == q0:
                    continue
                lhs = abs(bilinear(
                    B1, chain.sites[q0].j,
                    tuple(a - b for a, b in zip(chain.sites[q].j,
                                                chain.sites[q0].j))))
                assert float(lhs) <= denom_bound * (q - q0) ** 2 * 4 + 1e-9


def test_frequency_params_validation():
    with pytest.raises(ValidationError):
        FrequencyParams.create(("2",), "1/2", 1)        # |wbar|_1 > 1
    with pytest.raises(ValidationError):
        FrequencyParams.create(("1",), "1/2", 1, lam="2")
    with pytest.raises(ValidationError):
        FrequencyParams.create(("1",), "1/2", 1, mass="0")
    with pytest.raises(ValidationError):
        FrequencyParams.create(("1",), "1/2", 0)        # tau0 < n
    with pytest.raises(ValidationError):
        FrequencyParams.create(("1", "0"), "1/2", 2, dio_ell_max=3)


def test_site_ordering_is_lexicographic():
    p = params(mass="1/2")
    sites = enumerate_singular_sites(B1, p, NLS, 4, 2)
    assert sites == sorted(sites)
