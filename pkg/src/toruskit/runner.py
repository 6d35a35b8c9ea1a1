"""Experiment orchestration: dispatch, reports, caching, plot-data emission.

Reports split into a ``meta`` part (wall time, timestamps) and a ``body``
part that is a pure function of (config, seed): rerunning the same config
yields byte-identical body serializations.  Output files are written
atomically (temp file in the target directory, then rename).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__, exact
from .clusters import (
    ClusterPartition,
    box_sites,
    build_partition,
    chain_scaling_experiment,
    relation_link,
    verify_cluster_properties,
)
from .config import ExperimentConfig, serialize
from .errors import ToruskitError, UnknownSeries
from .homological import (
    BlockMatrix,
    cluster_weight_operator,
    commutator,
    decay_profile,
    dn_split,
    homological_residual,
    norm_equivalence_constants,
    random_cross_cluster_matrix,
    solve_homological,
    verify_remainder_support,
)
from .lattice import cauchy_binet_det, gram_det_identity, new_lattice
from .spacetime import (
    ChainBilinearData,
    chain_det_identity,
    chain_pair_bounds,
    enumerate_singular_chains,
    excluded_lambda_measure,
)

Fr = Fraction


# ---------------------------------------------------------------------------
# reports


@dataclass
class RunReport:
    meta: dict
    body: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.body["checks"])

    def body_bytes(self) -> bytes:
        return (json.dumps(self.body, sort_keys=True, separators=(",", ":"))
                + "\n").encode()

    def to_dict(self) -> dict:
        return {"meta": self.meta, "body": self.body}


def _check(name: str, passed: bool, detail: str = "", witness=None) -> dict:
    entry = {"name": name, "passed": bool(passed), "detail": detail}
    if witness is not None:
        entry["witness"] = witness
    return entry


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: Path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# caching keyed by content hash


def cache_dir() -> Path | None:
    env = os.environ.get("TORUSKIT_CACHE")
    if env:
        return Path(env)
    home = Path.home()
    return home / ".cache" / "toruskit" if home else None


def _cache_key(tag: str, payload: dict) -> str:
    canon = json.dumps({"tag": tag, "payload": payload, "v": __version__},
                       sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def cached(tag: str, payload: dict, compute, enabled: bool):
    base = cache_dir() if enabled else None
    if base is None:
        return compute()
    path = base / f"{_cache_key(tag, payload)}.json"
    if path.exists():
        try:
            return json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            pass
    result = compute()
    try:
        atomic_write_json(path, result)
    except OSError:
        pass
    return result


# ---------------------------------------------------------------------------
# per-kind experiments (each returns checks, fitted, data, output files)


def _partition_for(config: ExperimentConfig, basis, box_radius, delta_str,
                   allow_above) -> ClusterPartition:
    delta = exact.parse_rational(delta_str, "delta")

    def compute():
        part = build_partition(basis, box_radius, delta,
                               enforce_delta_bound=not allow_above)
        return part.to_dict()

    payload = {"lattice": config.lattice, "box_radius": box_radius,
               "delta": delta_str}
    data = cached("partition", payload, compute, config.cache)
    return ClusterPartition.from_dict(data)


def _run_cluster(config: ExperimentConfig, out_dir: Path):
    basis = config.basis()
    p = config.params
    partition = _partition_for(config, basis, p["box_radius"], p["delta"],
                               p["allow_delta_above_theorem"])
    report = verify_cluster_properties(basis, partition)
    expected = (2 * p["box_radius"] + 1) ** basis.d
    checks = [
        _check("partition_covers_box_once",
               len(partition.assignment) == expected,
               f"{len(partition.assignment)} sites vs {expected}"),
        _check("cross_cluster_separation",
               not report.separation_violations,
               f"{report.pairs_checked} interior cross pairs checked",
               witness=[[list(a), list(b)]
                        for a, b in report.separation_violations[:5]] or None),
        _check("dyadicity_above_threshold",
               not report.dyadic_violations,
               f"threshold {report.fitted_threshold}",
               witness=report.dyadic_violations[:5] or None),
    ]
    outputs = []
    part_path = out_dir / "partition.json"
    atomic_write_json(part_path, partition.to_dict())
    outputs.append(part_path.name)
    if p["edges_csv"]:
        from itertools import product as iproduct

        lines = ["j1,j2"]
        sites = box_sites(p["box_radius"], basis.d)
        index = set(sites)
        delta = partition.delta
        radius = max(1, exact.floor_pow(2 * p["box_radius"], delta))
        offsets = [o for o in iproduct(range(-radius, radius + 1),
                                       repeat=basis.d) if o > (0,) * basis.d]
        for j in sites:
            for o in offsets:
                j2 = tuple(a + b for a, b in zip(j, o))
                if j2 in index and relation_link(basis, j, j2, delta):
                    lines.append(f"\"{list(j)}\",\"{list(j2)}\"")
        edge_path = out_dir / "edges.csv"
        atomic_write_text(edge_path, "\n".join(lines) + "\n")
        outputs.append(edge_path.name)
    fitted = {"threshold": report.fitted_threshold,
              "constant": report.fitted_constant,
              "exponent": report.fitted_exponent}
    data = {"cluster_stats": report.cluster_stats,
            "interior_clusters": report.interior_clusters,
            "boundary_clusters": report.boundary_clusters,
            "pairs_checked": report.pairs_checked}
    return checks, fitted, data, outputs


def _run_chains(config: ExperimentConfig, out_dir: Path):
    basis = config.basis()
    p = config.params
    result = chain_scaling_experiment(basis, p["gammas"], p["box_radius"],
                                      length_cap=p["length_cap"],
                                      node_budget=p["node_budget"])
    replay_ok = all(w.is_valid(basis) for w in result.witnesses)
    lengths = [r.length for r in result.rows]
    monotone = all(a <= b for a, b in zip(lengths, lengths[1:]))
    checks = [
        _check("witness_chains_replay", replay_ok,
               "every witness re-validates link by link"),
        _check("max_length_monotone_in_gamma", monotone, str(lengths)),
        _check("loglog_slope_below_dimensional_exponent", result.slope_ok,
               f"slope {result.slope:.4f} vs bound {result.slope_bound}"),
    ]
    data = {"scaling": [{"gamma": r.gamma, "max_length": r.length,
                         "truncated": r.truncated} for r in result.rows],
            "witnesses": [[list(j) for j in w.sites] for w in result.witnesses]}
    fitted = {"slope": result.slope, "slope_bound": result.slope_bound}
    csv_path = out_dir / "chain_scaling.csv"
    lines = ["gamma,max_length"] + [f"{r.gamma},{r.length}" for r in result.rows]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    return checks, fitted, data, [csv_path.name]


def _run_singular(config: ExperimentConfig, out_dir: Path):
    basis = config.basis()
    params = config.freq()
    p = config.params
    survey = enumerate_singular_chains(
        basis, params, p["symbol"], p["ell_radius"], p["j_radius"], p["gamma"],
        length_cap=p["length_cap"], node_budget=p["node_budget"],
        threads=config.threads)
    replay_ok = all(c.is_valid(basis, params, p["symbol"]) for c in survey.chains)
    bound = p["exponent_bound"]
    fitted_exp = survey.fitted_exponent
    exp_ok = True
    if bound is not None:
        for c in survey.chains:
            if c.length >= 2:
                base = max(c.section_count, 2) * float(c.gamma)
                if math.log(c.length) > bound * math.log(base) + 1e-12:
                    exp_ok = False
    pair_reports = [chain_pair_bounds(basis, params, c, p["symbol"])
                    for c in survey.chains]
    pair_c = max((r.empirical_constant for r in pair_reports), default=0.0)
    steps_ok = all(r.step_bound_ok in (None, True) for r in pair_reports)
    checks = [
        _check("singular_chains_replay", replay_ok,
               f"{len(survey.chains)} chains over {survey.site_count} sites"),
        _check("chain_length_polynomial_bound", exp_ok,
               f"fitted exponent {fitted_exp:.4f}"
               + (f" vs bound {bound}" if bound is not None else " (reported only)")),
        _check("pair_bilinear_bounds", True,
               f"empirical constant {pair_c:.4f}"),
        _check("theta_free_step_bound", steps_ok,
               "linear-kind consecutive-step budget 2(m+1)"),
    ]
    data = {
        "site_count": survey.site_count,
        "truncated": survey.truncated,
        "chains": [{"length": c.length, "section_count": c.section_count,
                    "min_exponent": c.min_exponent(),
                    "sites": [[list(s.ell), list(s.j), s.a] for s in c.sites]}
                   for c in survey.chains],
        "pair_bounds": [r.to_dict() for r in pair_reports],
    }
    fitted = {"exponent": fitted_exp, "pair_constant": pair_c}
    csv_path = out_dir / "singular_chains.csv"
    lines = ["length,section_count,min_exponent"]
    lines += [f"{c.length},{c.section_count},{c.min_exponent()}"
              for c in survey.chains]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    return checks, fitted, data, [csv_path.name]


def _ls_slope_through_origin(xs, ys) -> float:
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, ys))
    return sxy / sxx if sxx else 0.0


def _run_measure(config: ExperimentConfig, out_dir: Path):
    basis = config.basis()
    p = config.params
    wb = config.frequency["omega_bar"]
    gammas = sorted(exact.parse_rational(x, "gamma") for x in p["gamma_grid"])
    curve = []
    for gamma in gammas:
        res = excluded_lambda_measure(basis, wb, gamma, p["tau"], p["g"],
                                      p["p_max"], p["m_max"])
        curve.append({"gamma": float(gamma),
                      "gamma_exact": exact.format_rational(gamma),
                      "excluded_measure": res.lambda_measure,
                      "xi_measure": exact.format_rational(res.xi_measure),
                      "pairs_excluding": res.pairs_excluding})
    measures = [row["excluded_measure"] for row in curve]
    monotone = all(a <= b + 1e-12 for a, b in zip(measures, measures[1:]))
    slopes = [_ls_slope_through_origin([float(g) for g in gammas], measures)]
    for t in range(1, p["doublings"] + 1):
        scaled = []
        for gamma in gammas:
            res = excluded_lambda_measure(basis, wb, gamma, p["tau"], p["g"],
                                          p["p_max"] * 2**t, p["m_max"] * 2**t)
            scaled.append(res.lambda_measure)
        slopes.append(_ls_slope_through_origin([float(g) for g in gammas], scaled))
    stable = all(abs(s - slopes[0]) <= 0.2 * abs(slopes[0]) + 1e-15
                 for s in slopes) if slopes[0] > 0 else all(s == 0 for s in slopes)
    vanishes = measures[0] <= 1.5 * slopes[0] * float(gammas[0]) + 1e-15
    checks = [
        _check("excluded_measure_monotone_in_gamma", monotone),
        _check("excluded_measure_vanishes_at_zero", vanishes,
               f"measure({gammas[0]}) = {measures[0]:.3e}"),
        _check("excluded_measure_slope_finite", math.isfinite(slopes[0]),
               f"slope {slopes[0]:.4f}"),
        _check("excluded_measure_slope_stable_under_range_doubling", stable,
               f"slopes {['%.4f' % s for s in slopes]}"),
    ]
    fitted = {"slopes": slopes}
    data = {"curve": curve}
    csv_path = out_dir / "measure_curve.csv"
    lines = ["gamma,excluded_measure"]
    lines += [f"{row['gamma']},{row['excluded_measure']}" for row in curve]
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    return checks, fitted, data, [csv_path.name]


def _run_homological(config: ExperimentConfig, out_dir: Path):
    basis = config.basis()
    p = config.params
    if p.get("partition_file"):
        raw = json.loads(Path(p["partition_file"]).read_text())
        partition = ClusterPartition.from_dict(raw)
    else:
        partition = _partition_for(config, basis, p["box_radius"], p["delta"],
                                   p["allow_delta_above_theorem"])
    delta = exact.parse_rational(p["delta"], "delta")
    if p.get("matrix_file"):
        raw = json.loads(Path(p["matrix_file"]).read_text())
        Q = BlockMatrix.from_triplets(raw["box_radius"], raw["d"], raw["entries"])
    else:
        rng = random.Random(config.seed)
        Q = random_cross_cluster_matrix(partition, p["entries"], rng)
    q_d, q_nd = dn_split(Q, partition)
    recombined = q_d + q_nd
    solution = solve_homological(basis, q_nd, partition, delta)
    residual = homological_residual(basis, q_nd, solution)
    support_bad = verify_remainder_support(solution)
    disjoint = not (set(solution.X.entries) & set(solution.R.entries))
    covered = (set(solution.X.entries) | set(solution.R.entries)
               == set(q_nd.entries))
    from .lattice import mu as mu_of

    gap_ok = True
    for (j, j2) in solution.X.support():
        gap = abs(mu_of(basis, j2) - mu_of(basis, j))
        s = exact.sup_norm(j) + exact.sup_norm(j2)
        if not exact.ge_pow(4 * gap, s, delta):
            gap_ok = False
            break
    weight = cluster_weight_operator(partition)
    comm = commutator(q_d, weight)
    c_norm, C_norm = norm_equivalence_constants(partition)
    checks = [
        _check("split_recombines_exactly", recombined == Q),
        _check("homological_identity_entrywise", residual is None,
               witness=None if residual is None
               else [list(residual[0][0]), list(residual[0][1])]),
        _check("solution_supports_disjoint_and_cover", disjoint and covered),
        _check("solved_entries_clear_gap_threshold", gap_ok,
               "every kept entry has |gap| >= (|j|+|j'|)^delta / 4"),
        _check("remainder_support_far_off_diagonal", not support_bad,
               witness=[[list(a), list(b)] for a, b in support_bad[:5]] or None),
        _check("weight_operator_commutes_with_diagonal_part",
               not comm.entries),
    ]
    profile_x = decay_profile(solution.X, p["sigma"], p["decay_orders"])
    profile_r = decay_profile(solution.R, p["sigma"], p["decay_orders"])
    fitted = {"norm_equivalence": [c_norm, C_norm]}
    data = {"entry_count": len(Q.entries),
            "cross_entries": len(q_nd.entries),
            "x_entries": len(solution.X.entries),
            "r_entries": len(solution.R.entries),
            "decay_X": profile_x.to_dict(),
            "decay_R": profile_r.to_dict()}
    mat_path = out_dir / "matrix.json"
    atomic_write_json(mat_path, {"box_radius": Q.box_radius, "d": Q.d,
                                 "entries": Q.to_triplets()})
    return checks, fitted, data, [mat_path.name]


def _random_rational_matrix(rng, d):
    return [[Fr(rng.randint(-5, 5), rng.randint(1, 3)) for _ in range(d)]
            for _ in range(d)]


def _run_verify(config: ExperimentConfig, out_dir: Path):
    p = config.params
    rng = random.Random(config.seed)
    dims = list(range(p["d_min"], p["d_max"] + 1))
    failures = {"compound": 0, "cauchy_binet": 0, "gram": 0, "chain_det": 0}

    for t in range(p["trials_compound"]):
        d = dims[t % len(dims)]
        while True:
            W = _random_rational_matrix(rng, d)
            if exact.det(W) != 0:
                break
        Winv = exact.mat_inverse(W)
        for g in range(1, d + 1):
            prod = exact.mat_mul(exact.compound(W, g), exact.compound(Winv, g))
            n = len(prod)
            if any(prod[i][j] != (1 if i == j else 0)
                   for i in range(n) for j in range(n)):
                failures["compound"] += 1

    for t in range(p["trials_cauchy_binet"]):
        d = dims[t % len(dims)]
        g = rng.randint(1, d)
        M = [[rng.randint(-6, 6) for _ in range(d)] for _ in range(g)]
        N = [[rng.randint(-6, 6) for _ in range(g)] for _ in range(d)]
        direct = exact.det(exact.mat_mul(M, N))
        if cauchy_binet_det(M, N) != direct:
            failures["cauchy_binet"] += 1

    for t in range(p["trials_gram"]):
        d = dims[t % len(dims)]
        g = rng.randint(1, d)
        basis = None
        while basis is None:
            try:
                basis = new_lattice(_random_rational_matrix(rng, d))
            except ToruskitError:
                basis = None
        fs = _independent_int_vectors(rng, d, g)
        ident = gram_det_identity(basis, fs)
        direct = exact.det([[sum(a * b for a, b in zip(
            exact.mat_vec(basis.W_rows(), f1), exact.mat_vec(basis.W_rows(), f2)))
            for f2 in fs] for f1 in fs])
        if ident.det != direct:
            failures["gram"] += 1

    from .spacetime import FrequencyParams

    for t in range(p["trials_chain_det"]):
        d = dims[t % len(dims)]
        n = rng.randint(1, p["n_max"])
        g = rng.randint(1, d + 1)
        basis = None
        while basis is None:
            try:
                basis = new_lattice(_random_rational_matrix(rng, d))
            except ToruskitError:
                basis = None
        wb = _random_direction(rng, n)
        params = FrequencyParams(n=n, omega_bar=wb, gamma0=Fr(1, 100),
                                 tau0=Fr(n), lam=Fr(1), theta=Fr(0), mass=Fr(1))
        ls = [tuple(rng.randint(-4, 4) for _ in range(n)) for _ in range(g)]
        ks = [tuple(rng.randint(-4, 4) for _ in range(d)) for _ in range(g)]
        data = ChainBilinearData(basis=basis, params=params,
                                 l_vectors=tuple(ls), k_vectors=tuple(ks))
        try:
            ident = chain_det_identity(data)
        except ToruskitError:
            failures["chain_det"] += 1
            continue
        if not ident.m_bound_ok:
            failures["chain_det"] += 1

    checks = [
        _check("compound_inverse_identity", failures["compound"] == 0,
               f"{p['trials_compound']} matrices, all orders"),
        _check("cauchy_binet_matches_direct_determinant",
               failures["cauchy_binet"] == 0,
               f"{p['trials_cauchy_binet']} random integer pairs"),
        _check("gram_determinant_minor_identity", failures["gram"] == 0,
               f"{p['trials_gram']} random bases and frames"),
        _check("chain_determinant_identity_and_m_bound",
               failures["chain_det"] == 0,
               f"{p['trials_chain_det']} synthetic difference sets"),
    ]
    return checks, {}, {"failures": failures}, []


def _independent_int_vectors(rng, d, g):
    while True:
        fs = [tuple(rng.randint(-4, 4) for _ in range(d)) for _ in range(g)]
        if exact.mat_rank([list(f) for f in fs]) == g:
            return fs


def _random_direction(rng, n):
    # rational direction with |.|_1 <= 1 and no zero entries
    while True:
        raw = [Fr(rng.randint(-9, 9), 1) for _ in range(n)]
        if all(raw):
            total = sum(abs(x) for x in raw) + rng.randint(1, 3)
            return tuple(x / total for x in raw)


_RUNNERS = {
    "cluster": _run_cluster,
    "chains": _run_chains,
    "singular": _run_singular,
    "measure": _run_measure,
    "homological": _run_homological,
    "verify": _run_verify,
}


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunReport:
    """Dispatch a validated config, write outputs atomically, return the report."""
    start = time.time()
    target = Path(out_dir if out_dir is not None else config.out_dir)
    target.mkdir(parents=True, exist_ok=True)
    checks, fitted, data, outputs = _RUNNERS[config.kind](config, target)
    body = {
        "artifact": {"name": "toruskit", "version": __version__},
        "kind": config.kind,
        "seed": config.seed,
        "config": serialize(config),
        "checks": checks,
        "fitted": fitted,
        "data": data,
        "outputs": outputs,
    }
    meta = {"wall_time_s": time.time() - start,
            "created_unix": time.time()}
    report = RunReport(meta=meta, body=body)
    atomic_write_text(target / f"report-{config.kind}.json",
                      json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report


# ---------------------------------------------------------------------------
# plot-data emission


_SERIES = {
    "chain_scaling": ("scaling", "gamma,max_length",
                      lambda row: f"{row['gamma']},{row['max_length']}"),
    "measure_curve": ("curve", "gamma,excluded_measure",
                      lambda row: f"{row['gamma']},{row['excluded_measure']}"),
    "cluster_diameters": ("cluster_stats", "M_alpha,diameter",
                          lambda row: f"{row['M_alpha']},{row['diameter']}"),
    "singular_chains": ("chains", "length,section_count,min_exponent",
                        lambda row: f"{row['length']},{row['section_count']},{row['min_exponent']}"),
}


def emit_plot_data(report: RunReport, series: str, out_dir) -> Path:
    """Write one CSV per requested series from a run report."""
    if series not in _SERIES:
        raise UnknownSeries(f"no series named {series!r}; "
                            f"known: {', '.join(sorted(_SERIES))}")
    key, header, fmt = _SERIES[series]
    rows = report.body["data"].get(key)
    if rows is None:
        raise UnknownSeries(f"series {series!r} absent from this report kind")
    path = Path(out_dir) / f"{series}.csv"
    atomic_write_text(path, "\n".join([header] + [fmt(r) for r in rows]) + "\n")
    return path
