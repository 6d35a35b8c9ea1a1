"""Experiment configuration: JSON schema, parsing, validation, round-trip.

A config is one JSON object; rationals are written as ``"num/den"`` strings
or decimal literals and are normalized to canonical strings, so that
``load_config(serialize(config))`` is the identity.  The schema is documented
in the README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import exact
from .clusters import delta_max
from .errors import ParseError, ValidationError
from .lattice import EXACT, FLOATING, LatticeBasis, new_lattice
from .spacetime import NLS, NLW, FrequencyParams

KINDS = ("cluster", "chains", "singular", "measure", "homological", "verify")

Fr = Fraction


def _rat_str(value, fieldname) -> str:
    return exact.format_rational(exact.parse_rational(value, fieldname))


def _require(cond, message):
    if not cond:
        raise ValidationError(message)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    threads: int
    out_dir: str
    cache: bool
    lattice: dict
    frequency: dict | None
    params: dict

    def basis(self) -> LatticeBasis:
        return new_lattice(self.lattice["matrix"], mode=self.lattice["mode"],
                           tolerance=self.lattice.get("tolerance", 1e-9))

    def freq(self) -> FrequencyParams:
        if self.frequency is None:
            raise ValidationError(f"kind {self.kind!r} needs a frequency block")
        f = self.frequency
        return FrequencyParams.create(
            f["omega_bar"], f["gamma0"], f["tau0"], f["lambda"], f["theta"],
            f["mass"], dio_ell_max=f.get("dio_ell_max", 0))


def _normalize_lattice(raw) -> dict:
    if not isinstance(raw, dict) or "matrix" not in raw:
        raise ParseError("lattice: expected an object with a 'matrix' field")
    matrix = raw["matrix"]
    if (not isinstance(matrix, list) or not matrix
            or any(not isinstance(r, list) or len(r) != len(matrix) for r in matrix)):
        raise ValidationError("lattice.matrix: must be a square row-major list")
    mode = raw.get("mode", EXACT)
    _require(mode in (EXACT, FLOATING), f"lattice.mode: unknown mode {mode!r}")
    if mode == EXACT:
        rows = [[_rat_str(x, f"lattice.matrix[{i}][{j}]")
                 for j, x in enumerate(r)] for i, r in enumerate(matrix)]
    else:
        rows = [[float(x) for x in r] for r in matrix]
    out = {"matrix": rows, "mode": mode}
    if "tolerance" in raw:
        out["tolerance"] = float(raw["tolerance"])
    return out


def _normalize_frequency(raw) -> dict:
    if not isinstance(raw, dict):
        raise ParseError("frequency: expected an object")
    for key in ("omega_bar", "gamma0", "tau0"):
        if key not in raw:
            raise ParseError(f"frequency.{key}: missing")
    out = {
        "omega_bar": [_rat_str(w, "frequency.omega_bar") for w in raw["omega_bar"]],
        "gamma0": _rat_str(raw["gamma0"], "frequency.gamma0"),
        "tau0": _rat_str(raw["tau0"], "frequency.tau0"),
        "lambda": _rat_str(raw.get("lambda", 1), "frequency.lambda"),
        "theta": _rat_str(raw.get("theta", 0), "frequency.theta"),
        "mass": _rat_str(raw.get("mass", 1), "frequency.mass"),
        "dio_ell_max": int(raw.get("dio_ell_max", 0)),
    }
    # surface range errors now, field by field
    try:
        FrequencyParams.create(out["omega_bar"], out["gamma0"], out["tau0"],
                               out["lambda"], out["theta"], out["mass"],
                               dio_ell_max=out["dio_ell_max"])
    except ValidationError as exc:
        raise ValidationError(f"frequency: {exc}") from exc
    return out


def _check_delta(delta_str: str, d: int, allow_above: bool, fieldname: str):
    delta = exact.parse_rational(delta_str, fieldname)
    _require(0 < delta < 1, f"{fieldname}: delta {delta_str} outside (0, 1)")
    if not allow_above:
        _require(delta < delta_max(d),
                 f"{fieldname}: delta {delta_str} >= delta_max({d}) = "
                 f"{delta_max(d)}; set allow_delta_above_theorem to override")


def _normalize_params(kind: str, raw: dict, d: int) -> dict:
    raw = dict(raw or {})
    if kind == "cluster":
        out = {
            "box_radius": int(raw.get("box_radius", 16)),
            "delta": _rat_str(raw.get("delta", "1/100"), "params.delta"),
            "allow_delta_above_theorem": bool(raw.get("allow_delta_above_theorem", False)),
            "edges_csv": bool(raw.get("edges_csv", False)),
        }
        _require(out["box_radius"] >= 1, "params.box_radius: must be >= 1")
        _check_delta(out["delta"], d, out["allow_delta_above_theorem"], "params.delta")
        return out
    if kind == "chains":
        out = {
            "box_radius": int(raw.get("box_radius", 50)),
            "gammas": [int(g) for g in raw.get("gammas", [2, 4, 8])],
            "length_cap": raw.get("length_cap"),
            "node_budget": int(raw.get("node_budget", 2_000_000)),
        }
        _require(out["box_radius"] >= 1, "params.box_radius: must be >= 1")
        _require(out["gammas"], "params.gammas: must be nonempty")
        for g in out["gammas"]:
            _require(g >= 2, f"params.gammas: gamma {g} below 2")
        if out["length_cap"] is not None:
            out["length_cap"] = int(out["length_cap"])
        return out
    if kind == "singular":
        out = {
            "symbol": raw.get("symbol", NLW),
            "ell_radius": int(raw.get("ell_radius", 20)),
            "j_radius": int(raw.get("j_radius", 20)),
            "gamma": int(raw.get("gamma", 2)),
            "length_cap": raw.get("length_cap"),
            "node_budget": int(raw.get("node_budget", 2_000_000)),
            "exponent_bound": raw.get("exponent_bound"),
        }
        _require(out["symbol"] in (NLW, NLS),
                 f"params.symbol: must be '{NLW}' or '{NLS}'")
        _require(out["gamma"] >= 2, "params.gamma: must be >= 2")
        _require(out["ell_radius"] >= 1 and out["j_radius"] >= 1,
                 "params.*_radius: must be >= 1")
        if out["length_cap"] is not None:
            out["length_cap"] = int(out["length_cap"])
        if out["exponent_bound"] is not None:
            out["exponent_bound"] = float(out["exponent_bound"])
        return out
    if kind == "measure":
        grid = raw.get("gamma_grid")
        _require(isinstance(grid, list) and grid,
                 "params.gamma_grid: must be a nonempty list of rationals")
        out = {
            "g": int(raw.get("g", 2)),
            "tau": int(raw.get("tau", 6)),
            "p_max": int(raw.get("p_max", 2)),
            "m_max": int(raw.get("m_max", 2)),
            "gamma_grid": [_rat_str(x, "params.gamma_grid") for x in grid],
            "doublings": int(raw.get("doublings", 0)),
        }
        for x in out["gamma_grid"]:
            _require(exact.parse_rational(x, "params.gamma_grid") > 0,
                     "params.gamma_grid: gammas must be positive")
        _require(out["g"] >= 1, "params.g: must be >= 1")
        _require(out["tau"] >= 0, "params.tau: must be >= 0")
        _require(out["p_max"] >= 0 and out["m_max"] >= 0,
                 "params.p_max/m_max: must be >= 0")
        return out
    if kind == "homological":
        out = {
            "box_radius": int(raw.get("box_radius", 16)),
            "delta": _rat_str(raw.get("delta", "1/100"), "params.delta"),
            "allow_delta_above_theorem": bool(raw.get("allow_delta_above_theorem", False)),
            "entries": int(raw.get("entries", 200)),
            "matrix_file": raw.get("matrix_file"),
            "partition_file": raw.get("partition_file"),
            "sigma": float(raw.get("sigma", 0.0)),
            "decay_orders": [int(x) for x in raw.get("decay_orders", [1, 2, 4])],
        }
        _require(out["box_radius"] >= 1, "params.box_radius: must be >= 1")
        _require(out["entries"] >= 0, "params.entries: must be >= 0")
        _check_delta(out["delta"], d, out["allow_delta_above_theorem"], "params.delta")
        return out
    if kind == "verify":
        out = {
            "trials_compound": int(raw.get("trials_compound", 40)),
            "trials_cauchy_binet": int(raw.get("trials_cauchy_binet", 100)),
            "trials_gram": int(raw.get("trials_gram", 100)),
            "trials_chain_det": int(raw.get("trials_chain_det", 40)),
            "d_min": int(raw.get("d_min", 2)),
            "d_max": int(raw.get("d_max", 4)),
            "n_max": int(raw.get("n_max", 3)),
        }
        _require(1 <= out["d_min"] <= out["d_max"] <= 7,
                 "params.d_min/d_max: need 1 <= d_min <= d_max <= 7")
        return out
    raise ValidationError(f"kind: unknown experiment kind {kind!r}")


def normalize(raw: dict) -> ExperimentConfig:
    """Validate a raw dict and fill defaults; raises ParseError/ValidationError."""
    if not isinstance(raw, dict):
        raise ParseError("config root must be a JSON object")
    kind = raw.get("kind")
    _require(kind in KINDS, f"kind: must be one of {', '.join(KINDS)}")
    lattice = _normalize_lattice(raw.get("lattice", {"matrix": [["1"]]}))
    d = len(lattice["matrix"])
    frequency = None
    if raw.get("frequency") is not None:
        frequency = _normalize_frequency(raw["frequency"])
    if kind in ("singular", "measure"):
        _require(frequency is not None, f"frequency: required for kind {kind!r}")
    params = _normalize_params(kind, raw.get("params", {}), d)
    threads = int(raw.get("threads", 1))
    _require(threads >= 1, "threads: must be >= 1")
    return ExperimentConfig(
        kind=kind,
        seed=int(raw.get("seed", 0)),
        threads=threads,
        out_dir=str(raw.get("out_dir", ".")),
        cache=bool(raw.get("cache", True)),
        lattice=lattice,
        frequency=frequency,
        params=params,
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    config = normalize(raw)
    # referenced files must exist at load time
    mf = config.params.get("matrix_file")
    pf = config.params.get("partition_file")
    base = Path(path).parent
    for name, ref in (("matrix_file", mf), ("partition_file", pf)):
        if ref is not None and not (base / ref).exists() and not Path(ref).exists():
            raise ValidationError(f"params.{name}: file {ref!r} does not exist")
    return config


def serialize(config: ExperimentConfig) -> dict:
    return {
        "kind": config.kind,
        "seed": config.seed,
        "threads": config.threads,
        "out_dir": config.out_dir,
        "cache": config.cache,
        "lattice": config.lattice,
        "frequency": config.frequency,
        "params": config.params,
    }


def dump_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(serialize(config), indent=2, sort_keys=True) + "\n")
