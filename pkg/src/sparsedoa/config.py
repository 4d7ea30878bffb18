"""YAML experiment configs with strict validation.

Schema (every key optional unless marked)::

    seed: 0                      # base seed, default 0
    arrays:                      # required, one or more
      - family: thinned_coprime  # or any Family value / CLI alias
        params: {M: 5, N: 6}
      - positions: [0, 1, 4, 6]  # explicit custom array
    scenario:
      angles_deg: [-20, 0, 20]   # or n_sources (evenly spaced in [-60, 60])
      n_sources: 20
      powers: [1, 1, 1]          # linear, default unit power
      snapshots: 512
      snr_db: 0                  # number, or a list for rmse runs
      noise_power: 1.0           # alternative to snr_db
    grid: {start_deg: -90, stop_deg: 90, step_deg: 0.2}
    epsilon: null                # fixed epsilon, overrides eps_scale
    eps_scale: 3.0
    runs: 50
    min_separation_deg: 1.0
    solver: {method: homotopy, nonnegative: false, max_iters: 5000}
    workers: 1
    outputs: {dir: out}
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import geometry
from .errors import ConfigError, SparseDoaError
from .estimation import DEFAULT_EPS_SCALE, AngularGrid
from .geometry import Family, SensorArray
from .solver import SolverOptions

FAMILY_ALIASES = {
    "prototype": Family.PROTOTYPE_COPRIME,
    "conventional": Family.CONVENTIONAL_COPRIME,
    "coprime": Family.CONVENTIONAL_COPRIME,
    "thinned": Family.THINNED_COPRIME,
    "nested": Family.NESTED,
    "cadis": Family.CADIS,
    "custom": Family.CUSTOM,
}

_TOP_KEYS = {
    "seed", "arrays", "scenario", "grid", "epsilon", "eps_scale", "runs",
    "min_separation_deg", "solver", "workers", "outputs",
}
_SCENARIO_KEYS = {"angles_deg", "n_sources", "powers", "snapshots", "snr_db", "noise_power"}
_GRID_KEYS = {"start_deg", "stop_deg", "step_deg"}
_SOLVER_KEYS = {"method", "nonnegative", "max_iters", "tol_primal", "tol_dual"}
_OUTPUT_KEYS = {"dir"}
_ARRAY_KEYS = {"family", "params", "positions"}


def resolve_family(name: str) -> Family:
    key = str(name).strip().lower()
    if key in FAMILY_ALIASES:
        return FAMILY_ALIASES[key]
    return Family(key)


@dataclass
class ArraySpec:
    family: str
    params: dict = field(default_factory=dict)
    positions: list | None = None

    def build(self) -> SensorArray:
        if self.positions is not None:
            return geometry.custom_array(self.positions)
        return geometry.build(resolve_family(self.family), self.params)

    def to_dict(self) -> dict:
        if self.positions is not None:
            return {"positions": list(self.positions)}
        return {"family": self.family, "params": dict(self.params)}


@dataclass
class ExperimentConfig:
    arrays: list
    angles_deg: list
    powers: list
    snapshots: int = 512
    snr_db: list | None = None
    noise_power: float | None = None
    grid: AngularGrid = field(default_factory=AngularGrid)
    epsilon: float | None = None
    eps_scale: float = DEFAULT_EPS_SCALE
    runs: int = 50
    seed: int = 0
    min_separation_deg: float = 1.0
    solver: dict = field(default_factory=dict)
    workers: int = 1
    output_dir: str = "out"

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**self.solver)

    def built_arrays(self) -> list[SensorArray]:
        return [a.build() for a in self.arrays]

    def to_dict(self) -> dict:
        scen = {
            "angles_deg": list(self.angles_deg),
            "powers": list(self.powers),
            "snapshots": self.snapshots,
        }
        if self.snr_db is not None:
            scen["snr_db"] = list(self.snr_db)
        if self.noise_power is not None:
            scen["noise_power"] = self.noise_power
        return {
            "seed": self.seed,
            "arrays": [a.to_dict() for a in self.arrays],
            "scenario": scen,
            "grid": {
                "start_deg": self.grid.start_deg,
                "stop_deg": self.grid.stop_deg,
                "step_deg": self.grid.step_deg,
            },
            "epsilon": self.epsilon,
            "eps_scale": self.eps_scale,
            "runs": self.runs,
            "min_separation_deg": self.min_separation_deg,
            "solver": dict(self.solver),
            "workers": self.workers,
            "outputs": {"dir": self.output_dir},
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; ``workers`` and output paths excluded."""
        d = self.to_dict()
        d.pop("workers")
        d.pop("outputs")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _num(problems, where, v, *, integer=False, positive=False, nonneg=False):
    ok_type = isinstance(v, int) if integer else isinstance(v, (int, float))
    if isinstance(v, bool) or not ok_type or (not integer and not math.isfinite(v)):
        problems.append(f"{where}: expected {'an integer' if integer else 'a number'}, got {v!r}")
        return None
    if positive and v <= 0:
        problems.append(f"{where}: must be positive, got {v!r}")
        return None
    if nonneg and v < 0:
        problems.append(f"{where}: must be non-negative, got {v!r}")
        return None
    return int(v) if integer else float(v)


def _unknown(problems, where, d, allowed):
    for k in sorted(set(d) - allowed, key=str):
        problems.append(f"{where}: unknown key {k!r}")


def _section(problems, raw, key):
    v = raw.get(key, {})
    if v is None:
        return {}
    if not isinstance(v, dict):
        problems.append(f"{key}: expected a mapping")
        return {}
    return v


def _parse_array(problems, i, spec) -> ArraySpec | None:
    where = f"arrays[{i}]"
    if not isinstance(spec, dict):
        problems.append(f"{where}: expected a mapping")
        return None
    _unknown(problems, where, spec, _ARRAY_KEYS)
    if "positions" in spec:
        pos = spec["positions"]
        if not isinstance(pos, list) or not pos or any(isinstance(p, bool) or not isinstance(p, int) for p in pos):
            problems.append(f"{where}.positions: expected a non-empty list of integers")
            return None
        out = ArraySpec("custom", {}, list(pos))
    else:
        if "family" not in spec:
            problems.append(f"{where}: needs 'family' or 'positions'")
            return None
        try:
            fam = resolve_family(spec["family"])
        except ValueError:
            problems.append(f"{where}.family: unknown family {spec['family']!r}")
            return None
        params = spec.get("params") or {}
        if not isinstance(params, dict) or any(isinstance(v, bool) or not isinstance(v, int) for v in params.values()):
            problems.append(f"{where}.params: expected a mapping of integers")
            return None
        out = ArraySpec(fam.value, dict(params))
    try:
        out.build()
    except SparseDoaError as exc:
        problems.append(f"{where}: {exc.name}: {exc}")
        return None
    return out


def parse_config(raw: dict, *, need_snr_list: bool = False) -> ExperimentConfig:
    """Validate a raw mapping and build an :class:`ExperimentConfig`.

    Every problem found is collected before raising a single
    :class:`ConfigError`.
    """
    problems: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    raw = copy.deepcopy(raw)
    _unknown(problems, "config", raw, _TOP_KEYS)

    arrays = []
    raw_arrays = raw.get("arrays")
    if not isinstance(raw_arrays, list) or not raw_arrays:
        problems.append("arrays: expected a non-empty list")
    else:
        for i, spec in enumerate(raw_arrays):
            a = _parse_array(problems, i, spec)
            if a is not None:
                arrays.append(a)

    scen = _section(problems, raw, "scenario")
    _unknown(problems, "scenario", scen, _SCENARIO_KEYS)
    angles = None
    if "angles_deg" in scen and "n_sources" in scen:
        problems.append("scenario: give angles_deg or n_sources, not both")
    elif "angles_deg" in scen:
        v = scen["angles_deg"]
        if not isinstance(v, list) or not v:
            problems.append("scenario.angles_deg: expected a non-empty list")
        else:
            vals = [_num(problems, f"scenario.angles_deg[{i}]", a) for i, a in enumerate(v)]
            if None not in vals:
                angles = sorted(vals)
                if any(not -90 < a < 90 for a in angles):
                    problems.append("scenario.angles_deg: angles must lie in (-90, 90)")
                if len(set(angles)) != len(angles):
                    problems.append("scenario.angles_deg: duplicate angles")
    else:
        n = _num(problems, "scenario.n_sources", scen.get("n_sources", 20), integer=True, positive=True)
        if n is not None:
            angles = [float(a) for a in np.linspace(-60.0, 60.0, n)] if n > 1 else [0.0]

    powers = None
    if angles is not None:
        if "powers" in scen:
            v = scen["powers"]
            if not isinstance(v, list) or len(v) != len(angles):
                problems.append("scenario.powers: expected one power per source")
            else:
                vals = [_num(problems, f"scenario.powers[{i}]", p, positive=True) for i, p in enumerate(v)]
                if None not in vals:
                    powers = vals
        else:
            powers = [1.0] * len(angles)

    snapshots = _num(problems, "scenario.snapshots", scen.get("snapshots", 512), integer=True, positive=True)

    snr = noise = None
    if "snr_db" in scen and "noise_power" in scen:
        problems.append("scenario: give snr_db or noise_power, not both")
    elif "noise_power" in scen:
        noise = _num(problems, "scenario.noise_power", scen["noise_power"], nonneg=True)
        if need_snr_list:
            problems.append("scenario.snr_db: an SNR list is required for rmse runs")
    else:
        v = scen.get("snr_db", [-5, 5, 15, 25] if need_snr_list else 0)
        v = v if isinstance(v, list) else [v]
        if not v:
            problems.append("scenario.snr_db: expected at least one value")
        else:
            vals = [_num(problems, f"scenario.snr_db[{i}]", s) for i, s in enumerate(v)]
            if None not in vals:
                snr = vals

    g = _section(problems, raw, "grid")
    _unknown(problems, "grid", g, _GRID_KEYS)
    grid = None
    gv = {k: _num(problems, f"grid.{k}", g[k]) for k in _GRID_KEYS if k in g}
    if None not in gv.values():
        try:
            grid = AngularGrid(**gv)
            if grid.stop_deg <= grid.start_deg:
                problems.append("grid: stop_deg must exceed start_deg")
        except SparseDoaError as exc:
            problems.append(f"grid: {exc}")

    epsilon = raw.get("epsilon")
    if epsilon is not None:
        epsilon = _num(problems, "epsilon", epsilon, positive=True)
    eps_scale = _num(problems, "eps_scale", raw.get("eps_scale", DEFAULT_EPS_SCALE), positive=True)
    runs = _num(problems, "runs", raw.get("runs", 50), integer=True, positive=True)
    seed = _num(problems, "seed", raw.get("seed", 0), integer=True, nonneg=True)
    min_sep = _num(problems, "min_separation_deg", raw.get("min_separation_deg", 1.0), nonneg=True)
    workers = _num(problems, "workers", raw.get("workers", 1), integer=True, positive=True)

    solver = _section(problems, raw, "solver")
    _unknown(problems, "solver", solver, _SOLVER_KEYS)
    if "method" in solver and solver["method"] not in ("homotopy", "admm"):
        problems.append(f"solver.method: expected 'homotopy' or 'admm', got {solver['method']!r}")
    if "nonnegative" in solver and not isinstance(solver["nonnegative"], bool):
        problems.append("solver.nonnegative: expected true or false")
    if "max_iters" in solver:
        _num(problems, "solver.max_iters", solver["max_iters"], integer=True, positive=True)
    for k in ("tol_primal", "tol_dual"):
        if k in solver:
            _num(problems, f"solver.{k}", solver[k], positive=True)

    outputs = _section(problems, raw, "outputs")
    _unknown(problems, "outputs", outputs, _OUTPUT_KEYS)
    out_dir = outputs.get("dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        problems.append("outputs.dir: expected a non-empty string")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        arrays=arrays,
        angles_deg=angles,
        powers=powers,
        snapshots=snapshots,
        snr_db=snr,
        noise_power=noise,
        grid=grid,
        epsilon=epsilon,
        eps_scale=eps_scale,
        runs=runs,
        seed=seed,
        min_separation_deg=min_sep,
        solver=dict(solver),
        workers=workers,
        output_dir=out_dir,
    )


def load_config(path, *, need_snr_list: bool = False) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: invalid YAML: {exc}"]) from None
    return parse_config(raw if raw is not None else {}, need_snr_list=need_snr_list)
