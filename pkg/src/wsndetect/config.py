"""Experiment configuration: YAML loading, strict validation and presets."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError
from .geometry import (Deployment, DetectionPartition, ModelKind, RangeParams, SensingModel,
                       build_partition, compute_ranges, omega0_for_influence_range,
                       regular_polygon)
from .metrics import DEFAULT_DELTA
from .montecarlo import (DEFAULT_DELAY_HORIZON, DEFAULT_HORIZON, DEFAULT_RUNS, PLACEMENTS,
                         TableRow, normalize_procedure)

# Hexagonal ROI of circumradius 1 with sensor 4 at the centre and the other
# six on the vertices. With unit detection radius every vertex disk passes
# through the centre, which leaves exactly twelve covered subregions.
_RING_ANGLES = {1: 120.0, 2: 60.0, 5: 0.0, 7: -60.0, 6: -120.0, 3: 180.0}
CANONICAL_REGION_ORDER = (
    (1, 3, 4, 6), (1, 3, 4), (1, 2, 3, 4), (1, 2, 4), (1, 2, 4, 5), (2, 4, 5),
    (2, 4, 5, 7), (4, 5, 7), (4, 5, 6, 7), (4, 6, 7), (3, 4, 6, 7), (3, 4, 6),
)


def canonical_sensors() -> np.ndarray:
    pts = np.zeros((7, 2))
    for s, deg in _RING_ANGLES.items():
        a = math.radians(deg)
        pts[s - 1] = (math.cos(a), math.sin(a))
    return pts


def canonical_roi() -> np.ndarray:
    return regular_polygon(6, 1.0)


# Operating points (procedure, threshold, target ARL2FA) of the two
# published experiments.
BOOLEAN_ROWS = (
    ("MAX", 2.71, 1e2), ("MAX", 4.93, 1e3), ("MAX", 7.24, 1e4), ("MAX", 9.52, 1e5),
    ("HALL", 1.67, 1e2), ("HALL", 2.69, 1e3), ("HALL", 3.66, 1e4), ("HALL", 4.52, 1e5),
    ("ALL", 2.16, 1e3), ("ALL", 2.96, 1e4), ("ALL", 3.71, 1e5),
    ("CENTRALIZED", 2.75, 1e2), ("CENTRALIZED", 4.50, 1e3), ("CENTRALIZED", 6.32, 1e4),
    ("CENTRALIZED", 8.32, 1e5),
)
PATHLOSS_ROWS = (
    ("MAX", 2.71, 1e2), ("MAX", 4.93, 1e3), ("MAX", 7.23, 1e4), ("MAX", 9.52, 1e5),
    ("HALL", 1.67, 1e2), ("HALL", 2.69, 1e3), ("HALL", 3.66, 1e4), ("HALL", 4.52, 1e5),
    ("ALL", 1.33, 1e2), ("ALL", 2.16, 1e3), ("ALL", 2.96, 1e4), ("ALL", 3.71, 1e5),
)

_BOOLEAN_DEPLOYMENT = {"preset": "hexagon7", "model": "boolean", "r_d": 1.0, "h_e": 1.0,
                       "sigma": 1.0, "mu1": 1.0, "grid_resolution": 0.01}
_PATHLOSS_DEPLOYMENT = {"preset": "hexagon7", "model": "powerlaw", "eta": 2.0, "h_e": 1.0,
                        "sigma": 1.0, "mu1": 1.0, "r_i": 1.5, "grid_resolution": 0.01}


def _rows(rows):
    return [{"rule": p, "c": c, "target": t} for p, c, t in rows]


PRESETS = {
    "boolean-table": {
        "deployment": _BOOLEAN_DEPLOYMENT,
        "rows": _rows(BOOLEAN_ROWS),
        "montecarlo": {"placement": "reference"},
    },
    "pathloss-table": {
        "deployment": _PATHLOSS_DEPLOYMENT,
        "rows": _rows(PATHLOSS_ROWS),
        "montecarlo": {"placement": "influence_boundary"},
    },
}

_TOP_KEYS = {"preset", "deployment", "rules", "rows", "thresholds", "targets", "montecarlo",
             "seed", "output", "delta", "trace"}
_DEPLOYMENT_KEYS = {"preset", "name", "sensors", "roi", "model", "r_d", "eta", "h_e", "sigma",
                    "mu1", "omega0_lower", "r_i", "grid_resolution", "region_order"}
_MC_KEYS = {"runs", "horizon", "delay_horizon", "placement", "pfi_placements", "share_paths",
            "rng", "workers", "calibrate", "calibration_tolerance"}
_TARGET_KEYS = {"gamma", "alpha"}
_TRACE_KEYS = {"runs", "region", "placement", "horizon"}
RNG_ALGORITHM = "SFC64"


@dataclass
class ExperimentConfig:
    deployment: dict
    rules: list
    rows: list
    targets: dict | None
    runs: int = DEFAULT_RUNS
    horizon: int = DEFAULT_HORIZON
    delay_horizon: int = DEFAULT_DELAY_HORIZON
    placement: str = "reference"
    pfi_placements: list = field(default_factory=lambda: ["reference", "worst_case"])
    share_paths: bool = True
    calibrate: bool = False
    calibration_tolerance: float = 0.05
    workers: int = 1
    seed: int = 0
    output: str = "out"
    delta: float = DEFAULT_DELTA
    trace: dict = field(default_factory=lambda: {"runs": 100, "region": None,
                                                 "placement": "reference", "horizon": 100_000})

    def table_rows(self) -> list:
        return [TableRow(r["rule"], r["c"], r["target"]) for r in self.rows]

    def thresholds(self) -> list:
        return sorted({r["c"] for r in self.rows})

    def resolved(self) -> dict:
        """Fully expanded mapping that reloads to an identical configuration."""
        return {
            "deployment": copy.deepcopy(self.deployment),
            "rules": list(self.rules),
            "rows": [dict(r) for r in self.rows],
            **({"targets": dict(self.targets)} if self.targets else {}),
            "montecarlo": {
                "runs": self.runs, "horizon": self.horizon, "delay_horizon": self.delay_horizon,
                "placement": self.placement, "pfi_placements": list(self.pfi_placements),
                "share_paths": self.share_paths, "rng": RNG_ALGORITHM, "workers": self.workers,
                "calibrate": self.calibrate, "calibration_tolerance": self.calibration_tolerance,
            },
            "seed": self.seed,
            "output": self.output,
            "delta": self.delta,
            "trace": dict(self.trace),
        }


def _unknown(section: str, given: dict, allowed: set) -> None:
    extra = sorted(set(given) - allowed)
    if extra:
        where = f"{section}." if section else ""
        raise ConfigError(f"unknown key {where}{extra[0]!r}; allowed: {', '.join(sorted(allowed))}")


def _mapping(value, where: str) -> dict:
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping")
    return value


def _number(section: dict, key: str, where: str, default=None, positive=True):
    value = section.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number (got {value!r})")
    if positive and not value > 0:
        raise ConfigError(f"{where}.{key} must be positive (got {value!r})")
    return float(value)


def _integer(section: dict, key: str, where: str, default, minimum=1):
    value = section.get(key, default)
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer (got {value!r})")
    if value < minimum:
        raise ConfigError(f"{where}.{key} must be at least {minimum} (got {value})")
    return value


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _points(value, where: str) -> list:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must be a list of [x, y] pairs") from None
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError(f"{where} must be a list of [x, y] pairs")
    return arr.tolist()


def _validate_deployment(raw: dict) -> dict:
    d = _mapping(raw, "deployment")
    _unknown("deployment", d, _DEPLOYMENT_KEYS)
    out = {}
    preset = d.get("preset")
    if preset is not None and preset != "hexagon7":
        raise ConfigError(f"deployment.preset {preset!r} unknown; the only preset is 'hexagon7'")
    if preset is None:
        if "sensors" not in d or "roi" not in d:
            raise ConfigError("deployment needs either preset: hexagon7 or both sensors and roi")
        out["sensors"] = _points(d["sensors"], "deployment.sensors")
        out["roi"] = _points(d["roi"], "deployment.roi")
    else:
        out["preset"] = preset
        for key in ("sensors", "roi"):
            if key in d:
                raise ConfigError(f"deployment.{key} cannot be combined with a preset")
    out["name"] = str(d.get("name", preset or "custom"))
    model = str(d.get("model", "boolean")).lower()
    if model not in (m.value for m in ModelKind):
        raise ConfigError(f"deployment.model must be 'boolean' or 'powerlaw' (got {model!r})")
    out["model"] = model
    out["h_e"] = _number(d, "h_e", "deployment", 1.0)
    out["sigma"] = _number(d, "sigma", "deployment", 1.0)
    out["mu1"] = _number(d, "mu1", "deployment", out["h_e"])
    out["grid_resolution"] = _number(d, "grid_resolution", "deployment", None)
    if model == "boolean":
        out["r_d"] = _number(d, "r_d", "deployment", 1.0)
        for key in ("eta", "r_i"):
            if key in d:
                raise ConfigError(f"deployment.{key} only applies to the powerlaw model")
        out["omega0_lower"] = _number(d, "omega0_lower", "deployment", 0.5)
    else:
        out["eta"] = _number(d, "eta", "deployment", 2.0)
        if "r_d" in d:
            raise ConfigError("deployment.r_d is derived from h_e and mu1 for the powerlaw model")
        if ("r_i" in d) == ("omega0_lower" in d):
            raise ConfigError("powerlaw deployment needs exactly one of r_i or omega0_lower")
        if "r_i" in d:
            out["r_i"] = _number(d, "r_i", "deployment")
        else:
            out["omega0_lower"] = _number(d, "omega0_lower", "deployment")
    if "region_order" in d:
        order = d["region_order"]
        if not isinstance(order, list) or not all(isinstance(g, list) for g in order):
            raise ConfigError("deployment.region_order must be a list of sensor lists")
        out["region_order"] = [[int(s) for s in g] for g in order]
    elif preset == "hexagon7":
        out["region_order"] = [list(g) for g in CANONICAL_REGION_ORDER]
    return out


def _validate_rows(raw, where="rows") -> list:
    if not isinstance(raw, list):
        raise ConfigError(f"{where} must be a list")
    rows = []
    for i, r in enumerate(raw):
        r = _mapping(r, f"{where}[{i}]")
        _unknown(f"{where}[{i}]", r, {"rule", "c", "target"})
        if "rule" not in r or "c" not in r:
            raise ConfigError(f"{where}[{i}] needs rule and c")
        target = _number(r, "target", f"{where}[{i}]", math.nan, positive=False)
        rows.append({"rule": normalize_procedure(r["rule"]), "c": _number(r, "c", f"{where}[{i}]"),
                     "target": target})
    return rows


def from_mapping(raw: dict) -> ExperimentConfig:
    raw = _mapping(raw, "config")
    _unknown("", raw, _TOP_KEYS)
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigError(f"preset {name!r} unknown; available: {', '.join(sorted(PRESETS))}")
        base = PRESETS[name]
        rest = {k: v for k, v in raw.items() if k != "preset"}
        if "deployment" in rest and "preset" not in rest["deployment"] and \
                ("sensors" in rest["deployment"] or "roi" in rest["deployment"]):
            base = {k: v for k, v in base.items() if k != "deployment"}
        if any(k in rest for k in ("rows", "thresholds", "targets")):
            base = {k: v for k, v in base.items() if k != "rows"}
        raw = _merge(base, rest)
    deployment = _validate_deployment(raw.get("deployment"))

    given = [k for k in ("rows", "thresholds", "targets") if k in raw]
    if len(given) > 1:
        raise ConfigError(f"give only one of rows, thresholds or targets (got {', '.join(given)})")
    if "rules" in raw:
        if not isinstance(raw["rules"], list):
            raise ConfigError("rules must be a list")
        rules = [normalize_procedure(r) for r in raw["rules"]]
    else:
        rules = None
    targets = None
    if "rows" in raw:
        rows = _validate_rows(raw["rows"])
        if rules is not None:
            rows = [r for r in rows if r["rule"] in rules]
        else:
            rules = list(dict.fromkeys(r["rule"] for r in rows))
    elif "thresholds" in raw:
        th = _mapping(raw["thresholds"], "thresholds")
        rows = []
        for rule, cs in th.items():
            if not isinstance(cs, list):
                cs = [cs]
            rows += _validate_rows([{"rule": rule, "c": c} for c in cs], f"thresholds.{rule}")
        if rules is not None:
            rows = [r for r in rows if r["rule"] in rules]
        else:
            rules = list(dict.fromkeys(r["rule"] for r in rows))
    elif "targets" in raw:
        t = _mapping(raw["targets"], "targets")
        _unknown("targets", t, _TARGET_KEYS)
        gammas = t.get("gamma")
        if not isinstance(gammas, list):
            gammas = [gammas]
        for g in gammas:
            if isinstance(g, bool) or not isinstance(g, (int, float)) or not g > 1:
                raise ConfigError(f"targets.gamma entries must exceed 1 (got {g!r})")
        alpha = _number(t, "alpha", "targets", 0.05)
        if not alpha <= 1:
            raise ConfigError("targets.alpha must lie in (0, 1]")
        targets = {"gamma": [float(g) for g in gammas], "alpha": alpha}
        rows = []
    else:
        raise ConfigError("config needs rows, thresholds or targets")
    if not rules:
        raise ConfigError("rule list is empty")

    mc = _mapping(raw.get("montecarlo"), "montecarlo")
    _unknown("montecarlo", mc, _MC_KEYS)
    rng = mc.get("rng", RNG_ALGORITHM)
    if rng != RNG_ALGORITHM:
        raise ConfigError(f"montecarlo.rng must be {RNG_ALGORITHM!r} (got {rng!r})")
    placement = mc.get("placement", "reference")
    if placement not in PLACEMENTS:
        raise ConfigError(f"montecarlo.placement must be one of {', '.join(PLACEMENTS)}")
    pfi_placements = mc.get("pfi_placements", ["reference", "worst_case"])
    if not isinstance(pfi_placements, list) or any(p not in PLACEMENTS for p in pfi_placements):
        raise ConfigError(f"montecarlo.pfi_placements entries must be among {', '.join(PLACEMENTS)}")
    for key in ("share_paths", "calibrate"):
        if key in mc and not isinstance(mc[key], bool):
            raise ConfigError(f"montecarlo.{key} must be true or false")
    trace = _mapping(raw.get("trace"), "trace")
    _unknown("trace", trace, _TRACE_KEYS)
    region = trace.get("region")
    if region is not None and (isinstance(region, bool) or not isinstance(region, int) or region < 1):
        raise ConfigError("trace.region must be a positive region id or null")
    tplace = trace.get("placement", "reference")
    if tplace not in PLACEMENTS:
        raise ConfigError(f"trace.placement must be one of {', '.join(PLACEMENTS)}")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**63:
        raise ConfigError("seed must be a non-negative 64-bit integer")
    return ExperimentConfig(
        deployment=deployment,
        rules=rules,
        rows=rows,
        targets=targets,
        runs=_integer(mc, "runs", "montecarlo", DEFAULT_RUNS, 100),
        horizon=_integer(mc, "horizon", "montecarlo", DEFAULT_HORIZON),
        delay_horizon=_integer(mc, "delay_horizon", "montecarlo", DEFAULT_DELAY_HORIZON),
        placement=placement,
        pfi_placements=list(pfi_placements),
        share_paths=mc.get("share_paths", True),
        calibrate=mc.get("calibrate", False),
        calibration_tolerance=_number(mc, "calibration_tolerance", "montecarlo", 0.05),
        workers=_integer(mc, "workers", "montecarlo", 1),
        seed=seed,
        output=str(raw.get("output", "out")),
        delta=_number(raw, "delta", "config", DEFAULT_DELTA),
        trace={"runs": _integer(trace, "runs", "trace", 100), "region": region,
               "placement": tplace, "horizon": _integer(trace, "horizon", "trace", 100_000)},
    )


def load(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} not found")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return from_mapping(raw if raw is not None else {})


def dump(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(cfg.resolved(), sort_keys=False, default_flow_style=None))


def build_deployment(layout: dict) -> Deployment:
    if layout["model"] == "boolean":
        model = SensingModel.boolean(layout["r_d"])
    else:
        model = SensingModel.power_law(layout["eta"])
    if layout.get("preset") == "hexagon7":
        sensors, roi = canonical_sensors(), canonical_roi()
    else:
        sensors, roi = np.asarray(layout["sensors"]), np.asarray(layout["roi"])
    return Deployment(sensors, roi, layout["h_e"], layout["sigma"], model, layout.get("name", "custom"))


def build_ranges(dep: Deployment, layout: dict) -> RangeParams:
    if "r_i" in layout:
        r_d = (dep.h_e / layout["mu1"]) ** (1.0 / dep.model.eta)
        omega = omega0_for_influence_range(dep.model, r_d, layout["r_i"])
    else:
        omega = layout["omega0_lower"]
    return compute_ranges(dep, layout["mu1"], omega)


def build(layout: dict) -> DetectionPartition:
    """Deployment layout to detection partition."""
    dep = build_deployment(layout)
    ranges = build_ranges(dep, layout)
    return build_partition(dep, ranges, layout.get("grid_resolution"), layout.get("region_order"))


def hexagon7_partition(model: str = "boolean", grid_resolution: float = 0.01) -> DetectionPartition:
    """The seven-sensor hexagon under either sensing model, regions in the tabulated order."""
    base = _BOOLEAN_DEPLOYMENT if model == "boolean" else _PATHLOSS_DEPLOYMENT
    layout = _validate_deployment({**base, "grid_resolution": grid_resolution})
    return build(layout)
