"""Run configuration: parsing, validation, and resolution.

Accepts either flat dotted key=value text (diff-friendly) or a nested
JSON document; both resolve to the same RunConfig.  Cross-field
constraints are reported by naming the violated condition.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .params import ModelParams, ParameterError, WeightParams


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


_INITIAL_KINDS = ("equilibrium", "bump", "shifted-maxwellian")
_METHODS = ("picard", "h-form")
_LAYOUTS = ("homogeneous", "slab-1d")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    weights: WeightParams
    grid_radius: float = 6.0
    grid_n: int = 12
    layout: str = "homogeneous"
    n_x: int = 16
    period: float = 1.0
    initial_kind: str = "bump"
    amplitude: float = 0.1
    mode: int = 1
    temperature: float = 1.0
    dt: float = 0.1
    t_end: float = 4.0
    method: str = "h-form"
    conservation_project: bool = True
    inner_iterations: int = 1
    fit_window: float = 0.2
    p: float = 2.5
    seed: int = 0
    sweep_gammas: tuple = ()
    sweep_varthetas: tuple = ()

    def __post_init__(self):
        if self.layout not in _LAYOUTS:
            raise ConfigError(f"run.layout must be one of {_LAYOUTS}")
        if self.initial_kind not in _INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {_INITIAL_KINDS}")
        if self.method not in _METHODS:
            raise ConfigError(f"run.method must be one of {_METHODS}")
        if self.dt <= 0 or self.t_end < 0:
            raise ConfigError("run.dt must be > 0 and run.t_end >= 0")
        if not 0.0 <= self.fit_window < 1.0:
            raise ConfigError("run.fit_window must be in [0, 1)")
        validate_cross(self.model, self.weights, self.p)


def validate_cross(model: ModelParams, weights: WeightParams, p: float):
    """Admissibility conditions tying the potential, weight, and
    integrability exponents together; messages name the violated condition."""
    if not weights.vartheta < -2.0 / model.gamma:
        raise ConfigError(
            f"vartheta = {weights.vartheta} with gamma = {model.gamma} "
            "violates the condition \"vartheta < -2/gamma\"")
    if not weights.q < weights.s0:
        raise ConfigError(
            f"q = {weights.q}, s0 = {weights.s0} violates the condition "
            "\"q < s0\"")
    if not (p > 1.0 and p * model.gamma > -3.0):
        raise ConfigError(
            f"p = {p} with gamma = {model.gamma} violates the condition "
            "\"p > 1 and p*gamma > -3\"")


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in text:
        return tuple(_parse_scalar(t) for t in text.split(",") if t.strip())
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_flat(text: str) -> dict:
    """Flat dotted key=value lines into a nested section dict."""
    sections: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got "
                              f"{raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} must be dotted "
                              "(section.field)")
        section, name = key.split(".", 1)
        sections.setdefault(section, {})[name] = _parse_scalar(value)
    return sections


def load_config(path) -> "RunConfig":
    """Read a config file (flat key=value or JSON) into a RunConfig."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            sections = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}")
    else:
        sections = parse_flat(text)
    return config_from_sections(sections)


def _pick(section: dict, defaults: dict, context: str) -> dict:
    unknown = set(section) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown {context} field(s): "
                          f"{', '.join(sorted(unknown))}")
    out = dict(defaults)
    out.update(section)
    return out


def config_from_sections(sections: dict) -> RunConfig:
    """Assemble and validate a RunConfig from a nested section dict."""
    if not isinstance(sections, dict):
        raise ConfigError("config root must be a mapping of sections")
    known = {"model", "weights", "grid", "initial", "run", "sweep"}
    unknown = set(sections) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    model_kw = _pick(sections.get("model", {}),
                     {"gamma": -1.0, "eps_cutoff": 0.1}, "model")
    weights_kw = _pick(sections.get("weights", {}),
                       {"q": 0.5, "vartheta": 1.0, "beta": 3.5, "s0": None},
                       "weights")
    grid_kw = _pick(sections.get("grid", {}),
                    {"radius": 6.0, "n_per_dim": 12}, "grid")
    init_kw = _pick(sections.get("initial", {}),
                    {"kind": "bump", "amplitude": 0.1, "mode": 1,
                     "temperature": 1.0}, "initial")
    run_kw = _pick(sections.get("run", {}),
                   {"layout": "homogeneous", "n_x": 16, "period": 1.0,
                    "dt": 0.1, "t_end": 4.0, "method": "h-form",
                    "conservation_project": True, "inner_iterations": 1,
                    "fit_window": 0.2, "p": 2.5, "seed": 0}, "run")
    sweep_kw = _pick(sections.get("sweep", {}),
                     {"gammas": (), "varthetas": ()}, "sweep")

    def as_tuple(v):
        if isinstance(v, (list, tuple)):
            return tuple(float(x) for x in v)
        return (float(v),) if v != () else ()

    try:
        model = ModelParams(**model_kw)
        weights = WeightParams(**weights_kw)
    except ParameterError as exc:
        raise ConfigError(str(exc))
    return RunConfig(
        model=model, weights=weights,
        grid_radius=float(grid_kw["radius"]),
        grid_n=int(grid_kw["n_per_dim"]),
        layout=run_kw["layout"], n_x=int(run_kw["n_x"]),
        period=float(run_kw["period"]),
        initial_kind=init_kw["kind"],
        amplitude=float(init_kw["amplitude"]), mode=int(init_kw["mode"]),
        temperature=float(init_kw["temperature"]),
        dt=float(run_kw["dt"]), t_end=float(run_kw["t_end"]),
        method=run_kw["method"],
        conservation_project=bool(run_kw["conservation_project"]),
        inner_iterations=int(run_kw["inner_iterations"]),
        fit_window=float(run_kw["fit_window"]), p=float(run_kw["p"]),
        seed=int(run_kw["seed"]),
        sweep_gammas=as_tuple(sweep_kw["gammas"]),
        sweep_varthetas=as_tuple(sweep_kw["varthetas"]))


def resolved_dict(cfg: RunConfig) -> dict:
    """Fully resolved configuration for embedding in reports."""
    out = asdict(cfg)
    out["model"] = asdict(cfg.model)
    out["weights"] = asdict(cfg.weights)
    return out
