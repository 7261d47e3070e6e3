"""
Experiment configuration: one YAML file per experiment, parsed into pydantic
models and checked against the index hypotheses of the targeted estimate.
"""
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

import config
from hypotheses import (convolution_endpoint_indices, decay_indices, gronwall_indices, growth_indices,
                        holder_lorentz_indices, mild_solution_indices, require, trilinear_indices,
                        weak_strong_indices, young_lorentz_indices)
from norm_suite import BesovSpec

logger = logging.getLogger("rich")


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dim: int = 2
    n: int = 64


class BandsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    j_min: Optional[int] = None
    j_max: Optional[int] = None


class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dt: float = config.SOLVER_DEFAULTS['dt']
    T: float = config.SOLVER_DEFAULTS['T']
    n_times: int = config.SOLVER_DEFAULTS['n_times']
    q: float = config.SOLVER_DEFAULTS['q']
    tol: float = config.SOLVER_DEFAULTS['tol']
    max_iter: int = config.SOLVER_DEFAULTS['max_iter']
    sample_every: int = config.SOLVER_DEFAULTS['sample_every']
    p: float = 2.0
    r: float = 2.0

    def data_spec(self, dim: int) -> BesovSpec:
        """Critical data space Ḃ^{n/p-1}_{p,r}."""
        return BesovSpec(s=dim / self.p - 1, p=self.p, r=self.r)


class ExperimentConfig(BaseModel):
    """Experiment name plus free-form flat parameters."""
    model_config = ConfigDict(extra="allow")

    name: str = "solve"

    def get(self, key: str, default: Any = None) -> Any:
        return (self.model_extra or {}).get(key, default)


class RunConfig(BaseModel):
    grid: GridConfig = Field(default_factory=GridConfig)
    bands: BandsConfig = Field(default_factory=BandsConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)
    calibration: Dict[str, float] = Field(default_factory=dict)
    seed: int = 0
    output_dir: str = config.OUTPUT_DIR

    def preset(self, name: str) -> Optional[float]:
        return self.calibration.get(name)


def validate_hypotheses(cfg: RunConfig) -> None:
    """Raise HypothesisError if the experiment's indices break its estimate."""
    n = cfg.grid.dim
    exp = cfg.experiment
    s = cfg.solver
    name = exp.name
    if name in ("picard", "smalldata", "local"):
        require("mild_solution", mild_solution_indices(n, s.p, s.r, s.q))
    if name == "smalldata":
        for alpha in (0, 1):
            require("weighted_decay", decay_indices(n, float(exp.get("decay_p", n + 1.0)), alpha))
    elif name == "trilinear":
        require("trilinear_integral_bound", trilinear_indices(n, float(exp.get("r", 2.0)), float(exp.get("sigma", 4.0))))
    elif name == "weakstrong":
        require("weak_strong", weak_strong_indices(n, float(exp.get("p", 2.0)), float(exp.get("r", 2.0))))
    elif name == "calderon":
        require("gronwall_energy", gronwall_indices(n, float(exp.get("p_bar", 4.0)), float(exp.get("r_bar", 2.0))))
    elif name == "growth":
        require("growth", growth_indices(n, float(exp.get("p", 4.0)), float(exp.get("r", 2.0))))
    elif name == "lorentz-check":
        p1, p2 = float(exp.get("p1", 3.0)), float(exp.get("p2", 3.0))
        q1, q2 = float(exp.get("q1", 2.0)), float(exp.get("q2", 2.0))
        require("lorentz_holder", holder_lorentz_indices(p1, q1, p2, q2, 1 / (1 / q1 + 1 / q2)))
        yp1, yp2 = float(exp.get("young_p1", 1.5)), float(exp.get("young_p2", 1.5))
        yq1, yq2 = float(exp.get("young_q1", 2.0)), float(exp.get("young_q2", 2.0))
        require("lorentz_young", young_lorentz_indices(yp1, yq1, yp2, yq2, 1 / (1 / yq1 + 1 / yq2)))
        require("convolution_endpoint", convolution_endpoint_indices(yp1, yp1, yp1 / (yp1 - 1)))
        require("convolution_endpoint", convolution_endpoint_indices(3.0, 3.0, 1.5))


def resolve_config_path(path_or_name) -> Path:
    """A bare name resolves to configs/<name>.yaml."""
    path = Path(path_or_name)
    if path.suffix in (".yaml", ".yml") or path.exists():
        return path
    return Path(config.CONFIGS_DIR) / f"{path_or_name}.yaml"


def config_from_dict(data: Optional[Dict]) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data or {})
    except ValidationError as e:
        raise ValueError(f"invalid configuration: {e}") from e
    validate_hypotheses(cfg)
    return cfg


def load_config(path) -> RunConfig:
    """Parse and validate a YAML config; missing keys take defaults."""
    path = resolve_config_path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ValueError(f"cannot parse {path}: {e}") from e
    if data is not None and not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    logger.debug(f"loaded config {path}")
    return config_from_dict(data)


def dump_config(cfg: RunConfig, path=None) -> str:
    """YAML text of ``cfg``; also written to ``path`` when given."""
    text = yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True)
    if path is not None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    return text


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Return a re-validated copy with CLI overrides applied (None means unchanged)."""
    data = cfg.model_dump(mode="json")
    routes = {"n": ("grid", "n"), "dim": ("grid", "dim"), "T": ("solver", "T"), "dt": ("solver", "dt"),
              "norm": ("experiment", "norm")}
    for key, value in overrides.items():
        if value is None:
            continue
        if key in routes:
            section, field = routes[key]
            data[section][field] = value
        elif key == "seed":
            data["seed"] = value
        elif key == "out":
            data["output_dir"] = str(value)
        else:
            raise ValueError(f"unknown override {key!r}")
    return config_from_dict(data)
