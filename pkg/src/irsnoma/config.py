"""Scenario configuration: defaults, validation and YAML round-tripping."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Tuple

import yaml

from .channel import ClusterGeometry
from .errors import ConfigurationError

__all__ = ["ScenarioConfig", "SCHEMES", "parse_config", "load_config_text",
           "config_from_dict", "config_to_dict", "emit_config"]

SCHEMES = ("irs_noma", "dp_noma", "sp_noma", "oma")


def _default_clusters() -> Tuple[ClusterGeometry, ...]:
    # Focus cluster first. The other azimuths keep every cluster's null
    # space wide enough for Mbar = 8 with M = 90.
    return (
        ClusterGeometry(azimuth_deg=30.0),
        ClusterGeometry(azimuth_deg=-45.0),
        ClusterGeometry(azimuth_deg=-80.0),
        ClusterGeometry(azimuth_deg=80.0),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    """Every scalar of a simulation run.

    Defaults form the default profile: ``M=90`` BS antennas, ``K=4``
    clusters, ``G=4`` groups of ``U=4`` users, ``Mbar=8`` streams and
    ``N=8`` receive antennas (``G = Mbar/2`` and ``N >= Mbar`` are enforced).
    ``alpha_sq`` holds squared power coefficients, weakest user first.
    """

    M: int = 90
    N: int = 8
    L: int = 100
    K: int = 4
    G: int = 4
    U: int = 4
    Mbar: int = 8
    chi_bs_u: float = 0.5
    chi_bs_irs: float = 0.5
    xi: float = 0.0
    alpha_sq: Tuple[float, ...] = (0.4, 0.35, 0.2, 0.05)
    snr_grid_db: Tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 2000
    seed: int = 1
    schemes: Tuple[str, ...] = SCHEMES
    clusters: Tuple[ClusterGeometry, ...] = field(default_factory=_default_clusters)
    varrho: float = 2e4
    eta: float = 2.0
    spacing: float = 0.5
    focus_cluster: int = 0
    focus_group: int = 0
    solver_tol: float = 1e-8
    solver_max_iter: int = 5000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.U < 1 or self.U % 2:
            raise ConfigurationError(f"U must be even (got U={self.U})")
        if self.M < 2 or self.M % 2:
            raise ConfigurationError(f"M must be a positive even number (got M={self.M})")
        if self.N < 2 or self.N % 2:
            raise ConfigurationError(f"N must be a positive even number (got N={self.N})")
        if self.Mbar < 2 or self.Mbar % 2:
            raise ConfigurationError(f"Mbar must be a positive even number (got Mbar={self.Mbar})")
        if self.G != self.Mbar // 2:
            raise ConfigurationError(
                f"G = Mbar/2 required: each group owns one stream per polarization "
                f"(got G={self.G}, Mbar={self.Mbar})")
        if self.N < self.Mbar:
            raise ConfigurationError(
                f"N >= Mbar required for zero-forcing detection (got N={self.N}, Mbar={self.Mbar})")
        if self.L < 0:
            raise ConfigurationError("L must be >= 0")
        if self.K < 1 or len(self.clusters) != self.K:
            raise ConfigurationError(
                f"K={self.K} but {len(self.clusters)} cluster geometries were given")
        if not 0 <= self.focus_cluster < self.K:
            raise ConfigurationError("focus_cluster out of range")
        if not 0 <= self.focus_group < self.G:
            raise ConfigurationError("focus_group out of range")
        for name in ("chi_bs_u", "chi_bs_irs", "xi"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1] (got {v})")
        if len(self.alpha_sq) != self.U:
            raise ConfigurationError(f"alpha_sq needs U={self.U} entries")
        if any(a < 0 for a in self.alpha_sq):
            raise ConfigurationError("alpha_sq entries must be >= 0")
        if sum(self.alpha_sq) > 1.0 + 1e-12:
            raise ConfigurationError(f"sum(alpha_sq) must be <= 1 (got {sum(self.alpha_sq)})")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if not self.schemes:
            raise ConfigurationError("at least one scheme is required")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigurationError(f"unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
        focus = self.clusters[self.focus_cluster]
        if len(focus.user_distances_m) != self.U:
            raise ConfigurationError(
                f"focus cluster needs U={self.U} user distances, got {len(focus.user_distances_m)}")
        if len(set(focus.user_distances_m)) != self.U:
            raise ConfigurationError("user distances must be distinct")
        if self.varrho <= 0 or self.eta <= 0 or self.spacing <= 0:
            raise ConfigurationError("varrho, eta and spacing must be > 0")
        if self.solver_tol <= 0 or self.solver_max_iter < 1:
            raise ConfigurationError("solver tol must be > 0 and max_iter >= 1")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def focus_geometry(self) -> ClusterGeometry:
        return self.clusters[self.focus_cluster]


_SCALARS = {f.name: f for f in dataclasses.fields(ScenarioConfig)
            if f.name not in ("clusters", "solver_tol", "solver_max_iter")}
_CLUSTER_KEYS = {f.name for f in dataclasses.fields(ClusterGeometry)}
_TUPLE_FIELDS = ("alpha_sq", "snr_grid_db", "schemes")


def config_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for name in _SCALARS:
        v = getattr(cfg, name)
        out[name] = list(v) if name in _TUPLE_FIELDS else v
    out["solver"] = {"tol": cfg.solver_tol, "max_iter": cfg.solver_max_iter}
    out["clusters"] = [
        {**dataclasses.asdict(c), "user_distances_m": list(c.user_distances_m)}
        for c in cfg.clusters
    ]
    return out


def _coerce(name: str, value):
    kind = _SCALARS[name].type
    if name in _TUPLE_FIELDS:
        if isinstance(value, (str, int, float)):
            value = [value]
        conv = str if name == "schemes" else float
        return tuple(conv(v) for v in value)
    if kind == "int":
        if isinstance(value, bool) or float(value) != int(value):
            raise ConfigurationError(f"{name} must be an integer (got {value!r})")
        return int(value)
    if kind == "float":
        return float(value)
    return value


def config_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    """Build a config from a mapping; missing keys take the defaults.

    Unknown keys are rejected rather than ignored.
    """
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("configuration must be a mapping")
    if "config_echo" in data:  # a run manifest
        data = data["config_echo"]
    kwargs: Dict[str, Any] = {}
    for key, value in data.items():
        if key == "solver":
            if not isinstance(value, dict):
                raise ConfigurationError("'solver' must be a section")
            for sk, sv in value.items():
                if sk == "tol":
                    kwargs["solver_tol"] = float(sv)
                elif sk == "max_iter":
                    kwargs["solver_max_iter"] = int(sv)
                else:
                    raise ConfigurationError(f"unknown key 'solver.{sk}'")
        elif key == "clusters":
            clusters = []
            for i, c in enumerate(value or []):
                unknown = set(c) - _CLUSTER_KEYS
                if unknown:
                    raise ConfigurationError(
                        f"unknown key(s) in clusters[{i}]: {', '.join(sorted(unknown))}")
                c = dict(c)
                if "user_distances_m" in c:
                    c["user_distances_m"] = tuple(float(d) for d in c["user_distances_m"])
                for fk in ("azimuth_deg", "distance_bs_m", "radius_m", "irs_user_distance_m"):
                    if fk in c:
                        c[fk] = float(c[fk])
                clusters.append(ClusterGeometry(**c))
            kwargs["clusters"] = tuple(clusters)
        elif key in _SCALARS:
            kwargs[key] = _coerce(key, value)
        else:
            raise ConfigurationError(f"unknown configuration key {key!r}")
    if "clusters" in kwargs and "K" not in kwargs:
        kwargs["K"] = len(kwargs["clusters"])
    return ScenarioConfig(**kwargs)


def load_config_text(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from exc
    return config_from_dict(data)


def parse_config(path) -> ScenarioConfig:
    """Read a YAML (or JSON manifest) file into a validated config."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file not found: {path}")
    return load_config_text(path.read_text())


def emit_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def config_json(cfg: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True)
