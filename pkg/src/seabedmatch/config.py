"""
Run configuration read from YAML.

Example::

    preset: desk
    experiment: {incident_angle: 0.5235987755982988}
    solve: {points_per_wavelength_water: 15}
    match: {epsilon_tol: 0.00390625, delta_penalty: 0.02}
    grid: {kind: desk}
    fidelity: segmented
    seed: 7
    paths: {library: desk.sbml}

Every section is optional. Values override the preset; all objects are
built, and therefore validated, when the configuration is loaded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from .core import DomainSpec, ExperimentParams, preset
from .experiments import Fidelity
from .library import ParamGrid
from .matcher import MatchConfig
from .solver import SolveSpec

logger = logging.getLogger(__name__)

_SECTIONS = {"preset", "experiment", "domain", "solve", "match", "grid", "fidelity",
             "seed", "paths", "jobs"}


class ConfigError(ValueError):
    """Invalid configuration."""


def _override(obj, values: Optional[dict], section: str):
    if not values:
        return obj
    names = {f.name for f in fields(obj)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    try:
        return replace(obj, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} settings: {exc}") from exc


def _grid(spec: Optional[dict]) -> ParamGrid:
    spec = dict(spec or {})
    kind = spec.pop("kind", "desk")
    try:
        if kind == "desk":
            base = ParamGrid.desk()
        elif kind == "table2":
            base = ParamGrid.table2()
        elif kind == "custom":
            base = None
        else:
            raise ConfigError(f"unknown grid kind {kind!r}")
        ranges = {k: tuple(spec.pop(k)) for k in ("alpha", "mg1", "mg2", "mg3") if k in spec}
        extra = {k: spec.pop(k) for k in ("materials", "transitions", "object_depth",
                                          "amplitude") if k in spec}
        if spec:
            raise ConfigError(f"unknown grid keys: {sorted(spec)}")
        if base is None or ranges:
            defaults = {} if base is None else {
                "alpha": (base.alphas[0], base.alphas[-1], len(base.alphas)),
                "mg1": (base.mg1[0], base.mg1[-1], len(base.mg1)),
                "mg2": (base.mg2[0], base.mg2[-1], len(base.mg2)),
                "mg3": (base.mg3[0], base.mg3[-1], len(base.mg3))}
            if base is not None:
                extra.setdefault("transitions", base.transitions)
            grid = ParamGrid.from_ranges(**{**defaults, **ranges}, **extra)
        else:
            grid = replace(base, **extra) if extra else base
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc
    if max(grid.mg2) > 1:
        logger.warning("mg2 above 1 lets the second ripple dominate the first")
    return grid


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one command."""

    preset_name: str = "desk"
    experiment: ExperimentParams = field(default_factory=ExperimentParams)
    domain: DomainSpec = field(default_factory=DomainSpec)
    solve: SolveSpec = field(default_factory=SolveSpec)
    match: MatchConfig = field(default_factory=MatchConfig)
    grid: ParamGrid = field(default_factory=ParamGrid.desk)
    fidelity: Fidelity = Fidelity.SEGMENTED
    seed: int = 0
    jobs: Optional[int] = None
    paths: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "RunConfig":
        data = dict(data or {})
        unknown = set(data) - _SECTIONS
        if unknown:
            raise ConfigError(f"unknown sections: {sorted(unknown)}")
        name = data.get("preset", "desk")
        try:
            pr = preset(name)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        exp = _override(pr.experiment, data.get("experiment"), "experiment")
        dom = _override(pr.domain, data.get("domain"), "domain")
        solve = _override(SolveSpec(**pr.solve_overrides()), data.get("solve"), "solve")
        match = _override(MatchConfig(), data.get("match"), "match")
        try:
            fidelity = Fidelity(data.get("fidelity", Fidelity.SEGMENTED.value))
        except ValueError as exc:
            raise ConfigError(f"unknown fidelity {data.get('fidelity')!r}") from exc
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        jobs = data.get("jobs")
        if jobs is not None and (not isinstance(jobs, int) or jobs < 1):
            raise ConfigError("jobs must be a positive integer")
        paths = data.get("paths") or {}
        if not isinstance(paths, dict):
            raise ConfigError("paths must be a mapping")
        return cls(name, exp, dom, solve, match, _grid(data.get("grid")), fidelity, seed,
                   jobs, {k: str(v) for k, v in paths.items()})

    @classmethod
    def from_file(cls, path: str | Path, overrides: Optional[dict] = None) -> "RunConfig":
        """Load YAML; top-level ``overrides`` replace whole sections."""
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        return cls.from_dict({**(data or {}), **(overrides or {})})
