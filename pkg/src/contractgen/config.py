"""Run configuration, loaded from TOML.

Example::

    [run]
    backend = "scripted"          # or "service"
    fixtures = "path/to/fixtures"
    scenario = "demo"
    max_adapt_iterations = 3
    strict_sequential = false
    output_dir = "out"

    [weights]
    visual_communication = 2
    citation_hygiene = 1

    [evaluators]
    formatting = false

    [service]
    endpoint = "https://agents.example.org/v1/dispatch"
    token_env = "CONTRACTGEN_TOKEN"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .agents import ServiceConfig
from .errors import InputError
from .evaluate import Weights, default_evaluators

DEFAULT_MAX_ADAPT_ITERATIONS = 3


class ConfigError(InputError):
    pass


def packaged_fixtures() -> Path:
    return Path(str(resources.files("contractgen").joinpath("data/fixtures")))


def packaged_stories() -> Path:
    return Path(str(resources.files("contractgen").joinpath("data/stories")))


@dataclass
class RunConfig:
    backend: str = "scripted"
    fixtures: Path = field(default_factory=packaged_fixtures)
    scenario: str | None = None  # defaults to the story id
    max_adapt_iterations: int = DEFAULT_MAX_ADAPT_ITERATIONS
    strict_sequential: bool = False
    fixed_clock: bool = False
    output_dir: Path = Path(".")
    weights: Weights = field(default_factory=Weights.equal)
    evaluators: dict[str, bool] = field(default_factory=dict)
    service: ServiceConfig | None = None

    def __post_init__(self):
        if self.backend not in ("scripted", "service"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.max_adapt_iterations < 1:
            raise ConfigError("max_adapt_iterations must be at least 1")
        self.fixtures = Path(self.fixtures)
        self.output_dir = Path(self.output_dir)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: Path | None = None) -> "RunConfig":
        unknown = set(data) - {"run", "weights", "evaluators", "service"}
        if unknown:
            raise ConfigError(f"unknown config tables: {', '.join(sorted(unknown))}")
        run = dict(data.get("run", {}))
        allowed = {f.name for f in fields(cls)} - {"weights", "evaluators", "service"}
        bad = set(run) - allowed
        if bad:
            raise ConfigError(f"unknown [run] keys: {', '.join(sorted(bad))}")
        for key in ("fixtures", "output_dir"):
            if key in run and base_dir is not None:
                run[key] = base_dir / run[key]
        try:
            if "weights" in data:
                run["weights"] = Weights(data["weights"])
        except ValueError as exc:
            raise ConfigError(f"[weights]: {exc}") from exc
        evs = data.get("evaluators", {})
        if not all(isinstance(v, bool) for v in evs.values()):
            raise ConfigError("[evaluators] values must be true or false")
        stray = set(evs) - {e.evaluator_id for e in default_evaluators()}
        if stray:
            raise ConfigError(f"unknown evaluators: {', '.join(sorted(stray))}")
        run["evaluators"] = dict(evs)
        if "service" in data:
            run["service"] = ServiceConfig.from_mapping(data["service"])
        try:
            return cls(**run)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text("utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return RunConfig.from_mapping(data, p.parent)
