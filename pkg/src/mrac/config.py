"""Run configuration: YAML on disk, validated with pydantic, dotted-key overrides."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .scenario_sar import PriorKind, ScenarioConfig
from .sim_runtime import Algorithm, AlgorithmSpec


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ScenarioSection(_Section):
    width: int = Field(10, ge=1)
    height: int = Field(10, ge=1)
    target_density: float = Field(0.2, ge=0.0, le=1.0)
    horizon: int = Field(200, ge=1)
    comm_restr: int = Field(0, ge=0)
    init: PriorKind = PriorKind.MAX_ENTROPY
    p_detect: float = Field(0.9, ge=0.0, le=1.0)
    p_false_alarm: float = Field(0.2, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self):
        if self.comm_restr > self.horizon:
            raise ValueError("comm_restr cannot exceed horizon")
        if self.width * self.height < 2:
            raise ValueError("grid needs at least two cells")
        if self.p_detect < self.p_false_alarm:
            raise ValueError("p_detect must be at least p_false_alarm")
        return self

    def to_scenario(self) -> ScenarioConfig:
        return ScenarioConfig(**self.model_dump())


class AlgorithmSection(_Section):
    name: Algorithm = Algorithm.ENFORCE_AC
    epsilon: float = Field(0.0, ge=0.0, lt=1.0)
    m_batch: int = Field(4, ge=1)
    initial_fraction: float = Field(0.25, gt=0.0, le=1.0)
    slot_cap: int = Field(12, ge=1, le=30)

    def to_spec(self) -> AlgorithmSpec:
        return AlgorithmSpec(**self.model_dump())


class ExecutionSection(_Section):
    seeds: list[int] = Field(default_factory=lambda: list(range(10)))
    parallelism: int = Field(1, ge=1)
    out: str | None = None

    @field_validator("seeds")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one seed required")
        return v


class RunConfig(_Section):
    """Schema of a run file; every field has a default and unknown keys are rejected.

    The scenario grid uses row-major cell ids and ``N`` decreases the row index.
    """

    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    algorithm: AlgorithmSection = Field(default_factory=AlgorithmSection)
    execution: ExecutionSection = Field(default_factory=ExecutionSection)

    def resolved(self) -> dict:
        return json.loads(self.model_dump_json())

    def run_id(self) -> str:
        body = dict(self.resolved())
        body["execution"] = {k: v for k, v in body["execution"].items() if k != "out"}
        blob = json.dumps(body, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _set_dotted(tree: dict, key: str, value):
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"override {key!r} descends into a scalar")
        node = nxt
    node[parts[-1]] = value


def parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigError(f"override {text!r}: {exc}") from exc
    return key, value


def build_config(data: dict | None = None, overrides: Sequence[str] = (), seeds: Sequence[int] | None = None) -> RunConfig:
    tree = json.loads(json.dumps(data or {}))
    for item in overrides:
        _set_dotted(tree, *parse_override(item))
    if seeds is not None:
        _set_dotted(tree, "execution.seeds", list(seeds))
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, overrides: Sequence[str] = (), seeds: Sequence[int] | None = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return build_config(data, overrides, seeds)
