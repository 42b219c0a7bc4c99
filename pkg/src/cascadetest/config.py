"""Run configuration: a YAML document, every key optional."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .prompting import GenerationMode, InstructionVariant
from .selection import Strategy
from .verification import RepairBudget


@dataclass
class RunConfig:
    project_root: str = ""
    prefix_pool: str = ""
    oracle_pool: str = ""
    mode: GenerationMode = GenerationMode.CASCADED
    strategy: Strategy = Strategy.RANDOM
    variant: InstructionVariant = InstructionVariant.WELL_CRAFTED
    shots: int = 5
    token_budget: int = 4096
    budget: RepairBudget = field(default_factory=RepairBudget)
    seed: int = 0
    junit: str = "4"
    jobs: int = 1
    carry_history: bool = False
    workspace_root: str = "workspace"
    llm: dict = field(default_factory=lambda: {"backend": "replay", "model_id": "gpt-3.5-turbo",
                                               "temperature": 0.0, "max_output_tokens": 1024})
    embedding: dict = field(default_factory=lambda: {"backend": "local-hash", "dim": 512})
    toolchain: dict = field(default_factory=lambda: {"kind": "command"})
    templates: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.mode = GenerationMode(self.mode)
            self.strategy = Strategy(str(getattr(self.strategy, "value", self.strategy)).replace("-", "_"))
            self.variant = InstructionVariant(str(getattr(self.variant, "value", self.variant)).replace("-", "_"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if isinstance(self.budget, dict):
            self.budget = RepairBudget(int(self.budget.get("compile_max", 3)),
                                       int(self.budget.get("exec_max", 2)))
        self.junit = str(self.junit)
        if self.shots < 0:
            raise ConfigError("shots must be >= 0")
        if self.token_budget <= 0:
            raise ConfigError("token_budget must be positive")
        if self.junit not in ("4", "5"):
            raise ConfigError("junit must be 4 or 5")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, RepairBudget):
                v = {"compile_max": v.compile_max, "exec_max": v.exec_max}
            elif hasattr(v, "value"):
                v = v.value
            elif isinstance(v, dict):
                v = dict(v)
            out[f.name] = v
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, allow_unicode=True)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        if base_dir is not None:
            cfg._resolve(base_dir)
        return cfg

    def _resolve(self, base: Path) -> None:
        def rel(p: str) -> str:
            return str((base / p).resolve()) if p and not Path(p).is_absolute() else p

        self.project_root = rel(self.project_root)
        self.prefix_pool = rel(self.prefix_pool)
        self.oracle_pool = rel(self.oracle_pool)
        self.workspace_root = rel(self.workspace_root)
        for key in ("cassette", "record_to"):
            if self.llm.get(key):
                self.llm = {**self.llm, key: rel(self.llm[key])}

    def check_paths(self) -> None:
        for name in ("prefix_pool", "oracle_pool"):
            p = getattr(self, name)
            if not p:
                raise ConfigError(f"{name} is not configured")
            if not Path(p).is_file():
                raise ConfigError(f"{name} does not exist: {p}")
        if self.project_root and not Path(self.project_root).is_dir():
            raise ConfigError(f"project_root does not exist: {self.project_root}")


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return RunConfig.from_dict(data, base_dir)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent)
