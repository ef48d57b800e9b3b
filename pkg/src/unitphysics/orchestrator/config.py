"""Run configuration for an orchestration: backend, k, threshold, budgets, sandbox policy."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .loop import LoopConfig
from .sandbox import DEFAULT_INSTALL, SandboxConfig
from .types import Budget


class RunConfigError(ValueError):
    pass


_KEYS = {"backend", "k", "threshold", "budget", "sandbox", "workers", "query_file", "suite", "guidance",
         "mechanism"}
_SANDBOX_KEYS = {"timeout", "network", "root", "cache_dir", "allow_list", "install_command", "install_timeout"}


@dataclass
class OrchestrationConfig:
    backend: str = "stub:three_stage.json"
    k: int = 4
    threshold: float = 0.4
    budget: Budget = field(default_factory=Budget)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    workers: int = 1
    query_file: str | None = None
    suite: str | None = None
    mechanism: str | None = None
    guidance: dict[int, str] = field(default_factory=dict)
    base: Path = field(default_factory=Path.cwd)

    def loop_config(self, mech=None) -> LoopConfig:
        return LoopConfig(k=self.k, threshold=self.threshold, budget=self.budget, sandbox=self.sandbox,
                          workers=self.workers, mech=mech)

    def to_dict(self) -> dict:
        return {
            "backend": self.backend, "k": self.k, "threshold": self.threshold,
            "budget": {"max_iterations": self.budget.max_iterations, "max_repairs": self.budget.max_repairs,
                       "retrieval": self.budget.retrieval},
            "sandbox": {"timeout": self.sandbox.timeout, "network": self.sandbox.network,
                        "allow_list": list(self.sandbox.allow_list),
                        "install_command": list(self.sandbox.install_command)},
            "workers": self.workers, "query_file": self.query_file, "suite": self.suite,
            "mechanism": self.mechanism, "guidance": {str(k): v for k, v in sorted(self.guidance.items())},
        }


def _expand(value: str, subs: Mapping[str, str]) -> str:
    for key, rep in subs.items():
        value = value.replace("{" + key + "}", rep)
    return value


def config_from_dict(doc: Mapping[str, Any], base: Path | None = None) -> OrchestrationConfig:
    """Build a config; ``{config_dir}`` and ``{fixtures}`` expand in paths and commands."""
    from . import fixtures_dir

    if not isinstance(doc, Mapping):
        raise RunConfigError("run config must be a mapping")
    unknown = set(doc) - _KEYS
    if unknown:
        raise RunConfigError(f"unknown run config keys: {sorted(unknown)}")
    base = Path(base) if base is not None else Path.cwd()
    subs = {"config_dir": str(base), "fixtures": str(fixtures_dir())}
    try:
        budget = Budget(**doc.get("budget", {}))
    except (TypeError, ValueError) as exc:
        raise RunConfigError(f"bad budget: {exc}") from None
    sb = dict(doc.get("sandbox", {}))
    if set(sb) - _SANDBOX_KEYS:
        raise RunConfigError(f"unknown sandbox keys: {sorted(set(sb) - _SANDBOX_KEYS)}")
    if "install_command" in sb:
        cmd = sb["install_command"]
        if not isinstance(cmd, list) or not all(isinstance(c, str) for c in cmd) or not cmd:
            raise RunConfigError("sandbox.install_command must be a list of strings")
        sb["install_command"] = [_expand(c, subs) for c in cmd]
    else:
        sb["install_command"] = list(DEFAULT_INSTALL)
    try:
        sandbox = SandboxConfig(**sb)
    except (TypeError, ValueError) as exc:
        raise RunConfigError(f"bad sandbox policy: {exc}") from None
    k = doc.get("k", 4)
    threshold = doc.get("threshold", 0.4)
    if not isinstance(k, int) or k < 1:
        raise RunConfigError("k must be a positive integer")
    if not isinstance(threshold, (int, float)) or not 0.0 <= threshold <= 1.0:
        raise RunConfigError("threshold must lie in [0, 1]")
    guidance = doc.get("guidance", {}) or {}
    try:
        guidance = {int(t): str(v) for t, v in guidance.items()}
    except (AttributeError, ValueError):
        raise RunConfigError("guidance must map iteration numbers to text") from None

    def path(key):
        v = doc.get(key)
        return None if v is None else _expand(str(v), subs)

    return OrchestrationConfig(backend=_expand(str(doc.get("backend", "stub:three_stage.json")), subs),
                               k=k, threshold=float(threshold), budget=budget, sandbox=sandbox,
                               workers=int(doc.get("workers", 1)), query_file=path("query_file"),
                               suite=path("suite"), mechanism=path("mechanism"), guidance=guidance, base=base)


def load_run_config(path: str | Path) -> OrchestrationConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise RunConfigError(f"cannot read run config {path}: {exc}") from None
    try:
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise RunConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc or {}, base=path.resolve().parent)
