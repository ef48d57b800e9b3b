"""Diagnostic agent: classify execution errors and attempt bounded repairs."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Callable

from .sandbox import TIMEOUT_MARKER, SandboxConfig, install
from .types import Diagnosis, ExecOutcome

CATEGORIES = ("none", "dependency-missing", "syntax/API", "runtime-numeric", "timeout")

_MISSING = re.compile(r"ModuleNotFoundError: No module named '([\w.]+)'")
_EXC = re.compile(r"^([A-Za-z_][\w.]*(?:Error|Exception|Exit|Interrupt|Warning)):?", re.M)
_API = {"SyntaxError", "IndentationError", "TabError", "NameError", "AttributeError", "TypeError",
        "ImportError", "NotImplementedError", "UnboundLocalError", "KeyError"}


def last_exception(E: str) -> str | None:
    names = _EXC.findall(E)
    return names[-1].rsplit(".", 1)[-1] if names else None


def classify(outcome: ExecOutcome) -> tuple[str, str | None, list[str]]:
    """``(category, missing package, observations)`` for one execution."""
    if outcome.timed_out or outcome.E.startswith(TIMEOUT_MARKER):
        return "timeout", None, ["execution hit the wall-clock limit"]
    if outcome.ok and not outcome.E.strip():
        return "none", None, []
    m = _MISSING.findall(outcome.E)
    if m:
        pkg = m[-1].split(".")[0]
        return "dependency-missing", pkg, [f"missing module {m[-1]!r}"]
    exc = last_exception(outcome.E)
    if exc in _API:
        return "syntax/API", None, [f"{exc} raised"]
    # remaining failures are runtime faults: floating point, bounds, domain errors
    return "runtime-numeric", None, [f"{exc or 'nonzero exit'} raised"]


def diagnose(outcome: ExecOutcome, workdir: Path, config: SandboxConfig,
             rerun: Callable[[], ExecOutcome], max_repairs: int = 1) -> tuple[Diagnosis, ExecOutcome]:
    """Classify ``outcome``; for a missing allow-listed dependency install it and re-run.

    Returns the diagnosis and the final execution outcome.
    """
    category, pkg, obs = classify(outcome)
    diag = Diagnosis(category=category, observations=list(obs))
    attempts = 0
    while category == "dependency-missing":
        if attempts >= max_repairs:
            diag.observations.append(f"repair budget of {max_repairs} exhausted")
            break
        if pkg not in config.allow_list:
            diag.actions.append({"action": "install", "package": pkg, "ok": False, "refused": True,
                                 "reason": "package is not on the install allow-list"})
            diag.observations.append(f"install of {pkg!r} refused by policy")
            break
        attempts += 1
        record = install(pkg, workdir, config)
        diag.actions.append(record)
        if not record["ok"]:
            diag.observations.append(f"install of {pkg!r} failed")
            break
        outcome = rerun()
        diag.actions.append({"action": "re-execute", "returncode": outcome.returncode, "ok": outcome.ok})
        category, pkg, obs = classify(outcome)
        diag.observations += obs
        if outcome.ok:
            diag.repaired = True
            break
    return diag, outcome
