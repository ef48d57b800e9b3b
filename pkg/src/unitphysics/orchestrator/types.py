"""Domain records of an orchestration run."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

from ..primitives import PrimitiveSuite


class ChainStatus(str, Enum):
    GENERATED = "generated"
    PRUNED = "pruned"
    EXEC_FAILED = "exec_failed"
    DIAG_REPAIRED = "diag_repaired"
    VERIFY_FAILED = "verify_failed"
    PASSED = "passed"


# allowed status transitions; nothing reaches ``passed`` without verification
TRANSITIONS: dict[ChainStatus, frozenset[ChainStatus]] = {
    ChainStatus.GENERATED: frozenset({ChainStatus.PRUNED, ChainStatus.EXEC_FAILED, ChainStatus.DIAG_REPAIRED,
                                      ChainStatus.VERIFY_FAILED, ChainStatus.PASSED}),
    ChainStatus.DIAG_REPAIRED: frozenset({ChainStatus.VERIFY_FAILED, ChainStatus.PASSED}),
    ChainStatus.PRUNED: frozenset(),
    ChainStatus.EXEC_FAILED: frozenset(),
    ChainStatus.VERIFY_FAILED: frozenset(),
    ChainStatus.PASSED: frozenset(),
}


class TransitionError(RuntimeError):
    pass


@dataclass(frozen=True)
class TokenTrace:
    """Per-token ``(p_top1, p_top2)`` pairs and the half-open answer span.

    ``answer_span`` is ``None`` when the backend marked no answer tokens.
    """

    probs: tuple[tuple[float, float], ...]
    answer_span: tuple[int, int] | None = None

    @classmethod
    def from_lists(cls, probs: Sequence[Sequence[float]], span: Sequence[int] | None) -> "TokenTrace":
        return cls(tuple((float(a), float(b)) for a, b in probs),
                   None if span is None else (int(span[0]), int(span[1])))

    def validate(self) -> None:
        for i, (a, b) in enumerate(self.probs):
            if not (math.isfinite(a) and math.isfinite(b) and 0.0 <= b <= a <= 1.0):
                raise ValueError(f"token {i}: need 0 <= top2 <= top1 <= 1, got ({a}, {b})")
        if self.answer_span is not None:
            s, e = self.answer_span
            if not 0 <= s <= e <= len(self.probs):
                raise ValueError(f"answer span {self.answer_span} outside trace of length {len(self.probs)}")

    @property
    def has_answer(self) -> bool:
        return self.answer_span is not None and self.answer_span[1] > self.answer_span[0]

    def to_dict(self) -> dict:
        return {"probs": [list(p) for p in self.probs],
                "answer_span": None if self.answer_span is None else list(self.answer_span)}


@dataclass
class ExecOutcome:
    """Result ``(R, E)`` of one sandboxed execution."""

    R: str
    E: str
    returncode: int | None
    timed_out: bool = False
    evidence: list[str] = field(default_factory=list)  # relative to the work directory
    duration: float = 0.0

    @property
    def ok(self) -> bool:
        return self.returncode == 0 and not self.timed_out

    def to_dict(self, tail: int = 2000) -> dict:
        return {"R": self.R[-tail:], "E": self.E[-tail:], "returncode": self.returncode,
                "timed_out": self.timed_out, "evidence": list(self.evidence)}


@dataclass
class Diagnosis:
    """Diagnostic record D: classification, observations and repair attempts."""

    category: str  # none | dependency-missing | syntax/API | runtime-numeric | timeout
    observations: list[str] = field(default_factory=list)
    actions: list[dict] = field(default_factory=list)
    repaired: bool = False
    explanation: str = ""

    def to_dict(self) -> dict:
        return {"category": self.category, "observations": list(self.observations),
                "actions": list(self.actions), "repaired": self.repaired, "explanation": self.explanation}


@dataclass
class CandidateChain:
    index: int
    code: str
    trace: TokenTrace
    iteration: int = 0
    confidence: float | None = None
    status: ChainStatus = ChainStatus.GENERATED
    exec: ExecOutcome | None = None
    diag: Diagnosis | None = None
    verify: dict | None = None  # suite report dict (V)
    verify_errors: list[str] = field(default_factory=list)  # failure explanations (E-hat)
    history: list[ChainStatus] = field(default_factory=lambda: [ChainStatus.GENERATED])
    workdir: str | None = None
    retrieval_requests: list[str] = field(default_factory=list)

    @property
    def key(self) -> str:
        return f"t{self.iteration}k{self.index}"

    def transition(self, new: ChainStatus) -> None:
        if new not in TRANSITIONS[self.status]:
            raise TransitionError(f"chain {self.key}: {self.status.value} -> {new.value} is not allowed")
        if new == ChainStatus.PASSED and not self.verified_pass:
            raise TransitionError(f"chain {self.key}: passed needs an aggregate-pass verification report")
        if new == ChainStatus.VERIFY_FAILED and self.verify is None:
            raise TransitionError(f"chain {self.key}: verify_failed needs a verification report")
        self.status = new
        self.history.append(new)

    @property
    def n_passing(self) -> int:
        if not self.verify:
            return 0
        return int(self.verify.get("n_passed", 0))

    @property
    def verified_pass(self) -> bool:
        return bool(self.verify and self.verify.get("passed"))

    @property
    def needed_repair(self) -> bool:
        return bool(self.diag and self.diag.actions)

    def summary(self) -> dict:
        return {"chain": self.index, "iteration": self.iteration, "status": self.status.value,
                "confidence": self.confidence}


@dataclass
class Task:
    id: str
    prompt: str
    role: str = "code"
    revisions: list[str] = field(default_factory=list)

    def effective_prompt(self, guidance: Sequence[str] = ()) -> str:
        parts = [self.prompt, *self.revisions]
        parts += [f"Guidance: {g}" for g in guidance]
        return "\n\n".join(parts)

    def to_dict(self) -> dict:
        return {"id": self.id, "role": self.role, "prompt": self.prompt, "revisions": list(self.revisions)}


@dataclass
class SupervisorInput:
    query: str
    suite: PrimitiveSuite
    suite_text: str = ""
    basis: dict[str, Any] = field(default_factory=lambda: {
        "execute": True, "tools": ["python"], "language": "python", "transfer": {"files": True}})

    def __post_init__(self):
        if not self.query or not self.query.strip():
            raise ValueError("the supervisor query must be non-empty")
        if not self.suite_text:
            self.suite_text = self.suite.to_json()

    def initial_prompt(self) -> str:
        return f"{self.query.strip()}\n\nUnit-physics suite:\n{self.suite_text.strip()}"


@dataclass
class SupervisorPlan:
    id: str
    tasks: list[Task]
    iteration: int = 0
    history: list[dict] = field(default_factory=list)
    guidance: list[str] = field(default_factory=list)

    def code_task(self) -> Task:
        for t in self.tasks:
            if t.role == "code":
                return t
        raise ValueError("plan has no code task")

    def to_dict(self) -> dict:
        return {"id": self.id, "iteration": self.iteration, "tasks": [t.to_dict() for t in self.tasks],
                "history": list(self.history), "guidance": list(self.guidance)}


@dataclass
class IterationState:
    iteration: int
    summary: dict
    guidance: str | None = None
    ledger: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Budget:
    max_iterations: int = 6
    max_repairs: int = 1
    retrieval: int = 2

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.max_repairs < 0 or self.retrieval < 0:
            raise ValueError("budgets must be non-negative")


@dataclass
class FinalOutput:
    outcome: str  # selected | budget_exhausted | protocol_error | backend_error | sandbox_error
    iterations: int
    selected: dict | None
    code: str | None
    verdicts: dict | None
    result: Any
    graph: dict
    ledger: dict
    error: str | None = None
    resume: dict | None = None  # last plan and iteration when a backend call aborted the run

    @property
    def terminal(self) -> bool:
        return self.outcome == "selected"

    def to_dict(self) -> dict:
        return {"outcome": self.outcome, "iterations": self.iterations, "selected": self.selected,
                "verdicts": self.verdicts, "result": self.result, "error": self.error,
                "resume": self.resume, "ledger": self.ledger}
