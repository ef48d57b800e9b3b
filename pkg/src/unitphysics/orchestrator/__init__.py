"""Multi-agent orchestration: plan, generate, prune, execute, diagnose, verify, refine, select."""

from pathlib import Path


def fixtures_dir() -> Path:
    """Directory of the shipped stub-backend fixtures."""
    return Path(__file__).with_name("fixtures")


from .backend import (  # noqa: E402
    AgentBackend,
    BackendError,
    BackendProtocolError,
    ExternalBackend,
    ScriptedBackend,
    make_backend,
    validate_chains,
)
from .confidence import UndefinedConfidenceError, confidence_score, prune, score_chains  # noqa: E402
from .diagnose import CATEGORIES, classify, diagnose  # noqa: E402
from .graph import Edge, Node, StateGraph, canonical_json, digest  # noqa: E402
from .ledger import ROLES, TokenLedger  # noqa: E402
from .loop import (  # noqa: E402
    InitializationError,
    LoopConfig,
    Orchestrator,
    RetrievalBudget,
    Selection,
    generate_candidates,
    initialize,
    refine_plan,
    run_loop,
    score_and_select,
    summarize_and_log,
    template_summary,
    verify_candidate,
)
from .sandbox import SandboxConfig, SandboxError, execute, install, prepare_workdir  # noqa: E402
from .types import (  # noqa: E402
    Budget,
    CandidateChain,
    ChainStatus,
    Diagnosis,
    ExecOutcome,
    FinalOutput,
    IterationState,
    SupervisorInput,
    SupervisorPlan,
    Task,
    TokenTrace,
    TransitionError,
)
from .config import OrchestrationConfig, RunConfigError, config_from_dict, load_run_config  # noqa: E402

__all__ = [
    "fixtures_dir", "AgentBackend", "BackendError", "BackendProtocolError", "ExternalBackend",
    "ScriptedBackend", "make_backend", "validate_chains", "UndefinedConfidenceError", "confidence_score",
    "prune", "score_chains", "CATEGORIES", "classify", "diagnose", "Edge", "Node", "StateGraph",
    "canonical_json", "digest", "ROLES", "TokenLedger", "InitializationError", "LoopConfig", "Orchestrator",
    "RetrievalBudget", "Selection", "generate_candidates", "initialize", "refine_plan", "run_loop",
    "score_and_select", "summarize_and_log", "template_summary", "verify_candidate", "SandboxConfig",
    "SandboxError", "execute", "install", "prepare_workdir", "Budget", "CandidateChain", "ChainStatus",
    "Diagnosis", "ExecOutcome", "FinalOutput", "IterationState", "SupervisorInput", "SupervisorPlan",
    "Task", "TokenTrace", "TransitionError", "OrchestrationConfig", "RunConfigError", "config_from_dict",
    "load_run_config",
]
