"""The supervisor loop: plan, generate, prune, execute, diagnose, verify, log, refine, select."""

from __future__ import annotations

import json
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

from ..primitives import Evidence, PrimitiveSuite, StatePair, evaluate_suite
from ..primitives.evidence import EvidenceError
from ..reactor.trajectory import Trajectory, TrajectoryFormatError
from ..thermochem import MechanismSpec, default_mechanism
from .backend import AgentBackend, BackendError, BackendProtocolError, validate_chains
from .confidence import prune, score_chains
from .diagnose import diagnose
from .graph import StateGraph, digest
from .ledger import TokenLedger
from .sandbox import SandboxConfig, SandboxError, execute, prepare_workdir
from .types import (
    Budget,
    CandidateChain,
    ChainStatus,
    FinalOutput,
    IterationState,
    SupervisorInput,
    SupervisorPlan,
    Task,
    TokenTrace,
)

Guidance = Callable[[IterationState], "str | None"]


class InitializationError(BackendError):
    pass


@dataclass
class Selection:
    chain: CandidateChain | None  # k*, set only when terminal
    best: CandidateChain | None
    terminal: bool
    ranking: list[tuple[int, tuple]] = field(default_factory=list)


class RetrievalBudget:
    """Counter of permitted retrieval requests; refuses once spent."""

    def __init__(self, remaining: int = 2):
        self.remaining = remaining

    def consume(self) -> bool:
        if self.remaining <= 0:
            return False
        self.remaining -= 1
        return True


def _code_digest(code: str) -> str:
    return digest({"code": code})[:16]


def _tail_line(text: str) -> str:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    return lines[-1].strip() if lines else ""


# --- operations -----------------------------------------------------------

def initialize(inp: SupervisorInput, backend: AgentBackend, graph: StateGraph) -> tuple[SupervisorPlan, str]:
    """P_0 from the supervisor on ``[Q; U]``; writes the root and plan nodes."""
    root = graph.add_node("input", {"query": inp.query, "suite": inp.suite.to_dict(), "basis": inp.basis})
    try:
        raw = backend.plan(inp.initial_prompt(), inp.query)
    except BackendError as exc:
        graph.add_node("error", {"stage": "initialize", "message": str(exc)}, parent=root, label="failed")
        raise InitializationError(f"supervisor planning failed: {exc}") from exc
    tasks = raw.get("tasks") if isinstance(raw, dict) else None
    if not isinstance(tasks, list) or not tasks or not all(
            isinstance(t, dict) and isinstance(t.get("id"), str) and isinstance(t.get("prompt"), str) for t in tasks):
        raise BackendProtocolError("plan must carry a non-empty task list of {id, prompt}")
    plan = SupervisorPlan(id=str(raw.get("id", "plan")),
                          tasks=[Task(t["id"], t["prompt"], t.get("role", "code")) for t in tasks])
    node = graph.add_node("plan", plan.to_dict(), parent=root, label="initialize", iteration=0)
    return plan, node


def generate_candidates(prompt: str, backend: AgentBackend, k: int, iteration: int) -> list[CandidateChain]:
    """k chains from the code agent, validated and scored."""
    if k < 1:
        raise ValueError("k must be >= 1")
    raw = validate_chains(backend.generate(prompt, k, iteration), k)
    chains = [CandidateChain(index=i, code=ch["code"],
                             trace=TokenTrace.from_lists(ch["trace"], ch["answer_span"]),
                             iteration=iteration, retrieval_requests=ch["retrieval"])
              for i, ch in enumerate(raw)]
    score_chains(chains)
    return chains


def load_evidence(workdir: Path, files: Sequence[str], mech: MechanismSpec) -> tuple[Evidence, list[str]]:
    errors = []
    traj = None
    pairs = {}
    for name in files:
        path = workdir / name
        try:
            if name.endswith(".pair.json"):
                p = StatePair.read(path)
                pairs[p.name] = p
            elif name.endswith(".jsonl") and traj is None:
                traj = Trajectory.read(path)
        except (TrajectoryFormatError, EvidenceError, ValueError, KeyError) as exc:
            errors.append(f"unreadable evidence {name}: {exc}")
    return Evidence(trajectory=traj, mech=mech, pairs=pairs), errors


def verify_candidate(chain: CandidateChain, suite: PrimitiveSuite, workdir: Path,
                     mech: MechanismSpec) -> tuple[dict, list[str]]:
    """V and E-hat from the primitives engine on the chain's evidence files."""
    files = chain.exec.evidence if chain.exec else []
    evidence, errors = load_evidence(workdir, files, mech)
    if not files:
        errors.append("candidate produced no evidence files")
    report = evaluate_suite(suite, evidence)
    errors += [v.message for v in report.failed]
    return report.to_dict(), errors


def template_summary(iteration: int, chains: Sequence[CandidateChain]) -> dict:
    """Deterministic S_t: per-chain status, failing primitives, worst residuals."""
    entries = []
    for c in chains:
        e = {"chain": c.index, "status": c.status.value, "confidence": c.confidence,
             "category": c.diag.category if c.diag else None, "failing": [], "worst": {}, "error": None}
        if c.verify:
            for v in c.verify["verdicts"]:
                if not v["passed"]:
                    e["failing"].append(v["id"])
                    e["worst"][v["id"]] = v["residual"]
        if c.status == ChainStatus.EXEC_FAILED and c.exec:
            e["error"] = _tail_line(c.exec.E)
        entries.append(e)
    retained = [c for c in chains if c.status != ChainStatus.PRUNED]
    terminal = any(c.status == ChainStatus.PASSED for c in chains)
    request = "stop" if terminal else ("regenerate" if not retained else "refine")
    lines = [f"iteration {iteration}: {len(retained)} of {len(chains)} chains retained"]
    for e in entries:
        if e["status"] == "pruned":
            continue
        line = f"chain {e['chain']}: {e['status']}"
        if e["failing"]:
            line += "; failing " + ", ".join(f"{i} (residual {e['worst'][i]})" for i in e["failing"])
        if e["error"]:
            line += f"; {e['category']}: {e['error']}"
        lines.append(line)
    if not retained:
        lines.append("all chains pruned; regenerate")
    elif terminal:
        lines.append("terminal: a chain passed every primitive")
    return {"iteration": iteration, "terminal": terminal, "all_pruned": not retained, "request": request,
            "chains": entries, "text": "\n".join(lines)}


def summarize_and_log(iteration: int, chains: Sequence[CandidateChain], backend: AgentBackend,
                      graph: StateGraph, parent: str, ledger: TokenLedger) -> tuple[IterationState, str]:
    """Write L_d and L_v nodes, then S_t; return the iteration state and summary node."""
    L_d = [{"chain": c.index, "code": _code_digest(c.code), "R": _tail_line(c.exec.R) if c.exec else None,
            "D": c.diag.to_dict() if c.diag else None} for c in chains if c.status != ChainStatus.PRUNED]
    L_v = [{"chain": c.index, "code": _code_digest(c.code),
            "V": None if c.verify is None else {"passed": c.verify["passed"], "failed": c.verify["failed"]},
            "E_hat": list(c.verify_errors)} for c in chains if c.status != ChainStatus.PRUNED]
    nd = graph.add_node("log_d", {"iteration": iteration, "entries": L_d}, parent=parent, label="log",
                        iteration=iteration)
    nv = graph.add_node("log_v", {"iteration": iteration, "entries": L_v}, parent=nd, label="log",
                        iteration=iteration)
    template = template_summary(iteration, chains)
    custom = backend.summarize({"L_d": L_d, "L_v": L_v}, template, iteration)
    summary = template if custom is None else {**template, "digest": custom}
    ns = graph.add_node("summary", summary, parent=nv, label="summarize", iteration=iteration)
    return IterationState(iteration, summary, ledger=ledger.to_dict()), ns


def refine_plan(plan: SupervisorPlan, state: IterationState, backend: AgentBackend, graph: StateGraph,
                parent: str) -> tuple[SupervisorPlan, str]:
    """Merge the supervisor's delta into the plan; task edits are append-only."""
    t = state.iteration
    if state.guidance:
        parent = graph.add_node("guidance", {"iteration": t, "text": state.guidance}, parent=parent,
                                label="guidance", iteration=t)
    delta = backend.refine(plan.to_dict(), state.summary, state.guidance, t)
    if not isinstance(delta, dict):
        raise BackendProtocolError("refine must return an object")
    by_id = {task.id: task for task in plan.tasks}
    for edit in delta.get("edits", []):
        if edit.get("task") not in by_id or not isinstance(edit.get("append"), str):
            raise BackendProtocolError(f"bad plan edit {edit!r}")
    for task in delta.get("tasks", []):
        if not isinstance(task, dict) or not isinstance(task.get("id"), str) or task["id"] in by_id:
            raise BackendProtocolError(f"bad new task {task!r}")
    for edit in delta.get("edits", []):
        by_id[edit["task"]].revisions.append(edit["append"])
    for task in delta.get("tasks", []):
        plan.tasks.append(Task(task["id"], task.get("prompt", ""), task.get("role", "code")))
    if state.guidance:
        plan.guidance.append(state.guidance)
    plan.iteration = t
    plan.history.append({"iteration": t, "summary": digest(state.summary)[:16],
                         "delta": {"edits": delta.get("edits", []), "tasks": delta.get("tasks", [])}})
    node = graph.add_node("plan", plan.to_dict(), parent=parent, label="refine", iteration=t)
    return plan, node


def _score(c: CandidateChain) -> tuple:
    return (c.verified_pass, c.n_passing, not c.needed_repair, -1.0 if c.confidence is None else c.confidence)


def score_and_select(chains: Sequence[CandidateChain]) -> Selection:
    """Lexicographic argmax of (aggregate pass, passing primitives, no repair, confidence).

    Ties go to the earliest chain. The selection is terminal only when k*
    passed verification.
    """
    ranked = [c for c in sorted(chains, key=lambda c: c.index) if c.status != ChainStatus.PRUNED]
    best = None
    for c in ranked:
        if best is None or _score(c) > _score(best):
            best = c
    terminal = best is not None and best.verified_pass and best.status == ChainStatus.PASSED
    return Selection(best if terminal else None, best, terminal, [(c.index, _score(c)) for c in ranked])


# --- the loop -------------------------------------------------------------

@dataclass
class LoopConfig:
    k: int = 4
    threshold: float = 0.4
    budget: Budget = field(default_factory=Budget)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    workers: int = 1
    mech: MechanismSpec | None = None


class Orchestrator:
    def __init__(self, inp: SupervisorInput, backend: AgentBackend, config: LoopConfig | None = None,
                 graph: StateGraph | None = None, ledger: TokenLedger | None = None,
                 guidance: Guidance | None = None):
        self.inp = inp
        self.backend = backend
        self.config = config or LoopConfig()
        self.graph = graph if graph is not None else StateGraph()
        self.ledger = ledger if ledger is not None else TokenLedger()
        self.guidance = guidance
        self.retrieval = RetrievalBudget(self.config.budget.retrieval)
        self.mech = self.config.mech or default_mechanism()
        self._chain_node: dict[tuple[int, int], str] = {}
        self._workdirs: dict[tuple[int, int], Path] = {}
        self._run_root: Path | None = None
        self._plan: SupervisorPlan | None = None
        self._first: dict[tuple[int, int], object] = {}
        previous = backend.on_usage

        def on_usage(role, n_in, n_out, call):
            self.ledger.record(role, n_in, n_out, call)
            if previous is not None:
                previous(role, n_in, n_out, call)

        backend.on_usage = on_usage

    # graph helpers
    def _chain_status(self, c: CandidateChain, new: ChainStatus, payload: dict) -> None:
        old = c.status
        c.transition(new)
        key = (c.iteration, c.index)
        self._chain_node[key] = self.graph.add_node(
            "chain", {"transition": f"{old.value}->{new.value}", **payload}, parent=self._chain_node[key],
            label=f"{old.value}->{new.value}", iteration=c.iteration, chain=c.index, status=new.value)

    def _root(self) -> Path:
        if self._run_root is None:
            base = self.config.sandbox.root_dir()
            self._run_root = Path(tempfile.mkdtemp(prefix="run-", dir=base))
        return self._run_root

    def _evaluate(self, c: CandidateChain) -> None:
        """Execute, diagnose and verify one retained chain (no graph writes)."""
        cfg = self.config.sandbox
        sub = replace(cfg, root=str(self._root()))
        wd = prepare_workdir(sub, f"iter{c.iteration:02d}_chain{c.index:02d}")
        self._workdirs[(c.iteration, c.index)] = wd
        c.workdir = wd.name
        first = execute(c.code, wd, sub)
        c.diag, c.exec = diagnose(first, wd, sub, lambda: execute(c.code, wd, sub), self.config.budget.max_repairs)
        self._first[(c.iteration, c.index)] = first
        if c.exec.ok:
            c.verify, c.verify_errors = verify_candidate(c, self.inp.suite, wd, self.mech)

    def _record(self, c: CandidateChain) -> None:
        """Backend explanations and graph nodes for one evaluated chain, in order."""
        t = c.iteration
        first = self._first[(t, c.index)]
        if c.diag.category != "none":
            c.diag.explanation = self.backend.explain(
                "diagnostic", {"chain": c.index, "category": c.diag.category, "E": first.E[-2000:]}, t)
        if not c.exec.ok:
            self._chain_status(c, ChainStatus.EXEC_FAILED, {"exec": c.exec.to_dict(), "diag": c.diag.to_dict()})
            return
        if c.diag.repaired:
            self._chain_status(c, ChainStatus.DIAG_REPAIRED, {"exec_before": first.to_dict(),
                                                              "diag": c.diag.to_dict(),
                                                              "exec": c.exec.to_dict()})
        if c.verify["passed"]:
            self._chain_status(c, ChainStatus.PASSED, {"exec": c.exec.to_dict(), "verify": c.verify})
        else:
            text = self.backend.explain("verification", {"chain": c.index, "failed": c.verify["failed"],
                                                         "messages": c.verify_errors}, t)
            if text:
                c.verify_errors.append(text)
            self._chain_status(c, ChainStatus.VERIFY_FAILED, {"exec": c.exec.to_dict(), "verify": c.verify,
                                                              "E_hat": c.verify_errors})

    def _retrievals(self, c: CandidateChain) -> None:
        for q in c.retrieval_requests:
            granted = self.retrieval.consume()
            self.graph.add_node("retrieval", {"query": q, "granted": granted,
                                              "remaining": self.retrieval.remaining, "result": None},
                                parent=self._chain_node[(c.iteration, c.index)], label="retrieval",
                                iteration=c.iteration, chain=c.index)

    def iterate(self, t: int, plan: SupervisorPlan, plan_node: str) -> tuple[list[CandidateChain], str]:
        prompt = plan.code_task().effective_prompt(plan.guidance)
        chains = generate_candidates(prompt, self.backend, self.config.k, t)
        for c in chains:
            payload = {"code": c.code, "code_digest": _code_digest(c.code), "n_tokens": len(c.trace.probs),
                       "answer_span": None if c.trace.answer_span is None else list(c.trace.answer_span),
                       "confidence": c.confidence}
            if c.confidence is None:
                payload["flag"] = "undefined_confidence"
            self._chain_node[(t, c.index)] = self.graph.add_node(
                "chain", payload, parent=plan_node, label="generate", iteration=t, chain=c.index,
                status=ChainStatus.GENERATED.value)
        for c in chains:
            self._retrievals(c)
        retained = prune(chains, self.config.threshold)
        for c in chains:
            if c.status == ChainStatus.PRUNED:
                key = (t, c.index)
                self._chain_node[key] = self.graph.add_node(
                    "chain", {"transition": "generated->pruned", "confidence": c.confidence,
                              "threshold": self.config.threshold},
                    parent=self._chain_node[key], label="generated->pruned", iteration=t, chain=c.index,
                    status=ChainStatus.PRUNED.value)
        if self.config.workers > 1 and len(retained) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                list(pool.map(self._evaluate, retained))
        else:
            for c in retained:
                self._evaluate(c)
        for c in retained:
            self._record(c)
        return chains, plan_node

    def _result_payload(self, c: CandidateChain):
        wd = self._workdirs.get((c.iteration, c.index))
        if wd is not None and (wd / "result.json").is_file():
            try:
                return json.loads((wd / "result.json").read_text())
            except json.JSONDecodeError:
                pass
        return c.exec.R if c.exec else None

    def _final(self, outcome: str, t: int, parent: str | None, chain: CandidateChain | None = None,
               error: str | None = None) -> FinalOutput:
        selected = None
        resume = None
        if error is not None and self._plan is not None:
            resume = {"iteration": t, "plan": self._plan.to_dict()}
        if chain is not None:
            selected = {"iteration": chain.iteration, "chain": chain.index, "confidence": chain.confidence,
                        "status": chain.status.value, "code_digest": _code_digest(chain.code),
                        "workdir": chain.workdir}
        if parent is not None:
            self.graph.add_node("final", {"outcome": outcome, "iterations": t, "selected": selected,
                                          "error": error, "resume": resume}, parent=parent, label=outcome)
        return FinalOutput(outcome=outcome, iterations=t, selected=selected,
                           code=None if chain is None else chain.code,
                           verdicts=None if chain is None else chain.verify,
                           result=None if chain is None else self._result_payload(chain),
                           graph=self.graph.export(), ledger=self.ledger.to_dict(), error=error,
                           resume=resume)

    def run(self) -> FinalOutput:
        budget = self.config.budget
        t = 0
        last = None
        try:
            plan, plan_node = initialize(self.inp, self.backend, self.graph)
            self._plan = plan
            last = plan_node
            for t in range(1, budget.max_iterations + 1):
                chains, _ = self.iterate(t, plan, plan_node)
                state, summary_node = summarize_and_log(t, chains, self.backend, self.graph, plan_node, self.ledger)
                last = summary_node
                sel = score_and_select(chains)
                if sel.terminal:
                    return self._final("selected", t, summary_node, sel.chain)
                if t == budget.max_iterations:
                    break
                if self.guidance is not None:
                    state.guidance = self.guidance(state)
                plan, plan_node = refine_plan(plan, state, self.backend, self.graph, summary_node)
                self._plan = plan
                last = plan_node
            return self._final("budget_exhausted", t, last)
        except BackendProtocolError as exc:
            return self._final("protocol_error", t, last or self._error_root(), error=str(exc))
        except BackendError as exc:
            return self._final("backend_error", t, last or self._error_root(), error=str(exc))
        except SandboxError as exc:
            return self._final("sandbox_error", t, last or self._error_root(), error=str(exc))

    def _error_root(self) -> str | None:
        return self.graph.nodes[-1].id if self.graph.nodes else None


def run_loop(inp: SupervisorInput, backend: AgentBackend, budget: Budget | None = None,
             config: LoopConfig | None = None, **kw) -> FinalOutput:
    """Iterate until a chain passes every primitive or the budget is spent."""
    config = config or LoopConfig()
    if budget is not None:
        config.budget = budget
    return Orchestrator(inp, backend, config, **kw).run()
