import json
import shutil
import sys
import time
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import reactor_input, scripted_run
from faulty import constant_pressure_trajectory
from unitphysics.orchestrator import (
    Budget,
    CandidateChain,
    ChainStatus,
    Diagnosis,
    ExecOutcome,
    ExternalBackend,
    InitializationError,
    IterationState,
    LoopConfig,
    SandboxConfig,
    ScriptedBackend,
    StateGraph,
    SupervisorPlan,
    Task,
    TokenLedger,
    TokenTrace,
    TransitionError,
    UndefinedConfidenceError,
    BackendProtocolError,
    classify,
    confidence_score,
    config_from_dict,
    diagnose,
    execute,
    fixtures_dir,
    generate_candidates,
    initialize,
    make_backend,
    prepare_workdir,
    prune,
    refine_plan,
    run_loop,
    score_and_select,
    summarize_and_log,
    template_summary,
    validate_chains,
    verify_candidate,
)
from unitphysics.primitives import default_suite


def chain(i, conf, status=ChainStatus.GENERATED, **kw):
    c = CandidateChain(index=i, code="", trace=TokenTrace(((1.0, 0.0),), (0, 1)), confidence=conf, **kw)
    c.status = status
    return c


def verified(i, n_passed, passed, conf=0.5, repaired=False):
    c = chain(i, conf)
    c.verify = {"passed": passed, "n_passed": n_passed, "failed": [], "verdicts": []}
    if repaired:
        c.diag = Diagnosis("dependency-missing", actions=[{"action": "install"}], repaired=True)
    c.status = ChainStatus.PASSED if passed else ChainStatus.VERIFY_FAILED
    return c


def inline_fixture(chains_per_iteration, tasks=None):
    return {
        "name": "inline",
        "plan": {"id": "p", "tasks": tasks or [{"id": "code", "role": "code", "prompt": "Reactor task: {query}"}],
                 "usage": {"input": 10, "output": 5}},
        "iterations": [{"chains": chs, "usage": {"input": 3, "output": 7}} for chs in chains_per_iteration],
    }


def code_chain(code, margin=0.9):
    return {"code": code, "trace": [[margin, 0.0]], "answer_span": [0, 1]}


@pytest.fixture
def sandbox(tmp_path):
    return SandboxConfig(root=str(tmp_path / "sb"), timeout=60)


# --- confidence and pruning ---------------------------------------------------

def test_confidence_two_tokens():
    assert confidence_score(TokenTrace(((0.9, 0.1), (0.9, 0.1)), (0, 2))) == pytest.approx(0.8, abs=1e-12)


def test_confidence_maximal_margin():
    assert confidence_score(TokenTrace(((1.0, 0.0),) * 5, (0, 5))) == 1.0


def test_confidence_hand_arithmetic():
    trace = TokenTrace(((0.6, 0.4), (0.7, 0.3), (0.5, 0.5)), (0, 3))
    assert confidence_score(trace) == pytest.approx(0.2, abs=1e-12)


def test_confidence_uses_only_answer_span():
    trace = TokenTrace(((0.5, 0.5), (0.9, 0.1), (0.2, 0.2)), (1, 2))
    assert confidence_score(trace) == pytest.approx(0.8, abs=1e-12)


@pytest.mark.parametrize("span", [None, (1, 1)])
def test_confidence_empty_span_is_undefined(span):
    with pytest.raises(UndefinedConfidenceError):
        confidence_score(TokenTrace(((0.9, 0.1), (0.9, 0.1)), span))


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=30))
def test_confidence_bounded(pairs):
    probs = tuple((max(a, b), min(a, b)) for a, b in pairs)
    c = confidence_score(TokenTrace(probs, (0, len(probs))))
    assert 0.0 <= c <= 1.0


def test_prune_threshold_example():
    chains = [chain(i, c) for i, c in enumerate([0.35, 0.62, 0.71, 0.88])]
    kept = prune(chains, 0.4)
    assert [c.index for c in kept] == [1, 2, 3]
    assert chains[0].status == ChainStatus.PRUNED


def test_prune_threshold_zero_keeps_all():
    chains = [chain(i, c) for i, c in enumerate([0.0, 0.1, 0.9])]
    assert len(prune(chains, 0.0)) == 3


def test_prune_keeps_single_best_when_all_below():
    chains = [chain(i, c) for i, c in enumerate([0.1, 0.3, 0.2])]
    kept = prune(chains, 0.4)
    assert [c.index for c in kept] == [1]
    assert [c.status for c in chains].count(ChainStatus.PRUNED) == 2


def test_prune_undefined_confidence_only_when_nothing_else():
    a = [chain(0, 0.5), chain(1, None)]
    assert [c.index for c in prune(a, 0.4)] == [0]
    assert a[1].status == ChainStatus.PRUNED
    b = [chain(0, None), chain(1, None)]
    assert len(prune(b, 0.4)) == 2


def test_prune_rejects_bad_threshold():
    with pytest.raises(ValueError):
        prune([chain(0, 0.5)], 1.5)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.floats(0, 1), st.floats(0, 1))
def test_prune_monotone_in_threshold(confs, t1, t2):
    lo, hi = sorted((t1, t2))
    keep_lo = {c.index for c in prune([chain(i, c) for i, c in enumerate(confs)], lo)}
    keep_hi = {c.index for c in prune([chain(i, c) for i, c in enumerate(confs)], hi)}
    best = max(range(len(confs)), key=lambda i: (confs[i], -i))
    assert keep_hi - {best} <= keep_lo


# --- chain lattice -------------------------------------------------------------

def test_lattice_rejects_passed_without_verification():
    c = chain(0, 0.9)
    with pytest.raises(TransitionError):
        c.transition(ChainStatus.PASSED)


def test_lattice_terminal_states():
    c = chain(0, 0.9)
    c.transition(ChainStatus.PRUNED)
    with pytest.raises(TransitionError):
        c.transition(ChainStatus.EXEC_FAILED)


def test_lattice_repair_then_pass():
    c = chain(0, 0.9)
    c.transition(ChainStatus.DIAG_REPAIRED)
    c.verify = {"passed": True, "n_passed": 5}
    c.transition(ChainStatus.PASSED)
    assert c.history == [ChainStatus.GENERATED, ChainStatus.DIAG_REPAIRED, ChainStatus.PASSED]


# --- backend contract -----------------------------------------------------------

def test_validate_chains_count():
    with pytest.raises(BackendProtocolError, match="expected 2"):
        validate_chains([code_chain("x")], 2)


@pytest.mark.parametrize("trace", [[[0.2, 0.5]], [[1.2, 0.1]], [[0.5, -0.1]]])
def test_validate_chains_probabilities(trace):
    with pytest.raises(BackendProtocolError):
        validate_chains([{"code": "x", "trace": trace, "answer_span": [0, 1]}], 1)


def test_validate_chains_span_outside_trace():
    with pytest.raises(BackendProtocolError):
        validate_chains([{"code": "x", "trace": [[0.9, 0.1]], "answer_span": [0, 3]}], 1)


def test_generate_four_chains(tmp_path):
    backend = ScriptedBackend(inline_fixture([[code_chain(f"print({i})") for i in range(4)]]))
    chains = generate_candidates("p", backend, 4, 1)
    assert len(chains) == 4 and all(c.status == ChainStatus.GENERATED for c in chains)


def test_generate_single_chain():
    backend = ScriptedBackend(inline_fixture([[code_chain("print(1)")]]))
    assert len(generate_candidates("p", backend, 1, 1)) == 1


def test_generate_without_span_gives_undefined_confidence():
    backend = ScriptedBackend(inline_fixture([[{"code": "x", "trace": [[0.9, 0.1]], "answer_span": None}]]))
    (c,) = generate_candidates("p", backend, 1, 1)
    assert c.confidence is None


def test_generate_wrong_count_is_contract_violation():
    backend = ScriptedBackend(inline_fixture([[code_chain("a"), code_chain("b")]]))
    with pytest.raises(BackendProtocolError):
        generate_candidates("p", backend, 4, 1)


def test_generate_k_must_be_positive():
    with pytest.raises(ValueError):
        generate_candidates("p", ScriptedBackend(inline_fixture([[]])), 0, 1)


# --- initialize ------------------------------------------------------------------

def test_initialize_two_task_plan():
    backend = ScriptedBackend(json.loads((fixtures_dir() / "three_stage.json").read_text()))
    graph = StateGraph()
    plan, _ = initialize(reactor_input(), backend, graph)
    assert len(plan.tasks) == 2
    assert [n.kind for n in graph.nodes] == ["input", "plan"]
    assert graph.is_connected()


def test_initialize_first_task_references_query():
    backend = make_backend("stub:three_stage.json")
    inp = reactor_input()
    plan, _ = initialize(inp, backend, StateGraph())
    assert inp.query.strip() in plan.tasks[0].prompt
    assert plan.tasks[0].prompt.startswith("Reactor task:")


def test_initialize_empty_query_rejected():
    from unitphysics.orchestrator import SupervisorInput

    with pytest.raises(ValueError):
        SupervisorInput("   ", default_suite())


def test_initialize_backend_failure():
    class Broken(ScriptedBackend):
        def plan(self, prompt, query):
            raise ConnectionError("model server down")

    graph = StateGraph()
    with pytest.raises(ConnectionError):
        initialize(reactor_input(), Broken(inline_fixture([])), graph)

    from unitphysics.orchestrator import BackendError

    class Refusing(ScriptedBackend):
        def plan(self, prompt, query):
            raise BackendError("model server down")

    graph = StateGraph()
    with pytest.raises(InitializationError, match="model server down"):
        initialize(reactor_input(), Refusing(inline_fixture([])), graph)
    assert graph.nodes[-1].kind == "error"


# --- sandbox ---------------------------------------------------------------------

def test_sandbox_ok(sandbox):
    wd = prepare_workdir(sandbox, "ok")
    out = execute('print("ok")', wd, sandbox)
    assert out.R.strip() == "ok" and out.E == "" and out.ok


def test_sandbox_missing_dependency(sandbox):
    wd = prepare_workdir(sandbox, "dep")
    out = execute("import cantera_not_here\n", wd, sandbox)
    assert out.R == "" and "ModuleNotFoundError: No module named" in out.E
    assert not out.ok


def test_sandbox_timeout(tmp_path):
    cfg = SandboxConfig(root=str(tmp_path), timeout=2)
    wd = prepare_workdir(cfg, "loop")
    t0 = time.perf_counter()
    out = execute("while True:\n    pass\n", wd, cfg)
    assert time.perf_counter() - t0 < 2 + 3
    assert out.timed_out and out.E.startswith("TIMEOUT")
    assert classify(out)[0] == "timeout"


def test_sandbox_blocks_writes_outside(sandbox, tmp_path):
    target = tmp_path / "outside.txt"
    wd = prepare_workdir(sandbox, "jail")
    out = execute(f"open({str(target)!r}, 'w').write('x')\n", wd, sandbox)
    assert not out.ok and "PermissionError" in out.E
    assert not target.exists()


def test_sandbox_allows_writes_inside(sandbox):
    wd = prepare_workdir(sandbox, "inside")
    out = execute("open('traj.jsonl', 'w').write('{}')\n", wd, sandbox)
    assert out.ok and out.evidence == ["traj.jsonl"]


def test_sandbox_blocks_subprocess(sandbox):
    wd = prepare_workdir(sandbox, "proc")
    out = execute("import subprocess\nsubprocess.run(['true'])\n", wd, sandbox)
    assert not out.ok and "PermissionError" in out.E


def test_sandbox_blocks_network(sandbox):
    wd = prepare_workdir(sandbox, "net")
    out = execute("import socket\nsocket.create_connection(('127.0.0.1', 9))\n", wd, sandbox)
    assert not out.ok and "PermissionError" in out.E


def test_sandbox_nonzero_exit_tail(sandbox):
    wd = prepare_workdir(sandbox, "fail")
    out = execute("import sys\nprint('partial')\nsys.exit('boom')\n", wd, sandbox)
    assert out.R == "" and "boom" in out.E and out.returncode == 1


def test_sandbox_setup_failure(tmp_path):
    from unitphysics.orchestrator import SandboxError

    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(SandboxError):
        prepare_workdir(SandboxConfig(root=str(blocker)), "x")


# --- diagnose --------------------------------------------------------------------

def fake_install_config(tmp_path, allow=("phasekit",)):
    return SandboxConfig(root=str(tmp_path / "sb"), allow_list=allow,
                         install_command=("{python}", str(fixtures_dir() / "fake_installer.py"), "{site}",
                                          "{package}"))


def test_diagnose_repairs_allow_listed_dependency(tmp_path):
    cfg = fake_install_config(tmp_path)
    wd = prepare_workdir(cfg, "rep")
    code = "import phasekit\nprint(phasekit.__name__)\n"
    first = execute(code, wd, cfg)
    d, out = diagnose(first, wd, cfg, lambda: execute(code, wd, cfg))
    assert d.category == "dependency-missing" and d.repaired
    assert [a["action"] for a in d.actions] == ["install", "re-execute"]
    assert out.ok and out.R.strip() == "phasekit"


def test_diagnose_none_when_clean(sandbox):
    d, out = diagnose(ExecOutcome("ok", "", 0), Path("."), sandbox, lambda: pytest.fail("no rerun"))
    assert d.category == "none" and d.actions == []


def test_diagnose_refuses_unlisted_package(tmp_path):
    cfg = fake_install_config(tmp_path, allow=())
    wd = prepare_workdir(cfg, "ref")
    first = execute("import phasekit\n", wd, cfg)
    d, out = diagnose(first, wd, cfg, lambda: pytest.fail("no rerun"))
    assert d.actions[0]["refused"] and not d.repaired
    assert not out.ok
    assert not (wd / "site" / "phasekit").exists()


def test_diagnose_repair_budget_zero(tmp_path):
    cfg = fake_install_config(tmp_path)
    wd = prepare_workdir(cfg, "zero")
    first = execute("import phasekit\n", wd, cfg)
    d, _ = diagnose(first, wd, cfg, lambda: pytest.fail("no rerun"), max_repairs=0)
    assert d.actions == [] and any("exhausted" in o for o in d.observations)


@pytest.mark.parametrize("E,cat", [
    ("Traceback\nImportError: cannot import name 'solve_ignition'", "syntax/API"),
    ("  File x\nSyntaxError: invalid syntax", "syntax/API"),
    ("unitphysics.reactor.integrate.IntegrationError: non-finite state", "runtime-numeric"),
    ("FloatingPointError: overflow", "runtime-numeric"),
    ("ModuleNotFoundError: No module named 'cantera'", "dependency-missing"),
])
def test_classify_categories(E, cat):
    assert classify(ExecOutcome("", E, 1))[0] == cat


# --- verify ----------------------------------------------------------------------

def evidence_chain(tmp_path, files):
    c = chain(0, 0.9)
    c.exec = ExecOutcome("", "", 0, evidence=files)
    return c


def test_verify_benchmark_trajectory_passes(tmp_path, benchmark_file, mech):
    shutil.copy(benchmark_file, tmp_path / "traj.jsonl")
    report, errors = verify_candidate(evidence_chain(tmp_path, ["traj.jsonl"]), default_suite(), tmp_path, mech)
    assert report["passed"] and errors == []


def test_verify_constant_pressure_fails_eos(tmp_path, mech):
    constant_pressure_trajectory(mech).write(tmp_path / "traj.jsonl")
    report, errors = verify_candidate(evidence_chain(tmp_path, ["traj.jsonl"]), default_suite(), tmp_path, mech)
    assert not report["passed"] and "eos_residual" in report["failed"]
    assert errors


def test_verify_without_files_not_evaluable(tmp_path, mech):
    report, errors = verify_candidate(evidence_chain(tmp_path, []), default_suite(), tmp_path, mech)
    assert not report["passed"]
    assert {v["status"] for v in report["verdicts"]} == {"not_evaluable"}
    assert "no evidence" in errors[0]


def test_verify_unreadable_file(tmp_path, mech):
    (tmp_path / "traj.jsonl").write_text("not json\n")
    report, errors = verify_candidate(evidence_chain(tmp_path, ["traj.jsonl"]), default_suite(), tmp_path, mech)
    assert not report["passed"] and "unreadable" in errors[0]


# --- summarize, refine, select -------------------------------------------------------

def failing_eos_chain():
    c = chain(2, 0.7, ChainStatus.VERIFY_FAILED)
    c.verify = {"passed": False, "n_passed": 4, "failed": ["eos_residual"],
                "verdicts": [{"id": "eos_residual", "passed": False, "residual": 0.31},
                             {"id": "bounds", "passed": True, "residual": 0.0}]}
    return c


def test_template_names_failing_chain():
    s = template_summary(1, [failing_eos_chain()])
    assert "chain 2" in s["text"] and "eos_residual" in s["text"]
    assert s["chains"][0]["worst"] == {"eos_residual": 0.31}
    assert s["request"] == "refine"


def test_template_terminal_success():
    c = verified(0, 5, True)
    s = template_summary(1, [c])
    assert s["terminal"] and s["request"] == "stop"


def test_template_all_pruned_requests_regeneration():
    s = template_summary(1, [chain(0, 0.1, ChainStatus.PRUNED)])
    assert s["all_pruned"] and s["request"] == "regenerate"


def test_summarize_writes_log_nodes():
    backend = ScriptedBackend(inline_fixture([[]]))
    graph = StateGraph()
    root = graph.add_node("input", {})
    ledger = TokenLedger()
    state, node = summarize_and_log(1, [failing_eos_chain()], backend, graph, root, ledger)
    assert [n.kind for n in graph.nodes] == ["input", "log_d", "log_v", "summary"]
    assert graph.node(node).payload == state.summary
    assert graph.find("log_v")[0].payload["entries"][0]["V"]["failed"] == ["eos_residual"]


def refine_backend(edits=(), tasks=()):
    fx = inline_fixture([[]])
    fx["iterations"][0]["refine"] = {"edits": list(edits), "tasks": list(tasks)}
    return ScriptedBackend(fx)


def test_refine_names_mechanism_file():
    fx = json.loads((fixtures_dir() / "three_stage.json").read_text())
    backend = ScriptedBackend(fx)
    fx["iterations"] = [fx["iterations"][1]] * 2
    plan = SupervisorPlan("p", [Task("code", "write it")])
    graph = StateGraph()
    root = graph.add_node("input", {})
    summary = template_summary(1, [failing_eos_chain()])
    plan, _ = refine_plan(plan, IterationState(2, summary), backend, graph, root)
    assert "h2o2.yaml" in plan.tasks[0].effective_prompt()
    assert plan.tasks[0].prompt == "write it"


def test_refine_empty_delta_increments_iteration():
    plan = SupervisorPlan("p", [Task("code", "write it")])
    graph = StateGraph()
    root = graph.add_node("input", {})
    before = [t.to_dict() for t in plan.tasks]
    plan, _ = refine_plan(plan, IterationState(1, {"text": ""}), refine_backend(), graph, root)
    assert plan.iteration == 1 and [t.to_dict() for t in plan.tasks] == before
    assert len(plan.history) == 1


def test_refine_guidance_recorded_and_prompted():
    plan = SupervisorPlan("p", [Task("code", "write it")])
    graph = StateGraph()
    root = graph.add_node("input", {})
    state = IterationState(1, {"text": ""}, guidance="use mechanism X")
    plan, _ = refine_plan(plan, state, refine_backend(), graph, root)
    assert graph.find("guidance")[0].payload["text"] == "use mechanism X"
    assert "use mechanism X" in plan.code_task().effective_prompt(plan.guidance)


def test_refine_rejects_edit_of_unknown_task():
    plan = SupervisorPlan("p", [Task("code", "write it")])
    graph = StateGraph()
    root = graph.add_node("input", {})
    with pytest.raises(BackendProtocolError):
        refine_plan(plan, IterationState(1, {}), refine_backend(edits=[{"task": "nope", "append": "x"}]), graph,
                    root)
    assert plan.tasks[0].revisions == []


def test_select_pass_count_order():
    sel = score_and_select([verified(0, 5, True), verified(1, 3, False)])
    assert sel.terminal and sel.chain.index == 0


def test_select_confidence_breaks_tie():
    sel = score_and_select([verified(0, 5, True, conf=0.7), verified(1, 5, True, conf=0.9)])
    assert sel.chain.index == 1


def test_select_prefers_no_repair():
    sel = score_and_select([verified(0, 5, True, conf=0.9, repaired=True), verified(1, 5, True, conf=0.5)])
    assert sel.chain.index == 1


def test_select_earliest_on_full_tie():
    sel = score_and_select([verified(0, 5, True), verified(1, 5, True)])
    assert sel.chain.index == 0


def test_select_none_without_aggregate_pass():
    sel = score_and_select([verified(0, 4, False), verified(1, 3, False)])
    assert not sel.terminal and sel.chain is None and sel.best.index == 0


def test_select_empty():
    sel = score_and_select([])
    assert sel.chain is None and not sel.terminal


# --- ledger and graph ----------------------------------------------------------------

def test_ledger_totals_by_role():
    led = TokenLedger()
    led.record("code", 10, 20, "generate")
    led.record("supervisor", 1, 2, "plan")
    led.record("code", 5, 5, "generate")
    assert led.by_role()["code"] == {"input": 15, "output": 25, "total": 40}
    assert led.total == 43
    assert led.to_dict()["total"] == {"input": 16, "output": 27, "total": 43}


def test_ledger_rejects_negative_and_unknown_role():
    led = TokenLedger()
    with pytest.raises(ValueError):
        led.record("code", -1, 0)
    with pytest.raises(ValueError):
        led.record("critic", 1, 1)


def test_graph_persists_and_reloads(tmp_path):
    g = StateGraph(path=tmp_path / "g.jsonl", clock=lambda: 1.0)
    r = g.add_node("input", {"q": 1})
    g.add_node("plan", {"tasks": []}, parent=r, label="initialize")
    back = StateGraph.load(tmp_path / "g.jsonl")
    assert back.export() == g.export()


def test_graph_second_root_rejected():
    g = StateGraph()
    g.add_node("input", {})
    with pytest.raises(ValueError):
        g.add_node("plan", {})


def test_graph_tampered_payload_detected(tmp_path):
    g = StateGraph(path=tmp_path / "g.jsonl")
    g.add_node("input", {"q": 1})
    text = (tmp_path / "g.jsonl").read_text().replace('"q":1', '"q":2')
    (tmp_path / "g.jsonl").write_text(text)
    with pytest.raises(ValueError, match="digest"):
        StateGraph.load(tmp_path / "g.jsonl")


# --- the loop ------------------------------------------------------------------------

def test_three_stage_selects_correct_candidate(three_stage):
    out = three_stage.output
    assert out.outcome == "selected" and out.iterations == 3
    assert out.selected["chain"] == 1 and out.selected["iteration"] == 3
    assert "constant" not in out.code or "integrate" in out.code
    assert out.verdicts["passed"]
    assert out.result["idt"] == pytest.approx(1.13203e-5, rel=1e-9)


EXPECTED_FINAL = {
    (1, 0): "exec_failed", (1, 1): "verify_failed", (1, 2): "pruned", (1, 3): "pruned",
    (2, 0): "verify_failed", (2, 1): "verify_failed", (2, 2): "pruned", (2, 3): "pruned",
    (3, 0): "exec_failed", (3, 1): "passed", (3, 2): "pruned", (3, 3): "pruned",
}


def test_three_stage_statuses(three_stage):
    last = {}
    for it, ch, _, new in three_stage.graph.transitions():
        last[(it, ch)] = new
    assert last == EXPECTED_FINAL
    assert ("generated", "diag_repaired") in {(a, b) for i, c, a, b in three_stage.graph.transitions()
                                              if (i, c) == (1, 1)}
    assert {"pruned", "exec_failed", "diag_repaired", "verify_failed", "passed"} <= three_stage.graph.statuses()


def test_three_stage_failure_reasons(three_stage):
    g = three_stage.graph
    def final(it, ch):
        return [n for n in g.find("chain", iteration=it, chain=ch)][-1].payload
    assert final(1, 0)["diag"]["category"] == "syntax/API"
    assert "eos_residual" in final(1, 1)["verify"]["failed"]
    assert final(2, 0)["verify"]["failed"] == ["units"]
    assert {"eos_residual", "bounds"} <= set(final(2, 1)["verify"]["failed"])
    assert final(3, 0)["diag"]["category"] == "runtime-numeric"
    assert "IntegrationError" in final(3, 0)["exec"]["E"]


def test_three_stage_pruning_exact(three_stage):
    g = three_stage.graph
    pruned = {(n.iteration, n.chain) for n in g.find("chain", status="pruned")}
    assert pruned == {k for k, v in EXPECTED_FINAL.items() if v == "pruned"}
    expected_conf = {(1, 0): 0.62, (1, 1): 0.71, (1, 2): 0.35, (1, 3): 0.2, (2, 0): 0.66, (2, 1): 0.55,
                     (2, 2): 0.3, (2, 3): None, (3, 0): 0.74, (3, 1): 0.86, (3, 2): 0.38, (3, 3): 0.1}
    for n in g.find("chain", status="generated"):
        want = expected_conf[(n.iteration, n.chain)]
        got = n.payload["confidence"]
        if want is None:
            assert got is None and n.payload["flag"] == "undefined_confidence"
        else:
            assert abs(got - want) <= 1e-12


def test_three_stage_ledger_matches_fixture(three_stage):
    led = three_stage.output.ledger
    assert led["total"] == {"input": 22600, "output": 19560, "total": 42160}
    assert sum(u[1] for u in three_stage.usage) == 22600
    assert sum(u[2] for u in three_stage.usage) == 19560
    assert sum(r["total"] for r in led["roles"].values()) == led["total"]["total"]
    assert led["roles"]["diagnostic"] == {"input": 3 * 640, "output": 3 * 120, "total": 3 * 760}
    assert led["roles"]["verification"] == {"input": 3 * 910, "output": 3 * 150, "total": 3 * 1060}


def test_three_stage_graph_invariants(three_stage):
    g = three_stage.graph
    assert g.is_connected()
    changes = len(g.transitions())
    generated = len(g.find("chain", status="generated"))
    assert len(g.find("chain")) == changes + generated
    n_chain_edges = sum(1 for e in g.edges if g.node(e.dst).kind == "chain")
    assert n_chain_edges == len(g.find("chain"))
    assert g.nodes[-1].kind == "final"
    reloaded = StateGraph.load(Path(three_stage.config.sandbox.root) / "graph.jsonl")
    assert reloaded.export() == g.export()


def test_three_stage_retrieval_and_refinement(three_stage):
    g = three_stage.graph
    (r,) = g.find("retrieval")
    assert r.payload["granted"] and r.payload["remaining"] == 1
    plans = g.find("plan")
    assert len(plans) == 3
    assert "h2o2.yaml" in " ".join(plans[-1].payload["tasks"][0]["revisions"])


def test_three_stage_logs_per_iteration(three_stage):
    g = three_stage.graph
    for kind in ("log_d", "log_v", "summary"):
        assert [n.iteration for n in g.find(kind)] == [1, 2, 3]
    s3 = g.find("summary")[-1].payload
    assert s3["terminal"]


def test_three_stage_deterministic_and_parallel(three_stage, tmp_path):
    again = scripted_run(tmp_path, workers=4)
    assert again.graph.export_json() == three_stage.graph.export_json()
    assert again.output.ledger == three_stage.output.ledger


def test_budget_exhausted(tmp_path):
    run = scripted_run(tmp_path, max_iterations=1)
    out = run.output
    assert out.outcome == "budget_exhausted" and out.selected is None and out.iterations == 1
    assert run.graph.is_connected() and run.graph.nodes[-1].payload["outcome"] == "budget_exhausted"
    assert "passed" not in run.graph.statuses()
    assert len(run.graph.find("summary")) == 1


def test_wrong_count_is_protocol_error(tmp_path):
    out = scripted_run(tmp_path, fixture="wrong_count.json").output
    assert out.outcome == "protocol_error" and "expected 4" in out.error
    assert out.resume["iteration"] == 1


def write_result_code(mark):
    return f"import json\njson.dump({{'mark': {mark!r}}}, open('result.json', 'w'))\n"


def test_single_iteration_success(tmp_path, benchmark_file):
    code = f"import shutil\nshutil.copy({str(benchmark_file)!r}, 'traj.jsonl')\nprint('copied')\n"
    backend = ScriptedBackend(inline_fixture([[code_chain(code)]]))
    cfg = LoopConfig(k=1, sandbox=SandboxConfig(root=str(tmp_path)))
    out = run_loop(reactor_input(), backend, config=cfg)
    assert out.outcome == "selected" and out.iterations == 1
    assert out.result.strip() == "copied"
    graph_iters = {n["iteration"] for n in out.graph["nodes"] if n["kind"] == "chain"}
    assert graph_iters == {1}


def test_backend_failure_during_refine_is_recorded(tmp_path):
    fx = inline_fixture([[code_chain("print('nothing')")]])
    backend = ScriptedBackend(fx)

    from unitphysics.orchestrator import BackendError

    def refine(*a, **k):
        raise BackendError("refine timed out")

    backend.refine = refine
    cfg = LoopConfig(k=1, sandbox=SandboxConfig(root=str(tmp_path)))
    out = run_loop(reactor_input(), backend, config=cfg)
    assert out.outcome == "backend_error" and "refine" in out.error
    assert out.resume["plan"]["tasks"][0]["id"] == "code"
    assert out.graph["nodes"][-1]["kind"] == "final"


def test_guidance_callback_reaches_prompt(tmp_path):
    prompts = []
    fx = inline_fixture([[code_chain("print(1)")], [code_chain("print(2)")]])
    backend = ScriptedBackend(fx)
    original = backend.generate

    def generate(prompt, k, iteration):
        prompts.append(prompt)
        return original(prompt, k, iteration)

    backend.generate = generate
    cfg = LoopConfig(k=1, budget=Budget(max_iterations=2), sandbox=SandboxConfig(root=str(tmp_path)))
    out = run_loop(reactor_input(), backend, config=cfg, guidance=lambda s: "use mechanism X")
    assert out.outcome == "budget_exhausted"
    assert "use mechanism X" not in prompts[0] and "use mechanism X" in prompts[1]


def test_retrieval_refused_past_budget(tmp_path):
    ch = dict(code_chain("print(1)"), retrieval=["a", "b", "c"])
    backend = ScriptedBackend(inline_fixture([[ch]]))
    cfg = LoopConfig(k=1, budget=Budget(max_iterations=1, retrieval=2), sandbox=SandboxConfig(root=str(tmp_path)))
    out = run_loop(reactor_input(), backend, config=cfg)
    granted = [n["payload"]["granted"] for n in out.graph["nodes"] if n["kind"] == "retrieval"]
    assert granted == [True, True, False]


# --- external backend -------------------------------------------------------------------

def test_external_pipe_backend_matches_stub(tmp_path):
    fixture = fixtures_dir() / "three_stage.json"
    cmd = f"{sys.executable} -m unitphysics.orchestrator.stub_server {fixture}"
    usage = []
    backend = ExternalBackend(f"cmd:{cmd}", on_usage=lambda r, i, o, c: usage.append((r, i, o)))
    try:
        plan, _ = initialize(reactor_input(), backend, StateGraph())
        chains = generate_candidates("p", backend, 4, 1)
    finally:
        backend.close()
    assert len(plan.tasks) == 2 and len(chains) == 4
    assert usage == [("supervisor", 1450, 310), ("code", 2100, 5200)]
    assert abs(chains[1].confidence - 0.71) <= 1e-12


def test_external_tcp_backend(tmp_path):
    import socket
    import subprocess

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    fixture = fixtures_dir() / "three_stage.json"
    proc = subprocess.Popen([sys.executable, "-m", "unitphysics.orchestrator.stub_server", str(fixture),
                             "--tcp", str(port)])
    try:
        deadline = time.time() + 20
        while True:
            try:
                socket.create_connection(("127.0.0.1", port), timeout=0.5).close()
                break
            except OSError:
                if time.time() > deadline:
                    raise
                time.sleep(0.1)
        backend = make_backend(f"external:tcp:127.0.0.1:{port}")
        plan, _ = initialize(reactor_input(), backend, StateGraph())
        backend.close()
        assert plan.id == "reactor-ignition"
    finally:
        proc.kill()
        proc.wait()


def test_external_error_response_raises():
    from unitphysics.orchestrator import BackendError

    fixture = fixtures_dir() / "three_stage.json"
    backend = ExternalBackend(f"cmd:{sys.executable} -m unitphysics.orchestrator.stub_server {fixture}")
    try:
        with pytest.raises(BackendError, match="no iteration 9"):
            backend.generate("p", 4, 9)
    finally:
        backend.close()


# --- run config ------------------------------------------------------------------------

def test_run_config_defaults():
    cfg = config_from_dict({})
    assert cfg.k == 4 and cfg.threshold == 0.4 and cfg.sandbox.timeout == 120
    assert cfg.sandbox.network is False


@pytest.mark.parametrize("doc", [{"k": 0}, {"threshold": 2}, {"bogus": 1}, {"budget": {"max_iterations": 0}},
                                 {"sandbox": {"timeout": -1}}, {"sandbox": {"install_command": "pip"}}])
def test_run_config_rejects(doc):
    from unitphysics.orchestrator import RunConfigError

    with pytest.raises(RunConfigError):
        config_from_dict(doc)


def test_run_config_expands_fixture_paths():
    from unitphysics.orchestrator import load_run_config

    cfg = load_run_config(fixtures_dir() / "three_stage_run.yaml")
    assert Path(cfg.query_file).is_file()
    assert cfg.sandbox.allow_list == ("phasekit",)
    assert str(fixtures_dir()) in cfg.sandbox.install_command[1]
