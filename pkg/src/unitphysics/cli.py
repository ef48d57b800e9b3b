"""Command-line entry point: ``unitphysics {solve,verify,orchestrate,bench,report}``.

Every parameter resolves, lowest to highest precedence, from its built-in
default, the ``--config`` file (a subcommand section or flat keys), an
``UNITPHYSICS_<NAME>`` environment variable, then the command-line flag.
The effective configuration is echoed into each output document, and
wall-clock data goes to a ``timing.json`` sidecar so the documents stay
reproducible.

Exit codes
    0  success
    1  verify: at least one failing verdict
    2  configuration, input or parse error
    3  solve: integration failure or no ignition; bench: reference run failed
    4  orchestrate: iteration budget exhausted
    5  orchestrate: backend protocol violation or backend failure
    6  orchestrate: sandbox could not be prepared
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import yaml

ENV_PREFIX = "UNITPHYSICS_"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUN, EXIT_BUDGET, EXIT_BACKEND, EXIT_SANDBOX = range(7)
RESULT_FORMAT = "unitphysics.result"


class CLIError(Exception):
    def __init__(self, code: int, kind: str, message: str, **details):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.details = details


# --- parameter tables -----------------------------------------------------------

def _composition(text) -> dict[str, float]:
    if isinstance(text, dict):
        return {str(k): float(v) for k, v in text.items()}
    out = {}
    for part in str(text).split(","):
        name, sep, val = part.partition(":")
        if not sep or not name.strip():
            raise ValueError(f"bad composition entry {part!r}; use NAME:VALUE,...")
        out[name.strip()] = float(val)
    return out


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _strings(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(x) for x in text]
    return [x.strip() for x in str(text).split(",") if x.strip()]


@dataclass(frozen=True)
class Param:
    name: str  # dest and config key
    flag: str
    type: Callable[[Any], Any] = str
    default: Any = None
    help: str = ""
    repeat: bool = False


COMMON = [
    Param("out_dir", "--out-dir", str, "unitphysics-out", "directory for default outputs"),
    Param("seed", "--seed", int, 0, "seed recorded with the run (no command draws random numbers)"),
]

SOLVE = [
    Param("mech", "--mech", str, None, "mechanism YAML (default: shipped H2/O2)"),
    Param("T0", "--T0", float, 1300.0, "initial temperature [K]"),
    Param("p0", "--p0", float, 101325.0, "initial pressure [Pa]"),
    Param("phi", "--phi", float, 1.0, "equivalence ratio (ignored with --X)"),
    Param("X", "--X", _composition, None, "mole fractions, e.g. H2:2,O2:1"),
    Param("oxidizer", "--oxidizer", str, "O2", "oxidizer preset for --phi: O2 or air"),
    Param("dt", "--dt", float, 1e-10, "fixed time step [s]"),
    Param("t_end", "--t-end", float, 2e-5, "end time [s]"),
    Param("integrator", "--integrator", str, "rk4", "rk4 or euler"),
    Param("idt_criterion", "--idt-criterion", str, "max_dTdt", "max_dTdt or threshold_rise"),
    Param("threshold_dT", "--threshold-dT", float, 100.0, "rise for threshold_rise [K]"),
    Param("stride", "--stride", int, 100, "output stride in steps"),
    Param("T_guard", "--T-guard", float, 4000.0, "temperature guard [K]"),
    Param("out", "--out", str, None, "trajectory file (default OUT_DIR/traj.jsonl)"),
    Param("result", "--result", str, None, "result document (default OUT_DIR/result.json)"),
]

VERIFY = [
    Param("suite", "--suite", str, None, "suite JSON (default: shipped reactor suite)"),
    Param("trajectory", "--trajectory", str, None, "trajectory evidence file"),
    Param("pair", "--pair", str, None, "state-pair evidence file", repeat=True),
    Param("mech", "--mech", str, None, "mechanism YAML for molecular weights"),
    Param("report", "--report", str, None, "verdict report (default OUT_DIR/verdicts.json)"),
    Param("workers", "--workers", int, 1, "threads for independent primitives"),
]

ORCHESTRATE = [
    Param("query_file", "--query-file", str, None, "supervisor query text"),
    Param("suite", "--suite", str, None, "suite JSON (default: shipped reactor suite)"),
    Param("backend", "--backend", str, None, "stub:<fixture> or external:<endpoint>"),
    Param("k", "--k", int, None, "chains per iteration"),
    Param("threshold", "--threshold", float, None, "confidence pruning threshold"),
    Param("max_iterations", "--max-iterations", int, None, "iteration budget"),
    Param("max_repairs", "--max-repairs", int, None, "diagnostic repairs per chain"),
    Param("retrieval", "--retrieval", int, None, "retrieval request budget"),
    Param("timeout", "--timeout", float, None, "sandbox wall-clock limit per run [s]"),
    Param("network", "--network", _bool, None, "allow network in the sandbox"),
    Param("allow", "--allow", str, None, "add a package to the install allow-list", repeat=True),
    Param("workers", "--workers", int, None, "chains evaluated concurrently"),
    Param("guidance", "--guidance", str, None, "ITER:TEXT guidance for the plan update after ITER",
          repeat=True),
    Param("mech", "--mech", str, None, "mechanism YAML for verification"),
    Param("sandbox_root", "--sandbox-root", str, None, "directory for sandbox work directories"),
    Param("export_graph", "--export-graph", str, None, "graph export (default OUT_DIR/graph.json)"),
    Param("ledger", "--ledger", str, None, "token ledger (default OUT_DIR/ledger.json)"),
    Param("output", "--output", str, None, "final output (default OUT_DIR/final.json)"),
]

BENCH = [
    Param("candidate", "--candidate", str, None, "candidate program (accepts --T0 --p0 --dt --t-end --out)"),
    Param("label", "--label", str, "candidate", "candidate label in the records"),
    Param("T0", "--T0", _floats, None, "comma-separated T0 list [K] (default 1300..2400 step 100)"),
    Param("p0", "--p0", float, 101325.0, "initial pressure [Pa]"),
    Param("dt", "--dt", float, 1e-10, "reference time step [s]"),
    Param("candidate_dt", "--candidate-dt", float, None, "time step passed to the candidate (default --dt)"),
    Param("t_end", "--t-end", float, 2e-5, "end time [s]"),
    Param("workers", "--workers", int, 1, "sweep points run concurrently"),
    Param("timeout", "--timeout", float, 1800.0, "per-run wall-clock limit [s]"),
    Param("csv", "--csv", str, None, "records CSV (default OUT_DIR/bench.csv)"),
    Param("svg", "--svg", str, None, "plot (default OUT_DIR/bench.svg)"),
]

REPORT = [
    Param("trajectory", "--trajectory", str, None, "trajectory to tabulate for plotting"),
    Param("verdicts", "--verdicts", str, None, "verdict report from verify"),
    Param("final", "--final", str, None, "final output from orchestrate"),
    Param("bench", "--bench", str, None, "records CSV from bench"),
    Param("plot_data", "--plot-data", str, None, "trajectory plot data (default OUT_DIR/trajectory_plot.csv)"),
    Param("summary", "--summary", str, None, "summary document (default OUT_DIR/report.json)"),
    Param("svg", "--svg", str, None, "temperature history plot (default OUT_DIR/trajectory.svg)"),
]

COMMANDS = {"solve": SOLVE, "verify": VERIFY, "orchestrate": ORCHESTRATE, "bench": BENCH, "report": REPORT}
HELP = {
    "solve": "integrate the constant-volume reactor and report the ignition delay",
    "verify": "evaluate a primitive suite on trajectory and state-pair evidence",
    "orchestrate": "run the plan/generate/verify/refine loop against an agent backend",
    "bench": "time, memory and L2 error of a candidate program against the reference",
    "report": "collect run documents into plot data and a summary",
}


# --- configuration resolution ------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    params: dict[str, Any]
    config_path: str | None = None
    sources: dict[str, str] = field(default_factory=dict)

    @property
    def out_dir(self) -> Path:
        return Path(self.params["out_dir"])

    @property
    def seed(self) -> int:
        return self.params["seed"]

    def out(self, key: str, default_name: str) -> Path:
        value = self.params.get(key)
        return Path(value) if value else self.out_dir / default_name

    def echo(self) -> dict:
        return {"command": self.command, "config_file": self.config_path,
                "params": {k: self.params[k] for k in sorted(self.params)}}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unitphysics", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog="\n".join(__doc__.splitlines()[1:]))
    sub = ap.add_subparsers(dest="command", required=True)
    for name, params in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", default=argparse.SUPPRESS, help="YAML/JSON config file")
        for prm in COMMON + params:
            env = ENV_PREFIX + prm.name.upper()
            default = "" if prm.default is None else f" [default {prm.default}]"
            p.add_argument(prm.flag, dest=prm.name, default=argparse.SUPPRESS,
                           action="append" if prm.repeat else "store",
                           help=f"{prm.help}{default} (env {env})")
    return ap


def _coerce(prm: Param, value, source: str):
    try:
        if prm.repeat:
            if isinstance(value, dict):  # e.g. guidance given as {iteration: text}
                value = [f"{k}:{v}" for k, v in value.items()]
            items = value if isinstance(value, list) else [value]
            return [prm.type(v) for v in items]
        if value is None:
            return None
        return prm.type(value)
    except (TypeError, ValueError) as exc:
        raise CLIError(EXIT_CONFIG, "config", f"bad value for {prm.name} from {source}: {exc}",
                       parameter=prm.name, source=source) from None


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CLIError(EXIT_CONFIG, "config", f"config file not found: {path}", path=str(path))
    try:
        text = path.read_text()
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise CLIError(EXIT_CONFIG, "config", f"cannot parse {path}: {exc}", path=str(path)) from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise CLIError(EXIT_CONFIG, "config", f"{path}: top level must be a mapping", path=str(path))
    return doc


def resolve(command: str, flags: dict, environ: dict | None = None) -> RunConfig:
    """Merge defaults, config file, environment and flags for one subcommand."""
    environ = os.environ if environ is None else environ
    params_spec = COMMON + COMMANDS[command]
    config_path = flags.pop("config", None) or environ.get(ENV_PREFIX + "CONFIG")
    file_doc = load_config_file(config_path) if config_path else {}
    section = file_doc.get(command) if isinstance(file_doc.get(command), dict) else None
    file_params = {k: v for k, v in file_doc.items() if k not in COMMANDS}
    if section is not None:
        file_params.update(section)
    values, sources = {}, {}
    for prm in params_spec:
        values[prm.name], sources[prm.name] = ([] if prm.repeat else prm.default), "default"
        if prm.name in file_params:
            values[prm.name] = _coerce(prm, file_params[prm.name], f"config file {config_path}")
            sources[prm.name] = "file"
        env = environ.get(ENV_PREFIX + prm.name.upper())
        if env is not None:
            values[prm.name] = _coerce(prm, env.split(os.pathsep) if prm.repeat else env,
                                       f"environment {ENV_PREFIX}{prm.name.upper()}")
            sources[prm.name] = "env"
        if prm.name in flags:
            values[prm.name] = _coerce(prm, flags[prm.name], f"flag {prm.flag}")
            sources[prm.name] = "flag"
    cfg = RunConfig(command, values, str(config_path) if config_path else None, sources)
    cfg.extra = {k: v for k, v in file_params.items() if k not in values}
    return cfg


# --- output helpers ---------------------------------------------------------------------

def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_finite(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_timing(cfg: RunConfig, started: float, extra: dict | None = None) -> None:
    write_json(cfg.out_dir / "timing.json", {"command": cfg.command, "started_unix": started,
                                             "finished_unix": time.time(),
                                             "elapsed_s": time.time() - started, **(extra or {})})


def emit_error(command: str, err: CLIError) -> None:
    doc = {"event": "error", "command": command, "exit_code": err.code, "error": err.kind,
           "message": str(err), **err.details}
    sys.stderr.write(json.dumps(_finite(doc), sort_keys=True) + "\n")


def emit_summary(command: str, code: int, **fields) -> None:
    print(json.dumps(_finite({"event": "done", "command": command, "exit_code": code, **fields}), sort_keys=True))


def _mechanism(path: str | None):
    from .thermochem import MechanismError, default_mechanism, load_mechanism

    try:
        return default_mechanism() if not path else load_mechanism(path)
    except FileNotFoundError:
        raise CLIError(EXIT_CONFIG, "mechanism", f"mechanism file not found: {path}", path=str(path)) from None
    except (MechanismError, OSError, yaml.YAMLError) as exc:
        raise CLIError(EXIT_CONFIG, "mechanism", f"invalid mechanism {path}: {exc}", path=str(path)) from None


def _suite(path: str | None):
    from .primitives import SuiteError, default_suite, load_suite

    try:
        return default_suite() if not path else load_suite(path)
    except FileNotFoundError as exc:
        raise CLIError(EXIT_CONFIG, "suite", str(exc), path=str(path)) from None
    except SuiteError as exc:
        raise CLIError(EXIT_CONFIG, "suite", f"invalid suite: {exc}", path=str(path)) from None


# --- subcommands --------------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    from .reactor import ConfigError, IntegrationError, NoIgnitionError, ReactorConfig, detect_idt, integrate

    p = cfg.params
    mech = _mechanism(p["mech"])
    X = p["X"]
    if X:
        total = sum(X.values())
        if not total > 0 or any(v < 0 for v in X.values()):
            raise CLIError(EXIT_CONFIG, "config", f"composition needs non-negative values with a positive sum: {X}")
        X = {k: v / total for k, v in X.items()}
    try:
        rc = ReactorConfig(T0=p["T0"], p0=p["p0"], X=X, phi=None if X else p["phi"],
                           oxidizer=p["oxidizer"], dt=p["dt"], t_end=p["t_end"], integrator=p["integrator"],
                           idt_criterion=p["idt_criterion"], threshold_dT=p["threshold_dT"],
                           T_guard=p["T_guard"], output_stride=p["stride"])
        rc.initial_state(mech)
    except (ConfigError, KeyError, ValueError) as exc:
        raise CLIError(EXIT_CONFIG, "config", f"invalid reactor configuration: {exc}") from None
    traj_path, result_path = cfg.out("out", "traj.jsonl"), cfg.out("result", "result.json")
    traj_path.parent.mkdir(parents=True, exist_ok=True)
    result = {"format": RESULT_FORMAT, "version": 1, "mechanism_id": mech.id, "config_hash": rc.config_hash(),
              "criterion": rc.idt_criterion, "trajectory": str(traj_path), "config": cfg.echo()}
    try:
        traj = integrate(rc, mech)
    except IntegrationError as exc:
        if exc.trajectory is not None:
            exc.trajectory.metadata["run_config"] = cfg.echo()
            exc.trajectory.write(traj_path)
        write_json(result_path, {**result, "status": "integration_failed", "idt": None,
                                 "failure": exc.to_dict()})
        raise CLIError(EXIT_RUN, "integration", str(exc), t=exc.t, quantity=exc.quantity,
                       result=str(result_path)) from None
    except ValueError as exc:
        raise CLIError(EXIT_CONFIG, "config", str(exc)) from None
    traj.metadata["run_config"] = cfg.echo()
    traj.write(traj_path)
    try:
        idt = detect_idt(traj, rc.idt_criterion, rc.threshold_dT)
    except NoIgnitionError as exc:
        write_json(result_path, {**result, "status": "no_ignition", "idt": None, "message": str(exc)})
        raise CLIError(EXIT_RUN, "no_ignition", f"no ignition detected: {exc}", result=str(result_path)) from None
    write_json(result_path, {**result, "status": "ok", "idt": idt, "T_max": float(traj.T.max()),
                             "n_records": len(traj)})
    emit_summary("solve", EXIT_OK, idt=idt, criterion=rc.idt_criterion, result=str(result_path))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .primitives import Evidence, EvidenceError, StatePair, evaluate_suite
    from .reactor import Trajectory, TrajectoryFormatError

    p = cfg.params
    suite = _suite(p["suite"])
    mech = _mechanism(p["mech"])
    try:
        traj = Trajectory.read(p["trajectory"]) if p["trajectory"] else None
        pairs = [StatePair.read(x) for x in p["pair"]]
    except FileNotFoundError as exc:
        raise CLIError(EXIT_CONFIG, "evidence", f"evidence file not found: {exc.filename}",
                       path=str(exc.filename)) from None
    except (TrajectoryFormatError, EvidenceError, ValueError, KeyError) as exc:
        raise CLIError(EXIT_CONFIG, "evidence", f"unreadable evidence: {exc}") from None
    if traj is None and not pairs:
        raise CLIError(EXIT_CONFIG, "evidence", "give --trajectory and/or --pair")
    report = evaluate_suite(suite, Evidence(trajectory=traj, mech=mech, pairs=pairs), workers=p["workers"])
    path = cfg.out("report", "verdicts.json")
    write_json(path, {**report.to_dict(), "config": cfg.echo()})
    if report.has_spec_errors:
        bad = [v.id for v in report.verdicts if v.status == "spec_error"]
        raise CLIError(EXIT_CONFIG, "spec", f"suite does not apply to the evidence: {bad}", report=str(path))
    code = EXIT_OK if report.passed else EXIT_FAIL
    emit_summary("verify", code, passed=report.passed, failed=[v.id for v in report.failed], report=str(path))
    return code


def _parse_guidance(items: Sequence[str]) -> dict[int, str]:
    out = {}
    for item in items:
        it, sep, text = item.partition(":")
        try:
            out[int(it)] = text
        except ValueError:
            raise CLIError(EXIT_CONFIG, "config", f"guidance must be ITER:TEXT, got {item!r}") from None
        if not sep:
            raise CLIError(EXIT_CONFIG, "config", f"guidance must be ITER:TEXT, got {item!r}")
    return out


def cmd_orchestrate(cfg: RunConfig) -> int:
    from dataclasses import replace

    from .orchestrator import (BackendError, Budget, RunConfigError, StateGraph, SupervisorInput,
                               config_from_dict, make_backend, run_loop)

    p = cfg.params
    base = Path(cfg.config_path).resolve().parent if cfg.config_path else Path.cwd()
    run_doc = dict(getattr(cfg, "extra", {}))
    for key in ("backend", "k", "threshold", "workers", "query_file", "suite", "mechanism"):
        name = "mech" if key == "mechanism" else key
        if p.get(name) is None:
            continue
        value = p[name]
        # paths from flags or the environment are relative to the working directory
        if key in ("query_file", "suite", "mechanism") and cfg.sources[name] in ("flag", "env"):
            value = str(Path(value).resolve())
        run_doc[key] = value
    try:
        oc = config_from_dict(run_doc, base=base)
    except RunConfigError as exc:
        raise CLIError(EXIT_CONFIG, "config", str(exc)) from None
    b = oc.budget
    try:
        oc.budget = Budget(max_iterations=b.max_iterations if p["max_iterations"] is None else p["max_iterations"],
                           max_repairs=b.max_repairs if p["max_repairs"] is None else p["max_repairs"],
                           retrieval=b.retrieval if p["retrieval"] is None else p["retrieval"])
        sb = oc.sandbox
        oc.sandbox = replace(sb, timeout=sb.timeout if p["timeout"] is None else p["timeout"],
                             network=sb.network if p["network"] is None else p["network"],
                             allow_list=tuple(sb.allow_list) + tuple(p["allow"]),
                             root=p["sandbox_root"] or sb.root)
    except ValueError as exc:
        raise CLIError(EXIT_CONFIG, "config", str(exc)) from None
    oc.guidance.update(_parse_guidance(p["guidance"]))

    def rel(path):
        q = Path(path)
        return q if q.is_absolute() else base / q

    if not oc.query_file:
        raise CLIError(EXIT_CONFIG, "config", "no query: give --query-file or query_file in the config")
    qpath = rel(oc.query_file)
    if not qpath.is_file():
        raise CLIError(EXIT_CONFIG, "config", f"query file not found: {qpath}", path=str(qpath))
    suite_path = str(rel(oc.suite)) if oc.suite else None
    suite = _suite(suite_path)
    mech = _mechanism(str(rel(oc.mechanism)) if oc.mechanism else None)
    try:
        inp = SupervisorInput(qpath.read_text(), suite,
                              Path(suite_path).read_text() if suite_path else "")
    except ValueError as exc:
        raise CLIError(EXIT_CONFIG, "config", str(exc)) from None
    try:
        backend = make_backend(oc.backend, base=base)
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        raise CLIError(EXIT_CONFIG, "backend", f"cannot open backend {oc.backend}: {exc}") from None
    except (BackendError, OSError) as exc:
        raise CLIError(EXIT_BACKEND, "backend_error", f"backend unreachable: {exc}") from None
    graph = StateGraph()
    guidance = (lambda state: oc.guidance.get(state.iteration)) if oc.guidance else None
    try:
        out = run_loop(inp, backend, config=oc.loop_config(mech), graph=graph, guidance=guidance)
    finally:
        backend.close()
    echo = {**cfg.echo(), "orchestration": oc.to_dict()}
    final_path = cfg.out("output", "final.json")
    write_json(final_path, {**out.to_dict(), "config": echo})
    write_json(cfg.out("export_graph", "graph.json"), {**out.graph, "config": echo})
    write_json(cfg.out("ledger", "ledger.json"), {**out.ledger, "config": echo})
    if out.code is not None:
        (cfg.out_dir / "selected.py").write_text(out.code)
    code = {"selected": EXIT_OK, "budget_exhausted": EXIT_BUDGET, "protocol_error": EXIT_BACKEND,
            "backend_error": EXIT_BACKEND, "sandbox_error": EXIT_SANDBOX}[out.outcome]
    cfg.timing = {"node_timestamps": graph.timestamps()}
    if out.error:
        emit_error("orchestrate", CLIError(code, out.outcome, out.error, output=str(final_path)))
    emit_summary("orchestrate", code, outcome=out.outcome, iterations=out.iterations, selected=out.selected,
                 output=str(final_path))
    return code


def cmd_bench(cfg: RunConfig) -> int:
    from .bench import DEFAULT_SWEEP, BenchError, plot_svg, records_csv, run_bench

    p = cfg.params
    if not p["candidate"]:
        raise CLIError(EXIT_CONFIG, "config", "bench needs --candidate")
    if not Path(p["candidate"]).is_file():
        raise CLIError(EXIT_CONFIG, "config", f"candidate program not found: {p['candidate']}",
                       path=p["candidate"])
    T0s = p["T0"] or list(DEFAULT_SWEEP)
    work = cfg.out_dir / "bench_runs"
    try:
        records = run_bench(p["candidate"], p["label"], T0s, p0=p["p0"], dt=p["dt"], t_end=p["t_end"],
                            candidate_dt=p["candidate_dt"], workers=p["workers"], workdir=work,
                            timeout=p["timeout"])
    except BenchError as exc:
        raise CLIError(EXIT_RUN, "bench", str(exc)) from None
    csv_path, svg_path = cfg.out("csv", "bench.csv"), cfg.out("svg", "bench.svg")
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(records_csv(records))
    plot_svg(records, svg_path)
    write_json(cfg.out_dir / "bench_config.json", cfg.echo())
    failed = [r.T0 for r in records if r.status != "ok"]
    emit_summary("bench", EXIT_OK, records=len(records), failed_T0=failed, csv=str(csv_path))
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    from .bench import BenchError, read_records
    from .reactor import NoIgnitionError, Trajectory, TrajectoryFormatError, detect_idt

    p = cfg.params
    if not any(p[k] for k in ("trajectory", "verdicts", "final", "bench")):
        raise CLIError(EXIT_CONFIG, "config", "give at least one of --trajectory --verdicts --final --bench")
    summary: dict[str, Any] = {"format": "unitphysics.report", "version": 1, "config": cfg.echo()}

    def read_doc(path):
        try:
            return json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise CLIError(EXIT_CONFIG, "input", f"file not found: {path}", path=str(path)) from None
        except json.JSONDecodeError as exc:
            raise CLIError(EXIT_CONFIG, "input", f"{path}: invalid JSON ({exc.msg})", path=str(path)) from None

    if p["trajectory"]:
        try:
            traj = Trajectory.read(p["trajectory"])
        except FileNotFoundError:
            raise CLIError(EXIT_CONFIG, "input", f"file not found: {p['trajectory']}") from None
        except TrajectoryFormatError as exc:
            raise CLIError(EXIT_CONFIG, "input", str(exc)) from None
        plot = cfg.out("plot_data", "trajectory_plot.csv")
        plot.parent.mkdir(parents=True, exist_ok=True)
        cols = ["t", "T", "p", "dTdt"] + [f"Y_{s}" for s in traj.species]
        units = [traj.units.get(c, "") for c in cols]
        lines = ["# unitphysics trajectory plot data v1", "# units: " + ",".join(units), ",".join(cols)]
        dT = traj.dTdt if traj.dTdt is not None else [float("nan")] * len(traj)
        for i in range(len(traj)):
            row = [traj.t[i], traj.T[i], traj.p[i], dT[i], *traj.Y[i]]
            lines.append(",".join(repr(float(x)) for x in row))
        plot.write_text("\n".join(lines) + "\n")
        try:
            idt = detect_idt(traj)
        except (NoIgnitionError, ValueError):
            idt = None
        summary["trajectory"] = {"path": p["trajectory"], "records": len(traj), "idt_max_dTdt": idt,
                                 "T_max": float(traj.T.max()), "plot_data": str(plot)}
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(traj.t * 1e6, traj.T)
        ax.set_xlabel("t [us]")
        ax.set_ylabel("T [K]")
        if idt is not None:
            ax.axvline(idt * 1e6, ls="--", c="k", lw=0.8)
        fig.tight_layout()
        fig.savefig(cfg.out("svg", "trajectory.svg"), format="svg", metadata={"Date": None})
        plt.close(fig)
    if p["verdicts"]:
        doc = read_doc(p["verdicts"])
        summary["verdicts"] = {"passed": doc.get("passed"),
                               "table": [{k: v.get(k) for k in ("id", "kind", "status", "residual", "threshold")}
                                         for v in doc.get("verdicts", [])]}
    if p["final"]:
        doc = read_doc(p["final"])
        summary["orchestration"] = {k: doc.get(k) for k in ("outcome", "iterations", "selected", "result",
                                                            "error")}
        summary["orchestration"]["tokens"] = (doc.get("ledger") or {}).get("total")
    if p["bench"]:
        try:
            recs = read_records(p["bench"])
        except FileNotFoundError:
            raise CLIError(EXIT_CONFIG, "input", f"file not found: {p['bench']}") from None
        except (BenchError, KeyError, ValueError) as exc:
            raise CLIError(EXIT_CONFIG, "input", f"bad bench CSV: {exc}") from None
        by_label: dict[str, dict] = {}
        for r in recs:
            d = by_label.setdefault(r.label, {"points": 0, "failed": 0, "max_l2": None})
            d["points"] += 1
            d["failed"] += r.status != "ok"
            if r.l2_error is not None:
                d["max_l2"] = r.l2_error if d["max_l2"] is None else max(d["max_l2"], r.l2_error)
        summary["bench"] = by_label
    path = cfg.out("summary", "report.json")
    write_json(path, summary)
    emit_summary("report", EXIT_OK, summary=str(path))
    return EXIT_OK


HANDLERS = {"solve": cmd_solve, "verify": cmd_verify, "orchestrate": cmd_orchestrate, "bench": cmd_bench,
            "report": cmd_report}


def main(argv: Sequence[str] | None = None, environ: dict | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    started = time.time()
    try:
        cfg = resolve(command, args, environ)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        code = HANDLERS[command](cfg)
        write_timing(cfg, started, getattr(cfg, "timing", None))
        return code
    except CLIError as err:
        emit_error(command, err)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
