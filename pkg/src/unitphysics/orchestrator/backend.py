"""Agent backends: the model behind every agent role.

A backend answers five calls. ``plan`` is the supervisor's initial plan,
``generate`` returns the code agent's k chains, ``summarize`` compresses the
logs, ``refine`` returns a plan delta and ``explain`` gives a failure
explanation for the diagnostic or verification role. It reports token
usage through a callback.

External protocol (one JSON document per line, request then response)::

    -> {"id": 3, "method": "generate", "params": {"prompt": "...", "k": 4, "iteration": 1}}
    <- {"id": 3, "result": {"chains": [{"code": "...", "trace": [[0.9, 0.05], ...],
                                        "answer_span": [2, 40]}, ...]},
        "usage": [{"role": "code", "input": 812, "output": 2210}]}

Methods and results:

* ``plan {prompt, query}`` -> ``{"id", "tasks": [{"id", "prompt", "role"}]}``
* ``generate {prompt, k, iteration}`` -> ``{"chains": [...]}`` with exactly k
  chains. ``trace`` holds ``[p_top1, p_top2]`` per token with
  ``0 <= p_top2 <= p_top1 <= 1``. ``answer_span`` is a half-open
  ``[start, end)`` token range, or null. An optional ``retrieval`` list of
  queries may be added.
* ``summarize {logs, template, iteration}`` -> ``{"summary": {...}}``, or
  ``null`` to accept the template.
* ``refine {plan, summary, guidance, iteration}`` ->
  ``{"edits": [{"task", "append"}], "tasks": [...]}``
* ``explain {role, payload, iteration}`` -> ``{"text": "..."}``

Failures come back as ``{"id": n, "error": {"message": "..."}}``.
"""

from __future__ import annotations

import json
import math
import shlex
import socket
import subprocess
import threading
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Callable

UsageCallback = Callable[[str, int, int, str], None]


class BackendError(RuntimeError):
    """The backend failed to answer."""


class BackendProtocolError(BackendError):
    """The backend answered outside its contract."""


def validate_chains(raw: Any, k: int) -> list[dict]:
    """Check a ``generate`` answer against the contract; return normalised chains."""
    if not isinstance(raw, list):
        raise BackendProtocolError("generate must return a list of chains")
    if len(raw) != k:
        raise BackendProtocolError(f"generate returned {len(raw)} chains, expected {k}")
    out = []
    for i, ch in enumerate(raw):
        if not isinstance(ch, dict) or not isinstance(ch.get("code"), str):
            raise BackendProtocolError(f"chain {i}: missing code text")
        trace = ch.get("trace", [])
        if not isinstance(trace, list):
            raise BackendProtocolError(f"chain {i}: trace must be a list")
        for j, pair in enumerate(trace):
            ok = isinstance(pair, (list, tuple)) and len(pair) == 2 and all(
                isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in pair)
            if not ok or not 0.0 <= pair[1] <= pair[0] <= 1.0:
                raise BackendProtocolError(f"chain {i} token {j}: need 0 <= top2 <= top1 <= 1, got {pair!r}")
        span = ch.get("answer_span")
        if span is not None:
            if (not isinstance(span, (list, tuple)) or len(span) != 2
                    or not all(isinstance(x, int) for x in span) or not 0 <= span[0] <= span[1] <= len(trace)):
                raise BackendProtocolError(f"chain {i}: bad answer span {span!r}")
        retrieval = ch.get("retrieval", [])
        if not isinstance(retrieval, list) or not all(isinstance(q, str) for q in retrieval):
            raise BackendProtocolError(f"chain {i}: retrieval must be a list of strings")
        out.append({"code": ch["code"], "trace": [list(map(float, p)) for p in trace],
                    "answer_span": None if span is None else list(span), "retrieval": list(retrieval)})
    return out


class AgentBackend(ABC):
    def __init__(self, on_usage: UsageCallback | None = None):
        self.on_usage = on_usage

    def _usage(self, role: str, input_tokens: int, output_tokens: int, call: str) -> None:
        if self.on_usage is not None:
            self.on_usage(role, int(input_tokens), int(output_tokens), call)

    @abstractmethod
    def plan(self, prompt: str, query: str) -> dict: ...

    @abstractmethod
    def generate(self, prompt: str, k: int, iteration: int) -> list[dict]: ...

    def summarize(self, logs: dict, template: dict, iteration: int) -> dict | None:
        return None

    @abstractmethod
    def refine(self, plan: dict, summary: dict, guidance: str | None, iteration: int) -> dict: ...

    def explain(self, role: str, payload: dict, iteration: int) -> str:
        return ""

    def close(self) -> None:
        pass


def _usage_of(entry: dict | None) -> tuple[int, int]:
    u = (entry or {}).get("usage") or {}
    return int(u.get("input", 0)), int(u.get("output", 0))


class ScriptedBackend(AgentBackend):
    """Replays a JSON fixture: one scripted answer per call.

    Fixture layout::

        {"plan": {"id", "tasks": [...], "usage": {"input", "output"}},
         "explain": {"diagnostic": {"usage": ...}, "verification": {"usage": ...}},
         "iterations": [
            {"chains": [{"code" | "code_file", "trace", "answer_span"}, ...],
             "usage": {...},
             "summarize": {"usage": {...}},
             "refine": {"edits": [...], "tasks": [...], "usage": {...}}}, ...]}

    ``code_file`` paths are relative to the fixture file. ``{query}`` in a
    task prompt is replaced by the supervisor query.
    """

    def __init__(self, fixture: dict | str | Path, on_usage: UsageCallback | None = None):
        super().__init__(on_usage)
        if isinstance(fixture, (str, Path)):
            path = Path(fixture)
            self.base = path.parent
            self.fixture = json.loads(path.read_text())
        else:
            self.base = Path(".")
            self.fixture = fixture
        self.name = self.fixture.get("name", "scripted")

    def _iteration(self, t: int) -> dict:
        its = self.fixture.get("iterations", [])
        if not 1 <= t <= len(its):
            raise BackendError(f"script {self.name!r} has no iteration {t}")
        return its[t - 1]

    def plan(self, prompt: str, query: str) -> dict:
        entry = self.fixture["plan"]
        self._usage("supervisor", *_usage_of(entry), "plan")
        tasks = [{**t, "prompt": t["prompt"].replace("{query}", query.strip())} for t in entry["tasks"]]
        return {"id": entry.get("id", "plan"), "tasks": tasks}

    def generate(self, prompt: str, k: int, iteration: int) -> list[dict]:
        entry = self._iteration(iteration)
        self._usage("code", *_usage_of(entry), "generate")
        chains = []
        for ch in entry["chains"]:
            ch = dict(ch)
            if "code_file" in ch:
                ch["code"] = (self.base / ch.pop("code_file")).read_text()
            chains.append(ch)
        return chains

    def summarize(self, logs: dict, template: dict, iteration: int) -> dict | None:
        entry = self._iteration(iteration).get("summarize")
        self._usage("supervisor", *_usage_of(entry), "summarize")
        return None

    def refine(self, plan: dict, summary: dict, guidance: str | None, iteration: int) -> dict:
        entry = self._iteration(iteration).get("refine") or {}
        self._usage("supervisor", *_usage_of(entry), "refine")
        return {"edits": list(entry.get("edits", [])), "tasks": list(entry.get("tasks", []))}

    def explain(self, role: str, payload: dict, iteration: int) -> str:
        entry = self.fixture.get("explain", {}).get(role)
        if entry is None:
            return ""
        self._usage(role, *_usage_of(entry), "explain")
        return str(entry.get("text", ""))


class _Transport:
    def send(self, line: str) -> None: ...
    def recv(self) -> str: ...
    def close(self) -> None: ...


class _PipeTransport(_Transport):
    def __init__(self, command: str):
        self.proc = subprocess.Popen(shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                     text=True, bufsize=1)

    def send(self, line: str) -> None:
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except BrokenPipeError:
            raise BackendError("backend process closed its input") from None

    def recv(self) -> str:
        line = self.proc.stdout.readline()
        if not line:
            raise BackendError(f"backend process exited (code {self.proc.poll()})")
        return line

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class _TcpTransport(_Transport):
    def __init__(self, host: str, port: int, timeout: float):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise BackendError(f"cannot reach backend at {host}:{port}: {exc}") from None
        self.fh = self.sock.makefile("rw", encoding="utf-8", newline="\n")

    def send(self, line: str) -> None:
        self.fh.write(line + "\n")
        self.fh.flush()

    def recv(self) -> str:
        line = self.fh.readline()
        if not line:
            raise BackendError("backend closed the connection")
        return line

    def close(self) -> None:
        self.fh.close()
        self.sock.close()


class ExternalBackend(AgentBackend):
    """Talks the JSON-lines protocol to a model server.

    ``endpoint`` is ``cmd:<command line>`` (spawned, stdin/stdout) or
    ``tcp:<host>:<port>``.
    """

    def __init__(self, endpoint: str, on_usage: UsageCallback | None = None, timeout: float = 600.0):
        super().__init__(on_usage)
        kind, _, rest = endpoint.partition(":")
        if kind == "cmd" and rest:
            self.transport: _Transport = _PipeTransport(rest)
        elif kind == "tcp":
            host, _, port = rest.rpartition(":")
            if not host or not port.isdigit():
                raise BackendError(f"bad tcp endpoint {endpoint!r}; use tcp:<host>:<port>")
            self.transport = _TcpTransport(host, int(port), timeout)
        else:
            raise BackendError(f"bad endpoint {endpoint!r}; use cmd:<command> or tcp:<host>:<port>")
        self._next = 0
        self._lock = threading.Lock()

    def _call(self, method: str, **params) -> Any:
        with self._lock:
            self._next += 1
            rid = self._next
            self.transport.send(json.dumps({"id": rid, "method": method, "params": params}))
            line = self.transport.recv()
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            raise BackendProtocolError(f"{method}: response is not JSON: {line[:200]!r}") from None
        if not isinstance(msg, dict) or msg.get("id") != rid:
            raise BackendProtocolError(f"{method}: response id {msg.get('id') if isinstance(msg, dict) else None} "
                                       f"does not match request {rid}")
        if "error" in msg:
            raise BackendError(f"{method}: {msg['error'].get('message', msg['error'])}")
        if "result" not in msg:
            raise BackendProtocolError(f"{method}: response carries neither result nor error")
        for u in msg.get("usage", []):
            try:
                self._usage(u["role"], u["input"], u["output"], method)
            except (KeyError, TypeError, ValueError) as exc:
                raise BackendProtocolError(f"{method}: bad usage record {u!r} ({exc})") from None
        return msg["result"]

    def plan(self, prompt: str, query: str) -> dict:
        return self._call("plan", prompt=prompt, query=query)

    def generate(self, prompt: str, k: int, iteration: int) -> list[dict]:
        res = self._call("generate", prompt=prompt, k=k, iteration=iteration)
        if not isinstance(res, dict) or "chains" not in res:
            raise BackendProtocolError("generate result must be an object with 'chains'")
        return res["chains"]

    def summarize(self, logs: dict, template: dict, iteration: int) -> dict | None:
        res = self._call("summarize", logs=logs, template=template, iteration=iteration)
        return None if res is None else res.get("summary")

    def refine(self, plan: dict, summary: dict, guidance: str | None, iteration: int) -> dict:
        return self._call("refine", plan=plan, summary=summary, guidance=guidance, iteration=iteration)

    def explain(self, role: str, payload: dict, iteration: int) -> str:
        res = self._call("explain", role=role, payload=payload, iteration=iteration)
        return str((res or {}).get("text", ""))

    def close(self) -> None:
        self.transport.close()


def make_backend(spec: str, on_usage: UsageCallback | None = None, base: Path | None = None) -> AgentBackend:
    """``stub:<fixture.json>`` or ``external:<endpoint>``."""
    kind, _, rest = spec.partition(":")
    if kind == "stub" and rest:
        path = Path(rest)
        if not path.is_absolute() and base is not None and not path.exists():
            path = base / path
        if not path.is_file():
            from . import fixtures_dir

            cand = fixtures_dir() / rest
            if cand.is_file():
                path = cand
        if not path.is_file():
            raise FileNotFoundError(f"stub fixture not found: {rest}")
        return ScriptedBackend(path, on_usage)
    if kind == "external" and rest:
        return ExternalBackend(rest, on_usage)
    raise ValueError(f"bad backend {spec!r}; use stub:<fixture> or external:<endpoint>")
