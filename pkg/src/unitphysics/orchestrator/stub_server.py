"""Serve a scripted fixture over the external backend protocol.

    python -m unitphysics.orchestrator.stub_server FIXTURE [--tcp PORT]

Without ``--tcp`` it speaks on stdin/stdout, for ``external:cmd:...``.
"""

from __future__ import annotations

import argparse
import json
import socketserver
import sys

from .backend import BackendError, ScriptedBackend


def handle(backend: ScriptedBackend, usage: list, line: str) -> str:
    try:
        req = json.loads(line)
    except json.JSONDecodeError:
        return json.dumps({"id": None, "error": {"message": "request is not JSON"}})
    rid, method, params = req.get("id"), req.get("method"), req.get("params", {})
    usage.clear()
    try:
        if method == "plan":
            result = backend.plan(params["prompt"], params["query"])
        elif method == "generate":
            result = {"chains": backend.generate(params["prompt"], params["k"], params["iteration"])}
        elif method == "summarize":
            result = backend.summarize(params["logs"], params["template"], params["iteration"])
        elif method == "refine":
            result = backend.refine(params["plan"], params["summary"], params.get("guidance"), params["iteration"])
        elif method == "explain":
            result = {"text": backend.explain(params["role"], params["payload"], params["iteration"])}
        else:
            return json.dumps({"id": rid, "error": {"message": f"unknown method {method!r}"}})
    except (BackendError, KeyError) as exc:
        return json.dumps({"id": rid, "error": {"message": str(exc)}})
    return json.dumps({"id": rid, "result": result, "usage": list(usage)})


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("fixture")
    ap.add_argument("--tcp", type=int, default=None, metavar="PORT")
    args = ap.parse_args(argv)
    usage: list = []
    backend = ScriptedBackend(args.fixture,
                              on_usage=lambda r, i, o, c: usage.append({"role": r, "input": i, "output": o}))
    if args.tcp is None:
        for line in sys.stdin:
            if line.strip():
                sys.stdout.write(handle(backend, usage, line) + "\n")
                sys.stdout.flush()
        return 0

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode()
                if line.strip():
                    self.wfile.write((handle(backend, usage, line) + "\n").encode())
                    self.wfile.flush()

    with socketserver.TCPServer(("127.0.0.1", args.tcp), Handler) as srv:
        print(f"listening on 127.0.0.1:{srv.server_address[1]}", flush=True)
        srv.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
