"""Append-only state graph of an orchestration run.

Nodes carry a kind, a JSON payload and its sha256 digest; edges carry a
transition label. Writes are serialised through one lock, and with a
``path`` every append is also written as one JSON line::

    {"type": "node", "id": "n0003", "kind": "chain", ...}
    {"type": "edge", "from": "n0002", "to": "n0003", "label": "generated"}

Timestamps come from an injectable clock and stay out of the default
export, so two runs with identical inputs export identical documents.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

GRAPH_FORMAT = "unitphysics.graph"


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False, default=str)


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    payload: dict
    digest: str
    ts: float
    iteration: int | None = None
    chain: int | None = None
    status: str | None = None

    def to_dict(self, timestamps: bool = False) -> dict:
        d = {"id": self.id, "kind": self.kind, "iteration": self.iteration, "chain": self.chain,
             "status": self.status, "digest": self.digest, "payload": self.payload}
        if timestamps:
            d["ts"] = self.ts
        return d


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    label: str

    def to_dict(self) -> dict:
        return {"from": self.src, "to": self.dst, "label": self.label}


@dataclass
class StateGraph:
    path: Path | None = None
    clock: Callable[[], float] = time.time
    nodes: list[Node] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.path is not None:
            self.path = Path(self.path)
            self.path.write_text("")
        self._index: dict[str, Node] = {n.id: n for n in self.nodes}

    def __len__(self) -> int:
        return len(self.nodes)

    def _persist(self, record: dict) -> None:
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(canonical_json(record) + "\n")

    def add_node(self, kind: str, payload: dict, *, parent: str | None = None, label: str = "",
                 iteration: int | None = None, chain: int | None = None, status: str | None = None) -> str:
        """Append a node (and the edge from ``parent``); return its id."""
        payload = json.loads(canonical_json(payload))
        with self._lock:
            if parent is not None and parent not in self._index:
                raise KeyError(f"unknown parent node {parent}")
            if parent is None and self.nodes:
                raise ValueError("only the root node may be added without a parent")
            node = Node(f"n{len(self.nodes):04d}", kind, payload, digest(payload), float(self.clock()),
                        iteration, chain, status)
            self.nodes.append(node)
            self._index[node.id] = node
            self._persist({"type": "node", **node.to_dict(timestamps=True)})
            if parent is not None:
                edge = Edge(parent, node.id, label or kind)
                self.edges.append(edge)
                self._persist({"type": "edge", **edge.to_dict()})
        return node.id

    def add_edge(self, src: str, dst: str, label: str) -> None:
        with self._lock:
            for n in (src, dst):
                if n not in self._index:
                    raise KeyError(f"unknown node {n}")
            edge = Edge(src, dst, label)
            self.edges.append(edge)
            self._persist({"type": "edge", **edge.to_dict()})

    def node(self, node_id: str) -> Node:
        return self._index[node_id]

    def find(self, kind: str | None = None, **attrs) -> list[Node]:
        out = []
        for n in self.nodes:
            if kind is not None and n.kind != kind:
                continue
            if all(getattr(n, k) == v for k, v in attrs.items()):
                out.append(n)
        return out

    def statuses(self) -> set[str]:
        return {n.status for n in self.nodes if n.kind == "chain" and n.status}

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        adj: dict[str, list[str]] = {}
        for e in self.edges:
            adj.setdefault(e.src, []).append(e.dst)
        seen, stack = {self.nodes[0].id}, [self.nodes[0].id]
        while stack:
            for nxt in adj.get(stack.pop(), []):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.nodes)

    def transitions(self) -> list[tuple[int, int, str, str]]:
        """Replay chain status changes as ``(iteration, chain, from, to)``."""
        last: dict[tuple[int, int], str] = {}
        out = []
        for n in self.nodes:
            if n.kind != "chain":
                continue
            key = (n.iteration, n.chain)
            prev = last.get(key)
            if prev is not None:
                out.append((key[0], key[1], prev, n.status))
            last[key] = n.status
        return out

    def export(self, timestamps: bool = False) -> dict:
        return {"format": GRAPH_FORMAT, "version": 1,
                "n_nodes": len(self.nodes), "n_edges": len(self.edges),
                "nodes": [n.to_dict(timestamps) for n in self.nodes],
                "edges": [e.to_dict() for e in self.edges]}

    def export_json(self, timestamps: bool = False) -> str:
        return json.dumps(self.export(timestamps), indent=2, sort_keys=False) + "\n"

    def timestamps(self) -> dict[str, float]:
        return {n.id: n.ts for n in self.nodes}

    @classmethod
    def load(cls, path: str | Path) -> "StateGraph":
        """Rebuild a graph from its JSON-lines log."""
        nodes, edges = [], []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["type"] == "node":
                node = Node(rec["id"], rec["kind"], rec["payload"], rec["digest"], rec.get("ts", 0.0),
                            rec.get("iteration"), rec.get("chain"), rec.get("status"))
                if digest(node.payload) != node.digest:
                    raise ValueError(f"payload digest mismatch on node {node.id}")
                nodes.append(node)
            elif rec["type"] == "edge":
                edges.append(Edge(rec["from"], rec["to"], rec["label"]))
        g = cls(path=None, nodes=nodes, edges=edges)
        return g
