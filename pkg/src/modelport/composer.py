"""Compose running instances into typed pipelines.

A pipeline document looks like::

    {
      "source": {"kind": "record", "fields": [...]},
      "nodes": [{"id": "detect", "endpoint": "http://...", "method": "predict"}],
      "edges": [{"from": "SOURCE", "to": "detect"}, {"from": "detect", "to": "SINK"}]
    }

``SOURCE`` and ``SINK`` are reserved sentinels.  A node with several incoming
edges receives the merge of its predecessors' outputs (fields concatenated in
edge order; duplicate names are a validation failure).  Interfaces are pinned
at load time by fingerprint and rechecked when execution starts.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

from . import client, sigcore
from .errors import (
    BindError,
    CollisionError,
    ContractError,
    ModelPortError,
    NodeError,
    ParseError,
    SchemaError,
    ValidationError,
)

SOURCE = "SOURCE"
SINK = "SINK"

DEFAULT_POOL_SIZE = 8

Fetch = Callable[[str], dict]
Call = Callable[[str, str, dict], dict]


@dataclass(frozen=True)
class NodeBinding:
    node_id: str
    endpoint: str
    method: str
    input_type: sigcore.Record
    output_type: sigcore.Record
    fingerprint: str


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str


@dataclass(frozen=True)
class PipelineGraph:
    nodes: tuple[NodeBinding, ...]
    edges: tuple[Edge, ...]
    source_type: sigcore.Record

    def node(self, node_id: str) -> NodeBinding:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise KeyError(node_id)


@dataclass(frozen=True)
class ExecutionPlan:
    graph: PipelineGraph
    stages: tuple[tuple[str, ...], ...]
    predecessors: dict[str, tuple[str, ...]]
    sink_predecessors: tuple[str, ...]


# -- validation ----------------------------------------------------------------


def _predecessors(g: PipelineGraph) -> dict[str, list[str]]:
    """Incoming contributors per node (and SINK), in edge declaration order."""
    preds: dict[str, list[str]] = {n.node_id: [] for n in g.nodes}
    preds[SINK] = []
    for e in g.edges:
        if e.dst in preds:
            preds[e.dst].append(e.src)
    return preds


def validate_graph(g: PipelineGraph) -> list[str]:
    """Full report of structural and type problems; empty means valid."""
    violations: list[str] = []
    ids = [n.node_id for n in g.nodes]
    if not ids:
        violations.append("pipeline has no nodes")
    for node_id in ids:
        if node_id in (SOURCE, SINK):
            violations.append(f"node id {node_id} is reserved")
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    for node_id in dupes:
        violations.append(f"duplicate node id {node_id}")
    known = set(ids)
    seen_edges = set()
    for e in g.edges:
        if e.src == SINK:
            violations.append("edge leaves SINK")
        elif e.src != SOURCE and e.src not in known:
            violations.append(f"edge references unknown node {e.src}")
        if e.dst == SOURCE:
            violations.append("edge enters SOURCE")
        elif e.dst != SINK and e.dst not in known:
            violations.append(f"edge references unknown node {e.dst}")
        if e.src == e.dst:
            violations.append(f"self loop at {e.src}")
        if (e.src, e.dst) in seen_edges:
            violations.append(f"duplicate edge {e.src} -> {e.dst}")
        seen_edges.add((e.src, e.dst))

    succs: dict[str, list[str]] = {}
    for e in g.edges:
        succs.setdefault(e.src, []).append(e.dst)
    preds = _predecessors(g)

    if not succs.get(SOURCE):
        violations.append("SOURCE has no outgoing edge")
    if not preds.get(SINK):
        violations.append("SINK has no incoming edge")

    reach_fwd = _closure(SOURCE, succs)
    succs_rev: dict[str, list[str]] = {}
    for e in g.edges:
        succs_rev.setdefault(e.dst, []).append(e.src)
    reach_bwd = _closure(SINK, succs_rev)
    for node_id in ids:
        if node_id not in reach_fwd:
            violations.append(f"node {node_id} is not reachable from SOURCE")
        if node_id not in reach_bwd:
            violations.append(f"node {node_id} cannot reach SINK")

    cycle = _find_cycle(ids, succs)
    if cycle:
        violations.append("cycle: " + " -> ".join(cycle))

    if violations:
        return violations

    # structure is clean; walk in stage order and check contracts
    order = [node_id for stage in _layer(ids, preds) for node_id in stage]
    for node_id in order + [SINK]:
        merged = None
        collision = False
        for p in preds[node_id]:
            contribution = g.source_type if p == SOURCE else g.node(p).output_type
            if merged is None:
                merged = contribution
                continue
            try:
                merged = sigcore.merge_records(merged, contribution)
            except CollisionError as exc:
                where = "SINK" if node_id == SINK else f"node {node_id}"
                violations.append(f"{where}: merge collision on " + ", ".join(exc.duplicates))
                collision = True
                break
        if node_id == SINK or collision or merged is None:
            continue
        report = sigcore.check_compatibility(merged, g.node(node_id).input_type)
        for mm in report.mismatches:
            violations.append(f"node {node_id}: input field {mm.field} {mm.reason}")
    return violations


def _closure(start: str, succs: dict[str, list[str]]) -> set[str]:
    seen = {start}
    frontier = [start]
    while frontier:
        for nxt in succs.get(frontier.pop(), []):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def _find_cycle(ids: list[str], succs: dict[str, list[str]]) -> list[str] | None:
    """First cycle among real nodes, as a closed path, or None."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {i: WHITE for i in ids}
    path: list[str] = []

    def visit(node: str) -> list[str] | None:
        color[node] = GRAY
        path.append(node)
        for nxt in succs.get(node, []):
            if nxt not in color:
                continue
            if color[nxt] == GRAY:
                start = path.index(nxt)
                return path[start:] + [nxt]
            if color[nxt] == WHITE:
                found = visit(nxt)
                if found:
                    return found
        color[node] = BLACK
        path.pop()
        return None

    for node in ids:
        if color.get(node) == WHITE:
            found = visit(node)
            if found:
                return found
    return None


def _layer(ids: list[str], preds: dict[str, list[str]]) -> list[list[str]]:
    """Longest-path layering: a node runs one stage after its deepest predecessor."""
    depth: dict[str, int] = {SOURCE: 0}

    def depth_of(node: str) -> int:
        if node not in depth:
            depth[node] = 1 + max(depth_of(p) for p in preds[node])
        return depth[node]

    for node_id in ids:
        depth_of(node_id)
    stages: dict[int, list[str]] = {}
    for node_id in ids:
        stages.setdefault(depth[node_id], []).append(node_id)
    return [sorted(stages[d]) for d in sorted(stages)]


# -- planning and execution ------------------------------------------------------


def plan(g: PipelineGraph) -> ExecutionPlan:
    violations = validate_graph(g)
    if violations:
        raise ContractError("pipeline does not validate", violations)
    preds = _predecessors(g)
    stages = _layer([n.node_id for n in g.nodes], preds)
    return ExecutionPlan(
        graph=g,
        stages=tuple(tuple(stage) for stage in stages),
        predecessors={k: tuple(v) for k, v in preds.items() if k != SINK},
        sink_predecessors=tuple(preds[SINK]),
    )


def _recheck_bindings(g: PipelineGraph, fetch: Fetch) -> None:
    live: dict[str, str] = {}
    for n in g.nodes:
        if n.endpoint not in live:
            try:
                doc = fetch(n.endpoint)
                live[n.endpoint] = sigcore.fingerprint(sigcore.from_document(doc))
            except (ModelPortError, OSError) as exc:
                raise BindError(f"node {n.node_id}: cannot fetch live interface: {exc}") from exc
        if live[n.endpoint] != n.fingerprint:
            raise BindError(
                f"node {n.node_id}: interface fingerprint drifted "
                f"(pinned {n.fingerprint[:12]}…, live {live[n.endpoint][:12]}…)"
            )


def _call_node(call: Call, node: NodeBinding, message: dict) -> tuple[dict, float]:
    started = time.perf_counter()
    try:
        output = call(node.endpoint, node.method, message)
    except Exception as exc:
        raise NodeError(node.node_id, exc) from exc
    return output, (time.perf_counter() - started) * 1000


def execute(
    p: ExecutionPlan,
    message: dict,
    *,
    pool_size: int = DEFAULT_POOL_SIZE,
    request_timeout_s: float = 60.0,
    fetch: Fetch | None = None,
    call: Call | None = None,
) -> dict[str, Any]:
    """Run the pipeline; returns ``{"output": ..., "trace": [{"node", "ms"}]}``."""
    fetch = fetch or client.fetch_signature
    if call is None:
        call = lambda endpoint, method, payload: client.predict_remote(  # noqa: E731
            endpoint, method, payload, timeout_s=request_timeout_s
        )
    _recheck_bindings(p.graph, fetch)
    violations = sigcore.validate_message(message, p.graph.source_type)
    if violations:
        raise ValidationError(
            "input message does not conform to the pipeline source type",
            [str(v) for v in violations],
        )
    results: dict[str, dict] = {SOURCE: message}
    trace: list[dict[str, Any]] = []
    with ThreadPoolExecutor(max_workers=pool_size) as pool:
        for stage in p.stages:
            futures = {}
            for node_id in stage:
                merged: dict = {}
                for pred in p.predecessors[node_id]:
                    merged.update(results[pred])
                futures[node_id] = pool.submit(_call_node, call, p.graph.node(node_id), merged)
            failure: NodeError | None = None
            for node_id in stage:  # collects every sibling before failing
                try:
                    output, ms = futures[node_id].result()
                except NodeError as exc:
                    failure = failure or exc
                    continue
                results[node_id] = output
                trace.append({"node": node_id, "ms": round(ms, 3)})
            if failure is not None:
                raise failure
    output: dict = {}
    for pred in p.sink_predecessors:
        output.update(results[pred])
    return {"output": output, "trace": trace}


# -- documents --------------------------------------------------------------------


def load_graph(text: str | bytes, *, fetch: Fetch | None = None) -> PipelineGraph:
    """Parse a pipeline document and pin each node's live interface."""
    fetch = fetch or client.fetch_signature
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"pipeline document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not {"source", "nodes", "edges"} <= set(doc):
        raise ParseError("pipeline document needs 'source', 'nodes', and 'edges'")
    source = sigcore.type_from_document(doc["source"])
    if not isinstance(source, sigcore.Record):
        raise SchemaError("pipeline source must be a record type")
    if not isinstance(doc["nodes"], list) or not isinstance(doc["edges"], list):
        raise ParseError("'nodes' and 'edges' must be lists")
    nodes = []
    for entry in doc["nodes"]:
        if not isinstance(entry, dict) or not all(
            isinstance(entry.get(k), str) for k in ("id", "endpoint", "method")
        ):
            raise ParseError("node needs string 'id', 'endpoint', and 'method'")
        node_id, endpoint, method = entry["id"], entry["endpoint"], entry["method"]
        try:
            live_doc = fetch(endpoint)
            sig = sigcore.from_document(live_doc)
        except (ModelPortError, OSError) as exc:
            raise BindError(f"node {node_id}: cannot fetch live interface: {exc}") from exc
        msig = sig.method(method)
        if msig is None:
            raise BindError(f"node {node_id}: endpoint does not expose method {method!r}")
        fp = sigcore.fingerprint(sig)
        pinned = entry.get("fingerprint")
        if pinned is not None and pinned != fp:
            raise BindError(f"node {node_id}: interface fingerprint drifted since authoring")
        nodes.append(NodeBinding(node_id, endpoint, method, msig.input, msig.output, fp))
    edges = []
    for entry in doc["edges"]:
        if not isinstance(entry, dict) or not all(
            isinstance(entry.get(k), str) for k in ("from", "to")
        ):
            raise ParseError("edge needs string 'from' and 'to'")
        edges.append(Edge(entry["from"], entry["to"]))
    return PipelineGraph(tuple(nodes), tuple(edges), source)


def render_graph(g: PipelineGraph) -> str:
    doc = {
        "source": sigcore.type_to_document(g.source_type),
        "nodes": [
            {
                "id": n.node_id,
                "endpoint": n.endpoint,
                "method": n.method,
                "fingerprint": n.fingerprint,
            }
            for n in g.nodes
        ],
        "edges": [{"from": e.src, "to": e.dst} for e in g.edges],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False)
