"""Persistence: graph JSON/GraphML, partition JSON, and the CSV table formats.

Node ids are type-prefixed (``student:S01``, ``pair:bed 4|agreement``) so
labels can never collide across node types; (location, code) pair nodes also
carry explicit ``location``/``code`` attributes so ids never need parsing.
Tripartite exports embed the triad counts (as a graph-level attribute in
GraphML), because the three edge sets are marginals that cannot reconstruct
the tensor on their own; imports verify that edges and triads agree.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence
from xml.etree import ElementTree as ET

from .events import (
    EVENT_HEADER,
    SCORE_HEADER,
    STUDENT_HEADER,
    StudentRecord,
    TeamScore,
    UtteranceEvent,
)
from .network import BipartiteGraph, Node, TriadTensor, TripartiteNetwork
from .sbm import PartitionResult
from .sigfilter import SignificanceResult
from .synth import PlantedLabels

GRAPH_FORMATS = ("json", "graphml")
_GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"

SIGNIFICANT_EDGE_HEADER = (
    "cluster", "location", "code", "weight", "degree_k", "threshold", "survival_prob",
)


class SchemaError(ValueError):
    """A persisted file violates the documented schema."""

    def __init__(self, locator: str, message: str):
        self.locator = locator
        super().__init__(f"{locator}: {message}")


def _node_label(v: Node) -> str:
    if isinstance(v, tuple):
        return f"{v[0]}|{v[1]}"
    return str(v)


def _node_id(kind: str, v: Node) -> str:
    return f"{kind}:{_node_label(v)}"


def _node_entry(kind: str, v: Node) -> dict:
    entry = {"id": _node_id(kind, v), "nodetype": kind, "label": _node_label(v)}
    if isinstance(v, tuple):
        entry["location"], entry["code"] = v
    return entry


def _entry_node(entry: Mapping) -> Node:
    if "location" in entry and "code" in entry:
        return (entry["location"], entry["code"])
    return entry["label"]


# ---------------------------------------------------------------------------
# dict forms
# ---------------------------------------------------------------------------


def tripartite_to_dict(net: TripartiteNetwork) -> dict:
    nodes = (
        [_node_entry("student", s) for s in net.students]
        + [_node_entry("code", c) for c in net.codes]
        + [_node_entry("location", a) for a in net.areas]
    )
    edges = (
        [
            {"source": _node_id("student", s), "target": _node_id("code", c), "weight": w}
            for (s, c), w in net.sc.items()
        ]
        + [
            {"source": _node_id("student", s), "target": _node_id("location", l), "weight": w}
            for (s, l), w in net.sl.items()
        ]
        + [
            {"source": _node_id("code", c), "target": _node_id("location", l), "weight": w}
            for (c, l), w in net.cl.items()
        ]
    )
    triads = [
        {"student": s, "location": l, "code": c, "count": w}
        for (s, l, c), w in net.triads.counts.items()
    ]
    return {"kind": "tripartite", "nodes": nodes, "edges": edges, "triads": triads}


def tripartite_from_dict(data: Mapping, locator: str = "<dict>") -> TripartiteNetwork:
    try:
        by_type: dict[str, list] = {"student": [], "code": [], "location": []}
        id_to_node: dict[str, tuple[str, Node]] = {}
        for entry in data["nodes"]:
            kind = entry["nodetype"]
            node = _entry_node(entry)
            by_type[kind].append(node)
            id_to_node[entry["id"]] = (kind, node)
        sc: dict = {}
        sl: dict = {}
        cl: dict = {}
        for edge in data["edges"]:
            (k1, n1), (k2, n2) = id_to_node[edge["source"]], id_to_node[edge["target"]]
            w = int(edge["weight"])
            pair = {k1: n1, k2: n2}
            if set(pair) == {"student", "code"}:
                sc[pair["student"], pair["code"]] = w
            elif set(pair) == {"student", "location"}:
                sl[pair["student"], pair["location"]] = w
            elif set(pair) == {"code", "location"}:
                cl[pair["code"], pair["location"]] = w
            else:
                raise ValueError(f"edge between same-type nodes: {edge}")
        counts = {
            (t["student"], t["location"], t["code"]): int(t["count"]) for t in data["triads"]
        }
        net = TripartiteNetwork(
            students=tuple(by_type["student"]),
            codes=tuple(by_type["code"]),
            areas=tuple(by_type["location"]),
            sc=sc,
            sl=sl,
            cl=cl,
            triads=TriadTensor(counts),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(locator, f"malformed tripartite graph: {exc}") from exc
    _verify_marginals(net, locator)
    return net


def _verify_marginals(net: TripartiteNetwork, locator: str) -> None:
    sc: dict = {}
    sl: dict = {}
    cl: dict = {}
    for (s, l, c), w in net.triads.counts.items():
        sc[s, c] = sc.get((s, c), 0) + w
        sl[s, l] = sl.get((s, l), 0) + w
        cl[c, l] = cl.get((c, l), 0) + w
    if not (sc == dict(net.sc) and sl == dict(net.sl) and cl == dict(net.cl)):
        raise SchemaError(locator, "edge sets disagree with the triad counts")


def bipartite_to_dict(g: BipartiteGraph) -> dict:
    nodes = [_node_entry(g.left_kind, v) for v in g.left] + [
        _node_entry(g.right_kind, v) for v in g.right
    ]
    edges = [
        {
            "source": _node_id(g.left_kind, u),
            "target": _node_id(g.right_kind, v),
            "weight": w,
        }
        for (u, v), w in g.weights.items()
    ]
    return {
        "kind": "bipartite",
        "left_kind": g.left_kind,
        "right_kind": g.right_kind,
        "nodes": nodes,
        "edges": edges,
    }


def bipartite_from_dict(data: Mapping, locator: str = "<dict>") -> BipartiteGraph:
    try:
        left_kind = data["left_kind"]
        right_kind = data["right_kind"]
        left: list[Node] = []
        right: list[Node] = []
        id_to_node: dict[str, tuple[bool, Node]] = {}
        for entry in data["nodes"]:
            node = _entry_node(entry)
            is_left = entry["nodetype"] == left_kind
            (left if is_left else right).append(node)
            id_to_node[entry["id"]] = (is_left, node)
        weights: dict = {}
        for edge in data["edges"]:
            (l1, n1), (l2, n2) = id_to_node[edge["source"]], id_to_node[edge["target"]]
            if l1 == l2:
                raise ValueError(f"edge within one side: {edge}")
            u, v = (n1, n2) if l1 else (n2, n1)
            weights[u, v] = int(edge["weight"])
        return BipartiteGraph(
            left=tuple(left),
            right=tuple(right),
            weights=weights,
            left_kind=left_kind,
            right_kind=right_kind,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(locator, f"malformed bipartite graph: {exc}") from exc


def graph_to_dict(obj: TripartiteNetwork | BipartiteGraph) -> dict:
    if isinstance(obj, TripartiteNetwork):
        return tripartite_to_dict(obj)
    if isinstance(obj, BipartiteGraph):
        return bipartite_to_dict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def graph_from_dict(data: Mapping, locator: str = "<dict>") -> TripartiteNetwork | BipartiteGraph:
    kind = data.get("kind")
    if kind == "tripartite":
        return tripartite_from_dict(data, locator)
    if kind == "bipartite":
        return bipartite_from_dict(data, locator)
    raise SchemaError(locator, f"unknown graph kind {kind!r}")


# ---------------------------------------------------------------------------
# GraphML
# ---------------------------------------------------------------------------

_GRAPHML_KEYS = (
    ("nodetype", "node", "string"),
    ("label", "node", "string"),
    ("location", "node", "string"),
    ("code", "node", "string"),
    ("weight", "edge", "long"),
    ("kind", "graph", "string"),
    ("left_kind", "graph", "string"),
    ("right_kind", "graph", "string"),
    ("triads", "graph", "string"),
)


def _graphml_bytes(data: Mapping) -> bytes:
    root = ET.Element("graphml", xmlns=_GRAPHML_NS)
    for name, domain, attr_type in _GRAPHML_KEYS:
        ET.SubElement(
            root, "key", id=name, attrib={"for": domain},
            **{"attr.name": name, "attr.type": attr_type},
        )
    graph = ET.SubElement(root, "graph", edgedefault="undirected")

    def put(elem, key, value):
        d = ET.SubElement(elem, "data", key=key)
        d.text = str(value)

    put(graph, "kind", data["kind"])
    if data["kind"] == "bipartite":
        put(graph, "left_kind", data["left_kind"])
        put(graph, "right_kind", data["right_kind"])
    else:
        triads = [[t["student"], t["location"], t["code"], t["count"]] for t in data["triads"]]
        put(graph, "triads", json.dumps(triads, ensure_ascii=False))
    for entry in data["nodes"]:
        node = ET.SubElement(graph, "node", id=entry["id"])
        put(node, "nodetype", entry["nodetype"])
        put(node, "label", entry["label"])
        if "location" in entry:
            put(node, "location", entry["location"])
            put(node, "code", entry["code"])
    for edge in data["edges"]:
        el = ET.SubElement(graph, "edge", source=edge["source"], target=edge["target"])
        put(el, "weight", edge["weight"])
    tree = ET.ElementTree(root)
    ET.indent(tree)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def _graphml_to_dict(text: bytes | str, locator: str) -> dict:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SchemaError(locator, f"not well-formed GraphML: {exc}") from exc
    ns = {"g": _GRAPHML_NS}
    graph = root.find("g:graph", ns)
    if graph is None:
        raise SchemaError(locator, "missing <graph> element")

    def data_of(elem) -> dict[str, str]:
        return {d.get("key"): (d.text or "") for d in elem.findall("g:data", ns)}

    gdata = data_of(graph)
    kind = gdata.get("kind")
    nodes = []
    for el in graph.findall("g:node", ns):
        nd = data_of(el)
        entry = {"id": el.get("id"), "nodetype": nd.get("nodetype"), "label": nd.get("label")}
        if "location" in nd:
            entry["location"] = nd["location"]
            entry["code"] = nd["code"]
        nodes.append(entry)
    edges = []
    for el in graph.findall("g:edge", ns):
        ed = data_of(el)
        if "weight" not in ed:
            raise SchemaError(locator, f"edge {el.get('source')}->{el.get('target')} lacks weight")
        edges.append(
            {"source": el.get("source"), "target": el.get("target"), "weight": int(ed["weight"])}
        )
    out: dict = {"kind": kind, "nodes": nodes, "edges": edges}
    if kind == "bipartite":
        out["left_kind"] = gdata.get("left_kind")
        out["right_kind"] = gdata.get("right_kind")
    elif kind == "tripartite":
        try:
            triads = json.loads(gdata.get("triads", ""))
            out["triads"] = [
                {"student": s, "location": l, "code": c, "count": w} for s, l, c, w in triads
            ]
        except (ValueError, TypeError) as exc:
            raise SchemaError(locator, f"malformed triads attribute: {exc}") from exc
    else:
        raise SchemaError(locator, f"unknown graph kind {kind!r}")
    return out


# ---------------------------------------------------------------------------
# file-level entry points
# ---------------------------------------------------------------------------


def export_graph(obj: TripartiteNetwork | BipartiteGraph, fmt: str, path: str | Path) -> Path:
    """Write a graph to ``path`` as ``json`` or ``graphml``."""
    path = Path(path)
    data = graph_to_dict(obj)
    if fmt == "json":
        path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    elif fmt == "graphml":
        path.write_bytes(_graphml_bytes(data) + b"\n")
    else:
        raise ValueError(f"unknown graph format {fmt!r}; expected one of {GRAPH_FORMATS}")
    return path


def import_graph(path: str | Path) -> TripartiteNetwork | BipartiteGraph:
    """Read a graph written by :func:`export_graph`; the format is sniffed."""
    path = Path(path)
    blob = path.read_bytes()
    locator = str(path)
    if blob.lstrip().startswith(b"<"):
        return graph_from_dict(_graphml_to_dict(blob, locator), locator)
    try:
        data = json.loads(blob)
    except ValueError as exc:
        raise SchemaError(locator, f"neither GraphML nor JSON: {exc}") from exc
    return graph_from_dict(data, locator)


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------


def _encode_node(v: Node):
    return list(v) if isinstance(v, tuple) else v


def _decode_node(v) -> Node:
    return tuple(v) if isinstance(v, list) else v


def partition_to_dict(p: PartitionResult) -> dict:
    return {
        "assignment": {_node_label(v): b for v, b in p.assignment.items()},
        "nodes": [_encode_node(v) for v in p.assignment],
        "blocks": list(p.assignment.values()),
        "left_nodes": [_encode_node(v) for v in p.left_nodes],
        "num_blocks": p.num_blocks,
        "description_length": p.description_length,
        "seed": p.seed,
        "restarts_run": p.restarts_run,
        "per_restart_dl": list(p.per_restart_dl),
    }


def partition_from_dict(data: Mapping, locator: str = "<dict>") -> PartitionResult:
    try:
        nodes = [_decode_node(v) for v in data["nodes"]]
        blocks = [int(b) for b in data["blocks"]]
        if len(nodes) != len(blocks):
            raise ValueError("nodes and blocks must have equal length")
        return PartitionResult(
            assignment=dict(zip(nodes, blocks)),
            num_blocks=int(data["num_blocks"]),
            description_length=float(data["description_length"]),
            seed=int(data["seed"]),
            restarts_run=int(data["restarts_run"]),
            per_restart_dl=tuple(float(x) for x in data["per_restart_dl"]),
            left_nodes=tuple(_decode_node(v) for v in data["left_nodes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(locator, f"malformed partition: {exc}") from exc


def export_partition(p: PartitionResult, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(partition_to_dict(p), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return path


def import_partition(path: str | Path) -> PartitionResult:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise SchemaError(str(path), f"not JSON: {exc}") from exc
    return partition_from_dict(data, str(path))


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


def _fmt(x: float | int | None) -> str:
    return "" if x is None else repr(x) if isinstance(x, float) else str(x)


def write_events_csv(events: Iterable[UtteranceEvent], fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(EVENT_HEADER)
    for ev in events:
        writer.writerow(
            [
                ev.team_id,
                ev.student_id,
                ev.location,
                ";".join(sorted(ev.codes)),
                _fmt(ev.t_start),
                _fmt(ev.t_end),
                _fmt(ev.phase),
            ]
        )


def write_students_csv(students: Iterable[StudentRecord], fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(STUDENT_HEADER)
    for rec in students:
        writer.writerow([rec.student_id, rec.team_id, _fmt(rec.satisfaction)])


def write_scores_csv(scores: Iterable[TeamScore], fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(SCORE_HEADER)
    for ts in scores:
        writer.writerow([ts.team_id, _fmt(ts.score)])


def write_planted_labels_csv(labels: PlantedLabels, fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(("student_id", "profile"))
    for student, profile in labels.profile_of.items():
        writer.writerow([student, profile])


def write_significant_edges_csv(results: Sequence[SignificanceResult], fh: IO[str]) -> None:
    """Plot-ready table of retained edges, one block of rows per cluster."""
    writer = csv.writer(fh)
    writer.writerow(SIGNIFICANT_EDGE_HEADER)
    for res in results:
        for edge in res.retained:
            writer.writerow(
                [
                    _fmt(res.cluster_id),
                    _node_label(edge.location),
                    _node_label(edge.code),
                    edge.weight,
                    res.degrees[edge.location],
                    edge.threshold,
                    _fmt(edge.survival_probability),
                ]
            )
