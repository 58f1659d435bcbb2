"""Typed property graph over enriched resource schemas.

Node ids are ``<resource>`` for resources and ``<resource>/<kind>/<path>``
for everything else, where ``path`` is the dotted hierarchical id.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .ingest import BlockSpec, EnrichedResourceSchema

RESOURCE = "Resource"
ARGUMENT = "Argument"
BLOCK = "Block"
ATTRIBUTE = "Attribute"
EXAMPLE = "Example"
NODE_KINDS = (RESOURCE, ARGUMENT, BLOCK, ATTRIBUTE, EXAMPLE)

HAS_ARGUMENT = "HAS_ARGUMENT"
HAS_BLOCK = "HAS_BLOCK"
EXPORTS_ATTRIBUTE = "EXPORTS_ATTRIBUTE"
HAS_EXAMPLE = "HAS_EXAMPLE"
REFERENCES = "REFERENCES"
EDGE_KINDS = (HAS_ARGUMENT, HAS_BLOCK, EXPORTS_ATTRIBUTE, HAS_EXAMPLE, REFERENCES)

# allowed (source kind, target kind) per edge kind
EDGE_TYPING = {
    HAS_ARGUMENT: {(RESOURCE, ARGUMENT), (BLOCK, ARGUMENT)},
    HAS_BLOCK: {(RESOURCE, BLOCK), (BLOCK, BLOCK)},
    EXPORTS_ATTRIBUTE: {(RESOURCE, ATTRIBUTE)},
    HAS_EXAMPLE: {(RESOURCE, EXAMPLE)},
    REFERENCES: {(ARGUMENT, ATTRIBUTE), (ARGUMENT, ARGUMENT)},
}


class GraphError(ValueError):
    pass


class EdgeTypeError(GraphError):
    pass


class NotFoundError(KeyError):
    pass


@dataclass(frozen=True)
class GraphNode:
    id: str
    kind: str
    props: tuple  # sorted (key, value) pairs; kept hashable

    def __post_init__(self) -> None:
        object.__setattr__(self, "_d", dict(self.props))

    def __getitem__(self, key: str):
        return self._d[key]

    def get(self, key: str, default=None):
        return self._d.get(key, default)

    @property
    def name(self) -> str:
        return self["name"]

    @property
    def resource(self) -> str:
        return self["name"] if self.kind == RESOURCE else self["resource"]


@dataclass(frozen=True)
class GraphEdge:
    kind: str
    source: str
    target: str


def _node(node_id: str, kind: str, **props) -> GraphNode:
    return GraphNode(node_id, kind, tuple(sorted(props.items())))


def node_id(resource: str, kind: str, path: str) -> str:
    if kind == RESOURCE:
        return resource
    return f"{resource}/{kind.lower()}/{path}"


class ConfigKnowledgeGraph:
    def __init__(self) -> None:
        self.nodes: dict[str, GraphNode] = {}
        self.edges: list[GraphEdge] = []
        self._edge_set: set[GraphEdge] = set()
        self._out: dict[str, list[GraphEdge]] = {}
        self._in: dict[str, list[GraphEdge]] = {}

    # -- construction ------------------------------------------------------

    def add_node(self, node: GraphNode) -> None:
        if node.kind not in NODE_KINDS:
            raise GraphError(f"unknown node kind {node.kind}")
        if node.id in self.nodes:
            raise GraphError(f"duplicate node {node.id}")
        if node.kind != RESOURCE and node.get("resource") not in self.nodes:
            raise GraphError(f"{node.id}: owning resource {node.get('resource')!r} not in graph")
        self.nodes[node.id] = node

    def add_edge(self, kind: str, source: str, target: str) -> bool:
        """Insert a typed edge; returns False if it already existed."""
        if kind not in EDGE_TYPING:
            raise EdgeTypeError(f"unknown edge kind {kind}")
        try:
            s, t = self.nodes[source], self.nodes[target]
        except KeyError as exc:
            raise GraphError(f"edge endpoint missing: {exc.args[0]}") from None
        if (s.kind, t.kind) not in EDGE_TYPING[kind]:
            raise EdgeTypeError(f"{kind} cannot link {s.kind} -> {t.kind}")
        edge = GraphEdge(kind, source, target)
        if edge in self._edge_set:
            return False
        self._edge_set.add(edge)
        self.edges.append(edge)
        self._out.setdefault(source, []).append(edge)
        self._in.setdefault(target, []).append(edge)
        return True

    def copy(self) -> "ConfigKnowledgeGraph":
        g = ConfigKnowledgeGraph()
        g.nodes = dict(self.nodes)
        for e in self.edges:
            g._edge_set.add(e)
            g.edges.append(e)
            g._out.setdefault(e.source, []).append(e)
            g._in.setdefault(e.target, []).append(e)
        return g

    # -- queries -----------------------------------------------------------

    def out_edges(self, node: str, kind: Optional[str] = None) -> list[GraphEdge]:
        return [e for e in self._out.get(node, []) if kind is None or e.kind == kind]

    def in_edges(self, node: str, kind: Optional[str] = None) -> list[GraphEdge]:
        return [e for e in self._in.get(node, []) if kind is None or e.kind == kind]

    def children(self, node: str, kind: str) -> list[GraphNode]:
        return [self.nodes[e.target] for e in self.out_edges(node, kind)]

    def resource(self, name: str) -> GraphNode:
        node = self.nodes.get(name)
        if node is None or node.kind != RESOURCE:
            raise NotFoundError(name)
        return node

    def resources(self) -> list[str]:
        return sorted(n.id for n in self.nodes.values() if n.kind == RESOURCE)

    def stats(self) -> dict:
        nodes = {k: 0 for k in NODE_KINDS}
        edges = {k: 0 for k in EDGE_KINDS}
        for n in self.nodes.values():
            nodes[n.kind] += 1
        for e in self.edges:
            edges[e.kind] += 1
        return {"nodes": len(self.nodes), "edges": len(self.edges), "nodes_by_kind": nodes, "edges_by_kind": edges}

    # -- export ------------------------------------------------------------

    def export_lines(self) -> str:
        order = {k: i for i, k in enumerate(NODE_KINDS)}
        eorder = {k: i for i, k in enumerate(EDGE_KINDS)}
        lines = []
        for n in sorted(self.nodes.values(), key=lambda n: (order[n.kind], n.id)):
            lines.append(json.dumps({"record": "node", "kind": n.kind, "id": n.id, "props": dict(n.props)}, sort_keys=True))
        for e in sorted(self.edges, key=lambda e: (eorder[e.kind], e.source, e.target)):
            lines.append(json.dumps({"record": "edge", "kind": e.kind, "source": e.source, "target": e.target}, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def import_lines(cls, text: str) -> "ConfigKnowledgeGraph":
        g = cls()
        pending_nodes = []
        edges = []
        for raw in text.splitlines():
            if not raw.strip():
                continue
            rec = json.loads(raw)
            if rec["record"] == "node":
                props = {k: (tuple(v) if isinstance(v, list) else v) for k, v in rec["props"].items()}
                pending_nodes.append(_node(rec["id"], rec["kind"], **props))
            else:
                edges.append(rec)
        for n in sorted(pending_nodes, key=lambda n: n.kind != RESOURCE):
            g.add_node(n)
        for e in edges:
            g.add_edge(e["kind"], e["source"], e["target"])
        return g


def build_graph(schemas: Iterable[EnrichedResourceSchema]) -> ConfigKnowledgeGraph:
    g = ConfigKnowledgeGraph()
    for s in schemas:
        res = s.resource_name
        if res in g.nodes:
            raise GraphError(f"duplicate resource {res}")
        g.add_node(_node(res, RESOURCE, name=res, description=s.description))

        def add_args(parent: str, args) -> None:
            for a in args:
                nid = node_id(res, ARGUMENT, a.id)
                g.add_node(_node(nid, ARGUMENT, name=a.name, description=a.description, type=a.value_type,
                                 required=a.required, id=a.id, resource=res))
                g.add_edge(HAS_ARGUMENT, parent, nid)

        def add_blocks(parent: str, blocks: list[BlockSpec]) -> None:
            for b in blocks:
                nid = node_id(res, BLOCK, b.id)
                g.add_node(_node(nid, BLOCK, name=b.name, description=b.description,
                                 cardinality=(b.min_items, b.max_items), id=b.id, resource=res))
                g.add_edge(HAS_BLOCK, parent, nid)
                add_args(nid, b.nested_arguments)
                add_blocks(nid, b.nested_blocks)

        add_args(res, s.arguments)
        add_blocks(res, s.blocks)
        for a in s.attributes:
            nid = node_id(res, ATTRIBUTE, a.name)
            g.add_node(_node(nid, ATTRIBUTE, name=a.name, description=a.description, type=a.value_type, resource=res))
            g.add_edge(EXPORTS_ATTRIBUTE, res, nid)
        for ex in s.examples:
            nid = node_id(res, EXAMPLE, str(ex.index))
            g.add_node(_node(nid, EXAMPLE, name=ex.title, code=ex.code, index=ex.index, resource=res))
            g.add_edge(HAS_EXAMPLE, res, nid)
    return g


# ---------------------------------------------------------------------------
# Subgraph extraction
# ---------------------------------------------------------------------------


def is_required_block(node: GraphNode) -> bool:
    return node["cardinality"][0] >= 1


@dataclass(frozen=True)
class BlockView:
    """A block with its requiredness-limited nested structure."""

    block: GraphNode
    required_arguments: tuple[GraphNode, ...] = ()
    optional_arguments: tuple[GraphNode, ...] = ()
    required_blocks: tuple["BlockView", ...] = ()
    optional_blocks: tuple[GraphNode, ...] = ()  # names only


@dataclass(frozen=True)
class ResourceSubgraph:
    resource: GraphNode
    required_arguments: tuple[GraphNode, ...] = ()
    optional_arguments: tuple[GraphNode, ...] = ()
    required_blocks: tuple[BlockView, ...] = ()
    selected_optional_blocks: tuple[BlockView, ...] = ()
    example: Optional[GraphNode] = None
    referenced_resources: tuple[str, ...] = ()
    # base subgraphs list optional arguments by name/type only
    optional_detail: bool = False

    def node_ids(self) -> set[str]:
        ids = {self.resource.id}
        ids.update(n.id for n in self.required_arguments + self.optional_arguments)

        def walk(v: BlockView) -> None:
            ids.add(v.block.id)
            ids.update(n.id for n in v.required_arguments + v.optional_arguments + v.optional_blocks)
            for c in v.required_blocks:
                walk(c)

        for v in self.required_blocks + self.selected_optional_blocks:
            walk(v)
        if self.example is not None:
            ids.add(self.example.id)
        return ids


def _by_id(nodes: Iterable[GraphNode]) -> tuple[GraphNode, ...]:
    return tuple(sorted(nodes, key=lambda n: n.id))


def expand_block(g: ConfigKnowledgeGraph, block: GraphNode) -> BlockView:
    args = g.children(block.id, HAS_ARGUMENT)
    blocks = g.children(block.id, HAS_BLOCK)
    return BlockView(
        block,
        _by_id(a for a in args if a["required"]),
        _by_id(a for a in args if not a["required"]),
        tuple(expand_block(g, b) for b in _by_id(b for b in blocks if is_required_block(b))),
        _by_id(b for b in blocks if not is_required_block(b)),
    )


def base_subgraph(g: ConfigKnowledgeGraph, resource_name: str) -> ResourceSubgraph:
    r = g.resource(resource_name)
    args = g.children(r.id, HAS_ARGUMENT)
    blocks = g.children(r.id, HAS_BLOCK)
    examples = [e for e in g.children(r.id, HAS_EXAMPLE) if e["index"] == 0]
    return ResourceSubgraph(
        r,
        _by_id(a for a in args if a["required"]),
        _by_id(a for a in args if not a["required"]),
        tuple(expand_block(g, b) for b in _by_id(b for b in blocks if is_required_block(b))),
        (),
        examples[0] if examples else None,
    )


def filtered_subgraph(
    g: ConfigKnowledgeGraph,
    resource_name: str,
    selected_optional_args: Iterable[str] = (),
    selected_optional_blocks: Iterable[str] = (),
    selected_example_title: str = "",
) -> ResourceSubgraph:
    r = g.resource(resource_name)
    sel_args = set(selected_optional_args)
    sel_blocks = set(selected_optional_blocks)
    args = g.children(r.id, HAS_ARGUMENT)
    blocks = g.children(r.id, HAS_BLOCK)
    examples = sorted(
        (e for e in g.children(r.id, HAS_EXAMPLE) if e.name == selected_example_title),
        key=lambda e: e["index"],
    )
    return ResourceSubgraph(
        r,
        _by_id(a for a in args if a["required"]),
        _by_id(a for a in args if not a["required"] and a.name in sel_args),
        tuple(expand_block(g, b) for b in _by_id(b for b in blocks if is_required_block(b))),
        tuple(expand_block(g, b) for b in _by_id(b for b in blocks if not is_required_block(b) and b.name in sel_blocks)),
        examples[0] if examples else None,
        optional_detail=True,
    )


# ---------------------------------------------------------------------------
# Cross-resource references
# ---------------------------------------------------------------------------


@dataclass
class ReferenceReport:
    inserted: list[tuple[str, str, str, str]] = field(default_factory=list)
    duplicates: list[tuple[str, str, str, str]] = field(default_factory=list)
    rejected: list[tuple[tuple[str, str, str, str], str]] = field(default_factory=list)


def _resolve_source(g: ConfigKnowledgeGraph, resource: str, argument: str) -> Optional[str]:
    nid = node_id(resource, ARGUMENT, argument)
    return nid if nid in g.nodes else None


def _resolve_target(g: ConfigKnowledgeGraph, resource: str, element: str) -> Optional[str]:
    # attributes win over arguments of the same name
    for kind in (ATTRIBUTE, ARGUMENT):
        nid = node_id(resource, kind, element)
        if nid in g.nodes:
            return nid
    return None


def add_reference_edges(
    g: ConfigKnowledgeGraph, refs: Iterable[tuple[str, str, str, str]]
) -> tuple[ConfigKnowledgeGraph, ReferenceReport]:
    """Return a new graph with REFERENCES edges for every resolvable ref."""
    out = g.copy()
    report = ReferenceReport()
    for ref in refs:
        src_res, src_arg, dst_res, dst_el = ref
        if src_res not in out.nodes:
            report.rejected.append((ref, f"unknown resource {src_res}"))
            continue
        if dst_res not in out.nodes:
            report.rejected.append((ref, f"unknown resource {dst_res}"))
            continue
        src = _resolve_source(out, src_res, src_arg)
        if src is None:
            report.rejected.append((ref, f"unknown argument {src_res}.{src_arg}"))
            continue
        dst = _resolve_target(out, dst_res, dst_el)
        if dst is None:
            report.rejected.append((ref, f"unknown element {dst_res}.{dst_el}"))
            continue
        if out.add_edge(REFERENCES, src, dst):
            report.inserted.append(ref)
        else:
            report.duplicates.append(ref)
    return out, report


def reference_neighbours(g: ConfigKnowledgeGraph) -> dict[str, list[str]]:
    """resource -> resources its arguments reference, sorted."""
    adj: dict[str, set[str]] = {}
    for e in g.edges:
        if e.kind != REFERENCES:
            continue
        s, t = g.nodes[e.source].resource, g.nodes[e.target].resource
        if s != t:
            adj.setdefault(s, set()).add(t)
    return {k: sorted(v) for k, v in adj.items()}


def expand_references_ordered(g: ConfigKnowledgeGraph, seeds: Iterable[str], depth: int) -> list[str]:
    """Seeds in the given order, then referenced resources in BFS discovery
    order, following at most ``depth - 1`` hops."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    seeds = list(dict.fromkeys(seeds))
    for s in seeds:
        g.resource(s)
    adj = reference_neighbours(g)
    seen = dict.fromkeys(seeds)
    frontier = deque((s, 0) for s in seeds)
    while frontier:
        res, hops = frontier.popleft()
        if hops >= depth - 1:
            continue
        for nxt in adj.get(res, []):
            if nxt not in seen:
                seen[nxt] = None
                frontier.append((nxt, hops + 1))
    return list(seen)


def expand_references(g: ConfigKnowledgeGraph, seeds: Iterable[str], depth: int) -> set[str]:
    return set(expand_references_ordered(g, seeds, depth))
