from __future__ import annotations

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iackg import graph
from iackg.graph import GraphNode


def _resource_graph(n: int, edges: list[tuple[int, int]]) -> graph.ConfigKnowledgeGraph:
    """n resources r0..r(n-1), each with an ``ref`` argument and an ``id``
    attribute; every (i, j) becomes r_i.ref -> r_j.id."""
    g = graph.ConfigKnowledgeGraph()
    for i in range(n):
        r = f"r{i}"
        g.add_node(GraphNode(r, graph.RESOURCE, (("name", r),)))
        for k in range(n):
            a = graph.node_id(r, graph.ARGUMENT, f"ref{k}")
            g.add_node(GraphNode(a, graph.ARGUMENT, (("name", f"ref{k}"), ("resource", r), ("required", False))))
            g.add_edge(graph.HAS_ARGUMENT, r, a)
        t = graph.node_id(r, graph.ATTRIBUTE, "id")
        g.add_node(GraphNode(t, graph.ATTRIBUTE, (("name", "id"), ("resource", r))))
        g.add_edge(graph.EXPORTS_ATTRIBUTE, r, t)
    g, report = graph.add_reference_edges(g, [(f"r{i}", f"ref{j}", f"r{j}", "id") for i, j in edges])
    assert not report.rejected
    return g


def _oracle(n: int, edges, seeds, depth: int) -> set[str]:
    d = nx.DiGraph()
    d.add_nodes_from(f"r{i}" for i in range(n))
    d.add_edges_from((f"r{i}", f"r{j}") for i, j in edges if i != j)
    out = set()
    for s in seeds:
        out |= set(nx.single_source_shortest_path_length(d, s, cutoff=depth - 1))
    return out


@st.composite
def _random_graph(draw, dag: bool = False):
    n = draw(st.integers(1, 50))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1))
    edges = draw(st.lists(pairs, max_size=3 * n))
    if dag:
        edges = [(i, j) for i, j in edges if i < j]
    seeds = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=5))
    return n, edges, [f"r{s}" for s in seeds]


@settings(max_examples=100, deadline=None)
@given(_random_graph(), st.integers(1, 6))
def test_expand_references_matches_oracle(case, depth):
    n, edges, seeds = case
    g = _resource_graph(n, edges)
    assert graph.expand_references(g, seeds, depth) == _oracle(n, edges, seeds, depth)


@settings(max_examples=50, deadline=None)
@given(st.one_of(_random_graph(dag=True), _random_graph()), st.integers(1, 5))
def test_expand_references_monotone_and_depth_one(case, depth):
    n, edges, seeds = case
    g = _resource_graph(n, edges)
    assert graph.expand_references(g, seeds, 1) == set(seeds)
    small = graph.expand_references(g, seeds, depth)
    assert small <= graph.expand_references(g, seeds, depth + 1)
    assert small <= graph.expand_references(g, seeds + ["r0"], depth)


def test_expand_references_order_is_seeds_then_bfs():
    g = _resource_graph(4, [(0, 2), (0, 1), (1, 3)])
    assert graph.expand_references_ordered(g, ["r0"], 3) == ["r0", "r1", "r2", "r3"]
    assert graph.expand_references_ordered(g, ["r3", "r0"], 2) == ["r3", "r0", "r1", "r2"]


def test_expand_references_rejects_bad_input():
    g = _resource_graph(2, [])
    with pytest.raises(ValueError):
        graph.expand_references(g, ["r0"], 0)
    with pytest.raises(graph.NotFoundError):
        graph.expand_references(g, ["nope"], 2)


_KINDS = st.sampled_from(graph.NODE_KINDS)


@settings(max_examples=200, deadline=None)
@given(_KINDS, _KINDS, st.sampled_from(graph.EDGE_KINDS))
def test_edge_typing_enforced(src_kind, dst_kind, edge_kind):
    g = graph.ConfigKnowledgeGraph()
    g.add_node(GraphNode("r", graph.RESOURCE, (("name", "r"),)))
    ids = {}
    for tag, kind in (("s", src_kind), ("t", dst_kind)):
        nid = "r" if kind == graph.RESOURCE else f"r/{tag}"
        if kind != graph.RESOURCE:
            g.add_node(GraphNode(nid, kind, (("name", tag), ("resource", "r"), ("required", False))))
        ids[tag] = nid
    allowed = (src_kind, dst_kind) in graph.EDGE_TYPING[edge_kind]
    if allowed:
        assert g.add_edge(edge_kind, ids["s"], ids["t"]) is True
        assert g.add_edge(edge_kind, ids["s"], ids["t"]) is False
    else:
        with pytest.raises(graph.EdgeTypeError):
            g.add_edge(edge_kind, ids["s"], ids["t"])
        assert not g.edges


def test_unknown_edge_kind_and_missing_endpoint():
    g = _resource_graph(1, [])
    with pytest.raises(graph.EdgeTypeError):
        g.add_edge("LINKS", "r0", "r0")
    with pytest.raises(graph.GraphError):
        g.add_edge(graph.HAS_ARGUMENT, "r0", "r0/argument/missing")


def test_node_requires_owner():
    g = graph.ConfigKnowledgeGraph()
    with pytest.raises(graph.GraphError):
        g.add_node(GraphNode("x/argument/a", graph.ARGUMENT, (("name", "a"), ("resource", "x"))))


def test_build_graph_counts(corpus_schemas, corpus_graph):
    stats = corpus_graph.stats()

    def count_args(blocks):
        return sum(len(b.nested_arguments) + count_args(b.nested_blocks) for b in blocks)

    def count_blocks(blocks):
        return sum(1 + count_blocks(b.nested_blocks) for b in blocks)

    args = sum(len(s.arguments) + count_args(s.blocks) for s in corpus_schemas)
    assert stats["nodes_by_kind"][graph.ARGUMENT] == args
    assert stats["nodes_by_kind"][graph.BLOCK] == sum(count_blocks(s.blocks) for s in corpus_schemas)
    assert stats["edges_by_kind"][graph.REFERENCES] == 3
    assert stats["edges_by_kind"][graph.HAS_ARGUMENT] == args


def test_export_import_roundtrip(corpus_graph):
    text = corpus_graph.export_lines()
    again = graph.ConfigKnowledgeGraph.import_lines(text)
    assert again.export_lines() == text
    assert again.stats() == corpus_graph.stats()


def test_reference_report(corpus_graph):
    g, rep = graph.add_reference_edges(corpus_graph, [
        ("aws_subnet", "vpc_id", "aws_vpc", "id"),          # already present
        ("aws_subnet", "nope", "aws_vpc", "id"),
        ("aws_subnet", "vpc_id", "aws_missing", "id"),
        ("aws_instance", "ami", "aws_vpc", "cidr_block"),   # argument target
    ])
    assert rep.duplicates == [("aws_subnet", "vpc_id", "aws_vpc", "id")]
    assert [r[1] for r in rep.rejected] == ["unknown argument aws_subnet.nope", "unknown resource aws_missing"]
    assert rep.inserted == [("aws_instance", "ami", "aws_vpc", "cidr_block")]
    # the input graph is untouched
    assert corpus_graph.stats()["edges_by_kind"][graph.REFERENCES] == 3


def test_base_subgraph_contents(corpus_graph):
    sg = graph.base_subgraph(corpus_graph, "aws_codebuild_project")
    assert [a.name for a in sg.required_arguments] == ["name", "service_role"]
    assert [b.block.name for b in sg.required_blocks] == ["artifacts", "environment", "source"]
    assert sg.selected_optional_blocks == ()
    assert sg.example is not None and sg.example["index"] == 0
    env = sg.required_blocks[1]
    assert [b.name for b in env.optional_blocks] == ["environment_variable"]
    assert not sg.optional_detail


def test_filtered_subgraph_selection(corpus_graph):
    sg = graph.filtered_subgraph(corpus_graph, "aws_codebuild_project", ["build_timeout", "name"],
                                 ["secondary_artifacts", "artifacts"], "Secondary Artifacts")
    # required elements are never duplicated into the optional lists
    assert [a.name for a in sg.optional_arguments] == ["build_timeout"]
    assert [b.block.name for b in sg.selected_optional_blocks] == ["secondary_artifacts"]
    assert sg.example.name == "Secondary Artifacts"
    base = graph.base_subgraph(corpus_graph, "aws_codebuild_project")
    assert {n.id for n in base.required_arguments} <= sg.node_ids()
