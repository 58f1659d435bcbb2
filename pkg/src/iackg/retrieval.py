"""Knowledge-injection strategies: retrieval, linearization and prompting."""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .graph import (ConfigKnowledgeGraph, GraphNode, BlockView, ResourceSubgraph, base_subgraph,
                    expand_references_ordered, filtered_subgraph, REFERENCES)
from .index import ChunkIndex, DocChunk, NodeIndex, query_chunks, select_optional_elements
from .providers import EmbeddingProvider, GenerationProvider

log = logging.getLogger(__name__)

TEMPERATURE = 0.0
TOP_K_CHUNKS = 5
TOP_K_OPTIONAL = 5
DEFAULT_REF_DEPTH = 2

PROMPT_TEMPLATE = (
    "Here is additional knowledge retrieved from Terraform documentation that may help answer the question:\n"
    "DOCUMENTATION: {context}\n"
    "USER QUERY: {query_text}\n"
    "Generate the appropriate Terraform code to address the query."
)


class StrategyId(str, enum.Enum):
    NO_RAG = "NO_RAG"
    NAIVE_RAG = "NAIVE_RAG"
    GR_BASE = "GR_BASE"
    GR_OPTMATCH = "GR_OPTMATCH"
    GR_LLMSUM = "GR_LLMSUM"
    GR_REF = "GR_REF"

    @classmethod
    def parse(cls, text: str) -> "StrategyId":
        key = text.strip().upper().replace("-", "_")
        aliases = {"NAIVE": "NAIVE_RAG", "NORAG": "NO_RAG", "BASE": "GR_BASE"}
        return cls(aliases.get(key, key))


GRAPH_STRATEGIES = (StrategyId.GR_BASE, StrategyId.GR_OPTMATCH, StrategyId.GR_LLMSUM, StrategyId.GR_REF)


class ConfigurationError(ValueError):
    pass


class GenerationError(RuntimeError):
    def __init__(self, message: str, prompt: str, context: "RetrievedContext"):
        super().__init__(message)
        self.prompt = prompt
        self.context = context


_TOKEN = re.compile(r"\w+|[^\w\s]")


def count_tokens(text: str) -> int:
    """Whitespace-and-punctuation token count: words and single symbols."""
    return len(_TOKEN.findall(text))


@dataclass(frozen=True)
class RetrievedContext:
    strategy: StrategyId
    resources: tuple[str, ...] = ()
    context_text: str = ""
    token_count: int = 0
    provenance: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "resources": list(self.resources),
            "token_count": self.token_count,
            "provenance": [list(p) for p in self.provenance],
            "context_text": self.context_text,
        }


def resolve_resources(results: Iterable[tuple[DocChunk, float] | DocChunk]) -> list[str]:
    out: dict[str, None] = {}
    for r in results:
        chunk = r[0] if isinstance(r, tuple) else r
        if chunk.resource_name:
            out.setdefault(chunk.resource_name)
    return list(out)


# ---------------------------------------------------------------------------
# Linearization
# ---------------------------------------------------------------------------


def _cardinality(node: GraphNode) -> str:
    lo, hi = node["cardinality"]
    return f"{lo}-{'unbounded' if hi is None else hi}"


def _arg_line(node: GraphNode, indent: str, detail: bool) -> str:
    desc = node.get("description") or ""
    if detail and desc:
        return f"{indent}- {node.name} ({node['type']}): {desc}"
    return f"{indent}- {node.name} ({node['type']})"


def _block_lines(view: BlockView, depth: int) -> list[str]:
    pad = " " * depth
    lines = [f"{pad}{view.block.name} (cardinality: {_cardinality(view.block)}):"]
    inner = pad + " "
    lines += [_arg_line(a, inner, True) for a in view.required_arguments]
    lines += [_arg_line(a, inner, False) for a in view.optional_arguments]
    for child in view.required_blocks:
        lines += _block_lines(child, depth + 1)
    lines += [f"{inner}- {b.name} (optional block)" for b in view.optional_blocks]
    return lines


def linearize_one(sg: ResourceSubgraph) -> str:
    r = sg.resource
    lines = [f"RESOURCE: {r.name}", f"Description: {r.get('description') or ''}", "REQUIRED ARGUMENTS:"]
    lines += [_arg_line(a, "", True) for a in sg.required_arguments]
    lines.append("OPTIONAL ARGUMENTS:")
    lines += [_arg_line(a, "", sg.optional_detail) for a in sg.optional_arguments]
    lines.append("REQUIRED BLOCKS:")
    for v in sg.required_blocks:
        lines += _block_lines(v, 0)
    if sg.selected_optional_blocks:
        lines.append("OPTIONAL BLOCKS:")
        for v in sg.selected_optional_blocks:
            lines += _block_lines(v, 0)
    lines.append("BASIC USAGE EXAMPLE:")
    if sg.example is not None:
        lines.append(sg.example["code"])
    return "\n".join(lines)


def linearize(subgraphs: Sequence[ResourceSubgraph]) -> str:
    if not subgraphs:
        raise ValueError("linearize needs at least one subgraph")
    return "\n\n".join(linearize_one(sg) for sg in subgraphs)


SECTION_HEADERS = ("RESOURCE:", "Description:", "REQUIRED ARGUMENTS:", "OPTIONAL ARGUMENTS:",
                   "REQUIRED BLOCKS:", "OPTIONAL BLOCKS:", "BASIC USAGE EXAMPLE:")


def assemble_prompt(strategy: StrategyId, user_query: str, context: str) -> str:
    if strategy == StrategyId.NO_RAG:
        if context:
            raise ValueError("NO_RAG takes no context")
        return user_query
    return PROMPT_TEMPLATE.format(context=context, query_text=user_query)


_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.S)


def extract_code(reply: str) -> str:
    """Fenced blocks joined by blank lines, or the whole reply if unfenced."""
    blocks = _FENCE.findall(reply)
    if not blocks:
        return reply.strip() + "\n" if reply.strip() else ""
    return "\n\n".join(b.strip("\n") for b in blocks) + "\n"


# ---------------------------------------------------------------------------
# Strategy execution
# ---------------------------------------------------------------------------


@dataclass
class Stores:
    graph: Optional[ConfigKnowledgeGraph] = None
    chunk_index: Optional[ChunkIndex] = None
    raw_node_index: Optional[NodeIndex] = None
    summary_node_index: Optional[NodeIndex] = None


@dataclass
class StrategyResult:
    prompt: str
    context: RetrievedContext
    generated_code: str
    reply: str


def _need(value, name: str, strategy: StrategyId):
    if value is None:
        raise ConfigurationError(f"{strategy.value} requires the {name}")
    return value


def _subgraph_provenance(sg: ResourceSubgraph) -> list[tuple[str, str]]:
    return [("graph", nid) for nid in sorted(sg.node_ids())]


def retrieve(strategy: StrategyId, user_query: str, stores: Stores, embedder: EmbeddingProvider,
             ref_depth: int = DEFAULT_REF_DEPTH, k: int = TOP_K_CHUNKS) -> RetrievedContext:
    strategy = StrategyId(strategy)
    if strategy == StrategyId.NO_RAG:
        return RetrievedContext(strategy)
    chunk_index = _need(stores.chunk_index, "chunk index", strategy)
    hits = query_chunks(chunk_index, user_query, k, embedder)
    if strategy == StrategyId.NAIVE_RAG:
        text = "\n\n".join(c.text for c, _ in hits)
        return RetrievedContext(strategy, tuple(resolve_resources(hits)), text, count_tokens(text),
                                tuple(("chunk", c.chunk_id) for c, _ in hits))

    g = _need(stores.graph, "knowledge graph", strategy)
    seeds = [r for r in resolve_resources(hits) if r in g.nodes]
    dropped = [r for r in resolve_resources(hits) if r not in g.nodes]
    if dropped:
        log.warning("resources missing from graph: %s", ", ".join(dropped))

    node_index = None
    if strategy == StrategyId.GR_OPTMATCH:
        node_index = _need(stores.raw_node_index, "raw-description node index", strategy)
    elif strategy == StrategyId.GR_LLMSUM:
        node_index = _need(stores.summary_node_index, "summary node index", strategy)
    elif strategy == StrategyId.GR_REF:
        if not any(e.kind == REFERENCES for e in g.edges):
            raise ConfigurationError("GR_REF requires a graph with REFERENCES edges")
        # layered on the enhanced pipeline: prefer summaries, then raw text
        node_index = stores.summary_node_index or stores.raw_node_index

    subgraphs = []
    for res in seeds:
        if node_index is None:
            subgraphs.append(base_subgraph(g, res))
        else:
            sel = select_optional_elements(node_index, res, user_query, embedder, TOP_K_OPTIONAL)
            subgraphs.append(filtered_subgraph(g, res, sel.optional_args, sel.optional_blocks, sel.example_title))
    resources = list(seeds)
    if strategy == StrategyId.GR_REF and seeds:
        for res in expand_references_ordered(g, seeds, ref_depth)[len(seeds):]:
            subgraphs.append(base_subgraph(g, res))
            resources.append(res)
    if not subgraphs:
        return RetrievedContext(strategy)
    text = linearize(subgraphs)
    prov = [p for sg in subgraphs for p in _subgraph_provenance(sg)]
    return RetrievedContext(strategy, tuple(resources), text, count_tokens(text), tuple(prov))


def run_strategy(strategy: StrategyId, user_query: str, stores: Stores, embedder: EmbeddingProvider,
                 generator: GenerationProvider, ref_depth: int = DEFAULT_REF_DEPTH) -> StrategyResult:
    strategy = StrategyId(strategy)
    ctx = retrieve(strategy, user_query, stores, embedder, ref_depth)
    prompt = assemble_prompt(strategy, user_query, ctx.context_text) if strategy != StrategyId.NO_RAG else user_query
    try:
        reply = generator.generate(prompt, temperature=TEMPERATURE)
    except Exception as exc:
        raise GenerationError(f"generation failed: {exc}", prompt, ctx) from exc
    return StrategyResult(prompt, ctx, extract_code(reply), reply)


# ---------------------------------------------------------------------------
# Reference extraction
# ---------------------------------------------------------------------------

REFERENCE_TEMPLATE_VERSION = "v1"

REFERENCE_PROMPT = (
    "You are analysing the Terraform resource `{resource}`.\n"
    "Identify arguments that must reference outputs from other resources.\n"
    "Arguments:\n{arguments}\n"
    "Reply with a JSON array of objects with keys source_argument, target_resource and "
    "target_element. Reply with [] if there are none."
)


@dataclass
class ReferenceExtraction:
    candidates: list[tuple[str, str, str, str]] = field(default_factory=list)
    filtered: list[tuple[tuple[str, str, str, str], str]] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)


def reference_prompt(schema) -> str:
    lines = []
    for a in schema.arguments:
        lines.append(f"- {a.name}: {a.description}" if a.description else f"- {a.name}")
    return REFERENCE_PROMPT.format(resource=schema.resource_name, arguments="\n".join(lines) or "(none)")


def _parse_reply(reply: str) -> list[dict]:
    m = _FENCE.search(reply)
    body = m.group(1) if m else reply
    data = json.loads(body)
    if not isinstance(data, list):
        raise ValueError("reply is not a JSON array")
    for item in data:
        if not isinstance(item, dict) or not {"source_argument", "target_resource", "target_element"} <= set(item):
            raise ValueError(f"malformed item {item!r}")
    return data


def extract_reference_candidates(schemas, generator: GenerationProvider) -> ReferenceExtraction:
    schemas = list(schemas)
    known = {s.resource_name: s for s in schemas}
    out = ReferenceExtraction()
    for s in sorted(schemas, key=lambda s: s.resource_name):
        try:
            items = _parse_reply(generator.generate(reference_prompt(s), temperature=TEMPERATURE))
        except Exception as exc:
            log.warning("skipping %s: %s", s.resource_name, exc)
            out.skipped[s.resource_name] = str(exc)
            continue
        arg_names = {a.name for a in s.arguments}
        for item in items:
            cand = (s.resource_name, str(item["source_argument"]), str(item["target_resource"]),
                    str(item["target_element"]))
            if cand[2] not in known:
                out.filtered.append((cand, f"unknown resource {cand[2]}"))
            elif cand[1] not in arg_names:
                out.filtered.append((cand, f"unknown argument {cand[1]}"))
            elif cand not in out.candidates:
                out.candidates.append(cand)
    return out
