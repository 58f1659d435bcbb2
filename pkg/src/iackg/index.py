"""Chunking, dense indexes and node-level semantic selection."""

from __future__ import annotations

import bisect
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import (ARGUMENT, BLOCK, EXAMPLE, HAS_ARGUMENT, HAS_BLOCK, HAS_EXAMPLE, RESOURCE,
                    ConfigKnowledgeGraph, GraphNode, is_required_block)
from .providers import EmbeddingProvider, GenerationProvider

log = logging.getLogger(__name__)

CHUNK_SIZE = 1500
CHUNK_OVERLAP = 150
SEPARATORS = ("\n## ", "\n### ", "\n\n", "\n", ". ")
CHAR_LEVEL = len(SEPARATORS)
# similarity scores are rounded before ranking so that equal scores tie
SCORE_DECIMALS = 12


class IndexBuildError(RuntimeError):
    def __init__(self, message: str, batch: Sequence[str] = ()):
        super().__init__(message)
        self.batch = list(batch)


# ---------------------------------------------------------------------------
# Chunking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DocChunk:
    chunk_id: str
    resource_name: str
    text: str
    ordinal: int
    start: int = 0
    overlap: int = 0  # leading characters shared with the previous chunk


def _boundaries(text: str) -> list[list[int]]:
    """Candidate chunk-end offsets per separator priority."""
    out = []
    for sep in SEPARATORS:
        shift = len(sep) if sep == ". " else 0
        pos = []
        i = text.find(sep)
        while i != -1:
            pos.append(i + shift)
            i = text.find(sep, i + 1)
        out.append(pos)
    return out


def _best_in(bounds: list[list[int]], lo: int, hi: int, n: int) -> tuple[int, int]:
    """Highest-priority boundary b with lo < b <= hi; (priority, offset)."""
    if hi >= n:
        return -1, n
    for prio, pos in enumerate(bounds):
        j = bisect.bisect_right(pos, hi) - 1
        if j >= 0 and pos[j] > lo:
            return prio, pos[j]
    return CHAR_LEVEL, hi


def _aligned(text: str, q: int) -> bool:
    return text[q] == "\n" or (q >= 2 and text[q - 2:q] == ". ")


def chunk_spans(text: str, size: int = CHUNK_SIZE, overlap: int = CHUNK_OVERLAP) -> list[tuple[int, int, int, int]]:
    """(start, end, overlap, priority) for each chunk of ``text``.

    The end of each chunk is the highest-priority separator boundary that
    fits in the window, or a forced character split. After a character
    split the next chunk repeats exactly ``overlap`` characters; after a
    separator split the overlap starts at a separator-aligned offset and is
    dropped as far as needed to keep a better boundary in reach.
    """
    n = len(text)
    if n == 0:
        return []
    bounds = _boundaries(text)
    spans = []
    start, prev_end, prev_prio = 0, 0, None
    while True:
        if prev_prio is None:
            options = [0]
        elif prev_prio == CHAR_LEVEL:
            options = [min(overlap, prev_end - start - 1)]
        else:
            lo = max(prev_end - overlap, start + 1)
            options = [prev_end - q for q in range(lo, prev_end) if _aligned(text, q)] + [0]
        best = None
        for ov in sorted(set(options)):  # ascending overlap = widest window first
            prio, end = _best_in(bounds, prev_end, prev_end - ov + size, n)
            if best is None or prio <= best[0]:
                if best is None or prio < best[0] or ov > best[2]:
                    best = (prio, end, ov)
        prio, end, ov = best
        start = prev_end - ov
        spans.append((start, end, ov, prio))
        if end >= n:
            return spans
        prev_end, prev_prio = end, prio


def chunk_document(text: str, resource_name: str = "", doc_id: Optional[str] = None,
                   size: int = CHUNK_SIZE, overlap: int = CHUNK_OVERLAP) -> list[DocChunk]:
    doc_id = doc_id or resource_name or "doc"
    return [
        DocChunk(f"{doc_id}:{i:04d}", resource_name, text[s:e], i, s, ov)
        for i, (s, e, ov, _) in enumerate(chunk_spans(text, size, overlap))
    ]


def reconstruct(chunks: Sequence[DocChunk]) -> str:
    return "".join(c.text[c.overlap:] for c in sorted(chunks, key=lambda c: c.ordinal))


# ---------------------------------------------------------------------------
# Dense indexes
# ---------------------------------------------------------------------------


def _embed_all(provider: EmbeddingProvider, texts: list[str], batch_size: int, workers: int) -> np.ndarray:
    batches = [texts[i:i + batch_size] for i in range(0, len(texts), batch_size)]

    def run(batch: list[str]) -> list[list[float]]:
        try:
            vecs = provider.embed(batch)
        except Exception as exc:
            raise IndexBuildError(f"embedding provider failed: {exc}", batch) from exc
        if len(vecs) != len(batch):
            raise IndexBuildError(f"provider returned {len(vecs)} vectors for {len(batch)} texts", batch)
        for v in vecs:
            if len(v) != provider.dimension:
                raise IndexBuildError(f"vector of length {len(v)}, expected {provider.dimension}", batch)
        return vecs

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]
    rows = [v for r in results for v in r]
    mat = np.asarray(rows, dtype=np.float64).reshape(len(rows), provider.dimension)
    if not np.all(np.isfinite(mat)):
        raise IndexBuildError("provider returned non-finite values")
    return mat


def cosine_scores(matrix: np.ndarray, query: Sequence[float]) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    qn = float(np.linalg.norm(q))
    norms = np.linalg.norm(matrix, axis=1)
    denom = norms * qn
    dots = matrix @ q
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(np.round(sims, SCORE_DECIMALS), -1.0, 1.0)


def _rank(ids: Sequence[str], sims: np.ndarray, k: int) -> list[int]:
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
    return order[:k]


@dataclass
class ChunkIndex:
    chunks: list[DocChunk]
    vectors: np.ndarray
    dimension: int
    model_id: str = ""

    def __len__(self) -> int:
        return len(self.chunks)

    def to_lines(self) -> str:
        out = []
        for c, v in zip(self.chunks, self.vectors):
            out.append(json.dumps({
                "id": c.chunk_id, "resource_name": c.resource_name, "ordinal": c.ordinal,
                "start": c.start, "overlap": c.overlap, "text": c.text, "vector": [float(x) for x in v],
            }, sort_keys=True))
        header = json.dumps({"dimension": self.dimension, "model_id": self.model_id, "kind": "chunks"}, sort_keys=True)
        return "\n".join([header] + out) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "ChunkIndex":
        lines = [json.loads(l) for l in text.splitlines() if l.strip()]
        header, rows = lines[0], lines[1:]
        chunks = [DocChunk(r["id"], r["resource_name"], r["text"], r["ordinal"], r["start"], r["overlap"]) for r in rows]
        vecs = np.asarray([r["vector"] for r in rows], dtype=np.float64).reshape(len(rows), header["dimension"])
        return cls(chunks, vecs, header["dimension"], header.get("model_id", ""))


def build_chunk_index(chunks: Sequence[DocChunk], provider: EmbeddingProvider,
                      batch_size: int = 64, workers: int = 1) -> ChunkIndex:
    if not chunks:
        raise IndexBuildError("no chunks to index")
    vecs = _embed_all(provider, [c.text for c in chunks], batch_size, workers)
    return ChunkIndex(list(chunks), vecs, provider.dimension, getattr(provider, "model_id", ""))


def query_chunks(index: ChunkIndex, query_text: str, k: int, provider: EmbeddingProvider) -> list[tuple[DocChunk, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        return []
    sims = cosine_scores(index.vectors, provider.embed([query_text])[0])
    return [(index.chunks[i], float(sims[i])) for i in _rank([c.chunk_id for c in index.chunks], sims, k)]


# ---------------------------------------------------------------------------
# Node-level index
# ---------------------------------------------------------------------------

OPTIONAL_ARGUMENT = "optional-argument"
OPTIONAL_BLOCK = "optional-block"
EXAMPLE_ENTRY = "example"


@dataclass(frozen=True)
class NodeEmbeddingEntry:
    node_id: str
    kind: str
    resource_name: str
    name: str
    embedded_text: str


def raw_node_text(node: GraphNode) -> str:
    if node.kind == EXAMPLE:
        return f"{node.name}\n{node['code']}".strip()
    desc = node.get("description") or ""
    return f"{node.name}: {desc}" if desc else node.name


def indexable_nodes(g: ConfigKnowledgeGraph) -> list[tuple[str, GraphNode]]:
    """Top-level optional arguments, optional blocks and examples."""
    out = []
    for res in g.resources():
        for a in sorted(g.children(res, HAS_ARGUMENT), key=lambda n: n.id):
            if not a["required"]:
                out.append((OPTIONAL_ARGUMENT, a))
        for b in sorted(g.children(res, HAS_BLOCK), key=lambda n: n.id):
            if not is_required_block(b):
                out.append((OPTIONAL_BLOCK, b))
        for e in sorted(g.children(res, HAS_EXAMPLE), key=lambda n: n["index"]):
            out.append((EXAMPLE_ENTRY, e))
    return out


@dataclass
class NodeIndex:
    entries: list[NodeEmbeddingEntry]
    vectors: np.ndarray
    dimension: int
    text_source: str = "raw"
    model_id: str = ""
    _by_resource: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        for i, e in enumerate(self.entries):
            self._by_resource.setdefault((e.resource_name, e.kind), []).append(i)

    def __len__(self) -> int:
        return len(self.entries)

    def rows(self, resource: str, kind: str) -> list[int]:
        return self._by_resource.get((resource, kind), [])

    def to_lines(self) -> str:
        header = json.dumps({"dimension": self.dimension, "model_id": self.model_id, "kind": "nodes",
                             "text_source": self.text_source}, sort_keys=True)
        out = [header]
        for e, v in zip(self.entries, self.vectors):
            out.append(json.dumps({"id": e.node_id, "node_kind": e.kind, "resource_name": e.resource_name,
                                   "name": e.name, "text": e.embedded_text, "vector": [float(x) for x in v]},
                                  sort_keys=True))
        return "\n".join(out) + "\n"

    @classmethod
    def from_lines(cls, text: str) -> "NodeIndex":
        lines = [json.loads(l) for l in text.splitlines() if l.strip()]
        header, rows = lines[0], lines[1:]
        entries = [NodeEmbeddingEntry(r["id"], r["node_kind"], r["resource_name"], r["name"], r["text"]) for r in rows]
        vecs = np.asarray([r["vector"] for r in rows], dtype=np.float64).reshape(len(rows), header["dimension"])
        return cls(entries, vecs, header["dimension"], header.get("text_source", "raw"), header.get("model_id", ""))


def build_node_index(g: ConfigKnowledgeGraph, provider: EmbeddingProvider, text_source: str = "raw",
                     summaries: Optional[dict[str, str]] = None, combine: str = "replace",
                     batch_size: int = 64, workers: int = 1) -> NodeIndex:
    """Embed optional elements and examples.

    ``text_source`` is ``"raw"`` (name plus documentation description) or
    ``"summary"`` (generated summaries; ``combine="concat"`` appends the raw
    text instead of replacing it).
    """
    if text_source not in ("raw", "summary"):
        raise ValueError(f"unknown text source {text_source!r}")
    nodes = indexable_nodes(g)
    if text_source == "summary":
        summaries = summaries or {}
        missing = [n.id for _, n in nodes if not summaries.get(n.id)]
        if missing:
            raise IndexBuildError(f"{len(missing)} nodes have no summary: {', '.join(missing[:10])}", missing)
    entries = []
    for kind, n in nodes:
        raw = raw_node_text(n)
        if text_source == "raw":
            text = raw
        elif combine == "concat":
            text = f"{summaries[n.id]}\n{raw}"
        else:
            text = summaries[n.id]
        entries.append(NodeEmbeddingEntry(n.id, kind, n.resource, n.name, text))
    if entries:
        vecs = _embed_all(provider, [e.embedded_text for e in entries], batch_size, workers)
    else:
        vecs = np.zeros((0, provider.dimension))
    return NodeIndex(entries, vecs, provider.dimension, text_source, getattr(provider, "model_id", ""))


@dataclass(frozen=True)
class Selection:
    optional_args: tuple[str, ...] = ()
    optional_blocks: tuple[str, ...] = ()
    example_title: str = ""


def select_optional_elements(index: NodeIndex, resource_name: str, query_text: str,
                             provider: EmbeddingProvider, k: int = 5) -> Selection:
    q = provider.embed([query_text])[0]

    def top(kind: str, limit: int) -> list[str]:
        rows = index.rows(resource_name, kind)
        if not rows:
            return []
        sims = cosine_scores(index.vectors[rows], q)
        ids = [index.entries[r].node_id for r in rows]
        return [index.entries[rows[i]].name for i in _rank(ids, sims, limit)]

    examples = top(EXAMPLE_ENTRY, 1)
    return Selection(tuple(top(OPTIONAL_ARGUMENT, k)), tuple(top(OPTIONAL_BLOCK, k)), examples[0] if examples else "")


# ---------------------------------------------------------------------------
# Generated node summaries
# ---------------------------------------------------------------------------

SUMMARY_TEMPLATE_VERSION = "v1"

SUMMARY_TEMPLATES = {
    RESOURCE: (
        "Summarize the Terraform resource `{name}` for semantic search. Describe its primary "
        "capabilities and common configuration scenarios in plain language.\n"
        "Documentation: {description}\nAnswer in at most three sentences."
    ),
    ARGUMENT: (
        "Explain the argument `{name}` of the Terraform resource `{resource}` (type {type}, "
        "{requiredness}). Connect this configuration parameter to user goals and the functional "
        "outcome of setting it.\nDocumentation: {description}\nAnswer in at most two sentences."
    ),
    BLOCK: (
        "Explain the nested configuration block `{name}` of the Terraform resource `{resource}`. "
        "Describe which user goals it serves and what behaviour it configures.\n"
        "Documentation: {description}\nAnswer in at most two sentences."
    ),
    EXAMPLE: (
        "Describe what the following usage example of `{resource}` (titled \"{name}\") builds and "
        "which scenario it fits.\n```hcl\n{code}\n```\nAnswer in at most two sentences."
    ),
}


def summary_prompt(node: GraphNode) -> str:
    tpl = SUMMARY_TEMPLATES[node.kind]
    props = {k: v for k, v in node.props}
    props.setdefault("description", "")
    props["description"] = props["description"] or "(none)"
    props["resource"] = node.resource
    if node.kind == ARGUMENT:
        props["requiredness"] = "required" if node["required"] else "optional"
    return tpl.format(**props)


def summary_cache_key(node_id: str, prompt: str) -> str:
    h = hashlib.sha256(f"{SUMMARY_TEMPLATE_VERSION}\0{node_id}\0{prompt}".encode("utf-8"))
    return h.hexdigest()


@dataclass
class SummaryResult:
    summaries: dict[str, str]
    failures: dict[str, str]
    generator_calls: int


class SummaryCache:
    """JSON file mapping content hash -> summary."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.data: dict[str, str] = {}
        if self.path and self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))

    def get(self, key: str) -> Optional[str]:
        return self.data.get(key)

    def put(self, key: str, value: str) -> None:
        self.data[key] = value

    def save(self) -> None:
        if self.path:
            tmp = self.path.with_suffix(self.path.suffix + ".tmp")
            tmp.write_text(json.dumps(self.data, indent=1, sort_keys=True), encoding="utf-8")
            tmp.replace(self.path)


def generate_node_summaries(g: ConfigKnowledgeGraph, generator: GenerationProvider,
                            cache: Optional[SummaryCache] = None,
                            kinds: Iterable[str] = (RESOURCE, ARGUMENT, BLOCK, EXAMPLE)) -> SummaryResult:
    cache = cache if cache is not None else SummaryCache()
    kinds = set(kinds)
    summaries, failures = {}, {}
    calls = 0
    for nid in sorted(g.nodes):
        node = g.nodes[nid]
        if node.kind not in kinds:
            continue
        prompt = summary_prompt(node)
        key = summary_cache_key(nid, prompt)
        hit = cache.get(key)
        if hit is not None:
            summaries[nid] = hit
            continue
        calls += 1
        try:
            text = generator.generate(prompt, temperature=0.0).strip()
            if not text:
                raise ValueError("empty summary")
        except Exception as exc:
            log.warning("summary failed for %s: %s", nid, exc)
            failures[nid] = str(exc)
            summaries[nid] = raw_node_text(node)
            continue
        cache.put(key, text)
        summaries[nid] = text
    cache.save()
    return SummaryResult(summaries, failures, calls)
