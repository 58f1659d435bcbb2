from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from iackg import graph, index, ingest, retrieval  # noqa: E402
from iackg.providers import EchoGenerator, HashingEmbedder  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
BASELINE = FIXTURES / "baseline"
PROMPTS = FIXTURES / "prompts"
REFERENCE_OUTCOMES = FIXTURES / "reference_outcomes.csv"
STUB_OUTCOMES = FIXTURES / "stub_outcomes.csv"

SECONDARY_QUERY = "Create a CodeBuild project that uploads secondary artifacts to S3 with an artifact identifier."


def load_references() -> list[tuple[str, str, str, str]]:
    return [tuple(r) for r in json.loads((CORPUS / "references.json").read_text())]


def chunks_for(doc_dir: Path, only: tuple[str, ...] = ()) -> list[index.DocChunk]:
    chunks = []
    for path in ingest.doc_files(doc_dir):
        text = path.read_text(encoding="utf-8")
        name = ingest.parse_doc_page(text).resource_name
        if only and name not in only:
            continue
        chunks += index.chunk_document(text, name)
    return chunks


@pytest.fixture(scope="session")
def embedder():
    return HashingEmbedder()


@pytest.fixture(scope="session")
def corpus_schemas():
    return ingest.ingest_corpus(CORPUS / "schemas", CORPUS / "docs")


@pytest.fixture(scope="session")
def corpus_graph(corpus_schemas):
    g, report = graph.add_reference_edges(graph.build_graph(corpus_schemas), load_references())
    assert not report.rejected
    return g


@pytest.fixture(scope="session")
def corpus_stores(corpus_graph, embedder):
    chunk_idx = index.build_chunk_index(chunks_for(CORPUS / "docs"), embedder)
    raw = index.build_node_index(corpus_graph, embedder, "raw")
    summaries = index.generate_node_summaries(corpus_graph, EchoGenerator()).summaries
    summ = index.build_node_index(corpus_graph, embedder, "summary", summaries)
    return retrieval.Stores(corpus_graph, chunk_idx, raw, summ)


@pytest.fixture(scope="session")
def ab_stores(corpus_graph, embedder):
    """Chunk index over one resource (aws_subnet) that references another (aws_vpc)."""
    chunk_idx = index.build_chunk_index(chunks_for(CORPUS / "docs", ("aws_subnet",)), embedder)
    raw = index.build_node_index(corpus_graph, embedder, "raw")
    return retrieval.Stores(corpus_graph, chunk_idx, raw, None)


@pytest.fixture(scope="session")
def store_files(tmp_path_factory, corpus_stores):
    """The corpus stores serialized to disk, as the experiment runner loads them."""
    d = tmp_path_factory.mktemp("stores")
    (d / "graph.jsonl").write_text(corpus_stores.graph.export_lines())
    (d / "chunks.jsonl").write_text(corpus_stores.chunk_index.to_lines())
    (d / "nodes.jsonl").write_text(corpus_stores.raw_node_index.to_lines())
    (d / "summary_nodes.jsonl").write_text(corpus_stores.summary_node_index.to_lines())
    return d


def write_experiment_config(root: Path, store_dir: Path, name: str = "exp", strategy: str = "GR_OPTMATCH",
                            prompt_set: Path = PROMPTS, **extra) -> Path:
    """Write a stubbed-validator experiment config under ``root``."""
    root.mkdir(parents=True, exist_ok=True)
    cfg = {
        "experiment_name": name,
        "strategy": strategy,
        "prompt_set": str(prompt_set),
        "output_dir": str(root / "runs" / name),
        "graph": str(store_dir / "graph.jsonl"),
        "chunk_index": str(store_dir / "chunks.jsonl"),
        "raw_node_index": str(store_dir / "nodes.jsonl"),
        "summary_node_index": str(store_dir / "summary_nodes.jsonl"),
        "generator": {"kind": "template"},
        "validator": {
            "mode": "stubbed",
            "tv": f"table:{STUB_OUTCOMES}#tv",
            "iv": f"table:{STUB_OUTCOMES}#iv",
        },
    }
    cfg.update(extra)
    path = root / f"{name}.yaml"
    path.write_text(yaml.safe_dump(cfg, sort_keys=True))
    return path


def copy_tree(src: Path, dst: Path) -> Path:
    shutil.copytree(src, dst)
    return dst


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
