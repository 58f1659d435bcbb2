"""Command-line entry point: ``python -m iackg <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import analyzer, graph, harness, index, ingest, retrieval, stats
from .providers import make_embedder, make_generator

log = logging.getLogger("iackg")


def _embedder_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embedder", default="hashing", choices=["hashing", "http"])
    p.add_argument("--dimension", type=int, default=768)
    p.add_argument("--embedder-url")


def _generator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--generator", default="template", choices=["echo", "template", "http"])
    p.add_argument("--generator-url")
    p.add_argument("--model", default=None)


def _embedder(ns):
    spec = {"kind": ns.embedder, "dimension": ns.dimension}
    if ns.embedder == "http":
        spec["url"] = ns.embedder_url
    return make_embedder(spec)


def _generator(ns):
    spec = {"kind": ns.generator}
    if ns.generator == "http":
        spec["url"] = ns.generator_url
        if ns.model:
            spec["model_id"] = ns.model
    return make_generator(spec)


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_ingest(ns) -> int:
    schemas = ingest.ingest_corpus(ns.schemas, ns.docs)
    _write(ns.out, ingest.dump_enriched(schemas))
    cov = ingest.compute_coverage(schemas)
    if ns.coverage:
        _write(ns.coverage, cov.to_markdown())
    orphans = sum(len(s.orphans) for s in schemas)
    print(f"ingested {len(schemas)} resources, {orphans} orphaned doc entries")
    print(cov.to_markdown())
    return 0


def cmd_build_graph(ns) -> int:
    schemas = ingest.load_enriched(_read(ns.enriched))
    g = graph.build_graph(schemas)
    refs = []
    if ns.references:
        refs = [tuple(r) for r in json.loads(_read(ns.references))]
    elif ns.extract_references:
        ext = retrieval.extract_reference_candidates(schemas, _generator(ns))
        refs = ext.candidates
        print(f"extracted {len(refs)} reference candidates; {len(ext.filtered)} filtered, {len(ext.skipped)} skipped")
    if refs:
        g, rep = graph.add_reference_edges(g, refs)
        print(f"references: {len(rep.inserted)} inserted, {len(rep.duplicates)} duplicate, {len(rep.rejected)} rejected")
    _write(ns.out, g.export_lines())
    print(json.dumps(g.stats(), indent=1, sort_keys=True))
    return 0


def cmd_graph_stats(ns) -> int:
    g = graph.ConfigKnowledgeGraph.import_lines(_read(ns.graph))
    print(json.dumps(g.stats(), indent=1, sort_keys=True))
    return 0


def cmd_build_chunks(ns) -> int:
    chunks = []
    for path in ingest.doc_files(ns.docs):
        text = path.read_text(encoding="utf-8")
        try:
            name = ingest.parse_doc_page(text).resource_name
        except ingest.IngestError as exc:
            log.warning("skipping %s: %s", path.name, exc)
            continue
        chunks += index.chunk_document(text, name)
    idx = index.build_chunk_index(chunks, _embedder(ns), workers=ns.workers)
    _write(ns.out, idx.to_lines())
    print(f"indexed {len(idx)} chunks")
    return 0


def cmd_build_nodes(ns) -> int:
    g = graph.ConfigKnowledgeGraph.import_lines(_read(ns.graph))
    summaries = None
    if ns.source == "summary":
        cache = index.SummaryCache(ns.summary_cache)
        res = index.generate_node_summaries(g, _generator(ns), cache)
        summaries = res.summaries
        print(f"summaries: {len(res.summaries)} nodes, {res.generator_calls} generator calls, "
              f"{len(res.failures)} failures")
    idx = index.build_node_index(g, _embedder(ns), ns.source, summaries, ns.combine, workers=ns.workers)
    _write(ns.out, idx.to_lines())
    print(f"indexed {len(idx)} nodes")
    return 0


def cmd_query(ns) -> int:
    text = _read(ns.index)
    kind = json.loads(text.splitlines()[0]).get("kind")
    emb = _embedder(ns)
    query = " ".join(ns.text)
    if kind == "nodes":
        idx = index.NodeIndex.from_lines(text)
        sims = index.cosine_scores(idx.vectors, emb.embed([query])[0])
        order = sorted(range(len(idx)), key=lambda i: (-sims[i], idx.entries[i].node_id))[:ns.k]
        for i in order:
            print(f"{sims[i]:.4f}\t{idx.entries[i].node_id}")
    else:
        idx = index.ChunkIndex.from_lines(text)
        for chunk, sim in index.query_chunks(idx, query, ns.k, emb):
            print(f"{sim:.4f}\t{chunk.chunk_id}\t{chunk.resource_name}")
    return 0


def cmd_generate(ns) -> int:
    def load(p, cls):
        return cls(_read(p)) if p else None

    stores = retrieval.Stores(
        load(ns.graph, graph.ConfigKnowledgeGraph.import_lines),
        load(ns.chunk_index, index.ChunkIndex.from_lines),
        load(ns.node_index, index.NodeIndex.from_lines),
        load(ns.summary_node_index, index.NodeIndex.from_lines),
    )
    strategy = retrieval.StrategyId.parse(ns.strategy)
    queries = [q.strip() for q in _read(ns.query_file).split("\n\n") if q.strip()]
    emb, gen = _embedder(ns), _generator(ns)
    out = Path(ns.out)
    for i, q in enumerate(queries):
        res = retrieval.run_strategy(strategy, q, stores, emb, gen, ns.ref_depth)
        d = out / f"q{i:04d}"
        _write(d / "prompt.txt", res.prompt)
        _write(d / "context.json", json.dumps(res.context.to_dict(), indent=1, sort_keys=True) + "\n")
        _write(d / "main.tf", res.generated_code)
        print(f"q{i:04d}\t{res.context.token_count} context tokens\t{','.join(res.context.resources)}")
    return 0


def cmd_run(ns) -> int:
    cfg = harness.load_config(ns.config)
    res = harness.run_experiment(cfg, ns.max_prompts)
    print(f"executed {len(res.executed)}, skipped {len(res.skipped)}, completed {len(res.outcomes)}")
    print(harness.render_summary(cfg.experiment_name, harness.summarize(res.outcomes)))
    return 0


def cmd_summarize(ns) -> int:
    outcomes = harness.load_outcomes(ns.experiment)
    if not outcomes:
        print(f"no outcomes in {ns.experiment}", file=sys.stderr)
        return 1
    print(harness.render_summary(Path(ns.experiment).name, harness.summarize(outcomes)))
    return 0


def cmd_analyze(ns) -> int:
    cutoff = analyzer.parse_cutoff(ns.cutoff)
    changelog = _read(ns.changelog) if ns.changelog else None
    records = analyzer.analyze_logs(ns.logs, changelog, cutoff)
    outcomes = harness.load_outcomes(ns.experiment) if ns.experiment else {}
    failed = [k for k, o in outcomes.items() if o.tv_status == harness.FAIL]
    intent = []
    if ns.experiment and ns.prompt_set:
        idx = analyzer.build_changelog_index(changelog) if changelog else None
        cases = {c.prompt_id: c for c in harness.load_prompt_set(ns.prompt_set)}
        for pid, o in outcomes.items():
            if o.iv_status != harness.FAIL:
                continue
            code = Path(ns.experiment, "work", pid, harness.SCRIPT_NAME)
            generated = analyzer.declared_resource_types(code.read_text() if code.exists() else "")
            expected = []
            ref = cases.get(pid).reference if pid in cases else None
            if ref:
                for tf in sorted(ref.glob("*.tf")):
                    expected += analyzer.declared_resource_types(tf.read_text())
            intent.append(analyzer.classify_intent(pid, o.iv_log, expected, generated, idx, cutoff))
    st = analyzer.corpus_stats(records, list(outcomes.values()), failed)
    paths = analyzer.emit_reports(st, records, ns.out, intent)
    print(f"{st.total_errors} errors in {len(st.per_script)} failed scripts -> {paths['report']}")
    return 0


def cmd_stats_compare(ns) -> int:
    outcomes = stats.load_outcome_table(ns.table) if ns.table else {}
    for d in ns.experiments:
        name = Path(d).name
        manifest = Path(d) / "manifest.json"
        if manifest.exists():
            name = json.loads(manifest.read_text()).get("experiment_name", name)
        outcomes[name] = harness.outcome_pairs(harness.load_outcomes(d))
    if len(outcomes) < 2:
        print("need at least two methods to compare", file=sys.stderr)
        return 2
    rep = stats.compare_experiments(outcomes, ns.stage, ns.alpha, ns.correction, ns.continuity)
    stats.write_stats_outputs(rep, ns.out)
    print(stats.render_stats_markdown(rep))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="iackg", description="Knowledge-graph retrieval for IaC generation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse schema dumps and docs into enriched schemas")
    p.add_argument("--schemas", required=True)
    p.add_argument("--docs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--coverage")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("build-graph", help="build the knowledge graph from enriched schemas")
    p.add_argument("--enriched", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--references", help="JSON list of [src_res, src_arg, dst_res, dst_element]")
    p.add_argument("--extract-references", action="store_true")
    _generator_args(p)
    p.set_defaults(fn=cmd_build_graph)

    p = sub.add_parser("graph", help="graph utilities")
    gsub = p.add_subparsers(dest="graph_command", required=True)
    q = gsub.add_parser("stats")
    q.add_argument("--graph", required=True)
    q.set_defaults(fn=cmd_graph_stats)

    p = sub.add_parser("index", help="semantic indexes")
    isub = p.add_subparsers(dest="index_command", required=True)
    q = isub.add_parser("build-chunks")
    q.add_argument("--docs", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--workers", type=int, default=1)
    _embedder_args(q)
    q.set_defaults(fn=cmd_build_chunks)
    q = isub.add_parser("build-nodes")
    q.add_argument("--graph", required=True)
    q.add_argument("--source", choices=["raw", "summary"], default="raw")
    q.add_argument("--combine", choices=["replace", "concat"], default="replace")
    q.add_argument("--summary-cache")
    q.add_argument("--out", required=True)
    q.add_argument("--workers", type=int, default=1)
    _embedder_args(q)
    _generator_args(q)
    q.set_defaults(fn=cmd_build_nodes)
    q = isub.add_parser("query")
    q.add_argument("--index", required=True)
    q.add_argument("--k", type=int, default=5)
    q.add_argument("text", nargs="+")
    _embedder_args(q)
    q.set_defaults(fn=cmd_query)

    p = sub.add_parser("generate", help="run one strategy over a query file")
    p.add_argument("--strategy", required=True)
    p.add_argument("--query-file", required=True, help="queries separated by blank lines")
    p.add_argument("--graph")
    p.add_argument("--chunk-index")
    p.add_argument("--node-index")
    p.add_argument("--summary-node-index")
    p.add_argument("--ref-depth", type=int, default=2)
    p.add_argument("--out", required=True)
    _embedder_args(p)
    _generator_args(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("run", help="run an experiment from a YAML config")
    p.add_argument("--config", required=True)
    p.add_argument("--max-prompts", type=int)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("summarize", help="stage pass rates of an experiment")
    p.add_argument("--experiment", required=True)
    p.set_defaults(fn=cmd_summarize)

    p = sub.add_parser("analyze", help="classify validation errors")
    p.add_argument("--logs", required=True)
    p.add_argument("--changelog")
    p.add_argument("--cutoff", default="2023-10")
    p.add_argument("--experiment")
    p.add_argument("--prompt-set")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("stats", help="statistical comparison")
    ssub = p.add_subparsers(dest="stats_command", required=True)
    q = ssub.add_parser("compare")
    q.add_argument("experiments", nargs="*")
    q.add_argument("--table", help="wide CSV of per-prompt outcomes (<method>_tv, <method>_iv)")
    q.add_argument("--stage", choices=list(stats.STAGES), default="tv")
    q.add_argument("--alpha", type=float, default=0.05)
    q.add_argument("--correction", choices=["bonferroni", "none"], default="bonferroni")
    q.add_argument("--continuity", action="store_true")
    q.add_argument("--out", required=True)
    q.set_defaults(fn=cmd_stats_compare)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return ns.fn(ns)


if __name__ == "__main__":
    sys.exit(main())
