from __future__ import annotations

import datetime as dt
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BASELINE
from iackg import analyzer
from iackg.analyzer import Element
from iackg.harness import ValidationOutcome

TAX = analyzer.default_taxonomy()


def stanza(title: str, detail: str, line: int = 3, rt: str = "aws_s3_bucket") -> str:
    return (f"╷\n│ Error: {title}\n│\n│   on main.tf line {line}, in resource \"{rt}\" \"x\":\n"
            f"│   {line}:   foo = 1\n│\n│ {detail}\n╵\n")


UNSUPPORTED_ARG = stanza("Unsupported argument", 'An argument named "acl" is not expected here.')
UNSUPPORTED_BLOCK = stanza("Unsupported block type", 'Blocks of type "versioning" are not expected here.')
MISSING_ARG = stanza("Missing required argument", 'The argument "bucket" is required, but no definition was found.')
UNKNOWN_TYPE = stanza("Invalid resource type",
                      'The provider hashicorp/aws does not support resource type "aws_s3_bucket_magic".',
                      rt="aws_s3_bucket_magic")
STANZAS = [UNSUPPORTED_ARG, UNSUPPORTED_BLOCK, MISSING_ARG, UNKNOWN_TYPE]


def test_taxonomy_shape():
    ids = [l.id for l in TAX.labels]
    assert len(ids) == len(set(ids))
    cats = [l.category for l in TAX.labels]
    # syntax and runtime labels are tried before schema labels
    assert cats.index("Schema") > max(i for i, c in enumerate(cats) if c != "Schema")
    assert {l.dim2 for l in TAX.labels} <= set(analyzer.DIM2)
    assert {l.id for l in TAX.labels if l.attributable} == {"arg_unsupported", "block_unsupported", "res_unknown_type"}


def test_parse_log_extracts_elements_and_locations():
    log = "Terraform init ok\n\n" + "\n".join(STANZAS)
    errs = analyzer.parse_tv_log("s1", log)
    assert [e.element for e in errs] == [
        Element("argument", "acl", "aws_s3_bucket"),
        Element("block", "versioning", "aws_s3_bucket"),
        Element("argument", "bucket", "aws_s3_bucket"),
        Element("resource", "aws_s3_bucket_magic", "aws_s3_bucket_magic"),
    ]
    assert all(e.location == ("main.tf", 3) for e in errs)
    assert errs[0].summary == "Unsupported argument"


def test_ansi_codes_and_warning_stanzas():
    log = ("\x1b[31m╷\x1b[0m\n\x1b[31m│\x1b[0m \x1b[1m\x1b[31mError: \x1b[0m\x1b[1mUnsupported argument\x1b[0m\n"
           "│ An argument named \"acl\" is not expected here.\n╵\n"
           "╷\n│ Warning: Argument is deprecated\n│\n│ An argument named \"zzz\" is not expected here.\n╵\n")
    errs = analyzer.parse_tv_log("s", log)
    assert len(errs) == 1
    assert errs[0].element == Element("argument", "acl", "")


def test_classification_labels():
    recs = [analyzer.classify(e) for e in analyzer.parse_tv_log("s", "".join(STANZAS))]
    assert [(r.category, r.subcategory, r.dim2) for r in recs] == [
        ("Schema", "Argument error", "FactualIncorrectness"),
        ("Schema", "Block error", "FactualIncorrectness"),
        ("Schema", "Argument error", "Incompleteness"),
        ("Schema", "Resource error", "FactualIncorrectness"),
    ]
    weird = analyzer.classify(analyzer.parse_tv_log("s", "Error: Something odd happened\n")[0])
    assert weird.flagged and weird.subcategory == TAX.unknown.subcategory


def test_missing_file_is_runtime_not_schema():
    msg = stanza("Invalid function argument",
                 'Invalid value for "path" parameter: no file exists at "./lambda.zip".')
    rec = analyzer.classify(analyzer.parse_tv_log("s", msg)[0])
    assert rec.category == "Runtime"


def test_release_and_cutoff_dates():
    assert analyzer.parse_release_date("May 25, 2023") == dt.date(2023, 5, 25)
    assert analyzer.parse_release_date("October 2023") == dt.date(2023, 10, 1)
    assert analyzer.parse_release_date("2023-05") == dt.date(2023, 5, 1)
    assert analyzer.parse_release_date("soon") is None
    assert analyzer.parse_cutoff("2023-10") == dt.date(2023, 10, 31)
    assert analyzer.parse_cutoff("2024-02") == dt.date(2024, 2, 29)
    with pytest.raises(ValueError):
        analyzer.parse_cutoff("whenever")


CHANGELOG = """# Changelog

## 6.0.0 (Unreleased)

* resource/aws_s3_bucket: `website` is deprecated

## 5.1.0 (December 1, 2023)

* resource/aws_s3_bucket: The `logging` argument is deprecated

## 5.0.0 (May 25, 2023)

* resource/aws_s3_bucket: The `acl` argument has been deprecated
* resource/aws_s3_bucket: Add `acl_extra` support
* resource/aws_instance: The `cpu_core_count` argument has been deprecated

## bogus header

* resource/aws_s3_bucket: The `ghost` argument has been deprecated
"""


def test_changelog_attribution_rules():
    idx = analyzer.build_changelog_index(CHANGELOG)
    cutoff = analyzer.parse_cutoff("2023-10")

    def attr(name, rt="aws_s3_bucket"):
        return analyzer.attribute_element(idx, Element("argument", name, rt), cutoff)

    assert attr("acl") == analyzer.DEPRECATED
    assert attr("acl_extra") == analyzer.NEVER_DOCUMENTED       # mentioned, not deprecated
    assert attr("logging") == analyzer.NEVER_DOCUMENTED         # after the cutoff
    assert attr("website") == analyzer.NEVER_DOCUMENTED         # unreleased
    assert attr("ghost") == analyzer.NEVER_DOCUMENTED           # no dated header
    assert attr("cpu_core_count") == analyzer.NEVER_DOCUMENTED  # other resource
    assert attr("cpu_core_count", "aws_instance") == analyzer.DEPRECATED
    assert analyzer.attribute_element(idx, Element("argument", "logging", "aws_s3_bucket"),
                                      dt.date(2023, 12, 1)) == analyzer.DEPRECATED
    assert analyzer.build_changelog_index("no headers").warnings


@settings(max_examples=100, deadline=None)
@given(st.dates(dt.date(2021, 1, 1), dt.date(2025, 1, 1)), st.dates(dt.date(2021, 1, 1), dt.date(2025, 1, 1)))
def test_attribution_monotone_in_cutoff(d1, d2):
    early, late = sorted((d1, d2))
    idx = analyzer.build_changelog_index((BASELINE / "CHANGELOG.md").read_text())
    elements = [Element("argument", e.text.split("`")[1], e.resource) for e in idx.entries if "`" in e.text]
    for el in elements:
        if analyzer.attribute_element(idx, el, early) == analyzer.DEPRECATED:
            assert analyzer.attribute_element(idx, el, late) == analyzer.DEPRECATED


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(STANZAS), min_size=1, max_size=8), st.randoms())
def test_stanza_permutation_invariance(stanzas, rnd):
    def labels(parts):
        return Counter(analyzer.classify(e).atomic_label
                       for e in analyzer.parse_tv_log("s", "\n".join(parts)))

    shuffled = list(stanzas)
    rnd.shuffle(shuffled)
    assert labels(stanzas) == labels(shuffled)
    assert sum(labels(stanzas).values()) == len(stanzas)


def test_intent_classification():
    idx = analyzer.build_changelog_index(
        "## 5.0.0 (May 1, 2023)\n\n* resource/aws_old_thing: This resource is deprecated\n")
    cutoff = dt.date(2023, 10, 31)
    r = analyzer.classify_intent("p", "deny", ["aws_new"], ["aws_old_thing"], idx, cutoff)
    assert r.dim2 == "FactualIncorrectness"
    r = analyzer.classify_intent("p", "deny", ["aws_a", "aws_b"], ["aws_a", "aws_c"], idx, cutoff)
    assert r.dim2 == "ContextualReasoningFailure"
    r = analyzer.classify_intent("p", "deny", ["aws_a", "aws_b"], ["aws_a"], idx, cutoff)
    assert r.dim2 == "Incompleteness"
    r = analyzer.classify_intent("p", "deny", ["aws_a"], ["aws_a"], idx, cutoff)
    assert r.flagged and r.category == "Intent"


def test_declared_resource_types():
    code = 'resource "aws_a" "x" {}\n  resource "aws_b" "y" {\n}\n# resource "aws_c" "z"\nresource "aws_a" "w" {}'
    assert analyzer.declared_resource_types(code) == ["aws_a", "aws_b"]


def test_corpus_stats_counts_zero_error_failures():
    recs = [analyzer.classify(e) for e in analyzer.parse_tv_log("s1", UNSUPPORTED_ARG + MISSING_ARG)]
    outcomes = [ValidationOutcome("s1", "fail", "not-run"), ValidationOutcome("s2", "fail", "not-run"),
                ValidationOutcome("s3", "pass", "pass")]
    st_ = analyzer.corpus_stats(recs, outcomes)
    assert st_.per_script == {"s1": 2, "s2": 0}
    assert st_.mean == 1.0 and st_.median == 1.0 and st_.maximum == 2
    assert st_.stage_totals["tv_fail"] == 2


def test_empty_corpus_stats():
    st_ = analyzer.corpus_stats([])
    assert st_.mean is None and st_.total_errors == 0
    assert "n/a" in analyzer.render_report(st_)


def test_overrides_replace_labels():
    recs = [analyzer.classify(e) for e in analyzer.parse_tv_log("s1", UNSUPPORTED_ARG + MISSING_ARG)]
    out = analyzer.apply_overrides(recs, {("s1", 1): "arg_conflict"})
    assert out[0] == recs[0]
    assert out[1].atomic_label == TAX.by_id("arg_conflict").label
    assert out[1].manual_override == "arg_conflict"


def test_reports_are_byte_stable(tmp_path):
    cutoff = analyzer.parse_cutoff("2023-10")
    text = (BASELINE / "CHANGELOG.md").read_text()
    outs = []
    for name in ("a", "b"):
        recs = analyzer.analyze_logs(BASELINE / "logs", text, cutoff)
        st_ = analyzer.corpus_stats(recs)
        paths = analyzer.emit_reports(st_, recs, tmp_path / name)
        outs.append((paths["report"].read_bytes(), paths["errors"].read_bytes()))
    assert outs[0] == outs[1]
    header = outs[0][1].decode().splitlines()[0].split(",")
    assert tuple(header) == analyzer.CSV_COLUMNS


def test_log_file_order_irrelevant(tmp_path):
    rng = random.Random(3)
    logs = sorted((BASELINE / "logs").glob("*.log"))[:40]
    d = tmp_path / "logs"
    d.mkdir()
    for p in rng.sample(logs, len(logs)):
        (d / p.name).write_text(p.read_text())
    cutoff = analyzer.parse_cutoff("2023-10")
    a = analyzer.corpus_stats(analyzer.analyze_logs(d, None, cutoff))
    recs = []
    for p in logs:
        recs += [analyzer.classify(e) for e in analyzer.parse_tv_log(p.stem, p.read_text())]
    b = analyzer.corpus_stats(recs)
    assert a.cross == b.cross and a.per_script == b.per_script
