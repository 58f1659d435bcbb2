"""Validation-log parsing, two-dimensional error classification and
changelog-based attribution of unsupported elements."""

from __future__ import annotations

import calendar
import csv
import datetime as dt
import io
import json
import logging
import re
import statistics
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

log = logging.getLogger(__name__)

DIM2 = ("FactualIncorrectness", "StructuralDeficit", "ContextualReasoningFailure", "Incompleteness")
DEPRECATED = "deprecated"
NEVER_DOCUMENTED = "never-documented"
CSV_COLUMNS = ("script_id", "category", "subcategory", "atomic_label", "dim2", "attribution",
               "file", "line", "message", "manual_override")


# ---------------------------------------------------------------------------
# Taxonomy table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TaxonomyLabel:
    id: str
    category: str
    subcategory: str
    label: str
    dim2: str
    baseline_count: int = 0
    attributable: bool = False
    patterns: tuple[re.Pattern, ...] = ()


@dataclass(frozen=True)
class Taxonomy:
    labels: tuple[TaxonomyLabel, ...]
    intent_labels: tuple[TaxonomyLabel, ...]
    unknown: TaxonomyLabel
    element_rules: tuple[tuple[str, re.Pattern], ...]

    def by_id(self, label_id: str) -> TaxonomyLabel:
        for lab in self.labels + self.intent_labels + (self.unknown,):
            if lab.id == label_id:
                return lab
        raise KeyError(label_id)

    def dim2_of(self, atomic_label: str) -> str:
        for lab in self.labels + self.intent_labels + (self.unknown,):
            if lab.label == atomic_label:
                return lab.dim2
        raise KeyError(atomic_label)


def _label(d: dict) -> TaxonomyLabel:
    if d["dim2"] not in DIM2:
        raise ValueError(f"{d['id']}: unknown dim2 {d['dim2']}")
    return TaxonomyLabel(d["id"], d["category"], d["subcategory"], d["label"], d["dim2"],
                         d.get("baseline_count", 0), d.get("attributable", False),
                         tuple(re.compile(p) for p in d.get("patterns", ())))


def load_taxonomy(path: Optional[Path] = None) -> Taxonomy:
    if path is None:
        raw = resources.files("iackg").joinpath("data/taxonomy.json").read_text(encoding="utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    d = json.loads(raw)
    return Taxonomy(
        tuple(_label(x) for x in d["labels"]),
        tuple(_label(x) for x in d["intent_labels"]),
        _label(d["unknown"]),
        tuple((e["kind"], re.compile(e["pattern"])) for e in d["elements"]),
    )


@lru_cache(maxsize=1)
def default_taxonomy() -> Taxonomy:
    return load_taxonomy()


# ---------------------------------------------------------------------------
# Log parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Element:
    kind: str  # argument | block | resource | attribute
    name: str
    resource_type: str = ""


@dataclass(frozen=True)
class AtomicError:
    script_id: str
    raw_message: str
    element: Optional[Element] = None
    location: Optional[tuple[str, int]] = None

    @property
    def summary(self) -> str:
        first = self.raw_message.splitlines()[0] if self.raw_message else ""
        return first[len("Error:"):].strip() if first.startswith("Error:") else first.strip()


_ANSI = re.compile(r"\x1b\[[0-9;]*m")
_BOX = re.compile(r"^[ \t│╷╵]*", re.M)
_LOCATION = re.compile(r"on (?P<file>\S+) line (?P<line>\d+)")
_IN_RESOURCE = re.compile(r'in resource "(?P<rt>[^"]+)"')


def _stanzas(log_text: str) -> list[str]:
    text = _BOX.sub("", _ANSI.sub("", log_text))
    out, cur = [], None
    for line in text.splitlines():
        if line.startswith(("Error:", "Warning:")):
            if cur is not None:
                out.append(cur)
            # warnings close the open stanza but are not collected
            cur = [line] if line.startswith("Error:") else None
        elif cur is not None:
            cur.append(line)
    if cur is not None:
        out.append(cur)
    return ["\n".join(s).strip() for s in out]


def parse_tv_log(script_id: str, log_text: str, taxonomy: Optional[Taxonomy] = None) -> list[AtomicError]:
    taxonomy = taxonomy or default_taxonomy()
    errors = []
    for stanza in _stanzas(log_text):
        loc = None
        m = _LOCATION.search(stanza)
        if m:
            loc = (m.group("file").rstrip(","), int(m.group("line")))
        rt = _IN_RESOURCE.search(stanza)
        element = None
        for kind, pat in taxonomy.element_rules:
            em = pat.search(stanza)
            if em:
                name = em.group("name")
                res_type = name if kind == "resource" else (rt.group("rt") if rt else "")
                element = Element(kind, name, res_type)
                break
        errors.append(AtomicError(script_id, stanza, element, loc))
    return errors


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorRecord:
    error: AtomicError
    category: str
    subcategory: str
    atomic_label: str
    dim2: str
    attribution: str = ""
    flagged: bool = False
    manual_override: str = ""

    @property
    def script_id(self) -> str:
        return self.error.script_id


def match_label(message: str, taxonomy: Taxonomy) -> Optional[TaxonomyLabel]:
    for lab in taxonomy.labels:
        if any(p.search(message) for p in lab.patterns):
            return lab
    return None


def classify(error: AtomicError, taxonomy: Optional[Taxonomy] = None) -> ErrorRecord:
    taxonomy = taxonomy or default_taxonomy()
    lab = match_label(error.raw_message, taxonomy)
    flagged = lab is None
    if lab is None:
        log.info("unclassified error in %s: %s", error.script_id, error.summary)
        lab = taxonomy.unknown
    return ErrorRecord(error, lab.category, lab.subcategory, lab.label, lab.dim2, flagged=flagged)


def is_attributable(rec: ErrorRecord, taxonomy: Optional[Taxonomy] = None) -> bool:
    taxonomy = taxonomy or default_taxonomy()
    lab = next((l for l in taxonomy.labels if l.label == rec.atomic_label), None)
    return bool(lab and lab.attributable and rec.error.element is not None)


# ---------------------------------------------------------------------------
# Changelog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChangelogEntry:
    version: str
    date: dt.date
    resource: str
    text: str


@dataclass
class ChangelogIndex:
    entries: list[ChangelogEntry] = field(default_factory=list)
    lookup: dict[tuple[str, str], list[ChangelogEntry]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def matches(self, resource: str, element: str) -> list[ChangelogEntry]:
        return self.lookup.get((resource, element), [])


_HEADER = re.compile(r"^##\s+\[?v?(?P<version>[0-9][^\s\]]*)\]?\s*\((?P<date>[^)]*)\)")
_UNRELEASED = re.compile(r"^##\s+\S+\s*\(\s*unreleased\s*\)", re.I)
_ENTRY_RESOURCE = re.compile(r"(?:resource|data-source|data_source)/(?P<res>[A-Za-z0-9_]+)")
_TOKEN = re.compile(r"[A-Za-z0-9_]+")
_MONTHS = {m.lower(): i for i, m in enumerate(calendar.month_name) if m}
_MONTHS.update({m.lower(): i for i, m in enumerate(calendar.month_abbr) if m})


def parse_release_date(text: str) -> Optional[dt.date]:
    """'May 25, 2023', 'May 2023', '2023-05-25' or '2023-05'; month-only
    dates fall on the first of the month."""
    s = text.strip().replace(",", " ")
    m = re.fullmatch(r"(\d{4})-(\d{2})(?:-(\d{2}))?", s)
    if m:
        return dt.date(int(m.group(1)), int(m.group(2)), int(m.group(3) or 1))
    parts = s.split()
    if len(parts) in (2, 3) and parts[0].lower() in _MONTHS and parts[-1].isdigit():
        day = int(parts[1]) if len(parts) == 3 and parts[1].isdigit() else 1
        return dt.date(int(parts[-1]), _MONTHS[parts[0].lower()], day)
    return None


def parse_cutoff(text: str) -> dt.date:
    """'2023-10' means the end of October 2023; full dates are exact."""
    m = re.fullmatch(r"(\d{4})-(\d{2})", text.strip())
    if m:
        y, mo = int(m.group(1)), int(m.group(2))
        return dt.date(y, mo, calendar.monthrange(y, mo)[1])
    d = parse_release_date(text)
    if d is None:
        raise ValueError(f"unrecognised cutoff date {text!r}")
    return d


def build_changelog_index(markdown: str) -> ChangelogIndex:
    idx = ChangelogIndex()
    version, date = None, None
    saw_header = False
    for line in markdown.splitlines():
        if line.startswith("## "):
            saw_header = True
            m = _HEADER.match(line)
            if _UNRELEASED.match(line) or not m:
                version, date = None, None
                continue
            date = parse_release_date(m.group("date"))
            version = m.group("version") if date else None
            if date is None:
                idx.warnings.append(f"undated release header: {line.strip()}")
            continue
        stripped = line.lstrip()
        if not stripped.startswith("* ") or version is None:
            continue
        text = stripped[2:].strip()
        rm = _ENTRY_RESOURCE.search(text)
        entry = ChangelogEntry(version, date, rm.group("res") if rm else "", text)
        idx.entries.append(entry)
    if not saw_header:
        idx.warnings.append("changelog has no release headers")
        log.warning("changelog has no release headers")
    # stable sort keeps file order within a release
    idx.entries.sort(key=lambda e: e.date)
    for e in idx.entries:
        if not e.resource:
            continue
        for tok in dict.fromkeys(_TOKEN.findall(e.text)):
            idx.lookup.setdefault((e.resource, tok), []).append(e)
    return idx


def attribute_element(index: ChangelogIndex, element: Element, cutoff: dt.date) -> str:
    resource = element.name if element.kind == "resource" else element.resource_type
    for e in index.matches(resource, element.name):
        if e.date <= cutoff and "deprecated" in e.text.lower():
            return DEPRECATED
    return NEVER_DOCUMENTED


def attribute_records(records: Sequence[ErrorRecord], index: ChangelogIndex, cutoff: dt.date,
                      taxonomy: Optional[Taxonomy] = None) -> list[ErrorRecord]:
    out = []
    for r in records:
        if is_attributable(r, taxonomy):
            r = ErrorRecord(r.error, r.category, r.subcategory, r.atomic_label, r.dim2,
                            attribute_element(index, r.error.element, cutoff), r.flagged, r.manual_override)
        out.append(r)
    return out


# ---------------------------------------------------------------------------
# Intent-stage heuristics
# ---------------------------------------------------------------------------

_RESOURCE_DECL = re.compile(r'^\s*resource\s+"([^"]+)"', re.M)


def declared_resource_types(code: str) -> list[str]:
    return sorted(set(_RESOURCE_DECL.findall(code)))


def classify_intent(script_id: str, iv_log: str, expected_types: Iterable[str], generated_types: Iterable[str],
                    index: Optional[ChangelogIndex] = None, cutoff: Optional[dt.date] = None,
                    taxonomy: Optional[Taxonomy] = None) -> ErrorRecord:
    """Rule-assisted coding of an intent-validation failure.

    A deprecated generated resource wins; otherwise a missing expected type
    is a mismatch when some unexpected type stands in for it, else an
    omission. Anything else is a misconfiguration and is flagged for review.
    """
    taxonomy = taxonomy or default_taxonomy()
    expected, generated = set(expected_types), set(generated_types)
    flagged = False
    label_id = None
    if index is not None and cutoff is not None:
        for rt in sorted(generated):
            if attribute_element(index, Element("resource", rt, rt), cutoff) == DEPRECATED:
                label_id = "intent_deprecated_resource"
                break
    if label_id is None:
        missing, extra = expected - generated, generated - expected
        if missing and extra:
            label_id = "intent_wrong_resource"
        elif missing:
            label_id = "intent_missing_resource"
        else:
            label_id = "intent_misconfiguration"
            flagged = True
    lab = taxonomy.by_id(label_id)
    err = AtomicError(script_id, iv_log.strip())
    return ErrorRecord(err, lab.category, lab.subcategory, lab.label, lab.dim2, flagged=flagged)


# ---------------------------------------------------------------------------
# Corpus statistics and reports
# ---------------------------------------------------------------------------


@dataclass
class CorpusErrorStats:
    per_script: dict[str, int]
    mean: Optional[float]
    median: Optional[float]
    maximum: int
    total_errors: int
    dim2_totals: dict[str, int]
    cross: dict[tuple[str, str], dict[str, int]]  # (category, subcategory) -> dim2 -> count
    attribution: dict[str, dict[str, int]]  # subcategory -> attribution -> count
    stage_totals: dict[str, int] = field(default_factory=dict)
    flagged: int = 0

    def percent(self, count: int) -> float:
        return 100.0 * count / self.total_errors if self.total_errors else 0.0

    def category_total(self, category: str) -> int:
        return sum(sum(v.values()) for (c, _), v in self.cross.items() if c == category)

    def subcategory_total(self, subcategory: str) -> int:
        return sum(sum(v.values()) for (_, s), v in self.cross.items() if s == subcategory)


def corpus_stats(records: Sequence[ErrorRecord], outcomes: Sequence = (),
                 failed_scripts: Iterable[str] = ()) -> CorpusErrorStats:
    """Statistics over technical-validation errors.

    Intent records are excluded from counts. Failed scripts listed in
    ``outcomes`` or ``failed_scripts`` without any parsed error still
    count with zero errors.
    """
    tech = [r for r in records if r.category != "Intent"]
    per_script: Counter = Counter()
    for sid in failed_scripts:
        per_script[sid] += 0
    stage = Counter()
    for o in outcomes:
        stage["total"] += 1
        stage[f"tv_{o.tv_status}"] += 1
        stage[f"iv_{o.iv_status}"] += 1
        stage[o.overall] += 1
        if o.tv_status == "fail":
            per_script[o.script_id] += 0
    for r in tech:
        per_script[r.script_id] += 1
    counts = sorted(per_script.values())
    cross: dict = {}
    dim2 = {d: 0 for d in DIM2}
    attribution: dict = {}
    for r in tech:
        cross.setdefault((r.category, r.subcategory), {d: 0 for d in DIM2})[r.dim2] += 1
        dim2[r.dim2] += 1
        if r.attribution:
            attribution.setdefault(r.subcategory, Counter())[r.attribution] += 1
    return CorpusErrorStats(
        dict(sorted(per_script.items())),
        statistics.fmean(counts) if counts else None,
        statistics.median(counts) if counts else None,
        max(counts) if counts else 0,
        len(tech), dim2, dict(sorted(cross.items())),
        {k: dict(sorted(v.items())) for k, v in sorted(attribution.items())},
        dict(sorted(stage.items())),
        sum(r.flagged for r in records),
    )


def _fmt(x: Optional[float], digits: int = 2) -> str:
    return "n/a" if x is None else f"{x:.{digits}f}"


def render_report(stats: CorpusErrorStats, intent: Sequence[ErrorRecord] = ()) -> str:
    out = ["# Error analysis", ""]
    st = stats.stage_totals
    if st:
        total = st.get("total", 0)
        out += ["## Validation stages", "", "| Stage | Count | Percent |", "|---|---:|---:|"]
        for key, name in (("tv_pass", "Technical validation passed"), ("tv_fail", "Failed at technical validation"),
                          ("iv_fail", "Failed at intent validation"), ("Success", "Overall success")):
            n = st.get(key, 0)
            out.append(f"| {name} | {n} | {100.0 * n / total if total else 0.0:.1f} |")
        out.append("")
    out += [
        "## Errors per failed script", "",
        f"- failed scripts: {len(stats.per_script)}",
        f"- total errors: {stats.total_errors}",
        f"- mean: {_fmt(stats.mean)}",
        f"- median: {_fmt(stats.median, 1)}",
        f"- max: {stats.maximum}",
        f"- flagged for review: {stats.flagged}",
        "",
        "## Category by error type", "",
        "| Category | Subcategory | " + " | ".join(DIM2) + " | Total | Percent |",
        "|---|---|" + "---:|" * (len(DIM2) + 2),
    ]
    for (cat, sub), row in stats.cross.items():
        n = sum(row.values())
        out.append(f"| {cat} | {sub} | " + " | ".join(str(row[d]) for d in DIM2)
                   + f" | {n} | {stats.percent(n):.1f} |")
    out.append("| Total | | " + " | ".join(str(stats.dim2_totals[d]) for d in DIM2)
               + f" | {stats.total_errors} | {100.0 if stats.total_errors else 0.0:.1f} |")
    out.append("")
    cats = sorted({c for c, _ in stats.cross})
    if cats:
        out += ["## Category totals", "", "| Category | Count | Percent |", "|---|---:|---:|"]
        for c in cats:
            n = stats.category_total(c)
            out.append(f"| {c} | {n} | {stats.percent(n):.1f} |")
        out.append("")
    if stats.attribution:
        out += ["## Unsupported elements", "", "| Subcategory | never-documented | deprecated |", "|---|---:|---:|"]
        for sub, row in stats.attribution.items():
            out.append(f"| {sub} | {row.get(NEVER_DOCUMENTED, 0)} | {row.get(DEPRECATED, 0)} |")
        out.append("")
    if intent:
        out += ["## Intent errors", "", "| Atomic error | Error type | Count |", "|---|---|---:|"]
        c = Counter((r.atomic_label, r.dim2) for r in intent)
        for (label, d2), n in sorted(c.items()):
            out.append(f"| {label} | {d2} | {n} |")
        out.append("")
    return "\n".join(out)


def render_csv(records: Sequence[ErrorRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(CSV_COLUMNS)
    for r in records:
        loc = r.error.location
        w.writerow([r.script_id, r.category, r.subcategory, r.atomic_label, r.dim2, r.attribution,
                    loc[0] if loc else "", loc[1] if loc else "", r.error.summary, r.manual_override])
    return buf.getvalue()


def emit_reports(stats: CorpusErrorStats, records: Sequence[ErrorRecord], out_dir: Path,
                 intent: Sequence[ErrorRecord] = ()) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report, errors = out_dir / "report.md", out_dir / "errors.csv"
    report.write_text(render_report(stats, intent) + "\n", encoding="utf-8")
    errors.write_text(render_csv(list(records) + list(intent)), encoding="utf-8")
    return {"report": report, "errors": errors}


def analyze_logs(log_dir: Path, changelog: Optional[str], cutoff: dt.date,
                 taxonomy: Optional[Taxonomy] = None) -> list[ErrorRecord]:
    """Parse, classify and attribute every ``<script_id>.log`` in a directory."""
    taxonomy = taxonomy or default_taxonomy()
    index = build_changelog_index(changelog) if changelog is not None else ChangelogIndex()
    records = []
    for path in sorted(Path(log_dir).glob("*.log")):
        for err in parse_tv_log(path.stem, path.read_text(encoding="utf-8"), taxonomy):
            records.append(classify(err, taxonomy))
    return attribute_records(records, index, cutoff, taxonomy)


def apply_overrides(records: Sequence[ErrorRecord], overrides: Mapping[tuple[str, int], str],
                    taxonomy: Optional[Taxonomy] = None) -> list[ErrorRecord]:
    """Replace labels by (script_id, ordinal-within-script) -> label id."""
    taxonomy = taxonomy or default_taxonomy()
    out, seen = [], Counter()
    for r in records:
        key = (r.script_id, seen[r.script_id])
        seen[r.script_id] += 1
        if key in overrides:
            lab = taxonomy.by_id(overrides[key])
            r = ErrorRecord(r.error, lab.category, lab.subcategory, lab.label, lab.dim2, r.attribution,
                            False, lab.id)
        out.append(r)
    return out
