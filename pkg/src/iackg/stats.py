"""Paired comparison of strategies: McNemar's test, odds ratios,
Bonferroni correction and critical-difference diagram data."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import networkx as nx

# ---------------------------------------------------------------------------
# Regularized incomplete gamma
# ---------------------------------------------------------------------------

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _gammainc_series(a: float, x: float) -> float:
    """Lower regularized P(a, x) by its power series; good for x < a + 1."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gammaincc_cf(a: float, x: float) -> float:
    """Upper regularized Q(a, x) by modified Lentz continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = _TINY if abs(d) < _TINY else d
        c = b + an / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x), relative error ~1e-15."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gammainc_series(a, x))
    return _gammaincc_cf(a, x)


def chi2_sf(x: float, df: int = 1) -> float:
    """Upper tail of the chi-squared distribution."""
    if x <= 0:
        return 1.0
    return gammaincc(df / 2.0, x / 2.0)


# ---------------------------------------------------------------------------
# Contingency tables and McNemar
# ---------------------------------------------------------------------------


class PairingError(ValueError):
    pass


@dataclass(frozen=True)
class ContingencyTable:
    a: int  # both pass
    b: int  # first only
    c: int  # second only
    d: int  # both fail
    labels: tuple[str, str] = ("first", "second")

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("contingency counts must be non-negative")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    def swapped(self) -> "ContingencyTable":
        return ContingencyTable(self.a, self.c, self.b, self.d, (self.labels[1], self.labels[0]))


def paired_table(first: Mapping[str, bool], second: Mapping[str, bool],
                 labels: tuple[str, str] = ("first", "second")) -> ContingencyTable:
    """Count joint pass/fail over prompts; both maps must cover the same ids."""
    diff = set(first) ^ set(second)
    if diff:
        shown = ", ".join(sorted(diff)[:10])
        raise PairingError(f"prompt sets differ in {len(diff)} ids: {shown}")
    a = b = c = d = 0
    for pid in first:
        p, q = bool(first[pid]), bool(second[pid])
        if p and q:
            a += 1
        elif p:
            b += 1
        elif q:
            c += 1
        else:
            d += 1
    return ContingencyTable(a, b, c, d, labels)


@dataclass(frozen=True)
class McNemarResult:
    table: ContingencyTable
    chi_squared: float
    p_value: float
    odds_ratio: float  # b/c; inf when c == 0 < b; nan when b == c == 0
    applicable: bool = True
    continuity: bool = False

    @property
    def odds_ratio_flag(self) -> str:
        if math.isnan(self.odds_ratio):
            return "undefined"
        if math.isinf(self.odds_ratio):
            return "+inf"
        return ""

    def significant_at(self, alpha: float) -> bool:
        return self.applicable and self.p_value <= alpha

    def format_or(self) -> str:
        return self.odds_ratio_flag or f"{self.odds_ratio:.2f}"


def mcnemar(table: ContingencyTable, continuity: bool = False) -> McNemarResult:
    """Uncorrected statistic (b - c)^2 / (b + c) unless ``continuity``."""
    b, c = table.b, table.c
    if b + c == 0:
        return McNemarResult(table, 0.0, 1.0, math.nan, applicable=False, continuity=continuity)
    diff = abs(b - c)
    if continuity:
        diff = max(0.0, diff - 1.0)
    chi = diff * diff / (b + c)
    odds = math.inf if c == 0 else b / c
    return McNemarResult(table, chi, chi2_sf(chi, 1), odds, True, continuity)


@dataclass(frozen=True)
class MatchedComparison:
    result: McNemarResult
    subset_size: int


def matched_iv_compare(first: Mapping[str, tuple[bool, bool]], second: Mapping[str, tuple[bool, bool]],
                       labels: tuple[str, str] = ("first", "second"),
                       continuity: bool = False) -> MatchedComparison:
    """McNemar on intent outcomes restricted to prompts that passed
    technical validation under both methods. Values are (tv_pass, iv_pass)."""
    diff = set(first) ^ set(second)
    if diff:
        raise PairingError(f"prompt sets differ in {len(diff)} ids: {', '.join(sorted(diff)[:10])}")
    keep = [pid for pid in first if first[pid][0] and second[pid][0]]
    table = paired_table({p: first[p][1] for p in keep}, {p: second[p][1] for p in keep}, labels)
    return MatchedComparison(mcnemar(table, continuity), len(keep))


@dataclass(frozen=True)
class BonferroniDecision:
    p_value: float
    raw_significant: bool
    adjusted_significant: bool
    threshold: float


def bonferroni(p_values: Sequence[float], alpha: float = 0.05, k: Optional[int] = None) -> list[BonferroniDecision]:
    """Significant iff p <= alpha / k; ``k`` defaults to the number of p-values."""
    k = len(p_values) if k is None else k
    if k < 1:
        raise ValueError("need at least one comparison")
    thr = alpha / k
    return [BonferroniDecision(p, p <= alpha, p <= thr, thr) for p in p_values]


# ---------------------------------------------------------------------------
# Critical-difference diagram
# ---------------------------------------------------------------------------


@dataclass
class CdDiagramData:
    ranking: list[tuple[str, float]]  # (method, rate) best first
    edges: list[tuple[str, str]]  # non-significant pairs after correction
    bars: list[list[str]]  # maximal cliques, methods in rank order
    alpha: float
    correction: str
    stage: str = "tv"
    pairs: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "alpha": self.alpha,
            "bars": self.bars,
            "correction": self.correction,
            "edges": [list(e) for e in self.edges],
            "pairs": self.pairs,
            "ranking": [{"method": m, "rate": round(r, 6)} for m, r in self.ranking],
            "stage": self.stage,
        }, indent=2, sort_keys=True) + "\n"


def _pair_key(m1: str, m2: str) -> tuple[str, str]:
    return (m1, m2) if m1 <= m2 else (m2, m1)


def cd_diagram(rates: Mapping[str, float], pairwise: Mapping[tuple[str, str], McNemarResult],
               alpha: float = 0.05, correction: str = "bonferroni", stage: str = "tv") -> CdDiagramData:
    methods = sorted(rates, key=lambda m: (-rates[m], m))
    results = {}
    for key, res in pairwise.items():
        results[_pair_key(*key)] = res
    pairs = list(itertools.combinations(sorted(methods), 2))
    for p in pairs:
        if p not in results:
            raise ValueError(f"missing pairwise result for {p[0]} vs {p[1]}")
    if correction == "bonferroni":
        decisions = bonferroni([results[p].p_value for p in pairs], alpha) if pairs else []
        sig = {p: dec.adjusted_significant and results[p].applicable for p, dec in zip(pairs, decisions)}
    elif correction == "none":
        sig = {p: results[p].significant_at(alpha) for p in pairs}
    else:
        raise ValueError(f"unknown correction {correction!r}")
    g = nx.Graph()
    g.add_nodes_from(methods)
    edges = [p for p in pairs if not sig[p]]
    g.add_edges_from(edges)
    pos = {m: i for i, m in enumerate(methods)}
    bars = sorted((sorted(c, key=pos.get) for c in nx.find_cliques(g)), key=lambda c: (pos[c[0]], -len(c)))
    pair_rows = []
    for p in pairs:
        r = results[p]
        pair_rows.append({"first": p[0], "second": p[1], "b": r.table.b, "c": r.table.c,
                          "chi_squared": round(r.chi_squared, 6), "p_value": float(f"{r.p_value:.6g}"),
                          "significant": sig[p]})
    return CdDiagramData([(m, rates[m]) for m in methods], sorted(edges), bars, alpha, correction, stage, pair_rows)


def render_cd_svg(data: CdDiagramData, width: int = 640) -> str:
    """Hand-assembled SVG so identical data yields identical bytes."""
    n = len(data.ranking)
    left, right = 60, width - 60
    step = (right - left) / max(n - 1, 1)
    axis_y = 40
    bar_y0 = axis_y + 30
    height = bar_y0 + 14 * len(data.bars) + 30 + 20 * n
    xs = {m: left + i * step for i, (m, _) in enumerate(data.ranking)}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<line x1="{left}" y1="{axis_y}" x2="{right}" y2="{axis_y}" stroke="black"/>',
    ]
    for i, (m, rate) in enumerate(data.ranking):
        x = xs[m]
        out.append(f'<line x1="{x:.1f}" y1="{axis_y - 5}" x2="{x:.1f}" y2="{axis_y + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{axis_y - 10}" text-anchor="middle">{i + 1}</text>')
    for j, bar in enumerate(data.bars):
        y = bar_y0 + 14 * j
        if len(bar) > 1:
            x1, x2 = xs[bar[0]] - 4, xs[bar[-1]] + 4
            out.append(f'<line x1="{x1:.1f}" y1="{y}" x2="{x2:.1f}" y2="{y}" stroke="black" stroke-width="4"/>')
    label_y = bar_y0 + 14 * len(data.bars) + 20
    for i, (m, rate) in enumerate(data.ranking):
        x = xs[m]
        y = label_y + 20 * i
        out.append(f'<line x1="{x:.1f}" y1="{axis_y}" x2="{x:.1f}" y2="{y - 4}" stroke="#888"/>')
        out.append(f'<text x="{x:.1f}" y="{y + 10}" text-anchor="middle">{_esc(m)} ({100 * rate:.1f}%)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# ---------------------------------------------------------------------------
# Multi-experiment comparison and reports
# ---------------------------------------------------------------------------

STAGES = ("tv", "overall", "matched-iv")


@dataclass
class Comparison:
    first: str
    second: str
    result: McNemarResult
    subset_size: int
    raw_significant: bool = False
    adjusted_significant: bool = False


@dataclass
class ComparisonReport:
    stage: str
    alpha: float
    correction: str
    rates: dict[str, float]
    counts: dict[str, tuple[int, int]]
    comparisons: list[Comparison]
    cd: CdDiagramData


def compare_experiments(outcomes: Mapping[str, Mapping[str, tuple[bool, bool]]], stage: str = "tv",
                        alpha: float = 0.05, correction: str = "bonferroni",
                        continuity: bool = False) -> ComparisonReport:
    """``outcomes`` maps method -> prompt id -> (tv_pass, iv_pass)."""
    if stage not in STAGES:
        raise ValueError(f"stage must be one of {STAGES}")
    methods = sorted(outcomes)
    if len(methods) < 2:
        raise ValueError("need at least two experiments")
    counts = {}
    for m in methods:
        o = outcomes[m]
        if stage == "tv":
            counts[m] = (sum(tv for tv, _ in o.values()), len(o))
        elif stage == "overall":
            counts[m] = (sum(tv and iv for tv, iv in o.values()), len(o))
        else:  # intent rate among technical passes
            tv_n = sum(tv for tv, _ in o.values())
            counts[m] = (sum(tv and iv for tv, iv in o.values()), tv_n)
    rates = {m: (k / n if n else 0.0) for m, (k, n) in counts.items()}
    comps = []
    for m1, m2 in itertools.combinations(methods, 2):
        if stage == "matched-iv":
            mc = matched_iv_compare(outcomes[m1], outcomes[m2], (m1, m2), continuity)
            comps.append(Comparison(m1, m2, mc.result, mc.subset_size))
        else:
            pick = (lambda t: t[0]) if stage == "tv" else (lambda t: t[0] and t[1])
            t = paired_table({k: pick(v) for k, v in outcomes[m1].items()},
                             {k: pick(v) for k, v in outcomes[m2].items()}, (m1, m2))
            comps.append(Comparison(m1, m2, mcnemar(t, continuity), t.n))
    decisions = bonferroni([c.result.p_value for c in comps], alpha)
    for c, d in zip(comps, decisions):
        c.raw_significant = d.raw_significant and c.result.applicable
        c.adjusted_significant = d.adjusted_significant and c.result.applicable
    cd = cd_diagram(rates, {(c.first, c.second): c.result for c in comps}, alpha, correction, stage)
    return ComparisonReport(stage, alpha, correction, rates, counts, comps, cd)


def load_outcome_table(path: Path) -> dict[str, dict[str, tuple[bool, bool]]]:
    """Read a wide CSV with ``prompt_id`` and ``<method>_tv``/``<method>_iv``
    columns into the mapping taken by :func:`compare_experiments`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        methods = [c[:-3] for c in cols if c.endswith("_tv") and f"{c[:-3]}_iv" in cols]
        if "prompt_id" not in cols or not methods:
            raise ValueError(f"{path}: expected prompt_id and <method>_tv/<method>_iv columns")
        out: dict[str, dict[str, tuple[bool, bool]]] = {m: {} for m in methods}
        for row in reader:
            for m in methods:
                out[m][row["prompt_id"]] = (row[f"{m}_tv"] == "1", row[f"{m}_iv"] == "1")
    return out


def _p(p: float) -> str:
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def render_stats_markdown(rep: ComparisonReport) -> str:
    k = len(rep.comparisons)
    out = [f"# Paired comparison ({rep.stage})", "",
           f"McNemar test, alpha = {rep.alpha}, {rep.correction} correction over {k} comparisons "
           f"(threshold {rep.alpha / k:.5f}).", "",
           "## Success rates", "", "| Method | Passed | Total | Rate |", "|---|---:|---:|---:|"]
    for m, _ in rep.cd.ranking:
        n, tot = rep.counts[m]
        out.append(f"| {m} | {n} | {tot} | {100 * rep.rates[m]:.1f}% |")
    out += ["", "## Pairwise tests", "",
            "| Comparison | n | b | c | chi2 | p-value | OR | Significant | Significant (corrected) |",
            "|---|---:|---:|---:|---:|---:|---:|:-:|:-:|"]
    for c in rep.comparisons:
        r = c.result
        chi = f"{r.chi_squared:.2f}" if r.applicable else "n/a"
        out.append(f"| {c.first} vs {c.second} | {c.subset_size} | {r.table.b} | {r.table.c} | {chi} | "
                   f"{_p(r.p_value)} | {r.format_or()} | {'yes' if c.raw_significant else 'no'} | "
                   f"{'yes' if c.adjusted_significant else 'no'} |")
    out += ["", "## Equivalence groups", ""]
    out += [f"- {', '.join(bar)}" for bar in rep.cd.bars]
    return "\n".join(out) + "\n"


def render_pairs_csv(rep: ComparisonReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["first", "second", "stage", "n", "a", "b", "c", "d", "chi_squared", "p_value", "odds_ratio",
                "odds_ratio_flag", "significant", "significant_corrected"])
    for c in rep.comparisons:
        r, t = c.result, c.result.table
        odds = "" if r.odds_ratio_flag else f"{r.odds_ratio:.6f}"
        w.writerow([c.first, c.second, rep.stage, c.subset_size, t.a, t.b, t.c, t.d, f"{r.chi_squared:.6f}",
                    f"{r.p_value:.6e}", odds, r.odds_ratio_flag, int(c.raw_significant), int(c.adjusted_significant)])
    return buf.getvalue()


def write_stats_outputs(rep: ComparisonReport, out_dir: Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {
        "stats.md": render_stats_markdown(rep),
        "pairs.csv": render_pairs_csv(rep),
        "cd.json": rep.cd.to_json(),
        "cd.svg": render_cd_svg(rep.cd),
    }
    paths = {}
    for name, text in files.items():
        p = out_dir / name
        p.write_text(text, encoding="utf-8")
        paths[name] = p
    return paths
