from __future__ import annotations

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy import stats as sps

from conftest import REFERENCE_OUTCOMES
from iackg import stats
from iackg.stats import ContingencyTable

GRAPH = ["GR_BASE", "GR_LLMSUM", "GR_OPTMATCH", "GR_REF"]


def test_mcnemar_reference_values():
    r = stats.mcnemar(ContingencyTable(286, 81, 35, 55))
    assert r.chi_squared == pytest.approx((81 - 35) ** 2 / 116, abs=1e-12)
    assert round(r.chi_squared, 2) == 18.24
    assert round(r.odds_ratio, 2) == 2.31
    assert r.p_value == pytest.approx(sps.chi2.sf(r.chi_squared, 1), rel=1e-9)


def test_continuity_correction():
    r = stats.mcnemar(ContingencyTable(0, 81, 35, 0), continuity=True)
    assert r.chi_squared == pytest.approx(45 ** 2 / 116)
    assert stats.mcnemar(ContingencyTable(0, 3, 3, 0), continuity=True).chi_squared == 0.0


def test_degenerate_tables():
    r = stats.mcnemar(ContingencyTable(10, 0, 0, 5))
    assert not r.applicable and r.p_value == 1.0 and r.odds_ratio_flag == "undefined"
    assert not r.significant_at(0.05)
    r = stats.mcnemar(ContingencyTable(10, 7, 0, 5))
    assert r.odds_ratio_flag == "+inf" and r.format_or() == "+inf"
    assert stats.mcnemar(ContingencyTable(1, 0, 7, 1)).odds_ratio == 0.0
    with pytest.raises(ValueError):
        ContingencyTable(-1, 0, 0, 0)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 20), st.integers(0, 20))
def test_small_sample_p_matches_incomplete_gamma(b, c):
    if b + c == 0 or b + c > 20:
        return
    r = stats.mcnemar(ContingencyTable(0, b, c, 0))
    # chi-square(1) survival = regularized upper incomplete gamma Q(1/2, x/2)
    assert abs(r.p_value - special.gammaincc(0.5, r.chi_squared / 2)) <= 1e-9


@settings(max_examples=300, deadline=None)
@given(st.floats(0.5, 50), st.floats(0, 200))
def test_gammaincc_matches_scipy(a, x):
    assert stats.gammaincc(a, x) == pytest.approx(special.gammaincc(a, x), rel=1e-9, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.booleans())
def test_mcnemar_antisymmetry(a, b, c, d, cc):
    t = ContingencyTable(a, b, c, d)
    r1, r2 = stats.mcnemar(t, cc), stats.mcnemar(t.swapped(), cc)
    assert r1.chi_squared == r2.chi_squared and r1.p_value == r2.p_value
    if b and c:
        assert r1.odds_ratio * r2.odds_ratio == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(0.001, 0.2), st.integers(1, 10))
def test_bonferroni_monotone_in_family_size(pvals, alpha, extra):
    small = stats.bonferroni(pvals, alpha)
    big = stats.bonferroni(pvals, alpha, len(pvals) + extra)
    for s, b in zip(small, big):
        assert not b.adjusted_significant or s.adjusted_significant
        assert s.raw_significant == b.raw_significant
        assert not s.adjusted_significant or s.raw_significant


def test_bonferroni_rejects_empty_family():
    with pytest.raises(ValueError):
        stats.bonferroni([], 0.05, 0)


def test_pairing_requires_same_ids():
    with pytest.raises(stats.PairingError):
        stats.paired_table({"a": True}, {"b": True})


def test_paired_table_counts():
    t = stats.paired_table({"1": True, "2": True, "3": False, "4": False},
                           {"1": True, "2": False, "3": True, "4": False})
    assert (t.a, t.b, t.c, t.d) == (1, 1, 1, 1)


def test_matched_iv_uses_joint_technical_passes():
    first = {"1": (True, True), "2": (True, False), "3": (False, False), "4": (True, True)}
    second = {"1": (True, False), "2": (True, True), "3": (True, True), "4": (False, False)}
    mc = stats.matched_iv_compare(first, second)
    assert mc.subset_size == 2
    assert (mc.result.table.b, mc.result.table.c) == (1, 1)


@pytest.fixture(scope="module")
def published():
    return stats.load_outcome_table(REFERENCE_OUTCOMES)


def test_published_fixture_margins(published):
    tv = {m: sum(t for t, _ in o.values()) for m, o in published.items()}
    assert tv == {"NO_RAG": 170, "NAIVE_RAG": 321, "GR_BASE": 367, "GR_OPTMATCH": 385, "GR_LLMSUM": 380,
                  "GR_REF": 367}
    assert all(len(o) == 457 for o in published.values())


def test_cd_clusters_on_published_fixture(published):
    rep = stats.compare_experiments(published, "tv")
    assert sorted(rep.cd.bars[0]) == GRAPH
    assert rep.cd.bars[1:] == [["NAIVE_RAG"], ["NO_RAG"]]
    base_naive = next(c for c in rep.comparisons if {c.first, c.second} == {"GR_BASE", "NAIVE_RAG"})
    assert (base_naive.result.table.b, base_naive.result.table.c) == (81, 35)


def test_cd_uncorrected_is_finer(published):
    rep = stats.compare_experiments(published, "tv", correction="none")
    # without correction some graph-method pairs separate
    assert sorted(rep.cd.bars[0]) != GRAPH


def test_matched_naive_vs_no_rag(published):
    mc = stats.matched_iv_compare(published["NAIVE_RAG"], published["NO_RAG"])
    assert (mc.result.table.b, mc.result.table.c) == (24, 9)
    assert mc.result.chi_squared == pytest.approx(225 / 33)


def test_compare_requires_two_methods(published):
    with pytest.raises(ValueError):
        stats.compare_experiments({"A": published["GR_REF"]})
    with pytest.raises(ValueError):
        stats.compare_experiments(published, "bogus")


def test_outputs_byte_stable(tmp_path, published):
    for name in ("a", "b"):
        stats.write_stats_outputs(stats.compare_experiments(published, "overall"), tmp_path / name)
    for f in ("stats.md", "pairs.csv", "cd.json", "cd.svg"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    data = json.loads((tmp_path / "a" / "cd.json").read_text())
    assert data["stage"] == "overall" and len(data["pairs"]) == 15


def test_cd_missing_pair_rejected():
    r = stats.mcnemar(ContingencyTable(1, 2, 3, 4))
    with pytest.raises(ValueError):
        stats.cd_diagram({"A": 0.5, "B": 0.4, "C": 0.3}, {("A", "B"): r})


def test_chi2_sf_known_values():
    assert stats.chi2_sf(3.841458820694124, 1) == pytest.approx(0.05, rel=1e-9)
    assert stats.chi2_sf(0.0, 1) == 1.0
    assert math.isclose(stats.chi2_sf(5.991464547107979, 2), 0.05, rel_tol=1e-9)
