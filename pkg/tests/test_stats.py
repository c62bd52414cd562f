import numpy as np
import pytest

from errors import EmptySample, MetricMismatch
from stats import (
    EXACT,
    NORMAL_APPROX,
    _normal_p,
    build_comparison_table,
    comparison_tables,
    mann_whitney_u,
    median_iqr,
    significance_band,
)


def test_median_iqr_three_values():
    m = median_iqr([1, 2, 3])
    assert m.median == 2
    assert m.iqr == pytest.approx(1.0)
    assert (m.q1, m.q3) == (1.5, 2.5)


def test_median_iqr_constant_and_even():
    assert median_iqr([5, 5, 5, 5]).iqr == 0
    assert median_iqr([1, 2, 3, 4]).median == 2.5


def test_median_iqr_empty():
    with pytest.raises(EmptySample):
        median_iqr([])


def test_median_iqr_scale_equivariance():
    x = np.random.default_rng(3).normal(size=25)
    base, scaled = median_iqr(x), median_iqr(3.5 * x)
    assert scaled.median == pytest.approx(3.5 * base.median)
    assert scaled.iqr == pytest.approx(3.5 * base.iqr)


def test_identical_samples():
    r = mann_whitney_u([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])
    assert r.u_statistic == 12.5
    assert r.p_value >= 0.99
    assert r.method == EXACT


def test_exact_two_by_two():
    r = mann_whitney_u([1, 2], [3, 4])
    assert r.p_value == pytest.approx(1 / 3)
    assert r.u_statistic == 0


def test_complete_separation_large_samples():
    r = mann_whitney_u(range(1, 21), range(101, 121))
    assert r.method == NORMAL_APPROX
    assert r.u_statistic in (0, 400)
    assert significance_band(r.p_value) == "<.001"


def test_empty_sample_rejected():
    with pytest.raises(EmptySample):
        mann_whitney_u([], [1.0])


def test_exact_and_normal_agree_on_small_samples():
    rng = np.random.default_rng(11)
    for _ in range(200):
        a, b = rng.normal(size=6), rng.normal(loc=rng.uniform(0, 1.5), size=6)
        exact = mann_whitney_u(a, b)
        assert exact.method == EXACT
        from scipy.stats import rankdata
        ranks = rankdata(np.concatenate([a, b]))
        approx = _normal_p(ranks, 6, 6, exact.u_statistic)
        assert abs(exact.p_value - approx) <= 0.02


def test_shift_never_raises_p_above_identical_case():
    base = [1.0, 3.0, 4.0, 7.0, 9.0]
    identical = mann_whitney_u(base, base).p_value
    for c in (0.5, 2.0, 10.0):
        assert mann_whitney_u(base, [v + c for v in base]).p_value <= identical


@pytest.mark.parametrize("p, band", [
    (0.2, "n.s."),
    (0.05, "n.s."),
    (0.03, "<.05"),
    (0.004, "<.01"),
    (1e-9, "<.001"),
])
def test_significance_band(p, band):
    assert significance_band(p) == band


@pytest.mark.parametrize("p, band", [
    (0.07, "<.1"),
    (0.1, "n.s."),
    (0.03, "<.05"),
    (0.0005, "<.001"),
])
def test_band_with_looser_alpha(p, band):
    assert significance_band(p, alpha=0.1) == band


def test_band_with_stricter_alpha():
    assert significance_band(0.03, alpha=0.01) == "n.s."
    assert significance_band(0.005, alpha=0.01) == "<.01"


def test_band_is_monotone():
    order = {"<.001": 0, "<.01": 1, "<.05": 2, "n.s.": 3}
    ps = np.linspace(0, 1, 501)
    ranks = [order[significance_band(p)] for p in ps]
    assert ranks == sorted(ranks)


def test_identical_model_column_not_significant():
    table = build_comparison_table({("tone", "human"): [1, 2, 3], ("tone", "gpt-4o"): [1, 2, 3]})
    assert table.cells[("tone", "gpt-4o")].band == "n.s."


def test_model_missing_metric():
    with pytest.raises(MetricMismatch):
        build_comparison_table({
            ("tone", "human"): [1, 2, 3],
            ("clout", "human"): [1, 2, 3],
            ("tone", "gpt-4o"): [1, 2, 3],
        })


def test_table_ordering_and_csv_columns():
    values = {}
    for source in ("human", "llama", "gpt-4o"):
        for metric in ("tone", "perplexity"):
            values[(metric, source)] = [1.0, 2.0, 3.0, 4.0]
    table = build_comparison_table(values)
    assert table.metrics == ["perplexity", "tone"]
    assert table.models == ["gpt-4o", "llama"]
    assert list(table.to_frame().columns) == [
        "metric", "human_median", "human_iqr",
        "gpt-4o_median", "gpt-4o_iqr", "gpt-4o_p", "gpt-4o_band",
        "llama_median", "llama_iqr", "llama_p", "llama_band",
    ]


def test_comparison_tables_per_author_and_group():
    import pandas as pd
    rows = []
    for author in ("whitman", "obama"):
        for source in ("human", "gpt-4o"):
            for i in range(5):
                rows.append({"id": f"{author}-{source}-{i}", "author": author, "source": source,
                             "perplexity": i + (10 if source == "human" else 0), "analytic": i,
                             "clout": i, "authentic": i, "tone": i, "flesch_reading_ease": i,
                             "flesch_kincaid_grade": i, "gunning_fog": i})
    tables = comparison_tables(pd.DataFrame(rows))
    assert set(tables) == {(a, g) for a in ("obama", "whitman") for g in ("LIWC", "Perplexity and Readability")}
    assert tables[("whitman", "LIWC")].metrics == ["analytic", "clout", "authentic", "tone"]
