import json

import numpy as np
import pytest

from evaluation import ClassificationMetrics, FoldAssignment, NestedCvReport, OuterFoldResult
from report import (
    IMPORTANCE_COLUMN,
    classification_frame,
    comparison_display_frame,
    comparison_markdown,
    format_median_iqr,
    importance_frame,
    importance_string,
    write_frame,
    write_nested_reports,
)
from stats import MedianIqr, build_comparison_table


def _metrics(acc):
    return ClassificationMetrics(acc, acc, acc, acc, acc, acc, acc, ((1, 0), (0, 1)))


def _report(importances, accuracies=(1.0, 0.8)):
    folds = [OuterFoldResult(i, 3, 0.1, 0.9, _metrics(a), imp, 8, 2)
             for i, (a, imp) in enumerate(zip(accuracies, importances))]
    return NestedCvReport("stylometric", folds, FoldAssignment(2, (0, 1) * 5, 42),
                          ("perplexity", "analytic"), 42, "whitman / gpt-4o")


def test_format_median_iqr():
    assert format_median_iqr(MedianIqr(12.3456, 5.671, 0.0, 0.0)) == "12.35 (5.67)"


def test_comparison_headers():
    values = {(m, s): [1.0, 2.0, 3.0, 4.0] for m in ("perplexity", "tone") for s in ("human", "gpt-4o")}
    frame = comparison_display_frame(build_comparison_table(values))
    assert list(frame.columns) == ["Metric", "Human Median (IQR)", "gpt-4o Median (IQR)", "gpt-4o p-value"]
    assert list(frame["Metric"]) == ["Perplexity", "Tone"]
    assert set(frame["gpt-4o p-value"]) == {"n.s."}


def _markdown_rows(text):
    lines = [line for line in text.splitlines() if line.startswith("|")]
    return [[cell.strip() for cell in line.strip("|").split("|")] for line in lines]


def test_comparison_markdown_has_title():
    values = {("tone", "human"): [1, 2, 3], ("tone", "llama"): [4, 5, 6]}
    text = comparison_markdown(build_comparison_table(values, title="Whitman - LIWC"))
    assert text.startswith("### Whitman - LIWC")
    rows = _markdown_rows(text)
    assert rows[0] == ["Metric", "Human Median (IQR)", "llama Median (IQR)", "llama p-value"]
    assert set(rows[1][0]) <= set(":-")
    assert rows[2][:2] == ["Tone", "2.00 (1.00)"]


def test_importance_string_orders_by_mean():
    report = _report([{"perplexity": 0.3, "analytic": 0.7}, {"perplexity": 0.5, "analytic": 0.5}])
    assert importance_string(report) == "Analytic (0.600 ± 0.10), Perplexity (0.400 ± 0.10)"
    assert importance_string(report, top=1) == "Analytic (0.600 ± 0.10)"


def test_importance_averages_missing_feature_as_zero():
    report = _report([{"perplexity": 1.0}, {"perplexity": 0.5, "tone": 0.5}])
    summary = dict((n, (m, s)) for n, m, s in report.importance_summary())
    assert summary["tone"] == pytest.approx((0.25, 0.25))


def test_classification_frame_cells():
    frame = classification_frame({("whitman", "gpt-4o", "stylometric"):
                                  _report([{"perplexity": 1.0}] * 2)})
    row = frame.iloc[0]
    assert row["Accuracy"] == "0.90 ± 0.10"
    assert row["Precision (AI/H)"] == "0.90 ± 0.10 / 0.90 ± 0.10"
    assert list(frame.columns)[-1] == "F1-score (AI/H)"


def test_every_output_carries_provenance(tmp_path):
    reports = {("whitman", "gpt-4o", "stylometric"): _report([{"perplexity": 1.0}] * 2)}
    written = write_nested_reports(reports, tmp_path, ["md", "csv", "json"], "abc123", 42)
    assert {p.name for p in written} == {"classification.md", "classification.csv", "classification.json",
                                         "importance.md", "importance.csv", "importance.json", "nested_cv.json"}
    for path in written:
        text = path.read_text(encoding="utf-8")
        assert "abc123" in text
        assert "42" in text
    detail = json.loads((tmp_path / "nested_cv.json").read_text(encoding="utf-8"))
    assert len(detail["conditions"][0]["folds"]) == 2


def test_importance_frame_column():
    frame = importance_frame({("obama", "llama", "stylometric"): _report([{"analytic": 1.0}] * 2)})
    assert frame.loc[0, IMPORTANCE_COLUMN] == "Analytic (1.000 ± 0.00)"


def test_unknown_format_is_skipped(tmp_path):
    import pandas as pd
    written = write_frame(pd.DataFrame({"a": [np.float64(1.5)]}), tmp_path, "t", ["csv", "xlsx"], "h", 1)
    assert [p.name for p in written] == ["t.csv"]
    assert (tmp_path / "t.csv").read_text(encoding="utf-8").splitlines() == ["# config_hash=h seed=1", "a", "1.5"]
