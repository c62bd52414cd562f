"""결과 표 렌더링: 비교표(Markdown/CSV), 분류 성능표, 특징 중요도 문자열."""
import json
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import pandas as pd

import config
from evaluation import NestedCvReport
from stats import ComparisonTable, MedianIqr
from utils import get_logger

logger = get_logger(__name__)

IMPORTANCE_COLUMN = "Top Features (descending order, importance in brackets)"
MARKDOWN, CSV, JSON = "md", "csv", "json"


def feature_label(name: str) -> str:
    return config.FEATURE_LABELS.get(name, name)


def format_median_iqr(m: MedianIqr) -> str:
    return f"{m.median:.2f} ({m.iqr:.2f})"


def format_mean_std(mean: float, std: float, digits: int = 2) -> str:
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


def frame_to_markdown(df: pd.DataFrame) -> str:
    # 셀 문자열("0.90 ± 0.10", "<.05")은 숫자로 재해석하지 않고 그대로 출력
    return df.to_markdown(index=False, tablefmt="pipe", disable_numparse=True) + "\n"


def comparison_display_frame(table: ComparisonTable) -> pd.DataFrame:
    """'Human Median (IQR)', '<model> Median (IQR)', '<model> p-value' 열 구성의 표시용 표."""
    rows = []
    for metric in table.metrics:
        row = {"Metric": feature_label(metric), "Human Median (IQR)": format_median_iqr(table.human[metric])}
        for model in table.models:
            cell = table.cells[(metric, model)]
            row[f"{model} Median (IQR)"] = format_median_iqr(cell.summary)
            row[f"{model} p-value"] = cell.band
        rows.append(row)
    return pd.DataFrame(rows)


def comparison_markdown(table: ComparisonTable) -> str:
    title = f"### {table.title}\n\n" if table.title else ""
    return title + frame_to_markdown(comparison_display_frame(table))


def importance_string(report: NestedCvReport, top: int = None) -> str:
    """'Perplexity (0.322 ± 0.02), Analytic (0.101 ± 0.01), ...'"""
    items = report.importance_summary()
    if top is not None:
        items = items[:top]
    return ", ".join(f"{feature_label(n)} ({m:.3f} ± {s:.2f})" for n, m, s in items)


def classification_frame(reports: Mapping[Tuple[str, str, str], NestedCvReport]) -> pd.DataFrame:
    """조건별 Accuracy / Precision (AI/H) / Recall (AI/H) / F1-score (AI/H), 셀은 'mean ± std'."""
    rows = []
    for (author, model, mode), report in reports.items():
        agg = report.aggregate()

        def pair(key):
            return f"{format_mean_std(*agg[key + '_ai'])} / {format_mean_std(*agg[key + '_human'])}"

        rows.append({
            "Author": author,
            "Model": model,
            "Features": mode,
            "Accuracy": format_mean_std(*agg["accuracy"]),
            "Precision (AI/H)": pair("precision"),
            "Recall (AI/H)": pair("recall"),
            "F1-score (AI/H)": pair("f1"),
        })
    return pd.DataFrame(rows, columns=["Author", "Model", "Features", "Accuracy", "Precision (AI/H)",
                                       "Recall (AI/H)", "F1-score (AI/H)"])


def importance_frame(reports: Mapping[Tuple[str, str, str], NestedCvReport], top: int = None) -> pd.DataFrame:
    rows = [{"Author": a, "Model": m, "Features": mode, IMPORTANCE_COLUMN: importance_string(r, top)}
            for (a, m, mode), r in reports.items()]
    return pd.DataFrame(rows, columns=["Author", "Model", "Features", IMPORTANCE_COLUMN])


def provenance(run_hash: str, seed: int) -> str:
    return f"config_hash={run_hash} seed={seed}"


def write_frame(df: pd.DataFrame, out_dir, stem: str, formats: Iterable[str], run_hash: str, seed: int,
                markdown: str = None) -> List[Path]:
    """표를 형식별로 저장합니다. 모든 파일에 설정 해시와 시드를 남깁니다."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = out_dir / f"{stem}.{fmt}"
        if fmt == MARKDOWN:
            path.write_text(f"<!-- {provenance(run_hash, seed)} -->\n\n{markdown or frame_to_markdown(df)}",
                            encoding="utf-8")
        elif fmt == CSV:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(f"# {provenance(run_hash, seed)}\n")
                df.to_csv(f, index=False, lineterminator="\n", float_format="%.17g")
        elif fmt == JSON:
            payload = {"config_hash": run_hash, "seed": seed, "rows": df.to_dict(orient="records")}
            path.write_text(json.dumps(payload, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
        else:
            logger.warning(f"알 수 없는 보고서 형식 무시: {fmt}")
            continue
        written.append(path)
    logger.info(f"보고서 저장: {', '.join(str(p) for p in written)}")
    return written


def write_comparison_tables(tables: Mapping[Tuple[str, str], ComparisonTable], out_dir, formats: Sequence[str],
                            run_hash: str, seed: int) -> List[Path]:
    written = []
    for (author, group), table in tables.items():
        stem = "compare_" + "_".join(f"{author}_{group}".lower().split())
        written += write_frame(table.to_frame(), out_dir, stem, [f for f in formats if f != MARKDOWN],
                               run_hash, seed)
        if MARKDOWN in formats:
            written += write_frame(table.to_frame(), out_dir, stem, [MARKDOWN], run_hash, seed,
                                   markdown=comparison_markdown(table))
    return written


def write_nested_reports(reports: Mapping[Tuple[str, str, str], NestedCvReport], out_dir,
                         formats: Sequence[str], run_hash: str, seed: int) -> List[Path]:
    written = write_frame(classification_frame(reports), out_dir, "classification", formats, run_hash, seed)
    written += write_frame(importance_frame(reports), out_dir, "importance", formats, run_hash, seed)
    detail = Path(out_dir) / "nested_cv.json"
    payload = {"config_hash": run_hash, "seed": seed,
               "conditions": [{"author": a, "model": m, "features": mode, **r.to_dict()}
                              for (a, m, mode), r in reports.items()]}
    detail.write_text(json.dumps(payload, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    return written + [detail]
