"""비모수 비교: 중앙값/IQR 요약, Mann-Whitney U 검정, 유의수준 구간, 비교표."""
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata

import config
from corpus import HUMAN
from errors import EmptySample, MetricMismatch, ValidationError
from utils import get_logger

logger = get_logger(__name__)

EXACT = "exact_permutation"
NORMAL_APPROX = "normal_approx_tie_corrected"
BANDS = ("n.s.", "<.05", "<.01", "<.001")

# 저자별 비교표의 지표 묶음
METRIC_GROUPS = {
    "LIWC": ("analytic", "clout", "authentic", "tone"),
    "Perplexity and Readability": ("perplexity", "flesch_reading_ease", "flesch_kincaid_grade", "gunning_fog"),
}

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class MedianIqr:
    median: float
    iqr: float
    q1: float = float("nan")
    q3: float = float("nan")


@dataclass(frozen=True)
class UTestResult:
    u_statistic: float
    p_value: float
    method: str
    n1: int
    n2: int


@dataclass
class ComparisonCell:
    summary: MedianIqr
    test: UTestResult
    band: str


@dataclass
class ComparisonTable:
    metrics: List[str]
    models: List[str]
    human: Dict[str, MedianIqr]
    cells: Dict[Tuple[str, str], ComparisonCell] = field(default_factory=dict)
    title: str = ""

    def to_frame(self) -> pd.DataFrame:
        """CSV 열: metric, human_median, human_iqr, <model>_median, <model>_iqr, <model>_p, <model>_band ..."""
        rows = []
        for metric in self.metrics:
            row = {"metric": metric,
                   "human_median": self.human[metric].median,
                   "human_iqr": self.human[metric].iqr}
            for model in self.models:
                cell = self.cells[(metric, model)]
                row[f"{model}_median"] = cell.summary.median
                row[f"{model}_iqr"] = cell.summary.iqr
                row[f"{model}_p"] = cell.test.p_value
                row[f"{model}_band"] = cell.band
            rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def _as_sample(sample) -> np.ndarray:
    values = np.asarray(list(sample), dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size < values.size:
        logger.warning(f"유한하지 않은 값 {values.size - finite.size}개를 표본에서 제외합니다.")
    if finite.size == 0:
        raise EmptySample("표본이 비어 있습니다.")
    return finite


def median_iqr(sample: Sequence[float]) -> MedianIqr:
    values = _as_sample(sample)
    q1, med, q3 = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
    return MedianIqr(float(med), float(q3 - q1), float(q1), float(q3))


def _exact_p(ranks: np.ndarray, n1: int, u_obs: float) -> float:
    n = ranks.size
    offset = n1 * (n1 + 1) / 2.0
    idx = np.array(list(combinations(range(n), n1)), dtype=np.int64)
    u_all = ranks[idx].sum(axis=1) - offset
    lower = np.mean(u_all <= u_obs + _TIE_TOL)
    upper = np.mean(u_all >= u_obs - _TIE_TOL)
    return float(min(1.0, 2.0 * min(lower, upper)))


def _normal_p(ranks: np.ndarray, n1: int, n2: int, u_obs: float) -> float:
    n = n1 + n2
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return 1.0
    z = max(abs(u_obs - n1 * n2 / 2.0) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, 2.0 * norm.sf(z)))


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> UTestResult:
    """양측 Mann-Whitney U. 작은 표본은 순위 배정 전수열거, 그 외 동순위 보정 정규근사."""
    x, y = _as_sample(a), _as_sample(b)
    n1, n2 = x.size, y.size
    ranks = rankdata(np.concatenate([x, y]), method="average")
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)

    if min(n1, n2) <= config.EXACT_MAX_MIN_N and math.comb(n1 + n2, n1) <= config.EXACT_MAX_ASSIGNMENTS:
        return UTestResult(u, _exact_p(ranks, n1, u), EXACT, n1, n2)
    return UTestResult(u, _normal_p(ranks, n1, n2, u), NORMAL_APPROX, n1, n2)


def _band_label(threshold: float) -> str:
    return "<" + f"{threshold:g}".lstrip("0")


def significance_band(p: float, alpha: float = config.ALPHA) -> str:
    """p를 n.s. / <.05 / <.01 / <.001 구간으로. alpha가 .05보다 크면 그 사이는 '<alpha' (예: <.1)."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p-value는 [0, 1] 범위여야 합니다: {p}")
    if p >= alpha:
        return "n.s."
    for threshold in (0.001, 0.01, 0.05):
        if p < threshold:
            return _band_label(threshold)
    return _band_label(alpha)


def _metric_order(metrics) -> List[str]:
    declared = [m for m in config.STYLO_FEATURES if m in metrics]
    return declared + [m for m in metrics if m not in declared]


def build_comparison_table(metric_values: Mapping[Tuple[str, str], Sequence[float]],
                           human_source: str = HUMAN, alpha: float = config.ALPHA,
                           title: str = "") -> ComparisonTable:
    """(metric, source) → 표본 맵에서 사람 vs 각 모델 비교표를 만듭니다."""
    by_source: Dict[str, List[str]] = {}
    for metric, source in metric_values:
        by_source.setdefault(source, [])
        if metric not in by_source[source]:
            by_source[source].append(metric)
    if human_source not in by_source:
        raise MetricMismatch(f"사람 표본({human_source})이 없습니다.")

    metrics = _metric_order(by_source[human_source])
    models = sorted(s for s in by_source if s != human_source)
    for model in models:
        if set(by_source[model]) != set(metrics):
            missing = sorted(set(metrics) ^ set(by_source[model]))
            raise MetricMismatch(f"{model}의 지표 집합이 사람과 다릅니다: {missing}")

    table = ComparisonTable(metrics, models, {}, title=title)
    for metric in metrics:
        human_sample = metric_values[(metric, human_source)]
        table.human[metric] = median_iqr(human_sample)
        for model in models:
            sample = metric_values[(metric, model)]
            test = mann_whitney_u(human_sample, sample)
            table.cells[(metric, model)] = ComparisonCell(median_iqr(sample), test, significance_band(test.p_value, alpha))
    logger.info(f"비교표 생성: {title or '-'} (지표 {len(metrics)}개, 모델 {len(models)}개)")
    return table


def comparison_tables(features: pd.DataFrame, metrics: Optional[Sequence[str]] = None,
                      alpha: float = config.ALPHA) -> Dict[Tuple[str, str], ComparisonTable]:
    """저자 × 지표 묶음별 비교표. features에는 id, author, source와 지표 열이 있어야 합니다."""
    groups = METRIC_GROUPS if metrics is None else {"Metrics": tuple(metrics)}
    tables = {}
    for author in sorted(features["author"].unique()):
        subset = features[features["author"] == author]
        if HUMAN not in set(subset["source"]):
            logger.warning(f"{author}: 사람 문서가 없어 비교표를 건너뜁니다.")
            continue
        for group, group_metrics in groups.items():
            present = [m for m in group_metrics if m in subset.columns]
            if not present:
                continue
            values = {}
            for source, rows in subset.groupby("source"):
                for m in present:
                    values[(m, source)] = rows[m].tolist()
            tables[(author, group)] = build_comparison_table(values, alpha=alpha, title=f"{author} - {group}")
    return tables
