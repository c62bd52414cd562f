"""층화 k-fold, 중첩 교차검증(그리드 탐색), 분류 지표.

레이블 규약: 1 = AI 생성, 0 = 사람.
"""
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import accuracy_score, confusion_matrix, precision_recall_fscore_support

import boost
import config
from corpus import HUMAN, Corpus, Document
from errors import EmptyData, LeakageError, LengthMismatch, TooFewSamples, ValidationError
from utils import get_logger
from vectors import apply_scaler, fit_scaler, fit_tfidf, transform_tfidf_matrix

logger = get_logger(__name__)

AI_LABEL, HUMAN_LABEL = 1, 0
METRIC_KEYS = ("accuracy", "precision_ai", "precision_human", "recall_ai", "recall_human",
               "f1_ai", "f1_human")
STYLOMETRIC, TFIDF = "stylometric", "tfidf"


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    folds: Tuple[int, ...]
    seed: int

    def split(self, fold: int) -> Tuple[np.ndarray, np.ndarray]:
        folds = np.asarray(self.folds)
        return np.flatnonzero(folds != fold), np.flatnonzero(folds == fold)

    def class_counts(self, labels) -> pd.DataFrame:
        return pd.crosstab(pd.Series(self.folds, name="fold"), pd.Series(list(labels), name="label"))


@dataclass(frozen=True)
class GridSpec:
    depths: Tuple[int, ...] = config.GRID_DEPTHS
    learning_rates: Tuple[float, ...] = config.GRID_LEARNING_RATES

    def validate(self):
        if not self.depths or not self.learning_rates:
            raise ValidationError("그리드의 depth/learning_rate 집합은 비어 있을 수 없습니다.")

    def cells(self) -> List[Tuple[int, float]]:
        """(depth, lr) 오름차순. 동률이면 앞선 칸이 선택됩니다."""
        return [(d, lr) for d in sorted(set(self.depths)) for lr in sorted(set(self.learning_rates))]


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision_ai: float
    precision_human: float
    recall_ai: float
    recall_human: float
    f1_ai: float
    f1_human: float
    confusion: Tuple[Tuple[int, int], Tuple[int, int]]  # 행: 실제(AI, H), 열: 예측(AI, H)


def stratified_kfold(labels: Sequence, k: int, seed: int = config.SEED) -> FoldAssignment:
    """클래스별로 시드 셔플 후 라운드로빈으로 폴드를 배정합니다."""
    labels = np.asarray(list(labels))
    if k < 2:
        raise ValidationError(f"k는 2 이상이어야 합니다: {k}")
    if labels.size == 0:
        raise EmptyData("레이블이 비어 있습니다.")
    classes, counts = np.unique(labels, return_counts=True)
    for c, n in zip(classes, counts):
        if n < k:
            raise TooFewSamples(c.item() if hasattr(c, "item") else c)

    rng = np.random.default_rng(seed)
    folds = np.empty(labels.size, dtype=int)
    offset = 0
    for c in classes:
        members = rng.permutation(np.flatnonzero(labels == c))
        folds[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldAssignment(k, tuple(int(f) for f in folds), seed)


def compute_metrics(predictions: Sequence[int], labels: Sequence[int]) -> ClassificationMetrics:
    pred, true = np.asarray(list(predictions)), np.asarray(list(labels))
    if pred.size != true.size or pred.size == 0:
        raise LengthMismatch(f"예측({pred.size})과 레이블({true.size}) 길이가 다르거나 비어 있습니다.")
    order = [AI_LABEL, HUMAN_LABEL]
    precision, recall, f1, _ = precision_recall_fscore_support(true, pred, labels=order, zero_division=0)
    cm = confusion_matrix(true, pred, labels=order)
    return ClassificationMetrics(
        accuracy=float(accuracy_score(true, pred)),
        precision_ai=float(precision[0]), precision_human=float(precision[1]),
        recall_ai=float(recall[0]), recall_human=float(recall[1]),
        f1_ai=float(f1[0]), f1_human=float(f1[1]),
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
    )


@dataclass
class Dataset:
    ids: List[str]
    labels: np.ndarray
    features: Optional[np.ndarray] = None
    documents: Optional[List[Document]] = None
    feature_names: Tuple[str, ...] = config.STYLO_FEATURES
    name: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if len(self.ids) != self.labels.size:
            raise LengthMismatch("문서 id와 레이블 길이가 다릅니다.")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("데이터셋에 중복 문서 id가 있습니다.")


class StyloPipeline:
    """8차원 문체 벡터 + z-score 스케일러."""
    mode = STYLOMETRIC

    def __init__(self):
        self.scaler = None
        self.fitted_ids = frozenset()

    def fit(self, data: Dataset, idx: np.ndarray) -> "StyloPipeline":
        self.fitted_ids = frozenset(data.ids[i] for i in idx)
        self.scaler = fit_scaler(data.features[idx])
        return self

    def transform(self, data: Dataset, idx: np.ndarray):
        return apply_scaler(data.features[idx], self.scaler)

    def feature_names(self, data: Dataset) -> Tuple[str, ...]:
        return tuple(data.feature_names)


class TfidfPipeline:
    """단어 unigram TF-IDF (학습 폴드 문서로만 어휘 구성)."""
    mode = TFIDF

    def __init__(self):
        self.vocab = None
        self.fitted_ids = frozenset()

    def fit(self, data: Dataset, idx: np.ndarray) -> "TfidfPipeline":
        self.fitted_ids = frozenset(data.ids[i] for i in idx)
        self.vocab = fit_tfidf([data.documents[i] for i in idx])
        return self

    def transform(self, data: Dataset, idx: np.ndarray):
        return transform_tfidf_matrix([data.documents[i] for i in idx], self.vocab)

    def feature_names(self, data: Dataset) -> Tuple[str, ...]:
        return tuple(sorted(self.vocab.terms, key=self.vocab.terms.get))


PIPELINES: Dict[str, Callable] = {STYLOMETRIC: StyloPipeline, TFIDF: TfidfPipeline}


@dataclass
class OuterFoldResult:
    fold: int
    depth: int
    learning_rate: float
    inner_accuracy: float
    metrics: ClassificationMetrics
    importance: Dict[str, float]
    n_train: int
    n_test: int


@dataclass
class NestedCvReport:
    mode: str
    folds: List[OuterFoldResult]
    fold_assignment: FoldAssignment
    feature_order: Tuple[str, ...] = ()
    seed: int = config.SEED
    name: str = ""

    def aggregate(self) -> Dict[str, Tuple[float, float]]:
        """지표별 (평균, 모표준편차)."""
        out = {}
        for key in METRIC_KEYS:
            values = np.array([getattr(f.metrics, key) for f in self.folds])
            out[key] = (float(values.mean()), float(values.std(ddof=0)))
        return out

    def importance_summary(self) -> List[Tuple[str, float, float]]:
        """특징별 (이름, 평균, 표준편차) 중요도. 폴드에 없는 특징은 0으로 봅니다."""
        names = list(self.feature_order)
        for f in self.folds:
            names.extend(n for n in f.importance if n not in names)
        rows = []
        for name in names:
            values = np.array([f.importance.get(name, 0.0) for f in self.folds])
            rows.append((name, float(values.mean()), float(values.std(ddof=0))))
        position = {n: i for i, n in enumerate(names)}
        rows = [r for r in rows if r[1] > 0]
        return sorted(rows, key=lambda r: (-r[1], position[r[0]]))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "k_outer": self.fold_assignment.k,
            "fold_assignment": list(self.fold_assignment.folds),
            "folds": [asdict(f) for f in self.folds],
            "aggregate": {k: {"mean": m, "std": s} for k, (m, s) in self.aggregate().items()},
            "importance": [{"feature": n, "mean": m, "std": s} for n, m, s in self.importance_summary()],
        }


def _fit_and_predict(data: Dataset, train_idx, test_idx, pipeline_factory, cfg: boost.TrainConfig):
    test_ids = {data.ids[i] for i in test_idx}
    pipe = pipeline_factory().fit(data, train_idx)
    if pipe.fitted_ids & test_ids:
        raise LeakageError(f"평가 폴드 문서 {len(pipe.fitted_ids & test_ids)}개가 학습 적합에 사용되었습니다.")
    names = pipe.feature_names(data)
    ensemble = boost.train(pipe.transform(data, train_idx), data.labels[train_idx], cfg, names)
    return boost.predict(ensemble, pipe.transform(data, test_idx)), ensemble


def _select_cell(data: Dataset, train_idx, pipeline_factory, grid: GridSpec, base_cfg: boost.TrainConfig,
                 k_inner: int, seed: int) -> Tuple[int, float, float]:
    inner = stratified_kfold(data.labels[train_idx], k_inner, seed)
    best = None
    for depth, lr in grid.cells():
        cfg = boost.TrainConfig(depth, lr, base_cfg.n_rounds, base_cfg.reg_lambda, base_cfg.gamma,
                                base_cfg.min_child_weight, base_cfg.subsample, base_cfg.seed)
        scores = []
        for fold in range(k_inner):
            tr, te = inner.split(fold)
            pred, _ = _fit_and_predict(data, train_idx[tr], train_idx[te], pipeline_factory, cfg)
            scores.append(float(np.mean(pred == data.labels[train_idx[te]])))
        mean = float(np.mean(scores))
        logger.debug(f"inner grid depth={depth}, lr={lr}: accuracy={mean:.4f}")
        if best is None or mean > best[2]:
            best = (depth, lr, mean)
    return best


def nested_cv(data: Dataset, pipeline_factory: Callable = StyloPipeline, grid: GridSpec = None,
              k_outer: int = config.K_OUTER, k_inner: int = config.K_INNER, seed: int = config.SEED,
              train_config: boost.TrainConfig = None) -> NestedCvReport:
    """외부 k-fold로 성능을, 각 외부 학습 폴드 안의 내부 k-fold 그리드 탐색으로 하이퍼파라미터를 정합니다."""
    grid = grid or GridSpec()
    grid.validate()
    base_cfg = train_config or boost.TrainConfig(seed=seed)
    outer = stratified_kfold(data.labels, k_outer, seed)
    mode = getattr(pipeline_factory, "mode", "custom")
    logger.info(f"중첩 교차검증 시작: {data.name or mode}, n={len(data.ids)}, k_outer={k_outer}, k_inner={k_inner}")

    results = []
    feature_order = ()
    for fold in range(k_outer):
        train_idx, test_idx = outer.split(fold)
        depth, lr, inner_acc = _select_cell(data, train_idx, pipeline_factory, grid, base_cfg, k_inner,
                                            seed + fold + 1)
        cfg = boost.TrainConfig(depth, lr, base_cfg.n_rounds, base_cfg.reg_lambda, base_cfg.gamma,
                                base_cfg.min_child_weight, base_cfg.subsample, base_cfg.seed)
        pred, ensemble = _fit_and_predict(data, train_idx, test_idx, pipeline_factory, cfg)
        metrics = compute_metrics(pred, data.labels[test_idx])
        if not feature_order:
            feature_order = ensemble.feature_names
        results.append(OuterFoldResult(fold, depth, lr, inner_acc, metrics,
                                       boost.feature_importance(ensemble).as_dict(),
                                       int(train_idx.size), int(test_idx.size)))
        logger.info(f"outer fold {fold}: depth={depth}, lr={lr}, accuracy={metrics.accuracy:.4f}")

    report = NestedCvReport(mode, results, outer, tuple(feature_order), seed, data.name)
    mean, std = report.aggregate()["accuracy"]
    logger.info(f"중첩 교차검증 완료: accuracy {mean:.3f} ± {std:.3f}")
    return report


def condition_datasets(features: pd.DataFrame, corpus: Optional[Corpus] = None) -> Dict[Tuple[str, str], Dataset]:
    """(저자, AI 모델)별 데이터셋: 해당 저자의 사람 문서 vs 그 저자를 흉내 낸 모델 문서."""
    datasets = {}
    for author in sorted(features["author"].unique()):
        rows = features[features["author"] == author]
        human = rows[rows["source"] == HUMAN]
        if human.empty:
            logger.warning(f"{author}: 사람 문서가 없어 분류 조건에서 제외합니다.")
            continue
        for model in sorted(s for s in rows["source"].unique() if s != HUMAN):
            subset = pd.concat([human, rows[rows["source"] == model]])
            ids = subset["id"].tolist()
            labels = np.where(subset["source"] == HUMAN, HUMAN_LABEL, AI_LABEL)
            docs = [corpus.get(i) for i in ids] if corpus is not None else None
            datasets[(author, model)] = Dataset(
                ids, labels, subset[list(config.STYLO_FEATURES)].to_numpy(dtype=float), docs,
                name=f"{author} / {model}")
    return datasets


def run_conditions(features: pd.DataFrame, corpus: Optional[Corpus] = None,
                   modes: Sequence[str] = (STYLOMETRIC,), grid: GridSpec = None,
                   k_outer: int = config.K_OUTER, k_inner: int = config.K_INNER, seed: int = config.SEED,
                   train_config: boost.TrainConfig = None) -> Dict[Tuple[str, str, str], NestedCvReport]:
    """(저자, 모델, 특징 집합) 조건마다 중첩 교차검증을 돌립니다."""
    if TFIDF in modes and corpus is None:
        raise ValidationError("TF-IDF 조건에는 원문 코퍼스가 필요합니다.")
    reports = {}
    for (author, model), data in condition_datasets(features, corpus).items():
        for mode in modes:
            if mode not in PIPELINES:
                raise ValidationError(f"알 수 없는 특징 집합: {mode}")
            reports[(author, model, mode)] = nested_cv(data, PIPELINES[mode], grid, k_outer, k_inner, seed,
                                                       train_config)
    return reports
