"""로지스틱 손실 그래디언트 부스팅 결정트리 (exact greedy, 2차 근사 분할 이득).

- 트리는 깊이 단위(level-wise)로 자랍니다. 한 단계의 모든 노드 분할 후보를
  특징별 정렬 배열 위의 구간 누적합으로 한 번에 계산합니다.
- 희소 입력(TF-IDF)에서 저장되지 않은 값은 결측으로 보고, 노드마다 결측값이
  갈 기본 방향을 양쪽 다 시도해 고릅니다.
- 분기 규칙: x < threshold 이면 왼쪽.
"""
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import expit

import config
from errors import (
    ArityMismatch,
    EmptyData,
    NonFiniteFeature,
    SingleClass,
    ValidationError,
)
from utils import get_logger

logger = get_logger(__name__)

_GAIN_RTOL = 1e-9
_PROB_EPS = 1e-15


@dataclass(frozen=True)
class TrainConfig:
    max_depth: int = config.GRID_DEPTHS[0]
    learning_rate: float = config.GRID_LEARNING_RATES[-1]
    n_rounds: int = config.BOOST_N_ROUNDS
    reg_lambda: float = config.BOOST_LAMBDA
    gamma: float = config.BOOST_GAMMA
    min_child_weight: float = config.BOOST_MIN_CHILD_WEIGHT
    subsample: float = 1.0
    seed: int = config.SEED

    def validate(self):
        if self.max_depth < 1:
            raise ValidationError(f"max_depth는 1 이상이어야 합니다: {self.max_depth}")
        if not 0 < self.learning_rate <= 1:
            raise ValidationError(f"learning_rate는 (0, 1] 범위여야 합니다: {self.learning_rate}")
        if self.n_rounds < 0:
            raise ValidationError(f"n_rounds는 0 이상이어야 합니다: {self.n_rounds}")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise ValidationError("lambda, gamma, min_child_weight는 0 이상이어야 합니다.")
        if not 0 < self.subsample <= 1:
            raise ValidationError(f"subsample은 (0, 1] 범위여야 합니다: {self.subsample}")


@dataclass(frozen=True)
class Tree:
    """노드 배열 표현. feature < 0 이면 리프."""
    feature: Tuple[int, ...]
    threshold: Tuple[float, ...]
    default_left: Tuple[bool, ...]
    left: Tuple[int, ...]
    right: Tuple[int, ...]
    value: Tuple[float, ...]
    gain: Tuple[float, ...]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def splits(self) -> List[Tuple[int, float, float]]:
        """(feature, threshold, gain) 목록, 노드 번호 순."""
        return [(f, t, g) for f, t, g in zip(self.feature, self.threshold, self.gain) if f >= 0]


@dataclass
class TreeEnsemble:
    base_score: float
    trees: List[Tree]
    learning_rate: float
    n_features: int
    feature_names: Tuple[str, ...] = ()
    config: Optional[TrainConfig] = None
    history: Dict[str, list] = field(default_factory=lambda: {"loss": [], "splits": []})

    @property
    def gain_by_feature(self) -> np.ndarray:
        total = np.zeros(self.n_features)
        for tree in self.trees:
            for f, _, g in tree.splits():
                total[f] += g
        return total


@dataclass(frozen=True)
class ImportanceReport:
    entries: Tuple[Tuple[int, str, float], ...]  # (특징 인덱스, 이름, 정규화 이득)

    def __len__(self):
        return len(self.entries)

    def as_dict(self) -> Dict[str, float]:
        return {name: value for _, name, value in self.entries}


class _Columns:
    """특징 열 값과 존재 마스크. 희소 행렬은 저장된 항목만 존재하는 값."""

    def __init__(self, X):
        self.sparse = sparse.issparse(X)
        if self.sparse:
            X = sparse.csc_matrix(X, dtype=float, copy=True)
            X.eliminate_zeros()
        self.X = X
        self.n_rows = X.shape[0]
        self._cache = {}

    def get(self, f: int) -> Tuple[np.ndarray, np.ndarray]:
        if f not in self._cache:
            if self.sparse:
                start, end = self.X.indptr[f], self.X.indptr[f + 1]
                values = np.zeros(self.n_rows)
                present = np.zeros(self.n_rows, dtype=bool)
                values[self.X.indices[start:end]] = self.X.data[start:end]
                present[self.X.indices[start:end]] = True
            else:
                values = self.X[:, f]
                present = ~np.isnan(values)
            self._cache[f] = (values, present)
        return self._cache[f]


def _prepare(X) -> object:
    if sparse.issparse(X):
        X = sparse.csc_matrix(X, dtype=float)
        X.eliminate_zeros()
        X.sort_indices()
        if not np.all(np.isfinite(X.data)):
            raise NonFiniteFeature("입력에 유한하지 않은 특징값이 있습니다.")
        return X
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise EmptyData("학습 데이터가 비어 있습니다.")
    if X.ndim != 2:
        raise ValidationError(f"특징 행렬은 2차원이어야 합니다: shape={X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("입력에 유한하지 않은 특징값이 있습니다.")
    return X


def _feature_entries(X):
    """(feature, row, value) 평탄 배열. 특징 → 값 순으로 (안정) 정렬."""
    if sparse.issparse(X):
        feats = np.repeat(np.arange(X.shape[1]), np.diff(X.indptr))
        rows, vals = X.indices.astype(np.int64), X.data
    else:
        n, n_features = X.shape
        feats = np.repeat(np.arange(n_features), n)
        rows = np.tile(np.arange(n), n_features)
        vals = X.T.ravel()
    order = np.argsort(vals, kind="stable")
    order = order[np.argsort(feats[order], kind="stable")]
    return feats[order], rows[order], vals[order]


def _split_gain(GL, HL, GR, HR, lam, gamma):
    G, H = GL + GR, HL + HR
    return 0.5 * (GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - G ** 2 / (H + lam)) - gamma


def _leaf_weight(G: float, H: float, lam: float) -> float:
    denom = H + lam
    return -G / denom if denom > 0 else 0.0


def _level_candidates(entries, node_of_row, g, h, G, H, counts, n_level):
    """현재 단계 모든 노드의 분할 후보 (node, feature, thr, default_left, GL, HL)."""
    feats, rows, vals = entries
    en = node_of_row[rows]
    active = en >= 0
    f_a, r_a, v_a, n_a = feats[active], rows[active], vals[active], en[active]
    if f_a.size == 0:
        return None
    key = f_a * n_level + n_a
    order = np.argsort(key, kind="stable")
    key, f_a, r_a, v_a, n_a = key[order], f_a[order], r_a[order], v_a[order], n_a[order]

    ge, he = g[r_a], h[r_a]
    cg, ch = np.cumsum(ge), np.cumsum(he)
    seg_start = np.r_[True, key[1:] != key[:-1]]
    start_idx = np.flatnonzero(seg_start)
    end_idx = np.r_[start_idx[1:], key.size] - 1
    seg_id = np.cumsum(seg_start) - 1
    pg = cg - (cg - ge)[start_idx][seg_id]
    ph = ch - (ch - he)[start_idx][seg_id]

    seg_node, seg_feat = n_a[start_idx], f_a[start_idx]
    Gp, Hp = pg[end_idx], ph[end_idx]
    Gm, Hm = G[seg_node] - Gp, H[seg_node] - Hp
    has_missing = (end_idx - start_idx + 1) < counts[seg_node]

    # 같은 구간 안에서 값이 바뀌는 위치 사이의 중간값
    i = np.flatnonzero((~seg_start[1:]) & (v_a[1:] > v_a[:-1]))
    thr = (v_a[i] + v_a[i + 1]) / 2.0
    thr = np.where(thr > v_a[i], thr, v_a[i + 1])
    s = seg_id[i]

    parts = [(seg_node[s], seg_feat[s], thr, np.zeros(i.size, bool), pg[i], ph[i])]
    m = has_missing[s]
    if m.any():
        sm = s[m]
        parts.append((seg_node[sm], seg_feat[sm], thr[m], np.ones(sm.size, bool),
                      pg[i][m] + Gm[sm], ph[i][m] + Hm[sm]))
    if has_missing.any():
        b = np.flatnonzero(has_missing)
        # 존재값 전부 왼쪽 / 결측 오른쪽
        parts.append((seg_node[b], seg_feat[b], np.nextafter(v_a[end_idx[b]], np.inf),
                      np.zeros(b.size, bool), Gp[b], Hp[b]))
        # 존재값 전부 오른쪽 / 결측 왼쪽
        parts.append((seg_node[b], seg_feat[b], v_a[start_idx[b]], np.ones(b.size, bool), Gm[b], Hm[b]))
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def _best_splits(cands, G, H, cfg: TrainConfig) -> Dict[int, Tuple[int, float, bool, float]]:
    """노드별 최적 분할. 동률(상대오차 1e-9)은 특징 → 임계값 → default_left=False 순."""
    if cands is None:
        return {}
    node, feat, thr, dl, GL, HL = cands
    GR, HR = G[node] - GL, H[node] - HL
    gain = _split_gain(GL, HL, GR, HR, cfg.reg_lambda, cfg.gamma)
    ok = (HL >= cfg.min_child_weight) & (HR >= cfg.min_child_weight) & (gain > 0)
    if not ok.any():
        return {}
    node, feat, thr, dl, gain = node[ok], feat[ok], thr[ok], dl[ok], gain[ok]
    order = np.lexsort((dl, thr, feat, node))
    node, feat, thr, dl, gain = node[order], feat[order], thr[order], dl[order], gain[order]

    best = {}
    bounds = np.flatnonzero(np.r_[True, node[1:] != node[:-1], True])
    for start, end in zip(bounds[:-1], bounds[1:]):
        seg_gain = gain[start:end]
        top = seg_gain.max()
        pick = start + int(np.flatnonzero(seg_gain >= top - _GAIN_RTOL * abs(top))[0])
        best[int(node[pick])] = (int(feat[pick]), float(thr[pick]), bool(dl[pick]), float(gain[pick]))
    return best


def _grow_tree(entries, columns: _Columns, g, h, cfg: TrainConfig) -> Tree:
    n = g.size
    feature, threshold, default_left, left, right, value, gain = [], [], [], [], [], [], []

    def _new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (default_left, False), (left, -1),
                       (right, -1), (value, 0.0), (gain, 0.0)):
            lst.append(v)
        return len(feature) - 1

    level = [_new_node()]
    node_of_row = np.zeros(n, dtype=np.int64)
    for depth in range(cfg.max_depth + 1):
        n_level = len(level)
        active = node_of_row >= 0
        G = np.bincount(node_of_row[active], weights=g[active], minlength=n_level)
        H = np.bincount(node_of_row[active], weights=h[active], minlength=n_level)
        counts = np.bincount(node_of_row[active], minlength=n_level)

        splits = {}
        if depth < cfg.max_depth:
            splits = _best_splits(_level_candidates(entries, node_of_row, g, h, G, H, counts, n_level), G, H, cfg)

        next_level = []
        next_node_of_row = np.full(n, -1, dtype=np.int64)
        for j, nid in enumerate(level):
            rows = np.flatnonzero(node_of_row == j)
            if j not in splits:
                value[nid] = _leaf_weight(G[j], H[j], cfg.reg_lambda)
                continue
            f, t, dl, gn = splits[j]
            feature[nid], threshold[nid], default_left[nid], gain[nid] = f, t, dl, gn
            left[nid], right[nid] = _new_node(), _new_node()
            vals, present = columns.get(f)
            go_left = np.where(present[rows], vals[rows] < t, dl)
            next_node_of_row[rows[go_left]] = len(next_level)
            next_node_of_row[rows[~go_left]] = len(next_level) + 1
            next_level.extend([left[nid], right[nid]])
        if not next_level:
            break
        level, node_of_row = next_level, next_node_of_row

    return Tree(tuple(feature), tuple(threshold), tuple(default_left), tuple(left), tuple(right),
                tuple(value), tuple(gain))


def _tree_output(tree: Tree, columns: _Columns) -> np.ndarray:
    node = np.zeros(columns.n_rows, dtype=np.int64)
    feature = np.asarray(tree.feature)
    while True:
        internal = feature[node] >= 0
        if not internal.any():
            break
        for nid in np.unique(node[internal]):
            rows = np.flatnonzero(node == nid)
            vals, present = columns.get(tree.feature[nid])
            go_left = np.where(present[rows], vals[rows] < tree.threshold[nid], tree.default_left[nid])
            node[rows] = np.where(go_left, tree.left[nid], tree.right[nid])
    return np.asarray(tree.value)[node]


def _logloss(y, margin) -> float:
    p = np.clip(expit(margin), _PROB_EPS, 1 - _PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def train(X, y, cfg: TrainConfig = None, feature_names: Sequence[str] = ()) -> TreeEnsemble:
    cfg = cfg or TrainConfig()
    cfg.validate()
    y = np.asarray(y, dtype=float).ravel()
    if y.size == 0:
        raise EmptyData("학습 데이터가 비어 있습니다.")
    X = _prepare(X)
    if X.shape[0] == 0:
        raise EmptyData("학습 데이터가 비어 있습니다.")
    if X.shape[0] != y.size or y.size < 2:
        raise ValidationError(f"X 행 수({X.shape[0]})와 y 길이({y.size})가 맞지 않거나 2 미만입니다.")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("레이블은 0/1이어야 합니다.")
    if np.unique(y).size < 2:
        raise SingleClass("한 클래스만 있는 데이터로는 학습할 수 없습니다.")

    prevalence = float(y.mean())
    base = math.log(prevalence / (1.0 - prevalence))
    entries = _feature_entries(X)
    columns = _Columns(X)
    rng = np.random.default_rng(cfg.seed)

    ensemble = TreeEnsemble(base, [], cfg.learning_rate, X.shape[1], tuple(feature_names), cfg)
    margin = np.full(y.size, base)
    ensemble.history["loss"].append(_logloss(y, margin))
    for r in range(cfg.n_rounds):
        p = expit(margin)
        g, h = p - y, p * (1.0 - p)
        if cfg.subsample < 1.0:
            keep = rng.random(y.size) < cfg.subsample
            g, h = np.where(keep, g, 0.0), np.where(keep, h, 0.0)
        tree = _grow_tree(entries, columns, g, h, cfg)
        ensemble.trees.append(tree)
        margin = margin + cfg.learning_rate * _tree_output(tree, columns)
        ensemble.history["loss"].append(_logloss(y, margin))
        ensemble.history["splits"].extend([r, f, gn] for f, _, gn in tree.splits())
    logger.debug(f"부스팅 완료: rounds={cfg.n_rounds}, depth={cfg.max_depth}, lr={cfg.learning_rate}, "
                 f"loss {ensemble.history['loss'][0]:.4f} → {ensemble.history['loss'][-1]:.4f}")
    return ensemble


def predict_margin(ensemble: TreeEnsemble, X) -> np.ndarray:
    if not sparse.issparse(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[-1] != ensemble.n_features:
        raise ArityMismatch(f"특징 수 {X.shape[-1]} ≠ 모델 특징 수 {ensemble.n_features}")
    columns = _Columns(X)
    margin = np.full(X.shape[0], ensemble.base_score)
    for tree in ensemble.trees:
        margin += ensemble.learning_rate * _tree_output(tree, columns)
    return margin


def predict_proba(ensemble: TreeEnsemble, x):
    """1차원 입력이면 float, 2차원(또는 희소 행렬)이면 행별 확률 배열."""
    if not sparse.issparse(x) and np.ndim(x) == 1:
        return float(expit(predict_margin(ensemble, np.asarray(x, dtype=float).reshape(1, -1)))[0])
    return expit(predict_margin(ensemble, x))


def predict(ensemble: TreeEnsemble, X, threshold: float = config.PROBA_THRESHOLD) -> np.ndarray:
    return (np.atleast_1d(predict_proba(ensemble, X)) >= threshold).astype(int)


def feature_importance(ensemble: TreeEnsemble) -> ImportanceReport:
    gains = ensemble.gain_by_feature
    total = gains.sum()
    if total <= 0:
        return ImportanceReport(())
    names = ensemble.feature_names or tuple(f"f{i}" for i in range(ensemble.n_features))
    order = sorted(np.flatnonzero(gains > 0), key=lambda i: (-gains[i], i))
    return ImportanceReport(tuple((int(i), names[i], float(gains[i] / total)) for i in order))


def _tree_to_dict(tree: Tree) -> dict:
    return {
        "feature": list(tree.feature),
        "threshold": [repr(float(t)) for t in tree.threshold],
        "default_left": list(tree.default_left),
        "left": list(tree.left),
        "right": list(tree.right),
        "value": [repr(float(v)) for v in tree.value],
        "gain": [repr(float(v)) for v in tree.gain],
    }


def _tree_from_dict(d: dict) -> Tree:
    return Tree(tuple(int(f) for f in d["feature"]), tuple(float(t) for t in d["threshold"]),
                tuple(bool(b) for b in d["default_left"]), tuple(int(i) for i in d["left"]),
                tuple(int(i) for i in d["right"]), tuple(float(v) for v in d["value"]),
                tuple(float(v) for v in d["gain"]))


def dumps_ensemble(ensemble: TreeEnsemble) -> str:
    payload = {
        "format_version": config.BOOST_FORMAT_VERSION,
        "base_score": repr(float(ensemble.base_score)),
        "learning_rate": repr(float(ensemble.learning_rate)),
        "n_features": ensemble.n_features,
        "feature_names": list(ensemble.feature_names),
        "config": asdict(ensemble.config) if ensemble.config else None,
        "trees": [_tree_to_dict(t) for t in ensemble.trees],
    }
    return json.dumps(payload, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def save_ensemble(ensemble: TreeEnsemble, path) -> None:
    Path(path).write_text(dumps_ensemble(ensemble), encoding="utf-8")


def load_ensemble(path) -> TreeEnsemble:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format_version") != config.BOOST_FORMAT_VERSION:
        raise ValidationError(f"지원하지 않는 앙상블 형식 버전: {payload.get('format_version')}")
    cfg = TrainConfig(**payload["config"]) if payload.get("config") else None
    return TreeEnsemble(
        base_score=float(payload["base_score"]),
        trees=[_tree_from_dict(t) for t in payload["trees"]],
        learning_rate=float(payload["learning_rate"]),
        n_features=int(payload["n_features"]),
        feature_names=tuple(payload["feature_names"]),
        config=cfg,
    )
