import numpy as np
import pytest
from scipy import sparse
from scipy.special import expit

from boost import (
    TrainConfig,
    dumps_ensemble,
    feature_importance,
    load_ensemble,
    predict,
    predict_margin,
    predict_proba,
    save_ensemble,
    train,
)
from errors import ArityMismatch, EmptyData, NonFiniteFeature, SingleClass, ValidationError

STUMP = TrainConfig(max_depth=1, learning_rate=0.1, n_rounds=1, min_child_weight=0)


def test_separable_stump():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    model = train(X, y, STUMP)
    tree = model.trees[0]
    assert tree.feature[0] == 0
    assert 1.0 < tree.threshold[0] < 2.0
    assert (predict(model, X) == y).all()


def test_single_class_rejected():
    with pytest.raises(SingleClass):
        train(np.array([[0.0], [1.0], [2.0]]), np.array([0, 0, 0]), STUMP)


def test_empty_and_non_finite_inputs():
    with pytest.raises(EmptyData):
        train(np.empty((0, 2)), np.array([]), STUMP)
    with pytest.raises(NonFiniteFeature):
        train(np.array([[0.0], [np.inf]]), np.array([0, 1]), STUMP)


def test_invalid_learning_rate():
    with pytest.raises(ValidationError):
        train(np.array([[0.0], [1.0]]), np.array([0, 1]), TrainConfig(learning_rate=0.0))


def _brute_force_split(X, y, lam=1.0):
    g = expit(np.zeros(len(y))) - y
    h = np.full(len(y), 0.25)
    G, H = g.sum(), h.sum()
    best = None
    for f in range(X.shape[1]):
        values = np.unique(X[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            thr = (lo + hi) / 2
            left = X[:, f] < thr
            GL, HL = g[left].sum(), h[left].sum()
            GR, HR = G - GL, H - HL
            gain = 0.5 * (GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - G ** 2 / (H + lam))
            if best is None or gain > best[2] + 1e-12:
                best = (f, thr, gain)
    return best


def test_split_matches_exhaustive_enumeration():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 4.0], [4.0, 3.0], [5.0, 6.0], [6.0, 5.0]])
    y = np.array([0, 0, 1, 0, 1, 1])
    feature, threshold, gain = _brute_force_split(X, y)
    tree = train(X, y, STUMP).trees[0]
    assert tree.feature[0] == feature
    assert tree.threshold[0] == pytest.approx(threshold)
    assert tree.gain[0] == pytest.approx(gain)


def test_zero_rounds_predicts_prevalence():
    X = np.arange(10, dtype=float).reshape(-1, 1)
    y = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
    model = train(X, y, TrainConfig(n_rounds=0))
    assert predict_proba(model, X[0]) == pytest.approx(0.3)
    assert len(feature_importance(model)) == 0


def test_margin_is_sum_of_tree_outputs(separable_data):
    X, y = separable_data
    cfg = TrainConfig(max_depth=2, learning_rate=0.3, n_rounds=4)
    full = train(X, y, cfg)
    partial = train(X, y, TrainConfig(max_depth=2, learning_rate=0.3, n_rounds=3))
    assert full.trees[:3] == partial.trees
    last_only = train(X, y, cfg)
    last_only.trees = full.trees[3:]
    last_only.base_score = 0.0
    np.testing.assert_allclose(predict_margin(full, X),
                               predict_margin(partial, X) + predict_margin(last_only, X), atol=1e-12)


def test_single_feature_importance():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    model = train(X, np.array([0, 0, 1, 1]), STUMP, feature_names=["perplexity"])
    assert feature_importance(model).as_dict() == {"perplexity": 1.0}


def test_importance_sums_to_one(separable_data):
    X, y = separable_data
    report = feature_importance(train(X, y, TrainConfig(max_depth=3, n_rounds=10), feature_names=["a", "b"]))
    assert sum(report.as_dict().values()) == pytest.approx(1.0)
    values = [v for _, _, v in report.entries]
    assert values == sorted(values, reverse=True)


def test_history_matches_trees(separable_data):
    X, y = separable_data
    model = train(X, y, TrainConfig(max_depth=2, n_rounds=5))
    assert len(model.history["loss"]) == 6
    splits = [s for tree in model.trees for s in tree.splits()]
    assert len(model.history["splits"]) == len(splits)
    assert all(model.history["splits"][i][1] == splits[i][0] for i in range(len(splits)))


def test_training_loss_decreases(separable_data):
    X, y = separable_data
    loss = train(X, y, TrainConfig(max_depth=2, learning_rate=0.1, n_rounds=20)).history["loss"]
    assert all(b <= a + 1e-12 for a, b in zip(loss, loss[1:]))
    assert loss[-1] < loss[0]


def test_serialization_is_deterministic(tmp_path, separable_data):
    X, y = separable_data
    cfg = TrainConfig(max_depth=3, n_rounds=5)
    first, second = train(X, y, cfg, ["a", "b"]), train(X, y, cfg, ["a", "b"])
    assert dumps_ensemble(first) == dumps_ensemble(second)

    path = tmp_path / "model.json"
    save_ensemble(first, path)
    restored = load_ensemble(path)
    np.testing.assert_array_equal(predict_margin(restored, X), predict_margin(first, X))


def test_arity_mismatch(separable_data):
    X, y = separable_data
    model = train(X, y, TrainConfig(n_rounds=2))
    with pytest.raises(ArityMismatch):
        predict_proba(model, np.zeros(3))


def test_sparse_input_with_missing_values():
    rng = np.random.default_rng(1)
    dense = np.zeros((40, 3))
    y = np.array([0, 1] * 20)
    # 양성 문서에만 0번 단어가 존재
    dense[y == 1, 0] = rng.uniform(0.2, 1.0, size=20)
    dense[:, 2] = rng.uniform(0.1, 1.0, size=40)
    X = sparse.csr_matrix(dense)
    model = train(X, y, TrainConfig(max_depth=1, learning_rate=0.5, n_rounds=5))
    assert (predict(model, X) == y).all()
    assert feature_importance(model).entries[0][0] == 0


ORACLE = TrainConfig(max_depth=3, learning_rate=0.3, n_rounds=100, min_child_weight=0)


def _oracle_dataset(seed):
    """짝수 개(4~8) 점, 1~3개 특징, 클래스 균형. 첫 라운드 g=±0.5, h=0.25로 합이 정확히 계산됨."""
    rng = np.random.default_rng(seed)
    n = 2 * int(rng.integers(2, 5))
    d = int(rng.integers(1, 4))
    X = np.round(rng.normal(size=(n, d)), 2)
    y = rng.permutation(np.repeat([0.0, 1.0], n // 2))
    return X, y


def _exhaustive_tree(X, y, cfg):
    """노드마다 모든 (특징, 중간값)을 열거하는 재귀 트리. (feature, thr, left, right) 또는 리프 가중치."""
    p = y.mean()
    g = np.full(y.size, p) - y
    h = np.full(y.size, p * (1 - p))
    lam = cfg.reg_lambda

    def node(rows, depth):
        G, H = g[rows].sum(), h[rows].sum()
        cands = []
        if depth < cfg.max_depth:
            for f in range(X.shape[1]):
                values = np.unique(X[rows, f])
                for lo, hi in zip(values[:-1], values[1:]):
                    thr = (lo + hi) / 2
                    left = rows[X[rows, f] < thr]
                    GL, HL = g[left].sum(), h[left].sum()
                    gain = 0.5 * (GL ** 2 / (HL + lam) + (G - GL) ** 2 / (H - HL + lam) - G ** 2 / (H + lam))
                    if gain > 0:
                        cands.append((f, thr, gain))
        if not cands:
            return -G / (H + lam)
        top = max(c[2] for c in cands)
        f, thr, _ = next(c for c in cands if c[2] >= top - 1e-9 * abs(top))
        left = rows[X[rows, f] < thr]
        right = rows[X[rows, f] >= thr]
        return (f, thr, node(left, depth + 1), node(right, depth + 1))

    return node(np.arange(y.size), 0)


def _assert_same_tree(tree, expected, nid=0):
    if not isinstance(expected, tuple):
        assert tree.feature[nid] < 0
        assert tree.value[nid] == pytest.approx(expected, abs=1e-9)
        return
    f, thr, left, right = expected
    assert tree.feature[nid] == f
    assert tree.threshold[nid] == pytest.approx(thr, abs=1e-12)
    _assert_same_tree(tree, left, tree.left[nid])
    _assert_same_tree(tree, right, tree.right[nid])


@pytest.mark.parametrize("seed", range(50))
def test_first_tree_matches_exhaustive_search(seed):
    X, y = _oracle_dataset(seed)
    model = train(X, y, ORACLE)
    _assert_same_tree(model.trees[0], _exhaustive_tree(X, y, ORACLE))

    loss = model.history["loss"]
    assert len(loss) == 101
    assert all(b <= a + 1e-12 for a, b in zip(loss, loss[1:]))
