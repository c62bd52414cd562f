import numpy as np
import pandas as pd
import pytest

import config
from errors import EmptyTrainingSet, MissingFeature, ValidationError
from vectors import (
    apply_scaler,
    assemble_stylo,
    fit_scaler,
    fit_tfidf,
    from_sparse_text,
    read_feature_csv,
    stylo_frame,
    to_sparse_text,
    transform_tfidf,
    write_feature_csv,
)

FULL = {
    "perplexity": 142.5, "flesch_reading_ease": 71.2, "flesch_kincaid_grade": 6.3, "gunning_fog": 8.1,
    "analytic": 44.0, "clout": 61.5, "authentic": 30.25, "tone": 88.0,
}


def test_document_frequency():
    vocab = fit_tfidf([["a", "b"], ["b", "c"]])
    assert set(vocab.terms) == {"a", "b", "c"}
    assert sorted(vocab.terms.values()) == [0, 1, 2]
    assert vocab.doc_frequency("b") == 2
    assert vocab.doc_frequency("a") == 1


def test_single_document_df():
    vocab = fit_tfidf([["x", "y", "x"]])
    assert all(vocab.doc_frequency(t) == 1 for t in vocab.terms)


def test_unseen_term_gives_zero_vector():
    vocab = fit_tfidf([["a", "b"], ["b", "c"]])
    assert transform_tfidf(["z"], vocab).nnz == 0


def test_known_term_weight():
    vocab = fit_tfidf([["a", "b"], ["b", "c"]])
    assert vocab.idf[vocab.terms["b"]] == pytest.approx(1.0)
    vec = transform_tfidf(["b"], vocab)
    assert vec.nnz == 1
    assert vec[0, vocab.terms["b"]] == pytest.approx(1.0)


def test_empty_doc_is_zero():
    vocab = fit_tfidf([["a", "b"]])
    vec = transform_tfidf([], vocab)
    assert vec.shape == (1, 2)
    assert vec.nnz == 0


def test_l2_scale_invariance():
    vocab = fit_tfidf([["a", "b"], ["b", "c"], ["a", "c", "c"]])
    one = transform_tfidf(["a", "c"], vocab).toarray()
    two = transform_tfidf(["a", "a", "c", "c"], vocab).toarray()
    np.testing.assert_allclose(one, two)
    assert np.linalg.norm(one) == pytest.approx(1.0)


def test_tfidf_lowercases_document_tokens(make_doc):
    vocab = fit_tfidf([make_doc("The Sea"), make_doc("the ship")])
    assert "the" in vocab.terms
    assert vocab.doc_frequency("the") == 2


def test_sparse_text():
    vocab = fit_tfidf([["a", "b"], ["b", "c"]])
    vec = transform_tfidf(["a", "b"], vocab)
    restored = from_sparse_text(to_sparse_text(vec), len(vocab))
    np.testing.assert_array_equal(restored.toarray(), vec.toarray())


def test_sparse_text_rejects_out_of_range():
    with pytest.raises(ValidationError):
        from_sparse_text("5:1.0", 3)


def test_assemble_in_fixed_order():
    vector = assemble_stylo(dict(reversed(list(FULL.items()))))
    assert vector.names == config.STYLO_FEATURES
    assert vector.as_dict() == FULL


def test_missing_tone():
    partial = {k: v for k, v in FULL.items() if k != "tone"}
    with pytest.raises(MissingFeature) as err:
        assemble_stylo(partial)
    assert err.value.name == "tone"


def test_nan_is_missing():
    with pytest.raises(MissingFeature):
        assemble_stylo({**FULL, "clout": float("nan")})


def test_feature_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    rows = [{"id": f"d{i}", "author": "whitman", "source": "human", "genre": "poem",
             **{f: float(rng.normal(50, 30)) for f in config.STYLO_FEATURES}} for i in range(4)]
    frame = pd.DataFrame(rows)
    path = tmp_path / "features.csv"
    write_feature_csv(frame, path, seed=7, config_hash="abc123")
    restored, meta = read_feature_csv(path)
    assert meta == {"seed": "7", "config_hash": "abc123"}
    assert list(restored["id"]) == list(frame["id"])
    np.testing.assert_allclose(restored[list(config.STYLO_FEATURES)].to_numpy(),
                               frame[list(config.STYLO_FEATURES)].to_numpy(), rtol=0, atol=1e-12)


def test_feature_csv_requires_header(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("id,author\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        read_feature_csv(path)


def test_scaler_hand_example():
    scaler = fit_scaler([[0.0], [2.0]])
    assert scaler.mean[0] == 1.0
    assert scaler.std[0] == 1.0
    assert apply_scaler([[4.0]], scaler)[0, 0] == pytest.approx(3.0)


def test_scaler_constant_dimension_passes_through():
    scaler = fit_scaler([[1.0, 5.0], [3.0, 5.0]])
    assert scaler.constant_dimensions == [1]
    out = apply_scaler([[2.0, 9.0]], scaler)
    assert out[0, 1] == 9.0


def test_scaler_centers_mean_vector():
    x = np.array([[1.0, 10.0], [2.0, 30.0], [6.0, 20.0]])
    scaler = fit_scaler(x)
    np.testing.assert_allclose(apply_scaler(scaler.mean, scaler), 0.0, atol=1e-12)


def test_scaler_needs_data():
    with pytest.raises(EmptyTrainingSet):
        fit_scaler(np.empty((0, 3)))


def test_stylo_frame_requires_perplexity(make_corpus, tiny_lexicon_path):
    from psycholex import load_lexicon
    corpus = make_corpus(["I am happy today.", "So sad."])
    with pytest.raises(MissingFeature) as err:
        stylo_frame(corpus, {corpus.ids[0]: 10.0}, load_lexicon(tiny_lexicon_path))
    assert err.value.name == "perplexity"


def test_missing_perplexity_is_reported_before_lexicon_work(make_corpus):
    from psycholex import Lexicon
    corpus = make_corpus(["I am happy today."])
    # 카테고리가 하나도 없는 사전이라도 perplexity 누락이 먼저 보고되어야 함
    with pytest.raises(MissingFeature) as err:
        stylo_frame(corpus, {}, Lexicon(categories={}, entries={}, prefixes={}))
    assert err.value.name == "perplexity"


def test_stylo_frame_columns(make_corpus):
    from psycholex import load_lexicon
    corpus = make_corpus(["I am happy today.", "We were sad but glad."])
    frame = stylo_frame(corpus, {i: 12.0 for i in corpus.ids}, load_lexicon(config.DEMO_LEXICON_PATH))
    assert list(frame.columns) == ["id", "author", "source", "genre", *config.STYLO_FEATURES]
    assert len(frame) == 2
