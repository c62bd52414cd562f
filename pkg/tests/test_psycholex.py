import pytest
from scipy.special import expit

import config
from errors import MalformedDictionary, MissingCategory, UnknownCategoryReference
from psycholex import (
    CategoryProfile,
    DimensionWeights,
    OUTPUT_LABEL,
    category_profile,
    liwc_frame,
    load_dimension_weights,
    load_lexicon,
    summary_dimensions,
)


def _write(tmp_path, text, name="lex.dic"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_tiny_lexicon(tiny_lexicon_path):
    lex = load_lexicon(tiny_lexicon_path)
    assert len(lex.entries) == 3
    assert lex.categories == {"1": "posemo", "2": "negemo"}


def test_wildcard_matches_prefix(tmp_path):
    lex = load_lexicon(_write(tmp_path, "%\n1\tposemo\n%\nhapp*\t1\n"))
    assert lex.lookup("happy") == frozenset({"1"})
    assert lex.lookup("happiness") == frozenset({"1"})
    assert lex.lookup("sad") is None


def test_exact_entry_wins_over_prefix(tmp_path):
    lex = load_lexicon(_write(tmp_path, "%\n1\tposemo\n2\tsocial\n%\nhappy\t2\nhapp*\t1\n"))
    assert lex.lookup("happy") == frozenset({"2"})
    assert lex.lookup("happier") == frozenset({"1"})


def test_undeclared_category_is_rejected(tmp_path):
    with pytest.raises(UnknownCategoryReference) as err:
        load_lexicon(_write(tmp_path, "%\n1\tposemo\n%\nhappy\t99\n"))
    assert err.value.line == 4
    assert err.value.category_id == "99"


def test_missing_header_is_malformed(tmp_path):
    with pytest.raises(MalformedDictionary):
        load_lexicon(_write(tmp_path, "happy\t1\n"))


def test_crlf_lexicon(tmp_path):
    path = tmp_path / "crlf.dic"
    path.write_bytes(b"%\r\n1\tposemo\r\n%\r\nglad\t1\r\n")
    assert load_lexicon(path).lookup("glad") == frozenset({"1"})


def test_profile_direct_count(make_doc, tiny_lexicon_path):
    profile = category_profile(make_doc("happy sad"), load_lexicon(tiny_lexicon_path))
    assert profile.percents == {"posemo": 50.0, "negemo": 50.0}
    assert profile.dictionary_coverage == 100.0


def test_profile_saturation(make_doc, tmp_path):
    lex = load_lexicon(_write(tmp_path, "%\n1\tarticles\n%\nthe\t1\n"))
    assert category_profile(make_doc("the the"), lex).percents["articles"] == 100.0


def test_profile_happier_via_prefix_only(make_doc, tmp_path):
    lex = load_lexicon(_write(tmp_path, "%\n1\tposemo\n2\tsocial\n%\nhappy\t2\nhapp*\t1\n"))
    profile = category_profile(make_doc("happier"), lex)
    assert profile.percents == {"posemo": 100.0, "social": 0.0}


def test_profile_is_independent_of_entry_order(make_doc, tmp_path):
    a = load_lexicon(_write(tmp_path, "%\n1\tposemo\n2\tnegemo\n%\nhappy\t1\nsad\t2\n", "a.dic"))
    b = load_lexicon(_write(tmp_path, "%\n2\tnegemo\n1\tposemo\n%\nsad\t2\nhappy\t1\n", "b.dic"))
    doc = make_doc("happy days and sad nights")
    assert category_profile(doc, a) == category_profile(doc, b)


def _zero_profile(weights):
    names = {c for spec in weights.dimensions.values() for c in spec.weights}
    return CategoryProfile({n: 0.0 for n in names}, 0.0)


def test_all_zero_profile_gives_bias_sigmoid():
    weights = load_dimension_weights(config.DIMENSION_WEIGHTS_PATH)
    dims = summary_dimensions(_zero_profile(weights), weights)
    assert dims.tone == pytest.approx(50.0)
    assert dims.clout == pytest.approx(50.0)
    assert dims.analytic == pytest.approx(1 + 98 * expit(30 / 25))


def test_full_positive_tone():
    weights = load_dimension_weights(config.DIMENSION_WEIGHTS_PATH)
    profile = _zero_profile(weights)
    profile.percents["posemo"] = 100.0
    tone = summary_dimensions(profile, weights).tone
    assert tone == pytest.approx(1 + 98 * expit(4.0))
    assert tone == pytest.approx(97.24, abs=0.01)


def test_missing_category_in_profile():
    weights = load_dimension_weights(config.DIMENSION_WEIGHTS_PATH)
    profile = _zero_profile(weights)
    del profile.percents["articles"]
    with pytest.raises(MissingCategory) as err:
        summary_dimensions(profile, weights)
    assert err.value.name == "articles"


def test_weights_file_is_versioned():
    assert load_dimension_weights(config.DIMENSION_WEIGHTS_PATH).version == "1"


def test_dimensions_stay_in_range(make_corpus):
    lex = load_lexicon(config.DEMO_LEXICON_PATH)
    frame = liwc_frame(make_corpus(["I love my friends and we are happy.", "No, never, nothing is good."]), lex)
    assert frame.attrs["label"] == OUTPUT_LABEL
    for dim in ("analytic", "clout", "authentic", "tone"):
        assert frame[dim].between(1.0, 99.0).all()


def test_multi_word_entry_is_one_phrase(tmp_path, make_doc):
    lex = load_lexicon(_write(tmp_path, "%\n1\thedge\n2\tsocial\n%\nkind of\t1\nfriend*\t2\nkind\t2\n"))
    assert ("kind", "of") in lex.phrases
    profile = category_profile(make_doc("It is kind of nice with friends"), lex)
    # "kind of"는 hedge 한 번, 두 토큰 모두 매칭으로 셈
    assert profile.percents["hedge"] == pytest.approx(100 / 7)
    assert profile.percents["social"] == pytest.approx(100 / 7)
    assert profile.dictionary_coverage == pytest.approx(300 / 7)


def test_phrase_with_trailing_wildcard(tmp_path, make_doc):
    lex = load_lexicon(_write(tmp_path, "%\n1\tposemo\n%\nthank you*\t1\n"))
    profile = category_profile(make_doc("thank yous all round"), lex)
    assert profile.percents["posemo"] == pytest.approx(25.0)


def test_missing_dimension_in_weights():
    weights = load_dimension_weights(config.DIMENSION_WEIGHTS_PATH)
    partial = DimensionWeights(weights.version, {d: s for d, s in weights.dimensions.items() if d != "tone"})
    with pytest.raises(MissingCategory) as err:
        summary_dimensions(_zero_profile(weights), partial)
    assert err.value.name == "tone"
