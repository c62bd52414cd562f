"""합성 미러 실험: 단어 분포는 같고 예측 가능성만 다른 두 코퍼스.

사람 쪽 문서는 공통 단어 목록에서 단어를 독립·균등하게 뽑습니다.
AI 쪽 문서는 고정된 후속어 순열을 높은 확률로 따르는 마르코프 연쇄입니다.
전이행렬이 이중확률(doubly stochastic)이라 단어 빈도는 두 쪽이 같고,
따라서 TF-IDF는 우연 수준에 머물고 perplexity만 두 쪽을 가릅니다.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

import boost
import config
from corpus import HUMAN, Corpus, make_document
from evaluation import Dataset, NestedCvReport, StyloPipeline, TfidfPipeline, nested_cv, AI_LABEL, HUMAN_LABEL
from lm import Smoothing, perplexity, train_ngram
from psycholex import load_dimension_weights, load_lexicon
from stats import ComparisonTable, build_comparison_table
from utils import get_logger
from vectors import stylo_frame

logger = get_logger(__name__)

MIRROR_AUTHOR = "mirror"
MIRROR_MODEL = "markov"
WORDS = (
    "river", "stone", "light", "morning", "garden", "window", "silver", "quiet", "bread", "winter",
    "summer", "letter", "market", "candle", "forest", "harbor", "music", "paper", "shadow", "valley",
    "orange", "yellow", "green", "blue", "old", "young", "small", "large", "soft", "bright",
    "walk", "carry", "open", "close", "listen", "wonder", "remember", "follow", "gather", "travel",
    "the", "a", "of", "in", "with", "and", "but", "we", "you", "they",
    "happy", "sad", "always", "never", "often", "slowly", "together", "between", "under", "across",
)
FOLLOW_PROB = 0.85
SENTENCE_LENGTH = (5, 15)
TOKENS_PER_DOC = 40


@dataclass
class MirrorResult:
    comparison: ComparisonTable
    stylometric: NestedCvReport
    tfidf: NestedCvReport


def _render(sentences: List[List[str]]) -> str:
    return " ".join(" ".join([s[0].capitalize()] + s[1:]) + "." for s in sentences)


def _generate_text(rng: np.random.Generator, successor: np.ndarray = None) -> str:
    sentences, total = [], 0
    while total < TOKENS_PER_DOC:
        length = int(rng.integers(SENTENCE_LENGTH[0], SENTENCE_LENGTH[1] + 1))
        idx = [int(rng.integers(len(WORDS)))]
        for _ in range(length - 1):
            if successor is not None and rng.random() < FOLLOW_PROB:
                idx.append(int(successor[idx[-1]]))
            else:
                idx.append(int(rng.integers(len(WORDS))))
        sentences.append([WORDS[i] for i in idx])
        total += length
    return _render(sentences)


def build_mirror_corpora(n_per_class: int = 600, seed: int = config.SEED) -> Tuple[Corpus, Corpus, Corpus]:
    """(사람 코퍼스, AI 코퍼스, 언어모델 학습용 참조 코퍼스)."""
    rng = np.random.default_rng(seed)
    successor = rng.permutation(len(WORDS))

    def _make(prefix, source, n, chain):
        return [make_document(f"{prefix}-{i:05d}", MIRROR_AUTHOR, source, "other", _generate_text(rng, chain))
                for i in range(n)]

    human = Corpus(tuple(_make("h", HUMAN, n_per_class, None)), label="mirror-human")
    ai = Corpus(tuple(_make("m", MIRROR_MODEL, n_per_class, successor)), label="mirror-ai")
    reference = Corpus(tuple(_make("ref-h", HUMAN, n_per_class, None) + _make("ref-m", MIRROR_MODEL, n_per_class, successor)),
                       label="mirror-reference")
    logger.info(f"미러 코퍼스 생성: 클래스당 {n_per_class}개, 참조 {len(reference)}개")
    return human, ai, reference


def run_mirror_experiment(n_per_class: int = 600, seed: int = config.SEED, k_outer: int = config.K_OUTER,
                          k_inner: int = config.K_INNER, n_rounds: int = config.BOOST_N_ROUNDS,
                          lexicon_path=config.DEMO_LEXICON_PATH,
                          weights_path=config.DIMENSION_WEIGHTS_PATH) -> MirrorResult:
    human, ai, reference = build_mirror_corpora(n_per_class, seed)
    model = train_ngram(reference, order=2, smoothing=Smoothing.kneser_ney(), min_count=1)
    corpus = Corpus.merge([human, ai], label="mirror")
    perplexities = {doc.id: perplexity(model, doc).perplexity for doc in corpus}
    features = stylo_frame(corpus, perplexities, load_lexicon(lexicon_path), load_dimension_weights(weights_path))

    values = {}
    for source, rows in features.groupby("source"):
        for metric in config.STYLO_FEATURES:
            values[(metric, source)] = rows[metric].tolist()
    comparison = build_comparison_table(values, title=f"{MIRROR_AUTHOR} - mirror")

    labels = np.where(features["source"] == HUMAN, HUMAN_LABEL, AI_LABEL)
    data = Dataset(features["id"].tolist(), labels, features[list(config.STYLO_FEATURES)].to_numpy(dtype=float),
                   [corpus.get(i) for i in features["id"]], name="mirror")
    cfg = boost.TrainConfig(n_rounds=n_rounds, seed=seed)
    stylometric = nested_cv(data, StyloPipeline, None, k_outer, k_inner, seed, cfg)
    tfidf = nested_cv(data, TfidfPipeline, None, k_outer, k_inner, seed, cfg)
    return MirrorResult(comparison, stylometric, tfidf)
