import re
from dataclasses import asdict, dataclass

import pandas as pd

import config
from corpus import Corpus, Document
from errors import DegenerateText
from utils import get_logger

logger = get_logger(__name__)

_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_VOWELS = set("aeiouy")


@dataclass(frozen=True)
class TextCounts:
    words: int
    sentences: int
    syllables: int
    complex_words: int


@dataclass(frozen=True)
class ReadabilityScores:
    flesch_reading_ease: float
    flesch_kincaid_grade: float
    gunning_fog: float


def count_syllables(word: str) -> int:
    """모음군(a,e,i,o,u,y) 수. 끝의 묵음 e는 빼되 '자음+le'로 끝나면 유지. 최소 1."""
    w = word.lower()
    count = len(_VOWEL_GROUP_RE.findall(w))
    if w.endswith("e"):
        consonant_le = w.endswith("le") and len(w) >= 3 and w[-3].isalpha() and w[-3] not in _VOWELS
        if not consonant_le:
            count -= 1
    return max(count, 1)


def _stripped_syllables(word: str) -> int:
    lower = word.lower()
    for suffix in config.COMPLEX_WORD_SUFFIXES:
        if lower.endswith(suffix) and len(lower) > len(suffix):
            return count_syllables(word[:-len(suffix)])
    return count_syllables(word)


def is_complex_word(word: str, sentence_initial: bool) -> bool:
    """Fog 지수용 복잡어: -es/-ed/-ing 제거 후 3음절 이상, 문장 첫 단어가 아닌 대문자 시작 단어(고유명사)는 제외."""
    if word[:1].isupper() and not sentence_initial:
        return False
    return _stripped_syllables(word) >= config.COMPLEX_WORD_SYLLABLES


def text_counts(doc: Document) -> TextCounts:
    initials = doc.sentence_initial_indices()
    tokens = doc.word_tokens
    return TextCounts(
        words=len(tokens),
        sentences=len(doc.sentences),
        syllables=sum(count_syllables(t) for t in tokens),
        complex_words=sum(1 for i, t in enumerate(tokens) if is_complex_word(t, i in initials)),
    )


def readability(counts: TextCounts) -> ReadabilityScores:
    """Flesch Reading Ease, Flesch-Kincaid Grade, Gunning Fog (문서 단위 카운트에서 계산)."""
    if counts.words <= 0:
        raise DegenerateText("단어가 없는 텍스트는 가독성을 계산할 수 없습니다.")
    if counts.sentences <= 0:
        raise DegenerateText("문장이 없는 텍스트는 가독성을 계산할 수 없습니다.")

    words_per_sentence = counts.words / counts.sentences
    syllables_per_word = counts.syllables / counts.words
    complex_ratio = counts.complex_words / counts.words

    fre = config.FRE_BASE - config.FRE_SENTENCE_WEIGHT * words_per_sentence - config.FRE_SYLLABLE_WEIGHT * syllables_per_word
    fkgl = config.FKGL_SENTENCE_WEIGHT * words_per_sentence + config.FKGL_SYLLABLE_WEIGHT * syllables_per_word - config.FKGL_OFFSET
    fog = config.FOG_WEIGHT * (words_per_sentence + config.FOG_COMPLEX_PERCENT * complex_ratio)
    return ReadabilityScores(fre, fkgl, fog)


def readability_frame(corpus: Corpus) -> pd.DataFrame:
    """문서별 카운트와 세 가지 가독성 지수."""
    logger.info(f"가독성 지수 계산 시작: {len(corpus)}개 문서")
    rows = []
    for doc in corpus:
        counts = text_counts(doc)
        try:
            scores = asdict(readability(counts))
        except DegenerateText:
            logger.warning(f"문서 {doc.id}: 단어가 없어 가독성 지수를 비웁니다.")
            scores = {k: float("nan") for k in ("flesch_reading_ease", "flesch_kincaid_grade", "gunning_fog")}
        rows.append({"id": doc.id, **asdict(counts), **scores})
    logger.info("가독성 지수 계산 완료.")
    return pd.DataFrame(rows)
