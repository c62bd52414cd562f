"""LIWC 호환 사전 기반 심리언어 카테고리 프로파일과 4개 요약 차원 (LIWC-approximate).

요약 차원 = 1 + 98 · sigmoid((bias + Σ w_c · percent(c)) / scale).
가중치는 버전이 붙은 데이터 파일(data/dimension_weights.tsv)에서 읽습니다.
"""
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Optional, Sequence, Tuple

import pandas as pd
from scipy.special import expit

import config
from corpus import Corpus, Document
from errors import EmptyDocument, MalformedDictionary, MissingCategory, UnknownCategoryReference
from utils import file_cache, get_logger

logger = get_logger(__name__)

DIMENSIONS = ("analytic", "clout", "authentic", "tone")
OUTPUT_LABEL = "LIWC-approximate"


@dataclass(frozen=True)
class Lexicon:
    categories: Dict[str, str]  # id → 이름
    entries: Dict[str, FrozenSet[str]]  # 정확 일치 단어 → 카테고리 id
    prefixes: Dict[str, FrozenSet[str]]  # 와일드카드 어간 → 카테고리 id
    max_prefix_len: int = 0
    # 여러 단어 항목 ("kind of"). 마지막 단어만 '*' 와일드카드 허용
    phrases: Dict[Tuple[str, ...], FrozenSet[str]] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries) + len(self.prefixes) + len(self.phrases)

    def lookup(self, token: str) -> Optional[FrozenSet[str]]:
        """정확 일치 우선, 그다음 가장 긴 접두어."""
        word = token.lower()
        cats = self.entries.get(word)
        if cats is not None:
            return cats
        for length in range(min(len(word), self.max_prefix_len), 0, -1):
            cats = self.prefixes.get(word[:length])
            if cats is not None:
                return cats
        return None

    def match_phrase(self, tokens: Sequence[str], start: int) -> Tuple[int, Optional[FrozenSet[str]]]:
        """start 위치에서 가장 긴 구 항목. (덮은 토큰 수, 카테고리) 또는 (0, None)."""
        best_len, best = 0, None
        for words, cats in self.phrases.items():
            n = len(words)
            if n <= best_len or start + n > len(tokens):
                continue
            window = [t.lower() for t in tokens[start:start + n]]
            *head, last = words
            if window[:-1] != head:
                continue
            if last.endswith("*"):
                if not window[-1].startswith(last[:-1]):
                    continue
            elif window[-1] != last:
                continue
            best_len, best = n, cats
        return best_len, best


@dataclass(frozen=True)
class CategoryProfile:
    percents: Dict[str, float]
    dictionary_coverage: float


@dataclass(frozen=True)
class DimensionSpec:
    bias: float
    weights: Dict[str, float]
    scale: float


@dataclass(frozen=True)
class DimensionWeights:
    version: str
    dimensions: Dict[str, DimensionSpec]


@dataclass(frozen=True)
class SummaryDimensions:
    analytic: float
    clout: float
    authentic: float
    tone: float


@file_cache
def load_lexicon(path) -> Lexicon:
    """LIWC 형식 사전: '%' 줄로 감싼 헤더(id<TAB>name) 뒤에 word[*]<TAB>id[<TAB>id...]. CRLF 허용."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.rstrip("\r\n") for line in f]

    categories = {}
    entries, prefixes, phrases = {}, {}, {}
    section = 0  # 0: 헤더 전, 1: 헤더, 2: 본문
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped == "%":
            if section >= 2:
                raise MalformedDictionary(line_no, "'%' 구분자가 너무 많습니다")
            section += 1
            continue
        if section == 0:
            raise MalformedDictionary(line_no, "사전은 '%' 줄로 시작해야 합니다")
        if section == 1:
            fields = stripped.split()
            if len(fields) < 2:
                raise MalformedDictionary(line_no, "카테고리 줄은 id<TAB>name 형식이어야 합니다")
            categories[fields[0]] = fields[1]
            continue

        # 본문은 TAB 구분. 항목 안의 공백은 여러 단어 구의 일부
        fields = [f.strip() for f in stripped.split("\t") if f.strip()]
        word, ids = " ".join(fields[0].lower().split()), fields[1:]
        if not ids:
            raise MalformedDictionary(line_no, f"'{word}'에 카테고리가 없습니다")
        for cat_id in ids:
            if cat_id not in categories:
                raise UnknownCategoryReference(line_no, cat_id)
        if " " in word:
            words = tuple(word.split(" "))
            if any("*" in w for w in words[:-1]) or "*" in words[-1][:-1] or words[-1] == "*":
                raise MalformedDictionary(line_no, f"잘못된 구 항목 '{word}'")
            phrases[words] = phrases.get(words, frozenset()) | frozenset(ids)
        elif word.endswith("*"):
            stem = word[:-1]
            if not stem or "*" in stem:
                raise MalformedDictionary(line_no, f"잘못된 와일드카드 항목 '{word}'")
            prefixes[stem] = prefixes.get(stem, frozenset()) | frozenset(ids)
        else:
            entries[word] = entries.get(word, frozenset()) | frozenset(ids)

    if section < 2:
        raise MalformedDictionary(len(lines), "헤더가 '%'로 닫히지 않았습니다")
    logger.info(f"사전 로드: 카테고리 {len(categories)}개, 항목 {len(entries) + len(prefixes) + len(phrases)}개 ({path})")
    return Lexicon(
        categories=categories,
        entries=entries,
        prefixes=prefixes,
        max_prefix_len=max((len(s) for s in prefixes), default=0),
        phrases=phrases,
    )


def category_profile(doc: Document, lex: Lexicon) -> CategoryProfile:
    """카테고리별 토큰 비율(%)과 사전 커버리지. 한 토큰이 여러 카테고리에 기여할 수 있습니다."""
    total = len(doc.word_tokens)
    if total == 0:
        raise EmptyDocument(f"문서 {doc.id}에 단어 토큰이 없습니다.")
    counts = Counter()
    matched = 0
    tokens = doc.word_tokens
    i = 0
    while i < total:
        # 구 항목이 맞으면 한 번 세고 덮은 토큰을 모두 매칭으로 봄
        span, cats = lex.match_phrase(tokens, i) if lex.phrases else (0, None)
        if span:
            matched += span
            counts.update(cats)
            i += span
            continue
        cats = lex.lookup(tokens[i])
        if cats:
            matched += 1
            counts.update(cats)
        i += 1
    percents = {name: 100.0 * counts.get(cat_id, 0) / total for cat_id, name in lex.categories.items()}
    return CategoryProfile(percents=percents, dictionary_coverage=100.0 * matched / total)


@file_cache
def load_dimension_weights(path) -> DimensionWeights:
    """dimension<TAB>term<TAB>value. term은 카테고리 이름, 'bias', 'scale' 중 하나. '# version' 줄로 버전 표기."""
    version = "unversioned"
    raw: Dict[str, Dict] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if line.startswith("# version"):
                version = line[len("# version"):].strip()
                continue
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise MalformedDictionary(line_no, "가중치 줄은 dimension<TAB>term<TAB>value 형식이어야 합니다")
            dim, term, value = fields
            try:
                number = float(value)
            except ValueError:
                raise MalformedDictionary(line_no, f"숫자가 아닌 값 '{value}'")
            spec = raw.setdefault(dim, {"bias": 0.0, "scale": 25.0, "weights": {}})
            if term in ("bias", "scale"):
                spec[term] = number
            else:
                spec["weights"][term] = number
    dims = {d: DimensionSpec(s["bias"], dict(s["weights"]), s["scale"]) for d, s in raw.items()}
    return DimensionWeights(version=version, dimensions=dims)


def summary_dimensions(profile: CategoryProfile, weights: DimensionWeights = None) -> SummaryDimensions:
    weights = weights or load_dimension_weights(config.DIMENSION_WEIGHTS_PATH)
    values = {}
    for dim in DIMENSIONS:
        spec = weights.dimensions.get(dim)
        if spec is None:
            raise MissingCategory(dim)
        raw = spec.bias
        for category, w in spec.weights.items():
            if category not in profile.percents:
                raise MissingCategory(category)
            raw += w * profile.percents[category]
        values[dim] = 1.0 + 98.0 * float(expit(raw / spec.scale))
    return SummaryDimensions(**values)


def liwc_frame(corpus: Corpus, lex: Lexicon, weights: DimensionWeights = None) -> pd.DataFrame:
    """문서별 4개 요약 차원 (LIWC-approximate)."""
    logger.info(f"심리언어 차원 계산 시작: {len(corpus)}개 문서")
    rows = []
    for doc in corpus:
        try:
            profile = category_profile(doc, lex)
        except EmptyDocument:
            logger.warning(f"문서 {doc.id}: 토큰이 없어 심리언어 차원을 비웁니다.")
            rows.append({"id": doc.id, **{d: float("nan") for d in DIMENSIONS}, "dictionary_coverage": float("nan")})
            continue
        dims = summary_dimensions(profile, weights)
        rows.append({
            "id": doc.id,
            "analytic": dims.analytic,
            "clout": dims.clout,
            "authentic": dims.authentic,
            "tone": dims.tone,
            "dictionary_coverage": profile.dictionary_coverage,
        })
    df = pd.DataFrame(rows)
    df.attrs["label"] = OUTPUT_LABEL
    return df
