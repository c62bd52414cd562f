"""n-gram 언어모델 기반 perplexity 계산과 외부 점수(트랜스포머 등) 가져오기.

- 1차(unigram) 모델은 문맥이 없고 단어 토큰만 예측합니다.
- 2차 이상은 문장마다 <s>를 (order-1)개 붙이고 </s>까지 예측합니다.
- 학습 빈도 < min_count 인 토큰은 <unk>로 바뀝니다. 토큰은 소문자로 다룹니다.
"""
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import pandas as pd

import config
from corpus import Corpus, Document
from errors import (
    EmptyCorpus,
    EmptyDocument,
    InsufficientVocabulary,
    LanguageModelError,
    MalformedScoreFile,
    UnknownDocId,
    ValidationError,
)
from utils import get_logger

logger = get_logger(__name__)

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
ADD_K = "add_k"
KNESER_NEY = "interpolated_kneser_ney"

Context = Tuple[str, ...]


@dataclass(frozen=True)
class Smoothing:
    kind: str
    value: float  # add_k: k, kneser-ney: discount

    @staticmethod
    def add_k(k: float = config.LM_ADD_K) -> "Smoothing":
        return Smoothing(ADD_K, float(k))

    @staticmethod
    def kneser_ney(discount: float = config.LM_KN_DISCOUNT) -> "Smoothing":
        return Smoothing(KNESER_NEY, float(discount))

    def validate(self):
        if self.kind == ADD_K:
            if self.value < 0:
                raise ValidationError(f"add_k의 k는 0 이상이어야 합니다: {self.value}")
        elif self.kind == KNESER_NEY:
            if not 0 < self.value <= 1:
                raise ValidationError(f"Kneser-Ney discount는 (0, 1] 범위여야 합니다: {self.value}")
        else:
            raise ValidationError(f"알 수 없는 스무딩: {self.kind}")


@dataclass
class NgramModel:
    order: int
    vocab: FrozenSet[str]
    counts: Dict[int, Dict[Context, Dict[str, int]]]  # n → 문맥(길이 n-1) → 다음 토큰 → 빈도
    smoothing: Smoothing
    min_count: int = config.LM_MIN_COUNT
    _totals: Dict[int, Dict[Context, int]] = field(init=False, repr=False)
    _continuation: Dict[int, Dict[Context, Dict[str, int]]] = field(init=False, repr=False)

    def __post_init__(self):
        self._totals = {
            n: {ctx: sum(nexts.values()) for ctx, nexts in table.items()}
            for n, table in self.counts.items()
        }
        # Kneser-Ney 하위 차수용 연속(continuation) 빈도: N1+(• ctx w)
        self._continuation = {}
        for n in range(1, self.order):
            cont = defaultdict(Counter)
            for ctx, nexts in self.counts[n + 1].items():
                for w in nexts:
                    cont[ctx[1:]][w] += 1
            self._continuation[n] = {c: dict(v) for c, v in cont.items()}

    @property
    def predicted_vocab(self) -> List[str]:
        excluded = {BOS} if self.order > 1 else {BOS, EOS}
        return sorted(self.vocab - excluded)

    def map_token(self, token: str) -> str:
        word = token.lower()
        return word if word in self.vocab and word not in (BOS, EOS) else UNK

    def prob(self, word: str, context: Context) -> float:
        """p(word | context). context 길이는 order-1 (짧으면 하위 차수로)."""
        context = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        if self.smoothing.kind == ADD_K:
            return self._add_k(word, context)
        return self._kneser_ney(word, context, highest=True)

    def _add_k(self, word: str, context: Context) -> float:
        n = len(context) + 1
        total = self._totals[n].get(context, 0)
        if total == 0 and n > 1:
            return self._add_k(word, context[1:])
        k = self.smoothing.value
        v = len(self.predicted_vocab)
        count = self.counts[n].get(context, {}).get(word, 0)
        denom = total + k * v
        return (count + k) / denom if denom > 0 else 0.0

    def _kneser_ney(self, word: str, context: Context, highest: bool) -> float:
        n = len(context) + 1
        d = self.smoothing.value
        if highest:
            table = self.counts[n].get(context)
        else:
            table = self._continuation[n].get(context)
        total = sum(table.values()) if table else 0

        if n == 1:
            # 최하위 차수는 균등분포와 보간해 모든 확률을 양수로 유지
            uniform = 1.0 / len(self.predicted_vocab)
            return max(table.get(word, 0) - d, 0) / total + d * len(table) / total * uniform

        if total == 0:
            return self._kneser_ney(word, context[1:], highest=False)
        lower = self._kneser_ney(word, context[1:], highest=False)
        return max(table.get(word, 0) - d, 0) / total + d * len(table) / total * lower

    def conditional_distribution(self, context: Context) -> Dict[str, float]:
        return {w: self.prob(w, context) for w in self.predicted_vocab}

    def contexts(self) -> List[Context]:
        return sorted(self.counts[self.order])


@dataclass(frozen=True)
class PerplexityResult:
    perplexity: float
    mean_nll: float
    n_scored_tokens: int
    oov_rate: float


def _events(sequences: Iterable[Sequence[str]], order: int):
    """(문맥, 다음 토큰) 사건 목록."""
    for seq in sequences:
        if order == 1:
            for w in seq:
                yield (), w
            continue
        padded = [BOS] * (order - 1) + list(seq) + [EOS]
        for i in range(order - 1, len(padded)):
            yield tuple(padded[i - order + 1:i]), padded[i]


def _sentences(doc: Document, order: int) -> List[List[str]]:
    tokens = [t.lower() for t in doc.word_tokens]
    if order == 1:
        return [tokens]
    return [tokens[s:e] for s, e in doc.sentences]


def train_ngram(corpus: Corpus, order: int = config.LM_ORDER, smoothing: Smoothing = None,
                min_count: int = config.LM_MIN_COUNT) -> NgramModel:
    smoothing = smoothing or Smoothing.kneser_ney()
    smoothing.validate()
    if not 1 <= order <= 5:
        raise ValidationError(f"order는 1~5 범위여야 합니다: {order}")
    if len(corpus) == 0:
        raise EmptyCorpus("빈 코퍼스로 언어모델을 학습할 수 없습니다.")

    raw = Counter(t.lower() for doc in corpus for t in doc.word_tokens)
    if len(raw) < 2:
        raise InsufficientVocabulary(f"서로 다른 토큰이 {len(raw)}개뿐입니다.")
    kept = {w for w, c in raw.items() if c >= min_count}
    vocab = frozenset(kept | {UNK, BOS, EOS})

    def _map(seq):
        return [w if w in kept else UNK for w in seq]

    sequences = [_map(s) for doc in corpus for s in _sentences(doc, order)]
    counts = {n: defaultdict(Counter) for n in range(1, order + 1)}
    for ctx, w in _events(sequences, order):
        for n in range(1, order + 1):
            counts[n][ctx[len(ctx) - (n - 1):] if n > 1 else ()][w] += 1

    model = NgramModel(
        order=order,
        vocab=vocab,
        counts={n: {c: dict(v) for c, v in table.items()} for n, table in counts.items()},
        smoothing=smoothing,
        min_count=min_count,
    )
    logger.info(f"n-gram 모델 학습 완료: order={order}, |V|={len(model.predicted_vocab)}, "
                f"smoothing={smoothing.kind}({smoothing.value})")
    return model


def perplexity(model: NgramModel, doc: Document) -> PerplexityResult:
    if not doc.word_tokens:
        raise EmptyDocument(f"문서 {doc.id}에 단어 토큰이 없습니다.")
    oov = sum(1 for t in doc.word_tokens if model.map_token(t) == UNK)
    sequences = [[model.map_token(t) for t in s] for s in _sentences(doc, model.order)]

    nll, n = 0.0, 0
    for ctx, w in _events(sequences, model.order):
        p = model.prob(w, ctx)
        if p <= 0.0:
            raise LanguageModelError(f"문서 {doc.id}: 확률 0 사건 ({w!r} | {ctx}). 스무딩 k > 0을 쓰세요.")
        nll -= math.log(p)
        n += 1
    mean_nll = nll / n
    return PerplexityResult(math.exp(mean_nll), mean_nll, n, oov / len(doc.word_tokens))


def perplexity_frame(model: NgramModel, corpus: Corpus) -> pd.DataFrame:
    rows = []
    for doc in corpus:
        try:
            r = perplexity(model, doc)
        except EmptyDocument:
            logger.warning(f"문서 {doc.id}: 토큰이 없어 perplexity를 비웁니다.")
            rows.append({"id": doc.id, "perplexity": float("nan"), "mean_nll": float("nan"),
                         "n_scored_tokens": 0, "oov_rate": float("nan")})
            continue
        rows.append({"id": doc.id, "perplexity": r.perplexity, "mean_nll": r.mean_nll,
                     "n_scored_tokens": r.n_scored_tokens, "oov_rate": r.oov_rate})
    return pd.DataFrame(rows)


def export_scores(results: Dict[str, PerplexityResult], path) -> None:
    """외부 점수 형식(JSONL: id, mean_nll, n_tokens, oov_rate)으로 저장."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc_id, r in results.items():
            f.write(json.dumps({"id": doc_id, "mean_nll": r.mean_nll, "n_tokens": r.n_scored_tokens,
                                "oov_rate": r.oov_rate}, ensure_ascii=False) + "\n")


def import_external_scores(path, known_ids: Optional[Iterable[str]] = None) -> Dict[str, PerplexityResult]:
    """외부 스코어러의 JSONL {"id", "mean_nll", "n_tokens"}를 읽어 PerplexityResult로 바꿉니다."""
    known = set(known_ids) if known_ids is not None else None
    results = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                doc_id = data["id"]
                mean_nll = float(data["mean_nll"])
                n_tokens = int(data["n_tokens"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise MalformedScoreFile(line_no, str(e))
            if not isinstance(doc_id, str) or n_tokens < 1 or not math.isfinite(mean_nll):
                raise MalformedScoreFile(line_no, "id는 문자열, n_tokens >= 1, mean_nll은 유한해야 합니다")
            if known is not None and doc_id not in known:
                raise UnknownDocId(doc_id)
            oov = float(data.get("oov_rate", float("nan")))
            results[doc_id] = PerplexityResult(math.exp(mean_nll), mean_nll, n_tokens, oov)
    logger.info(f"외부 perplexity 점수 {len(results)}건 로드 ({path})")
    return results


def save_model(model: NgramModel, path) -> None:
    payload = {
        "format_version": config.LM_FORMAT_VERSION,
        "order": model.order,
        "smoothing": {"kind": model.smoothing.kind, "value": model.smoothing.value},
        "min_count": model.min_count,
        "vocab": sorted(model.vocab),
        "counts": {
            str(n): [[list(ctx), w, c] for ctx in sorted(table) for w, c in sorted(table[ctx].items())]
            for n, table in sorted(model.counts.items())
        },
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")


def load_model(path) -> NgramModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format_version") != config.LM_FORMAT_VERSION:
        raise ValidationError(f"지원하지 않는 모델 형식 버전: {payload.get('format_version')}")
    counts = {}
    for n, rows in payload["counts"].items():
        table = defaultdict(dict)
        for ctx, w, c in rows:
            table[tuple(ctx)][w] = int(c)
        counts[int(n)] = dict(table)
    return NgramModel(
        order=int(payload["order"]),
        vocab=frozenset(payload["vocab"]),
        counts=counts,
        smoothing=Smoothing(payload["smoothing"]["kind"], float(payload["smoothing"]["value"])),
        min_count=int(payload["min_count"]),
    )
