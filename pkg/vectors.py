"""특징 공간 구성: TF-IDF 문서 벡터(어휘 기준선)와 8차원 문체 벡터, 학습 폴드 기준 정규화."""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse
from sklearn.feature_extraction.text import CountVectorizer
from sklearn.preprocessing import normalize

import config
from corpus import Corpus, Document
from errors import EmptyCorpus, EmptyTrainingSet, MissingFeature, ValidationError
from lexfeatures import readability_frame
from psycholex import liwc_frame
from utils import get_logger

logger = get_logger(__name__)

TokenDoc = Union[Document, Sequence[str]]
META_COLUMNS = ("id", "author", "source", "genre")

_CONSTANT_STD = 1e-12


def _tokens(doc: TokenDoc) -> List[str]:
    tokens = doc.word_tokens if isinstance(doc, Document) else doc
    return [t.lower() for t in tokens]


def _analyzer(tokens):
    # 입력은 이미 _tokens()로 소문자화된 토큰 리스트
    return tokens


@dataclass(frozen=True)
class TfidfVocabulary:
    terms: Dict[str, int]
    df: np.ndarray
    n_docs_fitted: int

    def __len__(self):
        return len(self.terms)

    @property
    def idf(self) -> np.ndarray:
        # smoothed idf: ln((1 + n) / (1 + df)) + 1
        return np.log((1.0 + self.n_docs_fitted) / (1.0 + self.df)) + 1.0

    def doc_frequency(self, term: str) -> int:
        return int(self.df[self.terms[term]])


def fit_tfidf(train_docs: Sequence[TokenDoc]) -> TfidfVocabulary:
    docs = [_tokens(d) for d in train_docs]
    if not docs:
        raise EmptyCorpus("TF-IDF 어휘를 만들 학습 문서가 없습니다.")
    if not any(docs):
        raise EmptyCorpus("학습 문서에 토큰이 하나도 없습니다.")
    vectorizer = CountVectorizer(analyzer=_analyzer, binary=True)
    presence = vectorizer.fit_transform(docs)
    terms = {t: int(i) for t, i in vectorizer.vocabulary_.items()}
    df = np.asarray(presence.sum(axis=0)).ravel().astype(float)
    logger.info(f"TF-IDF 어휘 학습: 문서 {len(docs)}개, 단어 {len(terms)}개")
    return TfidfVocabulary(terms, df, len(docs))


def transform_tfidf_matrix(docs: Sequence[TokenDoc], vocab: TfidfVocabulary) -> sparse.csr_matrix:
    vectorizer = CountVectorizer(analyzer=_analyzer, vocabulary=vocab.terms)
    counts = vectorizer.transform([_tokens(d) for d in docs]).astype(float)
    weighted = sparse.csr_matrix(counts.multiply(vocab.idf.reshape(1, -1)))
    # 0 행은 그대로 둠
    return normalize(weighted, norm="l2", copy=False)


def transform_tfidf(doc: TokenDoc, vocab: TfidfVocabulary) -> sparse.csr_matrix:
    """문서 하나를 1×|V| 희소 벡터로. 어휘 밖 단어는 무시합니다."""
    return transform_tfidf_matrix([doc], vocab)


def to_sparse_text(vector) -> str:
    """희소 벡터를 'index:value' 공백 구분 문자열로."""
    row = sparse.csr_matrix(vector)
    return " ".join(f"{int(i)}:{float(v)!r}" for i, v in zip(row.indices, row.data))


def from_sparse_text(text: str, dim: int) -> sparse.csr_matrix:
    indices, values = [], []
    for pair in text.split():
        try:
            i, v = pair.split(":", 1)
            indices.append(int(i))
            values.append(float(v))
        except ValueError:
            raise ValidationError(f"잘못된 희소 벡터 항목: {pair!r}")
    if any(i < 0 or i >= dim for i in indices):
        raise ValidationError(f"인덱스가 차원({dim}) 범위를 벗어났습니다.")
    return sparse.csr_matrix((values, ([0] * len(indices), indices)), shape=(1, dim))


@dataclass(frozen=True)
class StyloVector:
    values: Tuple[float, ...]
    names: Tuple[str, ...] = config.STYLO_FEATURES

    def __post_init__(self):
        if len(self.values) != len(self.names):
            raise ValidationError(f"문체 벡터는 {len(self.names)}차원이어야 합니다: {len(self.values)}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def as_dict(self) -> Dict[str, float]:
        return dict(zip(self.names, self.values))


def assemble_stylo(features: Mapping[str, float]) -> StyloVector:
    values = []
    for name in config.STYLO_FEATURES:
        value = features.get(name)
        if value is None or not np.isfinite(value):
            raise MissingFeature(name)
        values.append(float(value))
    return StyloVector(tuple(values))


def stylo_frame(corpus: Corpus, perplexities: Mapping[str, float], lexicon, weights=None) -> pd.DataFrame:
    """코퍼스 문서별 8차원 문체 특징표 (id, author, source, genre + 특징).

    perplexities는 문서 id → perplexity. 값이 없는 문서는 MissingFeature를 냅니다.
    토큰이 없어 특징을 계산할 수 없는 문서는 경고 후 제외합니다.
    """
    missing = [doc.id for doc in corpus if doc.id not in perplexities]
    if missing:
        logger.error(f"perplexity 값이 없는 문서 {len(missing)}개 (예: {missing[0]})")
        raise MissingFeature("perplexity")
    read = readability_frame(corpus).set_index("id")
    liwc = liwc_frame(corpus, lexicon, weights).set_index("id")
    rows = []
    for doc in corpus:
        features = {"perplexity": perplexities[doc.id]}
        features.update(read.loc[doc.id, ["flesch_reading_ease", "flesch_kincaid_grade", "gunning_fog"]].to_dict())
        features.update(liwc.loc[doc.id, ["analytic", "clout", "authentic", "tone"]].to_dict())
        try:
            vector = assemble_stylo(features)
        except MissingFeature as e:
            logger.warning(f"문서 {doc.id}: {e.name} 값이 없어 특징표에서 제외합니다.")
            continue
        rows.append({"id": doc.id, "author": doc.author, "source": doc.source, "genre": doc.genre,
                     **vector.as_dict()})
    logger.info(f"문체 특징표 생성: {len(rows)}/{len(corpus)}개 문서")
    return pd.DataFrame(rows, columns=list(META_COLUMNS) + list(config.STYLO_FEATURES))


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray = field(default=None)  # bool 마스크

    @property
    def constant_dimensions(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.constant)]


def fit_scaler(train_vectors) -> Scaler:
    """학습 벡터만으로 차원별 평균/모표준편차를 추정합니다."""
    x = np.atleast_2d(np.asarray(train_vectors, dtype=float))
    if x.size == 0 or x.shape[0] == 0:
        raise EmptyTrainingSet("스케일러를 학습할 벡터가 없습니다.")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=0)
    constant = std < _CONSTANT_STD
    if constant.any():
        logger.warning(f"상수 차원 {np.flatnonzero(constant).tolist()}은 정규화 없이 그대로 통과합니다.")
    return Scaler(mean, std, constant)


def apply_scaler(vectors, scaler: Scaler) -> np.ndarray:
    x = np.asarray(vectors, dtype=float)
    safe_std = np.where(scaler.constant, 1.0, scaler.std)
    scaled = (x - scaler.mean) / safe_std
    return np.where(scaler.constant, x, scaled)


def write_feature_csv(frame: pd.DataFrame, path, seed: int = config.SEED, config_hash: str = "") -> None:
    """첫 줄에 '# stylo-features v1 seed=... config_hash=...' 헤더를 붙여 저장."""
    columns = list(META_COLUMNS) + list(config.STYLO_FEATURES)
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise MissingFeature(missing[0])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# {config.STYLO_VERSION} seed={seed} config_hash={config_hash}\n")
        frame[columns].to_csv(f, index=False, lineterminator="\n", float_format="%.17g")


def read_feature_csv(path) -> Tuple[pd.DataFrame, Dict[str, str]]:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        prefix = f"# {config.STYLO_VERSION}"
        if not header.startswith(prefix):
            raise ValidationError(f"특징 파일 버전 헤더가 다릅니다: {header!r}")
        meta = dict(part.split("=", 1) for part in header[len(prefix):].split() if "=" in part)
        frame = pd.read_csv(f, dtype={c: str for c in META_COLUMNS}, keep_default_na=False,
                            float_precision="round_trip")
    expected = list(META_COLUMNS) + list(config.STYLO_FEATURES)
    if list(frame.columns) != expected:
        raise ValidationError(f"특징 열 순서가 다릅니다: {list(frame.columns)}")
    return frame, meta
