import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

import config
from errors import DuplicateId, EmptyCorpus, IoFailure, MalformedRecord
from utils import file_cache, get_logger

logger = get_logger(__name__)

HUMAN = "human"
GENRES = ("poem", "tweet", "other")
JSONL_FIELDS = ("id", "author", "source", "genre", "text")

_APOSTROPHES = "'’"


@dataclass(frozen=True)
class Document:
    id: str
    author: str
    source: str  # "human" 또는 모델 이름
    genre: str
    raw_text: str
    normalized_text: str
    word_tokens: Tuple[str, ...]
    sentences: Tuple[Tuple[int, int], ...]  # 토큰 인덱스 [start, end)

    @property
    def is_human(self) -> bool:
        return self.source == HUMAN

    def sentence_initial_indices(self) -> set:
        return {start for start, _ in self.sentences}


@dataclass(frozen=True)
class Corpus:
    documents: Tuple[Document, ...]
    label: str = ""
    _index: Dict[str, int] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, doc in enumerate(self.documents):
            if doc.id in index:
                raise DuplicateId(doc.id)
            index[doc.id] = i
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def __contains__(self, doc_id):
        return doc_id in self._index

    def get(self, doc_id: str) -> Document:
        return self.documents[self._index[doc_id]]

    @property
    def ids(self) -> List[str]:
        return [d.id for d in self.documents]

    def authors(self) -> List[str]:
        return sorted({d.author for d in self.documents})

    def sources(self) -> List[str]:
        return sorted({d.source for d in self.documents})

    def filter(self, author: str = None, source: str = None, genre: str = None, label: str = None) -> "Corpus":
        docs = [
            d for d in self.documents
            if (author is None or d.author == author)
            and (source is None or d.source == source)
            and (genre is None or d.genre == genre)
        ]
        return Corpus(tuple(docs), label=label or self.label)

    @staticmethod
    def merge(corpora: Iterable["Corpus"], label: str = "") -> "Corpus":
        docs = []
        for c in corpora:
            docs.extend(c.documents)
        return Corpus(tuple(docs), label=label)


@dataclass(frozen=True)
class DescriptiveStats:
    n_texts: int
    total_tokens: int
    mean_word_length: float
    mean_tokens_per_text: float
    type_token_ratio: float


# --- 데이터 파일 ---

def _read_tsv_pairs(path) -> List[Tuple[str, str]]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("\t")
            pairs.append((key, value))
    return pairs


@file_cache
def load_contractions(path) -> Dict[str, str]:
    return {k.lower(): v for k, v in _read_tsv_pairs(path)}


ALWAYS, BEFORE_NUMBER, BEFORE_NAME = "", "number", "name"


@file_cache
def load_abbreviations(path) -> Dict[str, str]:
    """약어 -> 가드 조건 (ALWAYS / BEFORE_NUMBER / BEFORE_NAME)."""
    guards = {}
    for key, rest in _read_tsv_pairs(path):
        _, _, condition = rest.partition("\t")
        condition = condition.strip()
        if condition not in (ALWAYS, BEFORE_NUMBER, BEFORE_NAME):
            raise ValueError(f"약어 조건을 알 수 없습니다: {key} -> {condition}")
        guards[key.lower()] = condition
    return guards


@file_cache
def load_meta_patterns(path) -> Dict[str, List[re.Pattern]]:
    patterns = {"preface": [], "signoff": []}
    for kind, regex in _read_tsv_pairs(path):
        patterns.setdefault(kind, []).append(re.compile(regex, re.IGNORECASE))
    return patterns


@file_cache
def _contraction_regex(path) -> re.Pattern:
    table = load_contractions(path)
    alternatives = []
    # 긴 키 우선 ("can't've" 가 "can't" 보다 먼저)
    for key in sorted(table, key=lambda k: (-len(k), k)):
        alternatives.append(re.escape(key).replace("'", f"[{_APOSTROPHES}]"))
    return re.compile(
        rf"(?<![\w{_APOSTROPHES}])(?:{'|'.join(alternatives)})(?![\w{_APOSTROPHES}])",
        re.IGNORECASE,
    )


# --- 정규화 ---

def normalize_text(raw: str, contractions_path=None) -> str:
    """유니코드 NFC 합성, 축약형 확장, 공백 정리. 그 외 어휘 변경은 하지 않습니다."""
    if not raw:
        return ""
    path = contractions_path or config.CONTRACTIONS_PATH
    table = load_contractions(path)
    text = unicodedata.normalize("NFC", raw)

    def _expand(match):
        found = match.group(0)
        key = found.replace("’", "'").lower()
        expansion = table[key]
        if len(found) > 1 and found.isupper():
            return expansion.upper()
        if found[0].isupper():
            return expansion[0].upper() + expansion[1:]
        return expansion

    text = _contraction_regex(path).sub(_expand, text)
    return re.sub(r"\s+", " ", text).strip()


# --- 토큰화 ---

_URL = r"(?:https?://|www\.)\S+"
_TAG = r"[@#](?P<tag>\w+)"
_WORD = rf"[^\W_]+(?:[{_APOSTROPHES}\-][^\W_]+)*"
TOKEN_RE = re.compile(rf"(?P<url>{_URL})|{_TAG}|(?P<word>{_WORD})")
_URL_TRAILING = ".,!?;:)]}\"'’"


def _token_spans(text: str) -> List[Tuple[str, int]]:
    """(토큰, 시작 오프셋) 목록."""
    spans = []
    for m in TOKEN_RE.finditer(text):
        if m.group("url"):
            token = m.group("url").rstrip(_URL_TRAILING)
            if token:
                spans.append((token, m.start()))
        elif m.group("tag"):
            spans.append((m.group("tag"), m.start("tag")))
        else:
            spans.append((m.group("word"), m.start()))
    return spans


def tokenize_words(text: str) -> List[str]:
    """글자/숫자 연속(내부 아포스트로피·하이픈 허용)을 단어 토큰으로. URL은 통째로, @/#은 떼고 본문만."""
    return [token for token, _ in _token_spans(text)]


_TERMINAL_RE = re.compile(r"[.!?]+[\"')\]’”]*(?=\s|$)")


def _is_guarded(chunk: str, condition: str, following: str) -> bool:
    if condition == BEFORE_NUMBER:
        return following[:1].isdigit()
    if condition == BEFORE_NAME:
        return chunk[:1].isupper() and following[:1].isupper()
    return True


def _sentence_char_ends(text: str, abbreviations: Dict[str, str]) -> List[int]:
    ends = []
    for m in _TERMINAL_RE.finditer(text):
        punct = m.group(0).rstrip("\"')]’”")
        if punct == ".":
            chunk_start = text.rfind(" ", 0, m.start()) + 1
            chunk = text[chunk_start:m.start() + 1]
            condition = abbreviations.get(chunk.lower())
            following = text[m.end():].lstrip()
            if condition is not None and _is_guarded(chunk, condition, following):
                continue
        ends.append(m.end())
    return ends


def segment_sentences(text: str, abbreviations_path=None) -> List[Tuple[int, int]]:
    """종결부호 [.!?] + 공백/끝에서 문장 분리. 결과는 토큰 인덱스 구간 [start, end).

    종결부호가 없는 비어있지 않은 텍스트는 한 문장(트윗 폴백). 토큰이 없는 구간은 버립니다.
    """
    spans = _token_spans(text)
    if not spans:
        return []
    abbreviations = load_abbreviations(abbreviations_path or config.ABBREVIATIONS_PATH)
    char_ends = _sentence_char_ends(text, abbreviations)

    sentences = []
    start = 0
    boundary = 0
    for i, (_, offset) in enumerate(spans):
        while boundary < len(char_ends) and offset >= char_ends[boundary]:
            if i > start:
                sentences.append((start, i))
                start = i
            boundary += 1
    sentences.append((start, len(spans)))
    return sentences


# --- 메타 응답 제거 ---

def strip_meta_response(text: str, patterns_path=None) -> str:
    """어시스턴트 머리말("Sure, here is ...")과 맺음말을 제거합니다. 매칭이 없으면 입력을 그대로 반환."""
    patterns = load_meta_patterns(patterns_path or config.META_PATTERNS_PATH)
    current = text
    changed = True
    matched_any = False
    while changed:
        changed = False
        lead = len(current) - len(current.lstrip())
        for pattern in patterns.get("preface", []):
            m = pattern.match(current, lead)
            if m and m.end() > lead:
                current = current[m.end():]
                changed = matched_any = True
                break
        if changed:
            continue
        for pattern in patterns.get("signoff", []):
            m = pattern.search(current)
            if m and m.start() > 0:
                current = current[:m.start()]
                changed = matched_any = True
                break
    if not matched_any:
        return text
    return current.strip()


# --- 문서/코퍼스 구성 ---

def make_document(doc_id: str, author: str, source: str, genre: str, raw_text: str) -> Document:
    normalized = normalize_text(raw_text)
    tokens = tuple(tokenize_words(normalized))
    sentences = tuple(segment_sentences(normalized))
    return Document(
        id=str(doc_id),
        author=author,
        source=source,
        genre=genre,
        raw_text=raw_text,
        normalized_text=normalized,
        word_tokens=tokens,
        sentences=sentences,
    )


def descriptive_stats(corpus: Corpus) -> DescriptiveStats:
    """Table 1/2 형태의 기술통계 (TTR은 소문자 기준 고유 토큰 수 / 전체 토큰 수)."""
    if len(corpus) == 0:
        raise EmptyCorpus("빈 코퍼스의 기술통계는 계산할 수 없습니다.")
    tokens = [t for doc in corpus for t in doc.word_tokens]
    total = len(tokens)
    if total == 0:
        raise EmptyCorpus(f"코퍼스 '{corpus.label}'에 단어 토큰이 없습니다.")
    lengths = np.fromiter((len(t) for t in tokens), dtype=np.int64, count=total)
    return DescriptiveStats(
        n_texts=len(corpus),
        total_tokens=total,
        mean_word_length=float(lengths.sum()) / total,
        mean_tokens_per_text=total / len(corpus),
        type_token_ratio=len({t.lower() for t in tokens}) / total,
    )


def descriptive_summary(corpus: Corpus) -> pd.DataFrame:
    """(저자, 출처, 장르) 그룹별 Table 1/2 형태 요약표."""
    rows = []
    groups = sorted({(d.author, d.source, d.genre) for d in corpus})
    for author, source, genre in groups:
        sub = corpus.filter(author=author, source=source, genre=genre)
        try:
            s = descriptive_stats(sub)
        except EmptyCorpus:
            logger.warning(f"{author}/{source}: 토큰이 없어 요약에서 제외합니다.")
            continue
        rows.append({
            "Author": author,
            "Text Type": genre,
            "Source": source,
            "Quantity": s.n_texts,
            "Total Tokens": s.total_tokens,
            "Mean Word Length": s.mean_word_length,
            "Mean Tokens / Text": s.mean_tokens_per_text,
            "Type-Token Ratio": s.type_token_ratio,
        })
    df = pd.DataFrame(rows, columns=[
        "Author", "Text Type", "Source", "Quantity", "Total Tokens",
        "Mean Word Length", "Mean Tokens / Text", "Type-Token Ratio",
    ])
    synthetic = df[df["Source"] != HUMAN]
    if not synthetic.empty:
        per_author = synthetic.groupby("Author")
        df["LLMs Used"] = df["Author"].map(per_author["Source"].count()).where(df["Source"] != HUMAN)
        df["Total Quantity"] = df["Author"].map(per_author["Quantity"].sum()).where(df["Source"] != HUMAN)
    return df


def sample_per_author(corpus: Corpus, n: int, seed: int = config.SEED) -> Corpus:
    """저자·출처별로 최대 n개를 시드 고정 무작위 추출 (원래 순서 유지)."""
    rng = np.random.default_rng(seed)
    keep = set()
    for author in corpus.authors():
        for source in corpus.sources():
            ids = corpus.filter(author=author, source=source).ids
            if len(ids) > n:
                ids = list(rng.choice(ids, size=n, replace=False))
            keep.update(ids)
    return Corpus(tuple(d for d in corpus if d.id in keep), label=corpus.label)


# --- 입출력 ---

def _parse_record(line_no: int, line: str) -> Document:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecord(line_no, f"JSON 파싱 오류: {e.msg}")
    if not isinstance(record, dict):
        raise MalformedRecord(line_no, "객체가 아님")
    missing = [f for f in JSONL_FIELDS if f not in record]
    if missing:
        raise MalformedRecord(line_no, f"필드 누락: {', '.join(missing)}")
    if not all(isinstance(record[f], str) for f in JSONL_FIELDS):
        raise MalformedRecord(line_no, "모든 필드는 문자열이어야 함")
    if record["genre"] not in GENRES:
        raise MalformedRecord(line_no, f"알 수 없는 장르 '{record['genre']}'")
    if not record["source"]:
        raise MalformedRecord(line_no, "source가 비어 있음")
    return make_document(record["id"], record["author"], record["source"], record["genre"], record["text"])


def _load_jsonl(path: Path) -> List[Document]:
    docs = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            doc = _parse_record(line_no, line)
            if doc.id in seen:
                raise DuplicateId(doc.id)
            seen.add(doc.id)
            docs.append(doc)
    return docs


def _read_manifest(root: Path) -> Dict[str, str]:
    manifest = root / "manifest.tsv"
    if not manifest.exists():
        logger.warning(f"{manifest}가 없어 모든 문서의 장르를 'other'로 둡니다.")
        return {}
    return dict(_read_tsv_pairs(manifest))


def _load_text_directory(root: Path) -> List[Document]:
    """`<author>/<source>/<id>.txt` 구조. 장르는 manifest.tsv (id 또는 author/source → genre)."""
    manifest = _read_manifest(root)
    docs = []
    seen = set()
    for path in sorted(root.glob("*/*/*.txt")):
        author, source, doc_id = path.parent.parent.name, path.parent.name, path.stem
        genre = manifest.get(doc_id) or manifest.get(f"{author}/{source}") or "other"
        if genre not in GENRES:
            raise MalformedRecord(0, f"manifest의 알 수 없는 장르 '{genre}' ({doc_id})")
        if doc_id in seen:
            raise DuplicateId(doc_id)
        seen.add(doc_id)
        docs.append(make_document(doc_id, author, source, genre, path.read_text(encoding="utf-8")))
    return docs


def load_corpus(path, format: str = "jsonl", label: Optional[str] = None) -> Corpus:
    """코퍼스를 읽고 정규화·토큰화합니다. 순서는 파일/레코드 순서를 따릅니다."""
    path = Path(path)
    logger.info(f"코퍼스 로드 시작: {path} ({format})")
    try:
        if format == "jsonl":
            docs = _load_jsonl(path)
        elif format == "text_directory":
            if not path.is_dir():
                raise IoFailure(f"디렉터리가 아닙니다: {path}")
            docs = _load_text_directory(path)
        else:
            raise MalformedRecord(0, f"지원하지 않는 형식: {format}")
    except OSError as e:
        raise IoFailure(f"코퍼스를 읽을 수 없습니다: {path} ({e})") from e
    logger.info(f"코퍼스 로드 완료: {len(docs)}개 문서")
    return Corpus(tuple(docs), label=label or path.stem)


def document_record(doc: Document) -> Dict[str, str]:
    return {"id": doc.id, "author": doc.author, "source": doc.source, "genre": doc.genre, "text": doc.normalized_text}


def save_corpus_jsonl(corpus: Corpus, path) -> None:
    """정규화된 텍스트로 JSONL 저장 (필드 순서 고정, UTF-8, LF)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for doc in corpus:
                f.write(json.dumps(document_record(doc), ensure_ascii=False) + "\n")
    except OSError as e:
        raise IoFailure(f"코퍼스를 저장할 수 없습니다: {path} ({e})") from e
    logger.info(f"{len(corpus)}개 문서를 {path}에 저장했습니다.")
