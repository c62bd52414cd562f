import json
import math
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import requests
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt, wait_exponential

import config
from corpus import Corpus, make_document, normalize_text, strip_meta_response
from errors import (
    AuthFailure,
    IoFailure,
    MalformedRecord,
    MalformedResponse,
    MissingPlaceholder,
    PartialJob,
    RateLimited,
    ValidationError,
)
from utils import get_logger, mask_secret

logger = get_logger(__name__)

TRANSIENT_STATUS = {429, 500, 502, 503, 504}
FAILED_STATUS = "failed"


class _TransientError(Exception):
    """재시도 대상 (429/5xx, 연결 오류). 재시도가 끝나면 도메인 에러로 바뀝니다."""

    def __init__(self, status: Optional[int], detail: str = ""):
        self.status = status
        self.detail = detail
        super().__init__(f"status={status} {detail}")


@dataclass(frozen=True)
class PromptTemplate:
    genre: str
    template: str


POEM_TEMPLATE = PromptTemplate("poem", "Write a poem exclusively in the style of {author} on the topic of {theme}")
TWEET_TEMPLATE = PromptTemplate("tweet", "Write a tweet exclusively in the style of {author} about {theme}")
TEMPLATES = {"poem": POEM_TEMPLATE, "tweet": TWEET_TEMPLATE}


@dataclass
class GenerationJob:
    author: str
    genre: str
    themes: Sequence[str]
    count_per_theme: int
    endpoint_url: str
    model_name: str
    temperature: float = config.GEN_TEMPERATURE
    seed_tag: str = ""
    max_retries: int = config.GEN_MAX_RETRIES
    requests_per_minute: float = config.GEN_REQUESTS_PER_MINUTE
    max_in_flight: int = config.GEN_MAX_IN_FLIGHT
    api_key_env: str = config.API_KEY_ENV
    timeout: float = config.GEN_TIMEOUT_SECONDS

    def validate(self):
        if not 0 <= self.temperature <= 2:
            raise ValidationError(f"temperature는 [0, 2] 범위여야 합니다: {self.temperature}")
        if self.count_per_theme < 1:
            raise ValidationError("count_per_theme는 1 이상이어야 합니다.")
        if self.genre not in TEMPLATES:
            raise ValidationError(f"생성 장르는 poem/tweet만 지원합니다: {self.genre}")
        if not self.themes:
            raise ValidationError("주제 목록이 비어 있습니다.")
        if self.requests_per_minute <= 0 or self.max_in_flight < 1:
            raise ValidationError("requests_per_minute > 0, max_in_flight >= 1 이어야 합니다.")


@dataclass
class GenerationRecord:
    prompt: str
    raw_response: str
    cleaned_text: str
    model_name: str
    timestamp: str
    usage_tokens: int
    author: str = ""
    genre: str = ""
    theme: str = ""
    seed_tag: str = ""
    index: int = 0


@dataclass
class GenerationFailure:
    index: int
    theme: str
    prompt: str
    model_name: str
    timestamp: str
    error: str
    message: str
    status: str = FAILED_STATUS


def render_prompt(template: PromptTemplate, author: str, theme: str) -> str:
    """템플릿에 저자와 주제를 치환합니다. 다른 변형은 하지 않습니다."""
    for name, value in (("author", author), ("theme", theme)):
        if not value or not value.strip():
            raise MissingPlaceholder(name)
        if template.template.count("{" + name + "}") != 1:
            raise MissingPlaceholder(name)
    return template.template.replace("{author}", author).replace("{theme}", theme)


def clean_response(raw_response: str) -> str:
    return normalize_text(strip_meta_response(raw_response))


def load_themes(path) -> List[str]:
    """한 줄에 주제 하나, '#' 주석과 빈 줄은 무시."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            themes = [line.strip() for line in f]
    except OSError as e:
        raise IoFailure(f"주제 파일을 읽을 수 없습니다: {path} ({e})") from e
    return [t for t in themes if t and not t.startswith("#")]


class RateLimiter:
    """슬라이딩 윈도우 안의 요청 수를 제한해 평균 속도를 requests_per_minute 이하로 유지합니다.

    분당 1회 미만이나 소수 속도는 윈도우를 늘려 맞춥니다 (0.5/분이면 120초에 1회).
    """

    def __init__(self, requests_per_minute: float, window: float = 60.0, clock=time.monotonic, sleep=time.sleep):
        if requests_per_minute <= 0:
            raise ValidationError(f"requests_per_minute는 0보다 커야 합니다: {requests_per_minute}")
        self.capacity = max(1, math.floor(requests_per_minute))
        self.window = window * self.capacity / requests_per_minute
        self._clock = clock
        self._sleep = sleep
        self._stamps = deque()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self._clock()
                while self._stamps and now - self._stamps[0] >= self.window:
                    self._stamps.popleft()
                if len(self._stamps) < self.capacity:
                    self._stamps.append(now)
                    return
                wait = self.window - (now - self._stamps[0])
            self._sleep(max(wait, 0.0))


class ChatClient:
    """chat-completions 호환 엔드포인트 클라이언트 (단일 user 턴, 시스템 프롬프트 없음)."""

    def __init__(self, endpoint_url: str, model_name: str, api_key: Optional[str], temperature: float,
                 max_retries: int, limiter: RateLimiter, timeout: float = config.GEN_TIMEOUT_SECONDS,
                 backoff_base: float = config.GEN_BACKOFF_BASE_SECONDS, sleep=time.sleep):
        self.endpoint_url = endpoint_url
        self.model_name = model_name
        self.api_key = api_key
        self.temperature = temperature
        self.max_retries = max_retries
        self.limiter = limiter
        self.timeout = timeout
        self.backoff_base = backoff_base
        self._sleep = sleep
        self.session = requests.Session()

    def _headers(self):
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def complete(self, prompt: str) -> Tuple[str, int]:
        """(응답 텍스트, 사용 토큰 수). 일시적 오류는 지수 백오프로 재시도합니다."""
        body = {
            "model": self.model_name,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        retrying = Retrying(
            retry=retry_if_exception_type(_TransientError),
            stop=stop_after_attempt(self.max_retries + 1),
            wait=wait_exponential(multiplier=self.backoff_base, min=0),
            sleep=self._sleep,
            before_sleep=self._log_retry,
            reraise=True,
        )
        try:
            return retrying(self._post_once, body)
        except _TransientError as e:
            if e.status == 429:
                raise RateLimited(f"재시도 {self.max_retries}회 후에도 HTTP 429")
            raise MalformedResponse(f"재시도 {self.max_retries}회 후 실패 (status={e.status}) {e.detail}")

    def _post_once(self, body) -> Tuple[str, int]:
        self.limiter.acquire()
        try:
            response = self.session.post(self.endpoint_url, json=body, headers=self._headers(), timeout=self.timeout)
        except requests.exceptions.RequestException as e:
            raise _TransientError(None, mask_secret(str(e), self.api_key)) from e
        status = response.status_code
        if status in (401, 403):
            raise AuthFailure(f"인증 실패 (HTTP {status})")
        if status in TRANSIENT_STATUS:
            raise _TransientError(status)
        if status >= 400:
            raise MalformedResponse(f"HTTP {status}: {response.text[:200]}")
        return self._parse(response)

    def _log_retry(self, retry_state):
        error = retry_state.outcome.exception()
        logger.warning(
            f"일시적 오류 (status={getattr(error, 'status', None)}) - "
            f"{retry_state.next_action.sleep:.1f}초 후 재시도 {retry_state.attempt_number}/{self.max_retries}"
        )

    @staticmethod
    def _parse(response) -> Tuple[str, int]:
        try:
            payload = response.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise MalformedResponse(f"응답을 처리할 수 없습니다: {e}; 응답 내용: {response.text[:200]}")
        if not isinstance(content, str):
            raise MalformedResponse("message.content가 문자열이 아닙니다.")
        usage = payload.get("usage") or {}
        return content, int(usage.get("total_tokens", 0) or 0)


class RecordLog:
    """추가 전용 JSONL 기록. 쓰기는 락으로 직렬화합니다.

    성공은 GenerationRecord 한 줄, 실패는 status="failed" 인 GenerationFailure 한 줄.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.records: List[GenerationRecord] = []
        self.failures: List[GenerationFailure] = []
        self._lock = threading.Lock()
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def _write(self, payload: dict):
        if self.path:
            with open(self.path, "a", encoding="utf-8", newline="\n") as f:
                f.write(json.dumps(payload, ensure_ascii=False) + "\n")

    def append(self, record: GenerationRecord):
        with self._lock:
            self.records.append(record)
            self._write(asdict(record))

    def append_failure(self, failure: "GenerationFailure"):
        with self._lock:
            self.failures.append(failure)
            self._write(asdict(failure))


def _record_document(record: GenerationRecord):
    doc_id = f"{record.model_name}-{record.author}-{record.seed_tag}-{record.index:05d}".replace(" ", "_")
    return make_document(doc_id, record.author, record.model_name, record.genre, record.cleaned_text)


def records_to_corpus(records: Sequence[GenerationRecord], label: str = "") -> Corpus:
    ordered = sorted(records, key=lambda r: r.index)
    return Corpus(tuple(_record_document(r) for r in ordered), label=label)


def replay_records(path, label: str = "") -> Corpus:
    """기록 로그에서 오프라인으로 코퍼스를 다시 만듭니다. cleaned_text는 raw_response에서 재계산합니다.

    실패 기록 줄은 건너뜁니다.
    """
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                if isinstance(data, dict) and data.get("status") == FAILED_STATUS:
                    continue
                record = GenerationRecord(**data)
            except (json.JSONDecodeError, TypeError) as e:
                raise MalformedRecord(line_no, str(e))
            record.cleaned_text = clean_response(record.raw_response)
            records.append(record)
    return records_to_corpus(records, label=label or Path(path).stem)


def run_job(job: GenerationJob, log_path=None, client: ChatClient = None) -> Tuple[Corpus, List[GenerationRecord]]:
    """|themes| × count_per_theme 개 요청을 보내고 후처리된 합성 코퍼스를 만듭니다.

    실패가 있으면 완료된 결과를 담아 PartialJob을 던집니다 (기록 로그는 이미 저장됨).
    """
    job.validate()
    template = TEMPLATES[job.genre]
    if client is None:
        api_key = config.get_api_key(job.api_key_env)
        if not api_key:
            raise AuthFailure(f"환경변수 {job.api_key_env}에 API 키가 없습니다.")
        client = ChatClient(
            job.endpoint_url, job.model_name, api_key, job.temperature, job.max_retries,
            RateLimiter(job.requests_per_minute), timeout=job.timeout,
        )

    tasks = []
    for theme in job.themes:
        prompt = render_prompt(template, job.author, theme)
        for _ in range(job.count_per_theme):
            tasks.append((len(tasks), theme, prompt))
    logger.info(f"생성 작업 시작: {job.model_name} / {job.author} / {len(tasks)}건")

    log = RecordLog(log_path)

    def _run_one(task):
        index, theme, prompt = task
        raw, usage = client.complete(prompt)
        log.append(GenerationRecord(
            prompt=prompt,
            raw_response=raw,
            cleaned_text=clean_response(raw),
            model_name=job.model_name,
            timestamp=datetime.now(timezone.utc).isoformat(),
            usage_tokens=usage,
            author=job.author,
            genre=job.genre,
            theme=theme,
            seed_tag=job.seed_tag,
            index=index,
        ))

    def _record_failure(task, error: Exception):
        index, theme, prompt = task
        logger.error(f"생성 요청 실패 (index={index}, theme={theme}): {type(error).__name__}: {error}")
        log.append_failure(GenerationFailure(
            index=index,
            theme=theme,
            prompt=prompt,
            model_name=job.model_name,
            timestamp=datetime.now(timezone.utc).isoformat(),
            error=type(error).__name__,
            message=mask_secret(str(error), getattr(client, "api_key", None)),
        ))

    auth_error = None
    with ThreadPoolExecutor(max_workers=job.max_in_flight) as pool:
        futures = [(t, pool.submit(_run_one, t)) for t in tasks]
        for task, future in futures:
            if future.cancelled():
                _record_failure(task, auth_error)
                continue
            try:
                future.result()
            except AuthFailure as e:
                _record_failure(task, e)
                if auth_error is None:
                    auth_error = e
                    pool.shutdown(wait=False, cancel_futures=True)
            except Exception as e:
                _record_failure(task, e)

    failures = sorted(log.failures, key=lambda f: f.index)
    corpus = records_to_corpus(log.records, label=f"{job.model_name}-{job.author}")
    logger.info(f"생성 작업 종료: 요청 {len(tasks)}건, 성공 {len(log.records)}건, 실패 {len(failures)}건")
    if auth_error is not None:
        raise auth_error
    if failures:
        raise PartialJob(len(log.records), sorted(log.records, key=lambda r: r.index), failures)
    return corpus, sorted(log.records, key=lambda r: r.index)
