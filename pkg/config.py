import configparser
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping, Tuple

from dotenv import load_dotenv

from errors import ConfigError

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent
DATA_DIR = BASE_DIR / "data"

# API 키 환경변수 이름: 설정 파일/플래그로 바꿀 수 있음
API_KEY_ENV = os.environ.get("STYLO_API_KEY_ENV", "STYLO_API_KEY")


def get_api_key(env_name: str = None):
    """API 키: .env → 환경변수 순. 없으면 None."""
    return os.environ.get(env_name or API_KEY_ENV) or None


LOG_LEVEL = os.environ.get("STYLO_LOG_LEVEL", "INFO")

# 데이터 파일 경로
CONTRACTIONS_PATH = DATA_DIR / "contractions.tsv"
ABBREVIATIONS_PATH = DATA_DIR / "abbreviations.tsv"
META_PATTERNS_PATH = DATA_DIR / "meta_patterns.tsv"
DEMO_LEXICON_PATH = DATA_DIR / "demo_lexicon.dic"
DIMENSION_WEIGHTS_PATH = DATA_DIR / "dimension_weights.tsv"

# 가독성 공식 상수 (Flesch 1948, Kincaid 1975, Gunning 1952)
FRE_BASE = 206.835
FRE_SENTENCE_WEIGHT = 1.015
FRE_SYLLABLE_WEIGHT = 84.6
FKGL_SENTENCE_WEIGHT = 0.39
FKGL_SYLLABLE_WEIGHT = 11.8
FKGL_OFFSET = 15.59
FOG_WEIGHT = 0.4
FOG_COMPLEX_PERCENT = 100.0
COMPLEX_WORD_SYLLABLES = 3
COMPLEX_WORD_SUFFIXES = ("es", "ed", "ing")

# 생성(genharness) 기본값
GEN_TEMPERATURE = 1.0
GEN_MAX_RETRIES = 5
GEN_REQUESTS_PER_MINUTE = 60
GEN_MAX_IN_FLIGHT = 4
GEN_TIMEOUT_SECONDS = 60
GEN_BACKOFF_BASE_SECONDS = 1.0

# 언어모델
LM_ORDER = 3
LM_MIN_COUNT = 2
LM_SMOOTHING = "interpolated_kneser_ney"
LM_ADD_K = 1.0
LM_KN_DISCOUNT = 0.75
LM_FORMAT_VERSION = 1

# 통계
ALPHA = 0.05
EXACT_MAX_MIN_N = 8
EXACT_MAX_ASSIGNMENTS = 200_000

# 특징 벡터
STYLO_FEATURES = (
    "perplexity",
    "flesch_reading_ease",
    "flesch_kincaid_grade",
    "gunning_fog",
    "analytic",
    "clout",
    "authentic",
    "tone",
)
STYLO_VERSION = "stylo-features v1"
FEATURE_LABELS = {
    "perplexity": "Perplexity",
    "flesch_reading_ease": "Flesch Reading Ease",
    "flesch_kincaid_grade": "Flesch-Kincaid",
    "gunning_fog": "Gunning Fog",
    "analytic": "Analytic",
    "clout": "Clout",
    "authentic": "Authentic",
    "tone": "Tone",
}

# 부스팅 기본값
BOOST_N_ROUNDS = 100
BOOST_LAMBDA = 1.0
BOOST_GAMMA = 0.0
BOOST_MIN_CHILD_WEIGHT = 1.0
BOOST_FORMAT_VERSION = 1
PROBA_THRESHOLD = 0.5

# 교차검증
GRID_DEPTHS = (3, 6)
GRID_LEARNING_RATES = (0.01, 0.1)
K_OUTER = 5
K_INNER = 5
SEED = 42

# 보고서
REPORT_FORMATS = ("md", "csv")
OUT_DIR = "out"
ENV_PREFIX = "STYLO_"


def _split(value: str):
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _int_tuple(value):
    return tuple(int(v) for v in (_split(value) if isinstance(value, str) else value))


def _float_tuple(value):
    return tuple(float(v) for v in (_split(value) if isinstance(value, str) else value))


def _str_tuple(value):
    return tuple(_split(value) if isinstance(value, str) else (str(v) for v in value))


@dataclass
class RunConfig:
    """실행 설정. 우선순위: 기본값 < 설정 파일 < 환경변수(STYLO_*) < CLI 플래그."""
    human_corpus: str = ""
    synthetic_corpus: Tuple[str, ...] = ()
    lexicon: str = str(DEMO_LEXICON_PATH)
    weights: str = str(DIMENSION_WEIGHTS_PATH)
    lm_model: str = ""
    scores: str = ""
    lm_order: int = LM_ORDER
    lm_smoothing: str = LM_SMOOTHING
    lm_add_k: float = LM_ADD_K
    lm_discount: float = LM_KN_DISCOUNT
    lm_min_count: int = LM_MIN_COUNT
    k_outer: int = K_OUTER
    k_inner: int = K_INNER
    seed: int = SEED
    depths: Tuple[int, ...] = GRID_DEPTHS
    learning_rates: Tuple[float, ...] = GRID_LEARNING_RATES
    n_rounds: int = BOOST_N_ROUNDS
    out_dir: str = OUT_DIR
    formats: Tuple[str, ...] = REPORT_FORMATS
    log_level: str = LOG_LEVEL
    gen_endpoint: str = ""
    gen_model: str = ""
    gen_temperature: float = GEN_TEMPERATURE
    gen_max_retries: int = GEN_MAX_RETRIES
    gen_requests_per_minute: float = GEN_REQUESTS_PER_MINUTE
    gen_max_in_flight: int = GEN_MAX_IN_FLIGHT
    api_key_env: str = API_KEY_ENV

    # 결과 수치에 영향이 없는 항목은 해시에서 제외
    _UNHASHED = ("out_dir", "log_level", "formats", "api_key_env")

    def hashable(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in self._UNHASHED}

    def require_paths(self, *names: str):
        """지정한 경로 설정이 비어 있지 않고 실제로 존재하는지 확인합니다."""
        for name in names:
            value = getattr(self, name)
            paths = value if isinstance(value, tuple) else (value,)
            if not paths or not all(paths):
                raise ConfigError(f"경로 설정이 비어 있습니다: {name}")
            for p in paths:
                if not Path(p).exists():
                    raise ConfigError(f"{name} 경로가 존재하지 않습니다: {p}")


_PARSERS = {int: int, float: float, str: str}
_TUPLE_PARSERS = {"synthetic_corpus": _str_tuple, "depths": _int_tuple, "learning_rates": _float_tuple,
                  "formats": _str_tuple}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value):
    try:
        if name in _TUPLE_PARSERS:
            return _TUPLE_PARSERS[name](value)
        return _PARSERS[_FIELD_TYPES[name]](value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"설정 {name}={value!r} 변환 실패: {e}")


def load_run_config(path=None, env: Mapping[str, str] = None, overrides: Mapping[str, object] = None) -> RunConfig:
    """기본값 → INI 파일 → 환경변수 → CLI 값 순으로 덮어씁니다."""
    names = {f.name for f in fields(RunConfig)}
    values = {}

    if path:
        if not Path(path).exists():
            raise ConfigError(f"설정 파일이 없습니다: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigError(f"설정 파일 파싱 실패: {e}")
        for section in parser.sections():
            for key, value in parser.items(section):
                if key not in names:
                    raise ConfigError(f"알 수 없는 설정 키: [{section}] {key}")
                values[key] = value

    env = os.environ if env is None else env
    for name in names:
        key = ENV_PREFIX + name.upper()
        if key in env:
            values[name] = env[key]

    for name, value in (overrides or {}).items():
        if name in names and value is not None:
            values[name] = value

    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
