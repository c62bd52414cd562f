import hashlib
import json
import logging
import os
from functools import wraps
from pathlib import Path

import config

# 기본 로깅 설정
logging.basicConfig(
    level=getattr(logging, str(config.LOG_LEVEL).upper(), logging.INFO),
    format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
)


def get_logger(name):
    return logging.getLogger(name)


def set_log_level(level: str):
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))


# 데이터 파일 파싱 결과 캐시 (경로 + 수정시각 기준)
_cache = {}


def file_cache(func):
    """첫 번째 인자로 받은 파일 경로의 파싱 결과를 캐시합니다. 파일이 바뀌면 다시 읽습니다."""
    @wraps(func)
    def wrapper(path, *args, **kwargs):
        resolved = Path(path).resolve()
        try:
            mtime = os.path.getmtime(resolved)
        except OSError:
            # 없는 파일은 캐시하지 않고 원 함수가 에러를 내도록 둠
            return func(path, *args, **kwargs)

        key = (func.__name__, str(resolved), mtime) + tuple(args) + tuple(sorted(kwargs.items()))
        if key in _cache:
            get_logger(__name__).debug(f"Cache hit for {key[:2]}")
            return _cache[key]

        result = func(path, *args, **kwargs)
        _cache[key] = result
        get_logger(__name__).debug(f"Cache miss for {key[:2]}. Storing result.")
        return result
    return wrapper


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def config_hash(obj) -> str:
    """설정 dict의 SHA-256 (정렬된 JSON 기준) 앞 16자리."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def mask_secret(text: str, secret) -> str:
    return text.replace(secret, "******") if secret else text
