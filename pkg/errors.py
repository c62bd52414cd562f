"""도메인 에러 정의. 구조화된 값(라인 번호, 이름 등)은 속성으로 보관합니다."""


class StyloError(Exception):
    """모든 도메인 에러의 기반 클래스."""
    exit_code = 2


class ValidationError(StyloError):
    """입력/설정 검증 실패 (CLI 종료 코드 1)."""
    exit_code = 1


class ConfigError(ValidationError):
    pass


# --- corpus ---
class EmptyCorpus(StyloError):
    pass


class MalformedRecord(ValidationError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: 잘못된 레코드 ({reason})")


class DuplicateId(ValidationError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"중복 문서 id: {doc_id}")


class IoFailure(StyloError):
    pass


# --- genharness ---
class MissingPlaceholder(ValidationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"프롬프트 치환값이 비어 있거나 템플릿에 없음: {name}")


class AuthFailure(StyloError):
    pass


class RateLimited(StyloError):
    pass


class MalformedResponse(StyloError):
    pass


class PartialJob(StyloError):
    exit_code = 3

    def __init__(self, completed_count: int, records=None, failures=None):
        self.completed_count = completed_count
        self.records = records or []
        self.failures = list(failures or [])
        causes = sorted({getattr(f, "error", type(f).__name__) for f in self.failures})
        super().__init__(f"작업이 일부만 완료됨: 성공 {completed_count}건, 실패 {len(self.failures)}건 ({', '.join(causes)})")


# --- lexfeatures / psycholex / lm ---
class DegenerateText(StyloError):
    pass


class EmptyDocument(StyloError):
    pass


class MalformedDictionary(ValidationError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        super().__init__(f"line {line}: 사전 형식 오류 ({reason})")


class UnknownCategoryReference(ValidationError):
    def __init__(self, line: int, category_id: str):
        self.line = line
        self.category_id = category_id
        super().__init__(f"line {line}: 선언되지 않은 카테고리 {category_id}")


class MissingCategory(StyloError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"프로파일에 카테고리 없음: {name}")


class InsufficientVocabulary(StyloError):
    pass


class LanguageModelError(StyloError):
    pass


class MalformedScoreFile(ValidationError):
    def __init__(self, line: int, reason: str = ""):
        self.line = line
        super().__init__(f"line {line}: 점수 파일 형식 오류 ({reason})")


class UnknownDocId(ValidationError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"알 수 없는 문서 id: {doc_id}")


# --- stats ---
class EmptySample(StyloError):
    pass


class MetricMismatch(ValidationError):
    pass


# --- vectors / boost / evaluation ---
class MissingFeature(StyloError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"특징값 없음: {name}")


class EmptyTrainingSet(StyloError):
    pass


class EmptyData(StyloError):
    pass


class SingleClass(StyloError):
    pass


class NonFiniteFeature(StyloError):
    pass


class ArityMismatch(StyloError):
    pass


class TooFewSamples(StyloError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"클래스 {label!r}의 샘플 수가 폴드 수보다 적습니다.")


class LengthMismatch(StyloError):
    pass


class LeakageError(StyloError):
    pass
