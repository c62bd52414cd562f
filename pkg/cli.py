"""명령행 진입점. 종료 코드: 0 성공, 1 검증 오류, 2 실행 오류, 3 부분 완료(생성)."""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

import boost
import config
import report
from corpus import Corpus, descriptive_summary, load_corpus, save_corpus_jsonl
from errors import ConfigError, PartialJob, StyloError, ValidationError
from evaluation import STYLOMETRIC, TFIDF, GridSpec, run_conditions
from genharness import GenerationJob, load_themes, records_to_corpus, run_job
from lm import Smoothing, import_external_scores, load_model, perplexity, save_model, train_ngram, ADD_K
from mirror import run_mirror_experiment
from psycholex import load_dimension_weights, load_lexicon
from stats import comparison_tables
from utils import config_hash, get_logger, set_log_level
from vectors import read_feature_csv, stylo_frame, write_feature_csv

logger = get_logger(__name__)


def _smoothing(cfg: config.RunConfig) -> Smoothing:
    if cfg.lm_smoothing == ADD_K:
        return Smoothing.add_k(cfg.lm_add_k)
    return Smoothing(cfg.lm_smoothing, cfg.lm_discount)


def _load_corpora(paths) -> Corpus:
    return Corpus.merge([load_corpus(p) for p in paths], label="merged")


def cmd_ingest(args, cfg: config.RunConfig, run_hash: str) -> int:
    corpus = load_corpus(args.input, format=args.format)
    save_corpus_jsonl(corpus, args.out)
    stats_dir = Path(args.out).parent
    report.write_frame(descriptive_summary(corpus), stats_dir, Path(args.out).stem + "_stats", cfg.formats,
                       run_hash, cfg.seed)
    logger.info(f"ingest 완료: {len(corpus)}개 문서 → {args.out}")
    return 0


def cmd_generate(args, cfg: config.RunConfig, run_hash: str) -> int:
    job = GenerationJob(
        author=args.author,
        genre=args.genre,
        themes=load_themes(args.themes),
        count_per_theme=args.count,
        endpoint_url=cfg.gen_endpoint,
        model_name=cfg.gen_model,
        temperature=cfg.gen_temperature,
        seed_tag=args.seed_tag or str(cfg.seed),
        max_retries=cfg.gen_max_retries,
        requests_per_minute=cfg.gen_requests_per_minute,
        max_in_flight=cfg.gen_max_in_flight,
        api_key_env=cfg.api_key_env,
    )
    if not job.endpoint_url or not job.model_name:
        raise ConfigError("gen_endpoint와 gen_model 설정이 필요합니다.")
    try:
        corpus, _ = run_job(job, log_path=args.log)
    except PartialJob as e:
        save_corpus_jsonl(records_to_corpus(e.records), args.out)
        raise
    save_corpus_jsonl(corpus, args.out)
    return 0


def cmd_train_lm(args, cfg: config.RunConfig, run_hash: str) -> int:
    corpus = _load_corpora(args.corpus)
    model = train_ngram(corpus, cfg.lm_order, _smoothing(cfg), cfg.lm_min_count)
    save_model(model, args.out)
    logger.info(f"언어모델 저장: {args.out}")
    return 0


def cmd_features(args, cfg: config.RunConfig, run_hash: str) -> int:
    # 계산 전에 경로부터 확인
    cfg.require_paths("lexicon", "weights")
    if cfg.lm_model:
        cfg.require_paths("lm_model")
    elif cfg.scores:
        cfg.require_paths("scores")
    else:
        raise ConfigError("--lm 또는 --scores 중 하나가 필요합니다.")

    lexicon = load_lexicon(cfg.lexicon)
    weights = load_dimension_weights(cfg.weights)
    corpus = _load_corpora(args.corpus)
    if cfg.lm_model:
        model = load_model(cfg.lm_model)
        perplexities = {doc.id: perplexity(model, doc).perplexity if doc.word_tokens else float("nan")
                        for doc in corpus}
    else:
        perplexities = {k: r.perplexity for k, r in import_external_scores(cfg.scores, corpus.ids).items()}
    frame = stylo_frame(corpus, perplexities, lexicon, weights)
    write_feature_csv(frame, args.out, seed=cfg.seed, config_hash=run_hash)
    logger.info(f"특징 CSV 저장: {args.out} ({len(frame)}행)")
    return 0


def _read_features(paths) -> pd.DataFrame:
    frames = [read_feature_csv(p)[0] for p in paths]
    return pd.concat(frames, ignore_index=True)


def cmd_compare(args, cfg: config.RunConfig, run_hash: str) -> int:
    features = _read_features([args.human_features] + list(args.ai_features))
    tables = comparison_tables(features)
    report.write_comparison_tables(tables, cfg.out_dir, cfg.formats, run_hash, cfg.seed)
    return 0


def cmd_classify(args, cfg: config.RunConfig, run_hash: str) -> int:
    modes = [STYLOMETRIC, TFIDF] if args.mode == "both" else [args.mode]
    corpus = None
    if TFIDF in modes:
        if not args.corpus:
            raise ConfigError("tfidf 모드에는 --corpus가 필요합니다.")
        corpus = _load_corpora(args.corpus)
    features = _read_features(args.features)
    grid = GridSpec(cfg.depths, cfg.learning_rates)
    train_cfg = boost.TrainConfig(n_rounds=cfg.n_rounds, seed=cfg.seed)
    reports = run_conditions(features, corpus, modes, grid, cfg.k_outer, cfg.k_inner, cfg.seed, train_cfg)
    report.write_nested_reports(reports, cfg.out_dir, cfg.formats, run_hash, cfg.seed)
    return 0


def cmd_mirror(args, cfg: config.RunConfig, run_hash: str) -> int:
    result = run_mirror_experiment(args.n_per_class, cfg.seed, cfg.k_outer, cfg.k_inner, cfg.n_rounds,
                                   cfg.lexicon, cfg.weights)
    key = ("mirror", "markov")
    reports = {key + (STYLOMETRIC,): result.stylometric, key + (TFIDF,): result.tfidf}
    report.write_comparison_tables({("mirror", "all"): result.comparison}, cfg.out_dir, cfg.formats,
                                   run_hash, cfg.seed)
    report.write_nested_reports(reports, cfg.out_dir, cfg.formats, run_hash, cfg.seed)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stylo", description="사람/LLM 글의 문체 비교와 분류 파이프라인")
    parser.add_argument("--config", help="INI 설정 파일")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG/INFO/WARNING/ERROR")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir", help="보고서 출력 디렉터리")
    parser.add_argument("--formats", help="보고서 형식 (쉼표 구분: md,csv,json)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="코퍼스를 읽어 정규화된 JSONL과 기술통계표 저장")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=["jsonl", "text_directory"], default="jsonl")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("generate", help="LLM 엔드포인트로 모방 텍스트 생성")
    p.add_argument("--author", required=True)
    p.add_argument("--genre", choices=["poem", "tweet"], required=True)
    p.add_argument("--themes", required=True, help="한 줄에 주제 하나")
    p.add_argument("--count", type=int, default=1, help="주제당 생성 수")
    p.add_argument("--endpoint", dest="gen_endpoint")
    p.add_argument("--model", dest="gen_model")
    p.add_argument("--temperature", dest="gen_temperature", type=float)
    p.add_argument("--api-key-env", dest="api_key_env")
    p.add_argument("--seed-tag", default="")
    p.add_argument("--log", required=True, help="요청/응답 기록 JSONL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-lm", help="n-gram 언어모델 학습")
    p.add_argument("--corpus", nargs="+", required=True)
    p.add_argument("--order", dest="lm_order", type=int)
    p.add_argument("--smoothing", dest="lm_smoothing", choices=[ADD_K, "interpolated_kneser_ney"])
    p.add_argument("--add-k", dest="lm_add_k", type=float)
    p.add_argument("--discount", dest="lm_discount", type=float)
    p.add_argument("--min-count", dest="lm_min_count", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("features", help="문서별 8차원 문체 특징 CSV 생성")
    p.add_argument("--corpus", nargs="+", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--weights")
    p.add_argument("--lm", dest="lm_model")
    p.add_argument("--scores", help="외부 perplexity 점수 JSONL")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("compare", help="사람 vs 모델 비교표 (중앙값/IQR, Mann-Whitney U)")
    p.add_argument("--human-features", required=True)
    p.add_argument("--ai-features", nargs="+", required=True)
    p.add_argument("--out", dest="out_dir", default=argparse.SUPPRESS, help="보고서 출력 디렉터리")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("classify", help="중첩 교차검증 분류와 특징 중요도")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--corpus", nargs="+", help="tfidf 모드용 코퍼스")
    p.add_argument("--mode", choices=[STYLOMETRIC, TFIDF, "both"], default=STYLOMETRIC)
    p.add_argument("--depths", help="쉼표 구분 (예: 3,6)")
    p.add_argument("--learning-rates", dest="learning_rates", help="쉼표 구분 (예: 0.01,0.1)")
    p.add_argument("--k-outer", dest="k_outer", type=int)
    p.add_argument("--k-inner", dest="k_inner", type=int)
    p.add_argument("--n-rounds", dest="n_rounds", type=int)
    p.add_argument("--out", dest="out_dir", default=argparse.SUPPRESS, help="보고서 출력 디렉터리")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("mirror", help="합성 미러 실험")
    p.add_argument("--n-per-class", type=int, default=600)
    p.add_argument("--n-rounds", dest="n_rounds", type=int)
    p.add_argument("--out", dest="out_dir", default=argparse.SUPPRESS, help="보고서 출력 디렉터리")
    p.set_defaults(func=cmd_mirror)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config.load_run_config(args.config, overrides=vars(args))
        set_log_level(cfg.log_level)
        run_hash = config_hash(cfg.hashable())
        logger.info(f"{args.command} 시작 (config_hash={run_hash}, seed={cfg.seed})")
        code = args.func(args, cfg, run_hash)
    except PartialJob as e:
        logger.warning(f"부분 완료: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"검증 오류: {e}")
        return e.exit_code
    except StyloError as e:
        logger.error(f"실행 오류: {e}", exc_info=True)
        return e.exit_code
    except OSError as e:
        logger.error(f"파일 입출력 오류: {e}", exc_info=True)
        return 2
    logger.info(f"{args.command} 완료")
    return code


if __name__ == "__main__":
    sys.exit(main())
