"""Stage orchestration: configuration, NDJSON stage artifacts and ``run_all``.

Stages run in order ingest -> filter -> sentiment -> topics -> bigrams ->
geotag -> report. Each reads the previous stage's artifact from the output
directory, so any stage can be re-run on its own.
"""

from __future__ import annotations

import configparser
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import corpus, geodemo, ngram, relevance, report, sentiment, topics
from .corpus import BoundingBox, CleanPost, format_timestamp, parse_timestamp

__all__ = [
    "SCHEMA_VERSION",
    "STAGES",
    "SEGMENTS",
    "PipelineConfig",
    "PipelineError",
    "SchemaError",
    "load_config",
    "run_stage",
    "run_all",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("ingest", "filter", "sentiment", "topics", "bigrams", "geotag", "report")
SEGMENTS = ("negative", "neutral", "positive")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class SchemaError(PipelineError):
    pass


class ConfigError(ValueError):
    pass


def _int_list(value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(int(v) for v in str(value).replace(" ", "").split(",") if v)


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _opt_float(value):
    return None if value in (None, "") else float(value)


def _opt_int_list(value):
    return None if value in (None, "") else _int_list(value)


@dataclass(frozen=True)
class Key:
    section: str
    parse: Callable[[Any], Any]
    default: Any = None
    required: bool = False
    path: bool = False
    help: str = ""


# Every config key, its section and parser; CLI flags mirror these names.
KEYS: dict[str, Key] = {
    "posts": Key("inputs", str, required=True, path=True, help="post NDJSON file"),
    "lexicon": Key("inputs", str, path=True, help="valence lexicon (default: bundled)"),
    "stopwords": Key("inputs", str, path=True, help="stopword file (default: bundled)"),
    "dei_keywords": Key("inputs", str, path=True, help="DEI keyword file (default: bundled)"),
    "transport_keywords": Key("inputs", str, path=True, help="transport keyword file (default: bundled)"),
    "tracts": Key("inputs", str, required=True, path=True, help="tract boundary GeoJSON"),
    "acs": Key("inputs", str, required=True, path=True, help="tract demographics CSV"),
    "lat_min": Key("bbox", float, corpus.NYC_BOX.lat_min),
    "lat_max": Key("bbox", float, corpus.NYC_BOX.lat_max),
    "lon_min": Key("bbox", float, corpus.NYC_BOX.lon_min),
    "lon_max": Key("bbox", float, corpus.NYC_BOX.lon_max),
    "match": Key("relevance", str, "whole", help="keyword match mode: whole | substring"),
    "heuristics": Key("sentiment", _bool, False, help="negation/intensifier rules"),
    "neutral_band": Key("sentiment", float, 0.0, help="|compound| <= band counts as neutral"),
    "k": Key("topics", _int_list, (2, 3, 4, 5, 6, 7), help="candidate topic counts, comma separated"),
    "k_negative": Key("topics", _opt_int_list, help="topic counts for the negative segment"),
    "k_neutral": Key("topics", _opt_int_list, help="topic counts for the neutral segment"),
    "k_positive": Key("topics", _opt_int_list, help="topic counts for the positive segment"),
    "alpha": Key("topics", _opt_float, help="doc-topic prior (default 50/K)"),
    "beta": Key("topics", float, topics.DEFAULT_BETA),
    "iterations": Key("topics", int, topics.DEFAULT_ITERATIONS),
    "min_count": Key("topics", int, 2),
    "min_tokens": Key("topics", int, 3),
    "top_words": Key("topics", int, 10),
    "g": Key("bigrams", int, required=True, help="number of word classes"),
    "max_sweeps": Key("bigrams", int, 50),
    "top_n": Key("bigrams", int, 20, help="bigrams listed in the report"),
    "seed": Key("run", int, required=True),
    "out_dir": Key("run", str, "out", path=True),
}

# Input files each stage needs; checked before the stage runs.
STAGE_INPUTS = {
    "ingest": ("posts", "stopwords"),
    "filter": ("dei_keywords", "transport_keywords"),
    "sentiment": ("lexicon",),
    "topics": (),
    "bigrams": (),
    "geotag": ("tracts",),
    "report": ("tracts", "acs"),
}


@dataclass(frozen=True)
class PipelineConfig:
    posts: Path
    tracts: Path
    acs: Path
    g: int
    seed: int
    out_dir: Path = Path("out")
    lexicon: Path | None = None
    stopwords: Path | None = None
    dei_keywords: Path | None = None
    transport_keywords: Path | None = None
    lat_min: float = corpus.NYC_BOX.lat_min
    lat_max: float = corpus.NYC_BOX.lat_max
    lon_min: float = corpus.NYC_BOX.lon_min
    lon_max: float = corpus.NYC_BOX.lon_max
    match: str = "whole"
    heuristics: bool = False
    neutral_band: float = 0.0
    k: tuple[int, ...] = (2, 3, 4, 5, 6, 7)
    k_negative: tuple[int, ...] | None = None
    k_neutral: tuple[int, ...] | None = None
    k_positive: tuple[int, ...] | None = None
    alpha: float | None = None
    beta: float = topics.DEFAULT_BETA
    iterations: int = topics.DEFAULT_ITERATIONS
    min_count: int = 2
    min_tokens: int = 3
    top_words: int = 10
    max_sweeps: int = 50
    top_n: int = 20

    @property
    def bbox(self) -> BoundingBox:
        return BoundingBox(self.lat_min, self.lat_max, self.lon_min, self.lon_max)

    def k_for(self, segment: str) -> tuple[int, ...]:
        return getattr(self, f"k_{segment}") or self.k

    def check_inputs(self, stage: str) -> None:
        for name in STAGE_INPUTS[stage]:
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise PipelineError(stage, f"input {name!r} not found: {p}")


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Build a config from an INI-style file plus overrides (overrides win).

    Relative paths in the file resolve against the file's directory;
    relative paths in ``overrides`` resolve against the working directory.
    """
    raw: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        cp.read(path, encoding="utf-8")
        base = path.resolve().parent
        for section in cp.sections():
            for key, value in cp.items(section):
                if key not in KEYS:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                if KEYS[key].section != section:
                    raise ConfigError(f"key {key!r} belongs in section [{KEYS[key].section}]")
                raw[key] = (value, base)
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            raw[key] = (value, Path.cwd())

    values = {}
    for key, opt in KEYS.items():
        if key in raw:
            value, origin = raw[key]
            if opt.path:
                values[key] = None if value in ("", None) else (origin / Path(value))
            else:
                try:
                    values[key] = opt.parse(value)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
        elif opt.required:
            raise ConfigError(f"missing required setting {key!r} (section [{opt.section}])")
        elif opt.default is not None:
            values[key] = Path(opt.default) if opt.path else opt.default
    if values.get("match", "whole") not in relevance.MATCH_MODES:
        raise ConfigError(f"match must be one of {relevance.MATCH_MODES}")
    if "out_dir" not in raw:
        values["out_dir"] = base / values.get("out_dir", Path("out"))
    return PipelineConfig(**values)


# ---------------------------------------------------------------- artifacts

def _write_ndjson(path: Path, stage: str, counts: dict, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {"schema_version": SCHEMA_VERSION, "kind": "header", "stage": stage, "counts": counts}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps({"schema_version": SCHEMA_VERSION, **rec}, sort_keys=True, ensure_ascii=False) + "\n")


def _read_ndjson(path: Path, stage: str, expect: str) -> tuple[dict, list[dict]]:
    if not path.is_file():
        raise PipelineError(stage, f"missing input artifact {path} (run the {expect!r} stage first)")
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise SchemaError(stage, f"{path.name}: missing artifact header")
    header = lines[0]
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            stage,
            f"{path.name}: schema_version {header.get('schema_version')!r} "
            f"does not match expected {SCHEMA_VERSION}",
        )
    if header.get("stage") != expect:
        raise SchemaError(stage, f"{path.name}: produced by stage {header.get('stage')!r}, expected {expect!r}")
    for rec in lines[1:]:
        if rec.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(stage, f"{path.name}: record schema_version mismatch")
    return header, lines[1:]


def _read_json(path: Path, stage: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(stage, f"{path.name}: schema_version mismatch")
    return obj


def _post_record(p: CleanPost) -> dict:
    return {
        "post_id": p.post_id,
        "user_id": p.user_id,
        "created_at": format_timestamp(p.created_at),
        "lon": p.lon,
        "lat": p.lat,
        "clean_text": p.clean_text,
        "tokens": list(p.tokens),
    }


def _record_post(rec: dict) -> CleanPost:
    return CleanPost(
        rec["post_id"], rec["user_id"], parse_timestamp(rec["created_at"]),
        rec["lon"], rec["lat"], rec["clean_text"], tuple(rec["tokens"]),
    )


# ------------------------------------------------------------------- stages

def stage_ingest(cfg: PipelineConfig, err=None) -> dict:
    err = err or sys.stderr
    with open(cfg.posts, "rb") as fh:
        raw, errors = corpus.parse_posts(fh)
    for e in errors:
        print(str(e), file=err)
    boxed = corpus.filter_bbox(raw, cfg.bbox)
    unique = corpus.dedup(boxed)
    stop = corpus.load_stopwords(cfg.stopwords) if cfg.stopwords else corpus.default_stopwords()
    clean = [corpus.to_clean_post(p, stop) for p in unique]
    counts = {
        "parse_errors": len(errors),
        "total": len(raw),
        "bbox_filtered": len(boxed),
        "deduped": len(unique),
    }
    _write_ndjson(cfg.out_dir / "ingest.ndjson", "ingest", counts, map(_post_record, clean))
    return counts


def stage_filter(cfg: PipelineConfig, out=None) -> dict:
    out = out or sys.stdout
    header, recs = _read_ndjson(cfg.out_dir / "ingest.ndjson", "filter", "ingest")
    posts = [_record_post(r) for r in recs]
    dei = (relevance.load_keywords(cfg.dei_keywords, "dei") if cfg.dei_keywords
           else relevance.default_keywords("dei"))
    tr = (relevance.load_keywords(cfg.transport_keywords, "transport") if cfg.transport_keywords
          else relevance.default_keywords("transport"))
    res = relevance.tag_and_filter(posts, dei, tr, cfg.match)
    print(res.summary(), file=out)
    counts = dict(header["counts"], dei_relevant=res.stage1_kept, transport_relevant=res.stage2_kept)
    _write_ndjson(cfg.out_dir / "filter.ndjson", "filter", counts, map(_post_record, res.retained))
    return counts


def stage_sentiment(cfg: PipelineConfig) -> dict:
    header, recs = _read_ndjson(cfg.out_dir / "filter.ndjson", "sentiment", "filter")
    lex = sentiment.load_lexicon(cfg.lexicon) if cfg.lexicon else sentiment.default_lexicon()
    out = []
    for r in recs:
        # scored on the full cleaned text: stopword lists drop negators and valence words
        res = sentiment.score(r["clean_text"].split(), lex, cfg.heuristics, cfg.neutral_band)
        out.append(dict(r, compound=round(res.compound, 6), sentiment=res.label.value, hits=res.hit_count))
    out = [{k: v for k, v in r.items() if k != "schema_version"} for r in out]
    _write_ndjson(cfg.out_dir / "sentiment.ndjson", "sentiment", header["counts"], out)
    return header["counts"]


def _segment_topics(cfg: PipelineConfig, name: str, posts: list[CleanPost], seed: int) -> tuple[dict, list]:
    base = {"schema_version": SCHEMA_VERSION, "segment": name, "n_posts": len(posts), "seed": seed}
    try:
        tc = topics.build_topic_corpus(posts, cfg.min_count, cfg.min_tokens)
    except ValueError as exc:
        return dict(base, skipped=str(exc), topics=[]), []
    cands = [k for k in cfg.k_for(name) if k <= tc.n_tokens]
    if not cands:
        return dict(base, skipped="every candidate K exceeds the token count", topics=[]), []
    best, table, models = topics.select_k(
        tc, cands, seed, cfg.alpha, cfg.beta, cfg.iterations, cfg.top_words
    )
    model = models[best]
    prev = topics.topic_prevalence(model)
    order = sorted(range(model.K), key=lambda k: (-prev[k], k))
    tail = max(1, len(model.loglik) // 5)
    result = dict(
        base,
        n_docs=len(tc.docs),
        n_dropped=tc.n_dropped,
        vocab_size=tc.V,
        k=best,
        k_candidates=cands,
        alpha=round(model.alpha, 6),
        beta=model.beta,
        iterations=model.iterations,
        loglik_head=round(float(np.mean(model.loglik[:tail])), 6),
        loglik_tail=round(float(np.mean(model.loglik[-tail:])), 6),
        topics=[
            {
                "topic": rank,
                "prevalence": round(float(prev[k]), 6),
                "words": [
                    {"word": w, "probability": round(p, 6)}
                    for w, p in topics.top_words(model, k, cfg.top_words)
                ],
            }
            for rank, k in enumerate(order)
        ],
    )
    return result, table


def stage_topics(cfg: PipelineConfig, segments=SEGMENTS) -> dict:
    _, recs = _read_ndjson(cfg.out_dir / "sentiment.ndjson", "topics", "sentiment")
    results = {}
    for name in segments:
        if name not in SEGMENTS:
            raise PipelineError("topics", f"unknown segment {name!r}")
        posts = [_record_post(r) for r in recs if r["sentiment"] == name]
        seed = cfg.seed + SEGMENTS.index(name) * 1000
        res, table = _segment_topics(cfg, name, posts, seed)
        report.write_json(cfg.out_dir / f"topics_{name}.json", res)
        report.write_csv(
            cfg.out_dir / f"coherence_{name}.csv",
            ["K", "mean_coherence"],
            [(k, f"{c:.6f}") for k, c in table],
        )
        results[name] = res
    return results


def stage_bigrams(cfg: PipelineConfig, out=None) -> dict:
    out = out or sys.stdout
    _, recs = _read_ndjson(cfg.out_dir / "sentiment.ndjson", "bigrams", "sentiment")
    docs = [r["tokens"] for r in recs if r["tokens"]]
    if not docs:
        raise PipelineError("bigrams", "no tokens in the relevant corpus")
    stats = ngram.count(docs)
    if not 1 <= cfg.g <= stats.W:
        raise PipelineError("bigrams", f"g={cfg.g} must be in [1, {stats.W}] (vocabulary size)")
    cm, history = ngram.cluster_exchange(stats, cfg.g, cfg.max_sweeps, cfg.seed)
    ranked = ngram.top_bigrams(stats, max(stats.n_bigrams, 1)) if stats.bigrams else []
    report.write_csv(cfg.out_dir / "bigrams.csv", ["v", "w", "count"], ranked)
    report.write_csv(cfg.out_dir / "clusters.csv", ["word", "class"],
                     [(w, cm.assign[w]) for w in stats.vocab])
    hist_lines = [f"{f:.6f}" for f in history]
    (cfg.out_dir / "fbi_history.txt").write_text("\n".join(hist_lines) + "\n", encoding="utf-8")
    for line in hist_lines:
        print(line, file=out)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "N": stats.N,
        "W": stats.W,
        "n_bigrams": stats.n_bigrams,
        "G": cfg.g,
        "sweeps": len(history) - 1,
        "F_history": [round(f, 6) for f in history],
        "top": [{"v": v, "w": w, "count": c} for v, w, c in ranked[: cfg.top_n]],
        "classes": cm.members(),
    }
    report.write_json(cfg.out_dir / "bigrams.json", summary)
    return summary


def stage_geotag(cfg: PipelineConfig) -> dict:
    header, recs = _read_ndjson(cfg.out_dir / "sentiment.ndjson", "geotag", "sentiment")
    try:
        tracts = geodemo.load_tracts(cfg.tracts)
    except (geodemo.GeoError, json.JSONDecodeError) as exc:
        raise PipelineError("geotag", str(exc)) from None
    out = []
    for r in recs:
        rec = {k: v for k, v in r.items() if k != "schema_version"}
        rec["geoid"] = geodemo.assign_tract(r["lon"], r["lat"], tracts)
        out.append(rec)
    _write_ndjson(cfg.out_dir / "geotag.ndjson", "geotag", header["counts"], out)
    return header["counts"]


def stage_report(cfg: PipelineConfig) -> dict:
    header, recs = _read_ndjson(cfg.out_dir / "geotag.ndjson", "report", "geotag")
    try:
        tracts = geodemo.load_tracts(cfg.tracts)
        demo = geodemo.load_acs(cfg.acs)
    except (geodemo.GeoError, json.JSONDecodeError) as exc:
        raise PipelineError("report", str(exc)) from None
    posts = [
        report.ScoredPost(r["post_id"], r["lon"], r["lat"], r["compound"],
                          sentiment.Sentiment(r["sentiment"]), r["geoid"])
        for r in recs
    ]
    rollups = report.tract_rollup(posts, demo)
    seg_topics = {}
    for name in SEGMENTS:
        p = cfg.out_dir / f"topics_{name}.json"
        if p.is_file():
            seg_topics[name] = {k: v for k, v in _read_json(p, "report").items() if k != "schema_version"}
    bg_path = cfg.out_dir / "bigrams.json"
    bigrams = None
    if bg_path.is_file():
        bg = _read_json(bg_path, "report")
        bigrams = {k: bg[k] for k in ("N", "W", "n_bigrams", "G", "sweeps", "F_history", "top")}
    rep = report.build_report(
        header["counts"],
        report.sentiment_distribution([p.sentiment for p in posts]),
        seg_topics,
        bigrams,
        rollups,
        report.rollup_summary(rollups, posts),
        report.demographic_distribution(rollups, posts),
        SCHEMA_VERSION,
    )
    report.emit_report(rep, cfg.out_dir)
    report.emit_geojson(posts, rollups, tracts, cfg.out_dir / "posts.geojson",
                        cfg.out_dir / "tracts.geojson")
    return rep


def run_stage(stage: str, cfg: PipelineConfig, **kw):
    if stage not in STAGES:
        raise PipelineError(stage, "unknown stage")
    cfg.check_inputs(stage)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    fn = globals()[f"stage_{stage}"]
    try:
        return fn(cfg, **kw)
    except PipelineError:
        raise
    except (OSError, ValueError) as exc:
        raise PipelineError(stage, str(exc)) from exc


def run_all(cfg: PipelineConfig) -> dict:
    """Run every stage in order; on failure leave a ``FAILED`` marker naming the stage."""
    for stage in STAGES:
        cfg.check_inputs(stage)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    marker = cfg.out_dir / "FAILED"
    if marker.exists():
        marker.unlink()
    result = None
    for stage in STAGES:
        try:
            result = run_stage(stage, cfg)
        except PipelineError as exc:
            marker.write_text(f"{exc.stage}: {exc}\n", encoding="utf-8")
            raise
    return result
