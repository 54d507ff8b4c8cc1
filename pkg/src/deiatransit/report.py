"""Aggregate indicators: sentiment shares, tract rollups, demographic distributions,
GeoJSON overlays and the JSON/CSV report bundle."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .geodemo import Level, TractClassification, TractDemographics, TractPolygon, classify_tract
from .sentiment import Sentiment

__all__ = [
    "ScoredPost",
    "SentimentDistribution",
    "TractRollup",
    "DistributionRow",
    "DIMENSIONS",
    "UNASSIGNED",
    "percent",
    "sentiment_distribution",
    "tract_rollup",
    "rollup_summary",
    "demographic_distribution",
    "emit_geojson",
    "write_json",
    "write_csv",
    "report_schema",
    "build_report",
    "emit_report",
]

UNASSIGNED = "unassigned"

# dimension name -> (classification attribute, class labels in display order)
DIMENSIONS: dict[str, tuple[str, tuple[Level, ...]]] = {
    "income": ("income", (Level.LOW, Level.MEDIUM, Level.HIGH)),
    "female": ("female", (Level.LOW, Level.MEDIUM, Level.HIGH)),
    "hispanic_latino": ("hispanic_latino", (Level.LOW, Level.MEDIUM, Level.HIGH, Level.VERY_HIGH)),
    "black": ("black", (Level.LOW, Level.MEDIUM, Level.HIGH, Level.VERY_HIGH)),
}


@dataclass(frozen=True)
class ScoredPost:
    post_id: str
    lon: float
    lat: float
    compound: float
    sentiment: Sentiment
    geoid: str | None = None


@dataclass(frozen=True)
class SentimentDistribution:
    pct_negative: float
    pct_neutral: float
    pct_positive: float
    n: int

    @property
    def empty(self) -> bool:
        return self.n == 0


@dataclass(frozen=True)
class TractRollup:
    geoid: str
    n_negative: int
    n_neutral: int
    n_positive: int
    classification: TractClassification | None = None

    @property
    def highly_sensitive(self) -> bool:
        return self.n_negative >= 1 and self.n_positive >= 1

    @property
    def total(self) -> int:
        return self.n_negative + self.n_neutral + self.n_positive


@dataclass(frozen=True)
class DistributionRow:
    dimension: str
    label: str
    count: int
    tweet_share: float


def percent(count: int, total: int) -> float:
    """``100 * count / total`` rounded half-up to one decimal, from exact integers."""
    if total == 0:
        return 0.0
    q = (Decimal(count) * 100 / Decimal(total)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return float(q)


def sentiment_distribution(labels: Sequence[Sentiment]) -> SentimentDistribution:
    c = Counter(Sentiment(x) for x in labels)
    n = len(labels)
    return SentimentDistribution(
        percent(c[Sentiment.NEGATIVE], n),
        percent(c[Sentiment.NEUTRAL], n),
        percent(c[Sentiment.POSITIVE], n),
        n,
    )


def tract_rollup(
    posts: Sequence[ScoredPost],
    demographics: Mapping[str, TractDemographics] | None = None,
) -> list[TractRollup]:
    """Per-tract sentiment counts for geotagged posts, sorted by GEOID."""
    counts: dict[str, Counter] = {}
    for p in posts:
        if p.geoid is None:
            continue
        counts.setdefault(p.geoid, Counter())[Sentiment(p.sentiment)] += 1
    out = []
    for geoid in sorted(counts):
        c = counts[geoid]
        demo = demographics.get(geoid) if demographics else None
        out.append(
            TractRollup(
                geoid,
                c[Sentiment.NEGATIVE],
                c[Sentiment.NEUTRAL],
                c[Sentiment.POSITIVE],
                classify_tract(demo) if demo is not None else None,
            )
        )
    return out


def rollup_summary(rollups: Sequence[TractRollup], posts: Sequence[ScoredPost]) -> dict[str, int]:
    return {
        "tracts": len(rollups),
        "tracts_with_negative": sum(r.n_negative > 0 for r in rollups),
        "tracts_with_neutral": sum(r.n_neutral > 0 for r in rollups),
        "tracts_with_positive": sum(r.n_positive > 0 for r in rollups),
        "highly_sensitive": sum(r.highly_sensitive for r in rollups),
        "posts_geotagged": sum(r.total for r in rollups),
        "posts_unassigned": sum(p.geoid is None for p in posts),
    }


def demographic_distribution(
    rollups: Sequence[TractRollup], posts: Sequence[ScoredPost]
) -> list[DistributionRow]:
    """Share of posts by the class of their tract, per dimension.

    Posts outside every tract, in tracts without demographics, or in tracts
    missing the dimension's value land in the ``unassigned`` bucket.
    """
    by_geoid = {r.geoid: r.classification for r in rollups}
    n = len(posts)
    rows = []
    for dim, (attr, levels) in DIMENSIONS.items():
        c: Counter = Counter()
        for p in posts:
            cls = by_geoid.get(p.geoid) if p.geoid is not None else None
            level = getattr(cls, attr) if cls is not None else None
            c[level.value if level is not None else UNASSIGNED] += 1
        for label in [lv.value for lv in levels] + [UNASSIGNED]:
            rows.append(DistributionRow(dim, label, c[label], percent(c[label], n)))
    return rows


def _polygon_geometry(parts: Sequence[TractPolygon]) -> dict:
    coords = [[[list(pt) for pt in ring] for ring in part.rings] for part in parts]
    if len(coords) == 1:
        return {"type": "Polygon", "coordinates": coords[0]}
    return {"type": "MultiPolygon", "coordinates": coords}


def emit_geojson(
    posts: Sequence[ScoredPost],
    rollups: Sequence[TractRollup],
    tracts: Sequence[TractPolygon],
    points_path,
    tracts_path,
) -> tuple[dict, dict]:
    """Write a point layer of posts and a polygon layer of tracts with rollups."""
    points = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {
                    "post_id": p.post_id,
                    "sentiment": Sentiment(p.sentiment).value,
                    "compound": round(p.compound, 6),
                    "geoid": p.geoid,
                },
                "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
            }
            for p in posts
        ],
    }
    parts: dict[str, list[TractPolygon]] = {}
    for t in tracts:
        parts.setdefault(t.geoid, []).append(t)
    by_geoid = {r.geoid: r for r in rollups}
    features = []
    for geoid, polys in parts.items():
        r = by_geoid.get(geoid)
        props = {
            "GEOID": geoid,
            "n_negative": r.n_negative if r else 0,
            "n_neutral": r.n_neutral if r else 0,
            "n_positive": r.n_positive if r else 0,
            "highly_sensitive": r.highly_sensitive if r else False,
        }
        cls = r.classification.as_dict() if r and r.classification else {}
        for dim in DIMENSIONS:
            props[f"{dim}_class"] = cls.get(dim)
        features.append({"type": "Feature", "properties": props, "geometry": _polygon_geometry(polys)})
    polygons = {"type": "FeatureCollection", "features": features}
    write_json(points_path, points)
    write_json(tracts_path, polygons)
    return points, polygons


def write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


def report_schema() -> dict:
    text = resources.files("deiatransit").joinpath("data/report.schema.json").read_text("utf-8")
    return json.loads(text)


STAGE_ORDER = ("total", "bbox_filtered", "deduped", "dei_relevant", "transport_relevant")


def build_report(
    stage_counts: Mapping[str, int],
    sentiment: SentimentDistribution,
    topics: Mapping[str, dict],
    bigrams: Mapping | None,
    rollups: Sequence[TractRollup],
    summary: Mapping[str, int],
    distribution: Sequence[DistributionRow],
    schema_version: int,
) -> dict:
    return {
        "schema_version": schema_version,
        "stage_counts": {k: int(stage_counts[k]) for k in STAGE_ORDER},
        "parse_errors": int(stage_counts.get("parse_errors", 0)),
        "sentiment_distribution": {
            "n": sentiment.n,
            "empty": sentiment.empty,
            "negative": sentiment.pct_negative,
            "neutral": sentiment.pct_neutral,
            "positive": sentiment.pct_positive,
        },
        "topics": {seg: topics[seg] for seg in sorted(topics)},
        "bigrams": dict(bigrams) if bigrams is not None else None,
        "tract_summary": dict(summary),
        "tracts": [
            {
                "geoid": r.geoid,
                "n_negative": r.n_negative,
                "n_neutral": r.n_neutral,
                "n_positive": r.n_positive,
                "highly_sensitive": r.highly_sensitive,
                "classification": r.classification.as_dict() if r.classification else None,
            }
            for r in rollups
        ],
        "demographic_distribution": [
            {"dimension": d.dimension, "class": d.label, "count": d.count, "tweet_share": d.tweet_share}
            for d in distribution
        ],
    }


def emit_report(report: Mapping, out_dir) -> list[Path]:
    """Write ``report.json`` plus one CSV per table; returns the paths written."""
    out = Path(out_dir)
    paths = []

    def csv_out(name, header, rows):
        p = out / name
        write_csv(p, header, rows)
        paths.append(p)

    p = out / "report.json"
    write_json(p, report)
    paths.append(p)
    csv_out("stage_counts.csv", ["stage", "count"], list(report["stage_counts"].items()))
    sd = report["sentiment_distribution"]
    csv_out(
        "sentiment_distribution.csv",
        ["sentiment", "percent"],
        [(k, f"{sd[k]:.1f}") for k in ("negative", "neutral", "positive")],
    )
    topic_rows = []
    for seg, t in report["topics"].items():
        for topic in t.get("topics", []):
            words = " ".join(f"{w['word']}({w['probability']:.3f})" for w in topic["words"])
            topic_rows.append((seg, topic["topic"], f"{topic['prevalence']:.3f}", words))
    csv_out("topics.csv", ["segment", "topic", "prevalence", "top_words"], topic_rows)
    bg = report.get("bigrams") or {}
    csv_out("top_bigrams.csv", ["v", "w", "count"], [(b["v"], b["w"], b["count"]) for b in bg.get("top", [])])
    csv_out(
        "tract_rollups.csv",
        ["geoid", "n_negative", "n_neutral", "n_positive", "highly_sensitive"]
        + [f"{d}_class" for d in DIMENSIONS],
        [
            (t["geoid"], t["n_negative"], t["n_neutral"], t["n_positive"], int(t["highly_sensitive"]))
            + tuple(((t["classification"] or {}).get(d) or "") for d in DIMENSIONS)
            for t in report["tracts"]
        ],
    )
    csv_out(
        "demographic_distribution.csv",
        ["dimension", "class", "count", "tweet_share"],
        [(d["dimension"], d["class"], d["count"], f"{d['tweet_share']:.1f}") for d in report["demographic_distribution"]],
    )
    return paths
