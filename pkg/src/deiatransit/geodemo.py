"""Census tract assignment by point-in-polygon, ACS joins and tract classification."""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

__all__ = [
    "TractPolygon",
    "TractDemographics",
    "TractClassification",
    "Level",
    "GeoError",
    "parse_tracts",
    "load_tracts",
    "point_in_ring",
    "point_in_polygon",
    "assign_tract",
    "parse_acs",
    "load_acs",
    "write_acs",
    "classify_tract",
    "classify_income",
    "classify_female",
    "classify_share",
    "TractAssigner",
]

log = logging.getLogger(__name__)

GEOID_RE = re.compile(r"^\d{11}$")
ACS_HEADER = ("geoid", "income_per_capita", "pct_female", "pct_hispanic_latino", "pct_black")


class GeoError(ValueError):
    pass


class Level(str, enum.Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    VERY_HIGH = "VeryHigh"


@dataclass(frozen=True)
class TractPolygon:
    geoid: str
    rings: tuple[tuple[tuple[float, float], ...], ...]

    def __post_init__(self):
        if not self.rings:
            raise GeoError(f"tract {self.geoid}: no rings")
        for ring in self.rings:
            if len(ring) < 4:
                raise GeoError(f"tract {self.geoid}: ring has {len(ring)} points, need >= 4")
            if ring[0] != ring[-1]:
                raise GeoError(f"tract {self.geoid}: ring is not closed")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.rings[0]]
        ys = [p[1] for p in self.rings[0]]
        return min(xs), min(ys), max(xs), max(ys)


@dataclass(frozen=True)
class TractDemographics:
    geoid: str
    income_per_capita: float | None
    pct_female: float | None
    pct_hispanic_latino: float | None
    pct_black: float | None

    @property
    def missing(self) -> tuple[str, ...]:
        return tuple(f for f in ACS_HEADER[1:] if getattr(self, f) is None)


@dataclass(frozen=True)
class TractClassification:
    income: Level | None
    female: Level | None
    hispanic_latino: Level | None
    black: Level | None

    def as_dict(self) -> dict[str, str | None]:
        return {k: (v.value if v is not None else None) for k, v in self.__dict__.items()}


def _ring(coords, geoid) -> tuple[tuple[float, float], ...]:
    try:
        return tuple((float(p[0]), float(p[1])) for p in coords)
    except (TypeError, ValueError, IndexError):
        raise GeoError(f"tract {geoid}: malformed coordinates") from None


def parse_tracts(collection: Mapping) -> tuple[list[TractPolygon], list[str]]:
    """Build polygons from a GeoJSON FeatureCollection.

    MultiPolygons become one ``TractPolygon`` per part. Bad features are
    skipped and reported as ``feature <i>: <reason>`` strings.
    """
    if collection.get("type") != "FeatureCollection":
        raise GeoError("expected a GeoJSON FeatureCollection")
    tracts: list[TractPolygon] = []
    errors: list[str] = []
    seen: set[str] = set()
    for i, feat in enumerate(collection.get("features", [])):
        try:
            props = feat.get("properties") or {}
            geoid = props.get("GEOID")
            if geoid is None:
                raise GeoError("missing GEOID property")
            geoid = str(geoid)
            if geoid in seen:
                raise GeoError(f"duplicate GEOID {geoid}")
            geom = feat.get("geometry") or {}
            if geom.get("type") == "Polygon":
                parts = [geom["coordinates"]]
            elif geom.get("type") == "MultiPolygon":
                parts = geom["coordinates"]
            else:
                raise GeoError(f"unsupported geometry {geom.get('type')!r}")
            built = [TractPolygon(geoid, tuple(_ring(r, geoid) for r in part)) for part in parts]
        except (GeoError, KeyError, AttributeError) as exc:
            errors.append(f"feature {i}: {exc}")
            continue
        seen.add(geoid)
        tracts.extend(built)
    return tracts, errors


def load_tracts(path, strict: bool = True) -> list[TractPolygon]:
    with open(path, encoding="utf-8") as fh:
        tracts, errors = parse_tracts(json.load(fh))
    if errors and strict:
        raise GeoError(f"{path}: " + "; ".join(errors))
    return tracts


def _on_segment(x, y, x1, y1, x2, y2) -> bool:
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if cross != 0:
        return False
    return min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2)


def point_in_ring(x: float, y: float, ring: Sequence[tuple[float, float]]) -> int:
    """Even-odd ray cast: 1 inside, 0 outside, -1 on the boundary."""
    inside = False
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        if _on_segment(x, y, x1, y1, x2, y2):
            return -1
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return 1 if inside else 0


def point_in_polygon(x: float, y: float, tract: TractPolygon) -> bool:
    """Containment in the exterior ring minus holes; any boundary counts as inside."""
    outer = point_in_ring(x, y, tract.rings[0])
    if outer == 0:
        return False
    if outer == -1:
        return True
    for hole in tract.rings[1:]:
        h = point_in_ring(x, y, hole)
        if h == 1:
            return False
        if h == -1:
            return True
    return True


def assign_tract(lon: float, lat: float, tracts: Sequence[TractPolygon]) -> str | None:
    """GEOID of the first tract (file order) containing the point, else None."""
    for t in tracts:
        xmin, ymin, xmax, ymax = t.bounds
        if xmin <= lon <= xmax and ymin <= lat <= ymax and point_in_polygon(lon, lat, t):
            return t.geoid
    return None


def _cell(value: str, field: str, lineno: int) -> float | None:
    value = value.strip()
    if value == "":
        return None
    try:
        v = float(value)
    except ValueError:
        raise GeoError(f"line {lineno}: {field} is not numeric: {value!r}") from None
    if not math.isfinite(v):
        raise GeoError(f"line {lineno}: {field} is not finite")
    if field == "income_per_capita":
        if v < 0:
            raise GeoError(f"line {lineno}: negative income")
    elif not 0 <= v <= 100:
        raise GeoError(f"line {lineno}: {field} outside [0, 100]")
    return v


def parse_acs(path) -> tuple[dict[str, TractDemographics], list[str]]:
    """Read the tract demographics CSV keyed by 11-digit GEOID.

    Empty cells are missing values. Rows with a malformed GEOID or value are
    rejected and reported as ``line <n>: <reason>``. A repeated GEOID makes
    the join ambiguous and raises.
    """
    out: dict[str, TractDemographics] = {}
    rejects: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ACS_HEADER:
            raise GeoError(f"{path}: header must be {','.join(ACS_HEADER)}")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(ACS_HEADER):
                rejects.append(f"line {lineno}: expected {len(ACS_HEADER)} columns")
                continue
            geoid = row[0].strip()
            if not GEOID_RE.match(geoid):
                rejects.append(f"line {lineno}: malformed geoid {geoid!r}")
                continue
            if geoid in out:
                raise GeoError(f"{path}: line {lineno}: duplicate geoid {geoid}")
            try:
                vals = [_cell(v, f, lineno) for v, f in zip(row[1:], ACS_HEADER[1:])]
            except GeoError as exc:
                rejects.append(str(exc))
                continue
            out[geoid] = TractDemographics(geoid, *vals)
    return out, rejects


def load_acs(path) -> dict[str, TractDemographics]:
    records, rejects = parse_acs(path)
    for r in rejects:
        log.warning("%s: %s", path, r)
    return records


def _fmt(v: float | None) -> str:
    if v is None:
        return ""
    return repr(v)


def write_acs(path, records: Iterable[TractDemographics]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ACS_HEADER)
        for r in sorted(records, key=lambda r: r.geoid):
            w.writerow([r.geoid] + [_fmt(getattr(r, f)) for f in ACS_HEADER[1:]])


# Intervals are lower-open, upper-closed at each printed bound.
def classify_income(income: float | None) -> Level | None:
    if income is None:
        return None
    if income <= 50_000:
        return Level.LOW
    if income <= 150_000:
        return Level.MEDIUM
    return Level.HIGH


def classify_female(pct: float | None) -> Level | None:
    if pct is None:
        return None
    if pct <= 30:
        return Level.LOW
    if pct <= 50:
        return Level.MEDIUM
    return Level.HIGH


def classify_share(pct: float | None) -> Level | None:
    """Hispanic/Latino or Black population share."""
    if pct is None:
        return None
    if pct <= 10:
        return Level.LOW
    if pct <= 25:
        return Level.MEDIUM
    if pct <= 50:
        return Level.HIGH
    return Level.VERY_HIGH


def classify_tract(demo: TractDemographics) -> TractClassification:
    return TractClassification(
        income=classify_income(demo.income_per_capita),
        female=classify_female(demo.pct_female),
        hispanic_latino=classify_share(demo.pct_hispanic_latino),
        black=classify_share(demo.pct_black),
    )


class TractAssigner(BaseEstimator):
    """Point-to-tract assignment as a predictor.

    ``fit`` takes a list of ``TractPolygon`` (or a GeoJSON path);
    ``predict`` maps an ``(n, 2)`` array of ``(lon, lat)`` to GEOIDs,
    ``None`` where no tract contains the point.
    """

    def __init__(self, prefilter=True):
        self.prefilter = prefilter

    def fit(self, X, y=None):
        self.tracts_ = load_tracts(X) if isinstance(X, (str, bytes)) or hasattr(X, "__fspath__") else list(X)
        self.geoids_ = tuple(dict.fromkeys(t.geoid for t in self.tracts_))
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "tracts_"):
            raise AttributeError("TractAssigner is not fitted yet; call fit first")
        pts = np.asarray(X, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("expected an array of shape (n, 2) holding (lon, lat)")
        if self.prefilter:
            return np.array([assign_tract(x, y, self.tracts_) for x, y in pts], dtype=object)
        out = []
        for x, y in pts:
            out.append(next((t.geoid for t in self.tracts_ if point_in_polygon(x, y, t)), None))
        return np.array(out, dtype=object)
