"""Post ingestion: NDJSON parsing, bounding-box filter, dedup, cleaning, tokenizing."""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from typing import BinaryIO, Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

__all__ = [
    "RawPost",
    "CleanPost",
    "BoundingBox",
    "ParseError",
    "NYC_BOX",
    "EMOJI_RANGES",
    "parse_posts",
    "filter_bbox",
    "dedup",
    "clean_text",
    "tokenize",
    "load_stopwords",
    "default_stopwords",
    "to_clean_post",
    "TextPreprocessor",
]

REQUIRED_FIELDS = ("id", "user_id", "created_at", "text", "lon", "lat")


@dataclass(frozen=True)
class RawPost:
    post_id: str
    user_id: str
    created_at: datetime
    text: str
    lon: float
    lat: float

    def __post_init__(self):
        if not self.post_id:
            raise ValueError("post_id must be non-empty")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon out of range: {self.lon}")


@dataclass(frozen=True)
class CleanPost:
    post_id: str
    user_id: str
    created_at: datetime
    lon: float
    lat: float
    clean_text: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class BoundingBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not self.lat_min < self.lat_max:
            raise ValueError("lat_min must be < lat_max")
        if not self.lon_min < self.lon_max:
            raise ValueError("lon_min must be < lon_max")

    def contains(self, lon: float, lat: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max


# Study area around New York City.
NYC_BOX = BoundingBox(lat_min=40.49, lat_max=42.14, lon_min=-74.25, lon_max=-73.70)


@dataclass(frozen=True)
class ParseError:
    line: int
    reason: str

    def __str__(self) -> str:
        return f"line{self.line}: {self.reason}"


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 timestamp and normalize it to UTC.

    Naive timestamps are taken to be UTC already.
    """
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    ts = datetime.fromisoformat(value)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _post_from_obj(obj) -> RawPost:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    missing = [f for f in REQUIRED_FIELDS if f not in obj]
    if missing:
        raise ValueError("missing field: " + ", ".join(missing))
    for name in ("id", "user_id", "created_at", "text"):
        if not isinstance(obj[name], str):
            raise ValueError(f"field {name!r} must be a string")
    for name in ("lon", "lat"):
        v = obj[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"field {name!r} must be a number")
    if not obj["id"]:
        raise ValueError("field 'id' is empty")
    try:
        created = parse_timestamp(obj["created_at"])
    except ValueError:
        raise ValueError(f"bad timestamp: {obj['created_at']!r}") from None
    lon, lat = float(obj["lon"]), float(obj["lat"])
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"lat out of range: {lat}")
    if not -180.0 <= lon <= 180.0:
        raise ValueError(f"lon out of range: {lon}")
    return RawPost(obj["id"], obj["user_id"], created, obj["text"], lon, lat)


def parse_posts(stream: BinaryIO | Iterable[bytes]) -> tuple[list[RawPost], list[ParseError]]:
    """Parse newline-delimited JSON posts.

    Malformed lines never abort the parse; each one yields a ``ParseError``
    with its 1-based line number. Blank lines are skipped.
    """
    posts: list[RawPost] = []
    errors: list[ParseError] = []
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                errors.append(ParseError(lineno, "invalid UTF-8"))
                continue
        else:
            line = raw
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(ParseError(lineno, f"malformed JSON: {exc.msg}"))
            continue
        try:
            posts.append(_post_from_obj(obj))
        except ValueError as exc:
            errors.append(ParseError(lineno, str(exc)))
    return posts, errors


def filter_bbox(posts: Sequence[RawPost], box: BoundingBox = NYC_BOX) -> list[RawPost]:
    return [p for p in posts if box.contains(p.lon, p.lat)]


def dedup(posts: Sequence[RawPost]) -> list[RawPost]:
    """Keep the first post per id, then drop repeats of (user_id, raw text)."""
    seen_ids: set[str] = set()
    seen_text: set[tuple[str, str]] = set()
    out = []
    for p in posts:
        if p.post_id in seen_ids:
            continue
        seen_ids.add(p.post_id)
        key = (p.user_id, p.text)
        if key in seen_text:
            continue
        seen_text.add(key)
        out.append(p)
    return out


# Codepoint ranges stripped as emoji: pictographs, dingbats, symbols,
# regional indicators, variation selectors, joiners and tag characters.
EMOJI_RANGES: tuple[tuple[int, int], ...] = (
    (0x1F000, 0x1FAFF),  # mahjong .. symbols & pictographs extended-A
    (0x2300, 0x23FF),  # misc technical (watch, hourglass, ...)
    (0x2460, 0x24FF),  # enclosed alphanumerics
    (0x25A0, 0x25FF),  # geometric shapes
    (0x2600, 0x27BF),  # misc symbols, dingbats
    (0x2900, 0x297F),  # supplemental arrows-B
    (0x2B00, 0x2BFF),  # misc symbols and arrows
    (0x3030, 0x3030),
    (0x303D, 0x303D),
    (0x3297, 0x3299),
    (0x200D, 0x200D),  # zero-width joiner
    (0x20E3, 0x20E3),  # combining enclosing keycap
    (0xFE00, 0xFE0F),  # variation selectors
    (0xE0020, 0xE007F),  # tags
)

_EMOJI_RE = re.compile(
    "[" + "".join(f"\\U{lo:08x}-\\U{hi:08x}" for lo, hi in EMOJI_RANGES) + "]"
)
_TAG_RE = re.compile(r"<[^<>]*>")
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"(?<!\w)@\w+")
_HASHTAG_RE = re.compile(r"(?<!\w)#+(?=\w)")
_SPACE_RE = re.compile(r"\s+")


def _keep_char(text: str, i: int) -> bool:
    ch = text[i]
    if ch.isalnum() or ch.isspace():
        return True
    if ch == "'":
        return 0 < i < len(text) - 1 and text[i - 1].isalnum() and text[i + 1].isalnum()
    return False


def clean_text(raw: str) -> str:
    """Lowercase ``raw`` and strip markup, URLs, mentions, emoji and punctuation.

    Hashtags keep their word (``#MTA`` -> ``mta``). HTML entities are decoded
    after tag removal, so a decoded ``<`` or ``&`` is ordinary punctuation.
    Only letters, digits, intra-word apostrophes and single spaces survive.
    """
    if not raw:
        return ""
    text = _TAG_RE.sub(" ", raw)
    text = html.unescape(text)
    text = text.replace("’", "'").replace("‘", "'")
    text = _URL_RE.sub(" ", text)
    text = _MENTION_RE.sub(" ", text)
    text = _EMOJI_RE.sub(" ", text)
    text = _HASHTAG_RE.sub("", text)
    text = text.lower()
    text = "".join(ch if _keep_char(text, i) else " " for i, ch in enumerate(text))
    return _SPACE_RE.sub(" ", text).strip()


def tokenize(clean: str, stopwords: set[str] | frozenset[str] = frozenset()) -> list[str]:
    return [t for t in clean.split() if t not in stopwords]


def load_stopwords(path) -> frozenset[str]:
    """Read a one-word-per-line stopword file; ``#`` starts a comment line."""
    with open(path, encoding="utf-8") as fh:
        return _parse_wordlist(fh)


def _parse_wordlist(lines) -> frozenset[str]:
    words = set()
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


def default_stopwords() -> frozenset[str]:
    text = resources.files("deiatransit").joinpath("data/stopwords.txt").read_text("utf-8")
    return _parse_wordlist(text.splitlines())


def to_clean_post(post: RawPost, stopwords=frozenset()) -> CleanPost:
    clean = clean_text(post.text)
    return CleanPost(
        post_id=post.post_id,
        user_id=post.user_id,
        created_at=post.created_at,
        lon=post.lon,
        lat=post.lat,
        clean_text=clean,
        tokens=tuple(tokenize(clean, stopwords)),
    )


class TextPreprocessor(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping raw strings to token lists.

    Parameters
    ----------
    stopwords : set of str or None
        Tokens to drop. ``None`` uses the bundled English list.
    """

    def __init__(self, stopwords=None):
        self.stopwords = stopwords

    def fit(self, X, y=None):
        self.stopwords_ = (
            default_stopwords() if self.stopwords is None else frozenset(self.stopwords)
        )
        return self

    def transform(self, X):
        stop = getattr(self, "stopwords_", None)
        if stop is None:
            stop = default_stopwords() if self.stopwords is None else frozenset(self.stopwords)
        if isinstance(X, str):
            raise TypeError("expected an iterable of strings, got a single string")
        return [tokenize(clean_text(x), stop) for x in X]
