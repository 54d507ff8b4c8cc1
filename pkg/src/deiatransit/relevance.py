"""Two-stage keyword relevance filter (DEI keywords, then transportation keywords)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .corpus import CleanPost

__all__ = [
    "KeywordList",
    "RelevanceTag",
    "RelevanceResult",
    "load_keywords",
    "default_keywords",
    "matches",
    "tag_and_filter",
    "RelevanceFilter",
]

log = logging.getLogger(__name__)

MATCH_MODES = ("whole", "substring")

# Sizes printed alongside the published lists; kept as labels only.
STATED_SIZES = {"dei": 46, "transport": 51}


@dataclass(frozen=True)
class KeywordList:
    name: str
    words: frozenset[str]
    stated_size: int | None = None

    def __post_init__(self):
        if not self.words:
            raise ValueError(f"keyword list {self.name!r} is empty")
        for w in self.words:
            if not w or w != w.lower() or any(c.isspace() for c in w):
                raise ValueError(f"keyword {w!r} must be a lowercase single token")

    @classmethod
    def from_lines(cls, name: str, lines: Iterable[str], stated_size=None) -> "KeywordList":
        seen = set()
        dupes = []
        for line in lines:
            w = line.strip().lower()
            if not w or w.startswith("#"):
                continue
            if w in seen:
                dupes.append(w)
            seen.add(w)
        if dupes:
            log.warning("keyword list %r: dropped duplicates %s", name, sorted(set(dupes)))
        return cls(name, frozenset(seen), stated_size)


@dataclass(frozen=True)
class RelevanceTag:
    dei: bool
    transport: bool

    @property
    def relevant(self) -> bool:
        return self.dei and self.transport


@dataclass
class RelevanceResult:
    tagged: list[tuple[CleanPost, RelevanceTag]]
    retained: list[CleanPost]
    stage1_kept: int
    stage2_kept: int
    n_input: int = field(default=0)

    @property
    def ratio(self) -> float:
        """Percentage of input posts that passed both stages."""
        return 100.0 * self.stage2_kept / self.n_input if self.n_input else 0.0

    def summary(self) -> str:
        return f"stage1_kept={self.stage1_kept} stage2_kept={self.stage2_kept} ratio={self.ratio:.2f}"


def load_keywords(path, name: str) -> KeywordList:
    with open(path, encoding="utf-8") as fh:
        return KeywordList.from_lines(name, fh, STATED_SIZES.get(name))


def default_keywords(name: str) -> KeywordList:
    if name not in STATED_SIZES:
        raise ValueError(f"no bundled keyword list named {name!r}")
    text = resources.files("deiatransit").joinpath(f"data/{name}_keywords.txt").read_text("utf-8")
    return KeywordList.from_lines(name, text.splitlines(), STATED_SIZES[name])


def matches(tokens: Sequence[str], kw: KeywordList, mode: str = "whole") -> bool:
    """True if some token equals a keyword (or contains one, in substring mode)."""
    if mode == "whole":
        return any(t in kw.words for t in tokens)
    if mode == "substring":
        return any(w in t for t in tokens for w in kw.words)
    raise ValueError(f"unknown match mode {mode!r}; expected one of {MATCH_MODES}")


def tag_and_filter(
    corpus: Sequence[CleanPost],
    dei: KeywordList,
    transport: KeywordList,
    mode: str = "whole",
) -> RelevanceResult:
    """Run the DEI stage, then the transportation stage on its survivors."""
    tagged = []
    retained = []
    stage1 = 0
    for post in corpus:
        is_dei = matches(post.tokens, dei, mode)
        # posts dropped at stage 1 never reach stage 2
        is_tr = is_dei and matches(post.tokens, transport, mode)
        stage1 += is_dei
        tag = RelevanceTag(is_dei, is_tr)
        tagged.append((post, tag))
        if tag.relevant:
            retained.append(post)
    return RelevanceResult(tagged, retained, stage1, len(retained), len(corpus))


class RelevanceFilter(BaseEstimator):
    """Keyword relevance classifier over token lists.

    ``predict`` returns a boolean mask of posts passing both stages.
    Keyword lists default to the bundled DEI and transportation lists.
    """

    def __init__(self, dei_keywords=None, transport_keywords=None, match="whole"):
        self.dei_keywords = dei_keywords
        self.transport_keywords = transport_keywords
        self.match = match

    def _as_list(self, value, name):
        if value is None:
            return default_keywords(name)
        if isinstance(value, KeywordList):
            return value
        return KeywordList.from_lines(name, value)

    def fit(self, X=None, y=None):
        if self.match not in MATCH_MODES:
            raise ValueError(f"match must be one of {MATCH_MODES}, got {self.match!r}")
        self.dei_ = self._as_list(self.dei_keywords, "dei")
        self.transport_ = self._as_list(self.transport_keywords, "transport")
        return self

    def tag(self, X) -> list[RelevanceTag]:
        if not hasattr(self, "dei_"):
            self.fit()
        out = []
        for tokens in X:
            d = matches(tokens, self.dei_, self.match)
            out.append(RelevanceTag(d, d and matches(tokens, self.transport_, self.match)))
        return out

    def predict(self, X) -> np.ndarray:
        return np.array([t.relevant for t in self.tag(X)], dtype=bool)
