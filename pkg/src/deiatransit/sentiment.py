"""Lexicon valence scoring, three-way classification and sentiment segmentation."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from importlib import resources
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

__all__ = [
    "ALPHA",
    "Lexicon",
    "LexiconError",
    "Sentiment",
    "SentimentResult",
    "load_lexicon",
    "default_lexicon",
    "normalize",
    "score",
    "classify",
    "segment",
    "LexiconSentimentScorer",
]

log = logging.getLogger(__name__)

# Normalization constant: compound = S / sqrt(S**2 + ALPHA).
ALPHA = 15.0

NEGATION_SCALAR = -0.74
BOOSTER_STEP = 0.293

NEGATORS = frozenset(
    """not no never none nobody nothing neither nor nowhere cannot cant
    dont doesnt didnt isnt arent wasnt werent wont wouldnt shouldnt couldnt
    hasnt havent hadnt aint without don't doesn't didn't isn't aren't wasn't
    weren't won't wouldn't shouldn't couldn't hasn't haven't hadn't ain't""".split()
)
BOOSTERS = {
    **dict.fromkeys(
        """absolutely completely deeply enormously entirely especially extremely
        greatly highly hugely incredibly particularly really so substantially
        thoroughly totally truly utterly very""".split(),
        BOOSTER_STEP,
    ),
    **dict.fromkeys(
        """almost barely hardly kinda marginally partly scarcely slightly
        somewhat sorta""".split(),
        -BOOSTER_STEP,
    ),
}


class LexiconError(ValueError):
    pass


class Sentiment(str, enum.Enum):
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[str, float]

    def __post_init__(self):
        for tok, val in self.entries.items():
            if tok != tok.lower():
                raise LexiconError(f"lexicon token {tok!r} is not lowercase")
            if not math.isfinite(val):
                raise LexiconError(f"valence for {tok!r} is not finite")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, token):
        return token in self.entries

    def get(self, token, default=None):
        return self.entries.get(token, default)


@dataclass(frozen=True)
class SentimentResult:
    compound: float
    label: Sentiment
    hit_count: int


def _parse_lexicon(lines: Iterable[str], source: str, dup_level: int = logging.WARNING) -> Lexicon:
    entries: dict[str, float] = {}
    dupes: list[str] = []
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\n\r")
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            raise LexiconError(f"{source}:{lineno}: expected token<TAB>valence")
        token = cols[0].strip().lower()
        try:
            val = float(cols[1])
        except ValueError:
            raise LexiconError(f"{source}:{lineno}: non-numeric valence {cols[1]!r}") from None
        if not math.isfinite(val):
            raise LexiconError(f"{source}:{lineno}: non-finite valence")
        if token in entries:
            dupes.append(f"{token!r} (line {lineno})")
        entries[token] = val
    if not entries:
        raise LexiconError(f"{source}: lexicon is empty")
    if dupes:
        log.log(dup_level, "%s: %d duplicate tokens, last value wins: %s", source, len(dupes), ", ".join(dupes))
    return Lexicon(entries)


def load_lexicon(path) -> Lexicon:
    """Load a tab-separated ``token<TAB>mean_valence[<TAB>...]`` file."""
    try:
        with open(path, encoding="utf-8") as fh:
            return _parse_lexicon(fh, str(path))
    except OSError as exc:
        raise LexiconError(f"cannot read lexicon {path}: {exc}") from exc


def default_lexicon() -> Lexicon:
    text = resources.files("deiatransit").joinpath("data/vader_lexicon.txt").read_text("utf-8")
    # the bundled file has known case collisions (":D" and ":d"), so stay quiet
    return _parse_lexicon(text.splitlines(), "vader_lexicon.txt", logging.DEBUG)


def normalize(total: float, alpha: float = ALPHA) -> float:
    return total / math.sqrt(total * total + alpha)


def classify(compound: float, neutral_band: float = 0.0) -> Sentiment:
    """Map a compound score to a class; ``|compound| <= neutral_band`` is neutral."""
    if not -1.0 <= compound <= 1.0 or math.isnan(compound):
        raise ValueError(f"compound score {compound!r} outside [-1, 1]")
    if neutral_band < 0:
        raise ValueError("neutral_band must be >= 0")
    if compound == 0.0 or abs(compound) <= neutral_band:
        return Sentiment.NEUTRAL
    return Sentiment.POSITIVE if compound > 0 else Sentiment.NEGATIVE


def _heuristic_valences(tokens: Sequence[str], lex: Lexicon) -> list[float]:
    vals = []
    for i, tok in enumerate(tokens):
        v = lex.get(tok)
        if v is None:
            continue
        if i > 0 and tokens[i - 1] in BOOSTERS and v != 0:
            step = BOOSTERS[tokens[i - 1]]
            v = v + step if v > 0 else v - step
        if any(t in NEGATORS for t in tokens[max(0, i - 3):i]):
            v *= NEGATION_SCALAR
        vals.append(v)
    return vals


def score(
    tokens: Sequence[str],
    lex: Lexicon,
    heuristics: bool = False,
    neutral_band: float = 0.0,
) -> SentimentResult:
    """Sum lexicon valences over ``tokens`` and normalize into (-1, 1).

    With ``heuristics`` on, a preceding intensifier shifts a hit's valence
    away from zero and a negator within three tokens flips and damps it.
    """
    if heuristics:
        vals = _heuristic_valences(tokens, lex)
    else:
        vals = [lex.entries[t] for t in tokens if t in lex.entries]
    total = math.fsum(vals)
    compound = normalize(total) if total else 0.0
    return SentimentResult(compound, classify(compound, neutral_band), len(vals))


def segment(scored: Iterable[tuple[object, SentimentResult]]) -> dict[Sentiment, list]:
    """Split ``(post, result)`` pairs into per-class lists, order preserved."""
    out = {s: [] for s in Sentiment}
    for post, res in scored:
        out[res.label].append((post, res))
    return out


class LexiconSentimentScorer(BaseEstimator):
    """Rule-based sentiment classifier over token lists.

    Parameters
    ----------
    lexicon : Lexicon, path or None
        ``None`` uses the bundled valence lexicon.
    heuristics : bool
        Enable negation and intensifier adjustments.
    neutral_band : float
        Compound scores with magnitude at or below this are neutral.
    """

    def __init__(self, lexicon=None, heuristics=False, neutral_band=0.0):
        self.lexicon = lexicon
        self.heuristics = heuristics
        self.neutral_band = neutral_band

    def fit(self, X=None, y=None):
        if self.lexicon is None:
            self.lexicon_ = default_lexicon()
        elif isinstance(self.lexicon, Lexicon):
            self.lexicon_ = self.lexicon
        else:
            self.lexicon_ = load_lexicon(self.lexicon)
        if self.neutral_band < 0 or self.neutral_band >= 1:
            raise ValueError("neutral_band must be in [0, 1)")
        return self

    def _results(self, X):
        if not hasattr(self, "lexicon_"):
            self.fit()
        return [score(t, self.lexicon_, self.heuristics, self.neutral_band) for t in X]

    def score_samples(self, X) -> np.ndarray:
        return np.array([r.compound for r in self._results(X)], dtype=float)

    def predict(self, X) -> np.ndarray:
        return np.array([r.label.value for r in self._results(X)], dtype=object)
