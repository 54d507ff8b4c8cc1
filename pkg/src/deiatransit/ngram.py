"""Bigram counts, chain-rule sequence probability and class-bigram word clustering.

The clustering objective for a word-to-class map ``g`` is the class-bigram
log-likelihood

    F = sum_w N(w) log N(w)
        + sum_{a,b} N(a,b) log( N(a,b) / (N(a) N(b)) )

where ``N(a,b)`` counts adjacent word pairs whose classes are ``(a, b)`` and
``N(a)`` sums the unigram counts of the words in class ``a``. It is maximized
by greedy exchange: each word in turn moves to the class giving the largest F.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

__all__ = [
    "BigramStats",
    "ClassMap",
    "SequenceScore",
    "count",
    "sequence_prob",
    "top_bigrams",
    "class_likelihood",
    "initial_class_map",
    "cluster_exchange",
    "ExchangeWordClusterer",
]


@dataclass(frozen=True)
class BigramStats:
    vocab: tuple[str, ...]
    N: int
    unigrams: dict[str, int]
    bigrams: dict[tuple[str, str], int]

    @property
    def W(self) -> int:
        return len(self.vocab)

    @property
    def n_bigrams(self) -> int:
        return sum(self.bigrams.values())

    def frequency_order(self) -> list[str]:
        """Vocabulary sorted by descending count, ties lexicographic."""
        return sorted(self.vocab, key=lambda w: (-self.unigrams[w], w))


@dataclass(frozen=True)
class ClassMap:
    G: int
    assign: dict[str, int]

    def __post_init__(self):
        if self.G < 1:
            raise ValueError("G must be >= 1")
        bad = {w: c for w, c in self.assign.items() if not 0 <= c < self.G}
        if bad:
            raise ValueError(f"class indices out of range [0, {self.G}): {bad}")

    def members(self) -> list[list[str]]:
        out = [[] for _ in range(self.G)]
        for w in sorted(self.assign):
            out[self.assign[w]].append(w)
        return out


@dataclass(frozen=True)
class SequenceScore:
    prob: float
    log_prob: float
    factors: tuple[float, ...]
    zero_step: int | None = None
    oov: tuple[str, ...] = field(default=())


def count(corpus: Iterable[Sequence[str]]) -> BigramStats:
    """Unigram and within-document adjacent-pair counts."""
    uni: Counter = Counter()
    bi: Counter = Counter()
    for doc in corpus:
        uni.update(doc)
        bi.update(zip(doc, doc[1:]))
    total = sum(uni.values())
    if total == 0:
        raise ValueError("cannot count an empty corpus")
    return BigramStats(tuple(sorted(uni)), total, dict(uni), dict(bi))


def sequence_prob(stats: BigramStats, seq: Sequence[str]) -> SequenceScore:
    """Maximum-likelihood bigram chain probability of ``seq``.

    ``P(w1) * prod P(w_n | w_{n-1})`` with ``P(w) = N(w)/N`` and
    ``P(w|v) = N(v,w)/N(v)``. The first zero factor is reported in
    ``zero_step`` (0-based); out-of-vocabulary tokens are listed in ``oov``.
    """
    if not seq:
        raise ValueError("sequence must be non-empty")
    oov = tuple(t for t in seq if t not in stats.unigrams)
    factors = [stats.unigrams.get(seq[0], 0) / stats.N]
    for v, w in zip(seq, seq[1:]):
        nv = stats.unigrams.get(v, 0)
        factors.append(stats.bigrams.get((v, w), 0) / nv if nv else 0.0)
    zero_step = next((i for i, f in enumerate(factors) if f == 0.0), None)
    if zero_step is not None:
        return SequenceScore(0.0, -math.inf, tuple(factors), zero_step, oov)
    log_prob = math.fsum(math.log(f) for f in factors)
    return SequenceScore(math.exp(log_prob), log_prob, tuple(factors), None, oov)


def top_bigrams(stats: BigramStats, n: int) -> list[tuple[str, str, int]]:
    if n < 1:
        raise ValueError("n must be >= 1")
    ranked = sorted(stats.bigrams.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(v, w, c) for (v, w), c in ranked[:n]]


def _xlogx_sum(a: np.ndarray) -> float:
    pos = a[a > 0]
    return float(np.sum(pos * np.log(pos)))


class _Arrays:
    """Index-based view of BigramStats for vectorized likelihoods."""

    def __init__(self, stats: BigramStats):
        self.index = {w: i for i, w in enumerate(stats.vocab)}
        self.uni = np.array([stats.unigrams[w] for w in stats.vocab], dtype=float)
        pairs = sorted(stats.bigrams.items())
        self.bv = np.array([self.index[v] for (v, _), _ in pairs], dtype=np.int64)
        self.bw = np.array([self.index[w] for (_, w), _ in pairs], dtype=np.int64)
        self.bc = np.array([c for _, c in pairs], dtype=float)
        self.word_term = _xlogx_sum(self.uni)

    def labels(self, cm: ClassMap, vocab) -> np.ndarray:
        try:
            return np.array([cm.assign[w] for w in vocab], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"class map has no entry for word {exc.args[0]!r}") from None

    def class_counts(self, labels: np.ndarray, G: int):
        n = np.bincount(labels, weights=self.uni, minlength=G).astype(float)
        C = np.zeros((G, G))
        np.add.at(C, (labels[self.bv], labels[self.bw]), self.bc)
        return n, C


def _class_term(n: np.ndarray, C: np.ndarray) -> float:
    # sum C log C - sum_a row_a log n_a - sum_b col_b log n_b; empty classes have zero rows/cols
    row = C.sum(axis=1)
    col = C.sum(axis=0)
    logn = np.log(np.where(n > 0, n, 1.0))
    return _xlogx_sum(C) - float(row @ logn) - float(col @ logn)


def class_likelihood(stats: BigramStats, cm: ClassMap) -> float:
    arr = _Arrays(stats)
    n, C = arr.class_counts(arr.labels(cm, stats.vocab), cm.G)
    return arr.word_term + _class_term(n, C)


def initial_class_map(stats: BigramStats, G: int) -> ClassMap:
    """The G-1 most frequent words get singleton classes; the rest share class G-1."""
    if not 1 <= G <= stats.W:
        raise ValueError(f"G must be in [1, {stats.W}], got {G}")
    order = stats.frequency_order()
    assign = {w: min(i, G - 1) for i, w in enumerate(order)}
    return ClassMap(G, assign)


def cluster_exchange(
    stats: BigramStats,
    G: int,
    max_sweeps: int = 50,
    seed=None,
    tol: float = 1e-9,
) -> tuple[ClassMap, list[float]]:
    """Greedy exchange clustering maximizing the class-bigram likelihood.

    Words are visited in descending frequency. A word moves only when some
    class improves F by more than ``tol`` (relative); among the best
    improving classes the lowest index wins. Sweeping stops after a sweep
    with no moves or after ``max_sweeps`` sweeps.

    Returns the final map and the F history: the initial value followed by
    the value after each sweep. ``seed`` is accepted for interface symmetry;
    initialization and visit order are deterministic.
    """
    if max_sweeps < 0:
        raise ValueError("max_sweeps must be >= 0")
    cm = initial_class_map(stats, G)
    arr = _Arrays(stats)
    labels = arr.labels(cm, stats.vocab)
    n, C = arr.class_counts(labels, G)
    F = arr.word_term + _class_term(n, C)
    history = [F]
    if G == 1:
        return cm, history

    W = stats.W
    self_loop = np.zeros(W)
    out_nbrs: list[list[tuple[int, float]]] = [[] for _ in range(W)]
    in_nbrs: list[list[tuple[int, float]]] = [[] for _ in range(W)]
    for v, w, c in zip(arr.bv, arr.bw, arr.bc):
        if v == w:
            self_loop[v] += c
        else:
            out_nbrs[v].append((w, c))
            in_nbrs[w].append((v, c))

    order = [arr.index[w] for w in stats.frequency_order()]
    for _ in range(max_sweeps):
        moved = False
        for i in order:
            a = labels[i]
            out_cls = np.zeros(G)
            in_cls = np.zeros(G)
            for j, c in out_nbrs[i]:
                out_cls[labels[j]] += c
            for j, c in in_nbrs[i]:
                in_cls[labels[j]] += c
            C[a, :] -= out_cls
            C[:, a] -= in_cls
            C[a, a] -= self_loop[i]
            n[a] -= arr.uni[i]
            scores = np.empty(G)
            for b in range(G):
                C[b, :] += out_cls
                C[:, b] += in_cls
                C[b, b] += self_loop[i]
                n[b] += arr.uni[i]
                scores[b] = _class_term(n, C)
                C[b, :] -= out_cls
                C[:, b] -= in_cls
                C[b, b] -= self_loop[i]
                n[b] -= arr.uni[i]
            margin = tol * max(1.0, abs(scores[a]))
            best = scores.max()
            if best > scores[a] + margin:
                b = int(np.flatnonzero(scores >= best - margin)[0])
            else:
                b = a
            C[b, :] += out_cls
            C[:, b] += in_cls
            C[b, b] += self_loop[i]
            n[b] += arr.uni[i]
            if b != a:
                labels[i] = b
                moved = True
        # recompute from scratch so the history carries no accumulated drift
        n, C = arr.class_counts(labels, G)
        F_new = arr.word_term + _class_term(n, C)
        history.append(F_new)
        if not moved:
            break
    return ClassMap(G, {w: int(labels[arr.index[w]]) for w in stats.vocab}), history


class ExchangeWordClusterer(BaseEstimator):
    """Bigram word clustering estimator.

    Parameters
    ----------
    n_classes : int
        Number of word classes G.
    max_sweeps : int
        Upper bound on full passes over the vocabulary.

    Attributes
    ----------
    stats_ : BigramStats
    class_map_ : ClassMap
    labels_ : ndarray of shape (W,)
        Class per word of ``stats_.vocab``.
    history_ : list of float
    """

    def __init__(self, n_classes=2, max_sweeps=50):
        self.n_classes = n_classes
        self.max_sweeps = max_sweeps

    def fit(self, X, y=None):
        self.stats_ = count(X)
        self.class_map_, self.history_ = cluster_exchange(
            self.stats_, self.n_classes, self.max_sweeps
        )
        self.labels_ = np.array([self.class_map_.assign[w] for w in self.stats_.vocab])
        self.n_sweeps_ = len(self.history_) - 1
        return self

    def predict(self, words) -> np.ndarray:
        """Class index per word; -1 for words outside the fitted vocabulary."""
        if not hasattr(self, "class_map_"):
            raise AttributeError("ExchangeWordClusterer is not fitted yet; call fit first")
        return np.array([self.class_map_.assign.get(w, -1) for w in words], dtype=np.int64)

    def score(self, X=None, y=None) -> float:
        return self.history_[-1]
