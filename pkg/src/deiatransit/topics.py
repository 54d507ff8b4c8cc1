"""LDA topic mining by collapsed Gibbs sampling, with UMass-based choice of K."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, TransformerMixin

__all__ = [
    "TopicCorpus",
    "TopicModel",
    "build_topic_corpus",
    "lda_fit",
    "top_words",
    "topic_prevalence",
    "umass_coherence",
    "model_coherence",
    "select_k",
    "GibbsLDA",
]

DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000


def default_alpha(K: int) -> float:
    return 50.0 / K


@dataclass(frozen=True)
class TopicCorpus:
    docs: tuple[np.ndarray, ...]
    vocab: tuple[str, ...]
    doc_ids: tuple[str, ...]
    n_dropped: int = 0

    @property
    def V(self) -> int:
        return len(self.vocab)

    @property
    def n_tokens(self) -> int:
        return int(sum(len(d) for d in self.docs))

    @classmethod
    def from_token_lists(cls, docs: Sequence[Sequence[str]], doc_ids=None) -> "TopicCorpus":
        """Wrap token lists as-is: every token enters the vocabulary."""
        vocab = tuple(sorted({t for d in docs for t in d}))
        index = {w: i for i, w in enumerate(vocab)}
        ids = tuple(doc_ids) if doc_ids is not None else tuple(str(i) for i in range(len(docs)))
        arrays = tuple(np.array([index[t] for t in d], dtype=np.int64) for d in docs)
        return cls(arrays, vocab, ids)


@dataclass
class TopicModel:
    K: int
    phi: np.ndarray
    theta: np.ndarray
    assignments: list[np.ndarray]
    alpha: float
    beta: float
    seed: int
    iterations: int
    vocab: tuple[str, ...]
    doc_lengths: np.ndarray
    loglik: np.ndarray = field(default_factory=lambda: np.zeros(0))


def build_topic_corpus(segment, min_count: int = 2, min_tokens: int = 3) -> TopicCorpus:
    """Map posts to token-id documents over a frequency-pruned vocabulary.

    ``segment`` holds objects with ``post_id`` and ``tokens`` attributes.
    Tokens occurring fewer than ``min_count`` times in the segment are
    dropped, then documents left with fewer than ``min_tokens`` tokens.
    """
    freq = Counter(t for p in segment for t in p.tokens)
    kept = {w for w, c in freq.items() if c >= min_count}
    pruned = []
    dropped = 0
    for p in segment:
        toks = [t for t in p.tokens if t in kept]
        if len(toks) < max(min_tokens, 1):
            dropped += 1
            continue
        pruned.append((p.post_id, toks))
    if not pruned:
        raise ValueError(
            f"topic corpus is empty (min_count={min_count}, min_tokens={min_tokens}, "
            f"{len(segment)} posts in)"
        )
    vocab = tuple(sorted({t for _, toks in pruned for t in toks}))
    index = {w: i for i, w in enumerate(vocab)}
    docs = tuple(np.array([index[t] for t in toks], dtype=np.int64) for _, toks in pruned)
    return TopicCorpus(docs, vocab, tuple(pid for pid, _ in pruned), dropped)


@njit(cache=True)
def _sweep(words, doc_of, z, ndk, nkw, nk, alpha, beta, u):
    K, V = nkw.shape
    vbeta = V * beta
    p = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        d = doc_of[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(K):
            total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
            p[t] = total
        r = u[i] * total
        k = 0
        while k < K - 1 and p[k] <= r:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@njit(cache=True)
def _fold_in_sweep(words, doc_of, z, ndk, phi, alpha, u):
    K = phi.shape[0]
    p = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        d = doc_of[i]
        ndk[d, z[i]] -= 1
        total = 0.0
        for t in range(K):
            total += (ndk[d, t] + alpha) * phi[t, w]
            p[t] = total
        r = u[i] * total
        k = 0
        while k < K - 1 and p[k] <= r:
            k += 1
        z[i] = k
        ndk[d, k] += 1


@njit(cache=True)
def _log_joint(ndk, nkw, nk, nd, alpha, beta):
    K, V = nkw.shape
    D = ndk.shape[0]
    ll = K * (math.lgamma(V * beta) - V * math.lgamma(beta))
    for k in range(K):
        ll -= math.lgamma(nk[k] + V * beta)
        for w in range(V):
            if nkw[k, w] > 0:
                ll += math.lgamma(nkw[k, w] + beta) - math.lgamma(beta)
    ll += D * (math.lgamma(K * alpha) - K * math.lgamma(alpha))
    for d in range(D):
        ll -= math.lgamma(nd[d] + K * alpha)
        for k in range(K):
            if ndk[d, k] > 0:
                ll += math.lgamma(ndk[d, k] + alpha) - math.lgamma(alpha)
    return ll


def _check_counts(doc_of, words, z, ndk, nkw, nk, nd):
    K = nk.shape[0]
    if not np.array_equal(ndk.sum(axis=1), nd):
        raise AssertionError("doc-topic counts do not sum to document lengths")
    if not np.array_equal(nkw.sum(axis=1), nk):
        raise AssertionError("topic-word counts do not sum to topic totals")
    if nk.sum() != words.shape[0]:
        raise AssertionError("topic totals do not sum to the token count")
    expect_ndk = np.zeros_like(ndk)
    np.add.at(expect_ndk, (doc_of, z), 1)
    expect_nkw = np.zeros_like(nkw)
    np.add.at(expect_nkw, (z, words), 1)
    if not (np.array_equal(expect_ndk, ndk) and np.array_equal(expect_nkw, nkw)):
        raise AssertionError("count matrices disagree with topic assignments")
    if z.size and (z.min() < 0 or z.max() >= K):
        raise AssertionError("topic assignment out of range")


def lda_fit(
    corpus: TopicCorpus,
    K: int,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    check_every: int = 0,
) -> TopicModel:
    """Fit LDA by collapsed Gibbs sampling.

    Each token starts on a uniformly random topic. Every iteration resamples
    each token in corpus order from

        P(z = k | rest) ~ (n_dk + alpha) * (n_kw + beta) / (n_k + V * beta)

    with the token's own assignment removed from the counts. ``phi`` and
    ``theta`` are the smoothed estimates from the final state. With
    ``check_every > 0`` the count matrices are cross-checked against the
    assignments every that many iterations and after the last one.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    n_tokens = corpus.n_tokens
    if K > n_tokens:
        raise ValueError(f"K={K} exceeds the number of tokens ({n_tokens})")
    if alpha is None:
        alpha = default_alpha(K)
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")

    rng = np.random.default_rng(seed)
    D, V = len(corpus.docs), corpus.V
    nd = np.array([len(d) for d in corpus.docs], dtype=np.int64)
    words = np.concatenate(corpus.docs).astype(np.int64)
    doc_of = np.repeat(np.arange(D, dtype=np.int64), nd)
    z = rng.integers(0, K, size=n_tokens, dtype=np.int64)

    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    loglik = np.empty(iterations)
    for it in range(iterations):
        u = rng.random(n_tokens)
        _sweep(words, doc_of, z, ndk, nkw, nk, float(alpha), float(beta), u)
        loglik[it] = _log_joint(ndk, nkw, nk, nd, float(alpha), float(beta))
        if check_every and ((it + 1) % check_every == 0 or it + 1 == iterations):
            _check_counts(doc_of, words, z, ndk, nkw, nk, nd)

    phi = (nkw + beta) / (nk[:, None] + V * beta)
    theta = (ndk + alpha) / (nd[:, None] + K * alpha)
    phi /= phi.sum(axis=1, keepdims=True)
    theta /= theta.sum(axis=1, keepdims=True)
    splits = np.cumsum(nd)[:-1]
    return TopicModel(
        K=K,
        phi=phi,
        theta=theta,
        assignments=np.split(z.copy(), splits),
        alpha=float(alpha),
        beta=float(beta),
        seed=seed,
        iterations=iterations,
        vocab=corpus.vocab,
        doc_lengths=nd,
        loglik=loglik,
    )


def top_words(model: TopicModel, k: int, n: int = 10) -> list[tuple[str, float]]:
    if not 0 <= k < model.K:
        raise ValueError(f"topic index {k} out of range for K={model.K}")
    row = model.phi[k]
    order = sorted(range(len(model.vocab)), key=lambda j: (-row[j], model.vocab[j]))
    return [(model.vocab[j], float(row[j])) for j in order[:n]]


def topic_prevalence(model: TopicModel) -> np.ndarray:
    """Token-weighted share of each topic across the corpus."""
    weights = model.doc_lengths.astype(float)
    shares = weights @ model.theta / weights.sum()
    return shares / shares.sum()


def _doc_term(corpus: TopicCorpus) -> np.ndarray:
    X = np.zeros((len(corpus.docs), corpus.V), dtype=bool)
    for i, d in enumerate(corpus.docs):
        X[i, d] = True
    return X


def umass_coherence(word_ids: Sequence[int], doc_term: np.ndarray) -> float:
    """Mean over ranked word pairs of log((D(w_i, w_j) + 1) / D(w_j)), j ranked above i."""
    X = doc_term[:, list(word_ids)].astype(np.int64)
    df = X.sum(axis=0)
    co = X.T @ X
    vals = []
    for i in range(1, len(word_ids)):
        for j in range(i):
            vals.append(math.log((co[i, j] + 1) / df[j]))
    return float(np.mean(vals)) if vals else 0.0


def model_coherence(model: TopicModel, corpus: TopicCorpus, top_n: int = 10) -> list[float]:
    X = _doc_term(corpus)
    index = {w: i for i, w in enumerate(corpus.vocab)}
    return [
        umass_coherence([index[w] for w, _ in top_words(model, k, top_n)], X)
        for k in range(model.K)
    ]


def select_k(
    corpus: TopicCorpus,
    k_candidates: Sequence[int],
    seed: int = 0,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    iterations: int = DEFAULT_ITERATIONS,
    top_n: int = 10,
) -> tuple[int, list[tuple[int, float]], dict[int, TopicModel]]:
    """Fit one model per candidate K and keep the most coherent.

    The run for the i-th candidate uses seed ``seed + i``. Ties go to the
    smaller K. Returns ``(K*, [(K, mean_coherence), ...], models)``.
    """
    cands = list(k_candidates)
    if not cands:
        raise ValueError("k_candidates must be non-empty")
    table = []
    models = {}
    for i, K in enumerate(cands):
        model = lda_fit(corpus, K, alpha, beta, iterations, seed + i)
        table.append((K, float(np.mean(model_coherence(model, corpus, top_n)))))
        models[K] = model
    best = max(table, key=lambda kc: (kc[1], -kc[0]))[0]
    return best, table, models


class GibbsLDA(TransformerMixin, BaseEstimator):
    """LDA estimator over token lists.

    Parameters
    ----------
    n_topics : int
    alpha : float or None
        Document-topic prior; ``None`` means ``50 / n_topics``.
    beta : float
        Topic-word prior.
    n_iter : int
        Gibbs iterations for ``fit``; ``transform`` reuses it for fold-in.
    random_state : int

    Attributes
    ----------
    components_ : ndarray of shape (n_topics, V)
        Topic-word distributions.
    doc_topic_ : ndarray of shape (D, n_topics)
    vocab_ : tuple of str
    model_ : TopicModel
    """

    def __init__(self, n_topics=2, alpha=None, beta=DEFAULT_BETA, n_iter=DEFAULT_ITERATIONS,
                 random_state=0):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta = beta
        self.n_iter = n_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        corpus = X if isinstance(X, TopicCorpus) else TopicCorpus.from_token_lists(X)
        self.model_ = lda_fit(
            corpus, self.n_topics, self.alpha, self.beta, self.n_iter, self.random_state
        )
        self.components_ = self.model_.phi
        self.doc_topic_ = self.model_.theta
        self.vocab_ = corpus.vocab
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).doc_topic_

    def transform(self, X):
        """Doc-topic distributions for new token lists, topics held fixed."""
        if not hasattr(self, "model_"):
            raise AttributeError("GibbsLDA is not fitted yet; call fit first")
        index = {w: i for i, w in enumerate(self.vocab_)}
        docs = [np.array([index[t] for t in d if t in index], dtype=np.int64) for d in X]
        K, alpha = self.model_.K, self.model_.alpha
        nd = np.array([len(d) for d in docs], dtype=np.int64)
        if nd.sum() == 0:
            return np.full((len(docs), K), 1.0 / K)
        rng = np.random.default_rng(self.random_state)
        words = np.concatenate(docs)
        doc_of = np.repeat(np.arange(len(docs), dtype=np.int64), nd)
        z = rng.integers(0, K, size=words.size, dtype=np.int64)
        ndk = np.zeros((len(docs), K), dtype=np.int64)
        np.add.at(ndk, (doc_of, z), 1)
        for _ in range(self.n_iter):
            _fold_in_sweep(words, doc_of, z, ndk, self.components_, alpha, rng.random(words.size))
        theta = (ndk + alpha) / (nd[:, None] + K * alpha)
        return theta / theta.sum(axis=1, keepdims=True)

    def top_words(self, k, n=10):
        return top_words(self.model_, k, n)
