"""Latent Dirichlet allocation fitted by collapsed Gibbs sampling, with
fold-in inference for new documents and per-profile topic mixtures."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been before being below
between both but by can could did do does doing down during each few for from further had has have
having he her here hers herself him himself his how i if in into is it its itself just me more most
my myself no nor not now of off on once only or other our ours ourselves out over own same she should
so some such than that the their theirs them themselves then there these they this those through to
too under until up very was we were what when where which while who whom why will with would you your
yours yourself yourselves today tonight im its got get gets going go went really still also one two
""".split())

_TOKEN = re.compile(r"[^\W_]+")

INFER_SWEEPS = 50


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN.findall(text.lower()) if t not in STOPWORDS]


@njit(cache=True)
def _gibbs_sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, u):
    n_topics = nk.shape[0]
    p = np.empty(n_topics)
    for t in range(words.shape[0]):
        d = docs[t]
        w = words[t]
        k = z[t]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for kk in range(n_topics):
            p[kk] = (ndk[d, kk] + alpha) * (nkw[kk, w] + beta) / (nk[kk] + vbeta)
            total += p[kk]
        r = u[t] * total
        k = n_topics - 1
        acc = 0.0
        for kk in range(n_topics):
            acc += p[kk]
            if r < acc:
                k = kk
                break
        z[t] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@njit(cache=True)
def _fold_in(words, z, topic_word, alpha, u):
    n_topics = topic_word.shape[0]
    n = words.shape[0]
    counts = np.zeros(n_topics)
    for t in range(n):
        counts[z[t]] += 1
    p = np.empty(n_topics)
    sweeps = u.shape[0] // n
    for s in range(sweeps):
        for t in range(n):
            w = words[t]
            counts[z[t]] -= 1
            total = 0.0
            for kk in range(n_topics):
                p[kk] = (counts[kk] + alpha) * topic_word[kk, w]
                total += p[kk]
            r = u[s * n + t] * total
            k = n_topics - 1
            acc = 0.0
            for kk in range(n_topics):
                acc += p[kk]
                if r < acc:
                    k = kk
                    break
            z[t] = k
            counts[k] += 1
    out = np.empty(n_topics)
    denom = n + n_topics * alpha
    for kk in range(n_topics):
        out[kk] = (counts[kk] + alpha) / denom
    return out


@dataclass(frozen=True, eq=False)
class LdaModel:
    theta: int
    vocabulary: dict[str, int]
    topic_word: np.ndarray
    alpha: float
    beta: float
    seed: int
    iterations: int
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.theta < 2:
            raise ValueError("need at least 2 topics")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.topic_word.shape != (self.theta, len(self.vocabulary)):
            raise ValueError("topic_word shape does not match theta x vocabulary")

    def to_dict(self) -> dict:
        vocab = sorted(self.vocabulary, key=self.vocabulary.get)
        return {
            "theta": self.theta,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "vocabulary": vocab,
            "topic_word": self.topic_word.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LdaModel":
        return cls(
            theta=int(d["theta"]),
            vocabulary={w: i for i, w in enumerate(d["vocabulary"])},
            topic_word=np.asarray(d["topic_word"], dtype=np.float64),
            alpha=float(d["alpha"]),
            beta=float(d["beta"]),
            seed=int(d["seed"]),
            iterations=int(d["iterations"]),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def save_lda(model: LdaModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True)


def load_lda(path) -> LdaModel:
    with open(path, encoding="utf-8") as fh:
        return LdaModel.from_dict(json.load(fh))


def fit_lda(corpus_texts: Sequence[str], theta: int = 20, alpha: float | None = None,
            beta: float = 0.01, iterations: int = 500, seed: int = 0) -> LdaModel:
    """Fit LDA by collapsed Gibbs sampling; alpha defaults to 50/theta."""
    if theta < 2:
        raise ValueError("need at least 2 topics")
    if alpha is None:
        alpha = 50.0 / theta

    docs_tokens = [toks for toks in (tokenize(t) for t in corpus_texts) if toks]
    if not docs_tokens:
        raise ValueError("no document has any usable token")
    vocab_words = sorted({w for toks in docs_tokens for w in toks})
    vocab = {w: i for i, w in enumerate(vocab_words)}

    words = np.array([vocab[w] for toks in docs_tokens for w in toks], dtype=np.int64)
    docs = np.repeat(np.arange(len(docs_tokens), dtype=np.int64), [len(t) for t in docs_tokens])

    rng = np.random.default_rng(seed)
    z = rng.integers(0, theta, size=words.shape[0]).astype(np.int64)
    ndk = np.zeros((len(docs_tokens), theta), dtype=np.int64)
    nkw = np.zeros((theta, len(vocab)), dtype=np.int64)
    np.add.at(ndk, (docs, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)

    vbeta = len(vocab) * beta
    for _ in range(iterations):
        _gibbs_sweep(words, docs, z, ndk, nkw, nk, float(alpha), float(beta), vbeta,
                     rng.random(words.shape[0]))

    topic_word = (nkw + beta) / (nk[:, None] + vbeta)
    return LdaModel(theta, vocab, topic_word, float(alpha), float(beta), int(seed), int(iterations))


def _doc_seed(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def infer_topics(model: LdaModel, document: str) -> np.ndarray:
    """Topic proportions of one document by fold-in Gibbs against frozen topics."""
    cached = model._cache.get(document)
    if cached is not None:
        return cached.copy()
    ids = [model.vocabulary[w] for w in tokenize(document) if w in model.vocabulary]
    if not ids:
        out = np.full(model.theta, 1.0 / model.theta)
    else:
        words = np.asarray(ids, dtype=np.int64)
        rng = np.random.default_rng([model.seed, _doc_seed(document)])
        z = rng.integers(0, model.theta, size=words.shape[0]).astype(np.int64)
        u = rng.random(INFER_SWEEPS * words.shape[0])
        out = _fold_in(words, z, model.topic_word, model.alpha, u)
    model._cache[document] = out
    return out.copy()


def profile_topic_distribution(model: LdaModel, posts) -> np.ndarray:
    if not posts:
        return np.full(model.theta, 1.0 / model.theta)
    acc = np.zeros(model.theta)
    for post in posts:
        acc += infer_topics(model, post.text if hasattr(post, "text") else post)
    return acc / len(posts)


def sample_texts(corpora, limit: int = 15000, seed: int = 0) -> list[str]:
    """Seeded sample of at most ``limit`` post texts across the given corpora."""
    texts = [post.text for corpus in corpora for prof in corpus for post in prof.posts]
    if len(texts) <= limit:
        return texts
    rng = np.random.default_rng(seed)
    return [texts[i] for i in rng.permutation(len(texts))[:limit]]
