"""Slow, obviously-correct reference implementations used only by the tests.

None of these share code with the package.
"""

import itertools
import math

import numpy as np


def dp_levenshtein(a: str, b: str) -> int:
    """Textbook Wagner-Fischer table."""
    rows = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        rows[i][0] = i
    for j in range(len(b) + 1):
        rows[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            rows[i][j] = min(rows[i - 1][j] + 1, rows[i][j - 1] + 1,
                             rows[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return rows[len(a)][len(b)]


def chord_distance_km(lat1, lon1, lat2, lon2, radius=6371.0):
    """Great-circle distance from the straight chord between unit vectors."""
    def unit(lat, lon):
        la, lo = math.radians(lat), math.radians(lon)
        return np.array([math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)])
    chord = np.linalg.norm(unit(lat1, lon1) - unit(lat2, lon2))
    return 2 * radius * math.asin(min(1.0, chord / 2))


def greedy_pairs_mean_gap(a, b):
    """Sort every candidate pair by (gap, earlier timestamp, i, j) and take disjoint ones."""
    cands = sorted((abs(x - y), min(x, y), i, j) for i, x in enumerate(a) for j, y in enumerate(b))
    used_a, used_b, total = set(), set(), 0
    for gap, _, i, j in cands:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        total += gap
    return total / min(len(a), len(b))


def brute_max_assignment(scores):
    """Maximum total over every injective row -> column map (rows <= columns)."""
    n, m = scores.shape
    best = -math.inf
    for cols in itertools.permutations(range(m), n):
        best = max(best, sum(scores[i, c] for i, c in enumerate(cols)))
    return best


def grid_imputation(coupled, uncoupled):
    """Err(v) on the 0.01 grid with plain Python loops; smallest v among ties."""
    best_v, best_err = None, None
    for k in range(101):
        v = k / 100
        err = (sum(1 for s in coupled if s < v) / len(coupled) if coupled else 0.0) + \
              (sum(1 for s in uncoupled if s >= v) / len(uncoupled) if uncoupled else 0.0)
        if best_err is None or err < best_err - 1e-15:
            best_v, best_err = v, err
    return best_v, best_err


def svr_primal(w, b, X, y, C, eps):
    r = np.abs(y - X @ w - b) - eps
    return 0.5 * float(w @ w) + C * float(np.maximum(r, 0).sum())


def grid_svr_oracle(X, y, C, eps, lo=-4.0, hi=4.0, points=21, rounds=25):
    """Minimize the convex primal over a grid of (w, b) that repeatedly zooms on the best cell."""
    d = X.shape[1]
    center = np.full(d + 1, (hi + lo) / 2)
    half = np.full(d + 1, (hi - lo) / 2)
    best, arg = math.inf, None
    for _ in range(rounds):
        axes = [np.linspace(c - h, c + h, points) for c, h in zip(center, half)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d + 1)
        W, B = grid[:, :d], grid[:, d]
        resid = np.abs(y[None, :] - W @ X.T - B[:, None]) - eps
        vals = 0.5 * (W ** 2).sum(axis=1) + C * np.maximum(resid, 0).sum(axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, arg = float(vals[k]), grid[k].copy()
        center = arg
        half = half * 3 / (points - 1)
    return best, arg


def hand_knn(train, labels, point, k):
    """Sort by (distance, index), vote, break split votes by summed distance."""
    order = sorted(range(len(train)), key=lambda i: (float(np.sum((np.asarray(train[i]) - point) ** 2)), i))[:k]
    ones = [i for i in order if labels[i] == 1]
    zeros = [i for i in order if labels[i] == 0]
    if 2 * len(ones) != k:
        return int(2 * len(ones) > k)
    d = lambda i: math.sqrt(float(np.sum((np.asarray(train[i]) - point) ** 2)))
    return int(sum(map(d, ones)) < sum(map(d, zeros)))


def exhaustive_plan(const, contribs, utils, tau):
    """Best total utility over all level combinations meeting the score bound."""
    best = None
    for choice in itertools.product(*[range(len(c)) for c in contribs]):
        s = const + sum(contribs[g][k] for g, k in enumerate(choice))
        if s <= tau:
            u = sum(utils[g][k] for g, k in enumerate(choice))
            if best is None or u > best:
                best = u
    return best


def disjoint_topic_corpus(seed=0, n_topics=2, words_per_topic=10, n_docs=200, doc_len=30, concentration=0.3):
    """Documents from topics with disjoint vocabularies; returns (docs, true rows keyed by word)."""
    rng = np.random.default_rng(seed)
    vocab = [[f"t{k}w{v}" for v in range(words_per_topic)] for k in range(n_topics)]
    docs = []
    for _ in range(n_docs):
        mix = rng.dirichlet([concentration] * n_topics)
        topics = rng.choice(n_topics, size=doc_len, p=mix)
        docs.append(" ".join(vocab[k][rng.integers(words_per_topic)] for k in topics))
    truth = {w: [1.0 / words_per_topic if w in vocab[k] else 0.0 for k in range(n_topics)]
             for ws in vocab for w in ws}
    return docs, truth, vocab


def greedy_aligned_cosines(fitted, truth):
    """Pair fitted and true rows greedily by descending cosine; returns the matched cosines."""
    cos = fitted @ truth.T / np.outer(np.linalg.norm(fitted, axis=1), np.linalg.norm(truth, axis=1))
    pairs = sorted(((cos[i, j], i, j) for i in range(cos.shape[0]) for j in range(cos.shape[1])), reverse=True)
    used_i, used_j, out = set(), set(), []
    for c, i, j in pairs:
        if i not in used_i and j not in used_j:
            used_i.add(i)
            used_j.add(j)
            out.append(c)
    return out
