"""Pairwise score matrices and one-to-one assignment by the Hungarian method."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .profiles import Corpus, DataError
from .reference import Providers
from .similarity import block_features, corpus_features
from .training import WeightModel, score_rows

SENTINEL = -1e9


@dataclass
class ScoreMatrix:
    aux_ids: list[str]
    target_ids: list[str]
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.shape != (len(self.aux_ids), len(self.target_ids)):
            raise ValueError("score matrix shape does not match the id lists")

    def columns(self, target_ids: Sequence[str]) -> "ScoreMatrix":
        index = {t: j for j, t in enumerate(self.target_ids)}
        missing = [t for t in target_ids if t not in index]
        if missing:
            raise DataError(f"unknown victim id {missing[0]!r}")
        cols = [index[t] for t in target_ids]
        return ScoreMatrix(list(self.aux_ids), list(target_ids), self.scores[:, cols])


@dataclass
class MatchResult:
    assignments: list[tuple[str, str, float]]
    threshold: float
    aux_ids: list[str] = field(default_factory=list)
    target_ids: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> list[tuple[str, str, float]]:
        return [a for a in self.assignments if a[2] >= self.threshold]

    def with_threshold(self, threshold: float) -> "MatchResult":
        return MatchResult(self.assignments, threshold, self.aux_ids, self.target_ids)


@njit(cache=True)
def _hungarian_min(cost):
    """Minimum-cost assignment of every row of an n x m cost matrix, n <= m.

    Shortest augmenting paths with dual potentials, O(n^2 m).
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    minv = np.empty(m + 1)
    used = np.empty(m + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col_of = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            col_of[p[j] - 1] = j - 1
    return col_of


def hungarian(scores: np.ndarray) -> np.ndarray:
    """Column index assigned to each row maximizing the total score (-1 = unassigned).

    The smaller side is completed with dummy entries. Dummies carry one
    constant score, so they shift every full matching by the same amount and
    are solved implicitly as a rectangular problem.
    """
    s = np.asarray(scores, dtype=float)
    n, m = s.shape
    if n == 0 or m == 0:
        return np.full(n, -1, dtype=np.int64)
    if n <= m:
        return _hungarian_min(np.ascontiguousarray(-s))
    cols = _hungarian_min(np.ascontiguousarray(-s.T))
    rows = np.full(n, -1, dtype=np.int64)
    rows[cols] = np.arange(m)
    return rows


def hungarian_assign(m: ScoreMatrix | np.ndarray) -> list[tuple[int, int]]:
    scores = m.scores if isinstance(m, ScoreMatrix) else np.asarray(m, dtype=float)
    cols = hungarian(scores)
    return [(i, int(j)) for i, j in enumerate(cols) if j >= 0]


def assignment_total(scores, pairs) -> float:
    total = 0.0
    for i, j in pairs:
        total += scores[i][j]
    return total


def score_matrix_from_features(feats: np.ndarray, names: Sequence[str], model: WeightModel,
                               aux_ids: Sequence[str], target_ids: Sequence[str]) -> ScoreMatrix:
    na, nt, k = feats.shape
    scores = score_rows(model, feats.reshape(na * nt, k), names).reshape(na, nt)
    return ScoreMatrix(list(aux_ids), list(target_ids), scores)


def build_score_matrix(aux: Corpus, target: Corpus, model: WeightModel, providers: Providers,
                       topic_model=None, config=None) -> ScoreMatrix:
    config = config or model.config
    if len(aux) == 0 or len(target) == 0:
        raise DataError("both corpora must be nonempty")
    fa, fb = corpus_features(aux.profiles, target.profiles, providers, topic_model, config)
    feats = block_features(fa, fb, config)
    return score_matrix_from_features(feats, config.feature_names, model, aux.ids, target.ids)


def attack_from_matrix(matrix: ScoreMatrix, threshold: float) -> MatchResult:
    pairs = hungarian_assign(matrix)
    assignments = [(matrix.aux_ids[i], matrix.target_ids[j], float(matrix.scores[i, j])) for i, j in pairs]
    return MatchResult(assignments, threshold, list(matrix.aux_ids), list(matrix.target_ids))


def global_attack(aux_eval: Corpus, target_eval: Corpus, model: WeightModel, threshold: float,
                  providers: Providers, topic_model=None) -> MatchResult:
    return attack_from_matrix(build_score_matrix(aux_eval, target_eval, model, providers, topic_model), threshold)


def targeted_from_matrix(matrix: ScoreMatrix, victims: Sequence[str], threshold: float) -> MatchResult:
    return attack_from_matrix(matrix.columns(victims), threshold)


def targeted_attack(victims: Sequence[str], aux_eval: Corpus, target_eval: Corpus, model: WeightModel,
                    threshold: float, providers: Providers, topic_model=None) -> MatchResult:
    for v in victims:
        if v not in target_eval:
            raise DataError(f"unknown victim id {v!r}")
    restricted = target_eval.subset(victims)
    return attack_from_matrix(build_score_matrix(aux_eval, restricted, model, providers, topic_model), threshold)


def sample_victims(target_ids: Sequence[str], k: int, seed: int) -> list[str]:
    rng = np.random.default_rng(seed)
    k = min(k, len(target_ids))
    return [target_ids[i] for i in sorted(rng.choice(len(target_ids), size=k, replace=False))]


def save_matches(result: MatchResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["aux_id", "target_id", "score", "accepted"])
        for a, t, s in result.assignments:
            w.writerow([a, t, repr(s), "true" if s >= result.threshold else "false"])


def save_matrix(matrix: ScoreMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["aux_id"] + list(matrix.target_ids))
        for aid, row in zip(matrix.aux_ids, matrix.scores):
            w.writerow([aid] + [repr(float(x)) for x in row])


def load_matches(path, threshold: float | None = None) -> MatchResult:
    """Read a matches CSV; the threshold is recovered from the accepted flags if not given."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["aux_id", "target_id", "score", "accepted"]:
            raise DataError(f"{path}: header must be aux_id,target_id,score,accepted")
        for lineno, r in enumerate(reader, 2):
            try:
                rows.append((r["aux_id"], r["target_id"], float(r["score"]), r["accepted"] == "true"))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad score") from None
    if threshold is None:
        acc = [s for _, _, s, ok in rows if ok]
        threshold = min(acc) if acc else np.inf
    return MatchResult([(a, t, s) for a, t, s, _ in rows], threshold,
                       [a for a, _, _, _ in rows], [t for _, t, _, _ in rows])
