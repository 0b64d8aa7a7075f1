"""Precision, recall and success rate of an assignment, threshold sweeps, and
a k-nearest-neighbour pair classifier used as a baseline."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .matching import MatchResult
from .profiles import DataError, PairLabel

GLOBAL = "global"
TARGETED = "targeted"

# assignment categories
_COUPLED, _WRONG, _IGNORED = 0, 1, 2


@dataclass
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float | None
    recall: float | None
    success_rate: float
    threshold: float
    attack_kind: str
    n_coupled: int = 0
    n_matched_coupled: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        if not np.isfinite(self.threshold):
            d["threshold"] = None
        return d


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def _categorize(result: MatchResult, labels: Sequence[PairLabel], attack_kind: str):
    if attack_kind not in (GLOBAL, TARGETED):
        raise ValueError(f"attack kind must be {GLOBAL!r} or {TARGETED!r}")
    aux_set = set(result.aux_ids) | {a for a, _, _ in result.assignments}
    tgt_set = set(result.target_ids) | {t for _, t, _ in result.assignments}
    partner_of_aux, partner_of_tgt = {}, {}
    n_coupled = 0
    for lab in labels:
        if lab.aux_id not in aux_set:
            raise DataError(f"label references aux profile {lab.aux_id!r} absent from the result")
        if lab.target_id not in tgt_set:
            if attack_kind == GLOBAL:
                raise DataError(f"label references target profile {lab.target_id!r} absent from the result")
            continue   # not a victim of this targeted run
        if lab.coupled:
            partner_of_aux[lab.aux_id] = lab.target_id
            partner_of_tgt[lab.target_id] = lab.aux_id
            n_coupled += 1
    scores, cats = [], []
    for a, t, s in result.assignments:
        if partner_of_aux.get(a) == t:
            cat = _COUPLED
        elif a in partner_of_aux or t in partner_of_tgt:
            cat = _WRONG
        elif attack_kind == GLOBAL:
            cat = _WRONG   # both profiles uncoupled
        else:
            cat = _IGNORED
        scores.append(s)
        cats.append(cat)
    return np.asarray(scores, dtype=float), np.asarray(cats, dtype=np.int64), n_coupled


def _report(scores, cats, n_coupled, threshold, attack_kind) -> EvalReport:
    acc = scores >= threshold
    coupled = cats == _COUPLED
    wrong = cats == _WRONG
    tp = int((coupled & acc).sum())
    fn = int((coupled & ~acc).sum())
    fp = int((wrong & acc).sum())
    tn = int((wrong & ~acc).sum())
    matched = int(coupled.sum())
    return EvalReport(tp, fp, tn, fn, _ratio(tp, tp + fp), _ratio(tp, tp + fn),
                      matched / n_coupled if n_coupled else 0.0, float(threshold), attack_kind,
                      n_coupled, matched)


def evaluate(result: MatchResult, labels: Sequence[PairLabel], attack_kind: str = GLOBAL) -> EvalReport:
    scores, cats, n_coupled = _categorize(result, labels, attack_kind)
    return _report(scores, cats, n_coupled, result.threshold, attack_kind)


def default_grid(result: MatchResult) -> np.ndarray:
    """Every distinct assigned score, i.e. every threshold where the counts change."""
    scores = np.unique([s for _, _, s in result.assignments])
    return scores if scores.size else np.array([0.0])


def precision_recall_curve(result: MatchResult, labels: Sequence[PairLabel], grid=None,
                           attack_kind: str = GLOBAL):
    """Reports per grid threshold plus the operating point (min |P - R|, lowest threshold on ties)."""
    grid = default_grid(result) if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or (np.diff(grid) < 0).any():
        raise ValueError("threshold grid must be nonempty and ascending")
    scores, cats, n_coupled = _categorize(result, labels, attack_kind)
    reports = [_report(scores, cats, n_coupled, t, attack_kind) for t in grid]
    best = None
    for rep in reports:
        if rep.precision is None or rep.recall is None:
            continue
        gap = abs(rep.precision - rep.recall)
        if best is None or gap < abs(best.precision - best.recall):
            best = rep
    return reports, best


def save_curve(reports: Sequence[EvalReport], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "precision", "recall"])
        for r in reports:
            w.writerow([repr(r.threshold), "" if r.precision is None else repr(r.precision),
                        "" if r.recall is None else repr(r.recall)])


def save_report(report: EvalReport, path, extra: dict | None = None) -> None:
    d = report.to_dict()
    if extra:
        d.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(d, fh, sort_keys=True, indent=1)


# --- KNN baseline -----------------------------------------------------------------

KNN_FEATURE_PREFIXES = ("name:", "location", "gender", "photo")


def knn_feature_names(names: Sequence[str]) -> list[str]:
    return [n for n in names if n.startswith(KNN_FEATURE_PREFIXES)]


@njit(cache=True)
def _knn_predict(train, labels, test, k, axis, out):
    """Exact k nearest neighbours ranked by (distance, training index).

    Training rows are visited outward from the query along one coordinate,
    so the sweep can stop once that coordinate alone is too far away.
    """
    n, d = train.shape
    order = np.argsort(train[:, axis], kind="mergesort")
    key = train[order, axis]
    bd = np.empty(k)
    bi = np.empty(k, dtype=np.int64)
    for r in range(test.shape[0]):
        x = test[r, axis]
        hi = np.searchsorted(key, x)
        lo = hi - 1
        cnt = 0
        while lo >= 0 or hi < n:
            if hi >= n or (lo >= 0 and x - key[lo] <= key[hi] - x):
                pos_sorted = lo
                lo -= 1
            else:
                pos_sorted = hi
                hi += 1
            gap = key[pos_sorted] - x
            if cnt == k and gap * gap > bd[k - 1]:
                break
            i = order[pos_sorted]
            dist = 0.0
            for c in range(d):
                diff = test[r, c] - train[i, c]
                dist += diff * diff
                if cnt == k and dist > bd[k - 1]:
                    break
            if cnt < k:
                pos = cnt
                cnt += 1
            elif dist < bd[k - 1] or (dist == bd[k - 1] and i < bi[k - 1]):
                pos = k - 1
            else:
                continue
            while pos > 0 and (bd[pos - 1] > dist or (bd[pos - 1] == dist and bi[pos - 1] > i)):
                bd[pos] = bd[pos - 1]
                bi[pos] = bi[pos - 1]
                pos -= 1
            bd[pos] = dist
            bi[pos] = i
        votes = 0
        mass1 = 0.0
        mass0 = 0.0
        for q in range(k):
            if labels[bi[q]] == 1:
                votes += 1
                mass1 += np.sqrt(bd[q])
            else:
                mass0 += np.sqrt(bd[q])
        if 2 * votes > k:
            out[r] = 1
        elif 2 * votes < k:
            out[r] = 0
        else:
            out[r] = 1 if mass1 < mass0 else 0


def knn_baseline(train_X, train_y, test_X, k: int = 5) -> np.ndarray:
    """Majority vote of the k nearest training rows (Euclidean).

    Equal distances go to the smaller training index. A split vote goes to
    the class whose neighbours are closer in total; an exact tie predicts
    uncoupled.
    """
    train_X = np.ascontiguousarray(train_X, dtype=float)
    test_X = np.ascontiguousarray(test_X, dtype=float)
    if train_X.shape[0] == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= train_X.shape[0]:
        raise ValueError("k must lie between 1 and the training size")
    if test_X.shape[1] != train_X.shape[1]:
        raise ValueError("train and test features differ in width")
    out = np.empty(test_X.shape[0], dtype=np.int64)
    axis = int(np.argmax(train_X.var(axis=0))) if train_X.shape[1] else 0
    _knn_predict(train_X, np.asarray(train_y, dtype=np.int64), test_X, int(k), axis, out)
    return out


@dataclass
class BaselineReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float | None
    recall: float | None


def baseline_report(predicted, truth) -> BaselineReport:
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    tp = int((predicted & truth).sum())
    fp = int((predicted & ~truth).sum())
    fn = int((~predicted & truth).sum())
    tn = int((~predicted & ~truth).sum())
    return BaselineReport(tp, fp, fn, tn, _ratio(tp, tp + fp), _ratio(tp, tp + fn))
