"""Weight learning from labeled pairs: missing-value imputation, least squares
and linear epsilon-insensitive support vector regression."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from .similarity import SimilarityConfig, SimilarityVector

log = logging.getLogger(__name__)

LINEAR = "linear_regression"
SVR = "svm_regression"
IMPUTATION_GRID = np.arange(101) / 100.0


@dataclass(frozen=True)
class ImputationTable:
    values: dict[str, float]
    fallback: tuple[str, ...] = ()   # features filled by the global mean

    def fill_vector(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.values[n] for n in names], dtype=float)

    def to_dict(self) -> dict:
        return {"values": dict(self.values), "fallback": list(self.fallback)}

    @classmethod
    def from_dict(cls, d: dict) -> "ImputationTable":
        return cls({k: float(v) for k, v in d["values"].items()}, tuple(d.get("fallback", ())))


@dataclass
class TrainingSet:
    X: np.ndarray          # imputed features, rows x m
    y: np.ndarray          # 0/1 labels
    feature_names: list[str]
    binary: bool = True    # False admits real-valued regression targets

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise ValueError("feature matrix does not match feature names")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("feature rows and labels differ in count")
        if self.binary and not np.isin(self.y, (0.0, 1.0)).all():
            raise ValueError("labels must be 0 or 1")

    @property
    def rows(self) -> list[tuple[np.ndarray, int]]:
        return [(self.X[i], int(self.y[i])) for i in range(len(self.y))]

    def select(self, names: Sequence[str]) -> "TrainingSet":
        cols = [self.feature_names.index(n) for n in names]
        return TrainingSet(self.X[:, cols], self.y, list(names), self.binary)


def imputation_error(coupled: np.ndarray, uncoupled: np.ndarray, grid=IMPUTATION_GRID) -> np.ndarray:
    """Err(v) = P(coupled < v) + P(uncoupled >= v) for each grid value v."""
    c = np.sort(coupled)
    u = np.sort(uncoupled)
    below = np.searchsorted(c, grid, side="left") / c.size
    above = (u.size - np.searchsorted(u, grid, side="left")) / u.size
    return below + above


def fit_imputation(F: np.ndarray, y: np.ndarray, names: Sequence[str]) -> ImputationTable:
    values = {}
    fallback = []
    for k, name in enumerate(names):
        col = F[:, k]
        obs = ~np.isnan(col)
        c = col[obs & (y == 1)]
        u = col[obs & (y == 0)]
        if c.size == 0 or u.size == 0:
            values[name] = float(col[obs].mean()) if obs.any() else 0.5
            fallback.append(name)
            log.warning("feature %s unobserved in one class; imputing its global mean", name)
            continue
        # integer counts over a common denominator so equal errors tie exactly
        c, u = np.sort(c), np.sort(u)
        below = np.searchsorted(c, IMPUTATION_GRID, side="left")
        above = u.size - np.searchsorted(u, IMPUTATION_GRID, side="left")
        values[name] = float(IMPUTATION_GRID[int(np.argmin(below * u.size + above * c.size))])
    return ImputationTable(values, tuple(fallback))


def impute(F: np.ndarray, fill: np.ndarray) -> np.ndarray:
    return np.where(np.isnan(F), fill[None, :], F)


def training_set_from_arrays(F, y, names: Sequence[str]) -> tuple[TrainingSet, ImputationTable]:
    F = np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (y == 1).any() or not (y == 0).any():
        raise ValueError("need at least one coupled and one uncoupled pair")
    table = fit_imputation(F, y, names)
    return TrainingSet(impute(F, table.fill_vector(names)), y, list(names)), table


def build_training_set(pairs: Sequence[tuple[SimilarityVector, bool]]) -> tuple[TrainingSet, ImputationTable]:
    if not pairs:
        raise ValueError("need at least one coupled and one uncoupled pair")
    names = pairs[0][0].feature_names
    for v, _ in pairs:
        if v.feature_names != names:
            raise ValueError("similarity vectors have differing feature layouts")
    F = np.array([v.as_array() for v, _ in pairs])
    y = np.array([1.0 if c else 0.0 for _, c in pairs])
    return training_set_from_arrays(F, y, names)


@dataclass
class WeightModel:
    kind: str
    w0: float
    weights: np.ndarray
    feature_names: list[str]
    imputation: ImputationTable
    svm_params: tuple[float, float] | None = None
    flags: list[str] = field(default_factory=list)
    config: SimilarityConfig = field(default_factory=SimilarityConfig)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (len(self.feature_names),):
            raise ValueError("weights length must equal the number of features")

    def weight(self, name: str) -> float:
        return float(self.weights[self.feature_names.index(name)])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "w0": self.w0,
            "weights": self.weights.tolist(),
            "feature_names": list(self.feature_names),
            "imputation": self.imputation.to_dict(),
            "svm_params": list(self.svm_params) if self.svm_params else None,
            "flags": list(self.flags),
            "similarity": self.config.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WeightModel":
        if d.get("kind") not in (LINEAR, SVR):
            raise ValueError(f"unknown model kind {d.get('kind')!r}")
        return cls(
            kind=d["kind"], w0=float(d["w0"]), weights=np.asarray(d["weights"], dtype=float),
            feature_names=list(d["feature_names"]), imputation=ImputationTable.from_dict(d["imputation"]),
            svm_params=tuple(d["svm_params"]) if d.get("svm_params") else None,
            flags=list(d.get("flags", [])), config=SimilarityConfig.from_dict(d["similarity"]),
        )

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def save_model(model: WeightModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True, indent=1)


def load_model(path) -> WeightModel:
    with open(path, encoding="utf-8") as fh:
        return WeightModel.from_dict(json.load(fh))


# --- linear regression ---------------------------------------------------------

def train_linear(ts: TrainingSet, imputation: ImputationTable | None = None,
                 config: SimilarityConfig | None = None) -> WeightModel:
    """Least squares of y on (1, x); minimum-norm solution when rank deficient."""
    n, m = ts.X.shape
    A = np.hstack([np.ones((n, 1)), ts.X])
    coef, _, rank, _ = np.linalg.lstsq(A, ts.y, rcond=None)
    flags = []
    if rank < m + 1:
        flags.append("rank_deficient")
        log.warning("design matrix rank %d < %d; using minimum-norm solution", rank, m + 1)
    imputation = imputation or ImputationTable({k: 0.0 for k in ts.feature_names})
    return WeightModel(LINEAR, float(coef[0]), coef[1:], list(ts.feature_names), imputation,
                       flags=flags, config=config or SimilarityConfig())


# --- support vector regression ------------------------------------------------

@njit(cache=True)
def _smo(X, y, C, eps, tol, max_iter):
    """LIBSVM-style SMO on the 2n-variable SVR dual with a linear kernel."""
    n, m = X.shape
    nn = 2 * n
    alpha = np.zeros(nn)
    s = np.empty(nn)
    p = np.empty(nn)
    for i in range(n):
        s[i] = 1.0
        s[i + n] = -1.0
        p[i] = eps - y[i]
        p[i + n] = eps + y[i]
    kd = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(m):
            acc += X[i, k] * X[i, k]
        kd[i] = acc
    w = np.zeros(m)
    G = p.copy()   # alpha = 0 so the quadratic part vanishes
    it = 0
    gap = np.inf
    while it < max_iter:
        # working set selection with second-order information
        gmax = -np.inf
        bi = -1
        for t in range(nn):
            if (s[t] > 0 and alpha[t] < C) or (s[t] < 0 and alpha[t] > 0):
                v = -s[t] * G[t]
                if v >= gmax:
                    gmax = v
                    bi = t
        gmax2 = -np.inf
        bj = -1
        best = np.inf
        if bi >= 0:
            xi = X[bi % n]
            for t in range(nn):
                if (s[t] > 0 and alpha[t] > 0) or (s[t] < 0 and alpha[t] < C):
                    v = s[t] * G[t]
                    if v >= gmax2:
                        gmax2 = v
                    diff = gmax + v
                    if diff > 0:
                        kij = 0.0
                        xt = X[t % n]
                        for k in range(m):
                            kij += xi[k] * xt[k]
                        quad = kd[bi % n] + kd[t % n] - 2.0 * kij
                        if quad <= 0:
                            quad = 1e-12
                        obj = -(diff * diff) / quad
                        if obj <= best:
                            best = obj
                            bj = t
        gap = gmax + gmax2
        if bi < 0 or bj < 0 or gap < tol:
            break
        i, j = bi, bj
        xi = X[i % n]
        xj = X[j % n]
        kij = 0.0
        for k in range(m):
            kij += xi[k] * xj[k]
        quad = kd[i % n] + kd[j % n] - 2.0 * kij
        if quad <= 0:
            quad = 1e-12
        ai_old, aj_old = alpha[i], alpha[j]
        if s[i] != s[j]:
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        dw = np.zeros(m)
        for k in range(m):
            dw[k] = s[i] * dai * xi[k] + s[j] * daj * xj[k]
            w[k] += dw[k]
        for t in range(nn):
            xt = X[t % n]
            acc = 0.0
            for k in range(m):
                acc += dw[k] * xt[k]
            G[t] += s[t] * acc
        it += 1

    # bias from free variables, or the midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(nn):
        yg = s[t] * G[t]
        if alpha[t] >= C:
            if s[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif alpha[t] <= 0:
            if s[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            nfree += 1
            sfree += yg
    rho = sfree / nfree if nfree > 0 else (ub + lb) / 2.0
    return alpha, w, -rho, it, gap


def svr_objective(X, y, w, b, C, eps):
    """Primal objective and the slack vectors of a linear SVR fit."""
    f = X @ w + b
    xi = np.maximum(0.0, y - f - eps)
    xi_star = np.maximum(0.0, f - y - eps)
    return 0.5 * float(w @ w) + C * float(xi.sum() + xi_star.sum()), xi, xi_star


def train_svr(ts: TrainingSet, C: float = 1.0, epsilon: float = 0.1, imputation: ImputationTable | None = None,
              config: SimilarityConfig | None = None, tol: float = 1e-6, max_iter: int = 100_000) -> WeightModel:
    if C <= 0 or epsilon < 0:
        raise ValueError("need C > 0 and epsilon >= 0")
    if ts.X.shape[0] < 2:
        raise ValueError("need at least two training rows")
    X = np.ascontiguousarray(ts.X)
    alpha, w, b, iters, gap = _smo(X, ts.y, float(C), float(epsilon), float(tol), int(max_iter))
    flags = []
    if gap >= tol:
        flags.append("not_converged")
        log.warning("SVR stopped after %d iterations with KKT violation %.3g", iters, gap)
    obj, xi, xi_star = svr_objective(X, ts.y, w, b, C, epsilon)
    n = X.shape[0]
    imputation = imputation or ImputationTable({k: 0.0 for k in ts.feature_names})
    return WeightModel(SVR, float(b), w, list(ts.feature_names), imputation, svm_params=(float(C), float(epsilon)),
                       flags=flags, config=config or SimilarityConfig(),
                       diagnostics={"alpha": alpha[:n], "alpha_star": alpha[n:], "xi": xi, "xi_star": xi_star,
                                    "objective": obj, "iterations": int(iters), "kkt_violation": float(gap)})


# --- scoring ---------------------------------------------------------------------

@njit(cache=True)
def _affine_rows(w0, w, X, fill, out):
    for r in range(X.shape[0]):
        acc = w0
        for k in range(w.shape[0]):
            x = X[r, k]
            if math.isnan(x):
                x = fill[k]
            acc += w[k] * x
        out[r] = acc


def feature_columns(model: WeightModel, names: Sequence[str]) -> list[int]:
    try:
        return [list(names).index(n) for n in model.feature_names]
    except ValueError:
        missing = [n for n in model.feature_names if n not in names]
        raise ValueError(f"feature layout lacks model features {missing}") from None


def score_rows(model: WeightModel, F: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Scores of raw feature rows (NaN = missing) laid out as ``names``."""
    cols = feature_columns(model, names)
    X = np.ascontiguousarray(np.asarray(F, dtype=float)[:, cols])
    out = np.empty(X.shape[0])
    _affine_rows(float(model.w0), np.ascontiguousarray(model.weights),
                 X, model.imputation.fill_vector(model.feature_names), out)
    return out


def score_pair(model: WeightModel, v: SimilarityVector) -> float:
    return float(score_rows(model, v.as_array()[None, :], v.feature_names)[0])
