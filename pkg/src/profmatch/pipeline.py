"""End-to-end runs: topic model, labeled features, training per experiment
preset, global attack and evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .evaluation import (BaselineReport, EvalReport, GLOBAL, baseline_report, evaluate, knn_baseline,
                         knn_feature_names, precision_recall_curve)
from .matching import MatchResult, ScoreMatrix, attack_from_matrix, score_matrix_from_features
from .profiles import Corpus, PairLabel
from .reference import Providers
from .similarity import ATTRIBUTES, SimilarityConfig, block_features, corpus_features, pair_features
from .synth import GeneratorConfig, generate
from .topics import LdaModel, fit_lda, sample_texts
from .training import (LINEAR, SVR, WeightModel, impute, train_linear, train_svr, training_set_from_arrays)

log = logging.getLogger(__name__)

EXPERIMENTS = ("exp1", "exp2", "exp3", "exp4")
WEAK_ATTRIBUTES = ("activity", "freetext", "interest", "sentiment")
EVAL_SEED_OFFSET = 7919
TRAINERS = {"linreg": LINEAR, "svr": SVR}


def fit_topic_model(corpora: Sequence[Corpus], seed: int = 0, theta: int = 20, iterations: int = 500,
                    limit: int = 15000) -> LdaModel:
    return fit_lda(sample_texts(corpora, limit, seed), theta=theta, iterations=iterations, seed=seed)


def labeled_features(aux: Corpus, target: Corpus, labels: Sequence[PairLabel], providers: Providers,
                     topic_model, config: SimilarityConfig):
    """Raw feature rows (NaN = missing) and 0/1 labels for every labeled pair."""
    fa, fb = corpus_features(aux.profiles, target.profiles, providers, topic_model, config)
    ia = [aux.position(lab.aux_id) for lab in labels]
    it = [target.position(lab.target_id) for lab in labels]
    F = pair_features(fa, fb, ia, it, config)
    y = np.array([1.0 if lab.coupled else 0.0 for lab in labels])
    return F, y


def _is_name(feature: str) -> bool:
    return feature.startswith("name:")


def top_attributes(model: WeightModel, k: int = 4) -> list[str]:
    """The k attributes with the largest learned weight; names count once, by their best combination."""
    best: dict[str, float] = {}
    for name, w in zip(model.feature_names, model.weights):
        key = "name" if _is_name(name) else name
        best[key] = max(best.get(key, -np.inf), float(w))
    ranked = sorted(best, key=lambda a: (-best[a], a))
    return ranked[:k]


def experiment_features(exp: str, names: Sequence[str], exp1_model: WeightModel | None = None) -> list[str]:
    if exp == "exp1":
        return list(names)
    if exp == "exp2":
        if exp1_model is None:
            raise ValueError("exp2 needs the exp1 model to rank attributes")
        top = set(top_attributes(exp1_model))
        return [n for n in names if (_is_name(n) and "name" in top) or n in top]
    if exp == "exp3":
        return [n for n in names if not _is_name(n)]
    if exp == "exp4":
        return [n for n in names if n in WEAK_ATTRIBUTES]
    raise ValueError(f"unknown experiment {exp!r}; choose from {EXPERIMENTS}")


def train_on_features(F, y, names: Sequence[str], features: Sequence[str], trainer: str = "linreg",
                      config: SimilarityConfig | None = None, C: float = 1.0, epsilon: float = 0.1) -> WeightModel:
    cols = [list(names).index(f) for f in features]
    ts, table = training_set_from_arrays(np.asarray(F)[:, cols], y, list(features))
    config = config or SimilarityConfig()
    if trainer == "linreg":
        return train_linear(ts, table, config)
    if trainer == "svr":
        return train_svr(ts, C, epsilon, table, config)
    raise ValueError(f"unknown trainer {trainer!r}")


def train_experiment(exp: str, F, y, names, trainer="linreg", config=None, exp1_model=None) -> WeightModel:
    if exp == "exp2" and exp1_model is None:
        exp1_model = train_on_features(F, y, names, list(names), trainer, config)
    return train_on_features(F, y, names, experiment_features(exp, names, exp1_model), trainer, config)


@dataclass
class AttackOutcome:
    matrix: ScoreMatrix
    result: MatchResult
    report: EvalReport
    curve: list[EvalReport]
    operating: EvalReport | None


def attack_and_evaluate(feats: np.ndarray, names: Sequence[str], model: WeightModel, aux_ids, target_ids,
                        labels: Sequence[PairLabel], threshold: float | None = None) -> AttackOutcome:
    """Global attack on precomputed block features; threshold defaults to the operating point."""
    matrix = score_matrix_from_features(feats, names, model, aux_ids, target_ids)
    result = attack_from_matrix(matrix, -np.inf)
    curve, operating = precision_recall_curve(result, labels, attack_kind=GLOBAL)
    if threshold is None:
        threshold = operating.threshold if operating is not None else float(np.max(matrix.scores))
    result = result.with_threshold(threshold)
    return AttackOutcome(matrix, result, evaluate(result, labels, GLOBAL), curve, operating)


def standard_split_configs(base: GeneratorConfig, seed: int) -> tuple[GeneratorConfig, GeneratorConfig]:
    """Training corpora of 1500 coupled + 1500 uncoupled, evaluation of 500 + 500."""
    train = replace(base, n_coupled=1500, n_uncoupled_per_side=1500, seed=seed)
    test = replace(base, n_coupled=500, n_uncoupled_per_side=500, seed=seed + EVAL_SEED_OFFSET)
    return train, test


@dataclass
class SeedRun:
    seed: int
    train: tuple[Corpus, Corpus, list[PairLabel]]
    test: tuple[Corpus, Corpus, list[PairLabel]]
    topic_model: LdaModel
    config: SimilarityConfig
    F: np.ndarray
    y: np.ndarray
    block: np.ndarray


def prepare_seed(base: GeneratorConfig, seed: int, providers: Providers, vocab_spec=None,
                 config: SimilarityConfig | None = None, lda_iterations: int = 500, theta: int = 20,
                 train_config: GeneratorConfig | None = None, test_config: GeneratorConfig | None = None) -> SeedRun:
    """Generate corpora, fit the topic model and compute every feature once."""
    config = config or SimilarityConfig()
    tr_cfg, te_cfg = standard_split_configs(base, seed)
    tr_cfg = train_config or tr_cfg
    te_cfg = test_config or te_cfg
    train = generate(tr_cfg, providers.gazetteer, providers.lexicon, vocab_spec, providers.names)
    test = generate(te_cfg, providers.gazetteer, providers.lexicon, vocab_spec, providers.names)
    lda = fit_topic_model(train[:2], seed=seed, theta=theta, iterations=lda_iterations)
    F, y = labeled_features(*train, providers, lda, config)
    fa, fb = corpus_features(test[0].profiles, test[1].profiles, providers, lda, config)
    block = block_features(fa, fb, config)
    return SeedRun(seed, train, test, lda, config, F, y, block)


def run_experiments(run: SeedRun, experiments: Sequence[str] = EXPERIMENTS, trainer: str = "linreg",
                    threshold: float | None = None) -> dict[str, tuple[WeightModel, AttackOutcome]]:
    names = run.config.feature_names
    exp1 = train_on_features(run.F, run.y, names, names, trainer, run.config)
    out = {}
    for exp in experiments:
        model = exp1 if exp == "exp1" else train_experiment(exp, run.F, run.y, names, trainer, run.config, exp1)
        aux, target, labels = run.test
        out[exp] = (model, attack_and_evaluate(run.block, names, model, aux.ids, target.ids, labels, threshold))
    return out


def coupled_only(corpora: tuple[Corpus, Corpus, list[PairLabel]]):
    """Restrict an evaluation split to its coupled profiles."""
    aux, target, labels = corpora
    coupled = [lab for lab in labels if lab.coupled]
    return aux.subset([lab.aux_id for lab in coupled]), target.subset([lab.target_id for lab in coupled]), coupled


@dataclass
class BaselineComparison:
    hungarian: EvalReport
    knn: BaselineReport


def baseline_comparison(run: SeedRun, outcome: AttackOutcome, k: int = 5) -> BaselineComparison:
    """KNN on the obvious identifiers against the assignment attack.

    The KNN classifier learns from the same training features (restricted
    to names, location, gender and photo, imputed the same way) and labels
    every aux x target candidate pair of the evaluation split.
    """
    names = run.config.feature_names
    feats = knn_feature_names(names)
    cols = [names.index(f) for f in feats]
    ts, table = training_set_from_arrays(run.F[:, cols], run.y, feats)
    X = impute(run.block[:, :, cols].reshape(-1, len(cols)), table.fill_vector(feats))
    pred = knn_baseline(ts.X, ts.y, X, k)
    aux, target, labels = run.test
    truth = np.zeros((len(aux.ids), len(target.ids)), dtype=bool)
    for lab in labels:
        if lab.coupled:
            truth[aux.position(lab.aux_id), target.position(lab.target_id)] = True
    return BaselineComparison(outcome.report, baseline_report(pred, truth.ravel()))
