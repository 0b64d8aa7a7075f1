"""Privacy countermeasure: pick per-attribute distortion levels for a target
profile that keep its coupled pair score under tau while losing as little
utility as possible, solved exactly by branch and bound."""

from __future__ import annotations

import csv
import itertools
import math
import re
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .matching import attack_from_matrix, score_matrix_from_features
from .profiles import Corpus, PairLabel, Profile
from .reference import Providers, country_of, extract_entities, geocode
from .similarity import (ATTRIBUTES, SimilarityConfig, _activity_score, _interest_score, _sentiment_score,
                         block_features, build_features, compute_similarity_vector, daily_sentiment)
from .topics import infer_topics
from .evaluation import evaluate
from .training import LINEAR, WeightModel, score_pair

POST_ATTRIBUTES = ("activity", "interest", "sentiment")
GROUPS = (("location",), ("gender",), ("photo",), ("freetext",), POST_ATTRIBUTES)
TOL = 1e-9


class InfeasibleError(Exception):
    """No combination of levels brings the pair score down to tau."""

    def __init__(self, min_similarity: float, tau: float):
        super().__init__(f"minimum achievable similarity {min_similarity:.6g} exceeds tau {tau:.6g}")
        self.min_similarity = min_similarity
        self.tau = tau


@dataclass(frozen=True)
class DistortionLevel:
    attribute: str
    level_id: int
    new_similarity: float
    utility: float


@dataclass(frozen=True)
class LevelOption:
    """One choice for a group of linked attributes."""
    level_id: int
    levels: tuple[DistortionLevel, ...]
    patch: dict = field(default_factory=dict, compare=False)
    description: str = "keep"


@dataclass
class AttributeGroup:
    attributes: tuple[str, ...]
    options: list[LevelOption]


@dataclass
class LevelSet:
    groups: list[AttributeGroup]
    fixed: dict[str, float]   # model features held at their current value (names)
    baseline: dict[str, float | None] = field(default_factory=dict)


@dataclass(frozen=True)
class ImportanceProfile:
    c: dict[str, float] = field(default_factory=lambda: {a: 1.0 / len(ATTRIBUTES) for a in ATTRIBUTES})

    def __post_init__(self):
        if any(v < 0 for v in self.c.values()) or not any(v > 0 for v in self.c.values()):
            raise ValueError("importances must be nonnegative with at least one positive entry")

    def weight(self, attribute: str) -> float:
        return float(self.c.get(attribute, 0.0))

    @property
    def total(self) -> float:
        return math.fsum(self.c.values())


@dataclass
class DistortionPlan:
    chosen: dict[str, int]
    achieved_similarity: float
    total_utility: float
    options: list[LevelOption] = field(default_factory=list)

    @property
    def patch(self) -> dict:
        out = {}
        for opt in self.options:
            out.update(opt.patch)
        return out

    def to_dict(self) -> dict:
        levels = {}
        for opt in self.options:
            for lev in opt.levels:
                levels[lev.attribute] = {"level_id": lev.level_id, "description": opt.description,
                                         "new_similarity": lev.new_similarity, "utility": lev.utility}
        return {"chosen": dict(self.chosen), "levels": levels,
                "achieved_similarity": self.achieved_similarity, "total_utility": self.total_utility}


# --- level enumeration ----------------------------------------------------------

def _utility(new: float | None, base: float | None, fill: float) -> float:
    if base is None or base <= 0:
        return 1.0
    s = fill if new is None else new
    return min(max(s / base, 0.0), 1.0)


def _remove_entity(text: str, entity: str) -> str:
    words = [re.escape(w) for w in entity.split()]
    pattern = r"(?<!\w)" + r"\s+".join(words) + r"(?!\w)"
    return re.sub(pattern, "", text, flags=re.IGNORECASE)


def _candidate_patches(aux: Profile, target: Profile, providers: Providers, grid_size: int):
    """Raw (description, patch) candidates for each single-attribute group."""
    out = {"location": [], "gender": [], "photo": [], "freetext": []}
    if target.location_text is not None:
        country = country_of(target.location_text)
        if country and geocode(providers.gazetteer, country) is not None:
            out["location"].append(("generalize to country", {"location_text": country}))
        out["location"].append(("remove", {"location_text": None}))
    if target.declared_gender is not None:
        out["gender"].append(("remove", {"declared_gender": None}))
    if target.photo_embedding is not None:
        for k, alt in enumerate(target.alternate_photos):
            out["photo"].append((f"alternate photo {k}", {"photo_embedding": tuple(alt)}))
        out["photo"].append(("remove", {"photo_embedding": None}))
    if target.freetext is not None and aux.freetext is not None:
        shared = set(extract_entities(aux.freetext)) & set(extract_entities(target.freetext))
        lowered = target.freetext.lower()
        order = sorted(shared, key=lambda e: (lowered.find(e) if e in lowered else len(lowered), e))
        if order:
            steps = sorted({math.ceil(j * len(order) / grid_size) for j in range(1, grid_size + 1)})
            for k in steps:
                text = target.freetext
                for ent in order[:k]:
                    text = _remove_entity(text, ent)
                out["freetext"].append((f"remove {k} shared entities", {"freetext": text}))
    return out


class _PostScorer:
    """Weighted activity/interest/sentiment similarity for subsets of target posts."""

    def __init__(self, aux: Profile, target: Profile, model: WeightModel, providers: Providers, topic_model):
        self.model = model
        self.posts = list(target.posts)
        self.lex = providers.lexicon
        self.horizon = float(model.config.norm.activity_horizon_s)
        self.aux_ts = np.asarray(aux.timestamps, dtype=np.int64)
        self.aux_days = daily_sentiment(aux.posts, self.lex)
        self.topic_model = topic_model
        if topic_model is not None and aux.posts:
            acc = np.zeros(topic_model.theta)
            for p in aux.posts:
                acc += infer_topics(topic_model, p.text)
            self.aux_topics = acc / len(aux.posts)
            self.post_topics = [infer_topics(topic_model, p.text) for p in self.posts]
        else:
            self.aux_topics = None
        self.w = {a: _weight(model, a) for a in POST_ATTRIBUTES}
        self.fill = {a: model.imputation.values.get(a, 0.0) for a in POST_ATTRIBUTES}

    def similarities(self, keep: Sequence[int]) -> dict[str, float | None]:
        sub = [self.posts[i] for i in keep]
        ts = np.asarray([p.timestamp for p in sub], dtype=np.int64)
        act = float(_activity_score(self.aux_ts, ts, self.horizon))
        inter = np.nan
        if self.aux_topics is not None and sub:
            acc = np.zeros(self.topic_model.theta)
            for i in keep:
                acc += self.post_topics[i]
            inter = float(_interest_score(self.aux_topics, acc / len(sub)))
        sent = float(_sentiment_score(*self.aux_days, *daily_sentiment(sub, self.lex)))
        return {a: None if math.isnan(v) else v for a, v in zip(POST_ATTRIBUTES, (act, inter, sent))}

    def weighted(self, keep) -> float:
        sims = self.similarities(keep)
        return sum(self.w[a] * (self.fill[a] if sims[a] is None else sims[a]) for a in POST_ATTRIBUTES)


def _weight(model: WeightModel, name: str) -> float:
    return model.weight(name) if name in model.feature_names else 0.0


def removal_sequence(aux: Profile, target: Profile, model: WeightModel, providers: Providers,
                     topic_model=None) -> list[int]:
    """Indices of target posts in greedy removal order.

    Each step drops the post whose removal leaves the lowest weighted
    activity + interest + sentiment similarity; ties go to the earlier post.
    """
    scorer = _PostScorer(aux, target, model, providers, topic_model)
    remaining = list(range(len(target.posts)))
    order = []
    while remaining:
        best, best_val = None, None
        for idx in remaining:
            val = scorer.weighted([i for i in remaining if i != idx])
            if best_val is None or val < best_val:
                best, best_val = idx, val
        order.append(best)
        remaining.remove(best)
    return order


def _vector_values(v) -> dict[str, float | None]:
    return dict(zip(v.feature_names, v.values()))


def enumerate_levels(pair: tuple[Profile, Profile], model: WeightModel, providers: Providers, topic_model=None,
                     grid_size: int = 5) -> LevelSet:
    """Distortion options per attribute group for the target profile of ``pair``.

    Each option's similarity is recomputed from the patched target. Options
    that do not lower the score contribution, or are dominated by a cheaper
    option, are dropped, so every list runs from keep (level 0) towards
    lower contribution and lower utility.
    """
    aux, target = pair
    if grid_size < 1:
        raise ValueError("grid_size must be at least 1")
    config = model.config
    base = _vector_values(compute_similarity_vector(aux, target, providers, topic_model, config))
    fill = model.imputation.values

    def sim_of(values, a):
        v = values.get(a)
        return fill.get(a, 0.0) if v is None else v

    fixed = {n: sim_of(base, n) for n in model.feature_names if n not in ATTRIBUTES}

    raw = _candidate_patches(aux, target, providers, grid_size)
    posts_raw = []
    if target.posts:
        order = removal_sequence(aux, target, model, providers, topic_model)
        n = len(order)
        for k in sorted({math.ceil(j * n / grid_size) for j in range(1, grid_size + 1)}):
            gone = set(order[:k])
            kept = tuple(p for i, p in enumerate(target.posts) if i not in gone)
            posts_raw.append((f"remove {k} posts", {"posts": kept}))

    groups = []
    for attrs in GROUPS:
        candidates = posts_raw if attrs == POST_ATTRIBUTES else raw[attrs[0]]
        movable = [a for a in attrs if base.get(a) is not None and base[a] > 0]
        options = [( "keep", {}, {a: base.get(a) for a in attrs})]
        if movable:
            for desc, patch in candidates:
                vals = _vector_values(compute_similarity_vector(aux, replace(target, **patch), providers,
                                                                topic_model, config))
                options.append((desc, patch, {a: vals.get(a) for a in attrs}))
        groups.append(_build_group(attrs, options, base, fill, model))
    return LevelSet(groups, fixed, base)


def _build_group(attrs, options, base, fill, model) -> AttributeGroup:
    def contribution(sims):
        return sum(_weight(model, a) * (fill.get(a, 0.0) if sims[a] is None else sims[a]) for a in attrs)

    def utility(sims):
        # attributes with nothing to hide keep full utility whatever the option
        return {a: _utility(sims[a], base.get(a), fill.get(a, 0.0)) for a in attrs}

    scored = []
    for pos, (desc, patch, sims) in enumerate(options):
        util = utility(sims) if pos else {a: 1.0 for a in attrs}
        scored.append((contribution(sims), -sum(util.values()), pos, desc, patch, sims, util))
    keep = scored[0]
    # Pareto filter: strictly lower contribution than every option kept so far
    frontier = [keep]
    for cand in sorted(scored[1:], key=lambda t: (-t[0], t[1], t[2])):
        if cand[0] >= frontier[-1][0]:
            continue
        while frontier and len(frontier) > 1 and cand[1] <= frontier[-1][1]:
            frontier.pop()  # candidate is lower and at least as useful
        frontier.append(cand)
    final = []
    for lid, (_, _, _, desc, patch, sims, util) in enumerate(frontier):
        levels = tuple(DistortionLevel(a, lid, fill.get(a, 0.0) if sims[a] is None else float(sims[a]), util[a])
                       for a in attrs)
        final.append(LevelOption(lid, levels, patch, desc))
    return AttributeGroup(tuple(attrs), final)


# --- optimization -----------------------------------------------------------------

@dataclass(frozen=True)
class _Option:
    contrib: float
    util: float


def _group_tables(levels: LevelSet, importance: ImportanceProfile, model: WeightModel):
    const = float(model.w0)
    for name, value in levels.fixed.items():
        const += _weight(model, name) * value
    tables = []
    for g in levels.groups:
        row = []
        for opt in g.options:
            contrib = 0.0
            util = 0.0
            for lev in opt.levels:
                contrib += _weight(model, lev.attribute) * lev.new_similarity
                util += importance.weight(lev.attribute) * lev.utility
            row.append(_Option(contrib, util))
        tables.append(row)
    return const, tables


def _evaluate(const, tables, choice):
    s = const
    u = 0.0
    for g, k in enumerate(choice):
        s += tables[g][k].contrib
        u += tables[g][k].util
    return s, u


def _better(u, choice, best_u, best_choice) -> bool:
    return best_choice is None or u > best_u or (u == best_u and tuple(choice) < tuple(best_choice))


def solve_levels(const: float, tables: list[list[_Option]], tau: float):
    """Branch and bound over one option per group.

    Returns (choice, score, utility). Groups are branched in order of
    decreasing contribution span; a branch is cut when its utility bound
    falls below the incumbent or when even the lowest remaining
    contributions overshoot tau. Leaves are scored in canonical group order
    so ties resolve to the lexicographically smallest level ids.
    """
    G = len(tables)
    spans = [max(o.contrib for o in t) - min(o.contrib for o in t) for t in tables]
    order = sorted(range(G), key=lambda g: (-spans[g], g))
    max_util = [max(o.util for o in tables[g]) for g in order]
    min_contrib = [min(o.contrib for o in tables[g]) for g in order]
    suffix_util = np.zeros(G + 1)
    suffix_contrib = np.zeros(G + 1)
    for d in range(G - 1, -1, -1):
        suffix_util[d] = suffix_util[d + 1] + max_util[d]
        suffix_contrib[d] = suffix_contrib[d + 1] + min_contrib[d]
    lowest = const + suffix_contrib[0]
    if lowest > tau + TOL:
        raise InfeasibleError(float(lowest), tau)

    best = {"u": -np.inf, "choice": None, "s": None}
    choice = [0] * G

    def dfs(d, util, contrib):
        if d == G:
            s, u = _evaluate(const, tables, choice)
            if s <= tau and _better(u, choice, best["u"], best["choice"]):
                best.update(u=u, choice=list(choice), s=s)
            return
        if best["choice"] is not None and util + suffix_util[d] < best["u"] - TOL:
            return
        if const + contrib + suffix_contrib[d] > tau + TOL:
            return
        g = order[d]
        for k, opt in enumerate(tables[g]):
            choice[g] = k
            dfs(d + 1, util + opt.util, contrib + opt.contrib)
        choice[g] = 0

    dfs(0, 0.0, 0.0)
    if best["choice"] is None:
        raise InfeasibleError(float(lowest), tau)
    return best["choice"], best["s"], best["u"]


def solve_exhaustive(const: float, tables: list[list[_Option]], tau: float):
    """Reference solver: every combination, same scoring and tie rule."""
    best_u, best_choice, best_s = -np.inf, None, None
    for choice in itertools.product(*[range(len(t)) for t in tables]):
        s, u = _evaluate(const, tables, choice)
        if s <= tau and _better(u, choice, best_u, best_choice):
            best_u, best_choice, best_s = u, list(choice), s
    if best_choice is None:
        raise InfeasibleError(float(const + sum(min(o.contrib for o in t) for t in tables)), tau)
    return best_choice, best_s, best_u


def _plan(levels: LevelSet, importance: ImportanceProfile, choice, s) -> DistortionPlan:
    chosen = {}
    options = []
    for g, k in zip(levels.groups, choice):
        opt = g.options[k]
        options.append(opt)
        for a in g.attributes:
            chosen[a] = opt.level_id
    # exact sum, so an untouched profile reports exactly the total importance
    u = math.fsum(importance.weight(lev.attribute) * lev.utility for opt in options for lev in opt.levels)
    return DistortionPlan(chosen, float(s), u, options)


def optimize_plan(levels: LevelSet, importance: ImportanceProfile, model: WeightModel, tau: float) -> DistortionPlan:
    if model.kind != LINEAR:
        raise ValueError("the countermeasure optimizer needs a linear regression model")
    if any(not g.options for g in levels.groups):
        raise ValueError("every attribute group needs at least one level")
    const, tables = _group_tables(levels, importance, model)
    choice, s, _ = solve_levels(const, tables, tau)
    return _plan(levels, importance, choice, s)


def max_privacy_plan(levels: LevelSet, importance: ImportanceProfile, model: WeightModel) -> DistortionPlan:
    """Lowest reachable score, most useful among those."""
    const, tables = _group_tables(levels, importance, model)
    lowest = const
    for t in tables:
        lowest += min(o.contrib for o in t)
    choice, s, _ = solve_levels(const, tables, lowest + TOL)
    return _plan(levels, importance, choice, s)


def apply_plan(plan: DistortionPlan, target: Profile) -> Profile:
    patch = plan.patch
    return replace(target, **patch) if patch else target


def recomputed_score(model: WeightModel, aux: Profile, target: Profile, providers: Providers, topic_model=None) -> float:
    return score_pair(model, compute_similarity_vector(aux, target, providers, topic_model, model.config))


# --- experiment ------------------------------------------------------------------

@dataclass
class CountermeasureRow:
    tau: float
    mean_utility: float | None      # pairs that met tau; None when none did
    mean_utility_all: float         # infeasible pairs counted with their max-privacy plan
    success_rate: float
    infeasible_count: int


def countermeasure_experiment(aux_eval: Corpus, target_eval: Corpus, labels: Sequence[PairLabel],
                              model: WeightModel, tau_grid: Sequence[float], providers: Providers,
                              topic_model=None, importance: ImportanceProfile | None = None,
                              grid_size: int = 5, level_sets: dict | None = None) -> list[CountermeasureRow]:
    """Per tau: distort every coupled target, rerun the global attack.

    Pairs that cannot reach tau get their lowest-score plan for the attack
    and are left out of mean_utility; mean_utility_all keeps them, with the
    utility of that plan.
    """
    importance = importance or ImportanceProfile()
    coupled = [lab for lab in labels if lab.coupled]
    if level_sets is None:
        level_sets = {lab.target_id: enumerate_levels((aux_eval.get(lab.aux_id), target_eval.get(lab.target_id)),
                                                      model, providers, topic_model, grid_size)
                      for lab in coupled}
    config: SimilarityConfig = model.config
    aux_kinds = sorted({a for a, _ in config.name_combos})
    tgt_kinds = sorted({t for _, t in config.name_combos})
    vocab: dict = {}
    fa = build_features(aux_eval.profiles, providers, topic_model, aux_kinds, vocab)
    rows = []
    for tau in tau_grid:
        utils, feasible_utils = [], []
        infeasible = 0
        patched = {}
        for lab in coupled:
            levels = level_sets[lab.target_id]
            try:
                plan = optimize_plan(levels, importance, model, tau)
                feasible_utils.append(plan.total_utility)
            except InfeasibleError:
                plan = max_privacy_plan(levels, importance, model)
                infeasible += 1
            utils.append(plan.total_utility)
            patched[lab.target_id] = apply_plan(plan, target_eval.get(lab.target_id))
        target = target_eval.replace_profiles(patched.get(p.profile_id, p) for p in target_eval)
        fb = build_features(target.profiles, providers, topic_model, tgt_kinds, dict(vocab))
        matrix = score_matrix_from_features(block_features(fa, fb, config), config.feature_names, model,
                                            aux_eval.ids, target.ids)
        report = evaluate(attack_from_matrix(matrix, -np.inf), labels)
        total = importance.total
        rows.append(CountermeasureRow(
            float(tau), float(np.mean(feasible_utils)) / total if feasible_utils else None,
            float(np.mean(utils)) / total if utils else 1.0,
            report.success_rate, infeasible))
    return rows


def default_tau_grid(baseline_scores: Sequence[float], n: int = 8) -> list[float]:
    """+inf followed by descending quantiles of the baseline coupled scores."""
    qs = np.quantile(np.asarray(baseline_scores, dtype=float), np.linspace(1.0, 0.0, n))
    return [math.inf] + [float(q) for q in qs]


def save_sweep(rows: Sequence[CountermeasureRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau", "mean_utility", "success_rate", "infeasible_count"])
        for r in rows:
            w.writerow([repr(r.tau), "" if r.mean_utility is None else repr(r.mean_utility),
                        repr(r.success_rate), r.infeasible_count])
