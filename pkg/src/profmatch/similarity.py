"""Attribute similarity metrics for cross-network profile pairs.

Every metric is a scalar numba kernel. The single-pair functions and the
batched pair/block path call the same kernels, so a matrix entry recomputed
in isolation is bit-identical to the batched value. Missing scores are NaN
inside the arrays and None in SimilarityVector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from numba import njit

from .profiles import DataError, Profile
from .reference import (Gazetteer, NameGenderTable, Providers, SentimentLexicon, extract_entities,
                        gender_distribution, gender_source_name, geocode, normalize_place,
                        sentiment_scores)
from .topics import LdaModel, profile_topic_distribution

EARTH_RADIUS_KM = 6371.0
SECONDS_PER_DAY = 86400

ATTRIBUTES = ("location", "gender", "photo", "freetext", "activity", "interest", "sentiment")
DEFAULT_NAME_COMBOS = (("screen_name", "username"), ("display_name", "display_name"))


@dataclass(frozen=True)
class NormalizationSpec:
    location_scale_km: float = 20015.1
    activity_horizon_s: int = SECONDS_PER_DAY
    location_offset_km: float = 0.0

    def __post_init__(self):
        if self.location_scale_km <= 0 or self.activity_horizon_s <= 0:
            raise ValueError("normalization scales must be strictly positive")
        if self.location_offset_km < 0:
            raise ValueError("location offset must be nonnegative")

    @classmethod
    def minmax(cls, distances_km, activity_horizon_s: int = SECONDS_PER_DAY) -> "NormalizationSpec":
        """Batch min-max scaling of great-circle distances."""
        d = np.asarray([x for x in distances_km if not math.isnan(x)], dtype=float)
        if d.size == 0:
            return cls(activity_horizon_s=activity_horizon_s)
        lo, hi = float(d.min()), float(d.max())
        return cls(location_scale_km=hi - lo if hi > lo else 1.0,
                   activity_horizon_s=activity_horizon_s, location_offset_km=lo)

    def to_dict(self) -> dict:
        return {"location_scale_km": self.location_scale_km,
                "activity_horizon_s": self.activity_horizon_s,
                "location_offset_km": self.location_offset_km}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationSpec":
        return cls(float(d["location_scale_km"]), int(d["activity_horizon_s"]),
                   float(d.get("location_offset_km", 0.0)))


@dataclass(frozen=True)
class SimilarityConfig:
    norm: NormalizationSpec = field(default_factory=NormalizationSpec)
    name_combos: tuple[tuple[str, str], ...] = DEFAULT_NAME_COMBOS

    @property
    def feature_names(self) -> list[str]:
        return [combo_id(c) for c in self.name_combos] + list(ATTRIBUTES)

    def to_dict(self) -> dict:
        return {"norm": self.norm.to_dict(), "name_combos": [list(c) for c in self.name_combos]}

    @classmethod
    def from_dict(cls, d: dict) -> "SimilarityConfig":
        return cls(NormalizationSpec.from_dict(d["norm"]),
                   tuple((a, t) for a, t in d["name_combos"]))


def combo_id(combo: tuple[str, str]) -> str:
    return f"name:{combo[0]}/{combo[1]}"


def _as_config(config) -> SimilarityConfig:
    if config is None:
        return SimilarityConfig()
    if isinstance(config, NormalizationSpec):
        return SimilarityConfig(norm=config)
    return config


@dataclass(frozen=True)
class SimilarityVector:
    name_sims: tuple[tuple[str, float | None], ...] = ()
    location: float | None = None
    gender: float | None = None
    photo: float | None = None
    freetext: float | None = None
    activity: float | None = None
    interest: float | None = None
    sentiment: float | None = None

    @property
    def feature_names(self) -> list[str]:
        return [cid for cid, _ in self.name_sims] + list(ATTRIBUTES)

    def values(self) -> list[float | None]:
        return [s for _, s in self.name_sims] + [getattr(self, a) for a in ATTRIBUTES]

    def as_array(self) -> np.ndarray:
        return np.array([np.nan if v is None else v for v in self.values()], dtype=float)

    @classmethod
    def from_array(cls, names: Sequence[str], row) -> "SimilarityVector":
        vals = [None if math.isnan(x) else float(x) for x in row]
        n_names = len(names) - len(ATTRIBUTES)
        if n_names < 0 or list(names[n_names:]) != list(ATTRIBUTES):
            raise ValueError("feature layout does not end with the attribute scores")
        attrs = dict(zip(ATTRIBUTES, vals[n_names:]))
        return cls(tuple(zip(names[:n_names], vals[:n_names])), **attrs)


# --- scalar kernels ----------------------------------------------------------

@njit(cache=True)
def _levenshtein(a, b):
    n, m = a.shape[0], b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            best = prev[j - 1] + cost
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _name_score(a, b):
    n, m = a.shape[0], b.shape[0]
    if n == 0 and m == 0:
        return 1.0
    return 1.0 - _levenshtein(a, b) / max(n, m)


@njit(cache=True)
def _haversine_km(lat1, lon1, lat2, lon2):
    dlat = math.radians(lat2 - lat1)
    dlon = math.radians(lon2 - lon1)
    s1 = math.sin(dlat / 2.0)
    s2 = math.sin(dlon / 2.0)
    h = s1 * s1 + math.cos(math.radians(lat1)) * math.cos(math.radians(lat2)) * s2 * s2
    if h > 1.0:
        h = 1.0
    return 2.0 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


@njit(cache=True)
def _location_score(lat1, lon1, lat2, lon2, offset, scale):
    gd = _haversine_km(lat1, lon1, lat2, lon2) - offset
    if gd < 0.0:
        gd = 0.0
    r = gd / scale
    if r > 1.0:
        r = 1.0
    return 1.0 - r


@njit(cache=True)
def _gender_score(da, qa, db, qb):
    # d: 1 male, 0 female, -1 undeclared; q: inferred P(male) or NaN
    if da >= 0 and db >= 0:
        return 1.0 if da == db else 0.0
    if da >= 0:
        if math.isnan(qb):
            return np.nan
        return qb if da == 1 else 1.0 - qb
    if db >= 0:
        if math.isnan(qa):
            return np.nan
        return qa if db == 1 else 1.0 - qa
    if math.isnan(qa) or math.isnan(qb):
        return np.nan
    return qa * qb + (1.0 - qa) * (1.0 - qb)


@njit(cache=True)
def _photo_score(ea, eb):
    d = 0.0
    for k in range(ea.shape[0]):
        diff = ea[k] - eb[k]
        d += diff * diff
    if d > 4.0:
        d = 4.0
    return 1.0 - d / 4.0


@njit(cache=True)
def _cosine(ida, ca, ssa, idb, cb, ssb):
    if ida.shape[0] == 0 or idb.shape[0] == 0:
        return np.nan
    i = j = 0
    dot = 0
    while i < ida.shape[0] and j < idb.shape[0]:
        if ida[i] == idb[j]:
            dot += ca[i] * cb[j]
            i += 1
            j += 1
        elif ida[i] < idb[j]:
            i += 1
        else:
            j += 1
    r = dot / math.sqrt(float(ssa) * float(ssb))
    return 1.0 if r > 1.0 else r


@njit(cache=True)
def _nearest(x, b, left, right):
    """Best of the nearest unused neighbours: (gap, earlier timestamp, index)."""
    m = b.shape[0]
    g, lo, j = -1, 0, -1
    if left >= 0:
        g, lo, j = x - b[left], b[left], left
    if right < m:
        gr = b[right] - x
        if j < 0 or gr < g or (gr == g and x < lo):
            g, lo, j = gr, x, right
    return g, lo, j


@njit(cache=True)
def _activity_mean_gap(a, b):
    """Mean gap of greedily chosen disjoint pairs, smallest gap first.

    Ties on the gap go to the pair with the earlier timestamp, which keeps
    the result independent of which list is passed first. Both lists must
    be sorted; unused entries of ``b`` are kept in a linked list so each
    element of ``a`` only watches its nearest unused neighbour on each side.
    """
    n, m = a.shape[0], b.shape[0]
    k = min(n, m)
    prv = np.arange(-1, m - 1)
    nxt = np.arange(1, m + 1)
    left = np.empty(n, dtype=np.int64)
    right = np.empty(n, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        p = np.searchsorted(b, a[i], side="right")
        left[i] = p - 1
        right[i] = p
    total = 0
    for _ in range(k):
        bi, bg, bl, bj = -1, 0, 0, -1
        for i in range(n):
            if done[i]:
                continue
            g, lo, j = _nearest(a[i], b, left[i], right[i])
            if bi < 0 or g < bg or (g == bg and lo < bl):
                bi, bg, bl, bj = i, g, lo, j
        done[bi] = True
        total += bg
        pj, nj = prv[bj], nxt[bj]
        if pj >= 0:
            nxt[pj] = nj
        if nj < m:
            prv[nj] = pj
        for i in range(n):
            if not done[i]:
                if left[i] == bj:
                    left[i] = pj
                if right[i] == bj:
                    right[i] = nj
    return total / k


@njit(cache=True)
def _activity_score(a, b, horizon):
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.nan
    r = _activity_mean_gap(a, b) / horizon
    if r > 1.0:
        r = 1.0
    return 1.0 - r


@njit(cache=True)
def _interest_score(da, db):
    s = 0.0
    for k in range(da.shape[0]):
        s += abs(da[k] - db[k])
    return 1.0 - s / da.shape[0]


@njit(cache=True)
def _sentiment_score(days_a, pos_a, neg_a, days_b, pos_b, neg_b):
    i = j = 0
    acc = 0.0
    n = 0
    while i < days_a.shape[0] and j < days_b.shape[0]:
        if days_a[i] == days_b[j]:
            acc += (abs(pos_a[i] - pos_b[j]) + abs(neg_a[i] - neg_b[j])) / 2.0
            n += 1
            i += 1
            j += 1
        elif days_a[i] < days_b[j]:
            i += 1
        else:
            j += 1
    if n == 0:
        return np.nan
    return 1.0 - acc / n


# --- batched kernels over pair lists ---------------------------------------

@njit(cache=True)
def _pairs_names(codes_a, off_a, ok_a, codes_b, off_b, ok_b, ia, it, out):
    for p in range(ia.shape[0]):
        i, j = ia[p], it[p]
        if ok_a[i] and ok_b[j]:
            out[p] = _name_score(codes_a[off_a[i]:off_a[i + 1]], codes_b[off_b[j]:off_b[j + 1]])
        else:
            out[p] = np.nan


@njit(cache=True)
def _pairs_location(lat_a, lon_a, ok_a, lat_b, lon_b, ok_b, offset, scale, ia, it, out):
    for p in range(ia.shape[0]):
        i, j = ia[p], it[p]
        if ok_a[i] and ok_b[j]:
            out[p] = _location_score(lat_a[i], lon_a[i], lat_b[j], lon_b[j], offset, scale)
        else:
            out[p] = np.nan


@njit(cache=True)
def _pairs_gender(d_a, q_a, d_b, q_b, ia, it, out):
    for p in range(ia.shape[0]):
        out[p] = _gender_score(d_a[ia[p]], q_a[ia[p]], d_b[it[p]], q_b[it[p]])


@njit(cache=True)
def _pairs_photo(e_a, ok_a, e_b, ok_b, ia, it, out):
    for p in range(ia.shape[0]):
        i, j = ia[p], it[p]
        if ok_a[i] and ok_b[j]:
            out[p] = _photo_score(e_a[i], e_b[j])
        else:
            out[p] = np.nan


@njit(cache=True)
def _pairs_freetext(id_a, c_a, off_a, ss_a, id_b, c_b, off_b, ss_b, ia, it, out):
    for p in range(ia.shape[0]):
        i, j = ia[p], it[p]
        out[p] = _cosine(id_a[off_a[i]:off_a[i + 1]], c_a[off_a[i]:off_a[i + 1]], ss_a[i],
                         id_b[off_b[j]:off_b[j + 1]], c_b[off_b[j]:off_b[j + 1]], ss_b[j])


@njit(cache=True)
def _pairs_activity(ts_a, off_a, ts_b, off_b, horizon, ia, it, out):
    for p in range(ia.shape[0]):
        i, j = ia[p], it[p]
        out[p] = _activity_score(ts_a[off_a[i]:off_a[i + 1]], ts_b[off_b[j]:off_b[j + 1]], horizon)


@njit(cache=True)
def _pairs_interest(t_a, ok_a, t_b, ok_b, ia, it, out):
    for p in range(ia.shape[0]):
        i, j = ia[p], it[p]
        if ok_a[i] and ok_b[j]:
            out[p] = _interest_score(t_a[i], t_b[j])
        else:
            out[p] = np.nan


@njit(cache=True)
def _pairs_sentiment(d_a, p_a, n_a, off_a, d_b, p_b, n_b, off_b, ia, it, out):
    for p in range(ia.shape[0]):
        i, j = ia[p], it[p]
        sa, ea = off_a[i], off_a[i + 1]
        sb, eb = off_b[j], off_b[j + 1]
        out[p] = _sentiment_score(d_a[sa:ea], p_a[sa:ea], n_a[sa:ea], d_b[sb:eb], p_b[sb:eb], n_b[sb:eb])


# --- feature precomputation ----------------------------------------------------

def _codes(text: str) -> np.ndarray:
    return np.frombuffer(text.casefold().encode("utf-32-le"), dtype=np.uint32).astype(np.int32)


def _ragged(chunks, dtype):
    offsets = np.zeros(len(chunks) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(c) for c in chunks])
    flat = np.concatenate([np.asarray(c, dtype=dtype) for c in chunks]) if chunks else np.zeros(0, dtype)
    return flat.astype(dtype, copy=False), offsets


def _entity_vector(counter, vocab: dict) -> tuple[np.ndarray, np.ndarray, int]:
    ids = [vocab.setdefault(tok, len(vocab)) for tok in counter]
    order = np.argsort(ids, kind="stable")
    ids = np.asarray(ids, dtype=np.int64)[order]
    counts = np.asarray(list(counter.values()), dtype=np.int64)[order]
    return ids, counts, int((counts * counts).sum())


@lru_cache(maxsize=1 << 18)
def _post_sentiment(lex: SentimentLexicon, text: str) -> tuple[float, float]:
    return sentiment_scores(lex, text)


def daily_sentiment(posts, lex: SentimentLexicon):
    """Sorted UTC days with the day's mean positive and negative probabilities."""
    by_day: dict[int, list] = {}
    for post in posts:
        by_day.setdefault(post.timestamp // SECONDS_PER_DAY, []).append(_post_sentiment(lex, post.text))
    days = sorted(by_day)
    pos = [sum(s[0] for s in by_day[d]) / len(by_day[d]) for d in days]
    neg = [sum(s[1] for s in by_day[d]) / len(by_day[d]) for d in days]
    return np.asarray(days, dtype=np.int64), np.asarray(pos, dtype=float), np.asarray(neg, dtype=float)


def _check_sorted(ts):
    if any(ts[i] > ts[i + 1] for i in range(len(ts) - 1)):
        raise ValueError("timestamps must be sorted ascending")


@dataclass
class FeatureTable:
    """Per-profile precomputed inputs to the similarity kernels."""
    ids: list[str]
    names: dict
    loc: tuple
    gender: tuple
    photo: tuple
    freetext: tuple
    activity: tuple
    interest: tuple
    sentiment: tuple

    def __len__(self):
        return len(self.ids)


def build_features(profiles: Sequence[Profile], providers: Providers, topic_model: LdaModel | None,
                   kinds: Sequence[str], vocab: dict, embedding_dim: int | None = None) -> FeatureTable:
    """Precompute features for ``profiles``.

    ``vocab`` interns entity strings; pass the same dict for both sides of a
    comparison. ``kinds`` are the name fields this side contributes.
    """
    n = len(profiles)
    names = {}
    for kind in kinds:
        texts = [p.name(kind) for p in profiles]
        codes, off = _ragged([_codes(t) if t is not None else np.zeros(0, np.int32) for t in texts], np.int32)
        names[kind] = (codes, off, np.array([t is not None for t in texts], dtype=np.bool_))

    lat = np.zeros(n)
    lon = np.zeros(n)
    loc_ok = np.zeros(n, dtype=np.bool_)
    for i, p in enumerate(profiles):
        c = geocode(providers.gazetteer, p.location_text)
        if c is not None:
            lat[i], lon[i] = c
            loc_ok[i] = True

    g_decl = np.array([-1 if p.declared_gender is None else int(p.declared_gender == "male") for p in profiles],
                      dtype=np.int64)
    g_q = np.full(n, np.nan)
    for i, p in enumerate(profiles):
        q = gender_distribution(providers.names, gender_source_name(p))
        if q is not None:
            g_q[i] = q

    dims = {len(p.photo_embedding) for p in profiles if p.photo_embedding is not None}
    if embedding_dim:
        dims.add(embedding_dim)
    if len(dims) > 1:
        raise DataError(f"photo embeddings of differing lengths {sorted(dims)}")
    dim = dims.pop() if dims else 0
    emb = np.zeros((n, dim))
    emb_ok = np.zeros(n, dtype=np.bool_)
    for i, p in enumerate(profiles):
        if p.photo_embedding is not None:
            emb[i] = p.photo_embedding
            emb_ok[i] = True

    ent = [_entity_vector(extract_entities(p.freetext), vocab) for p in profiles]
    ent_ids, ent_off = _ragged([e[0] for e in ent], np.int64)
    ent_cnt, _ = _ragged([e[1] for e in ent], np.int64)
    ent_ss = np.array([e[2] for e in ent], dtype=np.int64)

    for p in profiles:
        _check_sorted(p.timestamps)
    ts, ts_off = _ragged([p.timestamps for p in profiles], np.int64)

    theta = topic_model.theta if topic_model is not None else 1
    topics = np.zeros((n, theta))
    topic_ok = np.zeros(n, dtype=np.bool_)
    if topic_model is not None:
        for i, p in enumerate(profiles):
            if p.posts:
                topics[i] = profile_topic_distribution(topic_model, p.posts)
                topic_ok[i] = True

    daily = [daily_sentiment(p.posts, providers.lexicon) for p in profiles]
    s_days, s_off = _ragged([d[0] for d in daily], np.int64)
    s_pos, _ = _ragged([d[1] for d in daily], np.float64)
    s_neg, _ = _ragged([d[2] for d in daily], np.float64)

    return FeatureTable(
        ids=[p.profile_id for p in profiles],
        names=names,
        loc=(lat, lon, loc_ok),
        gender=(g_decl, g_q),
        photo=(emb, emb_ok),
        freetext=(ent_ids, ent_cnt, ent_off, ent_ss),
        activity=(ts, ts_off),
        interest=(topics, topic_ok),
        sentiment=(s_days, s_pos, s_neg, s_off),
    )


def pair_features(fa: FeatureTable, fb: FeatureTable, ia, it, config: SimilarityConfig | None = None) -> np.ndarray:
    """Similarity features for pairs (fa[ia[p]], fb[it[p]]); NaN marks missing."""
    config = _as_config(config)
    ia = np.ascontiguousarray(ia, dtype=np.int64)
    it = np.ascontiguousarray(it, dtype=np.int64)
    out = np.empty((len(config.feature_names), ia.shape[0]))
    row = 0
    for ka, kb in config.name_combos:
        _pairs_names(*fa.names[ka], *fb.names[kb], ia, it, out[row])
        row += 1
    norm = config.norm
    _pairs_location(*fa.loc, *fb.loc, float(norm.location_offset_km), float(norm.location_scale_km),
                    ia, it, out[row])
    _pairs_gender(*fa.gender, *fb.gender, ia, it, out[row + 1])
    if fa.photo[0].shape[1] != fb.photo[0].shape[1] and fa.photo[1].any() and fb.photo[1].any():
        raise DataError("photo embeddings of differing lengths across corpora")
    if fa.photo[0].shape[1] == fb.photo[0].shape[1]:
        _pairs_photo(*fa.photo, *fb.photo, ia, it, out[row + 2])
    else:
        out[row + 2] = np.nan
    _pairs_freetext(*fa.freetext, *fb.freetext, ia, it, out[row + 3])
    _pairs_activity(*fa.activity, *fb.activity, float(norm.activity_horizon_s), ia, it, out[row + 4])
    if fa.interest[0].shape[1] == fb.interest[0].shape[1]:
        _pairs_interest(*fa.interest, *fb.interest, ia, it, out[row + 5])
    else:
        out[row + 5] = np.nan
    _pairs_sentiment(*fa.sentiment, *fb.sentiment, ia, it, out[row + 6])
    return out.T.copy()


def block_features(fa: FeatureTable, fb: FeatureTable, config: SimilarityConfig | None = None) -> np.ndarray:
    """Features for every (aux, target) pair, shaped (len(fa), len(fb), m)."""
    na, nb = len(fa), len(fb)
    ia = np.repeat(np.arange(na, dtype=np.int64), nb)
    it = np.tile(np.arange(nb, dtype=np.int64), na)
    feats = pair_features(fa, fb, ia, it, config)
    return feats.reshape(na, nb, -1)


def corpus_features(aux_profiles, target_profiles, providers, topic_model, config=None):
    """Feature tables for both sides sharing one entity vocabulary."""
    config = _as_config(config)
    vocab: dict = {}
    fa = build_features(aux_profiles, providers, topic_model, sorted({a for a, _ in config.name_combos}), vocab)
    fb = build_features(target_profiles, providers, topic_model, sorted({t for _, t in config.name_combos}), vocab)
    return fa, fb


def compute_similarity_vector(a: Profile, b: Profile, providers: Providers, topic_model: LdaModel | None = None,
                              config=None) -> SimilarityVector:
    """All attribute similarities of aux profile ``a`` against target profile ``b``."""
    config = _as_config(config)
    fa, fb = corpus_features([a], [b], providers, topic_model, config)
    row = pair_features(fa, fb, [0], [0], config)[0]
    return SimilarityVector.from_array(config.feature_names, row)


# --- single-metric entry points -------------------------------------------------

def _opt(x: float) -> float | None:
    return None if math.isnan(x) else float(x)


def username_similarity(a: str, b: str) -> float:
    return float(_name_score(_codes(a), _codes(b)))


def levenshtein(a: str, b: str) -> int:
    return int(_levenshtein(_codes(a), _codes(b)))


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    return float(_haversine_km(float(lat1), float(lon1), float(lat2), float(lon2)))


def location_similarity(a: str | None, b: str | None, gaz: Gazetteer,
                        norm: NormalizationSpec | None = None) -> float | None:
    norm = norm or NormalizationSpec()
    ca, cb = geocode(gaz, a), geocode(gaz, b)
    if ca is None or cb is None:
        return None
    if normalize_place(a) == normalize_place(b):
        return 1.0
    return float(_location_score(ca[0], ca[1], cb[0], cb[1], float(norm.location_offset_km),
                                 float(norm.location_scale_km)))


def _gender_inputs(p: Profile, tbl: NameGenderTable):
    d = -1 if p.declared_gender is None else int(p.declared_gender == "male")
    q = gender_distribution(tbl, gender_source_name(p))
    return d, np.nan if q is None else q


def gender_similarity(a: Profile, b: Profile, tbl: NameGenderTable) -> float | None:
    return _opt(_gender_score(*_gender_inputs(a, tbl), *_gender_inputs(b, tbl)))


def photo_similarity(a, b) -> float | None:
    if a is None or b is None:
        return None
    ea, eb = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if ea.shape != eb.shape:
        raise DataError(f"embedding lengths differ: {ea.shape[0]} vs {eb.shape[0]}")
    return float(_photo_score(ea, eb))


def freetext_similarity(a: str | None, b: str | None) -> float | None:
    if a is None or b is None:
        return None
    vocab: dict = {}
    va = _entity_vector(extract_entities(a), vocab)
    vb = _entity_vector(extract_entities(b), vocab)
    return _opt(_cosine(va[0], va[1], va[2], vb[0], vb[1], vb[2]))


def activity_similarity(a: Sequence[int], b: Sequence[int], norm: NormalizationSpec | None = None) -> float | None:
    norm = norm or NormalizationSpec()
    _check_sorted(a)
    _check_sorted(b)
    return _opt(_activity_score(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64),
                                float(norm.activity_horizon_s)))


def _check_distribution(d: np.ndarray):
    if d.ndim != 1 or (d < 0).any() or abs(d.sum() - 1.0) > 1e-9:
        raise ValueError("expected a nonnegative vector summing to 1")


def interest_similarity(a_dist, b_dist) -> float:
    da, db = np.asarray(a_dist, dtype=float), np.asarray(b_dist, dtype=float)
    if da.shape != db.shape:
        raise ValueError(f"topic distributions differ in length: {da.shape} vs {db.shape}")
    _check_distribution(da)
    _check_distribution(db)
    return float(_interest_score(da, db))


def sentiment_similarity(a_posts, b_posts, lex: SentimentLexicon) -> float | None:
    return _opt(_sentiment_score(*daily_sentiment(a_posts, lex), *daily_sentiment(b_posts, lex)))
