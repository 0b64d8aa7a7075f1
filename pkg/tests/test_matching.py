import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from profmatch.matching import (SENTINEL, MatchResult, ScoreMatrix, assignment_total, attack_from_matrix,
                                hungarian, hungarian_assign, load_matches, sample_victims, save_matches,
                                targeted_from_matrix)
from profmatch.profiles import DataError

from oracles import brute_max_assignment

shapes = st.tuples(st.integers(1, 7), st.integers(1, 7))


def _matrix(shape, seed, levels=None):
    r = np.random.default_rng(seed)
    if levels:   # few distinct values, many ties
        return r.integers(0, levels, size=shape).astype(float) / levels
    return r.random(shape)


def _check_one_to_one(pairs):
    assert len({i for i, _ in pairs}) == len(pairs) and len({j for _, j in pairs}) == len(pairs)


def test_identity_dominant_example():
    pairs = hungarian_assign(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert pairs == [(0, 0), (1, 1)] and assignment_total(np.eye(2), pairs) == 2.0


def test_cross_assignment_example():
    s = np.array([[0.9, 0.8], [0.7, 0.1]])
    pairs = hungarian_assign(s)
    assert pairs == [(0, 1), (1, 0)] and assignment_total(s, pairs) == pytest.approx(1.5, abs=1e-15)


@settings(max_examples=200)
@given(shapes, st.integers(0, 10**6), st.sampled_from([None, 2, 3]))
def test_optimal_against_brute_force(shape, seed, levels):
    s = _matrix(shape, seed, levels)
    pairs = hungarian_assign(s)
    _check_one_to_one(pairs)
    assert len(pairs) == min(shape)
    oracle = brute_max_assignment(s) if shape[0] <= shape[1] else brute_max_assignment(s.T)
    assert assignment_total(s, pairs) == pytest.approx(oracle, abs=1e-12)


@given(shapes, st.integers(0, 10**6))
def test_permutation_equivariance(shape, seed):
    s = _matrix(shape, seed)
    r = np.random.default_rng(seed + 1)
    pr, pc = r.permutation(shape[0]), r.permutation(shape[1])
    base = assignment_total(s, hungarian_assign(s))
    perm = s[pr][:, pc]
    assert assignment_total(perm, hungarian_assign(perm)) == pytest.approx(base, abs=1e-12)
    # with distinct scores the optimum is unique, so the pairs map across exactly
    mapped = sorted((int(pr[i]), int(pc[j])) for i, j in hungarian_assign(perm))
    assert mapped == sorted(hungarian_assign(s))


@given(st.integers(1, 6), st.integers(0, 10**6), st.integers(1, 3))
def test_padding_neutrality(n, seed, extra):
    s = _matrix((n, n), seed)
    padded = np.vstack([s, np.full((extra, n), SENTINEL)])
    assert hungarian_assign(padded) == hungarian_assign(s)
    wide = np.hstack([s, np.full((n, extra), SENTINEL)])
    assert hungarian_assign(wide) == hungarian_assign(s)


def test_rectangular_leaves_rows_unassigned():
    s = np.array([[0.1, 0.9], [0.8, 0.2], [0.5, 0.5]])
    cols = hungarian(s)
    assert list(cols) == [1, 0, -1]
    assert list(hungarian(np.zeros((0, 3)))) == []


def test_tied_matrix_is_deterministic():
    s = np.ones((5, 5))
    assert hungarian_assign(s) == hungarian_assign(s.copy())


def _score_matrix(seed=3, n=6, m=5):
    return ScoreMatrix([f"a{i}" for i in range(n)], [f"t{j}" for j in range(m)], _matrix((n, m), seed))


def test_threshold_extremes_and_monotone():
    mx = _score_matrix()
    res = attack_from_matrix(mx, -np.inf)
    assert len(res.accepted) == 5
    assert res.with_threshold(float(mx.scores.max()) + 1).accepted == []
    sizes = [len(res.with_threshold(t).accepted) for t in np.linspace(0, 1, 21)]
    assert sizes == sorted(sizes, reverse=True)


def test_targeted_single_victim_is_argmax():
    mx = _score_matrix()
    res = targeted_from_matrix(mx, ["t2"], -np.inf)
    assert res.assignments == [(f"a{int(np.argmax(mx.scores[:, 2]))}", "t2", float(mx.scores[:, 2].max()))]


def test_targeted_all_victims_equals_global():
    mx = _score_matrix()
    assert targeted_from_matrix(mx, mx.target_ids, 0.3).assignments == attack_from_matrix(mx, 0.3).assignments
    with pytest.raises(DataError):
        targeted_from_matrix(mx, ["nobody"], 0.0)


def test_sample_victims_deterministic():
    ids = [f"t{j}" for j in range(300)]
    runs = [sample_victims(ids, 100, seed) for seed in range(10)]
    assert runs == [sample_victims(ids, 100, seed) for seed in range(10)]
    assert all(len(set(r)) == 100 for r in runs) and runs[0] != runs[1]


def test_score_matrix_shape_checked():
    with pytest.raises(ValueError):
        ScoreMatrix(["a"], ["t", "u"], np.zeros((1, 3)))


def test_matches_round_trip(tmp_path):
    res = MatchResult([("a1", "t1", 0.75), ("a2", "t2", 0.25), ("a3", "t3", 0.5)], 0.5)
    save_matches(res, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "aux_id,target_id,score,accepted"
    again = load_matches(tmp_path / "m.csv")
    assert again.assignments == res.assignments and again.accepted == res.accepted
    assert again.threshold == 0.5
