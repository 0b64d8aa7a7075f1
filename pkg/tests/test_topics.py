import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from profmatch.profiles import Post
from profmatch.topics import (fit_lda, infer_topics, load_lda, profile_topic_distribution, save_lda, tokenize)

from oracles import disjoint_topic_corpus, greedy_aligned_cosines


@pytest.fixture(scope="module")
def disjoint_model():
    docs, truth, vocab = disjoint_topic_corpus(seed=0)
    model = fit_lda(docs, theta=2, iterations=200, seed=1)
    return model, truth, vocab


def _true_rows(model, truth):
    words = sorted(model.vocabulary, key=model.vocabulary.get)
    return np.array([[truth[w][k] for w in words] for k in range(2)])


def test_tokenize():
    assert tokenize("The Coffee, the COFFEE! a b2 x") == ["coffee", "coffee", "b2", "x"]


def test_single_word_corpus():
    m = fit_lda(["x x x"], theta=2, iterations=20, seed=0)
    np.testing.assert_allclose(m.topic_word, [[1.0], [1.0]], atol=1e-12)


def test_fit_deterministic():
    docs, _, _ = disjoint_topic_corpus(seed=3, n_docs=40)
    a = fit_lda(docs, theta=3, iterations=30, seed=9)
    b = fit_lda(docs, theta=3, iterations=30, seed=9)
    assert a.digest() == b.digest()
    assert np.array_equal(infer_topics(a, docs[0]), infer_topics(b, docs[0]))


def test_disjoint_recovery(disjoint_model):
    model, truth, _ = disjoint_model
    cos = greedy_aligned_cosines(model.topic_word, _true_rows(model, truth))
    assert np.mean(cos) >= 0.9
    np.testing.assert_allclose(model.topic_word.sum(axis=1), 1.0, atol=1e-9)


def test_single_word_document_lands_on_its_topic():
    docs, truth, vocab = disjoint_topic_corpus(seed=0)
    model = fit_lda(docs, theta=2, alpha=0.1, iterations=200, seed=1)
    true_rows = _true_rows(model, truth)
    # which fitted topic carries topic 0's words
    k0 = int(np.argmax(model.topic_word @ true_rows[0]))
    assert infer_topics(model, vocab[0][3])[k0] >= 0.8
    assert infer_topics(model, vocab[1][3])[1 - k0] >= 0.8


def test_empty_and_unknown_documents_are_uniform(disjoint_model):
    model = disjoint_model[0]
    np.testing.assert_array_equal(infer_topics(model, ""), [0.5, 0.5])
    np.testing.assert_array_equal(infer_topics(model, "zebra quokka"), [0.5, 0.5])


@settings(max_examples=40)
@given(st.lists(st.sampled_from([f"t{k}w{v}" for k in range(2) for v in range(10)] + ["the", "zzz"]), max_size=15))
def test_inferred_distributions_normalized(disjoint_model, words):
    d = infer_topics(disjoint_model[0], " ".join(words))
    assert (d >= 0).all() and abs(d.sum() - 1.0) <= 1e-9


def test_profile_distribution(disjoint_model):
    model, _, vocab = disjoint_model
    assert np.array_equal(profile_topic_distribution(model, []), [0.5, 0.5])
    p = Post(1, " ".join(vocab[0][:4]))
    q = Post(2, " ".join(vocab[1][:2] + vocab[0][:1]))
    assert np.array_equal(profile_topic_distribution(model, [p]), infer_topics(model, p.text))
    expect = (infer_topics(model, p.text) + infer_topics(model, q.text)) / 2
    np.testing.assert_allclose(profile_topic_distribution(model, [p, q]), expect, atol=1e-15)


def test_save_load_round_trip(tmp_path, disjoint_model):
    model = disjoint_model[0]
    save_lda(model, tmp_path / "lda.json")
    again = load_lda(tmp_path / "lda.json")
    assert again.digest() == model.digest()
    doc = "t0w1 t1w2 t0w3"
    assert np.array_equal(infer_topics(again, doc), infer_topics(model, doc))


def test_rejects_bad_settings():
    with pytest.raises(ValueError):
        fit_lda(["a b"], theta=1)
    with pytest.raises(ValueError):
        fit_lda(["the and"], theta=2)
