import numpy as np
import pytest

from profmatch.pipeline import fit_topic_model, labeled_features
from profmatch.profiles import save_corpus, save_labels
from profmatch.similarity import SimilarityConfig
from profmatch.synth import GeneratorConfig, generate, parse_config_text, with_noise


def _gen(providers, cfg, vocab=None):
    return generate(cfg, providers.gazetteer, providers.lexicon, vocab, providers.names)


def test_deterministic_per_seed(providers, tmp_path):
    cfg = GeneratorConfig(n_coupled=20, n_uncoupled_per_side=10, seed=4)
    blobs = []
    for k in range(2):
        aux, tgt, labels = _gen(providers, cfg)
        save_corpus(aux, tmp_path / f"a{k}.jsonl")
        save_corpus(tgt, tmp_path / f"t{k}.jsonl")
        save_labels(labels, tmp_path / f"l{k}.csv")
        blobs.append([(tmp_path / f"{p}{k}{ext}").read_bytes() for p, ext in
                      (("a", ".jsonl"), ("t", ".jsonl"), ("l", ".csv"))])
    assert blobs[0] == blobs[1]
    other = _gen(providers, GeneratorConfig(n_coupled=20, n_uncoupled_per_side=10, seed=5))
    assert other[0].profiles != _gen(providers, cfg)[0].profiles


def test_zero_noise_coupled_pairs_score_one(providers):
    aux, tgt, labels = _gen(providers, GeneratorConfig.zero_noise(n_coupled=25, n_uncoupled_per_side=5, seed=2))
    lda = fit_topic_model([aux, tgt], theta=5, iterations=30)
    config = SimilarityConfig()
    F, y = labeled_features(aux, tgt, labels, providers, lda, config)
    coupled = F[y == 1]
    names = config.feature_names
    attr_cols = [k for k, n in enumerate(names) if not n.startswith("name:")]
    np.testing.assert_array_equal(coupled[:, attr_cols], 1.0)
    # the aligned name combination (screen name vs username) is an exact copy
    assert (coupled[:, names.index("name:screen_name/username")] == 1.0).all()


def test_no_coupled_profiles(providers):
    aux, tgt, labels = _gen(providers, GeneratorConfig(n_coupled=0, n_uncoupled_per_side=7, seed=1))
    assert len(aux) == len(tgt) == 7 and labels and not any(l.coupled for l in labels)


def test_labels_join_one_persona(providers):
    aux, tgt, labels = _gen(providers, GeneratorConfig.zero_noise(n_coupled=30, n_uncoupled_per_side=30, seed=9))
    for lab in labels:
        a, t = aux.get(lab.aux_id), tgt.get(lab.target_id)
        # faces are continuous random draws, so equality identifies the persona
        assert (a.photo_embedding == t.photo_embedding) == lab.coupled
    ids = [l.aux_id for l in labels] + [l.target_id for l in labels]
    assert len(set(ids)) == len(ids)


NOISE_KNOBS = [
    ("name_edit_rate", "name:screen_name/username", (0.0, 0.15, 0.4)),
    ("location_jitter_km", "location", (0.0, 300.0, 1500.0)),
    ("gender_flip_rate", "gender", (0.0, 0.2, 0.5)),
    ("photo_noise_sigma", "photo", (0.0, 0.2, 0.6)),
    ("freetext_swap_rate", "freetext", (0.0, 0.4, 1.0)),
    ("activity_jitter_s", "activity", (0.0, 3600.0, 20000.0)),
    ("topic_drift", "interest", (0.0, 0.4, 0.9)),
    ("sentiment_drift", "sentiment", (0.0, 0.3, 0.8)),
]


@pytest.fixture(scope="module")
def noise_lda(providers):
    aux, tgt, _ = _gen(providers, GeneratorConfig(n_coupled=150, n_uncoupled_per_side=0, seed=1))
    return fit_topic_model([aux, tgt], theta=10, iterations=60)


@pytest.mark.parametrize("knob, feature, values", NOISE_KNOBS, ids=[k[0] for k in NOISE_KNOBS])
def test_noise_ordering(providers, noise_lda, knob, feature, values):
    config = SimilarityConfig()
    col = config.feature_names.index(feature)
    base = GeneratorConfig(n_coupled=200, n_uncoupled_per_side=0, seed=21, independent_post_rate=0.0)
    means = []
    for v in values:
        aux, tgt, labels = _gen(providers, with_noise(base, **{knob: v}))
        F, _ = labeled_features(aux, tgt, labels, providers, noise_lda, config)
        means.append(float(np.nanmean(F[:, col])))
    assert all(a >= b for a, b in zip(means, means[1:])), means


def test_parse_config_text():
    cfg = parse_config_text("# moderate\nn_coupled = 12\nname_edit_rate=0.3\nmissing.photo=0\n\nseed=7\n")
    assert cfg.n_coupled == 12 and cfg.name_edit_rate == 0.3 and cfg.seed == 7
    assert cfg.missing("photo") == 0.0 and cfg.missing("gender") == GeneratorConfig().missing("gender")
    for bad in ("bogus=1", "n_coupled", "missing.nose=0.1", "gender_flip_rate=2"):
        with pytest.raises(ValueError):
            parse_config_text(bad)
    assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg
