import numpy as np
import pytest
from scipy import stats

from src.data.synthetic import SyntheticConfig, SyntheticGenerator, gen_dataset
from src.pipeline.anticipation import sample_frames
from src.utils.config import AnticipationConfig
from src.utils.errors import ConfigError
from tests.conftest import tiny_config


def test_same_seed_same_segments():
    cfg = SyntheticConfig(seed=3)
    first = gen_dataset(cfg, 6)
    second = gen_dataset(cfg, 6, workers=3)
    for a, b in zip(first, second):
        assert a.segment_id == b.segment_id
        assert a.labels == b.labels
        np.testing.assert_array_equal(a.frames, b.frames)


def test_different_seeds_differ():
    a = gen_dataset(SyntheticConfig(seed=1), 1)[0]
    b = gen_dataset(SyntheticConfig(seed=2), 1)[0]
    assert not np.array_equal(a.frames, b.frames)


def test_segment_layout():
    cfg = SyntheticConfig()
    segment = gen_dataset(cfg, 3)[2]
    assert segment.segment_id == "syn-000002"
    assert segment.frames.dtype == np.float32
    assert segment.frames.shape == (16, 16, 32)
    assert segment.fps == 4.0
    assert segment.t_start_s == pytest.approx(3.5)
    assert segment.action == segment.verb * cfg.num_nouns + segment.noun


def test_observation_window_fits_every_segment():
    segment = gen_dataset(SyntheticConfig(), 1)[0]
    assert sample_frames(segment, AnticipationConfig()).shape == (14, 16, 32)


def test_noise_free_segments_depend_only_on_labels():
    segments = gen_dataset(SyntheticConfig(noise=0.0), 60)
    by_label = {}
    for segment in segments:
        by_label.setdefault(segment.labels, []).append(segment.frames)
    assert any(len(group) > 1 for group in by_label.values())
    for group in by_label.values():
        for frames in group[1:]:
            np.testing.assert_array_equal(frames, group[0])


def test_only_noun_vertices_carry_signal():
    cfg = SyntheticConfig(noise=0.0)
    generator = SyntheticGenerator(cfg)
    for noun in range(cfg.num_nouns):
        frames = generator.clean_frames(verb=1, noun=noun)
        energy = (frames ** 2).sum(axis=(0, 2))
        mask = np.arange(cfg.num_vertices) % cfg.num_nouns == noun
        assert np.all(energy[mask] > 0)
        assert np.all(energy[~mask] == 0)


def test_verb_drift_reaches_full_strength():
    cfg = SyntheticConfig(noise=0.0)
    generator = SyntheticGenerator(cfg)
    ramp = generator.ramp()
    assert ramp[cfg.num_frames - 1] == 1.0
    assert ramp[-1] == 1.0
    assert np.all(np.diff(ramp) >= 0)
    frames = generator.clean_frames(verb=2, noun=0)
    drift = frames[:, 0, :] - generator.marker
    np.testing.assert_allclose(drift[cfg.num_frames - 1], generator.verb_directions[2], atol=1e-12)


def test_directions_are_orthonormal():
    generator = SyntheticGenerator(SyntheticConfig())
    basis = np.vstack([generator.marker, generator.verb_directions])
    np.testing.assert_allclose(basis @ basis.T, np.eye(basis.shape[0]), atol=1e-10)


def test_labels_are_uniform():
    cfg = SyntheticConfig(seed=11)
    generator = SyntheticGenerator(cfg)
    verbs = [generator.segment(i).verb for i in range(1000)]
    nouns = [generator.segment(i).noun for i in range(1000)]
    for labels, classes in ((verbs, cfg.num_verbs), (nouns, cfg.num_nouns)):
        counts = np.bincount(labels, minlength=classes)
        assert stats.chisquare(counts).pvalue > 1e-3


def test_from_run_config():
    config = tiny_config(**{"run.seed": 9})
    cfg = SyntheticConfig.from_run_config(config)
    assert cfg.num_vertices == 4
    assert cfg.feature_dim == 8
    assert cfg.seed == 9


@pytest.mark.parametrize("overrides", [
    {"grid_h": 1, "grid_w": 3},
    {"num_verbs": 1, "num_nouns": 1},
    {"feature_dim": 5, "num_verbs": 5},
    {"grid_h": 2, "grid_w": 2, "num_nouns": 5},
    {"sequence_length": 15},
    {"noise": -0.1},
])
def test_invalid_settings(overrides):
    with pytest.raises(ConfigError):
        SyntheticGenerator(SyntheticConfig(**overrides))
