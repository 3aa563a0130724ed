import numpy as np
import pytest

from nisac.geometry_maps import make_grid, probability_map
from nisac.scene_gen import MAX_ATTEMPTS, SceneConfig, rng_for, sample_scene


def test_same_seed_and_index_give_same_scene():
    cfg = SceneConfig(seed=7)
    assert sample_scene(cfg, 3) == sample_scene(cfg, 3)
    assert sample_scene(cfg, 3) != sample_scene(cfg, 4)
    assert sample_scene(cfg, 3) != sample_scene(SceneConfig(seed=8), 3)


def test_draws_do_not_depend_on_call_order():
    cfg = SceneConfig(seed=1)
    forward = [sample_scene(cfg, i) for i in range(5)]
    backward = [sample_scene(cfg, i) for i in reversed(range(5))][::-1]
    assert forward == backward


def test_point_region_pins_target_center():
    cfg = SceneConfig(target_center_min=(0.7, -1.2), target_center_max=(0.7, -1.2))
    s = sample_scene(cfg, 0)
    assert s.targets[0].center == (0.7, -1.2, 1.0)
    assert s.targets[0].half_extents == (0.25, 0.25, 0.25)


def test_ues_never_inside_target():
    cfg = SceneConfig(seed=2, n_ues=4)
    for i in range(300):
        s = sample_scene(cfg, i)
        t = s.targets[0]
        assert all(not t.contains(u, margin=0.01) for u in s.ues)
        assert len(s.ues) == 4


def test_over_constrained_config_raises():
    # UEs pinned to the only possible target center
    cfg = SceneConfig(target_center_min=(0, 0), target_center_max=(0, 0),
                      ue_min=(0, 0, 1), ue_max=(0, 0, 1), n_ues=1)
    with pytest.raises(RuntimeError, match=str(MAX_ATTEMPTS)):
        sample_scene(cfg, 0)


@pytest.mark.parametrize("kwargs", [
    {"target_side_m": 0.0},
    {"target_center_min": (-3, -2), "target_center_max": (2, 2)},
    {"ue_min": (0, 0, 0), "ue_max": (0, 0, 4)},
    {"target_center_min": (1, 1), "target_center_max": (0, 0)},
])
def test_invalid_config_rejected(kwargs):
    with pytest.raises(ValueError):
        SceneConfig(**kwargs)


def test_target_center_uniform_chi_square():
    scipy_stats = pytest.importorskip("scipy.stats")
    cfg = SceneConfig(seed=11, n_ues=0)
    centers = np.array([sample_scene(cfg, i).targets[0].center[:2] for i in range(20_000)])
    hist, _, _ = np.histogram2d(centers[:, 0], centers[:, 1], bins=4, range=[[-2, 2], [-2, 2]])
    stat, p = scipy_stats.chisquare(hist.ravel())
    assert p > 0.01


def test_sampled_scenes_validate_and_label():
    cfg = SceneConfig(seed=5)
    grid = make_grid((-2.5, -2.5), (2.5, 2.5), 5)
    for i in range(50):
        s = sample_scene(cfg, i)
        s.validate()
        assert probability_map(s, grid).values.sum() == 1.0


def test_rng_streams_independent_of_each_other():
    a = rng_for(0, 1, 5).standard_normal(4)
    b = rng_for(0, 2, 5).standard_normal(4)
    c = rng_for(0, 1, 5).standard_normal(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, c)
