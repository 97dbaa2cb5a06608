import numpy as np
import pytest

from synthsat.compositor import (
    COVERAGE_TARGETS,
    CompositeRecipe,
    composite,
    degrade_resolution,
    generate_clouds,
    mood_blend,
)
from synthsat.errors import InvalidConfig, InvalidGsd, ResolutionMismatch
from synthsat.seeds import rng_for


@pytest.mark.parametrize("level", sorted(COVERAGE_TARGETS))
def test_cloud_coverage_hits_target(level):
    target = COVERAGE_TARGETS[level]
    for seed in range(10):
        layer = generate_clouds(level, seed, 128)
        assert abs(layer.measured_coverage - target) <= 0.03
        assert layer.alpha.min() >= 0.0 and layer.alpha.max() <= 1.0


def test_clouds_deterministic():
    a = generate_clouds("medium", 5, 96)
    b = generate_clouds("medium", 5, 96)
    assert np.array_equal(a.rgb, b.rgb)
    assert np.array_equal(a.alpha, b.alpha)
    assert a.measured_coverage == b.measured_coverage


def test_clouds_unknown_level():
    with pytest.raises(InvalidConfig):
        generate_clouds("overcast", 1, 64)


def _solid(value, shape=(8, 8, 3)):
    return np.full(shape, value, np.uint8)


def test_composite_alpha_zero_identity():
    base = rng_for(1, "cmp").integers(0, 256, (8, 8, 3)).astype(np.uint8)
    rec = CompositeRecipe(base_rgb=base, detail_layers=(("x", _solid(200), np.zeros((8, 8))),))
    assert np.array_equal(composite(rec), base)


def test_composite_alpha_one_replaces():
    rec = CompositeRecipe(
        base_rgb=_solid(100), detail_layers=(("x", _solid(200), np.ones((8, 8))),)
    )
    assert (composite(rec) == 200).all()


def test_composite_half_alpha_example():
    rec = CompositeRecipe(
        base_rgb=_solid(100), detail_layers=(("x", _solid(200), np.full((8, 8), 0.5)),)
    )
    assert (composite(rec) == 150).all()


def test_composite_resolution_mismatch():
    rec = CompositeRecipe(
        base_rgb=_solid(100), detail_layers=(("x", _solid(200, (4, 4, 3)), np.ones((4, 4))),)
    )
    with pytest.raises(ResolutionMismatch):
        composite(rec)


def test_composite_grouping_tolerance():
    """Over-operator associativity up to one gray level after final rounding."""
    base = rng_for(1, "assoc").integers(0, 256, (16, 16, 3)).astype(np.uint8)
    l1 = rng_for(2, "assoc").integers(0, 256, (16, 16, 3)).astype(np.uint8)
    l2 = rng_for(3, "assoc").integers(0, 256, (16, 16, 3)).astype(np.uint8)
    a1 = rng_for(4, "assoc").random((16, 16))
    a2 = rng_for(5, "assoc").random((16, 16))
    seq = composite(CompositeRecipe(base_rgb=base, detail_layers=(("a", l1, a1), ("b", l2, a2))))
    merged_alpha = a2 + a1 * (1 - a2)
    safe = np.where(merged_alpha > 0, merged_alpha, 1.0)[..., None]
    merged_rgb = (a2[..., None] * l2 + ((1 - a2) * a1)[..., None] * l1) / safe
    grouped = merged_alpha[..., None] * merged_rgb + (1 - merged_alpha[..., None]) * base
    grouped = np.floor(np.clip(grouped, 0, 255) + 0.5).astype(np.uint8)
    assert np.abs(seq.astype(int) - grouped.astype(int)).max() <= 1


def test_mood_identity_at_zero():
    img = rng_for(6, "mood").integers(0, 256, (8, 8, 3)).astype(np.uint8)
    assert np.array_equal(mood_blend(img, "night", 0.0), img)


def test_mood_night_table_values():
    out = mood_blend(_solid(128), "night", 1.0)
    assert out[0, 0].tolist() == [32, 40, 70]  # round(128*mult + offset)


def test_mood_monotone_in_weight():
    img = _solid(128)
    end = mood_blend(img, "night", 1.0).astype(int)
    prev = img.astype(int)
    last_dist = np.abs(prev - end).sum()
    for w in (0.25, 0.5, 0.75, 1.0):
        cur = mood_blend(img, "night", w).astype(int)
        dist = np.abs(cur - end).sum()
        assert dist <= last_dist
        last_dist = dist


def test_mood_validation():
    with pytest.raises(InvalidConfig):
        mood_blend(_solid(10), "midnight", 0.5)
    with pytest.raises(InvalidConfig):
        mood_blend(_solid(10), "night", 1.5)


def test_degrade_identity():
    img = rng_for(7, "deg").integers(0, 256, (64, 64, 3)).astype(np.uint8)
    assert np.array_equal(degrade_resolution(img, 1.0, 1.0, 0.0), img)


def test_degrade_preserves_mean():
    img = rng_for(8, "deg").integers(0, 256, (96, 96, 3)).astype(np.uint8)
    out = degrade_resolution(img, 0.8, 2.0, 1.2)
    assert abs(float(out.mean()) - float(img.mean())) / float(img.mean()) < 0.005


def test_degrade_point_source_sigma():
    sigma = 2.0
    img = np.zeros((65, 65, 3), np.uint8)
    img[32, 32] = 255
    out = degrade_resolution(img, 1.0, 1.0, sigma).astype(np.float64)
    profile = out[32, :, 0]
    xs = (np.arange(65) - 32).astype(np.float64)
    best = (np.inf, 0.0)
    for sig in np.arange(0.5, 4.0, 0.02):
        g = np.exp(-(xs**2) / (2.0 * sig * sig))
        amp = float((profile * g).sum() / (g * g).sum())
        sse = float(((profile - amp * g) ** 2).sum())
        if sse < best[0]:
            best = (sse, float(sig))
    assert abs(best[1] - sigma) / sigma < 0.10


def test_degrade_contractive_range():
    img = rng_for(9, "deg").integers(20, 200, (64, 64, 3)).astype(np.uint8)
    out = degrade_resolution(img, 1.0, 3.3, 1.0)
    assert int(out.min()) >= int(img.min()) - 1
    assert int(out.max()) <= int(img.max()) + 1


def test_degrade_rejects_upsampling():
    with pytest.raises(InvalidGsd):
        degrade_resolution(_solid(10), 2.0, 1.0, 0.0)


def test_full_recipe_deterministic():
    base = rng_for(10, "rec").integers(0, 256, (64, 64, 3)).astype(np.uint8)
    clouds = generate_clouds("low", 3, 64)
    layers = (("cars", _solid(180, (64, 64, 3)), (rng_for(11, "rec").random((64, 64)) > 0.9) * 1.0),)
    rec = CompositeRecipe(
        base_rgb=base,
        detail_layers=layers,
        clouds=clouds,
        mood_tag="evening",
        mood_weight=0.4,
        psf_sigma_px=1.0,
        native_gsd=1.0,
        target_gsd=2.0,
    )
    assert np.array_equal(composite(rec), composite(rec))
