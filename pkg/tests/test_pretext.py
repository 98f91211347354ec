import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from v3s.errors import ClipTooShort, ExhaustedRetries
from v3s.geometry import invert, map_point
from v3s.pretext import (GeometryConfig, LabelPair, TaskCatalog, build_dataset, default_catalog, draw_specs,
                         generate_sample, make_catalog, transform_clip)
from v3s.synthgen import ShapeScene, measure_extent, measure_motion, render
from v3s.temporal import TemporalSpec
from v3s.warp import (Rect, SpatialSpec, apply_spatial, head_length, head_square, preprocess_clip,
                      spec_homography)

FULL = GeometryConfig(resize_to=64, crop_size=64)


def test_default_catalog_sizes_and_order():
    cat = default_catalog()
    assert cat.n_spatial == 19 and cat.n_temporal == 11
    assert cat.spatial_classes[0] == SpatialSpec.identity()
    assert [s.name for s in cat.spatial_classes[1:7]] == [
        "scale:1,1.15", "scale:1,1.3", "scale:1,1.45", "scale:1.15,1", "scale:1.3,1", "scale:1.45,1"]
    assert cat.spatial_classes[7].name == "projection:0.8,left"
    assert cat.spatial_classes[18].name == "projection:0.5,bottom"
    assert [t.name for t in cat.temporal_classes[:3]] == ["scale:1", "scale:2", "scale:3"]
    assert cat.temporal_classes[-1].name == "projection:5,4"


def test_catalog_validation():
    with pytest.raises(ValueError):
        TaskCatalog((), (TemporalSpec.scale(1),))
    with pytest.raises(ValueError):
        TaskCatalog((SpatialSpec.identity(), SpatialSpec.identity()), (TemporalSpec.scale(1),))


def test_catalog_hash_tracks_contents():
    assert default_catalog().hash() == default_catalog().hash()
    assert default_catalog().hash() != make_catalog(speeds=(1, 2)).hash()
    assert default_catalog().hash() != make_catalog(clip_len=8).hash()


def single(spatial=SpatialSpec.identity(), temporal=TemporalSpec.scale(1)):
    return TaskCatalog((spatial,), (temporal,))


def test_single_class_draws():
    s, t, labels = draw_specs(np.random.default_rng(0), single())
    assert labels == LabelPair(0, 0) and s.kind == "identity" and t.name == "scale:1"


def test_draws_are_seeded():
    cat = default_catalog()
    a = [draw_specs(np.random.default_rng(5), cat)[2] for _ in range(3)]
    b = [draw_specs(np.random.default_rng(5), cat)[2] for _ in range(3)]
    assert a == b


def test_draws_are_uniform():
    cat = default_catalog()
    rng = np.random.default_rng(77)
    labels = [draw_specs(rng, cat)[2] for _ in range(10_000)]
    s = np.bincount([p.spatial_class for p in labels], minlength=19)
    t = np.bincount([p.temporal_class for p in labels], minlength=11)
    assert stats.chisquare(s).pvalue > 0.01 and stats.chisquare(t).pvalue > 0.01


def moving_video(n=72, **kw):
    args = dict(size=(8, 16), start=(20, 32), velocity=(0.5, 0.0), n_frames=n)
    args.update(kw)
    return render(ShapeScene(**args))


def test_identity_speed_one_is_preprocessed_original():
    video = moving_video()
    rng = np.random.default_rng(2)
    sample = generate_sample(video, rng, single(), GeometryConfig(), "v0")
    r = sample.provenance["start"]
    x, y = sample.provenance["crop"]
    expected = preprocess_clip(video[r:r + 16], 64, Rect(x, y, 32, 32))
    np.testing.assert_array_equal(sample.clip, expected)
    assert sample.labels == LabelPair(0, 0)
    assert sample.provenance["video"] == "v0"


def test_scale_and_speed_oracles_together():
    video = moving_video(size=(8, 12), start=(24, 32))
    clip, _ = transform_clip(video, SpatialSpec.scale(1, 1.3), TemporalSpec.scale(2), 0, FULL, crop_xy=(0, 10))
    assert clip.shape == (16, 64, 64, 1)
    for frame in clip:
        e = measure_extent(frame)
        assert (e.height / e.width) / (12 / 8) == pytest.approx(1.3, rel=0.05)
    assert measure_motion(clip).mean_magnitude == pytest.approx(2 * 0.5, rel=0.05)


def test_projection_and_pattern_oracles_together():
    spec, pattern = SpatialSpec.projection(0.5, "right"), TemporalSpec.projection(1, 2)
    video = render(ShapeScene(size=(6, 6), start=(30, 20), velocity=(0.75, 0), n_frames=40))
    geo = GeometryConfig()
    clip, info = transform_clip(video, spec, pattern, 0, geo)
    assert info["crop"] is None
    motion = measure_motion(clip)
    # horizontal source motion drifts toward the centre line after the warp
    assert motion.mean_angle > 2.0
    # map centroids back to source coordinates to read the playback rates
    l = head_length(spec, 64, 64)
    x0, y0 = head_square(64, 64, "right", l)
    k = l / geo.crop_size
    hinv = invert(spec_homography(spec, 64, 64)[0])
    src = np.array([map_point(hinv, (x0 + cx * k, y0 + cy * k)) for cx, cy in motion.centroids])
    d = np.diff(src[:, 0])
    assert np.mean(d[8:]) / np.mean(d[:7]) == pytest.approx(2.0, rel=0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 18), st.integers(0, 10), st.integers(0, 2**32 - 1))
def test_selecting_frames_first_commutes_with_warping(si, ti, seed):
    cat = default_catalog()
    spatial, temporal = cat.spatial_classes[si], cat.temporal_classes[ti]
    video = moving_video(n=70, gradient=(0.2, 0.1))
    rng = np.random.default_rng(seed)
    r = int(rng.integers(0, 70 - (temporal.indices(10**6, 0)[-1] + 1) + 1))
    got, info = transform_clip(video, spatial, temporal, r, GeometryConfig(), crop_rng=rng)
    # literal order: warp every frame, then select, then preprocess
    warped = apply_spatial(video, spatial)[temporal.indices(len(video), r)]
    crop = Rect(*info["crop"], 32, 32) if info["crop"] else Rect(0, 0, 32, 32)
    want = preprocess_clip(warped, 64, crop, head_length(spatial, 64, 64), spatial.side)
    np.testing.assert_array_equal(got, want)


def _classify(clip, rho, v, catalog):
    """Nearest (spatial, temporal) class from measured aspect and speed."""
    exts = [measure_extent(f) for f in clip]
    ratio = np.mean([e.height / e.width for e in exts]) / rho
    step = measure_motion(clip).displacements[:, 0].mean()
    best = None
    for i, s in enumerate(catalog.spatial_classes):
        a, b = (1.0, 1.0) if s.kind == "identity" else (s.a, s.b)
        for j, t in enumerate(catalog.temporal_classes):
            err = abs(math.log(ratio / (b / a))) + abs(math.log(step / (v * a * t.s)))
            if best is None or err < best[0]:
                best = (err, i, j)
    return best[1], best[2]


def test_labels_can_be_recovered_from_clips():
    # large enough that a one-pixel extent error stays inside the 5% aspect band,
    # and placed so every random crop of every scale class keeps the whole object
    cat = make_catalog(projections=(), speeds=(1, 2, 3), patterns=())
    video = render(ShapeScene(size=(24, 36), start=(60, 64), velocity=(0.25, 0.0), width=128, height=128,
                              n_frames=60))
    rng = np.random.default_rng(0)
    for _ in range(40):
        s = generate_sample(video, rng, cat, GeometryConfig(resize_to=128, crop_size=128), "v")
        assert _classify(s.clip, 1.5, 0.25, cat) == (s.labels.spatial_class, s.labels.temporal_class)


def test_short_video_error_names_the_video():
    with pytest.raises(ClipTooShort, match="clip-7"):
        generate_sample(moving_video(n=20), np.random.default_rng(0),
                        single(temporal=TemporalSpec.scale(3)), GeometryConfig(), "clip-7")


def test_empty_dataset():
    assert build_dataset({"a": moving_video()}, 0, 1, default_catalog()) == []


def test_dataset_is_reproducible_and_prefix_stable():
    videos = {"a": moving_video(), "b": moving_video(start=(12, 32))}
    one = build_dataset(videos, 6, 7, default_catalog())
    two = build_dataset(videos, 6, 7, default_catalog())
    assert [s.clip.tobytes() for s in one] == [s.clip.tobytes() for s in two]
    assert [s.provenance for s in one] == [s.provenance for s in two]
    shorter = build_dataset(videos, 3, 7, default_catalog())
    assert [s.clip.tobytes() for s in shorter] == [s.clip.tobytes() for s in one[:3]]


def test_dataset_redraws_specs_that_do_not_fit():
    # 30 frames admit speed 1 and pattern (1,2) only
    videos = {"short": moving_video(n=30, start=(12, 32))}
    cat = make_catalog(speeds=(1, 3), patterns=((1, 2), (4, 5)))
    samples = build_dataset(videos, 40, 3, cat)
    assert {s.provenance["temporal"] for s in samples} == {"scale:1", "projection:1,2"}


def test_dataset_gives_up_when_nothing_fits():
    with pytest.raises(ExhaustedRetries):
        build_dataset({"tiny": moving_video(n=10, start=(12, 32))}, 1, 0, default_catalog())


def test_dataset_samples_are_valid_and_cover_catalog():
    cat = default_catalog()
    videos = {f"v{i}": moving_video(start=(12 + i, 32)) for i in range(3)}
    samples = build_dataset(videos, 400, 11, cat)
    for s in samples:
        assert s.clip.shape == (cat.temporal_classes[s.labels.temporal_class].length, 32, 32, 1)
        assert s.clip.dtype == np.float32 and s.clip.min() >= 0 and s.clip.max() <= 1
        assert np.all(np.isfinite(s.clip))
    assert {s.labels.spatial_class for s in samples} == set(range(19))
    assert {s.labels.temporal_class for s in samples} == set(range(11))
    counts = np.bincount([s.labels.spatial_class for s in samples], minlength=19)
    assert stats.chisquare(counts).pvalue > 0.01
