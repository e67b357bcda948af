import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lecsum import synth
from lecsum.core import BoundingBox, ImageObject, PixelBuffer, SchemaError
from lecsum.simile import (MatchSet, SimilarityConfig, build_distance_matrix, combine_scores,
                           extract_keypoints, keypoints_score, match_keypoints, similarity,
                           transformation_score)
from lecsum.simile import cache
from lecsum.simile.similarity import estimate_affine, pair_seed

# frozen regression baselines (see the decisions ledger)
CHECKERBOARD_KEYPOINTS = 340
ROTATED_MATCHES = 63


def obj(px, i=0, kps=True):
    return ImageObject(i, px, 0, BoundingBox(0, 0, px.width, px.height), 1.0,
                       keypoints=extract_keypoints(px) if kps else None)


@pytest.fixture(scope="module")
def diagram():
    return synth.diagram(1)


def test_uniform_image_has_no_keypoints():
    assert extract_keypoints(PixelBuffer.solid(120, 90, (40, 90, 160))) == []


def test_tiny_image_has_no_keypoints():
    assert extract_keypoints(synth.noise(0, 12, 12)) == []


def test_keypoints_deterministic(diagram):
    copy = PixelBuffer(diagram.data.copy())
    assert extract_keypoints(diagram) == extract_keypoints(copy)


def test_descriptor_shape_and_norm(diagram):
    kps = extract_keypoints(diagram)
    assert len(kps) >= 10
    for k in kps:
        assert k.descriptor.shape == (128,)
        assert np.linalg.norm(k.descriptor) == pytest.approx(1.0, abs=1e-5)
        assert 0 <= k.x < diagram.width and 0 <= k.y < diagram.height


def test_checkerboard_keypoint_count():
    assert len(extract_keypoints(synth.checkerboard(256, 32))) == CHECKERBOARD_KEYPOINTS


def test_rotated_match_count(diagram):
    m = match_keypoints(extract_keypoints(diagram), extract_keypoints(synth.rotate(diagram, 30)))
    assert len(m) == ROTATED_MATCHES


def test_match_empty():
    assert len(match_keypoints([], extract_keypoints(synth.diagram(2)))) == 0


def test_self_match_dominance(diagram):
    kps = extract_keypoints(diagram)
    m = match_keypoints(kps, kps)
    assert len(m) >= 0.9 * len(kps)
    assert all(i == j for i, j, _ in m.pairs)


def test_matchset_must_be_injective():
    with pytest.raises(SchemaError):
        MatchSet(((0, 1, 0.1), (0, 2, 0.2)))


def test_keypoints_score_formula():
    a = ImageObject(0, PixelBuffer.solid(10, 10), 0, BoundingBox(0, 0, 10, 10), 1.0, keypoint_count=20)
    b = ImageObject(1, PixelBuffer.solid(10, 10), 0, BoundingBox(0, 0, 10, 10), 1.0, keypoint_count=40)
    assert keypoints_score(a, b, MatchSet(tuple((k, k, 0.0) for k in range(10)))) == 0.5


def test_keypoints_score_degenerate(diagram):
    a, flat = obj(diagram), obj(PixelBuffer.solid(100, 100))
    assert keypoints_score(a, flat, match_keypoints(list(a.keypoints), list(flat.keypoints))) == 0


def test_self_scores(diagram):
    a = obj(diagram)
    m = match_keypoints(list(a.keypoints), list(a.keypoints))
    assert keypoints_score(a, a, m) >= 0.9
    assert transformation_score(a, a, m) == pytest.approx(1.0, abs=0.02)


def test_two_matches_give_zero_transformation(diagram):
    a = obj(diagram)
    assert transformation_score(a, a, MatchSet(((0, 0, 0.0), (1, 1, 0.0)))) == 0.0


def test_half_scale_transformation(diagram):
    a, b = obj(diagram), obj(synth.scale(diagram, 0.5), 1)
    m = match_keypoints(list(a.keypoints), list(b.keypoints))
    assert transformation_score(a, b, m, seed=pair_seed("", 0, 1)) >= 0.8


def test_half_scale_oracle_alignment(diagram):
    # warping with the known ground-truth affine bounds what any estimate can reach
    from lecsum.simile.similarity import aligned_difference
    small = synth.scale(diagram, 0.5)
    A = np.array([[diagram.width / small.width, 0, 0], [0, diagram.height / small.height, 0]])
    assert aligned_difference(diagram.gray(), small.gray(), A, 0.25) >= 0.8


def test_ransac_recovers_known_affine():
    rng = np.random.default_rng(0)
    src = rng.uniform(0, 200, (40, 2))
    A = np.array([[0.9, -0.3, 12.0], [0.25, 1.1, -4.0]])
    dst = src @ A[:, :2].T + A[:, 2]
    dst[:8] += rng.uniform(30, 60, (8, 2))  # outliers
    est, inliers = estimate_affine(src, dst, SimilarityConfig(), seed=3)
    assert np.allclose(est, A, atol=1e-6)
    assert inliers.sum() == 32


def test_combine_scores():
    assert combine_scores(0.6, 0.8) == pytest.approx(0.7)


def test_self_similarity(diagram):
    assert similarity(obj(diagram), obj(diagram, 1)) >= 0.95


def test_noise_vs_diagram_is_low(diagram):
    assert similarity(obj(synth.noise(4)), obj(diagram, 1)) <= 0.3


def test_similarity_degrades_with_noise(diagram):
    ref = obj(diagram)
    scores = [similarity(ref, obj(synth.add_noise(diagram, s, seed=1), 1)) for s in (0, 8, 32)]
    assert scores[0] >= scores[1] >= scores[2]


@settings(max_examples=10)
@given(st.integers(0, 50), st.integers(0, 50), st.text(max_size=5))
def test_similarity_exactly_symmetric(sa, sb, seg):
    a, b = obj(synth.diagram(sa, 120, 90, 12), 0), obj(synth.diagram(sb, 120, 90, 12), 1)
    assert similarity(a, b, segment_id=seg) == similarity(b, a, segment_id=seg)


def test_matrix_single_image(diagram):
    assert build_distance_matrix([obj(diagram)]).values.tolist() == [[0.0]]


def test_matrix_identical_images(diagram):
    D = build_distance_matrix([obj(diagram, 0), obj(diagram, 1)])
    assert D.values[0, 1] <= 0.05


def test_matrix_workers_agree():
    ims = [obj(synth.diagram(s, 120, 90, 12), s) for s in range(4)]
    assert build_distance_matrix(ims, workers=1) == build_distance_matrix(ims, workers=3)


def test_fig1_matrix_golden(fig1_result):
    import json
    from pathlib import Path
    golden = json.loads((Path(__file__).parent / "data" / "fig1_golden.json").read_text())
    assert fig1_result.distance.values.tolist() == golden["distance"]["values"]
    assert fig1_result.importance.values.tolist() == golden["importance"]["values"]


def test_cache_round_trip(tmp_path):
    ims = [obj(synth.diagram(s, 120, 90, 12), s) for s in range(3)]
    D = build_distance_matrix(ims)
    key = cache.cache_key(ims, SimilarityConfig())
    cache.save(tmp_path / "c.json", key, ims, D)
    kps, D2 = cache.load(tmp_path / "c.json", key)
    assert D2 == D
    assert [list(k) for k in kps] == [list(i.keypoints) for i in ims]
    assert cache.load(tmp_path / "c.json", "other") is None
    (tmp_path / "c.json").write_text("{broken")
    assert cache.load(tmp_path / "c.json", key) is None


def test_cache_key_tracks_config_and_pixels():
    ims = [obj(synth.diagram(0, 60, 40, 4), 0, kps=False)]
    k = cache.cache_key(ims, SimilarityConfig())
    assert k != cache.cache_key(ims, SimilarityConfig(ratio_threshold=0.7))
    assert k != cache.cache_key([obj(synth.diagram(1, 60, 40, 4), 0, kps=False)], SimilarityConfig())
