"""Visual similarity between image objects and the pairwise distance matrix."""
from lecsum.simile.keypoints import Keypoint, SiftParams, extract_keypoints
from lecsum.simile.similarity import (
    MatchSet,
    SimilarityConfig,
    build_distance_matrix,
    combine_scores,
    keypoints_score,
    match_keypoints,
    similarity,
    transformation_score,
)

__all__ = [
    "Keypoint", "SiftParams", "extract_keypoints", "MatchSet", "SimilarityConfig",
    "build_distance_matrix", "combine_scores", "keypoints_score", "match_keypoints", "similarity",
    "transformation_score",
]
