"""Confidence maps and the orientation correction derived from them."""

from app.services.confidence.image import ConfidenceMap, UsImage
from app.services.confidence.random_walk import confidence_map, solve_confidence
from app.services.confidence.correction import (
    CorrectionResult,
    binarize_map,
    correction_angle,
    evaluate_correction,
    lookahead_weights,
    update_lookahead,
    weighted_barycenter,
)

__all__ = [
    "ConfidenceMap",
    "UsImage",
    "confidence_map",
    "solve_confidence",
    "CorrectionResult",
    "binarize_map",
    "correction_angle",
    "evaluate_correction",
    "lookahead_weights",
    "update_lookahead",
    "weighted_barycenter",
]
