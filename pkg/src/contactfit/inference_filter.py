"""Consistency filtering of raw signature predictions.

A predicted pair survives only when its probability clears a threshold,
both regions are in the thresholded segmentation, and the two predicted
landmarks project close to each other.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .contact import (ContactSegmentation, ContactSignature, ContactState,
                      iou_segmentation, iou_signature,
                      segmentation_from_signature)
from .errors import GranularityError, ParameterError


class RawPrediction:
    """Raw network-style outputs: pair probabilities, per-region
    segmentation probabilities and predicted landmarks (NaN = missing)."""

    def __init__(self, granularity, signature_probs, segmentation_probs, landmarks):
        self.granularity = int(granularity)
        seg = np.asarray(segmentation_probs, dtype=float)
        lms = np.asarray(landmarks, dtype=float)
        if seg.shape != (self.granularity,):
            raise ParameterError("segmentation_probs must be (granularity,)")
        if lms.shape != (self.granularity, 2):
            raise ParameterError("landmarks must be (granularity, 2)")
        if seg.min() < 0.0 or seg.max() > 1.0:
            raise ParameterError("segmentation probabilities must be in [0,1]")
        probs = {}
        items = (signature_probs.items() if isinstance(signature_probs, dict)
                 else signature_probs)
        for (r1, r2), p in items:
            r1, r2 = int(r1), int(r2)
            if r1 == r2 or not (0 <= r1 < granularity and 0 <= r2 < granularity):
                raise ParameterError(f"invalid pair ({r1}, {r2})")
            p = float(p)
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"pair probability {p} outside [0,1]")
            probs[(min(r1, r2), max(r1, r2))] = p
        self.signature_probs = probs
        self.segmentation_probs = seg
        self.landmarks = lms


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds: tau_s on segmentation probability, tau_c on pair
    probability, tau_dist on landmark distance (normalized units)."""

    tau_s: float = 0.5
    tau_c: float = 0.5
    tau_dist: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.tau_s < 1.0 and 0.0 < self.tau_c < 1.0):
            raise ParameterError("tau_s and tau_c must be in (0, 1)")
        if self.tau_dist <= 0.0:
            raise ParameterError("tau_dist must be positive")


def threshold_segmentation(pred, tau_s):
    """Region is contact iff its probability >= tau_s."""
    states = np.where(pred.segmentation_probs >= tau_s,
                      int(ContactState.CONTACT), int(ContactState.NO_CONTACT))
    return ContactSegmentation(pred.granularity, states)


def threshold_signature(pred, tau_c):
    """Signature from pair probabilities alone (no consistency rules)."""
    contact = [p for p, prob in pred.signature_probs.items() if prob >= tau_c]
    return ContactSignature.from_sets(pred.granularity, contact=contact)


def filter_signature(pred, cfg):
    """Apply probability, segmentation and landmark-proximity rules.

    A region that survives tau_s but has no landmark loses all its pairs
    (with a warning).
    """
    seg_ok = pred.segmentation_probs >= cfg.tau_s
    missing_warned = set()
    contact = []
    for (r1, r2), prob in sorted(pred.signature_probs.items()):
        if prob < cfg.tau_c:
            continue
        if not (seg_ok[r1] and seg_ok[r2]):
            continue
        lm1, lm2 = pred.landmarks[r1], pred.landmarks[r2]
        missing = [r for r, lm in ((r1, lm1), (r2, lm2)) if not np.isfinite(lm).all()]
        if missing:
            for r in missing:
                if r not in missing_warned:
                    missing_warned.add(r)
                    warnings.warn(f"region {r} has no landmark; dropping its pairs",
                                  stacklevel=2)
            continue
        if np.linalg.norm(lm1 - lm2) <= cfg.tau_dist:
            contact.append((r1, r2))
    return ContactSignature.from_sets(pred.granularity, contact=contact)


def sweep_thresholds(predictions, ground_truths, tau_s_grid, tau_c_grid,
                     tau_dist_grid):
    """Pick thresholds maximizing mean IoU on a validation set.

    tau_s is chosen first by mean segmentation IoU against the ground-truth
    segmentations (derived from the signatures); (tau_c, tau_dist) are then
    chosen jointly by mean signature IoU with tau_s fixed. Ties resolve to
    the smallest thresholds (grid scanned in ascending order).
    """
    predictions = list(predictions)
    ground_truths = list(ground_truths)
    if not predictions or len(predictions) != len(ground_truths):
        raise ParameterError("need equally many predictions and ground truths")
    for p, g in zip(predictions, ground_truths):
        if p.granularity != g.granularity:
            raise GranularityError("prediction/ground-truth granularities differ")
    gt_segs = [segmentation_from_signature(g) for g in ground_truths]

    best_s, best_s_iou = None, -1.0
    for tau_s in sorted(tau_s_grid):
        ious = [iou_segmentation(threshold_segmentation(p, tau_s), gs)
                for p, gs in zip(predictions, gt_segs)]
        mean = float(np.mean(ious))
        if mean > best_s_iou:
            best_s, best_s_iou = float(tau_s), mean

    best_cd, best_cd_iou = None, -1.0
    for tau_c in sorted(tau_c_grid):
        for tau_dist in sorted(tau_dist_grid):
            cfg = FilterConfig(tau_s=best_s, tau_c=float(tau_c),
                               tau_dist=float(tau_dist))
            ious = [iou_signature(filter_signature(p, cfg), g)
                    for p, g in zip(predictions, ground_truths)]
            mean = float(np.mean(ious))
            if mean > best_cd_iou:
                best_cd, best_cd_iou = (float(tau_c), float(tau_dist)), mean

    cfg = FilterConfig(tau_s=best_s, tau_c=best_cd[0], tau_dist=best_cd[1])
    return cfg, {"segmentation_iou": best_s_iou, "signature_iou": best_cd_iou}
