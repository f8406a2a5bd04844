"""Apex frame localization from binary-pattern feature differences.

Each frame is described by a block-wise binary-pattern histogram; its
difference score against the first frame is 1 - Pearson correlation.  The
apex is found by detecting local peaks of that curve and recursively
descending into the half of the frame range with the greater summed peak
score.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ShapeError, VideoSample
from .descriptors import BlockGrid, LbpParams, lbp_histogram

__all__ = [
    "DifferenceCurve",
    "frame_difference_curve",
    "detect_peaks",
    "divide_and_conquer",
    "spot_apex",
]


@dataclass(frozen=True)
class DifferenceCurve:
    """Per-frame difference scores against frame 0; scores[0] == 0."""

    scores: np.ndarray

    def __post_init__(self):
        scores = np.ascontiguousarray(self.scores, dtype=np.float64)
        if scores.ndim != 1 or scores.shape[0] < 1:
            raise ShapeError(
                f"scores must be a non-empty 1-D array, got shape "
                f"{np.asarray(self.scores).shape}")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores contain non-finite values")
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return self.scores.shape[0]


def _pearson_difference(a, b):
    # exact-equality short circuit keeps identical frames at score 0 and
    # defines the zero-variance case: equal vectors correlate at 1,
    # a constant vector against anything else at 0
    if np.array_equal(a, b):
        return 0.0
    sa = a - a.mean()
    sb = b - b.mean()
    va = float(np.dot(sa, sa))
    vb = float(np.dot(sb, sb))
    if va == 0.0 or vb == 0.0:
        return 1.0
    r = float(np.dot(sa, sb)) / np.sqrt(va * vb)
    return 1.0 - r


def frame_difference_curve(video: VideoSample, grid: BlockGrid,
                           params: LbpParams = LbpParams(),
                           mask=None) -> DifferenceCurve:
    """Difference score of every frame against the first frame."""
    if len(video) < 2:
        raise ShapeError(f"need at least 2 frames, got {len(video)}")
    feats = [lbp_histogram(video.frame(j), grid, params, mask=mask)
             for j in range(len(video))]
    scores = np.zeros(len(video), dtype=np.float64)
    for j in range(1, len(video)):
        scores[j] = _pearson_difference(feats[0], feats[j])
    return DifferenceCurve(scores=scores)


def detect_peaks(curve) -> list:
    """Indices j with scores[j-1] < scores[j] >= scores[j+1].

    Plateaus report their leftmost index; the first and last samples are
    never peaks.
    """
    scores = curve.scores if isinstance(curve, DifferenceCurve) \
        else np.asarray(curve, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] < 3:
        raise ShapeError("peak detection needs a 1-D curve of length >= 3")
    peaks = []
    for j in range(1, len(scores) - 1):
        if scores[j - 1] < scores[j] and scores[j] >= scores[j + 1]:
            peaks.append(j)
    return peaks


def divide_and_conquer(curve, peaks) -> int:
    """Recursive halving search for the dominant peak.

    The current index range splits into two halves (the left half takes the
    extra element when the length is odd); peak scores are summed per half
    and the search recurses into the half with the larger sum, going left
    on ties.  Recursion stops when at most one peak remains in the range or
    the range has a single index; the result is that peak, or the range's
    score argmax (leftmost on ties) if the range holds no peak.

    Peak scores enter the half-sums relative to the whole-curve minimum, so
    the outcome is invariant to affine rescaling of the curve and a half
    without peaks can never outweigh one with peaks.
    """
    scores = curve.scores if isinstance(curve, DifferenceCurve) \
        else np.asarray(curve, dtype=np.float64)
    if scores.ndim != 1 or scores.shape[0] < 1:
        raise ShapeError("divide_and_conquer needs a non-empty 1-D curve")
    peak_set = sorted(int(p) for p in peaks)
    base = float(scores.min())

    lo, hi = 0, len(scores)  # half-open
    while True:
        inside = [p for p in peak_set if lo <= p < hi]
        if len(inside) <= 1 or hi - lo == 1:
            if inside:
                return inside[0]
            seg = scores[lo:hi]
            return lo + int(np.argmax(seg))
        mid = lo + (hi - lo + 1) // 2  # left half takes the odd element
        left_sum = sum(scores[p] - base for p in inside if p < mid)
        right_sum = sum(scores[p] - base for p in inside if p >= mid)
        if left_sum >= right_sum:
            hi = mid
        else:
            lo = mid


def spot_apex(video: VideoSample, grid: BlockGrid,
              params: LbpParams = LbpParams(), mask=None) -> int:
    """Frame index of the spotted apex.

    Falls back to the curve argmax when no interior peak exists; a flat
    (all-zero) curve yields frame 0 and raises a warning.
    """
    if len(video) < 3:
        raise ShapeError(f"need at least 3 frames, got {len(video)}")
    curve = frame_difference_curve(video, grid, params, mask=mask)
    if not np.any(curve.scores != 0.0):
        warnings.warn(
            f"flat difference curve for video {video.video_id or '<unnamed>'}; "
            "returning frame 0", RuntimeWarning, stacklevel=2)
        return 0
    peaks = detect_peaks(curve)
    return divide_and_conquer(curve, peaks)
