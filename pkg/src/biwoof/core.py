"""Shared domain types and conventions.

Images are 2-D float64 arrays in [0, 1], indexed ``[y, x]`` (row, column).
Flow fields carry per-pixel displacements in pixel units.  Feature vectors
are flat float64 arrays laid out block-row-major, then block-column, then
histogram bin.  All indices are 0-based internally.
"""

from dataclasses import dataclass, field

import numpy as np

# Rec.601 luma weights, used for every colour-to-grayscale conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ShapeError(ValueError):
    """Array dimensions do not match what the operation requires."""


class FormatError(ValueError):
    """A binary or text file does not follow its expected layout."""


class ManifestError(ValueError):
    """A dataset manifest row is malformed or inconsistent."""


class ConfigError(ValueError):
    """A configuration value is out of its valid range."""


class DataError(ValueError):
    """Dataset content is missing or unusable for the requested run."""


class ProtocolError(ValueError):
    """The dataset cannot support the requested evaluation protocol."""


def frame_from_bytes(raw):
    """Convert an 8-bit grayscale grid to a float frame in [0, 1].

    Intensities are ``raw / 255`` exactly, so re-quantizing with
    ``round(value * 255)`` recovers the input bytes.
    """
    raw = np.asarray(raw)
    if raw.ndim != 2 or raw.size == 0:
        raise ShapeError("expected a nonempty 2-D grid of bytes, got shape %r"
                         % (raw.shape,))
    return raw.astype(np.float64) / 255.0


def to_gray(rgb):
    """Collapse an (H, W, 3) or (H, W, 4) uint8/float image to grayscale.

    Uses Rec.601 luma (0.299 R + 0.587 G + 0.114 B).  Output is float64 in
    [0, 1]; an alpha channel, if present, is ignored.
    """
    rgb = np.asarray(rgb)
    if rgb.ndim == 2:
        return frame_from_bytes(rgb) if rgb.dtype == np.uint8 else rgb.astype(np.float64)
    if rgb.ndim != 3 or rgb.shape[2] not in (3, 4):
        raise ShapeError("expected (H, W, 3|4) colour image, got shape %r"
                         % (rgb.shape,))
    r, g, b = (rgb[:, :, c].astype(np.float64) for c in range(3))
    y = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    if rgb.dtype == np.uint8:
        y /= 255.0
    return y


def validate_frame(frame, min_side=8):
    """Check frame invariants: 2-D, at least ``min_side`` per axis, finite,
    intensities within [0, 1].  Returns the array unchanged."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim != 2 or frame.shape[0] < min_side or frame.shape[1] < min_side:
        raise ShapeError("frame must be at least %dx%d pixels, got %r"
                         % (min_side, min_side, frame.shape))
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame contains non-finite intensities")
    if frame.min() < 0.0 or frame.max() > 1.0:
        raise ValueError("frame intensities must lie in [0, 1]")
    return frame


@dataclass(frozen=True)
class FlowField:
    """Dense per-pixel displacement field.

    ``u`` is the horizontal (column) displacement, ``v`` the vertical (row)
    displacement, both in pixels and shaped like the source frames.
    """

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.ascontiguousarray(self.u, dtype=np.float64)
        v = np.ascontiguousarray(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise ShapeError("flow components must be 2-D and equal-shaped, "
                             "got %r and %r" % (u.shape, v.shape))
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("flow contains non-finite values")
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def height(self):
        return self.u.shape[0]

    @property
    def width(self):
        return self.u.shape[1]


@dataclass(frozen=True)
class VideoSample:
    """An onset..offset grayscale frame sequence with its annotations.

    ``frames`` is an (F, H, W) float64 stack; indices are 0-based and
    relative to the stored stack (so ``onset_idx`` is always 0 for samples
    loaded from a manifest).  ``apex_idx`` is None when the dataset carries
    no apex ground truth.
    """

    frames: np.ndarray
    onset_idx: int
    offset_idx: int
    apex_idx: int | None = None
    label: str = ""
    subject_id: str = ""
    video_id: str = ""

    def __post_init__(self):
        frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[0] < 2:
            raise ShapeError("expected an (F>=2, H, W) frame stack, got %r"
                             % (frames.shape,))
        validate_frame(frames[0])
        n = frames.shape[0]
        if not (0 <= self.onset_idx <= self.offset_idx < n):
            raise ValueError("need 0 <= onset (%d) <= offset (%d) < %d"
                             % (self.onset_idx, self.offset_idx, n))
        if self.apex_idx is not None and not (
                self.onset_idx <= self.apex_idx <= self.offset_idx):
            raise ValueError("apex index %d outside [onset, offset]" % self.apex_idx)
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return self.frames.shape[0]

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def width(self):
        return self.frames.shape[2]

    def frame(self, idx):
        return self.frames[idx]


WEIGHT_MODES = ("none", "flow", "strain")


@dataclass(frozen=True)
class BiwoofConfig:
    """Block/bin layout and the two weighting modes of the descriptor."""

    n_blocks: int = 5
    n_bins: int = 8
    local_weight: str = "flow"
    global_weight: str = "strain"

    def __post_init__(self):
        if self.n_blocks < 1 or self.n_bins < 1:
            raise ConfigError("n_blocks and n_bins must be >= 1")
        for mode in (self.local_weight, self.global_weight):
            if mode not in WEIGHT_MODES:
                raise ConfigError("weight mode %r not one of %r" % (mode, WEIGHT_MODES))

    @property
    def feature_length(self):
        return self.n_blocks * self.n_blocks * self.n_bins


def feature_index(block_row, block_col, bin_idx, n_blocks, n_bins):
    """Flat position of (block_row, block_col, bin) in a feature vector."""
    return (block_row * n_blocks + block_col) * n_bins + bin_idx


@dataclass
class ConfusionMatrix:
    """Square grid of counts[true][predicted]."""

    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ShapeError("confusion matrix must be square, got %r"
                             % (counts.shape,))
        if counts.min() < 0:
            raise ValueError("confusion counts must be nonnegative")
        self.counts = counts

    @classmethod
    def empty(cls, n_classes):
        return cls(np.zeros((n_classes, n_classes), dtype=np.int64))

    @classmethod
    def from_predictions(cls, true_ids, predicted_ids, n_classes):
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        for t, p in zip(true_ids, predicted_ids):
            counts[t, p] += 1
        return cls(counts)

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    def add(self, other):
        if other.counts.shape != self.counts.shape:
            raise ShapeError("cannot merge confusion matrices of different sizes")
        self.counts = self.counts + other.counts
