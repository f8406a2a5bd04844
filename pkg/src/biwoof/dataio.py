"""Dataset loading and on-disk interchange formats.

A dataset is described by a manifest CSV with header
``dataset,subject,video,frames_dir,onset,apex,offset,label``; frame indices
in the file are 1-based positions into the sorted frame-file listing of
``frames_dir`` and are converted to 0-based on load.  Flow fields are
exchanged in the Middlebury ``.flo`` layout and feature matrices as CSV.
"""

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import (DataError, FormatError, ManifestError, ShapeError,
                   FlowField, VideoSample, to_gray)
from .flow import resize_bilinear

__all__ = [
    "ManifestEntry",
    "Manifest",
    "load_manifest",
    "load_video",
    "write_flo",
    "read_flo",
    "export_features",
]

MANIFEST_COLUMNS = ("dataset", "subject", "video", "frames_dir",
                    "onset", "apex", "offset", "label")
_FLO_MAGIC = 202021.25
_FRAME_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm",
                   ".tif", ".tiff"}


@dataclass(frozen=True)
class ManifestEntry:
    """One video's annotations.  Indices are 0-based positions into the
    sorted frame listing of ``frames_dir``."""

    dataset: str
    subject_id: str
    video_id: str
    frames_dir: Path
    onset: int
    apex: int | None
    offset: int
    label: str


@dataclass(frozen=True)
class Manifest:
    """Parsed manifest: entries plus the label -> class-id mapping
    (ids assigned in lexicographic label order)."""

    entries: tuple
    label_map: dict = field(default_factory=dict)

    def subjects(self):
        return sorted({e.subject_id for e in self.entries})

    def __len__(self):
        return len(self.entries)


def _parse_index(text, column, row_num, optional=False):
    text = text.strip() if text is not None else ""
    if text == "":
        if optional:
            return None
        raise ManifestError(f"row {row_num}: column {column!r} is empty")
    try:
        value = int(text)
    except ValueError:
        raise ManifestError(
            f"row {row_num}: column {column!r} must be an integer, "
            f"got {text!r}") from None
    if value < 1:
        raise ManifestError(
            f"row {row_num}: column {column!r} must be >= 1 (1-based), "
            f"got {value}")
    return value - 1


def load_manifest(path) -> Manifest:
    """Parse a manifest CSV.

    Relative ``frames_dir`` paths are resolved against the manifest's own
    directory.  Raises ManifestError naming the offending row on missing
    columns, non-numeric indices, or inconsistent index ordering.
    """
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ManifestError(
                f"manifest {path} is missing columns {missing}; expected "
                f"header {','.join(MANIFEST_COLUMNS)}")
        for row_num, row in enumerate(reader, start=2):
            onset = _parse_index(row["onset"], "onset", row_num)
            apex = _parse_index(row["apex"], "apex", row_num, optional=True)
            offset = _parse_index(row["offset"], "offset", row_num)
            if onset > offset:
                raise ManifestError(
                    f"row {row_num}: onset {onset + 1} > offset {offset + 1}")
            if apex is not None and not (onset <= apex <= offset):
                raise ManifestError(
                    f"row {row_num}: apex {apex + 1} outside "
                    f"[onset, offset] = [{onset + 1}, {offset + 1}]")
            subject = row["subject"].strip()
            video = row["video"].strip()
            if not subject or not video:
                raise ManifestError(
                    f"row {row_num}: subject and video must be non-empty")
            key = (subject, video)
            if key in seen:
                raise ManifestError(
                    f"row {row_num}: duplicate (subject, video) pair {key}")
            seen.add(key)
            frames_dir = Path(row["frames_dir"].strip())
            if not frames_dir.is_absolute():
                frames_dir = (base / frames_dir).resolve()
            entries.append(ManifestEntry(
                dataset=row["dataset"].strip(),
                subject_id=subject,
                video_id=video,
                frames_dir=frames_dir,
                onset=onset,
                apex=apex,
                offset=offset,
                label=row["label"].strip(),
            ))
    labels = sorted({e.label for e in entries})
    label_map = {lab: i for i, lab in enumerate(labels)}
    return Manifest(entries=tuple(entries), label_map=label_map)


def _frame_files(frames_dir: Path):
    if not frames_dir.is_dir():
        raise DataError(f"frames directory {frames_dir} does not exist")
    files = sorted(p for p in frames_dir.iterdir()
                   if p.suffix.lower() in _FRAME_SUFFIXES)
    if not files:
        raise DataError(f"no image files under {frames_dir}")
    return files


def _load_frame(path: Path, resize):
    try:
        with Image.open(path) as img:
            arr = np.asarray(img)
    except OSError as exc:
        raise DataError(f"cannot read frame {path}: {exc}") from None
    frame = to_gray(arr)
    if resize is not None:
        width, height = resize
        frame = resize_bilinear(frame, (height, width))
    return frame


def load_video(entry: ManifestEntry, resize=None) -> VideoSample:
    """Load the onset..offset frames of one manifest entry.

    ``resize`` is (width, height); frames are grayscale-converted and
    bilinearly resized.  Indices in the returned VideoSample are rebased so
    the onset frame is index 0.
    """
    files = _frame_files(entry.frames_dir)
    if entry.offset >= len(files):
        raise DataError(
            f"video {entry.video_id}: offset frame {entry.offset + 1} "
            f"beyond the {len(files)} files in {entry.frames_dir}")
    frames = []
    shape = None
    for path in files[entry.onset:entry.offset + 1]:
        frame = _load_frame(path, resize)
        if shape is None:
            shape = frame.shape
        elif frame.shape != shape:
            raise DataError(
                f"video {entry.video_id}: frame {path.name} has shape "
                f"{frame.shape}, expected {shape}")
        frames.append(frame)
    stack = np.stack(frames)
    apex_idx = None if entry.apex is None else entry.apex - entry.onset
    return VideoSample(
        frames=stack,
        onset_idx=0,
        offset_idx=entry.offset - entry.onset,
        apex_idx=apex_idx,
        label=entry.label,
        subject_id=entry.subject_id,
        video_id=entry.video_id,
    )


def write_flo(flow: FlowField, path):
    """Write a flow field in the Middlebury ``.flo`` layout: little-endian
    magic float 202021.25, int32 width, int32 height, then row-major
    interleaved (u, v) float32 pairs."""
    u = flow.u.astype(np.float32)
    v = flow.v.astype(np.float32)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("flow contains non-finite values")
    height, width = u.shape
    inter = np.empty((height, width, 2), dtype="<f4")
    inter[:, :, 0] = u
    inter[:, :, 1] = v
    with open(path, "wb") as fh:
        fh.write(struct.pack("<f", _FLO_MAGIC))
        fh.write(struct.pack("<ii", width, height))
        fh.write(inter.tobytes())


def read_flo(path) -> FlowField:
    """Read a Middlebury ``.flo`` file written by write_flo."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise FormatError(f"{path}: truncated flow file ({len(data)} bytes)")
    magic, = struct.unpack_from("<f", data, 0)
    if magic != _FLO_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, "
                          f"expected {_FLO_MAGIC}")
    width, height = struct.unpack_from("<ii", data, 4)
    if width < 1 or height < 1:
        raise FormatError(f"{path}: invalid dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for {width}x{height}, "
            f"got {len(data)}")
    inter = np.frombuffer(data, dtype="<f4", offset=12)
    inter = inter.reshape(height, width, 2)
    return FlowField(u=inter[:, :, 0].astype(np.float64),
                     v=inter[:, :, 1].astype(np.float64))


def export_features(rows, path):
    """Write (video_id, label, feature vector) rows as CSV.

    Header is ``video_id,label,f0..f{D-1}``; values are printed with 9
    significant digits.  An empty row list writes ``video_id,label`` only.
    """
    rows = list(rows)
    dim = None
    for video_id, _, vec in rows:
        vec = np.asarray(vec)
        if vec.ndim != 1:
            raise ShapeError(
                f"feature vector of {video_id} must be 1-D, "
                f"got shape {vec.shape}")
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise ShapeError(
                f"feature vector of {video_id} has length {vec.shape[0]}, "
                f"expected {dim}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["video_id", "label"]
        if dim is not None:
            header += [f"f{i}" for i in range(dim)]
        writer.writerow(header)
        for video_id, label, vec in rows:
            writer.writerow([video_id, label]
                            + ["%.9g" % x for x in np.asarray(vec)])
