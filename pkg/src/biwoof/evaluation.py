"""Classifier training and cross-validated evaluation.

Linear one-vs-one SVMs trained by deterministic dual coordinate descent,
leave-one-subject-out / leave-one-video-out fold construction, micro-averaged
precision / recall / F-measure, the end-to-end protocol runner, and the
ablation grids over bin counts, block counts, and weighting modes.
"""

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (BiwoofConfig, ConfigError, ConfusionMatrix, DataError,
                   ProtocolError, ShapeError)
from .dataio import Manifest, load_video
from .descriptors import (LbpParams, biwoof, block_partition,
                          lbp_difference_baseline, lbp_top)
from .flow import TvL1Params, estimate_tvl1
from .kinematics import polar_decompose, strain_magnitude
from .spotting import spot_apex

__all__ = [
    "SvmModel",
    "PipelineConfig",
    "EvalReport",
    "REPORT_SCHEMA",
    "train_linear_svm",
    "predict",
    "make_folds",
    "f_measure",
    "accuracy",
    "run_protocol",
    "ablate",
    "apex_pair_feature",
    "sequence_feature",
]

PROTOCOLS = ("loso", "lovo")
DESCRIPTORS = ("biwoof", "lbpdiff", "lbptop")

_GAP_TOL = 1e-10
_MAX_EPOCHS = 1000


@dataclass(frozen=True)
class SvmModel:
    """One-vs-one linear classifiers.

    ``weights[k]`` is the (D+1)-vector (weights then bias) separating class
    pair ``pairs[k]``: positive margin votes for the first class of the
    pair, negative for the second.
    """

    classes: tuple
    pairs: tuple
    weights: np.ndarray

    @property
    def dim(self):
        return self.weights.shape[1] - 1


def _dual_cd(x_aug, y_signs, reg_c):
    """L2-regularized L1-hinge dual coordinate descent, fixed sample order.

    Stops when the duality gap w.w + C*sum(hinge) - sum(alpha) falls to
    1e-10 or after 1000 epochs.  The tight tolerance pins the solution well
    enough that reformulations with the same optimum (e.g. duplicated
    samples on separable data) agree on decision scores to ~1e-8.
    """
    n, d = x_aug.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    q_diag = np.einsum("ij,ij->i", x_aug, x_aug)
    for _ in range(_MAX_EPOCHS):
        for i in range(n):
            if q_diag[i] <= 0.0:
                continue
            g = y_signs[i] * float(np.dot(w, x_aug[i])) - 1.0
            if alpha[i] == 0.0:
                pg = min(g, 0.0)
            elif alpha[i] == reg_c:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                old = alpha[i]
                alpha[i] = min(max(old - g / q_diag[i], 0.0), reg_c)
                w += (alpha[i] - old) * y_signs[i] * x_aug[i]
        hinge = np.maximum(0.0, 1.0 - y_signs * (x_aug @ w)).sum()
        gap = float(np.dot(w, w)) + reg_c * float(hinge) - float(alpha.sum())
        if gap <= _GAP_TOL:
            break
    return w


def train_linear_svm(features, class_ids, reg_c=1.0) -> SvmModel:
    """Train one-vs-one linear SVMs.

    ``features`` is an (n, D) matrix and ``class_ids`` the per-row integer
    labels.  Training is deterministic: samples are visited in the given
    order with no shuffling, so callers control ordering.  A constant 1
    feature is appended internally to learn the bias.
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"features must be a nonempty 2-D matrix, "
                         f"got shape {x.shape}")
    y = np.asarray(class_ids, dtype=np.int64)
    if y.shape != (x.shape[0],):
        raise ShapeError("class_ids length must match the feature rows")
    if not (reg_c > 0):
        raise ConfigError(f"reg_c must be positive, got {reg_c}")
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise DataError(
            f"training needs at least 2 classes, got {classes}")
    x_aug = np.hstack([x, np.ones((x.shape[0], 1))])
    pairs = []
    weights = []
    for a_pos, cls_i in enumerate(classes):
        for cls_j in classes[a_pos + 1:]:
            sel = (y == cls_i) | (y == cls_j)
            signs = np.where(y[sel] == cls_i, 1.0, -1.0)
            weights.append(_dual_cd(x_aug[sel], signs, reg_c))
            pairs.append((cls_i, cls_j))
    return SvmModel(classes=classes, pairs=tuple(pairs),
                    weights=np.vstack(weights))


def predict(model: SvmModel, feature) -> int:
    """Majority vote over the one-vs-one classifiers.

    A zero margin casts no vote.  Vote ties break by summed signed margins,
    then by the lowest class id.
    """
    x = np.asarray(feature, dtype=np.float64)
    if x.shape != (model.dim,):
        raise ShapeError(
            f"feature of length {x.shape} does not match model "
            f"dimension {model.dim}")
    x_aug = np.append(x, 1.0)
    votes = {c: 0 for c in model.classes}
    sums = {c: 0.0 for c in model.classes}
    for (cls_i, cls_j), w in zip(model.pairs, model.weights):
        margin = float(np.dot(w, x_aug))
        if margin > 0:
            votes[cls_i] += 1
        elif margin < 0:
            votes[cls_j] += 1
        sums[cls_i] += margin
        sums[cls_j] -= margin
    top = max(votes.values())
    tied = [c for c in model.classes if votes[c] == top]
    if len(tied) > 1:
        best = max(sums[c] for c in tied)
        tied = [c for c in tied if sums[c] == best]
    return min(tied)


def make_folds(manifest: Manifest, protocol: str):
    """Cross-validation folds as (train video ids, test video ids) pairs.

    ``loso``: one fold per subject, that subject's videos held out; needs at
    least two subjects.  ``lovo``: one fold per video.  Folds are ordered by
    subject id / video id and partition the dataset.
    """
    if protocol not in PROTOCOLS:
        raise ProtocolError(f"unknown protocol {protocol!r}; "
                            f"choices: {PROTOCOLS}")
    all_ids = sorted(e.video_id for e in manifest.entries)
    if protocol == "loso":
        subjects = manifest.subjects()
        if len(subjects) < 2:
            raise ProtocolError(
                f"loso needs at least 2 subjects, got {len(subjects)}")
        folds = []
        for subject in subjects:
            test = sorted(e.video_id for e in manifest.entries
                          if e.subject_id == subject)
            train = [v for v in all_ids if v not in set(test)]
            folds.append((train, test))
        return folds
    return [([v for v in all_ids if v != vid], [vid]) for vid in all_ids]


def _fold_ids(manifest: Manifest, protocol: str):
    if protocol == "loso":
        return manifest.subjects()
    return sorted(e.video_id for e in manifest.entries)


def f_measure(confusion: ConfusionMatrix):
    """Micro-averaged (precision, recall, F) from class-summed TP/FP/FN.

    F is defined as 0 when precision + recall is 0.
    """
    counts = confusion.counts
    total = counts.sum()
    if total == 0:
        raise ValueError("confusion matrix holds no predictions")
    tp = np.diag(counts).sum()
    fp = (counts.sum(axis=0) - np.diag(counts)).sum()
    fn = (counts.sum(axis=1) - np.diag(counts)).sum()
    precision = float(tp / (tp + fp)) if tp + fp > 0 else 0.0
    recall = float(tp / (tp + fn)) if tp + fn > 0 else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2.0 * precision * recall / (precision + recall)


def accuracy(confusion: ConfusionMatrix) -> float:
    total = confusion.counts.sum()
    if total == 0:
        raise ValueError("confusion matrix holds no predictions")
    return float(np.diag(confusion.counts).sum() / total)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the protocol runner needs besides the manifest."""

    descriptor: str = "biwoof"
    biwoof: BiwoofConfig = field(default_factory=BiwoofConfig)
    lbp: LbpParams = field(default_factory=LbpParams)
    lbptop_radii: tuple = (1, 1, 2)
    apex_source: str = "groundtruth"
    random_repeats: int = 10
    resize: tuple = None          # (width, height) or None
    tvl1: TvL1Params = field(default_factory=TvL1Params)
    protocol: str = "loso"
    svm_c: float = 1.0
    l1_normalize: bool = False

    def __post_init__(self):
        if self.descriptor not in DESCRIPTORS:
            raise ConfigError(f"unknown descriptor {self.descriptor!r}; "
                              f"choices: {DESCRIPTORS}")
        if self.protocol not in PROTOCOLS:
            raise ProtocolError(f"unknown protocol {self.protocol!r}; "
                                f"choices: {PROTOCOLS}")
        if self.random_repeats < 1:
            raise ConfigError("random_repeats must be >= 1")
        if not (self.svm_c > 0):
            raise ConfigError(f"svm_c must be positive, got {self.svm_c}")
        _parse_apex_source(self.apex_source)

    def describe(self):
        return {
            "descriptor": self.descriptor,
            "n_blocks": self.biwoof.n_blocks,
            "n_bins": self.biwoof.n_bins,
            "local_weight": self.biwoof.local_weight,
            "global_weight": self.biwoof.global_weight,
            "lbp_points": self.lbp.n_points,
            "lbp_radius": self.lbp.radius,
            "lbp_uniform": self.lbp.uniform,
            "lbptop_radii": list(self.lbptop_radii),
            "apex_source": self.apex_source,
            "random_repeats": self.random_repeats,
            "resize": list(self.resize) if self.resize else None,
            "protocol": self.protocol,
            "svm_c": self.svm_c,
            "l1_normalize": self.l1_normalize,
        }


def _parse_apex_source(source):
    if source == "groundtruth":
        return "groundtruth", None
    if source == "spotted":
        return "spotted", None
    if source.startswith("random:"):
        try:
            return "random", int(source.split(":", 1)[1])
        except ValueError:
            raise ConfigError(
                f"apex source {source!r}: seed must be an integer") from None
    if source.startswith("fixed:"):
        try:
            k = int(source.split(":", 1)[1])
        except ValueError:
            raise ConfigError(
                f"apex source {source!r}: offset must be an integer") from None
        if k < 1:
            raise ConfigError("fixed apex offset must be >= 1 frames past onset")
        return "fixed", k
    raise ConfigError(
        f"unknown apex source {source!r}; expected groundtruth, spotted, "
        f"random:<seed> or fixed:<k>")


def _resolve_apex(video, mode, arg, repeat):
    if mode == "groundtruth":
        if video.apex_idx is None:
            raise DataError(
                f"video {video.video_id} has no ground-truth apex")
        return video.apex_idx
    if mode == "spotted":
        n = min(5, video.height, video.width)
        grid = block_partition(video.width, video.height, n)
        return spot_apex(video, grid)
    if mode == "fixed":
        return max(1, min(arg, video.offset_idx))
    # random draw excluding the onset frame, seeded per video so the result
    # is independent of evaluation order and process boundaries
    rng = np.random.default_rng(
        (arg, repeat, zlib.crc32(video.video_id.encode("utf-8"))))
    return int(rng.integers(1, video.offset_idx + 1))


def _fields_of(video, apex_idx, tvl1_params):
    flow = estimate_tvl1(video.frame(0), video.frame(apex_idx), tvl1_params)
    magnitude, orientation = polar_decompose(flow)
    strain = strain_magnitude(flow)
    return orientation, magnitude, strain


def apex_pair_feature(video, apex_idx, cfg: PipelineConfig,
                      field_cache=None):
    """Feature vector from the onset frame and one probe frame."""
    if not (1 <= apex_idx < len(video)):
        raise DataError(
            f"video {video.video_id}: probe frame {apex_idx} outside "
            f"(0, {len(video) - 1}]")
    if cfg.descriptor == "biwoof":
        key = (video.video_id, apex_idx)
        fields = None if field_cache is None else field_cache.get(key)
        if fields is None:
            fields = _fields_of(video, apex_idx, cfg.tvl1)
            if field_cache is not None:
                field_cache[key] = fields
        vec = biwoof(*fields, cfg.biwoof)
    elif cfg.descriptor == "lbpdiff":
        grid = block_partition(video.width, video.height,
                               cfg.biwoof.n_blocks)
        vec = lbp_difference_baseline(video.frame(0), video.frame(apex_idx),
                                      grid, cfg.lbp)
    else:
        grid = block_partition(video.width, video.height,
                               cfg.biwoof.n_blocks)
        vec = lbp_top(video, grid, cfg.lbp, cfg.lbptop_radii)
    if cfg.l1_normalize:
        mass = np.abs(vec).sum()
        if mass > 0:
            vec = vec / mass
    return vec


def sequence_feature(video, cfg: PipelineConfig):
    """Whole-sequence variant: mean of the per-frame descriptors computed
    against the onset frame for every later frame.  Iterates the full
    video, so it costs ~(F-1) times the two-frame path."""
    parts = [apex_pair_feature(video, j, cfg) for j in range(1, len(video))]
    return np.mean(np.stack(parts), axis=0)


def _check_no_leakage(manifest, train_ids, test_ids):
    subject_of = {e.video_id: e.subject_id for e in manifest.entries}
    test_subjects = {subject_of[v] for v in test_ids}
    leaked = [v for v in train_ids if subject_of[v] in test_subjects]
    if leaked:
        raise ProtocolError(
            f"subject leakage: training videos {leaked} share subjects "
            f"with the test fold")


REPORT_SCHEMA = {
    "type": "object",
    "required": ["protocol", "config", "folds", "confusion",
                 "precision", "recall", "f_measure", "accuracy"],
    "additionalProperties": False,
    "properties": {
        "protocol": {"enum": list(PROTOCOLS)},
        "config": {"type": "object"},
        "folds": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["fold_id", "test_ids", "predictions"],
                "additionalProperties": False,
                "properties": {
                    "fold_id": {"type": "string"},
                    "test_ids": {"type": "array",
                                 "items": {"type": "string"}},
                    "predictions": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["video_id", "true", "predicted"],
                            "additionalProperties": False,
                            "properties": {
                                "video_id": {"type": "string"},
                                "true": {"type": "integer"},
                                "predicted": {"type": "integer"},
                            },
                        },
                    },
                },
            },
        },
        "confusion": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}},
        },
        "precision": {"type": "number", "minimum": 0, "maximum": 1},
        "recall": {"type": "number", "minimum": 0, "maximum": 1},
        "f_measure": {"type": "number", "minimum": 0, "maximum": 1},
        "accuracy": {"type": "number", "minimum": 0, "maximum": 1},
    },
}


@dataclass
class EvalReport:
    protocol: str
    config: dict
    folds: list
    confusion: ConfusionMatrix
    precision: float
    recall: float
    f_measure: float
    accuracy: float

    def to_dict(self):
        return {
            "protocol": self.protocol,
            "config": self.config,
            "folds": self.folds,
            "confusion": self.confusion.counts.tolist(),
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "accuracy": self.accuracy,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary(self):
        return (f"precision={self.precision:.4f} recall={self.recall:.4f} "
                f"f_measure={self.f_measure:.4f} accuracy={self.accuracy:.4f}")


def _extract_all(manifest, cfg, mode, arg, repeat, jobs, field_cache):
    entries = sorted(manifest.entries, key=lambda e: e.video_id)

    def one(entry):
        video = load_video(entry, cfg.resize)
        apex = _resolve_apex(video, mode, arg, repeat)
        return apex_pair_feature(video, apex, cfg, field_cache)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            vectors = list(pool.map(one, entries))
    else:
        vectors = [one(e) for e in entries]
    return {e.video_id: vec for e, vec in zip(entries, vectors)}


def run_protocol(manifest: Manifest, cfg: PipelineConfig, jobs=1,
                 field_cache=None) -> EvalReport:
    """Cross-validated evaluation over a manifest.

    Features are extracted once per video (in parallel when ``jobs`` > 1,
    with order-independent aggregation), folds trained and scored in a
    fixed order, and micro-averaged metrics computed from the summed
    confusion matrix.  With ``apex_source=random:<seed>`` the whole
    procedure repeats ``random_repeats`` times with per-repeat draws; the
    reported metrics come from the confusion summed over repeats, which for
    single-label folds equals the mean of the per-repeat metrics.
    """
    if len(manifest.entries) == 0:
        raise DataError("manifest holds no entries")
    mode, arg = _parse_apex_source(cfg.apex_source)
    label_map = manifest.label_map
    n_classes = len(label_map)
    label_of = {e.video_id: label_map[e.label] for e in manifest.entries}

    folds = make_folds(manifest, cfg.protocol)
    fold_ids = _fold_ids(manifest, cfg.protocol)
    repeats = cfg.random_repeats if mode == "random" else 1

    total = ConfusionMatrix.empty(n_classes)
    fold_records = []
    for repeat in range(repeats):
        feats = _extract_all(manifest, cfg, mode, arg, repeat, jobs,
                             field_cache)
        for fold_id, (train_ids, test_ids) in zip(fold_ids, folds):
            if cfg.protocol == "loso":
                _check_no_leakage(manifest, train_ids, test_ids)
            x_train = np.stack([feats[v] for v in train_ids])
            y_train = np.array([label_of[v] for v in train_ids])
            model = train_linear_svm(x_train, y_train, cfg.svm_c)
            predictions = []
            for vid in test_ids:
                pred = predict(model, feats[vid])
                true = label_of[vid]
                total.counts[true, pred] += 1
                predictions.append({"video_id": vid, "true": int(true),
                                    "predicted": int(pred)})
            record_id = fold_id if repeats == 1 else f"r{repeat}:{fold_id}"
            fold_records.append({"fold_id": record_id,
                                 "test_ids": list(test_ids),
                                 "predictions": predictions})

    precision, recall, f_meas = f_measure(total)
    config = cfg.describe()
    config["label_map"] = {k: int(v) for k, v in sorted(label_map.items())}
    return EvalReport(
        protocol=cfg.protocol,
        config=config,
        folds=fold_records,
        confusion=total,
        precision=precision,
        recall=recall,
        f_measure=f_meas,
        accuracy=accuracy(total),
    )


ABLATION_AXES = ("bins", "blocks", "weights")
_WEIGHT_ORDER = ("none", "flow", "strain")


def ablate(manifest: Manifest, axis: str, base_cfg: PipelineConfig = None,
           jobs=1):
    """Sweep one configuration axis with run_protocol.

    bins: 1..10 orientation bins; blocks: 5x5..8x8 grids; weights: all nine
    (local, global) mode pairs.  Returns one result dict per grid cell;
    flow fields are cached across cells since the apex pairs never change.
    """
    if axis not in ABLATION_AXES:
        raise ConfigError(f"unknown ablation axis {axis!r}; "
                          f"choices: {ABLATION_AXES}")
    cfg = base_cfg if base_cfg is not None else PipelineConfig()
    if cfg.descriptor != "biwoof":
        raise ConfigError("ablation grids apply to the biwoof descriptor")
    cache = {}
    rows = []
    if axis == "bins":
        for c in range(1, 11):
            sub = replace(cfg, biwoof=replace(cfg.biwoof, n_bins=c))
            rep = run_protocol(manifest, sub, jobs=jobs, field_cache=cache)
            rows.append({"bins": c, "f_measure": rep.f_measure,
                         "accuracy": rep.accuracy})
    elif axis == "blocks":
        for n in range(5, 9):
            sub = replace(cfg, biwoof=replace(cfg.biwoof, n_blocks=n))
            rep = run_protocol(manifest, sub, jobs=jobs, field_cache=cache)
            rows.append({"blocks": n, "f_measure": rep.f_measure,
                         "accuracy": rep.accuracy})
    else:
        for glob in _WEIGHT_ORDER:
            for loc in _WEIGHT_ORDER:
                sub = replace(cfg, biwoof=replace(
                    cfg.biwoof, local_weight=loc, global_weight=glob))
                rep = run_protocol(manifest, sub, jobs=jobs,
                                   field_cache=cache)
                rows.append({"global": glob, "local": loc,
                             "f_measure": rep.f_measure,
                             "accuracy": rep.accuracy})
    return rows
