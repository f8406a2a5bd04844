"""Command-line front end.

Subcommands: ``spot`` (apex localization), ``features`` (feature CSV
export), ``eval`` (cross-validated evaluation report), ``ablate``
(configuration sweeps), ``flow`` (pairwise flow to a .flo file).  All
configuration comes from flags, optionally seeded from a TOML file given
with --config; explicit flags override file values.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:                      # Python < 3.11
    import tomli as tomllib

from .core import BiwoofConfig, WEIGHT_MODES
from .dataio import load_manifest, load_video, write_flo
from .descriptors import LbpParams, block_partition
from .evaluation import (DESCRIPTORS, PROTOCOLS, PipelineConfig, ablate,
                         apex_pair_feature, run_protocol, _parse_apex_source,
                         _resolve_apex)
from .flow import estimate_tvl1, resize_bilinear
from .spotting import frame_difference_curve, spot_apex
from . import dataio

__all__ = ["main"]

_DEFAULTS = {
    "blocks": 5,
    "bins": 8,
    "local": "flow",
    "global": "strain",
    "descriptor": "biwoof",
    "apex": "groundtruth",
    "protocol": "loso",
    "svm_c": 1.0,
    "repeats": 10,
    "jobs": 1,
    "resize": None,
    "l1_normalize": False,
}


def _parse_resize(text):
    if text is None:
        return None
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise SystemExit(
            f"error: --resize expects WIDTHxHEIGHT, got {text!r}")
    if w < 1 or h < 1:
        raise SystemExit(f"error: --resize dimensions must be >= 1")
    return (w, h)


def _load_config(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    if not isinstance(data, dict):
        raise SystemExit(f"error: config {path} must be a TOML table")
    return data


def _get(args, config, key, cast=None):
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, _DEFAULTS.get(key))
    if value is not None and cast is not None:
        value = cast(value)
    return value


def _pipeline_config(args, config):
    resize = _get(args, config, "resize")
    if isinstance(resize, str):
        resize = _parse_resize(resize)
    elif isinstance(resize, (list, tuple)):
        resize = (int(resize[0]), int(resize[1]))
    global_weight = getattr(args, "global_", None)
    if global_weight is None:
        global_weight = config.get("global", _DEFAULTS["global"])
    bw = BiwoofConfig(
        n_blocks=_get(args, config, "blocks", int),
        n_bins=_get(args, config, "bins", int),
        local_weight=_get(args, config, "local"),
        global_weight=global_weight,
    )
    return PipelineConfig(
        descriptor=_get(args, config, "descriptor"),
        biwoof=bw,
        lbp=LbpParams(),
        apex_source=_get(args, config, "apex"),
        random_repeats=_get(args, config, "repeats", int),
        resize=resize,
        protocol=_get(args, config, "protocol"),
        svm_c=_get(args, config, "svm_c", float),
        l1_normalize=bool(_get(args, config, "l1_normalize")),
    )


def _load_mask(path, resize):
    if path is None:
        return None
    from PIL import Image
    from .core import to_gray
    with Image.open(path) as img:
        gray = to_gray(np.asarray(img))
    if resize is not None:
        width, height = resize
        gray = resize_bilinear(gray, (height, width))
    return gray > 0.5


def _load_image(path, resize):
    from PIL import Image
    from .core import to_gray
    with Image.open(path) as img:
        gray = to_gray(np.asarray(img))
    if resize is not None:
        width, height = resize
        gray = resize_bilinear(gray, (height, width))
    return gray


def cmd_spot(args):
    config = _load_config(args.config)
    manifest = load_manifest(_require(args, config, "manifest"))
    out_path = _require(args, config, "out")
    resize = _get(args, config, "resize")
    if isinstance(resize, str):
        resize = _parse_resize(resize)
    n_blocks = _get(args, config, "blocks", int)
    mask = _load_mask(args.roi_mask, resize)
    dump_dir = args.dump_curves
    if dump_dir:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)

    rows = []
    distances = []
    failures = 0
    for entry in sorted(manifest.entries, key=lambda e: e.video_id):
        try:
            video = load_video(entry, resize)
            grid = block_partition(video.width, video.height, n_blocks)
            if dump_dir:
                curve = frame_difference_curve(video, grid, mask=mask)
                with open(Path(dump_dir) / f"{entry.video_id}.csv", "w",
                          newline="", encoding="utf-8") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["frame", "score"])
                    for j, s in enumerate(curve.scores):
                        writer.writerow([entry.onset + j + 1, "%.9g" % s])
            spotted = spot_apex(video, grid, mask=mask)
        except (ValueError, OSError) as exc:
            print(f"error: {entry.video_id}: {exc}", file=sys.stderr)
            failures += 1
            continue
        spotted_file = entry.onset + spotted + 1          # back to 1-based
        if entry.apex is not None:
            dist = abs((entry.apex - entry.onset) - spotted)
            distances.append(dist)
            rows.append([entry.video_id, spotted_file, entry.apex + 1, dist])
        else:
            rows.append([entry.video_id, spotted_file, "", ""])

    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["video_id", "spotted_apex", "ground_truth_apex",
                         "abs_distance"])
        writer.writerows(rows)
    if distances:
        print(f"mean_abs_distance={np.mean(distances):.4f}")
    return 1 if failures else 0


def cmd_features(args):
    config = _load_config(args.config)
    manifest = load_manifest(_require(args, config, "manifest"))
    out_path = _require(args, config, "out")
    cfg = _pipeline_config(args, config)
    jobs = _get(args, config, "jobs", int)
    mode, arg = _parse_apex_source(cfg.apex_source)

    entries = sorted(manifest.entries, key=lambda e: e.video_id)

    def one(entry):
        video = load_video(entry, cfg.resize)
        apex = _resolve_apex(video, mode, arg, 0)
        return apex_pair_feature(video, apex, cfg)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(one, e) for e in entries]
    else:
        futures = None

    rows = []
    failures = 0
    for idx, entry in enumerate(entries):
        try:
            vec = futures[idx].result() if futures else one(entry)
        except (ValueError, OSError) as exc:
            print(f"error: {entry.video_id}: {exc}", file=sys.stderr)
            failures += 1
            continue
        rows.append((entry.video_id, entry.label, vec))
    dataio.export_features(rows, out_path)
    return 1 if failures else 0


def cmd_eval(args):
    config = _load_config(args.config)
    manifest = load_manifest(_require(args, config, "manifest"))
    out_path = _require(args, config, "out")
    cfg = _pipeline_config(args, config)
    jobs = _get(args, config, "jobs", int)
    try:
        report = run_protocol(manifest, cfg, jobs=jobs)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    pred_path = Path(out_path).with_suffix(".predictions.csv")
    with open(pred_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold_id", "video_id", "true", "predicted"])
        for fold in report.folds:
            for p in fold["predictions"]:
                writer.writerow([fold["fold_id"], p["video_id"],
                                 p["true"], p["predicted"]])
    print(report.summary())
    return 0


def cmd_ablate(args):
    config = _load_config(args.config)
    manifest = load_manifest(_require(args, config, "manifest"))
    out_path = _require(args, config, "out")
    cfg = _pipeline_config(args, config)
    jobs = _get(args, config, "jobs", int)
    try:
        rows = ablate(manifest, args.axis, cfg, jobs=jobs)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(rows[0].keys())
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                f"{v:.4f}" if isinstance(v, float) else v
                for v in (row[k] for k in header)])
    print(f"wrote {len(rows)} rows to {out_path}")
    return 0


def cmd_flow(args):
    config = _load_config(args.config)
    resize = _get(args, config, "resize")
    if isinstance(resize, str):
        resize = _parse_resize(resize)
    try:
        ref = _load_image(args.reference, resize)
        tgt = _load_image(args.target, resize)
        flow = estimate_tvl1(ref, tgt)
        write_flo(flow, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {flow.width}x{flow.height} flow to {args.out} "
          f"(mean |u|={np.abs(flow.u).mean():.4f}, "
          f"mean |v|={np.abs(flow.v).mean():.4f})")
    return 0


def _require(args, config, key):
    value = _get(args, config, key)
    if value is None:
        raise SystemExit(f"error: --{key.replace('_', '-')} is required")
    return value


def _add_common(sub):
    sub.add_argument("--config", help="TOML file supplying flag defaults")
    sub.add_argument("--manifest", help="dataset manifest CSV")
    sub.add_argument("--out", help="output path")
    sub.add_argument("--resize", help="resize frames to WIDTHxHEIGHT")
    sub.add_argument("--jobs", type=int, help="parallel workers (default 1)")


def _add_feature_flags(sub):
    sub.add_argument("--descriptor", choices=DESCRIPTORS)
    sub.add_argument("--blocks", type=int, help="blocks per side (default 5)")
    sub.add_argument("--bins", type=int,
                     help="orientation bins per block (default 8)")
    sub.add_argument("--local", choices=WEIGHT_MODES,
                     help="per-pixel weight (default flow)")
    sub.add_argument("--global", dest="global_", choices=WEIGHT_MODES,
                     help="per-block weight (default strain)")
    sub.add_argument("--apex",
                     help="groundtruth | spotted | random:<seed> | fixed:<k>")
    sub.add_argument("--repeats", type=int,
                     help="repeats for random apex mode (default 10)")
    sub.add_argument("--l1-normalize", dest="l1_normalize",
                     action="store_const", const=True,
                     help="L1-normalize feature vectors")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="biwoof",
        description="Micro-expression analysis: optical-flow descriptors, "
                    "apex spotting, and cross-validated evaluation.")
    subs = parser.add_subparsers(dest="command", required=True)

    spot = subs.add_parser("spot", help="locate apex frames")
    _add_common(spot)
    spot.add_argument("--blocks", type=int,
                      help="blocks per side for the pattern grid (default 5)")
    spot.add_argument("--roi-mask",
                      help="image file; pixels > 0.5 mark the region used")
    spot.add_argument("--dump-curves", metavar="DIR",
                      help="write one difference-curve CSV per video")
    spot.set_defaults(func=cmd_spot)

    feats = subs.add_parser("features", help="export feature vectors")
    _add_common(feats)
    _add_feature_flags(feats)
    feats.set_defaults(func=cmd_features)

    evl = subs.add_parser("eval", help="cross-validated evaluation")
    _add_common(evl)
    _add_feature_flags(evl)
    evl.add_argument("--protocol", choices=PROTOCOLS)
    evl.add_argument("--svm-c", dest="svm_c", type=float,
                     help="SVM regularization (default 1.0)")
    evl.set_defaults(func=cmd_eval)

    abl = subs.add_parser("ablate", help="sweep a configuration axis")
    _add_common(abl)
    _add_feature_flags(abl)
    abl.add_argument("--axis", required=True,
                     choices=("bins", "blocks", "weights"))
    abl.add_argument("--protocol", choices=PROTOCOLS)
    abl.add_argument("--svm-c", dest="svm_c", type=float)
    abl.set_defaults(func=cmd_ablate)

    flw = subs.add_parser("flow", help="flow between two images to .flo")
    flw.add_argument("reference")
    flw.add_argument("target")
    flw.add_argument("--out", required=True)
    flw.add_argument("--resize")
    flw.add_argument("--config")
    flw.set_defaults(func=cmd_flow)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
