"""Block-wise feature descriptors.

* Bi-WOOF: per-block orientation histograms of optical flow, locally
  weighted per pixel and globally weighted per block (weight modes none /
  flow magnitude / optical strain; (none, none) degenerates to a plain
  orientation-count histogram).
* LBP histograms over a block grid, with uniform-pattern mapping.
* LBP on the onset/probe difference image.
* LBP-TOP over the XY, XT and YT planes of a whole video.

Feature vectors are flat float64 arrays; blocks are laid out row-major
(block row, then block column) with the per-block bins innermost.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .core import BiwoofConfig, ConfigError, ShapeError, VideoSample

__all__ = [
    "BlockGrid",
    "LbpParams",
    "block_partition",
    "bin_index",
    "biwoof",
    "lbp_histogram",
    "lbp_difference_baseline",
    "lbp_top",
    "lbp_bin_count",
]


@dataclass(frozen=True)
class BlockGrid:
    """Partition of an X-by-Y pixel image into N x N blocks.

    ``bounds`` lists (x0, x1, y0, y1) half-open pixel ranges, row-major by
    (block row, block column).  The ranges tile the image exactly.
    """

    n_blocks: int
    width: int
    height: int
    bounds: tuple

    def block_of(self, x, y):
        """Block (row, col) containing pixel column x, row y."""
        n = self.n_blocks
        bw = self.width // n
        bh = self.height // n
        return min(y // bh, n - 1), min(x // bw, n - 1)


@dataclass(frozen=True)
class LbpParams:
    """Circular binary-pattern parameters.

    neighbors sit on a circle of radius ``radius`` around each pixel,
    neighbor k at angle 2*pi*k/P from the positive x axis (y measured down
    the rows); ``uniform`` maps codes with at most two circular bit
    transitions to their own bins and everything else to one shared bin.
    """

    n_points: int = 8
    radius: int = 1
    uniform: bool = True

    def __post_init__(self):
        if self.n_points < 4:
            raise ConfigError(f"n_points must be >= 4, got {self.n_points}")
        if self.radius < 1:
            raise ConfigError(f"radius must be >= 1, got {self.radius}")


def lbp_bin_count(params: LbpParams) -> int:
    """Histogram width per block: P*(P-1)+3 uniform bins, else 2**P."""
    if params.uniform:
        return params.n_points * (params.n_points - 1) + 3
    return 1 << params.n_points


def block_partition(width, height, n_blocks) -> BlockGrid:
    """Split a width-by-height image into n_blocks x n_blocks blocks.

    Block widths are floor(width / n_blocks); the last column of blocks
    absorbs the remainder, and likewise for rows.
    """
    width = int(width)
    height = int(height)
    n = int(n_blocks)
    if n < 1:
        raise ConfigError(f"n_blocks must be >= 1, got {n}")
    if n > min(width, height):
        raise ConfigError(
            f"n_blocks={n} exceeds the smaller image side of "
            f"{min(width, height)} px")
    bw = width // n
    bh = height // n
    x_edges = [i * bw for i in range(n)] + [width]
    y_edges = [i * bh for i in range(n)] + [height]
    bounds = tuple(
        (x_edges[bc], x_edges[bc + 1], y_edges[br], y_edges[br + 1])
        for br in range(n) for bc in range(n))
    return BlockGrid(n_blocks=n, width=width, height=height, bounds=bounds)


def bin_index(orientation, n_bins):
    """Histogram bin of an orientation in [-pi, pi].

    Bin c covers [-pi + 2*pi*c/C, -pi + 2*pi*(c+1)/C); the upper boundary
    theta = pi is clamped into the top bin C-1.  Accepts scalars or arrays.
    """
    c = int(n_bins)
    if c < 1:
        raise ConfigError(f"n_bins must be >= 1, got {c}")
    theta = np.asarray(orientation, dtype=np.float64)
    if np.any(theta < -np.pi) or np.any(theta > np.pi):
        raise ValueError("orientation values outside [-pi, pi]")
    idx = np.floor((theta + np.pi) * (c / (2.0 * np.pi))).astype(np.int64)
    idx = np.minimum(idx, c - 1)
    if np.isscalar(orientation) or idx.ndim == 0:
        return int(idx)
    return idx


def _check_same_shape(name_a, a, name_b, b):
    if a.shape != b.shape:
        raise ShapeError(
            f"{name_a} shape {a.shape} does not match {name_b} shape {b.shape}")


def _weight_field(mode, magnitude, strain):
    if mode == "none":
        return None
    if mode == "flow":
        return magnitude
    return strain


def biwoof(orientation, magnitude, strain, config: BiwoofConfig):
    """Block-wise weighted orientation histogram.

    Per block: histogram over ``config.n_bins`` orientation bins where each
    pixel contributes its local weight (1, flow magnitude, or strain); the
    block's histogram is then multiplied by the block mean of the global
    weight field (1, flow magnitude, or strain).

    Returns a flat vector of length n_blocks**2 * n_bins.
    """
    orientation = np.asarray(orientation, dtype=np.float64)
    magnitude = np.asarray(magnitude, dtype=np.float64)
    strain = np.asarray(strain, dtype=np.float64)
    if orientation.ndim != 2:
        raise ShapeError(
            f"orientation must be 2-D, got shape {orientation.shape}")
    _check_same_shape("orientation", orientation, "magnitude", magnitude)
    _check_same_shape("orientation", orientation, "strain", strain)

    height, width = orientation.shape
    n = config.n_blocks
    c = config.n_bins
    grid = block_partition(width, height, n)
    bins = bin_index(orientation, c)
    local = _weight_field(config.local_weight, magnitude, strain)
    glob = _weight_field(config.global_weight, magnitude, strain)

    out = np.zeros(config.feature_length, dtype=np.float64)
    for bi, (x0, x1, y0, y1) in enumerate(grid.bounds):
        blk_bins = bins[y0:y1, x0:x1].ravel()
        if local is None:
            hist = np.bincount(blk_bins, minlength=c).astype(np.float64)
        else:
            hist = np.bincount(blk_bins,
                               weights=local[y0:y1, x0:x1].ravel(),
                               minlength=c)
        zeta = 1.0 if glob is None else float(glob[y0:y1, x0:x1].mean())
        out[bi * c:(bi + 1) * c] = zeta * hist
    return out


@lru_cache(maxsize=8)
def _uniform_table(n_points):
    # codes with <= 2 circular bit transitions get their own bins in
    # ascending code order; everything else shares the last bin
    table = np.full(1 << n_points, -1, dtype=np.int64)
    next_bin = 0
    for code in range(1 << n_points):
        transitions = 0
        for k in range(n_points):
            if ((code >> k) & 1) != ((code >> ((k + 1) % n_points)) & 1):
                transitions += 1
        if transitions <= 2:
            table[code] = next_bin
            next_bin += 1
    table[table < 0] = next_bin
    return table


@lru_cache(maxsize=32)
def _circle_offsets(n_points, radius_x, radius_y):
    angles = 2.0 * np.pi * np.arange(n_points) / n_points
    dx = radius_x * np.cos(angles)
    dy = radius_y * np.sin(angles)
    # snap near-integer offsets so exact-neighbor samples skip interpolation
    dx = np.where(np.abs(dx - np.round(dx)) < 1e-9, np.round(dx), dx)
    dy = np.where(np.abs(dy - np.round(dy)) < 1e-9, np.round(dy), dy)
    return np.ascontiguousarray(dx), np.ascontiguousarray(dy)


def _code_bins(image, params, margin_y, margin_x, radius_y, radius_x):
    """Full-size map of histogram bin per pixel, -1 outside the margins."""
    dx, dy = _circle_offsets(params.n_points, radius_x, radius_y)
    codes = _kernels.lbp_codes(image, dx, dy, margin_y, margin_x)
    if not params.uniform:
        return codes.astype(np.int64)
    table = _uniform_table(params.n_points)
    out = np.full(codes.shape, -1, dtype=np.int64)
    valid = codes >= 0
    out[valid] = table[codes[valid]]
    return out


def _check_grid(grid, width, height):
    if grid.width != width or grid.height != height:
        raise ShapeError(
            f"grid tiles {grid.width}x{grid.height} px but the image is "
            f"{width}x{height}")


def lbp_histogram(frame, grid: BlockGrid, params: LbpParams = LbpParams(),
                  mask=None):
    """Per-block histograms of circular binary-pattern codes.

    Pixels within ``params.radius`` of the border carry no code and are
    skipped; an optional boolean ``mask`` restricts counting further.
    Returns a flat vector of length n_blocks**2 * bins.
    """
    arr = np.ascontiguousarray(frame, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"frame must be 2-D, got shape {arr.shape}")
    r = params.radius
    if min(arr.shape) < 2 * r + 1:
        raise ShapeError(
            f"frame sides must be at least {2 * r + 1} px for radius {r}, "
            f"got {arr.shape}")
    height, width = arr.shape
    _check_grid(grid, width, height)
    n_bins = lbp_bin_count(params)
    bins = _code_bins(arr, params, r, r, r, r)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        _check_same_shape("mask", mask, "frame", arr)
        bins = np.where(mask, bins, -1)

    n = grid.n_blocks
    out = np.zeros(n * n * n_bins, dtype=np.float64)
    for bi, (x0, x1, y0, y1) in enumerate(grid.bounds):
        blk = bins[y0:y1, x0:x1].ravel()
        blk = blk[blk >= 0]
        out[bi * n_bins:(bi + 1) * n_bins] = np.bincount(
            blk, minlength=n_bins).astype(np.float64)
    return out


def lbp_difference_baseline(onset, probe, grid: BlockGrid,
                            params: LbpParams = LbpParams()):
    """Binary-pattern histogram of the onset/probe difference image.

    The difference (probe - onset) of [0, 1] frames lies in [-1, 1] and is
    mapped affinely to [0, 1] before coding, so identical frames produce
    the constant 0.5 image.
    """
    onset = np.ascontiguousarray(onset, dtype=np.float64)
    probe = np.ascontiguousarray(probe, dtype=np.float64)
    _check_same_shape("probe", probe, "onset", onset)
    diff01 = ((probe - onset) + 1.0) / 2.0
    return lbp_histogram(diff01, grid, params)


def lbp_top(video: VideoSample, grid: BlockGrid,
            params: LbpParams = LbpParams(), radii=(1, 1, 2)):
    """Spatiotemporal binary patterns over three orthogonal planes.

    For every voxel inside the spatial margins (radius_x, radius_y) and the
    temporal margin radius_t, codes are computed on the XY, XT and YT
    planes through that voxel and accumulated into per-block histograms.
    Per block the output is [XY bins | XT bins | YT bins]; blocks are
    row-major, giving n_blocks**2 * 3 * bins features in total.
    """
    rx, ry, rt = (int(r) for r in radii)
    if min(rx, ry, rt) < 1:
        raise ConfigError(f"radii must be >= 1, got {radii}")
    frames = video.frames
    n_frames, height, width = frames.shape
    if n_frames <= 2 * rt:
        raise ShapeError(
            f"video needs more than {2 * rt} frames for temporal radius "
            f"{rt}, got {n_frames}")
    if min(height, width) < 2 * max(rx, ry) + 1:
        raise ShapeError(
            f"frames of shape {(height, width)} too small for spatial "
            f"radii {(rx, ry)}")
    _check_grid(grid, width, height)

    n = grid.n_blocks
    n_bins = lbp_bin_count(params)
    stride = 3 * n_bins
    out = np.zeros(n * n * stride, dtype=np.float64)

    # block id per pixel row / column
    row_block = np.empty(height, dtype=np.int64)
    col_block = np.empty(width, dtype=np.int64)
    for bi, (x0, x1, y0, y1) in enumerate(grid.bounds):
        br, bc = divmod(bi, n)
        row_block[y0:y1] = br
        col_block[x0:x1] = bc

    def accumulate(bins2d, rows_are, cols_are, fixed, plane):
        # bins2d: bin per (row, col) with -1 outside the valid margins
        rr, cc = np.nonzero(bins2d >= 0)
        vals = bins2d[rr, cc]
        if rows_are == "y":
            blk = row_block[rr] * n + col_block[cc]
        elif cols_are == "x":   # rows are t, fixed is y
            blk = row_block[fixed] * n + col_block[cc]
        else:                   # rows are t, cols are y, fixed is x
            blk = row_block[cc] * n + col_block[fixed]
        keys = blk * stride + plane * n_bins + vals
        np.add.at(out, keys, 1.0)

    for t in range(rt, n_frames - rt):
        bins2d = _code_bins(np.ascontiguousarray(frames[t]), params,
                            ry, rx, ry, rx)
        accumulate(bins2d, "y", "x", None, 0)
    for y in range(ry, height - ry):
        sl = np.ascontiguousarray(frames[:, y, :])
        bins2d = _code_bins(sl, params, rt, rx, rt, rx)
        accumulate(bins2d, "t", "x", y, 1)
    for x in range(rx, width - rx):
        sl = np.ascontiguousarray(frames[:, :, x])
        bins2d = _code_bins(sl, params, rt, ry, rt, ry)
        accumulate(bins2d, "t", "y", x, 2)
    return out
