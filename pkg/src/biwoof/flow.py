"""Dense optical flow between two grayscale frames.

Duality-based total-variation / L1 estimation on a Gaussian image pyramid
with iterated warping, plus the image-space helpers it needs (bilinear
resize and warp, centered gradients).  The flow convention is that
``reference[y, x]`` corresponds to ``target[y + v[y, x], x + u[y, x]]``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import FlowField, ShapeError

__all__ = [
    "TvL1Params",
    "estimate_tvl1",
    "warp_bilinear",
    "resize_bilinear",
    "centered_gradient",
]

_MIN_SCALE_SIDE = 16


@dataclass(frozen=True)
class TvL1Params:
    """Solver parameters.

    attachment : weight of the data term (larger -> flow follows intensity
        differences more aggressively, less smoothing)
    theta      : coupling between the data and regularity relaxations
    tau        : dual gradient-descent step, stable for tau <= 0.25
    n_scales   : requested pyramid depth; clamped so the coarsest level
        keeps a short side of at least 16 pixels
    zoom       : downsampling factor between pyramid levels, in (0, 1)
    n_warps    : warpings of the target per level
    n_iters    : maximum fixed-point iterations per warp
    stop_eps   : stop a warp early when the mean squared flow update
        falls below stop_eps**2
    """

    attachment: float = 0.15
    theta: float = 0.3
    tau: float = 0.25
    n_scales: int = 5
    zoom: float = 0.5
    n_warps: int = 5
    n_iters: int = 25
    stop_eps: float = 0.01

    def __post_init__(self):
        if not (self.attachment > 0 and self.theta > 0 and self.tau > 0):
            raise ValueError("attachment, theta and tau must be positive")
        if not (0.0 < self.zoom < 1.0):
            raise ValueError("zoom must lie in (0, 1)")
        if self.n_scales < 1 or self.n_warps < 1 or self.n_iters < 1:
            raise ValueError("n_scales, n_warps and n_iters must be >= 1")
        if self.stop_eps < 0:
            raise ValueError("stop_eps must be >= 0")


def _as_image(frame, name):
    arr = np.ascontiguousarray(frame, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be a 2-D image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def warp_bilinear(frame, flow):
    """Warp ``frame`` by ``flow``: output[y, x] = frame[y + v, x + u],
    bilinearly interpolated with border clamping."""
    arr = _as_image(frame, "frame")
    if (flow.height, flow.width) != arr.shape:
        raise ShapeError(
            f"flow shape {(flow.height, flow.width)} does not match "
            f"frame shape {arr.shape}")
    return _kernels.warp_bilinear(arr, flow.u, flow.v)


def resize_bilinear(image, out_shape):
    """Resize to ``out_shape`` = (height, width) with bilinear sampling.

    Uses the centered pixel-grid mapping src = (dst + 0.5) * scale - 0.5,
    so resizing to the same shape is the identity.
    """
    arr = _as_image(image, "image")
    out_h, out_w = int(out_shape[0]), int(out_shape[1])
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"invalid output shape {(out_h, out_w)}")
    in_h, in_w = arr.shape
    if (out_h, out_w) == (in_h, in_w):
        return arr.copy()
    sy = in_h / out_h
    sx = in_w / out_w
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * sy - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * sx - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    i00 = arr[np.ix_(y0, x0)]
    i01 = arr[np.ix_(y0, x1)]
    i10 = arr[np.ix_(y1, x0)]
    i11 = arr[np.ix_(y1, x1)]
    return (1.0 - fy) * ((1.0 - fx) * i00 + fx * i01) \
        + fy * ((1.0 - fx) * i10 + fx * i11)


def centered_gradient(image):
    """Central-difference gradient, one-sided at the borders but keeping
    the 1/2 factor, as used for the target image before warping."""
    arr = _as_image(image, "image")
    gx = np.empty_like(arr)
    gy = np.empty_like(arr)
    gx[:, 1:-1] = 0.5 * (arr[:, 2:] - arr[:, :-2])
    gx[:, 0] = 0.5 * (arr[:, 1] - arr[:, 0])
    gx[:, -1] = 0.5 * (arr[:, -1] - arr[:, -2])
    gy[1:-1, :] = 0.5 * (arr[2:, :] - arr[:-2, :])
    gy[0, :] = 0.5 * (arr[1, :] - arr[0, :])
    gy[-1, :] = 0.5 * (arr[-1, :] - arr[-2, :])
    return gx, gy


def _gaussian_smooth(image, sigma):
    if sigma <= 0:
        return image.copy()
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (xs / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(image, ((0, 0), (radius, radius)), mode="edge")
    out = np.empty_like(image)
    for i, kv in enumerate(kernel):
        term = kv * padded[:, i:i + image.shape[1]]
        out[:] = term if i == 0 else out + term
    padded = np.pad(out, ((radius, radius), (0, 0)), mode="edge")
    out2 = np.empty_like(image)
    for i, kv in enumerate(kernel):
        term = kv * padded[i:i + image.shape[0], :]
        out2[:] = term if i == 0 else out2 + term
    return out2


def _pyramid_sizes(shape, zoom, n_scales):
    sizes = [shape]
    while len(sizes) < n_scales:
        h, w = sizes[-1]
        nh = int(h * zoom + 0.5)
        nw = int(w * zoom + 0.5)
        if min(nh, nw) < _MIN_SCALE_SIDE:
            break
        sizes.append((nh, nw))
    return sizes


def _downscale(image, out_shape, zoom):
    sigma = 0.6 * math.sqrt(1.0 / (zoom * zoom) - 1.0)
    return resize_bilinear(_gaussian_smooth(image, sigma), out_shape)


def _solve_scale(i0, i1, u1, u2, params, scale, energy_log):
    i1x, i1y = centered_gradient(i1)
    shape = i0.shape
    l_t = params.attachment * params.theta
    taut = params.tau / params.theta
    eps2 = params.stop_eps * params.stop_eps
    for warp in range(params.n_warps):
        # fresh dual fields per warp: duals carried across a
        # re-linearization can push the relaxed objective above the
        # warp's starting value
        p11 = np.zeros(shape)
        p12 = np.zeros(shape)
        p21 = np.zeros(shape)
        p22 = np.zeros(shape)
        i1w = _kernels.warp_bilinear(i1, u1, u2)
        i1wx = _kernels.warp_bilinear(i1x, u1, u2)
        i1wy = _kernels.warp_bilinear(i1y, u1, u2)
        grad = i1wx * i1wx + i1wy * i1wy
        rho_c = i1w - i1wx * u1 - i1wy * u2 - i0
        energies = None
        if energy_log is not None:
            energies = np.zeros(params.n_iters)
        iters = _kernels.tvl1_inner(
            i1wx, i1wy, grad, rho_c, u1, u2, p11, p12, p21, p22,
            l_t, params.theta, taut, params.attachment,
            params.n_iters, eps2, energies)
        if energy_log is not None:
            energy_log.append({
                "scale": scale,
                "warp": warp,
                "energies": energies[:iters].copy(),
            })
        u1 = _kernels.median_3x3(u1)
        u2 = _kernels.median_3x3(u2)
    return u1, u2


def estimate_tvl1(reference, target, params=None, energy_log=None):
    """Estimate dense flow carrying ``reference`` onto ``target``.

    Parameters
    ----------
    reference, target : 2-D float arrays of identical shape.  Intensities
        are jointly rescaled to [0, 255] internally, so the default
        attachment weight behaves the same for [0, 1] and 8-bit inputs.
    params : TvL1Params, optional.
    energy_log : list, optional.  When given, one record per (scale, warp)
        with the relaxed objective after every inner iteration is appended;
        used to check that the solver actually descends.

    Returns
    -------
    FlowField with horizontal component ``u`` and vertical component ``v``.
    """
    if params is None:
        params = TvL1Params()
    ref = _as_image(reference, "reference")
    tgt = _as_image(target, "target")
    if ref.shape != tgt.shape:
        raise ShapeError(
            f"reference shape {ref.shape} != target shape {tgt.shape}")

    lo = min(ref.min(), tgt.min())
    hi = max(ref.max(), tgt.max())
    span = hi - lo
    if span > 0:
        i0 = 255.0 * (ref - lo) / span
        i1 = 255.0 * (tgt - lo) / span
    else:
        i0 = np.zeros_like(ref)
        i1 = np.zeros_like(tgt)

    sizes = _pyramid_sizes(ref.shape, params.zoom, params.n_scales)
    pyr0 = [i0]
    pyr1 = [i1]
    for size in sizes[1:]:
        pyr0.append(_downscale(pyr0[-1], size, params.zoom))
        pyr1.append(_downscale(pyr1[-1], size, params.zoom))

    coarsest = len(sizes) - 1
    u1 = np.zeros(sizes[coarsest])
    u2 = np.zeros(sizes[coarsest])
    for scale in range(coarsest, -1, -1):
        u1, u2 = _solve_scale(pyr0[scale], pyr1[scale], u1, u2,
                              params, scale, energy_log)
        if scale > 0:
            fine_h, fine_w = sizes[scale - 1]
            cur_h, cur_w = sizes[scale]
            u1 = np.ascontiguousarray(
                resize_bilinear(u1, (fine_h, fine_w)) * (fine_w / cur_w))
            u2 = np.ascontiguousarray(
                resize_bilinear(u2, (fine_h, fine_w)) * (fine_h / cur_h))
    return FlowField(u=u1, v=u2)
