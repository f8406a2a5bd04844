"""Pure-numpy implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable.  The
arithmetic mirrors the compiled code expression-for-expression so both
backends agree to floating-point rounding.
"""

import numpy as np

GRAD_EPS = 1e-10


def warp_bilinear(image, u, v):
    """Sample ``image`` at (x + u, y + v) with bilinear interpolation,
    clamping sample coordinates to the image border."""
    h, w = image.shape
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    x = np.clip(xx + u, 0.0, w - 1.0)
    y = np.clip(yy + v, 0.0, h - 1.0)
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    ix0 = x0.astype(np.intp)
    iy0 = y0.astype(np.intp)
    ix1 = np.minimum(ix0 + 1, w - 1)
    iy1 = np.minimum(iy0 + 1, h - 1)
    i00 = image[iy0, ix0]
    i01 = image[iy0, ix1]
    i10 = image[iy1, ix0]
    i11 = image[iy1, ix1]
    return (1.0 - fy) * ((1.0 - fx) * i00 + fx * i01) \
        + fy * ((1.0 - fx) * i10 + fx * i11)


def median_3x3(field):
    """3x3 median filter with replicated borders."""
    h, w = field.shape
    padded = np.pad(field, 1, mode="edge")
    stack = np.empty((9, h, w), dtype=np.float64)
    k = 0
    for dy in range(3):
        for dx in range(3):
            stack[k] = padded[dy:dy + h, dx:dx + w]
            k += 1
    return np.partition(stack, 4, axis=0)[4]


def lbp_codes(image, dx, dy, margin_y, margin_x):
    """Per-pixel binary codes: bit k set when the bilinear sample at offset
    (dx[k], dy[k]) is >= the center value.  Pixels closer than the margins
    to the border get code -1."""
    h, w = image.shape
    codes = np.full((h, w), -1, dtype=np.int32)
    if h - 2 * margin_y <= 0 or w - 2 * margin_x <= 0:
        return codes
    ys = np.arange(margin_y, h - margin_y, dtype=np.float64)
    xs = np.arange(margin_x, w - margin_x, dtype=np.float64)
    center = image[margin_y:h - margin_y, margin_x:w - margin_x]
    acc = np.zeros(center.shape, dtype=np.int32)
    for k in range(len(dx)):
        x = xs + dx[k]
        y = ys + dy[k]
        x0 = np.floor(x)
        y0 = np.floor(y)
        fx = (x - x0)[None, :]
        fy = (y - y0)[:, None]
        ix0 = x0.astype(np.intp)
        iy0 = y0.astype(np.intp)
        ix1 = np.minimum(ix0 + 1, w - 1)
        iy1 = np.minimum(iy0 + 1, h - 1)
        i00 = image[np.ix_(iy0, ix0)]
        i01 = image[np.ix_(iy0, ix1)]
        i10 = image[np.ix_(iy1, ix0)]
        i11 = image[np.ix_(iy1, ix1)]
        val = (1.0 - fy) * ((1.0 - fx) * i00 + fx * i01) \
            + fy * ((1.0 - fx) * i10 + fx * i11)
        acc |= (val >= center).astype(np.int32) << k
    codes[margin_y:h - margin_y, margin_x:w - margin_x] = acc
    return codes


def _forward_diff(f):
    # forward differences, zero on the last column / row
    fx = np.zeros_like(f)
    fy = np.zeros_like(f)
    fx[:, :-1] = f[:, 1:] - f[:, :-1]
    fy[:-1, :] = f[1:, :] - f[:-1, :]
    return fx, fy


def _divergence(p1, p2):
    # adjoint of _forward_diff
    h, w = p1.shape
    div = np.zeros_like(p1)
    div[:, 0] += p1[:, 0]
    div[:, 1:w - 1] += p1[:, 1:w - 1] - p1[:, 0:w - 2]
    div[:, w - 1] += -p1[:, w - 2]
    div[0, :] += p2[0, :]
    div[1:h - 1, :] += p2[1:h - 1, :] - p2[0:h - 2, :]
    div[h - 1, :] += -p2[h - 2, :]
    return div


def tvl1_inner(i1wx, i1wy, grad, rho_c, u1, u2,
               p11, p12, p21, p22,
               l_t, theta, taut, lam, max_iters, eps2, energies=None):
    """Fixed-point primal-dual iterations of the duality-based total
    variation flow solver, for one warp.

    Mutates ``u1, u2`` (flow) and ``p11..p22`` (dual fields) in place and
    returns the number of iterations run.  When ``energies`` is given, the
    relaxed objective (TV + coupling + weighted data term) after each
    iteration is stored there.
    """
    size = float(u1.size)
    n = 0
    while n < max_iters:
        rho = rho_c + (i1wx * u1 + i1wy * u2)
        bound = l_t * grad
        mask_neg = rho < -bound
        mask_pos = rho > bound
        mask_mid = ~(mask_neg | mask_pos)
        grad_ok = grad > GRAD_EPS
        safe = np.where(grad_ok, grad, 1.0)
        fi = np.where(mask_mid & grad_ok, -rho / safe, 0.0)
        d1 = np.where(mask_neg, l_t * i1wx,
                      np.where(mask_pos, -(l_t * i1wx), fi * i1wx))
        d2 = np.where(mask_neg, l_t * i1wy,
                      np.where(mask_pos, -(l_t * i1wy), fi * i1wy))
        v1 = u1 + d1
        v2 = u2 + d2

        div_p1 = _divergence(p11, p12)
        div_p2 = _divergence(p21, p22)
        u1_new = v1 + theta * div_p1
        u2_new = v2 + theta * div_p2
        error = float(np.sum((u1_new - u1) ** 2 + (u2_new - u2) ** 2)) / size
        u1[:] = u1_new
        u2[:] = u2_new

        u1x, u1y = _forward_diff(u1)
        u2x, u2y = _forward_diff(u2)
        g1 = np.sqrt(u1x * u1x + u1y * u1y)
        g2 = np.sqrt(u2x * u2x + u2y * u2y)
        ng1 = 1.0 + taut * g1
        ng2 = 1.0 + taut * g2
        p11[:] = (p11 + taut * u1x) / ng1
        p12[:] = (p12 + taut * u1y) / ng1
        p21[:] = (p21 + taut * u2x) / ng2
        p22[:] = (p22 + taut * u2y) / ng2

        if energies is not None:
            data = np.abs(rho_c + (i1wx * v1 + i1wy * v2))
            coupling = (u1 - v1) ** 2 + (u2 - v2) ** 2
            energies[n] = float(np.sum(g1) + np.sum(g2)
                                + lam * np.sum(data)
                                + np.sum(coupling) / (2.0 * theta))
        n += 1
        if error < eps2:
            break
    return n
