# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Mirrors numpy_backend expression-for-expression; built with floating-point
contraction disabled so both backends agree to rounding.
"""

import numpy as np

from libc.math cimport floor, sqrt, fabs

DEF GRAD_EPS = 1e-10


cdef inline double _sample(const double[:, ::1] image, double x, double y,
                           Py_ssize_t h, Py_ssize_t w) nogil:
    cdef double x0, y0, fx, fy, i00, i01, i10, i11
    cdef Py_ssize_t ix0, iy0, ix1, iy1
    if x < 0.0:
        x = 0.0
    elif x > w - 1.0:
        x = w - 1.0
    if y < 0.0:
        y = 0.0
    elif y > h - 1.0:
        y = h - 1.0
    x0 = floor(x)
    y0 = floor(y)
    fx = x - x0
    fy = y - y0
    ix0 = <Py_ssize_t> x0
    iy0 = <Py_ssize_t> y0
    ix1 = ix0 + 1
    if ix1 > w - 1:
        ix1 = w - 1
    iy1 = iy0 + 1
    if iy1 > h - 1:
        iy1 = h - 1
    i00 = image[iy0, ix0]
    i01 = image[iy0, ix1]
    i10 = image[iy1, ix0]
    i11 = image[iy1, ix1]
    return (1.0 - fy) * ((1.0 - fx) * i00 + fx * i01) \
        + fy * ((1.0 - fx) * i10 + fx * i11)


def warp_bilinear(const double[:, ::1] image, const double[:, ::1] u,
                  const double[:, ::1] v):
    cdef Py_ssize_t h = image.shape[0]
    cdef Py_ssize_t w = image.shape[1]
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(h):
            for j in range(w):
                out[i, j] = _sample(image, j + u[i, j], i + v[i, j], h, w)
    return out_arr


def median_3x3(const double[:, ::1] field):
    cdef Py_ssize_t h = field.shape[0]
    cdef Py_ssize_t w = field.shape[1]
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double buf[9]
    cdef double tmp
    cdef Py_ssize_t i, j, di, dj, ri, rj, k, a, b, m
    with nogil:
        for i in range(h):
            for j in range(w):
                k = 0
                for di in range(-1, 2):
                    ri = i + di
                    if ri < 0:
                        ri = 0
                    elif ri > h - 1:
                        ri = h - 1
                    for dj in range(-1, 2):
                        rj = j + dj
                        if rj < 0:
                            rj = 0
                        elif rj > w - 1:
                            rj = w - 1
                        buf[k] = field[ri, rj]
                        k += 1
                for a in range(5):
                    m = a
                    for b in range(a + 1, 9):
                        if buf[b] < buf[m]:
                            m = b
                    tmp = buf[a]
                    buf[a] = buf[m]
                    buf[m] = tmp
                out[i, j] = buf[4]
    return out_arr


def lbp_codes(const double[:, ::1] image, const double[::1] dx,
              const double[::1] dy, Py_ssize_t margin_y, Py_ssize_t margin_x):
    cdef Py_ssize_t h = image.shape[0]
    cdef Py_ssize_t w = image.shape[1]
    cdef Py_ssize_t p = dx.shape[0]
    codes_arr = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] codes = codes_arr
    cdef Py_ssize_t i, j, k
    cdef int acc
    cdef double center, val
    if h - 2 * margin_y <= 0 or w - 2 * margin_x <= 0:
        return codes_arr
    with nogil:
        for i in range(margin_y, h - margin_y):
            for j in range(margin_x, w - margin_x):
                center = image[i, j]
                acc = 0
                for k in range(p):
                    val = _sample(image, j + dx[k], i + dy[k], h, w)
                    if val >= center:
                        acc |= 1 << k
                codes[i, j] = acc
    return codes_arr


def tvl1_inner(const double[:, ::1] i1wx, const double[:, ::1] i1wy,
               const double[:, ::1] grad, const double[:, ::1] rho_c,
               double[:, ::1] u1, double[:, ::1] u2,
               double[:, ::1] p11, double[:, ::1] p12,
               double[:, ::1] p21, double[:, ::1] p22,
               double l_t, double theta, double taut, double lam,
               int max_iters, double eps2, object energies=None):
    cdef Py_ssize_t h = u1.shape[0]
    cdef Py_ssize_t w = u1.shape[1]
    cdef double size = <double> (h * w)
    v1_arr = np.empty((h, w), dtype=np.float64)
    v2_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] v1 = v1_arr
    cdef double[:, ::1] v2 = v2_arr
    cdef double[::1] ebuf = None
    cdef bint want_energy = energies is not None
    if want_energy:
        ebuf = energies
    cdef Py_ssize_t i, j
    cdef int n = 0
    cdef double rho, bound, fi, d1, d2, dx, dy, du, dv, err, un
    cdef double ux, uy, g1, g2, ng, tv_sum, data_sum, coup_sum
    with nogil:
        while n < max_iters:
            for i in range(h):
                for j in range(w):
                    rho = rho_c[i, j] + (i1wx[i, j] * u1[i, j]
                                         + i1wy[i, j] * u2[i, j])
                    bound = l_t * grad[i, j]
                    if rho < -bound:
                        d1 = l_t * i1wx[i, j]
                        d2 = l_t * i1wy[i, j]
                    elif rho > bound:
                        d1 = -(l_t * i1wx[i, j])
                        d2 = -(l_t * i1wy[i, j])
                    elif grad[i, j] > GRAD_EPS:
                        fi = -rho / grad[i, j]
                        d1 = fi * i1wx[i, j]
                        d2 = fi * i1wy[i, j]
                    else:
                        d1 = 0.0
                        d2 = 0.0
                    v1[i, j] = u1[i, j] + d1
                    v2[i, j] = u2[i, j] + d2
            err = 0.0
            for i in range(h):
                for j in range(w):
                    # adjoint of the forward-difference gradient
                    if j == 0:
                        dx = p11[i, 0]
                    elif j == w - 1:
                        dx = -p11[i, w - 2]
                    else:
                        dx = p11[i, j] - p11[i, j - 1]
                    if i == 0:
                        dy = p12[0, j]
                    elif i == h - 1:
                        dy = -p12[h - 2, j]
                    else:
                        dy = p12[i, j] - p12[i - 1, j]
                    un = v1[i, j] + theta * (dx + dy)
                    du = un - u1[i, j]
                    u1[i, j] = un
                    if j == 0:
                        dx = p21[i, 0]
                    elif j == w - 1:
                        dx = -p21[i, w - 2]
                    else:
                        dx = p21[i, j] - p21[i, j - 1]
                    if i == 0:
                        dy = p22[0, j]
                    elif i == h - 1:
                        dy = -p22[h - 2, j]
                    else:
                        dy = p22[i, j] - p22[i - 1, j]
                    un = v2[i, j] + theta * (dx + dy)
                    dv = un - u2[i, j]
                    u2[i, j] = un
                    err += du * du + dv * dv
            err /= size
            tv_sum = 0.0
            for i in range(h):
                for j in range(w):
                    ux = u1[i, j + 1] - u1[i, j] if j < w - 1 else 0.0
                    uy = u1[i + 1, j] - u1[i, j] if i < h - 1 else 0.0
                    g1 = sqrt(ux * ux + uy * uy)
                    ng = 1.0 + taut * g1
                    p11[i, j] = (p11[i, j] + taut * ux) / ng
                    p12[i, j] = (p12[i, j] + taut * uy) / ng
                    ux = u2[i, j + 1] - u2[i, j] if j < w - 1 else 0.0
                    uy = u2[i + 1, j] - u2[i, j] if i < h - 1 else 0.0
                    g2 = sqrt(ux * ux + uy * uy)
                    ng = 1.0 + taut * g2
                    p21[i, j] = (p21[i, j] + taut * ux) / ng
                    p22[i, j] = (p22[i, j] + taut * uy) / ng
                    tv_sum += g1 + g2
            if want_energy:
                data_sum = 0.0
                coup_sum = 0.0
                for i in range(h):
                    for j in range(w):
                        data_sum += fabs(rho_c[i, j] + (i1wx[i, j] * v1[i, j]
                                                        + i1wy[i, j] * v2[i, j]))
                        du = u1[i, j] - v1[i, j]
                        dv = u2[i, j] - v2[i, j]
                        coup_sum += du * du + dv * dv
                ebuf[n] = tv_sum + lam * data_sum + coup_sum / (2.0 * theta)
            n += 1
            if err < eps2:
                break
    return n
