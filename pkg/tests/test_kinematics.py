import numpy as np
import pytest

from biwoof.core import FlowField
from biwoof.kinematics import polar_decompose, strain_magnitude


def _flow(u, v):
    return FlowField(u=np.asarray(u, float), v=np.asarray(v, float))


def brute_force_strain(flow):
    """Independent evaluator: full 2x2 tensor per pixel, sum of squares."""
    u, v = flow.u, flow.v
    h, w = u.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            def d(f, axis):
                if axis == 0:  # d/dy
                    if i == 0:
                        return f[1, j] - f[0, j]
                    if i == h - 1:
                        return f[i, j] - f[i - 1, j]
                    return 0.5 * (f[i + 1, j] - f[i - 1, j])
                if j == 0:
                    return f[i, 1] - f[i, 0]
                if j == w - 1:
                    return f[i, j] - f[i, j - 1]
                return 0.5 * (f[i, j + 1] - f[i, j - 1])

            exx = d(u, 1)
            eyy = d(v, 0)
            exy = 0.5 * (d(u, 0) + d(v, 1))
            out[i, j] = np.sqrt(exx ** 2 + eyy ** 2 + exy ** 2 + exy ** 2)
    return out


def test_polar_345():
    mag, ori = polar_decompose(_flow(np.full((2, 2), 3.0),
                                     np.full((2, 2), 4.0)))
    np.testing.assert_allclose(mag, 5.0)
    np.testing.assert_allclose(ori, np.arctan2(4.0, 3.0))


def test_polar_axis_and_zero():
    mag, ori = polar_decompose(_flow([[0.0]], [[1.0]]))
    assert ori[0, 0] == pytest.approx(np.pi / 2)
    mag, ori = polar_decompose(_flow([[0.0]], [[0.0]]))
    assert mag[0, 0] == 0.0
    assert ori[0, 0] == 0.0


def test_polar_range_and_antipode(rng):
    u = rng.normal(0, 2, (16, 16))
    v = rng.normal(0, 2, (16, 16))
    mag, ori = polar_decompose(_flow(u, v))
    assert np.all(ori >= -np.pi) and np.all(ori <= np.pi)
    _, ori_neg = polar_decompose(_flow(-u, -v))
    # opposite vectors differ by pi (mod 2*pi) wherever magnitude > 0
    diff = np.abs(np.mod(ori - ori_neg, 2 * np.pi) - np.pi)
    assert diff[mag > 0].max() < 1e-12


def test_scaling_property(rng):
    u = rng.normal(0, 1, (12, 12))
    v = rng.normal(0, 1, (12, 12))
    f = _flow(u, v)
    mag, ori = polar_decompose(f)
    eps = strain_magnitude(f)
    s = 3.7
    mag_s, ori_s = polar_decompose(_flow(s * u, s * v))
    eps_s = strain_magnitude(_flow(s * u, s * v))
    np.testing.assert_allclose(mag_s, s * mag, rtol=1e-9)
    np.testing.assert_allclose(eps_s, s * eps, rtol=1e-9)
    np.testing.assert_allclose(ori_s[mag > 0], ori[mag > 0], rtol=1e-12)


def test_constant_flow_zero_strain():
    f = _flow(np.full((8, 8), 2.5), np.full((8, 8), -1.25))
    np.testing.assert_array_equal(strain_magnitude(f), 0.0)


def test_translation_invariance(rng):
    u = rng.normal(0, 1, (10, 10))
    v = rng.normal(0, 1, (10, 10))
    base = strain_magnitude(_flow(u, v))
    shifted = strain_magnitude(_flow(u + 5.0, v - 3.0))
    np.testing.assert_allclose(shifted, base, atol=1e-12)


def test_pure_stretch():
    # u = 0.1*x: normal strain 0.1, everything else 0
    x = np.tile(np.arange(8, dtype=float), (8, 1))
    eps = strain_magnitude(_flow(0.1 * x, np.zeros((8, 8))))
    np.testing.assert_allclose(eps, 0.1, rtol=1e-12)


def test_pure_shear():
    # u = 0.2*y: shear 0.1 in both off-diagonal slots -> sqrt(0.02)
    y = np.tile(np.arange(8, dtype=float)[:, None], (1, 8))
    eps = strain_magnitude(_flow(0.2 * y, np.zeros((8, 8))))
    np.testing.assert_allclose(eps, np.sqrt(0.02), rtol=1e-12)
    assert eps[4, 4] == pytest.approx(0.1414213562, abs=1e-9)


def test_strain_rejects_tiny_fields():
    from biwoof.core import ShapeError
    with pytest.raises(ShapeError):
        strain_magnitude(_flow(np.zeros((1, 5)), np.zeros((1, 5))))
    with pytest.raises(ShapeError):
        strain_magnitude(_flow(np.zeros((5, 1)), np.zeros((5, 1))))


def test_strain_matches_brute_force(rng):
    for _ in range(20):
        u = rng.normal(0, 2, (9, 11))
        v = rng.normal(0, 2, (9, 11))
        f = _flow(u, v)
        np.testing.assert_allclose(strain_magnitude(f), brute_force_strain(f),
                                   atol=1e-10)
