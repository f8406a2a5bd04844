import numpy as np
import pytest

from biwoof.core import BiwoofConfig, ConfigError, FlowField, ShapeError, WEIGHT_MODES
from biwoof.descriptors import (
    LbpParams,
    bin_index,
    biwoof,
    block_partition,
    lbp_bin_count,
    lbp_difference_baseline,
    lbp_histogram,
    lbp_top,
)
from biwoof.kinematics import polar_decompose, strain_magnitude


def brute_force_biwoof(orientation, magnitude, strain, cfg):
    """Independent per-pixel accumulator; shares no block or bin code with
    the implementation."""
    h, w = orientation.shape
    n, c = cfg.n_blocks, cfg.n_bins
    bw, bh = w // n, h // n
    hist = np.zeros((n, n, c))
    zeta_sum = np.zeros((n, n))
    zeta_cnt = np.zeros((n, n))
    for y in range(h):
        for x in range(w):
            br = min(y // bh, n - 1)
            bc = min(x // bw, n - 1)
            b = min(int(np.floor((orientation[y, x] + np.pi) * c
                                 / (2.0 * np.pi))), c - 1)
            if cfg.local_weight == "none":
                wgt = 1.0
            elif cfg.local_weight == "flow":
                wgt = magnitude[y, x]
            else:
                wgt = strain[y, x]
            hist[br, bc, b] += wgt
            if cfg.global_weight == "flow":
                zeta_sum[br, bc] += magnitude[y, x]
            elif cfg.global_weight == "strain":
                zeta_sum[br, bc] += strain[y, x]
            else:
                zeta_sum[br, bc] += 1.0
            zeta_cnt[br, bc] += 1.0
    hist *= (zeta_sum / zeta_cnt)[:, :, None]
    return hist.reshape(-1)


def random_fields(rng, shape=(16, 16)):
    flow = FlowField(u=rng.normal(0, 2, shape), v=rng.normal(0, 2, shape))
    mag, ori = polar_decompose(flow)
    return ori, mag, strain_magnitude(flow)


# ---------------------------------------------------------------- blocks


def test_block_partition_exact_division():
    grid = block_partition(16, 16, 4)
    assert grid.n_blocks == 4
    assert len(grid.bounds) == 16
    for x0, x1, y0, y1 in grid.bounds:
        assert x1 - x0 == 4 and y1 - y0 == 4


def test_block_partition_remainder_goes_last():
    grid = block_partition(170, 140, 8)
    widths = [x1 - x0 for x0, x1, y0, y1 in grid.bounds[:8]]
    assert widths == [21] * 7 + [23]
    heights = [y1 - y0 for x0, x1, y0, y1 in grid.bounds[::8]]
    assert heights == [17] * 7 + [21]


def test_block_partition_single_block():
    grid = block_partition(10, 7, 1)
    assert grid.bounds == ((0, 10, 0, 7),)


def test_block_partition_tiles_exactly(rng):
    for _ in range(10):
        w = int(rng.integers(5, 40))
        h = int(rng.integers(5, 40))
        n = int(rng.integers(1, min(w, h) + 1))
        grid = block_partition(w, h, n)
        cover = np.zeros((h, w), dtype=int)
        for x0, x1, y0, y1 in grid.bounds:
            cover[y0:y1, x0:x1] += 1
        assert np.all(cover == 1)


def test_block_partition_rejects_oversize_n():
    with pytest.raises(ConfigError):
        block_partition(8, 16, 9)
    with pytest.raises(ConfigError):
        block_partition(8, 8, 0)


# ------------------------------------------------------------------ bins


def test_bin_index_examples():
    assert bin_index(0.0, 8) == 4
    assert bin_index(-np.pi, 8) == 0
    assert bin_index(np.pi, 8) == 7
    assert bin_index(np.pi / 4, 8) == 5


def test_bin_index_domain_error():
    with pytest.raises(ValueError):
        bin_index(np.pi + 0.01, 8)
    with pytest.raises(ValueError):
        bin_index(-4.0, 8)


def test_bin_index_array_covers_all_bins():
    c = 6
    centers = -np.pi + (np.arange(c) + 0.5) * 2 * np.pi / c
    np.testing.assert_array_equal(bin_index(centers, c), np.arange(c))


# ---------------------------------------------------------------- biwoof


def test_biwoof_zero_flow_is_zero_vector():
    z = np.zeros((8, 8))
    cfg = BiwoofConfig(n_blocks=2, n_bins=8, local_weight="flow",
                       global_weight="strain")
    out = biwoof(z, z, z, cfg)
    assert out.shape == (2 * 2 * 8,)
    np.testing.assert_array_equal(out, 0.0)


def test_biwoof_uniform_flow_hand_count():
    # unit flow pointing along +x on an 8x8 image: theta=0 -> bin 4,
    # rho=1 per pixel, 64 pixels
    ori = np.zeros((8, 8))
    mag = np.ones((8, 8))
    strain = np.zeros((8, 8))
    cfg = BiwoofConfig(n_blocks=1, n_bins=8, local_weight="flow",
                       global_weight="none")
    out = biwoof(ori, mag, strain, cfg)
    expected = np.zeros(8)
    expected[4] = 64.0
    np.testing.assert_array_equal(out, expected)
    # pure orientation count gives the same numbers here
    cfg_count = BiwoofConfig(n_blocks=1, n_bins=8, local_weight="none",
                             global_weight="none")
    np.testing.assert_array_equal(biwoof(ori, mag, strain, cfg_count),
                                  expected)


def test_biwoof_mass_conservation(rng):
    ori, mag, strain = random_fields(rng)
    cfg = BiwoofConfig(n_blocks=4, n_bins=8, local_weight="none",
                       global_weight="none")
    out = biwoof(ori, mag, strain, cfg)
    assert out.sum() == pytest.approx(16 * 16)


def test_biwoof_block_sums_match_flow_mass(rng):
    ori, mag, strain = random_fields(rng)
    cfg = BiwoofConfig(n_blocks=4, n_bins=8, local_weight="flow",
                       global_weight="none")
    out = biwoof(ori, mag, strain, cfg).reshape(16, 8)
    grid = block_partition(16, 16, 4)
    for bi, (x0, x1, y0, y1) in enumerate(grid.bounds):
        assert out[bi].sum() == pytest.approx(
            mag[y0:y1, x0:x1].sum(), rel=1e-9)


def test_biwoof_cyclic_bin_shift(rng):
    # orientations pinned to bin centers so a rotation by one bin width
    # stays strictly inside bins on both sides
    c = 8
    width = 2 * np.pi / c
    k = rng.integers(0, c, (12, 12))
    ori = -np.pi + (k + 0.5) * width
    mag = rng.uniform(0.5, 2.0, (12, 12))
    strain = np.zeros((12, 12))
    cfg = BiwoofConfig(n_blocks=3, n_bins=c, local_weight="flow",
                       global_weight="none")
    base = biwoof(ori, mag, strain, cfg).reshape(9, c)
    ori_rot = ori + width
    ori_rot = np.where(ori_rot > np.pi, ori_rot - 2 * np.pi, ori_rot)
    rot = biwoof(ori_rot, mag, strain, cfg).reshape(9, c)
    np.testing.assert_allclose(rot, np.roll(base, 1, axis=1), rtol=1e-12)


def test_biwoof_scales_quadratically(rng):
    flow = FlowField(u=rng.normal(0, 2, (16, 16)),
                     v=rng.normal(0, 2, (16, 16)))
    cfg = BiwoofConfig(n_blocks=2, n_bins=8, local_weight="flow",
                       global_weight="strain")
    s = 2.5

    def feat(f):
        mag, ori = polar_decompose(f)
        return biwoof(ori, mag, strain_magnitude(f), cfg)

    base = feat(flow)
    scaled = feat(FlowField(u=s * flow.u, v=s * flow.v))
    np.testing.assert_allclose(scaled, s * s * base, rtol=1e-9)
    for blk in range(4):
        b = base[blk * 8:(blk + 1) * 8]
        sc = scaled[blk * 8:(blk + 1) * 8]
        if b.max() > 0:
            assert b.argmax() == sc.argmax()


def test_biwoof_matches_brute_force_all_modes(rng):
    ori, mag, strain = random_fields(rng, (13, 17))
    for local in WEIGHT_MODES:
        for glob in WEIGHT_MODES:
            cfg = BiwoofConfig(n_blocks=3, n_bins=5, local_weight=local,
                               global_weight=glob)
            got = biwoof(ori, mag, strain, cfg)
            want = brute_force_biwoof(ori, mag, strain, cfg)
            np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)


def test_biwoof_layout_row_major(rng):
    # magnitude confined to one block lights up exactly that block's slice
    ori = np.zeros((8, 8))
    mag = np.zeros((8, 8))
    mag[0:4, 4:8] = 1.0          # block row 0, block col 1
    strain = np.zeros((8, 8))
    cfg = BiwoofConfig(n_blocks=2, n_bins=4, local_weight="flow",
                       global_weight="none")
    out = biwoof(ori, mag, strain, cfg)
    blk = (0 * 2 + 1)
    assert out[blk * 4 + 2] == 16.0      # theta=0 -> bin C/2
    out[blk * 4 + 2] = 0.0
    np.testing.assert_array_equal(out, 0.0)


def test_biwoof_shape_mismatch():
    cfg = BiwoofConfig()
    with pytest.raises(ShapeError):
        biwoof(np.zeros((8, 8)), np.zeros((8, 9)), np.zeros((8, 8)), cfg)


# ------------------------------------------------------------------- lbp


def test_lbp_bin_counts():
    assert lbp_bin_count(LbpParams(n_points=8, uniform=True)) == 59
    assert lbp_bin_count(LbpParams(n_points=8, uniform=False)) == 256
    assert lbp_bin_count(LbpParams(n_points=4, uniform=True)) == 15


def test_lbp_constant_image_single_bin():
    frame = np.full((16, 16), 0.5)
    grid = block_partition(16, 16, 1)
    hist = lbp_histogram(frame, grid)
    assert hist.shape == (59,)
    # neighbor >= center holds everywhere -> all-ones code, the largest
    # uniform code, which owns the last named bin before the catch-all
    assert hist[57] == 196.0              # (16-2)^2 interior pixels
    assert hist.sum() == 196.0


def test_lbp_mass_is_interior_count(rng):
    frame = rng.uniform(0, 1, (20, 24))
    grid = block_partition(24, 20, 4)
    hist = lbp_histogram(frame, grid)
    assert hist.sum() == pytest.approx((20 - 2) * (24 - 2))


def test_lbp_mask_restricts_mass(rng):
    frame = rng.uniform(0, 1, (16, 16))
    grid = block_partition(16, 16, 1)
    mask = np.zeros((16, 16), dtype=bool)
    mask[4:8, 4:8] = True
    hist = lbp_histogram(frame, grid, mask=mask)
    assert hist.sum() == 16.0             # masked region sits inside margins


def test_lbp_rejects_tiny_frame():
    grid = block_partition(2, 2, 1)
    with pytest.raises(ShapeError):
        lbp_histogram(np.zeros((2, 2)), grid)


def test_lbp_rejects_grid_mismatch(rng):
    grid = block_partition(16, 16, 2)
    with pytest.raises(ShapeError):
        lbp_histogram(rng.uniform(0, 1, (16, 18)), grid)


# ------------------------------------------------------ difference image


def test_difference_identical_frames_matches_constant():
    frame = np.linspace(0, 1, 256).reshape(16, 16)
    grid = block_partition(16, 16, 1)
    got = lbp_difference_baseline(frame, frame, grid)
    want = lbp_histogram(np.full((16, 16), 0.5), grid)
    np.testing.assert_array_equal(got, want)


def test_difference_two_pass_oracle(rng):
    onset = rng.uniform(0, 1, (16, 16))
    probe = rng.uniform(0, 1, (16, 16))
    grid = block_partition(16, 16, 2)
    got = lbp_difference_baseline(onset, probe, grid)
    want = lbp_histogram((probe - onset + 1.0) / 2.0, grid)
    np.testing.assert_array_equal(got, want)


def test_difference_swap_reflects(rng):
    onset = rng.uniform(0, 1, (16, 16))
    probe = rng.uniform(0, 1, (16, 16))
    grid = block_partition(16, 16, 1)
    d = (probe - onset + 1.0) / 2.0
    got = lbp_difference_baseline(probe, onset, grid)
    np.testing.assert_array_equal(got, lbp_histogram(1.0 - d, grid))


def test_difference_shape_mismatch():
    grid = block_partition(16, 16, 1)
    with pytest.raises(ShapeError):
        lbp_difference_baseline(np.zeros((16, 16)), np.zeros((16, 17)), grid)


# --------------------------------------------------------------- lbp-top


def _video(frames):
    from biwoof.core import VideoSample
    return VideoSample(frames=np.asarray(frames, dtype=np.float64),
                       onset_idx=0, apex_idx=1, offset_idx=len(frames) - 1,
                       video_id="v", subject_id="s", label=0)


def test_lbp_top_length():
    rngl = np.random.default_rng(7)
    vid = _video(rngl.uniform(0, 1, (8, 12, 12)))
    grid = block_partition(12, 12, 1)
    assert lbp_top(vid, grid).shape == (177,)
    grid2 = block_partition(12, 12, 2)
    assert lbp_top(vid, grid2).shape == (4 * 177,)


def test_lbp_top_static_video_plane_masses():
    vid = _video(np.full((6, 10, 10), 0.25))
    grid = block_partition(10, 10, 1)
    out = lbp_top(vid, grid, radii=(1, 1, 2))
    # every plane sees constant slices -> all-ones codes in bin 57; each
    # plane's mass equals the shared valid-voxel count (6-4)*(10-2)*(10-2)
    for plane in range(3):
        assert out[plane * 59 + 57] == 128.0
    assert out.sum() == 3 * 128.0


def test_lbp_top_plane_masses_equal(rng):
    vid = _video(rng.uniform(0, 1, (7, 12, 12)))
    grid = block_partition(12, 12, 1)
    out = lbp_top(vid, grid, radii=(1, 1, 2)).reshape(3, 59)
    masses = out.sum(axis=1)
    assert masses[0] == masses[1] == masses[2] == (7 - 4) * 10 * 10


def test_lbp_top_rejects_short_video():
    vid = _video(np.zeros((4, 10, 10)))
    grid = block_partition(10, 10, 1)
    with pytest.raises(ShapeError):
        lbp_top(vid, grid, radii=(1, 1, 2))
