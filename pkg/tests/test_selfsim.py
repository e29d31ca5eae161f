from fractions import Fraction

import numpy as np
import pytest

from axieuler.fields import AxiVectorField, make_grid
from axieuler.euler import analytic_flow
from axieuler.selfsim import (
    BlowupFit,
    ScalingParams,
    blowup_fit,
    curl_sup_rescaled,
    lambda_scaled,
    lambda_unscaled,
    profile_floor,
    rescale_snapshot,
    threshold_corollary,
    threshold_luo_hou,
)


def unit_grid(n=48):
    return make_grid(1.0, 0.0, 1.0, n, n)


# ---------------------------------------------------------------- thresholds

def test_threshold_corollary_exact():
    assert threshold_corollary(4) == 2
    assert threshold_corollary(np.inf) == 1
    assert threshold_corollary(1) == 5
    assert threshold_corollary(Fraction(8)) == Fraction(3, 2)


def test_threshold_luo_hou_exact():
    assert threshold_luo_hou(np.inf) == Fraction(2, 3)
    assert threshold_luo_hou(4) == Fraction(2, 5)
    assert threshold_luo_hou(8) == Fraction(1, 2)


def test_thresholds_reject_small_p():
    with pytest.raises(ValueError):
        threshold_corollary(0.5)
    with pytest.raises(ValueError):
        threshold_luo_hou(0)


def test_threshold_monotonicity():
    ps = [1, 1.5, 2, 3, 4, 8, 16, 64, np.inf]
    cor = [float(threshold_corollary(p)) for p in ps]
    lh = [float(threshold_luo_hou(p)) for p in ps]
    assert all(a > b for a, b in zip(cor, cor[1:]))
    assert all(a < b for a, b in zip(lh, lh[1:]))


def test_threshold_consistency_under_balance():
    # beta solving alpha/beta = 1 + 4/p with alpha + beta/2 = 1 equals the
    # balance threshold, exactly, for rational p.
    for p in [1, 2, 3, 4, 5, 8, 10, 16, 100, Fraction(7, 2)]:
        thr = threshold_corollary(p)          # 1 + 4/p
        beta = 1 / (thr + Fraction(1, 2))     # from alpha = 1 - beta/2
        assert beta == threshold_luo_hou(p)


# ------------------------------------------------------------ rescaling ops

def test_rescale_constant_field():
    g = unit_grid(32)
    ones = np.ones((32, 32))
    u = AxiVectorField.from_arrays(g, 0 * ones, 0 * ones, 3.0 * ones)
    params = ScalingParams(alpha=1.0, beta=0.5, t_star=1.0,
                           center_path=(0.5, 0.5))
    snap = rescale_snapshot(u, params, t=0.5, window=(-0.4, 0.4, -0.4, 0.4),
                            n=24)
    inner = snap.mask
    assert np.allclose(snap.uz[inner], 0.5 * 3.0, rtol=1e-12)


def test_rescale_small_beta_near_identity():
    g = unit_grid(48)
    st = analytic_flow("gaussian_swirl_ring", g, amplitude=1.0, delta=0.2)
    params = ScalingParams(alpha=0.0, beta=1e-6, t_star=1.0,
                           center_path=(0.5, 0.5))
    snap = rescale_snapshot(st.u, params, t=0.0,
                            window=(-0.3, 0.3, -0.3, 0.3), n=32)
    # (T*-t)^beta ~ 1: samples match the unscaled field at shifted points
    yy_r, yy_z = np.meshgrid(snap.y_r, snap.y_z, indexing="ij")
    direct = st.u.utheta.eval(0.5 + yy_r, 0.5 + yy_z)
    assert np.allclose(snap.utheta, direct, atol=1e-4)


def test_rescale_manufactured_self_similar_profile_static():
    # Build u from a fixed profile via the scaling formula (windows kept
    # inside the domain so z-periodic wrapping cannot alias the profile);
    # the recovered U must be t-independent up to interpolation error.
    g = unit_grid(96)
    params = ScalingParams(alpha=0.4, beta=0.7, t_star=2.0,
                           center_path=(0.5, 0.5))

    def state_at(t):
        ell = (params.t_star - t) ** params.beta
        amp = (params.t_star - t) ** (-params.alpha)
        rr, zz = g.meshes()
        prof = np.exp(-(((rr - 0.5) / (0.5 * ell)) ** 2
                        + ((zz - 0.5) / (0.5 * ell)) ** 2))
        return AxiVectorField.from_arrays(
            g, 0 * prof, 0 * prof, amp * prof)

    snaps = [rescale_snapshot(state_at(t), params, t,
                              window=(-0.4, 0.4, -0.4, 0.4), n=32)
             for t in (1.0, 1.25, 1.5)]
    for s in snaps[1:]:
        assert not s.partial
        assert np.allclose(s.uz, snaps[0].uz, atol=2e-3)


def test_rescale_out_of_window_masked():
    g = unit_grid(32)
    ones = np.ones((32, 32))
    u = AxiVectorField.from_arrays(g, 0 * ones, 0 * ones, ones)
    params = ScalingParams(alpha=0.0, beta=1.0, t_star=1.0,
                           center_path=(0.1, 0.5))
    snap = rescale_snapshot(u, params, t=0.0, window=(-1, 1, -1, 1), n=16)
    assert snap.partial
    assert not snap.mask.all()


def test_rescale_rejects_late_time():
    g = unit_grid(32)
    ones = np.ones((32, 32))
    u = AxiVectorField.from_arrays(g, 0 * ones, 0 * ones, ones)
    params = ScalingParams(alpha=0.0, beta=1.0, t_star=1.0)
    with pytest.raises(ValueError):
        rescale_snapshot(u, params, t=1.5)


# ------------------------------------------------------------ lambda_scaled

def test_lambda_scaled_zero_exponent():
    params = ScalingParams(alpha=1.0, beta=1.0, t_star=1.0, p=2.0)
    t = np.array([0.0, 0.25, 0.5])
    lam = np.ones(3)
    out = lambda_scaled(t, lam, params)
    assert np.allclose(out, 1.0)              # alpha - 2 beta / p = 0


def test_lambda_scaled_arithmetic():
    params = ScalingParams(alpha=2.0, beta=1.0, t_star=1.0, p=2.0)
    out = lambda_scaled(np.array([0.5]), np.array([1.0]), params)
    assert out[0] == pytest.approx(0.5)


def test_lambda_scaled_roundtrip():
    params = ScalingParams(alpha=1.7, beta=0.9, t_star=2.0, p=3.0)
    t = np.linspace(0, 1.5, 20)
    lam = np.exp(t)
    assert np.allclose(lambda_unscaled(t, lambda_scaled(t, lam, params),
                                       params), lam, rtol=1e-12)


# ------------------------------------------------------------ profile_floor

def test_profile_floor_zero():
    g = unit_grid(24)
    st = analytic_flow("zero", g)
    assert profile_floor([st.u, st.u]) == 0.0


def test_profile_floor_rigid_rotation():
    g = unit_grid(32)
    st = analytic_flow("rigid_rotation", g, omega=1.5)
    assert profile_floor([st.u, st.u, st.u]) == pytest.approx(3.0, rel=1e-10)


def test_profile_floor_manufactured_positive():
    # Poloidal profile (u_z only): its rescaled curl is metric-free, so
    # the curl sup of a manufactured self-similar run is t-independent
    # within interpolation error, and strictly positive.
    g = unit_grid(96)
    params = ScalingParams(alpha=0.5, beta=0.5, t_star=2.0,
                           center_path=(0.5, 0.5))

    def snap_at(t):
        ell = (params.t_star - t) ** params.beta
        amp = (params.t_star - t) ** (-params.alpha)
        rr, zz = g.meshes()
        prof = np.exp(-(((rr - 0.5) / (0.3 * ell)) ** 2
                        + ((zz - 0.5) / (0.3 * ell)) ** 2))
        u = AxiVectorField.from_arrays(g, 0 * prof, 0 * prof, amp * prof)
        return rescale_snapshot(u, params, t, window=(-0.4, 0.4, -0.4, 0.4),
                                n=48)

    snaps = [snap_at(t) for t in (1.0, 1.2, 1.4)]
    floor = profile_floor(snaps)
    sups = [curl_sup_rescaled(s) for s in snaps]
    assert floor > 0
    # t-independence of the profile curl within interpolation error
    assert max(sups) - min(sups) < 0.1 * max(sups)


# -------------------------------------------------------------- blowup_fit

def test_blowup_fit_synthetic_quadratic():
    t = np.linspace(0.0, 0.9, 40)
    y = (1.0 - t) ** -2
    fit = blowup_fit(t, y)
    assert fit.status == "ok"
    assert fit.t_star == pytest.approx(1.0, rel=1e-3)
    assert fit.rate == pytest.approx(2.0, rel=1e-3)


def test_blowup_fit_synthetic_three_halves():
    t = np.linspace(0.0, 1.6, 60)
    y = 3.0 * (2.0 - t) ** -1.5
    fit = blowup_fit(t, y)
    assert fit.status == "ok"
    assert fit.t_star == pytest.approx(2.0, rel=1e-3)
    assert fit.rate == pytest.approx(1.5, rel=1e-3)


def test_blowup_fit_constant_no_fit():
    t = np.linspace(0, 1, 20)
    fit = blowup_fit(t, np.ones(20))
    assert fit.status == "no_fit"


def test_blowup_fit_decreasing_tail_no_fit():
    t = np.linspace(0, 1, 20)
    y = 2.0 - t
    assert blowup_fit(t, y).status == "no_fit"
