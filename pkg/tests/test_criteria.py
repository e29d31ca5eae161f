from fractions import Fraction

import numpy as np
import pytest

from axieuler.fields import AxiField, EVEN, ODD, make_grid, vorticity
from axieuler.euler import SolverConfig, analytic_flow, run
from axieuler.providers import SnapshotProvider, ZeroFlow, RigidRotation
from axieuler.bichar import ensemble_seeds
from axieuler.criteria import (
    CriterionLedger,
    CriterionParams,
    accumulate,
    amplification_audit,
    bkm_toroidal_integrand,
    generalized_integrand,
    hardy_check,
    omega_theta_bound_audit,
)


def unit_grid(n=32):
    return make_grid(1.0, 0.0, 1.0, n, n)


# ------------------------------------------------------------------ params

def test_params_matching_theorem_hypothesis():
    p = CriterionParams(a=0.5, b=0.5)
    assert p.theta == pytest.approx(1.0)
    assert p.theta_exact() == Fraction(1)
    assert p.q_bound_exact() == Fraction(6, 5)


def test_params_reject_large_a():
    with pytest.raises(ValueError):
        CriterionParams(a=2.5, b=0.0)
    with pytest.raises(ValueError):
        CriterionParams(a=3.0, b=0.0, s=7.0)


def test_params_reject_small_sum():
    with pytest.raises(ValueError):
        CriterionParams(a=0.25, b=0.25)


def test_params_reject_q_above_bound():
    with pytest.raises(ValueError) as err:
        CriterionParams(a=0.5, b=0.5, q=1.3)
    assert "6/5" in str(err.value) or "1.2" in str(err.value)
    CriterionParams(a=0.5, b=0.5, q=1.1)


def test_params_regularity_window():
    with pytest.raises(ValueError):
        CriterionParams(a=1.4, b=0.2, s=3.0)  # a beyond s - 5/2 = 0.5
    CriterionParams(a=1.4, b=0.2, s=4.1)


def test_theta_whole_space_variant():
    p = CriterionParams(a=0.5, b=0.5)
    assert p.theta_whole_space == pytest.approx(p.theta)


# -------------------------------------------------------------- integrands

def test_bkm_zero():
    g = unit_grid(16)
    z = AxiField(g, np.zeros((16, 16)), parity=ODD)
    assert bkm_toroidal_integrand(z, AxiField(g, np.zeros((16, 16)))) == 0.0


def test_bkm_closed_form():
    # w_r = 0, w_z = r on the unit cylinder: max|w| = max r, and
    # (max r^{-1/2} |w|)^2 = max r -> total close to 2 at the outermost
    # sample r = 1 - dr/2.
    g = unit_grid(64)
    wz = AxiField(g, np.tile(g.r[:, None], (1, 64)), parity=EVEN)
    z = AxiField(g, np.zeros((64, 64)), parity=ODD)
    val = bkm_toroidal_integrand(z, wz)
    rmax = g.r[-1]
    assert val == pytest.approx(rmax + rmax, rel=1e-12)


def test_bkm_matches_dense_sampling_under_refinement():
    def value(n):
        g = unit_grid(n)
        st = analytic_flow("gaussian_swirl_ring", g, amplitude=1.0,
                           r0=0.5, z0=0.5, delta=0.2)
        wr, _, wz = vorticity(st.u)
        return bkm_toroidal_integrand(wr, wz)

    v1, v2, v3 = value(32), value(64), value(128)
    assert abs(v2 - v3) < abs(v1 - v3)
    assert abs(v2 - v3) / v3 < 0.05


def test_generalized_weights_cancel():
    g = unit_grid(32)
    params = CriterionParams(a=0.5, b=0.5)
    c = 1.7
    wr = AxiField(g, c * np.tile(g.r[:, None] ** 0.5, (1, 32)), parity=ODD)
    wz = AxiField(g, c * np.tile(g.r[:, None] ** 0.5, (1, 32)), parity=EVEN)
    ir, iz = generalized_integrand(wr, wz, params)
    assert ir == pytest.approx(c ** 2, rel=1e-12)   # theta = 1 -> power 2
    assert iz == pytest.approx(c ** 2, rel=1e-12)


def test_integrand_homogeneity():
    g = unit_grid(24)
    rng = np.random.default_rng(0)
    wr = AxiField(g, rng.standard_normal((24, 24)), parity=ODD)
    wz = AxiField(g, rng.standard_normal((24, 24)), parity=EVEN)
    params = CriterionParams(a=1.0, b=0.5)
    ir1, iz1 = generalized_integrand(wr, wz, params)
    ir2, iz2 = generalized_integrand(3.0 * wr, 3.0 * wz, params)
    d = 1 + params.theta
    assert ir2 == pytest.approx(3 ** d * ir1, rel=1e-12)
    assert iz2 == pytest.approx(3 ** d * iz1, rel=1e-12)


# -------------------------------------------------------------- accumulate

def test_accumulate_constant_exact():
    led = CriterionLedger()
    for i, t in enumerate(np.linspace(0, 2, 21)):
        led = accumulate(led, t, 3.0)
    assert led.running[-1] == pytest.approx(6.0, abs=1e-12)


def test_accumulate_linear_exact():
    led = CriterionLedger()
    ts = np.linspace(0, 1, 11)
    for t in ts:
        led = accumulate(led, t, 2.0 * t)
    assert led.running[-1] == pytest.approx(1.0, abs=1e-12)


def test_accumulate_zero():
    led = accumulate(accumulate(CriterionLedger(), 0.0, 0.0), 1.0, 0.0)
    assert led.running[-1] == 0.0


def test_accumulate_rejects_nonmonotone():
    led = accumulate(CriterionLedger(), 1.0, 1.0)
    with pytest.raises(ValueError):
        accumulate(led, 0.5, 1.0)


def test_accumulate_additive_over_concatenation():
    rng = np.random.default_rng(1)
    ts = np.sort(rng.uniform(0, 1, 15))
    vals = rng.uniform(0, 5, 15)
    full = CriterionLedger()
    for t, v in zip(ts, vals):
        full = accumulate(full, t, v)
    # split at index 7 and continue: running totals must agree
    first = CriterionLedger()
    for t, v in zip(ts[:8], vals[:8]):
        first = accumulate(first, t, v)
    second = first
    for t, v in zip(ts[8:], vals[8:]):
        second = accumulate(second, t, v)
    assert second.running[-1] == pytest.approx(full.running[-1], abs=1e-12)


# ------------------------------------------------------------- hardy_check

def manufactured_swirl(grid, k=2, decay=2.0, seed=None):
    """u_theta = r^decay (1-r)^2 trig(z), vanishing fast at the axis, with
    the analytic omega_z = (1/r) d_r(r u_theta)."""
    rng = np.random.default_rng(seed)
    rr, zz = grid.meshes()
    c1 = rng.uniform(0.5, 1.5) if seed is not None else 1.0
    phase = rng.uniform(0, 2 * np.pi) if seed is not None else 0.0
    f = np.sin(2 * np.pi * k * zz + phase)
    ut = c1 * rr ** decay * (1 - rr) ** 2 * f
    # d_r (r u_t) = c1 [ (decay+1) r^decay (1-r)^2 - 2 r^(decay+1) (1-r) ] f
    drut = c1 * ((decay + 1) * rr ** decay * (1 - rr) ** 2
                 - 2 * rr ** (decay + 1) * (1 - rr)) * f
    return (AxiField(grid, ut, parity=ODD),
            AxiField(grid, drut / rr, parity=EVEN))


def test_hardy_holds_on_clean_fixture():
    g = unit_grid(128)
    ut, wz = manufactured_swirl(g, decay=2.0)
    rep = hardy_check(ut, wz, b=1.0, p=2.0)
    assert rep.constant == pytest.approx(1.0)
    assert rep.hypothesis_ok
    assert not rep.flagged
    assert rep.ratio <= rep.constant * 1.02


def test_hardy_rejects_forbidden_b():
    g = unit_grid(32)
    ut, wz = manufactured_swirl(g)
    with pytest.raises(ValueError):
        hardy_check(ut, wz, b=0.0, p=2.0)     # b = 2/p - 1


def test_hardy_flags_hypothesis_violation():
    # u_theta = r with b = 1, p = inf: the weighted swirl is 1/r, finite on
    # the grid but divergent under refinement; the checker must flag it.
    g = unit_grid(64)
    ut = AxiField(g, np.tile(g.r[:, None], (1, 64)), parity=ODD)
    wz = AxiField(g, np.full((64, 64), 2.0), parity=EVEN)
    rep = hardy_check(ut, wz, b=1.0, p=np.inf)
    assert not rep.hypothesis_ok
    assert rep.flagged
    assert "diverges" in rep.note


def test_hardy_ratio_tolerance_shrinks_under_refinement():
    devs = []
    for n in (48, 96, 192):
        g = unit_grid(n)
        ut, wz = manufactured_swirl(g, decay=2.0)
        rep = hardy_check(ut, wz, b=1.0, p=2.0)
        devs.append(rep.ratio)
    # ratio converges: successive differences shrink by ~4 (second order)
    d1, d2 = abs(devs[0] - devs[2]), abs(devs[1] - devs[2])
    assert d2 < 0.6 * d1 or d1 < 1e-6


# --------------------------------------------------- omega_theta bound

def make_swirl_run(n=48, T=0.2, amp=0.6, seed=0, delta=0.18):
    rng = np.random.default_rng(seed)
    g = unit_grid(n)
    st = analytic_flow("gaussian_swirl_ring", g,
                       amplitude=amp * rng.uniform(0.8, 1.2),
                       r0=rng.uniform(0.45, 0.55), z0=rng.uniform(0.4, 0.6),
                       delta=delta)
    history = [st]
    dt = 0.25 * min(g.dr, g.dz) / max(0.3, amp)
    cfg = SolverConfig(cfl=0.9)
    history_cb = history.append
    run(st, cfg, T, dt, callback=lambda s: history_cb(s) if s.t > st.t else None)
    return history


def test_bound_om_zero_flow():
    g = unit_grid(24)
    st = analytic_flow("zero", g)
    rep = omega_theta_bound_audit([st, st], CriterionParams(0.5, 0.5), 2.0)
    assert rep.holds
    assert rep.lhs == 0.0


def test_bound_om_swirl_free_is_conservation():
    # omega_r = 0 run (z-independent swirl): the source integrand vanishes
    # and the audit reduces to conservation of ||omega_theta / r||_p.
    g = unit_grid(32)
    st = analytic_flow("rigid_rotation", g, omega=1.0)
    rep = omega_theta_bound_audit([st, st], CriterionParams(0.5, 0.5), 2.0)
    assert rep.integral == pytest.approx(0.0, abs=1e-12)
    assert rep.holds


def test_bound_om_swirl_ring_run():
    history = make_swirl_run(n=48, T=0.15, amp=0.5, seed=3)
    rep = omega_theta_bound_audit(history, CriterionParams(0.5, 0.5), 2.0)
    assert rep.holds
    assert rep.slack >= 0
    assert rep.constant == pytest.approx(4.0)   # 2/|b+1-2/p| at b=1/2, p=2


# ------------------------------------------------------ amplification

def test_amplification_zero_flow_equality():
    g = unit_grid(24)
    st = analytic_flow("poloidal_ring", g, amplitude=0.5, delta=0.2)
    prov = ZeroFlow(g)
    seeds = ensemble_seeds(g, n_x=6, n_xi=2, sigma=0.0)
    rep = amplification_audit([st, st], prov, a=0.5, sigma=0.0, T=0.2,
                              seeds=seeds, dt=5e-3)
    assert rep.beta == pytest.approx(1.0, abs=1e-10)
    assert rep.lhs == pytest.approx(rep.rhs_proof, rel=1e-9)
    assert rep.holds


def test_amplification_rigid_rotation_equality_persists():
    g = unit_grid(32)
    st = analytic_flow("rigid_rotation", g, omega=1.0)
    prov = RigidRotation(1.0, grid=g)
    seeds = ensemble_seeds(g, n_x=6, n_xi=2, sigma=0.0)
    rep = amplification_audit([st, st], prov, a=0.5, sigma=0.0, T=0.3,
                              seeds=seeds, dt=5e-3)
    assert rep.beta == pytest.approx(1.0, abs=1e-6)
    assert rep.holds
