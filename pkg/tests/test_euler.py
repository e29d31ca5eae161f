import numpy as np
import pytest

from axieuler.fields import (
    EVEN,
    AxiField,
    NormSpec,
    divergence3,
    make_grid,
    vorticity,
    weighted_norm,
)
from axieuler.euler import (
    CflError,
    FlowState,
    SolverConfig,
    analytic_flow,
    kinetic_energy,
    recover_velocity,
    rhs,
    run,
    step,
)


def unit_grid(n):
    return make_grid(1.0, 0.0, 1.0, n, n)


# --------------------------------------------------------- recover_velocity

def manufactured_chi(grid):
    """chi for psi = r^2 (1-r)^2 sin(2 pi z) via the elliptic operator.

    With P(r) = r^2 (1-r)^2 and psi = P sin(kz):
    -r chi = d_r((1/r) d_r psi) + (1/r) d_zz psi
           = (P''/r - P'/r^2 - k^2 P / r) sin(kz)
    """
    rr, zz = grid.meshes()
    k = 2 * np.pi
    P = rr ** 2 * (1 - rr) ** 2
    Pp = 2 * rr * (1 - rr) * (1 - 2 * rr)
    Ppp = 2 * (1 - rr) * (1 - 2 * rr) - 2 * rr * (1 - 2 * rr) - 4 * rr * (1 - rr)
    chi = -(Ppp / rr - Pp / rr ** 2 - k ** 2 * P / rr) * np.sin(k * zz) / rr
    psi = P * np.sin(k * zz)
    return chi, psi


def test_recover_zero_source_rigid_swirl():
    g = unit_grid(32)
    chi = AxiField(g, np.zeros((32, 32)))
    gam = AxiField(g, np.tile(g.r[:, None] ** 2, (1, 32)))
    u, psi = recover_velocity(chi, gam, g)
    assert np.allclose(psi.values, 0.0, atol=1e-13)
    assert np.allclose(u.ur.values, 0.0, atol=1e-13)
    assert np.allclose(u.uz.values, 0.0, atol=1e-13)
    assert np.allclose(u.utheta.values, g.r_col, atol=1e-13)


def test_recover_zero_everything():
    g = unit_grid(16)
    z = AxiField(g, np.zeros((16, 16)))
    u, psi = recover_velocity(z, z, g)
    assert np.allclose(u.magnitude(), 0.0, atol=1e-14)


def test_recover_manufactured_second_order():
    errs = []
    for n in (32, 64, 128):
        g = unit_grid(n)
        chi, psi_exact = manufactured_chi(g)
        u, psi = recover_velocity(AxiField(g, chi), AxiField(g, np.zeros_like(chi)), g)
        errs.append(np.max(np.abs(psi.values - psi_exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.3)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.3)


def test_recover_velocity_divergence_free():
    g = unit_grid(48)
    rng = np.random.default_rng(11)
    chi = AxiField(g, rng.standard_normal((48, 48)))
    gam = AxiField(g, rng.standard_normal((48, 48)))
    u, _ = recover_velocity(chi, gam, g)
    assert divergence3(u).max_abs() < 1e-10


def test_recover_then_vorticity_consistency():
    # vorticity(recover(chi)) must return omega_theta = r chi at O(h^2);
    # tested on ring data supported away from axis and wall (one-sided
    # boundary stencils reduce the order in the outermost row only).
    errs = []
    for n in (64, 128, 256):
        g = unit_grid(n)
        st = analytic_flow("poloidal_ring", g, amplitude=1.0, r0=0.5,
                           z0=0.5, delta=0.25)
        _, wt, _ = vorticity(st.u)
        errs.append(np.max(np.abs(wt.values - g.r_col * st.chi.values)))
    assert errs[0] / errs[2] == pytest.approx(16.0, rel=0.45)


def test_impermeability_of_recovered_velocity():
    # u_r vanishes quadratically at the wall, so the linearly extrapolated
    # face value is O(dr^2 u''); assert that scaling.
    faces = []
    for n in (64, 128):
        g = unit_grid(n)
        chi, _ = manufactured_chi(g)
        u, _ = recover_velocity(AxiField(g, chi), AxiField(g, np.zeros_like(chi)), g)
        scale = np.abs(u.ur.values).max()
        faces.append(u.face_normal_velocity() / scale)
        assert faces[-1] <= 20 * g.dr ** 2
    assert faces[0] / faces[1] == pytest.approx(4.0, rel=0.6)


# ---------------------------------------------------------------------- rhs

def test_rhs_zero_flow_steady():
    g = unit_grid(16)
    st = analytic_flow("zero", g)
    dg, dc = rhs(st)
    assert np.allclose(dg, 0) and np.allclose(dc, 0)


def test_rhs_rigid_rotation_steady():
    g = unit_grid(32)
    st = analytic_flow("rigid_rotation", g, omega=1.0)
    dg, dc = rhs(st)
    assert np.max(np.abs(dg)) < 1e-12
    assert np.max(np.abs(dc)) < 1e-12


def test_rhs_source_matches_vorticity_form():
    # d_z(Gamma^2)/r^4 must agree with -2 omega_r u_theta / r^2 computed
    # via omega_r = -d_z u_theta, up to discretization error.
    errs = []
    for n in (48, 96):
        g = unit_grid(n)
        st = analytic_flow("gaussian_swirl_ring", g, amplitude=1.0,
                           r0=0.5, z0=0.5, delta=0.18)
        dgam, dchi = rhs(st)
        wr, _, _ = vorticity(st.u)
        alt = -2.0 * wr.values * st.u.utheta.values / g.r_col ** 2
        errs.append(np.max(np.abs(dchi - alt)))
    assert errs[0] / errs[1] > 3.0  # second-order agreement


def test_rhs_gaussian_ring_refinement_oracle():
    # Refine-and-compare: analytic source for the gaussian ring initial
    # state (u_pol = 0 so dchi is the source alone).
    def dchi_err(n):
        g = unit_grid(n)
        st = analytic_flow("gaussian_swirl_ring", g, amplitude=1.0,
                           r0=0.5, z0=0.5, delta=0.2)
        _, dchi = rhs(st)
        rr, zz = g.meshes()
        gam = rr ** 2 * np.exp(-((rr - 0.5) ** 2 + (zz - 0.5) ** 2) / 0.04)
        dz_gam2 = gam ** 2 * (-2 * 2 * (zz - 0.5) / 0.04)
        return np.max(np.abs(dchi - dz_gam2 / rr ** 4))

    e1, e2 = dchi_err(48), dchi_err(96)
    assert e1 / e2 == pytest.approx(4.0, rel=0.4)


# --------------------------------------------------------------------- step

def test_step_rigid_rotation_invariant():
    g = unit_grid(24)
    st = analytic_flow("rigid_rotation", g, omega=1.0)
    st2 = step(st, SolverConfig(), 0.05)
    assert np.max(np.abs(st2.gamma.values - st.gamma.values)) < 1e-12
    assert np.max(np.abs(st2.chi.values - st.chi.values)) < 1e-12


def test_step_zero_flow_identity():
    g = unit_grid(16)
    st = analytic_flow("zero", g)
    st2 = step(st, SolverConfig(), 0.1)
    assert np.allclose(st2.gamma.values, 0) and np.allclose(st2.chi.values, 0)


def test_step_cfl_rejection():
    g = unit_grid(16)
    st = analytic_flow("poloidal_ring", g, amplitude=50.0)
    with pytest.raises(CflError) as exc:
        step(st, SolverConfig(cfl=0.5), 1.0)
    assert "max|u|" in str(exc.value)


def test_step_fourth_order_in_time():
    # Step-doubling oracle against a dt/4 reference on a fixed grid.
    g = unit_grid(32)
    st0 = analytic_flow("poloidal_ring", g, amplitude=2.0, delta=0.2)
    cfg = SolverConfig(cfl=0.9)

    def advance(dt, nsteps):
        s = st0
        for _ in range(nsteps):
            s = step(s, cfg, dt)
        return s.chi.values

    dt = 4e-3
    ref = advance(dt / 4, 16)
    e1 = np.max(np.abs(advance(dt, 4) - ref))
    e2 = np.max(np.abs(advance(dt / 2, 8) - ref))
    # errors vs dt/4 reference: ratio ~ (16 - 1)/(16/16 - ...) ~ 16-ish
    assert e1 / e2 == pytest.approx(16.0, rel=0.35)


# ------------------------------------------------------------ analytic_flow

def test_analytic_flow_zero():
    g = unit_grid(16)
    st = analytic_flow("zero", g)
    assert np.allclose(st.u.magnitude(), 0)


def test_analytic_flow_rigid_rotation_vorticity():
    g = unit_grid(32)
    st = analytic_flow("rigid_rotation", g, omega=1.0)
    _, _, wz = vorticity(st.u)
    assert np.allclose(wz.values, 2.0, atol=1e-12)


def test_analytic_flow_unknown_name():
    with pytest.raises(ValueError):
        analytic_flow("nonsense", unit_grid(8))


def test_gaussian_ring_sup_norm_dense_sampling():
    # ||r u_theta||_inf against a dense sampling of the closed form.
    g = unit_grid(64)
    st = analytic_flow("gaussian_swirl_ring", g, amplitude=1.0, r0=0.5,
                       z0=0.5, delta=0.1)
    grid_max = weighted_norm(st.gamma, NormSpec(np.inf))
    r = np.linspace(0, 1, 2001)[:, None]
    z = np.linspace(0, 1, 2001)[None, :]
    dense = np.max(r ** 2 * np.exp(-((r - 0.5) ** 2 + (z - 0.5) ** 2) / 0.01))
    assert grid_max == pytest.approx(dense, rel=5e-3)


def test_poloidal_ring_compact_support():
    g = unit_grid(32)
    st = analytic_flow("poloidal_ring", g, amplitude=1.0, r0=0.5, z0=0.5,
                       delta=0.15)
    assert np.allclose(st.gamma.values, 0)
    chi = st.chi.values
    assert chi[0, :].max() == 0 and chi[-1, :].max() == 0
    assert chi.max() > 0


# ------------------------------------------------------------ conservation

def test_kinetic_energy_zero_and_rigid():
    g = unit_grid(64)
    assert kinetic_energy(analytic_flow("zero", g)) == 0.0
    e = kinetic_energy(analytic_flow("rigid_rotation", g, omega=1.0))
    assert e == pytest.approx(np.pi / 4, rel=1e-3)


def test_transport_invariance_short_run():
    # ||Gamma||_q, q in {1, 2, inf}, drifts by no more than scheme-order
    # tolerance on a short inviscid run.
    g = unit_grid(64)
    st = analytic_flow("gaussian_swirl_ring", g, amplitude=0.3, r0=0.5,
                       z0=0.5, delta=0.18)
    targets = {q: weighted_norm(st.gamma, NormSpec(q)) for q in (1.0, 2.0, np.inf)}
    end = run(st, SolverConfig(cfl=0.5), t_final=0.25, dt=2e-3)
    for q, ref in targets.items():
        drift = abs(weighted_norm(end.gamma, NormSpec(q)) - ref) / ref
        assert drift < 5e-4, (q, drift)


def test_energy_conservation_short_run():
    g = unit_grid(64)
    st = analytic_flow("gaussian_swirl_ring", g, amplitude=0.3, r0=0.5,
                       z0=0.5, delta=0.18)
    e0 = kinetic_energy(st)
    end = run(st, SolverConfig(cfl=0.5), t_final=0.25, dt=2e-3)
    assert abs(kinetic_energy(end) - e0) / e0 < 1e-5


def test_impermeability_along_run():
    g = unit_grid(48)
    st = analytic_flow("poloidal_ring", g, amplitude=1.0, delta=0.2)
    worst = [0.0]

    def cb(s):
        worst[0] = max(worst[0], s.u.face_normal_velocity())

    run(st, SolverConfig(cfl=0.5), t_final=0.1, dt=2e-3, callback=cb)
    umax = np.abs(st.u.ur.values).max()
    assert worst[0] < 50 * g.dr ** 2 * umax


def test_hyperviscosity_damps():
    g = unit_grid(48)
    st = analytic_flow("poloidal_ring", g, amplitude=2.0, delta=0.2)
    n0 = np.abs(st.chi.values).max()
    end_inv = run(st, SolverConfig(cfl=0.5), 0.05, 1e-3)
    end_visc = run(st, SolverConfig(cfl=0.5, hyperviscosity=1e-7), 0.05, 1e-3)
    assert np.abs(end_visc.chi.values).max() < np.abs(end_inv.chi.values).max()
    assert np.abs(end_visc.chi.values).max() < n0


def test_upwind3_transports_smoothly():
    # third-order upwind stays close to the centered solution on smooth
    # data over a short run
    g = unit_grid(48)
    st = analytic_flow("poloidal_ring", g, amplitude=3.0, delta=0.2)
    end_c = run(st, SolverConfig(cfl=0.5), 0.1, 2e-3)
    end_u = run(st, SolverConfig(cfl=0.5, advection_scheme="upwind3"),
                0.1, 2e-3)
    scale = np.abs(end_c.chi.values).max()
    assert np.abs(end_u.chi.values - end_c.chi.values).max() < 0.02 * scale


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(cfl=0.0)
    with pytest.raises(ValueError):
        SolverConfig(advection_scheme="upwind9")
    with pytest.raises(ValueError):
        SolverConfig(hyperviscosity=-1.0)
