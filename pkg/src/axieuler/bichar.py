"""
Bicharacteristic amplitude tracing along Lagrangian trajectories.

Along trajectories xdot = u of an axisymmetric flow, the short-wave
covector xi and amplitude b evolve by

    xidot = -(grad u)^T xi          (xi stays the gradient of the
                                     transported phase S, d_t S + u.grad S = 0)
    bdot  = -(grad u) b + 2 ((grad u) b . xi / |xi|^2) xi

with (grad u) the full cylindrical-component velocity gradient.  The sign
and transpose conventions are pinned by two requirements: xi = grad S for
the transported phase, and conservation of b . xi (the short-wave
incompressibility constraint); phase_transport_check enforces the first,
the conservation audits the second.

By axisymmetry the phase has no azimuthal dependence, so xi_theta = 0 is
invariant and xi is stored as the 2-vector (xi_r, xi_z); it evolves under
the negative transpose of the poloidal 2x2 Jacobian.  The amplitude b
keeps all three components and picks up the frame-rotation terms
(thetadot = u_theta / r) of the co-rotating cylindrical basis.

State layout for a batch of n trajectories:

    pos (n, 2), xi (n, 2), b (n, 3)
    plus optional co-evolved blocks: omega (n, 3) advanced by the forward
    stretching equation omegadot = (grad u) omega, a second/third amplitude
    pair for the volume invariant, and nu (n,), the running integral of the
    poloidal Jacobian norm, used for the |xi| lower-bound audit.

Conserved along every exact trajectory, for arbitrary (even unsteady,
non-Euler) provider fields:

    b . xi                      (algebraic identity of the system)
    xi . omega                  (duality of the xi and omega equations)
    (b' x b'') . xi             (needs trace(grad u) = 0, exact for all
                                 providers in this package)
    r b_theta                   (for swirl-free providers; with swirl it
                                 additionally needs xi . curl u = 0, which
                                 holds only along exact Euler solutions)

Measured drifts are therefore pure integrator error and converge at
fourth order in dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .fields import AxiEulerError
from .providers import R, TH, Z, VelocityProvider


class SingularCovectorError(AxiEulerError):
    """|xi| underflowed (analytically excluded by the exponential bound)."""


@dataclass(frozen=True)
class BicharState:
    """Single-trajectory snapshot: position, covector, amplitude."""
    t: float
    x: np.ndarray          # (r, z)
    xi: np.ndarray         # (xi_r, xi_z); xi_theta is identically absent
    b: np.ndarray          # (b_r, b_theta, b_z)

    @property
    def xi_theta(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Seed:
    """Trajectory seed: |xi0| = 1, b0 . xi0 = 0, |b0| = r0^sigma."""
    x0: np.ndarray
    xi0: np.ndarray
    b0: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float)
        xi0 = np.asarray(self.xi0, dtype=float)
        b0 = np.asarray(self.b0, dtype=float)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xi0", xi0)
        object.__setattr__(self, "b0", b0)
        if x0[0] <= 0:
            raise ValueError("seed radius must be positive")
        if abs(np.hypot(*xi0) - 1.0) > 1e-10:
            raise ValueError("xi0 must be a unit toroidal covector")
        if abs(b0[R] * xi0[0] + b0[Z] * xi0[1]) > 1e-10 * np.linalg.norm(b0):
            raise ValueError("b0 must be orthogonal to xi0")
        if abs(np.linalg.norm(b0) - x0[0] ** self.sigma) > 1e-8:
            raise ValueError("|b0| must equal r0^sigma")


def _derivatives(provider, t, pos, xi, b, omega=None, b2=None, b3=None,
                 with_nu=False):
    """Vectorized right-hand sides of the coupled trajectory system."""
    r, z = pos[:, 0], pos[:, 1]
    if np.any(r <= 0):
        raise SingularCovectorError("trajectory reached r <= 0")
    u = provider.velocity(t, r, z)
    J = provider.jacobian(t, r, z)
    dpos = np.stack([u[:, R], u[:, Z]], axis=1)

    # xi under the negative transpose of the poloidal block.
    dxi = np.empty_like(xi)
    dxi[:, 0] = -(J[:, R, R] * xi[:, 0] + J[:, Z, R] * xi[:, 1])
    dxi[:, 1] = -(J[:, R, Z] * xi[:, 0] + J[:, Z, Z] * xi[:, 1])

    thetadot = u[:, TH] / r

    def amplitude_rhs(bb):
        Jb = np.einsum("nij,nj->ni", J, bb)
        xi2 = xi[:, 0] ** 2 + xi[:, 1] ** 2
        if np.any(xi2 < 1e-300):
            raise SingularCovectorError("|xi| underflowed")
        proj = (xi[:, 0] * Jb[:, R] + xi[:, 1] * Jb[:, Z]) / xi2
        db = -Jb
        db[:, R] += thetadot * bb[:, TH] + 2 * proj * xi[:, 0]
        db[:, TH] += -thetadot * bb[:, R]
        db[:, Z] += 2 * proj * xi[:, 1]
        return db

    out = {"pos": dpos, "xi": dxi, "b": amplitude_rhs(b)}
    if omega is not None:
        Jw = np.einsum("nij,nj->ni", J, omega)
        dw = Jw.copy()
        dw[:, R] += thetadot * omega[:, TH]
        dw[:, TH] += -thetadot * omega[:, R]
        out["omega"] = dw
    if b2 is not None:
        out["b2"] = amplitude_rhs(b2)
    if b3 is not None:
        out["b3"] = amplitude_rhs(b3)
    if with_nu:
        # Spectral norm of the poloidal 2x2 block, closed form.
        a11, a12 = J[:, R, R], J[:, R, Z]
        a21, a22 = J[:, Z, R], J[:, Z, Z]
        fro = a11 ** 2 + a12 ** 2 + a21 ** 2 + a22 ** 2
        det = a11 * a22 - a12 * a21
        disc = np.sqrt(np.maximum(fro ** 2 - 4 * det ** 2, 0.0))
        out["nu"] = np.sqrt(np.maximum((fro + disc) / 2, 0.0))
    return out


def bichar_rhs(state: BicharState, provider: VelocityProvider):
    """Right-hand side of the (x, xi, b) system at a single state."""
    d = _derivatives(provider, state.t, state.x[None, :], state.xi[None, :],
                     state.b[None, :])
    return d["pos"][0], d["xi"][0], d["b"][0]


@dataclass
class Bundle:
    """Batch trajectory state plus co-evolved audit blocks."""
    t: float
    pos: np.ndarray
    xi: np.ndarray
    b: np.ndarray
    omega: np.ndarray | None = None
    b2: np.ndarray | None = None
    b3: np.ndarray | None = None
    nu: np.ndarray | None = None            # integral of |poloidal grad u|
    reflections: int = 0

    def copy(self):
        return Bundle(self.t, self.pos.copy(), self.xi.copy(), self.b.copy(),
                      None if self.omega is None else self.omega.copy(),
                      None if self.b2 is None else self.b2.copy(),
                      None if self.b3 is None else self.b3.copy(),
                      None if self.nu is None else self.nu.copy(),
                      self.reflections)


def _rk4_bundle_step(provider, bundle: Bundle, dt: float) -> Bundle:
    names = ["pos", "xi", "b"]
    opt = {k: getattr(bundle, k) for k in ("omega", "b2", "b3")}
    names += [k for k, v in opt.items() if v is not None]
    with_nu = bundle.nu is not None

    def rhs(t, vals):
        return _derivatives(provider, t, vals["pos"], vals["xi"], vals["b"],
                            omega=vals.get("omega"), b2=vals.get("b2"),
                            b3=vals.get("b3"), with_nu=with_nu)

    y0 = {k: getattr(bundle, k) for k in names}
    k1 = rhs(bundle.t, y0)
    y1 = {k: y0[k] + 0.5 * dt * k1[k] for k in names}
    k2 = rhs(bundle.t + 0.5 * dt, y1)
    y2 = {k: y0[k] + 0.5 * dt * k2[k] for k in names}
    k3 = rhs(bundle.t + 0.5 * dt, y2)
    y3 = {k: y0[k] + dt * k3[k] for k in names}
    k4 = rhs(bundle.t + dt, y3)
    new = bundle.copy()
    for k in names:
        setattr(new, k, y0[k] + dt / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]))
    if with_nu:
        new.nu = bundle.nu + dt / 6 * (k1["nu"] + 2 * k2["nu"]
                                       + 2 * k3["nu"] + k4["nu"])
    new.t = bundle.t + dt
    return new


def _apply_domain(bundle: Bundle, provider) -> Bundle:
    """Wrap z periodically; reflect radial excursions with an audit count.

    Exactly impermeable fields cannot leave through r = r_max, but
    interpolation may leak; reflections are counted, never silently
    applied.
    """
    g = provider.grid
    if g is None:
        return bundle
    bundle.pos[:, 1] = g.wrap_z(bundle.pos[:, 1])
    r = bundle.pos[:, 0]
    high = r > g.r_max
    if np.any(high):
        bundle.pos[high, 0] = 2 * g.r_max - r[high]
        bundle.reflections += int(high.sum())
    low = bundle.pos[:, 0] < g.dr * 1e-6
    if np.any(low):
        bundle.pos[low, 0] = np.abs(bundle.pos[low, 0]) + g.dr * 1e-6
        bundle.reflections += int(low.sum())
    return bundle


def make_bundle(seeds: list[Seed], t0: float = 0.0, provider=None,
                with_omega: bool = False, with_volume_frame: bool = False,
                with_nu: bool = True) -> Bundle:
    """Assemble a batch bundle from seeds.

    with_omega seeds the co-evolved vorticity from the provider's curl at
    the seed points; with_volume_frame adds the orthonormal amplitude pair
    (b', b'') completing xi0 to a frame, scaled by r0^sigma.
    """
    pos = np.array([s.x0 for s in seeds], dtype=float)
    xi = np.array([s.xi0 for s in seeds], dtype=float)
    b = np.array([s.b0 for s in seeds], dtype=float)
    omega = b2 = b3 = None
    if with_omega:
        if provider is None:
            raise ValueError("co-evolved vorticity needs a provider")
        omega = provider.vorticity_at(t0, pos[:, 0], pos[:, 1])
    if with_volume_frame:
        sig = np.array([s.sigma for s in seeds])
        scale = pos[:, 0] ** sig
        b2 = np.zeros((len(seeds), 3))
        b2[:, TH] = scale
        b3 = np.zeros((len(seeds), 3))
        b3[:, R] = -xi[:, 1] * scale
        b3[:, Z] = xi[:, 0] * scale
    nu = np.zeros(len(seeds)) if with_nu else None
    return Bundle(t0, pos, xi, b, omega, b2, b3, nu)


def integrate_bundle(bundle: Bundle, provider, T: float, dt: float,
                     record_every: int = 0, callback=None) -> list[Bundle]:
    """March the bundle to time T with RK4; returns recorded snapshots.

    record_every = k stores every k-th step (0: endpoints only).  Raises on
    CFL-like overstepping when the provider has a grid.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    provider.check_time(bundle.t, T)
    records = [bundle.copy()]
    nsteps = max(1, int(round((T - bundle.t) / dt)))
    h = (T - bundle.t) / nsteps
    g = provider.grid
    for i in range(nsteps):
        if g is not None:
            u = provider.velocity(bundle.t, bundle.pos[:, 0], bundle.pos[:, 1])
            speed = np.sqrt(u[:, R] ** 2 + u[:, Z] ** 2).max()
            if speed * abs(h) > min(g.dr, g.dz):
                raise AxiEulerError(
                    f"step rejected: |u| dt = {speed * abs(h):g} exceeds "
                    f"min(dr, dz) = {min(g.dr, g.dz):g}")
        bundle = _apply_domain(_rk4_bundle_step(provider, bundle, h), provider)
        if callback is not None:
            callback(bundle)
        if record_every and (i + 1) % record_every == 0 and i != nsteps - 1:
            records.append(bundle.copy())
    records.append(bundle.copy())
    return records


@dataclass(frozen=True)
class TrajectoryResult:
    """Recorded single-seed trajectory with conservation residuals."""
    states: list[BicharState]
    status: str
    reflections: int
    bdotxi_rel: float
    xi_lower_slack: float        # min of |xi| / (e^-nu |xi0|) - 1


def integrate_trajectory(seed: Seed, provider, t0: float, T: float,
                         dt: float, record_every: int = 1) -> TrajectoryResult:
    bundle = make_bundle([seed], t0=t0, with_nu=True)
    records = integrate_bundle(bundle, provider, T, dt,
                               record_every=record_every)
    states = [BicharState(rec.t, rec.pos[0].copy(), rec.xi[0].copy(),
                          rec.b[0].copy()) for rec in records]
    bdotxi = max(
        abs(rec.b[0, R] * rec.xi[0, 0] + rec.b[0, Z] * rec.xi[0, 1])
        / max(np.linalg.norm(rec.b[0]) * np.linalg.norm(rec.xi[0]), 1e-300)
        for rec in records)
    slack = min(
        np.linalg.norm(rec.xi[0]) / (np.exp(-rec.nu[0])
                                     * np.linalg.norm(records[0].xi[0]))
        for rec in records) - 1.0
    status = "ok" if records[-1].reflections == 0 else "reflected"
    return TrajectoryResult(states, status, records[-1].reflections,
                            bdotxi, slack)


# ---------------------------------------------------------------------------
# Ensembles and the amplitude growth factor.
# ---------------------------------------------------------------------------

def ensemble_seeds(grid, n_x: int, n_xi: int, sigma: float,
                   r_min_seed: float = 0.1, qmc_seed: int = 0,
                   z_span=None) -> list[Seed]:
    """Quasi-random seed positions (Halton), uniform covector angles, and
    both orthonormal amplitude frames per direction; |b0| = r0^sigma."""
    if n_x < 1 or n_xi < 1:
        raise ValueError("ensemble must be non-empty")
    sampler = qmc.Halton(d=2, scramble=True, seed=qmc_seed)
    pts = sampler.random(n_x)
    r_lo, r_hi = r_min_seed, grid.r_max * (1 - 1e-3)
    z_lo, z_hi = (grid.z_min, grid.z_max) if z_span is None else z_span
    seeds = []
    for (fr, fz) in pts:
        r0 = r_lo + fr * (r_hi - r_lo)
        z0 = z_lo + fz * (z_hi - z_lo)
        scale = r0 ** sigma
        for j in range(n_xi):
            ang = np.pi * j / n_xi        # covector directions mod sign
            xi0 = np.array([np.cos(ang), np.sin(ang)])
            b_th = np.array([0.0, scale, 0.0])
            b_pl = np.array([-xi0[1] * scale, 0.0, xi0[0] * scale])
            seeds.append(Seed(np.array([r0, z0]), xi0, b_th, sigma))
            seeds.append(Seed(np.array([r0, z0]), xi0, b_pl, sigma))
    return seeds


@dataclass(frozen=True)
class BetaResult:
    """Ensemble lower estimate of the amplitude growth factor.

    series is the pointwise-in-time ensemble max; running is its running
    supremum over the growing interval [t0, t], which is non-decreasing by
    construction (the pointwise value can genuinely dip once |xi| growth
    lets both transverse directions contract).
    """
    value: float
    times: np.ndarray
    series: np.ndarray
    running: np.ndarray
    argmax_seed: Seed
    argmax_position: np.ndarray
    reflections: int
    n_seeds: int


def beta_sigma(seeds: list[Seed], provider, sigma: float, T: float,
               dt: float = 1e-3, t0: float = 0.0,
               record_every: int = 10) -> BetaResult:
    """max over seeds of r_T^-sigma |b_T|, with the running time series.

    A finite ensemble certifies a lower bound of the true supremum; the
    arg-max seed and its end position are reported so callers can see
    whether the supremum is interior or axis/boundary dominated.
    """
    if not seeds:
        raise ValueError("empty ensemble")
    if any(abs(s.sigma - sigma) > 1e-12 for s in seeds):
        raise ValueError("seed sigma does not match requested sigma")
    bundle = make_bundle(seeds, t0=t0, with_nu=False)
    records = integrate_bundle(bundle, provider, T, dt,
                               record_every=record_every)
    times = np.array([rec.t for rec in records])
    series = np.empty(len(records))
    for i, rec in enumerate(records):
        w = rec.pos[:, 0] ** (-sigma) * np.linalg.norm(rec.b, axis=1)
        series[i] = w.max()
    last = records[-1]
    w_end = last.pos[:, 0] ** (-sigma) * np.linalg.norm(last.b, axis=1)
    k = int(np.argmax(w_end))
    return BetaResult(float(w_end[k]), times, series,
                      np.maximum.accumulate(series), seeds[k],
                      last.pos[k].copy(), last.reflections, len(seeds))


# ---------------------------------------------------------------------------
# Conservation audit.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConservationReport:
    """Per-identity relative drift over [t0, T]."""
    drifts: dict
    details: dict = field(default_factory=dict)

    def worst(self) -> float:
        return max(self.drifts.values())


def _rel_drift(series: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(series - series[0])) / max(abs(scale), 1e-300))


def conserved_audit(records: list[Bundle]) -> ConservationReport:
    """Relative drifts of the invariants carried by the recorded bundle.

    Requires the co-evolved objects each identity needs: b . xi is always
    available; xi . omega needs the omega block; the volume invariant needs
    the (b', b'') pair; r b_theta is meaningful for seeds with b0 along
    e_theta (checked by the caller).
    """
    drifts = {}
    details = {}
    first = records[0]
    n = first.pos.shape[0]

    bdotxi = np.array([rec.b[:, R] * rec.xi[:, 0] + rec.b[:, Z] * rec.xi[:, 1]
                       for rec in records])
    scale = np.linalg.norm(first.b, axis=1) * np.linalg.norm(first.xi, axis=1)
    drifts["b_dot_xi"] = float(np.max(np.abs(bdotxi - bdotxi[0])
                                      / np.maximum(scale, 1e-300)))

    if first.omega is not None:
        xw = np.array([rec.xi[:, 0] * rec.omega[:, R]
                       + rec.xi[:, 1] * rec.omega[:, Z] for rec in records])
        sc = np.maximum(np.linalg.norm(first.xi, axis=1)
                        * np.linalg.norm(first.omega, axis=1), 1e-300)
        drifts["xi_dot_omega"] = float(np.max(np.abs(xw - xw[0]) / sc))
        details["xi_dot_omega_initial"] = xw[0]

    if first.b2 is not None and first.b3 is not None:
        vol = np.array([np.sum(np.cross(rec.b2, rec.b3)
                               * np.stack([rec.xi[:, 0], np.zeros(n),
                                           rec.xi[:, 1]], axis=1), axis=1)
                        for rec in records])
        sc = np.maximum(np.abs(vol[0]), 1e-300)
        drifts["volume_frame"] = float(np.max(np.abs(vol - vol[0]) / sc))

    rbt = np.array([rec.pos[:, 0] * rec.b[:, TH] for rec in records])
    sc = np.maximum(np.abs(rbt[0]), 1e-300)
    drifts["r_b_theta"] = float(np.max(np.abs(rbt - rbt[0]) / sc))

    if first.nu is not None:
        slack = np.array([
            np.linalg.norm(rec.xi, axis=1)
            / (np.exp(-rec.nu) * np.linalg.norm(first.xi, axis=1))
            for rec in records])
        details["xi_lower_slack"] = float(slack.min() - 1.0)
    return ConservationReport(drifts, details)


# ---------------------------------------------------------------------------
# Phase-transport cross check.
# ---------------------------------------------------------------------------

def phase_transport_check(provider, xi0, t0: float, T: float, dt: float,
                          grid=None, margin: float = 0.15) -> float:
    """Transport the phase S (with S0 = x . xi0) on the grid, compare its
    gradient at time T with xi trajectories seeded on interior nodes.

    The non-periodic part of S is split off: S = x . xi0 + S_p with
    d_t S_p + u . grad S_p = -u_pol . xi0, keeping every transported field
    periodic.  Returns the max relative discrepancy |grad S - xi| / |xi|
    over seeds launched in the interior window (a margin from axis, wall).
    """
    from .fields import AxiField, EVEN, ddz_values, ddr_values

    g = grid if grid is not None else provider.grid
    if g is None:
        raise ValueError("phase transport needs a grid")
    xi0 = np.asarray(xi0, dtype=float)
    rr, zz = g.meshes()
    sp = np.zeros((g.nr, g.nz))

    def rhs_sp(t, s):
        u = provider.velocity(t, rr.ravel(), zz.ravel()).reshape(g.nr, g.nz, 3)
        ds = -(u[..., R] * (ddr_values(s, EVEN, g.dr, one_sided_axis=True)
                            + xi0[0])
               + u[..., Z] * (ddz_values(s, g.dz) + xi0[1]))
        return ds

    nsteps = max(1, int(round((T - t0) / dt)))
    h = (T - t0) / nsteps
    t = t0
    for _ in range(nsteps):
        k1 = rhs_sp(t, sp)
        k2 = rhs_sp(t + h / 2, sp + h / 2 * k1)
        k3 = rhs_sp(t + h / 2, sp + h / 2 * k2)
        k4 = rhs_sp(t + h, sp + h * k3)
        sp = sp + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h

    gr = ddr_values(sp, EVEN, g.dr, one_sided_axis=True) + xi0[0]
    gz = ddz_values(sp, g.dz) + xi0[1]
    gr_f = AxiField(g, gr, parity=EVEN)
    gz_f = AxiField(g, gz, parity=EVEN)

    # Seeds on interior nodes, integrated with the same provider.
    sel_r = (g.r > g.r_max * margin) & (g.r < g.r_max * (1 - margin))
    idx_r = np.where(sel_r)[0][::4]
    idx_z = np.arange(0, g.nz, 4)
    seeds = [Seed(np.array([g.r[i], g.z[j]]), xi0 / np.hypot(*xi0),
                  np.array([0.0, 1.0, 0.0]))
             for i in idx_r for j in idx_z]
    bundle = make_bundle(seeds, t0=t0, with_nu=False)
    recs = integrate_bundle(bundle, provider, T, dt)
    end = recs[-1]
    scale = np.hypot(*xi0)
    gr_at = gr_f.eval(end.pos[:, 0], end.pos[:, 1])
    gz_at = gz_f.eval(end.pos[:, 0], end.pos[:, 1])
    # Trajectory xi corresponds to unit xi0; rescale to match.
    err = np.hypot(gr_at - end.xi[:, 0] * scale,
                   gz_at - end.xi[:, 1] * scale)
    ximag = np.hypot(end.xi[:, 0], end.xi[:, 1]) * scale
    return float(np.max(err / np.maximum(ximag, 1e-300)))
