"""
Linearized axisymmetric Euler solver and semigroup growth estimation.

The perturbation v about a base flow u evolves by

    d_t v + u . grad v + v . grad u + grad Q = f,   div v = 0,  v.n = 0,

advanced with RK4 plus a projection onto the discretely divergence-free
subspace after every stage.

The projector removes a discrete gradient: it solves the *composed*
system  div_h(grad_h Q) = div_h(w)  per z-Fourier mode, where div_h and
grad_h are this package's canonical centered stencils.  Solving the
composed operator (banded direct solves, pseudo-inverse on the two modes
the centered z-difference annihilates, one iterative-refinement pass)
makes the output divergence zero to rounding and the projection exactly
idempotent; at interior rows the composed operator is the negative
weighted adjoint of the gradient, so the projection is orthogonal in the
solid-cylinder L^2 inner product up to boundary-closure rows.

Short-wave initial data:  v = Re[ eps curl( (b x xi / |xi|^2) phi e^{iS/eps} ) ]
is exactly divergence-free by the curl construction and equals
Re[ i phi b e^{iS/eps} ] + O(eps), which is what makes the amplitude
growth of traced trajectories visible to the linearized semigroup.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .fields import (
    EVEN,
    ODD,
    AxiEulerError,
    AxiField,
    AxiGrid,
    AxiVectorField,
    NormSpec,
    ddr_values,
    ddz_values,
    divergence3,
    weighted_norm,
)
from .providers import R, TH, Z, VelocityProvider


class DegeneratePhaseError(AxiEulerError):
    """|xi| vanished inside the bump support."""


# ---------------------------------------------------------------------------
# Leray projection.
# ---------------------------------------------------------------------------

def _ddr_matrix(nr: int, dr: float, parity: int) -> np.ndarray:
    """Dense matrix of the canonical radial derivative (for the composed
    projector operator; small: nr x nr per grid)."""
    D = np.zeros((nr, nr))
    for j in range(1, nr - 1):
        D[j, j - 1] = -1 / (2 * dr)
        D[j, j + 1] = 1 / (2 * dr)
    D[0, 1] = 1 / (2 * dr)
    D[0, 0] = -parity / (2 * dr)
    D[nr - 1, nr - 1] = 3 / (2 * dr)
    D[nr - 1, nr - 2] = -4 / (2 * dr)
    D[nr - 1, nr - 3] = 1 / (2 * dr)
    return D


class LerayProjector:
    """Cached per-grid solver for w -> w - grad Q with div_h-exact output.

    For modes with nonzero centered-d_z symbol the composed operator is
    solved directly (banded LU plus one refinement pass).  The z-mean and
    z-Nyquist modes, which the centered difference annihilates, are
    projected in closed form: their divergence-free radial content is
    exactly span{1/r}, and the component along it is picked out by the
    left-null functional of the radial derivative, which simultaneously
    kills discrete gradients exactly and keeps the map idempotent and
    bounded.
    """

    _BANDS = (3, 2)

    def __init__(self, grid: AxiGrid):
        self.grid = grid
        nr, dr = grid.nr, grid.dr
        r = grid.r
        De = _ddr_matrix(nr, dr, EVEN)
        # Radial part of div_h(grad_h .): (1/r) D (r D .), both derivatives
        # on even-parity data (Q and r dQ/dr are even).
        T_r = (1 / r)[:, None] * (De @ (r[:, None] * De))
        k = 2 * np.pi * np.fft.rfftfreq(grid.nz, d=grid.dz)
        kappa = np.sin(k * grid.dz) / grid.dz   # exact symbol of centered d_z
        self.kappa = kappa
        nm = kappa.size
        self._banded = {}
        self._A_dense = {}
        self._null_modes = []
        l, u = self._BANDS
        for m in range(nm):
            if kappa[m] == 0.0:
                self._null_modes.append(m)
                continue
            A = T_r - kappa[m] ** 2 * np.eye(nr)
            ab = np.zeros((l + u + 1, nr))
            for i in range(nr):
                for j in range(max(0, i - l), min(nr, i + u + 1)):
                    ab[u + i - j, j] = A[i, j]
            self._banded[m] = ab
            self._A_dense[m] = A
        self._A_long: dict[int, np.ndarray] = {}
        # Left-null functional of De (rank nr-1) and the 1/r direction.
        U, s, Vt = np.linalg.svd(De)
        self._ell = U[:, -1]
        self._inv_r = 1.0 / r
        self._ell_inv_r = float(self._ell @ self._inv_r)

    def _solve_modes(self, rhs_hat: np.ndarray) -> np.ndarray:
        """Solve A_m q_m = rhs_m for kappa != 0, with iterative refinement.

        The composed operator is mildly non-normal; plain float64
        refinement stagnates at eps * cond, so modes that fail to reach
        the target get one extended-precision residual pass.  This keeps
        the post-projection divergence and the idempotence defect at the
        rounding floor.
        """
        nm, nr = rhs_hat.shape
        q = np.zeros_like(rhs_hat)
        for m in self._banded:
            A = self._A_dense[m]
            q[m] = solve_banded(self._BANDS, self._banded[m], rhs_hat[m])
            scale = max(np.abs(rhs_hat[m]).max(), 1e-300)
            for _ in range(2):
                res = rhs_hat[m] - A @ q[m]
                if np.abs(res).max() < 1e-15 * scale:
                    break
                q[m] += solve_banded(self._BANDS, self._banded[m], res)
            res = rhs_hat[m] - A @ q[m]
            if np.abs(res).max() > 1e-14 * scale:
                if m not in self._A_long:
                    self._A_long[m] = A.astype(np.longdouble)
                res_l = (rhs_hat[m].astype(np.clongdouble)
                         - self._A_long[m] @ q[m].astype(np.clongdouble))
                q[m] += solve_banded(self._BANDS, self._banded[m],
                                     res_l.astype(complex))
        return q

    def _fix_null_modes(self, ur: np.ndarray) -> np.ndarray:
        """Closed-form projection of the kappa = 0 modes of u_r onto their
        divergence-free subspace span{1/r}."""
        ur_hat = np.fft.rfft(ur, axis=1)
        for m in self._null_modes:
            c = (self._ell @ ur_hat[:, m]) / self._ell_inv_r
            ur_hat[:, m] = c * self._inv_r
        return np.fft.irfft(ur_hat, n=self.grid.nz, axis=1)

    def project(self, w: AxiVectorField) -> AxiVectorField:
        g = self.grid
        ur, uz = w.ur.values.copy(), w.uz.values.copy()
        scale = max(np.abs(ur).max(), np.abs(uz).max(), 1e-300)
        # Remove the gradient part, then refine against the physical-space
        # divergence so FFT and stencil roundoff cannot accumulate.
        for _ in range(3):
            div = (ddr_values(g.r_col * ur, EVEN, g.dr) / g.r_col
                   + ddz_values(uz, g.dz))
            if np.abs(div).max() < 1e-14 * scale / g.dr:
                break
            q_hat = self._solve_modes(np.fft.rfft(div, axis=1).T)
            q = np.fft.irfft(q_hat.T, n=g.nz, axis=1)
            ur -= ddr_values(q, EVEN, g.dr)
            uz -= ddz_values(q, g.dz)
            ur = self._fix_null_modes(ur)
        return AxiVectorField.from_arrays(g, ur, w.utheta.values, uz)


_PROJ_CACHE: dict[tuple, LerayProjector] = {}


def leray_projector(grid: AxiGrid) -> LerayProjector:
    key = (grid.r_max, grid.z_min, grid.z_max, grid.nr, grid.nz)
    if key not in _PROJ_CACHE:
        _PROJ_CACHE[key] = LerayProjector(grid)
    return _PROJ_CACHE[key]


def leray_project(w: AxiVectorField) -> AxiVectorField:
    """w minus the discrete gradient part; swirl passes through."""
    return leray_projector(w.grid).project(w)


# ---------------------------------------------------------------------------
# Linearized evolution.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationState:
    t: float
    v: AxiVectorField

    @property
    def grid(self) -> AxiGrid:
        return self.v.grid


def _linear_rhs(t, v_r, v_t, v_z, base_u, base_J, grid, f=None):
    """-(u . grad) v - (v . grad) u + f in cylindrical components."""
    ur, ut, uz = base_u
    adv_r = (ur * ddr_values(v_r, ODD, grid.dr)
             + uz * ddz_values(v_r, grid.dz) - ut * v_t / grid.r_col)
    adv_t = (ur * ddr_values(v_t, ODD, grid.dr)
             + uz * ddz_values(v_t, grid.dz) + ut * v_r / grid.r_col)
    adv_z = (ur * ddr_values(v_z, EVEN, grid.dr)
             + uz * ddz_values(v_z, grid.dz))
    # (v . grad) u from the base Jacobian columns plus curvature couplings.
    str_r = v_r * base_J[..., R, R] + v_z * base_J[..., R, Z] \
        + v_t * base_J[..., R, TH]
    str_t = v_r * base_J[..., TH, R] + v_z * base_J[..., TH, Z] \
        + v_t * base_J[..., TH, TH]
    str_z = v_r * base_J[..., Z, R] + v_z * base_J[..., Z, Z]
    out_r = -adv_r - str_r
    out_t = -adv_t - str_t
    out_z = -adv_z - str_z
    if f is not None:
        out_r = out_r + f[0]
        out_t = out_t + f[1]
        out_z = out_z + f[2]
    return out_r, out_t, out_z


def _base_fields(provider: VelocityProvider, t: float, grid: AxiGrid):
    return provider.grid_fields(t, grid)


def linear_step(state: PerturbationState, base: VelocityProvider,
                f, dt: float, cfl: float = 0.9) -> PerturbationState:
    """One RK4 step with per-stage projection.

    f is None or a callable t -> (f_r, f_t, f_z) arrays on the grid.
    """
    g = state.grid
    proj = leray_projector(g)
    base_u0, base_J0 = _base_fields(base, state.t, g)
    speed = np.sqrt(base_u0[0] ** 2 + base_u0[2] ** 2).max()
    if speed > 0 and dt > cfl * min(g.dr, g.dz) / speed:
        raise AxiEulerError(
            f"dt={dt:g} violates the base-flow CFL (max|u|={speed:g})")

    half = state.t + dt / 2
    full = state.t + dt
    if base.steady:
        base_mid = base_end = (base_u0, base_J0)
    else:
        base_mid = _base_fields(base, half, g)
        base_end = _base_fields(base, full, g)

    def eval_f(t):
        return f(t) if callable(f) else f

    def rhs(t, vr, vt, vz, bu, bJ):
        dr_, dt_, dz_ = _linear_rhs(t, vr, vt, vz, bu, bJ, g, eval_f(t))
        w = proj.project(AxiVectorField.from_arrays(g, dr_, dt_, dz_))
        return w.ur.values, w.utheta.values, w.uz.values

    v0 = (state.v.ur.values, state.v.utheta.values, state.v.uz.values)
    k1 = rhs(state.t, *v0, base_u0, base_J0)
    k2 = rhs(half, *(v0[i] + dt / 2 * k1[i] for i in range(3)), *base_mid)
    k3 = rhs(half, *(v0[i] + dt / 2 * k2[i] for i in range(3)), *base_mid)
    k4 = rhs(full, *(v0[i] + dt * k3[i] for i in range(3)), *base_end)
    vn = [v0[i] + dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])
          for i in range(3)]
    v = proj.project(AxiVectorField.from_arrays(g, *vn))
    return PerturbationState(state.t + dt, v)


def evolve_perturbation(v0: AxiVectorField, base: VelocityProvider,
                        T: float, dt: float, f=None, t0: float = 0.0,
                        callback=None) -> PerturbationState:
    state = PerturbationState(t0, leray_project(v0))
    if callback is not None:
        callback(state)
    while state.t < T - 1e-12:
        h = min(dt, T - state.t)
        state = linear_step(state, base, f, h)
        if callback is not None:
            callback(state)
    return state


# ---------------------------------------------------------------------------
# Short-wave (WKB) initial data.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WkbData:
    """Phase/amplitude/bump data for one short-wave initial field.

    b is a 3-component amplitude field, xi the 2-component phase gradient,
    S the phase, phi a bump supported in an annulus away from the axis and
    wall, normalized so that ||phi||_{L^p} = 1 under norm_spec.
    """
    eps: float
    b: tuple[np.ndarray, np.ndarray, np.ndarray]
    xi: tuple[np.ndarray, np.ndarray]
    S: np.ndarray
    phi: np.ndarray
    norm_spec: NormSpec

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")


def polynomial_bump(grid: AxiGrid, center: tuple[float, float],
                    delta: float) -> np.ndarray:
    """Smooth compactly supported bump (1 - s^2)^4 on the disc of radius
    delta about the center, in toroidal coordinates."""
    rr, zz = grid.meshes()
    dzp = grid.z_period
    dz = (zz - center[1] + dzp / 2) % dzp - dzp / 2
    s2 = ((rr - center[0]) ** 2 + dz ** 2) / delta ** 2
    return np.where(s2 < 1, (1 - np.minimum(s2, 1.0)) ** 4, 0.0)


def make_wkb_data(grid: AxiGrid, center, xi0, b_dir, sigma: float,
                  eps: float, delta: float, norm_spec: NormSpec) -> WkbData:
    """Initial-time short-wave data from a seed frame.

    The amplitude field is r^sigma b_dir (constant direction, the seed
    normalization |b| = r^sigma), the phase S = x . xi0, and the bump is
    centered on the seed with radius delta, kept strictly inside the
    domain and away from the axis.
    """
    xi0 = np.asarray(xi0, dtype=float)
    b_dir = np.asarray(b_dir, dtype=float)
    if abs(b_dir[R] * xi0[0] + b_dir[Z] * xi0[1]) > 1e-10:
        raise ValueError("b_dir must be orthogonal to xi0")
    r0 = center[0]
    if r0 - delta <= grid.dr or r0 + delta >= grid.r_max - grid.dr:
        raise ValueError("bump support must avoid the axis and the wall")
    rr, zz = grid.meshes()
    phi = polynomial_bump(grid, center, delta)
    nrm = weighted_norm(AxiField(grid, phi), norm_spec)
    phi = phi / nrm
    scale = rr ** sigma
    b = (b_dir[R] * scale, b_dir[TH] * scale, b_dir[Z] * scale)
    xi = (np.full_like(rr, xi0[0]), np.full_like(rr, xi0[1]))
    S = rr * xi0[0] + zz * xi0[1]
    return WkbData(eps, b, xi, S, phi, norm_spec)


def build_wkb(data: WkbData, grid: AxiGrid) -> AxiVectorField:
    """Re[ eps curl( (b x xi/|xi|^2) phi e^{iS/eps} ) ], discretely
    divergence-free by the curl construction; vanishes outside supp phi."""
    br, bt, bz = data.b
    xir, xiz = data.xi
    xi2 = xir ** 2 + xiz ** 2
    support = data.phi > 0
    if np.any(xi2[support] < 1e-12):
        raise DegeneratePhaseError("|xi| vanished inside the bump support")
    xi2 = np.maximum(xi2, 1e-300)
    # w = b x xi with xi_theta = 0: (b_t xi_z, b_z xi_r - b_r xi_z, -b_t xi_r)
    wr = bt * xiz / xi2
    wt = (bz * xir - br * xiz) / xi2
    wz = -bt * xir / xi2
    phase = np.exp(1j * data.S / data.eps) * data.phi
    Fr, Ft, Fz = wr * phase, wt * phase, wz * phase
    # Cylindrical curl of the complex field F.
    cr = -ddz_values(Ft, grid.dz)
    ct = ddz_values(Fr, grid.dz) - ddr_values(Fz, EVEN, grid.dr)
    cz = ddr_values(grid.r_col * Ft, EVEN, grid.dr) / grid.r_col
    return AxiVectorField.from_arrays(grid,
                                      np.real(data.eps * cr),
                                      np.real(data.eps * ct),
                                      np.real(data.eps * cz))


def wkb_leading_term(data: WkbData, grid: AxiGrid) -> AxiVectorField:
    """Re[ i phi b e^{iS/eps} ], the conservative short-wave profile."""
    br, bt, bz = data.b
    phase = 1j * data.phi * np.exp(1j * data.S / data.eps)
    return AxiVectorField.from_arrays(grid, np.real(br * phase),
                                      np.real(bt * phase),
                                      np.real(bz * phase))


def wkb_residual_norm(data: WkbData, grid: AxiGrid) -> float:
    """|| v_eps - Re(i phi b e^{iS/eps}) ||, expected O(eps)."""
    v = build_wkb(data, grid)
    lead = wkb_leading_term(data, grid)
    diff = AxiVectorField.from_arrays(
        grid, v.ur.values - lead.ur.values,
        v.utheta.values - lead.utheta.values,
        v.uz.values - lead.uz.values)
    return weighted_norm(diff, data.norm_spec)


# ---------------------------------------------------------------------------
# Semigroup growth estimation and the weighted stability audit.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthSeries:
    times: np.ndarray
    norms: np.ndarray

    @property
    def ratio(self) -> float:
        return float(self.norms[-1] / self.norms[0])


@dataclass(frozen=True)
class LambdaResult:
    """Certified lower estimate of the semigroup growth ratio at T."""
    value: float
    members: list[GrowthSeries]
    is_lower_estimate: bool = True

    def series(self) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise max of member growth ratios on the common time grid."""
        t = self.members[0].times
        ratios = np.stack([m.norms / m.norms[0] for m in self.members])
        return t, ratios.max(axis=0)


def lambda_estimate(base: VelocityProvider, spec: NormSpec,
                    initial_set: list[AxiVectorField], T: float,
                    dt: float, t0: float = 0.0,
                    record_every: int = 1) -> LambdaResult:
    """Max over initial data of the weighted-norm growth ratio at T.

    Any finite set under-estimates the true supremum over all admissible
    data; the result is flagged as a lower estimate.
    """
    if not np.isinf(spec.p) and not spec.sigma_in_growth_window():
        raise ValueError(
            f"sigma={spec.sigma} outside (-2/p', 2/p) for p={spec.p}")
    if not initial_set:
        raise ValueError("initial_set must be non-empty")
    members = []
    for v0 in initial_set:
        n0 = weighted_norm(v0, spec)
        if n0 == 0:
            raise ValueError("zero-norm initial datum")
        times, norms = [], []

        def cb(st, _times=times, _norms=norms):
            _times.append(st.t)
            _norms.append(weighted_norm(st.v, spec))

        evolve_perturbation(v0, base, T, dt, t0=t0, callback=cb)
        members.append(GrowthSeries(np.array(times), np.array(norms)))
    return LambdaResult(max(m.ratio for m in members), members)


def stability_bound_audit(base: VelocityProvider, spec: NormSpec,
                          v0: AxiVectorField, f, T: float, dt: float) -> dict:
    """Audit the forced weighted stability bound with the computable proxy
    exponent U_hat = integral of (1 + |alpha|) sup|grad u| dt, alpha the
    weight exponent of the norm (weight r^alpha corresponds to
    alpha = -sigma of the NormSpec).

    Reports max measured ||r^alpha v(t)|| against
    e^{U_hat} (||r^alpha v0|| + int ||r^alpha f|| dt); one-sided only: the
    proxy replaces an inaccessible smooth-norm integral.
    """
    alpha = -spec.sigma
    g = v0.grid
    norms, times, fnorm_series = [], [], []

    def cb(st):
        times.append(st.t)
        norms.append(weighted_norm(st.v, spec))
        if f is not None:
            ft = f(st.t) if callable(f) else f
            fv = AxiVectorField.from_arrays(g, *ft)
            fnorm_series.append(weighted_norm(fv, spec))
        else:
            fnorm_series.append(0.0)

    evolve_perturbation(v0, base, T, dt, f=f, callback=cb)
    times = np.array(times)
    grad_sup = np.array([base.sup_grad_norm(t) for t in times])
    u_hat = np.trapezoid((1 + abs(alpha)) * grad_sup, times)
    f_int = np.trapezoid(np.array(fnorm_series), times)
    bound = np.exp(u_hat) * (norms[0] + f_int)
    measured = max(norms)
    return {
        "measured_max": float(measured),
        "bound": float(bound),
        "u_hat": float(u_hat),
        "forcing_integral": float(f_int),
        "initial_norm": float(norms[0]),
        "holds": bool(measured <= bound * (1 + 1e-9)),
        "slack": float(bound - measured),
    }
