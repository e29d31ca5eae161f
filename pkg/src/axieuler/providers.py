"""
Velocity providers: callables giving u(t, x) and grad u(t, x) at arbitrary
points, either from closed forms or from time-interpolated solver snapshots.

All providers are parameterized by the Stokes stream function psi and the
circulation Gamma = r u_theta:

    u_r = -psi_z / r,   u_z = psi_r / r,   u_theta = Gamma / r.

The velocity gradient is assembled in cylindrical orthonormal components,

          [ d_r u_r    -u_t/r    d_z u_r ]
    J  =  [ d_r u_t     u_r/r    d_z u_t ]
          [ d_r u_z       0      d_z u_z ]

whose trace is the 3-D divergence.  Because every entry is expressed
through partial derivatives of the same psi (mixed partials commute),
the trace cancels *algebraically*:

    J_rr + J_tt + J_zz = (psi_z/r^2 - psi_rz/r) - psi_z/r^2 + psi_rz/r = 0.

Snapshot-backed providers therefore interpolate psi and Gamma (bicubic
splines on a parity/periodicity-padded extension) and differentiate the
interpolant, rather than interpolating velocity samples: the interpolated
field is exactly divergence-free at every evaluation point, which the
amplitude-tracing conservation audits rely on.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .fields import AxiEulerError, AxiGrid
from .euler import FlowState

# Component order used for all 3-vectors and Jacobians: (r, theta, z).
R, TH, Z = 0, 1, 2


class CoverageError(AxiEulerError):
    """The provider does not cover the requested time interval."""


class VelocityProvider:
    """Base class; subclasses implement psi/Gamma partials at points.

    The contract consumed by the tracing and linearized solvers:

    velocity(t, r, z)  -> (n, 3) array of (u_r, u_theta, u_z)
    jacobian(t, r, z)  -> (n, 3, 3) cylindrical-component velocity gradient,
                          consistent with velocity within the declared
                          interpolation error and exactly trace-free
    vorticity_at(...)  -> (n, 3) curl components from the same derivatives
    """

    t_min: float = 0.0
    t_max: float = np.inf
    grid: AxiGrid | None = None
    steady: bool = True          # overridden by time-interpolated providers

    def _partials(self, t, r, z):
        """(psi, psi_r, psi_z, psi_rr, psi_rz, psi_zz, gam, gam_r, gam_z)."""
        raise NotImplementedError

    def check_time(self, t0: float, t1: float):
        lo, hi = min(t0, t1), max(t0, t1)
        if lo < self.t_min - 1e-12 or hi > self.t_max + 1e-12:
            raise CoverageError(
                f"provider covers [{self.t_min}, {self.t_max}], "
                f"requested [{lo}, {hi}]")

    def velocity(self, t, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        _, psi_r, psi_z, _, _, _, gam, _, _ = self._partials(t, r, z)
        u = np.empty(r.shape + (3,))
        u[..., R] = -psi_z / r
        u[..., TH] = gam / r
        u[..., Z] = psi_r / r
        return u

    def jacobian(self, t, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        (_, psi_r, psi_z, psi_rr, psi_rz, psi_zz,
         gam, gam_r, gam_z) = self._partials(t, r, z)
        J = np.zeros(r.shape + (3, 3))
        J[..., R, R] = psi_z / r ** 2 - psi_rz / r
        J[..., R, TH] = -gam / r ** 2
        J[..., R, Z] = -psi_zz / r
        J[..., TH, R] = gam_r / r - gam / r ** 2
        J[..., TH, TH] = -psi_z / r ** 2            # u_r / r
        J[..., TH, Z] = gam_z / r
        J[..., Z, R] = psi_rr / r - psi_r / r ** 2
        J[..., Z, Z] = psi_rz / r
        return J

    def vorticity_at(self, t, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        (_, psi_r, psi_z, psi_rr, psi_rz, psi_zz,
         gam, gam_r, gam_z) = self._partials(t, r, z)
        w = np.empty(r.shape + (3,))
        w[..., R] = -gam_z / r                                   # -d_z u_t
        w[..., TH] = -psi_zz / r - (psi_rr / r - psi_r / r ** 2)
        w[..., Z] = gam_r / r                                    # d_r u_t + u_t/r
        return w

    def sup_grad_norm(self, t, n_sample: int = 96) -> float:
        """Spectral-norm sup of grad u over the domain at time t, estimated
        on a sample lattice (exact enough for audit bounds)."""
        if self.grid is not None:
            r = self.grid.r
            z = self.grid.z
        else:
            r = np.linspace(1e-3, 1.0, n_sample)
            z = np.linspace(0.0, 1.0, n_sample)
        rr, zz = np.meshgrid(r, z, indexing="ij")
        J = self.jacobian(t, rr.ravel(), zz.ravel())
        return float(np.linalg.matrix_norm(J, ord=2).max())

    def grid_fields(self, t, grid: AxiGrid):
        """(u components, Jacobian) sampled on a grid mesh; subclasses with
        native grid storage may override with a faster path."""
        rr, zz = grid.meshes()
        u = self.velocity(t, rr.ravel(), zz.ravel()).reshape(
            grid.nr, grid.nz, 3)
        J = self.jacobian(t, rr.ravel(), zz.ravel()).reshape(
            grid.nr, grid.nz, 3, 3)
        return (u[..., R], u[..., TH], u[..., Z]), J


class ZeroFlow(VelocityProvider):
    def __init__(self, grid: AxiGrid | None = None):
        self.grid = grid

    def _partials(self, t, r, z):
        zer = np.zeros_like(np.asarray(r, dtype=float))
        return (zer,) * 9

    def sup_grad_norm(self, t, n_sample: int = 0) -> float:
        return 0.0


class RigidRotation(VelocityProvider):
    """u_theta = omega r: an isometric steady Euler flow (Gamma = omega r^2)."""

    def __init__(self, omega: float = 1.0, grid: AxiGrid | None = None):
        self.omega = omega
        self.grid = grid

    def _partials(self, t, r, z):
        r = np.asarray(r, dtype=float)
        zer = np.zeros_like(r)
        gam = self.omega * r ** 2
        gam_r = 2 * self.omega * r
        return (zer, zer, zer, zer, zer, zer, gam, gam_r, zer)

    def sup_grad_norm(self, t, n_sample: int = 0) -> float:
        return abs(self.omega)


class ManufacturedFlow(VelocityProvider):
    """Closed-form provider with poloidal and optional swirl components.

    psi   = a_pol * P(r) sin(k z),  Gamma = a_swirl * P(r) cos(k z),
    P(r)  = r^2 (r_max - r)^2.

    The poloidal part vanishes on the wall and the axis; all partials are
    exact, so conservation audits on this provider see integrator error
    only.
    """

    def __init__(self, a_pol: float = 1.0, a_swirl: float = 0.0,
                 r_max: float = 1.0, z_period: float = 1.0, mode: int = 1,
                 grid: AxiGrid | None = None):
        self.a_pol = a_pol
        self.a_swirl = a_swirl
        self.r_max = r_max
        self.k = 2 * np.pi * mode / z_period
        self.grid = grid

    def _P(self, r):
        rm = self.r_max
        P = r ** 2 * (rm - r) ** 2
        Pp = 2 * r * (rm - r) * (rm - 2 * r)
        Ppp = 2 * ((rm - r) * (rm - 2 * r) - r * (rm - 2 * r)
                   - 2 * r * (rm - r))
        return P, Pp, Ppp

    def _partials(self, t, r, z):
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        k = self.k
        P, Pp, _ = self._P(r)
        s, c = np.sin(k * z), np.cos(k * z)
        psi = self.a_pol * P * s
        psi_r = self.a_pol * Pp * s
        psi_z = self.a_pol * P * k * c
        _, _, Ppp = self._P(r)
        psi_rr = self.a_pol * Ppp * s
        psi_rz = self.a_pol * Pp * k * c
        psi_zz = -self.a_pol * P * k ** 2 * s
        gam = self.a_swirl * P * c
        gam_r = self.a_swirl * Pp * c
        gam_z = -self.a_swirl * P * k * s
        return psi, psi_r, psi_z, psi_rr, psi_rz, psi_zz, gam, gam_r, gam_z


class _SplinePair:
    """Padded bicubic splines of (psi, Gamma) for one snapshot."""

    def __init__(self, state: FlowState, pad: int = 4):
        g = state.grid
        nr, nz = g.nr, g.nz
        r_ext = np.concatenate([-g.r[pad - 1::-1], g.r,
                                2 * g.r_max - g.r[:-pad - 1:-1]])
        z_ext = np.concatenate([g.z[-pad:] - g.z_period, g.z,
                                g.z[:pad] + g.z_period])

        def extend(values, axis_parity, wall_parity):
            v = np.empty((nr + 2 * pad, nz + 2 * pad))
            core = np.empty((nr + 2 * pad, nz))
            core[pad:pad + nr] = values
            core[:pad] = axis_parity * values[pad - 1::-1]
            core[pad + nr:] = wall_parity * values[:-pad - 1:-1]
            v[:, pad:pad + nz] = core
            v[:, :pad] = core[:, -pad:]
            v[:, pad + nz:] = core[:, :pad]
            return v

        # psi is even across the axis and odd-reflected about the wall face
        # (enforcing psi = 0 there); Gamma is even at both.
        psi_ext = extend(state.psi.values, +1, -1)
        gam_ext = extend(state.gamma.values, +1, +1)
        self.psi = RectBivariateSpline(r_ext, z_ext, psi_ext, kx=3, ky=3)
        self.gam = RectBivariateSpline(r_ext, z_ext, gam_ext, kx=3, ky=3)

    def partials(self, r, z):
        ev = lambda sp, dx, dy: sp(r, z, dx=dx, dy=dy, grid=False)
        return (ev(self.psi, 0, 0), ev(self.psi, 1, 0), ev(self.psi, 0, 1),
                ev(self.psi, 2, 0), ev(self.psi, 1, 1), ev(self.psi, 0, 2),
                ev(self.gam, 0, 0), ev(self.gam, 1, 0), ev(self.gam, 0, 1))


class SnapshotProvider(VelocityProvider):
    """Time-interpolated provider over a sequence of FlowState snapshots.

    Linear interpolation in time of the spline coefficients preserves the
    exact pointwise divergence-free property (linear combinations of
    divergence-free fields).  A single snapshot gives a frozen field.
    """

    def __init__(self, states: list[FlowState]):
        if not states:
            raise ValueError("need at least one snapshot")
        states = sorted(states, key=lambda s: s.t)
        self.states = states
        self.grid = states[0].grid
        self.times = np.array([s.t for s in states])
        if len(states) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        self.t_min = float(self.times[0])
        self.t_max = float(self.times[-1]) if len(states) > 1 else np.inf
        self.steady = len(states) == 1
        self._splines: dict[int, _SplinePair] = {}

    @classmethod
    def frozen(cls, state: FlowState) -> "SnapshotProvider":
        return cls([state])

    def _pair(self, i: int) -> _SplinePair:
        if i not in self._splines:
            self._splines[i] = _SplinePair(self.states[i])
        return self._splines[i]

    def _bracket(self, t):
        if len(self.states) == 1:
            return 0, 0, 0.0
        if t < self.t_min - 1e-9 or t > self.t_max + 1e-9:
            raise CoverageError(
                f"t={t:g} outside snapshot range [{self.t_min}, {self.t_max}]")
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1,
                        0, len(self.states) - 2))
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return i, i + 1, float(np.clip(w, 0.0, 1.0))

    def _partials(self, t, r, z):
        r = np.asarray(r, dtype=float)
        z = self.grid.wrap_z(z)
        i, j, w = self._bracket(t)
        a = self._pair(i).partials(r, z)
        if w == 0.0:
            return a
        b = self._pair(j).partials(r, z)
        return tuple((1 - w) * x + w * y for x, y in zip(a, b))

    def grid_fields(self, t, grid: AxiGrid):
        """Fast native-grid sampling: time-lerped prognostic arrays with
        canonical-stencil derivatives (trace-free by the same mixed-partial
        cancellation as the spline path)."""
        if grid != self.grid:
            return super().grid_fields(t, grid)
        from .fields import EVEN, ODD, ddr_values, ddz_values
        i, j, w = self._bracket(t)
        si, sj = self.states[i], self.states[j]
        psi = (1 - w) * si.psi.values + w * sj.psi.values
        gam = (1 - w) * si.gamma.values + w * sj.gamma.values
        r = grid.r_col
        psi_r = ddr_values(psi, EVEN, grid.dr)
        psi_z = ddz_values(psi, grid.dz)
        psi_rr = ddr_values(psi_r, ODD, grid.dr)
        psi_rz = ddr_values(psi_z, EVEN, grid.dr)
        psi_zz = ddz_values(psi_z, grid.dz)
        gam_r = ddr_values(gam, EVEN, grid.dr)
        gam_z = ddz_values(gam, grid.dz)
        ur = -psi_z / r
        ut = gam / r
        uz = psi_r / r
        J = np.zeros((grid.nr, grid.nz, 3, 3))
        J[..., R, R] = psi_z / r ** 2 - psi_rz / r
        J[..., R, TH] = -gam / r ** 2
        J[..., R, Z] = -psi_zz / r
        J[..., TH, R] = gam_r / r - gam / r ** 2
        J[..., TH, TH] = -psi_z / r ** 2
        J[..., TH, Z] = gam_z / r
        J[..., Z, R] = psi_rr / r - psi_r / r ** 2
        J[..., Z, Z] = psi_rz / r
        return (ur, ut, uz), J


def check_jacobian_consistency(provider: VelocityProvider, t: float,
                               points: np.ndarray, h: float = 1e-5) -> float:
    """Max abs difference between the provider's Jacobian and a central
    finite difference of its velocity (the declared-consistency audit)."""
    r, z = points[:, 0], points[:, 1]
    J = provider.jacobian(t, r, z)
    u_t = provider.velocity(t, r, z)[:, TH]
    worst = 0.0
    for j, (dr_, dz_) in ((R, (h, 0.0)), (Z, (0.0, h))):
        up = provider.velocity(t, r + dr_, z + dz_)
        um = provider.velocity(t, r - dr_, z - dz_)
        fd = (up - um) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - J[:, :, j]))))
    # Curvature column: J[., R, TH] = -u_t / r and J[., TH, TH] = u_r / r.
    worst = max(worst, float(np.max(np.abs(
        J[:, R, TH] + u_t / r))))
    return worst
