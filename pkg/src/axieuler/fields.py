"""
Axisymmetric (r, z) grid, scalar/vector fields, and discrete calculus.

Geometry: a cylinder of radius ``r_max``, periodic in z with period
``z_max - z_min``.  Radial samples are cell-centered, ``r_j = (j + 1/2) dr``,
so no sample sits on the coordinate axis and weights ``r**-sigma`` or
quotients like ``u_theta / r`` stay finite at every sample.

Axis behavior is encoded by parity reflection across r = 0: radial and
azimuthal vector components are odd functions of r, axial components and
scalars are even.  Discrete operators are second order: centered
differences in the interior, parity ghost cells across the axis, periodic
wrap in z, and one-sided stencils on the outer radial row.

Norms follow two measure conventions:

* ``three_d``  - the solid cylinder measure 2*pi*r dr dz
* ``toroidal`` - the flat (r, z) measure dr dz
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

EVEN = 1
ODD = -1

_PARITY_NAMES = {EVEN: "even", ODD: "odd"}


class AxiEulerError(Exception):
    """Base class for errors raised by this package."""


class OutOfDomainError(AxiEulerError):
    """A requested sample point lies outside the radial domain."""


@dataclass(frozen=True)
class AxiGrid:
    """Cell-centered (r, z) grid on a periodic cylinder.

    Radial samples sit at ``r_j = (j + 1/2) dr`` (``axis_offset`` is a
    structural fact of this grid, recorded here for file headers).  The
    index ``nz`` wraps to 0 in z.
    """

    r_max: float
    z_min: float
    z_max: float
    nr: int
    nz: int
    axis_offset: bool = True

    @property
    def dr(self) -> float:
        return self.r_max / self.nr

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / self.nz

    @property
    def z_period(self) -> float:
        return self.z_max - self.z_min

    @cached_property
    def r(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.dr

    @cached_property
    def z(self) -> np.ndarray:
        return self.z_min + np.arange(self.nz) * self.dz

    @cached_property
    def r_col(self) -> np.ndarray:
        """Radial coordinates broadcast over (nr, nz) arrays."""
        return self.r[:, None]

    def meshes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.z, indexing="ij")

    def cell_volume(self) -> float:
        return self.dr * self.dz

    def wrap_z(self, z):
        return self.z_min + np.mod(np.asarray(z, dtype=float) - self.z_min,
                                   self.z_period)


def make_grid(r_max: float, z_min: float, z_max: float,
              nr: int, nz: int) -> AxiGrid:
    """Build an AxiGrid, rejecting degenerate extents or sizes below 8."""
    if not (r_max > 0):
        raise ValueError(f"r_max must be positive, got {r_max}")
    if not (z_max > z_min):
        raise ValueError(f"need z_max > z_min, got [{z_min}, {z_max}]")
    if nr < 8 or nz < 8:
        raise ValueError(f"grid sizes must be >= 8, got nr={nr}, nz={nz}")
    return AxiGrid(float(r_max), float(z_min), float(z_max), int(nr), int(nz))


@dataclass(frozen=True)
class AxiField:
    """Scalar samples on an AxiGrid with declared parity across r = 0."""

    grid: AxiGrid
    values: np.ndarray
    parity: int = EVEN

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nr, self.grid.nz):
            raise ValueError(
                f"values shape {v.shape} does not match grid "
                f"({self.grid.nr}, {self.grid.nz})")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if self.parity not in (EVEN, ODD):
            raise ValueError("parity must be EVEN (+1) or ODD (-1)")
        object.__setattr__(self, "values", v)

    def eval(self, r, z):
        """Bilinear interpolation at (r, z), vectorized.

        z wraps periodically; r in [0, r_max].  Below the first radial
        sample the field is parity-reflected across the axis; above the
        last sample it is extrapolated linearly to the outer face.
        """
        g = self.grid
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        if np.any(r < -1e-12) or np.any(r > g.r_max * (1 + 1e-12)):
            bad = r[(r < -1e-12) | (r > g.r_max * (1 + 1e-12))]
            raise OutOfDomainError(
                f"r={bad.flat[0]:.6g} outside [0, {g.r_max}]")
        r = np.clip(r, 0.0, g.r_max)

        s = r / g.dr - 0.5
        j0 = np.floor(s).astype(int)
        wr = s - j0
        # Gather with ghost handling: j = -1 mirrors j = 0 with parity,
        # j = nr extrapolates linearly from the last two rows.
        def row(j):
            j = np.asarray(j)
            out_shape = np.broadcast_shapes(j.shape, zk0.shape)
            jj = np.broadcast_to(j, out_shape)
            kk0 = np.broadcast_to(zk0, out_shape)
            kk1 = np.broadcast_to(zk1, out_shape)
            vals = np.empty(out_shape, dtype=float)
            inner = (jj >= 0) & (jj < g.nr)
            low = jj < 0
            high = jj >= g.nr
            vv = self.values
            vals[inner] = (vv[jj[inner], kk0[inner]] * (1 - wz[inner])
                           + vv[jj[inner], kk1[inner]] * wz[inner])
            if np.any(low):
                vals[low] = self.parity * (
                    vv[0, kk0[low]] * (1 - wz[low])
                    + vv[0, kk1[low]] * wz[low])
            if np.any(high):
                v1 = vv[g.nr - 1, kk0[high]] * (1 - wz[high]) \
                    + vv[g.nr - 1, kk1[high]] * wz[high]
                v2 = vv[g.nr - 2, kk0[high]] * (1 - wz[high]) \
                    + vv[g.nr - 2, kk1[high]] * wz[high]
                vals[high] = 2 * v1 - v2
            return vals

        tz = (z - g.z_min) / g.dz
        zk0 = np.floor(tz).astype(int) % g.nz
        zk1 = (zk0 + 1) % g.nz
        wz = tz - np.floor(tz)
        wz, wr = np.broadcast_arrays(wz, wr)
        f0 = row(j0)
        f1 = row(j0 + 1)
        return f0 * (1 - wr) + f1 * wr

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        if isinstance(other, AxiField):
            return replace(self, values=self.values + other.values)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return replace(self, values=self.values * c)
        return NotImplemented

    __rmul__ = __mul__


@dataclass(frozen=True)
class AxiVectorField:
    """Axisymmetric vector samples (u_r, u_theta, u_z) on an AxiGrid.

    u_r and u_theta are odd across the axis, u_z even; the constructor
    enforces those parities on the component fields.
    """

    grid: AxiGrid
    ur: AxiField
    utheta: AxiField
    uz: AxiField

    def __post_init__(self):
        for name, comp, par in (("ur", self.ur, ODD),
                                ("utheta", self.utheta, ODD),
                                ("uz", self.uz, EVEN)):
            if comp.grid != self.grid:
                raise ValueError(f"{name} lives on a different grid")
            if comp.parity != par:
                raise ValueError(
                    f"{name} must have {_PARITY_NAMES[par]} parity")

    @classmethod
    def from_arrays(cls, grid: AxiGrid, ur, utheta, uz) -> "AxiVectorField":
        return cls(grid,
                   AxiField(grid, ur, parity=ODD),
                   AxiField(grid, utheta, parity=ODD),
                   AxiField(grid, uz, parity=EVEN))

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.ur.values ** 2 + self.utheta.values ** 2
                       + self.uz.values ** 2)

    def face_normal_velocity(self) -> float:
        """Extrapolated |u_r| on the outer face r = r_max (impermeability
        audit; zero up to solver tolerance for stream-function velocities).
        """
        v = self.ur.values
        face = 1.5 * v[-1, :] - 0.5 * v[-2, :]
        return float(np.max(np.abs(face)))


@dataclass(frozen=True)
class NormSpec:
    """Weighted Lebesgue norm specification: ||r**-sigma f||_{L^p}.

    measure selects between the solid-cylinder convention (2*pi*r dr dz)
    and the flat toroidal one (dr dz).  p = inf takes the grid maximum of
    the weighted samples.
    """

    p: float
    sigma: float = 0.0
    measure: str = "three_d"

    def __post_init__(self):
        if not (self.p >= 1):
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.measure not in ("three_d", "toroidal"):
            raise ValueError(f"unknown measure {self.measure!r}")

    def sigma_in_growth_window(self) -> bool:
        """sigma in (-2/p', 2/p), the admissible window for comparing
        amplitude growth with semigroup growth (finite p only)."""
        if np.isinf(self.p):
            return False
        lo = -2.0 * (1.0 - 1.0 / self.p)
        hi = 2.0 / self.p
        return lo < self.sigma < hi


# ---------------------------------------------------------------------------
# Canonical difference operators.  Every module uses these same stencils so
# that discrete identities (zero divergence of stream-function velocities,
# curl fields, ...) cancel to machine precision by operator commutation.
# ---------------------------------------------------------------------------

def ddr_values(values: np.ndarray, parity: int, dr: float,
               one_sided_axis: bool = False) -> np.ndarray:
    """Centered radial derivative with parity ghost at the axis and a
    second-order one-sided stencil on the outer row.

    one_sided_axis=True replaces the axis ghost with a one-sided stencil
    (used for fields with no meaningful parity, e.g. transported phases).
    """
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2 * dr)
    if one_sided_axis:
        out[0] = (-3 * values[0] + 4 * values[1] - values[2]) / (2 * dr)
    else:
        out[0] = (values[1] - parity * values[0]) / (2 * dr)
    out[-1] = (3 * values[-1] - 4 * values[-2] + values[-3]) / (2 * dr)
    return out


def ddz_values(values: np.ndarray, dz: float) -> np.ndarray:
    """Centered periodic z derivative."""
    return (np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1)) / (2 * dz)


def grad(f: AxiField, one_sided_axis: bool = False) -> tuple[AxiField, AxiField]:
    """Discrete gradient (d_r f, d_z f); the radial derivative flips parity."""
    g = f.grid
    dr = AxiField(g, ddr_values(f.values, f.parity, g.dr, one_sided_axis),
                  parity=-f.parity)
    dz = AxiField(g, ddz_values(f.values, g.dz), parity=f.parity)
    return dr, dz


def divergence3(u: AxiVectorField) -> AxiField:
    """Discrete 3-D divergence (1/r) d_r(r u_r) + d_z u_z."""
    g = u.grid
    r_ur = g.r_col * u.ur.values                       # odd * odd -> even
    d = ddr_values(r_ur, EVEN, g.dr) / g.r_col + ddz_values(u.uz.values, g.dz)
    return AxiField(g, d, parity=EVEN)


def vorticity(u: AxiVectorField) -> tuple[AxiField, AxiField, AxiField]:
    """Cylindrical curl of an axisymmetric field.

    omega_r = -d_z u_theta, omega_theta = d_z u_r - d_r u_z,
    omega_z = d_r u_theta + u_theta / r.
    """
    g = u.grid
    wr = -ddz_values(u.utheta.values, g.dz)
    wt = ddz_values(u.ur.values, g.dz) - ddr_values(u.uz.values, EVEN, g.dr)
    wz = ddr_values(u.utheta.values, ODD, g.dr) + u.utheta.values / g.r_col
    return (AxiField(g, wr, parity=ODD),
            AxiField(g, wt, parity=ODD),
            AxiField(g, wz, parity=EVEN))


def weighted_norm(f: AxiField | AxiVectorField, spec: NormSpec) -> float:
    """||r**-sigma f||_{L^p} under the spec's measure.

    For finite p and the three_d measure this is
    (sum |f|^p r^(1 - sigma p) 2 pi dr dz)^(1/p); the toroidal measure
    drops the 2 pi r factor.  p = inf is the grid maximum of
    r**-sigma |f| under either measure.
    """
    if isinstance(f, AxiVectorField):
        mag = f.magnitude()
        g = f.grid
    else:
        mag = np.abs(f.values)
        g = f.grid
    r = g.r_col
    if np.isinf(spec.p):
        return float(np.max(r ** (-spec.sigma) * mag))
    p = spec.p
    if spec.measure == "three_d":
        integrand = mag ** p * r ** (1.0 - spec.sigma * p) * (2 * np.pi)
    else:
        integrand = mag ** p * r ** (-spec.sigma * p)
    return float((integrand.sum() * g.dr * g.dz) ** (1.0 / p))


def weighted_max_location(values: np.ndarray, grid: AxiGrid,
                          weight_exponent: float) -> tuple[float, float, float]:
    """(max, r, z) of r**-a |f| over the grid; reports the arg-max sample
    so axis-dominated suprema are visible to callers."""
    w = grid.r_col ** (-weight_exponent) * np.abs(values)
    idx = np.unravel_index(np.argmax(w), w.shape)
    return float(w[idx]), float(grid.r[idx[0]]), float(grid.z[idx[1]])
