"""
Self-similar rescaling of snapshots and instability-threshold calculators.

A locally self-similar flow concentrates as

    u(t, x) = (T* - t)^(-alpha) U(t, (x - x0(t)) / (T* - t)^beta)

in the toroidal (r, z) variables; U is the profile.  Rescaled
perturbation growth is measured by Lambda_p, related to the growth
lambda_p of the unrescaled linearized problem by

    lambda_p(t) = (T* - t)^(2 beta / p - alpha) Lambda_p(t).

Amplifying profiles are predicted below exact exponent thresholds:
alpha/beta < 1 + 4/p in general, and beta > 1/(3/2 + 4/p) under the
balance alpha + beta/2 = 1 of boundary-concentrating computations (any
L^p once beta > 2/3).  Threshold arithmetic is exact (Fractions) so the
calculators can be pinned with zero tolerance.

Nothing here attempts a genuine blow-up run: the rescaling machinery is
validated on manufactured self-similar fixtures and synthetic series.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares

from .fields import AxiVectorField, OutOfDomainError


def _rational(p):
    if isinstance(p, Fraction):
        return p
    if isinstance(p, (int, np.integer)):
        return Fraction(int(p))
    if isinstance(p, float) and p.is_integer():
        return Fraction(int(p))
    return None


def _is_infinite(p) -> bool:
    return isinstance(p, float) and np.isinf(p)


def threshold_corollary(p):
    """1 + 4/p (with 4/inf = 0): profiles amplify when alpha/beta is below
    this.  Exact for rational p; p < 1 rejected."""
    if _is_infinite(p):
        return Fraction(1)
    q = _rational(p)
    if q is not None:
        if q < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        return 1 + Fraction(4) / q
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return 1 + 4.0 / p


def threshold_luo_hou(p):
    """1 / (3/2 + 4/p): the space-exponent threshold under the balance
    alpha + beta/2 = 1; tends to 2/3 as p -> inf."""
    if _is_infinite(p):
        return Fraction(2, 3)
    q = _rational(p)
    if q is not None:
        if q < 1:
            raise ValueError(f"p must be >= 1, got {p}")
        return 1 / (Fraction(3, 2) + Fraction(4) / q)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return 1.0 / (1.5 + 4.0 / p)


@dataclass(frozen=True)
class ScalingParams:
    """Rescaling exponents, blow-up time, and the center path.

    center_path is a callable t -> (r0, z0) or a constant pair.
    """
    alpha: float
    beta: float
    t_star: float
    p: float = 2.0
    center_path: object = (0.0, 0.0)

    def __post_init__(self):
        if not (self.beta > 0):
            raise ValueError("beta must be positive")

    def center(self, t: float) -> tuple[float, float]:
        if callable(self.center_path):
            return self.center_path(t)
        return tuple(self.center_path)

    def ratio(self) -> float:
        return self.alpha / self.beta


@dataclass(frozen=True)
class RescaledSnapshot:
    """Profile samples U on a uniform window in the rescaled coordinates.

    y_r, y_z are 1-D window coordinates; mask marks samples whose preimage
    left the physical domain (partial coverage, not an error).  r_axis_y
    is the rescaled distance of the window origin from the symmetry axis,
    needed for curl metric terms.
    """
    t: float
    y_r: np.ndarray
    y_z: np.ndarray
    ur: np.ndarray
    utheta: np.ndarray
    uz: np.ndarray
    mask: np.ndarray
    scale_factor: float
    r_axis_y: float
    partial: bool


def rescale_snapshot(u: AxiVectorField, params: ScalingParams, t: float,
                     window: tuple = (-1.0, 1.0, -1.0, 1.0),
                     n: int = 64) -> RescaledSnapshot:
    """U(t, y) = (T* - t)^alpha u(t, x0 + (T* - t)^beta y) on the window."""
    if t >= params.t_star:
        raise ValueError(f"t = {t} must precede t_star = {params.t_star}")
    ell = (params.t_star - t) ** params.beta
    amp = (params.t_star - t) ** params.alpha
    r0, z0 = params.center(t)
    y_r = np.linspace(window[0], window[1], n)
    y_z = np.linspace(window[2], window[3], n)
    yy_r, yy_z = np.meshgrid(y_r, y_z, indexing="ij")
    rr = r0 + ell * yy_r
    zz = z0 + ell * yy_z
    g = u.grid
    mask = (rr >= 0) & (rr <= g.r_max)
    vals = []
    for comp in (u.ur, u.utheta, u.uz):
        out = np.zeros_like(rr)
        out[mask] = amp * comp.eval(rr[mask], zz[mask])
        vals.append(out)
    return RescaledSnapshot(t, y_r, y_z, vals[0], vals[1], vals[2], mask,
                            amp, r0 / ell, partial=bool(not mask.all()))


def curl_sup_rescaled(snap: RescaledSnapshot) -> float:
    """max |curl U| over valid window samples, with the cylindrical metric
    terms evaluated at the rescaled axis distance."""
    dyr = snap.y_r[1] - snap.y_r[0]
    dyz = snap.y_z[1] - snap.y_z[0]
    r_eff = snap.r_axis_y + snap.y_r[:, None]
    dur_dz = np.gradient(snap.ur, dyz, axis=1)
    dut_dr = np.gradient(snap.utheta, dyr, axis=0)
    dut_dz = np.gradient(snap.utheta, dyz, axis=1)
    duz_dr = np.gradient(snap.uz, dyr, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        wr = -dut_dz
        wt = dur_dz - duz_dr
        wz = dut_dr + np.where(np.abs(r_eff) > 1e-12,
                               snap.utheta / r_eff, 0.0)
    mag = np.sqrt(wr ** 2 + wt ** 2 + wz ** 2)
    inner = snap.mask.copy()
    inner[[0, -1], :] = False
    inner[:, [0, -1]] = False
    return float(mag[inner].max()) if inner.any() else 0.0


def profile_floor(u_series, trailing: int = 3) -> float:
    """min over the trailing window of the profile curl sup (the measured
    stand-in for a positive limit at the final time).

    Accepts RescaledSnapshot entries or plain AxiVectorField snapshots.
    """
    if len(u_series) < 2:
        raise ValueError("need at least two snapshots")
    sups = []
    for item in u_series:
        if isinstance(item, RescaledSnapshot):
            sups.append(curl_sup_rescaled(item))
        else:
            from .fields import vorticity
            wr, wt, wz = vorticity(item)
            sups.append(float(np.sqrt(wr.values ** 2 + wt.values ** 2
                                      + wz.values ** 2).max()))
    tail = sups[-min(trailing, len(sups)):]
    return float(min(tail))


def lambda_scaled(times: np.ndarray, lambda_series: np.ndarray,
                  params: ScalingParams) -> np.ndarray:
    """Lambda_p(t) = (T* - t)^(alpha - 2 beta / p) lambda_p(t)."""
    times = np.asarray(times, dtype=float)
    if np.any(times >= params.t_star):
        raise ValueError("series timestamps must precede t_star")
    expo = params.alpha - 2.0 * params.beta / params.p
    return (params.t_star - times) ** expo * np.asarray(lambda_series)


def lambda_unscaled(times: np.ndarray, Lambda_series: np.ndarray,
                    params: ScalingParams) -> np.ndarray:
    """Inverse of lambda_scaled."""
    expo = params.alpha - 2.0 * params.beta / params.p
    return np.asarray(Lambda_series) / (params.t_star - np.asarray(times)) ** expo


@dataclass(frozen=True)
class BlowupFit:
    status: str                  # "ok" | "no_fit"
    t_star: float = np.nan
    rate: float = np.nan
    amplitude: float = np.nan
    residual: float = np.nan


def blowup_fit(times: np.ndarray, norms: np.ndarray) -> BlowupFit:
    """Least-squares fit of norms ~ C (T* - t)^(-rate); diagnostic only.

    Requires a positive series with an increasing tail; otherwise returns
    a no-fit status rather than extrapolating garbage.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.size < 4 or np.any(y <= 0):
        return BlowupFit("no_fit")
    tail = y[-max(3, y.size // 3):]
    if not np.all(np.diff(tail) > 0):
        return BlowupFit("no_fit")

    span = t[-1] - t[0]

    def model(params):
        t_star, rate, logc = params
        return logc - rate * np.log(t_star - t) - np.log(y)

    # Initial guesses: tail slope for the rate, a margin past the data
    # for the blow-up time.
    t0 = t[-1] + 0.1 * span
    r0 = max((np.log(y[-1]) - np.log(y[-2]))
             / (np.log(t0 - t[-2]) - np.log(t0 - t[-1])), 0.5)
    sol = least_squares(model, x0=[t0, r0, np.log(y[0])],
                        bounds=([t[-1] + 1e-12 * span, 0.01, -50],
                                [t[-1] + 100 * span, 50, 50]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    resid = float(np.sqrt(np.mean(sol.fun ** 2)))
    return BlowupFit("ok", float(sol.x[0]), float(sol.x[1]),
                     float(np.exp(sol.x[2])), resid)
