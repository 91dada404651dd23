"""Stationary points and the linearized spectrum around them.

The linearization of ``x'(t) = -rate x(t) + gain F(x(t-1))`` at a stationary
value has characteristic function ``lam + rate - slope * exp(-lam)`` with
``slope = gain * F'(xi)``.  In the positive-feedback regime ``slope > rate``
there is a unique positive real root and complex conjugate pairs whose
imaginary parts sit in the bands ``((2j-1)pi, 2j pi)``.

The oscillation-angle machinery solves ``theta = -c tan(theta)`` on
``(2j pi - pi/2, 2j pi)`` and packages the data used to place conjugate root
pairs exactly on the imaginary axis (time-rescaled systems), including the
closed-form transversality speed of the crossing pair.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .dde import System
from .nonlinearity import Hill

__all__ = [
    "StationaryPoint",
    "StationarySet",
    "SpectrumReport",
    "HopfData",
    "stationary_points",
    "interior_equilibrium",
    "leading_real_root",
    "complex_root_pairs",
    "spectrum_report",
    "solve_theta",
    "hopf_angles",
    "hopf_data",
    "transversality",
    "track_crossing_root",
]


@dataclass(frozen=True)
class StationaryPoint:
    value: float
    classification: str  # "unstable" | "stable-candidate"
    residual: float
    slope: float  # gain * F'(value)


@dataclass(frozen=True)
class StationarySet:
    points: tuple
    ceiling: float
    closed_form_interior: Optional[float] = None

    def interior(self) -> StationaryPoint:
        inner = [p for p in self.points if p.value > 0.0]
        if not inner:
            raise ValueError("no interior stationary point below the scan ceiling")
        return inner[0]


def interior_equilibrium(c: float, d: float, k: float = 2.0) -> float:
    """Closed-form interior zero of ``-c xi + d xi**k``: ``(c/d)**(1/(k-1))``."""
    if not d > c > 0:
        raise ValueError("need d > c > 0")
    return (c / d) ** (1.0 / (k - 1.0))


def stationary_points(system: System, ceiling: float, grid_points: int = 10_000) -> StationarySet:
    """All zeros of ``-rate xi + gain F(xi)`` on [0, ceiling].

    Sign changes on a dense grid are refined by bisection to ~1e-12.  For the
    limit system the scan stops at the cutoff, where the map is discontinuous.
    """
    if ceiling <= 0:
        raise ValueError("ceiling must be positive")
    top = min(ceiling, 1.0 - 1e-9) if system.kind == "limit" else ceiling
    fb = system.feedback

    def alpha(xi):
        return -system.rate * xi + system.gain * fb.value(xi)

    grid = np.linspace(0.0, top, grid_points)
    vals = alpha(grid)
    roots = [0.0]
    for j in range(len(grid) - 1):
        va, vb = vals[j], vals[j + 1]
        if va == 0.0 and grid[j] > 0.0:
            roots.append(grid[j])
            continue
        if va * vb < 0.0:
            lo, hi, flo = grid[j], grid[j + 1], va
            while hi - lo > 1e-14:
                mid = 0.5 * (lo + hi)
                fm = alpha(mid)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append(0.5 * (lo + hi))
    points = []
    for r in sorted(set(np.round(roots, 13))):
        slope = system.gain * fb.deriv(r)
        points.append(
            StationaryPoint(
                value=float(r),
                classification="unstable" if slope > system.rate else "stable-candidate",
                residual=abs(alpha(float(r))),
                slope=float(slope),
            )
        )
    closed = None
    if system.kind == "limit" and system.gain > system.rate:
        closed = interior_equilibrium(system.rate, system.gain, system.feedback.k)
    return StationarySet(points=tuple(points), ceiling=ceiling, closed_form_interior=closed)


def _char(lam: complex, rate: float, slope: float) -> complex:
    return lam + rate - slope * cmath.exp(-lam)


def leading_real_root(rate: float, slope: float, tol: float = 1e-13) -> float:
    """The unique real root of ``lam + rate - slope exp(-lam)``.

    Positive when ``slope > rate`` (bisection on [0, slope]); zero at the
    boundary; otherwise the negative real root is returned with a warning.
    """
    if not (rate > 0 and slope > 0):
        raise ValueError("rate and slope must be positive")

    def F(lam):
        return lam + rate - slope * math.exp(-lam)

    if slope == rate:
        return 0.0
    if slope > rate:
        lo, hi = 0.0, slope
    else:
        warnings.warn("slope <= rate: no positive root; returning the negative real root")
        lo = -1.0
        while F(lo) > 0.0:
            lo *= 2.0
        hi = 0.0
    flo = F(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = F(mid)
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def complex_root_pairs(rate: float, slope: float, count: int = 5, max_iter: int = 200) -> list:
    """The first ``count`` conjugate root pairs, one per imaginary band.

    Newton iteration from the deterministic seed ``-rate + i(2j - 1/2)pi``;
    if it leaves its band or stalls, the root is recovered from the phase
    reduction of the imaginary part by bracketed root finding.
    """
    if slope <= 0:
        raise ValueError("slope must be positive")
    out = []
    for j in range(1, count + 1):
        lo_band, hi_band = (2 * j - 1) * math.pi, 2 * j * math.pi
        lam = complex(-rate, (2 * j - 0.5) * math.pi)
        ok = False
        for _ in range(max_iter):
            f = _char(lam, rate, slope)
            fp = 1.0 + slope * cmath.exp(-lam)
            step = f / fp
            lam -= step
            if abs(step) < 1e-14:
                ok = lo_band < lam.imag < hi_band and abs(_char(lam, rate, slope)) < 1e-10
                break
        if not ok:
            lam = _root_by_phase(rate, slope, lo_band, hi_band)
        if lam is None or abs(_char(lam, rate, slope)) > 1e-10:
            raise RuntimeError(f"root pair {j} did not converge")
        out.append((lam.real, abs(lam.imag)))
    return out


def _root_by_phase(rate: float, slope: float, lo: float, hi: float) -> Optional[complex]:
    # imaginary part: y + slope e^{-x} sin y = 0 gives slope e^{-x} = -y/sin(y);
    # substitute into the real part and solve the scalar equation in y.
    def G(y):
        R = -y / math.sin(y)
        if R <= 0:
            return math.nan
        x = math.log(slope / R)
        return x + rate - R * math.cos(y)

    ys = np.linspace(lo + 1e-6, hi - 1e-6, 4001)
    vals = np.array([G(y) for y in ys])
    for j in range(len(ys) - 1):
        if np.isfinite(vals[j]) and np.isfinite(vals[j + 1]) and vals[j] * vals[j + 1] < 0:
            y = brentq(G, ys[j], ys[j + 1], xtol=1e-14)
            x = math.log(slope * math.sin(y) / (-y)) if False else math.log(slope / (-y / math.sin(y)))
            return complex(x, y)
    return None


@dataclass(frozen=True)
class SpectrumReport:
    rate: float
    slope: float
    lambda0: float
    pairs: tuple  # ((re, im), ...)
    beta_window: tuple  # (exp(re lambda_1), exp(lambda0))
    residuals: tuple

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "slope": self.slope,
            "lambda0": self.lambda0,
            "pairs": [list(p) for p in self.pairs],
            "beta_window": list(self.beta_window),
            "residuals": list(self.residuals),
        }


def spectrum_report(rate: float, slope: float, count: int = 5) -> SpectrumReport:
    lam0 = leading_real_root(rate, slope)
    pairs = complex_root_pairs(rate, slope, count)
    residuals = tuple(abs(_char(complex(re, im), rate, slope)) for re, im in pairs)
    return SpectrumReport(
        rate=rate,
        slope=slope,
        lambda0=lam0,
        pairs=tuple(pairs),
        beta_window=(math.exp(pairs[0][0]), math.exp(lam0)),
        residuals=residuals,
    )


def solve_theta(c: float, j: int, tol: float = 1e-13) -> float:
    """The unique root of ``theta + c tan(theta) = 0`` in ``(2j pi - pi/2, 2j pi)``."""
    if c <= 0:
        raise ValueError("c must be positive")
    if j < 1:
        raise ValueError("band index j must be a positive integer")
    lo = 2 * j * math.pi - 0.5 * math.pi
    hi = 2 * j * math.pi

    def G(th):
        return th + c * math.tan(th)

    a = lo + 1e-12 * max(1.0, lo)
    while G(a) > 0.0:  # push toward the asymptote until the sign is negative
        a = lo + (a - lo) * 0.125
    b = hi
    fa = G(a)
    while b - a > tol:
        mid = 0.5 * (a + b)
        fm = G(mid)
        if fa * fm <= 0.0:
            b = mid
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def transversality(rate: float, theta: float) -> float:
    """Speed at which the crossing pair's real part moves with the time rescale."""
    return theta**2 / ((1.0 + rate) ** 2 + theta**2)


def track_crossing_root(rate: float, slope: float, theta: float, alpha: float) -> complex:
    """Continue the root near ``i theta`` of ``lam + (1+alpha)(rate - slope e^(-lam))``."""
    lam = complex(0.0, theta)
    for _ in range(100):
        f = lam + (1.0 + alpha) * (rate - slope * cmath.exp(-lam))
        fp = 1.0 + (1.0 + alpha) * slope * cmath.exp(-lam)
        step = f / fp
        lam -= step
        if abs(step) < 1e-15:
            break
    return lam


@dataclass(frozen=True)
class HopfData:
    j: int
    theta: float            # angle for the limit slope
    theta_n: float          # angle for the finite-n slope
    beta_n: float           # time rescale placing the pair on the axis
    alpha: float            # extra detuning applied on top of beta_n
    a_n: float
    b_n: float
    transversality: float
    xi1: float
    xi1_n: float
    slope_n: float          # d * F'(xi1_n)
    omega_guess: float      # 2 pi / theta_n
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "theta": self.theta,
            "theta_n": self.theta_n,
            "beta_n": self.beta_n,
            "alpha": self.alpha,
            "a_n": self.a_n,
            "b_n": self.b_n,
            "transversality": self.transversality,
            "xi1": self.xi1,
            "xi1_n": self.xi1_n,
            "slope_n": self.slope_n,
            "omega_guess": self.omega_guess,
        }


def hopf_angles(c: float, slope_n: float, j: int) -> tuple[float, float]:
    """Angle and time rescale for a crossing pair at finite slope.

    ``theta_n`` solves ``cos(theta_n) = c / slope_n`` in the j-th band and
    ``beta_n = -theta_n / (c tan theta_n)`` rescales time so the pair sits on
    the imaginary axis.
    """
    ratio = c / slope_n
    if not 0.0 < ratio < 1.0:
        raise ValueError("crossing pair unavailable: c / slope must lie in (0, 1)")
    theta_n = 2 * j * math.pi - math.acos(ratio)
    beta_n = -theta_n / (c * math.tan(theta_n))
    return theta_n, beta_n


def hopf_data(c: float, d: float, k: float, n: int, j: int = 1, alpha: float = 0.0) -> HopfData:
    """Angles, rescaled parameters, and transversality for the n-th Hill system.

    Requires the limit-family criticality ``|c - d g'(xi1) cos(theta_j)| < 1e-8``
    and ``d F'(xi1_n) > c``; raises otherwise.
    """
    xi1 = interior_equilibrium(c, d, k)
    slope_limit = d * k * xi1 ** (k - 1.0)
    theta = solve_theta(c, j)
    gap = abs(c - slope_limit * math.cos(theta))
    if gap > 1e-8:
        raise ValueError(f"criticality violated: |c - slope*cos(theta_j)| = {gap:.3e}")
    smooth = System.smooth(c, d, k=k, n=n)
    xi1_n = stationary_points(smooth, ceiling=0.9).interior().value
    slope_n = d * Hill(k=k, n=n).deriv(xi1_n)
    if slope_n <= c:
        raise ValueError("finite-n slope does not exceed the decay rate")
    theta_n, beta_n = hopf_angles(c, slope_n, j)
    a_n = (1.0 + alpha) * beta_n * c
    b_n = (1.0 + alpha) * beta_n * d
    mu_prime = transversality(beta_n * c, theta_n)
    return HopfData(
        j=j,
        theta=theta,
        theta_n=theta_n,
        beta_n=beta_n,
        alpha=alpha,
        a_n=a_n,
        b_n=b_n,
        transversality=mu_prime,
        xi1=xi1,
        xi1_n=xi1_n,
        slope_n=slope_n,
        omega_guess=2.0 * math.pi / theta_n,
    )
