"""Critical-gain machinery for the hard-cutoff system.

For fixed decay rate ``c`` the probe solution starts from the pure-decay
profile ``exp(-c t)`` on its first delay interval.  Below a critical gain the
probe stays under the cutoff and collapses to zero; above it the probe
returns to the cutoff in finite time.  The two outcomes are decided in finite
time by, respectively, a whole delay segment falling under the interior
equilibrium (monotone trapping) and an event-located first contact with the
cutoff.  Bisection on the gain brackets the critical value.

The envelope functions bound every sub- and super-cutoff excursion of the
plus branch, yielding the invariant band, the recurrence gap, and the margin
ledger used to transfer the picture to the smooth family.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .dde import System, Trajectory, integrate
from .history import HistoryFunction
from .nonlinearity import Hill, PowerCutoff
from .spectrum import interior_equilibrium

__all__ = [
    "ZClassification",
    "DStarResult",
    "EnvelopeData",
    "LedgerReport",
    "classify_zd",
    "find_dstar",
    "envelopes",
    "check_n_ledger",
    "smallest_passing_n",
]

IN_D = "IN_D"
HITS_ONE = "HITS_ONE"
UNRESOLVED = "UNRESOLVED"


@dataclass(frozen=True)
class ZClassification:
    """Fate of the decay-profile probe at gain ``d``.

    ``HITS_ONE`` carries the first-contact time ``tau0`` (probe time axis,
    where the decay profile occupies [0, 1]); ``IN_D`` carries the time at
    which a whole delay segment fell below the interior equilibrium.
    """

    verdict: str
    c: float
    d: float
    horizon: float
    tau0: Optional[float] = None
    certificate_time: Optional[float] = None
    max_value: Optional[float] = None


def _probe_below_threshold(c: float, d: float, k: float) -> Optional[float]:
    if d <= c * (1.0 + 1e-12):
        return None
    return interior_equilibrium(c, d, k)


def classify_zd(c: float, d: float, k: float = 2.0, T_max: float = 400.0, N: int = 200) -> ZClassification:
    """Classify the probe started from the decay profile ``exp(-c t)``.

    The probe time axis has the profile on [0, 1]; internally the integration
    starts at the profile's right end, so reported times are shifted by one.
    Integration proceeds in chunks with early exit on either certificate.
    """
    if not (c > 0 and d >= c):
        raise ValueError("need d >= c > 0")
    system = System.limit(c, d, k=k)
    history = HistoryFunction.exp_decay(c)
    xi1 = _probe_below_threshold(c, d, k)
    horizon = 0.0
    traj: Optional[Trajectory] = None
    max_val = 0.0
    while horizon < T_max - 1.0:
        horizon = min(25.0 if horizon == 0.0 else 2.0 * horizon, T_max - 1.0)
        traj = integrate(system, history, horizon, N=N)
        max_val = max(max_val, float(np.max(traj.xs)))
        ups = traj.crossings(1.0, "up", t_lo=0.0, t_hi=horizon)
        if ups:
            tau0 = ups[0][0] + 1.0
            return ZClassification(HITS_ONE, c, d, horizon + 1.0, tau0=tau0, max_value=max_val)
        if xi1 is not None:
            t_cert = _first_window_below(traj, xi1)
            if t_cert is not None:
                return ZClassification(IN_D, c, d, horizon + 1.0, certificate_time=t_cert + 1.0, max_value=max_val)
    return ZClassification(UNRESOLVED, c, d, T_max, max_value=max_val)


def _first_window_below(traj: Trajectory, level: float) -> Optional[float]:
    """Earliest t with the whole segment [t-1, t] strictly below ``level``."""
    ts, xs = traj.ts, traj.xs
    above = xs >= level * (1.0 - 1e-12)
    if np.all(above):
        return None
    idx_above = np.flatnonzero(above)
    last_above_t = ts[idx_above[-1]] if idx_above.size else ts[0]
    t_cert = last_above_t + 1.0 + 2.0 / traj.N
    if t_cert <= traj.T:
        return float(t_cert)
    return None


@dataclass(frozen=True)
class DStarResult:
    estimate: float
    lo: float
    hi: float
    history: tuple    # (d, verdict, horizon)
    unresolved: tuple

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def to_dict(self) -> dict:
        return {
            "dstar": self.estimate,
            "bracket": [self.lo, self.hi],
            "history": [list(h) for h in self.history],
            "unresolved": list(self.unresolved),
        }


_BRACKET_LADDER = (1.1, 1.3, 1.6, 2.0, 2.5, 3.2, 4.0, 5.5, 8.0, 12.0, 20.0, 50.0, 100.0)


def find_dstar(
    c: float,
    bracket: Optional[tuple] = None,
    tol: float = 1e-6,
    T_max: float = 400.0,
    k: float = 2.0,
    N: int = 200,
) -> DStarResult:
    """Bisection bracket for the critical gain.

    The bracket invariant (below: collapse certificate, above: cutoff
    contact) is maintained throughout; probes that stay unresolved after the
    horizon is doubled twice are logged and side-stepped by shifted probes.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    history: list[tuple] = []
    unresolved: list[float] = []

    def classify(d: float) -> str:
        for horizon in (T_max, 2.0 * T_max, 4.0 * T_max):
            res = classify_zd(c, d, k=k, T_max=horizon, N=N)
            history.append((d, res.verdict, horizon))
            if res.verdict != UNRESOLVED:
                return res.verdict
        unresolved.append(d)
        return UNRESOLVED

    if bracket is None:
        lo = None
        hi = None
        prev = None
        for mult in _BRACKET_LADDER:
            d = c * mult
            v = classify(d)
            if v == HITS_ONE:
                if prev is None:
                    raise RuntimeError("ladder starts above the critical gain")
                lo, hi = prev, d
                break
            if v == IN_D:
                prev = d
        if lo is None:
            raise RuntimeError("no cutoff contact found on the probe ladder")
    else:
        lo, hi = bracket
        if classify(lo) != IN_D:
            raise ValueError("lower bracket end does not certify collapse")
        if classify(hi) != HITS_ONE:
            raise ValueError("upper bracket end does not reach the cutoff")

    while hi - lo > tol:
        width = hi - lo
        probes = [lo + 0.5 * width, lo + 0.25 * width, lo + 0.75 * width, lo + 0.375 * width, lo + 0.625 * width]
        advanced = False
        for p in probes:
            v = classify(p)
            if v == IN_D:
                lo = p
                advanced = True
                break
            if v == HITS_ONE:
                hi = p
                advanced = True
                break
        if not advanced:
            break  # every probe unresolved; report the bracket as-is
    return DStarResult(
        estimate=0.5 * (lo + hi),
        lo=lo,
        hi=hi,
        history=tuple(history),
        unresolved=tuple(unresolved),
    )


@dataclass(frozen=True)
class EnvelopeData:
    """Envelope functions, invariant band, and the margin ledger.

    ``w0`` bounds sub-cutoff excursions from below (computed at the smaller
    gain ``d0``), ``w1`` bounds super-cutoff excursions from above (closed
    form at ``d1``).  ``m0 <= x <= m1`` is the band, ``sigma`` the recurrence
    gap for the limit system and ``sigma_n`` its finite-n counterpart with
    the band ``[m0_n, m1_n]``.
    """

    c: float
    d: float
    d0: float
    d1: float
    tau0: float
    tau1: float
    m0: float
    m1: float
    sigma: float
    delta: float
    big_delta: float
    k1: float
    k2: float
    nu1: float
    m0_n: float
    m1_n: float
    sigma_n: float
    ledger: dict
    w0: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)
    w1: Callable[[np.ndarray], np.ndarray] = field(repr=False, default=None)

    def to_dict(self) -> dict:
        out = {
            "c": self.c, "d": self.d, "d0": self.d0, "d1": self.d1,
            "tau0": self.tau0, "tau1": self.tau1, "m0": self.m0, "m1": self.m1,
            "sigma": self.sigma, "delta": self.delta, "big_delta": self.big_delta,
            "k1": self.k1, "k2": self.k2, "nu1": self.nu1,
            "m0_n": self.m0_n, "m1_n": self.m1_n, "sigma_n": self.sigma_n,
            "ledger": self.ledger,
        }
        return out


def envelopes(c: float, d: float, d0: float, d1: Optional[float] = None, k: float = 2.0, N: int = 200) -> EnvelopeData:
    """Build the envelope pair and the margin ledger for gains ``d > d0``.

    ``d0`` must exceed the critical gain (the lower envelope must reach the
    cutoff); ``d1`` defaults to ``d``.
    """
    d1 = d if d1 is None else d1
    if not d > d0 > c:
        raise ValueError("need d > d0 > c (and d0 above the critical gain)")
    g = PowerCutoff(k=k)
    res0 = classify_zd(c, d0, k=k, T_max=600.0, N=N)
    if res0.verdict != HITS_ONE:
        raise ValueError("lower envelope gain does not reach the cutoff; raise d0")
    tau0 = res0.tau0
    system0 = System.limit(c, d0, k=k)
    traj0 = integrate(system0, HistoryFunction.exp_decay(c), tau0 - 1.0 + 0.5, N=N)

    def w0(t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        early = t <= 1.0
        out[early] = np.exp(-c * t[early])
        out[~early] = traj0.eval_many(t[~early] - 1.0)
        return out

    tau1 = 1.0 + math.log((d1 / c) * (1.0 - math.exp(-c)) + math.exp(-c)) / c

    def w1(t):
        t = np.asarray(t, dtype=float)
        e = np.exp(-c * t)
        rising = (d1 / c) * (1.0 - e) + e
        top = (d1 / c) * (1.0 - math.exp(-c)) + math.exp(-c)
        falling = np.exp(-c * (t - 1.0)) * top
        return np.where(t <= 1.0, rising, falling)

    grid0 = np.linspace(0.0, tau0, 4001)
    w0_min = float(np.min(w0(grid0)))
    xi1 = interior_equilibrium(c, d, k)
    m0 = min(xi1, w0_min)
    m1 = d / c
    sigma = max(tau0, tau1)

    # largest margin window with c*Delta < g(exp(-c*Delta)) / 2
    dg = np.linspace(1e-4, 0.9999, 10_000)
    ok = c * dg < 0.5 * g.value(np.exp(-c * dg))
    if not np.any(ok):
        raise ValueError("no admissible margin window; parameters too extreme")
    big_delta = float(dg[ok][-1])
    k1 = 4.0 + 2.0 * d * g.sup_deriv_unit()
    k2 = 2.0 + big_delta * k1

    integral = quad(lambda s: math.exp(c * s) * g.value(math.exp(-c * (s - 1.0))), 1.0, 1.0 + big_delta)[0]
    bounds = {
        "1": (d - d0) * g.value(m0 / 2.0) / k1,
        "2": (d - d0) * g.value(math.exp(-c * big_delta)) / (2.0 * k1),
        "3": (d - d0) / k2 * math.exp(-c * (1.0 + big_delta)) * integral,
        "4": min(d / c - 1.0, c / 2.0),
        "cap": m0 / 4.0,
    }
    delta = 0.9 * min(bounds.values())
    if delta <= 0:
        raise ValueError("no admissible margin; shrink d - d0")
    nu1 = 1.0 + (2.0 / (c * delta)) * (2.0 * d / c - 1.0)
    ledger = {name: {"bound": val, "delta": delta, "ok": bool(delta < val)} for name, val in bounds.items()}
    return EnvelopeData(
        c=c, d=d, d0=d0, d1=d1, tau0=tau0, tau1=tau1, m0=m0, m1=m1, sigma=sigma,
        delta=delta, big_delta=big_delta, k1=k1, k2=k2, nu1=nu1,
        m0_n=m0 / 2.0, m1_n=2.0 * d / c, sigma_n=max(tau0, nu1),
        ledger=ledger, w0=w0, w1=w1,
    )


@dataclass(frozen=True)
class LedgerReport:
    """Per-item margin checks for one smooth family member."""

    c: float
    d: float
    delta: float
    n: int
    a_n: float
    b_n: float
    items: dict
    passed: bool  # the n-dependent items (5)-(9)


def check_n_ledger(
    c: float,
    d: float,
    delta: float,
    k: float,
    n: int,
    a_n: Optional[float] = None,
    b_n: Optional[float] = None,
    env: Optional[EnvelopeData] = None,
    feedback=None,
    K: float = 100.0,
) -> LedgerReport:
    """Evaluate the margin ledger at one ``n``.

    Items 5-9 depend on ``n`` and decide the verdict; items 1-4 need the
    envelope context and are recorded informationally when ``env`` is given.
    ``feedback`` may substitute any object with ``value``/``deriv`` (e.g. the
    cutoff family itself, for which the closeness items vanish).
    """
    a_n = c if a_n is None else a_n
    b_n = d if b_n is None else b_n
    f = Hill(k=k, n=int(n)) if feedback is None else feedback
    g = PowerCutoff(k=k)
    items: dict = {}
    if env is not None:
        for name in ("1", "2", "3", "4"):
            b = env.ledger[name]["bound"]
            items[name] = {"lhs": delta, "rhs": b, "ok": bool(delta < b)}

    grid_hi = np.concatenate([np.linspace(1.0 + delta, min(3.0, K), 4000), np.geomspace(min(3.0, K), K, 500)])
    tail_sup = float(np.max(f.value(grid_hi)))
    if isinstance(f, Hill):
        tail_sup = max(tail_sup, f.tail_value_bound(K))
    items["5"] = {
        "lhs": max(abs(a_n - c), abs(b_n - d), d * abs(a_n - c)),
        "rhs": delta,
        "ok": bool(abs(a_n - c) < delta and abs(b_n - d) < delta and d * abs(a_n - c) < delta),
    }
    items["6"] = {"lhs": b_n * tail_sup, "rhs": delta, "ok": bool(b_n * tail_sup < delta)}
    grid_lo = np.linspace(0.0, 1.0 - delta, 4000)
    close_sup = float(np.max(np.abs(f.value(grid_lo) - g.value(grid_lo))))
    items["7"] = {"lhs": d * close_sup, "rhs": delta, "ok": bool(d * close_sup < delta)}
    ratio = b_n / a_n
    items["8"] = {"lhs": ratio, "rhs": (1.0 + delta, 2.0 * d / c), "ok": bool(1.0 + delta < ratio < 2.0 * d / c)}
    items["9"] = {"lhs": a_n, "rhs": c / 2.0, "ok": bool(a_n > c / 2.0)}
    passed = all(items[i]["ok"] for i in ("5", "6", "7", "8", "9"))
    return LedgerReport(c=c, d=d, delta=delta, n=int(n), a_n=a_n, b_n=b_n, items=items, passed=passed)


def smallest_passing_n(c: float, d: float, delta: float, k: float, n_grid, **kw) -> Optional[int]:
    """First grid ``n`` whose n-dependent ledger items all hold."""
    for n in n_grid:
        if check_n_ledger(c, d, delta, k, int(n), **kw).passed:
            return int(n)
    return None
