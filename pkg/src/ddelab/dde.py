"""Method-of-steps integrator for scalar delay equations with unit delay.

Both system kinds share the form ``x'(t) = -rate * x(t) + gain * F(x(t-1))``.
On each unit interval the delayed term is a known function, so the equation
is affine in the current state.  The classical fourth-order Runge-Kutta step
for an affine scalar equation is itself an affine map, which lets a whole
interval be advanced as one linear recursion (``scipy.signal.lfilter``) over
precomputed forcing samples.

For the hard-cutoff ("limit") system, times where the solution crosses the
cutoff level are located by bisection on the dense interpolant; integration
restarts there so the forcing is evaluated on one side only, and on pieces
with vanishing forcing the decay is propagated exactly by the exponential.
Those crossing times, shifted by the delay, are first-class events of the
trajectory: no integration step, interpolation piece, or quadrature panel
ever spans one.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .history import HistoryFunction
from .nonlinearity import Feedback, Hill, PowerCutoff, feedback_to_json

__all__ = [
    "System",
    "Trajectory",
    "BoundsReport",
    "OrbitClassification",
    "DDEIntegrationError",
    "integrate",
    "segment_at",
    "check_bounds",
    "omega_diagnose",
    "integral_residual",
]

_BISECT_TOL = 1e-12
_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(6)


class DDEIntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class System:
    """Parameter bundle: decay rate, feedback gain, and the nonlinearity."""

    kind: str  # "limit" | "smooth"
    rate: float
    gain: float
    feedback: Feedback

    def __post_init__(self):
        if self.kind not in ("limit", "smooth"):
            raise ValueError("kind must be 'limit' or 'smooth'")
        if not (self.rate > 0.0 and self.gain > 0.0):
            raise ValueError("rate and gain must be positive")
        if self.kind == "limit" and not isinstance(self.feedback, PowerCutoff):
            raise ValueError("limit systems use the power-cutoff feedback")
        if self.kind == "smooth" and not isinstance(self.feedback, Hill):
            raise ValueError("smooth systems use the Hill feedback")

    @classmethod
    def limit(cls, c: float, d: float, k: float = 2.0) -> "System":
        return cls("limit", float(c), float(d), PowerCutoff(k=k))

    @classmethod
    def smooth(cls, a: float, b: float, k: float = 2.0, n: int = 100) -> "System":
        return cls("smooth", float(a), float(b), Hill(k=k, n=n))

    @property
    def has_gap(self) -> bool:
        """True in the standard regime gain > rate."""
        return self.gain > self.rate

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "rate": self.rate,
            "gain": self.gain,
            "feedback": feedback_to_json(self.feedback),
        }


def _rk4_affine_coeffs(rate: float, h: float) -> tuple[float, float, float, float]:
    """One RK4 step of ``x' = -rate x + B(t)`` as ``x1 = A x0 + c1 B0 + cm Bm + c2 B1``."""

    def step(x0, b0, bm, b1):
        k1 = -rate * x0 + b0
        k2 = -rate * (x0 + 0.5 * h * k1) + bm
        k3 = -rate * (x0 + 0.5 * h * k2) + bm
        k4 = -rate * (x0 + h * k3) + b1
        return x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return step(1.0, 0.0, 0.0, 0.0), step(0.0, 1.0, 0.0, 0.0), step(0.0, 0.0, 1.0, 0.0), step(0.0, 0.0, 0.0, 1.0)


def _hermite_eval(theta: np.ndarray, h: np.ndarray, x0, d0, x1, d1) -> np.ndarray:
    t2 = theta * theta
    t3 = t2 * theta
    return (
        x0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + d0 * h * (t3 - 2.0 * t2 + theta)
        + x1 * (-2.0 * t3 + 3.0 * t2)
        + d1 * h * (t3 - t2)
    )


@dataclass
class Trajectory:
    """Dense solution on [-1, T] with an event log of cutoff-level crossings.

    Piece ``i`` spans ``ts[i]..ts[i+1]`` and carries one-sided derivatives at
    both ends; evaluation uses cubic Hermite interpolation, except on pieces
    with vanishing forcing (limit system above the cutoff) where the exact
    exponential decay is used.
    """

    system: System
    history: HistoryFunction
    N: int
    T: float
    ts: np.ndarray          # nodes, ts[0] == 0.0
    xs: np.ndarray          # values at nodes
    dl: np.ndarray          # right-sided derivative at the left node of each piece
    dr: np.ndarray          # left-sided derivative at the right node of each piece
    side: np.ndarray        # per piece: 1 if the delayed argument exceeds the cutoff
    events: list = field(default_factory=list)       # {t, kind}: forcing switches
    crossings_log: list = field(default_factory=list)  # (t, dir) where x(t) crosses the cutoff
    grazes: list = field(default_factory=list)

    # -- evaluation --------------------------------------------------------
    def eval_many(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        past = t <= 0.0
        if np.any(past):
            out[past] = self.history.eval(np.clip(t[past], -1.0, 0.0))
        fut = ~past
        if np.any(fut):
            tf = t[fut]
            if np.any(tf > self.T + 1e-9):
                raise ValueError("evaluation beyond the integrated horizon")
            idx = np.clip(np.searchsorted(self.ts, tf, side="right") - 1, 0, len(self.ts) - 2)
            h = self.ts[idx + 1] - self.ts[idx]
            theta = np.clip((tf - self.ts[idx]) / h, 0.0, 1.0)
            vals = _hermite_eval(theta, h, self.xs[idx], self.dl[idx], self.xs[idx + 1], self.dr[idx])
            above = self.side[idx] == 1
            if np.any(above):
                vals[above] = self.xs[idx[above]] * np.exp(
                    -self.system.rate * (tf[above] - self.ts[idx[above]])
                )
            out[fut] = vals
        return out

    def eval(self, t: float) -> float:
        return float(self.eval_many(np.asarray([t]))[0])

    # -- crossings ----------------------------------------------------------
    def crossings(self, level: float, direction: str = "both", t_lo: float = 0.0, t_hi: Optional[float] = None) -> list:
        """Times in [t_lo, t_hi] where the solution crosses ``level``.

        Returns a list of ``(t, dir)`` with dir in {"up", "down"}, located to
        ~1e-12 by bisection on the dense interpolant (closed form on exact
        exponential pieces).
        """
        t_hi = self.T if t_hi is None else t_hi
        rate = self.system.rate
        found: list[tuple[float, str]] = []
        i_lo = max(0, np.searchsorted(self.ts, t_lo, side="right") - 1)
        i_hi = min(len(self.ts) - 2, np.searchsorted(self.ts, t_hi, side="left"))
        thetas = np.linspace(0.0, 1.0, 5)
        for i in range(i_lo, i_hi + 1):
            a, b = self.ts[i], self.ts[i + 1]
            if b < t_lo or a > t_hi:
                continue
            if self.side[i] == 1:
                x0, x1 = self.xs[i], self.xs[i + 1]
                if (x0 - level) * (x1 - level) <= 0.0 and x0 != x1 and x0 > 0 and level > 0:
                    tc = a + math.log(x0 / level) / rate
                    found.append((tc, "down" if x0 > level else "up"))
                continue
            h = b - a
            vals = _hermite_eval(thetas, h, self.xs[i], self.dl[i], self.xs[i + 1], self.dr[i]) - level
            for j in range(4):
                va, vb = vals[j], vals[j + 1]
                if va == 0.0 and j == 0 and i == i_lo:
                    found.append((a, "up" if vb > 0 else "down"))
                    continue
                if va * vb > 0.0 or (va == 0.0 and vb == 0.0):
                    continue
                lo, hi = thetas[j], thetas[j + 1]
                flo = va
                while (hi - lo) * h > _BISECT_TOL:
                    mid = 0.5 * (lo + hi)
                    fm = float(
                        _hermite_eval(np.asarray([mid]), h, self.xs[i], self.dl[i], self.xs[i + 1], self.dr[i])[0]
                    ) - level
                    if flo * fm <= 0.0:
                        hi = mid
                    else:
                        lo, flo = mid, fm
                tc = a + 0.5 * (lo + hi) * h
                found.append((tc, "up" if vb > va else "down"))
        out = []
        for tc, dirn in sorted(found):
            if not (t_lo - 1e-12 <= tc <= t_hi + 1e-12):
                continue
            if out and abs(tc - out[-1][0]) < 1e-10:
                continue
            if dirn != direction and direction != "both":
                continue
            out.append((tc, dirn))
        return out

    def first_crossing(self, level: float, direction: str = "both", t_from: float = 0.0) -> Optional[float]:
        step = 1.0
        t = t_from
        while t < self.T:
            hits = self.crossings(level, direction, t_lo=t, t_hi=min(t + step, self.T))
            hits = [c for c, _ in hits if c > t_from + 1e-12]
            if hits:
                return hits[0]
            t += step
        return None

    # -- export --------------------------------------------------------------
    def export_csv(self, path) -> None:
        ev = np.array([e["t"] for e in self.events]) if self.events else np.empty(0)
        with open(path, "w") as fh:
            fh.write("t,x,x_delayed,derivative_flag\n")
            delayed = self.eval_many(self.ts - 1.0)
            for t, x, xd in zip(self.ts, self.xs, delayed):
                flag = int(ev.size > 0 and np.min(np.abs(ev - t)) < 1e-12)
                fh.write(f"{t:.12e},{x:.12e},{xd:.12e},{flag}\n")

    def events_json(self) -> str:
        return json.dumps(
            [{"t": round(e["t"], 14), "kind": e["kind"]} for e in self.events],
            indent=1,
        )


def _scan_history_crossings(history: HistoryFunction, level: float = 1.0) -> list:
    s, v = history.sampled(4001)
    d = v - level
    out = []
    for j in range(len(s) - 1):
        if d[j] == 0.0 and j == 0:
            continue
        if d[j] * d[j + 1] < 0.0:
            lo, hi = s[j], s[j + 1]
            flo = d[j]
            while hi - lo > _BISECT_TOL:
                mid = 0.5 * (lo + hi)
                fm = history.eval(mid) - level
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            out.append((0.5 * (lo + hi), "up" if d[j + 1] > d[j] else "down"))
    return out


def integrate(system: System, history: HistoryFunction, T: float, N: int = 200) -> Trajectory:
    """Advance the system from the given history to time ``T``.

    Fixed step ``1/N`` dividing the delay exactly (``N >= 100``); delayed
    lookups land on stored polynomials of the previous interval.  For limit
    systems, cutoff crossings of the computed solution split the next
    interval's integration so the discontinuous feedback is only ever
    evaluated on one side.
    """
    if T < 0:
        raise ValueError("horizon T must be nonnegative")
    if N < 100:
        raise ValueError("mesh refinement N must be at least 100")
    if not history.is_nonnegative():
        raise ValueError("history must be nonnegative")
    limit = system.kind == "limit"
    rate, gain = system.rate, system.gain
    fb = system.feedback
    h = 1.0 / N

    ts_parts: list[np.ndarray] = [np.asarray([0.0])]
    xs_parts: list[np.ndarray] = [np.asarray([float(history.eval(0.0))])]
    dl_parts: list[np.ndarray] = []
    dr_parts: list[np.ndarray] = []
    side_parts: list[np.ndarray] = []
    events: list[dict] = []
    grazes: list[float] = []
    crossings: list[tuple[float, str]] = []

    if limit:
        crossings.extend(_scan_history_crossings(history))
        for tc, dirn in crossings:
            if tc + 1.0 <= T + 1e-12:
                events.append({"t": tc + 1.0, "kind": "forcing-off" if dirn == "up" else "forcing-on"})

    # bundles of per-unit data used for delayed lookups while integrating
    unit_blocks: list[dict] = []

    def delayed_eval(times: np.ndarray, unit: int) -> np.ndarray:
        tt = times
        out = np.empty_like(tt)
        past = tt <= 1e-14
        if np.any(past):
            out[past] = history.eval(np.clip(tt[past], -1.0, 0.0))
        fut = ~past
        if np.any(fut):
            blk = unit_blocks[unit - 1]
            bts, bxs, bdl, bdr, bside = blk["ts"], blk["xs"], blk["dl"], blk["dr"], blk["side"]
            tf = tt[fut]
            idx = np.clip(np.searchsorted(bts, tf, side="right") - 1, 0, len(bts) - 2)
            hh = bts[idx + 1] - bts[idx]
            theta = np.clip((tf - bts[idx]) / hh, 0.0, 1.0)
            vals = _hermite_eval(theta, hh, bxs[idx], bdl[idx], bxs[idx + 1], bdr[idx])
            ab = bside[idx] == 1
            if np.any(ab):
                vals[ab] = bxs[idx[ab]] * np.exp(-rate * (tf[ab] - bts[idx[ab]]))
            out[fut] = vals
        return out

    x_cur = xs_parts[0][0]
    n_units = int(math.ceil(T - 1e-12))
    for unit in range(n_units):
        t0 = float(unit)
        t1 = min(unit + 1.0, T)
        bps: list[float] = []
        if limit:
            # a crossing at tc kinks the forcing at tc+1 and, one derivative
            # milder each delay later, at tc+2, ...; split all of them so no
            # step spans a loss of smoothness
            for tc, _dir in crossings:
                for gen in range(1, 5):
                    bp = tc + float(gen)
                    if t0 + 1e-12 < bp < t1 - 1e-12:
                        bps.append(bp)
        bps = sorted(set(np.round(bps, 13)))
        merged = []
        for bp in bps:
            if not merged or bp - merged[-1] > 1e-10:
                merged.append(bp)
        sub_edges = [t0] + merged + [t1]

        u_ts = [np.asarray([t0])]
        u_xs = [np.asarray([x_cur])]
        u_dl: list[np.ndarray] = []
        u_dr: list[np.ndarray] = []
        u_side: list[np.ndarray] = []

        for s0, s1 in zip(sub_edges[:-1], sub_edges[1:]):
            span = s1 - s0
            M = max(1, int(math.ceil(span / h - 1e-9)))
            h2 = span / M
            stages = s0 + 0.5 * h2 * np.arange(2 * M + 1)
            nodes = stages[0::2]
            xi = delayed_eval(stages - 1.0, unit)
            if limit:
                mid_val = float(delayed_eval(np.asarray([0.5 * (s0 + s1) - 1.0]), unit)[0])
                above = mid_val > 1.0
            else:
                above = False
            if limit and above:
                vals = x_cur * np.exp(-rate * h2 * np.arange(1, M + 1))
                node_vals = np.concatenate([[x_cur], vals])
                derivs = -rate * node_vals
                sides = np.ones(M, dtype=np.int8)
            else:
                if limit:
                    B = gain * fb.clamped_power(xi)
                else:
                    B = gain * fb.value(np.maximum(xi, 0.0))
                A, c1, cm, c2 = _rk4_affine_coeffs(rate, h2)
                r = c1 * B[0:-1:2] + cm * B[1::2] + c2 * B[2::2]
                ys = lfilter([1.0], [1.0, -A], r, zi=np.asarray([A * x_cur]))[0]
                node_vals = np.concatenate([[x_cur], ys])
                derivs = -rate * node_vals + B[0::2]
                sides = np.zeros(M, dtype=np.int8)
            u_ts.append(nodes[1:])
            u_xs.append(node_vals[1:])
            u_dl.append(derivs[:-1])
            u_dr.append(derivs[1:])
            u_side.append(sides)
            x_cur = float(node_vals[-1])

        blk = {
            "ts": np.concatenate(u_ts),
            "xs": np.concatenate(u_xs),
            "dl": np.concatenate(u_dl),
            "dr": np.concatenate(u_dr),
            "side": np.concatenate(u_side),
        }
        if not np.all(np.isfinite(blk["xs"])):
            bad = blk["ts"][~np.isfinite(blk["xs"])][0]
            raise DDEIntegrationError(f"non-finite solution value near t = {bad:.6f}")
        unit_blocks.append(blk)
        ts_parts.append(blk["ts"][1:])
        xs_parts.append(blk["xs"][1:])
        dl_parts.append(blk["dl"])
        dr_parts.append(blk["dr"])
        side_parts.append(blk["side"])

        if limit:
            _scan_block_crossings(blk, rate, crossings, grazes)
            for tc, dirn in crossings:
                bp = tc + 1.0
                if t1 - 1e-12 < bp <= T + 1e-12 and all(abs(bp - e["t"]) > 1e-10 for e in events):
                    if bp <= t1 + 1.0 + 1e-9:
                        events.append({"t": bp, "kind": "forcing-off" if dirn == "up" else "forcing-on"})

    if n_units == 0:
        dl_parts = [np.empty(0)]
        dr_parts = [np.empty(0)]
        side_parts = [np.empty(0, dtype=np.int8)]

    traj = Trajectory(
        system=system,
        history=history,
        N=N,
        T=float(T),
        ts=np.concatenate(ts_parts),
        xs=np.concatenate(xs_parts),
        dl=np.concatenate(dl_parts),
        dr=np.concatenate(dr_parts),
        side=np.concatenate(side_parts),
        events=sorted(events, key=lambda e: e["t"]),
        crossings_log=sorted(crossings),
        grazes=grazes,
    )
    return traj


def _scan_block_crossings(blk: dict, rate: float, crossings: list, grazes: list) -> None:
    ts, xs, dl, dr, side = blk["ts"], blk["xs"], blk["dl"], blk["dr"], blk["side"]
    thetas = np.linspace(0.0, 1.0, 5)
    for i in range(len(ts) - 1):
        a, b = ts[i], ts[i + 1]
        hh = b - a
        if side[i] == 1:
            x0, x1 = xs[i], xs[i + 1]
            if (x0 - 1.0) * (x1 - 1.0) <= 0.0 and x0 > 1.0 >= x1:
                tc = a + math.log(x0) / rate
                _push_crossing(crossings, (tc, "down"))
            continue
        vals = _hermite_eval(thetas, hh, xs[i], dl[i], xs[i + 1], dr[i]) - 1.0
        if np.all(vals > 1e-9) or np.all(vals < -1e-9):
            continue
        if np.all(np.abs(vals) < 1e-9):
            continue  # riding exactly on the cutoff; handled by side decisions
        for j in range(4):
            va, vb = vals[j], vals[j + 1]
            if va * vb > 0.0:
                continue
            if va == 0.0 and vb == 0.0:
                continue
            lo, hi = thetas[j], thetas[j + 1]
            flo = va
            while (hi - lo) * hh > _BISECT_TOL:
                mid = 0.5 * (lo + hi)
                fm = float(_hermite_eval(np.asarray([mid]), hh, xs[i], dl[i], xs[i + 1], dr[i])[0]) - 1.0
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            tc = a + 0.5 * (lo + hi) * hh
            _push_crossing(crossings, (tc, "up" if vb > va else "down"))
        # tangential approach without sign change: flag sensitivity
        peak = float(np.max(-np.abs(vals)))
        if -1e-9 < peak < 0.0 and (xs[i] - 1.0) * (xs[i + 1] - 1.0) > 0.0:
            grazes.append(float(0.5 * (a + b)))


def _push_crossing(crossings: list, item: tuple) -> None:
    tc, dirn = item
    for t_old, _ in crossings:
        if abs(t_old - tc) < 1e-10:
            return
    crossings.append((tc, dirn))
    crossings.sort()


def segment_at(traj: Trajectory, t: float) -> HistoryFunction:
    """The state at time t: the function ``s -> x(t+s)`` on [-1, 0]."""
    if not 0.0 <= t <= traj.T + 1e-12:
        raise ValueError("segment time outside [0, T]")
    if t == 0.0:
        return traj.history
    return HistoryFunction.from_callable(
        lambda s: traj.eval_many(np.asarray(t + np.asarray(s, dtype=float))),
        kind="segment",
        t=t,
    )


@dataclass(frozen=True)
class BoundsReport:
    max_value: float
    min_value: float
    lipschitz: float          # max slope magnitude over [1, T]
    band: tuple
    band_ok: bool
    lipschitz_bound: float
    lipschitz_ok: bool


def check_bounds(traj: Trajectory, band_tol: float = 1e-9) -> BoundsReport:
    """Extremes, empirical unit-window slope, and the invariant-band flags.

    The expected band is [0, gain/rate] for the limit system and
    [0, 2*gain/rate] for the smooth one, with slope bounds 2*gain and 8*gain.
    """
    sys_ = traj.system
    hi = 2.0 * sys_.gain / sys_.rate if sys_.kind == "smooth" else sys_.gain / sys_.rate
    lip_bound = 8.0 * sys_.gain if sys_.kind == "smooth" else 2.0 * sys_.gain
    vmax = float(np.max(traj.xs))
    vmin = float(np.min(traj.xs))
    mask = traj.ts[:-1] >= 1.0 - 1e-12
    if np.any(mask):
        lip = float(max(np.max(np.abs(traj.dl[mask])), np.max(np.abs(traj.dr[mask]))))
    else:
        lip = 0.0
    return BoundsReport(
        max_value=vmax,
        min_value=vmin,
        lipschitz=lip,
        band=(0.0, hi),
        band_ok=bool(vmin >= -band_tol and vmax <= hi + band_tol),
        lipschitz_bound=lip_bound,
        lipschitz_ok=bool(lip <= lip_bound + band_tol),
    )


@dataclass(frozen=True)
class OrbitClassification:
    kind: str  # CONVERGES_TO | PERIODIC | BOUNDED_UNRESOLVED
    value: Optional[float] = None
    period: Optional[float] = None
    evidence: dict = field(default_factory=dict)


def omega_diagnose(traj: Trajectory, window: float = 20.0, tol: float = 1e-6) -> OrbitClassification:
    """Numerical verdict on the tail of a trajectory (never a proof).

    CONVERGES_TO(v) when the last window oscillates less than ``tol`` around
    a stationary value; PERIODIC(w) when the level-return test finds a period;
    BOUNDED_UNRESOLVED otherwise.
    """
    if traj.T < 3.0 * window:
        raise ValueError("horizon too short for the requested window")
    tt = np.linspace(traj.T - window, traj.T, 2001)
    vals = traj.eval_many(tt)
    osc = float(np.max(vals) - np.min(vals))
    if osc < tol:
        value = 0.5 * float(np.max(vals) + np.min(vals))
        from .spectrum import stationary_points

        ceiling = 0.999 if traj.system.kind == "limit" else max(2.0, value * 1.5)
        cands = [p.value for p in stationary_points(traj.system, ceiling).points]
        best = min(cands, key=lambda c: abs(c - value))
        if abs(best - value) < max(tol, 10 * osc + 1e-12):
            return OrbitClassification("CONVERGES_TO", value=best, evidence={"measured": value, "osc": osc})
        return OrbitClassification("BOUNDED_UNRESOLVED", evidence={"measured": value, "osc": osc})
    from .periodic import detect_periodic

    transient = max(0.0, traj.T - 3.0 * window)
    orbit = detect_periodic(traj, level=1.0, transient=transient)
    if orbit is None:
        lo, hi = float(np.min(vals)), float(np.max(vals))
        orbit = detect_periodic(traj, level=0.5 * (lo + hi), transient=transient)
    if orbit is not None:
        return OrbitClassification("PERIODIC", period=orbit.omega, evidence={"residual": orbit.residual})
    return OrbitClassification("BOUNDED_UNRESOLVED", evidence={"osc": osc})


def _forcing_on_piece(traj: Trajectory, s: np.ndarray, piece_idx: np.ndarray) -> np.ndarray:
    """gain * F(x(s-1)) respecting the stored one-sided forcing flags."""
    sys_ = traj.system
    xi = traj.eval_many(s - 1.0)
    if sys_.kind == "limit":
        below = sys_.gain * sys_.feedback.clamped_power(xi)
        return np.where(traj.side[piece_idx] == 1, 0.0, below)
    return sys_.gain * sys_.feedback.value(np.maximum(xi, 0.0))


def integral_residual(traj: Trajectory, tau: float, t: float) -> float:
    """Defect of the variation-of-constants identity between ``tau`` and ``t``.

    The convolution integral is evaluated by fixed Gauss panels on the dense
    mesh pieces, which never straddle a forcing switch.
    """
    if not 0.0 <= tau < t <= traj.T + 1e-12:
        raise ValueError("need 0 <= tau < t <= T")
    rate = traj.system.rate
    i0 = np.searchsorted(traj.ts, tau, side="right") - 1
    i1 = np.searchsorted(traj.ts, t, side="left") - 1
    total = 0.0
    for i in range(max(i0, 0), min(i1, len(traj.ts) - 2) + 1):
        a = max(traj.ts[i], tau)
        b = min(traj.ts[i + 1], t)
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        s = mid + half * _GAUSS_NODES
        vals = _forcing_on_piece(traj, s, np.full(s.shape, i, dtype=int)) * np.exp(-rate * (t - s))
        total += half * float(np.dot(_GAUSS_WEIGHTS, vals))
    lhs = traj.eval(t)
    rhs = math.exp(-rate * (t - tau)) * traj.eval(tau) + total
    return abs(lhs - rhs)
