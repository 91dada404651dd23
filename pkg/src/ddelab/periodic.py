"""Periodic orbits: detection, Floquet diagnostics, and connection diagrams.

Orbit detection is a level-crossing return test on a long trajectory: gaps
between increasing crossings propose a period, the state-space return
residual confirms it, and sub-multiples are ruled out.  Floquet multipliers
come from a dense discretization of the linearized period map: each hat
function on a segment mesh is propagated through the variational equation
along the orbit and the resulting matrix is eigensolved.

Small orbits born near the interior equilibrium are of saddle type (the
equilibrium's strong real instability persists as a Floquet multiplier above
one), so they cannot be reached by forward simulation; they are computed by
a damped Newton iteration on the period-map fixed point, seeded from the
crossing-pair eigendirection.  The connection diagram assembles the branch
fates, the attractor evidence, and the sampled fates of the saddle orbit's
unstable directions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .dde import System, Trajectory, _rk4_affine_coeffs, integrate, segment_at
from .history import HistoryFunction
from .nonlinearity import Hill
from .spectrum import HopfData, hopf_data, stationary_points
from .threshold import HITS_ONE, IN_D, UNRESOLVED, classify_zd, envelopes

__all__ = [
    "PeriodicOrbit",
    "contraction_factors",
    "FloquetReport",
    "AttractionReport",
    "HopfSearchResult",
    "ConnectionDiagram",
    "detect_periodic",
    "monodromy_multipliers",
    "verify_attraction",
    "hopf_orbit_search",
    "connection_diagram",
    "orbit_distance",
]

_SEG_MESH = np.linspace(-1.0, 0.0, 201)


@dataclass
class PeriodicOrbit:
    """One periodic orbit: anchor segment, period, and sampled shape."""

    q0: HistoryFunction
    omega: float
    vmin: float
    vmax: float
    level: float
    direction: str
    anchor: float
    residual: float
    samples_t: np.ndarray = field(repr=False)
    samples_x: np.ndarray = field(repr=False)
    segment_bank: np.ndarray = field(repr=False)  # (m, len(_SEG_MESH)) segments over one period
    segment_eval: object = field(repr=False, default=None)  # phase -> exact segment values

    @property
    def amplitude(self) -> float:
        return 0.5 * (self.vmax - self.vmin)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "min": self.vmin,
            "max": self.vmax,
            "level": self.level,
            "direction": self.direction,
            "residual": self.residual,
        }


def _segment_values(traj: Trajectory, t: float) -> np.ndarray:
    return traj.eval_many(t + _SEG_MESH)


def _segment_distance(traj: Trajectory, t_a: float, t_b: float) -> float:
    return float(np.max(np.abs(_segment_values(traj, t_a) - _segment_values(traj, t_b))))


def detect_periodic(
    traj: Trajectory,
    level: float = 1.0,
    transient: Optional[float] = None,
    gap_rtol: float = 1e-4,
    resid_tol: float = 1e-6,
) -> Optional[PeriodicOrbit]:
    """Detect a periodic orbit in the tail of a trajectory.

    Increasing crossings of ``level`` after the transient propose the period
    (directly if the gaps agree to ``gap_rtol`` relative, otherwise by
    constant multi-crossing return lags).  The candidate must pass the
    segment-return residual at ``resid_tol``; sub-multiples that also pass
    replace it.  Returns None when fewer than 4 crossings exist or the gaps
    drift.
    """
    transient = 0.5 * traj.T if transient is None else transient
    t_hi = traj.T - 1.0
    ups_all = [t for t, _ in traj.crossings(level, "up", t_lo=transient, t_hi=t_hi)]
    if len(ups_all) < 4:
        return None
    ups_all = np.asarray(ups_all)
    # a non-return differs on the scale of the oscillation amplitude, a true
    # return sits at the integration noise floor; period structure is decided
    # at a coarse tolerance in between, the final gate below is strict
    coarse = max(100.0 * resid_tol, 1e-3)
    omega = None
    anchor = None
    # long transients can poison the front of the window; retry on later parts
    for skip in (0.0, 1.0 / 3.0, 0.5, 2.0 / 3.0):
        ups = ups_all[int(skip * len(ups_all)):]
        if len(ups) < 4:
            break
        for lag in range(1, len(ups) // 2 + 1):
            laps = ups[lag:] - ups[:-lag]
            med = float(np.median(laps))
            if med <= 0:
                continue
            if float(np.max(laps) - np.min(laps)) <= gap_rtol * med:
                a = float(ups[min(int(0.7 * (len(ups) - 1)), len(ups) - 2)])
                while a + med > traj.T and a > ups[0]:
                    i = int(np.searchsorted(ups, a)) - 1
                    if i < 0:
                        break
                    a = float(ups[i])
                if a + med <= traj.T and _segment_distance(traj, a, a + med) < coarse:
                    omega, anchor = med, a
                    break
        if omega is not None:
            break
    if omega is None:
        return None
    changed = True
    while changed:
        changed = False
        for mdiv in (2, 3):
            cand = omega / mdiv
            if cand > 0.05 and anchor + cand <= traj.T and _segment_distance(traj, anchor, anchor + cand) < coarse:
                omega = cand
                changed = True
                break
    # a residual that only passes at one anchor is floor luck on a thin
    # torus; require the return to close at two anchors a period apart
    resid = _segment_distance(traj, anchor, anchor + omega)
    if anchor - omega >= float(ups[0]):
        resid = max(resid, _segment_distance(traj, anchor - omega, anchor))
    elif anchor + 2 * omega <= traj.T:
        resid = max(resid, _segment_distance(traj, anchor + omega, anchor + 2 * omega))
    if resid >= resid_tol:
        return None
    ts = np.linspace(anchor, anchor + omega, max(256, int(64 * omega)), endpoint=False)
    xs = traj.eval_many(ts)
    bank = _build_bank(traj.eval_many, anchor, omega)
    return PeriodicOrbit(
        q0=segment_at(traj, anchor),
        omega=float(omega),
        vmin=float(np.min(xs)),
        vmax=float(np.max(xs)),
        level=level,
        direction="up",
        anchor=anchor,
        residual=resid,
        samples_t=ts - anchor,
        samples_x=xs,
        segment_bank=bank,
        segment_eval=lambda tau: traj.eval_many(anchor + tau + _SEG_MESH),
    )


def _build_bank(eval_many, anchor: float, omega: float) -> np.ndarray:
    rows = int(np.clip(200.0 * omega, 400, 8000))
    bank_t = np.linspace(anchor, anchor + omega, rows, endpoint=False)
    times = bank_t[:, None] + _SEG_MESH[None, :]
    return eval_many(times.ravel()).reshape(rows, _SEG_MESH.size)


def orbit_distance(segment_values: np.ndarray, orbit: PeriodicOrbit) -> float:
    """One-sided distance: sup over the segment mesh, min over the orbit phase.

    A coarse pass over the stored rows locates the phase; when the orbit
    carries an exact segment evaluator the minimum is refined by ternary
    search on the phase (the segment shape is too curved in the transition
    layers for row interpolation to reach small distances).
    """
    bank = orbit.segment_bank
    diffs = np.max(np.abs(bank - segment_values[None, :]), axis=1)
    m = int(np.argmin(diffs))
    best = float(diffs[m])
    spacing = orbit.omega / len(bank)
    if orbit.segment_eval is None:
        theta = np.linspace(0.0, 1.0, 65)[:, None]
        for a, b in ((bank[m - 1], bank[m]), (bank[m], bank[(m + 1) % len(bank)])):
            blend = (1.0 - theta) * a[None, :] + theta * b[None, :]
            best = min(best, float(np.min(np.max(np.abs(blend - segment_values[None, :]), axis=1))))
        return best

    def dist(tau: float) -> float:
        tau = tau % orbit.omega
        return float(np.max(np.abs(orbit.segment_eval(tau) - segment_values)))

    lo = m * spacing - spacing
    hi = m * spacing + spacing
    for _ in range(60):
        third = (hi - lo) / 3.0
        if dist(lo + third) <= dist(hi - third):
            hi = hi - third
        else:
            lo = lo + third
        if hi - lo < 1e-12:
            break
    return min(best, dist(0.5 * (lo + hi)))


# ---------------------------------------------------------------------------
# linearized period map
# ---------------------------------------------------------------------------

def _integrate_variational(
    rate: float,
    beta_stages: list,
    v0_mesh: np.ndarray,
    v0_vals: np.ndarray,
    omega: float,
    n_steps_per_unit: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Propagate ``v' = -rate v + beta(t) v(t-1)`` from a mesh-sampled segment.

    ``beta_stages[j]`` holds the coefficient at the stage times of unit
    interval j.  Returns nodes, values and one-sided derivatives.
    """
    h = 1.0 / n_steps_per_unit
    n_units = int(math.ceil(omega - 1e-12))
    ts_all = [np.asarray([0.0])]
    vs_all = [np.asarray([float(np.interp(0.0, v0_mesh, v0_vals))])]
    dl_all: list[np.ndarray] = []
    dr_all: list[np.ndarray] = []
    blocks: list[tuple] = []
    v_cur = vs_all[0][0]
    for unit in range(n_units):
        t0 = float(unit)
        t1 = min(unit + 1.0, omega)
        span = t1 - t0
        M = max(1, int(math.ceil(span / h - 1e-9)))
        h2 = span / M
        stages = t0 + 0.5 * h2 * np.arange(2 * M + 1)
        dstage = stages - 1.0
        if unit == 0:
            v_del = np.interp(np.clip(dstage, -1.0, 0.0), v0_mesh, v0_vals)
        else:
            bts, bvs, bdl, bdr = blocks[unit - 1]
            idx = np.clip(np.searchsorted(bts, dstage, side="right") - 1, 0, len(bts) - 2)
            hh = bts[idx + 1] - bts[idx]
            theta = np.clip((dstage - bts[idx]) / hh, 0.0, 1.0)
            t2 = theta * theta
            t3 = t2 * theta
            v_del = (
                bvs[idx] * (2 * t3 - 3 * t2 + 1)
                + bdl[idx] * hh * (t3 - 2 * t2 + theta)
                + bvs[idx + 1] * (-2 * t3 + 3 * t2)
                + bdr[idx] * hh * (t3 - t2)
            )
        B = beta_stages[unit] * v_del
        A, c1, cm, c2 = _rk4_affine_coeffs(rate, h2)
        r = c1 * B[0:-1:2] + cm * B[1::2] + c2 * B[2::2]
        ys = lfilter([1.0], [1.0, -A], r, zi=np.asarray([A * v_cur]))[0]
        node_vals = np.concatenate([[v_cur], ys])
        derivs = -rate * node_vals + B[0::2]
        nodes = stages[0::2]
        blocks.append((nodes, node_vals, derivs[:-1], derivs[1:]))
        ts_all.append(nodes[1:])
        vs_all.append(node_vals[1:])
        dl_all.append(derivs[:-1])
        dr_all.append(derivs[1:])
        v_cur = float(node_vals[-1])
    return (
        np.concatenate(ts_all),
        np.concatenate(vs_all),
        np.concatenate(dl_all) if dl_all else np.empty(0),
        np.concatenate(dr_all) if dr_all else np.empty(0),
    )


def _eval_piecewise(ts, vs, dl, dr, t):
    t = np.asarray(t, dtype=float)
    idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
    hh = ts[idx + 1] - ts[idx]
    theta = np.clip((t - ts[idx]) / hh, 0.0, 1.0)
    t2 = theta * theta
    t3 = t2 * theta
    return (
        vs[idx] * (2 * t3 - 3 * t2 + 1)
        + dl[idx] * hh * (t3 - 2 * t2 + theta)
        + vs[idx + 1] * (-2 * t3 + 3 * t2)
        + dr[idx] * hh * (t3 - t2)
    )


def _beta_stage_table(system: System, base: Trajectory, omega: float, n_steps_per_unit: int) -> list:
    """gain * F'(y(t-1)) sampled at every stage time of each unit interval."""
    h = 1.0 / n_steps_per_unit
    out = []
    n_units = int(math.ceil(omega - 1e-12))
    for unit in range(n_units):
        t0 = float(unit)
        t1 = min(unit + 1.0, omega)
        span = t1 - t0
        M = max(1, int(math.ceil(span / h - 1e-9)))
        h2 = span / M
        stages = t0 + 0.5 * h2 * np.arange(2 * M + 1)
        y_del = base.eval_many(stages - 1.0)
        out.append(system.gain * system.feedback.deriv(np.maximum(y_del, 0.0)))
    return out


def _period_map_matrix(system: System, q0: HistoryFunction, omega: float, N: int, N_int: int) -> tuple[np.ndarray, Trajectory]:
    """Dense (N+1)x(N+1) approximation of the linearized period map."""
    base = integrate(system, q0, omega, N=N_int)
    beta = _beta_stage_table(system, base, omega, N_int)
    mesh = np.linspace(-1.0, 0.0, N + 1)
    M = np.empty((N + 1, N + 1))
    end_times = omega + mesh
    for i in range(N + 1):
        e = np.zeros(N + 1)
        e[i] = 1.0
        ts, vs, dl, dr = _integrate_variational(system.rate, beta, mesh, e, omega, N_int)
        past = end_times <= 0.0
        col = np.empty(N + 1)
        if np.any(past):
            col[past] = np.interp(end_times[past], mesh, e)
        col[~past] = _eval_piecewise(ts, vs, dl, dr, end_times[~past])
        M[:, i] = col
    return M, base


@dataclass(frozen=True)
class FloquetReport:
    mesh_N: int
    multipliers: tuple          # leading eigenvalues as complex numbers, |.| descending
    trivial_error: float        # distance of the closest eigenvalue to 1
    leading_nontrivial: float   # largest magnitude excluding the trivial one
    unstable_multiplier: Optional[float] = None
    unstable_eigvec: Optional[np.ndarray] = field(default=None, repr=False)
    mesh: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "mesh_N": self.mesh_N,
            "multipliers": [[z.real, z.imag] for z in self.multipliers],
            "trivial_error": self.trivial_error,
            "leading_nontrivial": self.leading_nontrivial,
            "unstable_multiplier": self.unstable_multiplier,
        }


def monodromy_multipliers(system: System, orbit: PeriodicOrbit, N: int = 200, N_int: Optional[int] = None) -> FloquetReport:
    """Floquet multipliers of an orbit from the discretized period map.

    Hat functions on a uniform segment mesh are propagated through the
    variational equation over one period; the resulting matrix is eigensolved
    densely.  Requires the smooth system.  ``N_int`` (the integration mesh)
    defaults to a value resolving the Hill transition layer, which narrows
    like 1/n.
    """
    if system.kind != "smooth":
        raise ValueError("Floquet analysis needs the differentiable family")
    if N < 20:
        raise ValueError("mesh too coarse; need N >= 20")
    N_int = max(400, 2 * N, 4 * int(system.feedback.n)) if N_int is None else N_int
    M, _ = _period_map_matrix(system, orbit.q0, orbit.omega, N, N_int)
    eig, vecs = np.linalg.eig(M)
    order = np.argsort(-np.abs(eig))
    eig, vecs = eig[order], vecs[:, order]
    trivial_idx = int(np.argmin(np.abs(eig - 1.0)))
    trivial_err = float(np.abs(eig[trivial_idx] - 1.0))
    others = np.abs(np.delete(eig, trivial_idx))
    leading_nt = float(np.max(others)) if others.size else 0.0
    lam_u = None
    psi_u = None
    for idx in range(len(eig)):
        z = eig[idx]
        if idx != trivial_idx and abs(z.imag) < 1e-8 and z.real > 1.0 + 1e-9:
            v = np.real(vecs[:, idx])
            if np.mean(v) < 0:
                v = -v
            lam_u = float(z.real)
            psi_u = v / np.max(np.abs(v))
            break
    return FloquetReport(
        mesh_N=N,
        multipliers=tuple(eig[: min(12, len(eig))]),
        trivial_error=trivial_err,
        leading_nontrivial=leading_nt,
        unstable_multiplier=lam_u,
        unstable_eigvec=psi_u,
        mesh=np.linspace(-1.0, 0.0, N + 1),
    )


def contraction_factors(
    system: System,
    orbit: PeriodicOrbit,
    periods: int = 6,
    eps: float = 1e-4,
    N: int = 400,
    seed: int = 0,
) -> list:
    """Per-period contraction of transversal perturbations, measured dynamically.

    A finite-difference power iteration on the period map: integrate the orbit
    segment and a bumped copy over one period, difference, project out the
    phase direction, renormalize, repeat.  Long multi-bump orbits defeat the
    dense variational matrix (spike-passage errors compound), while the
    nonlinear integrator stays accurate; the factors returned here bound the
    leading nontrivial multiplier magnitude at the integrator's noise level.
    """
    mesh = np.linspace(-1.0, 0.0, 2001)
    q_vals = orbit.segment_eval(0.0) if orbit.segment_eval is not None else None
    if q_vals is None:
        raise ValueError("orbit carries no exact segment evaluator")
    q_dense = np.interp(mesh, _SEG_MESH, q_vals)
    # phase direction: derivative of the segment family in its phase
    dtau = 1e-4 * orbit.omega
    q_shift = np.interp(mesh, _SEG_MESH, orbit.segment_eval(dtau))
    phase = (q_shift - q_dense) / dtau
    phase /= np.linalg.norm(phase)

    # linear interpolation is exactly additive in the node values, so the
    # orbit-sampling error cancels in the difference quotient
    ref = integrate(system, HistoryFunction.from_samples_linear(mesh, q_dense), orbit.omega, N=N)
    ref_end = ref.eval_many(orbit.omega + mesh)

    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, size=mesh.size)
    v -= np.dot(v, phase) * phase
    v /= np.max(np.abs(v))
    factors = []
    for _ in range(periods):
        hist = HistoryFunction.from_samples_linear(mesh, np.maximum(q_dense + eps * v, 0.0))
        end = integrate(system, hist, orbit.omega, N=N).eval_many(orbit.omega + mesh)
        delta = (end - ref_end) / eps
        delta -= np.dot(delta, phase) * phase
        g = float(np.max(np.abs(delta)))
        factors.append(g)
        if g < 1e-6:
            break
        v = delta / g
    return factors


@dataclass(frozen=True)
class AttractionReport:
    trials: int
    passed: int
    failures: tuple  # (trial index, final distance)
    eps: float
    T: float


def verify_attraction(
    system: System,
    orbit: PeriodicOrbit,
    eps: float,
    trials: int = 20,
    T: float = 120.0,
    seed: int = 0,
    dist_tol: float = 1e-3,
) -> AttractionReport:
    """Spot-check that histories above ``1 + eps`` settle on the orbit.

    Random shape-preserving histories with values in [1 + eps, 2*gain/rate]
    are integrated for ``T``; each final segment must come within
    ``dist_tol`` of the stored orbit samples.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    hi = 2.0 * system.gain / system.rate
    failures = []
    for trial in range(trials):
        nodes = np.linspace(-1.0, 0.0, int(rng.integers(6, 14)))
        vals = rng.uniform(1.0 + eps, hi, size=nodes.size)
        hist = HistoryFunction.from_samples(nodes, vals)
        traj = integrate(system, hist, T, N=200)
        dist = orbit_distance(_segment_values(traj, traj.T), orbit)
        if dist >= dist_tol:
            failures.append((trial, dist))
    return AttractionReport(trials=trials, passed=trials - len(failures), failures=tuple(failures), eps=eps, T=T)


# ---------------------------------------------------------------------------
# small orbits near the interior equilibrium
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HopfSearchResult:
    orbit: PeriodicOrbit
    alpha: float
    system: System
    data: HopfData
    amplitude: float      # max |q - equilibrium|
    newton_residual: float


def _newton_periodic(
    system: System,
    u0: np.ndarray,
    mesh: np.ndarray,
    omega0: float,
    ref_dphase: np.ndarray,
    center: float,
    max_iter: int = 30,
    tol: float = 1e-10,
    N_int: int = 200,
) -> Optional[tuple]:
    """Damped Newton solve of ``segment-map(u, omega) = u`` with a phase pin."""
    N = len(mesh) - 1
    u = u0.copy()
    omega = omega0
    w = np.full(N + 1, 1.0 / N)
    w[0] *= 0.5
    w[-1] *= 0.5
    for _ in range(max_iter):
        hist = HistoryFunction.from_samples(mesh, u)
        base = integrate(system, hist, omega, N=N_int)
        Su = base.eval_many(omega + mesh)
        R = Su - u
        phase = float(np.dot(w * ref_dphase, u - center))
        res = max(float(np.max(np.abs(R))), abs(phase))
        if res < tol:
            return u, omega, base, res
        Mmat, _ = _period_map_matrix(system, hist, omega, N, N_int)
        xi_end = base.eval_many(np.maximum(omega + mesh - 1.0, -1.0 + 1e-12))
        dS_domega = -system.rate * Su + system.gain * system.feedback.value(np.maximum(xi_end, 0.0))
        J = np.zeros((N + 2, N + 2))
        J[: N + 1, : N + 1] = Mmat - np.eye(N + 1)
        J[: N + 1, N + 1] = dS_domega
        J[N + 1, : N + 1] = w * ref_dphase
        rhs = np.concatenate([-R, [-phase]])
        try:
            step = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            return None
        cap = 0.25 * max(1e-3, float(np.max(np.abs(u - center))) + 1e-3)
        scale = min(1.0, cap / (float(np.max(np.abs(step[: N + 1]))) + 1e-30))
        u = u + scale * step[: N + 1]
        omega = omega + scale * float(step[N + 1])
        if not (0.05 < omega < 50.0) or not np.all(np.isfinite(u)):
            return None
    return None


def hopf_orbit_search(
    c: float,
    d: float,
    k: float,
    n: int,
    j: int = 1,
    alphas=(-0.02, 0.02, -0.05, 0.05, -0.1, 0.1, -0.15, 0.15, -0.2, 0.2),
    amp_guesses=(0.03, 0.06, 0.1),
    mesh_N: int = 100,
    amp_cap: float = 0.2,
    tol: float = 1e-10,
) -> Optional[HopfSearchResult]:
    """Scan the detuning grid for a small orbit around the interior equilibrium.

    At each ``alpha`` the parameters are ``(1+alpha) * beta * (c, d)``; the
    period-map fixed point is solved by Newton, seeded on the crossing-pair
    eigendirection ``cos(theta_n * s)`` with period guess ``2 pi / theta_n``.
    The orbit is a saddle (the strong real instability survives), so forward
    simulation cannot find it; the Newton solve replaces it.  Returns the
    first success with amplitude below ``amp_cap``; None when the whole grid
    yields only the equilibrium.
    """
    mesh = np.linspace(-1.0, 0.0, mesh_N + 1)
    for alpha in alphas:
        hd = hopf_data(c, d, k, n, j=j, alpha=alpha)
        system = System.smooth(hd.a_n, hd.b_n, k=k, n=n)
        xi = stationary_points(system, 0.9).interior().value
        ref_dphase = -np.sin(hd.theta_n * mesh) * hd.theta_n
        for A0 in amp_guesses:
            u0 = xi + A0 * np.cos(hd.theta_n * mesh)
            got = _newton_periodic(system, u0, mesh, hd.omega_guess, ref_dphase, xi, tol=tol)
            if got is None:
                continue
            u, omega, base, res = got
            amp = float(np.max(np.abs(u - xi)))
            if amp < 1e-4 or amp > amp_cap:
                continue
            if not 0.5 * hd.omega_guess < omega < 2.0 * hd.omega_guess:
                continue
            orbit = _orbit_from_solution(system, u, mesh, omega, base, level=xi, resid=res)
            return HopfSearchResult(
                orbit=orbit, alpha=alpha, system=system, data=hd,
                amplitude=amp, newton_residual=res,
            )
    return None


def _orbit_from_solution(system, u, mesh, omega, base: Trajectory, level: float, resid: float) -> PeriodicOrbit:
    ts = np.linspace(0.0, omega, 256, endpoint=False)
    xs = base.eval_many(ts)
    bank = _build_bank(lambda t: base.eval_many(np.clip(t, -1.0, base.T)), 0.0, omega)
    return PeriodicOrbit(
        q0=HistoryFunction.from_samples(mesh, u),
        omega=float(omega),
        vmin=float(np.min(xs)),
        vmax=float(np.max(xs)),
        level=level,
        direction="up",
        anchor=0.0,
        residual=resid,
        samples_t=ts,
        samples_x=xs,
        segment_bank=bank,
        segment_eval=lambda tau: base.eval_many(np.clip(tau + _SEG_MESH, -1.0, base.T)),
    )


# ---------------------------------------------------------------------------
# connection diagram
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionDiagram:
    c: float
    d: float
    n: int
    regime: str                     # "below" | "above" | "critical-or-unknown"
    regime_evidence: dict
    minus_limit: str                # "ZERO" | "UNRESOLVED"
    minus_evidence: dict
    plus_limit: str                 # "ZERO" | "PERIODIC" | "ATTRACTOR" | "UNRESOLVED"
    plus_evidence: dict
    hopf: Optional[dict] = None
    unresolved: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "c": self.c, "d": self.d, "n": self.n,
            "regime": self.regime, "regime_evidence": self.regime_evidence,
            "minus": {"limit": self.minus_limit, **self.minus_evidence},
            "plus": {"limit": self.plus_limit, **self.plus_evidence},
            "unresolved": list(self.unresolved),
        }
        if self.hopf is not None:
            out["hopf"] = self.hopf
        return out


def _fate_of_trajectory(traj: Trajectory, orbit: Optional[PeriodicOrbit], zero_tol: float = 1e-3) -> tuple[str, dict]:
    tail = traj.eval_many(np.linspace(traj.T - 5.0, traj.T, 501))
    if float(np.max(np.abs(tail))) < zero_tol:
        return "ZERO", {"tail_max": float(np.max(np.abs(tail)))}
    if orbit is not None:
        dist = orbit_distance(_segment_values(traj, traj.T), orbit)
        if dist < 1e-3:
            return "ORBIT", {"distance": dist}
    det = detect_periodic(traj, level=1.0, transient=max(0.0, traj.T - 60.0), resid_tol=1e-4)
    if det is not None:
        return "ORBIT", {"omega": det.omega}
    return "UNRESOLVED", {"tail_max": float(np.max(np.abs(tail)))}


def connection_diagram(
    c: float,
    d: float,
    k: float,
    n: int,
    dstar: Optional[float] = None,
    delta: float = 0.05,
    with_hopf: bool = False,
    j: int = 1,
    hopf_alphas=None,
    N: int = 200,
    N_orbit: Optional[int] = None,
    T_orbit: float = 500.0,
    seed_disk: float = 5e-3,
    T_fate: float = 250.0,
) -> ConnectionDiagram:
    """Assemble the fate of the leading unstable directions at one parameter set.

    ``dstar`` may be supplied from a previous bisection; otherwise the regime
    is certified by a single probe classification (contact with the cutoff
    means the gain is at or above critical).  The minus branch must collapse
    to zero; the plus branch collapses below critical and reaches a periodic
    orbit or a band-confined attractor above.  With ``with_hopf`` the small
    saddle orbit is computed and the fates of its unstable-disk samples are
    recorded.
    """
    from .manifold import shoot_branch

    if N_orbit is None:
        N_orbit = max(400, 4 * int(n))
    unresolved: list[str] = []
    if dstar is not None:
        regime = "above" if d > dstar * (1 + 1e-3) else ("below" if d < dstar * (1 - 1e-3) else "critical-or-unknown")
        regime_ev = {"dstar": dstar, "source": "supplied"}
    else:
        cls = classify_zd(c, d, k=k)
        if cls.verdict == HITS_ONE:
            regime, regime_ev = "above", {"probe": cls.verdict, "tau0": cls.tau0}
        elif cls.verdict == IN_D:
            regime, regime_ev = "below", {"probe": cls.verdict}
        else:
            regime, regime_ev = "critical-or-unknown", {"probe": cls.verdict}
            unresolved.append("regime")

    system = System.smooth(c, d, k=k, n=n)

    minus = shoot_branch(system, "minus", T=max(40.0, 16.0 / c), N=N)
    tail = minus.eval_many(np.linspace(minus.domain[1] - 3.0, minus.domain[1] - 0.5, 301))
    minus_limit = "ZERO" if float(np.max(np.abs(tail))) < 1e-6 else "UNRESOLVED"
    minus_ev = {"tail_max": float(np.max(np.abs(tail)))}
    if minus_limit != "ZERO":
        unresolved.append("minus")

    plus_ev: dict = {}
    if regime == "below":
        plus = shoot_branch(system, "plus", T=max(60.0, 20.0 / c), N=N)
        ptail = plus.eval_many(np.linspace(plus.domain[1] - 3.0, plus.domain[1] - 0.5, 301))
        if float(np.max(np.abs(ptail))) < 1e-5:
            plus_limit = "ZERO"
            plus_ev = {"tail_max": float(np.max(np.abs(ptail)))}
        else:
            plus_limit = "UNRESOLVED"
            plus_ev = {"tail_max": float(np.max(np.abs(ptail)))}
            unresolved.append("plus")
    else:
        # the fine mesh keeps the return residual of converged orbits well
        # below the detection tolerance for sharply kinked Hill families
        orbit = None
        plus = None
        detect_mesh = N_orbit
        for horizon, n_mesh in (
            (T_orbit, N_orbit),
            (2 * T_orbit, N_orbit),
            (2 * T_orbit, 2 * N_orbit),
            (2 * T_orbit, 4 * N_orbit),
        ):
            plus = shoot_branch(system, "plus", T=horizon, N=n_mesh)
            orbit = detect_periodic(plus.traj, level=1.0, transient=plus.shift + 0.6 * horizon)
            if orbit is not None:
                detect_mesh = n_mesh
                break
        t2 = plus.landmarks.t2
        band_lo = float(np.min(plus.eval_many(np.linspace(0.0, plus.domain[1] - 0.5, 4001))))
        band_hi = float(np.max(plus.eval_many(np.linspace(0.0, plus.domain[1] - 0.5, 4001))))
        plus_ev = {"band": [band_lo, band_hi], "t2": t2}
        flo = None
        contraction = None
        if orbit is not None:
            flo = monodromy_multipliers(system, orbit, N=min(200, max(100, N)), N_int=detect_mesh)
            if flo.trivial_error > 0.05:
                # the dense variational matrix degrades on long multi-bump
                # orbits; fall back to the dynamical contraction measurement
                factors = contraction_factors(system, orbit, N=detect_mesh)
                contraction = max(factors[-2:]) if len(factors) > 1 else factors[0]
                if contraction >= 1.0:
                    # neither diagnostic trusts the orbit (thin-torus case)
                    orbit, flo = None, None
        if orbit is not None:
            plus_limit = "PERIODIC"
            plus_ev.update({"omega": orbit.omega, "orbit_min": orbit.vmin, "orbit_max": orbit.vmax,
                            "floquet_trivial_error": flo.trivial_error})
            if contraction is None:
                plus_ev["floquet_leading_nontrivial"] = flo.leading_nontrivial
                plus_ev["floquet_method"] = "variational-matrix"
            else:
                plus_ev["floquet_leading_nontrivial"] = contraction
                plus_ev["floquet_method"] = "dynamic-power-iteration"
            plus_ev["_orbit"] = orbit
            plus_ev["_floquet"] = flo
        else:
            hits = _recurrence_gap(plus, delta, t2)
            plus_limit = "ATTRACTOR"
            plus_ev.update({"recurrence_max_gap": hits})
            if hits is None:
                unresolved.append("plus-recurrence")

    hopf_block = None
    if with_hopf:
        hopf_block = _hopf_block(c, d, k, n, j, seed_disk, T_fate, max(N, N_orbit), hopf_alphas)
        if hopf_block.get("orbit") is None:
            unresolved.append("hopf")

    return ConnectionDiagram(
        c=c, d=d, n=n,
        regime=regime, regime_evidence=regime_ev,
        minus_limit=minus_limit, minus_evidence=minus_ev,
        plus_limit=plus_limit, plus_evidence=plus_ev,
        hopf=hopf_block,
        unresolved=tuple(unresolved),
    )


def _recurrence_gap(plus, delta: float, t2: Optional[float]) -> Optional[float]:
    if t2 is None:
        return None
    tt = np.linspace(t2, plus.domain[1] - 0.5, 20001)
    vals = plus.eval_many(tt)
    near = np.abs(vals - 1.0) <= delta
    if not np.any(near):
        return None
    times = tt[near]
    gaps = np.diff(times)
    lead = times[0] - t2
    return float(max(lead, np.max(gaps) if gaps.size else 0.0))


def _hopf_block(c, d, k, n, j, seed_disk, T_fate, N, alphas=None) -> dict:
    # fates are decided in the rescaled system, whose own stable orbit
    # differs slightly from the base one; they are therefore self-detected
    # rather than matched against the base orbit bank
    if alphas is None:
        found = hopf_orbit_search(c, d, k, n, j=j)
    else:
        found = hopf_orbit_search(c, d, k, n, j=j, alphas=alphas)
    if found is None:
        return {"orbit": None}
    orbit, system = found.orbit, found.system
    flo = monodromy_multipliers(system, orbit, N=120)
    block = {
        "orbit": orbit.to_dict(),
        "alpha": found.alpha,
        "amplitude": found.amplitude,
        "omega_reference": found.data.omega_guess,
        "a_n": found.data.a_n, "b_n": found.data.b_n,
        "unstable_multiplier": flo.unstable_multiplier,
        "_orbit": orbit,
        "_floquet": flo,
        "_system": system,
        "disk_fates": {},
    }
    if flo.unstable_multiplier is None or flo.unstable_eigvec is None:
        block["disk_fates"] = {"note": "no real multiplier above one found"}
        return block
    psi = np.interp(_SEG_MESH, flo.mesh, flo.unstable_eigvec)
    q_vals = orbit.q0.eval(_SEG_MESH)
    fates = {}
    for side, sgn in (("plus", 1.0), ("minus", -1.0)):
        hist = HistoryFunction.from_samples(_SEG_MESH, np.maximum(q_vals + sgn * seed_disk * psi, 0.0))
        traj = integrate(system, hist, T_fate, N=N)
        fate, ev = _fate_of_trajectory(traj, None)
        fates[side] = {"fate": fate, **{k2: v for k2, v in ev.items() if not k2.startswith("_")}}
    block["disk_fates"] = fates
    return block
