"""Scenario ingestion and deterministic artifact emission.

A scenario is a single JSON document naming a task plus its parameters; the
runner validates it (listing every offending field), dispatches to the right
module, and writes CSV/JSON/SVG artifacts with fixed decimal formatting and a
manifest that embeds the full scenario, so re-running from the manifest alone
reproduces every data artifact byte for byte.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .dde import System, integrate
from .history import HistoryFunction
from .manifold import shoot_branch
from .periodic import connection_diagram, detect_periodic, hopf_orbit_search, monodromy_multipliers
from .plotting import Series, emit_plot
from .spectrum import spectrum_report
from .threshold import UNRESOLVED, classify_zd, envelopes, find_dstar

__all__ = ["Scenario", "ScenarioError", "validate_scenario", "run_scenario", "FIGURE_PRESETS"]

TASKS = ("simulate", "threshold", "envelope", "manifold", "spectrum", "periodic", "hopf", "diagram", "figure")

_HOPF_C = 5.0 * math.pi / (3.0 * math.sqrt(3.0))
FIGURE_PRESETS = {
    "x1": {"a": 1.0, "b": 7.38, "k": 2.0, "n": 200},
    "x2": {"a": 4.0, "b": 12.71, "k": 2.0, "n": 200},
    "x3": {"a": _HOPF_C, "b": 7.95, "k": 2.0, "n": 100},
    "x4": {"a": _HOPF_C, "b": 25.0, "k": 2.0, "n": 100},
}


class ScenarioError(ValueError):
    def __init__(self, problems):
        super().__init__("invalid scenario: " + "; ".join(problems))
        self.problems = list(problems)


@dataclass(frozen=True)
class Scenario:
    name: str
    task: str
    spec: dict

    def to_json(self) -> dict:
        return dict(self.spec)


def _check_positive(problems, spec, path, key, required=True):
    if key not in spec:
        if required:
            problems.append(f"{path}.{key}: missing")
        return None
    v = spec[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
        problems.append(f"{path}.{key}: must be a positive number")
        return None
    return float(v)


_SYSTEM_KEYS = {"kind", "a", "b", "c", "d", "k", "n"}


def _check_system(problems, spec, path="system"):
    if not isinstance(spec, dict):
        problems.append(f"{path}: must be an object")
        return
    kind = spec.get("kind")
    if kind not in ("limit", "smooth"):
        problems.append(f"{path}.kind: must be 'limit' or 'smooth'")
        return
    for key in spec:
        if key not in _SYSTEM_KEYS:
            problems.append(f"{path}.{key}: unknown key")
    rate_key, gain_key = ("c", "d") if kind == "limit" else ("a", "b")
    _check_positive(problems, spec, path, rate_key)
    _check_positive(problems, spec, path, gain_key)
    _check_positive(problems, spec, path, "k", required=False)
    if kind == "smooth":
        n = spec.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            problems.append(f"{path}.n: must be an integer >= 2")


def _system_from(spec) -> System:
    k = float(spec.get("k", 2.0))
    if spec["kind"] == "limit":
        return System.limit(float(spec["c"]), float(spec["d"]), k=k)
    return System.smooth(float(spec["a"]), float(spec["b"]), k=k, n=int(spec["n"]))


def _check_history(problems, spec, path="history"):
    if spec is None:
        return
    if not isinstance(spec, dict):
        problems.append(f"{path}: must be an object")
        return
    kind = spec.get("kind")
    if kind == "constant":
        if "value" not in spec or not isinstance(spec["value"], (int, float)) or spec["value"] < 0:
            problems.append(f"{path}.value: must be a nonnegative number")
    elif kind == "exp-decay":
        pass
    elif kind == "samples":
        mesh, vals = spec.get("mesh"), spec.get("values")
        if not (isinstance(mesh, list) and isinstance(vals, list) and len(mesh) == len(vals) and len(mesh) >= 2):
            problems.append(f"{path}: samples need matching 'mesh' and 'values' lists")
    else:
        problems.append(f"{path}.kind: must be one of constant | exp-decay | samples")


def _history_from(spec, system: System) -> HistoryFunction:
    if spec is None:
        return HistoryFunction.constant(1.0)
    if spec["kind"] == "constant":
        return HistoryFunction.constant(float(spec["value"]))
    if spec["kind"] == "exp-decay":
        return HistoryFunction.exp_decay(system.rate)
    return HistoryFunction.from_samples(np.asarray(spec["mesh"], float), np.asarray(spec["values"], float))


_TOP_KEYS = {
    "simulate": {"name", "task", "system", "history", "T", "N", "plot", "seed"},
    "threshold": {"name", "task", "c", "k", "tol", "T_max", "bracket"},
    "envelope": {"name", "task", "c", "d", "d0", "k"},
    "manifold": {"name", "task", "system", "branch", "kappa", "eps_seed", "T", "N"},
    "spectrum": {"name", "task", "rate", "slope", "pairs"},
    "periodic": {"name", "task", "system", "T", "N", "transient", "level"},
    "hopf": {"name", "task", "c", "d", "k", "n", "j", "alpha_grid"},
    "diagram": {"name", "task", "c", "d", "k", "n", "dstar", "with_hopf", "alpha_grid", "T_orbit", "N"},
    "figure": {"name", "task", "preset", "T", "N"},
}


def validate_scenario(doc: dict) -> Scenario:
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioError(["document: must be a JSON object"])
    task = doc.get("task")
    if task not in TASKS:
        raise ScenarioError([f"task: must be one of {', '.join(TASKS)}"])
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        problems.append("name: missing or empty")
        name = "unnamed"
    for key in doc:
        if key not in _TOP_KEYS[task]:
            problems.append(f"{key}: unknown key for task '{task}'")

    if task in ("simulate", "manifold", "periodic"):
        _check_system(problems, doc.get("system"))
        _check_positive(problems, doc, "", "T", required=False)
    if task == "simulate":
        _check_history(problems, doc.get("history"))
    if task == "manifold":
        if doc.get("branch") not in ("plus", "minus"):
            problems.append("branch: must be 'plus' or 'minus'")
    if task in ("threshold", "envelope", "hopf", "diagram"):
        _check_positive(problems, doc, "", "c")
    if task in ("envelope", "hopf", "diagram"):
        _check_positive(problems, doc, "", "d")
    if task == "envelope":
        _check_positive(problems, doc, "", "d0")
    if task in ("hopf", "diagram"):
        n = doc.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            problems.append("n: must be an integer >= 2")
    if task == "spectrum":
        _check_positive(problems, doc, "", "rate")
        _check_positive(problems, doc, "", "slope")
    if task == "figure":
        if doc.get("preset") not in FIGURE_PRESETS:
            problems.append(f"preset: must be one of {', '.join(sorted(FIGURE_PRESETS))}")
    if problems:
        raise ScenarioError(problems)
    return Scenario(name=name, task=task, spec=dict(doc))


def _fmt(v) -> str:
    return f"{float(v):.12e}"


def _write_csv(path: str, columns: dict) -> None:
    keys = list(columns)
    rows = len(next(iter(columns.values())))
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(columns[k][i]) for k in keys) + "\n")


def _write_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)!r}")


@dataclass
class RunResult:
    out_dir: str
    artifacts: list
    unresolved: bool = False


def run_scenario(path: str, out_dir: Optional[str] = None) -> RunResult:
    """Validate and execute one scenario (or manifest) file."""
    with open(path) as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "scenario" in doc:
        doc = doc["scenario"]
    scenario = validate_scenario(doc)
    out_dir = out_dir or os.path.join(os.getcwd(), scenario.name)
    os.makedirs(out_dir, exist_ok=True)
    runner = _RUNNERS[scenario.task]
    artifacts, unresolved = runner(scenario, out_dir)
    manifest = {
        "scenario": scenario.to_json(),
        "artifacts": sorted(artifacts),
        "package": {"name": "ddelab", "version": __version__},
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return RunResult(out_dir=out_dir, artifacts=sorted(artifacts) + ["manifest.json"], unresolved=unresolved)


def _traj_columns(traj) -> dict:
    ts = traj.ts
    ev = np.asarray([e["t"] for e in traj.events]) if traj.events else np.empty(0)
    flags = np.zeros(ts.size)
    if ev.size:
        for i, t in enumerate(ts):
            if np.min(np.abs(ev - t)) < 1e-12:
                flags[i] = 1.0
    return {"t": ts, "x": traj.xs, "x_delayed": traj.eval_many(ts - 1.0), "derivative_flag": flags}


def _run_simulate(sc: Scenario, out: str):
    system = _system_from(sc.spec["system"])
    history = _history_from(sc.spec.get("history"), system)
    T = float(sc.spec.get("T", 50.0))
    N = int(sc.spec.get("N", 200))
    traj = integrate(system, history, T, N=N)
    arts = []
    _write_csv(os.path.join(out, "trajectory.csv"), _traj_columns(traj))
    arts.append("trajectory.csv")
    _write_json(os.path.join(out, "events.json"), [{"t": e["t"], "kind": e["kind"]} for e in traj.events])
    arts.append("events.json")
    if sc.spec.get("plot", False):
        sub = np.linspace(0.0, T, min(4001, 20 * int(T) + 1))
        svg = emit_plot(
            [Series(sub, traj.eval_many(sub), "default", "x")],
            phase=[(traj.eval_many(sub), traj.eval_many(sub - 1.0), "default")],
            title=sc.name,
        )
        with open(os.path.join(out, "plot.svg"), "w") as fh:
            fh.write(svg)
        arts.append("plot.svg")
    return arts, False


def _run_threshold(sc: Scenario, out: str):
    c = float(sc.spec["c"])
    res = find_dstar(
        c,
        bracket=tuple(sc.spec["bracket"]) if "bracket" in sc.spec else None,
        tol=float(sc.spec.get("tol", 1e-4)),
        T_max=float(sc.spec.get("T_max", 400.0)),
        k=float(sc.spec.get("k", 2.0)),
    )
    _write_json(os.path.join(out, "threshold.json"), {"c": c, **res.to_dict()})
    return ["threshold.json"], bool(res.unresolved)


def _run_envelope(sc: Scenario, out: str):
    env = envelopes(float(sc.spec["c"]), float(sc.spec["d"]), float(sc.spec["d0"]), k=float(sc.spec.get("k", 2.0)))
    _write_json(os.path.join(out, "envelope.json"), env.to_dict())
    return ["envelope.json"], False


def _run_manifold(sc: Scenario, out: str):
    system = _system_from(sc.spec["system"])
    sol = shoot_branch(
        system,
        sc.spec["branch"],
        kappa=sc.spec.get("kappa"),
        eps_seed=sc.spec.get("eps_seed"),
        T=float(sc.spec.get("T", 30.0)),
        N=int(sc.spec.get("N", 200)),
    )
    lo, hi = sol.domain
    tt = np.linspace(max(lo, -15.0), hi - 0.5, 4001)
    _write_csv(os.path.join(out, "manifold.csv"), {"t": tt, "x": sol.eval_many(tt)})
    lm = sol.landmarks.to_dict()
    lm.update({"kappa": sol.kappa, "eps_seed": sol.eps_seed, "lambda0": sol.lambda0, "equilibrium": sol.equilibrium})
    _write_json(os.path.join(out, "landmarks.json"), lm)
    return ["manifold.csv", "landmarks.json"], False


def _run_spectrum(sc: Scenario, out: str):
    rep = spectrum_report(float(sc.spec["rate"]), float(sc.spec["slope"]), int(sc.spec.get("pairs", 5)))
    _write_json(os.path.join(out, "spectrum.json"), rep.to_dict())
    return ["spectrum.json"], False


def _run_periodic(sc: Scenario, out: str):
    system = _system_from(sc.spec["system"])
    T = float(sc.spec.get("T", 500.0))
    N = int(sc.spec.get("N", 400))
    traj = integrate(system, HistoryFunction.constant(1.2), T, N=N)
    orbit = detect_periodic(
        traj,
        level=float(sc.spec.get("level", 1.0)),
        transient=float(sc.spec.get("transient", 0.7 * T)),
    )
    if orbit is None:
        _write_json(os.path.join(out, "orbit.json"), {"found": False})
        return ["orbit.json"], True
    doc = {"found": True, **orbit.to_dict()}
    if system.kind == "smooth":
        flo = monodromy_multipliers(system, orbit, N=200, N_int=N)
        doc["floquet"] = flo.to_dict()
    _write_json(os.path.join(out, "orbit.json"), doc)
    _write_csv(os.path.join(out, "orbit_samples.csv"), {"t": orbit.samples_t, "x": orbit.samples_x})
    return ["orbit.json", "orbit_samples.csv"], False


def _run_hopf(sc: Scenario, out: str):
    kwargs = {}
    if "alpha_grid" in sc.spec:
        kwargs["alphas"] = tuple(float(a) for a in sc.spec["alpha_grid"])
    found = hopf_orbit_search(
        float(sc.spec["c"]), float(sc.spec["d"]), float(sc.spec.get("k", 2.0)),
        int(sc.spec["n"]), j=int(sc.spec.get("j", 1)), **kwargs,
    )
    if found is None:
        _write_json(os.path.join(out, "hopf.json"), {"found": False})
        return ["hopf.json"], True
    doc = {
        "found": True,
        "alpha": found.alpha,
        "amplitude": found.amplitude,
        "newton_residual": found.newton_residual,
        "orbit": found.orbit.to_dict(),
        "angles": found.data.to_dict(),
    }
    _write_json(os.path.join(out, "hopf.json"), doc)
    _write_csv(os.path.join(out, "hopf_orbit.csv"), {"t": found.orbit.samples_t, "x": found.orbit.samples_x})
    return ["hopf.json", "hopf_orbit.csv"], False


def _run_diagram(sc: Scenario, out: str):
    kwargs = {}
    if "dstar" in sc.spec:
        kwargs["dstar"] = float(sc.spec["dstar"])
    if "alpha_grid" in sc.spec:
        kwargs["hopf_alphas"] = tuple(float(a) for a in sc.spec["alpha_grid"])
    if "T_orbit" in sc.spec:
        kwargs["T_orbit"] = float(sc.spec["T_orbit"])
    if "N" in sc.spec:
        kwargs["N"] = int(sc.spec["N"])
    diag = connection_diagram(
        float(sc.spec["c"]), float(sc.spec["d"]), float(sc.spec.get("k", 2.0)),
        int(sc.spec["n"]), with_hopf=bool(sc.spec.get("with_hopf", False)), **kwargs,
    )
    doc = diag.to_dict()
    doc["plus"] = {k: v for k, v in doc["plus"].items() if not k.startswith("_")}
    if doc.get("hopf"):
        doc["hopf"] = {k: v for k, v in doc["hopf"].items() if not k.startswith("_")}
    _write_json(os.path.join(out, "diagram.json"), doc)
    return ["diagram.json"], bool(diag.unresolved)


def _run_figure(sc: Scenario, out: str):
    preset = FIGURE_PRESETS[sc.spec["preset"]]
    a, b, k, n = preset["a"], preset["b"], preset["k"], preset["n"]
    system = System.smooth(a, b, k=k, n=n)
    T = float(sc.spec.get("T", 60.0))
    N = int(sc.spec.get("N", 400))
    arts = []
    series = []
    phase = []

    from .spectrum import stationary_points

    xi = stationary_points(system, 0.9).interior().value
    if sc.spec["preset"] in ("x1", "x2"):
        plus = shoot_branch(system, "plus", T=T, N=N)
        minus = shoot_branch(system, "minus", T=min(T, 40.0), N=N)
        for name, sol in (("plus", plus), ("minus", minus)):
            lo, hi = sol.domain
            tt = np.linspace(max(lo, -10.0), hi - 0.5, 4001)
            vals = sol.eval_many(tt)
            _write_csv(
                os.path.join(out, f"{name}.csv"),
                {"t": tt, "x": vals, "x_delayed": sol.eval_many(np.maximum(tt - 1.0, lo))},
            )
            arts.append(f"{name}.csv")
            series.append(Series(tt, vals, name))
        tt = np.linspace(0.0, T, 501)
        _write_csv(os.path.join(out, "stationary.csv"), {"t": tt, "x": np.full_like(tt, xi)})
        arts.append("stationary.csv")
        series.append(Series(tt, np.full_like(tt, xi), "stationary"))
        sel = np.linspace(1.0, plus.domain[1] - 0.5, 3001)
        phase.append((plus.eval_many(sel), plus.eval_many(sel - 1.0), "plus"))
    else:
        alphas = (0.2,) if sc.spec["preset"] == "x4" else None
        found = hopf_orbit_search(a, b, k, n, j=1, alphas=alphas) if alphas else hopf_orbit_search(a, b, k, n, j=1)
        if found is None:
            _write_json(os.path.join(out, "figure.json"), {"found": False})
            return ["figure.json"], True
        orbit, sysn = found.orbit, found.system
        reps = int(np.ceil(6.0 / orbit.omega))
        qt = np.concatenate([orbit.samples_t + m * orbit.omega for m in range(reps)])
        qx = np.tile(orbit.samples_x, reps)
        _write_csv(os.path.join(out, "hopf_orbit.csv"), {"t": qt, "x": qx})
        arts.append("hopf_orbit.csv")
        series.append(Series(qt, qx, "hopf"))
        flo = monodromy_multipliers(sysn, orbit, N=120)
        if flo.unstable_eigvec is not None:
            smesh = np.linspace(-1.0, 0.0, 201)
            psi = np.interp(smesh, flo.mesh, flo.unstable_eigvec)
            qv = orbit.q0.eval(smesh)
            for name, sgn in (("plus", 1.0), ("minus", -1.0)):
                hist = HistoryFunction.from_samples(smesh, np.maximum(qv + sgn * 5e-3 * psi, 0.0))
                traj = integrate(sysn, hist, T, N=N)
                tt = np.linspace(0.0, T, 4001)
                vals = traj.eval_many(tt)
                _write_csv(os.path.join(out, f"{name}.csv"), {"t": tt, "x": vals})
                arts.append(f"{name}.csv")
                series.append(Series(tt, vals, name))
                if name == "plus":
                    sel = np.linspace(1.0, T, 3001)
                    phase.append((traj.eval_many(sel), traj.eval_many(sel - 1.0), "plus"))
    svg = emit_plot(series, phase=phase or None, title=f"preset {sc.spec['preset']}")
    with open(os.path.join(out, "figure.svg"), "w") as fh:
        fh.write(svg)
    arts.append("figure.svg")
    return arts, False


_RUNNERS = {
    "simulate": _run_simulate,
    "threshold": _run_threshold,
    "envelope": _run_envelope,
    "manifold": _run_manifold,
    "spectrum": _run_spectrum,
    "periodic": _run_periodic,
    "hopf": _run_hopf,
    "diagram": _run_diagram,
    "figure": _run_figure,
}
