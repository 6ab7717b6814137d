"""Particle swarm tuning of controller weights and Pareto sweeps over the coasting threshold."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .astro import ELEMENT_NAMES
from .propagator import RunSummary, Scenario, propagate

log = logging.getLogger(__name__)

SCALES = ("linear", "log")


@dataclass(frozen=True)
class Parameter:
    name: str
    lower: float
    upper: float
    scale: str = "log"

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}")
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound must be below upper bound")
        if self.scale == "log" and self.lower <= 0.0:
            raise ValueError(f"{self.name}: log-scaled bounds must be positive")

    def from_unit(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        if self.scale == "log":
            lo, hi = math.log(self.lower), math.log(self.upper)
            x = math.exp(lo + u * (hi - lo))
        else:
            x = self.lower + u * (self.upper - self.lower)
        # exp(log(b)) can miss b by an ulp
        return min(max(x, self.lower), self.upper)

    def to_unit(self, x: float) -> float:
        if self.scale == "log":
            lo, hi = math.log(self.lower), math.log(self.upper)
            u = (math.log(x) - lo) / (hi - lo)
        else:
            u = (x - self.lower) / (self.upper - self.lower)
        return min(max(u, 0.0), 1.0)


WEIGHT_PARAMETERS = ("w_a", "w_e", "w_i")


@dataclass(frozen=True)
class SearchSpace:
    parameters: tuple = (
        Parameter("w_a", 0.01, 10.0),
        Parameter("w_e", 0.01, 10.0),
        Parameter("w_i", 0.01, 10.0),
    )

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        for p in self.parameters:
            if p.name not in WEIGHT_PARAMETERS + ("zeta",):
                raise ValueError(f"unknown tuning parameter {p.name!r}")
            if p.name == "zeta" and not (p.lower > 1.0 and p.upper < 3.0):
                raise ValueError("zeta bounds must lie inside (1, 3)")

    @classmethod
    def default(cls, with_zeta: bool = False, targeted: Sequence[bool] | None = None) -> "SearchSpace":
        """Weights of the targeted a, e, i elements, optionally zeta."""
        on = list(targeted[:3]) if targeted is not None else [True] * 3
        params = [Parameter(n, 0.01, 10.0) for n, t in zip(WEIGHT_PARAMETERS, on) if t]
        if with_zeta:
            params.append(Parameter("zeta", 1.05, 2.95, "linear"))
        return cls(tuple(params))

    @property
    def names(self) -> tuple:
        return tuple(p.name for p in self.parameters)

    @property
    def dim(self) -> int:
        return len(self.parameters)

    def decode(self, u) -> dict:
        return {p.name: p.from_unit(float(x)) for p, x in zip(self.parameters, u)}

    def encode(self, values: dict) -> np.ndarray:
        return np.array([p.to_unit(values[p.name]) for p in self.parameters])


def current_values(scn: Scenario, space: SearchSpace) -> dict:
    """The scenario's own settings for each tuned parameter."""
    ctl = scn.controller
    w = ctl.modified.weights if ctl.law == "modified" else ctl.classic.weights[:3]
    vals = dict(zip(WEIGHT_PARAMETERS, w))
    vals["zeta"] = ctl.modified.zeta
    return {n: vals[n] for n in space.names}


def apply_values(scn: Scenario, values: dict) -> Scenario:
    """Copy of the scenario with weights (and zeta) of the active law replaced."""
    ctl = scn.controller
    md, cl = ctl.modified, ctl.classic
    if ctl.law == "modified":
        w = list(md.weights)
    else:
        w = list(cl.weights)
    for k, name in enumerate(WEIGHT_PARAMETERS):
        if name in values:
            w[k] = float(values[name])
    if ctl.law == "modified":
        md = dataclasses.replace(md, weights=tuple(w))
    else:
        cl = dataclasses.replace(cl, weights=tuple(w))
    if "zeta" in values:
        md = dataclasses.replace(md, zeta=float(values["zeta"]))
    return dataclasses.replace(scn, controller=dataclasses.replace(ctl, modified=md, classic=cl))


def normalized_residual(summary: RunSummary, scn: Scenario) -> float:
    """Root-sum-square of final target distances, a by a_T, angles by pi."""
    total = 0.0
    for name, d in summary.residuals.items():
        scale = {"a": scn.target.a or 1.0, "e": 1.0}.get(name, math.pi)
        total += (d / scale) ** 2
    return math.sqrt(total)


def objective(summary: RunSummary, scn: Scenario) -> float:
    """Transfer days when converged; otherwise max duration plus a residual penalty."""
    if summary.converged:
        return summary.transfer_days
    return scn.max_days + 100.0 * normalized_residual(summary, scn)


@dataclass(frozen=True)
class PsoParams:
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    swarm: int = 24
    iterations: int = 40
    # velocity clamp as a fraction of the unit box
    v_max: float = 0.25
    workers: int = 1

    def __post_init__(self):
        if self.swarm < 1 or self.iterations < 0:
            raise ValueError("swarm must be >= 1 and iterations >= 0")
        if not 0.0 < self.v_max <= 1.0:
            raise ValueError("v_max must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


class SwarmDivergedError(RuntimeError):
    """No particle produced a converged transfer."""


@dataclass
class Evaluation:
    values: dict
    objective: float
    summary: RunSummary


@dataclass
class PsoResult:
    best_values: dict
    best_objective: float
    best_summary: RunSummary
    history: list = field(default_factory=list)       # global best after each iteration
    evaluations: int = 0
    converged_evaluations: int = 0


def _run(scn: Scenario) -> RunSummary:
    return propagate(scn)[1]


def evaluate(scn: Scenario, values: dict) -> Evaluation:
    trial = apply_values(scn, values)
    summary = _run(trial)
    return Evaluation(values, objective(summary, trial), summary)


class _Evaluator:
    """Memoized batch evaluation, optionally over a process pool."""

    def __init__(self, scn: Scenario, space: SearchSpace, workers: int):
        self.scn, self.space = scn, space
        self.cache: dict = {}
        self.pool = ProcessPoolExecutor(workers) if workers > 1 else None
        self.count = 0
        self.converged = 0

    def __call__(self, positions: np.ndarray) -> list:
        keys = [tuple(float(x) for x in row) for row in positions]
        todo = [k for k in dict.fromkeys(keys) if k not in self.cache]
        trials = [apply_values(self.scn, self.space.decode(k)) for k in todo]
        summaries = list(self.pool.map(_run, trials)) if self.pool else [_run(t) for t in trials]
        for k, trial, s in zip(todo, trials, summaries):
            self.cache[k] = Evaluation(self.space.decode(k), objective(s, trial), s)
            self.count += 1
            self.converged += s.converged
        return [self.cache[k] for k in keys]

    def close(self):
        if self.pool:
            self.pool.shutdown()


def pso_optimize(scn: Scenario, space: SearchSpace | None = None, params: PsoParams = PsoParams(),
                 seed: int = 0, progress: Optional[Callable[[int, float], None]] = None) -> PsoResult:
    """Global-best PSO on the unit box; particle 0 starts at the scenario's own weights."""
    if space is None:
        space = SearchSpace.default(targeted=scn.target.targeted)
    if space.dim == 0:
        raise ValueError("empty search space")
    rng = np.random.default_rng(seed)
    n, d = params.swarm, space.dim
    x = rng.random((n, d))
    x[0] = space.encode(current_values(scn, space))
    v = rng.uniform(-params.v_max, params.v_max, (n, d))
    evaluator = _Evaluator(scn, space, params.workers)
    try:
        evals = evaluator(x)
        pbest_x = x.copy()
        pbest = [e for e in evals]
        g = min(range(n), key=lambda k: pbest[k].objective)
        gbest_x, gbest = pbest_x[g].copy(), pbest[g]
        history = [gbest.objective]
        log.info("pso init: best %.4f", gbest.objective)
        if progress:
            progress(0, gbest.objective)
        for it in range(1, params.iterations + 1):
            r1, r2 = rng.random((n, d)), rng.random((n, d))
            v = (params.inertia * v + params.cognitive * r1 * (pbest_x - x)
                 + params.social * r2 * (gbest_x - x))
            v = np.clip(v, -params.v_max, params.v_max)
            x = np.clip(x + v, 0.0, 1.0)
            evals = evaluator(x)
            for k, ev in enumerate(evals):
                if ev.objective < pbest[k].objective:
                    pbest[k], pbest_x[k] = ev, x[k].copy()
                    if ev.objective < gbest.objective:
                        gbest, gbest_x = ev, x[k].copy()
            history.append(gbest.objective)
            log.info("pso iteration %d: best %.4f", it, gbest.objective)
            if progress:
                progress(it, gbest.objective)
    finally:
        evaluator.close()
    if evaluator.converged == 0:
        raise SwarmDivergedError(f"none of {evaluator.count} particles converged "
                                 f"(best objective {gbest.objective:.3f})")
    return PsoResult(gbest.values, gbest.objective, gbest.summary, history,
                     evaluator.count, evaluator.converged)


@dataclass(frozen=True)
class ParetoPoint:
    eta_threshold: float
    transfer_days: float
    propellant_kg: float
    weights: dict
    converged: bool
    error: str = ""


def pareto_sweep(scn: Scenario, thresholds: Sequence[float], space: SearchSpace | None = None,
                 params: PsoParams = PsoParams(), seed: int = 0) -> list:
    """One PSO per threshold (same seed each); failures are recorded, not raised."""
    thresholds = list(thresholds)
    if any(not 0.0 <= t < 1.0 for t in thresholds):
        raise ValueError("thresholds must lie in [0, 1)")
    if thresholds != sorted(thresholds):
        raise ValueError("thresholds must be ascending")
    points = []
    for thr in thresholds:
        ctl = scn.controller
        trial = dataclasses.replace(scn, controller=dataclasses.replace(
            ctl, coast=dataclasses.replace(ctl.coast, eta_threshold=thr)))
        try:
            res = pso_optimize(trial, space, params, seed)
        except SwarmDivergedError as exc:
            log.warning("threshold %.3f: %s", thr, exc)
            points.append(ParetoPoint(thr, math.nan, math.nan, {}, False, str(exc)))
            continue
        s = res.best_summary
        points.append(ParetoPoint(thr, s.transfer_days, s.propellant_kg, res.best_values, s.converged))
    return points


def pareto_front(points: Sequence[ParetoPoint]) -> list:
    """Converged, non-dominated points in (time, propellant), ordered by time."""
    ok = [p for p in points if p.converged]
    front = []
    for p in ok:
        dominated = any(
            q.transfer_days <= p.transfer_days and q.propellant_kg <= p.propellant_kg
            and (q.transfer_days < p.transfer_days or q.propellant_kg < p.propellant_kg)
            for q in ok)
        if not dominated:
            front.append(p)
    return sorted(front, key=lambda p: (p.transfer_days, p.propellant_kg))


__all__ = [
    "ELEMENT_NAMES", "Parameter", "SearchSpace", "PsoParams", "PsoResult", "ParetoPoint",
    "SwarmDivergedError", "apply_values", "current_values", "evaluate", "objective",
    "pareto_front", "pareto_sweep", "pso_optimize",
]
