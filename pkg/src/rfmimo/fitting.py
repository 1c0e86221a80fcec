"""Lumped-model parameter extraction against a one-port reflection trace.

The search runs a bounded Nelder-Mead simplex over log-values, since
element values in SI span many decades (pF next to ohms next to nH).
Multistart points come from a seeded Latin hypercube over the log-bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .circuit import Netlist, SingularCircuitError, port_sparams
from .network import NetworkRecord, to_db

OBJECTIVES = ("complex-ls", "db-mag-ls")
PENALTY = 1e6
_DB_FLOOR = -300.0


@dataclass(frozen=True, eq=False)
class FitProblem:
    """Template netlist, free element labels with bounds, and the target.

    Args:
        template: one-port netlist; its current values of free elements are
            ignored by the optimiser.
        free: ``{label: (lo, hi)}`` in SI units, insertion order fixes the
            parameter vector order.
        target: one-port record to match.
        weights: per-frequency nonnegative weights; defaults to ones.
        objective: ``"complex-ls"`` or ``"db-mag-ls"``.
    """

    template: Netlist
    free: Mapping[str, tuple]
    target: NetworkRecord
    weights: np.ndarray | None = None
    objective: str = "complex-ls"

    def __post_init__(self):
        if len(self.template.ports) != 1:
            raise ValueError("fit template must be a one-port netlist")
        if self.target.nports != 1:
            raise ValueError("fit target must be a one-port record")
        if not self.free:
            raise ValueError("at least one free parameter is required")
        labels = {e.label for e in self.template.elements}
        free = {}
        for label, (lo, hi) in dict(self.free).items():
            if label not in labels:
                raise ValueError(f"free parameter {label!r} is not in the template")
            lo, hi = float(lo), float(hi)
            if not 0 < lo < hi:
                raise ValueError(f"bounds for {label!r} must satisfy 0 < lo < hi")
            free[label] = (lo, hi)
        object.__setattr__(self, "free", free)
        w = (np.ones(len(self.target)) if self.weights is None
             else np.array(self.weights, dtype=float).ravel())
        if w.size != len(self.target):
            raise ValueError(f"{w.size} weights for {len(self.target)} frequencies")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")

    @property
    def labels(self) -> tuple:
        return tuple(self.free)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.free.values()])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.free.values()])

    def netlist_for(self, params: Sequence[float]) -> Netlist:
        return self.template.with_values(dict(zip(self.labels, map(float, params))))

    def model_s11(self, params: Sequence[float]) -> np.ndarray:
        s, _ = port_sparams(self.netlist_for(params), self.target.f, check_condition=False)
        return s[:, 0, 0]


def objective(problem: FitProblem, params: Sequence[float]) -> float:
    """Weighted least-squares mismatch between model and target S11.

    A singular nodal solve at any frequency yields ``1e6 + log10(cond)``
    instead of an exception so a simplex straddling a degenerate corner can
    keep moving.
    """
    params = np.asarray(params, dtype=float)
    lo, hi = problem.lower, problem.upper
    if params.shape != lo.shape:
        raise ValueError(f"expected {lo.size} parameters, got {params.size}")
    slack = 1e-12 * hi
    if np.any(params < lo - slack) or np.any(params > hi + slack):
        raise ValueError("parameters outside their bounds")
    try:
        model = problem.model_s11(params)
    except SingularCircuitError as exc:
        return _penalty(problem, params, exc.frequency)
    if not np.all(np.isfinite(model)):
        return PENALTY
    target = problem.target.s[:, 0, 0]
    if problem.objective == "complex-ls":
        resid = np.abs(model - target) ** 2
    else:
        resid = (np.maximum(to_db(model), _DB_FLOOR) - np.maximum(to_db(target), _DB_FLOOR)) ** 2
    return float(np.sum(problem.weights * resid))


def _penalty(problem: FitProblem, params, freq) -> float:
    from .circuit import _admittance_stack, _index

    netlist = problem.netlist_for(params)
    nodes, idx, inc = _index(netlist)
    z0 = np.array([p.z0 for p in netlist.ports])
    y = _admittance_stack(netlist, np.array([freq or problem.target.f[0]]), idx, len(nodes))
    y += (inc / z0) @ inc.T
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(y[0]))
    return PENALTY + float(np.log10(min(cond, 1e300))) if np.isfinite(cond) else PENALTY + 300.0


@dataclass(frozen=True)
class FitConfig:
    multistarts: int = 8
    max_iters: int = 2000
    xtol: float = 1e-9
    ftol: float = 1e-12
    seed: int = 0
    x0: Sequence[float] | None = None
    initial_step: float = 0.05

    def __post_init__(self):
        if self.multistarts < 1:
            raise ValueError("multistarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class FitResult:
    labels: tuple
    values: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: tuple
    start_objectives: tuple = ()
    best_start: int = 0
    evaluations: int = 0

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.values.tolist()))


@dataclass
class SimplexOutcome:
    x: np.ndarray
    f: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    evaluations: int = 0


def nelder_mead_box(func: Callable[[np.ndarray], float], x0, lower, upper,
                    max_iters: int = 2000, xtol: float = 1e-9, ftol: float = 1e-12,
                    initial_step: float = 0.05,
                    f_lower: float | None = None) -> SimplexOutcome:
    """Nelder-Mead with every trial point projected onto the box.

    Stops when the simplex diameter (max-norm distance of any vertex from
    the best one) drops below ``xtol`` or the objective spread across the
    vertices drops below ``ftol``. With a known lower bound ``f_lower`` on
    the objective, the gap between the best vertex and that bound also
    counts as a spread: once it is below ``ftol`` no further improvement
    larger than ``ftol`` exists.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
    n = x0.size
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        return float(func(x))

    width = upper - lower
    pts = [x0]
    for k in range(n):
        p = x0.copy()
        step = initial_step * width[k]
        p[k] = p[k] + step if p[k] + step <= upper[k] else p[k] - step
        pts.append(p)
    sim = np.array(pts)
    fs = np.array([f(p) for p in sim])
    history = []
    converged = False
    it = 0
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        history.append(float(fs[0]))
        diameter = float(np.max(np.abs(sim[1:] - sim[0]))) if n else 0.0
        spread = fs[-1] - fs[0]
        if f_lower is not None:
            spread = min(spread, fs[0] - f_lower)
        if diameter < xtol or spread < ftol:
            converged = True
            break
        if it >= max_iters:
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        xr = np.clip(centroid + (centroid - sim[-1]), lower, upper)
        fr = f(xr)
        if fr < fs[0]:
            xe = np.clip(centroid + 2 * (centroid - sim[-1]), lower, upper)
            fe = f(xe)
            sim[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc = np.clip(centroid + 0.5 * (xr - centroid), lower, upper)
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = np.clip(centroid + 0.5 * (sim[-1] - centroid), lower, upper)
                fc = f(xc)
                accept = fc < fs[-1]
            if accept:
                sim[-1], fs[-1] = xc, fc
            else:
                sim[1:] = sim[0] + 0.5 * (sim[1:] - sim[0])
                fs[1:] = [f(p) for p in sim[1:]]
    return SimplexOutcome(sim[0].copy(), float(fs[0]), it, converged, history, evals)


def latin_hypercube(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` stratified samples in the unit cube, one per stratum per axis."""
    u = np.empty((n, dim))
    for d in range(dim):
        u[:, d] = (rng.permutation(n) + rng.random(n)) / n
    return u


def fit(problem: FitProblem, config: FitConfig | None = None) -> FitResult:
    """Multistart bounded Nelder-Mead over log-parameters.

    The objective is a sum of squares, so zero is passed to the simplex as
    a known lower bound. The lowest residual wins; ties go to the earliest start. With
    ``config.x0`` set, that point is start 0 and the hypercube fills the
    remaining starts.
    """
    config = config or FitConfig()
    lo, hi = np.log(problem.lower), np.log(problem.upper)
    rng = np.random.default_rng(config.seed)
    starts = lo + latin_hypercube(config.multistarts, lo.size, rng) * (hi - lo)
    if config.x0 is not None:
        x0 = np.log(np.asarray(config.x0, dtype=float))
        starts = np.vstack([x0, starts[: config.multistarts - 1]])

    def f(logx):
        return objective(problem, np.clip(np.exp(logx), problem.lower, problem.upper))

    best = None
    best_index = 0
    start_objs = []
    evals = 0
    for k, s in enumerate(starts):
        start_objs.append(f(np.clip(s, lo, hi)))
        out = nelder_mead_box(f, s, lo, hi, config.max_iters, config.xtol,
                              config.ftol, config.initial_step, f_lower=0.0)
        evals += out.evaluations + 1
        if best is None or out.f < best.f:
            best, best_index = out, k
    values = np.clip(np.exp(best.x), problem.lower, problem.upper)
    return FitResult(problem.labels, values, best.f, best.iterations, best.converged,
                     tuple(best.history), tuple(start_objs), best_index, evals)
