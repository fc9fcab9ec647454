"""Nelder-Mead maximisation of the mean W-state fidelity over pulse parameters."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import PhysicalConfig, TWO_PI
from .errors import ObjectiveError, OptimizationAbort, SimulationError
from .excitation import HamiltonianBuilder, fidelity, ground_state, propagate, to_lab_frame, \
    w_state_target
from .pulses import PulseSequence

SHARED_NAMES = ("t_s12", "dt12", "t_s3", "dt3", "rabi1", "rabi2", "rabi3")
FREE_NAMES = ("t_s1", "t_s2", "t_s3", "dt1", "dt2", "dt3", "rabi1", "rabi2", "rabi3")

T0_BOUNDS = (1.25, 1.75)
MAX_RABI = TWO_PI * 20.0
MIN_DURATION = 0.02


# -- simplex method ----------------------------------------------------------

@dataclass
class IterationRecord:
    iteration: int
    evaluations: int
    best: float
    worst: float
    x: np.ndarray


@dataclass
class OptimizationTrace:
    """Per-iteration simplex summary.  ``best``/``worst`` are objective
    values in the caller's sense (figure of merit when maximising)."""

    maximize: bool
    names: tuple = ()
    records: list = field(default_factory=list)
    reason: str = ""
    evaluations: int = 0

    def best_values(self):
        return np.array([r.best for r in self.records])

    def to_csv(self, path):
        names = self.names or tuple(f"x{i}" for i in range(len(self.records[0].x)))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "evaluations", "best", "worst", *names])
            for r in self.records:
                writer.writerow([r.iteration, r.evaluations, repr(float(r.best)),
                                 repr(float(r.worst)), *(repr(float(v)) for v in r.x)])


def _clip(x, bounds):
    if bounds is None:
        return x
    return np.clip(x, bounds[:, 0], bounds[:, 1])


def nelder_mead(objective, x0, bounds=None, max_evals=500, xtol=1e-6, ftol=1e-9,
                maximize=False, project=None, names=()):
    """Bounded Nelder-Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

    Every trial point is projected onto the feasible set (box clipping, then
    ``project`` if given) before evaluation.  The initial simplex steps by 5%
    of each bound interval (or of the coordinate when unbounded).  Returns
    ``(best_x, trace)``; a non-finite objective raises
    :class:`OptimizationAbort` carrying the trace so far.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = len(x0)
    b = None if bounds is None else np.asarray(bounds, dtype=float).reshape(dim, 2)
    sign = -1.0 if maximize else 1.0
    trace = OptimizationTrace(maximize, tuple(names))

    def feasible(x):
        x = _clip(x, b)
        return x if project is None else project(x)

    def f(x):
        value = float(objective(x))
        trace.evaluations += 1
        if not np.isfinite(value):
            trace.reason = "non-finite objective"
            raise OptimizationAbort(f"objective returned {value} at {x}", trace)
        return sign * value

    if b is not None and np.any((x0 < b[:, 0]) | (x0 > b[:, 1])):
        raise ValueError("x0 lies outside the bounds")
    start = feasible(x0)
    simplex = [start]
    for i in range(dim):
        step = 0.05 * (b[i, 1] - b[i, 0]) if b is not None else (0.05 * x0[i] or 2.5e-4)
        y = start.copy()
        y[i] += step
        if b is not None and y[i] > b[i, 1]:
            y[i] = start[i] - step
        simplex.append(feasible(y))
    simplex = np.array(simplex)
    values = np.array([f(x) for x in simplex])

    def record(it):
        order = np.argsort(values, kind="stable")
        trace.records.append(IterationRecord(it, trace.evaluations, sign * values[order[0]],
                                             sign * values[order[-1]], simplex[order[0]].copy()))

    iteration = 0
    record(iteration)
    while True:
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        if (np.max(np.abs(simplex[1:] - simplex[0])) <= xtol
                and np.max(np.abs(values[1:] - values[0])) <= ftol):
            trace.reason = "converged"
            break
        if trace.evaluations >= max_evals:
            trace.reason = "max_evals"
            break
        iteration += 1
        centroid = simplex[:-1].mean(axis=0)
        xr = feasible(centroid + (centroid - simplex[-1]))
        fr = f(xr)
        if fr < values[0]:
            xe = feasible(centroid + 2.0 * (centroid - simplex[-1]))
            fe = f(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = feasible(centroid + 0.5 * (xr - centroid))
            else:
                xc = feasible(centroid + 0.5 * (simplex[-1] - centroid))
            fc = f(xc)
            if fc < min(fr, values[-1]):
                simplex[-1], values[-1] = xc, fc
            else:
                for i in range(1, dim + 1):
                    simplex[i] = feasible(simplex[0] + 0.5 * (simplex[i] - simplex[0]))
                    values[i] = f(simplex[i])
        record(iteration)
    best = int(np.argmin(values))
    return simplex[best].copy(), trace


# -- pulse problem ---------------------------------------------------------------

def default_bounds(shared=True):
    time = (0.0, T0_BOUNDS[1])
    dur = (MIN_DURATION, T0_BOUNDS[1])
    rabi = (0.0, MAX_RABI)
    if shared:
        return np.array([time, dur, time, dur, rabi, rabi, rabi])
    return np.array([time, time, time, dur, dur, dur, rabi, rabi, rabi])


@dataclass
class OptimizationProblem:
    """Mean fidelity to the W target over a fixed sample set."""

    samples: list
    cfg: PhysicalConfig
    t_w: float = 2.0
    weighting: str = "rabi"
    shared: bool = True
    bounds: np.ndarray = None
    t0_bounds: tuple = T0_BOUNDS
    tol: float = 1e-6
    threads: int = 1

    def __post_init__(self):
        if self.bounds is None:
            self.bounds = default_bounds(self.shared)
        self.bounds = np.asarray(self.bounds, dtype=float)
        self._builders = [None] * len(self.samples)

    @property
    def names(self):
        return SHARED_NAMES if self.shared else FREE_NAMES

    # parameter <-> pulse mapping
    def to_pulses(self, x) -> PulseSequence:
        x = np.asarray(x, dtype=float)
        if self.shared:
            ts12, dt12, ts3, dt3, r1, r2, r3 = x
            starts, durations = (ts12, ts12, ts3), (dt12, dt12, dt3)
        else:
            starts, durations = tuple(x[0:3]), tuple(x[3:6])
            r1, r2, r3 = x[6:9]
        return PulseSequence(starts, durations, (r1, r2, r3), tuple(self.cfg.detunings))

    def from_pulses(self, pulses: PulseSequence):
        if self.shared:
            return np.array([pulses.starts[0], pulses.durations[0], pulses.starts[2],
                             pulses.durations[2], *pulses.rabi])
        return np.array([*pulses.starts, *pulses.durations, *pulses.rabi])

    def project(self, x):
        """Clip to the box, then repair the total-duration bound by trimming
        pulses that end too late or stretching the last one."""
        x = _clip(np.asarray(x, dtype=float), self.bounds)
        lo, hi = self.t0_bounds
        if self.shared:
            groups = [(0, 1), (2, 3)]
        else:
            groups = [(0, 3), (1, 4), (2, 5)]
        for s, d in groups:
            x[s] = min(x[s], hi - self.bounds[d, 0])
            x[d] = min(x[d], hi - x[s])
        ends = [x[s] + x[d] for s, d in groups]
        if max(ends) < lo:
            s, d = groups[int(np.argmax(ends))]
            x[d] = lo - x[s]
        return _clip(x, self.bounds)

    def builder(self, i):
        if self._builders[i] is None:
            self._builders[i] = HamiltonianBuilder(self.samples[i], self.cfg)
        return self._builders[i]

    def sample_fidelity(self, i, pulses):
        atoms = self.samples[i]
        if all(r == 0.0 for r in pulses.rabi):
            return 0.0
        try:
            b = self.builder(i)
            h = b.build(pulses)
            traj = propagate(h, ground_state(b.basis), (0.0, pulses.t0), tol=self.tol)
            psi = to_lab_frame(traj.final, pulses.t0)
            target = w_state_target(atoms, self.cfg, pulses, self.t_w, self.weighting, b.basis)
            return fidelity(psi, target)
        except SimulationError as exc:
            raise ObjectiveError(f"sample {i}: {exc}", sample_id=i) from exc

    def fidelities(self, x):
        pulses = self.to_pulses(self.project(x))
        idx = range(len(self.samples))
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return np.array(list(pool.map(lambda i: self.sample_fidelity(i, pulses), idx)))
        return np.array([self.sample_fidelity(i, pulses) for i in idx])


def objective_fw(params, problem: OptimizationProblem) -> float:
    """Mean W-state fidelity of the pulses encoded by ``params``."""
    return float(np.mean(problem.fidelities(params)))


def optimize_pulses(problem: OptimizationProblem, initial: PulseSequence, max_evals=200,
                    xtol=1e-4, ftol=1e-5):
    """Maximise the mean fidelity starting from ``initial``.

    Returns ``(best PulseSequence, best mean fidelity, trace)``.
    """
    x0 = problem.project(problem.from_pulses(initial))
    x, trace = nelder_mead(lambda p: objective_fw(p, problem), x0, problem.bounds, max_evals,
                           xtol, ftol, maximize=True, project=problem.project,
                           names=problem.names)
    return problem.to_pulses(x), trace.records[-1].best, trace
