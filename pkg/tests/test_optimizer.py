import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import still
from rydberg_sps.config import PhysicalConfig
from rydberg_sps.ensemble import sample_filtered
from rydberg_sps.errors import AssemblyError, ObjectiveError, OptimizationAbort
from rydberg_sps.optimizer import (OptimizationProblem, default_bounds, nelder_mead,
                                   objective_fw, optimize_pulses)
from rydberg_sps.pulses import default_pulses


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_quadratic_converges_to_centre():
    c = np.array([0.3, -1.2, 2.0])
    x, trace = nelder_mead(lambda x: np.sum((x - c) ** 2), c + 0.1, xtol=1e-7, ftol=1e-14)
    assert trace.reason == "converged"
    assert np.max(np.abs(x - c)) < 1e-6


def test_rosenbrock_within_budget():
    # brute-force oracle: the finest grid minimum sits at (1, 1)
    g = np.linspace(-2, 2, 2001)
    xx, yy = np.meshgrid(g, g)
    f = rosenbrock((xx, yy))
    i = np.unravel_index(np.argmin(f), f.shape)
    assert (xx[i], yy[i]) == pytest.approx((1.0, 1.0))
    x, trace = nelder_mead(rosenbrock, [-1.2, 1.0], max_evals=400, xtol=1e-8, ftol=1e-12)
    assert trace.evaluations <= 400 + 2
    assert rosenbrock(x) < 1e-6
    assert np.allclose(x, (xx[i], yy[i]), atol=1e-3)


def test_maximise_and_monotone_trace():
    x, trace = nelder_mead(lambda x: -rosenbrock(x), [-1.2, 1.0], max_evals=300, maximize=True)
    best = trace.best_values()
    assert np.all(np.diff(best) >= 0)
    assert best[-1] == pytest.approx(-rosenbrock(x))


def test_budget_stop():
    _, trace = nelder_mead(rosenbrock, [-1.2, 1.0], max_evals=30)
    assert trace.reason == "max_evals"
    assert trace.evaluations < 30 + 4


def test_non_finite_objective_aborts_with_trace():
    def f(x):
        return np.nan if x[0] < 0.2 else x[0] ** 2

    with pytest.raises(OptimizationAbort) as info:
        nelder_mead(f, [0.4], max_evals=100, bounds=[(0.0, 1.0)])
    trace = info.value.trace
    assert trace.reason == "non-finite objective"
    assert trace.evaluations >= 1


def test_start_outside_bounds():
    with pytest.raises(ValueError):
        nelder_mead(rosenbrock, [3.0, 0.0], bounds=[(-2, 2), (-2, 2)])


@settings(max_examples=25, deadline=None)
@given(x0=st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_every_evaluation_respects_bounds(x0):
    bounds = np.array([(-2.0, 2.0), (-2.0, 2.0)])
    seen = []

    def f(x):
        seen.append(np.array(x))
        return rosenbrock(x)

    nelder_mead(f, x0, bounds=bounds, max_evals=80)
    seen = np.array(seen)
    assert np.all(seen >= bounds[:, 0]) and np.all(seen <= bounds[:, 1])


def test_same_inputs_same_trace():
    a = nelder_mead(rosenbrock, [-1.2, 1.0], max_evals=120)[1]
    b = nelder_mead(rosenbrock, [-1.2, 1.0], max_evals=120)[1]
    assert [r.best for r in a.records] == [r.best for r in b.records]
    assert all(np.array_equal(r.x, s.x) for r, s in zip(a.records, b.records))


def test_trace_csv(tmp_path):
    _, trace = nelder_mead(rosenbrock, [-1.2, 1.0], max_evals=20, names=("a", "b"))
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,evaluations,best,worst,a,b"
    assert len(lines) == len(trace.records) + 1


# -- pulse problem ---------------------------------------------------------------


@pytest.fixture
def toy(cfg):
    pulses = default_pulses(cfg)
    return OptimizationProblem([sample_filtered("boltzmann", 2, cfg, 3, pulses=pulses)], cfg), pulses


def test_parameters_round_trip(toy):
    problem, pulses = toy
    x = problem.from_pulses(pulses)
    assert problem.to_pulses(x) == pulses
    free = OptimizationProblem(problem.samples, problem.cfg, shared=False)
    assert free.to_pulses(free.from_pulses(pulses)) == pulses
    assert len(free.names) == 9 and len(problem.names) == 7


@settings(max_examples=60, deadline=None)
@given(raw=st.lists(st.floats(-5, 200), min_size=7, max_size=7))
def test_projection_lands_in_bounds(raw):
    cfg = PhysicalConfig()
    problem = OptimizationProblem([], cfg)
    x = problem.project(np.array(raw))
    b = default_bounds()
    assert np.all(x >= b[:, 0]) and np.all(x <= b[:, 1])
    t0 = problem.to_pulses(x).t0
    assert 1.25 - 1e-12 <= t0 <= 1.75 + 1e-12
    assert np.array_equal(problem.project(x), x)


def test_zero_amplitudes_give_zero_fidelity(toy):
    problem, pulses = toy
    x = problem.from_pulses(pulses)
    x[4:] = 0.0
    assert objective_fw(x, problem) == 0.0


def test_fidelity_is_at_most_one(cfg):
    problem = OptimizationProblem([still((0, 0, 0))], cfg)
    pulses = default_pulses(cfg)
    value = objective_fw(problem.from_pulses(pulses), problem)
    assert 0.0 <= value <= 1.0


def test_sample_failure_names_the_sample(cfg, monkeypatch):
    pulses = default_pulses(cfg)
    problem = OptimizationProblem([still((0, 0, 0)), still((0, 0, 0), (1, 0, 0))], cfg)
    real = problem.builder

    def broken(i):
        builder = real(i)
        if i == 1:
            def fail(*args, **kwargs):
                raise AssemblyError("synthetic failure")
            monkeypatch.setattr(builder, "build", fail)
        return builder

    monkeypatch.setattr(problem, "builder", broken)
    with pytest.raises(ObjectiveError) as info:
        objective_fw(problem.from_pulses(pulses), problem)
    assert info.value.sample_id == 1


def test_threads_do_not_change_the_mean(cfg):
    pulses = default_pulses(cfg)
    samples = [sample_filtered("boltzmann", 2, cfg, s, pulses=pulses) for s in range(3)]
    serial = OptimizationProblem(samples, cfg)
    pooled = OptimizationProblem(samples, cfg, threads=3)
    x = serial.from_pulses(pulses)
    assert objective_fw(x, serial) == objective_fw(x, pooled)


@pytest.mark.slow
def test_toy_optimisation_improves(toy):
    problem, pulses = toy
    best, value, trace = optimize_pulses(problem, pulses, max_evals=30)
    assert value > trace.records[0].best
    assert objective_fw(problem.from_pulses(best), problem) == pytest.approx(value, abs=1e-12)
    assert 1.25 <= best.t0 <= 1.75
