"""Command-line pipeline: sample, excite, decay, analyze, optimize, tw-scan."""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import decay as dc
from . import excitation as ex
from . import io
from .config import PhysicalConfig, dump_config, load_config
from .ensemble import SAMPLERS, liad_survival_fraction, sample_filtered
from .errors import SimulationError
from .optimizer import OptimizationProblem, objective_fw, optimize_pulses
from .pulses import PulseSequence, default_pulses

log = logging.getLogger("rydberg_sps")

CONE_DEG = 30.0


# -- argument helpers ------------------------------------------------------------

def positive_int(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if value != int(value) or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(value)


def positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _map(fn, items, threads):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def load_pulses(path, cfg: PhysicalConfig) -> PulseSequence:
    """Pulses from an INI ``[pulses]`` section, the config's own ``[pulses]``
    section, or the built-in starting sequence."""
    if path:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        if not parser.read(path):
            raise FileNotFoundError(path)
        if not parser.has_section("pulses"):
            raise SimulationError(f"{path} has no [pulses] section")
        return PulseSequence.from_dict(dict(parser.items("pulses")), cfg)
    if "pulses" in cfg.extra:
        return PulseSequence.from_dict(cfg.extra["pulses"], cfg)
    return default_pulses(cfg)


def write_pulses(path, pulses: PulseSequence):
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["pulses"] = pulses.to_dict()
    with open(path, "w") as fh:
        parser.write(fh)


class Run:
    """Output directory plus manifest bookkeeping for one command."""

    def __init__(self, args, cfg):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        arguments = {k: v for k, v in vars(args).items()
                     if k not in ("func", "out", "config_text") and not callable(v)}
        self.manifest = io.RunManifest(args.command, arguments, dump_config(cfg), __version__)

    def path(self, name):
        return self.out / name

    def record(self, *names):
        for name in names:
            self.manifest.add_output(self.path(name), self.out)

    def finish(self):
        return self.manifest.write(self.out)


# -- stages --------------------------------------------------------------------

def draw_samples(cfg, dist, n_samples, n_atoms, master, stage, pulses, filtered=True):
    samples = []
    for s in range(n_samples):
        seed = io.stage_seed(master, stage, s)
        if filtered:
            samples.append(sample_filtered(dist, n_atoms, cfg, seed, pulses))
        else:
            samples.append(SAMPLERS[dist](n_atoms, cfg, seed))
    return samples


def write_atoms_fast(path, samples):
    blocks = [np.column_stack([np.full(a.n_atoms, sid), a.positions, a.velocities, a.wall_time])
              for sid, a in enumerate(samples)]
    data = np.concatenate(blocks) if blocks else np.zeros((0, 8))
    np.savetxt(path, data, delimiter=",", header=",".join(io.ATOM_COLUMNS), comments="",
               fmt=["%d"] + ["%.17g"] * 7)


def stage_excite(run, cfg, samples, pulses, t_w, weighting, tol, threads):
    def one(i):
        atoms = samples[i]
        res = ex.excite(atoms, cfg, pulses, tol=tol)
        target = ex.w_state_target(atoms, cfg, pulses, t_w, weighting, res.state.basis)
        pops = ex.sector_populations(res.state)
        try:
            t_phi = ex.phase_time_from_state(res.state, atoms, cfg)
        except SimulationError:
            t_phi = float("nan")
        row = [i, pops.ground, pops.single_e, pops.double_ee, pops.other,
               ex.fidelity(res.state, target), t_phi, res.norm_drift]
        return res.alpha_single, res.alpha_double, row

    results = _map(one, range(len(samples)), threads)
    alphas = [r[0] for r in results]
    doubles = [r[1] for r in results]
    io.write_alpha(run.path("alpha_single.csv"), alphas)
    io.write_pairs(run.path("alpha_double.csv"), doubles)
    io.write_table(run.path("sectors.csv"), io.SECTOR_COLUMNS, [r[2] for r in results])
    write_pulses(run.path("pulses.ini"), pulses)
    run.record("alpha_single.csv", "alpha_double.csv", "sectors.csv", "pulses.ini")
    return alphas, doubles


def _rows(times, values, ensemble_id, stride):
    return [[ensemble_id, t, v] for t, v in zip(times[::stride], values[::stride])]


def stage_decay(run, cfg, samples, alphas, doubles, t0, group, decay_time, dt,
                theta_points, stride, threads, with_double=True):
    cone = np.deg2rad(CONE_DEG)
    window = (t0, t0 + decay_time)
    grouped = dc.group_samples(list(zip(samples, alphas)), group)

    def single(item):
        eid, (atoms, alpha) = item
        tr = dc.decay_single(alpha, atoms, cfg, window, dt=dt)
        prof = dc.angular_density(tr, theta_points)
        times, rate = dc.emission_rate(tr)
        t_peak, r_peak = dc.peak(times, rate)
        summary = [eid, "single", dc.cone_population(prof, cone), prof.total(),
                   tr.population()[-1], tr.lost_to_walls()[-1], r_peak, t_peak - t0]
        return prof, times, rate, summary

    def double(item):
        eid, (atoms, pairs) = item
        tr = dc.decay_double(pairs, atoms, cfg, window, dt=dt)
        prof = dc.first_photon_density(tr, theta_points)
        times, rate = dc.emission_rate(tr)
        _, rate2 = dc.second_photon_rate(tr)
        t_peak, r_peak = dc.peak(times, rate)
        t2, r2 = dc.peak(times, rate2)
        summary = [eid, "double", dc.cone_population(prof, cone), prof.total(),
                   tr.population()[-1], tr.lost_to_walls()[-1], r_peak, t_peak - t0]
        return prof, times, rate, rate2, summary, [eid, r2, t2 - t0]

    singles = _map(single, enumerate(grouped), threads)
    p_rows, r_rows, summaries = [], [], []
    for eid, (prof, times, rate, summary) in enumerate(singles):
        p_rows += [[eid, th, p, q] for th, p, q in
                   zip(prof.theta, prof.density[-1], prof.per_solid_angle[-1])]
        r_rows += _rows(times - t0, rate, eid, stride)
        summaries.append(summary)
    io.write_table(run.path("p_single.csv"),
                   ["ensemble_id", "theta_rad", "p_per_rad", "p_over_sin_per_rad"], p_rows)
    io.write_table(run.path("rate_single.csv"), ["ensemble_id", "t_minus_t0_ns", "rate_per_gamma"],
                   r_rows)
    names = ["p_single.csv", "rate_single.csv"]

    second = []
    if with_double:
        pairs = [(a, d) for a, d in zip(samples, doubles) if np.any(d)]
        doubles_out = _map(double, enumerate(pairs), threads)
        p_rows, r_rows, r2_rows = [], [], []
        for eid, (prof, times, rate, rate2, summary, sec) in enumerate(doubles_out):
            p_rows += [[eid, th, p, q] for th, p, q in
                       zip(prof.theta, prof.density[-1], prof.per_solid_angle[-1])]
            r_rows += _rows(times - t0, rate, eid, stride)
            r2_rows += _rows(times - t0, rate2, eid, stride)
            summaries.append(summary)
            second.append(sec)
        io.write_table(run.path("p_double_first.csv"),
                       ["ensemble_id", "theta_rad", "p_per_rad", "p_over_sin_per_rad"], p_rows)
        io.write_table(run.path("rate_double_first.csv"),
                       ["ensemble_id", "t_minus_t0_ns", "rate_per_gamma"], r_rows)
        io.write_table(run.path("rate_double_second.csv"),
                       ["ensemble_id", "t_minus_t0_ns", "rate_per_gamma"], r2_rows)
        io.write_table(run.path("second_photon_peaks.csv"),
                       ["ensemble_id", "peak_rate_per_gamma", "peak_time_minus_t0_ns"], second)
        names += ["p_double_first.csv", "rate_double_first.csv", "rate_double_second.csv",
                  "second_photon_peaks.csv"]
    io.write_table(run.path("decay_summary.csv"),
                   ["ensemble_id", "kind", "cone_population", "emitted", "remaining",
                    "lost_to_walls", "peak_rate_per_gamma", "peak_time_minus_t0_ns"], summaries)
    run.record(*names, "decay_summary.csv")


def _stats(values):
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if len(values) == 0:
        return [float("nan"), float("nan"), 0]
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return [float(np.mean(values)), std, len(values)]


def stage_analyze(run, directory, t0=None):
    """Mean / standard deviation of every per-sample and per-ensemble metric."""
    directory = Path(directory)
    rows = []
    sectors = directory / "sectors.csv"
    if sectors.exists():
        header, data = io.read_table(sectors)
        table = np.array(data, dtype=float).reshape(-1, len(header))
        for col in ("fidelity", "ground", "single_e", "double_ee", "other", "phase_time_ns"):
            rows.append([col] + _stats(table[:, header.index(col)]))
        if t0 is not None:
            rows.append(["phase_time_minus_t0_ns"]
                        + _stats(table[:, header.index("phase_time_ns")] - t0))
    summary = directory / "decay_summary.csv"
    if summary.exists():
        header, data = io.read_table(summary)
        for kind in ("single", "double"):
            sel = [r for r in data if r[1] == kind]
            if not sel:
                continue
            for col in ("cone_population", "emitted", "lost_to_walls", "peak_rate_per_gamma",
                        "peak_time_minus_t0_ns"):
                rows.append([f"{kind}_{col}"] + _stats([float(r[header.index(col)]) for r in sel]))
            cone = np.array([float(r[header.index("cone_population")]) for r in sel])
            emitted = np.array([float(r[header.index("emitted")]) for r in sel])
            with np.errstate(invalid="ignore", divide="ignore"):
                rows.append([f"{kind}_cone_fraction_of_emitted"] + _stats(cone / emitted))
    second = directory / "second_photon_peaks.csv"
    if second.exists():
        header, data = io.read_table(second)
        for col in ("peak_rate_per_gamma", "peak_time_minus_t0_ns"):
            rows.append([f"second_{col}"] + _stats([float(r[header.index(col)]) for r in data]))
    io.write_table(run.path("summary.csv"), ["metric", "mean", "std", "count"], rows)
    run.record("summary.csv")
    return rows


def _load_stage_inputs(directory, cfg):
    directory = Path(directory)
    samples = io.read_atoms(directory / "atoms.csv")
    alphas = io.read_alpha(directory / "alpha_single.csv")
    doubles = io.read_pairs(directory / "alpha_double.csv", [a.n_atoms for a in samples])
    pulses = load_pulses(directory / "pulses.ini", cfg)
    return samples, alphas, doubles, pulses


# -- commands ----------------------------------------------------------------------

def cmd_sample(args, cfg):
    run = Run(args, cfg)
    pulses = load_pulses(args.pulses, cfg)
    with run.manifest.timed("sample"):
        samples = draw_samples(cfg, args.dist, args.samples, args.n, args.seed, "sample",
                               pulses, filtered=not args.no_filter)
    run.manifest.seeds["sample"] = [io.stage_seed(args.seed, "sample", s)
                                    for s in range(args.samples)]
    write_atoms_fast(run.path("atoms.csv"), samples)
    times = np.array(args.survival_times)
    wall = np.concatenate([a.wall_time for a in samples])
    rows = []
    for t in times:
        analytic = float(liad_survival_fraction(t, cfg)) if args.dist == "liad" else float("nan")
        rows.append([t, float(np.mean(wall > t)), analytic])
    io.write_table(run.path("survival.csv"),
                   ["t_ns", "survivor_fraction", "analytic_liad_fraction"], rows)
    run.record("atoms.csv", "survival.csv")
    return run.finish()


def cmd_excite(args, cfg):
    run = Run(args, cfg)
    pulses = load_pulses(args.pulses, cfg)
    if args.atoms:
        samples = io.read_atoms(args.atoms, args.dist)
    else:
        samples = draw_samples(cfg, args.dist, args.samples, args.n, args.seed, "sample", pulses)
        run.manifest.seeds["sample"] = [io.stage_seed(args.seed, "sample", s)
                                        for s in range(args.samples)]
    write_atoms_fast(run.path("atoms.csv"), samples)
    run.record("atoms.csv")
    with run.manifest.timed("excite"):
        stage_excite(run, cfg, samples, pulses, args.t_w, args.weighting, args.tol, args.threads)
    return run.finish()


def cmd_decay(args, cfg):
    run = Run(args, cfg)
    samples, alphas, doubles, pulses = _load_stage_inputs(args.input, cfg)
    with run.manifest.timed("decay"):
        stage_decay(run, cfg, samples, alphas, doubles, pulses.t0, args.group, args.decay_time,
                    args.dt, args.theta_points, args.stride, args.threads, not args.no_double)
    return run.finish()


def cmd_analyze(args, cfg):
    run = Run(args, cfg)
    pulses_path = Path(args.input) / "pulses.ini"
    t0 = load_pulses(pulses_path, cfg).t0 if pulses_path.exists() else None
    with run.manifest.timed("analyze"):
        rows = stage_analyze(run, args.input, t0)
    for row in rows:
        print(f"{row[0]:>40s}  {row[1]: .6g} +- {row[2]:.3g}  (n={row[3]})")
    return run.finish()


def cmd_pipeline(args, cfg):
    run = Run(args, cfg)
    pulses = load_pulses(args.pulses, cfg)
    if args.no_delay:
        # third laser starts right when lasers 1 and 2 switch off
        gap = pulses.gap12
        pulses = pulses.replace(starts=(pulses.starts[0], pulses.starts[1], gap))
    with run.manifest.timed("sample"):
        samples = draw_samples(cfg, args.dist, args.samples, args.n, args.seed, "sample", pulses)
    run.manifest.seeds["sample"] = [io.stage_seed(args.seed, "sample", s)
                                    for s in range(args.samples)]
    write_atoms_fast(run.path("atoms.csv"), samples)
    run.record("atoms.csv")
    with run.manifest.timed("excite"):
        alphas, doubles = stage_excite(run, cfg, samples, pulses, args.t_w, args.weighting,
                                       args.tol, args.threads)
    with run.manifest.timed("decay"):
        stage_decay(run, cfg, samples, alphas, doubles, pulses.t0, args.group, args.decay_time,
                    args.dt, args.theta_points, args.stride, args.threads, not args.no_double)
    with run.manifest.timed("analyze"):
        stage_analyze(run, run.out, pulses.t0)
    return run.finish()


def cmd_optimize(args, cfg):
    run = Run(args, cfg)
    initial = load_pulses(args.pulses, cfg)
    samples = draw_samples(cfg, args.dist, args.samples, args.n, args.seed, "optimize", initial)
    run.manifest.seeds["optimize"] = [io.stage_seed(args.seed, "optimize", s)
                                      for s in range(args.samples)]
    write_atoms_fast(run.path("atoms.csv"), samples)
    problem = OptimizationProblem(samples, cfg, t_w=args.t_w, weighting=args.weighting,
                                  shared=not args.independent_12, tol=args.tol,
                                  threads=args.threads)
    with run.manifest.timed("optimize"):
        start_fw = objective_fw(problem.project(problem.from_pulses(initial)), problem)
        best, best_fw, trace = optimize_pulses(problem, initial, args.max_evals, args.xtol,
                                               args.ftol)
    trace.to_csv(run.path("trace.csv"))
    write_pulses(run.path("best_pulses.ini"), best)
    t_phi = ex.phase_time(best, cfg)
    rows = [["initial_fidelity", start_fw], ["best_fidelity", best_fw],
            ["evaluations", trace.evaluations], ["t0_ns", best.t0],
            ["phase_time_ns", t_phi], ["phase_time_minus_t0_ns", t_phi - best.t0],
            ["third_laser_delay_ns", best.starts[2] - best.gap12]]
    io.write_table(run.path("optimize_summary.csv"), ["metric", "value"], rows)
    run.record("atoms.csv", "trace.csv", "best_pulses.ini", "optimize_summary.csv")
    print(f"mean F_W {start_fw:.4f} -> {best_fw:.4f} after {trace.evaluations} evaluations "
          f"({trace.reason})")
    return run.finish()


def cmd_tw_scan(args, cfg):
    run = Run(args, cfg)
    pulses = load_pulses(args.pulses, cfg)
    t0 = args.t0 if args.t0 is not None else pulses.t0
    grid = np.linspace(args.tw_min, args.tw_max, args.tw_steps)
    cone = np.deg2rad(CONE_DEG)
    seeds = [io.stage_seed(args.seed, "tw-scan", s) for s in range(args.seeds)]
    run.manifest.seeds["tw-scan"] = seeds

    def one(seed):
        atoms = sample_filtered(args.dist, args.n, cfg, seed, pulses)
        out = []
        for t_w in grid:
            alpha = ex.w_amplitudes(atoms, cfg, pulses, t_w, "uniform")
            tr = dc.decay_single(alpha, atoms, cfg, (t0, t0 + args.decay_time), dt=args.dt)
            prof = dc.angular_density(tr, args.theta_points, theta_max=cone)
            times, rate = dc.emission_rate(tr)
            t_peak, _ = dc.peak(times, rate)
            out.append([t_w, dc.cone_population(prof, cone), t_peak - t0])
        return out

    with run.manifest.timed("tw-scan"):
        results = _map(one, seeds, args.threads)
    rows = [[s, *r] for s, res in enumerate(results) for r in res]
    io.write_table(run.path("tw_scan.csv"),
                   ["seed_id", "t_w_ns", "cone_population", "peak_time_minus_t0_ns"], rows)
    cones = np.array([[r[1] for r in res] for res in results])
    peaks = np.array([[r[2] for r in res] for res in results])
    summary = [[t_w, cones[:, i].mean(), cones[:, i].std(ddof=1) if len(cones) > 1 else 0.0,
                peaks[:, i].mean()] for i, t_w in enumerate(grid)]
    io.write_table(run.path("tw_summary.csv"),
                   ["t_w_ns", "mean_cone_population", "std_cone_population",
                    "mean_peak_time_minus_t0_ns"], summary)
    run.record("tw_scan.csv", "tw_summary.csv")
    best = grid[int(np.argmax(cones.mean(axis=0)))]
    print(f"forward-cone population maximal at t_W = {best:.3f} ns; "
          f"max/min = {cones.mean(0).max() / cones.mean(0).min():.3f}")
    return run.finish()


def cmd_replay(args, cfg):
    """Re-run the command recorded in a manifest into a new directory."""
    manifest = io.RunManifest.read(args.manifest)
    argv = [manifest.command]
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices[manifest.command]
    for action in sub._actions:
        dest = action.dest
        if dest in ("help", "out") or dest not in manifest.arguments:
            continue
        value = manifest.arguments[dest]
        if value is None or value is False:
            continue
        flag = action.option_strings[0] if action.option_strings else None
        if flag is None:
            continue
        if value is True:
            argv.append(flag)
        elif isinstance(value, list):
            argv += [flag, *map(str, value)]
        else:
            argv += [flag, str(value)]
    argv += ["--out", args.out]
    replay_args = parser.parse_args(argv)
    replay_args.config_text = manifest.config
    return run_command(replay_args)


# -- parser --------------------------------------------------------------------

def _common(p, seed=True):
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=positive_int, default=1, help="worker threads")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed")


def _scale(p, samples=10, n=20):
    p.add_argument("--dist", choices=sorted(SAMPLERS), default="boltzmann")
    p.add_argument("--samples", type=positive_int, default=samples, help="number of samples S")
    p.add_argument("--n", type=positive_int, default=n, help="atoms per sample N")


def _excite_opts(p):
    p.add_argument("--pulses", help="INI file with a [pulses] section")
    p.add_argument("--t-w", type=float, default=2.0, help="W-state time t_W (ns)")
    p.add_argument("--weighting", choices=("rabi", "uniform"), default="rabi")
    p.add_argument("--tol", type=positive_float, default=1e-6, help="propagation tolerance")


def _decay_opts(p):
    p.add_argument("--group", type=positive_int, default=1, help="samples per grouped ensemble")
    p.add_argument("--decay-time", type=positive_float, default=10.0, help="decay window (ns)")
    p.add_argument("--dt", type=positive_float, default=dc.DEFAULT_DT, help="time sampling (ns)")
    p.add_argument("--theta-points", type=positive_int, default=dc.THETA_POINTS)
    p.add_argument("--stride", type=positive_int, default=10,
                   help="write every k-th time sample of the rate series")
    p.add_argument("--no-double", action="store_true", help="skip double-excitation decay")


def build_parser():
    parser = argparse.ArgumentParser(prog="rydberg-sps", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample (and filter) atom sets")
    _common(p)
    _scale(p, samples=1, n=100)
    p.add_argument("--pulses", help="pulses whose laser-1 window sets the filter average")
    p.add_argument("--no-filter", action="store_true", help="skip the beam-overlap filter")
    p.add_argument("--survival-times", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0])
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("excite", help="propagate the excitation for every sample")
    _common(p)
    _scale(p)
    _excite_opts(p)
    p.add_argument("--atoms", help="atoms.csv from the sample command")
    p.set_defaults(func=cmd_excite)

    p = sub.add_parser("decay", help="collective decay of excite outputs")
    _common(p, seed=False)
    p.add_argument("--input", required=True, help="directory written by excite")
    _decay_opts(p)
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("analyze", help="summary statistics of excite/decay outputs")
    _common(p, seed=False)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="Nelder-Mead pulse optimisation")
    _common(p)
    _scale(p, samples=10, n=10)
    _excite_opts(p)
    p.add_argument("--max-evals", type=positive_int, default=200)
    p.add_argument("--xtol", type=positive_float, default=1e-4)
    p.add_argument("--ftol", type=positive_float, default=1e-5)
    p.add_argument("--independent-12", action="store_true",
                   help="give lasers 1 and 2 independent timing")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("pipeline", help="sample, excite, decay and analyze in one run")
    _common(p)
    _scale(p)
    _excite_opts(p)
    _decay_opts(p)
    p.set_defaults(group=5)
    p.add_argument("--no-delay", action="store_true",
                   help="start laser 3 when lasers 1 and 2 switch off")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("tw-scan", help="forward-cone emission of ideal W states versus t_W")
    _common(p)
    p.add_argument("--dist", choices=sorted(SAMPLERS), default="boltzmann")
    p.add_argument("--n", type=positive_int, default=100)
    p.add_argument("--seeds", type=positive_int, default=5)
    p.add_argument("--tw-min", type=float, default=1.25)
    p.add_argument("--tw-max", type=float, default=2.75)
    p.add_argument("--tw-steps", type=positive_int, default=7)
    p.add_argument("--t0", type=float, help="end of the excitation (default: pulses' t0)")
    p.add_argument("--pulses", help="INI file with a [pulses] section")
    p.add_argument("--decay-time", type=positive_float, default=10.0)
    p.add_argument("--dt", type=positive_float, default=0.02)
    p.add_argument("--theta-points", type=positive_int, default=dc.THETA_POINTS)
    p.set_defaults(func=cmd_tw_scan)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_replay, config=None)
    return parser


def run_command(args):
    text = getattr(args, "config_text", None)
    if text is not None:
        cfg = load_config(text)
    elif getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = PhysicalConfig()
    return args.func(args, cfg)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = run_command(args)
    except (SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if manifest is not None:
        print(f"manifest: {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
