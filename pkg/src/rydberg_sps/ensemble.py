"""Atom sampling (Maxwell-Boltzmann and LIAD), beam-overlap filtering and
polynomial time fits of the per-atom / per-pair Hamiltonian coefficients."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import erf, erfc

from .config import PhysicalConfig
from .errors import ConfigError, FitError

SNAPSHOT_VERSION = 1
DEBUG = os.environ.get("RYDBERG_SPS_DEBUG", "") not in ("", "0")

BOLTZMANN = "boltzmann"
LIAD = "liad"


@dataclass
class AtomSet:
    """Initial conditions of ``n`` atoms in the cell.

    Axis 0 is the beam axis, with the cell walls at ``x = 0`` and
    ``x = cfg.cell_thickness``.  Lengths in um, velocities in um/ns.
    """

    positions: np.ndarray
    velocities: np.ndarray
    wall_time: np.ndarray
    distribution: str = BOLTZMANN
    seed: int | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.velocities = np.asarray(self.velocities, dtype=float).reshape(-1, 3)
        self.wall_time = np.asarray(self.wall_time, dtype=float).reshape(-1)
        n = len(self.positions)
        if len(self.velocities) != n or len(self.wall_time) != n:
            raise ValueError("positions, velocities and wall_time must have equal length")

    @property
    def n_atoms(self):
        return len(self.positions)

    def __len__(self):
        return self.n_atoms

    def positions_at(self, t):
        """Ballistic positions R(0) + v t, shape (..., n, 3) for array ``t``."""
        t = np.asarray(t, dtype=float)
        return self.positions + self.velocities * t[..., None, None]

    def active(self, t):
        """Atoms that have not hit a wall before time ``t``."""
        return self.wall_time > t

    def subset(self, index):
        return AtomSet(self.positions[index], self.velocities[index],
                       self.wall_time[index], self.distribution, self.seed)

    @classmethod
    def concatenate(cls, sets):
        sets = list(sets)
        if not sets:
            raise ValueError("nothing to concatenate")
        return cls(np.concatenate([s.positions for s in sets]),
                   np.concatenate([s.velocities for s in sets]),
                   np.concatenate([s.wall_time for s in sets]),
                   sets[0].distribution, sets[0].seed)

    @classmethod
    def stationary(cls, positions):
        positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        return cls(positions, np.zeros_like(positions), np.full(len(positions), np.inf))

    # -- persistence ---------------------------------------------------------

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x_um", "y_um", "z_um", "vx_um_per_ns", "vy_um_per_ns",
                             "vz_um_per_ns", "t_wall_ns"])
            for p, v, tw in zip(self.positions, self.velocities, self.wall_time):
                writer.writerow([repr(float(x)) for x in (*p, *v, tw)])

    @classmethod
    def from_csv(cls, path, distribution=BOLTZMANN, seed=None):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0:3], data[:, 3:6], data[:, 6], distribution, seed)

    def save(self, path):
        """Versioned binary snapshot (numpy ``.npz``)."""
        with open(path, "wb") as fh:
            np.savez(fh, version=SNAPSHOT_VERSION, positions=self.positions,
                     velocities=self.velocities, wall_time=self.wall_time,
                     distribution=self.distribution,
                     seed=-1 if self.seed is None else self.seed)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as data:
            version = int(data["version"])
            if version != SNAPSHOT_VERSION:
                raise ValueError(f"unsupported snapshot version {version}")
            seed = int(data["seed"])
            return cls(data["positions"], data["velocities"], data["wall_time"],
                       str(data["distribution"]), None if seed < 0 else seed)


def wall_collision_times(positions, velocities, cell_thickness):
    """First time >= 0 at which the axial ray leaves the slab; inf for vx == 0."""
    x = np.asarray(positions, dtype=float)[..., 0]
    vx = np.asarray(velocities, dtype=float)[..., 0]
    out = np.full(x.shape, np.inf)
    pos = vx > 0
    neg = vx < 0
    out[pos] = (cell_thickness - x[pos]) / vx[pos]
    out[neg] = -x[neg] / vx[neg]
    return np.maximum(out, 0.0)


def _check_n(n, cfg):
    if int(n) != n or n < 1:
        raise ConfigError(f"number of atoms must be a positive integer, got {n!r}")
    if cfg.temperature <= 0:
        raise ConfigError("temperature must be positive")


def _transverse_disk(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    return r * np.cos(phi), r * np.sin(phi)


def sample_boltzmann(n: int, cfg: PhysicalConfig, seed: int) -> AtomSet:
    """Uniform positions in the slab (transverse disk), Gaussian velocities."""
    _check_n(n, cfg)
    rng = np.random.default_rng(seed)
    pos = np.empty((n, 3))
    pos[:, 0] = cfg.cell_thickness * rng.random(n)
    pos[:, 1], pos[:, 2] = _transverse_disk(rng, n, cfg.transverse_radius)
    vel = rng.normal(0.0, cfg.sigma_v, size=(n, 3))
    return AtomSet(pos, vel, wall_collision_times(pos, vel, cfg.cell_thickness),
                   BOLTZMANN, seed)


def sample_liad(n: int, cfg: PhysicalConfig, seed: int) -> AtomSet:
    """Wall-desorbed atoms with P(v, theta) ~ v^2 exp(-v^2/b^2) cos(theta).

    The density is taken per ``dv dtheta``; with this reading the fraction of
    atoms that have not reached the opposite wall after ``t`` is exactly
    ``1 - exp(-(dx / (b t))^2)``.  Speeds use ``v = b sqrt(G)``, ``G ~
    Gamma(3/2)``, and the polar angle is ``arcsin(U)``.
    """
    _check_n(n, cfg)
    rng = np.random.default_rng(seed)
    speed = cfg.liad_b * np.sqrt(rng.gamma(1.5, size=n))
    theta = np.arcsin(rng.random(n))
    phi = 2.0 * np.pi * rng.random(n)
    if cfg.liad_both_walls:
        from_far_wall = rng.random(n) < 0.5
    else:
        from_far_wall = np.zeros(n, dtype=bool)
    inward = np.where(from_far_wall, -1.0, 1.0)

    pos = np.empty((n, 3))
    pos[:, 0] = np.where(from_far_wall, cfg.cell_thickness, 0.0)
    pos[:, 1], pos[:, 2] = _transverse_disk(rng, n, cfg.transverse_radius)
    vel = np.column_stack([inward * speed * np.cos(theta),
                           speed * np.sin(theta) * np.cos(phi),
                           speed * np.sin(theta) * np.sin(phi)])
    return AtomSet(pos, vel, wall_collision_times(pos, vel, cfg.cell_thickness),
                   LIAD, seed)


def liad_survival_fraction(t, cfg: PhysicalConfig):
    """Expected fraction of LIAD atoms not yet at the opposite wall."""
    t = np.asarray(t, dtype=float)
    return 1.0 - np.exp(-(cfg.cell_thickness / (cfg.liad_b * t)) ** 2)


SAMPLERS = {BOLTZMANN: sample_boltzmann, LIAD: sample_liad}


# -- Gaussian beam overlap -------------------------------------------------

def _erf_diff(x1, x2):
    """erf(x2) - erf(x1) without cancellation in the tails."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    out = erf(x2) - erf(x1)
    hi = x1 > 0
    out[hi] = erfc(x1[hi]) - erfc(x2[hi])
    lo = x2 < 0
    out[lo] = erfc(-x2[lo]) - erfc(-x1[lo])
    return out


def beam_factor(atoms: AtomSet, waist, t):
    """exp(-|R_perp(t)|^2 / w0^2) for every atom, shape (len(t), n)."""
    r = atoms.positions_at(np.atleast_1d(t))[..., 1:]
    return np.exp(-np.sum(r * r, axis=-1) / waist ** 2)


def mean_beam_factor(atoms: AtomSet, waist, t1, t2):
    """Closed-form time average of the Gaussian beam factor over [t1, t2].

    The transverse trajectory a + b t is straight, so the exponent is a
    quadratic in t and the average reduces to an error-function difference.
    """
    a = atoms.positions[:, 1:]
    b = atoms.velocities[:, 1:]
    if t2 <= t1:
        return beam_factor(atoms, waist, t1)[0]
    bb = np.sum(b * b, axis=1)
    ab = np.sum(a * b, axis=1)
    aa = np.sum(a * a, axis=1)
    out = np.empty(len(a))
    slow = np.sqrt(bb) * (t2 - t1) / waist < 1e-6
    if np.any(slow):
        tm = 0.5 * (t1 + t2)
        r = a[slow] + b[slow] * tm
        out[slow] = np.exp(-np.sum(r * r, axis=1) / waist ** 2)
    fast = ~slow
    if np.any(fast):
        B = np.sqrt(bb[fast])
        tstar = -ab[fast] / bb[fast]
        rmin2 = np.maximum(aa[fast] - ab[fast] ** 2 / bb[fast], 0.0)
        diff = _erf_diff(B * (t1 - tstar) / waist, B * (t2 - tstar) / waist)
        out[fast] = (np.exp(-rmin2 / waist ** 2) * waist * np.sqrt(np.pi)
                     / (2.0 * B) * diff / (t2 - t1))
    return out


def filter_by_rabi(atoms: AtomSet, cfg: PhysicalConfig, pulses=None,
                   threshold: float | None = None) -> AtomSet:
    """Keep atoms that see enough of laser 1 and survive the pulse window.

    The beam factor of laser 1 is averaged over its on-window when ``pulses``
    is given, otherwise over ``[0, cfg.survival_time]``.  Atoms whose wall
    collision happens before ``cfg.survival_time`` are dropped.  An empty
    result is returned as an empty :class:`AtomSet`.
    """
    if threshold is None:
        threshold = cfg.rabi_threshold
    if pulses is not None and pulses.durations[0] > 0:
        t1, t2 = pulses.window(0)
    else:
        t1, t2 = 0.0, cfg.survival_time
    keep = mean_beam_factor(atoms, cfg.beam_waists[0], t1, t2) >= threshold
    keep &= atoms.wall_time >= cfg.survival_time
    return atoms.subset(keep)


def sample_filtered(distribution: str, n: int, cfg: PhysicalConfig, seed: int,
                    pulses=None, batch: int = 4096, max_batches: int = 10_000) -> AtomSet:
    """Draw batches until ``n`` atoms pass :func:`filter_by_rabi`."""
    if distribution not in SAMPLERS:
        raise ConfigError(f"unknown distribution {distribution!r}")
    _check_n(n, cfg)
    seq = np.random.SeedSequence(seed)
    kept = []
    total = 0
    for child in seq.spawn(max_batches):
        draw = SAMPLERS[distribution](batch, cfg, int(child.generate_state(1)[0]))
        good = filter_by_rabi(draw, cfg, pulses)
        kept.append(good)
        total += len(good)
        if total >= n:
            out = AtomSet.concatenate(kept).subset(slice(0, n))
            out.seed = seed
            return out
    raise ConfigError("filter rejected too many atoms; check waist / sampling radius")


# -- polynomial fits ---------------------------------------------------------

@dataclass
class PolyCoeffs:
    """A fitted polynomial sum_a c_a t^a for one Hamiltonian coefficient."""

    channel_id: tuple
    order: int
    coefficients: np.ndarray
    window: tuple
    max_residual: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if DEBUG:
            lo, hi = self.window
            if np.any(t < lo - 1e-9) or np.any(t > hi + 1e-9):
                raise FitError(f"{self.channel_id}: evaluation outside fit window {self.window}")
        return np.polynomial.polynomial.polyval(t, self.coefficients)


def _scaled_to_raw(order, center, half):
    """Matrix mapping coefficients in s = (t - center)/half to raw powers of t."""
    m = np.zeros((order + 1, order + 1))
    for a in range(order + 1):
        for b in range(a + 1):
            m[b, a] = comb(a, b) * (-center) ** (a - b) / half ** a
    return m


def fit_polynomials(t, values, order):
    """Least-squares fit of every column of ``values`` (len(t), C) in powers of t.

    Returns ``(coefficients (order+1, C), max_residual (C,))``.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float).reshape(len(t), -1)
    if len(t) < order + 1:
        raise FitError(f"{len(t)} samples cannot determine an order-{order} fit")
    lo, hi = float(t.min()), float(t.max())
    if hi - lo <= 0:
        if order > 0:
            raise FitError("zero-length fit window")
        return values[:1].copy(), np.zeros(values.shape[1])
    center, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    vander = np.polynomial.polynomial.polyvander((t - center) / half, order)
    coef_s, _, rank, _ = np.linalg.lstsq(vander, values, rcond=None)
    if rank < order + 1:
        raise FitError(f"rank-deficient order-{order} fit (rank {rank})")
    coef = _scaled_to_raw(order, center, half) @ coef_s
    fitted = np.polynomial.polynomial.polyvander(t, order) @ coef
    return coef, np.max(np.abs(fitted - values), axis=0)


def pair_indices(n):
    return np.array(np.triu_indices(n, k=1)).T.reshape(-1, 2)


def interaction_energy(atoms: AtomSet, cfg: PhysicalConfig, t, pairs=None):
    """C6 / d^6 for every pair at times ``t``, clipped at ``cfg.interaction_cap``."""
    if pairs is None:
        pairs = pair_indices(atoms.n_atoms)
    r = atoms.positions_at(np.atleast_1d(t))
    d = r[:, pairs[:, 0]] - r[:, pairs[:, 1]]
    d2 = np.sum(d * d, axis=-1)
    with np.errstate(divide="ignore"):
        u = cfg.c6 / d2 ** 3
    return np.minimum(u, cfg.interaction_cap)


@dataclass
class ChannelFits:
    """Fits of all time-dependent Hamiltonian coefficients of one sample.

    ``envelopes[j]`` has shape (order_j + 1, n_atoms); ``interaction`` has
    shape (order_int + 1, n_pairs) with pair list ``pairs``.
    """

    envelopes: list
    interaction: np.ndarray
    pairs: np.ndarray
    windows: list
    envelope_residual: list = field(default_factory=list)
    interaction_residual: np.ndarray = None

    def channels(self):
        for j, coef in enumerate(self.envelopes):
            for n in range(coef.shape[1]):
                yield PolyCoeffs(("envelope", j + 1, n), coef.shape[0] - 1, coef[:, n],
                                 self.windows[j], float(self.envelope_residual[j][n]))
        for p, (n, m) in enumerate(self.pairs):
            yield PolyCoeffs(("interaction", int(n), int(m)), self.interaction.shape[0] - 1,
                             self.interaction[:, p], self.windows[3],
                             float(self.interaction_residual[p]))

    def envelope(self, j, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, float), self.envelopes[j])

    def interaction_at(self, t):
        return np.polynomial.polynomial.polyval(np.asarray(t, float), self.interaction)


def polyfit_channels(atoms: AtomSet, cfg: PhysicalConfig, window, orders=None,
                     n_samples: int | None = None) -> ChannelFits:
    """Fit Gaussian envelopes of the three lasers and pair interactions in t.

    ``window`` is either one ``(t1, t2)`` interval used for every channel or
    a sequence of four intervals (laser 1, 2, 3, interaction).
    """
    if orders is None:
        orders = cfg.fit_orders
    if n_samples is None:
        n_samples = cfg.fit_samples
    window = list(window)
    if len(window) == 2 and np.isscalar(window[0]):
        windows = [tuple(map(float, window))] * 4
    else:
        windows = [tuple(map(float, w)) for w in window]
    if len(windows) != 4:
        raise FitError("expected one window or four windows")

    envelopes, env_res = [], []
    for j in range(3):
        t1, t2 = windows[j]
        order = orders[j] if t2 > t1 else 0
        t = np.linspace(t1, t2, n_samples)
        coef, res = fit_polynomials(t, beam_factor(atoms, cfg.beam_waists[j], t), order)
        envelopes.append(coef)
        env_res.append(res)

    pairs = pair_indices(atoms.n_atoms)
    t1, t2 = windows[3]
    order = orders[3] if t2 > t1 else 0
    if len(pairs):
        t = np.linspace(t1, t2, n_samples)
        coef, res = fit_polynomials(t, interaction_energy(atoms, cfg, t, pairs), order)
    else:
        coef, res = np.zeros((order + 1, 0)), np.zeros(0)
    return ChannelFits(envelopes, coef, pairs, windows, env_res, res)
