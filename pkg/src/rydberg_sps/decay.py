"""Collective decay of single and double excitations among moving atoms,
angular photon densities, emission rates and the second-photon rate."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.special import j0

from .config import PhysicalConfig
from .ensemble import AtomSet, pair_indices
from .errors import GroupingError, IntervalError, ResourceError

DEFAULT_DT = 0.01
THETA_POINTS = 181
# budget for N^3 * time-samples in the first-photon density
BUDGET_ENV = "RYDBERG_SPS_N3_BUDGET"
DEFAULT_BUDGET = 2e10


# -- geometry ----------------------------------------------------------------

class PairGeometry:
    """Pair separations R_n(t) - R_m(t) = r0 + v t of a ballistic atom set."""

    def __init__(self, atoms: AtomSet):
        self.r0 = atoms.positions[:, None, :] - atoms.positions[None, :, :]
        self.v = atoms.velocities[:, None, :] - atoms.velocities[None, :, :]
        self.aa = np.einsum("nmi,nmi->nm", self.r0, self.r0)
        self.ab = np.einsum("nmi,nmi->nm", self.r0, self.v)
        self.bb = np.einsum("nmi,nmi->nm", self.v, self.v)
        self.moving = bool(np.any(self.bb > 0))

    def restrict(self, index):
        """Geometry of the sub-ensemble ``index`` (distances only)."""
        sub = object.__new__(PairGeometry)
        ix = np.ix_(index, index)
        sub.r0 = sub.v = None
        sub.aa, sub.ab, sub.bb = self.aa[ix], self.ab[ix], self.bb[ix]
        sub.moving = bool(np.any(sub.bb > 0))
        return sub

    def distance(self, t):
        return np.sqrt(np.maximum(self.aa + 2.0 * self.ab * t + self.bb * t * t, 0.0))

    def sinc(self, k, t):
        """sinc(k d_nm(t)) with sinc(x) = sin(x)/x."""
        x = k * self.distance(t)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.sin(x) / x
        out[x < 1e-8] = 1.0
        return out


# -- trajectories --------------------------------------------------------------

def _segment_grid(t_start, t_end, wall_times, dt, min_active=1):
    """Sub-intervals split at wall events, each with an even number of
    uniform steps no longer than ``dt``."""
    cuts = np.unique(wall_times[(wall_times > t_start) & (wall_times < t_end)])
    edges = np.concatenate([[t_start], cuts, [t_end]])
    grids = []
    for a, b in zip(edges[:-1], edges[1:]):
        steps = max(2, int(np.ceil((b - a) / dt)))
        if np.count_nonzero(wall_times > 0.5 * (a + b)) < min_active:
            # nothing left that can emit: amplitudes stay frozen
            steps = 2
        steps += steps % 2
        grids.append(np.linspace(a, b, steps + 1))
    return grids


@dataclass
class DecayTrajectory:
    """Sampled decay amplitudes.

    ``amplitudes`` is (T, N) for single excitations or (T, N, N) symmetric
    pair matrices for double excitations.  Samples are grouped into
    segments between wall events; the boundary time appears in both
    neighbouring segments, and ``active[s]`` is the active mask of segment s.
    """

    atoms: AtomSet
    cfg: PhysicalConfig
    kind: str
    times: np.ndarray
    amplitudes: np.ndarray
    segments: list
    active: np.ndarray
    t_start: float
    # f(t) = -(dP/dt) / Gamma = Re sum_ml M_ml sinc(k_e d_ml), filled in by the integrator
    flux: np.ndarray = None

    @property
    def initial_population(self):
        return float(self.population()[0])

    def population(self):
        """Remaining excited population at every sample (frozen atoms included)."""
        a2 = np.abs(self.amplitudes) ** 2
        if self.kind == "single":
            return a2.sum(axis=1)
        return 0.5 * a2.sum(axis=(1, 2))

    def lost_to_walls(self):
        """Population frozen on atoms that already hit a wall."""
        out = np.zeros(len(self.times))
        for s, sl in enumerate(self.segments):
            gone = ~self.active[s]
            a2 = np.abs(self.amplitudes[sl]) ** 2
            if self.kind == "single":
                out[sl] = a2[:, gone].sum(axis=1)
            else:
                keep = np.outer(~gone, ~gone)
                out[sl] = 0.5 * (a2.sum(axis=(1, 2)) - a2[:, keep].sum(axis=1))
        return out

    def final(self):
        return self.amplitudes[-1]

    def pair_matrices(self, sl):
        """Emission matrices M for the samples in ``sl``: alpha_n alpha*_m for
        single excitations, sum_n alpha_{n,m} alpha*_{n,l} for doubles, with
        inactive atoms removed."""
        s = self._segment_of(sl)
        act = self.active[s]
        a = self.amplitudes[sl]
        if self.kind == "single":
            a = a * act
            return a[:, :, None] * np.conj(a[:, None, :])
        a = a * np.outer(act, act)
        return np.einsum("tnm,tnl->tml", a, np.conj(a))

    def _segment_of(self, sl):
        for s, seg in enumerate(self.segments):
            if seg.start <= sl.start < seg.stop:
                return s
        raise IndexError("slice outside the trajectory")


def _check_window(window):
    t_start, t_end = map(float, window)
    if t_end < t_start:
        raise IntervalError(f"decay window ends ({t_end}) before it starts ({t_start})")
    return t_start, t_end


def _rk4(rhs, y, grid, substeps):
    """Classical RK4 with ``substeps`` equal steps per grid interval.

    Also returns -dP/dt = -2 Re <y, y'> at every grid point, where P is the
    squared norm, taken from the first stage so it costs no extra work.
    """
    out = np.empty((len(grid),) + y.shape, dtype=complex)
    loss = np.empty(len(grid))
    out[0] = y
    for i in range(len(grid) - 1):
        h = (grid[i + 1] - grid[i]) / substeps
        for j in range(substeps):
            t = grid[i] + j * h
            mid = t + 0.5 * h
            end = grid[i + 1] if j == substeps - 1 else grid[i] + (j + 1) * h
            k1 = rhs(t, y)
            if j == 0:
                loss[i] = -2.0 * np.real(np.vdot(y, k1))
            k2 = rhs(mid, y + 0.5 * h * k1)
            k3 = rhs(mid, y + 0.5 * h * k2)
            k4 = rhs(end, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    loss[-1] = -2.0 * np.real(np.vdot(y, rhs(grid[-1], y)))
    return out, y, loss


def _substeps(rate, h, tol):
    """Substeps so the RK4 local error bound (rate h)^5 / 120 stays below tol."""
    if rate * h == 0.0:
        return 1
    h_max = (120.0 * tol) ** 0.2 / rate
    return max(1, int(np.ceil(h / h_max)))


def _run(rhs_for_mask, y0, atoms, window, dt, tol, min_active=1):
    t_start, t_end = _check_window(window)
    grids = _segment_grid(t_start, t_end, atoms.wall_time, dt, min_active)
    times, states, losses, segments, masks = [], [], [], [], []
    y = y0
    offset = 0
    for grid in grids:
        active = atoms.wall_time > 0.5 * (grid[0] + grid[-1])
        rhs, rate = rhs_for_mask(active, grid[0])
        if rate == 0.0:
            out, loss = np.repeat(y[None], len(grid), axis=0), np.zeros(len(grid))
        else:
            out, y, loss = _rk4(rhs, y, grid, _substeps(rate, grid[1] - grid[0], tol))
        times.append(grid)
        states.append(out)
        losses.append(loss)
        segments.append(slice(offset, offset + len(grid)))
        masks.append(active)
        offset += len(grid)
    return (np.concatenate(times), np.concatenate(states), np.concatenate(losses), segments,
            np.array(masks))


class _CachedSinc:
    """sinc matrix of a sub-ensemble, remembering the last two times (RK4
    evaluates every time point twice); computed once when nothing moves."""

    def __init__(self, geo, k):
        self.geo, self.k = geo, k
        self.cache = {}
        self.static = None if geo.moving else geo.sinc(k, 0.0)

    def __call__(self, t):
        if self.static is not None:
            return self.static
        s = self.cache.get(t)
        if s is None:
            if len(self.cache) >= 2:
                self.cache.pop(next(iter(self.cache)))
            s = self.cache[t] = self.geo.sinc(self.k, t)
        return s

    def bound(self, t):
        """Gershgorin bound on the spectral radius at ``t``."""
        return float(np.max(np.sum(np.abs(self(t)), axis=1), initial=0.0))


def decay_single(alpha0, atoms: AtomSet, cfg: PhysicalConfig, window, tol=1e-10,
                 dt=DEFAULT_DT) -> DecayTrajectory:
    """Integrate d alpha_n/dt = -(Gamma/2) sum_m alpha_m sinc(k_e d_nm(t)).

    Atoms past their wall time keep their amplitude but leave every sum.
    ``window`` is in absolute time (the excitation ends at its start).
    """
    alpha0 = np.asarray(alpha0, dtype=complex)
    if alpha0.shape != (atoms.n_atoms,):
        raise ValueError("one amplitude per atom expected")
    geo = PairGeometry(atoms)
    half_gamma = 0.5 * cfg.gamma
    k = cfg.k_emit

    def rhs_for(active, t_first):
        idx = np.flatnonzero(active)
        sinc = _CachedSinc(geo.restrict(idx), k)

        if len(idx) == len(active):
            def rhs(t, y):
                return -half_gamma * (sinc(t) @ y)
        else:
            def rhs(t, y):
                out = np.zeros_like(y)
                out[idx] = -half_gamma * (sinc(t) @ y[idx])
                return out
        # the bound can grow while atoms approach each other, hence the margin
        return rhs, 2.0 * half_gamma * sinc.bound(t_first)

    times, states, loss, segs, masks = _run(rhs_for, alpha0, atoms, window, dt, tol)
    return DecayTrajectory(atoms, cfg, "single", times, states, segs, masks, float(window[0]),
                           loss * cfg.lifetime_tau)


def pairs_to_matrix(alpha2, n_atoms):
    """Symmetric (N, N) matrix from amplitudes listed for pairs n < m."""
    pairs = pair_indices(n_atoms)
    alpha2 = np.asarray(alpha2, dtype=complex)
    if alpha2.shape != (len(pairs),):
        raise IndexError(f"expected {len(pairs)} pair amplitudes, got {alpha2.shape}")
    a = np.zeros((n_atoms, n_atoms), dtype=complex)
    a[pairs[:, 0], pairs[:, 1]] = alpha2
    return a + a.T


def matrix_to_pairs(a):
    pairs = pair_indices(a.shape[-1])
    return a[..., pairs[:, 0], pairs[:, 1]]


def decay_double(alpha2, atoms: AtomSet, cfg: PhysicalConfig, window, tol=1e-10,
                 dt=DEFAULT_DT) -> DecayTrajectory:
    """Integrate the pair amplitudes alpha_{n,m}, n < m.

    With the symmetric matrix A the equations read dA/dt = -(Gamma/2)(A S + S A)
    off the diagonal.  ``alpha2`` is either the list over pairs n < m or the
    symmetric matrix.  A pair freezes once either of its atoms hit a wall.
    """
    n = atoms.n_atoms
    alpha2 = np.asarray(alpha2, dtype=complex)
    if alpha2.ndim == 2:
        if alpha2.shape != (n, n) or not np.allclose(alpha2, alpha2.T):
            raise IndexError("pair matrix must be symmetric (N, N)")
        alpha2 = matrix_to_pairs(alpha2)
    a0 = pairs_to_matrix(alpha2, n)
    pairs = pair_indices(n)
    geo = PairGeometry(atoms)
    half_gamma = 0.5 * cfg.gamma
    k = cfg.k_emit

    def rhs_for(active, t_first):
        idx = np.flatnonzero(active)
        sinc = _CachedSinc(geo.restrict(idx), k)
        live = np.flatnonzero(active[pairs[:, 0]] & active[pairs[:, 1]])
        local = np.full(n, -1)
        local[idx] = np.arange(len(idx))
        pn, pm = local[pairs[live, 0]], local[pairs[live, 1]]

        def rhs(t, y):
            a = np.zeros((len(idx), len(idx)), dtype=complex)
            a[pn, pm] = y[live]
            a += a.T
            da = a @ sinc(t)
            out = np.zeros_like(y)
            out[live] = -half_gamma * (da[pn, pm] + da[pm, pn])
            return out
        rate = 4.0 * half_gamma * sinc.bound(t_first) if len(live) else 0.0
        return rhs, rate

    times, states, loss, segs, masks = _run(rhs_for, matrix_to_pairs(a0), atoms, window, dt, tol,
                                      min_active=2)
    mats = np.zeros((len(times), n, n), dtype=complex)
    mats[:, pairs[:, 0], pairs[:, 1]] = states
    mats += np.transpose(mats, (0, 2, 1))
    return DecayTrajectory(atoms, cfg, "double", times, mats, segs, masks, float(window[0]),
                           loss * cfg.lifetime_tau)


# -- angular densities ---------------------------------------------------------

def theta_grid(points=THETA_POINTS, theta_max=None):
    """Uniform grid on [0, pi]; with ``theta_max`` only the leading points up
    to and including the first one at or beyond ``theta_max``."""
    theta = np.linspace(0.0, np.pi, points)
    if theta_max is not None:
        stop = int(np.searchsorted(theta, theta_max - 1e-12)) + 1
        theta = theta[:stop]
    return theta


def clenshaw_curtis_weights(points):
    """Weights for int_{-1}^{1} f(mu) d mu on the nodes mu_k = cos(k pi / (points - 1))."""
    n = points - 1
    if n < 1:
        raise ValueError("need at least two nodes")
    theta = np.pi * np.arange(points) / n
    w = np.zeros(points)
    v = np.ones(n - 1)
    inner = slice(1, n)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n * n - 1)
        for j in range(1, n // 2):
            v -= 2.0 * np.cos(2 * j * theta[inner]) / (4 * j * j - 1)
        v -= np.cos(n * theta[inner]) / (n * n - 1)
    else:
        w[0] = w[n] = 1.0 / (n * n)
        for j in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * j * theta[inner]) / (4 * j * j - 1)
    w[inner] = 2.0 * v / n
    return w


def angular_kernel(k, d_par, d_perp, theta):
    """exp(-i k d_par cos(theta)) J0(k d_perp sin(theta)) broadcast over theta (last axis)."""
    d_par = np.asarray(d_par, dtype=float)[..., None]
    d_perp = np.asarray(d_perp, dtype=float)[..., None]
    return np.exp(-1j * k * d_par * np.cos(theta)) * j0(k * d_perp * np.sin(theta))


def kernel_integral(k, d_par, d_perp, points=THETA_POINTS):
    """int_0^pi (sin(theta)/2) kernel d theta by Clenshaw-Curtis in cos(theta)."""
    theta = theta_grid(points)
    w = clenshaw_curtis_weights(points)
    return 0.5 * angular_kernel(k, d_par, d_perp, theta) @ w


def _split_parallel(sep, axis):
    par = sep @ axis
    perp = np.sqrt(np.maximum(np.sum(sep * sep, axis=-1) - par * par, 0.0))
    return par, perp


@dataclass
class AngularProfile:
    """p(theta, t): emitted population density per radian at every
    trajectory sample time (the running time integral is built in)."""

    theta: np.ndarray
    times: np.ndarray
    density: np.ndarray
    full_grid: bool
    # p / sin(theta), finite at the poles
    per_solid_angle: np.ndarray

    def at(self, t=None):
        """Density at the sample closest to ``t`` (default: final time)."""
        if t is None:
            return self.density[-1]
        return self.density[int(np.argmin(np.abs(self.times - t)))]

    def total(self, index=-1):
        """int_0^pi p d theta at one sample, Clenshaw-Curtis in cos(theta)
        applied to p / sin(theta)."""
        if not self.full_grid:
            raise ValueError("total emission needs the full [0, pi] grid")
        return float(clenshaw_curtis_weights(len(self.theta)) @ self.per_solid_angle[index])

    def totals(self):
        return np.array([self.total(i) for i in range(len(self.times))])

    def to_csv(self, path, ensemble_id=0, index=-1, append=False):
        write_series_csv(path, ("theta_rad", "p_per_rad"), self.theta, self.density[index],
                         ensemble_id, append)


def _integrand(traj: DecayTrajectory, theta, chunk=64):
    """q(theta, t) = Re sum_{n,m} M_nm(t) K_nm(theta, t), one row per sample,
    so that p = (Gamma / 2) sin(theta) int q dt."""
    atoms = traj.atoms
    cfg = traj.cfg
    axis = np.array([1.0, 0.0, 0.0]) * np.sign(cfg.k0)
    k = cfg.k_emit
    geo = PairGeometry(atoms)
    n = atoms.n_atoms
    iu = np.triu_indices(n, k=1)
    q = np.zeros((len(traj.times), len(theta)))
    static_kernel = None
    if not geo.moving:
        par, perp = _split_parallel(geo.r0[iu], axis)
        static_kernel = angular_kernel(k, par, perp, theta)  # (P, Q)
    for s, seg in enumerate(traj.segments):
        act = traj.active[s]
        keep = act[iu[0]] & act[iu[1]]
        for start in range(seg.start, seg.stop, chunk):
            sl = slice(start, min(start + chunk, seg.stop))
            m = traj.pair_matrices(sl)
            diag = np.real(np.einsum("tnn->t", m))
            mp = m[:, iu[0][keep], iu[1][keep]]
            if static_kernel is not None:
                cross = mp @ static_kernel[keep]
            else:
                cross = np.empty((mp.shape[0], len(theta)), dtype=complex)
                for i, t in enumerate(traj.times[sl]):
                    sep = geo.r0[iu][keep] + geo.v[iu][keep] * t
                    par, perp = _split_parallel(sep, axis)
                    cross[i] = mp[i] @ angular_kernel(k, par, perp, theta)
            q[sl] = diag[:, None] + 2.0 * np.real(cross)
    return q


def _cumulative_time_integral(traj: DecayTrajectory, values):
    """Running int_{t_start}^t values dt (Simpson within each wall segment)."""
    out = np.zeros_like(values)
    carry = np.zeros(values.shape[1:])
    for seg in traj.segments:
        t = traj.times[seg]
        part = cumulative_simpson(values[seg], x=t, axis=0, initial=0.0)
        out[seg] = carry + part
        carry = out[seg][-1]
    return out


def angular_density(traj: DecayTrajectory, theta_points=THETA_POINTS, theta_max=None,
                    chunk=64) -> AngularProfile:
    """Photon population density p(theta, t) emitted by a decay trajectory.

    For single excitations this is the first (and only) photon; for double
    excitations it is the first photon, with M_ml = sum_n alpha_nm alpha*_nl.
    ``theta_max`` restricts the grid to the forward cone to save time.
    """
    if traj.kind == "double":
        _check_budget(traj)
    theta = theta_grid(theta_points, theta_max)
    q = _integrand(traj, theta, chunk)
    integral = _cumulative_time_integral(traj, q)
    per_solid_angle = 0.5 * traj.cfg.gamma * integral
    return AngularProfile(theta, traj.times, np.sin(theta) * per_solid_angle,
                          theta_max is None, per_solid_angle)


def first_photon_density(traj: DecayTrajectory, theta_points=THETA_POINTS, theta_max=None,
                         chunk=64) -> AngularProfile:
    if traj.kind != "double":
        raise ValueError("first-photon density needs a double-excitation trajectory")
    return angular_density(traj, theta_points, theta_max, chunk)


def _check_budget(traj):
    budget = float(os.environ.get(BUDGET_ENV, DEFAULT_BUDGET))
    cost = float(traj.atoms.n_atoms) ** 3 * len(traj.times)
    if cost > budget:
        raise ResourceError(f"N^3 * samples = {cost:.3g} exceeds the budget {budget:.3g} "
                            f"(set {BUDGET_ENV} to raise it)")


def cone_population(profile: AngularProfile, theta_max=np.pi / 6, index=-1):
    """Trapezoidal int_0^theta_max p(theta) d theta at one sample."""
    if not 0.0 <= theta_max <= np.pi:
        raise ValueError("theta_max must lie in [0, pi]")
    theta = profile.theta
    if theta_max > theta[-1] + 1e-12:
        raise ValueError("profile grid does not reach theta_max")
    p = profile.density[index]
    inside = theta <= theta_max + 1e-12
    th, pp = theta[inside], p[inside]
    if th[-1] < theta_max:
        nxt = len(th)
        frac = (theta_max - th[-1]) / (theta[nxt] - th[-1])
        th = np.append(th, theta_max)
        pp = np.append(pp, pp[-1] + frac * (p[nxt] - pp[-1]))
    return float(np.trapezoid(pp, th))


def isotropic_cone_fraction(theta_max):
    return 0.5 * (1.0 - np.cos(theta_max))


# -- rates ---------------------------------------------------------------------

def _sinc_contraction(traj: DecayTrajectory):
    """f(t) = Re sum_{m,l} M_ml(t) sinc(k_e d_ml(t)) at every sample."""
    if traj.flux is not None:
        return traj.flux
    geo = PairGeometry(traj.atoms)
    k = traj.cfg.k_emit
    out = np.empty(len(traj.times))
    for s, seg in enumerate(traj.segments):
        idx = np.flatnonzero(traj.active[s])
        sub = geo.restrict(idx)
        for i in range(seg.start, seg.stop):
            a = traj.amplitudes[i]
            sinc = sub.sinc(k, traj.times[i])
            if traj.kind == "single":
                a = a[idx]
                out[i] = np.real(np.vdot(a, sinc @ a))
            else:
                a = a[np.ix_(idx, idx)]
                out[i] = np.real(np.vdot(a, a @ sinc))
    return out


def emission_rate(traj: DecayTrajectory):
    """-d/dt of the excited population in units of Gamma times the initial
    population, from the right-hand side of the amplitude equations."""
    pop0 = traj.initial_population
    if pop0 == 0:
        return traj.times, np.zeros(len(traj.times))
    return traj.times, _sinc_contraction(traj) / pop0


class ExponentialRatio:
    """Model of d_t|beta(t)|^2 / |beta(t')|^2 as Gamma exp(-Gamma (t - t')):
    the remaining atom decays on its own."""

    def __init__(self, gamma):
        self.gamma = gamma

    def convolve(self, times, f, segments):
        """int_{t0}^t Gamma exp(-Gamma (t - t')) f(t') dt' on the sample grid."""
        g = self.gamma
        t0 = times[0]
        w = np.exp(g * (times - t0))
        integral = np.zeros_like(f)
        carry = 0.0
        for seg in segments:
            part = cumulative_simpson(w[seg] * f[seg], x=times[seg], initial=0.0)
            integral[seg] = carry + part
            carry = integral[seg][-1]
        return g * np.exp(-g * (times - t0)) * integral


def second_photon_rate(traj: DecayTrajectory, model=None):
    """Emission rate of the second photon (units of Gamma) for a
    double-excitation trajectory."""
    if traj.kind != "double":
        raise ValueError("second-photon rate needs a double-excitation trajectory")
    model = ExponentialRatio(traj.cfg.gamma) if model is None else model
    f = _sinc_contraction(traj)
    return traj.times, model.convolve(traj.times, f, traj.segments)


def peak(times, rate):
    i = int(np.argmax(rate))
    return float(times[i]), float(rate[i])


# -- grouping ------------------------------------------------------------------

def group_samples(samples, group_size):
    """Merge consecutive samples into ensembles of ``group_size`` samples.

    ``samples`` is a list of (AtomSet, alpha0) pairs; amplitudes are rescaled
    by 1/sqrt(group_size) so each merged ensemble keeps the mean norm.
    """
    if group_size < 1 or len(samples) % group_size:
        raise GroupingError(f"group size {group_size} does not divide {len(samples)} samples")
    out = []
    scale = 1.0 / np.sqrt(group_size)
    for g in range(0, len(samples), group_size):
        chunk = samples[g:g + group_size]
        atoms = AtomSet.concatenate([a for a, _ in chunk])
        alpha = np.concatenate([np.asarray(al, dtype=complex) for _, al in chunk]) * scale
        out.append((atoms, alpha))
    return out


# -- output --------------------------------------------------------------------

def write_series_csv(path, columns, x, y, ensemble_id=0, append=False):
    """Plot-ready CSV with header ``columns + (ensemble_id,)``."""
    new = not append or not os.path.exists(path)
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(list(columns) + ["ensemble_id"])
        for a, b in zip(x, y):
            writer.writerow([repr(float(a)), repr(float(b)), ensemble_id])
