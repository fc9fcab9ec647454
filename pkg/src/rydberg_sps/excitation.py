"""Rotating-frame Hamiltonian of the three-pulse excitation, its propagation
and the diagnostics evaluated on the final many-body state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar

from .config import PhysicalConfig
from .ensemble import AtomSet, mean_beam_factor, pair_indices, polyfit_channels
from .errors import AssemblyError, EmptyTargetError, FitError, FrameError
from .hilbert import (DOUBLE, GROUND, SINGLE, TRIPLE, TruncatedBasis, build_basis,
                      indirect_hamiltonian_terms, pair_effective_couplings)
from .integrate import integrate
from .pulses import PulseSequence, doppler_detunings

ROTATING = "rotating"
LAB = "lab"

# (lower level, upper level) driven by lasers 1, 2, 3
TRANSITIONS = ((0, 1), (1, 2), (3, 2))


@dataclass
class StateVector:
    basis: TruncatedBasis
    amplitudes: np.ndarray
    frame: str = ROTATING
    time: float = 0.0
    drift: np.ndarray | None = field(default=None, repr=False)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def copy(self, **changes):
        data = dict(basis=self.basis, amplitudes=self.amplitudes.copy(), frame=self.frame,
                    time=self.time, drift=self.drift)
        data.update(changes)
        return StateVector(**data)

    def single_e(self):
        """Amplitudes of |e_n>, one per atom."""
        idx = [self.basis.single(n, "e") for n in range(self.basis.n_atoms)]
        return self.amplitudes[idx]

    def double_ee(self):
        """Symmetric (n_atoms, n_atoms) matrix of |e_n e_m> amplitudes, zero diagonal."""
        n_atoms = self.basis.n_atoms
        out = np.zeros((n_atoms, n_atoms), dtype=complex)
        for n, m in pair_indices(n_atoms):
            out[n, m] = out[m, n] = self.amplitudes[self.basis.double(n, "e", m, "e")]
        return out

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "real", "imag"])
            for label, a in zip(self.basis.labels, self.amplitudes):
                writer.writerow(["|" + ",".join(map(str, label)) + ">",
                                 repr(float(a.real)), repr(float(a.imag))])


def ground_state(basis: TruncatedBasis) -> StateVector:
    amp = np.zeros(basis.dim, dtype=complex)
    amp[0] = 1.0
    return StateVector(basis, amp)


# -- assembly -----------------------------------------------------------------

def transition_structure(basis: TruncatedBasis):
    """For each laser: arrays (rows, cols, atoms) of |upper><lower| elements
    acting on ``atoms`` inside the truncated basis."""
    out = []
    for lower, upper in TRANSITIONS:
        rows, cols, atoms = [], [], []
        letters = "gire"
        for k in range(basis.dim):
            kind = basis.kind[k]
            if kind == GROUND:
                if lower == 0:
                    for n in range(basis.n_atoms):
                        rows.append(basis.single(n, letters[upper]))
                        cols.append(k)
                        atoms.append(n)
                continue
            a, la = basis.atom_a[k], basis.level_a[k]
            if kind == SINGLE:
                if la == lower:
                    rows.append(basis.single(a, letters[upper]))
                    cols.append(k)
                    atoms.append(a)
                if lower == 0:
                    for n in range(basis.n_atoms):
                        if n != a:
                            rows.append(basis.double(a, letters[la], n, letters[upper]))
                            cols.append(k)
                            atoms.append(n)
                continue
            b, lb = basis.atom_b[k], basis.level_b[k]
            tag = "D" if kind == DOUBLE else "T"
            if la == lower:
                rows.append(basis.double(a, letters[upper], b, letters[lb], tag))
                cols.append(k)
                atoms.append(a)
            if lb == lower:
                rows.append(basis.double(a, letters[la], b, letters[upper], tag))
                cols.append(k)
                atoms.append(b)
        out.append((np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                    np.array(atoms, dtype=np.int64)))
    return out


@dataclass
class Segment:
    """Hamiltonian on one interval between laser switching events:
    H(t) = diag(const + sum_a t^a diag_poly[a] on diag_index) + sum_a t^a offdiag[a]."""

    t_start: float
    t_end: float
    diag: np.ndarray
    diag_index: np.ndarray
    diag_poly: np.ndarray
    offdiag: list

    def diagonal(self, t):
        d = self.diag.copy()
        if len(self.diag_index):
            d[self.diag_index] += np.polynomial.polynomial.polyval(t, self.diag_poly)
        return d

    def __post_init__(self):
        # all powers stacked so one matvec serves the whole polynomial
        self._stacked = sp.vstack(self.offdiag, format="csr")

    def apply(self, t, y):
        parts = (self._stacked @ y).reshape(len(self.offdiag), -1)
        acc = parts[-1]
        for part in parts[-2::-1]:
            acc = t * acc + part
        return self.diagonal(t) * y + acc

    def matrix(self, t):
        m = sp.diags(self.diagonal(t)).astype(complex)
        for a, op in enumerate(self.offdiag):
            m = m + op * t ** a
        return m.tocsr()


@dataclass
class Hamiltonian:
    """Piecewise time-polynomial sparse operator (units of hbar, rad/ns)."""

    basis: TruncatedBasis
    segments: list
    drift: np.ndarray

    def segment_at(self, t):
        for seg in self.segments:
            if seg.t_start <= t < seg.t_end:
                return seg
        if self.segments and t == self.segments[-1].t_end:
            return self.segments[-1]
        raise ValueError(f"t={t} outside the Hamiltonian's time range")

    def matrix(self, t):
        return self.segment_at(t).matrix(t)

    @property
    def t_end(self):
        return self.segments[-1].t_end if self.segments else 0.0


def level_energies(atoms: AtomSet, cfg: PhysicalConfig, pulses: PulseSequence):
    """Rotating-frame drift energy of each single-atom level, shape (n, 4)."""
    det = doppler_detunings(atoms, cfg, pulses)
    e = np.zeros((atoms.n_atoms, 4))
    e[:, 1] = -det[0]
    e[:, 2] = -(det[0] + det[1])
    e[:, 3] = -(det[0] + det[1] - det[2])
    return e


def drift_diagonal(basis, atoms, cfg, pulses):
    """Diagonal of the rotating-frame drift Hamiltonian for every basis state;
    the effective spectator contributes the mean laser-1 detuning."""
    e = level_energies(atoms, cfg, pulses)
    d = np.zeros(basis.dim)
    has_a = basis.atom_a >= 0
    d[has_a] += e[basis.atom_a[has_a], basis.level_a[has_a]]
    has_b = basis.atom_b >= 0
    d[has_b] += e[basis.atom_b[has_b], basis.level_b[has_b]]
    trip = np.flatnonzero(basis.kind == TRIPLE)
    if len(trip):
        det1 = doppler_detunings(atoms, cfg, pulses)[0]
        total = det1.sum()
        a, b = basis.atom_a[trip], basis.atom_b[trip]
        d[trip] -= (total - det1[a] - det1[b]) / (atoms.n_atoms - 2)
    return d


class HamiltonianBuilder:
    """Caches the pulse-independent structure of one sample so that repeated
    assembly (e.g. inside an optimizer) only redoes the pulse-dependent parts."""

    def __init__(self, atoms: AtomSet, cfg: PhysicalConfig, basis: TruncatedBasis | None = None):
        self.atoms = atoms
        self.cfg = cfg
        self.basis = build_basis(atoms.n_atoms) if basis is None else basis
        if self.basis.n_atoms != atoms.n_atoms:
            raise AssemblyError("basis and atom set sizes differ")
        self.transitions = transition_structure(self.basis)
        b = self.basis
        rr = np.flatnonzero((b.kind >= DOUBLE) & (b.level_a == 2) & (b.level_b == 2))
        n_atoms = atoms.n_atoms
        pair_id = np.full((n_atoms, n_atoms), -1)
        for p, (n, m) in enumerate(pair_indices(n_atoms)):
            pair_id[n, m] = p
        self.rr_index = rr
        self.rr_pair = pair_id[b.atom_a[rr], b.atom_b[rr]]
        self.triples = np.flatnonzero(b.kind == TRIPLE)
        if len(self.triples):
            parents = [b.index[("D",) + b.labels[k][1:]] for k in self.triples]
            self.triple_parent = np.array(parents)
        else:
            self.triple_parent = np.zeros(0, dtype=int)

    def fit(self, pulses: PulseSequence, window_end=None):
        t_end = pulses.t0 if window_end is None else window_end
        windows = [pulses.window(j) for j in range(3)] + [(0.0, t_end)]
        return polyfit_channels(self.atoms, self.cfg, windows)

    def build(self, pulses: PulseSequence, fits=None, t_end=None) -> Hamiltonian:
        atoms, cfg, basis = self.atoms, self.cfg, self.basis
        t_end = pulses.t0 if t_end is None else t_end
        if fits is None:
            fits = self.fit(pulses, t_end)
        if len(fits.envelopes) != 3 or fits.interaction.shape[1] != len(pair_indices(atoms.n_atoms)):
            raise AssemblyError("missing fit channel")
        for j in range(3):
            if fits.envelopes[j].shape[1] != atoms.n_atoms:
                raise AssemblyError(f"missing envelope fits for laser {j + 1}")
        dim = basis.dim
        drift = drift_diagonal(basis, atoms, cfg, pulses)
        k = cfg.wavevectors

        # per-laser COO pieces, coefficient shape (n_elements, order + 1)
        laser_terms = []
        for j, (rows, cols, who) in enumerate(self.transitions):
            if pulses.rabi[j] == 0.0 or pulses.durations[j] == 0.0:
                laser_terms.append(None)
                continue
            amp = 0.5 * pulses.rabi[j] * np.exp(1j * k[j] * atoms.positions[who, 0])
            coef = amp[:, None] * fits.envelopes[j][:, who].T
            laser_terms.append((np.concatenate([rows, cols]), np.concatenate([cols, rows]),
                                np.concatenate([coef, np.conj(coef)])))

        eff_rows = eff_cols = eff_vals = None
        eff_shift = np.zeros(len(self.triples))
        indirect = None
        if len(self.triples) and pulses.rabi[0] != 0.0 and pulses.durations[0] > 0:
            couplings = pair_effective_couplings(atoms, cfg, pulses)
            a = basis.atom_a[self.triples]
            b = basis.atom_b[self.triples]
            rabi = np.array([couplings[x, y].effective_rabi for x, y in zip(a, b)])
            if not np.all(np.isfinite(rabi)):
                raise AssemblyError("non-finite effective coupling")
            eff_shift = np.array([-(couplings[x, y].effective_detuning - couplings[x, y].mean_detuning)
                                  for x, y in zip(a, b)])
            eff_rows = np.concatenate([self.triples, self.triple_parent])
            eff_cols = np.concatenate([self.triple_parent, self.triples])
            eff_vals = np.concatenate([0.5 * rabi, 0.5 * rabi]).astype(complex)
            indirect = indirect_hamiltonian_terms(atoms, cfg, pulses, basis, fits)

        diag_poly = fits.interaction[:, self.rr_pair] if len(self.rr_index) else np.zeros((1, 0))

        segments = []
        edges = pulses.edges(t_end)
        for t_a, t_b in zip(edges[:-1], edges[1:]):
            if t_b <= t_a:
                continue
            mid = 0.5 * (t_a + t_b)
            on = [pulses.is_on(j, mid) and laser_terms[j] is not None for j in range(3)]
            pieces = [laser_terms[j] for j in range(3) if on[j]]
            diag = drift.copy()
            if on[0] and eff_rows is not None:
                pieces.append((eff_rows, eff_cols, eff_vals[:, None]))
                if indirect is not None and len(indirect):
                    pieces.append((indirect.rows, indirect.cols, indirect.coeffs))
                diag[self.triples] += eff_shift
            order = max([p[2].shape[1] for p in pieces], default=1) - 1
            offdiag = []
            for a_pow in range(order + 1):
                r = [p[0] for p in pieces if p[2].shape[1] > a_pow]
                c = [p[1] for p in pieces if p[2].shape[1] > a_pow]
                v = [p[2][:, a_pow] for p in pieces if p[2].shape[1] > a_pow]
                if r:
                    op = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                                       shape=(dim, dim))
                    op.sum_duplicates()
                else:
                    op = sp.csr_matrix((dim, dim), dtype=complex)
                offdiag.append(op)
            segments.append(Segment(t_a, t_b, diag, self.rr_index, diag_poly, offdiag))
        return Hamiltonian(basis, segments, drift)


def assemble_hamiltonian(atoms, cfg, pulses, basis=None, fits=None, t_end=None) -> Hamiltonian:
    return HamiltonianBuilder(atoms, cfg, basis).build(pulses, fits, t_end)


# -- propagation ---------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    amplitudes: np.ndarray
    final: StateVector
    norm_drift: float


def propagate(h: Hamiltonian, psi0: StateVector, window=None, tol=1e-8,
              sample_times=None) -> Trajectory:
    """Solve i d/dt psi = H(t) psi (rotating frame) over ``window``.

    The stepper runs at ``tol / 10`` so the accumulated norm drift stays
    within ``10 * tol`` over a pulse sequence.
    """
    if psi0.frame != ROTATING:
        raise FrameError("propagate expects a rotating-frame state")
    t_a, t_b = (0.0, h.t_end) if window is None else window
    if sample_times is None:
        sample_times = np.array([t_b])
    cuts = [s.t_start for s in h.segments]

    def rhs(t, y, seg_idx):
        return -1j * owned[seg_idx].apply(t, y)

    edges = [t_a] + sorted(c for c in cuts if t_a < c < t_b) + [t_b]
    owned = [h.segment_at(0.5 * (x + y)) for x, y in zip(edges[:-1], edges[1:])]
    times, amps, final = integrate(rhs, psi0.amplitudes, t_a, t_b, sample_times,
                                   edges[1:-1], tol=0.1 * tol)
    drift = abs(np.linalg.norm(final) - np.linalg.norm(psi0.amplitudes))
    state = StateVector(h.basis, final, ROTATING, t_b, h.drift)
    return Trajectory(times, amps, state, drift)


def to_lab_frame(psi: StateVector, t: float | None = None, inverse=False) -> StateVector:
    """Undo the rotating-frame transformation: each basis state picks up
    exp(+i * drift * t), e.g. exp(-i (d1 + d2 - d3) t) on |e_n>."""
    if psi.drift is None:
        raise FrameError("state carries no drift diagonal")
    if inverse:
        if psi.frame != LAB:
            raise FrameError("state is not in the lab frame")
    elif psi.frame != ROTATING:
        raise FrameError("state is already in the lab frame")
    t = psi.time if t is None else t
    sign = -1.0 if inverse else 1.0
    amp = psi.amplitudes * np.exp(sign * 1j * psi.drift * t)
    return psi.copy(amplitudes=amp, frame=ROTATING if inverse else LAB, time=t)


def from_lab_frame(psi: StateVector, t: float | None = None) -> StateVector:
    return to_lab_frame(psi, t, inverse=True)


# -- diagnostics --------------------------------------------------------------

def rabi_weights(atoms, cfg, pulses):
    """|<Omega_12,n><Omega_3,n>| up to a common factor: time-averaged envelope
    products of lasers 1-2 and 3, divided by the Doppler-shifted detuning."""
    w1, w2, w3 = cfg.beam_waists
    t1, t2 = pulses.window(0)
    t1b, t2b = pulses.window(1)
    lo, hi = max(t1, t1b), min(t2, t2b)
    if hi < lo:
        lo = hi = t1
    w12 = 1.0 / np.sqrt(1.0 / w1 ** 2 + 1.0 / w2 ** 2)
    g12 = mean_beam_factor(atoms, w12, lo, hi)
    g3 = mean_beam_factor(atoms, w3, *pulses.window(2))
    det1 = doppler_detunings(atoms, cfg, pulses)[0]
    return np.abs(g12 * g3 / det1)


def w_amplitudes(atoms, cfg, pulses, t_w, weighting="rabi"):
    """Per-atom amplitudes w_n exp(i k0 x_n(t_W)) of the normalized W state."""
    if atoms.n_atoms == 0:
        raise EmptyTargetError("no atoms left to build a W state")
    if t_w < 0:
        raise ValueError("t_W must be non-negative")
    if weighting == "uniform":
        w = np.ones(atoms.n_atoms)
    elif weighting == "rabi":
        w = rabi_weights(atoms, cfg, pulses)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    norm = np.linalg.norm(w)
    if norm == 0:
        raise EmptyTargetError("all W-state weights vanish")
    x = atoms.positions_at(t_w)[:, 0]
    return w / norm * np.exp(1j * cfg.k0 * x)


def w_state_target(atoms, cfg, pulses, t_w, weighting="rabi", basis=None) -> StateVector:
    """|W(t_W)> = sum_n w_n exp(i k0 x_n(t_W)) |e_n> in the lab frame."""
    alpha = w_amplitudes(atoms, cfg, pulses, t_w, weighting)
    basis = build_basis(atoms.n_atoms) if basis is None else basis
    amp = np.zeros(basis.dim, dtype=complex)
    amp[[basis.single(n, "e") for n in range(atoms.n_atoms)]] = alpha
    return StateVector(basis, amp, LAB, float(t_w))


def fidelity(psi: StateVector, target: StateVector) -> float:
    if psi.frame != LAB or target.frame != LAB:
        raise FrameError("fidelity needs two lab-frame states")
    if psi.basis.dim != target.basis.dim:
        raise ValueError("states live in different bases")
    return float(abs(np.vdot(target.amplitudes, psi.amplitudes)) ** 2)


@dataclass(frozen=True)
class SectorPopulations:
    ground: float
    single_e: float
    double_ee: float
    other: float


def sector_populations(psi: StateVector) -> SectorPopulations:
    b = psi.basis
    p = np.abs(psi.amplitudes) ** 2
    ground = p[0]
    single = p[(b.kind == SINGLE) & (b.level_a == 3)].sum()
    double = p[(b.kind == DOUBLE) & (b.level_a == 3) & (b.level_b == 3)].sum()
    return SectorPopulations(float(ground), float(single), float(double),
                             float(p.sum() - ground - single - double))


# -- phase time -----------------------------------------------------------------

# +1 for absorbed photons (lasers 1, 2), -1 for the stimulated emission into laser 3
CHAIN_SIGNS = (1.0, 1.0, -1.0)


def phase_time(pulses: PulseSequence, cfg: PhysicalConfig, lasers=(0, 1, 2)) -> float:
    """Phase time from the pulse timing alone.

    Each laser j imprints k_j v (t_s,j + dt_j / 2) on the excited state; the
    phase time is the accumulated slope divided by the slope of the mixed wave
    vector over the selected lasers.
    """
    k = cfg.wavevectors
    num = sum(CHAIN_SIGNS[j] * k[j] * (pulses.starts[j] + 0.5 * pulses.durations[j])
              for j in lasers)
    den = sum(CHAIN_SIGNS[j] * k[j] for j in lasers)
    return float(num / den)


def single_pulse_phase_time(t_start, duration):
    """Phase time of one two-level pulse: t_s + dt / 2."""
    return t_start + 0.5 * duration


def phase_time_from_phases(phases, kv, weights=None, search=(-5.0, 10.0)):
    """Circular least-squares fit of phases = c + t_phi * kv.

    Maximises |sum_n w_n exp(i (phase_n - t kv_n))| over t, which is the
    least-squares fit on the unit circle and insensitive to 2 pi wrapping.
    """
    phases = np.asarray(phases, dtype=float)
    kv = np.asarray(kv, dtype=float)
    w = np.ones_like(phases) if weights is None else np.asarray(weights, dtype=float)
    if len(np.unique(np.round(kv, 12))) < 2:
        raise FitError("phase-time fit needs at least two distinct velocities")
    z = w * np.exp(1j * phases)

    def cost(t):
        return -abs(np.sum(z * np.exp(-1j * kv * t)))

    spread = np.ptp(kv)
    grid = np.linspace(search[0], search[1], max(200, int(20 * spread * (search[1] - search[0]))))
    values = [cost(t) for t in grid]
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)


def phase_time_from_state(psi: StateVector, atoms: AtomSet, cfg: PhysicalConfig) -> float:
    """Ensemble phase time of a lab-frame state from the |e_n> phases."""
    if psi.frame != LAB:
        raise FrameError("phase time needs a lab-frame state")
    alpha = psi.single_e()
    phases = np.angle(alpha) - cfg.k0 * atoms.positions[:, 0]
    kv = cfg.k0 * atoms.velocities[:, 0]
    return phase_time_from_phases(phases, kv, np.abs(alpha) ** 2)


# -- one-call driver ------------------------------------------------------------

@dataclass
class ExcitationResult:
    atoms: AtomSet
    pulses: PulseSequence
    state: StateVector
    norm_drift: float

    @property
    def alpha_single(self):
        return self.state.single_e()

    @property
    def alpha_double(self):
        return self.state.double_ee()


def excite(atoms, cfg, pulses, tol=1e-7, builder=None) -> ExcitationResult:
    """Propagate |G> through ``pulses`` and return the lab-frame final state."""
    builder = HamiltonianBuilder(atoms, cfg) if builder is None else builder
    h = builder.build(pulses)
    traj = propagate(h, ground_state(builder.basis), (0.0, pulses.t0), tol=tol)
    return ExcitationResult(atoms, pulses, to_lab_frame(traj.final, pulses.t0), traj.norm_drift)
