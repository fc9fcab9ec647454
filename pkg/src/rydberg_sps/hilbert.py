"""Truncated low-excitation basis and effective third-excitation couplings."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import DegeneratePerturbationError, SingularEliminationError
from .ensemble import mean_beam_factor
from .pulses import doppler_detunings

LEVELS = ("i", "r", "e")
LEVEL_CODE = {"g": 0, "i": 1, "r": 2, "e": 3}

GROUND, SINGLE, DOUBLE, TRIPLE = 0, 1, 2, 3


class TruncatedBasis:
    """Ground state, all single and double excitations over {i, r, e}, and one
    effective triple per double (a spectator in ``i``) when ``n_atoms >= 3``.

    Labels are tuples: ``("G",)``, ``("S", n, s)``, ``("D", n, m, s_n, s_m)``
    with ``n < m``, and ``("T", n, m, s_n, s_m)`` for the effective triple
    attached to the corresponding double.
    """

    def __init__(self, n_atoms: int):
        if n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        self.n_atoms = n_atoms
        labels = [("G",)]
        labels += [("S", n, s) for n in range(n_atoms) for s in LEVELS]
        doubles = [("D", n, m, sn, sm)
                   for n in range(n_atoms) for m in range(n + 1, n_atoms)
                   for sn in LEVELS for sm in LEVELS]
        labels += doubles
        if n_atoms >= 3:
            labels += [("T",) + d[1:] for d in doubles]
        self.labels = labels
        self.index = {label: k for k, label in enumerate(labels)}

        dim = len(labels)
        self.kind = np.empty(dim, dtype=np.int8)
        self.atom_a = np.full(dim, -1, dtype=np.int64)
        self.atom_b = np.full(dim, -1, dtype=np.int64)
        self.level_a = np.zeros(dim, dtype=np.int8)
        self.level_b = np.zeros(dim, dtype=np.int8)
        kinds = {"G": GROUND, "S": SINGLE, "D": DOUBLE, "T": TRIPLE}
        for k, label in enumerate(labels):
            self.kind[k] = kinds[label[0]]
            if label[0] == "S":
                self.atom_a[k], self.level_a[k] = label[1], LEVEL_CODE[label[2]]
            elif label[0] in "DT":
                self.atom_a[k], self.atom_b[k] = label[1], label[2]
                self.level_a[k], self.level_b[k] = LEVEL_CODE[label[3]], LEVEL_CODE[label[4]]

    @property
    def dim(self):
        return len(self.labels)

    def __len__(self):
        return self.dim

    def label(self, k):
        return self.labels[k]

    def single(self, n, s):
        return self.index[("S", n, s)]

    def double(self, n, sn, m, sm, kind="D"):
        """Index of the (unordered) double excitation {n: sn, m: sm}."""
        if n > m:
            n, sn, m, sm = m, sm, n, sn
        return self.index[(kind, n, m, sn, sm)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "kind", "atom_a", "level_a", "atom_b", "level_b"])
            for k, label in enumerate(self.labels):
                row = list(label[1:]) + [""] * (4 - len(label[1:]))
                if label[0] == "S":
                    row = [label[1], label[2], "", ""]
                elif label[0] in "DT":
                    row = [label[1], label[3], label[2], label[4]]
                writer.writerow([k, label[0]] + row)


def basis_dimension(n_atoms):
    doubles = 9 * n_atoms * (n_atoms - 1) // 2
    return 1 + 3 * n_atoms + doubles + (doubles if n_atoms >= 3 else 0)


def build_basis(n_atoms: int) -> TruncatedBasis:
    return TruncatedBasis(n_atoms)


# -- effective third excitation ------------------------------------------------

@dataclass(frozen=True)
class EffectiveCoupling:
    parent: tuple
    mean_detuning: float
    mean_rabi: float
    effective_detuning: float
    effective_rabi: float


def bright_block(detunings, rabis):
    """(N-1)-dimensional block: parent state plus one spectator in ``i`` each."""
    detunings = np.asarray(detunings, dtype=float)
    rabis = np.abs(np.asarray(rabis))
    h = np.zeros((len(detunings) + 1,) * 2)
    h[0, 1:] = h[1:, 0] = rabis / 2.0
    h[1:, 1:] = np.diag(-detunings)
    return h


def _rs_third_order(energies, v, n):
    """Rayleigh-Schroedinger energy of level ``n`` through third order."""
    others = np.arange(len(energies)) != n
    gap = energies[n] - energies[others]
    vn = v[n, others]
    e1 = v[n, n]
    e2 = np.sum(vn * vn / gap)
    w = vn / gap
    e3 = w @ v[np.ix_(others, others)] @ w - e1 * np.sum(vn * vn / gap ** 2)
    return energies[n] + e1 + e2 + e3


# largest |V_bk| / |E_b - E_k| for which the perturbation series is trusted
SERIES_LIMIT = 0.5


def _series_ratio(energies, v):
    worst = 0.0
    for b in (0, 1):
        others = np.arange(len(energies)) != b
        coupling = np.abs(v[b, others])
        gap = np.abs(energies[b] - energies[others])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(coupling > 0, coupling / gap, 0.0)
        worst = max(worst, float(np.max(ratio, initial=0.0)))
    return worst


def _spectral_levels(detunings, rabis, e_plus, e_minus):
    """Parent-weighted mean energy of the exact levels closest to each bright
    level.  Used when a bright level sits inside the dark manifold and the
    series diverges; it keeps the first spectral moment seen by the parent."""
    energies, vecs = np.linalg.eigh(bright_block(detunings, rabis))
    weight = np.abs(vecs[0]) ** 2
    upper = np.abs(energies - e_plus) <= np.abs(energies - e_minus)
    out = []
    for group, fallback in ((upper, e_plus), (~upper, e_minus)):
        w = weight[group].sum()
        out.append(float(weight[group] @ energies[group] / w) if w > 0 else fallback)
    return out


def effective_coupling(detunings, rabis, parent=None, tol=1e-6) -> EffectiveCoupling:
    """Collapse the spectator excitations of one double state into a single
    effective level.

    ``detunings`` and ``rabis`` are the Doppler-shifted laser-1 detunings and
    time-averaged Rabi frequencies of the spectator atoms.  The spread of the
    detunings around their mean is treated perturbatively (third order) on the
    two bright eigenvalues; the dark combinations are dropped.
    """
    detunings = np.asarray(detunings, dtype=float)
    rabis = np.abs(np.asarray(rabis))
    mean_det = float(np.mean(detunings))
    omega = float(np.sqrt(np.sum(rabis ** 2)))
    if omega == 0.0:
        raise DegeneratePerturbationError("vanishing mean Rabi frequency: bright levels degenerate")
    root = np.sqrt(mean_det ** 2 + omega ** 2)
    e_plus, e_minus = (-mean_det + root) / 2.0, (-mean_det - root) / 2.0
    if e_plus - e_minus < tol:
        raise DegeneratePerturbationError("bright levels are (nearly) degenerate")

    m = len(detunings)
    bright = rabis / omega
    # eigenvectors of [[0, W/2], [W/2, -mean]] in the (parent, bright) plane
    vecs = []
    for e in (e_plus, e_minus):
        c = np.array([omega / 2.0, e])
        c /= np.linalg.norm(c)
        vecs.append(np.concatenate([[c[0]], c[1] * bright]))
    u = np.column_stack(vecs)
    energies = [e_plus, e_minus]
    if m > 1:
        dark = null_space(bright[None, :])
        u = np.column_stack([u, np.vstack([np.zeros((1, m - 1)), dark])])
        energies += [-mean_det] * (m - 1)
    energies = np.asarray(energies)
    pert = np.concatenate([[0.0], mean_det - detunings])
    v = u.T @ (pert[:, None] * u)

    if _series_ratio(energies, v) < SERIES_LIMIT:
        ep = _rs_third_order(energies, v, 0)
        em = _rs_third_order(energies, v, 1)
    else:
        ep, em = _spectral_levels(detunings, rabis, e_plus, e_minus)
    radicand = (ep - em) ** 2 - (ep + em) ** 2
    if radicand < 0:
        warnings.warn("negative effective Rabi radicand; clipped to zero", RuntimeWarning)
        radicand = 0.0
    return EffectiveCoupling(parent, mean_det, omega, -(ep + em), float(np.sqrt(radicand)))


def spectator_rabi(atoms, cfg, pulses):
    """Time-averaged |Omega_{1,l}| over the laser-1 window for every atom."""
    t1, t2 = pulses.window(0)
    return abs(pulses.rabi[0]) * mean_beam_factor(atoms, cfg.beam_waists[0], t1, t2)


def effective_coupling_for(parent, atoms, cfg, pulses, _cache=None) -> EffectiveCoupling:
    """Effective coupling of a ``("D", n, m, ...)`` parent for the given sample."""
    n, m = parent[1], parent[2]
    if atoms.n_atoms < 3:
        raise ValueError("effective couplings need at least three atoms")
    spectators = np.array([l for l in range(atoms.n_atoms) if l not in (n, m)])
    det = doppler_detunings(atoms, cfg, pulses)[0]
    rabi = spectator_rabi(atoms, cfg, pulses)
    eff = effective_coupling(det[spectators], rabi[spectators])
    return EffectiveCoupling(parent, eff.mean_detuning, eff.mean_rabi,
                             eff.effective_detuning, eff.effective_rabi)


def pair_effective_couplings(atoms, cfg, pulses):
    """EffectiveCoupling per unordered pair (n, m); it does not depend on the
    levels of the parent double.  Returns a dict keyed by (n, m)."""
    det = doppler_detunings(atoms, cfg, pulses)[0]
    rabi = spectator_rabi(atoms, cfg, pulses)
    out = {}
    n_atoms = atoms.n_atoms
    for n in range(n_atoms):
        for m in range(n + 1, n_atoms):
            others = np.ones(n_atoms, dtype=bool)
            others[[n, m]] = False
            out[n, m] = effective_coupling(det[others], rabi[others], parent=(n, m))
    return out


# -- adiabatic elimination of the indirect spectator exchange -----------------

@dataclass
class SparseTerms:
    """Sparse matrix elements ``sum_a coeffs[k, a] t^a`` at (rows[k], cols[k])."""

    rows: np.ndarray
    cols: np.ndarray
    coeffs: np.ndarray

    def __len__(self):
        return len(self.rows)

    def dense(self, dim, t):
        h = np.zeros((dim, dim), dtype=complex)
        vals = np.polynomial.polynomial.polyval(t, self.coeffs.T)
        np.add.at(h, (self.rows, self.cols), vals)
        return h


def indirect_hamiltonian_terms(atoms, cfg, pulses, basis: TruncatedBasis, fits) -> SparseTerms:
    """Second-order exchange |r_n i_l> <-> |r_n i_m> through the eliminated
    triple |r_n i_m i_l>, for every n and spectator pair m < l.

    The element is Omega_{1,l}(t) Omega*_{1,m}(t) / (4 (d1n + d2n + d1m + d1l))
    with the laser-1 envelopes taken from ``fits``; Hermitian conjugates are
    included.
    """
    n_atoms = atoms.n_atoms
    empty = SparseTerms(np.zeros(0, int), np.zeros(0, int), np.zeros((0, 1), complex))
    if n_atoms < 3 or pulses.rabi[0] == 0.0:
        return empty
    det = doppler_detunings(atoms, cfg, pulses)
    k1 = cfg.wavevectors[0]
    phase = np.exp(1j * k1 * atoms.positions[:, 0])
    env = fits.envelopes[0]
    order = env.shape[0] - 1

    rows, cols, coeffs = [], [], []
    for n in range(n_atoms):
        base = det[0, n] + det[1, n]
        for m in range(n_atoms):
            if m == n:
                continue
            for l in range(m + 1, n_atoms):
                if l == n:
                    continue
                den = base + det[0, m] + det[0, l]
                if abs(den) < 1e-12:
                    raise SingularEliminationError(
                        f"vanishing elimination denominator for atoms {(n, m, l)}", (n, m, l))
                poly = np.convolve(env[:, l], env[:, m])
                amp = pulses.rabi[0] ** 2 * phase[l] * np.conj(phase[m]) / (4.0 * den)
                rows.append(basis.double(n, "r", l, "i"))
                cols.append(basis.double(n, "r", m, "i"))
                coeffs.append(amp * poly)
    if not rows:
        return empty
    rows = np.array(rows)
    cols = np.array(cols)
    coeffs = np.array(coeffs).reshape(len(rows), 2 * order + 1)
    return SparseTerms(np.concatenate([rows, cols]), np.concatenate([cols, rows]),
                       np.concatenate([coeffs, np.conj(coeffs)]))
