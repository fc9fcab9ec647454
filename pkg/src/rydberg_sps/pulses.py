"""Rectangular three-laser pulse sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PhysicalConfig, TWO_PI
from .errors import ConfigError


@dataclass(frozen=True)
class PulseSequence:
    """Start times (ns), durations (ns), Rabi amplitudes and detunings (rad/ns)
    for lasers 1, 2 and 3.  Envelopes are rectangular."""

    starts: tuple
    durations: tuple
    rabi: tuple
    detunings: tuple

    def __post_init__(self):
        for name in ("starts", "durations", "rabi", "detunings"):
            value = tuple(float(x) for x in getattr(self, name))
            if len(value) != 3:
                raise ConfigError(f"{name} needs one entry per laser")
            object.__setattr__(self, name, value)
        if min(self.starts) < 0 or min(self.durations) < 0:
            raise ConfigError("pulse starts and durations must be non-negative")

    @classmethod
    def three_pulse(cls, cfg: PhysicalConfig, t12: float, t_s3: float, dt3: float,
                    rabi, t_s12: float = 0.0):
        """Lasers 1 and 2 share the window [t_s12, t12]; laser 3 runs
        [t_s3, t_s3 + dt3]."""
        return cls((t_s12, t_s12, t_s3), (t12 - t_s12, t12 - t_s12, dt3), tuple(rabi),
                   tuple(cfg.detunings))

    @property
    def ends(self):
        return tuple(s + d for s, d in zip(self.starts, self.durations))

    @property
    def t0(self):
        """Total duration: end of the last pulse."""
        ends = [e for e, d in zip(self.ends, self.durations) if d > 0]
        return max(ends) if ends else 0.0

    @property
    def gap12(self):
        """End of lasers 1 and 2."""
        return max(self.ends[0], self.ends[1])

    def window(self, j):
        return self.starts[j], self.ends[j]

    def is_on(self, j, t):
        return self.durations[j] > 0 and self.starts[j] <= t < self.ends[j]

    def edges(self, t_end=None):
        """Sorted switching times including 0 and the final time."""
        t_end = self.t0 if t_end is None else t_end
        pts = {0.0, float(t_end)}
        for s, e in zip(self.starts, self.ends):
            pts.update(x for x in (s, e) if 0.0 <= x <= t_end)
        return sorted(pts)

    def replace(self, **changes):
        data = dict(starts=self.starts, durations=self.durations, rabi=self.rabi,
                    detunings=self.detunings)
        data.update(changes)
        return PulseSequence(**data)

    def to_dict(self):
        """Lab-unit mapping suitable for a ``[pulses]`` config section."""
        out = {}
        for j in range(3):
            out[f"start{j + 1}_ns"] = repr(self.starts[j])
            out[f"duration{j + 1}_ns"] = repr(self.durations[j])
            out[f"rabi{j + 1}_GHz"] = repr(self.rabi[j] / TWO_PI)
            out[f"detuning{j + 1}_GHz"] = repr(self.detunings[j] / TWO_PI)
        return out

    @classmethod
    def from_dict(cls, data, cfg: PhysicalConfig | None = None):
        try:
            starts = [float(data[f"start{j}_ns"]) for j in (1, 2, 3)]
            durations = [float(data[f"duration{j}_ns"]) for j in (1, 2, 3)]
            rabi = [TWO_PI * float(data[f"rabi{j}_GHz"]) for j in (1, 2, 3)]
        except KeyError as exc:
            raise ConfigError(f"pulse section lacks {exc.args[0]}") from exc
        default = cfg.detunings if cfg is not None else (0.0, 0.0, 0.0)
        det = [TWO_PI * float(data[f"detuning{j}_GHz"]) if f"detuning{j}_GHz" in data
               else default[j - 1] for j in (1, 2, 3)]
        return cls(tuple(starts), tuple(durations), tuple(rabi), tuple(det))


def doppler_detunings(atoms, cfg: PhysicalConfig, pulses: PulseSequence):
    """delta_{j,n} = delta_j - k_j v_n, shape (3, n_atoms)."""
    k = cfg.wavevectors
    vx = atoms.velocities[:, 0]
    return np.asarray(pulses.detunings)[:, None] - k[:, None] * vx[None, :]


def default_pulses(cfg: PhysicalConfig) -> PulseSequence:
    """A hand-tuned delayed sequence used as the optimizer's starting point."""
    return PulseSequence.three_pulse(cfg, t12=1.0, t_s3=1.05, dt3=0.45,
                                     rabi=(TWO_PI * 6.0, TWO_PI * 6.0, TWO_PI * 1.2))
