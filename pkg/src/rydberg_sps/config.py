"""Physical configuration and unit handling.

Internally everything is expressed in micrometres, nanoseconds and rad/ns
(velocities in um/ns).  Lab-style units (K, nm, GHz, MHz um^6, m/s) only
appear in config files and are converted once in :func:`load_config`.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.constants as sc

from .errors import ConfigError

TWO_PI = 2.0 * np.pi
RB85_MASS = 84.911789738 * sc.atomic_mass

# m/s -> um/ns
MPS = 1e-3


def ghz(value):
    """Convert a frequency in GHz (cycles) to an angular rate in rad/ns."""
    return TWO_PI * value


@dataclass(frozen=True)
class PhysicalConfig:
    cell_thickness: float = 1.0
    temperature: float = 473.15
    atom_mass: float = RB85_MASS
    lifetime_tau: float = 26.2
    # h * 642.1 MHz um^6 expressed as rad/ns um^6
    c6: float = TWO_PI * 0.6421
    # D1 line, 5P1/2 -> 40S1/2, 5P3/2 -> 40S1/2 (um)
    wavelengths: tuple = (0.794979, 0.475484, 0.480920)
    # D2 line, |e> -> |g>
    emission_wavelength: float = 0.780241
    detunings: tuple = (ghz(-100.0), ghz(100.0), 0.0)
    beam_waists: tuple = (0.5, 2.0, 2.0)
    liad_a: float = 1.1e-7
    liad_b: float = 271.0 * MPS
    liad_both_walls: bool = True
    transverse_radius_factor: float = 2.0
    survival_time: float = 2.0
    rabi_threshold: float = 0.1
    # saturation scale for C6/d^6, keeps the propagation non-stiff
    interaction_cap: float = ghz(200.0)
    fit_orders: tuple = (3, 2, 2, 10)
    fit_samples: int = 64
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        positive = {
            "cell_thickness": self.cell_thickness,
            "temperature": self.temperature,
            "atom_mass": self.atom_mass,
            "lifetime_tau": self.lifetime_tau,
            "c6": self.c6,
            "emission_wavelength": self.emission_wavelength,
            "liad_b": self.liad_b,
            "transverse_radius_factor": self.transverse_radius_factor,
            "survival_time": self.survival_time,
            "interaction_cap": self.interaction_cap,
        }
        for name, value in positive.items():
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {value!r}")
        for name in ("wavelengths", "beam_waists", "detunings", "fit_orders"):
            if len(getattr(self, name)) != (4 if name == "fit_orders" else 3):
                raise ConfigError(f"{name} has the wrong number of entries")
        if min(self.wavelengths) <= 0 or min(self.beam_waists) <= 0:
            raise ConfigError("wavelengths and beam waists must be strictly positive")
        if min(self.fit_orders) < 0:
            raise ConfigError("fit orders must be non-negative")
        if not 0.0 <= self.rabi_threshold <= 1.0:
            raise ConfigError("rabi_threshold must lie in [0, 1]")

    @property
    def gamma(self):
        return 1.0 / self.lifetime_tau

    @property
    def sigma_v(self):
        """Thermal velocity spread per component, um/ns."""
        return np.sqrt(sc.k * self.temperature / self.atom_mass) * MPS

    @property
    def wavevectors(self):
        """Signed wave numbers along the beam axis; lasers 2 and 3 counter-propagate."""
        k = TWO_PI / np.asarray(self.wavelengths, dtype=float)
        return np.array([k[0], -k[1], -k[2]])

    @property
    def k0(self):
        k = self.wavevectors
        return k[0] + k[1] - k[2]

    @property
    def k_emit(self):
        return TWO_PI / self.emission_wavelength

    @property
    def transverse_radius(self):
        return self.transverse_radius_factor * self.beam_waists[1]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


# (section, key, attribute, to-internal, from-internal)
_SCALARS = [
    ("cell", "thickness_um", "cell_thickness", float, float),
    ("cell", "temperature_K", "temperature", float, float),
    ("cell", "mass_u", "atom_mass", lambda v: float(v) * sc.atomic_mass,
     lambda v: v / sc.atomic_mass),
    ("decay", "lifetime_ns", "lifetime_tau", float, float),
    ("decay", "emission_wavelength_nm", "emission_wavelength",
     lambda v: float(v) * 1e-3, lambda v: v * 1e3),
    ("interaction", "c6_MHz_um6", "c6", lambda v: TWO_PI * float(v) * 1e-3,
     lambda v: v / TWO_PI * 1e3),
    ("interaction", "cap_GHz", "interaction_cap", lambda v: ghz(float(v)),
     lambda v: v / TWO_PI),
    ("liad", "a_s3_per_m3", "liad_a", float, float),
    ("liad", "b_m_per_s", "liad_b", lambda v: float(v) * MPS, lambda v: v / MPS),
    ("sampling", "transverse_radius_factor", "transverse_radius_factor", float, float),
    ("sampling", "survival_time_ns", "survival_time", float, float),
    ("sampling", "rabi_threshold", "rabi_threshold", float, float),
    ("fits", "samples", "fit_samples", int, int),
]

_TRIPLES = [
    ("lasers", "wavelength{j}_nm", "wavelengths", lambda v: float(v) * 1e-3,
     lambda v: v * 1e3),
    ("lasers", "detuning{j}_GHz", "detunings", lambda v: ghz(float(v)),
     lambda v: v / TWO_PI),
    ("lasers", "waist{j}_um", "beam_waists", float, float),
]


# internal-unit copies written by dump_config so snapshots reload bit-exactly
EXACT = "exact"


def _apply_exact(kwargs, exact):
    """Swap lab-unit values for their exact internal copies when both agree
    to rounding; a hand-edited lab value wins over a stale exact copy."""
    def close(a, b):
        return abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1e-300)

    for _, _, attr, _, _ in _SCALARS:
        if attr in exact and attr in kwargs and isinstance(kwargs[attr], float):
            value = float(exact[attr])
            if close(value, kwargs[attr]):
                kwargs[attr] = value
    for _, _, attr, _, _ in _TRIPLES:
        values = list(kwargs[attr])
        for j in range(3):
            key = f"{attr}{j + 1}"
            if key in exact and close(float(exact[key]), values[j]):
                values[j] = float(exact[key])
        kwargs[attr] = tuple(values)


def load_config(source) -> PhysicalConfig:
    """Read a sectioned key/value (INI) file or string into a :class:`PhysicalConfig`.

    Missing keys keep their defaults.  Unknown sections are kept verbatim in
    ``cfg.extra`` so that commands can read their own settings (e.g. pulses).
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    is_text = isinstance(source, str) and ("\n" in source or "[" in source)
    if is_text:
        parser.read_string(source)
    elif isinstance(source, (str, Path)):
        if not parser.read(source):
            raise ConfigError(f"configuration file not found: {source}")
    else:
        raise ConfigError(f"cannot read configuration from {source!r}")

    kwargs = {}
    try:
        for section, key, attr, conv, _ in _SCALARS:
            if parser.has_option(section, key):
                kwargs[attr] = conv(parser.get(section, key))
        for section, pattern, attr, conv, _ in _TRIPLES:
            values = list(getattr(PhysicalConfig, attr))
            for j in range(3):
                key = pattern.format(j=j + 1)
                if parser.has_option(section, key):
                    values[j] = conv(parser.get(section, key))
            kwargs[attr] = tuple(values)
        if parser.has_option("liad", "both_walls"):
            kwargs["liad_both_walls"] = parser.getboolean("liad", "both_walls")
        orders = list(PhysicalConfig.fit_orders)
        for i, key in enumerate(("order_laser1", "order_laser2", "order_laser3",
                                 "order_interaction")):
            if parser.has_option("fits", key):
                orders[i] = parser.getint("fits", key)
        kwargs["fit_orders"] = tuple(orders)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if parser.has_section(EXACT):
        _apply_exact(kwargs, dict(parser.items(EXACT)))
    known = {"cell", "decay", "interaction", "liad", "sampling", "fits", "lasers", EXACT}
    kwargs["extra"] = {s: dict(parser.items(s)) for s in parser.sections() if s not in known}
    return PhysicalConfig(**kwargs)


def _fmt(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def dump_config(cfg: PhysicalConfig) -> str:
    """Serialize ``cfg`` back to the INI format read by :func:`load_config`."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, key, attr, _, back in _SCALARS:
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, _fmt(back(getattr(cfg, attr))))
    for section, pattern, attr, _, back in _TRIPLES:
        if not parser.has_section(section):
            parser.add_section(section)
        for j, value in enumerate(getattr(cfg, attr)):
            parser.set(section, pattern.format(j=j + 1), _fmt(back(value)))
    parser.set("liad", "both_walls", str(cfg.liad_both_walls))
    for key, value in zip(("order_laser1", "order_laser2", "order_laser3",
                           "order_interaction"), cfg.fit_orders):
        parser.set("fits", key, str(value))
    for section, items in cfg.extra.items():
        parser[section] = items
    parser[EXACT] = {attr: _fmt(getattr(cfg, attr)) for _, _, attr, _, _ in _SCALARS
                     if attr != "fit_samples"}
    for _, pattern, attr, _, _ in _TRIPLES:
        for j, value in enumerate(getattr(cfg, attr)):
            parser[EXACT][f"{attr}{j + 1}"] = _fmt(value)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
