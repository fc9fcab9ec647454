"""Run manifests, checksums and the CSV schemas shared between CLI stages."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

STAGES = {"sample": 1, "excite": 2, "decay": 3, "analyze": 4, "optimize": 5, "tw-scan": 6}


def stage_seed(master, stage, index=0):
    """Independent integer seed for (stage, index) derived from ``master``."""
    code = STAGES[stage] if isinstance(stage, str) else int(stage)
    seq = np.random.SeedSequence([int(master), code, int(index)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    arguments: dict
    config: str
    version: str
    seeds: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_clock: dict = field(default_factory=dict)

    def add_output(self, path, root):
        rel = str(Path(path).relative_to(root))
        self.outputs[rel] = sha256(path)

    @contextmanager
    def timed(self, stage):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.wall_clock[stage] = self.wall_clock.get(stage, 0.0) + time.perf_counter() - start

    def to_dict(self):
        return {
            "manifest_version": MANIFEST_VERSION,
            "artifact_version": self.version,
            "command": self.command,
            "arguments": self.arguments,
            "config": self.config,
            "seeds": self.seeds,
            "outputs": dict(sorted(self.outputs.items())),
            "wall_clock_s": self.wall_clock,
        }

    def write(self, directory):
        path = Path(directory) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path):
        data = json.loads(Path(path).read_text())
        if data.get("manifest_version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {data.get('manifest_version')}")
        return cls(data["command"], data["arguments"], data["config"], data["artifact_version"],
                   data.get("seeds", {}), data.get("outputs", {}), data.get("wall_clock_s", {}))


def fmt(value):
    """Shortest round-tripping text for a number."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_table(path, header, rows):
    """CSV with a header row; numbers written with :func:`fmt`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_table(path):
    """Return ``(header, rows)`` with rows as lists of strings."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


# -- stage schemas ---------------------------------------------------------------

ATOM_COLUMNS = ["sample_id", "x_um", "y_um", "z_um", "vx_um_per_ns", "vy_um_per_ns",
                "vz_um_per_ns", "t_wall_ns"]
ALPHA_COLUMNS = ["sample_id", "atom", "re", "im"]
PAIR_COLUMNS = ["sample_id", "atom_n", "atom_m", "re", "im"]
SECTOR_COLUMNS = ["sample_id", "ground", "single_e", "double_ee", "other", "fidelity",
                  "phase_time_ns", "norm_drift"]


def write_atoms(path, samples):
    rows = []
    for sid, atoms in enumerate(samples):
        for p, v, tw in zip(atoms.positions, atoms.velocities, atoms.wall_time):
            rows.append([sid, *p, *v, tw])
    write_table(path, ATOM_COLUMNS, rows)


def read_atoms(path, distribution="boltzmann"):
    from .ensemble import AtomSet
    header, rows = read_table(path)
    if header != ATOM_COLUMNS:
        raise ValueError(f"{path}: unexpected atom columns {header}")
    data = np.array(rows, dtype=float).reshape(-1, len(ATOM_COLUMNS))
    out = []
    for sid in np.unique(data[:, 0]).astype(int):
        block = data[data[:, 0] == sid]
        out.append(AtomSet(block[:, 1:4], block[:, 4:7], block[:, 7], distribution))
    return out


def write_alpha(path, alphas):
    rows = [[sid, n, a.real, a.imag] for sid, al in enumerate(alphas) for n, a in enumerate(al)]
    write_table(path, ALPHA_COLUMNS, rows)


def read_alpha(path):
    header, rows = read_table(path)
    if header != ALPHA_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    out = {}
    for sid, n, re, im in rows:
        out.setdefault(int(sid), []).append(complex(float(re), float(im)))
    return [np.array(out[k]) for k in sorted(out)]


def write_pairs(path, matrices):
    rows = []
    for sid, a in enumerate(matrices):
        n, m = np.triu_indices(a.shape[0], k=1)
        rows += [[sid, i, j, a[i, j].real, a[i, j].imag] for i, j in zip(n, m)]
    write_table(path, PAIR_COLUMNS, rows)


def read_pairs(path, sizes):
    header, rows = read_table(path)
    if header != PAIR_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    out = [np.zeros((s, s), dtype=complex) for s in sizes]
    for sid, n, m, re, im in rows:
        sid, n, m = int(sid), int(n), int(m)
        out[sid][n, m] = out[sid][m, n] = complex(float(re), float(im))
    return out
