"""CSV schemas and the run manifest.

Every file starts with comment lines carrying the schema tag, the config hash,
and the seed, so any artifact can be traced back to the exact invocation.
Floats are written with round-trip precision; identical config + seed gives
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .density import DensityTable, EnsembleHistogram
from .model import Configuration, ModelParams

SCHEMA_PREFIX = "kacx"


def _fmt(v) -> str:
    return format(float(v), ".17g")


def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _header(kind: str, meta: dict) -> list[str]:
    lines = [f"# schema: {SCHEMA_PREFIX}/{kind}/v1"]
    for key in sorted(meta):
        lines.append(f"# {key}={meta[key]}")
    return lines


def _write(path, header_lines, column_names, rows):
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        fh.write(",".join(column_names) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def read_header(path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if body.startswith("schema:"):
                meta["schema"] = body.split(":", 1)[1].strip()
            elif "=" in body:
                key, val = body.split("=", 1)
                meta[key.strip()] = val.strip()
    return meta


def write_configuration(path, config: Configuration, meta=None):
    meta = dict(meta or {})
    meta.update(n=config.params.n, alpha=_fmt(config.params.alpha))
    rows = ((str(i), _fmt(e)) for i, e in enumerate(config.energies))
    _write(path, _header("configuration", meta), ("index", "energy"), rows)


def read_configuration(path) -> Configuration:
    meta = read_header(path)
    if "n" not in meta or "alpha" not in meta:
        raise ValueError(f"{path}: configuration header must carry n and alpha")
    energies = _read_numeric(path, 2)[:, 1]
    params = ModelParams(int(meta["n"]), float(meta["alpha"]))
    return Configuration(np.sort(energies), params)


def _read_numeric(path, n_cols):
    rows = []
    with open(path) as fh:
        for line in fh:
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split(",")
            try:
                rows.append([float(p) for p in parts[:n_cols]])
            except ValueError:
                continue  # column header line
    return np.asarray(rows, dtype=float)


def write_density(path, table: DensityTable, meta=None, kind="density"):
    rows = ((_fmt(x), _fmt(v)) for x, v in zip(table.x, table.values))
    _write(path, _header(kind, dict(meta or {})), ("x", "density"), rows)


def read_density(path) -> DensityTable:
    data = _read_numeric(path, 2)
    return DensityTable(data[:, 0], data[:, 1])


def write_histogram(path, hist: EnsembleHistogram, meta=None):
    se = hist.standard_error()
    rows = ((_fmt(a), _fmt(b), _fmt(d), _fmt(s))
            for a, b, d, s in zip(hist.edges[:-1], hist.edges[1:],
                                  hist.mean_density, se))
    _write(path, _header("histogram", dict(meta or {})),
           ("bin_left", "bin_right", "mean_density", "stderr"), rows)


def read_histogram(path):
    data = _read_numeric(path, 4)
    edges = np.concatenate([data[:, 0], data[-1:, 1]])
    return edges, data[:, 2], data[:, 3]


def write_count_distribution(path, hist: EnsembleHistogram, meta=None):
    """Distribution of per-bin counts across the ensemble (for dot plots)."""
    rows = []
    for k in range(hist.counts.shape[1]):
        values, mult = np.unique(hist.counts[:, k], return_counts=True)
        for v, m in zip(values, mult):
            rows.append((_fmt(hist.edges[k]), _fmt(hist.edges[k + 1]),
                         str(int(v)), str(int(m))))
    _write(path, _header("count-distribution", dict(meta or {})),
           ("bin_left", "bin_right", "count", "multiplicity"), rows)


def write_gap_survival(path, gap_sample, meta=None):
    """Empirical survival function of the scaled gaps, for log-scale plots."""
    gaps = np.sort(gap_sample.scaled_gaps)
    n = len(gaps)
    surv = 1.0 - np.arange(1, n + 1) / n
    meta = dict(meta or {})
    meta.update(center_x=_fmt(gap_sample.center_x),
                fitted_rate=_fmt(gap_sample.fitted_rate),
                ks_statistic=_fmt(gap_sample.ks_statistic),
                ks_pvalue=_fmt(gap_sample.ks_pvalue))
    if np.isfinite(gap_sample.theory_rate):
        meta["theory_rate"] = _fmt(gap_sample.theory_rate)
    rows = ((_fmt(r), _fmt(s)) for r, s in zip(gaps, surv))
    _write(path, _header("gap-survival", meta), ("r", "survival"), rows)


def write_exclusion_curve(path, n_points=512, meta=None):
    from .equilibrium import exclusion_factor

    u = np.linspace(0.0, 1.0 - 1e-6, n_points)
    rows = ((_fmt(x), _fmt(exclusion_factor(x)), _fmt(1.0 - x)) for x in u)
    _write(path, _header("exclusion-curve", dict(meta or {})),
           ("u", "pi", "fermi"), rows)


def write_events(path, events, meta=None):
    rows = ((_fmt(ev.time), _fmt(ev.x_i), _fmt(ev.x_j),
             _fmt(ev.x_i_star), _fmt(ev.x_j_star), str(int(bool(ev.accepted))))
            for ev in events)
    _write(path, _header("events", dict(meta or {})),
           ("t", "x_i", "x_j", "x_i_star", "x_j_star", "accepted"), rows)


def write_snapshots(path, trajectory, meta=None):
    rows = ((_fmt(t), str(i), _fmt(e))
            for t, snap in zip(trajectory.times, trajectory.snapshots)
            for i, e in enumerate(snap))
    _write(path, _header("snapshots", dict(meta or {})),
           ("t", "index", "energy"), rows)


def write_tags(path, trajectory, meta=None):
    rows = ((_fmt(t), str(pid), _fmt(trajectory.tagged[k, c]))
            for k, t in enumerate(trajectory.times)
            for c, pid in enumerate(trajectory.tagged_ids))
    _write(path, _header("tags", dict(meta or {})), ("t", "id", "energy"), rows)


def write_stats(path, trajectory, meta=None):
    rows = ((_fmt(t), str(int(a)), str(int(c)))
            for t, a, c in zip(trajectory.times, trajectory.attempts,
                               trajectory.accepts))
    _write(path, _header("stats", dict(meta or {})),
           ("t", "attempts", "accepts"), rows)


def write_scatter(path, scatter, meta=None):
    rows = ((_fmt(x), _fmt(y)) for x, y in scatter)
    _write(path, _header("scatter", dict(meta or {})),
           ("x_before", "x_after"), rows)


def write_solution(path, trajectory, meta=None):
    rows = ((_fmt(s.time), _fmt(x), _fmt(g))
            for s in trajectory.states
            for x, g in zip(s.grid, s.g))
    _write(path, _header("kinetic-solution", dict(meta or {})),
           ("t", "x", "g"), rows)


def write_diagnostics(path, trajectory, meta=None):
    rows = ((_fmt(t), _fmt(m), _fmt(e), _fmt(s), _fmt(q), _fmt(p))
            for t, m, e, s, q, p in zip(trajectory.times, trajectory.mass,
                                        trajectory.energy, trajectory.entropy,
                                        trajectory.q_norm, trajectory.projection))
    _write(path, _header("kinetic-diagnostics", dict(meta or {})),
           ("t", "mass", "energy", "entropy", "q_norm", "projection"), rows)


class Manifest:
    """Record of every artifact a run produces, with schema tags."""

    def __init__(self, out_dir, config_payload: dict, seed):
        self.out_dir = out_dir
        self.hash = config_hash(config_payload)
        self.payload = config_payload
        self.seed = seed
        self.artifacts = []

    def meta(self, **extra) -> dict:
        d = {"config_hash": self.hash, "seed": self.seed}
        d.update(extra)
        return d

    def path(self, name: str, kind: str) -> str:
        p = os.path.join(self.out_dir, name)
        self.artifacts.append({"file": name, "schema": f"{SCHEMA_PREFIX}/{kind}/v1"})
        return p

    def write(self):
        doc = {
            "config": self.payload,
            "config_hash": self.hash,
            "seed": self.seed,
            "artifacts": sorted(self.artifacts, key=lambda a: a["file"]),
        }
        with open(os.path.join(self.out_dir, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
