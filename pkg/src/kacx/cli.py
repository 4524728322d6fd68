"""Command-line entry point.

Subcommands: sample (ensembles of initial configurations and their
histograms), simulate (the jump process), solve (the kinetic equation), and
analyze (histograms, gap survival, exclusion curve from existing CSVs).
Options can come from flags or from a JSON config file; flags override the
file.  Fixed seed means byte-identical outputs.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import io as kio
from .builtins import builtin_config, builtin_density
from .density import empirical_histogram
from .equilibrium import f_alpha, gap_statistics
from .model import Configuration, ModelParams, validate
from .samplers import (DirichletSpec, RngStream, sample_detailed_batch,
                       sample_dirichlet_batch, sample_flat_batch)
from .simulate import SimState, run

CONSTRUCTIONS = ("flat", "dirichlet", "detailed",
                 "equal-spacing", "plus-outlier", "packed-block")
BUILTIN_DENSITIES = ("equilibrium", "exp", "fig-excess-g")


@dataclass
class RunConfig:
    command: str
    n: int = 1000
    alpha: float = 1.0
    construction: str = "flat"
    dirichlet_k: float = 1.0
    target: str = "equilibrium"
    t_end: float = 1.0
    dt: float = 0.02
    snapshot_dt: float = 0.1
    samples: int = 1
    seed: int = 0
    bin_width: float = 0.2
    grid_points: int = 512
    x_max: float = 12.0
    out_dir: str = "out"
    tracked_ids: list = field(default_factory=list)
    events: int = 0
    keep_configs: int = 0
    at_x: float = 1.0
    window: float = 0.2
    inputs: list = field(default_factory=list)

    def validated(self) -> "RunConfig":
        checks = [
            ("n", self.n >= 2, "need n >= 2"),
            ("alpha", 0.0 < self.alpha < 2.0, "alpha must lie in (0, 2)"),
            ("t_end", self.t_end >= 0, "t_end must be >= 0"),
            ("bin_width", self.bin_width > 0, "bin_width must be > 0"),
            ("samples", self.samples >= 1, "samples must be >= 1"),
            ("dirichlet_k", self.dirichlet_k > 0, "dirichlet K must be > 0"),
            ("construction", self.construction in CONSTRUCTIONS,
             f"construction must be one of {CONSTRUCTIONS}"),
            ("grid_points", self.grid_points >= 16, "grid_points must be >= 16"),
            ("x_max", self.x_max > 0, "x_max must be > 0"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise SystemExit(f"config error in field '{name}': {msg} "
                                 f"(got {getattr(self, name)!r})")
        return self

    def payload(self) -> dict:
        d = asdict(self)
        d["tracked_ids"] = list(map(int, d["tracked_ids"]))
        # the output location is not part of the run identity: the same
        # config + seed must give byte-identical artifacts anywhere
        d.pop("out_dir", None)
        return d


def _target_density(cfg: RunConfig):
    name = cfg.target
    if name in BUILTIN_DENSITIES:
        return builtin_density(name, alpha=cfg.alpha)
    if os.path.exists(name):
        return kio.read_density(name)
    raise SystemExit(f"config error in field 'target': unknown builtin and no "
                     f"such file: {name!r}")


def _initial_batch(cfg: RunConfig, stream: int, size: int) -> np.ndarray:
    params = ModelParams(cfg.n, cfg.alpha)
    rng = RngStream(cfg.seed, stream)
    c = cfg.construction
    if c == "flat":
        return sample_flat_batch(params, rng, size)
    if c == "dirichlet":
        spec = DirichletSpec.flat(cfg.n, cfg.dirichlet_k)
        return sample_dirichlet_batch(spec, params, rng, size)
    if c == "detailed":
        return sample_detailed_batch(_target_density(cfg), params, rng, size)
    conf = builtin_config(c, params)
    return np.tile(conf.energies, (size, 1))


def cmd_sample(cfg: RunConfig) -> int:
    params = ModelParams(cfg.n, cfg.alpha)
    energies = _initial_batch(cfg, stream=0, size=cfg.samples)
    manifest = kio.Manifest(cfg.out_dir, cfg.payload(), cfg.seed)

    hist = empirical_histogram(list(energies), cfg.bin_width)
    kio.write_histogram(manifest.path("histogram.csv", "histogram"), hist,
                        manifest.meta(n=cfg.n, alpha=cfg.alpha,
                                      samples=cfg.samples))
    kio.write_count_distribution(
        manifest.path("count_distribution.csv", "count-distribution"), hist,
        manifest.meta())
    overlay = f_alpha(cfg.alpha) if cfg.construction != "detailed" \
        else _target_density(cfg)
    kio.write_density(manifest.path("reference_density.csv", "density"),
                      overlay, manifest.meta(alpha=cfg.alpha))
    for k in range(min(cfg.keep_configs, cfg.samples)):
        conf = Configuration(energies[k], params)
        kio.write_configuration(
            manifest.path(f"config_{k:04d}.csv", "configuration"), conf,
            manifest.meta(sample=k))
    manifest.write()
    print(f"wrote {cfg.samples} samples -> {cfg.out_dir}")
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    params = ModelParams(cfg.n, cfg.alpha)
    manifest = kio.Manifest(cfg.out_dir, cfg.payload(), cfg.seed)
    energies = _initial_batch(cfg, stream=0, size=1)[0]
    config = Configuration(np.sort(energies), params)
    report = validate(config)
    if not report.ok:
        raise SystemExit(f"initial configuration invalid: {report.summary()}")

    state = SimState(config, RngStream(cfg.seed, 1), scatter_capacity=200_000)
    traj = run(state, cfg.t_end, snapshot_dt=cfg.snapshot_dt,
               tracked_ids=cfg.tracked_ids, record_events=cfg.events)

    meta = manifest.meta(n=cfg.n, alpha=cfg.alpha)
    kio.write_snapshots(manifest.path("snapshots.csv", "snapshots"), traj, meta)
    kio.write_stats(manifest.path("stats.csv", "stats"), traj, meta)
    if cfg.tracked_ids:
        kio.write_tags(manifest.path("tags.csv", "tags"), traj, meta)
    if cfg.events:
        kio.write_events(manifest.path("events.csv", "events"),
                         traj.events, meta)
    if len(traj.scatter):
        kio.write_scatter(manifest.path("scatter.csv", "scatter"),
                          traj.scatter, meta)
    manifest.write()
    acc = state.stats.accepted
    att = state.stats.attempted
    print(f"simulated to t={cfg.t_end}: {att} attempts, {acc} accepted "
          f"-> {cfg.out_dir}")
    return 0


def cmd_solve(cfg: RunConfig) -> int:
    from .kinetic import solve

    initial = _target_density(cfg)
    n_snap = int(np.floor(cfg.t_end / cfg.snapshot_dt + 1e-9)) if cfg.snapshot_dt > 0 else 1
    snap_times = [k * cfg.snapshot_dt for k in range(1, n_snap + 1)]
    traj = solve(initial, cfg.alpha, cfg.t_end, dt=cfg.dt,
                 snapshot_times=snap_times, n_points=cfg.grid_points,
                 x_max=cfg.x_max)
    manifest = kio.Manifest(cfg.out_dir, cfg.payload(), cfg.seed)
    meta = manifest.meta(alpha=cfg.alpha)
    kio.write_solution(manifest.path("solution.csv", "kinetic-solution"),
                       traj, meta)
    kio.write_diagnostics(
        manifest.path("diagnostics.csv", "kinetic-diagnostics"), traj, meta)
    manifest.write()
    print(f"solved to t={cfg.t_end} on {cfg.grid_points} cells -> {cfg.out_dir}")
    return 0


def _gather_configs(patterns) -> list[Configuration]:
    paths = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        if not hits:
            raise SystemExit(f"config error in field 'inputs': no files match "
                             f"{pat!r}")
        paths.extend(hits)
    return [kio.read_configuration(p) for p in paths]


def cmd_analyze(cfg: RunConfig, mode: str) -> int:
    manifest = kio.Manifest(cfg.out_dir, cfg.payload(), cfg.seed)
    if mode == "histogram":
        configs = _gather_configs(cfg.inputs)
        hist = empirical_histogram(configs, cfg.bin_width)
        kio.write_histogram(manifest.path("histogram.csv", "histogram"), hist,
                            manifest.meta())
        kio.write_count_distribution(
            manifest.path("count_distribution.csv", "count-distribution"),
            hist, manifest.meta())
    elif mode == "gaps":
        configs = _gather_configs(cfg.inputs)
        alpha = configs[0].params.alpha
        sample = gap_statistics(configs, cfg.at_x, cfg.window,
                                g=f_alpha(alpha), alpha=alpha)
        kio.write_gap_survival(manifest.path("gap_survival.csv", "gap-survival"),
                               sample, manifest.meta())
    elif mode == "exclusion-curve":
        kio.write_exclusion_curve(
            manifest.path("exclusion_curve.csv", "exclusion-curve"),
            meta=manifest.meta())
    elif mode == "excess":
        from .density import DensityTable
        from .equilibrium import w_from_g

        g = _target_density(cfg)
        w = w_from_g(g, cfg.alpha)
        rank = g.cdf / g.mass
        w_on_x = np.interp(rank, w.x, w.values)
        keep = g.values > 1e-9 * g.max_value
        meta = manifest.meta(alpha=cfg.alpha)
        kio.write_density(manifest.path("g.csv", "density"), g, meta)
        kio.write_density(
            manifest.path("w_energy.csv", "density"),
            DensityTable(g.x, w_on_x), meta)
        kio.write_density(
            manifest.path("excess_per_particle.csv", "density"),
            DensityTable(g.x[keep], w_on_x[keep] / g.values[keep]), meta)
    else:
        raise SystemExit(f"unknown analyze mode {mode!r}")
    manifest.write()
    print(f"analyze {mode} -> {cfg.out_dir}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kacx",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option defaults")
        sp.add_argument("--n", type=int)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", dest="out_dir")

    sp = sub.add_parser("sample", help="draw initial-configuration ensembles")
    common(sp)
    sp.add_argument("--construction", choices=CONSTRUCTIONS)
    sp.add_argument("--k", dest="dirichlet_k", type=float)
    sp.add_argument("--target")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--bin-width", dest="bin_width", type=float)
    sp.add_argument("--keep-configs", dest="keep_configs", type=int)

    sp = sub.add_parser("simulate", help="run the jump process")
    common(sp)
    sp.add_argument("--construction", choices=CONSTRUCTIONS)
    sp.add_argument("--k", dest="dirichlet_k", type=float)
    sp.add_argument("--target")
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--snapshot-dt", dest="snapshot_dt", type=float)
    sp.add_argument("--tracked-ids", dest="tracked_ids", type=int, nargs="*")
    sp.add_argument("--events", type=int)

    sp = sub.add_parser("solve", help="integrate the kinetic equation")
    common(sp)
    sp.add_argument("--initial", dest="target")
    sp.add_argument("--t-end", dest="t_end", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--snapshot-dt", dest="snapshot_dt", type=float)
    sp.add_argument("--grid-points", dest="grid_points", type=int)
    sp.add_argument("--x-max", dest="x_max", type=float)

    sp = sub.add_parser("analyze", help="derive CSV reports from artifacts")
    common(sp)
    sp.add_argument("mode",
                    choices=("histogram", "gaps", "exclusion-curve", "excess"))
    sp.add_argument("--target")
    sp.add_argument("--in", dest="inputs", nargs="*", default=None)
    sp.add_argument("--bin-width", dest="bin_width", type=float)
    sp.add_argument("--at", dest="at_x", type=float)
    sp.add_argument("--window", type=float)

    return p


def parse_config(argv) -> tuple[RunConfig, str | None]:
    args = _build_parser().parse_args(argv)
    base = {}
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise SystemExit(f"config error in field 'config': no such file "
                             f"{args.config!r}")
        with open(args.config) as fh:
            base = json.load(fh)
    mode = getattr(args, "mode", None)
    cfg = RunConfig(command=args.command)
    for key, val in base.items():
        if not hasattr(cfg, key):
            raise SystemExit(f"config error: unknown field {key!r} in "
                             f"{args.config}")
        setattr(cfg, key, val)
    for key, val in vars(args).items():
        if key in ("command", "config", "mode") or val is None:
            continue
        setattr(cfg, key, val)
    return cfg.validated(), mode


def run_experiment(cfg: RunConfig, mode: str | None = None) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    if cfg.command == "sample":
        return cmd_sample(cfg)
    if cfg.command == "simulate":
        return cmd_simulate(cfg)
    if cfg.command == "solve":
        return cmd_solve(cfg)
    if cfg.command == "analyze":
        return cmd_analyze(cfg, mode)
    raise SystemExit(f"unknown command {cfg.command!r}")


def main(argv=None) -> int:
    cfg, mode = parse_config(argv if argv is not None else sys.argv[1:])
    return run_experiment(cfg, mode)


if __name__ == "__main__":
    raise SystemExit(main())
