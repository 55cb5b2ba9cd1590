"""Experiment runner and command-line interface.

Subcommands:
  h2p run      -- evolve a two-particle packet and emit all artifacts
  h2p spectrum -- sweep the bound-pair band over K and export a CSV table
  h2p compare  -- per-sample deviation report between two trajectory CSVs

Exit codes: 0 success, 2 configuration error, 3 numerical-contract violation.
`h2p run --sweep cfg1.json cfg2.json ...` executes several configs in worker
processes (capped by the H2P_THREADS environment variable), each writing into
its own subdirectory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import dynamics, model, observables, semiclassics, spectral

DEVIATION_THRESHOLD = 1.5   # sites; default threshold for compare reports


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries field diagnostics."""


def _parse_momentum(value) -> float:
    """Momentum field value; accepts the literal token "pi" (and "-pi")."""
    if isinstance(value, str):
        token = value.strip().lower()
        if token == "pi":
            return math.pi
        if token == "-pi":
            return -math.pi
        try:
            return float(token)
        except ValueError:
            raise ConfigError(f"cannot parse momentum {value!r}; use a number or 'pi'") from None
    return float(value)


@dataclass
class ExperimentConfig:
    """Flat experiment description; every field has a default (J is fixed to 1).

    Packet placement: give x0 and y0 explicitly, or give only the separation d
    and the pair is centered on the lattice (x0 = (n_sites - d) // 2).
    """

    n_sites: int = 80
    boundary: str = "open"
    u: float = -6.0
    gamma: float = 1.0 / 12.0
    shape: str = "exponential"
    statistics: str = "distinguishable"
    x0: float | None = None
    y0: float | None = None
    d: float | None = 10.0
    w: float = 6.0
    px: float = 0.0
    py: float = 0.0
    t_final: float = 50.0
    dt_out: float = 0.1
    epsilon: float = 1e-10
    snapshot_times: tuple = (0.0, 10.0, 20.0)
    out_dir: str = "h2p-out"
    formats: tuple = ("csv", "json", "grid")
    preset: str | None = None

    def resolved_centers(self) -> tuple[float, float]:
        if self.x0 is not None and self.y0 is not None:
            return float(self.x0), float(self.y0)
        if self.d is None:
            raise ConfigError("packet needs x0 and y0, or a separation d")
        x0 = (self.n_sites - int(round(self.d))) // 2
        return float(x0), float(x0 + self.d)

    def validate(self) -> "ExperimentConfig":
        problems = []
        for name in ("u", "gamma", "w", "px", "py", "t_final", "dt_out", "epsilon"):
            v = getattr(self, name)
            if v is None or not np.isfinite(v):
                problems.append(f"field '{name}': must be a finite number, got {v!r}")
        if self.n_sites < 4:
            problems.append(f"field 'n_sites': must be >= 4, got {self.n_sites}")
        if self.boundary not in model.BOUNDARIES:
            problems.append(f"field 'boundary': {self.boundary!r} not in {model.BOUNDARIES}")
        if self.shape not in model.SHAPES:
            problems.append(f"field 'shape': {self.shape!r} not in {model.SHAPES}")
        if self.statistics not in model.STATISTICS:
            problems.append(f"field 'statistics': {self.statistics!r} not in {model.STATISTICS}")
        if self.w is not None and self.w <= 0:
            problems.append(f"field 'w': must be > 0, got {self.w}")
        if self.t_final is not None and self.t_final <= 0:
            problems.append(f"field 't_final': must be > 0, got {self.t_final}")
        if self.x0 is not None and self.y0 is not None and self.d is not None:
            if abs((self.y0 - self.x0) - self.d) > 1e-9:
                problems.append(
                    f"fields 'x0','y0','d': inconsistent (y0 - x0 = {self.y0 - self.x0}, d = {self.d})"
                )
        if problems:
            raise ConfigError("; ".join(problems))
        try:
            x0, y0 = self.resolved_centers()
        except ConfigError as exc:
            raise ConfigError(str(exc)) from None
        if not (0 <= x0 < self.n_sites and 0 <= y0 < self.n_sites):
            raise ConfigError(f"packet centers ({x0}, {y0}) outside lattice 0..{self.n_sites - 1}")
        return self


PRESETS = {
    "fig2": dict(px=0.0, py=0.0, t_final=20.0, preset="fig2"),
    "fig3": dict(px=0.0, py=math.pi, t_final=50.0, preset="fig3"),
}


def config_from_preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    kw = dict(PRESETS[name])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw).validate()


def config_from_json(path, **overrides) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
    base = dict(raw)
    preset = base.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r} in {path}; available: {sorted(PRESETS)}")
        base = {**PRESETS[preset], **base}
    for key in ("px", "py"):
        if key in base:
            base[key] = _parse_momentum(base[key])
    if "snapshot_times" in base:
        base["snapshot_times"] = tuple(float(v) for v in base["snapshot_times"])
    if "formats" in base:
        base["formats"] = tuple(base["formats"])
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**base).validate()


def _hubbard_params(config: ExperimentConfig) -> model.HubbardParams:
    return model.HubbardParams(
        J=1.0, U=config.u, gamma=config.gamma,
        shape=config.shape, statistics=config.statistics,
    )


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    """Run the quantum evolution plus the matched semiclassical trajectory.

    Writes series.csv, semiclassical.csv (+ .json sidecar), grid snapshots and
    summary.json into the output directory; returns the summary dict.
    """
    config.validate()
    out = out_dir if out_dir is not None else config.out_dir
    os.makedirs(out, exist_ok=True)

    lattice = model.LatticeSpec(config.n_sites, config.boundary)
    params = _hubbard_params(config)
    potential = model.build_potential(params, lattice)
    x0, y0 = config.resolved_centers()
    state = model.gaussian_packet(
        lattice, (x0, y0), config.w, (config.px, config.py), config.statistics
    )

    prop = dynamics.PropagatorConfig(dt_out=config.dt_out, epsilon=config.epsilon)
    snap_times = [t for t in config.snapshot_times if t <= config.t_final + 1e-9]
    record = dynamics.evolve(
        state, params, potential, lattice, prop, config.t_final, snapshot_times=snap_times
    )

    # matched-grid semiclassical trajectory; may stop early at coincidence.
    # custom interaction tables have no smooth force model, so no trajectory.
    d0 = y0 - x0
    initial = semiclassics.SemiclassicalState(x=x0, y=y0, px=config.px, py=config.py)
    semi_truncated_at = None
    trajectory = np.empty((0, 5))
    if config.shape != "custom":
        try:
            trajectory = semiclassics.integrate(
                initial, params, config.t_final, dt_out=config.dt_out
            )
        except semiclassics.CoincidenceError as exc:
            trajectory = exc.partial
            semi_truncated_at = float(trajectory[-1, 0]) if len(trajectory) else 0.0

    force = semiclassics.ForceModel.from_params(params, abs(d0)) if d0 else None

    series = record.observables
    arrays = series.as_arrays()
    sep0, com0 = arrays["sep"][0], arrays["com"][0]
    problem = spectral.relative_problem(params, K=0.0)
    doublons = spectral.solve_bound_states(problem)

    summary = {
        "preset": config.preset,
        "n_sites": config.n_sites,
        "t_final": config.t_final,
        "F": force.F if force else 0.0,
        "period": force.period if force and force.F else None,
        "amplitude": force.amplitude if force and force.F else None,
        "max_separation_drift": float(np.max(np.abs(arrays["sep"] - sep0))),
        "max_com_drift": float(np.max(np.abs(arrays["com"] - com0))),
        "doublon_count_K0": len(doublons),
        "boundary_contamination_onset": record.contamination_onset,
        "semiclassical_truncated_at": semi_truncated_at,
        "norm_drift": float(np.max(np.abs(arrays["norm"] - 1.0))),
        "energy_drift": float(np.max(np.abs(arrays["energy"] - arrays["energy"][0]))),
    }

    if "csv" in config.formats:
        observables.write_series_csv(os.path.join(out, "series.csv"), series)
        semiclassics.write_trajectory_csv(
            os.path.join(out, "semiclassical.csv"), trajectory, force
        )
    if "grid" in config.formats:
        for t_req, snap in sorted(record.snapshots.items()):
            model.save_grid(os.path.join(out, f"snapshot_t{t_req:g}.h2pg"), snap)
    if "json" in config.formats:
        with open(os.path.join(out, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary


@dataclass
class DeviationReport:
    t: np.ndarray
    dev_x: np.ndarray
    dev_y: np.ndarray
    threshold: float
    first_exceed_x: float | None
    first_exceed_y: float | None


def compare_runs(quantum: dict, semiclassical: dict,
                 threshold: float = DEVIATION_THRESHOLD) -> DeviationReport:
    """Per-sample |x_q - x_sc|, |y_q - y_sc| over the common time grid.

    `quantum` is a series table (t, mean_x, mean_y, ...); `semiclassical` a
    trajectory table (t, x, y, ...).  The grids must agree sample-by-sample on
    their overlap; a truncated semiclassical run shortens the comparison.
    """
    n = min(len(quantum["t"]), len(semiclassical["t"]))
    if n == 0:
        raise ValueError("empty trajectory")
    tq, ts = quantum["t"][:n], semiclassical["t"][:n]
    if np.max(np.abs(tq - ts)) > 1e-9:
        raise ValueError("time grids do not match on the common window")
    dev_x = np.abs(quantum["mean_x"][:n] - semiclassical["x"][:n])
    dev_y = np.abs(quantum["mean_y"][:n] - semiclassical["y"][:n])

    def first_exceed(dev):
        idx = np.nonzero(dev > threshold)[0]
        return float(tq[idx[0]]) if idx.size else None

    return DeviationReport(
        t=tq, dev_x=dev_x, dev_y=dev_y, threshold=threshold,
        first_exceed_x=first_exceed(dev_x), first_exceed_y=first_exceed(dev_y),
    )


def _sweep_worker(args):
    path, out_dir = args
    config = config_from_json(path)
    return run_experiment(config, out_dir=out_dir)


def _cmd_run(args) -> int:
    overrides = dict(
        n_sites=args.n_sites, t_final=args.t_max, u=args.u, gamma=args.gamma,
        w=args.w, d=args.d, out_dir=args.out,
        px=_parse_momentum(args.px) if args.px is not None else None,
        py=_parse_momentum(args.py) if args.py is not None else None,
    )
    if args.sweep:
        out_root = args.out or "h2p-out"
        jobs = []
        for path in args.sweep:
            stem = os.path.splitext(os.path.basename(path))[0]
            config_from_json(path)  # validate before forking workers
            jobs.append((path, os.path.join(out_root, stem)))
        workers = int(os.environ.get("H2P_THREADS", "0")) or (os.cpu_count() or 1)
        workers = max(1, min(workers, len(jobs)))
        if workers == 1:
            results = [_sweep_worker(job) for job in jobs]
        else:
            import multiprocessing

            with multiprocessing.get_context("spawn").Pool(workers) as pool:
                results = pool.map(_sweep_worker, jobs)
        for (path, out_dir), summary in zip(jobs, results):
            print(f"{path} -> {out_dir}: F={summary['F']:.6g}, "
                  f"max CoM drift={summary['max_com_drift']:.3g}")
        return 0

    if args.preset:
        config = config_from_preset(args.preset, **overrides)
    elif args.config:
        config = config_from_json(args.config, **overrides)
    else:
        config = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
        config.validate()
    summary = run_experiment(config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_spectrum(args) -> int:
    params = model.HubbardParams(J=1.0, U=args.u, gamma=args.gamma, shape=args.shape)
    k_grid = np.linspace(-math.pi, math.pi, args.k_points)
    sweep = spectral.doublon_band_sweep(params, k_grid, S=args.truncation)
    spectral.write_band_table(args.out, sweep)
    counts = {K: len(states) for K, states in sweep}
    print(f"wrote {args.out}: {args.k_points} K-points, "
          f"{min(counts.values())}..{max(counts.values())} bound branches")
    return 0


def _cmd_compare(args) -> int:
    quantum = observables.read_series_csv(args.quantum_csv)
    semi = semiclassics.read_trajectory_csv(args.semiclassical_csv)
    report = compare_runs(quantum, semi, threshold=args.threshold)
    payload = {
        "threshold": report.threshold,
        "samples": int(len(report.t)),
        "max_dev_x": float(report.dev_x.max()),
        "max_dev_y": float(report.dev_y.max()),
        "first_exceed_x": report.first_exceed_x,
        "first_exceed_y": report.first_exceed_y,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="h2p",
        description="Two interacting particles on a 1D lattice: dynamics, spectra, semiclassics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment preset or config file")
    source = run.add_mutually_exclusive_group()
    source.add_argument("--preset", choices=sorted(PRESETS))
    source.add_argument("--config", help="flat JSON config file")
    source.add_argument("--sweep", nargs="+", metavar="CFG",
                        help="run several JSON configs in parallel worker processes")
    run.add_argument("--n-sites", type=int, dest="n_sites")
    run.add_argument("--t-max", type=float, dest="t_max")
    run.add_argument("--u", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--w", type=float)
    run.add_argument("--d", type=float)
    run.add_argument("--px", help="initial momentum of the x particle ('pi' accepted)")
    run.add_argument("--py", help="initial momentum of the y particle ('pi' accepted)")
    run.add_argument("--out", help="output directory")
    run.set_defaults(func=_cmd_run)

    band = sub.add_parser("spectrum", help="bound-pair band sweep over total quasi-momentum")
    band.add_argument("--k-points", type=int, default=41, dest="k_points")
    band.add_argument("--u", type=float, default=-6.0)
    band.add_argument("--gamma", type=float, default=1.0 / 12.0)
    band.add_argument("--shape", choices=("exponential", "onsite_only"), default="exponential")
    band.add_argument("--truncation", type=int, default=None,
                      help="relative-coordinate half-width S (default: shape-dependent)")
    band.add_argument("--out", default="band_table.csv")
    band.set_defaults(func=_cmd_spectrum)

    cmp_ = sub.add_parser("compare", help="deviation report between quantum and semiclassical CSVs")
    cmp_.add_argument("quantum_csv")
    cmp_.add_argument("semiclassical_csv")
    cmp_.add_argument("--threshold", type=float, default=DEVIATION_THRESHOLD)
    cmp_.add_argument("--out", help="write the JSON report here as well")
    cmp_.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (dynamics.SpectralBracketError, spectral.TruncationError) as exc:
        print(f"numerical contract violation: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
