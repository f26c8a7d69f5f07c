"""``turbcloud`` command line: one subcommand per experiment.

Every run resolves its configuration (defaults < ``--config`` YAML < flags),
echoes it, writes its tables and a ``.meta.json`` sidecar next to each table.
Failures print one ``error: category=... module=... message=...`` line on
stderr and exit with the category's code.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import default_workers
from .config import SCHEMAS, ExperimentConfig, parse_config, schema
from .errors import ConfigError, TurbcloudError
from .io import write_sidecar, write_table
from .rng import as_stream

# subcommand path -> config kind
COMMANDS = {
    ("field", "sample"): "field_sample",
    ("field", "eval"): "field_eval",
    ("disperse",): "disperse",
    ("chaos",): "chaos",
    ("sine1d",): "sine1d",
    ("burgers",): "burgers",
    ("report",): "report",
}

HELP = {
    "field_sample": "sample a synthetic field and write its modes",
    "field_eval": "evaluate a synthetic field on a regular grid",
    "disperse": "position variance of a particle cloud in one field realization",
    "chaos": "coupled interacting / mean-field runs over ensemble sizes",
    "sine1d": "one-sine trajectory, full and reduced",
    "burgers": "two-way coupled Burgers gas with drag particles",
    "report": "aggregate prior outputs into the claim manifest",
}


class _Parser(argparse.ArgumentParser):
    """Argument errors become config errors with the usual error line and exit code."""

    def error(self, message):
        key = None
        if "unrecognized arguments:" in message:
            key = message.split(":", 1)[1].split()[0].lstrip("-").replace("-", "_")
        exc = ConfigError(message, key=key)
        self.print_usage(sys.stderr)
        print(_error_line(exc), file=sys.stderr)
        sys.exit(exc.exit_code)


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _add_keys(parser: argparse.ArgumentParser, kind: str):
    parser.add_argument("--config", default=None, help="YAML file of flat key: value pairs")
    for key, spec in schema(kind).items():
        extra = f" (one of {', '.join(map(str, spec.choices))})" if spec.choices else ""
        parser.add_argument(_flag(key), dest=key, default=None, metavar=spec.type.upper(),
                            help=spec.help + extra)
    parser.set_defaults(kind=kind)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="turbcloud", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"turbcloud {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    field = sub.add_parser("field", help="synthetic turbulence fields")
    fsub = field.add_subparsers(dest="action", required=True)
    for path, kind in COMMANDS.items():
        if path[0] == "field":
            _add_keys(fsub.add_parser(path[1], help=HELP[kind]), kind)
        else:
            _add_keys(sub.add_parser(path[0], help=HELP[kind]), kind)
    return parser


# -- shared helpers ---------------------------------------------------------

def _stream(cfg: ExperimentConfig):
    return as_stream(seed=cfg.seed)


def _workers(cfg: ExperimentConfig) -> int:
    return cfg["workers"] or default_workers()


def _spectrum(cfg: ExperimentConfig):
    from .turbulence import SpectrumParams
    return SpectrumParams(u0=cfg["u0"], k0=cfg["k0"], epsilon=cfg["epsilon"], eta=cfg["eta"],
                          a_hunt=cfg["a_hunt"], n_modes=cfg["n_modes"], dim=cfg["dim"],
                          divergence_free=cfg["divergence_free"])


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}{out.suffix}")


class _Writer:
    """Writes tables and their sidecars for one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.outputs: list[Path] = []

    def table(self, path, columns, rows, footer=None):
        path = Path(path)
        write_table(path, columns, rows, fmt=self.cfg["format"], footer=footer)
        self.outputs.append(path)
        return path

    def finish(self, extra: dict | None = None):
        for path in self.outputs:
            record = self.cfg.sidecar(__version__)
            record["outputs"] = [p.name for p in self.outputs]
            record["table"] = path.name
            if extra:
                record["summary"] = extra
            write_sidecar(path, record)
        return self.outputs


# -- experiments ------------------------------------------------------------

def run_field_sample(cfg, w: _Writer):
    from .turbulence import resolve, sample_field, write_modes_csv
    p = resolve(_spectrum(cfg))
    f = sample_field(p, _stream(cfg).spawn("field"))
    write_modes_csv(f, cfg.out, fmt=cfg["format"])
    w.outputs.append(cfg.out)
    return {"eta": p.eta, "epsilon": p.epsilon, "n_modes": f.n_modes}


def run_field_eval(cfg, w: _Writer):
    from .turbulence import eval_velocity, read_modes_csv, sample_field
    if cfg["modes"] is not None:
        f = read_modes_csv(cfg["modes"])
    else:
        f = sample_field(_spectrum(cfg), _stream(cfg).spawn("field"))
    side = cfg["grid_length"] if cfg["grid_length"] is not None else 2.0 * math.pi / cfg["k0"]
    n = cfg["grid_n"]
    if n < 1:
        raise ConfigError("key 'grid_n' must be positive", key="grid_n")
    axis = side * np.arange(n) / n
    mesh = np.meshgrid(*([axis] * f.dim), indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    u = eval_velocity(f, cfg["t"], pts).reshape(len(pts), f.dim)
    axes = "xyz"[:f.dim]
    w.table(cfg.out, list(axes) + [f"u_{c}" for c in axes], np.column_stack([pts, u]))
    return {"points": len(pts)}


def run_disperse(cfg, w: _Writer):
    from .lagrangian import simulate_dispersion, track_columns, trajectory_dump
    p = _spectrum(cfg)
    box = None
    if cfg["box_length"] is not None:
        box = (np.zeros(p.dim), np.full(p.dim, cfg["box_length"]))
    kw = dict(n_particles=cfg["particles"], tau_p=cfg["tau_p"], dt=cfg["dt"], t_end=cfg["t_end"], box=box,
              init_velocity=cfg["init_velocity"], output_every=cfg["output_every"])
    series = simulate_dispersion(p, rng=_stream(cfg), **kw)
    names, rows = series.columns()
    w.table(cfg.out, names, rows)
    if cfg["tracks"] > 0:
        if cfg["tracks"] > 10:
            raise ConfigError("key 'tracks' is at most 10", key="tracks")
        times, tracks = trajectory_dump(p, n_tracks=cfg["tracks"], rng=_stream(cfg), **kw)
        names, rows = track_columns(times, tracks)
        w.table(_sibling(cfg.out, "tracks"), names, rows)
    return None


def run_chaos(cfg, w: _Writer):
    from .meanfield import ChaosConfig, ExternalFieldSpec, chaos_convergence_experiment
    if cfg["field"] == "none":
        fld = ExternalFieldSpec()
    else:
        fld = ExternalFieldSpec("uniform_drag_to", u_const=cfg["u_const"], tau=cfg["drag_tau"])
    cc = ChaosConfig(ns=tuple(cfg["ns"]), reps=cfg["reps"], lam=cfg["lambda"], sigma=cfg["sigma"],
                     t_end=cfg["t_end"], dt=cfg["dt"], dim=cfg["dim"], field=fld)
    res = chaos_convergence_experiment(cc, rng=_stream(cfg), workers=_workers(cfg))
    names, rows = res.columns()
    w.table(cfg.out, names, rows, footer=res.footer())
    return None


def run_sine1d(cfg, w: _Writer):
    from .sine1d import SineParams, band_entry_time, drift_and_oscillation_stats, simulate_full
    from .sine1d import ReducedTrajectory
    sp = SineParams(a=cfg["a"], omega=cfg["omega"], k=cfg["k"], phi=cfg["phi"], tau_p=cfg["tau_p"])
    traj = simulate_full(sp, cfg["x0"], cfg["c0"], cfg["dt"], cfg["t_end"], cfg["output_every"])
    xr, cr = sp.to_reduced(traj.t, traj.x, traj.c)
    red = ReducedTrajectory(traj.t, xr, cr, omega=sp.omega)
    rp = sp.reduced()
    footer = {"a_reduced": rp.a_r}
    if sp.omega > abs(rp.a_r):
        lo, hi = rp.band
        footer["band_lo"], footer["band_hi"] = lo, hi
        footer["band_entry_time"] = band_entry_time(red, lo - 1e-3, hi + 1e-3)
    keep = traj.t >= cfg["transient"]
    try:
        stats = drift_and_oscillation_stats(traj.t[keep], xr[keep])
        footer.update({"drift_slope": stats.slope, "oscillation_amplitude": stats.oscillation_amplitude,
                       "window_variance_max": stats.window_variance_max,
                       "window_variance_median": stats.window_variance_median, "bounded": stats.bounded})
    except TurbcloudError as exc:
        footer["drift_stats"] = exc.category
    w.table(cfg.out, ["t", "x", "c", "x_red", "c_red", "y", "v"],
            np.column_stack([traj.t, traj.x, traj.c, xr, cr, red.y, red.v]), footer=footer)
    return None


def _burgers_config(cfg):
    from .burgers import BurgersConfig
    return BurgersConfig(length=cfg["length"], n_cells=cfg["cells"], rho_f=cfg["rho_f"], tau_p=cfg["tau_p"],
                         kappa_m=cfg["kappa_m"], n_particles=cfg["np"], u0_gas=cfg["u0_gas"],
                         u0_particles=cfg["u0_particles"], dt=cfg["dt"], t_end=cfg["t_end"], cfl=cfg["cfl"],
                         nu_gas=cfg["nu_gas"], particle_integrator=cfg["particle_integrator"],
                         record_every=cfg["record_every"])


def run_burgers(cfg, w: _Writer):
    from . import burgers as bg
    bc = _burgers_config(cfg)
    mode = cfg["mode"]
    stream = _stream(cfg)
    workers = _workers(cfg)
    t = bc.record_times()
    hom_gas, hom_part = bg.homogeneous_solution(t, bc.u0_gas, bc.u0_particles, bc.kappa_m, bc.tau_p)

    if mode == "homogeneous":
        disc = bg.homogeneous_discrete(t, bc.u0_gas, bc.u0_particles, bc.kappa_m, bc.tau_p, bc.dt)
        w.table(cfg.out, ["t", "mean_gas_velocity", "mean_particle_velocity", "discrete_gas_velocity",
                          "discrete_particle_velocity"], np.column_stack([t, hom_gas, hom_part, *disc]),
                footer={"equilibrium": (bc.kappa_m * bc.u0_particles + bc.u0_gas) / (1.0 + bc.kappa_m)})
        return None

    if mode == "compare":
        nps = cfg["np_list"] or [4, 16, 64]
        res = bg.eulerian_consistency(bc, nps, cfg["reps"], stream, workers)
        names, rows = res.columns()
        w.table(cfg.out, names, rows, footer={"max_rel_l2": float(np.max(res.rel_l2))})
        names, cols = ["t"], [res.lagrangian[0].t]
        for lc, ec in zip(res.lagrangian, res.eulerian):
            names += [f"lagrangian_gas_np{lc.n_particles}", f"eulerian_gas_np{ec.n_particles}"]
            cols += [lc.mean_gas, ec.mean_gas]
        w.table(_sibling(cfg.out, "curves"), names, np.column_stack(cols))
        return None

    scheme = "lagrangian" if mode == "lagrangian" else "eulerian_empirical"
    if cfg["np_list"]:
        if cfg["placement"] != "random":
            raise ConfigError("key 'placement' must be 'random' for a particle-count sweep", key="placement")
        res = bg.ensemble_experiment(bc, cfg["np_list"], cfg["reps"], stream, workers, scheme)
        names, rows = res.curve_columns()
        w.table(cfg.out, names, rows)
        names, rows = res.convergence_columns()
        w.table(_sibling(cfg.out, "convergence"), names, rows, footer=res.footer())
        if scheme == "lagrangian" and len(cfg["np_list"]) >= 4:
            tf = bg.fit_effective_tau(res, bc, n_fit=cfg["tau_fit_points"])
            names, rows = tf.columns()
            w.table(_sibling(cfg.out, "tau_eff"), names, rows, footer=tf.footer())
        return None

    if cfg["placement"] == "equispaced":
        pos = bg.equispaced_positions(bc)[None, :]
        if scheme == "lagrangian":
            t_run, gas, part = bg.run_lagrangian(bc, pos)
            clips = 0
        else:
            t_run, gas, part, final = bg.run_eulerian(bc, bg.histogram_state(bc, pos))
            clips = final.clips
        curves = bg.EnsembleCurves(bc.n_particles, t_run, gas, part, clips)
    else:
        curves = bg.run_ensemble(bc, bc.n_particles, cfg["reps"], stream, scheme, workers)
    footer = {"deviation": bg.deviation_metric(curves.t, curves.mean_gas, hom_gas),
              "linf_homogeneous": float(np.max(np.abs(curves.mean_gas - hom_gas))),
              "density_clips": curves.clips}
    w.table(cfg.out, ["t", "mean_gas_velocity", "mean_gas_velocity_stderr", "mean_particle_velocity",
                      "homogeneous_gas_velocity"],
            np.column_stack([curves.t, curves.mean_gas, curves.stderr_gas, curves.mean_particles, hom_gas]),
            footer=footer)
    return None


def run_report(cfg, w: _Writer):
    from .report import build_manifest
    columns, rows = build_manifest(Path(cfg["dir"]))
    w.table(cfg.out, columns, rows)
    return {"claims": len(rows)}


RUNNERS = {
    "field_sample": run_field_sample,
    "field_eval": run_field_eval,
    "disperse": run_disperse,
    "chaos": run_chaos,
    "sine1d": run_sine1d,
    "burgers": run_burgers,
    "report": run_report,
}
assert set(RUNNERS) == set(SCHEMAS)


def run(cfg: ExperimentConfig) -> int:
    """Run one resolved experiment; returns 0 or raises a categorized error."""
    w = _Writer(cfg)
    summary = RUNNERS[cfg.kind](cfg, w)
    w.finish(summary)
    return 0


def _error_line(exc: TurbcloudError) -> str:
    parts = [f"category={exc.category}", f"module={exc.module or 'unknown'}"]
    key = getattr(exc, "key", None)
    if key is not None:
        parts.append(f"key={key}")
    dt = getattr(exc, "admissible_dt", None)
    if dt is not None:
        parts.append(f"admissible_dt={dt:.17g}")
    parts.append(f"message={exc}")
    return "error: " + " ".join(parts)


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    kind = args.pop("kind")
    file = args.pop("config")
    for k in ("command", "action"):
        args.pop(k, None)
    try:
        cfg = parse_config(kind, file=file, flags=args)
        print(json.dumps({"experiment": kind, "config": cfg.values}, sort_keys=True))
        return run(cfg)
    except TurbcloudError as exc:
        print(_error_line(exc), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
