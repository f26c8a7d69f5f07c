"""Claim manifest built from prior experiment outputs.

Each table with a sidecar is matched to the claims it supports, its metric is
recomputed from the table, and one manifest row is written per check:
claim, command, output, metric, value, threshold, status.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .config import schema
from .io import read_table
from .stats import spearman

COLUMNS = ["claim", "command", "output", "metric", "value", "threshold", "status"]

SPECTRUM_SLOPE = (-2.0, -1.4)
RATE_SLOPE = (-1.3, -0.7)


def _command(record: dict) -> str:
    kind = record["experiment"]
    words = ["turbcloud", *kind.split("_")] if kind.startswith("field_") else ["turbcloud", kind]
    spec = schema(kind)
    for key, src in sorted(record["sources"].items()):
        if src == "default" or key == "workers":
            continue
        value = record["config"][key]
        if spec[key].type == "ints":
            value = ",".join(str(v) for v in value)
        words += ["--" + key.replace("_", "-"), str(value)]
    return " ".join(words)


def _row(claim, record, output, metric, value, threshold, ok):
    status = "PASS" if ok else "FAIL"
    return [claim, _command(record), output, metric, value, threshold, status]


def _between(v, lo, hi):
    return v is not None and math.isfinite(v) and lo <= v <= hi


def _load(dir_: Path):
    found = []
    for meta in sorted(dir_.glob("*.meta.json")):
        record = json.loads(meta.read_text())
        table = meta.with_name(record.get("table", meta.name[: -len(".meta.json")]))
        if table.exists():
            found.append((record, table))
    return found


def _disperse_metrics(cols):
    t, var = cols["t"], cols["var_total"]
    late = t > 10.0
    decrease = bool(np.any(np.diff(var[late]) < 0))
    i1 = int(np.argmin(np.abs(t - 1.0)))
    ratio = float(var.max() / var[i1]) if var[i1] > 0 else math.inf
    window = (t >= 10.0) & (t <= 100.0)
    rho = spearman(t[window], var[window]) if window.sum() >= 3 else math.nan
    return decrease, ratio, rho


def _disperse(record, table, rows, state):
    cols, _ = read_table(table)
    decrease, ratio, rho = _disperse_metrics(cols)
    dim = record["config"]["dim"]
    name = table.name
    if dim == 1:
        rows.append(_row("bounded_dispersion_1d", record, name, "strict_decrease_after_t10", int(decrease),
                         "=1", decrease))
        rows.append(_row("bounded_dispersion_1d", record, name, "max_over_var_t1", ratio, "<100", ratio < 100))
    if dim == 3:
        rows.append(_row("dispersion_grows_3d", record, name, "spearman_t10_t100", rho, ">0.95", rho > 0.95))
    numerics = {k: v for k, v in record["config"].items() if k not in ("dim", "out", "workers", "format")}
    state.setdefault("spearman", {})[dim] = (rho, record, name, json.dumps(numerics, sort_keys=True))


def _contrast(rows, state):
    sp = state.get("spearman", {})
    if 1 in sp and 3 in sp and sp[1][3] == sp[3][3]:
        diff = sp[3][0] - sp[1][0]
        rows.append(_row("dimensionality_contrast", sp[3][1], f"{sp[1][2]};{sp[3][2]}",
                         "spearman_3d_minus_1d", diff, ">=0.2", diff >= 0.2 and sp[3][0] > 0.95))


def _field_sample(record, table, rows, state):
    from .turbulence import SpectrumParams, read_modes_csv, spectrum_slope
    c = record["config"]
    p = SpectrumParams(u0=c["u0"], k0=c["k0"], epsilon=c["epsilon"], eta=c["eta"], a_hunt=c["a_hunt"],
                       n_modes=c["n_modes"], dim=c["dim"], divergence_free=c["divergence_free"])
    f = read_modes_csv(table)
    slope = spectrum_slope(f, p)
    rows.append(_row("spectrum_inertial_slope", record, table.name, "loglog_slope", slope,
                     "[-2.0,-1.4]", _between(slope, *SPECTRUM_SLOPE)))


def _chaos(record, table, rows, state):
    _, footer = read_table(table)
    for col, claim in (("mean_sq_coupling_dist", "chaos_rate_coupling"), ("w2sq_pairs", "chaos_rate_pairs")):
        slope = footer.get(f"{col}_slope")
        slope = slope if isinstance(slope, float) else math.nan
        rows.append(_row(claim, record, table.name, f"{col}_slope", slope, "[-1.3,-0.7]",
                         _between(slope, *RATE_SLOPE)))


def _sine1d(record, table, rows, state):
    cols, footer = read_table(table)
    c = record["config"]
    if "band_lo" in footer:
        after = cols["t"] >= c["transient"]
        speed = cols["c_red"][after]
        excess = float(max(footer["band_lo"] - speed.min(), speed.max() - footer["band_hi"], 0.0))
        rows.append(_row("one_sine_absorbing_band", record, table.name, "band_excursion_after_transient",
                         excess, "<=1e-3", excess <= 1e-3))
    if "bounded" in footer:
        ok = footer["bounded"] == 1.0
        rows.append(_row("one_sine_bounded_oscillation", record, table.name, "detrended_bounded",
                         int(ok), "=1", ok))


def _burgers(record, table, rows, state):
    c = record["config"]
    cols, footer = read_table(table)
    name = table.name
    if c["mode"] == "compare":
        worst = float(np.max(cols["rel_l2"]))
        rows.append(_row("eulerian_consistency", record, name, "max_rel_l2", worst, "<0.05", worst < 0.05))
        return
    if c["mode"] in ("lagrangian", "eulerian") and not c["np_list"] and c["placement"] == "equispaced":
        linf = float(footer["linf_homogeneous"])
        rows.append(_row("homogeneous_limit", record, name, "linf_vs_closed_form", linf, "<=1e-3", linf <= 1e-3))
        u_inf = (c["kappa_m"] * c["u0_particles"] + c["u0_gas"]) / (1.0 + c["kappa_m"])
        t = cols["t"]
        at = t >= 5.0 * c["tau_p"] - 1e-12
        if at.any():
            err = float(abs(cols["mean_gas_velocity"][at][0] - u_inf))
            rows.append(_row("homogeneous_limit", record, name, "equilibrium_error_at_5tau", err, "<=1e-3",
                             err <= 1e-3))
        return
    if c["np_list"]:
        conv = table.with_name(f"{table.stem}_convergence{table.suffix}")
        if conv.exists():
            _, cf = read_table(conv)
            slope = cf.get("deviation_slope", math.nan)
            slope = slope if isinstance(slope, float) else math.nan
            rows.append(_row("ensemble_convergence", record, conv.name, "deviation_slope", slope,
                             "[-1.3,-0.7]", _between(slope, *RATE_SLOPE)))
        tau = table.with_name(f"{table.stem}_tau_eff{table.suffix}")
        if tau.exists():
            _, tf = read_table(tau)
            r2 = tf["r_squared"]
            rel = abs(tf["intercept"] - c["tau_p"]) / c["tau_p"]
            rows.append(_row("effective_tau_linear", record, tau.name, "r_squared", r2, ">0.95", r2 > 0.95))
            rows.append(_row("effective_tau_linear", record, tau.name, "intercept_rel_error", rel, "<=0.1",
                             rel <= 0.1))


_HANDLERS = {
    "field_sample": _field_sample,
    "disperse": _disperse,
    "chaos": _chaos,
    "sine1d": _sine1d,
    "burgers": _burgers,
}


def build_manifest(dir_: Path):
    """Rows of the claim manifest for every recognised output in ``dir_``."""
    rows, state = [], {}
    for record, table in _load(Path(dir_)):
        if table.name != record.get("outputs", [table.name])[0]:
            continue
        handler = _HANDLERS.get(record["experiment"])
        if handler is not None:
            handler(record, table, rows, state)
    _contrast(rows, state)
    return COLUMNS, rows
