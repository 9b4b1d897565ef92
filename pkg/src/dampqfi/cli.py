"""Command-line front end: figure data as deterministic CSV/JSON files.

Each subcommand reads one JSON configuration document (optional), applies
``--key value`` overrides, and writes its artifacts into ``out_dir``.
Files are written to a temporary name and renamed into place.

Exit codes: 0 success, 2 configuration error, 3 numerical or invariant
failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import COMMANDS, COMMAND_DEFAULTS, RunConfig, _coerce, build_run_config, load_document
from .dynamics import evolve_analytic
from .errors import ConfigError, DampQfiError
from .fock import coherent_density
from .metrology import fidelity_approx, fidelity_uhlmann, qfi_approx_closed, qfi_exact_state
from .moo import GridSpec, epsilon_constrained_optimize, evaluate_grid, pareto_front
from .sme import simulate_trajectory, update_posteriors

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

CONTROLS = ("none", "linear", "kerr", "both")


# ---------------------------------------------------------------- output
def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` next to ``path`` and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(cfg: RunConfig, stem: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Table as ``<stem>.csv``, or ``<stem>.json`` when ``format`` is json."""
    out = Path(cfg.out_dir)
    if cfg.format == "json":
        path = out / f"{stem}.json"
        doc = {"columns": list(columns), "rows": [_jsonable(list(r)) for r in rows]}
        write_atomic(path, json.dumps(doc, indent=1) + "\n")
    else:
        path = out / f"{stem}.csv"
        lines = [",".join(columns)]
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        write_atomic(path, "\n".join(lines) + "\n")
    return path


def write_json(cfg: RunConfig, stem: str, doc) -> Path:
    path = Path(cfg.out_dir) / f"{stem}.json"
    write_atomic(path, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


# -------------------------------------------------------------- commands
def _control_configs(cfg: RunConfig):
    """The four control settings built from the configured ``u1``, ``u2``."""
    settings = {
        "none": (0.0, 0.0),
        "linear": (cfg.u1, 0.0),
        "kerr": (0.0, cfg.u2),
        "both": (cfg.u1, cfg.u2),
    }
    return [(name, cfg.system(u1=u1, u2=u2)) for name, (u1, u2) in settings.items()]


def cmd_qfi_curve(cfg: RunConfig) -> list[Path]:
    rows = []
    for name, system in _control_configs(cfg):
        for tau in cfg.taus():
            rows.append((tau, name, "exact_eig", qfi_exact_state(system, tau).value))
            rows.append((tau, name, "closed_form", qfi_approx_closed(tau, system).value))
    return [write_table(cfg, "qfi_curve", ("tau", "control", "method", "qfi"), rows)]


def cmd_fidelity_curve(cfg: RunConfig) -> list[Path]:
    rows = []
    for name, system in _control_configs(cfg):
        rho0 = coherent_density(system.alpha, system.dim)
        for tau in cfg.taus():
            rho = evolve_analytic(system, tau).state
            rows.append((tau, name, "uhlmann", fidelity_uhlmann(rho0, rho, tau).value))
            rows.append((tau, name, "pure_closed_form", fidelity_approx(tau, system).value))
    return [write_table(cfg, "fidelity_curve", ("tau", "control", "method", "fidelity"), rows)]


def _point_dict(p) -> dict:
    return {"u1": p.u1, "u2": p.u2, "alpha2": p.alpha2, "i_star": p.i_star, "d": p.d}


def cmd_optimize(cfg: RunConfig) -> list[Path]:
    spec = cfg.grid_spec()
    points = evaluate_grid(spec, cfg.gamma)
    reports = []
    for eps in cfg.epsilons:
        opt = epsilon_constrained_optimize(spec, cfg.gamma, eps, points)
        reports.append({
            "epsilon": eps,
            "best": _point_dict(opt.best),
            "feasible_count": opt.feasible_count,
            "boundary_distance": opt.boundary_distance,
            "active": opt.active,
            "d_increment": opt.d_increment,
        })
    report = {"scenario": cfg.scenario, "gamma": cfg.gamma, "grid": cfg.grid, "reports": reports}
    multi_alpha = spec.alpha2_range[2] > 1
    cols = ("u1", "u2", "alpha2", "i_star", "d") if multi_alpha else ("u1", "u2", "i_star", "d")
    surface = [
        (p.u1, p.u2, p.alpha2, p.i_star, p.d) if multi_alpha else (p.u1, p.u2, p.i_star, p.d)
        for p in points
    ]
    front = [(p.u1, p.u2, p.alpha2, p.i_star, p.d) for p in pareto_front(points)]
    return [
        write_json(cfg, "optimize_report", report),
        write_table(cfg, "optimize_surface", cols, surface),
        write_table(cfg, "optimize_front", ("u1", "u2", "alpha2", "i_star", "d"), front),
    ]


def cmd_scan_alpha(cfg: RunConfig) -> list[Path]:
    spec = cfg.grid_spec()
    spec = GridSpec((0.0, 0.0, 1), spec.u2_range, spec.alpha2_range)
    rows = [(p.u2, p.alpha2, p.i_star, p.d) for p in evaluate_grid(spec, cfg.gamma)]
    return [write_table(cfg, "scan_alpha", ("u2", "alpha2", "i_star", "d"), rows)]


def cmd_estimate(cfg: RunConfig) -> list[Path]:
    system = cfg.system()
    candidates = cfg.candidate_set()
    record = simulate_trajectory(cfg.gamma, system, cfg.duration, cfg.dt, cfg.efficiency, cfg.seed)
    post = update_posteriors(record, candidates, system)
    n = len(candidates)
    cols = ["t", "gamma_hat"] + [f"p_{j + 1}" for j in range(n)]
    rows = (
        (t, g, *w)
        for t, g, w in zip(post.times, post.estimate_over_time, post.weights_over_time)
    )
    final_w = post.weights_over_time[-1]
    summary = {
        "scenario": cfg.scenario,
        "final_gamma_hat": float(post.estimate_over_time[-1]),
        "gamma_true": cfg.gamma,
        "candidates": candidates.rates,
        "prior": candidates.prior,
        "final_weights": final_w,
        "map_index": int(np.argmax(final_w)),
        "seed": cfg.seed,
        "efficiency": cfg.efficiency,
        "duration": record.duration,
        "dt": cfg.dt,
        "reference_gamma": post.reference_gamma,
    }
    return [write_table(cfg, "estimate_series", cols, rows), write_json(cfg, "estimate_summary", summary)]


def cmd_evolve(cfg: RunConfig) -> list[Path]:
    system = cfg.system()
    rows = []
    summary = []
    n = np.arange(system.dim)
    for tau in cfg.taus():
        res = evolve_analytic(system, tau)
        rho = res.rho
        for p in range(system.dim):
            for q in range(system.dim):
                rows.append((tau, p, q, rho[p, q].real, rho[p, q].imag))
        summary.append({
            "tau": tau,
            "trace": res.state.trace,
            "purity": res.state.purity,
            "mean_photons": float(np.real(np.diag(rho)) @ n),
            "truncation_tail": res.state.truncation_tail,
        })
    doc = {"scenario": cfg.scenario, "config": asdict(system) | {"alpha": [system.alpha.real, system.alpha.imag]},
           "states": summary}
    return [write_table(cfg, "evolve_rho", ("tau", "p", "q", "re", "im"), rows), write_json(cfg, "evolve_summary", doc)]


HANDLERS = {
    "qfi-curve": cmd_qfi_curve,
    "fidelity-curve": cmd_fidelity_curve,
    "optimize": cmd_optimize,
    "scan-alpha": cmd_scan_alpha,
    "estimate": cmd_estimate,
    "evolve": cmd_evolve,
}

_HELP = {
    "qfi-curve": "Fisher information versus tau for four control settings",
    "fidelity-curve": "fidelity to the initial state versus tau for four control settings",
    "optimize": "epsilon-constrained optimum, surface and Pareto front over the control grid",
    "scan-alpha": "peak information and deformation over (u2, |alpha|^2) with u1 = 0",
    "estimate": "simulate a homodyne record and estimate gamma with a filter bank",
    "evolve": "density matrix at each tau of the grid",
}


# ------------------------------------------------------------------ main
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dampqfi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        sp.add_argument("--config", metavar="PATH", help="JSON configuration document")
        defaults = COMMAND_DEFAULTS[name]
        for key in RunConfig.keys():
            flags = [f"--{key}"]
            if "_" in key:
                flags.append(f"--{key.replace('_', '-')}")
            shown = defaults.get(key, getattr(RunConfig(), key))
            sp.add_argument(*flags, dest=f"set_{key}", metavar="VALUE",
                            help=f"override '{key}' (default {json.dumps(shown)})")
    return parser


def run(argv: Sequence[str] | None = None) -> tuple[int, list[Path]]:
    args = build_parser().parse_args(argv)
    document = load_document(args.config) if args.config else None
    overrides = {
        key[4:]: _coerce(key[4:], value)
        for key, value in vars(args).items()
        if key.startswith("set_") and value is not None
    }
    cfg = build_run_config(args.command, document, overrides)
    return EXIT_OK, HANDLERS[args.command](cfg)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        _, paths = run(argv)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DampQfiError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        where = f" ({exc.filename})" if exc.filename else ""
        print(f"I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
