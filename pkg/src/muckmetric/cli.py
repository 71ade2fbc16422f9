"""The ``muck`` command line: one subcommand per experiment.

Exit codes: 0 success, 1 operational error (bad input, I/O, non-convergence),
2 mathematical invariant violated (a bound that is a theorem failed on the
computed data, which signals a bug, not bad input).

Every run writes one CSV named <cmd>_<tag>_p<p>_N<levels>_seed<seed>.csv in
the output directory (plus an SVG next to it with --svg).  Identical configs
give byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional

import numpy as np

from .config import RunConfig, build_weight, parse_config
from .errors import (
    ConfigError,
    FitError,
    ParameterError,
    PlotError,
    RangeError,
    SearchError,
)
from .experiments import (
    continuity_sweep,
    exp_bmo_direction,
    haar_direction,
    noncompleteness_demo,
    parallel_map,
    power_circle_family,
    random_cells_family,
    rate_fit,
    sharpness_search,
    theorem2_sweep,
    convexity_check,
    duality_check,
)
from .grid import make_circle, make_grid
from .interpolation import factorize, stein_weiss_check, t_of_delta
from .operators import (
    DyadicMaximal,
    MartingaleTransform,
    PeriodicHilbert,
    RieszProjection,
    alternating_signs,
    identity_signs,
    random_signs,
    signs_from_string,
    weighted_l2_norm,
    weighted_lp_norm,
)
from .report import CsvTable, emit_svg_plot
from .weights import (
    a1_characteristic,
    ainfty_characteristic,
    ap_characteristic,
    blo_constant,
    bmo_norm,
    d_star,
    gj_lambda_star,
    random_weight,
    unit_weight,
)

COMMANDS = (
    "characteristic",
    "metric",
    "norm",
    "continuity",
    "theorem2",
    "sharpness",
    "noncompleteness",
    "convexity",
    "duality",
    "stein-weiss",
    "factorize",
    "gj",
)


def _build_signs(cfg: RunConfig, levels: int) -> np.ndarray:
    if cfg.signs == "identity":
        return identity_signs(levels)
    if cfg.signs == "alternating":
        return alternating_signs(levels)
    if cfg.signs == "random":
        return random_signs(levels, cfg.seed)
    try:
        signs = signs_from_string(cfg.signs)
    except ParameterError as exc:
        raise ConfigError(f"signs: {exc}") from exc
    if signs.shape != ((1 << levels) - 1,):
        raise ConfigError(
            f"signs: explicit pattern needs {(1 << levels) - 1} characters "
            f"for {levels} levels, got {signs.size}"
        )
    return signs


def _build_operator(cfg: RunConfig):
    if cfg.operator == "martingale":
        grid = make_grid(cfg.grid_levels)
        return MartingaleTransform(grid, _build_signs(cfg, grid.levels))
    if cfg.operator == "hilbert":
        return PeriodicHilbert(make_circle(cfg.circle_points))
    if cfg.operator == "riesz":
        return RieszProjection(make_circle(cfg.circle_points))
    if cfg.operator == "maximal":
        return DyadicMaximal(make_grid(cfg.grid_levels), cfg.shifted)
    raise ConfigError(f"operator: unknown operator {cfg.operator!r}")


def _norm_estimate(op, w, cfg: RunConfig):
    if cfg.p == 2 and op.linear:
        return weighted_l2_norm(op, w, tol=cfg.norm_tol,
                                max_iterations=cfg.max_iterations)
    return weighted_lp_norm(op, w, cfg.p, budget=cfg.budget, tol=cfg.norm_tol)


def _out_path(cfg: RunConfig, cmd: str, tag: str, levels: int, ext: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    name = f"{cmd}_{tag}_p{cfg.p:g}_N{levels}_seed{cfg.seed}.{ext}"
    return os.path.join(cfg.output_dir, name)


def _write_table(cfg: RunConfig, cmd: str, tag: str, levels: int,
                 table: CsvTable) -> str:
    path = _out_path(cfg, cmd, tag, levels, "csv")
    table.emit(path)
    print(f"wrote {path}")
    return path


def _maybe_svg(cfg: RunConfig, cmd: str, tag: str, levels: int,
               table: CsvTable, x_col: str, y_col: str, fit=None) -> None:
    if not cfg.svg:
        return
    x = table.floats(x_col)
    y = table.floats(y_col)
    usable = ~(np.isnan(x) | np.isnan(y))
    log_log = bool(usable.any() and x[usable].min() > 0 and y[usable].min() > 0)
    path = _out_path(cfg, cmd, tag, levels, "svg")
    emit_svg_plot(table, x_col, y_col, log_log=log_log, fit=fit, path=path)
    print(f"wrote {path}")


def _weight_tag(spec: str) -> str:
    return spec.partition(":")[0]


def _cmd_characteristic(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid_levels)
    w = build_weight(cfg.weight, grid, cfg.seed)
    if cfg.kind == "ap":
        rep = ap_characteristic(w, cfg.p, shifted=cfg.shifted)
    elif cfg.kind == "a1":
        rep = a1_characteristic(w, shifted=cfg.shifted)
    elif cfg.kind == "ainfty":
        rep = ainfty_characteristic(w, shifted=cfg.shifted)
    elif cfg.kind == "bmo":
        rep = bmo_norm(w.log(), shifted=cfg.shifted)
    else:
        rep = blo_constant(w.log(), shifted=cfg.shifted)
    table = CsvTable.from_values(
        ("kind", "p", "family", "value",
         "witness_level", "witness_index", "witness_shifted"),
        [(
            rep.kind,
            rep.p if rep.p is not None else "",
            rep.family,
            rep.value,
            rep.witness.level,
            rep.witness.index,
            rep.witness.shifted,
        )],
    )
    _write_table(cfg, "characteristic", _weight_tag(cfg.weight), grid.levels, table)
    print(f"{rep.kind} = {rep.value:.17g}")
    return 0


def _cmd_metric(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid_levels)
    u = build_weight(cfg.weight, grid, cfg.seed)
    v = build_weight(cfg.weight2, grid, cfg.seed + 1)
    value = d_star(u, v, shifted=cfg.shifted)
    table = CsvTable.from_values(
        ("family", "weight", "weight2", "value"),
        [(cfg.interval_family, cfg.weight, cfg.weight2, value)],
    )
    _write_table(cfg, "metric", "dstar", grid.levels, table)
    print(f"d_star = {value:.17g}")
    return 0


def _cmd_norm(cfg: RunConfig) -> int:
    op = _build_operator(cfg)
    w = build_weight(cfg.weight, op.grid, cfg.seed)
    est = _norm_estimate(op, w, cfg)
    header = ("operator", "p", "weight_id", "value", "iterations", "converged")
    row = (op.tag, cfg.p, cfg.weight, est.value, est.iterations, est.converged)
    path = _out_path(cfg, "norm", op.tag, op.grid.levels, "csv")
    if os.path.exists(path):
        table = CsvTable.parse(path)
        if table.header != header:
            raise ParameterError(f"{path}: existing header does not match")
        rows = table.rows + CsvTable.from_values(header, [row]).rows
        table = CsvTable(header, rows)
    else:
        os.makedirs(cfg.output_dir, exist_ok=True)
        table = CsvTable.from_values(header, [row])
    table.emit(path)
    print(f"wrote {path}")
    print(f"norm >= {est.value:.17g} ({est.iterations} iterations)")
    if not est.converged:
        print("norm iteration did not converge within its budget", file=sys.stderr)
        return 1
    return 0


def _continuity_family(cfg: RunConfig, base):
    if cfg.direction == "random":
        return random_cells_family(base, cfg.seed, cfg.amplitude, count=1,
                                   shifted=cfg.shifted)
    f = haar_direction(base.grid, cfg.direction)
    return exp_bmo_direction(base, f, name=cfg.direction, shifted=cfg.shifted)


def _cmd_continuity(cfg: RunConfig) -> int:
    op = _build_operator(cfg)
    base = build_weight(cfg.weight, op.grid, cfg.seed)
    fam = _continuity_family(cfg, base)
    res = continuity_sweep(
        op, base, fam, cfg.delta_grid, cfg.p,
        shifted=cfg.shifted, norm_tol=cfg.norm_tol, budget=cfg.budget,
        max_iterations=cfg.max_iterations,
    )
    table = CsvTable.from_values(
        ("delta_target", "d_star_actual", "char_ap", "norm", "gap", "flagged"),
        [(r.delta_target, r.d_star_actual, r.char_ap, r.norm, r.gap, r.flagged)
         for r in res.rows],
    )
    _write_table(cfg, "continuity", op.tag, op.grid.levels, table)
    fit = None
    try:
        fit = rate_fit(res)
        print(
            f"rate fit: slope {fit.slope:.6g}, intercept {fit.intercept:.6g}, "
            f"r^2 {fit.r_squared:.6g}"
        )
    except FitError as exc:
        print(f"rate fit skipped: {exc}")
    _maybe_svg(cfg, "continuity", op.tag, op.grid.levels, table,
               "d_star_actual", "gap", fit=fit)
    return 0


def _cmd_theorem2(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid_levels)
    if any(not 0 < d < 1 for d in cfg.delta_grid):
        raise ConfigError("delta_grid: theorem2 needs deltas in (0,1)")
    generator = random_cells_family(
        unit_weight(grid), cfg.seed, cfg.amplitude,
        count=min(16, len(cfg.delta_grid)), shifted=cfg.shifted,
    )
    res = theorem2_sweep(cfg.delta_grid, generator, shifted=cfg.shifted)
    table = CsvTable.from_values(
        ("delta", "ainfty_minus_1", "bmo_of_log", "ratio_to_32sqrt", "flagged"),
        [(r.delta, r.ainfty_minus_1, r.bmo_of_log, r.ratio_to_32sqrt, r.flagged)
         for r in res.rows],
    )
    _write_table(cfg, "theorem2", "random", grid.levels, table)
    _maybe_svg(cfg, "theorem2", "random", grid.levels, table,
               "ainfty_minus_1", "bmo_of_log")
    print(f"max bmo / (32 sqrt(delta)) = {res.max_ratio:.6g}")
    if res.violations:
        print(
            f"BOUND VIOLATED on {res.violations} rows: bmo exceeded 32 sqrt(delta)",
            file=sys.stderr,
        )
        return 2
    return 0


def _cmd_sharpness(cfg: RunConfig) -> int:
    op = _build_operator(cfg)
    fam = power_circle_family(op.grid, shifted=cfg.shifted)
    rows = parallel_map(
        lambda delta: (delta, sharpness_search(
            op, delta, fam, cfg.budget, shifted=cfg.shifted,
            norm_tol=cfg.norm_tol,
        )),
        cfg.delta_grid,
    )
    table = CsvTable.from_values(
        ("delta", "best_weight_id", "gap", "d_star", "char"),
        [(d, r.best_weight_id, r.gap, r.d_star, r.char) for d, r in rows],
    )
    _write_table(cfg, "sharpness", op.tag, op.grid.levels, table)
    _maybe_svg(cfg, "sharpness", op.tag, op.grid.levels, table, "delta", "gap")
    return 0


def _cmd_noncompleteness(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid_levels)
    res = noncompleteness_demo(cfg.exponents, grid, shifted=cfg.shifted)
    table = CsvTable.from_values(
        ("n", "r", "d_star_to_next", "a1_char"),
        [(r.n, r.r, r.d_star_to_next, r.a1_char) for r in res.rows],
    )
    _write_table(cfg, "noncompleteness", "power", grid.levels, table)
    print(
        f"profile bmo = {res.profile_bmo:.17g}, proportionality error = "
        f"{res.max_proportionality_error:.3g}, a1 growth = {res.a1_ratio:.6g}x"
    )
    if res.max_proportionality_error > 1e-10:
        print(
            "PROPORTIONALITY VIOLATED: d_star is not linear in the exponent",
            file=sys.stderr,
        )
        return 2
    return 0


def _cmd_convexity(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid_levels)
    rng = np.random.default_rng(cfg.seed)
    ts = rng.uniform(0.0, 1.0, cfg.trials)
    ps = rng.choice([1.0, 1.5, 2.0, 3.0, 4.0], cfg.trials)

    def trial(i: int):
        u = random_weight(grid, cfg.seed + 2 * i + 1, cfg.amplitude)
        v = random_weight(grid, cfg.seed + 2 * i + 2, cfg.amplitude)
        lhs, rhs, ok = convexity_check(u, v, float(ts[i]), float(ps[i]),
                                       shifted=cfg.shifted)
        return (i, float(ts[i]), float(ps[i]), lhs, rhs, ok)

    rows = parallel_map(trial, range(cfg.trials))
    table = CsvTable.from_values(("trial", "t", "p", "lhs", "rhs", "ok"), rows)
    _write_table(cfg, "convexity", "random", grid.levels, table)
    bad = sum(1 for row in rows if not row[5])
    if bad:
        print(f"CONVEXITY VIOLATED on {bad} trials", file=sys.stderr)
        return 2
    return 0


def _cmd_duality(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid_levels)
    rng = np.random.default_rng(cfg.seed)
    ps = rng.choice([1.5, 2.0, 3.0, 4.0], cfg.trials)

    def trial(i: int):
        w = random_weight(grid, cfg.seed + i + 1, cfg.amplitude)
        lhs, rhs, ok = duality_check(w, float(ps[i]), shifted=cfg.shifted)
        return (i, float(ps[i]), lhs, rhs, ok)

    rows = parallel_map(trial, range(cfg.trials))
    table = CsvTable.from_values(("trial", "p", "lhs", "rhs", "ok"), rows)
    _write_table(cfg, "duality", "random", grid.levels, table)
    bad = sum(1 for row in rows if not row[4])
    if bad:
        print(f"DUALITY IDENTITY VIOLATED on {bad} trials", file=sys.stderr)
        return 2
    return 0


def _cmd_stein_weiss(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    ts = rng.uniform(0.0, 1.0, cfg.trials)

    def trial(i: int):
        kind = ("martingale", "hilbert", "riesz")[i % 3]
        if kind == "martingale":
            grid = make_grid(cfg.grid_levels)
            op = MartingaleTransform(grid, random_signs(grid.levels, cfg.seed + i))
        elif kind == "hilbert":
            op = PeriodicHilbert(make_circle(cfg.circle_points))
        else:
            op = RieszProjection(make_circle(cfg.circle_points))
        w0 = random_weight(op.grid, cfg.seed + 1000 + i, cfg.amplitude)
        w1 = random_weight(op.grid, cfg.seed + 2000 + i, cfg.amplitude)
        rep = stein_weiss_check(op, w0, w1, cfg.p, float(ts[i]),
                                budget=cfg.budget)
        return (i, op.tag, float(ts[i]), rep.k0, rep.k1, rep.measured,
                rep.bound, rep.slack, rep.converged)

    rows = parallel_map(trial, range(cfg.trials))
    table = CsvTable.from_values(
        ("trial", "operator", "t", "k0", "k1", "measured", "bound", "slack",
         "converged"),
        rows,
    )
    _write_table(cfg, "stein-weiss", "mixed", cfg.grid_levels, table)
    bad = sum(1 for row in rows if row[8] and row[7] < -1e-8)
    if bad:
        print(f"INTERPOLATION BOUND VIOLATED on {bad} trials", file=sys.stderr)
        return 2
    return 0


def _cmd_factorize(cfg: RunConfig) -> int:
    op = _build_operator(cfg)
    base = build_weight(cfg.weight, op.grid, cfg.seed)
    fam = _continuity_family(cfg, base)
    gamma = _norm_estimate(op, base, cfg).value
    usable = [d for d in cfg.delta_grid if 0 < d <= cfg.c0]
    if not usable:
        raise ConfigError(
            "delta_grid: factorize needs deltas in (0, c0] so that t <= 1"
        )

    def row_for(delta: float):
        t = t_of_delta(delta, cfg.c0)
        member = fam.member(0, delta)
        fact = factorize(member, base, t, p=cfg.p, gamma=gamma, c=cfg.c_const)
        measured = _norm_estimate(op, member, cfg).value
        return (t, fact.characteristic_of_W.value, gamma,
                fact.bound_chain[2], measured)

    rows = parallel_map(row_for, usable)
    table = CsvTable.from_values(
        ("t", "char_W", "gamma", "bound", "measured"), rows
    )
    _write_table(cfg, "factorize", op.tag, op.grid.levels, table)
    return 0


def _cmd_gj(cfg: RunConfig) -> int:
    grid = make_grid(cfg.grid_levels)
    w = build_weight(cfg.weight, grid, cfg.seed)
    lam = gj_lambda_star(w.log(), cfg.c_max, shifted=cfg.shifted)
    table = CsvTable.from_values(
        ("c_max", "lambda_star"), [(cfg.c_max, lam)]
    )
    _write_table(cfg, "gj", _weight_tag(cfg.weight), grid.levels, table)
    print(f"lambda_star = {lam:.17g}")
    return 0


_HANDLERS = {
    "characteristic": _cmd_characteristic,
    "metric": _cmd_metric,
    "norm": _cmd_norm,
    "continuity": _cmd_continuity,
    "theorem2": _cmd_theorem2,
    "sharpness": _cmd_sharpness,
    "noncompleteness": _cmd_noncompleteness,
    "convexity": _cmd_convexity,
    "duality": _cmd_duality,
    "stein-weiss": _cmd_stein_weiss,
    "factorize": _cmd_factorize,
    "gj": _cmd_gj,
}


def run_command(cmd: str, cfg: RunConfig) -> int:
    handler = _HANDLERS.get(cmd)
    if handler is None:
        print(f"error: unknown command {cmd!r}", file=sys.stderr)
        return 1
    try:
        return handler(cfg)
    except (ConfigError, ParameterError, RangeError, FitError, SearchError,
            PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muck",
        description="Dyadic Muckenhoupt characteristics, the d_* weight "
                    "metric, and weighted operator norm experiments.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--levels", type=int, dest="grid_levels",
                        help="dyadic grid depth (1..24)")
    parser.add_argument("--points", type=int, dest="circle_points",
                        help="circle grid size (power of two >= 4)")
    parser.add_argument("--p", type=float, help="Lebesgue exponent (> 1)")
    parser.add_argument("--seed", type=int, help="base seed for randomized runs")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument("--svg", action="store_true", default=None,
                        help="also write an SVG plot")
    parser.add_argument("--shifted", action="store_true", default=None,
                        help="use the dyadic+shifted interval family")
    parser.add_argument("--operator", help="martingale | hilbert | riesz | maximal")
    parser.add_argument("--signs", help="identity | alternating | random | +- string")
    parser.add_argument("--weight", help="constant | halves:A,B | power:ALPHA | "
                                         "random:AMP | file:PATH")
    parser.add_argument("--weight2", help="second weight spec (metric, stein-weiss)")
    parser.add_argument("--direction", help="quarter | half | half-neg | random")
    parser.add_argument("--deltas", dest="delta_grid",
                        help="comma-separated delta grid")
    parser.add_argument("--exponents", help="comma-separated exponents in (-1,0)")
    parser.add_argument("--budget", type=int, help="norm evaluation budget")
    parser.add_argument("--max-iter", type=int, dest="max_iterations",
                        help="power iteration cap")
    parser.add_argument("--trials", type=int, help="randomized trial count")
    parser.add_argument("--kind", help="characteristic kind: ap|a1|ainfty|bmo|blo")
    parser.add_argument("--tol", type=float, dest="norm_tol",
                        help="norm iteration tolerance")
    parser.add_argument("--char-tol", type=float, dest="char_tol",
                        help="characteristic comparison tolerance")
    parser.add_argument("--c0", type=float, help="delta-to-t proportionality")
    parser.add_argument("--c-max", type=float, dest="c_max",
                        help="characteristic cap for gj")
    parser.add_argument("--t", type=float, help="interpolation parameter")
    parser.add_argument("--gamma", type=float, help="base norm for bound chains")
    parser.add_argument("--c-const", type=float, dest="c_const",
                        help="fitted bound constant")
    parser.add_argument("--amplitude", type=float,
                        help="random log-amplitude for generated weights")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    # argparse exits with status 2 on usage errors; 2 is reserved for
    # mathematical invariant violations, so remap bad usage to 1.
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            raise
        return 1
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config") and value is not None
    }
    if overrides.get("svg"):
        overrides["svg"] = True
    if overrides.pop("shifted", None):
        overrides["interval_family"] = "dyadic+shifted"
    try:
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run_command(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
