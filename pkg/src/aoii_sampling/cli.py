"""Command-line front end.

Settings resolve in the order: command-line flag, then ``--config`` file, then
built-in default. The config file is flat ``key = value`` text; keys are the
long flag names without dashes (``burn_in`` and ``burn-in`` are both accepted).
Relative output paths are placed under ``$AOII_SAMPLING_OUT_DIR`` when that
variable is set.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from pathlib import Path

from . import experiments as ex
from .model import InvalidParams, ModelParams, enumerate_states
from .simulator import SimConfig, simulate
from .solver import DEFAULT_TOL, NEVER_SAMPLES, ConvergenceError, relative_value_iteration
from .threshold import ThresholdPolicy, optimal_threshold

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NO_CONVERGENCE = 0, 1, 2, 3
OUT_DIR_ENV = "AOII_SAMPLING_OUT_DIR"

DEFAULTS = {
    "q": 0.4,
    "q1": 0.3,
    "S": 1.0,
    "p": 20.0,
    "K": None,
    "tol": DEFAULT_TOL,
    "seed": 0,
    "horizon": 1_000_000,
    "burn_in": 1_000,
    "out": None,
    "svg": None,
}

CASTS = {"q": float, "q1": float, "S": float, "p": float, "K": int, "tol": float, "seed": int,
         "horizon": int, "burn_in": int, "v_th": int, "jobs": int}


class UsageError(ValueError):
    pass


def read_config(path: str | Path) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep "S" distinct from "s"
    text = Path(path).read_text()
    parser.read_string("[config]\n" + text)
    return {k.replace("-", "_"): v for k, v in parser["config"].items()}


def resolve(args: argparse.Namespace, keys) -> dict:
    """Merge flag values over config-file values over :data:`DEFAULTS`."""
    config = read_config(args.config) if args.config else {}
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in config:
            raw = config[key]
            try:
                out[key] = CASTS[key](raw) if key in CASTS else raw
            except ValueError:
                raise UsageError(f"config key {key}={raw!r} is not a valid {CASTS[key].__name__}") from None
        else:
            out[key] = DEFAULTS.get(key)
    return out


def output_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _params(cfg: dict) -> ModelParams:
    return ModelParams.create(cfg["q"], cfg["q1"], cfg["S"], cfg["p"], cfg["K"])


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"cannot parse number list {text!r}") from None


# --- subcommands --------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = resolve(args, ["q", "q1", "S", "p", "K", "tol", "out"])
    params = _params(cfg)
    res = relative_value_iteration(params, tol=cfg["tol"])
    print(f"params     q={params.q:g} q1={params.q1:g} S={params.S:g} p={params.p:g} K={params.K}")
    print(f"avg_cost   {res.avg_cost:.6f}")
    print(f"threshold  {res.threshold}")
    print(f"iterations {res.iterations} (residual {res.residual:.2e})")
    print("state   action  rel_value")
    for s in enumerate_states(params):
        print(f"{str(s):<7} {res.policy[s].name:<7} {res.rel_values[s]:.6f}")
    path = output_path(cfg["out"])
    if path is not None:
        payload = {
            "params": {"q": params.q, "q1": params.q1, "S": params.S, "p": params.p, "K": params.K},
            "avg_cost": res.avg_cost,
            "threshold": "never" if res.threshold == NEVER_SAMPLES else res.threshold,
            "iterations": res.iterations,
            "residual": res.residual,
            "policy": {str(s): int(a) for s, a in res.policy.items()},
            "rel_values": {str(s): v for s, v in res.rel_values.items()},
        }
        ex.write_text(path, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def cmd_threshold(args) -> int:
    cfg = resolve(args, ["q", "q1", "S", "p", "K"])
    res = optimal_threshold(_params(cfg))
    print(f"bounds     [{res.v_lower}, {res.v_upper}]")
    print(f"v_opt      {res.v_opt}")
    print(f"cost_opt   {res.cost_opt:.6f}")
    print("v_th    cost")
    for v, c in res.cost_table.items():
        mark = "  *" if v == res.v_opt else ""
        print(f"{v:<7} {c:.9f}{mark}")
    return EXIT_OK


def _report_checks(checks: dict[str, bool]) -> int:
    for name, ok in checks.items():
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    return EXIT_OK if all(checks.values()) else EXIT_CHECK_FAILED


def cmd_sweep(args) -> int:
    axis = args.axis
    keys = ["q", "q1", "S", "p", "K", "tol", "seed", "horizon", "burn_in", "out", "svg"]
    cfg = resolve(args, keys)
    # Base parameters set neither by flag nor config come from the published figure's base point.
    from_config = read_config(args.config) if args.config else {}
    for k, v in ex.FIGURE_BASES[axis].items():
        if getattr(args, k, None) is None and k not in from_config:
            cfg[k] = v
    values = _floats(args.values) if args.values else tuple(ex.DEFAULT_GRIDS[axis])
    modes = frozenset(m.strip() for m in args.modes.split(",") if m.strip())
    sim = SimConfig(cfg["horizon"], cfg["seed"], cfg["burn_in"]) if "simulate" in modes else None
    base = _params(cfg | {axis: values[0]}) if values else _params(cfg)
    spec = ex.SweepSpec(base, axis, values, modes, sim, cfg["K"], cfg["tol"])
    rows = ex.run_sweep(spec, jobs=args.jobs)
    text = ex.sweep_to_csv(rows)
    path = output_path(cfg["out"] or f"sweep_{axis}.csv")
    ex.write_text(path, text)
    print(f"wrote {len(rows)} rows to {path}")
    if cfg["svg"]:
        svg = output_path(cfg["svg"])
        ex.write_text(svg, ex.sweep_svg(rows))
        print(f"wrote {svg}")
    return _report_checks(ex.check_sweep(rows))


def cmd_heatmap(args) -> int:
    cfg = resolve(args, ["S", "p", "K", "out", "svg"])
    qs = _floats(args.q_values) if args.q_values else tuple(ex.DEFAULT_GRIDS["q"])
    q1s = _floats(args.q1_values) if args.q1_values else tuple(ex.DEFAULT_GRIDS["q1"])
    cells = ex.run_heatmap(qs, q1s, cfg["S"], cfg["p"], cfg["K"])
    path = output_path(cfg["out"] or "heatmap.csv")
    ex.write_text(path, ex.heatmap_to_csv(cells))
    print(f"wrote {len(cells)} cells to {path}")
    if cfg["svg"]:
        svg = output_path(cfg["svg"])
        ex.write_text(svg, ex.heatmap_svg(cells))
        print(f"wrote {svg}")
    if len(qs) > 1 and len(q1s) > 1:
        return _report_checks(ex.check_heatmap(cells))
    for c in cells:
        print(f"q={c.q:g} q1={c.q1:g} v_opt={c.v_opt} cost_opt={c.cost_opt:.6f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = resolve(args, ["q", "q1", "S", "p", "K", "seed", "horizon", "burn_in", "out", "v_th"])
    params = _params(cfg)
    v_th = cfg["v_th"] if cfg["v_th"] is not None else optimal_threshold(params).v_opt
    sim_cfg = SimConfig(cfg["horizon"], cfg["seed"], cfg["burn_in"])
    stats = simulate(params, ThresholdPolicy(v_th).as_mapping(params), sim_cfg)
    print(f"v_th        {v_th}")
    print(f"slots       {stats.slots}")
    print(f"avg_cost    {stats.avg_cost:.6f} +/- {stats.stderr_cost:.6f}")
    print(f"avg_aoii    {stats.avg_aoii:.6f}")
    print(f"drop_rate   {stats.drop_rate:.6f}")
    print(f"sample_rate {stats.sample_rate:.6f}")
    path = output_path(cfg["out"])
    if path is not None:
        lines = ["v,fraction"] + [f"{v},{ex.fmt(f)}" for v, f in stats.aoii_histogram.items()]
        ex.write_text(path, "\n".join(lines) + "\n")
        print(f"wrote {path}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_params(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--q", type=float, help="machine flip probability per slot (0 < q < 1)")
    g.add_argument("--q1", type=float, help="service completion probability per slot (0 < q1 <= 1)")
    g.add_argument("--S", type=float, help="AoII cost slope (> 0)")
    g.add_argument("--p", type=float, help="drop penalty (> 0)")
    g.add_argument("--K", type=int, help="AoII cap (default: sampling bound + 5, at least 8)")


def _add_sim(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation")
    g.add_argument("--seed", type=int)
    g.add_argument("--horizon", type=int, help="total simulated slots")
    g.add_argument("--burn-in", dest="burn_in", type=int, help="slots discarded before averaging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoii-sampling", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="flat key=value settings file")
        p.set_defaults(func=func)
        return p

    p = common("solve", cmd_solve, "solve the average-cost MDP by relative value iteration")
    _add_params(p)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="write the solution as JSON")

    p = common("threshold", cmd_threshold, "closed-form search for the optimal threshold")
    _add_params(p)

    p = common("sweep", cmd_sweep, "sweep one parameter and tabulate thresholds and costs")
    _add_params(p)
    _add_sim(p)
    p.add_argument("--axis", choices=ex.AXES, required=True)
    p.add_argument("--values", help="comma-separated axis values (default: built-in grid)")
    p.add_argument("--modes", default="bounds,closed_form", help=f"comma-separated subset of {','.join(ex.MODES)}")
    p.add_argument("--tol", type=float)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="CSV path (default sweep_<axis>.csv)")
    p.add_argument("--svg", help="also write an SVG chart")

    p = common("heatmap", cmd_heatmap, "optimal cost over a q x q1 grid")
    p.add_argument("--S", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--q-values", dest="q_values")
    p.add_argument("--q1-values", dest="q1_values")
    p.add_argument("--out", help="CSV path (default heatmap.csv)")
    p.add_argument("--svg", help="also write an SVG heatmap")

    p = common("simulate", cmd_simulate, "Monte Carlo run of a threshold policy")
    _add_params(p)
    _add_sim(p)
    p.add_argument("--v-th", dest="v_th", type=int, help="threshold (default: optimal)")
    p.add_argument("--out", help="write the AoII histogram as CSV")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParams, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
