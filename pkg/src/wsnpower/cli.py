"""Command-line interface: design, solve, simulate, sweep, validate.

Every subcommand reads one TOML config (``--config``), writes its outputs
under ``--out`` (default: the working directory), and maps failures to
stable exit codes: 0 success, 2 configuration/validity errors, 3 solver
non-convergence or numerical failure, 4 resource-guard refusals.
"""

from __future__ import annotations

import argparse
import functools
import os
import sys
from pathlib import Path

import numpy as np

from .config import SWEEP_AXES, ExperimentConfig, build_network
from .errors import (
    ConfigError,
    FeasibilityError,
    GuardError,
    ModelValidityError,
    NonConvergenceError,
    NumericError,
    ParameterError,
    ScopeError,
)
from .fading_channel import QuantizerMethod, level_probabilities, quantizer_mae
from .mdp_core import (
    Policy,
    random_policy,
    read_policy_csv,
    solve_optimal,
    solve_suboptimal,
    write_policy_csv,
)
from .monte_carlo import run_episodes, sweep, write_sweep_csv
from .network import NetworkModel

_MODES = ("optimal", "suboptimal", "random")
_STREAM_RANDOM_POLICY = 3


# ---------------------------------------------------------------------------
# Shared plumbing


def _policy_paths(out_dir: Path, mode: str, n_sensors: int) -> list[Path]:
    if mode == "suboptimal":
        return [
            out_dir / f"policy_suboptimal_sensor{k}.csv" for k in range(1, n_sensors + 1)
        ]
    return [out_dir / f"policy_{mode}.csv"]


def _solve_policies(network: NetworkModel, mode: str, solver_kwargs: dict, seed: int):
    """Runs the requested solver; returns (policies, report or None)."""
    if mode == "optimal":
        report = solve_optimal(network, **solver_kwargs)
        return report.policies, report
    if mode == "suboptimal":
        report = solve_suboptimal(network, **solver_kwargs)
        return report.policies, report
    rng = np.random.default_rng(np.random.SeedSequence((seed, _STREAM_RANDOM_POLICY, 0)))
    return (random_policy(network, rng),), None


def _write_policies(out_dir: Path, mode: str, policies, network: NetworkModel) -> list[Path]:
    paths = _policy_paths(out_dir, mode, network.n_sensors)
    for path, policy in zip(paths, policies):
        write_policy_csv(path, policy, network.model_hash)
    return paths


def _load_policies(out_dir: Path, mode: str, network: NetworkModel):
    paths = _policy_paths(out_dir, mode, network.n_sensors)
    missing = [p for p in paths if not p.exists()]
    if missing:
        raise ConfigError(
            f"missing policy file {missing[0]}; run "
            f"`wsnpower solve --mode {mode} --out {out_dir}` first"
        )
    policies: list[Policy] = []
    for path in paths:
        policy, meta = read_policy_csv(path)
        if meta["model_hash"] != network.model_hash:
            raise ConfigError(
                f"{path} was solved for model {meta['model_hash']}, but the "
                f"config describes model {network.model_hash}"
            )
        policies.append(policy)
    return policies[0] if len(policies) == 1 and policies[0].scope.value == "global" else policies


def _seed_of(args, config: ExperimentConfig) -> int:
    return args.seed if args.seed is not None else config.mc_params()["seed"]


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Subcommands


def cmd_design_quantizer(args) -> int:
    config = ExperimentConfig.from_toml(args.config)
    network = build_network(config)
    out = _out_dir(args) if args.out else None
    method = str(config.data["channel"]["quantizer"]["method"]).lower()
    for k, sensor in enumerate(network.sensors, start=1):
        q = sensor.quantizer
        gamma = sensor.channel_params.mean_square_gain
        phi = level_probabilities(q, gamma)
        print(f"sensor {k}: method={method}, levels={q.levels}, gamma={gamma:g}")
        print("  boundaries: " + ", ".join(f"{b:.6g}" for b in q.boundaries))
        print("  probabilities: " + ", ".join(f"{p:.6g}" for p in phi))
        if method == QuantizerMethod.MMAE.value:
            print(f"  mean_abs_error: {quantizer_mae(q, gamma):.6g}")
        if out is not None:
            path = out / f"quantizer_sensor{k}.csv"
            with open(path, "w", newline="") as fh:
                fh.write("level,lower,upper,probability\n")
                for lev in range(1, q.levels + 1):
                    fh.write(
                        f"{lev},{q.boundaries[lev - 1]:.12g},"
                        f"{q.boundaries[lev]:.12g},{phi[lev - 1]:.12g}\n"
                    )
            print(f"  wrote {path}")
    return 0


def cmd_solve(args) -> int:
    config = ExperimentConfig.from_toml(args.config)
    network = build_network(config)
    out = _out_dir(args)
    seed = _seed_of(args, config)
    policies, report = _solve_policies(network, args.mode, config.solver_kwargs(), seed)
    paths = _write_policies(out, args.mode, policies, network)
    for path in paths:
        print(f"wrote {path}")
    if report is not None:
        report.write_multiplier_trace_csv(out / f"solve_{args.mode}_multipliers.csv")
        report.write_residuals_csv(out / f"solve_{args.mode}_residuals.csv")
        print(
            f"{args.mode}: converged after {report.dual_iterations} multiplier "
            f"updates, {report.sweeps} sweeps, final residual {report.residuals[-1]:.3g}, "
            f"max multiplier {float(np.max(report.final_multipliers)):.6g}"
        )
    else:
        print(f"random: drew a feasible policy over {policies[0].n_states} states (seed {seed})")
    return 0


def cmd_simulate(args) -> int:
    config = ExperimentConfig.from_toml(args.config)
    network = build_network(config)
    out = _out_dir(args)
    seed = _seed_of(args, config)
    paths = _policy_paths(out, args.mode, network.n_sensors)
    if args.solve or not all(p.exists() for p in paths):
        if not args.solve:
            return _fail(
                ConfigError(
                    f"missing policy file {next(p for p in paths if not p.exists())}; "
                    f"run `wsnpower solve --mode {args.mode} --out {out}` or pass --solve"
                )
            )
        policies, _ = _solve_policies(network, args.mode, config.solver_kwargs(), seed)
        _write_policies(out, args.mode, policies, network)
    policy = _load_policies(out, args.mode, network)
    mc = config.mc_params()
    estimate = run_episodes(
        network, policy, mc["runs"], seed, warmup=mc["warmup"], fusion=mc["fusion"]
    )
    row = {"axis": "single", "value": args.mode}
    row.update(estimate.as_row())
    row["seed"] = seed
    path = out / f"simulate_{args.mode}.csv"
    write_sweep_csv(path, [row])
    print(
        f"{args.mode}: p_e={estimate.p_e:.5f} (se {estimate.p_e_se:.5f}), "
        f"avg_j={estimate.avg_j:.4f} (se {estimate.avg_j_se:.4f}), "
        f"avg_power={estimate.avg_power_mw:.4f} mW, "
        f"violations={estimate.violations}/{estimate.runs}"
    )
    print(f"wrote {path}")
    return 0


def _sweep_point(config_data: dict, mode: str, axis: str, base_seed: int, value, index: int) -> dict:
    """One sweep point: override, rebuild, re-solve, simulate. Top-level so

    it pickles into worker processes."""
    config = ExperimentConfig(data=config_data).override(SWEEP_AXES[axis], value)
    network = build_network(config)
    seed = base_seed + index
    policies, _ = _solve_policies(network, mode, config.solver_kwargs(), seed)
    policy = policies[0] if len(policies) == 1 and policies[0].scope.value == "global" else policies
    mc = config.mc_params()
    estimate = run_episodes(
        network, policy, mc["runs"], seed, warmup=mc["warmup"], fusion=mc["fusion"]
    )
    row = estimate.as_row()
    row["seed"] = seed
    return row


def cmd_sweep(args) -> int:
    config = ExperimentConfig.from_toml(args.config)
    axis, values = config.sweep_spec()
    out = _out_dir(args)
    base_seed = _seed_of(args, config)
    point_fn = functools.partial(_sweep_point, config.data, args.mode, axis, base_seed)
    rows = sweep(point_fn, axis, values, workers=args.workers)
    points_dir = out / f"sweep_{axis}_{args.mode}_points"
    points_dir.mkdir(parents=True, exist_ok=True)
    for i, row in enumerate(rows):
        _atomic_csv(points_dir / f"point_{i:03d}.csv", [row])
    merged = out / f"sweep_{axis}_{args.mode}.csv"
    _atomic_csv(merged, rows)
    print(f"wrote {merged} ({len(rows)} points)")
    if args.emit_plotdata:
        plot_path = out / f"plot_{axis}_{args.mode}.csv"
        _write_plotdata(plot_path, rows)
        print(f"wrote {plot_path}")
    return 0


def cmd_validate_config(args) -> int:
    config = ExperimentConfig.from_toml(args.config)
    network = build_network(config)
    n_local = network.sensors[0].n_local_states
    print(f"config ok: {network.n_sensors} sensors, {n_local} local states each")
    print(f"model_hash: {network.model_hash}")
    for k, s in enumerate(network.sensors, start=1):
        print(
            f"sensor {k}: p_f={s.censor.p_f:.5f}, p_d={s.censor.p_d:.5f}, "
            f"cell_power={s.battery.cell_power_mw:.4g} mW"
        )
    print(f"budget: {network.p_tot_mw:g} mW, discount {network.discount:g}")
    return 0


def _atomic_csv(path: Path, rows) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    write_sweep_csv(tmp, rows)
    os.replace(tmp, path)


def _write_plotdata(path: Path, rows) -> None:
    """Long-format metric table: one (axis value, metric) pair per row."""
    metrics = (("p_e", "p_e_se"), ("avg_j", "avg_j_se"), ("avg_power_mw", None))
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write("axis,value,metric,estimate,se\n")
        for row in rows:
            for metric, se_key in metrics:
                se = row[se_key] if se_key else 0.0
                fh.write(
                    f"{row['axis']},{row['value']},{metric},"
                    f"{row[metric]:.10g},{se:.10g}\n"
                )
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsnpower",
        description="Transmit-power control for energy-harvesting detection networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, *, mode=False, seed=False, out_required=False, workers=False, plotdata=False, solve=False):
        sp.add_argument("--config", required=True, help="TOML experiment config")
        if mode:
            sp.add_argument("--mode", choices=_MODES, default="suboptimal")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="override mc.seed")
        sp.add_argument("--out", default="." if out_required else None, help="output directory")
        if workers:
            sp.add_argument("--workers", type=int, default=1)
        if plotdata:
            sp.add_argument("--emit-plotdata", action="store_true")
        if solve:
            sp.add_argument("--solve", action="store_true", help="solve inline if policies are missing")

    sp = sub.add_parser("design-quantizer", help="print and persist quantizer designs")
    common(sp)
    sp.set_defaults(func=cmd_design_quantizer)

    sp = sub.add_parser("solve", help="solve for a power-control policy")
    common(sp, mode=True, seed=True, out_required=True)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="Monte Carlo estimate under a solved policy")
    common(sp, mode=True, seed=True, out_required=True, solve=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="re-solve and simulate along a parameter axis")
    common(sp, mode=True, seed=True, out_required=True, workers=True, plotdata=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate-config", help="parse and fully validate a config")
    common(sp)
    sp.set_defaults(func=cmd_validate_config)
    return parser


def _fail(error: Exception) -> int:
    print(f"error: {error}", file=sys.stderr)
    if isinstance(
        error, (ConfigError, ParameterError, ModelValidityError, FeasibilityError, ScopeError)
    ):
        return 2
    if isinstance(error, GuardError):
        return 4
    return 3


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (
        ConfigError,
        ParameterError,
        ModelValidityError,
        FeasibilityError,
        ScopeError,
        GuardError,
        NonConvergenceError,
        NumericError,
    ) as e:
        return _fail(e)


if __name__ == "__main__":
    sys.exit(main())
