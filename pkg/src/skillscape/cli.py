"""Command-line frontend: generate, solve, estimate, counterfactual, verify.

Every command reads a config, writes artifacts into an output directory,
and exits with a documented status code.  Outputs are deterministic for a
fixed config and seed; timestamps are confined to ``run.log``.

Exit codes:
    0  success
    2  usage error (bad flags)
    3  configuration or schema error
    4  I/O error, including refusing to overwrite without --force
    5  solver non-convergence
    6  verification failed
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import counterfactual as cf
from . import datagen, estimation, fileio, plots
from .config import ConfigError
from .equilibrium import NonConvergenceError, SolverSettings, solve_equilibrium

logger = logging.getLogger("skillscape")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_SOLVER = 5
EXIT_VERIFY = 6

# round-trip tolerances for the verify table (generator + estimator closure)
VERIFY_TOLERANCES = {"lambda": 0.02, "gamma": 0.10, "gamma_alpha": 0.05}
VERIFY_ZETA_RELATIVE = 0.05


@dataclass
class RunManifest:
    """One resolved CLI invocation."""

    command: str
    config_path: str | None
    output_dir: str
    seed: int | None = None
    force: bool = False
    threads: int = 1
    mode: str | None = None
    damping: float | None = None
    tol: float | None = None
    max_iter: int | None = None
    extras: dict = field(default_factory=dict)


def _setup_logging():
    level = os.environ.get("SKILLSCAPE_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _prepare_outdir(manifest: RunManifest, filenames: list[str]) -> Path:
    out = Path(manifest.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not manifest.force:
        existing = [f for f in filenames if (out / f).exists()]
        if existing:
            raise FileExistsError(
                f"refusing to overwrite {existing} in {out}; pass --force")
    return out


def _open_log(out: Path):
    # the one artifact allowed to carry timestamps
    return open(out / "run.log", "a", encoding="utf-8")


def _solver_settings(manifest: RunManifest, base: SolverSettings | None
                     ) -> SolverSettings:
    s = base or SolverSettings()
    return SolverSettings(
        damping=manifest.damping if manifest.damping is not None else s.damping,
        tol=manifest.tol if manifest.tol is not None else s.tol,
        max_iter=manifest.max_iter if manifest.max_iter is not None else s.max_iter,
        mode=manifest.mode if manifest.mode is not None else s.mode,
        init=s.init,
    )


def cmd_generate(manifest: RunManifest) -> int:
    if manifest.config_path:
        spec = fileio.read_generator_spec(manifest.config_path)
    else:
        spec = datagen.GeneratorSpec()
    if manifest.seed is not None:
        spec.seed = manifest.seed
    out = _prepare_outdir(manifest, ["panel.csv", "migration.csv",
                                     "truth.json"])
    panel, migration, truth = datagen.generate_panel(spec)
    fileio.write_panel(out / "panel.csv", panel)
    fileio.write_migration(out / "migration.csv", migration)
    fileio.write_truth(out / "truth.json", truth)
    with _open_log(out) as log:
        log.write(f"{time.strftime('%FT%T')} generate seed={spec.seed} "
                  f"cities={spec.n_cities} years={spec.years}\n")
    print(f"wrote panel.csv, migration.csv, truth.json to {out}")
    return EXIT_OK


def cmd_solve(manifest: RunManifest) -> int:
    config, cities, solver, _ = fileio.read_config(manifest.config_path)
    settings = _solver_settings(manifest, solver)
    out = _prepare_outdir(manifest, ["equilibrium.csv", "state.json",
                                     "trace.csv", "trace.png"])
    trace_rows: list[dict] = []
    state = solve_equilibrium(config, cities, settings,
                              trace_hook=trace_rows.append)
    table = pd.DataFrame({
        "city": np.arange(config.n_cities),
        "population": state.population,
        "p_nontradable": state.p_nontradable,
        "p_housing": state.p_housing,
        "unskilled_share": state.skill_share[:, 0],
        "college_share": 1.0 - state.skill_share[:, 0],
        "log_market_potential": state.log_market_potential,
        "reservation_value": state.reservation_value,
    })
    table.to_csv(out / "equilibrium.csv", index=False)
    fileio.write_state(out / "state.json", state)
    fileio.write_trace(out / "trace.csv", trace_rows)
    plots.plot_trace(pd.DataFrame(trace_rows), out / "trace.png")
    with _open_log(out) as log:
        log.write(f"{time.strftime('%FT%T')} solve mode={settings.mode} "
                  f"iters={state.n_iter} gap={state.residual:.3e}\n")
    print(f"converged in {state.n_iter} iterations (gap {state.residual:.2e}); "
          f"wrote equilibrium.csv, state.json, trace.csv, trace.png to {out}")
    return EXIT_OK


def cmd_estimate(manifest: RunManifest) -> int:
    panel = fileio.read_panel(manifest.extras["panel"])
    migration = fileio.read_migration(manifest.extras["migration"])
    out = _prepare_outdir(manifest, ["estimates.csv", "amenities.csv",
                                     "amenities.png"])
    result = estimation.estimate_all(panel, migration)
    fileio.write_results(out / "estimates.csv", result.to_frame())
    amen = pd.DataFrame(sorted(result.amenities.items()),
                        columns=["msa", "amenity"])
    amen.to_csv(out / "amenities.csv", index=False)
    plots.plot_amenities(result.amenities, out / "amenities.png")
    with _open_log(out) as log:
        log.write(f"{time.strftime('%FT%T')} estimate lambda={result.lambda_hat:.4f} "
                  f"gamma={result.gamma_hat:.4f} "
                  f"gamma_alpha={result.gamma_agg_hat:.4f}\n")
    print(result.to_frame().to_string(index=False))
    print(f"wrote estimates.csv, amenities.csv, amenities.png to {out}")
    return EXIT_OK


def cmd_counterfactual(manifest: RunManifest) -> int:
    out = _prepare_outdir(manifest, ["counterfactual.csv",
                                     "counterfactual.png"])
    panel_path = manifest.extras.get("panel")
    if panel_path:
        # data-driven experiment: estimate, then equalize observed fractions
        panel = fileio.read_panel(panel_path)
        migration = fileio.read_migration(manifest.extras["migration"])
        result = estimation.estimate_all(panel, migration)
        reports = cf.redistribution_from_panel(panel, result)
    else:
        if not manifest.config_path:
            raise ConfigError(["counterfactual needs either --panel/"
                               "--migration or --config"])
        config, cities, solver, est_block = \
            fileio.read_config(manifest.config_path)
        zeta_by_year = est_block.get("zeta_by_year") or \
            {0: config.zeta_tilde * config.tau}
        state_path = manifest.extras.get("state")
        if state_path:
            state = fileio.read_state(state_path)
        else:
            state = solve_equilibrium(config, cities,
                                      _solver_settings(manifest, solver))
        reports = cf.redistribution_from_state(
            state, cities, config.lambda_, config.gamma_agg,
            config.gamma_sig, zeta_by_year)
    frame = pd.concat([r.to_frame() for r in reports], ignore_index=True)
    fileio.write_counterfactual(out / "counterfactual.csv", frame)
    plots.plot_counterfactual(frame, out / "counterfactual.png")
    with _open_log(out) as log:
        log.write(f"{time.strftime('%FT%T')} counterfactual "
                  f"years={sorted(frame['year'].unique().tolist())}\n")
    print(f"wrote counterfactual.csv and counterfactual.png to {out}")
    return EXIT_OK


def _verify_rows(truth: dict, result: estimation.EstimationResult,
                 years) -> pd.DataFrame:
    rows = []

    def add(param, truth_v, est, tol):
        rows.append({"param": param, "truth": truth_v, "estimate": est,
                     "tolerance": tol, "ok": abs(est - truth_v) <= tol})

    add("lambda", truth["lambda"], result.lambda_hat,
        VERIFY_TOLERANCES["lambda"])
    add("gamma", truth["gamma_sig"], result.gamma_hat,
        VERIFY_TOLERANCES["gamma"])
    add("gamma_alpha", truth["gamma_agg"], result.gamma_agg_hat,
        VERIFY_TOLERANCES["gamma_alpha"])
    for year in years:
        t = truth[f"zeta_{year}"]
        add(f"zeta_{year}", t, result.zeta_hat.get(year, np.nan),
            VERIFY_ZETA_RELATIVE * t)
    return pd.DataFrame(rows, columns=["param", "truth", "estimate",
                                       "tolerance", "ok"])


def _mc_consistency_row(threads: int) -> dict:
    """Simulated agents against the closed-form choice rule, in binomial SEs."""
    from skillscape import choice_probabilities, simulate_agents

    rng = np.random.default_rng(314)
    C = 3
    omega = np.empty((C, 2, C))
    p_n = rng.uniform(1.5, 2.5, size=C)
    p_h = rng.uniform(0.5, 1.0, size=C)
    a = rng.normal(0.0, 0.2, size=C)
    omega[:, 0, :] = p_n[None, :]
    omega[:, 1, :] = rng.normal(2.5, 0.5, size=(C, C))
    args = dict(omega=omega, p_n=p_n, p_h=p_h, a=a, d=np.zeros((C, C)),
                taste=np.ones((C, 2, C)), theta=1.5, lam=0.6)
    p = choice_probabilities(**args)
    n = 200_000
    shares, _ = simulate_agents(n_agents=n, seed=314, n_threads=threads,
                                **args)
    se = np.sqrt(p * (1.0 - p) / n)
    dev = float((np.abs(shares - p) / np.maximum(se, 1e-15)).max())
    return {"param": "mc_choice_dev_sigmas", "truth": 0.0, "estimate": dev,
            "tolerance": 4.0, "ok": dev <= 4.0}


def cmd_verify(manifest: RunManifest) -> int:
    if manifest.config_path:
        spec = fileio.read_generator_spec(manifest.config_path)
    else:
        spec = datagen.GeneratorSpec()
    if manifest.seed is not None:
        spec.seed = manifest.seed
    out = _prepare_outdir(manifest, ["panel.csv", "migration.csv",
                                     "truth.json", "estimates.csv",
                                     "verify_report.csv", "recovery.png"])
    panel, migration, truth = datagen.generate_panel(spec)
    fileio.write_panel(out / "panel.csv", panel)
    fileio.write_migration(out / "migration.csv", migration)
    fileio.write_truth(out / "truth.json", truth)
    result = estimation.estimate_all(panel, migration)
    fileio.write_results(out / "estimates.csv", result.to_frame())
    report = _verify_rows(truth, result, spec.years)
    if manifest.extras.get("mc_check"):
        row = _mc_consistency_row(manifest.threads)
        report = pd.concat([report, pd.DataFrame([row])], ignore_index=True)
    report.to_csv(out / "verify_report.csv", index=False)
    plots.plot_recovery(report, out / "recovery.png")
    with _open_log(out) as log:
        log.write(f"{time.strftime('%FT%T')} verify seed={spec.seed} "
                  f"pass={bool(report['ok'].all())}\n")

    width = max(len(p) for p in report["param"])
    print(f"{'param'.ljust(width)}  {'truth':>10}  {'estimate':>10}  "
          f"{'tolerance':>10}  status")
    for r in report.itertuples(index=False):
        status = "pass" if r.ok else "FAIL"
        print(f"{r.param.ljust(width)}  {r.truth:>10.4f}  {r.estimate:>10.4f}  "
              f"{r.tolerance:>10.4f}  {status}")
    if not report["ok"].all():
        print("verification FAILED")
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skillscape",
        description="Simulate, estimate, and run counterfactuals for the "
                    "spatial skill-acquisition model.",
        epilog="Exit codes: 0 ok, 2 usage, 3 config/schema error, 4 I/O "
               "error (including overwrite refusal), 5 solver "
               "non-convergence, 6 verification failure.  Set "
               "SKILLSCAPE_LOG={error|info|debug} for logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=False, default=None,
                           help="path to the JSON config for this command")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override for generator-backed commands")
        p.add_argument("--mode", choices=["one-generation", "steady-state"],
                       default=None, help="solver mode override")
        p.add_argument("--damping", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for agent-level simulation")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing artifacts")

    p = sub.add_parser("generate", help="write a synthetic panel + migration "
                                        "table + truth file")
    common(p)
    p = sub.add_parser("solve", help="solve the equilibrium for a config")
    common(p)
    p = sub.add_parser("estimate", help="run the estimation pipeline on a "
                                        "panel and migration table")
    common(p, needs_config=False)
    p.add_argument("--panel", required=True)
    p.add_argument("--migration", required=True)
    p = sub.add_parser("counterfactual", help="equalize college fractions "
                                              "and report welfare changes")
    common(p)
    p.add_argument("--state", default=None,
                   help="solved state.json (otherwise solve first)")
    p.add_argument("--panel", default=None,
                   help="run the data-driven experiment from this panel")
    p.add_argument("--migration", default=None,
                   help="migration table for the data-driven experiment")
    p = sub.add_parser("verify", help="generate, re-estimate, and compare "
                                      "to the recorded truth")
    common(p)
    p.add_argument("--mc-check", action="store_true",
                   help="also check simulated agents against the closed-form "
                        "choice rule (uses --threads workers)")
    return parser


def run(manifest: RunManifest) -> int:
    handlers = {"generate": cmd_generate, "solve": cmd_solve,
                "estimate": cmd_estimate, "counterfactual": cmd_counterfactual,
                "verify": cmd_verify}
    handler = handlers[manifest.command]
    try:
        return handler(manifest)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileExistsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except NonConvergenceError as e:
        print(f"solver error: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.command == "solve" and not args.config:
        print("error: --config is required for solve", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "counterfactual":
        if not args.config and not args.panel:
            print("error: counterfactual needs --config or --panel",
                  file=sys.stderr)
            return EXIT_CONFIG
        if args.panel and not args.migration:
            print("error: --panel requires --migration", file=sys.stderr)
            return EXIT_CONFIG
    manifest = RunManifest(
        command=args.command,
        config_path=getattr(args, "config", None),
        output_dir=args.out,
        seed=args.seed,
        force=args.force,
        threads=args.threads,
        mode=args.mode,
        damping=args.damping,
        tol=args.tol,
        max_iter=args.max_iter,
        extras={k: v for k, v in vars(args).items()
                if k in ("panel", "migration", "state", "mc_check")},
    )
    return run(manifest)


if __name__ == "__main__":
    sys.exit(main())
