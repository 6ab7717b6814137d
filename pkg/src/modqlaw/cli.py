"""Command line entry point: ``modqlaw {propagate,tune,pareto,validate,report}``.

Exit status: 0 on success, 2 when a run ends without converging, 1 on any
error. Errors are printed to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .propagator import ENGINES, propagate
from .report import CSV_HEADER, read_csv, write_csv, write_plots
from .scenario import ScenarioError, load_scenario, scenario_to_dict
from .tuner import (
    PsoParams,
    SearchSpace,
    apply_values,
    pareto_front,
    pareto_sweep,
    pso_optimize,
)

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2

CSV_HELP = ("trajectory.csv columns, in order: " + ", ".join(CSV_HEADER)
            + ". Angles in degrees, time in seconds, thrust_on and eclipse as 0/1.")


class CliError(Exception):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def tuned_weights() -> dict:
    """Frozen PSO results shipped with the package, keyed '<preset>-<law>-eta<threshold>'."""
    return json.loads(resources.files("modqlaw.presets").joinpath("tuned.json").read_text())


def tuned_key(name: str, law: str, eta: float) -> str:
    return f"{name}-{law}-eta{eta:g}"


def _parse_weights(text: str, scn):
    if text == "tuned":
        key = tuned_key(scn.name, scn.controller.law, scn.controller.coast.eta_threshold)
        entry = tuned_weights().get(key)
        if not entry or "weights" not in entry:
            raise CliError(f"no tuned weights for {key}", "--weights")
        return entry["weights"]
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise CliError(f"expected three comma-separated numbers or 'tuned', got {text!r}", "--weights") from None
    if len(vals) != 3 or any(v < 0 for v in vals):
        raise CliError("expected three non-negative weights a,e,i", "--weights")
    return dict(zip(("w_a", "w_e", "w_i"), vals))


def resolve_scenario(args):
    """Scenario file or preset plus command-line overrides."""
    import dataclasses

    scn = load_scenario(args.scenario)
    ctl = scn.controller
    if args.law:
        ctl = dataclasses.replace(ctl, law=args.law)
    if args.eta is not None:
        try:
            ctl = dataclasses.replace(ctl, coast=dataclasses.replace(ctl.coast, eta_threshold=args.eta))
        except ValueError as exc:
            raise CliError(str(exc), "--eta") from None
    scn = dataclasses.replace(scn, controller=ctl)
    if args.step_s is not None:
        try:
            scn = dataclasses.replace(scn, integrator=dataclasses.replace(scn.integrator, step_s=args.step_s))
        except ValueError as exc:
            raise CliError(str(exc), "--step-s") from None
    if args.max_days is not None:
        try:
            scn = dataclasses.replace(scn, max_days=args.max_days)
        except ValueError as exc:
            raise CliError(str(exc), "--max-days") from None
    if args.weights:
        scn = apply_values(scn, _parse_weights(args.weights, scn))
    return scn


def _out_dir(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def cmd_propagate(args) -> int:
    scn = resolve_scenario(args)
    traj, summary = propagate(scn, args.engine)
    out = _out_dir(args, f"run-{scn.name or 'scenario'}")
    write_csv(traj, out / "trajectory.csv")
    status = "converged" if summary.converged else "did-not-converge"
    doc = {"status": status, "summary": summary.to_dict(), "config": scenario_to_dict(scn)}
    _write_json(out / "summary.json", doc)
    if not args.no_plots:
        write_plots(traj, out / "plots")
    print(json.dumps({"status": status, "termination": summary.termination,
                      "transfer_days": summary.transfer_days, "propellant_kg": summary.propellant_kg,
                      "out": str(out)}))
    return EXIT_OK if summary.converged else EXIT_NOT_CONVERGED


def _pso_params(args) -> PsoParams:
    try:
        return PsoParams(swarm=args.swarm, iterations=args.iterations, workers=args.workers)
    except ValueError as exc:
        raise CliError(str(exc), "--swarm/--iterations/--workers") from None


def _space(args, scn) -> SearchSpace:
    return SearchSpace.default(with_zeta=args.with_zeta, targeted=scn.target.targeted)


def cmd_tune(args) -> int:
    scn = resolve_scenario(args)
    history = []
    res = pso_optimize(scn, _space(args, scn), _pso_params(args), args.seed,
                       progress=lambda it, best: history.append((it, best)))
    out = _out_dir(args, f"tune-{scn.name or 'scenario'}")
    with open(out / "tuning_log.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("iteration", "best_objective"))
        w.writerows(history)
    best = apply_values(scn, res.best_values)
    _write_json(out / "best_weights.json", {
        "weights": res.best_values, "objective": res.best_objective, "seed": args.seed,
        "evaluations": res.evaluations, "summary": res.best_summary.to_dict(),
        "config": scenario_to_dict(best),
    })
    print(json.dumps({"status": "ok", "weights": res.best_values, "objective": res.best_objective,
                      "out": str(out)}))
    return EXIT_OK


def cmd_pareto(args) -> int:
    scn = resolve_scenario(args)
    try:
        thresholds = [float(x) for x in args.thresholds.split(",")]
    except ValueError:
        raise CliError(f"expected comma-separated numbers, got {args.thresholds!r}", "--thresholds") from None
    try:
        points = pareto_sweep(scn, thresholds, _space(args, scn), _pso_params(args), args.seed)
    except ValueError as exc:
        raise CliError(str(exc), "--thresholds") from None
    front = pareto_front(points)
    out = _out_dir(args, f"pareto-{scn.name or 'scenario'}")
    names = _space(args, scn).names
    with open(out / "pareto.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("eta_threshold", "transfer_days", "propellant_kg", *names, "converged", "on_front", "error"))
        for p in points:
            w.writerow((p.eta_threshold, p.transfer_days, p.propellant_kg,
                        *(p.weights.get(n, "") for n in names), int(p.converged), int(p in front), p.error))
    print(json.dumps({"status": "ok", "points": len(points), "front": len(front), "out": str(out)}))
    return EXIT_OK if front else EXIT_NOT_CONVERGED


def cmd_validate(args) -> int:
    from .validate import SUITES, run_suites

    unknown = [s for s in args.suite or () if s not in SUITES]
    if unknown:
        raise CliError(f"unknown suite(s) {unknown}; choose from {sorted(SUITES)}", "--suite")
    results = run_suites(args.suite)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} suites passed")
    return EXIT_ERROR if failed else EXIT_OK


def cmd_report(args) -> int:
    traj = read_csv(args.trajectory)
    out = Path(args.out) if args.out else Path(args.trajectory).parent / "plots"
    paths = write_plots(traj, out)
    print(json.dumps({"status": "ok", "plots": [str(p) for p in paths]}))
    return EXIT_OK


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True, metavar="PATH",
                   help="scenario JSON file, or a preset name: caseA, caseB, caseC")
    p.add_argument("--law", choices=("classic", "modified"), help="override the controller law")
    p.add_argument("--eta", type=float, help="relative effectivity threshold in [0, 1)")
    p.add_argument("--weights", metavar="A,E,I",
                   help="weights of the a, e, i terms, or 'tuned' for the shipped PSO weights")
    p.add_argument("--step-s", type=float, help="integrator step in seconds")
    p.add_argument("--max-days", type=float, help="maximum transfer duration in days")
    p.add_argument("--out", metavar="DIR", help="output directory")


def _pso_flags(p: argparse.ArgumentParser) -> None:
    d = PsoParams()
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--swarm", type=int, default=d.swarm)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--workers", type=int, default=1, help="parallel propagation processes")
    p.add_argument("--with-zeta", action="store_true", help="also tune the a* multiplier zeta")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modqlaw", description=__doc__.splitlines()[0],
                                 epilog=CSV_HELP)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", help="one closed-loop transfer", epilog=CSV_HELP)
    _scenario_flags(p)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("tune", help="PSO search for time-optimal weights")
    _scenario_flags(p)
    _pso_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("pareto", help="PSO per effectivity threshold, time versus propellant")
    _scenario_flags(p)
    _pso_flags(p)
    p.add_argument("--thresholds", default="0,0.3,0.6", help="ascending comma-separated thresholds")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("validate", help="run the invariant and oracle suites")
    p.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="redraw SVG plots from a trajectory.csv", epilog=CSV_HELP)
    p.add_argument("--trajectory", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR", help="plot directory (default: plots/ next to the CSV)")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, CliError) as exc:
        err = {"status": "error", "error": type(exc).__name__, "key": exc.key, "message": str(exc)}
    except (OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        err = {"status": "error", "error": type(exc).__name__, "key": None, "message": str(exc)}
    print(json.dumps(err), file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
