"""Regenerate src/modqlaw/presets/tuned.json, the frozen PSO weights used by the acceptance tests.

Each job is written as soon as it finishes; rerunning skips jobs already present.
Usage: python scripts/tune_presets.py [--only JOB ...] [--workers N]
"""

import argparse
import dataclasses
import json
import logging
import time
from pathlib import Path

from modqlaw.scenario import preset
from modqlaw.tuner import PsoParams, SwarmDivergedError, pso_optimize

OUT = Path(__file__).resolve().parents[1] / "src" / "modqlaw" / "presets" / "tuned.json"
SEED = 0

# name: (preset, law, eta threshold)
JOBS = {
    "caseC-modified-eta0": ("caseC", "modified", 0.0),
    "caseA-modified-eta0": ("caseA", "modified", 0.0),
    "caseA-classic-eta0": ("caseA", "classic", 0.0),
    "caseA-modified-eta0.3": ("caseA", "modified", 0.3),
    "caseA-modified-eta0.6": ("caseA", "modified", 0.6),
    "caseB-classic-eta0": ("caseB", "classic", 0.0),
}


def scenario_for(case, law, eta):
    scn = preset(case)
    ctl = scn.controller
    ctl = dataclasses.replace(ctl, law=law, coast=dataclasses.replace(ctl.coast, eta_threshold=eta))
    return dataclasses.replace(scn, controller=ctl)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", nargs="*", choices=sorted(JOBS))
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    params = PsoParams(workers=args.workers)
    done = json.loads(OUT.read_text()) if OUT.exists() else {}
    for name in args.only or JOBS:
        if name in done:
            continue
        case, law, eta = JOBS[name]
        start = time.perf_counter()
        entry = {"preset": case, "law": law, "eta_threshold": eta, "seed": SEED,
                 "pso": dataclasses.asdict(params)}
        try:
            res = pso_optimize(scenario_for(case, law, eta), params=params, seed=SEED)
        except SwarmDivergedError as exc:
            entry.update(converged=False, error=str(exc))
        else:
            s = res.best_summary
            entry.update(weights=res.best_values, converged=s.converged, transfer_days=s.transfer_days,
                         propellant_kg=s.propellant_kg, history=res.history,
                         evaluations=res.evaluations, converged_evaluations=res.converged_evaluations)
        entry["wall_s"] = round(time.perf_counter() - start, 1)
        done[name] = entry
        OUT.write_text(json.dumps(done, indent=2) + "\n")
        logging.info("%s done: %s", name, {k: entry.get(k) for k in ("weights", "transfer_days", "wall_s")})


if __name__ == "__main__":
    main()
