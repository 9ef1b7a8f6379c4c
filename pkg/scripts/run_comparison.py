"""Deterministic vs chance-constrained commitment on one case.

Solves both models on the same scaled system (default: wind forecast at
20% of load energy, line ratings at 90%), then evaluates both schedules
against one shared set of wind realizations.  Prints a side-by-side
summary and writes solution payloads plus comparison.json under --out.

    python3 scripts/run_comparison.py --case cases/rts96 --out runs/comparison
"""
import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

from sccuc import (
    SolverConfig,
    load_case,
    sample_wind,
    scale_case,
    solve_benders,
    solve_deterministic,
    violation_report,
)


def reserve_mw(sol) -> float:
    return float((sol.rplus + sol.rminus).sum())


def max_violation(report) -> float:
    return max(report.worst("p"), report.worst("flow"))


def summarize(tag, sol, rep, report):
    return {
        "label": tag,
        "objective": sol.objective,
        "committed_unit_hours": int(round(sol.x.sum())),
        "generation_reserve_mw": round(reserve_mw(sol), 2),
        "tertiary_reserve_mw": round(float(sol.rup.sum()), 2),
        "cost_breakdown": sol.costs.as_dict() if sol.costs else None,
        "max_constraint_violation_prob": max_violation(report),
        "hourly_any_violation_max": float(report.hourly_any.max())
                                    / report.n_samples,
        "algorithm": rep.algorithm,
        "wall_time_s": round(rep.wall_time_s, 1),
        "master_rows": rep.master_rows,
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--case", default="cases/rts96")
    ap.add_argument("--out", default="runs/comparison")
    ap.add_argument("--wind", type=float, default=20.0,
                    help="forecast wind energy, percent of load energy")
    ap.add_argument("--line-cap-scale", type=float, default=0.9)
    ap.add_argument("--reserve-floor", type=float, default=0.005,
                    help="deterministic reserve requirement, fraction of load")
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--gap", type=float, default=0.01)
    args = ap.parse_args()

    case = scale_case(load_case(args.case),
                      wind_energy_fraction=args.wind / 100.0,
                      line_cap_scale=args.line_cap_scale)
    config = SolverConfig(gap=args.gap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.monotonic()
    det_sol, det_rep = solve_deterministic(case, args.reserve_floor, config)
    print(f"deterministic solved in {time.monotonic() - t0:.1f}s "
          f"obj {det_sol.objective:.2f}", flush=True)

    t0 = time.monotonic()
    cc_sol, cc_rep = solve_benders(case, config)
    print(f"chance-constrained solved in {time.monotonic() - t0:.1f}s "
          f"obj {cc_sol.objective:.2f}", flush=True)

    realization = sample_wind(case.wind_model, args.samples, args.seed)
    det_report = violation_report(case, det_sol, realization)
    cc_report = violation_report(case, cc_sol, realization)

    rows = [summarize("deterministic", det_sol, det_rep, det_report),
            summarize("chance-constrained", cc_sol, cc_rep, cc_report)]
    keys = ["objective", "committed_unit_hours", "generation_reserve_mw",
            "tertiary_reserve_mw", "max_constraint_violation_prob",
            "hourly_any_violation_max", "wall_time_s"]
    width = max(len(k) for k in keys) + 2
    print(f"\n{'':{width}}{rows[0]['label']:>22}{rows[1]['label']:>22}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:{width}}{a:>22}{b:>22}")

    det_res, cc_res = rows[0]["generation_reserve_mw"], rows[1]["generation_reserve_mw"]
    units_rel = abs(rows[1]["committed_unit_hours"] - rows[0]["committed_unit_hours"]) \
        / rows[0]["committed_unit_hours"]
    print(f"\nreserve ratio cc/det      {cc_res / max(det_res, 1e-9):.2f}")
    print(f"unit-hours rel difference {units_rel:.3f}")
    det_v, cc_v = rows[0]["max_constraint_violation_prob"], \
        rows[1]["max_constraint_violation_prob"]
    print(f"max violation det/cc      {det_v:.3f} / {cc_v:.3f}")

    (out / "comparison.json").write_text(json.dumps({
        "case": args.case, "wind_pct": args.wind,
        "line_cap_scale": args.line_cap_scale, "samples": args.samples,
        "seed": args.seed, "runs": rows}, indent=1))
    (out / "det_solution.json").write_text(json.dumps(det_sol.to_payload()))
    (out / "cc_solution.json").write_text(json.dumps(cc_sol.to_payload()))
    print(f"\nartifacts in {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
