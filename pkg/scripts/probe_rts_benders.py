"""Instrumented chance-constrained Benders run on the RTS case.

Prints per-solve timings (LP root passes and MILP rounds), screen and
certify counts per incumbent, and the final audit.  Throwaway probe for
gauging paper-scale wall time; not part of the package.
"""
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

import numpy as np

import sccuc.solverio as sio
from sccuc.algorithms import lf_audit, solve_benders
from sccuc.netmodel import load_case, scale_case
from sccuc.solverio import SolverConfig

LOAD = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
WIND = float(sys.argv[2]) if len(sys.argv) > 2 else None

t_start = time.monotonic()


def stamp() -> str:
    return f"{time.monotonic() - t_start:8.1f}s"


orig_run = sio.MilpSession._run


def timed_run(self, relaxed, remaining):
    t0 = time.monotonic()
    res = orig_run(self, relaxed, remaining)
    kind = "LP  " if relaxed else "MILP"
    print(f"{stamp()} {kind} rows={self.master.n_rows + len(self.cuts)}"
          f" cuts={len(self.cuts)} solve={time.monotonic() - t0:7.1f}s"
          f" status={res.status}", flush=True)
    return res


sio.MilpSession._run = timed_run

case = load_case("cases/rts96")
if WIND is not None or LOAD != 1.0:
    case = scale_case(case, load_scale=LOAD,
                      wind_energy_fraction=WIND)
print(f"case {case.name} load x{LOAD} wind {WIND}", flush=True)

sol, rep = solve_benders(case, config=SolverConfig(gap=0.01))
print(f"{stamp()} status {sol.status} obj {sol.objective:.2f} gap {sol.gap:.4f}")
print(f"rows {rep.master_rows} cuts {rep.cuts_by_origin} iters {rep.iterations}")
print(f"subsolves {rep.subproblem_solves} wall {rep.wall_time_s:.1f}s")
print(f"committed unit-hours {int(round(sol.x.sum()))}")
print(f"avg reserve {float((sol.rplus + sol.rminus).sum()) / case.horizon:.1f} MW/h")
bad = lf_audit(case, sol)
print(f"lf_audit entries {len(bad)}")
if bad:
    print(sorted(bad, key=lambda r: -r[2])[:5])
