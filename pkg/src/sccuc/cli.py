"""Command-line front end: solve a case, audit a solution, sweep a parameter.

Three subcommands share one flag vocabulary:

* ``solve``    commits the fleet and writes solution.json / report.json / cuts.csv
* ``validate`` Monte Carlo audit of an existing solution.json -> violations.csv, hourly.csv
* ``sweep``    one solve per grid point along a wind-penetration or sigma axis -> sweep.csv

``--load`` and ``--wind`` are percentages: ``--load 70`` scales every nodal
demand to 70% of nominal, ``--wind 10`` rescales the forecast so wind energy
is 10% of total load energy. Every artifact directory gets a manifest.json
(config, seed, code version) and all files are written atomically.

Exit codes: 0 solved within gap, 1 infeasible or numerical failure, 2 usage
or bad input, 3 time limit (incumbent written when one exists).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

from . import __version__
from .algorithms import SOLVERS, CutGenerationFailure, solve_benders, solve_oa, solve_sbd
from .netmodel import (IslandingError, ParseError, RiskLevels, SccucCase,
                       ValidationError, load_case, scale_case)
from .solverio import Infeasible, NumericalFailure, SolverConfig, TimeLimit, Unbounded
from .ucmodel import Solution
from .validate import sample_wind, violation_report

C1_CHOICES = ("gens", "lines", "all", "none")
DEFAULT_WIND_GRID = (5.0, 10.0, 15.0, 20.0, 25.0)


class MissingSolution(Exception):
    """validate was pointed at an output directory with no solution.json."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    case: str
    out: str
    algo: str = "oa"
    c1: str = "gens"
    eps_gen: float | None = None
    eps_gen_ctg: float | None = None
    eps_line: float | None = None
    eps_line_ctg: float | None = None
    load: float | None = None
    wind: tuple[float, ...] | None = None
    sigma: tuple[float, ...] | None = None
    line_cap_scale: float = 1.0
    samples: int = 1000
    seed: int = 0
    time_limit: float | None = None
    gap: float = 0.01
    jobs: int = 1

    def __post_init__(self):
        if self.algo not in SOLVERS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.c1 not in C1_CHOICES:
            raise ValueError(f"--c1 must be one of {C1_CHOICES}")
        for label, grid in (("--wind", self.wind), ("--sigma", self.sigma)):
            for v in grid or ():
                if v <= 0:
                    raise ValueError(f"{label} values must be positive percents")
        if self.load is not None and self.load <= 0:
            raise ValueError("--load must be a positive percent")
        if self.samples < 1:
            raise ValueError("--samples must be at least 1")
        if self.jobs < 1:
            raise ValueError("--jobs must be at least 1")
        if self.command in ("solve", "validate") and self.wind and len(self.wind) > 1:
            raise ValueError(f"{self.command} takes a single --wind value")
        if self.command != "sweep" and self.sigma:
            raise ValueError("--sigma is a sweep axis")
        if self.command == "sweep" and self.wind and self.sigma \
                and len(self.wind) > 1 and len(self.sigma) > 1:
            raise ValueError("sweep along one axis at a time")

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        return cls(
            command=ns.command, case=ns.case, out=ns.out, algo=ns.algo, c1=ns.c1,
            eps_gen=ns.eps_gen, eps_gen_ctg=ns.eps_gen_ctg,
            eps_line=ns.eps_line, eps_line_ctg=ns.eps_line_ctg,
            load=ns.load, wind=_grid(ns.wind), sigma=_grid(getattr(ns, "sigma", None)),
            line_cap_scale=ns.line_cap_scale, samples=ns.samples, seed=ns.seed,
            time_limit=ns.time_limit, gap=ns.gap, jobs=getattr(ns, "jobs", 1),
        )

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["wind"] = None if self.wind is None else list(self.wind)
        out["sigma"] = None if self.sigma is None else list(self.sigma)
        return out


def _grid(raw: str | None) -> tuple[float, ...] | None:
    if raw is None:
        return None
    try:
        values = tuple(float(tok) for tok in str(raw).split(",") if tok.strip())
    except ValueError:
        raise ValueError(f"expected a number or comma list, got {raw!r}")
    return values or None


# -- artifact plumbing ------------------------------------------------------------------


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _manifest(cfg: RunConfig) -> dict:
    return {"config": cfg.as_dict(), "seed": cfg.seed, "code_version": __version__}


def _emit_error(out_dir: Path | None, kind: str, message: str, code: int) -> int:
    payload = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_json(out_dir / "error.json", payload)
        except OSError:
            pass
    return code


# -- case preparation -------------------------------------------------------------------


def _prepare_case(cfg: RunConfig, wind_pct: float | None = None,
                  sigma_pct: float | None = None) -> SccucCase:
    case = load_case(cfg.case)
    overrides = {
        "eps_gen": cfg.eps_gen, "eps_gen_ctg": cfg.eps_gen_ctg,
        "eps_line": cfg.eps_line, "eps_line_ctg": cfg.eps_line_ctg,
    }
    if any(v is not None for v in overrides.values()):
        merged = {k: (case.risk.as_dict()[k] if v is None else v)
                  for k, v in overrides.items()}
        case = dataclasses.replace(case, risk=RiskLevels(**merged))
    kwargs = {}
    if cfg.load is not None:
        kwargs["load_scale"] = cfg.load / 100.0
    if wind_pct is not None:
        kwargs["wind_energy_fraction"] = wind_pct / 100.0
    if sigma_pct is not None:
        kwargs["sigma_over_mean"] = sigma_pct / 100.0
    if cfg.line_cap_scale != 1.0:
        kwargs["line_cap_scale"] = cfg.line_cap_scale
    return scale_case(case, **kwargs) if kwargs else case


def _c1_ids(case: SccucCase, choice: str) -> list[int] | None:
    if choice == "gens":
        return None  # solver default: every generator outage starts materialized
    if choice == "none":
        return []
    if choice == "lines":
        return [c.id for c in case.contingencies if c.is_line]
    return [c.id for c in case.contingencies]


def _run_solver(case: SccucCase, cfg: RunConfig, config: SolverConfig):
    if cfg.algo == "sbd":
        return solve_sbd(case, c1=_c1_ids(case, cfg.c1), config=config)
    if cfg.algo == "benders":
        return solve_benders(case, config=config)
    return solve_oa(case, config=config)


# -- subcommands ------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    case = _prepare_case(cfg, wind_pct=cfg.wind[0] if cfg.wind else None)
    _write_json(out / "manifest.json", _manifest(cfg))
    config = SolverConfig(gap=cfg.gap, time_limit_s=cfg.time_limit)
    try:
        sol, report = _run_solver(case, cfg, config)
    except TimeLimit as exc:
        if exc.solution is not None:
            _write_json(out / "solution.json", exc.solution.to_payload(case))
        return _emit_error(out, "time-limit", str(exc), code=3)
    except (Infeasible, Unbounded) as exc:
        return _emit_error(out, "infeasible", str(exc), code=1)
    except (NumericalFailure, CutGenerationFailure) as exc:
        return _emit_error(out, "numerical", str(exc), code=1)
    _write_json(out / "solution.json", sol.to_payload(case))
    _write_json(out / "report.json", {**report.as_dict(), "config": cfg.as_dict()})
    _write_csv(out / "cuts.csv", ("round", "origin", "hour", "contingency", "violation"),
               [(rec.round, rec.origin, rec.t + 1,
                 "" if rec.ctg is None else rec.ctg, f"{rec.violation:.6e}")
                for rec in report.cut_log])
    print(json.dumps({"status": sol.status, "objective": sol.objective,
                      "gap": sol.gap, "out": str(out)}))
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    sol_path = out / "solution.json"
    if not sol_path.is_file():
        raise MissingSolution(f"no solution.json under {out}; run solve first")
    case = _prepare_case(cfg, wind_pct=cfg.wind[0] if cfg.wind else None)
    sol = Solution.from_payload(case, json.loads(sol_path.read_text(encoding="utf-8")))
    realization = sample_wind(case.wind_model, cfg.samples, cfg.seed)
    report = violation_report(case, sol, realization)
    _write_csv(out / "violations.csv",
               ("family", "contingency", "hour", "index", "direction", "count",
                "probability"),
               [(fam, cid, t + 1, idx, sign, hits, f"{prob:.6g}")
                for fam, cid, t, idx, sign, hits, prob in report.rows()])
    _write_csv(out / "hourly.csv", ("hour", "scenarios_hit", "probability"),
               [(t + 1, hits, f"{prob:.6g}") for t, hits, prob in report.hourly_rows()])
    print(json.dumps({
        "samples": report.n_samples,
        "total_violations": report.total_violations(),
        "worst_output_probability": report.worst("p"),
        "worst_flow_probability": report.worst("flow"),
        "negative_draws": report.negative_draws,
        "out": str(out),
    }))
    return 0


def _sweep_cell(cfg: RunConfig, axis: str, value: float) -> dict:
    """One grid point; never raises, failures become a marked row."""
    if axis == "sigma_pct":
        wind_pct = cfg.wind[0] if cfg.wind else None
        sigma_pct = value
    else:
        wind_pct, sigma_pct = value, (cfg.sigma[0] if cfg.sigma else None)
    cell = {"value": value, "status": "optimal", "objective": "",
            "committed": "", "reserve_mw": "", "error": ""}
    try:
        case = _prepare_case(cfg, wind_pct=wind_pct, sigma_pct=sigma_pct)
        sol, _ = _run_solver(case, cfg,
                             SolverConfig(gap=cfg.gap, time_limit_s=cfg.time_limit))
    except (Infeasible, Unbounded) as exc:
        cell.update(status="infeasible", error=str(exc))
    except TimeLimit as exc:
        cell.update(status="time-limit", error=str(exc))
    except (NumericalFailure, CutGenerationFailure) as exc:
        cell.update(status="numerical", error=str(exc))
    else:
        reserve = float((sol.rplus + sol.rminus).sum()) / case.horizon
        cell.update(objective=f"{sol.objective:.6f}",
                    committed=int(round(float(sol.x.sum()))),
                    reserve_mw=f"{reserve:.4f}")
    return cell


def cmd_sweep(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.sigma and (len(cfg.sigma) > 1 or not cfg.wind):
        axis, grid = "sigma_pct", cfg.sigma
    else:
        axis, grid = "wind_pct", cfg.wind or DEFAULT_WIND_GRID
    _write_json(out / "manifest.json", {**_manifest(cfg), "axis": axis})
    run = partial(_sweep_cell, cfg, axis)
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            cells = list(pool.map(run, grid))
    else:
        cells = [run(v) for v in grid]
    _write_csv(out / "sweep.csv",
               (axis, "status", "objective", "committed_unit_hours",
                "avg_reserve_mw", "error"),
               [(c["value"], c["status"], c["objective"], c["committed"],
                 c["reserve_mw"], c["error"]) for c in cells])
    failed = [c for c in cells if c["status"] != "optimal"]
    print(json.dumps({"axis": axis, "points": len(cells), "failed": len(failed),
                      "out": str(out)}))
    return 1 if failed else 0


# -- entry point ------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", required=True, metavar="DIR",
                        help="case directory (case.json, demand.csv, wind.csv, "
                             "contingencies.json)")
    common.add_argument("--out", default="run", metavar="DIR",
                        help="artifact directory (default: ./run)")
    common.add_argument("--algo", choices=sorted(SOLVERS), default="oa",
                        help="solution algorithm (default: oa)")
    common.add_argument("--c1", choices=C1_CHOICES, default="gens",
                        help="contingency blocks built before the first solve "
                             "(sbd only; default: gens)")
    common.add_argument("--eps-gen", type=float, default=None, metavar="E",
                        help="base-case output violation budget override")
    common.add_argument("--eps-gen-ctg", type=float, default=None, metavar="E")
    common.add_argument("--eps-line", type=float, default=None, metavar="E")
    common.add_argument("--eps-line-ctg", type=float, default=None, metavar="E")
    common.add_argument("--load", type=float, default=None, metavar="PCT",
                        help="scale every nodal demand to PCT%% of nominal")
    common.add_argument("--wind", default=None, metavar="PCT[,PCT...]",
                        help="wind penetration as %% of load energy "
                             "(comma list = sweep axis)")
    common.add_argument("--line-cap-scale", type=float, default=1.0, metavar="F",
                        help="derate every line capacity by F (default 1.0)")
    common.add_argument("--samples", type=int, default=1000, metavar="N",
                        help="Monte Carlo sample count for validate (default 1000)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--time-limit", type=float, default=None, metavar="S",
                        help="wall-clock budget in seconds")
    common.add_argument("--gap", type=float, default=0.01,
                        help="relative MILP optimality gap (default 0.01)")

    parser = argparse.ArgumentParser(
        prog="sccuc",
        description="N-1 secure, chance-constrained unit commitment under "
                    "Gaussian wind uncertainty.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common],
                   help="solve a case and write solution/report/cut artifacts")
    sub.add_parser("validate", parents=[common],
                   help="Monte Carlo audit of an existing solution.json")
    sweep = sub.add_parser("sweep", parents=[common],
                           help="one solve per grid point, aggregated to sweep.csv")
    sweep.add_argument("--sigma", default=None, metavar="PCT[,PCT...]",
                       help="forecast-error sigma as %% of each farm mean "
                            "(comma list = sweep axis)")
    sweep.add_argument("--jobs", type=int, default=1,
                       help="grid points solved in parallel (default 1)")
    return parser


def main(argv=None) -> int:
    try:
        ns = _build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return 0 if exc.code in (0, None) else 2
    out_dir: Path | None = None
    try:
        cfg = RunConfig.from_args(ns)
        out_dir = Path(cfg.out)
        handler = {"solve": cmd_solve, "validate": cmd_validate, "sweep": cmd_sweep}
        return handler[cfg.command](cfg)
    except MissingSolution as exc:
        return _emit_error(out_dir, "missing-solution", str(exc), code=2)
    except (ParseError, ValidationError, IslandingError) as exc:
        return _emit_error(out_dir, "bad-case", str(exc), code=2)
    except ValueError as exc:
        return _emit_error(out_dir, "usage", str(exc), code=2)


if __name__ == "__main__":
    sys.exit(main())
