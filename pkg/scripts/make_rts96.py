#!/usr/bin/env python3
"""Generate the 24-bus reliability test system case directory.

Single-area version of the classic 24-bus reliability test system: 32
units (3405 MW) on 24 buses and 38 branches, 17 load buses on a winter
weekday profile peaking at 2850 MW, nine wind farms (3900 MW installed)
with a mild diurnal forecast shape and sigma = 6.5% of the hourly mean.
The contingency list carries every generator outage plus six non-bridge
transmission outages. Experiments rescale demand/wind/line caps at load
time (scale_case or the solve --load/--wind/--line-cap-scale flags), so
the files here are the nominal system.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sccuc.netmodel import (Bus, Contingency, GeneratorSpec, Line, RiskLevels,
                            SccucCase, load_case, save_case)
from sccuc.stochastic import WindModel

HORIZON = 24
PEAK_MW = 2850.0

# bus id -> share of system peak (MW)
PEAK_LOAD = {
    1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175,
    10: 195, 13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128,
}

# winter weekday, fraction of daily peak per hour
PROFILE = np.array([
    0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95,
    0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00, 0.96, 0.91, 0.83, 0.73, 0.63,
])

# from id, to id, reactance (pu), continuous rating (MW)
BRANCHES = [
    (1, 2, 0.0146, 175), (1, 3, 0.2253, 175), (1, 5, 0.0907, 175),
    (2, 4, 0.1356, 175), (2, 6, 0.2050, 175), (3, 9, 0.1271, 175),
    (3, 24, 0.0840, 400), (4, 9, 0.1110, 175), (5, 10, 0.0940, 175),
    (6, 10, 0.0642, 175), (7, 8, 0.0652, 175), (8, 9, 0.1762, 175),
    (8, 10, 0.1762, 175), (9, 11, 0.0840, 400), (9, 12, 0.0840, 400),
    (10, 11, 0.0840, 400), (10, 12, 0.0840, 400), (11, 13, 0.0488, 500),
    (11, 14, 0.0426, 500), (12, 13, 0.0488, 500), (12, 23, 0.0985, 500),
    (13, 23, 0.0884, 500), (14, 16, 0.0594, 500), (15, 16, 0.0172, 500),
    (15, 21, 0.0249, 500), (15, 21, 0.0249, 500), (15, 24, 0.0529, 500),
    (16, 17, 0.0263, 500), (16, 19, 0.0234, 500), (17, 18, 0.0143, 500),
    (17, 22, 0.1069, 500), (18, 21, 0.0132, 500), (18, 21, 0.0132, 500),
    (19, 20, 0.0203, 500), (19, 20, 0.0203, 500), (20, 23, 0.0112, 500),
    (20, 23, 0.0112, 500), (21, 22, 0.0692, 500),
]

# transmission outages studied alongside the full generator N-1 set;
# first matching circuit of each pair (bridge 7-8 excluded)
OUTAGED_BRANCHES = [(15, 24), (11, 14), (12, 23), (16, 19), (3, 24), (14, 16)]

# label, buses, pmin, pmax, (block1 $/MWh, block2), no-load $/h,
# reserve $/MW, tertiary $/MW, startup blocks, min up, min down,
# ramp MW/h, committed at hour 0, initial output MW
UNIT_TYPES = [
    ("u12", [15] * 5, 2.4, 12.0, (25.9, 30.2), 24.0, 5.0, 2.0,
     ((68.0, 1, None),), 4, 2, 6.0, False, 0.0),
    ("u20", [1, 1, 2, 2], 4.0, 20.0, (37.2, 43.1), 30.0, 7.0, 2.5,
     ((15.0, 1, None),), 1, 1, 20.0, False, 0.0),
    ("u50", [22] * 6, 0.0, 50.0, (1.0, 1.0), 0.0, 0.5, 0.2,
     ((3.0, 1, None),), 1, 1, 50.0, True, 25.0),
    ("u76", [1, 1, 2, 2], 15.2, 76.0, (13.3, 14.9), 90.0, 3.2, 1.2,
     ((120.0, 1, 8), (240.0, 9, None)), 8, 4, 38.0, True, 38.0),
    ("u100", [7] * 3, 25.0, 100.0, (20.8, 23.1), 130.0, 4.5, 1.6,
     ((250.0, 1, 10), (420.0, 11, None)), 8, 8, 50.0, False, 0.0),
    ("u155", [15, 16, 23, 23], 54.25, 155.0, (10.7, 12.1), 160.0, 3.0, 1.1,
     ((300.0, 1, 12), (540.0, 13, None)), 8, 8, 78.0, True, 78.0),
    ("u197", [13] * 3, 68.95, 197.0, (20.1, 22.3), 200.0, 4.8, 1.7,
     ((440.0, 1, 12), (770.0, 13, None)), 12, 10, 99.0, True, 99.0),
    ("u350", [23], 140.0, 350.0, (10.2, 11.6), 250.0, 2.8, 1.0,
     ((900.0, 1, 24), (1500.0, 25, None)), 24, 24, 175.0, True, 175.0),
    ("u400", [18, 21], 100.0, 400.0, (5.3, 6.2), 310.0, 2.4, 0.9,
     ((1300.0, 1, 24), (2200.0, 25, None)), 24, 24, 200.0, True, 200.0),
]

# bus id, installed capacity MW
WIND_FARMS = [(3, 200), (5, 500), (7, 200), (16, 600), (21, 700),
              (23, 300), (9, 400), (14, 500), (19, 500)]
SIGMA_OVER_MEAN = 0.065
REFERENCE_BUS = 13
RESERVE_CAP_MW = 60.0


def build_generators() -> tuple[GeneratorSpec, ...]:
    gens = []
    for (label, buses, pmin, pmax, (c1, c2), a0, a1, a2, startup,
         up, down, ramp, init_on, p0) in UNIT_TYPES:
        blocks = ((c1, round(0.55 * pmax, 2)), (c2, round(0.45 * pmax, 2)))
        for k, bus_id in enumerate(buses, start=1):
            gens.append(GeneratorSpec(
                name=f"{label}-{k}", bus=bus_id - 1, p_min=pmin, p_max=pmax,
                cost_blocks=blocks, no_load_cost=a0, reserve_cost=a1,
                tertiary_cost=a2, startup_blocks=startup,
                min_up=up, min_down=down, ramp_up=ramp, ramp_down=ramp,
                init_on=init_on,
                init_up_hours=HORIZON if init_on else 0,
                init_down_hours=0 if init_on else down,
                init_power=p0 if init_on else 0.0,
            ))
    return tuple(gens)


def build_wind() -> tuple[WindModel, dict[int, int]]:
    hours = np.arange(HORIZON)
    mean = np.zeros((len(WIND_FARMS), HORIZON))
    for w, (_, cap) in enumerate(WIND_FARMS):
        cf = 0.12 + 0.05 * np.sin(2 * np.pi * (hours - 14 + 2.0 * w) / 24.0)
        mean[w] = np.round(cap * cf, 2)
    model = WindModel(mean=mean, stdev=np.round(SIGMA_OVER_MEAN * mean, 3),
                      names=tuple(f"wf-{bus}" for bus, _ in WIND_FARMS))
    farm_of_bus = {bus - 1: w for w, (bus, _) in enumerate(WIND_FARMS)}
    return model, farm_of_bus


def build_case() -> SccucCase:
    wind, farm_of_bus = build_wind()
    buses = tuple(
        Bus(id=bid,
            demand=np.round(PEAK_LOAD.get(bid, 0.0) * PROFILE, 1),
            is_reference=(bid == REFERENCE_BUS),
            wind_farm=farm_of_bus.get(bid - 1))
        for bid in range(1, 25)
    )
    lines = tuple(
        Line(from_bus=m - 1, to_bus=n - 1, susceptance=1.0 / x, capacity=float(cap))
        for m, n, x, cap in BRANCHES
    )
    generators = build_generators()

    ctgs = []
    for i, gen in enumerate(generators):
        ctgs.append(Contingency(kind="generator", index=i, id=len(ctgs),
                                name=f"gen:{gen.name}"))
    for m, n in OUTAGED_BRANCHES:
        k = next(pos for pos, (a, b, _, _) in enumerate(BRANCHES)
                 if {a, b} == {m, n})
        ctgs.append(Contingency(kind="line", index=k, id=len(ctgs),
                                name=f"line:{m}-{n}#{k}"))

    return SccucCase(
        buses=buses, lines=lines, generators=generators, wind_model=wind,
        contingencies=tuple(ctgs), horizon=HORIZON,
        risk=RiskLevels(eps_gen=0.01, eps_gen_ctg=0.02,
                        eps_line=0.10, eps_line_ctg=0.20),
        reserve_cap=RESERVE_CAP_MW, name="rts96",
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(
        Path(__file__).resolve().parent.parent / "cases" / "rts96"))
    args = parser.parse_args()

    case = build_case()
    save_case(case, args.out)
    back = load_case(args.out)

    demand = sum(float(np.sum(b.demand)) for b in back.buses)
    wind = float(back.wind_model.mean.sum())
    print(f"wrote {args.out}")
    print(f"  buses {back.n_buses}  lines {back.n_lines}  units {back.n_gens} "
          f"({sum(g.p_max for g in back.generators):.0f} MW)")
    print(f"  load energy {demand:.0f} MWh  wind energy {wind:.0f} MWh "
          f"({100 * wind / demand:.1f}%)")
    print(f"  contingencies {len(back.contingencies)} "
          f"({sum(c.is_generator for c in back.contingencies)} gen, "
          f"{sum(c.is_line for c in back.contingencies)} line)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
