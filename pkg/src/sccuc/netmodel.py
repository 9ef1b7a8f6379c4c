"""Network and fleet data model, DC flow maps, and case-file ingestion.

Conventions used throughout the package:

* Buses, lines, and generators are referred to by their position in the case
  tuples; bus *ids* (arbitrary integers from the case file) appear only at the
  ingestion boundary.
* The DC model works in MW. Line susceptances are per-unit on the case MVA
  base and converted once, so a flow is ``b_mw * (theta_m - theta_n)`` with
  angles in radians.
* Every flow map uses the balanced-injection convention: column b holds the
  line flows caused by injecting 1 MW at bus b and withdrawing 1 MW at the
  reference bus. The reference column is therefore zero.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

from .stochastic import WindModel


class ParseError(Exception):
    """Malformed case input; carries file and, when known, line number."""

    def __init__(self, path, message, line=None):
        loc = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{loc}: {message}")
        self.path = str(path)
        self.line = line


class ValidationError(Exception):
    """A structurally valid case that violates a model invariant."""


class IslandingError(Exception):
    """A line outage (or the base topology) leaves the network disconnected."""


class SingularAfterReduction(Exception):
    """Reduced admittance matrix could not be factorized."""


class CaseWarning(UserWarning):
    """Non-fatal oddities found during ingestion."""


@dataclass(frozen=True)
class Bus:
    """A network node with its hourly demand.

    ``wind_farm`` is the index of the farm in the case wind model located at
    this bus, or None.
    """

    id: int
    demand: np.ndarray
    is_reference: bool = False
    wind_farm: int | None = None


@dataclass(frozen=True)
class Line:
    from_bus: int  # bus positions, not raw ids
    to_bus: int
    susceptance: float  # per-unit
    capacity: float  # MW

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"line endpoints coincide at bus {self.from_bus}")
        if not self.susceptance > 0:
            raise ValidationError("line susceptance must be positive")
        if not self.capacity > 0:
            raise ValidationError("line capacity must be positive")


@dataclass(frozen=True)
class GeneratorSpec:
    """Static data of one dispatchable unit.

    cost_blocks: (marginal cost $/MWh, block width MW) in dispatch order.
    startup_blocks: (cost $, shortest off-time, longest off-time or None for
    unbounded) ordered by off-time; windows must not overlap.
    """

    name: str
    bus: int
    p_min: float
    p_max: float
    cost_blocks: tuple[tuple[float, float], ...]
    no_load_cost: float
    reserve_cost: float
    tertiary_cost: float
    startup_blocks: tuple[tuple[float, int, int | None], ...]
    min_up: int
    min_down: int
    ramp_up: float
    ramp_down: float
    init_up_hours: int = 0
    init_down_hours: int = 1
    init_on: bool = False
    init_power: float = 0.0
    forced_on_hours: int = 0
    forced_off_hours: int = 0

    def __post_init__(self):
        if not 0 <= self.p_min <= self.p_max:
            raise ValidationError(f"{self.name}: need 0 <= p_min <= p_max")
        if not self.cost_blocks:
            raise ValidationError(f"{self.name}: at least one cost block")
        if sum(w for _, w in self.cost_blocks) < self.p_max - 1e-9:
            raise ValidationError(
                f"{self.name}: cost block widths must cover p_max"
            )
        if any(w < 0 for _, w in self.cost_blocks):
            raise ValidationError(f"{self.name}: negative cost block width")
        if not self.startup_blocks:
            raise ValidationError(f"{self.name}: at least one startup block")
        prev_hi = 0
        for s, (cost, lo, hi) in enumerate(self.startup_blocks):
            if lo <= prev_hi:
                raise ValidationError(
                    f"{self.name}: startup block {s} overlaps or is unordered"
                )
            if hi is not None and hi < lo:
                raise ValidationError(f"{self.name}: startup block {s} empty")
            if hi is None and s != len(self.startup_blocks) - 1:
                raise ValidationError(
                    f"{self.name}: only the last startup block may be open-ended"
                )
            prev_hi = hi if hi is not None else lo
        if self.min_up < 1 or self.min_down < 1:
            raise ValidationError(f"{self.name}: min up/down times must be >= 1")
        if self.ramp_up <= 0 or self.ramp_down <= 0:
            raise ValidationError(f"{self.name}: ramp limits must be positive")
        if self.init_on != (self.init_up_hours > 0):
            raise ValidationError(
                f"{self.name}: init_on must match init_up_hours > 0"
            )
        if self.init_on and self.init_down_hours > 0:
            raise ValidationError(f"{self.name}: unit cannot be both up and down")
        if not self.init_on and self.init_down_hours < 1:
            raise ValidationError(
                f"{self.name}: offline unit needs init_down_hours >= 1"
            )
        if self.forced_on_hours > 0 and self.forced_off_hours > 0:
            raise ValidationError(
                f"{self.name}: forced on and forced off are mutually exclusive"
            )
        if self.init_on:
            if not (self.p_min - 1e-9 <= self.init_power <= self.p_max + 1e-9):
                raise ValidationError(
                    f"{self.name}: initial output outside [p_min, p_max]"
                )
        elif self.init_power != 0.0:
            raise ValidationError(f"{self.name}: offline unit with nonzero output")


LINE_OUTAGE = "line"
GENERATOR_OUTAGE = "generator"


@dataclass(frozen=True)
class Contingency:
    """A single component outage. ``index`` is the line or generator position."""

    kind: str
    index: int
    id: int
    name: str = ""

    def __post_init__(self):
        if self.kind not in (LINE_OUTAGE, GENERATOR_OUTAGE):
            raise ValidationError(f"unknown contingency kind {self.kind!r}")

    @property
    def is_line(self) -> bool:
        return self.kind == LINE_OUTAGE

    @property
    def is_generator(self) -> bool:
        return self.kind == GENERATOR_OUTAGE


@dataclass(frozen=True)
class RiskLevels:
    """Per-constraint violation budgets for the four chance-constraint families."""

    eps_gen: float = 0.01
    eps_gen_ctg: float = 0.02
    eps_line: float = 0.10
    eps_line_ctg: float = 0.20

    def __post_init__(self):
        for label, eps in self.as_dict().items():
            if not 0 < eps < 0.5:
                raise ValidationError(f"risk level {label}={eps} outside (0, 0.5)")

    def as_dict(self) -> dict[str, float]:
        return {
            "eps_gen": self.eps_gen,
            "eps_gen_ctg": self.eps_gen_ctg,
            "eps_line": self.eps_line,
            "eps_line_ctg": self.eps_line_ctg,
        }


@dataclass(frozen=True)
class FlowMap:
    """Dense |L| x |B| map from balanced bus injections (MW) to line flows (MW)."""

    matrix: np.ndarray
    reference_bus: int
    contingency: Contingency | None = None


@dataclass(frozen=True)
class SccucCase:
    """One immutable problem instance."""

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[GeneratorSpec, ...]
    wind_model: WindModel
    contingencies: tuple[Contingency, ...]
    horizon: int
    risk: RiskLevels = field(default_factory=RiskLevels)
    reserve_cap: float | None = None
    mva_base: float = 100.0
    name: str = "case"

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be at least one hour")
        refs = [b for b in self.buses if b.is_reference]
        if len(refs) != 1:
            raise ValidationError(f"expected exactly one reference bus, got {len(refs)}")
        for b in self.buses:
            if len(b.demand) != self.horizon:
                raise ValidationError(f"bus {b.id}: demand length != horizon")
        for ln in self.lines:
            if not (0 <= ln.from_bus < len(self.buses) and 0 <= ln.to_bus < len(self.buses)):
                raise ValidationError("line endpoint out of range")
        for g in self.generators:
            if not 0 <= g.bus < len(self.buses):
                raise ValidationError(f"{g.name}: bus out of range")
        if self.wind_model.mean.shape[1] != self.horizon:
            raise ValidationError("wind model horizon mismatch")
        farm_of_bus = {}
        for bpos, b in enumerate(self.buses):
            if b.wind_farm is not None:
                if not 0 <= b.wind_farm < self.wind_model.n_farms:
                    raise ValidationError(f"bus {b.id}: wind farm index out of range")
                if b.wind_farm in farm_of_bus.values():
                    raise ValidationError(f"bus {b.id}: wind farm assigned twice")
                farm_of_bus[bpos] = b.wind_farm
        if len(farm_of_bus) != self.wind_model.n_farms:
            raise ValidationError("every wind farm needs exactly one host bus")
        for c in self.contingencies:
            if c.is_line and not 0 <= c.index < len(self.lines):
                raise ValidationError(f"contingency {c.name}: line out of range")
            if c.is_generator and not 0 <= c.index < len(self.generators):
                raise ValidationError(f"contingency {c.name}: generator out of range")
        if self.reserve_cap is not None and self.reserve_cap <= 0:
            raise ValidationError("reserve cap must be positive when given")
        # capacity screening: fleet plus forecast wind should cover the peak
        total = np.zeros(self.horizon)
        for b in self.buses:
            total += np.asarray(b.demand, dtype=float)
        cover = sum(g.p_max for g in self.generators) + self.wind_model.mean.sum(axis=0)
        worst = float(np.max(total - cover)) if self.horizon else 0.0
        if worst > 1e-9:
            warnings.warn(
                f"{self.name}: fleet + forecast wind short of peak demand by "
                f"{worst:.1f} MW",
                CaseWarning,
                stacklevel=2,
            )

    # -- derived index helpers -------------------------------------------------

    @cached_property
    def n_buses(self) -> int:
        return len(self.buses)

    @cached_property
    def n_lines(self) -> int:
        return len(self.lines)

    @cached_property
    def n_gens(self) -> int:
        return len(self.generators)

    @cached_property
    def reference(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.is_reference)

    @cached_property
    def demand(self) -> np.ndarray:
        """(|B|, T) nodal demand in MW."""
        d = np.array([np.asarray(b.demand, dtype=float) for b in self.buses])
        d.flags.writeable = False
        return d

    @cached_property
    def gen_bus(self) -> np.ndarray:
        """Bus position of each generator."""
        a = np.array([g.bus for g in self.generators], dtype=int)
        a.flags.writeable = False
        return a

    @cached_property
    def wind_bus(self) -> np.ndarray:
        """Bus position of each wind farm, aligned with wind model rows."""
        a = np.full(self.wind_model.n_farms, -1, dtype=int)
        for bpos, b in enumerate(self.buses):
            if b.wind_farm is not None:
                a[b.wind_farm] = bpos
        a.flags.writeable = False
        return a

    @cached_property
    def wind_injection(self) -> np.ndarray:
        """(|B|, T) forecast wind injection in MW."""
        inj = np.zeros((self.n_buses, self.horizon))
        inj[self.wind_bus] = self.wind_model.mean
        inj.flags.writeable = False
        return inj

    @cached_property
    def gens_at_reference(self) -> tuple[int, ...]:
        return tuple(i for i, g in enumerate(self.generators) if g.bus == self.reference)

    def total_demand(self, t: int) -> float:
        return float(self.demand[:, t].sum())

    def generator_outages(self) -> tuple[Contingency, ...]:
        return tuple(c for c in self.contingencies if c.is_generator)

    def line_outages(self) -> tuple[Contingency, ...]:
        return tuple(c for c in self.contingencies if c.is_line)


# -- topology ------------------------------------------------------------------


def _connected(n_buses: int, lines, skip: int | None = None) -> bool:
    if n_buses == 0:
        return True
    adj: list[list[int]] = [[] for _ in range(n_buses)]
    for k, ln in enumerate(lines):
        if k == skip:
            continue
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    seen = np.zeros(n_buses, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return bool(seen.all())


def bridge_lines(case: SccucCase) -> tuple[int, ...]:
    """Line positions whose outage would split the network."""
    return tuple(
        k for k in range(case.n_lines)
        if not _connected(case.n_buses, case.lines, skip=k)
    )


def build_admittance(case: SccucCase, contingency: Contingency | None = None) -> np.ndarray:
    """Weighted Laplacian of the (possibly post-outage) network, in MW/rad.

    Generator outages leave the topology unchanged and return the base matrix.
    """
    skip = None
    if contingency is not None and contingency.is_line:
        skip = contingency.index
    n = case.n_buses
    mat = np.zeros((n, n))
    for k, ln in enumerate(case.lines):
        if k == skip:
            continue
        b = ln.susceptance * case.mva_base
        m, o = ln.from_bus, ln.to_bus
        mat[m, m] += b
        mat[o, o] += b
        mat[m, o] -= b
        mat[o, m] -= b
    return mat


class ReducedAdmittance:
    """Cholesky factorization of the admittance matrix with the reference
    row/column removed. Solves angle systems and extracts inverse rows."""

    def __init__(self, case: SccucCase, contingency: Contingency | None = None):
        self.reference = case.reference
        self.n_buses = case.n_buses
        keep = np.arange(case.n_buses) != case.reference
        self.keep = np.flatnonzero(keep)
        reduced = build_admittance(case, contingency)[np.ix_(keep, keep)]
        try:
            self._factor = scipy.linalg.cho_factor(reduced)
        except scipy.linalg.LinAlgError as exc:
            raise SingularAfterReduction(
                "reduced admittance matrix is singular; network is islanded"
            ) from exc

    def solve(self, injection: np.ndarray) -> np.ndarray:
        """Angles (rad) for a full-length injection vector or matrix; the
        reference entry of the input is ignored and the output has angle 0
        there."""
        inj = np.asarray(injection, dtype=float)
        vec = inj.ndim == 1
        if vec:
            inj = inj[:, None]
        theta = np.zeros_like(inj)
        theta[self.keep] = scipy.linalg.cho_solve(self._factor, inj[self.keep])
        return theta[:, 0] if vec else theta

    def inverse_rows(self, buses: np.ndarray) -> np.ndarray:
        """Rows of the reduced inverse, zero-padded at the reference column."""
        rhs = np.zeros((self.n_buses, len(buses)))
        for j, b in enumerate(buses):
            if b != self.reference:
                rhs[b, j] = 1.0
        return self.solve(rhs).T


def build_flowmap(case: SccucCase, contingency: Contingency | None = None) -> FlowMap:
    """Injection-to-flow matrix for the base or post-contingency network.

    Rows cover every line of the base network; an outaged line keeps a zero
    row so indices stay aligned across contingencies.
    """
    skip = None
    if contingency is not None and contingency.is_line:
        skip = contingency.index
        if not _connected(case.n_buses, case.lines, skip=skip):
            raise IslandingError(
                f"outage of line {contingency.name or contingency.index} "
                "disconnects the network"
            )
    elif not _connected(case.n_buses, case.lines):
        raise IslandingError("base network is disconnected")

    solver = ReducedAdmittance(case, contingency)
    theta = solver.solve(np.eye(case.n_buses))  # angles per unit injection
    mat = np.zeros((case.n_lines, case.n_buses))
    for k, ln in enumerate(case.lines):
        if k == skip:
            continue
        b = ln.susceptance * case.mva_base
        mat[k] = b * (theta[ln.from_bus] - theta[ln.to_bus])
    mat[np.abs(mat) < 1e-13] = 0.0
    mat.flags.writeable = False
    return FlowMap(matrix=mat, reference_bus=case.reference, contingency=contingency)


# -- ingestion -------------------------------------------------------------------


def _require(obj: dict, key: str, path, context: str):
    if key not in obj:
        raise ParseError(path, f"{context}: missing required field {key!r}")
    return obj[key]


def _read_json(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ParseError(path, "file not found")
    except json.JSONDecodeError as exc:
        raise ParseError(path, f"invalid JSON: {exc.msg}", line=exc.lineno)


def _read_demand(path: Path, id_of_bus: dict[int, int], n_buses: int, horizon: int) -> np.ndarray:
    demand = np.zeros((n_buses, horizon))
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(path, "file not found")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "hour":
            raise ParseError(path, "first column of header must be 'hour'", line=1)
        try:
            cols = [id_of_bus[int(h)] for h in header[1:]]
        except (KeyError, ValueError):
            raise ParseError(path, "demand columns must be known bus ids", line=1)
        rows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                hour = int(row[0]) - 1
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(path, f"bad number: {exc}", line=lineno)
            if not 0 <= hour < horizon:
                raise ParseError(path, f"hour {hour + 1} outside horizon", line=lineno)
            if len(values) != len(cols):
                raise ParseError(path, "row width != header width", line=lineno)
            demand[cols, hour] = values
            rows += 1
        if rows != horizon:
            raise ParseError(path, f"expected {horizon} demand rows, found {rows}")
    return demand


def _read_wind(path: Path, id_of_bus: dict[int, int], horizon: int):
    """Long-format wind file: farm, bus, hour, mean_mw, stdev_mw."""
    farms: dict[str, int] = {}
    farm_bus: list[int] = []
    rows: list[tuple[int, int, float, float]] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(path, "file not found")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["farm", "bus", "hour", "mean_mw", "stdev_mw"]
        if header is None or [h.strip() for h in header] != expected:
            raise ParseError(path, f"header must be {','.join(expected)}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 5:
                raise ParseError(path, "expected 5 columns", line=lineno)
            name = row[0].strip()
            try:
                bus_id = int(row[1])
                hour = int(row[2]) - 1
                mean = float(row[3])
                stdev = float(row[4])
            except ValueError as exc:
                raise ParseError(path, f"bad number: {exc}", line=lineno)
            if bus_id not in id_of_bus:
                raise ParseError(path, f"unknown bus id {bus_id}", line=lineno)
            if not 0 <= hour < horizon:
                raise ParseError(path, f"hour {hour + 1} outside horizon", line=lineno)
            if name not in farms:
                farms[name] = len(farms)
                farm_bus.append(id_of_bus[bus_id])
            elif farm_bus[farms[name]] != id_of_bus[bus_id]:
                raise ParseError(path, f"farm {name} at two buses", line=lineno)
            rows.append((farms[name], hour, mean, stdev))
    n = len(farms)
    mean = np.full((n, horizon), np.nan)
    stdev = np.full((n, horizon), np.nan)
    for w, hour, mu, sd in rows:
        mean[w, hour] = mu
        stdev[w, hour] = sd
    if n and np.isnan(mean).any():
        raise ParseError(path, "missing (farm, hour) entries")
    if n == 0:
        mean = np.zeros((0, horizon))
        stdev = np.zeros((0, horizon))
    try:
        model = WindModel(mean=mean, stdev=stdev, names=tuple(farms))
    except ValueError as exc:
        raise ParseError(path, str(exc))
    return model, farm_bus


def _parse_generator(raw: dict, id_of_bus: dict[int, int], path) -> GeneratorSpec:
    name = str(_require(raw, "name", path, "generator"))
    ctx = f"generator {name}"
    bus_id = int(_require(raw, "bus", path, ctx))
    if bus_id not in id_of_bus:
        raise ParseError(path, f"{ctx}: unknown bus id {bus_id}")
    blocks = _require(raw, "cost_blocks", path, ctx)
    startup = _require(raw, "startup_blocks", path, ctx)
    try:
        spec = GeneratorSpec(
            name=name,
            bus=id_of_bus[bus_id],
            p_min=float(_require(raw, "p_min", path, ctx)),
            p_max=float(_require(raw, "p_max", path, ctx)),
            cost_blocks=tuple(
                (float(b["cost"]), float(b["width"])) for b in blocks
            ),
            no_load_cost=float(_require(raw, "no_load_cost", path, ctx)),
            reserve_cost=float(_require(raw, "reserve_cost", path, ctx)),
            tertiary_cost=float(_require(raw, "tertiary_cost", path, ctx)),
            startup_blocks=tuple(
                (
                    float(b["cost"]),
                    int(b["min_hours_off"]),
                    None if b.get("max_hours_off") is None else int(b["max_hours_off"]),
                )
                for b in startup
            ),
            min_up=int(_require(raw, "min_up", path, ctx)),
            min_down=int(_require(raw, "min_down", path, ctx)),
            ramp_up=float(_require(raw, "ramp_up", path, ctx)),
            ramp_down=float(_require(raw, "ramp_down", path, ctx)),
            init_up_hours=int(raw.get("init_up_hours", 0)),
            init_down_hours=int(
                raw.get("init_down_hours", 0 if raw.get("init_on") else 1)
            ),
            init_on=bool(raw.get("init_on", False)),
            init_power=float(raw.get("init_power", 0.0)),
            forced_on_hours=int(raw.get("forced_on_hours", 0)),
            forced_off_hours=int(raw.get("forced_off_hours", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(path, f"{ctx}: malformed block entry ({exc})")
    return spec


def _parse_contingencies(path: Path, case_wo_ctg: SccucCase,
                         id_of_bus: dict[int, int]) -> tuple[Contingency, ...]:
    raw = _read_json(path)
    entries = _require(raw, "contingencies", path, "contingency file")
    gen_index = {g.name: i for i, g in enumerate(case_wo_ctg.generators)}
    out: list[Contingency] = []

    def add_line(k: int):
        ln = case_wo_ctg.lines[k]
        name = f"line:{case_wo_ctg.buses[ln.from_bus].id}-{case_wo_ctg.buses[ln.to_bus].id}#{k}"
        out.append(Contingency(kind=LINE_OUTAGE, index=k, id=len(out), name=name))

    def add_gen(i: int):
        out.append(Contingency(
            kind=GENERATOR_OUTAGE, index=i, id=len(out),
            name=f"gen:{case_wo_ctg.generators[i].name}",
        ))

    for entry in entries:
        if entry == "n-1-all":
            bridges = set(bridge_lines(case_wo_ctg))
            skipped = 0
            for k in range(case_wo_ctg.n_lines):
                if k in bridges:
                    skipped += 1
                else:
                    add_line(k)
            for i in range(case_wo_ctg.n_gens):
                add_gen(i)
            if skipped:
                warnings.warn(
                    f"n-1-all skipped {skipped} bridge line(s)",
                    CaseWarning, stacklevel=3,
                )
            continue
        if not isinstance(entry, dict):
            raise ParseError(path, f"unrecognized contingency entry {entry!r}")
        kind = _require(entry, "kind", path, "contingency")
        if kind == "line":
            if "index" in entry:
                k = int(entry["index"])
                if not 0 <= k < case_wo_ctg.n_lines:
                    raise ParseError(path, f"line index {k} out of range")
            else:
                m = id_of_bus.get(int(_require(entry, "from", path, "line contingency")))
                n = id_of_bus.get(int(_require(entry, "to", path, "line contingency")))
                circuit = int(entry.get("circuit", 1))
                seen = 0
                k = -1
                for pos, ln in enumerate(case_wo_ctg.lines):
                    if {ln.from_bus, ln.to_bus} == {m, n}:
                        seen += 1
                        if seen == circuit:
                            k = pos
                            break
                if k < 0:
                    raise ParseError(path, f"no such line in contingency entry {entry}")
            if not _connected(case_wo_ctg.n_buses, case_wo_ctg.lines, skip=k):
                raise IslandingError(
                    f"contingency removes bridge line index {k}"
                )
            add_line(k)
        elif kind == "generator":
            gname = str(_require(entry, "name", path, "generator contingency"))
            if gname not in gen_index:
                raise ParseError(path, f"unknown generator {gname!r} in contingency")
            add_gen(gen_index[gname])
        else:
            raise ParseError(path, f"unknown contingency kind {kind!r}")
    return tuple(out)


def load_case(path) -> SccucCase:
    """Read ``case.json``, ``demand.csv``, ``wind.csv``, ``contingencies.json``
    from a case directory and return a fully validated instance."""
    root = Path(path)
    if not root.is_dir():
        raise ParseError(root, "case path is not a directory")
    raw = _read_json(root / "case.json")
    case_path = root / "case.json"

    horizon = int(_require(raw, "horizon", case_path, "case"))
    mva_base = float(raw.get("mva_base", 100.0))
    name = str(raw.get("name", root.name))

    bus_entries = _require(raw, "buses", case_path, "case")
    ids = [int(_require(b, "id", case_path, "bus")) for b in bus_entries]
    if len(set(ids)) != len(ids):
        raise ParseError(case_path, "duplicate bus ids")
    id_of_bus = {bid: pos for pos, bid in enumerate(ids)}

    demand = _read_demand(root / "demand.csv", id_of_bus, len(ids), horizon)
    wind_model, farm_bus = _read_wind(root / "wind.csv", id_of_bus, horizon)

    gen_entries = _require(raw, "generators", case_path, "case")
    try:
        generators = tuple(_parse_generator(g, id_of_bus, case_path) for g in gen_entries)
    except ValidationError as exc:
        raise ValidationError(f"{case_path}: {exc}")

    reference_id = raw.get("reference_bus")
    if reference_id is not None:
        if int(reference_id) not in id_of_bus:
            raise ParseError(case_path, f"reference bus {reference_id} unknown")
        ref_pos = id_of_bus[int(reference_id)]
    else:
        # default: lowest-id bus hosting a generator
        gen_buses = {g.bus for g in generators}
        if not gen_buses:
            raise ParseError(case_path, "no generators; cannot pick a reference bus")
        ref_pos = min(gen_buses, key=lambda pos: ids[pos])

    wind_of_bus = {bpos: w for w, bpos in enumerate(farm_bus)}
    if len(wind_of_bus) != len(farm_bus):
        raise ParseError(root / "wind.csv", "two farms mapped to one bus")
    buses = tuple(
        Bus(
            id=ids[pos],
            demand=demand[pos].copy(),
            is_reference=(pos == ref_pos),
            wind_farm=wind_of_bus.get(pos),
        )
        for pos in range(len(ids))
    )

    try:
        lines = tuple(
            Line(
                from_bus=id_of_bus[int(_require(ln, "from", case_path, "line"))],
                to_bus=id_of_bus[int(_require(ln, "to", case_path, "line"))],
                susceptance=float(_require(ln, "susceptance", case_path, "line")),
                capacity=float(_require(ln, "capacity", case_path, "line")),
            )
            for ln in _require(raw, "lines", case_path, "case")
        )
    except KeyError as exc:
        raise ParseError(case_path, f"line references unknown bus ({exc})")

    risk_raw = raw.get("risk", {})
    risk = RiskLevels(
        eps_gen=float(risk_raw.get("eps_gen", 0.01)),
        eps_gen_ctg=float(risk_raw.get("eps_gen_ctg", 0.02)),
        eps_line=float(risk_raw.get("eps_line", 0.10)),
        eps_line_ctg=float(risk_raw.get("eps_line_ctg", 0.20)),
    )
    reserve_cap = raw.get("reserve_cap")

    partial = SccucCase(
        buses=buses,
        lines=lines,
        generators=generators,
        wind_model=wind_model,
        contingencies=(),
        horizon=horizon,
        risk=risk,
        reserve_cap=None if reserve_cap is None else float(reserve_cap),
        mva_base=mva_base,
        name=name,
    )
    if not _connected(partial.n_buses, partial.lines):
        raise IslandingError("base network is disconnected")
    contingencies = _parse_contingencies(root / "contingencies.json", partial, id_of_bus)
    return replace_contingencies(partial, contingencies)


def replace_contingencies(case: SccucCase, contingencies: tuple[Contingency, ...]) -> SccucCase:
    """Copy of the case with a different contingency list (revalidated)."""
    import dataclasses

    return dataclasses.replace(case, contingencies=contingencies)


def scale_case(case: SccucCase, load_scale: float = 1.0, wind_energy_fraction: float | None = None,
               sigma_over_mean: float | None = None, line_cap_scale: float = 1.0) -> SccucCase:
    """Scaled copy of a case for sweep experiments.

    load_scale multiplies every nodal demand. wind_energy_fraction rescales
    the wind model so forecast wind energy equals that fraction of (scaled)
    load energy, keeping each farm's sigma/mean ratio. sigma_over_mean, when
    given, then resets every sigma_b(t) to that multiple of the farm mean.
    line_cap_scale derates every line capacity.
    """
    import dataclasses

    if load_scale <= 0 or line_cap_scale <= 0:
        raise ValidationError("scale factors must be positive")
    buses = tuple(
        dataclasses.replace(b, demand=np.asarray(b.demand, dtype=float) * load_scale)
        for b in case.buses
    )
    lines = tuple(
        dataclasses.replace(ln, capacity=ln.capacity * line_cap_scale) for ln in case.lines
    )
    wind = case.wind_model
    if wind_energy_fraction is not None:
        if wind_energy_fraction <= 0:
            raise ValidationError("wind energy fraction must be positive")
        load_energy = sum(float(np.sum(b.demand)) for b in buses)
        wind_energy = float(wind.mean.sum())
        if wind_energy <= 0:
            raise ValidationError("cannot rescale an all-zero wind forecast")
        factor = wind_energy_fraction * load_energy / wind_energy
        wind = WindModel(mean=wind.mean * factor, stdev=wind.stdev * factor, names=wind.names)
    if sigma_over_mean is not None:
        if sigma_over_mean < 0:
            raise ValidationError("sigma multiplier must be nonnegative")
        wind = WindModel(
            mean=wind.mean, stdev=np.abs(wind.mean) * sigma_over_mean, names=wind.names
        )
    return dataclasses.replace(case, buses=buses, lines=lines, wind_model=wind)


def save_case(case: SccucCase, path) -> Path:
    """Write ``case`` as a case directory that :func:`load_case` reads back.

    Produces case.json, demand.csv, wind.csv and contingencies.json under
    ``path`` (created if missing). Round-tripping preserves everything except
    auto-derived contingency display names.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    def gen_entry(g: GeneratorSpec) -> dict:
        entry = {
            "name": g.name,
            "bus": case.buses[g.bus].id,
            "p_min": g.p_min,
            "p_max": g.p_max,
            "cost_blocks": [{"cost": c, "width": w} for c, w in g.cost_blocks],
            "no_load_cost": g.no_load_cost,
            "reserve_cost": g.reserve_cost,
            "tertiary_cost": g.tertiary_cost,
            "startup_blocks": [
                {"cost": c, "min_hours_off": lo, "max_hours_off": hi}
                for c, lo, hi in g.startup_blocks
            ],
            "min_up": g.min_up,
            "min_down": g.min_down,
            "ramp_up": g.ramp_up,
            "ramp_down": g.ramp_down,
        }
        if g.init_on:
            entry["init_on"] = True
            entry["init_up_hours"] = g.init_up_hours
            entry["init_power"] = g.init_power
        else:
            entry["init_down_hours"] = g.init_down_hours
        if g.forced_on_hours:
            entry["forced_on_hours"] = g.forced_on_hours
        if g.forced_off_hours:
            entry["forced_off_hours"] = g.forced_off_hours
        return entry

    ref = next(b.id for b in case.buses if b.is_reference)
    doc = {
        "name": case.name,
        "horizon": case.horizon,
        "mva_base": case.mva_base,
        "reference_bus": ref,
        "risk": case.risk.as_dict(),
        "buses": [{"id": b.id} for b in case.buses],
        "lines": [
            {
                "from": case.buses[ln.from_bus].id,
                "to": case.buses[ln.to_bus].id,
                "susceptance": ln.susceptance,
                "capacity": ln.capacity,
            }
            for ln in case.lines
        ],
        "generators": [gen_entry(g) for g in case.generators],
    }
    if case.reserve_cap is not None:
        doc["reserve_cap"] = case.reserve_cap
    (root / "case.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")

    with open(root / "demand.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour"] + [str(b.id) for b in case.buses])
        for t in range(case.horizon):
            writer.writerow([t + 1] + [repr(float(b.demand[t])) for b in case.buses])

    wind = case.wind_model
    farm_bus_id = {w: b.id for w, b in ((b.wind_farm, b) for b in case.buses) if w is not None}
    with open(root / "wind.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["farm", "bus", "hour", "mean_mw", "stdev_mw"])
        for w in range(wind.n_farms):
            for t in range(case.horizon):
                writer.writerow([
                    wind.names[w], farm_bus_id[w], t + 1,
                    repr(float(wind.mean[w, t])), repr(float(wind.stdev[w, t])),
                ])

    entries: list[dict] = []
    for ctg in case.contingencies:
        if ctg.is_line:
            entries.append({"kind": LINE_OUTAGE, "index": ctg.index})
        else:
            entries.append({"kind": GENERATOR_OUTAGE,
                            "name": case.generators[ctg.index].name})
    (root / "contingencies.json").write_text(
        json.dumps({"contingencies": entries}, indent=1) + "\n", encoding="utf-8")
    return root
