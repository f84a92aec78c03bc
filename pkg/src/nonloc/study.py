"""Manufactured problems, refinement schedules and convergence tables."""
import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .analysis import cg_solve, error_energy, error_energy_interp, error_l2, error_max_nodes
from .assembly import ProblemSpec, assemble_cdg_1d, assemble_cdg_2d
from .geometry import as_policy
from .kernels import make_kernel
from .mesh import build_consistent_mesh, build_grid_1d


# ---------------------------------------------------------------------------
# problem catalog

def _u51(x1, x2):
    return x1 * x1 * x2 + x2 * x2


def _f51(x1, x2, delta):
    return -2.0 * (x2 + 1.0) + 0.0 * x1


def _f52(x1, x2, delta):
    return -2.0 * (x2 + 1.0) + delta * delta * np.exp(x1 * x1 + 3.0 * x2 * x2)


def _g51(x1, x2, delta):
    return _u51(x1, x2)


def _g52a(x1, x2, delta):
    return _u51(x1, x2) + delta ** 2 * np.sin(x1 - 2.0 * x2)


def _g52b(x1, x2, delta):
    return _u51(x1, x2) + delta ** 3 * np.sin(x1 - 2.0 * x2)


def _u53(x):
    return x * x * x


def _f53(x, delta):
    return -6.0 * x + delta * delta * np.exp(x)


def _g53a(x, delta):
    return x ** 3 + delta ** 2 * np.sin(x)


def _g53b(x, delta):
    return x ** 3 + delta ** 3 * np.sin(x)


def _g53(x, delta):
    return x ** 3 + 0.0 * delta


def _f53_exact(x, delta):
    return -6.0 * x


_CATALOG = {
    "ex51": (2, _f51, _g51, _u51, None),
    "ex52a": (2, _f52, _g52a, _u51, 0),
    "ex52b": (2, _f52, _g52b, _u51, 1),
    "ex53a": (1, _f53, _g53a, _u53, 0),
    "ex53b": (1, _f53, _g53b, _u53, 1),
    # exact data in 1D, the reference discretization error
    "ex53": (1, _f53_exact, _g53, _u53, None),
}

_SPECS = {}


def problem_catalog(pid):
    """Manufactured problem by id: ex51, ex52a, ex52b, ex53a, ex53b (and ex53,
    the 1D problem with exact data)."""
    key = str(pid).lower()
    if key not in _CATALOG:
        raise ValueError(f"unknown problem {pid!r}; known: {', '.join(_CATALOG)}")
    if key not in _SPECS:
        d, f, g, u, mu = _CATALOG[key]
        _SPECS[key] = ProblemSpec(key, d, f, g, u, mu)
    return _SPECS[key]


# ---------------------------------------------------------------------------
# schedules

MESH_SIZES = ("diameter", "spacing")

class Mode(Enum):
    FIXED_DELTA = "fixed-delta"
    FIXED_RATIO = "fixed-ratio"
    POWER_LAW = "power-law"


def as_mode(value):
    if isinstance(value, Mode):
        return value
    key = str(value).lower().replace("_", "-")
    for mode in Mode:
        if key in (mode.value, mode.name.lower(), mode.value.replace("-", "")):
            return mode
    raise ValueError(f"unknown schedule mode {value!r}")


@dataclass
class Schedule:
    """Refinement ladder.

    fixed-delta: delta = delta0, h = delta / 2^k.
    fixed-ratio: delta = delta0 / 2^k, h = delta / m.
    power-law: delta = delta0 (2/3)^k, h = c delta^beta; c defaults to
    delta0^(1 - beta) / m so the first level has delta / h = m.

    In 2D, h is the grid spacing by default (mesh_size="spacing", the legs of
    the right triangles); mesh_size="diameter" reads h as the element
    diameter, giving spacing h / sqrt(2). The spacing is rounded to 1 / ceil(1 / spacing) and
    the table reports the h actually used. structured=False perturbs interior
    vertices (seed + level). In 1D both conventions coincide.
    """
    mode: Mode
    delta0: float
    levels: int
    m: float = 2.0
    beta: float = 1.0
    c: float = None
    policy: str = "exactcaps"
    kernel: str = "constant"
    problem: str = "ex51"
    outer_degree: int = 5
    inner_degree: int = 5
    structured: bool = False
    seed: int = 0
    perturb: float = 0.2
    time_budget: float = None  # seconds; stop adding levels once exceeded
    mesh_size: str = "spacing"

    def __post_init__(self):
        self.mode = as_mode(self.mode)
        self.policy = as_policy(self.policy).value
        if self.mesh_size not in MESH_SIZES:
            raise ValueError(f"mesh_size must be one of {MESH_SIZES}")
        if self.levels < 2:
            raise ValueError("a schedule needs at least two levels")
        if self.delta0 <= 0:
            raise ValueError("delta0 must be positive")
        if self.mode is not Mode.FIXED_DELTA and self.m < 1:
            raise ValueError("m must be at least 1")

    def parameters(self):
        """(delta, h) per level before mesh rounding."""
        out = []
        for k in range(self.levels):
            if self.mode is Mode.FIXED_DELTA:
                delta = self.delta0
                h = delta / 2 ** k
            elif self.mode is Mode.FIXED_RATIO:
                delta = self.delta0 / 2 ** k
                h = delta / self.m
            else:
                c = self.c if self.c is not None else self.delta0 ** (1 - self.beta) / self.m
                delta = self.delta0 * (2.0 / 3.0) ** k
                h = c * delta ** self.beta
            if h > delta * (1 + 1e-12):
                raise ValueError(f"level {k}: h={h:.4g} exceeds delta={delta:.4g}")
            out.append((delta, h))
        return out

    @property
    def driver(self):
        """Name of the parameter rates are measured against."""
        return "h" if self.mode is Mode.FIXED_DELTA else "delta"


@dataclass
class LevelResult:
    level: int
    delta: float
    h: float
    dofs: int
    energy: float
    l2: float
    max_err: float
    seconds: float
    iterations: int = 0
    energy_h: float = float("nan")  # ||I_h u_ref - u_h||, see error_energy_interp

    @property
    def n_delta(self):
        return self.delta / self.h


@dataclass
class ConvergenceTable:
    schedule: Schedule
    rows: list = field(default_factory=list)

    def params(self):
        key = self.schedule.driver if self.schedule is not None else "h"
        return [getattr(r, key) for r in self.rows]

    def rates(self, norm="energy"):
        """Rates between adjacent levels; the first entry is None."""
        errors = [getattr(r, norm) for r in self.rows]
        if len(errors) < 2:
            return [None] * len(errors)
        return [None] + compute_rates(errors, self.params())

    def slope(self, norm="energy"):
        """Least-squares slope of log error against log driving parameter."""
        p = np.log(self.params())
        e = np.log([getattr(r, norm) for r in self.rows])
        return float(np.polyfit(p, e, 1)[0])


def compute_rates(errors, params):
    """rate_k = log(e_{k-1} / e_k) / log(p_{k-1} / p_k) for k >= 1."""
    if len(errors) != len(params) or len(errors) < 2:
        raise ValueError("errors and params need equal lengths of at least 2")
    e = np.asarray(errors, dtype=float)
    p = np.asarray(params, dtype=float)
    if np.any(e <= 0) or np.any(p <= 0):
        raise ValueError("errors and parameters must be positive")
    return [float(v) for v in np.log(e[:-1] / e[1:]) / np.log(p[:-1] / p[1:])]


def solve_level(problem, kernel_family, delta, h, policy="exactcaps", outer_degree=5,
                inner_degree=5, structured=False, seed=0, perturb=0.2, mesh_size="spacing"):
    """Build, assemble, solve and measure one level. Returns (LevelResult, u).

    h is the element diameter or the grid spacing, see Schedule.
    """
    t0 = time.perf_counter()
    spec = problem_catalog(problem) if isinstance(problem, str) else problem
    kernel = make_kernel(kernel_family, spec.dimension, delta)
    if spec.dimension == 1:
        grid = build_grid_1d(h, delta, perturb=perturb, seed=seed)
        system, load = assemble_cdg_1d(grid, kernel, spec, outer_degree)
        mesh, h_actual = grid, grid.h
    else:
        factor = math.sqrt(2.0) if mesh_size == "diameter" else 1.0
        mesh = build_consistent_mesh(h / factor, delta, structured=structured, seed=seed)
        system, load = assemble_cdg_2d(mesh, kernel, policy, spec, outer_degree, inner_degree)
        h_actual = mesh.h * factor
    report = cg_solve(system.matrix, load.values)
    u = system.expand(report.x, load.collar_values)
    energy = error_energy(u, spec, mesh, kernel, policy, outer_degree, inner_degree)
    energy_h = error_energy_interp(u, spec, mesh, kernel, policy, outer_degree, inner_degree)
    l2 = error_l2(u, spec.u_ref, mesh)
    emax = error_max_nodes(u, spec.u_ref, mesh)
    seconds = time.perf_counter() - t0
    return LevelResult(0, delta, h_actual, len(report.x), energy, l2, emax, seconds,
                       report.iterations, energy_h), u


def run_schedule(schedule, progress=None, cache=None):
    """Run every level of a schedule; progress(level_result) is called per level.

    cache, a dict, lets several schedules in one process share levels with
    identical inputs.
    """
    table = ConvergenceTable(schedule)
    spent = 0.0
    for k, (delta, h) in enumerate(schedule.parameters()):
        if schedule.time_budget is not None and spent > schedule.time_budget and k >= 2:
            break
        args = (schedule.problem, schedule.kernel, delta, h, schedule.policy,
                schedule.outer_degree, schedule.inner_degree, schedule.structured,
                schedule.seed + k, schedule.perturb, schedule.mesh_size)
        key = tuple(round(a, 12) if isinstance(a, float) else a for a in args)
        if cache is not None and key in cache:
            row = replace(cache[key])
        else:
            try:
                row, _ = solve_level(*args)
            except Exception as exc:
                raise RuntimeError(f"level {k} (delta={delta:.6g}, h={h:.6g}): {exc}") from exc
            if cache is not None:
                cache[key] = replace(row)
        row.level = k
        spent += row.seconds
        table.rows.append(row)
        if progress is not None:
            progress(row)
    return table


def fixed_h_view(tables):
    """Rows sharing the same mesh size across several fixed-ratio tables.

    Returns {h: [(delta, energy, l2), ...]} sorted by delta; use it to measure
    the error against delta at fixed h.
    """
    view = {}
    for table in tables:
        for r in table.rows:
            key = round(r.h, 12)
            view.setdefault(key, []).append((r.delta, r.energy, r.l2))
    return {h: sorted(v) for h, v in view.items()}


# ---------------------------------------------------------------------------
# reports

CSV_COLUMNS = ["level", "delta", "h", "energy_err", "energy_rate", "l2_err", "l2_rate",
               "max_err", "seconds"]
EXTRA_COLUMNS = ["energy_h_err", "energy_h_rate"]


def _num(x):
    return "--" if x is None else f"{x:.15g}"


def render_report(table, fmt="csv", extended=False):
    """CSV (fixed columns) or Markdown rendering of a convergence table.

    extended=True appends the interpolant energy measure and its rate.
    """
    if not table.rows:
        raise ValueError("empty table")
    er = table.rates("energy")
    lr = table.rates("l2")
    hr = table.rates("energy_h") if extended else None
    fmt = fmt.lower()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS + (EXTRA_COLUMNS if extended else []))
        for k, (r, a, b) in enumerate(zip(table.rows, er, lr)):
            row = [r.level, _num(r.delta), _num(r.h), _num(r.energy), _num(a),
                   _num(r.l2), _num(b), _num(r.max_err), f"{r.seconds:.3f}"]
            if extended:
                row += [_num(r.energy_h), _num(hr[k])]
            w.writerow(row)
        return buf.getvalue()
    if fmt in ("md", "markdown"):
        s = table.schedule
        head = "delta/h" if s is None or s.mode is Mode.FIXED_DELTA else "delta0/delta"
        extra = " energy_h | rate |" if extended else ""
        lines = [f"| {head} | delta | h | energy | rate | L2 | rate | max |" + extra,
                 "|---|---|---|---|---|---|---|---|" + ("---|---|" if extended else "")]
        for k, (r, a, b) in enumerate(zip(table.rows, er, lr)):
            lab = f"{r.delta / r.h:.3g}" if head == "delta/h" else f"{s.delta0 / r.delta:.3g}"
            line = (f"| {lab} | {r.delta:.4g} | {r.h:.4g} | {r.energy:.2e} | {fmt_rate(a)} | "
                    f"{r.l2:.2e} | {fmt_rate(b)} | {r.max_err:.2e} |")
            if extended:
                line += f" {r.energy_h:.2e} | {fmt_rate(hr[k])} |"
            lines.append(line)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def parse_csv(text):
    """Rows of a CSV report as dicts of floats (None for "--")."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for k, v in rec.items():
            if k == "level":
                row[k] = int(v)
            else:
                row[k] = None if v == "--" else float(v)
        rows.append(row)
    return rows


def table_from_rows(rows, schedule=None):
    """Rebuild a ConvergenceTable from parsed CSV rows."""
    table = ConvergenceTable(schedule)
    for r in rows:
        table.rows.append(LevelResult(r["level"], r["delta"], r["h"], 0, r["energy_err"],
                                      r["l2_err"], r["max_err"], r["seconds"], 0,
                                      r.get("energy_h_err") or float("nan")))
    return table


def regression_slope(x, y):
    """Slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def fmt_rate(v):
    return "--" if v is None or not math.isfinite(v) else f"{v:.2f}"
