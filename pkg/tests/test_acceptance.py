"""Acceptance runs: convergence studies and the property suite.

Every criterion prints one PASS/FAIL line (plus indented detail lines) and
fails its test when any of its checks fails. Runs are shared between criteria
through an in-process cache. Run directly to select criteria:

    python3 tests/test_acceptance.py 1 2 8

Energy errors are reported in two measures. "energy" is error_energy, the
double integral of the true error u_ref - u_h; it decides every check.
"energy_h" is error_energy_interp, the same norm of I_h u_ref - u_h, which the
reference values appear to tabulate (see the decisions ledger); its lines are
marked "info" and never decide a criterion.
"""
import math
import sys
import time

import numpy as np
import pytest

from nonloc.checks import run_all
from nonloc.study import Schedule, run_schedule

CACHE = {}
TABLES = {}

# reference errors, finest levels last
REF_FIXED_DELTA = {
    "exactcaps": {"energy": [6.38e-2, 1.01e-2, 2.83e-3, 6.49e-4, 1.58e-4],
                  "l2": [1.58e-2, 6.11e-3, 1.46e-3, 3.70e-4, 9.14e-5]},
    "nocaps": {"energy": [1.22e-1, 2.51e-2, 6.67e-3, 1.58e-3, 3.95e-4],
               "l2": [1.40e-2, 2.08e-3, 4.65e-4, 1.27e-4, 3.17e-5]},
}
REF_FIXED_RATIO = {
    2: [1.01e-2, 5.12e-3, 2.43e-3, 1.16e-3, 5.73e-4, 2.84e-4],
    3: [6.89e-3, 3.60e-3, 1.72e-3, 8.14e-4, 4.02e-4, 1.98e-4],
}
REF_1D = {
    "ex53a": [2.06e-1, 6.62e-2, 2.25e-2, 7.72e-3, 2.69e-3, 9.54e-4, 3.41e-4, 1.25e-4],
    "ex53b": [9.79e-2, 1.90e-2, 3.98e-3, 1.01e-3, 3.46e-4, 1.55e-4, 7.95e-5, 3.97e-5],
}

# fixed-h view uses the level-4 rows (h = 0.0125) of the fixed-ratio ladders;
# the finest rows (h = 0.00625) at m = 4, 5 cost about 25 minutes more
FIXED_H_LEVEL = 4


class Report:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.lines = []
        self.seconds = 0.0

    def check(self, label, passed, detail=""):
        self.lines.append((label, bool(passed), detail))
        return passed

    def info(self, label, detail):
        self.lines.append((label, None, detail))

    def measure(self, norm, label, passed, detail):
        """A check on the given error measure; energy_h only informs."""
        if norm == "energy_h":
            self.info(label, f"{detail} [{'inside' if passed else 'outside'} target]")
        else:
            self.check(label, passed, detail)

    @property
    def passed(self):
        return all(p for _, p, _ in self.lines if p is not None)

    def text(self):
        head = f"{'PASS' if self.passed else 'FAIL'} [{self.number}] {self.title}"
        head += f" (compute {self.seconds:.0f}s)"
        tag = {True: "ok  ", False: "BAD ", None: "info"}
        body = [f"    {tag[p]} {label}: {detail}" for label, p, detail in self.lines]
        return "\n".join([head] + body)


def schedule_table(**kw):
    key = tuple(sorted(kw.items()))
    if key not in TABLES:
        TABLES[key] = run_schedule(Schedule(**kw), cache=CACHE)
    return TABLES[key]


def compute_seconds(*tables):
    return sum(r.seconds for t in tables for r in t.rows)


def fmt(v):
    return "--" if v is None else f"{v:.3f}"


def within(v, target, tol):
    return v is not None and abs(v - target) <= tol


# ---------------------------------------------------------------------------
# criteria

def fixed_delta(policy):
    return schedule_table(mode="fixed-delta", delta0=0.4, levels=5, policy=policy,
                          problem="ex51")


def criterion_1():
    rep = Report(1, "fixed delta = 0.4, exactcaps: second order at the finest pair")
    t = fixed_delta("exactcaps")
    for norm in ("energy", "energy_h", "l2"):
        r = t.rates(norm)[-1]
        rep.measure(norm, f"{norm} rate", within(r, 2.0, 0.2), f"{fmt(r)} (target 2.0 +- 0.2)")
    total = compute_seconds(t, fixed_delta("nocaps"))
    rep.check("runtime both policies", total <= 15 * 60, f"{total:.0f}s (budget 900s)")
    rep.seconds = compute_seconds(t)
    return rep


def criterion_2():
    rep = Report(2, "fixed delta = 0.4, nocaps: second order, errors above exactcaps")
    t = fixed_delta("nocaps")
    e = fixed_delta("exactcaps")
    for norm in ("energy", "energy_h"):
        r = t.rates(norm)[-1]
        rep.measure(norm, f"{norm} rate", within(r, 2.0, 0.2), f"{fmt(r)} (target 2.0 +- 0.2)")
        above = [getattr(a, norm) > getattr(b, norm) for a, b in zip(t.rows, e.rows)]
        ratios = ", ".join(f"{getattr(a, norm) / getattr(b, norm):.2f}"
                           for a, b in zip(t.rows, e.rows))
        rep.measure(norm, f"{norm} nocaps > exactcaps", all(above), f"ratios {ratios}")
    rep.seconds = compute_seconds(t)
    return rep


def fixed_ratio(m, policy="exactcaps", problem="ex51", levels=6):
    return schedule_table(mode="fixed-ratio", delta0=0.2 * m, m=m, levels=levels,
                          policy=policy, problem=problem)


def criterion_3():
    rep = Report(3, "fixed ratio m = 2, 3, exactcaps: first order in delta")
    tables = [fixed_ratio(m) for m in (2, 3)]
    for m, t in zip((2, 3), tables):
        for norm in ("energy", "energy_h"):
            r = t.rates(norm)[-1]
            rep.measure(norm, f"m={m} {norm} rate", within(r, 1.0, 0.15),
                      f"{fmt(r)} (target 1.0 +- 0.15); all {[fmt(v) for v in t.rates(norm)[1:]]}")
    total = compute_seconds(*tables)
    rep.check("runtime", total <= 10 * 60, f"{total:.0f}s (budget 600s)")
    rep.seconds = total
    return rep


def fixed_h_row(policy):
    """(delta, energy, energy_h) at h = 0.2 / 2^FIXED_H_LEVEL for m = 2..5."""
    out = []
    for m in (2, 3, 4, 5):
        t = fixed_ratio(m, policy, levels=FIXED_H_LEVEL + 1)
        r = t.rows[FIXED_H_LEVEL]
        out.append((r.delta, r.energy, r.energy_h, r.h))
    return out


def criterion_4():
    rep = Report(4, "fixed h view: energy error against delta")
    targets = {"exactcaps": (-1.0, 0.2), "nocaps": (-3.0, 0.4)}
    secs = 0.0
    for policy, (target, tol) in targets.items():
        row = fixed_h_row(policy)
        d = np.array([r[0] for r in row])
        for k, name in ((1, "energy"), (2, "energy_h")):
            e = np.array([r[k] for r in row])
            slope = float(np.polyfit(np.log(d), np.log(e), 1)[0])
            pairs = np.log(e[1:] / e[:-1]) / np.log(d[1:] / d[:-1])
            rep.measure(name, f"{policy} {name} slope at h={row[0][3]:.4g}",
                        within(slope, target, tol),
                      f"{slope:.3f} (target {target} +- {tol}); pairwise "
                      f"{[f'{p:.2f}' for p in pairs]}")
        secs += sum(fixed_ratio(m, policy, levels=FIXED_H_LEVEL + 1).rows[FIXED_H_LEVEL].seconds
                    for m in (2, 3, 4, 5))
    rep.seconds = secs
    return rep


def criterion_5():
    rep = Report(5, "fixed ratio m = 2, nocaps: energy grows like 1/delta, L2 plateaus")
    t = fixed_ratio(2, "nocaps")
    for norm in ("energy", "energy_h"):
        r = t.rates(norm)[-1]
        rep.measure(norm, f"{norm} rate", within(r, -1.0, 0.2),
                  f"{fmt(r)} (target -1.0 +- 0.2); all {[fmt(v) for v in t.rates(norm)[1:]]}")
    r = t.rates("l2")[-1]
    rep.check("l2 |rate|", r is not None and abs(r) <= 0.4,
              f"{fmt(r)} (bound 0.4); all {[fmt(v) for v in t.rates('l2')[1:]]}")
    rep.seconds = compute_seconds(t)
    return rep


# The slopes are asymptotic: the nocaps defect term h^2 / delta^3 only dominates
# h^2 / delta for delta below about 0.05, so the ladder starts at delta0 = 0.06.
# c = delta0^(1 - beta) / m; a smaller m keeps the beta = 2 ladder affordable.
POWER_DELTA0 = 0.06
POWER_RATIO = {1.5: 2.0, 2.0: 1.25}
POWER_LEVELS = 4


def power_law(beta, policy):
    return schedule_table(mode="power-law", delta0=POWER_DELTA0, m=POWER_RATIO[beta], beta=beta,
                          levels=POWER_LEVELS, policy=policy, problem="ex51")


def criterion_6():
    rep = Report(6, "power law h = c delta^beta: regression slopes")
    tables = []
    for beta in (1.5, 2.0):
        targets = {("exactcaps", "energy"): 2 * beta - 1, ("exactcaps", "energy_h"): 2 * beta - 1,
                   ("exactcaps", "l2"): 2 * beta, ("nocaps", "energy"): 2 * beta - 3,
                   ("nocaps", "energy_h"): 2 * beta - 3, ("nocaps", "l2"): 2 * beta - 2}
        for (policy, norm), target in targets.items():
            t = power_law(beta, policy)
            if t not in tables:
                tables.append(t)
            s = t.slope(norm)
            rep.measure(norm, f"beta={beta} {policy} {norm} slope ({len(t.rows)} levels)",
                      within(s, target, 0.3), f"{s:.3f} (target {target} +- 0.3)")
    total = compute_seconds(*tables)
    rep.check("runtime", total <= 20 * 60, f"{total:.0f}s (budget 1200s)")
    rep.seconds = total
    return rep


def criterion_7():
    rep = Report(7, "perturbed data, m = 2: exactcaps L2 and nocaps energy rates")
    secs = 0.0
    for pid in ("ex52a", "ex52b"):
        e = fixed_ratio(2, "exactcaps", pid)
        n = fixed_ratio(2, "nocaps", pid)
        r = e.rates("l2")[-1]
        rep.check(f"{pid} exactcaps l2 rate", within(r, 2.0, 0.25),
                  f"{fmt(r)} (target 2.0 +- 0.25); all {[fmt(v) for v in e.rates('l2')[1:]]}")
        for norm in ("energy", "energy_h"):
            r = n.rates(norm)[-1]
            rep.measure(norm, f"{pid} nocaps {norm} rate", within(r, -1.0, 0.25),
                      f"{fmt(r)} (target -1.0 +- 0.25); all "
                      f"{[fmt(v) for v in n.rates(norm)[1:]]}")
        secs += compute_seconds(e, n)
    rep.seconds = secs
    return rep


def one_d(problem, levels=13):
    return schedule_table(mode="fixed-ratio", delta0=0.3, m=3, levels=levels, problem=problem,
                          seed=0)


def criterion_8():
    rep = Report(8, "1D perturbed grids, m = 3: rate histories")
    a, b = one_d("ex53a"), one_d("ex53b")
    for norm in ("energy", "energy_h"):
        rb = b.rates(norm)
        rep.measure(norm, f"ex53b {norm} rate at level 2^7", within(rb[7], 1.0, 0.15),
                  f"{fmt(rb[7])} (target 1.0 +- 0.15); all {[fmt(v) for v in rb[1:]]}")
        ra = a.rates(norm)
        mid = ra[2:6]
        rep.measure(norm, f"ex53a {norm} rates at levels 2^2..2^5",
                    all(within(v, 1.5, 0.15) for v in mid),
                  f"{[fmt(v) for v in mid]} (target 1.5 +- 0.15)")
        tail = ra[5:]
        rep.measure(norm, f"ex53a {norm} rates trend down after 2^5", tail[-1] < tail[0],
                  f"{[fmt(v) for v in tail]}")
    total = compute_seconds(a, b)
    rep.check("runtime", total <= 5 * 60, f"{total:.0f}s (budget 300s)")
    rep.seconds = total
    return rep


def criterion_9():
    rep = Report(9, "property suite")
    t0 = time.perf_counter()
    for r in run_all():
        rep.check(r.name, r.passed, r.detail)
    rep.seconds = time.perf_counter() - t0
    rep.check("runtime", rep.seconds <= 5 * 60, f"{rep.seconds:.0f}s (budget 300s)")
    return rep


def magnitudes():
    """Reference magnitudes within a factor 3."""
    rep = Report("M", "error magnitudes within a factor 3 of the reference values")

    def compare(norm, label, ours, ref):
        ratio = [o / r for o, r in zip(ours, ref)]
        ok = all(1 / 3 <= q <= 3 for q in ratio)
        rep.measure(norm, label, ok, "ratios " + ", ".join(f"{q:.2f}" for q in ratio))

    for policy, ref in REF_FIXED_DELTA.items():
        t = fixed_delta(policy)
        for norm in ("energy", "energy_h"):
            compare(norm, f"fixed delta {policy} {norm}", [getattr(r, norm) for r in t.rows],
                    ref["energy"])
        compare("l2", f"fixed delta {policy} l2", [r.l2 for r in t.rows], ref["l2"])
    for m, ref in REF_FIXED_RATIO.items():
        t = fixed_ratio(m)
        for norm in ("energy", "energy_h"):
            compare(norm, f"fixed ratio m={m} {norm}", [getattr(r, norm) for r in t.rows], ref)
    for pid, ref in REF_1D.items():
        t = one_d(pid)
        for norm in ("energy", "energy_h"):
            compare(norm, f"1D {pid} {norm}", [getattr(r, norm) for r in t.rows[:8]], ref)
    return rep


CRITERIA = {str(k): globals()[f"criterion_{k}"] for k in range(1, 10)}
CRITERIA["M"] = magnitudes


SUMMARY = []  # shown by the terminal summary hook in conftest.py


@pytest.mark.parametrize("key", list(CRITERIA))
def test_acceptance(key):
    rep = CRITERIA[key]()
    print("\n" + rep.text())
    SUMMARY.append(rep.text())
    assert rep.passed, rep.text()


if __name__ == "__main__":
    keys = sys.argv[1:] or list(CRITERIA)
    failed = 0
    for key in keys:
        rep = CRITERIA[key]()
        print(rep.text(), flush=True)
        failed += not rep.passed
    sys.exit(1 if failed else 0)
