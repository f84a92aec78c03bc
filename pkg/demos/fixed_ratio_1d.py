"""One-dimensional study on perturbed grids with delta / h = 3.

Compares the two collar data (perturbation orders mu = 0 and mu = 1) with the
exact-data problem; the energy rate of the mu = 1 case settles at 1.
"""
from nonloc.study import Schedule, render_report, run_schedule

for problem in ("ex53a", "ex53b", "ex53"):
    table = run_schedule(Schedule("fixed-ratio", 0.3, 8, m=3, problem=problem, seed=0))
    print(f"\n{problem}")
    print(render_report(table, "md", extended=True))
