"""Fixed horizon delta = 0.4, mesh refined: both neighborhood policies.

Prints a Markdown convergence table per policy. Three levels take well
under a minute; pass a level count as the first argument for more.
"""
import sys

from nonloc.study import Schedule, render_report, run_schedule

levels = int(sys.argv[1]) if len(sys.argv) > 1 else 3
for policy in ("exactcaps", "nocaps"):
    table = run_schedule(Schedule("fixed-delta", 0.4, levels, policy=policy, problem="ex51"))
    print(f"\n{policy}")
    print(render_report(table, "md", extended=True))
