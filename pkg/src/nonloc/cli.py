"""Command line entry point: `nonloc study | moments | verify`."""
import argparse
import sys

import numpy as np

from . import checks
from .analysis import FAMILIES as MOMENT_FAMILIES, sigma_moments
from .kernels import FAMILIES, make_kernel, moment_functions
from .mesh import build_consistent_mesh
from .study import Schedule, render_report, run_schedule

STUDY_KEYS = {
    "problem": str, "mode": str, "delta": float, "levels": int, "m": float, "beta": float,
    "c": float, "policy": str, "kernel": str, "outer_deg": int, "inner_deg": int,
    "format": str, "out": str, "structured": bool, "seed": int, "perturb": float,
    "mesh_size": str, "extended": bool,
}
MOMENT_KEYS = {
    "kernel": str, "family": str, "delta": float, "h": float, "samples": int, "seed": int,
    "structured": bool,
}
STUDY_DEFAULTS = {
    "problem": "ex51", "mode": "fixed-delta", "delta": 0.4, "levels": 3, "m": 2.0,
    "beta": 1.0, "c": None, "policy": "exactcaps", "kernel": "constant", "outer_deg": 5,
    "inner_deg": 5, "format": "csv", "out": None, "structured": False, "seed": 0,
    "perturb": 0.2, "mesh_size": "spacing", "extended": False,
}
MOMENT_DEFAULTS = {
    "kernel": "constant", "family": "nocaps-raw", "delta": 0.2, "h": 0.025, "samples": 20,
    "seed": 0, "structured": False,
}


def _to_bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def read_config(path, keys):
    """Parse `key = value` lines; '#' starts a comment. Dashes in keys are
    treated as underscores."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in keys:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            conv = _to_bool if keys[key] is bool else keys[key]
            try:
                out[key] = conv(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def _merge(args, keys, defaults):
    opts = dict(defaults)
    if args.config:
        opts.update(read_config(args.config, keys))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def _study(args):
    o = _merge(args, STUDY_KEYS, STUDY_DEFAULTS)
    schedule = Schedule(o["mode"], o["delta"], o["levels"], m=o["m"], beta=o["beta"], c=o["c"],
                        policy=o["policy"], kernel=o["kernel"], problem=o["problem"],
                        outer_degree=o["outer_deg"], inner_degree=o["inner_deg"],
                        structured=o["structured"], seed=o["seed"], perturb=o["perturb"],
                        mesh_size=o["mesh_size"])

    def progress(row):
        print(f"level {row.level}: delta={row.delta:.4g} h={row.h:.4g} dofs={row.dofs} "
              f"energy={row.energy:.3e} energy_h={row.energy_h:.3e} l2={row.l2:.3e} ({row.seconds:.1f}s)", file=sys.stderr)

    table = run_schedule(schedule, progress)
    text = render_report(table, o["format"], o["extended"])
    if o["out"]:
        with open(o["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    ok = all(np.isfinite([r.energy, r.l2, r.max_err]).all() for r in table.rows)
    return 0 if ok else 1


def _moments(args):
    o = _merge(args, MOMENT_KEYS, MOMENT_DEFAULTS)
    kernel = make_kernel(o["kernel"], 2, o["delta"])
    mesh = build_consistent_mesh(o["h"], o["delta"], structured=o["structured"], seed=o["seed"])
    mf = moment_functions(kernel)
    pts = checks.sample_points(o["samples"], o["delta"], o["seed"])
    print("x1,x2,first1,first2,second11,second22,cross,defect11,n_vertices,r_hat")
    ok = True
    for x in pts:
        r = sigma_moments(x, mesh, kernel, o["family"])
        print(",".join(f"{v:.10g}" for v in (*x, *r.first, *r.second, r.cross, r.defect[0]))
              + f",{r.n_vertices},{r.r_hat:.6f}")
        first = float(np.max(np.abs(r.first)))
        if r.family in ("ball", "reflected-symmetric"):
            ok &= first <= 1e-10
        elif r.family == "nocaps-raw":
            ok &= first <= (mf.psi(1.0) - mf.psi(r.r_hat)) / o["delta"] + 1e-10
        for w in r.warnings:
            print(f"warning at {x}: {w}", file=sys.stderr)
    print(f"{'PASS' if ok else 'FAIL'}  first-moment check ({r.family})", file=sys.stderr)
    return 0 if ok else 1


def _verify(args):
    results = checks.run_all(lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


def build_parser():
    p = argparse.ArgumentParser(prog="nonloc", description="Nonlocal diffusion with polygonal "
                                "approximations of the interaction ball")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("study", help="run a refinement study and print a convergence table")
    s.add_argument("--config")
    s.add_argument("--problem", choices=["ex51", "ex52a", "ex52b", "ex53a", "ex53b", "ex53"])
    s.add_argument("--mode", choices=["fixed-delta", "fixed-ratio", "power-law"])
    s.add_argument("--delta", type=float, help="initial horizon")
    s.add_argument("--levels", type=int)
    s.add_argument("--m", type=float, help="delta/h for fixed-ratio")
    s.add_argument("--beta", type=float, help="exponent for power-law, h = c delta^beta")
    s.add_argument("--c", type=float)
    s.add_argument("--policy", choices=["exactcaps", "nocaps"])
    s.add_argument("--kernel", choices=list(FAMILIES))
    s.add_argument("--outer-deg", dest="outer_deg", type=int)
    s.add_argument("--inner-deg", dest="inner_deg", type=int)
    s.add_argument("--format", choices=["csv", "md", "markdown"])
    s.add_argument("--out")
    s.add_argument("--structured", action="store_const", const=True,
                   help="unperturbed grid (default perturbs interior vertices)")
    s.add_argument("--seed", type=int)
    s.add_argument("--perturb", type=float)
    s.add_argument("--mesh-size", dest="mesh_size", choices=["diameter", "spacing"],
                   help="what h measures in 2D (default: grid spacing)")
    s.add_argument("--extended", action="store_const", const=True,
                   help="add the interpolant energy measure ||I_h u - u_h|| to the report")
    s.set_defaults(func=_study)

    m = sub.add_parser("moments", help="kernel moments at sample points of a mesh")
    m.add_argument("--config")
    m.add_argument("--kernel", choices=list(FAMILIES))
    m.add_argument("--family", choices=list(MOMENT_FAMILIES))
    m.add_argument("--delta", type=float)
    m.add_argument("--h", type=float)
    m.add_argument("--samples", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--structured", action="store_const", const=True)
    m.set_defaults(func=_moments)

    v = sub.add_parser("verify", help="run the property suite")
    v.set_defaults(func=_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
