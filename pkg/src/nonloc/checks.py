"""Property checks run by `nonloc verify`.

Each check returns a CheckResult; none of them needs reference data.
"""
from dataclasses import dataclass
import numpy as np

from .analysis import (coercivity_probe, error_energy, polygon_moments, regular_polygon,
                       sigma_lower_bound, sigma_moments)
from .assembly import stiffness_matrix, stiffness_matrix_1d
from .geometry import clip_ball_triangle
from .kernels import FAMILIES, lambda_order, make_kernel, moment_functions, normalization_residual
from .mesh import build_consistent_mesh, build_grid_1d


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def check_normalization(tol=1e-8):
    worst = 0.0
    for d in (1, 2):
        for fam in FAMILIES:
            if fam == "peridynamic" and d == 1:
                continue  # 1/rho is not integrable on an interval
            worst = max(worst, normalization_residual(make_kernel(fam, d, 1.0)))
    return CheckResult("kernel normalization", worst <= tol, f"max residual {worst:.2e}")


def check_lambda():
    got = [lambda_order(make_kernel(f, 2, 1.0)) for f in FAMILIES]
    return CheckResult("lambda classification", got == [2, 4, 2, 2], f"{dict(zip(FAMILIES, got))}")


def _small_mesh(h=0.1, delta=0.25, seed=3):
    return build_consistent_mesh(h, delta, structured=False, seed=seed)


def check_matrix(h=0.1, delta=0.25):
    """Symmetry, constant annihilation and the quadratic-form identity."""
    mesh = _small_mesh(h, delta)
    kernel = make_kernel("constant", 2, delta)
    out = []
    sym = 0.0
    const = 0.0
    qf = 0.0
    rng = np.random.default_rng(7)
    for policy in ("exactcaps", "nocaps"):
        for form in ("energy", "testpoint"):
            K, ext, sets = stiffness_matrix(mesh, kernel, policy, form=form)
            ndof = len(sets.dofs)
            A = K[:ndof, :ndof]
            sym = max(sym, abs(A - A.T).max() / abs(A).max())
            if form == "energy":
                const = max(const, np.abs(K[:ndof] @ np.ones(K.shape[0])).max() / abs(A).max())
                for _ in range(3):
                    v = rng.standard_normal(ndof)
                    u = np.zeros(mesh.num_vertices)
                    u[sets.dofs] = v
                    direct = error_energy(u, None, mesh, kernel, policy) ** 2
                    qf = max(qf, abs(v @ (A @ v) - direct) / direct)
    g = build_grid_1d(0.05, 0.15, perturb=0.2, seed=1)
    K1, s1 = stiffness_matrix_1d(g, make_kernel("constant", 1, 0.15))
    n1 = len(s1.dofs)
    A1 = K1[:n1, :n1]
    sym = max(sym, abs(A1 - A1.T).max() / abs(A1).max())
    const = max(const, np.abs(K1[:n1] @ np.ones(K1.shape[0])).max() / abs(A1).max())
    out.append(CheckResult("matrix symmetry", sym <= 1e-12, f"max relative asymmetry {sym:.2e}"))
    out.append(CheckResult("constants annihilated", const <= 1e-10,
                           f"max |K 1| relative {const:.2e} (energy form)"))
    out.append(CheckResult("quadratic form vs double quadrature", qf <= 1e-8,
                           f"max relative difference {qf:.2e}"))
    return out


def check_policy_ordering(h=0.1, delta=0.25, samples=100):
    mesh = _small_mesh(h, delta)
    kernel = make_kernel("constant", 2, delta)
    Ke, _, sets = stiffness_matrix(mesh, kernel, "exactcaps")
    Kn, _, _ = stiffness_matrix(mesh, kernel, "nocaps", form="energy")
    n = len(sets.dofs)
    Ae, An = Ke[:n, :n], Kn[:n, :n]
    rng = np.random.default_rng(11)
    worst = -np.inf
    for _ in range(samples):
        v = rng.standard_normal(n)
        worst = max(worst, (v @ (An @ v)) / (v @ (Ae @ v)))
    return CheckResult("nocaps <= exactcaps quadratic form", worst <= 1.0 + 1e-12,
                       f"max ratio {worst:.6f} over {samples} vectors")


def check_geometry_mc(trials=1000, samples=4000, seed=5):
    """Clipped areas against hit-or-miss sampling, within 4 standard errors."""
    rng = np.random.default_rng(seed)
    bad = 0
    worst = 0.0
    for _ in range(trials):
        tri = rng.uniform(-1, 1, size=(3, 2))
        e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
        cross = e1[0] * e2[1] - e1[1] * e2[0]
        if abs(cross) < 1e-3:
            continue
        if cross < 0:
            tri = tri[[0, 2, 1]]
        c = rng.uniform(-1, 1, size=2)
        r = rng.uniform(0.1, 1.5)
        a = rng.uniform(size=(samples, 1))
        b = rng.uniform(size=(samples, 1))
        flip = (a + b) > 1
        a = np.where(flip, 1 - a, a)
        b = np.where(flip, 1 - b, b)
        p = tri[0] + a * (tri[1] - tri[0]) + b * (tri[2] - tri[0])
        inside = np.sum((p - c) ** 2, axis=1) <= r * r
        tarea = 0.5 * abs(cross)
        for policy in ("exactcaps", "nocaps"):
            area = clip_ball_triangle(c, r, tri, policy).area()
            if policy == "exactcaps":
                hits = inside
            else:
                # the chord polygon is the convex hull of the clipped piece
                hits = _in_pieces(p, clip_ball_triangle(c, r, tri, policy).pieces)
            frac = area / tarea
            se = tarea * np.sqrt(max(frac * (1 - frac), 0.0) / samples)
            dev = abs(tarea * hits.mean() - area)
            worst = max(worst, dev / se if se > 0 else (0.0 if dev < 1e-12 else np.inf))
            if dev > 4 * se + 1e-12:
                bad += 1
    # at 4 standard errors a handful of misses over 2000 tests is expected by chance
    return CheckResult("geometry Monte-Carlo oracle", bad <= 2,
                       f"{bad} outside 4 SE, worst {worst:.2f} SE")


def _in_pieces(p, pieces):
    hit = np.zeros(len(p), dtype=bool)
    for poly in pieces:
        inside = np.ones(len(p), dtype=bool)
        k = len(poly)
        for i in range(k):
            a, b = poly[i], poly[(i + 1) % k]
            inside &= (b[0] - a[0]) * (p[:, 1] - a[1]) - (b[1] - a[1]) * (p[:, 0] - a[0]) >= 0
        hit |= inside
    return hit


def sample_points(n, delta, seed=0):
    """Uniform points in the unit square; their balls stay inside the
    extended domain."""
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(n, 2))


def check_first_moments(delta=0.2, h=0.025, samples=20):
    mesh = build_consistent_mesh(h, delta, structured=False, seed=2)
    kernel = make_kernel("constant", 2, delta)
    worst = 0.0
    for x in sample_points(samples, delta, 1):
        for fam in ("ball", "reflected-symmetric"):
            r = sigma_moments(x, mesh, kernel, fam)
            worst = max(worst, float(np.max(np.abs(r.first))))
    return CheckResult("first moments vanish (ball, reflected)", worst <= 1e-10,
                       f"max |sigma^1| {worst:.2e}")


def check_first_moment_bound(delta=0.2, h=0.025, samples=20):
    mesh = build_consistent_mesh(h, delta, structured=False, seed=2)
    kernel = make_kernel("constant", 2, delta)
    mf = moment_functions(kernel)
    worst = -np.inf
    for x in sample_points(samples, delta, 3):
        r = sigma_moments(x, mesh, kernel, "nocaps-raw")
        bound = (mf.psi(1.0) - mf.psi(r.r_hat)) / delta
        worst = max(worst, float(np.max(np.abs(r.first))) - bound)
    return CheckResult("nocaps first-moment bound", worst <= 1e-10,
                       f"max |sigma^1| - bound = {worst:.2e}")


def defect_order(delta=0.2, ratios=(4, 8, 16, 32), samples=20, family="constant"):
    """Observed order of the mean nocaps second-moment defect in n = delta/h."""
    kernel = make_kernel(family, 2, delta)
    pts = sample_points(samples, delta, 4)
    means = []
    for n in ratios:
        mesh = build_consistent_mesh(delta / n, delta, structured=True)
        d = [abs(sigma_moments(x, mesh, kernel, "nocaps-raw").defect[0]) for x in pts]
        means.append(float(np.mean(d)))
    slope = -np.polyfit(np.log(ratios), np.log(means), 1)[0]
    return float(slope), means


def check_defect_order():
    kernel = make_kernel("constant", 2, 1.0)
    lam = lambda_order(kernel)
    slope, means = defect_order()
    return CheckResult("nocaps second-moment defect order", abs(slope - lam) <= 0.3,
                       f"order {slope:.2f} (lambda {lam}), means {[f'{m:.2e}' for m in means]}")


def check_lower_bound(Ns=(8, 16, 32, 64)):
    kernel = make_kernel("constant", 2, 1.0)
    ok = True
    parts = []
    for N in Ns:
        _, second, _ = polygon_moments(regular_polygon(N), kernel)
        defect = 1.0 - second[0]
        bound = sigma_lower_bound(N, kernel)
        ok &= bound <= defect
        parts.append(f"N={N}: {bound:.2e} <= {defect:.2e}")
    return CheckResult("sigma lower bound on regular N-gons", bool(ok), "; ".join(parts))


def check_coercivity(delta=0.2, h=0.025, samples=20):
    mesh = build_consistent_mesh(h, delta, structured=False, seed=2)
    kernel = make_kernel("constant", 2, delta)
    worst = np.inf
    x_star = np.array([0.3, 0.7])
    for x in sample_points(samples, delta, 6):
        value, bound = coercivity_probe(x, mesh, kernel, x_star)
        worst = min(worst, value - bound)
    return CheckResult("coercivity probe", worst >= -1e-8, f"min L q - 4 Phi(r_hat) = {worst:.3e}")


def run_all(progress=None):
    results = []
    steps = [check_normalization, check_lambda, check_matrix, check_policy_ordering,
             check_geometry_mc, check_first_moments, check_first_moment_bound,
             check_defect_order, check_lower_bound, check_coercivity]
    for step in steps:
        res = step()
        for r in res if isinstance(res, list) else [res]:
            results.append(r)
            if progress is not None:
                progress(r)
    return results
