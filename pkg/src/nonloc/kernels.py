"""Radial interaction kernels with bounded support.

A kernel is stored through its profile gamma(rho) on the unit ball; the
rescaled density used in integrals is

    gamma_delta(s) = delta**-(d + 2) * gamma(s / delta),   0 <= s <= delta.

The constants are chosen so that w_d * int_0^1 rho**(d+1) gamma(rho) d rho = d,
i.e. every coordinate second moment of the unit-ball kernel equals one.
"""
from dataclasses import dataclass
from math import erf, exp, pi, sqrt
from typing import Callable

import numpy as np

FAMILIES = ("constant", "linear", "gaussian", "peridynamic")

# integer codes shared with the compiled assembly loops
FAMILY_CODE = {name: k for k, name in enumerate(FAMILIES)}

_ALIASES = {"gaussianlike": "gaussian", "gaussian-like": "gaussian"}


def sphere_area(d):
    """Surface area w_d of the unit sphere in R^d (d = 1 or 2)."""
    if d == 1:
        return 2.0
    if d == 2:
        return 2.0 * pi
    raise ValueError(f"unsupported dimension d={d}")


def gaussian_constant(d):
    """C_e = int_0^1 tau**(d+1) exp(-tau**2) d tau, in closed form."""
    if d == 1:
        return sqrt(pi) / 4.0 * erf(1.0) - 0.5 / np.e
    if d == 2:
        return 0.5 * (1.0 - 2.0 / np.e)
    raise ValueError(f"unsupported dimension d={d}")


@dataclass(frozen=True)
class Kernel:
    family: str
    d: int
    delta: float
    scale: float  # multiplies the family's shape function

    def profile(self, rho):
        """gamma(rho) on (0, 1]; zero outside the unit ball."""
        rho = np.asarray(rho, dtype=float)
        inside = rho <= 1.0
        with np.errstate(divide="ignore"):
            if self.family == "constant":
                val = np.full_like(rho, self.scale)
            elif self.family == "linear":
                val = self.scale * (1.0 - rho)
            elif self.family == "gaussian":
                val = self.scale * np.exp(-rho * rho)
            else:
                val = self.scale / rho
        return np.where(inside, val, 0.0)

    def density(self, s):
        """Rescaled density gamma_delta(s) for distances s."""
        s = np.asarray(s, dtype=float)
        return self.delta ** -(self.d + 2) * self.profile(s / self.delta)

    @property
    def code(self):
        return FAMILY_CODE[self.family]

    def with_delta(self, delta):
        return make_kernel(self.family, self.d, delta)


def make_kernel(family, d, delta):
    """Build a normalized kernel of the given family.

    Args:
        family: one of "constant", "linear", "gaussian", "peridynamic".
        d: spatial dimension, 1 or 2.
        delta: horizon, must be positive.
    """
    name = str(family).lower()
    name = _ALIASES.get(name, name)
    if name not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    if d not in (1, 2):
        raise ValueError(f"unsupported dimension d={d}")
    if not delta > 0:
        raise ValueError("horizon delta must be positive")
    wd = sphere_area(d)
    if name == "constant":
        scale = d * (d + 2) / wd
    elif name == "linear":
        scale = d * (d + 2) * (d + 3) / wd
    elif name == "gaussian":
        scale = d / (gaussian_constant(d) * wd)
    else:
        if d < 2:
            raise ValueError("the peridynamic kernel requires d >= 2")
        scale = d * (d + 1) / wd
    return Kernel(name, d, float(delta), float(scale))


_GL16 = np.polynomial.legendre.leggauss(16)


def _composite_gauss(func, a, b, panels=64):
    """Composite 16-point Gauss-Legendre quadrature of func on [a, b]."""
    if b <= a:
        return 0.0
    x, w = _GL16
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    pts = mid + half * x
    return float(np.sum(half * w * func(pts)))


@dataclass(frozen=True)
class MomentFunctions:
    phi: Callable[[float], float]
    psi: Callable[[float], float]
    lam: int


def _closed_forms(kernel):
    c = kernel.scale
    if kernel.family == "constant":
        if kernel.d == 2:
            return (lambda t: t ** 4, lambda t: 16.0 / (3.0 * pi) * t ** 3)
        return (lambda t: t ** 3, lambda t: 1.5 * t ** 2)
    if kernel.family == "linear":
        if kernel.d == 2:
            return (lambda t: 5.0 * t ** 4 - 4.0 * t ** 5,
                    lambda t: 4.0 * c * (t ** 3 / 3.0 - t ** 4 / 4.0))
        return (lambda t: 4.0 * t ** 3 - 3.0 * t ** 4,
                lambda t: 6.0 * t ** 2 - 4.0 * t ** 3)
    if kernel.family == "peridynamic":
        return (lambda t: t ** 3, lambda t: 2.0 * c * t ** 2)
    return None


def _elementwise(f):
    vf = np.vectorize(f, otypes=[float])

    def wrapped(t):
        return f(float(t)) if np.ndim(t) == 0 else vf(t)
    return wrapped


def _quadrature_forms(kernel):
    g = kernel.profile
    if kernel.d == 2:
        def phi(t):
            return pi * _composite_gauss(lambda r: r ** 3 * g(r), 0.0, t)

        def psi(t):
            return 4.0 * _composite_gauss(lambda r: r ** 2 * g(r), 0.0, t)
    else:
        def phi(t):
            return 2.0 * _composite_gauss(lambda r: r ** 2 * g(r), 0.0, t)

        def psi(t):
            return 2.0 * _composite_gauss(lambda r: r * g(r), 0.0, t)
    return _elementwise(phi), _elementwise(psi)


def _phi_derivatives(phi, step=1e-5):
    """One-sided difference approximations of phi'(1) and phi''(1)."""
    f0, f1, f2, f3 = (phi(1.0 - k * step) for k in range(4))
    d1 = (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * step)
    d2 = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / step ** 2
    return d1, d2


def _classify(phi, tol=1e-8):
    d1, d2 = _phi_derivatives(phi)
    if abs(d1) >= tol:
        return 2
    if abs(d2) >= tol:
        return 4
    raise ValueError("lambda order is indeterminate: phi'(1) and phi''(1) both vanish")


def moment_functions(kernel, closed_form=True):
    """Moment functions Phi, Psi of the kernel profile and its lambda order.

    In 2D, Phi(t) = pi int_0^t rho^3 gamma and Psi(t) = 4 int_0^t rho^2 gamma.
    In 1D the analogous coordinate moments are used: Phi(t) = 2 int_0^t rho^2
    gamma and Psi(t) = 2 int_0^t rho gamma, so that Phi(1) = 1 in both cases.
    Set closed_form=False to force the quadrature route.
    """
    forms = _closed_forms(kernel) if closed_form else None
    if forms is None:
        forms = _quadrature_forms(kernel)
    phi, psi = forms
    return MomentFunctions(phi, psi, _classify(phi))


def lambda_order(kernel):
    """Polygon-defect exponent: 2 if Phi'(1) != 0, else 4 if Phi''(1) != 0."""
    return moment_functions(kernel).lam


def normalization_residual(kernel, quad_degree=8):
    """Relative residual of w_d int_0^1 rho^(d+1) gamma(rho) d rho = d."""
    if quad_degree < 4:
        raise ValueError("quad_degree must be at least 4")
    x, w = np.polynomial.legendre.leggauss(quad_degree)
    panels = 64
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 / panels
    r = mid + half * x
    integral = np.sum(half * w * r ** (kernel.d + 1) * kernel.profile(r))
    d = kernel.d
    return abs(sphere_area(d) * integral - d) / d


def phi_prime(kernel, t):
    """Exact derivative of Phi from the profile (2D: pi t^3 gamma(t))."""
    t = np.asarray(t, dtype=float)
    if kernel.d == 2:
        return pi * t ** 3 * kernel.profile(t)
    return 2.0 * t ** 2 * kernel.profile(t)


def profile_value(code, scale, rho):
    """Scalar profile evaluation mirrored by the compiled loops."""
    if code == 0:
        return scale
    if code == 1:
        return scale * (1.0 - rho)
    if code == 2:
        return scale * exp(-rho * rho)
    return scale / rho
