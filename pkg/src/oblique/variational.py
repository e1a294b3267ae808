"""Explicit trial functions for the delta-interaction form.

A trial function is a squeezed bump transported to a chart of the curve,

    f(Phi(y1, y2)) = g(y1, tau (y2 - h(y1))),   tau = theta |beta|,

where Phi is a rigid motion and the curve is the graph y2 = h(y1) inside
the chart rectangle (-A, A) x (-B, B).  With the change of variables
z = tau (y2 - h(y1)) the form and the norm reduce to exact integrals of g
over its support rectangle (-A, A) x (-B/2, B/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonNegativeBeta, OutOfRegime, OverlappingCharts

QUAD_POINTS = 64


def _gauss(a: float, b: float, n: int = QUAD_POINTS):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


@dataclass(frozen=True)
class Chart:
    """Local graph description of a curve near one of its points.

    The rigid motion Phi maps y = (y1, y2) to origin + R(angle) y, and the
    curve inside Phi((-A, A) x (-B, B)) is the graph y2 = h(y1).
    """

    A: float
    B: float
    h: Callable = field(compare=False)
    dh: Callable = field(compare=False)
    origin: tuple = (0.0, 0.0)
    angle: float = 0.0
    label: str = "graph"

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("chart half-widths must be positive")
        y = np.linspace(-self.A, self.A, 1001)
        if np.max(np.abs(self.h(y))) >= self.B / 2:
            raise ValueError("graph leaves the band |y2| < B/2")

    @property
    def lipschitz(self) -> float:
        """Sup of |h'| on (-A, A), sampled on a fine grid."""
        y = np.linspace(-self.A, self.A, 4001)
        return float(np.max(np.abs(self.dh(y))))

    @classmethod
    def flat(cls, A: float, B: float, origin=(0.0, 0.0), angle: float = 0.0) -> "Chart":
        return cls(A, B, lambda y: np.zeros_like(y), lambda y: np.zeros_like(y),
                   tuple(map(float, origin)), float(angle), "flat")

    @classmethod
    def circle(cls, radius: float, A: float, B: float, phi: float = 0.0) -> "Chart":
        """Chart of the circle |x| = radius centred at its point of polar angle phi.

        The y2 axis points along the inward normal, so the circle is the
        convex graph h(y1) = R - sqrt(R^2 - y1^2).
        """
        R = float(radius)
        if not A < R:
            raise ValueError("chart half-width A must be smaller than the radius")
        if not B < R:
            raise ValueError("chart height B must be smaller than the radius")
        origin = (R * math.cos(phi), R * math.sin(phi))
        # y1 along the CCW tangent, y2 along the inward normal
        angle = phi + math.pi / 2
        return cls(
            float(A), float(B),
            lambda y: R - np.sqrt(R * R - y * y),
            lambda y: y / np.sqrt(R * R - y * y),
            origin, angle, "circle",
        )

    def corners(self) -> np.ndarray:
        """Vertices of Phi((-A, A) x (-B, B)) in the plane."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        loc = np.array([[-self.A, -self.B], [self.A, -self.B], [self.A, self.B], [-self.A, self.B]])
        rot = np.array([[c, -s], [s, c]])
        return loc @ rot.T + np.asarray(self.origin)


@dataclass(frozen=True)
class TrialProfile:
    """Bump g(y1, y2) = cos^2(pi y1 / 2A) cos^2(pi y2 / B) on (-A, A) x (-B/2, B/2).

    ``theta_scale`` in (0, 1) is the squeezing parameter; the profile is
    transported along ``chart`` (flat by default) with Lipschitz bound
    ``M`` (defaults to the sampled sup of |h'|).
    """

    A: float
    B: float
    theta_scale: float
    chart: Chart | None = None
    M: float | None = None
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise ValueError("A and B must be positive")
        if not 0 < self.theta_scale < 1:
            raise ValueError("theta_scale must lie in (0, 1)")
        if self.chart is None:
            object.__setattr__(self, "chart", Chart.flat(self.A, self.B))
        if not (np.isclose(self.chart.A, self.A) and np.isclose(self.chart.B, self.B)):
            raise ValueError("chart rectangle does not match the profile")
        lip = self.chart.lipschitz
        if self.M is None:
            object.__setattr__(self, "M", lip)
        elif lip > self.M * (1 + 1e-12):
            raise ValueError(f"chart slope {lip:.3g} exceeds Lipschitz bound M = {self.M}")

    def with_theta(self, theta_scale: float) -> "TrialProfile":
        return TrialProfile(self.A, self.B, theta_scale, self.chart, self.M, self.amplitude)

    def g(self, y1, y2):
        a = np.pi * np.asarray(y1) / (2 * self.A)
        b = np.pi * np.asarray(y2) / self.B
        inside = (np.abs(y1) < self.A) & (np.abs(y2) < self.B / 2)
        return np.where(inside, self.amplitude * np.cos(a) ** 2 * np.cos(b) ** 2, 0.0)

    def grad(self, y1, y2):
        """(d g / d y1, d g / d y2) on the support rectangle."""
        a = np.pi * np.asarray(y1) / (2 * self.A)
        b = np.pi * np.asarray(y2) / self.B
        g1 = -self.amplitude * (np.pi / (2 * self.A)) * np.sin(2 * a) * np.cos(b) ** 2
        g2 = -self.amplitude * (np.pi / self.B) * np.cos(a) ** 2 * np.sin(2 * b)
        return g1, g2

    def _grid(self):
        y1, w1 = _gauss(-self.A, self.A)
        z, wz = _gauss(-self.B / 2, self.B / 2)
        Y1, Z = np.meshgrid(y1, z, indexing="ij")
        return Y1, Z, np.outer(w1, wz)

    def norms(self) -> dict:
        """Quadrature values of ||g||^2, ||g(., 0)||^2 and ||grad g||^2."""
        Y1, Z, W = self._grid()
        g = self.g(Y1, Z)
        g1, g2 = self.grad(Y1, Z)
        y1, w1 = _gauss(-self.A, self.A)
        return {
            "g2": float(np.sum(W * g * g)),
            "trace2": float(np.sum(w1 * self.g(y1, 0.0) ** 2)),
            "grad2": float(np.sum(W * (g1 * g1 + g2 * g2))),
        }

    def closed_form_norms(self) -> dict:
        """Exact values of :meth:`norms` for the cos^2 bump."""
        A, B, s = self.A, self.B, self.amplitude ** 2
        return {
            "g2": s * 9 * A * B / 32,
            "trace2": s * 3 * A / 4,
            "grad2": s * (3 * np.pi ** 2 * B / (32 * A) + 3 * np.pi ** 2 * A / (8 * B)),
        }


def rayleigh_quotient(profile: TrialProfile, beta: float, chart: Chart | None = None) -> float:
    """q_beta(f, f) / ||f||^2 for the squeezed trial function on a chart.

    Uses the exact change of variables z = tau (y2 - h(y1)), tau = theta|beta|:

        ||f||^2 = ||g||^2 / tau,
        ||grad f||^2 = (1/tau) int int (g_1 - tau h' g_2)^2 + tau^2 g_2^2,
        int_curve |f|^2 = int g(y1, 0)^2 sqrt(1 + h'^2) dy1.

    Raises
    ------
    OutOfRegime
        If tau < 1, so that the squeezed support may leave the chart.
    """
    if not beta < 0:
        raise NonNegativeBeta("beta must be negative")
    ch = chart or profile.chart
    tau = profile.theta_scale * abs(beta)
    if tau < 1:
        raise OutOfRegime(
            f"theta_scale * |beta| = {tau:.3g} < 1: outside the squeezing regime"
        )
    Y1, Z, W = profile._grid()
    g1, g2 = profile.grad(Y1, Z)
    hp = ch.dh(Y1)
    grad2 = np.sum(W * ((g1 - tau * hp * g2) ** 2 + (tau * g2) ** 2)) / tau
    y1, w1 = _gauss(-profile.A, profile.A)
    trace = np.sum(w1 * profile.g(y1, 0.0) ** 2 * np.sqrt(1 + ch.dh(y1) ** 2))
    norm2 = np.sum(W * profile.g(Y1, Z) ** 2) / tau
    return float((grad2 + beta * trace) / norm2)


@dataclass(frozen=True)
class CTheta:
    """Constant c_theta of the upper bound q_beta(f,f)/||f||^2 <= c_theta beta^2.

    ``theta_star`` is the squeezing threshold below which c_theta < 0.
    """

    value: float
    theta_star: float
    theta_scale: float

    def __float__(self) -> float:
        return self.value


def c_theta(profile: TrialProfile) -> CTheta:
    """c = (4 (M^2+1) theta^2 ||grad g||^2 - theta ||g(.,0)||^2) / ||g||^2."""
    n = profile.norms()
    k = 4 * (profile.M ** 2 + 1) * n["grad2"]
    th = profile.theta_scale
    value = (k * th * th - th * n["trace2"]) / n["g2"]
    return CTheta(float(value), float(n["trace2"] / k), th)


def _separated(p: np.ndarray, q: np.ndarray) -> bool:
    """Separating-axis test for two convex quadrilaterals (open sets)."""
    for poly in (p, q):
        for i in range(len(poly)):
            e = poly[(i + 1) % len(poly)] - poly[i]
            axis = np.array([-e[1], e[0]])
            a, b = p @ axis, q @ axis
            if a.max() <= b.min() or b.max() <= a.min():
                return True
    return False


def multi_bump_bound(n: int, profiles, beta: float) -> float:
    """Upper bound max_j q(f_j, f_j)/||f_j||^2 for the n-th eigenvalue of Q_beta.

    The trial functions have disjoint supports, so the bound applies to the
    span; a negative value certifies at least ``n`` negative eigenvalues.

    Raises
    ------
    OverlappingCharts
        If two chart rectangles intersect.
    """
    profiles = list(profiles)
    if n < 1 or len(profiles) != n:
        raise ValueError(f"need exactly n = {n} profiles, got {len(profiles)}")
    polys = [p.chart.corners() for p in profiles]
    for i in range(n):
        for j in range(i + 1, n):
            if not _separated(polys[i], polys[j]):
                raise OverlappingCharts(f"charts {i} and {j} overlap")
    return max(rayleigh_quotient(p, beta) for p in profiles)
