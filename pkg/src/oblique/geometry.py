"""Curve descriptors and quadrature meshes.

Three curve families are supported: the circle (trapezoidal rule), a closed
"teardrop" with one corner, and a truncated broken line.  Non-circular curves
are covered by composite Gauss-Legendre panels; each panel keeps a handle on
the analytic piece it lies on so that layer operators can place extra
quadrature points anywhere along it.

Points are handled as complex numbers internally and exported as (x, y)
pairs.  Curves with a corner are built as one half plus its mirror image in
the x-axis, so node ``i`` and node ``N-1-i`` are reflections of each other.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    AngleOutOfRange,
    BadGrading,
    NonPositiveLength,
    NonPositiveRadius,
    TooFewNodes,
)

DEFAULT_PANEL_ORDER = 8
DEFAULT_GRADING_ZONE = 0.1


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class CurveDescriptor:
    """Analytic description of a curve.

    Parameters
    ----------
    kind : {"circle", "corner_loop", "broken_line"}
    radius : float, optional
        Circle radius.
    half_angle : float, optional
        Half opening angle of the corner, in (0, pi/2).
    scale : float, optional
        Teardrop scale ``r``; the curve is straight inside the disk of
        radius ``2 r`` around the corner.
    truncation : float, optional
        Leg length of a truncated broken line.
    """

    kind: str
    radius: float | None = None
    half_angle: float | None = None
    scale: float | None = None
    truncation: float | None = None

    def __post_init__(self):
        if self.kind == "circle":
            if self.radius is None or not self.radius > 0:
                raise NonPositiveRadius("circle radius must be > 0")
        elif self.kind in ("corner_loop", "broken_line"):
            th = self.half_angle
            if th is None or not 0.0 < th < np.pi / 2:
                raise AngleOutOfRange("half angle must lie in (0, pi/2)")
            if self.kind == "corner_loop":
                if self.scale is None or not self.scale > 0:
                    raise NonPositiveLength("teardrop scale must be > 0")
            elif self.truncation is None or not self.truncation > 0:
                raise NonPositiveLength("truncation length must be > 0")
        else:
            raise ValueError(f"unknown curve kind {self.kind!r}")

    @classmethod
    def circle(cls, radius: float) -> "CurveDescriptor":
        return cls("circle", radius=float(radius))

    @classmethod
    def corner_loop(cls, theta: float, r: float) -> "CurveDescriptor":
        return cls("corner_loop", half_angle=float(theta), scale=float(r))

    @classmethod
    def broken_line(cls, theta: float, L: float) -> "CurveDescriptor":
        return cls("broken_line", half_angle=float(theta), truncation=float(L))

    @property
    def closed(self) -> bool:
        return self.kind != "broken_line"

    @property
    def corners(self) -> tuple[float, ...]:
        """Arclength positions of tangent jumps, measured from the start."""
        if self.kind == "circle":
            return ()
        if self.kind == "broken_line":
            return (self.truncation,)
        return (0.0,)

    def total_length(self) -> float:
        if self.kind == "circle":
            return 2 * np.pi * self.radius
        if self.kind == "broken_line":
            return 2 * self.truncation
        arc = BlendArc(self.half_angle, self.scale)
        return 4 * self.scale + arc.length

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("radius", "half_angle", "scale", "truncation"):
            v = getattr(self, key)
            if v is not None:
                d[key] = v
        d["closed"] = self.closed
        d["corners"] = list(self.corners)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CurveDescriptor":
        keys = ("radius", "half_angle", "scale", "truncation")
        return cls(d["kind"], **{k: d[k] for k in keys if d.get(k) is not None})


# ---------------------------------------------------------------------------
# analytic pieces


class Segment:
    """Straight segment z(t) = z0 + t (z1 - z0), t in [0, 1]."""

    def __init__(self, z0: complex, z1: complex):
        self.z0 = complex(z0)
        self.z1 = complex(z1)

    def pos(self, t):
        return self.z0 + np.asarray(t) * (self.z1 - self.z0)

    def vel(self, t):
        return np.full(np.shape(t), self.z1 - self.z0, dtype=complex)

    straight = True


class CircleArc:
    """z(t) = R e^{it}."""

    def __init__(self, radius: float):
        self.radius = float(radius)

    def pos(self, t):
        return self.radius * np.exp(1j * np.asarray(t))

    def vel(self, t):
        return 1j * self.radius * np.exp(1j * np.asarray(t))

    straight = False


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)
_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)


class BlendArc:
    """Closing arc of the teardrop, parametrised by arclength s in [0, S].

    The arc starts at 2r e^{-i theta} heading along e^{-i theta} and ends at
    2r e^{+i theta} heading along -e^{i theta}.  Its curvature is a plateau
    switched on and off by the septic smoothstep over the first and last
    ``ramp`` fraction of the arc, so curvature and its first three
    derivatives vanish at both ends and the junctions with the straight legs
    are C^4.  The total turning is pi + 2 theta and the profile is symmetric,
    which closes the curve horizontally; the length S follows from the
    vertical closure condition.
    """

    straight = False

    def __init__(self, theta: float, r: float, ramp: float = 0.02):
        self.theta = float(theta)
        self.r = float(r)
        self.delta = float(ramp)
        self.turn = np.pi + 2 * self.theta
        self.start = 2 * self.r * np.exp(-1j * self.theta)
        # vertical rise over the first half arc per unit length
        rise = 0.0
        for a, b in ((0.0, self.delta), (self.delta, 0.5)):
            sig = a + 0.5 * (b - a) * (_GL_X + 1)
            rise += 0.5 * (b - a) * np.sum(_GL_W * np.sin(self._phase(sig)))
        if not rise > 0:
            raise AngleOutOfRange("teardrop closure fails for this angle")
        self.length = 2 * self.r * np.sin(self.theta) / rise

    @staticmethod
    def _step(x):
        x = np.clip(x, 0.0, 1.0)
        return x**4 * (35 - 84 * x + 70 * x**2 - 20 * x**3)

    @staticmethod
    def _step_integral(x):
        x = np.clip(x, 0.0, 1.0)
        return x**5 * (7 - 14 * x + 10 * x**2 - 2.5 * x**3)

    def _profile(self, sig):
        d = self.delta
        return self._step(sig / d) * self._step((1 - sig) / d)

    def _ramp(self, sig):
        """Normalised turning int_0^sig profile / int_0^1 profile."""
        d = self.delta
        s = np.asarray(sig, dtype=float)
        head = d * self._step_integral(s / d)
        mid = np.clip(s, d, 1 - d) - d
        tail = d * (0.5 - self._step_integral((1 - s) / d))
        tail = np.where(s > 1 - d, tail, 0.0)
        return (head + mid + tail) / (1 - d)

    def _phase(self, sig):
        return -self.theta + self.turn * self._ramp(sig)

    def curvature(self, s):
        sig = np.asarray(s) / self.length
        return self.turn / ((1 - self.delta) * self.length) * self._profile(sig)

    def vel(self, s):
        return np.exp(1j * self._phase(np.asarray(s) / self.length))

    def _integrate(self, lo, hi, nodes_w=(_GL_X, _GL_W)):
        x, w = nodes_w
        span = hi - lo
        pts = lo[:, None] + 0.5 * span[:, None] * (x[None, :] + 1)
        vals = np.exp(1j * self._phase(pts / self.length))
        return 0.5 * span * (vals @ w)

    @cached_property
    def _knots(self):
        # knots include the profile kinks so each cell is polynomial-smooth
        S, d = self.length, self.delta
        pieces = [np.linspace(a, b, n + 1)[:-1] for a, b, n in
                  ((0, d * S, 32), (d * S, (1 - d) * S, 448), ((1 - d) * S, S, 32))]
        knots = np.concatenate(pieces + [np.array([S])])
        inc = self._integrate(knots[:-1], knots[1:])
        return knots, self.start + np.concatenate([[0.0], np.cumsum(inc)])

    def pos(self, s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        knots, vals = self._knots
        k = np.clip(np.searchsorted(knots, flat, side="right") - 1, 0, len(knots) - 2)
        out = vals[k] + self._integrate(knots[k], flat, (_GL16_X, _GL16_W))
        return out.reshape(s.shape)


class Mirror:
    """Reflection of a piece in the x-axis."""

    def __init__(self, base):
        self.base = base
        self.straight = base.straight

    def pos(self, t):
        return np.conj(self.base.pos(t))

    def vel(self, t):
        return np.conj(self.base.vel(t))


@dataclass(frozen=True)
class Panel:
    """Portion t in [t0, t1] of a piece; local coordinate u in [-1, 1]."""

    piece: object
    t0: float
    t1: float

    def param(self, u):
        return self.t0 + 0.5 * (self.t1 - self.t0) * (np.asarray(u) + 1)

    def pos(self, u):
        return self.piece.pos(self.param(u))

    def dpos(self, u):
        """dz/du."""
        return self.piece.vel(self.param(u)) * 0.5 * (self.t1 - self.t0)

    @property
    def straight(self) -> bool:
        return self.piece.straight

    def mirrored(self, cache: dict | None = None) -> "Panel":
        cache = {} if cache is None else cache
        key = id(self.piece)
        if key not in cache:
            cache[key] = Mirror(self.piece)
        return Panel(cache[key], self.t1, self.t0)


# ---------------------------------------------------------------------------
# mesh


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CurveMesh:
    """Quadrature discretisation of a curve.

    Attributes
    ----------
    nodes : ndarray, shape (N, 2)
    weights : ndarray, shape (N,)
        Positive arclength weights.
    normals : ndarray, shape (N, 2)
        Unit normals pointing into the exterior region.
    panel_map : ndarray of int, shape (N,)
        Panel index of each node.
    grading_exponent : float
    descriptor : CurveDescriptor
    quadrature : {"trapezoid", "gauss"}
    panel_order : int
        Nodes per panel (for the trapezoid rule the panels are a bookkeeping
        grouping of consecutive nodes).
    panels : tuple of Panel
        Panel geometry, empty for the trapezoid rule.
    symmetric : bool
        Whether node ``N-1-i`` is the mirror image of node ``i``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    panel_map: np.ndarray
    grading_exponent: float
    descriptor: CurveDescriptor
    quadrature: str
    panel_order: int
    panels: tuple = ()
    symmetric: bool = False
    unit_nodes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("nodes", "weights", "normals", "panel_map"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    @cached_property
    def z(self) -> np.ndarray:
        return self.nodes[:, 0] + 1j * self.nodes[:, 1]

    @cached_property
    def panel_lengths(self) -> np.ndarray:
        return np.bincount(self.panel_map, weights=self.weights)

    @cached_property
    def node_panel_length(self) -> np.ndarray:
        """Length of the panel each node belongs to."""
        return self.panel_lengths[self.panel_map]

    def total_length(self) -> float:
        return float(np.sum(self.weights))

    @cached_property
    def mesh_hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.descriptor.to_dict(), sort_keys=True).encode())
        h.update(self.quadrature.encode())
        h.update(np.ascontiguousarray(self.nodes).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()

    def to_json(self) -> str:
        return json.dumps(
            {
                "descriptor": self.descriptor.to_dict(),
                "nodes": self.nodes.tolist(),
                "weights": self.weights.tolist(),
                "normals": self.normals.tolist(),
            }
        )

    def scaled(self, s: float) -> "CurveMesh":
        """Dilation of a broken-line mesh by ``s`` > 0.

        The broken-line builder constructs the mesh on unit legs and multiplies
        by ``L``, so rebuilding at ``s L`` reproduces exactly ``s`` times the
        unit geometry.
        """
        d = self.descriptor
        if d.kind != "broken_line":
            raise ValueError("scaling is provided for broken lines only")
        if not s > 0:
            raise NonPositiveLength("scale factor must be > 0")
        return build_broken_line(
            d.half_angle,
            d.truncation * s,
            self.n_nodes,
            self.grading_exponent,
            panel_order=self.panel_order,
        )


def _gauss_panels(panels, p):
    x, w = np.polynomial.legendre.leggauss(p)
    zs, dzs, ws, pmap = [], [], [], []
    for k, pan in enumerate(panels):
        dz = pan.dpos(x)
        zs.append(pan.pos(x))
        dzs.append(dz)
        ws.append(w * np.abs(dz))
        pmap.append(np.full(p, k))
    return (
        np.concatenate(zs),
        np.concatenate(dzs),
        np.concatenate(ws),
        np.concatenate(pmap),
    )


def _symmetric_from_half(half_panels, p, descriptor, q, scale=1.0):
    """Assemble a mirror-symmetric mesh from panels covering one half."""
    mirrors: dict = {}
    panels = list(half_panels) + [
        pan.mirrored(mirrors) for pan in reversed(half_panels)
    ]
    zh, dzh, wh, _ = _gauss_panels(half_panels, p)
    z = np.concatenate([zh, np.conj(zh[::-1])])
    # reversal of traversal direction flips the tangent of the mirrored half
    dz = np.concatenate([dzh, -np.conj(dzh[::-1])])
    w = np.concatenate([wh, wh[::-1]])
    pmap = np.repeat(np.arange(len(panels)), p)
    tang = dz / np.abs(dz)
    normal = -1j * tang
    unit = z
    if scale != 1.0:
        z = z * scale
        w = w * scale
        scaled: dict = {}
        for pan in panels:
            scaled.setdefault(id(pan.piece), _Scaled(pan.piece, scale))
        panels = [Panel(scaled[id(pan.piece)], pan.t0, pan.t1) for pan in panels]
    return CurveMesh(
        nodes=np.column_stack([z.real, z.imag]),
        weights=w,
        normals=np.column_stack([normal.real, normal.imag]),
        panel_map=pmap,
        grading_exponent=float(q),
        descriptor=descriptor,
        quadrature="gauss",
        panel_order=p,
        panels=tuple(panels),
        symmetric=True,
        unit_nodes=np.column_stack([unit.real, unit.imag]),
    )


class _Scaled:
    def __init__(self, base, s):
        self.base = base
        self.s = float(s)
        self.straight = base.straight

    def pos(self, t):
        return self.s * self.base.pos(t)

    def vel(self, t):
        return self.s * self.base.vel(t)


def _check_nodes(n_nodes, p):
    if int(n_nodes) != n_nodes:
        raise TooFewNodes("node count must be an integer")
    n = int(n_nodes)
    if n < 2 * p or n % (2 * p):
        raise TooFewNodes(
            f"node count must be a positive multiple of {2 * p} for mirrored panels"
        )
    return n


def graded_breaks(n_panels: int, q: float, zone: float = DEFAULT_GRADING_ZONE):
    """Panel breakpoints on [0, 1] graded algebraically toward 0.

    The first ``zone`` of the interval carries breakpoints ``zone (k/n_g)^q``;
    the rest is uniform.  ``n_g`` is chosen so that the last graded panel and
    the uniform panels have matching lengths.  ``q = 1`` gives uniform
    breakpoints on the whole interval.
    """
    if not q >= 1:
        raise BadGrading("grading exponent must be >= 1")
    P = int(n_panels)
    if q == 1 or P == 1:
        return np.linspace(0.0, 1.0, P + 1)
    n_g = int(round(q * zone * P / (1 - zone + q * zone)))
    n_g = min(max(n_g, 1), P - 1)
    graded = zone * (np.arange(n_g + 1) / n_g) ** q
    uniform = np.linspace(zone, 1.0, P - n_g + 1)[1:]
    return np.concatenate([graded, uniform])


def build_circle(
    radius: float,
    n_nodes: int,
    quadrature: str = "trapezoid",
    panel_order: int = DEFAULT_PANEL_ORDER,
) -> CurveMesh:
    """Equispaced trapezoidal mesh on the circle of the given radius.

    ``quadrature="gauss"`` instead builds equal Gauss-Legendre panels and is
    used where the corner-curve machinery must be exercised on a smooth curve.
    """
    descriptor = CurveDescriptor.circle(radius)
    if int(n_nodes) != n_nodes or n_nodes < 8 or n_nodes % 2:
        raise TooFewNodes("circle needs an even node count >= 8")
    n = int(n_nodes)
    R = float(radius)
    if quadrature == "gauss":
        if n % panel_order:
            raise TooFewNodes(f"node count must be a multiple of {panel_order}")
        npan = n // panel_order
        br = np.linspace(0, 2 * np.pi, npan + 1)
        piece = CircleArc(R)
        panels = tuple(Panel(piece, br[k], br[k + 1]) for k in range(npan))
        z, dz, w, pmap = _gauss_panels(panels, panel_order)
        order = panel_order
    elif quadrature == "trapezoid":
        t = 2 * np.pi * np.arange(n) / n
        z = R * np.exp(1j * t)
        dz = 1j * z
        w = np.full(n, 2 * np.pi * R / n)
        order = 8 if n % 8 == 0 else 2
        pmap = np.arange(n) // order
        panels = ()
    else:
        raise ValueError("quadrature must be 'trapezoid' or 'gauss'")
    normal = -1j * dz / np.abs(dz)
    return CurveMesh(
        nodes=np.column_stack([z.real, z.imag]),
        weights=w,
        normals=np.column_stack([normal.real, normal.imag]),
        panel_map=pmap,
        grading_exponent=1.0,
        descriptor=descriptor,
        quadrature=quadrature,
        panel_order=order,
        panels=panels,
    )


def build_broken_line(
    theta: float,
    L: float,
    n_nodes: int,
    q: float = 3.0,
    panel_order: int = DEFAULT_PANEL_ORDER,
    zone: float = DEFAULT_GRADING_ZONE,
) -> CurveMesh:
    """Truncated broken line {r e^{+-i theta} : 0 < r <= L}, graded at 0.

    The traversal runs from the far end of the upper leg through the corner
    to the far end of the lower leg, so normals point away from the sector
    |arg z| < theta.  The geometry is built on legs of unit length and then
    multiplied by ``L``.
    """
    descriptor = CurveDescriptor.broken_line(theta, L)
    if not q >= 1:
        raise BadGrading("grading exponent must be >= 1")
    p = int(panel_order)
    n = _check_nodes(n_nodes, p)
    br = graded_breaks(n // (2 * p), q, zone)
    e = np.exp(1j * theta)
    # upper leg from the far end inward on unit legs; t runs 0 -> 1 inward
    leg = Segment(0.0, e)
    half = [Panel(leg, br[k + 1], br[k]) for k in range(len(br) - 2, -1, -1)]
    return _symmetric_from_half(half, p, descriptor, q, scale=float(L))


def build_corner_loop(
    theta: float,
    r: float,
    n_nodes: int,
    q: float = 3.0,
    panel_order: int = DEFAULT_PANEL_ORDER,
    zone: float = 0.5,
) -> CurveMesh:
    """Teardrop: Gamma_theta inside the disk of radius 2r, closed by a C^4 arc.

    Counter-clockwise traversal: corner -> lower leg -> arc -> upper leg ->
    corner.  The legs are graded toward the corner; the arc carries uniform
    panels with the same length as the ungraded part of the legs.
    """
    descriptor = CurveDescriptor.corner_loop(theta, r)
    if not q >= 1:
        raise BadGrading("grading exponent must be >= 1")
    p = int(panel_order)
    n = _check_nodes(n_nodes, p)
    arc = BlendArc(theta, r)
    leg = 2 * float(r)
    # effective leg length in uniform-panel units (see graded_breaks)
    leg_eff = leg if q == 1 else leg * (1 - zone + q * zone)
    half_arc = 0.5 * arc.length
    P_half = n // (2 * p)
    if P_half < 2:
        raise TooFewNodes("teardrop needs at least two panels per half")
    P_leg = int(round(P_half * leg_eff / (leg_eff + half_arc)))
    P_leg = min(max(P_leg, 1), P_half - 1)
    P_arc = P_half - P_leg
    br = graded_breaks(P_leg, q, zone)
    e = np.exp(-1j * theta)
    seg = Segment(0.0, leg * e)
    half = [Panel(seg, br[k], br[k + 1]) for k in range(P_leg)]
    sb = np.linspace(0.0, half_arc, P_arc + 1)
    half += [Panel(arc, sb[k], sb[k + 1]) for k in range(P_arc)]
    return _symmetric_from_half(half, p, descriptor, q)


def corner_tangents(mesh: CurveMesh) -> tuple[np.ndarray, np.ndarray]:
    """One-sided unit tangents leaving the corner along the two legs."""
    if mesh.descriptor.kind == "circle":
        raise ValueError("the circle has no corner")
    k = np.argmin(np.abs(mesh.z))
    zc = mesh.z[k]
    zm = np.conj(zc)
    a = zc / abs(zc)
    b = zm / abs(zm)
    return np.array([a.real, a.imag]), np.array([b.real, b.imag])
