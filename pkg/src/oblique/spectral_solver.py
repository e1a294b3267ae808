"""Ordered S(lambda) spectra and the three characteristic equations.

For a mesh and lambda < 0 the eigenvalues of S(lambda) are enumerated
largest first, mu_1 >= mu_2 >= ... > 0.  Eigenvalues of the coupled
operators are the roots of

* oblique transmission H_alpha:  alpha lambda mu_n(S(lambda)) = 1,
* delta interaction Q_beta:      beta mu_n(S(lambda)) = -1,
* Dirac B_c (shifted by c^2/2):  alpha c^2 mu_n(Theta(lambda + c^2/2)) = 1,

each of which has one sign change on the search interval.  The roots are
bracketed, bisected and polished in the variable t = ln(-lambda), where the
characteristic functions are close to linear.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .errors import (
    BracketFailure,
    BranchUnresolved,
    GapEmpty,
    NonNegativeAlpha,
    NonNegativeBeta,
    NoBoundState,
    NotConverged,
    NotSymmetric,
    UnderResolved,
)
from .geometry import CurveMesh
from .layer_operators import (
    SlpMatrix,
    SpectralParameter,
    eval_potential,
    single_layer,
    theta_parameters,
)


class OperatorKind(str, Enum):
    OBLIQUE_H = "ObliqueH"
    DELTA_Q = "DeltaQ"
    DIRAC_B = "DiracB"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the bracketed root finder.

    Attributes
    ----------
    bracket_rel : float
        Relative bracket width (in lambda) at which bisection hands over to
        the secant polish.
    residual_tol : float
        Required |characteristic function| at the returned root.
    expansions : int
        Number of tenfold bracket expansions before giving up.
    threshold_margin : float
        Relative margin kept below the essential-spectrum threshold
        -beta^2/4 on broken lines.
    """

    bracket_rel: float = 1e-3
    residual_tol: float = 1e-10
    expansions: int = 6
    threshold_margin: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        for name in ("bracket_rel", "residual_tol", "threshold_margin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


DEFAULT_OPTIONS = SolverOptions()


@dataclass
class EigenResult:
    """One root of a characteristic equation.

    For ``DiracB`` the stored eigenvalue is the shifted value lambda; the
    Dirac eigenvalue itself is lambda + c^2/2.
    """

    operator: OperatorKind
    n: int
    coupling: tuple
    eigenvalue: float
    residual: float
    bracket: tuple
    mesh_id: str
    n_nodes: int
    descriptor: dict
    evaluations: int = 0
    density: np.ndarray | None = field(default=None, repr=False)

    @property
    def dirac_energy(self) -> float:
        if self.operator is not OperatorKind.DIRAC_B:
            raise AttributeError("only Dirac results carry a Dirac energy")
        c = self.coupling[1]
        return self.eigenvalue + 0.5 * c * c

    def to_dict(self, include_density: bool = True) -> dict:
        d = asdict(self)
        d["operator"] = self.operator.value
        d["coupling"] = list(self.coupling)
        d["bracket"] = list(self.bracket)
        if include_density and self.density is not None:
            d["density"] = np.asarray(self.density).tolist()
        else:
            d["density"] = None
        return d

    def to_json(self, include_density: bool = True) -> str:
        return json.dumps(self.to_dict(include_density), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EigenResult":
        d = dict(d)
        d["operator"] = OperatorKind(d["operator"])
        d["coupling"] = tuple(d["coupling"])
        d["bracket"] = tuple(d["bracket"])
        if d.get("density") is not None:
            d["density"] = np.asarray(d["density"], dtype=float)
        return cls(**d)

    CSV_HEADER = ("operator", "n", "coupling", "eigenvalue", "residual", "N", "descriptor")

    def csv_row(self) -> list:
        coupling = ";".join(repr(float(c)) for c in self.coupling)
        desc = json.dumps(self.descriptor, sort_keys=True, separators=(",", ":"))
        return [
            self.operator.value,
            self.n,
            coupling,
            repr(float(self.eigenvalue)),
            repr(float(self.residual)),
            self.n_nodes,
            desc,
        ]


@dataclass(frozen=True)
class SpectrumBranches:
    """Ordered eigenvalues mu_1 >= ... >= mu_k of S(lambda) on a grid."""

    lambdas: np.ndarray
    branches: np.ndarray  # shape (len(lambdas), n_tracked)
    n_tracked: int

    def branch(self, n: int) -> np.ndarray:
        return self.branches[:, n - 1]


# ---------------------------------------------------------------------------
# eigenvalues


def eigs_sym(matrix) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, nonincreasing (LAPACK syevd)."""
    a = matrix.entries if isinstance(matrix, SlpMatrix) else np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric("matrix must be square")
    if not np.array_equal(a, a.T):
        raise NotSymmetric("matrix is not exactly symmetric")
    return np.linalg.eigvalsh(a)[::-1]


def top_eigenvalues(mesh: CurveMesh, lam, k: int, sector: str = "both") -> np.ndarray:
    """The ``k`` largest eigenvalues of S(lambda) on ``mesh``."""
    return single_layer(mesh, sector).top(SpectralParameter(lam), k)


def spectrum_branches(mesh: CurveMesh, lambdas, n_tracked: int) -> SpectrumBranches:
    """Track mu_1..mu_k over a grid of lambda values.

    Values are ordered at every grid point; since each ordered eigenvalue is
    a continuous function of lambda this already yields continuous branches
    through crossings.
    """
    lams = np.sort(np.asarray(lambdas, dtype=float))
    rows = [top_eigenvalues(mesh, lam, n_tracked) for lam in lams]
    return SpectrumBranches(lams, np.array(rows), int(n_tracked))


# ---------------------------------------------------------------------------
# root finding


def _guard_index(mesh: CurveMesh, n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError("branch index must be a positive integer")
    if n > mesh.n_nodes // 4:
        raise BranchUnresolved(f"n={n} exceeds N/4={mesh.n_nodes // 4}")
    return int(n)


def _default_sector(mesh: CurveMesh, n: int) -> str:
    # the ground state of a mirror-symmetric curve is even (positive density)
    return "even" if (mesh.symmetric and n == 1) else "both"


class _Counter:
    def __init__(self, f):
        self.f = f
        self.calls = 0

    def __call__(self, t):
        self.calls += 1
        return self.f(t)


def _bracketed_root(
    F: Callable[[float], float],
    t_lo: float,
    t_hi: float,
    f_lo: float,
    f_hi: float,
    opts: SolverOptions,
):
    """Root of F on [t_lo, t_hi] given F(t_hi) > 0 > F(t_lo) or vice versa.

    Bisection until (exp(hi - lo) - 1) <= bracket_rel, i.e. the lambda
    bracket is relatively that narrow, then safeguarded secant steps that
    keep the bracket valid.  Returns (t, F(t), (t_a, t_b)) where the
    bracket is the latest sign-change interval holding t strictly inside.
    """
    a, b, fa, fb = t_lo, t_hi, f_lo, f_hi
    history = [(a, b)]
    if fa == 0 or fb == 0:
        raise BracketFailure("bracket endpoint is an exact root; shift the bracket")
    for _ in range(opts.max_iter):
        if math.expm1(abs(b - a)) <= opts.bracket_rel:
            break
        m = 0.5 * (a + b)
        fm = F(m)
        if fm == 0:
            return m, fm, (a, b)
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm
        history.append((a, b))
    # secant polish from the better endpoint, staying inside [a, b]
    x0, f0 = (a, fa) if abs(fa) < abs(fb) else (b, fb)
    x1, f1 = (b, fb) if x0 == a else (a, fa)
    best = (x0, f0)
    for _ in range(opts.max_iter):
        if abs(best[1]) <= opts.residual_tol:
            break
        if f1 != f0:
            x = x0 - f0 * (x0 - x1) / (f0 - f1)
        else:
            x = 0.5 * (a + b)
        if not (min(a, b) <= x <= max(a, b)):
            x = 0.5 * (a + b)
        fx = F(x)
        if fx == 0:
            best = (x, fx)
            break
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        history.append((a, b))
        x1, f1 = x0, f0
        x0, f0 = x, fx
        if abs(fx) < abs(best[1]):
            best = (x, fx)
        if abs(b - a) <= 4 * np.finfo(float).eps * max(abs(a), abs(b), 1.0):
            break
    if abs(best[1]) > opts.residual_tol:
        raise BracketFailure(
            f"root polish stalled with residual {abs(best[1]):.3e} > {opts.residual_tol:.1e}"
        )
    t = best[0]
    for lo, hi in reversed(history):
        if min(lo, hi) < t < max(lo, hi):
            return t, best[1], (lo, hi)
    raise BracketFailure("root is not interior to any recorded bracket")


def _lam(t: float) -> float:
    return -math.exp(t)


def _solve(
    mesh: CurveMesh,
    kind: OperatorKind,
    n: int,
    coupling: tuple,
    char: Callable[[float, int], float],
    lam_lo: float,
    lam_hi: float,
    opts: SolverOptions,
    sector: str,
    no_root_error,
    expand_hi: bool = True,
    expand_lo: bool = True,
) -> EigenResult:
    """Generic driver; ``char(lam)`` is positive for deep lambda."""
    lo, hi = lam_lo, lam_hi
    F = _Counter(lambda t: char(_lam(t)))
    t_lo, t_hi = math.log(-lo), math.log(-hi)
    f_deep = F(t_lo)
    f_shallow = F(t_hi)
    for _ in range(opts.expansions):
        if f_deep > 0 and f_shallow < 0:
            break
        if not f_deep > 0 and expand_lo:
            t_lo += math.log(10.0)
            f_deep = F(t_lo)
        if not f_shallow < 0 and expand_hi:
            t_hi -= math.log(10.0)
            f_shallow = F(t_hi)
        if not (expand_lo or expand_hi):
            break
    if not (f_deep > 0 and f_shallow < 0):
        if not f_shallow < 0:
            raise no_root_error(
                f"characteristic function has no sign change for {kind.value} n={n}"
            )
        raise BracketFailure(f"could not bracket the {kind.value} root n={n}")
    t, ft, (ta, tb) = _bracketed_root(F, t_hi, t_lo, f_shallow, f_deep, opts)
    lam = _lam(t)
    bracket = tuple(sorted((_lam(ta), _lam(tb))))
    return EigenResult(
        operator=kind,
        n=n,
        coupling=coupling,
        eigenvalue=lam,
        residual=abs(ft),
        bracket=bracket,
        mesh_id=mesh.mesh_hash,
        n_nodes=mesh.n_nodes,
        descriptor=mesh.descriptor.to_dict(),
        evaluations=F.calls,
    )


# trapezoidal (Kress) circles lose accuracy abruptly beyond this kappa * h:
# relative error ~1e-8 at 0.25, ~1e-4 at 0.5 and O(1) at 1
KRESS_MAX_KH = 0.5


def _check_root_resolution(mesh: CurveMesh, lam_slp: float) -> None:
    if mesh.quadrature != "trapezoid":
        return
    kh = math.sqrt(-lam_slp) * mesh.descriptor.total_length() / mesh.n_nodes
    if kh > KRESS_MAX_KH:
        raise UnderResolved(
            f"root needs kappa h = {kh:.3g} > {KRESS_MAX_KH} on the trapezoidal mesh; "
            f"use at least {math.ceil(mesh.n_nodes * kh / KRESS_MAX_KH)} nodes"
        )


def _attach_density(mesh, result: EigenResult, lam_slp: float, sector: str):
    _, v = single_layer(mesh, sector).top(SpectralParameter(lam_slp), result.n, vectors=True)
    g = v[:, result.n - 1]
    # fix the sign so the density has positive mean
    if np.sum(g * mesh.weights) < 0:
        g = -g
    result.density = g
    return result


def _mu(mesh, lam, n, sector):
    return single_layer(mesh, sector).top(SpectralParameter(lam), n)[n - 1]


def solve_h_alpha(
    mesh: CurveMesh,
    alpha: float,
    n: int = 1,
    options: SolverOptions | None = None,
    sector: str | None = None,
    density: bool = False,
) -> EigenResult:
    """n-th eigenvalue of the oblique-transmission operator H_alpha.

    Solves alpha lambda mu_n(S(lambda)) = 1; ``alpha`` must be negative
    (there is no discrete spectrum for alpha >= 0).
    """
    if not alpha < 0:
        raise NonNegativeAlpha("H_alpha has no negative eigenvalues for alpha >= 0")
    n = _guard_index(mesh, n)
    opts = options or DEFAULT_OPTIONS
    sec = sector or _default_sector(mesh, n)
    a = float(alpha)
    lo = -((10.0 / abs(a)) ** 2)
    hi = -1e-6 * max(1.0, 1.0 / a**2)

    def char(lam):
        return a * lam * _mu(mesh, lam, n, sec) - 1.0

    res = _solve(mesh, OperatorKind.OBLIQUE_H, n, (a,), char, lo, hi, opts, sec, BracketFailure)
    _check_root_resolution(mesh, res.eigenvalue)
    return _attach_density(mesh, res, res.eigenvalue, sec) if density else res


def solve_q_beta(
    mesh: CurveMesh,
    beta: float,
    n: int = 1,
    options: SolverOptions | None = None,
    sector: str | None = None,
    density: bool = False,
) -> EigenResult:
    """n-th eigenvalue of the delta-interaction operator Q_beta.

    Solves beta mu_n(S(lambda)) = -1.  On a truncated broken line the search
    stays below the essential-spectrum threshold -beta^2/4 of the infinite
    curve.
    """
    if not beta < 0:
        raise NonNegativeBeta("Q_beta needs beta < 0")
    n = _guard_index(mesh, n)
    opts = options or DEFAULT_OPTIONS
    sec = sector or _default_sector(mesh, n)
    b = float(beta)
    lo = -((10.0 * abs(b)) ** 2)
    hi = -1e-6 * max(1.0, b * b)
    expand_hi = True
    if mesh.descriptor.kind == "broken_line":
        hi = -0.25 * b * b * (1.0 + opts.threshold_margin)
        expand_hi = False

    def char(lam):
        return b * _mu(mesh, lam, n, sec) + 1.0

    res = _solve(
        mesh, OperatorKind.DELTA_Q, n, (b,), char, lo, hi, opts, sec, NoBoundState,
        expand_hi=expand_hi,
    )
    _check_root_resolution(mesh, res.eigenvalue)
    return _attach_density(mesh, res, res.eigenvalue, sec) if density else res


def solve_dirac(
    mesh: CurveMesh,
    alpha: float,
    c: float,
    n: int = 1,
    options: SolverOptions | None = None,
    sector: str | None = None,
) -> EigenResult:
    """Shifted n-th eigenvalue of the Dirac operator with speed ``c``.

    With E = lambda + c^2/2 the Theta matrix is p(E) S(nu) where
    p(E) = (1/c)(E/c - c/2) < 0 and nu = E^2/c^2 - c^2/4 < 0.  Because
    alpha c^2 p(E) > 0 for alpha < 0, the n-th eigenvalue of alpha c^2 Theta
    is alpha c^2 p(E) times the n-th largest eigenvalue of S(nu).  The root
    is searched for lambda in (-c^2/2, 0), the upper half of the gap.
    """
    if not alpha < 0:
        raise NonNegativeAlpha("the Dirac characteristic equation needs alpha < 0")
    if not c > 0:
        raise ValueError("c must be > 0")
    n = _guard_index(mesh, n)
    opts = options or DEFAULT_OPTIONS
    sec = sector or _default_sector(mesh, n)
    a, cc = float(alpha), float(c)
    half_gap = 0.5 * cc * cc

    def char(lam):
        E = lam + half_gap
        pref, nu = theta_parameters(E, cc)
        return a * cc * cc * pref * _mu(mesh, nu, n, sec) - 1.0

    deep = -half_gap * (1.0 - 1e-12)
    if not deep < -1e-300:
        raise GapEmpty("spectral gap is empty")
    shallow = -1e-6 * max(1.0, 1.0 / a**2)
    if not shallow > deep:
        raise GapEmpty("search window (-c^2/2, 0) is empty at this resolution")
    if not char(deep) > 0:
        raise GapEmpty(f"no Dirac root in the search window for c={cc}")
    res = _solve(
        mesh, OperatorKind.DIRAC_B, n, (a, cc), char, deep, shallow, opts, sec,
        BracketFailure, expand_lo=False,
    )
    _check_root_resolution(mesh, theta_parameters(res.eigenvalue + half_gap, cc)[1])
    return res


def characteristic_residual(mesh: CurveMesh, result: EigenResult) -> float:
    """Re-evaluate |characteristic function| at the stored root."""
    lam, n = result.eigenvalue, result.n
    sec = _default_sector(mesh, n)
    if result.operator is OperatorKind.OBLIQUE_H:
        return abs(result.coupling[0] * lam * _mu(mesh, lam, n, sec) - 1.0)
    if result.operator is OperatorKind.DELTA_Q:
        return abs(result.coupling[0] * _mu(mesh, lam, n, sec) + 1.0)
    a, c = result.coupling
    pref, nu = theta_parameters(lam + 0.5 * c * c, c)
    return abs(a * c * c * pref * _mu(mesh, nu, n, sec) - 1.0)


def reconstruct_eigenfunction(mesh: CurveMesh, result: EigenResult, grid) -> np.ndarray:
    """Eigenfunction values at off-curve points, unit discrete l2 norm.

    Q_beta: S(lambda) phi.  H_alpha: -2 dbar S(lambda) phi (complex valued).
    """
    if result.operator is OperatorKind.DIRAC_B:
        raise ValueError("eigenfunction reconstruction covers H_alpha and Q_beta")
    if result.residual > DEFAULT_OPTIONS.residual_tol:
        raise NotConverged("result residual above tolerance")
    if result.density is None:
        sec = _default_sector(mesh, result.n)
        _attach_density(mesh, result, result.eigenvalue, sec)
    pot = eval_potential(mesh, result.density, result.eigenvalue, grid)
    u = pot.single_layer if result.operator is OperatorKind.DELTA_Q else pot.wirtinger
    norm = np.sqrt(np.sum(np.abs(u) ** 2))
    return u / norm


def pde_residual(mesh: CurveMesh, result: EigenResult, points, h: float = 1e-3) -> float:
    """Relative 5-point finite-difference residual of (-Delta - lambda) u.

    ``u`` is the reconstructed eigenfunction; the residual is
    max |(-Delta_h - lambda) u| / max |lambda u| over ``points``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    offsets = np.array([[0, 0], [h, 0], [-h, 0], [0, h], [0, -h]])
    stencil = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    if result.density is None:
        _attach_density(mesh, result, result.eigenvalue, _default_sector(mesh, result.n))
    pot = eval_potential(mesh, result.density, result.eigenvalue, stencil)
    u = pot.single_layer if result.operator is OperatorKind.DELTA_Q else pot.wirtinger
    u = u.reshape(-1, 5)
    lap = (u[:, 1] + u[:, 2] + u[:, 3] + u[:, 4] - 4 * u[:, 0]) / (h * h)
    lam = result.eigenvalue
    return float(np.max(np.abs(-lap - lam * u[:, 0])) / np.max(np.abs(lam * u[:, 0])))
