"""Coupling sweeps, leading-constant fits and the corner constant.

Strong-coupling laws are fitted in the common form

    eigenvalue = C / s^2 + R(s),

where s = alpha for H_alpha and s = 1/beta for Q_beta, by ordinary least
squares of eigenvalue * s^2 against s^2 (intercept C, slope = the O(1)
remainder coefficient).
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import HypothesisViolated, NoBoundState, NotConverged, UnderResolved
from .geometry import DEFAULT_PANEL_ORDER, CurveMesh, build_broken_line
from .spectral_solver import (
    EigenResult,
    SolverOptions,
    solve_h_alpha,
    solve_q_beta,
)

NODES_PER_LAYER = 6


def max_node_spacing(mesh: CurveMesh) -> float:
    """Largest mean node spacing over the panels of a mesh."""
    return float(np.max(mesh.panel_lengths / mesh.panel_order))


def resolution_floor(mesh: CurveMesh, width: float) -> bool:
    """Whether the mesh has >= 6 nodes per boundary-layer ``width``."""
    return max_node_spacing(mesh) <= width / NODES_PER_LAYER


def _check_resolution(mesh: CurveMesh, width: float):
    h = max_node_spacing(mesh)
    if h > width / NODES_PER_LAYER:
        raise UnderResolved(
            f"node spacing {h:.3g} exceeds boundary-layer width {width:.3g} / "
            f"{NODES_PER_LAYER}; refine the mesh"
        )


def _check_grid(grid, name: str) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or len(g) < 4:
        raise ValueError(f"{name} grid needs at least 4 points")
    if np.any(~(g < 0)):
        raise ValueError(f"{name} grid must be negative")
    return g


@dataclass
class AsymptoticFit:
    """Least-squares fit of eigenvalue = C / s^2 + R(s).

    Attributes
    ----------
    kind : {"alpha", "beta"}
    samples : list of (coupling, eigenvalue)
    C : float
        Fitted leading constant (intercept of eigenvalue * s^2 vs s^2).
    slope : float
        Fitted remainder coefficient.
    stderr : float
        Ordinary least-squares standard error of C.
    remainder : list of float
        R = eigenvalue - C / s^2 at each sample.
    n_nodes : int
    L : float or None
        Truncation length of the mesh, if any.
    """

    kind: str
    n: int
    samples: list
    C: float
    slope: float
    stderr: float
    remainder: list
    n_nodes: int
    L: float | None = None
    results: list = field(default_factory=list, repr=False)

    @property
    def remainder_norm(self) -> float:
        return float(np.max(np.abs(self.remainder)))

    @property
    def grid(self) -> list:
        return [s[0] for s in self.samples]

    @property
    def deep_half_C(self) -> float:
        """C refitted on the deeper half of the grid (at least two samples)."""
        k = max(2, len(self.samples) // 2)
        tail = self.samples[-k:]
        return fit_leading_constant(self.kind, [c for c, _ in tail], [e for _, e in tail])[0]

    @property
    def error_estimate(self) -> float:
        """stderr plus the shift of C under refitting on the deeper half.

        The second term captures the bias from remainder terms the
        two-parameter model leaves out, which dominates the OLS error.
        """
        return self.stderr + abs(self.C - self.deep_half_C)

    def scaled_eigenvalues(self) -> np.ndarray:
        """eigenvalue * s^2 per sample, the quantity whose limit is C."""
        return np.array([_scaled(self.kind, c, e) for c, e in self.samples])

    def report(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "C": self.C,
            "slope": self.slope,
            "stderr": self.stderr,
            "error_estimate": self.error_estimate,
            "remainder_norm": self.remainder_norm,
            "remainder": list(self.remainder),
            "grid": self.grid,
            "N": self.n_nodes,
            "L": self.L,
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), sort_keys=True)

    CSV_HEADER = ("coupling", "eigenvalue", "scaled_eigenvalue", "N", "L")

    def csv_rows(self) -> list:
        L = "" if self.L is None else repr(float(self.L))
        return [
            [repr(float(c)), repr(float(e)), repr(float(_scaled(self.kind, c, e))), self.n_nodes, L]
            for c, e in self.samples
        ]


def _s(kind: str, coupling: float) -> float:
    return coupling if kind == "alpha" else 1.0 / coupling


def _scaled(kind: str, coupling: float, eig: float) -> float:
    return eig * _s(kind, coupling) ** 2


def fit_leading_constant(kind: str, couplings, eigenvalues):
    """OLS of eigenvalue * s^2 on s^2; returns (C, slope, stderr, remainder)."""
    s2 = np.array([_s(kind, c) ** 2 for c in couplings])
    y = np.array([_scaled(kind, c, e) for c, e in zip(couplings, eigenvalues)])
    X = np.column_stack([np.ones_like(s2), s2])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    C, slope = float(coef[0]), float(coef[1])
    dof = len(y) - 2
    resid = y - X @ coef
    if dof > 0:
        sigma2 = float(resid @ resid) / dof
        cov = sigma2 * np.linalg.inv(X.T @ X)
        stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        stderr = 0.0
    remainder = [float(e - C / (_s(kind, c) ** 2)) for c, e in zip(couplings, eigenvalues)]
    return C, slope, stderr, remainder


def _map(fn, items, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _truncation(mesh):
    return mesh.descriptor.truncation


def sweep_alpha(
    mesh: CurveMesh,
    n: int,
    alpha_grid,
    options: SolverOptions | None = None,
    threads: int = 1,
) -> AsymptoticFit:
    """Solve H_alpha on a grid alpha -> 0- and fit lambda_n = C / alpha^2 + R."""
    grid = _check_grid(alpha_grid, "alpha")
    mags = np.abs(grid)
    if np.any(np.diff(mags) >= 0):
        raise ValueError("alpha grid must decrease in magnitude")
    _check_resolution(mesh, float(mags.min()))
    results: list[EigenResult] = _map(
        lambda a: solve_h_alpha(mesh, float(a), n, options), grid, threads
    )
    eigs = [r.eigenvalue for r in results]
    C, slope, se, rem = fit_leading_constant("alpha", grid, eigs)
    return AsymptoticFit(
        "alpha", n, [(float(a), e) for a, e in zip(grid, eigs)], C, slope, se, rem,
        mesh.n_nodes, _truncation(mesh), results,
    )


def sweep_beta(
    mesh: CurveMesh,
    n: int,
    beta_grid,
    options: SolverOptions | None = None,
    threads: int = 1,
) -> AsymptoticFit:
    """Solve Q_beta on a grid beta -> -inf and fit mu_n = C beta^2 + R."""
    grid = _check_grid(beta_grid, "beta")
    mags = np.abs(grid)
    if np.any(np.diff(mags) <= 0):
        raise ValueError("beta grid must increase in magnitude")
    _check_resolution(mesh, 1.0 / float(mags.max()))
    results = _map(lambda b: solve_q_beta(mesh, float(b), n, options), grid, threads)
    eigs = [r.eigenvalue for r in results]
    C, slope, se, rem = fit_leading_constant("beta", grid, eigs)
    return AsymptoticFit(
        "beta", n, [(float(b), e) for b, e in zip(grid, eigs)], C, slope, se, rem,
        mesh.n_nodes, _truncation(mesh), results,
    )


# ---------------------------------------------------------------------------
# corner constant


@dataclass(frozen=True)
class CornerPolicy:
    """Truncation and resolution schedule for the broken-line constant.

    Lengths are in units where beta = -1.  Each leg of length L is meshed
    with grading exponent ``q`` over the first ``zone`` fraction and uniform
    panels of length about ``far_panel`` beyond it.  The schedule starts at
    ``lengths`` and keeps doubling L up to ``max_length`` while a level has
    no bound state below the threshold or the last step changed b by more
    than ``step_tol`` (relative).
    """

    lengths: tuple = (20.0, 40.0, 80.0)
    max_length: float = 640.0
    far_panel: float = 1.0
    q: float = 3.0
    zone: float = 0.1
    panel_order: int = DEFAULT_PANEL_ORDER
    tol: float = 1e-4
    step_tol: float = 1e-4

    def n_nodes(self, L: float, refine: int = 1) -> int:
        eff = L * (1 - self.zone + self.q * self.zone) if self.q > 1 else L
        panels = max(2, math.ceil(eff / self.far_panel)) * refine
        return 2 * self.panel_order * panels


@dataclass
class CornerConstant:
    """b_theta = -mu_1(Q_{-1}) on the infinite broken line.

    ``table`` rows are (L, N, b(L, N)) for the levels that carry a bound
    state; ``refined`` is b at the last L with doubled resolution.
    """

    theta: float
    b_theta: float
    error_estimate: float
    table: list
    refined: float
    extrapolated: bool
    decay_rate: float | None

    @property
    def last_step_change(self) -> float:
        """Relative change of b between the last two schedule levels."""
        b1, b2 = self.table[-2][2], self.table[-1][2]
        return abs(b2 - b1) / abs(b2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["table"] = [list(row) for row in self.table]
        return d


def broken_line_b(theta: float, L: float, n_nodes: int, policy: CornerPolicy,
                  options: SolverOptions | None = None) -> float:
    """-mu_1(Q_{-1}) on the broken line truncated at leg length L."""
    mesh = build_broken_line(theta, L, n_nodes, policy.q, policy.panel_order, policy.zone)
    res = solve_q_beta(mesh, -1.0, 1, options)
    return -res.eigenvalue


def extrapolate_exponential(Ls, bs):
    """Fit b(L) = b_inf - c exp(-gamma L) through the points L, 2L, 4L.

    Returns (b_inf, gamma), or (last value, None) when the differences do
    not follow a decaying exponential (converged to noise level).
    """
    L1, L2, L3 = Ls[-3:]
    b1, b2, b3 = bs[-3:]
    d1, d2 = b2 - b1, b3 - b2
    if not (np.isclose(L2, 2 * L1) and np.isclose(L3, 4 * L1)):
        raise ValueError("extrapolation needs the schedule L, 2L, 4L")
    if d1 == 0 or not 0 < d2 / d1 < 2:
        return b3, None
    rho = d2 / d1  # = x (1 + x) with x = exp(-gamma L1)
    x = 0.5 * (-1 + math.sqrt(1 + 4 * rho))
    if not 0 < x < 1:
        return b3, None
    return b3 + d2 * x * x / (1 - x * x), -math.log(x) / L1


def corner_constant(
    theta: float,
    policy: CornerPolicy | None = None,
    options: SolverOptions | None = None,
) -> CornerConstant:
    """Corner constant b_theta from truncated broken lines.

    Solves the ground state of Q_{-1} on each truncation length of the
    schedule, extrapolates the exponentially small truncation error from
    the last three levels, and checks resolution by repeating the last
    length with doubled panel count.  The error estimate is the size of
    the extrapolation correction (or the last-step change when the data
    are at noise level) plus the resolution change plus the root-finding
    floor.
    """
    pol = policy or CornerPolicy()
    opts = options or SolverOptions()
    L = float(pol.lengths[0])
    pending = [float(x) for x in pol.lengths]
    table = []
    while True:
        L = pending.pop(0) if pending else 2 * table[-1][0] if table else 2 * L
        if L > pol.max_length:
            break
        N = pol.n_nodes(L)
        try:
            table.append((L, N, broken_line_b(theta, L, N, pol, opts)))
        except NoBoundState:
            table.clear()
            continue
        if pending or len(table) < 3:
            continue
        b1, b2 = table[-2][2], table[-1][2]
        if abs(b2 - b1) / abs(b2) <= pol.step_tol:
            break
    if len(table) < 2:
        raise NotConverged(
            f"no bound state below the threshold up to L = {pol.max_length:g}"
        )
    Ls = [row[0] for row in table]
    bs = [row[2] for row in table]
    N2 = pol.n_nodes(Ls[-1], refine=2)
    refined = broken_line_b(theta, Ls[-1], N2, pol, opts)
    if len(Ls) >= 3:
        b_inf, gamma = extrapolate_exponential(Ls, bs)
    else:
        b_inf, gamma = bs[-1], None
    trunc_err = abs(b_inf - bs[-1]) if gamma is not None else abs(bs[-1] - bs[-2])
    err = trunc_err + abs(refined - bs[-1]) + opts.residual_tol
    result = CornerConstant(
        float(theta), float(b_inf), float(err), table, float(refined), gamma is not None,
        gamma,
    )
    if err > pol.tol or result.last_step_change > pol.step_tol:
        raise NotConverged(
            f"corner constant error estimate {err:.2e} (last step "
            f"{result.last_step_change:.2e}) above tolerance after L = {Ls[-1]:g}"
        )
    return result


# ---------------------------------------------------------------------------
# transfer between Q_beta and H_alpha bounds


@dataclass
class TransferRow:
    alpha: float
    eigenvalue: float
    lower: float
    upper: float
    margin_lower: float
    margin_upper: float
    holds: bool


@dataclass
class TransferReport:
    """Two-sided bounds -b/(a^2 alpha^2) <= lambda_n(H_alpha) <= -a/(b^2 alpha^2).

    ``hypothesis`` lists, for every beta of the matched grid
    (beta = 1/(a alpha) and 1/(b alpha)), whether -b beta^2 <= mu_n(Q_beta)
    <= -a beta^2 held; ``hypothesis_violated`` is the reported (non-fatal)
    failure flag.
    """

    a: float
    b: float
    n: int
    rows: list
    hypothesis: list
    hypothesis_violated: bool

    @property
    def all_hold(self) -> bool:
        return all(r.holds for r in self.rows)

    @property
    def min_margin(self) -> float:
        return min(min(r.margin_lower, r.margin_upper) for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "n": self.n,
            "rows": [asdict(r) for r in self.rows],
            "hypothesis": self.hypothesis,
            "hypothesis_violated": self.hypothesis_violated,
            "all_hold": self.all_hold,
        }


def transfer_bounds(a: float, b: float, alpha: float) -> tuple[float, float]:
    """(lower, upper) bound on lambda_n(H_alpha) from a, b."""
    return -b / (a * a * alpha * alpha), -a / (b * b * alpha * alpha)


def transfer_check(
    mesh: CurveMesh,
    n: int,
    a: float,
    b: float,
    alpha_grid,
    options: SolverOptions | None = None,
    threads: int = 1,
) -> TransferReport:
    """Verify the H_alpha bounds implied by -b beta^2 <= mu_n(Q_beta) <= -a beta^2."""
    if not (0 < a <= b):
        raise ValueError("need 0 < a <= b")
    grid = np.asarray(alpha_grid, dtype=float)
    if np.any(~(grid < 0)):
        raise ValueError("alpha grid must be negative")
    hyp = []
    betas = sorted({1.0 / (a * al) for al in grid} | {1.0 / (b * al) for al in grid})
    for be in betas:
        mu = solve_q_beta(mesh, be, n, options).eigenvalue
        ok = -b * be * be <= mu <= -a * be * be
        hyp.append({"beta": be, "eigenvalue": mu, "holds": bool(ok)})
    results = _map(lambda al: solve_h_alpha(mesh, float(al), n, options), grid, threads)
    rows = []
    for al, res in zip(grid, results):
        lo, hi = transfer_bounds(a, b, al)
        lam = res.eigenvalue
        rows.append(
            TransferRow(float(al), lam, lo, hi, lam - lo, hi - lam, bool(lo <= lam <= hi))
        )
    violated = not all(h["holds"] for h in hyp)
    if violated:
        warnings.warn(
            "matched-grid bounds -b beta^2 <= mu_n <= -a beta^2 fail on part of the grid",
            HypothesisViolated,
            stacklevel=2,
        )
    return TransferReport(a, b, n, rows, hyp, violated)
