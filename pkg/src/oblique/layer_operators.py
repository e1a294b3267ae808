"""Nystrom discretisation of the single-layer operator S(lambda), lambda < 0.

The kernel is (1/2pi) K0(kappa |x - y|) with kappa = sqrt(-lambda).  Two
discretisations are provided:

* trapezoidal meshes on the circle use Kress's logarithmic splitting
  K0 = M1 ln(4 sin^2(tau/2)) + M2 with spectral log-weights.  For large
  kappa R the analytic factor I0 in M1 grows exponentially, so the split is
  applied only inside a smooth window of width ~16/kappa around the
  diagonal (outside it K0 itself is smooth and tiny).  The matrix is
  circulant, so its spectrum is the FFT of one row.

* Gauss-Legendre panel meshes use product integration on the self panel
  (exact Legendre moments of ln|u - a| against an interpolant on 32
  auxiliary points), adaptive bisection for targets close to a source panel,
  and the plain panel rule elsewhere.

All matrices are returned in the measure-symmetric form
D^{1/2} A D^{-1/2} (D the weights), which is isospectral to the Nystrom
matrix A and is symmetrised exactly.  Every kappa-independent quantity
(distances, auxiliary points, near-field sub-quadratures) is computed once
per mesh by :class:`PanelNystrom`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special as sp
from scipy.linalg import circulant, eigh
from scipy.sparse.linalg import ArpackError, eigsh

from .cache import active_cache
from .errors import (
    MeshTooSmall,
    NonNegativeLambda,
    OutsideGap,
    PointTooCloseToCurve,
)
from .geometry import CurveMesh

TWO_PI = 2 * np.pi
EULER_GAMMA = np.euler_gamma
KRESS_WINDOW = 16.0
AUX_ORDER = 32
NEAR_RATIO = 1.0
NEAR_ORDER = 16
DENSE_EIG_LIMIT = 700
# kappa * panel length above which self panels switch to the graded rule;
# the global split K0 = (K0 + I0 ln) - I0 ln cancels like exp(kappa r) * eps
GRADED_KR = 2.0


@dataclass(frozen=True)
class SpectralParameter:
    """Negative real spectral parameter with kappa = sqrt(-lambda)."""

    value: float

    def __post_init__(self):
        if isinstance(self.value, complex) or np.iscomplexobj(self.value):
            raise NonNegativeLambda("complex spectral parameters are not supported")
        v = float(self.value)
        if not v < 0:
            raise NonNegativeLambda(f"lambda must be < 0, got {v}")
        object.__setattr__(self, "value", v)

    @property
    def kappa(self) -> float:
        return float(np.sqrt(-self.value))


def _as_parameter(lam) -> SpectralParameter:
    return lam if isinstance(lam, SpectralParameter) else SpectralParameter(lam)


@dataclass(frozen=True, eq=False)
class SlpMatrix:
    """Symmetric Nystrom matrix of S(lambda) on a mesh."""

    entries: np.ndarray
    parameter: SpectralParameter
    mesh_id: str

    @property
    def size(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True, eq=False)
class ThetaMatrix:
    """Dirac Birman-Schwinger matrix (1/c)(E/c - c/2) S(E^2/c^2 - c^2/4)."""

    entries: np.ndarray
    energy: float
    c: float
    prefactor: float
    laplace_parameter: SpectralParameter
    mesh_id: str


# ---------------------------------------------------------------------------
# eigen helpers shared by both discretisations


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def top_eigh(a: np.ndarray, k: int, vectors: bool = False):
    """Largest ``k`` eigenpairs of a symmetric matrix, nonincreasing."""
    n = a.shape[0]
    k = min(k, n)
    if n <= DENSE_EIG_LIMIT or k > n // 8:
        w, v = eigh(a, subset_by_index=[n - k, n - 1])
    else:
        # fixed pseudo-random start keeps runs reproducible; a constant vector
        # can sit in an invariant subspace and break the Arnoldi process
        v0 = np.random.default_rng(n).standard_normal(n)
        try:
            w, v = eigsh(a, k=k, which="LA", v0=v0, tol=0.0, ncv=min(n, max(2 * k + 1, 24)))
        except ArpackError:
            w, v = eigh(a, subset_by_index=[n - k, n - 1])
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]
    return (w, v) if vectors else w


# ---------------------------------------------------------------------------
# circle: Kress splitting on the trapezoidal grid


def _window(tau: np.ndarray, width: float) -> np.ndarray:
    """C-infinity cutoff: 1 at tau = 0, 0 for |tau| >= width, flat at 0."""
    x = np.clip(np.abs(tau) / width, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(x < 1, np.exp(-1.0 / np.maximum(1 - x, 1e-300)), 0.0)
        f1 = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
    return f0 / (f0 + f1)


def _kress_log_weights(n_nodes: int) -> np.ndarray:
    """Weights R_j with sum_j R_j f(t_j) ~ int_0^{2pi} ln(4 sin^2((t_0-s)/2)) f(s) ds."""
    N = n_nodes
    n = N // 2
    coef = np.zeros(N)
    m = np.arange(1, n)
    coef[m] = 1.0 / m
    cos_sum = N * np.fft.ifft(coef).real
    sign = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    return -(TWO_PI / n) * cos_sum - (np.pi / n**2) * sign


class KressCircle:
    """Single-layer operator on a trapezoidal circle mesh."""

    def __init__(self, mesh: CurveMesh):
        self.mesh = mesh
        self.N = mesh.n_nodes
        self.R = mesh.descriptor.radius
        self.tau = TWO_PI * np.arange(self.N) / self.N
        self.log_weights = _kress_log_weights(self.N)
        self.log_sin = np.zeros(self.N)
        self.log_sin[1:] = np.log(4 * np.sin(self.tau[1:] / 2) ** 2)
        self.chord = 2 * self.R * np.abs(np.sin(self.tau / 2))

    def row(self, lam) -> np.ndarray:
        """First row of the (circulant, symmetric) Nystrom matrix."""
        kap = _as_parameter(lam).kappa
        R, N = self.R, self.N
        kr = kap * self.chord
        width = KRESS_WINDOW / (kap * R)
        if width >= np.pi:
            chi = np.ones(N)
        else:
            tau = np.minimum(self.tau, TWO_PI - self.tau)
            chi = _window(tau, width)
        m1 = np.zeros(N)
        m2 = np.zeros(N)
        live = chi > 0
        live[0] = False
        m1[live] = -0.5 * sp.i0(kr[live]) * chi[live]
        off = np.arange(1, N)
        m2[off] = sp.k0(kr[off]) - m1[off] * self.log_sin[off]
        m1[0] = -0.5
        m2[0] = -np.log(kap * R / 2) - EULER_GAMMA
        return (R / TWO_PI) * (self.log_weights * m1 + (TWO_PI / N) * m2)

    def matrix(self, lam) -> np.ndarray:
        r = self.row(lam)
        # circulant() builds columns from its argument; the row is even in j
        return _symmetrize(circulant(r))

    def eigenvalues(self, lam) -> np.ndarray:
        """All eigenvalues, nonincreasing (FFT of the symmetric first row)."""
        return np.sort(np.fft.fft(self.row(lam)).real)[::-1]

    def mode_order(self, lam) -> np.ndarray:
        """Fourier indices sorted by decreasing eigenvalue."""
        spec = np.fft.fft(self.row(lam)).real
        return np.argsort(-spec, kind="stable"), spec

    def top(self, lam, k: int, vectors: bool = False):
        order, spec = self.mode_order(lam)
        sel = order[:k]
        w = spec[sel]
        if not vectors:
            return w
        t = self.tau
        vecs = np.empty((self.N, len(sel)))
        seen: set[int] = set()
        for col, idx in enumerate(sel):
            m = min(idx, self.N - idx)
            partner = m in seen
            seen.add(m)
            v = np.sin(m * t) if (partner and m and 2 * m != self.N) else np.cos(m * t)
            vecs[:, col] = v / np.linalg.norm(v)
        return w, vecs


# ---------------------------------------------------------------------------
# panels: product integration and near-field refinement


def _lagrange_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """L[k, j] = l_j(x_k) for the Lagrange basis on ``nodes``."""
    diff = x[:, None] - nodes[None, :]
    bw = 1.0 / np.prod(nodes[:, None] - nodes[None, :] + np.eye(len(nodes)), axis=1)
    exact = np.isclose(diff, 0.0, atol=1e-15)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = bw[None, :] / diff
        out = t / t.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        out[hit] = exact[hit].astype(float)
    return out


def legendre_log_moments(a: np.ndarray, degree: int) -> np.ndarray:
    """m_n(a) = int_{-1}^{1} ln|u - a| P_n(u) du for n = 0..degree, |a| < 1.

    Uses m_n = (Q_{n+1}(a) - Q_{n-1}(a)) / (n + 1/2) for n >= 1 with the
    Legendre functions of the second kind Q_n, and the closed form for n = 0.
    """
    a = np.asarray(a, dtype=float)
    Q = np.empty((degree + 2,) + a.shape)
    Q[0] = 0.5 * np.log((1 + a) / (1 - a))
    Q[1] = a * Q[0] - 1.0
    for n in range(1, degree + 1):
        Q[n + 1] = ((2 * n + 1) * a * Q[n] - n * Q[n - 1]) / (n + 1)
    m = np.empty((degree + 1,) + a.shape)
    m[0] = (1 - a) * np.log(1 - a) + (1 + a) * np.log(1 + a) - 2.0
    for n in range(1, degree + 1):
        m[n] = (Q[n + 1] - Q[n - 1]) * 2.0 / (2 * n + 1)
    return m


def _log_weights(a: np.ndarray, v: np.ndarray, wv: np.ndarray) -> np.ndarray:
    """omega[i, k] with sum_k omega[i,k] f(v_k) ~ int ln|u - a_i| f(u) du."""
    M = len(v)
    mom = legendre_log_moments(a, M - 1)  # (M, len(a))
    P = np.polynomial.legendre.legvander(v, M - 1)  # P[k, n] = P_n(v_k)
    scale = (2 * np.arange(M) + 1) / 2.0
    return (mom.T * scale) @ P.T * wv[None, :]


def _endpoint_log_weights(v: np.ndarray, wv: np.ndarray) -> np.ndarray:
    """omega[k] with sum_k omega[k] f(v_k) ~ int_{-1}^{1} ln(1 + u) f(u) du."""
    M = len(v)
    n = np.arange(1, M)
    mom = np.concatenate([[2 * np.log(2.0) - 2.0], (-1.0) ** (n + 1) * 2.0 / (n * (n + 1))])
    P = np.polynomial.legendre.legvander(v, M - 1)
    scale = (2 * np.arange(M) + 1) / 2.0
    return (P @ (mom * scale)) * wv


@lru_cache(maxsize=32)
def _graded_self_rule(p: int, levels: int):
    """Self-panel rule on [-1, 1] split at each of the p Gauss nodes.

    Each side of the target u is cut into pieces that halve toward u.  The
    outer pieces use plain Gauss-Legendre (the singularity sits one piece
    length away); the innermost piece uses the split rule with exact
    weights for ln(t - u), where I0 stays small.  Returns outer nodes and
    weights, inner nodes, weights and log corrections, and the Lagrange
    values of the panel basis at both node sets.
    """
    gx, _ = np.polynomial.legendre.leggauss(p)
    qx, qw = np.polynomial.legendre.leggauss(NEAR_ORDER)
    v, wv = np.polynomial.legendre.leggauss(AUX_ORDER)
    corr = wv * np.log1p(v) - _endpoint_log_weights(v, wv)
    u_out, w_out, u_in, w_in, g_in = [], [], [], [], []
    for u in gx:
        uo, wo, ui, wi, gi = [], [], [], [], []
        for sign, ell in ((1.0, 1.0 - u), (-1.0, 1.0 + u)):
            eta = ell / 2.0**levels
            for k in range(levels):
                a, b = eta * 2.0**k, eta * 2.0 ** (k + 1)
                uo.append(u + sign * (0.5 * (a + b) + 0.5 * (b - a) * qx))
                wo.append(0.5 * (b - a) * qw)
            h = 0.5 * eta
            ui.append(u + sign * h * (1 + v))
            wi.append(h * wv)
            gi.append(h * corr)
        u_out.append(np.concatenate(uo) if uo else np.zeros(0))
        w_out.append(np.concatenate(wo) if wo else np.zeros(0))
        u_in.append(np.concatenate(ui))
        w_in.append(np.concatenate(wi))
        g_in.append(np.concatenate(gi))
    u_out, w_out = np.array(u_out), np.array(w_out)
    u_in, w_in, g_in = np.array(u_in), np.array(w_in), np.array(g_in)
    lag_out = _lagrange_matrix(gx, u_out.ravel()).reshape(u_out.shape + (p,))
    lag_in = _lagrange_matrix(gx, u_in.ravel()).reshape(u_in.shape + (p,))
    return u_out, w_out, u_in, w_in, g_in, lag_out, lag_in


class _PanelGeometry:
    """Vectorised evaluation of z(u), dz/du on arbitrary panels."""

    def __init__(self, mesh: CurveMesh):
        pans = mesh.panels
        self.n = len(pans)
        self.t0 = np.array([p.t0 for p in pans])
        self.t1 = np.array([p.t1 for p in pans])
        groups: dict[int, list[int]] = {}
        pieces: dict[int, object] = {}
        for k, p in enumerate(pans):
            groups.setdefault(id(p.piece), []).append(k)
            pieces[id(p.piece)] = p.piece
        self.groups = [(pieces[key], np.array(idx)) for key, idx in groups.items()]
        self.group_of = np.empty(self.n, dtype=int)
        for g, (_, idx) in enumerate(self.groups):
            self.group_of[idx] = g

    def eval(self, pidx: np.ndarray, u: np.ndarray):
        pidx = np.asarray(pidx)
        u = np.asarray(u, dtype=float)
        pidx, u = np.broadcast_arrays(pidx, u)
        z = np.empty(u.shape, dtype=complex)
        dz = np.empty(u.shape, dtype=complex)
        g_of = self.group_of[pidx]
        for g, (piece, _) in enumerate(self.groups):
            sel = g_of == g
            if not sel.any():
                continue
            pi = pidx[sel]
            half = 0.5 * (self.t1[pi] - self.t0[pi])
            t = self.t0[pi] + half * (u[sel] + 1)
            z[sel] = piece.pos(t)
            dz[sel] = piece.vel(t) * half
        return z, dz


class PanelNystrom:
    """Single-layer operator on a Gauss-Legendre panel mesh.

    Parameters
    ----------
    mesh : CurveMesh
        Mesh with ``quadrature == "gauss"``.
    rows : {"all", "half"}
        ``"half"`` assembles only the first N/2 rows; used for mirror
        symmetric meshes where the remaining rows follow by reflection.
    """

    def __init__(self, mesh: CurveMesh, rows: str = "all"):
        if mesh.quadrature != "gauss":
            raise ValueError("PanelNystrom needs a Gauss panel mesh")
        self.mesh = mesh
        self.N = N = mesh.n_nodes
        self.p = p = mesh.panel_order
        self.half = rows == "half"
        if self.half and not mesh.symmetric:
            raise ValueError("half-row assembly needs a mirror-symmetric mesh")
        nrow = N // 2 if self.half else N
        self.nrow = nrow
        z = mesh.z
        w = mesh.weights
        self.sqw = np.sqrt(w)
        self.geom = geom = _PanelGeometry(mesh)
        gx, gw = np.polynomial.legendre.leggauss(p)
        self.gx = gx
        rz = z[:nrow]
        self.dist = np.abs(rz[:, None] - z[None, :])
        self.row_panel = mesh.panel_map[:nrow]
        npan = len(mesh.panels)
        # far-field coefficient w_j / (2 pi)
        self.far_coef = w / TWO_PI

        # self panels (only those containing assembled rows)
        own = np.unique(self.row_panel)
        self.own = own
        v, wv = np.polynomial.legendre.leggauss(AUX_ORDER)
        lag = _lagrange_matrix(gx, v)  # (M, p)
        omega = _log_weights(gx, v, wv)  # (p, M)
        logd = np.log(np.abs(v[None, :] - gx[:, None]))  # (p, M)
        zt, _ = geom.eval(own[:, None], gx[None, :])  # (P, p)
        za, dza = geom.eval(own[:, None], v[None, :])  # (P, M)
        speed = np.abs(dza)
        self.self_r = np.abs(zt[:, :, None] - za[:, None, :])  # (P, p, M)
        self.self_g1 = (-omega[None] + wv[None, None, :] * logd[None]) * speed[:, None, :]
        self.self_g2 = wv[None, None, :] * speed[:, None, :] * np.ones((1, p, 1))
        self.self_lag = lag / TWO_PI
        self.own_length = mesh.panel_lengths[own]

        # near pairs: rows i close to a panel P not containing i
        centers, _ = geom.eval(np.arange(npan), np.zeros(npan))
        ends = np.stack([geom.eval(np.arange(npan), np.full(npan, s))[0] for s in (-1.0, 1.0)])
        extent = np.max(np.abs(ends - centers[None, :]), axis=0)
        plen = mesh.panel_lengths
        cand = np.abs(rz[:, None] - centers[None, :]) < 1.5 * extent[None, :] + NEAR_RATIO * plen[None, :]
        cand[np.arange(nrow), self.row_panel] = False
        ii, pp = np.nonzero(cand)
        us = np.linspace(-1, 1, 33)
        zs, _ = geom.eval(pp[:, None], us[None, :])
        dmin = np.min(np.abs(zs - rz[ii, None]), axis=1)
        keep = dmin < NEAR_RATIO * plen[pp]
        self.near_i = ii[keep]
        self.near_p = pp[keep]
        self._build_near(rz, gx)

    def _build_near(self, rz, gx):
        geom = self.geom
        npair = len(self.near_i)
        qx, qw = np.polynomial.legendre.leggauss(NEAR_ORDER)
        probe = np.linspace(-1, 1, 9)
        pair = np.arange(npair)
        lo = -np.ones(npair)
        hi = np.ones(npair)
        acc_pair, acc_u, acc_w = [], [], []
        for _ in range(60):
            if len(pair) == 0:
                break
            pidx = self.near_p[pair]
            mid = 0.5 * (lo + hi)
            hw = 0.5 * (hi - lo)
            uq = mid[:, None] + hw[:, None] * qx[None, :]
            zq, dzq = geom.eval(pidx[:, None], uq)
            length = np.sum(np.abs(dzq) * qw[None, :], axis=1) * hw
            up = mid[:, None] + hw[:, None] * probe[None, :]
            zp, _ = geom.eval(pidx[:, None], up)
            d = np.min(np.abs(zp - rz[self.near_i[pair], None]), axis=1)
            ok = d >= NEAR_RATIO * length
            if ok.any():
                acc_pair.append(np.repeat(pair[ok], NEAR_ORDER))
                acc_u.append(uq[ok].ravel())
                acc_w.append((np.abs(dzq[ok]) * (qw[None, :] * hw[ok, None])).ravel())
            split = ~ok
            pair = np.concatenate([pair[split], pair[split]])
            lo, hi = (
                np.concatenate([lo[split], mid[split]]),
                np.concatenate([mid[split], hi[split]]),
            )
        if len(pair):
            raise RuntimeError("near-field subdivision did not terminate")
        if npair == 0:
            self.near_r = np.zeros(0)
            self.near_c = np.zeros((0, self.p))
            self.near_seg = np.zeros(0, dtype=int)
            self.near_pairs = np.zeros(0, dtype=int)
            return
        qpair = np.concatenate(acc_pair)
        qu = np.concatenate(acc_u)
        qwt = np.concatenate(acc_w)
        order = np.argsort(qpair, kind="stable")
        qpair, qu, qwt = qpair[order], qu[order], qwt[order]
        zq, _ = geom.eval(self.near_p[qpair], qu)
        self.near_r = np.abs(zq - rz[self.near_i[qpair]])
        lag = np.empty((len(qu), self.p))
        # Lagrange values; chunked to limit memory
        for s in range(0, len(qu), 200000):
            lag[s : s + 200000] = _lagrange_matrix(gx, qu[s : s + 200000])
        self.near_c = lag * (qwt / TWO_PI)[:, None]
        self.near_pairs, self.near_seg = np.unique(qpair, return_index=True)

    # -- assembly ---------------------------------------------------------

    def rows_matrix(self, lam) -> np.ndarray:
        """Nystrom rows (not yet symmetric-weighted), shape (nrow, N)."""
        kap = _as_parameter(lam).kappa
        p = self.p
        d = self.dist
        with np.errstate(under="ignore"):
            a = sp.k0(kap * np.where(d > 0, d, 1.0)) * self.far_coef[None, :]
        # self panels
        kr = kap * self.self_r
        blocks = np.einsum(
            "aik,kj->aij", sp.i0(kr) * self.self_g1 + sp.k0(kr) * self.self_g2, self.self_lag
        )
        kl = kap * self.own_length
        if np.any(kl > GRADED_KR):
            levels = np.where(kl > GRADED_KR, np.ceil(np.log2(np.maximum(kl, 1.0))), 0).astype(int)
            for lev in np.unique(levels[levels > 0]):
                sel = np.nonzero(levels == lev)[0]
                blocks[sel] = self._graded_blocks(self.own[sel], kap, int(lev))
        for b, P in enumerate(self.own):
            cols = slice(P * p, (P + 1) * p)
            rows = np.nonzero(self.row_panel == P)[0]
            a[rows, cols] = blocks[b, rows - P * p]
        # near pairs
        if len(self.near_r):
            with np.errstate(under="ignore"):
                vals = sp.k0(kap * self.near_r)[:, None] * self.near_c
            sums = np.add.reduceat(vals, self.near_seg, axis=0)
            ii = self.near_i[self.near_pairs]
            pp = self.near_p[self.near_pairs]
            cols = pp[:, None] * p + np.arange(p)[None, :]
            a[ii[:, None], cols] = sums
        return a

    def _graded_blocks(self, panels: np.ndarray, kap: float, levels: int) -> np.ndarray:
        """Self-panel blocks from :func:`_graded_self_rule` (large kappa h)."""
        uo, wo, ui, wi, gi, lo, li = _graded_self_rule(self.p, levels)
        geom = self.geom
        zt, _ = geom.eval(panels[:, None], self.gx[None, :])
        zo, dzo = geom.eval(panels[:, None, None], uo[None])
        zi, dzi = geom.eval(panels[:, None, None], ui[None])
        ro = np.abs(zt[:, :, None] - zo)
        ri = np.abs(zt[:, :, None] - zi)
        with np.errstate(under="ignore"):
            fo = sp.k0(kap * ro) * wo[None] * np.abs(dzo)
        fi = (sp.k0(kap * ri) * wi[None] + sp.i0(kap * ri) * gi[None]) * np.abs(dzi)
        out = np.einsum("aiq,iqj->aij", fo, lo) + np.einsum("aiq,iqj->aij", fi, li)
        return out / TWO_PI

    def _weighted(self, a):
        return a * (self.sqw[: self.nrow, None] / self.sqw[None, :])

    def matrix(self, lam) -> np.ndarray:
        a = self._weighted(self.rows_matrix(lam))
        if self.half:
            a = np.vstack([a, a[::-1, ::-1]])
        return _symmetrize(a)

    def sector_matrix(self, lam, parity: int) -> np.ndarray:
        """Even (+1) or odd (-1) block of a mirror-symmetric mesh."""
        a = self._weighted(self.rows_matrix(lam))
        h = self.N // 2
        if not self.half:
            a = a[:h]
        blk = a[:, :h] + parity * a[:, h:][:, ::-1]
        return _symmetrize(blk)


# ---------------------------------------------------------------------------
# operator facade


class SingleLayer:
    """Spectral access to S(lambda) on a mesh.

    Chooses the Kress circulant path for trapezoidal circle meshes and the
    panel path otherwise.  On mirror-symmetric panel meshes the spectrum is
    computed sector-wise (even and odd blocks of half size); ``sector`` may
    restrict it to one parity.
    """

    def __init__(self, mesh: CurveMesh, sector: str = "both"):
        if mesh.n_nodes < 8:
            raise MeshTooSmall("mesh needs at least 8 nodes")
        self.mesh = mesh
        self.sector = sector
        if mesh.quadrature == "trapezoid":
            self.kind = "kress"
            self.impl = KressCircle(mesh)
        else:
            self.kind = "panel"
            self.impl = PanelNystrom(mesh, rows="half" if mesh.symmetric else "all")

    def matrix(self, lam) -> np.ndarray:
        lam = _as_parameter(lam)
        cache = active_cache()
        if cache is not None:
            hit = cache.get(self.mesh.mesh_hash, lam.value, self.mesh.n_nodes)
            if hit is not None:
                return hit
        a = self.impl.matrix(lam)
        if cache is not None:
            cache.put(self.mesh.mesh_hash, lam.value, a)
        return a

    def top(self, lam, k: int, vectors: bool = False):
        """Largest ``k`` eigenvalues (and nodal-density eigenvectors)."""
        lam = _as_parameter(lam)
        if self.kind == "kress":
            return self.impl.top(lam, k, vectors)
        if not self.mesh.symmetric:
            w, v = top_eigh(self.matrix(lam), k, vectors=True)
            return (w, self._density(v)) if vectors else w
        parities = {"both": (1, -1), "even": (1,), "odd": (-1,)}[self.sector]
        h = self.mesh.n_nodes // 2
        a_rows = self.impl._weighted(self.impl.rows_matrix(lam))[:h]
        ws, vs = [], []
        for par in parities:
            blk = _symmetrize(a_rows[:, :h] + par * a_rows[:, h:][:, ::-1])
            w, v = top_eigh(blk, min(k, h), vectors=True)
            full = np.vstack([v, par * v[::-1]]) / np.sqrt(2.0)
            ws.append(w)
            vs.append(full)
        w = np.concatenate(ws)
        v = np.hstack(vs)
        order = np.argsort(-w, kind="stable")[:k]
        w, v = w[order], v[:, order]
        return (w, self._density(v)) if vectors else w

    def _density(self, v):
        """Convert symmetric-form eigenvectors to nodal density values."""
        g = v / self.impl.sqw[:, None]
        return g / np.sqrt(np.sum(g**2 * self.mesh.weights[:, None], axis=0))

    def eigenvalues(self, lam) -> np.ndarray:
        if self.kind == "kress":
            return self.impl.eigenvalues(_as_parameter(lam))
        return np.linalg.eigvalsh(self.matrix(lam))[::-1]


@lru_cache(maxsize=8)
def single_layer(mesh: CurveMesh, sector: str = "both") -> SingleLayer:
    """Memoised :class:`SingleLayer` (meshes are immutable and hash by id)."""
    return SingleLayer(mesh, sector)


def assemble_slp(mesh: CurveMesh, lam) -> SlpMatrix:
    """Symmetric Nystrom matrix of S(lambda) on ``mesh``."""
    par = _as_parameter(lam)
    if mesh.n_nodes < 8:
        raise MeshTooSmall("mesh needs at least 8 nodes")
    a = single_layer(mesh).matrix(par)
    a = np.array(a)
    a.setflags(write=False)
    return SlpMatrix(a, par, mesh.mesh_hash)


def theta_parameters(E: float, c: float) -> tuple[float, float]:
    """(prefactor, Laplacian parameter) of the Dirac operator at energy E."""
    if not c > 0:
        raise ValueError("c must be > 0")
    if not abs(E) < 0.5 * c * c:
        raise OutsideGap(f"|E| must be < c^2/2 = {0.5 * c * c}")
    mu_eff = E * E / (c * c) - 0.25 * c * c
    if not mu_eff < 0:
        raise OutsideGap("effective Laplacian parameter is not negative")
    return (E / c - c / 2) / c, mu_eff


def assemble_theta(mesh: CurveMesh, E: float, c: float) -> ThetaMatrix:
    """Theta(E) = (1/c)(E/c - c/2) S(E^2/c^2 - c^2/4)."""
    pref, mu_eff = theta_parameters(E, c)
    slp = assemble_slp(mesh, mu_eff)
    a = pref * slp.entries
    a.setflags(write=False)
    return ThetaMatrix(a, float(E), float(c), pref, slp.parameter, mesh.mesh_hash)


# ---------------------------------------------------------------------------
# potentials off the curve


@dataclass(frozen=True)
class Potential:
    """Single-layer potential and its Wirtinger field at evaluation points.

    ``single_layer`` holds S(lambda)g(x); ``wirtinger`` holds
    -2 dbar S(lambda)g(x), written as a complex number.
    """

    single_layer: np.ndarray
    wirtinger: np.ndarray = field(repr=False)


def _points(points) -> np.ndarray:
    arr = np.asarray(points)
    if np.iscomplexobj(arr):
        return arr.ravel()
    arr = np.asarray(arr, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


def eval_potential(mesh: CurveMesh, density, lam, points, check: bool = True) -> Potential:
    """Evaluate S(lambda)g and -2 dbar S(lambda)g at off-curve points.

    Points must stay at least one local panel length away from every node;
    closer points would need near-singular quadrature.
    """
    kap = _as_parameter(lam).kappa
    x = _points(points)
    g = np.asarray(density, dtype=float)
    diff = x[:, None] - mesh.z[None, :]
    r = np.abs(diff)
    if check and np.any(r < mesh.node_panel_length[None, :]):
        raise PointTooCloseToCurve("evaluation point closer than one panel length")
    gw = g * mesh.weights / TWO_PI
    with np.errstate(under="ignore"):
        s = sp.k0(kap * r) @ gw
        psi = (kap * sp.k1(kap * r) * np.conj(diff) / r) @ gw
    return Potential(s, psi)
