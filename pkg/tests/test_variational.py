import numpy as np
import pytest
from scipy.optimize import brentq

from oblique.errors import NonNegativeBeta, OutOfRegime, OverlappingCharts
from oblique.geometry import build_circle
from oblique.spectral_solver import solve_q_beta
from oblique.variational import Chart, TrialProfile, c_theta, multi_bump_bound, rayleigh_quotient


@pytest.fixture(scope="module")
def circle_mesh():
    return build_circle(1.0, 1024)


@pytest.mark.parametrize("A,B,amp", [(1.0, 1.0, 1.0), (0.3, 2.0, 1.0), (1.7, 0.4, 3.0)])
def test_quadrature_norms_match_closed_form(A, B, amp):
    p = TrialProfile(A, B, 0.1, amplitude=amp)
    num, ref = p.norms(), p.closed_form_norms()
    for key in ref:
        assert num[key] == pytest.approx(ref[key], rel=1e-12)


def test_bump_support_and_peak():
    p = TrialProfile(1.0, 1.0, 0.1)
    assert p.g(0.0, 0.0) == 1.0
    assert p.g(1.0, 0.0) == 0.0 and p.g(0.0, 0.5) == 0.0
    y = np.linspace(-2, 2, 81)
    assert np.all(p.g(y[:, None], y[None, :]) >= 0)


def test_flat_quotient_below_certified_bound():
    p = TrialProfile(1.0, 1.0, 0.05)
    c = c_theta(p)
    assert rayleigh_quotient(p, -20.0) <= c.value * 400.0


def test_flat_quotient_closed_form():
    # h = 0: q/||f||^2 = (grad_y1^2 + tau^2 grad_y2^2 + tau beta trace) / ||g||^2
    A, B, th, beta = 0.8, 1.3, 0.1, -25.0
    p = TrialProfile(A, B, th)
    tau = th * abs(beta)
    g1sq = 3 * np.pi**2 * B / (32 * A)
    g2sq = 3 * np.pi**2 * A / (8 * B)
    exact = (g1sq + tau**2 * g2sq + tau * beta * 3 * A / 4) / (9 * A * B / 32)
    assert rayleigh_quotient(p, beta) == pytest.approx(exact, rel=1e-12)


def test_amplitude_invariance():
    a = rayleigh_quotient(TrialProfile(1.0, 1.0, 0.2), -12.0)
    b = rayleigh_quotient(TrialProfile(1.0, 1.0, 0.2, amplitude=7.0), -12.0)
    assert abs(a - b) <= 1e-12 * abs(a)


def test_random_draws_respect_certified_bound():
    rng = np.random.default_rng(20240601)
    for _ in range(20):
        A, B = rng.uniform(0.3, 0.9, size=2)
        th = rng.uniform(0.02, 0.5)
        beta = -rng.uniform(1.0 / th, 6.0 / th)
        curved = rng.random() < 0.5 and 1 - np.sqrt(1 - A * A) < B / 2
        chart = Chart.circle(1.0, A, B, rng.uniform(0, 2 * np.pi)) if curved else None
        p = TrialProfile(A, B, th, chart)
        assert rayleigh_quotient(p, beta) <= c_theta(p).value * beta**2 + 1e-9


@pytest.mark.parametrize("beta", [-5.0, -10.0, -20.0])
def test_quotient_bounds_circle_ground_state(circle_mesh, beta):
    p = TrialProfile(0.5, 0.5, 0.25, Chart.circle(1.0, 0.5, 0.5))
    mu1 = solve_q_beta(circle_mesh, beta).eigenvalue
    assert rayleigh_quotient(p, beta) >= mu1


def test_theta_limit_slope():
    p = TrialProfile(1.0, 1.0, 1e-6)
    n = p.norms()
    assert c_theta(p).value / 1e-6 == pytest.approx(-n["trace2"] / n["g2"], rel=1e-4)


def test_threshold_root():
    p = TrialProfile(0.7, 1.1, 0.1)
    star = c_theta(p).theta_star
    assert abs(c_theta(p.with_theta(star)).value) <= 1e-10
    root = brentq(lambda t: c_theta(p.with_theta(t)).value, 1e-6, 0.99, xtol=1e-14)
    assert root == pytest.approx(star, rel=1e-10)


def test_lipschitz_bound_monotone():
    c0 = c_theta(TrialProfile(1.0, 1.0, 0.05, M=0.0)).value
    c1 = c_theta(TrialProfile(1.0, 1.0, 0.05, M=1.0)).value
    assert c0 < c1


def test_out_of_regime_and_sign():
    p = TrialProfile(1.0, 1.0, 0.05)
    with pytest.raises(OutOfRegime):
        rayleigh_quotient(p, -10.0)
    with pytest.raises(NonNegativeBeta):
        rayleigh_quotient(p, 1.0)


def test_two_flat_bumps_certify_two_bound_states():
    ps = [TrialProfile(0.5, 0.5, 0.05, Chart.flat(0.5, 0.5, (x, 0.0))) for x in (-1.0, 1.0)]
    assert multi_bump_bound(2, ps, -30.0) < 0


def test_single_bump_reduces_to_quotient():
    p = TrialProfile(1.0, 1.0, 0.1)
    assert multi_bump_bound(1, [p], -30.0) == rayleigh_quotient(p, -30.0)


def test_two_circle_bumps_bound_second_eigenvalue(circle_mesh):
    beta = -30.0
    ps = [TrialProfile(0.5, 0.5, 0.05, Chart.circle(1.0, 0.5, 0.5, phi)) for phi in (0.0, np.pi)]
    bound = multi_bump_bound(2, ps, beta)
    assert bound < 0
    assert bound >= solve_q_beta(circle_mesh, beta, n=2).eigenvalue


def test_overlapping_charts_rejected():
    ps = [TrialProfile(0.5, 0.5, 0.05, Chart.flat(0.5, 0.5, (x, 0.0))) for x in (0.0, 0.6)]
    with pytest.raises(OverlappingCharts):
        multi_bump_bound(2, ps, -30.0)
