import warnings

import numpy as np
import pytest

from oblique.asymptotics import (
    AsymptoticFit,
    CornerPolicy,
    corner_constant,
    extrapolate_exponential,
    fit_leading_constant,
    resolution_floor,
    sweep_alpha,
    sweep_beta,
    transfer_bounds,
    transfer_check,
)
from oblique.errors import HypothesisViolated, NotConverged, UnderResolved
from oblique.geometry import build_circle

ALPHAS = [-0.2, -0.1, -0.05, -0.025]
BETAS = [-10.0, -20.0, -40.0, -80.0]


@pytest.fixture(scope="module")
def circle2048():
    return build_circle(1.0, 2048)


@pytest.fixture(scope="module")
def circle4096():
    return build_circle(1.0, 4096)


def test_fit_recovers_exact_model():
    s = np.array([-0.3, -0.2, -0.1, -0.05])
    eig = -3.0 / s**2 + 0.7
    C, slope, se, rem = fit_leading_constant("alpha", s, eig)
    assert C == pytest.approx(-3.0, abs=1e-12)
    assert slope == pytest.approx(0.7, abs=1e-10)
    assert se < 1e-10
    np.testing.assert_allclose(rem, 0.7, atol=1e-10)


def test_fit_beta_uses_inverse_coupling():
    b = np.array([-5.0, -10.0, -20.0, -40.0])
    C, slope, _, rem = fit_leading_constant("beta", b, -0.3 * b**2 + 2.0)
    assert C == pytest.approx(-0.3, abs=1e-12)
    np.testing.assert_allclose(rem, 2.0, atol=1e-9)


@pytest.mark.parametrize(
    "grid", [ALPHAS[:3], [-0.2, 0.1, -0.05, -0.025], [-0.025, -0.05, -0.1, -0.2]]
)
def test_sweep_alpha_grid_checks(circle2048, grid):
    with pytest.raises(ValueError):
        sweep_alpha(circle2048, 1, grid)


def test_sweep_alpha_resolution_floor():
    m = build_circle(1.0, 256)
    assert not resolution_floor(m, 0.025)
    with pytest.raises(UnderResolved):
        sweep_alpha(m, 1, ALPHAS)


def test_circle_alpha_law(circle2048):
    fit = sweep_alpha(circle2048, 1, ALPHAS)
    assert fit.C < 0
    assert fit.C == pytest.approx(-4.0, rel=0.05)
    rem = np.abs(fit.remainder)
    assert rem[-1] <= 2 * rem[:2].max()
    assert len(fit.csv_rows()) == 4 and fit.csv_rows()[0][3] == 2048


def test_circle_beta_law(circle4096):
    fit = sweep_beta(circle4096, 1, BETAS)
    assert fit.C == pytest.approx(-0.25, rel=0.05)
    np.testing.assert_allclose(fit.scaled_eigenvalues(), [e / b**2 for b, e in fit.samples])


def test_grid_halving_stability_and_coverage(circle2048, circle4096):
    grid = list(-0.2 * 2.0 ** (-np.arange(8) * 3 / 7))
    fit = sweep_alpha(circle2048, 1, grid)
    tail = fit.samples[4:]
    C_half = fit_leading_constant("alpha", [c for c, _ in tail], [e for _, e in tail])[0]
    assert abs(C_half - fit.C) < fit.error_estimate
    assert abs(fit.C + 4.0) < fit.error_estimate  # the estimate covers the true error
    bgrid = list(-10.0 * 2.0 ** (np.arange(8) * 3 / 7))
    fb = sweep_beta(circle4096, 1, bgrid)
    assert abs(fb.C + 0.25) < fb.error_estimate


def test_fit_report_round_trip(circle2048):
    import json

    fit = sweep_alpha(circle2048, 2, ALPHAS)
    rep = json.loads(fit.to_json())
    assert set(rep) >= {"C", "stderr", "remainder_norm", "grid", "error_estimate"}
    assert rep["grid"] == ALPHAS and rep["n"] == 2


def test_extrapolation_exact_for_exponential_model():
    Ls = np.array([10.0, 20.0, 40.0])
    b_inf, gamma = extrapolate_exponential(Ls, 0.3 - 0.02 * np.exp(-0.1 * Ls))
    assert b_inf == pytest.approx(0.3, abs=1e-14)
    assert gamma == pytest.approx(0.1, rel=1e-12)


def test_extrapolation_noise_level_returns_last():
    b_inf, gamma = extrapolate_exponential([10.0, 20.0, 40.0], [0.3, 0.3 + 1e-15, 0.3 - 1e-15])
    assert gamma is None and b_inf == 0.3 - 1e-15


def test_corner_constant_small_angle_trend():
    b01, b05 = corner_constant(0.1), corner_constant(0.5)
    assert 0.25 < b05.b_theta < b01.b_theta < 1.0
    assert b01.error_estimate < 1e-6 and b05.error_estimate < 1e-6


def test_corner_constant_invariant_under_doubling_L():
    a = corner_constant(0.6)
    b = corner_constant(0.6, CornerPolicy(lengths=(40.0, 80.0, 160.0)))
    assert abs(a.b_theta - b.b_theta) <= 2 * max(a.error_estimate, b.error_estimate)
    assert [row[0] for row in b.table][:3] == [40.0, 80.0, 160.0]


def test_corner_constant_not_converged_near_right_angle():
    # at theta = 1.4 the bound state is barely below the threshold and needs
    # legs far longer than 80 before it appears
    with pytest.raises(NotConverged):
        corner_constant(1.4, CornerPolicy(max_length=80.0))


def test_corner_constant_rejects_bad_angle():
    with pytest.raises(ValueError):
        corner_constant(np.pi / 2)


def test_transfer_bounds_algebra():
    lo, hi = transfer_bounds(0.2, 0.3, -0.1)
    assert lo == pytest.approx(-0.3 / 0.04 / 0.01) and hi == pytest.approx(-0.2 / 0.09 / 0.01)
    lo, hi = transfer_bounds(0.26, 0.26, -0.05)
    assert lo == pytest.approx(hi) and lo == pytest.approx(-1 / (0.26 * 0.05**2))


def test_transfer_on_circle(circle4096):
    rep = transfer_check(circle4096, 1, 0.24, 0.26, [-0.1, -0.05])
    assert rep.all_hold and rep.min_margin > 0
    assert not rep.hypothesis_violated
    assert all(h["holds"] for h in rep.hypothesis)


def test_transfer_hypothesis_violation_is_reported(circle4096):
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = transfer_check(circle4096, 1, 0.3, 0.32, [-0.1, -0.05])
    assert rep.hypothesis_violated
    assert any(issubclass(x.category, HypothesisViolated) for x in w)


def test_transfer_rejects_bad_bracket(circle4096):
    with pytest.raises(ValueError):
        transfer_check(circle4096, 1, 0.3, 0.2, [-0.1])


@pytest.mark.slow
def test_transfer_on_teardrop():
    from oblique.geometry import build_corner_loop

    b_theta = corner_constant(np.pi / 4).b_theta
    # matched beta reaches 1/(0.95 b 0.1) ~ 40; N = 4480 meets the floor there
    m = build_corner_loop(np.pi / 4, 1.0, 4480)
    rep = transfer_check(m, 1, 0.95 * b_theta, 1.05 * b_theta, [-0.2, -0.1])
    assert not rep.hypothesis_violated
    assert rep.all_hold and rep.min_margin > 0
