from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import approx_fprime

from ..models import IntervalEstimate, ScanData, ScanPoint
from ..stats import (
    BELL_FLOOR,
    _log_likelihood,
    antitrap_time,
    bell_fidelity,
    binomial_sigma,
    contrast_interval,
    fit_exp_decay,
    fit_parity,
    fit_ramsey_mle,
    parity_from_counts,
    per_loop_fidelity,
    require_usable,
    sign_test_pvalue,
    wilson_interval,
)


def _exact(value: float, halfwidth: float = 0.005) -> IntervalEstimate:
    return IntervalEstimate(value=value, lo=value - halfwidth, hi=value + halfwidth, method="exact")


def test_wilson_interval_for_present_accuracy_counts():
    est = wilson_interval(765, 814)
    assert est.value == pytest.approx(765 / 814)
    assert est.lo == pytest.approx(0.9309, abs=1e-3)
    assert est.hi == pytest.approx(0.9476, abs=1e-3)


def test_wilson_interval_edges():
    assert wilson_interval(0, 20).lo == 0.0
    assert wilson_interval(20, 20).hi == 1.0
    with pytest.raises(ValueError):
        wilson_interval(0, 0)
    with pytest.raises(ValueError):
        wilson_interval(5, 4)


def test_binomial_sigma():
    assert binomial_sigma(0.5, 100) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        binomial_sigma(0.5, 0)


def test_bell_fidelity_from_populations_and_parity():
    assert bell_fidelity(0.5, 0.5, 1.0) == pytest.approx(1.0)
    assert bell_fidelity(0.48, 0.47, 0.9) == pytest.approx(0.925)
    with pytest.raises(ValueError):
        bell_fidelity(1.2, 0.0, 0.0)


def test_parity_from_counts_ignores_lost_atoms():
    parity, total = parity_from_counts({"00": 40, "11": 40, "01": 10, "10": 10, "N1": 7})
    assert parity == pytest.approx(0.6)
    assert total == 100


def test_parity_fit_recovers_the_amplitude():
    phases = np.linspace(0.0, math.pi, 8, endpoint=False)
    n = 1000.0
    points = [ScanPoint(phi_rad=p, n=n, k=n * (1 + 0.9 * math.cos(2 * p + 0.3)) / 2) for p in phases]

    fit = fit_parity(ScanData(points=points))

    assert fit.parameters["amplitude"] == pytest.approx(0.9, abs=1e-6)
    assert fit.parameters["offset"] == pytest.approx(0.0, abs=1e-6)


def test_parity_fit_needs_a_full_period():
    phases = np.linspace(0.0, math.pi / 2, 8)
    points = [ScanPoint(phi_rad=p, n=100, k=50) for p in phases]
    with pytest.raises(ValueError):
        fit_parity(ScanData(points=points))


def test_ramsey_mle_recovers_contrast_from_exact_fractions():
    phases = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)
    n = 500.0
    points = [ScanPoint(phi_rad=p, n=n, k=n * (0.5 + 0.4 * math.cos(p - 1.0))) for p in phases]

    fit = fit_ramsey_mle(ScanData(points=points))

    assert fit.parameters["contrast"] == pytest.approx(0.8, abs=1e-4)
    assert fit.parameters["mean"] == pytest.approx(0.5, abs=1e-4)
    interval = contrast_interval(fit)
    assert interval.lo < 0.8 < interval.hi
    assert not fit.at_boundary


def test_ramsey_mle_flags_full_contrast_as_boundary():
    phases = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)
    n = 200.0
    points = [ScanPoint(phi_rad=p, n=n, k=n * (0.5 + 0.5 * math.cos(p))) for p in phases]

    fit = fit_ramsey_mle(ScanData(points=points))

    assert fit.at_boundary
    assert fit.parameters["contrast_hi"] == pytest.approx(fit.parameters["contrast"], abs=1e-3)


def test_ramsey_mle_needs_five_points():
    points = [ScanPoint(phi_rad=p, n=10, k=5) for p in (0.0, 1.0, 2.0, 3.0)]
    with pytest.raises(ValueError):
        fit_ramsey_mle(ScanData(points=points))


def test_exponential_decay_with_free_floor_gives_the_antitrap_time():
    holds = np.array([0, 5, 10, 15, 20, 30, 40, 60, 80, 100]) * 1e-6
    amplitude, tau, floor = 0.8, 20e-6, 0.15
    survival = [_exact(amplitude * math.exp(-t / tau) + floor) for t in holds]

    fit = fit_exp_decay(holds, survival)

    assert fit.parameters["tau"] == pytest.approx(tau, rel=1e-4)
    assert fit.parameters["floor"] == pytest.approx(floor, abs=1e-4)
    assert antitrap_time(fit) == pytest.approx(tau * (amplitude + floor) / amplitude, rel=1e-3)


def test_exponential_decay_with_bell_floor_gives_per_loop_fidelity():
    f2q = 0.967
    loops = [1, 3, 5, 7, 9]
    fidelities = [_exact(BELL_FLOOR + 0.75 * f2q ** n, 0.01) for n in loops]

    fit = fit_exp_decay(loops, fidelities, floor=BELL_FLOOR)

    assert fit.parameters["tau"] == pytest.approx(-1.0 / math.log(f2q), rel=1e-4)
    assert per_loop_fidelity(fit) == pytest.approx(f2q, abs=1e-6)


def test_exponential_decay_rejects_unsorted_inputs():
    with pytest.raises(ValueError):
        fit_exp_decay([3, 1, 5, 7], [_exact(0.5)] * 4)


def test_require_usable_raises_for_failed_fits():
    fit = fit_exp_decay([0, 1, 2, 3], [_exact(v) for v in (0.9, 0.6, 0.4, 0.3)])
    assert require_usable(fit, "decay") is fit
    broken = fit.model_copy(update={"usable": False, "notes": ["no convergence"]})
    with pytest.raises(RuntimeError):
        require_usable(broken, "decay")


def test_sign_test():
    assert sign_test_pvalue([0.0, 0.0]) == 1.0
    assert sign_test_pvalue([1.0] * 10 + [-1.0] * 10) == pytest.approx(1.0)
    assert sign_test_pvalue([1.0] * 20) < 0.01


def test_wilson_is_symmetric_and_contains_the_fraction():
    for n in range(1, 61):
        for k in range(n + 1):
            est = wilson_interval(k, n)
            mirror = wilson_interval(n - k, n)
            assert est.lo <= k / n <= est.hi
            assert est.lo == pytest.approx(1.0 - mirror.hi, abs=1e-12)
            assert est.hi == pytest.approx(1.0 - mirror.lo, abs=1e-12)


def test_bell_fidelity_grows_with_populations_and_parity():
    populations = [bell_fidelity(p / 2, p / 2, 0.5) for p in np.linspace(0.0, 1.0, 11)]
    parities = [bell_fidelity(0.45, 0.45, a) for a in np.linspace(-1.0, 1.0, 11)]
    assert np.all(np.diff(populations) > 0)
    assert np.all(np.diff(parities) > 0)


def test_ramsey_mle_optimum_is_stationary():
    phases = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)
    n = np.full(16, 400.0)
    k = n * (0.45 + 0.35 * np.cos(phases - 0.7))
    fit = fit_ramsey_mle(ScanData(points=[ScanPoint(phi_rad=p, n=m, k=c) for p, m, c in zip(phases, n, k)]))

    optimum = np.array([fit.parameters[name] for name in ("contrast", "phase", "mean")])
    gradient = approx_fprime(optimum, _log_likelihood, 1e-7, phases, n, k)
    off_peak = approx_fprime(optimum + [0.05, 0.0, 0.0], _log_likelihood, 1e-7, phases, n, k)

    assert np.max(np.abs(gradient)) < 0.5
    assert abs(off_peak[0]) > 50.0
