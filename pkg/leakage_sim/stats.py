"""Interval estimates and fits applied to simulated counts."""

from __future__ import annotations

import logging
import math
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize
from scipy.stats import binomtest

from .models import FitResult, IntervalEstimate, ScanData

logger = logging.getLogger(__name__)

BELL_FLOOR = 0.25
LN2 = math.log(2.0)
_P_CLIP = 1e-12
_BOUNDARY_TOL = 1e-6


# ------------------------------------------------------------------ #
# Proportions
# ------------------------------------------------------------------ #
def wilson_interval(k: float, n: float, z: float = 1.0) -> IntervalEstimate:
    """Wilson score interval around ``k / n``; ``z = 1`` gives the 68% interval."""
    if n <= 0:
        raise ValueError("wilson_interval needs n >= 1.")
    if not 0 <= k <= n:
        raise ValueError(f"k must be within [0, n], got k={k}, n={n}.")
    if z <= 0:
        raise ValueError("z must be > 0.")
    p_hat = k / n
    z2n = z * z / n
    center = (p_hat + z2n / 2.0) / (1.0 + z2n)
    halfwidth = (z / (1.0 + z2n)) * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n))
    lo = 0.0 if k == 0 else max(0.0, center - halfwidth)
    hi = 1.0 if k == n else min(1.0, center + halfwidth)
    return IntervalEstimate(value=p_hat, lo=min(lo, p_hat), hi=max(hi, p_hat), method=f"wilson(z={z:g})")


def binomial_sigma(p: float, n: float) -> float:
    if n <= 0:
        raise ValueError("binomial_sigma needs n > 0.")
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / n)


def sign_test_pvalue(deviations: Sequence[float]) -> float:
    """Two-sided sign test on nonzero deviations; 1.0 when all are zero."""
    signs = [d for d in deviations if d != 0]
    if not signs:
        return 1.0
    positive = sum(1 for d in signs if d > 0)
    return float(binomtest(positive, len(signs), 0.5).pvalue)


# ------------------------------------------------------------------ #
# Bell-state fidelity
# ------------------------------------------------------------------ #
def bell_fidelity(rho00: float, rho11: float, amplitude: float) -> float:
    """Fidelity from populations and parity amplitude: ``(rho00 + rho11) / 2 + A / 2``."""
    for name, value in (("rho00", rho00), ("rho11", rho11)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}.")
    if not -1.0 <= amplitude <= 1.0:
        raise ValueError(f"parity amplitude must be in [-1, 1], got {amplitude}.")
    return (rho00 + rho11) / 2.0 + amplitude / 2.0


def parity_from_counts(counts: Mapping[str, float]) -> Tuple[float, float]:
    """Parity ``P(00)+P(11)-P(01)-P(10)`` over two-letter keys; keys with ``N`` are dropped."""
    even = sum(v for key, v in counts.items() if key in ("00", "11"))
    odd = sum(v for key, v in counts.items() if key in ("01", "10"))
    total = even + odd
    if total <= 0:
        raise ValueError("no postselected two-atom counts to form a parity.")
    return (even - odd) / total, total


def _parity_model(phi, a, b, c):
    return a * np.cos(2.0 * phi) + b * np.sin(2.0 * phi) + c


def fit_parity(scan: ScanData) -> FitResult:
    """Least-squares fit of ``A cos(2 phi + delta) + c``.

    Each point stores the shots kept (``n``) and the even-parity shots (``k``), so
    the parity is ``2 k / n - 1`` with a Gaussian error from the binomial.
    """
    phi, n, k = scan.columns()
    if len(phi) < 6:
        raise ValueError("fit_parity needs at least 6 phase points.")
    if np.any(n <= 0):
        raise ValueError("every parity point needs n >= 1.")
    m = len(phi)
    if np.ptp(phi) < math.pi * (m - 1) / m - 1e-9:
        raise ValueError("parity scan must cover one period of the 2*phi oscillation.")
    p_even = k / n
    parity = 2.0 * p_even - 1.0
    sigma = 2.0 * np.sqrt(np.maximum(p_even * (1.0 - p_even), 0.25 / n) / n)

    design = np.column_stack([np.cos(2 * phi), np.sin(2 * phi), np.ones_like(phi)])
    seed, *_ = np.linalg.lstsq(design / sigma[:, None], parity / sigma, rcond=None)
    converged = True
    notes = []
    try:
        popt, pcov = curve_fit(_parity_model, phi, parity, p0=seed, sigma=sigma, absolute_sigma=True)
    except (RuntimeError, ValueError) as exc:
        logger.warning("Parity fit did not converge: %s", exc)
        popt, pcov = seed, np.full((3, 3), np.nan)
        converged = False
        notes.append(str(exc))

    a, b, c = (float(v) for v in popt)
    amplitude = math.hypot(a, b)
    delta = math.atan2(-b, a)
    if amplitude > 0 and np.all(np.isfinite(pcov)):
        grad = np.array([a, b]) / amplitude
        amp_err = float(math.sqrt(max(grad @ pcov[:2, :2] @ grad, 0.0)))
    else:
        amp_err = float(math.sqrt(max(pcov[0, 0], 0.0))) if np.isfinite(pcov[0, 0]) else float("nan")
    residual = parity - _parity_model(phi, *popt)
    return FitResult(
        model="A*cos(2*phi+delta)+c",
        parameters={"amplitude": amplitude, "phase": delta, "offset": c},
        uncertainties={
            "amplitude": amp_err,
            "offset": float(math.sqrt(max(pcov[2, 2], 0.0))) if np.isfinite(pcov[2, 2]) else float("nan"),
        },
        residual_norm=float(np.linalg.norm(residual / sigma)),
        converged=converged,
        notes=notes,
    )


# ------------------------------------------------------------------ #
# Ramsey contrast by binomial maximum likelihood
# ------------------------------------------------------------------ #
def _fringe(phi: np.ndarray, contrast: float, phase: float, mean: float) -> np.ndarray:
    return mean + 0.5 * contrast * np.cos(phi - phase)


def _log_likelihood(params, phi, n, k) -> float:
    p = np.clip(_fringe(phi, *params), _P_CLIP, 1.0 - _P_CLIP)
    return float(np.sum(k * np.log(p) + (n - k) * np.log1p(-p)))


def fit_ramsey_mle(scan: ScanData) -> FitResult:
    """Maximise the binomial likelihood of ``m + (C/2) cos(phi - phi0)``.

    The contrast interval is where the profile likelihood (phase and mean held at
    their optimum) falls by a factor of two.
    """
    phi, n, k = scan.columns()
    if len(phi) < 5:
        raise ValueError("fit_ramsey_mle needs at least 5 phase points.")
    if np.any(n < 1):
        raise ValueError("every Ramsey point needs n >= 1.")
    if np.ptp(phi) <= 0:
        raise ValueError("degenerate Ramsey scan: all phases are equal.")

    frac = k / n
    design = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    (m0, a0, b0), *_ = np.linalg.lstsq(design, frac, rcond=None)
    c0 = float(np.clip(2.0 * math.hypot(a0, b0), 0.05, 0.95))
    phase0 = math.atan2(b0, a0)
    m0 = float(np.clip(m0, 0.05, 0.95))

    def objective(params):
        return -_log_likelihood(params, phi, n, k)

    best = None
    for shift in (0.0, math.pi / 2, -math.pi / 2, math.pi):
        result = minimize(
            objective,
            x0=[c0, phase0 + shift, m0],
            method="L-BFGS-B",
            bounds=[(0.0, 1.0), (None, None), (0.0, 1.0)],
            options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 2000},
        )
        if best is None or result.fun < best.fun:
            best = result

    contrast, phase, mean = (float(v) for v in best.x)
    phase = math.remainder(phase, 2.0 * math.pi)
    ll_max = -float(best.fun)
    c_max = max(0.0, min(1.0, 2.0 * min(mean, 1.0 - mean)))
    at_boundary = contrast >= c_max - _BOUNDARY_TOL or contrast <= _BOUNDARY_TOL

    def drop(c: float) -> float:
        return ll_max - _log_likelihood((c, phase, mean), phi, n, k) - LN2

    lo = 0.0 if drop(0.0) <= 0 else brentq(drop, 0.0, contrast) if contrast > 0 else 0.0
    hi = c_max if drop(c_max) <= 0 or contrast >= c_max else brentq(drop, contrast, c_max)
    lo, hi = min(lo, contrast), max(hi, contrast)

    notes = []
    if not best.success:
        logger.warning("Ramsey MLE did not converge: %s", best.message)
        notes.append(str(best.message))
    if at_boundary:
        logger.warning("Ramsey MLE contrast %.4f is pinned to a bound.", contrast)
        notes.append("contrast at bound")
    p_fit = _fringe(phi, contrast, phase, mean)
    return FitResult(
        model="m+(C/2)*cos(phi-phi0)",
        parameters={
            "contrast": contrast,
            "phase": phase,
            "mean": mean,
            "contrast_lo": lo,
            "contrast_hi": hi,
        },
        uncertainties={"contrast": (hi - lo) / 2.0},
        residual_norm=float(np.linalg.norm(frac - p_fit)),
        converged=bool(best.success),
        at_boundary=at_boundary,
        notes=notes,
    )


def contrast_interval(fit: FitResult) -> IntervalEstimate:
    p = fit.parameters
    return IntervalEstimate(value=p["contrast"], lo=p["contrast_lo"], hi=p["contrast_hi"], method="profile(ln2)")


# ------------------------------------------------------------------ #
# Exponential decay
# ------------------------------------------------------------------ #
def fit_exp_decay(
    x: Sequence[float],
    y: Sequence[IntervalEstimate],
    floor: Optional[float] = None,
) -> FitResult:
    """Weighted fit of ``a exp(-x / tau) + floor``.

    ``floor=None`` fits the floor as a free parameter; a number holds it fixed.
    Weights come from the interval half-widths.
    """
    x = np.asarray(x, dtype=float)
    values = np.array([est.value for est in y], dtype=float)
    free_floor = floor is None
    if len(x) != len(values):
        raise ValueError("x and y differ in length.")
    if len(x) < (4 if free_floor else 3):
        raise ValueError("fit_exp_decay needs at least 3 points (4 with a free floor).")
    if np.any(x < 0) or np.any(np.diff(x) <= 0):
        raise ValueError("x must be non-negative and strictly increasing.")

    halfwidths = np.array([est.halfwidth for est in y], dtype=float)
    if np.any(halfwidths > 0):
        sigma = np.where(halfwidths > 0, halfwidths, halfwidths[halfwidths > 0].min())
    else:
        sigma = None
    scale = float(x.max()) if x.max() > 0 else 1.0
    xs = x / scale

    base = 0.0 if free_floor else float(floor)
    shifted = values - (min(values.min(), 0.0) - 1e-3 if free_floor else base)
    usable = shifted > 0
    if usable.sum() >= 2:
        slope, intercept = np.polyfit(xs[usable], np.log(shifted[usable]), 1)
        tau0 = -1.0 / slope if slope < 0 else 1.0
        a0 = math.exp(intercept)
    else:
        tau0, a0 = 1.0, float(values[0] - base)
    floor0 = float(values.min()) * 0.5 if free_floor else base

    if free_floor:
        def model(t, a, tau, c):
            return a * np.exp(-t / tau) + c

        p0 = [a0, tau0, floor0]
        bounds = ([-np.inf, 1e-9, -np.inf], [np.inf, np.inf, np.inf])
        names = ("amplitude", "tau", "floor")
    else:
        def model(t, a, tau):
            return a * np.exp(-t / tau) + base

        p0 = [a0, tau0]
        bounds = ([-np.inf, 1e-9], [np.inf, np.inf])
        names = ("amplitude", "tau")

    converged = True
    notes = []
    try:
        popt, pcov = curve_fit(
            model, xs, values, p0=p0, sigma=sigma, absolute_sigma=sigma is not None, bounds=bounds, maxfev=20000
        )
    except (RuntimeError, ValueError) as exc:
        logger.warning("Exponential decay fit did not converge: %s", exc)
        popt, pcov = np.array(p0, dtype=float), np.full((len(p0), len(p0)), np.nan)
        converged = False
        notes.append(str(exc))

    errors = np.sqrt(np.clip(np.diag(pcov), 0.0, None)) if np.all(np.isfinite(pcov)) else np.full(len(p0), np.nan)
    params = dict(zip(names, (float(v) for v in popt)))
    uncertainties = dict(zip(names, (float(v) for v in errors)))
    params["tau"] *= scale
    uncertainties["tau"] *= scale
    if not free_floor:
        params["floor"] = base
    residual = (values - model(xs, *popt)) / (sigma if sigma is not None else 1.0)
    return FitResult(
        model="a*exp(-x/tau)+floor",
        parameters=params,
        uncertainties=uncertainties,
        residual_norm=float(np.linalg.norm(residual)),
        converged=converged,
        notes=notes,
    )


def antitrap_time(fit: FitResult) -> float:
    """1/e time of the lossy channel alone, separating it from decay back to the ground manifold.

    The retained floor is the branch that decayed before being pushed out, so the
    anti-trap rate is the fitted rate times the lost fraction ``a / (a + floor)``.
    """
    a, tau, floor = fit.parameters["amplitude"], fit.parameters["tau"], fit.parameters["floor"]
    if a <= 0:
        raise ValueError("decay amplitude must be positive to separate the anti-trap time.")
    return tau * (a + floor) / a


def per_loop_fidelity(fit: FitResult) -> float:
    return math.exp(-1.0 / fit.parameters["tau"])


def require_usable(fit: FitResult, what: str) -> FitResult:
    if not fit.usable:
        raise RuntimeError(f"{what} fit is not usable: {'; '.join(fit.notes) or 'did not converge'}")
    return fit
