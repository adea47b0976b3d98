"""Operating-voltage calibration.

Sweep the pulse peak voltage, record the mean and binary entropy of the
output at each point, fit the tunneling curve to mean-vs-voltage with
optional outlier rejection, and invert the fitted curve to recommend an
operating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (FitFailureError, InsufficientDataError,
                     InvalidArgumentError, UnreachableTargetError)
from .rng import derive_seed
from .simulator import SourceConfig, TunnelingModel, simulate_pulse_train

REJECT_THRESHOLD = 2.5   # on median/MAD standardized residuals
MAX_REJECT_FRACTION = 0.3
MAX_ITERATIONS = 500
SSE_REL_TOL = 1e-10


@dataclass(frozen=True)
class SweepPoint:
    voltage: float
    mean: float
    entropy: float
    n_samples: int


@dataclass(frozen=True)
class TunnelingFit:
    """Fitted curve plus goodness of fit.

    residuals are signed (observed - model) for every input point in input
    order, evaluated against the final model; r_squared and the fit itself
    use only the retained (non-outlier) points.
    """
    model: TunnelingModel
    r_squared: float
    outliers: tuple
    residuals: tuple


def binary_entropy(p: float) -> float:
    """Entropy in bits of a Bernoulli(p) symbol, with 0*log(0) = 0."""
    if not (0 <= p <= 1):
        raise InvalidArgumentError(f"p must lie in [0, 1], got {p}")
    if p == 0 or p == 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def run_sweep(config_template: SourceConfig, voltages, pulses_per_point: int):
    """Simulate one run per voltage and summarize each as a SweepPoint.

    Each point uses an independent child seed derived from the template
    seed and the point index, so the whole sweep is reproducible from the
    template alone.
    """
    voltages = [float(v) for v in voltages]
    if not voltages:
        raise InvalidArgumentError("voltages must be nonempty")
    if any(b <= a for a, b in zip(voltages, voltages[1:])):
        raise InvalidArgumentError("voltages must be strictly increasing")
    if pulses_per_point < 1000:
        raise InvalidArgumentError("pulses_per_point must be at least 1000")

    points = []
    for i, v in enumerate(voltages):
        cfg = replace(config_template, u_high=v,
                      rng_seed=derive_seed(config_template.rng_seed, i))
        stream = simulate_pulse_train(cfg, pulses_per_point)
        mean = float(stream.to_bits().mean()) if len(stream) else 0.0
        points.append(SweepPoint(voltage=v, mean=mean,
                                 entropy=binary_entropy(mean),
                                 n_samples=pulses_per_point))
    return points


def _curve(volts: np.ndarray, A: float, B: float, V0: float) -> np.ndarray:
    out = np.zeros_like(volts)
    above = volts > V0
    out[above] = A * np.exp(-B / (volts[above] - V0))
    return out


def _clamped(params: np.ndarray, v_max: float) -> np.ndarray:
    params = params.copy()
    params[0] = min(max(params[0], 1e-6), 1.0)
    params[1] = max(params[1], 1e-9)
    params[2] = min(max(params[2], 1e-6), v_max - 1e-6)
    return params


def _initial_params(volts: np.ndarray, means: np.ndarray) -> np.ndarray:
    v0 = volts.min() - 0.05
    a = max(0.01, float(means.max()))
    median_idx = np.argsort(means)[len(means) // 2]
    m_med = min(max(float(means[median_idx]), 1e-9), a * (1 - 1e-9))
    b = max(1e-6, -(volts[median_idx] - v0) * math.log(m_med / a))
    return np.array([a, b, v0])


def _levenberg_fit(volts, means, start):
    """Damped least squares with a central-difference Jacobian.

    Steps are accepted only when they lower the SSE, so a warm-started
    refit can never end worse than its starting parameters. Converges when
    the relative SSE improvement drops below SSE_REL_TOL.
    """
    params = _clamped(start, volts.max())
    resid = means - _curve(volts, *params)
    sse = float(resid @ resid)
    lam = 1e-3
    for _ in range(MAX_ITERATIONS):
        jac = np.empty((volts.size, 3))
        for k in range(3):
            h = 1e-6 * max(abs(params[k]), 1e-3)
            hi, lo = params.copy(), params.copy()
            hi[k] += h
            lo[k] -= h
            jac[:, k] = (_curve(volts, *hi) - _curve(volts, *lo)) / (2 * h)
        jtj = jac.T @ jac
        grad = jac.T @ resid
        damping = np.diag(np.maximum(np.diag(jtj), 1e-12))
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(jtj + lam * damping, grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            candidate = _clamped(params + step, volts.max())
            cand_resid = means - _curve(volts, *candidate)
            cand_sse = float(cand_resid @ cand_resid)
            if cand_sse < sse:
                improvement = (sse - cand_sse) / max(sse, 1e-300)
                params, resid, sse = candidate, cand_resid, cand_sse
                lam = max(lam / 10, 1e-12)
                accepted = True
                if improvement < SSE_REL_TOL:
                    return params, sse
                break
            lam *= 10
        if not accepted:
            # no direction improves the SSE anymore
            return params, sse
    raise FitFailureError(
        f"no convergence after {MAX_ITERATIONS} iterations",
        best_fit=_make_fit(params, volts, means, volts, means))


def _r_squared(means: np.ndarray, sse: float) -> float:
    sst = float(np.sum((means - means.mean()) ** 2))
    if sst > 0:
        return 1.0 - sse / sst
    return 1.0 if sse == 0 else float("-inf")


def _make_fit(params, volts_kept, means_kept, volts_all, means_all, outliers=()):
    sse = float(np.sum((means_kept - _curve(volts_kept, *params)) ** 2))
    residuals = means_all - _curve(volts_all, *params)
    return TunnelingFit(
        model=TunnelingModel(A=float(params[0]), B=float(params[1]),
                             V0=float(params[2])),
        r_squared=_r_squared(means_kept, sse),
        outliers=tuple(float(v) for v in outliers),
        residuals=tuple(float(r) for r in residuals))


def fit_tunneling_curve(points, reject_outliers: bool = False) -> TunnelingFit:
    """Least-squares fit of the tunneling curve to sweep means.

    With reject_outliers, points whose first-fit residual deviates from the
    median by more than REJECT_THRESHOLD robust standard deviations
    (1.4826 * MAD) are dropped and the fit repeated once, warm-started from
    the first fit.
    """
    points = list(points)
    if len(points) < 5:
        raise InsufficientDataError(f"need at least 5 points, got {len(points)}")
    volts = np.array([p.voltage for p in points], dtype=float)
    means = np.array([p.mean for p in points], dtype=float)
    if len(set(volts.tolist())) != len(points):
        raise InvalidArgumentError("voltages must be distinct")

    params, sse = _levenberg_fit(volts, means, _initial_params(volts, means))
    if not reject_outliers:
        return _make_fit(params, volts, means, volts, means)

    resid = means - _curve(volts, *params)
    center = np.median(resid)
    scale = max(1.4826 * np.median(np.abs(resid - center)), 1e-8)
    bad = np.abs(resid - center) / scale > REJECT_THRESHOLD
    n_bad = int(bad.sum())
    if n_bad == 0:
        return _make_fit(params, volts, means, volts, means)
    if n_bad > MAX_REJECT_FRACTION * len(points):
        raise InsufficientDataError(
            f"rejection would remove {n_bad} of {len(points)} points")
    if len(points) - n_bad < 5:
        raise InsufficientDataError("fewer than 5 points left after rejection")

    keep = ~bad
    params2, _ = _levenberg_fit(volts[keep], means[keep], params)
    return _make_fit(params2, volts[keep], means[keep], volts, means,
                     outliers=volts[bad])


def recommend_voltage(fit, target_mean: float = 0.5) -> float:
    """Invert the fitted curve: the voltage where P(v) = target_mean."""
    model = fit.model if isinstance(fit, TunnelingFit) else fit
    if not (target_mean > 0):
        raise InvalidArgumentError("target_mean must be positive")
    if target_mean >= model.A:
        raise UnreachableTargetError(
            f"target {target_mean} is not below the asymptote A={model.A}")
    return model.V0 + model.B / math.log(model.A / target_mean)
