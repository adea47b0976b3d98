"""Figure rendering for calibration sweeps, autocorrelation, and battery results.

Uses the Agg backend so output is a pure function of the data: repeated
runs write byte-identical PNGs.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulator import tunneling_probability

DPI = 150
FIGSIZE = (7.0, 4.5)


def _new_axes(xlabel, ylabel, title):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def plot_calibration(points, fit, path, recommended=None):
    """Mean vs voltage: sweep data, fitted curve, rejected points marked."""
    volts = np.array([p.voltage for p in points])
    means = np.array([p.mean for p in points])
    outliers = set(fit.outliers)
    is_out = np.array([v in outliers for v in volts])

    fig, ax = _new_axes("peak voltage (V)", "mean output",
                        f"mean vs voltage (r^2 = {fit.r_squared:.4f})")
    dense = np.linspace(volts.min(), volts.max(), 400)
    ax.plot(dense, [tunneling_probability(fit.model, v) for v in dense],
            "-", color="tab:blue", label="fit")
    ax.plot(volts[~is_out], means[~is_out], "o", color="tab:green", label="sweep")
    if is_out.any():
        ax.plot(volts[is_out], means[is_out], "x", color="tab:red",
                markersize=9, label="rejected")
    if recommended is not None:
        ax.axvline(recommended, color="gray", linestyle="--",
                   label=f"recommended {recommended:.3f} V")
    ax.legend()
    _save(fig, path)


def plot_entropy_curve(points, path):
    volts = [p.voltage for p in points]
    fig, ax = _new_axes("peak voltage (V)", "binary entropy (bits)",
                        "per-bit entropy vs voltage")
    ax.plot(volts, [p.entropy for p in points], "o-", color="tab:purple")
    ax.set_ylim(-0.02, 1.05)
    _save(fig, path)


def plot_autocorrelation(coefficients, n_bits, path):
    """Lag correlations with the white-noise 4/sqrt(n) confidence band."""
    lags = [lag for lag, _ in coefficients]
    rhos = [rho for _, rho in coefficients]
    band = 4.0 / np.sqrt(n_bits)
    fig, ax = _new_axes("lag (bits)", "autocorrelation", "extracted-stream autocorrelation")
    markerline, stemlines, _ = ax.stem(lags, rhos)
    plt.setp(markerline, markersize=3)
    plt.setp(stemlines, linewidth=0.8)
    ax.axhline(band, color="tab:red", linestyle="--", linewidth=1,
               label=f"+/-4/sqrt(n) = {band:.2e}")
    ax.axhline(-band, color="tab:red", linestyle="--", linewidth=1)
    ax.legend()
    _save(fig, path)


def plot_proportions(report, path):
    """Per-test chunk pass proportions against the minimum pass band."""
    if not report.proportions:
        return
    names = list(report.proportions)
    values = [report.proportions[n] for n in names]
    fig, ax = _new_axes("", "pass proportion",
                        f"per-test pass proportion over {report.n_subsequences} chunks")
    ax.plot(range(len(names)), values, "o", color="tab:blue")
    ax.axhline(report.min_pass_rate, color="tab:red", linestyle="--",
               label=f"minimum {report.min_pass_rate:.4f}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(min(min(values), report.min_pass_rate) - 0.02, 1.01)
    ax.legend()
    _save(fig, path)
