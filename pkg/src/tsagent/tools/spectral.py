"""Frequency-domain tools: DFT coefficients, Welch density, spectral entropy."""

from __future__ import annotations

import numpy as np

from tsagent.errors import ToolError
from tsagent.tools.kernels import require_complete

WELCH_MAX_SEGMENT = 256
WELCH_MIN_POINTS = 8

_ATTRS = ("real", "imag", "abs", "angle")


def fft_coefficient(x: np.ndarray, coeffs: list[int], attr: str) -> dict:
    require_complete(x)
    if attr not in _ATTRS:
        raise ToolError("BAD_PARAM", f"attr must be one of {_ATTRS}")
    if not coeffs:
        raise ToolError("BAD_PARAM", "coeffs must not be empty")
    top = x.size // 2
    bad = [k for k in coeffs if not 0 <= k <= top]
    if bad:
        raise ToolError("BAD_PARAM", f"coefficients {bad} outside [0, {top}]")
    spec = np.fft.rfft(x)
    out = {}
    for k in coeffs:
        c = spec[k]
        if attr == "real":
            v = c.real
        elif attr == "imag":
            v = c.imag
        elif attr == "abs":
            v = abs(c)
        else:
            v = np.angle(c, deg=True)
        out[f"coeff_{k}"] = float(v)
    return out


def welch_psd(x: np.ndarray) -> np.ndarray:
    """One-sided Welch density at unit sampling rate.

    Segments of min(256, n) points with 50% overlap, periodic Hann taper and
    per-segment mean removal; bin k sits at frequency k / segment_length.
    """
    n = x.size
    nseg = min(WELCH_MAX_SEGMENT, n)
    step = nseg - nseg // 2
    taper = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(nseg) / nseg)
    scale = 1.0 / float(taper @ taper)
    starts = range(0, n - nseg + 1, step)
    acc = np.zeros(nseg // 2 + 1)
    for s in starts:
        seg = x[s : s + nseg]
        spec = np.fft.rfft((seg - seg.mean()) * taper)
        acc += (spec.real**2 + spec.imag**2) * scale
    psd = acc / len(starts)
    if nseg % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    return psd


def _checked_psd(x: np.ndarray) -> np.ndarray:
    require_complete(x)
    if x.size < WELCH_MIN_POINTS:
        raise ToolError("WINDOW_TOO_SHORT", f"needs at least {WELCH_MIN_POINTS} points")
    return welch_psd(x)


def spkt_welch_density(x: np.ndarray, coeffs: list[int]) -> dict:
    if not coeffs:
        raise ToolError("BAD_PARAM", "coeffs must not be empty")
    psd = _checked_psd(x)
    bad = [k for k in coeffs if not 0 <= k < psd.size]
    if bad:
        raise ToolError("BAD_PARAM", f"coefficients {bad} outside [0, {psd.size - 1}]")
    return {f"coeff_{k}": float(psd[k]) for k in coeffs}


def fourier_entropy(x: np.ndarray, bins: int) -> dict:
    if bins < 1:
        raise ToolError("BAD_PARAM", "bins must be >= 1")
    psd = _checked_psd(x)
    peak = psd.max()
    if not peak > 0.0:
        raise ToolError("ZERO_VARIANCE", "power spectrum is identically zero")
    counts, _ = np.histogram(psd / peak, bins=bins, range=(0.0, 1.0))
    p = counts[counts > 0] / counts.sum()
    return {"value": float(-np.sum(p * np.log(p))) + 0.0}
