"""Ricker-wavelet peak counting via ridge lines across scales."""

from __future__ import annotations

import math

import numpy as np

from tsagent.errors import ToolError
from tsagent.tools.kernels import require_complete

GAP_THRESH = 2
MIN_SNR = 1.0
NOISE_PERCENTILE = 10
KERNEL_HALF_WIDTH = 5  # in units of the wavelet width


def ricker(t: np.ndarray, a: float) -> np.ndarray:
    amp = 2.0 / (math.sqrt(3.0 * a) * math.pi**0.25)
    tt = (t / a) ** 2
    return amp * (1.0 - tt) * np.exp(-tt / 2.0)


def cwt_matrix(x: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Rows are convolutions with odd, centred Ricker kernels; the series is
    extended by mirror reflection so constant input gives constant rows."""
    out = np.empty((widths.size, x.size))
    for i, a in enumerate(widths):
        half = int(KERNEL_HALF_WIDTH * a)
        kernel = ricker(np.arange(-half, half + 1, dtype=float), float(a))
        padded = np.pad(x, half, mode="symmetric")
        out[i] = np.convolve(padded, kernel, mode="valid")
    return out


def _local_maxima(row: np.ndarray) -> np.ndarray:
    inner = (row[1:-1] > row[:-2]) & (row[1:-1] > row[2:])
    return np.flatnonzero(inner) + 1


def ridge_lines(coefs: np.ndarray, widths: np.ndarray, gap_thresh: int = GAP_THRESH) -> list[tuple[list[int], list[int]]]:
    """Trace maxima from the widest scale down, linking each maximum to the
    nearest open ridge within max(1, width/4) columns. Returned as
    (rows, cols), ordered from the widest scale to the narrowest."""
    max_dist = np.maximum(1.0, widths / 4.0)
    maxima = [_local_maxima(r) for r in coefs]
    rows_with = [i for i, m in enumerate(maxima) if m.size]
    if not rows_with:
        return []
    top = rows_with[-1]
    open_lines = [[[top], [int(c)], 0] for c in maxima[top]]
    closed = []
    for row in range(top - 1, -1, -1):
        for line in open_lines:
            line[2] += 1
        last_cols = np.array([line[1][-1] for line in open_lines])
        for col in maxima[row]:
            target = None
            if last_cols.size:
                d = np.abs(col - last_cols)
                j = int(np.argmin(d))
                if d[j] <= max_dist[row]:
                    target = open_lines[j]
            if target is None:
                open_lines.append([[row], [int(col)], 0])
            else:
                target[0].append(row)
                target[1].append(int(col))
                target[2] = 0
        for j in range(len(open_lines) - 1, -1, -1):
            if open_lines[j][2] > gap_thresh:
                closed.append(open_lines.pop(j))
    return [(line[0], line[1]) for line in closed + open_lines]


def number_cwt_peaks(x: np.ndarray, max_width: int) -> dict:
    if max_width < 1:
        raise ToolError("BAD_PARAM", "max_width must be >= 1")
    require_complete(x)
    n = x.size
    if n < 3:
        raise ToolError("WINDOW_TOO_SHORT", "needs at least 3 points")
    widths = np.arange(1, max_width + 1, dtype=float)
    coefs = cwt_matrix(x, widths)
    lines = ridge_lines(coefs, widths)

    window = math.ceil(n / 20)
    half, odd = divmod(window, 2)
    base = np.abs(coefs[0])
    noise = np.array(
        [np.percentile(base[max(i - half, 0) : min(i + half + odd, n)], NOISE_PERCENTILE) for i in range(n)]
    )
    min_len = math.ceil(max_width / 4)
    count = 0
    for rows, cols in lines:
        if len(rows) < min_len:
            continue
        # SNR is read at the narrowest-scale point of the ridge
        r, c = rows[-1], cols[-1]
        strength = abs(coefs[r, c])
        if noise[c] == 0.0:
            count += strength > 0.0
        else:
            count += strength / noise[c] >= MIN_SNR
    return {"value": float(count)}
