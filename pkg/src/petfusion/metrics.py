"""Image-quality metrics: PSNR, SSIM, NMSE.

All images are expected on a [0, 1] scale (peak defaults to 1.0). SSIM uses
the canonical 11x11 Gaussian window (sigma=1.5) with K1=0.01, K2=0.03 and the
local map is computed in 'valid' mode, i.e. only where the window fully fits.
PSNR is capped at 99 dB for zero MSE so aggregates stay finite.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ContractError, ShapeError

PSNR_CAP_DB = 99.0


def _check_pair(x: np.ndarray, ref: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ShapeError(f"metric inputs differ in shape: {x.shape} vs {ref.shape}")
    return x, ref


def mse(x, ref) -> float:
    x, ref = _check_pair(x, ref)
    d = x - ref
    return float(np.mean(d * d))


def psnr(x, ref, peak: float = 1.0) -> float:
    if peak <= 0:
        raise ContractError(f"peak must be positive, got {peak}")
    err = mse(x, ref)
    if err == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(peak * peak / err))


def nmse(x, ref) -> float:
    x, ref = _check_pair(x, ref)
    denom = float(np.sum(ref * ref))
    if denom == 0.0:
        raise ContractError("nmse undefined for an all-zero reference")
    d = x - ref
    return float(np.sum(d * d) / denom)


def _gaussian_kernel1d(window: int, sigma: float) -> np.ndarray:
    half = window // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    # separable correlation, 'valid' output
    out = np.apply_along_axis(lambda r: np.convolve(r, k[::-1], mode="valid"), 1, img)
    out = np.apply_along_axis(lambda c: np.convolve(c, k[::-1], mode="valid"), 0, out)
    return out


def ssim(x, ref, window: int = 11, k1: float = 0.01, k2: float = 0.03,
         peak: float = 1.0, sigma: float = 1.5) -> float:
    x, ref = _check_pair(x, ref)
    if x.ndim != 2:
        raise ShapeError(f"ssim expects 2-d images, got shape {x.shape}")
    if min(x.shape) < window:
        raise ConfigError(f"image sides {x.shape} smaller than ssim window {window}")
    k = _gaussian_kernel1d(window, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mu_x = _filter_valid(x, k)
    mu_y = _filter_valid(ref, k)
    xx = _filter_valid(x * x, k) - mu_x * mu_x
    yy = _filter_valid(ref * ref, k) - mu_y * mu_y
    xy = _filter_valid(x * ref, k) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def metric_row(x, ref, peak: float = 1.0) -> dict:
    return {
        "psnr_db": psnr(x, ref, peak=peak),
        "ssim": ssim(x, ref, peak=peak),
        "nmse": nmse(x, ref),
    }


def aggregate(values) -> tuple[float, float]:
    """Mean and (population) standard deviation, paper-style u±v."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ContractError("cannot aggregate an empty metric list")
    return float(arr.mean()), float(arr.std())


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.3f}±{std:.3f}"
