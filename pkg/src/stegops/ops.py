"""Simulators for the eleven image processing operations and parameter sampling.

All operations are pure: they take a GrayImage plus parameters and return a
new GrayImage. Window operations use symmetric (mirror) border padding, and
rounding happens once, at the very end of each operation, with halves away
from zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .imgcore import GrayImage, derive_seed, iround, round_half_away

OP_KINDS = ("GC", "HE", "UM", "MeanF", "GF", "MedF", "WF", "Sca", "Rot", "JPEG", "JP2")

GAMMA_CHOICES = (0.5, 0.6, 0.7, 0.8, 0.9, 1.2, 1.4, 1.6, 1.8, 2.0)
HSIZE_CHOICES = (3, 5, 7)
UPSAMPLE_PERCENTS = (1, 3, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90)
DOWNSAMPLE_PERCENTS = (1, 3, 5, 10, 15, 20, 25, 30, 35, 40, 45)
SCALE_FACTORS = tuple(1.0 + p / 100.0 for p in UPSAMPLE_PERCENTS) + tuple(
    1.0 - p / 100.0 for p in DOWNSAMPLE_PERCENTS
)
ROTATION_DEGREES = (1, 3, 5, 10, 15, 20, 25, 30, 35, 40, 45)
JPEG_QUALITY_RANGE = (75, 99)
JP2_RATIO_RANGE = (2.0, 8.0)
UM_SIGMA_RANGE = (0.5, 1.5)
UM_LAMBDA_RANGE = (0.5, 1.5)
GF_SIGMA_RANGE = (0.8, 1.6)


@dataclass(frozen=True)
class OperationSpec:
    """One concrete operation: a kind tag plus its sampled parameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "OperationSpec":
        return cls(kind=str(obj["kind"]), params=dict(obj.get("params", {})))


def _finalize(values: np.ndarray) -> GrayImage:
    return GrayImage(np.clip(round_half_away(values), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# point operations

def gamma_correct(img: GrayImage, gamma: float) -> GrayImage:
    """v -> round(255 * (v/255)**gamma), clamped."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    levels = np.arange(256, dtype=np.float64)
    lut = np.clip(round_half_away(255.0 * (levels / 255.0) ** gamma), 0, 255)
    return GrayImage(lut.astype(np.uint8)[img.pixels])


def hist_equalize(img: GrayImage) -> GrayImage:
    """Remap intensities through the image's own empirical CDF."""
    counts = np.bincount(img.pixels.ravel(), minlength=256)
    cdf = np.cumsum(counts) / img.pixels.size
    lut = np.clip(round_half_away(255.0 * cdf), 0, 255).astype(np.uint8)
    return GrayImage(lut[img.pixels])


# ---------------------------------------------------------------------------
# linear and rank filtering

def _convolve(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Cross-correlate with symmetric padding, summing kernel taps in fixed order."""
    k = kernel.shape[0]
    r = k // 2
    h, w = values.shape
    padded = np.pad(values, r, mode="symmetric")
    acc = np.zeros((h, w), dtype=np.float64)
    for du in range(k):
        for dv in range(k):
            acc += kernel[du, dv] * padded[du : du + h, dv : dv + w]
    return acc


def gaussian_kernel(hsize: int, sigma: float) -> np.ndarray:
    """Sampled 2-D Gaussian, renormalized to sum exactly 1."""
    if hsize < 1 or hsize % 2 == 0:
        raise ValueError("kernel size must be odd")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    offsets = np.arange(hsize, dtype=np.float64) - hsize // 2
    g1 = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    kernel = np.outer(g1, g1)
    return kernel / kernel.sum()


def linear_filter(img: GrayImage, kernel: np.ndarray) -> GrayImage:
    """Convolve with a normalized odd square kernel (mirror padding)."""
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError("kernel must be square")
    if kernel.shape[0] % 2 == 0:
        raise ValueError("kernel side must be odd")
    if abs(kernel.sum() - 1.0) > 1e-8:
        raise ValueError("kernel entries must sum to 1")
    return _finalize(_convolve(img.as_float(), kernel))


def mean_filter(img: GrayImage, hsize: int) -> GrayImage:
    if hsize < 3 or hsize % 2 == 0:
        raise ValueError("hsize must be an odd integer >= 3")
    kernel = np.full((hsize, hsize), 1.0 / (hsize * hsize))
    return linear_filter(img, kernel)


def gaussian_filter(img: GrayImage, hsize: int, sigma: float) -> GrayImage:
    if hsize < 3 or hsize % 2 == 0:
        raise ValueError("hsize must be an odd integer >= 3")
    return linear_filter(img, gaussian_kernel(hsize, sigma))


def unsharp_mask(img: GrayImage, sigma: float, lam: float) -> GrayImage:
    """out = I + lambda * (I - G_sigma * I), with kernel size 2*ceil(2*sigma)+1."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    hsize = 2 * math.ceil(2.0 * sigma) + 1
    values = img.as_float()
    blurred = _convolve(values, gaussian_kernel(hsize, sigma))
    return _finalize(values + lam * (values - blurred))


def _windows(values: np.ndarray, hsize: int) -> np.ndarray:
    padded = np.pad(values, hsize // 2, mode="symmetric")
    return np.lib.stride_tricks.sliding_window_view(padded, (hsize, hsize))


def median_filter(img: GrayImage, hsize: int) -> GrayImage:
    if hsize not in HSIZE_CHOICES:
        raise ValueError("hsize must be one of 3, 5, 7")
    med = np.median(_windows(img.pixels, hsize), axis=(-2, -1))
    # odd window count: the median is an exact integer, no rounding needed
    return GrayImage(med.astype(np.uint8))


def wiener_filter(img: GrayImage, hsize: int) -> GrayImage:
    """Adaptive local-statistics filter.

    Per pixel: local mean mu and variance s2 over the mirror-padded window;
    the noise floor nu is the mean of all local variances; the output pulls
    the pixel toward mu by max(0, s2-nu)/max(s2, nu).
    """
    if hsize not in HSIZE_CHOICES:
        raise ValueError("hsize must be one of 3, 5, 7")
    values = img.as_float()
    win = _windows(values, hsize)
    mu = win.mean(axis=(-2, -1))
    s2 = np.maximum((win**2).mean(axis=(-2, -1)) - mu * mu, 0.0)
    nu = s2.mean()
    num = np.maximum(s2 - nu, 0.0)
    den = np.maximum(s2, nu)
    gain = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return _finalize(mu + gain * (values - mu))


# ---------------------------------------------------------------------------
# resampling

def _bilinear(values: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    h, w = values.shape
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    top = (1.0 - fx) * values[y0, x0] + fx * values[y0, x1]
    bot = (1.0 - fx) * values[y1, x0] + fx * values[y1, x1]
    return (1.0 - fy) * top + fy * bot


def scale_bilinear(img: GrayImage, factor: float) -> GrayImage:
    """Resize to round(factor * dim) per axis with bilinear interpolation."""
    if not factor > 0:
        raise ValueError("scale factor must be positive")
    out_w = iround(factor * img.width)
    out_h = iround(factor * img.height)
    if out_w < 8 or out_h < 8:
        raise ValueError("scaled output would be smaller than 8x8")
    sx = (np.arange(out_w, dtype=np.float64) + 0.5) * (img.width / out_w) - 0.5
    sy = (np.arange(out_h, dtype=np.float64) + 0.5) * (img.height / out_h) - 0.5
    grid_x, grid_y = np.meshgrid(sx, sy)
    return _finalize(_bilinear(img.as_float(), grid_x, grid_y))


def _max_inscribed(w: float, h: float, angle: float) -> tuple[float, float]:
    """Largest axis-aligned w x h rectangle inside a w x h rectangle rotated by angle."""
    sin_a = abs(math.sin(angle))
    cos_a = abs(math.cos(angle))
    if sin_a < 1e-12:
        return w, h
    long_side, short_side = (w, h) if w >= h else (h, w)
    if short_side <= 2.0 * sin_a * cos_a * long_side or abs(sin_a - cos_a) < 1e-12:
        x = 0.5 * short_side
        if w >= h:
            return x / sin_a, x / cos_a
        return x / cos_a, x / sin_a
    cos_2a = cos_a * cos_a - sin_a * sin_a
    return (w * cos_a - h * sin_a) / cos_2a, (h * cos_a - w * sin_a) / cos_2a


def rotate_bilinear(img: GrayImage, degrees: float) -> GrayImage:
    """Rotate about the center; output is the largest centered axis-aligned
    region fully covered by the rotated source, so no sample falls outside."""
    theta = math.radians(degrees)
    eff = abs(theta) % math.pi
    if eff > math.pi / 2.0:
        eff = math.pi - eff
    span_w, span_h = float(img.width - 1), float(img.height - 1)
    fit_w, fit_h = _max_inscribed(span_w, span_h, eff)
    out_w = int(math.floor(fit_w + 1e-9)) + 1
    out_h = int(math.floor(fit_h + 1e-9)) + 1
    if out_w < 8 or out_h < 8:
        raise ValueError("rotated output would be smaller than 8x8")
    xs = np.arange(out_w, dtype=np.float64) - (out_w - 1) / 2.0
    ys = np.arange(out_h, dtype=np.float64) - (out_h - 1) / 2.0
    grid_x, grid_y = np.meshgrid(xs, ys)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    sx = cos_t * grid_x + sin_t * grid_y + span_w / 2.0
    sy = -sin_t * grid_x + cos_t * grid_y + span_h / 2.0
    return _finalize(_bilinear(img.as_float(), sx, sy))


# ---------------------------------------------------------------------------
# lossy compression proxies

JPEG_LUMA_QUANT = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def _dct_basis() -> np.ndarray:
    k = np.arange(8, dtype=np.float64)[:, None]
    n = np.arange(8, dtype=np.float64)[None, :]
    basis = np.cos((2.0 * n + 1.0) * k * math.pi / 16.0)
    basis[0, :] *= math.sqrt(1.0 / 2.0)
    return basis * 0.5


_DCT = _dct_basis()


def jpeg_quant_table(quality: int) -> np.ndarray:
    """Quality-scaled luminance quantization steps, clamped to [1, 255]."""
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in [1, 100]")
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.floor((JPEG_LUMA_QUANT * scale + 50.0) / 100.0), 1, 255)


def _to_blocks(img: GrayImage) -> tuple[np.ndarray, int, int]:
    h, w = img.height, img.width
    pad_h = (-h) % 8
    pad_w = (-w) % 8
    padded = np.pad(img.as_float(), ((0, pad_h), (0, pad_w)), mode="edge")
    hb, wb = padded.shape[0] // 8, padded.shape[1] // 8
    blocks = padded.reshape(hb, 8, wb, 8).transpose(0, 2, 1, 3)
    return blocks, hb, wb

def _jpeg_quantized(img: GrayImage, quality: int):
    """Quantized block DCT: (integer code blocks, dequantized blocks, steps)."""
    steps = jpeg_quant_table(quality)
    blocks, hb, wb = _to_blocks(img)
    shifted = blocks - 128.0
    coeffs = np.einsum("ub,yxbc,vc->yxuv", _DCT, shifted, _DCT, optimize=False)
    codes = round_half_away(coeffs / steps)
    return codes, codes * steps, steps


def jpeg_proxy(img: GrayImage, quality: int) -> GrayImage:
    """Pixel-domain effect of JPEG at the given quality factor.

    Edge-pad to 8x8 blocks, level-shift, 2-D DCT, quantize with the scaled
    standard luminance table, dequantize, inverse DCT, unshift, crop. Entropy
    coding is omitted: quantization is the only stage that touches pixels.
    """
    _, dequant, _ = _jpeg_quantized(img, quality)
    spatial = np.einsum("ub,yxuv,vc->yxbc", _DCT, dequant, _DCT, optimize=False)
    hb, wb = spatial.shape[0], spatial.shape[1]
    full = spatial.transpose(0, 2, 1, 3).reshape(hb * 8, wb * 8) + 128.0
    return _finalize(full[: img.height, : img.width])


def _lift53_forward(x: np.ndarray) -> np.ndarray:
    """One CDF 5/3 integer lifting level along the last axis (even length)."""
    s = x[..., 0::2].copy()
    d = x[..., 1::2].copy()
    s_right = np.concatenate([s[..., 1:], s[..., -1:]], axis=-1)
    d -= (s + s_right) // 2
    d_left = np.concatenate([d[..., :1], d[..., :-1]], axis=-1)
    s += (d_left + d + 2) // 4
    return np.concatenate([s, d], axis=-1)


def _lift53_inverse(y: np.ndarray) -> np.ndarray:
    m = y.shape[-1] // 2
    s = y[..., :m].copy()
    d = y[..., m:].copy()
    d_left = np.concatenate([d[..., :1], d[..., :-1]], axis=-1)
    s -= (d_left + d + 2) // 4
    s_right = np.concatenate([s[..., 1:], s[..., -1:]], axis=-1)
    d += (s + s_right) // 2
    out = np.empty_like(y)
    out[..., 0::2] = s
    out[..., 1::2] = d
    return out


def _dwt53_2d(x: np.ndarray) -> np.ndarray:
    rows = _lift53_forward(x)
    return _lift53_forward(rows.T).T


def _idwt53_2d(y: np.ndarray) -> np.ndarray:
    cols = _lift53_inverse(y.T).T
    return _lift53_inverse(cols)


def _deadzone(coeffs: np.ndarray, step: int) -> np.ndarray:
    return np.sign(coeffs) * (np.abs(coeffs) // step) * step


def jp2_proxy(img: GrayImage, ratio: float) -> GrayImage:
    """Wavelet-domain compression proxy (not a conformant JPEG 2000 codec).

    Two CDF 5/3 integer lifting levels; detail subbands pass through a
    dead-zone quantizer whose step grows with the requested ratio; the final
    approximation band is untouched. ratio = 1 is lossless.
    """
    if not ratio >= 1:
        raise ValueError("compression ratio must be >= 1")
    if img.width % 4 or img.height % 4:
        raise ValueError("dimensions must be divisible by 4 (pad first)")
    step = iround(ratio)
    h2, w2 = img.height // 2, img.width // 2
    h4, w4 = img.height // 4, img.width // 4
    t = _dwt53_2d(img.pixels.astype(np.int64))
    t[:h2, :w2] = _dwt53_2d(t[:h2, :w2])
    quantized = _deadzone(t, step)
    quantized[:h4, :w4] = t[:h4, :w4]
    quantized[:h2, :w2] = _idwt53_2d(quantized[:h2, :w2])
    restored = _idwt53_2d(quantized)
    return GrayImage(np.clip(restored, 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# parameter sampling and dispatch

def sample_spec(kind: str, rng_seed: int) -> OperationSpec:
    """Draw one parameter set uniformly from the operation's documented range."""
    rng = np.random.default_rng(rng_seed)
    if kind == "GC":
        gamma = GAMMA_CHOICES[rng.integers(len(GAMMA_CHOICES))]
        return OperationSpec("GC", {"gamma": float(gamma)})
    if kind == "HE":
        return OperationSpec("HE", {})
    if kind == "UM":
        sigma = rng.uniform(*UM_SIGMA_RANGE)
        lam = rng.uniform(*UM_LAMBDA_RANGE)
        return OperationSpec("UM", {"sigma": float(sigma), "lambda": float(lam)})
    if kind == "MeanF":
        return OperationSpec("MeanF", {"hsize": int(HSIZE_CHOICES[rng.integers(3)])})
    if kind == "GF":
        hsize = int(HSIZE_CHOICES[rng.integers(3)])
        sigma = rng.uniform(*GF_SIGMA_RANGE)
        return OperationSpec("GF", {"hsize": hsize, "sigma": float(sigma)})
    if kind == "MedF":
        return OperationSpec("MedF", {"hsize": int(HSIZE_CHOICES[rng.integers(3)])})
    if kind == "WF":
        return OperationSpec("WF", {"hsize": int(HSIZE_CHOICES[rng.integers(3)])})
    if kind == "Sca":
        factor = SCALE_FACTORS[rng.integers(len(SCALE_FACTORS))]
        return OperationSpec("Sca", {"factor": float(factor)})
    if kind == "Rot":
        deg = ROTATION_DEGREES[rng.integers(len(ROTATION_DEGREES))]
        return OperationSpec("Rot", {"degrees": float(deg)})
    if kind == "JPEG":
        lo, hi = JPEG_QUALITY_RANGE
        return OperationSpec("JPEG", {"quality": int(rng.integers(lo, hi + 1))})
    if kind == "JP2":
        return OperationSpec("JP2", {"ratio": float(rng.uniform(*JP2_RATIO_RANGE))})
    raise ValueError(f"unknown operation kind {kind!r}")


def sample_spec_for(kind: str, *seed_parts) -> OperationSpec:
    """sample_spec with a seed derived from arbitrary stable parts."""
    return sample_spec(kind, derive_seed(*seed_parts))


def apply(spec: OperationSpec, img: GrayImage) -> GrayImage:
    """Dispatch an OperationSpec to its simulator."""
    kind, p = spec.kind, spec.params
    if kind == "GC":
        return gamma_correct(img, p["gamma"])
    if kind == "HE":
        return hist_equalize(img)
    if kind == "UM":
        return unsharp_mask(img, p["sigma"], p["lambda"])
    if kind == "MeanF":
        return mean_filter(img, p["hsize"])
    if kind == "GF":
        return gaussian_filter(img, p["hsize"], p["sigma"])
    if kind == "MedF":
        return median_filter(img, p["hsize"])
    if kind == "WF":
        return wiener_filter(img, p["hsize"])
    if kind == "Sca":
        return scale_bilinear(img, p["factor"])
    if kind == "Rot":
        return rotate_bilinear(img, p["degrees"])
    if kind == "JPEG":
        return jpeg_proxy(img, p["quality"])
    if kind == "JP2":
        return jp2_proxy(img, p["ratio"])
    raise ValueError(f"unknown operation kind {kind!r}")
