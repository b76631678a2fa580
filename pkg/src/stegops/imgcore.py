"""8-bit grayscale images: value type, PGM I/O, synthetic corpora, quality stats."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

PEAK = 255

PSNR_INFINITE = math.inf
"""Sentinel PSNR for a pair of identical images (MSE == 0)."""


class PgmError(ValueError):
    """Malformed or unsupported PGM data."""


def round_half_away(values) -> np.ndarray:
    """Round to the nearest integer with halves away from zero.

    This is the single rounding convention used across the package; numpy's
    default rounds halves to even, which would let per-operation conventions
    drift apart.
    """
    arr = np.asarray(values, dtype=np.float64)
    return np.trunc(arr + np.copysign(0.5, arr))


def iround(value) -> int:
    """Scalar round-half-away-from-zero."""
    return int(round_half_away(np.float64(value)))


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a tuple of ints/strings (order sensitive).

    Used wherever per-item randomness must not depend on execution order,
    e.g. per-image corpus seeds or per-learner ensemble seeds.
    """
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 8-bit grayscale raster, pixels shape (height, width) uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("pixels must be a non-empty 2-D array")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer):
                raise ValueError("pixel intensities must be integers")
            if px.min() < 0 or px.max() > PEAK:
                raise ValueError("pixel intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        else:
            px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def as_float(self) -> np.ndarray:
        """Writable float64 copy of the pixel grid."""
        return self.pixels.astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class PairStats:
    """Modification ratio and PSNR of an operated image against its original."""

    modification_ratio: float
    psnr_db: float


def _skip_space_and_comments(buf: bytes, pos: int) -> int:
    while pos < len(buf):
        c = buf[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = buf.find(b"\n", pos)
            pos = len(buf) if nl < 0 else nl + 1
        else:
            break
    return pos


def load_pgm(data: bytes) -> GrayImage:
    """Parse a binary PGM (P5, maxval 255) byte string.

    Whitespace and '#' comments in the header are accepted; canonical output
    of save_pgm round-trips bit-exactly.
    """
    buf = bytes(data)
    if buf[:2] != b"P5":
        raise PgmError("not a binary PGM (P5) stream")
    pos = 2
    fields = []
    while len(fields) < 3:
        pos = _skip_space_and_comments(buf, pos)
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        token = buf[start:pos]
        if not token.isdigit():
            raise PgmError("malformed header: expected unsigned decimal integer")
        fields.append(int(token))
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise PgmError("malformed header: zero image dimension")
    if maxval != PEAK:
        raise PgmError(f"unsupported maxval {maxval} (only 255)")
    pos += 1  # exactly one whitespace byte separates the header from the raster
    need = width * height
    payload = buf[pos : pos + need]
    if len(payload) < need:
        raise PgmError("truncated payload")
    return GrayImage(np.frombuffer(payload, dtype=np.uint8).reshape(height, width))


def save_pgm(img: GrayImage) -> bytes:
    """Canonical P5 encoding: 'P5\\n<w> <h>\\n255\\n' then row-major raster."""
    header = f"P5\n{img.width} {img.height}\n{PEAK}\n".encode("ascii")
    return header + img.pixels.tobytes()


def _check_same_dims(a: GrayImage, b: GrayImage):
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def modification_ratio(a: GrayImage, b: GrayImage) -> float:
    """Fraction of pixel positions whose values differ between a and b."""
    _check_same_dims(a, b)
    return float(np.mean(a.pixels != b.pixels))


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB; PSNR_INFINITE for identical images."""
    _check_same_dims(a, b)
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_INFINITE
    return 10.0 * math.log10(PEAK * PEAK / mse)


def pair_stats(a: GrayImage, b: GrayImage) -> PairStats:
    return PairStats(modification_ratio(a, b), psnr(a, b))


def synth_corpus(count: int, width: int, height: int, seed: int) -> list[GrayImage]:
    """Deterministic synthetic grayscale corpus.

    Each image mixes a 2-D linear gradient, a handful of low-frequency
    sinusoids and mild Gaussian noise, so adjacent pixels stay correlated the
    way they are in natural photographs. Per-image seeds are derived from
    (seed, index), making generation order-independent.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if width < 8 or height < 8:
        raise ValueError("corpus images must be at least 8x8")
    return [
        _synth_image(width, height, derive_seed(seed, "image", i))
        for i in range(count)
    ]


def _synth_image(width: int, height: int, seed: int) -> GrayImage:
    rng = np.random.default_rng(seed)
    xn = np.arange(width, dtype=np.float64) / max(width - 1, 1)
    yn = np.arange(height, dtype=np.float64) / max(height - 1, 1)
    base = rng.uniform(96.0, 160.0)
    sx, sy = rng.uniform(-60.0, 60.0, size=2)
    field = base + sx * (xn[None, :] - 0.5) + sy * (yn[:, None] - 0.5)
    for _ in range(int(rng.integers(3, 9))):
        amp = rng.uniform(4.0, 18.0)
        fx, fy = rng.uniform(0.3, 5.0, size=2)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        field = field + amp * np.sin(
            2.0 * math.pi * (fx * xn[None, :] + fy * yn[:, None]) + phase
        )
    sigma = rng.uniform(1.0, 4.0)
    field = field + rng.normal(0.0, sigma, size=(height, width))
    return GrayImage(np.clip(round_half_away(field), 0, PEAK).astype(np.uint8))


def downsample2(img: GrayImage) -> GrayImage:
    """Halve both dimensions; each output pixel is the rounded mean of a 2x2 block."""
    if img.width % 2 or img.height % 2:
        raise ValueError("downsample2 requires even dimensions")
    blocks = img.as_float().reshape(img.height // 2, 2, img.width // 2, 2)
    means = blocks.mean(axis=(1, 3))
    return GrayImage(round_half_away(means).astype(np.uint8))


def crop_center(img: GrayImage, width: int, height: int) -> GrayImage:
    """Centered crop, used to preprocess externally supplied images."""
    if width < 1 or height < 1 or width > img.width or height > img.height:
        raise ValueError("crop size must fit inside the image")
    x0 = (img.width - width) // 2
    y0 = (img.height - height) // 2
    return GrayImage(img.pixels[y0 : y0 + height, x0 : x0 + width])
