"""Horizontal difference-field diagnostics: joint probability and derived measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import GrayImage

DEFAULT_SUPPORT = 16


@dataclass(frozen=True)
class JointProb:
    """Empirical joint distribution of (backward, forward) horizontal differences.

    Differences outside [-support_bound, support_bound] are clamped to the
    boundary before binning; table[x + T, y + T] = P(x, y).
    """

    support_bound: int
    table: np.ndarray
    total_pairs: int

    def __post_init__(self):
        side = 2 * self.support_bound + 1
        if self.table.shape != (side, side):
            raise ValueError("table shape must be (2T+1, 2T+1)")


def diff_fields(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Backward and forward differences d_b, d_f on interior columns.

    d_b(i,j) = I(i,j) - I(i,j-1), d_f(i,j) = I(i,j) - I(i,j+1); both arrays
    have shape (height, width - 2).
    """
    if img.width < 3:
        raise ValueError("width must be >= 3")
    values = img.pixels.astype(np.int32)
    backward = values[:, 1:-1] - values[:, :-2]
    forward = values[:, 1:-1] - values[:, 2:]
    return backward, forward


def joint_probability(img: GrayImage, support_bound: int = DEFAULT_SUPPORT) -> JointProb:
    """Joint histogram of (d_b, d_f) over interior pixels, normalized to 1."""
    if support_bound < 1:
        raise ValueError("support_bound must be >= 1")
    backward, forward = diff_fields(img)
    t = support_bound
    xb = np.clip(backward, -t, t) + t
    yf = np.clip(forward, -t, t) + t
    side = 2 * t + 1
    flat = xb.ravel() * side + yf.ravel()
    counts = np.bincount(flat, minlength=side * side).reshape(side, side)
    total = int(counts.sum())
    return JointProb(t, counts.astype(np.float64) / total, total)


def quadrant_mass(jp: JointProb) -> float:
    """Total probability in the first and third quadrants (x*y > 0 with same signs)."""
    t = jp.support_bound
    coords = np.arange(-t, t + 1)
    pos = coords > 0
    neg = coords < 0
    first = jp.table[np.ix_(pos, pos)].sum()
    third = jp.table[np.ix_(neg, neg)].sum()
    return float(first + third)


def tail_mass(jp: JointProb, bound: int) -> float:
    """Probability mass with |x| >= bound and |y| >= bound."""
    t = jp.support_bound
    coords = np.abs(np.arange(-t, t + 1)) >= bound
    return float(jp.table[np.ix_(coords, coords)].sum())


def extrema_ratio(img: GrayImage) -> float:
    """Fraction of interior pixels that are horizontal local extrema (d_b*d_f > 0)."""
    backward, forward = diff_fields(img)
    return float(np.mean(backward * forward > 0))


def export_jointprob(jp: JointProb) -> bytes:
    """CSV grid: rows are x = -T..T, columns y = -T..T; values round-trip exactly."""
    lines = []
    for row in jp.table:
        lines.append(",".join(repr(float(v)) for v in row))
    return ("\n".join(lines) + "\n").encode("ascii")
