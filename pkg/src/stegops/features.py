"""Universal steganalytic feature extractors.

Two feature sets:

* ``spam686`` — second-order Markov transition probabilities of truncated
  pixel difference arrays along 8 directions, averaged into an axis block and
  a diagonal block (343 + 343 = 686 values).
* ``minirm`` — a reduced residual co-occurrence family: six high-pass /
  predictor residuals, two quantization steps each, order-4 horizontal
  co-occurrence histograms of values truncated to [-2, 2]
  (6 * 2 * 5**4 = 7500 values).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .imgcore import GrayImage, round_half_away
from .ops import median_filter

SPAM_T = 3
SPAM_DIM = 2 * (2 * SPAM_T + 1) ** 3  # 686

MINIRM_T = 2
MINIRM_QUANTS = (1, 2)
MINIRM_ORDER = 4
MINIRM_RESIDUALS = ("d1h", "d1v", "d2h", "d2v", "sq3", "med3")
MINIRM_DIM = len(MINIRM_RESIDUALS) * len(MINIRM_QUANTS) * (2 * MINIRM_T + 1) ** MINIRM_ORDER

FEATURE_DIMS = {"spam686": SPAM_DIM, "minirm": MINIRM_DIM}

_AXIS_DIRS = ((0, 1), (0, -1), (1, 0), (-1, 0))
_DIAG_DIRS = ((1, 1), (-1, -1), (1, -1), (-1, 1))


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-length real feature vector tagged with its extractor id."""

    set_id: str
    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _shifted_pair(arr: np.ndarray, dy: int, dx: int) -> tuple[np.ndarray, np.ndarray]:
    """Views (a, b) with b displaced by (dy, dx) relative to a, on their overlap."""
    h, w = arr.shape
    r0, r1 = max(0, -dy), h - max(0, dy)
    c0, c1 = max(0, -dx), w - max(0, dx)
    a = arr[r0:r1, c0:c1]
    b = arr[r0 + dy : r1 + dy, c0 + dx : c1 + dx]
    return a, b


def _direction_markov(values: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Second-order transition tensor Pr(D3=c | D2=b, D1=a) for one direction."""
    a, b = _shifted_pair(values, dy, dx)
    diff = np.clip(a - b, -SPAM_T, SPAM_T)
    h, w = diff.shape
    r0, r1 = max(0, -2 * dy), h - max(0, 2 * dy)
    c0, c1 = max(0, -2 * dx), w - max(0, 2 * dx)
    d1 = diff[r0:r1, c0:c1]
    d2 = diff[r0 + dy : r1 + dy, c0 + dx : c1 + dx]
    d3 = diff[r0 + 2 * dy : r1 + 2 * dy, c0 + 2 * dx : c1 + 2 * dx]
    side = 2 * SPAM_T + 1
    idx = ((d1 + SPAM_T) * side + (d2 + SPAM_T)) * side + (d3 + SPAM_T)
    counts = np.bincount(idx.ravel(), minlength=side**3).reshape(side, side, side)
    counts = counts.astype(np.float64)
    denom = counts.sum(axis=2, keepdims=True)
    return np.divide(counts, denom, out=np.zeros_like(counts), where=denom > 0)


def spam_extract(img: GrayImage) -> FeatureVector:
    """686-d second-order SPAM feature with truncation T = 3."""
    if img.width < 4 or img.height < 4:
        raise ValueError("image must be at least 4x4 for spam686")
    values = img.pixels.astype(np.int32)
    axis_block = np.zeros((2 * SPAM_T + 1,) * 3)
    for dy, dx in _AXIS_DIRS:
        axis_block += _direction_markov(values, dy, dx)
    diag_block = np.zeros_like(axis_block)
    for dy, dx in _DIAG_DIRS:
        diag_block += _direction_markov(values, dy, dx)
    feat = np.concatenate([axis_block.ravel() / 4.0, diag_block.ravel() / 4.0])
    return FeatureVector("spam686", feat)


def _minirm_residuals(img: GrayImage) -> list[np.ndarray]:
    values = img.pixels.astype(np.float64)
    d1h = values[:, 1:] - values[:, :-1]
    d1v = values[1:, :] - values[:-1, :]
    d2h = values[:, :-2] - 2.0 * values[:, 1:-1] + values[:, 2:]
    d2v = values[:-2, :] - 2.0 * values[1:-1, :] + values[2:, :]
    # 3x3 "square" predictor (KB kernel): residual = prediction - center
    sq3 = (
        -values[:-2, :-2] + 2.0 * values[:-2, 1:-1] - values[:-2, 2:]
        + 2.0 * values[1:-1, :-2] - 4.0 * values[1:-1, 1:-1] + 2.0 * values[1:-1, 2:]
        - values[2:, :-2] + 2.0 * values[2:, 1:-1] - values[2:, 2:]
    ) / 4.0
    med3 = median_filter(img, 3).pixels.astype(np.float64) - values
    return [d1h, d1v, d2h, d2v, sq3, med3]


def _cooc_block(residual: np.ndarray, q: int) -> np.ndarray:
    """Normalized order-4 horizontal co-occurrence of the quantized residual."""
    rq = np.clip(round_half_away(residual / q), -MINIRM_T, MINIRM_T).astype(np.int64)
    side = 2 * MINIRM_T + 1
    idx = rq[:, : -MINIRM_ORDER + 1] + MINIRM_T
    for k in range(1, MINIRM_ORDER):
        idx = idx * side + (rq[:, k : rq.shape[1] - MINIRM_ORDER + 1 + k] + MINIRM_T)
    counts = np.bincount(idx.ravel(), minlength=side**MINIRM_ORDER).astype(np.float64)
    return counts / counts.sum()


def minirm_extract(img: GrayImage) -> FeatureVector:
    """Reduced residual co-occurrence feature family (7500-d)."""
    if img.width < 8 or img.height < 8:
        raise ValueError("image must be at least 8x8 for minirm")
    blocks = []
    for residual in _minirm_residuals(img):
        for q in MINIRM_QUANTS:
            blocks.append(_cooc_block(residual, q))
    return FeatureVector("minirm", np.concatenate(blocks))


_EXTRACTORS = {"spam686": spam_extract, "minirm": minirm_extract}


def extract(img: GrayImage, set_id: str) -> FeatureVector:
    try:
        return _EXTRACTORS[set_id](img)
    except KeyError:
        raise ValueError(f"unknown feature set {set_id!r}") from None


def feature_matrix(imgs: list[GrayImage], set_id: str) -> np.ndarray:
    """Row i is the feature vector of image i."""
    if not imgs:
        raise ValueError("need at least one image")
    return np.stack([extract(img, set_id).values for img in imgs])


# ---------------------------------------------------------------------------
# feature file format: one JSON header line, then count*dim little-endian f64

def write_features(path, matrix: np.ndarray, labels, set_id: str) -> None:
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    labels = [int(v) for v in labels]
    if matrix.ndim != 2 or matrix.shape[0] != len(labels):
        raise ValueError("matrix rows must match labels")
    if matrix.shape[1] != FEATURE_DIMS.get(set_id, matrix.shape[1]):
        raise ValueError(f"dim {matrix.shape[1]} does not match {set_id}")
    header = {
        "set_id": set_id,
        "dim": int(matrix.shape[1]),
        "count": int(matrix.shape[0]),
        "labels": labels,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        fh.write(matrix.astype("<f8").tobytes())


def read_features(path) -> tuple[np.ndarray, np.ndarray, str]:
    """Returns (matrix, labels, set_id)."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        count, dim = int(header["count"]), int(header["dim"])
        payload = fh.read(count * dim * 8)
    if len(payload) != count * dim * 8:
        raise ValueError("feature file truncated")
    matrix = np.frombuffer(payload, dtype="<f8").reshape(count, dim)
    labels = np.asarray(header["labels"], dtype=np.int64)
    if labels.shape[0] != count:
        raise ValueError("label count mismatch in feature file")
    return matrix, labels, str(header["set_id"])
