"""FLD base learners, random-subspace ensembles, pairwise multi-class voting.

The binary classifier is a bag of Fisher linear discriminants, each trained
on a random feature subspace and a stratified bootstrap sample; decisions are
fused by majority vote (L is kept odd so there are no ties). Ensemble size
and subspace dimension are selected by out-of-bag error. Multi-class problems
train one such ensemble per unordered class pair and let the pair votes elect
the label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imgcore import derive_seed

RIDGE_SCALE = 1e-6
DEFAULT_L_CANDIDATES = (11, 31, 51)


class SingularScatterError(ValueError):
    """Within-class scatter not solvable even after ridge regularization."""


@dataclass(frozen=True)
class FldLearner:
    subspace: np.ndarray  # sorted feature indices
    weights: np.ndarray
    bias: float


@dataclass
class EnsembleModel:
    learners: list[FldLearner]
    dim: int
    d_sub: int
    seed: int
    class_pair: tuple[int, int] = (0, 1)
    oob_error: float | None = None  # selection-time estimate, not serialized

    @property
    def n_learners(self) -> int:
        return len(self.learners)


@dataclass
class PairwiseModel:
    k_plus_1: int
    binary_models: list[tuple[tuple[int, int], EnsembleModel]]


@dataclass(frozen=True)
class ClassifierConfig:
    L_candidates: tuple[int, ...] = DEFAULT_L_CANDIDATES
    d_sub_candidates: tuple[int, ...] | None = None
    seed: int = 0


@dataclass
class ConfusionMatrix:
    """Multi-class counts; rows are actual labels, columns predicted labels."""

    labels: list[int]
    counts: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.counts.sum())

    def diagonal_average(self) -> float:
        recalls = np.diag(self.counts) / self.row_sums()
        return float(recalls.mean())

    def to_csv(self) -> bytes:
        lines = ["actual\\predicted," + ",".join(str(l) for l in self.labels)]
        for label, row in zip(self.labels, self.counts):
            lines.append(str(label) + "," + ",".join(str(int(v)) for v in row))
        return ("\n".join(lines) + "\n").encode("ascii")


# ---------------------------------------------------------------------------
# Fisher linear discriminant

def fld_train(X0: np.ndarray, X1: np.ndarray, ridge: float | None = None):
    """Train a two-class FLD; returns (weights, bias).

    w = (S_w + ridge*I)^-1 (mu1 - mu0) with the decision threshold at the
    projected midpoint of the class means: predict 1 iff w.x + bias > 0.
    ridge defaults to RIDGE_SCALE * trace(S_w) / dim.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=np.float64))
    X1 = np.atleast_2d(np.asarray(X1, dtype=np.float64))
    if X0.shape[0] == 0 or X1.shape[0] == 0:
        raise ValueError("both classes need at least one sample")
    if X0.shape[1] != X1.shape[1]:
        raise ValueError("class matrices must share the feature dimension")
    mu0 = X0.mean(axis=0)
    mu1 = X1.mean(axis=0)
    c0 = X0 - mu0
    c1 = X1 - mu1
    scatter = c0.T @ c0 + c1.T @ c1
    dim = scatter.shape[0]
    if ridge is None:
        ridge = RIDGE_SCALE * float(np.trace(scatter)) / dim
    scatter[np.diag_indices(dim)] += ridge
    try:
        weights = np.linalg.solve(scatter, mu1 - mu0)
    except np.linalg.LinAlgError as exc:
        raise SingularScatterError("degenerate subspace: scatter not invertible") from exc
    if not np.all(np.isfinite(weights)):
        raise SingularScatterError("degenerate subspace: non-finite weights")
    bias = -0.5 * float((mu0 + mu1) @ weights)
    return weights, bias


def fld_decide(weights: np.ndarray, bias: float, X: np.ndarray) -> np.ndarray:
    return (np.atleast_2d(X) @ weights + bias > 0).astype(np.int64)


# ---------------------------------------------------------------------------
# random-subspace bootstrap ensemble

def _bag_indices(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Stratified bootstrap: resample each class with replacement, keeping counts."""
    parts = []
    for label in (0, 1):
        idx = np.flatnonzero(y == label)
        parts.append(idx[rng.integers(0, idx.size, idx.size)])
    return np.concatenate(parts)


def _train_learner(X, y, d_sub, rng, bootstrap):
    subspace = np.sort(rng.permutation(X.shape[1])[:d_sub])
    if bootstrap:
        bag = _bag_indices(y, rng)
        oob = np.ones(X.shape[0], dtype=bool)
        oob[bag] = False
    else:
        bag = np.arange(X.shape[0])
        oob = np.zeros(X.shape[0], dtype=bool)
    Xb = X[bag][:, subspace]
    yb = y[bag]
    weights, bias = fld_train(Xb[yb == 0], Xb[yb == 1])
    return FldLearner(subspace, weights, bias), oob


def ensemble_train(
    X: np.ndarray,
    y: np.ndarray,
    L: int,
    d_sub: int,
    seed: int,
    bootstrap: bool = True,
    class_pair: tuple[int, int] = (0, 1),
) -> EnsembleModel:
    """Train L FLD learners on random subspaces; deterministic for a fixed seed."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if L < 1 or L % 2 == 0:
        raise ValueError("L must be a positive odd integer")
    if not 1 <= d_sub <= X.shape[1]:
        raise ValueError("d_sub must lie in [1, dim]")
    if not (np.any(y == 0) and np.any(y == 1)):
        raise ValueError("both labels must be present")
    learners = []
    for ell in range(L):
        rng = np.random.default_rng(derive_seed(seed, "learner", d_sub, ell))
        learner, _ = _train_learner(X, y, d_sub, rng, bootstrap)
        learners.append(learner)
    return EnsembleModel(learners, X.shape[1], d_sub, seed, class_pair)


def _as_matrix(x) -> tuple[np.ndarray, bool]:
    values = getattr(x, "values", x)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def ensemble_votes(model: EnsembleModel, X) -> np.ndarray:
    arr, _ = _as_matrix(X)
    if arr.shape[1] != model.dim:
        raise ValueError(f"feature dim {arr.shape[1]} != model dim {model.dim}")
    votes = np.empty((arr.shape[0], model.n_learners), dtype=np.int64)
    for k, learner in enumerate(model.learners):
        votes[:, k] = fld_decide(learner.weights, learner.bias, arr[:, learner.subspace])
    return votes


def ensemble_predict(model: EnsembleModel, X):
    """Majority vote of the base learners; 0/1 labels."""
    arr, single = _as_matrix(X)
    votes = ensemble_votes(model, arr)
    pred = (2 * votes.sum(axis=1) > model.n_learners).astype(np.int64)
    return int(pred[0]) if single else pred


def _oob_error(votes: np.ndarray, y: np.ndarray) -> float:
    """Error of the out-of-bag majority vote; votes entries are -1 (in bag) or 0/1."""
    valid = votes >= 0
    cover = valid.sum(axis=1)
    ones = (votes == 1).sum(axis=1)
    covered = cover > 0
    if not covered.any():
        return 1.0
    pred = (2 * ones[covered] > cover[covered]).astype(np.int64)
    return float(np.mean(pred != y[covered]))


def default_d_sub_candidates(dim: int) -> tuple[int, ...]:
    return tuple(sorted({math.ceil(math.sqrt(dim)), math.ceil(dim / 8), math.ceil(dim / 4)}))


def ensemble_select_train(
    X: np.ndarray,
    y: np.ndarray,
    config: ClassifierConfig,
    seed: int,
    class_pair: tuple[int, int] = (0, 1),
) -> EnsembleModel:
    """Pick (L, d_sub) by out-of-bag error, then return the winning ensemble.

    For each subspace-size candidate the largest candidate L is trained once;
    smaller L values are evaluated on learner prefixes, so the returned model
    is bit-identical to ensemble_train with the winning (L, d_sub, seed).
    Candidates are clamped so every class keeps at least 2*d_sub samples.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, dim = X.shape
    ls = tuple(sorted(set(config.L_candidates)))
    if not ls or any(l < 1 or l % 2 == 0 for l in ls):
        raise ValueError("L candidates must be positive odd integers")
    min_class = min(int((y == 0).sum()), int((y == 1).sum()))
    cap = min_class // 2
    if cap < 1:
        raise ValueError("class too small: need at least 2 samples per class")
    raw = config.d_sub_candidates or default_d_sub_candidates(dim)
    d_cands = tuple(sorted({min(max(int(d), 1), dim, cap) for d in raw}))
    l_max = max(ls)

    best_key = None
    best_model = None
    for d_sub in d_cands:
        learners = []
        votes = np.full((n, l_max), -1, dtype=np.int64)
        for ell in range(l_max):
            rng = np.random.default_rng(derive_seed(seed, "learner", d_sub, ell))
            learner, oob = _train_learner(X, y, d_sub, rng, bootstrap=True)
            learners.append(learner)
            if oob.any():
                votes[oob, ell] = fld_decide(
                    learner.weights, learner.bias, X[oob][:, learner.subspace]
                )
        for L in ls:
            err = _oob_error(votes[:, :L], y)
            key = (err, d_sub, L)
            if best_key is None or key < best_key:
                best_key = key
                best_model = EnsembleModel(
                    learners[:L], dim, d_sub, seed, class_pair, oob_error=err
                )
    return best_model


# ---------------------------------------------------------------------------
# pairwise coupling

def _check_labels(y: np.ndarray) -> list[int]:
    labels = sorted(int(v) for v in np.unique(y))
    if labels != list(range(1, len(labels) + 1)) or len(labels) < 2:
        raise ValueError("labels must be contiguous integers 1..k+1 with k >= 1")
    return labels


def pairwise_train(X: np.ndarray, y: np.ndarray, config: ClassifierConfig) -> PairwiseModel:
    """One binary ensemble per unordered class pair: N = k*(k+1)/2 models."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    labels = _check_labels(y)
    for label in labels:
        if int((y == label).sum()) < 2:
            raise ValueError(f"class {label} too small: need at least 2 samples")
    models = []
    for a_idx, a in enumerate(labels):
        for b in labels[a_idx + 1 :]:
            rows = (y == a) | (y == b)
            y01 = (y[rows] == b).astype(np.int64)
            model = ensemble_select_train(
                X[rows], y01, config, derive_seed(config.seed, "pair", a, b), (a, b)
            )
            models.append(((a, b), model))
    return PairwiseModel(len(labels), models)


def pairwise_predict(pm: PairwiseModel, X):
    """Each pair model votes for one of its two labels; most votes wins.

    Ties are broken toward the smallest label index.
    """
    arr, single = _as_matrix(X)
    tally = np.zeros((arr.shape[0], pm.k_plus_1 + 1), dtype=np.int64)
    for (a, b), model in pm.binary_models:
        pred = ensemble_predict(model, arr)
        tally[:, a] += pred == 0
        tally[:, b] += pred == 1
    winners = np.argmax(tally[:, 1:], axis=1) + 1
    return int(winners[0]) if single else winners


def evaluate(pm: PairwiseModel, X_test, y_test):
    """Returns (ConfusionMatrix, accuracy, diagonal_average)."""
    X_test = np.asarray(X_test, dtype=np.float64)
    y_test = np.asarray(y_test, dtype=np.int64)
    labels = list(range(1, pm.k_plus_1 + 1))
    present = set(int(v) for v in np.unique(y_test))
    if not present <= set(labels):
        raise ValueError("test set contains labels unknown to the model")
    if present != set(labels):
        raise ValueError("test set must cover every class")
    pred = pairwise_predict(pm, X_test)
    counts = np.zeros((pm.k_plus_1, pm.k_plus_1), dtype=np.int64)
    np.add.at(counts, (y_test - 1, pred - 1), 1)
    cm = ConfusionMatrix(labels, counts)
    return cm, cm.accuracy(), cm.diagonal_average()


def stratified_split(labels: np.ndarray, seed: int) -> np.ndarray:
    """Boolean train mask: per class, a seeded shuffle then the first half."""
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.zeros(labels.shape[0], dtype=bool)
    for label in sorted(int(v) for v in np.unique(labels)):
        idx = np.flatnonzero(labels == label)
        rng = np.random.default_rng(derive_seed(seed, "split", label))
        perm = rng.permutation(idx.size)
        mask[idx[perm[: idx.size // 2]]] = True
    return mask


# ---------------------------------------------------------------------------
# model (de)serialization

def model_to_dict(pm: PairwiseModel, set_id: str, dim: int, **extras) -> dict:
    pairs = []
    for (a, b), model in pm.binary_models:
        pairs.append(
            {
                "i": a,
                "j": b,
                "L": model.n_learners,
                "d_sub": model.d_sub,
                "seed": model.seed,
                "learners": [
                    {
                        "subspace": [int(v) for v in learner.subspace],
                        "weights": [float(v) for v in learner.weights],
                        "bias": float(learner.bias),
                    }
                    for learner in model.learners
                ],
            }
        )
    doc = {"k_plus_1": pm.k_plus_1, "set_id": set_id, "dim": int(dim), "pairs": pairs}
    doc.update(extras)
    return doc


def model_from_dict(doc: dict) -> tuple[PairwiseModel, dict]:
    """Returns (model, metadata) where metadata holds the non-structural keys."""
    dim = int(doc["dim"])
    models = []
    for entry in doc["pairs"]:
        learners = [
            FldLearner(
                np.asarray(item["subspace"], dtype=np.int64),
                np.asarray(item["weights"], dtype=np.float64),
                float(item["bias"]),
            )
            for item in entry["learners"]
        ]
        pair = (int(entry["i"]), int(entry["j"]))
        models.append(
            (pair, EnsembleModel(learners, dim, int(entry["d_sub"]), int(entry["seed"]), pair))
        )
    pm = PairwiseModel(int(doc["k_plus_1"]), models)
    meta = {k: v for k, v in doc.items() if k not in ("k_plus_1", "pairs")}
    return pm, meta
