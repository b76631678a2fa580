"""Experiment orchestration: corpus generation, extraction, training, evaluation.

Every stage reads and writes the documented on-disk formats (PGM images, a
JSON manifest, binary feature files, a JSON model, CSV reports), so stages
can be re-entered from disk. Fixed output names under the experiment
directory: manifest.json, features_<set>.bin, model_<set>.json,
confusion.csv, metrics.json, stats.csv, jointprob_<label>.csv.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classify, diag, features, imgcore, ops

ORIGINAL_LABEL = 1
ORIGINAL_TAG = "original"


@dataclass(frozen=True)
class CorpusConfig:
    count: int = 300
    width: int = 256
    height: int = 256
    seed: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusConfig = CorpusConfig()
    operations: tuple[str, ...] = ops.OP_KINDS
    feature_set: str = "spam686"
    L_candidates: tuple[int, ...] = classify.DEFAULT_L_CANDIDATES
    d_sub_candidates: tuple[int, ...] | None = None
    trials: int = 3
    classifier_seed: int | None = None
    split_seed: int = 1
    output_dir: Path = Path("stegops-run")

    def validate(self) -> None:
        if self.corpus.count < 1:
            raise ValueError("corpus count must be >= 1")
        if self.corpus.width < 8 or self.corpus.height < 8:
            raise ValueError("corpus images must be at least 8x8")
        if not self.operations:
            raise ValueError("operations must be non-empty")
        unknown = [k for k in self.operations if k not in ops.OP_KINDS]
        if unknown:
            raise ValueError(f"unknown operation kinds: {unknown}")
        if "JP2" in self.operations and (self.corpus.width % 4 or self.corpus.height % 4):
            raise ValueError("JP2 requires corpus dimensions divisible by 4")
        if self.feature_set not in features.FEATURE_DIMS:
            raise ValueError(f"unknown feature set {self.feature_set!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def ordered_operations(self) -> tuple[str, ...]:
        return tuple(k for k in ops.OP_KINDS if k in self.operations)

    def classifier_config(self) -> classify.ClassifierConfig:
        seed = self.classifier_seed
        if seed is None:
            seed = imgcore.derive_seed(self.split_seed, "classifier")
        return classify.ClassifierConfig(
            L_candidates=tuple(self.L_candidates),
            d_sub_candidates=None
            if self.d_sub_candidates is None
            else tuple(self.d_sub_candidates),
            seed=seed,
        )

    def to_json(self) -> dict:
        return {
            "corpus": {
                "count": self.corpus.count,
                "width": self.corpus.width,
                "height": self.corpus.height,
                "seed": self.corpus.seed,
            },
            "operations": list(self.operations),
            "feature_set": self.feature_set,
            "classifier": {
                "L_candidates": list(self.L_candidates),
                "d_sub_candidates": None
                if self.d_sub_candidates is None
                else list(self.d_sub_candidates),
                "trials": self.trials,
                "seed": self.classifier_seed,
            },
            "split_seed": self.split_seed,
            "output_dir": str(self.output_dir),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        corpus = doc.get("corpus", {})
        cls_cfg = doc.get("classifier", {})
        cfg = cls(
            corpus=CorpusConfig(
                count=int(corpus.get("count", 300)),
                width=int(corpus.get("width", 256)),
                height=int(corpus.get("height", 256)),
                seed=int(corpus.get("seed", 1)),
            ),
            operations=tuple(doc.get("operations", ops.OP_KINDS)),
            feature_set=str(doc.get("feature_set", "spam686")),
            L_candidates=tuple(cls_cfg.get("L_candidates", classify.DEFAULT_L_CANDIDATES)),
            d_sub_candidates=None
            if cls_cfg.get("d_sub_candidates") is None
            else tuple(cls_cfg["d_sub_candidates"]),
            trials=int(cls_cfg.get("trials", 3)),
            classifier_seed=None
            if cls_cfg.get("seed") is None
            else int(cls_cfg["seed"]),
            split_seed=int(doc.get("split_seed", 1)),
            output_dir=Path(doc.get("output_dir", "stegops-run")),
        )
        cfg.validate()
        return cfg


def load_config(path, **overrides) -> ExperimentConfig:
    doc = json.loads(Path(path).read_text())
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "seed":
            doc.setdefault("corpus", {})["seed"] = value
        elif key in ("trials",):
            doc.setdefault("classifier", {})["trials"] = value
        else:
            doc[key] = value
    return ExperimentConfig.from_json(doc)


# ---------------------------------------------------------------------------
# manifest

def label_map(config: ExperimentConfig) -> dict[int, str]:
    """Label 1 is 'original'; operation labels follow the canonical kind order."""
    names = {ORIGINAL_LABEL: ORIGINAL_TAG}
    for offset, kind in enumerate(config.ordered_operations()):
        names[ORIGINAL_LABEL + 1 + offset] = kind
    return names


def load_manifest(path) -> dict:
    path = Path(path)
    doc = json.loads(path.read_text())
    doc["_dir"] = path.parent
    return doc


def manifest_image(manifest: dict, entry: dict) -> imgcore.GrayImage:
    return imgcore.load_pgm((manifest["_dir"] / entry["path"]).read_bytes())


def _parallel_map(fn, items, workers: int):
    """Order-preserving map; thread count never changes the results."""
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_gen(config: ExperimentConfig, workers: int = 1) -> Path:
    """Write originals plus one operated counterpart per kind, and the manifest."""
    config.validate()
    out_dir = Path(config.output_dir)
    img_dir = out_dir / "images"
    img_dir.mkdir(parents=True, exist_ok=True)

    originals = imgcore.synth_corpus(
        config.corpus.count, config.corpus.width, config.corpus.height, config.corpus.seed
    )
    entries = []
    for i, img in enumerate(originals):
        rel = f"images/orig_{i:05d}.pgm"
        (out_dir / rel).write_bytes(imgcore.save_pgm(img))
        entries.append(
            {"path": rel, "class_label": ORIGINAL_LABEL, "op_spec": ORIGINAL_TAG, "source_index": i}
        )
    (out_dir / "corpus.txt").write_text(
        "".join(e["path"] + "\n" for e in entries), encoding="utf-8"
    )

    kinds = config.ordered_operations()

    def _make(task):
        kind, i = task
        spec = ops.sample_spec(
            kind, imgcore.derive_seed(config.corpus.seed, "spec", kind, i)
        )
        return spec, ops.apply(spec, originals[i])

    for offset, kind in enumerate(kinds):
        label = ORIGINAL_LABEL + 1 + offset
        results = _parallel_map(_make, [(kind, i) for i in range(len(originals))], workers)
        for i, (spec, operated) in enumerate(results):
            rel = f"images/{kind.lower()}_{i:05d}.pgm"
            (out_dir / rel).write_bytes(imgcore.save_pgm(operated))
            entries.append(
                {
                    "path": rel,
                    "class_label": label,
                    "op_spec": spec.to_json(),
                    "source_index": i,
                }
            )

    manifest = {
        "corpus": config.to_json()["corpus"],
        "label_names": {str(k): v for k, v in label_map(config).items()},
        "entries": entries,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# reports

def cmd_stats(manifest_path, out_path=None) -> list[dict]:
    """Table-I-style report: mean modification ratio and PSNR per operation kind.

    Pairs whose dimensions differ from the original (resampling output sizes)
    cannot be aligned pixel-to-pixel and are reported as 'na', the same
    exclusion the modification-rate analysis applies to resampling.
    """
    manifest = load_manifest(manifest_path)
    originals = {
        e["source_index"]: manifest_image(manifest, e)
        for e in manifest["entries"]
        if e["op_spec"] == ORIGINAL_TAG
    }
    by_kind: dict[str, list] = {}
    for entry in manifest["entries"]:
        if entry["op_spec"] == ORIGINAL_TAG:
            continue
        by_kind.setdefault(entry["op_spec"]["kind"], []).append(entry)

    rows = []
    for kind in ops.OP_KINDS:
        if kind not in by_kind:
            continue
        ratios, psnrs = [], []
        for entry in by_kind[kind]:
            original = originals[entry["source_index"]]
            operated = manifest_image(manifest, entry)
            if operated.pixels.shape != original.pixels.shape:
                continue
            stats = imgcore.pair_stats(original, operated)
            ratios.append(stats.modification_ratio)
            psnrs.append(stats.psnr_db)
        if ratios:
            rows.append(
                {
                    "kind": kind,
                    "count": len(ratios),
                    "mean_modification_ratio": float(np.mean(ratios)),
                    "mean_psnr_db": float(np.mean(psnrs)),
                }
            )
        else:
            rows.append(
                {
                    "kind": kind,
                    "count": 0,
                    "mean_modification_ratio": None,
                    "mean_psnr_db": None,
                }
            )

    if out_path is not None:
        lines = ["kind,count,mean_modification_ratio,mean_psnr_db"]
        for row in rows:
            ratio = "na" if row["count"] == 0 else repr(row["mean_modification_ratio"])
            snr = "na" if row["count"] == 0 else repr(row["mean_psnr_db"])
            lines.append(f"{row['kind']},{row['count']},{ratio},{snr}")
        Path(out_path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    return rows


def cmd_diag(
    manifest_path, class_label: int, support_bound: int = diag.DEFAULT_SUPPORT, out_path=None
) -> diag.JointProb:
    """Average the per-image joint probability over one class; export as CSV."""
    manifest = load_manifest(manifest_path)
    chosen = [e for e in manifest["entries"] if e["class_label"] == class_label]
    if not chosen:
        raise ValueError(f"no entries with class label {class_label}")
    side = 2 * support_bound + 1
    table = np.zeros((side, side))
    total = 0
    for entry in chosen:
        jp = diag.joint_probability(manifest_image(manifest, entry), support_bound)
        table += jp.table
        total += jp.total_pairs
    averaged = diag.JointProb(support_bound, table / len(chosen), total)
    if out_path is not None:
        Path(out_path).write_bytes(diag.export_jointprob(averaged))
    return averaged


# ---------------------------------------------------------------------------
# features / training / evaluation

def cmd_extract(manifest_path, set_id: str, out_path=None, workers: int = 1) -> Path:
    """Extract one feature row per manifest entry, in manifest order."""
    manifest = load_manifest(manifest_path)
    entries = manifest["entries"]

    def _row(entry):
        return features.extract(manifest_image(manifest, entry), set_id).values

    matrix = np.stack(_parallel_map(_row, entries, workers))
    labels = [e["class_label"] for e in entries]
    if out_path is None:
        out_path = manifest["_dir"] / f"features_{set_id}.bin"
    features.write_features(out_path, matrix, labels, set_id)
    return Path(out_path)


def cmd_train(features_path, config: ExperimentConfig, out_path=None, verbose=True) -> Path:
    """Stratified 50/50 split, pairwise ensemble training, model JSON on disk."""
    matrix, labels, set_id = features.read_features(features_path)
    if set_id != config.feature_set:
        raise ValueError(f"feature file holds {set_id!r}, config wants {config.feature_set!r}")
    train_mask = classify.stratified_split(labels, config.split_seed)
    cls_cfg = config.classifier_config()
    pm = classify.pairwise_train(matrix[train_mask], labels[train_mask], cls_cfg)
    if verbose:
        for (a, b), model in pm.binary_models:
            print(
                f"pair ({a},{b}): L={model.n_learners} d_sub={model.d_sub} "
                f"oob_error={model.oob_error:.4f}"
            )
    doc = classify.model_to_dict(
        pm,
        set_id,
        matrix.shape[1],
        split_seed=config.split_seed,
        trials=config.trials,
        classifier={
            "L_candidates": list(cls_cfg.L_candidates),
            "d_sub_candidates": None
            if cls_cfg.d_sub_candidates is None
            else list(cls_cfg.d_sub_candidates),
            "seed": cls_cfg.seed,
        },
    )
    if out_path is None:
        out_path = Path(features_path).parent / f"model_{set_id}.json"
    Path(out_path).write_text(json.dumps(doc) + "\n", encoding="utf-8")
    return Path(out_path)


def _eval_trial(matrix, labels, pm, split_seed):
    test = ~classify.stratified_split(labels, split_seed)
    return classify.evaluate(pm, matrix[test], labels[test])


def cmd_eval(
    model_path, features_path, out_confusion=None, out_metrics=None, trials=None
) -> dict:
    """Evaluate on the stored split's test half; repeat with fresh splits.

    The confusion CSV comes from the persisted model (trial 0); metrics report
    the per-trial accuracies and their means. Trials beyond the first retrain
    on reshuffled stratified splits with derived seeds.
    """
    doc = json.loads(Path(model_path).read_text())
    pm, meta = classify.model_from_dict(doc)
    matrix, labels, set_id = features.read_features(features_path)
    if set_id != meta["set_id"] or matrix.shape[1] != int(meta["dim"]):
        raise ValueError("feature file does not match the model's set_id/dim")
    split_seed = int(meta["split_seed"])
    if trials is None:
        trials = int(meta.get("trials", 1))
    cls_meta = meta.get("classifier", {})
    cls_cfg = classify.ClassifierConfig(
        L_candidates=tuple(cls_meta.get("L_candidates", classify.DEFAULT_L_CANDIDATES)),
        d_sub_candidates=None
        if cls_meta.get("d_sub_candidates") is None
        else tuple(cls_meta["d_sub_candidates"]),
        seed=int(cls_meta.get("seed", 0)),
    )

    per_trial = []
    cm0, acc0, diag0 = _eval_trial(matrix, labels, pm, split_seed)
    per_trial.append({"trial": 0, "accuracy": acc0, "diagonal_average": diag0})
    for t in range(1, trials):
        seed_t = imgcore.derive_seed(split_seed, "trial", t)
        mask_t = classify.stratified_split(labels, seed_t)
        cfg_t = classify.ClassifierConfig(
            L_candidates=cls_cfg.L_candidates,
            d_sub_candidates=cls_cfg.d_sub_candidates,
            seed=imgcore.derive_seed(cls_cfg.seed, "trial", t),
        )
        pm_t = classify.pairwise_train(matrix[mask_t], labels[mask_t], cfg_t)
        _, acc_t, diag_t = classify.evaluate(pm_t, matrix[~mask_t], labels[~mask_t])
        per_trial.append({"trial": t, "accuracy": acc_t, "diagonal_average": diag_t})

    metrics = {
        "accuracy": float(np.mean([t["accuracy"] for t in per_trial])),
        "diagonal_average": float(np.mean([t["diagonal_average"] for t in per_trial])),
        "per_trial": per_trial,
    }
    if out_confusion is not None:
        Path(out_confusion).write_bytes(cm0.to_csv())
    if out_metrics is not None:
        Path(out_metrics).write_text(json.dumps(metrics, indent=2) + "\n", encoding="utf-8")
    metrics["confusion"] = cm0
    return metrics
