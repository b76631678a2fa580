"""stegops: detect and identify image processing operations with steganalytic features."""

from .imgcore import (
    GrayImage,
    PairStats,
    PgmError,
    PSNR_INFINITE,
    crop_center,
    downsample2,
    load_pgm,
    modification_ratio,
    pair_stats,
    psnr,
    save_pgm,
    synth_corpus,
)
from .ops import OperationSpec, apply, sample_spec
from .diag import JointProb, diff_fields, extrema_ratio, joint_probability, quadrant_mass
from .features import FeatureVector, feature_matrix, minirm_extract, spam_extract
from .classify import (
    ClassifierConfig,
    ConfusionMatrix,
    EnsembleModel,
    FldLearner,
    PairwiseModel,
    ensemble_predict,
    ensemble_train,
    evaluate,
    fld_train,
    pairwise_predict,
    pairwise_train,
)

__version__ = "0.1.0"
