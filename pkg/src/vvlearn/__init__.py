"""Semi-supervised vector-valued learning.

Linear or random-Fourier-feature predictors h(x) = W^T phi(x) trained by
mini-batch proximal gradient descent with three penalties: a Frobenius
complexity term, a graph-Laplacian manifold term over labeled and unlabeled
samples, and a spectral tail-sum term enforced by partial singular value
thresholding.
"""

from vvlearn.data import (
    Dataset,
    SplitSpec,
    TaskKind,
    load_dataset,
    make_split,
    normalize_features,
    parse_sparse_multiclass,
    parse_sparse_multilabel,
    scale_labels_unit,
)
from vvlearn.features import FeatureMap, apply_map, build_rff, gram, identity_map
from vvlearn.graph import GraphLaplacian, build_graph, knn_similarity, laplacian
from vvlearn.losses import LossKind
from vvlearn.metrics import EvalResult, aggregate, hamming_loss, mc_error, predict, rmse
from vvlearn.prox import SvtMode, partial_svt, prox_oracle, svt_objective
from vvlearn.spectra import SpectrumReport, eigen_tail_sums, singular_tail_sums, suggest_theta
from vvlearn.trainer import AdadeltaState, Hyperparams, WeightMatrix, objective_value, train

__all__ = [
    "AdadeltaState",
    "Dataset",
    "EvalResult",
    "FeatureMap",
    "GraphLaplacian",
    "Hyperparams",
    "LossKind",
    "SpectrumReport",
    "SplitSpec",
    "SvtMode",
    "TaskKind",
    "WeightMatrix",
    "aggregate",
    "apply_map",
    "build_graph",
    "build_rff",
    "eigen_tail_sums",
    "gram",
    "hamming_loss",
    "identity_map",
    "knn_similarity",
    "laplacian",
    "load_dataset",
    "make_split",
    "mc_error",
    "normalize_features",
    "objective_value",
    "parse_sparse_multiclass",
    "parse_sparse_multilabel",
    "partial_svt",
    "predict",
    "prox_oracle",
    "rmse",
    "scale_labels_unit",
    "singular_tail_sums",
    "suggest_theta",
    "svt_objective",
    "train",
]
