"""Distribution-difference classification toolkit.

Trains a projection that pulls class distributions apart, scores instances
by distance to the projected class centers, and ships the surrounding
experiment protocol: preprocessing, stratified evaluation, an LDA-style
baseline, synthetic benchmark generators, and a CLI.
"""

from oddkit.numerics import (
    InvalidInputError,
    SingularMatrixError,
    SymEigResult,
    covariance,
    frobenius_norm,
    matmul,
    mean_rows,
    solve_spd,
    sym_eigen,
)
from oddkit.core import (
    ClassSummary,
    ObjectiveValue,
    TransformParams,
    class_summaries,
    discriminate,
    objective,
    pack_params,
    transform,
    unpack_params,
)
from oddkit.optim import (
    OptimizerConfig,
    OptimizerReport,
    bfgs_minimize,
    cmaes_minimize,
    es_minimize,
    finite_diff_gradient,
    hybrid_minimize,
)
from oddkit.metrics import (
    RocCurve,
    RunStats,
    g_index,
    macro_auc,
    roc_auc,
    t_test,
)
from oddkit.data import (
    Dataset,
    NormalizationState,
    apply_normalization,
    fit_normalization,
    gen_db1,
    gen_db2,
    gen_db3,
    imbalance_split,
    load_csv,
    save_csv,
    stratified_split,
)
from oddkit.classifier import (
    OddConfig,
    OddModel,
    fit,
    load_model,
    predict_labels,
    predict_scores,
    save_model,
    select_threshold,
)
from oddkit.baselines import (
    CentroidModel,
    DldaModel,
    SingularScatterError,
    centroid_fit,
    centroid_scores,
    dlda_fit,
    dlda_scores,
)

__version__ = "0.1.0"
