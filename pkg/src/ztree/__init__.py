"""Decision tree learning gated by cross-validated z-scores.

Splits happen only where a statistically tested subgroup effect survives a
per-node cross-validation adjustment; one z threshold is the sole complexity
knob, and all higher-threshold trees derive from the base tree by pruning.
"""

from ._version import __version__
from .baseline_cart import CartParams, learn_cart, tune_cart
from .cv_engine import CvConfig, CvScore, internal_cv_score
from .data_model import (CutoffSet, Dataset, FeatureSpec, TargetSpec,
                         compute_cutoffs, ingest_csv, read_schema_file,
                         write_csv, write_schema)
from .errors import (DataError, DegenerateSample, IncompatibleTest,
                     ModelFormatError, RefusedLowerThreshold, SchemaError,
                     TooSmall, UnsupportedTest, ZTreeError)
from .model_selection import DEFAULT_GRID, TuningReport, auroc, rmse, tune_threshold
from .stat_tests import (TestKind, TreatmentGroupSample, ZScore,
                         differential_effect_z, logrank_z, mann_whitney_z,
                         select_test, two_proportion_z, welch_t_z)
from .subgroup_search import (Atom, SubgroupCriterion, SubgroupModel,
                              apply_model, enumerate_criteria, train_best_subgroup)
from .synth_bench import BenchmarkSpec, GeneratorSpec, generate, run_benchmark
from .tree_learner import (TreeConfig, TreeModel, TreeNode, derive_pruned,
                           deserialize, learn_tree, models_equal, predict, serialize)

__all__ = [
    "__version__",
    "Atom", "BenchmarkSpec", "CartParams", "CutoffSet", "CvConfig", "CvScore",
    "DataError", "Dataset", "DegenerateSample", "DEFAULT_GRID", "FeatureSpec",
    "GeneratorSpec", "IncompatibleTest", "ModelFormatError",
    "RefusedLowerThreshold", "SchemaError", "SubgroupCriterion",
    "SubgroupModel", "TargetSpec", "TestKind", "TooSmall",
    "TreatmentGroupSample", "TreeConfig", "TreeModel", "TreeNode",
    "TuningReport", "UnsupportedTest", "ZScore", "ZTreeError",
    "apply_model", "auroc", "compute_cutoffs", "derive_pruned", "deserialize",
    "differential_effect_z", "enumerate_criteria", "generate", "ingest_csv",
    "internal_cv_score", "learn_cart", "learn_tree", "logrank_z",
    "mann_whitney_z", "models_equal", "predict", "read_schema_file", "rmse",
    "run_benchmark", "select_test", "serialize", "train_best_subgroup",
    "tune_cart", "tune_threshold", "two_proportion_z", "welch_t_z",
    "write_csv", "write_schema",
]
