"""Sparse dimension reduction via constrained canonical correlation.

Pipeline: B-spline basis of the response -> canonical correlation fit with
sequential dimension tests -> L1-constrained direction path with a
confidence-limit stopping rule -> BIC-type variable filtering ->
re-estimation on the selected variables.
"""

from .cancor import CancorFit, dimension_test, fit, fit_from_moments, fit_on_subset
from .constrained import (ConstrainedDirection, PathConfig, PathTrace,
                          lower_conf_limit, run_path, solve_constrained)
from .data import Dataset
from .errors import (CcdrError, ConfigError, ConstantResponseError, DataError,
                     DataFormatError, DegenerateFitError,
                     DegenerateResponseError, InfeasibleProblemError,
                     NumericalError, SingularMatrixError, ZeroVarianceError)
from .filtering import (FilterTrace, FinalFit, filter_direction, finalize,
                        project, threshold)
from .moments import (MomentSet, StandardizedData, inv_sqrt, moments,
                      pinv_threshold, standardize, sym_eigen)
from .splines import (SplineBasis, SplineConfig, basis_values, design_matrix,
                      evaluate_pi, make_basis)
from .studies import (PipelineResult, PipelineSettings, SimulationReport,
                      StudySpec, generate, metrics, run_pipeline, run_study)

__all__ = [
    "CancorFit", "ConstrainedDirection", "Dataset", "FilterTrace", "FinalFit",
    "MomentSet", "PathConfig", "PathTrace", "PipelineResult",
    "PipelineSettings", "SimulationReport", "SplineBasis", "SplineConfig",
    "StandardizedData", "StudySpec",
    "CcdrError", "ConfigError", "ConstantResponseError", "DataError",
    "DataFormatError", "DegenerateFitError", "DegenerateResponseError",
    "InfeasibleProblemError", "NumericalError", "SingularMatrixError",
    "ZeroVarianceError",
    "basis_values", "design_matrix", "dimension_test", "evaluate_pi", "fit",
    "fit_from_moments", "fit_on_subset", "filter_direction", "finalize",
    "generate", "inv_sqrt", "lower_conf_limit", "make_basis", "metrics",
    "moments", "pinv_threshold", "project", "run_path", "run_pipeline",
    "run_study", "solve_constrained", "standardize", "sym_eigen", "threshold",
]

__version__ = "0.1.0"
