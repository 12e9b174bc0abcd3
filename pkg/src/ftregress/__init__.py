"""Regression with functional tensor trains.

A function of ``d`` variables is written as a product of matrix-valued
univariate functions ``F_1(x_1) ... F_d(x_d)``.  The entries are linear
expansions (orthonormal Legendre polynomials, fixed Gaussian kernels) or
Gaussian kernels with trainable centers, and all parameters are fitted to
data by least squares with optional group-sparsity regularization.
"""
from .bench import (
    FUNCTIONS, StudySpec, get_function, make_dataset, otl_circuit, relative_squared_error,
    run_study, sine_of_sums, summarize, wing_weight,
)
from .data import Dataset, ingest_csv, normalize, read_csv
from .errors import ConfigError, FormatError, FTError, InputError, NumericalError, UnsupportedError
from .ftcore import (
    FTCore, FunctionTrain, additive_ft, coregrad_left, coregrad_right, ft_eval, ft_eval_batch,
    ft_eval_grad, ft_jacobian, ftc_to_ft, linear_ft, moving_kernel_ft, pack_params, unpack_params,
)
from .modelsel import CVResult, Hypergrid, fold_indices, grid_search, kfold_cv, rank_adapt
from .models import HyperParams, fit_model, make_template
from .objective import RegressionObjective, least_squares, objective_full, per_sample_grad, regularizer
from .optimize import (
    ALSOptions, FitReport, OptimOptions, SGDOptions, fit_aao, fit_als, fit_sgd, init_params, lbfgs,
)
from .rounding import ft_round, ft_rounding_rank, to_tt_cores, tt_round
from .serialize import dumps, load_model, loads, save_model
from .univariate import (
    ONE, ZERO, Constant, FixedKernelBasis, LegendreBasis, Linear, MovingKernel, eval_uni, grad_uni,
    inner_product_uni, precompute_basis,
)

__version__ = "0.1.0"
