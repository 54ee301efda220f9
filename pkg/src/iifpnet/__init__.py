"""Leaky-ReLU regression networks with passivity-based perturbation bounds."""

from .attack import AttackConfig, AttackResult, evaluate_dataset, hill_climb, ratio_objective
from .data import Dataset, fit_preprocessor, load_csv, split, synthetic_regression
from .errors import (
    CertificateUnavailable,
    ConfigError,
    ContractError,
    IIFPError,
    InvalidBoundParameters,
    ParseError,
    UnsupportedDepth,
)
from .model import LayerParams, MlpModel, build_widths, init_model, leaky_relu, load_model, save_model
from .passivity import (
    CascadeCertificate,
    LayerCertificate,
    bound_ratio,
    build_cascade_matrix,
    certify,
    diagonal_stability_oracle,
    extract_nu,
    rho_min,
    secant_check,
    tight_bound_check,
)
from .training import TrainConfig, iifp_penalty, train

__version__ = "0.1.0"
