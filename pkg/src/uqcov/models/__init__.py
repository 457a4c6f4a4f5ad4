"""Uncertainty-quantification models: MLPs, ensembles, MC dropout, SVI, GPs, OLS, convnets."""

from .base import GaussianPrediction, MlpConfig, TrainingDivergedError
from .checkpoint import load_model, save_model
from .cnn import VARIANTS, ClassifierConfig, ClassifierModel, train_classifier
from .gp import GpFit, gp_predict, train_gp
from .linear import LinearRegressionFit, fit_linear_regression
from .mlp import (
    DEFAULT_SPACE,
    MlpModel,
    SearchResult,
    ensemble_predict,
    mc_dropout_predict,
    random_search,
    train_ensemble,
    train_mlp,
)
from .svi import SviModel, VariationalLayer, select_svi, svi_predict, train_svi
from .temperature import apply_temperature, fit_temperature

__all__ = [
    "GaussianPrediction", "MlpConfig", "TrainingDivergedError", "load_model", "save_model",
    "VARIANTS", "ClassifierConfig", "ClassifierModel", "train_classifier", "GpFit", "gp_predict", "train_gp",
    "LinearRegressionFit", "fit_linear_regression", "DEFAULT_SPACE", "MlpModel", "SearchResult",
    "ensemble_predict", "mc_dropout_predict", "random_search", "train_ensemble", "train_mlp",
    "SviModel", "VariationalLayer", "select_svi", "svi_predict", "train_svi", "apply_temperature", "fit_temperature",
]
