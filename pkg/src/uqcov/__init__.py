"""Coverage and width of prediction intervals and sets for uncertainty-quantification methods."""

__version__ = "0.1.0"
