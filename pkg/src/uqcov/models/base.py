from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class GaussianPrediction:
    """Predictive mean with epistemic and aleatoric variance parts.

    Fields may be scalars or equal-length arrays (one entry per sample).
    """

    mean: np.ndarray
    epistemic_variance: np.ndarray
    aleatoric_variance: np.ndarray

    def __post_init__(self):
        for name in ("epistemic_variance", "aleatoric_variance"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")

    @property
    def total_variance(self):
        return np.asarray(self.epistemic_variance) + np.asarray(self.aleatoric_variance)


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple = (50,)
    dropout: float = 0.0
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.hidden or any(h <= 0 for h in self.hidden):
            raise ValueError(f"hidden sizes must be positive, got {self.hidden}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size <= 0 or self.epochs < 0 or self.weight_decay < 0:
            raise ValueError("batch size must be positive; epochs and weight decay non-negative")

    def with_(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {
            "hidden": list(self.hidden),
            "dropout": self.dropout,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "weight_decay": self.weight_decay,
            "seed": self.seed,
        }


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, what="loss"):
        super().__init__(f"non-finite {what} at epoch {epoch}")
        self.epoch = epoch
