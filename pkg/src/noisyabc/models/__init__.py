"""Built-in models and the name registry used by the CLI."""

from ..errors import ConfigError
from .alpha_stable import (
    AlphaStableModel,
    alpha_stable_grad_tau,
    alpha_stable_tau,
    sample_stable_aux,
    stable_constants,
    standard_stable_tau,
)
from .base import HMMModel
from .gandk import GandKModel, gk_grad_quantile, gk_quantile, heuristic_location
from .gaussian import GaussianSurrogateModel, gaussian_surrogate_model, kalman_log_likelihood, kalman_mle, kalman_score
from .svar import SVAlphaRModel, svar_model

REGISTRY = {
    "alpha_stable": AlphaStableModel,
    "g_and_k": GandKModel,
    "sv_alpha_r": SVAlphaRModel,
    "gaussian_surrogate": GaussianSurrogateModel,
}


def get_model(name: str, **options) -> HMMModel:
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; registered: {sorted(REGISTRY)}") from None
    try:
        return cls(**options)
    except TypeError as exc:
        raise ConfigError(f"bad options for model {name!r}: {exc}") from None


__all__ = [
    "AlphaStableModel",
    "GandKModel",
    "GaussianSurrogateModel",
    "HMMModel",
    "REGISTRY",
    "SVAlphaRModel",
    "alpha_stable_grad_tau",
    "alpha_stable_tau",
    "gaussian_surrogate_model",
    "get_model",
    "gk_grad_quantile",
    "gk_quantile",
    "heuristic_location",
    "kalman_log_likelihood",
    "kalman_mle",
    "kalman_score",
    "sample_stable_aux",
    "stable_constants",
    "standard_stable_tau",
    "svar_model",
]
