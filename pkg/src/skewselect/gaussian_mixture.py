"""Gaussian mixture fitting by EM with BIC-based component-count selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._emcore import (
    CoreFit,
    DegenerateComponentError,
    EmConfig,
    Responsibilities,
    fit_mixture,
    gaussian_log_density,
)

__all__ = [
    "EmConfig",
    "Responsibilities",
    "DegenerateComponentError",
    "GaussianMixtureFit",
    "gaussian_log_density",
    "bic",
    "em_fit_gmm",
    "select_g",
    "hard_labels",
]


def _as_array(X) -> np.ndarray:
    return np.asarray(getattr(X, "values", X), dtype=float)


def bic(loglik: float, n_params: int, n: int) -> float:
    """2*loglik - n_params*log(n); larger is better under this convention."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * loglik - n_params * math.log(n)


def gmm_param_count(G: int, p: int) -> int:
    """Free parameters of a G-component mixture with full covariances."""
    return (G - 1) + G * p + G * p * (p + 1) // 2


@dataclass(frozen=True)
class GaussianMixtureFit:
    """A fitted Gaussian mixture: parameters, responsibilities, loglik, BIC."""

    n_components: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    loglik: float
    bic: float
    responsibilities: Responsibilities
    n_params: int
    loglik_history: tuple[float, ...]
    n_iter: int
    converged: bool


def _wrap_gaussian(core: CoreFit, n: int) -> GaussianMixtureFit:
    G, p = core.means.shape
    k = gmm_param_count(G, p)
    return GaussianMixtureFit(
        n_components=G,
        weights=core.weights,
        means=core.means,
        covariances=core.covariances,
        loglik=core.loglik,
        bic=bic(core.loglik, k, n),
        responsibilities=core.responsibilities,
        n_params=k,
        loglik_history=core.loglik_history,
        n_iter=core.n_iter,
        converged=core.converged,
    )


def em_fit_gmm(X, G: int, config: EmConfig) -> GaussianMixtureFit:
    """Fit a G-component full-covariance Gaussian mixture by multi-start EM."""
    values = _as_array(X)
    core = fit_mixture(values, G, mask=None, config=config)
    return _wrap_gaussian(core, values.shape[0])


def select_g(X, g_range, config: EmConfig) -> GaussianMixtureFit:
    """Fit over a set of component counts and return the BIC-maximizing fit.

    Ties break toward smaller G; a component count whose fit degenerates is
    skipped, and an error is raised only if every count fails.
    """
    gs = sorted(set(int(g) for g in g_range))
    if not gs:
        raise ValueError("g_range must be nonempty")
    if any(g < 1 for g in gs):
        raise ValueError("all component counts must be >= 1")
    best = None
    last_err = None
    for g in gs:
        try:
            fit = em_fit_gmm(X, g, config)
        except (DegenerateComponentError, ValueError) as err:
            last_err = err
            continue
        if best is None or fit.bic > best.bic:
            best = fit
    if best is None:
        raise DegenerateComponentError(
            f"every component count in {gs} failed; last error: {last_err}")
    return best


def hard_labels(z: Responsibilities) -> np.ndarray:
    """Argmax component per row, 1-based; ties go to the lowest index."""
    return np.argmax(z.z, axis=1) + 1
