"""Mixture models with per-component exponential skewness transforms.

Each component g carries a vector lambda_g of transformation parameters, one
per variable. The component density in the original space is
    phi(T(x | lambda_g) | mu_g, Sigma_g) * exp(lambda_g' x),
where T applies (exp(l*x) - 1)/l coordinatewise and exp(lambda' x) is the
Jacobian of the transformation. A boolean mask fixes chosen entries at zero;
forward/backward selection grows or prunes that mask by BIC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _transforms
from ._emcore import (
    CoreFit,
    DegenerateComponentError,
    EmConfig,
    Responsibilities,
    fit_mixture,
    gaussian_log_density,
)
from ._transforms import LAMBDA_BOUND, LAMBDA_EPS, TransformOverflowError
from .gaussian_mixture import bic, gmm_param_count

__all__ = [
    "LAMBDA_BOUND",
    "LAMBDA_EPS",
    "TransformOverflowError",
    "LambdaMatrix",
    "ManlyMixtureFit",
    "manly_transform",
    "manly_inverse",
    "log_jacobian",
    "manly_component_logdensity",
    "optimize_lambda_1d",
    "em_fit_manly",
    "forward_lambda_selection",
    "backward_lambda_selection",
]

# Short EM budget for stepwise candidate fits; accepted masks are refit to
# full convergence before the next round.
_CANDIDATE_MAX_ITER = 50


def manly_transform(x: float, lam: float) -> float:
    """(exp(lam*x) - 1)/lam; the identity (via series) when |lam| < LAMBDA_EPS."""
    return _transforms.transform(float(x), float(lam))


def manly_inverse(y: float, lam: float) -> float:
    """Inverse transform log(lam*y + 1)/lam; requires lam*y + 1 > 0."""
    return _transforms.inverse(float(y), float(lam))


def log_jacobian(x, lam) -> float:
    """Log Jacobian of the coordinatewise transform: lam' x."""
    return float(np.dot(np.asarray(lam, dtype=float), np.asarray(x, dtype=float)))


def manly_component_logdensity(x, lam, mu, sigma) -> float:
    """Log density of one transformed-Gaussian component at x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    y = np.array([manly_transform(xj, lj) for xj, lj in zip(x, lam)])
    return gaussian_log_density(y, mu, sigma) + log_jacobian(x, lam)


def optimize_lambda_1d(objective, lower: float, upper: float, tol: float) -> float:
    """Derivative-free maximization of a 1-D objective on [lower, upper].

    Golden-section search: returns a point within tol of a local maximizer
    using at most 100 objective evaluations. Raises ValueError on non-finite
    objective values or an empty interval.
    """
    t, _ = _transforms.golden_section_maximize(objective, lower, upper, tol,
                                               max_evals=100)
    return t


@dataclass(frozen=True)
class LambdaMatrix:
    """G-by-p transformation parameters with a free/fixed mask.

    Entries where mask is False are structurally zero; free entries are
    bounded by LAMBDA_BOUND.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise ValueError("values and mask must be 2-D arrays of equal shape")
        if not np.all(np.isfinite(values)):
            raise ValueError("transformation parameters must be finite")
        if np.any(values[~mask] != 0.0):
            raise ValueError("masked-out entries must be exactly 0")
        if np.any(np.abs(values) > LAMBDA_BOUND + 1e-12):
            raise ValueError(f"|lambda| must not exceed {LAMBDA_BOUND}")
        for arr in (values, mask):
            arr.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def n_free(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class ManlyMixtureFit:
    """A fitted transformation mixture; means/covariances live in the
    transformed space."""

    n_components: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    lambdas: LambdaMatrix
    loglik: float
    bic: float
    responsibilities: Responsibilities
    n_params: int
    loglik_history: tuple[float, ...]
    n_iter: int
    converged: bool
    selection_bics: tuple[float, ...] | None = None


def _as_array(X) -> np.ndarray:
    return np.asarray(getattr(X, "values", X), dtype=float)


def _wrap_manly(core: CoreFit, mask: np.ndarray, n: int,
                selection_bics=None) -> ManlyMixtureFit:
    G, p = core.means.shape
    k = gmm_param_count(G, p) + int(mask.sum())
    return ManlyMixtureFit(
        n_components=G,
        weights=core.weights,
        means=core.means,
        covariances=core.covariances,
        lambdas=LambdaMatrix(core.lambdas, mask),
        loglik=core.loglik,
        bic=bic(core.loglik, k, n),
        responsibilities=core.responsibilities,
        n_params=k,
        loglik_history=core.loglik_history,
        n_iter=core.n_iter,
        converged=core.converged,
        selection_bics=None if selection_bics is None else tuple(selection_bics),
    )


def em_fit_manly(X, G: int, mask, config: EmConfig, *, warm: CoreFit | None = None,
                 max_iter: int | None = None) -> ManlyMixtureFit:
    """Fit a transformation mixture with the given free-parameter mask.

    With an all-false mask this reduces exactly to the Gaussian mixture fit
    for the same data, seed, and config.
    """
    values = _as_array(X)
    mask = np.asarray(mask, dtype=bool)
    core = fit_mixture(values, G, mask, config, warm=warm, max_iter=max_iter)
    return _wrap_manly(core, mask, values.shape[0])


def _core_of(fit: ManlyMixtureFit) -> CoreFit:
    return CoreFit(fit.weights, fit.means, fit.covariances, fit.lambdas.values,
                   fit.responsibilities, fit.loglik, fit.loglik_history,
                   fit.n_iter, fit.converged)


def _stepwise_selection(X, G, config, start_mask, candidate_masks) -> ManlyMixtureFit:
    values = _as_array(X)
    n = values.shape[0]
    incumbent = em_fit_manly(values, G, start_mask, config)
    path = [incumbent.bic]
    while True:
        best = None
        for cand_mask in candidate_masks(incumbent.lambdas.mask):
            try:
                cand = em_fit_manly(values, G, cand_mask, config,
                                    warm=_core_of(incumbent),
                                    max_iter=_CANDIDATE_MAX_ITER)
            except DegenerateComponentError:
                continue
            if cand.bic > incumbent.bic and (best is None or cand.bic > best.bic):
                best = cand
        if best is None:
            break
        try:
            refit = em_fit_manly(values, G, best.lambdas.mask, config,
                                 warm=_core_of(best))
        except DegenerateComponentError:
            refit = best
        # Warm-started continuation cannot lower the loglik; keep whichever
        # of the pair scored higher so accepted BICs stay strictly increasing.
        incumbent = refit if refit.bic >= best.bic else best
        path.append(incumbent.bic)
    return _wrap_manly(_core_of(incumbent), incumbent.lambdas.mask, n,
                       selection_bics=path)


def forward_lambda_selection(X, G: int, config: EmConfig) -> ManlyMixtureFit:
    """Grow the free-parameter mask from empty, one BIC-improving entry at a
    time, warm-starting each round from the incumbent fit."""
    values = _as_array(X)
    p = values.shape[1]

    def candidates(mask):
        for g in range(G):
            for j in range(p):
                if not mask[g, j]:
                    m = mask.copy()
                    m[g, j] = True
                    yield m

    return _stepwise_selection(values, G, config, np.zeros((G, p), dtype=bool),
                               candidates)


def backward_lambda_selection(X, G: int, config: EmConfig) -> ManlyMixtureFit:
    """Prune the free-parameter mask from full, zeroing one entry per round
    while BIC improves."""
    values = _as_array(X)
    p = values.shape[1]

    def candidates(mask):
        for g in range(G):
            for j in range(p):
                if mask[g, j]:
                    m = mask.copy()
                    m[g, j] = False
                    yield m

    return _stepwise_selection(values, G, config, np.ones((G, p), dtype=bool),
                               candidates)
