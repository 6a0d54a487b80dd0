"""Shared EM engine for Gaussian and transformation mixture models.

One engine serves both model families: with no free skewness parameters the
component densities are plain Gaussians and the code path is identical to a
Gaussian mixture EM, so the lambda=0 limit of the transformation mixture
reproduces the Gaussian fit exactly.

M-step for a component g with responsibilities w_i:
  * each free skewness entry lambda_gj is updated by a bounded derivative-free
    1-D search on the profile objective
        obj(t) = -(W/2) * log s2(t) + t * sum_i w_i x_ij,
    where W = sum_i w_i and s2(t) is the conditional (Schur-complement)
    variance of the transformed column j given the other transformed columns
    under the weighted covariance -- i.e. the component mean and covariance
    are profiled out at their weighted MLEs;
  * the component mean and covariance are then set to the weighted mean and
    covariance (divisor W) of the transformed data.
An update is only accepted when it does not decrease the profile objective,
which makes the overall step a generalized EM step with a non-decreasing
observed-data log-likelihood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from . import _transforms

_LOG_2PI = math.log(2.0 * math.pi)
_MAX_RESTARTS = 3
_LAMBDA_TOL = 1e-6

# "Spike" components (a covariance direction collapsing toward zero) give
# unbounded likelihood contributions that BIC would otherwise reward. The
# skewness search is barred from conditional variances below _VAR_FLOOR_REL
# times the average data variance (a constrained M-step), and a component
# whose covariance still ends up with an eigenvalue below _EIG_FLOOR_REL
# times that scale is treated as collapsed.
_VAR_FLOOR_REL = 1e-4
_EIG_FLOOR_REL = 1e-6


class DegenerateComponentError(RuntimeError):
    """A component collapsed (effective size below p+1) in every attempt."""


class _DegenerateRun(Exception):
    """Internal signal: this EM run collapsed; try a fresh initialization."""


@dataclass(frozen=True)
class EmConfig:
    """Knobs for EM fitting: iteration budget, tolerance, restarts, seeding."""

    max_iter: int = 1000
    rel_tol: float = 1e-8
    n_starts: int = 10
    seed: int = 0
    ridge: float = 1e-6

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")


@dataclass(frozen=True)
class Responsibilities:
    """Row-stochastic n-by-G matrix of posterior membership probabilities."""

    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2:
            raise ValueError("responsibilities must be a 2-D matrix")
        if np.any(z < -1e-12) or np.any(z > 1.0 + 1e-12):
            raise ValueError("responsibilities must lie in [0, 1]")
        if np.any(np.abs(z.sum(axis=1) - 1.0) > 1e-10):
            raise ValueError("responsibility rows must sum to 1")
        z = z.copy()
        z.flags.writeable = False
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def n_components(self) -> int:
        return self.z.shape[1]


@dataclass(frozen=True)
class CoreFit:
    """Raw engine output, wrapped by the public fit types."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    lambdas: np.ndarray
    responsibilities: Responsibilities
    loglik: float
    loglik_history: tuple[float, ...]
    n_iter: int
    converged: bool


def gaussian_log_density(x, mu, sigma) -> float:
    """log of the multivariate normal density at x, via Cholesky."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    p = x.shape[0]
    L = np.linalg.cholesky(sigma)
    dev = solve_triangular(L, x - mu, lower=True)
    return float(-0.5 * (p * _LOG_2PI + dev @ dev) - np.log(np.diag(L)).sum())


def _log_density_rows(Y: np.ndarray, mu: np.ndarray, L: np.ndarray) -> np.ndarray:
    p = Y.shape[1]
    sol = solve_triangular(L, (Y - mu).T, lower=True)
    return -0.5 * (p * _LOG_2PI + (sol * sol).sum(axis=0)) - np.log(np.diag(L)).sum()


def _cholesky_with_ridge(S: np.ndarray, ridge: float):
    """Cholesky factor of S, adding an escalating diagonal ridge on failure.

    Returns (L, S_possibly_ridged) or None when the matrix stays indefinite.
    """
    try:
        return np.linalg.cholesky(S), S
    except np.linalg.LinAlgError:
        pass
    if ridge <= 0:
        return None
    p = S.shape[0]
    scale = max(float(np.trace(S)) / p, 1e-12)
    for k in range(4):
        S2 = S + (ridge * scale * 10.0**k) * np.eye(p)
        try:
            return np.linalg.cholesky(S2), S2
        except np.linalg.LinAlgError:
            continue
    return None


def _kmeans_labels(X: np.ndarray, G: int, rng: np.random.Generator,
                   n_iter: int = 50) -> np.ndarray:
    """Lloyd's algorithm from randomly seeded centroids; returns hard labels."""
    n = X.shape[0]
    centers = X[rng.choice(n, size=G, replace=False)].copy()
    labels = None
    for _ in range(n_iter):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for g in range(G):
            if not np.any(new_labels == g):
                # revive an empty cluster at the point worst served so far
                far = int(d2[np.arange(n), new_labels].argmax())
                new_labels[far] = g
                d2[far, :] = 0.0
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for g in range(G):
            centers[g] = X[labels == g].mean(axis=0)
    return labels


def lambda_search_bounds(X: np.ndarray) -> list[tuple[float, float]]:
    """Per-column symmetric search bounds keeping exp(lambda*x) finite."""
    max_abs = np.abs(X).max(axis=0)
    bounds = []
    for m in max_abs:
        hi = _transforms.LAMBDA_BOUND if m == 0 else min(
            _transforms.LAMBDA_BOUND, 690.0 / m)
        bounds.append((-hi, hi))
    return bounds


def profile_objective(xj, w, W, P, S11inv, t_lin, var_floor=0.0):
    """Pure-Python profile objective for one skewness entry.

    Reference implementation of the JIT kernel's objective; used directly by
    tests and kept in sync with :func:`_kernels.component_lambda_pass`.
    Values whose conditional variance falls below var_floor are barred.
    """

    def objective(t):
        yj = _transforms.transform_column(xj, t)
        mj = float(w @ yj) / W
        d = yj - mj
        v = float((w * d) @ d) / W
        if P is not None:
            s = P.T @ d / W
            v -= float(s @ S11inv @ s)
        if v < var_floor or v < 1e-300:
            return -1e300
        return -0.5 * W * math.log(v) + t * t_lin

    return objective


def optimize_component_lambdas(X: np.ndarray, w: np.ndarray, lam_g: np.ndarray,
                               free: np.ndarray, bounds, var_floor: float = 0.0,
                               n_passes: int = 1) -> np.ndarray:
    """Cyclic per-entry profile maximization of one component's skewness row.

    Mutates lam_g in place and returns the data transformed under the final
    parameters. An entry only moves when the profile objective improves, so
    the caller's M-step never decreases the complete-data objective. With
    n_passes > 1, iterates until the row stops moving.
    """
    from . import _kernels

    w = np.ascontiguousarray(w)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    Y = None
    for _ in range(n_passes):
        Y, max_move = _kernels.component_lambda_pass(
            X, w, lam_g, free, lo, hi, _LAMBDA_TOL, 100, var_floor)
        if max_move < 10.0 * _LAMBDA_TOL:
            break
    return Y


def _estep(X, weights, means, chols, lam, any_lambda):
    n, G = X.shape[0], weights.shape[0]
    logp = np.empty((n, G))
    for g in range(G):
        if any_lambda and lam[g].any():
            Yg = _transforms.transform_columns(X, lam[g])
            logp[:, g] = _log_density_rows(Yg, means[g], chols[g]) + X @ lam[g]
        else:
            logp[:, g] = _log_density_rows(X, means[g], chols[g])
        logp[:, g] += math.log(weights[g])
    ll_rows = logsumexp(logp, axis=1)
    z = np.exp(logp - ll_rows[:, None])
    return z, float(ll_rows.sum())


def _run_em(X, G, mask, lam0, z0, config: EmConfig, bounds,
            max_iter: int) -> CoreFit:
    n, p = X.shape
    data_scale = float(X.var(axis=0).mean())
    eig_floor = _EIG_FLOOR_REL * data_scale
    var_floor = _VAR_FLOOR_REL * data_scale
    any_lambda = mask is not None and bool(mask.any())
    lam = lam0.copy()
    z = z0
    history: list[float] = []
    prev_ll = None
    converged = False
    weights = means = covs = None
    chols: list[np.ndarray] = []
    for _ in range(max_iter):
        nk = z.sum(axis=0)
        if np.any(nk < p + 1):
            raise _DegenerateRun
        weights = nk / n
        means = np.empty((G, p))
        covs = np.empty((G, p, p))
        chols = []
        Ys = []
        for g in range(G):
            w = z[:, g]
            if any_lambda and mask[g].any():
                Y = optimize_component_lambdas(X, w, lam[g], mask[g], bounds,
                                               var_floor)
            elif any_lambda and lam[g].any():
                Y = _transforms.transform_columns(X, lam[g])
            else:
                Y = X
            mu = w @ Y / nk[g]
            D = Y - mu
            S = (D * w[:, None]).T @ D / nk[g]
            S = 0.5 * (S + S.T)
            if np.linalg.eigvalsh(S).min() < eig_floor:
                raise _DegenerateRun
            ridged = _cholesky_with_ridge(S, config.ridge)
            if ridged is None:
                raise _DegenerateRun
            L, S = ridged
            means[g] = mu
            covs[g] = S
            chols.append(L)
            Ys.append(Y)
        logp = np.empty((n, G))
        for g in range(G):
            logp[:, g] = (math.log(weights[g])
                          + _log_density_rows(Ys[g], means[g], chols[g]))
            if any_lambda and lam[g].any():
                logp[:, g] += X @ lam[g]
        ll_rows = logsumexp(logp, axis=1)
        ll = float(ll_rows.sum())
        history.append(ll)
        z = np.exp(logp - ll_rows[:, None])
        if prev_ll is not None and abs(ll - prev_ll) < config.rel_tol * (1.0 + abs(ll)):
            converged = True
            break
        prev_ll = ll
    return CoreFit(weights, means, covs, lam, Responsibilities(z),
                   history[-1], tuple(history), len(history), converged)


def _one_hot(labels: np.ndarray, G: int) -> np.ndarray:
    z = np.zeros((labels.shape[0], G))
    z[np.arange(labels.shape[0]), labels] = 1.0
    return z


def fit_mixture(X, G: int, mask, config: EmConfig,
                warm: CoreFit | None = None, max_iter: int | None = None) -> CoreFit:
    """Fit a (transformation) mixture by multi-start EM.

    mask is None for a pure Gaussian mixture, else a G-by-p boolean matrix of
    free skewness entries. With ``warm`` given, runs a single EM continuation
    from those parameters instead of fresh k-means starts.
    """
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    n, p = X.shape
    if G < 1:
        raise ValueError("G must be >= 1")
    if n <= G:
        raise ValueError(f"need more observations than components: n={n}, G={G}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (G, p):
            raise ValueError(f"mask must have shape ({G}, {p})")
    if max_iter is None:
        max_iter = config.max_iter
    bounds = lambda_search_bounds(X)
    seed_u = config.seed & ((1 << 64) - 1)

    if warm is not None:
        lam0 = warm.lambdas.copy()
        if mask is not None:
            lam0[~mask] = 0.0
        else:
            lam0[:] = 0.0
        chols = []
        for g in range(G):
            ridged = _cholesky_with_ridge(warm.covariances[g], config.ridge)
            if ridged is None:
                raise DegenerateComponentError("warm-start covariance not positive definite")
            chols.append(ridged[0])
        z0, _ = _estep(X, warm.weights, warm.means, chols, lam0,
                       mask is not None and bool(mask.any()))
        try:
            return _run_em(X, G, mask, lam0, z0, config, bounds, max_iter)
        except _DegenerateRun:
            raise DegenerateComponentError(
                f"component collapsed during warm-started fit (G={G})") from None

    best: CoreFit | None = None
    for start in range(config.n_starts):
        for restart in range(_MAX_RESTARTS):
            rng = np.random.default_rng([seed_u, start, restart])
            if G == 1:
                z0 = np.ones((n, 1))
            else:
                z0 = _one_hot(_kmeans_labels(X, G, rng), G)
            lam0 = np.zeros((G, p))
            try:
                fit = _run_em(X, G, mask, lam0, z0, config, bounds, max_iter)
            except _DegenerateRun:
                continue
            if best is None or fit.loglik > best.loglik:
                best = fit
            break
    if best is None:
        raise DegenerateComponentError(
            f"all {config.n_starts * _MAX_RESTARTS} initializations produced a "
            f"degenerate component (G={G}, n={n}, p={p})")
    return best
