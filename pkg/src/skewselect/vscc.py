"""Variable selection for clustering by within-group variance ranking under a
moving correlation threshold.

The selection rule builds five candidate variable subsets. Variables are
visited in ascending order of within-group variance w; the minimizer is
always selected, and a later variable j joins subset i (i = 1..5) only if
|corr(j, r)| < 1 - w_j**i for every r already selected. Each candidate subset
is then clustered and the subset with minimal clustering uncertainty wins.

For the skewed variant, a transformation mixture is fit first and the data
are mapped to near-normality with its skewness parameters: within-group
variance sums the (i, g) terms over each component's own transformed copy,
correlations and the candidate-subset fits use the responsibility-blended
transformed matrix, scaled by its own mean and sample standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _transforms
from ._emcore import (
    DegenerateComponentError,
    EmConfig,
    lambda_search_bounds,
    optimize_component_lambdas,
)
from .datasets import DataMatrix, standardize
from .gaussian_mixture import select_g
from .manly_mixture import (
    ManlyMixtureFit,
    backward_lambda_selection,
    em_fit_manly,
    forward_lambda_selection,
)

__all__ = [
    "N_EXPONENTS",
    "SubsetFamily",
    "SelectionResult",
    "within_group_variance",
    "build_subsets",
    "uncertainty",
    "vscc_gaussian",
    "vscc_manly",
    "vscc_classify",
]

N_EXPONENTS = 5

MANLY_MODES = ("full", "forward", "backward")


def _as_array(X) -> np.ndarray:
    return np.asarray(getattr(X, "values", X), dtype=float)


def _as_resp_array(z) -> np.ndarray:
    return np.asarray(getattr(z, "z", z), dtype=float)


@dataclass(frozen=True)
class SubsetFamily:
    """The five candidate subsets with the quantities that produced them.

    ``subsets`` holds 0-based column indices in insertion order; ``w`` the
    per-variable within-group variances (post-scaling); ``sort_order`` the
    ascending-w visiting order; ``corr`` the correlation matrix the selection
    criterion was evaluated on. Construction replays the selection rule and
    raises if any stored subset violates it.
    """

    subsets: tuple[tuple[int, ...], ...]
    w: np.ndarray
    sort_order: np.ndarray
    corr: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        order = np.asarray(self.sort_order, dtype=int)
        corr = np.atleast_2d(np.asarray(self.corr, dtype=float))
        subsets = tuple(tuple(int(j) for j in v) for v in self.subsets)
        for arr in (w, order, corr):
            arr.flags.writeable = False
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "sort_order", order)
        object.__setattr__(self, "corr", corr)
        object.__setattr__(self, "subsets", subsets)
        self.verify()

    def verify(self) -> None:
        """Replay the insertion rule and re-check every accepted pair."""
        w, order, corr = self.w, self.sort_order, self.corr
        p = w.shape[0]
        if len(self.subsets) != N_EXPONENTS:
            raise RuntimeError(f"expected {N_EXPONENTS} subsets")
        if sorted(order.tolist()) != list(range(p)):
            raise RuntimeError("sort_order is not a permutation")
        if np.any(w[order[:-1]] > w[order[1:]]):
            raise RuntimeError("sort_order does not sort w ascending")
        first = int(order[0])
        for i, stored in enumerate(self.subsets, start=1):
            if not stored or stored[0] != first:
                raise RuntimeError(
                    f"minimal-w variable {first} must open subset {i}")
            accepted = [first]
            for j in order[1:]:
                j = int(j)
                threshold = 1.0 - w[j] ** i
                if all(abs(corr[j, r]) < threshold for r in accepted):
                    accepted.append(j)
            if tuple(accepted) != stored:
                raise RuntimeError(
                    f"subset {i} fails replay: stored {stored}, replay "
                    f"{tuple(accepted)}")


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of a variable-selection run.

    ``fits`` aligns with the five subsets; an entry is None when that subset's
    model fit failed (its uncertainty is NaN and it is excluded from the
    choice). ``chosen_index`` is the 1-based exponent of the winning subset.
    """

    family: SubsetFamily
    fits: tuple
    uncertainties: tuple[float, ...]
    chosen_index: int
    chosen_subset: tuple[str, ...]
    final_fit: object
    method: str
    column_names: tuple[str, ...]
    full_fit: object


def within_group_variance(Y, z, mu) -> np.ndarray:
    """Per-variable within-group variance (1/n) sum_g sum_i z_ig (y_ij - mu_gj)^2."""
    Y = _as_array(Y)
    z = _as_resp_array(z)
    mu = np.asarray(mu, dtype=float)
    n, p = Y.shape
    if z.shape[0] != n:
        raise ValueError(f"z has {z.shape[0]} rows, expected {n}")
    G = z.shape[1]
    if mu.shape != (G, p):
        raise ValueError(f"mu must have shape ({G}, {p}), got {mu.shape}")
    total = np.zeros(p)
    for g in range(G):
        total += z[:, g] @ (Y - mu[g]) ** 2
    return total / n


def _weighted_group_means(Y: np.ndarray, z: np.ndarray) -> np.ndarray:
    nk = z.sum(axis=0)
    return (z.T @ Y) / nk[:, None]


def build_subsets(Y, w) -> SubsetFamily:
    """Construct the five candidate subsets from data and variance ranking."""
    Y = _as_array(Y)
    w = np.asarray(w, dtype=float)
    p = Y.shape[1]
    if w.shape != (p,):
        raise ValueError(f"w must have length {p}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("w must be finite and nonnegative")
    if p == 1:
        corr = np.ones((1, 1))
    else:
        corr = np.corrcoef(Y, rowvar=False)
    order = np.argsort(w, kind="stable")
    subsets = []
    for i in range(1, N_EXPONENTS + 1):
        accepted = [int(order[0])]
        for j in order[1:]:
            j = int(j)
            threshold = 1.0 - w[j] ** i
            if all(abs(corr[j, r]) < threshold for r in accepted):
                accepted.append(j)
        subsets.append(tuple(accepted))
    return SubsetFamily(tuple(subsets), w, order, corr)


def uncertainty(z) -> float:
    """n minus the summed row maxima of the responsibilities; 0 iff one-hot."""
    z = _as_resp_array(z)
    return float(z.shape[0] - z.max(axis=1).sum())


def _fit_subsets(family: SubsetFamily, Xs: DataMatrix, fitter, full_fit,
                 on_error: str):
    """Fit each candidate subset, deduplicating identical column sets.

    full_fit, when given, pre-seeds the cache for the all-columns subset.
    """
    cache: dict[tuple[int, ...], object] = {}
    if full_fit is not None:
        cache[tuple(range(Xs.p))] = full_fit
    fits, uncs = [], []
    for subset in family.subsets:
        key = tuple(sorted(subset))
        if key not in cache:
            try:
                cache[key] = fitter(Xs.select(key))
            except (DegenerateComponentError, ValueError) as err:
                if on_error == "raise":
                    raise
                cache[key] = err
        hit = cache[key]
        if isinstance(hit, Exception):
            fits.append(None)
            uncs.append(math.nan)
        else:
            fits.append(hit)
            uncs.append(uncertainty(hit.responsibilities))
    return tuple(fits), tuple(uncs)


def _choose(family: SubsetFamily, fits, uncs):
    candidates = [
        (uncs[k], len(family.subsets[k]), k + 1, fits[k])
        for k in range(N_EXPONENTS)
        if fits[k] is not None
    ]
    if not candidates:
        raise DegenerateComponentError("every candidate subset fit failed")
    u, _, idx, fit = min(candidates, key=lambda c: (c[0], c[1], c[2]))
    return idx, fit


def _result(family, fits, uncs, Xs, method, full_fit) -> SelectionResult:
    idx, fit = _choose(family, fits, uncs)
    chosen = tuple(sorted(family.subsets[idx - 1]))
    names = tuple(Xs.column_names[j] for j in chosen)
    return SelectionResult(
        family=family,
        fits=fits,
        uncertainties=uncs,
        chosen_index=idx,
        chosen_subset=names,
        final_fit=fit,
        method=method,
        column_names=Xs.column_names,
        full_fit=full_fit,
    )


def vscc_gaussian(X: DataMatrix, g_range, config: EmConfig, *,
                  scale_input: bool = True) -> SelectionResult:
    """Variable selection with Gaussian mixture fits throughout.

    With scale_input=False the caller asserts X is already standardized.
    """
    Xs = standardize(X)[0] if scale_input else X
    full = select_g(Xs, g_range, config)
    z = full.responsibilities.z
    mu = _weighted_group_means(Xs.values, z)
    w = within_group_variance(Xs.values, z, mu)
    family = build_subsets(Xs.values, w)
    fits, uncs = _fit_subsets(
        family, Xs, lambda sub: select_g(sub, g_range, config), full,
        on_error="raise")
    return _result(family, fits, uncs, Xs, "gaussian", full)


def _select_g_manly(X, g_range, config, mode) -> ManlyMixtureFit:
    """BIC-maximizing component count for the requested skewness mode."""
    values = _as_array(X)
    p = values.shape[1]
    gs = sorted(set(int(g) for g in g_range))
    if not gs:
        raise ValueError("g_range must be nonempty")
    if any(g < 1 for g in gs):
        raise ValueError("all component counts must be >= 1")
    best = None
    last_err = None
    for g in gs:
        try:
            if mode == "full":
                fit = em_fit_manly(values, g, np.ones((g, p), dtype=bool), config)
            elif mode == "forward":
                fit = forward_lambda_selection(values, g, config)
            else:
                fit = backward_lambda_selection(values, g, config)
        except (DegenerateComponentError, ValueError) as err:
            last_err = err
            continue
        if best is None or fit.bic > best.bic:
            best = fit
    if best is None:
        raise DegenerateComponentError(
            f"every component count in {gs} failed; last error: {last_err}")
    return best


def _transformed_variances(values: np.ndarray, z: np.ndarray, lam: np.ndarray):
    """Blend per-component transforms, scale, and compute w on the result.

    Returns (w, blended_scaled) where blended_scaled is the responsibility
    blend of the per-component transformed copies after centering/scaling by
    its own mean and sample standard deviation. Because rows of z sum to one,
    the same affine scaling applied to each per-component copy commutes with
    the blend.
    """
    n, p = values.shape
    G = z.shape[1]
    transformed = [_transforms.transform_columns(values, lam[g]) for g in range(G)]
    blended = np.zeros((n, p))
    for g in range(G):
        blended += z[:, g, None] * transformed[g]
    center = blended.mean(axis=0)
    scale = blended.std(axis=0, ddof=1)
    if np.any(scale <= 0):
        j = int(np.flatnonzero(scale <= 0)[0])
        raise ValueError(f"zero variance in blended transformed column {j}")
    w = np.zeros(p)
    nk = z.sum(axis=0)
    for g in range(G):
        Yt = (transformed[g] - center) / scale
        mu_g = z[:, g] @ Yt / nk[g]
        w += z[:, g] @ (Yt - mu_g) ** 2
    w /= n
    blended_scaled = (blended - center) / scale
    return w, blended_scaled


def vscc_manly(X: DataMatrix, g_range, mode: str, config: EmConfig, *,
               scale_input: bool = True) -> SelectionResult:
    """Variable selection with a transformation-mixture first stage.

    mode is "full" (all skewness parameters free), "forward", or "backward"
    (stepwise parameter selection) and governs the initial fit that estimates
    the transformation parameters. Those parameters are then applied to the
    data, and the candidate subsets are clustered on the transformed, scaled
    variables with Gaussian mixtures (component count re-selected by BIC), so
    each subset model is still a transformation mixture with the first-stage
    parameters. Refitting free skewness parameters per subset instead lets
    component-specific transforms manufacture spurious confidence out of
    uninformative variables and distorts the uncertainty comparison. A subset
    whose fit fails is dropped from that comparison.
    """
    if mode not in MANLY_MODES:
        raise ValueError(f"mode must be one of {MANLY_MODES}, got {mode!r}")
    Xs = standardize(X)[0] if scale_input else X
    full = _select_g_manly(Xs, g_range, config, mode)
    z = full.responsibilities.z
    w, blended_scaled = _transformed_variances(Xs.values, z, full.lambdas.values)
    family = build_subsets(blended_scaled, w)
    transformed = DataMatrix(blended_scaled, Xs.column_names)
    fits, uncs = _fit_subsets(
        family, transformed, lambda sub: select_g(sub, g_range, config),
        None, on_error="exclude")
    return _result(family, fits, uncs, Xs, f"manly-{mode}", full)


def vscc_classify(X: DataMatrix, labels, mode: str,
                  config: EmConfig) -> SubsetFamily:
    """Subset construction from known group memberships (classification).

    One-hot memberships replace the fitted responsibilities; in "manly" mode
    each class's skewness parameters are estimated by maximizing its
    class-conditional log-likelihood before the transform step. Returns the
    subset family only; fitting a classifier on the subsets is the caller's
    concern.
    """
    if mode not in ("gaussian", "manly"):
        raise ValueError(f"mode must be 'gaussian' or 'manly', got {mode!r}")
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 1 or labels.shape[0] != X.n:
        raise ValueError(f"labels must have length n={X.n}")
    K = int(labels.max(initial=0))
    if labels.min(initial=1) < 1 or set(labels.tolist()) != set(range(1, K + 1)):
        raise ValueError("labels must cover every class in 1..K")
    counts = np.bincount(labels, minlength=K + 1)[1:]
    if np.any(counts < X.p + 1):
        small = int(np.flatnonzero(counts < X.p + 1)[0]) + 1
        raise ValueError(
            f"class {small} has {counts[small - 1]} members; need >= p+1 = {X.p + 1}")
    Xs, _ = standardize(X)
    z = np.zeros((X.n, K))
    z[np.arange(X.n), labels - 1] = 1.0
    lam = np.zeros((K, Xs.p))
    if mode == "manly":
        bounds = lambda_search_bounds(Xs.values)
        var_floor = 1e-4 * float(Xs.values.var(axis=0).mean())
        free = np.ones(Xs.p, dtype=bool)
        for g in range(K):
            optimize_component_lambdas(Xs.values, z[:, g], lam[g], free,
                                       bounds, var_floor, n_passes=25)
    w, blended_scaled = _transformed_variances(Xs.values, z, lam)
    return build_subsets(blended_scaled, w)
