"""Exponential (Manly-type) transform primitives and a bounded 1-D maximizer.

Internal module: the public surface lives in :mod:`skewselect.manly_mixture`.
"""

from __future__ import annotations

import math

import numpy as np

# Below this magnitude the transform switches to a series expansion in the
# skewness parameter; selection procedures report such entries as zero.
LAMBDA_EPS = 1e-5

# Search bounds for skewness parameters on standardized data; keeps
# exp(lambda * x) far from overflow.
LAMBDA_BOUND = 5.0

# exp() overflows just above 709; stay clear of it.
_MAX_EXPONENT = 700.0

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class TransformOverflowError(OverflowError):
    """exp(lambda * x) would overflow; carries the offending values."""

    def __init__(self, x, lam):
        self.x = x
        self.lam = lam
        super().__init__(f"transform overflow: exp({lam} * {x}) is not representable")


def transform(x: float, lam: float) -> float:
    """Map x to (exp(lam*x) - 1)/lam, the identity when lam is (near) zero."""
    if abs(lam) < LAMBDA_EPS:
        return x + lam * x * x / 2.0 + lam * lam * x * x * x / 6.0
    if lam * x > _MAX_EXPONENT + 9.0:
        raise TransformOverflowError(x, lam)
    out = math.expm1(lam * x) / lam
    if not math.isfinite(out):
        raise TransformOverflowError(x, lam)
    return out


def inverse(y: float, lam: float) -> float:
    """Invert :func:`transform`: log(lam*y + 1)/lam, or y when lam is tiny."""
    if abs(lam) < LAMBDA_EPS:
        return y
    arg = lam * y + 1.0
    if arg <= 0.0:
        raise ValueError(
            f"inverse transform undefined: lam*y + 1 = {arg} <= 0 (y={y}, lam={lam})"
        )
    return math.log(arg) / lam


def transform_columns(X: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Apply the transform columnwise with per-column parameters.

    Exponents are clipped at the overflow guard; callers keep |lam| within
    data-dependent bounds so the clip is inactive in normal operation.
    """
    X = np.asarray(X, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = np.array(X, copy=True)
    for j, lj in enumerate(lam):
        if abs(lj) < LAMBDA_EPS:
            if lj != 0.0:
                xj = X[:, j]
                out[:, j] = xj + lj * xj * xj / 2.0 + lj * lj * xj * xj * xj / 6.0
        else:
            out[:, j] = np.expm1(np.minimum(lj * X[:, j], _MAX_EXPONENT)) / lj
    return out


def transform_column(x: np.ndarray, lam: float) -> np.ndarray:
    """Vectorized single-column transform with the same overflow clip."""
    if abs(lam) < LAMBDA_EPS:
        if lam == 0.0:
            return np.array(x, copy=True)
        return x + lam * x * x / 2.0 + lam * lam * x * x * x / 6.0
    return np.expm1(np.minimum(lam * x, _MAX_EXPONENT)) / lam


def golden_section_maximize(f, lower: float, upper: float, tol: float,
                            max_evals: int = 100) -> tuple[float, float]:
    """Maximize f on [lower, upper] by golden-section search.

    Returns (argmax estimate, f value there). Objective values must be
    finite. Converges to within tol of a local maximizer using at most
    max_evals objective evaluations.
    """
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    a, b = float(lower), float(upper)
    c = b - (b - a) * _INV_PHI
    d = a + (b - a) * _INV_PHI
    fc, fd = f(c), f(d)
    evals = 2
    for v, t in ((fc, c), (fd, d)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite objective value {v} at {t}")
    while b - a > tol and evals < max_evals:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - (b - a) * _INV_PHI
            fc = f(c)
            probe = fc, c
        else:
            a, c, fc = c, d, fd
            d = a + (b - a) * _INV_PHI
            fd = f(d)
            probe = fd, d
        evals += 1
        if not math.isfinite(probe[0]):
            raise ValueError(f"non-finite objective value {probe[0]} at {probe[1]}")
    if fc >= fd:
        return c, fc
    return d, fd
