"""JIT-compiled inner loop of the skewness-parameter M-step.

One call runs a full cyclic pass over the free entries of one component's
skewness row: for each entry it builds the weighted fixed-block covariance of
the other transformed columns, then maximizes the profile objective
    obj(t) = -(W/2) * log( var_w(y_t) - s_t' S11^{-1} s_t ) + t * sum_i w_i x_ij
over t by bounded Brent search (derivative-free, to within the same tolerance
as the pure-Python reference in :func:`skewselect._emcore.profile_objective`).
An entry only moves when its objective improves, so the enclosing EM step
remains a generalized EM step.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_LAMBDA_EPS = 1e-5
_MAX_EXPONENT = 700.0
_SQRT_EPS = math.sqrt(2.220446049250313e-16)
_GOLDEN_MEAN = 0.5 * (3.0 - math.sqrt(5.0))


@njit(cache=True)
def _transform_col_into(out, x, t):
    n = x.shape[0]
    if abs(t) < _LAMBDA_EPS:
        if t == 0.0:
            for i in range(n):
                out[i] = x[i]
        else:
            for i in range(n):
                xi = x[i]
                out[i] = xi + t * xi * xi / 2.0 + t * t * xi * xi * xi / 6.0
    else:
        for i in range(n):
            e = t * x[i]
            if e > _MAX_EXPONENT:
                e = _MAX_EXPONENT
            out[i] = math.expm1(e) / t


@njit(cache=True)
def _cholesky_lower(A, L) -> bool:
    """In-place lower Cholesky of A into L; False when A is not PD."""
    p = A.shape[0]
    for i in range(p):
        for j in range(i + 1):
            acc = A[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            if i == j:
                if acc <= 0.0:
                    return False
                L[i, i] = math.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    return True


@njit(cache=True)
def _objective(t, xj, w, W, P, L11, t_lin, var_floor, ybuf, sbuf):
    n = xj.shape[0]
    pm1 = P.shape[1]
    _transform_col_into(ybuf, xj, t)
    sw = 0.0
    for i in range(n):
        sw += w[i] * ybuf[i]
    mj = sw / W
    v = 0.0
    for k in range(pm1):
        sbuf[k] = 0.0
    for i in range(n):
        d = ybuf[i] - mj
        v += w[i] * d * d
        for k in range(pm1):
            sbuf[k] += P[i, k] * d
    v /= W
    # quad = (s/W)' S11^{-1} (s/W) via forward solve with the Cholesky factor
    quad = 0.0
    for k in range(pm1):
        acc = sbuf[k] / W
        for l in range(k):
            acc -= L11[k, l] * sbuf[l]
        sbuf[k] = acc / L11[k, k]
        quad += sbuf[k] * sbuf[k]
    c = v - quad
    # constrained M-step: parameter values that would collapse the
    # conditional variance below the floor are barred outright
    if c < var_floor or c < 1e-300:
        return -1e300
    return -0.5 * W * math.log(c) + t * t_lin


@njit(cache=True)
def _brent_max(xj, w, W, P, L11, t_lin, lo, hi, xatol, maxfun, var_floor,
               ybuf, sbuf):
    """Bounded Brent maximization (fminbound scheme) of the profile objective."""
    a = lo
    b = hi
    fulc = a + _GOLDEN_MEAN * (b - a)
    nfc = fulc
    xf = fulc
    rat = 0.0
    e = 0.0
    x = xf
    fx = -_objective(x, xj, w, W, P, L11, t_lin, var_floor, ybuf, sbuf)
    num = 1
    ffulc = fx
    fnfc = fx
    xm = 0.5 * (a + b)
    tol1 = _SQRT_EPS * abs(xf) + xatol / 3.0
    tol2 = 2.0 * tol1
    while abs(xf - xm) > (tol2 - 0.5 * (b - a)):
        golden = True
        if abs(e) > tol1:
            golden = False
            r = (xf - nfc) * (fx - ffulc)
            q = (xf - fulc) * (fx - fnfc)
            p = (xf - fulc) * q - (xf - nfc) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            r = e
            e = rat
            if (abs(p) < abs(0.5 * q * r)) and (p > q * (a - xf)) and \
                    (p < q * (b - xf)):
                rat = p / q
                x = xf + rat
                if ((x - a) < tol2) or ((b - x) < tol2):
                    si = 1.0 if xm - xf >= 0.0 else -1.0
                    rat = tol1 * si
            else:
                golden = True
        if golden:
            if xf >= xm:
                e = a - xf
            else:
                e = b - xf
            rat = _GOLDEN_MEAN * e
        si = 1.0 if rat >= 0.0 else -1.0
        x = xf + si * max(abs(rat), tol1)
        fu = -_objective(x, xj, w, W, P, L11, t_lin, var_floor, ybuf, sbuf)
        num += 1
        if fu <= fx:
            if x >= xf:
                a = xf
            else:
                b = xf
            fulc = nfc
            ffulc = fnfc
            nfc = xf
            fnfc = fx
            xf = x
            fx = fu
        else:
            if x < xf:
                a = x
            else:
                b = x
            if (fu <= fnfc) or (nfc == xf):
                fulc = nfc
                ffulc = fnfc
                nfc = x
                fnfc = fu
            elif (fu <= ffulc) or (fulc == xf) or (fulc == nfc):
                fulc = x
                ffulc = fu
        xm = 0.5 * (a + b)
        tol1 = _SQRT_EPS * abs(xf) + xatol / 3.0
        tol2 = 2.0 * tol1
        if num >= maxfun:
            break
    return xf, -fx


@njit(cache=True)
def component_lambda_pass(X, w, lam, free, lo, hi, tol, maxfun, var_floor):
    """One cyclic pass over the free entries of one component's skewness row.

    Mutates lam in place; returns (Y, max_move) where Y is the data
    transformed under the final parameters and max_move the largest accepted
    entry change. Entries whose fixed block is not positive definite are left
    untouched.
    """
    n, p = X.shape
    W = 0.0
    for i in range(n):
        W += w[i]
    Y = np.empty((n, p))
    for j in range(p):
        _transform_col_into(Y[:, j], X[:, j], lam[j])
    pm1 = p - 1
    D = np.empty((n, pm1))
    P = np.empty((n, pm1))
    S11 = np.empty((pm1, pm1))
    L11 = np.empty((pm1, pm1))
    xbuf = np.empty(n)
    ybuf = np.empty(n)
    sbuf = np.empty(pm1)
    max_move = 0.0
    for j in range(p):
        if not free[j]:
            continue
        t_lin = 0.0
        for i in range(n):
            xbuf[i] = X[i, j]
            t_lin += w[i] * xbuf[i]
        col = 0
        for k in range(p):
            if k == j:
                continue
            m = 0.0
            for i in range(n):
                m += w[i] * Y[i, k]
            m /= W
            for i in range(n):
                d = Y[i, k] - m
                D[i, col] = d
                P[i, col] = w[i] * d
            col += 1
        for c1 in range(pm1):
            for c2 in range(c1, pm1):
                acc = 0.0
                for i in range(n):
                    acc += P[i, c1] * D[i, c2]
                acc /= W
                S11[c1, c2] = acc
                S11[c2, c1] = acc
        if not _cholesky_lower(S11, L11):
            continue
        cur = lam[j]
        # the floor filters candidate moves only; the incumbent is scored
        # honestly so an accepted move always improves the true objective
        f_cur = _objective(cur, xbuf, w, W, P, L11, t_lin, 0.0, ybuf, sbuf)
        t_new, f_new = _brent_max(xbuf, w, W, P, L11, t_lin, lo[j], hi[j],
                                  tol, maxfun, var_floor, ybuf, sbuf)
        if f_new > f_cur:
            move = abs(t_new - cur)
            if move > max_move:
                max_move = move
            lam[j] = t_new
            _transform_col_into(Y[:, j], xbuf, t_new)
    return Y, max_move
