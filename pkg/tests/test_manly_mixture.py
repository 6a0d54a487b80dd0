import math

import numpy as np
import pytest

from skewselect._emcore import profile_objective
from skewselect._kernels import component_lambda_pass
from skewselect._transforms import (
    golden_section_maximize,
    transform_column,
    transform_columns,
)
from skewselect.datasets import DataMatrix
from skewselect.gaussian_mixture import EmConfig, em_fit_gmm, gmm_param_count
from skewselect.manly_mixture import (
    LAMBDA_EPS,
    LambdaMatrix,
    TransformOverflowError,
    backward_lambda_selection,
    em_fit_manly,
    forward_lambda_selection,
    log_jacobian,
    manly_component_logdensity,
    manly_inverse,
    manly_transform,
    optimize_lambda_1d,
)


class TestTransform:
    def test_identity_branch(self):
        assert manly_transform(5.0, 0.0) == 5.0

    def test_unit_parameter(self):
        assert manly_transform(1.0, 1.0) == pytest.approx(
            1.7182818284590452, abs=1e-12)

    def test_negative_parameter(self):
        # (exp(-1) - 1)/(-0.5), frozen from 40-digit arithmetic
        assert manly_transform(2.0, -0.5) == pytest.approx(
            1.2642411176571153568, abs=1e-14)

    def test_overflow_carries_values(self):
        with pytest.raises(TransformOverflowError) as err:
            manly_transform(300.0, 4.0)
        assert err.value.x == 300.0
        assert err.value.lam == 4.0


class TestInverse:
    def test_identity_branch(self):
        assert manly_inverse(5.0, 0.0) == 5.0

    def test_inverts_unit_case(self):
        assert manly_inverse(math.e - 1.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_domain_violation(self):
        with pytest.raises(ValueError, match="undefined"):
            manly_inverse(-3.0, 1.0)


class TestRoundTrip:
    def test_grid(self):
        # When lam*x is very negative, T(x) lands within float64 spacing of
        # the asymptote -1/lam and the rounding of the output destroys
        # information about x; no inverse can beat
        #     ulp(y) / (|lam| * (lam*y + 1))
        # there. Assert 1e-9 wherever that bound allows it, and the bound
        # itself (with a 4x safety factor) on every cell.
        eps = np.finfo(float).eps
        for x in np.linspace(-10, 10, 21):
            for lam in np.linspace(-2, 2, 21):
                y = manly_transform(x, lam)
                err = abs(manly_inverse(y, lam) - x)
                if abs(lam) < LAMBDA_EPS:
                    assert err == 0.0
                    continue
                arg = lam * y + 1.0
                bound = 4 * eps * max(1.0, abs(y)) / (abs(lam) * arg)
                assert err <= max(1e-9, bound), (x, lam, err, bound)
                if bound <= 1e-9:
                    assert err <= 1e-9, (x, lam, err)

    def test_series_continuity_at_zero(self):
        for x in (-7.5, -1.0, 0.3, 4.0, 9.9):
            lam = LAMBDA_EPS * 0.99
            series = x + lam * x * x / 2.0 + lam * lam * x**3 / 6.0
            assert manly_transform(x, lam) == pytest.approx(series, abs=1e-9)
            # branch gap at the switch point: series vs exact at the same lam
            exact = manly_transform(x, LAMBDA_EPS)
            series_at_eps = x + LAMBDA_EPS * x * x / 2.0 \
                + LAMBDA_EPS * LAMBDA_EPS * x**3 / 6.0
            assert exact == pytest.approx(series_at_eps, abs=1e-9)


class TestJacobian:
    def test_zero(self):
        assert log_jacobian([3.0, -2.0], [0.0, 0.0]) == 0.0

    def test_dot_product(self):
        assert log_jacobian([1.0, 2.0], [0.5, -0.5]) == pytest.approx(-0.5)

    def test_scalar(self):
        assert log_jacobian([3.0], [2.0]) == pytest.approx(6.0)


class TestComponentLogDensity:
    def test_zero_lambda_is_gaussian(self):
        from skewselect.gaussian_mixture import gaussian_log_density
        x = np.array([0.3, -1.2])
        sigma = np.array([[2.0, 0.5], [0.5, 1.0]])
        assert manly_component_logdensity(x, [0.0, 0.0], [0.0, 0.0], sigma) == \
            gaussian_log_density(x, [0.0, 0.0], sigma)

    def test_mode_value(self):
        value = manly_component_logdensity([0.0], [1.0], [0.0], [[1.0]])
        assert value == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_transformed_point(self):
        # T(1|0.5) = 1.29744254..., log phi there plus jacobian 0.5; frozen
        # from 40-digit arithmetic.
        value = manly_component_logdensity([1.0], [0.5], [0.0], [[1.0]])
        assert value == pytest.approx(-1.2606171073222506, abs=1e-12)

    def test_density_normalizes_1d(self):
        from scipy.integrate import simpson
        triples = [(0.0, 0.0, 1.0), (0.5, 0.5, 0.4), (-0.5, 0.5, 0.25),
                   (1.0, 0.8, 0.3), (-1.0, -0.2, 0.2)]
        xs = np.linspace(-30, 30, 120001)
        for lam, mu, sd in triples:
            logf = np.array([
                manly_component_logdensity([x], [lam], [mu], [[sd * sd]])
                for x in xs])
            mass = simpson(np.exp(logf), x=xs)
            assert mass == pytest.approx(1.0, abs=1e-4), (lam, mu, sd)


class TestOptimizer:
    def test_quadratic(self):
        t = optimize_lambda_1d(lambda x: -(x - 0.3) ** 2, -5, 5, 1e-6)
        assert t == pytest.approx(0.3, abs=1e-5)

    def test_absolute_value(self):
        t = optimize_lambda_1d(lambda x: -abs(x), -5, 5, 1e-6)
        assert t == pytest.approx(0.0, abs=1e-5)

    def test_constant_terminates(self):
        t = optimize_lambda_1d(lambda x: 1.0, -2, 2, 1e-6)
        assert -2 <= t <= 2

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            optimize_lambda_1d(lambda x: float("nan"), -1, 1, 1e-6)

    def test_empty_interval_rejected(self):
        with pytest.raises(ValueError):
            optimize_lambda_1d(lambda x: -x * x, 2, 2, 1e-6)

    def test_eval_budget(self):
        calls = []
        optimize_lambda_1d(lambda x: calls.append(x) or -x * x, -5, 5, 1e-12)
        assert len(calls) <= 100


class TestLambdaMatrix:
    def test_masked_entries_must_be_zero(self):
        with pytest.raises(ValueError, match="exactly 0"):
            LambdaMatrix(np.array([[0.5]]), np.array([[False]]))

    def test_bound_enforced(self):
        with pytest.raises(ValueError, match="exceed"):
            LambdaMatrix(np.array([[7.0]]), np.array([[True]]))

    def test_free_count(self):
        lm = LambdaMatrix(np.array([[0.5, 0.0]]),
                          np.array([[True, False]]))
        assert lm.n_free == 1


class TestKernelMatchesPython:
    def python_pass(self, X, w, lam, free, lo, hi):
        n, p = X.shape
        W = float(w.sum())
        Y = transform_columns(X, lam)
        for j in np.flatnonzero(free):
            xj = X[:, j]
            t_lin = float(w @ xj)
            if p > 1:
                others = [k for k in range(p) if k != j]
                Yf = Y[:, others]
                mf = w @ Yf / W
                Df = Yf - mf
                P = Df * w[:, None]
                S11 = 0.5 * (P.T @ Df + (P.T @ Df).T) / W
                S11inv = np.linalg.inv(S11)
            else:
                P = None
                S11inv = None
            obj = profile_objective(xj, w, W, P, S11inv, t_lin)
            t_new, f_new = golden_section_maximize(obj, lo[j], hi[j], 1e-6)
            if f_new > obj(float(lam[j])):
                lam[j] = t_new
                Y[:, j] = transform_column(xj, t_new)
        return lam

    @pytest.mark.parametrize("seed,p", [(0, 1), (1, 2), (2, 4)])
    def test_one_pass_agreement(self, seed, p):
        rng = np.random.default_rng(seed)
        X = np.ascontiguousarray(rng.gamma(2.0, 1.0, size=(150, p)) - 1.0)
        w = np.ascontiguousarray(rng.uniform(0.2, 1.0, size=150))
        lo = np.full(p, -5.0)
        hi = np.full(p, 5.0)
        free = np.ones(p, dtype=bool)

        lam_py = np.zeros(p)
        self.python_pass(X, w, lam_py, free, lo, hi)
        self.python_pass(X, w, lam_py, free, lo, hi)

        lam_k = np.zeros(p)
        component_lambda_pass(X, w, lam_k, free, lo, hi, 1e-6, 100, 0.0)
        component_lambda_pass(X, w, lam_k, free, lo, hi, 1e-6, 100, 0.0)

        np.testing.assert_allclose(lam_k, lam_py, atol=1e-3)


def lognormal_matrix(n=500, seed=42):
    rng = np.random.default_rng(seed)
    return DataMatrix(np.exp(rng.normal(size=(n, 1))), ("x",))


class TestEmFitManly:
    def test_all_false_mask_reduces_to_gmm(self):
        rng = np.random.default_rng(7)
        X = DataMatrix(rng.normal(size=(100, 2)) ** 2, ("a", "b"))
        cfg = EmConfig(n_starts=2, seed=5)
        g = em_fit_gmm(X, 2, cfg)
        m = em_fit_manly(X, 2, np.zeros((2, 2), bool), cfg)
        assert m.loglik == pytest.approx(g.loglik, abs=1e-8)
        assert m.bic == pytest.approx(g.bic, abs=1e-8)
        assert m.n_params == g.n_params

    def test_lognormal_fit_beats_gaussian(self):
        X = lognormal_matrix()
        cfg = EmConfig(n_starts=1, seed=3)
        manly = em_fit_manly(X, 1, np.ones((1, 1), bool), cfg)
        gauss = em_fit_gmm(X, 1, cfg)
        assert manly.loglik > gauss.loglik + 50
        # right-skewed data needs a contracting (negative) parameter
        assert manly.lambdas.values[0, 0] < -0.1

    def test_precondition_n_greater_g(self):
        X = DataMatrix(np.eye(3), ("a", "b", "c"))
        with pytest.raises(ValueError, match="more observations"):
            em_fit_manly(X, 3, np.ones((3, 3), bool), EmConfig(seed=0))

    def test_param_count_includes_free_entries(self):
        rng = np.random.default_rng(0)
        X = DataMatrix(rng.normal(size=(80, 2)), ("a", "b"))
        mask = np.array([[True, False], [True, True]])
        fit = em_fit_manly(X, 2, mask, EmConfig(n_starts=1, seed=1))
        assert fit.n_params == gmm_param_count(2, 2) + 3
        assert np.all(fit.lambdas.values[~mask] == 0.0)

    def test_generalized_em_monotone(self):
        rng = np.random.default_rng(31)
        X = DataMatrix(rng.gamma(1.5, 1.0, size=(150, 2)), ("a", "b"))
        fit = em_fit_manly(X, 2, np.ones((2, 2), bool),
                           EmConfig(n_starts=1, seed=11))
        hist = fit.loglik_history
        assert all(b - a >= -1e-6 for a, b in zip(hist, hist[1:]))


def two_symmetric_clouds(n_per=150, seed=19):
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.normal(-4.0, 1.0, size=(n_per, 2)),
        rng.normal(4.0, 1.0, size=(n_per, 2)),
    ])
    return DataMatrix(X, ("a", "b"))


class TestForwardSelection:
    def test_symmetric_data_keeps_zero_mask(self):
        X = two_symmetric_clouds()
        fit = forward_lambda_selection(X, 2, EmConfig(n_starts=2, seed=23))
        assert fit.lambdas.n_free == 0
        assert fit.selection_bics is not None
        assert len(fit.selection_bics) == 1

    def test_lognormal_frees_one_entry(self):
        X = lognormal_matrix()
        cfg = EmConfig(n_starts=1, seed=3)
        fit = forward_lambda_selection(X, 1, cfg)
        gauss = em_fit_gmm(X, 1, cfg)
        assert fit.lambdas.n_free == 1
        assert fit.bic > gauss.bic
        bics = fit.selection_bics
        assert all(b2 > b1 for b1, b2 in zip(bics, bics[1:]))

    def test_tiny_data_terminates(self):
        X = DataMatrix(np.array([[0.1], [0.5], [1.1], [2.0], [3.2]]), ("x",))
        fit = forward_lambda_selection(X, 1, EmConfig(n_starts=1, seed=0))
        assert fit.lambdas.mask.shape == (1, 1)


class TestBackwardSelection:
    def test_symmetric_data_prunes(self):
        X = two_symmetric_clouds()
        cfg = EmConfig(n_starts=2, seed=23)
        fit = backward_lambda_selection(X, 2, cfg)
        full = em_fit_manly(X, 2, np.ones((2, 2), bool), cfg)
        assert fit.bic >= full.bic - 1e-9
        bics = fit.selection_bics
        assert all(b2 > b1 for b1, b2 in zip(bics, bics[1:]))

    def test_single_entry_case(self):
        X = lognormal_matrix(n=200, seed=9)
        fit = backward_lambda_selection(X, 1, EmConfig(n_starts=1, seed=2))
        # at most one removal step is possible
        assert len(fit.selection_bics) <= 2
