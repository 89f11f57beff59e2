"""Dual and hyper-dual forward differentiation."""

import numpy as np
import pytest

from ocpik import autodiff as ad
from ocpik.errors import EvaluationError


def central_diff(f, x, h=1e-5):
    out = np.zeros(x.size)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (f(xp) - f(xm)) / (2 * h)
    return out


class TestGradient:
    def test_polynomial(self):
        # f = x1*x2 + x1^3 at (1, 2) -> (5, 1)
        g = ad.gradient(lambda w: w[0] * w[1] + w[0] ** 3, np.array([1.0, 2.0]))
        np.testing.assert_allclose(g, [5.0, 1.0], rtol=0, atol=0)

    def test_sin_at_zero(self):
        g = ad.gradient(lambda w: ad.sin(w[0]), np.array([0.0]))
        np.testing.assert_allclose(g, [1.0])

    def test_random_polynomial_vs_finite_differences(self):
        rng = np.random.default_rng(0)
        coeffs = rng.standard_normal((4, 3))

        def poly(w):
            acc = 0.0 * w[0]
            for c in coeffs:
                acc = acc + c[0] * w[0] ** 2 * w[1] + c[1] * w[2] ** 3 + c[2] * w[0] * w[2]
            return acc

        for _ in range(10):
            x = rng.standard_normal(3)
            g = ad.gradient(poly, x)
            fd = central_diff(lambda v: float(poly(v)), x)
            np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)

    def test_constant_function(self):
        g = ad.gradient(lambda w: 3.0, np.array([1.0, 2.0]))
        np.testing.assert_array_equal(g, np.zeros(2))

    def test_nonfinite_raises(self):
        with pytest.raises(EvaluationError):
            ad.gradient(lambda w: ad.log(w[0]), np.array([-1.0]))


class TestHessian:
    def test_polynomial(self):
        # f = x1*x2 + x1^3 at (1, 2) -> [[6, 1], [1, 0]]
        H = ad.hessian(lambda w: w[0] * w[1] + w[0] ** 3, np.array([1.0, 2.0]))
        np.testing.assert_allclose(H, [[6.0, 1.0], [1.0, 0.0]])

    def test_linear_is_zero(self):
        c = np.array([2.0, -1.0, 0.5])
        H = ad.hessian(lambda w: np.dot(c, w), np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(H, np.zeros((3, 3)))

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(1)

        def f(w):
            return ad.sin(w[0] * w[1]) * ad.exp(w[2]) + w[1] ** 3 / (1.0 + w[0] ** 2)

        for _ in range(5):
            H = ad.hessian(f, rng.standard_normal(3))
            assert np.array_equal(H, H.T)

    def test_contraction_matches_fd_of_gradient(self):
        from ocpik.problems import cartpole_dynamics, rk4_step

        dyn = cartpole_dynamics()
        rng = np.random.default_rng(2)
        pi = rng.standard_normal(4)

        def contracted(w):
            return np.dot(pi, rk4_step(dyn.rhs, w[1:], w[:1], 0.05))

        x = rng.standard_normal(5) * 0.5
        H = ad.hessian(contracted, x)
        h = 1e-5
        fdh = np.stack([
            (ad.gradient(contracted, x + h * e) - ad.gradient(contracted, x - h * e)) / (2 * h)
            for e in np.eye(5)
        ])
        np.testing.assert_allclose(H, 0.5 * (fdh + fdh.T), rtol=1e-5, atol=1e-5)

    def test_contraction_linearity(self):
        rng = np.random.default_rng(3)

        def components(w):
            return ad.pack([w[0] ** 2 * w[1], ad.cos(w[1]) * w[0], w[0] ** 3])

        lam = rng.standard_normal(3)
        x = rng.standard_normal(2)
        H_sum = ad.hessian(lambda w: np.dot(lam, components(w)), x)
        H_parts = sum(
            lam[i] * ad.hessian(lambda w, i=i: components(w)[i], x) for i in range(3)
        )
        np.testing.assert_allclose(H_sum, H_parts, atol=1e-12)


class TestJacobian:
    def test_identity(self):
        J = ad.jacobian(lambda w: w * 1.0, np.array([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(J, np.eye(3))

    def test_linear_map(self):
        A = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        J = ad.jacobian(lambda w: np.dot(A, w), np.array([0.3, -0.7]))
        np.testing.assert_allclose(J, A)

    def test_rk4_cartpole_vs_finite_differences(self):
        from ocpik.problems import cartpole_dynamics, rk4_step

        dyn = cartpole_dynamics()
        rng = np.random.default_rng(4)
        w = rng.standard_normal(5) * 0.4

        def step(v):
            return rk4_step(dyn.rhs, v[1:], v[:1], 0.05)

        J = ad.jacobian(step, w)
        h = 1e-5
        fd = np.zeros_like(J)
        for i in range(5):
            wp, wm = w.copy(), w.copy()
            wp[i] += h
            wm[i] -= h
            fd[:, i] = (ad.value(step(wp)) - ad.value(step(wm))) / (2 * h)
        np.testing.assert_allclose(J, fd, rtol=1e-6, atol=1e-6)


class TestScalarSeeds:
    def test_dual_rules(self):
        d = ad.Dual(2.0, 1.0)
        out = d * d * d
        assert out.val == 8.0 and out.dot == 12.0

    def test_hyperdual_mixed_channel(self):
        # d12 of f = x*y + x^3 seeded (e_x, e_y) is d2f/dxdy = 1
        x = ad.HyperDual(1.0, 1.0, 0.0, 0.0)
        y = ad.HyperDual(2.0, 0.0, 1.0, 0.0)
        out = x * y + x * x * x
        assert out.d12 == 1.0
        assert out.d1 == 5.0 and out.d2 == 1.0

    def test_hyperdual_pure_second(self):
        x = ad.HyperDual(1.0, 1.0, 1.0, 0.0)
        out = x * x * x + x * ad.HyperDual(2.0)
        assert out.d12 == 6.0

    def test_division_and_sqrt(self):
        x = ad.HyperDual(4.0, 1.0, 1.0, 0.0)
        out = 1.0 / ad.sqrt(x)
        np.testing.assert_allclose(out.val, 0.5)
        np.testing.assert_allclose(out.d1, -1.0 / 16.0)
        np.testing.assert_allclose(out.d12, 3.0 / 128.0)
