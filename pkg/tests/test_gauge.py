"""Gauge family properties: homogeneity, Euler relations, polars, constants."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

import minkray as mk
from minkray.gauge import NotC2PlusError, offset_ellipsoidal_gauge


def all_gauges():
    return [
        mk.EuclideanGauge(2),
        mk.EuclideanGauge(3),
        mk.EllipsoidalGauge(np.diag([4.0, 1.0])),
        mk.EllipsoidalGauge(np.array([[2.0, 0.5], [0.5, 1.0]])),
        mk.EllipsoidalGauge(np.diag([4.0, 1.0, 2.25])),
        offset_ellipsoidal_gauge(np.diag([1.0, 1.0]), [0.3, 0.1]),
    ]


def random_nonzero(rng, dim, n):
    xi = rng.standard_normal((n, dim))
    xi *= (0.1 + 3.0 * rng.random((n, 1)))
    return xi[np.linalg.norm(xi, axis=1) > 1e-6]


def fd_grad(g, xi, h=1e-7):
    out = np.empty(g.dim)
    for j in range(g.dim):
        e = np.zeros(g.dim)
        e[j] = h
        out[j] = (g.eval(xi + e) - g.eval(xi - e)) / (2.0 * h)
    return out


def fd_hess_of_grad(g, xi, h=1e-6):
    H = np.empty((g.dim, g.dim))
    for j in range(g.dim):
        e = np.zeros(g.dim)
        e[j] = h
        H[:, j] = (g.grad(xi + e) - g.grad(xi - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


class TestEval:
    def test_euclidean_345(self):
        assert mk.EuclideanGauge(2).eval([3.0, 4.0]) == pytest.approx(5.0)

    def test_ellipsoidal_axis(self):
        g = mk.EllipsoidalGauge(np.diag([4.0, 1.0]))
        assert g.eval([1.0, 0.0]) == pytest.approx(2.0)

    @pytest.mark.parametrize("g", all_gauges())
    def test_origin_is_zero(self, g):
        assert g.eval(np.zeros(g.dim)) == 0.0

    @pytest.mark.parametrize("g", all_gauges())
    def test_positive_off_origin(self, g):
        rng = np.random.default_rng(0)
        for xi in random_nonzero(rng, g.dim, 50):
            assert g.eval(xi) > 0.0


class TestGrad:
    def test_euclidean(self):
        np.testing.assert_allclose(mk.EuclideanGauge(2).grad([0.0, 2.0]),
                                   [0.0, 1.0], atol=1e-15)

    def test_ellipsoidal_closed_form_and_fd(self):
        g = mk.EllipsoidalGauge(np.diag([4.0, 1.0]))
        got = g.grad([-1.0, 0.0])
        np.testing.assert_allclose(got, [-2.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(got, fd_grad(g, np.array([-1.0, 0.0])),
                                   atol=1e-6)

    @pytest.mark.parametrize("g", all_gauges())
    def test_euler_relation(self, g):
        rng = np.random.default_rng(1)
        for xi in random_nonzero(rng, g.dim, 100):
            assert abs(float(g.grad(xi) @ xi) - g.eval(xi)) < 1e-8

    @pytest.mark.parametrize("g", all_gauges())
    def test_fd_consistency_on_sphere(self, g):
        rng = np.random.default_rng(2)
        for xi in random_nonzero(rng, g.dim, 20):
            xi = xi / np.linalg.norm(xi)
            np.testing.assert_allclose(g.grad(xi), fd_grad(g, xi), atol=1e-6)

    def test_origin_raises(self):
        with pytest.raises(mk.DomainError):
            mk.EuclideanGauge(2).grad([0.0, 0.0])
        with pytest.raises(mk.DomainError):
            mk.EuclideanGauge(2).grad([1e-14, 0.0])


class TestHess:
    def test_euclidean(self):
        np.testing.assert_allclose(mk.EuclideanGauge(2).hess([1.0, 0.0]),
                                   np.diag([0.0, 1.0]), atol=1e-15)

    def test_ellipsoidal_closed_form_and_fd(self):
        g = mk.EllipsoidalGauge(np.diag([4.0, 1.0]))
        got = g.hess([-1.0, 0.0])
        np.testing.assert_allclose(got, np.diag([0.0, 0.5]), atol=1e-12)
        np.testing.assert_allclose(got, fd_hess_of_grad(g, np.array([-1.0, 0.0])),
                                   atol=1e-6)

    @pytest.mark.parametrize("g", all_gauges())
    def test_kernel_direction(self, g):
        rng = np.random.default_rng(3)
        for xi in random_nonzero(rng, g.dim, 100):
            assert np.linalg.norm(g.hess(xi) @ xi) < 1e-8 * (1 + np.linalg.norm(xi))

    def test_origin_raises(self):
        with pytest.raises(mk.DomainError):
            mk.EuclideanGauge(2).hess([0.0, 0.0])


class TestHomogeneity:
    @pytest.mark.parametrize("g", all_gauges())
    def test_eval_grad_hess(self, g):
        rng = np.random.default_rng(4)
        for xi in random_nonzero(rng, g.dim, 100):
            t = 10.0 * rng.random() + 1e-3
            assert abs(g.eval(t * xi) - t * g.eval(xi)) <= 1e-12 * max(g.eval(xi), 1.0) * t
            np.testing.assert_allclose(g.grad(t * xi), g.grad(xi),
                                       rtol=1e-8, atol=1e-10)
            np.testing.assert_allclose(g.hess(t * xi), g.hess(xi) / t,
                                       rtol=1e-8, atol=1e-10)


class TestSubadditivity:
    @pytest.mark.parametrize("g", all_gauges())
    def test_triangle(self, g):
        rng = np.random.default_rng(5)
        for _ in range(100):
            xi = rng.standard_normal(g.dim)
            eta = rng.standard_normal(g.dim)
            assert g.eval(xi + eta) <= g.eval(xi) + g.eval(eta) + 1e-12

    @pytest.mark.parametrize("g", all_gauges())
    def test_equality_on_rays(self, g):
        rng = np.random.default_rng(6)
        for _ in range(20):
            xi = rng.standard_normal(g.dim)
            lam = 2.0 * rng.random()
            lhs = g.eval(xi + lam * xi)
            rhs = g.eval(xi) + g.eval(lam * xi)
            assert abs(lhs - rhs) < 1e-10 * max(rhs, 1.0)


class TestPolar:
    def test_euclidean_self_polar(self):
        g = mk.EuclideanGauge(2)
        assert g.polar() is g

    def test_ellipsoidal_closed_form(self):
        g = mk.EllipsoidalGauge(np.diag([4.0, 1.0]))
        assert g.polar().eval([1.0, 0.0]) == pytest.approx(0.5, abs=1e-12)

    def test_ellipsoidal_brute_force_oracle(self):
        # rho0(eta) = max <eta, p> over a dense sample of the rho-sphere
        g = mk.EllipsoidalGauge(np.diag([4.0, 1.0]))
        pol = g.polar()
        psis = np.linspace(0.0, 2.0 * np.pi, 200000, endpoint=False)
        W = np.stack([np.cos(psis), np.sin(psis)], axis=-1)
        P = W / np.asarray(g.eval(W))[:, None]
        rng = np.random.default_rng(7)
        for _ in range(20):
            eta = rng.standard_normal(2)
            brute = float(np.max(P @ eta))
            assert pol.eval(eta) == pytest.approx(brute, abs=1e-8)

    def test_custom_polar_matches_brute_force(self):
        g = offset_ellipsoidal_gauge(np.diag([1.0, 1.0]), [0.3, 0.1])
        pol = g.polar()
        psis = np.linspace(0.0, 2.0 * np.pi, 200000, endpoint=False)
        W = np.stack([np.cos(psis), np.sin(psis)], axis=-1)
        P = W / np.asarray(g.eval(W))[:, None]
        rng = np.random.default_rng(8)
        for _ in range(10):
            eta = rng.standard_normal(2)
            brute = float(np.max(P @ eta))
            assert pol.eval(eta) == pytest.approx(brute, abs=1e-8)

    @pytest.mark.parametrize("g", [
        mk.EuclideanGauge(2),
        mk.EllipsoidalGauge(np.diag([4.0, 1.0])),
        offset_ellipsoidal_gauge(np.diag([1.0, 1.0]), [0.3, 0.1]),
    ])
    def test_bipolar_identity(self, g):
        pp = g.polar().polar()
        for ang in np.linspace(0.0, 2.0 * np.pi, 17):
            u = np.array([np.cos(ang), np.sin(ang)])
            assert pp.eval(u) == pytest.approx(g.eval(u), abs=1e-6)

    def test_cache_is_thread_safe(self):
        g = offset_ellipsoidal_gauge(np.diag([2.0, 1.0]), [0.2, 0.0])
        pol = g.polar()
        etas = [np.array([np.cos(a), np.sin(a)]) for a in np.linspace(0, 6, 40)]
        expected = [pol.eval(e) for e in etas]
        with ThreadPoolExecutor(max_workers=8) as ex:
            for _ in range(3):
                got = list(ex.map(pol.eval, etas))
                np.testing.assert_allclose(got, expected, rtol=0, atol=1e-12)


class TestConstants:
    def test_euclidean_exact(self):
        # c = 1 + 1/2, c6 = min(1/2, (1 - 2/3)) = 1/3
        c = mk.EuclideanGauge(2).constants(512)
        assert c.c1 == pytest.approx(1.0, abs=1e-12)
        assert c.c2 == pytest.approx(1.0, abs=1e-12)
        assert c.c3 == pytest.approx(1.0, abs=1e-12)
        assert c.r0 == pytest.approx(1.0, abs=1e-10)
        assert c.R0 == pytest.approx(1.0, abs=1e-10)
        assert c.c6 == pytest.approx(1.0 / 3.0, abs=1e-10)

    def test_ellipsoidal_bounds(self):
        c = mk.EllipsoidalGauge(np.diag([4.0, 1.0])).constants(512)
        assert c.c1 == pytest.approx(1.0, abs=1e-10)
        assert c.c2 == pytest.approx(2.0, abs=1e-10)
        # principal curvature radii of the polar ellipse (axes 2, 1)
        assert c.r0 == pytest.approx(0.5, abs=1e-8)
        assert c.R0 == pytest.approx(4.0, abs=1e-8)

    @pytest.mark.parametrize("g", all_gauges())
    def test_sandwich_bounds(self, g):
        c = g.constants(512)
        rng = np.random.default_rng(9)
        xi = random_nonzero(rng, g.dim, 1000)
        vals = np.asarray(g.eval(xi))
        norms = np.linalg.norm(xi, axis=1)
        assert np.all(vals >= c.c1 * norms - 1e-9)
        assert np.all(vals <= c.c2 * norms + 1e-9)

    @pytest.mark.parametrize("g", all_gauges())
    def test_gamma_growth_inequalities(self, g):
        c = g.constants(512)
        rng = np.random.default_rng(10)
        for xi in random_nonzero(rng, g.dim, 1000):
            r = g.eval(xi)
            dgamma = r * g.grad(xi)
            n = np.linalg.norm(xi)
            assert np.linalg.norm(dgamma) <= c.c2 * c.c3 * n + 1e-9
            assert float(dgamma @ xi) >= c.c1**2 * n * n - 1e-9

    @pytest.mark.parametrize("g", all_gauges()[:4])
    def test_gamma_hess_ellipticity_sampled(self, g):
        # direct sampling oracle for the uniform ellipticity bound
        c = g.constants(512)
        rng = np.random.default_rng(11)
        worst = np.inf
        for _ in range(500):
            xi = rng.standard_normal(g.dim)
            if np.linalg.norm(xi) < 1e-3:
                continue
            w = rng.standard_normal(g.dim)
            w /= np.linalg.norm(w)
            worst = min(worst, float(w @ g.gamma_hess(xi) @ w))
        assert worst >= c.c6 - 1e-10

    def test_sample_count_validated(self):
        with pytest.raises(mk.DomainError):
            mk.EuclideanGauge(2).constants(32)


class TestGammaHess:
    def test_euclidean_identity(self):
        g = mk.EuclideanGauge(2)
        rng = np.random.default_rng(12)
        for _ in range(10):
            xi = rng.standard_normal(2) * 3.0
            np.testing.assert_allclose(g.gamma_hess(xi), np.eye(2), atol=1e-12)

    def test_ellipsoidal_constant_q(self):
        Q = np.array([[2.0, 0.5], [0.5, 1.0]])
        g = mk.EllipsoidalGauge(Q)
        rng = np.random.default_rng(13)
        for _ in range(10):
            xi = rng.standard_normal(2) * 2.0
            np.testing.assert_allclose(g.gamma_hess(xi), Q, atol=1e-12)


class TestAdmission:
    def test_not_c2plus_rejected(self):
        # a gauge bundle with vanishing tangential Hessian is rejected
        def ev(xi):
            return np.abs(np.asarray(xi, dtype=float)).sum(axis=-1)

        def gr(xi):
            return np.sign(np.asarray(xi, dtype=float))

        def he(xi):
            return np.zeros((2, 2))

        with pytest.raises(NotC2PlusError):
            mk.CustomGauge("l1", 2, ev, gr, he)

    def test_spd_validation(self):
        with pytest.raises(mk.DomainError):
            mk.EllipsoidalGauge(np.diag([1.0, -1.0]))
        with pytest.raises(mk.DomainError):
            mk.EllipsoidalGauge(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_offset_shift_validated(self):
        with pytest.raises(mk.DomainError):
            offset_ellipsoidal_gauge(np.eye(2), [1.5, 0.0])
