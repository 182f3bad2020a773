"""Shared scene fixtures.

Scene solvers are session-scoped because their cut-time tables are the
dominant cost; module tests use 1024-node tables, while the timed
acceptance criteria build their own solvers at production defaults.
"""

import numpy as np
import pytest

import minkray as mk


def make_solver(gauge, curve, source=None, tau_nodes=1024):
    source = source or mk.ConstantSource(1.0)
    return mk.TransportSolver(gauge, curve, source, tau_nodes=tau_nodes)


@pytest.fixture(scope="session")
def euclid():
    return mk.EuclideanGauge(2)


@pytest.fixture(scope="session")
def gauge_q41():
    return mk.EllipsoidalGauge(np.diag([4.0, 1.0]))


@pytest.fixture(scope="session")
def circle():
    return mk.Circle(1.0)


@pytest.fixture(scope="session")
def ellipse():
    return mk.Ellipse(2.0, 1.0)


@pytest.fixture(scope="session")
def superellipse():
    return mk.Superellipse(1.0, 1.0, 4)


@pytest.fixture(scope="session")
def fourier():
    # one concavity: curvature is negative around theta = pi/3 + 2k pi/3
    return mk.FourierCircle(1.0, cos_coeffs=[0.0, 0.0, 0.18])


@pytest.fixture(scope="session")
def circle_solver(euclid, circle):
    return make_solver(euclid, circle)


@pytest.fixture(scope="session")
def ellipse_solver(euclid, ellipse):
    return make_solver(euclid, ellipse)


@pytest.fixture(scope="session")
def aniso_solver(gauge_q41, ellipse):
    # the unit ball of the polar gauge is exactly Ellipse(2, 1)
    return make_solver(gauge_q41, ellipse)


@pytest.fixture(scope="session")
def superellipse_solver(euclid, superellipse):
    return make_solver(euclid, superellipse,
                       mk.GaussianSource([0.0, 0.0], 0.5, 1.0))


@pytest.fixture(scope="session")
def fourier_solver(euclid, fourier):
    return make_solver(euclid, fourier)
