"""Minkowski distance functions, cut loci and transport densities in the plane."""

from .boundary import BoundaryCurve, BoundarySample, Circle, Ellipse, FourierCircle, Superellipse
from .distance import Projection, Projector, brute_distance, grad_distance, project, projector_for
from .errors import (ConfigError, DomainError, GeometryError, MinkrayError,
                     NumericError, SingularPointError)
from .gauge import (CustomGauge, EllipsoidalGauge, EuclideanGauge, Gauge,
                    GaugeConstants, PolarGauge, offset_ellipsoidal_gauge)
from .solver import (ConstantSource, CustomSource, FieldGrid, GaussianSource,
                     PolynomialSource, SourceTerm, TransportSolver, solve_grid,
                     support_set, v_f_at)
from .transport import (RayFrame, RayGeometry, TauTable, WeingartenData,
                        boundary_weingarten, cut_locus, cut_time, m_factor,
                        ray_point, weingarten_along_ray)

__version__ = "0.1.0"
