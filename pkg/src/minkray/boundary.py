"""Closed C2 planar boundary curves with analytic differential data.

Every family is parameterized counterclockwise by the native angle
theta in [0, 2pi); quadratures over the curve therefore carry the
Jacobian |Y'(theta)|.  The inward unit normal is the leftward rotation
of the unit tangent, and the signed Euclidean curvature

    kappa = (x' y'' - y' x'') / |Y'|^3

is positive for a counterclockwise circle.  Convexity of the enclosed
domain is never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError


@dataclass(frozen=True)
class BoundarySample:
    theta: float
    point: np.ndarray
    tangent: np.ndarray
    normal_in: np.ndarray
    kappa: float


class BoundaryCurve:
    """Base class; families provide point/dpoint/ddpoint and contains."""

    family: str

    def point(self, theta):
        """Y(theta); accepts scalars or arrays."""
        raise NotImplementedError

    def dpoint(self, theta):
        raise NotImplementedError

    def ddpoint(self, theta):
        raise NotImplementedError

    def contains(self, x):
        """True iff x lies in the open interior; accepts (..., 2) arrays."""
        raise NotImplementedError

    def sample(self, theta: float) -> BoundarySample:
        theta = float(np.mod(theta, 2.0 * np.pi))
        p = np.asarray(self.point(theta), dtype=float)
        d1 = np.asarray(self.dpoint(theta), dtype=float)
        d2 = np.asarray(self.ddpoint(theta), dtype=float)
        speed = float(np.linalg.norm(d1))
        tangent = d1 / speed
        normal_in = np.array([-tangent[1], tangent[0]])
        kappa = float(d1[0] * d2[1] - d1[1] * d2[0]) / speed**3
        return BoundarySample(theta=theta, point=p, tangent=tangent,
                              normal_in=normal_in, kappa=kappa)

    # -- cached geometry helpers -------------------------------------------

    def table(self, n: int):
        """(thetas, points) at n equispaced parameters, cached per n."""
        cache = self.__dict__.setdefault("_tables", {})
        if n not in cache:
            thetas = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
            cache[n] = (thetas, np.asarray(self.point(thetas), dtype=float))
        return cache[n]

    def bbox(self):
        """Tight axis-aligned bounding box (xmin, xmax, ymin, ymax)."""
        if "_bbox" not in self.__dict__:
            _, pts = self.table(2048)
            self.__dict__["_bbox"] = (float(pts[:, 0].min()), float(pts[:, 0].max()),
                                      float(pts[:, 1].min()), float(pts[:, 1].max()))
        return self.__dict__["_bbox"]

    def diameter(self):
        if "_diam" not in self.__dict__:
            _, pts = self.table(256)
            d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
            self.__dict__["_diam"] = float(np.sqrt(d2.max()))
        return self.__dict__["_diam"]

    def max_abs_kappa(self):
        if "_maxk" not in self.__dict__:
            thetas = np.linspace(0.0, 2.0 * np.pi, 1024, endpoint=False)
            self.__dict__["_maxk"] = max(abs(self.sample(t).kappa) for t in thetas)
        return self.__dict__["_maxk"]


class Circle(BoundaryCurve):
    family = "circle"

    def __init__(self, R: float):
        if R <= 0:
            raise DomainError("circle radius must be positive")
        self.R = float(R)

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([self.R * np.cos(theta), self.R * np.sin(theta)], axis=-1)

    def dpoint(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([-self.R * np.sin(theta), self.R * np.cos(theta)], axis=-1)

    def ddpoint(self, theta):
        return -self.point(theta)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1) < self.R * self.R

    def __repr__(self):
        return f"Circle(R={self.R})"


class Ellipse(BoundaryCurve):
    """Y(theta) = (a cos, b sin); curvature ab/(a^2 sin^2 + b^2 cos^2)^(3/2)."""

    family = "ellipse"

    def __init__(self, a: float, b: float):
        if a <= 0 or b <= 0:
            raise DomainError("ellipse semi-axes must be positive")
        self.a, self.b = float(a), float(b)

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([self.a * np.cos(theta), self.b * np.sin(theta)], axis=-1)

    def dpoint(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([-self.a * np.sin(theta), self.b * np.cos(theta)], axis=-1)

    def ddpoint(self, theta):
        return -self.point(theta)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x[..., 0] / self.a) ** 2 + (x[..., 1] / self.b) ** 2 < 1.0

    def __repr__(self):
        return f"Ellipse(a={self.a}, b={self.b})"


class _RadialCurve(BoundaryCurve):
    """Y(theta) = r(theta) (cos, sin) for an analytic positive radius."""

    def radius(self, theta):
        raise NotImplementedError

    def dradius(self, theta):
        raise NotImplementedError

    def ddradius(self, theta):
        raise NotImplementedError

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    def dpoint(self, theta):
        theta = np.asarray(theta, dtype=float)
        r, dr = self.radius(theta), self.dradius(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([dr * c - r * s, dr * s + r * c], axis=-1)

    def ddpoint(self, theta):
        theta = np.asarray(theta, dtype=float)
        r, dr, ddr = self.radius(theta), self.dradius(theta), self.ddradius(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([(ddr - r) * c - 2.0 * dr * s,
                         (ddr - r) * s + 2.0 * dr * c], axis=-1)

    def contains(self, x):
        # star-shaped about the origin by admission (r > 0), so the radial
        # test is exact and agrees with the winding number
        x = np.asarray(x, dtype=float)
        phi = np.arctan2(x[..., 1], x[..., 0])
        return np.sqrt(np.sum(x * x, axis=-1)) < self.radius(phi)


class Superellipse(_RadialCurve):
    """|x/a|^p + |y/b|^p = 1 with even p >= 2, in radial form."""

    family = "superellipse"

    def __init__(self, a: float, b: float, p: int):
        if a <= 0 or b <= 0:
            raise DomainError("superellipse semi-axes must be positive")
        if int(p) != p or p < 2 or p % 2 != 0:
            raise DomainError("superellipse exponent must be an even integer >= 2")
        self.a, self.b, self.p = float(a), float(b), int(p)

    def _g(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        p = self.p
        A, B = self.a ** -p, self.b ** -p
        g = A * c**p + B * s**p
        dg = -p * A * c ** (p - 1) * s + p * B * s ** (p - 1) * c
        ddg = (-p * A * (c**p - (p - 1) * c ** (p - 2) * s * s)
               + p * B * ((p - 1) * s ** (p - 2) * c * c - s**p))
        return g, dg, ddg

    def radius(self, theta):
        g, _, _ = self._g(np.asarray(theta, dtype=float))
        return g ** (-1.0 / self.p)

    def dradius(self, theta):
        g, dg, _ = self._g(np.asarray(theta, dtype=float))
        return -(1.0 / self.p) * g ** (-1.0 / self.p - 1.0) * dg

    def ddradius(self, theta):
        p = self.p
        g, dg, ddg = self._g(np.asarray(theta, dtype=float))
        return -(1.0 / p) * ((-1.0 / p - 1.0) * g ** (-1.0 / p - 2.0) * dg * dg
                             + g ** (-1.0 / p - 1.0) * ddg)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (np.abs(x[..., 0] / self.a) ** self.p
                + np.abs(x[..., 1] / self.b) ** self.p) < 1.0

    def __repr__(self):
        return f"Superellipse(a={self.a}, b={self.b}, p={self.p})"


class FourierCircle(_RadialCurve):
    """r(theta) = r0 + sum a_k cos(k theta) + sum b_k sin(k theta).

    Admission rejects curves with nonpositive sampled radius or with a
    self-intersecting 2048-gon; both violate the simple-C2 hypothesis.
    """

    family = "fourier"

    def __init__(self, r0: float, cos_coeffs=(), sin_coeffs=()):
        self.r0 = float(r0)
        self.cos_coeffs = np.asarray(cos_coeffs, dtype=float)
        self.sin_coeffs = np.asarray(sin_coeffs, dtype=float)
        thetas = np.linspace(0.0, 2.0 * np.pi, 2048, endpoint=False)
        r = self.radius(thetas)
        if np.min(r) <= 0.0:
            raise GeometryError(
                f"fourier curve rejected: min sampled radius {np.min(r):.3e} <= 0")
        pts = np.asarray(self.point(thetas), dtype=float)
        if _polyline_self_intersects(pts):
            raise GeometryError("fourier curve rejected: boundary self-intersects")

    def _harmonics(self, theta):
        theta = np.asarray(theta, dtype=float)
        out_c = [(k + 1, c) for k, c in enumerate(self.cos_coeffs) if c != 0.0]
        out_s = [(k + 1, s) for k, s in enumerate(self.sin_coeffs) if s != 0.0]
        return theta, out_c, out_s

    def radius(self, theta):
        theta, cs, ss = self._harmonics(theta)
        r = np.full_like(theta, self.r0, dtype=float)
        for k, c in cs:
            r = r + c * np.cos(k * theta)
        for k, s in ss:
            r = r + s * np.sin(k * theta)
        return r

    def dradius(self, theta):
        theta, cs, ss = self._harmonics(theta)
        r = np.zeros_like(theta, dtype=float)
        for k, c in cs:
            r = r - c * k * np.sin(k * theta)
        for k, s in ss:
            r = r + s * k * np.cos(k * theta)
        return r

    def ddradius(self, theta):
        theta, cs, ss = self._harmonics(theta)
        r = np.zeros_like(theta, dtype=float)
        for k, c in cs:
            r = r - c * k * k * np.cos(k * theta)
        for k, s in ss:
            r = r - s * k * k * np.sin(k * theta)
        return r

    def __repr__(self):
        return (f"FourierCircle(r0={self.r0}, cos={self.cos_coeffs.tolist()}, "
                f"sin={self.sin_coeffs.tolist()})")


def _polyline_self_intersects(pts, block=128):
    """Proper-intersection test over all nonadjacent closed-polyline segments."""
    n = len(pts)
    a = pts
    b = np.roll(pts, -1, axis=0)

    def cross(o, p, q):
        return ((p[..., 0] - o[..., 0]) * (q[..., 1] - o[..., 1])
                - (p[..., 1] - o[..., 1]) * (q[..., 0] - o[..., 0]))

    idx = np.arange(n)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        ai, bi = a[lo:hi, None, :], b[lo:hi, None, :]
        aj, bj = a[None, :, :], b[None, :, :]
        d1 = cross(ai, bi, aj)
        d2 = cross(ai, bi, bj)
        d3 = cross(aj, bj, ai)
        d4 = cross(aj, bj, bi)
        proper = (np.sign(d1) * np.sign(d2) < 0) & (np.sign(d3) * np.sign(d4) < 0)
        gap = np.abs((idx[lo:hi, None] - idx[None, :] + n) % n)
        adjacent = (gap <= 1) | (gap >= n - 1)
        if np.any(proper & ~adjacent):
            return True
    return False
