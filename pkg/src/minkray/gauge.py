"""Convex gauge functions, their polars and quantitative constants.

A gauge rho is the Minkowski functional of a convex body K containing the
origin: rho(xi) = inf{t >= 0 : xi in t*K}.  It is convex, positively
1-homogeneous and, for the bodies admitted here, C2 away from the origin
with a strictly positive tangential Hessian (C2+ regularity).  The polar
gauge rho0 is the gauge of the polar body K0 and coincides with the
support function of K; it is the "dual norm" in which boundary distances
are measured.

Identities relied on throughout the package (all checked in the tests):

    <Drho(xi), xi> = rho(xi)          (Euler relation)
    D2rho(xi) xi   = 0                (radial kernel direction)
    rho(t xi) = t rho(xi),  Drho(t xi) = Drho(xi),  D2rho(t xi) = D2rho(xi)/t

The squared gauge gamma = rho^2/2 has a 0-homogeneous Hessian

    D2gamma(xi) = rho(xi) D2rho(xi) + Drho(xi) x Drho(xi)

which is uniformly elliptic: <D2gamma(xi) w, w> >= c6 |w|^2 with

    c6 = min(r0*c1/2, (1 - 1/c) c1^2),   c = 1 + r0*c1 / (2 c3^2),

where c1 <= rho/|.| <= c2, c3 = max |Drho| on the sphere and r0 is the
smallest nonzero eigenvalue of D2rho on the sphere (the minimal principal
radius of curvature of the polar body's boundary).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize, minimize_scalar

from .errors import DomainError, NumericError

_ORIGIN_GUARD = 1e-13
_C2PLUS_MIN_EIG = 1e-8


@dataclass(frozen=True)
class GaugeConstants:
    """Quantitative constants of a gauge.

    c1, c2   sandwich bounds  c1|xi| <= rho(xi) <= c2|xi|
    c3       max |Drho| on the unit sphere
    c4       max spectral norm of D2rho on the unit sphere
    c5       max absolute entry of D2gamma on the unit sphere
    r0, R0   min/max nonzero eigenvalue of D2rho on the sphere
             (principal radii of curvature of the polar body boundary)
    c6       ellipticity constant of D2gamma
    """

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float
    r0: float
    R0: float
    c6: float

    def __post_init__(self):
        if not (0.0 < self.c1 <= self.c2):
            raise NumericError(f"invalid gauge bounds c1={self.c1}, c2={self.c2}")
        if not (0.0 < self.r0 <= self.R0):
            raise NumericError(f"invalid curvature radii r0={self.r0}, R0={self.R0}")

    def as_dict(self):
        return {
            "c1": self.c1, "c2": self.c2, "c3": self.c3, "c4": self.c4,
            "c5": self.c5, "r0": self.r0, "R0": self.R0, "c6": self.c6,
        }


def _check_nonzero(xi):
    if np.linalg.norm(xi) < _ORIGIN_GUARD:
        raise DomainError("gauge not differentiable at origin")


def _sphere_directions(dim, n):
    """n roughly equidistributed unit vectors (equispaced angles in 2D,
    Fibonacci lattice in 3D)."""
    if dim == 2:
        phi = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    if dim == 3:
        k = np.arange(n, dtype=float)
        golden = (1.0 + np.sqrt(5.0)) / 2.0
        z = 1.0 - (2.0 * k + 1.0) / n
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        phi = 2.0 * np.pi * k / golden
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    raise DomainError(f"unsupported dimension {dim}")


def _tangent_basis(nu):
    """Orthonormal basis of the hyperplane orthogonal to unit vector nu,
    as columns of a (dim, dim-1) matrix."""
    dim = len(nu)
    if dim == 2:
        return np.array([[-nu[1]], [nu[0]]])
    # dim == 3: Gram-Schmidt against the least-aligned coordinate axis
    a = np.zeros(3)
    a[np.argmin(np.abs(nu))] = 1.0
    t1 = a - np.dot(a, nu) * nu
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(nu, t1)
    return np.stack([t1, t2], axis=-1)


class Gauge:
    """Base class: concrete families implement eval/grad/hess.

    All values are immutable after construction; every operation is pure,
    so instances are safe to share across worker threads.
    """

    dim: int
    family: str

    # -- family interface -------------------------------------------------

    def eval(self, xi) -> float | np.ndarray:
        """rho(xi); accepts a single vector or an (..., dim) array."""
        raise NotImplementedError

    def grad(self, xi) -> np.ndarray:
        """Drho(xi); positively 0-homogeneous, undefined at the origin."""
        raise NotImplementedError

    def hess(self, xi) -> np.ndarray:
        """D2rho(xi) for a single nonzero vector; (-1)-homogeneous."""
        raise NotImplementedError

    def polar(self) -> "Gauge":
        raise NotImplementedError

    # -- derived operations ------------------------------------------------

    def gamma_hess(self, xi) -> np.ndarray:
        """Hessian of gamma = rho^2/2; 0-homogeneous."""
        xi = np.asarray(xi, dtype=float)
        _check_nonzero(xi)
        r = float(self.eval(xi))
        g = self.grad(xi)
        return r * self.hess(xi) + np.outer(g, g)

    def constants(self, sphere_samples: int = 512) -> GaugeConstants:
        """Extremize rho, |Drho|, D2rho over sampled sphere directions.

        In 2D the extrema entering the c6 formula (c1, c3, r0) are refined
        by bounded local optimization around the best sample.
        """
        if sphere_samples < 64:
            raise DomainError("sphere_samples must be >= 64")
        dirs = _sphere_directions(self.dim, sphere_samples)
        vals = np.asarray(self.eval(dirs), dtype=float)
        grads = np.stack([self.grad(u) for u in dirs])
        gnorms = np.linalg.norm(grads, axis=-1)

        hess_norms = np.empty(len(dirs))
        tan_eigs = np.empty((len(dirs), self.dim - 1))
        c5 = 0.0
        for i, u in enumerate(dirs):
            H = self.hess(u)
            hess_norms[i] = np.linalg.norm(H, 2)
            T = _tangent_basis(u)
            tan_eigs[i] = np.linalg.eigvalsh(T.T @ H @ T)
            c5 = max(c5, float(np.max(np.abs(self.gamma_hess(u)))))

        def rho_of(u):
            return float(self.eval(u))

        def gradnorm_of(u):
            return float(np.linalg.norm(self.grad(u)))

        def min_tan_eig(u):
            T = _tangent_basis(u)
            return float(np.linalg.eigvalsh(T.T @ self.hess(u) @ T)[0])

        def max_tan_eig(u):
            T = _tangent_basis(u)
            return float(np.linalg.eigvalsh(T.T @ self.hess(u) @ T)[-1])

        c1 = self._refine_on_sphere(dirs, vals, rho_of, "min")
        c2 = self._refine_on_sphere(dirs, vals, rho_of, "max")
        c3 = self._refine_on_sphere(dirs, gnorms, gradnorm_of, "max")
        r0 = self._refine_on_sphere(dirs, tan_eigs.min(axis=1), min_tan_eig, "min")
        R0 = self._refine_on_sphere(dirs, tan_eigs.max(axis=1), max_tan_eig, "max")
        c4 = float(hess_norms.max())

        if r0 <= _C2PLUS_MIN_EIG:
            raise NotC2PlusError(r0)
        c = 1.0 + r0 * c1 / (2.0 * c3 * c3)
        c6 = min(r0 * c1 / 2.0, (1.0 - 1.0 / c) * c1 * c1)
        return GaugeConstants(c1=c1, c2=c2, c3=c3, c4=c4, c5=c5, r0=r0, R0=R0, c6=c6)

    def _refine_on_sphere(self, dirs, sampled, fn_of_unit, kind):
        """Polish the sampled extremum of fn over the unit sphere by local
        optimization around the best sample direction."""
        idx = int(np.argmin(sampled) if kind == "min" else np.argmax(sampled))
        sign = 1.0 if kind == "min" else -1.0
        if self.dim == 2:
            phi0 = float(np.arctan2(dirs[idx, 1], dirs[idx, 0]))
            h = 2.0 * np.pi / len(dirs)

            def obj(phi):
                return sign * fn_of_unit(np.array([np.cos(phi), np.sin(phi)]))

            res = minimize_scalar(obj, bounds=(phi0 - h, phi0 + h),
                                  method="bounded", options={"xatol": 1e-12})
            best = res.fun
        else:
            R = _rotation_to(np.array([0.0, 0.0, 1.0]), dirs[idx])

            def obj(ang):
                th, ph = ang
                w = R @ np.array([np.sin(th) * np.cos(ph),
                                  np.sin(th) * np.sin(ph), np.cos(th)])
                return sign * fn_of_unit(w)

            res = minimize(obj, x0=np.array([0.0, 0.0]), method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-13,
                                    "maxiter": 400})
            best = res.fun
        return float(sign * min(best, sign * sampled[idx]))

    def _c2plus_admission(self, n_dirs=512):
        dirs = _sphere_directions(self.dim, n_dirs)
        worst = np.inf
        for u in dirs:
            T = _tangent_basis(u)
            worst = min(worst, float(np.linalg.eigvalsh(T.T @ self.hess(u) @ T)[0]))
        if worst < _C2PLUS_MIN_EIG:
            raise NotC2PlusError(worst)


class NotC2PlusError(NumericError):
    def __init__(self, worst_eig):
        super().__init__(
            f"gauge rejected: not C2+ (min tangential D2rho eigenvalue {worst_eig:.3e})")
        self.worst_eig = worst_eig


class EuclideanGauge(Gauge):
    """rho(xi) = |xi|; the self-polar round gauge."""

    family = "euclidean"

    def __init__(self, dim: int = 2):
        if dim not in (2, 3):
            raise DomainError("dimension must be 2 or 3")
        self.dim = dim

    def eval(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.linalg.norm(xi, axis=-1) if xi.ndim > 1 else float(np.linalg.norm(xi))

    def grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim > 1:
            n = np.linalg.norm(xi, axis=-1, keepdims=True)
            if np.any(n < _ORIGIN_GUARD):
                raise DomainError("gauge not differentiable at origin")
            return xi / n
        _check_nonzero(xi)
        return xi / np.linalg.norm(xi)

    def hess(self, xi):
        xi = np.asarray(xi, dtype=float)
        _check_nonzero(xi)
        n = np.linalg.norm(xi)
        u = xi / n
        return (np.eye(self.dim) - np.outer(u, u)) / n

    def polar(self):
        return self

    def __repr__(self):
        return f"EuclideanGauge(dim={self.dim})"


class EllipsoidalGauge(Gauge):
    """rho(xi) = sqrt(xi^T Q xi) for symmetric positive-definite Q.

    The unit body is the ellipsoid {xi^T Q xi <= 1}; the polar gauge is the
    ellipsoidal gauge of Q^{-1}.  gamma = xi^T Q xi / 2 exactly, so
    D2gamma = Q everywhere.
    """

    family = "ellipsoidal"

    def __init__(self, Q):
        Q = np.asarray(Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] not in (2, 3):
            raise DomainError("Q must be a 2x2 or 3x3 matrix")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise DomainError("Q must be symmetric")
        if np.linalg.eigvalsh(Q)[0] <= 0:
            raise DomainError("Q must be positive definite")
        self.Q = 0.5 * (Q + Q.T)
        self.dim = Q.shape[0]

    def eval(self, xi):
        xi = np.asarray(xi, dtype=float)
        q = np.einsum("...i,ij,...j->...", xi, self.Q, xi)
        r = np.sqrt(np.maximum(q, 0.0))
        return r if xi.ndim > 1 else float(r)

    def grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim > 1:
            r = self.eval(xi)
            if np.any(r < _ORIGIN_GUARD):
                raise DomainError("gauge not differentiable at origin")
            return (xi @ self.Q) / r[..., None]
        _check_nonzero(xi)
        return (self.Q @ xi) / self.eval(xi)

    def hess(self, xi):
        xi = np.asarray(xi, dtype=float)
        _check_nonzero(xi)
        r = self.eval(xi)
        q = self.Q @ xi
        return (self.Q - np.outer(q, q) / (r * r)) / r

    def gamma_hess(self, xi):
        _check_nonzero(np.asarray(xi, dtype=float))
        return self.Q.copy()

    def polar(self):
        return EllipsoidalGauge(np.linalg.inv(self.Q))

    def __repr__(self):
        return f"EllipsoidalGauge(Q={self.Q.tolist()})"


class CustomGauge(Gauge):
    """Gauge given by an analytic evaluator bundle (rho, Drho, D2rho).

    The eval and grad callables must accept (..., dim) arrays; hess is
    called one vector at a time.  Admission rejects bundles that are not
    C2+ on a 512-direction sphere sample.
    """

    family = "custom"

    def __init__(self, name, dim, eval_fn, grad_fn, hess_fn):
        if dim not in (2, 3):
            raise DomainError("dimension must be 2 or 3")
        self.name = name
        self.dim = dim
        self._eval = eval_fn
        self._grad = grad_fn
        self._hess = hess_fn
        self._c2plus_admission()

    def eval(self, xi):
        xi = np.asarray(xi, dtype=float)
        v = self._eval(xi)
        return np.asarray(v, dtype=float) if xi.ndim > 1 else float(v)

    def grad(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 1:
            _check_nonzero(xi)
        return np.asarray(self._grad(xi), dtype=float)

    def hess(self, xi):
        xi = np.asarray(xi, dtype=float)
        _check_nonzero(xi)
        return np.asarray(self._hess(xi), dtype=float)

    def polar(self):
        return PolarGauge(self)

    def __repr__(self):
        return f"CustomGauge(name={self.name!r}, dim={self.dim})"


class PolarGauge(Gauge):
    """Numerically evaluated polar of a gauge without a closed-form dual.

    rho0(eta) = max{ <eta, p> : rho(p) <= 1 }, computed by multi-start
    local ascent over the unit rho-sphere to value tolerance 1e-10.  The
    gradient is the (unique, by C2+) maximizer.  Direction->maximizer
    pairs are memoized on directions quantized at 1e-6 angular resolution;
    in 2D a periodic spline table over 4096 exact nodes serves batched
    evaluation once built (validated against exact maximization at random
    probes to 1e-9).
    """

    family = "polar"
    _N_TABLE = 4096
    _QUANT = 1e-6

    def __init__(self, base: Gauge):
        self.base = base
        self.dim = base.dim
        self._cache = {}
        self._lock = threading.Lock()
        self._table = None
        self._table_ok = None

    # -- exact support maximization ---------------------------------------

    def _support_2d(self, u):
        """Support value and maximizer of K = {rho <= 1} in unit direction u."""
        base = self.base

        def m_of(psi):
            w = np.array([np.cos(psi), np.sin(psi)])
            return float(u @ w) / float(base.eval(w))

        def dm(psi):
            w = np.array([np.cos(psi), np.sin(psi)])
            wp = np.array([-w[1], w[0]])
            r = float(base.eval(w))
            return (float(u @ wp) * r - float(u @ w) * float(base.grad(w) @ wp)) / (r * r)

        psis = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
        W = np.stack([np.cos(psis), np.sin(psis)], axis=-1)
        vals = (W @ u) / np.asarray(base.eval(W), dtype=float)
        i = int(np.argmax(vals))
        h = 2.0 * np.pi / len(psis)
        lo, hi = psis[i] - h, psis[i] + h
        try:
            dlo, dhi = dm(lo), dm(hi)
            if dlo > 0.0 > dhi:
                psi = brentq(dm, lo, hi, xtol=1e-13, rtol=8.9e-16)
            else:
                res = minimize_scalar(lambda s: -m_of(s), bounds=(lo, hi),
                                      method="bounded", options={"xatol": 1e-12})
                psi = float(res.x)
        except (ValueError, RuntimeError) as exc:
            raise NumericError(
                f"polar maximization failed for direction {u}: {exc}") from exc
        w = np.array([np.cos(psi), np.sin(psi)])
        p = w / float(base.eval(w))
        val = float(u @ p)
        if val <= 0.0 or not np.isfinite(val):
            raise NumericError(f"polar maximization returned invalid value {val}")
        return val, p

    def _support_3d(self, u):
        base = self.base
        scan = _sphere_directions(3, 512)
        vals = (scan @ u) / np.asarray(base.eval(scan), dtype=float)
        w0 = scan[int(np.argmax(vals))]
        # rotate so the start sits on the equator of the local chart
        R = _rotation_to(np.array([0.0, 0.0, 1.0]), w0)

        def obj(ang):
            th, ph = ang
            w_loc = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph),
                              np.cos(th)])
            w = R @ w_loc
            return -float(u @ w) / float(base.eval(w))

        res = minimize(obj, x0=np.array([0.0, 0.0]), method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 400})
        if not np.isfinite(res.fun):
            raise NumericError(f"polar maximization failed for direction {u}")
        th, ph = res.x
        w = R @ np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
        p = w / float(base.eval(w))
        return float(u @ p), p

    def _support(self, u):
        key = tuple(np.round(np.arctan2(u[1:], u[0]) / self._QUANT).astype(np.int64)) \
            if self.dim == 2 else tuple(np.round(u / self._QUANT).astype(np.int64))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        out = self._support_2d(u) if self.dim == 2 else self._support_3d(u)
        with self._lock:
            self._cache[key] = out
        return out

    # -- spline fast path (2D) ---------------------------------------------

    def _ensure_table(self):
        if self._table_ok is not None:
            return self._table_ok
        with self._lock:
            if self._table_ok is not None:
                return self._table_ok
        phis = np.linspace(0.0, 2.0 * np.pi, self._N_TABLE, endpoint=False)
        vals = np.empty(self._N_TABLE)
        pxs = np.empty(self._N_TABLE)
        pys = np.empty(self._N_TABLE)
        for i, phi in enumerate(phis):
            u = np.array([np.cos(phi), np.sin(phi)])
            vals[i], p = self._support_2d(u)
            pxs[i], pys[i] = p
        xs = np.append(phis, 2.0 * np.pi)
        table = {
            "h": CubicSpline(xs, np.append(vals, vals[0]), bc_type="periodic"),
            "px": CubicSpline(xs, np.append(pxs, pxs[0]), bc_type="periodic"),
            "py": CubicSpline(xs, np.append(pys, pys[0]), bc_type="periodic"),
        }
        rng = np.random.default_rng(20260809)
        ok = True
        for phi in rng.uniform(0.0, 2.0 * np.pi, 16):
            u = np.array([np.cos(phi), np.sin(phi)])
            exact, _ = self._support_2d(u)
            if abs(float(table["h"](phi)) - exact) > 1e-9:
                ok = False
                break
        with self._lock:
            self._table = table if ok else None
            self._table_ok = ok
        return ok

    # -- gauge interface ----------------------------------------------------

    def eval(self, eta):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim > 1:
            if self.dim == 2 and self._ensure_table():
                n = np.linalg.norm(eta, axis=-1)
                phi = np.mod(np.arctan2(eta[..., 1], eta[..., 0]), 2.0 * np.pi)
                out = n * self._table["h"](phi)
                return np.where(n < _ORIGIN_GUARD, 0.0, out)
            return np.array([self.eval(e) for e in eta.reshape(-1, self.dim)]
                            ).reshape(eta.shape[:-1])
        n = float(np.linalg.norm(eta))
        if n < _ORIGIN_GUARD:
            return 0.0
        val, _ = self._support(eta / n)
        return n * val

    def grad(self, eta):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim > 1:
            if self.dim == 2 and self._ensure_table():
                n = np.linalg.norm(eta, axis=-1)
                if np.any(n < _ORIGIN_GUARD):
                    raise DomainError("gauge not differentiable at origin")
                phi = np.mod(np.arctan2(eta[..., 1], eta[..., 0]), 2.0 * np.pi)
                return np.stack([self._table["px"](phi), self._table["py"](phi)],
                                axis=-1)
            return np.stack([self.grad(e) for e in eta.reshape(-1, self.dim)]
                            ).reshape(eta.shape)
        _check_nonzero(eta)
        _, p = self._support(eta / np.linalg.norm(eta))
        return p

    def hess(self, eta):
        """Central finite differences of the maximizer map (support gradient)."""
        eta = np.asarray(eta, dtype=float)
        _check_nonzero(eta)
        h = 1e-6 * max(np.linalg.norm(eta), 1.0)
        H = np.empty((self.dim, self.dim))
        for j in range(self.dim):
            e = np.zeros(self.dim)
            e[j] = h
            H[:, j] = (self.grad(eta + e) - self.grad(eta - e)) / (2.0 * h)
        return 0.5 * (H + H.T)

    def polar(self):
        return PolarGauge(self)

    def __repr__(self):
        return f"PolarGauge(base={self.base!r})"


def _rotation_to(src, dst):
    """Rotation matrix sending unit vector src to unit vector dst."""
    v = np.cross(src, dst)
    c = float(np.dot(src, dst))
    if c < -1.0 + 1e-12:
        # antipodal: rotate pi about any orthogonal axis
        axis = _tangent_basis(src)[:, 0]
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def offset_ellipsoidal_gauge(Q, shift, name="offset_ellipsoidal"):
    """Asymmetric custom gauge rho(xi) = sqrt(xi^T Q xi) + <shift, xi>.

    Positivity away from the origin requires shift^T Q^{-1} shift < 1; the
    Hessian equals the ellipsoidal part's, so C2+ holds.  Its polar has no
    closed form, which exercises the numeric support-maximization path.
    """
    Q = np.asarray(Q, dtype=float)
    shift = np.asarray(shift, dtype=float)
    base = EllipsoidalGauge(Q)
    if shift.shape != (base.dim,):
        raise DomainError("shift dimension mismatch")
    if float(shift @ np.linalg.inv(Q) @ shift) >= 1.0:
        raise DomainError("shift too large: gauge would vanish off the origin")

    def ev(xi):
        return base.eval(xi) + xi @ shift

    def gr(xi):
        return base.grad(xi) + shift

    def he(xi):
        return base.hess(xi)

    return CustomGauge(name, base.dim, ev, gr, he)


_CUSTOM_FAMILIES = {}


def register_custom_family(name, factory):
    """Register a named custom-gauge factory for scene configs."""
    _CUSTOM_FAMILIES[name] = factory


def custom_family(name):
    try:
        return _CUSTOM_FAMILIES[name]
    except KeyError:
        raise DomainError(f"unknown custom gauge family {name!r}") from None


register_custom_family(
    "offset_ellipsoidal",
    lambda params: offset_ellipsoidal_gauge(
        np.asarray(params["Q"], dtype=float),
        np.asarray(params["shift"], dtype=float)))
