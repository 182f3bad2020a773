"""Independent verification battery for the solution pair (d, v_f).

Every checkable identity gets its own report entry:

  weak_form       |int v <Drho(Du), Dphi> - int f phi| over a battery of
                  compactly supported polynomial bumps, relative to int f phi
  eikonal         rho(finite-difference Dd) = 1 at random regular points
  representation  v(z0) - v(z0 + th p) M_{z0}(th) = int_0^th f M_{z0}(t) dt
  ode             d/dt of v along rays equals trace(Wbar) v - f
  uniqueness      v rebuilt by integrating the ray ODE backward from zero
                  at the cut point agrees with the quadrature construction
  saddle          Phi(u, z) <= Phi(u, v) <= Phi(w, v) for random admissible
                  perturbations, with Phi(w, z) = -int f w + int z (rho(Dw)-1)
  lip1            w(x) - w(y) <= rho0(x - y) on random segments and w = 0
                  on boundary samples
  m_bound         0 <= M(s, t) <= 1 + T * Kminus over random ray intervals

Quadrature over the domain uses the star chart x = s Y(theta) (all curve
families here are star-shaped about the origin), Gauss-Legendre radially
and the trapezoid rule in the angle; both sides of each saddle inequality
share one fixed node set so systematic quadrature bias cancels.  Nodes
whose projection is singular are excluded and their measure reported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .distance import Projector
from .errors import DomainError, SingularPointError
from .solver import TransportSolver
from .transport import m_factor


# -- test functions -------------------------------------------------------------


class BumpFunction:
    """phi(x) = ((1 - |x-c|^2/r^2)_+)^k with k >= 3; support is the closed
    ball B_r(c) and the gradient is continuous."""

    def __init__(self, center, radius: float, degree: int = 4):
        if degree < 3:
            raise DomainError("bump degree must be >= 3 for C2 regularity")
        if radius <= 0:
            raise DomainError("bump radius must be positive")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.degree = int(degree)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sum((x - self.center) ** 2, axis=-1) / self.radius**2
        out = np.maximum(1.0 - s, 0.0) ** self.degree
        return float(out) if x.ndim == 1 else out

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        dx = x - self.center
        s = np.sum(dx * dx, axis=-1) / self.radius**2
        base = np.maximum(1.0 - s, 0.0) ** (self.degree - 1)
        coef = -2.0 * self.degree / self.radius**2 * base
        return coef[..., None] * dx if x.ndim > 1 else coef * dx

    def supported_inside(self, curve, n_ring=64):
        if not bool(curve.contains(self.center)):
            return False
        ang = np.linspace(0.0, 2.0 * np.pi, n_ring, endpoint=False)
        for frac in (1.0, 0.5):
            ring = self.center + frac * self.radius * np.stack(
                [np.cos(ang), np.sin(ang)], axis=-1)
            if not np.all(np.asarray(curve.contains(ring))):
                return False
        return True


def bump_battery(curve, projector: Projector, n=12, degree=4,
                 radius_fracs=(0.4, 0.3, 0.2, 0.1)):
    """Deterministic battery: centers on a coarse interior lattice, radii
    cycling through fractions of the inradius."""
    xmin, xmax, ymin, ymax = curve.bbox()
    gx = np.linspace(xmin, xmax, 9)[1:-1]
    gy = np.linspace(ymin, ymax, 9)[1:-1]
    candidates = []
    for y in gy:
        for x in gx:
            c = np.array([x, y])
            if bool(curve.contains(c)):
                candidates.append((projector.project(c).distance, c))
    if not candidates:
        raise DomainError("no interior lattice points found for the bump battery")
    inradius = max(d for d, _ in candidates)
    candidates.sort(key=lambda dc: -dc[0])
    bumps = []
    k = 0
    for d, c in candidates:
        r = radius_fracs[k % len(radius_fracs)] * inradius
        if r < 0.9 * d:
            bump = BumpFunction(c, r, degree)
            if bump.supported_inside(curve):
                bumps.append(bump)
                k += 1
        if len(bumps) == n:
            break
    if len(bumps) < n:
        raise DomainError(f"could only place {len(bumps)} of {n} bumps inside")
    return bumps


# -- field evaluators -------------------------------------------------------------


class DistanceField:
    """d as a field evaluator with the analytic gradient at regular points."""

    def __init__(self, solver: TransportSolver):
        self.solver = solver

    def __call__(self, x):
        return self.solver.projection(x).distance

    def grad(self, x):
        proj = self.solver.projection(x)
        if proj.singular:
            raise SingularPointError("distance gradient at singular point",
                                     projection=proj)
        s = self.solver.curve.sample(proj.foot.theta)
        return s.normal_in / float(self.solver.gauge.eval(s.normal_in))


class DensityField:
    """v_f as a field evaluator (0 at singular points)."""

    def __init__(self, solver: TransportSolver, scale: float = 1.0):
        self.solver = solver
        self.scale = float(scale)

    def __call__(self, x):
        proj = self.solver.projection(x)
        if proj.singular:
            return 0.0
        return self.scale * self.solver.v_from_projection(np.asarray(x, float), proj)


# -- report -------------------------------------------------------------------------


@dataclass
class ReportEntry:
    name: str
    max_error: float
    tolerance: float
    samples: int
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"name": self.name, "max_error": self.max_error,
                "tolerance": self.tolerance, "samples": self.samples,
                "passed": bool(self.passed), "details": self.details}


@dataclass
class VerificationReport:
    entries: list

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def entry(self, name) -> ReportEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def as_dict(self):
        return {"passed": bool(self.passed),
                "entries": [e.as_dict() for e in self.entries]}

    def to_json(self, **kwargs):
        kwargs.setdefault("indent", 2)
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.as_dict(), **kwargs)


def _entry(name, max_error, tolerance, samples, **details):
    return ReportEntry(name=name, max_error=float(max_error),
                       tolerance=float(tolerance), samples=int(samples),
                       passed=bool(max_error <= tolerance), details=details)


# -- weak form -----------------------------------------------------------------------


def _gauss_cells(lo, hi, n_cells, order):
    gn, gw = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_cells + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    nodes = (mid[:, None] + half * gn[None, :]).ravel()
    weights = np.tile(half * gw, n_cells)
    return nodes, weights


def weak_residual(gauge, curve, f, v_field, u_field, bumps, quad_cells=8,
                  gauss_order=3, tolerance=1e-3):
    """Relative residual of int v <Drho(Du), Dphi> = int f phi per bump."""
    worst = 0.0
    excluded_measure = 0.0
    total = 0
    per_bump = []
    for bump in bumps:
        if not bump.supported_inside(curve):
            raise DomainError(
                f"bump at {bump.center.tolist()} r={bump.radius} is not "
                "supported strictly inside the domain")
        c, r = bump.center, bump.radius
        xs, wx = _gauss_cells(c[0] - r, c[0] + r, quad_cells, gauss_order)
        ys, wy = _gauss_cells(c[1] - r, c[1] + r, quad_cells, gauss_order)
        lhs = rhs = 0.0
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                node = np.array([x, y])
                if np.sum((node - c) ** 2) >= r * r:
                    continue
                w = wx[ix] * wy[iy]
                total += 1
                try:
                    du = u_field.grad(node)
                except SingularPointError:
                    excluded_measure += w
                    continue
                a = gauge.grad(du)
                lhs += w * v_field(node) * float(a @ bump.grad(node))
                rhs += w * float(f(node)) * float(bump(node))
        denom = abs(rhs) if abs(rhs) > 1e-14 else 1.0
        rel = abs(lhs - rhs) / denom
        per_bump.append(rel)
        worst = max(worst, rel)
    return _entry("weak_form", worst, tolerance, total,
                  excluded_measure=excluded_measure, per_bump=per_bump,
                  quad_cells=quad_cells, gauss_order=gauss_order)


# -- domain quadrature and the saddle functional ---------------------------------------


class DomainQuadrature:
    """Star-chart quadrature x = s Y(theta): Gauss-Legendre in s,
    trapezoid in theta, with Jacobian s * (Y x Y')."""

    def __init__(self, curve, n_radial=48, n_angular=256):
        gn, gw = np.polynomial.legendre.leggauss(n_radial)
        s = 0.5 * (gn + 1.0)
        ws = 0.5 * gw
        thetas = np.linspace(0.0, 2.0 * np.pi, n_angular, endpoint=False)
        Y = np.asarray(curve.point(thetas), dtype=float)
        dY = np.asarray(curve.dpoint(thetas), dtype=float)
        jac = Y[:, 0] * dY[:, 1] - Y[:, 1] * dY[:, 0]
        S, TH = np.meshgrid(s, thetas, indexing="ij")
        nodes = S[..., None] * Y[None, :, :]
        weights = (ws[:, None] * (2.0 * np.pi / n_angular)
                   * S * jac[None, :])
        self.curve = curve
        self.nodes = nodes.reshape(-1, 2)
        self.weights = weights.ravel()
        self.n_radial = n_radial
        self.n_angular = n_angular


class SceneTable:
    """The solution pair precomputed on one quadrature node set; saddle
    inequalities and functional values reuse these arrays so that both
    sides of every comparison share identical quadrature bias."""

    def __init__(self, solver: TransportSolver, quadrature: DomainQuadrature):
        self.solver = solver
        self.quad = quadrature
        n = len(quadrature.nodes)
        self.f_vals = np.asarray(solver.source(quadrature.nodes), dtype=float)
        self.d_vals = np.empty(n)
        self.v_vals = np.empty(n)
        self.d_grads = np.empty((n, 2))
        self.regular = np.ones(n, dtype=bool)
        for i, node in enumerate(quadrature.nodes):
            proj = solver.projection(node)
            self.d_vals[i] = proj.distance
            if proj.singular:
                self.regular[i] = False
                self.v_vals[i] = 0.0
                self.d_grads[i] = np.nan
            else:
                s = solver.curve.sample(proj.foot.theta)
                self.d_grads[i] = s.normal_in / float(solver.gauge.eval(s.normal_in))
                self.v_vals[i] = solver.v_from_projection(node, proj)
        self.excluded_measure = float(np.sum(quadrature.weights[~self.regular]))

    def phi(self, w_vals, w_grads, z_vals):
        """Phi(w, z) = -int f w + int z (rho(Dw) - 1) over the regular nodes."""
        m = self.regular
        wgt = self.quad.weights[m]
        rho_dw = np.asarray(self.solver.gauge.eval(w_grads[m]))
        return float(np.sum(wgt * (-self.f_vals[m] * w_vals[m]
                                   + z_vals[m] * (rho_dw - 1.0))))

    def phi_exact_pair(self):
        return self.phi(self.d_vals, self.d_grads, self.v_vals)


def phi_value(gauge, f, w_field, z_field, quadrature: DomainQuadrature):
    """Phi(w, z) for generic field evaluators; z must be nonnegative."""
    total = 0.0
    excluded = 0.0
    for node, wgt in zip(quadrature.nodes, quadrature.weights):
        z = float(z_field(node))
        if z < -1e-12:
            raise DomainError(f"multiplier z is negative ({z:.3e}) at "
                              f"{node.tolist()}")
        try:
            dw = w_field.grad(node)
        except SingularPointError:
            if abs(z) < 1e-14:
                total += wgt * (-float(f(node)) * float(w_field(node)))
                continue
            excluded += wgt
            continue
        total += wgt * (-float(f(node)) * float(w_field(node))
                        + z * (float(gauge.eval(dw)) - 1.0))
    return total


def _interior_samples(curve, rng, n, margin_frac=0.0):
    xmin, xmax, ymin, ymax = curve.bbox()
    out = []
    while len(out) < n:
        pts = rng.uniform((xmin, ymin), (xmax, ymax), size=(4 * n, 2))
        mask = np.asarray(curve.contains(pts))
        for p in pts[mask]:
            out.append(p)
            if len(out) == n:
                break
    return np.array(out)


def saddle_check(solver: TransportSolver, table: SceneTable, bumps,
                 n_perturbations=50, seed=20260809, tolerance=1e-6):
    """Phi(u, z) <= Phi(u, v) <= Phi(w, v) for random z in L2+ and w in H1_0.

    z-side perturbations are nonnegative bump combinations added to v (and
    pure combinations); w-side perturbations add signed scaled bumps to d.
    Perturbation bumps are re-raised to degree 6 so the support-edge
    regularity does not dominate the shared quadrature error.  Reported
    error is the worst inequality violation.
    """
    rng = np.random.default_rng(seed)
    base = table.phi_exact_pair()
    nodes = table.quad.nodes
    bumps = [BumpFunction(b.center, b.radius, degree=max(b.degree, 6))
             for b in bumps]
    bump_vals = np.stack([b(nodes) for b in bumps])
    bump_grads = np.stack([b.grad(nodes) for b in bumps])
    v_scale = max(float(np.max(table.v_vals)), 1e-6)

    worst = 0.0
    for _ in range(n_perturbations):
        alphas = rng.uniform(0.0, v_scale, size=len(bumps)) \
            * (rng.random(len(bumps)) < 0.4)
        z_vals = alphas @ bump_vals
        if rng.random() < 0.5:
            z_vals = table.v_vals + z_vals
        phi_z = table.phi(table.d_vals, table.d_grads, z_vals)
        worst = max(worst, phi_z - base)

    for _ in range(n_perturbations):
        lam = rng.uniform(-0.3, 0.3) * v_scale
        j = rng.integers(len(bumps))
        w_vals = table.d_vals + lam * bump_vals[j]
        w_grads = table.d_grads + lam * bump_grads[j]
        phi_w = table.phi(w_vals, w_grads, table.v_vals)
        worst = max(worst, base - phi_w)

    return _entry("saddle", worst, tolerance, 2 * n_perturbations,
                  phi_base=base, excluded_measure=table.excluded_measure)


# -- pointwise residual checks -------------------------------------------------------


def eikonal_check(solver: TransportSolver, n_points=500, h=1e-5,
                  seed=20260809, tolerance=1e-3):
    """rho of the central finite-difference gradient of d at random
    regular points, away from the boundary and the cut locus."""
    rng = np.random.default_rng(seed)
    gauge, curve = solver.gauge, solver.curve
    worst = 0.0
    accepted = 0
    attempts = 0
    while accepted < n_points and attempts < 200 * n_points:
        attempts += 1
        x = _interior_samples(curve, rng, 1)[0]
        proj = solver.projector.project(x)
        if proj.singular or proj.distance < 10 * h:
            continue
        stencil = [x + np.array([h, 0.0]), x - np.array([h, 0.0]),
                   x + np.array([0.0, h]), x - np.array([0.0, h])]
        vals = []
        ok = True
        for p in stencil:
            sp = solver.projector.project(p)
            if sp.singular or abs((sp.foot.theta - proj.foot.theta + np.pi)
                                  % (2 * np.pi) - np.pi) > 0.05:
                ok = False
                break
            vals.append(sp.distance)
        if not ok:
            continue
        du = np.array([(vals[0] - vals[1]) / (2 * h), (vals[2] - vals[3]) / (2 * h)])
        worst = max(worst, abs(float(gauge.eval(du)) - 1.0))
        accepted += 1
    return _entry("eikonal", worst, tolerance, accepted, fd_step=h)


def _ray_data(solver: TransportSolver, x):
    proj = solver.projection(x)
    if proj.singular:
        return None
    theta0 = proj.foot.theta
    d = proj.distance
    kt = solver.geometry.boundary_weingarten(theta0).kappa_tilde
    tau0 = solver.tau_table.tau(theta0)
    p = solver.geometry.direction(theta0)
    return theta0, d, kt, tau0, p


def representation_check(solver: TransportSolver, n_samples=100,
                         seed=20260809, tolerance=1e-7):
    """v(z0) - v(z1) M_{z0}(th) = int_0^th f M_{z0}(t) dt along rays."""
    rng = np.random.default_rng(seed)
    curve = solver.curve
    worst = 0.0
    accepted = 0
    while accepted < n_samples:
        z0 = _interior_samples(curve, rng, 1)[0]
        data = _ray_data(solver, z0)
        if data is None:
            continue
        _, d, kt, tau0, p = data
        tau_x = tau0 - d
        if tau_x <= 1e-6:
            continue
        th = rng.uniform(0.05, 0.95) * tau_x
        z1 = z0 + th * p
        den = 1.0 - d * kt

        def m_z0(t):
            return (1.0 - (d + t) * kt) / den

        v0 = solver.v_at(z0)
        v1 = solver.v_at(z1)
        lhs = v0 - v1 * m_z0(th)
        rhs, _ = quad(lambda t: float(solver.source(z0 + t * p)) * m_z0(t),
                      0.0, th, epsabs=1e-11, epsrel=1e-12, limit=200)
        worst = max(worst, abs(lhs - rhs))
        accepted += 1
    return _entry("representation", worst, tolerance, accepted)


def ode_residual_check(solver: TransportSolver, n_rays=20, seed=20260809,
                       tolerance=1e-3):
    """Finite-difference d/dt of v along rays vs trace(Wbar) v - f."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_rays):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        kt = solver.geometry.boundary_weingarten(theta).kappa_tilde
        tau0 = solver.tau_table.tau(theta)
        p = solver.geometry.direction(theta)
        foot = solver.curve.sample(theta).point
        t = rng.uniform(0.15, 0.7) * tau0
        h = 1e-3 * tau0
        x = foot + t * p
        vm = solver.v_at(foot + (t - h) * p)
        vp = solver.v_at(foot + (t + h) * p)
        v0 = solver.v_at(x)
        dv_dt = (vp - vm) / (2.0 * h)
        trace = kt / (1.0 - t * kt)
        f0 = float(solver.source(x))
        resid = dv_dt - (trace * v0 - f0)
        scale = max(abs(f0), abs(trace * v0), 1e-12)
        worst = max(worst, abs(resid) / scale)
    return _entry("ode", worst, tolerance, n_rays)


def backward_reconstruction_check(solver: TransportSolver, n_points=200,
                                  seed=20260809, tolerance=1e-6):
    """Integrate v' = trace(Wbar) v - f backward from v(cut) = 0 and
    compare with the quadrature construction (uniqueness cross-check)."""
    rng = np.random.default_rng(seed)
    curve = solver.curve
    worst = 0.0
    accepted = 0
    while accepted < n_points:
        x = _interior_samples(curve, rng, 1)[0]
        data = _ray_data(solver, x)
        if data is None:
            continue
        _, d, kt, tau0, p = data
        tau_x = tau0 - d
        if tau_x <= 1e-4:
            continue

        def rhs(t, y):
            trace = kt / (1.0 - (d + t) * kt)
            return trace * y[0] - float(solver.source(x + t * p))

        eps = 1e-9 * max(tau_x, 1.0)
        sol = solve_ivp(rhs, (tau_x - eps, 0.0), [0.0], method="Radau",
                        rtol=1e-10, atol=1e-12,
                        jac=lambda t, y: [[kt / (1.0 - (d + t) * kt)]])
        if not sol.success:
            continue
        v_ode = float(sol.y[0, -1])
        worst = max(worst, abs(v_ode - solver.v_at(x)))
        accepted += 1
    return _entry("uniqueness", worst, tolerance, accepted)


# -- membership and bound checks ---------------------------------------------------


def lip1_check(gauge, curve, w_field, n_pairs=200, seed=20260809,
               tolerance=1e-9):
    """w(x) - w(y) <= rho0(x - y) on random segments inside the closure,
    plus w = 0 at boundary samples."""
    rng = np.random.default_rng(seed)
    polar = gauge.polar()
    worst = -np.inf
    accepted = 0
    while accepted < n_pairs:
        xy = _interior_samples(curve, rng, 2)
        x, y = xy[0], xy[1]
        lam = np.linspace(0.0, 1.0, 17)[1:-1]
        seg = x[None, :] + lam[:, None] * (y - x)[None, :]
        if not np.all(np.asarray(curve.contains(seg))):
            continue
        gap = float(w_field(x)) - float(w_field(y)) - float(polar.eval(x - y))
        worst = max(worst, gap)
        accepted += 1
    boundary_max = 0.0
    for th in np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False):
        boundary_max = max(boundary_max,
                           abs(float(w_field(np.asarray(curve.point(th))))))
    err = max(worst, boundary_max)
    return _entry("lip1", err, tolerance, n_pairs,
                  segment_violation=worst, boundary_max=boundary_max)


def m_bound_check(solver: TransportSolver, n_samples=10000, seed=20260809,
                  tolerance=1e-12):
    """0 <= M(s,t) <= 1 + T*Kminus with T = max tau, Kminus the largest
    negative part of the rho-curvature over the boundary table."""
    rng = np.random.default_rng(seed)
    table = solver.tau_table
    T = float(table.taus.max())
    k_minus = float(np.maximum(-table.kappa_tildes, 0.0).max())
    bound = 1.0 + T * k_minus
    worst = 0.0
    thetas = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    for theta in thetas:
        tau = table.tau(theta)
        kt = float(np.interp(theta, table.thetas, table.kappa_tildes,
                             period=2.0 * np.pi))
        s, t = np.sort(rng.uniform(0.0, 0.999 * tau, 2))
        m = (1.0 - t * kt) / (1.0 - s * kt)
        worst = max(worst, max(-m, m - bound))
    return _entry("m_bound", worst, tolerance, n_samples,
                  T=T, K_minus=k_minus, bound=bound)


# -- orchestration --------------------------------------------------------------------


def run_verification(solver: TransportSolver, *, seed=20260809, perturb_v=1.0,
                     n_bumps=12, quad_cells=8, n_saddle=50, n_eikonal=500,
                     n_repr=100, n_ode=20, n_backward=200, n_lip=200,
                     n_mbound=10000) -> VerificationReport:
    """Full battery; perturb_v scales the density in the weak-form check
    (a 10% perturbation must fail with residual about 0.1)."""
    gauge, curve, source = solver.gauge, solver.curve, solver.source
    bumps = bump_battery(curve, solver.projector, n=n_bumps)
    u_field = DistanceField(solver)
    v_field = DensityField(solver, scale=perturb_v)

    entries = [
        weak_residual(gauge, curve, source, v_field, u_field, bumps,
                      quad_cells=quad_cells),
        eikonal_check(solver, n_points=n_eikonal, seed=seed),
        representation_check(solver, n_samples=n_repr, seed=seed),
        ode_residual_check(solver, n_rays=n_ode, seed=seed),
        backward_reconstruction_check(solver, n_points=n_backward, seed=seed),
    ]
    quadrature = DomainQuadrature(curve)
    table = SceneTable(solver, quadrature)
    entries.append(saddle_check(solver, table, bumps, n_perturbations=n_saddle,
                                seed=seed))
    entries.append(lip1_check(gauge, curve, u_field, n_pairs=n_lip, seed=seed))
    entries.append(m_bound_check(solver, n_samples=n_mbound, seed=seed))
    return VerificationReport(entries=entries)
