"""Complex wave fields, polar decomposition and the field-equation residuals.

With ``psi = sqrt(rho) exp(i S / hbar)`` and ``S = xi hbar sigma`` the pair
(HJE, continuity) for ``(rho, sigma)`` is equivalent to the conformal wave
equation ``(LB - xi^2 Rbar) psi = 0``.  Pointwise,

    (LB - xi^2 Rbar) psi = psi * (-xi^2 H + i xi C / rho)

where ``H = |d sigma|^2 + R`` and ``C = div(rho grad sigma)``; this identity
is what ``ansatz_combination`` evaluates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import geometry, numerics
from .errors import ChartExitError, CoordinateSingularityError, InvalidSurfaceError, NodeError, ValidationError
from .geometry import DEFAULT_LEVELS, DEFAULT_STEP, MetricChart

NODE_TOL = 1e-12


def xi(n: int) -> float:
    return math.sqrt((n - 2) / (4.0 * (n - 1)))


@dataclass(frozen=True)
class WaveField:
    """Complex scalar ``psi(q, t)`` on a chart, of Weyl weight ``-(n-2)/4``."""

    psi_at: Callable
    chart: MetricChart
    weight: Fraction | None = None

    def __post_init__(self):
        expected = geometry.wave_weight(self.chart.dim)
        if self.weight is None:
            object.__setattr__(self, "weight", expected)
        elif Fraction(self.weight) != expected:
            raise ValidationError(f"wave weight must be {expected} on a {self.chart.dim}-dimensional chart")

    def __call__(self, q, t: float = 0.0) -> complex:
        return complex(self.psi_at(np.asarray(q, dtype=float), t))

    def rescaled(self, lam, chart: MetricChart) -> "WaveField":
        """``lam^w psi`` living on the rescaled chart."""
        w = float(self.weight)
        base = self.psi_at
        return WaveField(lambda q, t=0.0: lam(q) ** w * base(q, t), chart, self.weight)

    def density(self, t: float = 0.0) -> geometry.DensityField:
        return geometry.DensityField(lambda q: abs(self.psi_at(np.asarray(q, dtype=float), t)) ** 2,
                                     geometry.density_weight(self.chart.dim))

    def local_sigma(self, anchor, t: float = 0.0, hbar: float = 1.0) -> Callable:
        """Dimensionless action continued from ``anchor`` by nearest branch.

        Valid in any neighbourhood of the anchor where the phase changes by
        less than pi, which covers finite-difference stencils.
        """
        anchor = np.asarray(anchor, dtype=float)
        p0 = self(anchor, t)
        if abs(p0) <= NODE_TOL:
            raise NodeError(f"wavefunction vanishes at {anchor.tolist()}")
        s0 = decompose(self, anchor, t, hbar).sigma
        x = xi(self.chart.dim)

        def sigma(q):
            return s0 + cmath.phase(self(q, t) / p0) / x

        return sigma


@dataclass(frozen=True)
class PolarDecomposition:
    rho: float
    S: float
    sigma: float
    xi: float
    hbar: float = 1.0

    @property
    def phasor(self) -> complex:
        return cmath.exp(1j * self.S / self.hbar)


def decompose(psi, q, t: float = 0.0, hbar: float = 1.0, tol: float = NODE_TOL, reference: float | None = None) -> PolarDecomposition:
    """Split ``psi(q, t)`` into density and action.

    ``S`` is the principal value ``hbar * arg psi``; when ``reference`` (a
    previous action value) is given, the branch nearest to it is chosen,
    which is what trajectory bookkeeping needs.
    """
    q = np.asarray(q, dtype=float)
    value = psi(q, t)
    mod = abs(value)
    if mod <= tol:
        raise NodeError(f"|psi| = {mod:.3e} at {q.tolist()}: phase undefined")
    S = hbar * cmath.phase(value)
    if reference is not None:
        period = 2.0 * math.pi * hbar
        S += period * round((reference - S) / period)
    x = xi(psi.chart.dim) if hasattr(psi, "chart") else float("nan")
    return PolarDecomposition(mod * mod, S, S / (x * hbar), x, hbar)


def compose(p: PolarDecomposition) -> complex:
    return math.sqrt(p.rho) * p.phasor


# ---------------------------------------------------------------------------
# residuals, currents, velocities
# ---------------------------------------------------------------------------


def _offset_value(offset, q) -> float:
    return float(offset(q)) if callable(offset) else float(offset)


def hje_residual(sigma: Callable, chart: MetricChart, rho, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS, offset=0.0) -> float:
    """``g^{ij} d_i sigma d_j sigma + R - offset`` with R the Weyl scalar of ``rho``.

    ``offset`` (a number or a function of ``q``) is the compatibility constant
    of the state; it is zero for a strict solution of the wave equation.
    """
    q = chart.check_point(q)
    jet = geometry.metric_jet(chart, q, h, levels)
    grad = numerics.gradient(lambda x: float(sigma(x)), q, h, levels)
    R = geometry.weyl_scalar(chart, rho, q, h, levels)
    return float(grad @ jet.ginv @ grad) + R - _offset_value(offset, q)


def continuity_residual(rho, sigma: Callable, chart: MetricChart, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> float:
    """``(1/sqrt g) d_i (sqrt g rho g^{ij} d_j sigma)``.

    Expanded as ``rho LB(sigma) + g^{ij} d_i rho d_j sigma`` so only
    pointwise derivatives are needed.
    """
    q = chart.check_point(q)
    jet = geometry.metric_jet(chart, q, h, levels)
    chris = geometry._christoffel_from_jet(jet)
    gs, hs = numerics.gradient_and_hessian(lambda x: float(sigma(x)), q, h, levels)
    gr = numerics.gradient(lambda x: float(rho(x)), q, h, levels)
    lb = np.einsum("ij,ij->", jet.ginv, hs) - np.einsum("jk,ijk,i->", jet.ginv, chris, gs)
    return float(rho(q)) * float(lb) + float(gr @ jet.ginv @ gs)


@dataclass(frozen=True)
class CurrentSample:
    j: np.ndarray
    weight: Fraction = field(default=Fraction(0))


def current_density(rho, sigma: Callable, chart: MetricChart, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> CurrentSample:
    """Contravariant current ``j^i = sqrt(g) rho g^{ij} d_j sigma``."""
    q = chart.check_point(q)
    jet = geometry.metric_jet(chart, q, h, levels)
    grad = numerics.gradient(lambda x: float(sigma(x)), q, h, levels)
    return CurrentSample(jet.sqrt_det * float(rho(q)) * (jet.ginv @ grad))


def velocity_field(S: Callable, chart: MetricChart, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Trajectory tangent ``g^{ij} d_j S`` (parametrization fixed by using S)."""
    q = chart.check_point(q)
    g = chart.metric(q)
    ginv = geometry._checked_inverse(chart, g, q)
    grad = numerics.gradient(lambda x: float(S(x)), q, h, levels)
    return ginv @ grad


def conformal_wave_residual(psi, chart: MetricChart, q, t: float = 0.0, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> complex:
    """``(LB - xi^2 Rbar) psi`` at ``q`` by finite differences."""
    q = chart.check_point(q)
    f = (lambda x: complex(psi(x, t))) if not hasattr(psi, "psi_at") else (lambda x: complex(psi.psi_at(x, t)))
    lb = geometry.laplace_beltrami(chart, f, q, h, levels)
    rbar = geometry.riemann_scalar(chart, q, h, levels)
    return complex(lb - xi(chart.dim) ** 2 * rbar * f(q))


def ansatz_combination(psi_value: complex, hje: float, continuity: float, rho: float, n: int) -> complex:
    """Wave residual implied by the (HJE, continuity) residuals of the same field."""
    x = xi(n)
    return psi_value * (-x * x * hje + 1j * x * continuity / rho)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    points: np.ndarray
    completed: bool
    reason: str = ""

    def __len__(self):
        return len(self.points)


def integrate_trajectory(S: Callable, chart: MetricChart, q0, steps: int, dt: float, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> Trajectory:
    """Fixed-step RK4 integration of ``dq/dt = velocity_field(S)``.

    Periodic coordinates are wrapped after each step.  Hitting a coordinate
    singularity ends the run early with ``completed=False``; leaving the chart
    through a non-periodic coordinate raises ``ChartExitError`` carrying the
    path so far.
    """
    q = chart.check_point(q0).copy()
    out = np.empty((steps + 1, chart.dim))
    out[0] = q

    def vel(x):
        return velocity_field(S, chart, x, h, levels)

    for n in range(steps):
        try:
            k1 = vel(q)
            k2 = vel(q + 0.5 * dt * k1)
            k3 = vel(q + 0.5 * dt * k2)
            k4 = vel(q + dt * k3)
        except CoordinateSingularityError as exc:
            return Trajectory(out[: n + 1].copy(), False, f"singularity: {exc}")
        except geometry.DomainError as exc:
            raise ChartExitError(str(exc), path=out[: n + 1].copy()) from exc
        nxt = q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not chart.contains(nxt):
            raise ChartExitError(f"trajectory left {chart.name} at step {n + 1}", path=out[: n + 1].copy())
        q = chart.wrap(nxt)
        out[n + 1] = q
    return Trajectory(out, True)


# ---------------------------------------------------------------------------
# detector flux
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectorSurface:
    """Flat disk in the spatial block times the full angular domain.

    ``normal`` is a covector on the whole chart; only its first three
    (spatial) components may be nonzero.  ``angular`` lists the Haar rule
    node counts for the Euler angles ``(alpha, beta, gamma)``.
    """

    center: tuple
    normal: tuple
    radius: float
    radial_nodes: int = 16
    angle_nodes: int = 32
    angular: tuple = (8, 8, 8)
    gyration: float = 1.0

    def spatial_normal(self) -> np.ndarray:
        n = np.asarray(self.normal, dtype=float)
        if np.any(n[3:] != 0.0):
            raise InvalidSurfaceError("detector normal must have spatial components only")
        unit = n[:3]
        norm = np.linalg.norm(unit)
        if not norm > 0:
            raise InvalidSurfaceError("detector normal vanishes")
        return unit / norm

    def disk_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Points on the disk and area weights (polar Gauss-Legendre x equispaced)."""
        nrm = self.spatial_normal()
        helper = np.array([1.0, 0.0, 0.0]) if abs(nrm[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(nrm, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(nrm, e1)
        spec = numerics.QuadratureSpec(
            (numerics.Rule1D(numerics.GAUSS_LEGENDRE, self.radial_nodes, 0.0, self.radius),
             numerics.Rule1D(numerics.PERIODIC, self.angle_nodes, 0.0, 2 * math.pi))
        )
        (r, phi), w = spec.grid()
        pts = np.asarray(self.center, dtype=float) + r[..., None] * (np.cos(phi)[..., None] * e1 + np.sin(phi)[..., None] * e2)
        return pts.reshape(-1, 3), (w * r).ravel()


def detector_flux(current: Callable, surface: DetectorSurface) -> float:
    """Flux of a contravariant current density through a detector surface.

    ``current(q)`` returns ``j^i`` on the 6-dimensional single-particle chart.
    The angular directions are integrated with the coordinate measure
    ``d alpha d beta d gamma`` divided by ``16 pi^2 a^3`` so that, for a
    factorized state, the result is the spatial flux times the normalized
    Haar average of the angular density.
    """
    nrm = surface.spatial_normal()
    pts, w_area = surface.disk_nodes()
    na, nb, ng = surface.angular
    spec = numerics.QuadratureSpec(
        (numerics.Rule1D(numerics.PERIODIC, na, 0.0, 2 * math.pi),
         numerics.Rule1D(numerics.GAUSS_LEGENDRE, nb, 0.0, math.pi),
         numerics.Rule1D(numerics.PERIODIC, ng, 0.0, 4 * math.pi))
    )
    (al, be, ga), w_ang = spec.grid()
    w_ang = w_ang.ravel() / (16.0 * math.pi**2 * surface.gyration**3)
    angles = np.stack([al.ravel(), be.ravel(), ga.ravel()], axis=1)
    terms = []
    for x, wx in zip(pts, w_area):
        for z, wz in zip(angles, w_ang):
            j = np.asarray(current(np.concatenate([x, z])), dtype=float)
            terms.append(wx * wz * float(j[:3] @ nrm))
    return math.fsum(terms)


def factorized_flux(spatial_current: Callable, angular_density: Callable, surface: DetectorSurface) -> float:
    """Spatial flux of ``j(r)`` through the disk times the Haar average of ``rho_2``."""
    nrm = surface.spatial_normal()
    pts, w_area = surface.disk_nodes()
    spatial = math.fsum(w * float(np.asarray(spatial_current(x)) @ nrm) for x, w in zip(pts, w_area))
    na, nb, ng = surface.angular
    ang = numerics.tensor_quadrature(lambda a, b, g: angular_density(a, b, g), numerics.haar_spec(na, nb, ng))
    return spatial * ang
