"""Riemann and Weyl geometry on metric charts.

A chart is a metric evaluator plus coordinate ranges.  Metric derivatives
come from central differences with Richardson extrapolation; everything
downstream (Christoffel symbols, curvature, Weyl connection) is assembled
from those pointwise derivative arrays.

Index conventions: ``gamma[i, j, k]`` is the Christoffel symbol of the
second kind ``{i over jk}``; Riemann ``R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj}
+ G^i_{km} G^m_{lj} - G^i_{lm} G^m_{kj}``; scalar ``R = g^{jl} R^i_{jil}``,
positive on spheres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import numerics
from .errors import (
    CoordinateSingularityError,
    DegenerateChartError,
    DomainError,
    InvalidGaugeError,
    NodeError,
    UnsupportedDimensionError,
)

DEFAULT_STEP = 1e-3
DEFAULT_LEVELS = 1
DET_FLOOR = 1e-12
NODE_TOL = 1e-12
POLAR_GUARD = 1e-3


@dataclass(frozen=True)
class CoordRange:
    lo: float = -math.inf
    hi: float = math.inf
    periodic: bool = False

    @property
    def period(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class MetricChart:
    """Coordinate chart with a pointwise metric evaluator.

    ``polar_axes`` lists coordinates that are polar angles in [0, pi]
    (Euler beta); evaluation within ``POLAR_GUARD`` of either end is refused.
    """

    dim: int
    metric_at: Callable[[np.ndarray], np.ndarray]
    ranges: tuple[CoordRange, ...]
    name: str = "chart"
    polar_axes: tuple[int, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("chart dimension must be positive")
        object.__setattr__(self, "ranges", tuple(self.ranges))
        if len(self.ranges) != self.dim:
            raise ValueError("one range per coordinate required")

    def metric(self, q) -> np.ndarray:
        return np.asarray(self.metric_at(np.asarray(q, dtype=float)), dtype=float)

    def contains(self, q) -> bool:
        q = np.asarray(q, dtype=float)
        return all(r.periodic or (r.lo <= x <= r.hi) for r, x in zip(self.ranges, q))

    def check_point(self, q, guard: float = POLAR_GUARD) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dim,):
            raise DomainError(f"{self.name}: expected a point of dimension {self.dim}, got shape {q.shape}")
        if not self.contains(q):
            raise DomainError(f"{self.name}: point {q.tolist()} outside coordinate ranges")
        for ax in self.polar_axes:
            b = q[ax]
            if b < guard or b > math.pi - guard:
                raise CoordinateSingularityError(
                    f"{self.name}: coordinate {ax} = {b!r} within {guard} of a polar singularity"
                )
        return q

    def wrap(self, q) -> np.ndarray:
        """Reduce periodic coordinates into their fundamental interval."""
        q = np.array(q, dtype=float)
        for i, r in enumerate(self.ranges):
            if r.periodic:
                q[i] = r.lo + (q[i] - r.lo) % r.period
        return q


def flat_chart(n: int, name: str | None = None) -> MetricChart:
    eye = np.eye(n)
    return MetricChart(n, lambda q: eye, tuple(CoordRange() for _ in range(n)), name or f"flat{n}")


def product_chart(*charts: MetricChart, name: str | None = None) -> MetricChart:
    """Block-diagonal product of charts, coordinates concatenated in order."""
    dims = [c.dim for c in charts]
    offsets = np.cumsum([0] + dims)
    n = int(offsets[-1])

    def metric_at(q):
        g = np.zeros((n, n))
        for c, o, d in zip(charts, offsets, dims):
            g[o : o + d, o : o + d] = c.metric_at(q[o : o + d])
        return g

    ranges = tuple(r for c in charts for r in c.ranges)
    polar = tuple(int(o) + ax for c, o in zip(charts, offsets) for ax in c.polar_axes)
    return MetricChart(n, metric_at, ranges, name or "x".join(c.name for c in charts), polar)


def conformal_chart(chart: MetricChart, lam: Callable[[np.ndarray], float], name: str | None = None) -> MetricChart:
    """Chart with metric ``lam(q) * g(q)``."""

    def metric_at(q):
        return _gauge_value(lam, q) * chart.metric_at(q)

    return replace(chart, metric_at=metric_at, name=name or f"{chart.name}'")


# ---------------------------------------------------------------------------
# scalar fields with Weyl weights
# ---------------------------------------------------------------------------


def density_weight(n: int) -> Fraction:
    return Fraction(-(n - 2), 2)


def wave_weight(n: int) -> Fraction:
    return Fraction(-(n - 2), 4)


@dataclass(frozen=True)
class DensityField:
    rho_at: Callable[[np.ndarray], float]
    weight: Fraction

    @classmethod
    def on(cls, chart: MetricChart, rho_at) -> "DensityField":
        return cls(rho_at, density_weight(chart.dim))

    def __call__(self, q) -> float:
        return self.rho_at(np.asarray(q, dtype=float))


@dataclass(frozen=True)
class WeylFrame:
    chart: MetricChart
    phi_at: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_density(cls, chart: MetricChart, rho, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS):
        def phi_at(q):
            return weyl_vector(rho, q, chart.dim, h=h, levels=levels)

        return cls(chart, phi_at)


@dataclass(frozen=True)
class GaugeFunction:
    lambda_at: Callable[[np.ndarray], float]

    def __call__(self, q) -> float:
        return _gauge_value(self.lambda_at, q)


def _gauge_value(lam, q) -> float:
    v = float(lam(np.asarray(q, dtype=float)))
    if not v > 0.0:
        raise InvalidGaugeError(f"gauge factor must be positive, got {v!r} at {np.asarray(q).tolist()}")
    return v


def smooth_random_gauge(seed: int, dim: int, modes: int = 3, amplitude: float = 0.25) -> GaugeFunction:
    """Positive gauge ``exp(sum_k c_k sin(w_k . q + p_k))`` with random coefficients."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(-amplitude, amplitude, modes)
    w = rng.normal(0.0, 0.7, (modes, dim))
    p = rng.uniform(0.0, 2 * math.pi, modes)
    scale = rng.uniform(0.5, 2.0)

    def lam(q):
        return scale * math.exp(float(np.dot(c, np.sin(w @ q + p))))

    return GaugeFunction(lam)


# ---------------------------------------------------------------------------
# metric derivatives and Riemann geometry
# ---------------------------------------------------------------------------


@dataclass
class MetricJet:
    """Metric, inverse and first/second partials at one point."""

    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray  # dg[k, i, j] = d_k g_ij
    ddg: np.ndarray | None = None  # ddg[k, l, i, j] = d_k d_l g_ij

    @property
    def sqrt_det(self) -> float:
        return math.sqrt(abs(np.linalg.det(self.g)))


def _checked_inverse(chart: MetricChart, g: np.ndarray, q) -> np.ndarray:
    det = np.linalg.det(g)
    if not abs(det) > DET_FLOOR:
        raise DegenerateChartError(f"{chart.name}: |det g| = {abs(det):.3e} at {np.asarray(q).tolist()}")
    return np.linalg.inv(g)


def metric_jet(chart: MetricChart, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS, second: bool = False) -> MetricJet:
    q = chart.check_point(q)
    g = chart.metric(q)
    ginv = _checked_inverse(chart, g, q)
    if second:
        dg, ddg = numerics.gradient_and_hessian(chart.metric, q, h, levels)
    else:
        dg, ddg = numerics.gradient(chart.metric, q, h, levels), None
    return MetricJet(g, ginv, dg, ddg)


def _christoffel_from_jet(jet: MetricJet) -> np.ndarray:
    dg = jet.dg
    # first kind: G[l, j, k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    lower = 0.5 * (np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg)
    gamma = np.einsum("il,ljk->ijk", jet.ginv, lower)
    return 0.5 * (gamma + gamma.transpose(0, 2, 1))


def christoffel(chart: MetricChart, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Christoffel symbols ``{i over jk}`` as an ``(n, n, n)`` array."""
    gamma = _christoffel_from_jet(metric_jet(chart, q, h, levels))
    assert np.array_equal(gamma, gamma.transpose(0, 2, 1))
    return gamma


def _riemann_from_jet(jet: MetricJet) -> np.ndarray:
    gamma = _christoffel_from_jet(jet)
    dg, ddg, ginv = jet.dg, jet.ddg, jet.ginv
    lower = 0.5 * (np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg)
    # d_m of the first-kind symbols: dlower[m, l, j, k]
    dlower = 0.5 * (np.einsum("mjlk->mljk", ddg) + np.einsum("mklj->mljk", ddg) - ddg)
    dginv = -np.einsum("ia,mab,bl->mil", ginv, dg, ginv)
    dgamma = np.einsum("mil,ljk->mijk", dginv, lower) + np.einsum("il,mljk->mijk", ginv, dlower)
    term1 = np.einsum("kilj->ijkl", dgamma)
    term2 = np.einsum("likj->ijkl", dgamma)
    term3 = np.einsum("ikm,mlj->ijkl", gamma, gamma)
    term4 = np.einsum("ilm,mkj->ijkl", gamma, gamma)
    return term1 - term2 + term3 - term4


def _scalar_from_jet(jet: MetricJet) -> float:
    ricci = np.einsum("ijil->jl", _riemann_from_jet(jet))
    return float(np.einsum("jl,jl->", jet.ginv, ricci))


def riemann_tensor(chart: MetricChart, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """``R[i, j, k, l] = R^i_{jkl}`` from first and second metric partials."""
    return _riemann_from_jet(metric_jet(chart, q, h, levels, second=True))


def riemann_scalar(chart: MetricChart, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> float:
    return _scalar_from_jet(metric_jet(chart, q, h, levels, second=True))


# ---------------------------------------------------------------------------
# Weyl geometry
# ---------------------------------------------------------------------------


def _rho_value(rho, q, tol: float = NODE_TOL) -> float:
    v = float(rho(q))
    if not v > tol:
        raise NodeError(f"density {v!r} at {np.asarray(q).tolist()} is not positive")
    return v


def weyl_vector(rho, q, n: int, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Weyl covector ``phi_i = -(1/(n-2)) d_i rho / rho``."""
    if n == 2:
        raise UnsupportedDimensionError("the Weyl vector is undefined for n = 2")
    q = np.asarray(q, dtype=float)
    r0 = _rho_value(rho, q)
    grad = numerics.gradient(lambda x: float(rho(x)), q, h, levels)
    return -grad / ((n - 2) * r0)


def weyl_connection(chart: MetricChart, frame: WeylFrame, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Weyl connection ``G^i_jk = -{i over jk} + d^i_j phi_k + d^i_k phi_j - g_jk phi^i``.

    The sign of the last term is the one that makes the connection invariant
    under ``g -> lam g`` together with the weight of the density.
    """
    jet = metric_jet(chart, q, h, levels)
    chris = _christoffel_from_jet(jet)
    phi = np.asarray(frame.phi_at(np.asarray(q, dtype=float)), dtype=float)
    if not np.all(np.isfinite(phi)):
        raise NodeError("Weyl vector is not finite at the evaluation point")
    phi_up = jet.ginv @ phi
    eye = np.eye(chart.dim)
    out = (
        -chris
        + np.einsum("ij,k->ijk", eye, phi)
        + np.einsum("ik,j->ijk", eye, phi)
        - np.einsum("jk,i->ijk", jet.g, phi_up)
    )
    return out


def laplace_beltrami(chart: MetricChart, f, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS):
    """``(1/sqrt g) d_i (sqrt g g^{ij} d_j f)`` for real or complex scalar ``f``."""
    jet = metric_jet(chart, q, h, levels)
    chris = _christoffel_from_jet(jet)
    grad, hess = numerics.gradient_and_hessian(f, np.asarray(q, dtype=float), h, levels)
    return np.einsum("ij,ij->", jet.ginv, hess) - np.einsum("jk,ijk,i->", jet.ginv, chris, grad)


def weyl_scalar(chart: MetricChart, rho, q, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> float:
    """Weyl scalar curvature from the Riemann scalar and density gradients.

    ``R = Rbar + (n-1)/(n-2) [ |d rho|^2 / rho^2 - 2 LB(rho) / rho ]`` with
    ``LB`` the Laplace-Beltrami operator of the chart.
    """
    n = chart.dim
    if n == 2:
        raise UnsupportedDimensionError("Weyl scalar needs n != 2")
    q = chart.check_point(q)
    r0 = _rho_value(rho, q)
    jet = metric_jet(chart, q, h, levels, second=True)
    chris = _christoffel_from_jet(jet)
    grad, hess = numerics.gradient_and_hessian(lambda x: float(rho(x)), q, h, levels)
    lb = np.einsum("ij,ij->", jet.ginv, hess) - np.einsum("jk,ijk,i->", jet.ginv, chris, grad)
    norm2 = float(grad @ jet.ginv @ grad)
    rbar = _scalar_from_jet(jet)
    return rbar + (n - 1) / (n - 2) * (norm2 / r0**2 - 2.0 * lb / r0)


# ---------------------------------------------------------------------------
# gauge transformations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaugeBundle:
    """Fields after a Weyl rescaling ``g -> lam g``; weights stay attached."""

    chart: MetricChart
    rho: DensityField | None
    psi: object | None
    frame: WeylFrame | None
    gauge: GaugeFunction
    weights: dict = field(default_factory=dict)


def gauge_transform(chart: MetricChart, rho=None, psi=None, frame: WeylFrame | None = None, lam=None, samples: Sequence | None = None, h: float = DEFAULT_STEP, levels: int = DEFAULT_LEVELS) -> GaugeBundle:
    """Apply ``g' = lam g``, ``rho' = lam^w(rho) rho``, ``psi' = lam^w(psi) psi``.

    The Weyl vector shifts by ``+d_i lam / (2 lam)``; this follows from its
    definition as a log-gradient of the density once ``w(rho) = -(n-2)/2``.
    ``lam`` must be positive; it is checked at every evaluation and eagerly
    at ``samples`` if given.
    """
    if lam is None:
        raise InvalidGaugeError("a gauge function is required")
    gauge = lam if isinstance(lam, GaugeFunction) else GaugeFunction(lam)
    for q in samples or ():
        gauge(q)
    n = chart.dim
    w_rho, w_psi = density_weight(n), wave_weight(n)
    new_chart = conformal_chart(chart, gauge)

    new_rho = None
    if rho is not None:
        base = rho.rho_at if isinstance(rho, DensityField) else rho
        weight = rho.weight if isinstance(rho, DensityField) else w_rho
        new_rho = DensityField(lambda q: gauge(q) ** float(weight) * float(base(q)), weight)

    new_psi = None
    if psi is not None:
        new_psi = psi.rescaled(gauge, new_chart)

    new_frame = None
    if frame is not None:

        def phi_at(q):
            q = np.asarray(q, dtype=float)
            dlam = numerics.gradient(gauge, q, h, levels)
            return np.asarray(frame.phi_at(q)) + dlam / (2.0 * gauge(q))

        new_frame = WeylFrame(new_chart, phi_at)

    weights = {
        "g": Fraction(1),
        "g_inv": Fraction(-1),
        "sqrt_g": Fraction(n, 2),
        "rho": w_rho,
        "psi": w_psi,
        "R": Fraction(-1),
        "j": Fraction(0),
        "sigma": Fraction(0),
    }
    return GaugeBundle(new_chart, new_rho, new_psi, new_frame, gauge, weights)


def riemann_gauge_metric(chart: MetricChart, psi, q, t: float = 0.0) -> np.ndarray:
    """Metric ``|psi|^(4/(n-2)) g`` in which the density is constant."""
    n = chart.dim
    if n == 2:
        raise UnsupportedDimensionError("Riemann gauge needs n != 2")
    q = np.asarray(q, dtype=float)
    value = psi(q, t) if not hasattr(psi, "psi_at") else psi.psi_at(q, t)
    mod = abs(value)
    if not mod > NODE_TOL:
        raise NodeError(f"wavefunction vanishes at {q.tolist()}")
    return mod ** (4.0 / (n - 2)) * chart.metric(q)


def riemann_gauge(psi, n: int, t: float = 0.0) -> GaugeFunction:
    """Gauge factor ``lam = |psi|^(4/(n-2))`` taking a chart to the Riemann gauge."""

    def lam(q):
        value = psi.psi_at(q, t) if hasattr(psi, "psi_at") else psi(q, t)
        return abs(value) ** (4.0 / (n - 2))

    return GaugeFunction(lam)
