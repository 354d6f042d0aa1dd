"""Spin-1/2 wavefunctions on Euler-angle configuration space.

Euler triples are ``(alpha, beta, gamma)`` with ``alpha in [0, 2pi)``,
``beta in [0, pi]`` and ``gamma in [0, 4pi)``; gamma runs over the SU(2)
double cover so that ``exp(i gamma / 2)`` is single valued.  All functions
accept numpy arrays in place of scalars and broadcast.

Chart coordinates are ordered ``(x, y, z, alpha, beta, gamma)`` per particle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import numerics
from .errors import NodeError, PoleError, ValidationError
from .fields import WaveField
from .geometry import CoordRange, MetricChart, flat_chart, product_chart

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
HAAR_VOLUME = TWO_PI * 2.0 * FOUR_PI  # 16 pi^2
NODE_TOL = 1e-12


class EulerTriple(NamedTuple):
    alpha: float
    beta: float
    gamma: float

    def validate(self) -> "EulerTriple":
        a, b, g = (np.asarray(v, dtype=float) for v in self)
        if np.any((a < 0) | (a >= TWO_PI)) or np.any((b < 0) | (b > math.pi)) or np.any((g < 0) | (g >= FOUR_PI)):
            raise ValidationError(f"Euler triple outside canonical ranges: {self}")
        return self

    def canonical(self) -> "EulerTriple":
        return EulerTriple(np.mod(self.alpha, TWO_PI), self.beta, np.mod(self.gamma, FOUR_PI))

    @classmethod
    def random(cls, rng: np.random.Generator, size=None, margin: float = 0.0) -> "EulerTriple":
        """Haar-distributed triple(s); ``margin`` keeps beta away from 0 and pi."""
        alpha = rng.uniform(0.0, TWO_PI, size)
        lo, hi = math.cos(margin), math.cos(math.pi - margin)
        beta = np.arccos(rng.uniform(hi, lo, size))
        gamma = rng.uniform(0.0, FOUR_PI, size)
        return cls(alpha, beta, gamma)


class TwoParticleAngles(NamedTuple):
    zeta_a: EulerTriple
    zeta_b: EulerTriple

    @property
    def delta_alpha(self):
        return self.zeta_b.alpha - self.zeta_a.alpha

    def swapped(self) -> "TwoParticleAngles":
        return TwoParticleAngles(self.zeta_b, self.zeta_a)


def _triple(z) -> EulerTriple:
    return z if isinstance(z, EulerTriple) else EulerTriple(*z)


# ---------------------------------------------------------------------------
# representation functions and Haar measure
# ---------------------------------------------------------------------------


def d_up(z):
    a, b, g = _triple(z)
    return np.exp(0.5j * (np.asarray(g) + np.asarray(a))) * np.cos(0.5 * np.asarray(b))


def d_down(z):
    a, b, g = _triple(z)
    return np.exp(0.5j * (np.asarray(g) - np.asarray(a))) * np.sin(0.5 * np.asarray(b))


def haar_measure(z):
    """Unnormalized Haar weight ``sin(beta)`` (per ``d alpha d beta d gamma``)."""
    return np.sin(np.asarray(_triple(z).beta))


def haar_normalization() -> float:
    """Total Haar volume ``2pi * 2 * 4pi`` with gamma on the double cover."""
    return HAAR_VOLUME


def haar_integral(f: Callable, n_alpha: int = 8, n_beta: int = 8, n_gamma: int = 8):
    """Normalized Haar average of ``f(EulerTriple)``."""
    spec = numerics.haar_spec(n_alpha, n_beta, n_gamma)
    return numerics.tensor_quadrature(lambda a, b, g: f(EulerTriple(a, b, g)), spec)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


def so3_chart(a: float = 1.0) -> MetricChart:
    """Angular block ``a^2 (d beta^2 + d alpha^2 + d gamma^2 + 2 cos(beta) d alpha d gamma)``.

    Coordinates are ``(alpha, beta, gamma)``.  This is the round 3-sphere of
    radius ``2a``; its volume element ``a^3 sin(beta)`` is the Haar weight.
    """
    if not a > 0:
        raise ValidationError("gyration radius must be positive")
    a2 = a * a

    def metric_at(q):
        c = math.cos(q[1])
        return a2 * np.array([[1.0, 0.0, c], [0.0, 1.0, 0.0], [c, 0.0, 1.0]])

    ranges = (CoordRange(0.0, TWO_PI, True), CoordRange(0.0, math.pi), CoordRange(0.0, FOUR_PI, True))
    return MetricChart(3, metric_at, ranges, f"so3(a={a:g})", polar_axes=(1,))


def v6_chart(a: float = 1.0) -> MetricChart:
    return product_chart(flat_chart(3), so3_chart(a), name=f"v6(a={a:g})")


def v12_chart(a: float = 1.0) -> MetricChart:
    return product_chart(flat_chart(3), so3_chart(a), flat_chart(3), so3_chart(a), name=f"v12(a={a:g})")


# ---------------------------------------------------------------------------
# single particle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinorEnvelope:
    """Spatial amplitudes ``w_up(r, t)``, ``w_down(r, t)``."""

    w_up: Callable
    w_down: Callable

    @classmethod
    def constant(cls, up: complex = 1.0, down: complex = 0.0) -> "SpinorEnvelope":
        return cls(lambda r, t: up, lambda r, t: down)

    @classmethod
    def plane_wave(cls, k, up: complex = 1.0, down: complex = 0.0) -> "SpinorEnvelope":
        k = np.asarray(k, dtype=float)

        def phase(r):
            return np.exp(1j * (np.asarray(r, dtype=float) @ k))

        return cls(lambda r, t: up * phase(r), lambda r, t: down * phase(r))


def psi_single(z, env: SpinorEnvelope, r, t: float = 0.0):
    return d_up(z) * env.w_up(r, t) + d_down(z) * env.w_down(r, t)


def action_spin_up(z, w_up_phase: float = 0.0, hbar: float = 1.0):
    """Action of the spin-up state, ``hbar ((gamma + alpha)/2 + arg w_up)``."""
    zz = _triple(z)
    if np.any(math.pi - np.asarray(zz.beta) <= NODE_TOL):
        raise NodeError("spin-up phase undefined at beta = pi")
    return hbar * (0.5 * (np.asarray(zz.gamma) + np.asarray(zz.alpha)) + w_up_phase)


def curvature_spin_up(z, a: float = 1.0):
    """Angular Weyl curvature of the spin-up state, up to an additive constant."""
    beta = np.asarray(_triple(z).beta)
    denom = 1.0 + np.cos(beta)
    if np.any(denom <= NODE_TOL):
        raise PoleError("spin-up curvature diverges at beta = pi")
    return -5.0 / (2.0 * a * a * denom)


# ---------------------------------------------------------------------------
# two particles
# ---------------------------------------------------------------------------


def _pair_envelopes(envs):
    if isinstance(envs, SpinorEnvelope):
        return envs, envs
    env_a, env_b = envs
    return env_a, env_b


def psi_product(angles: TwoParticleAngles, envs, r_a, r_b, t: float = 0.0):
    """Product state up(A) down(B)."""
    env_a, env_b = _pair_envelopes(envs)
    za, zb = angles
    return d_up(za) * d_down(zb) * env_a.w_up(r_a, t) * env_b.w_down(r_b, t)


def psi_singlet(angles: TwoParticleAngles, envs, r_a, r_b, t: float = 0.0):
    """Antisymmetric combination ``(psi_ud - psi_du) / sqrt 2``."""
    env_a, env_b = _pair_envelopes(envs)
    za, zb = angles
    ud = d_up(za) * d_down(zb) * env_a.w_up(r_a, t) * env_b.w_down(r_b, t)
    du = d_down(za) * d_up(zb) * env_a.w_down(r_a, t) * env_b.w_up(r_b, t)
    return (ud - du) / math.sqrt(2.0)


def singlet_denominator(angles: TwoParticleAngles):
    """``1 - cos bA cos bB - cos(dAlpha) sin bA sin bB``; zero exactly on the node."""
    za, zb = angles
    ba, bb = np.asarray(za.beta), np.asarray(zb.beta)
    return 1.0 - np.cos(ba) * np.cos(bb) - np.cos(np.asarray(zb.alpha) - np.asarray(za.alpha)) * np.sin(ba) * np.sin(bb)


def singlet_density(angles: TwoParticleAngles):
    """``|psi_singlet|^2`` for unit spatial envelopes: one quarter of the denominator."""
    return 0.25 * singlet_denominator(angles)


def singlet_phase(angles: TwoParticleAngles, w_phase: float = 0.0, hbar: float = 1.0, branch: str = "atan2"):
    """Phase of the singlet for envelopes with ``w_up == w_down`` on each particle.

    ``w_phase`` is ``arg w_up(A) + arg w_down(B)``.  With ``branch='arctan'``
    the closed form
    ``(gA + gB)/2 + arctan(csc((bA - bB)/2) sin((bA + bB)/2) tan((aB - aA)/2))``
    is returned; it is correct modulo pi only.  ``branch='atan2'`` resolves
    the quadrant and equals ``arg psi`` modulo 2 pi.
    """
    za, zb = angles
    half_gamma = 0.5 * (np.asarray(za.gamma) + np.asarray(zb.gamma))
    x = 0.5 * (np.asarray(zb.alpha) - np.asarray(za.alpha))
    s_diff = np.sin(0.5 * (np.asarray(za.beta) - np.asarray(zb.beta)))
    s_sum = np.sin(0.5 * (np.asarray(za.beta) + np.asarray(zb.beta)))
    if branch == "arctan":
        with np.errstate(divide="ignore"):
            angle = np.arctan(s_sum * np.tan(x) / s_diff)
    elif branch == "atan2":
        # psi ~ e^{i half_gamma} [ -sin((bA-bB)/2) cos x - i sin((bA+bB)/2) sin x ]
        angle = np.arctan2(-s_sum * np.sin(x), -s_diff * np.cos(x))
    else:
        raise ValidationError(f"unknown branch {branch!r}")
    return hbar * (half_gamma + angle + w_phase)


def curvature_singlet(angles: TwoParticleAngles, a: float = 1.0):
    """Closed-form singlet coupling curvature ``22 / (5 a^2 D)`` as printed.

    Finite-difference evaluation of the Weyl scalar gives ``-22/(5 a^2 D)``
    plus a constant; see ``SINGLET_CURVATURE_FACTOR``.
    """
    denom = singlet_denominator(angles)
    if np.any(np.abs(denom) <= NODE_TOL):
        raise PoleError("singlet curvature diverges on the node zeta_A = zeta_B")
    return 22.0 / (5.0 * a * a * denom)


def curvature_product(angles: TwoParticleAngles, a: float = 1.0):
    """Angular curvature of spin up (A) times spin down (B) as a sum of single terms.

    Spin down at ``beta`` has the spin-up density at ``pi - beta``.  In
    dimension 12 the density-gradient terms carry (n-1)/(n-2) = 11/10 instead
    of 5/4, so the Weyl scalar differences are ``PRODUCT_CURVATURE_FACTOR``
    times those of this sum.
    """
    za, zb = _triple(angles.zeta_a), _triple(angles.zeta_b)
    return curvature_spin_up((0.0, za.beta, 0.0), a) + curvature_spin_up((0.0, np.pi - zb.beta, 0.0), a)


PRODUCT_CURVATURE_FACTOR = 22.0 / 25.0
# Ratio between the finite-difference Weyl-scalar differences and those of the
# printed closed form (established by the v12 oracle; see tests).
SINGLET_CURVATURE_FACTOR = -1.0
# Additive constants in the angular Weyl curvature, in units of 1/a^2.
SPIN_UP_CURVATURE_CONSTANT = 15.0 / 4.0 + 3.0 / 2.0
SINGLET_CURVATURE_CONSTANT = 33.0 / 5.0 + 3.0


# ---------------------------------------------------------------------------
# wavefunctions on charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstructedState:
    """A wave field with its analytic action and HJE compatibility constant.

    ``offset`` is the constant value of ``|d sigma|^2 + R`` for the state;
    it plays the role of the separation (energy) constant that the spatial
    and angular factors share.
    """

    wave: WaveField
    action: Callable
    offset: float


def spin_up_plane_wave(k=(0.0, 0.0, 0.0), a: float = 1.0, hbar: float = 1.0) -> ConstructedState:
    """``exp(i k.x) D_up`` on v6 with its action ``hbar (k.x + (alpha + gamma)/2)``.

    ``|d sigma|^2 + R`` is constant for this state and equals
    ``|k|^2 / xi^2 + 21 / (4 a^2)`` with ``xi^2 = 1/5``.
    """
    k = np.asarray(k, dtype=float)
    chart = v6_chart(a)

    def psi_at(q, t=0.0):
        q = np.asarray(q, dtype=float)
        return complex(np.exp(1j * (q[:3] @ k)) * d_up(q[3:6]))

    def action(q):
        q = np.asarray(q, dtype=float)
        return hbar * (float(q[:3] @ k) + 0.5 * (q[3] + q[5]))

    offset = 5.0 * float(k @ k) + 21.0 / (4.0 * a * a)
    return ConstructedState(WaveField(psi_at, chart), action, offset)


def product_wave(a: float = 1.0, envs=None) -> WaveField:
    env_a, env_b = _pair_envelopes(envs or SpinorEnvelope.constant(1.0, 1.0))

    def psi_at(q, t=0.0):
        q = np.asarray(q, dtype=float)
        angles = TwoParticleAngles(EulerTriple(*q[3:6]), EulerTriple(*q[9:12]))
        return complex(psi_product(angles, (env_a, env_b), q[0:3], q[6:9], t))

    return WaveField(psi_at, v12_chart(a))


def singlet_wave(a: float = 1.0, envs=None) -> WaveField:
    env_a, env_b = _pair_envelopes(envs or SpinorEnvelope.constant(1.0, 1.0))

    def psi_at(q, t=0.0):
        q = np.asarray(q, dtype=float)
        angles = TwoParticleAngles(EulerTriple(*q[3:6]), EulerTriple(*q[9:12]))
        return complex(psi_singlet(angles, (env_a, env_b), q[0:3], q[6:9], t))

    return WaveField(psi_at, v12_chart(a))


def single_wave(env: SpinorEnvelope, a: float = 1.0) -> WaveField:
    def psi_at(q, t=0.0):
        q = np.asarray(q, dtype=float)
        return complex(psi_single(q[3:6], env, q[:3], t))

    return WaveField(psi_at, v6_chart(a))
