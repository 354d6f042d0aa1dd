"""Stern-Gerlach filtering of the singlet, coincidence fluxes and Bell tests.

The four detector amplitudes of the singlet after analyzers at ``theta_A``,
``theta_B`` are

    A_ij = c_i(zeta_A; theta_A) c_j(zeta_B; theta_B) t_ij(dv),
    c_u = D_up cos(theta/2) + D_down sin(theta/2),
    c_d = -D_up sin(theta/2) + D_down cos(theta/2),
    t_uu = t_dd = sin(dv),  t_ud = t_du = cos(dv),  dv = (theta_B - theta_A)/2,

so each ``|A_ij|^2`` factorizes into one-particle densities and the
six-angle Haar integral splits into two three-angle integrals.  Fluxes are
renormalized by the grand total (raw total 1/2 under normalized Haar).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numerics
from .errors import ConsistencyError, QuadratureOrderError, ValidationError
from .numerics import QuadratureSpec, RandomStream
from .spin_states import EulerTriple, TwoParticleAngles, d_down, d_up

CHANNELS = ("u", "d")
PAIRS = ("uu", "ud", "du", "dd")
MIN_PERIODIC_NODES = 5
MIN_BETA_NODES = 3


def delta_theta(theta_a: float, theta_b: float) -> float:
    return 0.5 * (theta_b - theta_a)


# ---------------------------------------------------------------------------
# analyzer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SGAOutput:
    u: complex
    d: complex

    def channel_factor(self, z, theta: float, channel: str):
        return sga_channel_factor(z, theta, channel)


def sga_transform(a: complex, b: complex, theta: float, tol: float = 1e-12) -> SGAOutput:
    """Channel scalars of the beam ``a D_up + b D_down`` after an analyzer at ``theta``.

    The up channel carries ``(a cos t + b sin t)`` times the angular factor
    ``D_up cos t + D_down sin t`` (``t = theta/2``), the down channel
    ``(a sin t - b cos t)`` times ``D_up sin t - D_down cos t``.
    """
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > tol:
        raise ValidationError("input spinor must satisfy |a|^2 + |b|^2 = 1")
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    return SGAOutput(a * c + b * s, a * s - b * c)


def sga_channel_factor(z, theta: float, channel: str):
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    if channel == "u":
        return d_up(z) * c + d_down(z) * s
    if channel == "d":
        return d_up(z) * s - d_down(z) * c
    raise ValidationError(f"unknown channel {channel!r}")


def _combo(z, theta: float, channel: str):
    """Analyzer-rotated D-combination exactly as it enters ``A_ij``."""
    c, s = math.cos(0.5 * theta), math.sin(0.5 * theta)
    if channel == "u":
        return d_up(z) * c + d_down(z) * s
    return -d_up(z) * s + d_down(z) * c


def channel_density(z, theta: float, channel: str):
    """``|c_i(z; theta)|^2``, equal to ``(1 +/- (cos b cos th + cos a sin b sin th)) / 2``."""
    return np.abs(_combo(z, theta, channel)) ** 2


def amplitude_coefficients(angles: TwoParticleAngles, theta_a: float, theta_b: float) -> dict:
    za, zb = angles
    dv = delta_theta(theta_a, theta_b)
    trig = {"uu": math.sin(dv), "ud": math.cos(dv), "du": math.cos(dv), "dd": math.sin(dv)}
    return {p: _combo(za, theta_a, p[0]) * _combo(zb, theta_b, p[1]) * trig[p] for p in PAIRS}


# ---------------------------------------------------------------------------
# quadrature fluxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FluxTable:
    uu: float
    ud: float
    du: float
    dd: float
    raw_total: float = float("nan")

    @property
    def total(self) -> float:
        return math.fsum((self.uu, self.ud, self.du, self.dd))

    def as_dict(self) -> dict:
        return {"phi_uu": self.uu, "phi_ud": self.ud, "phi_du": self.du, "phi_dd": self.dd}

    def __getitem__(self, pair: str) -> float:
        return getattr(self, pair)

    @property
    def correlation(self) -> float:
        return (self.uu + self.dd) - (self.ud + self.du)


def check_quadrature(spec: QuadratureSpec) -> None:
    """Refuse Haar rules too coarse to integrate the flux integrands exactly."""
    if spec.dim != 3:
        raise QuadratureOrderError("flux quadrature needs a 3-axis Haar rule")
    for rule, axis in zip(spec.rules, ("alpha", "beta", "gamma")):
        need = MIN_BETA_NODES if rule.kind != numerics.PERIODIC else MIN_PERIODIC_NODES
        if rule.n < need:
            raise QuadratureOrderError(f"{axis}: {rule.n} nodes < {need} required for exactness")


def _one_particle_weights(theta: float, spec: QuadratureSpec) -> dict:
    return {
        ch: numerics.tensor_quadrature(lambda a, b, g, ch=ch: channel_density(EulerTriple(a, b, g), theta, ch), spec)
        for ch in CHANNELS
    }


def raw_fluxes(theta_a: float, theta_b: float, quad: QuadratureSpec | None = None) -> dict:
    """Un-normalized ``int int |A_ij|^2 dmu dmu`` via the one-particle factorization."""
    spec = quad or numerics.haar_spec()
    check_quadrature(spec)
    wa = _one_particle_weights(theta_a, spec)
    wb = _one_particle_weights(theta_b, spec)
    dv = delta_theta(theta_a, theta_b)
    s2, c2 = math.sin(dv) ** 2, math.cos(dv) ** 2
    return {
        "uu": wa["u"] * wb["u"] * s2,
        "ud": wa["u"] * wb["d"] * c2,
        "du": wa["d"] * wb["u"] * c2,
        "dd": wa["d"] * wb["d"] * s2,
    }


def _normalized(raw: dict) -> FluxTable:
    total = math.fsum(raw.values())
    if not total > 0:
        raise ConsistencyError("total coincidence weight vanished")
    return FluxTable(*(raw[p] / total for p in PAIRS), raw_total=total)


def coincidence_fluxes(theta_a: float, theta_b: float, quad: QuadratureSpec | None = None) -> FluxTable:
    return _normalized(raw_fluxes(theta_a, theta_b, quad))


def raw_fluxes_direct(theta_a: float, theta_b: float, nodes: int = 6) -> dict:
    """Six-angle tensor quadrature of ``|A_ij|^2`` without using factorization."""
    spec = numerics.haar_spec(nodes, nodes, nodes)
    (al, be, ga), w = spec.grid()
    za = EulerTriple(al.reshape(-1, 1), be.reshape(-1, 1), ga.reshape(-1, 1))
    zb = EulerTriple(al.reshape(1, -1), be.reshape(1, -1), ga.reshape(1, -1))
    ww = np.multiply.outer(w.ravel(), w.ravel())
    amps = amplitude_coefficients(TwoParticleAngles(za, zb), theta_a, theta_b)
    return {p: math.fsum((np.abs(amps[p]) ** 2 * ww).ravel()) for p in PAIRS}


def correlation(theta_a: float, theta_b: float, quad: QuadratureSpec | None = None) -> float:
    """``E = F_uu + F_dd - F_ud - F_du`` from quadrature fluxes."""
    return coincidence_fluxes(theta_a, theta_b, quad).correlation


# ---------------------------------------------------------------------------
# marginals and no-signalling
# ---------------------------------------------------------------------------


def marginal_bracket(z, theta: float):
    """``cos b cos th + cos a sin b sin th`` for the local triple."""
    zz = z if isinstance(z, EulerTriple) else EulerTriple(*z)
    return np.cos(zz.beta) * math.cos(theta) + np.cos(zz.alpha) * np.sin(zz.beta) * math.sin(theta)


@dataclass
class MarginalTable:
    """Channel densities on one side, remote particle integrated out.

    ``raw(z)`` integrates ``sum_j |A_ij|^2`` over the remote Haar measure by
    direct quadrature; ``__call__`` divides by the grand total so the
    channel totals over the local Haar measure sum to one.
    """

    side: str
    theta_a: float
    theta_b: float
    quad: QuadratureSpec
    grand_total: float = field(init=False)

    def __post_init__(self):
        if self.side not in ("A", "B"):
            raise ValidationError("side must be 'A' or 'B'")
        check_quadrature(self.quad)
        self.grand_total = math.fsum(raw_fluxes(self.theta_a, self.theta_b, self.quad).values())

    @property
    def local_theta(self) -> float:
        return self.theta_a if self.side == "A" else self.theta_b

    def raw(self, z) -> dict:
        z = z if isinstance(z, EulerTriple) else EulerTriple(*z)
        (al, be, ga), w = self.quad.grid()
        remote = EulerTriple(al.ravel(), be.ravel(), ga.ravel())
        angles = TwoParticleAngles(z, remote) if self.side == "A" else TwoParticleAngles(remote, z)
        amps = amplitude_coefficients(angles, self.theta_a, self.theta_b)
        w = w.ravel()
        out = {}
        for ch in CHANNELS:
            pairs = [p for p in PAIRS if (p[0] if self.side == "A" else p[1]) == ch]
            dens = sum(np.abs(amps[p]) ** 2 for p in pairs)
            out[ch] = math.fsum(dens * w)
        return out

    def __call__(self, z) -> dict:
        raw = self.raw(z)
        return {ch: v / self.grand_total for ch, v in raw.items()}

    def closed_form(self, z) -> dict:
        """Raw marginal density ``(1 +/- bracket) / 4``."""
        b = float(marginal_bracket(z, self.local_theta))
        return {"u": 0.25 * (1.0 + b), "d": 0.25 * (1.0 - b)}

    def proportionality(self, z) -> tuple[float, float]:
        """Ratio raw/closed-form per channel pooled, and the relative residual.

        Channels where ``1 +/- bracket`` vanishes carry no information and are
        skipped.
        """
        raw, ref = self.raw(z), self.closed_form(z)
        keys = [ch for ch in CHANNELS if ref[ch] > 1e-12]
        ratio = math.fsum(raw[k] for k in keys) / math.fsum(ref[k] for k in keys)
        resid = max(abs(raw[k] - ratio * ref[k]) / abs(ratio * ref[k]) for k in keys)
        return ratio, resid

    def channel_totals(self) -> dict:
        """Normalized densities integrated over the local Haar measure."""
        (al, be, ga), w = self.quad.grid()
        totals = {ch: [] for ch in CHANNELS}
        for idx in np.ndindex(w.shape):
            vals = self(EulerTriple(al[idx], be[idx], ga[idx]))
            for ch in CHANNELS:
                totals[ch].append(vals[ch] * w[idx])
        return {ch: math.fsum(v) for ch, v in totals.items()}


def marginal_densities(side: str, theta_a: float, theta_b: float, quad: QuadratureSpec | None = None) -> MarginalTable:
    return MarginalTable(side, theta_a, theta_b, quad or numerics.haar_spec())


def no_signalling_deviation(z, theta_local: float, remote_thetas: Sequence[float], side: str = "A", quad: QuadratureSpec | None = None) -> float:
    """Largest change of the local raw channel densities across remote settings."""
    rows = []
    for th in remote_thetas:
        ta, tb = (theta_local, th) if side == "A" else (th, theta_local)
        raw = marginal_densities(side, ta, tb, quad).raw(z)
        rows.append([raw["u"], raw["d"]])
    rows = np.asarray(rows)
    return float(np.max(rows.max(axis=0) - rows.min(axis=0)))


def factorization_gap(angles: TwoParticleAngles, theta_a: float, theta_b: float, pair: str = "uu") -> float:
    """``p(i,j) - p(i) p(j)`` for the lambda-conditioned joint distribution.

    Nonzero values show the joint does not factor into local marginals.
    """
    amps = amplitude_coefficients(angles, theta_a, theta_b)
    w = {p: float(np.abs(amps[p]) ** 2) for p in PAIRS}
    total = math.fsum(w.values())
    i, j = pair
    p_i = math.fsum(w[p] for p in PAIRS if p[0] == i) / total
    p_j = math.fsum(w[p] for p in PAIRS if p[1] == j) / total
    return w[pair] / total - p_i * p_j


# ---------------------------------------------------------------------------
# Bell functionals
# ---------------------------------------------------------------------------


def chsh(settings: Sequence[float], quad: QuadratureSpec | None = None, corr=None) -> float:
    """``|E(a,b) - E(a,b') + E(a',b) + E(a',b')|`` for settings ``(a, a', b, b')``."""
    a, a2, b, b2 = settings
    E = corr or (lambda x, y: correlation(x, y, quad))
    return abs(E(a, b) - E(a, b2) + E(a2, b) + E(a2, b2))


def bell_redhead(delta: float, quad: QuadratureSpec | None = None) -> float:
    """Redhead functional ``|1 + 2 cos 2d - cos 4d|`` from simulated correlations.

    It is the CHSH combination for analyzers ``a = b = 0``, ``a' = 2d``,
    ``b' = -2d``: with ``E = -cos(theta_B - theta_A)`` the sum
    ``-E(a,b) - E(a,b') - E(a',b) + E(a',b')`` equals the bracket.
    """
    x = 2.0 * delta
    E = lambda ta, tb: correlation(ta, tb, quad)  # noqa: E731
    return abs(-E(0.0, 0.0) - E(0.0, -x) - E(x, 0.0) + E(x, -x))


@dataclass(frozen=True)
class BellRow:
    delta: float
    F: float
    E: float
    violated: bool


@dataclass
class BellReport:
    rows: list
    bound: float = 2.0

    @property
    def all_violated(self) -> bool:
        return all(r.violated for r in self.rows)

    @property
    def max_row(self) -> BellRow:
        return max(self.rows, key=lambda r: r.F)


def bell_scan(grid: Sequence[float], quad: QuadratureSpec | None = None, tol: float = 1e-9) -> BellReport:
    """Evaluate F over a grid of half-angle differences; violation is ``F > 2 + tol``."""
    rows = []
    for d in grid:
        F = bell_redhead(d, quad)
        rows.append(BellRow(float(d), F, correlation(0.0, 2.0 * d, quad), F > 2.0 + tol))
    return BellReport(rows)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

CHUNK = 1 << 16
DRAWS_PER_SAMPLE = 6


@dataclass(frozen=True)
class MCConfig:
    samples: int
    seed: int = 0
    streams: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValidationError("samples must be >= 1")
        if self.streams < 1:
            raise ValidationError("streams must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class MCResult:
    table: FluxTable
    stderr: dict
    samples: int
    raw_mean: float

    @property
    def correlation(self) -> float:
        return self.table.correlation

    @property
    def correlation_stderr(self) -> float:
        return self.stderr["E"]


def _worker_cap(requested: int) -> int:
    cap = os.environ.get("CQG_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            pass
    return requested


def _chunk_sums(k: int, n: int, seed: int, theta_a: float, theta_b: float) -> np.ndarray:
    """Sums over chunk ``k`` of the per-pair weights and their cross products.

    The chunk's random numbers come from a stream whose counter depends only
    on ``k``, so results do not depend on how chunks are spread over workers.
    """
    blocks = RandomStream.blocks_for(DRAWS_PER_SAMPLE * CHUNK)
    u = numerics.random_uniform(RandomStream(seed, k * blocks), DRAWS_PER_SAMPLE * n).reshape(DRAWS_PER_SAMPLE, n)
    za = EulerTriple(2 * math.pi * u[0], np.arccos(1.0 - 2.0 * u[1]), 4 * math.pi * u[2])
    zb = EulerTriple(2 * math.pi * u[3], np.arccos(1.0 - 2.0 * u[4]), 4 * math.pi * u[5])
    amps = amplitude_coefficients(TwoParticleAngles(za, zb), theta_a, theta_b)
    w = np.stack([np.abs(amps[p]) ** 2 for p in PAIRS])  # (4, n)
    e = (w[0] + w[3]) - (w[1] + w[2])
    v = np.vstack([w, e[None, :], w.sum(axis=0)[None, :]])  # 6 rows: uu ud du dd E W
    sums = v.sum(axis=1)
    cross = v @ v.T
    return np.concatenate([sums, cross.ravel()])


def mc_run(theta_a: float, theta_b: float, cfg: MCConfig) -> MCResult:
    """Importance-weighted Monte Carlo fluxes with delta-method standard errors.

    Each sample draws both triples from the product Haar measure and adds the
    four weights ``|A_ij|^2``; fractions are ratios to the summed total.
    """
    nchunks = -(-cfg.samples // CHUNK)
    sizes = [min(CHUNK, cfg.samples - k * CHUNK) for k in range(nchunks)]
    workers = _worker_cap(cfg.streams)
    args = [(k, sizes[k], cfg.seed, theta_a, theta_b) for k in range(nchunks)]
    if workers == 1:
        parts = [_chunk_sums(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _chunk_sums(*a), args))
    acc = numerics.fsum_arrays(parts)
    N = cfg.samples
    mean = acc[:6] / N
    second = acc[6:].reshape(6, 6) / N
    W = mean[5]
    if not W > 0:
        raise ConsistencyError("Monte Carlo total weight vanished")
    est = {p: mean[i] / W for i, p in enumerate(PAIRS)}
    est["E"] = mean[4] / W
    stderr = {}
    for i, key in enumerate(list(PAIRS) + ["E"]):
        r = est[key]
        # variance of (x - r W) per sample
        var = second[i, i] - 2 * r * second[i, 5] + r * r * second[5, 5] - (mean[i] - r * W) ** 2
        stderr[key] = math.sqrt(max(var, 0.0) * N / max(N - 1, 1) / N) / W
    table = FluxTable(est["uu"], est["ud"], est["du"], est["dd"], raw_total=W)
    return MCResult(table, stderr, N, W)


_SEED_STRIDE = 0x9E3779B97F4A7C15


def mc_chsh(settings: Sequence[float], cfg: MCConfig) -> tuple[float, float]:
    """CHSH from four independent MC runs; returns value and standard error."""
    a, a2, b, b2 = settings
    pairs = ((a, b), (a, b2), (a2, b), (a2, b2))
    runs = [
        mc_run(x, y, MCConfig(cfg.samples, (cfg.seed + r * _SEED_STRIDE) % 2**64, cfg.streams))
        for r, (x, y) in enumerate(pairs)
    ]
    signs = (1.0, -1.0, 1.0, 1.0)
    value = abs(math.fsum(s * r.correlation for s, r in zip(signs, runs)))
    err = math.sqrt(math.fsum(r.correlation_stderr**2 for r in runs))
    return value, err
