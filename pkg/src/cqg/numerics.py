"""Deterministic numerical kernels.

Tensor-product quadrature, central finite differences with Richardson
extrapolation, and counter-based uniform random streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, QuadratureError, ValidationError

TWO_PI = 2.0 * math.pi

# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

PERIODIC = "periodic"
GAUSS_LEGENDRE = "gauss-legendre"
# Gauss-Legendre in u = cos(x) on x in [0, pi]; integrates f(x) sin(x) dx.
COS_GAUSS_LEGENDRE = "cos-gauss-legendre"

_RULE_KINDS = (PERIODIC, GAUSS_LEGENDRE, COS_GAUSS_LEGENDRE)


@dataclass(frozen=True)
class Rule1D:
    """One axis of a tensor-product rule.

    ``periodic`` places ``n`` equispaced nodes on ``[lo, hi)`` and is exact
    for trigonometric polynomials of degree < n.  ``gauss-legendre`` is the
    usual n-point rule on ``[lo, hi]``.  ``cos-gauss-legendre`` ignores
    ``lo``/``hi`` and integrates ``f(x) sin(x)`` over ``[0, pi]`` through the
    substitution ``u = cos x``, which absorbs the Haar weight.
    """

    kind: str
    n: int
    lo: float = 0.0
    hi: float = TWO_PI

    def __post_init__(self):
        if self.kind not in _RULE_KINDS:
            raise ValidationError(f"unknown rule kind {self.kind!r}")
        if self.n < 2:
            raise ValidationError(f"node count must be >= 2, got {self.n}")
        if self.kind != COS_GAUSS_LEGENDRE and not self.hi > self.lo:
            raise ValidationError("empty integration interval")

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == PERIODIC:
            width = self.hi - self.lo
            x = self.lo + width * np.arange(self.n) / self.n
            return x, np.full(self.n, width / self.n)
        u, w = np.polynomial.legendre.leggauss(self.n)
        if self.kind == GAUSS_LEGENDRE:
            half = 0.5 * (self.hi - self.lo)
            return self.lo + half * (u + 1.0), half * w
        # nodes ordered by increasing angle
        return np.arccos(u[::-1]), w[::-1].copy()


@dataclass(frozen=True)
class QuadratureSpec:
    rules: tuple[Rule1D, ...]
    normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise ValidationError("quadrature spec needs at least one axis")

    @property
    def dim(self) -> int:
        return len(self.rules)

    def grid(self) -> tuple[list[np.ndarray], np.ndarray]:
        """Meshgrid node arrays (``indexing='ij'``) and the product weights."""
        xs, ws = zip(*(r.nodes_weights() for r in self.rules))
        mesh = np.meshgrid(*xs, indexing="ij")
        weight = ws[0]
        for w in ws[1:]:
            weight = np.multiply.outer(weight, w)
        if self.normalize:
            weight = weight / math.fsum(weight.ravel())
        return mesh, weight


def haar_spec(n_alpha: int = 8, n_beta: int = 8, n_gamma: int = 8) -> QuadratureSpec:
    """Normalized Haar rule on (alpha, beta, gamma) with gamma on the double cover."""
    return QuadratureSpec(
        (
            Rule1D(PERIODIC, n_alpha, 0.0, TWO_PI),
            Rule1D(COS_GAUSS_LEGENDRE, n_beta),
            Rule1D(PERIODIC, n_gamma, 0.0, 2.0 * TWO_PI),
        ),
        normalize=True,
    )


def tensor_quadrature(f: Callable[..., np.ndarray], spec: QuadratureSpec) -> float | complex:
    """Integrate ``f`` with a tensor-product rule.

    ``f`` is called once with one meshgrid array per axis and must return an
    array broadcastable to the grid shape.  The weighted sum is accumulated
    with ``math.fsum`` (real and imaginary parts separately), so the result
    does not depend on evaluation order.
    """
    mesh, weight = spec.grid()
    values = np.broadcast_to(np.asarray(f(*mesh)), weight.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        node = tuple(float(m[idx]) for m in mesh)
        raise QuadratureError(f"non-finite integrand at node {node}", node=node)
    terms = (values * weight).ravel()
    if np.iscomplexobj(terms):
        return complex(math.fsum(terms.real), math.fsum(terms.imag))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def _direction(q: np.ndarray, direction) -> np.ndarray:
    if isinstance(direction, (int, np.integer)):
        e = np.zeros_like(q)
        e[int(direction)] = 1.0
        return e
    e = np.asarray(direction, dtype=float)
    if e.shape != q.shape:
        raise ValidationError("direction vector has wrong shape")
    return e


def _richardson(estimates: list, order_step: int = 2):
    """Richardson table for estimates at h, h/2, h/4, ... with error ~ h^2, h^4, ...

    Returns the most extrapolated value and an error estimate (difference to
    the best value one level lower).
    """
    table = [np.asarray(e) for e in estimates]
    best_prev = table[-1]
    k = 1
    while len(table) > 1:
        factor = 2.0 ** (order_step * k)
        best_prev = table[-1]
        table = [(factor * table[i + 1] - table[i]) / (factor - 1.0) for i in range(len(table) - 1)]
        k += 1
    best = table[0]
    err = float(np.max(np.abs(best - best_prev))) if len(estimates) > 1 else float("nan")
    return best, err


def fd_derivative(
    f: Callable[[np.ndarray], float],
    q,
    direction,
    order: int = 1,
    h: float = 1e-3,
    richardson_levels: int = 1,
    domain: Callable[[np.ndarray], bool] | None = None,
):
    """Central-difference directional derivative of order 1 or 2.

    Returns ``(value, error_estimate)``.  ``richardson_levels`` extra step
    halvings are combined by Richardson extrapolation; the error estimate is
    the change produced by the last extrapolation level.  ``domain`` is an
    optional predicate; a stencil point failing it raises ``DomainError``.
    """
    if order not in (1, 2):
        raise ValidationError("order must be 1 or 2")
    q = np.asarray(q, dtype=float)
    e = _direction(q, direction)
    estimates = []
    for level in range(richardson_levels + 1):
        step = h / 2.0**level
        qp, qm = q + step * e, q - step * e
        if domain is not None and not (domain(qp) and domain(qm)):
            raise DomainError(f"finite-difference stencil leaves the domain at step {step}")
        fp, fm = np.asarray(f(qp)), np.asarray(f(qm))
        if order == 1:
            estimates.append((fp - fm) / (2.0 * step))
        else:
            estimates.append((fp - 2.0 * np.asarray(f(q)) + fm) / step**2)
    value, err = _richardson(estimates)
    if richardson_levels == 0:
        err = float("nan")
    return (value.item() if value.ndim == 0 else value), err


def gradient(f: Callable[[np.ndarray], np.ndarray], q, h: float = 1e-3, levels: int = 1) -> np.ndarray:
    """All first partials; output shape ``(n,) + shape(f(q))``."""
    q = np.asarray(q, dtype=float)
    n = q.size
    rows = []
    for i in range(n):
        estimates = []
        for level in range(levels + 1):
            step = h / 2.0**level
            e = np.zeros(n)
            e[i] = step
            estimates.append((np.asarray(f(q + e)) - np.asarray(f(q - e))) / (2.0 * step))
        rows.append(_richardson(estimates)[0])
    return np.stack(rows)


def gradient_and_hessian(
    f: Callable[[np.ndarray], np.ndarray], q, h: float = 1e-3, levels: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """First and second partials sharing one set of stencil evaluations.

    Output shapes ``(n,) + s`` and ``(n, n) + s`` where ``s`` is the shape
    of ``f(q)``.  Mixed partials use the four-point cross stencil; the
    Hessian is symmetric by construction.
    """
    q = np.asarray(q, dtype=float)
    n = q.size
    f0 = np.asarray(f(q))
    grads, hess = [], []
    for level in range(levels + 1):
        s = h / 2.0**level
        eye = np.eye(n) * s
        fp = [np.asarray(f(q + eye[i])) for i in range(n)]
        fm = [np.asarray(f(q - eye[i])) for i in range(n)]
        g = np.stack([(fp[i] - fm[i]) / (2.0 * s) for i in range(n)])
        H = np.empty((n, n) + f0.shape, dtype=np.result_type(f0, float))
        for i in range(n):
            H[i, i] = (fp[i] - 2.0 * f0 + fm[i]) / s**2
            for j in range(i + 1, n):
                fpp = np.asarray(f(q + eye[i] + eye[j]))
                fpm = np.asarray(f(q + eye[i] - eye[j]))
                fmp = np.asarray(f(q - eye[i] + eye[j]))
                fmm = np.asarray(f(q - eye[i] - eye[j]))
                H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * s**2)
        grads.append(g)
        hess.append(H)
    return _richardson(grads)[0], _richardson(hess)[0]


# ---------------------------------------------------------------------------
# counter-based random streams
# ---------------------------------------------------------------------------

_WORDS_PER_BLOCK = 4
_INV_2_53 = 1.0 / 2.0**53


@dataclass(frozen=True)
class RandomStream:
    """Philox4x64 stream addressed by ``(seed, counter)``.

    Block ``c`` of the keyed Philox bijection yields four 64-bit words, so a
    stream opened at ``counter`` produces words from blocks ``counter``,
    ``counter + 1``, ...  Output is a pure function of the pair; streams whose
    counters differ by at least ``ceil(n / 4)`` blocks do not overlap.
    """

    seed: int
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if not 0 <= self.counter < 2**128:
            raise ValidationError("counter must be a 128-bit unsigned integer")

    def advanced(self, blocks: int) -> "RandomStream":
        return RandomStream(self.seed, self.counter + blocks)

    @staticmethod
    def blocks_for(n: int) -> int:
        return -(-n // _WORDS_PER_BLOCK)


def random_uniform(stream: RandomStream, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) from the top 53 bits of each Philox word."""
    gen = np.random.Philox(key=stream.seed, counter=stream.counter)
    raw = gen.random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * _INV_2_53


# ---------------------------------------------------------------------------
# summation helpers
# ---------------------------------------------------------------------------


def fsum_arrays(parts: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise compensated sum of equally shaped arrays."""
    stacked = np.stack([np.asarray(p, dtype=float) for p in parts])
    flat = stacked.reshape(len(parts), -1)
    out = np.array([math.fsum(flat[:, k]) for k in range(flat.shape[1])])
    return out.reshape(stacked.shape[1:])
