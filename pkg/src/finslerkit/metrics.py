"""Conic pseudo-Finsler metrics on single-chart manifolds.

A metric is a positively homogeneous fiberwise pseudo-norm defined on an
open cone of the tangent bundle of an open subset of R^N.  Evaluation is
vectorized: value/domain/tensor callables accept broadcastable stacks of
(base, vector) pairs, which is what makes the scans and graph builders in
the rest of the package fast without any compiled extension.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtri

from .errors import NonFiniteSample, OutsideDomain
from .minkowski import GaugeNorm
from .numkernel import (
    DEFAULT_EIG_TOL,
    EigenReport,
    eigen_classify,
    fd_hessian_batch,
)

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


@dataclass(frozen=True)
class ChartManifold:
    """An open subset of R^N used as a single coordinate chart."""

    dimension: int
    chart_member: Callable[[np.ndarray], np.ndarray] = None
    probe_point: np.ndarray = None
    sample_halfwidth: float = 1.0

    def __post_init__(self):
        if self.chart_member is None:
            object.__setattr__(
                self, "chart_member", lambda x: np.ones(np.asarray(x, float).shape[:-1], dtype=bool)
            )
        if self.probe_point is None:
            object.__setattr__(self, "probe_point", np.zeros(self.dimension))
        else:
            object.__setattr__(self, "probe_point", np.asarray(self.probe_point, dtype=float))

    def contains(self, x) -> np.ndarray:
        return np.asarray(self.chart_member(np.asarray(x, dtype=float)), dtype=bool)


def whole_plane(dimension: int = 2) -> ChartManifold:
    return ChartManifold(dimension=dimension)


@dataclass(frozen=True)
class TangentVec:
    """A tangent vector: chart point plus fiber vector."""

    base: np.ndarray
    vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "vec", np.asarray(self.vec, dtype=float))


def kronecker_sequence(count: int, dim: int, skip: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points in [0,1)^dim."""
    alphas = np.sqrt(np.array(_PRIMES[:dim], dtype=float))
    i = np.arange(skip + 1, skip + count + 1, dtype=float)[:, None]
    return np.mod(0.5 + i * alphas[None, :], 1.0)


def unit_directions(dim: int, count: int) -> np.ndarray:
    """Deterministic low-discrepancy directions on the unit sphere."""
    if dim == 1:
        signs = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
        return signs[:, None]
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    if dim == 3:
        # Fibonacci sphere lattice
        golden = (1.0 + np.sqrt(5.0)) / 2.0
        i = np.arange(count, dtype=float)
        z = 1.0 - (2.0 * i + 1.0) / count
        phi = 2.0 * np.pi * i / golden
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    u = kronecker_sequence(count, dim)
    g = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


@dataclass(frozen=True)
class RiemannAtom:
    """Position-dependent positive-definite matrix field."""

    metric_matrix: Callable[[np.ndarray], np.ndarray]

    def matrix(self, x) -> np.ndarray:
        return np.asarray(self.metric_matrix(np.asarray(x, dtype=float)), dtype=float)

    def square_length(self, x, v) -> np.ndarray:
        g = self.matrix(x)
        v = np.asarray(v, dtype=float)
        return np.einsum("...i,...ij,...j->...", v, g, v)


def constant_riemann(matrix) -> RiemannAtom:
    g0 = np.asarray(matrix, dtype=float)

    def metric_matrix(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(g0, x.shape[:-1] + g0.shape)

    return RiemannAtom(metric_matrix=metric_matrix)


def euclidean_atom(dimension: int) -> RiemannAtom:
    return constant_riemann(np.eye(dimension))


@dataclass(frozen=True)
class OneFormAtom:
    """Position-dependent covector field beta = sum b_i(x) dx^i."""

    covector: Callable[[np.ndarray], np.ndarray]

    def coeffs(self, x) -> np.ndarray:
        return np.asarray(self.covector(np.asarray(x, dtype=float)), dtype=float)

    def pair(self, x, v) -> np.ndarray:
        return np.einsum("...i,...i->...", self.coeffs(x), np.asarray(v, dtype=float))


def constant_oneform(coeffs) -> OneFormAtom:
    b0 = np.asarray(coeffs, dtype=float)

    def covector(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(b0, x.shape[:-1] + b0.shape)

    return OneFormAtom(covector=covector)


@dataclass(frozen=True)
class ConicMetric:
    """Behavioral contract of a conic pseudo-Finsler metric on one chart.

    ``value_fn``/``domain_fn``/``tensor_fn`` take broadcastable stacks
    (base, vec) of shape (..., N).  ``tensor_fn`` is the closed-form
    fundamental tensor when one is known; finite differences of F^2/2 are
    the fallback (and, in tests, the oracle the closed form is checked
    against).
    """

    manifold: ChartManifold
    value_fn: Callable = field(repr=False)
    domain_fn: Callable = field(repr=False)
    tensor_fn: Optional[Callable] = field(default=None, repr=False)
    zero_in_domain: bool = False
    position_independent: bool = False
    name: str = ""

    @property
    def dimension(self) -> int:
        return self.manifold.dimension

    def in_domain_many(self, base, vec) -> np.ndarray:
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        with np.errstate(all="ignore"):
            ok = np.asarray(self.domain_fn(base, vec), dtype=bool)
        nonzero = np.linalg.norm(vec, axis=-1) > 0.0
        return ok & nonzero & self.manifold.contains(base)

    def F_many(self, base, vec) -> np.ndarray:
        """Vectorized metric values; NaN outside the domain."""
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        ok = self.in_domain_many(base, vec)
        with np.errstate(all="ignore"):
            val = np.asarray(self.value_fn(base, vec), dtype=float)
        return np.where(ok, val, np.nan)

    def half_square(self, base, vec) -> np.ndarray:
        val = self.F_many(base, vec)
        return 0.5 * val * val

    def tensor_many(self, base, vec) -> np.ndarray:
        """Fundamental tensors, shape (..., N, N).

        Entries for out-of-domain inputs are unspecified (NaN or garbage);
        use :func:`tensor` for the checked pointwise operation.
        """
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        if self.tensor_fn is not None:
            with np.errstate(all="ignore"):
                return np.asarray(self.tensor_fn(base, vec), dtype=float)
        return self.fd_tensor_many(base, vec)

    def fd_tensor_many(self, base, vec) -> np.ndarray:
        """Finite-difference Hessian of F^2/2 in the fiber variable.

        The probe step follows max(1, |v|), so relative accuracy is best
        for vectors near unit scale; the tensor itself is scale-invariant.
        """
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        base_b, vec_b = np.broadcast_arrays(base, vec)

        def f(vs):
            return self.half_square(base_b, vs)

        return fd_hessian_batch(f, vec_b, scale=np.linalg.norm(vec_b, axis=-1))

    def with_name(self, name: str) -> "ConicMetric":
        return replace(self, name=name)


# ---------------------------------------------------------------------------
# Constructors for the base atoms
# ---------------------------------------------------------------------------


def riemann_metric(atom: RiemannAtom, manifold: ChartManifold = None, name: str = "") -> ConicMetric:
    """Square root of a Riemannian metric; strongly convex everywhere."""
    if manifold is None:
        g0 = np.asarray(atom.metric_matrix(np.zeros(2)), dtype=float)
        manifold = whole_plane(g0.shape[-1])

    def value_fn(base, vec):
        return np.sqrt(np.maximum(atom.square_length(base, vec), 0.0))

    def domain_fn(base, vec):
        vec = np.asarray(vec, dtype=float)
        return np.ones(np.broadcast(np.asarray(base)[..., 0], vec[..., 0]).shape, dtype=bool)

    def tensor_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        g = atom.matrix(base)
        shape = np.broadcast(base[..., 0], vec[..., 0]).shape
        return np.broadcast_to(g, shape + g.shape[-2:])

    # position independence detected for the constant-matrix fast path
    x_probe = np.stack([manifold.probe_point, manifold.probe_point + 0.37])
    const = bool(np.allclose(atom.matrix(x_probe[0]), atom.matrix(x_probe[1])))
    return ConicMetric(
        manifold=manifold,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=tensor_fn,
        zero_in_domain=True,
        position_independent=const,
        name=name or "riemann",
    )


def euclidean_metric(dimension: int = 2) -> ConicMetric:
    return riemann_metric(euclidean_atom(dimension), whole_plane(dimension), name="euclidean")


def oneform_metric(form: OneFormAtom, manifold: ChartManifold = None, name: str = "") -> ConicMetric:
    """F = beta on the half-space cone {beta > 0}: a degenerate conic metric."""
    if manifold is None:
        b0 = np.asarray(form.coeffs(np.zeros(2)), dtype=float)
        manifold = whole_plane(b0.shape[-1])

    def value_fn(base, vec):
        return form.pair(base, vec)

    def domain_fn(base, vec):
        return form.pair(base, vec) > 0.0

    def tensor_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        b = np.broadcast_to(
            form.coeffs(base), np.broadcast(base[..., 0], vec[..., 0]).shape + (manifold.dimension,)
        )
        return b[..., :, None] * b[..., None, :]

    x_probe = np.stack([manifold.probe_point, manifold.probe_point + 0.37])
    const = bool(np.allclose(form.coeffs(x_probe[0]), form.coeffs(x_probe[1])))
    return ConicMetric(
        manifold=manifold,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=tensor_fn,
        zero_in_domain=False,
        position_independent=const,
        name=name or "oneform",
    )


def minkowski_metric(gauge: GaugeNorm, manifold: ChartManifold = None, name: str = "") -> ConicMetric:
    """Lift a fixed Minkowski conic pseudo-norm to a position-independent metric."""
    if manifold is None:
        manifold = whole_plane(gauge.dimension)

    def value_fn(base, vec):
        vec = np.asarray(vec, dtype=float)
        val = np.asarray(gauge.value_unchecked(vec), dtype=float)
        shape = np.broadcast(np.asarray(base)[..., 0], vec[..., 0]).shape
        return np.broadcast_to(val, shape)

    def domain_fn(base, vec):
        vec = np.asarray(vec, dtype=float)
        ok = np.asarray(gauge.member(vec), dtype=bool)
        shape = np.broadcast(np.asarray(base)[..., 0], vec[..., 0]).shape
        return np.broadcast_to(ok, shape)

    dirs = unit_directions(gauge.dimension, 64)
    full = bool(np.all(gauge.member(dirs)))
    return ConicMetric(
        manifold=manifold,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=None,
        zero_in_domain=full,
        position_independent=True,
        name=name or f"gauge[{gauge.source.value}]",
    )


# ---------------------------------------------------------------------------
# Pointwise operations
# ---------------------------------------------------------------------------


def _require_in_domain(m: ConicMetric, v: TangentVec, allow_zero: bool = False):
    vec_norm = float(np.linalg.norm(v.vec))
    if vec_norm == 0.0:
        if allow_zero and m.zero_in_domain:
            return
        raise OutsideDomain("the zero vector is outside this metric's domain")
    if not bool(m.in_domain_many(v.base, v.vec)):
        raise OutsideDomain(
            f"vector {np.array2string(v.vec, precision=4)} at "
            f"{np.array2string(v.base, precision=4)} is outside the conic domain"
        )


def eval_F(m: ConicMetric, v: TangentVec) -> float:
    """Metric value at an admissible tangent vector."""
    if float(np.linalg.norm(v.vec)) == 0.0:
        if m.zero_in_domain:
            return 0.0
        raise OutsideDomain("the zero vector is outside this metric's domain")
    _require_in_domain(m, v)
    out = float(m.F_many(v.base, v.vec))
    if not np.isfinite(out):
        raise NonFiniteSample("metric value is not finite")
    return out


def tensor(m: ConicMetric, v: TangentVec) -> np.ndarray:
    """Fundamental tensor at v (closed form when available, else FD oracle)."""
    _require_in_domain(m, v)
    g = m.tensor_many(v.base, v.vec)
    if not np.all(np.isfinite(g)):
        raise NonFiniteSample("fundamental tensor evaluation hit the domain boundary")
    return g


def angular_tensor(m: ConicMetric, v: TangentVec) -> np.ndarray:
    """g_v minus its rank-one part along v; kernel contains v."""
    g = tensor(m, v)
    f2 = float(m.F_many(v.base, v.vec)) ** 2
    gv = g @ v.vec
    return g - np.outer(gv, gv) / f2


def classify_point(m: ConicMetric, v: TangentVec, tolerance: float = DEFAULT_EIG_TOL) -> EigenReport:
    return eigen_classify(tensor(m, v), tolerance)


@dataclass(frozen=True)
class ScanEntry:
    direction: np.ndarray
    in_domain: bool
    report: Optional[EigenReport]

    @property
    def status(self) -> str:
        return self.report.classification.value if self.in_domain else "OutsideDomain"


def convexity_scan(
    m: ConicMetric, base, samples: int, tolerance: float = DEFAULT_EIG_TOL
) -> list[ScanEntry]:
    """Classify the fundamental tensor on a deterministic fan of directions."""
    base = np.asarray(base, dtype=float)
    dirs = unit_directions(m.dimension, samples)
    ok = m.in_domain_many(np.broadcast_to(base, dirs.shape), dirs)
    entries: list[ScanEntry] = []
    if np.any(ok):
        tensors = m.tensor_many(np.broadcast_to(base, dirs[ok].shape), dirs[ok])
    idx = 0
    for d, good in zip(dirs, ok):
        if not good:
            entries.append(ScanEntry(direction=d, in_domain=False, report=None))
            continue
        g = tensors[idx]
        idx += 1
        if not np.all(np.isfinite(g)):
            entries.append(ScanEntry(direction=d, in_domain=False, report=None))
            continue
        entries.append(ScanEntry(direction=d, in_domain=True, report=eigen_classify(g, tolerance)))
    return entries


def lower_bound_check(m: ConicMetric, bound: RiemannAtom, base_samples: int, dir_samples: int) -> bool:
    """Does F(v) >= sqrt(g0(v,v)) hold on all sampled admissible vectors?"""
    man = m.manifold
    offsets = 2.0 * kronecker_sequence(base_samples, man.dimension) - 1.0
    bases = man.probe_point[None, :] + man.sample_halfwidth * offsets
    bases = bases[man.contains(bases)]
    if bases.shape[0] == 0:
        bases = man.probe_point[None, :]
    dirs = unit_directions(man.dimension, dir_samples)

    B = bases[:, None, :]  # (nb, 1, N)
    D = dirs[None, :, :]  # (1, nd, N)
    ok = m.in_domain_many(np.broadcast_to(B, (bases.shape[0], dirs.shape[0], man.dimension)), D)
    if not np.any(ok):
        return True
    fvals = m.F_many(np.broadcast_to(B, ok.shape + (man.dimension,)), np.broadcast_to(D, ok.shape + (man.dimension,)))
    gvals = np.sqrt(np.maximum(bound.square_length(B, D), 0.0))
    slack = 1e-12 * np.maximum(1.0, gvals)
    return bool(np.all(fvals[ok] >= (gvals - slack)[ok]))
