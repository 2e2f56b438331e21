"""Small dense numerics shared by every other module.

Finite-difference oracles (gradient/Hessian), symmetric eigenvalue
classification, composite Simpson quadrature and one-dimensional root
bracketing.  All functions are pure; vectors are plain float ndarrays.

The finite-difference routines exist to cross-check closed-form tensors,
so they deliberately do not share any code with the analytic paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import NoBracket, NonFiniteSample

EPS = float(np.finfo(float).eps)
GRAD_STEP = EPS ** (1.0 / 3.0)  # optimal for central first differences
HESS_STEP = EPS ** 0.25  # optimal for central second differences
DEFAULT_QUAD_NODES = 65
DEFAULT_EIG_TOL = 1e-9


class Definiteness(Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    POSITIVE_SEMIDEFINITE_DEGENERATE = "PositiveSemiDefiniteDegenerate"
    INDEFINITE = "Indefinite"
    NEGATIVE_SEMIDEFINITE = "NegativeSemiDefinite"
    NEGATIVE_DEFINITE = "NegativeDefinite"


@dataclass(frozen=True)
class EigenReport:
    """Sorted spectrum of a symmetric matrix plus its sign classification."""

    eigenvalues: np.ndarray
    min_eigenvalue: float
    classification: Definiteness

    @property
    def is_positive_definite(self) -> bool:
        return self.classification is Definiteness.POSITIVE_DEFINITE


def _check_finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteSample(f"non-finite sample while evaluating {what}")
    return values


def _eval_stack(f, points: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on a stack of points, accommodating scalar-only callables.

    Out-of-domain probes are expected to produce NaN (not warnings); the
    caller turns them into NonFiniteSample.
    """
    with np.errstate(all="ignore"):
        out = np.asarray(f(points), dtype=float)
        if out.shape != points.shape[:-1]:
            out = np.array([f(p) for p in points.reshape(-1, points.shape[-1])], dtype=float)
            out = out.reshape(points.shape[:-1])
    return out


def fd_gradient(f, x, scale: float | None = None) -> np.ndarray:
    """Central-difference gradient of a scalar function at ``x``.

    ``scale`` overrides the step heuristic h = cbrt(eps) * max(1, scale);
    by default the norm of ``x`` is used.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    h = GRAD_STEP * max(1.0, float(np.linalg.norm(x)) if scale is None else float(scale))
    probes = np.concatenate([x + h * np.eye(n), x - h * np.eye(n)], axis=0)
    vals = _check_finite(_eval_stack(f, probes), "fd_gradient")
    return (vals[:n] - vals[n:]) / (2.0 * h)


def _hessian_stencil(n: int):
    """Offsets (in units of h) and index bookkeeping for the Hessian stencil."""
    offs = [np.zeros(n)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        offs.append(e.copy())
        offs.append(-e)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            e = np.zeros(n)
            e[i], e[j] = si, sj
            offs.append(e)
    return np.array(offs), pairs


def fd_hessian_batch(f, xs: np.ndarray, scale=None) -> np.ndarray:
    """Hessians of ``f`` at a batch of points, shape (..., n) -> (..., n, n).

    Uses the 4-point mixed stencil; the result is symmetrized exactly.
    """
    xs = np.asarray(xs, dtype=float)
    n = xs.shape[-1]
    batch = xs.shape[:-1]
    if scale is None:
        s = np.maximum(1.0, np.linalg.norm(xs, axis=-1))
    else:
        s = np.maximum(1.0, np.broadcast_to(np.asarray(scale, float), batch).astype(float))
    h = HESS_STEP * s[..., None]  # (..., 1)

    offsets, pairs = _hessian_stencil(n)
    # points: (n_off, ..., n)
    points = xs[None, ...] + offsets.reshape(-1, *([1] * len(batch)), n) * h[None, ...]
    vals = _check_finite(_eval_stack(f, points), "fd_hessian")

    hsq = (h[..., 0]) ** 2
    hess = np.zeros(batch + (n, n))
    f0 = vals[0]
    for i in range(n):
        fp, fm = vals[1 + 2 * i], vals[2 + 2 * i]
        hess[..., i, i] = (fp - 2.0 * f0 + fm) / hsq
    base = 1 + 2 * n
    for k, (i, j) in enumerate(pairs):
        fpp, fpm, fmp, fmm = vals[base + 4 * k : base + 4 * k + 4]
        mixed = (fpp - fpm - fmp + fmm) / (4.0 * hsq)
        hess[..., i, j] = mixed
        hess[..., j, i] = mixed
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))


def fd_hessian(f, x, scale: float | None = None) -> np.ndarray:
    """Symmetric central-difference Hessian of a scalar function at ``x``."""
    x = np.asarray(x, dtype=float)
    return fd_hessian_batch(f, x[None, :], scale=scale)[0]


def eigen_classify(m: np.ndarray, tolerance: float = DEFAULT_EIG_TOL) -> EigenReport:
    """Classify a symmetric matrix by the signs of its spectrum.

    The cut is relative to the spectral norm: eigenvalues within
    ``tolerance * ||m||`` of zero count as degenerate.
    """
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NonFiniteSample("non-finite entries in eigen_classify input")
    eig = np.sort(np.linalg.eigvalsh(0.5 * (m + m.T)))
    scale = max(float(np.max(np.abs(eig))), 1.0 if np.all(eig == 0.0) else 0.0)
    cut = tolerance * scale
    n_pos = int(np.sum(eig > cut))
    n_neg = int(np.sum(eig < -cut))
    n_zero = eig.size - n_pos - n_neg
    if n_neg == 0 and n_zero == 0:
        cls = Definiteness.POSITIVE_DEFINITE
    elif n_neg == 0 and n_pos > 0:
        cls = Definiteness.POSITIVE_SEMIDEFINITE_DEGENERATE
    elif n_pos == 0 and n_zero == 0:
        cls = Definiteness.NEGATIVE_DEFINITE
    elif n_pos == 0:
        cls = Definiteness.NEGATIVE_SEMIDEFINITE
    else:
        cls = Definiteness.INDEFINITE
    if n_pos == 0 and n_neg == 0:
        # all-zero matrix: treat as degenerate PSD
        cls = Definiteness.POSITIVE_SEMIDEFINITE_DEGENERATE
    return EigenReport(eigenvalues=eig, min_eigenvalue=float(eig[0]), classification=cls)


def simpson_weights(nodes: int) -> np.ndarray:
    """Composite Simpson weights on ``nodes`` equispaced points (odd count)."""
    if nodes < 3:
        nodes = 3
    if nodes % 2 == 0:
        nodes += 1
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def integrate_1d(f, a: float, b: float, nodes: int = DEFAULT_QUAD_NODES) -> float:
    """Composite Simpson integral of ``f`` over [a, b]."""
    w = simpson_weights(nodes)
    t = np.linspace(a, b, w.size)
    try:
        y = np.asarray(f(t), dtype=float)
        if y.shape != t.shape:
            raise TypeError
    except (TypeError, ValueError):
        y = np.array([f(ti) for ti in t], dtype=float)
    _check_finite(y, "integrate_1d")
    step = (b - a) / (w.size - 1)
    return float(np.dot(w, y) * step)


def ray_root(g, bracket_hint: float = 1.0, max_doublings: int = 60) -> float:
    """Positive root of ``g`` on (0, inf), found by doubling then bisection.

    ``g`` may be a genuine continuous function or a +/-1 membership
    indicator; the bracket is shrunk to relative width ~1e-13 either way,
    and a secant polish tightens |g| when the values support it.
    """
    lam0 = float(bracket_hint)
    if lam0 <= 0:
        lam0 = 1.0
    g0 = float(g(lam0))
    if not np.isfinite(g0):
        raise NonFiniteSample("non-finite value in ray_root at the hint")
    if g0 == 0.0:
        return lam0

    lo = hi = lam0
    glo = ghi = g0
    found = False
    for k in range(1, max_doublings + 1):
        up = lam0 * (2.0**k)
        gu = float(g(up))
        if np.isfinite(gu) and np.sign(gu) != np.sign(g0):
            if up > lam0:
                lo, glo, hi, ghi = lam0 * (2.0 ** (k - 1)), g0, up, gu
                glo = float(g(lo))
            found = True
            break
        down = lam0 / (2.0**k)
        gd = float(g(down))
        if np.isfinite(gd) and np.sign(gd) != np.sign(g0):
            lo, glo, hi, ghi = down, gd, lam0 / (2.0 ** (k - 1)), g0
            ghi = float(g(hi))
            found = True
            break
    if not found:
        raise NoBracket(f"no sign change within {max_doublings} doublings of {lam0}")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-14 * max(1.0, mid):
            break
        gm = float(g(mid))
        if gm == 0.0:
            return mid
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm

    lam = 0.5 * (lo + hi)
    # secant polish; a no-op for indicator-style g (values stuck at +/-1)
    a, b_, fa, fb = lo, hi, glo, ghi
    for _ in range(8):
        if fb == fa:
            break
        c = b_ - fb * (b_ - a) / (fb - fa)
        if not np.isfinite(c) or c <= 0:
            break
        fc = float(g(c))
        a, fa, b_, fb = b_, fb, c, fc
        if abs(fc) <= 1e-13 * max(1.0, abs(c)):
            return c
    gl = float(g(lam))
    if abs(fb) < abs(gl):
        return b_
    return lam
