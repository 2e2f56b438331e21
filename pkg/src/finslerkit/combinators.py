"""Homogeneous combinations of conic Finsler metrics and one-forms.

Everything here produces metrics with closed-form fundamental tensors:
general degree-2-homogeneous combinations, q-power means, profile-based
(F0, beta) families (Randers / Kropina / Matsumoto and relatives), the
(F1, F2) generalization, determinant and convexity characterizations,
and the two reversibilization constructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BadExponent, DomainEmpty, OutsideDomain, OutsideProfile
from .metrics import (
    ChartManifold,
    ConicMetric,
    OneFormAtom,
    TangentVec,
    tensor,
    unit_directions,
)
from .numkernel import (
    DEFAULT_EIG_TOL,
    Definiteness,
    eigen_classify,
    fd_gradient,
    fd_hessian,
)

DOMAIN_PROBE_DIRECTIONS = 64


# ---------------------------------------------------------------------------
# Scalar profiles for (F0, beta) and (F1, F2) metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiProfile:
    """Positive scalar profile with two derivatives on open interval(s).

    Carries the derived quantities used by all tensor formulas:
    psi = phi^2, phi1 = 2 psi - s psi' (= 2 phi (phi - s phi')) and
    phi2 = 2 psi psi'' - psi'^2 (= 4 phi^3 phi'').
    """

    phi: Callable[[np.ndarray], np.ndarray]
    phi_dot: Callable[[np.ndarray], np.ndarray]
    phi_ddot: Callable[[np.ndarray], np.ndarray]
    intervals: tuple[tuple[float, float], ...] = ((-np.inf, np.inf),)
    name: str = "custom"

    def contains(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        ok = np.zeros(s.shape, dtype=bool)
        for lo, hi in self.intervals:
            ok |= (s > lo) & (s < hi)
        return ok & np.isfinite(s)

    def representative(self) -> float:
        """Some point of the first interval (used as a filler for masked slots)."""
        lo, hi = self.intervals[0]
        if np.isfinite(lo) and np.isfinite(hi):
            return 0.5 * (lo + hi)
        if np.isfinite(lo):
            return lo + 1.0
        if np.isfinite(hi):
            return hi - 1.0
        return 0.0

    def require(self, s) -> None:
        if not np.all(self.contains(s)):
            raise OutsideProfile(f"argument outside the profile interval(s) {self.intervals}")

    def psi(self, s):
        p = np.asarray(self.phi(s), dtype=float)
        return p * p

    def psi_dot(self, s):
        return 2.0 * np.asarray(self.phi(s), float) * np.asarray(self.phi_dot(s), float)

    def psi_ddot(self, s):
        pd = np.asarray(self.phi_dot(s), float)
        return 2.0 * (pd * pd + np.asarray(self.phi(s), float) * np.asarray(self.phi_ddot(s), float))

    def phi1(self, s):
        s = np.asarray(s, dtype=float)
        return 2.0 * self.psi(s) - s * self.psi_dot(s)

    def phi2(self, s):
        return 2.0 * self.psi(s) * self.psi_ddot(s) - self.psi_dot(s) ** 2


def randers_profile() -> PhiProfile:
    return PhiProfile(
        phi=lambda s: 1.0 + np.asarray(s, float),
        phi_dot=lambda s: np.ones_like(np.asarray(s, float)),
        phi_ddot=lambda s: np.zeros_like(np.asarray(s, float)),
        intervals=((-1.0, np.inf),),
        name="randers",
    )


def kropina_profile(q: float = 1.0) -> PhiProfile:
    if q <= 0:
        raise BadExponent("Kropina exponent must satisfy q > 0")

    def phi(s):
        return np.abs(np.asarray(s, float)) ** -q

    def phi_dot(s):
        s = np.asarray(s, float)
        return -q * np.abs(s) ** -q / s

    def phi_ddot(s):
        s = np.asarray(s, float)
        return q * (q + 1.0) * np.abs(s) ** -q / (s * s)

    return PhiProfile(
        phi=phi,
        phi_dot=phi_dot,
        phi_ddot=phi_ddot,
        intervals=((-np.inf, 0.0), (0.0, np.inf)),
        name=f"kropina[q={q:g}]",
    )


def matsumoto_profile(q: float = 1.0) -> PhiProfile:
    if not (q > 0 or q <= -1):
        raise BadExponent("Matsumoto exponent must satisfy q > 0 or q <= -1")

    def phi(s):
        return np.abs(1.0 - np.asarray(s, float)) ** -q

    def phi_dot(s):
        u = 1.0 - np.asarray(s, float)
        return q * np.abs(u) ** -q / u

    def phi_ddot(s):
        u = 1.0 - np.asarray(s, float)
        return q * (q + 1.0) * np.abs(u) ** -q / (u * u)

    return PhiProfile(
        phi=phi,
        phi_dot=phi_dot,
        phi_ddot=phi_ddot,
        intervals=((-np.inf, 1.0), (1.0, np.inf)),
        name=f"matsumoto[q={q:g}]",
    )


def square_over_f0_profile() -> PhiProfile:
    """Profile of (F0 + beta)^2 / F0 on the band |s| < 1."""

    def phi(s):
        u = 1.0 + np.asarray(s, float)
        return u * u

    return PhiProfile(
        phi=phi,
        phi_dot=lambda s: 2.0 * (1.0 + np.asarray(s, float)),
        phi_ddot=lambda s: 2.0 * np.ones_like(np.asarray(s, float)),
        intervals=((-1.0, 1.0),),
        name="square_over_f0",
    )


def phi_convexity_ok(profile: PhiProfile, s: float, tolerance: float = DEFAULT_EIG_TOL) -> bool:
    """Pointwise sufficient condition phi1 > 0 and phi2 >= 0 at the ratio s."""
    profile.require(s)
    return bool(profile.phi1(s) > tolerance) and bool(profile.phi2(s) >= -tolerance)


def chern_shen_check(profile: PhiProfile, b0: float, grid: int = 64) -> bool:
    """Grid check of (phi - s phi') + (b^2 - s^2) phi'' > 0 for |s| <= b < b0."""
    bs = b0 * np.arange(grid) / grid
    for b in bs:
        s = np.linspace(-b, b, max(grid, 3))
        profile.require(s)
        val = (
            np.asarray(profile.phi(s), float)
            - s * np.asarray(profile.phi_dot(s), float)
            + (b * b - s * s) * np.asarray(profile.phi_ddot(s), float)
        )
        if not np.all(val > 0.0):
            return False
    return True


# ---------------------------------------------------------------------------
# General homogeneous combinations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LCombiner:
    """Degree-2 homogeneous combination law on n metrics and m one-forms.

    ``L`` maps (x, p) with x in the cone B of R^(n+m) and p a chart point
    to a positive scalar.  ``grad_L``/``hess_L`` are its first and second
    x-derivatives; when omitted they fall back to finite differences of L
    (with correspondingly looser oracle tolerances).
    """

    n: int
    m: int
    L: Callable = field(repr=False)
    grad_L: Optional[Callable] = field(default=None, repr=False)
    hess_L: Optional[Callable] = field(default=None, repr=False)
    cone_B: Callable = field(default=None, repr=False)
    position_independent: bool = True
    name: str = "L"

    def __post_init__(self):
        if self.cone_B is None:
            object.__setattr__(
                self, "cone_B", lambda x: np.ones(np.asarray(x, float).shape[:-1], dtype=bool)
            )

    def value(self, x, p=None) -> np.ndarray:
        return np.asarray(self.L(np.asarray(x, dtype=float), p), dtype=float)

    def grad(self, x, p=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad_L is not None:
            return np.asarray(self.grad_L(x, p), dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        out = np.stack([fd_gradient(lambda y: self.value(y, p), row) for row in flat])
        return out.reshape(x.shape)

    def hess(self, x, p=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess_L is not None:
            return np.asarray(self.hess_L(x, p), dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        out = np.stack([fd_hessian(lambda y: self.value(y, p), row) for row in flat])
        return out.reshape(x.shape + (x.shape[-1],))

    def in_cone(self, x) -> np.ndarray:
        return np.asarray(self.cone_B(np.asarray(x, dtype=float)), dtype=bool)


def sum_combiner(n: int) -> LCombiner:
    """L = (x_1 + ... + x_n)^2, the plain sum of metrics."""

    def L(x, p=None):
        t = np.sum(x, axis=-1)
        return t * t

    def grad_L(x, p=None):
        t = np.sum(x, axis=-1)
        return np.broadcast_to((2.0 * t)[..., None], x.shape).copy()

    def hess_L(x, p=None):
        return np.broadcast_to(2.0 * np.ones((n, n)), x.shape + (n,)).copy()

    def cone_B(x):
        return np.sum(x, axis=-1) > 0.0

    return LCombiner(n=n, m=0, L=L, grad_L=grad_L, hess_L=hess_L, cone_B=cone_B, name=f"sum[{n}]")


def power_combiner(n: int, m: int, q: float) -> LCombiner:
    """L = (sum |x_r|^q)^(2/q), the q-power-mean combination."""
    if q < 1.0:
        raise BadExponent("power combination requires q >= 1")
    d = n + m

    def U(x):
        return np.sum(np.abs(x) ** q, axis=-1)

    def L(x, p=None):
        return U(x) ** (2.0 / q)

    def grad_L(x, p=None):
        x = np.asarray(x, dtype=float)
        u = U(x)
        return 2.0 * x * np.abs(x) ** (q - 2.0) * (u ** (2.0 / q - 1.0))[..., None]

    def hess_L(x, p=None):
        x = np.asarray(x, dtype=float)
        u = U(x)
        aq = np.abs(x) ** (q - 2.0)
        diag = 2.0 * (q - 1.0) * aq * (u ** (2.0 / q - 1.0))[..., None]
        w = x * aq
        cross = 2.0 * (2.0 - q) * (u ** (2.0 / q - 2.0))[..., None, None] * (
            w[..., :, None] * w[..., None, :]
        )
        out = cross
        idx = np.arange(d)
        out[..., idx, idx] += diag
        return out

    def cone_B(x):
        x = np.asarray(x, dtype=float)
        ok = U(x) > 0.0
        if q < 2.0 and m > 0:
            ok = ok & np.all(np.abs(x[..., n:]) > 0.0, axis=-1)
        return ok

    return LCombiner(n=n, m=m, L=L, grad_L=grad_L, hess_L=hess_L, cone_B=cone_B, name=f"power[q={q:g}]")


@dataclass(frozen=True)
class ABCReport:
    A_ok: bool
    B_ok: bool
    C_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.A_ok and self.B_ok and self.C_ok


def check_conditions_ABC(
    combiner: LCombiner, point, base=None, tolerance: float = DEFAULT_EIG_TOL
) -> ABCReport:
    """Positive-semidefiniteness conditions of the combination law at a point."""
    x = np.asarray(point, dtype=float)
    grad = combiner.grad(x, base)
    hess = combiner.hess(x, base)
    a_ok = bool(np.all(grad[: combiner.n] >= -tolerance)) if combiner.n else True
    cls = eigen_classify(hess, tolerance).classification
    b_ok = cls in (Definiteness.POSITIVE_DEFINITE, Definiteness.POSITIVE_SEMIDEFINITE_DEGENERATE)
    c_ok = bool(np.sum(grad[: combiner.n]) > tolerance) if combiner.n else False
    return ABCReport(A_ok=a_ok, B_ok=b_ok, C_ok=c_ok)


def _metric_pieces(m: ConicMetric, base, vec):
    """(F, g, u = g v, h = g - u u^T / F^2) batched over (base, vec)."""
    F = m.F_many(base, vec)
    g = m.tensor_many(base, vec)
    u = np.einsum("...ij,...j->...i", g, np.asarray(vec, dtype=float))
    h = g - u[..., :, None] * u[..., None, :] / (F * F)[..., None, None]
    return F, g, u, h


def _shared_manifold(metrics: Sequence[ConicMetric]) -> ChartManifold:
    man = metrics[0].manifold
    for mk in metrics[1:]:
        if mk.manifold.dimension != man.dimension:
            raise ValueError("combined metrics must share one chart dimension")
    return man


def _probe_nonempty(metric: ConicMetric) -> None:
    man = metric.manifold
    dirs = unit_directions(man.dimension, DOMAIN_PROBE_DIRECTIONS)
    base = np.broadcast_to(man.probe_point, dirs.shape)
    if not np.any(metric.in_domain_many(base, dirs)):
        raise DomainEmpty("no probed direction is admissible for the combined metric")


def _zero_convention(metric: ConicMetric) -> bool:
    man = metric.manifold
    dirs = unit_directions(man.dimension, DOMAIN_PROBE_DIRECTIONS)
    base = np.broadcast_to(man.probe_point, dirs.shape)
    return bool(np.all(metric.in_domain_many(base, dirs)))


def _forms_constant(forms: Sequence[OneFormAtom], man: ChartManifold) -> bool:
    if not forms:
        return True
    p0 = man.probe_point
    p1 = p0 + 0.37
    return all(np.allclose(f.coeffs(p0), f.coeffs(p1)) for f in forms)


def combine(
    combiner: LCombiner, metrics: Sequence[ConicMetric], forms: Sequence[OneFormAtom] = ()
) -> ConicMetric:
    """Metric F = sqrt(L(F_1..F_n, beta_1..beta_m)) with its closed-form tensor.

    The tensor assembles the angular parts of the ingredient metrics
    weighted by the first derivatives of L plus the quadratic form of
    Hess(L) in the tuple of fiber derivatives.
    """
    metrics = list(metrics)
    forms = list(forms)
    if len(metrics) != combiner.n or len(forms) != combiner.m:
        raise ValueError(
            f"combiner expects {combiner.n} metrics and {combiner.m} forms, "
            f"got {len(metrics)} and {len(forms)}"
        )
    if combiner.n == 0:
        raise ValueError("at least one metric ingredient is required")
    man = _shared_manifold(metrics)

    def args_of(base, vec):
        cols = [mk.F_many(base, vec) for mk in metrics]
        cols += [fm.pair(base, vec) for fm in forms]
        return np.stack(np.broadcast_arrays(*cols), axis=-1) if len(cols) > 1 else np.asarray(cols[0])[..., None]

    def value_fn(base, vec):
        x = args_of(base, vec)
        return np.sqrt(np.maximum(combiner.value(x, base), 0.0))

    def domain_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        ok = np.ones(np.broadcast(base[..., 0], vec[..., 0]).shape, dtype=bool)
        for mk in metrics:
            ok = ok & mk.in_domain_many(base, vec)
        x = args_of(base, vec)
        ok = ok & np.all(np.isfinite(x), axis=-1) & combiner.in_cone(x)
        return ok

    def tensor_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        base, vec = np.broadcast_arrays(base, vec)
        N = vec.shape[-1]
        rows = []
        term1 = 0.0
        x = args_of(base, vec)
        grad = combiner.grad(x, base)
        hess = combiner.hess(x, base)
        for k, mk in enumerate(metrics):
            Fk, _, uk, hk = _metric_pieces(mk, base, vec)
            term1 = term1 + (grad[..., k] / Fk)[..., None, None] * hk
            rows.append(uk / Fk[..., None])
        for fm in forms:
            b = np.broadcast_to(fm.coeffs(base), vec.shape)
            rows.append(b)
        J = np.stack(rows, axis=-2)  # (..., n+m, N)
        term2 = np.einsum("...ri,...rs,...sj->...ij", J, hess, J)
        return 0.5 * (term1 + term2)

    out = ConicMetric(
        manifold=man,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=tensor_fn,
        zero_in_domain=False,
        position_independent=(
            combiner.position_independent
            and all(mk.position_independent for mk in metrics)
            and _forms_constant(forms, man)
        ),
        name=f"{combiner.name}({', '.join(mk.name for mk in metrics)})",
    )
    _probe_nonempty(out)
    return ConicMetric(
        manifold=out.manifold,
        value_fn=out.value_fn,
        domain_fn=out.domain_fn,
        tensor_fn=out.tensor_fn,
        zero_in_domain=_zero_convention(out),
        position_independent=out.position_independent,
        name=out.name,
    )


def power_q_combine(
    metrics: Sequence[ConicMetric], forms: Sequence[OneFormAtom], q: float
) -> ConicMetric:
    """q-power combination with the explicit closed-form tensor.

    The tensor here is written out term by term (angular parts, the
    pairwise difference squares and the rank-one head), independently of
    the generic Hessian assembly in :func:`combine`; the two routes are
    cross-checked in the tests.
    """
    if q < 1.0:
        raise BadExponent("power combination requires q >= 1")
    metrics = list(metrics)
    forms = list(forms)
    if not metrics:
        raise BadExponent("power combination needs at least one metric (n >= 1)")
    man = _shared_manifold(metrics)
    n, mm = len(metrics), len(forms)

    def value_fn(base, vec):
        total = 0.0
        for mk in metrics:
            total = total + mk.F_many(base, vec) ** q
        for fm in forms:
            total = total + np.abs(fm.pair(base, vec)) ** q
        return total ** (1.0 / q)

    def domain_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        ok = np.ones(np.broadcast(base[..., 0], vec[..., 0]).shape, dtype=bool)
        for mk in metrics:
            ok = ok & mk.in_domain_many(base, vec)
        if q < 2.0:
            for fm in forms:
                ok = ok & (np.abs(fm.pair(base, vec)) > 0.0)
        return ok

    def tensor_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        base, vec = np.broadcast_arrays(base, vec)
        Fs, us, hs, a_vecs = [], [], [], []
        for mk in metrics:
            Fk, _, uk, hk = _metric_pieces(mk, base, vec)
            Fs.append(Fk)
            us.append(uk)
            hs.append(hk)
            a_vecs.append(uk / (Fk * Fk)[..., None])
        betas, bcoefs = [], []
        for fm in forms:
            betas.append(fm.pair(base, vec))
            bcoefs.append(np.broadcast_to(fm.coeffs(base), vec.shape))

        R = sum(Fk**q for Fk in Fs) + sum(np.abs(bv) ** q for bv in betas)
        R = R ** (1.0 / q)

        def outer(w):
            return w[..., :, None] * w[..., None, :]

        T = np.zeros(vec.shape + (vec.shape[-1],))
        for Fk, hk in zip(Fs, hs):
            T = T + (R**q * Fk ** (q - 2.0))[..., None, None] * hk
        if q != 1.0:
            for k in range(n):
                for l in range(k + 1, n):
                    coef = (q - 1.0) * (Fs[k] * Fs[l]) ** q
                    T = T + coef[..., None, None] * outer(a_vecs[k] - a_vecs[l])
            for mu in range(mm):
                for nu in range(mu + 1, mm):
                    coef = (q - 1.0) * np.abs(betas[mu] * betas[nu]) ** (q - 2.0)
                    w = betas[nu][..., None] * bcoefs[mu] - betas[mu][..., None] * bcoefs[nu]
                    T = T + coef[..., None, None] * outer(w)
            for k in range(n):
                for mu in range(mm):
                    coef = (q - 1.0) * Fs[k] ** q * np.abs(betas[mu]) ** (q - 2.0)
                    w = betas[mu][..., None] * a_vecs[k] - bcoefs[mu]
                    T = T + coef[..., None, None] * outer(w)
        head = np.zeros(vec.shape)
        for Fk, uk in zip(Fs, us):
            head = head + (Fk ** (q - 2.0))[..., None] * uk
        for bv, bc in zip(betas, bcoefs):
            head = head + (np.abs(bv) ** (q - 2.0) * bv)[..., None] * bc
        T = T + outer(head)
        return T / (R ** (2.0 * q - 2.0))[..., None, None]

    out = ConicMetric(
        manifold=man,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=tensor_fn,
        zero_in_domain=False,
        position_independent=all(mk.position_independent for mk in metrics)
        and _forms_constant(forms, man),
        name=f"power[q={q:g}]({', '.join(mk.name for mk in metrics)})",
    )
    _probe_nonempty(out)
    return ConicMetric(
        manifold=out.manifold,
        value_fn=out.value_fn,
        domain_fn=out.domain_fn,
        tensor_fn=out.tensor_fn,
        zero_in_domain=_zero_convention(out),
        position_independent=out.position_independent,
        name=out.name,
    )


# ---------------------------------------------------------------------------
# (F0, beta) and (F1, F2) profile combinations
# ---------------------------------------------------------------------------


def phi_combine(F0: ConicMetric, beta: OneFormAtom, profile: PhiProfile) -> ConicMetric:
    """Metric F = F0 * phi(beta / F0) with the profile's closed-form tensor."""
    man = F0.manifold

    filler = profile.representative()

    def ratio(base, vec):
        with np.errstate(all="ignore"):
            return beta.pair(base, vec) / F0.F_many(base, vec)

    def value_fn(base, vec):
        s = ratio(base, vec)
        ok = profile.contains(s)
        with np.errstate(all="ignore"):
            p = np.where(ok, np.asarray(profile.phi(np.where(ok, s, filler)), float), np.nan)
        return F0.F_many(base, vec) * p

    def domain_fn(base, vec):
        ok = F0.in_domain_many(base, vec)
        s = ratio(base, vec)
        return ok & profile.contains(s)

    def tensor_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        base, vec = np.broadcast_arrays(base, vec)
        F, _, u, h = _metric_pieces(F0, base, vec)
        b = np.broadcast_to(beta.coeffs(base), vec.shape)
        s = beta.pair(base, vec) / F
        with np.errstate(all="ignore"):
            p1 = np.asarray(profile.phi1(s), float)
            p2 = np.asarray(profile.phi2(s), float)
            ps = np.asarray(profile.psi(s), float)
            psd = np.asarray(profile.psi_dot(s), float)
        un = u / F[..., None]
        c1 = s[..., None] * un - b
        c2 = p1[..., None] * un + psd[..., None] * b
        quad = p2[..., None, None] * c1[..., :, None] * c1[..., None, :] + c2[..., :, None] * c2[..., None, :]
        return 0.5 * (p1[..., None, None] * h + (0.5 / ps)[..., None, None] * quad)

    out = ConicMetric(
        manifold=man,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=tensor_fn,
        zero_in_domain=False,
        position_independent=F0.position_independent and _forms_constant([beta], man),
        name=f"{profile.name}({F0.name})",
    )
    _probe_nonempty(out)
    return ConicMetric(
        manifold=out.manifold,
        value_fn=out.value_fn,
        domain_fn=out.domain_fn,
        tensor_fn=out.tensor_fn,
        zero_in_domain=_zero_convention(out),
        position_independent=out.position_independent,
        name=out.name,
    )


def f1f2_combine(F1: ConicMetric, F2: ConicMetric, profile: PhiProfile) -> ConicMetric:
    """Metric F = F1 * phi(F2 / F1): the one-form is replaced by a second metric."""
    man = _shared_manifold([F1, F2])

    filler = profile.representative()

    def ratio(base, vec):
        with np.errstate(all="ignore"):
            return F2.F_many(base, vec) / F1.F_many(base, vec)

    def value_fn(base, vec):
        s = ratio(base, vec)
        ok = profile.contains(s)
        with np.errstate(all="ignore"):
            p = np.where(ok, np.asarray(profile.phi(np.where(ok, s, filler)), float), np.nan)
        return F1.F_many(base, vec) * p

    def domain_fn(base, vec):
        ok = F1.in_domain_many(base, vec) & F2.in_domain_many(base, vec)
        return ok & profile.contains(ratio(base, vec))

    def tensor_fn(base, vec):
        base = np.asarray(base, dtype=float)
        vec = np.asarray(vec, dtype=float)
        base, vec = np.broadcast_arrays(base, vec)
        Fa, _, ua, ha = _metric_pieces(F1, base, vec)
        Fb, _, ub, hb = _metric_pieces(F2, base, vec)
        s = Fb / Fa
        with np.errstate(all="ignore"):
            p1 = np.asarray(profile.phi1(s), float)
            p2 = np.asarray(profile.phi2(s), float)
            ps = np.asarray(profile.psi(s), float)
            psd = np.asarray(profile.psi_dot(s), float)
        una = ua / Fa[..., None]
        unb = ub / Fb[..., None]
        c1 = s[..., None] * una - unb
        c2 = p1[..., None] * una + psd[..., None] * unb
        quad = p2[..., None, None] * c1[..., :, None] * c1[..., None, :] + c2[..., :, None] * c2[..., None, :]
        return 0.5 * (
            p1[..., None, None] * ha
            + ((Fa / Fb) * psd)[..., None, None] * hb
            + (0.5 / ps)[..., None, None] * quad
        )

    out = ConicMetric(
        manifold=man,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=tensor_fn,
        zero_in_domain=False,
        position_independent=F1.position_independent and F2.position_independent,
        name=f"{profile.name}({F1.name}, {F2.name})",
    )
    _probe_nonempty(out)
    return ConicMetric(
        manifold=out.manifold,
        value_fn=out.value_fn,
        domain_fn=out.domain_fn,
        tensor_fn=out.tensor_fn,
        zero_in_domain=_zero_convention(out),
        position_independent=out.position_independent,
        name=out.name,
    )


# ---------------------------------------------------------------------------
# Named families with their strong-convexity domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrongDomain:
    """Predicate for the conic subdomain where the tensor stays positive definite."""

    many: Callable = field(repr=False)

    def __call__(self, v: TangentVec) -> bool:
        return bool(self.many(v.base, v.vec))


def named_family(
    name: str, F0: ConicMetric, beta: OneFormAtom, q: float | None = None
) -> tuple[ConicMetric, StrongDomain]:
    """Build a classical (F0, beta) family plus its strong-convexity domain."""
    key = name.lower()
    if key == "randers":
        metric = phi_combine(F0, beta, randers_profile())
        return metric, StrongDomain(many=metric.in_domain_many)
    if key == "kropina":
        qq = 1.0 if q is None else float(q)
        metric = phi_combine(F0, beta, kropina_profile(qq))
        return metric, StrongDomain(many=metric.in_domain_many)
    if key == "matsumoto":
        qq = 1.0 if q is None else float(q)
        metric = phi_combine(F0, beta, matsumoto_profile(qq))

        def strong_many(base, vec):
            F = F0.F_many(base, vec)
            bv = beta.pair(base, vec)
            return metric.in_domain_many(base, vec) & ((F - (qq + 1.0) * bv) * (F - bv) > 0.0)

        return metric, StrongDomain(many=strong_many)
    if key in ("squareoverf0", "square_over_f0"):
        metric = phi_combine(F0, beta, square_over_f0_profile())
        return metric, StrongDomain(many=metric.in_domain_many)
    raise BadExponent(f"unknown family {name!r}")


# ---------------------------------------------------------------------------
# Determinant formula and positive-definiteness characterization
# ---------------------------------------------------------------------------


def _profile_state(F0: ConicMetric, beta: OneFormAtom, v: TangentVec):
    g0 = tensor(F0, v)
    F = float(F0.F_many(v.base, v.vec))
    b = np.asarray(beta.coeffs(v.base), dtype=float)
    s = float(beta.pair(v.base, v.vec)) / F
    z = np.linalg.solve(g0, b)
    beta_norm_sq = float(b @ z)
    return g0, F, s, beta_norm_sq


def det_tensor_formula(
    F0: ConicMetric, beta: OneFormAtom, profile: PhiProfile, v: TangentVec
) -> float:
    """Closed-form determinant of the (F0, beta)-metric tensor at v."""
    g0, _, s, bn2 = _profile_state(F0, beta, v)
    profile.require(s)
    N = F0.dimension
    p = float(profile.phi(s))
    pd = float(profile.phi_dot(s))
    pdd = float(profile.phi_ddot(s))
    lead = p - s * pd
    return float(lead ** (N - 2) * ((bn2 - s * s) * pdd + lead) * p ** (N + 1) * np.linalg.det(g0))


def characterization_nd(
    F0: ConicMetric,
    beta: OneFormAtom,
    profile: PhiProfile,
    v: TangentVec,
    tolerance: float = DEFAULT_EIG_TOL,
) -> bool:
    """Exact positive-definiteness test from the profile inequalities.

    In dimension two only the determinant-side inequality is required;
    above that the slope condition phi - s phi' > 0 is necessary as well.
    """
    _, _, s, bn2 = _profile_state(F0, beta, v)
    profile.require(s)
    p = float(profile.phi(s))
    pd = float(profile.phi_dot(s))
    pdd = float(profile.phi_ddot(s))
    lead = p - s * pd
    second = pdd * (bn2 - s * s) + lead
    if F0.dimension > 2:
        return bool(lead > tolerance and second > tolerance)
    return bool(second > tolerance)


# ---------------------------------------------------------------------------
# Reversibilization
# ---------------------------------------------------------------------------


def _reflected(metric: ConicMetric) -> ConicMetric:
    """The metric v -> F(-v); its tensor at v is the original tensor at -v."""

    def value_fn(base, vec):
        return metric.value_fn(base, -np.asarray(vec, dtype=float))

    def domain_fn(base, vec):
        return metric.domain_fn(base, -np.asarray(vec, dtype=float))

    tensor_fn = None
    if metric.tensor_fn is not None:

        def tensor_fn(base, vec):
            return metric.tensor_fn(base, -np.asarray(vec, dtype=float))

    return ConicMetric(
        manifold=metric.manifold,
        value_fn=value_fn,
        domain_fn=domain_fn,
        tensor_fn=tensor_fn,
        zero_in_domain=metric.zero_in_domain,
        position_independent=metric.position_independent,
        name=f"reflect({metric.name})",
    )


def reversibilize(F: ConicMetric, mode: str) -> ConicMetric:
    """Reversible companion metric: F(v) + F(-v) or sqrt(F(v)^2 + F(-v)^2)."""
    man = F.manifold
    dirs = unit_directions(man.dimension, DOMAIN_PROBE_DIRECTIONS)
    base = np.broadcast_to(man.probe_point, dirs.shape)
    if not (np.all(F.in_domain_many(base, dirs)) and np.all(F.in_domain_many(base, -dirs))):
        raise OutsideDomain("reversibilization needs the whole tangent space as domain")
    key = mode.lower()
    if key == "sum":
        out = combine(sum_combiner(2), [F, _reflected(F)], [])
    elif key == "quadratic":
        out = power_q_combine([F, _reflected(F)], [], q=2.0)
    else:
        raise ValueError(f"mode must be 'sum' or 'quadratic', got {mode!r}")
    return out.with_name(f"reversible[{key}]({F.name})")
