"""Geodesics, exponential map, and graph-based Finslerian separation.

Geodesics are computed as critical curves of the energy functional: the
second-order system solves 2 g(x, v) a = d_x(F^2) - (d_x p) v with
p = 2 g v, taking position derivatives by central differences, and is
integrated with classical RK4.  Separations are shortest paths on a grid
graph whose edges are straight admissible segments weighted by F-length.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import dijkstra as _sp_dijkstra

from .errors import DegenerateTensor, LeftDomain, NotAdmissible, OutsideDomain
from .metrics import ConicMetric, TangentVec, unit_directions
from .numkernel import EPS, simpson_weights

EDGE_QUAD_NODES = 33
CURVE_QUAD_NODES = 65
DEFAULT_STEP = 0.01


# ---------------------------------------------------------------------------
# Curves and integral functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polyline:
    """Piecewise-linear path through the listed points."""

    points: np.ndarray
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if self.times is None:
            object.__setattr__(self, "times", np.linspace(0.0, 1.0, pts.shape[0]))
        else:
            object.__setattr__(self, "times", np.asarray(self.times, dtype=float))


@dataclass(frozen=True)
class SmoothCurve:
    """A smooth path given as a vectorized callable on [t0, t1].

    The path must evaluate slightly beyond the ends when no velocity
    callable is supplied (the fallback is a central difference).
    """

    path: Callable[[np.ndarray], np.ndarray]
    t0: float = 0.0
    t1: float = 1.0
    velocity: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def positions(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(self.path(np.asarray(t, dtype=float)), dtype=float)

    def velocities(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.velocity is not None:
            return np.asarray(self.velocity(t), dtype=float)
        h = max(1e-7, 1e-7 * (self.t1 - self.t0))
        return (self.positions(t + h) - self.positions(t - h)) / (2.0 * h)


def segment(a, b) -> Polyline:
    return Polyline(points=np.stack([np.asarray(a, float), np.asarray(b, float)]))


def _curve_samples(curve, nodes: int):
    """(positions, velocities, parameters, weights*dt) at quadrature nodes."""
    w = simpson_weights(nodes)
    q = w.size
    if isinstance(curve, Polyline):
        pts, tms = curve.points, curve.times
        K = pts.shape[0] - 1
        dt = np.diff(tms)  # (K,)
        tloc = np.linspace(0.0, 1.0, q)
        pos = pts[:-1, None, :] + tloc[None, :, None] * np.diff(pts, axis=0)[:, None, :]
        vel = (np.diff(pts, axis=0) / dt[:, None])[:, None, :]
        vel = np.broadcast_to(vel, pos.shape)
        params = tms[:-1, None] + tloc[None, :] * dt[:, None]
        weights = w[None, :] * (dt / (q - 1))[:, None]
        return pos.reshape(-1, pts.shape[1]), vel.reshape(-1, pts.shape[1]), params.ravel(), weights.ravel()
    if isinstance(curve, SmoothCurve):
        t = np.linspace(curve.t0, curve.t1, q)
        pos = curve.positions(t)
        vel = curve.velocities(t)
        weights = w * ((curve.t1 - curve.t0) / (q - 1))
        return pos, vel, t, weights
    raise TypeError(f"unsupported curve type {type(curve)!r}")


def _admissible_values(m: ConicMetric, curve, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    pos, vel, params, weights = _curve_samples(curve, nodes)
    ok = m.in_domain_many(pos, vel)
    if not np.all(ok):
        bad = params[~ok]
        raise NotAdmissible(
            f"curve velocity leaves the conic domain at parameter {bad[0]:.6g}",
            parameter=float(bad[0]),
        )
    vals = m.F_many(pos, vel)
    return vals, weights


def curve_length(m: ConicMetric, curve, nodes: int = CURVE_QUAD_NODES) -> float:
    """Simpson-integrated F-length of an admissible curve."""
    vals, weights = _admissible_values(m, curve, nodes)
    return float(np.dot(weights, vals))


def energy(m: ConicMetric, curve, nodes: int = CURVE_QUAD_NODES) -> float:
    """Simpson-integrated energy: the integral of F(velocity)^2."""
    vals, weights = _admissible_values(m, curve, nodes)
    return float(np.dot(weights, vals * vals))


# ---------------------------------------------------------------------------
# Geodesics via the energy functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray
    parameter: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))


def _tensor_checked(m: ConicMetric, x: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    ok = m.in_domain_many(x, v)
    if not np.all(ok):
        raise LeftDomain(f"geodesic left the conic domain near parameter {t:.6g}", parameter=t)
    g = m.tensor_many(x, v)
    if not np.all(np.isfinite(g)):
        raise LeftDomain(f"tensor not finite near parameter {t:.6g}", parameter=t)
    scale = np.sqrt(np.einsum("...ij,...ij->...", g, g) / g.shape[-1])
    det = np.linalg.det(g)
    if np.any(np.abs(det) < 1e-12 * np.maximum(scale, 1e-30) ** g.shape[-1]):
        raise DegenerateTensor(f"fundamental tensor degenerate near parameter {t:.6g}")
    return g


def _accel(m: ConicMetric, x: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    """Acceleration of the energy-critical curve at batched states (B, N)."""
    g = _tensor_checked(m, x, v, t)
    if m.position_independent:
        return np.zeros_like(v)
    n = x.shape[-1]
    h = (EPS ** (1.0 / 3.0)) * np.maximum(1.0, np.linalg.norm(x, axis=-1, keepdims=True))
    rhs = np.zeros_like(v)
    dp_dx = np.zeros(x.shape[:-1] + (n, n))  # [..., a, i] = д p_i / д x_a
    for a in range(n):
        ha = h[..., 0]
        xp = x.copy()
        xp[..., a] += ha
        xm = x.copy()
        xm[..., a] -= ha
        gp = m.tensor_many(xp, v)
        gm = m.tensor_many(xm, v)
        pp = 2.0 * np.einsum("...ij,...j->...i", gp, v)
        pm = 2.0 * np.einsum("...ij,...j->...i", gm, v)
        dp_dx[..., a, :] = (pp - pm) / (2.0 * ha[..., None])
        lp = np.einsum("...i,...ij,...j->...", v, gp, v)
        lm = np.einsum("...i,...ij,...j->...", v, gm, v)
        rhs[..., a] = (lp - lm) / (2.0 * ha)
    rhs = rhs - np.einsum("...ai,...a->...i", dp_dx, v)
    if not np.all(np.isfinite(rhs)):
        raise LeftDomain(f"position derivatives hit the domain boundary near {t:.6g}", parameter=t)
    return np.linalg.solve(2.0 * g, rhs[..., None])[..., 0]


def _integrate(m: ConicMetric, x0: np.ndarray, v0: np.ndarray, t_end: float, step: float):
    """Batched RK4 orbits; returns positions/velocities at every step."""
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    v = np.atleast_2d(np.asarray(v0, dtype=float)).copy()
    n_steps = max(1, int(round(t_end / step)))
    dt = t_end / n_steps
    xs = [x.copy()]
    vs = [v.copy()]
    ts = [0.0]
    for k in range(n_steps):
        t = k * dt
        a1 = _accel(m, x, v, t)
        a2 = _accel(m, x + 0.5 * dt * v, v + 0.5 * dt * a1, t + 0.5 * dt)
        a3 = _accel(m, x + 0.5 * dt * v + 0.25 * dt * dt * a1, v + 0.5 * dt * a2, t + 0.5 * dt)
        a4 = _accel(m, x + dt * v + 0.5 * dt * dt * a2, v + dt * a3, t + dt)
        x = x + dt * v + dt * dt / 6.0 * (a1 + a2 + a3)
        v = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        xs.append(x.copy())
        vs.append(v.copy())
        ts.append((k + 1) * dt)
    return np.array(xs), np.array(vs), np.array(ts)


def geodesic_shoot(
    m: ConicMetric, start: GeodesicState, t_end: float, step: float = DEFAULT_STEP
) -> list[GeodesicState]:
    """Integrate the geodesic with the given initial state up to t_end."""
    tv = TangentVec(start.position, start.velocity)
    if not bool(m.in_domain_many(tv.base, tv.vec)):
        raise OutsideDomain("initial velocity is outside the conic domain")
    xs, vs, ts = _integrate(m, start.position[None, :], start.velocity[None, :], t_end, step)
    return [
        GeodesicState(position=xs[k, 0], velocity=vs[k, 0], parameter=start.parameter + ts[k])
        for k in range(xs.shape[0])
    ]


def exp_map(m: ConicMetric, base, v, step: float = DEFAULT_STEP) -> np.ndarray:
    """Endpoint at parameter 1 of the geodesic leaving ``base`` with velocity v."""
    states = geodesic_shoot(m, GeodesicState(base, v, 0.0), t_end=1.0, step=step)
    return states[-1].position


def gauss_residuals(m: ConicMetric, base, vs, ws, step: float = DEFAULT_STEP) -> np.ndarray:
    """Batched orthogonality defects g_T(d exp[w], T) at parameter 1.

    Each w is first projected onto the g_v-orthogonal complement of its v,
    then d exp is taken by a central difference of the endpoint in the
    initial velocity.  All perturbed orbits integrate as one batch.
    """
    base = np.asarray(base, dtype=float)
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    ws = np.atleast_2d(np.asarray(ws, dtype=float))
    B = vs.shape[0]
    xb = np.broadcast_to(base, vs.shape).copy()
    g = _tensor_checked(m, xb, vs, 0.0)
    gv = np.einsum("...ij,...j->...i", g, vs)
    coef = np.einsum("...i,...i->...", ws, gv) / np.einsum("...i,...i->...", vs, gv)
    ws = ws - coef[..., None] * vs
    wn = np.linalg.norm(ws, axis=-1)
    scale = np.where(wn > 0, wn, 1.0)
    eps = (1e-3 * np.linalg.norm(vs, axis=-1) / scale)[..., None]
    x0 = np.concatenate([xb, xb, xb], axis=0)
    v0 = np.concatenate([vs, vs + eps * ws, vs - eps * ws], axis=0)
    xs, vel, _ = _integrate(m, x0, v0, t_end=1.0, step=step)
    d_exp = (xs[-1, B : 2 * B] - xs[-1, 2 * B :]) / (2.0 * eps)
    T = vel[-1, :B]
    ge = m.tensor_many(xs[-1, :B], T)
    out = np.einsum("...i,...ij,...j->...", d_exp, ge, T)
    return np.where(wn > 0, out, 0.0)


def gauss_lemma_residual(m: ConicMetric, base, v, w, step: float = DEFAULT_STEP) -> float:
    """Single-pair version of :func:`gauss_residuals`."""
    return float(gauss_residuals(m, base, np.asarray(v)[None, :], np.asarray(w)[None, :], step)[0])


@dataclass(frozen=True)
class MinimalityReport:
    min_ratio: float
    all_pass: bool
    counted: int
    skipped_outside_ball: int


def radial_minimality_test(
    m: ConicMetric,
    base,
    radius: float,
    trials: int,
    seed: int,
    step: float = DEFAULT_STEP,
) -> MinimalityReport:
    """Compare random in-ball curves against the radial geodesic they perturb.

    Each trial shoots a radial geodesic to a random endpoint inside the
    geodesic ball, perturbs it by a smooth bump vanishing at the ends, and
    records the length ratio.  Curves exiting the ball are skipped.
    """
    base = np.asarray(base, dtype=float)
    rng = np.random.default_rng(seed)
    n = base.shape[-1]

    probe_dirs = unit_directions(n, 16)
    ok = m.in_domain_many(np.broadcast_to(base, probe_dirs.shape), probe_dirs)
    if not np.any(ok):
        raise OutsideDomain("no admissible direction at the base point")
    from .numkernel import eigen_classify

    for d in probe_dirs[ok]:
        g = m.tensor_many(base, d)
        if not eigen_classify(g).is_positive_definite:
            raise DegenerateTensor(
                "radial minimality requires a positive-definite tensor near the base"
            )

    def in_ball(points: np.ndarray) -> bool:
        rel = points - base
        keep = np.linalg.norm(rel, axis=-1) > 1e-12
        if not np.any(keep):
            return True
        rel = rel[keep]
        if not np.all(m.in_domain_many(np.broadcast_to(base, rel.shape), rel)):
            return False
        vals = m.F_many(np.broadcast_to(base, rel.shape), rel)
        return bool(np.all(vals <= radius * (1.0 + 1e-9)))

    min_ratio = np.inf
    counted = 0
    skipped = 0
    rounds = 0
    while counted < trials and rounds < 20:
        rounds += 1
        batch = trials - counted
        # rejection-sample a batch of admissible radial velocities
        vs = []
        attempts = 0
        while len(vs) < batch and attempts < 100 * batch:
            attempts += 1
            d = rng.normal(size=n)
            d /= np.linalg.norm(d)
            if not bool(m.in_domain_many(base, d)):
                continue
            rho = rng.uniform(0.25, 0.85) * radius
            vs.append(rho * d / float(m.F_many(base, d)))
        if not vs:
            break
        vs = np.array(vs)
        xs, _, ts = _integrate(
            m, np.broadcast_to(base, vs.shape).copy(), vs, t_end=1.0, step=max(step, 1.0 / 64)
        )
        for i in range(vs.shape[0]):
            radial_pts = xs[:, i, :]
            u = rng.normal(size=n)
            u /= np.linalg.norm(u)
            amp = rng.uniform(0.02, 0.15) * radius
            bump = np.sin(np.pi * ts)[:, None] * amp * u[None, :]
            perturbed_pts = radial_pts + bump
            if not in_ball(perturbed_pts):
                skipped += 1
                continue
            try:
                num = curve_length(m, Polyline(points=perturbed_pts, times=ts))
                den = curve_length(m, Polyline(points=radial_pts, times=ts))
            except NotAdmissible:
                skipped += 1
                continue
            counted += 1
            min_ratio = min(min_ratio, num / den)
    return MinimalityReport(
        min_ratio=float(min_ratio),
        all_pass=bool(min_ratio >= 1.0 - 1e-6),
        counted=counted,
        skipped_outside_ball=skipped,
    )


# ---------------------------------------------------------------------------
# Separation graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparationGraph:
    """Grid graph whose directed edges carry F-lengths of straight segments."""

    box_lo: np.ndarray
    box_hi: np.ndarray
    resolution: int
    neighbor_radius: int
    shape: tuple
    nodes: np.ndarray = field(repr=False)
    matrix: csr_matrix = field(repr=False)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def node_id(self, point) -> int:
        """Flat index of the grid node nearest to ``point`` (must be close)."""
        point = np.asarray(point, dtype=float)
        h = (self.box_hi - self.box_lo) / (self.resolution - 1)
        idx = np.rint((point - self.box_lo) / h).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.resolution):
            raise ValueError(f"point {point} outside the graph box")
        flat = int(np.ravel_multi_index(tuple(idx), self.shape))
        if np.linalg.norm(self.nodes[flat] - point) > 0.5 * float(np.max(h)):
            raise ValueError(f"point {point} is not a grid node")
        return flat


def build_separation_graph(
    m: ConicMetric,
    box: tuple,
    resolution: int,
    neighbor_radius: int,
    quad_nodes: int = EDGE_QUAD_NODES,
) -> SeparationGraph:
    """Grid discretization of the admissible-path length infimum.

    Every ordered node pair within the neighbor radius gets a directed
    edge weighted by the Simpson F-length of the straight segment, and
    the edge is dropped when any sampled velocity leaves the cone.
    """
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    n = lo.shape[0]
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    axes = [np.linspace(lo[d], hi[d], resolution) for d in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([mm.ravel() for mm in mesh], axis=-1)
    shape = tuple([resolution] * n)
    strides = np.array([int(np.prod(shape[d + 1 :])) for d in range(n)])
    h = (hi - lo) / (resolution - 1)
    center = 0.5 * (lo + hi)

    w = simpson_weights(quad_nodes)
    tq = np.linspace(0.0, 1.0, w.size)
    wq = w / (w.size - 1)

    rows_all, cols_all, weights_all = [], [], []
    R = int(neighbor_radius)
    for off in itertools.product(range(-R, R + 1), repeat=n):
        if all(o == 0 for o in off):
            continue
        delta = np.array(off, dtype=float) * h
        ranges = []
        ok_range = True
        for d in range(n):
            lo_i = max(0, -off[d])
            hi_i = resolution - 1 - max(0, off[d])
            if hi_i < lo_i:
                ok_range = False
                break
            ranges.append(np.arange(lo_i, hi_i + 1) * strides[d])
        if not ok_range:
            continue
        src = ranges[0]
        for d in range(1, n):
            src = np.add.outer(src, ranges[d]).ravel()
        if src.size == 0:
            continue
        dst = src + int(np.dot(off, strides))

        if m.position_independent:
            if not bool(m.in_domain_many(center, delta)):
                continue
            weight = float(m.F_many(center, delta))
            rows_all.append(src)
            cols_all.append(dst)
            weights_all.append(np.full(src.shape, weight))
        else:
            pos = nodes[src][:, None, :] + tq[None, :, None] * delta[None, None, :]
            vel = np.broadcast_to(delta, pos.shape)
            ok = np.all(m.in_domain_many(pos, vel), axis=1)
            if not np.any(ok):
                continue
            pos_ok = pos[ok]
            vals = m.F_many(pos_ok, np.broadcast_to(delta, pos_ok.shape))
            weight = vals @ wq
            rows_all.append(src[ok])
            cols_all.append(dst[ok])
            weights_all.append(weight)

    if rows_all:
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
        weights = np.concatenate(weights_all)
    else:
        rows = np.zeros(0, dtype=int)
        cols = np.zeros(0, dtype=int)
        weights = np.zeros(0)
    mat = coo_matrix((weights, (rows, cols)), shape=(nodes.shape[0], nodes.shape[0])).tocsr()
    return SeparationGraph(
        box_lo=lo,
        box_hi=hi,
        resolution=resolution,
        neighbor_radius=R,
        shape=shape,
        nodes=nodes,
        matrix=mat,
    )


@dataclass(frozen=True)
class SeparationResult:
    value: float
    witness_path: np.ndarray

    @property
    def reachable(self) -> bool:
        return np.isfinite(self.value)


def _as_node(graph: SeparationGraph, p) -> int:
    if isinstance(p, (int, np.integer)):
        return int(p)
    return graph.node_id(p)


def separation(graph: SeparationGraph, p, q) -> SeparationResult:
    """Shortest admissible-path length from p to q on the graph."""
    ip, iq = _as_node(graph, p), _as_node(graph, q)
    dist, pred = _sp_dijkstra(
        graph.matrix, directed=True, indices=ip, return_predecessors=True
    )
    empty = np.zeros((0, graph.nodes.shape[1]))
    if ip == iq:
        # proper separation: go out and come back (no zero-length loitering)
        incoming = graph.matrix[:, ip].tocoo()
        val = np.inf
        best = -1
        for j, wgt in zip(incoming.row, incoming.data):
            if dist[j] + wgt < val:
                val, best = dist[j] + wgt, int(j)
        if best < 0:
            return SeparationResult(value=np.inf, witness_path=empty)
        loop = [best]
        while loop[-1] != ip:
            loop.append(int(pred[loop[-1]]))
        loop.reverse()
        loop.append(ip)
        return SeparationResult(value=float(val), witness_path=graph.nodes[np.array(loop)])
    val = float(dist[iq])
    if not np.isfinite(val):
        return SeparationResult(value=np.inf, witness_path=empty)
    path = [iq]
    while path[-1] != ip:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return SeparationResult(value=val, witness_path=graph.nodes[np.array(path)])


def reachability(graph: SeparationGraph, p) -> np.ndarray:
    """Flat indices of nodes reachable from p by admissible paths."""
    ip = _as_node(graph, p)
    dist = _sp_dijkstra(graph.matrix, directed=True, indices=ip)
    mask = np.isfinite(dist)
    # p itself is in its future only when some admissible loop returns to it
    incoming = graph.matrix[:, ip].tocoo()
    has_loop = any(np.isfinite(dist[j]) for j in incoming.row)
    mask[ip] = has_loop
    return np.flatnonzero(mask)


def df_ball(graph: SeparationGraph, p, r: float, direction: str = "forward") -> np.ndarray:
    """Flat indices of the discrete forward/backward separation ball."""
    ip = _as_node(graph, p)
    mat = graph.matrix if direction == "forward" else graph.matrix.T.tocsr()
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    dist = _sp_dijkstra(mat, directed=True, indices=ip)
    mask = dist < r
    incoming = mat[:, ip].tocoo()
    own = np.inf
    for j, wgt in zip(incoming.row, incoming.data):
        own = min(own, dist[j] + wgt)
    mask[ip] = own < r
    return np.flatnonzero(mask)
