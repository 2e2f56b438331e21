"""Configuration-driven command line front end.

One JSON config file describes a metric (as a declarative expression
tree) plus run parameters; one subcommand per invocation evaluates,
scans, shoots geodesics or runs graph separations and writes a CSV with
17-significant-digit floats so reruns are byte-identical.

Config schema (see README for the full grammar)::

    {
      "metric": {"type": "named", "family": "randers", "b": 0.5},
      "run": {"seed": 0, "scan": {"base": [0, 0], "samples": 360}}
    }
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import combinators as cb
from . import geodesy as gd
from . import metrics as me
from . import minkowski as mk
from .errors import (
    DOMAIN_CODES,
    BadExponent,
    FinslerError,
    ParseError,
    ValidationError,
)

COMMANDS = (
    "eval",
    "tensor",
    "classify",
    "scan",
    "detcheck",
    "geodesic",
    "expmap",
    "gauss",
    "separation",
    "ball",
    "reach",
    "indicatrix",
    "oracle",
)

_EXPR_NAMES = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "arctan": np.arctan,
    "arctan2": np.arctan2,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sign": np.sign,
    "minimum": np.minimum,
    "maximum": np.maximum,
    "pi": math.pi,
    "e": math.e,
}


def compile_expr(expr: str, variables: tuple[str, ...], path: str):
    """Compile a config expression over the named variables.

    Only the whitelisted math names are visible; anything else raises a
    ValidationError naming the offending config path.
    """
    try:
        code = compile(str(expr), f"<config:{path}>", "eval")
    except SyntaxError as exc:
        raise ValidationError(f"bad expression {expr!r}: {exc.msg}", path=path) from exc
    for name in code.co_names:
        if name not in _EXPR_NAMES and name not in variables:
            raise ValidationError(
                f"expression {expr!r} uses unknown name {name!r}", path=path, constraint="names"
            )

    def fn(*args):
        ns = dict(_EXPR_NAMES)
        ns.update(zip(variables, args))
        return eval(code, {"__builtins__": {}}, ns)  # noqa: S307 - whitelisted names only

    return fn


def _position_vars(dim: int) -> tuple[str, ...]:
    letters = ("x", "y", "z")[:dim] if dim <= 3 else ()
    indexed = tuple(f"x{i+1}" for i in range(dim))
    return letters + indexed


def _split_position(x: np.ndarray, dim: int):
    x = np.asarray(x, dtype=float)
    comps = [x[..., i] for i in range(dim)]
    letters = comps[: 3 if dim <= 3 else 0]
    return tuple(letters) + tuple(comps)


@dataclass(frozen=True)
class MetricSpec:
    """Validated declarative metric tree plus its chart dimension."""

    tree: dict
    dimension: int


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    chart_bounds: Optional[tuple] = None
    seed: int = 0
    tolerance: float = 1e-9
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BuiltMetric:
    """A constructed metric plus the ingredients commands may need."""

    metric: me.ConicMetric
    phi_parts: Optional[tuple] = None  # (F0, beta, profile) for detcheck
    strong_domain: Optional[cb.StrongDomain] = None
    curve: Optional[mk.PolarCurve2D] = None


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def _require(cond: bool, msg: str, path: str, constraint: str = ""):
    if not cond:
        raise ValidationError(msg, path=path, constraint=constraint)


def _form_dimension(node: dict, path: str) -> int:
    """Dimension of a one-form node: {'coeffs': [...]} or {'coeff_exprs': [...]}."""
    _require(isinstance(node, dict), "one-form node must be a dict", path)
    co = node.get("coeffs") or node.get("coeff_exprs")
    _require(co is not None, "one-form node needs 'coeffs' or 'coeff_exprs'", path)
    return len(co)


def _node_dimension(node: dict, path: str) -> int:
    t = node.get("type")
    _require(isinstance(node, dict) and t, "metric node must be a dict with a 'type'", path)
    if t == "euclidean":
        return int(node.get("dimension", 2))
    if t == "riemannian":
        mat = node.get("matrix") or node.get("matrix_expr")
        _require(mat is not None, "riemannian node needs 'matrix' or 'matrix_expr'", path)
        return len(mat)
    if t in ("oneform", "oneform_metric"):
        co = node.get("coeffs") or node.get("coeff_exprs")
        _require(co is not None, f"{t} node needs 'coeffs' or 'coeff_exprs'", path)
        return len(co)
    if t in (
        "gauge_curve_2d",
        "lorentz_example",
        "spiral_example",
        "parabola_example",
        "sqrt_parabola_example",
        "wavy_example",
    ):
        return 2
    if t == "sum":
        terms = node.get("terms", [])
        _require(len(terms) >= 1, "sum needs at least one term", path)
        dims = {_node_dimension(tm, f"{path}.terms[{i}]") for i, tm in enumerate(terms)}
        _require(len(dims) == 1, "sum terms must share one dimension", path)
        return dims.pop()
    if t == "power_q":
        mets = node.get("metrics", [])
        _require(len(mets) >= 1, "power_q needs at least one metric", path)
        dims = {_node_dimension(tm, f"{path}.metrics[{i}]") for i, tm in enumerate(mets)}
        for i, fm in enumerate(node.get("forms", [])):
            dims.add(_form_dimension(fm, f"{path}.forms[{i}]"))
        _require(len(dims) == 1, "power_q ingredients must share one dimension", path)
        return dims.pop()
    if t == "phi":
        d = _node_dimension(node.get("base", {"type": "euclidean"}), f"{path}.base")
        _require("form" in node, "phi node needs a 'form'", path)
        _require(
            _form_dimension(node["form"], f"{path}.form") == d,
            "phi base and form dimensions differ",
            path,
        )
        return d
    if t == "named":
        base = node.get("base")
        if base is None and "form" not in node:
            return int(node.get("dimension", 2))
        if base is None:
            return _form_dimension(node["form"], f"{path}.form")
        d = _node_dimension(base, f"{path}.base")
        if "form" in node:
            _require(
                _form_dimension(node["form"], f"{path}.form") == d,
                "named base and form dimensions differ",
                path,
            )
        return d
    if t == "f1f2":
        d1 = _node_dimension(node.get("f1", {}), f"{path}.f1")
        d2 = _node_dimension(node.get("f2", {}), f"{path}.f2")
        _require(d1 == d2, "f1f2 ingredients must share one dimension", path)
        return d1
    if t == "reversibilize":
        return _node_dimension(node.get("inner", {}), f"{path}.inner")
    raise ValidationError(f"unknown metric node type {t!r}", path=path, constraint="type")


def _validate_node(node: dict, path: str):
    t = node.get("type")
    if t == "named":
        family = str(node.get("family", "")).lower()
        _require(
            family in ("randers", "kropina", "matsumoto", "square_over_f0", "squareoverf0"),
            f"unknown family {node.get('family')!r}",
            path,
            constraint="family",
        )
        q = node.get("q")
        if family == "kropina" and q is not None:
            _require(float(q) > 0, "BadExponent: Kropina requires q > 0", path, "q")
        if family == "matsumoto" and q is not None:
            _require(
                float(q) > 0 or float(q) <= -1,
                "BadExponent: Matsumoto requires q > 0 or q <= -1",
                path,
                "q",
            )
    if t == "power_q":
        _require(float(node.get("q", 1)) >= 1, "BadExponent: power_q requires q >= 1", path, "q")
    if t == "spiral_example":
        _require(0 < float(node.get("epsilon", 0.1)) < math.pi, "epsilon must be in (0, pi)", path)
    if t == "phi":
        prof = node.get("profile")
        if isinstance(prof, dict) and "phi" in prof:
            _require("interval" in prof, "custom profile needs an 'interval'", path, "interval")
    for key in ("terms", "metrics"):
        for i, child in enumerate(node.get(key, [])):
            _validate_node(child, f"{path}.{key}[{i}]")
    for key in ("base", "f1", "f2", "inner"):
        if isinstance(node.get(key), dict):
            _validate_node(node[key], f"{path}.{key}")


def parse_config(text: str) -> tuple[MetricSpec, RunConfig]:
    """Parse and validate a JSON config into (MetricSpec, RunConfig)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, path="") from exc
    if not isinstance(doc, dict) or "metric" not in doc:
        raise ValidationError("config must be an object with a 'metric' section", path="metric")
    tree = doc["metric"]
    dim = _node_dimension(tree, "metric")
    _validate_node(tree, "metric")

    run = doc.get("run", {})
    if not isinstance(run, dict):
        raise ValidationError("'run' section must be an object", path="run")
    declared = run.get("dimension")
    if declared is not None and int(declared) != dim:
        raise ValidationError(
            f"run.dimension={declared} but the metric has dimension {dim}",
            path="run.dimension",
            constraint="dimension",
        )
    tol = float(run.get("tolerance", 1e-9))
    _require(tol > 0, "tolerance must be positive", "run.tolerance", "positive")
    bounds = run.get("chart_bounds")
    if bounds is not None:
        bounds = (tuple(map(float, bounds[0])), tuple(map(float, bounds[1])))
    params = {k: v for k, v in run.items() if k not in ("dimension", "chart_bounds", "seed", "tolerance")}
    cfg = RunConfig(
        dimension=dim,
        chart_bounds=bounds,
        seed=int(run.get("seed", 0)),
        tolerance=tol,
        params=params,
    )
    return MetricSpec(tree=tree, dimension=dim), cfg


def render_config(spec: MetricSpec, cfg: RunConfig) -> str:
    """Canonical JSON text whose parse reproduces (spec, cfg)."""
    run: dict = {"seed": cfg.seed, "tolerance": cfg.tolerance}
    if cfg.chart_bounds is not None:
        run["chart_bounds"] = [list(cfg.chart_bounds[0]), list(cfg.chart_bounds[1])]
    run.update(cfg.params)
    return json.dumps({"metric": spec.tree, "run": run}, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Metric construction from the tree
# ---------------------------------------------------------------------------


def _build_form(node: dict, dim: int, path: str) -> me.OneFormAtom:
    if "coeffs" in node:
        return me.constant_oneform([float(c) for c in node["coeffs"]])
    exprs = node["coeff_exprs"]
    vars_ = _position_vars(dim)
    fns = [compile_expr(e, vars_, f"{path}.coeff_exprs[{i}]") for i, e in enumerate(exprs)]

    def covector(x):
        args = _split_position(x, dim)
        cols = [np.broadcast_to(np.asarray(fn(*args), dtype=float), np.asarray(x)[..., 0].shape) for fn in fns]
        return np.stack(cols, axis=-1)

    return me.OneFormAtom(covector=covector)


def _build_profile(prof, path: str) -> cb.PhiProfile:
    if prof is None or prof == "randers":
        return cb.randers_profile()
    if isinstance(prof, str):
        if prof == "kropina":
            return cb.kropina_profile(1.0)
        if prof == "matsumoto":
            return cb.matsumoto_profile(1.0)
        if prof in ("square_over_f0", "squareoverf0"):
            return cb.square_over_f0_profile()
        raise ValidationError(f"unknown profile {prof!r}", path=path, constraint="profile")
    name = prof.get("name")
    if name == "kropina":
        return cb.kropina_profile(float(prof.get("q", 1.0)))
    if name == "matsumoto":
        return cb.matsumoto_profile(float(prof.get("q", 1.0)))
    if name == "randers":
        return cb.randers_profile()
    if name in ("square_over_f0", "squareoverf0"):
        return cb.square_over_f0_profile()
    phi = compile_expr(prof["phi"], ("s",), f"{path}.phi")
    lo, hi = (float(v) for v in prof["interval"])
    if "phi_dot" in prof:
        phi_dot = compile_expr(prof["phi_dot"], ("s",), f"{path}.phi_dot")
        phi_ddot = compile_expr(prof["phi_ddot"], ("s",), f"{path}.phi_ddot")
    else:
        h1, h2 = 6e-6, 1.2e-4

        def phi_dot(s, _f=phi):
            return (_f(np.asarray(s) + h1) - _f(np.asarray(s) - h1)) / (2 * h1)

        def phi_ddot(s, _f=phi):
            s = np.asarray(s)
            return (_f(s + h2) - 2.0 * _f(s) + _f(s - h2)) / (h2 * h2)

    return cb.PhiProfile(phi=phi, phi_dot=phi_dot, phi_ddot=phi_ddot, intervals=((lo, hi),), name="custom")


def build_metric(spec: MetricSpec) -> BuiltMetric:
    """Instantiate the metric described by a validated tree."""
    return _build_node(spec.tree, "metric")


def _build_node(node: dict, path: str) -> BuiltMetric:
    t = node["type"]
    dim = _node_dimension(node, path)
    if t == "euclidean":
        return BuiltMetric(metric=me.euclidean_metric(dim))
    if t == "riemannian":
        if "matrix" in node:
            atom = me.constant_riemann(np.asarray(node["matrix"], dtype=float))
        else:
            exprs = node["matrix_expr"]
            vars_ = _position_vars(dim)
            fns = [
                [compile_expr(e, vars_, f"{path}.matrix_expr[{i}][{j}]") for j, e in enumerate(row)]
                for i, row in enumerate(exprs)
            ]

            def metric_matrix(x):
                args = _split_position(x, dim)
                shape = np.asarray(x)[..., 0].shape
                rows = [
                    [np.broadcast_to(np.asarray(fn(*args), dtype=float), shape) for fn in row]
                    for row in fns
                ]
                return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

            atom = me.RiemannAtom(metric_matrix=metric_matrix)
        return BuiltMetric(metric=me.riemann_metric(atom, me.whole_plane(dim)))
    if t == "oneform_metric":
        form = _build_form(node, dim, path)
        return BuiltMetric(metric=me.oneform_metric(form, me.whole_plane(dim)))
    if t == "gauge_curve_2d":
        r_fn = compile_expr(node["r"], ("theta",), f"{path}.r")
        interval = node.get("interval")
        curve = mk.polar_curve(
            lambda th: np.asarray(r_fn(np.asarray(th, dtype=float)), dtype=float),
            theta_range=None if interval is None else (float(interval[0]), float(interval[1])),
        )
        return BuiltMetric(metric=me.minkowski_metric(mk.gauge_from_curve(curve)), curve=curve)
    if t == "lorentz_example":
        curve = mk.lorentz_curve()
        return BuiltMetric(metric=me.minkowski_metric(mk.gauge_from_curve(curve), name="lorentz"), curve=curve)
    if t == "spiral_example":
        curve = mk.spiral_curve(float(node.get("epsilon", 0.1)))
        return BuiltMetric(metric=me.minkowski_metric(mk.gauge_from_curve(curve), name="spiral"), curve=curve)
    if t == "parabola_example":
        curve = mk.downward_parabola_curve()
        return BuiltMetric(metric=me.minkowski_metric(mk.gauge_from_curve(curve), name="parabola"), curve=curve)
    if t == "sqrt_parabola_example":
        curve = mk.sqrt_parabola_curve()
        return BuiltMetric(
            metric=me.minkowski_metric(mk.gauge_from_curve(curve), name="sqrt_parabola"), curve=curve
        )
    if t == "wavy_example":
        curve = mk.wavy_curve(float(node.get("amplitude", 0.3)), int(node.get("lobes", 3)))
        return BuiltMetric(metric=me.minkowski_metric(mk.gauge_from_curve(curve), name="wavy"), curve=curve)
    if t == "sum":
        mets = [_build_node(c, f"{path}.terms[{i}]").metric for i, c in enumerate(node["terms"])]
        return BuiltMetric(metric=cb.combine(cb.sum_combiner(len(mets)), mets, []))
    if t == "power_q":
        mets = [_build_node(c, f"{path}.metrics[{i}]").metric for i, c in enumerate(node["metrics"])]
        forms = [
            _build_form(c, dim, f"{path}.forms[{i}]") for i, c in enumerate(node.get("forms", []))
        ]
        try:
            return BuiltMetric(metric=cb.power_q_combine(mets, forms, float(node["q"])))
        except BadExponent as exc:
            raise ValidationError(f"BadExponent: {exc}", path=path, constraint="q") from exc
    if t == "phi":
        base = _build_node(node.get("base", {"type": "euclidean", "dimension": dim}), f"{path}.base")
        form = _build_form(node["form"], dim, f"{path}.form")
        profile = _build_profile(node.get("profile"), f"{path}.profile")
        metric = cb.phi_combine(base.metric, form, profile)
        return BuiltMetric(metric=metric, phi_parts=(base.metric, form, profile))
    if t == "named":
        base_node = node.get("base", {"type": "euclidean", "dimension": dim})
        base = _build_node(base_node, f"{path}.base")
        if "form" in node:
            form = _build_form(node["form"], dim, f"{path}.form")
        else:
            coeffs = np.zeros(dim)
            coeffs[0] = float(node.get("b", 0.5))
            form = me.constant_oneform(coeffs)
        family = str(node["family"]).lower()
        q = node.get("q")
        try:
            metric, strong = cb.named_family(family, base.metric, form, None if q is None else float(q))
        except BadExponent as exc:
            raise ValidationError(f"BadExponent: {exc}", path=path, constraint="q") from exc
        profile = {
            "randers": cb.randers_profile,
            "kropina": lambda: cb.kropina_profile(1.0 if q is None else float(q)),
            "matsumoto": lambda: cb.matsumoto_profile(1.0 if q is None else float(q)),
            "square_over_f0": cb.square_over_f0_profile,
            "squareoverf0": cb.square_over_f0_profile,
        }[family]()
        return BuiltMetric(metric=metric, phi_parts=(base.metric, form, profile), strong_domain=strong)
    if t == "f1f2":
        f1 = _build_node(node["f1"], f"{path}.f1").metric
        f2 = _build_node(node["f2"], f"{path}.f2").metric
        profile = _build_profile(node.get("profile"), f"{path}.profile")
        return BuiltMetric(metric=cb.f1f2_combine(f1, f2, profile))
    if t == "reversibilize":
        inner = _build_node(node["inner"], f"{path}.inner").metric
        return BuiltMetric(metric=cb.reversibilize(inner, str(node.get("mode", "sum"))))
    raise ValidationError(f"unknown metric node type {t!r}", path=path, constraint="type")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _vec_cols(prefix: str, dim: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(dim)]


def _param(cfg: RunConfig, cmd: str, key: str, default=None, required: bool = False):
    sect = cfg.params.get(cmd, {})
    if key in sect:
        return sect[key]
    if required and default is None:
        raise ValidationError(f"missing run.{cmd}.{key}", path=f"run.{cmd}.{key}", constraint="required")
    return default


def _interior_ratio(phi_parts, base, v, margin: float) -> bool:
    """Keep samples whose ratio stays ``margin`` away from profile endpoints,
    where the finite-difference oracle loses accuracy to the singularity."""
    F0, beta, profile = phi_parts
    s = float(beta.pair(base, v)) / float(F0.F_many(base, v))
    for lo, hi in profile.intervals:
        if lo < s < hi:
            near_lo = np.isfinite(lo) and (s - lo) < margin
            near_hi = np.isfinite(hi) and (hi - s) < margin
            return not (near_lo or near_hi)
    return False


def run_command(cmd: str, spec: MetricSpec, cfg: RunConfig):
    """Execute one command; returns (summary dict, csv header, csv rows)."""
    built = build_metric(spec)
    m = built.metric
    dim = m.dimension
    tol = cfg.tolerance
    rng = np.random.default_rng(cfg.seed)

    if cmd == "eval":
        base = np.asarray(_param(cfg, "eval", "base", [0.0] * dim), dtype=float)
        vecs = np.asarray(_param(cfg, "eval", "vectors", required=True), dtype=float)
        header = ["index"] + _vec_cols("base", dim) + _vec_cols("v", dim) + ["F"]
        rows = []
        for i, v in enumerate(vecs):
            val = me.eval_F(m, me.TangentVec(base, v))
            rows.append([i, *base, *v, val])
        return {"command": cmd, "count": len(rows)}, header, rows

    if cmd == "tensor":
        base = np.asarray(_param(cfg, "tensor", "base", [0.0] * dim), dtype=float)
        vecs = np.asarray(_param(cfg, "tensor", "vectors", required=True), dtype=float)
        header = (
            ["index"]
            + _vec_cols("base", dim)
            + _vec_cols("v", dim)
            + [f"g{i}{j}" for i in range(dim) for j in range(dim)]
        )
        rows = []
        for i, v in enumerate(vecs):
            g = me.tensor(m, me.TangentVec(base, v))
            rows.append([i, *base, *v, *g.ravel()])
        return {"command": cmd, "count": len(rows)}, header, rows

    if cmd == "classify":
        base = np.asarray(_param(cfg, "classify", "base", [0.0] * dim), dtype=float)
        vecs = np.asarray(_param(cfg, "classify", "vectors", required=True), dtype=float)
        header = (
            ["index"]
            + _vec_cols("base", dim)
            + _vec_cols("v", dim)
            + ["classification", "min_eigenvalue"]
        )
        rows = []
        counts: dict[str, int] = {}
        for i, v in enumerate(vecs):
            rep = me.classify_point(m, me.TangentVec(base, v), tol)
            counts[rep.classification.value] = counts.get(rep.classification.value, 0) + 1
            rows.append([i, *base, *v, rep.classification.value, rep.min_eigenvalue])
        return {"command": cmd, "counts": counts}, header, rows

    if cmd == "scan":
        base = np.asarray(_param(cfg, "scan", "base", [0.0] * dim), dtype=float)
        samples = int(_param(cfg, "scan", "samples", 360))
        entries = me.convexity_scan(m, base, samples, tol)
        header = ["index"] + _vec_cols("dir", dim) + ["status", "min_eigenvalue"]
        rows = []
        counts: dict[str, int] = {}
        for i, e in enumerate(entries):
            counts[e.status] = counts.get(e.status, 0) + 1
            rows.append(
                [i, *e.direction, e.status, e.report.min_eigenvalue if e.report else float("nan")]
            )
        pd_frac = counts.get("PositiveDefinite", 0) / max(1, samples)
        return {"command": cmd, "counts": counts, "pd_fraction": pd_frac}, header, rows

    if cmd == "detcheck":
        if built.phi_parts is None:
            raise ValidationError(
                "detcheck needs a profile-family metric (phi or named node)", path="metric"
            )
        F0, beta, profile = built.phi_parts
        base = np.asarray(_param(cfg, "detcheck", "base", [0.0] * dim), dtype=float)
        samples = int(_param(cfg, "detcheck", "samples", 100))
        header = ["index"] + _vec_cols("v", dim) + ["det_formula", "det_direct", "rel_err"]
        rows = []
        worst = 0.0
        count = 0
        while count < samples:
            v = rng.normal(size=dim)
            if not bool(m.in_domain_many(base, v)):
                continue
            tv = me.TangentVec(base, v)
            lhs = cb.det_tensor_formula(F0, beta, profile, tv)
            rhs = float(np.linalg.det(me.tensor(m, tv)))
            err = abs(lhs - rhs) / max(1.0, abs(rhs))
            worst = max(worst, err)
            rows.append([count, *v, lhs, rhs, err])
            count += 1
        return {"command": cmd, "max_rel_err": worst}, header, rows

    if cmd == "geodesic":
        base = np.asarray(_param(cfg, "geodesic", "base", [0.0] * dim), dtype=float)
        vel = np.asarray(_param(cfg, "geodesic", "velocity", required=True), dtype=float)
        t_end = float(_param(cfg, "geodesic", "t_end", 1.0))
        step = float(_param(cfg, "geodesic", "step", 0.01))
        states = gd.geodesic_shoot(m, gd.GeodesicState(base, vel, 0.0), t_end, step)
        header = ["t"] + _vec_cols("x", dim) + _vec_cols("v", dim) + ["F"]
        rows = []
        for s in states:
            f = me.eval_F(m, me.TangentVec(s.position, s.velocity))
            rows.append([s.parameter, *s.position, *s.velocity, f])
        return {"command": cmd, "steps": len(rows) - 1}, header, rows

    if cmd == "expmap":
        base = np.asarray(_param(cfg, "expmap", "base", [0.0] * dim), dtype=float)
        vel = np.asarray(_param(cfg, "expmap", "velocity", required=True), dtype=float)
        step = float(_param(cfg, "expmap", "step", 0.01))
        end = gd.exp_map(m, base, vel, step)
        header = _vec_cols("base", dim) + _vec_cols("v", dim) + _vec_cols("exp", dim)
        rows = [[*base, *vel, *end]]
        return {"command": cmd, "endpoint": [float(v) for v in end]}, header, rows

    if cmd == "gauss":
        base = np.asarray(_param(cfg, "gauss", "base", [0.0] * dim), dtype=float)
        samples = int(_param(cfg, "gauss", "samples", 10))
        step = float(_param(cfg, "gauss", "step", 0.01))
        header = ["index"] + _vec_cols("v", dim) + _vec_cols("w", dim) + ["residual"]
        vs, ws = [], []
        while len(vs) < samples:
            v = rng.normal(size=dim)
            if not bool(m.in_domain_many(base, v)):
                continue
            vs.append(v)
            ws.append(rng.normal(size=dim))
        vs, ws = np.array(vs), np.array(ws)
        res = gd.gauss_residuals(m, base, vs, ws, step)
        rows = [[i, *v, *w, float(r)] for i, (v, w, r) in enumerate(zip(vs, ws, res))]
        worst = float(np.max(np.abs(res)))
        return {"command": cmd, "max_abs_residual": worst}, header, rows

    if cmd in ("separation", "ball", "reach"):
        box = _param(cfg, cmd, "box", required=True)
        lo = np.asarray(box[0], dtype=float)
        hi = np.asarray(box[1], dtype=float)
        resolution = int(_param(cfg, cmd, "resolution", 21))
        radius = int(_param(cfg, cmd, "neighbor_radius", 3))
        graph = gd.build_separation_graph(m, (lo, hi), resolution, radius)
        if cmd == "separation":
            src = np.asarray(_param(cfg, cmd, "source", required=True), dtype=float)
            dst = np.asarray(_param(cfg, cmd, "target", required=True), dtype=float)
            result = gd.separation(graph, src, dst)
            header = ["step"] + _vec_cols("x", dim)
            rows = [[i, *pt] for i, pt in enumerate(result.witness_path)]
            return (
                {
                    "command": cmd,
                    "value": float(result.value) if np.isfinite(result.value) else "Infinity",
                    "reachable": bool(result.reachable),
                    "nodes": graph.node_count,
                    "edges": int(graph.matrix.nnz),
                },
                header,
                rows,
            )
        if cmd == "reach":
            src = np.asarray(_param(cfg, cmd, "source", required=True), dtype=float)
            idx = gd.reachability(graph, src)
            header = ["index"] + _vec_cols("x", dim)
            rows = [[int(i), *graph.nodes[i]] for i in idx]
            return {"command": cmd, "count": int(idx.size)}, header, rows
        center = np.asarray(_param(cfg, cmd, "center", required=True), dtype=float)
        r = float(_param(cfg, cmd, "radius", required=True))
        direction = str(_param(cfg, cmd, "direction", "forward"))
        if direction not in ("forward", "backward"):
            raise ValidationError(
                f"direction must be 'forward' or 'backward', got {direction!r}",
                path=f"run.{cmd}.direction",
            )
        idx = gd.df_ball(graph, center, r, direction)
        header = ["index"] + _vec_cols("x", dim)
        rows = [[int(i), *graph.nodes[i]] for i in idx]
        return {"command": cmd, "count": int(idx.size)}, header, rows

    if cmd == "indicatrix":
        base = np.asarray(_param(cfg, "indicatrix", "base", [0.0] * dim), dtype=float)
        samples = int(_param(cfg, "indicatrix", "samples", 256))
        dirs = me.unit_directions(dim, samples)
        ok = m.in_domain_many(np.broadcast_to(base, dirs.shape), dirs)
        vals = m.F_many(np.broadcast_to(base, dirs.shape), dirs)
        header = ["index"] + _vec_cols("dir", dim) + _vec_cols("s", dim)
        rows = []
        for i in range(samples):
            if ok[i] and np.isfinite(vals[i]) and vals[i] > 0:
                pt = dirs[i] / vals[i]
                rows.append([i, *dirs[i], *pt])
        return {"command": cmd, "count": len(rows)}, header, rows

    if cmd == "oracle":
        samples = int(_param(cfg, "oracle", "samples", 200))
        otol = float(_param(cfg, "oracle", "tolerance", 1e-6))
        margin = float(_param(cfg, "oracle", "interior_margin", 0.15))
        base = np.asarray(_param(cfg, "oracle", "base", [0.0] * dim), dtype=float)
        header = ["index"] + _vec_cols("v", dim) + ["rel_err"]
        picked: list[np.ndarray] = []
        attempts = 0
        while len(picked) < samples and attempts < 200:
            attempts += 1
            vs = rng.normal(size=(2 * samples, dim))
            vs /= np.linalg.norm(vs, axis=-1, keepdims=True)
            ok = m.in_domain_many(np.broadcast_to(base, vs.shape), vs)
            for v, good in zip(vs, ok):
                if len(picked) >= samples:
                    break
                if not good:
                    continue
                if built.phi_parts is not None and not _interior_ratio(
                    built.phi_parts, base, v, margin
                ):
                    continue
                picked.append(v)
        vs = np.array(picked[:samples])
        bases = np.broadcast_to(base, vs.shape)
        ga = m.tensor_many(bases, vs)
        gf = m.fd_tensor_many(bases, vs)
        scale = np.maximum(1.0, np.max(np.abs(gf), axis=(-2, -1)))
        errs = np.max(np.abs(ga - gf), axis=(-2, -1)) / scale
        rows = [[i, *v, float(e)] for i, (v, e) in enumerate(zip(vs, errs))]
        worst = float(np.max(errs)) if errs.size else 0.0
        return (
            {"command": cmd, "max_rel_err": worst, "tolerance": otol, "ok": bool(worst <= otol)},
            header,
            rows,
        )

    raise ValidationError(f"unknown command {cmd!r}", path="command", constraint="command")


def write_csv(stream, header: list[str], rows: list[list]):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])


def builtin_config(name: str) -> str:
    """Text of a shipped example config (see `finslerkit/configs/`)."""
    return resources.files("finslerkit").joinpath(f"configs/{name}.json").read_text()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="finslerkit",
        description="Conic pseudo-Finsler metric toolkit: evaluations, convexity scans, "
        "geodesics and graph separations driven by one JSON config per run.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON config file")
    parser.add_argument("--out", default=None, help="CSV output path (default: <command>_out.csv)")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--tolerance", type=float, default=None, help="override run.tolerance")
    parser.add_argument("--json", action="store_true", help="print the summary as JSON")
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
        spec, cfg = parse_config(text)
        if args.seed is not None:
            cfg = RunConfig(cfg.dimension, cfg.chart_bounds, args.seed, cfg.tolerance, cfg.params)
        if args.tolerance is not None:
            cfg = RunConfig(cfg.dimension, cfg.chart_bounds, cfg.seed, args.tolerance, cfg.params)
        summary, header, rows = run_command(args.command, spec, cfg)
    except FinslerError as exc:
        code = 2 if exc.code in DOMAIN_CODES else 3
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return code
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error [validation_error]: {exc}", file=sys.stderr)
        return 2

    out_path = args.out or f"{args.command}_out.csv"
    buf = io.StringIO()
    write_csv(buf, header, rows)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    summary["csv"] = out_path
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        parts = ", ".join(f"{k}={v}" for k, v in sorted(summary.items()) if k != "command")
        print(f"{args.command}: {parts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
