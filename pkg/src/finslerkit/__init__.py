"""Conic pseudo-Finsler metric toolkit.

Construct norm gauges and homogeneous metric combinations with
closed-form fundamental tensors, classify where they stay strongly
convex, and explore geodesics and graph-based Finslerian separations.
"""

from .combinators import (
    LCombiner,
    PhiProfile,
    characterization_nd,
    check_conditions_ABC,
    chern_shen_check,
    combine,
    det_tensor_formula,
    f1f2_combine,
    kropina_profile,
    matsumoto_profile,
    named_family,
    phi_combine,
    phi_convexity_ok,
    power_combiner,
    power_q_combine,
    randers_profile,
    reversibilize,
    square_over_f0_profile,
    sum_combiner,
)
from .errors import FinslerError
from .geodesy import (
    GeodesicState,
    Polyline,
    SeparationGraph,
    SeparationResult,
    SmoothCurve,
    build_separation_graph,
    curve_length,
    df_ball,
    energy,
    exp_map,
    gauss_lemma_residual,
    geodesic_shoot,
    radial_minimality_test,
    reachability,
    segment,
    separation,
)
from .metrics import (
    ChartManifold,
    ConicMetric,
    OneFormAtom,
    RiemannAtom,
    TangentVec,
    angular_tensor,
    classify_point,
    constant_oneform,
    constant_riemann,
    convexity_scan,
    eval_F,
    euclidean_metric,
    lower_bound_check,
    minkowski_metric,
    oneform_metric,
    riemann_metric,
    tensor,
    unit_directions,
    whole_plane,
)
from .minkowski import (
    ConicDomainV,
    GaugeNorm,
    PolarCurve2D,
    affine_ball,
    curve_convexity,
    downward_parabola_curve,
    fundamental_inequality_check,
    fundamental_tensor_norm,
    gauge_from_ball,
    gauge_from_curve,
    lorentz_curve,
    polar_curve,
    spiral_curve,
    sqrt_parabola_curve,
    triangle_report,
    unit_circle_curve,
    wavy_curve,
)
from .numkernel import (
    EigenReport,
    Definiteness,
    eigen_classify,
    fd_gradient,
    fd_hessian,
    integrate_1d,
    ray_root,
)

__version__ = "0.1.0"
