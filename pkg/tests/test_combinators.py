import numpy as np
import pytest

from finslerkit import combinators as cb
from finslerkit import metrics as me
from finslerkit.errors import BadExponent, DomainEmpty, OutsideDomain
from finslerkit.numkernel import Definiteness, eigen_classify

BASE = np.zeros(2)


def euclid(n=2):
    return me.euclidean_metric(n)


def unit_samples(m, count, seed, margin_fn=None):
    rng = np.random.default_rng(seed)
    base = np.zeros(m.dimension)
    out = []
    while len(out) < count:
        v = rng.normal(size=m.dimension)
        v /= np.linalg.norm(v)
        if not bool(m.in_domain_many(base, v)):
            continue
        if margin_fn is not None and not margin_fn(v):
            continue
        out.append(v)
    return np.array(out)


def oracle_gap(m, count=60, seed=0, margin_fn=None):
    vs = unit_samples(m, count, seed, margin_fn)
    base = np.zeros((count, m.dimension))
    ga = m.tensor_many(base, vs)
    gf = m.fd_tensor_many(base, vs)
    scale = np.maximum(1.0, np.max(np.abs(gf), axis=(-2, -1)))
    return float(np.max(np.max(np.abs(ga - gf), axis=(-2, -1)) / scale))


class TestProfiles:
    @pytest.mark.parametrize(
        "profile",
        [
            cb.randers_profile(),
            cb.kropina_profile(0.5),
            cb.kropina_profile(2.0),
            cb.matsumoto_profile(1.0),
            cb.matsumoto_profile(-2.0),
            cb.square_over_f0_profile(),
        ],
    )
    def test_derived_identities(self, profile):
        # phi1 = 2 phi (phi - s phi') and phi2 = 4 phi^3 phi'' on samples
        rng = np.random.default_rng(5)
        count = 0
        while count < 40:
            s = rng.uniform(-3, 3)
            if not bool(profile.contains(s)):
                continue
            p = float(profile.phi(s))
            pd = float(profile.phi_dot(s))
            pdd = float(profile.phi_ddot(s))
            scale = max(1.0, abs(p) ** 4, abs(p * pd * s))
            assert abs(float(profile.phi1(s)) - 2 * p * (p - s * pd)) < 1e-10 * scale
            assert abs(float(profile.phi2(s)) - 4 * p**3 * pdd) < 1e-10 * scale * max(1, abs(pdd))
            count += 1

    def test_kropina_requires_positive_exponent(self):
        with pytest.raises(BadExponent):
            cb.kropina_profile(0.0)

    def test_matsumoto_exponent_gap(self):
        with pytest.raises(BadExponent):
            cb.matsumoto_profile(-0.5)


class TestPhiConvexityOk:
    def test_randers(self):
        assert cb.phi_convexity_ok(cb.randers_profile(), 0.5)

    def test_matsumoto_outside_strong_region(self):
        assert not cb.phi_convexity_ok(cb.matsumoto_profile(1.0), 0.6)

    def test_kropina(self):
        assert cb.phi_convexity_ok(cb.kropina_profile(1.0), 0.3)

    def test_outside_profile_interval_rejected(self):
        from finslerkit.errors import OutsideProfile

        with pytest.raises(OutsideProfile):
            cb.phi_convexity_ok(cb.kropina_profile(1.0), 0.0)


class TestProfileConvexitySufficiency:
    def test_pointwise_condition_excludes_indefiniteness(self):
        # wherever the profile condition holds, classification is never Indefinite
        E = euclid()
        beta = me.constant_oneform([0.8, 0.0])
        prof = cb.matsumoto_profile(1.0)
        m = cb.phi_combine(E, beta, prof)
        rng = np.random.default_rng(8)
        checked = 0
        while checked < 200:
            v = rng.normal(size=2)
            v /= np.linalg.norm(v)
            if not bool(m.in_domain_many(BASE, v)):
                continue
            s = 0.8 * v[0]
            if cb.phi_convexity_ok(prof, s):
                rep = me.classify_point(m, me.TangentVec(BASE, v), 1e-9)
                assert rep.classification is not Definiteness.INDEFINITE
            checked += 1


class TestChernShen:
    def test_randers_all_b(self):
        assert cb.chern_shen_check(cb.randers_profile(), 1.0, grid=48)

    def test_one_plus_s_squared_fails_for_large_band(self):
        prof = cb.PhiProfile(
            phi=lambda s: 1.0 + np.asarray(s, float) ** 2,
            phi_dot=lambda s: 2.0 * np.asarray(s, float),
            phi_ddot=lambda s: 2.0 * np.ones_like(np.asarray(s, float)),
        )
        assert not cb.chern_shen_check(prof, 2.0, grid=48)

    def test_convex_profile_with_positive_slope_condition(self):
        # phi = exp(s): phi - s phi' = (1-s) e^s > 0 on s < 1 and phi'' >= 0
        prof = cb.PhiProfile(
            phi=lambda s: np.exp(np.asarray(s, float)),
            phi_dot=lambda s: np.exp(np.asarray(s, float)),
            phi_ddot=lambda s: np.exp(np.asarray(s, float)),
            intervals=((-0.9, 0.9),),
        )
        assert cb.chern_shen_check(prof, 0.9, grid=48)


class TestCombinerLaws:
    @pytest.mark.parametrize(
        "combiner,point",
        [
            (cb.sum_combiner(2), np.array([1.3, 0.4])),
            (cb.power_combiner(2, 0, 2.0), np.array([1.3, 0.4])),
            (cb.power_combiner(1, 1, 1.0), np.array([1.0, 0.6])),
            (cb.power_combiner(1, 1, 3.0), np.array([0.8, -0.5])),
        ],
        ids=["sum", "power2", "power1", "power3"],
    )
    def test_homogeneity_and_derivative_consistency(self, combiner, point):
        val = combiner.value(point)
        for lam in (0.5, 2.0):
            assert combiner.value(lam * point) == pytest.approx(lam * lam * val, rel=1e-12)
        from finslerkit.numkernel import fd_gradient, fd_hessian

        grad_fd = fd_gradient(lambda x: combiner.value(x), point)
        hess_fd = fd_hessian(lambda x: combiner.value(x), point)
        assert np.allclose(combiner.grad(point), grad_fd, rtol=1e-5, atol=1e-6)
        assert np.allclose(combiner.hess(point), hess_fd, rtol=1e-4, atol=1e-4)


class TestCombine:
    def test_identity_combination(self):
        E = euclid()
        ident = cb.LCombiner(
            n=1,
            m=0,
            L=lambda x, p=None: x[..., 0] ** 2,
            grad_L=lambda x, p=None: 2.0 * x,
            hess_L=lambda x, p=None: np.broadcast_to(2.0 * np.eye(1), x.shape + (1,)).copy(),
            name="identity",
        )
        m = cb.combine(ident, [E], [])
        v = np.array([0.6, -0.8])
        assert float(m.F_many(BASE, v)) == pytest.approx(float(E.F_many(BASE, v)))
        assert np.allclose(m.tensor_many(BASE, v), E.tensor_many(BASE, v), atol=1e-12)

    def test_sum_of_two_euclideans(self):
        m = cb.combine(cb.sum_combiner(2), [euclid(), euclid()], [])
        v = np.array([1.0, 0.0])
        assert float(m.F_many(BASE, v)) == pytest.approx(2.0)
        assert np.allclose(m.tensor_many(BASE, v), 4.0 * np.eye(2), atol=1e-12)

    def test_randers_via_general_l(self):
        # the q=1 power law uses |beta|, so it reproduces Randers on {beta > 0}
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        via_l = cb.combine(cb.power_combiner(1, 1, 1.0), [E], [beta])
        named, _ = cb.named_family("randers", E, beta)
        vs = unit_samples(named, 40, seed=2, margin_fn=lambda v: v[0] > 0.1)
        b2 = np.zeros((40, 2))
        assert np.allclose(via_l.tensor_many(b2, vs), named.tensor_many(b2, vs), atol=1e-9)

    def test_fd_fallback_for_user_l(self):
        # grad/hess omitted: combination still works against the FD oracle
        mix = cb.LCombiner(
            n=2,
            m=0,
            L=lambda x, p=None: x[..., 0] ** 2 + 0.5 * x[..., 1] ** 2 + 0.3 * x[..., 0] * x[..., 1],
            name="quadratic-mix",
        )
        stretched = me.riemann_metric(me.constant_riemann(np.diag([2.0, 1.0])), me.whole_plane(2))
        m = cb.combine(mix, [euclid(), stretched], [])
        assert oracle_gap(m, count=25, seed=3) < 1e-4

    def test_domain_empty(self):
        E = euclid()
        never = cb.LCombiner(
            n=1,
            m=0,
            L=lambda x, p=None: x[..., 0] ** 2,
            cone_B=lambda x: np.zeros(np.asarray(x)[..., 0].shape, dtype=bool),
            name="empty",
        )
        with pytest.raises(DomainEmpty):
            cb.combine(never, [E], [])


class TestConditionsABC:
    def test_sum_at_positive_point(self):
        rep = cb.check_conditions_ABC(cb.sum_combiner(2), [1.0, 1.0])
        assert rep.A_ok and rep.B_ok and rep.C_ok

    def test_lorentz_like_l_fails_b(self):
        lor = cb.LCombiner(
            n=2,
            m=0,
            L=lambda x, p=None: x[..., 0] ** 2 - x[..., 1] ** 2,
            grad_L=lambda x, p=None: np.stack([2 * x[..., 0], -2 * x[..., 1]], axis=-1),
            hess_L=lambda x, p=None: np.broadcast_to(np.diag([2.0, -2.0]), x.shape + (2,)).copy(),
            name="lorentz-like",
        )
        rep = cb.check_conditions_ABC(lor, [1.0, 1.0])
        assert not rep.B_ok

    def test_power_combiner_hessian_psd(self):
        rep = cb.check_conditions_ABC(cb.power_combiner(1, 1, 2.0), [1.0, 0.7])
        assert rep.A_ok and rep.B_ok

    def test_abc_implies_positive_definite(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        m = cb.power_q_combine([E], [beta], 2.0)
        comb = cb.power_combiner(1, 1, 2.0)
        rng = np.random.default_rng(9)
        checked = 0
        while checked < 50:
            v = rng.normal(size=2)
            if not bool(m.in_domain_many(BASE, v)):
                continue
            point = np.array([float(E.F_many(BASE, v)), float(beta.pair(BASE, v))])
            rep = cb.check_conditions_ABC(comb, point)
            if rep.all_ok:
                assert me.classify_point(m, me.TangentVec(BASE, v)).is_positive_definite
            checked += 1


class TestPowerQ:
    def test_single_metric_unchanged(self):
        E = euclid()
        for q in (1.0, 2.0, 3.0):
            m = cb.power_q_combine([E], [], q)
            v = np.array([0.3, 0.4])
            assert float(m.F_many(BASE, v)) == pytest.approx(0.5)
            assert np.allclose(m.tensor_many(BASE, v), np.eye(2), atol=1e-10)

    def test_two_euclideans_q2(self):
        m = cb.power_q_combine([euclid(), euclid()], [], 2.0)
        v = np.array([1.0, 0.0])
        assert float(m.F_many(BASE, v)) == pytest.approx(np.sqrt(2.0))
        assert np.allclose(m.tensor_many(BASE, v), 2.0 * np.eye(2), atol=1e-12)

    def test_q1_with_form_is_randers_like(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        m = cb.power_q_combine([E], [beta], 1.0)
        assert oracle_gap(m, count=60, seed=4, margin_fn=lambda v: abs(v[0]) > 0.25) < 1e-6

    def test_exponent_validation(self):
        with pytest.raises(BadExponent):
            cb.power_q_combine([euclid()], [], 0.5)
        with pytest.raises(BadExponent):
            cb.power_q_combine([], [me.constant_oneform([1.0, 0.0])], 2.0)

    def test_low_q_excludes_form_kernel(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        m = cb.power_q_combine([E], [beta], 1.5)
        assert not bool(m.in_domain_many(BASE, np.array([0.0, 1.0])))
        m2 = cb.power_q_combine([E], [beta], 2.0)
        assert bool(m2.in_domain_many(BASE, np.array([0.0, 1.0])))


class TestPhiCombine:
    def test_constant_profile_is_identity(self):
        E = euclid()
        one = cb.PhiProfile(
            phi=lambda s: np.ones_like(np.asarray(s, float)),
            phi_dot=lambda s: np.zeros_like(np.asarray(s, float)),
            phi_ddot=lambda s: np.zeros_like(np.asarray(s, float)),
        )
        m = cb.phi_combine(E, me.constant_oneform([0.5, 0.0]), one)
        v = np.array([0.3, 0.4])
        assert float(m.F_many(BASE, v)) == pytest.approx(0.5)
        assert np.allclose(m.tensor_many(BASE, v), np.eye(2), atol=1e-12)

    def test_randers_profile_matches_closed_form(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        m = cb.phi_combine(E, beta, cb.randers_profile())
        v = np.array([1.0, 0.0])
        assert np.allclose(m.tensor_many(BASE, v), np.diag([2.25, 1.5]), atol=1e-12)
        assert oracle_gap(m, count=60, seed=6) < 1e-6

    def test_kropina_value_and_tensor(self):
        E = euclid()
        beta = me.constant_oneform([1.0, 0.0])
        m = cb.phi_combine(E, beta, cb.kropina_profile(1.0))
        v = np.array([1.0, 0.0])
        assert float(m.F_many(BASE, v)) == pytest.approx(1.0)  # alpha^2/|beta| at unit
        v2 = np.array([1.0, 1.0])
        assert float(m.F_many(BASE, v2)) == pytest.approx(2.0 / 1.0)
        assert oracle_gap(m, count=60, seed=7, margin_fn=lambda v: abs(v[0]) > 0.25) < 1e-6


class TestNamedFamilies:
    def test_matsumoto_strong_domain_formula(self):
        E = euclid()
        beta = me.constant_oneform([0.8, 0.0])
        metric, strong = cb.named_family("matsumoto", E, beta, q=1)
        rng = np.random.default_rng(11)
        for _ in range(200):
            v = rng.normal(size=2)
            f0 = float(np.linalg.norm(v))
            bv = 0.8 * v[0]
            expected = (f0 != bv) and ((f0 - 2 * bv) * (f0 - bv) > 0)
            assert strong(me.TangentVec(BASE, v)) == expected

    def test_randers_pd_everywhere(self):
        E = euclid()
        metric, strong = cb.named_family("randers", E, me.constant_oneform([0.5, 0.0]))
        entries = me.convexity_scan(metric, BASE, 180)
        assert all(e.status == "PositiveDefinite" for e in entries)

    def test_kropina_strong_domain_excludes_kernel(self):
        E = euclid()
        metric, strong = cb.named_family("kropina", E, me.constant_oneform([0.5, 0.0]), q=1)
        assert not strong(me.TangentVec(BASE, np.array([0.0, 1.0])))
        assert strong(me.TangentVec(BASE, np.array([1.0, 0.2])))

    def test_square_over_f0(self):
        E = euclid()
        metric, strong = cb.named_family("square_over_f0", E, me.constant_oneform([0.5, 0.0]))
        v = np.array([1.0, 0.0])
        # (F0 + beta)^2 / F0 = (1 + 0.5)^2 / 1
        assert float(metric.F_many(BASE, v)) == pytest.approx(2.25)
        assert oracle_gap(metric, count=40, seed=13) < 1e-6

    def test_strong_domain_matches_classification_3d(self):
        # above dimension two the declared domain is exactly the PD region
        E3 = euclid(3)
        base = np.zeros(3)
        beta = me.constant_oneform([0.8, 0.0, 0.0])
        metric, strong = cb.named_family("matsumoto", E3, beta, q=1)
        rng = np.random.default_rng(15)
        checked = 0
        while checked < 300:
            v = rng.normal(size=3)
            v /= np.linalg.norm(v)
            tv = me.TangentVec(base, v)
            if not bool(metric.in_domain_many(base, v)):
                continue
            g = me.tensor(metric, tv)
            rep = eigen_classify(g, 1e-9)
            # skip the tolerance shell around the degenerate transition
            if abs(rep.min_eigenvalue) < 1e-7 * max(np.abs(rep.eigenvalues)):
                continue
            assert strong(tv) == rep.is_positive_definite
            checked += 1

    def test_strong_domain_sufficient_2d(self):
        # in dimension two membership still guarantees positive definiteness
        E = euclid()
        beta = me.constant_oneform([0.8, 0.0])
        metric, strong = cb.named_family("matsumoto", E, beta, q=1)
        rng = np.random.default_rng(16)
        checked = 0
        while checked < 200:
            v = rng.normal(size=2)
            v /= np.linalg.norm(v)
            tv = me.TangentVec(BASE, v)
            if not bool(metric.in_domain_many(BASE, v)) or not strong(tv):
                continue
            assert me.classify_point(metric, tv, 1e-9).is_positive_definite
            checked += 1


class TestF1F2:
    @staticmethod
    def _pair(n=2):
        f1 = euclid(n)
        f2 = me.riemann_metric(me.constant_riemann(0.04 * np.eye(n)), me.whole_plane(n))
        return f1, f2

    def test_constant_profile_identity(self):
        f1, f2 = self._pair()
        one = cb.PhiProfile(
            phi=lambda s: np.ones_like(np.asarray(s, float)),
            phi_dot=lambda s: np.zeros_like(np.asarray(s, float)),
            phi_ddot=lambda s: np.zeros_like(np.asarray(s, float)),
        )
        m = cb.f1f2_combine(f1, f2, one)
        v = np.array([3.0, 4.0])
        assert float(m.F_many(BASE, v)) == pytest.approx(5.0)

    def test_equal_metrics_scale_by_profile(self):
        f1 = euclid()
        prof = cb.PhiProfile(
            phi=lambda s: 2.0 + 0.5 * np.asarray(s, float),
            phi_dot=lambda s: 0.5 * np.ones_like(np.asarray(s, float)),
            phi_ddot=lambda s: np.zeros_like(np.asarray(s, float)),
            intervals=((0.0, 10.0),),
        )
        m = cb.f1f2_combine(f1, euclid(), prof)
        v = np.array([1.0, 0.0])
        c = 2.0 + 0.5  # phi evaluated at s = 1
        assert float(m.F_many(BASE, v)) == pytest.approx(c)
        assert np.allclose(m.tensor_many(BASE, v), c * c * np.eye(2), atol=1e-9)

    def test_generalized_matsumoto_oracle(self):
        f1, f2 = self._pair()
        m = cb.f1f2_combine(f1, f2, cb.matsumoto_profile(1.0))
        assert oracle_gap(m, count=60, seed=17) < 1e-6


class TestFamilyClosedForms:
    """The family tensors written out term by term, as an exact second route.

    These transcriptions share no code with the profile machinery: they pin
    the coefficients to ~1e-10, an order stronger than the FD oracle.
    """

    @staticmethod
    def _pieces(metric, v):
        g = metric.tensor_many(BASE, v)
        F = float(metric.F_many(BASE, v))
        u = g @ v
        h = g - np.outer(u, u) / (F * F)
        return F, u, h

    def _samples(self, m, count, seed, margin_fn=None):
        return unit_samples(m, count, seed, margin_fn)

    def test_randers_tensor_transcription(self):
        E = euclid()
        b = np.array([0.5, 0.0])
        metric, _ = cb.named_family("randers", E, me.constant_oneform(b))
        for v in self._samples(metric, 25, seed=101):
            F0, u0, h0 = self._pieces(E, v)
            bv = float(b @ v)
            head = u0 / F0 + b
            expected = (F0 + bv) / F0 * h0 + np.outer(head, head)
            assert np.allclose(metric.tensor_many(BASE, v), expected, atol=1e-10)

    @pytest.mark.parametrize("q", [0.5, 1.0, 2.0])
    def test_kropina_tensor_transcription(self, q):
        E = euclid()
        b = np.array([0.5, 0.0])
        metric, _ = cb.named_family("kropina", E, me.constant_oneform(b), q=q)
        margin = lambda v: abs(0.5 * v[0]) > 0.2
        for v in self._samples(metric, 25, seed=102, margin_fn=margin):
            F0, u0, h0 = self._pieces(E, v)
            bv = float(b @ v)
            s = bv / F0
            c1 = u0 / F0 - (F0 / bv) * b
            c2 = (q + 1) * u0 / F0 - q * (F0 / bv) * b
            expected = ((q + 1) * h0 + q * (q + 1) * np.outer(c1, c1) + np.outer(c2, c2)) / abs(
                s
            ) ** (2 * q)
            assert np.allclose(metric.tensor_many(BASE, v), expected, atol=1e-9)

    @pytest.mark.parametrize("q", [1.0, 2.0, -2.0])
    def test_matsumoto_tensor_transcription(self, q):
        E = euclid()
        b = np.array([0.5, 0.0])
        metric, _ = cb.named_family("matsumoto", E, me.constant_oneform(b), q=q)
        for v in self._samples(metric, 25, seed=103):
            F0, u0, h0 = self._pieces(E, v)
            bv = float(b @ v)
            lead = (F0 - bv) * (F0 - (q + 1) * bv) / (F0 * F0)
            c1 = bv / (F0 * F0) * u0 - b
            c2 = (F0 - (q + 1) * bv) / (F0 * F0) * u0 + q * b
            expected = (
                lead * h0 + q * (q + 1) * np.outer(c1, c1) + np.outer(c2, c2)
            ) / np.abs((F0 - bv) / F0) ** (2 * q + 2)
            assert np.allclose(metric.tensor_many(BASE, v), expected, atol=1e-9)

    def test_two_metric_matsumoto_transcription(self):
        # second-angular coefficient is q (F1 - F2)/F2: the finite-difference
        # oracle arbitrates this (an F1/F2-inflated variant fails it)
        q = 1.0
        f1 = euclid()
        f2 = me.riemann_metric(me.constant_riemann(0.04 * np.eye(2)), me.whole_plane(2))
        metric = cb.f1f2_combine(f1, f2, cb.matsumoto_profile(q))
        for v in self._samples(metric, 25, seed=104):
            Fa, ua, ha = self._pieces(f1, v)
            Fb, ub, hb = self._pieces(f2, v)
            lead = (Fa - Fb) * (Fa - (q + 1) * Fb) / (Fa * Fa)
            c1 = Fb / (Fa * Fa) * ua - ub / Fb
            c2 = (Fa - (q + 1) * Fb) / (Fa * Fa) * ua + q * ub / Fb
            expected = (
                lead * ha
                + q * (Fa - Fb) / Fb * hb
                + q * (q + 1) * np.outer(c1, c1)
                + np.outer(c2, c2)
            ) / ((Fa - Fb) / Fa) ** (2 * q + 2)
            assert np.allclose(metric.tensor_many(BASE, v), expected, atol=1e-9)
            # the oracle rejects the inflated variant wherever F1 != F2 scales
            inflated = expected + (q * (Fa - Fb) / Fb * (Fa / Fb - 1.0)) * hb / (
                (Fa - Fb) / Fa
            ) ** (2 * q + 2)
            fd = metric.fd_tensor_many(BASE, v)
            assert np.max(np.abs(expected - fd)) < 1e-6
            assert np.max(np.abs(inflated - fd)) > 1e-2

    def test_sum_tensor_transcription(self):
        f1 = euclid()
        f2 = me.riemann_metric(me.constant_riemann(np.diag([2.0, 1.0])), me.whole_plane(2))
        metric = cb.combine(cb.sum_combiner(2), [f1, f2], [])
        for v in self._samples(metric, 25, seed=105):
            F1, u1, h1 = self._pieces(f1, v)
            F2, u2, h2 = self._pieces(f2, v)
            F = F1 + F2
            head = u1 / F1 + u2 / F2
            expected = F * (h1 / F1 + h2 / F2) + np.outer(head, head)
            assert np.allclose(metric.tensor_many(BASE, v), expected, atol=1e-10)


class TestDeterminantFormula:
    def test_randers_spot_value(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        tv = me.TangentVec(BASE, np.array([1.0, 0.0]))
        val = cb.det_tensor_formula(E, beta, cb.randers_profile(), tv)
        assert val == pytest.approx(3.375, abs=1e-12)
        m, _ = cb.named_family("randers", E, beta)
        assert val == pytest.approx(float(np.linalg.det(me.tensor(m, tv))), rel=1e-10)

    def test_constant_profile_gives_base_determinant(self):
        G = me.constant_riemann(np.diag([2.0, 3.0]))
        F0 = me.riemann_metric(G, me.whole_plane(2))
        one = cb.PhiProfile(
            phi=lambda s: np.ones_like(np.asarray(s, float)),
            phi_dot=lambda s: np.zeros_like(np.asarray(s, float)),
            phi_ddot=lambda s: np.zeros_like(np.asarray(s, float)),
        )
        tv = me.TangentVec(BASE, np.array([0.4, 1.0]))
        val = cb.det_tensor_formula(F0, me.constant_oneform([0.3, 0.0]), one, tv)
        assert val == pytest.approx(6.0, rel=1e-12)

    def test_matches_direct_determinant_randomized(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        prof = cb.matsumoto_profile(1.0)
        m = cb.phi_combine(E, beta, prof)
        rng = np.random.default_rng(19)
        checked = 0
        while checked < 100:
            v = rng.normal(size=2)
            if not bool(m.in_domain_many(BASE, v)):
                continue
            tv = me.TangentVec(BASE, v)
            lhs = cb.det_tensor_formula(E, beta, prof, tv)
            rhs = float(np.linalg.det(me.tensor(m, tv)))
            assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(rhs))
            checked += 1

    def test_matsumoto_degeneracy_zeroes_determinant(self):
        # with |beta| = 0.5 the transition direction is v parallel to the form,
        # where the determinant factor vanishes exactly
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        prof = cb.matsumoto_profile(1.0)
        tv = me.TangentVec(BASE, np.array([1.0, 0.0]))
        assert abs(cb.det_tensor_formula(E, beta, prof, tv)) < 1e-12
        # and the determinant decays to zero along a scan toward it
        vals = []
        for th in (0.2, 0.1, 0.05, 0.01):
            v = np.array([np.cos(th), np.sin(th)])
            vals.append(abs(cb.det_tensor_formula(E, beta, prof, me.TangentVec(BASE, v))))
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-2


class TestCharacterization:
    def test_randers_always_true(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        rng = np.random.default_rng(21)
        for _ in range(50):
            v = rng.normal(size=2)
            assert cb.characterization_nd(E, beta, cb.randers_profile(), me.TangentVec(BASE, v))

    def test_matsumoto_3d_bad_region(self):
        E3 = euclid(3)
        beta = me.constant_oneform([0.8, 0.0, 0.0])
        prof = cb.matsumoto_profile(1.0)
        v = np.array([1.0, 0.05, 0.05])  # s close to 0.8: (1-s)(1-2s) < 0
        assert not cb.characterization_nd(E3, beta, prof, me.TangentVec(np.zeros(3), v))

    @pytest.mark.parametrize("dim", [2, 3])
    def test_equivalence_with_classification(self, dim):
        E = euclid(dim)
        bv = np.zeros(dim)
        bv[0] = 0.8
        beta = me.constant_oneform(bv)
        prof = cb.matsumoto_profile(1.0)
        m = cb.phi_combine(E, beta, prof)
        base = np.zeros(dim)
        rng = np.random.default_rng(23 + dim)
        checked = 0
        while checked < 300:
            v = rng.normal(size=dim)
            v /= np.linalg.norm(v)
            if not bool(m.in_domain_many(base, v)):
                continue
            tv = me.TangentVec(base, v)
            rep = eigen_classify(me.tensor(m, tv), 1e-9)
            if abs(rep.min_eigenvalue) < 1e-7 * max(np.abs(rep.eigenvalues)):
                continue
            assert cb.characterization_nd(E, beta, prof, tv) == rep.is_positive_definite
            checked += 1


class TestReversibilize:
    def test_reversible_input_scales(self):
        E = euclid()
        rs = cb.reversibilize(E, "sum")
        rq = cb.reversibilize(E, "quadratic")
        v = np.array([3.0, 4.0])
        assert float(rs.F_many(BASE, v)) == pytest.approx(10.0)
        assert float(rq.F_many(BASE, v)) == pytest.approx(5.0 * np.sqrt(2.0))

    def test_randers_reversibilizations(self):
        E = euclid()
        beta = me.constant_oneform([0.5, 0.0])
        rd, _ = cb.named_family("randers", E, beta)
        rs = cb.reversibilize(rd, "sum")
        rq = cb.reversibilize(rd, "quadratic")
        rng = np.random.default_rng(27)
        for _ in range(40):
            v = rng.normal(size=2)
            alpha = float(np.linalg.norm(v))
            bv = 0.5 * v[0]
            assert float(rs.F_many(BASE, v)) == pytest.approx(2.0 * alpha, rel=1e-12)
            assert float(rq.F_many(BASE, v)) ** 2 == pytest.approx(
                2.0 * alpha**2 + 2.0 * bv**2, rel=1e-12
            )

    def test_outputs_reversible_exactly(self):
        E = euclid()
        rd, _ = cb.named_family("randers", E, me.constant_oneform([0.3, 0.2]))
        rs = cb.reversibilize(rd, "sum")
        rq = cb.reversibilize(rd, "quadratic")
        rng = np.random.default_rng(29)
        vs = rng.normal(size=(50, 2))
        b = np.zeros((50, 2))
        assert np.array_equal(rs.F_many(b, vs), rs.F_many(b, -vs))
        assert np.array_equal(rq.F_many(b, vs), rq.F_many(b, -vs))

    def test_recovery_identity(self):
        E = euclid()
        rd, _ = cb.named_family("randers", E, me.constant_oneform([0.5, 0.0]))
        rs = cb.reversibilize(rd, "sum")
        rq = cb.reversibilize(rd, "quadratic")
        rng = np.random.default_rng(31)
        vs = rng.normal(size=(200, 2))
        b = np.zeros((200, 2))
        ft = rs.F_many(b, vs)
        fh = rq.F_many(b, vs)
        f = rd.F_many(b, vs)
        fm = rd.F_many(b, -vs)
        sign = np.where(f >= fm, 1.0, -1.0)
        recovered = 0.5 * (ft + sign * np.sqrt(np.maximum(2.0 * fh**2 - ft**2, 0.0)))
        assert np.max(np.abs(recovered - f)) < 1e-10

    def test_conic_domain_rejected(self):
        lorentz_like = me.oneform_metric(me.constant_oneform([0.0, 1.0]))
        with pytest.raises(OutsideDomain):
            cb.reversibilize(lorentz_like, "sum")

    def test_tensors_against_oracle(self):
        E = euclid()
        rd, _ = cb.named_family("randers", E, me.constant_oneform([0.5, 0.0]))
        for mode in ("sum", "quadratic"):
            m = cb.reversibilize(rd, mode)
            assert oracle_gap(m, count=40, seed=33) < 1e-6
