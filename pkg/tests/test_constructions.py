import math

import numpy as np
import pytest

import grpdconn.catalog as cat
from grpdconn.config import DEFAULT
from grpdconn.connection import (
    Connection,
    MULTIPLICATIVE,
    multiplicativity_check_pointwise,
)
from grpdconn.constructions import (
    AtlasWindow,
    HaarFiberQuadrature,
    TrivializingAtlas,
    bump_partition,
    complete_connection_builder,
    constant_profile,
    flatness_certificate_check,
    glue_local_trivial,
    haar_average,
    hyperbolic_profile,
    invariant_exhaustion,
    level_schedule,
    morita_compare,
    morita_connection,
    proper_family_connection,
    verify_slab_disjointness,
)
from grpdconn.errors import (
    CertificateFailure,
    NonProjectableInput,
    NotSourceProper,
    PartitionGap,
    QuadratureMissing,
)
from grpdconn.geometry import Point, Tangent, line
from grpdconn.groupoid import rng_for
from grpdconn.scenarios import morita_setup, skewed_family_field, so2_family_setup, sproper_setup
from grpdconn.transport import completeness_probe


# ---------------------------------------------------------------------------
# Morita lifts


def test_morita_point_base_lift_is_flat():
    # circle group over a point, base map R -> pt: lift = (0, a, 0)
    H = cat.so2_group()
    pi = cat.pullback_of_projection(H, line(1, name="F"))

    def hor0(x, w):
        return Tangent(x, (0.0,) * x.patch.dim)

    c = morita_connection(pi, hor0)
    split3, join3 = pi.metadata["triple"]
    g = join3(Point.make(H.arrows, 0, (1.0,)),
              Point.make(line(1, name="F"), 0, (2.0,)),
              Point.make(line(1, name="F"), 0, (3.0,)))
    a = Tangent(pi.arrow_map(g), (1.0,))
    # packed coordinates are (f_t, f_s, theta)
    assert c.hor(g, a).coeffs == (0.0, 0.0, 1.0)


def test_morita_uniqueness_comparison():
    c, _ = morita_setup()
    # a user-supplied lift built from the same base connection matches
    again, _ = morita_setup()
    assert morita_compare(c, again, 30, seed=5) < 1e-12
    # a vertically perturbed lift deviates
    def perturbed(g, a):
        base = c.hor(g, a)
        coeffs = list(base.coeffs)
        coeffs[2] += 1e-3 * a.coeffs[0]
        return Tangent(g, tuple(coeffs))

    c2 = Connection(c.morphism, perturbed, c.hor0, {})
    dev = morita_compare(c, c2, 30, seed=5)
    assert 1e-4 < dev < 1e-2


def test_circle_group_pullback_loop_transport_returns():
    # transport along the full circle loop ends where it started
    from grpdconn.paths import coordinate_path
    from grpdconn.transport import parallel_transport

    H = cat.so2_group()
    pi = cat.pullback_of_projection(H, line(1, name="F"))

    def hor0(x, w):
        return Tangent(x, (0.0,) * x.patch.dim)

    c = morita_connection(pi, hor0)
    split3, join3 = pi.metadata["triple"]
    F = line(1, name="F")
    g = join3(Point.make(H.arrows, 0, (0.0,)), Point.make(F, 0, (1.5,)),
              Point.make(F, 0, (-0.5,)))
    loop = coordinate_path(H.arrows, 0, lambda t: (2 * math.pi * t,),
                           lambda t: (2 * math.pi,), is_loop=True)
    out = parallel_transport(c, loop, g, 1.0)
    assert out.completed
    from grpdconn.geometry import distance

    assert distance(out.end, g) < 1e-8


# ---------------------------------------------------------------------------
# gluing


def test_single_window_glue_is_flat():
    fam, atlas, profile, schedule = sproper_setup()
    single = TrivializingAtlas(fam, [atlas.windows[0].__class__(
        (-2.8, 2.8), (-3.2, 3.2),
        lambda y: 0.0, lambda y: 0.0, lambda iv: iv * 0.0)], atlas.fiber)
    c = glue_local_trivial(fam, single, bump_partition(single.windows))
    g = fam.total.arrow_sampler(rng_for(3, 0))
    w = Tangent(fam.arrow_map(g), (1.0,))
    assert c.hor(g, w).coeffs == (1.0, 0.0)
    rep = multiplicativity_check_pointwise(c, 30, seed=3)
    assert rep.verdict == MULTIPLICATIVE


def test_two_window_glue_multiplicative():
    fam, atlas, profile, schedule = sproper_setup()
    c = glue_local_trivial(fam, atlas, bump_partition(atlas.windows))
    rep = multiplicativity_check_pointwise(c, 40, seed=3)
    assert rep.verdict == MULTIPLICATIVE
    v = completeness_probe(c, lambda rng: _box_path(fam, rng), 40, seed=3)
    assert v.kind == "NoCounterexampleFound"


def _box_path(fam, rng):
    a = float(rng.uniform(-2, 2))
    b = float(rng.uniform(-2, 2))
    gamma = cat.segment_path(fam.base_grpd.objects, 0, (a,), (b,))
    return gamma, fam.fiber_sampler(gamma.point(0.0), rng)


def test_partition_gap_detected():
    fam, atlas, profile, schedule = sproper_setup()
    gappy = [lambda y: 0.5 * chi(y) for chi in bump_partition(atlas.windows)]
    with pytest.raises(PartitionGap):
        glue_local_trivial(fam, atlas, gappy)


# ---------------------------------------------------------------------------
# Haar averaging


def test_quadrature_normalization_and_invariance():
    fam, quad = so2_family_setup(nodes=32)
    rep = quad.validate(fam.total, 15, seed=2)
    assert rep.passed, rep.witness


def test_quadrature_missing():
    G = cat.pair_groupoid(line(1))
    with pytest.raises(QuadratureMissing):
        HaarFiberQuadrature.from_groupoid(G, 16)


def test_average_fixed_point_and_idempotence():
    fam, quad = so2_family_setup(nodes=32)
    G = fam.total
    X = skewed_family_field(fam)
    X_hat, rep = haar_average(G, quad, X, 20, seed=2)
    assert rep.passed
    # averaging its own output changes nothing
    X_hat2, _ = haar_average(G, quad, X_hat, 5, seed=2, check=False)
    worst = 0.0
    for i in range(20):
        g = G.arrow_sampler(rng_for(61, i))
        worst = max(worst, float(np.linalg.norm(
            np.asarray(X_hat2(g).coeffs) - np.asarray(X_hat(g).coeffs))))
    assert worst < 1e-9


def test_average_projects_to_base_field():
    fam, quad = so2_family_setup(nodes=32)
    G = fam.total
    X = skewed_family_field(fam)
    X_hat, _ = haar_average(G, quad, X, 10, seed=2)
    from grpdconn.smoothmap import jacobian

    for i in range(20):
        g = G.arrow_sampler(rng_for(67, i))
        pushed = jacobian(fam.arrow_map, g) @ np.asarray(X_hat(g).coeffs)
        assert abs(pushed[0] - 1.0) < 1e-10


def test_finite_group_average_is_exact_sum():
    fiber = cat.group_bundle(line(1, name="F"), "finite", order=3)
    fam = cat.trivial_family(line(1, name="N"), fiber)
    quad = HaarFiberQuadrature.from_groupoid(fam.total, 3)

    def X(g):
        return Tangent(g, (1.0, 0.1 * math.sin(g.coords[1])))

    X_hat, rep = haar_average(fam.total, quad, X, 20, seed=2)
    assert rep.passed and rep.max_residual < 1e-12


def test_non_projectable_input_rejected():
    fam, quad = so2_family_setup(nodes=16)

    def bad(g):
        # source projection depends on the fibre angle: not s-projectable
        return Tangent(g, (1.0, math.cos(g.coords[3]), 0.0, 0.0))

    with pytest.raises(NonProjectableInput):
        haar_average(fam.total, quad, bad, 20, seed=2)


def test_proper_family_connection_fixes_flat_input():
    fam, quad = so2_family_setup(nodes=16)

    def hor_s(g, w):
        return Tangent(g, (w.coeffs[0], w.coeffs[1], w.coeffs[2], 0.0))

    def hor0(x, w):
        return Tangent(x, (w.coeffs[0], 0.0, 0.0))

    c = proper_family_connection(fam, hor0, hor_s, quad, 10, seed=2)
    g = fam.total.arrow_sampler(rng_for(71, 0))
    a = Tangent(fam.arrow_map(g), (1.0,))
    assert np.allclose(c.hor(g, a).coeffs, (1.0, 0.0, 0.0, 0.0), atol=1e-12)


# ---------------------------------------------------------------------------
# exhaustions, schedules, certificates


def test_invariant_exhaustion_unit_groupoid():
    fiber = cat.group_bundle(line(1, name="F"), "finite", order=1)
    profile, rep = invariant_exhaustion(fiber, 30, seed=2)
    assert rep.passed
    p = Point.make(line(1, name="F"), 0, (0.0,))
    assert profile.value(p) == 1.0


def test_invariant_exhaustion_z2_bundle():
    fiber = cat.group_bundle(line(1, name="F"), "finite", order=2)
    profile, rep = invariant_exhaustion(fiber, 30, seed=2)
    assert rep.passed and rep.clauses["invariance"] == 0.0


def test_invariant_exhaustion_compact_fiber_constant():
    fiber = cat.so2_group()
    profile, rep = invariant_exhaustion(fiber, 10, seed=2)
    assert profile.compact_fiber
    assert profile.preimage_points(3) == []
    assert rep.passed


def test_not_source_proper_rejected():
    G = cat.pair_groupoid(line(1))
    with pytest.raises(NotSourceProper):
        invariant_exhaustion(G)


def test_single_window_schedule():
    fam, atlas, profile, _ = sproper_setup()
    single = TrivializingAtlas(fam, [atlas.windows[0]], atlas.fiber)
    sched = level_schedule(single, profile, truncation_depth=4)
    levels = sched.per_window[0]
    assert levels == sorted(levels) and len(set(levels)) == 4
    assert sched.disjoint_verified


def test_two_window_schedule_interleaves_and_separates():
    fam, atlas, profile, sched = sproper_setup()
    assert sched.disjoint_verified
    ok, gap, notes = verify_slab_disjointness(atlas.windows, profile, sched.levels)
    assert ok and gap > 0.0


def test_disjoint_windows_schedule_independent():
    fam, atlas, profile, _ = sproper_setup()
    w0 = AtlasWindow((-2.8, -1.6), (-3.0, -1.5), lambda y: 0.0, lambda y: 0.0,
                     lambda iv: iv * 0.0)
    w1 = AtlasWindow((1.6, 2.8), (1.5, 3.0), lambda y: 0.0, lambda y: 0.0,
                     lambda iv: iv * 0.0)
    apart = TrivializingAtlas(fam, [w0, w1], atlas.fiber)
    sched = level_schedule(apart, profile, truncation_depth=3)
    # no overlap constraints: both windows use the same independent ladder
    assert sched.per_window[0] == sched.per_window[1]


def test_builder_and_recheck():
    fam, atlas, profile, sched = sproper_setup()
    conn, cert = complete_connection_builder(fam, atlas, sched, profile,
                                             n_cert_samples=8, seed=2)
    assert cert.verdict == "CertifiedComplete"
    for w in cert.windows:
        assert w.precompact_verified
        assert float(w.precompact_bound["lo"]) > DEFAULT.constr_box
    fv = flatness_certificate_check(conn, atlas, sched.per_window, profile, 6, 2)
    assert fv.verdict == "CertifiedComplete"


def test_flat_connection_certifies_with_any_levels():
    fam, atlas, profile, sched = sproper_setup()
    single = TrivializingAtlas(fam, [AtlasWindow(
        (-2.8, 2.8), (-3.2, 3.2), lambda y: 0.0, lambda y: 0.0,
        lambda iv: iv * 0.0)], atlas.fiber)

    def hor(g, w):
        return Tangent(g, (w.coeffs[0], 0.0))

    flat = Connection(fam, hor, hor, {})
    fv = flatness_certificate_check(flat, single, [[4]], profile, 6, 2)
    assert fv.verdict == "CertifiedComplete"


def test_skewed_connection_fails_flatness_clause():
    fam, atlas, profile, _ = sproper_setup()
    single = TrivializingAtlas(fam, [AtlasWindow(
        (-2.8, 2.8), (-3.2, 3.2), lambda y: 0.0, lambda y: 0.0,
        lambda iv: iv * 0.0)], atlas.fiber)

    def skewed(g, w):
        return Tangent(g, (w.coeffs[0], 0.3 * w.coeffs[0]))

    c = Connection(fam, skewed, skewed, {})
    fv = flatness_certificate_check(c, single, [[4]], profile, 6, 2)
    assert fv.verdict == "NotCertified"
    assert "chart_flat_form" in fv.failed_clauses


def test_injected_overlap_fails():
    fam, atlas, profile, sched = sproper_setup()
    sched.levels[(2, 1)] = sched.levels[(2, 0)]
    with pytest.raises(CertificateFailure):
        complete_connection_builder(fam, atlas, sched, profile, n_cert_samples=4, seed=2)


def test_unbounded_supremum_rejected():
    from grpdconn.errors import SupremumUnbounded
    from grpdconn.intervals import Interval

    fam, atlas, profile, _ = sproper_setup()
    wild = AtlasWindow((-2.8, 0.8), (-3.2, 1.2), lambda y: 0.0, lambda y: 0.0,
                       lambda iv: Interval.of(0.0, math.inf))
    overlapping = AtlasWindow((-0.8, 2.8), (-1.2, 3.2), lambda y: 0.0,
                              lambda y: 0.0, lambda iv: Interval.point(0.0))
    bad_atlas = TrivializingAtlas(fam, [wild, overlapping], atlas.fiber)
    with pytest.raises(SupremumUnbounded):
        level_schedule(bad_atlas, profile, truncation_depth=2)


def test_atlas_mismatch_rejected():
    from grpdconn.errors import AtlasMismatch

    fam, atlas, profile, sched = sproper_setup()
    other_fiber = cat.group_bundle(line(1, name="F"), "finite", order=3)
    other = cat.trivial_family(line(1, name="N"), other_fiber)
    stranger = Connection(other, lambda g, w: Tangent(g, (w.coeffs[0], 0.0)),
                          lambda x, w: Tangent(x, (w.coeffs[0], 0.0)), {})
    with pytest.raises(AtlasMismatch):
        flatness_certificate_check(stranger, atlas, sched.per_window, profile, 4, 1)
