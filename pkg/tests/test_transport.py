import math

import numpy as np
import pytest

import grpdconn.catalog as cat
from grpdconn.config import DEFAULT
from grpdconn.connection import Connection, MULTIPLICATIVE, NOT_MULTIPLICATIVE
from grpdconn.errors import NotALoop, StartFiberMismatch
from grpdconn.geometry import Point, Tangent, distance, line
from grpdconn.groupoid import rng_for
from grpdconn.paths import constant_path, coordinate_path, subpath
from grpdconn.scenarios import (
    cover_setup,
    luca_setup,
    morita_closed_form_end,
    morita_setup,
    pair_fibration_setup,
    punctured_bundle_setup,
)
from grpdconn.transport import (
    completeness_probe,
    current_groupoid_check,
    holonomy,
    parallel_transport,
    theorem_crosscheck_kernel,
    transport_multiplicativity_check,
)


def flat_family_connection():
    fiber = cat.group_bundle(line(1, name="F"), "finite", order=2)
    fam = cat.trivial_family(line(1, name="N"), fiber)

    def hor(g, w):
        return Tangent(g, (w.coeffs[0],) + (0.0,) * (g.patch.dim - 1))

    return Connection(fam, hor, hor, {"provenance": "flat_product",
                                      "claimed_multiplicative": True})


def test_unit_path_transport_is_identity():
    c = flat_family_connection()
    g = c.total.arrow_sampler(rng_for(1, 0))
    gamma = constant_path(c.morphism.arrow_map(g))
    out = parallel_transport(c, gamma, g, 1.0)
    assert out.completed
    assert distance(out.end, g) == 0.0
    assert out.drift == 0.0


def test_start_fiber_mismatch_raises():
    c = flat_family_connection()
    g = c.total.arrow_sampler(rng_for(1, 1))
    far = Point.make(c.base.arrows, 0, (c.morphism.arrow_map(g).coords[0] + 1.0,))
    with pytest.raises(StartFiberMismatch):
        parallel_transport(c, constant_path(far), g, 1.0)


def test_morita_transport_matches_closed_form():
    c, extras = morita_setup()
    kappa = extras["kappa"]
    worst = 0.0
    for i in range(20):
        gamma, g = c.morphism.transport.path_with_start(rng_for(31, i))
        out = parallel_transport(c, gamma, g, 1.0)
        assert out.completed and out.drift < DEFAULT.transport_drift_tol
        worst = max(worst, distance(out.end, morita_closed_form_end(c, gamma, g, kappa)))
    assert worst < 1e-6


def test_punctured_bundle_escapes_through_exclusion():
    c, _ = punctured_bundle_setup()
    G = c.total
    gamma = cat.segment_path(c.base.arrows, 0, (-1.0,), (1.0,))
    start = Point.make(G.arrows, 1, (-1.0,))  # nontrivial group element
    out = parallel_transport(c, gamma, start, 1.0)
    assert not out.completed
    assert out.trajectory.escape_reason == "ExcludedPoint"
    assert out.trajectory.escape_time < 1.0
    # the identity component passes straight through
    safe = parallel_transport(c, gamma, Point.make(G.arrows, 0, (-1.0,)), 1.0)
    assert safe.completed


def test_holonomy_unit_loop_and_flat_loop():
    c = flat_family_connection()
    N = c.base.arrows
    x0 = Point.make(N, 0, (0.25,))
    samples = [c.morphism.fiber_sampler(x0, rng_for(41, i)) for i in range(4)]
    unit_loop = constant_path(x0)
    res = holonomy(c, unit_loop, samples)
    assert res.passed and res.worst_roundtrip == 0.0

    loop = coordinate_path(
        N, 0,
        lambda t: (0.25 + math.sin(2 * math.pi * t),),
        lambda t: (2 * math.pi * math.cos(2 * math.pi * t),),
        is_loop=True,
    )
    res2 = holonomy(c, loop, samples)
    assert res2.passed and res2.worst_roundtrip < 1e-8
    for g, image in res2.images:
        assert distance(image, g) < 1e-8  # flat transport is trivial


def test_holonomy_rejects_open_paths():
    c = flat_family_connection()
    open_path = cat.segment_path(c.base.arrows, 0, (0.0,), (1.0,))
    with pytest.raises(NotALoop):
        holonomy(c, open_path, [])


def test_reverse_transport_inverts():
    c, extras = morita_setup()
    for i in range(5):
        gamma, g = c.morphism.transport.path_with_start(rng_for(43, i))
        fwd = parallel_transport(c, gamma, g, 1.0)
        back = parallel_transport(c, gamma.reversed(), fwd.end, 1.0)
        assert back.completed
        assert distance(back.end, g) < DEFAULT.transport_hol_tol


def test_inverted_path_transports_inverses():
    # transport along the pointwise-inverted base path carries g^{-1} to the
    # inverse of the transported arrow (multiplicative connections)
    from grpdconn.transport import pushed_path

    c, extras = morita_setup()
    G, H = c.total, c.base
    for i in range(5):
        gamma, g = c.morphism.transport.path_with_start(rng_for(47, i))
        fwd = parallel_transport(c, gamma, g, 1.0)
        inv = parallel_transport(c, pushed_path(H.inv, gamma), G.inv(g), 1.0)
        assert distance(G.inv(fwd.end), inv.end) < 1e-6


def test_cocycle_property_under_concatenation():
    c, extras = morita_setup()
    gamma, g = c.morphism.transport.path_with_start(rng_for(53, 2))
    whole = parallel_transport(c, gamma, g, 1.0)
    first = parallel_transport(c, subpath(gamma, 0.0, 0.4), g, 1.0)
    second = parallel_transport(c, subpath(gamma, 0.4, 1.0), first.end, 1.0)
    assert distance(second.end, whole.end) < 1e-6


def test_completeness_probe_flat_finds_nothing():
    c = flat_family_connection()
    v = completeness_probe(c, c.morphism.transport.path_with_start, 60, seed=3)
    assert v.kind == "NoCounterexampleFound"
    assert v.budget == 60


def test_completeness_probe_punctured_finds_witness():
    c, _ = punctured_bundle_setup()
    v = completeness_probe(c, c.morphism.transport.path_with_start, 200, seed=3)
    assert v.found_witness
    assert v.witness["reason"] == "ExcludedPoint"
    assert v.witness["escape_time"] < 1.0


def test_transport_multiplicativity_flat_and_luca():
    c = flat_family_connection()
    rep = transport_multiplicativity_check(c, 10, seed=3)
    assert rep.verdict == MULTIPLICATIVE
    assert rep.max_residual < 1e-7

    luca, _ = luca_setup()
    rep2 = transport_multiplicativity_check(luca, 10, seed=3)
    assert rep2.verdict == NOT_MULTIPLICATIVE
    assert rep2.residuals["product"] > 0.5


def test_luca_unit_speed_loop_oracle():
    # transport of (1, 0) along theta(t) = 1 + 2 pi t follows
    # x(t) = 1 + 2 pi t, y(t) = (x^3 - 1)/3
    c, _ = luca_setup()
    H = c.base
    gamma = coordinate_path(H.arrows, 0, lambda t: (1.0 + 2 * math.pi * t,),
                            lambda t: (2 * math.pi,), is_loop=True)
    out = parallel_transport(c, gamma, Point.make(c.total.arrows, 0, (1.0, 0.0)), 1.0)
    xe = 1.0 + 2.0 * math.pi
    assert abs(out.end.coords[0] - xe) < 1e-9
    assert abs(out.end.coords[1] - (xe ** 3 - 1.0) / 3.0) < 1e-8


def test_current_groupoid_complete_and_incomplete():
    c, _ = morita_setup()
    rep = current_groupoid_check(c, 8, seed=3)
    assert rep.passed
    assert rep.bijection_residual < DEFAULT.transport_drift_tol
    assert rep.surjectivity == "checked"

    cp, _ = punctured_bundle_setup()
    rep2 = current_groupoid_check(cp, 20, seed=3)
    assert rep2.surjectivity == "NotApplicable"
    assert rep2.injectivity_min_separation is None or rep2.injectivity_min_separation > 1e-9
    assert rep2.passed


def test_crosscheck_triples():
    # complete pair fibration: all clean, consistent
    c, _ = pair_fibration_setup(punctured=False)
    rep = theorem_crosscheck_kernel(c, 40, seed=3)
    assert rep.consistent
    assert not rep.total_verdict.found_witness

    # punctured variant: witnesses everywhere, still consistent
    cp, _ = pair_fibration_setup(punctured=True)
    rep_p = theorem_crosscheck_kernel(cp, 60, seed=3)
    assert rep_p.consistent
    assert rep_p.total_verdict.found_witness and rep_p.kernel_verdict.found_witness

    # cover: kernel clean + total witness is consistent only because the
    # fibration precondition fails, and the report says so
    cc, _ = cover_setup()
    rep_c = theorem_crosscheck_kernel(cc, 80, seed=3)
    assert rep_c.consistent
    assert rep_c.fibration_note == "fibration precondition fails"
    assert rep_c.total_verdict.found_witness and not rep_c.kernel_verdict.found_witness
    kernel_impl = [s for s in rep_c.implications
                   if s.name == "kernel_complete_implies_total_complete"][0]
    assert kernel_impl.status == "not-applicable"


def test_crosscheck_flags_budget_tension_when_forced():
    # force the fibration flag on the cover: the theorem implication would be
    # violated, and the report must say so
    cc, _ = cover_setup()
    rep = theorem_crosscheck_kernel(cc, 80, seed=3, fibration_ok=True)
    assert not rep.consistent
