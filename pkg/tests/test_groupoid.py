import math

import numpy as np
import pytest

import grpdconn.catalog as cat
from grpdconn.config import DEFAULT
from grpdconn.geometry import Point, circle, distance, line
from grpdconn.groupoid import check_axioms, morphism_check, rng_for
from grpdconn.smoothmap import PairMap


@pytest.mark.parametrize("name,G", cat.default_instances())
def test_catalog_axioms(name, G):
    rep = check_axioms(G, 50, seed=7)
    assert rep.passed, (name, rep.max_residual, rep.witness)


def test_corrupted_multiplication_detected():
    G = cat.pair_groupoid(line(1))

    def bad_mul(g, h):
        out = G.mul(g, h)
        return Point.raw(out.space, out.patch_index,
                         (out.coords[0] + 1e-3,) + out.coords[1:])

    corrupted = cat.pair_groupoid(line(1))
    corrupted.mul = PairMap(G.arrows, G.arrows, G.arrows, bad_mul, None, "bad_mul")
    rep = check_axioms(corrupted, 50, seed=7)
    assert not rep.passed
    assert 5e-4 < rep.max_residual < 5e-3


def test_pair_sampler_exactly_composable():
    G = cat.so2_action_groupoid()
    for i in range(50):
        g, h = G.pair_sample(rng_for(3, i))
        assert distance(G.src(g), G.tgt(h)) <= DEFAULT.groupoid_tol_compose


def test_pair_groupoid_multiplication_law():
    G = cat.pair_groupoid(line(1))
    prod = G.metadata["product_space"]
    a = Point.make(line(1), 0, (1.0,))
    b = Point.make(line(1), 0, (2.0,))
    c = Point.make(line(1), 0, (3.0,))
    out = G.compose(prod.join(a, b), prod.join(b, c))
    assert prod.split(out)[0].coords == a.coords
    assert prod.split(out)[1].coords == c.coords


def test_group_bundle_adds_mod_2():
    G = cat.group_bundle(line(1), "finite", order=2)
    x = Point.make(line(1), 0, (0.4,))
    g = G.sfiber_grid(x, 2)[1]   # the nontrivial element over x
    gg = G.compose(g, g)
    assert gg.patch_index % 2 == 0  # back to the identity component


def test_pullback_of_circle_group_over_line():
    # pullback of the circle group (over a point) along R -> pt is
    # R x S^1 x R with mul((x, h, y), (y, h', z)) = (x, h + h', z)
    H = cat.so2_group()
    pi = cat.pullback_of_projection(H, line(1, name="F"))
    split3, join3 = pi.metadata["triple"]
    S1 = H.arrows
    F = line(1, name="F")
    g = join3(Point.make(S1, 0, (1.0,)), Point.make(F, 0, (2.0,)), Point.make(F, 0, (3.0,)))
    k = join3(Point.make(S1, 0, (0.5,)), Point.make(F, 0, (3.0,)), Point.make(F, 0, (4.0,)))
    out = pi.total.compose(g, k)
    h, ft, fs = split3(out)
    assert h.coords[0] == pytest.approx(1.5)
    assert ft.coords[0] == 2.0 and fs.coords[0] == 4.0


def test_morphism_checks():
    pi = cat.so2_action_morphism()
    assert morphism_check(pi, 50, seed=7).passed

    # corrupt the object map: no longer commutes with units
    bad = cat.covering_union_morphism()
    good_map = bad.object_map

    def shifted(x):
        out = good_map(x)
        return Point.raw(out.space, out.patch_index, (out.coords[0] + 1e-3,))

    from grpdconn.smoothmap import SmoothMap

    bad.object_map = SmoothMap(good_map.domain, good_map.codomain, shifted,
                               good_map.jac, "bad_pi0")
    rep = morphism_check(bad, 30, seed=7)
    assert not rep.passed


def test_identity_morphism_passes():
    from grpdconn.groupoid import GroupoidMorphism
    from grpdconn.smoothmap import identity_map

    G = cat.pair_groupoid(line(1))
    ident = GroupoidMorphism("id", G, G, identity_map(G.arrows), identity_map(G.objects))
    rep = morphism_check(ident, 40, seed=1)
    assert rep.passed and rep.max_residual == 0.0


def test_catalog_dispatcher():
    from grpdconn.errors import UnknownName

    assert cat.catalog("pair", space="S1").name.startswith("pair")
    assert cat.catalog("group_bundle", group="circle").arrows.dim == 2
    assert cat.catalog("punctured_group_bundle", order=3).probe_objects
    assert cat.catalog("disjoint_union").metadata["local_diffeo"]
    with pytest.raises(UnknownName):
        cat.catalog("nope")
