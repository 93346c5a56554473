import math

import grpdconn.catalog as cat
from grpdconn.geometry import line
from grpdconn.groupoid import fibration_probe


def test_morita_pullback_has_all_flags():
    pi = cat.pullback_of_projection(cat.pair_groupoid(line(1)), line(1, name="F"))
    v = fibration_probe(pi, 30, seed=7)
    assert v.submersion_ok and v.shriek_submersion_ok
    assert v.star_surjective_heuristic, v.worst_uncovered_distance
    assert v.uniform_ok


def test_product_with_manifold_is_fibration_but_not_uniform():
    pi = cat.product_with_manifold(cat.pair_groupoid(line(1)), line(1, name="P"))
    v = fibration_probe(pi, 30, seed=7)
    assert v.submersion_ok and v.shriek_submersion_ok and v.star_surjective_heuristic
    assert not v.uniform_ok
    assert v.uniform_rank < v.uniform_rank_required


def test_cover_union_fails_star_surjectivity_at_puncture():
    pi = cat.covering_union_morphism()
    v = fibration_probe(pi, 30, seed=7)
    assert v.submersion_ok  # it is a local diffeomorphism
    assert not v.star_surjective_heuristic
    assert math.isinf(v.worst_uncovered_distance)


def test_determinism_of_probe():
    pi = cat.product_with_manifold(cat.pair_groupoid(line(1)), line(1, name="P"))
    a = fibration_probe(pi, 20, seed=3)
    b = fibration_probe(pi, 20, seed=3)
    assert a == b
