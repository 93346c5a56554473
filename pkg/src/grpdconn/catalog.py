"""Named catalog of groupoids and morphisms with closed-form samplers.

Every entry supplies analytic Jacobians for its structure maps, closed-form
source/target-fibre samplers (no rejection sampling), and, where transport
scenarios need them, closed-form path samplers and kernel presentations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import DEFAULT
from .errors import InvalidParams, UnknownName
from .geometry import (
    cached_eye,
    Patch,
    Point,
    ProductSpace,
    Space,
    Tangent,
    circle,
    finite,
    line,
    point_space,
)
from .groupoid import Groupoid, GroupoidMorphism, KernelData, TransportSamplers
from .paths import BasePath, coordinate_path
from .smoothmap import PairMap, SmoothMap

BOX = DEFAULT.groupoid_sample_box
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# generic sampling helpers


def sample_coords(patch: Patch, rng: np.random.Generator, box: float = BOX):
    coords = []
    for i in range(patch.dim):
        if patch.is_circ(i):
            coords.append(float(rng.uniform(0.0, TWO_PI)))
        else:
            coords.append(float(rng.uniform(-box, box)))
    coords = tuple(coords)
    # Closed-form shift away from excluded balls (no rejection loops).
    for center, radius in patch.excluded_points:
        delta = [a - b for a, b in zip(coords, center)]
        norm = math.sqrt(sum(d * d for d in delta))
        if norm < 2.0 * radius:
            if norm == 0.0:
                delta = [2.0 * radius] + [0.0] * (patch.dim - 1)
            else:
                scale = (2.0 * radius + norm) / norm
                delta = [d * scale for d in delta]
            coords = tuple(c + d for c, d in zip(center, delta))
    return coords


def sample_point(space: Space, rng: np.random.Generator, box: float = BOX) -> Point:
    idx = int(rng.integers(len(space.patches)))
    return Point.raw(space, idx, sample_coords(space.patches[idx], rng, box))


def random_smooth_path(
    space: Space,
    patch_index: int,
    rng: np.random.Generator,
    box: float = BOX,
    loop: bool = False,
    windings=(-1, 0, 1),
    span: float = 1.0,
) -> BasePath:
    """Random closed-form path: affine + one sine mode per coordinate."""
    patch = space.patches[patch_index]
    alphas, betas, amps, phases, omegas = [], [], [], [], []
    for i in range(patch.dim):
        if patch.is_circ(i):
            alphas.append(float(rng.uniform(0.0, TWO_PI)))
            omegas.append(TWO_PI * float(rng.choice(windings)))
            betas.append(0.0)
        else:
            alphas.append(float(rng.uniform(-box / 2, box / 2)))
            omegas.append(0.0)
            betas.append(0.0 if loop else span * float(rng.uniform(-1.0, 1.0)))
        amps.append(span * float(rng.uniform(0.0, 0.6)))
        phases.append(float(rng.uniform(0.0, TWO_PI)))

    def coords(t: float):
        return tuple(
            a + b * t + w * t + A * (math.sin(TWO_PI * t + p) - math.sin(p))
            for a, b, w, A, p in zip(alphas, betas, omegas, amps, phases)
        )

    def deriv(t: float):
        return tuple(
            b + w + A * TWO_PI * math.cos(TWO_PI * t + p)
            for b, w, A, p in zip(betas, omegas, amps, phases)
        )

    return coordinate_path(space, patch_index, coords, deriv, is_loop=loop)


def segment_path(space: Space, patch_index: int, start, end, label: str = "") -> BasePath:
    """Straight segment with a smooth (cubic) time profile, stationary at ends."""
    start = tuple(float(c) for c in start)
    end = tuple(float(c) for c in end)

    def profile(t):
        return t * t * (3.0 - 2.0 * t)

    def dprofile(t):
        return 6.0 * t * (1.0 - t)

    def coords(t: float):
        s = profile(t)
        return tuple(a + s * (b - a) for a, b in zip(start, end))

    def deriv(t: float):
        ds = dprofile(t)
        return tuple(ds * (b - a) for a, b in zip(start, end))

    return coordinate_path(space, patch_index, coords, deriv, label=label)


# ---------------------------------------------------------------------------
# matrix helpers for product packings


def _injector(indices, total_dim) -> np.ndarray:
    J = np.zeros((total_dim, len(indices)))
    for col, row in enumerate(indices):
        J[row, col] = 1.0
    J.setflags(write=False)
    return J


def product_indices(ps: ProductSpace, packed_index: int):
    ia, ib = ps._indices(packed_index)
    pa, pb = ps.left.patches[ia], ps.right.patches[ib]
    la, lb, ca = pa.lin_count, pb.lin_count, pa.circ_count
    left = list(range(la)) + list(range(la + lb, la + lb + ca))
    right = list(range(la, la + lb)) + list(range(la + lb + ca, pa.dim + pb.dim))
    return left, right


def _selector_cache(ps: ProductSpace) -> dict:
    cache = getattr(ps, "_packing_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(ps, "_packing_cache", cache)
    return cache


def _packing(ps: ProductSpace, packed_index: int, kind: str) -> np.ndarray:
    cache = _selector_cache(ps)
    key = (packed_index, kind)
    hit = cache.get(key)
    if hit is not None:
        return hit
    left, right = product_indices(ps, packed_index)
    dim = ps.space.patches[packed_index].dim
    mats = {
        "li": _injector(left, dim),
        "ri": _injector(right, dim),
    }
    mats["ls"] = mats["li"].T
    mats["rs"] = mats["ri"].T
    for k, m in mats.items():
        cache[(packed_index, k)] = m
    return cache[key]


def left_injector(ps: ProductSpace, packed_index: int) -> np.ndarray:
    return _packing(ps, packed_index, "li")


def right_injector(ps: ProductSpace, packed_index: int) -> np.ndarray:
    return _packing(ps, packed_index, "ri")


def left_selector(ps: ProductSpace, packed_index: int) -> np.ndarray:
    return _packing(ps, packed_index, "ls")


def right_selector(ps: ProductSpace, packed_index: int) -> np.ndarray:
    return _packing(ps, packed_index, "rs")


# ---------------------------------------------------------------------------
# pair groupoid


def pair_groupoid(M: Space, name: str = "") -> Groupoid:
    """Pair groupoid M x M over M; an arrow (a, b) runs from b to a."""
    prod = ProductSpace(M, M)
    A = prod.space

    def src_eval(p):  # (a, b) -> b
        return prod.split(p)[1]

    def tgt_eval(p):
        return prod.split(p)[0]

    def unit_eval(x):
        return prod.join(x, x)

    def inv_eval(p):
        a, b = prod.split(p)
        return prod.join(b, a)

    def mul_eval(g, h):  # (a,b)·(b',c) = (a,c); snap ignores b'
        a, _ = prod.split(g)
        _, c = prod.split(h)
        return prod.join(a, c)

    def src_jac(p):
        return right_selector(prod, p.patch_index)

    def tgt_jac(p):
        return left_selector(prod, p.patch_index)

    def unit_jac(x):
        idx = prod.pack_index(x.patch_index, x.patch_index)
        return left_injector(prod, idx) + right_injector(prod, idx)

    def inv_jac(p):
        a_idx, b_idx = prod._indices(p.patch_index)
        out = prod.pack_index(b_idx, a_idx)
        return left_injector(prod, out) @ right_selector(prod, p.patch_index) + right_injector(
            prod, out
        ) @ left_selector(prod, p.patch_index)

    def mul_jac(g, h):
        a_idx = prod._indices(g.patch_index)[0]
        c_idx = prod._indices(h.patch_index)[1]
        out = prod.pack_index(a_idx, c_idx)
        A_part = left_injector(prod, out) @ left_selector(prod, g.patch_index)
        B_part = right_injector(prod, out) @ right_selector(prod, h.patch_index)
        return A_part, B_part

    def arrow_sampler(rng):
        return prod.join(sample_point(M, rng), sample_point(M, rng))

    def sfiber(x, rng):
        return prod.join(sample_point(M, rng), x)

    def tfiber(x, rng):
        return prod.join(x, sample_point(M, rng))

    return Groupoid(
        name=name or f"pair({M.name})",
        objects=M,
        arrows=A,
        src=SmoothMap(A, M, src_eval, src_jac, "src"),
        tgt=SmoothMap(A, M, tgt_eval, tgt_jac, "tgt"),
        unit=SmoothMap(M, A, unit_eval, unit_jac, "unit"),
        inv=SmoothMap(A, A, inv_eval, inv_jac, "inv"),
        mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=arrow_sampler,
        object_sampler=lambda rng: sample_point(M, rng),
        sfiber_sampler=sfiber,
        tfiber_sampler=tfiber,
        metadata={"product_space": prod},
    )


# ---------------------------------------------------------------------------
# unit groupoid


def unit_groupoid(M: Space, name: str = "") -> Groupoid:
    dim = M.dim

    def ident_jac(p):
        return cached_eye(dim)

    ident = SmoothMap(M, M, lambda p: p, ident_jac, "id")

    def mul_eval(g, h):
        return h

    _mul_A = np.zeros((dim, dim))

    def mul_jac(g, h):
        return _mul_A, cached_eye(dim)

    return Groupoid(
        name=name or f"unit({M.name})",
        objects=M,
        arrows=M,
        src=ident,
        tgt=ident,
        unit=ident,
        inv=ident,
        mul=PairMap(M, M, M, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=lambda rng: sample_point(M, rng),
        object_sampler=lambda rng: sample_point(M, rng),
        sfiber_sampler=lambda x, rng: x,
        tfiber_sampler=lambda x, rng: x,
        sfiber_grid=lambda x, n: [x],
        metadata={"is_unit_groupoid": True},
    )


# ---------------------------------------------------------------------------
# group bundles M x Gamma over M (Gamma finite cyclic or the circle)


def group_bundle(
    M: Space,
    group: str,
    order: int = 2,
    punctured_at: Optional[tuple] = None,
    excl_radius: float = DEFAULT.numeric_excl_radius,
    name: str = "",
) -> Groupoid:
    """Bundle of groups M x Gamma with fiberwise group law.

    ``group`` is "finite" (cyclic of ``order``) or "circle". The punctured
    variant removes {x0} x (Gamma \\ {e}) for finite Gamma, realized as an
    exclusion ball on every nontrivial-element patch.
    """
    if group == "finite":
        if order < 1:
            raise InvalidParams("finite group order must be >= 1")
        if punctured_at is not None:
            base_patch = M.patches[0]
            if len(M.patches) != 1:
                raise InvalidParams("punctured bundles need a single-patch base")
            patches = [Patch(base_patch.lin_count, base_patch.circ_count, "0")]
            for k in range(1, order):
                patches.append(
                    Patch(
                        base_patch.lin_count,
                        base_patch.circ_count,
                        str(k),
                        ((tuple(punctured_at), excl_radius),),
                    )
                )
            A = Space(tuple(patches), name=f"{M.name}xZ{order}*")
        else:
            gamma = finite(range(order), name=f"Z{order}")
            A = ProductSpace(M, gamma).space
        dim = M.dim

        def elt(p: Point) -> int:
            return p.patch_index % order if punctured_at is None else p.patch_index

        def patch_of(x: Point, k: int) -> int:
            if punctured_at is not None:
                return k
            return x.patch_index * order + k

        def to_M(p: Point) -> Point:
            return Point.raw(M, 0 if punctured_at is not None else p.patch_index // order, p.coords)

        def src_eval(p):
            return to_M(p)

        def unit_eval(x):
            return Point.raw(A, patch_of(x, 0), x.coords)

        def inv_eval(p):
            k = elt(p)
            return Point.raw(A, patch_of(to_M(p), (-k) % order), p.coords)

        def mul_eval(g, h):
            k = (elt(g) + elt(h)) % order
            return Point.raw(A, patch_of(to_M(h), k), h.coords)

        eye = lambda p: cached_eye(dim)

        def mul_jac(g, h):
            return np.zeros((dim, dim)), np.eye(dim)

        def arrow_sampler(rng):
            k = int(rng.integers(order))
            x = sample_point(M, rng)
            q = Point.raw(A, patch_of(x, k), sample_coords(A.patches[patch_of(x, k)], rng))
            return q

        def allowed_elements(x: Point):
            if punctured_at is None:
                return list(range(order))
            patch1 = A.patches[1] if order > 1 else A.patches[0]
            for center, radius in patch1.excluded_points:
                if patch1.coord_distance(x.coords, center) <= radius:
                    return [0]
            return list(range(order))

        def sfiber(x, rng):
            ks = allowed_elements(x)
            k = int(ks[rng.integers(len(ks))])
            return Point.raw(A, patch_of(x, k), x.coords)

        def sfiber_grid(x, n):
            return [Point.raw(A, patch_of(x, k), x.coords) for k in allowed_elements(x)]

        def tfiber_nodes(x, n):
            pts = sfiber_grid(x, n)
            w = [1.0 / len(pts)] * len(pts)
            return pts, w

        return Groupoid(
            name=name or f"bundle({M.name},Z{order}{'*' if punctured_at else ''})",
            objects=M,
            arrows=A,
            src=SmoothMap(A, M, src_eval, eye, "src"),
            tgt=SmoothMap(A, M, src_eval, eye, "tgt"),
            unit=SmoothMap(M, A, unit_eval, eye, "unit"),
            inv=SmoothMap(A, A, inv_eval, eye, "inv"),
            mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
            arrow_sampler=arrow_sampler,
            object_sampler=lambda rng: sample_point(M, rng),
            sfiber_sampler=sfiber,
            tfiber_sampler=sfiber,
            sfiber_grid=sfiber_grid,
            probe_objects=(
                (Point.raw(M, 0, punctured_at),) if punctured_at is not None else ()
            ),
            metadata={
                "tfiber_nodes": tfiber_nodes,
                "compact_tfibers": True,
                "group_order": order,
                "source_connected": order == 1,
            },
        )

    if group == "circle":
        if punctured_at is not None:
            raise InvalidParams("punctured bundles require a finite group")
        prod = ProductSpace(M, circle())
        A = prod.space
        dim = M.dim

        def src_eval(p):
            return prod.split(p)[0]

        def unit_eval(x):
            return prod.join(x, Point.raw(circle(), 0, (0.0,)))

        circ = circle()

        def inv_eval(p):
            x, th = prod.split(p)
            return prod.join(x, Point.raw(circ, 0, (-th.coords[0],)))

        def mul_eval(g, h):
            _, th_g = prod.split(g)
            x, th_h = prod.split(h)
            return prod.join(x, Point.raw(circ, 0, (th_g.coords[0] + th_h.coords[0],)))

        def src_jac(p):
            return left_selector(prod, p.patch_index)

        def unit_jac(x):
            return left_injector(prod, prod.pack_index(x.patch_index, 0))

        def inv_jac(p):
            i = p.patch_index
            return left_injector(prod, i) @ left_selector(prod, i) - right_injector(
                prod, i
            ) @ right_selector(prod, i)

        def mul_jac(g, h):
            i = h.patch_index
            A_part = right_injector(prod, i) @ right_selector(prod, g.patch_index)
            B_part = left_injector(prod, i) @ left_selector(prod, i) + right_injector(
                prod, i
            ) @ right_selector(prod, i)
            return A_part, B_part

        def tfiber_nodes(x, n):
            pts = [
                prod.join(x, Point.raw(circ, 0, (TWO_PI * j / n,))) for j in range(n)
            ]
            return pts, [1.0 / n] * n

        return Groupoid(
            name=name or f"bundle({M.name},S1)",
            objects=M,
            arrows=A,
            src=SmoothMap(A, M, src_eval, src_jac, "src"),
            tgt=SmoothMap(A, M, src_eval, src_jac, "tgt"),
            unit=SmoothMap(M, A, unit_eval, unit_jac, "unit"),
            inv=SmoothMap(A, A, inv_eval, inv_jac, "inv"),
            mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
            arrow_sampler=lambda rng: sample_point(A, rng),
            object_sampler=lambda rng: sample_point(M, rng),
            sfiber_sampler=lambda x, rng: prod.join(
                x, Point.raw(circ, 0, (float(rng.uniform(0, TWO_PI)),))
            ),
            tfiber_sampler=lambda x, rng: prod.join(
                x, Point.raw(circ, 0, (float(rng.uniform(0, TWO_PI)),))
            ),
            sfiber_grid=lambda x, n: tfiber_nodes(x, n)[0],
            metadata={"tfiber_nodes": tfiber_nodes, "compact_tfibers": True,
                      "source_connected": True},
        )

    raise InvalidParams(f"unknown group kind: {group}")


# ---------------------------------------------------------------------------
# SO(2) as a Lie group, its plane action, and the action groupoid


def _rot(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def so2_group() -> Groupoid:
    pt = point_space()
    A = circle("SO2")

    def to_pt(p):
        return Point.raw(pt, 0, ())

    z01 = lambda p: np.zeros((0, 1))
    z10 = lambda p: np.zeros((1, 0))

    def mul_eval(g, h):
        return Point.raw(A, 0, (g.coords[0] + h.coords[0],))

    def mul_jac(g, h):
        return np.eye(1), np.eye(1)

    def inv_jac(p):
        return -np.eye(1)

    return Groupoid(
        name="SO(2)",
        objects=pt,
        arrows=A,
        src=SmoothMap(A, pt, to_pt, z01, "src"),
        tgt=SmoothMap(A, pt, to_pt, z01, "tgt"),
        unit=SmoothMap(pt, A, lambda x: Point.raw(A, 0, (0.0,)), z10, "unit"),
        inv=SmoothMap(A, A, lambda p: Point.raw(A, 0, (-p.coords[0],)), inv_jac, "inv"),
        mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=lambda rng: sample_point(A, rng),
        object_sampler=lambda rng: Point.raw(pt, 0, ()),
        sfiber_sampler=lambda x, rng: sample_point(A, rng),
        tfiber_sampler=lambda x, rng: sample_point(A, rng),
        metadata={"source_connected": True,
                  "compact_tfibers": True,
                  "tfiber_nodes": lambda x, n: (
                      [Point.raw(A, 0, (TWO_PI * j / n,)) for j in range(n)],
                      [1.0 / n] * n)},
    )


def so2_action_groupoid(trivial: bool = False, name: str = "") -> Groupoid:
    """Action groupoid SO(2) x R^2 over R^2 (rotation or trivial action)."""
    M = line(2, name="R2")
    prod = ProductSpace(M, circle())
    A = prod.space  # coords (v1, v2, phi)
    circ = circle()

    def split(p):
        v, th = prod.split(p)
        return np.asarray(v.coords), th.coords[0]

    def act(phi, v):
        return _rot(0.0 if trivial else phi) @ v

    def src_eval(p):
        v, _ = split(p)
        return Point.raw(M, 0, tuple(v))

    def tgt_eval(p):
        v, phi = split(p)
        return Point.raw(M, 0, tuple(act(phi, v)))

    def unit_eval(x):
        return prod.join(x, Point.raw(circ, 0, (0.0,)))

    def inv_eval(p):
        v, phi = split(p)
        return prod.join(Point.raw(M, 0, tuple(act(phi, v))), Point.raw(circ, 0, (-phi,)))

    def mul_eval(g, h):
        _, phi = split(g)
        w, psi = split(h)
        return prod.join(Point.raw(M, 0, tuple(w)), Point.raw(circ, 0, (phi + psi,)))

    def src_jac(p):
        return left_selector(prod, p.patch_index)

    def _dact(phi, v):
        if trivial:
            return np.zeros((2, 1))
        return (_rot(phi + math.pi / 2.0) @ v).reshape(2, 1)

    def tgt_jac(p):
        v, phi = split(p)
        R = _rot(0.0 if trivial else phi)
        return np.hstack([R, _dact(phi, v)])

    def unit_jac(x):
        return left_injector(prod, 0)

    def inv_jac(p):
        v, phi = split(p)
        J_v = np.hstack([_rot(0.0 if trivial else phi), _dact(phi, v)])
        J_phi = np.array([[0.0, 0.0, -1.0]])
        return left_injector(prod, 0) @ J_v + right_injector(prod, 0) @ J_phi

    def mul_jac(g, h):
        A_part = right_injector(prod, 0) @ right_selector(prod, 0)
        B_part = left_injector(prod, 0) @ left_selector(prod, 0) + right_injector(
            prod, 0
        ) @ right_selector(prod, 0)
        return A_part, B_part

    def tfiber(x, rng):
        phi = float(rng.uniform(0, TWO_PI))
        v = np.asarray(x.coords)
        return prod.join(
            Point.raw(M, 0, tuple(_rot(0.0 if trivial else -phi) @ v)),
            Point.raw(circ, 0, (phi,)),
        )

    def tfiber_nodes(x, n):
        pts = []
        v = np.asarray(x.coords)
        for j in range(n):
            phi = TWO_PI * j / n
            pts.append(
                prod.join(
                    Point.raw(M, 0, tuple(_rot(0.0 if trivial else -phi) @ v)),
                    Point.raw(circ, 0, (phi,)),
                )
            )
        return pts, [1.0 / n] * n

    return Groupoid(
        name=name or ("SO(2)⋉R2(trivial)" if trivial else "SO(2)⋉R2"),
        objects=M,
        arrows=A,
        src=SmoothMap(A, M, src_eval, src_jac, "src"),
        tgt=SmoothMap(A, M, tgt_eval, tgt_jac, "tgt"),
        unit=SmoothMap(M, A, unit_eval, unit_jac, "unit"),
        inv=SmoothMap(A, A, inv_eval, inv_jac, "inv"),
        mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=lambda rng: sample_point(A, rng),
        object_sampler=lambda rng: sample_point(M, rng),
        sfiber_sampler=lambda x, rng: prod.join(
            x, Point.raw(circ, 0, (float(rng.uniform(0, TWO_PI)),))
        ),
        tfiber_sampler=tfiber,
        sfiber_grid=lambda x, n: [
            prod.join(x, Point.raw(circ, 0, (TWO_PI * j / n,))) for j in range(n)
        ],
        probe_objects=(Point.raw(M, 0, (1.0, 0.0)),),
        metadata={
            "tfiber_nodes": tfiber_nodes,
            "compact_tfibers": True,
            "trivial_action": trivial,
            "source_connected": True,
            "product_space": prod,
        },
    )


def so2_action_morphism(trivial: bool = False) -> GroupoidMorphism:
    """Action morphism pr1: SO(2)⋉R^2 -> SO(2)."""
    G = so2_action_groupoid(trivial=trivial)
    H = so2_group()
    prod: ProductSpace = G.metadata["product_space"]

    def arrow_eval(p):
        _, th = prod.split(p)
        return Point.raw(H.arrows, 0, th.coords)

    def arrow_jac(p):
        return right_selector(prod, p.patch_index)

    def object_eval(x):
        return Point.raw(H.objects, 0, ())

    def fiber_sampler(h, rng):
        v = sample_point(G.objects, rng)
        return prod.join(v, h)

    return GroupoidMorphism(
        name=f"pr1[{G.name}]",
        total=G,
        base_grpd=H,
        arrow_map=SmoothMap(G.arrows, H.arrows, arrow_eval, arrow_jac, "pr1"),
        object_map=SmoothMap(G.objects, H.objects, object_eval, lambda p: np.zeros((0, 2)), "pt"),
        fiber_sampler=fiber_sampler,
        object_fiber_sampler=lambda y, rng: sample_point(G.objects, rng),
        metadata={"action_morphism": True, "connected_base_group": True},
    )


# ---------------------------------------------------------------------------
# the R^2 -> S^1 group homomorphism (abelian-group counterexample carrier)


def plane_to_circle_morphism() -> GroupoidMorphism:
    """The abelian group R^2 over the circle group, (x, y) -> x mod 2pi."""
    pt = point_space()
    plane = line(2, name="R2grp")
    circ_arr = circle("S1grp")

    z = lambda p: np.zeros((0, 2))

    def mk_group(space, addf, add_jac, neg, neg_jac, zero, name):
        A = space

        def to_pt(p):
            return Point.raw(pt, 0, ())

        return Groupoid(
            name=name,
            objects=pt,
            arrows=A,
            src=SmoothMap(A, pt, to_pt, lambda p: np.zeros((0, A.dim)), "src"),
            tgt=SmoothMap(A, pt, to_pt, lambda p: np.zeros((0, A.dim)), "tgt"),
            unit=SmoothMap(pt, A, lambda x: zero, lambda p: np.zeros((A.dim, 0)), "unit"),
            inv=SmoothMap(A, A, neg, neg_jac, "inv"),
            mul=PairMap(A, A, A, addf, add_jac, "mul", constant_partials=True),
            arrow_sampler=lambda rng: sample_point(A, rng),
            object_sampler=lambda rng: Point.raw(pt, 0, ()),
            sfiber_sampler=lambda x, rng: sample_point(A, rng),
            tfiber_sampler=lambda x, rng: sample_point(A, rng),
            metadata={"source_connected": True},
        )

    G = mk_group(
        plane,
        lambda g, h: Point.raw(plane, 0, (g.coords[0] + h.coords[0], g.coords[1] + h.coords[1])),
        lambda g, h: (np.eye(2), np.eye(2)),
        lambda p: Point.raw(plane, 0, (-p.coords[0], -p.coords[1])),
        lambda p: -np.eye(2),
        Point.raw(plane, 0, (0.0, 0.0)),
        "R2-group",
    )
    H = mk_group(
        circ_arr,
        lambda g, h: Point.raw(circ_arr, 0, (g.coords[0] + h.coords[0],)),
        lambda g, h: (np.eye(1), np.eye(1)),
        lambda p: Point.raw(circ_arr, 0, (-p.coords[0],)),
        lambda p: -np.eye(1),
        Point.raw(circ_arr, 0, (0.0,)),
        "S1-group",
    )

    def pi_eval(p):
        return Point.raw(circ_arr, 0, (p.coords[0],))

    def fiber_sampler(h, rng):
        k = int(rng.integers(-1, 2))
        return Point.raw(
            plane, 0, (h.coords[0] + TWO_PI * k, float(rng.uniform(-BOX, BOX)))
        )

    def path_with_start(rng):
        gamma = random_smooth_path(circ_arr, 0, rng)
        g = fiber_sampler(gamma.point(0.0), rng)
        return gamma, g

    def composable(rng):
        gamma = random_smooth_path(circ_arr, 0, rng)
        eta = random_smooth_path(circ_arr, 0, rng)
        g = fiber_sampler(gamma.point(0.0), rng)
        k = fiber_sampler(eta.point(0.0), rng)
        return gamma, eta, g, k

    def object_path_with_start(rng):
        x0 = Point.raw(pt, 0, ())
        return (
            coordinate_path(pt, 0, lambda t: (), lambda t: ()),
            Point.raw(pt, 0, ()),
        )

    return GroupoidMorphism(
        name="R2->S1",
        total=G,
        base_grpd=H,
        arrow_map=SmoothMap(plane, circ_arr, pi_eval, lambda p: np.array([[1.0, 0.0]]), "pi"),
        object_map=SmoothMap(pt, pt, lambda x: Point.raw(pt, 0, ()), lambda p: np.zeros((0, 0)), "pi0"),
        fiber_sampler=fiber_sampler,
        transport=TransportSamplers(path_with_start, composable, object_path_with_start),
        metadata={"extension_like": True},
    )

# ---------------------------------------------------------------------------
# pullback groupoid along a product projection pi0: N x F -> N


def pullback_of_projection(H: Groupoid, F: Space, name: str = "") -> GroupoidMorphism:
    """Pullback groupoid pi0*H for pi0 = pr1: M = N x F -> N, with the
    projection morphism onto H (a Morita fibration).

    Arrows are coordinatized freely as (h, f_t, f_s): the triple
    (x, h, y) with x = (tgt(h), f_t), y = (src(h), f_s).
    """
    N = H.objects
    base_prod = ProductSpace(N, F)
    M = base_prod.space
    arr_prod_inner = ProductSpace(H.arrows, F)
    arr_prod = ProductSpace(arr_prod_inner.space, F)
    A = arr_prod.space

    def split3(p):
        hf, fs = arr_prod.split(p)
        h, ft = arr_prod_inner.split(hf)
        return h, ft, fs

    def join3(h, ft, fs):
        return arr_prod.join(arr_prod_inner.join(h, ft), fs)

    def src_eval(p):
        h, _, fs = split3(p)
        return base_prod.join(H.src(h), fs)

    def tgt_eval(p):
        h, ft, _ = split3(p)
        return base_prod.join(H.tgt(h), ft)

    def unit_eval(x):
        n, f = base_prod.split(x)
        return join3(H.unit(n), f, f)

    def inv_eval(p):
        h, ft, fs = split3(p)
        return join3(H.inv(h), fs, ft)

    def mul_eval(g, k):
        h1, ft, _ = split3(g)
        h2, _, fs2 = split3(k)
        return join3(H.mul(h1, h2), ft, fs2)

    # block assembly helpers: tangent coords of A split as (dh, dft, dfs)
    def _sel(p):
        hf_idx = arr_prod._indices(p.patch_index)[0]
        S_hf = left_selector(arr_prod, p.patch_index)
        S_h = left_selector(arr_prod_inner, hf_idx) @ S_hf
        S_ft = right_selector(arr_prod_inner, hf_idx) @ S_hf
        S_fs = right_selector(arr_prod, p.patch_index)
        return S_h, S_ft, S_fs

    def _inj(packed_index):
        hf_idx = arr_prod._indices(packed_index)[0]
        I_hf = left_injector(arr_prod, packed_index)
        I_h = I_hf @ left_injector(arr_prod_inner, hf_idx)
        I_ft = I_hf @ right_injector(arr_prod_inner, hf_idx)
        I_fs = right_injector(arr_prod, packed_index)
        return I_h, I_ft, I_fs

    def _base_inj(packed_index):
        return left_injector(base_prod, packed_index), right_injector(base_prod, packed_index)

    from .smoothmap import jacobian as _jac

    def src_jac(p):
        h, _, fs = split3(p)
        S_h, _, S_fs = _sel(p)
        out = base_prod.pack_index(H.src(h).patch_index, fs.patch_index)
        I_n, I_f = _base_inj(out)
        return I_n @ _jac(H.src, h) @ S_h + I_f @ S_fs

    def tgt_jac(p):
        h, ft, _ = split3(p)
        S_h, S_ft, _ = _sel(p)
        out = base_prod.pack_index(H.tgt(h).patch_index, ft.patch_index)
        I_n, I_f = _base_inj(out)
        return I_n @ _jac(H.tgt, h) @ S_h + I_f @ S_ft

    def unit_jac(x):
        n, f = base_prod.split(x)
        u = H.unit(n)
        out = unit_eval(x).patch_index
        I_h, I_ft, I_fs = _inj(out)
        S_n = left_selector(base_prod, x.patch_index)
        S_f = right_selector(base_prod, x.patch_index)
        return I_h @ _jac(H.unit, n) @ S_n + (I_ft + I_fs) @ S_f

    def inv_jac(p):
        h, ft, fs = split3(p)
        S_h, S_ft, S_fs = _sel(p)
        out = inv_eval(p).patch_index
        I_h, I_ft, I_fs = _inj(out)
        return I_h @ _jac(H.inv, h) @ S_h + I_ft @ S_fs + I_fs @ S_ft

    def mul_jac(g, k):
        h1, ft, _ = split3(g)
        h2, _, fs2 = split3(k)
        Ah, Bh = H.mul.partials(h1, h2)
        out = mul_eval(g, k).patch_index
        I_h, I_ft, I_fs = _inj(out)
        S_h1, S_ft1, _ = _sel(g)
        S_h2, _, S_fs2 = _sel(k)
        A_part = I_h @ Ah @ S_h1 + I_ft @ S_ft1
        B_part = I_h @ Bh @ S_h2 + I_fs @ S_fs2
        return A_part, B_part

    def arrow_sampler(rng):
        h = H.arrow_sampler(rng)
        return join3(h, sample_point(F, rng), sample_point(F, rng))

    def sfiber(x, rng):
        n, fs = base_prod.split(x)
        h = H.sfiber_sampler(n, rng)
        return join3(h, sample_point(F, rng), fs)

    def tfiber(x, rng):
        n, ft = base_prod.split(x)
        h = H.tfiber_sampler(n, rng)
        return join3(h, ft, sample_point(F, rng))

    def sfiber_grid(x, n_grid):
        n, fs = base_prod.split(x)
        out = []
        per = max(2, int(round(n_grid ** 0.5)))
        hs = H.sfiber_grid(n, per) if H.sfiber_grid else [
            H.sfiber_sampler(n, np.random.default_rng(j)) for j in range(per)
        ]
        for j, h in enumerate(hs):
            for l in range(max(1, n_grid // max(1, len(hs)))):
                f = Point.raw(F, 0, tuple(
                    -BOX + 2 * BOX * ((l + 0.5) / max(1, n_grid // max(1, len(hs))))
                    for _ in range(F.dim)))
                out.append(join3(h, f, fs))
        return out

    G = Groupoid(
        name=name or f"pullback({H.name})",
        objects=M,
        arrows=A,
        src=SmoothMap(A, M, src_eval, src_jac, "src"),
        tgt=SmoothMap(A, M, tgt_eval, tgt_jac, "tgt"),
        unit=SmoothMap(M, A, unit_eval, unit_jac, "unit"),
        inv=SmoothMap(A, A, inv_eval, inv_jac, "inv"),
        mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=arrow_sampler,
        object_sampler=lambda rng: base_prod.join(H.object_sampler(rng), sample_point(F, rng)),
        sfiber_sampler=sfiber,
        tfiber_sampler=tfiber,
        metadata={"triple": (split3, join3), "base_product": base_prod,
                  "arr_prod_inner": arr_prod_inner, "arr_prod": arr_prod},
    )

    def pi_eval(p):
        return split3(p)[0]

    def pi_jac(p):
        return _sel(p)[0]

    def pi0_eval(x):
        return base_prod.split(x)[0]

    def pi0_jac(x):
        return left_selector(base_prod, x.patch_index)

    def fiber_sampler(h, rng):
        return join3(h, sample_point(F, rng), sample_point(F, rng))

    # kernel: pairs over a base object, K = {(n, ft, fs)}
    ker_prod_inner = ProductSpace(N, F)
    ker_prod = ProductSpace(ker_prod_inner.space, F)
    KA = ker_prod.space

    def ker_split(p):
        nf, fs = ker_prod.split(p)
        n, ft = ker_prod_inner.split(nf)
        return n, ft, fs

    def ker_join(n, ft, fs):
        return ker_prod.join(ker_prod_inner.join(n, ft), fs)

    def k_src(p):
        n, _, fs = ker_split(p)
        return base_prod.join(n, fs)

    def k_tgt(p):
        n, ft, _ = ker_split(p)
        return base_prod.join(n, ft)

    def k_unit(x):
        n, f = base_prod.split(x)
        return ker_join(n, f, f)

    def k_inv(p):
        n, ft, fs = ker_split(p)
        return ker_join(n, fs, ft)

    def k_mul(g, k):
        n, ft, _ = ker_split(g)
        _, _, fs = ker_split(k)
        return ker_join(n, ft, fs)

    dimN, dimF = N.dim, F.dim

    def k_sel(p):
        nf_idx = ker_prod._indices(p.patch_index)[0]
        S_nf = left_selector(ker_prod, p.patch_index)
        return (
            left_selector(ker_prod_inner, nf_idx) @ S_nf,
            right_selector(ker_prod_inner, nf_idx) @ S_nf,
            right_selector(ker_prod, p.patch_index),
        )

    def k_src_jac(p):
        S_n, _, S_fs = k_sel(p)
        I_n, I_f = _base_inj(0)
        return I_n @ S_n + I_f @ S_fs

    def k_tgt_jac(p):
        S_n, S_ft, _ = k_sel(p)
        I_n, I_f = _base_inj(0)
        return I_n @ S_n + I_f @ S_ft

    def k_unit_jac(x):
        out = k_unit(x).patch_index
        nf_idx = ker_prod._indices(out)[0]
        I_nf = left_injector(ker_prod, out)
        I_n = I_nf @ left_injector(ker_prod_inner, nf_idx)
        I_ft = I_nf @ right_injector(ker_prod_inner, nf_idx)
        I_fs = right_injector(ker_prod, out)
        S_n = left_selector(base_prod, x.patch_index)
        S_f = right_selector(base_prod, x.patch_index)
        return I_n @ S_n + (I_ft + I_fs) @ S_f

    def k_inv_jac(p):
        S_n, S_ft, S_fs = k_sel(p)
        out = k_inv(p).patch_index
        nf_idx = ker_prod._indices(out)[0]
        I_nf = left_injector(ker_prod, out)
        I_n = I_nf @ left_injector(ker_prod_inner, nf_idx)
        I_ft = I_nf @ right_injector(ker_prod_inner, nf_idx)
        I_fs = right_injector(ker_prod, out)
        return I_n @ S_n + I_ft @ S_fs + I_fs @ S_ft

    def k_mul_jac(g, k):
        S_n1, S_ft1, _ = k_sel(g)
        _, _, S_fs2 = k_sel(k)
        out = k_mul(g, k).patch_index
        nf_idx = ker_prod._indices(out)[0]
        I_nf = left_injector(ker_prod, out)
        I_n = I_nf @ left_injector(ker_prod_inner, nf_idx)
        I_ft = I_nf @ right_injector(ker_prod_inner, nf_idx)
        I_fs = right_injector(ker_prod, out)
        return I_n @ S_n1 + I_ft @ S_ft1, I_fs @ S_fs2

    K = Groupoid(
        name=f"ker[{name or 'pullback'}]",
        objects=M,
        arrows=KA,
        src=SmoothMap(KA, M, k_src, k_src_jac, "src"),
        tgt=SmoothMap(KA, M, k_tgt, k_tgt_jac, "tgt"),
        unit=SmoothMap(M, KA, k_unit, k_unit_jac, "unit"),
        inv=SmoothMap(KA, KA, k_inv, k_inv_jac, "inv"),
        mul=PairMap(KA, KA, KA, k_mul, k_mul_jac, "mul", constant_partials=True),
        arrow_sampler=lambda rng: ker_join(
            H.object_sampler(rng), sample_point(F, rng), sample_point(F, rng)
        ),
        object_sampler=G.object_sampler,
        sfiber_sampler=lambda x, rng: k_join_over(x, rng),
        tfiber_sampler=lambda x, rng: k_join_over_t(x, rng),
        metadata={"source_connected": True},
    )

    def k_join_over(x, rng):
        n, fs = base_prod.split(x)
        return ker_join(n, sample_point(F, rng), fs)

    def k_join_over_t(x, rng):
        n, ft = base_prod.split(x)
        return ker_join(n, ft, sample_point(F, rng))

    def embed_eval(p):
        n, ft, fs = ker_split(p)
        return join3(H.unit(n), ft, fs)

    def embed_jac(p):
        n, ft, fs = ker_split(p)
        S_n, S_ft, S_fs = k_sel(p)
        out = embed_eval(p).patch_index
        I_h, I_ft, I_fs = _inj(out)
        return I_h @ _jac(H.unit, n) @ S_n + I_ft @ S_ft + I_fs @ S_fs

    NU = unit_groupoid(N)

    def k_family_arrow(p):
        return ker_split(p)[0]

    def k_family_arrow_jac(p):
        return k_sel(p)[0]

    kernel_family = GroupoidMorphism(
        name=f"ker[{name or 'pullback'}]->N",
        total=K,
        base_grpd=NU,
        arrow_map=SmoothMap(KA, N, k_family_arrow, k_family_arrow_jac, "pi_K"),
        object_map=SmoothMap(M, N, pi0_eval, pi0_jac, "pi0"),
        fiber_sampler=lambda n, rng: ker_join(n, sample_point(F, rng), sample_point(F, rng)),
        object_fiber_sampler=lambda n, rng: base_prod.join(n, sample_point(F, rng)),
        metadata={"family": True},
    )

    morphism = GroupoidMorphism(
        name=name or f"pr[{H.name}]",
        total=G,
        base_grpd=H,
        arrow_map=SmoothMap(A, H.arrows, pi_eval, pi_jac, "pr"),
        object_map=SmoothMap(M, N, pi0_eval, pi0_jac, "pi0"),
        fiber_sampler=fiber_sampler,
        object_fiber_sampler=lambda n, rng: base_prod.join(n, sample_point(F, rng)),
        kernel=KernelData(K, SmoothMap(KA, A, embed_eval, embed_jac, "ker_incl"), kernel_family),
        metadata={
            "morita_fibration": True,
            "declared_fibration": True,
            "kernel_source_connected": True,
            "triple": (split3, join3),
            "base_product": base_prod,
            "arr_prod_inner": arr_prod_inner,
            "arr_prod": arr_prod,
        },
    )
    return morphism

# ---------------------------------------------------------------------------
# trivial family N x Fiber -> N (with its projection morphism)


def trivial_family(N: Space, fiber: Groupoid, name: str = "") -> GroupoidMorphism:
    """Constant family of groupoids over N with the projection morphism."""
    arr_prod = ProductSpace(N, fiber.arrows)
    obj_prod = ProductSpace(N, fiber.objects)
    A, M = arr_prod.space, obj_prod.space
    from .smoothmap import jacobian as _jac

    def lift(fmap: SmoothMap, in_prod: ProductSpace, out_prod: ProductSpace, nm: str):
        def ev(p):
            y, q = in_prod.split(p)
            return out_prod.join(y, fmap(q))

        def jac(p):
            y, q = in_prod.split(p)
            img = fmap(q)
            out = out_prod.pack_index(y.patch_index, img.patch_index)
            return left_injector(out_prod, out) @ left_selector(
                in_prod, p.patch_index
            ) + right_injector(out_prod, out) @ _jac(fmap, q) @ right_selector(
                in_prod, p.patch_index
            )

        return SmoothMap(in_prod.space, out_prod.space, ev, jac, nm)

    def mul_eval(g, h):
        _, qg = arr_prod.split(g)
        y, qh = arr_prod.split(h)
        return arr_prod.join(y, fiber.mul(qg, qh))

    def mul_jac(g, h):
        _, qg = arr_prod.split(g)
        y, qh = arr_prod.split(h)
        Aq, Bq = fiber.mul.partials(qg, qh)
        out = mul_eval(g, h).patch_index
        I_y = left_injector(arr_prod, out)
        I_q = right_injector(arr_prod, out)
        A_part = I_q @ Aq @ right_selector(arr_prod, g.patch_index)
        B_part = I_y @ left_selector(arr_prod, h.patch_index) + I_q @ Bq @ right_selector(
            arr_prod, h.patch_index
        )
        return A_part, B_part

    def tfiber_nodes(x, n):
        y, q = obj_prod.split(x)
        base = fiber.metadata.get("tfiber_nodes")
        if base is None:
            return None
        pts, w = base(q, n)
        return [arr_prod.join(y, p) for p in pts], w

    G = Groupoid(
        name=name or f"{N.name}x{fiber.name}",
        objects=M,
        arrows=A,
        src=lift(fiber.src, arr_prod, obj_prod, "src"),
        tgt=lift(fiber.tgt, arr_prod, obj_prod, "tgt"),
        unit=lift(fiber.unit, obj_prod, arr_prod, "unit"),
        inv=lift(fiber.inv, arr_prod, arr_prod, "inv"),
        mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=lambda rng: arr_prod.join(sample_point(N, rng), fiber.arrow_sampler(rng)),
        object_sampler=lambda rng: obj_prod.join(sample_point(N, rng), fiber.object_sampler(rng)),
        sfiber_sampler=lambda x, rng: _tf_fiber(x, rng, fiber.sfiber_sampler),
        tfiber_sampler=lambda x, rng: _tf_fiber(x, rng, fiber.tfiber_sampler),
        sfiber_grid=(
            (lambda x, n: [arr_prod.join(obj_prod.split(x)[0], q)
                           for q in fiber.sfiber_grid(obj_prod.split(x)[1], n)])
            if fiber.sfiber_grid else None
        ),
        probe_objects=tuple(
            obj_prod.join(Point.raw(N, 0, (0.0,) * N.dim), q)
            for q in _fiber_probe_objects(fiber)
        ),
        metadata={
            "arr_product": arr_prod,
            "obj_product": obj_prod,
            "fiber": fiber,
            "tfiber_nodes": tfiber_nodes if "tfiber_nodes" in fiber.metadata else None,
            "compact_tfibers": fiber.metadata.get("compact_tfibers", False),
            "source_connected": fiber.metadata.get("source_connected", False),
        },
    )

    def _tf_fiber(x, rng, fiber_sampler):
        y, q = obj_prod.split(x)
        return arr_prod.join(y, fiber_sampler(q, rng))

    NU = unit_groupoid(N)

    def pi_eval(p):
        return arr_prod.split(p)[0]

    def pi_jac(p):
        return left_selector(arr_prod, p.patch_index)

    def pi0_eval(x):
        return obj_prod.split(x)[0]

    def pi0_jac(x):
        return left_selector(obj_prod, x.patch_index)

    def path_with_start(rng):
        gamma = random_smooth_path(N, 0, rng)
        g = arr_prod.join(gamma.point(0.0), fiber.arrow_sampler(rng))
        return gamma, g

    def composable(rng):
        gamma = random_smooth_path(N, 0, rng)
        y0 = gamma.point(0.0)
        qg, qh = fiber.pair_sample(rng)
        return gamma, gamma, arr_prod.join(y0, qg), arr_prod.join(y0, qh)

    def object_path_with_start(rng):
        delta = random_smooth_path(N, 0, rng)
        x = obj_prod.join(delta.point(0.0), fiber.object_sampler(rng))
        return delta, x

    return GroupoidMorphism(
        name=name or f"family[{G.name}]",
        total=G,
        base_grpd=NU,
        arrow_map=SmoothMap(A, N, pi_eval, pi_jac, "pi"),
        object_map=SmoothMap(M, N, pi0_eval, pi0_jac, "pi0"),
        fiber_sampler=lambda y, rng: arr_prod.join(y, fiber.arrow_sampler(rng)),
        object_fiber_sampler=lambda y, rng: obj_prod.join(y, fiber.object_sampler(rng)),
        transport=TransportSamplers(path_with_start, composable, object_path_with_start),
        metadata={
            "family": True,
            "declared_fibration": True,
            "kernel_source_connected": fiber.metadata.get("source_connected", False),
            "arr_product": arr_prod,
            "obj_product": obj_prod,
            "fiber": fiber,
        },
    )


def _fiber_probe_objects(fiber: Groupoid):
    return fiber.probe_objects


# ---------------------------------------------------------------------------
# disjoint unions


@dataclass(frozen=True)
class UnionSpace:
    parts: tuple[Space, ...]
    space: Space

    @classmethod
    def of(cls, *parts: Space, name: str = "") -> "UnionSpace":
        patches = []
        for i, part in enumerate(parts):
            for p in part.patches:
                patches.append(
                    Patch(p.lin_count, p.circ_count, f"{i}|{p.component_label}", p.excluded_points)
                )
        return cls(tuple(parts), Space(tuple(patches), name=name or "⊔".join(p.name for p in parts)))

    def offset(self, part_index: int) -> int:
        return sum(len(p.patches) for p in self.parts[:part_index])

    def embed(self, part_index: int, p: Point) -> Point:
        return Point.raw(self.space, self.offset(part_index) + p.patch_index, p.coords)

    def split(self, p: Point) -> tuple[int, Point]:
        idx = p.patch_index
        for i, part in enumerate(self.parts):
            if idx < len(part.patches):
                return i, Point.raw(part, idx, p.coords)
            idx -= len(part.patches)
        raise IndexError(p.patch_index)


def disjoint_union(parts: list[Groupoid], name: str = "") -> Groupoid:
    """Disjoint union groupoid; all parts must share coordinate dimensions."""
    if len({g.arrows.dim for g in parts}) != 1 or len({g.objects.dim for g in parts}) != 1:
        raise InvalidParams("disjoint union requires equal patch dimensions")
    ua = UnionSpace.of(*(g.arrows for g in parts))
    uo = UnionSpace.of(*(g.objects for g in parts))
    from .smoothmap import jacobian as _jac

    def route(get_map, in_union, out_union, nm):
        def ev(p):
            i, q = in_union.split(p)
            return out_union.embed(i, get_map(parts[i])(q))

        def jac(p):
            i, q = in_union.split(p)
            return _jac(get_map(parts[i]), q)

        return SmoothMap(in_union.space, out_union.space, ev, jac, nm)

    def mul_eval(g, h):
        i, qg = ua.split(g)
        j, qh = ua.split(h)
        if i != j:
            raise InvalidParams("arrows of different union components are not composable")
        return ua.embed(i, parts[i].mul(qg, qh))

    def mul_jac(g, h):
        i, qg = ua.split(g)
        _, qh = ua.split(h)
        return parts[i].mul.partials(qg, qh)

    def arrow_sampler(rng):
        i = int(rng.integers(len(parts)))
        return ua.embed(i, parts[i].arrow_sampler(rng))

    def object_sampler(rng):
        i = int(rng.integers(len(parts)))
        return uo.embed(i, parts[i].object_sampler(rng))

    def sfiber(x, rng):
        i, q = uo.split(x)
        return ua.embed(i, parts[i].sfiber_sampler(q, rng))

    def tfiber(x, rng):
        i, q = uo.split(x)
        return ua.embed(i, parts[i].tfiber_sampler(q, rng))

    def sfiber_grid(x, n):
        i, q = uo.split(x)
        if parts[i].sfiber_grid is None:
            return None
        return [ua.embed(i, a) for a in parts[i].sfiber_grid(q, n)]

    probes = tuple(
        uo.embed(i, q) for i, g in enumerate(parts) for q in g.probe_objects
    )

    return Groupoid(
        name=name or "⊔".join(g.name for g in parts),
        objects=uo.space,
        arrows=ua.space,
        src=route(lambda g: g.src, ua, uo, "src"),
        tgt=route(lambda g: g.tgt, ua, uo, "tgt"),
        unit=route(lambda g: g.unit, uo, ua, "unit"),
        inv=route(lambda g: g.inv, ua, ua, "inv"),
        mul=PairMap(ua.space, ua.space, ua.space, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=arrow_sampler,
        object_sampler=object_sampler,
        sfiber_sampler=sfiber,
        tfiber_sampler=tfiber,
        sfiber_grid=sfiber_grid if all(g.sfiber_grid for g in parts) else None,
        probe_objects=probes,
        metadata={"union_arrows": ua, "union_objects": uo, "parts": parts},
    )

def covering_union_morphism(
    order: int = 2, x0: float = 0.0, name: str = "disjoint_union_cover"
) -> GroupoidMorphism:
    """Disjoint union (H ⊔ H*) -> H for H a constant bundle of finite groups.

    H is the bundle R x Z_order over R; H* removes {x0} x (Z_order \\ {e}).
    The morphism is the identity on the first copy and the inclusion on the
    second; it is a local diffeomorphism but not a fibration (the arrow
    (x0, g), g != e, has no lift over the second copy of x0).
    """
    base = line(1, name="R")
    H = group_bundle(base, "finite", order=order, name="RxZ")
    H_star = group_bundle(base, "finite", order=order, punctured_at=(x0,), name="RxZ*")
    G = disjoint_union([H, H_star], name=f"{H.name}⊔{H_star.name}")
    ua: UnionSpace = G.metadata["union_arrows"]
    uo: UnionSpace = G.metadata["union_objects"]

    def pi_eval(p):
        i, q = ua.split(p)
        # component patches of H and H* enumerate group elements identically
        return Point.raw(H.arrows, q.patch_index, q.coords)

    def pi0_eval(x):
        i, q = uo.split(x)
        return q

    def pi_jac(p):
        return np.eye(1)

    def fiber_sampler(h, rng):
        i = int(rng.integers(2))
        if i == 0:
            return ua.embed(0, h)
        target = Point.raw(H_star.arrows, h.patch_index, h.coords)
        shortfall = H_star.arrows.patches[h.patch_index].exclusion_violation(h.coords)
        if shortfall is not None:
            return ua.embed(0, h)
        return ua.embed(1, target)

    def path_with_start(rng):
        k = int(rng.integers(order))
        a = float(rng.uniform(-BOX, BOX))
        b = float(rng.uniform(-BOX, BOX))
        gamma = segment_path(H.arrows, k, (a,), (b,), label=f"seg[{k}]")
        g = fiber_sampler(gamma.point(0.0), rng)
        return gamma, g

    def composable(rng):
        k1, k2 = int(rng.integers(order)), int(rng.integers(order))
        a = float(rng.uniform(-BOX, BOX))
        b = float(rng.uniform(-BOX, BOX))
        gamma = segment_path(H.arrows, k1, (a,), (b,))
        eta = segment_path(H.arrows, k2, (a,), (b,))
        copy = int(rng.integers(2))
        if copy == 1:
            ok = all(
                H_star.arrows.patches[k].exclusion_violation((a,)) is None
                for k in (k1, k2)
            )
            copy = 1 if ok else 0
        g = ua.embed(copy, Point.raw(ua.parts[copy], k1, (a,)))
        k_arr = ua.embed(copy, Point.raw(ua.parts[copy], k2, (a,)))
        return gamma, eta, g, k_arr

    def object_path_with_start(rng):
        a = float(rng.uniform(-BOX, BOX))
        b = float(rng.uniform(-BOX, BOX))
        delta = segment_path(H.objects, 0, (a,), (b,))
        x = uo.embed(int(rng.integers(2)), delta.point(0.0))
        return delta, x

    # kernel: units of both copies, a covering of R by two sheets
    K_part = group_bundle(base, "finite", order=1, name="R")
    K = disjoint_union([K_part, group_bundle(base, "finite", order=1, name="R'")],
                       name="R⊔R")
    kua: UnionSpace = K.metadata["union_arrows"]

    def embed_eval_fixed(p):
        i, q = kua.split(p)
        # unit-element patch of each copy is patch 0
        return Point.raw(
            G.arrows, ua.offset(i) + 0, q.coords
        )

    NU = unit_groupoid(base)

    def k_pi(p):
        i, q = kua.split(p)
        return Point.raw(base, 0, q.coords)

    kernel_family = GroupoidMorphism(
        name="cover_kernel",
        total=K,
        base_grpd=NU,
        arrow_map=SmoothMap(K.arrows, base, k_pi, lambda p: cached_eye(1), "pi_K"),
        object_map=SmoothMap(K.objects, base, k_pi, lambda p: cached_eye(1), "pi0"),
        fiber_sampler=lambda y, rng: kua.embed(
            int(rng.integers(2)), Point.raw(K.metadata["parts"][0].arrows, 0, y.coords)
        ),
        object_fiber_sampler=lambda y, rng: K.metadata["union_objects"].embed(
            int(rng.integers(2)), y
        ),
        transport=TransportSamplers(
            lambda rng: _cover_kernel_path(rng),
            None,
            None,
        ),
        metadata={"family": True},
    )

    def _cover_kernel_path(rng):
        a = float(rng.uniform(-BOX, BOX))
        b = float(rng.uniform(-BOX, BOX))
        gamma = segment_path(base, 0, (a,), (b,))
        g = kua.embed(int(rng.integers(2)), Point.raw(K.metadata["parts"][0].arrows, 0, (a,)))
        return gamma, g

    return GroupoidMorphism(
        name=name,
        total=G,
        base_grpd=H,
        arrow_map=SmoothMap(G.arrows, H.arrows, pi_eval, pi_jac, "pi"),
        object_map=SmoothMap(G.objects, H.objects, pi0_eval, lambda p: cached_eye(1), "pi0"),
        fiber_sampler=fiber_sampler,
        object_fiber_sampler=lambda y, rng: uo.embed(int(rng.integers(2)), y),
        kernel=KernelData(
            K, SmoothMap(K.arrows, G.arrows, embed_eval_fixed, lambda p: cached_eye(1), "ker_incl"),
            kernel_family,
        ),
        transport=TransportSamplers(path_with_start, composable, object_path_with_start),
        metadata={
            "declared_fibration": False,
            "kernel_source_connected": True,
            "local_diffeo": True,
        },
    )


# ---------------------------------------------------------------------------
# product with a manifold: H x P -> H (a fibration that is not uniform)


def product_with_manifold(H: Groupoid, P: Space, name: str = "") -> GroupoidMorphism:
    arr_prod = ProductSpace(H.arrows, P)
    obj_prod = ProductSpace(H.objects, P)
    A, M = arr_prod.space, obj_prod.space
    from .smoothmap import jacobian as _jac

    def lift(fmap, in_prod, out_prod, nm):
        def ev(p):
            h, q = in_prod.split(p)
            return out_prod.join(fmap(h), q)

        def jac(p):
            h, q = in_prod.split(p)
            img = fmap(h)
            out = out_prod.pack_index(img.patch_index, q.patch_index)
            return left_injector(out_prod, out) @ _jac(fmap, h) @ left_selector(
                in_prod, p.patch_index
            ) + right_injector(out_prod, out) @ right_selector(in_prod, p.patch_index)

        return SmoothMap(in_prod.space, out_prod.space, ev, jac, nm)

    def mul_eval(g, h):
        hg, _ = arr_prod.split(g)
        hh, q = arr_prod.split(h)
        return arr_prod.join(H.mul(hg, hh), q)

    def mul_jac(g, h):
        hg, _ = arr_prod.split(g)
        hh, q = arr_prod.split(h)
        Ah, Bh = H.mul.partials(hg, hh)
        out = mul_eval(g, h).patch_index
        I_h = left_injector(arr_prod, out)
        I_q = right_injector(arr_prod, out)
        A_part = I_h @ Ah @ left_selector(arr_prod, g.patch_index)
        B_part = I_h @ Bh @ left_selector(arr_prod, h.patch_index) + I_q @ right_selector(
            arr_prod, h.patch_index
        )
        return A_part, B_part

    G = Groupoid(
        name=name or f"{H.name}xP",
        objects=M,
        arrows=A,
        src=lift(H.src, arr_prod, obj_prod, "src"),
        tgt=lift(H.tgt, arr_prod, obj_prod, "tgt"),
        unit=lift(H.unit, obj_prod, arr_prod, "unit"),
        inv=lift(H.inv, arr_prod, arr_prod, "inv"),
        mul=PairMap(A, A, A, mul_eval, mul_jac, "mul", constant_partials=True),
        arrow_sampler=lambda rng: arr_prod.join(H.arrow_sampler(rng), sample_point(P, rng)),
        object_sampler=lambda rng: obj_prod.join(H.object_sampler(rng), sample_point(P, rng)),
        sfiber_sampler=lambda x, rng: _fib(x, rng, H.sfiber_sampler),
        tfiber_sampler=lambda x, rng: _fib(x, rng, H.tfiber_sampler),
        sfiber_grid=(
            (lambda x, n: [arr_prod.join(h, obj_prod.split(x)[1])
                           for h in H.sfiber_grid(obj_prod.split(x)[0], n)])
            if H.sfiber_grid else None
        ),
        metadata={"arr_product": arr_prod, "obj_product": obj_prod},
    )

    def _fib(x, rng, fiber_sampler):
        h, q = obj_prod.split(x)
        return arr_prod.join(fiber_sampler(h, rng), q)

    def pi_eval(p):
        return arr_prod.split(p)[0]

    def path_with_start(rng):
        gamma = random_smooth_path(H.arrows, int(rng.integers(len(H.arrows.patches))), rng)
        g = arr_prod.join(gamma.point(0.0), sample_point(P, rng))
        return gamma, g

    return GroupoidMorphism(
        name=name or f"pr1[{G.name}]",
        total=G,
        base_grpd=H,
        arrow_map=SmoothMap(A, H.arrows, pi_eval,
                            lambda p: left_selector(arr_prod, p.patch_index), "pr1"),
        object_map=SmoothMap(M, H.objects,
                             lambda x: obj_prod.split(x)[0],
                             lambda x: left_selector(obj_prod, x.patch_index), "pr1_0"),
        fiber_sampler=lambda h, rng: arr_prod.join(h, sample_point(P, rng)),
        object_fiber_sampler=lambda y, rng: obj_prod.join(y, sample_point(P, rng)),
        transport=TransportSamplers(path_with_start, None, None),
        metadata={"declared_fibration": True, "kernel_source_connected": P.dim > 0},
    )

# ---------------------------------------------------------------------------
# pair-groupoid fibration Pair(M) -> Pair(S^1) for M a fibred circle product


def _fiber_patches(punctured: bool):
    """Fibre coordinate charts: plain R, or log charts on R \\ {0}."""
    if not punctured:
        return (Patch(1, 1, "all"),), (lambda i, u: u), (lambda i, x: x)
    # x = +exp(u) on patch "pos", x = -exp(u) on patch "neg"
    return (Patch(1, 1, "pos"), Patch(1, 1, "neg")), None, None


def pair_fibration(punctured: bool = False, name: str = "") -> GroupoidMorphism:
    """Pair(M) -> Pair(S^1) over pi0 = angle projection, M = fibre x S^1.

    The punctured variant uses fibre R \\ {0} in logarithmic charts
    (x = ±exp(u)), so escape through the deleted point is a finite-time event
    for fibre-translating base lifts.
    """
    patches, _, _ = _fiber_patches(punctured)
    M = Space(patches, name="S1xR*" if punctured else "S1xR")
    Ncirc = circle("S1")
    G = pair_groupoid(M, name=f"pair({M.name})")
    H = pair_groupoid(Ncirc, name="pair(S1)")
    prodM: ProductSpace = G.metadata["product_space"]
    prodN: ProductSpace = H.metadata["product_space"]

    def pi0_eval(x):
        return Point.raw(Ncirc, 0, (x.coords[1],))

    def pi0_jac(x):
        return np.array([[0.0, 1.0]])

    def pi_eval(p):
        a, b = prodM.split(p)
        return prodN.join(pi0_eval(a), pi0_eval(b))

    def pi_jac(p):
        # packed pair coords: (x1, x2, th1, th2) -> (th1, th2)
        return np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])

    def sample_M_over(theta: float, rng) -> Point:
        idx = int(rng.integers(len(M.patches)))
        u = float(rng.uniform(-BOX, BOX)) if not punctured else float(rng.uniform(-1.0, 1.0))
        return Point.raw(M, idx, (u, theta))

    def fiber_sampler(h, rng):
        th1, th2 = h.coords
        return prodM.join(sample_M_over(th1, rng), sample_M_over(th2, rng))

    # kernel: fibre pairs over a shared angle
    nM = len(M.patches)
    k_patches = tuple(
        Patch(2, 1, f"{pi.component_label},{pj.component_label}")
        for pi in M.patches
        for pj in M.patches
    )
    KA = Space(k_patches, name="ker_pairfib")

    def k_idx(i, j):
        return i * nM + j

    def k_parts(p):
        return p.patch_index // nM, p.patch_index % nM

    def k_src(p):
        _, j = k_parts(p)
        return Point.raw(M, j, (p.coords[1], p.coords[2]))

    def k_tgt(p):
        i, _ = k_parts(p)
        return Point.raw(M, i, (p.coords[0], p.coords[2]))

    def k_unit(x):
        return Point.raw(KA, k_idx(x.patch_index, x.patch_index),
                         (x.coords[0], x.coords[0], x.coords[1]))

    def k_inv(p):
        i, j = k_parts(p)
        return Point.raw(KA, k_idx(j, i), (p.coords[1], p.coords[0], p.coords[2]))

    def k_mul(g, h):
        i, _ = k_parts(g)
        _, j2 = k_parts(h)
        return Point.raw(KA, k_idx(i, j2), (g.coords[0], h.coords[1], h.coords[2]))

    k_src_J = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    k_tgt_J = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    k_unit_J = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    k_inv_J = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    k_mul_A = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    k_mul_B = np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    def k_arrow_sampler(rng):
        x = sample_point(M, rng) if not punctured else sample_M_over(
            float(rng.uniform(0, TWO_PI)), rng)
        j = int(rng.integers(nM))
        u2 = x.coords[0] + float(rng.uniform(-1, 1))
        return Point.raw(KA, k_idx(x.patch_index, j), (x.coords[0], u2, x.coords[1]))

    K = Groupoid(
        name="ker[pair_fibration]",
        objects=M,
        arrows=KA,
        src=SmoothMap(KA, M, k_src, lambda p: k_src_J, "src"),
        tgt=SmoothMap(KA, M, k_tgt, lambda p: k_tgt_J, "tgt"),
        unit=SmoothMap(M, KA, k_unit, lambda p: k_unit_J, "unit"),
        inv=SmoothMap(KA, KA, k_inv, lambda p: k_inv_J, "inv"),
        mul=PairMap(KA, KA, KA, k_mul, lambda g, h: (k_mul_A, k_mul_B), "mul", constant_partials=True),
        arrow_sampler=k_arrow_sampler,
        object_sampler=lambda rng: sample_M_over(float(rng.uniform(0, TWO_PI)), rng),
        sfiber_sampler=lambda x, rng: Point.raw(
            KA,
            k_idx(int(rng.integers(nM)), x.patch_index),
            (float(rng.uniform(-1, 1)), x.coords[0], x.coords[1]),
        ),
        tfiber_sampler=lambda x, rng: Point.raw(
            KA,
            k_idx(x.patch_index, int(rng.integers(nM))),
            (x.coords[0], float(rng.uniform(-1, 1)), x.coords[1]),
        ),
        metadata={"source_connected": not punctured},
    )

    embed_J = np.array(
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
    )

    def embed_eval(p):
        i, j = k_parts(p)
        return prodM.join(
            Point.raw(M, i, (p.coords[0], p.coords[2])),
            Point.raw(M, j, (p.coords[1], p.coords[2])),
        )

    NU = unit_groupoid(Ncirc)

    kernel_family = GroupoidMorphism(
        name="ker[pair_fibration]->S1",
        total=K,
        base_grpd=NU,
        arrow_map=SmoothMap(KA, Ncirc, lambda p: Point.raw(Ncirc, 0, (p.coords[2],)),
                            lambda p: np.array([[0.0, 0.0, 1.0]]), "pi_K"),
        object_map=SmoothMap(M, Ncirc, pi0_eval, pi0_jac, "pi0"),
        fiber_sampler=lambda y, rng: Point.raw(
            KA, k_idx(int(rng.integers(nM)), int(rng.integers(nM))),
            (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)), y.coords[0]),
        ),
        object_fiber_sampler=lambda y, rng: sample_M_over(y.coords[0], rng),
        transport=None,
        metadata={"family": True},
    )

    def angle_fn(rng):
        th0 = float(rng.uniform(0, TWO_PI))
        w = TWO_PI * float(rng.choice((-1, 0, 1)))
        amp = float(rng.uniform(0.0, 0.8))
        ph = float(rng.uniform(0, TWO_PI))
        f = lambda t: th0 + w * t + amp * (math.sin(TWO_PI * t + ph) - math.sin(ph))
        df = lambda t: w + amp * TWO_PI * math.cos(TWO_PI * t + ph)
        return f, df

    def path_with_start(rng):
        f1, df1 = angle_fn(rng)
        f2, df2 = angle_fn(rng)
        gamma = coordinate_path(
            H.arrows, 0, lambda t: (f1(t), f2(t)), lambda t: (df1(t), df2(t))
        )
        g = fiber_sampler(gamma.point(0.0), rng)
        return gamma, g

    def composable(rng):
        fa, dfa = angle_fn(rng)
        fb, dfb = angle_fn(rng)
        fc, dfc = angle_fn(rng)
        gamma = coordinate_path(H.arrows, 0, lambda t: (fa(t), fb(t)),
                                lambda t: (dfa(t), dfb(t)))
        eta = coordinate_path(H.arrows, 0, lambda t: (fb(t), fc(t)),
                              lambda t: (dfb(t), dfc(t)))
        xa = sample_M_over(fa(0.0), rng)
        xb = sample_M_over(fb(0.0), rng)
        xc = sample_M_over(fc(0.0), rng)
        return gamma, eta, prodM.join(xa, xb), prodM.join(xb, xc)

    def object_path_with_start(rng):
        f, df = angle_fn(rng)
        delta = coordinate_path(Ncirc, 0, lambda t: (f(t),), lambda t: (df(t),))
        return delta, sample_M_over(f(0.0), rng)

    return GroupoidMorphism(
        name=name or ("pair_fibration*" if punctured else "pair_fibration"),
        total=G,
        base_grpd=H,
        arrow_map=SmoothMap(G.arrows, H.arrows, pi_eval, pi_jac, "pi"),
        object_map=SmoothMap(M, Ncirc, pi0_eval, pi0_jac, "pi0"),
        fiber_sampler=fiber_sampler,
        object_fiber_sampler=lambda y, rng: sample_M_over(y.coords[0], rng),
        kernel=KernelData(K, SmoothMap(KA, G.arrows, embed_eval, lambda p: embed_J, "ker_incl"),
                          kernel_family),
        transport=TransportSamplers(path_with_start, composable, object_path_with_start),
        metadata={
            "declared_fibration": True,
            "kernel_source_connected": not punctured,
            "punctured": punctured,
            "product_space": prodM,
        },
    )


# ---------------------------------------------------------------------------
# families built from bundles over their own base (pi = source)


def bundle_family_morphism(bundle: Groupoid, name: str = "") -> GroupoidMorphism:
    """A bundle of groups G over M seen as the family pi = pr1: G -> M.

    The kernel of a family is the whole groupoid; the kernel entry reuses the
    morphism itself.
    """
    M = bundle.objects
    NU = unit_groupoid(M)
    dim = M.dim

    def pi_eval(p):
        return bundle.src(p)

    def path_with_start(rng):
        a = tuple(float(rng.uniform(-BOX, BOX)) for _ in range(dim))
        b = tuple(float(rng.uniform(-BOX, BOX)) for _ in range(dim))
        gamma = segment_path(M, 0, a, b)
        g = bundle.sfiber_sampler(gamma.point(0.0), rng)
        return gamma, g

    def composable(rng):
        a = tuple(float(rng.uniform(-BOX, BOX)) for _ in range(dim))
        b = tuple(float(rng.uniform(-BOX, BOX)) for _ in range(dim))
        gamma = segment_path(M, 0, a, b)
        x0 = gamma.point(0.0)
        g = bundle.sfiber_sampler(x0, rng)
        k = bundle.sfiber_sampler(x0, rng)
        return gamma, gamma, g, k

    def object_path_with_start(rng):
        a = tuple(float(rng.uniform(-BOX, BOX)) for _ in range(dim))
        b = tuple(float(rng.uniform(-BOX, BOX)) for _ in range(dim))
        delta = segment_path(M, 0, a, b)
        return delta, delta.point(0.0)

    from .smoothmap import jacobian as _jac

    morphism = GroupoidMorphism(
        name=name or f"family[{bundle.name}]",
        total=bundle,
        base_grpd=NU,
        arrow_map=SmoothMap(bundle.arrows, M, pi_eval,
                            lambda p: _jac(bundle.src, p), "pi"),
        object_map=SmoothMap(M, M, lambda x: x, lambda x: cached_eye(dim), "id"),
        fiber_sampler=lambda x, rng: bundle.sfiber_sampler(x, rng),
        object_fiber_sampler=lambda x, rng: x,
        transport=TransportSamplers(path_with_start, composable, object_path_with_start),
        metadata={
            "family": True,
            "declared_fibration": bundle.metadata.get("group_order", 0) == 1
            or not bundle.probe_objects,
            "kernel_source_connected": bundle.metadata.get("source_connected", False),
            "local_diffeo": True,
        },
    )
    morphism.kernel = KernelData(
        bundle, SmoothMap(bundle.arrows, bundle.arrows, lambda p: p,
                          lambda p: cached_eye(bundle.arrows.dim), "id"), morphism
    )
    return morphism


def base_submersion_morphism(pi: GroupoidMorphism) -> GroupoidMorphism:
    """The base map pi0: M -> N as a morphism of unit groupoids."""
    M, N = pi.total.objects, pi.base_grpd.objects
    GM, GN = unit_groupoid(M), unit_groupoid(N)

    def path_with_start(rng):
        if pi.transport is not None and pi.transport.object_path_with_start is not None:
            return pi.transport.object_path_with_start(rng)
        delta = random_smooth_path(N, 0, rng)
        x = pi.object_fiber_sampler(delta.point(0.0), rng)
        return delta, x

    return GroupoidMorphism(
        name=f"base[{pi.name}]",
        total=GM,
        base_grpd=GN,
        arrow_map=pi.object_map,
        object_map=pi.object_map,
        fiber_sampler=pi.object_fiber_sampler,
        object_fiber_sampler=pi.object_fiber_sampler,
        transport=TransportSamplers(path_with_start, None, None),
        metadata={"family": False, "base_of": pi.name},
    )


# ---------------------------------------------------------------------------
# finite group and its reflection action on R


def finite_group_groupoid(order: int = 2) -> Groupoid:
    pt = point_space()
    A = finite(range(order), name=f"Z{order}")

    def mul_eval(g, h):
        return Point.raw(A, (g.patch_index + h.patch_index) % order, ())

    z00 = lambda p: np.zeros((0, 0))

    return Groupoid(
        name=f"Z{order}",
        objects=pt,
        arrows=A,
        src=SmoothMap(A, pt, lambda p: Point.raw(pt, 0, ()), z00, "src"),
        tgt=SmoothMap(A, pt, lambda p: Point.raw(pt, 0, ()), z00, "tgt"),
        unit=SmoothMap(pt, A, lambda x: Point.raw(A, 0, ()), z00, "unit"),
        inv=SmoothMap(A, A, lambda p: Point.raw(A, (-p.patch_index) % order, ()), z00, "inv"),
        mul=PairMap(A, A, A, mul_eval, lambda g, h: (np.zeros((0, 0)), np.zeros((0, 0))), "mul", constant_partials=True),
        arrow_sampler=lambda rng: Point.raw(A, int(rng.integers(order)), ()),
        object_sampler=lambda rng: Point.raw(pt, 0, ()),
        sfiber_sampler=lambda x, rng: Point.raw(A, int(rng.integers(order)), ()),
        tfiber_sampler=lambda x, rng: Point.raw(A, int(rng.integers(order)), ()),
        sfiber_grid=lambda x, n: [Point.raw(A, k, ()) for k in range(order)],
        metadata={"source_connected": order == 1,
                  "tfiber_nodes": lambda x, n: (
                      [Point.raw(A, k, ()) for k in range(order)],
                      [1.0 / order] * order)},
    )


def reflection_action_morphism() -> GroupoidMorphism:
    """Z_2 acting on R by reflection; the action morphism pr1 to Z_2."""
    M = line(1, name="R")
    A = Space((Patch(1, 0, "0"), Patch(1, 0, "1")), name="Z2⋉R")
    H = finite_group_groupoid(2)

    def sign(p):
        return 1.0 if p.patch_index == 0 else -1.0

    def tgt_eval(p):
        return Point.raw(M, 0, (sign(p) * p.coords[0],))

    def mul_eval(g, h):
        return Point.raw(A, (g.patch_index + h.patch_index) % 2, h.coords)

    G = Groupoid(
        name="Z2⋉R",
        objects=M,
        arrows=A,
        src=SmoothMap(A, M, lambda p: Point.raw(M, 0, p.coords), lambda p: cached_eye(1), "src"),
        tgt=SmoothMap(A, M, tgt_eval, lambda p: np.array([[sign(p)]]), "tgt"),
        unit=SmoothMap(M, A, lambda x: Point.raw(A, 0, x.coords), lambda x: cached_eye(1), "unit"),
        inv=SmoothMap(A, A, lambda p: Point.raw(A, p.patch_index, (sign(p) * p.coords[0],)),
                      lambda p: np.array([[sign(p)]]), "inv"),
        mul=PairMap(A, A, A, mul_eval, lambda g, h: (np.zeros((1, 1)), np.eye(1)), "mul", constant_partials=True),
        arrow_sampler=lambda rng: Point.raw(A, int(rng.integers(2)),
                                            (float(rng.uniform(-BOX, BOX)),)),
        object_sampler=lambda rng: sample_point(M, rng),
        sfiber_sampler=lambda x, rng: Point.raw(A, int(rng.integers(2)), x.coords),
        tfiber_sampler=lambda x, rng: _refl_tfiber(x, rng),
        sfiber_grid=lambda x, n: [Point.raw(A, k, x.coords) for k in range(2)],
        metadata={"source_connected": False},
    )

    def _refl_tfiber(x, rng):
        k = int(rng.integers(2))
        return Point.raw(A, k, ((1.0 if k == 0 else -1.0) * x.coords[0],))

    return GroupoidMorphism(
        name="pr1[Z2⋉R]",
        total=G,
        base_grpd=H,
        arrow_map=SmoothMap(A, H.arrows, lambda p: Point.raw(H.arrows, p.patch_index, ()),
                            lambda p: np.zeros((0, 1)), "pr1"),
        object_map=SmoothMap(M, H.objects, lambda x: Point.raw(H.objects, 0, ()),
                             lambda x: np.zeros((0, 1)), "pt"),
        fiber_sampler=lambda h, rng: Point.raw(A, h.patch_index,
                                               (float(rng.uniform(-BOX, BOX)),)),
        object_fiber_sampler=lambda y, rng: sample_point(M, rng),
        metadata={"action_morphism": True, "connected_base_group": False},
    )


# ---------------------------------------------------------------------------
# dispatcher


def catalog(name: str, **params):
    """Look up a catalog entry by name. Returns a Groupoid or GroupoidMorphism."""
    spaces = {
        "R": line(1, name="R"),
        "R2": line(2, name="R2"),
        "S1": circle(),
        "S1xR": Space((Patch(1, 1, "all"),), name="S1xR"),
    }
    try:
        if name == "pair":
            return pair_groupoid(spaces[params.get("space", "R")])
        if name == "action":
            kind = params.get("kind", "so2")
            if kind == "so2":
                return so2_action_morphism(trivial=params.get("trivial", False))
            if kind == "finite":
                return reflection_action_morphism()
            raise InvalidParams(f"unknown action kind {kind}")
        if name == "group_bundle":
            return group_bundle(
                spaces[params.get("space", "R")],
                params.get("group", "finite"),
                order=params.get("order", 2),
            )
        if name == "punctured_group_bundle":
            return group_bundle(
                spaces[params.get("space", "R")],
                "finite",
                order=params.get("order", 2),
                punctured_at=(params.get("x0", 0.0),),
            )
        if name == "pullback":
            H = params.get("base_groupoid") or pair_groupoid(spaces["R"])
            return pullback_of_projection(H, params.get("fiber") or line(1, name="F"))
        if name == "trivial_family":
            fiber = params.get("fiber_groupoid") or group_bundle(
                line(1, name="F"), "finite", order=params.get("order", 2)
            )
            return trivial_family(params.get("base") or line(1, name="N"), fiber)
        if name == "disjoint_union":
            parts = params.get("parts")
            if parts:
                return disjoint_union(parts)
            return covering_union_morphism(order=params.get("order", 2),
                                           x0=params.get("x0", 0.0))
        if name == "product_with_manifold":
            H = params.get("base_groupoid") or pair_groupoid(spaces["R"])
            return product_with_manifold(H, params.get("manifold") or line(1, name="P"))
    except KeyError as exc:
        raise InvalidParams(f"bad parameters for {name}: {exc}") from exc
    raise UnknownName(name)


def default_instances() -> list[tuple[str, Groupoid]]:
    """Every shipped groupoid, for whole-catalog verification runs."""
    entries: list[tuple[str, Groupoid]] = [
        ("pair(R)", pair_groupoid(line(1, name="R"))),
        ("pair(S1)", pair_groupoid(circle())),
        ("pair(S1xR)", pair_groupoid(Space((Patch(1, 1, "all"),), name="S1xR"))),
        ("SO(2)", so2_group()),
        ("SO(2)⋉R2", so2_action_groupoid()),
        ("SO(2)⋉R2(trivial)", so2_action_groupoid(trivial=True)),
        ("Z2⋉R", reflection_action_morphism().total),
        ("bundle(R,Z2)", group_bundle(line(1, name="R"), "finite", order=2)),
        ("bundle(R,Z3)", group_bundle(line(1, name="R"), "finite", order=3)),
        ("bundle(R,S1)", group_bundle(line(1, name="R"), "circle")),
        ("bundle(R,Z2)*", group_bundle(line(1, name="R"), "finite", order=2,
                                       punctured_at=(0.0,))),
        ("R2-group", plane_to_circle_morphism().total),
        ("S1-group", plane_to_circle_morphism().base_grpd),
        ("pullback(pair(R))", pullback_of_projection(
            pair_groupoid(line(1, name="R")), line(1, name="F")).total),
        ("family(R, bundle(R,Z2))", trivial_family(
            line(1, name="N"), group_bundle(line(1, name="F"), "finite", order=2)).total),
        ("family(R, SO(2)⋉R2)", trivial_family(line(1, name="N"), so2_action_groupoid()).total),
        ("cover union", covering_union_morphism().total),
        ("pair(R)xP", product_with_manifold(pair_groupoid(line(1, name="R")),
                                            line(1, name="P")).total),
        ("pair_fibration", pair_fibration().total),
        ("pair_fibration*", pair_fibration(punctured=True).total),
        ("ker[pair_fibration]", pair_fibration().kernel.groupoid),
        ("unit(R)", unit_groupoid(line(1, name="R"))),
    ]
    return entries
