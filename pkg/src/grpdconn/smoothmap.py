"""Coordinate maps between spaces and their differentiation.

A :class:`SmoothMap` evaluates pointwise and optionally carries an analytic
Jacobian. :func:`jacobian` falls back to central finite differences with
wraparound handling on angle coordinates in both domain and codomain.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import DEFAULT, Config
from .errors import EvaluationOutsideDomain
from .geometry import Point, Space, Tangent, wrap_difference


@dataclass(frozen=True)
class SmoothMap:
    domain: Space
    codomain: Space
    eval: Callable[[Point], Point]
    jac: Optional[Callable[[Point], np.ndarray]] = None
    name: str = ""

    def __call__(self, p: Point) -> Point:
        return self.eval(p)

    def push(self, v: Tangent, image: Point | None = None,
             cfg: Config = DEFAULT) -> Tangent:
        """Pushforward of a tangent vector through the map."""
        J = jacobian(self, v.base, cfg)
        q = image if image is not None else self.eval(v.base)
        return Tangent(q, tuple(J @ np.asarray(v.coeffs)))


def identity_map(space: Space, name: str = "id") -> SmoothMap:
    dim = space.dim

    def jac(p: Point) -> np.ndarray:
        return np.eye(dim)

    return SmoothMap(space, space, lambda p: p, jac, name)


def compose(outer: SmoothMap, inner: SmoothMap, name: str = "") -> SmoothMap:
    jac = None
    if outer.jac is not None and inner.jac is not None:
        def jac(p: Point):
            return outer.jac(inner.eval(p)) @ inner.jac(p)

    return SmoothMap(
        inner.domain,
        outer.codomain,
        lambda p: outer.eval(inner.eval(p)),
        jac,
        name or f"{outer.name}∘{inner.name}",
    )


def fd_jacobian(map_: SmoothMap, p: Point, step: float) -> np.ndarray:
    """Central finite-difference Jacobian with angle wraparound."""
    patch = p.patch
    base = np.asarray(p.coords, dtype=float)
    center_image = map_.eval(p)
    out_patch = center_image.patch
    cols = []
    for i in range(patch.dim):
        plus = base.copy()
        minus = base.copy()
        plus[i] += step
        minus[i] -= step
        try:
            f_plus = map_.eval(Point.raw(p.space, p.patch_index, tuple(plus)))
            f_minus = map_.eval(Point.raw(p.space, p.patch_index, tuple(minus)))
        except EvaluationOutsideDomain as exc:
            raise EvaluationOutsideDomain(
                f"finite-difference probe of {map_.name or 'map'} hit an exclusion"
            ) from exc
        if f_plus.patch_index != center_image.patch_index or (
            f_minus.patch_index != center_image.patch_index
        ):
            raise EvaluationOutsideDomain(
                "finite-difference probe jumped patches; map is not smooth here"
            )
        col = []
        for j in range(out_patch.dim):
            if out_patch.is_circ(j):
                d = wrap_difference(f_plus.coords[j], f_minus.coords[j])
            else:
                d = f_plus.coords[j] - f_minus.coords[j]
            col.append(d / (2.0 * step))
        cols.append(col)
    if not cols:
        return np.zeros((out_patch.dim, 0))
    return np.asarray(cols, dtype=float).T


def jacobian(map_: SmoothMap, p: Point, cfg: Config = DEFAULT) -> np.ndarray:
    """Jacobian matrix of ``map_`` at ``p`` (analytic when supplied)."""
    if map_.jac is not None:
        return np.asarray(map_.jac(p), dtype=float)
    return fd_jacobian(map_, p, cfg.numeric_fd_step)


@dataclass(frozen=True)
class PairMap:
    """A map of two arguments (used for groupoid multiplication).

    ``eval2(g, h)`` returns the image point; ``jac2(g, h)`` returns the pair
    of partial Jacobians (d/dg, d/dh). When ``jac2`` is missing, partials are
    taken by holding the other slot fixed; the evaluation itself is expected
    to snap near-composable inputs, so off-diagonal probes remain valid.
    ``constant_partials`` declares that the partials depend only on the patch
    pair (true for every catalog multiplication); they are then cached.
    """

    left: Space
    right: Space
    codomain: Space
    eval2: Callable[[Point, Point], Point]
    jac2: Optional[Callable[[Point, Point], tuple[np.ndarray, np.ndarray]]] = None
    name: str = ""
    constant_partials: bool = False

    def __call__(self, g: Point, h: Point) -> Point:
        return self.eval2(g, h)

    def partials(self, g: Point, h: Point, cfg: Config = DEFAULT):
        if self.jac2 is not None:
            if self.constant_partials:
                cache = getattr(self, "_partials_cache", None)
                if cache is None:
                    cache = {}
                    object.__setattr__(self, "_partials_cache", cache)
                key = (g.patch_index, h.patch_index)
                hit = cache.get(key)
                if hit is None:
                    A, B = self.jac2(g, h)
                    hit = (np.asarray(A, dtype=float), np.asarray(B, dtype=float))
                    cache[key] = hit
                return hit
            A, B = self.jac2(g, h)
            return np.asarray(A, dtype=float), np.asarray(B, dtype=float)
        left_frozen = SmoothMap(self.left, self.codomain, lambda q: self.eval2(q, h))
        right_frozen = SmoothMap(self.right, self.codomain, lambda q: self.eval2(g, q))
        return (
            fd_jacobian(left_frozen, g, cfg.numeric_fd_step),
            fd_jacobian(right_frozen, h, cfg.numeric_fd_step),
        )
