"""Closed-form curves in a space, with closed-form derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .geometry import Point, Space, Tangent


@dataclass(frozen=True)
class BasePath:
    """A curve [0,1] -> space given by closed-form point and velocity maps."""

    space: Space
    point: Callable[[float], Point]
    velocity: Callable[[float], Tangent]
    is_loop: bool = False
    is_unit_path: bool = False
    label: str = ""

    def reversed(self) -> "BasePath":
        # Open-interval style reparametrization t -> 1 - t, derivative negated.
        return BasePath(
            self.space,
            lambda t: self.point(1.0 - t),
            lambda t: -1.0 * self.velocity(1.0 - t),
            is_loop=self.is_loop,
            is_unit_path=self.is_unit_path,
            label=self.label + "~rev",
        )


def constant_path(p: Point, label: str = "const") -> BasePath:
    zero = Tangent(p, (0.0,) * p.patch.dim)
    return BasePath(
        p.space,
        lambda t: p,
        lambda t: zero,
        is_loop=True,
        is_unit_path=True,
        label=label,
    )


def coordinate_path(
    space: Space,
    patch_index: int,
    coords_fn: Callable[[float], tuple],
    deriv_fn: Callable[[float], tuple],
    is_loop: bool = False,
    label: str = "",
) -> BasePath:
    def point(t: float) -> Point:
        return Point.raw(space, patch_index, coords_fn(t))

    def velocity(t: float) -> Tangent:
        return Tangent(point(t), tuple(float(d) for d in deriv_fn(t)))

    return BasePath(space, point, velocity, is_loop=is_loop, label=label)

def subpath(path: BasePath, t0: float, t1: float) -> BasePath:
    """Restriction to [t0, t1] reparametrized over [0, 1] (chain rule)."""
    span = t1 - t0

    def point(t: float) -> Point:
        return path.point(t0 + span * t)

    def velocity(t: float) -> Tangent:
        return span * path.velocity(t0 + span * t)

    return BasePath(path.space, point, velocity, label=f"{path.label}[{t0},{t1}]")
