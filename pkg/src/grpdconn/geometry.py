"""Coordinate model of manifolds: finite disjoint unions of R^a x (S^1)^b patches.

A :class:`Space` is an ordered list of patches. Each patch carries ``lin_count``
real-line coordinates followed by ``circ_count`` angle coordinates (radians,
normalized to [0, 2pi)), plus a finite set of excluded points with exclusion
radii. Zero-dimensional patches model discrete components (finite groups);
their identity is the ``component_label``.

Points and tangent vectors are attached to a patch. All distances are taken
in the flat patch metric, with wraparound on angle coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as _np

from .errors import EvaluationOutsideDomain

_EYE_CACHE: dict[int, "_np.ndarray"] = {}


def cached_eye(n: int):
    """Shared identity matrix; treat as read-only."""
    m = _EYE_CACHE.get(n)
    if m is None:
        m = _np.eye(n)
        m.setflags(write=False)
        _EYE_CACHE[n] = m
    return m

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Reduce an angle to [0, 2pi). Idempotent in floating point."""
    r = theta % TWO_PI
    # x % TWO_PI can round up to TWO_PI itself for tiny negative x.
    if r >= TWO_PI:
        return 0.0
    return r


def angle_gap(a: float, b: float) -> float:
    """Shortest signed-magnitude distance between two angles."""
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def wrap_difference(a: float, b: float) -> float:
    """Signed angle difference a - b reduced to (-pi, pi]."""
    d = (a - b) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


@dataclass(frozen=True)
class Patch:
    """One R^lin x (S^1)^circ component of a Space."""

    lin_count: int
    circ_count: int
    component_label: str = ""
    excluded_points: tuple[tuple[tuple[float, ...], float], ...] = ()

    def __post_init__(self):
        if self.lin_count < 0 or self.circ_count < 0:
            raise ValueError("coordinate counts must be nonnegative")
        normalized = []
        for coords, radius in self.excluded_points:
            if len(coords) != self.dim:
                raise ValueError("excluded point has wrong dimension")
            if radius <= 0:
                raise ValueError("exclusion radius must be positive")
            normalized.append((self._normalize(tuple(float(c) for c in coords)), float(radius)))
        object.__setattr__(self, "excluded_points", tuple(normalized))

    @property
    def dim(self) -> int:
        return self.lin_count + self.circ_count

    def is_circ(self, i: int) -> bool:
        return i >= self.lin_count

    def _normalize(self, coords: tuple[float, ...]) -> tuple[float, ...]:
        return tuple(
            normalize_angle(c) if self.is_circ(i) else c for i, c in enumerate(coords)
        )

    def coord_distance(self, a: tuple[float, ...], b: tuple[float, ...]) -> float:
        acc = 0.0
        for i in range(self.dim):
            d = angle_gap(a[i], b[i]) if self.is_circ(i) else a[i] - b[i]
            acc += d * d
        return math.sqrt(acc)

    def exclusion_violation(self, coords: tuple[float, ...]) -> float | None:
        """Distance shortfall to the nearest excluded ball, or None if clear."""
        for center, radius in self.excluded_points:
            if self.coord_distance(coords, center) < radius:
                return radius - self.coord_distance(coords, center)
        return None


@dataclass(frozen=True)
class Space:
    patches: tuple[Patch, ...]
    name: str = ""

    def __post_init__(self):
        labels = [p.component_label for p in self.patches]
        if len(set(labels)) != len(labels):
            raise ValueError("component labels must be unique")

    @property
    def dim(self) -> int:
        # Patch dimensions may differ across components only via excluded
        # structure; continuous dimension is per-patch.
        return self.patches[0].dim if self.patches else 0

    def patch(self, index: int) -> Patch:
        return self.patches[index]

    def point(self, patch_index: int, coords: tuple[float, ...]) -> "Point":
        return Point.make(self, patch_index, coords)

    def label_index(self, label: str) -> int:
        for i, p in enumerate(self.patches):
            if p.component_label == label:
                return i
        raise KeyError(label)


@dataclass(frozen=True, slots=True)
class Point:
    """A point of a Space: patch index plus patch coordinates."""

    space: Space
    patch_index: int
    coords: tuple[float, ...]

    @classmethod
    def make(cls, space: Space, patch_index: int, coords) -> "Point":
        patch = space.patches[patch_index]
        coords = patch._normalize(tuple(float(c) for c in coords))
        if len(coords) != patch.dim:
            raise ValueError(
                f"expected {patch.dim} coordinates on patch {patch_index}, got {len(coords)}"
            )
        shortfall = patch.exclusion_violation(coords)
        if shortfall is not None:
            raise EvaluationOutsideDomain(
                f"point {coords} lies inside an excluded ball of patch "
                f"{patch.component_label or patch_index}"
            )
        return cls(space, patch_index, coords)

    @classmethod
    def raw(cls, space: Space, patch_index: int, coords) -> "Point":
        """Unchecked constructor for integrator internals (universal cover)."""
        return cls(space, patch_index, tuple(float(c) for c in coords))

    @property
    def patch(self) -> Patch:
        return self.space.patches[self.patch_index]

    def normalized(self) -> "Point":
        return Point(self.space, self.patch_index, self.patch._normalize(self.coords))


def distance(p: Point, q: Point) -> float:
    """Flat patch distance; +inf across distinct patches."""
    if p.space is not q.space and p.space != q.space:
        raise ValueError("points of different spaces")
    if p.patch_index != q.patch_index:
        return math.inf
    return p.patch.coord_distance(p.coords, q.coords)


@dataclass(frozen=True, slots=True)
class Tangent:
    """Tangent vector at a base point, in patch coordinates."""

    base: Point
    coeffs: tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) != len(self.base.coords):
            raise ValueError("tangent coefficient count must match the patch dimension")

    def __add__(self, other: "Tangent") -> "Tangent":
        return Tangent(self.base, tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __rmul__(self, scalar: float) -> "Tangent":
        return Tangent(self.base, tuple(scalar * a for a in self.coeffs))

    @property
    def norm(self) -> float:
        return math.sqrt(sum(a * a for a in self.coeffs))


def tangent(p: Point, coeffs) -> Tangent:
    return Tangent(p, tuple(float(c) for c in coeffs))


def zero_tangent(p: Point) -> Tangent:
    return Tangent(p, (0.0,) * p.patch.dim)


# ---------------------------------------------------------------------------
# products of spaces


@dataclass(frozen=True)
class ProductSpace:
    """Product of two Spaces with coordinate packing (linA, linB, circA, circB).

    Patches are all pairs (patchA, patchB); exclusions of the factors become
    cylinder exclusions only when a factor patch is the full complement, so
    factor exclusions are re-attached per packed patch by embedding the
    excluded coordinates at arbitrary partner values. Since excluded points
    must stay finite sets, a factor exclusion is only representable when the
    partner factor is zero-dimensional; otherwise catalog code models the
    puncture directly on the factor used for sampling and guards.
    """

    left: Space
    right: Space
    space: Space = field(init=False)

    def __post_init__(self):
        patches = []
        for pa in self.left.patches:
            for pb in self.right.patches:
                excl = []
                if pb.dim == 0:
                    for coords, radius in pa.excluded_points:
                        excl.append((coords, radius))
                if pa.dim == 0:
                    for coords, radius in pb.excluded_points:
                        excl.append((coords, radius))
                label = f"{pa.component_label}|{pb.component_label}"
                patches.append(
                    Patch(
                        pa.lin_count + pb.lin_count,
                        pa.circ_count + pb.circ_count,
                        label,
                        tuple(excl),
                    )
                )
        object.__setattr__(
            self,
            "space",
            Space(tuple(patches), name=f"{self.left.name}x{self.right.name}"),
        )

    def _indices(self, packed_index: int) -> tuple[int, int]:
        nb = len(self.right.patches)
        return packed_index // nb, packed_index % nb

    def pack_index(self, ia: int, ib: int) -> int:
        return ia * len(self.right.patches) + ib

    def join(self, a: Point, b: Point) -> Point:
        pa, pb = a.patch, b.patch
        coords = (
            a.coords[: pa.lin_count]
            + b.coords[: pb.lin_count]
            + a.coords[pa.lin_count:]
            + b.coords[pb.lin_count:]
        )
        return Point.raw(self.space, self.pack_index(a.patch_index, b.patch_index), coords)

    def split(self, p: Point) -> tuple[Point, Point]:
        ia, ib = self._indices(p.patch_index)
        pa, pb = self.left.patches[ia], self.right.patches[ib]
        la, lb = pa.lin_count, pb.lin_count
        ca = pa.circ_count
        coords = p.coords
        a = coords[:la] + coords[la + lb: la + lb + ca]
        b = coords[la: la + lb] + coords[la + lb + ca:]
        return Point.raw(self.left, ia, a), Point.raw(self.right, ib, b)

    def join_coeffs(self, p: Point, ca: tuple[float, ...], cb: tuple[float, ...]):
        ia, ib = self._indices(p.patch_index)
        pa, pb = self.left.patches[ia], self.right.patches[ib]
        return ca[: pa.lin_count] + cb[: pb.lin_count] + ca[pa.lin_count:] + cb[pb.lin_count:]

    def split_coeffs(self, p: Point, coeffs: tuple[float, ...]):
        ia, ib = self._indices(p.patch_index)
        pa, pb = self.left.patches[ia], self.right.patches[ib]
        la, lb, ca = pa.lin_count, pb.lin_count, pa.circ_count
        a = coeffs[:la] + coeffs[la + lb: la + lb + ca]
        b = coeffs[la: la + lb] + coeffs[la + lb + ca:]
        return a, b


# convenience space constructors used throughout the catalog

def line(n: int = 1, name: str = "R", excluded=()) -> Space:
    return Space((Patch(n, 0, "", tuple(excluded)),), name=name)


def circle(name: str = "S1") -> Space:
    return Space((Patch(0, 1, ""),), name=name)


def torus_line(lin: int, circ: int, name: str = "") -> Space:
    return Space((Patch(lin, circ, ""),), name=name or f"R{lin}xT{circ}")


def point_space(name: str = "pt") -> Space:
    return Space((Patch(0, 0, ""),), name=name)


def finite(labels, name: str = "") -> Space:
    return Space(tuple(Patch(0, 0, str(l)) for l in labels), name=name or "finite")
