"""Constructive existence results: canonical lifts and their certificates.

Covers the pullback (Morita) lift, gluing over trivializing atlases, fibre
averaging against normalized invariant quadratures on proper groupoids,
invariant exhaustion functions, the lexicographic level schedule, and the
complete-connection builder whose certificate is interval-verified.

Atlas scope: trivializing charts act on families over a one-dimensional base
whose fibre carries one line coordinate, by fibre shifts x -> x - sigma(y).
That covers every shipped scenario; richer chart classes would need their
own interval extensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .config import DEFAULT, Config
from .errors import (
    AtlasMismatch,
    CertificateFailure,
    NonProjectableInput,
    NotASubmersion,
    NotSourceProper,
    PartitionGap,
    QuadratureMissing,
    SupremumUnbounded,
)
from .geometry import Point, Tangent, distance
from .groupoid import CheckReport, Groupoid, GroupoidMorphism, _Worst, _coords, rng_for
from .connection import Connection, multiplicative_field_report
from .intervals import Interval, fmt_bound
from .smoothmap import jacobian
from .tangent import tm_apply


# ---------------------------------------------------------------------------
# Morita (pullback) connections


def morita_connection(pi: GroupoidMorphism, hor0, cfg: Config = DEFAULT) -> Connection:
    """The unique lift on a pullback projection extending a base lift.

    For arrows (x, h, y) of the pullback groupoid the lift of a base tangent
    ``a`` is (hor0(x, Tt_H a), a, hor0(y, Ts_H a)), assembled in the pullback
    coordinates (h, f_t, f_s).
    """
    if not pi.metadata.get("morita_fibration"):
        raise NotASubmersion(f"{pi.name} is not a pullback projection")
    split3, join3 = pi.metadata["triple"]
    base_prod = pi.metadata["base_product"]
    H = pi.base_grpd

    def hor(g: Point, a: Tangent) -> Tangent:
        h, ft, fs = split3(g)
        Tt = jacobian(H.tgt, h, cfg)
        Ts = jacobian(H.src, h, cfg)
        x = base_prod.join(H.tgt(h), ft)
        y = base_prod.join(H.src(h), fs)
        lift_t = hor0(x, Tangent(H.tgt(h), tuple(Tt @ np.asarray(a.coeffs))))
        lift_s = hor0(y, Tangent(H.src(h), tuple(Ts @ np.asarray(a.coeffs))))
        _, dft = base_prod.split_coeffs(x, lift_t.coeffs)
        _, dfs = base_prod.split_coeffs(y, lift_s.coeffs)
        coeffs = _pullback_coeffs(pi, g, a.coeffs, dft, dfs)
        return Tangent(g, coeffs)

    return Connection(
        morphism=pi,
        hor=hor,
        hor0=hor0,
        metadata={"provenance": "pullback_lift", "claimed_multiplicative": True},
    )


def _pullback_coeffs(pi, g, dh, dft, dfs):
    """Pack (dh, dft, dfs) tangent blocks into pullback arrow coordinates."""
    inner_prod = pi.metadata["arr_prod_inner"]
    outer_prod = pi.metadata["arr_prod"]
    hf, _ = outer_prod.split(g)
    inner = inner_prod.join_coeffs(hf, tuple(dh), tuple(dft))
    return outer_prod.join_coeffs(g, inner, tuple(dfs))


def morita_compare(
    c_formula: Connection, c_other: Connection, n_samples: int, seed: int,
    cfg: Config = DEFAULT,
) -> float:
    """Worst deviation of another lift from the pullback formula at samples."""
    pi = c_formula.morphism
    G, H = pi.total, pi.base_grpd
    worst = 0.0
    for i in range(n_samples):
        rng = rng_for(seed, 73, i)
        g = G.arrow_sampler(rng)
        h = pi.arrow_map(g)
        a = Tangent(h, tuple(rng.uniform(-1, 1, h.patch.dim)))
        u = np.asarray(c_formula.hor(g, a).coeffs)
        v = np.asarray(c_other.hor(g, a).coeffs)
        worst = max(worst, float(np.linalg.norm(u - v)))
    return worst

# ---------------------------------------------------------------------------
# trivializing atlases (fibre-shift charts over a 1-d base)


def smoothstep(u: float) -> float:
    """C^2 ramp: 0 for u <= 0, 1 for u >= 1."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def smoothstep_deriv(u: float) -> float:
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return 30.0 * u * u * (1.0 - u) * (1.0 - u)


@dataclass
class AtlasWindow:
    """One trivializing chart: windows U ⊂⊂ V and a fibre shift sigma."""

    inner: tuple[float, float]               # U^alpha
    outer: tuple[float, float]               # V^alpha (precompact)
    shift: Callable[[float], float]
    shift_deriv: Callable[[float], float]
    shift_interval: Callable[[Interval], Interval]

    def margin(self) -> float:
        return min(self.inner[0] - self.outer[0], self.outer[1] - self.inner[1])

    def inner_interval(self) -> Interval:
        return Interval.of(self.inner[0], self.inner[1])


@dataclass
class TrivializingAtlas:
    """Cover of a family by fibre-shift groupoid trivializations.

    The family must come from the catalog's constant-family construction
    over a 1-d base with a single fibre line coordinate; each chart is the
    groupoid isomorphism (y, x, ...) -> (y, x - sigma(y), ...) over its
    window, which visibly commutes with the fibrewise structure maps.
    """

    family: GroupoidMorphism
    windows: list[AtlasWindow]
    fiber: Groupoid

    def __post_init__(self):
        arr_prod = self.family.metadata.get("arr_product")
        if arr_prod is None or self.family.base_grpd.objects.dim != 1:
            raise AtlasMismatch("atlas requires a catalog constant family over a 1-d base")
        if self.fiber.objects.dim != 1 or self.fiber.objects.patches[0].circ_count:
            raise AtlasMismatch("atlas fibres must carry a single line coordinate")

    def base_coord(self, p: Point) -> float:
        return p.coords[0]

    def fiber_coord(self, p: Point) -> float:
        return p.coords[1]

    def chart_fiber_value(self, alpha: int, y: float, x: float) -> float:
        return x - self.windows[alpha].shift(y)

    def hor_alpha(self, alpha: int, g: Point, w: Tangent) -> Tangent:
        """Chart-flat lift: D(psi^alpha)^{-1}(w, 0)."""
        y = self.base_coord(g)
        dy = w.coeffs[0]
        coeffs = [0.0] * g.patch.dim
        coeffs[0] = dy
        coeffs[1] = self.windows[alpha].shift_deriv(y) * dy
        return Tangent(g, tuple(coeffs))

    def push_through_chart(self, alpha: int, g: Point, v) -> np.ndarray:
        """D(psi^alpha) applied to a tangent at g."""
        v = np.asarray(v.coeffs if isinstance(v, Tangent) else v, dtype=float)
        out = v.copy()
        out[1] = v[1] - self.windows[alpha].shift_deriv(self.base_coord(g)) * v[0]
        return out

    def validate(self, n_samples: int, seed: int, cfg: Config = DEFAULT) -> CheckReport:
        """pr1∘psi = pi, chart multiplicativity, and window margins."""
        worst = _Worst()
        G = self.family.total
        for alpha, win in enumerate(self.windows):
            if win.margin() < cfg.constr_atlas_margin:
                worst.record("window_margin", 1.0, {"window": alpha})
            for i in range(n_samples):
                rng = rng_for(seed, 79, alpha, i)
                y = float(rng.uniform(win.outer[0], win.outer[1]))
                g, h = self._sample_pair_over(y, rng)
                worst.record(
                    "projection_compat",
                    abs(self.base_coord(g) - y),
                    {"window": alpha},
                )
                # psi is a groupoid morphism: the chart of a product is the
                # product of the charts (shifts act only on the shared unit
                # coordinates, so both sides agree exactly)
                gh = G.compose(g, h)
                lhs = self.chart_fiber_value(alpha, y, self.fiber_coord(gh))
                rhs = self.chart_fiber_value(alpha, y, self.fiber_coord(h))
                worst.record("chart_multiplicative", abs(lhs - rhs), {"window": alpha})
        return worst.report("atlas", cfg.groupoid_tol_alg * 10, n_samples, seed)

    def _sample_pair_over(self, y: float, rng):
        G = self.family.total
        obj_prod = self.family.metadata["obj_product"]
        N = self.family.base_grpd.objects
        fib_obj = self.fiber.object_sampler(rng)
        x = obj_prod.join(Point.raw(N, 0, (y,)), fib_obj)
        g = G.sfiber_sampler(x, rng)
        h = G.tfiber_sampler(G.src(g), rng)
        return g, h


def bump_partition(windows: list[AtlasWindow]):
    """Normalized smooth bumps: 1 on each inner window, 0 outside the outer."""

    def raw(alpha: int):
        win = windows[alpha]

        def b(y: float) -> float:
            lo_m = win.inner[0] - win.outer[0]
            hi_m = win.outer[1] - win.inner[1]
            up = smoothstep((y - win.outer[0]) / lo_m) if lo_m > 0 else 1.0
            down = smoothstep((win.outer[1] - y) / hi_m) if hi_m > 0 else 1.0
            return up * down

        return b

    raws = [raw(a) for a in range(len(windows))]

    def chi(alpha: int):
        def f(y: float) -> float:
            total = sum(b(y) for b in raws)
            if total <= 0.0:
                return 0.0
            return raws[alpha](y) / total

        return f

    return [chi(a) for a in range(len(windows))]


def glue_local_trivial(
    family: GroupoidMorphism,
    atlas: TrivializingAtlas,
    partition: list[Callable[[float], float]],
    cfg: Config = DEFAULT,
    n_check: int = 64,
) -> Connection:
    """Glue the chart-flat lifts through a base partition of unity.

    The partition is pulled back through the family projection, which makes
    it invariant automatically; a partition failing to sum to 1 on the base
    (beyond 1e-10) raises PartitionGap.
    """
    if len(partition) != len(atlas.windows):
        raise PartitionGap("one partition function per window is required")
    # the inner windows must cover the working region; the sum is checked there
    lo = min(w.inner[0] for w in atlas.windows)
    hi = max(w.inner[1] for w in atlas.windows)
    for k in range(n_check + 1):
        y = lo + (hi - lo) * k / n_check
        total = sum(chi(y) for chi in partition)
        if abs(total - 1.0) > 1e-10:
            raise PartitionGap(f"partition sums to {total!r} at y = {y!r}")

    def weights(y: float):
        return [chi(y) for chi in partition]

    def hor(g: Point, w: Tangent) -> Tangent:
        y = atlas.base_coord(g)
        coeffs = np.zeros(g.patch.dim)
        for alpha, weight in enumerate(weights(y)):
            if weight:
                coeffs += weight * np.asarray(atlas.hor_alpha(alpha, g, w).coeffs)
        return Tangent(g, tuple(coeffs))

    def hor0(x: Point, w: Tangent) -> Tangent:
        y = atlas.base_coord(x)
        coeffs = [0.0] * x.patch.dim
        coeffs[0] = w.coeffs[0]
        coeffs[1] = sum(
            weight * atlas.windows[alpha].shift_deriv(y)
            for alpha, weight in enumerate(weights(y))
        ) * w.coeffs[0]
        return Tangent(x, tuple(coeffs))

    return Connection(
        morphism=family,
        hor=hor,
        hor0=hor0,
        metadata={"provenance": "glued_local_trivial", "claimed_multiplicative": True,
                  "atlas": atlas},
    )


# ---------------------------------------------------------------------------
# Haar fibre quadratures and averaging


@dataclass
class HaarFiberQuadrature:
    """Normalized nodes/weights on target fibres, from catalog closed forms."""

    node_count: int
    nodes_at: Callable[[Point], tuple[list[Point], list[float]]]

    @classmethod
    def from_groupoid(cls, G: Groupoid, node_count: int) -> "HaarFiberQuadrature":
        maker = G.metadata.get("tfiber_nodes")
        if maker is None:
            raise QuadratureMissing(f"{G.name} supplies no target-fibre nodes")
        if not G.metadata.get("compact_tfibers"):
            raise QuadratureMissing(f"{G.name} has non-compact target fibres")
        return cls(node_count, lambda x: maker(x, node_count))

    def validate(self, G: Groupoid, n_samples: int, seed: int,
                 cfg: Config = DEFAULT) -> CheckReport:
        """Exact normalization plus sampled left-invariance on test functions."""
        worst = _Worst()

        def coord_fn(p: Point, i: int) -> float:
            # angle coordinates only enter through periodic functions
            return math.cos(p.coords[i]) if p.patch.is_circ(i) else p.coords[i]

        test_functions = [
            lambda p: coord_fn(p, 0) if p.coords else 1.0,
            lambda p: math.sin(p.coords[-1]) if (p.coords and p.patch.is_circ(p.patch.dim - 1))
            else (p.coords[-1] if p.coords else 1.0),
            lambda p: sum(coord_fn(p, i) ** 2 if not p.patch.is_circ(i) else coord_fn(p, i)
                          for i in range(p.patch.dim)),
        ]
        for i in range(n_samples):
            rng = rng_for(seed, 83, i)
            g = G.arrow_sampler(rng)
            nodes_s, w_s = self.nodes_at(G.src(g))
            nodes_t, w_t = self.nodes_at(G.tgt(g))
            worst.record("normalization", abs(sum(w_s) - 1.0), {"g": _coords(g)})
            for fi, f in enumerate(test_functions):
                left = sum(w * f(G.compose(g, h)) for h, w in zip(nodes_s, w_s))
                right = sum(w * f(h) for h, w in zip(nodes_t, w_t))
                worst.record(f"left_invariance[{fi}]", abs(left - right), {"g": _coords(g)})
        return worst.report("haar_quadrature", cfg.constr_quad_tol * 10, n_samples, seed)


def s_projectability_residual(G: Groupoid, X, n_samples: int, seed: int,
                              cfg: Config = DEFAULT) -> float:
    worst = 0.0
    for i in range(n_samples):
        rng = rng_for(seed, 89, i)
        x = G.object_sampler(rng)
        g1 = G.sfiber_sampler(x, rng)
        g2 = G.sfiber_sampler(x, rng)
        v1 = jacobian(G.src, g1, cfg) @ np.asarray(X(g1).coeffs)
        v2 = jacobian(G.src, g2, cfg) @ np.asarray(X(g2).coeffs)
        worst = max(worst, float(np.linalg.norm(v1 - v2)))
    return worst


def haar_average(
    G: Groupoid,
    quad: HaarFiberQuadrature,
    X: Callable[[Point], Tangent],
    n_samples: int = 50,
    seed: int = 0,
    cfg: Config = DEFAULT,
    check: bool = True,
):
    """Average an s-projectable field into a multiplicative one.

    X_hat(g) = sum_j w_j Tm(X_{g h_j}, Ti(X_{h_j})) over nodes h_j in the
    target fibre of s(g). Returns (X_hat, report); the report runs the
    multiplicative-field identities at samples.
    """
    if check:
        resid = s_projectability_residual(G, X, max(8, n_samples // 4), seed, cfg)
        if resid > cfg.groupoid_tol_alg * 100:
            raise NonProjectableInput(
                f"input field is not source-projectable (residual {resid:.3e})"
            )

    cache: dict = {}

    def X_hat(g: Point) -> Tangent:
        key = (g.patch_index, g.coords)
        hit = cache.get(key)
        if hit is not None:
            return hit
        nodes, weights = quad.nodes_at(G.src(g))
        acc = np.zeros(g.patch.dim)
        for h, w in zip(nodes, weights):
            gh = G.compose(g, h)
            Ti = jacobian(G.inv, h, cfg)
            v = tm_apply(G, gh, G.inv(h), X(gh), Ti @ np.asarray(X(h).coeffs), cfg)
            acc += w * v
        out = Tangent(g, tuple(acc))
        cache[key] = out
        return out

    def V(x: Point) -> Tangent:
        ux = G.unit(x)
        Ts = jacobian(G.src, ux, cfg)
        return Tangent(x, tuple(Ts @ np.asarray(X_hat(ux).coeffs)))

    report = None
    if check:
        report = multiplicative_field_report(
            G, X_hat, V, n_samples, seed, cfg, name="haar_average"
        )
    return X_hat, report


def proper_family_connection(
    family: GroupoidMorphism,
    hor0,
    hor_s,
    quad: HaarFiberQuadrature,
    n_samples: int = 40,
    seed: int = 0,
    cfg: Config = DEFAULT,
) -> Connection:
    """Average the composite lift hor_s∘hor0 into a multiplicative connection.

    Each base coordinate field is lifted through hor_s∘hor0 (giving an
    s-projectable field) and averaged; the connection assembles the averaged
    basis fields by linearity, and its base lift reads off the averaged
    fields along the unit section.
    """
    G = family.total
    N = family.base_grpd.objects
    dim_N = N.dim
    averaged = []
    for j in range(dim_N):
        e = [0.0] * dim_N
        e[j] = 1.0

        def X_tilde(g: Point, e=tuple(e)) -> Tangent:
            y = family.arrow_map(g)
            x = G.src(g)
            w = hor0(x, Tangent(y, e))
            return hor_s(g, w)

        X_hat, _ = haar_average(G, quad, X_tilde, n_samples, seed, cfg, check=(j == 0))
        averaged.append(X_hat)

    def hor(g: Point, a: Tangent) -> Tangent:
        acc = np.zeros(g.patch.dim)
        for j, X_hat in enumerate(averaged):
            if a.coeffs[j]:
                acc += a.coeffs[j] * np.asarray(X_hat(g).coeffs)
        return Tangent(g, tuple(acc))

    def hor0_out(x: Point, w: Tangent) -> Tangent:
        ux = G.unit(x)
        Ts = jacobian(G.src, ux, cfg)
        acc = np.zeros(x.patch.dim)
        for j, X_hat in enumerate(averaged):
            if w.coeffs[j]:
                acc += w.coeffs[j] * (Ts @ np.asarray(X_hat(ux).coeffs))
        return Tangent(x, tuple(acc))

    return Connection(
        morphism=family,
        hor=hor,
        hor0=hor0_out,
        metadata={"provenance": "proper_family_average", "claimed_multiplicative": True},
    )

# ---------------------------------------------------------------------------
# invariant exhaustion functions


@dataclass
class ExhaustionProfile:
    """Closed-form invariant exhaustion with rigorous level-set enclosures."""

    name: str
    value: Callable[[Point], float]
    interval_value: Callable[[Interval], Interval]
    preimage_points: Callable[[int], list[float]]
    preimage_enclosures: Callable[[int], list[Interval]]
    compact_fiber: bool = False


def hyperbolic_profile() -> ExhaustionProfile:
    """f(x) = sqrt(x^2 + 1) on a line fibre coordinate."""

    def preimage_points(level: int) -> list[float]:
        if level < 1:
            return []
        r = math.sqrt(level * level - 1.0)
        return [-r, r] if r > 0 else [0.0]

    def preimage_enclosures(level: int) -> list[Interval]:
        if level < 1:
            return []
        sq = Interval.point(float(level)).sq() - 1.0
        r_iv = Interval.of(max(0.0, sq.lo), max(0.0, sq.hi)).sqrt()
        if level == 1:
            return [Interval.of(-r_iv.hi, r_iv.hi)]
        return [Interval.of(-r_iv.hi, -r_iv.lo), r_iv]

    return ExhaustionProfile(
        name="sqrt(x^2+1)",
        value=lambda p: math.sqrt(p.coords[0] ** 2 + 1.0),
        interval_value=lambda iv: (iv.sq() + 1.0).sqrt(),
        preimage_points=preimage_points,
        preimage_enclosures=preimage_enclosures,
    )


def constant_profile(c: float = 1.0) -> ExhaustionProfile:
    """Admissible on compact fibres; every level machinery degenerates."""
    return ExhaustionProfile(
        name=f"const({c})",
        value=lambda p: c,
        interval_value=lambda iv: Interval.point(c),
        preimage_points=lambda level: [],
        preimage_enclosures=lambda level: [],
        compact_fiber=True,
    )


def invariant_exhaustion(
    fiber: Groupoid, n_samples: int = 64, seed: int = 0, cfg: Config = DEFAULT
) -> tuple[ExhaustionProfile, CheckReport]:
    """The catalog's invariant exhaustion for a source-proper fibre groupoid.

    Checks invariance s*f = t*f at samples and, on non-compact fibres, the
    desk-scale properness surrogate of monotone growth along rays.
    """
    source_proper = fiber.metadata.get(
        "source_proper", fiber.metadata.get("compact_tfibers", False)
    )
    if not source_proper:
        raise NotSourceProper(f"{fiber.name} is not flagged source-proper")
    profile = fiber.metadata.get("exhaustion")
    if profile is None:
        F = fiber.objects
        compact = F.patches[0].lin_count == 0
        profile = constant_profile() if compact else hyperbolic_profile()

    worst = _Worst()
    for i in range(n_samples):
        rng = rng_for(seed, 97, i)
        g = fiber.arrow_sampler(rng)
        worst.record(
            "invariance",
            abs(profile.value(fiber.src(g)) - profile.value(fiber.tgt(g))),
            {"g": _coords(g)},
        )
    if not profile.compact_fiber:
        F = fiber.objects
        rs = [0.25 * k for k in range(1, 17)]
        for direction in (-1.0, 1.0):
            values = [
                profile.value(Point.raw(F, 0, (direction * r,) + (0.0,) * (F.dim - 1)))
                for r in rs
            ]
            drops = max(
                (values[k] - values[k + 1] for k in range(len(values) - 1)), default=0.0
            )
            worst.record("ray_monotone", max(0.0, drops), {"direction": direction})
            if values[-1] <= values[0]:
                worst.record("ray_growth", 1.0, {"direction": direction})
    report = worst.report("invariant_exhaustion", cfg.groupoid_tol_alg * 10, n_samples, seed)
    return profile, report


# ---------------------------------------------------------------------------
# lexicographic level schedules


@dataclass
class LevelSchedule:
    levels: dict[tuple[int, int], int]          # (i, alpha) -> integer level
    per_window: list[list[int]]
    slab_enclosures: dict[tuple[int, int], list[Interval]]  # global fibre coord
    disjoint_verified: bool
    truncation_depth: int
    notes: list[str] = field(default_factory=list)

    def window_levels(self, alpha: int) -> list[int]:
        return self.per_window[alpha]


def _window_overlap(a: AtlasWindow, b: AtlasWindow) -> Optional[Interval]:
    lo = max(a.inner[0], b.inner[0])
    hi = min(a.inner[1], b.inner[1])
    if lo > hi:
        return None
    return Interval.of(lo, hi)


def level_schedule(
    atlas: TrivializingAtlas,
    profile: ExhaustionProfile,
    truncation_depth: int = 3,
    cfg: Config = DEFAULT,
) -> LevelSchedule:
    """Integer levels n(i, alpha) built by lexicographic induction.

    Each new level strictly dominates the rigorous interval bound of the
    exhaustion over every earlier slab that meets the window, so the closed
    slabs Z^{i,alpha} are pairwise disjoint; disjointness is then re-verified
    by interval arithmetic (over-approximating the transition dependence,
    which is sound for the certificate).
    """
    windows = atlas.windows
    order = [(i, a) for i in range(truncation_depth) for a in range(len(windows))]
    levels: dict[tuple[int, int], int] = {}
    enclosures: dict[tuple[int, int], list[Interval]] = {}
    notes = []

    for (i, alpha) in order:
        bound = levels.get((i - 1, alpha), -1)
        win = windows[alpha]
        for (j, beta), n_jb in levels.items():
            if (j, beta) >= (i, alpha):
                continue
            overlap = _window_overlap(win, windows[beta])
            if overlap is None:
                continue
            shift_diff = windows[beta].shift_interval(overlap) - win.shift_interval(overlap)
            for branch in profile.preimage_enclosures(n_jb):
                value = profile.interval_value(branch + shift_diff)
                if math.isinf(value.hi):
                    raise SupremumUnbounded(
                        f"window {alpha} sees an unbounded slab bound from ({j},{beta})"
                    )
                bound = max(bound, int(math.floor(value.hi)))
        levels[(i, alpha)] = bound + 1

    per_window = [
        [levels[(i, a)] for i in range(truncation_depth)] for a in range(len(windows))
    ]
    for (i, alpha), n in levels.items():
        shifted = []
        y_iv = windows[alpha].inner_interval()
        sigma = windows[alpha].shift_interval(y_iv)
        for branch in profile.preimage_enclosures(n):
            shifted.append(branch + sigma)
        enclosures[(i, alpha)] = shifted

    disjoint = True
    keys = sorted(levels.keys())
    for a_idx in range(len(keys)):
        for b_idx in range(a_idx + 1, len(keys)):
            (i, alpha), (j, beta) = keys[a_idx], keys[b_idx]
            if alpha == beta:
                for ba in profile.preimage_enclosures(levels[(i, alpha)]):
                    for bb in profile.preimage_enclosures(levels[(j, beta)]):
                        if ba.intersects(bb):
                            disjoint = False
                            notes.append(f"branches of ({i},{alpha}) and ({j},{beta}) overlap")
                continue
            overlap = _window_overlap(windows[alpha], windows[beta])
            if overlap is None:
                continue
            diff = windows[alpha].shift_interval(overlap) - windows[beta].shift_interval(overlap)
            for ba in profile.preimage_enclosures(levels[(i, alpha)]):
                for bb in profile.preimage_enclosures(levels[(j, beta)]):
                    if (ba - bb + diff).contains(0.0):
                        disjoint = False
                        notes.append(
                            f"slabs ({i},{alpha}) and ({j},{beta}) cannot be separated"
                        )

    return LevelSchedule(
        levels=levels,
        per_window=per_window,
        slab_enclosures=enclosures,
        disjoint_verified=disjoint,
        truncation_depth=truncation_depth,
        notes=notes,
    )

def verify_slab_disjointness(
    windows: list[AtlasWindow],
    profile: ExhaustionProfile,
    levels: dict[tuple[int, int], int],
) -> tuple[bool, float, list[str]]:
    """Interval re-verification of pairwise slab disjointness.

    Returns (disjoint, gap lower bound in the global fibre coordinate, notes).
    """
    notes: list[str] = []
    disjoint = True
    gap = math.inf
    keys = sorted(levels.keys())
    for a_idx in range(len(keys)):
        i, alpha = keys[a_idx]
        branches_a = profile.preimage_enclosures(levels[(i, alpha)])
        # the two ± branches of one slab must themselves be separated
        for u in range(len(branches_a)):
            for v in range(u + 1, len(branches_a)):
                d = _interval_separation(branches_a[u], branches_a[v])
                if d <= 0:
                    disjoint = False
                    notes.append(f"slab ({i},{alpha}) branches touch")
                else:
                    gap = min(gap, d)
        for b_idx in range(a_idx + 1, len(keys)):
            j, beta = keys[b_idx]
            branches_b = profile.preimage_enclosures(levels[(j, beta)])
            if alpha == beta:
                for ba in branches_a:
                    for bb in branches_b:
                        d = _interval_separation(ba, bb)
                        if d <= 0:
                            disjoint = False
                            notes.append(f"slabs ({i},{alpha})/({j},{beta}) overlap")
                        else:
                            gap = min(gap, d)
                continue
            overlap = _window_overlap(windows[alpha], windows[beta])
            if overlap is None:
                continue
            diff = windows[alpha].shift_interval(overlap) - windows[beta].shift_interval(overlap)
            for ba in branches_a:
                for bb in branches_b:
                    D = ba - bb + diff
                    if D.contains(0.0):
                        disjoint = False
                        notes.append(f"slabs ({i},{alpha})/({j},{beta}) may intersect")
                    else:
                        gap = min(gap, max(D.lo, -D.hi))
    return disjoint, (0.0 if math.isinf(gap) else gap), notes


def _interval_separation(a: Interval, b: Interval) -> float:
    if a.intersects(b):
        return 0.0
    return max(b.lo - a.hi, a.lo - b.hi)


# ---------------------------------------------------------------------------
# complete-connection builder


@dataclass
class WindowCertificate:
    window: int
    levels: list[int]
    flatness_residual: float
    flatness_samples: int
    precompact_bound: dict
    precompact_verified: bool


@dataclass
class CompletenessCertificate:
    verdict: str                       # "CertifiedComplete"
    fiber_box: float
    slab_gap: float
    windows: list[WindowCertificate]
    partition_sum_residual: float
    invariance_residual: float
    notes: list[str] = field(default_factory=list)


def complete_connection_builder(
    family: GroupoidMorphism,
    atlas: TrivializingAtlas,
    schedule: LevelSchedule,
    profile: ExhaustionProfile,
    cfg: Config = DEFAULT,
    n_cert_samples: int = 24,
    seed: int = 0,
) -> tuple[Connection, CompletenessCertificate]:
    """Glue chart lifts through a slab-avoiding invariant partition and certify.

    The partition weight of window alpha vanishes identically on every slab
    of every other window, so the glued lift agrees exactly with the chart
    lift on each slab (flatness clause). The precompactness clause bounds,
    by interval arithmetic, every complement component meeting the
    configured fibre box by a scheduled level radius. Any failed clause
    raises CertificateFailure naming the clause.
    """
    windows = atlas.windows
    disjoint, gap, notes = verify_slab_disjointness(windows, profile, schedule.levels)
    if not disjoint:
        raise CertificateFailure("slab_disjointness: " + "; ".join(notes[:3]))
    if gap <= 0.0:
        raise CertificateFailure("slab_disjointness: zero separation")
    margin = min(gap / 3.0, 0.25)

    slab_data = [
        (alpha, windows[alpha], profile.preimage_points(n))
        for (i, alpha), n in sorted(schedule.levels.items())
    ]

    def window_distance(y: float, win: AtlasWindow) -> float:
        return max(0.0, win.inner[0] - y, y - win.inner[1])

    def hole_factor(beta_excluded: int, y: float, x: float) -> float:
        prod = 1.0
        for alpha, win, branches in slab_data:
            if alpha == beta_excluded:
                continue
            dy = window_distance(y, win)
            sigma = win.shift(y)
            for b in branches:
                d = math.hypot(dy, x - sigma - b)
                prod *= smoothstep(d / margin)
                if prod == 0.0:
                    return 0.0
        return prod

    raw_bumps = []
    for win in windows:
        lo_m = win.inner[0] - win.outer[0]
        hi_m = win.outer[1] - win.inner[1]

        def b(y: float, win=win, lo_m=lo_m, hi_m=hi_m) -> float:
            up = smoothstep((y - win.outer[0]) / lo_m) if lo_m > 0 else 1.0
            down = smoothstep((win.outer[1] - y) / hi_m) if hi_m > 0 else 1.0
            return up * down

        raw_bumps.append(b)

    def weights_at(y: float, x: float) -> list[float]:
        rho = [raw_bumps[a](y) * hole_factor(a, y, x) for a in range(len(windows))]
        total = sum(rho)
        if total <= 0.0:
            raise CertificateFailure(
                f"partition_cover: no window weight at (y, x) = ({y!r}, {x!r})"
            )
        return [r / total for r in rho]

    def hor(g: Point, w: Tangent) -> Tangent:
        y, x = g.coords[0], g.coords[1]
        dy = w.coeffs[0]
        slope = 0.0
        for alpha, weight in enumerate(weights_at(y, x)):
            if weight:
                slope += weight * windows[alpha].shift_deriv(y)
        coeffs = [0.0] * g.patch.dim
        coeffs[0] = dy
        coeffs[1] = slope * dy
        return Tangent(g, tuple(coeffs))

    connection = Connection(
        morphism=family,
        hor=hor,
        hor0=hor,  # objects and arrows share the (y, x) leading coordinates
        metadata={"provenance": "complete_builder", "claimed_multiplicative": True,
                  "atlas": atlas, "schedule": schedule},
    )

    # --- certificate clauses -------------------------------------------------
    box = cfg.constr_box
    G = family.total
    window_certs = []
    partition_residual = 0.0
    invariance_residual = 0.0
    for alpha, win in enumerate(windows):
        flat_worst = 0.0
        count = 0
        for n in schedule.window_levels(alpha):
            for b in profile.preimage_points(n):
                for k in range(n_cert_samples):
                    y = win.inner[0] + (win.inner[1] - win.inner[0]) * (
                        (k + 0.5) / n_cert_samples
                    )
                    x = win.shift(y) + b
                    for patch_index in range(len(G.arrows.patches)):
                        g = Point.raw(G.arrows, patch_index, _embed_yx(G.arrows, patch_index, y, x))
                        w = Tangent(family.arrow_map(g), (1.0,))
                        got = np.asarray(hor(g, w).coeffs)
                        want = np.asarray(atlas.hor_alpha(alpha, g, w).coeffs)
                        flat_worst = max(flat_worst, float(np.max(np.abs(got - want))))
                        count += 1
        if flat_worst >= 1e-9:
            raise CertificateFailure(
                f"flatness: window {alpha} deviates {flat_worst:.3e} on its slabs"
            )
        max_radius = Interval.point(0.0)
        for n in schedule.window_levels(alpha):
            for enc in profile.preimage_enclosures(n):
                r = enc.abs()
                if r.lo > max_radius.lo:
                    max_radius = r
        verified = profile.compact_fiber or max_radius.lo > box
        if not verified:
            raise CertificateFailure(
                f"precompactness: window {alpha} has no scheduled level beyond the fibre box"
            )
        window_certs.append(
            WindowCertificate(
                window=alpha,
                levels=schedule.window_levels(alpha),
                flatness_residual=flat_worst,
                flatness_samples=count,
                precompact_bound=fmt_bound(max_radius),
                precompact_verified=verified,
            )
        )

    for k in range(64):
        rng = rng_for(seed, 101, k)
        y = float(rng.uniform(min(w.outer[0] for w in windows) + 0.01,
                              max(w.outer[1] for w in windows) - 0.01))
        x = float(rng.uniform(-box, box))
        partition_residual = max(
            partition_residual, abs(sum(weights_at(y, x)) - 1.0)
        )
        g = G.arrow_sampler(rng)
        s_val = weights_at(G.src(g).coords[0], G.src(g).coords[1])
        t_val = weights_at(G.tgt(g).coords[0], G.tgt(g).coords[1])
        invariance_residual = max(
            invariance_residual,
            max(abs(a - b) for a, b in zip(s_val, t_val)),
        )
    if partition_residual > 1e-10:
        raise CertificateFailure(f"partition_sum: residual {partition_residual:.3e}")
    if invariance_residual > cfg.groupoid_tol_alg * 10:
        raise CertificateFailure(f"partition_invariance: residual {invariance_residual:.3e}")

    certificate = CompletenessCertificate(
        verdict="CertifiedComplete",
        fiber_box=box,
        slab_gap=gap,
        windows=window_certs,
        partition_sum_residual=partition_residual,
        invariance_residual=invariance_residual,
        notes=[
            "flatness and precompactness certified relative to the configured fibre box",
        ],
    )
    return connection, certificate


def _embed_yx(space, patch_index: int, y: float, x: float):
    dim = space.patches[patch_index].dim
    coords = [0.0] * dim
    coords[0] = y
    coords[1] = x
    return tuple(coords)


# ---------------------------------------------------------------------------
# independent flatness/precompactness re-check


@dataclass
class FlatnessVerdict:
    verdict: str                        # "CertifiedComplete" | "NotCertified"
    worst_fiber_residual: float
    worst_base_residual: float
    precompact_bounds: list[dict]
    failed_clauses: list[str]
    n_samples: int
    seed: int


def flatness_certificate_check(
    c: Connection,
    atlas: TrivializingAtlas,
    level_values: list[list[int]],
    profile: ExhaustionProfile,
    n_samples: int,
    seed: int,
    cfg: Config = DEFAULT,
) -> FlatnessVerdict:
    """Re-derive the completeness certificate for an arbitrary connection.

    Samples U^alpha x S^alpha, pushes the lift through the chart derivative,
    and demands the chart-flat form (base part the identity, fibre part zero
    within 1e-8); precompactness of complement components meeting the fibre
    box is re-verified from the level enclosures.
    """
    if c.total.arrows is not atlas.family.total.arrows:
        raise AtlasMismatch("connection and atlas live on different families")
    G = c.total
    worst_fiber = 0.0
    worst_base = 0.0
    failed = []
    bounds = []
    box = cfg.constr_box
    for alpha, win in enumerate(atlas.windows):
        for n in level_values[alpha]:
            for b in profile.preimage_points(n):
                for k in range(n_samples):
                    rng = rng_for(seed, 103, alpha, n, k)
                    y = float(rng.uniform(win.inner[0], win.inner[1]))
                    x = win.shift(y) + b
                    for patch_index in range(len(G.arrows.patches)):
                        g = Point.raw(G.arrows, patch_index,
                                      _embed_yx(G.arrows, patch_index, y, x))
                        w = Tangent(c.morphism.arrow_map(g), (1.0,))
                        pushed = atlas.push_through_chart(alpha, g, c.hor(g, w))
                        worst_base = max(worst_base, abs(pushed[0] - 1.0))
                        worst_fiber = max(worst_fiber, float(np.max(np.abs(pushed[1:]))))
        max_radius = Interval.point(0.0)
        for n in level_values[alpha]:
            for enc in profile.preimage_enclosures(n):
                r = enc.abs()
                if r.lo > max_radius.lo:
                    max_radius = r
        bounds.append(fmt_bound(max_radius))
        if not (profile.compact_fiber or max_radius.lo > box):
            failed.append(f"precompactness[window {alpha}]")
    if worst_fiber >= 1e-8 or worst_base >= 1e-8:
        failed.append("chart_flat_form")
    verdict = "CertifiedComplete" if not failed else "NotCertified"
    return FlatnessVerdict(
        verdict=verdict,
        worst_fiber_residual=worst_fiber,
        worst_base_residual=worst_base,
        precompact_bounds=bounds,
        failed_clauses=failed,
        n_samples=n_samples,
        seed=seed,
    )
