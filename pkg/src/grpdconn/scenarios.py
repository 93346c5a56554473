"""Named scenario registry, report documents, and serialization.

Each scenario binds a construction recipe to an ordered list of checks with
expected verdicts; the registry doubles as the regression corpus. Reports
serialize deterministically: identical (scenario, seed, config) produce
byte-identical JSON (timings appear only in the text rendering).
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import catalog as cat
from .config import DEFAULT, Config
from .connection import (
    Connection,
    MULTIPLICATIVE,
    NOT_MULTIPLICATIVE,
    Rejection,
    action_connection,
    complement_check,
    kernel_connection,
    multiplicativity_check_pointwise,
    product_clause_residual,
)
from .constructions import (
    AtlasWindow,
    HaarFiberQuadrature,
    TrivializingAtlas,
    complete_connection_builder,
    flatness_certificate_check,
    haar_average,
    invariant_exhaustion,
    level_schedule,
    morita_compare,
    morita_connection,
    proper_family_connection,
)
from .errors import CertificateFailure, UnknownScenario
from .geometry import Point, ProductSpace, Space, Tangent, distance, line
from .groupoid import GroupoidMorphism, fibration_probe, rng_for
from .paths import BasePath, coordinate_path
from .tangent import VBFiberData, splitting_correspondence
from .transport import (
    completeness_probe,
    parallel_transport,
    theorem_crosscheck_kernel,
    transport_multiplicativity_check,
)

SCHEMA_VERSION = "grpdconn-report-1"


# ---------------------------------------------------------------------------
# report documents


def _fmt(value):
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, str)) or value is None:
        return value
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, np.floating):
        return f"{float(value):.17g}"
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, dict):
        return {str(k): _fmt(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_fmt(v) for v in value]
    return str(value)


@dataclass
class CheckResult:
    name: str
    verdict: str
    expected: str
    matched: bool
    worst_residual: Optional[float] = None
    witness: Optional[dict] = None
    n_samples: int = 0
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def to_json_obj(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "expected": self.expected,
            "matched": self.matched,
            "worst_residual": _fmt(self.worst_residual),
            "witness": _fmt(self.witness),
            "n_samples": self.n_samples,
            "details": _fmt(self.details),
        }


@dataclass
class ReportDocument:
    scenario: str
    description: str
    note: str
    seed: int
    config_snapshot: dict
    checks: list[CheckResult]
    overall_pass: bool

    def to_json_obj(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario,
            "description": self.description,
            "note": self.note,
            "seed": self.seed,
            "config": self.config_snapshot,
            "checks": [c.to_json_obj() for c in self.checks],
            "overall_pass": self.overall_pass,
        }


def emit_report(doc: ReportDocument, format: str = "json") -> str:
    """Serialize a report; json output is deterministic byte-for-byte."""
    if format == "json":
        return json.dumps(doc.to_json_obj(), indent=2, ensure_ascii=False) + "\n"
    if format == "text":
        lines = [
            f"scenario {doc.scenario} (seed {doc.seed}): "
            + ("PASS" if doc.overall_pass else "FAIL"),
            f"  {doc.description}",
        ]
        for c in doc.checks:
            status = "ok " if c.matched else "FAIL"
            resid = "" if c.worst_residual is None else f" residual={c.worst_residual:.3e}"
            lines.append(
                f"  [{status}] {c.name}: {c.verdict} (expected {c.expected})"
                f"{resid} [{c.wall_time:.2f}s]"
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")


# ---------------------------------------------------------------------------
# scenario plumbing


@dataclass
class Scenario:
    name: str
    description: str
    note: str
    run: Callable[[int, Config, float], list[CheckResult]]
    connection_factory: Optional[Callable[[Config], tuple[Connection, dict]]] = None


def _check(name, verdict, expected, residual=None, witness=None, n=0,
           details=None) -> CheckResult:
    verdict = str(verdict)
    matched = verdict == expected
    return CheckResult(
        name=name,
        verdict=verdict,
        expected=expected,
        matched=matched,
        worst_residual=residual,
        witness=witness,
        n_samples=n,
        details=details or {},
    )


def _scale(n: int, budget_scale: float) -> int:
    return max(1, int(round(n * budget_scale)))


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0

# ---------------------------------------------------------------------------
# shared scenario setups (also used by the acceptance suite)



def _escape_rate(u: float) -> float:
    """exp(-u) clamped to the float range; escaping lifts only grow."""
    return math.exp(min(-u, 700.0))

def luca_setup(cfg: Config = DEFAULT):
    """Plane-over-circle group morphism with the skewed quadratic lift."""
    pi = cat.plane_to_circle_morphism()

    def hor(g: Point, a: Tangent) -> Tangent:
        x = g.coords[0]
        return Tangent(g, (a.coeffs[0], x * x * a.coeffs[0]))

    def hor0(x: Point, w: Tangent) -> Tangent:
        return Tangent(x, ())

    c = Connection(pi, hor, hor0, {"provenance": "skewed_square_lift",
                                   "claimed_multiplicative": False})
    return c, {}


def punctured_bundle_setup(order: int = 2, cfg: Config = DEFAULT):
    """Punctured finite-group bundle as a family over its base line."""
    bundle = cat.group_bundle(line(1, name="R"), "finite", order=order,
                              punctured_at=(0.0,))
    pi = cat.bundle_family_morphism(bundle)

    def hor(g: Point, w: Tangent) -> Tangent:
        return Tangent(g, tuple(w.coeffs))

    def hor0(x: Point, w: Tangent) -> Tangent:
        return Tangent(x, tuple(w.coeffs))

    c = Connection(pi, hor, hor0, {"provenance": "local_diffeo_unique",
                                   "claimed_multiplicative": True,
                                   "incomplete": True})
    return c, {"bundle": bundle}


def cover_setup(order: int = 2, cfg: Config = DEFAULT):
    """Disjoint-union covering morphism with its unique (identity) lift."""
    pi = cat.covering_union_morphism(order=order)

    def hor(g: Point, w: Tangent) -> Tangent:
        return Tangent(g, tuple(w.coeffs))

    c = Connection(pi, hor, hor, {"provenance": "local_diffeo_unique",
                                  "claimed_multiplicative": True,
                                  "incomplete": True})
    return c, {}


def _exp_base_lift(base_prod: ProductSpace, kappa: float):
    """hor0 on pr1: N x F -> N with fibre rate kappa: closed-form transports
    x(t) = x(0) * exp(kappa * (delta(t) - delta(0)))."""

    def hor0(x: Point, w: Tangent) -> Tangent:
        n_pt, f_pt = base_prod.split(x)
        dn = w.coeffs
        df = tuple(kappa * f * dn[0] for f in f_pt.coords)
        return Tangent(x, base_prod.join_coeffs(x, dn, df))

    return hor0


def morita_setup(cfg: Config = DEFAULT, kappa: float = 0.4):
    """Pullback of the line pair groupoid along pr1: R x F -> R."""
    H = cat.pair_groupoid(line(1, name="Rbase"))
    pi = cat.pullback_of_projection(H, line(1, name="F"), name="morita_pullback")
    base_prod = pi.metadata["base_product"]
    hor0 = _exp_base_lift(base_prod, kappa)
    c = morita_connection(pi, hor0, cfg)
    _attach_morita_transport(pi, punctured=False)
    return c, {"kappa": kappa, "H": H, "base_prod": base_prod}


def morita_punctured_setup(cfg: Config = DEFAULT):
    """Same pullback with the fibre punctured at 0 (log charts) and a
    fibre-translation base lift that escapes through the deleted point."""
    from .geometry import Patch

    H = cat.pair_groupoid(line(1, name="Rbase"))
    F = Space((Patch(1, 0, "pos"), Patch(1, 0, "neg")), name="F*")
    pi = cat.pullback_of_projection(H, F, name="morita_pullback_punctured")
    base_prod = pi.metadata["base_product"]

    def hor0(x: Point, w: Tangent) -> Tangent:
        n_pt, f_pt = base_prod.split(x)
        u = f_pt.coords[0]
        sign = 1.0 if f_pt.patch_index == 0 else -1.0
        rate = -sign * _escape_rate(u) * w.coeffs[0]
        return Tangent(x, base_prod.join_coeffs(x, w.coeffs, (rate,)))

    c = morita_connection(pi, hor0, cfg)
    _attach_morita_transport(pi, punctured=True)
    return c, {"base_prod": base_prod}


def _attach_morita_transport(pi: GroupoidMorphism, punctured: bool):
    """Closed-form path samplers for pullbacks of the line pair groupoid."""
    H = pi.base_grpd
    prodH: ProductSpace = H.metadata["product_space"]
    split3, join3 = pi.metadata["triple"]
    F = pi.metadata["arr_prod_inner"].right

    def scalar_curve(rng):
        a = float(rng.uniform(-1.5, 1.5))
        b = float(rng.uniform(-1.0, 1.0))
        A = float(rng.uniform(0.0, 0.5))
        ph = float(rng.uniform(0.0, 2 * math.pi))
        f = lambda t: a + b * t + A * (math.sin(2 * math.pi * t + ph) - math.sin(ph))
        df = lambda t: b + A * 2 * math.pi * math.cos(2 * math.pi * t + ph)
        return f, df

    def fiber_point(rng):
        idx = int(rng.integers(len(F.patches)))
        span = (-1.0, 1.0) if punctured else (-2.0, 2.0)
        return Point.raw(F, idx, (float(rng.uniform(*span)),))

    def h_path(fa, dfa, fb, dfb):
        return coordinate_path(
            H.arrows, 0, lambda t: (fa(t), fb(t)), lambda t: (dfa(t), dfb(t))
        )

    def path_with_start(rng):
        fa, dfa = scalar_curve(rng)
        fb, dfb = scalar_curve(rng)
        gamma = h_path(fa, dfa, fb, dfb)
        g = join3(gamma.point(0.0), fiber_point(rng), fiber_point(rng))
        return gamma, g

    def composable(rng):
        fa, dfa = scalar_curve(rng)
        fb, dfb = scalar_curve(rng)
        fc, dfc = scalar_curve(rng)
        gamma = h_path(fa, dfa, fb, dfb)
        eta = h_path(fb, dfb, fc, dfc)
        shared = fiber_point(rng)
        g = join3(gamma.point(0.0), fiber_point(rng), shared)
        k = join3(eta.point(0.0), shared, fiber_point(rng))
        return gamma, eta, g, k

    def object_path_with_start(rng):
        f, df = scalar_curve(rng)
        delta = coordinate_path(H.objects, 0, lambda t: (f(t),), lambda t: (df(t),))
        base_prod = pi.metadata["base_product"]
        x = base_prod.join(delta.point(0.0), fiber_point(rng))
        return delta, x

    from .groupoid import TransportSamplers

    pi.transport = TransportSamplers(path_with_start, composable, object_path_with_start)


def morita_closed_form_end(c: Connection, gamma: BasePath, g: Point,
                           kappa: float) -> Point:
    """Closed-form transport for the exponential base lift: the middle arrow
    follows gamma, the fibre legs flow by exp(kappa * displacement)."""
    pi = c.morphism
    split3, join3 = pi.metadata["triple"]
    H = pi.base_grpd
    prodH: ProductSpace = H.metadata["product_space"]
    h0, ft, fs = split3(g)
    t_leg0, s_leg0 = prodH.split(gamma.point(0.0))
    t_leg1, s_leg1 = prodH.split(gamma.point(1.0))
    F = ft.space
    ft_end = Point.raw(F, ft.patch_index,
                       (ft.coords[0] * math.exp(kappa * (t_leg1.coords[0] - t_leg0.coords[0])),))
    fs_end = Point.raw(F, fs.patch_index,
                       (fs.coords[0] * math.exp(kappa * (s_leg1.coords[0] - s_leg0.coords[0])),))
    return join3(gamma.point(1.0), ft_end, fs_end)


def pair_fibration_setup(punctured: bool = False, cfg: Config = DEFAULT):
    """Angle-pair fibration with the product of base lifts.

    Complete variant: flat fibre lift. Punctured variant: fibre translation
    toward the deleted point in log charts.
    """
    pi = cat.pair_fibration(punctured=punctured)
    prodM: ProductSpace = pi.metadata["product_space"]
    M = prodM.left

    def base_lift_coeff(x: Point, w: float) -> float:
        if not punctured:
            return 0.0
        sign = 1.0 if x.patch_index == 0 else -1.0
        return -sign * _escape_rate(x.coords[0]) * w

    def hor0(x: Point, w: Tangent) -> Tangent:
        return Tangent(x, (base_lift_coeff(x, w.coeffs[0]), w.coeffs[0]))

    def hor(g: Point, a: Tangent) -> Tangent:
        left, right = prodM.split(g)
        d1 = base_lift_coeff(left, a.coeffs[0])
        d2 = base_lift_coeff(right, a.coeffs[1])
        return Tangent(g, prodM.join_coeffs(g, (d1, a.coeffs[0]), (d2, a.coeffs[1])))

    c = Connection(pi, hor, hor0, {"provenance": "pair_product_lift",
                                   "claimed_multiplicative": True,
                                   "incomplete": punctured})
    return c, {}


def so2_family_setup(cfg: Config = DEFAULT, nodes: int = 0):
    """Constant rotation-action family over a line, with quadrature."""
    fiber = cat.so2_action_groupoid()
    fam = cat.trivial_family(line(1, name="N"), fiber)
    n_nodes = nodes or cfg.constr_node_count
    quad = HaarFiberQuadrature.from_groupoid(fam.total, n_nodes)
    return fam, quad


def skewed_family_field(fam: GroupoidMorphism):
    """A generic source-projectable lift of the unit base field."""
    arr_prod: ProductSpace = fam.metadata["arr_product"]

    def X(g: Point) -> Tangent:
        y = g.coords[0]
        v1, v2, phi = g.coords[1], g.coords[2], g.coords[3]
        return Tangent(g, (1.0, 0.2 * v2 + 0.1 * math.sin(y), -0.1 * v1,
                           0.3 + 0.25 * math.sin(phi) + 0.1 * v1))

    return X


def sproper_setup(cfg: Config = DEFAULT, depth: int = 3):
    """Two-window shifted atlas on the Z2-bundle family over a line."""
    fiber = cat.group_bundle(line(1, name="F"), "finite", order=2)
    fam = cat.trivial_family(line(1, name="N"), fiber)

    def mk_window(inner, outer, amp):
        return AtlasWindow(
            inner, outer,
            lambda y: amp * math.sin(y),
            lambda y: amp * math.cos(y),
            lambda iv: amp * iv.sin(),
        )

    atlas = TrivializingAtlas(
        fam,
        [mk_window((-2.8, 0.8), (-3.2, 1.2), 0.0),
         mk_window((-0.8, 2.8), (-1.2, 3.2), 0.3)],
        fiber,
    )
    profile, _ = invariant_exhaustion(fiber, 16, 0, cfg)
    schedule = level_schedule(atlas, profile, truncation_depth=depth, cfg=cfg)
    return fam, atlas, profile, schedule


def sproper_paths(fam: GroupoidMorphism, cfg: Config):
    """Long oscillating sampler paths confined to the certification box."""
    N = fam.base_grpd.objects
    amp = 0.8
    span = cfg.constr_box - 0.1 - amp

    def paths(rng):
        a = float(rng.uniform(-span, span))
        b = float(rng.uniform(-span, span))
        A = float(rng.uniform(0.0, amp))
        ph = float(rng.uniform(0.0, 2 * math.pi))

        def f(t):
            return a + (b - a) * t + A * math.sin(math.pi * t) * math.sin(2 * math.pi * t + ph)

        def df(t):
            return (b - a) + A * (
                math.pi * math.cos(math.pi * t) * math.sin(2 * math.pi * t + ph)
                + 2 * math.pi * math.sin(math.pi * t) * math.cos(2 * math.pi * t + ph)
            )

        gamma = coordinate_path(N, 0, lambda t: (f(t),), lambda t: (df(t),))
        g = fam.fiber_sampler(gamma.point(0.0), rng)
        return gamma, g

    return paths


def product_not_uniform_setup(cfg: Config = DEFAULT):
    H = cat.pair_groupoid(line(1, name="R"))
    pi = cat.product_with_manifold(H, line(1, name="P"))
    arr_prod: ProductSpace = pi.total.metadata["arr_product"]
    obj_prod: ProductSpace = pi.total.metadata["obj_product"]

    def hor(g: Point, a: Tangent) -> Tangent:
        return Tangent(g, arr_prod.join_coeffs(g, tuple(a.coeffs), (0.0,)))

    def hor0(x: Point, w: Tangent) -> Tangent:
        return Tangent(x, obj_prod.join_coeffs(x, tuple(w.coeffs), (0.0,)))

    # composable paths: shared middle coordinate curves in the pair base
    prodH: ProductSpace = H.metadata["product_space"]

    def scalar_curve(rng):
        a = float(rng.uniform(-1.5, 1.5))
        b = float(rng.uniform(-1.0, 1.0))
        return (lambda t: a + b * t), (lambda t: b)

    def composable(rng):
        fa, dfa = scalar_curve(rng)
        fb, dfb = scalar_curve(rng)
        fc, dfc = scalar_curve(rng)
        gamma = coordinate_path(H.arrows, 0, lambda t: (fa(t), fb(t)),
                                lambda t: (dfa(t), dfb(t)))
        eta = coordinate_path(H.arrows, 0, lambda t: (fb(t), fc(t)),
                              lambda t: (dfb(t), dfc(t)))
        p = cat.sample_point(line(1, name="P"), rng)
        g = arr_prod.join(gamma.point(0.0), p)
        k = arr_prod.join(eta.point(0.0), p)
        return gamma, eta, g, k

    def object_path_with_start(rng):
        f, df = scalar_curve(rng)
        delta = coordinate_path(H.objects, 0, lambda t: (f(t),), lambda t: (df(t),))
        x = pi.object_fiber_sampler(delta.point(0.0), rng)
        return delta, x

    from .groupoid import TransportSamplers

    pi.transport = TransportSamplers(pi.transport.path_with_start, composable,
                                     object_path_with_start)
    c = Connection(pi, hor, hor0, {"provenance": "flat_product",
                                   "claimed_multiplicative": True})
    return c, {}

# ---------------------------------------------------------------------------
# scenario run functions


def _run_luca(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    c, _ = luca_setup(cfg)
    out = []

    rep, dt = _timed(lambda: complement_check(c, _scale(60, scale), seed, cfg))
    out.append(_check("complement_check", "pass" if rep.passed else "fail", "pass",
                      rep.max_residual, rep.witness, rep.n_samples))
    out[-1].wall_time = dt

    G = c.total
    g = Point.raw(G.arrows, 0, (1.0, 0.0))
    a = Tangent(c.morphism.arrow_map(g), (1.0,))
    resid, produced, required = product_clause_residual(c, g, g, a, a, cfg)
    out.append(_check(
        "product_clause_witness",
        "residual>=1" if resid >= 1.0 else f"residual={resid:.3e}",
        "residual>=1",
        resid,
        {"g": [1.0, 0.0], "a": [1.0], "produced": list(produced),
         "required": list(required)},
        1,
    ))

    rep, dt = _timed(lambda: multiplicativity_check_pointwise(c, _scale(100, scale), seed, cfg))
    out.append(_check("multiplicativity_pointwise", rep.verdict, NOT_MULTIPLICATIVE,
                      rep.max_residual, rep.witnesses.get("worst"), rep.n_samples,
                      {"clauses": rep.residuals}))
    out[-1].wall_time = dt

    rep, dt = _timed(lambda: transport_multiplicativity_check(c, _scale(25, scale), seed, cfg))
    out.append(_check("multiplicativity_transport", rep.verdict, NOT_MULTIPLICATIVE,
                      rep.max_residual, rep.witnesses.get("worst"), rep.n_samples,
                      {"clauses": rep.residuals,
                       "inconclusive_samples": rep.inconclusive_samples}))
    out[-1].wall_time = dt
    return out


def _run_so2_action(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    out = []
    am = cat.so2_action_morphism(trivial=False)

    def zero_hor0(x: Point, w: Tangent) -> Tangent:
        return Tangent(x, (0.0,) * x.patch.dim)

    result, dt = _timed(lambda: action_connection(am, zero_hor0, _scale(40, scale), seed, cfg))
    if isinstance(result, Rejection):
        probe = result.probe_residuals.get("probe[0]", float("nan"))
        out.append(_check("action_criterion", "Rejection", "Rejection",
                          result.worst_residual, result.witness,
                          details={"probe_residuals": result.probe_residuals}))
        out.append(_check(
            "invariance_at_probe",
            "residual≈1" if abs(probe - 1.0) < 1e-6 else f"residual={probe:.6f}",
            "residual≈1", probe, {"x": [1.0, 0.0]}, 1,
        ))
    else:
        out.append(_check("action_criterion", "Connection", "Rejection"))
    out[-1].wall_time = dt

    am_trivial = cat.so2_action_morphism(trivial=True)
    result2, dt = _timed(lambda: action_connection(am_trivial, zero_hor0,
                                                   _scale(40, scale), seed, cfg))
    if isinstance(result2, Rejection):
        out.append(_check("trivial_action_variant", "Rejection", MULTIPLICATIVE))
    else:
        rep = multiplicativity_check_pointwise(result2, _scale(60, scale), seed, cfg)
        out.append(_check("trivial_action_variant", rep.verdict, MULTIPLICATIVE,
                          rep.max_residual, None, rep.n_samples,
                          {"clauses": rep.residuals}))
    out[-1].wall_time = dt

    am_finite = cat.reflection_action_morphism()
    result3, dt = _timed(lambda: action_connection(am_finite, zero_hor0,
                                                   _scale(30, scale), seed, cfg))
    out.append(_check("finite_action_variant",
                      "Connection" if isinstance(result3, Connection) else "Rejection",
                      "Connection"))
    out[-1].wall_time = dt
    return out


def _run_punctured_bundle(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    c, extras = punctured_bundle_setup(cfg=cfg)
    out = []
    rep, dt = _timed(lambda: multiplicativity_check_pointwise(c, _scale(80, scale), seed, cfg))
    out.append(_check("multiplicativity_pointwise", rep.verdict, MULTIPLICATIVE,
                      rep.max_residual, None, rep.n_samples, {"clauses": rep.residuals}))
    out[-1].wall_time = dt

    v, dt = _timed(lambda: completeness_probe(
        c, c.morphism.transport.path_with_start, _scale(500, scale), seed, cfg))
    escape_ok = v.found_witness and v.witness["escape_time"] < 1.0
    out.append(_check("completeness_probe_total", v.kind, "IncompleteWitness",
                      None, v.witness, v.budget,
                      {"escape_before_horizon": escape_ok}))
    out[-1].wall_time = dt

    base_conn = Connection(
        morphism=cat.base_submersion_morphism(c.morphism), hor=c.hor0, hor0=c.hor0,
        metadata={"provenance": "base"},
    )
    v2, dt = _timed(lambda: completeness_probe(
        base_conn, base_conn.morphism.transport.path_with_start,
        _scale(500, scale), seed, cfg))
    out.append(_check("completeness_probe_base", v2.kind, "NoCounterexampleFound",
                      None, v2.witness, v2.budget))
    out[-1].wall_time = dt

    cross, dt = _timed(lambda: theorem_crosscheck_kernel(c, _scale(120, scale), seed, cfg))
    out.append(_check("kernel_theorem_crosscheck",
                      "consistent" if cross.consistent else "violated", "consistent",
                      details={"triple": [cross.total_verdict.kind,
                                          cross.kernel_verdict.kind,
                                          cross.base_verdict.kind],
                               "fibration": cross.fibration_note,
                               "kernel_source_connected": cross.kernel_source_connected,
                               "implications": [
                                   {"name": s.name, "status": s.status}
                                   for s in cross.implications
                               ]}))
    out[-1].wall_time = dt
    return out


def _run_cover(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    c, _ = cover_setup(cfg=cfg)
    out = []
    rep, dt = _timed(lambda: multiplicativity_check_pointwise(c, _scale(80, scale), seed, cfg))
    out.append(_check("multiplicativity_pointwise", rep.verdict, MULTIPLICATIVE,
                      rep.max_residual, None, rep.n_samples, {"clauses": rep.residuals}))
    out[-1].wall_time = dt

    kc = kernel_connection(c, cfg)
    kf = c.morphism.kernel.family
    v_k, dt = _timed(lambda: completeness_probe(
        kc, kf.transport.path_with_start, _scale(500, scale), seed, cfg))
    out.append(_check("completeness_probe_kernel", v_k.kind, "NoCounterexampleFound",
                      None, v_k.witness, v_k.budget))
    out[-1].wall_time = dt

    v_t, dt = _timed(lambda: completeness_probe(
        c, c.morphism.transport.path_with_start, _scale(500, scale), seed, cfg))
    out.append(_check("completeness_probe_total", v_t.kind, "IncompleteWitness",
                      None, v_t.witness, v_t.budget))
    out[-1].wall_time = dt

    fv, dt = _timed(lambda: fibration_probe(c.morphism, _scale(40, scale), seed, cfg))
    out.append(_check("star_surjectivity", str(fv.star_surjective_heuristic), "False",
                      None, {"worst_uncovered": fv.worst_uncovered_distance},
                      fv.n_samples,
                      {"submersion_ok": fv.submersion_ok, "note": fv.note}))
    out[-1].wall_time = dt

    cross, dt = _timed(lambda: theorem_crosscheck_kernel(c, _scale(120, scale), seed, cfg))
    out.append(_check("kernel_theorem_crosscheck",
                      "consistent" if cross.consistent else "violated", "consistent",
                      details={"triple": [cross.total_verdict.kind,
                                          cross.kernel_verdict.kind,
                                          cross.base_verdict.kind],
                               "fibration": cross.fibration_note}))
    out[-1].wall_time = dt
    return out


def _run_morita(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    c, extras = morita_setup(cfg)
    kappa = extras["kappa"]
    out = []
    rep, dt = _timed(lambda: multiplicativity_check_pointwise(c, _scale(80, scale), seed, cfg))
    out.append(_check("multiplicativity_pointwise", rep.verdict, MULTIPLICATIVE,
                      rep.max_residual, None, rep.n_samples, {"clauses": rep.residuals}))
    out[-1].wall_time = dt

    def closed_form_run():
        worst = 0.0
        n = _scale(50, scale)
        for i in range(n):
            rng = rng_for(seed, 113, i)
            gamma, g = c.morphism.transport.path_with_start(rng)
            got = parallel_transport(c, gamma, g, 1.0, cfg,
                                     h=cfg.transport_probe_h_ode)
            want = morita_closed_form_end(c, gamma, g, kappa)
            if got.completed:
                worst = max(worst, distance(got.end, want))
            else:
                worst = math.inf
        return worst, n

    (worst, n), dt = _timed(closed_form_run)
    out.append(_check("transport_closed_form",
                      "match" if worst < 1e-6 else f"deviation={worst:.3e}",
                      "match", worst, None, n))
    out[-1].wall_time = dt

    # uniqueness: a vertically skewed lift deviates and is flagged
    def skewed(g: Point, a: Tangent) -> Tangent:
        base = c.hor(g, a)
        extra = [0.0] * g.patch.dim
        # vertical directions are the two fibre slots (indices 2, 3 in the
        # packed line-pair pullback coordinates)
        extra[2] = 1e-3 * a.coeffs[0]
        extra[3] = 1e-3 * a.coeffs[1]
        return Tangent(g, tuple(b + e for b, e in zip(base.coeffs, extra)))

    c_skew = Connection(c.morphism, skewed, c.hor0, {"provenance": "skewed"})
    dev = morita_compare(c, c_skew, _scale(40, scale), seed, cfg)
    rep2, dt = _timed(lambda: multiplicativity_check_pointwise(
        c_skew, _scale(60, scale), seed, cfg))
    out.append(_check("uniqueness_perturbed_lift", rep2.verdict, NOT_MULTIPLICATIVE,
                      rep2.max_residual, None, rep2.n_samples,
                      {"deviation_from_formula": dev}))
    out[-1].wall_time = dt

    v, dt = _timed(lambda: completeness_probe(
        c, c.morphism.transport.path_with_start, _scale(200, scale), seed, cfg))
    out.append(_check("completeness_probe_total", v.kind, "NoCounterexampleFound",
                      None, v.witness, v.budget))
    out[-1].wall_time = dt

    cp, extras_p = morita_punctured_setup(cfg)
    vp, dt = _timed(lambda: completeness_probe(
        cp, cp.morphism.transport.path_with_start, _scale(200, scale), seed, cfg))
    out.append(_check("completeness_transfer_punctured_base", vp.kind,
                      "IncompleteWitness", None, vp.witness, vp.budget))
    out[-1].wall_time = dt
    return out


def _run_pair_fibration(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    out = []
    c, _ = pair_fibration_setup(punctured=False, cfg=cfg)
    rep, dt = _timed(lambda: multiplicativity_check_pointwise(c, _scale(80, scale), seed, cfg))
    out.append(_check("multiplicativity_pointwise", rep.verdict, MULTIPLICATIVE,
                      rep.max_residual, None, rep.n_samples, {"clauses": rep.residuals}))
    out[-1].wall_time = dt

    cross, dt = _timed(lambda: theorem_crosscheck_kernel(c, _scale(150, scale), seed, cfg))
    out.append(_check("crosscheck_complete_variant",
                      "consistent" if cross.consistent else "violated", "consistent",
                      details={"triple": [cross.total_verdict.kind,
                                          cross.kernel_verdict.kind,
                                          cross.base_verdict.kind]}))
    out[-1].wall_time = dt
    clean = all(not v.found_witness for v in
                (cross.total_verdict, cross.kernel_verdict, cross.base_verdict))
    out.append(_check("complete_variant_probes_clean", str(clean), "True"))

    cp, _ = pair_fibration_setup(punctured=True, cfg=cfg)
    cross_p, dt = _timed(lambda: theorem_crosscheck_kernel(cp, _scale(150, scale), seed, cfg))
    out.append(_check("crosscheck_punctured_variant",
                      "consistent" if cross_p.consistent else "violated", "consistent",
                      details={"triple": [cross_p.total_verdict.kind,
                                          cross_p.kernel_verdict.kind,
                                          cross_p.base_verdict.kind]}))
    out[-1].wall_time = dt
    witnesses = all(v.found_witness for v in
                    (cross_p.total_verdict, cross_p.kernel_verdict))
    out.append(_check("punctured_variant_witnesses", str(witnesses), "True",
                      details={"total": cross_p.total_verdict.witness,
                               "kernel": cross_p.kernel_verdict.witness}))
    return out


def _run_proper_average(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    out = []
    fam, quad = so2_family_setup(cfg)
    G = fam.total

    qrep, dt = _timed(lambda: quad.validate(G, _scale(20, scale), seed, cfg))
    out.append(_check("quadrature", "pass" if qrep.passed else "fail", "pass",
                      qrep.max_residual, qrep.witness, qrep.n_samples))
    out[-1].wall_time = dt

    # fixed point: the flat lift is already multiplicative
    def X_flat(g: Point) -> Tangent:
        return Tangent(g, (1.0,) + (0.0,) * (g.patch.dim - 1))

    def fixed_point_run():
        X_hat, _ = haar_average(G, quad, X_flat, 8, seed, cfg, check=False)
        worst = 0.0
        for i in range(_scale(100, scale)):
            rng = rng_for(seed, 127, i)
            g = G.arrow_sampler(rng)
            worst = max(worst, float(np.linalg.norm(
                np.asarray(X_hat(g).coeffs) - np.asarray(X_flat(g).coeffs))))
        return worst

    worst, dt = _timed(fixed_point_run)
    out.append(_check("averaging_fixed_point",
                      "fixed" if worst < 1e-9 else f"moved={worst:.3e}", "fixed",
                      worst, None, _scale(100, scale)))
    out[-1].wall_time = dt

    X = skewed_family_field(fam)
    (X_hat, rep), dt = _timed(lambda: haar_average(G, quad, X, _scale(40, scale), seed, cfg))
    out.append(_check("averaged_field_multiplicative",
                      "pass" if rep.passed else "fail", "pass",
                      rep.max_residual, rep.witness, rep.n_samples,
                      {"clauses": rep.clauses, "nodes": quad.node_count}))
    out[-1].wall_time = dt

    # quadrature refinement: 4x nodes agree
    fam4, quad4 = so2_family_setup(cfg, nodes=quad.node_count * 4)

    def refinement_run():
        X_hat4, _ = haar_average(G, quad4, X, 8, seed, cfg, check=False)
        worst = 0.0
        for i in range(_scale(25, scale)):
            rng = rng_for(seed, 131, i)
            g = G.arrow_sampler(rng)
            worst = max(worst, float(np.linalg.norm(
                np.asarray(X_hat(g).coeffs) - np.asarray(X_hat4(g).coeffs))))
        return worst

    worst4, dt = _timed(refinement_run)
    out.append(_check("quadrature_refinement",
                      "converged" if worst4 < 1e-8 else f"gap={worst4:.3e}",
                      "converged", worst4, None, _scale(25, scale)))
    out[-1].wall_time = dt

    # full proper-family connection from a skewed source lift
    arr_prod: ProductSpace = fam.metadata["arr_product"]
    obj_prod: ProductSpace = fam.metadata["obj_product"]

    def hor_s(g: Point, w: Tangent) -> Tangent:
        phi = g.coords[3]
        skew = 0.2 * math.sin(phi) * w.coeffs[1] + 0.1 * w.coeffs[2]
        return Tangent(g, (w.coeffs[0], w.coeffs[1], w.coeffs[2], skew))

    def hor0(x: Point, w: Tangent) -> Tangent:
        v1, v2 = x.coords[1], x.coords[2]
        return Tangent(x, (w.coeffs[0], 0.05 * v2 * w.coeffs[0], -0.05 * v1 * w.coeffs[0]))

    conn, dt = _timed(lambda: proper_family_connection(
        fam, hor0, hor_s, quad, _scale(30, scale), seed, cfg))
    rep2 = multiplicativity_check_pointwise(conn, _scale(50, scale), seed, cfg)
    out.append(_check("proper_family_connection", rep2.verdict, MULTIPLICATIVE,
                      rep2.max_residual, None, rep2.n_samples,
                      {"clauses": rep2.residuals}))
    out[-1].wall_time = dt
    return out


def _run_sproper(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    out = []
    fam, atlas, profile, schedule = sproper_setup(cfg)

    arep, dt = _timed(lambda: atlas.validate(_scale(20, scale), seed, cfg))
    out.append(_check("atlas", "pass" if arep.passed else "fail", "pass",
                      arep.max_residual, arep.witness, arep.n_samples))
    out[-1].wall_time = dt

    _, exh_rep = invariant_exhaustion(atlas.fiber, _scale(40, scale), seed, cfg)
    out.append(_check("invariant_exhaustion", "pass" if exh_rep.passed else "fail",
                      "pass", exh_rep.max_residual, None, exh_rep.n_samples))

    out.append(_check("level_schedule_disjoint", str(schedule.disjoint_verified),
                      "True", details={"levels": schedule.per_window}))

    def build():
        return complete_connection_builder(fam, atlas, schedule, profile, cfg,
                                           n_cert_samples=_scale(24, scale), seed=seed)

    (conn, cert), dt = _timed(build)
    out.append(_check("certificate", cert.verdict, "CertifiedComplete",
                      cert.partition_sum_residual, None, 0,
                      {"slab_gap": cert.slab_gap,
                       "windows": [
                           {"window": w.window, "levels": w.levels,
                            "flatness_residual": w.flatness_residual,
                            "precompact_bound": w.precompact_bound}
                           for w in cert.windows
                       ]}))
    out[-1].wall_time = dt

    fv, dt = _timed(lambda: flatness_certificate_check(
        conn, atlas, schedule.per_window, profile, _scale(12, scale), seed, cfg))
    out.append(_check("certificate_recheck", fv.verdict, "CertifiedComplete",
                      max(fv.worst_fiber_residual, fv.worst_base_residual),
                      None, fv.n_samples, {"bounds": fv.precompact_bounds}))
    out[-1].wall_time = dt

    rep, dt = _timed(lambda: multiplicativity_check_pointwise(conn, _scale(60, scale),
                                                              seed, cfg))
    out.append(_check("multiplicativity_pointwise", rep.verdict, MULTIPLICATIVE,
                      rep.max_residual, None, rep.n_samples))
    out[-1].wall_time = dt

    v, dt = _timed(lambda: completeness_probe(
        conn, sproper_paths(fam, cfg), _scale(500, scale), seed, cfg))
    out.append(_check("completeness_probe", v.kind, "NoCounterexampleFound",
                      None, v.witness, v.budget))
    out[-1].wall_time = dt

    def injected():
        bad = level_schedule(atlas, profile, schedule.truncation_depth, cfg)
        bad.levels[(1, 1)] = bad.levels[(1, 0)]
        try:
            complete_connection_builder(fam, atlas, bad, profile, cfg, 4, seed)
            return "not_caught"
        except CertificateFailure as exc:
            return f"CertificateFailure[{str(exc).split(':')[0]}]"

    verdict, dt = _timed(injected)
    out.append(_check("injected_overlap", verdict, "CertificateFailure[slab_disjointness]"))
    out[-1].wall_time = dt
    return out


def _run_product_not_uniform(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    out = []
    c, _ = product_not_uniform_setup(cfg)
    fv, dt = _timed(lambda: fibration_probe(c.morphism, _scale(40, scale), seed, cfg))
    fib_flags = fv.submersion_ok and fv.shriek_submersion_ok and fv.star_surjective_heuristic
    out.append(_check("fibration_flags", str(fib_flags), "True",
                      None, None, fv.n_samples,
                      {"min_singular_value": fv.min_singular_value,
                       "shriek_min_singular_value": fv.shriek_min_singular_value,
                       "worst_uncovered": fv.worst_uncovered_distance,
                       "note": fv.note}))
    out[-1].wall_time = dt
    out.append(_check("uniform_ok", str(fv.uniform_ok), "False",
                      details={"rank": fv.uniform_rank,
                               "required": fv.uniform_rank_required}))
    rep, dt = _timed(lambda: multiplicativity_check_pointwise(c, _scale(60, scale), seed, cfg))
    out.append(_check("multiplicativity_pointwise", rep.verdict, MULTIPLICATIVE,
                      rep.max_residual, None, rep.n_samples))
    out[-1].wall_time = dt
    return out


def _run_splitting(seed: int, cfg: Config, scale: float) -> list[CheckResult]:
    out = []
    worst = {"h": 0.0, "p": 0.0, "C": 0.0, "involution": 0.0}
    n = _scale(50, scale)
    for i in range(n):
        rng = rng_for(seed, 137, i)
        dim_k = int(rng.integers(1, 4))
        dim_q = int(rng.integers(1, 4))
        dim_e = dim_k + dim_q
        Q, _ = np.linalg.qr(rng.normal(size=(dim_e, dim_e)))
        iota = Q[:, :dim_k]
        R, _ = np.linalg.qr(rng.normal(size=(dim_q, dim_q)))
        pi_mat = R @ Q[:, dim_k:].T
        h0 = np.linalg.lstsq(pi_mat, np.eye(dim_q), rcond=None)[0]
        h = h0 + iota @ rng.normal(scale=0.5, size=(dim_k, dim_q))

        from_h = splitting_correspondence(VBFiberData(iota, pi_mat, h=h), "h")
        worst["h"] = max(worst["h"], max(from_h.residuals.values()))
        from_p = splitting_correspondence(VBFiberData(iota, pi_mat, p=from_h.p), "p")
        worst["p"] = max(worst["p"], max(from_p.residuals.values()))
        from_c = splitting_correspondence(VBFiberData(iota, pi_mat, C=from_h.C), "C")
        worst["C"] = max(worst["C"], max(from_c.residuals.values()))
        worst["involution"] = max(
            worst["involution"],
            float(np.max(np.abs(from_p.h - h))),
            float(np.max(np.abs(from_c.h - h))),
        )
    overall = max(worst.values())
    out.append(_check("splitting_identities",
                      "exact" if overall < 1e-12 else f"residual={overall:.3e}",
                      "exact", overall, None, n, {"clauses": worst}))
    return out

# ---------------------------------------------------------------------------
# registry


def _registry() -> dict[str, Scenario]:
    entries = [
        Scenario(
            "luca_r2_s1",
            "Quadratic-skew lift on the plane-over-circle group morphism: a "
            "fibrewise complement that fails the product clause",
            "abelian-group counterexample: the horizontal space is not a subgroup",
            _run_luca,
            lambda cfg: luca_setup(cfg),
        ),
        Scenario(
            "so2_action_no_mec",
            "Rotation action morphism SO(2)⋉R² → SO(2): the invariance "
            "criterion rejects every candidate lift",
            "connected-group action obstruction: nontrivial actions admit no "
            "compatible lift",
            _run_so2_action,
            None,
        ),
        Scenario(
            "punctured_group_bundle",
            "Punctured finite-group bundle over the line: multiplicative, "
            "escapes through the deleted point before t = 1",
            "local diffeomorphism with a non-covering projection: multiplicative "
            "but incomplete; the base stays complete",
            _run_punctured_bundle,
            lambda cfg: punctured_bundle_setup(cfg=cfg),
        ),
        Scenario(
            "disjoint_union_cover",
            "Disjoint union (bundle ⊔ punctured bundle) over the bundle: kernel "
            "complete, total incomplete, star-surjectivity fails",
            "kernel completeness does not transfer without the fibration "
            "hypothesis",
            _run_cover,
            lambda cfg: cover_setup(cfg=cfg),
        ),
        Scenario(
            "morita_pullback",
            "Pullback of the line pair groupoid along a product projection: "
            "unique lift over the base connection, closed-form transport",
            "pullback projections carry a unique lift per base connection; "
            "completeness transfers from the base",
            _run_morita,
            lambda cfg: morita_setup(cfg),
        ),
        Scenario(
            "pair_fibration_kernel_thm",
            "Angle-pair fibration with product lifts: completeness verdict "
            "triples on the complete and punctured-fibre variants",
            "kernel-completeness transfer for fibrations, probed on both sides",
            _run_pair_fibration,
            lambda cfg: pair_fibration_setup(punctured=False, cfg=cfg),
        ),
        Scenario(
            "proper_average",
            "Rotation-action family over a line: fibre averaging fixes "
            "multiplicative fields and repairs skewed lifts",
            "normalized invariant fibre averaging on proper groupoids produces "
            "multiplicative data",
            _run_proper_average,
            lambda cfg: (proper_average_connection(cfg), {}),
        ),
        Scenario(
            "sproper_complete_family",
            "Two-window shifted Z₂-bundle family: lexicographic level schedule, "
            "interval-certified complete glued lift",
            "source-proper fibres admit complete lifts via slab-flat gluing",
            _run_sproper,
            lambda cfg: (sproper_connection(cfg), {}),
        ),
        Scenario(
            "product_not_uniform",
            "Product of the line pair groupoid with a line, projected to the "
            "first factor: a fibration that is not uniform",
            "the comparison map to the pullback groupoid drops rank on products",
            _run_product_not_uniform,
            lambda cfg: product_not_uniform_setup(cfg),
        ),
        Scenario(
            "splitting_fixture",
            "Random exact-sequence fibre data: right/left splittings and "
            "complements correspond exactly",
            "split exact sequences: h∘π + ι∘p = id, Φ invertible, C = ker p = im h",
            _run_splitting,
            None,
        ),
    ]
    return {s.name: s for s in entries}


def proper_average_connection(cfg: Config, nodes: int = 8) -> Connection:
    # the averaging integrands on this family are trigonometric polynomials
    # of degree <= 3 in the fibre angle, so 8 uniform nodes integrate exactly;
    # the acceptance suite re-verifies node-count independence numerically
    fam, quad = so2_family_setup(cfg, nodes=nodes)

    def hor_s(g: Point, w: Tangent) -> Tangent:
        phi = g.coords[3]
        skew = 0.2 * math.sin(phi) * w.coeffs[1] + 0.1 * w.coeffs[2]
        return Tangent(g, (w.coeffs[0], w.coeffs[1], w.coeffs[2], skew))

    def hor0(x: Point, w: Tangent) -> Tangent:
        v1, v2 = x.coords[1], x.coords[2]
        return Tangent(x, (w.coeffs[0], 0.05 * v2 * w.coeffs[0], -0.05 * v1 * w.coeffs[0]))

    return proper_family_connection(fam, hor0, hor_s, quad, 12, 0, cfg)


def sproper_connection(cfg: Config) -> Connection:
    fam, atlas, profile, schedule = sproper_setup(cfg)
    conn, _ = complete_connection_builder(fam, atlas, schedule, profile, cfg, 6, 0)
    return conn


REGISTRY = _registry()


def list_scenarios() -> list[tuple[str, str, str]]:
    """(name, one-line description, source note) in stable order."""
    return [(s.name, s.description, s.note) for s in REGISTRY.values()]


def run_scenario(
    name: str,
    seed: int = 7,
    budget_scale: float = 1.0,
    cfg: Config = DEFAULT,
) -> ReportDocument:
    """Execute a scenario's checks in order and compare against expectations."""
    scenario = REGISTRY.get(name)
    if scenario is None:
        raise UnknownScenario(name)
    checks = scenario.run(seed, cfg, budget_scale)
    return ReportDocument(
        scenario=name,
        description=scenario.description,
        note=scenario.note,
        seed=seed,
        config_snapshot=cfg.snapshot(),
        checks=checks,
        overall_pass=all(c.matched for c in checks),
    )
