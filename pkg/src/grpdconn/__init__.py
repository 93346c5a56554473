"""Numerical Lie groupoids, multiplicative connections, and transport.

Layers:

- ``geometry``, ``smoothmap``, ``integrate``, ``linalg``: coordinate patches,
  maps with analytic or finite-difference Jacobians, guarded RK4, subspace
  tests in the flat patch gauge.
- ``groupoid``, ``catalog``: groupoids as coordinate data with closed-form
  samplers; the example catalog.
- ``tangent``: tangent structure maps, subgroupoid closure checks, exact
  splitting correspondences.
- ``connection``, ``transport``: horizontal lifts, multiplicativity checks
  (pointwise and path-based), parallel transport, holonomy, completeness
  probes, and theorem cross-checks.
- ``constructions``: pullback lifts, gluing, fibre averaging, exhaustion
  functions, level schedules, and the interval-certified complete builder.
- ``scenarios``, ``cli``: the named scenario registry and its CLI.
"""

from .config import Config, DEFAULT, parse_config_file
from .geometry import Patch, Point, ProductSpace, Space, Tangent, distance
from .smoothmap import PairMap, SmoothMap, jacobian
from .integrate import TrajectoryOutcome, dump_trajectory, integrate
from .linalg import subspace_residual
from .groupoid import (
    CheckReport,
    FibrationVerdict,
    Groupoid,
    GroupoidMorphism,
    check_axioms,
    fibration_probe,
    morphism_check,
)
from .catalog import default_instances  # the entry dispatcher lives at grpdconn.catalog.catalog
from .tangent import (
    SubbundleFrame,
    VBFiberData,
    core_side_decomposition,
    splitting_correspondence,
    tangent_structure_maps,
    vb_subgroupoid_check,
)
from .connection import (
    Connection,
    MultiplicativityReport,
    Rejection,
    action_connection,
    complement_check,
    compose_connections,
    kernel_connection,
    multiplicativity_check_pointwise,
    multiplicative_vf_lift,
)
from .transport import (
    ProbeVerdict,
    TransportOutcome,
    completeness_probe,
    current_groupoid_check,
    holonomy,
    parallel_transport,
    theorem_crosscheck_kernel,
    transport_multiplicativity_check,
)
from .constructions import (
    CompletenessCertificate,
    HaarFiberQuadrature,
    LevelSchedule,
    TrivializingAtlas,
    complete_connection_builder,
    flatness_certificate_check,
    glue_local_trivial,
    haar_average,
    invariant_exhaustion,
    level_schedule,
    morita_connection,
    proper_family_connection,
)
from .paths import BasePath, constant_path, coordinate_path
from .scenarios import ReportDocument, emit_report, list_scenarios, run_scenario

__version__ = "0.1.0"
