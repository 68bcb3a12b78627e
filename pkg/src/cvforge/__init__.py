"""cvforge: time-frequency continuous-variable cluster states.

Build multiplexed entangled lattices from simulated parametric sources,
verify them through nullifier variances, read off their graph structure,
and run measurement-based Gaussian computation along their wires.
"""

from .tolerances import (
    DEGENERATE_VARIANCE,
    GATE_TOL,
    PHYSICS_TOL,
    STRUCTURAL_TOL,
    SYMMETRY_TOL,
)
from .lattice import (
    AncillaId,
    Field,
    LatticeConfig,
    LatticeError,
    ModeId,
    ModeRegistry,
    Nopa,
    enumerate_modes,
    pair_partner,
    paired_signal_lines,
    rail_line,
    rail_of,
)
from .gaussian import (
    DegenerateMeasurementError,
    DimensionError,
    GaussianState,
    SymplecticOp,
    apply,
    beamsplitter,
    check_symplectic,
    delay_relabel,
    identity_op,
    omega_matrix,
    phase_rotate,
    quadrature_variance,
    read_covariance_binary,
    read_covariance_csv,
    two_mode_squeeze,
    vacuum,
    write_covariance_binary,
    write_covariance_csv,
)
from .graphs import (
    ComplexGraph,
    GraphError,
    HGraph,
    Nullifier,
    NullifierSet,
    check_bipartite,
    check_self_inverse,
    cluster_adjacency,
    connected_components,
    even_bin_mask,
    frequency_triple,
    hgraph_from_trace,
    nullifiers_1d,
    nullifiers_3d,
    rotated_graph,
    unit_cell_keys,
    write_adjacency_json,
    write_edge_csv,
    z_from_hgraph,
    z_from_state,
)
from .pipeline import (
    NopaSettings,
    OpRecord,
    PipelineConfig,
    PipelineError,
    PipelineTrace,
    VarianceTable,
    build,
    build_1d,
    build_3d,
    delay_permutation,
    passive_layer_matrix,
    replay,
    squeezing_db,
    sweep,
    worker_count,
)
from .verify import (
    ThresholdResult,
    VerifyError,
    VlfReport,
    VlfRow,
    find_threshold,
    vlf_check,
)
from .mbqc import (
    EffectiveGate,
    Macronode,
    MbqcError,
    MeasurementPlan,
    PlanResult,
    PlanStep,
    StepRecord,
    angles_from_sum_diff,
    effective_gate,
    extract_gate,
    gate_as_rotation_squeeze_rotation,
    identity_angles,
    macronode_map,
    rotation_matrix,
    run_plan,
    squeeze_matrix,
    sum_diff_angles,
    teleport_gate_closed_form,
    teleport_step,
    two_step_closed_form,
    verify_rsr_composition,
    wire_pair_labels,
)
from .cli import ConfigError, RunConfig, load_run_config, parse_run_config

__version__ = "0.1.0"

__all__ = [
    "AncillaId",
    "ComplexGraph",
    "ConfigError",
    "DEGENERATE_VARIANCE",
    "DegenerateMeasurementError",
    "DimensionError",
    "EffectiveGate",
    "Field",
    "GATE_TOL",
    "GaussianState",
    "GraphError",
    "HGraph",
    "LatticeConfig",
    "LatticeError",
    "Macronode",
    "MbqcError",
    "MeasurementPlan",
    "ModeId",
    "ModeRegistry",
    "Nopa",
    "NopaSettings",
    "Nullifier",
    "NullifierSet",
    "OpRecord",
    "PHYSICS_TOL",
    "PipelineConfig",
    "PipelineError",
    "PipelineTrace",
    "PlanResult",
    "PlanStep",
    "RunConfig",
    "STRUCTURAL_TOL",
    "SYMMETRY_TOL",
    "StepRecord",
    "SymplecticOp",
    "ThresholdResult",
    "VarianceTable",
    "VerifyError",
    "VlfReport",
    "VlfRow",
    "angles_from_sum_diff",
    "apply",
    "beamsplitter",
    "build",
    "build_1d",
    "build_3d",
    "check_bipartite",
    "check_self_inverse",
    "check_symplectic",
    "cluster_adjacency",
    "connected_components",
    "delay_permutation",
    "delay_relabel",
    "effective_gate",
    "enumerate_modes",
    "even_bin_mask",
    "extract_gate",
    "find_threshold",
    "frequency_triple",
    "gate_as_rotation_squeeze_rotation",
    "hgraph_from_trace",
    "identity_angles",
    "identity_op",
    "load_run_config",
    "macronode_map",
    "nullifiers_1d",
    "nullifiers_3d",
    "omega_matrix",
    "pair_partner",
    "paired_signal_lines",
    "parse_run_config",
    "passive_layer_matrix",
    "phase_rotate",
    "quadrature_variance",
    "rail_line",
    "rail_of",
    "read_covariance_binary",
    "read_covariance_csv",
    "replay",
    "rotated_graph",
    "rotation_matrix",
    "run_plan",
    "squeeze_matrix",
    "squeezing_db",
    "sum_diff_angles",
    "sweep",
    "teleport_gate_closed_form",
    "teleport_step",
    "two_mode_squeeze",
    "two_step_closed_form",
    "unit_cell_keys",
    "vacuum",
    "verify_rsr_composition",
    "vlf_check",
    "wire_pair_labels",
    "worker_count",
    "write_adjacency_json",
    "write_covariance_binary",
    "write_covariance_csv",
    "write_edge_csv",
    "z_from_hgraph",
    "z_from_state",
]
