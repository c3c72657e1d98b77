"""Peridynamic wave simulation with a discrete perfectly matched layer.

Simulates the nonlocal scalar wave equation on a square grid and truncates
the computational domain with an absorbing layer built from discrete complex
coordinate stretching, so outgoing waves leave without reflecting back.
"""

__version__ = "0.1.0"

from pdpml.cli import (
    ConfigError,
    RunManifest,
    main,
    parse_config,
    resolved_config,
    serialize_config,
)
from pdpml.diagnostics import (
    ConvergenceTable,
    DiagnosticsReport,
    convergence_study,
    energy,
    energy_trace,
    injection_error,
    measured_reflections,
    min_enlargement,
    reflection_error,
    reflection_trace,
    restricted_trace,
    sigma_scan,
    solve_reference,
)
from pdpml.integrator import (
    FieldSnapshot,
    InitialCondition,
    InstabilityError,
    OutputSpec,
    PMLState,
    ProbeTrace,
    RunResult,
    SimulationConfig,
    init_state,
    read_snapshot,
    run,
    step,
    write_probe_csv,
    write_snapshot,
    zero_state,
)
from pdpml.holomorphy import (
    ExtendedMode,
    StretchedCoordinate,
    cauchy_riemann_residual,
    commutation_residual,
    mode_on_manifold,
    propagating_mode,
    proposition_identity_check,
    theorem_residual,
)
from pdpml.pml import (
    PMLProfile,
    WaveMode,
    aux_rhs_bar,
    aux_rhs_tilde,
    build_profile,
    corner_rhs,
    decay_rate_mu,
    eta,
    main_rhs,
)
from pdpml.stencil import (
    GridConfig,
    KernelSpec,
    Stencil,
    apply_operator,
    apply_stencil,
    cfl_dt_limit,
    compute_stencil,
    dispersion_omega2,
    group_speed_max,
    long_wave_speed,
    omega2_max,
    stencil_radius,
)

__all__ = [
    "ConfigError",
    "ConvergenceTable",
    "DiagnosticsReport",
    "ExtendedMode",
    "FieldSnapshot",
    "GridConfig",
    "InitialCondition",
    "InstabilityError",
    "KernelSpec",
    "OutputSpec",
    "PMLProfile",
    "PMLState",
    "ProbeTrace",
    "RunManifest",
    "RunResult",
    "SimulationConfig",
    "Stencil",
    "StretchedCoordinate",
    "WaveMode",
    "apply_operator",
    "apply_stencil",
    "aux_rhs_bar",
    "aux_rhs_tilde",
    "build_profile",
    "cauchy_riemann_residual",
    "cfl_dt_limit",
    "commutation_residual",
    "compute_stencil",
    "convergence_study",
    "corner_rhs",
    "decay_rate_mu",
    "dispersion_omega2",
    "energy",
    "energy_trace",
    "eta",
    "group_speed_max",
    "init_state",
    "injection_error",
    "long_wave_speed",
    "main",
    "main_rhs",
    "measured_reflections",
    "min_enlargement",
    "mode_on_manifold",
    "omega2_max",
    "parse_config",
    "propagating_mode",
    "proposition_identity_check",
    "read_snapshot",
    "reflection_error",
    "reflection_trace",
    "resolved_config",
    "restricted_trace",
    "run",
    "serialize_config",
    "sigma_scan",
    "solve_reference",
    "stencil_radius",
    "step",
    "theorem_residual",
    "write_probe_csv",
    "write_snapshot",
    "zero_state",
    "__version__",
]
