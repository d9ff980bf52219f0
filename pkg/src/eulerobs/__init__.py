"""Nudging observer for 1-D barotropic pipe flow.

A velocity-data-driven state observer for the compressible barotropic Euler
equations on a pipe, discretized with a staggered mixed finite element
scheme (cell-constant density, nodal momentum) and implicit Euler time
stepping, solved by a damped Newton method per step. Ships with a
closed-form reference solution for exact error measurement, energy-based
diagnostics, and an experiment harness for refinement and gain studies.
"""

from .mesh import (
    CellField,
    Grid1D,
    NodalField,
    eval_nodal,
    interpolate_nodal,
    l2_error_discrete,
    l2_error_trapezoid,
    l2_state_distance,
    nodal_density,
    project_piecewise_constant,
)
from .gas import (
    DEFAULT_BOUNDS,
    GasLaw,
    IdealGasLaw,
    StateBounds,
    StateBoundsReport,
    check_state_bounds,
    energy,
    enthalpy,
    relative_dissipation,
    relative_energy,
    velocity_coupling,
)
from .reference import (
    ManufacturedSolution,
    NoiseModel,
    NOISE_NONE,
    measured_velocity,
    pde_residuals,
    projected_reference,
)
from .scheme import (
    DiscreteState,
    NewtonConvergenceError,
    NonPositiveDensityError,
    SchemeParams,
    SimulationError,
    SimulationResult,
    StepData,
    StepReport,
    assemble_jacobian,
    assemble_residual,
    build_step_data,
    initial_observer_state,
    mass_identity_defect,
    newton_step_solve,
    projected_initial_state,
    run_simulation,
)
from .diagnostics import (
    PlateauReport,
    TimeSeriesRecord,
    convergence_table,
    detect_plateau,
    record_step,
)
from .experiments import (
    ExperimentConfig,
    ExperimentSummary,
    LevelResult,
    run_experiment,
    run_level,
    write_records_csv,
)
from .plots import emit_plot, parse_timeseries_csv

__version__ = "0.1.0"
