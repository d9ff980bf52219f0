"""Per-step and post-run analysis of observer trajectories.

``record_step`` condenses one accepted state into a row of scalar
diagnostics (errors against the exact and the projected reference, energy
functionals, Newton statistics, bounds check). ``detect_plateau`` and
``convergence_table`` post-process the error-versus-time series into the
quantities the experiments report: plateau level, plateau onset time,
exponential decay rate, and observed convergence orders across refinement
levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gas import (
    DEFAULT_BOUNDS,
    GasLaw,
    StateBounds,
    check_state_bounds,
    relative_dissipation,
    relative_energy,
    velocity_coupling,
)
from .mesh import Grid1D, l2_state_distance, nodal_density
from .reference import ManufacturedSolution, projected_reference
from .scheme import DiscreteState, StepReport

__all__ = [
    "TimeSeriesRecord",
    "PlateauReport",
    "record_step",
    "detect_plateau",
    "convergence_table",
]


@dataclass(frozen=True)
class TimeSeriesRecord:
    """One row of per-step diagnostics.

    ``l2_error`` measures against the exact reference profiles,
    ``l2_error_vs_projected`` against the reference mapped into the discrete
    spaces; their split separates projection error from observer error.
    ``mod_energy`` is rel_energy + delta * aux_G for the configured delta.
    """

    t: float
    l2_error: float
    l2_error_normalized: float
    l2_error_vs_projected: float
    rel_energy: float
    aux_G: float
    mod_energy: float
    dissipation_D: float
    newton_iterations: int
    residual_max_norm: float
    a1h_pass: bool


@dataclass(frozen=True)
class PlateauReport:
    """Plateau and decay summary of an error-versus-time series.

    When no plateau is detected (the error is still decaying at the final
    time), ``has_plateau`` is False and the plateau fields are None.
    """

    has_plateau: bool
    plateau_level: Optional[float]
    plateau_onset_time: Optional[float]
    decay_rate: Optional[float]
    fit_window: Optional[tuple[float, float]]


def record_step(
    state: DiscreteState,
    solution: ManufacturedSolution,
    grid: Grid1D,
    law: GasLaw,
    delta: float = 0.1,
    bounds: StateBounds = DEFAULT_BOUNDS,
    report: Optional[StepReport] = None,
    initial_error: Optional[float] = None,
) -> TimeSeriesRecord:
    """Compute the full diagnostics row for one state.

    ``initial_error`` normalizes the error trace; passing None marks the
    t=0 row, which is its own normalization reference. The energy
    functionals compare against the projected reference state, whose nodal
    velocity is derived from projected momentum and density by the same
    convention as the discrete state's.
    """
    t = state.t
    v = state.velocity()
    rho_ref_h, m_ref_h, _ = projected_reference(solution, grid, t)
    v_ref_h = m_ref_h.values / nodal_density(rho_ref_h.values)

    l2_exact = l2_state_distance(
        state.rho, v,
        lambda x: solution.density(x, t), lambda x: solution.velocity(x, t),
        grid,
    )
    l2_proj = l2_state_distance(state.rho, v, rho_ref_h.values, v_ref_h, grid)
    rel = relative_energy(state.rho, v, rho_ref_h.values, v_ref_h, grid, law)
    coupling = velocity_coupling(state.rho, v, rho_ref_h.values, v_ref_h, grid)
    diss = relative_dissipation(rho_ref_h.values, v, v_ref_h, grid, solution.gamma)
    a1h = check_state_bounds(state.rho, v, bounds)

    if initial_error is None:
        normalized = 1.0 if l2_exact > 0.0 else float("nan")
    else:
        normalized = l2_exact / initial_error if initial_error > 0.0 else float("nan")

    return TimeSeriesRecord(
        t=t,
        l2_error=l2_exact,
        l2_error_normalized=normalized,
        l2_error_vs_projected=l2_proj,
        rel_energy=rel,
        aux_G=coupling,
        mod_energy=rel + delta * coupling,
        dissipation_D=diss,
        newton_iterations=report.newton_iterations if report else 0,
        residual_max_norm=report.final_residual_max_norm if report else 0.0,
        a1h_pass=a1h.passed,
    )


def detect_plateau(
    times: Sequence[float],
    errors: Sequence[float],
    band: float = 0.25,
    onset_factor: float = 2.0,
    fit_fraction: float = 0.8,
    min_tail_fraction: float = 0.1,
    min_tail_points: int = 5,
) -> PlateauReport:
    """Locate the error plateau and fit the preceding exponential decay.

    The plateau is the longest trailing window in which every sample stays
    within ``band`` (relative) of the window mean; its mean is the plateau
    level. The onset is the first time from which the error stays below
    ``onset_factor`` times that level. The decay rate is the negated least
    squares slope of log(error) over the leading ``fit_fraction`` of the
    pre-onset phase.

    A trailing window shorter than ``min_tail_fraction`` of the full time
    span (or fewer than ``min_tail_points`` samples) means the series is
    still decaying at the final time: no plateau is reported.
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(errors, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise ValueError("times and errors must be 1-d arrays of equal length")
    n = t.shape[0]
    if n < 10:
        raise ValueError(f"series too short for plateau detection ({n} < 10 samples)")
    if np.any(e < 0.0):
        raise ValueError("errors must be nonnegative")

    rev = e[::-1]
    suffix_max = np.maximum.accumulate(rev)[::-1]
    suffix_min = np.minimum.accumulate(rev)[::-1]
    suffix_mean = np.cumsum(rev)[::-1] / (n - np.arange(n))
    in_band = (suffix_max <= (1.0 + band) * suffix_mean) & (
        suffix_min >= (1.0 - band) * suffix_mean
    )
    start = int(np.argmax(in_band))  # in_band[-1] is always True

    total_span = t[-1] - t[0]
    tail_span = t[-1] - t[start]
    if tail_span < min_tail_fraction * total_span or (n - start) < min_tail_points:
        return PlateauReport(False, None, None, None, None)

    level = float(suffix_mean[start])
    onset_idx = int(np.argmax(suffix_max <= onset_factor * level))
    onset_time = float(t[onset_idx])

    fit_end = t[0] + fit_fraction * (onset_time - t[0])
    mask = (t <= fit_end) & (e > 0.0)
    if int(mask.sum()) >= 2:
        slope = np.polyfit(t[mask], np.log(e[mask]), 1)[0]
        decay_rate: Optional[float] = float(-slope)
        window: Optional[tuple[float, float]] = (float(t[0]), float(fit_end))
    else:
        decay_rate = None
        window = None
    return PlateauReport(True, level, onset_time, decay_rate, window)


def convergence_table(plateaus: Sequence[tuple[float, float]]) -> list[float]:
    """Observed convergence orders from (h, plateau_level) pairs.

    Pairs are sorted coarse to fine; each consecutive pair yields
    log(level ratio) / log(h ratio), which is log2 of the level ratio for
    halved meshes. Requires at least two levels with positive plateaus.
    """
    if len(plateaus) < 2:
        raise ValueError("need at least two refinement levels")
    ordered = sorted(plateaus, key=lambda p: -p[0])
    orders = []
    for (h_coarse, p_coarse), (h_fine, p_fine) in zip(ordered, ordered[1:]):
        if p_coarse <= 0.0 or p_fine <= 0.0:
            raise ValueError("plateau levels must be positive")
        if h_coarse <= h_fine:
            raise ValueError("mesh widths must strictly decrease between levels")
        orders.append(math.log(p_coarse / p_fine) / math.log(h_coarse / h_fine))
    return orders
