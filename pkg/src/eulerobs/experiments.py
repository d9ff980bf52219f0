"""Refinement sweeps, CSV emission and experiment summaries.

One experiment runs the observer over a range of refinement levels with a
fixed nudging gain. Level k uses base_cells * 2^k cells and base_steps *
2^k time steps, so that cell width and step size shrink together (with the
defaults they are equal at every level). Levels are independent simulations
and can run in parallel worker processes; all files are written by the
orchestrating process, in level order, so outputs are deterministic.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .diagnostics import PlateauReport, TimeSeriesRecord, convergence_table, detect_plateau, record_step
from .gas import DEFAULT_BOUNDS, IdealGasLaw, StateBounds
from .mesh import Grid1D
from .reference import ManufacturedSolution, NoiseModel
from .scheme import SchemeParams, SimulationError, initial_observer_state, run_simulation

__all__ = [
    "ExperimentConfig",
    "LevelResult",
    "ExperimentSummary",
    "run_level",
    "run_experiment",
    "write_records_csv",
    "CSV_COLUMNS",
    "CSV_SCHEMA_VERSION",
]

CSV_SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "t",
    "l2_error",
    "l2_error_normalized",
    "l2_error_vs_projected",
    "rel_energy",
    "aux_G",
    "mod_energy",
    "dissipation_D",
    "newton_iters",
    "residual_max_norm",
    "a1h_pass",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one refinement sweep."""

    mu: float = 1.0
    levels: tuple[int, ...] = (0, 1, 2)
    base_cells: int = 30
    base_steps: int = 1200
    t_final: float = 40.0
    domain_length: float = 1.0
    gamma: float = 0.1
    rho_init: float = 2.5
    m_init: str = "measured"
    noise: NoiseModel = field(default_factory=NoiseModel)
    delta: float = 0.1
    bounds: StateBounds = DEFAULT_BOUNDS
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    out_dir: Optional[Path] = None
    emit_plots: bool = False
    workers: int = 1
    plateau_band: float = 0.25
    plateau_onset_factor: float = 2.0

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("levels must not be empty")
        if any(k < 0 for k in self.levels):
            raise ValueError("refinement levels must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def grid_for_level(self, level: int) -> Grid1D:
        return Grid1D(
            num_cells=self.base_cells * 2**level,
            num_time_steps=self.base_steps * 2**level,
            t_final=self.t_final,
            domain_length=self.domain_length,
        )


@dataclass
class LevelResult:
    """Records and plateau summary of one refinement level."""

    level: int
    num_cells: int
    h: float
    tau: float
    initial_error: float
    records: list[TimeSeriesRecord]
    plateau: Optional[PlateauReport]
    failure: Optional[str] = None

    @property
    def plateau_level_absolute(self) -> Optional[float]:
        if self.plateau is None or not self.plateau.has_plateau:
            return None
        return self.plateau.plateau_level * self.initial_error


@dataclass
class ExperimentSummary:
    """Everything an experiment produced, plus where the files went."""

    config: ExperimentConfig
    levels: list[LevelResult]
    orders: Optional[list[float]]
    csv_paths: list[Path]
    plot_path: Optional[Path]

    @property
    def failures(self) -> list[LevelResult]:
        return [lv for lv in self.levels if lv.failure is not None]


def run_level(config: ExperimentConfig, level: int) -> LevelResult:
    """Run one refinement level and collect its diagnostics rows.

    A solver failure does not raise; it is recorded with its step and time
    so that the remaining levels of a sweep are unaffected.
    """
    grid = config.grid_for_level(level)
    solution = ManufacturedSolution(gamma=config.gamma)
    params = SchemeParams(
        mu=config.mu,
        gamma=solution.gamma,
        newton_tol=config.newton_tol,
        newton_max_iter=config.newton_max_iter,
        law=IdealGasLaw(),
    )
    initial = initial_observer_state(
        grid, solution, config.noise, config.rho_init, config.m_init
    )
    first = record_step(
        initial, solution, grid, params.law, config.delta, config.bounds
    )
    records = [first]
    initial_error = first.l2_error

    def hook(n, state, report):
        records.append(
            record_step(
                state, solution, grid, params.law, config.delta, config.bounds,
                report=report, initial_error=initial_error,
            )
        )

    failure = None
    try:
        run_simulation(
            grid,
            params,
            solution,
            noise=config.noise,
            initial_state=initial,
            step_hook=hook,
            keep_states=False,
        )
    except SimulationError as exc:
        failure = f"level {level}: {exc}"

    plateau = None
    if len(records) >= 10:
        plateau = detect_plateau(
            [r.t for r in records],
            [r.l2_error_normalized for r in records],
            band=config.plateau_band,
            onset_factor=config.plateau_onset_factor,
        )
    return LevelResult(
        level=level,
        num_cells=grid.num_cells,
        h=grid.h,
        tau=grid.tau,
        initial_error=initial_error,
        records=records,
        plateau=plateau,
        failure=failure,
    )


def _csv_row(record: TimeSeriesRecord) -> str:
    floats = [
        record.t,
        record.l2_error,
        record.l2_error_normalized,
        record.l2_error_vs_projected,
        record.rel_energy,
        record.aux_G,
        record.mod_energy,
        record.dissipation_D,
    ]
    cells = [f"{x:.17g}" for x in floats]
    cells.append(str(record.newton_iterations))
    cells.append(f"{record.residual_max_norm:.17g}")
    cells.append(str(int(record.a1h_pass)))
    return ",".join(cells)


def write_records_csv(path: Path, records: list[TimeSeriesRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# eulerobs timeseries schema v{CSV_SCHEMA_VERSION}", ",".join(CSV_COLUMNS)]
    lines.extend(_csv_row(r) for r in records)
    path.write_text("\n".join(lines) + "\n")
    return path


def _format_summary(summary: "ExperimentSummary") -> str:
    cfg = summary.config
    out = [
        "observer experiment summary",
        f"  mu={cfg.mu:g} gamma={cfg.gamma:g} t_final={cfg.t_final:g} "
        f"rho_init={cfg.rho_init:g} m_init={cfg.m_init} "
        f"noise={cfg.noise.kind} delta={cfg.delta:g}",
        "",
        "  level  cells  h           init_error    plateau(norm)  onset_t    decay_rate",
    ]
    for lv in summary.levels:
        if lv.plateau is not None and lv.plateau.has_plateau:
            plateau = f"{lv.plateau.plateau_level:.6e}"
            onset = f"{lv.plateau.plateau_onset_time:9.3f}"
            rate = (
                f"{lv.plateau.decay_rate:.4f}"
                if lv.plateau.decay_rate is not None
                else "n/a"
            )
        else:
            plateau, onset, rate = "no plateau", "      n/a", "n/a"
        out.append(
            f"  {lv.level:<5d}  {lv.num_cells:<5d}  {lv.h:<10.4e}  "
            f"{lv.initial_error:<12.6e}  {plateau:<13s}  {onset}  {rate}"
        )
    if summary.orders:
        pretty = ", ".join(f"{o:.3f}" for o in summary.orders)
        out.append(f"  observed plateau orders between consecutive levels: {pretty}")
    if summary.failures:
        out.append("  failures:")
        out.extend(f"    {lv.failure}" for lv in summary.failures)
    else:
        out.append("  failures: none")
    return "\n".join(out) + "\n"


def run_experiment(config: ExperimentConfig) -> ExperimentSummary:
    """Run every configured level, write CSVs/summary/plot, return the summary."""
    levels = list(config.levels)
    if config.workers > 1 and len(levels) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(levels))) as pool:
            futures = [pool.submit(run_level, config, k) for k in levels]
            results = [f.result() for f in futures]
    else:
        results = [run_level(config, k) for k in levels]

    orders = None
    usable = [
        lv for lv in results
        if lv.failure is None and lv.plateau is not None and lv.plateau.has_plateau
    ]
    if len(usable) >= 2:
        orders = convergence_table(
            [(lv.h, lv.plateau_level_absolute) for lv in usable]
        )

    csv_paths: list[Path] = []
    plot_path = None
    summary = ExperimentSummary(config, results, orders, csv_paths, plot_path)
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for lv in results:
            csv_paths.append(
                write_records_csv(out / f"mu{config.mu:g}_k{lv.level}.csv", lv.records)
            )
        (out / "summary.txt").write_text(_format_summary(summary))
        if config.emit_plots and csv_paths:
            from .plots import emit_plot

            summary.plot_path = emit_plot(
                csv_paths,
                out / f"error_vs_time_mu{config.mu:g}.svg",
                labels=[f"k={lv.level}" for lv in results],
                title=f"normalized error, mu={config.mu:g}",
            )
    return summary


def summary_text(summary: ExperimentSummary) -> str:
    """Human-readable experiment summary (also written to summary.txt)."""
    return _format_summary(summary)
