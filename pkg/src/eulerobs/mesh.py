"""Uniform 1-D grid, discrete fields, projection operators and quadrature.

Two discrete spaces are used throughout the package: cell-wise constant
fields (one value per cell, used for the density) and continuous piecewise
linear fields (one value per node, used for momentum and velocity). All
integrals are approximated with the trapezoid rule on each cell; a
cell-constant quantity contributes its cell value at both cell endpoints,
for which the trapezoid rule is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Grid1D",
    "CellField",
    "NodalField",
    "FieldLike",
    "sample",
    "project_piecewise_constant",
    "interpolate_nodal",
    "eval_nodal",
    "nodal_density",
    "as_cell_values",
    "as_nodal_values",
    "cell_endpoint_values",
    "trapezoid_nodal",
    "integrate_endpoint_samples",
    "l2_state_distance",
    "l2_error_trapezoid",
    "l2_error_discrete",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform space-time grid on [0, domain_length] x [0, t_final].

    ``num_cells`` cells of width ``h = domain_length / num_cells`` with nodes
    x_i = i*h, and ``num_time_steps`` implicit time steps of size
    ``tau = t_final / num_time_steps``.
    """

    num_cells: int
    num_time_steps: int = 1
    t_final: float = 1.0
    domain_length: float = 1.0

    def __post_init__(self) -> None:
        if self.num_cells < 1:
            raise ValueError(f"num_cells must be >= 1, got {self.num_cells}")
        if self.num_time_steps < 1:
            raise ValueError(
                f"num_time_steps must be >= 1, got {self.num_time_steps}"
            )
        if not self.domain_length > 0:
            raise ValueError("domain_length must be positive")
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")

    @property
    def h(self) -> float:
        return self.domain_length / self.num_cells

    @property
    def tau(self) -> float:
        return self.t_final / self.num_time_steps

    @property
    def num_nodes(self) -> int:
        return self.num_cells + 1

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.domain_length, self.num_nodes)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_time_steps + 1) * self.tau


@dataclass
class CellField:
    """Cell-wise constant field; ``values[i]`` lives on cell [x_i, x_{i+1}]."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    def validate(self, grid: Grid1D) -> None:
        if self.values.shape != (grid.num_cells,):
            raise ValueError(
                f"cell field has {self.values.shape[0]} values, "
                f"grid has {grid.num_cells} cells"
            )


@dataclass
class NodalField:
    """Continuous piecewise linear field given by its node values.

    ``left_constrained`` marks fields whose value at x=0 is pinned by a
    boundary datum and therefore is not a free degree of freedom.
    """

    values: np.ndarray
    left_constrained: bool = False

    def __post_init__(self) -> None:
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    def validate(self, grid: Grid1D) -> None:
        if self.values.shape != (grid.num_nodes,):
            raise ValueError(
                f"nodal field has {self.values.shape[0]} values, "
                f"grid has {grid.num_nodes} nodes"
            )


FieldLike = Union[CellField, NodalField, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def sample(f: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate a scalar function on an array of points.

    Tolerates callables that are not numpy-aware (plain ``float -> float``).
    """
    try:
        out = np.asarray(f(x), dtype=float)
    except (TypeError, ValueError):
        return np.array([float(f(xi)) for xi in x])
    if out.shape != np.shape(x):
        return np.array([float(f(xi)) for xi in x])
    return out


def project_piecewise_constant(f: Callable, grid: Grid1D) -> CellField:
    """Cell-average projection of ``f``, approximated by the trapezoid rule.

    Cell i receives (f(x_i) + f(x_{i+1})) / 2, which matches the exact cell
    average up to O(h^2) and is exact for affine ``f``.
    """
    fx = sample(f, grid.nodes)
    return CellField(0.5 * (fx[:-1] + fx[1:]))


def interpolate_nodal(f: Callable, grid: Grid1D) -> NodalField:
    """Piecewise linear interpolant of ``f``: node i receives f(x_i)."""
    return NodalField(sample(f, grid.nodes))


def eval_nodal(field: NodalField, x, grid: Grid1D):
    """Evaluate a nodal field at coordinates ``x`` by linear interpolation.

    Raises for coordinates outside [0, domain_length].
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > grid.domain_length):
        raise ValueError(
            f"coordinate outside the domain [0, {grid.domain_length}]"
        )
    out = np.interp(xs, grid.nodes, field.values)
    return float(out) if xs.ndim == 0 else out


def nodal_density(rho_cells: np.ndarray) -> np.ndarray:
    """Single-valued nodal density for a cell-constant density field.

    Interior nodes take the average of the two adjacent cell values; boundary
    nodes take the single adjacent cell value. This is the convention used
    whenever a nodal velocity m/rho is needed.
    """
    rho = np.asarray(rho_cells, dtype=float)
    out = np.empty(rho.shape[0] + 1)
    out[1:-1] = 0.5 * (rho[:-1] + rho[1:])
    out[0] = rho[0]
    out[-1] = rho[-1]
    return out


def as_cell_values(field, grid: Grid1D) -> np.ndarray:
    """Coerce a cell-constant input (CellField or length-M array) to an array."""
    if isinstance(field, CellField):
        field.validate(grid)
        return field.values
    arr = np.asarray(field, dtype=float)
    if arr.shape != (grid.num_cells,):
        raise ValueError(f"expected {grid.num_cells} cell values, got shape {arr.shape}")
    return arr


def as_nodal_values(field, grid: Grid1D) -> np.ndarray:
    """Coerce a nodal input (NodalField or length-(M+1) array) to an array."""
    if isinstance(field, NodalField):
        field.validate(grid)
        return field.values
    arr = np.asarray(field, dtype=float)
    if arr.shape != (grid.num_nodes,):
        raise ValueError(f"expected {grid.num_nodes} node values, got shape {arr.shape}")
    return arr


def cell_endpoint_values(field: FieldLike, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """Left/right endpoint samples of a field on every cell.

    Returns two length-M arrays. Cell-constant input contributes its cell
    value at both endpoints, nodal input its node values; callables are
    sampled at the nodes.
    """
    if isinstance(field, CellField):
        field.validate(grid)
        return field.values, field.values
    if isinstance(field, NodalField):
        field.validate(grid)
        v = field.values
        return v[:-1], v[1:]
    if callable(field):
        v = sample(field, grid.nodes)
        return v[:-1], v[1:]
    arr = np.asarray(field, dtype=float)
    if arr.shape == (grid.num_cells,):
        return arr, arr
    if arr.shape == (grid.num_nodes,):
        return arr[:-1], arr[1:]
    raise ValueError(
        f"array of shape {arr.shape} matches neither {grid.num_cells} cells "
        f"nor {grid.num_nodes} nodes"
    )


def trapezoid_nodal(values: np.ndarray, grid: Grid1D) -> float:
    """Composite trapezoid rule for a nodal integrand."""
    v = as_nodal_values(values, grid)
    return grid.h * (v.sum() - 0.5 * (v[0] + v[-1]))


def integrate_endpoint_samples(left: np.ndarray, right: np.ndarray, grid: Grid1D) -> float:
    """Trapezoid rule from per-cell endpoint samples of the integrand."""
    return 0.5 * grid.h * float(np.sum(left + right))


def l2_state_distance(rho_a, v_a, rho_b, v_b, grid: Grid1D) -> float:
    """L2 distance between two (density, velocity) states.

    sqrt( int (rho_a - rho_b)^2 + int (v_a - v_b)^2 ), each integral by the
    per-cell trapezoid rule on endpoint samples. Arguments may be cell
    fields, nodal fields, plain arrays of either length, or callables.
    """
    ral, rar = cell_endpoint_values(rho_a, grid)
    rbl, rbr = cell_endpoint_values(rho_b, grid)
    val, var = cell_endpoint_values(v_a, grid)
    vbl, vbr = cell_endpoint_values(v_b, grid)
    total = integrate_endpoint_samples(
        (ral - rbl) ** 2 + (val - vbl) ** 2,
        (rar - rbr) ** 2 + (var - vbr) ** 2,
        grid,
    )
    return float(np.sqrt(total))


def l2_error_trapezoid(
    rho_cells,
    v_nodes,
    rho_ref: Callable,
    v_ref: Callable,
    grid: Grid1D,
) -> float:
    """L2 error of a discrete state against closed-form reference profiles.

    Within each cell the density difference is evaluated as (cell value -
    rho_ref(x)) at both endpoints and the velocity difference uses the nodal
    values at the endpoints.
    """
    return l2_state_distance(rho_cells, v_nodes, rho_ref, v_ref, grid)


def l2_error_discrete(rho_cells, v_nodes, rho_ref_cells, v_ref_nodes, grid: Grid1D) -> float:
    """L2 distance between two discrete states on the same grid."""
    return l2_state_distance(rho_cells, v_nodes, rho_ref_cells, v_ref_nodes, grid)
