"""Pressure laws and energy-based diagnostics.

The fluid model is closed by a barotropic pressure law p(rho). Everything
below is built from the pressure potential P, which is tied to the pressure
by p'(rho) = rho * P''(rho). The diagnostics are evaluated with the same
per-cell trapezoid quadrature as the solver, so reported values and solver
behaviour refer to the same discrete integrals.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from .mesh import (
    Grid1D,
    as_cell_values,
    as_nodal_values,
    cell_endpoint_values,
    integrate_endpoint_samples,
    trapezoid_nodal,
)

__all__ = [
    "GasLaw",
    "IdealGasLaw",
    "StateBounds",
    "StateBoundsReport",
    "DEFAULT_BOUNDS",
    "enthalpy",
    "energy",
    "relative_energy",
    "velocity_coupling",
    "relative_dissipation",
    "check_state_bounds",
]


class GasLaw(abc.ABC):
    """Barotropic pressure law together with its pressure potential.

    Implementations supply the pressure p and the potential P with its first
    two derivatives, so the consistency relation p'(rho) = rho * P''(rho) is
    testable. P must be strongly convex on the admissible density range.
    """

    @abc.abstractmethod
    def pressure(self, rho):
        ...

    @abc.abstractmethod
    def potential(self, rho):
        ...

    @abc.abstractmethod
    def potential_prime(self, rho):
        ...

    @abc.abstractmethod
    def potential_double_prime(self, rho):
        ...


@dataclass(frozen=True)
class IdealGasLaw(GasLaw):
    """Ideal gas: p = rho, P = rho log(rho)."""

    def pressure(self, rho):
        return np.asarray(rho, dtype=float)

    def potential(self, rho):
        rho = np.asarray(rho, dtype=float)
        return rho * np.log(rho)

    def potential_prime(self, rho):
        return np.log(rho) + 1.0

    def potential_double_prime(self, rho):
        return 1.0 / np.asarray(rho, dtype=float)


@dataclass(frozen=True)
class StateBounds:
    """Admissible box for discrete states: densities and velocity magnitude."""

    rho_lower: float
    rho_upper: float
    v_bound: float

    def __post_init__(self) -> None:
        if not 0.0 < self.rho_lower <= self.rho_upper:
            raise ValueError(
                f"need 0 < rho_lower <= rho_upper, got ({self.rho_lower}, {self.rho_upper})"
            )
        if not self.v_bound > 0:
            raise ValueError(f"v_bound must be positive, got {self.v_bound}")


DEFAULT_BOUNDS = StateBounds(rho_lower=0.5, rho_upper=4.0, v_bound=1.0)


@dataclass(frozen=True)
class StateBoundsReport:
    """Outcome of the a-posteriori bounds check on one discrete state."""

    passed: bool
    density_ok: bool
    velocity_ok: bool
    rho_min: float
    rho_max: float
    max_abs_velocity: float
    worst_density_cell: int
    worst_velocity_node: int


def _require_positive(rho: np.ndarray) -> None:
    if np.any(np.asarray(rho) <= 0.0):
        raise ValueError("non-positive density")


def enthalpy(rho, v, law: GasLaw):
    """Specific enthalpy 0.5 v^2 + P'(rho). Requires positive density."""
    rho = np.asarray(rho, dtype=float)
    _require_positive(rho)
    return 0.5 * np.asarray(v, dtype=float) ** 2 + law.potential_prime(rho)


def energy(rho, v, grid: Grid1D, law: GasLaw) -> float:
    """Total energy int 0.5 rho v^2 + P(rho) dx by per-cell trapezoid rule.

    ``rho`` and ``v`` may be discrete fields, plain arrays or callables.
    """
    rl, rr = cell_endpoint_values(rho, grid)
    vl, vr = cell_endpoint_values(v, grid)
    _require_positive(rl)
    _require_positive(rr)
    left = 0.5 * rl * vl**2 + law.potential(rl)
    right = 0.5 * rr * vr**2 + law.potential(rr)
    return integrate_endpoint_samples(left, right, grid)


def relative_energy(rho, v, rho_ref, v_ref, grid: Grid1D, law: GasLaw) -> float:
    """Energy of (rho, v) minus its linearization around (rho_ref, v_ref).

    This is H(u) - H(u_ref) - <H'(u_ref), u - u_ref> with the co-state
    H'(u_ref) = (0.5 v_ref^2 + P'(rho_ref), rho_ref v_ref), integrated with
    the trapezoid rule. The integrand is assembled in the algebraically
    equivalent form

        P(rho) - P(rho_ref) - P'(rho_ref)(rho - rho_ref)
        + 0.5 rho (v - v_ref)^2 + v_ref (v - v_ref)(rho - rho_ref),

    which avoids cancellation between the large individual energies.
    """
    rl, rr = cell_endpoint_values(rho, grid)
    vl, vr = cell_endpoint_values(v, grid)
    hl, hr = cell_endpoint_values(rho_ref, grid)
    wl, wr = cell_endpoint_values(v_ref, grid)
    _require_positive(rl)
    _require_positive(rr)
    _require_positive(hl)
    _require_positive(hr)

    def density(rho_s, v_s, rho_t, v_t):
        drho = rho_s - rho_t
        dv = v_s - v_t
        pot = law.potential(rho_s) - law.potential(rho_t) - law.potential_prime(rho_t) * drho
        kin = 0.5 * rho_s * dv**2 + v_t * dv * drho
        return pot + kin

    return integrate_endpoint_samples(
        density(rl, vl, hl, wl), density(rr, vr, hr, wr), grid
    )


def velocity_coupling(rho_cells, v_nodes, rho_ref_cells, v_ref_nodes, grid: Grid1D) -> float:
    """Cross term pairing integrated density mismatch against velocity mismatch.

    With A(x) = -int_0^x rho and A_ref defined likewise, returns
    <A - A_ref, v - v_ref>. The antiderivatives of the cell constants are
    piecewise linear with A(0) = 0 and are integrated exactly; the pairing
    uses the composite trapezoid rule. Added to the relative energy with a
    small weight, this term restores dissipation in the density component.
    """
    drho = as_cell_values(rho_cells, grid) - as_cell_values(rho_ref_cells, grid)
    dv = as_nodal_values(v_nodes, grid) - as_nodal_values(v_ref_nodes, grid)
    anti = np.concatenate(([0.0], -grid.h * np.cumsum(drho)))
    return trapezoid_nodal(anti * dv, grid)


def relative_dissipation(
    rho_ref_cells, v_nodes, v_ref_nodes, grid: Grid1D, gamma: float
) -> float:
    """Friction-induced dissipation of the velocity mismatch.

    (gamma / 4) * int rho_ref (v - v_ref)^2 (|v| + |v_ref|) dx, trapezoid
    rule per cell. Nonnegative for positive reference density; zero exactly
    when the velocities agree at every node.
    """
    hl, hr = cell_endpoint_values(rho_ref_cells, grid)
    vl, vr = cell_endpoint_values(v_nodes, grid)
    wl, wr = cell_endpoint_values(v_ref_nodes, grid)
    left = hl * (vl - wl) ** 2 * (np.abs(vl) + np.abs(wl))
    right = hr * (vr - wr) ** 2 * (np.abs(vr) + np.abs(wr))
    return 0.25 * gamma * integrate_endpoint_samples(left, right, grid)


def check_state_bounds(rho_cells, v_nodes, bounds: StateBounds, grid: Grid1D | None = None) -> StateBoundsReport:
    """A-posteriori check that a state sits inside the admissible box.

    Verifies rho_lower <= rho <= rho_upper on every cell and |v| <= v_bound
    at every node, and reports the worst offenders either way.
    """
    rho = np.asarray(rho_cells.values if hasattr(rho_cells, "values") else rho_cells, dtype=float)
    v = np.asarray(v_nodes.values if hasattr(v_nodes, "values") else v_nodes, dtype=float)
    lo_gap = rho - bounds.rho_lower
    hi_gap = bounds.rho_upper - rho
    density_margin = np.minimum(lo_gap, hi_gap)
    worst_cell = int(np.argmin(density_margin))
    density_ok = bool(density_margin[worst_cell] >= 0.0)
    speed = np.abs(v)
    worst_node = int(np.argmax(speed))
    velocity_ok = bool(speed[worst_node] <= bounds.v_bound)
    return StateBoundsReport(
        passed=density_ok and velocity_ok,
        density_ok=density_ok,
        velocity_ok=velocity_ok,
        rho_min=float(rho.min()),
        rho_max=float(rho.max()),
        max_abs_velocity=float(speed[worst_node]),
        worst_density_cell=worst_cell,
        worst_velocity_node=worst_node,
    )
