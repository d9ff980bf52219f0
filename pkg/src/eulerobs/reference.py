"""Closed-form reference flow, forcing terms, boundary data and measurements.

The reference state is a smooth prescribed (density, velocity) pair; the
forcing terms are chosen so that it solves the balance laws exactly, which
makes exact error measurement possible. The formulas are transcribed
closed forms; ``pde_residuals`` certifies them against the equations by
finite differences instead of re-deriving them symbolically, since
transcription slips are the dominant risk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gas import GasLaw, enthalpy
from .mesh import CellField, Grid1D, NodalField, interpolate_nodal, project_piecewise_constant, sample

__all__ = [
    "ManufacturedSolution",
    "NoiseModel",
    "NOISE_NONE",
    "measured_velocity",
    "projected_reference",
    "pde_residuals",
]


@dataclass(frozen=True)
class ManufacturedSolution:
    """Smooth traveling-wave reference state on the unit pipe.

        density(x, t)  = 2 + sin(pi (x + t))          in [1, 3]
        velocity(x, t) = sin(pi x) cos(pi t) / 10     bounded by 0.1

    ``mass_source`` and ``momentum_source`` force this pair to solve the
    mass and momentum balance with quadratic friction coefficient ``gamma``.
    The friction coefficient lives here because the momentum forcing depends
    on it; the solver must read gamma from the same place to stay consistent.
    Boundary data: momentum at x=0 (identically zero since the velocity
    vanishes there) and enthalpy at x=1. Formulas assume unit domain length.
    """

    gamma: float = 0.1

    def density(self, x, t):
        return 2.0 + np.sin(np.pi * (np.asarray(x, dtype=float) + t))

    def velocity(self, x, t):
        x = np.asarray(x, dtype=float)
        return 0.1 * np.sin(np.pi * x) * np.cos(np.pi * t)

    def momentum(self, x, t):
        return self.density(x, t) * self.velocity(x, t)

    def eval_state(self, x, t):
        """(density, velocity) at a space-time point or array of points."""
        return self.density(x, t), self.velocity(x, t)

    def mass_source(self, x, t):
        x = np.asarray(x, dtype=float)
        return np.pi * np.cos(np.pi * (t + x)) + 0.1 * np.pi * np.cos(np.pi * t) * (
            np.sin(np.pi * (t + 2.0 * x)) + 2.0 * np.cos(np.pi * x)
        )

    def momentum_source(self, x, t):
        x = np.asarray(x, dtype=float)
        sx = np.sin(np.pi * x)
        ct = np.cos(np.pi * t)
        return 0.01 * sx * (
            self.gamma * ct * np.abs(ct * sx)
            + np.pi * ct**2 * np.cos(np.pi * x)
            - 10.0 * np.pi * np.sin(np.pi * t)
        ) + np.pi * np.cos(np.pi * (t + x)) / (np.sin(np.pi * (t + x)) + 2.0)

    def eval_sources(self, x, t):
        """(mass forcing, momentum forcing) at a space-time point."""
        return self.mass_source(x, t), self.momentum_source(x, t)

    def boundary_momentum(self, t):
        """Momentum datum at the inflow end x=0; zero for all times."""
        return np.asarray(t, dtype=float) * 0.0

    def boundary_enthalpy(self, t):
        """Enthalpy datum at the outflow end x=1."""
        return 1.0 + np.log(2.0 + np.sin(np.pi * (1.0 + np.asarray(t, dtype=float))))

    def boundary_data(self, t):
        """(momentum at x=0, enthalpy at x=1)."""
        return self.boundary_momentum(t), self.boundary_enthalpy(t)


def _time_key(t: float) -> int:
    # Bit pattern of the time stamp, so replaying a step reproduces its noise.
    return int(np.float64(t).view(np.uint64))


@dataclass(frozen=True)
class NoiseModel:
    """Measurement error added to the velocity data at the grid nodes.

    Kinds: ``none``, ``random`` (seeded, uniform in [-amplitude, amplitude],
    reproducible for a given (seed, t, grid)), and ``sin`` (traveling wave
    amplitude * sin(pi frequency (x - t))). Generated values are bounded by
    ``amplitude`` in absolute value.
    """

    kind: str = "none"
    amplitude: float = 0.0
    seed: int = 0
    frequency: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "random", "sin"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        """Parse ``none``, ``random:<amplitude>:<seed>`` or ``sin:<amplitude>:<freq>``."""
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "none":
            if len(parts) != 1:
                raise ValueError(f"noise spec {text!r}: 'none' takes no arguments")
            return cls()
        if kind == "random":
            if len(parts) != 3:
                raise ValueError(f"noise spec {text!r}: expected random:<amplitude>:<seed>")
            return cls(kind="random", amplitude=float(parts[1]), seed=int(parts[2]))
        if kind == "sin":
            if len(parts) != 3:
                raise ValueError(f"noise spec {text!r}: expected sin:<amplitude>:<frequency>")
            return cls(kind="sin", amplitude=float(parts[1]), frequency=float(parts[2]))
        raise ValueError(f"unknown noise kind {kind!r}")

    def nodal_values(self, grid: Grid1D, t: float) -> np.ndarray:
        if self.kind == "none" or self.amplitude == 0.0:
            return np.zeros(grid.num_nodes)
        if self.kind == "random":
            rng = np.random.default_rng([self.seed, _time_key(t)])
            return self.amplitude * rng.uniform(-1.0, 1.0, grid.num_nodes)
        return self.amplitude * np.sin(np.pi * self.frequency * (grid.nodes - t))


NOISE_NONE = NoiseModel()


def measured_velocity(
    solution: ManufacturedSolution,
    grid: Grid1D,
    t: float,
    noise: NoiseModel = NOISE_NONE,
) -> NodalField:
    """Velocity data fed to the nudging term: interpolated truth plus noise."""
    clean = interpolate_nodal(lambda x: solution.velocity(x, t), grid)
    return NodalField(clean.values + noise.nodal_values(grid, t))


def projected_reference(
    solution: ManufacturedSolution, grid: Grid1D, t: float
) -> tuple[CellField, NodalField, NodalField]:
    """Reference state mapped into the discrete spaces at time ``t``.

    Returns (cell-averaged density, interpolated momentum, interpolated
    velocity). Note that the product of the first and third components does
    not reproduce the second; the mismatch is O(h) in the sup norm.
    """
    rho_h = project_piecewise_constant(lambda x: solution.density(x, t), grid)
    m_h = interpolate_nodal(lambda x: solution.momentum(x, t), grid)
    v_h = interpolate_nodal(lambda x: solution.velocity(x, t), grid)
    return rho_h, m_h, v_h


def pde_residuals(
    solution: ManufacturedSolution,
    law: GasLaw,
    xs: np.ndarray,
    ts: np.ndarray,
    step: float = 1e-5,
) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference defects of the two balance laws on a sample grid.

    Substitutes the closed-form state into

        d/dt rho + d/dx (rho v) - mass_source
        d/dt v + d/dx enthalpy(rho, v) + gamma |v| v - momentum_source

    with central differences of size ``step`` for both derivatives, and
    returns the two defect arrays over the tensor grid xs x ts. Near-zero
    output certifies the transcribed forcing formulas.
    """
    x, t = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ts, dtype=float), indexing="ij")

    def ddx(f):
        return (f(x + step, t) - f(x - step, t)) / (2.0 * step)

    def ddt(f):
        return (f(x, t + step) - f(x, t - step)) / (2.0 * step)

    mass = ddt(solution.density) + ddx(solution.momentum) - solution.mass_source(x, t)

    def total_enthalpy(xx, tt):
        return enthalpy(solution.density(xx, tt), solution.velocity(xx, tt), law)

    v = solution.velocity(x, t)
    momentum = (
        ddt(solution.velocity)
        + ddx(total_enthalpy)
        + solution.gamma * np.abs(v) * v
        - solution.momentum_source(x, t)
    )
    return mass, momentum
