from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from model.errors import BadArguments

BoundaryMode = Literal["dirichlet_zero", "neumann_zero"]


@dataclass(frozen=True)
class Grid:
    """
    Uniform 1D mesh on a truncated domain.

    Attributes:
        x_min (float): Left end of the domain.
        x_max (float): Right end of the domain.
        n (int): Number of nodes, boundary nodes included.
        bc (str): "dirichlet_zero" pins both boundary nodes at 0,
            "neumann_zero" mirrors ghost values.
    """
    x_min: float
    x_max: float
    n: int
    bc: BoundaryMode = "dirichlet_zero"

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise BadArguments(f"Grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if self.n < 3:
            raise BadArguments(f"Grid needs at least 3 nodes, got {self.n}")
        if self.bc not in ("dirichlet_zero", "neumann_zero"):
            raise BadArguments(f"Unknown boundary mode: {self.bc}")

    @classmethod
    def symmetric(cls, x_max: float, n: int, bc: BoundaryMode = "dirichlet_zero") -> "Grid":
        """
        Builds the grid [-x_max, x_max].

        Args:
            x_max (float): Half-width.
            n (int): Number of nodes (odd keeps x = 0 on the mesh).
            bc (str): Boundary mode.

        Returns:
            Grid: The symmetric grid.
        """
        return cls(-float(x_max), float(x_max), int(n), bc)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.x_min + np.arange(self.n) * self.dx
        x.setflags(write=False)
        return x

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def interior(self) -> slice:
        """Slice of the unknowns: interior nodes for Dirichlet, all nodes for Neumann."""
        return slice(1, -1) if self.bc == "dirichlet_zero" else slice(0, self.n)

    def doubled(self) -> "Grid":
        """
        Returns the grid on a domain twice as wide with the same spacing.

        Returns:
            Grid: Grid on [2*x_min, 2*x_max] (for symmetric grids) with 2(n-1)+1 nodes.
        """
        center = 0.5 * (self.x_min + self.x_max)
        half = self.width
        return Grid(center - half, center + half, 2 * (self.n - 1) + 1, self.bc)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n, "bc": self.bc}


@dataclass(frozen=True)
class Norms:
    sup: float
    l1: float
    l2: float


@dataclass(frozen=True, eq=False)
class Field:
    """
    One spatial profile sampled on a grid.

    Attributes:
        grid (Grid): The mesh.
        values (np.ndarray): n finite values (stored read-only).
    """
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n,):
            raise BadArguments(f"Field needs {self.grid.n} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise BadArguments("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        values = np.full(grid.n, float(c))
        if grid.bc == "dirichlet_zero":
            values[0] = values[-1] = 0.0
        return cls(grid, values)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.n))

    def norms(self) -> Norms:
        return norms(self)

    def dot(self, other: "Field") -> float:
        """Rectangle-rule pairing dx * sum(self * other)."""
        return float(self.grid.dx * np.dot(self.values, other.values))

    def at(self, x: float) -> float:
        """Linear interpolation of the profile at x."""
        return float(np.interp(x, self.grid.nodes, self.values))

    def is_solution_like(self, band: float = 1e-8) -> bool:
        """Whether 0 <= value <= 1 holds up to the given band."""
        return bool(self.values.min() >= -band and self.values.max() <= 1.0 + band)


def norms(fld: Field) -> Norms:
    """
    Discrete sup, L1 and L2 norms by the rectangle rule with dx weight.

    No trapezoid end-correction is applied: boundary nodes carry the full weight dx.

    Args:
        fld (Field): The field.

    Returns:
        Norms: sup = max |v|, l1 = dx*sum|v|, l2 = sqrt(dx*sum v^2).
    """
    v = fld.values
    dx = fld.grid.dx
    return Norms(
        sup=float(np.max(np.abs(v))),
        l1=float(dx * np.sum(np.abs(v))),
        l2=float(np.sqrt(dx * np.dot(v, v))),
    )


def indicator(grid: Grid, intervals: list[tuple[float, float]]) -> Field:
    """
    Discretizes the indicator of a union of disjoint intervals with partial-cell weighting.

    Each node owns the cell [x_i - dx/2, x_i + dx/2] (clipped to the domain); its value
    is the covered fraction of that cell, so the datum depends continuously on the
    interval endpoints.

    Args:
        grid (Grid): The mesh.
        intervals (list[tuple[float, float]]): (left, right) pairs.

    Returns:
        Field: Values in [0, 1]; Dirichlet boundary nodes are pinned to 0.
    """
    x = grid.nodes
    half = 0.5 * grid.dx
    lo = np.maximum(x - half, grid.x_min)
    hi = np.minimum(x + half, grid.x_max)
    length = hi - lo
    covered = np.zeros(grid.n)
    for left, right in intervals:
        if right <= left:
            continue
        covered += np.clip(np.minimum(hi, right) - np.maximum(lo, left), 0.0, None)
    values = np.clip(covered / length, 0.0, 1.0)
    if grid.bc == "dirichlet_zero":
        values[0] = values[-1] = 0.0
    return Field(grid, values)
