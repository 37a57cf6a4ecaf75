from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from model.errors import BadArguments
from model.grid import Field, Grid, indicator

FamilyKind = Literal["two_bump", "single_block", "scaled_profile", "level_set", "graded"]


def _segment_fraction(a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    """Fraction of a segment, linear from a to b, where the value exceeds c."""
    hi, lo = np.maximum(a, b), np.minimum(a, b)
    span = hi - lo
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(span > 0.0, (hi - c) / span, (lo > c).astype(float))
    return np.clip(frac, 0.0, 1.0)


def superlevel_fraction(p: Field, c: float) -> Field:
    """
    Covered fraction of each node cell by {p > c}, p linear between nodes.

    The result depends continuously on c, so a superlevel-set datum has a threshold
    resolvable below the mesh size.

    Args:
        p (Field): Profile whose superlevel set is taken.
        c (float): Level.

    Returns:
        Field: Values in [0, 1]; Dirichlet boundary nodes are 0.
    """
    v = p.values
    mid_left = np.concatenate([[v[0]], 0.5 * (v[1:] + v[:-1])])
    mid_right = np.concatenate([0.5 * (v[1:] + v[:-1]), [v[-1]]])
    left = _segment_fraction(mid_left, v, c)
    right = _segment_fraction(v, mid_right, c)
    # boundary cells are half cells
    left[0], right[-1] = right[0], left[-1]
    values = 0.5 * (left + right)
    if p.grid.bc == "dirichlet_zero":
        values[0] = values[-1] = 0.0
    return Field(p.grid, values)


@dataclass(frozen=True, eq=False)
class Family:
    """
    A one-parameter family of initial data, nondecreasing in its parameter L.

    Attributes:
        kind (str): "two_bump", "single_block", "scaled_profile", "level_set" or "graded".
        grid (Grid): Mesh the data live on.
        r (float): Half-gap of the two-bump family.
        shape (Field | None): Profile for scaled_profile (datum = clip(L * shape, 0, 1)),
            or the weight p for level_set / graded.
        kappa (float): Curvature of j(u) = u + kappa u^2 / 2 for the graded family.
    """
    kind: FamilyKind
    grid: Grid
    r: float = 0.0
    shape: Optional[Field] = field(default=None, repr=False)
    kappa: float = 1.0

    @classmethod
    def two_bump(cls, grid: Grid, r: float) -> "Family":
        """1 on (-L-r, -r) and (r, L+r)."""
        if r < 0.0:
            raise BadArguments(f"two_bump needs r >= 0, got {r}")
        return cls("two_bump", grid, r=float(r))

    @classmethod
    def single_block(cls, grid: Grid) -> "Family":
        """1 on (-L, L), the r = 0 member of two_bump."""
        return cls("single_block", grid)

    @classmethod
    def scaled_profile(cls, shape: Field) -> "Family":
        if np.any(shape.values < 0.0) or not np.any(shape.values > 0.0):
            raise BadArguments("scaled_profile needs a nonnegative, nonzero shape")
        return cls("scaled_profile", shape.grid, shape=shape)

    @classmethod
    def constant(cls, grid: Grid) -> "Family":
        """u0 = L everywhere: the reaction ODE on a neumann_zero grid, threshold theta."""
        if grid.bc != "neumann_zero":
            raise BadArguments("The constant-datum family needs neumann_zero boundaries")
        return cls.scaled_profile(Field.constant(grid, 1.0))

    @classmethod
    def level_set(cls, p: Field) -> "Family":
        """The superlevel set {p > 1/L}: the bathtub datum for j(u) = u with c = 1/L."""
        return cls("level_set", p.grid, shape=p)

    @classmethod
    def graded(cls, p: Field, kappa: float) -> "Family":
        """clip((L p - 1) / kappa, 0, 1): the bathtub datum for j(u) = u + kappa u^2/2, c = 1/L."""
        if kappa <= 0.0:
            raise BadArguments(f"graded family needs kappa > 0, got {kappa}")
        return cls("graded", p.grid, shape=p, kappa=float(kappa))

    @property
    def label(self) -> str:
        return f"two_bump(r={self.r:g})" if self.kind == "two_bump" else self.kind

    def datum(self, L: float) -> Field:
        """
        Member of the family at parameter L.

        Args:
            L (float): Family parameter, L >= 0.

        Returns:
            Field: The datum, with values in [0, 1].
        """
        if L < 0.0:
            raise BadArguments(f"Family parameter must be nonnegative, got {L}")
        if self.kind == "two_bump":
            return indicator(self.grid, [(-L - self.r, -self.r), (self.r, L + self.r)])
        if self.kind == "single_block":
            return indicator(self.grid, [(-L, L)])
        if self.kind == "scaled_profile":
            return Field(self.grid, np.clip(L * self.shape.values, 0.0, 1.0))
        if L == 0.0:
            return Field.zeros(self.grid)
        if self.kind == "level_set":
            return superlevel_fraction(self.shape, 1.0 / L)
        values = np.clip((L * self.shape.values - 1.0) / self.kappa, 0.0, 1.0)
        if self.grid.bc == "dirichlet_zero":
            values[0] = values[-1] = 0.0
        return Field(self.grid, values)

    def to_dict(self) -> dict:
        return {"family": self.kind, "r": self.r, "kappa": self.kappa if self.kind == "graded" else None}
