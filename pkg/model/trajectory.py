from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from model.errors import BadArguments
from model.grid import Field, Grid


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Time-stamped sequence of profiles on one grid.

    Large linear solutions are stored as mantissa * exp(log_offsets[k]) so that
    exponential growth never overflows.

    Attributes:
        grid (Grid): The mesh.
        times (np.ndarray): Strictly increasing sample times.
        values (np.ndarray): Array of shape (len(times), n); row k is the profile at times[k].
        splice_time (float | None): From this time on the trajectory equals steady_state.
        steady_state (Field | None): The steady state W handed over to at splice_time.
        log_offsets (np.ndarray | None): Per-row log scale; None means all zeros.
    """
    grid: Grid
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    splice_time: Optional[float] = None
    steady_state: Optional[Field] = field(default=None, repr=False)
    log_offsets: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise BadArguments("Trajectory needs at least one time")
        if np.any(np.diff(times) <= 0):
            raise BadArguments("Trajectory times must be strictly increasing")
        if values.shape != (times.size, self.grid.n):
            raise BadArguments(f"Trajectory values need shape {(times.size, self.grid.n)}, got {values.shape}")
        if (self.splice_time is None) != (self.steady_state is None):
            raise BadArguments("splice_time and steady_state must be set together")
        offsets = None
        if self.log_offsets is not None:
            offsets = np.array(self.log_offsets, dtype=float)
            if offsets.shape != times.shape:
                raise BadArguments("log_offsets must match times")
            offsets.setflags(write=False)
        for arr in (times, values):
            arr.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "log_offsets", offsets)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def offset(self, k: int) -> float:
        return 0.0 if self.log_offsets is None else float(self.log_offsets[k])

    def field(self, k: int) -> Field:
        """Profile of row k with its log offset applied."""
        return Field(self.grid, self.values[k] * np.exp(self.offset(k)))

    def normalized(self, k: int) -> np.ndarray:
        """Row k divided by its sup norm (scale-free, safe for huge offsets)."""
        row = self.values[k]
        return row / np.max(np.abs(row))

    def log_sup(self) -> np.ndarray:
        """ln ||row||_sup for every stored time, offsets included."""
        sup = np.max(np.abs(self.values), axis=1)
        offsets = 0.0 if self.log_offsets is None else self.log_offsets
        with np.errstate(divide="ignore"):
            return np.log(sup) + offsets

    def values_at(self, t: float) -> np.ndarray:
        """
        Profile at time t: linear interpolation between stored samples, W past the splice.

        Args:
            t (float): Time in [t0, t_end], or any t >= t0 when a splice is set.

        Returns:
            np.ndarray: Node values (offsets applied).

        Raises:
            BadArguments: If t is outside the defined range.
        """
        if self.splice_time is not None and t >= self.splice_time:
            return self.steady_state.values
        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise BadArguments(f"t = {t} outside trajectory range [{self.times[0]}, {self.times[-1]}]")
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), self.times.size - 1)
        if k == self.times.size - 1 or abs(t - self.times[k]) <= 1e-12:
            return self.values[k] * np.exp(self.offset(k))
        t_lo, t_hi = self.times[k], self.times[k + 1]
        w = (t - t_lo) / (t_hi - t_lo)
        return (1.0 - w) * self.values[k] * np.exp(self.offset(k)) + w * self.values[k + 1] * np.exp(self.offset(k + 1))

    def truncated(self, t_c: float) -> "Trajectory":
        """Samples with time <= t_c."""
        keep = self.times <= t_c + 1e-12
        offsets = None if self.log_offsets is None else self.log_offsets[keep]
        return replace(self, times=self.times[keep], values=self.values[keep], log_offsets=offsets)

    def spliced(self, splice_time: float, steady_state: Field) -> "Trajectory":
        """Copy truncated at splice_time that hands over to steady_state."""
        cut = self.truncated(splice_time)
        return replace(cut, splice_time=float(splice_time), steady_state=steady_state)


FateKind = Literal["extinction", "invasion", "undecided"]


@dataclass(frozen=True)
class Fate:
    """
    Certified long-time fate of a solution.

    Attributes:
        kind (str): "extinction", "invasion" or "undecided".
        time (float): t_cert for certified fates, T_max for undecided ones.
        sup_u (float): sup_x u at that time.
        box_min (float): Minimum of u over the widest run above alpha_inv (0 if none).
        box_half_width (float): Half-width of that run.
    """
    kind: FateKind
    time: float
    sup_u: float
    box_min: float = 0.0
    box_half_width: float = 0.0

    @property
    def certified(self) -> bool:
        return self.kind != "undecided"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "time": self.time,
            "sup_u": self.sup_u,
            "box_min": self.box_min,
            "box_half_width": self.box_half_width,
        }
