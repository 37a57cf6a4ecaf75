from dataclasses import dataclass, field

import numpy as np

from floquet.bundle import FloquetBundle
from model.errors import BadArguments
from model.trajectory import Trajectory


@dataclass(frozen=True, eq=False)
class OrthogonalityReport:
    """
    Normalized residual rho(t) = |int p u_t| / (||p||_2 ||u_t||_2) along a trajectory.

    Attributes:
        times (np.ndarray): Interior stored times of (0, T_c).
        rho (np.ndarray): Residual at those times; 0 where u_t vanishes.
        degenerate (bool): Whether u_t vanished at some time.
    """
    times: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    degenerate: bool = False

    @property
    def max(self) -> float:
        return float(np.max(self.rho))

    @property
    def median(self) -> float:
        return float(np.median(self.rho))

    def to_dict(self) -> dict:
        return {"max": self.max, "median": self.median, "degenerate": self.degenerate, "samples": int(self.rho.size)}


def orthogonality_residual(traj: Trajectory, bundle: FloquetBundle) -> OrthogonalityReport:
    """
    Measures how far p(t) is from orthogonal to u_t(t) on (0, T_c).

    u_t comes from centered differences of the stored rows; p is read at the same stored
    times, so both must share the storage grid.

    Args:
        traj (Trajectory): Threshold trajectory (rows up to T_c).
        bundle (FloquetBundle): Bundle along traj.

    Returns:
        OrthogonalityReport: Per-time residuals.

    Raises:
        BadArguments: With fewer than three stored times or mismatched time grids.
    """
    t = traj.times
    if t.size < 3:
        raise BadArguments("Orthogonality residual needs at least three stored times")
    idx = np.clip(np.searchsorted(bundle.p.times, t[1:-1] - 1e-9), 0, bundle.p.times.size - 1)
    if np.any(np.abs(bundle.p.times[idx] - t[1:-1]) > 1e-9):
        raise BadArguments("Trajectory and bundle must share their stored times")
    rho = np.zeros(t.size - 2)
    degenerate = False
    for j in range(1, t.size - 1):
        ut = (traj.values[j + 1] - traj.values[j - 1]) / (t[j + 1] - t[j - 1])
        p = bundle.p.normalized(int(idx[j - 1]))
        denom = np.linalg.norm(p) * np.linalg.norm(ut)
        if denom == 0.0:
            degenerate = True
            continue
        rho[j - 1] = abs(float(np.dot(p, ut))) / denom
    return OrthogonalityReport(t[1:-1], rho, degenerate)
