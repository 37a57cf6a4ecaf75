from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from model.errors import BadArguments, DomainError, NumericFailure

# Overshoot tolerated around [0, 1] before evaluation is treated as blow-up.
U_BAND = (-0.1, 1.1)
CERTIFICATE_SAMPLES = 4001


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """
    Reaction term f(x, u) = (1 + m(x)) * f0(u).

    Attributes:
        kind (str): "cubic" (f0 = u(1-u)(u-a)) or "custom" (tabulated f0, f0').
        a (float | None): Cubic parameter.
        table (tuple[np.ndarray, np.ndarray, np.ndarray] | None): (u, f0, f0') samples on [0, 1].
        heterogeneity (Callable | None): x -> m(x); None means homogeneous.
        m_bounds (tuple[float, float]): Declared (m_min, m_max) of the multiplier, m_min > -1.
        theta (float): Largest zero of f0 in (0, 1) (nan when the table has none).
        beta_star (float): First positive zero of the primitive F0 (nan when none).
    """
    kind: Literal["cubic", "custom"]
    a: Optional[float] = None
    table: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default=None, repr=False)
    heterogeneity: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    m_bounds: tuple[float, float] = (0.0, 0.0)
    theta: float = field(init=False)
    beta_star: float = field(init=False)

    def __post_init__(self):
        if self.heterogeneity is not None and not -1.0 < self.m_bounds[0] <= self.m_bounds[1]:
            raise BadArguments(f"Heterogeneity bounds need -1 < m_min <= m_max, got {self.m_bounds}")
        if self.kind == "cubic":
            a = self.a
            theta = a
            beta = (4.0 * (1.0 + a) - np.sqrt(16.0 * (1.0 + a) ** 2 - 72.0 * a)) / 6.0
        else:
            u, f0, _ = self.table
            try:
                theta = _largest_interior_zero(u, f0)
                beta = _first_primitive_zero(u, cumulative_trapezoid(f0, u, initial=0.0))
            except ValueError:
                theta = beta = float("nan")
        object.__setattr__(self, "theta", float(theta))
        object.__setattr__(self, "beta_star", float(beta))

    @property
    def homogeneous(self) -> bool:
        return self.heterogeneity is None

    # --- reaction term -----------------------------------------------------

    def f0(self, u):
        if self.kind == "cubic":
            return u * (1.0 - u) * (u - self.a)
        t_u, t_f, _ = self.table
        return np.interp(u, t_u, t_f)

    def f0_prime(self, u):
        if self.kind == "cubic":
            a = self.a
            return -3.0 * u * u + 2.0 * (1.0 + a) * u - a
        t_u, _, t_fp = self.table
        return np.interp(u, t_u, t_fp)

    def primitive(self, u):
        """F0(u) = int_0^u f0; closed-form quartic for the cubic."""
        if self.kind == "cubic":
            a = self.a
            return -u ** 4 / 4.0 + (1.0 + a) * u ** 3 / 3.0 - a * u ** 2 / 2.0
        t_u, t_f, _ = self.table
        return np.interp(u, t_u, cumulative_trapezoid(t_f, t_u, initial=0.0))

    def multiplier(self, x):
        if self.heterogeneity is None:
            return 1.0
        return 1.0 + np.asarray(self.heterogeneity(np.asarray(x, dtype=float)), dtype=float)

    def sup_fprime(self) -> float:
        """K = sup over x, u in [0, 1] of |d_u f|, sampled."""
        u = np.linspace(0.0, 1.0, CERTIFICATE_SAMPLES)
        k0 = float(np.max(np.abs(self.f0_prime(u))))
        if self.heterogeneity is None:
            return k0
        return k0 * (1.0 + self.m_bounds[1])

    def check_on(self, x: np.ndarray) -> None:
        """
        Verifies the declared multiplier bounds on the given nodes.

        Args:
            x (np.ndarray): Grid nodes.

        Raises:
            BadArguments: If m leaves [m_min, m_max] somewhere on the nodes.
        """
        if self.heterogeneity is None:
            return
        m = np.asarray(self.heterogeneity(np.asarray(x, dtype=float)), dtype=float)
        lo, hi = self.m_bounds
        if np.min(m) < lo - 1e-12 or np.max(m) > hi + 1e-12:
            raise BadArguments(f"Multiplier range [{np.min(m):.4g}, {np.max(m):.4g}] exceeds declared {self.m_bounds}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "a": self.a,
            "theta": self.theta,
            "beta_star": self.beta_star,
            "heterogeneous": not self.homogeneous,
        }


def _check_band(u) -> None:
    u = np.asarray(u)
    if u.size and (np.min(u) < U_BAND[0] or np.max(u) > U_BAND[1]):
        raise DomainError(f"u left the band {U_BAND}: range [{np.min(u):.6g}, {np.max(u):.6g}]")


def eval_f(nl: Nonlinearity, x, u):
    """
    Evaluates f(x, u) = (1 + m(x)) f0(u).

    Args:
        nl (Nonlinearity): The reaction term.
        x: Position(s).
        u: State value(s) in [-0.1, 1.1].

    Returns:
        float | np.ndarray: Reaction values.

    Raises:
        DomainError: If u leaves [-0.1, 1.1].
    """
    _check_band(u)
    return nl.multiplier(x) * nl.f0(u)


def eval_fprime(nl: Nonlinearity, x, u):
    """
    Evaluates d_u f(x, u).

    Args:
        nl (Nonlinearity): The reaction term.
        x: Position(s).
        u: State value(s) in [-0.1, 1.1].

    Returns:
        float | np.ndarray: Derivative values.

    Raises:
        DomainError: If u leaves [-0.1, 1.1].
    """
    _check_band(u)
    return nl.multiplier(x) * nl.f0_prime(u)


def bistability_certificate(nl: Nonlinearity) -> tuple[bool, str]:
    """
    Checks the zero and sign conditions of a bistable reaction term on a fine u-sample.

    Checks f(0) = f(1) = 0, f'(0) < 0, f'(1) < 0, F < 0 on (0, beta*), f > 0 on (beta*, 1).
    The sign conditions are only verified at the sample points.

    Args:
        nl (Nonlinearity): The reaction term.

    Returns:
        tuple[bool, str]: (passed, message)
    """
    beta = nl.beta_star
    if not 0.0 < beta < 1.0:
        return False, f"beta* = {beta} is not in (0, 1)"
    if abs(nl.f0(0.0)) > 1e-12 or abs(nl.f0(1.0)) > 1e-12:
        return False, "f(0) and f(1) must vanish"
    if not nl.f0_prime(0.0) < 0.0:
        return False, f"f'(0) = {nl.f0_prime(0.0)} must be negative"
    if not nl.f0_prime(1.0) < 0.0:
        return False, f"f'(1) = {nl.f0_prime(1.0)} must be negative"
    u = np.linspace(0.0, 1.0, CERTIFICATE_SAMPLES)[1:-1]
    below = u[u < beta]
    above = u[u > beta]
    if below.size and np.max(nl.primitive(below)) >= 0.0:
        return False, "F must be negative on (0, beta*)"
    if above.size and np.min(nl.f0(above)) <= 0.0:
        return False, "f must be positive on (beta*, 1)"
    return True, "bistable"


def make_cubic(a: float, heterogeneity: Optional[Callable] = None,
               m_bounds: tuple[float, float] = (0.0, 0.0)) -> Nonlinearity:
    """
    Builds f(u) = u(1-u)(u-a) with theta = a and beta* the root in (a, 1) of
    3 b^2 - 4(1+a) b + 6a = 0.

    Args:
        a (float): Parameter in (0, 1/2).
        heterogeneity (Callable | None): Optional multiplier m(x).
        m_bounds (tuple[float, float]): Declared range of m, m_min > -1.

    Returns:
        Nonlinearity: The certified cubic.

    Raises:
        BadArguments: If a is outside (0, 1/2).
        NumericFailure: If the certificate fails (internal error).
    """
    if not 0.0 < a < 0.5:
        raise BadArguments(f"Cubic parameter a must lie in (0, 1/2), got {a}")
    nl = Nonlinearity("cubic", a=float(a), heterogeneity=heterogeneity, m_bounds=m_bounds)
    passed, message = bistability_certificate(nl)
    if not passed:
        raise NumericFailure(f"Cubic a={a} failed its bistability certificate: {message}")
    return nl


def make_custom(u: np.ndarray, f: np.ndarray, fprime: np.ndarray, require_bistable: bool = True) -> Nonlinearity:
    """
    Builds a tabulated nonlinearity from samples of f0 and f0' on [0, 1].

    Args:
        u (np.ndarray): Increasing samples covering [0, 1].
        f (np.ndarray): f0 at the samples.
        fprime (np.ndarray): f0' at the samples.
        require_bistable (bool): Reject tables failing the certificate; disable
            only for sanity runs such as f = 0.

    Returns:
        Nonlinearity: The tabulated nonlinearity.

    Raises:
        BadArguments: On malformed tables, or failing certificates when required.
    """
    u, f, fprime = (np.asarray(v, dtype=float) for v in (u, f, fprime))
    if u.ndim != 1 or u.shape != f.shape or u.shape != fprime.shape or u.size < 3:
        raise BadArguments("Custom table needs three 1D arrays of equal length >= 3")
    if np.any(np.diff(u) <= 0) or u[0] > 0.0 or u[-1] < 1.0:
        raise BadArguments("Custom table u must be increasing and cover [0, 1]")
    table = (u.copy(), f.copy(), fprime.copy())
    for arr in table:
        arr.setflags(write=False)
    nl = Nonlinearity("custom", table=table)
    if require_bistable:
        passed, message = bistability_certificate(nl)
        if not passed:
            raise BadArguments(f"Custom table rejected: {message}")
    return nl


def _largest_interior_zero(u: np.ndarray, f: np.ndarray) -> float:
    inner = (u > 0.0) & (u < 1.0)
    idx = np.flatnonzero(inner[:-1] & inner[1:] & (np.sign(f[:-1]) != np.sign(f[1:])))
    if idx.size == 0:
        raise ValueError("f has no sign change in (0, 1)")
    i = idx[-1]
    return float(brentq(lambda s: np.interp(s, u, f), u[i], u[i + 1]))


def _first_primitive_zero(u: np.ndarray, big_f: np.ndarray) -> float:
    idx = np.flatnonzero((u[:-1] > 0.0) & (big_f[:-1] < 0.0) & (big_f[1:] >= 0.0))
    if idx.size == 0:
        raise ValueError("the primitive F never returns to zero in (0, 1)")
    i = idx[0]
    return float(brentq(lambda s: np.interp(s, u, big_f), u[i], u[i + 1]))
