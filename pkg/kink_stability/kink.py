"""Static kink H and its first three derivatives on a half-line grid.

The kink is parametrised by its log-deficit ``s = -log(1 - H)``. The first integral
``H' = sqrt(2 W(H))`` turns into ``ds/dx = sqrt(2 Q(H)) (2 - e^{-s})``, which is smooth
and bounded away from zero, so the quadrature ``x(s)`` has no endpoint singularity and
``1 - H = e^{-s}`` keeps full relative accuracy in the tail.
"""
# Standard Library
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
import logging
from typing import NamedTuple

# External Party
import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

# My Modules
from kink_stability.common.numerics import FloatArray
from kink_stability.common.numerics import line_integral
from kink_stability.common.template import KinkStabilityError
from kink_stability.potential import Potential
from kink_stability.potential import PotentialValidationError
from kink_stability.potential import validate

LOG_NAME = "kink_stability.kink"
LOG = logging.getLogger(LOG_NAME)

DEFAULT_POINTS = 4001
DEFAULT_LENGTH_FACTOR = 40.0
TAIL_THRESHOLD = 1e-12
ODE_RTOL = 1e-13
ODE_ATOL = 1e-14
NEWTON_STEPS = 4
# e^{-s} stays a normal double below this
MAX_LOG_DEFICIT = 700.0
DECAY_GROWTH_LIMIT = 10.0


class GridError(KinkStabilityError):
    """Error for a degenerate grid."""

    default_message = "Invalid grid"


class KinkQuadratureError(KinkStabilityError):
    """Error for a kink quadrature that does not converge."""

    default_message = "Kink quadrature did not converge"


class DecayError(KinkStabilityError):
    """Error for tails that do not decay at the rate omega."""

    default_message = "Kink tail does not decay like exp(-omega x)"


class Sector(IntEnum):
    """Parity sector, valued by the parity sign used for ghost nodes."""

    ODD = -1
    EVEN = 1

    @property
    def boundary(self) -> str:
        """Return the boundary condition realising the sector at x = 0."""
        return "dirichlet" if self is Sector.ODD else "neumann"


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, L]; the line is recovered by parity."""

    half_length: float
    n: int

    def __post_init__(self) -> None:
        """Reject grids with no interior."""
        if self.n < 3:
            raise GridError(f"need at least 3 points, got n={self.n}")
        if not np.isfinite(self.half_length) or self.half_length <= 0:
            raise GridError(f"half length must be positive, got {self.half_length}")

    @property
    def h(self) -> float:
        """Return the spacing."""
        return self.half_length / (self.n - 1)

    @cached_property
    def x(self) -> FloatArray:
        """Return the nodes."""
        return np.linspace(0.0, self.half_length, self.n)

    @classmethod
    def default(cls, omega: float, n: int = DEFAULT_POINTS) -> Grid:
        """Return the analysis grid with L = 40 / omega."""
        return cls(DEFAULT_LENGTH_FACTOR / omega, n)

    @classmethod
    def from_spacing(cls, half_length: float, spacing: float) -> Grid:
        """Return the grid on [0, L] whose spacing is closest to the request."""
        return cls(half_length, int(round(half_length / spacing)) + 1)

    def coarsened(self) -> Grid:
        """Return the grid made of every other node."""
        if (self.n - 1) % 2:
            raise GridError(f"n={self.n} cannot be coarsened onto shared nodes")
        return Grid(self.half_length, (self.n - 1) // 2 + 1)

    def refined(self) -> Grid:
        """Return the grid with half the spacing."""
        return Grid(self.half_length, 2 * (self.n - 1) + 1)

    def extended(self, factor: float) -> Grid:
        """Return a longer grid with the same spacing."""
        intervals = int(round((self.n - 1) * factor))
        return Grid(intervals * self.h, intervals + 1)

    def resolves_tail(self, omega: float) -> bool:
        """Return True if exp(-omega L) is below the tail threshold."""
        return bool(np.exp(-omega * self.half_length) < TAIL_THRESHOLD)


class DecayConstants(NamedTuple):
    """Constants C_k with |H^(k)| <= C_k exp(-omega x) (k=0 bounds 1 - H)."""

    c0: float
    c1: float
    c2: float
    c3: float
    short_domain: bool


@dataclass(frozen=True, eq=False)
class KinkProfile:
    """Samples of the kink and its derivatives on [0, L]."""

    grid: Grid
    potential: Potential
    log_deficit: FloatArray
    H: FloatArray
    Hp: FloatArray
    Hpp: FloatArray
    Hppp: FloatArray

    @property
    def omega(self) -> float:
        """Return sqrt(W''(1))."""
        return self.potential.omega

    @cached_property
    def deficit(self) -> FloatArray:
        """Return 1 - H without cancellation."""
        return np.exp(-self.log_deficit)

    def on(self, grid: Grid) -> bool:
        """Return True if the profile is sampled on the given grid."""
        return self.grid == grid


def log_deficit_slope(potential: Potential, s: np.ndarray | float) -> np.ndarray:
    """Return ds/dx along the kink as a function of s."""
    deficit = np.exp(-np.asarray(s, dtype=float))
    phi = 1.0 - deficit
    return np.sqrt(2.0 * potential.well_factor(phi)) * (2.0 - deficit)


def kink_fields(potential: Potential, s: np.ndarray | float) -> tuple[np.ndarray, ...]:
    """Return (H, 1 - H, H') at the given log-deficits."""
    s_values = np.asarray(s, dtype=float)
    deficit = np.exp(-s_values)
    field_values = -np.expm1(-s_values)
    root = np.sqrt(2.0 * potential.well_factor(field_values))
    slope = root * deficit * (2.0 - deficit)
    return field_values, deficit, slope


def solve_kink(potential: Potential, grid: Grid) -> KinkProfile:
    """Compute the kink on the grid.

    The quadrature ``x(s)`` is integrated with an adaptive eighth-order scheme, inverted
    with a monotone cubic and polished by Newton steps on the dense output.

    Args:
        potential (Potential): admissible potential
        grid (Grid): target grid

    Returns:
        KinkProfile: samples of H, H', H'', H'''

    Raises:
        PotentialValidationError: the potential fails validation
        KinkQuadratureError: the quadrature or the inversion fails
    """
    report = validate(potential)
    if not report.passed:
        raise PotentialValidationError(potential.name, report.failures)
    if not grid.resolves_tail(potential.omega):
        LOG.warning(
            "grid L=%g leaves exp(-omega L)=%.3g above %g",
            grid.half_length,
            np.exp(-potential.omega * grid.half_length),
            TAIL_THRESHOLD,
        )

    s_max = min(2.0 * potential.omega * grid.half_length + 20.0, MAX_LOG_DEFICIT)
    solution = solve_ivp(
        lambda s, _: np.atleast_1d(1.0 / log_deficit_slope(potential, s)),
        (0.0, s_max),
        [0.0],
        method="DOP853",
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
        dense_output=True,
    )
    if not solution.success or not np.all(np.isfinite(solution.y)):
        raise KinkQuadratureError(potential.name, solution.message)
    if solution.y[0, -1] < grid.half_length:
        raise KinkQuadratureError(
            f"x(s_max)={solution.y[0, -1]:g} does not reach L={grid.half_length:g}"
        )
    LOG.debug("kink quadrature used %d steps up to s=%g", solution.t.size, s_max)

    s = PchipInterpolator(solution.y[0], solution.t)(grid.x)
    for _ in range(NEWTON_STEPS):
        s = np.clip(s, 0.0, s_max)
        s = s - (solution.sol(s)[0] - grid.x) * log_deficit_slope(potential, s)
    s[0] = 0.0
    mismatch = float(np.max(np.abs(solution.sol(s)[0] - grid.x)))
    if mismatch > 1e-10 * (1.0 + grid.half_length):
        raise KinkQuadratureError(f"inversion left a mismatch of {mismatch:.3g}")

    H, deficit, Hp = kink_fields(potential, s)  # noqa: N806
    Hpp = potential(H, 1, deficit=deficit)  # noqa: N806
    Hppp = potential(H, 2, deficit=deficit) * Hp  # noqa: N806
    return KinkProfile(grid, potential, s, H, Hp, Hpp, Hppp)


def decay_constants(profile: KinkProfile) -> DecayConstants:
    """Return the smallest constants of the exponential decay bounds on the grid.

    Raises:
        DecayError: a ratio keeps growing in the tail
    """
    grid = profile.grid
    weight = np.exp(profile.omega * grid.x)
    ratios = [
        profile.deficit * weight,
        np.abs(profile.Hp) * weight,
        np.abs(profile.Hpp) * weight,
        np.abs(profile.Hppp) * weight,
    ]
    quarter = (3 * grid.n) // 4
    for order, ratio in enumerate(ratios):
        if not np.all(np.isfinite(ratio)):
            raise DecayError(f"non-finite ratio for derivative {order}")
        if ratio[-1] > DECAY_GROWTH_LIMIT * max(ratio[quarter], np.finfo(float).tiny):
            raise DecayError(f"ratio for derivative {order} grows across the tail")
    short = not grid.resolves_tail(profile.omega)
    if short:
        LOG.warning(
            "decay constants on a short domain: exp(-omega L)=%.3g",
            np.exp(-profile.omega * grid.half_length),
        )
    c0, c1, c2, c3 = (float(np.max(ratio)) for ratio in ratios)
    return DecayConstants(c0, c1, c2, c3, short)


def kink_energy(profile: KinkProfile) -> float:
    """Return the rest energy, the integral of H'^2 over the line."""
    return line_integral(profile.Hp**2, profile.grid.h)
