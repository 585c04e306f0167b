"""Two-step Darboux factorisation of the linearised operator and the transform S_eps.

All fields are built from log-derivatives. ``q0 = H''/H'`` is evaluated in closed form
from the potential. ``q1 = Z'/Z`` solves the Riccati equation
``q1' = P1 - lambda^2 - q1^2``, integrated from the tail towards x = 0, where the
decaying branch is the attracting one; the equation is written in the kink's log-deficit
so the potential is evaluated exactly between grid nodes.
"""
# Standard Library
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import logging
from typing import TYPE_CHECKING

# External Party
import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import cho_solve_banded
from scipy.linalg import cholesky_banded

# My Modules
from kink_stability.common.numerics import EDGE_NODES
from kink_stability.common.numerics import ODD
from kink_stability.common.numerics import FloatArray
from kink_stability.common.numerics import first_derivative
from kink_stability.common.numerics import line_inner
from kink_stability.common.numerics import line_norm
from kink_stability.common.numerics import second_derivative
from kink_stability.common.numerics import three_point_laplacian
from kink_stability.common.template import KinkStabilityError
from kink_stability.kink import Grid
from kink_stability.kink import KinkProfile
from kink_stability.kink import kink_fields
from kink_stability.kink import log_deficit_slope
from kink_stability.kink import solve_kink
from kink_stability.potential import Potential
from kink_stability.spectral import GridMismatchError

if TYPE_CHECKING:
    # My Modules
    from kink_stability.virial import Weights

LOG_NAME = "kink_stability.darboux"
LOG = logging.getLogger(LOG_NAME)

DEFAULT_EPSILON = 1e-2
RICCATI_RTOL = 1e-12
RICCATI_ATOL = 1e-14
BLOWUP_LIMIT = 1e6
MISMATCH_WARNING = 1e-6
PROJECTION_TOLERANCE = 1e-10
CONJUGATION_SUPPORTS = (4.0, 5.0, 6.0)
CONJUGATION_LENGTH = 20.0
CONJUGATION_POINTS = (101, 201, 401)


class RiccatiBlowUpError(KinkStabilityError):
    """Error for a Riccati solution with a pole, i.e. Z has a zero."""

    default_message = "Riccati equation blew up; lambda^2 is not the ground state of L1"


class TransformError(KinkStabilityError):
    """Error for an invalid regularised transform or a degenerate probe."""

    default_message = "Invalid regularised transform"


def log_derivative_h1(potential: Potential, s: np.ndarray) -> tuple[np.ndarray, ...]:
    """Return (q0, W''(H), W'''(H), H') at log-deficits s, with q0 = H''/H'."""
    H, deficit, Hp = kink_fields(potential, s)  # noqa: N806
    t = -deficit * (2.0 - deficit)
    well = potential.well_factor(H)
    q0 = -(4.0 * H * well + t * potential.well_factor(H, 1)) / np.sqrt(2.0 * well)
    curvature = potential(H, 2, deficit=deficit)
    return q0, curvature, potential(H, 3, deficit=deficit), Hp


def first_partner_potential(potential: Potential, s: np.ndarray) -> np.ndarray:
    """Return P1 = 2 q0^2 - W''(H) at log-deficits s."""
    q0, curvature, _, _ = log_derivative_h1(potential, s)
    return 2.0 * q0**2 - curvature


@dataclass(frozen=True, eq=False)
class DarbouxData:
    """Sampled fields of the factorisation L0 -> L1 -> L2 on [0, L]."""

    grid: Grid
    lambda_sq: float
    q0: FloatArray
    q0p: FloatArray
    q1: FloatArray
    q1p: FloatArray
    Z: FloatArray
    P1: FloatArray
    P1p: FloatArray
    riccati_mismatch: float

    @cached_property
    def P2(self) -> FloatArray:  # noqa: N802
        """Return P2 = lambda^2 + q1^2 - q1'."""
        return self.lambda_sq + self.q1**2 - self.q1p

    @cached_property
    def P2p(self) -> FloatArray:  # noqa: N802
        """Return P2' = 2 q1 q1' - q1'', with q1'' = P1' - 2 q1 q1'."""
        return 4.0 * self.q1 * self.q1p - self.P1p

    @property
    def k1(self) -> FloatArray:
        """Return q1 + q0."""
        return self.q1 + self.q0

    @property
    def k1p(self) -> FloatArray:
        """Return q1' + q0'."""
        return self.q1p + self.q0p

    @property
    def k2(self) -> FloatArray:
        """Return q1' + q1 q0."""
        return self.q1p + self.q1 * self.q0


def build_darboux(profile: KinkProfile, lambda_sq: float) -> DarbouxData:
    """Build the factorisation fields on the profile's grid.

    Args:
        profile (KinkProfile): kink samples, which fix the grid and the potential
        lambda_sq (float): the odd internal mode eigenvalue of L0

    Returns:
        DarbouxData: log-derivatives, Z normalised by Z(0) = 1, P1 and P2

    Raises:
        RiccatiBlowUpError: the decaying solution of L1 Z = lambda^2 Z changes sign
    """
    potential = profile.potential
    s_nodes = profile.log_deficit
    s_tail = float(s_nodes[-1])
    tail_p1 = first_partner_potential(potential, np.array([s_tail]))
    tail_gap = float(tail_p1[0]) - lambda_sq
    if tail_gap <= 0:
        raise RiccatiBlowUpError(f"lambda^2={lambda_sq} is not below P1(L)")

    def rhs(s: float, state: np.ndarray) -> np.ndarray:
        slope = log_deficit_slope(potential, s)
        p1 = first_partner_potential(potential, np.asarray(s))
        return np.array([(p1 - lambda_sq - state[0] ** 2) / slope, state[0] / slope])

    def pole(_: float, state: np.ndarray) -> float:
        return BLOWUP_LIMIT - abs(state[0])

    pole.terminal = True  # type: ignore[attr-defined]
    solution = solve_ivp(
        rhs,
        (s_tail, 0.0),
        [-np.sqrt(tail_gap), 0.0],
        method="DOP853",
        t_eval=s_nodes[::-1],
        rtol=RICCATI_RTOL,
        atol=RICCATI_ATOL,
        events=pole,
    )
    if solution.status != 0 or solution.y.shape[1] != s_nodes.size:
        raise RiccatiBlowUpError(f"lambda^2={lambda_sq}", solution.message)

    q1 = solution.y[0][::-1].copy()
    log_z = solution.y[1][::-1]
    mismatch = abs(float(q1[0]))
    if mismatch > MISMATCH_WARNING:
        LOG.warning("Riccati solution misses q1(0)=0 by %.3g", mismatch)

    q0, curvature, third, Hp = log_derivative_h1(potential, s_nodes)  # noqa: N806
    q0p = curvature - q0**2
    p1 = 2.0 * q0**2 - curvature
    p1p = 4.0 * q0 * q0p - third * Hp
    q1p = p1 - lambda_sq - q1**2
    darboux = DarbouxData(
        profile.grid,
        lambda_sq,
        q0,
        q0p,
        q1,
        q1p,
        np.exp(log_z - log_z[0]),
        p1,
        p1p,
        mismatch,
    )
    LOG.debug(
        "Darboux tails: P1(L)=%.12g P2(L)=%.12g", darboux.P1[-1], darboux.P2[-1]
    )
    return darboux


def _check_samples(grid: Grid, values: np.ndarray) -> np.ndarray:
    samples = np.asarray(values, dtype=float)
    if samples.shape != (grid.n,):
        raise GridMismatchError(f"samples of shape {samples.shape} on grid n={grid.n}")
    return samples


def apply_U1U0(darboux: DarbouxData, values: np.ndarray) -> FloatArray:  # noqa: N802
    """Return f'' - (k1 f)' + k2 f for an odd f.

    Uses fourth-order differences; the last two nodes are set to zero.
    """
    f = _check_samples(darboux.grid, values)
    h = darboux.grid.h
    out = (
        second_derivative(f, h, ODD)
        - darboux.k1 * first_derivative(f, h, ODD)
        + (darboux.k2 - darboux.k1p) * f
    )
    out[0] = 0.0
    out[-EDGE_NODES:] = 0.0
    return out


def conjugation_test_functions(grid: Grid) -> list[FloatArray]:
    """Return x b4, x^3 b5 / 25 and sin(x) b6, with b_a a smooth bump on |x| < a."""
    x = grid.x
    bumps = []
    for support in CONJUGATION_SUPPORTS:
        r = x / support
        inside = r < 1.0
        gap = np.where(inside, 1.0 - r**2, 1.0)
        bumps.append(np.where(inside, np.exp(-1.0 / gap), 0.0))
    return [x * bumps[0], x**3 * bumps[1] / 25.0, np.sin(x) * bumps[2]]


def conjugation_residual(
    profile: KinkProfile, darboux: DarbouxData, values: np.ndarray
) -> float:
    """Return |U1 U0 L0 f - L2 U1 U0 f| / |f| with L2 = -d^2/dx^2 + P2.

    Raises:
        GridMismatchError: profile, fields and f live on different grids
    """
    grid = darboux.grid
    if not profile.on(grid):
        raise GridMismatchError(f"profile grid {profile.grid} differs from {grid}")
    f = _check_samples(grid, values)
    h = grid.h
    curvature = profile.potential(profile.H, 2, deficit=profile.deficit)
    image = apply_U1U0(darboux, f)
    left = apply_U1U0(darboux, -second_derivative(f, h, ODD) + curvature * f)
    right = -second_derivative(image, h, ODD) + darboux.P2 * image
    gap = left - right
    gap[0] = 0.0
    gap[-EDGE_NODES:] = 0.0
    return line_norm(gap, h) / line_norm(f, h)


def conjugation_study(
    potential: Potential,
    lambda_sq: float,
    half_length: float = CONJUGATION_LENGTH,
    points: tuple[int, ...] = CONJUGATION_POINTS,
) -> tuple[FloatArray, FloatArray]:
    """Return the conjugation residuals on grids of halving spacing and their orders.

    Row k of the residuals holds the three test functions on the k-th grid; row k of
    the orders is log2 of the ratio between grids k and k + 1.
    """
    residuals = []
    for n in points:
        grid = Grid(half_length, n)
        profile = solve_kink(potential, grid)
        darboux = build_darboux(profile, lambda_sq)
        residuals.append(
            [
                conjugation_residual(profile, darboux, f)
                for f in conjugation_test_functions(grid)
            ]
        )
    table = np.array(residuals)
    orders = np.log2(table[:-1] / table[1:])
    LOG.debug("conjugation residuals %s, orders %s", table.tolist(), orders.tolist())
    return table, orders


@dataclass(frozen=True, eq=False)
class RegularizedTransform:
    """Factored (1 - eps d^2/dx^2) with Dirichlet nodes at 0 and L."""

    epsilon: float
    grid: Grid
    factor: FloatArray

    @classmethod
    def build(
        cls, grid: Grid, epsilon: float = DEFAULT_EPSILON
    ) -> RegularizedTransform:
        """Factor the tridiagonal matrix once.

        Raises:
            TransformError: epsilon outside (0, 1)
        """
        if not 0 < epsilon < 1:
            raise TransformError(f"epsilon must lie in (0, 1), got {epsilon}")
        size = grid.n - 2
        coupling = epsilon / grid.h**2
        banded = np.empty((2, size))
        banded[0, 0] = 0.0
        banded[0, 1:] = -coupling
        banded[1, :] = 1.0 + 2.0 * coupling
        return cls(epsilon, grid, cholesky_banded(banded))

    def solve(self, values: np.ndarray) -> FloatArray:
        """Return X_eps f."""
        rhs = _check_samples(self.grid, values)
        out = np.zeros(self.grid.n)
        out[1:-1] = cho_solve_banded((self.factor, False), rhs[1:-1])
        return out

    def regularizer(self, values: np.ndarray) -> FloatArray:
        """Return (1 - eps d^2/dx^2) g on the interior nodes."""
        g = _check_samples(self.grid, values)
        out = g - self.epsilon * three_point_laplacian(g, self.grid.h, ODD)
        out[0] = out[-1] = 0.0
        return out


def apply_S_epsilon(  # noqa: N802
    transform: RegularizedTransform, darboux: DarbouxData, values: np.ndarray
) -> FloatArray:
    """Return S_eps f = X_eps U1 U0 f."""
    return transform.solve(apply_U1U0(darboux, values))


def project_out(values: np.ndarray, mode: np.ndarray, h: float) -> FloatArray:
    """Return f - <f, Y> Y for a normalised Y."""
    f = np.asarray(values, dtype=float)
    return f - line_inner(f, mode, h) * mode


def random_probe(
    grid: Grid, mode: np.ndarray, rng: np.random.Generator, bumps: int = 3
) -> FloatArray:
    """Return a random odd sum of Gaussian pairs with the internal mode removed."""
    x = grid.x
    reach = min(10.0, 0.5 * grid.half_length)
    probe = np.zeros(grid.n)
    for _ in range(bumps):
        center = rng.uniform(0.25, reach)
        width = rng.uniform(0.5, 2.5)
        right = np.exp(-(((x - center) / width) ** 2))
        left = np.exp(-(((x + center) / width) ** 2))
        probe += rng.normal() * (right - left)
    probe[-1] = 0.0
    return project_out(probe, mode, grid.h)


def coercivity_ratio(
    transform: RegularizedTransform,
    darboux: DarbouxData,
    mode: np.ndarray,
    values: np.ndarray,
    weights: Weights,
) -> float:
    """Return |rho^2 u| / |rho S_eps u| for u orthogonal to the internal mode.

    Raises:
        TransformError: u is not orthogonal to Y, or S_eps u vanishes for u != 0
    """
    h = darboux.grid.h
    u = _check_samples(darboux.grid, values)
    size = line_norm(u, h)
    if abs(line_inner(u, mode, h)) > PROJECTION_TOLERANCE * size:
        raise TransformError("test function is not orthogonal to the internal mode")
    rho = weights.rho
    denominator = line_norm(rho * apply_S_epsilon(transform, darboux, u), h)
    if denominator == 0.0:
        if size == 0.0:
            return 0.0
        raise TransformError("S_eps annihilates a function orthogonal to Y")
    return line_norm(rho**2 * u, h) / denominator


def commutator_probe(
    transform: RegularizedTransform, darboux: DarbouxData, values: np.ndarray
) -> float:
    """Return |X_eps(P2 f) - P2 X_eps f| / |f|."""
    f = _check_samples(darboux.grid, values)
    h = darboux.grid.h
    commutator = transform.solve(darboux.P2 * f) - darboux.P2 * transform.solve(f)
    commutator[-1] = 0.0
    return line_norm(commutator, h) / line_norm(f, h)


def transform_bound_ratios(
    transform: RegularizedTransform,
    darboux: DarbouxData,
    values: np.ndarray,
    weights: Weights,
) -> tuple[float, float]:
    """Return the weighted bounds of S_eps and its derivative relative to 1/eps."""
    f = _check_samples(darboux.grid, values)
    h = darboux.grid.h
    sigma = weights.sigma_A
    image = apply_S_epsilon(transform, darboux, f)
    reference = line_norm(sigma * f, h) / transform.epsilon
    first = line_norm(sigma * image, h) / reference
    slope = first_derivative(image, h, ODD)
    slope[-EDGE_NODES:] = 0.0
    return first, line_norm(sigma * slope, h) / reference
