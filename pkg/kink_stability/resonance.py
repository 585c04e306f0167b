"""Odd resonance of L0 at twice the internal frequency and the golden rule constant."""
# Standard Library
from __future__ import annotations

from dataclasses import dataclass
from dataclasses import replace
import logging
from typing import Any

# External Party
import numpy as np
from scipy.integrate import simpson
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

# My Modules
from kink_stability.common.numerics import EDGE_NODES
from kink_stability.common.numerics import ODD
from kink_stability.common.numerics import FloatArray
from kink_stability.common.numerics import line_inner
from kink_stability.common.numerics import line_integral
from kink_stability.common.numerics import second_derivative
from kink_stability.common.template import KinkStabilityError
from kink_stability.common.template import Outcome
from kink_stability.kink import Grid
from kink_stability.kink import KinkProfile
from kink_stability.kink import Sector
from kink_stability.kink import kink_fields
from kink_stability.kink import log_deficit_slope
from kink_stability.kink import solve_kink
from kink_stability.potential import Potential
from kink_stability.spectral import GridMismatchError
from kink_stability.spectral import build_L0
from kink_stability.spectral import discrete_spectrum

LOG_NAME = "kink_stability.resonance"
LOG = logging.getLogger(LOG_NAME)

ODE_RTOL = 1e-12
ODE_ATOL = 1e-13
TAIL_FRACTION = 0.25
EXTENSION = 1.5
SIGNIFICANT_DIGITS = 3
GAMMA_TOLERANCE = 1e-6


class ResonanceRegimeError(KinkStabilityError):
    """Error for a doubled frequency that does not reach the continuum."""

    default_message = (
        "resonance frequency below continuum; "
        "the golden rule is ill-posed in this regime"
    )


def wrap_phase(phase: float) -> float:
    """Return the angle in (-pi, pi]."""
    wrapped = float(np.angle(np.exp(1j * phase)))
    return np.pi if wrapped == -np.pi else wrapped


@dataclass(frozen=True, eq=False)
class ResonanceSolution:
    """Bounded odd solution of L0 g = 4 lambda^2 g with g'(0) = 1."""

    grid: Grid
    lambda_sq: float
    g: FloatArray
    gp: FloatArray
    wavenumber: float
    expected_wavenumber: float
    amplitude: float
    phase: float
    residual: float

    def scaled(self, factor: float) -> ResonanceSolution:
        """Return the solution multiplied by a constant."""
        return replace(
            self,
            g=factor * self.g,
            gp=factor * self.gp,
            amplitude=abs(factor) * self.amplitude,
            phase=wrap_phase(self.phase + (np.pi if factor < 0 else 0.0)),
        )

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form, without samples."""
        return {
            "lambda_sq": self.lambda_sq,
            "k": self.wavenumber,
            "k_expected": self.expected_wavenumber,
            "tail_amplitude": self.amplitude,
            "tail_phase": self.phase,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class FermiReport:
    """The golden rule constant with its refinement history.

    ``gamma_refined`` and ``gamma_extended`` are solved again from the kink up, with
    half the spacing and on a domain 1.5 times longer.
    """

    gamma: float
    gamma_refined: float
    gamma_extended: float
    truncation_bound: float
    tolerance: float
    outcome: Outcome
    orthogonality: float
    source_integral: float

    @property
    def discretization_error(self) -> float:
        """Return the change of gamma when the spacing is halved."""
        return abs(self.gamma - self.gamma_refined)

    @property
    def domain_error(self) -> float:
        """Return the change of gamma when the domain grows."""
        return abs(self.gamma - self.gamma_extended)

    @property
    def hypothesis2(self) -> bool:
        """Return True only for a converged nonzero gamma."""
        return self.outcome is Outcome.PASS

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "gamma": self.gamma,
            "gamma_convergence": {
                "h": self.gamma,
                "h/2": self.gamma_refined,
                "L": self.gamma,
                "1.5L": self.gamma_extended,
            },
            "truncation_bound": self.truncation_bound,
            "tolerance": self.tolerance,
            "hypothesis2": self.outcome.value,
            "orthogonality": self.orthogonality,
            "source_integral": self.source_integral,
        }


def _fit_tail(x: FloatArray, g: FloatArray) -> tuple[float, float, float]:
    """Return (k, amplitude, phase) of a sin(k x + theta) fitted to the samples."""
    roots = CubicSpline(x, g).roots(extrapolate=False)
    if roots.size < 2:
        raise ResonanceRegimeError("tail of g does not oscillate on the domain")
    wavenumber = float(np.pi * (roots.size - 1) / (roots[-1] - roots[0]))
    design = np.column_stack([np.sin(wavenumber * x), np.cos(wavenumber * x)])
    (a, b), *_ = np.linalg.lstsq(design, g, rcond=None)
    return wavenumber, float(np.hypot(a, b)), float(np.arctan2(b, a))


def solve_resonance(
    potential: Potential, profile: KinkProfile, lambda_sq: float
) -> ResonanceSolution:
    """Integrate -g'' + W''(H) g = 4 lambda^2 g from g(0) = 0, g'(0) = 1.

    The kink is integrated alongside g in its log-deficit, so W''(H) is exact at every
    stage of the stepper.

    Raises:
        ResonanceRegimeError: 4 lambda^2 <= omega^2
    """
    energy = 4.0 * lambda_sq
    if energy <= potential.omega_sq:
        raise ResonanceRegimeError(
            f"4 lambda^2={energy:g} <= omega^2={potential.omega_sq:g}"
        )

    def rhs(_: float, state: np.ndarray) -> np.ndarray:
        s, g, gp = state
        H, deficit, _slope = kink_fields(potential, s)  # noqa: N806
        curvature = potential(H, 2, deficit=deficit)
        return np.array([log_deficit_slope(potential, s), gp, (curvature - energy) * g])

    grid = profile.grid
    solution = solve_ivp(
        rhs,
        (0.0, grid.half_length),
        [0.0, 0.0, 1.0],
        method="DOP853",
        t_eval=grid.x,
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if not solution.success:
        raise ResonanceRegimeError(solution.message)
    _, g, gp = solution.y
    g[0] = 0.0

    operator = -second_derivative(g, grid.h, ODD) + (
        potential(profile.H, 2, deficit=profile.deficit) - energy
    ) * g
    residual = float(np.max(np.abs(operator[:-EDGE_NODES])) / np.max(np.abs(g)))

    start = int((1.0 - TAIL_FRACTION) * (grid.n - 1))
    wavenumber, amplitude, phase = _fit_tail(grid.x[start:], g[start:])
    expected = float(np.sqrt(energy - potential.omega_sq))
    LOG.debug(
        "resonance: k=%.8f (expected %.8f), amplitude=%.6g",
        wavenumber,
        expected,
        amplitude,
    )
    return ResonanceSolution(
        grid, lambda_sq, g, gp, wavenumber, expected, amplitude, phase, residual
    )


def gamma_integrand(
    potential: Potential, profile: KinkProfile, mode: np.ndarray, g: np.ndarray
) -> FloatArray:
    """Return W'''(H) Y^2 g / 4 on the profile's grid."""
    third = potential(profile.H, 3, deficit=profile.deficit)
    return 0.25 * third * np.asarray(mode) ** 2 * np.asarray(g)


def resolved_gamma(
    potential: Potential, grid: Grid, lambda_sq: float, slope: float = 1.0
) -> float:
    """Return Gamma with the kink, Y and g all solved again on ``grid``.

    The internal mode is the odd eigenpair closest to ``lambda_sq`` and g is scaled to
    g'(0) = ``slope``. NaN when the grid holds no odd eigenvalue.
    """
    profile = solve_kink(potential, grid)
    spectrum = discrete_spectrum(build_L0(potential, profile, Sector.ODD))
    if spectrum.count == 0:
        LOG.warning("no odd eigenvalue on L=%g, n=%d", grid.half_length, grid.n)
        return float("nan")
    k = int(np.argmin(np.abs(spectrum.eigenvalues - lambda_sq)))
    resonance = solve_resonance(potential, profile, float(spectrum.eigenvalues[k]))
    integrand = gamma_integrand(
        potential, profile, spectrum.eigenfunctions[k], slope * resonance.g
    )
    return line_integral(integrand, grid.h)


def _agrees(value: float, reference: float, digits: int) -> bool:
    return abs(value - reference) <= 0.5 * 10.0 ** (1 - digits) * abs(reference)


def compute_gamma(  # noqa: PLR0913
    potential: Potential,
    profile: KinkProfile,
    mode: np.ndarray,
    resonance: ResonanceSolution,
    digits: int = SIGNIFICANT_DIGITS,
    relative_tolerance: float = GAMMA_TOLERANCE,
) -> FermiReport:
    """Return Gamma = 1/4 times the integral of W'''(H) Y^2 g.

    Gamma is solved again from scratch with half the spacing and on a domain 1.5 times
    longer; the outcome is indeterminate unless all three agree to ``digits`` digits.

    Raises:
        GridMismatchError: Y or g live on another grid
    """
    grid = profile.grid
    if np.shape(mode) != (grid.n,) or resonance.grid != grid:
        raise GridMismatchError("internal mode and resonance must share the kink grid")
    third = potential(profile.H, 3, deficit=profile.deficit)
    integrand = gamma_integrand(potential, profile, mode, resonance.g)
    gamma = line_integral(integrand, grid.h)
    slope = float(resonance.gp[0])
    lambda_sq = resonance.lambda_sq
    refined = resolved_gamma(potential, grid.refined(), lambda_sq, slope)
    extended = resolved_gamma(potential, grid.extended(EXTENSION), lambda_sq, slope)

    # W''' Y^2 decays like exp(-2 sqrt(omega^2 - lambda^2) x) beyond L, g stays bounded
    decay = 2.0 * np.sqrt(max(potential.omega_sq - lambda_sq, 0.0))
    size = float(np.max(np.abs(resonance.g)))
    edge = 0.25 * abs(float(third[-1])) * float(mode[-1]) ** 2 * size
    truncation = 2.0 * edge / decay if decay > 0 else float("inf")

    scale = line_integral(np.abs(integrand), grid.h)
    tolerance = relative_tolerance * scale
    converged = _agrees(refined, gamma, digits) and _agrees(extended, gamma, digits)
    if not converged:
        outcome = Outcome.INDETERMINATE
        LOG.warning(
            "gamma=%.6g not stable (refined %.6g, extended %.6g)",
            gamma,
            refined,
            extended,
        )
    else:
        outcome = Outcome.of(abs(gamma) > tolerance)

    source = 0.5 * third * np.asarray(mode) ** 2
    source_integral = float(2.0 * simpson(source * resonance.g, dx=grid.h))
    return FermiReport(
        gamma,
        refined,
        extended,
        truncation,
        tolerance,
        outcome,
        line_inner(mode, resonance.g, grid.h),
        source_integral,
    )
