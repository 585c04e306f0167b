"""Schrodinger operators -a d^2/dx^2 + V on a parity sector and their discrete spectra.

The odd sector is a Dirichlet problem on the interior nodes of [0, L]. The even sector
keeps the node at 0 with the ghost value u(-h) = u(h); its first row is symmetrised by
scaling the unknown at 0 by 1/sqrt(2), which makes the Euclidean product of the
unknowns equal to the trapezoidal product of the sampled functions.
"""
# Standard Library
from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field
import logging
from typing import Any

# External Party
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

# My Modules
from kink_stability.common.numerics import FloatArray
from kink_stability.common.numerics import line_inner
from kink_stability.common.numerics import line_norm
from kink_stability.common.numerics import three_point_laplacian
from kink_stability.common.template import KinkStabilityError
from kink_stability.common.template import Outcome
from kink_stability.kink import Grid
from kink_stability.kink import GridError
from kink_stability.kink import KinkProfile
from kink_stability.kink import Sector
from kink_stability.kink import solve_kink
from kink_stability.potential import Potential

LOG_NAME = "kink_stability.spectral"
LOG = logging.getLogger(LOG_NAME)

THRESHOLD_FLAG_FACTOR = 10.0
TAIL_TOLERANCE = 1e-8
SHOOTING_XTOL = 1e-14
RESCALE_LIMIT = 1e100


class GridMismatchError(KinkStabilityError):
    """Error for samples that do not live on the operator's grid."""

    default_message = "Sampled data does not match the grid"


class NoSignChangeError(KinkStabilityError):
    """Error for a shooting bracket without a sign change of the matching function."""

    default_message = "No sign change of the matching function in the bracket"


class SpectralWindowError(KinkStabilityError):
    """Error for an eigenvalue search window above the essential spectrum."""

    default_message = "Search window reaches into the essential spectrum"


class MissingModeError(KinkStabilityError):
    """Error for a computation that needs an odd internal mode where none exists."""

    default_message = "No odd internal mode below the continuum"


@dataclass(frozen=True, eq=False)
class SchrodingerOperator:
    """The operator -a d^2/dx^2 + V restricted to one parity sector."""

    grid: Grid
    V: FloatArray
    v_infinity: float
    sector: Sector
    kinetic: float = 1.0

    def __post_init__(self) -> None:
        """Check the samples against the grid."""
        if np.shape(self.V) != (self.grid.n,):
            raise GridMismatchError(
                f"V has shape {np.shape(self.V)}, grid n={self.grid.n}"
            )
        if self.kinetic <= 0:
            raise GridError(f"kinetic coefficient must be positive, got {self.kinetic}")
        gap = abs(float(self.V[-1]) - self.v_infinity)
        if gap > TAIL_TOLERANCE * (1 + abs(self.v_infinity)):
            LOG.warning("V(L) is %.3g away from its limit %g", gap, self.v_infinity)

    def tridiagonal(self) -> tuple[FloatArray, FloatArray]:
        """Return the diagonal and off-diagonal of the symmetric sector matrix."""
        h2 = self.grid.h**2
        if self.sector is Sector.ODD:
            diagonal = 2 * self.kinetic / h2 + self.V[1:-1]
            off = np.full(diagonal.size - 1, -self.kinetic / h2)
        else:
            diagonal = 2 * self.kinetic / h2 + self.V[:-1]
            off = np.full(diagonal.size - 1, -self.kinetic / h2)
            off[0] *= np.sqrt(2.0)
        return diagonal, off

    def to_samples(self, vectors: FloatArray) -> FloatArray:
        """Map unknown vectors (columns) back to samples on the whole grid."""
        samples = np.zeros((self.grid.n, vectors.shape[1]))
        if self.sector is Sector.ODD:
            samples[1:-1] = vectors
        else:
            samples[:-1] = vectors
            samples[0] *= np.sqrt(2.0)
        return samples

    def apply(self, values: FloatArray) -> FloatArray:
        """Apply the three-point discretisation to samples."""
        lap = three_point_laplacian(values, self.grid.h, int(self.sector))
        out = -self.kinetic * lap + self.V * values
        out[-1] = 0.0
        if self.sector is Sector.ODD:
            out[0] = 0.0
        return out

    def restricted(self, grid: Grid) -> SchrodingerOperator:
        """Return the operator sampled on a coarser grid sharing every other node."""
        if grid.half_length != self.grid.half_length or (self.grid.n - 1) != 2 * (
            grid.n - 1
        ):
            raise GridMismatchError(f"{grid} is not the coarsening of {self.grid}")
        return SchrodingerOperator(
            grid, self.V[::2].copy(), self.v_infinity, self.sector, self.kinetic
        )


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Discrete eigenpairs of one operator below a search bound."""

    operator: SchrodingerOperator
    upper: float
    eigenvalues: FloatArray
    eigenfunctions: FloatArray
    convergence: FloatArray
    near_threshold: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        """Return the number of eigenvalues found."""
        return int(self.eigenvalues.size)

    @property
    def grid(self) -> Grid:
        """Return the grid of the eigenfunctions."""
        return self.operator.grid

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form, without eigenfunctions."""
        return {
            "sector": self.operator.sector.name.lower(),
            "upper": self.upper,
            "eigenvalues": self.eigenvalues.tolist(),
            "convergence": self.convergence.tolist(),
            "near_threshold": [bool(flag) for flag in self.near_threshold],
        }


@dataclass(frozen=True, eq=False)
class Hypothesis1Report:
    """Internal mode check on the odd sector."""

    outcome: Outcome
    omega_sq: float
    lambda_sq: float | None
    Y: FloatArray | None
    multiplicity: int
    in_window: bool | None
    spectrum: SpectralData

    @property
    def lam(self) -> float | None:
        """Return the internal frequency."""
        return None if self.lambda_sq is None else float(np.sqrt(self.lambda_sq))

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "outcome": self.outcome.value,
            "omega_sq": self.omega_sq,
            "lambda_sq": self.lambda_sq,
            "lambda": self.lam,
            "odd_modes": self.multiplicity,
            "window_half_omega_to_omega": self.in_window,
            "spectrum": self.spectrum.to_dict(),
        }


def sturm_count(diagonal: FloatArray, offdiagonal: FloatArray, shift: float) -> int:
    """Return the number of eigenvalues below shift of a symmetric tridiagonal matrix.

    Counts the negative pivots of the LDL^T factorisation of T - shift.
    """
    squares = (np.asarray(offdiagonal, dtype=float) ** 2).tolist()
    tiny = np.finfo(float).eps * (1.0 + float(np.max(np.abs(diagonal))))
    count = 0
    pivot = 1.0
    for i, entry in enumerate(np.asarray(diagonal, dtype=float).tolist()):
        pivot = entry - shift - (squares[i - 1] / pivot if i else 0.0)
        if pivot == 0.0:
            pivot = -tiny
        if pivot < 0.0:
            count += 1
    return count


def build_L0(  # noqa: N802
    potential: Potential, profile: KinkProfile, sector: Sector, grid: Grid | None = None
) -> SchrodingerOperator:
    """Return the linearisation -d^2/dx^2 + W''(H) around the kink.

    Raises:
        GridMismatchError: the profile lives on another grid
    """
    if grid is not None and not profile.on(grid):
        raise GridMismatchError(f"profile grid {profile.grid} differs from {grid}")
    V = potential(profile.H, 2, deficit=profile.deficit)  # noqa: N806
    return SchrodingerOperator(profile.grid, V, potential.omega_sq, sector)


def _eigenpairs(operator: SchrodingerOperator, upper: float) -> tuple[FloatArray, ...]:
    diagonal, off = operator.tridiagonal()
    found = sturm_count(diagonal, off, upper)
    if found == 0:
        return np.empty(0), np.empty((0, operator.grid.n))
    lower = float(np.min(operator.V)) - 1.0
    values, vectors = eigh_tridiagonal(
        diagonal,
        off,
        select="v",
        select_range=(lower, upper),
        lapack_driver="stebz",
    )
    samples = operator.to_samples(vectors)
    h = operator.grid.h
    for column in range(samples.shape[1]):
        samples[:, column] /= line_norm(samples[:, column], h)
        lead = samples[1 if operator.sector is Sector.ODD else 0, column]
        if lead < 0:
            samples[:, column] *= -1
    return values, samples.T


def _orthonormalize(functions: FloatArray, h: float) -> FloatArray:
    basis: list[FloatArray] = []
    for candidate in functions:
        vector = candidate.copy()
        for done in basis:
            vector -= line_inner(vector, done, h) * done
        basis.append(vector / line_norm(vector, h))
    return np.array(basis).reshape(functions.shape)


def discrete_spectrum(
    operator: SchrodingerOperator,
    upper: float | None = None,
    *,
    extrapolate: bool = True,
) -> SpectralData:
    """Return the eigenpairs below ``upper`` for the operator's sector.

    Eigenvalues are isolated by Sturm bisection, eigenvectors by inverse iteration.
    With ``extrapolate`` the same problem is solved on the grid of every other node and
    both eigenvalues and eigenfunctions are Richardson extrapolated; the change is the
    reported convergence estimate.

    Raises:
        SpectralWindowError: upper lies above v_infinity
    """
    limit = operator.v_infinity if upper is None else upper
    if limit > operator.v_infinity:
        raise SpectralWindowError(
            f"upper={limit} above v_infinity={operator.v_infinity}"
        )
    values, functions = _eigenpairs(operator, limit)
    convergence = np.zeros_like(values)
    grid = operator.grid
    if extrapolate and (grid.n - 1) % 2:
        LOG.debug("n=%d has no shared coarse grid, skipping extrapolation", grid.n)
        extrapolate = False
    if extrapolate and values.size:
        coarse = operator.restricted(grid.coarsened())
        coarse_values, coarse_functions = _eigenpairs(coarse, limit)
        matched = min(values.size, coarse_values.size)
        refined_values = values.copy()
        refined_functions = functions.copy()
        for k in range(matched):
            refined_values[k] = (4 * values[k] - coarse_values[k]) / 3
            correction = (functions[k, ::2] - coarse_functions[k]) / 3
            refined_functions[k] += CubicSpline(coarse.grid.x, correction)(grid.x)
        convergence = np.abs(refined_values - values)
        convergence[matched:] = np.inf
        values = refined_values
        functions = _orthonormalize(refined_functions, grid.h)
    near = (limit - values) < THRESHOLD_FLAG_FACTOR * convergence
    for value in values[near]:
        LOG.warning(
            "eigenvalue %.10g is near the threshold %g, possibly a resonance",
            value,
            limit,
        )
    LOG.debug(
        "%s sector: eigenvalues %s (convergence %s)",
        operator.sector.name,
        values,
        convergence,
    )
    return SpectralData(operator, limit, values, functions, convergence, near)


def _matching_value(operator: SchrodingerOperator, energy: float) -> float:
    """Return the tail mismatch of the Numerov solution started at x = 0."""
    h2 = operator.grid.h**2
    f = ((operator.V - energy) / operator.kinetic).tolist()
    if operator.sector is Sector.ODD:
        previous, current = 0.0, operator.grid.h
    else:
        previous = 1.0
        current = (1 + 5 * h2 * f[0] / 12) / (1 - h2 * f[1] / 12)
    for i in range(1, len(f) - 1):
        following = (
            2 * current * (1 + 5 * h2 * f[i] / 12) - previous * (1 - h2 * f[i - 1] / 12)
        ) / (1 - h2 * f[i + 1] / 12)
        previous, current = current, following
        if abs(current) > RESCALE_LIMIT:
            previous, current = previous / RESCALE_LIMIT, current / RESCALE_LIMIT
    decay = np.sqrt(max(operator.v_infinity - energy, 0.0) / operator.kinetic)
    return float(current - np.exp(-decay * operator.grid.h) * previous)


def shooting_eigenvalue(
    operator: SchrodingerOperator, bracket: tuple[float, float]
) -> float:
    """Return the eigenvalue in the bracket by Numerov shooting from x = 0.

    The outward solution is matched to a decaying exponential at L.

    Raises:
        NoSignChangeError: the matching function has the same sign at both ends
    """
    low, high = sorted(bracket)
    low_value = _matching_value(operator, low)
    high_value = _matching_value(operator, high)
    if np.sign(low_value) == np.sign(high_value):
        raise NoSignChangeError(f"bracket ({low}, {high})")
    return float(
        brentq(
            lambda energy: _matching_value(operator, energy),
            low,
            high,
            xtol=SHOOTING_XTOL,
            rtol=4 * np.finfo(float).eps,
        )
    )


def assess_internal_mode(operator: SchrodingerOperator) -> Hypothesis1Report:
    """Return the internal mode report for an odd-sector operator."""
    spectrum = discrete_spectrum(operator, operator.v_infinity)
    inside = np.flatnonzero(spectrum.eigenvalues > 0)
    omega_sq = operator.v_infinity
    if inside.size == 0:
        LOG.info("no odd eigenvalue in (0, %g)", omega_sq)
        return Hypothesis1Report(Outcome.FAIL, omega_sq, None, None, 0, None, spectrum)
    first = int(inside[0])
    lambda_sq = float(spectrum.eigenvalues[first])
    lam, omega = np.sqrt(lambda_sq), np.sqrt(omega_sq)
    outcome = Outcome.INDETERMINATE if spectrum.near_threshold[first] else Outcome.PASS
    return Hypothesis1Report(
        outcome,
        omega_sq,
        lambda_sq,
        spectrum.eigenfunctions[first],
        int(inside.size),
        bool(omega / 2 < lam < omega),
        spectrum,
    )


def check_hypothesis1(
    potential: Potential, profile: KinkProfile | None = None, grid: Grid | None = None
) -> Hypothesis1Report:
    """Check for an odd eigenvalue of the linearisation strictly inside (0, omega^2)."""
    if profile is None:
        profile = solve_kink(potential, grid or Grid.default(potential.omega))
    return assess_internal_mode(build_L0(potential, profile, Sector.ODD))


def zero_mode_residual(potential: Potential, profile: KinkProfile) -> float:
    """Return |L0 H'| / |H'| with the three-point Laplacian."""
    operator = build_L0(potential, profile, Sector.EVEN)
    residual = operator.apply(profile.Hp)
    h = profile.grid.h
    return line_norm(residual, h) / line_norm(profile.Hp, h)


def perturbation_shift(base: Hypothesis1Report, perturbed: Hypothesis1Report) -> float:
    """Return |lambda_eta - lambda| between two internal mode reports."""
    if base.lam is None or perturbed.lam is None:
        return float("nan")
    return abs(perturbed.lam - base.lam)
