"""Weights, the repulsivity check on P2 and the virial functionals of a state.

Weights are sampled on the half line and are even or odd on the line:
``rho``, ``chi_A``, ``zeta_A``, ``zeta_B``, ``sigma_A`` are even, ``Phi_A``, ``Phi_B``
and ``Psi`` are odd.
"""
# Standard Library
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict
from dataclasses import dataclass
import logging
from typing import Any

# External Party
import numpy as np
from scipy.integrate import quad

# My Modules
from kink_stability.common.numerics import ODD
from kink_stability.common.numerics import FloatArray
from kink_stability.common.numerics import first_derivative
from kink_stability.common.numerics import line_integral
from kink_stability.common.numerics import line_norm
from kink_stability.common.template import KinkStabilityError
from kink_stability.common.template import Outcome
from kink_stability.darboux import DarbouxData
from kink_stability.darboux import RegularizedTransform
from kink_stability.darboux import apply_S_epsilon
from kink_stability.kink import Grid
from kink_stability.kink import Sector
from kink_stability.potential import Potential
from kink_stability.spectral import SchrodingerOperator
from kink_stability.spectral import sturm_count

LOG_NAME = "kink_stability.virial"
LOG = logging.getLogger(LOG_NAME)

DEFAULT_A_FACTOR = 64.0
DEFAULT_B_FACTOR = 16.0
DEFAULT_GAMMAS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
KAPPA_DIVISOR = 12.0
# e^{-1/t} is below the smallest double for t under this
BUMP_FLOOR = 1e-3
TAIL_SHARE = 0.05
TAIL_TOLERANCE = 1e-6


class DomainTooShortError(KinkStabilityError):
    """Error for a repulsivity potential that has not decayed at L."""

    default_message = "x P2' has not decayed at the end of the domain"


class WeightParameterError(KinkStabilityError):
    """Error for weight scales or gamma values outside their ranges."""

    default_message = "Invalid virial parameter"


def _bump_terms(t: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Return psi, psi', psi'' for psi(t) = exp(-1/t) (t > 0), 0 otherwise."""
    live = t > BUMP_FLOOR
    safe = np.where(live, t, 1.0)
    psi = np.where(live, np.exp(-1.0 / safe), 0.0)
    first = psi / safe**2
    second = psi * (1.0 - 2.0 * safe) / safe**4
    return psi, np.where(live, first, 0.0), np.where(live, second, 0.0)


def cutoff(r: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Return chi, chi', chi'' at r >= 0; chi = 1 on [0, 1], 0 beyond 2, smooth."""
    r = np.asarray(r, dtype=float)
    a, a1, a2 = _bump_terms(2.0 - r)
    b, b1, b2 = _bump_terms(r - 1.0)
    # d/dr of psi(2 - r) flips the sign of the odd derivative
    a1 = -a1
    total = a + b
    slope_total = a1 + b1
    numerator = a1 * b - a * b1
    chi = a / total
    chi1 = numerator / total**2
    chi2 = (a2 * b - a * b2) / total**2 - 2.0 * numerator * slope_total / total**3
    return chi, chi1, chi2


def _zeta_terms(
    x: FloatArray, scale: float
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Return zeta and the first two derivatives of log zeta.

    zeta = exp(-(1 - chi(x)) x / scale).
    """
    chi, chi1, chi2 = cutoff(x)
    zeta = np.exp(-(1.0 - chi) * x / scale)
    return zeta, (chi1 * x - 1.0 + chi) / scale, (chi2 * x + 2.0 * chi1) / scale


def _primitive(x: FloatArray, scale: float) -> FloatArray:
    """Return Phi(x), the integral of zeta^2 from 0."""

    def density(y: float) -> float:
        chi = float(cutoff(np.array([y]))[0][0])
        return float(np.exp(-2.0 * (1.0 - chi) * y / scale))

    at_two = 1.0 + quad(density, 1.0, 2.0, epsabs=1e-14, epsrel=1e-13)[0]
    values = np.empty_like(x)
    inner = x <= 1.0
    outer = x >= 2.0
    middle = ~inner & ~outer
    values[inner] = x[inner]
    values[middle] = [
        1.0 + quad(density, 1.0, point, epsabs=1e-14, epsrel=1e-13)[0]
        for point in x[middle]
    ]
    values[outer] = at_two + 0.5 * scale * (
        np.exp(-4.0 / scale) - np.exp(-2.0 * x[outer] / scale)
    )
    return values


@dataclass(frozen=True, eq=False)
class Weights:
    """Weight functions of the virial argument for fixed scales A and B."""

    grid: Grid
    A: float
    B: float
    kappa: float
    rho: FloatArray
    chi_A: FloatArray  # noqa: N815
    chi_A_p: FloatArray  # noqa: N815
    zeta_A: FloatArray  # noqa: N815
    Phi_A: FloatArray
    zeta_B: FloatArray  # noqa: N815
    log_zeta_B_pp: FloatArray  # noqa: N815
    Phi_B: FloatArray
    Psi: FloatArray
    Psi_p: FloatArray
    sigma_A: FloatArray  # noqa: N815

    @classmethod
    def build(
        cls,
        grid: Grid,
        omega_sq: float,
        lambda_sq: float,
        A: float | None = None,  # noqa: N803
        B: float | None = None,  # noqa: N803
    ) -> Weights:
        """Sample every weight on the grid.

        A and B default to 64 / omega and 16 / omega.

        Raises:
            WeightParameterError: B <= 0 or A <= B, or lambda^2 outside (0, omega^2)
        """
        omega = float(np.sqrt(omega_sq))
        scale_a = DEFAULT_A_FACTOR / omega if A is None else A
        scale_b = DEFAULT_B_FACTOR / omega if B is None else B
        if not 0 < scale_b < scale_a:
            raise WeightParameterError(f"need 0 < B < A, got A={scale_a}, B={scale_b}")
        if not 0 < lambda_sq < omega_sq:
            raise WeightParameterError(f"lambda^2={lambda_sq} not in (0, {omega_sq})")
        x = grid.x
        kappa = float(np.sqrt(omega_sq - lambda_sq)) / KAPPA_DIVISOR
        chi_a, chi_a1, _ = cutoff(x / scale_a)
        chi_a1 = chi_a1 / scale_a
        zeta_a, _, _ = _zeta_terms(x, scale_a)
        zeta_b, _, log_zeta_b2 = _zeta_terms(x, scale_b)
        phi_b = _primitive(x, scale_b)
        return cls(
            grid,
            scale_a,
            scale_b,
            kappa,
            1.0 / np.cosh(kappa * x) ** 2,
            chi_a,
            chi_a1,
            zeta_a,
            _primitive(x, scale_a),
            zeta_b,
            log_zeta_b2,
            phi_b,
            chi_a**2 * phi_b,
            2.0 * chi_a * chi_a1 * phi_b + chi_a**2 * zeta_b**2,
            1.0 / np.cosh(2.0 * x / scale_a),
        )

    def columns(self, V_B: FloatArray) -> dict[str, FloatArray]:  # noqa: N803
        """Return the debug table of every weight with V_B."""
        return {
            "x": self.grid.x,
            "rho": self.rho,
            "chi_A": self.chi_A,
            "zeta_A": self.zeta_A,
            "Phi_A": self.Phi_A,
            "zeta_B": self.zeta_B,
            "Phi_B": self.Phi_B,
            "Psi": self.Psi,
            "sigma_A": self.sigma_A,
            "V_B": V_B,
        }


@dataclass(frozen=True)
class Hypothesis3Report:
    """Negative odd eigenvalue counts of -(1 - gamma) d^2/dx^2 + x P2' / 2."""

    gamma_values: tuple[float, ...]
    counts: tuple[int, ...]
    outcome: Outcome
    witness: float | None
    tail_size: float

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "outcome": self.outcome.value,
            "witness_gamma": self.witness,
            "gamma_values": list(self.gamma_values),
            "negative_counts": list(self.counts),
            "tail_size": self.tail_size,
            "note": None if self.witness is not None else "fail on scanned grid",
        }


def repulsivity_operator(darboux: DarbouxData, gamma: float) -> SchrodingerOperator:
    """Return -(1 - gamma) d^2/dx^2 + x P2' / 2 on the odd sector."""
    if not 0 < gamma < 1:
        raise WeightParameterError(f"gamma={gamma} not in (0, 1)")
    potential = 0.5 * darboux.grid.x * darboux.P2p
    return SchrodingerOperator(darboux.grid, potential, 0.0, Sector.ODD, 1.0 - gamma)


def check_hypothesis3(
    darboux: DarbouxData, gamma_grid: Sequence[float] = DEFAULT_GAMMAS
) -> Hypothesis3Report:
    """Count negative odd eigenvalues by Sturm sequences for every gamma.

    Passes when some gamma has none; the witness is the largest such gamma.

    Raises:
        DomainTooShortError: x P2' is not negligible on the last part of the grid
    """
    weighted = np.abs(darboux.grid.x * darboux.P2p)
    start = int((1.0 - TAIL_SHARE) * darboux.grid.n)
    tail = float(np.max(weighted[start:]))
    if tail > TAIL_TOLERANCE * max(1.0, float(np.max(weighted))):
        raise DomainTooShortError(f"|x P2'| reaches {tail:.3g} near L")
    counts = []
    for gamma in gamma_grid:
        diagonal, off = repulsivity_operator(darboux, gamma).tridiagonal()
        counts.append(sturm_count(diagonal, off, 0.0))
    good = [gamma for gamma, count in zip(gamma_grid, counts) if count == 0]
    witness = max(good) if good else None
    LOG.debug("repulsivity counts %s for gammas %s", counts, list(gamma_grid))
    return Hypothesis3Report(
        tuple(gamma_grid), tuple(counts), Outcome.of(witness is not None), witness, tail
    )


def sech_gap_check(weights: Weights, samples: Sequence[FloatArray]) -> float:
    """Return the smallest ratio of |v'|^2 to 2 kappa^2 |sqrt(rho) v|^2 over samples.

    Raises:
        WeightParameterError: a sample vanishes
    """
    h = weights.grid.h
    worst = np.inf
    for v in samples:
        mass = line_integral(weights.rho * v**2, h)
        if mass == 0.0:
            raise WeightParameterError("sech gap probe needs nonzero samples")
        slope = first_derivative(v, h, ODD)
        worst = min(worst, line_integral(slope**2, h) / (2.0 * weights.kappa**2 * mass))
    return float(worst)


def gap_probes(grid: Grid) -> list[FloatArray]:
    """Return odd functions vanishing at L: x exp(-(x/w)^2) and tanh(x) sech(x)."""
    x = grid.x
    widths = [w for w in (0.5, 1.0, 2.0, 4.0, 8.0) if 4.0 * w < grid.half_length]
    probes = [x * np.exp(-((x / width) ** 2)) for width in widths]
    probes.append(np.tanh(x) / np.cosh(x))
    for probe in probes:
        probe[-1] = 0.0
    return probes


def compute_VB(weights: Weights, darboux: DarbouxData) -> FloatArray:  # noqa: N802
    """Return V_B = (log zeta_B)'' / 2 - Phi_B P2' / (2 zeta_B^2)."""
    drift = weights.Phi_B / weights.zeta_B**2 * darboux.P2p
    return 0.5 * weights.log_zeta_B_pp - 0.5 * drift


def vb_quadratic_form(
    weights: Weights, V_B: FloatArray, values: FloatArray  # noqa: N803
) -> tuple[float, float]:
    """Return the form |v'|^2 + (V_B v, v) and its ratio to (rho v, v)."""
    h = weights.grid.h
    slope = first_derivative(values, h, ODD)
    form = line_integral(slope**2 + V_B * values**2, h)
    return form, form / line_integral(weights.rho * values**2, h)


def weighted_bound(weights: Weights, darboux: DarbouxData) -> float:
    """Return the largest |x - Phi_B / zeta_B^2| |P2'| B / rho^2 on the grid."""
    gap = np.abs(weights.grid.x - weights.Phi_B / weights.zeta_B**2)
    return float(np.max(gap * np.abs(darboux.P2p) * weights.B / weights.rho**2))


@dataclass(frozen=True, eq=False)
class ModalDecomposition:
    """Internal mode coordinates and radiation of a state."""

    lam: float
    z1: float
    z2: float
    u1: FloatArray
    u2: FloatArray
    phi1: FloatArray
    phi2: FloatArray

    @property
    def abs_z(self) -> float:
        """Return |z|."""
        return float(np.hypot(self.z1, self.z2))

    @property
    def alpha(self) -> float:
        """Return z1^2 - z2^2."""
        return self.z1**2 - self.z2**2

    @property
    def beta(self) -> float:
        """Return 2 z1 z2."""
        return 2.0 * self.z1 * self.z2


@dataclass(frozen=True)
class FunctionalSample:
    """Virial functionals of one snapshot."""

    I: float  # noqa: E741
    H: float
    J: float
    Z: float
    K: float
    M: float
    alpha: float
    beta: float
    energy: float
    momentum: float

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return asdict(self)


def conserved_quantities(
    potential: Potential, grid: Grid, phi1: FloatArray, phi2: FloatArray
) -> tuple[float, float]:
    """Return the energy and momentum of an odd state on the whole line.

    The energy is the Hamiltonian of the three-point semi-discrete system, with
    gradients on links and the remaining terms at nodes.
    """
    h = grid.h
    links = np.diff(phi1) / h
    density = 0.5 * phi2**2 + potential(phi1)
    energy = line_integral(density, h) + 2.0 * h * float(np.sum(0.5 * links**2))
    full_momentum = np.concatenate([-phi2[:0:-1], phi2])
    full_slope = np.concatenate(
        [first_derivative(phi1, h, ODD)[:0:-1], first_derivative(phi1, h, ODD)]
    )
    momentum = float(np.sum(full_momentum * full_slope) * h)
    return energy, momentum


def functionals(  # noqa: PLR0913
    potential: Potential,
    decomposition: ModalDecomposition,
    weights: Weights,
    darboux: DarbouxData,
    transform: RegularizedTransform,
    g: FloatArray,
    gamma: float,
) -> FunctionalSample:
    """Evaluate the virial functionals on a decomposed state."""
    h = weights.grid.h
    u1, u2 = decomposition.u1, decomposition.u2
    lam = decomposition.lam
    alpha, beta = decomposition.alpha, decomposition.beta
    slope = first_derivative(u1, h, ODD)

    virial = line_integral(
        (weights.Phi_A * slope + 0.5 * weights.zeta_A**2 * u1) * u2, h
    )
    weighted_product = line_integral(weights.sigma_A**2 * u1 * u2, h)
    localized = g * weights.chi_A
    resonant = (
        -alpha * line_integral(u2 * localized, h)
        + 2.0 * lam * beta * line_integral(u1 * localized, h)
        + gamma / (2.0 * lam) * beta * decomposition.abs_z**2
    )
    correction = gamma / (4.0 * lam) * alpha * beta

    v1 = apply_S_epsilon(transform, darboux, u1)
    v2 = apply_S_epsilon(transform, darboux, u2)
    transformed = line_integral(
        (weights.Psi * first_derivative(v1, h, ODD) + 0.5 * weights.Psi_p * v1) * v2, h
    )
    sigma = weights.sigma_A
    local = (
        decomposition.abs_z**4
        + line_norm(sigma * slope, h) ** 2
        + line_norm(sigma * u1, h) ** 2
        + line_norm(sigma * u2, h) ** 2
    )
    energy, momentum = conserved_quantities(
        potential, weights.grid, decomposition.phi1, decomposition.phi2
    )
    return FunctionalSample(
        virial,
        weighted_product,
        resonant,
        correction,
        transformed,
        local,
        alpha,
        beta,
        energy,
        momentum,
    )

