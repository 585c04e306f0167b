"""Admissible double-well potentials with exact derivatives.

Every potential is stored in factored form ``W = (phi^2 - 1)^2 Q(phi) + R(phi)`` with
polynomials ``Q`` and ``R``. For admissible potentials ``R`` vanishes, so ``W`` and its
derivatives near the wells are evaluated without cancellation; passing the deficit
``1 - phi`` keeps full relative accuracy in the kink tails.
"""
# Standard Library
from __future__ import annotations

from collections.abc import Mapping
from collections.abc import Sequence
from copy import deepcopy
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from functools import cached_property
import logging
from math import comb
from typing import Any

# External Party
import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import ArrayLike

# My Modules
from kink_stability.common.template import KinkStabilityError
from kink_stability.common.template import Outcome

LOG_NAME = "kink_stability.potential"
LOG = logging.getLogger(LOG_NAME)

MAX_ORDER = 4
ETA_THRESHOLD = 0.25
POSITIVITY_POINTS = 10_000
POSITIVITY_MARGIN = 1e-3
CLAUSE_TOLERANCE = 1e-12
ETA_SAMPLES = 4001

# (phi^2 - 1)^2 in ascending powers
DOUBLE_ZERO = Polynomial([1.0, 0.0, -2.0, 0.0, 1.0])


class InvalidParameterError(KinkStabilityError):
    """Error for a potential family parameter outside its admissible range."""

    default_message = "Invalid potential parameter"


class PotentialValidationError(KinkStabilityError):
    """Error for a potential that fails one of the admissibility clauses."""

    default_message = "Potential fails the admissibility clauses"


class PotentialKind(str, Enum):
    """Enumerate the ways a potential can be specified."""

    PHI4 = "phi4"
    PHI8 = "phi8"
    POLY = "poly"
    PERTURBED = "perturbed"


def _double_zero_derivatives(
    phi: np.ndarray, deficit: np.ndarray | None
) -> list[np.ndarray]:
    """Return S, S', ..., S'''' for S = (phi^2 - 1)^2."""
    t = phi**2 - 1 if deficit is None else -deficit * (2 - deficit)
    return [t**2, 4 * phi * t, 12 * phi**2 - 4, 24 * phi, np.full_like(phi, 24.0)]


@dataclass(frozen=True, eq=False)
class Potential:
    """Even double-well potential with vacua at +-1."""

    name: str
    kind: PotentialKind
    well: Polynomial
    remainder: Polynomial = field(default_factory=lambda: Polynomial([0.0]))
    spec: dict[str, Any] = field(default_factory=dict, repr=False)

    def __call__(
        self, phi: ArrayLike, order: int = 0, *, deficit: ArrayLike | None = None
    ) -> Any:
        """Evaluate the derivative of the given order.

        Args:
            phi (ArrayLike): field values
            order (int): derivative order, 0 to 4
            deficit (ArrayLike | None): 1 - phi, if known more accurately than phi

        Returns:
            float or ndarray matching the shape of ``phi``

        Raises:
            InvalidParameterError: order outside 0..4
        """
        if not 0 <= order <= MAX_ORDER:
            raise InvalidParameterError(f"order {order} not in 0..{MAX_ORDER}")
        field_values = np.asarray(phi, dtype=float)
        gap = None if deficit is None else np.asarray(deficit, dtype=float)
        factors = _double_zero_derivatives(field_values, gap)
        total = self.remainder.deriv(order)(field_values)
        for j in range(order + 1):
            total = total + comb(order, j) * factors[j] * self.well.deriv(order - j)(
                field_values
            )
        return total if np.ndim(total) else float(total)

    def well_factor(self, phi: ArrayLike, order: int = 0) -> Any:
        """Evaluate Q or one of its derivatives."""
        return self.well.deriv(order)(np.asarray(phi, dtype=float))

    @cached_property
    def omega_sq(self) -> float:
        """Return the curvature W''(1) at the wells."""
        return float(self(1.0, 2))

    @property
    def omega(self) -> float:
        """Return the continuum edge frequency."""
        return float(np.sqrt(self.omega_sq))

    def to_spec(self) -> dict[str, Any]:
        """Return the config-file form that ``from_spec`` turns back into this."""
        return deepcopy(self.spec)


@dataclass(frozen=True)
class EtaPerturbation:
    """Even polynomial multiplier eta, giving W_eta = (1 + eta) W."""

    coefficients: tuple[float, ...]

    def __post_init__(self) -> None:
        """Reject eta with odd powers."""
        odd = [
            power
            for power, value in enumerate(self.coefficients)
            if power % 2 and value != 0.0
        ]
        if odd:
            raise InvalidParameterError(f"eta must be even, found odd powers {odd}")

    @property
    def polynomial(self) -> Polynomial:
        """Return eta as a polynomial."""
        return Polynomial(list(self.coefficients) or [0.0])

    @cached_property
    def eta0(self) -> float:
        """Return the bound on the first five derivatives over [-1, 1]."""
        return eta_bound(self)


@dataclass(frozen=True)
class ClauseResult:
    """Outcome of one admissibility clause."""

    name: str
    outcome: Outcome
    value: float
    witness: float | None = None

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "name": self.name,
            "outcome": self.outcome.value,
            "value": self.value,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class ValidationReport:
    """Clause by clause check of a potential."""

    name: str
    clauses: tuple[ClauseResult, ...]
    omega_sq: float

    @property
    def passed(self) -> bool:
        """Return True if every clause passed."""
        return all(clause.outcome is Outcome.PASS for clause in self.clauses)

    @property
    def failures(self) -> list[str]:
        """Return the names of the failing clauses."""
        return [
            clause.name for clause in self.clauses if clause.outcome is not Outcome.PASS
        ]

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "potential": self.name,
            "passed": self.passed,
            "omega_sq": self.omega_sq,
            "clauses": [clause.to_dict() for clause in self.clauses],
        }


def make_phi4() -> Potential:
    """Return W(phi) = (phi^2 - 1)^2 / 4."""
    return Potential(
        "phi4", PotentialKind.PHI4, Polynomial([0.25]), spec={"kind": "phi4"}
    )


def make_phi8_scaled(m: float) -> Potential:
    """Return the scaled phi^8 potential (phi^2 - 1)^2 (phi^2 - m^2)^2 / (4 m^4).

    Raises:
        InvalidParameterError: m <= 1, the inner well would reach the vacua
    """
    if not m > 1:
        raise InvalidParameterError(f"phi8 needs m > 1, got {m}")
    well = Polynomial([m**4, 0.0, -2 * m**2, 0.0, 1.0]) / (4 * m**4)
    return Potential(
        f"phi8(m={m:g})", PotentialKind.PHI8, well, spec={"kind": "phi8", "m": m}
    )


def make_polynomial(
    coefficients: Sequence[float], name: str | None = None
) -> Potential:
    """Return the potential with the given ascending power coefficients.

    The polynomial is divided by (phi^2 - 1)^2; a nonzero remainder survives and makes
    the zero and critical point clauses of ``validate`` fail.
    """
    if not coefficients:
        raise InvalidParameterError("polynomial potential needs coefficients")
    quotient, remainder = divmod(Polynomial(list(coefficients)), DOUBLE_ZERO)
    return Potential(
        name or f"poly{list(coefficients)}",
        PotentialKind.POLY,
        quotient,
        remainder,
        spec={"kind": "poly", "coeffs": list(coefficients)},
    )


def eta_bound(eta: EtaPerturbation) -> float:
    """Return max over k = 0..4 of sup over [-1, 1] of |eta^(k)|."""
    sample = np.linspace(-1.0, 1.0, ETA_SAMPLES)
    poly = eta.polynomial
    return float(
        max(np.max(np.abs(poly.deriv(k)(sample))) for k in range(MAX_ORDER + 1))
    )


def perturb(
    base: Potential, eta: EtaPerturbation, threshold: float = ETA_THRESHOLD
) -> Potential:
    """Return W_eta = (1 + eta) W.

    Raises:
        PotentialValidationError: base or result is not admissible
        InvalidParameterError: eta0 above the threshold
    """
    base_report = validate(base)
    if not base_report.passed:
        raise PotentialValidationError(base.name, base_report.failures)
    if eta.eta0 > threshold:
        raise InvalidParameterError(
            f"eta0={eta.eta0:g} exceeds threshold {threshold:g}"
        )
    factor = 1 + eta.polynomial
    perturbed = Potential(
        f"{base.name}*(1+eta)",
        PotentialKind.PERTURBED,
        base.well * factor,
        base.remainder * factor,
        spec={
            "kind": "perturbed",
            "base": base.to_spec(),
            "eta_coeffs": list(eta.coefficients),
        },
    )
    report = validate(perturbed)
    if not report.passed:
        raise PotentialValidationError(perturbed.name, report.failures)
    LOG.debug(
        "perturbed %s with eta0=%g, omega_sq=%g", base.name, eta.eta0, report.omega_sq
    )
    return perturbed


def validate(potential: Potential) -> ValidationReport:
    """Check the admissibility clauses and report each with a witness point."""
    interval = np.linspace(-1.0, 1.0, 2001)
    scale = max(1.0, float(np.max(np.abs(potential(interval)))))
    tolerance = CLAUSE_TOLERANCE * scale

    symmetric = np.linspace(0.0, 2.0, 2001)
    asymmetry = np.abs(potential(symmetric) - potential(-symmetric))
    worst = int(np.argmax(asymmetry))
    even = ClauseResult(
        "even",
        Outcome.of(bool(asymmetry[worst] <= tolerance)),
        float(asymmetry[worst]),
        float(symmetric[worst]),
    )

    wells = np.array([-1.0, 1.0])
    zero_values = np.abs(potential(wells))
    zeros = ClauseResult(
        "zeros",
        Outcome.of(bool(np.max(zero_values) <= tolerance)),
        float(np.max(zero_values)),
        float(wells[np.argmax(zero_values)]),
    )
    slope_values = np.abs(potential(wells, 1))
    critical = ClauseResult(
        "critical",
        Outcome.of(bool(np.max(slope_values) <= tolerance)),
        float(np.max(slope_values)),
        float(wells[np.argmax(slope_values)]),
    )

    omega_sq = potential.omega_sq
    convex = ClauseResult("convex", Outcome.of(omega_sq > tolerance), omega_sq, 1.0)

    mesh = np.linspace(-1 + POSITIVITY_MARGIN, 1 - POSITIVITY_MARGIN, POSITIVITY_POINTS)
    values = potential(mesh)
    lowest = int(np.argmin(values))
    positive = ClauseResult(
        "positive",
        Outcome.of(bool(values[lowest] > 0)),
        float(values[lowest]),
        float(mesh[lowest]),
    )

    report = ValidationReport(
        potential.name, (even, zeros, critical, convex, positive), omega_sq
    )
    if not report.passed:
        LOG.info("potential %s fails clauses %s", potential.name, report.failures)
    return report


def from_spec(spec: Mapping[str, Any]) -> Potential:
    """Build a potential from its config-file specification.

    Raises:
        InvalidParameterError: unknown kind or missing fields
    """
    try:
        kind = PotentialKind(spec.get("kind"))
    except ValueError as err:
        raise InvalidParameterError(
            f"unknown potential kind {spec.get('kind')!r}"
        ) from err
    try:
        match kind:
            case PotentialKind.PHI4:
                return make_phi4()
            case PotentialKind.PHI8:
                return make_phi8_scaled(float(spec["m"]))
            case PotentialKind.POLY:
                return make_polynomial([float(c) for c in spec["coeffs"]])
            case PotentialKind.PERTURBED:
                eta = EtaPerturbation(tuple(float(c) for c in spec["eta_coeffs"]))
                return perturb(
                    from_spec(spec["base"]),
                    eta,
                    float(spec.get("threshold", ETA_THRESHOLD)),
                )
    except KeyError as err:
        raise InvalidParameterError(f"potential {kind.value} is missing {err}") from err
    raise InvalidParameterError(kind)  # pragma: no cover
