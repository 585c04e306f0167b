"""Odd perturbations of the kink under the nonlinear Klein-Gordon flow.

The field lives on the half line with phi1(0) = 0 and the value at L held at the static
kink. Space is the three-point Laplacian, time is kick-drift-kick leapfrog, and an
absorbing layer damps phi2 on the outer part of the grid. Modal coordinates use the odd
eigenpair of the semi-discrete linearisation around the discrete kink, so the modal
equations hold to time-stepping error.
"""
# Standard Library
from __future__ import annotations

from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
import logging
from pathlib import Path
from typing import Any

# External Party
import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import solve_banded

# My Modules
from kink_stability.common.numerics import ODD
from kink_stability.common.numerics import FloatArray
from kink_stability.common.numerics import first_derivative
from kink_stability.common.numerics import line_inner
from kink_stability.common.numerics import line_norm
from kink_stability.common.numerics import three_point_laplacian
from kink_stability.common.template import ConfigError
from kink_stability.common.template import KinkStabilityError
from kink_stability.config import SimulationConfig
from kink_stability.darboux import DarbouxData
from kink_stability.darboux import RegularizedTransform
from kink_stability.darboux import build_darboux
from kink_stability.kink import Grid
from kink_stability.kink import KinkProfile
from kink_stability.kink import KinkQuadratureError
from kink_stability.kink import Sector
from kink_stability.kink import solve_kink
from kink_stability.potential import Potential
from kink_stability.resonance import FermiReport
from kink_stability.resonance import ResonanceSolution
from kink_stability.resonance import compute_gamma
from kink_stability.resonance import solve_resonance
from kink_stability.spectral import GridMismatchError
from kink_stability.spectral import MissingModeError
from kink_stability.spectral import SchrodingerOperator
from kink_stability.spectral import assess_internal_mode
from kink_stability.spectral import build_L0
from kink_stability.spectral import discrete_spectrum
from kink_stability.virial import FunctionalSample
from kink_stability.virial import ModalDecomposition
from kink_stability.virial import Weights
from kink_stability.virial import functionals

LOG_NAME = "kink_stability.kgsim"
LOG = logging.getLogger(LOG_NAME)

CFL_LIMIT = 0.5
NEWTON_ITERATIONS = 12
NEWTON_STEP_TOLERANCE = 1e-15
EDGE_SHARE = 0.05

TRAJECTORY_COLUMNS = (
    "t",
    "z1",
    "z2",
    "abs_z",
    "I",
    "Hfun",
    "J",
    "Zfun",
    "K",
    "M",
    "E",
    "local_norm",
)


class CFLViolationError(KinkStabilityError):
    """Error for a time step above half the grid spacing."""

    default_message = "Time step violates dt <= 0.5 h"


class InitialDataTooLargeError(KinkStabilityError):
    """Error for initial data outside the small data regime."""

    default_message = "Initial perturbation exceeds delta_max"


class SimulationInstabilityError(KinkStabilityError):
    """Error for a run that produced non-finite values."""

    default_message = "Simulation became unstable"


def nonlinear_term(
    potential: Potential, static: FloatArray, perturbation: FloatArray
) -> FloatArray:
    """Return N = W'(H + phi) - W'(H) - W''(H) phi."""
    return (
        potential(static + perturbation, 1)
        - potential(static, 1)
        - potential(static, 2) * perturbation
    )


def quadratic_source(
    potential: Potential, static: FloatArray, mode: FloatArray
) -> FloatArray:
    """Return R0 = W'''(H) Y^2 / 2, the quadratic part of N along the mode."""
    return 0.5 * potential(static, 3) * mode**2


def field_force(potential: Potential, phi1: FloatArray, h: float) -> FloatArray:
    """Return phi1'' - W'(phi1) with both end nodes held fixed."""
    force = three_point_laplacian(phi1, h, ODD) - potential(phi1, 1)
    force[0] = 0.0
    force[-1] = 0.0
    return force


def discrete_static_kink(potential: Potential, profile: KinkProfile) -> FloatArray:
    """Return the kink of the three-point semi-discrete equation.

    Newton's method starts from the continuum kink; the end nodes stay at 0 and H(L).

    Raises:
        KinkQuadratureError: Newton's method does not settle
    """
    h = profile.grid.h
    phi = profile.H.copy()
    size = phi.size - 2
    coupling = 1.0 / h**2
    banded = np.zeros((3, size))
    banded[0, 1:] = coupling
    banded[2, :-1] = coupling
    for iteration in range(NEWTON_ITERATIONS):
        residual = field_force(potential, phi, h)
        banded[1] = -2.0 * coupling - potential(phi[1:-1], 2)
        update = solve_banded((1, 1), banded, residual[1:-1])
        phi[1:-1] -= update
        if np.max(np.abs(update)) < NEWTON_STEP_TOLERANCE:
            LOG.debug("discrete kink settled after %d Newton steps", iteration + 1)
            return phi
    final = float(np.max(np.abs(field_force(potential, phi, h))))
    if final > 1e-9:
        raise KinkQuadratureError(f"discrete kink residual {final:.3g}")
    return phi


def sponge_profile(grid: Grid, fraction: float, strength: float) -> FloatArray:
    """Return the damping rate, quadratic from 0 up to ``strength`` at L."""
    start = (1.0 - fraction) * grid.half_length
    width = max(fraction * grid.half_length, grid.h)
    depth = np.clip((grid.x - start) / width, 0.0, None)
    return strength * depth**2


@dataclass(frozen=True, eq=False)
class SimulationSetup:
    """Grid, discrete kink, modal data and weights of a simulation."""

    potential: Potential
    grid: Grid
    dt: float
    profile: KinkProfile
    static: FloatArray
    lambda_sq: float
    mode: FloatArray
    darboux: DarbouxData
    transform: RegularizedTransform
    resonance: ResonanceSolution
    fermi: FermiReport
    weights: Weights
    sponge: FloatArray
    window: float
    stride: int

    @property
    def lam(self) -> float:
        """Return the discrete internal frequency."""
        return float(np.sqrt(self.lambda_sq))

    @property
    def cadence(self) -> float:
        """Return the time between records."""
        return self.stride * self.dt


def prepare_simulation(
    potential: Potential,
    config: SimulationConfig,
    epsilon: float,
    A: float | None = None,  # noqa: N803
    B: float | None = None,  # noqa: N803
) -> SimulationSetup:
    """Build everything a run needs on the simulation grid.

    Raises:
        MissingModeError: the linearisation has no odd internal mode
        CFLViolationError: dt_factor above one half
    """
    omega = potential.omega
    if config.dt_factor > CFL_LIMIT:
        raise CFLViolationError(f"dt_factor={config.dt_factor}")
    grid = Grid.from_spacing(config.length_factor / omega, config.h_factor / omega)
    LOG.info("%s starting simulation setup %s", "-" * 20, "-" * 20)
    profile = solve_kink(potential, grid)
    continuum = assess_internal_mode(build_L0(potential, profile, Sector.ODD))
    if continuum.lambda_sq is None or continuum.Y is None:
        raise MissingModeError(potential.name)

    static = discrete_static_kink(potential, profile)
    semi_discrete = SchrodingerOperator(
        grid, potential(static, 2), potential.omega_sq, Sector.ODD
    )
    discrete = discrete_spectrum(semi_discrete, extrapolate=False)
    positive = np.flatnonzero(discrete.eigenvalues > 0)
    if positive.size == 0:
        raise MissingModeError(f"{potential.name} on the simulation grid")
    first = int(positive[0])

    resonance = solve_resonance(potential, profile, continuum.lambda_sq)
    dt = config.dt_factor * grid.h
    stride = max(1, int(round(config.cadence / dt)))
    setup = SimulationSetup(
        potential,
        grid,
        dt,
        profile,
        static,
        float(discrete.eigenvalues[first]),
        discrete.eigenfunctions[first],
        build_darboux(profile, continuum.lambda_sq),
        RegularizedTransform.build(grid, epsilon),
        resonance,
        compute_gamma(potential, profile, continuum.Y, resonance),
        Weights.build(grid, potential.omega_sq, continuum.lambda_sq, A, B),
        sponge_profile(grid, config.sponge_fraction, config.sponge_strength),
        config.window_factor / omega,
        stride,
    )
    LOG.debug(
        "simulation grid n=%d h=%.4g dt=%.4g, discrete lambda^2=%.10g",
        grid.n,
        grid.h,
        dt,
        setup.lambda_sq,
    )
    return setup


@dataclass(frozen=True, eq=False)
class FieldState:
    """Fields at one time; ``force`` caches phi1'' - W'(phi1)."""

    t: float
    phi1: FloatArray
    phi2: FloatArray
    force: FloatArray = field(repr=False)


def state_from(
    setup: SimulationSetup, phi1: FloatArray, phi2: FloatArray
) -> FieldState:
    """Return the state at t = 0 with the kink's end values enforced."""
    first = np.array(phi1, dtype=float)
    second = np.array(phi2, dtype=float)
    if first.shape != (setup.grid.n,) or second.shape != (setup.grid.n,):
        raise GridMismatchError(f"fields do not match grid n={setup.grid.n}")
    first[0], first[-1] = 0.0, setup.static[-1]
    second[0] = second[-1] = 0.0
    force = field_force(setup.potential, first, setup.grid.h)
    return FieldState(0.0, first, second, force)


def odd_bump(grid: Grid, width: float, center: float) -> FloatArray:
    """Return the odd Gaussian pair centred at +-center."""
    x = grid.x
    bump = np.exp(-(((x - center) / width) ** 2))
    bump -= np.exp(-(((x + center) / width) ** 2))
    bump[-1] = 0.0
    return bump


def _read_perturbation(path: str, grid: Grid) -> tuple[FloatArray, FloatArray]:
    table = np.genfromtxt(path, delimiter=",", names=True, comments="#")
    if table.shape != (grid.n,):
        raise GridMismatchError(f"{path} has {table.shape} rows, grid n={grid.n}")
    displacement = np.asarray(table["dphi1"], dtype=float)
    return displacement, np.asarray(table["dphi2"], dtype=float)


def initialize(setup: SimulationSetup, config: SimulationConfig) -> FieldState:
    """Return the initial state for the configured mode.

    Raises:
        InitialDataTooLargeError: the perturbation norm exceeds delta_max
    """
    grid = setup.grid
    delta = config.delta
    velocity = np.zeros(grid.n)
    match config.mode:
        case "pure-y":
            shape = setup.mode
        case "bump":
            shape = odd_bump(grid, config.bump_width, config.bump_center)
            shape = shape / perturbation_norm(grid, shape, velocity)
        case "file":
            shape, velocity = _read_perturbation(str(config.initial_file), grid)
        case _:
            raise ConfigError(f"unknown simulation mode {config.mode}")
    state = state_from(setup, setup.static + delta * shape, delta * velocity)
    size = global_norm(setup, state)
    if size > config.delta_max:
        raise InitialDataTooLargeError(
            f"norm {size:.4g} > delta_max {config.delta_max}"
        )
    LOG.debug("initial %s perturbation with norm %.6g", config.mode, size)
    return state


def step(
    setup: SimulationSetup, state: FieldState, dt: float | None = None
) -> FieldState:
    """Advance one kick-drift-kick step, then damp phi2 in the sponge.

    Raises:
        CFLViolationError: dt > 0.5 h
        SimulationInstabilityError: non-finite force
    """
    tau = setup.dt if dt is None else dt
    if tau > CFL_LIMIT * setup.grid.h:
        raise CFLViolationError(f"dt={tau:.4g}, h={setup.grid.h:.4g}")
    half_kick = state.phi2 + 0.5 * tau * state.force
    phi1 = state.phi1 + tau * half_kick
    force = field_force(setup.potential, phi1, setup.grid.h)
    if not np.all(np.isfinite(force)):
        raise SimulationInstabilityError(f"t={state.t + tau:.6g}")
    phi2 = (half_kick + 0.5 * tau * force) * np.exp(-setup.sponge * tau)
    return FieldState(state.t + tau, phi1, phi2, force)


def perturbation_norm(
    grid: Grid, displacement: FloatArray, velocity: FloatArray, count: int | None = None
) -> float:
    """Return the H1 x L2 norm of an odd pair, optionally on the first nodes only."""
    slope = first_derivative(displacement, grid.h, ODD)
    stop = grid.n if count is None else count
    return float(
        np.sqrt(
            line_norm(slope[:stop], grid.h) ** 2
            + line_norm(displacement[:stop], grid.h) ** 2
            + line_norm(velocity[:stop], grid.h) ** 2
        )
    )


def global_norm(setup: SimulationSetup, state: FieldState) -> float:
    """Return the H1 x L2 norm of (phi1 - H, phi2) on the line."""
    return perturbation_norm(setup.grid, state.phi1 - setup.static, state.phi2)


def local_norm(setup: SimulationSetup, state: FieldState) -> float:
    """Return the H1 x L2 norm of (phi1 - H, phi2) on the window [-I, I]."""
    count = int(np.searchsorted(setup.grid.x, setup.window, side="right"))
    return perturbation_norm(setup.grid, state.phi1 - setup.static, state.phi2, count)


def decompose(setup: SimulationSetup, state: FieldState) -> ModalDecomposition:
    """Split the perturbation into internal mode coordinates and radiation."""
    h = setup.grid.h
    mode = setup.mode
    displacement = state.phi1 - setup.static
    z1 = line_inner(displacement, mode, h)
    z2 = line_inner(state.phi2, mode, h) / setup.lam
    return ModalDecomposition(
        setup.lam,
        z1,
        z2,
        displacement - z1 * mode,
        state.phi2 - setup.lam * z2 * mode,
        state.phi1,
        state.phi2,
    )


@dataclass(frozen=True, eq=False)
class TrajectorySummary:
    """Scalar signatures of a run."""

    stability_constant: float | None
    z_ratio: float | None
    window_ratio: float | None
    z4_integral: float
    rho_u1_integral: float
    z4_tail_fraction: float | None
    rho_u1_tail_fraction: float | None
    energy_drift: float
    reflection_warning: bool

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return asdict(self)


def _ratio(numerator: float, denominator: float) -> float | None:
    return None if denominator == 0.0 else float(numerator / denominator)


@dataclass(frozen=True, eq=False)
class ModalTrajectory:
    """Recorded time series of one run."""

    lam: float
    cadence: float
    columns: dict[str, FloatArray]
    reflection_threshold: float = 1e-3

    def __getitem__(self, name: str) -> FloatArray:
        """Return one column."""
        return self.columns[name]

    @property
    def times(self) -> FloatArray:
        """Return the record times."""
        return self.columns["t"]

    def rows(self) -> list[list[float]]:
        """Return the CSV rows in the column order of TRAJECTORY_COLUMNS."""
        table = np.column_stack([self.columns[name] for name in TRAJECTORY_COLUMNS])
        return table.tolist()

    def _tail_fraction(self, name: str) -> tuple[float, float | None]:
        t = self.times
        values = self.columns[name]
        total = float(trapezoid(values, t))
        late = t >= 0.5 * t[-1]
        tail = float(trapezoid(values[late], t[late]))
        return total, _ratio(tail, total)

    def summary(self) -> TrajectorySummary:
        """Return the stability and decay signatures."""
        norms = self.columns["global_norm"]
        window = self.columns["local_norm"]
        abs_z = self.columns["abs_z"]
        energy = self.columns["E"]
        z4_integral, z4_tail = self._tail_fraction("z4")
        rho_integral, rho_tail = self._tail_fraction("rho_u1")
        initial = float(norms[0])
        reflected = bool(
            initial > 0
            and np.max(self.columns["edge_norm"]) > self.reflection_threshold * initial
        )
        if reflected:
            LOG.warning(
                "sponge reflection: edge norm reached %.3g of the initial norm",
                np.max(self.columns["edge_norm"]) / initial,
            )
        return TrajectorySummary(
            _ratio(float(np.max(norms)), initial),
            _ratio(float(abs_z[-1]), float(abs_z[0])),
            _ratio(float(window[-1]), float(np.max(window))),
            z4_integral,
            rho_integral,
            z4_tail,
            rho_tail,
            float(np.max(np.abs(energy - energy[0])) / abs(energy[0])),
            reflected,
        )


def record(setup: SimulationSetup, state: FieldState) -> dict[str, float]:
    """Return every trajectory column at the current state."""
    decomposition = decompose(setup, state)
    sample: FunctionalSample = functionals(
        setup.potential,
        decomposition,
        setup.weights,
        setup.darboux,
        setup.transform,
        setup.resonance.g,
        setup.fermi.gamma,
    )
    h = setup.grid.h
    displacement = state.phi1 - setup.static
    source = nonlinear_term(setup.potential, setup.static, displacement)
    edge_start = int((1.0 - EDGE_SHARE) * setup.grid.n)
    edge = perturbation_norm(
        setup.grid,
        np.where(np.arange(setup.grid.n) >= edge_start, displacement, 0.0),
        np.where(np.arange(setup.grid.n) >= edge_start, state.phi2, 0.0),
    )
    return {
        "t": state.t,
        "z1": decomposition.z1,
        "z2": decomposition.z2,
        "abs_z": decomposition.abs_z,
        "z4": decomposition.abs_z**4,
        "I": sample.I,
        "Hfun": sample.H,
        "J": sample.J,
        "Zfun": sample.Z,
        "K": sample.K,
        "M": sample.M,
        "E": sample.energy,
        "P": sample.momentum,
        "local_norm": local_norm(setup, state),
        "global_norm": global_norm(setup, state),
        "N_Y": line_inner(source, setup.mode, h),
        "rho_u1": line_norm(setup.weights.rho**2 * decomposition.u1, h) ** 2,
        "edge_norm": edge,
    }


def run_experiment(
    setup: SimulationSetup, config: SimulationConfig, state: FieldState | None = None
) -> ModalTrajectory:
    """Evolve to the horizon and record every ``stride`` steps.

    Raises:
        SimulationInstabilityError: non-finite fields at some step
    """
    current = initialize(setup, config) if state is None else state
    steps = int(round(config.horizon / setup.dt))
    LOG.info("%s starting run of %d steps %s", "-" * 20, steps, "-" * 20)
    records = [record(setup, current)]
    for index in range(1, steps + 1):
        current = step(setup, current)
        if index % setup.stride == 0:
            records.append(record(setup, current))
    columns = {name: np.array([row[name] for row in records]) for name in records[0]}
    LOG.debug("recorded %d snapshots", len(records))
    return ModalTrajectory(
        setup.lam, setup.cadence, columns, config.reflection_threshold
    )


def modal_ode_residual(trajectory: ModalTrajectory) -> dict[str, FloatArray]:
    """Return central-difference residuals of the modal equations.

    ``z1`` holds z1' - lambda z2, ``z2`` holds z2' + lambda z1 + <N, Y> / lambda and
    ``abs_z_sq`` holds d|z|^2/dt + 2 <N, Y> z2 / lambda. With alpha = z1^2 - z2^2 and
    beta = 2 z1 z2, ``alpha`` holds alpha' - 2 lambda beta - 2 <N, Y> z2 / lambda and
    ``beta`` holds beta' + 2 lambda alpha + 2 <N, Y> z1 / lambda. All are taken at the
    interior records.
    """
    lam = trajectory.lam
    spacing = trajectory.cadence
    z1, z2 = trajectory["z1"], trajectory["z2"]
    source = trajectory["N_Y"][1:-1]
    alpha = z1**2 - z2**2
    beta = 2.0 * z1 * z2

    def rate(values: FloatArray) -> FloatArray:
        return (values[2:] - values[:-2]) / (2.0 * spacing)

    return {
        "z1": rate(z1) - lam * z2[1:-1],
        "z2": rate(z2) + lam * z1[1:-1] + source / lam,
        "abs_z_sq": rate(z1**2 + z2**2) + 2.0 / lam * source * z2[1:-1],
        "alpha": rate(alpha) - 2.0 * lam * beta[1:-1] - 2.0 / lam * source * z2[1:-1],
        "beta": rate(beta) + 2.0 * lam * alpha[1:-1] + 2.0 / lam * source * z1[1:-1],
    }


def write_perturbation(
    path: Path, grid: Grid, displacement: FloatArray, velocity: FloatArray
) -> None:
    """Write a perturbation in the format ``initialize`` reads for the file mode."""
    np.savetxt(
        path,
        np.column_stack([grid.x, displacement, velocity]),
        delimiter=",",
        header="x,dphi1,dphi2",
        comments="",
    )
