"""Stages of the hypothesis checks, the parameter scans and the golden self test.

The stages run in the order validate, kink, spectrum, darboux, fgr, hyp3. Each reads
what it needs from an ``AnalysisContext`` and leaves its result there; a stage that
raises stops the chain and its error is kept in the report.
"""
# Standard Library
from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from functools import cached_property
import logging
from pathlib import Path
from typing import Any
from typing import ClassVar

# External Party
import numpy as np
from scipy.integrate import quad

# My Modules
from kink_stability.common.numerics import FloatArray
from kink_stability.common.numerics import line_norm
from kink_stability.common.template import ConfigError
from kink_stability.common.template import KinkStabilityError
from kink_stability.common.template import Outcome
from kink_stability.common.template import Stage
from kink_stability.config import RunConfig
from kink_stability.darboux import DarbouxData
from kink_stability.darboux import RegularizedTransform
from kink_stability.darboux import apply_U1U0
from kink_stability.darboux import build_darboux
from kink_stability.darboux import coercivity_ratio
from kink_stability.darboux import commutator_probe
from kink_stability.darboux import conjugation_study
from kink_stability.darboux import random_probe
from kink_stability.darboux import transform_bound_ratios
from kink_stability.kgsim import ModalTrajectory
from kink_stability.kgsim import SimulationSetup
from kink_stability.kgsim import TRAJECTORY_COLUMNS
from kink_stability.kgsim import TrajectorySummary
from kink_stability.kgsim import prepare_simulation
from kink_stability.kgsim import run_experiment
from kink_stability.kink import DecayConstants
from kink_stability.kink import Grid
from kink_stability.kink import KinkProfile
from kink_stability.kink import Sector
from kink_stability.kink import decay_constants
from kink_stability.kink import kink_energy
from kink_stability.kink import solve_kink
from kink_stability.potential import Potential
from kink_stability.potential import ValidationReport
from kink_stability.potential import from_spec
from kink_stability.potential import validate
from kink_stability.reporting import write_columns
from kink_stability.resonance import FermiReport
from kink_stability.resonance import ResonanceSolution
from kink_stability.resonance import compute_gamma
from kink_stability.resonance import solve_resonance
from kink_stability.spectral import Hypothesis1Report
from kink_stability.spectral import MissingModeError
from kink_stability.spectral import NoSignChangeError
from kink_stability.spectral import SpectralData
from kink_stability.spectral import assess_internal_mode
from kink_stability.spectral import build_L0
from kink_stability.spectral import discrete_spectrum
from kink_stability.spectral import perturbation_shift
from kink_stability.spectral import shooting_eigenvalue
from kink_stability.spectral import zero_mode_residual
from kink_stability.virial import Hypothesis3Report
from kink_stability.virial import Weights
from kink_stability.virial import check_hypothesis3
from kink_stability.virial import compute_VB
from kink_stability.virial import gap_probes
from kink_stability.virial import sech_gap_check
from kink_stability.virial import vb_quadratic_form
from kink_stability.virial import weighted_bound

LOG_NAME = "kink_stability.pipeline"
LOG = logging.getLogger(LOG_NAME)

SCAN_PARAMETERS = ("m", "eta0", "delta", "A", "epsilon")
SHOOTING_WINDOW = 0.01
GOLDEN_WINDOW = 10.0
GOLDEN_RESONANCE_WINDOW = 15.0
SEGUR_CUTOFF = 60.0
COERCIVITY_SAMPLES = 100
COERCIVITY_DRIFT = 0.1
CONJUGATION_ORDER = 1.8
ROBUST_M = (5.0, 10.0)
ROBUST_ETA = 0.01
ROBUST_LAMBDA_SHIFT = 0.1
UNITS = {"x": "length", "t": "time"}

SpectrumInputs = tuple[Potential, KinkProfile, float | None]
DarbouxInputs = tuple[KinkProfile, Hypothesis1Report, RunConfig]
Hyp3Inputs = tuple["DarbouxResult", tuple[float, ...]]
ScanTask = tuple[RunConfig, str, float, Hypothesis1Report | None]


def _describe(err: KinkStabilityError) -> str:
    return ": ".join(str(arg) for arg in err.args)


def analysis_grid(config: RunConfig, potential: Potential) -> Grid:
    """Return the configured grid, L = 40 / omega unless given."""
    if config.grid.half_length is None:
        return Grid.default(potential.omega, config.grid.points)
    return Grid(config.grid.half_length, config.grid.points)


@dataclass
class AnalysisContext:
    """Results of the stages run so far for one configuration."""

    config: RunConfig
    results: dict[str, Any] = field(default_factory=dict)
    summaries: dict[str, dict[str, Any]] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @cached_property
    def potential(self) -> Potential:
        """Return the configured potential."""
        return from_spec(self.config.potential)

    def result(self, name: str) -> Any:
        """Return the result of an earlier stage."""
        if name not in self.results:
            raise KinkStabilityError(f"stage {name} has not run")
        return self.results[name]


@dataclass(frozen=True, eq=False)
class KinkResult:
    """Kink profile with its decay constants and rest energy."""

    profile: KinkProfile
    decay: DecayConstants
    energy: float


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Odd sector report, even spectrum and the shooting cross check."""

    hypothesis1: Hypothesis1Report
    even: SpectralData
    zero_mode_residual: float
    shooting: float | None
    shooting_error: float | None


@dataclass(frozen=True, eq=False)
class DarbouxResult:
    """Factorisation fields, the regularised transform, weights and probe ratios."""

    darboux: DarbouxData
    transform: RegularizedTransform
    weights: Weights
    omega_sq: float
    coercivity: FloatArray
    bounds: FloatArray
    commutator: float
    kernel_residual: float


@dataclass(frozen=True, eq=False)
class FgrResult:
    """Resonance solution and the golden rule constant."""

    resonance: ResonanceSolution
    fermi: FermiReport


@dataclass(frozen=True, eq=False)
class Hyp3Result:
    """Repulsivity report and the weighted virial probes."""

    report: Hypothesis3Report
    weights: Weights
    V_B: FloatArray
    sech_gap: float
    vb_ratio: float
    bound: float


class ValidateStage(Stage):
    """Admissibility clauses of the potential."""

    name = "validate"

    def parse(self, context: AnalysisContext) -> Potential:
        """Build the potential."""
        return context.potential

    def compute(self, inputs: Potential) -> ValidationReport:
        """Check every clause."""
        return validate(inputs)

    def summarize(self, result: ValidationReport) -> dict[str, Any]:
        """Return the clause table."""
        return result.to_dict()

    def proceed(self, result: ValidationReport) -> bool:
        """Stop on an inadmissible potential."""
        return result.passed


class KinkStage(Stage):
    """Kink profile on the analysis grid."""

    name = "kink"

    def parse(self, context: AnalysisContext) -> tuple[Potential, Grid]:
        """Return the potential and the grid."""
        return context.potential, analysis_grid(context.config, context.potential)

    def compute(self, inputs: tuple[Potential, Grid]) -> KinkResult:
        """Solve for the kink."""
        profile = solve_kink(*inputs)
        return KinkResult(profile, decay_constants(profile), kink_energy(profile))

    def summarize(self, result: KinkResult) -> dict[str, Any]:
        """Return the grid, decay constants and energy."""
        grid = result.profile.grid
        return {
            "potential": result.profile.potential.name,
            "omega": result.profile.omega,
            "grid": {"half_length": grid.half_length, "n": grid.n, "h": grid.h},
            "energy": result.energy,
            "decay_constants": result.decay._asdict(),
            "tail_deficit": float(result.profile.deficit[-1]),
        }


class SpectrumStage(Stage):
    """Internal mode check, even spectrum and the shooting oracle."""

    name = "spectrum"

    def parse(self, context: AnalysisContext) -> SpectrumInputs:
        """Return the potential, the profile and the even search bound."""
        kink: KinkResult = context.result("kink")
        return context.potential, kink.profile, context.config.spectral.upper

    def compute(self, inputs: SpectrumInputs) -> SpectrumResult:
        """Solve both sectors and cross check the internal mode by shooting."""
        potential, profile, upper = inputs
        odd = build_L0(potential, profile, Sector.ODD)
        report = assess_internal_mode(odd)
        even = discrete_spectrum(build_L0(potential, profile, Sector.EVEN), upper)
        shooting, error = None, None
        if report.lambda_sq is not None:
            width = SHOOTING_WINDOW * potential.omega_sq
            top = min(report.lambda_sq + width, odd.v_infinity)
            bracket = (report.lambda_sq - width, top)
            try:
                shooting = shooting_eigenvalue(odd, bracket)
                if (odd.grid.n - 1) % 2 == 0:
                    coarse = odd.restricted(odd.grid.coarsened())
                    error = abs(shooting - shooting_eigenvalue(coarse, bracket))
            except NoSignChangeError as err:
                LOG.warning("shooting cross check failed: %s", _describe(err))
        return SpectrumResult(
            report, even, zero_mode_residual(potential, profile), shooting, error
        )

    def summarize(self, result: SpectrumResult) -> dict[str, Any]:
        """Return both sectors and the shooting comparison."""
        report = result.hypothesis1
        shooting: dict[str, Any] | None = None
        if result.shooting is not None and report.lambda_sq is not None:
            difference = abs(result.shooting - report.lambda_sq)
            matrix_error = float(report.spectrum.convergence[0])
            error_bar = matrix_error + (result.shooting_error or 0.0)
            shooting = {
                "lambda_sq": result.shooting,
                "difference": difference,
                "error_bar": error_bar,
                "agree": bool(difference <= max(error_bar, 1e-12)),
            }
        return {
            "hypothesis1": report.to_dict(),
            "even": result.even.to_dict(),
            "zero_mode_residual": result.zero_mode_residual,
            "shooting": shooting,
        }

    def proceed(self, result: SpectrumResult) -> bool:
        """Stop when there is no internal mode to build on."""
        return result.hypothesis1.lambda_sq is not None


class DarbouxStage(Stage):
    """Double factorisation, the regularised transform and the seeded probes."""

    name = "darboux"

    def parse(self, context: AnalysisContext) -> DarbouxInputs:
        """Return the profile, the internal mode and the configuration."""
        kink: KinkResult = context.result("kink")
        spectrum: SpectrumResult = context.result("spectrum")
        return kink.profile, spectrum.hypothesis1, context.config

    def compute(self, inputs: DarbouxInputs) -> DarbouxResult:
        """Build the transform and probe it with random odd functions."""
        profile, report, config = inputs
        if report.lambda_sq is None or report.Y is None:
            raise MissingModeError(profile.potential.name)
        grid = profile.grid
        darboux = build_darboux(profile, report.lambda_sq)
        transform = RegularizedTransform.build(grid, config.darboux.epsilon)
        weights = Weights.build(
            grid,
            profile.potential.omega_sq,
            report.lambda_sq,
            config.virial.A,
            config.virial.B,
        )
        rng = np.random.default_rng(config.seed)
        count = config.virial.probes
        probes = [random_probe(grid, report.Y, rng) for _ in range(count)]
        coercivity = np.array(
            [coercivity_ratio(transform, darboux, report.Y, u, weights) for u in probes]
        )
        bounds = np.array(
            [transform_bound_ratios(transform, darboux, u, weights) for u in probes]
        )
        commutator = max(commutator_probe(transform, darboux, u) for u in probes)
        kernel = line_norm(apply_U1U0(darboux, report.Y), grid.h) / line_norm(
            report.Y, grid.h
        )
        LOG.debug("coercivity ratios: max %.6g over %d probes", coercivity.max(), count)
        return DarbouxResult(
            darboux,
            transform,
            weights,
            profile.potential.omega_sq,
            coercivity,
            bounds,
            commutator,
            kernel,
        )

    def summarize(self, result: DarbouxResult) -> dict[str, Any]:
        """Return the partner potentials' tails and the probe statistics."""
        darboux = result.darboux
        return {
            "lambda_sq": darboux.lambda_sq,
            "omega_sq": result.omega_sq,
            "epsilon": result.transform.epsilon,
            "P1_tail": float(darboux.P1[-1]),
            "P2_tail": float(darboux.P2[-1]),
            "P2_max_deviation": float(np.max(np.abs(darboux.P2 - result.omega_sq))),
            "Z_min": float(np.min(darboux.Z)),
            "riccati_mismatch": darboux.riccati_mismatch,
            "kernel_residual": result.kernel_residual,
            "coercivity": {
                "probes": int(result.coercivity.size),
                "max": float(np.max(result.coercivity)),
                "mean": float(np.mean(result.coercivity)),
            },
            "transform_bounds": {
                "r1_max": float(np.max(result.bounds[:, 0])),
                "r2_max": float(np.max(result.bounds[:, 1])),
            },
            "commutator_max": result.commutator,
        }


class FgrStage(Stage):
    """Resonance solution at twice the internal frequency and the golden rule."""

    name = "fgr"

    def parse(self, context: AnalysisContext) -> tuple[Any, ...]:
        """Return the potential, the profile, the internal mode and the tolerances."""
        kink: KinkResult = context.result("kink")
        spectrum: SpectrumResult = context.result("spectrum")
        return context.potential, kink.profile, spectrum.hypothesis1, context.config.fgr

    def compute(self, inputs: tuple[Any, ...]) -> FgrResult:
        """Solve for g and integrate Gamma."""
        potential, profile, report, settings = inputs
        if report.lambda_sq is None or report.Y is None:
            raise MissingModeError(potential.name)
        resonance = solve_resonance(potential, profile, report.lambda_sq)
        fermi = compute_gamma(
            potential, profile, report.Y, resonance, settings.digits, settings.tolerance
        )
        return FgrResult(resonance, fermi)

    def summarize(self, result: FgrResult) -> dict[str, Any]:
        """Return the resonance tail fit and Gamma."""
        return {"resonance": result.resonance.to_dict(), **result.fermi.to_dict()}


class Hyp3Stage(Stage):
    """Repulsivity of the second partner and the virial weight probes."""

    name = "hyp3"

    def parse(self, context: AnalysisContext) -> Hyp3Inputs:
        """Return the transform data and the gamma grid."""
        return context.result("darboux"), context.config.virial.gammas

    def compute(self, inputs: Hyp3Inputs) -> Hyp3Result:
        """Count negative eigenvalues and evaluate the weighted bounds."""
        transformed, gammas = inputs
        darboux, weights = transformed.darboux, transformed.weights
        report = check_hypothesis3(darboux, gammas)
        V_B = compute_VB(weights, darboux)  # noqa: N806
        probes = gap_probes(darboux.grid)
        ratios = [vb_quadratic_form(weights, V_B, probe)[1] for probe in probes]
        return Hyp3Result(
            report,
            weights,
            V_B,
            sech_gap_check(weights, probes),
            float(min(ratios)),
            weighted_bound(weights, darboux),
        )

    def summarize(self, result: Hyp3Result) -> dict[str, Any]:
        """Return the Sturm counts, the witness and the weight probes."""
        return {
            **result.report.to_dict(),
            "A": result.weights.A,
            "B": result.weights.B,
            "kappa": result.weights.kappa,
            "sech_gap_ratio": result.sech_gap,
            "vb_min_ratio": result.vb_ratio,
            "weighted_bound": result.bound,
        }


STAGES: tuple[Stage, ...] = (
    ValidateStage(),
    KinkStage(),
    SpectrumStage(),
    DarbouxStage(),
    FgrStage(),
    Hyp3Stage(),
)
STAGE_NAMES = tuple(stage.name for stage in STAGES)


def run_stages(config: RunConfig, until: str = STAGE_NAMES[-1]) -> AnalysisContext:
    """Run the stages in order up to ``until``, stopping at the first failure.

    Raises:
        ConfigError: unknown stage name
    """
    if until not in STAGE_NAMES:
        raise ConfigError(f"unknown stage {until}")
    context = AnalysisContext(config)
    for stage in STAGES:
        LOG.info("%s starting %s %s", "-" * 20, stage.name, "-" * 20)
        try:
            result, summary = stage.solve(context)
        except KinkStabilityError as err:
            LOG.warning("stage %s failed: %s", stage.name, _describe(err))
            context.errors[stage.name] = _describe(err)
            break
        context.results[stage.name] = result
        context.summaries[stage.name] = summary
        if stage.name == until:
            break
        if not stage.proceed(result):
            LOG.info("stopping after %s", stage.name)
            break
    return context


@dataclass(frozen=True)
class HypothesisReport:
    """Verdicts of the admissibility check and the three hypotheses."""

    potential: str | None
    validation: dict[str, Any] | None
    hypothesis1: dict[str, Any] | None
    hypothesis2: dict[str, Any] | None
    hypothesis3: dict[str, Any] | None
    stages: dict[str, dict[str, Any]]
    errors: dict[str, str]

    CHECKS: ClassVar[tuple[str, ...]] = (
        "validation",
        "hypothesis1",
        "hypothesis2",
        "hypothesis3",
    )

    @classmethod
    def from_context(cls, context: AnalysisContext) -> HypothesisReport:
        """Condense the stage summaries."""
        summaries = context.summaries
        spectrum = summaries.get("spectrum")
        fgr = summaries.get("fgr")
        hyp3 = summaries.get("hyp3")
        validation = summaries.get("validate")
        return cls(
            None if validation is None else validation["potential"],
            validation,
            None if spectrum is None else spectrum["hypothesis1"],
            None
            if fgr is None
            else {
                "gamma": fgr["gamma"],
                "gamma_convergence": fgr["gamma_convergence"],
                "outcome": fgr["hypothesis2"],
            },
            None
            if hyp3 is None
            else {
                "outcome": hyp3["outcome"],
                "witness_gamma": hyp3["witness_gamma"],
                "note": hyp3["note"],
            },
            dict(summaries),
            dict(context.errors),
        )

    @property
    def failures(self) -> list[str]:
        """Return every check that did not pass and every stage error."""
        failed = []
        if self.validation is None or not self.validation["passed"]:
            failed.append("validation")
        for name in self.CHECKS[1:]:
            check = getattr(self, name)
            if check is None or check["outcome"] != Outcome.PASS.value:
                failed.append(name)
        if self.hypothesis1 is not None and self.hypothesis1["odd_modes"] > 1:
            failed.append("hypothesis3: several odd internal modes")
        failed.extend(f"{stage}: {message}" for stage, message in self.errors.items())
        return failed

    @property
    def verdict(self) -> str:
        """Return 'all-pass' or 'fail'."""
        return "fail" if self.failures else "all-pass"

    @property
    def exit_code(self) -> int:
        """Return 0 for all-pass and 2 otherwise."""
        return 0 if self.verdict == "all-pass" else 2

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "potential": self.potential,
            "verdict": self.verdict,
            "failures": self.failures,
            "validation": self.validation,
            "hypothesis1": self.hypothesis1,
            "hypothesis2": self.hypothesis2,
            "hypothesis3": self.hypothesis3,
            "stages": self.stages,
            "errors": self.errors,
        }


def analyze(config: RunConfig) -> HypothesisReport:
    """Run every stage and return the hypothesis verdicts."""
    return HypothesisReport.from_context(run_stages(config))


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """A finished nonlinear run."""

    setup: SimulationSetup
    trajectory: ModalTrajectory
    summary: TrajectorySummary

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        setup = self.setup
        return {
            "potential": setup.potential.name,
            "grid": {"half_length": setup.grid.half_length, "n": setup.grid.n},
            "dt": setup.dt,
            "cadence": setup.cadence,
            "lambda_sq": setup.lambda_sq,
            "gamma": setup.fermi.gamma,
            "records": int(self.trajectory.times.size),
            "summary": self.summary.to_dict(),
        }


def simulate(config: RunConfig) -> SimulationResult:
    """Prepare and run the configured simulation."""
    potential = from_spec(config.potential)
    setup = prepare_simulation(
        potential,
        config.simulation,
        config.darboux.epsilon,
        config.virial.A,
        config.virial.B,
    )
    trajectory = run_experiment(setup, config.simulation)
    return SimulationResult(setup, trajectory, trajectory.summary())


def scan_config(config: RunConfig, parameter: str, value: float) -> RunConfig:
    """Return the configuration of one scan point.

    ``eta0`` perturbs the configured potential by eta(phi) = value * phi^2.

    Raises:
        ConfigError: unknown parameter or a value out of range
    """
    match parameter:
        case "m":
            return config.with_overrides(potential={"kind": "phi8", "m": value})
        case "eta0":
            return config.with_overrides(
                potential={
                    "kind": "perturbed",
                    "base": config.potential,
                    "eta_coeffs": [0.0, 0.0, value],
                }
            )
        case "delta":
            return config.with_section("simulation", delta=value)
        case "A":
            return config.with_section("virial", A=value)
        case "epsilon":
            return config.with_section("darboux", epsilon=value)
        case _:
            raise ConfigError(f"cannot scan {parameter!r}", SCAN_PARAMETERS)


def _scan_row(task: ScanTask) -> dict[str, Any]:
    config, parameter, value, reference = task
    row: dict[str, Any] = {"parameter": parameter, "value": value}
    try:
        point = scan_config(config, parameter, value)
        if parameter == "delta":
            result = simulate(point)
            row.update(verdict="ok", lambda_sq=result.setup.lambda_sq)
            row.update(result.summary.to_dict())
            return row
        context = run_stages(point)
    except KinkStabilityError as err:
        LOG.warning("scan %s=%g failed: %s", parameter, value, _describe(err))
        row.update(verdict="error", error=_describe(err))
        return row

    report = HypothesisReport.from_context(context)
    row.update(
        verdict=report.verdict,
        failures=";".join(report.failures),
        lambda_sq=None
        if report.hypothesis1 is None
        else report.hypothesis1["lambda_sq"],
        gamma=None if report.hypothesis2 is None else report.hypothesis2["gamma"],
        witness_gamma=None
        if report.hypothesis3 is None
        else report.hypothesis3["witness_gamma"],
    )
    if parameter == "eta0" and reference is not None and "spectrum" in context.results:
        perturbed: SpectrumResult = context.results["spectrum"]
        row["lambda_shift"] = perturbation_shift(reference, perturbed.hypothesis1)
    if parameter in ("A", "epsilon") and "darboux" in context.summaries:
        darboux = context.summaries["darboux"]
        row.update(
            coercivity_max=darboux["coercivity"]["max"],
            r1_max=darboux["transform_bounds"]["r1_max"],
            r2_max=darboux["transform_bounds"]["r2_max"],
        )
    return row


def scan(
    config: RunConfig, parameter: str, values: Sequence[float]
) -> list[dict[str, Any]]:
    """Run analyze, or simulate for delta, once per value.

    Points run in a process pool when ``config.jobs`` exceeds one; a failing point is
    recorded in its row and the scan goes on.

    Raises:
        ConfigError: unknown parameter
    """
    if parameter not in SCAN_PARAMETERS:
        raise ConfigError(f"cannot scan {parameter!r}", SCAN_PARAMETERS)
    if not values:
        return []
    reference = None
    if parameter == "eta0":
        base = run_stages(config, "spectrum")
        if "spectrum" in base.results:
            reference = base.results["spectrum"].hypothesis1
    tasks = [(config, parameter, float(value), reference) for value in values]
    LOG.info("%s scanning %s %s", "-" * 20, parameter, "-" * 20)
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_scan_row, tasks))
    return [_scan_row(task) for task in tasks]


def write_stage_tables(context: AnalysisContext, out: Path) -> list[Path]:
    """Write the sampled fields of every finished stage as CSV."""
    written = []
    if "kink" in context.results:
        profile = context.results["kink"].profile
        written.append(
            write_columns(
                out / "kink.csv",
                {
                    "x": profile.grid.x,
                    "H": profile.H,
                    "Hp": profile.Hp,
                    "Hpp": profile.Hpp,
                    "Hppp": profile.Hppp,
                },
                UNITS,
            )
        )
    if "spectrum" in context.results:
        spectrum: SpectrumResult = context.results["spectrum"]
        odd = spectrum.hypothesis1.spectrum
        columns = {"x": odd.grid.x}
        columns.update({f"odd_{k}": f for k, f in enumerate(odd.eigenfunctions)})
        columns.update(
            {f"even_{k}": f for k, f in enumerate(spectrum.even.eigenfunctions)}
        )
        written.append(write_columns(out / "eigenfunctions.csv", columns, UNITS))
    if "darboux" in context.results:
        darboux = context.results["darboux"].darboux
        written.append(
            write_columns(
                out / "darboux.csv",
                {
                    "x": darboux.grid.x,
                    "q0": darboux.q0,
                    "q1": darboux.q1,
                    "Z": darboux.Z,
                    "P1": darboux.P1,
                    "P2": darboux.P2,
                    "P2p": darboux.P2p,
                },
                UNITS,
            )
        )
    if "fgr" in context.results:
        resonance = context.results["fgr"].resonance
        written.append(
            write_columns(
                out / "resonance.csv",
                {"x": resonance.grid.x, "g": resonance.g, "gp": resonance.gp},
                UNITS,
            )
        )
    if "hyp3" in context.results:
        hyp3: Hyp3Result = context.results["hyp3"]
        written.append(
            write_columns(out / "weights.csv", hyp3.weights.columns(hyp3.V_B), UNITS)
        )
    return written


def write_trajectory(result: SimulationResult, out: Path) -> Path:
    """Write the recorded time series."""
    trajectory = result.trajectory
    return write_columns(
        out / "trajectory.csv",
        {name: trajectory[name] for name in TRAJECTORY_COLUMNS},
        UNITS,
    )


@dataclass(frozen=True)
class SelftestItem:
    """One golden check with its measured value."""

    name: str
    measured: float | None
    bound: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class SelftestReport:
    """All golden checks."""

    items: tuple[SelftestItem, ...]
    report: HypothesisReport

    @property
    def passed(self) -> bool:
        """Return True if every item passed."""
        return all(item.passed for item in self.items)

    @property
    def failures(self) -> list[str]:
        """Return the failing items with their measured values."""
        return [
            f"{item.name}: measured {item.measured}, bound {item.bound}"
            for item in self.items
            if not item.passed
        ]

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON form."""
        return {
            "passed": self.passed,
            "failures": self.failures,
            "items": [item.to_dict() for item in self.items],
            "analysis": self.report.to_dict(),
        }


def segur_resonance(x: FloatArray) -> FloatArray:
    """Return the closed form phi^4 solution of L0 g = 6 g scaled to g'(0) = 1."""
    r = x / np.sqrt(2.0)
    closed = np.sin(2.0 * x) * (1.0 + 0.5 / np.cosh(r) ** 2)
    closed += np.sqrt(2.0) * np.cos(2.0 * x) * np.tanh(r)
    return closed / 4.0


def segur_gamma() -> float:
    """Return the phi^4 Gamma by adaptive quadrature of the closed forms."""
    norm = 2.0 * np.sqrt(2.0) / 3.0

    def integrand(x: float) -> float:
        r = x / np.sqrt(2.0)
        mode_sq = (np.tanh(r) / np.cosh(r)) ** 2 / norm
        return float(1.5 * np.tanh(r) * mode_sq * segur_resonance(np.array(x)))

    half, _ = quad(
        integrand, 0.0, SEGUR_CUTOFF, limit=400, epsabs=1e-15, epsrel=1e-12
    )
    return 2.0 * half


def coercivity_maximum(
    potential: Potential, grid: Grid, config: RunConfig, count: int
) -> float:
    """Return the largest coercivity ratio over ``count`` seeded functions on ``grid``.

    The functions are drawn independently of the spacing, so one seed gives the same
    functions on a refined grid.
    """
    profile = solve_kink(potential, grid)
    report = assess_internal_mode(build_L0(potential, profile, Sector.ODD))
    if report.lambda_sq is None or report.Y is None:
        raise MissingModeError(potential.name)
    darboux = build_darboux(profile, report.lambda_sq)
    transform = RegularizedTransform.build(grid, config.darboux.epsilon)
    weights = Weights.build(
        grid, potential.omega_sq, report.lambda_sq, config.virial.A, config.virial.B
    )
    rng = np.random.default_rng(config.seed)
    return max(
        coercivity_ratio(
            transform, darboux, report.Y, random_probe(grid, report.Y, rng), weights
        )
        for _ in range(count)
    )


def coercivity_refinement(
    config: RunConfig, count: int = COERCIVITY_SAMPLES
) -> tuple[float, float]:
    """Return the largest coercivity ratio on the analysis grid and at half spacing."""
    potential = from_spec(config.potential)
    grid = analysis_grid(config, potential)
    coarse = coercivity_maximum(potential, grid, config, count)
    fine = coercivity_maximum(potential, grid.refined(), config, count)
    LOG.debug("coercivity maximum %.6g, refined %.6g", coarse, fine)
    return coarse, fine


def robustness(config: RunConfig) -> list[tuple[str, HypothesisReport]]:
    """Run analyze on the phi^8 family and on phi^4 with a small phi^2 perturbation."""
    points = [
        (f"phi8_m{m:g}", config.with_overrides(potential={"kind": "phi8", "m": m}))
        for m in ROBUST_M
    ]
    points.append(
        (
            "phi4_eta",
            config.with_overrides(
                potential={
                    "kind": "perturbed",
                    "base": {"kind": "phi4"},
                    "eta_coeffs": [0.0, 0.0, ROBUST_ETA],
                }
            ),
        )
    )
    return [(name, analyze(point)) for name, point in points]


def _item(name: str, measured: float | None, bound: float) -> SelftestItem:
    passed = measured is not None and bool(np.isfinite(measured)) and measured <= bound
    return SelftestItem(name, measured, bound, passed)


def _golden_items(context: AnalysisContext) -> list[SelftestItem]:
    tolerance = context.config.spectral.tolerance
    items = []
    if "kink" in context.results:
        profile: KinkProfile = context.results["kink"].profile
        inner = profile.grid.x <= GOLDEN_WINDOW
        exact = np.tanh(profile.grid.x[inner] / np.sqrt(2.0))
        error = np.max(np.abs(profile.H[inner] - exact))
        items.append(_item("kink_closed_form", float(error), 1e-10))
    if "spectrum" in context.results:
        spectrum: SpectrumResult = context.results["spectrum"]
        report = spectrum.hypothesis1
        measured = None if report.lambda_sq is None else abs(report.lambda_sq - 1.5)
        items.append(_item("odd_eigenvalue", measured, tolerance))
        items.append(_item("odd_mode_count", float(report.multiplicity), 1.0))
        zero = spectrum.even.eigenvalues
        lowest = float(abs(zero[0])) if zero.size else None
        items.append(_item("zero_mode", lowest, 1e-6))
        shooting = context.summaries["spectrum"]["shooting"]
        items.append(
            _item(
                "shooting_agreement",
                None if shooting is None else shooting["difference"],
                1e-6 if shooting is None else max(shooting["error_bar"], 1e-8),
            )
        )
    if "darboux" in context.results:
        darboux: DarbouxData = context.results["darboux"].darboux
        inner = darboux.grid.x <= GOLDEN_WINDOW
        items.append(
            _item("P2_constant", float(np.max(np.abs(darboux.P2[inner] - 2.0))), 1e-6)
        )
        tails = max(abs(darboux.P1[-1] - 2.0), abs(darboux.P2[-1] - 2.0))
        items.append(_item("partner_tails", float(tails), 1e-6))
    if "fgr" in context.results:
        fgr: FgrResult = context.results["fgr"]
        x = fgr.resonance.grid.x
        inner = x <= GOLDEN_RESONANCE_WINDOW
        error = np.max(np.abs(fgr.resonance.g[inner] - segur_resonance(x[inner])))
        items.append(_item("resonance_closed_form", float(error), 1e-6))
        items.append(
            _item("resonance_wavenumber", abs(fgr.resonance.wavenumber - 2.0), 1e-4)
        )
        items.append(_item("mode_orthogonality", abs(fgr.fermi.orthogonality), 1e-7))
        gap = abs(fgr.fermi.source_integral - 2.0 * fgr.fermi.gamma)
        scale = fgr.fermi.tolerance / context.config.fgr.tolerance
        items.append(_item("source_identity", gap, 1e-8 * scale))
        reference = segur_gamma()
        items.append(
            _item(
                "gamma_reference",
                abs(fgr.fermi.gamma - reference) / abs(reference),
                1e-5,
            )
        )
        items.append(
            SelftestItem(
                "gamma_nonzero",
                fgr.fermi.gamma,
                fgr.fermi.tolerance,
                fgr.fermi.hypothesis2,
            )
        )
    if "hyp3" in context.results:
        hyp3: Hyp3Result = context.results["hyp3"]
        items.append(_item("repulsivity_counts", float(max(hyp3.report.counts)), 0.0))
        items.append(_item("sech_gap", 1.0 - hyp3.sech_gap, 1e-6))
    return items


def _refinement_items(config: RunConfig) -> list[SelftestItem]:
    potential = from_spec(config.potential)
    items = []
    try:
        _, orders = conjugation_study(potential, 1.5)
        order = float(np.min(orders))
        items.append(
            SelftestItem(
                "conjugation_order",
                order,
                CONJUGATION_ORDER,
                bool(order >= CONJUGATION_ORDER),
            )
        )
    except KinkStabilityError as err:
        LOG.warning("conjugation study failed: %s", _describe(err))
        items.append(SelftestItem("conjugation_order", None, CONJUGATION_ORDER, False))
    try:
        coarse, fine = coercivity_refinement(config)
        drift = abs(fine - coarse) / coarse
        items.append(_item("coercivity_refinement", drift, COERCIVITY_DRIFT))
    except KinkStabilityError as err:
        LOG.warning("coercivity refinement failed: %s", _describe(err))
        items.append(_item("coercivity_refinement", None, COERCIVITY_DRIFT))
    return items


def _robustness_items(config: RunConfig) -> list[SelftestItem]:
    items = []
    for name, report in robustness(config):
        passed = report.verdict == "all-pass"
        items.append(SelftestItem(f"robust_{name}", None, 0.0, passed))
        if name == "phi4_eta":
            found = None
            if report.hypothesis1 is not None:
                found = report.hypothesis1["lambda_sq"]
            shift = None if found is None else abs(found - 1.5)
            items.append(_item("robust_eta_lambda_shift", shift, ROBUST_LAMBDA_SHIFT))
    return items


def selftest(config: RunConfig | None = None) -> SelftestReport:
    """Run the phi^4 golden suite with the given resolution and tolerances."""
    base = config or RunConfig()
    phi4 = base.with_overrides(potential={"kind": "phi4"})
    LOG.info("%s starting selftest %s", "-" * 20, "-" * 20)
    context = run_stages(phi4)
    items = _golden_items(context)
    missing = [name for name in STAGE_NAMES if name not in context.results]
    items.extend(SelftestItem(f"stage_{name}", None, 0.0, False) for name in missing)
    items.extend(_refinement_items(phi4))
    items.extend(_robustness_items(base))
    report = HypothesisReport.from_context(context)
    items.append(SelftestItem("verdict", None, 0.0, report.verdict == "all-pass"))
    for item in items:
        if not item.passed:
            LOG.warning("selftest item %s failed with %s", item.name, item.measured)
    return SelftestReport(tuple(items), report)

