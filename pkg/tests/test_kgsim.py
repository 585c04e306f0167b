# External Party
import numpy as np
from numpy.testing import assert_allclose
import pytest

# My Modules
from kink_stability.config import SimulationConfig
from kink_stability.kgsim import TRAJECTORY_COLUMNS
from kink_stability.kgsim import CFLViolationError
from kink_stability.kgsim import InitialDataTooLargeError
from kink_stability.kgsim import decompose
from kink_stability.kgsim import field_force
from kink_stability.kgsim import global_norm
from kink_stability.kgsim import initialize
from kink_stability.kgsim import local_norm
from kink_stability.kgsim import modal_ode_residual
from kink_stability.kgsim import nonlinear_term
from kink_stability.kgsim import prepare_simulation
from kink_stability.kgsim import quadratic_source
from kink_stability.kgsim import run_experiment
from kink_stability.kgsim import sponge_profile
from kink_stability.kgsim import step
from kink_stability.kgsim import write_perturbation
from kink_stability.kink import Grid
from kink_stability.spectral import GridMismatchError

SHORT_RUN = SimulationConfig(
    delta=0.05, horizon=5.0, h_factor=0.1, length_factor=60.0, cadence=0.05
)


@pytest.fixture(scope="module")
def setup(phi4):
    return prepare_simulation(phi4, SHORT_RUN, 1e-2)


def test_discrete_kink_is_static(phi4, setup):
    assert np.max(np.abs(field_force(phi4, setup.static, setup.grid.h))) < 1e-9
    assert setup.static[0] == 0.0
    assert setup.static[-1] == setup.profile.H[-1]
    assert setup.lambda_sq == pytest.approx(1.5, abs=2e-2)


def test_unperturbed_kink_stays_put(setup):
    config = SimulationConfig(**{**vars(SHORT_RUN), "delta": 0.0})
    trajectory = run_experiment(setup, config)
    assert np.max(trajectory["abs_z"]) < 1e-6
    assert np.max(trajectory["global_norm"]) < 1e-6


def test_modal_equations_hold(setup):
    trajectory = run_experiment(setup, SHORT_RUN)
    size = float(np.max(trajectory["abs_z"]))
    assert size == pytest.approx(0.05, rel=0.1)
    for residual in modal_ode_residual(trajectory).values():
        assert np.max(np.abs(residual)) < 1e-2 * size
    assert len(trajectory.rows()[0]) == len(TRAJECTORY_COLUMNS)


def test_energy_is_conserved_without_a_sponge(phi4):
    config = SimulationConfig(**{**vars(SHORT_RUN), "sponge_strength": 0.0})
    conservative = prepare_simulation(phi4, config, 1e-2)
    summary = run_experiment(conservative, config).summary()
    assert summary.energy_drift < 1e-5
    assert summary.stability_constant >= 1.0
    assert not summary.reflection_warning
    assert set(summary.to_dict()) >= {"stability_constant", "z_ratio", "energy_drift"}


def test_time_step_above_the_cfl_limit(setup):
    state = initialize(setup, SHORT_RUN)
    with pytest.raises(CFLViolationError):
        step(setup, state, setup.grid.h)


def test_large_initial_data_is_refused(setup):
    config = SimulationConfig(**{**vars(SHORT_RUN), "delta": 0.5, "delta_max": 0.5})
    with pytest.raises(InitialDataTooLargeError):
        initialize(setup, config)


def test_bump_is_normalized(setup):
    config = SimulationConfig(**{**vars(SHORT_RUN), "mode": "bump"})
    state = initialize(setup, config)
    assert global_norm(setup, state) == pytest.approx(0.05, rel=1e-9)
    assert state.phi1[0] == 0.0


def test_file_mode(setup, tmp_path):
    path = tmp_path / "perturbation.csv"
    write_perturbation(path, setup.grid, setup.mode, np.zeros(setup.grid.n))
    config = SimulationConfig(
        **{**vars(SHORT_RUN), "mode": "file", "initial_file": str(path)}
    )
    decomposition = decompose(setup, initialize(setup, config))
    assert decomposition.z1 == pytest.approx(0.05, rel=1e-9)
    assert decomposition.z2 == pytest.approx(0.0, abs=1e-12)

    short = Grid(10.0, 11)
    write_perturbation(path, short, np.zeros(short.n), np.zeros(short.n))
    with pytest.raises(GridMismatchError):
        initialize(setup, config)


def test_sponge_profile():
    grid = Grid(10.0, 101)
    damping = sponge_profile(grid, 0.2, 1.0)
    assert np.all(damping[grid.x <= 8.0] == 0.0)
    assert damping[90] == pytest.approx(0.25)
    assert damping[-1] == pytest.approx(1.0)


def test_nonlinear_term_is_quadratic(phi4, setup):
    small = 1e-3 * setup.mode
    expected = quadratic_source(phi4, setup.static, setup.mode) * 1e-6
    assert_allclose(nonlinear_term(phi4, setup.static, small), expected, atol=2e-9)


@pytest.mark.slow
def test_long_run_settles(phi4):
    config = SimulationConfig(horizon=200.0)
    summary = run_experiment(prepare_simulation(phi4, config, 1e-2), config).summary()
    assert summary.stability_constant < 2.0
    assert summary.z_ratio < 1.0
    assert summary.window_ratio < 1.0


def test_window_norm(setup):
    state = initialize(setup, SHORT_RUN)
    inside = local_norm(setup, state)
    assert 0.0 < inside <= global_norm(setup, state)
    rest = initialize(setup, SimulationConfig(**{**vars(SHORT_RUN), "delta": 0.0}))
    assert local_norm(setup, rest) == 0.0


def test_alpha_and_beta_follow_the_modal_equations(setup):
    trajectory = run_experiment(setup, SHORT_RUN)
    size = float(np.max(trajectory["abs_z"]))
    residuals = modal_ode_residual(trajectory)
    assert np.max(np.abs(residuals["alpha"])) < 2e-2 * size**2
    assert np.max(np.abs(residuals["beta"])) < 2e-2 * size**2


def test_alpha_beta_square_sum_is_the_fourth_power(setup):
    state = initialize(setup, SHORT_RUN)
    for _ in range(200):
        state = step(setup, state)
    snapshot = decompose(setup, state)
    assert snapshot.z2 != 0.0
    assert snapshot.alpha**2 + snapshot.beta**2 == pytest.approx(
        snapshot.abs_z**4, rel=1e-12
    )


def test_small_data_oscillate_at_the_internal_frequency(setup):
    delta = 1e-3
    config = SimulationConfig(**{**vars(SHORT_RUN), "delta": delta, "horizon": 20.0})
    trajectory = run_experiment(setup, config)
    linear = delta * np.cos(np.sqrt(setup.lambda_sq) * trajectory.times)
    assert np.max(np.abs(trajectory["z1"] - linear)) <= 1e-2 * delta


@pytest.mark.slow
def test_kink_stays_put_for_many_steps(setup):
    steps = 100_000
    config = SimulationConfig(
        **{**vars(SHORT_RUN), "delta": 0.0, "horizon": steps * setup.dt, "cadence": 5.0}
    )
    trajectory = run_experiment(setup, config)
    assert np.max(trajectory["abs_z"]) < 1e-12
    assert np.max(trajectory["global_norm"]) < 1e-12


@pytest.mark.slow
def test_energy_drift_without_a_sponge_over_a_long_run(phi4):
    config = SimulationConfig(
        **{
            **vars(SHORT_RUN),
            "delta": 0.01,
            "horizon": 200.0,
            "dt_factor": 0.2,
            "sponge_strength": 0.0,
            "cadence": 0.5,
        }
    )
    conservative = prepare_simulation(phi4, config, 1e-2)
    summary = run_experiment(conservative, config).summary()
    assert summary.energy_drift <= 1e-6


@pytest.mark.slow
@pytest.mark.parametrize(
    ("h_factor", "length_factor"),
    [(0.05, 200.0), (0.025, 200.0), (0.05, 300.0)],
    ids=["base", "half-spacing", "longer-domain"],
)
def test_asymptotic_stability_signatures(phi4, h_factor, length_factor):
    config = SimulationConfig(
        delta=0.05, horizon=400.0, h_factor=h_factor, length_factor=length_factor
    )
    summary = run_experiment(prepare_simulation(phi4, config, 1e-2), config).summary()
    assert summary.z_ratio <= 0.5
    assert summary.window_ratio <= 0.25
    assert summary.z4_tail_fraction <= 0.2
    assert summary.rho_u1_tail_fraction <= 0.2
