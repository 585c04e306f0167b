# Standard Library
import logging

# External Party
import numpy as np
from numpy.testing import assert_allclose
import pytest

# My Modules
from kink_stability.common.numerics import line_norm
from kink_stability.common.template import Outcome
from kink_stability.kink import Grid
from kink_stability.kink import GridError
from kink_stability.kink import Sector
from kink_stability.kink import solve_kink
from kink_stability.potential import make_phi8_scaled
from kink_stability.spectral import GridMismatchError
from kink_stability.spectral import NoSignChangeError
from kink_stability.spectral import SchrodingerOperator
from kink_stability.spectral import SpectralWindowError
from kink_stability.spectral import assess_internal_mode
from kink_stability.spectral import build_L0
from kink_stability.spectral import check_hypothesis1
from kink_stability.spectral import discrete_spectrum
from kink_stability.spectral import perturbation_shift
from kink_stability.spectral import shooting_eigenvalue
from kink_stability.spectral import sturm_count
from kink_stability.spectral import zero_mode_residual

SQRT2 = np.sqrt(2.0)


def oscillator(sector, upper):
    grid = Grid(10.0, 2001)
    return SchrodingerOperator(grid, grid.x**2, upper, sector)


@pytest.mark.parametrize("seed", range(5))
def test_sturm_count_matches_dense_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    diagonal, off = rng.normal(size=40), rng.normal(size=39)
    shift = rng.normal()
    dense = np.diag(diagonal) + np.diag(off, 1) + np.diag(off, -1)
    expected = int(np.sum(np.linalg.eigvalsh(dense) < shift))
    assert sturm_count(diagonal, off, shift) == expected


def test_matrix_and_stencil_agree():
    operator = oscillator(Sector.ODD, 12.0)
    diagonal, off = operator.tridiagonal()
    values = operator.grid.x * np.exp(-operator.grid.x)
    values[-1] = 0.0
    inner = values[1:-1]
    product = diagonal * inner
    product[:-1] += off * inner[1:]
    product[1:] += off * inner[:-1]
    assert_allclose(operator.apply(values)[1:-1], product, rtol=1e-9, atol=1e-8)


@pytest.mark.parametrize(
    ("sector", "upper", "expected"),
    [(Sector.ODD, 12.0, [3.0, 7.0, 11.0]), (Sector.EVEN, 10.0, [1.0, 5.0, 9.0])],
)
def test_oscillator_levels(sector, upper, expected, caplog):
    caplog.set_level(logging.WARNING, logger="kink_stability")
    spectrum = discrete_spectrum(oscillator(sector, upper), upper)
    assert "away from its limit" in caplog.text
    assert_allclose(spectrum.eigenvalues, expected, rtol=1e-7)
    assert np.all(spectrum.convergence < 1e-2)
    assert not np.any(spectrum.near_threshold)
    for function in spectrum.eigenfunctions:
        assert line_norm(function, spectrum.grid.h) == pytest.approx(1.0)


def test_oscillator_ground_state():
    spectrum = discrete_spectrum(oscillator(Sector.ODD, 12.0), 12.0)
    x = spectrum.grid.x
    exact = x * np.exp(-(x**2) / 2) * SQRT2 / np.pi**0.25
    assert_allclose(spectrum.eigenfunctions[0], exact, atol=1e-6)


def test_extrapolation_can_be_skipped():
    spectrum = discrete_spectrum(oscillator(Sector.ODD, 12.0), 12.0, extrapolate=False)
    assert np.all(spectrum.convergence == 0.0)
    assert_allclose(spectrum.eigenvalues, [3.0, 7.0, 11.0], rtol=1e-3)


def test_window_above_the_continuum():
    with pytest.raises(SpectralWindowError):
        discrete_spectrum(oscillator(Sector.ODD, 12.0), 13.0)


def test_operator_checks_its_samples():
    grid = Grid(10.0, 101)
    with pytest.raises(GridMismatchError):
        SchrodingerOperator(grid, np.zeros(5), 0.0, Sector.ODD)
    with pytest.raises(GridError):
        SchrodingerOperator(grid, np.zeros(101), 0.0, Sector.ODD, kinetic=0.0)
    with pytest.raises(GridMismatchError):
        SchrodingerOperator(grid, np.zeros(101), 0.0, Sector.ODD).restricted(
            Grid(10.0, 11)
        )


def test_no_internal_mode_in_a_flat_well():
    grid = Grid(10.0, 1001)
    report = assess_internal_mode(
        SchrodingerOperator(grid, np.ones(grid.n), 1.0, Sector.ODD)
    )
    assert report.outcome is Outcome.FAIL
    assert report.lambda_sq is None
    assert report.lam is None
    assert report.multiplicity == 0
    assert np.isnan(perturbation_shift(report, report))


def test_phi4_internal_mode(phi4_mode):
    assert phi4_mode.outcome is Outcome.PASS
    assert phi4_mode.lambda_sq == pytest.approx(1.5, abs=1e-6)
    assert phi4_mode.multiplicity == 1
    assert phi4_mode.in_window
    payload = phi4_mode.to_dict()
    assert payload["odd_modes"] == 1
    assert payload["lambda"] == pytest.approx(np.sqrt(1.5), abs=1e-6)
    assert perturbation_shift(phi4_mode, phi4_mode) == 0.0


def test_phi4_internal_mode_shape(phi4_mode, phi4_grid):
    y = phi4_grid.x / SQRT2
    norm = np.sqrt(2 * SQRT2 / 3)
    exact = np.tanh(y) / np.cosh(y) / norm
    assert_allclose(phi4_mode.Y, exact, atol=1e-6)


def test_phi4_zero_mode(phi4, phi4_profile):
    even = discrete_spectrum(build_L0(phi4, phi4_profile, Sector.EVEN))
    assert abs(even.eigenvalues[0]) < 1e-6
    assert zero_mode_residual(phi4, phi4_profile) < 1e-4


def test_phi4_shooting(phi4, phi4_profile):
    operator = build_L0(phi4, phi4_profile, Sector.ODD)
    assert shooting_eigenvalue(operator, (1.45, 1.55)) == pytest.approx(1.5, abs=1e-6)
    with pytest.raises(NoSignChangeError):
        shooting_eigenvalue(operator, (0.2, 0.3))


def test_profile_must_match_the_grid(phi4, phi4_profile):
    with pytest.raises(GridMismatchError):
        build_L0(phi4, phi4_profile, Sector.ODD, Grid(10.0, 101))


def sech_well(depth, sector):
    grid = Grid(20.0, 4001)
    return SchrodingerOperator(grid, -depth / np.cosh(grid.x) ** 2, 0.0, sector)


def test_single_sech_well_has_only_an_even_state():
    even = discrete_spectrum(sech_well(2.0, Sector.EVEN))
    assert even.count == 1
    assert even.eigenvalues[0] == pytest.approx(-1.0, abs=1e-7)
    exact = 1.0 / np.cosh(even.grid.x) / SQRT2
    assert_allclose(even.eigenfunctions[0], exact, atol=1e-5)
    odd = assess_internal_mode(sech_well(2.0, Sector.ODD))
    assert odd.outcome is Outcome.FAIL
    assert odd.lambda_sq is None


def test_shooting_agrees_with_the_matrix_for_a_deeper_well():
    operator = sech_well(6.0, Sector.ODD)
    matrix = discrete_spectrum(operator)
    assert matrix.count == 1
    assert matrix.eigenvalues[0] == pytest.approx(-1.0, abs=1e-7)
    shooting = shooting_eigenvalue(operator, (-1.1, -0.9))
    assert shooting == pytest.approx(matrix.eigenvalues[0], abs=1e-6)


def test_shooting_agrees_with_the_matrix_for_phi8():
    potential = make_phi8_scaled(5.0)
    profile = solve_kink(potential, Grid.default(potential.omega))
    operator = build_L0(potential, profile, Sector.ODD)
    report = assess_internal_mode(operator)
    width = 0.01 * potential.omega_sq
    bracket = (report.lambda_sq - width, report.lambda_sq + width)
    assert shooting_eigenvalue(operator, bracket) == pytest.approx(
        report.lambda_sq, abs=1e-6
    )


def test_longer_domain_keeps_the_internal_mode(phi4, phi4_grid, phi4_mode):
    longer = phi4_grid.extended(1.25)
    assert longer.half_length == pytest.approx(1.25 * phi4_grid.half_length)
    report = check_hypothesis1(phi4, solve_kink(phi4, longer))
    assert abs(report.lambda_sq - phi4_mode.lambda_sq) <= 1e-8
