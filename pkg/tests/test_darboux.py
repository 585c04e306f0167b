# Standard Library
import logging

# External Party
import numpy as np
from numpy.testing import assert_allclose
import pytest

# My Modules
from kink_stability.common.numerics import ODD
from kink_stability.common.numerics import line_inner
from kink_stability.common.numerics import line_norm
from kink_stability.common.numerics import second_derivative
from kink_stability.darboux import RegularizedTransform
from kink_stability.darboux import RiccatiBlowUpError
from kink_stability.darboux import TransformError
from kink_stability.darboux import apply_S_epsilon
from kink_stability.darboux import apply_U1U0
from kink_stability.darboux import build_darboux
from kink_stability.darboux import coercivity_ratio
from kink_stability.darboux import commutator_probe
from kink_stability.darboux import conjugation_residual
from kink_stability.darboux import conjugation_study
from kink_stability.darboux import conjugation_test_functions
from kink_stability.darboux import project_out
from kink_stability.darboux import random_probe
from kink_stability.darboux import transform_bound_ratios
from kink_stability.kink import Grid
from kink_stability.kink import solve_kink
from kink_stability.spectral import GridMismatchError

SQRT2 = np.sqrt(2.0)


def test_phi4_log_derivatives(phi4_darboux):
    y = phi4_darboux.grid.x / SQRT2
    assert_allclose(phi4_darboux.q0, -SQRT2 * np.tanh(y), atol=1e-10)
    assert_allclose(phi4_darboux.q1, -np.tanh(y) / SQRT2, atol=1e-8)
    assert_allclose(phi4_darboux.Z, 1.0 / np.cosh(y), atol=1e-8)
    assert phi4_darboux.riccati_mismatch < 1e-8


def test_phi4_partner_potentials(phi4_darboux):
    y = phi4_darboux.grid.x / SQRT2
    assert_allclose(phi4_darboux.P1, 2.0 - 1.0 / np.cosh(y) ** 2, atol=1e-10)
    assert_allclose(phi4_darboux.P2, 2.0, atol=1e-7)
    assert_allclose(phi4_darboux.P2p, 0.0, atol=1e-7)
    assert np.all(phi4_darboux.Z > 0)


def test_internal_mode_is_the_kernel(phi4_darboux, phi4_mode):
    h = phi4_darboux.grid.h
    image = apply_U1U0(phi4_darboux, phi4_mode.Y)
    assert line_norm(image, h) < 1e-5


def test_intertwining(phi4, phi4_profile, phi4_darboux):
    x = phi4_profile.grid.x
    h = phi4_profile.grid.h
    f = x * np.exp(-(x**2) / 4)
    curvature = phi4(phi4_profile.H, 2, deficit=phi4_profile.deficit)
    l0_f = -second_derivative(f, h, ODD) + curvature * f
    u_f = apply_U1U0(phi4_darboux, f)
    left = apply_U1U0(phi4_darboux, l0_f)
    right = -second_derivative(u_f, h, ODD) + phi4_darboux.P2 * u_f
    inner = x <= 10.0
    scale = np.max(np.abs(right[inner]))
    assert np.max(np.abs(left[inner] - right[inner])) < 1e-4 * scale


def test_wrong_eigenvalue(phi4_profile, caplog):
    caplog.set_level(logging.WARNING, logger="kink_stability")
    with pytest.raises(RiccatiBlowUpError, match="not below"):
        build_darboux(phi4_profile, 2.5)
    below = build_darboux(phi4_profile, 1.4)
    assert below.riccati_mismatch > 1e-3
    assert "misses q1(0)=0" in caplog.text


def test_transform_inverts_the_regularizer(phi4_transform):
    x = phi4_transform.grid.x
    f = np.sin(x) * np.exp(-x / 4)
    f[-1] = 0.0
    solved = phi4_transform.solve(f)
    assert solved[0] == solved[-1] == 0.0
    assert_allclose(phi4_transform.regularizer(solved)[1:-1], f[1:-1], atol=1e-10)


@pytest.mark.parametrize("epsilon", [0.0, 1.0, -0.1])
def test_transform_epsilon_range(phi4_grid, epsilon):
    with pytest.raises(TransformError):
        RegularizedTransform.build(phi4_grid, epsilon)


def test_samples_must_match_the_grid(phi4_darboux, phi4_transform):
    with pytest.raises(GridMismatchError):
        apply_U1U0(phi4_darboux, np.zeros(10))
    with pytest.raises(GridMismatchError):
        phi4_transform.solve(np.zeros(10))


def test_commutator_vanishes_for_constant_p2(phi4_darboux, phi4_transform, phi4_mode):
    rng = np.random.default_rng(7)
    probe = random_probe(phi4_darboux.grid, phi4_mode.Y, rng)
    assert commutator_probe(phi4_transform, phi4_darboux, probe) < 1e-6


def test_random_probes_are_odd_and_orthogonal(phi4_grid, phi4_mode):
    rng = np.random.default_rng(0)
    for _ in range(5):
        probe = random_probe(phi4_grid, phi4_mode.Y, rng)
        assert probe[0] == pytest.approx(0.0, abs=1e-12)
        assert probe[-1] == pytest.approx(0.0, abs=1e-12)
        size = line_norm(probe, phi4_grid.h)
        assert size > 0
        assert abs(line_inner(probe, phi4_mode.Y, phi4_grid.h)) < 1e-10 * size


def test_probes_are_reproducible(phi4_grid, phi4_mode):
    first = random_probe(phi4_grid, phi4_mode.Y, np.random.default_rng(3))
    second = random_probe(phi4_grid, phi4_mode.Y, np.random.default_rng(3))
    assert np.array_equal(first, second)


def test_coercivity_and_bounds(phi4_darboux, phi4_transform, phi4_mode, phi4_weights):
    rng = np.random.default_rng(11)
    for _ in range(3):
        probe = random_probe(phi4_darboux.grid, phi4_mode.Y, rng)
        ratio = coercivity_ratio(
            phi4_transform, phi4_darboux, phi4_mode.Y, probe, phi4_weights
        )
        assert 0 < ratio < np.inf
        first, second = transform_bound_ratios(
            phi4_transform, phi4_darboux, probe, phi4_weights
        )
        assert 0 < first < np.inf
        assert 0 < second < np.inf


def test_coercivity_needs_orthogonality(
    phi4_darboux, phi4_transform, phi4_mode, phi4_weights
):
    with pytest.raises(TransformError, match="not orthogonal"):
        coercivity_ratio(
            phi4_transform, phi4_darboux, phi4_mode.Y, phi4_mode.Y, phi4_weights
        )
    zero = np.zeros(phi4_darboux.grid.n)
    assert (
        coercivity_ratio(phi4_transform, phi4_darboux, phi4_mode.Y, zero, phi4_weights)
        == 0.0
    )


def test_project_out_removes_the_mode(phi4_mode, phi4_grid):
    h = phi4_grid.h
    mixed = 0.3 * phi4_mode.Y + np.tanh(phi4_grid.x) / np.cosh(phi4_grid.x / 5)
    assert line_inner(project_out(mixed, phi4_mode.Y, h), phi4_mode.Y, h) == (
        pytest.approx(0.0, abs=1e-12)
    )


def test_regularized_transform_kills_the_mode(phi4_darboux, phi4_transform, phi4_mode):
    h = phi4_darboux.grid.h
    image = apply_S_epsilon(phi4_transform, phi4_darboux, phi4_mode.Y)
    assert line_norm(image, h) < 1e-5
    x = phi4_darboux.grid.x
    f = x * np.exp(-(x**2))
    assert_allclose(
        apply_S_epsilon(phi4_transform, phi4_darboux, f),
        phi4_transform.solve(apply_U1U0(phi4_darboux, f)),
    )


def test_conjugation_converges_under_refinement(phi4):
    residuals, orders = conjugation_study(phi4, 1.5)
    assert residuals.shape == (3, 3)
    assert np.all(residuals[1:] < residuals[:-1])
    assert np.all(orders >= 1.8)


def test_conjugation_test_functions_are_compact(phi4_grid):
    for f in conjugation_test_functions(phi4_grid):
        assert f[0] == 0.0
        assert np.all(f[phi4_grid.x >= 6.0] == 0.0)
        assert np.max(np.abs(f)) > 0


def test_conjugation_residual_checks_the_grid(phi4, phi4_darboux):
    short = solve_kink(phi4, Grid(20.0, 101))
    with pytest.raises(GridMismatchError):
        conjugation_residual(short, phi4_darboux, np.zeros(phi4_darboux.grid.n))
