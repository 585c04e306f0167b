# External Party
from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st
import numpy as np
from numpy.testing import assert_allclose
import pytest

# My Modules
from kink_stability.common.template import Outcome
from kink_stability.potential import EtaPerturbation
from kink_stability.potential import InvalidParameterError
from kink_stability.potential import PotentialKind
from kink_stability.potential import PotentialValidationError
from kink_stability.potential import eta_bound
from kink_stability.potential import from_spec
from kink_stability.potential import make_phi4
from kink_stability.potential import make_phi8_scaled
from kink_stability.potential import make_polynomial
from kink_stability.potential import perturb
from kink_stability.potential import validate


def test_phi4_derivatives(phi4):
    phi = np.linspace(-2.0, 2.0, 41)
    assert_allclose(phi4(phi), (phi**2 - 1) ** 2 / 4, atol=1e-15)
    assert_allclose(phi4(phi, 1), phi**3 - phi, atol=1e-14)
    assert_allclose(phi4(phi, 2), 3 * phi**2 - 1, atol=1e-14)
    assert_allclose(phi4(phi, 3), 6 * phi, atol=1e-14)
    assert_allclose(phi4(phi, 4), np.full_like(phi, 6.0), atol=1e-14)
    assert phi4(0.0) == pytest.approx(0.25)
    assert phi4.omega_sq == pytest.approx(2.0)


def test_derivative_order_is_bounded(phi4):
    with pytest.raises(InvalidParameterError, match="order 5"):
        phi4(0.5, 5)


def test_deficit_matches_direct_evaluation(phi4):
    deficit = np.logspace(-8, -1, 15)
    phi = 1.0 - deficit
    for order in range(5):
        assert_allclose(
            phi4(phi, order, deficit=deficit), phi4(phi, order), rtol=1e-7, atol=1e-15
        )


def test_deficit_keeps_relative_accuracy_in_the_tail(phi4):
    deficit = 1e-12
    # W = (2 d - d^2)^2 / 4 near the well
    exact = (2 * deficit - deficit**2) ** 2 / 4
    assert phi4(1.0 - deficit, deficit=deficit) == pytest.approx(exact, rel=1e-12)


def test_phi8_curvature():
    potential = make_phi8_scaled(2.0)
    assert potential.kind is PotentialKind.PHI8
    assert potential.omega_sq == pytest.approx(2 * 9 / 16)
    assert validate(potential).passed


@pytest.mark.parametrize("m", [1.0, 0.5, -3.0])
def test_phi8_needs_m_above_one(m):
    with pytest.raises(InvalidParameterError, match="m > 1"):
        make_phi8_scaled(m)


@settings(max_examples=50, deadline=None)
@given(
    m=st.floats(min_value=1.05, max_value=10.0),
    phi=st.floats(min_value=-3.0, max_value=3.0),
)
def test_phi8_is_even(m, phi):
    potential = make_phi8_scaled(m)
    assert potential(phi) == pytest.approx(potential(-phi), rel=1e-12, abs=1e-14)
    assert potential(phi, 1) == pytest.approx(-potential(-phi, 1), rel=1e-11, abs=1e-12)


def test_polynomial_reproduces_phi4(phi4):
    potential = make_polynomial([0.25, 0.0, -0.5, 0.0, 0.25])
    phi = np.linspace(-1.5, 1.5, 31)
    assert_allclose(potential(phi), phi4(phi), atol=1e-14)
    report = validate(potential)
    assert report.passed
    assert report.omega_sq == pytest.approx(2.0)


def test_validate_reports_each_clause():
    report = validate(make_polynomial([0.0, 0.0, 1.0]))
    assert not report.passed
    assert report.failures == ["zeros", "critical"]
    payload = report.to_dict()
    assert [clause["name"] for clause in payload["clauses"]] == [
        "even",
        "zeros",
        "critical",
        "convex",
        "positive",
    ]
    zeros = payload["clauses"][1]
    assert zeros["outcome"] == Outcome.FAIL.value
    assert zeros["value"] == pytest.approx(1.0)
    assert abs(zeros["witness"]) == 1.0


def test_validate_detects_odd_terms():
    # (phi^2 - 1)^2 (1/4 + phi/10)
    coefficients = [0.25, 0.1, -0.5, -0.2, 0.25, 0.1]
    assert validate(make_polynomial(coefficients)).failures == ["even"]


def test_validate_detects_a_negative_dip():
    # (phi^2 - 1)^2 (phi^2 - 1/4) is negative near the origin
    report = validate(make_polynomial([-0.25, 0.0, 1.5, 0.0, -2.25, 0.0, 1.0]))
    assert report.failures == ["positive"]


def test_empty_polynomial():
    with pytest.raises(InvalidParameterError):
        make_polynomial([])


def test_eta_must_be_even():
    with pytest.raises(InvalidParameterError, match="odd powers"):
        EtaPerturbation((0.0, 0.1))


@settings(deadline=None)
@given(st.floats(min_value=-0.2, max_value=0.2))
def test_eta_bound_of_a_constant(value):
    assert EtaPerturbation((value,)).eta0 == pytest.approx(abs(value))


def test_eta_bound_includes_derivatives():
    # eta = 0.1 phi^2 has eta' = 0.2 phi and eta'' = 0.2
    assert EtaPerturbation((0.0, 0.0, 0.1)).eta0 == pytest.approx(0.2)


def test_perturb_scales_the_curvature(phi4):
    perturbed = perturb(phi4, EtaPerturbation((0.0, 0.0, 0.1)))
    assert perturbed.kind is PotentialKind.PERTURBED
    assert perturbed.omega_sq == pytest.approx(2.2)
    phi = np.linspace(-1.0, 1.0, 21)
    assert_allclose(perturbed(phi), (1 + 0.1 * phi**2) * phi4(phi), atol=1e-15)


def test_perturb_rejects_large_eta(phi4):
    with pytest.raises(InvalidParameterError, match="exceeds threshold"):
        perturb(phi4, EtaPerturbation((0.0, 0.0, 0.3)))


def test_perturb_needs_an_admissible_base():
    with pytest.raises(PotentialValidationError):
        perturb(make_polynomial([0.0, 0.0, 1.0]), EtaPerturbation((0.01,)))


@pytest.mark.parametrize(
    ("spec", "kind"),
    [
        ({"kind": "phi4"}, PotentialKind.PHI4),
        ({"kind": "phi8", "m": 3}, PotentialKind.PHI8),
        ({"kind": "poly", "coeffs": [0.25, 0, -0.5, 0, 0.25]}, PotentialKind.POLY),
        (
            {"kind": "perturbed", "base": {"kind": "phi4"}, "eta_coeffs": [0.05]},
            PotentialKind.PERTURBED,
        ),
    ],
)
def test_from_spec(spec, kind):
    potential = from_spec(spec)
    assert potential.kind is kind
    assert validate(potential).passed


def test_from_spec_errors():
    with pytest.raises(InvalidParameterError, match="unknown potential kind"):
        from_spec({"kind": "sine-gordon"})
    with pytest.raises(InvalidParameterError, match="missing"):
        from_spec({"kind": "phi8"})


def test_constant_eta_scales_every_derivative(phi4):
    perturbed = perturb(phi4, EtaPerturbation((0.01,)))
    phi = np.linspace(-1.2, 1.2, 25)
    for order in range(5):
        assert_allclose(perturbed(phi, order), 1.01 * phi4(phi, order), atol=1e-14)
    assert perturbed.omega_sq == pytest.approx(2.02)


@pytest.mark.parametrize("m", [1.5, 2.0, 3.0, 5.0, 10.0])
def test_phi8_family_is_admissible(m):
    assert validate(make_phi8_scaled(m)).passed


def test_phi8_approaches_phi4_for_large_m(phi4):
    phi = np.linspace(-1.0, 1.0, 201)
    gaps = [
        np.max(np.abs(make_phi8_scaled(m)(phi) - phi4(phi))) for m in (5.0, 10.0, 100.0)
    ]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-4


def test_eta_bound_covers_every_derivative():
    assert eta_bound(EtaPerturbation((0.01,))) == pytest.approx(0.01)
    assert eta_bound(EtaPerturbation((0.0, 0.0, 0.1))) == pytest.approx(0.2)


@pytest.mark.parametrize(
    "spec",
    [
        {"kind": "phi4"},
        {"kind": "phi8", "m": 3.0},
        {"kind": "perturbed", "base": {"kind": "phi4"}, "eta_coeffs": [0.0, 0.0, 0.01]},
    ],
)
def test_to_spec_rebuilds_the_potential(spec):
    potential = from_spec(spec)
    written = potential.to_spec()
    assert written == spec
    rebuilt = from_spec(written)
    assert rebuilt.name == potential.name
    assert rebuilt.omega_sq == pytest.approx(potential.omega_sq)
    written["kind"] = "poly"
    assert potential.to_spec()["kind"] == spec["kind"]


@pytest.mark.parametrize(
    "potential",
    [make_phi4(), make_phi8_scaled(2.0), make_phi8_scaled(5.0)],
    ids=["phi4", "phi8-2", "phi8-5"],
)
def test_exact_derivatives_match_central_differences(potential):
    phi = np.random.default_rng(20).uniform(-1.2, 1.2, 20)
    step = 1e-4
    for order in range(4):
        central = (potential(phi + step, order) - potential(phi - step, order)) / (
            2 * step
        )
        assert_allclose(central, potential(phi, order + 1), rtol=1e-6, atol=1e-7)
