"""Coefficient and Hamiltonian families and their structural checks."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gradlab.errors import ParameterError, StructureViolationError
from gradlab.model.families import (
    PerturbedPower,
    PowerDiffusion,
    PowerHamiltonian,
    check_growth_conditions,
    check_structure_conditions,
    eval_diffusion,
    eval_hamiltonian,
)


def test_power_diffusion_values():
    a2 = PowerDiffusion(2.0)
    assert eval_diffusion(a2, 7.3) == (1.0, 0.0)
    a3 = PowerDiffusion(3.0)
    a, ap = eval_diffusion(a3, 4.0)
    assert a == pytest.approx(2.0, abs=1e-15)
    assert ap == pytest.approx(0.25, abs=1e-15)


def test_power_diffusion_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        PowerDiffusion(1.0)
    with pytest.raises(ParameterError):
        eval_diffusion(PowerDiffusion(2.0), 0.0)


def test_perturbed_power_values():
    fam = PerturbedPower(2.0, 0.1)
    a, ap = eval_diffusion(fam, 1.0)
    assert a == pytest.approx(1.0, abs=1e-15)
    assert ap == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ParameterError):
        PerturbedPower(2.0, 0.25)


def test_structure_constants_cubic_diffusion():
    # for a(t) = t^(1/2): 2 t a'/a = 1 and (a + 2 t a')/a = 2, exactly
    report = check_structure_conditions(PowerDiffusion(3.0), 1e-2, 1e2)
    assert report.inf_ratio == pytest.approx(1.0, abs=1e-12)
    assert report.sup_ratio == pytest.approx(1.0, abs=1e-12)
    assert report.ellipticity_margin == pytest.approx(2.0, abs=1e-12)
    assert report.env_lower == pytest.approx(1.0, abs=1e-12)
    assert report.env_upper == pytest.approx(1.0, abs=1e-12)
    assert report.passed


def test_structure_sampling_is_stable_under_refinement():
    fam = PerturbedPower(2.0, 0.2)
    coarse = check_structure_conditions(fam, 1e-2, 1e2, samples=512)
    dense = check_structure_conditions(fam, 1e-2, 1e2, samples=200_000)
    assert coarse.inf_ratio == pytest.approx(dense.inf_ratio, abs=2e-3)
    assert coarse.sup_ratio == pytest.approx(dense.sup_ratio, abs=2e-3)
    assert coarse.ellipticity_margin == pytest.approx(
        dense.ellipticity_margin, abs=2e-3
    )


def test_structure_check_names_violating_sample():
    class SignFlip:
        p = 2.0

        def a(self, t):
            return 1.0 - np.asarray(t)  # negative for t > 1

        def a_prime(self, t):
            return -np.ones_like(np.asarray(t))

    with pytest.raises(StructureViolationError) as err:
        check_structure_conditions(SignFlip(), 0.5, 2.0)
    assert "t =" in str(err.value)


def test_structure_check_parameter_validation():
    with pytest.raises(ParameterError):
        check_structure_conditions(PowerDiffusion(2.0), 1.0, 2.0, samples=10)
    with pytest.raises(ParameterError):
        check_structure_conditions(PowerDiffusion(2.0), 2.0, 1.0)


def test_hamiltonian_values_and_constants():
    ham = PowerHamiltonian(2.0, eps=0.0)
    value, grad = eval_hamiltonian(ham, (3.0, 4.0))
    assert value == pytest.approx(25.0)
    assert np.allclose(grad, (6.0, 8.0))
    assert ham.lower_growth_constant == 2.0
    # gradient growth constant gamma * 2^(gamma/2)
    assert PowerHamiltonian(3.0).gradient_growth_constant == pytest.approx(
        3.0 * 2.0**1.5
    )
    assert PowerHamiltonian(6.0).gradient_growth_constant == pytest.approx(48.0)


def test_hamiltonian_h_of_w_vectorized():
    ham = PowerHamiltonian(3.0, eps=1e-2)
    w = np.array([1.0, 4.0, 9.0])
    assert np.allclose(ham.h_of_w(w), w**1.5)
    assert np.allclose(ham.h_prime_of_w(w), 1.5 * w**0.5)


def test_hamiltonian_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        PowerHamiltonian(1.0)
    with pytest.raises(ParameterError):
        PowerHamiltonian(2.0, eps=-1.0)
    # a large regularization breaks the normalized gradient growth bound
    # (gamma must exceed 2 for eps to enter the gradient at all)
    with pytest.raises(StructureViolationError):
        PowerHamiltonian(3.0, eps=9.0)


def test_growth_conditions_power_family():
    report = check_growth_conditions(PowerHamiltonian(3.0, eps=1e-2), 1.0, 1e3)
    assert report.passed
    assert report.lower_constant >= 1.0
    assert report.upper_constant <= 3.0 * 2.0**1.5
    with pytest.raises(ParameterError):
        check_growth_conditions(PowerHamiltonian(3.0), 0.5, 10.0)


@given(
    p=st.floats(min_value=1.1, max_value=5.0, allow_nan=False),
    t=st.floats(min_value=1e-3, max_value=1e3, allow_nan=False),
)
def test_power_ratio_is_p_minus_2(p, t):
    a, ap = eval_diffusion(PowerDiffusion(p), t)
    assert 2.0 * t * ap / a == pytest.approx(p - 2.0, abs=1e-10)


@given(
    gamma=st.floats(min_value=1.1, max_value=6.0, allow_nan=False),
    s=st.floats(min_value=1.0, max_value=100.0, allow_nan=False),
)
def test_hamiltonian_growth_bounds_pointwise(gamma, s):
    ham = PowerHamiltonian(gamma, eps=0.5)
    xi = np.zeros(2)
    xi[0] = s
    value = ham.value(xi)
    grad = np.linalg.norm(ham.gradient(xi))
    assert value >= ham.lower_growth_constant / 2.0 * s**gamma - 1e-9
    assert grad <= ham.gradient_growth_constant * s ** (gamma - 1.0) * (1 + 1e-12)
