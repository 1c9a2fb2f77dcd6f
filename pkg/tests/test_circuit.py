import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jjasim.circuit import (CircuitParams, analytic_inverse_matrix, build_capacitance_matrix,
                            inverse_coefficients, inverse_elements_exact, inverse_residual,
                            lambda_of_beta, reduce)
from jjasim.errors import DegenerateCouplingError, DomainError, ParameterError


def unit_params(beta, n):
    half = (1.0 - 2.0 * beta) / 2.0
    return CircuitParams(n, c_junction=half, c_gate=half, c_coupling=beta)


def test_capacitance_matrix_is_cyclic_tridiagonal():
    m = build_capacitance_matrix(CircuitParams(5, 1.0, 2.0, 0.5))
    assert m[0, 0] == pytest.approx(4.0)
    assert m[0, 1] == m[0, 4] == -0.5
    assert m[0, 2] == 0.0
    assert np.allclose(m, m.T)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 20), cj=st.floats(0.1, 5), cg=st.floats(0.01, 5), cc=st.floats(0.0, 5))
def test_capacitance_matrix_positive_definite(n, cj, cg, cc):
    m = build_capacitance_matrix(CircuitParams(n, cj, cg, cc))
    assert np.linalg.eigvalsh(m).min() > 0


def test_lambda_at_beta_0_4_is_one_half():
    assert abs(lambda_of_beta(0.4) - 0.5) < 1e-14


def test_lambda_small_beta_limit():
    assert abs(lambda_of_beta(1e-4) / 1e-4 - 1.0) < 1e-4
    assert lambda_of_beta(0.0) == 0.0


@given(st.floats(1e-9, 0.4999))
def test_lambda_solves_its_quadratic(beta):
    lam = lambda_of_beta(beta)
    # lam is the small root of beta*lam^2 - lam + beta = 0
    assert 0 <= lam < 1
    assert abs(beta * lam * lam - lam + beta) < 1e-12


@given(st.floats(1e-6, 0.4999), st.floats(1e-6, 0.4999))
def test_lambda_monotone(a, b):
    if a < b:
        assert lambda_of_beta(a) <= lambda_of_beta(b)


def test_lambda_domain():
    with pytest.raises(DomainError):
        lambda_of_beta(0.5)
    with pytest.raises(DomainError):
        lambda_of_beta(-0.1)


@pytest.mark.parametrize("beta", [0.05, 0.2, 0.4, 0.49])
@pytest.mark.parametrize("n", [6, 12, 32, 64])
def test_analytic_inverse_matches_numeric(beta, n):
    assert inverse_residual(beta, n) < 1e-10
    numeric = np.linalg.inv(build_capacitance_matrix(unit_params(beta, n)))
    assert np.max(np.abs(numeric - analytic_inverse_matrix(beta, n))) < 1e-10


def test_inverse_is_circulant_and_symmetric():
    inv = analytic_inverse_matrix(0.3, 9)
    assert np.allclose(inv, inv.T)
    assert np.allclose(np.roll(np.roll(inv, 2, 0), 2, 1), inv)


def test_inverse_elements_decay_geometrically_in_infinite_chain():
    lam = lambda_of_beta(0.3)
    els = inverse_elements_exact(0.3, 10, infinite=True)
    assert np.allclose(els[1:5] / els[:4], lam)


def test_inverse_coefficients_returns_lambda():
    lam, a0, b0 = inverse_coefficients(0.4, 12)
    assert lam == pytest.approx(0.5, abs=1e-14)
    assert a0 > 0


def test_reduce_embeds_lambda_and_serialises():
    red = reduce(CircuitParams(6, c_junction=0.05, c_gate=0.05, c_coupling=0.4, josephson_energy=1e-24))
    assert red.beta == pytest.approx(4 / 9)
    red = reduce(CircuitParams(6, c_junction=0.1e-15, c_gate=0.1e-15, c_coupling=0.4e-15,
                               josephson_energy=1e-24))
    assert red.beta == pytest.approx(0.4)
    assert red.lam == pytest.approx(0.5, abs=1e-12)
    assert red.field_b > 0
    assert json.loads(red.to_json())["lam"] == pytest.approx(0.5)


def test_reduce_rejects_decoupled_and_large_beta():
    with pytest.raises(DegenerateCouplingError):
        reduce(CircuitParams(6, 1.0, 1.0, 0.0))
    with pytest.raises(DomainError):
        reduce(unit_params(0.495, 6))


def test_reduce_requires_uniform_gate():
    with pytest.raises(ParameterError):
        reduce(CircuitParams(4, 1.0, [1.0, 1.0, 2.0, 1.0], 0.2))


@pytest.mark.parametrize("bad", [dict(n_sites=2), dict(c_junction=-1.0), dict(c_coupling=math.nan)])
def test_circuit_params_validation(bad):
    kw = dict(n_sites=4, c_junction=1.0, c_gate=1.0, c_coupling=0.2)
    kw.update(bad)
    with pytest.raises(ParameterError):
        CircuitParams(**kw)


def test_circuit_params_json_round_trip():
    p = CircuitParams(4, 1.0, 0.5, 0.2, 0.1, 0.5)
    text = json.dumps({"n_sites": 4, "c_junction": 1.0, "c_gate": 0.5, "c_coupling": 0.2,
                       "josephson_energy": 0.1, "gate_charge": 0.5})
    q = CircuitParams.from_json(text)
    assert np.allclose(build_capacitance_matrix(p), build_capacitance_matrix(q))
