import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jjasim.errors import DomainError, ParameterError
from jjasim.exact import (Propagator, antiphase_indices, classical_configurations, classical_energies,
                          correlation_z, correlation_z_squared, escape_probability_exact,
                          escape_probability_perturbative, evolve_exact, ground_state, leakage_gap,
                          phase_probability_grid, probability_antiphase, probability_fm,
                          probability_pm, with_symmetry_breaking)
from jjasim.spinops import (StateVector, basis_state, build_annni_hamiltonian, product_state,
                            realize_dense)


def open_tfim_energy(n, b):
    """Free-fermion ground energy of the open transverse-field Ising chain."""
    m = np.diag(np.full(n, b)) + np.diag(np.ones(n - 1), 1)
    return -np.linalg.svd(m, compute_uv=False).sum()


@pytest.mark.parametrize("b", [0.3, 1.0, 1.7])
def test_open_tfim_against_free_fermions(b):
    res = ground_state(build_annni_hamiltonian(9, 0.0, b, "open"))
    assert res.energy == pytest.approx(open_tfim_energy(9, b), abs=1e-10)


def test_lanczos_branch_agrees_with_dense():
    op = build_annni_hamiltonian(10, 0.4, 0.3)
    dense = ground_state(op)
    sparse = ground_state(op, cap=64)
    assert sparse.energy == pytest.approx(dense.energy, abs=1e-9)
    assert abs(abs(dense.ground_state.overlap(sparse.ground_state)) - 1) < 1e-6


def test_antiphase_ground_energy_by_enumeration():
    e = classical_energies(6, 0.7)
    assert e.min() == pytest.approx(-3.4)
    res = ground_state(build_annni_hamiltonian(6, 0.7, 0.0))
    assert res.energy == pytest.approx(-3.4)
    assert res.degeneracy_flag
    assert res.degeneracy == int(np.sum(np.isclose(e, e.min())))


def test_classical_configurations_order():
    c = classical_configurations(3)
    assert c[0].tolist() == [1, 1, 1]
    assert c[1].tolist() == [1, 1, -1]


def test_ground_state_deterministic_and_normalised():
    op = build_annni_hamiltonian(6, 0.7, 0.0)
    a, b = ground_state(op), ground_state(op)
    assert np.array_equal(a.ground_state.amplitudes, b.ground_state.amplitudes)
    assert a.ground_state.norm == pytest.approx(1.0)


def test_fm_regime_probability():
    psi = ground_state(build_annni_hamiltonian(6, 0.2, 0.1)).ground_state
    assert probability_fm(psi) > 0.9


def test_pm_regime_probability():
    psi = ground_state(build_annni_hamiltonian(6, 0.2, 5.0)).ground_state
    assert probability_pm(psi) > 0.9


def test_antiphase_probability_at_zero_field():
    psi = ground_state(build_annni_hamiltonian(8, 0.8, 0.0)).ground_state
    assert probability_antiphase(psi) == pytest.approx(1.0)
    assert len(antiphase_indices(8)) == 4


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0, 1), b=st.floats(0, 2))
def test_phase_probabilities_are_probabilities(lam, b):
    psi = ground_state(build_annni_hamiltonian(6, lam, b)).ground_state
    for p in (probability_fm(psi), probability_pm(psi), probability_antiphase(psi)):
        assert -1e-12 <= p <= 1 + 1e-12
    assert probability_fm(psi) + probability_antiphase(psi) <= 1 + 1e-12


def test_symmetry_breaking_selects_one_ferromagnet():
    op = with_symmetry_breaking(build_annni_hamiltonian(6, 0.0, 0.05), 1e-3)
    psi = ground_state(op).ground_state
    assert abs(psi.amplitudes[-1]) ** 2 > 0.9


def test_fm_correlations_long_range():
    psi = ground_state(build_annni_hamiltonian(6, 0.0, 0.2)).ground_state
    for d in range(1, 6):
        assert correlation_z(psi, d, "periodic") > 0.9
    assert correlation_z(psi, 0) == pytest.approx(1.0)
    assert correlation_z_squared(psi, 2, "periodic") == pytest.approx(correlation_z(psi, 2, "periodic") ** 2)


def test_correlation_open_chain_bounds():
    psi = product_state([1, 0], 6)
    assert correlation_z(psi, 2) == 0.0
    with pytest.raises(ParameterError):
        correlation_z(psi, 3)


def test_leakage_formula_values():
    assert escape_probability_perturbative(1.0, 0.2, 10) == pytest.approx(0.05, abs=1e-15)
    assert leakage_gap(0.5) == pytest.approx(3.0)
    assert escape_probability_perturbative(0.5, 0.2, 10) == pytest.approx(0.4 / 18)
    assert leakage_gap(1.0) == 2.0
    with pytest.raises(DomainError):
        leakage_gap(0.0)


def test_leakage_warns_outside_perturbative_regime():
    with pytest.warns(RuntimeWarning):
        escape_probability_perturbative(1.0, 1.0, 4)


def test_exact_leakage_ratio_order_one_and_monotone():
    grid = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
    exact = [escape_probability_exact(4, 1.0, b, reference="ferromagnet") for b in grid]
    assert all(np.diff(exact) > 0)
    ratios = [escape_probability_exact(4, 1.0, b, reference="ferromagnet")
              / escape_probability_perturbative(1.0, b, 4) for b in (0.005, 0.01, 0.02)]
    assert all(0.5 < r < 2 for r in ratios)
    assert abs(ratios[0] - ratios[1]) < 0.01


def test_leakage_ground_reference_differs_when_frustrated():
    g = escape_probability_exact(4, 1.0, 0.05, reference="ground")
    f = escape_probability_exact(4, 1.0, 0.05, reference="ferromagnet")
    assert g != pytest.approx(f)
    with pytest.raises(DomainError):
        escape_probability_exact(4, 1.0, 0.05, local_dim=2)


def test_propagator_unitary_and_composes():
    op = build_annni_hamiltonian(5, 0.3, 0.4)
    prop = Propagator(op)
    u = prop.matrix(0.7)
    assert np.allclose(u @ u.conj().T, np.eye(32))
    assert np.allclose(prop.matrix(0.3) @ prop.matrix(0.4), u)
    psi = basis_state([0, 1, 0, 1, 1])
    assert np.allclose(evolve_exact(op, psi, 0.7).amplitudes, u @ psi.amplitudes)


def test_energy_conserved_under_exact_evolution():
    op = build_annni_hamiltonian(6, 0.5, 0.3)
    h = realize_dense(op)
    psi = product_state(np.array([1, 1]) / math.sqrt(2), 6)
    out = evolve_exact(op, psi, 2.3)
    e = lambda v: np.real(v.amplitudes.conj() @ h @ v.amplitudes)
    assert e(out) == pytest.approx(e(psi), abs=1e-12)


def test_phase_grid_rows():
    rows = phase_probability_grid(6, [0.0, 1.0], [0.0, 0.5])
    assert len(rows) == 4
    assert rows[0][:3] == (6, 0.0, 0.0)
    assert rows[0][5] == pytest.approx(1.0)
