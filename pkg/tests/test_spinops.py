import json
from functools import reduce as fold

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jjasim.errors import CapacityError, DomainError, ParameterError
from jjasim.spinops import (OperatorSum, StateVector, Term, apply, basis_state,
                            build_annni_hamiltonian, build_jja_hamiltonian,
                            build_multilevel_hamiltonian, expectation, local_matrix, product_state,
                            realize_dense, realize_sparse, rotate_x, rx_matrix)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def embed(ops: dict, n):
    return fold(np.kron, [ops.get(i, I2) for i in range(n)])


def kron_annni(n, lam, b, periodic=True):
    """Independent dense construction, site 0 leftmost in the Kronecker product."""
    h = np.zeros((2**n, 2**n), dtype=complex)
    for d, c in ((1, -1.0), (2, lam)):
        pairs = {tuple(sorted((i, (i + d) % n))) for i in range(n) if periodic or i + d < n}
        for i, k in pairs:
            h += c * embed({i: Z, k: Z}, n)
    for i in range(n):
        h -= b * embed({i: X}, n)
    return h


@pytest.mark.parametrize("periodic", [True, False])
def test_annni_matches_kron_oracle(periodic):
    op = build_annni_hamiltonian(5, 0.35, 0.6, "periodic" if periodic else "open")
    assert np.allclose(realize_dense(op), kron_annni(5, 0.35, 0.6, periodic), atol=1e-14)


def test_basis_ordering_site0_most_significant():
    psi = basis_state([1, 0, 0])
    assert np.argmax(np.abs(psi.amplitudes)) == 4
    z0 = realize_dense(OperatorSum(3, 2, (Term(1.0, ((0, "z"),)),)))
    assert z0[4, 4] == -1 and z0[0, 0] == 1


def test_jja_range3_coefficient():
    op = build_jja_hamiltonian(6, 0.5, 0.0, 3)
    assert op.coefficient(((1, "z"), (4, "z"))) == pytest.approx(-0.25)
    assert op.coefficient(((0, "z"), (2, "z"))) == pytest.approx(0.5)
    assert op.coefficient(((0, "z"), (1, "z"))) == pytest.approx(-1.0)
    # the N/2 bonds of a six-ring are listed once
    assert sum(1 for t in op.terms if t.sites[-1] - t.sites[0] == 3) == 3


def test_jja_range2_equals_annni():
    a = realize_dense(build_jja_hamiltonian(6, 0.3, 0.2, 2))
    b = realize_dense(build_annni_hamiltonian(6, 0.3, 0.2))
    assert np.allclose(a, b)


def test_classical_ground_energy_antiphase():
    # all 64 configurations enumerated by hand
    best = min(
        sum(-s[i] * s[(i + 1) % 6] + 0.7 * s[i] * s[(i + 2) % 6] for i in range(6))
        for s in (np.array([1 - 2 * ((c >> k) & 1) for k in range(6)]) for c in range(64)))
    h = realize_dense(build_annni_hamiltonian(6, 0.7, 0.0))
    assert np.linalg.eigvalsh(h)[0] == pytest.approx(best)
    assert best == pytest.approx(-3.4)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 6), lam=st.floats(0, 0.99), b=st.floats(-2, 2),
       r=st.integers(1, 5), periodic=st.booleans())
def test_hamiltonian_hermitian_and_sparse_equals_dense(n, lam, b, r, periodic):
    r = min(r, n - 1)
    op = build_jja_hamiltonian(n, lam, b, r, "periodic" if periodic else "open")
    dense = realize_dense(op)
    assert np.allclose(dense, dense.conj().T)
    assert np.allclose(realize_sparse(op).toarray(), dense)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 5))
def test_apply_matches_dense_matvec(seed, n):
    rng = np.random.default_rng(seed)
    op = build_annni_hamiltonian(max(n, 3), 0.4, 0.7)
    n = op.n_sites
    psi = StateVector(rng.normal(size=2**n) + 1j * rng.normal(size=2**n), n)
    assert np.allclose(apply(op, psi).amplitudes, realize_dense(op) @ psi.amplitudes)


def test_term_order_does_not_change_matrix():
    op = build_annni_hamiltonian(4, 0.5, 0.3)
    rev = OperatorSum(4, 2, tuple(reversed(op.terms)))
    assert np.array_equal(realize_dense(op), realize_dense(rev))


def test_json_round_trip():
    op = build_jja_hamiltonian(5, 0.3, 0.1, 3, "open")
    back = OperatorSum.from_json(op.to_json())
    assert back == op
    assert json.loads(op.to_json())["n_sites"] == 5


def test_simplify_merges_and_folds_identity():
    op = OperatorSum(3, 2, (Term(1.0, ((0, "z"),)), Term(2.0, ((0, "z"),)), Term(0.5, ())))
    s = op.simplify()
    assert s.offset == 0.5
    assert s.coefficient([(0, "z")]) == 3.0


def test_capacity_cap():
    op = build_annni_hamiltonian(15, 0.1, 0.1)
    with pytest.raises(CapacityError):
        realize_dense(op)


@pytest.mark.parametrize("call", [
    lambda: build_jja_hamiltonian(6, 1.0, 0.1, 2),
    lambda: build_annni_hamiltonian(6, -0.1, 0.1),
])
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()


@pytest.mark.parametrize("call", [
    lambda: build_jja_hamiltonian(6, 0.5, 0.1, 6),
    lambda: build_jja_hamiltonian(2, 0.5, 0.1, 1),
    lambda: build_annni_hamiltonian(6, 0.5, 0.1, "twisted"),
    lambda: Term(1.0, ((0, "z"), (0, "x"))),
    lambda: StateVector(np.ones(3), 2),
])
def test_parameter_errors(call):
    with pytest.raises(ParameterError):
        call()


def test_annni_accepts_lambda_one():
    assert build_annni_hamiltonian(4, 1.0, 0.0).coefficient([(0, "z"), (2, "z")]) == 1.0


def test_multilevel_d2_projection_matches_ising_couplings():
    lam = 0.4
    ml = build_multilevel_hamiltonian(6, lam, 0.0, 2, coupling_range=2)
    # n - 1/2 = -z/2 on {0, 1}; compare coupling ratios with the spin model
    dense = realize_dense(ml)
    spin = realize_dense(build_annni_hamiltonian(6, lam, 0.0))
    # diagonal parts only; equal up to a constant and a sign per NN bond
    diag_ml = np.diag(dense).real
    c_nn = ml.coefficient([(0, "n"), (1, "n")])
    c_nnn = ml.coefficient([(0, "n"), (2, "n")])
    assert c_nnn / c_nn == pytest.approx(lam)
    assert c_nn == pytest.approx(2.0)
    assert np.ptp(diag_ml) > 0 and np.ptp(np.diag(spin).real) > 0


def test_multilevel_charge2_gap_at_lambda_one():
    op = build_multilevel_hamiltonian(4, 1.0, 0.0, 3, coupling_range=2)
    evals = np.linalg.eigvalsh(realize_dense(op))
    fm = [0, 1, 0, 1]
    e_fm = np.real(basis_state(fm, 3).amplitudes.conj() @ realize_dense(op) @ basis_state(fm, 3).amplitudes)
    excited = [0, 2, 0, 1]
    e_ex = np.real(basis_state(excited, 3).amplitudes.conj() @ realize_dense(op)
                   @ basis_state(excited, 3).amplitudes)
    assert e_ex - e_fm == pytest.approx(2.0)
    assert evals[0] <= e_fm + 1e-12


def test_product_state_and_rotation():
    psi = product_state([1, 0], 3)
    flipped = rotate_x(psi, [0, 2], np.pi)
    target = basis_state([1, 0, 1])
    assert abs(abs(flipped.overlap(target)) - 1) < 1e-15
    assert np.allclose(rx_matrix(np.pi), [[0, -1j], [-1j, 0]])
    assert rx_matrix(np.pi)[0, 0] == 0.0


def test_expectation_of_field_term():
    plus = product_state(np.array([1, 1]) / np.sqrt(2), 4)
    op = build_annni_hamiltonian(4, 0.0, 1.0, "open")
    assert expectation(op, plus) == pytest.approx(-4.0)


def test_local_matrix_is_a_copy():
    m = local_matrix("x", 2)
    m[0, 0] = 5
    assert local_matrix("x", 2)[0, 0] == 0
