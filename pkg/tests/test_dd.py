import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jjasim.dd import (Phase, PulseSchedule, adiabatic_sweep, conjugate_by_flips, convergence_order,
                       dd_fidelity_curve, effective_hamiltonian, evolve_pulsed, maximal_superposition,
                       rescaled_annni_hamiltonian, schedule_range3, survives)
from jjasim.errors import ParameterError, ScheduleError
from jjasim.exact import evolve_exact
from jjasim.spinops import (OperatorSum, Term, build_annni_hamiltonian, build_jja_hamiltonian,
                            realize_dense, rx_matrix)

X = np.array([[0, 1], [1, 0]])
Z = np.diag([1.0, -1.0])


def test_six_site_flip_sets():
    sched = schedule_range3(6)
    assert [sorted(p.flip_set) for p in sched.phases] == [[0, 1, 2], [1, 2, 3], [2, 3, 4], [0, 2, 4]]


def test_twelve_site_flip_sets():
    sched = schedule_range3(12)
    assert sorted(sched.phases[0].flip_set) == [0, 1, 2, 6, 7, 8]
    assert len(sched.phases[3].flip_set) == 6


def test_schedule_validation():
    with pytest.raises(ScheduleError):
        schedule_range3(8)
    with pytest.raises(ScheduleError):
        PulseSchedule(4, (Phase({5}),))
    with pytest.raises(ScheduleError):
        Phase({0}, dwell=0.0)
    assert len(schedule_range3(7, "open").phases) == 4


def test_schedule_json_round_trip():
    sched = schedule_range3(12)
    assert PulseSchedule.from_json(sched.to_json()) == sched


def test_pi_pulse_conjugation_dense():
    # R^dag Z R = -Z and R^dag X R = X for R = Rx(pi)
    r = rx_matrix(math.pi)
    assert np.allclose(r.conj().T @ Z @ r, -Z)
    assert np.allclose(r.conj().T @ X @ r, X)
    assert np.allclose(rx_matrix(3 * math.pi), r.conj().T)


def test_symbolic_conjugation_matches_dense():
    op = build_jja_hamiltonian(6, 0.5, 0.3, 3)
    flips = {0, 2, 3}
    rot = np.eye(1)
    for i in range(6):
        rot = np.kron(rot, rx_matrix(math.pi) if i in flips else np.eye(2))
    dense = rot.conj().T @ realize_dense(op) @ rot
    assert np.allclose(realize_dense(conjugate_by_flips(op, flips)), dense)


def test_survival_rule():
    assert survives(Term(1.0, ((0, "z"), (1, "z"))), {0, 1})
    assert not survives(Term(1.0, ((0, "z"), (3, "z"))), {0})
    assert survives(Term(1.0, ((0, "x"),)), {0})


def test_effective_hamiltonian_is_rescaled_annni():
    lam, b = 0.5, 0.2
    eff = effective_hamiltonian(build_jja_hamiltonian(6, lam, b, 3), schedule_range3(6))
    target = rescaled_annni_hamiltonian(6, lam, b)
    for t in target.terms:
        assert eff.coefficient(t.factors) == t.coeff
    for i in range(3):
        assert abs(eff.coefficient([(i, "z"), (i + 3, "z")])) < 1e-15
    assert np.allclose(realize_dense(eff), realize_dense(target), atol=1e-15)


def test_longer_range_residuals_on_twelve_sites():
    lam = 0.5
    full = build_jja_hamiltonian(12, lam, 0.2, 5)
    eff = effective_hamiltonian(full, schedule_range3(12))
    for i in range(12):
        assert eff.coefficient([(i, "z"), ((i + 3) % 12, "z")]) == 0.0
    # ranges 4 and 5 survive at half strength
    assert eff.coefficient([(0, "z"), (4, "z")]) == pytest.approx(0.5 * lam**3)
    assert eff.coefficient([(0, "z"), (5, "z")]) == pytest.approx(-0.5 * lam**4)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0, 0.99), b=st.floats(-1, 1))
def test_effective_hamiltonian_kills_range3_for_any_couplings(lam, b):
    eff = effective_hamiltonian(build_jja_hamiltonian(6, lam, b, 3), schedule_range3(6))
    target = rescaled_annni_hamiltonian(6, lam, b)
    assert np.allclose(realize_dense(eff), realize_dense(target), atol=1e-14)


def test_pulsed_evolution_approaches_effective_evolution():
    op = build_jja_hamiltonian(6, 0.4, 0.2, 3)
    sched = schedule_range3(6)
    psi0 = maximal_superposition(6)
    ref = evolve_exact(effective_hamiltonian(op, sched), psi0, 1.0)
    errs = [np.linalg.norm(evolve_pulsed(op, sched, m, 1.0, psi0).amplitudes - ref.amplitudes)
            for m in (4, 8, 16)]
    assert errs[0] > errs[1] > errs[2]
    slope = np.polyfit(np.log([4, 8, 16]), np.log(errs), 1)[0]
    # first order in the sequence length; the infidelity is its square
    assert -1.2 < slope < -0.8


def test_fidelity_curve_frozen_values():
    series = dd_fidelity_curve(6, 0.4, 0.2, 3, math.pi, (1, 2, 4, 8))
    assert series.fidelities == pytest.approx((0.5071533125971139, 0.8827598119047626,
                                                0.9698826830620058, 0.9925045727174208), abs=1e-9)
    assert series.fidelities[2] > series.fidelities[0]
    assert convergence_order(series.m_values, series.fidelities) == pytest.approx(2.0, abs=0.1)
    assert series.rows()[0][:5] == (6, 0.4, 0.2, 3, math.pi)


def test_fidelity_is_one_without_long_range_terms():
    series = dd_fidelity_curve(6, 0.0, 0.0, 3, 1.0, (1,))
    assert series.fidelities[0] == pytest.approx(1.0)


def test_sweep_starts_ferromagnetic_and_validates():
    curve = adiabatic_sweep(6, 0.4, velocity=0.05, b_max=0.2, mode="strict", b_step=0.05, dt=0.02)
    assert [round(b, 10) for b, _ in curve] == [0.0, 0.05, 0.1, 0.15, 0.2]
    assert curve[0][1] == 1.0
    assert all(0 <= p <= 1 for _, p in curve)
    with pytest.raises(ParameterError):
        adiabatic_sweep(mode="magic")
    with pytest.raises(ParameterError):
        adiabatic_sweep(6, 0.4, 0.05, 0.2, "pulsed", 2.5, b_step=0.05)
    with pytest.raises(ParameterError):
        adiabatic_sweep(6, 0.4, 0.05, 0.2, "strict", b_step=0.05, dt=0.5)


def test_pulsed_sweep_tracks_strict_for_fast_sequences():
    kw = dict(velocity=0.05, b_max=0.5, b_step=0.05)
    strict = adiabatic_sweep(6, 0.4, mode="strict", dt=0.02, **kw)
    pulsed = adiabatic_sweep(6, 0.4, mode="pulsed", sequences_per_unit_time=8.0, **kw)
    diff = max(abs(a[1] - b[1]) for a, b in zip(strict, pulsed))
    assert diff < 0.02
