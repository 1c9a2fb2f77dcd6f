"""Dynamical decoupling: pulse schedules, average Hamiltonians, pulsed evolution.

A phase flips a set of sites with ``R_x(pi)``, waits ``dt``, undoes the flip
with ``R_x(3pi) = R_x(pi)^dagger``, and waits ``dt`` again.  Conjugation by a
pi pulse negates ``sigma_z`` (and ``sigma_y``) on the flipped sites and leaves
``sigma_x`` alone, so to first order in ``dt`` a ZZ bond survives a phase
only when both or neither of its sites are flipped.

The four-phase range-3 schedule halves every surviving NN and NNN bond while
the transverse field keeps full strength; the engineered model is therefore
the ANNNI chain with couplings ``(-1/2, +lam/2)`` and field ``-B``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ParameterError, ScheduleError
from .exact import Propagator, probability_fm
from .spinops import (OperatorSum, StateVector, Term, basis_state, build_annni_hamiltonian,
                      build_jja_hamiltonian, product_state, realize_dense, rotate_x)


@dataclass(frozen=True)
class Phase:
    """One decoupling phase.  ``dwell`` is a relative duration weight."""

    flip_set: frozenset
    dwell: float = 1.0
    # reserved for pulse imperfections; ideal pulses when None
    error_hook: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "flip_set", frozenset(int(s) for s in self.flip_set))
        if not self.dwell > 0:
            raise ScheduleError(f"dwell must be > 0, got {self.dwell!r}")


@dataclass(frozen=True)
class PulseSchedule:
    n_sites: int
    phases: tuple

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        for p in self.phases:
            if any(not 0 <= s < self.n_sites for s in p.flip_set):
                raise ScheduleError(f"flip set {sorted(p.flip_set)} out of range for N={self.n_sites}")

    @property
    def total_dwell(self) -> float:
        return sum(p.dwell for p in self.phases)

    def to_json(self) -> str:
        return json.dumps({
            "n_sites": self.n_sites,
            "phases": [{"flip_set": sorted(p.flip_set), "dwell": p.dwell} for p in self.phases],
        })

    @classmethod
    def from_json(cls, text: str) -> "PulseSchedule":
        data = json.loads(text)
        return cls(data["n_sites"], tuple(Phase(frozenset(p["flip_set"]), p["dwell"]) for p in data["phases"]))


def schedule_range3(n_sites: int, boundary: str = "periodic") -> PulseSchedule:
    """Four-phase schedule that cancels range-3 couplings and keeps NN and NNN.

    Phases 1-3 flip blocks of three consecutive sites repeating with period
    six, shifted by one site per phase; phase 4 flips every other site.
    For N=6 the flip sets are {0,1,2}, {1,2,3}, {2,3,4}, {0,2,4}.
    """
    if boundary == "periodic":
        if n_sites < 6 or n_sites % 6:
            raise ScheduleError(
                f"periodic range-3 schedule needs N divisible by 6 so the period-6 flip "
                f"pattern closes around the ring; got N={n_sites}")
    elif boundary == "open":
        if n_sites < 6:
            raise ScheduleError(f"open range-3 schedule needs N >= 6, got N={n_sites}")
    else:
        raise ParameterError(f"unknown boundary {boundary!r}")
    phases = [Phase(frozenset(s for s in range(n_sites) if (s - shift) % 6 < 3)) for shift in range(3)]
    phases.append(Phase(frozenset(range(0, n_sites, 2))))
    return PulseSchedule(n_sites, tuple(phases))


def survives(term: Term, flip_set) -> bool:
    """Whether ``term`` is unchanged by pi-conjugation on ``flip_set``."""
    flips = sum(1 for s, a in term.factors if a in ("z", "y") and s in flip_set)
    return flips % 2 == 0


def conjugate_by_flips(op: OperatorSum, flip_set) -> OperatorSum:
    """``R^dagger op R`` for pi pulses on ``flip_set``, done symbolically."""
    if op.local_dim != 2:
        raise ParameterError("pulse conjugation is defined for spin operators")
    return OperatorSum(op.n_sites, 2,
                       tuple(t if survives(t, flip_set) else Term(-t.coeff, t.factors) for t in op.terms),
                       op.offset)


def effective_hamiltonian(op: OperatorSum, schedule: PulseSchedule) -> OperatorSum:
    """First-order average Hamiltonian of ``op`` under ``schedule``."""
    if op.n_sites != schedule.n_sites:
        raise ParameterError(f"schedule is for N={schedule.n_sites}, operator has N={op.n_sites}")
    if op.local_dim != 2:
        raise ParameterError("effective_hamiltonian needs a spin operator")
    base = op.simplify()
    total = schedule.total_dwell
    acc: dict = {}
    for phase in schedule.phases:
        w = phase.dwell / total
        for t in base.terms:
            kept = survives(t, phase.flip_set)
            # (H + R^dag H R) / 2 keeps surviving terms and cancels the rest
            acc[t.factors] = acc.get(t.factors, 0.0) + (w * t.coeff if kept else 0.0)
    terms = tuple(Term(c, f) for f, c in acc.items() if c != 0.0)
    return OperatorSum(op.n_sites, 2, terms, base.offset)


def rescaled_annni_hamiltonian(n_sites: int, lam: float, field_b: float,
                               boundary: str = "periodic") -> OperatorSum:
    """ANNNI target of the range-3 schedule: ZZ couplings halved, field unchanged."""
    op = build_annni_hamiltonian(n_sites, lam, 0.0, boundary).scaled(0.5)
    field_terms = tuple(Term(-field_b, ((i, "x"),)) for i in range(n_sites)) if field_b else ()
    return OperatorSum(n_sites, 2, op.terms + field_terms)


def _phase_dts(schedule: PulseSchedule, m: int, total_time: float):
    scale = total_time / (2.0 * m * schedule.total_dwell)
    return [p.dwell * scale for p in schedule.phases]


def _apply_sequence(psi: StateVector, prop: Propagator, schedule: PulseSchedule, dts) -> StateVector:
    for phase, dt in zip(schedule.phases, dts):
        flips = sorted(phase.flip_set)
        psi = rotate_x(psi, flips, math.pi)
        if phase.error_hook is not None:
            psi = phase.error_hook(psi, phase)
        psi = prop.evolve(psi, dt)
        psi = rotate_x(psi, flips, 3.0 * math.pi)
        psi = prop.evolve(psi, dt)
    return psi


def evolve_pulsed(op: OperatorSum, schedule: PulseSchedule, m: int, total_time: float,
                  psi0: StateVector) -> StateVector:
    """Evolve ``psi0`` for ``total_time`` under ``m`` repetitions of the schedule.

    With equal dwells each sequence lasts ``8 dt`` and ``dt = T / (8 m)``.
    """
    if not total_time > 0 or m < 1:
        raise ParameterError("need total_time > 0 and m >= 1")
    if op.n_sites != schedule.n_sites:
        raise ParameterError("schedule and operator sizes differ")
    prop = Propagator(op)
    dts = _phase_dts(schedule, m, total_time)
    psi = psi0
    for _ in range(m):
        psi = _apply_sequence(psi, prop, schedule, dts)
    return psi


@dataclass(frozen=True)
class FidelitySeries:
    m_values: tuple
    fidelities: tuple
    params: dict

    def rows(self):
        p = self.params
        return [(p["n_sites"], p["lam"], p["field_b"], p["coupling_range"], p["total_time"], m, f)
                for m, f in zip(self.m_values, self.fidelities)]


def maximal_superposition(n_sites: int) -> StateVector:
    return product_state(np.array([1.0, 1.0]) / math.sqrt(2.0), n_sites)


def dd_fidelity_curve(n_sites: int, lam: float, field_b: float, coupling_range: int = 3,
                      total_time: float = math.pi, m_list: Sequence[int] = (1, 2, 4, 8),
                      boundary: str = "periodic") -> FidelitySeries:
    """Overlap between pulsed junction-array evolution and the target ANNNI evolution."""
    schedule = schedule_range3(n_sites, boundary)
    full = build_jja_hamiltonian(n_sites, lam, field_b, coupling_range, boundary)
    target = rescaled_annni_hamiltonian(n_sites, lam, field_b, boundary)
    psi0 = maximal_superposition(n_sites)
    reference = Propagator(target).evolve(psi0, total_time)
    prop = Propagator(full)
    fids = []
    for m in m_list:
        dts = _phase_dts(schedule, int(m), total_time)
        psi = psi0
        for _ in range(int(m)):
            psi = _apply_sequence(psi, prop, schedule, dts)
        fids.append(float(min(1.0, abs(reference.overlap(psi)) ** 2)))
    params = dict(n_sites=n_sites, lam=lam, field_b=field_b, coupling_range=coupling_range,
                  total_time=total_time, psi0="maximal_superposition")
    return FidelitySeries(tuple(int(m) for m in m_list), tuple(fids), params)


def convergence_order(m_values, fidelities) -> float:
    """Slope of ``-log(1 - F)`` against ``log m`` (least squares)."""
    m = np.asarray(m_values, dtype=float)
    err = 1.0 - np.asarray(fidelities, dtype=float)
    keep = err > 0
    slope, _ = np.polyfit(np.log(m[keep]), np.log(err[keep]), 1)
    return float(-slope)


SWEEP_MODES = ("strict", "pulsed", "uncontrolled")


def adiabatic_sweep(n_sites: int = 6, lam: float = 0.4, velocity: float = 0.002, b_max: float = 1.0,
                    mode: str = "strict", sequences_per_unit_time: float = 4.0, coupling_range: int = 3,
                    b_step: float = 0.01, dt: float = 0.05, boundary: str = "periodic"):
    """Ramp ``B(t) = v t`` from the all-down state and record ``(B, P_FM)``.

    ``strict`` evolves under the target ANNNI model, ``pulsed`` under the full
    junction-array model with the range-3 schedule (Hamiltonian rebuilt with
    the mid-sequence field every sequence), ``uncontrolled`` under the full
    model without pulses.  Piecewise-constant fields use mid-step values.
    """
    if mode not in SWEEP_MODES:
        raise ParameterError(f"mode must be one of {SWEEP_MODES}, got {mode!r}")
    if not (velocity > 0 and b_max > 0 and b_step > 0 and dt > 0):
        raise ParameterError("velocity, b_max, b_step and dt must be positive")
    n_samples = int(round(b_max / b_step))
    if abs(n_samples * b_step - b_max) > 1e-9:
        raise ParameterError("b_max must be a multiple of b_step")
    interval = b_step / velocity
    psi = basis_state([1] * n_sites)
    curve = [(0.0, probability_fm(psi))]

    if mode == "strict":
        couplings = rescaled_annni_hamiltonian(n_sites, lam, 0.0, boundary)
    else:
        couplings = build_jja_hamiltonian(n_sites, lam, 0.0, coupling_range, boundary)
    h_zz = realize_dense(couplings).real
    h_x = realize_dense(OperatorSum(n_sites, 2, tuple(Term(-1.0, ((i, "x"),)) for i in range(n_sites)))).real

    def propagator(b):
        return _DenseProp(h_zz + b * h_x, n_sites)

    if mode == "pulsed":
        seq_time = 1.0 / sequences_per_unit_time
        n_seq = interval / seq_time
        if abs(n_seq - round(n_seq)) > 1e-9 or round(n_seq) < 1:
            raise ParameterError(
                f"sampling interval {interval:g} is not a whole number of sequences of length {seq_time:g}")
        n_seq = int(round(n_seq))
        schedule = schedule_range3(n_sites, boundary)
        dts = _phase_dts(schedule, 1, seq_time)
        t = 0.0
        for k in range(n_samples):
            for _ in range(n_seq):
                psi = _apply_sequence(psi, propagator(velocity * (t + 0.5 * seq_time)), schedule, dts)
                t += seq_time
            curve.append(((k + 1) * b_step, probability_fm(psi)))
        return curve

    n_sub = max(1, int(math.ceil(interval / dt - 1e-9)))
    step = interval / n_sub
    norm_max = float(np.max(np.abs(np.linalg.eigvalsh(h_zz + b_max * h_x))))
    if step * velocity > 1e-3 or step * norm_max > 1.0:
        raise ParameterError(
            f"time step {step:g} too coarse: field increment {step * velocity:.2e} (max 1e-3), "
            f"step*||H|| = {step * norm_max:.3f} (max 1)")
    t = 0.0
    for k in range(n_samples):
        for _ in range(n_sub):
            psi = propagator(velocity * (t + 0.5 * step)).evolve(psi, step)
            t += step
        curve.append(((k + 1) * b_step, probability_fm(psi)))
    return curve


class _DenseProp(Propagator):
    """Propagator built straight from a dense Hermitian matrix."""

    def __init__(self, mat: np.ndarray, n_sites: int, local_dim: int = 2):
        self.n_sites = n_sites
        self.local_dim = local_dim
        self.evals, self.evecs = np.linalg.eigh(mat)
