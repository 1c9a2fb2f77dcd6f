"""Exact diagonalisation and exact propagation for short chains."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DomainError, ParameterError
from .spinops import (DENSE_CAP, OperatorSum, StateVector, Term, basis_state, build_annni_hamiltonian,
                      build_multilevel_hamiltonian, realize_dense, realize_sparse)

DEGENERACY_RTOL = 1e-8
KRYLOV_TOL = 1e-10
KRYLOV_MAXITER = 10_000


@dataclass(frozen=True)
class SpectrumResult:
    """Low-lying spectrum and a deterministic ground state.

    When the ground level is degenerate, ``ground_state`` is the projection
    of the lowest-index basis state with maximal weight in the degenerate
    manifold.  Phase convention: that component is real and positive.
    """

    eigenvalues: np.ndarray
    ground_state: StateVector
    degeneracy_flag: bool
    degeneracy: int

    @property
    def energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        if len(self.eigenvalues) < 2:
            return float("nan")
        return float(self.eigenvalues[1] - self.eigenvalues[0])


def _as_real_if_possible(mat):
    if np.iscomplexobj(mat):
        imag = mat.imag
        if (imag.count_nonzero() if hasattr(imag, "count_nonzero") else np.count_nonzero(imag)) == 0:
            return mat.real
    return mat


def _pick_ground(vectors: np.ndarray) -> np.ndarray:
    """Deterministic representative of the span of ``vectors`` (columns)."""
    weights = np.sum(np.abs(vectors) ** 2, axis=1)
    k = int(np.flatnonzero(weights >= weights.max() - 1e-9)[0])
    if vectors.shape[1] == 1:
        vec = vectors[:, 0].astype(complex)
    else:
        vec = vectors @ vectors[k].conj()
        vec = vec.astype(complex)
    vec /= np.linalg.norm(vec)
    vec *= np.exp(-1j * np.angle(vec[k]))
    return vec


def ground_state(op: OperatorSum, cap: int = DENSE_CAP, n_eigs: int = 6) -> SpectrumResult:
    """Ground state of ``op``; dense ``eigh`` up to ``cap`` rows, Lanczos beyond."""
    dim = op.dim
    if dim <= cap:
        mat = _as_real_if_possible(realize_dense(op, cap))
        evals, evecs = np.linalg.eigh(mat)
    else:
        mat = _as_real_if_possible(realize_sparse(op, cap=max(cap, dim)))
        k = min(n_eigs, dim - 2)
        try:
            evals, evecs = spla.eigsh(mat, k=k, which="SA", tol=KRYLOV_TOL, maxiter=KRYLOV_MAXITER)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"Lanczos did not converge within {KRYLOV_MAXITER} iterations "
                f"({len(exc.eigenvalues)} of {k} eigenpairs)", iterations=KRYLOV_MAXITER) from exc
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    e0 = evals[0]
    tol = DEGENERACY_RTOL * max(1.0, abs(e0))
    manifold = int(np.count_nonzero(evals - e0 < tol))
    vec = _pick_ground(evecs[:, :manifold])
    return SpectrumResult(np.asarray(evals), StateVector(vec, op.n_sites, op.local_dim),
                          manifold > 1, manifold)


def with_symmetry_breaking(op: OperatorSum, epsilon: float = 1e-6) -> OperatorSum:
    """``op + epsilon * sum_i sigma_z_i``; favours the all-down state for epsilon > 0."""
    if op.local_dim != 2:
        raise ParameterError("symmetry breaking field is defined for spin chains")
    extra = tuple(Term(epsilon, ((i, "z"),)) for i in range(op.n_sites))
    return OperatorSum(op.n_sites, 2, op.terms + extra, op.offset)


def _require_spins(psi: StateVector):
    if psi.local_dim != 2:
        raise ParameterError("phase probabilities need local_dim 2")


def probability_fm(psi: StateVector) -> float:
    """Weight on the two fully polarised z states."""
    _require_spins(psi)
    amps = psi.amplitudes
    return float(abs(amps[0]) ** 2 + abs(amps[-1]) ** 2)


def probability_pm(psi: StateVector) -> float:
    """Weight on the all-plus x state."""
    _require_spins(psi)
    amp = np.sum(psi.amplitudes) / np.sqrt(psi.amplitudes.size)
    return float(abs(amp) ** 2)


def classical_configurations(n_sites: int) -> np.ndarray:
    """All ``2**N`` spin configurations (+1 = up), rows in basis-index order."""
    idx = np.arange(2**n_sites)[:, None]
    bits = (idx >> np.arange(n_sites - 1, -1, -1)[None, :]) & 1
    return 1 - 2 * bits


def classical_energies(n_sites: int, lam: float, boundary: str = "periodic") -> np.ndarray:
    """Zero-field ANNNI energies of every configuration, by enumeration."""
    s = classical_configurations(n_sites).astype(float)
    op = build_annni_hamiltonian(n_sites, lam, 0.0, boundary)
    energy = np.zeros(len(s))
    for t in op.terms:
        (i, _), (k, _) = t.factors
        energy += t.coeff * s[:, i] * s[:, k]
    return energy


@lru_cache(maxsize=None)
def antiphase_indices(n_sites: int, boundary: str = "periodic", reference_lam: float = 0.75) -> tuple:
    """Basis indices of the classical zero-field minimisers at a frustrated ``lam``.

    For ``reference_lam`` in ``(1/2, 1]`` these are the antiphase-like
    configurations that replace the ferromagnet as ground states.
    """
    energy = classical_energies(n_sites, reference_lam, boundary)
    return tuple(int(i) for i in np.flatnonzero(energy < energy.min() + 1e-9))


def probability_antiphase(psi: StateVector, boundary: str = "periodic") -> float:
    """Weight on the antiphase configurations of :func:`antiphase_indices`."""
    _require_spins(psi)
    idx = list(antiphase_indices(psi.n_sites, boundary))
    return float(np.sum(np.abs(psi.amplitudes[idx]) ** 2))


def _z_expectations(psi: StateVector, sites) -> np.ndarray:
    probs = np.abs(psi.tensor()) ** 2
    probs = probs / probs.sum()
    out = []
    for group in sites:
        axes = tuple(i for i in range(psi.n_sites) if i not in group)
        marg = probs.sum(axis=axes) if axes else probs
        signs = np.array([1.0, -1.0])
        val = marg
        for _ in group:
            val = np.tensordot(val, signs, axes=([0], [0]))
        out.append(float(val))
    return np.array(out)


def correlation_anchor(n_sites: int) -> int:
    """0-based index of site ``N/2 + 1``."""
    return n_sites // 2


def correlation_z(psi: StateVector, d: int, boundary: str = "open") -> float:
    """Connected ``<s_a s_{a+d}> - <s_a><s_{a+d}>`` anchored at site ``N/2 + 1``."""
    _require_spins(psi)
    n = psi.n_sites
    a = correlation_anchor(n)
    b = a + d
    if d < 0:
        raise ParameterError("separation must be non-negative")
    if boundary == "open":
        if b >= n:
            raise ParameterError(f"separation {d} runs off the open chain (N={n})")
    else:
        b %= n
    if d == 0:
        za = _z_expectations(psi, [(a,)])[0]
        return float(1.0 - za * za)
    za, zb, zab = _z_expectations(psi, [(a,), (b,), tuple(sorted((a, b)))])
    return float(zab - za * zb)


def correlation_z_squared(psi: StateVector, d: int, boundary: str = "open") -> float:
    return correlation_z(psi, d, boundary) ** 2


def leakage_gap(lam: float) -> float:
    """Energy of the lowest charge-2 excitation above the ferromagnet."""
    if lam <= 0:
        raise DomainError(f"lam must be > 0, got {lam!r}")
    return 2.0 * (1.0 / lam - 1.0 + lam)


def escape_probability_perturbative(lam: float, field_b: float, n_sites: int) -> float:
    """``(B / dE)**2 * N / 2`` with ``dE = 2 (1/lam - 1 + lam)``."""
    if field_b < 0:
        raise DomainError("field_b must be >= 0")
    gap = leakage_gap(lam)
    if field_b / gap > 0.3:
        warnings.warn(f"B/dE = {field_b / gap:.3f} > 0.3: outside the perturbative regime",
                      RuntimeWarning, stacklevel=2)
    return (field_b / gap) ** 2 * n_sites / 2.0


def two_level_mask(n_sites: int, local_dim: int) -> np.ndarray:
    """Boolean mask of basis states with every charge in {0, 1}."""
    digits = np.indices((local_dim,) * n_sites).reshape(n_sites, -1)
    return np.all(digits <= 1, axis=0)


def ferromagnet_charge_state(n_sites: int, local_dim: int) -> StateVector:
    """Symmetric superposition of the two alternating charge patterns 0101... and 1010..."""
    a = basis_state([i % 2 for i in range(n_sites)], local_dim).amplitudes
    b = basis_state([(i + 1) % 2 for i in range(n_sites)], local_dim).amplitudes
    return StateVector((a + b) / np.sqrt(2.0), n_sites, local_dim)


def escape_probability_exact(n_sites: int, lam: float, field_b: float, local_dim: int = 3,
                             boundary: str = "periodic", reference: str = "ground") -> float:
    """Weight outside the two-level subspace of an exact charge-model eigenstate.

    ``reference="ground"`` uses the ground state.  ``reference="ferromagnet"``
    uses the eigenstate with the largest overlap on the alternating charge
    pattern, i.e. the state the leakage estimate is built around; the two
    differ once ``lam > 1/2`` makes the antiphase the ground state.
    """
    if local_dim < 3:
        raise DomainError("exact escape probability needs local_dim >= 3")
    if reference not in ("ground", "ferromagnet"):
        raise ParameterError(f"reference must be 'ground' or 'ferromagnet', got {reference!r}")
    op = build_multilevel_hamiltonian(n_sites, lam, field_b, local_dim, 2, boundary)
    if reference == "ground":
        vec = ground_state(op).ground_state.amplitudes
    else:
        _, evecs = np.linalg.eigh(_as_real_if_possible(realize_dense(op)))
        fm = ferromagnet_charge_state(n_sites, local_dim).amplitudes
        vec = evecs[:, int(np.argmax(np.abs(evecs.conj().T @ fm)))]
    weights = np.abs(vec) ** 2
    return float(weights[~two_level_mask(n_sites, local_dim)].sum())


class Propagator:
    """Exact ``exp(-i H t)`` from a single eigendecomposition of ``H``."""

    def __init__(self, op: OperatorSum, cap: int = DENSE_CAP):
        self.n_sites = op.n_sites
        self.local_dim = op.local_dim
        mat = _as_real_if_possible(realize_dense(op, cap))
        self.evals, self.evecs = np.linalg.eigh(mat)

    def matrix(self, t: float) -> np.ndarray:
        return (self.evecs * np.exp(-1j * self.evals * t)) @ self.evecs.conj().T

    def evolve(self, psi: StateVector, t: float) -> StateVector:
        if (psi.n_sites, psi.local_dim) != (self.n_sites, self.local_dim):
            raise ParameterError("state does not match propagator space")
        coeffs = self.evecs.conj().T @ psi.amplitudes
        return StateVector(self.evecs @ (np.exp(-1j * self.evals * t) * coeffs),
                           self.n_sites, self.local_dim)


def evolve_exact(op: OperatorSum, psi: StateVector, t: float) -> StateVector:
    """``exp(-i op t) |psi>`` by eigendecomposition."""
    return Propagator(op).evolve(psi, t)


def phase_probability_grid(n_sites: int, lam_grid, b_grid, boundary: str = "periodic"):
    """Rows ``(N, lambda, B, E_g, gap, P_FM, P_PM, P_AP)`` over a (lam, B) grid."""
    rows = []
    for lam, b in itertools.product(lam_grid, b_grid):
        res = ground_state(build_annni_hamiltonian(n_sites, float(lam), float(b), boundary))
        psi = res.ground_state
        rows.append((n_sites, float(lam), float(b), res.energy, res.gap, probability_fm(psi),
                     probability_pm(psi), probability_antiphase(psi, boundary)))
    return rows
