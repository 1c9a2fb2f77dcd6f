"""Operator sums for the junction-array Hamiltonians and dense state algebra.

Basis ordering is fixed package-wide: site 0 is the most significant digit
of the product-basis index.  For ``local_dim == 2`` the local basis is
(|up>, |down>) = (n=0, n=1), so ``sigma_z = diag(1, -1)`` and the shifted
charge ``n - 1/2`` equals ``-sigma_z / 2``.

Local operator labels:

* ``"x"``, ``"y"``, ``"z"`` -- Pauli matrices (``local_dim == 2`` only)
* ``"n"`` -- shifted charge ``n - 1/2`` on the window ``n = 0..d-1``
* ``"n2"`` -- ``(n - 1/2)**2``
* ``"hop"`` -- ``sum_n |n><n+1| + h.c.``
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DomainError, ParameterError

DENSE_CAP = 2**12
PAULI_LABELS = ("x", "y", "z")
CHARGE_LABELS = ("n", "n2", "hop")
BOUNDARIES = ("periodic", "open")


@lru_cache(maxsize=None)
def _local_matrix_cached(label: str, d: int) -> np.ndarray:
    if label in PAULI_LABELS:
        if d != 2:
            raise ParameterError(f"Pauli label {label!r} requires local_dim 2, got {d}")
        return {
            "x": np.array([[0, 1], [1, 0]], dtype=complex),
            "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
            "z": np.array([[1, 0], [0, -1]], dtype=complex),
        }[label]
    shifted = np.arange(d) - 0.5
    if label == "n":
        return np.diag(shifted).astype(complex)
    if label == "n2":
        return np.diag(shifted**2).astype(complex)
    if label == "hop":
        return (np.eye(d, k=1) + np.eye(d, k=-1)).astype(complex)
    raise ParameterError(f"unknown local operator label {label!r}")


def local_matrix(label: str, d: int) -> np.ndarray:
    """Matrix of a local operator label on a ``d``-level site (read-only copy)."""
    return _local_matrix_cached(label, d).copy()


@dataclass(frozen=True)
class Term:
    """``coeff`` times a product of local operators on distinct sites."""

    coeff: float
    factors: tuple = ()

    def __post_init__(self):
        sites = [s for s, _ in self.factors]
        if len(set(sites)) != len(sites):
            raise ParameterError(f"repeated site in term factors {self.factors}")
        object.__setattr__(self, "factors", tuple(sorted((int(s), str(a)) for s, a in self.factors)))

    @property
    def sites(self) -> tuple:
        return tuple(s for s, _ in self.factors)


# the spec's name for the d=2 case
PauliTerm = Term


@dataclass(frozen=True)
class OperatorSum:
    """Weighted sum of local-operator products plus a scalar offset."""

    n_sites: int
    local_dim: int
    terms: tuple = ()
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.n_sites < 1 or self.local_dim < 2:
            raise ParameterError("n_sites must be >= 1 and local_dim >= 2")
        for t in self.terms:
            for s, a in t.factors:
                if not 0 <= s < self.n_sites:
                    raise ParameterError(f"site {s} out of range for n_sites={self.n_sites}")
                if a in PAULI_LABELS and self.local_dim != 2:
                    raise ParameterError("Pauli factors need local_dim 2")
                if a not in PAULI_LABELS and a not in CHARGE_LABELS:
                    raise ParameterError(f"unknown operator label {a!r}")

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if (self.n_sites, self.local_dim) != (other.n_sites, other.local_dim):
            raise ParameterError("cannot add operator sums on different spaces")
        return OperatorSum(self.n_sites, self.local_dim, self.terms + other.terms,
                           self.offset + other.offset)

    def scaled(self, factor: float) -> "OperatorSum":
        return OperatorSum(self.n_sites, self.local_dim,
                           tuple(Term(factor * t.coeff, t.factors) for t in self.terms),
                           factor * self.offset)

    def simplify(self, atol: float = 0.0) -> "OperatorSum":
        """Merge like terms (in first-appearance order) and drop ``|coeff| <= atol``.

        Identity terms are folded into ``offset``.
        """
        acc: dict = {}
        offset = self.offset
        for t in self.terms:
            if not t.factors:
                offset += t.coeff
                continue
            acc[t.factors] = acc.get(t.factors, 0.0) + t.coeff
        terms = tuple(Term(c, f) for f, c in acc.items() if abs(c) > atol)
        return OperatorSum(self.n_sites, self.local_dim, terms, offset)

    def coefficient(self, factors: Iterable) -> float:
        """Total coefficient of a given factor product (0 if absent)."""
        key = Term(0.0, tuple(factors)).factors
        return float(sum(t.coeff for t in self.terms if t.factors == key))

    def as_dict(self) -> dict:
        return {f: c for f, c in ((t.factors, t.coeff) for t in self.simplify().terms)}

    def to_json(self) -> str:
        payload = {
            "n_sites": self.n_sites,
            "local_dim": self.local_dim,
            "offset": self.offset,
            "terms": [{"coeff": t.coeff, "factors": [[s, a] for s, a in t.factors]} for t in self.terms],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "OperatorSum":
        data = json.loads(text)
        terms = tuple(Term(float(t["coeff"]), tuple((int(s), str(a)) for s, a in t["factors"]))
                      for t in data["terms"])
        return cls(int(data["n_sites"]), int(data["local_dim"]), terms, float(data.get("offset", 0.0)))

    def max_range(self) -> int:
        """Largest site separation spanned by any term (open-chain distance)."""
        return max((t.sites[-1] - t.sites[0] for t in self.terms if t.factors), default=0)


@dataclass(frozen=True)
class StateVector:
    """Dense amplitude vector over the ``local_dim**n_sites`` product basis."""

    amplitudes: np.ndarray
    n_sites: int
    local_dim: int = 2

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.local_dim**self.n_sites:
            raise ParameterError(
                f"amplitude length {amps.size} != {self.local_dim}**{self.n_sites}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm
        if nrm == 0.0:
            raise ParameterError("cannot normalise the zero vector")
        return StateVector(self.amplitudes / nrm, self.n_sites, self.local_dim)

    def overlap(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        _check_same_space(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.local_dim,) * self.n_sites)


def _check_same_space(a, b):
    if (a.n_sites, a.local_dim) != (b.n_sites, b.local_dim):
        raise ParameterError(
            f"dimension mismatch: ({a.n_sites}, d={a.local_dim}) vs ({b.n_sites}, d={b.local_dim})")


def product_state(local_states: Sequence, n_sites: int | None = None) -> StateVector:
    """Tensor product of local vectors.

    Pass one vector and ``n_sites`` for a uniform product state.
    """
    if n_sites is not None:
        local_states = [local_states] * n_sites
    vecs = [np.asarray(v, dtype=complex) for v in local_states]
    amps = vecs[0]
    for v in vecs[1:]:
        amps = np.kron(amps, v)
    return StateVector(amps, len(vecs), vecs[0].size)


def basis_state(config: Sequence[int], local_dim: int = 2) -> StateVector:
    """Product-basis state for a digit string (site 0 first)."""
    index = 0
    for digit in config:
        index = index * local_dim + int(digit)
    amps = np.zeros(local_dim ** len(config), dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, len(config), local_dim)


def _check_boundary(boundary: str):
    if boundary not in BOUNDARIES:
        raise ParameterError(f"boundary must be one of {BOUNDARIES}, got {boundary!r}")


def _bonds(n_sites: int, distance: int, boundary: str):
    """Unordered site pairs at a given separation; wrap pairs counted once."""
    pairs = []
    seen = set()
    for i in range(n_sites):
        k = i + distance
        if boundary == "open":
            if k >= n_sites:
                continue
        else:
            k %= n_sites
        key = (min(i, k), max(i, k))
        if key in seen:
            continue
        seen.add(key)
        pairs.append((i, k))
    return pairs


def _ising_chain(n_sites: int, couplings, field_b: float, boundary: str) -> OperatorSum:
    """``sum_j couplings[j-1] sum_i z_i z_{i+j} - field_b sum_i x_i``."""
    terms = []
    for j, coeff in enumerate(couplings, start=1):
        if coeff == 0.0:
            continue
        terms.extend(Term(coeff, ((i, "z"), (k, "z"))) for i, k in _bonds(n_sites, j, boundary))
    if field_b != 0.0:
        terms.extend(Term(-field_b, ((i, "x"),)) for i in range(n_sites))
    return OperatorSum(n_sites, 2, tuple(terms))


def build_jja_hamiltonian(n_sites: int, lam: float, field_b: float, max_range: int,
                          boundary: str = "periodic") -> OperatorSum:
    """Junction-array Ising chain truncated at coupling range ``max_range``.

    Range-``j`` bonds carry ``(-1)**j * lam**(j-1)``; every site carries
    ``-field_b * sigma_x``.  On a periodic ring, bonds at separation ``N/2``
    are listed once.
    """
    _check_boundary(boundary)
    if n_sites < 3:
        raise ParameterError(f"n_sites must be >= 3, got {n_sites}")
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"lam must lie in [0, 1), got {lam!r}")
    if not 1 <= max_range <= n_sites - 1:
        raise ParameterError(
            f"max_range must satisfy 1 <= R <= N-1 = {n_sites - 1} (R >= N double-counts bonds), got {max_range}")
    couplings = [(-1.0) ** j * lam ** (j - 1) for j in range(1, max_range + 1)]
    return _ising_chain(n_sites, couplings, field_b, boundary)


def build_annni_hamiltonian(n_sites: int, lam: float, field_b: float,
                            boundary: str = "periodic") -> OperatorSum:
    """ANNNI chain: ferromagnetic NN, antiferromagnetic ``lam`` NNN, field ``B``.

    Unlike the junction-array model, any ``lam >= 0`` is allowed.
    """
    _check_boundary(boundary)
    if n_sites < 3:
        raise ParameterError(f"n_sites must be >= 3, got {n_sites}")
    if not (np.isfinite(lam) and lam >= 0.0):
        raise DomainError(f"lam must be finite and >= 0, got {lam!r}")
    return _ising_chain(n_sites, [-1.0, lam], field_b, boundary)


def build_multilevel_hamiltonian(n_sites: int, lam: float, field_b: float, local_dim: int,
                                 coupling_range: int = 2, boundary: str = "periodic") -> OperatorSum:
    """Charge-basis Hamiltonian keeping ``local_dim`` charge states per island.

    On-site ``(1/lam) (n - 1/2)**2``; couplings summed over both directions
    ``j = +-1..+-R`` with weight ``lam**(|j|-1)``, so each bond carries
    ``2 lam**(j-1)``; Josephson hopping ``-B (|n><n+1| + h.c.)``.
    """
    _check_boundary(boundary)
    if local_dim < 2:
        raise DomainError(f"local_dim must be >= 2, got {local_dim}")
    if not 0.0 < lam < 1.0 + 1e-12:
        raise DomainError(f"lam must lie in (0, 1], got {lam!r}")
    if n_sites < 2 or coupling_range < 1:
        raise ParameterError("need n_sites >= 2 and coupling_range >= 1")
    terms = [Term(1.0 / lam, ((i, "n2"),)) for i in range(n_sites)]
    for i in range(n_sites):
        for j in range(1, coupling_range + 1):
            for k in (i + j, i - j):
                if boundary == "open" and not 0 <= k < n_sites:
                    continue
                k %= n_sites
                if k == i:
                    raise ParameterError("coupling_range too long for this ring")
                terms.append(Term(lam ** (j - 1), ((i, "n"), (k, "n"))))
    if field_b != 0.0:
        terms.extend(Term(-field_b, ((i, "hop"),)) for i in range(n_sites))
    return OperatorSum(n_sites, local_dim, tuple(terms)).simplify()


def _check_cap(dim: int, cap: int):
    if dim > cap:
        raise CapacityError(f"Hilbert space dimension {dim} exceeds cap {cap}")


def realize_sparse(op: OperatorSum, cap: int = 2**20) -> sp.csr_matrix:
    """Sparse matrix of ``op`` in the package basis ordering."""
    d, n = op.local_dim, op.n_sites
    _check_cap(op.dim, cap)
    total = sp.csr_matrix((op.dim, op.dim), dtype=complex)
    # canonical order makes the floating-point sum independent of term order
    for t in sorted(op.terms, key=lambda t: (t.factors, t.coeff)):
        mat = sp.identity(1, dtype=complex, format="csr")
        prev = -1
        for s, a in t.factors:
            gap = s - prev - 1
            if gap:
                mat = sp.kron(mat, sp.identity(d**gap, format="csr"), format="csr")
            mat = sp.kron(mat, sp.csr_matrix(_local_matrix_cached(a, d)), format="csr")
            prev = s
        tail = n - prev - 1
        if tail:
            mat = sp.kron(mat, sp.identity(d**tail, format="csr"), format="csr")
        total = total + t.coeff * mat
    if op.offset:
        total = total + op.offset * sp.identity(op.dim, dtype=complex, format="csr")
    return total.tocsr()


def realize_dense(op: OperatorSum, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense Hermitian matrix of ``op``; raises :class:`CapacityError` past ``cap`` rows."""
    _check_cap(op.dim, cap)
    return realize_sparse(op, cap).toarray()


def _apply_local(tensor: np.ndarray, mat: np.ndarray, site: int) -> np.ndarray:
    out = np.tensordot(mat, tensor, axes=([1], [site]))
    return np.moveaxis(out, 0, site)


def apply(op: OperatorSum, psi: StateVector) -> StateVector:
    """Matrix-free ``op |psi>`` (the result is not normalised)."""
    _check_same_space(op, psi)
    base = psi.tensor()
    out = op.offset * base.astype(complex)
    for t in op.terms:
        work = base
        for s, a in t.factors:
            work = _apply_local(work, _local_matrix_cached(a, op.local_dim), s)
        out = out + t.coeff * work
    return StateVector(out.reshape(-1), psi.n_sites, psi.local_dim)


def rx_matrix(angle: float) -> np.ndarray:
    """``exp(-i angle sigma_x / 2)`` with exact zeros at multiples of pi."""
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    c = 0.0 if abs(c) < 1e-15 else c
    s = 0.0 if abs(s) < 1e-15 else s
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rotate_x(psi: StateVector, site: int | Iterable[int], angle: float) -> StateVector:
    """Apply ``R_x(angle)`` on one site or simultaneously on several."""
    if psi.local_dim != 2:
        raise ParameterError("rotate_x needs local_dim 2")
    sites = [site] if np.isscalar(site) else list(site)
    mat = rx_matrix(angle)
    work = psi.tensor()
    for s in sites:
        if not 0 <= s < psi.n_sites:
            raise ParameterError(f"site {s} out of range")
        work = _apply_local(work, mat, s)
    return StateVector(work.reshape(-1), psi.n_sites, 2)


def expectation(op: OperatorSum, psi: StateVector) -> float:
    """Real part of ``<psi|op|psi> / <psi|psi>``."""
    return float(np.real(psi.overlap(apply(op, psi))) / psi.norm**2)


def sigma_z_op(n_sites: int, site: int) -> OperatorSum:
    return OperatorSum(n_sites, 2, (Term(1.0, ((site, "z"),)),))
