"""ANNNI chain in MPS form: bond operators, MPO and the Trotter step.

The chain is ``H = -sum z_i z_{i+1} + lam sum z_i z_{i+2} - B sum x_i``.
Each Trotter step applies the layers in the order

    A/2  B/2  C  B/2  A/2

with ``A`` the nearest-neighbour gates on even bonds, ``B`` those on odd
bonds and ``C`` the next-nearest-neighbour gates.  An NNN gate on
``(k, k+2)`` is applied as ``swap(k,k+1) g(k+1,k+2) swap(k,k+1)`` so that
only adjacent two-site updates are ever needed.  The field is split over
the NN bonds touching each site.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..errors import ParameterError

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
ID2 = np.eye(2)
SWAP = np.eye(4)[[0, 2, 1, 3]].reshape(2, 2, 2, 2)

TROTTER_LAYOUT = "A/2 B/2 C B/2 A/2 (A: NN even bonds, B: NN odd bonds, C: NNN via swaps)"


def check_couplings(lam: float, field_b: float) -> None:
    if not (np.isfinite(lam) and lam >= 0.0):
        raise ParameterError(f"lam must be finite and >= 0, got {lam!r}")
    if not np.isfinite(field_b):
        raise ParameterError(f"field_b must be finite, got {field_b!r}")


def nn_bond_hamiltonian(field_left: float, field_right: float) -> np.ndarray:
    """``-z z - field_left x (x) 1 - field_right 1 (x) x`` as a 4x4 matrix."""
    return -np.kron(SZ, SZ) - field_left * np.kron(SX, ID2) - field_right * np.kron(ID2, SX)


def nnn_bond_hamiltonian(lam: float) -> np.ndarray:
    return lam * np.kron(SZ, SZ)


def gate_from(h: np.ndarray, tau: float) -> np.ndarray:
    """``exp(-tau h)`` reshaped to (d, d, d, d)."""
    return sla.expm(-tau * h).reshape(2, 2, 2, 2)


def open_field_shares(n_sites: int, field_b: float):
    """Per-bond ``(left, right)`` field weights so every site gets ``B`` in total."""
    shares = []
    for k in range(n_sites - 1):
        left = field_b if k == 0 else 0.5 * field_b
        right = field_b if k == n_sites - 2 else 0.5 * field_b
        shares.append((left, right))
    return shares


def annni_mpo(n_sites: int, lam: float, field_b: float) -> list:
    """Bond-dimension-4 MPO for the open ANNNI chain.

    Auxiliary states: 3 = nothing placed, 1 = one ``z`` placed, 2 = ``z``
    placed one site back, 0 = term complete.
    """
    check_couplings(lam, field_b)
    w = np.zeros((4, 4, 2, 2))
    w[3, 3] = ID2
    w[3, 0] = -field_b * SX
    w[3, 1] = SZ
    w[1, 0] = -SZ
    w[1, 2] = ID2
    w[2, 0] = lam * SZ
    w[0, 0] = ID2
    mpo = [w.copy() for _ in range(n_sites)]
    mpo[0] = w[3:4]
    mpo[-1] = w[:, 0:1]
    return mpo


def classical_energy_open(spins, lam: float) -> float:
    s = np.asarray(spins, dtype=float)
    return float(-np.sum(s[:-1] * s[1:]) + lam * np.sum(s[:-2] * s[2:]))


class TrotterGates:
    """Gates for one second-order step on an open chain of ``n_sites``."""

    def __init__(self, n_sites: int, lam: float, field_b: float, dtau: float):
        check_couplings(lam, field_b)
        if not dtau > 0:
            raise ParameterError(f"dtau must be > 0, got {dtau!r}")
        if n_sites < 3:
            raise ParameterError(f"need at least 3 sites, got {n_sites}")
        self.n_sites = n_sites
        self.lam = lam
        self.dtau = dtau
        shares = open_field_shares(n_sites, field_b)
        self.nn_half = [gate_from(nn_bond_hamiltonian(*shares[k]), 0.5 * dtau) for k in range(n_sites - 1)]
        self.nn_full = [gate_from(nn_bond_hamiltonian(*shares[k]), dtau) for k in range(n_sites - 1)]
        self.nnn = gate_from(nnn_bond_hamiltonian(lam), dtau) if lam != 0.0 else None

    def sequence(self, n_steps: int = 1):
        """``(bond, gate)`` pairs for ``n_steps`` consecutive steps.

        Adjacent ``A/2`` layers of successive steps are merged into one ``A``.
        """
        even = range(0, self.n_sites - 1, 2)
        odd = range(1, self.n_sites - 1, 2)
        half_a = [(k, self.nn_half[k]) for k in even]
        full_a = [(k, self.nn_full[k]) for k in even]
        middle = [(k, self.nn_half[k]) for k in odd]
        if self.nnn is not None:
            for k in range(self.n_sites - 2):
                middle += [(k, SWAP), (k + 1, self.nnn), (k, SWAP)]
        middle += [(k, self.nn_half[k]) for k in odd]
        seq = list(half_a)
        for i in range(n_steps):
            seq += middle
            seq += full_a if i < n_steps - 1 else half_a
        return seq
