"""Open-chain matrix product states in right-canonical (Gamma-lambda) form.

Each site stores ``B[k] = Gamma[k] * diag(xi[k])`` with index order
(left bond, physical, right bond).  Keeping ``B`` rather than ``Gamma``
avoids dividing by small Schmidt values during two-site updates; the
``gammas`` property recovers the Vidal tensors on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from ..errors import ConvergenceError, ParameterError

# singular values below this fraction of the largest are dropped
SVD_CUTOFF = 1e-8


@dataclass
class MPSState:
    """Finite MPS with per-bond Schmidt vectors.

    ``schmidts[k]`` lives on the bond between sites ``k`` and ``k+1``.
    ``discarded`` accumulates the truncated weight of every update.
    """

    n_sites: int
    local_dim: int
    tensors: list
    schmidts: list
    chi_max: int
    discarded: float = 0.0
    log: list = field(default_factory=list, repr=False)

    def copy(self) -> "MPSState":
        return MPSState(self.n_sites, self.local_dim, [t.copy() for t in self.tensors],
                        [s.copy() for s in self.schmidts], self.chi_max, self.discarded)

    @property
    def bond_dims(self) -> list:
        return [len(s) for s in self.schmidts]

    @property
    def gammas(self) -> list:
        out = []
        for k, b in enumerate(self.tensors):
            right = self.schmidts[k] if k < self.n_sites - 1 else np.ones(1)
            inv = np.divide(1.0, right, out=np.zeros_like(right), where=right > 1e-300)
            out.append(b * inv[None, None, :])
        return out

    def left_weight(self, k: int) -> np.ndarray:
        """Schmidt values on the bond to the left of site ``k``."""
        return np.ones(1) if k == 0 else self.schmidts[k - 1]

    def to_dense(self) -> np.ndarray:
        psi = self.tensors[0]
        for b in self.tensors[1:]:
            psi = np.tensordot(psi, b, axes=(-1, 0))
        return psi.reshape(-1)

    def canonical_residual(self) -> float:
        """Worst deviation from right- and left-orthonormality, in Vidal form."""
        worst = 0.0
        for k, b in enumerate(self.tensors):
            rr = np.einsum("asb,csb->ac", b, b.conj())
            worst = max(worst, np.max(np.abs(rr - np.eye(rr.shape[0]))))
            lw = self.left_weight(k)
            a = lw[:, None, None] * b
            right = self.schmidts[k] if k < self.n_sites - 1 else np.ones(1)
            inv = np.divide(1.0, right, out=np.zeros_like(right), where=right > 1e-300)
            a = a * inv[None, None, :]
            ll = np.einsum("asb,asc->bc", a.conj(), a)
            worst = max(worst, np.max(np.abs(ll - np.eye(ll.shape[0]))))
        return float(worst)


def init_product_mps(n_sites: int, local_dim: int, local_state, chi_max: int = 32) -> MPSState:
    """Bond-dimension-one MPS for ``local_state`` repeated on every site.

    ``local_state`` may also be a sequence of per-site vectors.
    """
    if n_sites < 2:
        raise ParameterError(f"n_sites must be >= 2, got {n_sites}")
    if chi_max < 1:
        raise ParameterError(f"chi_max must be >= 1, got {chi_max}")
    vecs = np.asarray(local_state)
    if vecs.ndim == 1:
        vecs = np.broadcast_to(vecs, (n_sites, vecs.shape[0]))
    if vecs.shape != (n_sites, local_dim):
        raise ParameterError(f"local state must have length {local_dim}")
    norms = np.linalg.norm(vecs, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-10):
        raise ParameterError("local states must be normalized")
    dtype = np.result_type(vecs.dtype, np.float64)
    tensors = [np.array(v, dtype=dtype).reshape(1, local_dim, 1) for v in vecs]
    schmidts = [np.ones(1) for _ in range(n_sites - 1)]
    return MPSState(n_sites, local_dim, tensors, schmidts, chi_max)


def truncated_svd(theta: np.ndarray, chi_max: int, context: str = ""):
    """SVD keeping at most ``chi_max`` values above the relative cutoff.

    Returns ``(U, S, Vh, discarded_fraction, norm)`` with ``S`` normalized.
    """
    try:
        u, s, vh = sla.svd(theta, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            u, s, vh = sla.svd(theta, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"SVD failed {context}: {exc}") from exc
    total = float(np.sum(s * s))
    if total == 0.0:
        raise ConvergenceError(f"two-site tensor vanished {context}")
    keep = min(chi_max, int(np.sum(s > SVD_CUTOFF * s[0])))
    keep = max(keep, 1)
    kept = float(np.sum(s[:keep] ** 2))
    norm = np.sqrt(kept)
    return u[:, :keep], s[:keep] / norm, vh[:keep], max(0.0, 1.0 - kept / total), norm


def update_bond(tensors: list, schmidts: list, gate: np.ndarray, k: int, chi_max: int,
                left_weight: np.ndarray, normalize: bool = True) -> float:
    """Apply ``gate`` to sites ``(k, k+1)`` in place; return the discarded weight.

    ``gate`` is a (d, d, d, d) array, out indices first.  The right-hand
    tensor becomes the row-orthonormal SVD factor; the left one is obtained
    as ``C V^dagger`` without dividing by Schmidt values.  With
    ``normalize=False`` the state keeps the norm change of the gate.
    """
    b1, b2 = tensors[k], tensors[k + 1]
    chi_l, d, _ = b1.shape
    chi_r = b2.shape[2]
    c = np.tensordot(b1, b2, axes=(2, 0))
    c = np.tensordot(gate, c, axes=([2, 3], [1, 2])).transpose(2, 0, 1, 3)
    theta = (left_weight[:, None, None, None] * c).reshape(chi_l * d, d * chi_r)
    _, s, vh, disc, norm = truncated_svd(theta, chi_max, f"on bond {k}")
    c = c.reshape(chi_l * d, d * chi_r)
    new_left = (c @ vh.conj().T).reshape(chi_l, d, len(s))
    if normalize:
        new_left = new_left / norm
    tensors[k] = new_left
    tensors[k + 1] = vh.reshape(len(s), d, chi_r)
    schmidts[k] = s
    return disc


def apply_two_site_gate(mps: MPSState, gate: np.ndarray, bond: int, normalize: bool = True) -> MPSState:
    """Return a new state with ``gate`` (``d^2 x d^2`` or rank-4) applied on ``bond``."""
    d = mps.local_dim
    if not 0 <= bond < mps.n_sites - 1:
        raise ParameterError(f"bond {bond} outside 0..{mps.n_sites - 2}")
    g = np.asarray(gate)
    if g.shape == (d * d, d * d):
        g = g.reshape(d, d, d, d)
    if g.shape != (d, d, d, d):
        raise ParameterError(f"gate must be {d * d}x{d * d}, got shape {np.asarray(gate).shape}")
    out = mps.copy()
    if np.iscomplexobj(g):
        out.tensors = [t.astype(complex) for t in out.tensors]
    out.discarded += update_bond(out.tensors, out.schmidts, g, bond, out.chi_max,
                                 out.left_weight(bond), normalize)
    return out


def canonicalize(mps: MPSState, chi_max: int | None = None) -> float:
    """Bring ``mps`` into exact right-canonical form in place; return its old norm.

    A left-to-right QR sweep followed by a right-to-left SVD sweep yields
    the true Schmidt values; truncation to ``chi_max`` happens in the second
    sweep, where it is optimal.
    """
    chi = chi_max or mps.chi_max
    ts = mps.tensors
    n = mps.n_sites
    for k in range(n - 1):
        a, d, b = ts[k].shape
        q, r = np.linalg.qr(ts[k].reshape(a * d, b))
        ts[k] = q.reshape(a, d, q.shape[1])
        ts[k + 1] = np.tensordot(r, ts[k + 1], axes=(1, 0))
    norm = float(np.linalg.norm(ts[n - 1]))
    if norm == 0.0:
        raise ConvergenceError("state has zero norm")
    ts[n - 1] = ts[n - 1] / norm
    for k in range(n - 1, 0, -1):
        a, d, b = ts[k].shape
        u, s, vh, disc, _ = truncated_svd(ts[k].reshape(a, d * b), chi, f"at site {k}")
        mps.discarded += disc
        ts[k] = vh.reshape(len(s), d, b)
        ts[k - 1] = np.tensordot(ts[k - 1], u * s[None, :], axes=(2, 0))
        mps.schmidts[k - 1] = s
    ts[0] = ts[0] / np.linalg.norm(ts[0])
    return norm


def _transfer(env: np.ndarray, bra: np.ndarray, ket: np.ndarray) -> np.ndarray:
    return np.tensordot(np.tensordot(env, bra.conj(), axes=(0, 0)), ket, axes=([0, 1], [0, 1]))


def norm_squared(mps: MPSState) -> float:
    env = np.ones((1, 1))
    for b in mps.tensors:
        env = _transfer(env, b, b)
    return float(env[0, 0].real)


def overlap(a: MPSState, b: MPSState) -> complex:
    """``<a|b>`` by transfer-matrix contraction."""
    if (a.n_sites, a.local_dim) != (b.n_sites, b.local_dim):
        raise ParameterError("states live on different spaces")
    env = np.ones((1, 1))
    for ta, tb in zip(a.tensors, b.tensors):
        env = _transfer(env, ta, tb)
    return complex(env[0, 0])


def site_expectations(mps: MPSState, op: np.ndarray) -> np.ndarray:
    """``<op_k>`` for every site, assuming right-canonical form."""
    out = np.empty(mps.n_sites)
    for k, b in enumerate(mps.tensors):
        t = mps.left_weight(k)[:, None, None] * b
        out[k] = np.einsum("asb,st,atb->", t.conj(), op, t).real
    return out


def two_point(mps: MPSState, op_a: np.ndarray, op_b: np.ndarray, i: int, js: Sequence[int]) -> np.ndarray:
    """``<op_a(i) op_b(j)>`` for each ``j > i``, assuming right-canonical form."""
    js = list(js)
    if any(j <= i for j in js):
        raise ParameterError("two_point needs j > i")
    t = mps.left_weight(i)[:, None, None] * mps.tensors[i]
    env = np.einsum("asb,st,atc->bc", t.conj(), op_a, t)
    want = set(js)
    values = {}
    for j in range(i + 1, max(js) + 1):
        b = mps.tensors[j]
        if j in want:
            values[j] = np.einsum("ab,asc,st,btc->", env, b.conj(), op_b, b).real
        env = _transfer(env, b, b)
    return np.array([values[j] for j in js])


def apply_mpo(mpo: list, mps: MPSState) -> list:
    """Tensors of ``W|psi>`` with fused bonds (no truncation)."""
    out = []
    for w, b in zip(mpo, mps.tensors):
        t = np.einsum("wvst,atb->wasvb", w, b)
        dw, da, d, dv, db = t.shape
        out.append(t.reshape(dw * da, d, dv * db))
    return out


def mpo_expectation(mpo: list, mps: MPSState) -> float:
    """``<psi|W|psi> / <psi|psi>`` by direct contraction."""
    env = np.ones((1, 1, 1))
    for w, b in zip(mpo, mps.tensors):
        env = np.tensordot(env, b.conj(), axes=(0, 0))        # w b s c
        env = np.tensordot(env, w, axes=([0, 2], [0, 2]))     # b c v t
        env = np.tensordot(env, b, axes=([0, 3], [0, 1]))     # c v d
    return float(env[0, 0, 0].real) / norm_squared(mps)


def mpo_variance(mpo: list, mps: MPSState) -> float:
    """``<H^2> - <H>^2`` for a normalized state."""
    e = mpo_expectation(mpo, mps)
    hpsi = apply_mpo(mpo, mps)
    env = np.ones((1, 1))
    for t in hpsi:
        env = _transfer(env, t, t)
    h2 = float(env[0, 0].real) / norm_squared(mps)
    return h2 - e * e
