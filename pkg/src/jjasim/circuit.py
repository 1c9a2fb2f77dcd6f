"""Capacitance network of a ring of charge islands and its spin-model parameters.

Each island couples to its two neighbours through ``C_c`` and to ground
through ``C_J + C_g``.  The charging energy involves the inverse of the
cyclic tridiagonal capacitance matrix, whose first row has the closed form::

    a_i = (lam**(i-1) * A0 + B0 / lam**(i-1)) / C_sigma

with ``beta = C_c / C_sigma`` and ``lam = (1 - sqrt(1 - 4 beta**2)) / (2 beta)``.
Everything downstream works in units where the nearest-neighbour Ising
coupling has magnitude one.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np
from scipy import constants

from .errors import DegenerateCouplingError, DomainError, ParameterError

DEFAULT_BETA_MAX = 0.49

FloatOrSeq = Union[float, Sequence[float]]


def _as_site_array(value: FloatOrSeq, n_sites: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n_sites, float(arr))
    if arr.shape != (n_sites,):
        raise ParameterError(f"{name} must be a scalar or have length {n_sites}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class CircuitParams:
    """Physical parameters of the junction array (SI units).

    ``c_gate`` and ``gate_charge`` may be scalars or per-site sequences.
    ``c_coupling == 0`` is accepted and describes decoupled islands.
    """

    n_sites: int
    c_junction: float
    c_gate: FloatOrSeq
    c_coupling: float
    josephson_energy: float = 0.0
    gate_charge: FloatOrSeq = 0.5

    def __post_init__(self):
        problems = []
        if not isinstance(self.n_sites, (int, np.integer)) or self.n_sites < 3:
            problems.append(f"n_sites must be an integer >= 3, got {self.n_sites!r}")
        if not self.c_junction > 0:
            problems.append(f"c_junction must be > 0, got {self.c_junction!r}")
        if not self.c_coupling >= 0:
            problems.append(f"c_coupling must be >= 0, got {self.c_coupling!r}")
        if self.josephson_energy < 0:
            problems.append(f"josephson_energy must be >= 0, got {self.josephson_energy!r}")
        if not problems:
            cg = _as_site_array(self.c_gate, self.n_sites, "c_gate")
            if np.any(cg <= 0):
                problems.append("every c_gate entry must be > 0")
            _as_site_array(self.gate_charge, self.n_sites, "gate_charge")
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def c_gate_array(self) -> np.ndarray:
        return _as_site_array(self.c_gate, self.n_sites, "c_gate")

    @property
    def gate_charge_array(self) -> np.ndarray:
        return _as_site_array(self.gate_charge, self.n_sites, "gate_charge")

    @property
    def c_sigma_array(self) -> np.ndarray:
        return self.c_junction + self.c_gate_array + 2.0 * self.c_coupling

    @classmethod
    def from_json(cls, text: str) -> "CircuitParams":
        data = json.loads(text)
        expected = {"n_sites", "c_junction", "c_gate", "c_coupling", "josephson_energy", "gate_charge"}
        unknown = set(data) - expected
        missing = {"n_sites", "c_junction", "c_gate", "c_coupling"} - set(data)
        if unknown or missing:
            raise ParameterError(f"bad CircuitParams keys: unknown={sorted(unknown)} missing={sorted(missing)}")
        return cls(**data)


@dataclass(frozen=True)
class ReducedParams:
    """Dimensionless spin-model parameters derived from a circuit."""

    beta: float
    lam: float
    a0: float
    b0: float
    c_sigma: float
    field_b: float
    n_sites: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def build_capacitance_matrix(params: CircuitParams) -> np.ndarray:
    """Cyclic tridiagonal capacitance matrix, corners included."""
    n = params.n_sites
    m = np.diag(params.c_sigma_array)
    for i in range(n):
        m[i, (i + 1) % n] -= params.c_coupling
        m[(i + 1) % n, i] -= params.c_coupling
    return m


def lambda_of_beta(beta: float) -> float:
    """Decay ratio of the inverse-matrix row, ``lam(beta)`` on ``[0, 1/2)``."""
    if not 0.0 <= beta < 0.5:
        raise DomainError(f"beta must lie in [0, 1/2), got {beta!r}")
    if beta == 0.0:
        return 0.0
    # rationalised form avoids cancellation for small beta
    return 2.0 * beta / (1.0 + math.sqrt(1.0 - 4.0 * beta * beta))


def inverse_coefficients(beta: float, n_sites: int) -> tuple[float, float, float]:
    """Return ``(lam, A0, B0)`` for a ring of ``n_sites`` islands.

    ``B0`` is returned as a float and may underflow to zero for long rings;
    :func:`inverse_elements_exact` never divides by it.
    """
    if not 0.0 < beta < 0.5:
        raise DomainError(f"beta must lie in (0, 1/2), got {beta!r}")
    if n_sites < 3:
        raise ParameterError(f"n_sites must be >= 3, got {n_sites}")
    lam = lambda_of_beta(beta)
    ratio = (2.0 * beta - lam) / (1.0 - 2.0 * beta * lam)
    tail = math.exp((n_sites - 1) * math.log(lam))
    a0 = 1.0 / (1.0 - 2.0 * beta * lam + (1.0 - 2.0 * beta / lam) * ratio * tail)
    b0 = ratio * tail * a0
    return lam, a0, b0


def inverse_elements_exact(beta: float, n_sites: int, infinite: bool = False) -> np.ndarray:
    """First row ``a_1..a_N`` of the inverse capacitance matrix, times ``C_sigma``.

    With ``infinite=True`` the long-ring limit ``A0 = 1/(1 - 2 beta lam)``,
    ``B0 = 0`` is used instead of the finite-ring coefficients.
    """
    if n_sites < 3:
        raise ParameterError(f"n_sites must be >= 3, got {n_sites}")
    if beta == 0.0:
        row = np.zeros(n_sites)
        row[0] = 1.0
        return row
    i = np.arange(n_sites)
    if infinite:
        lam = lambda_of_beta(beta)
        return lam**i / (1.0 - 2.0 * beta * lam)
    lam, a0, _ = inverse_coefficients(beta, n_sites)
    log_lam = math.log(lam)
    ratio = (2.0 * beta - lam) / (1.0 - 2.0 * beta * lam)
    # B0 / lam**(i-1) evaluated in log space so that neither factor under/overflows
    log_b0 = math.log(ratio) + (n_sites - 1) * log_lam + math.log(a0)
    return a0 * np.exp(i * log_lam) + np.exp(log_b0 - i * log_lam)


def analytic_inverse_matrix(beta: float, n_sites: int, c_sigma: float = 1.0) -> np.ndarray:
    """Circulant inverse assembled from :func:`inverse_elements_exact`."""
    row = inverse_elements_exact(beta, n_sites) / c_sigma
    idx = (np.arange(n_sites)[None, :] - np.arange(n_sites)[:, None]) % n_sites
    return row[idx]


def inverse_residual(beta: float, n_sites: int) -> float:
    """``max |M M^-1 - I|`` between the numeric matrix and the analytic inverse."""
    # unit C_sigma: C_c = beta, C_J + C_g = 1 - 2 beta
    params = CircuitParams(n_sites, c_junction=(1.0 - 2.0 * beta) / 2.0,
                           c_gate=(1.0 - 2.0 * beta) / 2.0, c_coupling=beta)
    m = build_capacitance_matrix(params)
    return float(np.max(np.abs(m @ analytic_inverse_matrix(beta, n_sites) - np.eye(n_sites))))


def reduce(params: CircuitParams, beta_max: float = DEFAULT_BETA_MAX) -> ReducedParams:
    """Map circuit parameters onto the dimensionless spin model.

    The transverse field is ``B = E_J C_sigma / (2 lam e^2 A0)``, i.e. the
    Josephson term measured in units of the nearest-neighbour coupling.
    """
    cg = params.c_gate_array
    if not np.allclose(cg, cg[0], rtol=1e-12, atol=0.0):
        raise ParameterError("reduce() requires a uniform gate capacitance")
    if params.c_coupling == 0.0:
        raise DegenerateCouplingError(
            "c_coupling = 0: islands are decoupled (lam = 0) and the field B is undefined")
    c_sigma = float(params.c_sigma_array[0])
    beta = params.c_coupling / c_sigma
    if beta > beta_max:
        raise DomainError(f"beta = {beta:.6g} exceeds beta_max = {beta_max}")
    lam, a0, b0 = inverse_coefficients(beta, params.n_sites)
    field_b = params.josephson_energy * c_sigma / (2.0 * lam * constants.e**2 * a0)
    return ReducedParams(beta=beta, lam=lam, a0=a0, b0=b0, c_sigma=c_sigma,
                         field_b=field_b, n_sites=params.n_sites)
