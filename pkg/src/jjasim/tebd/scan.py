"""Field scans of the ground energy, dip detection and correlation decay."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths

from ..errors import JJASimError, ParameterError
from .finite import DEFAULT_CHI, DEFAULT_DTAU_SCHEDULE, ground_state_finite
from .model import SZ
from .mps import MPSState, site_expectations, two_point

SCAN_ENERGY_TOL = 1e-8
DIP_THRESHOLD_MADS = 3.0
COARSE_STEP = 0.05
FINE_STEP = 0.01
MAX_DIAGRAM_POINTS = 2000


@dataclass(frozen=True)
class Dip:
    b_c: float
    depth: float
    width: float
    main: bool = False


@dataclass
class ScanCurve:
    """Energies on a uniform field grid and their central second difference.

    ``second_derivative[i]`` belongs to ``grid[i]``; the two endpoints hold NaN.
    """

    grid: np.ndarray
    energies: np.ndarray
    second_derivative: np.ndarray
    dips: list
    n_sites: int = 0
    lam: float = math.nan
    chi: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def main_dip(self):
        return next((d for d in self.dips if d.main), None)

    def rows(self):
        """``(lambda, B, N, chi, E_g, d2E_dB2, n_dips, B_c_main)`` per grid point."""
        main = self.main_dip
        bc = main.b_c if main else math.nan
        return [(self.lam, float(b), self.n_sites, self.chi, float(e), float(d2), len(self.dips), bc)
                for b, e, d2 in zip(self.grid, self.energies, self.second_derivative)]


def uniform_grid(grid, min_points: int = 5) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < min_points:
        raise ParameterError(f"field grid needs at least {min_points} points")
    steps = np.diff(g)
    if np.any(steps <= 0):
        raise ParameterError("field grid must be strictly increasing")
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise ParameterError("field grid must be uniformly spaced")
    return g


def second_difference(grid, energies) -> np.ndarray:
    """``(E(B-h) - 2E(B) + E(B+h)) / h^2`` with NaN at both ends."""
    g = uniform_grid(grid, 3)
    e = np.asarray(energies, dtype=float)
    h = g[1] - g[0]
    out = np.full(e.shape, np.nan)
    out[1:-1] = (e[:-2] - 2.0 * e[1:-1] + e[2:]) / (h * h)
    return out


def detect_dips(values, grid=None, threshold: float = DIP_THRESHOLD_MADS) -> list:
    """Local minima whose prominence is at least ``threshold`` median absolute deviations.

    NaN entries (e.g. the endpoints of a second difference) are ignored.
    ``depth`` is the prominence, positions are refined by a parabola through
    the three points around each minimum, and widths are full widths at half
    prominence.  Dips come sorted by position; the deepest is flagged main.
    """
    v = np.asarray(values, dtype=float)
    x = np.arange(v.size, dtype=float) if grid is None else np.asarray(grid, dtype=float)
    ok = np.isfinite(v)
    v, x = v[ok], x[ok]
    if v.size < 5:
        return []
    mad = float(np.median(np.abs(v - np.median(v))))
    if mad == 0.0:
        mad = float(np.finfo(float).tiny)
    idx, props = find_peaks(-v, prominence=threshold * mad)
    if idx.size == 0:
        return []
    widths, _, left, right = peak_widths(-v, idx, rel_height=0.5, prominence_data=(
        props["prominences"], props["left_bases"], props["right_bases"]))
    positions = np.arange(v.size, dtype=float)
    dips = []
    for i, depth, lo, hi in zip(idx, props["prominences"], left, right):
        denom = v[i - 1] - 2.0 * v[i] + v[i + 1]
        shift = 0.5 * (v[i - 1] - v[i + 1]) / denom if denom > 0 else 0.0
        b_c = float(np.interp(i + float(np.clip(shift, -1.0, 1.0)), positions, x))
        width = float(np.interp(hi, positions, x) - np.interp(lo, positions, x))
        dips.append(Dip(b_c, float(depth), width))
    k = int(np.argmax([d.depth for d in dips]))
    dips[k] = Dip(dips[k].b_c, dips[k].depth, dips[k].width, True)
    return dips


def scan_energies(n_sites: int, lam: float, b_values, chi: int = DEFAULT_CHI,
                  dtau_schedule=DEFAULT_DTAU_SCHEDULE, energy_tol: float = SCAN_ENERGY_TOL,
                  warm_start: bool = True):
    """Ground energies along ``b_values``, each point warm-started from the last."""
    energies = []
    states = []
    prev: MPSState | None = None
    for b in b_values:
        res = ground_state_finite(n_sites, lam, float(b), chi, dtau_schedule, energy_tol,
                                  initial=prev if warm_start else None)
        energies.append(res.energy)
        states.append(res)
        prev = res.mps
    return np.array(energies), states


def second_derivative_scan(n_sites: int, lam: float, b_grid, chi: int = DEFAULT_CHI,
                           dtau_schedule=DEFAULT_DTAU_SCHEDULE, energy_tol: float = SCAN_ENERGY_TOL,
                           threshold: float = DIP_THRESHOLD_MADS) -> ScanCurve:
    """``d^2 E_g / dB^2`` on a uniform grid and the dips it shows."""
    grid = uniform_grid(b_grid)
    energies, results = scan_energies(n_sites, lam, grid, chi, dtau_schedule, energy_tol)
    d2 = second_difference(grid, energies)
    meta = {"chi": chi, "dtau_schedule": list(dtau_schedule), "energy_tol": energy_tol,
            "trotter_order": 2, "discarded_weight": float(sum(r.discarded for r in results)),
            "threshold_mads": threshold}
    return ScanCurve(grid, energies, d2, detect_dips(d2, grid, threshold), n_sites, lam, chi, meta)


@dataclass
class TwoPassScan:
    coarse: ScanCurve
    fine: list
    b_c_main: float

    @property
    def curves(self):
        return [self.coarse] + list(self.fine)


def two_pass_scan(n_sites: int, lam: float, b_min: float, b_max: float, chi: int = DEFAULT_CHI,
                  coarse_step: float = COARSE_STEP, fine_step: float = FINE_STEP, half_window: int = 2,
                  **kwargs) -> TwoPassScan:
    """Coarse scan, then a fine scan of ``+-half_window`` coarse steps around each dip.

    If the coarse pass finds no dip, the fine pass goes around its minimum.
    A fine window is narrower than the dip it refines, so its own median
    absolute deviation is no baseline; there every local minimum counts and
    the deepest one around the coarse main dip gives the critical field.
    """
    n_coarse = int(round((b_max - b_min) / coarse_step))
    if n_coarse < 4 or abs(b_min + n_coarse * coarse_step - b_max) > 1e-9:
        raise ParameterError("[b_min, b_max] must span at least 4 whole coarse steps")
    grid = b_min + coarse_step * np.arange(n_coarse + 1)
    coarse = second_derivative_scan(n_sites, lam, grid, chi, **kwargs)
    centers = [d.b_c for d in coarse.dips]
    if not centers:
        centers = [float(grid[int(np.nanargmin(coarse.second_derivative))])]
    main_center = coarse.main_dip.b_c if coarse.main_dip else centers[0]
    ratio = int(round(coarse_step / fine_step))
    fine_curves = []
    main_fine = None
    for c in sorted(centers):
        start = max(b_min, round(c / fine_step) * fine_step - half_window * ratio * fine_step)
        pts = 2 * half_window * ratio + 1
        fgrid = start + fine_step * np.arange(pts)
        curve = second_derivative_scan(n_sites, lam, fgrid, chi, **dict(kwargs, threshold=0.0))
        fine_curves.append(curve)
        if c == main_center:
            main_fine = curve
    if main_fine is not None and main_fine.main_dip is not None:
        b_c = main_fine.main_dip.b_c
    elif main_fine is not None:
        b_c = float(main_fine.grid[int(np.nanargmin(main_fine.second_derivative))])
    else:
        b_c = main_center
    return TwoPassScan(coarse, fine_curves, b_c)


@dataclass
class PhaseRow:
    lam: float
    b_c_main: float
    n_dips: int
    multi_dip: bool
    dips: list
    error: str = ""


def _phase_row(args) -> PhaseRow:
    lam, b_grid, n_sites, chi, kwargs = args
    try:
        curve = second_derivative_scan(n_sites, lam, b_grid, chi, **kwargs)
    except JJASimError as exc:
        return PhaseRow(lam, math.nan, 0, False, [], f"{type(exc).__name__}: {exc}")
    main = curve.main_dip or next((d for d in detect_dips(curve.second_derivative, curve.grid, 0.0)
                                   if d.main), None)
    return PhaseRow(lam, main.b_c if main else math.nan, len(curve.dips), len(curve.dips) > 1, curve.dips)


def phase_diagram(lam_grid, b_grid, n_sites: int, chi: int = DEFAULT_CHI, workers: int = 1,
                  max_points: int = MAX_DIAGRAM_POINTS, **kwargs) -> list:
    """Main critical field and multi-dip flag for every ``lam``.

    ``n_dips`` counts dips passing the threshold; when none does, the main
    critical field is the deepest local minimum of the curve.

    Rows are independent and may run in ``workers`` processes; the result
    is ordered by ``lam_grid`` regardless.  A failing row is recorded with
    its error and the scan continues.
    """
    lams = [float(x) for x in lam_grid]
    grid = uniform_grid(b_grid)
    if len(lams) * grid.size > max_points:
        raise ParameterError(f"{len(lams) * grid.size} scan points exceed the budget of {max_points}")
    tasks = [(lam, grid, n_sites, chi, kwargs) for lam in lams]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_phase_row, tasks))
    return [_phase_row(t) for t in tasks]


# --- correlations -----------------------------------------------------------

@dataclass
class CorrelationCurve:
    d: np.ndarray
    c: np.ndarray

    @property
    def c_sq(self) -> np.ndarray:
        return self.c ** 2


def correlation_mps(mps: MPSState, max_d: int, anchor: int | None = None) -> CorrelationCurve:
    """Connected ``<z_a z_{a+d}> - <z_a><z_{a+d}>`` for ``d = 1..max_d``.

    The default anchor is site ``N/2`` (0-based).  ``mps`` must be in
    right-canonical form, as returned by the ground-state solvers.
    """
    n = mps.n_sites
    a = n // 2 if anchor is None else anchor
    limit = n // 2 - 2 if anchor is None else n - 1 - a
    if not 1 <= max_d <= limit:
        raise ParameterError(f"max_d must lie in 1..{limit} for N={n}, got {max_d}")
    ds = np.arange(1, max_d + 1)
    z = site_expectations(mps, SZ)
    zz = two_point(mps, SZ, SZ, a, a + ds)
    return CorrelationCurve(ds, zz - z[a] * z[a + ds])


def fit_exponential(d, c, d_min: int = 2, d_max: int = 15):
    """Least-squares line through ``log|c|``; returns ``(slope, intercept, r2)``."""
    d = np.asarray(d, dtype=float)
    c = np.abs(np.asarray(c, dtype=float))
    sel = (d >= d_min) & (d <= d_max) & (c > 0)
    if sel.sum() < 3:
        return math.nan, math.nan, math.nan
    x, y = d[sel], np.log(c[sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else math.nan
    return float(slope), float(intercept), r2


def classify_decay(curve: CorrelationCurve, order_d: int = 20, order_level: float = 0.5,
                   r2_min: float = 0.98, fit_range=(2, 15)) -> str:
    """``long-range``, ``exponential`` or ``neither``."""
    if order_d <= curve.d[-1] and abs(curve.c[order_d - 1]) >= order_level:
        return "long-range"
    _, _, r2 = fit_exponential(curve.d, curve.c, *fit_range)
    if np.isfinite(r2) and r2 > r2_min:
        return "exponential"
    return "neither"
