"""Parameter sweeps, optimal-detuning curves, thermal sweeps and model validations."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import analytic
from .errors import (
    InvalidParameterError,
    RegimeViolationError,
    UnoccupiedModeError,
)
from .hilbert import (
    EffectiveParams,
    FullModelParams,
    build_full_hamiltonian,
    effective_space,
    full_space,
    model_operators,
    reduce_full_params,
)
from .lindblad import (
    Dissipator,
    EffectiveSolver,
    ThermalConfig,
    build_liouvillian,
    drive_scale,
    g2_from_vector,
    g2_numeric,
    g2_zero,
    steady_state,
    thermal_occupation,
    unvec,
)

log = logging.getLogger(__name__)

CHANNELS = ("numeric", "analytic")
AXIS_NAMES = ("delta1", "delta2", "delta_q", "g1", "g2", "g2_ratio", "omega_drive", "n_th1", "n_th2")


@dataclass(frozen=True)
class AxisSpec:
    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise InvalidParameterError(f"unknown axis {self.name!r}; expected one of {AXIS_NAMES}")
        values = tuple(float(v) for v in self.values)
        if len(values) < 2:
            raise InvalidParameterError(f"axis {self.name!r} needs at least 2 values")
        d = np.diff(values)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise InvalidParameterError(f"axis {self.name!r} values must be strictly monotone")
        object.__setattr__(self, "values", values)

    @classmethod
    def linspace(cls, name: str, start: float, stop: float, count: int) -> "AxisSpec":
        return cls(name, tuple(np.linspace(start, stop, count)))


def apply_axes(base: EffectiveParams, assignment: dict[str, float]) -> EffectiveParams:
    """Set axis values on ``base``; ``g2_ratio`` is applied after ``g1``."""
    changes = {k: v for k, v in assignment.items() if k != "g2_ratio"}
    p = base.replace(**changes) if changes else base
    if "g2_ratio" in assignment:
        p = p.replace(g2=assignment["g2_ratio"] * p.g1)
    return p


def _channels(channel: str) -> tuple[str, ...]:
    if channel == "both":
        return CHANNELS
    if channel not in CHANNELS:
        raise InvalidParameterError(f"channel must be analytic, numeric or both, got {channel!r}")
    return (channel,)


@dataclass
class Minimum:
    coords: tuple[float, ...]
    value: float
    channel: str
    index: tuple[int, ...]
    refined: bool


@dataclass
class SweepGrid:
    base: EffectiveParams
    axes: tuple[AxisSpec, ...]
    values: dict[str, np.ndarray]
    flags: dict[str, np.ndarray]
    minimum: dict[str, Minimum | None]
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a.values) for a in self.axes)

    def rows(self) -> list[dict]:
        """Long-format table, one row per grid point, in C order."""
        out = []
        for idx in np.ndindex(*self.shape):
            row = {a.name: a.values[i] for a, i in zip(self.axes, idx)}
            for ch in CHANNELS:
                row[f"g2_{ch}"] = float(self.values[ch][idx]) if ch in self.values else math.nan
            row["flag"] = "unoccupied" if any(bool(f[idx]) for f in self.flags.values()) else ""
            out.append(row)
        return out


def _numeric_worker(args):
    n, points = args
    solver = EffectiveSolver(effective_space(n))
    out = []
    for p in points:
        out.append(_numeric_point(solver, p))
    return out


def _numeric_point(solver: EffectiveSolver, p: EffectiveParams) -> tuple[float, float, float, float]:
    """(g2, hermiticity error, trace error, min eigenvalue); g2 is nan when unoccupied."""
    y = solver.solve_vector(p)
    rho = unvec(y, solver.space.dim)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = float(abs(np.trace(rho) - 1))
    min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
    try:
        g2 = g2_from_vector(y, solver._w_number, solver._w_pair)
    except UnoccupiedModeError:
        g2 = math.nan
    return g2, herm, tr, min_eig


def evaluate_numeric(points: Sequence[EffectiveParams], n: int = 4, workers: int = 1) -> np.ndarray:
    """Numeric g2 and physicality diagnostics for each point; shape (len(points), 4)."""
    if workers <= 1 or len(points) < 2 * workers:
        return np.array(_numeric_worker((n, list(points))), dtype=float).reshape(-1, 4)
    chunks = np.array_split(np.arange(len(points)), workers * 4)
    jobs = [(n, [points[i] for i in c]) for c in chunks if len(c)]
    results = np.empty((len(points), 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for c, res in zip([c for c in chunks if len(c)], pool.map(_numeric_worker, jobs)):
            results[c] = res
    return results


def evaluate_analytic(base: EffectiveParams, assignments: dict[str, np.ndarray]) -> np.ndarray:
    """Vectorized closed-form g2 over arrays of axis values."""
    fields = {k: np.asarray(getattr(base, k), dtype=float) for k in
              ("delta1", "delta2", "delta_q", "g1", "g2", "omega_drive", "kappa", "gamma")}
    for k, v in assignments.items():
        if k in ("n_th1", "n_th2"):
            continue
        if k != "g2_ratio":
            fields[k] = np.asarray(v, dtype=float)
    if "g2_ratio" in assignments:
        fields["g2"] = np.asarray(assignments["g2_ratio"]) * fields["g1"]
    c = analytic.coefficients(fields["delta1"], fields["delta2"], fields["delta_q"], fields["g1"],
                              fields["g2"], fields["omega_drive"], fields["kappa"], fields["gamma"])
    return analytic.g2_from_coefficients(c)


def _refine_1d(x: Sequence[float], v: np.ndarray, i: int) -> tuple[float, float, bool]:
    if i == 0 or i == len(v) - 1 or not np.all(np.isfinite(v[i - 1:i + 2])):
        return float(x[i]), float(v[i]), False
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = v[i - 1], v[i], v[i + 1]
    coef = np.polyfit([x0, x1, x2], [y0, y1, y2], 2)
    if coef[0] <= 0:
        return float(x1), float(y1), False
    xs = -coef[1] / (2 * coef[0])
    if not min(x0, x2) <= xs <= max(x0, x2):
        return float(x1), float(y1), False
    return float(xs), float(y1), True


def _refine_2d(ax1, ax2, v: np.ndarray, i: int, j: int) -> tuple[tuple[float, float], float, bool]:
    n1, n2 = v.shape
    grid_point = ((float(ax1[i]), float(ax2[j])), float(v[i, j]), False)
    if i in (0, n1 - 1) or j in (0, n2 - 1):
        return grid_point
    block = v[i - 1:i + 2, j - 1:j + 2]
    if not np.all(np.isfinite(block)):
        return grid_point
    h1 = (ax1[i + 1] - ax1[i - 1]) / 2
    h2 = (ax2[j + 1] - ax2[j - 1]) / 2
    u, w = np.meshgrid((np.array(ax1[i - 1:i + 2]) - ax1[i]) / h1,
                       (np.array(ax2[j - 1:j + 2]) - ax2[j]) / h2, indexing="ij")
    u, w, f = u.ravel(), w.ravel(), block.ravel()
    design = np.column_stack([np.ones(9), u, w, u * u, u * w, w * w])
    c = np.linalg.lstsq(design, f, rcond=None)[0]
    hess = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    if np.linalg.det(hess) <= 0 or hess[0, 0] <= 0:
        return grid_point
    us, ws = np.linalg.solve(hess, -c[1:3])
    if abs(us) > 1 or abs(ws) > 1:
        return grid_point
    return (float(ax1[i] + us * h1), float(ax2[j] + ws * h2)), float(v[i, j]), True


def locate_minimum(axes: Sequence[AxisSpec], values: np.ndarray, flags: np.ndarray, channel: str) -> Minimum | None:
    """Grid argmin over unflagged cells (first in C order on ties).

    Coordinates are refined by a local quadratic fit; the reported value stays the
    grid value since the fit overshoots below zero near sharp dips.
    """
    masked = np.where(flags | ~np.isfinite(values), np.inf, values)
    if not np.any(np.isfinite(masked)):
        return None
    flat = int(np.argmin(masked))
    idx = np.unravel_index(flat, values.shape)
    refinable = np.where(flags, np.nan, values)
    if len(axes) == 1:
        x, val, refined = _refine_1d(axes[0].values, refinable, idx[0])
        return Minimum((x,), val, channel, tuple(int(k) for k in idx), refined)
    coords, val, refined = _refine_2d(axes[0].values, axes[1].values, refinable, idx[0], idx[1])
    return Minimum(coords, val, channel, tuple(int(k) for k in idx), refined)


def _sweep(base: EffectiveParams, axes: tuple[AxisSpec, ...], channel: str, n: int, workers: int) -> SweepGrid:
    shape = tuple(len(a.values) for a in axes)
    mesh = np.meshgrid(*[np.array(a.values) for a in axes], indexing="ij")
    assignment = {a.name: m for a, m in zip(axes, mesh)}
    values, flags, minimum, diagnostics = {}, {}, {}, {}
    for ch in _channels(channel):
        if ch == "analytic":
            v = evaluate_analytic(base, assignment)
            v = np.broadcast_to(v, shape).copy()
        else:
            points = [apply_axes(base, {a.name: a.values[k] for a, k in zip(axes, idx)}) for idx in np.ndindex(*shape)]
            res = evaluate_numeric(points, n=n, workers=workers)
            v = res[:, 0].reshape(shape)
            diagnostics["hermiticity"] = res[:, 1].reshape(shape)
            diagnostics["trace"] = res[:, 2].reshape(shape)
            diagnostics["min_eigenvalue"] = res[:, 3].reshape(shape)
        f = ~np.isfinite(v)
        values[ch], flags[ch] = v, f
        minimum[ch] = locate_minimum(axes, v, f, ch)
    return SweepGrid(base, axes, values, flags, minimum, diagnostics)


def sweep_2d(base: EffectiveParams, axis1: AxisSpec, axis2: AxisSpec, channel: str = "both",
             n: int = 4, workers: int = 1) -> SweepGrid:
    if axis1.name == axis2.name:
        raise InvalidParameterError("the two sweep axes must differ")
    return _sweep(base, (axis1, axis2), channel, n, workers)


def sweep_1d(base: EffectiveParams, axis: AxisSpec, channel: str = "both", n: int = 4, workers: int = 1) -> SweepGrid:
    return _sweep(base, (axis,), channel, n, workers)


def fig3_axes(count1: int = 161, count2: int = 161) -> tuple[AxisSpec, AxisSpec]:
    """Default (delta1, g2/g1) axes of the optimal-blockade maps."""
    return AxisSpec.linspace("delta1", -1.0, 1.0, count1), AxisSpec.linspace("g2_ratio", 0.0, 0.5, count2)


def fig6_axes(count_q: int = 121, count1: int = 121) -> tuple[AxisSpec, AxisSpec]:
    return AxisSpec.linspace("delta_q", -0.5, 0.5, count_q), AxisSpec.linspace("delta1", -1.0, 1.0, count1)


@dataclass
class OptimalCurveRow:
    detuning: float
    g2_ratio: float
    delta1_opt: float
    residual: float
    at_boundary: bool


def optimal_curve(g_ratios: Iterable[float], detunings: Iterable[float], base: EffectiveParams,
                  search: tuple[float, float] = (-1.0, 1.0)) -> list[OptimalCurveRow]:
    """delta1_opt for every (delta_q = delta2, g2/g1) pair via the analytic blockade condition."""
    rows = []
    for d in detunings:
        for r in g_ratios:
            p = base.replace(delta2=float(d), delta_q=float(d), g2=float(r) * base.g1)
            opt = analytic.optimal_delta1(p, search)
            if opt.at_boundary:
                log.warning("optimal delta1 at search boundary for detuning=%g ratio=%g", d, r)
            rows.append(OptimalCurveRow(float(d), float(r), opt.delta1, opt.residual, opt.at_boundary))
    return rows


@dataclass
class ThermalSweep:
    temperatures: np.ndarray
    n_th1: np.ndarray
    n_th2: np.ndarray
    curves: dict[str, np.ndarray]
    crossings: dict[str, float | None]


def unity_crossing(temperatures: Sequence[float], values: Sequence[float], level: float = 1.0) -> float | None:
    """First upward crossing of ``level``, linearly interpolated between grid points."""
    t = np.asarray(temperatures, dtype=float)
    v = np.asarray(values, dtype=float)
    for k in range(len(v) - 1):
        if v[k] < level <= v[k + 1]:
            return float(t[k] + (level - v[k]) * (t[k + 1] - t[k]) / (v[k + 1] - v[k]))
    return None


def thermal_sweep(cfg: ThermalConfig, param_sets: dict[str, EffectiveParams], temperatures: Sequence[float],
                  n: int = 4) -> ThermalSweep:
    t = np.asarray(temperatures, dtype=float)
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise InvalidParameterError("temperatures must be >= 0 and strictly increasing")
    n1 = np.array([thermal_occupation(ThermalConfig(cfg.omega1, cfg.omega2, T, cfg.kappa_absolute), 1) for T in t])
    n2 = np.array([thermal_occupation(ThermalConfig(cfg.omega1, cfg.omega2, T, cfg.kappa_absolute), 2) for T in t])
    solver = EffectiveSolver(effective_space(n))
    curves, crossings = {}, {}
    for name, p in param_sets.items():
        curve = np.array([solver.g2(p.replace(n_th1=a, n_th2=b)) for a, b in zip(n1, n2)])
        curves[name] = curve
        crossings[name] = unity_crossing(t, curve)
    return ThermalSweep(t, n1, n2, curves, crossings)


@dataclass
class ValidationReport:
    full_g2: float
    effective_g2: float
    deviation: float
    full_params: dict
    effective_params: dict


def relative_deviation(a: float, b: float, floor: float = 1e-300) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def adiabatic_validation(full: FullModelParams, kappa: float = 1.0, gamma: float = 1.11,
                         n_th1: float = 0.0, n_th2: float = 0.0, magnon_dim: int = 3, cavity_dim: int = 2,
                         cavity_decay: float = 0.0, regime_factor: float = 10.0) -> ValidationReport:
    """Compare g2 of the five-mode model with its cavity-eliminated reduction."""
    others = [abs(x) for x in (full.delta1_bare, full.delta2_bare, full.delta_q_bare, full.g_m1, full.g_m2,
                               full.g_q1, full.g_q2, full.omega_drive, kappa, gamma)]
    for dc in (full.delta_c1, full.delta_c2):
        if abs(dc) < regime_factor * max(others):
            raise RegimeViolationError(
                f"|delta_c| = {abs(dc):g} is not >= {regime_factor:g} x every other rate ({max(others):g})"
            )
    eff = reduce_full_params(full, kappa=kappa, gamma=gamma, n_th1=n_th1, n_th2=n_th2)
    space = full_space(magnon_dim, nc=cavity_dim)
    o = model_operators(space)
    dissipators = [
        Dissipator(o["m1"], kappa / 2 * (n_th1 + 1)),
        Dissipator(o["m1"].dag(), kappa / 2 * n_th1),
        Dissipator(o["m2"], kappa / 2 * (n_th2 + 1)),
        Dissipator(o["m2"].dag(), kappa / 2 * n_th2),
        Dissipator(o["sigma"], gamma / 2),
        Dissipator(o["a1"], cavity_decay / 2),
        Dissipator(o["a2"], cavity_decay / 2),
    ]
    L = build_liouvillian(build_full_hamiltonian(full, space), dissipators)
    rho = steady_state(L, scale=drive_scale(full.omega_drive, kappa, (n_th1, n_th2)), method="sparse")
    g_full = g2_zero(rho, 1)
    g_eff = g2_numeric(eff, magnon_dim)
    return ValidationReport(g_full, g_eff, relative_deviation(g_full, g_eff), asdict(full), asdict(eff))


@dataclass
class ConvergenceRow:
    truncation: int
    g2: float
    change_to_next: float | None


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    tolerance: float
    converged_at: int | None

    def converged(self, truncation: int) -> bool:
        return self.converged_at is not None and truncation >= self.converged_at


def convergence_check(p: EffectiveParams, truncations: Sequence[int] = (3, 4, 6), tol: float = 1e-6) -> ConvergenceTable:
    """g2 per magnon truncation; converged at the first N whose value matches the next within ``tol``."""
    ns = [int(k) for k in truncations]
    if min(ns) < 3 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise InvalidParameterError("truncations must be increasing and >= 3")
    values = [g2_numeric(p, k) for k in ns]
    rows, converged_at = [], None
    for k, (nk, v) in enumerate(zip(ns, values)):
        change = relative_deviation(v, values[k + 1]) if k + 1 < len(ns) else None
        rows.append(ConvergenceRow(nk, v, change))
        if converged_at is None and change is not None and change < tol:
            converged_at = nk
    return ConvergenceTable(rows, tol, converged_at)
