"""Weak-drive amplitude analytics for the driven magnon mode.

The state is truncated to nine product states |n1 n2 s> with at most two
excitations. Their amplitudes obey a linear Schrodinger equation under the
damped (non-Hermitian) Hamiltonian; with the ground amplitude pinned to one,
the stationary solution gives a closed form for g2(0) in terms of six
coefficients A0..A2, B0..B2, and the complete-blockade condition
A0 B1 - A1 B0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateParametersError, DivergenceError, InvalidParameterError
from .hilbert import EffectiveParams

SQRT2 = math.sqrt(2.0)
LABELS = ("00g", "10g", "00e", "01g", "20g", "10e", "11g", "01e", "02g")
# (n1, n2, qubit) for each label, qubit 0 = g
LEVELS = tuple((int(s[0]), int(s[1]), 0 if s[2] == "g" else 1) for s in LABELS)
DENOMINATOR_FLOOR = 1e-30
MIN_FIRST_ORDER = 1e-12


@dataclass(frozen=True)
class ComplexDetunings:
    Delta1: complex
    Delta2: complex
    Delta_q: complex


def complex_detunings(p: EffectiveParams) -> ComplexDetunings:
    return ComplexDetunings(
        Delta1=complex(p.delta1, -p.kappa / 2),
        Delta2=complex(p.delta2, -p.kappa / 2),
        Delta_q=complex(p.delta_q, -p.gamma / 2),
    )


class AmplitudeVector:
    """The nine amplitudes C_{n1 n2 s}, ordered as :data:`LABELS`."""

    __slots__ = ("values",)

    def __init__(self, values):
        values = np.array(values, dtype=complex)
        if values.shape != (9,):
            raise InvalidParameterError(f"expected 9 amplitudes, got shape {values.shape}")
        self.values = values

    @classmethod
    def vacuum(cls) -> "AmplitudeVector":
        v = np.zeros(9, dtype=complex)
        v[0] = 1.0
        return cls(v)

    def __getitem__(self, label: str) -> complex:
        return complex(self.values[LABELS.index(label)])

    def __repr__(self):
        inner = ", ".join(f"C{k}={v:.3e}" for k, v in zip(LABELS, self.values))
        return f"AmplitudeVector({inner})"

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def normalized_to_ground(self) -> "AmplitudeVector":
        """Amplitudes divided by C00g (the gauge in which C00g = 1)."""
        return AmplitudeVector(self.values / self.values[0])

    def g2(self) -> float:
        c10, c20 = self["10g"], self["20g"]
        if abs(c10) < MIN_FIRST_ORDER:
            raise DegenerateParametersError("single-magnon amplitude vanishes")
        return 2 * abs(c20) ** 2 / abs(c10) ** 4


def amplitude_rhs(c: AmplitudeVector, p: EffectiveParams) -> AmplitudeVector:
    """Time derivatives dC/dt of the nine amplitudes."""
    d = complex_detunings(p)
    D1, D2, Dq = d.Delta1, d.Delta2, d.Delta_q
    g1, g2, om = p.g1, p.g2, p.omega_drive
    C00g, C10g, C00e, C01g, C20g, C10e, C11g, C01e, C02g = c.values
    # right-hand sides of i dC/dt
    i_dot = [
        om * C10g,
        D1 * C10g + g1 * C00e + om * C00g + SQRT2 * om * C20g,
        Dq * C00e + g1 * C10g + g2 * C01g + om * C10e,
        D2 * C01g + g2 * C00e + om * C11g,
        2 * D1 * C20g + SQRT2 * g1 * C10e + SQRT2 * om * C10g,
        (D1 + Dq) * C10e + SQRT2 * g1 * C20g + g2 * C11g + om * C00e,
        (D1 + D2) * C11g + g2 * C10e + g1 * C01e + om * C01g,
        (D2 + Dq) * C01e + SQRT2 * g2 * C02g + g1 * C11g,
        2 * D2 * C02g + SQRT2 * g2 * C01e,
    ]
    return AmplitudeVector(-1j * np.array(i_dot))


def amplitude_matrix(p: EffectiveParams) -> np.ndarray:
    """Matrix M with dC/dt = M C, read off column by column from :func:`amplitude_rhs`."""
    return np.column_stack([amplitude_rhs(AmplitudeVector(e), p).values for e in np.eye(9)])


def integrate_amplitudes(p: EffectiveParams, t_end: float, dt: float) -> AmplitudeVector:
    """Classical RK4 from the vacuum C00g = 1 up to ``t_end``."""
    if dt <= 0:
        raise InvalidParameterError("dt must be positive")
    steps = int(round(t_end / dt))
    c = AmplitudeVector.vacuum().values
    f = lambda v: amplitude_rhs(AmplitudeVector(v), p).values
    for _ in range(steps):
        k1 = f(c)
        k2 = f(c + dt / 2 * k1)
        k3 = f(c + dt / 2 * k2)
        k4 = f(c + dt * k3)
        c = c + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(c)):
            raise DivergenceError("amplitude integration produced non-finite values")
    return AmplitudeVector(c)


def steady_amplitudes(p: EffectiveParams) -> AmplitudeVector:
    """Stationary amplitudes with C00g pinned to 1 (full 8x8 solve, no cascade)."""
    m = amplitude_matrix(p)
    try:
        rest = np.linalg.solve(m[1:, 1:], -m[1:, 0])
    except np.linalg.LinAlgError as exc:
        raise DegenerateParametersError(f"stationary amplitude system is singular: {exc}") from exc
    if not np.all(np.isfinite(rest)):
        raise DegenerateParametersError("stationary amplitude system is singular")
    return AmplitudeVector(np.concatenate([[1.0], rest]))


@dataclass(frozen=True)
class CoeffSet:
    A0: complex
    A1: complex
    A2: complex
    B0: complex
    B1: complex
    B2: complex
    Delta_s: complex
    Delta1_prime: complex
    Delta2_prime: complex
    Delta1_tilde: complex
    Delta2_tilde: complex

    def reduced_amplitudes(self) -> tuple[complex, complex]:
        """(C10g, C20g) solving A0 + A1 C10 + A2 C20 = 0 = B0 + B1 C10 + B2 C20."""
        det = self.A1 * self.B2 - self.A2 * self.B1
        if abs(det) < DENOMINATOR_FLOOR:
            raise DegenerateParametersError("reduced two-amplitude system is singular")
        return (
            (self.A2 * self.B0 - self.A0 * self.B2) / det,
            (self.A0 * self.B1 - self.A1 * self.B0) / det,
        )


def coefficients(delta1, delta2, delta_q, g1, g2, omega, kappa=1.0, gamma=1.11):
    """A0..B2 and auxiliaries; broadcasts over numpy arrays."""
    D1 = np.asarray(delta1) - 0.5j * kappa
    D2 = np.asarray(delta2) - 0.5j * kappa
    Dq = np.asarray(delta_q) - 0.5j * gamma
    if np.any(D1 == 0) or np.any(D2 == 0):
        raise ZeroDivisionError("complex magnon detuning is zero")
    g1 = np.asarray(g1)
    g2 = np.asarray(g2)
    om = np.asarray(omega)
    Ds = D1 + D2 + Dq
    D1p = D1 + Dq - g1**2 / D1
    D2p = D2 + Dq - g2**2 / D2
    D1t = Dq + om**2 / D1 - g1**2 / D1
    D2t = Dq + om**2 / D2 - g2**2 / D2
    A0 = om * D2 * D2t
    A1 = D1 * D2 * D2t + om**2 * Ds - g1**2 * D2
    A2 = SQRT2 * om * (D1 * Ds + D2 * D2t - g1**2)
    B0 = om**2 * (D2p * Ds - g1**2)
    B1 = om * (2 * D1 * (D2p * Ds - g1**2) + D2p * (D2 * D2t - g1**2) - g1**2 * Dq)
    B2 = (
        SQRT2 * (D1**2 + D1 * D1t) * (D2p * (D1 + D2) - g1**2)
        + SQRT2 * om**2 * D2p * (D1 + Dq)
        - SQRT2 * g2**2 * D1 * D2p
    )
    return dict(A0=A0, A1=A1, A2=A2, B0=B0, B1=B1, B2=B2, Delta_s=Ds,
                Delta1_prime=D1p, Delta2_prime=D2p, Delta1_tilde=D1t, Delta2_tilde=D2t)


def _coefficients_of(p: EffectiveParams) -> dict:
    return coefficients(p.delta1, p.delta2, p.delta_q, p.g1, p.g2, p.omega_drive, p.kappa, p.gamma)


def coefficient_set(p: EffectiveParams) -> CoeffSet:
    return CoeffSet(**{k: complex(v) for k, v in _coefficients_of(p).items()})


def g2_from_coefficients(c: dict) -> np.ndarray:
    """Closed-form g2(0); ``nan`` where the denominator falls below the floor."""
    num = 2 * np.abs(c["A0"] * c["B1"] - c["A1"] * c["B0"]) ** 2 * np.abs(c["A1"] * c["B2"] - c["A2"] * c["B1"]) ** 2
    den = np.abs(c["A2"] * c["B0"] - c["A0"] * c["B2"])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den**4
    return np.where(den > DENOMINATOR_FLOOR, out, np.nan)


def g2_analytic(p: EffectiveParams) -> float:
    value = float(g2_from_coefficients(_coefficients_of(p)))
    if math.isnan(value):
        raise DegenerateParametersError("|A2 B0 - A0 B2| below floor; g2 undefined (no drive?)")
    return value


def blockade_residual(p: EffectiveParams) -> complex:
    c = _coefficients_of(p)
    return complex(c["A0"] * c["B1"] - c["A1"] * c["B0"])


def golden_section_min(f: Callable[[float], float], a: float, b: float, tol: float = 1e-5,
                       max_iter: int = 200) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on [a, b] to bracket width ``tol``; returns (x, f(x))."""
    inv_phi = (math.sqrt(5) - 1) / 2
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = f(x2)
    x = x1 if f1 <= f2 else x2
    return x, min(f1, f2)


@dataclass(frozen=True)
class OptimalDetuning:
    delta1: float
    residual: float
    at_boundary: bool


def optimal_delta1(p: EffectiveParams, search: tuple[float, float] = (-1.0, 1.0),
                   step: float = 1e-3, tol: float = 1e-5) -> OptimalDetuning:
    """delta1 minimizing |A0 B1 - A1 B0| over ``search`` (p.delta1 is ignored).

    Coarse scan at ``step`` then golden-section refinement between the
    neighbours of the best scan point. Ties go to the smallest delta1.
    """
    lo, hi = search
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise InvalidParameterError(f"invalid search interval {search}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(n)
    if grid[-1] < hi:
        grid = np.append(grid, hi)
    c = coefficients(grid, p.delta2, p.delta_q, p.g1, p.g2, p.omega_drive, p.kappa, p.gamma)
    res = np.abs(c["A0"] * c["B1"] - c["A1"] * c["B0"])
    i = int(np.argmin(res))
    x_best = float(grid[i])
    c10 = abs(steady_amplitudes(p.replace(delta1=x_best))["10g"])
    if c10 < MIN_FIRST_ORDER:
        raise DegenerateParametersError("no single-magnon occupation at the optimum; blockade is trivial")
    f = lambda x: abs(blockade_residual(p.replace(delta1=x)))
    a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, len(grid) - 1)])
    x, fx = golden_section_min(f, a, b, tol)
    if fx > res[i]:
        x, fx = x_best, float(res[i])
    at_boundary = i == 0 or i == len(grid) - 1
    return OptimalDetuning(delta1=float(x), residual=float(fx), at_boundary=at_boundary)
