"""Lindblad Liouvillian, steady-state solver and correlation functions.

Vectorization is column stacking: ``vec(A X B) = (B^T kron A) vec(X)``, so left
multiplication is ``I kron X`` and right multiplication is ``X^T kron I``.
A dissipator with rate ``r`` and collapse operator ``O`` contributes
``r (2 O rho O^+ - O^+ O rho - rho O^+ O)``; a bare mode damped with
``r = kappa / 2`` loses population at rate ``kappa``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.constants import hbar, k as k_B

from .errors import (
    InvalidParameterError,
    NoUniqueSteadyStateError,
    SpaceMismatchError,
    UnoccupiedModeError,
)
from .hilbert import (
    EffectiveParams,
    HilbertSpace,
    Operator,
    annihilation,
    effective_space,
    effective_terms,
    embed,
    model_operators,
)

OCCUPATION_FLOOR = 1e-14
# Above this many rows the dense LU is not attempted by ``method="auto"``.
DENSE_SOLVE_LIMIT = 256


@dataclass(frozen=True)
class Dissipator:
    op: Operator
    rate: float

    def __post_init__(self):
        if not self.rate >= 0:
            raise InvalidParameterError(f"dissipator rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class ThermalConfig:
    """Bath temperature and absolute magnon frequencies (rad/s)."""

    omega1: float = 2 * math.pi * 8.2e9
    omega2: float = 2 * math.pi * 8.6e9
    temperature: float = 0.0
    kappa_absolute: float = 2 * math.pi * 1.8e6

    def __post_init__(self):
        if self.temperature < 0:
            raise InvalidParameterError("temperature must be >= 0")
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise InvalidParameterError("mode frequencies must be > 0")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace_error(self) -> float:
        return float(abs(np.trace(self.matrix) - 1.0))

    def min_eigenvalue(self) -> float:
        h = (self.matrix + self.matrix.conj().T) / 2
        return float(np.linalg.eigvalsh(h)[0])


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Superoperator ``L`` with ``d vec(rho)/dt = L vec(rho)``."""

    space: HilbertSpace
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def hamiltonian_superop(h: sp.spmatrix) -> sp.csr_matrix:
    n = h.shape[0]
    eye = sp.identity(n, dtype=complex, format="csr")
    return (-1j * (sp.kron(eye, h) - sp.kron(h.T, eye))).tocsr()


def dissipator_superop(o: sp.spmatrix) -> sp.csr_matrix:
    """``2 O . O^+ - O^+O . - . O^+O`` without its rate."""
    n = o.shape[0]
    eye = sp.identity(n, dtype=complex, format="csr")
    odo = (o.conj().T @ o).tocsr()
    return (2 * sp.kron(o.conj(), o) - sp.kron(eye, odo) - sp.kron(odo.T, eye)).tocsr()


def build_liouvillian(h: Operator, dissipators: Iterable[Dissipator]) -> Liouvillian:
    space = h.space
    total = hamiltonian_superop(h.tocsr())
    for d in dissipators:
        if d.op.space != space:
            raise SpaceMismatchError("dissipator and Hamiltonian act on different spaces")
        if d.rate:
            total = total + d.rate * dissipator_superop(d.op.tocsr())
    return Liouvillian(space, sp.csr_matrix(total))


def trace_functional(dim: int) -> np.ndarray:
    """Row vector ``t`` with ``t . vec(X) = Tr X``."""
    return vec(np.eye(dim))


def replaced_row(dim: int) -> int:
    """Row of L overwritten by the trace functional.

    Candidates are the population rows (where the trace functional is
    nonzero); all have unit weight, so the lowest index wins. That is the
    population of the all-ground product state, which carries almost all of
    the weight in the weak-drive regime; replacing the row of a nearly empty
    state instead would leave its population to cancellation in
    ``1 - sum(others)``.
    """
    t = trace_functional(dim)
    weights = np.abs(t)
    return int(np.flatnonzero(weights == weights.max())[0])


def excitation_scaling(space: HilbertSpace, scale: float) -> np.ndarray:
    """Diagonal similarity ``s_k = scale**(n_i + n_j)`` for ``vec`` index ``k = (i, j)``."""
    n = space.excitations()
    dim = space.dim
    exponents = np.tile(n, dim) + np.repeat(n, dim)
    return float(scale) ** exponents.astype(float)


def _solve_replaced(a: sp.spmatrix, row: int, method: str) -> np.ndarray:
    size = a.shape[0]
    b = np.zeros(size, dtype=complex)
    b[row] = 1.0
    if method == "auto":
        method = "dense" if size <= DENSE_SOLVE_LIMIT else "sparse"
    try:
        if method == "dense":
            y = sla.solve(a.toarray(), b, check_finite=False)
        elif method == "sparse":
            a = sp.csc_matrix(a, copy=True)
            # explicit zeros would be treated as structural nonzeros
            a.eliminate_zeros()
            y = spla.splu(a).solve(b)
        else:
            raise ValueError(f"unknown solver method {method!r}")
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise NoUniqueSteadyStateError(f"trace-replaced Liouvillian is singular: {exc}") from exc
    if not np.all(np.isfinite(y)):
        raise NoUniqueSteadyStateError("steady-state solve produced non-finite values")
    return y


def steady_state(L: Liouvillian, scale: float = 1.0, method: str = "auto") -> DensityMatrix:
    """Unique steady state of ``L`` by LU on the trace-replaced system.

    ``scale`` rescales each element ``rho_ij`` by ``scale**(n_i + n_j)``
    before factorizing (an exact similarity transform). With ``scale`` of
    the order of the coherent amplitude, every unknown is O(1) and
    multi-excitation populations far below machine epsilon relative to the
    ground population keep full relative accuracy.
    """
    dim = L.space.dim
    row = replaced_row(dim)
    s = excitation_scaling(L.space, scale)
    a = sp.diags(1.0 / s) @ L.matrix @ sp.diags(s)
    a = sp.lil_matrix(a)
    a[row, :] = trace_functional(dim) * s
    y = _solve_replaced(a.tocsc(), row, method)
    rho = unvec(s * y, dim)
    return DensityMatrix(L.space, (rho + rho.conj().T) / 2)


def residual(L: Liouvillian, rho: DensityMatrix) -> float:
    return float(np.max(np.abs(L.matrix @ vec(rho.matrix))))


def expectation(rho: DensityMatrix, op: Operator) -> complex:
    if rho.space != op.space:
        raise SpaceMismatchError("density matrix and operator act on different spaces")
    m = op.matrix
    prod = m @ rho.matrix if not sp.issparse(m) else m.dot(rho.matrix)
    return complex(np.trace(prod))


@lru_cache(maxsize=64)
def _correlation_ops(space: HilbertSpace, position: int) -> tuple[Operator, Operator]:
    a = embed(annihilation(space.dims[position]), space, position)
    ad = a.dag()
    return ad @ a, ad @ ad @ a @ a


def g2_zero(rho: DensityMatrix, mode_position: int) -> float:
    """Zero-delay second-order correlation of the bosonic mode at ``mode_position``."""
    number, pair = _correlation_ops(rho.space, mode_position)
    n = expectation(rho, number).real
    if n <= OCCUPATION_FLOOR:
        raise UnoccupiedModeError(f"mode occupation {n:.3e} below floor {OCCUPATION_FLOOR:g}")
    g2 = expectation(rho, pair) / n**2
    if abs(g2.imag) > 1e-10 * max(1.0, abs(g2.real)):
        raise ArithmeticError(f"g2 has a non-negligible imaginary part {g2.imag:.3e}")
    return float(g2.real)


def thermal_occupation(cfg: ThermalConfig, which_mode: int) -> float:
    """Bose-Einstein mean occupation of magnon mode 1 or 2."""
    if which_mode not in (1, 2):
        raise InvalidParameterError(f"which_mode must be 1 or 2, got {which_mode}")
    if cfg.temperature == 0:
        return 0.0
    omega = cfg.omega1 if which_mode == 1 else cfg.omega2
    x = hbar * omega / (k_B * cfg.temperature)
    # 1/(e^x - 1) written to stay finite for very large x
    return float(math.exp(-x) / -math.expm1(-x)) if x < 745 else 0.0


def effective_dissipators(p: EffectiveParams, space: HilbertSpace) -> list[Dissipator]:
    o = model_operators(space)
    m1, m2, s = o["m1"], o["m2"], o["sigma"]
    return [
        Dissipator(m1, p.kappa / 2 * (p.n_th1 + 1)),
        Dissipator(m1.dag(), p.kappa / 2 * p.n_th1),
        Dissipator(m2, p.kappa / 2 * (p.n_th2 + 1)),
        Dissipator(m2.dag(), p.kappa / 2 * p.n_th2),
        Dissipator(s, p.gamma / 2),
    ]


def drive_scale(omega: float, kappa: float, n_th: Sequence[float] = ()) -> float:
    """Typical single-excitation amplitude, used as the excitation scaling."""
    amp = max([2 * abs(omega) / kappa] + [math.sqrt(n) for n in n_th])
    if amp == 0:
        return 1.0
    return min(1.0, max(amp, 1e-6))


def effective_liouvillian(p: EffectiveParams, space: HilbertSpace) -> Liouvillian:
    from .hilbert import build_effective_hamiltonian

    return build_liouvillian(build_effective_hamiltonian(p, space), effective_dissipators(p, space))


class EffectiveSolver:
    """Repeated steady-state solves of the effective model on one space.

    The Liouvillian is linear in every scalar parameter, so each term's
    superoperator is precomputed on a shared sparsity pattern (which also
    holds the trace row); one solve is then a data-vector combination plus
    a sparse LU. Results match
    ``steady_state(effective_liouvillian(p, space), scale)`` to rounding.
    """

    def __init__(self, space: HilbertSpace | None = None, method: str = "sparse"):
        self.space = space or effective_space()
        self.method = method
        dim = self.space.dim
        size = dim * dim
        self.row = replaced_row(dim)
        ham = effective_terms(self.space)
        ops = model_operators(self.space)
        mats = [hamiltonian_superop(ham[name].tocsr())
                for name in ("delta_q", "delta1", "delta2", "g1", "g2", "omega_drive")]
        for op in (ops["m1"], ops["m1"].dag(), ops["m2"], ops["m2"].dag(), ops["sigma"]):
            mats.append(dissipator_superop(op.tocsr()))
        t = trace_functional(dim)
        trace = sp.csr_matrix((t, (np.full(size, self.row), np.arange(size))), shape=(size, size))
        trace.eliminate_zeros()

        pattern = sp.csc_matrix(sum(abs(m) for m in mats) + abs(trace))
        pattern.sort_indices()
        self._indptr, self._indices = pattern.indptr, pattern.indices
        rows = pattern.indices
        cols = np.repeat(np.arange(size), np.diff(pattern.indptr))
        keys = cols.astype(np.int64) * size + rows

        def aligned(m):
            coo = sp.coo_matrix(m)
            out = np.zeros(len(keys), dtype=complex)
            np.add.at(out, np.searchsorted(keys, coo.col.astype(np.int64) * size + coo.row), coo.data)
            return out

        self._terms = np.array([aligned(m) for m in mats])
        self._trace = aligned(trace)
        self._keep = (rows != self.row).astype(float)
        lab = np.tile(self.space.excitations(), dim) + np.repeat(self.space.excitations(), dim)
        self._labels = lab.astype(float)
        self._shift = (lab[cols] - lab[rows]).astype(float)
        self._col_labels = lab[cols].astype(float)
        number, pair = _correlation_ops(self.space, 1)
        self._w_number = vec(number.toarray().T)
        self._w_pair = vec(pair.toarray().T)

    @staticmethod
    def coefficients(p: EffectiveParams) -> np.ndarray:
        k = p.kappa / 2
        return np.array([
            p.delta_q, p.delta1, p.delta2, p.g1, p.g2, p.omega_drive,
            k * (p.n_th1 + 1), k * p.n_th1, k * (p.n_th2 + 1), k * p.n_th2, p.gamma / 2,
        ], dtype=complex)

    def _matrix(self, data: np.ndarray) -> sp.csc_matrix:
        size = self.space.dim**2
        return sp.csc_matrix((data, self._indices, self._indptr), shape=(size, size))

    def liouvillian(self, p: EffectiveParams) -> Liouvillian:
        return Liouvillian(self.space, sp.csr_matrix(self._matrix(self.coefficients(p) @ self._terms)))

    def solve_vector(self, p: EffectiveParams) -> np.ndarray:
        eps = drive_scale(p.omega_drive, p.kappa, (p.n_th1, p.n_th2))
        data = (self.coefficients(p) @ self._terms) * self._keep * eps**self._shift
        # replaced row has label 0, so its scaled entries are s_col
        data += self._trace * eps**self._col_labels
        y = _solve_replaced(self._matrix(data), self.row, self.method)
        return y * eps**self._labels

    def solve(self, p: EffectiveParams) -> DensityMatrix:
        rho = unvec(self.solve_vector(p), self.space.dim)
        return DensityMatrix(self.space, (rho + rho.conj().T) / 2)

    def g2(self, p: EffectiveParams) -> float:
        return g2_from_vector(self.solve_vector(p), self._w_number, self._w_pair)


def g2_from_vector(v: np.ndarray, w_number: np.ndarray, w_pair: np.ndarray) -> float:
    n = float(np.real(w_number @ v))
    if n <= OCCUPATION_FLOOR:
        raise UnoccupiedModeError(f"mode occupation {n:.3e} below floor {OCCUPATION_FLOOR:g}")
    return float(np.real(w_pair @ v)) / n**2


def solve_effective(p: EffectiveParams, n: int = 4, method: str = "auto") -> DensityMatrix:
    """Steady state of the effective model with both magnons truncated at ``n`` levels."""
    space = effective_space(n)
    scale = drive_scale(p.omega_drive, p.kappa, (p.n_th1, p.n_th2))
    return steady_state(effective_liouvillian(p, space), scale=scale, method=method)


def g2_numeric(p: EffectiveParams, n: int = 4) -> float:
    return g2_zero(solve_effective(p, n), 1)
