"""Truncated Fock/qubit operator algebra and the model Hamiltonians.

All frequencies and rates are in units of the magnon decay rate kappa.
Basis ordering is qubit first (index 0 = ground), then magnon 1, magnon 2,
then (full model only) cavity 1, cavity 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InvalidDimensionError, InvalidParameterError, SpaceMismatchError

# Operators on spaces smaller than this are held as dense arrays.
DENSE_LIMIT = 256

Matrix = Union[np.ndarray, sp.csr_matrix]


@dataclass(frozen=True)
class HilbertSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise InvalidDimensionError("a Hilbert space needs at least one subsystem")
        for d in dims:
            if d < 2:
                raise InvalidDimensionError(f"subsystem dimension {d} < 2")
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def excitations(self) -> np.ndarray:
        """Total excitation number (sum of local level indices) of each basis state."""
        labels = np.zeros(1, dtype=int)
        for d in self.dims:
            labels = (labels[:, None] + np.arange(d)[None, :]).ravel()
        return labels

    def index(self, *levels: int) -> int:
        """Flat basis index of the product state with the given local levels."""
        if len(levels) != len(self.dims):
            raise InvalidDimensionError(f"expected {len(self.dims)} levels, got {len(levels)}")
        return int(np.ravel_multi_index(tuple(levels), self.dims))


def _store(m, dim: int) -> Matrix:
    if dim < DENSE_LIMIT:
        return m.toarray() if sp.issparse(m) else np.asarray(m)
    return sp.csr_matrix(m)


@dataclass(frozen=True, eq=False)
class Operator:
    """A complex matrix tagged with the space it acts on."""

    space: HilbertSpace
    matrix: Matrix = field(repr=False)

    def __post_init__(self):
        m = self.matrix
        if sp.issparse(m):
            m = m.astype(complex)
        else:
            m = np.asarray(m, dtype=complex)
        n = self.space.dim
        if m.shape != (n, n):
            raise InvalidDimensionError(f"matrix shape {m.shape} does not match space dimension {n}")
        object.__setattr__(self, "matrix", _store(m, n))

    def _check(self, other: "Operator"):
        if not isinstance(other, Operator):
            return NotImplemented
        if other.space != self.space:
            raise SpaceMismatchError(f"operators act on different spaces {self.space.dims} and {other.space.dims}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return self @ scalar
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix @ other.matrix)

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.array(self.matrix)

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.matrix)

    def element(self, row: int, col: int) -> complex:
        return complex(self.matrix[row, col])

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        a = self.toarray()
        return bool(np.max(np.abs(a - a.conj().T), initial=0.0) < tol)


def identity(dim: int) -> Operator:
    return Operator(HilbertSpace((dim,)), sp.identity(dim, dtype=complex, format="csr"))


def annihilation(dim: int) -> Operator:
    """Truncated bosonic lowering operator, ``a[n-1, n] = sqrt(n)``."""
    if dim < 2:
        raise InvalidDimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return Operator(HilbertSpace((dim,)), np.diag(np.sqrt(np.arange(1, dim)), 1))


def qubit_lower() -> Operator:
    """sigma = |g><e| with g at index 0."""
    return Operator(HilbertSpace((2,)), np.array([[0.0, 1.0], [0.0, 0.0]]))


def embed(local_op: Operator, space: HilbertSpace, position: int) -> Operator:
    """Kronecker-embed a single-subsystem operator at ``position`` of ``space``."""
    if not 0 <= position < len(space.dims):
        raise InvalidDimensionError(f"position {position} outside space {space.dims}")
    if local_op.space.dim != space.dims[position]:
        raise SpaceMismatchError(
            f"local operator of dimension {local_op.space.dim} cannot sit on subsystem of dimension {space.dims[position]}"
        )
    factors = [
        local_op.tocsr() if i == position else sp.identity(d, dtype=complex, format="csr")
        for i, d in enumerate(space.dims)
    ]
    return Operator(space, reduce(lambda x, y: sp.kron(x, y, format="csr"), factors))


def _zero(space: HilbertSpace) -> Operator:
    return Operator(space, sp.csr_matrix((space.dim, space.dim), dtype=complex))


@dataclass(frozen=True)
class EffectiveParams:
    """Scalars of the cavity-eliminated qubit + two-magnon model (kappa units)."""

    delta1: float = 0.0
    delta2: float = 0.0
    delta_q: float = 0.0
    g1: float = 0.8
    g2: float = 0.0
    omega_drive: float = 1e-3
    kappa: float = 1.0
    gamma: float = 1.11
    n_th1: float = 0.0
    n_th2: float = 0.0

    def __post_init__(self):
        for name in ("delta1", "delta2", "delta_q", "g1", "g2", "omega_drive", "kappa", "gamma", "n_th1", "n_th2"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value}")
        if self.kappa <= 0:
            raise InvalidParameterError(f"kappa must be > 0, got {self.kappa}")
        if self.gamma <= 0:
            raise InvalidParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.n_th1 < 0 or self.n_th2 < 0:
            raise InvalidParameterError("thermal occupations must be >= 0")

    def replace(self, **changes) -> "EffectiveParams":
        return replace(self, **changes)

    def scaled(self, factor: float) -> "EffectiveParams":
        """All rates, couplings, detunings and the drive multiplied by ``factor``."""
        return replace(
            self,
            delta1=self.delta1 * factor,
            delta2=self.delta2 * factor,
            delta_q=self.delta_q * factor,
            g1=self.g1 * factor,
            g2=self.g2 * factor,
            omega_drive=self.omega_drive * factor,
            kappa=self.kappa * factor,
            gamma=self.gamma * factor,
        )


@dataclass(frozen=True)
class FullModelParams:
    """Five-mode model with explicit cavities (kappa units)."""

    delta_c1: float
    delta_c2: float
    delta1_bare: float = 0.0
    delta2_bare: float = 0.0
    delta_q_bare: float = 0.0
    g_m1: float = 0.0
    g_m2: float = 0.0
    g_q1: float = 0.0
    g_q2: float = 0.0
    omega_drive: float = 1e-3


def effective_space(n1: int = 4, n2: int | None = None) -> HilbertSpace:
    return HilbertSpace((2, n1, n1 if n2 is None else n2))


def full_space(n1: int = 4, n2: int | None = None, nc: int = 2) -> HilbertSpace:
    return HilbertSpace((2, n1, n1 if n2 is None else n2, nc, nc))


def _check_effective_space(space: HilbertSpace) -> None:
    if len(space.dims) != 3 or space.dims[0] != 2:
        raise InvalidDimensionError(f"effective model needs a [2, N1, N2] space, got {list(space.dims)}")
    if space.dims[1] < 3 or space.dims[2] < 3:
        raise InvalidDimensionError("magnon truncations must be >= 3 to hold two-magnon states")


def model_operators(space: HilbertSpace) -> dict[str, Operator]:
    """Ladder operators of every subsystem: sigma, m1, m2 (and a1, a2 for 5-mode spaces)."""
    names = ["sigma", "m1", "m2", "a1", "a2"][: len(space.dims)]
    if space.dims[0] != 2:
        raise InvalidDimensionError("subsystem 0 must be the qubit (dimension 2)")
    ops = {"sigma": embed(qubit_lower(), space, 0)}
    for pos, name in enumerate(names[1:], start=1):
        ops[name] = embed(annihilation(space.dims[pos]), space, pos)
    return ops


def effective_terms(space: HilbertSpace) -> dict[str, Operator]:
    """Hermitian building blocks of the effective Hamiltonian, one per scalar parameter."""
    _check_effective_space(space)
    o = model_operators(space)
    s, m1, m2 = o["sigma"], o["m1"], o["m2"]
    return {
        "delta_q": s.dag() @ s,
        "delta1": m1.dag() @ m1,
        "delta2": m2.dag() @ m2,
        "g1": s.dag() @ m1 + s @ m1.dag(),
        "g2": s.dag() @ m2 + s @ m2.dag(),
        "omega_drive": m1.dag() + m1,
    }


def build_effective_hamiltonian(p: EffectiveParams, space: HilbertSpace) -> Operator:
    terms = effective_terms(space)
    return reduce(lambda acc, name: acc + getattr(p, name) * terms[name], terms, _zero(space))


def build_effective_nonhermitian(p: EffectiveParams, space: HilbertSpace) -> Operator:
    terms = effective_terms(space)
    h = build_effective_hamiltonian(p, space)
    damping = (p.kappa / 2) * (terms["delta1"] + terms["delta2"]) + (p.gamma / 2) * terms["delta_q"]
    return h - 1j * damping


def build_full_hamiltonian(p: FullModelParams, space: HilbertSpace) -> Operator:
    if len(space.dims) != 5:
        raise InvalidDimensionError(f"full model needs [2, N1, N2, Nc1, Nc2], got {list(space.dims)}")
    o = model_operators(space)
    s = o["sigma"]
    h = p.delta_q_bare * (s.dag() @ s) + p.omega_drive * (o["m1"].dag() + o["m1"])
    for j, (dc, db, gm, gq) in enumerate(
        [(p.delta_c1, p.delta1_bare, p.g_m1, p.g_q1), (p.delta_c2, p.delta2_bare, p.g_m2, p.g_q2)], start=1
    ):
        a, m = o[f"a{j}"], o[f"m{j}"]
        h = (
            h
            + dc * (a.dag() @ a)
            + db * (m.dag() @ m)
            + gm * (m.dag() @ a + m @ a.dag())
            + gq * (s.dag() @ a + s @ a.dag())
        )
    return h


def reduce_full_params(
    p: FullModelParams,
    kappa: float = 1.0,
    gamma: float = 1.11,
    n_th1: float = 0.0,
    n_th2: float = 0.0,
) -> EffectiveParams:
    """Adiabatically eliminate both cavities (second order in g/delta_c)."""
    if p.delta_c1 == 0 or p.delta_c2 == 0:
        raise ZeroDivisionError("cavity detunings must be nonzero to eliminate the cavities")
    return EffectiveParams(
        delta1=p.delta1_bare - p.g_m1**2 / p.delta_c1,
        delta2=p.delta2_bare - p.g_m2**2 / p.delta_c2,
        delta_q=p.delta_q_bare - p.g_q1**2 / p.delta_c1 - p.g_q2**2 / p.delta_c2,
        g1=-p.g_m1 * p.g_q1 / p.delta_c1,
        g2=-p.g_m2 * p.g_q2 / p.delta_c2,
        omega_drive=p.omega_drive,
        kappa=kappa,
        gamma=gamma,
        n_th1=n_th1,
        n_th2=n_th2,
    )


def full_params_for(
    target: EffectiveParams,
    delta_c: float,
    qubit_coupling: Sequence[float] | None = None,
) -> FullModelParams:
    """Inverse of :func:`reduce_full_params` for equal cavity detunings.

    By default magnon-cavity and qubit-cavity couplings are taken equal,
    ``g_m = g_q = sqrt(|g| delta_c)``; the sign of ``g`` is absorbed by
    flipping ``g_m``.
    """
    couplings = []
    for j, g in enumerate((target.g1, target.g2)):
        if qubit_coupling is None:
            gq = math.sqrt(abs(g) * abs(delta_c))
        else:
            gq = float(qubit_coupling[j])
        gm = 0.0 if gq == 0 else -g * delta_c / gq
        couplings.append((gm, gq))
    (gm1, gq1), (gm2, gq2) = couplings
    return FullModelParams(
        delta_c1=delta_c,
        delta_c2=delta_c,
        delta1_bare=target.delta1 + gm1**2 / delta_c,
        delta2_bare=target.delta2 + gm2**2 / delta_c,
        delta_q_bare=target.delta_q + (gq1**2 + gq2**2) / delta_c,
        g_m1=gm1,
        g_m2=gm2,
        g_q1=gq1,
        g_q2=gq2,
        omega_drive=target.omega_drive,
    )
