"""Dense operator algebra over composite Hilbert spaces with truncated bosonic factors.

All operators and states are plain dense complex matrices/vectors tagged
with a :class:`HilbertSpace` describing the ordered tensor factors.  At the
dimensions this package works with (a few hundred), dense BLAS-backed
arithmetic is both simpler and faster than sparse bookkeeping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

__all__ = [
    "HilbertSpace",
    "QOperator",
    "DensityMatrix",
    "PureState",
    "annihilation",
    "number_op",
    "displacement",
    "beamsplitter",
    "embed",
    "partial_trace",
    "fidelity",
    "tensor_state",
    "basis_state",
    "coherent_state",
    "qubit_state",
    "default_fock_dim",
]

HERMITIAN_TOL = 1e-12
DM_HERMITIAN_TOL = 1e-10
DM_TRACE_TOL = 1e-8
DM_EIG_TOL = 1e-8
NORM_TOL = 1e-10


class DimensionError(ValueError):
    """Operator/state dimensions are inconsistent or invalid."""


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of labeled factors, e.g. ``(("q", 2), ("c", 20))``."""

    factors: tuple[tuple[str, int], ...]

    def __init__(self, factors: Iterable[tuple[str, int]]):
        factors = tuple((str(lbl), int(d)) for lbl, d in factors)
        labels = [lbl for lbl, _ in factors]
        if len(set(labels)) != len(labels):
            raise DimensionError(f"duplicate factor labels in {labels}")
        for lbl, d in factors:
            if d < 1:
                raise DimensionError(f"factor {lbl!r} has non-positive dim {d}")
        object.__setattr__(self, "factors", factors)

    @property
    def dim(self) -> int:
        return math.prod(d for _, d in self.factors)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    def axis(self, label: str) -> int:
        for i, (lbl, _) in enumerate(self.factors):
            if lbl == label:
                return i
        raise KeyError(f"no factor labeled {label!r} in {self.labels}")

    def dim_of(self, label: str) -> int:
        return self.factors[self.axis(label)][1]


def _as_square(matrix: np.ndarray, dim: int | None = None) -> np.ndarray:
    m = np.ascontiguousarray(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise DimensionError(f"matrix dim {m.shape[0]} != space dim {dim}")
    return m


@dataclass(frozen=True)
class QOperator:
    """Dense operator on a :class:`HilbertSpace`."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_square(self.matrix, self.space.dim))
        self.matrix.setflags(write=False)

    @classmethod
    def single(cls, matrix: np.ndarray, label: str = "mode") -> "QOperator":
        m = _as_square(matrix)
        return cls(HilbertSpace([(label, m.shape[0])]), m)

    @property
    def dim(self) -> int:
        return self.space.dim

    def dagger(self) -> "QOperator":
        return QOperator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) < tol)

    def expect(self, state: "DensityMatrix | PureState") -> complex:
        if isinstance(state, PureState):
            return complex(state.vector.conj() @ (self.matrix @ state.vector))
        return complex(np.trace(self.matrix @ state.matrix))

    def _check_same_space(self, other: "QOperator"):
        if self.space != other.space:
            raise DimensionError("operators act on different spaces")

    def __matmul__(self, other: "QOperator") -> "QOperator":
        self._check_same_space(other)
        return QOperator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "QOperator") -> "QOperator":
        self._check_same_space(other)
        return QOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "QOperator") -> "QOperator":
        self._check_same_space(other)
        return QOperator(self.space, self.matrix - other.matrix)

    def __mul__(self, scalar: complex) -> "QOperator":
        return QOperator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "QOperator":
        return QOperator(self.space, -self.matrix)


@dataclass(frozen=True)
class PureState:
    """Normalized state vector on a :class:`HilbertSpace`."""

    space: HilbertSpace
    vector: np.ndarray
    _validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vector, dtype=np.complex128).reshape(-1)
        if v.shape[0] != self.space.dim:
            raise DimensionError(f"vector dim {v.shape[0]} != space dim {self.space.dim}")
        if self._validate:
            nrm = np.linalg.norm(v)
            if abs(nrm - 1.0) > NORM_TOL:
                raise ValueError(f"state norm {nrm} deviates from 1 beyond {NORM_TOL}")
        object.__setattr__(self, "vector", v)
        v.setflags(write=False)

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.vector, self.vector.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Density operator: Hermitian, unit trace, positive within tolerance."""

    space: HilbertSpace
    matrix: np.ndarray
    _validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = _as_square(self.matrix, self.space.dim)
        if self._validate:
            herm = np.max(np.abs(m - m.conj().T))
            if herm > DM_HERMITIAN_TOL:
                raise ValueError(f"density matrix not Hermitian (residual {herm:.3e})")
            tr = np.trace(m).real
            if abs(tr - 1.0) > DM_TRACE_TOL:
                raise ValueError(f"density matrix trace {tr} deviates from 1")
            w = np.linalg.eigvalsh((m + m.conj().T) / 2)
            if w.min() < -DM_EIG_TOL:
                raise ValueError(f"density matrix has negative eigenvalue {w.min():.3e}")
        object.__setattr__(self, "matrix", m)
        m.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


# ---------------------------------------------------------------------------
# elementary operators


def annihilation(dim: int, label: str = "mode") -> QOperator:
    """Bosonic lowering operator truncated to ``dim`` Fock levels.

    Entry (n-1, n) equals sqrt(n); all other entries vanish.
    """
    if dim < 2:
        raise DimensionError(f"annihilation needs dim >= 2, got {dim}")
    m = np.zeros((dim, dim), dtype=np.complex128)
    n = np.arange(1, dim)
    m[n - 1, n] = np.sqrt(n)
    return QOperator.single(m, label)


def number_op(dim: int, label: str = "mode") -> QOperator:
    return QOperator.single(np.diag(np.arange(dim).astype(np.complex128)), label)


def default_fock_dim(alpha: complex = 0.0, beta: complex = 0.0) -> int:
    """Default bosonic truncation for a conditionally displaced coherent state.

    Leaves several standard deviations of headroom above the largest
    amplitude the mode can reach (|beta| + 2|alpha|).  Deliberately
    conservative; callers may override.
    """
    return math.ceil((abs(beta) + 2 * abs(alpha) + 3) ** 2)


def displacement(alpha: complex, dim: int, label: str = "mode") -> QOperator:
    """Displacement operator exp(alpha a^dag - alpha* a) in a truncated Fock space."""
    if dim < 2:
        raise DimensionError(f"displacement needs dim >= 2, got {dim}")
    if abs(alpha) ** 2 + 4 * abs(alpha) >= dim:
        warnings.warn(
            f"displacement({alpha}) may be under-truncated at dim={dim}",
            RuntimeWarning,
            stacklevel=2,
        )
    a = annihilation(dim).matrix
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return QOperator.single(expm(gen), label)


def beamsplitter(phi: float, dim_a: int, dim_b: int,
                 labels: tuple[str, str] = ("a", "b")) -> QOperator:
    """Two-mode beamsplitter exp[phi (a b^dag - a^dag b)].

    Convention fixed by the generator above: a single photon in the first
    mode maps as |1,0> -> cos(phi)|1,0> + sin(phi)|0,1>, so the population
    transmitted in mode ``a`` is cos^2(phi).
    """
    if dim_a < 2 or dim_b < 2:
        raise DimensionError("beamsplitter needs both dims >= 2")
    space = HilbertSpace([(labels[0], dim_a), (labels[1], dim_b)])
    a = embed(annihilation(dim_a), space, labels[0]).matrix
    b = embed(annihilation(dim_b), space, labels[1]).matrix
    gen = phi * (a @ b.conj().T - a.conj().T @ b)
    return QOperator(space, expm(gen))


# ---------------------------------------------------------------------------
# composite-space plumbing


def embed(op: QOperator, space: HilbertSpace, label: str) -> QOperator:
    """Kronecker-embed a single-factor operator into ``space`` at ``label``."""
    axis = space.axis(label)
    if op.dim != space.dims[axis]:
        raise DimensionError(
            f"operator dim {op.dim} != dim {space.dims[axis]} of factor {label!r}")
    m = np.array([[1.0 + 0j]])
    for i, (_, d) in enumerate(space.factors):
        m = np.kron(m, op.matrix if i == axis else np.eye(d, dtype=np.complex128))
    return QOperator(space, m)


def partial_trace(rho: DensityMatrix, keep: Sequence[str]) -> DensityMatrix:
    """Trace out all factors not listed in ``keep`` (kept in original order)."""
    keep = list(keep)
    if not keep:
        raise DimensionError("partial_trace needs a nonempty set of kept factors")
    labels = rho.space.labels
    for lbl in keep:
        if lbl not in labels:
            raise KeyError(f"unknown factor {lbl!r}")
    keep_axes = sorted(rho.space.axis(lbl) for lbl in keep)
    dims = rho.space.dims
    n = len(dims)
    t = rho.matrix.reshape(dims * 2)
    in_row = list(range(n))
    in_col = [i + n if i in keep_axes else i for i in range(n)]
    out = [i for i in keep_axes] + [i + n for i in keep_axes]
    t = np.einsum(t, in_row + in_col, out)
    d_kept = math.prod(dims[i] for i in keep_axes)
    new_space = HilbertSpace([rho.space.factors[i] for i in keep_axes])
    return DensityMatrix(new_space, t.reshape(d_kept, d_kept), _validate=False)


def fidelity(rho: DensityMatrix, psi: PureState) -> float:
    """State fidelity <psi|rho|psi>, clipped to [0, 1]."""
    if rho.space != psi.space:
        raise DimensionError("fidelity: state and density matrix spaces differ")
    val = psi.vector.conj() @ (rho.matrix @ psi.vector)
    if abs(val.imag) > 1e-12:
        warnings.warn(f"fidelity has imaginary residue {val.imag:.3e}", RuntimeWarning)
    return float(min(1.0, max(0.0, val.real)))


# ---------------------------------------------------------------------------
# state constructors


def basis_state(space: HilbertSpace, occupations: dict[str, int]) -> PureState:
    """Product basis state |n_1, n_2, ...> given per-label occupation numbers."""
    vecs = []
    for lbl, d in space.factors:
        n = occupations.get(lbl, 0)
        if not 0 <= n < d:
            raise DimensionError(f"occupation {n} out of range for factor {lbl!r} (dim {d})")
        v = np.zeros(d, dtype=np.complex128)
        v[n] = 1.0
        vecs.append(v)
    out = vecs[0]
    for v in vecs[1:]:
        out = np.kron(out, v)
    return PureState(space, out)


def coherent_state(alpha: complex, dim: int, label: str = "mode") -> PureState:
    """Coherent state from the analytic Fock amplitudes, renormalized in truncation."""
    n = np.arange(dim)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, dim)))))
    if alpha == 0:
        amps = np.zeros(dim, dtype=np.complex128)
        amps[0] = 1.0
    else:
        log_mag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - log_fact / 2
        amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    amps = amps / np.linalg.norm(amps)
    return PureState(HilbertSpace([(label, dim)]), amps)


def qubit_state(kind: str, dim: int = 2, label: str = "q") -> PureState:
    """Qubit state |0>, |1>, |+> or |-> embedded in the first two levels of ``dim``."""
    v = np.zeros(dim, dtype=np.complex128)
    if kind == "0":
        v[0] = 1.0
    elif kind == "1":
        v[1] = 1.0
    elif kind in ("+", "plus"):
        v[0] = v[1] = 1 / math.sqrt(2)
    elif kind in ("-", "minus"):
        v[0], v[1] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    else:
        raise ValueError(f"unknown qubit state {kind!r}")
    return PureState(HilbertSpace([(label, dim)]), v)


def tensor_state(*states: PureState) -> PureState:
    """Tensor product of pure states, concatenating their factor lists."""
    factors = []
    vec = np.array([1.0 + 0j])
    for s in states:
        factors.extend(s.space.factors)
        vec = np.kron(vec, s.vector)
    return PureState(HilbertSpace(factors), vec)
