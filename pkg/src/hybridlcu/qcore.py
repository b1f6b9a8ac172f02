"""Dense complex linear algebra for small Hilbert spaces.

Everything downstream (decompositions, channels, the application drivers)
works with plain ``numpy`` arrays; this module owns validation, the shared
tolerance constants, spectral matrix functions, and the text serialization
format for matrices.

Matrix functions are always computed through the spectral decomposition,
never by series truncation: at the dimensions we care about (at most 2**10
for vectors, 2**7 for density matrices) exactness wins over scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TOL",
    "Tolerances",
    "MAX_PURE_DIM",
    "MAX_MIXED_DIM",
    "as_matrix",
    "is_hermitian",
    "is_unitary",
    "require_hermitian",
    "eigh",
    "expm_i_hermitian",
    "kron",
    "trace",
    "partial_trace",
    "PureState",
    "MixedState",
    "Observable",
    "density",
    "matrix_to_text",
    "matrix_from_text",
]


@dataclass(frozen=True)
class Tolerances:
    """Central record of every numerical tolerance used by the package."""

    unitarity: float = 1e-10
    hermiticity: float = 1e-10
    prob_norm: float = 1e-12
    cross_backend: float = 1e-9
    psd: float = 1e-10


TOL = Tolerances()

# Dimension caps enforced at construction; the largest experiment in the
# suite is the 7-qubit code (dimension 128).
MAX_PURE_DIM = 2**10
MAX_MIXED_DIM = 2**7


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a square complex matrix and validate finiteness."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix contains non-finite entries")
    return m


def is_hermitian(m: np.ndarray, tol: float = TOL.hermiticity) -> bool:
    m = np.asarray(m)
    return bool(np.linalg.norm(m - m.conj().T) <= tol)


def is_unitary(m: np.ndarray, tol: float = TOL.unitarity) -> bool:
    m = np.asarray(m)
    if m.shape[0] != m.shape[1]:
        return False
    eye = np.eye(m.shape[0])
    return bool(np.linalg.norm(m.conj().T @ m - eye) <= tol)


def require_hermitian(m: np.ndarray, tol: float = TOL.hermiticity, what: str = "matrix") -> np.ndarray:
    m = as_matrix(m)
    viol = float(np.linalg.norm(m - m.conj().T))
    if viol > tol:
        raise ValueError(f"{what} is not Hermitian: symmetry violation {viol:.3e} > {tol:.1e}")
    return m


def eigh(h) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(w, v)`` with eigenvalues ``w`` ascending and eigenvector
    columns ``v`` so that ``h = v @ diag(w) @ v.conj().T``.
    """
    h = require_hermitian(h)
    w, v = np.linalg.eigh(h)
    return w, v


def expm_i_hermitian(h, t: float) -> np.ndarray:
    """Unitary ``exp(-i*h*t)`` for Hermitian ``h``, via the spectrum."""
    w, v = eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def kron(*ops) -> np.ndarray:
    """Kronecker product of one or more operators, left to right."""
    if not ops:
        raise ValueError("kron needs at least one factor")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def trace(m) -> complex:
    return complex(np.trace(np.asarray(m)))


def partial_trace(m, dims, axis: int) -> np.ndarray:
    """Trace out subsystem ``axis`` from an operator on a tensor product.

    ``dims`` lists the subsystem dimensions in tensor order; ``m`` must be a
    square matrix of size ``prod(dims)``. The total trace is preserved.
    """
    dims = [int(d) for d in dims]
    m = as_matrix(m)
    n = math.prod(dims)
    if m.shape != (n, n):
        raise ValueError(f"operator shape {m.shape} does not match dims {dims}")
    if not 0 <= axis < len(dims):
        raise ValueError(f"axis {axis} out of range for {len(dims)} subsystems")
    resh = m.reshape(dims + dims)
    out = np.trace(resh, axis1=axis, axis2=axis + len(dims))
    keep = math.prod(d for i, d in enumerate(dims) if i != axis)
    return out.reshape(keep, keep)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class PureState:
    """A state vector; normalized unless explicitly flagged otherwise."""

    def __init__(self, amplitudes, normalized: bool = True):
        vec = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if vec.size > MAX_PURE_DIM:
            raise ValueError(f"dimension {vec.size} exceeds pure-state cap {MAX_PURE_DIM}")
        if not np.all(np.isfinite(vec.real)) or not np.all(np.isfinite(vec.imag)):
            raise ValueError("amplitudes contain non-finite entries")
        nrm2 = float(np.vdot(vec, vec).real)
        if normalized and abs(nrm2 - 1.0) > TOL.prob_norm:
            raise ValueError(f"squared norm {nrm2} deviates from 1 beyond {TOL.prob_norm:.1e}")
        self.vector = _freeze(vec)
        self.dimension = vec.size
        self.normalized = normalized

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.vector, self.vector.conj())


class MixedState:
    """A density matrix: Hermitian, unit trace (when normalized), PSD."""

    def __init__(self, matrix, normalized: bool = True):
        rho = require_hermitian(matrix, what="density matrix")
        if rho.shape[0] > MAX_MIXED_DIM:
            raise ValueError(f"dimension {rho.shape[0]} exceeds mixed-state cap {MAX_MIXED_DIM}")
        tr = float(np.trace(rho).real)
        if normalized and abs(tr - 1.0) > TOL.hermiticity:
            raise ValueError(f"trace {tr} deviates from 1 beyond {TOL.hermiticity:.1e}")
        wmin = float(np.linalg.eigvalsh(rho).min())
        if wmin < -TOL.psd:
            raise ValueError(f"density matrix has negative eigenvalue {wmin:.3e}")
        self.matrix = _freeze(rho)
        self.dimension = rho.shape[0]
        self.normalized = normalized


class Observable:
    """A Hermitian observable with a cached spectral decomposition."""

    def __init__(self, matrix):
        mat = require_hermitian(matrix, what="observable")
        w, v = np.linalg.eigh(mat)
        self.matrix = _freeze(mat)
        self.dimension = mat.shape[0]
        self.eigenvalues = _freeze(w)
        self.eigenvectors = _freeze(v)
        self.spectral_norm = float(np.abs(w).max()) if w.size else 0.0
        resid = float(np.linalg.norm((v * w) @ v.conj().T - mat))
        if resid > TOL.cross_backend:
            raise ValueError(f"spectral reconstruction residual {resid:.3e}")

    @classmethod
    def identity(cls, dim: int) -> "Observable":
        return cls(np.eye(dim))


def density(state) -> np.ndarray:
    """Coerce a state (PureState, MixedState, vector or matrix) to a density matrix."""
    if isinstance(state, PureState):
        return state.density_matrix()
    if isinstance(state, MixedState):
        return np.asarray(state.matrix)
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1:
        return np.outer(arr, arr.conj())
    return as_matrix(arr)


## --- text serialization -------------------------------------------------
## Format: header "dim <rows> <cols>", then one "re im" pair per entry,
## row-major, 17 significant digits.


def matrix_to_text(m) -> str:
    m = as_matrix(np.atleast_2d(m))
    lines = [f"dim {m.shape[0]} {m.shape[1]}"]
    for entry in m.reshape(-1):
        lines.append(f"{entry.real:.17g} {entry.imag:.17g}")
    return "\n".join(lines) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("dim "):
        raise ValueError("matrix text must start with a 'dim <rows> <cols>' header")
    parts = lines[0].split()
    if len(parts) != 3:
        raise ValueError(f"malformed header {lines[0]!r}")
    rows, cols = int(parts[1]), int(parts[2])
    if len(lines) - 1 != rows * cols:
        raise ValueError(f"expected {rows * cols} entries, found {len(lines) - 1}")
    data = np.empty(rows * cols, dtype=complex)
    for i, ln in enumerate(lines[1:]):
        re_s, im_s = ln.split()
        data[i] = complex(float(re_s), float(im_s))
    return data.reshape(rows, cols)
