"""
Dense complex tensors with named legs.

Multi-indices are row-major over the leg ordering (leftmost leg varies
slowest), so ``matricize(t, t.legs[:2], t.legs[2:])`` reproduces a 4x4
matrix display of a 4-leg tensor verbatim.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeError, SolverError


@dataclass(frozen=True)
class Tensor:
    """Immutable dense complex array whose axes carry unique string labels."""

    data: np.ndarray
    legs: tuple

    def __post_init__(self):
        data = np.array(self.data, dtype=np.complex128)
        legs = tuple(str(leg) for leg in self.legs)
        if data.ndim != len(legs):
            raise ShapeError(f"{len(legs)} legs given for an array of rank {data.ndim}")
        if len(set(legs)) != len(legs):
            raise ShapeError(f"duplicate leg labels in {legs}")
        if any(d < 1 for d in data.shape):
            raise ShapeError(f"leg dimensions must be >= 1, got {data.shape}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "legs", legs)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def dim(self, leg: str) -> int:
        return self.data.shape[self.axis(leg)]

    def axis(self, leg: str) -> int:
        try:
            return self.legs.index(leg)
        except ValueError:
            raise ShapeError(f"no leg {leg!r} in {self.legs}") from None

    def conj(self) -> "Tensor":
        return Tensor(self.data.conj(), self.legs)

    def relabel(self, mapping: dict) -> "Tensor":
        return Tensor(self.data, tuple(mapping.get(leg, leg) for leg in self.legs))

    def __mul__(self, scalar) -> "Tensor":
        return Tensor(self.data * scalar, self.legs)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Tensor":
        return Tensor(self.data / scalar, self.legs)

    def __add__(self, other: "Tensor") -> "Tensor":
        other = permute(other, self.legs)
        return Tensor(self.data + other.data, self.legs)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return self + (-1.0) * other


@dataclass(frozen=True)
class MatrixView:
    """A tensor flattened into a matrix by grouping legs into rows and columns."""

    data: np.ndarray
    row_legs: tuple
    col_legs: tuple
    row_dims: tuple
    col_dims: tuple

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, matrix, row_legs=("r",), col_legs=("c",)) -> "MatrixView":
        """Wrap a plain 2-d array; handy for checks that never return to tensor form."""
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2:
            raise ShapeError("matrix must be 2-d")
        return cls(m, tuple(row_legs), tuple(col_legs), (m.shape[0],), (m.shape[1],))


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float


def permute(x: Tensor, legs: Sequence[str]) -> Tensor:
    legs = tuple(legs)
    if sorted(legs) != sorted(x.legs):
        raise ShapeError(f"{legs} is not a permutation of {x.legs}")
    return Tensor(np.transpose(x.data, [x.axis(leg) for leg in legs]), legs)


def contract(x: Tensor, y: Tensor, pairs: Iterable) -> Tensor:
    """Sum over the paired legs of ``x`` and ``y``.

    Output legs are the unpaired legs of ``x`` followed by those of ``y``,
    each in original order. Pairing is explicit; shared labels on unpaired
    legs are an error rather than an implicit contraction.
    """
    pairs = [tuple(p) for p in pairs]
    xs = [p[0] for p in pairs]
    ys = [p[1] for p in pairs]
    if len(set(xs)) != len(xs) or len(set(ys)) != len(ys):
        raise ShapeError(f"leg used twice in pairing {pairs}")
    for lx, ly in pairs:
        if x.dim(lx) != y.dim(ly):
            raise ShapeError(f"cannot pair {lx!r} (dim {x.dim(lx)}) with {ly!r} (dim {y.dim(ly)})")
    free_x = [leg for leg in x.legs if leg not in xs]
    free_y = [leg for leg in y.legs if leg not in ys]
    clash = set(free_x) & set(free_y)
    if clash:
        raise ShapeError(f"output leg labels collide: {sorted(clash)}")
    data = np.tensordot(x.data, y.data, axes=([x.axis(l) for l in xs], [y.axis(l) for l in ys]))
    return Tensor(data, tuple(free_x + free_y))


def trace(x: Tensor, pairs: Iterable) -> Tensor:
    """Contract pairs of legs belonging to the same tensor."""
    pairs = [tuple(p) for p in pairs]
    used = [leg for p in pairs for leg in p]
    if len(set(used)) != len(used):
        raise ShapeError(f"leg used twice in pairing {pairs}")
    out = x
    for a, b in pairs:
        if out.dim(a) != out.dim(b):
            raise ShapeError(f"cannot trace {a!r} with {b!r}: dimensions differ")
        data = np.trace(out.data, axis1=out.axis(a), axis2=out.axis(b))
        out = Tensor(data, tuple(leg for leg in out.legs if leg not in (a, b)))
    return out


def fuse(x: Tensor, legs: Sequence[str], label: str) -> Tensor:
    """Merge ``legs`` (row-major, first varies slowest) into one leg placed where the first was."""
    legs = list(legs)
    pos = x.axis(legs[0])
    rest = [leg for leg in x.legs if leg not in legs]
    before = [leg for leg in x.legs[:pos] if leg not in legs]
    after = [leg for leg in rest if leg not in before]
    order = before + legs + after
    t = permute(x, order)
    dims = [t.dim(leg) for leg in legs]
    shape = [t.dim(l) for l in before] + [int(np.prod(dims))] + [t.dim(l) for l in after]
    return Tensor(t.data.reshape(shape), tuple(before + [label] + after))


def matricize(x: Tensor, row_legs: Sequence[str], col_legs: Sequence[str]) -> MatrixView:
    row_legs, col_legs = tuple(row_legs), tuple(col_legs)
    if sorted(row_legs + col_legs) != sorted(x.legs) or set(row_legs) & set(col_legs):
        raise ShapeError(f"{row_legs} | {col_legs} does not partition {x.legs}")
    t = permute(x, row_legs + col_legs)
    row_dims = tuple(x.dim(l) for l in row_legs)
    col_dims = tuple(x.dim(l) for l in col_legs)
    m = t.data.reshape(int(np.prod(row_dims)), int(np.prod(col_dims)))
    return MatrixView(m, row_legs, col_legs, row_dims, col_dims)


def dematricize(m: MatrixView, legs: Sequence[str] | None = None) -> Tensor:
    """Inverse of :func:`matricize`; ``legs`` optionally restores a leg order."""
    t = Tensor(m.data.reshape(m.row_dims + m.col_dims), m.row_legs + m.col_legs)
    return t if legs is None else permute(t, legs)


def _require_square(m) -> np.ndarray:
    a = m.data if isinstance(m, MatrixView) else np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"square matrix required, got shape {a.shape}")
    return a


def spectral_order(values: np.ndarray, decimals: int = 12) -> np.ndarray:
    """Indices sorting by descending magnitude, ties broken by ascending phase.

    Magnitudes are rounded before comparison so that conjugate pairs and
    numerically degenerate eigenvalues get a reproducible order.
    """
    mags = np.round(np.abs(values), decimals)
    phases = np.round(np.angle(values), decimals)
    return np.lexsort((phases, -mags))


def eigendecompose(m, tol: float = 1e-8) -> EigenDecomposition:
    """Eigenpairs of a square (generally non-normal) complex matrix.

    Args:
        m: MatrixView or 2-d array.
        tol: largest accepted residual ``|M v - lambda v|`` over all pairs.

    Returns:
        EigenDecomposition sorted by descending ``|lambda|``.

    Raises:
        SolverError: LAPACK failure or a residual above ``tol``.
    """
    a = _require_square(m)
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise SolverError(str(exc)) from exc
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise SolverError("eigensolver returned non-finite values")
    order = spectral_order(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    # LAPACK balancing can leave sparse, rank-deficient matrices with loose
    # eigenvectors; recover those from the null space of (M - lambda I)
    for j in np.flatnonzero(res > tol):
        _, _, vh = np.linalg.svd(a - vals[j] * np.eye(a.shape[0]))
        vecs[:, j] = vh[-1].conj()
        res[j] = np.linalg.norm(a @ vecs[:, j] - vals[j] * vecs[:, j])
    residual = float(np.max(res)) if len(vals) else 0.0
    if residual > tol:
        raise SolverError(f"eigenpair residual {residual:.3e} exceeds tolerance {tol:.1e}")
    return EigenDecomposition(vals, vecs, residual)


def unitarity_defect(m) -> float:
    """Largest entry of ``|M M^dagger - I|``."""
    a = _require_square(m)
    return float(np.max(np.abs(a @ a.conj().T - np.eye(a.shape[0]))))
