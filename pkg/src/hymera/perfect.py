"""Perfect-tensor checks and operator pushing."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation, SchemaError, ShapeError
from .tensor import Tensor, matricize


@dataclass(frozen=True)
class PerfectCheckResult:
    tensor_id: str
    defects: dict  # "legsA|legsB" -> proportional-isometry defect
    tol: float

    @property
    def is_perfect(self) -> bool:
        return all(d <= self.tol for d in self.defects.values())

    def as_dict(self) -> dict:
        return {"tensor": self.tensor_id, "tol": self.tol, "is_perfect": self.is_perfect, "defects": dict(self.defects)}


def proportional_isometry_defect(m: np.ndarray) -> float:
    """``max |M^dagger M / C - I|`` with ``C`` the mean diagonal of ``M^dagger M``.

    A zero matrix is as far from an isometry as it gets and reports ``inf``.
    """
    g = m.conj().T @ m
    c = np.trace(g).real / g.shape[0]
    if c <= 0:
        return float("inf")
    return float(np.max(np.abs(g / c - np.eye(g.shape[0]))))


def bipartitions(legs):
    """Every cut ``(A, A^c)`` with ``|A| <= |A^c|``; balanced cuts appear once."""
    legs = tuple(legs)
    n = len(legs)
    for size in range(1, n // 2 + 1):
        for a in itertools.combinations(legs, size):
            rest = tuple(x for x in legs if x not in a)
            if size * 2 == n and legs[0] not in a:
                continue
            yield a, rest


def perfect_check(t: Tensor, tol: float = 1e-10, tensor_id: str = "") -> PerfectCheckResult:
    """Test whether ``t`` is proportional to an isometry ``A -> A^c`` for every cut.

    Raises:
        ShapeError: odd number of legs.
    """
    if len(t.legs) % 2:
        raise ShapeError(f"perfect tensors have an even number of legs, got {len(t.legs)}")
    defects = {}
    for a, rest in bipartitions(t.legs):
        m = matricize(t, rest, a).data
        defects[",".join(a) + "|" + ",".join(rest)] = proportional_isometry_defect(m)
    return PerfectCheckResult(tensor_id, defects, tol)


def ame43() -> Tensor:
    """Absolutely maximally entangled state of four qutrits.

    ``T[i, j, k, l] = 1`` iff ``k = i + j`` and ``l = i + 2 j`` (mod 3).
    """
    data = np.zeros((3,) * 4)
    for i, j in itertools.product(range(3), repeat=2):
        data[i, j, (i + j) % 3, (i + 2 * j) % 3] = 1.0
    return Tensor(data, ("i", "j", "k", "l"))


def push_operator(op: np.ndarray, t: Tensor, in_legs, out_legs, tol: float = 1e-8) -> np.ndarray:
    """Push ``op`` acting on ``in_legs`` through ``t``: ``O' = M O M^dagger``.

    ``M`` is ``t`` read as a map from ``in_legs`` to ``out_legs``.

    Raises:
        ConstraintViolation: ``M`` is not an isometry within ``tol``.
        ShapeError: ``op`` does not match the dimension of ``in_legs``.
    """
    m = matricize(t, tuple(out_legs), tuple(in_legs)).data
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (m.shape[1], m.shape[1]):
        raise ShapeError(f"operator shape {op.shape} does not act on input dimension {m.shape[1]}")
    defect = float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))
    if defect > tol:
        raise ConstraintViolation(f"cannot push through a non-isometry (defect {defect:.3e})")
    return m @ op @ m.conj().T


# ---------------------------------------------------------------------------
# JSON I/O: {"legs": [...], "shape": [...], "real": [...], "imag": [...]} with row-major flat data


def tensor_to_dict(t: Tensor) -> dict:
    flat = t.data.reshape(-1)
    return {"legs": list(t.legs), "shape": list(t.shape), "real": flat.real.tolist(), "imag": flat.imag.tolist()}


def tensor_from_dict(d: dict) -> Tensor:
    try:
        shape = tuple(int(x) for x in d["shape"])
        re = np.asarray(d["real"], dtype=float)
        im = np.asarray(d.get("imag", np.zeros_like(re)), dtype=float)
        legs = tuple(d.get("legs") or (f"l{i}" for i in range(len(shape))))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed tensor description: {exc}") from exc
    if re.size != int(np.prod(shape)) or im.size != re.size:
        raise SchemaError(f"tensor data has {re.size} entries, shape {shape} needs {int(np.prod(shape))}")
    return Tensor((re + 1j * im).reshape(shape), legs)


def load_tensor(path) -> Tensor:
    with open(path) as fh:
        return tensor_from_dict(json.load(fh))


def save_tensor(t: Tensor, path) -> None:
    with open(path, "w") as fh:
        json.dump(tensor_to_dict(t), fh)
