"""
Parameterized 4-leg constituent tensors and their constraint classifier.

Every family is a 4x4 matrix over two dimension-2 legs on each side. The
matrix rows are the first two legs, so ``matricize(t, legs[:2], legs[2:])``
gives back the displayed form.

Angle convention: theta_1..theta_5 and theta_7 are angles; theta_6,
theta_8 and theta_9 are plain reals fed to arctan and cosh.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolation, MissingParameter, ShapeError
from .tensor import Tensor, matricize

FAMILY_PARAMS = {
    "Y": (1,),
    "R": (2,),
    "Q": (3, 4, 5),
    "T": (6, 7),
    "S": (8, 9),
}

FAMILY_LEGS = {
    "Y": ("a", "b", "c", "d"),
    "R": ("e", "f", "g", "h"),
    "Q": ("i", "j", "k", "l"),
    "T": ("e", "f", "g", "h"),
    "S": ("e", "f", "g", "h"),
}

TWO_PI = 2.0 * math.pi
DEFAULT_RANGES = {
    1: (0.0, TWO_PI),
    2: (0.0, TWO_PI),
    3: (0.0, TWO_PI),
    4: (0.0, TWO_PI),
    5: (0.0, TWO_PI),
    6: (-5.0, 5.0),
    7: (0.0, TWO_PI),
    8: (-5.0, 5.0),
    9: (-5.0, 5.0),
}


@dataclass(frozen=True)
class ParameterSet:
    """Free parameters keyed by their index 1..9."""

    theta: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for k, v in dict(self.theta).items():
            k = int(k)
            if not 1 <= k <= 9:
                raise ValueError(f"parameter index {k} outside 1..9")
            clean[k] = float(v)
        object.__setattr__(self, "theta", dict(sorted(clean.items())))

    def __getitem__(self, index: int) -> float:
        try:
            return self.theta[index]
        except KeyError:
            raise MissingParameter(f"theta_{index} is required") from None

    def require(self, family: str) -> tuple:
        return tuple(self[i] for i in FAMILY_PARAMS[family])

    def merged(self, other: "ParameterSet") -> "ParameterSet":
        return ParameterSet({**self.theta, **other.theta})

    def row(self) -> list:
        """theta_1..theta_9 with NaN for absent entries (CSV export order)."""
        return [self.theta.get(i, float("nan")) for i in range(1, 10)]

    @classmethod
    def sample(cls, rng: np.random.Generator, indices, ranges=None) -> "ParameterSet":
        """Draw each requested index uniformly from its range, in index order."""
        ranges = {**DEFAULT_RANGES, **(ranges or {})}
        theta = {}
        for i in sorted(indices):
            lo, hi = ranges[i]
            theta[i] = float(rng.uniform(lo, hi))
        return cls(theta)


def _tensor(family: str, matrix) -> Tensor:
    return Tensor(np.asarray(matrix, dtype=np.complex128).reshape(2, 2, 2, 2), FAMILY_LEGS[family])


def build_Y(p: ParameterSet) -> Tensor:
    (t,) = p.require("Y")
    c, s = math.cos(t), math.sin(t)
    return _tensor("Y", [
        [c, 0, 0, 1j * s],
        [0, s, 1j * c, 0],
        [0, 1j * c, s, 0],
        [1j * s, 0, 0, c],
    ])


def build_R(p: ParameterSet) -> Tensor:
    (t,) = p.require("R")
    c, s = math.cos(t), math.sin(t)
    return _tensor("R", [
        [c, 0, 0, 1j * s],
        [0, c, 1j * s, 0],
        [0, 1j * s, c, 0],
        [1j * s, 0, 0, c],
    ])


def build_Q(p: ParameterSet) -> Tensor:
    t3, t4, t5 = p.require("Q")
    ph = np.exp(1j * t4)
    return _tensor("Q", [
        [math.cos(t3), 0, 0, math.sin(t3) * ph],
        [0, math.cos(t5), 1j * math.sin(t5), 0],
        [0, 1j * math.sin(t5), math.cos(t5), 0],
        [math.sin(t3) * ph, 0, 0, -math.cos(t3) * ph**2],
    ])


def build_T(p: ParameterSet) -> Tensor:
    """Real antisymmetric T with ``T T^T = (arctan^2 theta_6 + cos^2 theta_7) I``.

    The tensor is returned unnormalized; at theta_6 = 0, theta_7 = pi/2 it
    vanishes and :func:`classify` flags it as unusable.
    """
    t6, t7 = p.require("T")
    t, c = math.atan(t6), math.cos(t7)
    return _tensor("T", [
        [0, -t, -c, 0],
        [t, 0, 0, -c],
        [c, 0, 0, t],
        [0, c, -t, 0],
    ])


def build_S(p: ParameterSet) -> Tensor:
    t8, t9 = p.require("S")
    a, b = math.cosh(t8), math.cosh(t9)
    return _tensor("S", [
        [0, -a, -b, 0],
        [a, 0, 0, -b],
        [b, 0, 0, a],
        [0, b, -a, 0],
    ])


BUILDERS = {"Y": build_Y, "R": build_R, "Q": build_Q, "T": build_T, "S": build_S}


def build(family: str, p: ParameterSet) -> Tensor:
    try:
        return BUILDERS[family](p)
    except KeyError:
        raise ValueError(f"unknown constituent family {family!r}") from None


def closed_form_constant(family: str, p: ParameterSet) -> float:
    """Exact ``c`` in ``M M^T = c I`` for the T and S families."""
    if family == "T":
        t6, t7 = p.require("T")
        return math.atan(t6) ** 2 + math.cos(t7) ** 2
    if family == "S":
        t8, t9 = p.require("S")
        return math.cosh(t8) ** 2 + math.cosh(t9) ** 2
    return 1.0


# ---------------------------------------------------------------------------
# classification


def vertical_matrix(t: Tensor) -> np.ndarray:
    """Grouping (first, second | third, fourth)."""
    return matricize(t, t.legs[:2], t.legs[2:]).data


def horizontal_matrix(t: Tensor) -> np.ndarray:
    """Grouping (first, fourth | second, third).

    This is the only regrouping besides the vertical one under which the
    doubly unitary R tensor stays unitary.
    """
    l = t.legs
    return matricize(t, (l[0], l[3]), (l[1], l[2])).data


def proportionality(m: np.ndarray):
    """Best-fit ``c`` with ``M M^dagger ~ c I`` and the max-entry residual of that fit."""
    g = m @ m.conj().T
    c = float(np.mean(np.real(np.diag(g))))
    return c, float(np.max(np.abs(g - c * np.eye(g.shape[0]))))


def _defect(m: np.ndarray) -> float:
    return float(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))))


def _popcount_parity(n: int) -> int:
    return bin(n).count("1") % 2


@dataclass(frozen=True)
class ConstraintReport:
    """Constraint classes met by one 4-leg tensor.

    ``vertical_unitary`` and ``horizontal_unitary`` are defects of the raw
    tensor. ``scalar_constant`` is the fitted ``c`` of ``M M^dagger = c I``
    in the vertical grouping (None when no such ``c`` fits); the
    ``*_normalized`` defects are measured after dividing by ``sqrt(c)``.
    """

    vertical_unitary: float
    horizontal_unitary: float
    scalar_constant: float | None
    z2_symmetric: bool
    antisymmetric: bool
    vertical_normalized: float
    horizontal_normalized: float
    usable: bool = True

    def doubly_unitary(self, tol: float = 1e-10) -> bool:
        return self.vertical_normalized <= tol and self.horizontal_normalized <= tol

    def as_dict(self) -> dict:
        return {
            "vertical_unitary": self.vertical_unitary,
            "horizontal_unitary": self.horizontal_unitary,
            "scalar_constant": self.scalar_constant,
            "z2_symmetric": self.z2_symmetric,
            "antisymmetric": self.antisymmetric,
            "vertical_normalized": self.vertical_normalized,
            "horizontal_normalized": self.horizontal_normalized,
            "usable": self.usable,
        }


def classify(t: Tensor, tol: float = 1e-10) -> ConstraintReport:
    if len(t.legs) != 4:
        raise ShapeError(f"classify needs a 4-leg tensor, got {len(t.legs)} legs")
    if len(set(t.shape)) != 1:
        raise ShapeError(f"classify needs equal leg dimensions, got {t.shape}")
    v = vertical_matrix(t)
    h = horizontal_matrix(t)
    c, resid = proportionality(v)
    usable = True
    if resid > tol * max(1.0, abs(c)):
        scalar = None
        v_norm = h_norm = float("inf")
    elif c <= tol:
        # zero tensor: M M^dagger = 0 I fits but cannot be normalized
        scalar, usable = 0.0, False
        v_norm = h_norm = float("inf")
    else:
        scalar = c
        v_norm = _defect(v / math.sqrt(c))
        h_norm = _defect(h / math.sqrt(c))

    nz = np.abs(v) > tol
    rows, cols = np.nonzero(nz)
    z2 = all(_popcount_parity(r) == _popcount_parity(k) for r, k in zip(rows, cols))
    antisym = bool(np.max(np.abs(v + v.T)) <= tol)
    return ConstraintReport(
        vertical_unitary=_defect(v),
        horizontal_unitary=_defect(h),
        scalar_constant=scalar,
        z2_symmetric=z2,
        antisymmetric=antisym,
        vertical_normalized=v_norm,
        horizontal_normalized=h_norm,
        usable=usable,
    )


def normalized(t: Tensor, tol: float = 1e-10) -> Tensor:
    """Rescale so that the vertical grouping is exactly unitary (T and S need this)."""
    c, resid = proportionality(vertical_matrix(t))
    if resid > tol * max(1.0, abs(c)) or c <= tol:
        raise ConstraintViolation(f"tensor is not proportional to a unitary (residual {resid:.2e}, c={c:.3g})")
    return t / math.sqrt(c)
