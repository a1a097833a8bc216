"""
Scaling superoperators on n-site density matrices.

A cone preset is a single-layer network ``V`` (roles W, U, ...) whose free
legs split into coarse inputs, fine outputs and environment legs. The
descending map is ``D(rho) = Tr_env[V rho V^dagger]``; it is built by
composing the doubled network (ket copy, conjugated bra copy, environment
legs bonded). The ascending map is assembled separately from the Kraus
operators of ``V`` so the duality between the two is a real check.

Matrix convention: ``vec(rho)[i * N + j] = rho[i, j]`` (row-major), so a
superoperator matrix has rows ``(out, out')`` and columns ``(in, in')``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .composition import ContractionSchema, Decomposition, compose, preset_dir
from .constituents import ParameterSet
from .errors import ConstraintViolation, SchemaError, ShapeError, SolverError
from .tensor import MatrixView, Tensor, eigendecompose, matricize
from .tiling import BoundaryWord, InflationGrammar, inflate, pair_frequencies

TP_TOL = 1e-8


@dataclass(frozen=True)
class Cone:
    id: str
    schema: ContractionSchema
    coarse: tuple
    fine: tuple
    env: tuple
    sites: int
    site_dim: int
    pattern: str = ""
    note: str = ""
    schlafli: tuple = (0, 0)

    def __post_init__(self):
        names = set(self.schema.output_names)
        legs = list(self.coarse) + list(self.fine) + list(self.env)
        if sorted(legs) != sorted(names):
            raise SchemaError(f"cone {self.id}: coarse/fine/env {legs} must partition outputs {sorted(names)}")
        if len(self.coarse) != self.sites or len(self.fine) != self.sites:
            raise SchemaError(f"cone {self.id}: expected {self.sites} coarse and fine legs")

    @classmethod
    def from_dict(cls, d: dict) -> "Cone":
        try:
            return cls(
                id=str(d["id"]),
                schema=ContractionSchema.from_dict(d["schema"]),
                coarse=tuple(d["coarse"]),
                fine=tuple(d["fine"]),
                env=tuple(d.get("env", ())),
                sites=int(d["sites"]),
                site_dim=int(d["site_dim"]),
                pattern=d.get("pattern", ""),
                note=d.get("note", ""),
                schlafli=tuple(d.get("schlafli", (0, 0))),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed cone description: {exc}") from exc

    def doubled(self) -> ContractionSchema:
        """Ket and conjugated bra copies of the cone with environment legs traced."""
        s = self.schema
        nodes, bonds, outputs = [], [], []
        for tag, conj in (("k", False), ("b", True)):
            for n in s.nodes:
                nodes.append({"id": f"{tag}:{n.id}", "role": n.role, "legs": list(n.legs),
                              "conjugate": n.conjugate != conj})
            for (na, la), (nb, lb) in s.bonds:
                bonds.append([[f"{tag}:{na}", la], [f"{tag}:{nb}", lb]])
        for e in self.env:
            node, leg = s.find_output(e)
            bonds.append([[f"k:{node}", leg], [f"b:{node}", leg]])
        for group, tag, suffix in ((self.fine, "k", ""), (self.fine, "b", "'"),
                                   (self.coarse, "k", ""), (self.coarse, "b", "'")):
            for name in group:
                node, leg = s.find_output(name)
                outputs.append([f"{tag}:{node}", leg, name + suffix])
        return ContractionSchema.from_dict({"nodes": nodes, "bonds": bonds, "outputs": outputs})


def load_cone(source) -> Cone:
    """Load a cone from a JSON path or a preset id (``"a"``, ``"cone-a"``)."""
    path = Path(str(source))
    if not path.exists():
        name = str(source) if str(source).startswith("cone-") else f"cone-{source}"
        path = preset_dir() / "cones" / f"{name}.json"
    if not path.exists():
        raise SchemaError(f"no cone file or preset named {source!r}")
    with open(path) as fh:
        return Cone.from_dict(json.load(fh))


def available_cones() -> list:
    return sorted(p.stem.removeprefix("cone-") for p in (preset_dir() / "cones").glob("cone-*.json"))


@dataclass(frozen=True)
class Superoperator:
    sites: int
    site_dim: int
    matrix: np.ndarray
    kind: str
    cone_id: str = ""

    def __post_init__(self):
        n = self.site_dim ** (2 * self.sites)
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (n, n):
            raise ShapeError(f"superoperator matrix must be {n}x{n}, got {m.shape}")
        if self.kind not in ("ascending", "descending"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        """Hilbert-space dimension of the n-site region."""
        return self.site_dim ** self.sites

    def _blocks(self) -> np.ndarray:
        n = self.dim
        return self.matrix.reshape(n, n, n, n)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.complex128)
        return (self.matrix @ rho.reshape(-1)).reshape(self.dim, self.dim)

    def choi(self) -> np.ndarray:
        n = self.dim
        return self._blocks().transpose(0, 2, 1, 3).reshape(n * n, n * n)

    def choi_min_eigenvalue(self) -> float:
        j = self.choi()
        return float(np.min(np.linalg.eigvalsh((j + j.conj().T) / 2)))

    def trace_defect(self) -> float:
        """``max |Tr_out M - id|``: zero for trace-preserving maps."""
        t = np.einsum("ffcd->cd", self._blocks())
        return float(np.max(np.abs(t - np.eye(self.dim))))

    def unital_defect(self) -> float:
        return float(np.max(np.abs(self.apply(np.eye(self.dim)) - np.eye(self.dim))))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.matrix))))

    def adjoint(self) -> "Superoperator":
        """Hilbert-Schmidt adjoint; swaps ascending and descending."""
        kind = "ascending" if self.kind == "descending" else "descending"
        return Superoperator(self.sites, self.site_dim, self.matrix.conj().T, kind, self.cone_id)


def _bindings(source) -> dict:
    return source.bindings() if isinstance(source, Decomposition) else dict(source)


def build_descending(source, cone: Cone, tol: float = TP_TOL) -> Superoperator:
    """Descending superoperator of ``cone`` with roles taken from ``source``.

    Args:
        source: a Decomposition carrying parameters, or a role -> Tensor map.
        cone: the causal-cone preset.
        tol: trace-preservation tolerance.

    Raises:
        ConstraintViolation: the result is not trace preserving, which
            means the cone is mis-wired or a composite is not isometric.
    """
    b = _bindings(source)
    if cone.env:
        d = compose(cone.doubled(), b)
    else:
        # no environment: the doubled network is just V (x) V*
        v = compose(cone.schema, b)
        ket = v.relabel({n: n for n in v.legs})
        bra = v.conj().relabel({n: n + "'" for n in v.legs})
        d = Tensor(np.multiply.outer(ket.data, bra.data), ket.legs + bra.legs)
    rows = tuple(cone.fine) + tuple(f + "'" for f in cone.fine)
    cols = tuple(cone.coarse) + tuple(c + "'" for c in cone.coarse)
    m = matricize(d, rows, cols).data
    if any(dim != cone.site_dim for dim in d.shape):
        raise ShapeError(f"cone {cone.id}: leg dimensions {d.shape} differ from site_dim {cone.site_dim}")
    op = Superoperator(cone.sites, cone.site_dim, m, "descending", cone.id)
    defect = op.trace_defect()
    if defect > tol:
        raise ConstraintViolation(f"cone {cone.id}: descending map not trace preserving (defect {defect:.3e})")
    return op


def kraus_operators(source, cone: Cone) -> np.ndarray:
    """Array ``K[e, fine, coarse]`` with ``D(rho) = sum_e K_e rho K_e^dagger``."""
    v = compose(cone.schema, _bindings(source))
    m = matricize(v, tuple(cone.env) + tuple(cone.fine), tuple(cone.coarse)).data
    n = cone.site_dim ** cone.sites
    return m.reshape(-1, n, n)


def build_ascending(source, cone: Cone) -> Superoperator:
    """Ascending map ``A(O) = sum_e K_e^dagger O K_e`` from the Kraus route."""
    k = kraus_operators(source, cone)
    n = k.shape[1]
    # A(O)[c, c'] = sum_e conj(K[e, f, c]) O[f, f'] K[e, f', c']
    m = np.einsum("efc,egd->cdfg", k.conj(), k).reshape(n * n, n * n)
    return Superoperator(cone.sites, cone.site_dim, m, "ascending", cone.id)


def duality_defect(desc: Superoperator, asc: Superoperator, o: np.ndarray, rho: np.ndarray) -> float:
    """``|tr[O D(rho)] - tr[A(O) rho]|``."""
    return float(abs(np.trace(o @ desc.apply(rho)) - np.trace(asc.apply(o) @ rho)))


def average_superoperator(ops, weights=None) -> Superoperator:
    ops = list(ops)
    if not ops:
        raise ValueError("no superoperators to average")
    if weights is None:
        weights = [1.0 / len(ops)] * len(ops)
    weights = [float(w) for w in weights]
    if len(weights) != len(ops) or any(w < 0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
        raise ValueError(f"weights must be non-negative, one per operator, and sum to 1: {weights}")
    first = ops[0]
    for op in ops[1:]:
        if (op.sites, op.site_dim, op.kind) != (first.sites, first.site_dim, first.kind):
            raise ShapeError("cannot average superoperators of different shapes or kinds")
    if len(ops) == 1:
        return first
    m = sum(w * op.matrix for w, op in zip(weights, ops))
    cid = "+".join(op.cone_id for op in ops)
    return Superoperator(first.sites, first.site_dim, m, first.kind, cid)


def boundary_weights(cones, grammar: InflationGrammar, layers: int = 6, seed: str = "a") -> list:
    """Cone weights proportional to how often each cone's two-letter pattern occurs on the boundary."""
    freq = pair_frequencies(inflate(BoundaryWord(seed), grammar, layers))
    raw = [freq.get(c.pattern, 0.0) for c in cones]
    total = math.fsum(raw)
    if total == 0:
        raise ValueError("none of the cone patterns occurs on the boundary word")
    return [r / total for r in raw]


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class ScalingSpectrum:
    eigenvalues: np.ndarray
    dimensions: np.ndarray
    scale_factor: float
    trial_params: ParameterSet = field(default_factory=ParameterSet)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


def dimensions_from_magnitudes(mags, s: float) -> np.ndarray:
    mags = np.asarray(mags, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(mags > 0, -np.log(np.where(mags > 0, mags, 1.0)) / math.log(s), np.inf)


def scaling_spectrum(op: Superoperator, s: float, k: int = 8, tol: float = 1e-8,
                     params: ParameterSet | None = None) -> ScalingSpectrum:
    """Top-``k`` eigenvalues and ``Delta_i = -log_s |lambda_i|``.

    Conjugate eigenvalue pairs give repeated dimensions; both are kept.
    Eigenvalues that vanish exactly give ``inf``.
    """
    if not s > 1:
        raise ValueError(f"scale factor must exceed 1, got {s}")
    ed = eigendecompose(MatrixView.from_array(op.matrix), tol)
    vals = ed.eigenvalues[:k]
    dims = dimensions_from_magnitudes(np.abs(vals), s)
    if abs(dims[0]) > 1e-6:
        raise SolverError(f"dominant eigenvalue has |lambda| = {abs(vals[0]):.9f}, expected 1")
    dims[0] = max(dims[0], 0.0) + 0.0  # no negative zero
    return ScalingSpectrum(vals, dims, float(s), params or ParameterSet())


def fixed_point(op: Superoperator, tol: float = 1e-10, max_iter: int = 10_000):
    """Power iteration from the maximally mixed state.

    Returns:
        (rho, converged) where ``rho`` is Hermitian with unit trace.
    """
    n = op.dim
    rho = np.eye(n, dtype=np.complex128) / n
    converged = False
    for _ in range(max_iter):
        nxt = op.apply(rho)
        nxt = (nxt + nxt.conj().T) / 2
        nxt /= np.trace(nxt).real
        step = float(np.max(np.abs(nxt - rho)))
        rho = nxt
        if step < tol:
            converged = True
            break
    return rho, converged


def partial_trace(rho: np.ndarray, site_dim: int, keep) -> np.ndarray:
    """Reduce an n-site density matrix to the sites listed in ``keep``."""
    n = int(round(math.log(rho.shape[0], site_dim)))
    t = rho.reshape((site_dim,) * (2 * n))
    keep = sorted(keep)
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            bra[i] = ket[i]
    out = "".join(ket[i] for i in keep) + "".join(bra[i] for i in keep)
    r = np.einsum("".join(ket) + "".join(bra) + "->" + out, t)
    m = site_dim ** len(keep)
    return r.reshape(m, m)


def von_neumann_entropy(rho: np.ndarray) -> float:
    ev = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    ev = ev[ev > 1e-15]
    return float(-np.sum(ev * np.log(ev)))


def central_charge(s_n: float, s_m: float, n: int, m: int) -> float:
    """Invert ``S(n) = (c/3) log n + const`` using two region sizes."""
    if not n > m >= 1:
        raise ValueError(f"need n > m >= 1, got n={n}, m={m}")
    return 3.0 * (s_n - s_m) / math.log(n / m)


def correlation_exponent(spec: ScalingSpectrum, alpha: int) -> float:
    """Decay exponent ``2 Delta_alpha`` of the two-point function of field ``alpha``."""
    if not 1 <= alpha < len(spec.dimensions):
        raise IndexError(f"alpha must lie in 1..{len(spec.dimensions) - 1}")
    return 2.0 * float(spec.dimensions[alpha])


# ---------------------------------------------------------------------------
# minimal models


def kac_dimension(pq, rs) -> Fraction:
    """Kac weight ``h_{r,s}`` of the minimal model ``M(p', q')``, exactly.

    The scaling dimension of the spinless primary is ``2 h``.
    """
    p, q = (int(x) for x in pq)
    r, s = (int(x) for x in rs)
    if not (p > q >= 2 and math.gcd(p, q) == 1):
        raise ValueError(f"need coprime p' > q' >= 2, got {(p, q)}")
    if not (1 <= r < q and 1 <= s < p):
        raise ValueError(f"(r, s) = {(r, s)} outside 1 <= r < {q}, 1 <= s < {p}")
    return Fraction((p * r - q * s) ** 2 - (p - q) ** 2, 4 * p * q)


@dataclass(frozen=True)
class KacTable:
    label: str
    pq: tuple
    entries: dict  # (r, s) -> h

    @property
    def weights(self) -> list:
        return sorted(set(self.entries.values()))

    @property
    def dimensions(self) -> list:
        """Distinct non-zero ``Delta = 2h``."""
        return [2 * h for h in self.weights if h != 0]


def kac_table(pq, label: str = "", rs_subset=None) -> KacTable:
    p, q = pq
    keys = rs_subset or [(r, s) for r in range(1, q) for s in range(1, p)]
    return KacTable(label or f"M({p},{q})", (p, q), {rs: kac_dimension(pq, rs) for rs in keys})


MODELS = {
    "ising": ((4, 3), None),
    "tricritical-ising": ((5, 4), None),
    # three-state Potts: the D-series subset of M(6,5)
    "potts3": ((6, 5), [(1, 1), (2, 1), (3, 1), (4, 1), (3, 3), (4, 3)]),
}


def model_table(name: str) -> KacTable:
    try:
        pq, subset = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown minimal model {name!r}; choose from {sorted(MODELS)}") from None
    return kac_table(pq, name, subset)
