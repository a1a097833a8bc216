"""
Contraction schemas: wiring diagrams that assemble composite tensors.

A schema is plain data (see ``ContractionSchema.from_dict``)::

    {"nodes":   [{"id": "y", "role": "Y", "legs": ["a", "b", "c", "d"]}, ...],
     "bonds":   [[["y", "c"], ["q", "i"]], ...],
     "outputs": [["y", "a", "in"], ["y", "b"], ...],
     "fuse":    [{"name": "v3", "legs": ["k", "l"]}]}

Node legs are local names bound positionally to the legs of the tensor
supplied for the node's role. A node may set ``"conjugate": true`` to use
the complex conjugate of its role's tensor. An output entry may carry a
third element naming the resulting leg; otherwise it is ``"node.leg"``.
``fuse`` (optional) merges named outputs into one leg, row-major.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import constituents as cons
from .constituents import ParameterSet
from .errors import ConstraintViolation, SchemaError, ShapeError
from .tensor import MatrixView, Tensor, contract, fuse, matricize, permute, trace


@dataclass(frozen=True)
class Node:
    id: str
    role: str
    legs: tuple
    conjugate: bool = False


@dataclass(frozen=True)
class ContractionSchema:
    nodes: tuple
    bonds: tuple
    outputs: tuple
    fuse: tuple = ()

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if not ids:
            raise SchemaError("schema has no nodes")
        if len(set(ids)) != len(ids):
            raise SchemaError(f"duplicate node ids in {ids}")
        legs = {n.id: n.legs for n in self.nodes}
        seen = {}
        endpoints = [e for b in self.bonds for e in b] + [o[:2] for o in self.outputs]
        for node, leg in endpoints:
            if node not in legs or leg not in legs[node]:
                raise SchemaError(f"unknown leg {node}.{leg}")
            if (node, leg) in seen:
                raise SchemaError(f"leg {node}.{leg} used more than once")
            seen[(node, leg)] = True
        for n in self.nodes:
            if len(set(n.legs)) != len(n.legs):
                raise SchemaError(f"node {n.id} repeats a leg name")
            for leg in n.legs:
                if (n.id, leg) not in seen:
                    raise SchemaError(f"leg {n.id}.{leg} is neither bonded nor an output")
        names = self.output_names
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate output names {names}")
        for name, group in self.fuse:
            missing = [g for g in group if g not in names]
            if missing:
                raise SchemaError(f"fuse group {name} names unknown outputs {missing}")
        if not self._connected():
            raise SchemaError("schema graph is disconnected")

    def _connected(self) -> bool:
        adj = {n.id: set() for n in self.nodes}
        for (a, _), (b, _) in self.bonds:
            adj[a].add(b)
            adj[b].add(a)
        start = self.nodes[0].id
        stack, seen = [start], {start}
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(adj)

    @property
    def output_names(self) -> tuple:
        return tuple(o[2] for o in self.outputs)

    @property
    def legs(self) -> tuple:
        """Leg labels of the composed tensor, after fusing."""
        out = list(self.output_names)
        for name, group in self.fuse:
            pos = out.index(group[0])
            out = [l for l in out if l not in group]
            out.insert(min(pos, len(out)), name)
        return tuple(out)

    @property
    def roles(self) -> set:
        return {n.role for n in self.nodes}

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise SchemaError(f"no node {node_id!r}")

    def find_output(self, name: str) -> tuple:
        for node, leg, alias in self.outputs:
            if alias == name:
                return node, leg
        raise SchemaError(f"no output named {name!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ContractionSchema":
        try:
            nodes = tuple(
                Node(str(n["id"]), str(n["role"]), tuple(n["legs"]), bool(n.get("conjugate", False)))
                for n in d["nodes"]
            )
            bonds = tuple((tuple(a), tuple(b)) for a, b in d.get("bonds", []))
            outputs = []
            for o in d["outputs"]:
                node, leg = o[0], o[1]
                outputs.append((node, leg, o[2] if len(o) > 2 else f"{node}.{leg}"))
            groups = tuple((g["name"], tuple(g["legs"])) for g in d.get("fuse", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed schema description: {exc}") from exc
        return cls(nodes, bonds, tuple(outputs), groups)

    def to_dict(self) -> dict:
        d = {
            "nodes": [
                {"id": n.id, "role": n.role, "legs": list(n.legs), **({"conjugate": True} if n.conjugate else {})}
                for n in self.nodes
            ],
            "bonds": [[list(a), list(b)] for a, b in self.bonds],
            "outputs": [list(o) for o in self.outputs],
        }
        if self.fuse:
            d["fuse"] = [{"name": name, "legs": list(g)} for name, g in self.fuse]
        return d


def _bind(schema: ContractionSchema, bindings: dict) -> dict:
    bound = {}
    for n in schema.nodes:
        if n.role not in bindings:
            raise SchemaError(f"role {n.role!r} of node {n.id} is unbound")
        t = bindings[n.role]
        if len(t.legs) != len(n.legs):
            raise SchemaError(f"node {n.id} declares {len(n.legs)} legs but role {n.role} has {len(t.legs)}")
        if n.conjugate:
            t = t.conj()
        bound[n.id] = Tensor(t.data, tuple(f"{n.id}.{leg}" for leg in n.legs))
    return bound


def compose(schema: ContractionSchema, bindings: dict, order=None) -> Tensor:
    """Contract every bond of ``schema`` with tensors bound to its roles.

    Args:
        schema: wiring diagram.
        bindings: role -> Tensor.
        order: optional sequence of bond indices. When given, bonds are
            visited in that order; otherwise the next merge is the pair of
            intermediates with the smallest result (ties: schema order).

    Returns:
        Tensor with legs ``schema.legs``.
    """
    bound = _bind(schema, bindings)
    bonds = [(f"{a[0]}.{a[1]}", f"{b[0]}.{b[1]}", a[0], b[0]) for a, b in schema.bonds]

    owner = {nid: nid for nid in bound}  # node id -> intermediate key
    pieces = dict(bound)

    for la, lb, na, nb in bonds:
        if na == nb:
            pieces[na] = trace(pieces[na], [(la, lb)])
    pending = [b for b in bonds if b[2] != b[3]]

    def merge(ka, kb):
        between = [(la, lb) if owner[na] == ka else (lb, la)
                   for la, lb, na, nb in pending
                   if {owner[na], owner[nb]} == {ka, kb}]
        merged = contract(pieces[ka], pieces[kb], between)
        del pieces[kb]
        pieces[ka] = merged
        for nid, k in owner.items():
            if k == kb:
                owner[nid] = ka

    def result_size(ka, kb):
        shared = {l for la, lb, na, nb in pending if {owner[na], owner[nb]} == {ka, kb} for l in (la, lb)}
        dims = [d for k in (ka, kb) for leg, d in zip(pieces[k].legs, pieces[k].shape) if leg not in shared]
        return int(np.prod(dims)) if dims else 1

    if order is not None:
        if sorted(order) != list(range(len(bonds))):
            raise SchemaError("order must be a permutation of bond indices")
        for i in order:
            la, lb, na, nb = bonds[i]
            if owner[na] != owner[nb]:
                merge(owner[na], owner[nb])
    while len(pieces) > 1:
        best = None
        for la, lb, na, nb in pending:
            ka, kb = owner[na], owner[nb]
            if ka == kb:
                continue
            size = result_size(ka, kb)
            if best is None or size < best[0]:
                best = (size, ka, kb)
        if best is None:
            raise SchemaError("schema graph is disconnected")
        merge(best[1], best[2])

    (result,) = pieces.values()
    names = {f"{node}.{leg}": alias for node, leg, alias in schema.outputs}
    result = permute(result.relabel(names), schema.output_names)
    for name, group in schema.fuse:
        result = fuse(result, group, name)
    return result


def _gram(w: Tensor, in_legs, out_legs) -> np.ndarray:
    m = matricize(w, tuple(out_legs), tuple(in_legs)).data
    return m.conj().T @ m


def isometry_defect(w: Tensor, in_legs, out_legs) -> float:
    """``max |W^dagger W - I|`` with ``W`` read as a map from ``in_legs`` to ``out_legs``."""
    g = _gram(w, in_legs, out_legs)
    return float(np.max(np.abs(g - np.eye(g.shape[0]))))


def normalize_composite(t: Tensor, in_legs, out_legs, tol: float = 1e-10) -> Tensor:
    """Divide by ``sqrt(c)`` where ``W^dagger W = c I``.

    Raises:
        ConstraintViolation: ``W^dagger W`` is not proportional to the identity.
    """
    g = _gram(t, in_legs, out_legs)
    c = float(np.mean(np.real(np.diag(g))))
    resid = float(np.max(np.abs(g - c * np.eye(g.shape[0]))))
    if c <= 0 or resid > tol * max(1.0, c):
        raise ConstraintViolation(
            f"W^dagger W is not proportional to the identity (residual {resid:.3e}, c={c:.4g})"
        )
    return t if abs(c - 1.0) <= tol else t / math.sqrt(c)


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, MatrixView):
        return rho.data
    if isinstance(rho, Tensor):
        n = len(rho.legs)
        if n % 2:
            raise ShapeError("a density tensor needs an even number of legs")
        return matricize(rho, rho.legs[: n // 2], rho.legs[n // 2:]).data
    return np.asarray(rho, dtype=np.complex128)


def nontrivial_spectrum_check(rho, spread: float = 1e-6, herm_tol: float = 1e-8) -> bool:
    """True when the spectrum of ``rho`` is not flat (``max - min > spread``)."""
    m = _as_matrix(rho)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError("density matrix must be square")
    if np.max(np.abs(m - m.conj().T)) > herm_tol:
        raise ShapeError("density matrix is not Hermitian")
    ev = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return bool(ev[-1] - ev[0] > spread)


# ---------------------------------------------------------------------------
# decompositions


@dataclass(frozen=True)
class RoleSpec:
    schema: ContractionSchema
    in_legs: tuple
    out_legs: tuple


@dataclass(frozen=True)
class Decomposition:
    """A named recipe for the composite roles A, B, U, W built from constituents."""

    name: str
    schlafli: tuple
    families: tuple
    roles: dict
    params: ParameterSet = field(default_factory=ParameterSet)
    wiring_note: str = ""

    @property
    def parameter_indices(self) -> tuple:
        return tuple(sorted(i for f in self.families for i in cons.FAMILY_PARAMS[f]))

    def with_params(self, params: ParameterSet) -> "Decomposition":
        return Decomposition(self.name, self.schlafli, self.families, self.roles, params, self.wiring_note)

    def sample(self, rng: np.random.Generator, ranges=None) -> "Decomposition":
        return self.with_params(ParameterSet.sample(rng, self.parameter_indices, ranges))

    def constituents(self, normalize: bool = True) -> dict:
        """family -> Tensor; T and S are rescaled to unitaries unless ``normalize`` is False."""
        out = {}
        for f in self.families:
            t = cons.build(f, self.params)
            out[f] = cons.normalized(t) if normalize and f in ("T", "S") else t
        return out

    def composite(self, role: str, normalize: bool = True, constituents: dict | None = None) -> Tensor:
        spec = self.roles[role]
        parts = constituents if constituents is not None else self.constituents(normalize)
        t = compose(spec.schema, parts)
        if normalize and spec.in_legs:
            t = normalize_composite(t, spec.in_legs, spec.out_legs)
        return t

    def bindings(self) -> dict:
        """Normalized composites keyed by role, ready to bind into cone schemas."""
        parts = self.constituents(True)
        return {role: self.composite(role, True, parts) for role in self.roles}


def preset_dir() -> Path:
    env = os.environ.get("HYMERA_PRESET_DIR")
    if env:
        return Path(env)
    return Path(str(resources.files("hymera") / "presets"))


def decomposition_from_dict(d: dict) -> Decomposition:
    try:
        roles = {
            role: RoleSpec(ContractionSchema.from_dict(r["schema"]), tuple(r.get("in", ())), tuple(r.get("out", ())))
            for role, r in d["roles"].items()
        }
        return Decomposition(
            name=d["name"],
            schlafli=tuple(d["schlafli"]),
            families=tuple(d["families"]),
            roles=roles,
            wiring_note=d.get("wiring_note", ""),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed decomposition description: {exc}") from exc


ALIASES = {"YQR": "YQR-54", "YQT": "YQT-54", "YQS": "YQS-54", "QR": "QR-54"}


@lru_cache(maxsize=None)
def _load_decomposition(path: str) -> Decomposition:
    with open(path) as fh:
        return decomposition_from_dict(json.load(fh))


def load_decomposition(name: str) -> Decomposition:
    """Load a shipped (or ``HYMERA_PRESET_DIR``) decomposition by name, e.g. ``YQR-54``."""
    name = ALIASES.get(name, name)
    path = preset_dir() / "decompositions" / f"{name}.json"
    if not path.exists():
        raise SchemaError(f"unknown decomposition {name!r} (looked for {path})")
    return _load_decomposition(str(path))


def available_decompositions() -> list:
    return sorted(p.stem for p in (preset_dir() / "decompositions").glob("*.json"))
