"""
Vertex inflation for {p,q} tilings, reduced to the boundary word of each layer.

A grammar maps each letter to a non-empty word. Inflation substitutes every
letter; deflation parses a word back into a concatenation of rule images.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DeflationError, GrammarError


@dataclass(frozen=True)
class InflationGrammar:
    rules: dict
    schlafli: tuple = (0, 0)

    def __post_init__(self):
        rules = {str(k): str(v) for k, v in dict(self.rules).items()}
        if not rules:
            raise GrammarError("grammar has no rules")
        for letter, image in rules.items():
            if len(letter) != 1:
                raise GrammarError(f"rule key {letter!r} is not a single letter")
            if not image:
                raise GrammarError(f"rule for {letter!r} has an empty image")
            stray = set(image) - set(rules)
            if stray:
                raise GrammarError(f"rule {letter!r} -> {image!r} uses letters without rules: {sorted(stray)}")
        if len(set(rules.values())) != len(rules):
            raise GrammarError("two letters share the same image; deflation would be ambiguous")
        object.__setattr__(self, "rules", dict(sorted(rules.items())))
        object.__setattr__(self, "schlafli", tuple(self.schlafli))

    @property
    def alphabet(self) -> tuple:
        return tuple(self.rules)

    @property
    def matrix(self) -> np.ndarray:
        """``matrix[x][y]`` = number of ``x`` in the image of ``y``."""
        letters = self.alphabet
        m = np.zeros((len(letters), len(letters)), dtype=np.int64)
        for j, y in enumerate(letters):
            counts = Counter(self.rules[y])
            for i, x in enumerate(letters):
                m[i, j] = counts[x]
        return m

    def is_primitive(self) -> bool:
        m = self.matrix
        n = m.shape[0]
        power = np.eye(n, dtype=np.int64)
        # Wielandt: a primitive n x n matrix has a positive power at or below (n-1)^2 + 1
        for _ in range((n - 1) ** 2 + 1):
            power = np.minimum(power @ m, 1)
            if np.all(power > 0):
                return True
        return False

    @classmethod
    def from_dict(cls, d: dict) -> "InflationGrammar":
        try:
            return cls(d["rules"], (int(d.get("p", 0)), int(d.get("q", 0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise GrammarError(f"malformed grammar description: {exc}") from exc

    def to_dict(self) -> dict:
        return {"p": self.schlafli[0], "q": self.schlafli[1], "rules": dict(self.rules)}


@dataclass(frozen=True)
class BoundaryWord:
    letters: str
    layer: int = 0

    def counts(self, alphabet) -> np.ndarray:
        c = Counter(self.letters)
        return np.array([c[x] for x in alphabet], dtype=np.int64)

    def __len__(self):
        return len(self.letters)


def load_grammar(source) -> InflationGrammar:
    """Load a grammar from a JSON file path, or a preset name such as ``"54"``."""
    from .composition import preset_dir

    path = Path(source)
    if not path.exists():
        path = preset_dir() / "grammars" / f"{source}.json"
    if not path.exists():
        raise GrammarError(f"no grammar file or preset named {source!r}")
    with open(path) as fh:
        return InflationGrammar.from_dict(json.load(fh))


def inflate(w: BoundaryWord, g: InflationGrammar, times: int = 1) -> BoundaryWord:
    letters = w.letters
    for _ in range(times):
        letters = "".join(g.rules[ch] for ch in letters)
    return BoundaryWord(letters, w.layer + times)


def _segment(word: str, g: InflationGrammar):
    """Leftmost-longest segmentation with backtracking; None if no parse exists."""
    images = sorted(((img, ch) for ch, img in g.rules.items()), key=lambda t: -len(t[0]))
    dead = set()  # positions proven unparseable

    def walk(pos):
        if pos == len(word):
            return []
        if pos in dead:
            return None
        for img, ch in images:
            if word.startswith(img, pos):
                rest = walk(pos + len(img))
                if rest is not None:
                    return [ch] + rest
        dead.add(pos)
        return None

    return walk(0)


def deflate(w: BoundaryWord, g: InflationGrammar) -> BoundaryWord:
    """Undo one inflation step.

    Raises:
        DeflationError: ``w`` is not a concatenation of rule images.
    """
    parsed = _segment(w.letters, g)
    if parsed is None or not w.letters:
        raise DeflationError(f"{w.letters!r} is not an inflation image")
    return BoundaryWord("".join(parsed), w.layer - 1)


def count_parses(word: str, g: InflationGrammar) -> int:
    """Number of distinct segmentations of ``word`` into rule images."""

    @lru_cache(maxsize=None)
    def n(pos):
        if pos == len(word):
            return 1
        return sum(n(pos + len(img)) for img in g.rules.values() if word.startswith(img, pos))

    return n(0)


def scale_factor(g: InflationGrammar) -> float:
    """Perron-Frobenius eigenvalue of the inflation matrix."""
    if not g.is_primitive():
        raise GrammarError("inflation matrix is not primitive")
    return float(np.max(np.real(np.linalg.eigvals(g.matrix.astype(float)))))


def pair_frequencies(w: BoundaryWord, cyclic: bool = False) -> dict:
    """Relative frequency of each adjacent two-letter pattern in ``w``."""
    s = w.letters + (w.letters[:1] if cyclic else "")
    pairs = Counter(s[i:i + 2] for i in range(len(s) - 1))
    total = sum(pairs.values())
    return {k: v / total for k, v in sorted(pairs.items())} if total else {}


@dataclass(frozen=True)
class CouplingSequence:
    """Couplings ``J_i`` along a boundary word; ``values`` maps each letter to its ``J``."""

    word: BoundaryWord
    values: dict

    def __post_init__(self):
        vals = {k: float(v) for k, v in dict(self.values).items()}
        missing = set(self.word.letters) - set(vals)
        if missing:
            raise ValueError(f"no coupling for letters {sorted(missing)}")
        if "a" in vals and "b" in vals and not vals["b"] > vals["a"] > 0:
            raise ValueError(f"couplings must satisfy J_b > J_a > 0, got {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def couplings(self) -> list:
        return [self.values[ch] for ch in self.word.letters]


def renormalize_couplings(
    c: CouplingSequence,
    g: InflationGrammar,
    flow: Callable[[dict], dict] | None = None,
) -> CouplingSequence:
    """One RG step: deflate the word and relabel its couplings.

    ``flow`` maps ``{letter: J}`` to the effective ``{letter: J'}``; the
    default keeps the values and only relabels letters.
    """
    word = deflate(c.word, g)
    values = dict(c.values) if flow is None else flow(dict(c.values))
    return CouplingSequence(word, values)


def export_words(words) -> str:
    """Plain-text export: one word per line."""
    return "".join(w.letters + "\n" for w in words)
