"""Base groups: integer lattices, free groups and free products of Z/2.

Generators are indexed by small integers.  For ``IntegerLattice(d)`` and
``FreeGroup(k)`` letter ``2i`` is the i-th generator and ``2i + 1`` its
inverse; for ``FreeProductC2(d)`` letter ``i`` is the involution ``s_i``.
The identity step is always encoded as ``spec.n_gens``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence, Union

import numpy as np

LATTICE = "lattice"
FREE = "free"
C2_PRODUCT = "c2_product"

_KINDS = (LATTICE, FREE, C2_PRODUCT)
_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class GroupMismatchError(ValueError):
    """Raised when elements of different groups are combined."""


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    rank: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}")
        low = {LATTICE: 1, FREE: 2, C2_PRODUCT: 3}[self.kind]
        if int(self.rank) != self.rank or self.rank < low:
            raise ValueError(f"{self.kind} needs rank >= {low}, got {self.rank}")

    @classmethod
    def integer_lattice(cls, dim: int) -> "GroupSpec":
        return cls(LATTICE, dim)

    @classmethod
    def free_group(cls, rank: int) -> "GroupSpec":
        return cls(FREE, rank)

    @classmethod
    def free_product_c2(cls, factors: int) -> "GroupSpec":
        return cls(C2_PRODUCT, factors)

    @property
    def is_tree_like(self) -> bool:
        """True when the Cayley graph is a tree."""
        return self.kind != LATTICE

    @property
    def n_gens(self) -> int:
        return self.rank if self.kind == C2_PRODUCT else 2 * self.rank

    @property
    def identity_label(self) -> int:
        return self.n_gens

    @cached_property
    def inverse_table(self) -> np.ndarray:
        """``inverse_table[l]`` is the letter inverse to ``l`` (identity included)."""
        if self.kind == C2_PRODUCT:
            inv = np.arange(self.n_gens + 1)
        else:
            inv = np.arange(self.n_gens) ^ 1
            inv = np.append(inv, self.n_gens)
        return inv.astype(np.int64)

    def inverse_letter(self, letter: int) -> int:
        return int(self.inverse_table[letter])

    def letter_name(self, letter: int) -> str:
        if letter == self.n_gens:
            return "e"
        if self.kind == C2_PRODUCT:
            return f"s{letter + 1}"
        i, neg = divmod(letter, 2)
        if self.kind == LATTICE:
            return f"{'-' if neg else '+'}e{i + 1}"
        name = _ALPHABET[i]
        return name.upper() if neg else name

    def identity(self) -> "GroupElement":
        if self.kind == LATTICE:
            return GroupElement(self, (0,) * self.rank)
        return GroupElement(self, b"")

    def generator(self, letter: int) -> "GroupElement":
        if not 0 <= letter < self.n_gens:
            raise ValueError(f"letter {letter} out of range for {self}")
        if self.kind == LATTICE:
            coords = [0] * self.rank
            i, neg = divmod(letter, 2)
            coords[i] = -1 if neg else 1
            return GroupElement(self, tuple(coords))
        return GroupElement(self, bytes([letter]))

    def element(self, value: Union[str, Sequence[int]]) -> "GroupElement":
        """Build an element from coordinates (lattice) or a word.

        Words may be given as letter indices or as a string: ``"abA"`` for
        free groups (upper case = inverse), ``"1 2 1"`` (1-based) for free
        products of Z/2.  The word is reduced on construction.
        """
        if self.kind == LATTICE:
            coords = tuple(int(c) for c in value)
            if len(coords) != self.rank:
                raise ValueError(f"expected {self.rank} coordinates, got {len(coords)}")
            return GroupElement(self, coords)
        if isinstance(value, str):
            letters = self._parse_word(value)
        else:
            letters = [int(v) for v in value]
        out = self.identity()
        for letter in letters:
            out = compose(out, self.generator(letter))
        return out

    def _parse_word(self, text: str) -> list:
        if self.kind == C2_PRODUCT:
            return [int(tok) - 1 for tok in text.replace(",", " ").split()]
        letters = []
        for ch in text.replace(" ", ""):
            i = _ALPHABET.find(ch.lower())
            if i < 0 or i >= self.rank:
                raise ValueError(f"letter {ch!r} not in F_{self.rank}")
            letters.append(2 * i + (1 if ch.isupper() else 0))
        return letters

    def __str__(self):
        name = {LATTICE: "Z^{}", FREE: "F_{}", C2_PRODUCT: "C2^*{}"}[self.kind]
        return name.format(self.rank)


@dataclass(frozen=True)
class GroupElement:
    """A point of the Cayley graph.

    ``value`` is a coordinate tuple for lattices and a reduced word (``bytes``
    of letter indices) for the tree-like groups.
    """

    spec: GroupSpec
    value: Union[tuple, bytes]

    def __post_init__(self):
        if self.spec.kind == LATTICE:
            return
        word = self.value
        inv = self.spec.inverse_table
        for a, b in zip(word, word[1:]):
            if inv[a] == b:
                raise ValueError(f"word {list(word)} is not reduced")
        if any(l >= self.spec.n_gens for l in word):
            raise ValueError("letter out of range")

    def __len__(self):
        return word_length(self)

    def __str__(self):
        if self.spec.kind == LATTICE:
            return str(self.value)
        if not self.value:
            return "e"
        return "".join(self.spec.letter_name(l) for l in self.value)


def _check_same(x: GroupElement, y: GroupElement) -> None:
    if x.spec != y.spec:
        raise GroupMismatchError(f"elements of {x.spec} and {y.spec} cannot be combined")


def compose(x: GroupElement, y: GroupElement) -> GroupElement:
    """Reduced product ``x * y``."""
    _check_same(x, y)
    if x.spec.kind == LATTICE:
        return GroupElement(x.spec, tuple(a + b for a, b in zip(x.value, y.value)))
    inv = x.spec.inverse_table
    stack = bytearray(x.value)
    for letter in y.value:
        if stack and inv[stack[-1]] == letter:
            stack.pop()
        else:
            stack.append(letter)
    return GroupElement(x.spec, bytes(stack))


def inverse(x: GroupElement) -> GroupElement:
    if x.spec.kind == LATTICE:
        return GroupElement(x.spec, tuple(-c for c in x.value))
    inv = x.spec.inverse_table
    return GroupElement(x.spec, bytes(int(inv[l]) for l in reversed(x.value)))


def word_length(x: GroupElement) -> int:
    if x.spec.kind == LATTICE:
        return sum(abs(c) for c in x.value)
    return len(x.value)


def word_distance(x: GroupElement, y: GroupElement) -> int:
    """Graph distance in the Cayley graph, i.e. the length of ``x^-1 y``."""
    _check_same(x, y)
    return word_length(compose(inverse(x), y))


def sphere_size(spec: GroupSpec, r: int) -> int:
    """Number of group elements at word distance exactly ``r`` from the identity."""
    if r < 0:
        return 0
    if r == 0:
        return 1
    if spec.kind == FREE:
        return 2 * spec.rank * (2 * spec.rank - 1) ** (r - 1)
    if spec.kind == C2_PRODUCT:
        return spec.rank * (spec.rank - 1) ** (r - 1)
    d = spec.rank
    return sum(2**k * math.comb(d, k) * math.comb(r - 1, k - 1) for k in range(1, min(d, r) + 1))


def ball_size(spec: GroupSpec, r: int) -> int:
    return sum(sphere_size(spec, j) for j in range(r + 1))


def growth_rate(spec: GroupSpec) -> float:
    """Exponential growth rate ``lim (1/n) log |B(o, n)|``."""
    if spec.kind == LATTICE:
        return 0.0
    if spec.kind == FREE:
        return math.log(2 * spec.rank - 1)
    return math.log(spec.rank - 1)


@dataclass(frozen=True)
class StepDistribution:
    """Symmetric step law on the generators plus the identity.

    ``weights[l]`` is the probability of letter ``l``; the last entry is the
    laziness ``q(e)``.
    """

    spec: GroupSpec
    weights: tuple
    _probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.spec.n_gens + 1,):
            raise ValueError(f"{self.spec} needs {self.spec.n_gens + 1} step weights, got {w.shape}")
        if np.any(w < 0):
            raise ValueError("step weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"step weights sum to {w.sum():.15g}, not 1")
        if not np.allclose(w, w[self.spec.inverse_table], atol=1e-15, rtol=0):
            raise ValueError("step law is not symmetric: q(s) != q(s^-1)")
        if np.any(w[:-1] <= 0):
            raise ValueError("every generator needs positive weight (supp q must contain S)")
        if w[-1] <= 0:
            raise ValueError("laziness q(e) must be positive")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))
        object.__setattr__(self, "_probs", w)

    @classmethod
    def lazy_uniform(cls, spec: GroupSpec, laziness: float) -> "StepDistribution":
        """Mass ``laziness`` on the identity, the rest uniform on the generators."""
        move = (1.0 - laziness) / spec.n_gens
        return cls(spec, tuple([move] * spec.n_gens + [laziness]))

    @classmethod
    def from_mapping(cls, spec: GroupSpec, weights: Mapping) -> "StepDistribution":
        """Weights keyed by letter index, letter name (``"a"``, ``"A"``, ``"s1"``, ``"+e1"``) or ``"e"``."""
        names = {spec.letter_name(l): l for l in range(spec.n_gens + 1)}
        w = [0.0] * (spec.n_gens + 1)
        for key, val in weights.items():
            letter = names[key] if isinstance(key, str) else int(key)
            w[letter] = float(val)
        return cls(spec, tuple(w))

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def laziness(self) -> float:
        return self.weights[-1]

    @property
    def is_radial(self) -> bool:
        """Equal weight on every generator."""
        move = self._probs[:-1]
        return bool(np.all(np.abs(move - move[0]) <= 1e-15))

    def __call__(self, letter: int) -> float:
        return self.weights[letter]
