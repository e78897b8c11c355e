"""Integer position ids for particles, with vectorised steps.

Tree-like groups intern reduced words in a trie over the Cayley tree (which
*is* the trie: each element has a unique parent, its word minus the last
letter).  Ids are only meaningful inside one arena; ``canonical`` gives a
64-bit key that depends on the group element alone.  Lattice points are
packed into int64 directly.
"""
from __future__ import annotations

import numpy as np

from .groups import LATTICE, GroupElement, GroupSpec
from .rng import child_keys, mix64

_ROOT_KEY = np.uint64(0x243F6A8885A308D3)


class WordArena:
    """Append-only trie of reduced words.  Id 0 is the identity."""

    def __init__(self, spec: GroupSpec, capacity: int = 1024):
        if not spec.is_tree_like:
            raise ValueError("WordArena needs a free group or free product")
        self.spec = spec
        self.n_gens = spec.n_gens
        self._inv = spec.inverse_table
        self.size = 1
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.letter = np.full(capacity, -1, dtype=np.int64)
        self.depth = np.zeros(capacity, dtype=np.int64)
        self.key = np.zeros(capacity, dtype=np.uint64)
        self.child = np.full((capacity, self.n_gens), -1, dtype=np.int64)
        self.key[0] = _ROOT_KEY
        self.origin = 0

    def _grow(self, needed: int) -> None:
        cap = len(self.parent)
        if needed <= cap:
            return
        new = max(needed, 2 * cap)
        for name, fill in (("parent", -1), ("letter", -1), ("depth", 0), ("key", 0)):
            old = getattr(self, name)
            arr = np.full(new, fill, dtype=old.dtype)
            arr[:cap] = old
            setattr(self, name, arr)
        child = np.full((new, self.n_gens), -1, dtype=np.int64)
        child[:cap] = self.child
        self.child = child

    def step(self, ids: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Right-multiply each position by its step letter."""
        ids = np.asarray(ids, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        out = ids.copy()
        move = labels != self.n_gens
        last = self.letter[ids]
        back = move & (last >= 0) & (self._inv[np.maximum(last, 0)] == labels)
        out[back] = self.parent[ids[back]]
        fwd = np.nonzero(move & ~back)[0]
        if len(fwd) == 0:
            return out
        src, lab = ids[fwd], labels[fwd]
        found = self.child[src, lab]
        missing = found < 0
        if missing.any():
            pairs = src[missing] * self.n_gens + lab[missing]
            uniq, inverse = np.unique(pairs, return_inverse=True)
            start = self.size
            self._grow(start + len(uniq))
            new_ids = np.arange(start, start + len(uniq), dtype=np.int64)
            par, let = np.divmod(uniq, self.n_gens)
            self.parent[new_ids] = par
            self.letter[new_ids] = let
            self.depth[new_ids] = self.depth[par] + 1
            self.key[new_ids] = child_keys(self.key[par], let)
            self.child[par, let] = new_ids
            self.size = start + len(uniq)
            found[missing] = new_ids[inverse]
        out[fwd] = found
        return out

    def norm(self, ids: np.ndarray) -> np.ndarray:
        """Word length, i.e. distance to the identity."""
        return self.depth[np.asarray(ids, dtype=np.int64)]

    def canonical(self, ids: np.ndarray) -> np.ndarray:
        return self.key[np.asarray(ids, dtype=np.int64)]

    def encode(self, x: GroupElement) -> int:
        pos = np.zeros(1, dtype=np.int64)
        for letter in x.value:
            pos = self.step(pos, np.array([letter]))
        return int(pos[0])

    def decode(self, pid: int) -> GroupElement:
        letters = []
        pid = int(pid)
        while pid != 0:
            letters.append(int(self.letter[pid]))
            pid = int(self.parent[pid])
        return GroupElement(self.spec, bytes(reversed(letters)))


class LatticeCodec:
    """Z^d points packed into int64 with ``62 // d`` bits per coordinate."""

    def __init__(self, spec: GroupSpec, reach: int = 0):
        if spec.kind != LATTICE:
            raise ValueError("LatticeCodec needs an integer lattice")
        d = spec.rank
        self.spec = spec
        self.bits = 62 // d
        self.offset = 1 << (self.bits - 1)
        if reach >= self.offset:
            raise ValueError(f"reach {reach} exceeds the packed range +-{self.offset - 1} of Z^{d}")
        self._mask = (1 << self.bits) - 1
        self._shifts = [self.bits * i for i in range(d)]
        self.origin = sum(self.offset << s for s in self._shifts)
        delta = np.zeros(spec.n_gens + 1, dtype=np.int64)
        for i, s in enumerate(self._shifts):
            delta[2 * i] = 1 << s
            delta[2 * i + 1] = -(1 << s)
        self._delta = delta

    def step(self, ids: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return np.asarray(ids, dtype=np.int64) + self._delta[np.asarray(labels, dtype=np.int64)]

    def coords(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        return np.stack([((ids >> s) & self._mask) - self.offset for s in self._shifts], axis=-1)

    def norm(self, ids: np.ndarray) -> np.ndarray:
        return np.abs(self.coords(ids)).sum(axis=-1)

    def canonical(self, ids: np.ndarray) -> np.ndarray:
        return mix64(np.asarray(ids, dtype=np.int64).astype(np.uint64))

    def encode(self, x: GroupElement) -> int:
        if any(abs(c) >= self.offset for c in x.value):
            raise ValueError(f"{x} outside the packed range")
        return int(sum((c + self.offset) << s for c, s in zip(x.value, self._shifts)))

    def decode(self, pid: int) -> GroupElement:
        return GroupElement(self.spec, tuple(int(c) for c in self.coords(np.array([pid]))[0]))


def make_codec(spec: GroupSpec, reach: int = 0):
    """Position codec for ``spec``; ``reach`` bounds lattice coordinates."""
    if spec.kind == LATTICE:
        return LatticeCodec(spec, reach)
    return WordArena(spec)
