"""Keyed (counter-based) randomness.

Every tree node carries a 64-bit key.  A child's key is a hash of its
parent's key and its birth slot, and every random quantity attached to the
node (offspring count, step, selection priority, thinning coin) is a hash of
the key and a stream tag.  Results therefore depend only on
``(master_seed, cell, replica)``, never on batching or scheduling, and runs
that share a root key are coupled node by node.
"""
from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / (1 << 53)

# stream tags
OFFSPRING = 1
STEP = 2
PRIORITY = 3
THIN = 4
INVASIVE = 5


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 arrays."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def child_keys(parent_keys: np.ndarray, slots: np.ndarray) -> np.ndarray:
    slots = np.asarray(slots, dtype=np.uint64) + np.uint64(1)
    return mix64(np.asarray(parent_keys, dtype=np.uint64) + slots * _GOLDEN)


def tagged(keys: np.ndarray, tag: int) -> np.ndarray:
    """Derive an independent key family, e.g. the invasive process of a replica."""
    return mix64(np.asarray(keys, dtype=np.uint64) ^ mix64(np.full(1, tag, dtype=np.uint64)))


def uniforms(keys: np.ndarray, stream: int) -> np.ndarray:
    """One U[0,1) draw per key for the given stream."""
    salt = mix64(np.array([stream], dtype=np.uint64) * _GOLDEN)
    bits = mix64(np.asarray(keys, dtype=np.uint64) ^ salt)
    return (bits >> _S11).astype(np.float64) * _INV53


def cell_id(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=4).digest(), "little")


def root_keys(master_seed: int, cell: str, replicas) -> np.ndarray:
    """Root keys for the given replica indices of an experiment cell."""
    replicas = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    cid = cell_id(cell)
    out = np.empty(len(replicas), dtype=np.uint64)
    for i, r in enumerate(replicas):
        seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(cid, int(r)))
        out[i] = seq.generate_state(1, dtype=np.uint64)[0]
    return out


class AliasTable:
    """Walker/Vose alias table: one uniform per draw."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        k = len(probs)
        scaled = probs * k / probs.sum()
        prob = np.ones(k)
        alias = np.arange(k)
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        for i in small + large:
            prob[i] = 1.0
        self.k = k
        self.prob = prob
        self.alias = alias

    def sample(self, u: np.ndarray) -> np.ndarray:
        x = np.asarray(u) * self.k
        idx = np.minimum(x.astype(np.int64), self.k - 1)
        frac = x - idx
        return np.where(frac < self.prob[idx], idx, self.alias[idx])

    def draw(self, rng: np.random.Generator, size=None):
        return self.sample(rng.random(size))
