"""Deterministic seed derivation.

All randomness in the package flows from numpy PCG64 generators whose seeds
are derived from a single master seed plus a path of labels, e.g.
``derive_seed(master, "tree", 17)``. Derivation uses splitmix64 so that
nearby master seeds and nearby paths give unrelated streams, and so that
results are reproducible across platforms (pure 64-bit integer arithmetic).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return (new_state, output word)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    z = z ^ (z >> 31)
    return state, z


def _fold(state: int, token: int) -> int:
    state, out = splitmix64(state ^ (token & _MASK))
    return out


def derive_seed(master: int, *path: int | str) -> int:
    """Derive a 64-bit seed from a master seed and a label path.

    Strings are folded 8 bytes at a time (UTF-8, length-prefixed) so that
    distinct paths cannot collide by concatenation.
    """
    state = _fold(master & _MASK, 0)
    for part in path:
        if isinstance(part, str):
            raw = part.encode("utf-8")
            state = _fold(state, len(raw) | (1 << 63))
            for i in range(0, len(raw), 8):
                state = _fold(state, int.from_bytes(raw[i : i + 8], "little"))
        else:
            state = _fold(state, int(part) & _MASK)
    return state


def generator(master: int, *path: int | str) -> np.random.Generator:
    """A PCG64 generator seeded from ``derive_seed(master, *path)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master, *path)))
