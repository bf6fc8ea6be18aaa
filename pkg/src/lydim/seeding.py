"""Deterministic, platform-independent derivation of per-task RNG seeds."""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix_seed(seed: int, index: int) -> int:
    """SplitMix64 finalizer of (seed advanced by index+1 golden-ratio steps).

    Pure 64-bit integer arithmetic, so the same (seed, index) gives the same
    stream seed on every platform; distinct indices give independent streams.
    """
    z = (int(seed) + (int(index) + 1) * _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK
