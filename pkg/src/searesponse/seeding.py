"""Deterministic 64-bit seed derivation.

Every stochastic stage takes one explicit base seed; per-task seeds are
derived with the splitmix64 finalizer so that (realization, hour) pairs map
to independent streams regardless of execution order or thread count.
"""

_MASK = (1 << 64) - 1

# Context tags keep seed streams of different pipeline stages disjoint even
# when the same (base, index) pair occurs in more than one of them.
TAG_WEATHER = 0x11
TAG_DESIGN = 0x22
TAG_SIM = 0x33
TAG_SPLIT = 0x44
TAG_GP_INIT = 0x55
TAG_THETA = 0x66
TAG_COUNT = 0x77
TAG_VALUES = 0x88
TAG_QOI = 0x99
TAG_SUBSAMPLE = 0xAA


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective 64-bit mixer with full avalanche."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def derive_seed(base: int, *parts: int) -> int:
    """Fold integer coordinates into the base seed, one mix step per part."""
    s = mix64(base & _MASK)
    for p in parts:
        s = mix64(s ^ (p & _MASK))
    return s
