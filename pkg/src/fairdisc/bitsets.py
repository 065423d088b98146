"""Bitmask encoding of item subsets: bit j set means item j is in the subset.

Item counts are capped at 64 so every subset fits in a plain int.
"""

MAX_ITEMS = 64


def full_mask(m: int) -> int:
    """Mask with all m item bits set."""
    return (1 << m) - 1


def mask_of(items) -> int:
    """Bitmask of an iterable of item indices."""
    mask = 0
    for j in items:
        mask |= 1 << int(j)
    return mask


def bits(mask: int) -> list:
    """Indices of set bits, ascending."""
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


def popcount(mask: int) -> int:
    return int(mask).bit_count()
