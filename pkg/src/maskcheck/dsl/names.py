"""Variable-name utilities shared across the package.

Concrete (index-free) variable names look like ``A``, ``C[0][1]`` or
``rho[1][2][0]``: a base identifier followed by zero or more bracketed
integer indices. All deterministic orderings in the package sort such
names *naturally*, so ``C[0][2]`` precedes ``C[0][10]``.
"""

from __future__ import annotations

import re

_DIGIT_RUN = re.compile(r"(\d+)")

# Separator used for generated names (loop-accumulator versions, synthesized
# output bindings). "@" cannot appear in a source identifier, so generated
# names can never collide with user-written ones.
GENERATED_SEP = "@"


def flat_name(base: str, indices: tuple[int, ...] = ()) -> str:
    """Render a base identifier plus concrete indices as one flat name."""
    if not indices:
        return base
    return base + "".join(f"[{i}]" for i in indices)


def natural_key(name: str) -> tuple:
    """Sort key that orders embedded integers numerically.

    Text runs compare as strings, digit runs as integers, and the two kinds
    never meet: keys are (kind, value) pairs with kind 0 for text and 1 for
    numbers, so comparisons stay well-typed.
    """
    parts = _DIGIT_RUN.split(name)
    key = []
    for i, part in enumerate(parts):
        if i % 2:
            key.append((1, int(part)))
        elif part:
            key.append((0, part))
    return tuple(key)


def natural_sorted(names) -> list[str]:
    return sorted(names, key=natural_key)
