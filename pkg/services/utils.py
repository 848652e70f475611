"""
Shared helpers: basis bookkeeping, angle arithmetic and seeded randomness.

Basis convention used everywhere: qubit 1 is the most significant bit, so the
integer label of a basis state is x = sum_j x_j 2^(n-j). "|000> + |100>" is
therefore |0> + |4>.
"""
import math
from typing import List, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi

# Angle tolerance for zero-angle detection after merging
ANGLE_EPSILON = 1e-12


def index_to_bits(index: int, n: int) -> Tuple[int, ...]:
    """Bits (qubit 1 first) of a basis index."""
    return tuple((index >> (n - 1 - j)) & 1 for j in range(n))


def bits_to_index(bits: Sequence[int]) -> int:
    """Basis index of a bit tuple given qubit 1 first."""
    index = 0
    for bit in bits:
        index = (index << 1) | (int(bit) & 1)
    return index


def bitstring(index: int, n: int) -> str:
    return "".join(str(b) for b in index_to_bits(index, n))


def bit_reverse(index: int, n: int) -> int:
    return bits_to_index(tuple(reversed(index_to_bits(index, n))))


def normalize_angle(angle: float) -> float:
    """
    Reduce an angle modulo 4*pi into (-2*pi, 2*pi].

    A 4*pi shift leaves X and Y propagators unchanged and flips the global
    sign of Z and J propagators, so states evolve identically.
    """
    reduced = math.fmod(angle, FOUR_PI)
    if reduced <= -TWO_PI:
        reduced += FOUR_PI
    elif reduced > TWO_PI:
        reduced -= FOUR_PI
    if abs(reduced) < ANGLE_EPSILON:
        return 0.0
    return reduced


def is_multiple_of(angle: float, period: float) -> bool:
    remainder = math.fmod(abs(angle), period)
    return remainder < 1e-12 or period - remainder < 1e-12


def format_angle(angle: float) -> str:
    """
    Render an angle as a rational multiple of pi when it is one.

    Produces the tokens the pulse grammar accepts: "pi", "-pi/2", "5pi/8", or a
    plain float as fallback.
    """
    ratio = angle / math.pi
    for denominator in (1, 2, 3, 4, 6, 8, 12, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096):
        numerator = ratio * denominator
        rounded = round(numerator)
        if abs(numerator - rounded) < 1e-9:
            if rounded == 0:
                return "0"
            sign = "-" if rounded < 0 else ""
            magnitude = abs(rounded)
            head = "pi" if magnitude == 1 else f"{magnitude}pi"
            if denominator == 1:
                return f"{sign}{head}"
            return f"{sign}{head}/{denominator}"
    return repr(angle)


def spawn_generators(seed: int, count: int) -> List[np.random.Generator]:
    """Independent generators derived from one seed (order-stable)."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]
