"""Elementary numeric helpers: dyadic approximation error, power towers,
iterated logarithms, and entropy / binomial-coefficient brackets.

Exact quantities are computed over ``fractions.Fraction`` / ``int``;
bracketing bounds are plain floats and never feed back into exact paths.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .errors import CapacityError

__all__ = [
    "err",
    "tow",
    "log_star",
    "TowerValue",
    "entropy",
    "entropy_bounds",
    "binom_bounds",
]

# Refuse tower levels whose binary representation would not fit in memory.
# tow(2, 5) = 2**65536 is a perfectly fine Python int; tow(2, 6) is not.
_TOW_EXPONENT_CAP = 1 << 24


def err(gamma: Fraction | int, t: int) -> Fraction:
    """Minimum distance of gamma to an integer multiple of 2**-t."""
    gamma = Fraction(gamma)
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    scaled = gamma * (1 << t)
    lo = math.floor(scaled)
    step = Fraction(1, 1 << t)
    return min(gamma - lo * step, (lo + 1) * step - gamma)


def tow(a: int, b: int) -> int:
    """Power tower of base a and height b: tow(a, 0) = 1, tow(a, b) = a**tow(a, b-1)."""
    if a < 2:
        raise ValueError(f"tower base must be at least 2, got {a}")
    if b < 0:
        raise ValueError(f"tower height must be nonnegative, got {b}")
    value = 1
    for _ in range(b):
        if value > _TOW_EXPONENT_CAP:
            raise CapacityError(f"tow({a}, {b}) does not fit in memory")
        value = a ** value
    return value


def log_star(x: Fraction | int | float) -> int:
    """Iterated base-2 logarithm: 0 for x <= 1, else 1 + log_star(log2(x)).

    Evaluated exactly on rationals by comparing against the dyadic
    thresholds tow(2, b), so log_star(tow(2, b)) == b holds exactly.
    """
    if isinstance(x, float):
        if math.isinf(x) or math.isnan(x):
            raise ValueError(f"log_star undefined for {x}")
        x = Fraction(x)
    else:
        x = Fraction(x)
    height = 0
    threshold = 1
    while x > threshold:
        height += 1
        if threshold > _TOW_EXPONENT_CAP:
            # Any in-memory rational is below 2**(2**65536).
            return height
        threshold = 2 ** threshold
    return height


class TowerValue:
    """Symbolic tow(2, height), comparable against ordinary numbers.

    Heights up to 4 convert to exact floats; taller towers exceed every
    float and are treated as +infinity in comparisons.
    """

    __slots__ = ("height",)

    def __init__(self, height: int):
        if height < 0:
            raise ValueError(f"height must be nonnegative, got {height}")
        self.height = height

    def exact(self) -> int:
        return tow(2, self.height)

    def __float__(self) -> float:
        if self.height <= 4:
            return float(tow(2, self.height))
        return math.inf

    def _cmp_key(self):
        return float(self)

    def __ge__(self, other):
        return self._cmp_key() >= _as_float(other)

    def __gt__(self, other):
        return self._cmp_key() > _as_float(other)

    def __le__(self, other):
        return self._cmp_key() <= _as_float(other)

    def __lt__(self, other):
        return self._cmp_key() < _as_float(other)

    def __eq__(self, other):
        if isinstance(other, TowerValue):
            return self.height == other.height
        return self._cmp_key() == _as_float(other)

    def __hash__(self):
        return hash(("TowerValue", self.height))

    def __repr__(self):
        return f"tow_2({self.height})"


def _as_float(value) -> float:
    if isinstance(value, TowerValue):
        return float(value)
    return float(value)


def entropy(x: float) -> float:
    """Binary entropy H(x) = x log2(1/x) + (1-x) log2(1/(1-x)), H(0) = H(1) = 0."""
    if not 0 <= x <= 1:
        raise ValueError(f"entropy argument must lie in [0, 1], got {x}")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def entropy_bounds(x: float) -> tuple[float, float]:
    """Bracket for H((1+x)/2) on x in [-1, 1]: 1 - x**2 <= H <= 1 - x**2/(2 ln 2)."""
    if not -1 <= x <= 1:
        raise ValueError(f"argument must lie in [-1, 1], got {x}")
    return 1 - x * x, 1 - x * x / (2 * math.log(2))


def binom_bounds(n: int, k: int) -> tuple[float, float]:
    """Bracket for C(n, k), valid for 1 <= k <= n-1.

    Lower: 2**(n H(k/n)) / sqrt(8 k (1 - k/n)); upper replaces 8 by pi.
    """
    if not 1 <= k <= n - 1:
        raise ValueError(f"binom_bounds requires 1 <= k <= n-1, got n={n}, k={k}")
    frac = k / n
    scale = 2.0 ** (n * entropy(frac))
    return scale / math.sqrt(8 * k * (1 - frac)), scale / math.sqrt(math.pi * k * (1 - frac))
