"""Exact finite probability distributions with rational masses.

Outcomes are either fixed-length 0/1 strings (the common case), tuples, or
scalar labels such as integers.  Every probability in this module is a
``fractions.Fraction``; nothing is ever rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .errors import CapacityError, ConditioningError, DomainMismatchError, FormatError

__all__ = [
    "ExactDistribution",
    "BoundReport",
    "tvd",
    "marginal",
    "condition",
    "product",
    "mix",
    "build_slice",
    "build_periodic",
    "build_biased",
    "build_uniform",
    "point_mass",
    "bernoulli",
    "eta",
    "eta_lower",
    "write_dist",
    "read_dist",
    "DENSE_BIT_CAP",
]

# Dense {0,1}**n representations are refused beyond this width.
DENSE_BIT_CAP = 26

ONE = Fraction(1)
ZERO = Fraction(0)


def _is_bitstring(outcome) -> bool:
    return isinstance(outcome, str) and all(c in "01" for c in outcome)


class ExactDistribution:
    """An immutable distribution with exact rational masses summing to 1.

    Outcomes are kept in canonical sorted order; zero-mass outcomes are
    dropped, so ``domain`` doubles as the support.
    """

    __slots__ = ("_mass", "_domain", "_n")

    def __init__(self, mass: Mapping):
        cleaned: dict = {}
        total = ZERO
        for outcome, p in mass.items():
            p = Fraction(p)
            if p < 0:
                raise ValueError(f"negative mass {p} on outcome {outcome!r}")
            total += p
            if p > 0:
                if outcome in cleaned:
                    raise ValueError(f"duplicate outcome {outcome!r}")
                cleaned[outcome] = p
        if total != 1:
            raise ValueError(f"masses sum to {total}, expected exactly 1")
        self._domain = tuple(sorted(cleaned))
        self._mass = {o: cleaned[o] for o in self._domain}
        self._n = None
        if self._domain and all(_is_bitstring(o) for o in self._domain):
            lengths = {len(o) for o in self._domain}
            if len(lengths) > 1:
                raise DomainMismatchError(f"bitstring outcomes of mixed lengths {sorted(lengths)}")
            self._n = lengths.pop()

    @property
    def domain(self) -> tuple:
        return self._domain

    @property
    def n(self) -> int | None:
        """Bitstring length when all outcomes are 0/1 strings, else None."""
        return self._n

    def mass(self, outcome) -> Fraction:
        return self._mass.get(outcome, ZERO)

    def items(self):
        return self._mass.items()

    def support(self) -> tuple:
        return self._domain

    def prob(self, event: Callable) -> Fraction:
        return sum((p for o, p in self._mass.items() if event(o)), ZERO)

    def map(self, fn: Callable) -> "ExactDistribution":
        """Push-forward distribution of fn applied to an outcome."""
        out: dict = {}
        for o, p in self._mass.items():
            key = fn(o)
            out[key] = out.get(key, ZERO) + p
        return ExactDistribution(out)

    def __len__(self):
        return len(self._domain)

    def __eq__(self, other):
        if not isinstance(other, ExactDistribution):
            return NotImplemented
        return self._mass == other._mass

    def __hash__(self):
        return hash(tuple(self._mass.items()))

    def __repr__(self):
        inner = ", ".join(f"{o!r}: {p}" for o, p in list(self._mass.items())[:6])
        more = ", ..." if len(self._domain) > 6 else ""
        return f"ExactDistribution({{{inner}{more}}})"


@dataclass(frozen=True)
class BoundReport:
    """An evaluated closed-form bound plus its precondition flags.

    ``conditions_met`` entries map a hypothesis name to True/False, or None
    when the hypothesis involves an unspecified universal constant.
    ``vacuous`` is set when the value is trivial in the bound's direction
    (<= 0 for lower bounds on a distance, >= 1 for upper bounds on a
    probability).  ``log_one_minus`` carries log(1 - value) whenever the
    value is within 1e-12 of 1, so near-1 bounds stay comparable.
    """

    name: str
    value: float
    conditions_met: tuple[tuple[str, bool | None], ...]
    vacuous: bool
    log_one_minus: float | None = None

    def all_conditions_true(self) -> bool:
        return all(flag is True for _, flag in self.conditions_met)

    def applicable(self) -> bool:
        return self.all_conditions_true() and not self.vacuous


def _check_same_kind(p: ExactDistribution, q: ExactDistribution) -> None:
    if p.n is not None and q.n is not None and p.n != q.n:
        raise DomainMismatchError(f"bitstring lengths differ: {p.n} vs {q.n}")


def tvd(p: ExactDistribution, q: ExactDistribution) -> Fraction:
    """Total variation distance (1/2) * sum |p(x) - q(x)|, exactly."""
    _check_same_kind(p, q)
    keys = set(p.domain) | set(q.domain)
    total = sum((abs(p.mass(x) - q.mass(x)) for x in keys), ZERO)
    return total / 2


def _coordinates(outcome) -> Sequence:
    if isinstance(outcome, str):
        return outcome
    if isinstance(outcome, tuple):
        return outcome
    raise DomainMismatchError(f"outcome {outcome!r} has no coordinates to project")


def marginal(p: ExactDistribution, coords: Iterable[int]) -> ExactDistribution:
    """Exact projection onto the 1-based coordinates in ``coords``."""
    coords = sorted(set(coords))
    if not coords:
        raise ValueError("marginal requires a non-empty coordinate set")
    out: dict = {}
    for o, mass_ in p.items():
        seq = _coordinates(o)
        if coords[-1] > len(seq):
            raise ValueError(f"coordinate {coords[-1]} out of range for outcome {o!r}")
        key = (
            "".join(seq[i - 1] for i in coords)
            if isinstance(o, str)
            else tuple(seq[i - 1] for i in coords)
        )
        out[key] = out.get(key, ZERO) + mass_
    return ExactDistribution(out)


def condition(p: ExactDistribution, event: Callable) -> ExactDistribution:
    """Renormalized restriction of p to the outcomes where event holds."""
    kept = {o: mass_ for o, mass_ in p.items() if event(o)}
    total = sum(kept.values(), ZERO)
    if total == 0:
        raise ConditioningError("conditioning event has zero probability")
    return ExactDistribution({o: mass_ / total for o, mass_ in kept.items()})


def product(ps: Sequence[ExactDistribution]) -> ExactDistribution:
    """Exact product distribution; bitstring factors concatenate."""
    if not ps:
        raise ValueError("product of zero distributions is undefined")
    all_bits = all(p.n is not None for p in ps)
    outcomes = [((), ONE)] if not all_bits else [("", ONE)]
    for p in ps:
        grown = []
        for prefix, w in outcomes:
            for o, mass_ in p.items():
                if all_bits:
                    grown.append((prefix + o, w * mass_))
                else:
                    part = o if isinstance(o, tuple) else (o,)
                    grown.append((prefix + part, w * mass_))
        outcomes = grown
    return ExactDistribution(dict(outcomes))


def mix(weights: Sequence, ps: Sequence[ExactDistribution]) -> ExactDistribution:
    """Exact convex combination sum_i weights[i] * ps[i]."""
    if len(weights) != len(ps):
        raise ValueError("weights and distributions differ in length")
    weights = [Fraction(w) for w in weights]
    if any(w < 0 for w in weights):
        raise ValueError("mixture weights must be nonnegative")
    if sum(weights, ZERO) != 1:
        raise ValueError(f"mixture weights sum to {sum(weights, ZERO)}, expected 1")
    out: dict = {}
    for w, p in zip(weights, ps):
        if w == 0:
            continue
        for o, mass_ in p.items():
            out[o] = out.get(o, ZERO) + w * mass_
    return ExactDistribution(out)


def _check_dense_cap(n: int) -> None:
    if n > DENSE_BIT_CAP:
        raise CapacityError(f"dense bitstring distribution over n={n} exceeds cap {DENSE_BIT_CAP}")


def _all_bitstrings(n: int):
    for v in range(1 << n):
        yield format(v, f"0{n}b")


def build_slice(n: int, k: int) -> ExactDistribution:
    """Uniform distribution over n-bit strings of Hamming weight exactly k."""
    if not 0 <= k <= n:
        raise ValueError(f"slice weight k={k} out of range for n={n}")
    _check_dense_cap(n)
    count = math.comb(n, k)
    mass_ = Fraction(1, count)
    out = {}
    for positions in _combinations_as_strings(n, k):
        out[positions] = mass_
    return ExactDistribution(out)


def _combinations_as_strings(n: int, k: int):
    from itertools import combinations

    for ones in combinations(range(n), k):
        chars = ["0"] * n
        for i in ones:
            chars[i] = "1"
        yield "".join(chars)


def build_periodic(n: int, q: int, lam: Iterable[int]) -> ExactDistribution:
    """Uniform over n-bit strings whose weight mod q lies in lam."""
    if q < 2:
        raise ValueError(f"modulus q must be at least 2, got {q}")
    lam = {v % q for v in lam}
    if not lam:
        raise ValueError("lam must be non-empty")
    _check_dense_cap(n)
    support_size = sum(math.comb(n, w) for w in range(n + 1) if w % q in lam)
    mass_ = Fraction(1, support_size)
    out = {}
    for s in _all_bitstrings(n):
        if s.count("1") % q in lam:
            out[s] = mass_
    return ExactDistribution(out)


def build_biased(n: int, gamma) -> ExactDistribution:
    """Product of n independent bits, each 1 with probability gamma."""
    gamma = Fraction(gamma)
    if not 0 <= gamma <= 1:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    _check_dense_cap(n)
    if n == 0:
        return ExactDistribution({"": ONE})
    return product([bernoulli(gamma)] * n)


def build_uniform(n: int) -> ExactDistribution:
    """Uniform distribution over {0,1}**n."""
    return build_biased(n, Fraction(1, 2))


def point_mass(outcome) -> ExactDistribution:
    return ExactDistribution({outcome: ONE})


def bernoulli(gamma) -> ExactDistribution:
    """Single-bit distribution with P(1) = gamma."""
    gamma = Fraction(gamma)
    return ExactDistribution({"0": 1 - gamma, "1": gamma})


def eta(n: int, q: int, lam: Iterable[int]) -> Fraction:
    """Exact support fraction of the periodic slice: |supp| * 2**-n.

    Computed from binomial sums, so it works far beyond the dense cap.
    """
    if q < 2:
        raise ValueError(f"modulus q must be at least 2, got {q}")
    lam = {v % q for v in lam}
    if not lam:
        raise ValueError("lam must be non-empty")
    support = sum(math.comb(n, w) for w in range(n + 1) if w % q in lam)
    return Fraction(support, 1 << n)


def eta_lower(n: int, q: int) -> float:
    """Closed-form lower bound 2**(-q**2/n) / sqrt(2n) for the support fraction."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return 2.0 ** (-(q * q) / n) / math.sqrt(2 * n)


def write_dist(p: ExactDistribution, path) -> None:
    """Serialize a bitstring distribution as DIST v1 (exact round-trip)."""
    if p.n is None:
        raise FormatError("DIST v1 files hold bitstring distributions only")
    lines = [f"DIST v1 n={p.n}"]
    for o, mass_ in p.items():
        lines.append(f"{o},{mass_.numerator},{mass_.denominator}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dist(path) -> ExactDistribution:
    with open(path, encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or not lines[0].startswith("DIST v1 n="):
        raise FormatError("missing DIST v1 header")
    try:
        n = int(lines[0].split("n=", 1)[1])
    except ValueError as exc:
        raise FormatError(f"bad DIST header: {lines[0]!r}") from exc
    out = {}
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"bad DIST record: {line!r}")
        outcome, num, den = parts
        if len(outcome) != n or not _is_bitstring(outcome):
            raise FormatError(f"bad outcome {outcome!r} for n={n}")
        out[outcome] = Fraction(int(num), int(den))
    return ExactDistribution(out)
