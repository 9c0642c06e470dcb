"""Explicit d-local circuits: per-output-bit input sets and truth tables.

Truth-table convention: a gate's input list position 0 is the least
significant bit of its table index.  Gates whose fan-in exceeds a
materialization threshold carry a lazily evaluated virtual table; it
behaves like a bit vector of length 2**fan_in but is computed per index,
which is what makes wide constructions representable at all.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Mapping, Sequence

from .dist import ExactDistribution, build_biased, tvd
from .errors import CapacityError, FormatError
from .graphs import BipartiteGraph

__all__ = [
    "Gate",
    "LocalFunction",
    "VirtualTable",
    "NeighborhoodReport",
    "make_gate",
    "evaluate",
    "dependency_graph",
    "neighborhoods",
    "locality",
    "deg",
    "non_connected",
    "restrict",
    "output_distribution_enum",
    "classify_neighborhoods",
    "resampling_stat",
    "write_localfn",
    "read_localfn",
    "enum_cap",
    "identity_fn",
]

DEFAULT_ENUM_CAP = 24


def enum_cap() -> int:
    """Input-enumeration cap in bits; SLICEKIT_CAP_BITS overrides at the user's risk."""
    raw = os.environ.get("SLICEKIT_CAP_BITS")
    return int(raw) if raw else DEFAULT_ENUM_CAP


class VirtualTable:
    """Truth table of length 2**nbits evaluated per index on demand."""

    __slots__ = ("_fn", "nbits", "length")

    def __init__(self, fn: Callable[[int], int], nbits: int):
        self._fn = fn
        self.nbits = nbits
        self.length = 1 << nbits

    def __getitem__(self, idx: int) -> int:
        if not 0 <= idx < self.length:
            raise IndexError(idx)
        return self._fn(idx)

    def materialize(self) -> tuple[int, ...]:
        if self.nbits > enum_cap():
            raise CapacityError(f"materializing a {self.nbits}-input table exceeds the cap")
        return tuple(self._fn(i) for i in range(self.length))

    def __repr__(self):
        return f"VirtualTable(nbits={self.nbits})"


def _table_length(table) -> int:
    return table.length if isinstance(table, VirtualTable) else len(table)


@dataclass(frozen=True)
class Gate:
    """One output bit: ordered distinct input indices plus its truth table."""

    inputs: tuple[int, ...]
    table: Sequence[int]

    def fan_in(self) -> int:
        return len(self.inputs)


def make_gate(inputs: Sequence[int], table: Sequence[int]) -> Gate:
    """Build a gate, folding constant tables down to fan-in zero."""
    inputs = tuple(inputs)
    table = tuple(int(b) for b in table)
    if inputs and all(b == table[0] for b in table):
        return Gate((), (table[0],))
    return Gate(inputs, table)


@dataclass(frozen=True)
class LocalFunction:
    """An m-input, n-output circuit; gates[i] computes output bit i+1.

    ``input_labels``, when present, maps each current input index back to
    its index before a restriction (metadata only, excluded from equality).
    """

    n: int
    m: int
    gates: tuple[Gate, ...]
    input_labels: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.gates) != self.n:
            raise ValueError(f"{len(self.gates)} gates for n={self.n} outputs")
        for i, g in enumerate(self.gates, start=1):
            if len(set(g.inputs)) != len(g.inputs):
                raise ValueError(f"gate {i} repeats an input index")
            for j in g.inputs:
                if not 1 <= j <= self.m:
                    raise ValueError(f"gate {i} reads input {j}, outside [1..{self.m}]")
            if _table_length(g.table) != 1 << len(g.inputs):
                raise ValueError(
                    f"gate {i} table has length {_table_length(g.table)}, "
                    f"expected {1 << len(g.inputs)}")

    def input_set(self, i: int) -> frozenset:
        return frozenset(self.gates[i - 1].inputs)


def identity_fn(n: int) -> LocalFunction:
    """Bit i reads input i verbatim."""
    return LocalFunction(n, n, tuple(Gate((i,), (0, 1)) for i in range(1, n + 1)))


def evaluate(f: LocalFunction, x: str) -> str:
    if len(x) != f.m:
        raise ValueError(f"input has {len(x)} bits, circuit expects {f.m}")
    bits = []
    for g in f.gates:
        idx = 0
        for t, j in enumerate(g.inputs):
            if x[j - 1] == "1":
                idx |= 1 << t
        bits.append("1" if g.table[idx] else "0")
    return "".join(bits)


def dependency_graph(f: LocalFunction) -> BipartiteGraph:
    return BipartiteGraph(f.n, f.m, [g.inputs for g in f.gates])


def neighborhoods(f: LocalFunction) -> list[frozenset]:
    """N(i) = {i} plus the output bits sharing an input bit with i."""
    sets = [frozenset(g.inputs) for g in f.gates]
    out = []
    for i in range(1, f.n + 1):
        own = sets[i - 1]
        members = {i}
        for i2 in range(1, f.n + 1):
            if i2 != i and own & sets[i2 - 1]:
                members.add(i2)
        out.append(frozenset(members))
    return out


def locality(f: LocalFunction) -> int:
    return max((g.fan_in() for g in f.gates), default=0)


def deg(f: LocalFunction, j: int) -> int:
    """Number of output bits that read input j."""
    if not 1 <= j <= f.m:
        raise ValueError(f"input index {j} outside [1..{f.m}]")
    return sum(1 for g in f.gates if j in g.inputs)


def non_connected(f: LocalFunction, outputs: Sequence[int], flavor: str = "vertices") -> bool:
    """Pairwise non-connectedness of output bits (or of their neighborhoods)."""
    if flavor == "vertices":
        sets = [f.input_set(i) for i in outputs]
    elif flavor == "neighborhoods":
        hoods = neighborhoods(f)
        sets = []
        for i in outputs:
            closure: set = set()
            for u in hoods[i - 1]:
                closure |= f.input_set(u)
            sets.append(closure)
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    for a, b in combinations(sets, 2):
        if a & b:
            return False
    return True


def restrict(f: LocalFunction, fixed: Mapping[int, int]) -> LocalFunction:
    """Substitute fixed input bits; surviving inputs are renumbered in order.

    The original index of each surviving input is recorded in
    ``input_labels``.  Tables that become constant fold to fan-in zero.
    """
    for j in fixed:
        if not 1 <= j <= f.m:
            raise ValueError(f"restriction fixes input {j}, outside [1..{f.m}]")
    survivors = [j for j in range(1, f.m + 1) if j not in fixed]
    renumber = {j: p for p, j in enumerate(survivors, start=1)}
    new_gates = []
    for g in f.gates:
        free = [(t, j) for t, j in enumerate(g.inputs) if j not in fixed]
        base = 0
        for t, j in enumerate(g.inputs):
            if j in fixed and fixed[j]:
                base |= 1 << t
        table = []
        for v in range(1 << len(free)):
            idx = base
            for pos, (t, _) in enumerate(free):
                if (v >> pos) & 1:
                    idx |= 1 << t
            table.append(int(g.table[idx]))
        new_gates.append(make_gate(tuple(renumber[j] for _, j in free), table))
    return LocalFunction(f.n, len(survivors), tuple(new_gates),
                         input_labels=tuple(survivors))


def _bernoulli_weights(f: LocalFunction, input_dist) -> list[tuple[Fraction, Fraction]]:
    if input_dist is None:
        half = Fraction(1, 2)
        return [(half, half)] * f.m
    probs = [Fraction(p) for p in input_dist]
    if len(probs) != f.m:
        raise ValueError(f"{len(probs)} input probabilities for m={f.m}")
    return [(1 - p, p) for p in probs]


def output_distribution_enum(f: LocalFunction, input_dist=None,
                             outputs: Sequence[int] | None = None) -> ExactDistribution:
    """Exact output distribution by enumerating the relevant input closure.

    ``input_dist`` is a sequence of per-input one-probabilities (product of
    Bernoullis); None means uniform.  With ``outputs`` given, only the
    inputs feeding those bits are enumerated, and the result is the
    marginal on those bits in ascending order.
    """
    outs = tuple(range(1, f.n + 1)) if outputs is None else tuple(sorted(set(outputs)))
    for i in outs:
        if not 1 <= i <= f.n:
            raise ValueError(f"output index {i} outside [1..{f.n}]")
    relevant = sorted(set().union(*(f.gates[i - 1].inputs for i in outs)) if outs else set())
    if len(relevant) > enum_cap():
        raise CapacityError(
            f"enumeration over {len(relevant)} inputs exceeds the cap {enum_cap()}")
    position = {j: p for p, j in enumerate(relevant)}
    specs = []
    for i in outs:
        g = f.gates[i - 1]
        specs.append((tuple(position[j] for j in g.inputs), g.table))

    uniform = input_dist is None
    weights = None if uniform else _bernoulli_weights(f, input_dist)
    counts: dict[str, int] = {}
    masses: dict[str, Fraction] = {}
    for v in range(1 << len(relevant)):
        bits = []
        for positions, table in specs:
            idx = 0
            for t, p in enumerate(positions):
                if (v >> p) & 1:
                    idx |= 1 << t
            bits.append("1" if table[idx] else "0")
        key = "".join(bits)
        if uniform:
            counts[key] = counts.get(key, 0) + 1
        else:
            w = Fraction(1)
            for p, j in enumerate(relevant):
                w *= weights[j - 1][(v >> p) & 1]
            masses[key] = masses.get(key, Fraction(0)) + w
    if uniform:
        denom = 1 << len(relevant)
        return ExactDistribution({k: Fraction(c, denom) for k, c in counts.items()})
    return ExactDistribution(masses)


@dataclass(frozen=True)
class NeighborhoodReport:
    """Exact marginal of one output neighborhood and its Type-1/Type-2 label.

    Type-1 means strictly farther than epsilon from the product target;
    ties classify as Type-2 ("epsilon-close" includes equality).
    """

    center: int
    members: tuple[int, ...]
    size: int
    marginal: ExactDistribution
    distance_to_target: Fraction
    kind: str
    epsilon: Fraction


def classify_neighborhoods(f: LocalFunction, gamma, epsilon,
                           input_dist=None) -> list[NeighborhoodReport]:
    """Label every neighborhood Type-1/Type-2 against the gamma-biased product."""
    gamma, epsilon = Fraction(gamma), Fraction(epsilon)
    reports = []
    for center, members in enumerate(neighborhoods(f), start=1):
        members = tuple(sorted(members))
        marg = output_distribution_enum(f, input_dist=input_dist, outputs=members)
        target = build_biased(len(members), gamma)
        dist = tvd(marg, target)
        kind = "Type-1" if dist > epsilon else "Type-2"
        reports.append(NeighborhoodReport(center, members, len(members), marg,
                                          dist, kind, epsilon))
    return reports


def resampling_stat(f: LocalFunction, ell: int, modulus: int | None = None,
                    input_dist=None) -> float:
    """E over fixings of the inputs outside I(ell) of the squared best guess
    for the Hamming sum of N(ell), optionally reduced mod ``modulus``.

    Computed exactly, then converted to float.
    """
    if not 1 <= ell <= f.n:
        raise ValueError(f"output index {ell} outside [1..{f.n}]")
    members = sorted(neighborhoods(f)[ell - 1])
    closure = sorted(set().union(*(f.gates[i - 1].inputs for i in members)) if members else set())
    if len(closure) > enum_cap():
        raise CapacityError(f"neighborhood closure of {len(closure)} inputs exceeds the cap")
    own = f.input_set(ell)
    outside = [j for j in closure if j not in own]
    inside = [j for j in closure if j in own]
    weights = _bernoulli_weights(f, input_dist)

    specs = []
    for i in members:
        g = f.gates[i - 1]
        specs.append((g.inputs, g.table))

    def sum_given(assignment: dict[int, int]) -> int:
        total = 0
        for inputs, table in specs:
            idx = 0
            for t, j in enumerate(inputs):
                if assignment[j]:
                    idx |= 1 << t
            total += 1 if table[idx] else 0
        return total

    expectation = Fraction(0)
    for vo in range(1 << len(outside)):
        assignment = {j: (vo >> p) & 1 for p, j in enumerate(outside)}
        w_out = Fraction(1)
        for p, j in enumerate(outside):
            w_out *= weights[j - 1][(vo >> p) & 1]
        sums: dict[int, Fraction] = {}
        for vi in range(1 << len(inside)):
            w_in = Fraction(1)
            for p, j in enumerate(inside):
                assignment[j] = (vi >> p) & 1
                w_in *= weights[j - 1][(vi >> p) & 1]
            value = sum_given(assignment)
            if modulus is not None:
                value %= modulus
            sums[value] = sums.get(value, Fraction(0)) + w_in
        p_best = max(sums.values())
        expectation += w_out * p_best * p_best
    return float(expectation)


def write_localfn(f: LocalFunction, path) -> None:
    """Serialize as LOCALFN v1 (table index LSB = first listed input)."""
    cap = enum_cap()
    lines = [f"LOCALFN v1 n={f.n} m={f.m}"]
    for i, g in enumerate(f.gates, start=1):
        if g.fan_in() > cap:
            raise CapacityError(f"gate {i} fan-in {g.fan_in()} exceeds the write cap {cap}")
        table = g.table.materialize() if isinstance(g.table, VirtualTable) else g.table
        lines.append(
            f"bit {i}: inputs=" + ",".join(str(j) for j in g.inputs)
            + " table=" + "".join("1" if b else "0" for b in table))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_localfn(path) -> LocalFunction:
    with open(path, encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or not lines[0].startswith("LOCALFN v1 "):
        raise FormatError("missing LOCALFN v1 header")
    try:
        header = dict(tok.split("=") for tok in lines[0].split()[2:])
        n, m = int(header["n"]), int(header["m"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad LOCALFN header: {lines[0]!r}") from exc
    if len(lines) - 1 != n:
        raise FormatError(f"expected {n} gate lines, got {len(lines) - 1}")
    gates = []
    for idx, line in enumerate(lines[1:], start=1):
        prefix = f"bit {idx}: inputs="
        if not line.startswith(prefix) or " table=" not in line:
            raise FormatError(f"bad LOCALFN record: {line!r}")
        rest = line[len(prefix):]
        inputs_part, table_part = rest.split(" table=", 1)
        inputs = tuple(int(tok) for tok in inputs_part.split(",")) if inputs_part else ()
        if not set(table_part) <= {"0", "1"}:
            raise FormatError(f"bad table string in {line!r}")
        gates.append(Gate(inputs, tuple(int(c) for c in table_part)))
    try:
        return LocalFunction(n, m, tuple(gates))
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
