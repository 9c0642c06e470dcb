"""Low-locality sampling circuits for slice-type distributions.

Every builder returns ``(LocalFunction, SamplerPlan)``.  The plan records
the discretized stage distributions actually wired into the circuit, so
``structural_distribution`` computes the exact output law from the same
source of truth without enumerating inputs.  Circuits are deterministic
maps of fresh uniform input bits; no RNG is involved anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .dist import ExactDistribution, build_periodic, build_slice, tvd
from .errors import CapacityError, DiscrepancyError
from .localfn import Gate, LocalFunction, VirtualTable, make_gate

__all__ = [
    "Discretization",
    "distr_approx",
    "BitBudget",
    "SamplerPlan",
    "build_parity_mod2",
    "build_biased_truncated",
    "build_slice_recursive",
    "build_slice_sparse",
    "build_mod_sampler",
    "direct_approx_sampler",
    "structural_distribution",
    "ideal_sparse_distribution",
    "sparse_collision_probability",
]

# Gates wider than this carry virtual tables (see localfn.VirtualTable).
_MATERIALIZE_CAP = 16

# Mod-sampler structural computation enumerates q**blocks residue vectors.
_MOD_STRUCT_CAP = 32768

ZERO = Fraction(0)
ONE = Fraction(1)


def _check_eps(eps) -> Fraction:
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError(f"error budget must lie in (0, 1], got {eps}")
    return eps


def _bits_for(support: int, eps: Fraction) -> int:
    """ceil(log2(support/eps)); zero for a point support (constant folding)."""
    if support <= 1:
        return 0
    x = Fraction(support) / eps
    return max(0, (math.ceil(x) - 1).bit_length())


@dataclass(frozen=True)
class Discretization:
    """A distribution rounded to 2**-bits granularity plus its pattern map.

    ``counts[i]`` input patterns (of the 2**bits total) map to
    ``outcomes[i]``; counts are floor(B * p) with the remainder on the
    last outcome, so the induced distribution is exactly the discretized
    one and ``error`` = tvd(induced, target), always <= the stage budget.
    """

    outcomes: tuple
    counts: tuple[int, ...]
    bits: int
    error: Fraction
    eps: Fraction

    def distribution(self) -> ExactDistribution:
        B = 1 << self.bits
        return ExactDistribution({o: Fraction(c, B) for o, c in zip(self.outcomes, self.counts)
                                  if c > 0})

    def decode(self, pattern: int) -> object:
        """Outcome assigned to one input pattern (patterns fill outcomes in order)."""
        if not 0 <= pattern < (1 << self.bits):
            raise ValueError(f"pattern {pattern} outside [0, 2**{self.bits})")
        acc = 0
        for o, c in zip(self.outcomes, self.counts):
            acc += c
            if pattern < acc:
                return o
        raise AssertionError("pattern counts do not cover the pattern space")


def distr_approx(target: ExactDistribution, eps, bits: int | None = None) -> Discretization:
    """Discretize ``target`` onto ceil(log2(support/eps)) fresh uniform bits.

    A ``bits`` override may only widen the pattern space.  The exact
    discretization error is verified against ``eps`` before returning.
    """
    eps = _check_eps(eps)
    outcomes = target.domain
    support = len(outcomes)
    needed = _bits_for(support, eps)
    if bits is None:
        bits = needed
    elif bits < needed:
        raise ValueError(f"bits override {bits} below the required {needed}")
    B = 1 << bits
    counts = [math.floor(target.mass(o) * B) for o in outcomes[:-1]]
    counts.append(B - sum(counts))
    error = Fraction(counts[-1], B) - target.mass(outcomes[-1])
    if error > eps:
        raise DiscrepancyError(
            f"discretization error {error} exceeds budget {eps}", lhs=error, rhs=eps)
    return Discretization(tuple(outcomes), tuple(counts), bits, error, eps)


@dataclass(frozen=True)
class BitBudget:
    """One accounting line: a stage, its fresh bits, and its error budget."""

    stage: str
    bits: int
    eps: Fraction
    measured: Fraction | None = None


@dataclass
class SamplerPlan:
    kind: str
    n: int
    params: dict
    eps: Fraction
    budgets: list[BitBudget]
    structure: object
    total_bits: int
    declared_locality: int
    notes: list[str] = field(default_factory=list)

    def budget_total(self) -> Fraction:
        return sum((b.eps for b in self.budgets), ZERO)

    def report_text(self) -> str:
        lines = [f"PLAN v1 kind={self.kind} n={self.n}"]
        for key in sorted(self.params):
            lines.append(f"param {key}={_fmt(self.params[key])}")
        lines.append(
            f"summary total_bits={self.total_bits} declared_locality={self.declared_locality} "
            f"error_budget={_fmt(self.eps)} budget_sum={_fmt(self.budget_total())}")
        for b in self.budgets:
            measured = _fmt(b.measured) if b.measured is not None else "-"
            lines.append(f"budget stage={b.stage} bits={b.bits} eps={_fmt(b.eps)} "
                         f"measured={measured}")
        for note in self.notes:
            lines.append(f"note {note}")
        return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (set, frozenset)):
        return ",".join(str(v) for v in sorted(value))
    return str(value)


class _InputAllocator:
    def __init__(self):
        self.next_id = 1

    def take(self, bits: int) -> tuple[int, ...]:
        ids = tuple(range(self.next_id, self.next_id + bits))
        self.next_id += bits
        return ids

    @property
    def total(self) -> int:
        return self.next_id - 1


# ---------------------------------------------------------------------------
# Split trees: recursive halving with per-node discretized one-counts.

@dataclass
class _SplitNode:
    lo: int
    hi: int
    counts: tuple[int, ...]
    bits: int = 0
    input_ids: tuple[int, ...] = ()
    maps: dict = field(default_factory=dict)  # count -> Discretization
    left: "_SplitNode | None" = None
    right: "_SplitNode | None" = None

    @property
    def size(self) -> int:
        return self.hi - self.lo


def _hypergeometric(size: int, ell: int, n1: int) -> list[tuple[int, Fraction]]:
    lo = max(0, ell - (size - n1))
    hi = min(ell, n1)
    denom = math.comb(size, n1)
    return [(a, Fraction(math.comb(ell, a) * math.comb(size - ell, n1 - a), denom))
            for a in range(lo, hi + 1)]


def _build_split_tree(lo: int, hi: int, counts: Sequence[int], eps_node: Fraction,
                      alloc: _InputAllocator) -> _SplitNode:
    """Interval split tree over [lo, hi) able to place any count in ``counts``.

    The first part takes floor(size/2) positions.  Each internal node's bit
    width covers the largest support bound min(ell, |S1|) + 1 over its
    possible counts; nodes whose split is deterministic for every count
    consume no bits.
    """
    counts = tuple(sorted(set(counts)))
    node = _SplitNode(lo, hi, counts)
    size = hi - lo
    if size <= 1:
        return node
    n1 = size // 2
    supports = {ell: _hypergeometric(size, ell, n1) for ell in counts}
    max_true = max(len(s) for s in supports.values())
    bound = min(max(counts), n1) + 1
    bits = _bits_for(bound, eps_node) if max_true > 1 else 0
    node.bits = bits
    node.input_ids = alloc.take(bits)
    for ell, pairs in supports.items():
        target = ExactDistribution(dict(pairs)) if len(pairs) > 1 else None
        if target is None:
            node.maps[ell] = Discretization((pairs[0][0],), (1 << bits,), bits, ZERO, eps_node)
        else:
            node.maps[ell] = distr_approx(target, eps_node, bits=bits)
    left_counts = sorted({a for pairs in supports.values() for a, _ in pairs})
    right_counts = sorted({ell - a for ell, pairs in supports.items() for a, _ in pairs})
    node.left = _build_split_tree(lo, lo + n1, left_counts, eps_node, alloc)
    node.right = _build_split_tree(lo + n1, hi, right_counts, eps_node, alloc)
    return node


def _tree_leaf_paths(node: _SplitNode, path=()) -> dict[int, tuple]:
    """Map leaf position -> tuple of (node, went_left) pairs from the root."""
    if node.size <= 1:
        return {node.lo: path}
    out = {}
    out.update(_tree_leaf_paths(node.left, path + ((node, True),)))
    out.update(_tree_leaf_paths(node.right, path + ((node, False),)))
    return out


def _tree_decode_leaf(path, root_ell: int, bit_of) -> int:
    """Walk a root-to-leaf path decoding per-node patterns; returns the leaf count."""
    ell = root_ell
    for node, went_left in path:
        pattern = 0
        for pos, input_id in enumerate(node.input_ids):
            if bit_of(input_id):
                pattern |= 1 << pos
        a = node.maps[ell].decode(pattern)
        ell = a if went_left else ell - a
    return ell


def _tree_distribution(node: _SplitNode, ell: int, memo: dict) -> dict[str, Fraction]:
    key = (id(node), ell)
    got = memo.get(key)
    if got is not None:
        return got
    if node.size <= 1:
        out = {("1" if ell else "0") if node.size == 1 else "": ONE}
    else:
        out = {}
        disc = node.maps[ell]
        for a, count in zip(disc.outcomes, disc.counts):
            if count == 0:
                continue
            w = Fraction(count, 1 << disc.bits)
            left = _tree_distribution(node.left, a, memo)
            right = _tree_distribution(node.right, ell - a, memo)
            for ls, lw in left.items():
                for rs, rw in right.items():
                    key2 = ls + rs
                    out[key2] = out.get(key2, ZERO) + w * lw * rw
    memo[key] = out
    return out


def _tree_budgets(node: _SplitNode, label: str, out: list[BitBudget]) -> None:
    if node.size <= 1:
        return
    measured = max((d.error for d in node.maps.values()), default=ZERO)
    out.append(BitBudget(f"{label}[{node.lo},{node.hi})", node.bits,
                         node.maps[node.counts[0]].eps, measured))
    _tree_budgets(node.left, label, out)
    _tree_budgets(node.right, label, out)


def _tree_max_path_bits(node: _SplitNode) -> int:
    if node.size <= 1:
        return 0
    return node.bits + max(_tree_max_path_bits(node.left), _tree_max_path_bits(node.right))


def _gate_from_fn(inputs: tuple[int, ...], fn) -> Gate:
    """Materialize small tables eagerly; wide ones stay virtual."""
    k = len(inputs)
    if k <= _MATERIALIZE_CAP:
        return make_gate(inputs, tuple(fn(i) for i in range(1 << k)))
    return Gate(inputs, VirtualTable(fn, k))


def _path_gate(path, leaf_pos: int, root_ell: int, extra_offset: int = 0):
    """Gate for one tree leaf: inputs are the path nodes' bits, root first."""
    inputs = tuple(i for node, _ in path for i in node.input_ids)
    offsets = {}
    acc = extra_offset
    for node, _ in path:
        for input_id in node.input_ids:
            offsets[input_id] = acc
            acc += 1

    def bit_fn(idx: int) -> int:
        return _tree_decode_leaf(path, root_ell, lambda j: (idx >> offsets[j]) & 1)

    return inputs, offsets, bit_fn


# ---------------------------------------------------------------------------
# Parity / biased / direct builders.

@dataclass
class _ParityStructure:
    n: int
    odd: bool


def build_parity_mod2(n: int, odd: bool = False) -> tuple[LocalFunction, SamplerPlan]:
    """2-local ring of XORs whose output is exactly uniform over one parity class."""
    if n < 2:
        raise ValueError(f"parity sampler needs n >= 2, got {n}")
    xor = (0, 1, 1, 0)
    nxor = (1, 0, 0, 1)
    gates = [Gate((i, i + 1), xor) for i in range(1, n)]
    gates.append(Gate((n, 1), nxor if odd else xor))
    fn = LocalFunction(n, n, tuple(gates))
    plan = SamplerPlan("parity_mod2", n, {"odd": odd}, ZERO,
                       [BitBudget("parity", n, ZERO, ZERO)],
                       _ParityStructure(n, odd), n, 2)
    return fn, plan


@dataclass
class _BiasedStructure:
    n: int
    d: int
    numerator: int  # per-bit one-probability is numerator / 2**d


def build_biased_truncated(n: int, gamma, d: int) -> tuple[LocalFunction, SamplerPlan]:
    """Each output bit thresholds d fresh bits against the best d-bit dyadic
    approximation of gamma; the per-bit bias error is exactly err(gamma, d)."""
    from .numerics import err

    gamma = Fraction(gamma)
    if d < 1:
        raise ValueError(f"d must be at least 1, got {d}")
    scaled = gamma * (1 << d)
    lo = math.floor(scaled)
    numerator = lo if scaled - lo <= Fraction(1, 2) else lo + 1
    achieved = Fraction(numerator, 1 << d)
    assert abs(gamma - achieved) == err(gamma, d)
    alloc = _InputAllocator()
    gates = []
    for _ in range(n):
        if numerator in (0, 1 << d):
            gates.append(Gate((), (1 if numerator else 0,)))
        else:
            ids = alloc.take(d)
            gates.append(Gate(ids, tuple(1 if v < numerator else 0 for v in range(1 << d))))
    fn = LocalFunction(n, alloc.total, tuple(gates))
    per_bit = abs(gamma - achieved)
    plan = SamplerPlan("biased_truncated", n, {"gamma": gamma, "d": d}, per_bit * n,
                       [BitBudget(f"bit{i}", d if numerator not in (0, 1 << d) else 0,
                                  per_bit, per_bit) for i in range(1, n + 1)],
                       _BiasedStructure(n, d, numerator), alloc.total,
                       d if numerator not in (0, 1 << d) else 0)
    return fn, plan


@dataclass
class _DirectStructure:
    disc: Discretization


def direct_approx_sampler(target: ExactDistribution, eps,
                          params: dict | None = None) -> tuple[LocalFunction, SamplerPlan]:
    """Whole-distribution discretization: every output bit reads all
    ceil(log2(support/eps)) fresh bits and reproduces the rounded law exactly."""
    eps = _check_eps(eps)
    if target.n is None:
        raise ValueError("direct sampler requires a bitstring-valued target")
    n = target.n
    disc = distr_approx(target, eps)
    ids = tuple(range(1, disc.bits + 1))
    boundaries = []
    acc = 0
    for o, c in zip(disc.outcomes, disc.counts):
        acc += c
        boundaries.append((acc, o))

    def outcome_of(pattern: int) -> str:
        for bound, o in boundaries:
            if pattern < bound:
                return o
        raise AssertionError

    gates = []
    for i in range(1, n + 1):
        if disc.bits == 0:
            gates.append(Gate((), (1 if disc.outcomes[0][i - 1] == "1" else 0,)))
        else:
            gates.append(_gate_from_fn(ids, lambda idx, i=i: 1 if outcome_of(idx)[i - 1] == "1" else 0))
    fn = LocalFunction(n, disc.bits, tuple(gates))
    plan = SamplerPlan("direct_approx", n, dict(params or {}), eps,
                       [BitBudget("discretize", disc.bits, eps, disc.error)],
                       _DirectStructure(disc), disc.bits, disc.bits)
    return fn, plan


# ---------------------------------------------------------------------------
# Single-slice samplers.

@dataclass
class _TreeStructure:
    tree: _SplitNode
    root_count: int


def build_slice_recursive(n: int, k: int, eps) -> tuple[LocalFunction, SamplerPlan]:
    """Interval-halving sampler for the weight-k slice.

    Every internal node draws its first part's one-count from the
    discretized hypergeometric law (budget eps/n per node), so each output
    bit depends only on its ceil(log2 n) path nodes.  The output weight is
    exactly k by construction; only the placement can be off.
    """
    eps = _check_eps(eps)
    if not 0 <= k <= n:
        raise ValueError(f"slice weight k={k} out of range for n={n}")
    if n < 1:
        raise ValueError("n must be positive")
    eps_node = eps / n
    alloc = _InputAllocator()
    tree = _build_split_tree(0, n, (k,), eps_node, alloc)
    paths = _tree_leaf_paths(tree)
    gates = []
    for pos in range(n):
        path = paths[pos]
        inputs, _, bit_fn = _path_gate(path, pos, k)
        gates.append(_gate_from_fn(inputs, bit_fn))
    fn = LocalFunction(n, alloc.total, tuple(gates))
    budgets: list[BitBudget] = []
    _tree_budgets(tree, "node", budgets)
    plan = SamplerPlan("slice_recursive", n, {"k": k, "eps": eps}, eps, budgets,
                       _TreeStructure(tree, k), alloc.total, _tree_max_path_bits(tree))
    return fn, plan


@dataclass
class _SparseStructure:
    selection_plan: SamplerPlan
    block_sizes: tuple[int, ...]
    placements: tuple[Discretization | None, ...]  # None for size-1 blocks


def _sparse_blocks(n: int, t: int) -> tuple[int, ...]:
    big, rem = divmod(n, t)
    return tuple(big + 1 if i < rem else big for i in range(t))


def sparse_collision_probability(n: int, k: int, t: int) -> Fraction:
    """Pr over the exact weight-k slice that two ones land in one block."""
    sizes = _sparse_blocks(n, t)
    # Coefficient of z**k in prod (1 + h z) counts the collision-free strings.
    coeffs = [ONE] + [ZERO] * k
    for h in sizes:
        for j in range(min(k, len(coeffs) - 1), 0, -1):
            coeffs[j] += coeffs[j - 1] * h
    return 1 - coeffs[k] / math.comb(n, k)


def ideal_sparse_distribution(n: int, k: int, t: int) -> ExactDistribution:
    """The block process with exact selection and placement (no discretization)."""
    from itertools import combinations

    sizes = _sparse_blocks(n, t)
    offsets = [sum(sizes[:i]) for i in range(t)]
    out: dict[str, Fraction] = {}
    sel_weight = Fraction(1, math.comb(t, k))
    for chosen in combinations(range(t), k):
        placements = [ONE]
        strings = [""]
        for b in range(t):
            new_strings = []
            new_weights = []
            if b in chosen:
                for s, w in zip(strings, placements):
                    for p in range(sizes[b]):
                        bits = ["0"] * sizes[b]
                        bits[p] = "1"
                        new_strings.append(s + "".join(bits))
                        new_weights.append(w * Fraction(1, sizes[b]))
            else:
                for s, w in zip(strings, placements):
                    new_strings.append(s + "0" * sizes[b])
                    new_weights.append(w)
            strings, placements = new_strings, new_weights
        for s, w in zip(strings, placements):
            out[s] = out.get(s, ZERO) + sel_weight * w
    return ExactDistribution(out)


def build_slice_sparse(n: int, k: int, eps) -> tuple[LocalFunction, SamplerPlan]:
    """Sparse-slice sampler: pick k of ceil(2k^2/eps) blocks via the recursive
    sampler (budget eps/4), then drop one 1 uniformly in each chosen block
    (budget eps/(4k) per block); the block grid itself costs at most eps/2."""
    eps = _check_eps(eps)
    if not 0 <= k <= n:
        raise ValueError(f"slice weight k={k} out of range for n={n}")
    if k == 0:
        gates = tuple(Gate((), (0,)) for _ in range(n))
        fn = LocalFunction(n, 0, gates)
        sel_plan = SamplerPlan("slice_recursive", 0, {"k": 0, "eps": eps}, eps, [],
                               None, 0, 0)
        plan = SamplerPlan("slice_sparse", n, {"k": 0, "eps": eps, "t": 0}, eps, [],
                           _SparseStructure(sel_plan, (), ()), 0, 0)
        return fn, plan
    t = math.ceil(Fraction(2 * k * k) / eps)
    if t > n:
        raise ValueError(
            f"block count t={t} exceeds n={n}; use build_slice_recursive for this regime")
    assert Fraction(k * k, t) <= eps / 2
    sizes = _sparse_blocks(n, t)
    sel_fn, sel_plan = build_slice_recursive(t, k, eps / 4)
    alloc = _InputAllocator()
    alloc.take(sel_fn.m)  # selection circuit owns ids 1..m_sel
    eps_place = eps / (4 * k)
    placements: list[Discretization | None] = []
    placement_ids: list[tuple[int, ...]] = []
    for h in sizes:
        if h == 1:
            placements.append(None)
            placement_ids.append(())
        else:
            uniform = ExactDistribution({p: Fraction(1, h) for p in range(h)})
            disc = distr_approx(uniform, eps_place)
            placements.append(disc)
            placement_ids.append(alloc.take(disc.bits))

    gates = []
    for b, h in enumerate(sizes):
        sel_gate = sel_fn.gates[b]
        sel_inputs = sel_gate.inputs
        disc = placements[b]
        pids = placement_ids[b]
        for o in range(h):
            inputs = sel_inputs + pids

            def bit_fn(idx: int, sel_gate=sel_gate, disc=disc, o=o,
                       sel_width=len(sel_inputs)) -> int:
                sel_pattern = idx & ((1 << sel_width) - 1)
                if not sel_gate.table[sel_pattern]:
                    return 0
                if disc is None:
                    return 1
                return 1 if disc.decode(idx >> sel_width) == o else 0

            gates.append(_gate_from_fn(inputs, bit_fn))
    fn = LocalFunction(n, alloc.total, tuple(gates))
    budgets = [
        BitBudget("selection", sel_fn.m, eps / 4, None),
        BitBudget("placement", sum(d.bits for d in placements if d), eps / 4,
                  max((d.error for d in placements if d), default=ZERO)),
        BitBudget("block-grid", 0, eps / 2, sparse_collision_probability(n, k, t)),
    ]
    loc = max(
        (len(sel_fn.gates[b].inputs) + (placements[b].bits if placements[b] else 0)
         for b in range(t)), default=0)
    plan = SamplerPlan("slice_sparse", n, {"k": k, "eps": eps, "t": t}, eps, budgets,
                       _SparseStructure(sel_plan, sizes, tuple(placements)),
                       alloc.total, loc)
    return fn, plan


# ---------------------------------------------------------------------------
# Periodic-slice sampler.

@dataclass
class _ModStructure:
    q: int
    residues: tuple[int, ...]
    r_disc: Discretization | None  # None when a single residue is targeted
    fixed_residue: int | None
    block_sizes: tuple[int, ...]
    x_discs: tuple[Discretization, ...]
    w_discs: tuple[dict, ...]  # per block: residue y -> Discretization over counts
    trees: tuple[_SplitNode, ...]


def _residue_support_sizes(n: int, q: int, residues) -> dict[int, int]:
    out = {r: 0 for r in residues}
    for w in range(n + 1):
        r = w % q
        if r in out:
            out[r] += math.comb(n, w)
    return out


def build_mod_sampler(n: int, q: int, lam, eps, t_override: int | None = None,
                      theta: float = 1.0) -> tuple[LocalFunction, SamplerPlan]:
    """Sampler for the uniform distribution over strings with weight mod q
    in ``lam``.

    q = 2 routes to the exact XOR-ring (or the identity for the full
    residue set).  For q >= 3 the string is cut into floor(n/t) blocks
    with t ~ theta * q^2 * log2(n/eps); block weight targets are set by
    differences of fresh uniform residues so they telescope to a sampled
    target residue, each block draws its weight from the discretized
    conditional binomial, and a split tree places the ones.  When fewer
    than two blocks fit (or blocks cannot realize every residue), the
    sampler degrades to the direct discretization of the whole target.
    """
    eps = _check_eps(eps)
    if q < 2:
        raise ValueError(f"modulus q must be at least 2, got {q}")
    residues = tuple(sorted({v % q for v in lam}))
    if not residues:
        raise ValueError("lam must be non-empty")
    params = {"q": q, "lam": set(residues), "eps": eps,
              "t_override": t_override, "theta": theta}

    if q == 2 and n >= 2:
        if residues == (0, 1):
            from .localfn import identity_fn

            fn = identity_fn(n)
            plan = SamplerPlan("parity_mod2", n, params, ZERO,
                               [BitBudget("identity", n, ZERO, ZERO)],
                               _ParityStructure(n, False), n, 1)
            plan.notes.append("full residue set: the target is uniform; identity circuit")
            return fn, plan
        fn, plan = build_parity_mod2(n, odd=(residues == (1,)))
        plan.params.update(params)
        return fn, plan

    t = t_override if t_override is not None else max(
        1, math.ceil(theta * q * q * math.log2(max(2.0, n / float(eps)))))
    blocks = n // t if t >= 1 else 0
    if blocks < 2 or (n // blocks) < q - 1 or q == 2:
        fn, plan = direct_approx_sampler(build_periodic(n, q, residues), eps, params)
        plan.notes.append(
            f"degraded to direct discretization: t={t} leaves {max(blocks, 0)} block(s)")
        return fn, plan

    big, rem = divmod(n, blocks)
    sizes = tuple(big + 1 if i < rem else big for i in range(blocks))
    multi = len(residues) > 1
    eps_inner = eps / 2 if multi else eps
    eps_prime = Fraction(t) * eps_inner / (6 * n)

    alloc = _InputAllocator()
    r_disc = None
    fixed_residue = None
    r_ids: tuple[int, ...] = ()
    if multi:
        support = _residue_support_sizes(n, q, residues)
        total = sum(support.values())
        r_target = ExactDistribution({r: Fraction(support[r], total) for r in residues})
        r_disc = distr_approx(r_target, eps / 2)
        r_ids = alloc.take(r_disc.bits)
    else:
        fixed_residue = residues[0]

    uniform_q = ExactDistribution({v: Fraction(1, q) for v in range(q)})
    x_discs = []
    x_ids = []
    for _ in range(blocks):
        disc = distr_approx(uniform_q, eps_prime)
        x_discs.append(disc)
        x_ids.append(alloc.take(disc.bits))

    w_discs = []
    w_ids = []
    for h in sizes:
        denom = 1 << h
        per_y = {}
        max_support = 0
        for y in range(q):
            ws = [w for w in range(h + 1) if w % q == y]
            max_support = max(max_support, len(ws))
        bits = _bits_for(max_support, eps_prime)
        for y in range(q):
            ws = [w for w in range(h + 1) if w % q == y]
            mass = {w: Fraction(math.comb(h, w), denom) for w in ws}
            total = sum(mass.values(), ZERO)
            target = ExactDistribution({w: p / total for w, p in mass.items()})
            if len(ws) == 1:
                per_y[y] = Discretization((ws[0],), (1 << bits,), bits, ZERO, eps_prime)
            else:
                per_y[y] = distr_approx(target, eps_prime, bits=bits)
        w_discs.append(per_y)
        w_ids.append(alloc.take(bits))

    trees = []
    tree_paths = []
    for h in sizes:
        tree = _build_split_tree(0, h, range(h + 1), eps_prime / h, alloc)
        trees.append(tree)
        tree_paths.append(_tree_leaf_paths(tree))

    gates = []
    for b, h in enumerate(sizes):
        nxt = (b + 1) % blocks
        is_last = b == blocks - 1
        base_inputs = (r_ids if is_last and multi else ()) + x_ids[b] + x_ids[nxt] + w_ids[b]
        for o in range(h):
            path = tree_paths[b][o]
            tree_inputs = tuple(i for node, _ in path for i in node.input_ids)
            inputs = base_inputs + tree_inputs
            offsets = {j: p for p, j in enumerate(inputs)}

            def bit_fn(idx: int, b=b, nxt=nxt, is_last=is_last, path=path,
                       offsets=offsets) -> int:
                def field_val(ids, disc):
                    pattern = 0
                    for p, j in enumerate(ids):
                        if (idx >> offsets[j]) & 1:
                            pattern |= 1 << p
                    return disc.decode(pattern)

                if multi and is_last:
                    r_val = field_val(r_ids, r_disc)
                elif is_last:
                    r_val = fixed_residue
                else:
                    r_val = 0
                x_here = field_val(x_ids[b], x_discs[b])
                x_next = field_val(x_ids[nxt], x_discs[nxt])
                y = (x_here - x_next + r_val) % q
                w = field_val(w_ids[b], w_discs[b][y])
                return _tree_decode_leaf(path, w, lambda j: (idx >> offsets[j]) & 1)

            gates.append(_gate_from_fn(inputs, bit_fn))
    fn = LocalFunction(n, alloc.total, tuple(gates))

    budgets = []
    if multi:
        budgets.append(BitBudget("residue", r_disc.bits, eps / 2, r_disc.error))
    budgets.append(BitBudget("block-process", 0, eps_inner / 2, None))
    for b in range(blocks):
        budgets.append(BitBudget(f"x[{b}]", x_discs[b].bits, eps_prime, x_discs[b].error))
        budgets.append(BitBudget(f"w[{b}]", len(w_ids[b]), eps_prime,
                                 max(d.error for d in w_discs[b].values())))
        tb: list[BitBudget] = []
        _tree_budgets(trees[b], f"place{b}", tb)
        budgets.append(BitBudget(f"place[{b}]", sum(x.bits for x in tb), eps_prime,
                                 sum((x.measured for x in tb), ZERO)))
    loc = max((len(g.inputs) for g in gates), default=0)
    structure = _ModStructure(q, residues, r_disc, fixed_residue, sizes,
                              tuple(x_discs), tuple(w_discs), tuple(trees))
    plan = SamplerPlan("mod_sampler", n, params, eps, budgets, structure,
                       alloc.total, loc)
    plan.notes.append(f"t={t} blocks={blocks} sizes={','.join(map(str, sizes))}")
    return fn, plan


# ---------------------------------------------------------------------------
# Structural output distributions (no input enumeration).

def structural_distribution(plan: SamplerPlan) -> ExactDistribution:
    """Exact output law recomputed from the plan's stage distributions."""
    s = plan.structure
    if isinstance(s, _ParityStructure):
        return _parity_distribution(s)
    if isinstance(s, _BiasedStructure):
        return _biased_distribution(s)
    if isinstance(s, _DirectStructure):
        return s.disc.distribution()
    if isinstance(s, _TreeStructure):
        memo: dict = {}
        return ExactDistribution(_tree_distribution(s.tree, s.root_count, memo))
    if isinstance(s, _SparseStructure):
        return _sparse_distribution(plan, s)
    if isinstance(s, _ModStructure):
        return _mod_distribution(plan.n, s)
    raise ValueError(f"plan of kind {plan.kind!r} has no structural computation")


def _parity_distribution(s: _ParityStructure) -> ExactDistribution:
    if s.n > 25:
        raise CapacityError(f"materializing the parity class of n={s.n} exceeds the cap")
    want = 1 if s.odd else 0
    mass = Fraction(1, 1 << (s.n - 1))
    out = {}
    for v in range(1 << s.n):
        if bin(v).count("1") % 2 == want:
            out[format(v, f"0{s.n}b")] = mass
    return ExactDistribution(out)


def _biased_distribution(s: _BiasedStructure) -> ExactDistribution:
    from .dist import build_biased

    return build_biased(s.n, Fraction(s.numerator, 1 << s.d))


def _sparse_distribution(plan: SamplerPlan, s: _SparseStructure) -> ExactDistribution:
    if not s.block_sizes:
        return ExactDistribution({"0" * plan.n: ONE})
    selection = structural_distribution(s.selection_plan)
    block_one: list[dict[str, Fraction]] = []
    for h, disc in zip(s.block_sizes, s.placements):
        if disc is None:
            block_one.append({"1": ONE})
        else:
            T = disc.distribution()
            block_one.append({
                "".join("1" if p == pos else "0" for p in range(h)): T.mass(pos)
                for pos in range(h) if T.mass(pos) > 0})
    out: dict[str, Fraction] = {}
    for sel, w in selection.items():
        partials = {"": w}
        for b, h in enumerate(s.block_sizes):
            grown: dict[str, Fraction] = {}
            choices = block_one[b] if sel[b] == "1" else {"0" * h: ONE}
            for prefix, pw in partials.items():
                for piece, cw in choices.items():
                    grown[prefix + piece] = grown.get(prefix + piece, ZERO) + pw * cw
            partials = grown
        for string, pw in partials.items():
            out[string] = out.get(string, ZERO) + pw
    return ExactDistribution(out)


def _mod_distribution(n: int, s: _ModStructure) -> ExactDistribution:
    blocks = len(s.block_sizes)
    if s.q ** blocks > _MOD_STRUCT_CAP:
        raise CapacityError(
            f"structural enumeration of {s.q}**{blocks} residue vectors exceeds the cap")
    memo: dict = {}
    # Per block and target residue: exact law over the block's bitstrings.
    block_given_y: list[dict[int, dict[str, Fraction]]] = []
    for b, h in enumerate(s.block_sizes):
        per_y = {}
        for y in range(s.q):
            disc = s.w_discs[b][y]
            T = disc.distribution()
            agg: dict[str, Fraction] = {}
            for w in T.domain:
                tw = T.mass(w)
                placed = _tree_distribution(s.trees[b], w, memo)
                for string, pw in placed.items():
                    agg[string] = agg.get(string, ZERO) + tw * pw
            per_y[y] = agg
        block_given_y.append(per_y)

    r_items = (list(s.r_disc.distribution().items()) if s.r_disc is not None
               else [(s.fixed_residue, ONE)])
    x_dists = [d.distribution() for d in s.x_discs]

    out: dict[str, Fraction] = {}

    def rec(b: int, xs: list[int], weight: Fraction, r_val: int):
        if b == blocks:
            partials = {"": weight}
            for i in range(blocks):
                nxt = (i + 1) % blocks
                y = (xs[i] - xs[nxt] + (r_val if i == blocks - 1 else 0)) % s.q
                grown: dict[str, Fraction] = {}
                for prefix, pw in partials.items():
                    for piece, cw in block_given_y[i][y].items():
                        key = prefix + piece
                        grown[key] = grown.get(key, ZERO) + pw * cw
                partials = grown
            for string, pw in partials.items():
                out[string] = out.get(string, ZERO) + pw
            return
        for x, xw in x_dists[b].items():
            rec(b + 1, xs + [x], weight * xw, r_val)

    for r_val, rw in r_items:
        if rw > 0:
            rec(0, [], rw, r_val)
    return ExactDistribution(out)
