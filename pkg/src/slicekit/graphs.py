"""Bipartite dependency graphs and the right-vertex elimination procedures.

A graph has left vertices [n] (output bits), right vertices [m] (input
bits), and is d-left-bounded when every left vertex has degree at most d.
The elimination procedures delete few right vertices to expose many
pairwise non-connected left vertices, or non-connected left neighborhoods
of small size.  Deleting right vertices never changes the degree of a
surviving right vertex, which the procedures quietly rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    CapacityError,
    EliminationError,
    EliminationInvariantError,
    FormatError,
)

__all__ = [
    "BipartiteGraph",
    "EliminationResult",
    "vertex_elim_threshold",
    "find_heavy_batch_vtx",
    "eliminate_vertices",
    "greedy_nonconnected",
    "find_heavy_batch_neigh",
    "eliminate_neighborhoods",
    "brute_force_best_elimination",
    "max_nonconnected",
    "non_connected_vertices",
    "non_connected_neighborhoods",
    "assert_selection_nonconnected",
    "random_left_bounded",
    "write_graph",
    "read_graph",
]

# Comparisons of float-valued schedule quantities against integer thresholds
# use this relative tolerance; exact (Fraction) schedules bypass it.
_TOL = 1e-9

_BRUTE_LEFT_CAP = 20
_BRUTE_RIGHT_CAP = 16


def _ge(a: float, b: float) -> bool:
    return a >= b - _TOL * max(1.0, abs(b))


def _le(a: float, b: float) -> bool:
    return a <= b + _TOL * max(1.0, abs(b))


class BipartiteGraph:
    """Immutable d-left-bounded bipartite graph ([n], [m], E)."""

    __slots__ = ("n_left", "m_right", "adjacency", "_input_sets", "_right_deg")

    def __init__(self, n_left: int, m_right: int, adjacency: Sequence[Iterable[int]]):
        if n_left < 0 or m_right < 0:
            raise ValueError("vertex counts must be nonnegative")
        if len(adjacency) != n_left:
            raise ValueError(f"adjacency has {len(adjacency)} rows, expected {n_left}")
        adj = []
        right_deg = [0] * (m_right + 1)
        for i, row in enumerate(adjacency, start=1):
            row = tuple(sorted(row))
            if len(set(row)) != len(row):
                raise ValueError(f"duplicate edges at left vertex {i}")
            for j in row:
                if not 1 <= j <= m_right:
                    raise ValueError(f"right vertex {j} out of range at left vertex {i}")
                right_deg[j] += 1
            adj.append(row)
        self.n_left = n_left
        self.m_right = m_right
        self.adjacency = tuple(adj)
        self._input_sets = tuple(frozenset(row) for row in adj)
        self._right_deg = tuple(right_deg)

    @property
    def left_degree_bound(self) -> int:
        """d = max left degree (0 for an edgeless graph)."""
        return max((len(r) for r in self.adjacency), default=0)

    def input_set(self, i: int, deleted: frozenset = frozenset()) -> frozenset:
        s = self._input_sets[i - 1]
        return s - deleted if deleted else s

    def deg_right(self, j: int) -> int:
        return self._right_deg[j]

    def neighborhood(self, i: int, deleted: frozenset = frozenset()) -> frozenset:
        """N(i) = {i} plus every left vertex sharing a right vertex with i."""
        own = self.input_set(i, deleted)
        members = {i}
        for i2 in range(1, self.n_left + 1):
            if i2 != i and own & self.input_set(i2, deleted):
                members.add(i2)
        return frozenset(members)

    def neighborhood_closure(self, i: int, deleted: frozenset = frozenset()) -> frozenset:
        """Union of the input sets over the members of N(i)."""
        out: set = set()
        for u in self.neighborhood(i, deleted):
            out |= self.input_set(u, deleted)
        return frozenset(out)

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (
            self.n_left == other.n_left
            and self.m_right == other.m_right
            and self.adjacency == other.adjacency
        )

    def __hash__(self):
        return hash((self.n_left, self.m_right, self.adjacency))

    def __repr__(self):
        return f"BipartiteGraph(n={self.n_left}, m={self.m_right}, edges={sum(map(len, self.adjacency))})"


@dataclass(frozen=True)
class EliminationResult:
    """Outcome of an elimination procedure.

    ``selected`` lists left vertices (vertex flavor) or neighborhood
    centers (neighborhood flavor), pairwise non-connected once the right
    vertices in ``deleted`` are removed.  ``batches`` counts successful
    heavy-batch deletions before the dichotomy flipped.
    """

    flavor: str
    deleted: frozenset
    selected: tuple[int, ...]
    r: int
    t: int | None
    params: dict = field(compare=False)
    batches: int = 0


def non_connected_vertices(G: BipartiteGraph, vertices: Sequence[int],
                           deleted: frozenset = frozenset()) -> bool:
    """True iff the given left vertices have pairwise disjoint input sets."""
    sets = [G.input_set(i, deleted) for i in vertices]
    for a, b in combinations(sets, 2):
        if a & b:
            return False
    return True


def non_connected_neighborhoods(G: BipartiteGraph, centers: Sequence[int],
                                deleted: frozenset = frozenset()) -> bool:
    """True iff no member of one neighborhood shares a right vertex with a
    member of another (checked literally from the definition)."""
    hoods = [G.neighborhood(i, deleted) for i in centers]
    for (h1, h2) in combinations(hoods, 2):
        for u in h1:
            su = G.input_set(u, deleted)
            for v in h2:
                if su & G.input_set(v, deleted):
                    return False
    return True


def assert_selection_nonconnected(G: BipartiteGraph, result: EliminationResult) -> None:
    if result.flavor == "vertices":
        ok = non_connected_vertices(G, result.selected, result.deleted)
    else:
        ok = non_connected_neighborhoods(G, result.selected, result.deleted)
    if not ok:
        raise EliminationInvariantError(f"selection fails the non-connectedness recheck: {result}")


def greedy_nonconnected(G: BipartiteGraph, flavor: str, size_cap=None,
                        deleted: frozenset = frozenset(),
                        candidates: Sequence[int] | None = None) -> tuple[int, ...]:
    """Ascending-index greedy selection of non-connected left objects.

    Vertex flavor keeps i when its input set avoids everything kept so far.
    Neighborhood flavor keeps i when |N(i)| <= size_cap and the input
    closure of N(i) avoids the closures kept so far.
    """
    if flavor not in ("vertices", "neighborhoods"):
        raise ValueError(f"unknown flavor {flavor!r}")
    if candidates is None:
        candidates = range(1, G.n_left + 1)
    kept: list[int] = []
    used: set = set()
    for i in candidates:
        if flavor == "vertices":
            footprint = G.input_set(i, deleted)
        else:
            hood = G.neighborhood(i, deleted)
            if size_cap is not None and not _le(len(hood), size_cap):
                continue
            footprint = set()
            for u in hood:
                footprint |= G.input_set(u, deleted)
        if footprint & used:
            continue
        kept.append(i)
        used |= footprint
    return tuple(kept)


def vertex_elim_threshold(d: int, beta) -> Fraction:
    """Smallest lambda the vertex-flavor guarantee is proved for: 2d(2d*beta+1)**(2d)."""
    beta = Fraction(beta)
    return 2 * d * (2 * d * beta + 1) ** (2 * d)


def find_heavy_batch_vtx(G: BipartiteGraph, U: frozenset, alpha, beta, lam,
                         d: int | None = None):
    """One dichotomy step of the vertex-flavor elimination.

    With s = min(n, lam/2d, alpha/(2d*beta)), either returns a set V of
    right vertices outside U with |V| <= n/s and total degree >= n/2, or
    None, meaning at least n/2 left vertices have only sub-s-degree right
    neighbors left.  All arithmetic is exact over Fractions.
    """
    n = G.n_left
    if d is None:
        d = G.left_degree_bound
    if d < 1:
        raise EliminationError("find_heavy_batch_vtx requires d >= 1")
    alpha, beta, lam = Fraction(alpha), Fraction(beta), Fraction(lam)
    s = min(Fraction(n), lam / (2 * d), alpha / (2 * d * beta))
    if s < 1:
        raise EliminationError(f"threshold s={s} < 1 (alpha={alpha}, beta={beta}, lam={lam})")
    if len(U) > n / alpha:
        raise EliminationError(f"|U|={len(U)} exceeds n/alpha={n}/{alpha}")
    A = [j for j in range(1, G.m_right + 1) if j not in U and G.deg_right(j) >= s]
    if sum(G.deg_right(j) for j in A) < Fraction(n, 2):
        return None
    cap = math.floor(Fraction(n) / s)
    if len(A) > cap:
        A = A[:cap]
    return tuple(A)


def _small_left_candidates(G: BipartiteGraph, U: frozenset, s) -> list[int]:
    """Left vertices whose surviving right neighbors all have degree < s."""
    out = []
    for i in range(1, G.n_left + 1):
        if all(G.deg_right(j) < s for j in G.input_set(i, U)):
            out.append(i)
    return out


def eliminate_vertices(G: BipartiteGraph, beta, lam=None) -> EliminationResult:
    """Delete few right vertices to expose many non-connected left vertices.

    Iterates heavy-batch deletions with the schedule
    alpha_i = (2d*beta+1)**(2d-i) * 2d*beta, s_i = (2d*beta+1)**(2d-i)
    until the dichotomy flips, then greedily selects among the left
    vertices with small surviving neighborhoods.  The result always
    satisfies |S| <= r/beta and r >= n/lam, and is recheck-verified.
    """
    beta = Fraction(beta)
    if beta < 1:
        raise EliminationError(f"beta must be >= 1, got {beta}")
    n, d = G.n_left, G.left_degree_bound
    if d == 0:
        sel = tuple(range(1, n + 1))
        return EliminationResult("vertices", frozenset(), sel, n, None,
                                 {"beta": beta, "lambda": lam}, 0)
    threshold = vertex_elim_threshold(d, beta)
    lam = threshold if lam is None else Fraction(lam)
    if lam < 1 or lam < threshold:
        raise EliminationError(
            f"lambda={lam} below the guarantee threshold 2d(2d*beta+1)^(2d)={threshold}")
    params = {"beta": beta, "lambda": lam}

    if n <= lam:
        # The guarantee only promises a single arbitrary vertex here; the
        # full greedy selection is at least as good and keeps S empty.
        sel = greedy_nonconnected(G, "vertices")
        result = EliminationResult("vertices", frozenset(), sel, len(sel), None, params, 0)
        _check_vertex_property(G, result, beta, lam)
        return result

    U: frozenset = frozenset()
    for i in range(2 * d + 1):
        alpha_i = (2 * d * beta + 1) ** (2 * d - i) * 2 * d * beta
        s_i = (2 * d * beta + 1) ** (2 * d - i)
        V = find_heavy_batch_vtx(G, U, alpha_i, beta, lam, d)
        if V is None:
            candidates = _small_left_candidates(G, U, s_i)
            sel = greedy_nonconnected(G, "vertices", deleted=U, candidates=candidates)
            result = EliminationResult("vertices", U, sel, len(sel), None, params, i)
            _check_vertex_property(G, result, beta, lam)
            return result
        U |= frozenset(V)
    raise EliminationInvariantError(
        "heavy batches exceeded 2d+1, contradicting the total-degree bound")


def _check_vertex_property(G: BipartiteGraph, result: EliminationResult,
                           beta: Fraction, lam: Fraction) -> None:
    assert_selection_nonconnected(G, result)
    r = Fraction(result.r)
    if len(result.deleted) * beta > r or r * lam < G.n_left:
        raise EliminationInvariantError(
            f"vertex-flavor guarantee violated: |S|={len(result.deleted)}, r={result.r}, "
            f"beta={beta}, lambda={lam}, n={G.n_left}")


def find_heavy_batch_neigh(G: BipartiteGraph, U: frozenset, alpha: float, s: float,
                           lam: float, kappa: float, F: Callable[[float], float],
                           d: int | None = None):
    """One dichotomy step of the neighborhood-flavor elimination.

    Same dichotomy as the vertex flavor, but the step is only sound under
    1 <= s <= min(n, kappa/d), 1 <= alpha <= 2*lam*F(d*s) and
    ln(alpha*d) >= 8 d^4 s^2 F(d*s); violations raise naming the inequality.
    """
    n = G.n_left
    if d is None:
        d = G.left_degree_bound
    if d < 1:
        raise EliminationError("find_heavy_batch_neigh requires d >= 1")
    alpha, s, lam, kappa = map(float, (alpha, s, lam, kappa))
    fds = float(F(d * s))
    if not (_ge(s, 1.0) and _le(s, min(n, kappa / d))):
        raise EliminationError(f"violated: 1 <= s <= min(n, kappa/d) with s={s}")
    if not (_ge(alpha, 1.0) and _le(alpha, 2 * lam * fds)):
        raise EliminationError(f"violated: 1 <= alpha <= 2*lam*F(d*s) with alpha={alpha}")
    if not _ge(math.log(alpha * d), 8 * d**4 * s**2 * fds):
        raise EliminationError(
            f"violated: ln(alpha*d) >= 8*d^4*s^2*F(d*s) "
            f"({math.log(alpha * d):.6g} < {8 * d**4 * s**2 * fds:.6g})")
    if not _le(len(U), n / alpha):
        raise EliminationError(f"|U|={len(U)} exceeds n/alpha={n / alpha:.6g}")
    A = [j for j in range(1, G.m_right + 1) if j not in U and _ge(G.deg_right(j), s)]
    if sum(G.deg_right(j) for j in A) < n / 2:
        return None
    cap = math.floor(n / s + _TOL)
    if len(A) > cap:
        A = A[:cap]
    return tuple(A)


def _sample_grid(limit: float) -> list[float]:
    grid = [1.0]
    while grid[-1] < limit:
        grid.append(grid[-1] * 2)
    return grid


def eliminate_neighborhoods(G: BipartiteGraph, lam, kappa, F: Callable[[float], float],
                            H: Callable[[float], float] | None = None,
                            L: float | None = None, *,
                            schedule: Sequence[tuple[float, float]] | None = None,
                            ) -> EliminationResult:
    """Delete few right vertices to expose non-connected small neighborhoods.

    In the default mode the schedule alpha_i = H^(2d+2-i)(L),
    s_i = 2 H^(2d+1-i)(L) is derived from (H, L).  H iterates are computed
    with saturation: once an iterate provably exceeds n, the n <= lambda
    branch applies and no further magnitude checking is possible (or
    needed).  Hypotheses on F and H are checked on the iterate points and
    a doubling sample grid; the semi-infinite originals cannot be checked.

    An explicit ``schedule`` of (alpha_i, s_i) pairs bypasses the (H, L)
    derivation - per-step hypotheses are still enforced - which is the
    only way to reach the iterate path at desk scale, where any admissible
    (H, L) drives lambda astronomically above n.

    The returned selection satisfies |S| <= r/F(t), r >= n/lambda, t <= kappa.
    """
    n, d = G.n_left, G.left_degree_bound
    lam_f, kappa_f = float(lam), float(kappa)
    if kappa_f < lam_f:
        raise EliminationError(f"kappa={kappa_f} must be at least lambda={lam_f}")
    params = {"lambda": lam, "kappa": kappa, "F": getattr(F, "__name__", repr(F))}

    if d == 0:
        sel = tuple(range(1, n + 1))
        t = 1 if n else 0
        return EliminationResult("neighborhoods", frozenset(), sel, n, t, params, 0)

    for x in _sample_grid(64.0):
        if float(F(x)) < 1.0 - _TOL:
            raise EliminationError(f"violated: F(x) >= 1 for x >= 1 (F({x}) = {F(x)})")

    if schedule is None:
        if H is None or L is None:
            raise EliminationError("either (H, L) or an explicit schedule is required")
        if L < 1:
            raise EliminationError(f"L must be at least 1, got {L}")
        cap = 4.0 * max(n, 1 << 16)
        iterates = [float(L)]
        saturated = False
        for _ in range(2 * d + 2):
            x = iterates[-1]
            if saturated or x >= cap:
                saturated = True
                iterates.append(math.inf)
                continue
            hx = float(H(x))
            if not math.isfinite(hx) or hx >= cap:
                saturated = True
                iterates.append(math.inf)
                continue
            if not _ge(hx, 2 * x):
                raise EliminationError(f"violated: H(x) >= 2x at x={x} (H={hx})")
            ln_ftilde = 32 * d**4 * x * x * float(F(2 * d * x)) - math.log(d)
            if ln_ftilde < math.log(cap) and not _ge(math.log(hx), ln_ftilde):
                raise EliminationError(
                    f"violated: H(x) >= exp(32*d^4*x^2*F(2dx))/d at x={x}")
            iterates.append(hx)
        top = iterates[2 * d + 2]
        if saturated:
            if not lam_f >= n:
                raise EliminationError(
                    f"violated: lambda >= d*H^(2d+2)(L) (lambda={lam_f} is below n={n} "
                    "while the iterate exceeds n)")
        elif not _ge(lam_f, d * top):
            raise EliminationError(
                f"violated: lambda >= d*H^(2d+2)(L) ({lam_f} < {d * top:.6g})")
        if n <= lam_f:
            # Guarantee floor is (S=empty, r=1, t=n); the greedy selection
            # dominates it and never hurts the property.
            sel = greedy_nonconnected(G, "neighborhoods")
            t = max((len(G.neighborhood(i)) for i in sel), default=0)
            result = EliminationResult("neighborhoods", frozenset(), sel, len(sel), t, params, 0)
            _check_neigh_property(G, result, lam_f, kappa_f, F)
            return result
        schedule = [(iterates[2 * d + 2 - i], 2 * iterates[2 * d + 1 - i])
                    for i in range(2 * d + 1)]

    U: frozenset = frozenset()
    for i, (alpha_i, s_i) in enumerate(schedule):
        V = find_heavy_batch_neigh(G, U, alpha_i, s_i, lam_f, kappa_f, F, d)
        if V is None:
            result = _select_after_none(G, U, float(alpha_i), float(s_i), d,
                                        lam_f, kappa_f, F, params, i)
            _check_neigh_property(G, result, lam_f, kappa_f, F)
            return result
        U |= frozenset(V)
    raise EliminationInvariantError(
        "heavy batches exceeded the schedule length, contradicting the total-degree bound")


def _select_after_none(G: BipartiteGraph, U: frozenset, alpha: float, s: float, d: int,
                       lam: float, kappa: float, F, params: dict, batches: int
                       ) -> EliminationResult:
    """Scan removal thresholds after the dichotomy flips and keep the best.

    For each threshold ell up to K = alpha/(4 d^3 s^2 F(d s)), removing the
    rights of degree >= ell next to U leaves every small neighborhood
    connected to few others, so the greedy selection gets dense.  At least
    one ell must satisfy the property; thresholds beyond the max degree
    change nothing and are collapsed into one sentinel value.
    """
    n = G.n_left
    K = alpha / (4 * d**3 * s * s * float(F(d * s)))
    max_deg = max((G.deg_right(j) for j in range(1, G.m_right + 1)), default=0)
    ell_hi = min(math.floor(K + _TOL), max_deg + 1)
    best = None
    for ell in range(1, max(ell_hi, 0) + 1):
        B = frozenset(j for j in range(1, G.m_right + 1)
                      if j not in U and G.deg_right(j) >= ell)
        deleted = U | B
        sel = greedy_nonconnected(G, "neighborhoods", size_cap=d * s, deleted=deleted)
        if not sel:
            continue
        r = len(sel)
        t = max(len(G.neighborhood(i, deleted)) for i in sel)
        if len(deleted) > r / float(F(max(t, 1))) + _TOL:
            continue
        if not _ge(r, n / lam) or not _le(t, kappa):
            continue
        key = (-r, len(deleted), ell)
        if best is None or key < best[0]:
            best = (key, deleted, sel, r, t)
    if best is None:
        raise EliminationInvariantError(
            "no removal threshold yields the guaranteed neighborhood structure")
    _, deleted, sel, r, t = best
    return EliminationResult("neighborhoods", deleted, sel, r, t, params, batches)


def _check_neigh_property(G: BipartiteGraph, result: EliminationResult,
                          lam: float, kappa: float, F) -> None:
    assert_selection_nonconnected(G, result)
    r, t, S = result.r, result.t or 0, len(result.deleted)
    sizes = [len(G.neighborhood(i, result.deleted)) for i in result.selected]
    if sizes and max(sizes) > (result.t or 0):
        raise EliminationInvariantError("reported t below an actual neighborhood size")
    if S > r / float(F(max(t, 1))) + _TOL or not _ge(r, G.n_left / lam) or not _le(t, kappa):
        raise EliminationInvariantError(
            f"neighborhood-flavor guarantee violated: |S|={S}, r={r}, t={t}")


def max_nonconnected(G: BipartiteGraph, deleted: frozenset, flavor: str) -> int:
    """Exact maximum number of pairwise non-connected left objects in G - deleted."""
    n = G.n_left
    if n > _BRUTE_LEFT_CAP:
        raise CapacityError(f"exact search capped at {_BRUTE_LEFT_CAP} left vertices, got {n}")
    if flavor == "vertices":
        footprints = [G.input_set(i, deleted) for i in range(1, n + 1)]
    elif flavor == "neighborhoods":
        footprints = [G.neighborhood_closure(i, deleted) for i in range(1, n + 1)]
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    conflict = [0] * n
    for a in range(n):
        for b in range(a + 1, n):
            if footprints[a] & footprints[b]:
                conflict[a] |= 1 << b
                conflict[b] |= 1 << a
    memo: dict[int, int] = {}

    def mis(mask: int) -> int:
        if mask == 0:
            return 0
        got = memo.get(mask)
        if got is not None:
            return got
        v = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << v)
        best = max(1 + mis(rest & ~conflict[v]), mis(rest))
        memo[mask] = best
        return best

    return mis((1 << n) - 1)


def brute_force_best_elimination(G: BipartiteGraph, budget: int, flavor: str
                                 ) -> tuple[frozenset, int]:
    """Exhaust every deletion set S with |S| <= budget; return the best (S, r).

    Optimality oracle for tests; capped at 16 right and 20 left vertices.
    Ties break toward smaller, lexicographically earlier S.
    """
    if G.m_right > _BRUTE_RIGHT_CAP:
        raise CapacityError(f"subset enumeration capped at {_BRUTE_RIGHT_CAP} right vertices")
    best_S: frozenset = frozenset()
    best_r = -1
    for size in range(min(budget, G.m_right) + 1):
        for S in combinations(range(1, G.m_right + 1), size):
            S = frozenset(S)
            r = max_nonconnected(G, S, flavor)
            if r > best_r:
                best_S, best_r = S, r
    return best_S, best_r


def random_left_bounded(rng, n: int, m: int, d: int) -> BipartiteGraph:
    """Random graph with n left vertices of degree <= d over m right vertices."""
    adjacency = []
    for _ in range(n):
        k = rng.randint(0, min(d, m))
        adjacency.append(rng.sample(range(1, m + 1), k))
    return BipartiteGraph(n, m, adjacency)


def write_graph(G: BipartiteGraph, path) -> None:
    lines = [f"BIGRAPH v1 n={G.n_left} m={G.m_right}"]
    for i, row in enumerate(G.adjacency, start=1):
        lines.append(f"left {i}: " + ",".join(str(j) for j in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path) -> BipartiteGraph:
    with open(path, encoding="ascii") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines or not lines[0].startswith("BIGRAPH v1 "):
        raise FormatError("missing BIGRAPH v1 header")
    try:
        header = dict(tok.split("=") for tok in lines[0].split()[2:])
        n, m = int(header["n"]), int(header["m"])
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad BIGRAPH header: {lines[0]!r}") from exc
    if len(lines) - 1 != n:
        raise FormatError(f"expected {n} left-vertex lines, got {len(lines) - 1}")
    adjacency = []
    for idx, line in enumerate(lines[1:], start=1):
        prefix = f"left {idx}:"
        if not line.startswith(prefix):
            raise FormatError(f"bad BIGRAPH record: {line!r}")
        rest = line[len(prefix):].strip()
        adjacency.append([int(tok) for tok in rest.split(",")] if rest else [])
    try:
        return BipartiteGraph(n, m, adjacency)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
