"""Directed acyclic structures, edit moves, and the structure prior.

The prior over structures weights each DAG by its number of linear
extensions (total orders consistent with the arcs), normalised by m!, times
an independent Bernoulli factor per possible arc slot. Summed over all DAGs
on m nodes this is exactly 1: conditioned on a total order, the arc slots
are independent coin flips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .errors import CapacityError, CycleError, NoArcError, ParentCapError

MAX_NODES = 24

# Counts up to 18! stay exactly representable in float64, so the vectorised
# subset dynamic program is exact there; larger graphs fall back to big-int
# arithmetic.
_FLOAT_DP_LIMIT = 18


@dataclass(frozen=True)
class DagStructure:
    """Immutable DAG over nodes 0..m-1, stored as sorted parent tuples."""

    m: int
    parent_sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("node count must be non-negative")
        if len(self.parent_sets) != self.m:
            raise ValueError("parent_sets length does not match node count")
        normalised = []
        for v, parents in enumerate(self.parent_sets):
            parents = tuple(int(u) for u in parents)
            if any(not 0 <= u < self.m for u in parents):
                raise ValueError(f"node {v}: parent index out of range")
            if len(set(parents)) != len(parents):
                raise ValueError(f"node {v}: duplicate parents")
            if v in parents:
                raise CycleError(f"node {v} lists itself as a parent")
            normalised.append(tuple(sorted(parents)))
        object.__setattr__(self, "parent_sets", tuple(normalised))
        self._check_acyclic()

    def _check_acyclic(self):
        remaining = [len(p) for p in self.parent_sets]
        children = [[] for _ in range(self.m)]
        for v, parents in enumerate(self.parent_sets):
            for u in parents:
                children[u].append(v)
        frontier = [v for v in range(self.m) if remaining[v] == 0]
        seen = 0
        while frontier:
            u = frontier.pop()
            seen += 1
            for w in children[u]:
                remaining[w] -= 1
                if remaining[w] == 0:
                    frontier.append(w)
        if seen != self.m:
            raise CycleError("parent sets describe a directed cycle")

    @classmethod
    def empty(cls, m: int) -> "DagStructure":
        return cls(m, tuple(() for _ in range(m)))

    @classmethod
    def from_arcs(cls, m: int, arcs) -> "DagStructure":
        parents = [[] for _ in range(m)]
        for u, v in arcs:
            parents[v].append(u)
        return cls(m, tuple(tuple(p) for p in parents))

    @property
    def arc_count(self) -> int:
        return sum(len(p) for p in self.parent_sets)

    def arcs(self) -> list[tuple[int, int]]:
        return sorted(
            (u, v) for v, parents in enumerate(self.parent_sets) for u in parents
        )

    def has_arc(self, u: int, v: int) -> bool:
        return u in self.parent_sets[v]

    def parent_masks(self) -> tuple[int, ...]:
        masks = []
        for parents in self.parent_sets:
            mask = 0
            for u in parents:
                mask |= 1 << u
            masks.append(mask)
        return tuple(masks)

    def with_parents(self, node: int, parents) -> "DagStructure":
        sets = list(self.parent_sets)
        sets[node] = tuple(parents)
        return DagStructure(self.m, tuple(sets))

    def topological_order(self) -> list[int]:
        remaining = [len(p) for p in self.parent_sets]
        children = [[] for _ in range(self.m)]
        for v, parents in enumerate(self.parent_sets):
            for u in parents:
                children[u].append(v)
        frontier = sorted(v for v in range(self.m) if remaining[v] == 0)
        order = []
        while frontier:
            u = frontier.pop(0)
            order.append(u)
            for w in children[u]:
                remaining[w] -= 1
                if remaining[w] == 0:
                    frontier.append(w)
        return order


@dataclass(frozen=True)
class ArcMove:
    """One structural edit.

    toggle: flip presence of the arc from_node -> to_node.
    reverse: replace the arc to_node -> from_node by from_node -> to_node.
    """

    kind: Literal["toggle", "reverse"]
    from_node: int
    to_node: int

    def __post_init__(self):
        if self.kind not in ("toggle", "reverse"):
            raise ValueError(f"unknown move kind {self.kind!r}")
        if self.from_node == self.to_node:
            raise ValueError("move endpoints must differ")


def _has_path(dag: DagStructure, src: int, dst: int, skip_arc=None) -> bool:
    """Directed reachability src -> dst, optionally ignoring one arc."""
    children = [[] for _ in range(dag.m)]
    for v, parents in enumerate(dag.parent_sets):
        for u in parents:
            if skip_arc is not None and (u, v) == skip_arc:
                continue
            children[u].append(v)
    stack = [src]
    visited = {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for w in children[u]:
            if w not in visited:
                visited.add(w)
                stack.append(w)
    return False


def apply_move(dag: DagStructure, move: ArcMove, max_parents: int) -> DagStructure:
    """Apply an edit, enforcing acyclicity and the parent cap."""
    i, j = move.from_node, move.to_node
    if not (0 <= i < dag.m and 0 <= j < dag.m):
        raise ValueError("move endpoints out of range")
    if move.kind == "toggle":
        if dag.has_arc(i, j):
            reduced = tuple(u for u in dag.parent_sets[j] if u != i)
            return dag.with_parents(j, reduced)
        if len(dag.parent_sets[j]) + 1 > max_parents:
            raise ParentCapError(
                f"node {j} would exceed the parent cap of {max_parents}"
            )
        if _has_path(dag, j, i):
            raise CycleError(f"adding {i}->{j} would create a cycle")
        return dag.with_parents(j, dag.parent_sets[j] + (i,))
    # reverse: j -> i becomes i -> j
    if not dag.has_arc(j, i):
        raise NoArcError(f"no arc {j}->{i} to reverse")
    if len(dag.parent_sets[j]) + 1 > max_parents:
        raise ParentCapError(f"node {j} would exceed the parent cap of {max_parents}")
    if _has_path(dag, j, i, skip_arc=(j, i)):
        raise CycleError(f"reversing {j}->{i} would create a cycle")
    sets = list(dag.parent_sets)
    sets[i] = tuple(u for u in sets[i] if u != j)
    sets[j] = tuple(sets[j]) + (i,)
    return DagStructure(dag.m, tuple(sets))


@lru_cache(maxsize=32)
def _masks_by_popcount(m: int):
    masks = np.arange(1 << m, dtype=np.int64)
    pc = np.zeros(1 << m, dtype=np.int8)
    for b in range(m):
        pc += ((masks >> b) & 1).astype(np.int8)
    return tuple(masks[pc == c] for c in range(m + 1))


def _extensions_dp_float(m: int, pmasks) -> int:
    """Subset DP over prefix sets, vectorised; exact for m <= 18."""
    f = np.zeros(1 << m)
    f[0] = 1.0
    levels = _masks_by_popcount(m)
    bits = [1 << v for v in range(m)]
    for level in range(m):
        lv = levels[level]
        for v in range(m):
            sel = lv[((lv & pmasks[v]) == pmasks[v]) & ((lv & bits[v]) == 0)]
            if sel.size:
                f[sel | bits[v]] += f[sel]
    return int(round(f[-1]))


def _extensions_dp_int(m: int, pmasks) -> int:
    """Same DP in exact big-int arithmetic (slow, rarely needed)."""
    size = 1 << m
    f = [0] * size
    f[0] = 1
    for s in range(size):
        fs = f[s]
        if not fs:
            continue
        for v in range(m):
            bit = 1 << v
            if s & bit:
                continue
            if (s & pmasks[v]) == pmasks[v]:
                f[s | bit] += fs
    return f[size - 1]


def _weak_components(m: int, pmasks) -> list[list[int]]:
    parent = list(range(m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v in range(m):
        mask = pmasks[v]
        u = 0
        while mask:
            if mask & 1:
                ra, rb = find(u), find(v)
                if ra != rb:
                    parent[ra] = rb
            mask >>= 1
            u += 1
    groups: dict[int, list[int]] = {}
    for v in range(m):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


@lru_cache(maxsize=1 << 16)
def _count_extensions_cached(m: int, pmasks) -> int:
    # Weakly connected components order independently; interleavings of the
    # component orders contribute a multinomial factor.
    total = 1
    placed = 0
    for comp in _weak_components(m, pmasks):
        k = len(comp)
        rank = {node: idx for idx, node in enumerate(comp)}
        sub = []
        for node in comp:
            mask, sm = pmasks[node], 0
            for u, idx in rank.items():
                if mask >> u & 1:
                    sm |= 1 << idx
            sub.append(sm)
        if k <= _FLOAT_DP_LIMIT:
            count = _extensions_dp_float(k, tuple(sub))
        else:
            count = _extensions_dp_int(k, tuple(sub))
        total *= math.comb(placed + k, k) * count
        placed += k
    return total


def count_linear_extensions(dag: DagStructure) -> int:
    """Number of total orders consistent with every arc (exact integer)."""
    if dag.m > MAX_NODES:
        raise CapacityError(f"linear extension counting capped at {MAX_NODES} nodes")
    if dag.m == 0:
        return 1
    return _count_extensions_cached(dag.m, dag.parent_masks())


def structure_log_prior(dag: DagStructure, p: float) -> float:
    """Log prior probability of a DAG, in nits.

    The prior is: (linear extensions / m!) * p^E * (1-p)^(C-E) with C the
    number of unordered node pairs and E the arc count.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("arc prior probability must lie strictly in (0, 1)")
    extensions = count_linear_extensions(dag)
    m, e = dag.m, dag.arc_count
    pairs = m * (m - 1) // 2
    return (
        math.log(extensions)
        - math.log(math.factorial(m))
        + e * math.log(p)
        + (pairs - e) * math.log1p(-p)
    )


def cpdag_key(dag: DagStructure) -> bytes:
    """Canonical key of the Markov equivalence class.

    Two DAGs get the same key iff they share the same skeleton and the same
    set of unshielded colliders.
    """
    adjacent = set()
    for v, parents in enumerate(dag.parent_sets):
        for u in parents:
            adjacent.add((min(u, v), max(u, v)))
    colliders = []
    for w, parents in enumerate(dag.parent_sets):
        for a in range(len(parents)):
            for b in range(a + 1, len(parents)):
                x, y = parents[a], parents[b]
                if (x, y) not in adjacent:
                    colliders.append((x, y, w))
    skeleton = ",".join(f"{u}-{v}" for u, v in sorted(adjacent))
    collider_part = ",".join(f"{x}.{y}>{w}" for x, y, w in sorted(colliders))
    return f"{dag.m}|{skeleton}|{collider_part}".encode("ascii")
