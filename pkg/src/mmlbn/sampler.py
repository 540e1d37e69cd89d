"""Metropolis search over structures, with equivalence-class aggregation.

The chain walks DAG space with symmetric proposals (arc toggles and arc
reversals of uniformly random ordered pairs) and accepts by the usual
Metropolis rule on the network code length, so its stationary distribution
is proportional to exp(-length). The raw, uncleaned network is what the
chain carries forward; each post-burn-in visit is separately cleaned of
arcs that do not pay for themselves and binned by the Markov equivalence
class of the cleaned network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CycleError, NoArcError, ParentCapError
from .graph import ArcMove, DagStructure, apply_move, cpdag_key
from .scoring import ModelPolicy, NetworkScorer


@dataclass
class SamplerConfig:
    iterations: int = 200000
    burn_in: int = 10000
    seed: int = 0
    policy: ModelPolicy = ModelPolicy.DUAL
    p: float = 0.5
    sigma: float = 3.0
    max_parents: int = 10
    top_k: int = 10

    def validate(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if not 0.0 < self.p < 1.0:
            raise ValueError("arc prior probability must lie strictly in (0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.max_parents < 0:
            raise ValueError("max_parents must be non-negative")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")


@dataclass(frozen=True, eq=False)
class ChainState:
    """Current structure with its cached score decomposition."""

    dag: DagStructure
    node_lengths: tuple[float, ...]
    log_prior: float
    total: float


@dataclass
class SamplerContext:
    scorer: NetworkScorer
    max_parents: int


@dataclass(frozen=True)
class ClassRecord:
    key: bytes
    visits: int
    best_network: DagStructure
    best_length: float


@dataclass(frozen=True)
class PosteriorReport:
    classes: tuple[ClassRecord, ...]
    total_samples: int

    def weights(self) -> tuple[float, ...]:
        return tuple(c.visits / self.total_samples for c in self.classes)


def initial_state(scorer: NetworkScorer, dag: DagStructure | None = None) -> ChainState:
    if dag is None:
        dag = DagStructure.empty(scorer.ds.n_variables)
    lengths = tuple(
        scorer.node_length_or_inf(child, parents)
        for child, parents in enumerate(dag.parent_sets)
    )
    log_prior = scorer.structure_log_prior(dag)
    total = math.inf if any(math.isinf(x) for x in lengths) else -log_prior + sum(lengths)
    return ChainState(dag, lengths, log_prior, total)


def metropolis_step(
    state: ChainState, rng: np.random.Generator, ctx: SamplerContext
) -> ChainState:
    """One proposal; returns the new state, or the old one on rejection.

    Moves that would break acyclicity or the parent cap, and reversals of
    absent arcs, leave the chain where it is (and still count as a visit).
    """
    m = state.dag.m
    if m < 2:
        return state
    kind = "toggle" if rng.random() < 0.5 else "reverse"
    pair = int(rng.integers(0, m * (m - 1)))
    i, rem = divmod(pair, m - 1)
    j = rem + (rem >= i)
    try:
        new_dag = apply_move(state.dag, ArcMove(kind, i, j), ctx.max_parents)
    except (CycleError, ParentCapError, NoArcError):
        return state
    affected = (j,) if kind == "toggle" else (i, j)
    lengths = list(state.node_lengths)
    for v in affected:
        lengths[v] = ctx.scorer.node_length_or_inf(v, new_dag.parent_sets[v])
    log_prior = ctx.scorer.structure_log_prior(new_dag)
    if any(math.isinf(x) for x in lengths):
        total = math.inf
    else:
        total = -log_prior + sum(lengths)
    delta = state.total - total  # positive when the proposal is better
    if delta < 0 and math.log(rng.random()) >= delta:
        return state
    return ChainState(new_dag, tuple(lengths), log_prior, total)


def clean_network(dag: DagStructure, scorer: NetworkScorer) -> DagStructure:
    """Drop every arc whose removal does not strictly increase the length.

    Nodes are visited in ascending index order and each node's original
    parents in ascending order; every removal is applied before the next
    parent is tested, and each parent is tested exactly once. Scoring
    errors during a test count as removals.
    """
    current = dag
    for node in range(dag.m):
        for parent in dag.parent_sets[node]:
            kept = current.parent_sets[node]
            reduced = tuple(u for u in kept if u != parent)
            with_len = scorer.node_length_or_inf(node, kept)
            without_len = scorer.node_length_or_inf(node, reduced)
            candidate = current.with_parents(node, reduced)
            if math.isinf(with_len) or math.isinf(without_len):
                current = candidate
                continue
            prior_delta = scorer.structure_log_prior(candidate) - scorer.structure_log_prior(current)
            total_delta = (without_len - with_len) - prior_delta
            if total_delta <= 0:
                current = candidate
    return current


def run_sampler(ds, config: SamplerConfig) -> PosteriorReport:
    """Run the chain from the empty structure and aggregate visited classes."""
    config.validate()
    m = ds.n_variables
    scorer = NetworkScorer(ds, config.policy, config.p, config.sigma)
    ctx = SamplerContext(scorer, min(config.max_parents, max(m - 1, 0)))
    rng = np.random.default_rng(config.seed)
    state = initial_state(scorer)
    clean_memo: dict = {}
    records: dict[bytes, list] = {}
    for step in range(config.iterations):
        state = metropolis_step(state, rng, ctx)
        if step < config.burn_in:
            continue
        memo_key = state.dag.parent_sets
        entry = clean_memo.get(memo_key)
        if entry is None:
            cleaned = clean_network(state.dag, scorer)
            entry = (
                cpdag_key(cleaned),
                cleaned,
                scorer.total_length_or_inf(cleaned),
            )
            clean_memo[memo_key] = entry
        class_key, cleaned, clean_length = entry
        record = records.get(class_key)
        if record is None:
            records[class_key] = [1, cleaned, clean_length]
        else:
            record[0] += 1
            if clean_length < record[2]:
                record[1] = cleaned
                record[2] = clean_length
    ordered = sorted(
        records.items(), key=lambda item: (-item[1][0], item[0])
    )[: config.top_k]
    classes = tuple(
        ClassRecord(key, visits, network, length)
        for key, (visits, network, length) in ordered
    )
    return PosteriorReport(classes, config.iterations - config.burn_in)
