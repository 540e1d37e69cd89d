"""Node and network code lengths under the three model policies.

TBN scores every node with a full conditional table, FON with the
first-order model. DUAL picks the cheaper of the two per node and charges
one extra bit (log 2 nits) for saying which, except for nodes with at most
one parent, where the two models have the same expressive power and the
full table is used without a selection bit.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass

from .cpt_full import full_cpt_message_length
from .dataset import DiscreteDataset, counts_for
from .errors import MmlbnError, ParameterCapError
from .fom import DEFAULT_SIGMA, fom_message_length
from .graph import DagStructure
from .graph import structure_log_prior as _structure_log_prior

MODEL_CHOICE_NITS = math.log(2.0)


class ModelPolicy(enum.Enum):
    TBN = "tbn"
    FON = "fon"
    DUAL = "dual"


@dataclass(frozen=True)
class NodeScore:
    length: float  # nits; may be any real number
    chosen_model: str  # "full" or "fom"
    parameter_count: int


class ScoreCache:
    """Shared map from (child, parents, policy) to node scores.

    Reads vastly outnumber writes; the dict operations are individually
    atomic under the interpreter lock and a plain lock guards insertion, so
    a value observed by any reader is always a completed computation.
    Scoring errors are cached too and re-raised on later lookups.
    """

    def __init__(self):
        self._entries: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._entries)

    def get_or_compute(self, key, compute):
        entry = self._entries.get(key)
        if entry is None:
            self.misses += 1
            try:
                entry = compute()
            except MmlbnError as err:
                entry = err
            with self._lock:
                entry = self._entries.setdefault(key, entry)
        else:
            self.hits += 1
        if isinstance(entry, MmlbnError):
            raise entry
        return entry


def node_length(
    counts,
    policy: ModelPolicy,
    parent_count: int | None = None,
    sigma: float = DEFAULT_SIGMA,
) -> NodeScore:
    """Code length of one node's counts under a model policy."""
    if parent_count is None:
        parent_count = counts.n_parents
    if policy is ModelPolicy.TBN:
        score = full_cpt_message_length(counts)
        return NodeScore(score.message_length, "full", score.free_params)
    if policy is ModelPolicy.FON:
        score = fom_message_length(counts, sigma)
        return NodeScore(score.message_length, "fom", score.free_dim)
    if policy is not ModelPolicy.DUAL:
        raise ValueError(f"unknown policy {policy!r}")
    if parent_count <= 1:
        score = full_cpt_message_length(counts)
        return NodeScore(score.message_length, "full", score.free_params)
    try:
        full = full_cpt_message_length(counts)
    except ParameterCapError:
        full = None
    fom = fom_message_length(counts, sigma)
    if full is not None and full.message_length <= fom.message_length:
        return NodeScore(full.message_length + MODEL_CHOICE_NITS, "full", full.free_params)
    return NodeScore(fom.message_length + MODEL_CHOICE_NITS, "fom", fom.free_dim)


class NetworkScorer:
    """Scoring context binding a dataset, a policy and shared caches."""

    def __init__(
        self,
        ds: DiscreteDataset,
        policy: ModelPolicy,
        p: float = 0.5,
        sigma: float = DEFAULT_SIGMA,
        cache: ScoreCache | None = None,
    ):
        if not 0.0 < p < 1.0:
            raise ValueError("arc prior probability must lie strictly in (0, 1)")
        self.ds = ds
        self.policy = policy
        self.p = p
        self.sigma = sigma
        self.cache = cache if cache is not None else ScoreCache()

    def node_score(self, child: int, parents: tuple) -> NodeScore:
        parents = tuple(parents)
        key = (child, parents, self.policy)
        return self.cache.get_or_compute(
            key,
            lambda: node_length(
                counts_for(self.ds, child, parents),
                self.policy,
                len(parents),
                self.sigma,
            ),
        )

    def node_length_or_inf(self, child: int, parents: tuple) -> float:
        try:
            return self.node_score(child, parents).length
        except MmlbnError:
            return math.inf

    def structure_log_prior(self, dag: DagStructure) -> float:
        return _structure_log_prior(dag, self.p)

    def total_length(self, dag: DagStructure) -> float:
        """Network code length; raises on any node scoring error."""
        total = -self.structure_log_prior(dag)
        for child, parents in enumerate(dag.parent_sets):
            total += self.node_score(child, parents).length
        return total

    def total_length_or_inf(self, dag: DagStructure) -> float:
        total = -self.structure_log_prior(dag)
        for child, parents in enumerate(dag.parent_sets):
            length = self.node_length_or_inf(child, parents)
            if math.isinf(length):
                return math.inf
            total += length
        return total


def network_message_length(
    dag: DagStructure,
    ds: DiscreteDataset,
    policy: ModelPolicy,
    p: float = 0.5,
    sigma: float = DEFAULT_SIGMA,
    cache: ScoreCache | None = None,
) -> float:
    """Structure cost plus the sum of node code lengths, in nits."""
    if dag.m != ds.n_variables:
        raise ValueError("structure and dataset disagree on variable count")
    return NetworkScorer(ds, policy, p, sigma, cache).total_length(dag)
