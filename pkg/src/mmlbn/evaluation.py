"""Fitting reported structures and measuring held-out predictive loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .cpt_full import full_cpt_message_length
from .dataset import DiscreteDataset, counts_for, split_train_test
from .fom import DEFAULT_SIGMA, FomParams, fit_fom_map, fom_probability
from .graph import DagStructure
from .sampler import PosteriorReport, SamplerConfig, run_sampler
from .scoring import ModelPolicy, node_length
from .dataset import config_index


class _FullNode:
    """Posterior-mean table lookup; unseen configurations are uniform."""

    def __init__(self, counts):
        self.r_y = counts.child_arity
        self._log_uniform = -math.log(self.r_y)
        self._rows = {}
        totals = counts.config_totals
        for digits, row, total in zip(counts.config_digits, counts.counts, totals):
            probs = (row + 1.0) / (total + self.r_y)
            self._rows[tuple(int(d) for d in digits)] = np.log(probs)

    def log_prob(self, value: int, parent_values: tuple) -> float:
        row = self._rows.get(parent_values)
        if row is None:
            return self._log_uniform
        return float(row[value])


class _LogitNode:
    """First-order model probabilities, memoised per configuration."""

    def __init__(self, params: FomParams):
        self.params = params
        self._memo = {}

    def log_prob(self, value: int, parent_values: tuple) -> float:
        row = self._memo.get(parent_values)
        if row is None:
            index = config_index(parent_values, self.params.parent_arities)
            row = np.log(fom_probability(self.params, index))
            self._memo[parent_values] = row
        return float(row[value])


@dataclass(frozen=True, eq=False)
class FittedNetwork:
    """A structure with one fitted conditional model per node."""

    dag: DagStructure
    nodes: tuple
    chosen_models: tuple[str, ...]
    parameter_count: int


def fit_network(
    dag: DagStructure,
    train: DiscreteDataset,
    policy: ModelPolicy,
    sigma: float = DEFAULT_SIGMA,
) -> FittedNetwork:
    """Fit each node with the model the policy's node score would choose."""
    if dag.m != train.n_variables:
        raise ValueError("structure and dataset disagree on variable count")
    nodes = []
    chosen = []
    parameters = 0
    for child, parents in enumerate(dag.parent_sets):
        counts = counts_for(train, child, parents)
        score = node_length(counts, policy, len(parents), sigma)
        chosen.append(score.chosen_model)
        parameters += score.parameter_count
        if score.chosen_model == "full":
            nodes.append(_FullNode(counts))
        else:
            nodes.append(_LogitNode(fit_fom_map(counts, sigma)))
    return FittedNetwork(dag, tuple(nodes), tuple(chosen), parameters)


def case_log_prob(network: FittedNetwork, case) -> float:
    """Log joint probability of one complete case, in nits."""
    case = np.asarray(case)
    total = 0.0
    for child, parents in enumerate(network.dag.parent_sets):
        parent_values = tuple(int(case[p]) for p in parents)
        total += network.nodes[child].log_prob(int(case[child]), parent_values)
    return total


def _normalised_weights(report: PosteriorReport) -> np.ndarray:
    visits = np.array([c.visits for c in report.classes], dtype=float)
    if visits.size == 0 or visits.sum() <= 0:
        raise ValueError("report holds no visited classes")
    return visits / visits.sum()


def _mixture_nll(networks, log_weights, test: DiscreteDataset) -> float:
    total = 0.0
    scores = np.empty(len(networks))
    for case in test.rows:
        for c, network in enumerate(networks):
            scores[c] = case_log_prob(network, case)
        total -= float(logsumexp(log_weights + scores))
    return total


def model_averaged_test_nll(
    report: PosteriorReport,
    train: DiscreteDataset,
    test: DiscreteDataset,
    policy: ModelPolicy,
    sigma: float = DEFAULT_SIGMA,
) -> float:
    """Negative log likelihood of the test cases under the posterior mixture.

    Each reported class's best network is fitted on the training data and the
    classes are mixed by their renormalised visit weights, case by case.
    """
    weights = _normalised_weights(report)
    networks = [
        fit_network(record.best_network, train, policy, sigma)
        for record in report.classes
    ]
    return _mixture_nll(networks, np.log(weights), test)


@dataclass(frozen=True)
class RepeatMetrics:
    seed: int
    train_cases: int
    test_cases: int
    message_length: float  # posterior-weighted best length, nits
    test_nll: float  # nits
    arc_count: float  # posterior-weighted
    parameter_count: float  # posterior-weighted

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "train_cases": self.train_cases,
            "test_cases": self.test_cases,
            "message_length": self.message_length,
            "test_nll": self.test_nll,
            "arcs": self.arc_count,
            "parameters": self.parameter_count,
        }


@dataclass(frozen=True)
class EvalSummary:
    repeats: tuple[RepeatMetrics, ...]

    def _mean(self, attribute: str) -> float:
        return float(np.mean([getattr(r, attribute) for r in self.repeats]))

    @property
    def mean_message_length(self) -> float:
        return self._mean("message_length")

    @property
    def mean_test_nll(self) -> float:
        return self._mean("test_nll")

    @property
    def mean_arc_count(self) -> float:
        return self._mean("arc_count")

    @property
    def mean_parameter_count(self) -> float:
        return self._mean("parameter_count")

    def to_dict(self) -> dict:
        return {
            "repeats": [r.to_dict() for r in self.repeats],
            "means": {
                "message_length": self.mean_message_length,
                "test_nll": self.mean_test_nll,
                "arcs": self.mean_arc_count,
                "parameters": self.mean_parameter_count,
            },
        }


def evaluate_split(
    train: DiscreteDataset,
    test: DiscreteDataset,
    config: SamplerConfig,
) -> RepeatMetrics:
    """Run the sampler on the training part and score the test part."""
    report = run_sampler(train, config)
    weights = _normalised_weights(report)
    networks = [
        fit_network(record.best_network, train, config.policy, config.sigma)
        for record in report.classes
    ]
    message_length = float(
        np.dot(weights, [record.best_length for record in report.classes])
    )
    arc_count = float(
        np.dot(weights, [record.best_network.arc_count for record in report.classes])
    )
    parameter_count = float(
        np.dot(weights, [network.parameter_count for network in networks])
    )
    nll = _mixture_nll(networks, np.log(weights), test)
    return RepeatMetrics(
        seed=config.seed,
        train_cases=train.n_cases,
        test_cases=test.n_cases,
        message_length=message_length,
        test_nll=nll,
        arc_count=arc_count,
        parameter_count=parameter_count,
    )


def cross_validate(
    ds: DiscreteDataset,
    repeats: int,
    config: SamplerConfig,
    test_fraction: float = 0.1,
) -> EvalSummary:
    """Repeated random splits; repeat r uses seed config.seed + r throughout."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    metrics = []
    for r in range(repeats):
        seed = config.seed + r
        train, test = split_train_test(ds, test_fraction, seed)
        metrics.append(evaluate_split(train, test, replace(config, seed=seed)))
    return EvalSummary(tuple(metrics))
