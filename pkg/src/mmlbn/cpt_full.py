"""Two-part code length of a node under a full conditional probability table.

The stated length is the adaptive-code form of the joint message: a fixed
quantisation penalty of (1/2) log(pi e / 6) per free parameter, plus the
negative log of the marginal likelihood of the counts under a uniform prior
over each configuration's child distribution. Configurations with no cases
contribute nothing, so only observed configurations need to be touched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .dataset import ContingencyCounts
from .errors import ParameterCapError

PARAMETER_CAP = 65000

_PENALTY_PER_PARAM = 0.5 * math.log(math.pi * math.e / 6.0)


@dataclass(frozen=True)
class FullCptScore:
    message_length: float  # nits
    free_params: int


def full_cpt_message_length(counts: ContingencyCounts) -> FullCptScore:
    """Code length in nits of stating a full table and the data under it."""
    r_y = counts.child_arity
    free = (r_y - 1) * counts.n_configs  # exact integer, may be huge
    if free >= PARAMETER_CAP:
        raise ParameterCapError(
            f"full table needs {free} free parameters (cap {PARAMETER_CAP})"
        )
    totals = counts.config_totals
    length = free * _PENALTY_PER_PARAM
    length += float(np.sum(gammaln(totals + r_y)))
    length -= counts.n_observed * float(gammaln(r_y))
    length -= float(np.sum(gammaln(counts.counts + 1)))
    return FullCptScore(length, int(free))


def full_cpt_predictive(counts: ContingencyCounts) -> np.ndarray:
    """Posterior-mean table: (count + 1) / (total + arity), rows sum to 1.

    Unseen configurations get the uniform distribution.
    """
    table = counts.dense().astype(float)
    return (table + 1.0) / (table.sum(axis=1, keepdims=True) + counts.child_arity)
