"""Categorical datasets, train/test splitting, and contingency counts.

Values are stored as small integer codes per variable, assigned in order of
first appearance in the source file. Contingency counts keep only the parent
configurations that actually occur in the data; every configuration that never
occurs contributes nothing to any code length computed downstream, so nothing
is lost by not materialising the full table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    DataFormatError,
    DegenerateVariableError,
    MissingValueError,
)

MISSING_TOKEN = "?"

# Dense tables above this many cells are refused outright.
MAX_DENSE_CELLS = 1 << 22


@dataclass(frozen=True)
class VariableMeta:
    """Name, arity and category labels of one discrete variable."""

    name: str
    arity: int
    labels: tuple[str, ...]

    def __post_init__(self):
        if self.arity < 2:
            raise DegenerateVariableError(
                f"variable {self.name!r} has arity {self.arity}; need at least 2"
            )
        if len(self.labels) != self.arity:
            raise DataFormatError(
                f"variable {self.name!r}: {len(self.labels)} labels for arity {self.arity}"
            )
        if len(set(self.labels)) != len(self.labels):
            raise DataFormatError(f"variable {self.name!r} has duplicate labels")


@dataclass(frozen=True, eq=False)
class DiscreteDataset:
    """A table of categorical cases with per-variable metadata."""

    variables: tuple[VariableMeta, ...]
    rows: np.ndarray  # (n_cases, n_variables) int32, read-only

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int32)
        if rows.ndim != 2 or rows.shape[1] != len(self.variables):
            raise DataFormatError(
                f"row array of shape {rows.shape} does not match "
                f"{len(self.variables)} variables"
            )
        for i, var in enumerate(self.variables):
            col = rows[:, i]
            if col.size and (col.min() < 0 or col.max() >= var.arity):
                raise DataFormatError(
                    f"column {var.name!r} holds codes outside [0, {var.arity})"
                )
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def n_cases(self) -> int:
        return self.rows.shape[0]

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(v.arity for v in self.variables)

    def arity(self, index: int) -> int:
        return self.variables[index].arity

    def subset(self, row_indices) -> "DiscreteDataset":
        """New dataset holding the selected rows; metadata is shared."""
        return DiscreteDataset(self.variables, self.rows[np.asarray(row_indices)])


def load_csv(path, missing_policy: str = "extra-category") -> DiscreteDataset:
    """Read a comma-separated file with one header row.

    Category codes are assigned in order of first appearance, column by
    column. The token "?" marks a missing value: under "extra-category" it
    becomes a category of its own, under "reject" it raises.
    """
    if missing_policy not in ("extra-category", "reject"):
        raise ValueError(f"unknown missing policy {missing_policy!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        m = len(header)
        codes: list[dict[str, int]] = [{} for _ in range(m)]
        data = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != m:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {m} fields, found {len(row)}"
                )
            encoded = []
            for i, token in enumerate(row):
                token = token.strip()
                if token == MISSING_TOKEN and missing_policy == "reject":
                    raise MissingValueError(
                        f"{path}:{lineno}: missing value in column {header[i]!r}"
                    )
                table = codes[i]
                code = table.setdefault(token, len(table))
                encoded.append(code)
            data.append(encoded)
    if not data:
        raise DataFormatError(f"{path}: no data rows")
    variables = []
    for i, name in enumerate(header):
        labels = tuple(codes[i])  # dict preserves first-appearance order
        if len(labels) < 2:
            raise DegenerateVariableError(
                f"{path}: column {name!r} has a single distinct value"
            )
        variables.append(VariableMeta(name, len(labels), labels))
    return DiscreteDataset(tuple(variables), np.array(data, dtype=np.int32))


def load_csv_with_labels(path, variables: tuple[VariableMeta, ...]) -> DiscreteDataset:
    """Read a file using an existing dataset's label-to-code mapping.

    Used to align a held-out test file with its training data. Tokens that
    the training data never produced are rejected.
    """
    lookup = [{label: k for k, label in enumerate(v.labels)} for v in variables]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if len(header) != len(variables):
            raise DataFormatError(
                f"{path}: {len(header)} columns, expected {len(variables)}"
            )
        data = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(variables):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(variables)} fields, found {len(row)}"
                )
            encoded = []
            for i, token in enumerate(row):
                token = token.strip()
                try:
                    encoded.append(lookup[i][token])
                except KeyError:
                    raise DataFormatError(
                        f"{path}:{lineno}: unknown value {token!r} in column "
                        f"{variables[i].name!r}"
                    ) from None
            data.append(encoded)
    if not data:
        raise DataFormatError(f"{path}: no data rows")
    return DiscreteDataset(variables, np.array(data, dtype=np.int32))


def split_train_test(ds: DiscreteDataset, test_fraction: float, seed: int):
    """Random split into (train, test); test size is round(N * test_fraction).

    Halves are rounded up. Both parts must end up non-empty.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n = ds.n_cases
    if math.floor(n * test_fraction) < 1:
        raise ValueError("test split would be empty")
    n_test = math.floor(n * test_fraction + 0.5)
    if n - n_test < 1:
        raise ValueError("train split would be empty")
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return ds.subset(train_idx), ds.subset(test_idx)


def config_strides(parent_arities) -> tuple[int, ...]:
    """Mixed-radix strides with the first parent most significant."""
    arities = tuple(parent_arities)
    q = len(arities)
    strides = [1] * q
    for i in range(q - 2, -1, -1):
        strides[i] = strides[i + 1] * arities[i + 1]
    return tuple(strides)


def config_index(digits, parent_arities) -> int:
    """Mixed-radix index of one parent configuration (exact integer)."""
    arities = tuple(parent_arities)
    if len(digits) != len(arities):
        raise ValueError("digit count does not match parent count")
    index = 0
    for d, r in zip(digits, arities):
        d = int(d)
        if not 0 <= d < r:
            raise ValueError(f"digit {d} out of range for arity {r}")
        index = index * r + d
    return index


def config_digits(index, parent_arities) -> tuple[int, ...]:
    """Inverse of config_index."""
    arities = tuple(parent_arities)
    index = int(index)
    total = math.prod(arities)
    if not 0 <= index < max(total, 1):
        raise ValueError(f"configuration index {index} out of range")
    digits = [0] * len(arities)
    for i in range(len(arities) - 1, -1, -1):
        index, digits[i] = divmod(index, arities[i])
    return tuple(digits)


@dataclass(frozen=True, eq=False)
class ContingencyCounts:
    """Child-value counts per observed parent configuration.

    config_digits holds the observed configurations as rows of parent values,
    sorted lexicographically (equivalently: ascending mixed-radix index, first
    parent most significant). counts[row, k] is the number of cases with the
    child at value k under that configuration.
    """

    child_arity: int
    parent_arities: tuple[int, ...]
    config_digits: np.ndarray  # (n_observed, n_parents) int32
    counts: np.ndarray  # (n_observed, child_arity) int64

    def __post_init__(self):
        digits = np.array(self.config_digits, dtype=np.int32)
        counts = np.array(self.counts, dtype=np.int64)
        if digits.ndim != 2 or digits.shape[1] != len(self.parent_arities):
            raise ValueError("configuration array shape mismatch")
        if counts.shape != (digits.shape[0], self.child_arity):
            raise ValueError("count array shape mismatch")
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be non-negative")
        for j, r in enumerate(self.parent_arities):
            col = digits[:, j]
            if col.size and (col.min() < 0 or col.max() >= r):
                raise ValueError(f"parent digit out of range for arity {r}")
        if digits.shape[0] > 1:
            uniq = np.unique(digits, axis=0)
            if uniq.shape[0] != digits.shape[0]:
                raise ValueError("duplicate parent configurations")
        digits.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "config_digits", digits)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "parent_arities", tuple(self.parent_arities))

    @property
    def n_parents(self) -> int:
        return len(self.parent_arities)

    @property
    def n_observed(self) -> int:
        return self.config_digits.shape[0]

    @property
    def n_configs(self) -> int:
        """Total number of parent configurations (exact integer)."""
        return math.prod(self.parent_arities)

    @property
    def config_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def n_cases(self) -> int:
        return int(self.counts.sum())

    def config_indices(self) -> np.ndarray:
        """Mixed-radix indices of the observed configurations."""
        if self.n_configs >= 1 << 62:
            raise CapacityError("configuration space too large to index")
        strides = np.array(config_strides(self.parent_arities), dtype=np.int64)
        if self.n_parents == 0:
            return np.zeros(self.n_observed, dtype=np.int64)
        return self.config_digits.astype(np.int64) @ strides

    def dense(self) -> np.ndarray:
        """Full (n_configs, child_arity) table, zeros for unseen configs."""
        cells = self.n_configs * self.child_arity
        if cells > MAX_DENSE_CELLS:
            raise CapacityError(f"dense table would need {cells} cells")
        table = np.zeros((self.n_configs, self.child_arity), dtype=np.int64)
        table[self.config_indices()] = self.counts
        return table

    @classmethod
    def from_dense(cls, child_arity, parent_arities, table) -> "ContingencyCounts":
        """Build from a full table indexed by mixed-radix configuration."""
        parent_arities = tuple(parent_arities)
        table = np.asarray(table, dtype=np.int64)
        n_configs = math.prod(parent_arities)
        if table.shape != (n_configs, child_arity):
            raise ValueError(
                f"table shape {table.shape} does not match "
                f"({n_configs}, {child_arity})"
            )
        observed = np.flatnonzero(table.sum(axis=1) > 0)
        digits = np.array(
            [config_digits(i, parent_arities) for i in observed], dtype=np.int32
        ).reshape(len(observed), len(parent_arities))
        return cls(child_arity, parent_arities, digits, table[observed])


def counts_for(ds: DiscreteDataset, child: int, parents) -> ContingencyCounts:
    """Tally child values against each observed parent configuration."""
    parents = tuple(int(p) for p in parents)
    m = ds.n_variables
    if not 0 <= child < m:
        raise ValueError(f"child index {child} out of range")
    if any(not 0 <= p < m for p in parents):
        raise ValueError("parent index out of range")
    if len(set(parents)) != len(parents):
        raise ValueError("duplicate parent indices")
    if child in parents:
        raise ValueError("child cannot be its own parent")
    r_y = ds.arity(child)
    parent_arities = tuple(ds.arity(p) for p in parents)
    n = ds.n_cases
    if parents:
        block = ds.rows[:, list(parents)]
        uniq, inverse = np.unique(block, axis=0, return_inverse=True)
    else:
        uniq = np.zeros((1 if n else 0, 0), dtype=np.int32)
        inverse = np.zeros(n, dtype=np.int64)
    counts = np.zeros((uniq.shape[0], r_y), dtype=np.int64)
    if n:
        np.add.at(counts, (inverse.ravel(), ds.rows[:, child]), 1)
    return ContingencyCounts(r_y, parent_arities, uniq.astype(np.int32), counts)
