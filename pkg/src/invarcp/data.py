"""Multi-environment dataset: validation, pooling and splitting.

A :class:`Dataset` bundles a numeric predictor matrix, a target vector and
an integer environment label per row.  Environments index blocks of i.i.d.
samples recorded under different experimental or observational regimes;
all downstream tests compare fits across these blocks.  Labels are always
relabelled to a contiguous ``1..E`` on construction, in order of first
appearance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import (
    InvalidPartition,
    MissingColumn,
    NonNumericValue,
    SingleRow,
    UnknownColumn,
)


def _frozen_array(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable n x p predictor matrix with target and environment labels.

    Attributes
    ----------
    x : ndarray, shape (n, p)
        Predictor matrix. Finite floats only.
    y : ndarray, shape (n,)
        Target vector. Finite floats only.
    env : ndarray, shape (n,)
        Environment label per row, values in ``1..n_env``, each occurring
        at least once.
    names : tuple of str
        Predictor column names, unique and distinct from ``target_name``.
    target_name : str
        Name of the target column.
    """

    x: np.ndarray
    y: np.ndarray
    env: np.ndarray
    names: tuple[str, ...]
    target_name: str

    def __post_init__(self):
        x = _frozen_array(self.x, float)
        y = _frozen_array(self.y, float)
        env = _frozen_array(self.env, np.int64)
        if x.ndim != 2:
            raise ValueError("x must be two-dimensional")
        n, p = x.shape
        if n < 1 or p < 1:
            raise ValueError("need at least one row and one predictor")
        if y.shape != (n,) or env.shape != (n,):
            raise ValueError("y and env must have one entry per row of x")
        if not np.isfinite(x).all() or not np.isfinite(y).all():
            raise NonNumericValue("x and y must be finite")
        labels = np.unique(env)
        if labels[0] != 1 or labels[-1] != len(labels):
            raise ValueError("environment labels must cover 1..E")
        if len(self.names) != p:
            raise ValueError("need one name per predictor column")
        if len(set(self.names)) != p or self.target_name in self.names:
            raise ValueError("names must be unique and distinct from target_name")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "env", env)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_env(self) -> int:
        return int(self.env.max())

    def env_indices(self, label: int) -> np.ndarray:
        """Row indices belonging to environment ``label``."""
        return np.flatnonzero(self.env == label)

    def constant_columns(self) -> tuple[int, ...]:
        """Indices of predictor columns that are constant over all rows.

        Constant columns are retained; rank checks in the regression layer
        reject designs they render singular.
        """
        return tuple(
            j for j in range(self.p) if np.ptp(self.x[:, j]) == 0.0
        )

    def to_frame(self) -> pd.DataFrame:
        """Export as a data frame with target and ``env`` columns."""
        frame = pd.DataFrame(self.x, columns=list(self.names))
        frame[self.target_name] = self.y
        frame["env"] = self.env
        return frame


@dataclass(frozen=True)
class EnvironmentGrouping:
    """A partition of the environment labels ``1..E`` into pooled blocks."""

    groups: tuple[frozenset[int], ...]

    def __post_init__(self):
        groups = tuple(frozenset(g) for g in self.groups)
        if any(len(g) == 0 for g in groups):
            raise InvalidPartition("empty block in environment grouping")
        object.__setattr__(self, "groups", groups)

    def validate_for(self, n_env: int) -> None:
        seen: set[int] = set()
        for g in self.groups:
            if seen & g:
                raise InvalidPartition("blocks overlap")
            seen |= g
        if seen != set(range(1, n_env + 1)):
            raise InvalidPartition(
                f"blocks must cover labels 1..{n_env}, got {sorted(seen)}"
            )


def validate_dataset(raw_table: pd.DataFrame, target_col: str, env_col: str) -> Dataset:
    """Build a :class:`Dataset` from a tabular input.

    The environment column may hold strings or numbers; levels are mapped
    to ``1..E`` in order of first appearance.  All other columns become
    predictors.  Missing or non-numeric predictor/target cells are a hard
    error; no imputation is attempted.
    """
    for col in (target_col, env_col):
        if col not in raw_table.columns:
            raise MissingColumn(f"column {col!r} not in table")
    if len(raw_table) < 2:
        raise SingleRow("need at least two rows")
    env_raw = raw_table[env_col]
    if env_raw.isna().any():
        raise NonNumericValue(f"missing values in environment column {env_col!r}")
    codes: dict[object, int] = {}
    env = np.empty(len(raw_table), dtype=np.int64)
    for i, v in enumerate(env_raw.tolist()):
        if v not in codes:
            codes[v] = len(codes) + 1
        env[i] = codes[v]
    predictor_cols = [c for c in raw_table.columns if c not in (target_col, env_col)]
    if not predictor_cols:
        raise MissingColumn("table has no predictor columns")

    def _numeric(col: str) -> np.ndarray:
        values = pd.to_numeric(raw_table[col], errors="coerce").to_numpy(float)
        if not np.isfinite(values).all():
            raise NonNumericValue(f"non-numeric or non-finite value in column {col!r}")
        return values

    x = np.column_stack([_numeric(c) for c in predictor_cols])
    y = _numeric(target_col)
    return Dataset(x=x, y=y, env=env, names=tuple(predictor_cols), target_name=target_col)


def pool_environments(d: Dataset, grouping: EnvironmentGrouping) -> Dataset:
    """Merge environments into blocks, keeping rows, x and y unchanged.

    Pooling trades identifiability for per-block sample size: fewer, larger
    environments can only shrink the set of detectable invariance
    violations.
    """
    grouping.validate_for(d.n_env)
    block_of = {}
    for b, group in enumerate(grouping.groups, start=1):
        for label in group:
            block_of[label] = b
    # Blocks are numbered by their position in the grouping, so the
    # identity partition is a no-op and every block label 1..G occurs.
    env = np.array([block_of[int(e)] for e in d.env], dtype=np.int64)
    return Dataset(x=d.x, y=d.y, env=env, names=d.names, target_name=d.target_name)


def split_environments_by_variable(
    d: Dataset,
    split_col: str,
    cutpoints,
    *,
    keep_as_predictor: bool = False,
) -> Dataset:
    """Rebuild environments by binning one column at the given cutpoints.

    Intended for single-environment data: binning on a variable that is
    not a descendant of the target creates artificial environments while
    leaving the conditional law of the target given its causal parents
    untouched.  The split column is dropped from the predictors unless
    ``keep_as_predictor`` is set.  Empty bins are dropped with a warning
    and the remaining bins are relabelled contiguously.
    """
    if split_col not in d.names:
        raise UnknownColumn(f"split column {split_col!r} not among predictors")
    cut = np.asarray(cutpoints, dtype=float)
    if cut.ndim != 1 or cut.size == 0:
        raise ValueError("cutpoints must be a nonempty 1-d sequence")
    if not np.all(np.diff(cut) > 0):
        raise ValueError("cutpoints must be strictly increasing")
    j = d.names.index(split_col)
    values = d.x[:, j]
    bins = np.digitize(values, cut)  # 0..len(cut)
    occupied = np.unique(bins)
    if len(occupied) < len(cut) + 1:
        warnings.warn(
            f"{len(cut) + 1 - len(occupied)} empty bin(s) dropped when "
            f"splitting on {split_col!r}",
            stacklevel=2,
        )
    env = _relabel_contiguous(bins + 1)
    if keep_as_predictor:
        x, names = d.x, d.names
    else:
        keep = [k for k in range(d.p) if k != j]
        if not keep:
            raise ValueError("splitting would leave no predictor columns")
        x = d.x[:, keep]
        names = tuple(d.names[k] for k in keep)
    return Dataset(x=x, y=d.y, env=env, names=names, target_name=d.target_name)


def subset_environments(d: Dataset, keep) -> Dataset:
    """Restrict to rows whose environment is in ``keep``, relabelled 1..E'."""
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep must name at least one environment")
    mask = np.isin(d.env, keep)
    env = _relabel_contiguous(d.env[mask])
    return Dataset(
        x=d.x[mask], y=d.y[mask], env=env, names=d.names, target_name=d.target_name
    )


def _relabel_contiguous(labels: np.ndarray) -> np.ndarray:
    """Map labels to 1..E in order of first appearance."""
    mapping: dict[int, int] = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, v in enumerate(labels):
        v = int(v)
        if v not in mapping:
            mapping[v] = len(mapping) + 1
        out[i] = mapping[v]
    return out
