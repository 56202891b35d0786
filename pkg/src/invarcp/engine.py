"""Subset search over candidate predictor sets.

The estimator tests every candidate set S for invariance across
environments, intersects the accepted sets and reports per-variable
confidence intervals as the union of per-set confidence rectangles.  If
the test for a set holds its level, the intersection is contained in any
true invariant set with probability at least 1 - alpha, and the interval
union covers the true coefficient vector with probability at least
1 - 2*alpha.

Sets are enumerated by cardinality, lexicographically within a
cardinality.  The search stops at a cardinality boundary as soon as the
intersection of the accepted sets is empty (the final intersection could
only shrink further), so a run that returns a nonempty estimate has
always enumerated every candidate set.  Synchronising the stop decision
at level boundaries makes the outcome independent of within-level order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, subset_environments
from .errors import InfeasibleConfig
from .invariance import (
    DEFAULT_SUBSAMPLE_CAP,
    METHOD_CHOW,
    METHOD_RESIDUAL,
    EnvMoments,
    invariance_test,
)
from .stats import _ols_design, add_intercept, t_quantile


@dataclass(frozen=True)
class IcpConfig:
    """Knobs of the subset search.

    alpha            test level; also used for the per-set confidence
                     rectangles (joint interval coverage is 1 - 2*alpha).
    method           1 = leave-one-environment-out regression test,
                     2 = pooled residual test (default; faster).
    max_set_size     cap on |S| during enumeration, None = no cap.
    preselect_q      screen down to the q predictors with the largest
                     absolute pooled correlation before searching.
    gof_cutoff       if the best combined p-value over all tested sets
                     falls below this, the whole model is flagged as
                     rejected and intervals are withheld.
    robust_v         accept S if it is invariant on some subset of
                     environments obtained by dropping at most v of them.
    seed             drives the method-1 subsampling only.
    subsample_cap    per-environment row cap for method 1.
    """

    alpha: float = 0.05
    method: int = METHOD_RESIDUAL
    max_set_size: int | None = None
    preselect_q: int | None = None
    gof_cutoff: float = 0.0
    robust_v: int = 0
    seed: int = 0
    subsample_cap: int | None = DEFAULT_SUBSAMPLE_CAP

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InfeasibleConfig(f"alpha must be in (0,1), got {self.alpha}")
        if self.method not in (METHOD_CHOW, METHOD_RESIDUAL):
            raise InfeasibleConfig(f"method must be 1 or 2, got {self.method}")
        if self.max_set_size is not None and self.max_set_size < 0:
            raise InfeasibleConfig("max_set_size must be nonnegative")
        if self.preselect_q is not None and self.preselect_q < 1:
            raise InfeasibleConfig("preselect_q must be positive")
        if self.robust_v < 0:
            raise InfeasibleConfig("robust_v must be nonnegative")
        if not 0.0 <= self.gof_cutoff < 1.0:
            raise InfeasibleConfig("gof_cutoff must be in [0,1)")


@dataclass(frozen=True)
class VariableInterval:
    """Closed interval for one coefficient, with its exact union pieces.

    ``lo``/``hi`` give the interval hull; ``pieces`` keeps the disjoint
    sub-intervals whose union the hull covers (rectangles of different
    accepted sets need not overlap).  The degenerate ``{0}`` interval
    marks a variable pinned to zero.
    """

    lo: float
    hi: float
    contains_zero: bool
    pieces: tuple[tuple[float, float], ...] = field(default=())

    @property
    def degenerate(self) -> bool:
        return self.lo == 0.0 and self.hi == 0.0

    @staticmethod
    def zero() -> "VariableInterval":
        return VariableInterval(0.0, 0.0, True, ((0.0, 0.0),))


@dataclass(frozen=True)
class IcpResult:
    """Outcome of a subset search.

    accepted        (set, combined p-value) for every accepted tested set.
    s_hat           intersection of the accepted sets (empty if none).
    intervals       per-variable interval union, ``None`` when the model
                    is rejected; all-degenerate when ``s_hat`` is empty.
    model_rejected  no set passed the test (or the best p-value fell
                    below the goodness-of-fit cutoff).
    best_p          largest combined p-value among tested sets.
    tested_count    number of sets actually tested.
    """

    accepted: tuple[tuple[tuple[int, ...], float], ...]
    s_hat: frozenset[int]
    intervals: tuple[VariableInterval, ...] | None
    model_rejected: bool
    best_p: float
    tested_count: int
    intervals_from_grid: bool = False

    def accepted_sets(self) -> list[set[int]]:
        return [set(s) for s, _ in self.accepted]


def preselect(d: Dataset, q: int) -> tuple[int, ...]:
    """Deterministic screening: top-q predictors by absolute pooled
    correlation with the target.  Constant columns score zero; ties break
    toward the smaller column index.  Returns ascending indices."""
    y = d.y - d.y.mean()
    sy = np.sqrt((y**2).sum())
    scores = np.zeros(d.p)
    if sy > 0:
        xc = d.x - d.x.mean(axis=0)
        sx = np.sqrt((xc**2).sum(axis=0))
        ok = sx > 0
        scores[ok] = np.abs(xc[:, ok].T @ y) / (sx[ok] * sy)
    order = sorted(range(d.p), key=lambda j: (-scores[j], j))
    return tuple(sorted(order[: min(q, d.p)]))


def confidence_intervals(
    d: Dataset, accepted, alpha: float
) -> tuple[VariableInterval, ...]:
    """Union of per-set confidence rectangles over the accepted sets.

    For each accepted set S the rectangle on pooled data is centred at the
    pooled OLS coefficients with half-widths

        t_{1 - alpha/(2|S|), n-|S|-1} * sigma_hat * se_k,

    where ``se_k`` is the root of the k-th diagonal entry of
    ``(X_S' X_S)^{-1}`` (intercept included in the design, excluded from
    the rectangle).  Coordinates outside S are pinned to {0}.  The output
    per variable is the hull of the union, with the exact disjoint pieces
    and a zero-membership flag preserved.
    """
    accepted = [tuple(sorted(int(j) for j in s)) for s in accepted]
    if not accepted:
        raise ValueError("accepted must be nonempty")
    per_var: list[list[tuple[float, float]]] = [[] for _ in range(d.p)]
    for s in accepted:
        rect = _rectangle(d, s, alpha)
        for k in range(d.p):
            per_var[k].append(rect.get(k, (0.0, 0.0)))
    out = []
    for k in range(d.p):
        pieces = _merge_pieces(per_var[k])
        lo, hi = pieces[0][0], pieces[-1][1]
        zero = any(a <= 0.0 <= b for a, b in pieces)
        out.append(VariableInterval(lo=lo, hi=hi, contains_zero=zero, pieces=pieces))
    return tuple(out)


def _rectangle(d: Dataset, s: tuple[int, ...], alpha: float) -> dict[int, tuple[float, float]]:
    """Confidence rectangle of one set as a map coordinate -> (lo, hi)."""
    if not s:
        return {}
    fit = _ols_design(add_intercept(d.x[:, s], n_rows=d.n), d.y)
    quant = t_quantile(1.0 - alpha / (2.0 * len(s)), d.n - len(s) - 1)
    sigma = np.sqrt(fit.sigma2_hat)
    rect = {}
    for pos, k in enumerate(s, start=1):
        half = quant * sigma * np.sqrt(fit.xtx_inv[pos, pos])
        center = fit.coef[pos]
        rect[k] = (center - half, center + half)
    return rect


def _merge_pieces(pieces) -> tuple[tuple[float, float], ...]:
    pieces = sorted(pieces)
    merged = [list(pieces[0])]
    for lo, hi in pieces[1:]:
        if lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return tuple((lo, hi) for lo, hi in merged)


# ----------------------------------------------------------------------
# Search


def _level_search(pool, max_size, test_fn, alpha, early_stop):
    """Enumerate sets per cardinality level, test, and optionally stop at
    a level boundary once the running intersection of accepted sets is
    empty.  Returns (accepted list, tested count, best p)."""
    pool = sorted(pool)
    accepted: list[tuple[tuple[int, ...], float]] = []
    tested = 0
    best_p = 0.0
    running: set[int] | None = None
    for size in range(min(max_size, len(pool)) + 1):
        for s in itertools.combinations(pool, size):
            p = test_fn(s)
            tested += 1
            best_p = max(best_p, p)
            if p > alpha:
                accepted.append((s, p))
                running = set(s) if running is None else running & set(s)
        if early_stop and running is not None and not running:
            break
    return accepted, tested, best_p


def _assemble(
    d: Dataset,
    cfg: IcpConfig,
    accepted,
    tested,
    best_p,
    build_intervals=None,
    from_grid: bool = False,
) -> IcpResult:
    if accepted:
        s_hat = frozenset.intersection(*[frozenset(s) for s, _ in accepted])
        model_rejected = False
    else:
        s_hat = frozenset()
        model_rejected = True
    if best_p < cfg.gof_cutoff:
        model_rejected = True
    if model_rejected:
        intervals = None
    elif not s_hat:
        # No variable survives the intersection: no coefficient claim is
        # made, so every interval collapses to {0}.  This keeps the output
        # independent of where the search stopped.
        intervals = tuple(VariableInterval.zero() for _ in range(d.p))
    else:
        if build_intervals is None:
            build_intervals = lambda sets: confidence_intervals(d, sets, cfg.alpha)
        intervals = build_intervals([s for s, _ in accepted])
    return IcpResult(
        accepted=tuple(accepted),
        s_hat=s_hat,
        intervals=intervals,
        model_rejected=model_rejected,
        best_p=best_p,
        tested_count=tested,
        intervals_from_grid=from_grid,
    )


def _make_test_fn(d: Dataset, cfg: IcpConfig):
    """Combined p-value of one candidate set, honouring ``robust_v``.

    With ``robust_v = v > 0`` a set scores the best p-value over all
    environment subsets obtained by dropping at most v environments;
    single-environment subsets are vacuously invariant (p = 1).
    """
    if cfg.robust_v == 0:
        moments = EnvMoments(d)

        def test_fn(s):
            return invariance_test(
                d,
                s,
                cfg.method,
                subsample_cap=cfg.subsample_cap,
                rng_seed=cfg.seed,
                moments=moments,
            ).p_value

        return test_fn

    n_env = d.n_env
    restricted: list[tuple[Dataset, EnvMoments] | None] = []
    for keep_size in range(n_env, n_env - cfg.robust_v - 1, -1):
        for keep in itertools.combinations(range(1, n_env + 1), keep_size):
            if keep_size >= 2:
                sub = subset_environments(d, keep)
                restricted.append((sub, EnvMoments(sub)))
            else:
                restricted.append(None)

    def robust_test_fn(s):
        best = 0.0
        for entry in restricted:
            if entry is None:
                return 1.0
            sub, sub_moments = entry
            p = invariance_test(
                sub,
                s,
                cfg.method,
                subsample_cap=cfg.subsample_cap,
                rng_seed=cfg.seed,
                moments=sub_moments,
            ).p_value
            best = max(best, p)
        return best

    return robust_test_fn


def _check_robust_v(cfg: IcpConfig, n_env: int) -> None:
    if cfg.robust_v >= n_env and cfg.robust_v > 0:
        raise InfeasibleConfig(
            f"robust_v must be smaller than the number of environments ({n_env})"
        )


def _single_env_result(d: Dataset, cfg: IcpConfig) -> IcpResult:
    # One environment: the empty set is trivially invariant, nothing is
    # identifiable, and no claim is made.
    return _assemble(d, cfg, accepted=[((), 1.0)], tested=1, best_p=1.0)


def run_icp(d: Dataset, cfg: IcpConfig | None = None) -> IcpResult:
    """Search candidate sets, intersect the accepted ones, build intervals.

    Enumerates subsets of the candidate pool (all predictors, or the
    ``preselect_q`` screened ones) by increasing cardinality up to
    ``max_set_size``, testing each at level ``cfg.alpha`` with the chosen
    method, with early stopping at level boundaries.
    """
    cfg = cfg or IcpConfig()
    _check_robust_v(cfg, d.n_env)
    if d.n_env == 1:
        return _single_env_result(d, cfg)
    pool = preselect(d, cfg.preselect_q) if cfg.preselect_q is not None else range(d.p)
    max_size = d.p if cfg.max_set_size is None else cfg.max_set_size
    accepted, tested, best_p = _level_search(
        pool, max_size, _make_test_fn(d, cfg), cfg.alpha, early_stop=True
    )
    return _assemble(d, cfg, accepted, tested, best_p)


def run_icp_robust(d: Dataset, cfg: IcpConfig) -> IcpResult:
    """`run_icp` under the weakened null that allows up to ``robust_v``
    environments to deviate (for example because the target itself was
    intervened on there).  With ``robust_v = 0`` this is exactly
    :func:`run_icp`."""
    return run_icp(d, cfg)


def brute_force_oracle(d: Dataset, cfg: IcpConfig | None = None) -> IcpResult:
    """Reference implementation: every one of the 2^p sets is tested, with
    no early stopping, preselection or size cap.  Semantics otherwise
    identical to :func:`run_icp`; used to validate the pruned search."""
    cfg = cfg or IcpConfig()
    if d.p > 12:
        raise InfeasibleConfig("brute-force enumeration is capped at p <= 12")
    _check_robust_v(cfg, d.n_env)
    if d.n_env == 1:
        return _single_env_result(d, cfg)
    accepted, tested, best_p = _level_search(
        range(d.p), d.p, _make_test_fn(d, cfg), cfg.alpha, early_stop=False
    )
    return _assemble(d, cfg, accepted, tested, best_p)
