"""Invariance testing that tolerates hidden confounding.

With a hidden common cause of predictors and target, regression residuals
are no longer independent of the predictors, so the pooled-OLS tests do
not apply.  What still holds for the true coefficient vector is weaker:
the residuals ``y - x @ gamma`` have the *same distribution* in every
environment.  The tests here check exactly that, with a two-sample
Kolmogorov-Smirnov statistic per environment (Bonferroni-combined), for
``gamma`` ranging over a rectangular grid around the pooled OLS estimate.
A candidate set is accepted if any grid point yields an invariant
residual distribution; accepting too generously only shrinks the final
intersection, so the direction of the approximation is conservative.

The default grid spans +/- 6 pooled standard errors per coordinate with
11 points per axis; widen it if the confounding bias may push the true
coefficients further from the OLS centre.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .engine import IcpConfig, VariableInterval, _assemble, _merge_pieces, preselect
from .errors import GridTooLarge, InfeasibleConfig, TooFewSamples
from .stats import _ols_design, add_intercept, ks_pvalue

DEFAULT_POINTS_PER_AXIS = 11
DEFAULT_WIDTH_SE = 6.0
MAX_GRID_POINTS = 10**7


@dataclass(frozen=True)
class GridSpec:
    """A realised coefficient grid for one candidate set.

    One axis per coordinate of the set, ``points_per_axis`` points spaced
    evenly over ``center +/- half_widths``.  ``points_per_axis`` must be
    odd so the centre itself is on the grid.
    """

    center: np.ndarray
    half_widths: np.ndarray
    points_per_axis: int = DEFAULT_POINTS_PER_AXIS

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        half = np.atleast_1d(np.asarray(self.half_widths, dtype=float))
        if center.shape != half.shape:
            raise ValueError("center and half_widths must have equal length")
        if center.size and (half <= 0).any():
            raise ValueError("half_widths must be positive")
        if self.points_per_axis % 2 != 1 or self.points_per_axis < 1:
            raise ValueError("points_per_axis must be odd and positive")
        center.setflags(write=False)
        half.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_widths", half)

    @property
    def n_points(self) -> int:
        return self.points_per_axis ** self.center.size

    def points(self) -> np.ndarray:
        """All grid points, shape (n_points, n_axes), in lexicographic
        order of the per-axis indices."""
        if self.center.size == 0:
            return np.zeros((1, 0))
        if self.n_points > MAX_GRID_POINTS:
            raise GridTooLarge(
                f"grid would hold {self.n_points} points (cap {MAX_GRID_POINTS})"
            )
        axes = [
            c + np.linspace(-h, h, self.points_per_axis)
            for c, h in zip(self.center, self.half_widths)
        ]
        return np.array(list(itertools.product(*axes)))

    @staticmethod
    def from_pooled_ols(
        d: Dataset,
        s,
        width_se: float = DEFAULT_WIDTH_SE,
        points_per_axis: int = DEFAULT_POINTS_PER_AXIS,
    ) -> "GridSpec":
        """Centre the grid at the pooled OLS coefficients of the set with
        half-widths ``width_se`` pooled standard errors per coordinate."""
        s = tuple(sorted(int(j) for j in s))
        if not s:
            return GridSpec(np.zeros(0), np.zeros(0), points_per_axis)
        fit = _ols_design(add_intercept(d.x[:, s], n_rows=d.n), d.y)
        se = np.sqrt(fit.sigma2_hat * np.diag(fit.xtx_inv)[1:])
        half = np.maximum(width_se * se, 1e-9 * np.maximum(np.abs(fit.coef[1:]), 1.0))
        return GridSpec(fit.coef[1:], half, points_per_axis)


def hidden_invariance_test(d: Dataset, gamma) -> float:
    """P-value for identically distributed residuals ``y - x @ gamma``
    across environments: Bonferroni-combined two-sample KS of each
    environment against its complement.  Vacuously 1 for one environment.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (d.p,):
        raise ValueError(f"gamma must have length p = {d.p}")
    if d.n_env == 1:
        return 1.0
    res = d.y - d.x @ gamma
    raw = _batched_ks_per_env(res[:, None], d.env, d.n_env)[:, 0]
    return float(min(1.0, d.n_env * raw.min()))


@dataclass(frozen=True)
class HiddenSetResult:
    """Grid-search outcome for one candidate set."""

    set: tuple[int, ...]
    accepted: bool
    best_gamma: np.ndarray | None
    best_p: float
    gamma_box: dict[int, tuple[float, float]]


def hidden_set_test(
    d: Dataset,
    s,
    alpha: float,
    grid: GridSpec | None = None,
    *,
    width_se: float = DEFAULT_WIDTH_SE,
    points_per_axis: int = DEFAULT_POINTS_PER_AXIS,
) -> HiddenSetResult:
    """Accept the set if any grid coefficient yields invariant residuals.

    ``best_gamma`` is the full-length coefficient vector attaining the
    largest combined p-value (earliest grid index on ties), and
    ``gamma_box`` bounds the accepted grid points per coordinate.
    """
    s = tuple(sorted(int(j) for j in s))
    if grid is None:
        grid = GridSpec.from_pooled_ols(d, s, width_se, points_per_axis)
    points = grid.points()
    if points.shape[1] != len(s):
        raise ValueError("grid dimension does not match the candidate set")
    gammas = np.zeros((len(points), d.p))
    if s:
        gammas[:, list(s)] = points
    if d.n_env == 1:
        combined = np.ones(len(points))
    else:
        res = d.y[:, None] - d.x @ gammas.T
        raw = _batched_ks_per_env(res, d.env, d.n_env)
        combined = np.minimum(1.0, d.n_env * raw.min(axis=0))
    best_idx = int(np.argmax(combined))
    best_p = float(combined[best_idx])
    ok = combined > alpha
    box: dict[int, tuple[float, float]] = {}
    if ok.any() and s:
        sel = points[ok]
        for pos, k in enumerate(s):
            box[k] = (float(sel[:, pos].min()), float(sel[:, pos].max()))
    return HiddenSetResult(
        set=s,
        accepted=bool(ok.any()),
        best_gamma=gammas[best_idx] if ok.any() else None,
        best_p=best_p,
        gamma_box=box,
    )


def run_hidden_icp(
    d: Dataset,
    cfg: IcpConfig | None = None,
    *,
    width_se: float = DEFAULT_WIDTH_SE,
    points_per_axis: int = DEFAULT_POINTS_PER_AXIS,
):
    """Subset search under the hidden-confounder null.

    Same enumeration, early stopping and intersection logic as
    :func:`invarcp.engine.run_icp`, with :func:`hidden_set_test` deciding
    acceptance.  Intervals are the hull of the accepted coefficient boxes
    and inherit the grid resolution (``intervals_from_grid`` is set on the
    result).  The exponential grid cost must be kept in check through
    ``max_set_size`` / ``preselect_q`` for larger p.
    """
    cfg = cfg or IcpConfig()
    if cfg.robust_v:
        raise InfeasibleConfig("robust_v is not supported with the hidden-variable test")
    if d.n_env == 1:
        accepted_results = [
            HiddenSetResult((), True, np.zeros(d.p), 1.0, {})
        ]
        return _assemble_hidden(d, cfg, accepted_results, tested=1, best_p=1.0)
    pool = sorted(preselect(d, cfg.preselect_q) if cfg.preselect_q is not None else range(d.p))
    max_size = len(pool) if cfg.max_set_size is None else min(cfg.max_set_size, len(pool))
    if points_per_axis**max_size > MAX_GRID_POINTS:
        raise InfeasibleConfig(
            f"sets up to size {max_size} exceed the grid budget; lower "
            "max_set_size or points_per_axis"
        )
    accepted_results: list[HiddenSetResult] = []
    tested = 0
    best_p = 0.0
    running: set[int] | None = None
    for size in range(max_size + 1):
        for s in itertools.combinations(pool, size):
            r = hidden_set_test(
                d, s, cfg.alpha, width_se=width_se, points_per_axis=points_per_axis
            )
            tested += 1
            best_p = max(best_p, r.best_p)
            if r.accepted:
                accepted_results.append(r)
                running = set(s) if running is None else running & set(s)
        if running is not None and not running:
            break
    return _assemble_hidden(d, cfg, accepted_results, tested, best_p)


def _assemble_hidden(d: Dataset, cfg: IcpConfig, results, tested: int, best_p: float):
    accepted = [(r.set, r.best_p) for r in results]

    def build_intervals(_sets):
        per_var: list[list[tuple[float, float]]] = [[] for _ in range(d.p)]
        for r in results:
            for k in range(d.p):
                per_var[k].append(r.gamma_box.get(k, (0.0, 0.0)))
        intervals = []
        for k in range(d.p):
            pieces = _merge_pieces(per_var[k])
            intervals.append(
                VariableInterval(
                    lo=pieces[0][0],
                    hi=pieces[-1][1],
                    contains_zero=any(a <= 0.0 <= b for a, b in pieces),
                    pieces=pieces,
                )
            )
        return tuple(intervals)

    return _assemble(
        d, cfg, accepted, tested, best_p, build_intervals=build_intervals, from_grid=True
    )


def _batched_ks_per_env(res: np.ndarray, env: np.ndarray, n_env: int) -> np.ndarray:
    """Raw KS p-values, one row per environment, one column per residual
    column: environment block versus its complement.

    Each column is argsorted once; the KS distance is then the maximum gap
    between the two running empirical CDFs along the sorted order.
    """
    n, m = res.shape
    order = np.argsort(res, axis=0)
    out = np.empty((n_env, m))
    rows = np.arange(1, n + 1, dtype=float)[:, None]
    for e in range(1, n_env + 1):
        if n_env == 2 and e == 2:
            # block-vs-complement is symmetric with two environments
            out[1] = out[0]
            break
        ind = (env == e).astype(float)
        ne = int(ind.sum())
        nr = n - ne
        if ne < 8 or nr < 8:
            raise TooFewSamples(
                "each environment and its complement need at least 8 rows"
            )
        cum_e = np.cumsum(ind[order], axis=0)
        dist = np.abs(cum_e / ne - (rows - cum_e) / nr).max(axis=0)
        out[e - 1] = ks_pvalue(dist, ne * nr / (ne + nr))
    return out
