"""Per-set invariance tests across environments.

Both tests target the same null hypothesis for a candidate predictor set
S: the regression of the target on ``X_S`` has the same coefficients and
the same residual scale in every environment.

* Method 1 (:func:`chow_invariance_test`) holds out one environment at a
  time, fits OLS on the remainder and applies an exact Chow-type F test to
  the held-out prediction errors.  Exact under Gaussian errors.
* Method 2 (:func:`residual_invariance_test`) fits a single pooled OLS and
  compares the residual mean (Welch t) and variance (F) of each
  environment against its complement.  Approximate but much faster.

Both return a single Bonferroni-combined p-value so callers can compare
the best-fitting set against a goodness-of-fit cutoff.

Everything is computed from per-environment cross-moment matrices of the
intercept-extended design (:class:`EnvMoments`): a subset-search caller
builds them once and each candidate set costs O(|S|^3) regardless of the
number of rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .data import Dataset
from .errors import EnvironmentTooSmall, RankDeficient
from .stats import f_sf, variance_f_from_stats, welch_t_from_stats

METHOD_CHOW = 1
METHOD_RESIDUAL = 2

DEFAULT_SUBSAMPLE_CAP = 500

# Gram matrices square the design's condition number; this bound on the
# Gram eigenvalue ratio rejects designs long before the moment algebra
# loses the digits the t/F statistics need.
_GRAM_COND_LIMIT = 1e14


@dataclass(frozen=True)
class InvarianceTestResult:
    """Outcome of one invariance test.

    ``p_value`` is the Bonferroni-combined p-value; ``per_env`` holds the
    raw (uncorrected) p-value per environment label.  For method 2 the raw
    value per environment is the smaller of its mean- and variance-test
    p-values, with the two components kept in ``per_env_detail``.
    """

    set: tuple[int, ...]
    p_value: float
    per_env: tuple[tuple[int, float], ...]
    method: int
    per_env_detail: tuple[tuple[int, float, float], ...] = field(default=())

    def rejected(self, alpha: float) -> bool:
        return self.p_value <= alpha


class EnvMoments:
    """Per-environment cross-moments of ``[1, X]`` and the target.

    For each environment e this stores the Gram matrix of the
    intercept-extended design over its rows, the design/target cross
    vector and the target sum of squares.  Together these are sufficient
    statistics for every pooled or leave-one-environment-out OLS quantity
    the tests need, for any candidate column subset.
    """

    def __init__(self, d: Dataset):
        self.dataset = d
        z = np.column_stack([np.ones(d.n), d.x])
        self.gram: list[np.ndarray] = []
        self.zy: list[np.ndarray] = []
        self.yy: list[float] = []
        self.n: list[int] = []
        for e in range(1, d.n_env + 1):
            idx = d.env_indices(e)
            ze, ye = z[idx], d.y[idx]
            self.gram.append(ze.T @ ze)
            self.zy.append(ze.T @ ye)
            self.yy.append(float(ye @ ye))
            self.n.append(len(idx))
        self._scoring_cache: dict[tuple[int | None, int], list] = {}

    def scoring(self, subsample_cap: int | None, rng_seed: int):
        """Moments of the held-out side for the leave-one-out test, with
        environments above ``subsample_cap`` rows replaced by a seeded
        subsample.  The subsample depends only on (cap, seed, environment),
        never on the candidate set."""
        key = (subsample_cap, rng_seed)
        if key not in self._scoring_cache:
            d = self.dataset
            z = np.column_stack([np.ones(d.n), d.x])
            entries = []
            for e in range(1, d.n_env + 1):
                idx = d.env_indices(e)
                if subsample_cap is not None and len(idx) > subsample_cap:
                    rng = np.random.default_rng([rng_seed, e])
                    idx = np.sort(rng.choice(idx, size=subsample_cap, replace=False))
                    ze, ye = z[idx], d.y[idx]
                    entries.append((ze.T @ ze, ze.T @ ye, float(ye @ ye), len(idx)))
                else:
                    entries.append(
                        (self.gram[e - 1], self.zy[e - 1], self.yy[e - 1], self.n[e - 1])
                    )
            self._scoring_cache[key] = entries
        return self._scoring_cache[key]


def _design_cols(s) -> list[int]:
    return [0] + [int(j) + 1 for j in s]


def _solve_pd(a: np.ndarray, b: np.ndarray):
    """Solve the SPD system with a conditioning guard."""
    eig = np.linalg.eigvalsh(a)
    if eig[0] <= 0 or eig[-1] / eig[0] > _GRAM_COND_LIMIT:
        raise RankDeficient("design matrix with intercept is (numerically) singular")
    cho = sla.cho_factor(a, lower=True)
    return sla.cho_solve(cho, b), cho


def _check_environments(moments: EnvMoments, min_rows: int) -> None:
    if len(moments.n) < 2:
        raise EnvironmentTooSmall(
            "invariance across environments needs at least two environments"
        )
    for e, rows in enumerate(moments.n, start=1):
        if rows < min_rows:
            raise EnvironmentTooSmall(
                f"environment {e} has {rows} rows, need at least {min_rows}"
            )


def chow_invariance_test(
    d: Dataset,
    s,
    subsample_cap: int | None = DEFAULT_SUBSAMPLE_CAP,
    rng_seed: int = 0,
    moments: EnvMoments | None = None,
) -> InvarianceTestResult:
    """Leave-one-environment-out regression test (method 1).

    For each environment e, an OLS fit on all other rows predicts the
    held-out block; the prediction errors D follow an exact F law when the
    null holds with Gaussian errors:

        D' Sigma^{-1} D / (sigma2_hat * n_e)  ~  F(n_e, n_rest - |S| - 1)

    with Sigma = I + Z_e (Z_rest' Z_rest)^{-1} Z_e' for intercept-extended
    designs Z.  The quadratic form is evaluated through the algebraically
    equivalent small-matrix identity

        D' Sigma^{-1} D = D'D - u' (Z_rest'Z_rest + Z_e'Z_e)^{-1} u,
        u = Z_e' D,

    with Cholesky solves, so the cost is independent of the number of
    held-out rows.  When an environment exceeds ``subsample_cap`` rows, a
    seeded subsample of that size is scored instead (the fit side always
    uses all remaining rows).  The combined p-value is
    ``min(1, n_env * min_e raw_p_e)``.
    """
    s = tuple(sorted(int(j) for j in s))
    moments = moments or EnvMoments(d)
    _check_environments(moments, min_rows=1)
    cols = _design_cols(s)
    k1 = len(cols)
    ix = np.ix_(cols, cols)
    gram_pool = sum(g[ix] for g in moments.gram)
    zy_pool = sum(zy[cols] for zy in moments.zy)
    yy_pool = sum(moments.yy)
    scoring = moments.scoring(subsample_cap, rng_seed)
    raw: list[tuple[int, float]] = []
    for e in range(1, d.n_env + 1):
        a_fit = gram_pool - moments.gram[e - 1][ix]
        b_fit = zy_pool - moments.zy[e - 1][cols]
        n_fit = sum(moments.n) - moments.n[e - 1]
        if n_fit < k1 + 1:
            raise EnvironmentTooSmall(
                f"complement of environment {e} has {n_fit} rows, "
                f"need at least {k1 + 1} for |S| = {len(s)}"
            )
        coef, _ = _solve_pd(a_fit, b_fit)
        rss_fit = max((yy_pool - moments.yy[e - 1]) - float(coef @ b_fit), 0.0)
        df_fit = n_fit - k1
        sigma2 = rss_fit / df_fit
        g_sc, zy_sc, yy_sc, n_sc = scoring[e - 1]
        g_sc, zy_sc = g_sc[ix], zy_sc[cols]
        dd = yy_sc - 2.0 * float(coef @ zy_sc) + float(coef @ g_sc @ coef)
        u = zy_sc - g_sc @ coef
        cho = sla.cho_factor(a_fit + g_sc, lower=True)
        quad = max(dd - float(u @ sla.cho_solve(cho, u)), 0.0)
        if sigma2 <= 0.0:
            # Noiseless fit: any nonzero prediction error is infinitely
            # significant, none at all is perfectly invariant.
            raw.append((e, 1.0 if quad <= 0.0 else 0.0))
            continue
        stat = quad / (sigma2 * n_sc)
        raw.append((e, f_sf(stat, n_sc, df_fit)))
    combined = min(1.0, d.n_env * min(p for _, p in raw))
    return InvarianceTestResult(
        set=s, p_value=combined, per_env=tuple(raw), method=METHOD_CHOW
    )


def residual_invariance_test(
    d: Dataset, s, moments: EnvMoments | None = None
) -> InvarianceTestResult:
    """Pooled-fit residual test (method 2).

    Fits one OLS on all rows, then tests for every environment whether the
    residual mean (Welch t) and variance (F) match the complement.  Mean
    and variance p-values are Bonferroni-corrected over environments
    separately, and the two family p-values are combined by taking twice
    the smaller, clipped to 1.
    """
    s = tuple(sorted(int(j) for j in s))
    moments = moments or EnvMoments(d)
    _check_environments(moments, min_rows=2)
    cols = _design_cols(s)
    ix = np.ix_(cols, cols)
    gram_pool = sum(g[ix] for g in moments.gram)
    zy_pool = sum(zy[cols] for zy in moments.zy)
    coef, _ = _solve_pd(gram_pool, zy_pool)
    # Per-environment residual sum and sum of squares from the moments.
    sums = []
    for e in range(1, d.n_env + 1):
        g_e = moments.gram[e - 1][ix]
        zy_e = moments.zy[e - 1][cols]
        s1 = zy_e[0] - float(g_e[0] @ coef)  # first design column is the intercept
        s2 = max(
            moments.yy[e - 1] - 2.0 * float(coef @ zy_e) + float(coef @ g_e @ coef), 0.0
        )
        sums.append((s1, s2, moments.n[e - 1]))
    tot1 = sum(v[0] for v in sums)
    tot2 = sum(v[1] for v in sums)
    tot_n = sum(v[2] for v in sums)

    def _mean_var(s1, s2, n):
        mean = s1 / n
        return mean, max(s2 - n * mean * mean, 0.0) / (n - 1)

    detail: list[tuple[int, float, float]] = []
    for e, (s1, s2, n_e) in enumerate(sums, start=1):
        m_e, v_e = _mean_var(s1, s2, n_e)
        m_r, v_r = _mean_var(tot1 - s1, tot2 - s2, tot_n - n_e)
        p_mean = welch_t_from_stats(n_e, m_e, v_e, tot_n - n_e, m_r, v_r)
        p_var = variance_f_from_stats(n_e, v_e, tot_n - n_e, v_r)
        detail.append((e, p_mean, p_var))
    n_env = d.n_env
    mean_bonf = min(1.0, n_env * min(pm for _, pm, _ in detail))
    var_bonf = min(1.0, n_env * min(pv for _, _, pv in detail))
    combined = min(1.0, 2.0 * min(mean_bonf, var_bonf))
    per_env = tuple((e, min(pm, pv)) for e, pm, pv in detail)
    return InvarianceTestResult(
        set=s,
        p_value=combined,
        per_env=per_env,
        method=METHOD_RESIDUAL,
        per_env_detail=tuple(detail),
    )


def invariance_test(
    d: Dataset,
    s,
    method: int,
    subsample_cap: int | None = DEFAULT_SUBSAMPLE_CAP,
    rng_seed: int = 0,
    moments: EnvMoments | None = None,
) -> InvarianceTestResult:
    """Dispatch to method 1 or 2."""
    if method == METHOD_CHOW:
        return chow_invariance_test(
            d, s, subsample_cap=subsample_cap, rng_seed=rng_seed, moments=moments
        )
    if method == METHOD_RESIDUAL:
        return residual_invariance_test(d, s, moments=moments)
    raise ValueError(f"method must be {METHOD_CHOW} or {METHOD_RESIDUAL}, got {method}")
