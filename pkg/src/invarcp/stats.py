"""Numerical primitives: intercept OLS, distribution functions, two-sample tests.

Distribution functions wrap ``scipy.special`` (fast vector-friendly entry
points); the two-sample tests implement the textbook formulas directly so
their degenerate-sample behaviour is pinned down here rather than left to
a library default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy import special

from .errors import DomainError, RankDeficient, TooFewRows, TooFewSamples

# Designs with condition number above this are treated as rank deficient;
# silently dropping columns would corrupt downstream confidence rectangles.
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit of ``y`` on a design with prepended intercept.

    Attributes
    ----------
    coef : ndarray, shape (k + 1,)
        Intercept first, then one slope per predictor column.
    residuals : ndarray, shape (n,)
        ``y`` minus fitted values.
    sigma2_hat : float
        Residual variance ``sum(residuals**2) / df_resid``.
    xtx_inv : ndarray, shape (k + 1, k + 1)
        Inverse Gram matrix of the design including the intercept column.
    df_resid : int
        ``n - k - 1``.
    """

    coef: np.ndarray
    residuals: np.ndarray
    sigma2_hat: float
    xtx_inv: np.ndarray
    df_resid: int


def add_intercept(x_s, n_rows: int | None = None) -> np.ndarray:
    """Prepend a column of ones. ``x_s`` may have zero columns."""
    x_s = np.asarray(x_s, dtype=float)
    if x_s.ndim == 1:
        x_s = x_s[:, None]
    n = x_s.shape[0] if n_rows is None else n_rows
    if x_s.shape[1] == 0:
        return np.ones((n, 1))
    return np.column_stack([np.ones(n), x_s])


def ols_fit(x_s, y) -> OlsFit:
    """Fit ``y ~ 1 + x_s`` by QR decomposition.

    ``x_s`` is an n x k matrix (k may be 0, giving the intercept-only fit).
    Raises :class:`TooFewRows` when n < k + 2 and :class:`RankDeficient`
    when the design (with intercept) has condition number above 1e12.
    """
    y = np.asarray(y, dtype=float)
    if x_s is None:
        x_s = np.empty((len(y), 0))
    return _ols_design(add_intercept(x_s, n_rows=len(y)), y)


def _ols_design(z: np.ndarray, y: np.ndarray) -> OlsFit:
    """The QR workhorse; ``z`` already contains the intercept column."""
    n, k1 = z.shape
    if n < k1 + 1:
        raise TooFewRows(f"need at least {k1 + 1} rows for {k1 - 1} predictors, got {n}")
    q, r = np.linalg.qr(z)
    diag = np.abs(np.diag(r))
    if diag.min() == 0.0 or np.linalg.cond(r) > _COND_LIMIT:
        raise RankDeficient("design matrix with intercept is rank deficient")
    coef = sla.solve_triangular(r, q.T @ y)
    residuals = y - z @ coef
    df_resid = n - k1
    rss = float(residuals @ residuals)
    r_inv = sla.solve_triangular(r, np.eye(k1))
    return OlsFit(
        coef=coef,
        residuals=residuals,
        sigma2_hat=rss / df_resid,
        xtx_inv=r_inv @ r_inv.T,
        df_resid=df_resid,
    )


# ----------------------------------------------------------------------
# Distribution functions


def t_quantile(p: float, df: int) -> float:
    """Quantile of Student's t with ``df`` degrees of freedom."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must be in (0,1), got {p}")
    if df < 1:
        raise DomainError(f"df must be positive, got {df}")
    return float(special.stdtrit(df, p))


def f_cdf(x: float, d1: int, d2: int) -> float:
    """CDF of the Fisher F distribution at ``x >= 0``."""
    if d1 < 1 or d2 < 1:
        raise DomainError(f"degrees of freedom must be positive, got ({d1}, {d2})")
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    return float(special.fdtr(d1, d2, x))


def f_sf(x: float, d1: int, d2: int) -> float:
    """Upper tail of the Fisher F distribution (more accurate than 1 - cdf)."""
    if d1 < 1 or d2 < 1:
        raise DomainError(f"degrees of freedom must be positive, got ({d1}, {d2})")
    if x < 0:
        raise DomainError(f"x must be nonnegative, got {x}")
    return float(special.fdtrc(d1, d2, x))


def normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    return float(special.ndtr(x))


# ----------------------------------------------------------------------
# Two-sample tests

_DEGENERATE_EPS = 1e-14


def welch_t_from_stats(
    na: int, ma: float, va: float, nb: int, mb: float, vb: float
) -> float:
    """Welch t-test p-value from sample sizes, means and variances."""
    if na < 2 or nb < 2:
        raise TooFewSamples("each sample needs at least 2 observations")
    if va + vb <= _DEGENERATE_EPS * max(va, vb, (ma - mb) ** 2, 1.0):
        same_mean = abs(ma - mb) <= np.sqrt(_DEGENERATE_EPS) * max(abs(ma), abs(mb), 1.0)
        return 1.0 if same_mean else 0.0
    sa, sb = va / na, vb / nb
    t = (ma - mb) / np.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (na - 1) + sb**2 / (nb - 1))
    return float(2.0 * special.stdtr(df, -abs(t)))


def variance_f_from_stats(na: int, va: float, nb: int, vb: float) -> float:
    """Two-sided variance F-test p-value from sample sizes and variances."""
    if na < 2 or nb < 2:
        raise TooFewSamples("each sample needs at least 2 observations")
    scale = max(va, vb, 1.0)
    za, zb = va <= _DEGENERATE_EPS * scale, vb <= _DEGENERATE_EPS * scale
    if za and zb:
        return 1.0
    if za or zb:
        return 0.0
    d1, d2 = na - 1, nb - 1
    r = va / vb
    lower = float(special.fdtr(d1, d2, r))
    upper = float(special.fdtrc(d1, d2, r))
    return min(1.0, 2.0 * min(lower, upper))


def two_sample_t_test(a, b) -> float:
    """Two-sided Welch t-test p-value for equal means.

    Uses the unequal-variance statistic with Welch-Satterthwaite degrees
    of freedom.  If both samples are constant, returns 1.0 for equal means
    and 0.0 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise TooFewSamples("each sample needs at least 2 observations")
    return welch_t_from_stats(
        len(a), a.mean(), a.var(ddof=1), len(b), b.mean(), b.var(ddof=1)
    )


def variance_f_test(a, b) -> float:
    """Two-sided F-test p-value for equal variances.

    ``p = 2 * min(F(r), 1 - F(r))`` with ``r = var(a)/var(b)`` and degrees
    of freedom ``(len(a)-1, len(b)-1)``.  Returns 1.0 when both variances
    vanish and 0.0 when exactly one does.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise TooFewSamples("each sample needs at least 2 observations")
    return variance_f_from_stats(len(a), a.var(ddof=1), len(b), b.var(ddof=1))


_SQRT2PI = np.sqrt(2.0 * np.pi)
_PI2, _PI4, _PI6 = np.pi**2, np.pi**4, np.pi**6


def ks_pvalue(d, n_eff: float):
    """Upper tail of the Kolmogorov D-statistic law at effective sample
    size ``n_eff``, vectorised over the statistic values ``d``.

    Uses the Pelz-Good expansion (limit law plus n^{-1/2}, n^{-1} and
    n^{-3/2} theta-series corrections), switching to the plain limit law
    deep in the tail where the expansion only chases digits of zero.
    """
    d = np.asarray(d, dtype=float)
    scalar = d.ndim == 0
    n = max(float(np.round(n_eff)), 1.0)
    z = np.maximum(np.sqrt(n) * np.atleast_1d(d), 0.05)
    out = np.where(z > 3.5, special.kolmogorov(z), _pelz_good_sf(n, np.minimum(z, 3.5)))
    out = np.clip(out, 0.0, 1.0)
    return out[0] if scalar else out


def _pelz_good_sf(n: float, z: np.ndarray) -> np.ndarray:
    z2, z3, z4, z6 = z**2, z**3, z**4, z**6
    q = np.exp(-_PI2 / 8 / z2)
    coeff1 = (-z2, _PI2 / 4)
    coeff2 = (6 * z6 + 2 * z4, (2 * z4 - 5 * z2) * _PI2 / 4, _PI4 * (1 - 2 * z2) / 16)
    coeff3 = (
        -30 * z6 - 90 * z**8,
        _PI2 * (135 * z4 - 96 * z6) / 4,
        _PI4 * (-60 * z2 + 212 * z4) / 16,
        _PI6 * (5 - 30 * z2) / 64,
    )
    maxk = int(np.ceil(16 * z.max() / np.pi))
    terms = [np.zeros_like(z) for _ in range(4)]
    for k in range(maxk, 0, -1):
        m2 = (2 * k - 1) ** 2
        qpower = q ** (8 * k)
        step = (
            np.ones_like(z),
            coeff1[0] + coeff1[1] * m2,
            coeff2[0] + coeff2[1] * m2 + coeff2[2] * m2**2,
            coeff3[0] + coeff3[1] * m2 + coeff3[2] * m2**2 + coeff3[3] * m2**3,
        )
        for i in range(4):
            terms[i] = terms[i] * qpower + step[i]
    denom = (z, 6 * z4, 72 * z**7, 6480 * z**10)
    for i in range(4):
        terms[i] = terms[i] * q * _SQRT2PI / denom[i]
    # K2 and K3 carry extra all-integer theta sums
    q2 = np.exp(-_PI2 / 2 / z2)
    ks = np.arange(maxk, 0, -1, dtype=float)[:, None]
    qp = q2[None, :] ** (ks**2)
    terms[2] = terms[2] + (ks**2 * qp).sum(axis=0) * _PI2 * _SQRT2PI / (-36 * z3)
    sqrt3z = np.sqrt(3.0) * z
    extra3 = ((sqrt3z[None, :] - np.pi * ks) * (sqrt3z[None, :] + np.pi * ks) * ks**2 * qp).sum(axis=0)
    terms[3] = terms[3] + extra3 * _PI2 * _SQRT2PI / (216 * z6)
    return (1.0 - terms[0]) - terms[1] / np.sqrt(n) - terms[2] / n - terms[3] / n**1.5


def ks_two_sample(a, b) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov p-value.

    Distribution-free test of whether two samples come from the same
    continuous distribution; the D statistic is referred to the
    one-sample law at effective size ``na*nb/(na+nb)``.  Requires at
    least 8 observations per sample.
    """
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    na, nb = len(a), len(b)
    if na < 8 or nb < 8:
        raise TooFewSamples("each sample needs at least 8 observations")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / na
    cdf_b = np.searchsorted(b, pooled, side="right") / nb
    d = float(np.abs(cdf_a - cdf_b).max())
    return float(ks_pvalue(d, na * nb / (na + nb)))
