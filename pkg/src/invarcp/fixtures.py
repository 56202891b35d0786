"""Named benchmark constructions.

Small, exactly specified SEM pairs used across the test-suite and
exported by the CLI (``export-fixture``):

* ``appendix_a``  four-variable two-environment pair where the second
  environment rewires one parent of the target; the identifiable set
  equals the true parents {X2, X3}.
* ``remark_i``    three do-intervention environments engineered so that
  even the empty set predicts invariantly; nothing is identifiable, and
  a correct procedure must return the empty estimate.
* ``remark_ii``   a noise-scaling environment whose multiplier has unit
  second moment, so residual mean and variance match although the
  distributions differ; invisible to the moment-based tests by design.
* ``prop5``       hidden-confounder data where plain regression is
  biased but the residual-distribution search recovers the truth.

Also provides chain / fork / all-parents generators used to exercise
identifiability under per-node do-interventions.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import UnknownFixture
from .sem import (
    SemSpec,
    dataset_from_specs,
    do_intervention,
    hidden_iv_scenario,
    noise_intervention,
)

FIXTURE_NAMES = ("appendix_a", "remark_i", "remark_ii", "prop5")


def appendix_a_specs() -> tuple[SemSpec, SemSpec]:
    """Two environments over (Y, X2, X3, X4); Y = -0.7*X2 + 0.6*X3 + 0.1*e.

    Environment 1 has X3 = X2 + 0.2*e3; environment 2 replaces the X3
    mechanism by pure noise X3 = 0.4*e3.  The target equation is shared,
    so {X2, X3} stays invariant while every set containing X4 (a child of
    Y) or missing a parent is rejected at reasonable sample sizes.
    """
    m = 4  # nodes: 0=Y, 1=X2, 2=X3, 3=X4
    beta1 = np.zeros((m, m))
    beta1[0, 1], beta1[0, 2] = -0.7, 0.6
    beta1[2, 1] = 1.0
    beta1[3, 0], beta1[3, 2] = -0.5, 0.5
    sigma1 = np.array([0.1, 0.3, 0.2, 0.1])
    env1 = SemSpec(order=(1, 2, 0, 3), beta=beta1, sigma=sigma1, target=0)
    beta2 = beta1.copy()
    beta2[2, 1] = 0.0
    sigma2 = sigma1.copy()
    sigma2[2] = 0.4
    env2 = SemSpec(order=(1, 2, 0, 3), beta=beta2, sigma=sigma2, target=0)
    return env1, env2


APPENDIX_A_GAMMA = np.array([-0.7, 0.6, 0.0])  # over predictors (X2, X3, X4)
APPENDIX_A_PARENTS = frozenset({0, 1})  # predictor-column indices of X2, X3


def remark_i_specs() -> tuple[SemSpec, SemSpec, SemSpec]:
    """Y = X2 + X3 + e with X3 = -X2 + e3; environments 2 and 3 pin X2 and
    X3 to zero, which happens to equal their means.  The marginal law of Y
    is then the same everywhere, so the empty set is invariant and the
    parents are not identifiable."""
    m = 3  # nodes: 0=Y, 1=X2, 2=X3
    beta = np.zeros((m, m))
    beta[0, 1], beta[0, 2] = 1.0, 1.0
    beta[2, 1] = -1.0
    base = SemSpec(order=(1, 2, 0), beta=beta, sigma=np.ones(m), target=0)
    return (
        base,
        do_intervention(base, {1: 0.0}),
        do_intervention(base, {2: 0.0}),
    )


def remark_ii_specs() -> tuple[SemSpec, SemSpec]:
    """Y = X + e; the second environment multiplies the X noise by a
    per-sample Uniform[0, sqrt(3)] factor, whose second moment is one.
    Residual means and variances for the empty set then agree across
    environments even though the distributions differ, so tests of the
    moment-based null cannot identify the parent."""
    m = 2  # nodes: 0=Y, 1=X
    beta = np.zeros((m, m))
    beta[0, 1] = 1.0
    base = SemSpec(order=(1, 0), beta=beta, sigma=np.ones(m), target=0)
    scaled = noise_intervention(base, scales={1: ("uniform", 0.0, float(np.sqrt(3.0)))})
    return base, scaled


def make_fixture(name: str, n_per_env: int, rng: np.random.Generator) -> Dataset:
    """Sample one of the named fixture datasets with ``n_per_env`` rows in
    each environment."""
    if name == "appendix_a":
        return dataset_from_specs(appendix_a_specs(), [n_per_env] * 2, rng)
    if name == "remark_i":
        return dataset_from_specs(remark_i_specs(), [n_per_env] * 3, rng)
    if name == "remark_ii":
        return dataset_from_specs(remark_ii_specs(), [n_per_env] * 2, rng, names=("X",))
    if name == "prop5":
        return hidden_iv_scenario(3, n_per_env, rng).dataset
    raise UnknownFixture(f"unknown fixture {name!r}; choose from {FIXTURE_NAMES}")


# ----------------------------------------------------------------------
# Parametric families for identifiability experiments


def _coef(rng: np.random.Generator, lo: float = 0.5, hi: float = 1.5) -> float:
    return float(rng.uniform(lo, hi) * (1.0 if rng.random() < 0.5 else -1.0))


def chain_sem(p: int, rng: np.random.Generator, target: int | None = None) -> SemSpec:
    """A p+1 node causal chain 0 -> 1 -> ... -> p with random coefficients;
    the target sits at a random non-root position unless given."""
    m = p + 1
    beta = np.zeros((m, m))
    for j in range(1, m):
        beta[j, j - 1] = _coef(rng)
    sigma = rng.uniform(0.5, 1.2, size=m)
    if target is None:
        target = int(rng.integers(1, m))
    return SemSpec(order=tuple(range(m)), beta=beta, sigma=sigma, target=target)


def fork_sem(p: int, rng: np.random.Generator) -> SemSpec:
    """Target node 2 with parents {0, 1}; any further nodes form a chain of
    descendants hanging off the target."""
    if p < 2:
        raise ValueError("fork needs at least two predictors")
    m = p + 1
    beta = np.zeros((m, m))
    beta[2, 0] = _coef(rng)
    beta[2, 1] = _coef(rng)
    for j in range(3, m):
        beta[j, j - 1] = _coef(rng)
    sigma = rng.uniform(0.5, 1.2, size=m)
    return SemSpec(order=tuple(range(m)), beta=beta, sigma=sigma, target=2)


def all_parents_sem(p: int, rng: np.random.Generator) -> tuple[SemSpec, int]:
    """Every predictor is a parent of the target, and the last predictor
    (the 'youngest' parent: no directed path from it to another parent)
    additionally receives an edge from every other parent.  Returns the
    spec and that youngest-parent node index; a single intervention there
    suffices to identify the full parent set for generic coefficients.

    Coefficients are drawn positive: mixed signs can nearly cancel the
    covariance between the youngest parent and the rest of the target
    equation, which is measure-zero in population but starves the
    finite-sample test of power.
    """
    m = p + 1
    target = 0
    youngest = p
    beta = np.zeros((m, m))
    for k in range(1, p + 1):
        beta[target, k] = rng.uniform(0.5, 1.5)
    for k in range(1, p):
        beta[youngest, k] = rng.uniform(0.5, 1.5)
    sigma = rng.uniform(0.5, 1.2, size=m)
    order = tuple(range(1, p + 1)) + (target,)
    return SemSpec(order=order, beta=beta, sigma=sigma, target=target), youngest


def per_node_do_environments(
    spec: SemSpec, rng: np.random.Generator, shift: float = 2.0
) -> list[SemSpec]:
    """Observational spec plus one do-intervention environment per
    non-target node, each pinning its node to ``shift`` away from the
    node's (zero) mean."""
    envs = [spec]
    for j in range(spec.n_nodes):
        if j == spec.target:
            continue
        value = shift * (1.0 if rng.random() < 0.5 else -1.0)
        envs.append(do_intervention(spec, {j: value}))
    return envs
