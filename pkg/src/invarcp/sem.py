"""Linear Gaussian structural equation models and intervention machinery.

A :class:`SemSpec` describes one distribution: each node equals a linear
combination of its graph parents plus independent Gaussian noise, with
nodes evaluated along a fixed topological order.  Interventions derive
new specs:

* do-interventions pin a node to a constant and cut its incoming edges;
* noise interventions rescale and/or shift a node's noise term while all
  coefficients stay put;
* simultaneous noise interventions rescale the noise of a whole batch of
  nodes at once (optionally also redrawing their incoming coefficients),
  which models environments produced by broad, imprecisely targeted
  perturbations.

Random noise multipliers and shifts are drawn fresh per sample by
default (a draw spec is either a constant or ``("uniform", lo, hi)``);
materialise them once per environment by passing a constant.

Randomised benchmark scenarios pair an observational spec with a
simultaneous-noise derivative, with every generation parameter drawn
from the documented grid (:func:`sample_scenario_params`).  Independent
scenario streams should be derived with ``numpy.random.SeedSequence
(root).spawn(n)``; every generator here takes an explicit ``Generator``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType

import numpy as np

from .data import Dataset
from .errors import TargetIntervened

# A draw spec is a constant (float) or ("uniform", lo, hi), sampled per row.
DrawSpec = "float | tuple[str, float, float]"

_N_CHOICES = (100, 200, 300, 400, 500)
_GRID_01_20 = tuple(np.round(np.arange(1, 21) * 0.1, 1))   # 0.1 .. 2.0
_GRID_01_10 = tuple(np.round(np.arange(1, 11) * 0.1, 1))   # 0.1 .. 1.0
_GRID_01_40 = tuple(np.round(np.arange(1, 41) * 0.1, 1))   # 0.1 .. 4.0
_GRID_INV_THETA = tuple(np.round(np.arange(11, 31) * 0.1, 1))  # 1.1 .. 3.0


def _draw(spec, rng: np.random.Generator, n: int) -> np.ndarray | float:
    if isinstance(spec, tuple):
        kind, lo, hi = spec
        if kind != "uniform":
            raise ValueError(f"unknown draw spec {spec!r}")
        return rng.uniform(lo, hi, size=n)
    return float(spec)


@dataclass(frozen=True)
class SemSpec:
    """One linear Gaussian structural equation model.

    ``beta[j, k]`` is the coefficient of node k in the equation of node j;
    it may be nonzero only if k precedes j in ``order``.  ``sigma`` holds
    noise standard deviations (positive for every non-fixed node),
    ``mu_shift`` deterministic additive noise shifts.  ``fixed`` maps
    do-intervened nodes to their pinned values.  ``noise_scales`` and
    ``noise_shifts`` map nodes to per-sample draw specs.
    """

    order: tuple[int, ...]
    beta: np.ndarray
    sigma: np.ndarray
    target: int
    mu_shift: np.ndarray | None = None
    fixed: dict[int, float] = field(default_factory=dict)
    noise_scales: dict[int, object] = field(default_factory=dict)
    noise_shifts: dict[int, object] = field(default_factory=dict)

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        m = beta.shape[0]
        if beta.shape != (m, m):
            raise ValueError("beta must be square")
        if sorted(self.order) != list(range(m)):
            raise ValueError("order must be a permutation of the node indices")
        pos = {node: i for i, node in enumerate(self.order)}
        jj, kk = np.nonzero(beta)
        for j, k in zip(jj, kk):
            if pos[int(k)] >= pos[int(j)]:
                raise ValueError(
                    f"beta[{j},{k}] != 0 but node {k} does not precede node {j}"
                )
        sigma = np.array(self.sigma, dtype=float)
        if sigma.shape != (m,):
            raise ValueError("sigma must have one entry per node")
        for j in range(m):
            if j not in self.fixed and sigma[j] <= 0:
                raise ValueError(f"sigma[{j}] must be positive for non-fixed nodes")
        if not 0 <= self.target < m:
            raise ValueError("target out of range")
        mu = (
            np.zeros(m)
            if self.mu_shift is None
            else np.array(self.mu_shift, dtype=float)
        )
        beta.setflags(write=False)
        sigma.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "mu_shift", mu)
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        object.__setattr__(self, "fixed", MappingProxyType(dict(self.fixed)))
        object.__setattr__(self, "noise_scales", MappingProxyType(dict(self.noise_scales)))
        object.__setattr__(self, "noise_shifts", MappingProxyType(dict(self.noise_shifts)))

    @property
    def n_nodes(self) -> int:
        return self.beta.shape[0]

    @property
    def target_intervened(self) -> bool:
        """Flags specs whose target node was touched by any intervention;
        coverage guarantees do not extend to such specs."""
        t = self.target
        return t in self.fixed or t in self.noise_scales or t in self.noise_shifts

    def to_dict(self) -> dict:
        jj, kk = np.nonzero(self.beta)
        return {
            "order": list(self.order),
            "edges": [[int(j), int(k), float(self.beta[j, k])] for j, k in zip(jj, kk)],
            "sigma": [float(v) for v in self.sigma],
            "mu_shift": [float(v) for v in self.mu_shift],
            "target": self.target,
            "fixed": {str(j): float(v) for j, v in self.fixed.items()},
            "noise_scales": {str(j): list(v) if isinstance(v, tuple) else float(v)
                             for j, v in self.noise_scales.items()},
            "noise_shifts": {str(j): list(v) if isinstance(v, tuple) else float(v)
                             for j, v in self.noise_shifts.items()},
        }

    @staticmethod
    def from_dict(d: dict) -> "SemSpec":
        m = len(d["order"])
        beta = np.zeros((m, m))
        for j, k, v in d["edges"]:
            beta[j, k] = v

        def _spec(v):
            return tuple(v) if isinstance(v, list) else float(v)

        return SemSpec(
            order=tuple(d["order"]),
            beta=beta,
            sigma=np.asarray(d["sigma"], dtype=float),
            mu_shift=np.asarray(d["mu_shift"], dtype=float),
            target=int(d["target"]),
            fixed={int(j): float(v) for j, v in d["fixed"].items()},
            noise_scales={int(j): _spec(v) for j, v in d["noise_scales"].items()},
            noise_shifts={int(j): _spec(v) for j, v in d["noise_shifts"].items()},
        )


def parents(spec: SemSpec, j: int) -> frozenset[int]:
    """Nodes with a direct edge into node j (support of beta row j)."""
    return frozenset(int(k) for k in np.nonzero(spec.beta[j])[0])


def sample(spec: SemSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` rows by ancestral sampling along the topological order."""
    if n < 1:
        raise ValueError("n must be positive")
    m = spec.n_nodes
    out = np.empty((n, m))
    for j in spec.order:
        if j in spec.fixed:
            out[:, j] = spec.fixed[j]
            continue
        eps = rng.standard_normal(n) * spec.sigma[j]
        if j in spec.noise_scales:
            eps = eps * _draw(spec.noise_scales[j], rng, n)
        eps = eps + spec.mu_shift[j]
        if j in spec.noise_shifts:
            eps = eps + _draw(spec.noise_shifts[j], rng, n)
        row = spec.beta[j]
        support = np.nonzero(row)[0]
        out[:, j] = out[:, support] @ row[support] + eps
    return out


# ----------------------------------------------------------------------
# Interventions


def _check_target(spec: SemSpec, nodes, override: bool) -> None:
    if spec.target in nodes and not override:
        raise TargetIntervened(
            f"node {spec.target} is the target; pass override_target=True to "
            "intervene on it anyway (coverage guarantees are then void)"
        )


def do_intervention(
    spec: SemSpec, assignments: dict[int, float], *, override_target: bool = False
) -> SemSpec:
    """Pin nodes to constants: incoming edges are cut and the noise term is
    replaced by the assigned value."""
    if not assignments:
        return spec
    _check_target(spec, assignments, override_target)
    beta = np.array(spec.beta)
    for j in assignments:
        beta[j, :] = 0.0
    fixed = dict(spec.fixed)
    fixed.update({int(j): float(v) for j, v in assignments.items()})
    scales = {j: v for j, v in spec.noise_scales.items() if j not in assignments}
    shifts = {j: v for j, v in spec.noise_shifts.items() if j not in assignments}
    return replace(
        spec, beta=beta, fixed=fixed, noise_scales=scales, noise_shifts=shifts
    )


def noise_intervention(
    spec: SemSpec,
    scales: dict[int, object] | None = None,
    shifts: dict[int, object] | None = None,
    *,
    override_target: bool = False,
    per_environment: bool = False,
    rng: np.random.Generator | None = None,
) -> SemSpec:
    """Rescale and/or shift per-node noise, keeping all coefficients.

    Draw specs are sampled per row by default.  With
    ``per_environment=True`` each random spec is resolved once (using
    ``rng``) into a constant, so the whole environment shares one draw.
    """
    scales = dict(scales or {})
    shifts = dict(shifts or {})
    _check_target(spec, set(scales) | set(shifts), override_target)
    if per_environment:
        if rng is None:
            raise ValueError("per_environment=True needs an rng to resolve draws")
        scales = {j: float(_draw(v, rng, 1)[0]) if isinstance(v, tuple) else v
                  for j, v in scales.items()}
        shifts = {j: float(_draw(v, rng, 1)[0]) if isinstance(v, tuple) else v
                  for j, v in shifts.items()}
    sigma = np.array(spec.sigma)
    mu = np.array(spec.mu_shift)
    new_scales = dict(spec.noise_scales)
    new_shifts = dict(spec.noise_shifts)
    for j, v in scales.items():
        if isinstance(v, tuple):
            if j in new_scales:
                raise ValueError(f"node {j} already carries a random noise scale")
            new_scales[int(j)] = v
        else:
            sigma[j] = sigma[j] * float(v)
    for j, v in shifts.items():
        if isinstance(v, tuple):
            if j in new_shifts:
                raise ValueError(f"node {j} already carries a random noise shift")
            new_shifts[int(j)] = v
        else:
            mu[j] = mu[j] + float(v)
    return replace(
        spec, sigma=sigma, mu_shift=mu, noise_scales=new_scales, noise_shifts=new_shifts
    )


def simultaneous_noise_scenario(
    spec: SemSpec,
    a_min: float,
    delta_a: float,
    rng: np.random.Generator,
    *,
    coef_change: bool = False,
    lb2: float | None = None,
    ub2: float | None = None,
    theta: float | None = None,
    single: bool = False,
) -> tuple[SemSpec, tuple[int, ...]]:
    """Batch noise intervention over a randomly chosen node set.

    Either a single uniformly chosen node (``single=True``) or a fraction
    ``theta`` of all nodes is intervened; the set may include the target.
    Chosen nodes get per-sample noise multipliers Uniform[a_min,
    a_min + delta_a] (a constant multiplier when ``delta_a`` is 0), and,
    when ``coef_change`` is set, their incoming nonzero coefficients are
    redrawn with random sign and magnitude Uniform[lb2, ub2].

    Returns the derived spec and the intervened node set.
    """
    m = spec.n_nodes
    if single:
        nodes = (int(rng.integers(m)),)
    else:
        if theta is None:
            raise ValueError("theta is required unless single=True")
        count = max(1, int(round(theta * m)))
        nodes = tuple(sorted(int(v) for v in rng.choice(m, size=min(count, m), replace=False)))
    scale_spec = float(a_min) if delta_a == 0 else ("uniform", float(a_min), float(a_min + delta_a))
    out = noise_intervention(
        spec, scales={j: scale_spec for j in nodes}, override_target=True
    )
    if coef_change:
        if lb2 is None or ub2 is None:
            raise ValueError("coef_change=True needs lb2 and ub2")
        beta = np.array(out.beta)
        for j in nodes:
            for k in np.nonzero(beta[j])[0]:
                sign = 1.0 if rng.random() < 0.5 else -1.0
                beta[j, k] = sign * rng.uniform(lb2, ub2)
        out = replace(out, beta=beta)
    return out, nodes


# ----------------------------------------------------------------------
# Randomised benchmark scenarios


@dataclass(frozen=True)
class ScenarioParams:
    """Generation parameters of one benchmark scenario.

    ``n_obs``/``n_int`` are per-environment sample sizes; ``p`` the number
    of predictors (the graph has p + 1 nodes); ``k_avg`` the average node
    degree.  Observational coefficients have magnitudes in [lb1,
    lb1 + delta_b1], noise variances in [sigma2_min, sigma2_max].  The
    intervened environment scales noise by Uniform[a_min, a_min + delta_a]
    on a single node (``single_intervention``) or on a fraction ``theta``
    of nodes, redrawing intervened coefficients in [lb2, ub2] when
    ``coef_change`` is set.
    """

    n_obs: int
    n_int: int
    p: int
    k_avg: int
    lb1: float
    delta_b1: float
    sigma2_min: float
    sigma2_max: float
    a_min: float
    delta_a: float
    coef_change: bool
    lb2: float
    ub2: float
    single_intervention: bool
    theta: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def sample_scenario_params(rng: np.random.Generator) -> ScenarioParams:
    """Draw every scenario parameter independently from its grid."""
    two = np.sort(rng.choice(_GRID_01_20, size=2, replace=True))
    return ScenarioParams(
        n_obs=int(rng.choice(_N_CHOICES)),
        n_int=int(rng.choice(_N_CHOICES)),
        p=int(rng.integers(5, 41)),
        k_avg=int(rng.integers(1, 5)),
        lb1=float(rng.choice(_GRID_01_20)),
        delta_b1=float(rng.choice(_GRID_01_10)),
        sigma2_min=(s2min := float(rng.choice(_GRID_01_20))),
        sigma2_max=max(float(rng.choice(_GRID_01_20)), s2min),
        a_min=float(rng.choice(_GRID_01_40)),
        delta_a=0.0 if rng.random() < 1 / 3 else float(rng.choice(_GRID_01_20)),
        coef_change=bool(rng.random() < 1 / 3),
        lb2=float(two[0]),
        ub2=float(two[1]),
        single_intervention=bool(rng.random() < 1 / 6),
        theta=float(1.0 / rng.choice(_GRID_INV_THETA)),
    )


def random_sem(params: ScenarioParams, rng: np.random.Generator) -> SemSpec:
    """Random DAG over p + 1 nodes: random topological order, each forward
    pair connected with probability k_avg / (p - 1), coefficients with
    random sign and magnitude Uniform[lb1, lb1 + delta_b1], noise
    variances Uniform[sigma2_min, sigma2_max], target uniform over nodes.
    """
    if params.p < 2 or not 1 <= params.k_avg <= params.p - 1:
        raise ValueError("need p >= 2 and 1 <= k_avg <= p - 1")
    m = params.p + 1
    order = tuple(int(v) for v in rng.permutation(m))
    prob = params.k_avg / (params.p - 1)
    beta = np.zeros((m, m))
    for i in range(m):
        for jpos in range(i + 1, m):
            if rng.random() < prob:
                sign = 1.0 if rng.random() < 0.5 else -1.0
                beta[order[jpos], order[i]] = sign * rng.uniform(
                    params.lb1, params.lb1 + params.delta_b1
                )
    sigma = np.sqrt(rng.uniform(params.sigma2_min, params.sigma2_max, size=m))
    target = int(rng.integers(m))
    return SemSpec(order=order, beta=beta, sigma=sigma, target=target)


@dataclass(frozen=True)
class Scenario:
    """An observational spec paired with its intervened derivative.

    ``seed`` is a caller-supplied record of the stream that generated the
    scenario; it is carried through serialisation but never consumed.
    """

    params: ScenarioParams
    base: SemSpec
    intervened: SemSpec
    intervened_nodes: tuple[int, ...]
    seed: int | None = None

    @property
    def target(self) -> int:
        return self.base.target

    @property
    def target_intervened(self) -> bool:
        return self.target in self.intervened_nodes

    def parent_nodes(self) -> frozenset[int]:
        """Ground-truth parents of the target, as node indices."""
        return parents(self.base, self.target)

    def parent_cols(self) -> frozenset[int]:
        """Ground-truth parents as predictor-column indices of the dataset
        produced by :meth:`sample_dataset` (target column removed)."""
        return frozenset(j if j < self.target else j - 1 for j in self.parent_nodes())

    def sample_dataset(
        self,
        rng: np.random.Generator,
        n_obs: int | None = None,
        n_int: int | None = None,
    ) -> Dataset:
        specs = [self.base, self.intervened]
        ns = [n_obs or self.params.n_obs, n_int or self.params.n_int]
        return dataset_from_specs(specs, ns, rng)

    def to_json(self) -> str:
        payload = {
            "params": self.params.to_dict(),
            "base": self.base.to_dict(),
            "intervened": self.intervened.to_dict(),
            "intervened_nodes": list(self.intervened_nodes),
            "seed": self.seed,
        }
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Scenario":
        d = json.loads(text)
        return Scenario(
            params=ScenarioParams(**d["params"]),
            base=SemSpec.from_dict(d["base"]),
            intervened=SemSpec.from_dict(d["intervened"]),
            intervened_nodes=tuple(d["intervened_nodes"]),
            seed=d.get("seed"),
        )


def generate_scenario(rng: np.random.Generator, seed: int | None = None) -> Scenario:
    """Sample parameters, an observational SEM and its batch-intervened
    counterpart.  The intervened node set may include the target; such
    scenarios are kept and exposed via ``Scenario.target_intervened``."""
    params = sample_scenario_params(rng)
    base = random_sem(params, rng)
    intervened, nodes = simultaneous_noise_scenario(
        base,
        params.a_min,
        params.delta_a,
        rng,
        coef_change=params.coef_change,
        lb2=params.lb2,
        ub2=params.ub2,
        theta=params.theta,
        single=params.single_intervention,
    )
    return Scenario(
        params=params, base=base, intervened=intervened, intervened_nodes=nodes, seed=seed
    )


def dataset_from_specs(
    specs,
    ns,
    rng: np.random.Generator,
    names: tuple[str, ...] | None = None,
    target_name: str = "Y",
) -> Dataset:
    """Sample one environment per spec and assemble a :class:`Dataset`.

    All specs must share node count and target.  The target column is
    removed from the predictors; default predictor names are ``X{j+1}``
    by node index.
    """
    first = specs[0]
    for s in specs[1:]:
        if s.n_nodes != first.n_nodes or s.target != first.target:
            raise ValueError("all specs must share node count and target")
    blocks = [sample(s, n, rng) for s, n in zip(specs, ns)]
    full = np.vstack(blocks)
    env = np.concatenate([np.full(n, e + 1, dtype=np.int64) for e, n in enumerate(ns)])
    keep = [j for j in range(first.n_nodes) if j != first.target]
    if names is None:
        names = tuple(f"X{j + 1}" for j in keep)
    return Dataset(
        x=full[:, keep],
        y=full[:, first.target],
        env=env,
        names=names,
        target_name=target_name,
    )


# ----------------------------------------------------------------------
# Hidden-confounder benchmark


@dataclass(frozen=True)
class HiddenIvScenario:
    """Two-environment data with a hidden common cause of X and Y.

    ``gamma_star`` is the true causal coefficient vector; OLS does not
    recover it because the residual shares the hidden variable with X.
    The second environment adds an independent mean-zero disturbance with
    full-rank covariance to X, which is what makes ``gamma_star``
    identifiable through residual-distribution invariance.
    """

    dataset: Dataset
    gamma_star: np.ndarray
    s_star: frozenset[int]


def hidden_iv_scenario(
    p: int,
    n_per_env: int,
    rng: np.random.Generator,
    *,
    gamma: np.ndarray | None = None,
    confounding: float = 0.4,
    z_scale: float = 1.5,
) -> HiddenIvScenario:
    """Build one hidden-confounder dataset.

    Environment 1: X = a*H + eta.  Environment 2: X additionally receives
    Z ~ N(0, D) with distinct positive diagonal D (scaled by ``z_scale``).
    In both: Y = X gamma_star + b*H + eps with H, eta, eps, Z independent.
    ``confounding`` sets the loadings a and b.  ``z_scale=0`` makes the
    two environments identical in distribution.
    """
    if p < 2:
        raise ValueError("need p >= 2")
    if gamma is None:
        gamma = np.zeros(p)
        for k in range(p - 1):
            gamma[k] = (1.0 - 0.25 * k) * (1.0 if k % 2 == 0 else -1.0)
    gamma = np.asarray(gamma, dtype=float)
    a = np.full(p, confounding)
    b = confounding
    z_sd = z_scale * np.linspace(0.9, 1.3, p)

    def _env(with_shift: bool) -> tuple[np.ndarray, np.ndarray]:
        h = rng.standard_normal(n_per_env)
        x = np.outer(h, a) + rng.standard_normal((n_per_env, p))
        if with_shift:
            x = x + rng.standard_normal((n_per_env, p)) * z_sd
        y = x @ gamma + b * h + rng.standard_normal(n_per_env)
        return x, y

    x1, y1 = _env(False)
    x2, y2 = _env(True)
    d = Dataset(
        x=np.vstack([x1, x2]),
        y=np.concatenate([y1, y2]),
        env=np.concatenate(
            [np.ones(n_per_env, dtype=np.int64), np.full(n_per_env, 2, dtype=np.int64)]
        ),
        names=tuple(f"X{k + 1}" for k in range(p)),
        target_name="Y",
    )
    return HiddenIvScenario(
        dataset=d,
        gamma_star=gamma,
        s_star=frozenset(int(k) for k in np.nonzero(gamma)[0]),
    )
