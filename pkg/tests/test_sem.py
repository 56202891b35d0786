import json

import numpy as np
import pytest

from invarcp.errors import TargetIntervened
from invarcp.fixtures import appendix_a_specs
from invarcp.invariance import residual_invariance_test
from invarcp.sem import (
    Scenario,
    ScenarioParams,
    SemSpec,
    dataset_from_specs,
    do_intervention,
    generate_scenario,
    hidden_iv_scenario,
    noise_intervention,
    parents,
    random_sem,
    sample,
    sample_scenario_params,
    simultaneous_noise_scenario,
)


def closed_form_covariance(spec: SemSpec) -> np.ndarray:
    """Independent oracle: for X = B X + eps with diagonal noise
    covariance S, cov(X) = (I - B)^{-1} S (I - B)^{-T}."""
    m = spec.n_nodes
    inv = np.linalg.inv(np.eye(m) - spec.beta)
    return inv @ np.diag(spec.sigma**2) @ inv.T


def _chain_spec():
    beta = np.zeros((3, 3))
    beta[1, 0] = 1.0
    beta[2, 1] = -0.5
    return SemSpec(order=(0, 1, 2), beta=beta, sigma=np.array([1.0, 0.7, 0.4]), target=2)


class TestSemSpec:
    def test_order_violation_rejected(self):
        beta = np.zeros((2, 2))
        beta[0, 1] = 1.0  # node 1 must precede node 0, but order says otherwise
        with pytest.raises(ValueError):
            SemSpec(order=(0, 1), beta=beta, sigma=np.ones(2), target=0)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError):
            SemSpec(order=(0, 1), beta=np.zeros((2, 2)), sigma=np.array([1.0, 0.0]), target=0)

    def test_fixed_node_may_have_zero_sigma(self):
        spec = SemSpec(
            order=(0, 1),
            beta=np.zeros((2, 2)),
            sigma=np.array([1.0, 0.0]),
            target=0,
            fixed={1: 3.0},
        )
        assert spec.fixed[1] == 3.0

    def test_parents_reads_beta_support(self):
        spec = _chain_spec()
        assert parents(spec, 0) == frozenset()
        assert parents(spec, 2) == frozenset({1})
        env1, _ = appendix_a_specs()
        assert parents(env1, env1.target) == frozenset({1, 2})

    def test_parents_of_complete_dag(self):
        params = ScenarioParams(
            n_obs=100, n_int=100, p=4, k_avg=3, lb1=0.5, delta_b1=0.5,
            sigma2_min=1.0, sigma2_max=1.0, a_min=1.0, delta_a=0.0,
            coef_change=False, lb2=0.5, ub2=1.0, single_intervention=True, theta=0.5,
        )
        spec = random_sem(params, np.random.default_rng(0))  # k_avg = p-1: every pair connected
        order_pos = {node: i for i, node in enumerate(spec.order)}
        for j in range(spec.n_nodes):
            expected = {k for k in range(spec.n_nodes) if order_pos[k] < order_pos[j]}
            assert parents(spec, j) == expected


class TestSampling:
    def test_independent_nodes_match_marginals(self):
        spec = SemSpec(
            order=(0, 1),
            beta=np.zeros((2, 2)),
            sigma=np.array([1.0, 2.0]),
            target=0,
            mu_shift=np.array([0.5, -1.0]),
        )
        data = sample(spec, 40000, np.random.default_rng(1))
        for j, (mu, sd) in enumerate([(0.5, 1.0), (-1.0, 2.0)]):
            se_mean = sd / np.sqrt(40000)
            assert abs(data[:, j].mean() - mu) < 4 * se_mean
            assert abs(data[:, j].std() - sd) < 4 * sd / np.sqrt(2 * 40000)

    def test_moments_match_closed_form_covariance(self):
        spec = _chain_spec()
        data = sample(spec, 60000, np.random.default_rng(2))
        expected = closed_form_covariance(spec)
        observed = np.cov(data.T)
        assert np.max(np.abs(observed - expected)) < 0.05

    def test_do_fixed_column_is_constant(self):
        spec = do_intervention(_chain_spec(), {0: 2.5})
        data = sample(spec, 50, np.random.default_rng(3))
        assert np.all(data[:, 0] == 2.5)

    def test_seed_determinism(self):
        spec = _chain_spec()
        a = sample(spec, 100, np.random.default_rng(42))
        b = sample(spec, 100, np.random.default_rng(42))
        assert np.array_equal(a, b)


class TestDoIntervention:
    def test_cuts_incoming_edges_and_pins_value(self):
        spec = do_intervention(_chain_spec(), {1: 0.7})
        assert np.all(spec.beta[1] == 0.0)
        assert spec.fixed[1] == 0.7

    def test_empty_assignment_is_identity(self):
        spec = _chain_spec()
        assert do_intervention(spec, {}) is spec

    def test_target_guard(self):
        spec = _chain_spec()
        with pytest.raises(TargetIntervened):
            do_intervention(spec, {2: 0.0})
        override = do_intervention(spec, {2: 0.0}, override_target=True)
        assert override.target_intervened

    def test_leaf_intervention_keeps_upstream_marginals(self):
        spec = _chain_spec()
        intervened = do_intervention(spec, {1: 9.0}, override_target=False)
        base = sample(spec, 50000, np.random.default_rng(4))
        after = sample(intervened, 50000, np.random.default_rng(5))
        assert abs(base[:, 0].std() - after[:, 0].std()) < 0.03


class TestNoiseIntervention:
    def test_unit_scale_zero_shift_is_identity_in_law(self):
        spec = _chain_spec()
        same = noise_intervention(spec, scales={0: 1.0}, shifts={0: 0.0})
        a = sample(spec, 64, np.random.default_rng(6))
        b = sample(same, 64, np.random.default_rng(6))
        assert np.array_equal(a, b)

    def test_constant_scale_multiplies_sd(self):
        spec = noise_intervention(_chain_spec(), scales={0: 3.0})
        data = sample(spec, 60000, np.random.default_rng(7))
        assert data[:, 0].std() == pytest.approx(3.0, rel=0.03)

    def test_random_scale_second_moment(self):
        # per-sample A ~ Uniform[0, sqrt(3)] has E A^2 = 1: the variance is
        # unchanged although the distribution is not
        spec = noise_intervention(
            _chain_spec(), scales={0: ("uniform", 0.0, float(np.sqrt(3.0)))}
        )
        data = sample(spec, 120000, np.random.default_rng(8))
        assert data[:, 0].var() == pytest.approx(1.0, rel=0.03)
        # heavier center than a Gaussian of the same variance
        assert np.mean(np.abs(data[:, 0]) < 0.1) > 0.09

    def test_constant_shift_moves_mean(self):
        spec = noise_intervention(_chain_spec(), shifts={0: 2.0})
        data = sample(spec, 30000, np.random.default_rng(9))
        assert data[:, 0].mean() == pytest.approx(2.0, abs=0.05)

    def test_per_environment_mode_freezes_draw(self):
        spec = noise_intervention(
            _chain_spec(),
            scales={0: ("uniform", 1.0, 3.0)},
            per_environment=True,
            rng=np.random.default_rng(10),
        )
        assert not spec.noise_scales  # resolved into a constant sigma
        assert spec.sigma[0] != _chain_spec().sigma[0]

    def test_target_guard(self):
        with pytest.raises(TargetIntervened):
            noise_intervention(_chain_spec(), scales={2: 2.0})


class TestSimultaneousNoise:
    def test_zero_delta_gives_constant_multiplier(self):
        spec, nodes = simultaneous_noise_scenario(
            _chain_spec(), a_min=2.0, delta_a=0.0, rng=np.random.default_rng(11), theta=0.9
        )
        assert not spec.noise_scales
        for j in nodes:
            assert spec.sigma[j] == pytest.approx(2.0 * _chain_spec().sigma[j])

    def test_theta_one_intervenes_everywhere(self):
        _, nodes = simultaneous_noise_scenario(
            _chain_spec(), a_min=1.0, delta_a=1.0, rng=np.random.default_rng(12), theta=1.0
        )
        assert len(nodes) == 3

    def test_single_mode_picks_one_node(self):
        _, nodes = simultaneous_noise_scenario(
            _chain_spec(), a_min=1.0, delta_a=1.0, rng=np.random.default_rng(13), single=True
        )
        assert len(nodes) == 1

    def test_coefficient_redraw_touches_only_intervened_rows(self):
        base = _chain_spec()
        rng = np.random.default_rng(14)
        spec, nodes = simultaneous_noise_scenario(
            base, a_min=1.0, delta_a=0.5, rng=rng, coef_change=True, lb2=0.1, ub2=0.3, theta=0.67
        )
        for j in range(3):
            row_changed = not np.array_equal(spec.beta[j], base.beta[j])
            had_parents = parents(base, j) != frozenset()
            if j in nodes and had_parents:
                assert row_changed
                for k in np.nonzero(spec.beta[j])[0]:
                    assert 0.1 <= abs(spec.beta[j, k]) <= 0.3
            else:
                assert not row_changed

    def test_seeded_reproducibility(self):
        a = simultaneous_noise_scenario(
            _chain_spec(), 1.0, 1.0, np.random.default_rng(15), theta=0.8
        )
        b = simultaneous_noise_scenario(
            _chain_spec(), 1.0, 1.0, np.random.default_rng(15), theta=0.8
        )
        assert a[1] == b[1]
        assert np.array_equal(a[0].sigma, b[0].sigma)


class TestRandomSem:
    def _params(self, p=6, k=2):
        return ScenarioParams(
            n_obs=100, n_int=100, p=p, k_avg=k, lb1=0.5, delta_b1=0.5,
            sigma2_min=0.5, sigma2_max=1.5, a_min=1.0, delta_a=0.0,
            coef_change=False, lb2=0.5, ub2=1.0, single_intervention=False, theta=0.5,
        )

    def test_edge_count_expectation(self):
        params = self._params(p=8, k=3)
        n_draws = 2000
        rng = np.random.default_rng(16)
        edges = np.array(
            [np.count_nonzero(random_sem(params, rng).beta) for _ in range(n_draws)]
        )
        m = params.p + 1
        n_pairs = m * (m - 1) / 2
        prob = params.k_avg / (params.p - 1)
        expected = n_pairs * prob
        se = np.sqrt(n_pairs * prob * (1 - prob) / n_draws)
        assert abs(edges.mean() - expected) < 3 * se

    def test_same_seed_identical(self):
        params = self._params()
        a = random_sem(params, np.random.default_rng(17))
        b = random_sem(params, np.random.default_rng(17))
        assert np.array_equal(a.beta, b.beta)
        assert np.array_equal(a.sigma, b.sigma)
        assert a.order == b.order and a.target == b.target

    def test_coefficient_magnitudes_within_bounds(self):
        params = self._params()
        spec = random_sem(params, np.random.default_rng(18))
        nz = np.abs(spec.beta[spec.beta != 0])
        assert np.all((nz >= params.lb1) & (nz <= params.lb1 + params.delta_b1))


class TestScenarioParams:
    def test_marginals_match_their_grids(self):
        rng = np.random.default_rng(19)
        draws = [sample_scenario_params(rng) for _ in range(4000)]
        n = len(draws)
        # n_obs uniform over five values
        for value in (100, 200, 300, 400, 500):
            freq = sum(d.n_obs == value for d in draws) / n
            assert abs(freq - 0.2) < 4 * np.sqrt(0.2 * 0.8 / n)
        # p uniform over 5..40
        ps = np.array([d.p for d in draws])
        assert ps.min() == 5 and ps.max() == 40
        assert abs(ps.mean() - 22.5) < 4 * np.sqrt(((40 - 5 + 1) ** 2 - 1) / 12 / n)
        # k uniform over 1..4
        for value in (1, 2, 3, 4):
            freq = sum(d.k_avg == value for d in draws) / n
            assert abs(freq - 0.25) < 4 * np.sqrt(0.25 * 0.75 / n)
        # delta_a is zero with probability 1/3
        freq0 = sum(d.delta_a == 0.0 for d in draws) / n
        assert abs(freq0 - 1 / 3) < 4 * np.sqrt((1 / 3) * (2 / 3) / n)
        # single-node intervention with probability 1/6
        freq1 = sum(d.single_intervention for d in draws) / n
        assert abs(freq1 - 1 / 6) < 4 * np.sqrt((1 / 6) * (5 / 6) / n)
        # ordering constraints
        assert all(d.sigma2_max >= d.sigma2_min for d in draws)
        assert all(d.ub2 >= d.lb2 for d in draws)
        assert all(1 / 3 <= d.theta <= 1 / 1.1 + 1e-12 for d in draws)


class TestGenerateScenario:
    def test_truth_is_beta_support_and_deterministic(self):
        a = generate_scenario(np.random.default_rng(20))
        b = generate_scenario(np.random.default_rng(20))
        assert a.parent_nodes() == parents(a.base, a.target)
        assert a.params == b.params
        assert np.array_equal(a.base.beta, b.base.beta)
        assert a.intervened_nodes == b.intervened_nodes

    def test_target_intervention_is_labelled(self):
        rng = np.random.default_rng(21)
        seen = {True: 0, False: 0}
        for _ in range(60):
            s = generate_scenario(rng)
            seen[s.target_intervened] += 1
            assert s.target_intervened == (s.target in s.intervened_nodes)
        assert seen[True] > 0 and seen[False] > 0

    def test_sample_dataset_shape(self):
        s = generate_scenario(np.random.default_rng(22))
        d = s.sample_dataset(np.random.default_rng(0))
        assert d.n == s.params.n_obs + s.params.n_int
        assert d.p == s.params.p
        assert d.n_env == 2

    def test_json_roundtrip(self):
        s = generate_scenario(np.random.default_rng(23))
        back = Scenario.from_json(s.to_json())
        assert back.params == s.params
        assert np.array_equal(back.base.beta, s.base.beta)
        assert np.array_equal(back.intervened.sigma, s.intervened.sigma)
        assert back.intervened.noise_scales == s.intervened.noise_scales
        assert back.intervened_nodes == s.intervened_nodes
        assert json.loads(s.to_json()) == json.loads(back.to_json())


class TestInvarianceOfParents:
    def test_conditional_law_of_target_survives_interventions(self):
        # on data pooled from the base spec and any non-target
        # intervention, the parent set stays invariant at the test level
        spec = _chain_spec()  # target node 2, parent {1}
        rejections = 0
        n_rep = 300
        for seed in range(n_rep):
            rng = np.random.default_rng([77, seed])
            if seed % 2 == 0:
                shifted = do_intervention(spec, {1: 1.5})
            else:
                shifted = noise_intervention(spec, scales={0: 2.0}, shifts={1: 1.0})
            d = dataset_from_specs([spec, shifted], [150, 150], rng)
            r = residual_invariance_test(d, (1,))  # node 1 is column 1 (target is node 2)
            rejections += r.p_value <= 0.05
        assert rejections / n_rep <= 0.05 + 2 * np.sqrt(0.05 * 0.95 / n_rep)


class TestHiddenIvScenario:
    def test_shapes_and_truth(self):
        sc = hidden_iv_scenario(4, 300, np.random.default_rng(24))
        assert sc.dataset.p == 4
        assert sc.dataset.n == 600
        assert sc.s_star == frozenset(np.nonzero(sc.gamma_star)[0])

    def test_determinism(self):
        a = hidden_iv_scenario(3, 200, np.random.default_rng(25))
        b = hidden_iv_scenario(3, 200, np.random.default_rng(25))
        assert np.array_equal(a.dataset.x, b.dataset.x)

    def test_zero_shift_makes_environments_identical_in_law(self):
        sc = hidden_iv_scenario(3, 30000, np.random.default_rng(26), z_scale=0.0)
        x1 = sc.dataset.x[sc.dataset.env == 1]
        x2 = sc.dataset.x[sc.dataset.env == 2]
        assert np.max(np.abs(x1.std(axis=0) - x2.std(axis=0))) < 0.03
