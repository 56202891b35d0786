import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invarcp import (
    Dataset,
    EnvironmentGrouping,
    IcpConfig,
    pool_environments,
    run_icp,
    split_environments_by_variable,
    validate_dataset,
)
from invarcp.data import subset_environments
from invarcp.errors import (
    InvalidPartition,
    MissingColumn,
    NonNumericValue,
    SingleRow,
    UnknownColumn,
)
from invarcp.sem import SemSpec, sample


def _frame(n=8, envs=("a", "a", "b", "b", "a", "b", "a", "b")):
    rng = np.random.default_rng(0)
    return pd.DataFrame(
        {
            "x1": rng.normal(size=n),
            "x2": rng.normal(size=n),
            "y": rng.normal(size=n),
            "env": list(envs[:n]),
        }
    )


class TestValidateDataset:
    def test_relabels_in_order_of_first_appearance(self):
        frame = pd.DataFrame(
            {"x": [1.0, 2.0, 3.0, 4.0], "y": [0.0, 1.0, 2.0, 3.0], "e": ["a", "a", "b", "b"]}
        )
        d = validate_dataset(frame, "y", "e")
        assert d.n_env == 2
        assert d.env.tolist() == [1, 1, 2, 2]
        assert d.names == ("x",)

    def test_string_labels_by_appearance_not_sort_order(self):
        frame = _frame(envs=("z", "a", "z", "a", "z", "a", "z", "a"))
        d = validate_dataset(frame, "y", "env")
        assert d.env.tolist()[:2] == [1, 2]

    def test_nan_in_target_rejected(self):
        frame = _frame()
        frame.loc[2, "y"] = np.nan
        with pytest.raises(NonNumericValue):
            validate_dataset(frame, "y", "env")

    def test_non_numeric_predictor_rejected(self):
        frame = _frame()
        frame["x1"] = frame["x1"].astype(object)
        frame.loc[1, "x1"] = "oops"
        with pytest.raises(NonNumericValue):
            validate_dataset(frame, "y", "env")

    def test_single_environment_allowed(self):
        frame = _frame(envs=("a",) * 8)
        d = validate_dataset(frame, "y", "env")
        assert d.n_env == 1
        # a single environment identifies nothing but is not an error
        res = run_icp(d, IcpConfig())
        assert res.s_hat == frozenset() and not res.model_rejected

    def test_missing_column(self):
        with pytest.raises(MissingColumn):
            validate_dataset(_frame(), "nope", "env")

    def test_single_row(self):
        with pytest.raises(SingleRow):
            validate_dataset(_frame().head(1), "y", "env")

    def test_deterministic(self):
        f1, f2 = _frame(), _frame()
        d1 = validate_dataset(f1, "y", "env")
        d2 = validate_dataset(f2, "y", "env")
        assert np.array_equal(d1.x, d2.x)
        assert np.array_equal(d1.env, d2.env)
        assert d1.names == d2.names

    def test_arrays_are_frozen(self):
        d = validate_dataset(_frame(), "y", "env")
        with pytest.raises(ValueError):
            d.x[0, 0] = 1.0


class TestPooling:
    def _dataset(self, env):
        n = len(env)
        rng = np.random.default_rng(1)
        return Dataset(
            x=rng.normal(size=(n, 2)),
            y=rng.normal(size=n),
            env=np.asarray(env),
            names=("a", "b"),
            target_name="y",
        )

    def test_merge_two_blocks(self):
        d = self._dataset([1, 1, 2, 2, 3, 3])
        pooled = pool_environments(d, EnvironmentGrouping((frozenset({1, 2}), frozenset({3}))))
        assert pooled.n_env == 2
        assert pooled.env.tolist() == [1, 1, 1, 1, 2, 2]
        assert np.array_equal(pooled.x, d.x)

    def test_identity_partition_is_noop(self):
        d = self._dataset([2, 1, 2, 1, 3, 3])
        grouping = EnvironmentGrouping((frozenset({1}), frozenset({2}), frozenset({3})))
        pooled = pool_environments(d, grouping)
        assert pooled.env.tolist() == d.env.tolist()

    def test_overlapping_blocks_rejected(self):
        d = self._dataset([1, 1, 2, 2])
        with pytest.raises(InvalidPartition):
            pool_environments(d, EnvironmentGrouping((frozenset({1, 2}), frozenset({2}))))

    def test_missing_label_rejected(self):
        d = self._dataset([1, 1, 2, 2, 3, 3])
        with pytest.raises(InvalidPartition):
            pool_environments(d, EnvironmentGrouping((frozenset({1}), frozenset({3}))))

    def test_pool_all_then_icp_returns_empty(self):
        # Two genuinely different environments collapse into one block:
        # nothing is identifiable afterwards.
        rng = np.random.default_rng(3)
        x1 = rng.normal(size=400)
        x2 = rng.normal(size=400) * 3.0
        y = np.concatenate([x1, x2]) * 1.5 + rng.normal(size=800) * 0.5
        d = Dataset(
            x=np.concatenate([x1, x2])[:, None],
            y=y,
            env=np.repeat([1, 2], 400),
            names=("x",),
            target_name="y",
        )
        pooled = pool_environments(d, EnvironmentGrouping((frozenset({1, 2}),)))
        assert pooled.n_env == 1
        res = run_icp(pooled, IcpConfig())
        assert res.s_hat == frozenset()

    @given(st.permutations([1, 2, 3, 4]))
    @settings(max_examples=25, deadline=None)
    def test_pooling_composes(self, labels):
        # pooling then pooling again equals pooling once with the
        # composed partition
        d = self._dataset(sorted(labels) + labels)
        first = EnvironmentGrouping((frozenset({1, 2}), frozenset({3}), frozenset({4})))
        second = EnvironmentGrouping((frozenset({1, 3}), frozenset({2})))
        composed = EnvironmentGrouping((frozenset({1, 2, 4}), frozenset({3})))
        via_two = pool_environments(pool_environments(d, first), second)
        via_one = pool_environments(d, composed)
        assert via_two.env.tolist() == via_one.env.tolist()


class TestSplitting:
    def _dataset(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, 3))
        y = x[:, 0] + rng.normal(size=n)
        return Dataset(x=x, y=y, env=np.ones(n, dtype=int), names=("u", "a", "b"), target_name="y")

    def test_median_split_balanced(self):
        d = self._dataset()
        cut = float(np.median(d.x[:, 0]))
        out = split_environments_by_variable(d, "u", [cut])
        assert out.n_env == 2
        n1 = int((out.env == 1).sum())
        assert abs(n1 - (d.n - n1)) <= 1

    def test_split_column_removed_by_default(self):
        d = self._dataset()
        out = split_environments_by_variable(d, "u", [0.0])
        assert out.names == ("a", "b")
        kept = split_environments_by_variable(d, "u", [0.0], keep_as_predictor=True)
        assert kept.names == d.names

    def test_out_of_range_cutpoints_drop_to_one_env(self):
        d = self._dataset()
        with pytest.warns(UserWarning):
            out = split_environments_by_variable(d, "u", [1e9])
        assert out.n_env == 1

    def test_unknown_column(self):
        with pytest.raises(UnknownColumn):
            split_environments_by_variable(self._dataset(), "nope", [0.0])

    def test_cutpoints_must_increase(self):
        with pytest.raises(ValueError):
            split_environments_by_variable(self._dataset(), "u", [1.0, 0.5])

    @given(st.lists(st.floats(-2, 2), min_size=1, max_size=5, unique=True))
    @settings(max_examples=40, deadline=None)
    def test_k_cutpoints_make_at_most_k_plus_one_envs(self, cuts):
        d = self._dataset(n=60)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = split_environments_by_variable(d, "u", sorted(cuts))
        assert out.n_env <= len(cuts) + 1

    def test_split_on_nondescendant_keeps_coverage(self):
        # u -> x1 -> y -> x2; splitting on the non-descendant u must not
        # produce false parents: P(s_hat <= {x1}) >= 1 - alpha.
        beta = np.zeros((4, 4))
        beta[1, 0] = 1.0  # x1 <- u
        beta[2, 1] = 1.0  # y <- x1
        beta[3, 2] = 0.8  # x2 <- y
        spec = SemSpec(order=(0, 1, 2, 3), beta=beta, sigma=np.full(4, 1.0), target=2)
        bad = 0
        n_rep = 200
        for seed in range(n_rep):
            rng = np.random.default_rng([42, seed])
            data = sample(spec, 300, rng)
            d = Dataset(
                x=data[:, [0, 1, 3]],
                y=data[:, 2],
                env=np.ones(300, dtype=int),
                names=("u", "x1", "x2"),
                target_name="y",
            )
            split = split_environments_by_variable(d, "u", [float(np.median(d.x[:, 0]))])
            res = run_icp(split, IcpConfig(alpha=0.05))
            bad += not (res.s_hat <= {0})  # x1 is column 0 after removing u
        se = np.sqrt(0.05 * 0.95 / n_rep)
        assert bad / n_rep <= 0.05 + 2 * se


class TestSubsetEnvironments:
    def test_restrict_and_relabel(self):
        rng = np.random.default_rng(5)
        d = Dataset(
            x=rng.normal(size=(9, 1)),
            y=rng.normal(size=9),
            env=np.array([1, 1, 1, 2, 2, 2, 3, 3, 3]),
            names=("x",),
            target_name="y",
        )
        sub = subset_environments(d, [1, 3])
        assert sub.n == 6
        assert sub.env.tolist() == [1, 1, 1, 2, 2, 2]
        assert np.array_equal(sub.x, d.x[[0, 1, 2, 6, 7, 8]])
