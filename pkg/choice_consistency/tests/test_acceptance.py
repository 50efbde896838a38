"""
Large randomized checks: oracle agreement, random-chooser benchmarks,
permutation-test discrimination and estimator recovery.

Run with `pytest -m slow`.
"""

import numpy as np
import pytest

from choice_consistency.data_access import write_dataset
from choice_consistency.main import main
from choice_consistency.services.analytics import ccei_diff
from choice_consistency.services.estimation import estimate_ces, gm_to_params, loglik, loglik_gradient
from choice_consistency.services.garp_engine import check_garp
from choice_consistency.services.indices import ccei, hmi, index_report, mci, mpi
from choice_consistency.services.power_lab import (
    bronars_discrete,
    default_experiment_design,
    permutation_test,
)
from choice_consistency.services.restrictions import fosd_ccei, harp_efficiency, quasilinear_efficiency
from choice_consistency.tests import oracles
from choice_consistency.tests.conftest import ces_dataset, random_instance

pytestmark = pytest.mark.slow


def instances(count, seed):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, label=f"r{i:04d}") for i in range(count)]


class TestOracleAgreement:

    def test_indices_match_brute_force(self):
        for ds in instances(500, 1):
            assert abs(ccei(ds) - oracles.grid_ccei(ds)) <= 1e-4, ds.label
            assert hmi(ds)[1] == oracles.subset_hmi(ds), ds.label
            assert abs(mpi(ds) - oracles.pair_mpi(ds)) <= 1e-9, ds.label
            assert abs(mci(ds)[0] - oracles.order_mci(ds)) <= 1e-9, ds.label

    def test_perfect_consistency_and_dominance(self):
        for ds in instances(1000, 2):
            report = index_report(ds)
            verdict = check_garp(ds).passes
            assert {report.ccei == 1.0, report.hmi == 1.0, report.mpi == 0.0, report.mci == 0.0} == {verdict}
            assert harp_efficiency(ds) <= report.ccei + 1e-6, ds.label
            assert quasilinear_efficiency(ds) <= report.ccei + 1e-6, ds.label
            assert fosd_ccei(ds) <= report.ccei + 1e-6, ds.label

    def test_ccei_diff_is_non_negative(self):
        pool = instances(2000, 3)
        for s1, s2 in zip(pool[::2], pool[1::2]):
            result = ccei_diff(s1, s2, n_splits=1)
            assert result.diff >= 0.0
            if result.ccei_combined == 1.0:
                assert result.diff == 0.0


class TestRandomChoosers:

    def test_bronars_mean(self):
        summary = bronars_discrete(default_experiment_design(), n_options=11, n_sims=1000, seed=20190101)
        assert 0.535 <= summary.mean <= 0.735

    def test_permutation_discrimination(self):
        rng = np.random.default_rng(4)
        design = default_experiment_design()
        maximizers = 0
        for k in range(100):
            ds = ces_dataset(g=float(rng.uniform(0.5, 2.0)), m=float(rng.uniform(1.0, 3.0)),
                             seed=100 + k, label=f"ces{k}")
            maximizers += permutation_test(ds, n_perm=1000, seed=k).is_approximate_maximizer
        random_maximizers = 0
        for k in range(100):
            first = rng.uniform(0.0, 1.0, size=design.n_rounds)
            ds = design.dataset_from_shares(np.column_stack([first, 1.0 - first]), label=f"rand{k}")
            random_maximizers += permutation_test(ds, n_perm=1000, seed=k).is_approximate_maximizer
        assert maximizers >= 95
        assert maximizers - random_maximizers >= 30


class TestEstimatorRecovery:

    @pytest.mark.parametrize("g,m", [(1.0, 1.0), (2.0, 0.5), (0.6, -0.3), (1.5, 3.0)])
    def test_noiseless(self, g, m):
        result = estimate_ces(ces_dataset(g=g, m=m, seed=9))
        alpha, rho = gm_to_params(g, m)
        assert result.alpha_hat == pytest.approx(alpha, abs=1e-4)
        assert result.rho_hat == pytest.approx(rho, abs=1e-4)

    def test_noisy_median(self):
        alpha, rho = gm_to_params(1.0, 1.0)
        estimates = [estimate_ces(ces_dataset(g=1.0, m=1.0, seed=500 + k, noise=0.05)) for k in range(100)]
        assert np.median([e.alpha_hat for e in estimates]) == pytest.approx(alpha, abs=0.05)
        assert np.median([e.rho_hat for e in estimates]) == pytest.approx(rho, abs=0.05)

    def test_gradient_at_random_points(self):
        rng = np.random.default_rng(6)
        ds = ces_dataset(g=1.2, m=0.8, noise=0.25, seed=13)
        step = 1e-6
        for _ in range(20):
            theta = np.array([rng.uniform(-1, 1), rng.uniform(-0.5, 2), rng.uniform(np.log(0.05), np.log(0.5))])

            def value(t):
                return loglik(np.exp(t[0]), t[1], np.exp(t[2]), ds)

            numeric = np.array([(value(theta + step * e) - value(theta - step * e)) / (2 * step)
                                for e in np.eye(3)])
            analytic = loglik_gradient(np.exp(theta[0]), theta[1], np.exp(theta[2]), ds)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-5)


class TestDeterminism:

    def test_permtest_with_many_workers(self, tmp_path):
        directory = tmp_path / "datasets"
        for k in range(8):
            write_dataset(ces_dataset(seed=k, noise=0.1, label=f"c{k}"), directory / f"c{k}.csv")
        outputs = []
        for jobs in ("1", "8"):
            out = tmp_path / f"perm_{jobs}.csv"
            assert main(["permtest", "-i", str(directory), "-o", str(out), "--perms", "100",
                         "--jobs", jobs]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
