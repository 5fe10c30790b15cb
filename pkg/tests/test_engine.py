"""Sampling engine, study runner, verdicts, and the selfcheck contract."""

import json
import math

import numpy as np
import pytest

from randsum.arrays import make_iid_array, make_rare_jump_array, make_shiryaev_array
from randsum.distributions import FiniteIndex, Geometric, Normal, Rademacher
from randsum.engine import (
    BUILTIN_PLAN_NAMES,
    StudyPlan,
    _evaluate_check,
    builtin_plan,
    empirical_delta,
    run_study,
    sample_random_sum,
    sample_random_sums,
    selfcheck,
    selfcheck_json,
    spawn_streams,
    thread_cap,
)
from randsum.metrics import SumLaw, delta_randomsum, dkw_bound, empirical_kolmogorov

RAD = make_iid_array(Rademacher())
SHIRYAEV = make_shiryaev_array()


class TestStreams:
    def test_spawn_is_deterministic_and_independent(self):
        a = spawn_streams(42, 3)
        b = spawn_streams(42, 3)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.normal(size=5), rb.normal(size=5))
        fresh = spawn_streams(42, 3)
        assert not np.array_equal(
            fresh[0].normal(size=5), fresh[1].normal(size=5)
        )

    def test_thread_cap_parsing(self, monkeypatch):
        monkeypatch.setenv("RANDSUM_THREADS", "7")
        assert thread_cap() == 7
        monkeypatch.setenv("RANDSUM_THREADS", "junk")
        assert thread_cap() == 4
        monkeypatch.setenv("RANDSUM_THREADS", "-3")
        assert thread_cap() == 1
        monkeypatch.delenv("RANDSUM_THREADS")
        assert thread_cap() == 4


class TestSampling:
    def test_lattice_mixture_frequencies(self):
        # rademacher row 4, index 1 or 3 with equal odds: the prefix-sum
        # law has atoms +-1.5 (1/16 each) and +-0.5 (7/16 each)
        idx = FiniteIndex([1, 3], [0.5, 0.5])
        rng = np.random.default_rng(101)
        draws = sample_random_sums(RAD, idx, 4, rng, 60_000)
        vals, counts = np.unique(np.round(draws, 12), return_counts=True)
        assert list(vals) == pytest.approx([-1.5, -0.5, 0.5, 1.5])
        expect = np.array([1.0, 7.0, 7.0, 1.0]) / 16.0
        freq = counts / draws.size
        se = np.sqrt(expect * (1.0 - expect) / draws.size)
        assert np.all(np.abs(freq - expect) <= 4.5 * se)

    def test_exact_mixture_matches_enumeration(self):
        # the library's own per-length mixture must reproduce the same law
        idx = FiniteIndex([1, 3], [0.5, 0.5])
        law = SumLaw([-1.5, -0.5, 0.5, 1.5], [1 / 16, 7 / 16, 7 / 16, 1 / 16])
        est = delta_randomsum(RAD, idx, 4, reference=law)
        assert est.value <= 1e-12

    def test_rows_mode_shiryaev_is_exactly_normal(self):
        # every complete row sums to a standard normal, whatever nu does
        rng = np.random.default_rng(5)
        draws = sample_random_sums(
            SHIRYAEV, Geometric.from_mean(8.0), 8, rng, 20_000, mode="rows"
        )
        est = empirical_kolmogorov(draws, Normal(0.0, 1.0), alpha=0.01)
        assert est.value <= dkw_bound(20_000, 0.01)

    def test_single_draw_and_size_validation(self):
        rng = np.random.default_rng(0)
        x = sample_random_sum(RAD, FiniteIndex([4], [1.0]), 4, rng)
        # four entries of +-1/2: the sum lives on the integer lattice
        assert min(abs(x - v) for v in (-2.0, -1.0, 0.0, 1.0, 2.0)) < 1e-12
        with pytest.raises(ValueError):
            sample_random_sums(RAD, FiniteIndex([4], [1.0]), 4, rng, 0)
        with pytest.raises(ValueError):
            sample_random_sums(RAD, FiniteIndex([4], [1.0]), 4, rng, 10, mode="rolls")

    def test_empirical_delta_guards_sample_floor(self):
        rng = np.random.default_rng(1)
        with pytest.raises(ValueError):
            empirical_delta(RAD, FiniteIndex([4], [1.0]), 4, rng, samples=500)


class TestStudyPlan:
    def test_validation(self):
        good = builtin_plan("feller_necessity_rare_jump")
        assert good.validated() is good
        with pytest.raises(ValueError):
            builtin_plan("feller_necessity_rare_jump", samples=10).validated()
        with pytest.raises(ValueError):
            builtin_plan("feller_necessity_rare_jump", delta=1.5).validated()
        with pytest.raises(ValueError):
            builtin_plan("feller_necessity_rare_jump", mode="sideways").validated()
        with pytest.raises(ValueError):
            builtin_plan(
                "feller_necessity_rare_jump", distances=("delta_quantum",)
            ).validated()

    def test_builtin_names_and_overrides(self):
        assert BUILTIN_PLAN_NAMES == (
            "feller_necessity_rare_jump",
            "lindeberg_uniform_poisson",
            "lyapunov_exponential_poisson",
            "rotar_shiryaev_series",
        )
        p = builtin_plan("lindeberg_uniform_poisson", n_grid=(4, 8), samples=2000)
        assert p.n_grid == (4, 8) and p.samples == 2000
        with pytest.raises(KeyError):
            builtin_plan("does_not_exist")

    def test_json_round_trip_shape(self):
        d = builtin_plan("rotar_shiryaev_series").to_json_dict()
        assert d["mode"] == "rows"
        assert json.loads(json.dumps(d)) == d


class TestEvaluateCheck:
    @staticmethod
    def rows(metric, pairs, eps=0.5):
        return [
            {"label": "t", "n": n, "epsilon": eps, "delta": 1.0,
             "metric": metric, "value": v, "error_bound": b}
            for n, v, b in pairs
        ]

    def test_to_zero(self):
        rows = self.rows("m", [(4, 0.5, 0.0), (8, 0.2, 0.0), (16, 1e-5, 0.0)])
        ok = _evaluate_check(
            {"kind": "to_zero", "metric": "m", "epsilon": 0.5, "final_max": 1e-3}, rows
        )
        assert ok["passed"]
        stalled = self.rows("m", [(4, 0.5, 0.0), (8, 0.5, 0.0), (16, 1e-5, 0.0)])
        bad = _evaluate_check(
            {"kind": "to_zero", "metric": "m", "epsilon": 0.5, "final_max": 1e-3},
            stalled,
        )
        assert not bad["passed"] and "strictly" in bad["detail"]

    def test_to_zero_tolerates_noise_below_threshold(self):
        # once under final_max the series only needs to stay nonincreasing
        # up to 1e-12; an exact tie is fine
        rows = self.rows("m", [(4, 1e-5, 0.0), (8, 1e-5, 0.0)])
        ok = _evaluate_check(
            {"kind": "to_zero", "metric": "m", "epsilon": 0.5, "final_max": 1e-3}, rows
        )
        assert ok["passed"]

    def test_noisy_decrease(self):
        rows = self.rows("m", [(4, 0.10, 0.01), (8, 0.105, 0.01), (16, 0.01, 0.01)])
        ok = _evaluate_check(
            {"kind": "noisy_decrease", "metric": "m", "epsilon": 0.5,
             "final_max": 0.02}, rows
        )
        assert ok["passed"]  # the rise is inside summed bounds
        rows = self.rows("m", [(4, 0.10, 0.001), (8, 0.2, 0.001)])
        bad = _evaluate_check(
            {"kind": "noisy_decrease", "metric": "m", "epsilon": 0.5,
             "final_max": 0.5}, rows
        )
        assert not bad["passed"]

    def test_constant_all_below_final_above(self):
        rows = self.rows("m", [(4, 0.5, 0.0), (8, 0.5 + 1e-13, 0.0)])
        assert _evaluate_check(
            {"kind": "constant", "metric": "m", "epsilon": 0.5, "target": 0.5}, rows
        )["passed"]
        assert _evaluate_check(
            {"kind": "all_below", "metric": "m", "epsilon": 0.5, "threshold": 0.6},
            rows,
        )["passed"]
        assert not _evaluate_check(
            {"kind": "final_above", "metric": "m", "epsilon": 0.5, "threshold": 0.7},
            rows,
        )["passed"]

    def test_tracks_metric(self):
        rows = self.rows("a", [(4, 0.5, 0.01)]) + self.rows(
            "b", [(4, 0.505, 0.01)], eps=None
        )
        assert _evaluate_check(
            {"kind": "tracks_metric", "metric": "a", "epsilon": 0.5, "other": "b"},
            rows,
        )["passed"]

    def test_missing_rows_and_unknown_kind(self):
        assert not _evaluate_check(
            {"kind": "to_zero", "metric": "ghost", "final_max": 1.0}, []
        )["passed"]
        assert not _evaluate_check({"kind": "wibble", "metric": "m"}, [])["passed"]


def small_plan(**overrides):
    defaults = dict(
        label="tiny",
        array={"array": "rare-jump"},
        index={"family": "geometric", "mean": "n"},
        n_grid=(4, 8),
        epsilon_grid=(0.5,),
        delta=1.0,
        samples=2000,
        seed=9,
        functionals=("rand_lindeberg", "rand_feller"),
        distances=("empirical_delta", "delta_mixture"),
        checks=(
            {"kind": "final_above", "metric": "rand_lindeberg", "epsilon": 0.5,
             "threshold": 0.5},
        ),
    )
    defaults.update(overrides)
    return StudyPlan(**defaults)


class TestRunStudy:
    def test_rows_verdicts_and_pass(self):
        res = run_study(small_plan())
        metrics = {r["metric"] for r in res.rows}
        assert {"rand_lindeberg", "rand_feller", "empirical_delta", "delta_mixture"} <= metrics
        assert res.errors == []
        assert len(res.verdicts) == 1 and res.verdicts[0]["passed"]
        assert res.passed

    def test_deterministic_across_thread_caps(self, monkeypatch):
        monkeypatch.setenv("RANDSUM_THREADS", "1")
        serial = run_study(small_plan())
        monkeypatch.setenv("RANDSUM_THREADS", "4")
        threaded = run_study(small_plan())
        assert serial.csv_text() == threaded.csv_text()

    def test_failing_check_fails_study(self):
        res = run_study(
            small_plan(
                checks=(
                    {"kind": "all_below", "metric": "rand_lindeberg",
                     "epsilon": 0.5, "threshold": 1e-6},
                )
            )
        )
        assert not res.passed

    def test_json_runtime_toggle(self):
        res = run_study(small_plan())
        with_rt = res.to_json_dict()
        without = res.to_json_dict(include_runtime=False)
        assert "runtime_seconds" in with_rt and "runtime_seconds" not in without

    def test_normal_twin_column(self):
        res = run_study(
            small_plan(
                array={"array": "iid", "base": {"family": "rademacher"}},
                normal_twin_feller=True,
                distances=("empirical_delta",),
            )
        )
        twin_rows = [r for r in res.rows if r["metric"] == "rand_feller_normal_twin"]
        assert len(twin_rows) == 2
        plain = {r["n"]: r["value"] for r in res.rows if r["metric"] == "rand_feller"}
        for r in twin_rows:
            assert r["value"] == pytest.approx(plain[r["n"]], rel=1e-9)


class TestSelfcheck:
    def test_all_pass_and_byte_stable(self):
        doc = selfcheck(42)
        assert doc["passed"] is True
        assert len(doc["checks"]) == 18
        assert selfcheck_json(42) == selfcheck_json(42)

    def test_seed_changes_document(self):
        assert selfcheck_json(42) != selfcheck_json(43)

    def test_loose_quadrature_must_fail(self):
        # the rotar guarantee is part of the contract: asking the
        # integrator for 1e-2 accuracy cannot certify a zero
        doc = selfcheck(42, quad_tol=1e-2)
        assert doc["passed"] is False
        failed = [c["name"] for c in doc["checks"] if not c["passed"]]
        assert failed == ["rotar_zero_on_normal"]
