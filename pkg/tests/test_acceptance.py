"""
End-to-end properties over random instances, the bundled scenario corpus and the two-regime reference.
Corpus-wide runs are marked slow; `pytest -m "not slow"` skips them.
"""

from __future__ import annotations

import numpy as np
import pytest

from config.settings import DEFAULT_FILTER_K, TOLERANCES
from src.model import DeadlineMode
from src.offline import normalize_zero_migration, solve_offline
from src.predictor import predict_sigma, sample_price
from src.renderer import report_json, sweep_frame
from src.simulator import Algorithm, audit, reduction_pct, run, sweep
from src.synthesizer import two_regime_reference
from tests.conftest import SEED
from tests.scenario_oracles import (
    adversary_costs, capacity_is_slack, greedy_cost, random_instance, window_min_cost,
)

ALL = [Algorithm.GREEDY, Algorithm.OFFLINE, Algorithm.A, Algorithm.A_EPS, Algorithm.A_EPS_M]
MAX_SWEEP_DEADLINE = 12


def at_most(a: float, b: float) -> bool:
    return a <= b + TOLERANCES.objective_rel * max(1.0, abs(b))


def conserved(report) -> bool:
    return TOLERANCES.objectives_match(float(report.executed.sum()), report.released_total)


@pytest.fixture(scope="module")
def corpus_reports(corpus):
    return {s.name: {alg: run(s.config(alg)) for alg in ALL} for s in corpus}


class TestZeroMigrationNormalization:
    def test_random_instances(self):
        rng = np.random.default_rng(SEED)
        for _ in range(50):
            cloud, prices, work = random_instance(rng)
            plan = solve_offline(cloud, prices, work, with_migration=True)
            normalized = normalize_zero_migration(plan)
            assert not np.any(normalized.z > 0)
            assert abs(normalized.objective - plan.objective) < 1e-6 * max(1.0, abs(plan.objective))
            assert normalized.ledger().total == pytest.approx(normalized.objective, rel=1e-6, abs=1e-9)
            assert audit(normalized.to_state(), work, cloud.horizon) == []
            assert TOLERANCES.objectives_match(float(normalized.y.sum()), float(work.released.sum()))
            without = solve_offline(cloud, prices, work, with_migration=False)
            assert TOLERANCES.objectives_match(without.objective, plan.objective)


@pytest.mark.slow
class TestCorpusOrdering:
    def test_cost_chain(self, corpus, corpus_reports):
        for scenario in corpus:
            totals = {alg: report.total_cost for alg, report in corpus_reports[scenario.name].items()}
            eps = corpus_reports[scenario.name][Algorithm.A_EPS_M].max_prediction_error
            assert at_most(totals[Algorithm.OFFLINE], totals[Algorithm.A]), scenario.name
            assert at_most(totals[Algorithm.OFFLINE], totals[Algorithm.A_EPS_M]), scenario.name
            if scenario.kind != "contended":
                # A is bounded by greedy only when windows never compete for room
                assert at_most(totals[Algorithm.A], totals[Algorithm.GREEDY]), scenario.name
            assert at_most(totals[Algorithm.A_EPS_M], totals[Algorithm.A_EPS]), scenario.name
            assert at_most(totals[Algorithm.A_EPS_M], (1.0 + eps) * totals[Algorithm.A]), scenario.name

    def test_every_run_passes_audit(self, corpus, corpus_reports):
        for scenario in corpus:
            for alg, report in corpus_reports[scenario.name].items():
                assert report.ok, (scenario.name, alg, report.violations)
                assert conserved(report), (scenario.name, alg)

    def test_closed_form_costs_when_capacity_is_slack(self, corpus, corpus_reports):
        for scenario in corpus:
            if scenario.kind in ("adversarial", "contended"):
                continue
            assert capacity_is_slack(scenario.cloud, scenario.work), scenario.name
            reports = corpus_reports[scenario.name]
            expected = window_min_cost(scenario.cloud, scenario.prices, scenario.work, scenario.deadline_mode)
            assert reports[Algorithm.OFFLINE].total_cost == pytest.approx(expected, rel=1e-6), scenario.name
            # with exact prices and room in every window the online pipeline finds the same slots
            assert reports[Algorithm.A].total_cost == pytest.approx(expected, rel=1e-6), scenario.name
            expected_greedy = greedy_cost(scenario.cloud, scenario.prices, scenario.work)
            assert reports[Algorithm.GREEDY].total_cost == pytest.approx(expected_greedy, rel=1e-6), scenario.name

    def test_adversary_costs(self, corpus, corpus_reports):
        for scenario in corpus:
            if scenario.kind != "adversarial":
                continue
            case = 1 if "case1" in scenario.name else 2
            expected = adversary_costs(case, scenario.horizon, float(scenario.cloud.capacity[0]))
            reports = corpus_reports[scenario.name]
            assert reports[Algorithm.OFFLINE].total_cost == pytest.approx(expected["offline"]), scenario.name
            assert reports[Algorithm.GREEDY].total_cost == pytest.approx(expected["greedy"]), scenario.name
            for alg in (Algorithm.A, Algorithm.A_EPS, Algorithm.A_EPS_M):
                assert reports[alg].total_cost == pytest.approx(expected["online"]), (scenario.name, alg)


@pytest.mark.slow
class TestContendedMigration:
    @pytest.fixture
    def contended(self, corpus, corpus_reports):
        return [(s, corpus_reports[s.name]) for s in corpus if s.kind == "contended"]

    def test_capacity_binds(self, contended):
        assert contended
        for scenario, _ in contended:
            assert not capacity_is_slack(scenario.cloud, scenario.work), scenario.name

    def test_work_actually_migrates(self, contended):
        moved = {s.name: float(reports[Algorithm.A_EPS_M].migrated.sum()) for s, reports in contended}
        assert max(moved.values()) > 0.0, moved
        for scenario, reports in contended:
            assert float(reports[Algorithm.A_EPS].migrated.sum()) == 0.0, scenario.name

    def test_migration_never_costs_more(self, contended):
        for scenario, reports in contended:
            with_migration = reports[Algorithm.A_EPS_M]
            eps = with_migration.max_prediction_error
            assert with_migration.ok, (scenario.name, with_migration.violations)
            assert at_most(with_migration.total_cost, reports[Algorithm.A_EPS].total_cost), scenario.name
            assert at_most(with_migration.total_cost, (1.0 + eps) * reports[Algorithm.A].total_cost), scenario.name
            assert at_most(reports[Algorithm.OFFLINE].total_cost, with_migration.total_cost), scenario.name


@pytest.mark.slow
class TestZeroHorizon:
    def test_all_algorithms_agree(self, corpus):
        for scenario in corpus:
            reports = [run(scenario.config(alg, horizon=0)) for alg in ALL]
            totals = [r.total_cost for r in reports]
            assert max(totals) - min(totals) <= 1e-6 * max(1.0, max(totals)), scenario.name
            for report in reports:
                assert report.ok, (scenario.name, report.algorithm, report.violations)
                assert conserved(report)


@pytest.mark.slow
class TestOfflineMonotone:
    def test_cost_never_grows_with_deadline(self, corpus):
        for scenario in corpus:
            totals = [run(scenario.config(Algorithm.OFFLINE, horizon=D)).total_cost
                      for D in range(MAX_SWEEP_DEADLINE + 1)]
            for shorter, longer in zip(totals, totals[1:]):
                assert at_most(longer, shorter), scenario.name


class TestTwoRegimeReference:
    GREEDY = 792.0
    OFFLINE_D1 = 738.0
    OFFLINE_D12 = 360.0

    def test_savings_grow_with_deadline(self):
        scenario = two_regime_reference(SEED)
        greedy = run(scenario.config(Algorithm.GREEDY)).total_cost
        short = run(scenario.config(Algorithm.OFFLINE, horizon=1)).total_cost
        long = run(scenario.config(Algorithm.OFFLINE, horizon=MAX_SWEEP_DEADLINE)).total_cost
        assert greedy == pytest.approx(self.GREEDY, rel=1e-9)
        assert short == pytest.approx(self.OFFLINE_D1, rel=1e-9)
        assert long == pytest.approx(self.OFFLINE_D12, rel=1e-9)
        assert reduction_pct(greedy, short) == pytest.approx(100.0 * 54.0 / 792.0)
        assert reduction_pct(greedy, long) == pytest.approx(100.0 * 432.0 / 792.0)
        assert reduction_pct(greedy, long) - reduction_pct(greedy, short) > 0.0

    def test_sweep_reports_the_same_numbers(self):
        table = sweep(two_regime_reference(SEED).config(Algorithm.OFFLINE), [1, 12], ["offline"])
        assert table.totals("offline") == pytest.approx([self.OFFLINE_D1, self.OFFLINE_D12])


class TestPredictorStatistics:
    def test_seeded_draws_match_mean_and_deviation(self):
        draws = np.array([sample_price(10.0, 2.0, SEED, 0, 0, k) for k in range(10_000)])
        assert abs(draws.mean() - 10.0) <= 0.1
        assert abs(draws.std(ddof=1) - 2.0) <= 0.1

    @pytest.mark.parametrize("a,b,c", [(1.0, 2.0, 3.0), (0.25, 9.0, 4.5), (0.0, 0.0, 7.0)])
    def test_filter_arithmetic(self, a, b, c):
        assert DEFAULT_FILTER_K == (0.837, 0.0, 0.142)
        assert predict_sigma(a, b, c) == 0.837 * a + 0.142 * c


class TestNonuniformConsistency:
    def test_single_last_class_matches_uniform(self, corpus):
        for scenario in corpus:
            if scenario.deadline_mode is DeadlineMode.NONUNIFORM:
                continue
            D = scenario.horizon
            uniform = solve_offline(scenario.cloud, scenario.prices, scenario.work, aggregate=True)
            classed = solve_offline(scenario.cloud, scenario.prices, scenario.work.all_in_class(D),
                                    DeadlineMode.NONUNIFORM, aggregate=True)
            assert abs(uniform.objective - classed.objective) <= 1e-6 * max(1.0, abs(uniform.objective)), \
                scenario.name


class TestDeterminism:
    @pytest.mark.parametrize("name", ["diurnal-d2", "flat-noisy-history", "two-regime-classes"])
    def test_reports_are_byte_identical(self, corpus, name):
        scenario = next(s for s in corpus if s.name == name)
        for alg in ALL:
            assert report_json(run(scenario.config(alg))) == report_json(run(scenario.config(alg)))

    def test_parallel_sweep_is_byte_identical(self, corpus):
        scenario = next(s for s in corpus if s.name == "diurnal-d4")
        serial = sweep_frame(sweep(scenario.config(Algorithm.A_EPS), [0, 2, 4], ["A_eps", "A_eps_m"]))
        parallel = sweep_frame(sweep(scenario.config(Algorithm.A_EPS), [0, 2, 4], ["A_eps", "A_eps_m"], workers=3))
        assert serial.to_csv(index=False) == parallel.to_csv(index=False)
