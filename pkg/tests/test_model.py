from __future__ import annotations

import numpy as np
import pytest

from src.errors import AccountingError, DomainError
from src.model import (
    CloudConfig, CostLedger, DeadlineMode, PriceTrace, SchedulerState, SlotIndex, WorkloadTrace,
    clamp_slack, energy_cost, executed_load, haversine_km, migration_cost, round_for_display,
    slots_per_day, window_end,
)


class TestSlots:
    def test_slots_per_day_for_five_minute_slots(self):
        assert slots_per_day(300) == 288
        assert SlotIndex(5, 300).slots_per_day == 288

    def test_day_frame_slot_wraps(self):
        assert SlotIndex(290, 300).day_frame_slot() == 2
        assert SlotIndex(3, 300).day_frame_slot(start_slot=287) == 2

    @pytest.mark.parametrize("t, tau, T", [(-1, 300, None), (0, 0, None), (5, 300, 4)])
    def test_invalid_slot(self, t, tau, T):
        with pytest.raises(DomainError):
            SlotIndex(t, tau, T)

    def test_slot_equal_to_run_length_allowed(self):
        assert SlotIndex(4, 300, 4).t == 4

    def test_window_end_truncates_at_run_end(self):
        assert window_end(2, 3, 10) == 5
        assert window_end(8, 3, 10) == 9
        assert window_end(0, 0, 10) == 0


class TestCloudConfig:
    def test_uniform(self):
        cloud = CloudConfig.uniform(3, capacity=20.0, migration_rate=1.5, horizon=4)
        assert cloud.n == 3
        assert cloud.names == ("dc0", "dc1", "dc2")
        assert np.all(np.diag(cloud.migration_rate) == 0)
        assert cloud.migration_rate[0, 2] == 1.5

    def test_arrays_are_read_only(self):
        cloud = CloudConfig.uniform(2)
        with pytest.raises(ValueError):
            cloud.capacity[0] = 1.0

    @pytest.mark.parametrize("kwargs", [
        dict(capacity=[0.0, 1.0], alpha=[0.0, 0.0], migration_rate=np.zeros((2, 2)), horizon=1),
        dict(capacity=[1.0, 1.0], alpha=[-1.0, 0.0], migration_rate=np.zeros((2, 2)), horizon=1),
        dict(capacity=[1.0, 1.0], alpha=[0.0, 0.0], migration_rate=[[0.0, -1.0], [0.0, 0.0]], horizon=1),
        dict(capacity=[1.0, 1.0], alpha=[0.0, 0.0], migration_rate=np.zeros((3, 3)), horizon=1),
        dict(capacity=[1.0, 1.0], alpha=[0.0, 0.0], migration_rate=np.zeros((2, 2)), horizon=-1),
        dict(capacity=[1.0, 1.0], alpha=[0.0, 0.0], migration_rate=np.zeros((2, 2)), horizon=1.5),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(DomainError):
            CloudConfig(**kwargs)

    def test_diagonal_is_ignored(self):
        cloud = CloudConfig([1.0], [0.0], [[-5.0]], 0)
        assert cloud.n == 1

    def test_with_horizon_keeps_everything_else(self):
        cloud = CloudConfig.uniform(2, capacity=7.0, horizon=1)
        wider = cloud.with_horizon(5)
        assert wider.horizon == 5
        assert wider.capacity.tolist() == [7.0, 7.0]
        assert cloud.horizon == 1

    def test_from_locations_uses_great_circle_distance(self):
        sites = [{"name": "a", "lat": 0.0, "lon": 0.0}, {"name": "b", "lat": 0.0, "lon": 90.0}]
        cloud = CloudConfig.from_locations(sites, rate_per_1000km=2.0)
        quarter = np.pi * 6371.0 / 2
        assert cloud.migration_rate[0, 1] == pytest.approx(2.0 * quarter / 1000.0)
        assert cloud.migration_rate[1, 0] == pytest.approx(cloud.migration_rate[0, 1])
        assert cloud.names == ("a", "b")

    def test_haversine_zero_distance(self):
        assert haversine_km(40.0, -74.0, 40.0, -74.0) == 0.0


class TestTraces:
    def test_price_trace_rejects_nan(self):
        with pytest.raises(DomainError):
            PriceTrace(np.array([[1.0, np.nan]]))

    def test_price_history_needs_matching_rows(self):
        with pytest.raises(DomainError):
            PriceTrace(np.ones((2, 3)), {1: np.ones((1, 3))})

    def test_recent_reaches_into_previous_day(self):
        prices = PriceTrace(np.array([[7.0, 8.0, 9.0]]), {1: np.array([[1.0, 2.0, 3.0, 4.0]])})
        assert prices.recent(0, 1, 4).tolist() == [3.0, 4.0, 7.0, 8.0]
        assert prices.recent(0, 2, 2).tolist() == [8.0, 9.0]

    def test_recent_without_history_returns_what_exists(self):
        prices = PriceTrace(np.array([[7.0, 8.0]]))
        assert prices.recent(0, 0, 3).tolist() == [7.0]

    def test_workload_rejects_negative(self):
        with pytest.raises(DomainError):
            WorkloadTrace(np.array([1.0, -0.5]))

    def test_class_split_must_sum_to_release(self):
        with pytest.raises(DomainError):
            WorkloadTrace(np.array([2.0]), np.array([[1.0], [0.5]]))

    def test_class_matrix_uniform_puts_everything_in_class_d(self):
        work = WorkloadTrace(np.array([2.0, 3.0]))
        classes = work.class_matrix(2, nonuniform=False)
        assert classes.tolist() == [[0.0, 0.0], [0.0, 0.0], [2.0, 3.0]]

    def test_class_matrix_tightens_loose_classes(self):
        work = WorkloadTrace.from_classes(np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0], [0.0, 4.0]]))
        classes = work.class_matrix(1, nonuniform=True)
        assert classes.tolist() == [[1.0, 0.0], [3.0, 6.0]]
        assert work.max_deadline == 3

    def test_all_in_class(self):
        work = WorkloadTrace(np.array([2.0, 3.0])).all_in_class(2)
        assert work.is_nonuniform
        assert work.released_by_deadline[2].tolist() == [2.0, 3.0]

    def test_deadline_mode_parse(self):
        assert DeadlineMode.parse("nonuniform") is DeadlineMode.NONUNIFORM
        with pytest.raises(DomainError):
            DeadlineMode.parse("strict")


class TestCostFunctions:
    def test_energy_cost_is_affine(self):
        assert energy_cost(2.0, 3.0, 4.0) == 14.0
        assert energy_cost(np.array([0.0, 1.0]), np.array([2.0, 2.0]), np.array([1.0, 1.0])).tolist() == [2.0, 3.0]

    def test_energy_cost_domain(self):
        with pytest.raises(DomainError):
            energy_cost(0.0, 1.0, -1.0)
        with pytest.raises(DomainError):
            energy_cost(0.0, -1.0, 1.0)

    def test_migration_cost(self):
        assert migration_cost(0.5, 4.0) == 2.0
        with pytest.raises(DomainError):
            migration_cost(0.5, -1.0)

    def test_clamp_slack_only_touches_noise(self):
        values = clamp_slack(np.array([-1e-13, -1.0, 2.0]))
        assert values.tolist() == [0.0, -1.0, 2.0]

    def test_round_for_display(self):
        assert round_for_display(np.array([1.2, 2.0 + 1e-12, 0.0])).tolist() == [2.0, 2.0, 0.0]


class TestSchedulerState:
    def test_shapes(self):
        state = SchedulerState(np.array([5.0, 5.0]), horizon=2, T=4)
        assert state.x.shape == (2, 3, 4)
        assert state.z.shape == (2, 2, 3, 4)
        assert state.u.shape == (2, 7)

    def test_previous_plan_adds_scheduled_migrations(self):
        state = SchedulerState(np.array([5.0, 5.0]), horizon=2, T=4)
        state.w[0, 1:3] = [2.0, 1.0]
        state.z[0, 1, 1, 0] = 0.5   # decided at 0, runs at 1
        plan = state.previous_plan(1, 3)
        assert plan[:, 0].tolist() == [1.5, 0.5]
        assert plan[:, 1].tolist() == [1.0, 0.0]

    def test_executed_load_online_rule(self):
        state = SchedulerState(np.array([5.0, 5.0]), horizon=1, T=2)
        state.w[0, 0] = 3.0
        state.z[0, 1, 0, 0] = 1.0
        assert executed_load(state, 0, 0) == 2.0
        assert executed_load(state, 1, 0) == 1.0

    def test_executed_load_plan_rule(self):
        state = SchedulerState(np.array([5.0]), horizon=1, T=3, online=False)
        state.x[0, 1, 0] = 2.0
        state.x[0, 0, 1] = 1.5
        assert executed_load(state, 0, 1) == 3.5

    def test_executed_load_over_capacity(self):
        state = SchedulerState(np.array([1.0]), horizon=0, T=1)
        state.w[0, 0] = 2.0
        with pytest.raises(AccountingError):
            executed_load(state, 0, 0)

    def test_read_unknown_tensor(self):
        state = SchedulerState(np.array([1.0]), horizon=0, T=1)
        with pytest.raises(KeyError):
            state.read("q")


class TestCostLedger:
    def test_from_tensors_bills_migration_to_source(self):
        cloud = CloudConfig([10.0, 10.0], [1.0, 0.0], [[0.0, 2.0], [3.0, 0.0]], 1)
        beta = np.array([[1.0, 2.0], [4.0, 1.0]])
        y = np.array([[2.0, 0.0], [1.0, 3.0]])
        z = np.zeros((2, 2, 2, 2))
        z[0, 1, 1, 0] = 1.5
        ledger = CostLedger.from_tensors(cloud, beta, y, z)
        assert ledger.energy.tolist() == [[3.0, 1.0], [4.0, 3.0]]
        assert ledger.migration.tolist() == [[3.0, 0.0], [0.0, 0.0]]
        assert ledger.total == pytest.approx(14.0)
        assert ledger.per_slot().tolist() == [10.0, 4.0]
        assert ledger.recompute_error(cloud, beta, y, z) == 0.0

    def test_to_dict(self):
        ledger = CostLedger(np.array([[1.0, 2.0]]), np.zeros((1, 2)))
        assert ledger.to_dict() == {"total": 3.0, "energy_total": 3.0, "migration_total": 0.0,
                                    "energy_by_datacenter": [3.0]}
