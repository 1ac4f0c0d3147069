from __future__ import annotations

import numpy as np
import pytest

from modules.cluster_view import build_cluster_figure
from modules.cost_charts import build_cost_figure, build_load_figure, build_sweep_figure
from modules.migration_graph import build_migration_graph
from src.job_classifier import JobRecord, classify_jobs
from src.simulator import Algorithm, RunConfig, run, sweep


@pytest.fixture
def config(two_dc_cloud, two_dc_prices, two_dc_work, oracle_model):
    return RunConfig(Algorithm.A_EPS_M, two_dc_cloud, two_dc_prices, two_dc_work, oracle_model)


def test_cost_figure_has_a_line_per_run(config):
    reports = [run(config), run(config.with_algorithm("greedy"))]
    fig = build_cost_figure(reports)
    assert len(fig.data) == 2
    assert list(fig.data[1].y) == pytest.approx(reports[1].ledger.per_slot().tolist())


def test_load_figure_stacks_datacenters(config):
    fig = build_load_figure(run(config))
    assert [trace.name for trace in fig.data] == ["east", "west"]


def test_sweep_figure(config):
    table = sweep(config, [0, 1, 2], ["offline", "A"])
    fig = build_sweep_figure(table, "total")
    assert [trace.name for trace in fig.data] == ["offline", "A"]
    assert list(fig.data[0].x) == [0, 1, 2]
    with pytest.raises(ValueError):
        build_sweep_figure(table, "median")


def test_migration_graph_edges_follow_moved_volume(config):
    report = run(config)
    dot = build_migration_graph(report)
    moved = report.migration_matrix.copy()
    np.fill_diagonal(moved, 0.0)
    assert dot.source.count("->") == int((moved > 1e-9).sum())
    assert "dc_0" in dot.source and "dc_1" in dot.source


def test_cluster_figure():
    jobs = [JobRecord(0.0, 1.0, bytes=b) for b in (1e2, 1e2, 1e8)]
    table, _ = classify_jobs(jobs, k=2)
    fig = build_cluster_figure(table)
    assert list(fig.data[0].y) == [2, 1]
    assert list(fig.data[0].text) == ["D=1", "D=2"]
