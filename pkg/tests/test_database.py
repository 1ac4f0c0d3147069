from __future__ import annotations

import json

import pytest

from database import Database
from src.simulator import Algorithm, RunConfig, run


@pytest.fixture
def db(tmp_path):
    database = Database(str(tmp_path / "nested" / "runs.db"))
    yield database
    database.close()


@pytest.fixture
def report(two_dc_cloud, two_dc_prices, two_dc_work, oracle_model):
    return run(RunConfig(Algorithm.A_EPS, two_dc_cloud, two_dc_prices, two_dc_work, oracle_model, label="toy"))


class TestDatabase:
    def test_save_and_load(self, db, report):
        run_id = db.save_run(report)
        record = db.get_run(run_id)
        assert record.label == "toy"
        assert record.algorithm == "A_eps"
        assert record.horizon == 2
        assert record.seed == report.prediction.rng_seed
        assert record.total_cost == pytest.approx(report.total_cost)
        assert json.loads(record.report_json)["totals"]["total"] == pytest.approx(report.total_cost)
        assert record.ledger_csv.startswith("slot,datacenter,energy,migration")

    def test_label_and_seed_override(self, db, report):
        record = db.get_run(db.save_run(report, seed=99, label="renamed"))
        assert (record.label, record.seed) == ("renamed", 99)

    def test_newest_first(self, db, report):
        first = db.save_run(report)
        second = db.save_run(report)
        assert [r.id for r in db.get_all_runs()] == [second, first]

    def test_delete(self, db, report):
        run_id = db.save_run(report)
        assert db.delete_run(run_id)
        assert db.get_run(run_id) is None
        assert not db.delete_run(run_id)
