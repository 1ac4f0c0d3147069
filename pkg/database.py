from sqlalchemy import create_engine, Column, Integer, String, Text, DateTime, Float
from sqlalchemy.orm import declarative_base, sessionmaker
from datetime import datetime
import os

from config.settings import DB_PATH
from src.renderer import ledger_csv, report_json
from src.simulator import RunReport

Base = declarative_base()


class RunRecord(Base):
    __tablename__ = 'runs'
    id = Column(Integer, primary_key=True)
    label = Column(String(255))
    algorithm = Column(String(32))
    horizon = Column(Integer)
    deadline_mode = Column(String(16))
    seed = Column(Integer, nullable=True)
    total_cost = Column(Float)
    energy_cost = Column(Float)
    migration_cost = Column(Float)
    deadline_violations = Column(Integer, default=0)
    max_prediction_error = Column(Float, default=0.0)
    report_json = Column(Text)
    ledger_csv = Column(Text)
    duration_seconds = Column(Float)
    created_at = Column(DateTime, default=datetime.utcnow)


class Database:
    def __init__(self, db_path=DB_PATH):
        folder = os.path.dirname(db_path)
        if folder:
            os.makedirs(folder, exist_ok=True)
        self.engine = create_engine(f'sqlite:///{db_path}')
        Base.metadata.create_all(self.engine)
        Session = sessionmaker(bind=self.engine)
        self.session = Session()

    def save_run(self, report: RunReport, seed=None, label=None):
        record = RunRecord(
            label=label if label is not None else report.label,
            algorithm=report.algorithm.value,
            horizon=report.horizon,
            deadline_mode=report.deadline_mode.value,
            seed=seed if seed is not None else (report.prediction.rng_seed if report.prediction else None),
            total_cost=report.total_cost,
            energy_cost=report.ledger.energy_total,
            migration_cost=report.ledger.migration_total,
            deadline_violations=report.deadline_violations,
            max_prediction_error=report.max_prediction_error,
            report_json=report_json(report),
            ledger_csv=ledger_csv(report),
            duration_seconds=report.duration_seconds,
        )
        self.session.add(record)
        self.session.commit()
        return record.id

    def get_all_runs(self):
        return self.session.query(RunRecord).order_by(RunRecord.created_at.desc(), RunRecord.id.desc()).all()

    def get_run(self, run_id):
        return self.session.query(RunRecord).filter_by(id=run_id).first()

    def delete_run(self, run_id):
        record = self.get_run(run_id)
        if record:
            self.session.delete(record)
            self.session.commit()
            return True
        return False

    def close(self):
        self.session.close()
        self.engine.dispose()
