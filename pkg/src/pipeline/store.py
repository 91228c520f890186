"""SQLAlchemy run store: one row per run, one row per checked property."""

import logging
from datetime import datetime

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine
from sqlalchemy.orm import DeclarativeBase, Session, relationship, sessionmaker

from src.config.settings import settings
from src.schemas.report import Report

logger = logging.getLogger(__name__)


class Base(DeclarativeBase):
    pass


class Run(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, autoincrement=True)
    created_at = Column(DateTime, default=datetime.utcnow)
    design = Column(String(200), nullable=False)
    program = Column(Text, nullable=True)
    mode = Column(String(20), nullable=False)  # none | legal | used | jumps | stack | full
    covered = Column(Integer, default=0)
    uncoverable = Column(Integer, default=0)
    unknown = Column(Integer, default=0)
    sat_queries = Column(Integer, default=0)
    total_ms = Column(Float, default=0.0)
    incomplete = Column(Boolean, default=False)

    records = relationship("PropertyRow", back_populates="run", cascade="all, delete-orphan")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "created_at": self.created_at.isoformat() if self.created_at else None,
            "design": self.design,
            "program": self.program,
            "mode": self.mode,
            "covered": self.covered,
            "uncoverable": self.uncoverable,
            "unknown": self.unknown,
            "sat_queries": self.sat_queries,
            "total_ms": self.total_ms,
            "incomplete": self.incomplete,
        }


class PropertyRow(Base):
    __tablename__ = "properties"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(Integer, ForeignKey("runs.id"), nullable=False)
    name = Column(String(100), nullable=False)
    source = Column(String(200))
    sink = Column(String(200))
    mode = Column(String(20))
    verdict = Column(String(20))  # covered | uncoverable | unknown
    method = Column(String(20))
    bound = Column(Integer, default=0)
    wall_ms = Column(Float, default=0.0)
    witness_file = Column(Text, nullable=True)

    run = relationship("Run", back_populates="records")


_engine = None
_SessionLocal = None


def get_engine():
    global _engine
    if _engine is None:
        _engine = create_engine(f"sqlite:///{settings.sqlite_db_path}", echo=False)
        Base.metadata.create_all(_engine)
    return _engine


def get_session() -> Session:
    global _SessionLocal
    if _SessionLocal is None:
        _SessionLocal = sessionmaker(bind=get_engine())
    return _SessionLocal()


def reset_store() -> None:
    """Forget the engine so the next access honours a changed sqlite_db_path."""
    global _engine, _SessionLocal
    if _engine is not None:
        _engine.dispose()
    _engine = None
    _SessionLocal = None


def persist_report(report: Report) -> int:
    session = get_session()
    try:
        s = report.summary
        run = Run(
            design=report.design,
            program=report.program,
            mode=report.mode.value,
            covered=s.covered,
            uncoverable=s.uncoverable,
            unknown=s.unknown,
            sat_queries=s.sat_queries,
            total_ms=s.total_ms,
            incomplete=report.incomplete,
        )
        for rec in report.records:
            run.records.append(
                PropertyRow(
                    name=rec.name,
                    source=rec.source,
                    sink=rec.sink,
                    mode=rec.mode.value,
                    verdict=rec.verdict,
                    method=rec.method,
                    bound=rec.bound,
                    wall_ms=rec.wall_ms,
                    witness_file=rec.witness_file,
                )
            )
        session.add(run)
        session.commit()
        logger.info("Stored run %d (%s, %d properties)", run.id, report.mode.value, len(report.records))
        return run.id
    finally:
        session.close()


def list_runs(limit: int = 20) -> list[dict]:
    session = get_session()
    try:
        rows = session.query(Run).order_by(Run.id.desc()).limit(limit).all()
        return [r.to_dict() for r in rows]
    finally:
        session.close()


def run_records(run_id: int) -> list[dict]:
    session = get_session()
    try:
        rows = session.query(PropertyRow).filter(PropertyRow.run_id == run_id).order_by(PropertyRow.id).all()
        return [
            {"name": r.name, "source": r.source, "sink": r.sink, "mode": r.mode, "verdict": r.verdict,
             "method": r.method, "bound": r.bound, "wall_ms": r.wall_ms, "witness_file": r.witness_file}
            for r in rows
        ]
    finally:
        session.close()
