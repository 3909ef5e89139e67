"""
Run ledger: an SQLite database per output directory recording every command,
its config and the outcome of each field point and calibration.
"""
import logging
from datetime import datetime
from pathlib import Path

from sqlalchemy import create_engine, event, inspect, text
from sqlalchemy.orm import Session, sessionmaker

# Re-export models so they can be imported from database module
from models import CURRENT_SCHEMA_VERSION, Base, Calibration, RatePoint, Run, RunStatusEnum, SchemaVersion

logger = logging.getLogger(__name__)

LEDGER_FILE_NAME = "ledger.db"

_session_factories: dict[Path, sessionmaker] = {}

__all__ = [
    "Base",
    "Calibration",
    "RatePoint",
    "Run",
    "RunStatusEnum",
    "SchemaVersion",
    "init_db",
    "start_run",
    "finish_run",
    "record_rate_point",
    "record_calibration",
    "get_runs",
    "get_rate_points",
]


def _set_sqlite_pragma(dbapi_conn, connection_record):
    cursor = dbapi_conn.cursor()
    cursor.execute("PRAGMA foreign_keys=ON")
    cursor.execute("PRAGMA journal_mode=WAL")
    cursor.close()


def get_schema_version(engine):
    """Get current ledger schema version"""
    if "schema_version" not in inspect(engine).get_table_names():
        return None
    with engine.connect() as conn:
        row = conn.execute(text("SELECT MAX(version) FROM schema_version")).fetchone()
        return row[0] if row and row[0] is not None else None


def init_db(path: Path | str) -> sessionmaker:
    """Create the ledger tables at path (if needed) and return a session factory"""
    path = Path(path).absolute()
    if path in _session_factories:
        return _session_factories[path]

    path.parent.mkdir(parents=True, exist_ok=True)
    engine = create_engine(f"sqlite:///{path}", echo=False, connect_args={"timeout": 15})
    event.listen(engine, "connect", _set_sqlite_pragma)
    Base.metadata.create_all(bind=engine)

    version = get_schema_version(engine)
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    if version is None:
        with SessionLocal() as db:
            db.add(SchemaVersion(version=CURRENT_SCHEMA_VERSION, description="Initial ledger schema"))
            db.commit()
        logger.debug(f"Ledger initialized at {path} with schema version {CURRENT_SCHEMA_VERSION}")
    elif version > CURRENT_SCHEMA_VERSION:
        logger.warning(f"Ledger {path} has schema version {version}, newer than {CURRENT_SCHEMA_VERSION}")

    _session_factories[path] = SessionLocal
    return SessionLocal


def start_run(SessionLocal: sessionmaker, command: str, config_hash: str, config_json: dict) -> int:
    with SessionLocal() as db:
        run = Run(command=command, config_hash=config_hash, config_json=config_json)
        db.add(run)
        db.commit()
        return run.id


def finish_run(SessionLocal: sessionmaker, run_id: int, status: RunStatusEnum, message: str | None = None):
    with SessionLocal() as db:
        run = db.get(Run, run_id)
        if run is None:
            logger.error(f"Ledger run {run_id} not found")
            return
        run.status = RunStatusEnum(status).value
        run.message = message
        run.finished = datetime.now()
        db.commit()


def record_rate_point(SessionLocal: sessionmaker, run_id: int, **values):
    with SessionLocal() as db:
        db.add(RatePoint(run_id=run_id, **values))
        db.commit()


def record_calibration(SessionLocal: sessionmaker, run_id: int, **values):
    with SessionLocal() as db:
        db.add(Calibration(run_id=run_id, **values))
        db.commit()


def get_runs(db: Session, config_hash: str | None = None) -> list[Run]:
    query = db.query(Run)
    if config_hash is not None:
        query = query.filter(Run.config_hash == config_hash)
    return query.order_by(Run.id).all()


def get_rate_points(db: Session, run_id: int | None = None) -> list[RatePoint]:
    query = db.query(RatePoint)
    if run_id is not None:
        query = query.filter(RatePoint.run_id == run_id)
    return query.order_by(RatePoint.id).all()
