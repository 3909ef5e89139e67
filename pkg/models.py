"""
SQLAlchemy table definitions for the per-output-directory run ledger.
"""
from enum import Enum

from sqlalchemy import JSON, Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy.orm import declarative_base
from sqlalchemy.sql import func

Base = declarative_base()


class RunStatusEnum(str, Enum):
    """Enum for run and point status values"""
    RUNNING = "running"
    OK = "ok"
    FAILED = "failed"
    PARTIAL = "partial"
    OVER_BARRIER = "over_barrier"


class Run(Base):
    """One CLI command invocation"""
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, autoincrement=True, nullable=False)
    command = Column(String, nullable=False, index=True)
    config_hash = Column(String(16), nullable=False, index=True)
    config_json = Column(JSON, nullable=False)
    status = Column(String, nullable=False, default=RunStatusEnum.RUNNING.value)
    message = Column(Text, nullable=True)
    started = Column(DateTime, default=func.now(), nullable=False)
    finished = Column(DateTime, nullable=True)


class RatePoint(Base):
    """Rate extraction result (or failure) for one (alpha, F0) job"""
    __tablename__ = "rate_points"

    id = Column(Integer, primary_key=True, autoincrement=True, nullable=False)
    run_id = Column(Integer, ForeignKey('runs.id', ondelete='CASCADE'), nullable=False, index=True)
    alpha = Column(Float, nullable=False)
    F0 = Column(Float, nullable=False)
    Ip = Column(Float, nullable=True)
    gamma = Column(Float, nullable=True)
    t1 = Column(Float, nullable=True)
    t2 = Column(Float, nullable=True)
    r_squared = Column(Float, nullable=True)
    T_total = Column(Float, nullable=True)
    status = Column(String, nullable=False)
    message = Column(Text, nullable=True)
    created = Column(DateTime, default=func.now(), nullable=False)


class Calibration(Base):
    """Protocol B softening-parameter calibration for one alpha"""
    __tablename__ = "calibrations"

    id = Column(Integer, primary_key=True, autoincrement=True, nullable=False)
    run_id = Column(Integer, ForeignKey('runs.id', ondelete='CASCADE'), nullable=False, index=True)
    alpha = Column(Float, nullable=False)
    Z = Column(Float, nullable=False)
    Ip_target = Column(Float, nullable=False)
    a_star = Column(Float, nullable=True)
    achieved_Ip = Column(Float, nullable=True)
    iterations = Column(Integer, nullable=True)
    status = Column(String, nullable=False)
    message = Column(Text, nullable=True)
    created = Column(DateTime, default=func.now(), nullable=False)


class SchemaVersion(Base):
    """Ledger schema version"""
    __tablename__ = "schema_version"

    id = Column(Integer, primary_key=True, autoincrement=True, nullable=False)
    version = Column(Integer, nullable=False, unique=True)
    description = Column(String, nullable=True)
    applied_at = Column(DateTime, default=func.now(), nullable=False)


CURRENT_SCHEMA_VERSION = 1
