"""
Results-store engine and session helpers using SQLAlchemy.
"""

import logging
import os
from typing import Optional

from sqlalchemy import Engine, create_engine, text
from sqlalchemy.orm import DeclarativeBase, MappedAsDataclass, Session, sessionmaker

logger = logging.getLogger(__name__)


class Base(DeclarativeBase, MappedAsDataclass):
    pass


def build_database_url(sqlite_path: Optional[str] = None, url: Optional[str] = None) -> str:
    """
    Build a SQLAlchemy database URL.

    An explicit *url* wins; otherwise a SQLite file at *sqlite_path*
    (default ``HCS_SQLITE_PATH`` or ``./results.db``). Does NOT create
    directories; ``make_engine()`` does that.

    Args:
        sqlite_path: Path to the SQLite file.
        url: Any SQLAlchemy URL, e.g. ``sqlite://`` for an in-memory store.

    Returns:
        str: A SQLAlchemy-compatible database URL.
    """
    if url:
        return url
    path = os.path.abspath(sqlite_path or os.getenv('HCS_SQLITE_PATH', './results.db'))
    return f'sqlite:///{path}'


def make_engine(database_url: str) -> Engine:
    if database_url.startswith('sqlite:///'):
        data_dir = os.path.dirname(database_url[len('sqlite:///'):])
        if data_dir:
            os.makedirs(data_dir, exist_ok=True)
    return create_engine(database_url)


def make_session(engine: Engine) -> Session:
    return sessionmaker(bind=engine, expire_on_commit=False)()


def init_database(engine: Engine) -> None:
    """
    Create all tables that do not exist yet.

    Args:
        engine: Engine bound to the results store.
    """
    # Registers the ORM tables on Base.metadata.
    from HierarchicalCutSelector import models  # pylint: disable=import-outside-toplevel,unused-import

    Base.metadata.create_all(engine)
    logger.info("Results store ready: %s", engine.url)


def reset_database(engine: Engine) -> None:
    """
    Drop all tables and recreate them.

    WARNING: This deletes all stored results.
    """
    from HierarchicalCutSelector import models  # pylint: disable=import-outside-toplevel,unused-import

    logger.warning("Dropping all result tables")
    Base.metadata.drop_all(engine)
    init_database(engine)


def check_health(session: Session) -> bool:
    """
    Execute a lightweight query to verify database connectivity.

    Returns:
        bool: ``True`` if the database responds, ``False`` otherwise.
    """
    try:
        session.execute(text('SELECT 1'))
        return True
    except Exception:  # pylint: disable=broad-except
        return False
