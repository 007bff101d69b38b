from __future__ import annotations

import hashlib
import logging
import sqlite3
import time
from pathlib import Path

from models import ResultSet

logger = logging.getLogger(__name__)

_DB_PATH = Path("cache.db")


def _get_conn(db_path: Path | None = None) -> sqlite3.Connection:
    conn = sqlite3.connect(str(db_path or _DB_PATH))
    conn.execute(
        """CREATE TABLE IF NOT EXISTS cache (
            key TEXT PRIMARY KEY,
            value TEXT NOT NULL,
            created_at REAL NOT NULL
        )"""
    )
    return conn


def _cache_key(*parts: str) -> str:
    raw = "|".join(parts)
    return hashlib.sha256(raw.encode()).hexdigest()


def get_cached_result(config_hash: str, db_path: Path | None = None) -> ResultSet | None:
    """Return a finished campaign for this config hash, else None.

    Campaigns are deterministic in their config, so entries never expire.
    """
    key = _cache_key("campaign", config_hash)
    try:
        conn = _get_conn(db_path)
        row = conn.execute("SELECT value FROM cache WHERE key = ?", (key,)).fetchone()
        conn.close()
        if row is None:
            return None
        result = ResultSet.model_validate_json(row[0])
        if result.config_hash != config_hash or result.partial:
            return None
        return result
    except Exception as e:
        logger.debug(f"cache read failed: {e}")
        return None


def set_cached_result(result: ResultSet, db_path: Path | None = None) -> None:
    """Store a complete campaign; partial ones are never cached."""
    if result.partial:
        return
    key = _cache_key("campaign", result.config_hash)
    try:
        conn = _get_conn(db_path)
        conn.execute(
            "INSERT OR REPLACE INTO cache (key, value, created_at) VALUES (?, ?, ?)",
            (key, result.model_dump_json(), time.time()),
        )
        conn.commit()
        conn.close()
    except Exception as e:
        logger.debug(f"cache write failed: {e}")
