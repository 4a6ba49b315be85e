"""UTC timestamp helpers (RFC 3339 with a ``Z`` suffix)."""
from __future__ import annotations

from datetime import datetime, timezone


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def format_ts(ts: datetime) -> str:
    """Render ``ts`` as ``YYYY-MM-DDTHH:MM:SS[.ffffff]Z``."""
    ts = ts.astimezone(timezone.utc)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_ts(text: str) -> datetime:
    """Parse an RFC 3339 timestamp; naive inputs are rejected."""
    if not isinstance(text, str) or not text:
        raise ValueError(f"invalid timestamp: {text!r}")
    s = text.strip()
    if s[-1] in "zZ":
        s = s[:-1] + "+00:00"
    s = s.replace("t", "T") if "T" not in s else s
    try:
        ts = datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"invalid timestamp: {text!r}") from None
    if ts.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {text!r}")
    return ts.astimezone(timezone.utc)
