"""Canonical byte encoding primitives.

One encoding rule for everything that gets hashed or MACed: a single line of
JSON with keys in byte-lexicographic order, no insignificant whitespace,
UTF-8, terminated by one LF. Two value-equal structures always encode to
identical bytes, which is what makes payload hashing and MAC verification
well-defined.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from typing import Any

from .errors import MalformedEncoding

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def dumps(value: Any) -> bytes:
    """Encode *value* (plain dict/list/scalar structure) canonically.

    Key order inside dicts is sorted; Python's str ordering is code-point
    order, which coincides with byte order of the UTF-8 encoding.
    """
    text = json.dumps(value, ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return text.encode("utf-8") + b"\n"


def loads(data: bytes) -> Any:
    """Decode canonical bytes into a plain structure.

    Raises MalformedEncoding on anything that is not valid UTF-8 JSON.
    Canonical-form strictness is the caller's job (re-encode and compare).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedEncoding(f"not valid UTF-8: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedEncoding(f"not valid JSON: {exc}") from exc


def format_timestamp(dt: datetime) -> str:
    """Render a UTC timestamp at whole-second precision."""
    return truncate_to_second(dt).strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text: str) -> datetime:
    """Parse a canonical timestamp; rejects any non-canonical spelling."""
    try:
        dt = datetime.strptime(text, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    except ValueError as exc:
        raise MalformedEncoding(f"bad timestamp {text!r}") from exc
    # strptime tolerates some spellings (unpadded fields); round-trip to close that.
    if format_timestamp(dt) != text:
        raise MalformedEncoding(f"non-canonical timestamp {text!r}")
    return dt


def truncate_to_second(dt: datetime) -> datetime:
    """Force UTC and drop sub-second precision.

    Naive datetimes are taken to be UTC already; aware ones are converted.
    """
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    else:
        dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=0)


def utc_now() -> datetime:
    """Current UTC time at whole-second precision."""
    return truncate_to_second(datetime.now(timezone.utc))
