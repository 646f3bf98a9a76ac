"""Exception hierarchy shared across the toolkit.

Every error kind named in a module contract has a dedicated class so callers
(and the CLI exit-code mapping) can branch on type instead of message text.
"""

from __future__ import annotations


class FpkitError(Exception):
    """Base class for all toolkit errors."""


# --- canonical encoding (model) ---

class MalformedEncoding(FpkitError):
    """Bytes are not a valid snapshot encoding, or encode invalid data."""


class NonCanonicalForm(FpkitError):
    """Valid data in a non-canonical byte form; possible tampering or
    foreign producer."""


class SchemaVersionUnsupported(FpkitError):
    """Encoded schema_version is not one this build understands."""


# --- collectors ---

class ProbeUnavailable(FpkitError):
    """The source cannot produce the requested probe output."""

    def __init__(self, probe_id: str, reason: str):
        super().__init__(f"probe {probe_id!r} unavailable: {reason}")
        self.probe_id = probe_id
        self.reason = reason


class ParseFailure(FpkitError):
    """A probe payload could not be parsed; carries the byte offset."""

    def __init__(self, probe_id: str, offset: int, message: str):
        super().__init__(f"probe {probe_id!r} parse failure at byte {offset}: {message}")
        self.probe_id = probe_id
        self.offset = offset


# --- policy ---

class PolicyError(FpkitError):
    """Policy file rejected; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


# --- store ---

class StoreError(FpkitError):
    """Base class for envelope/chain failures."""


class WeakKeyError(StoreError):
    """Sealing key shorter than the 16-byte minimum."""


class EnvelopeFormatError(StoreError):
    """Envelope file bytes do not parse as header + payload."""


class HashMismatch(StoreError):
    """Payload bytes do not hash to the recorded payload_hash."""


class MacMismatch(StoreError):
    """MAC does not verify: forged envelope or wrong key."""


class ChainBreak(StoreError):
    """Envelope does not link to the expected predecessor."""


class PrevVerificationFailure(StoreError):
    """Refusing to extend a chain whose tip does not verify."""


class GapInChain(StoreError):
    """History is missing one or more interior envelopes."""

    def __init__(self, missing_hashes: list[str]):
        super().__init__("gap in chain; missing payload_hash(es): " + ", ".join(missing_hashes))
        self.missing_hashes = missing_hashes


class DuplicateLink(StoreError):
    """Two envelopes claim the same predecessor (forked history)."""

    def __init__(self, prev_hash: str):
        super().__init__(f"duplicate link: two envelopes extend {prev_hash}")
        self.prev_hash = prev_hash


# --- drift ---

class HostMismatch(FpkitError):
    """Snapshots are from different hosts or OS families."""


class SchemaVersionMismatch(FpkitError):
    """Snapshots carry different schema versions."""


# --- scheduler ---

class ClockRegression(FpkitError):
    """A check result arrived with an earlier timestamp than the last one."""


# --- cli ---

class UsageError(FpkitError):
    """Bad command line or configuration; maps to exit code 1."""
