"""Snapshot data model and its canonical, byte-deterministic serialization.

Everything here is immutable after construction and safe to share between
threads. Constructors normalize ordering (sorted items, sorted file tree) and
reject invalid data outright; the canonical encoding is therefore a pure
function of a snapshot's value, independent of how it was assembled.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Any, Union

from . import canon
from .errors import MalformedEncoding, NonCanonicalForm, SchemaVersionUnsupported

SCHEMA_VERSION = 1
SNAPSHOT_FILE_EXTENSION = ".fps"

OS_FAMILIES = ("linux", "windows")
FILE_KINDS = ("file", "dir", "symlink", "other")

# content_hash markers for entries that carry no hashable content
UNREADABLE = "unreadable"
VOLATILE = "volatile"

HEX64_RE = re.compile(r"^[0-9a-f]{64}$")
MODE_RE = re.compile(r"^[0-7]{4}$")

Scalar = Union[str, int, bool]


class Category(str, Enum):
    """The 16 inventory categories plus the synthetic file-integrity one.

    String values are stable across releases; they appear verbatim in
    snapshot files, policy files, and drift reports.
    """

    INSTALLED_SOFTWARE = "installed_software"
    REGISTRY_KEYS = "registry_keys"
    HARDWARE = "hardware"
    NETWORK_CONFIG = "network_config"
    HOST_DETAILS = "host_details"
    KERNEL_FIRMWARE = "kernel_firmware"
    MOUNTED_DEVICES = "mounted_devices"
    OPEN_PORTS = "open_ports"
    USERS_GROUPS = "users_groups"
    SCHEDULED_TASKS = "scheduled_tasks"
    CONTAINERS = "containers"
    EXTENSIONS = "extensions"
    SECURE_BOOT = "secure_boot"
    TIME_ZONE = "time_zone"
    NTP_STATUS = "ntp_status"
    ENVIRONMENT_VARIABLES = "environment_variables"
    FILE_INTEGRITY = "file_integrity"


INVENTORY_CATEGORIES = tuple(c for c in Category if c is not Category.FILE_INTEGRITY)


def _check_scalar(key: str, value: Any) -> None:
    # bool is a subclass of int; test it first so True stays a bool
    if isinstance(value, bool) or isinstance(value, (str, int)):
        return
    raise ValueError(f"attr {key!r} has non-scalar value {value!r}")


@dataclass(frozen=True)
class Item:
    """One inventory entry: a category-specific key plus flat attributes."""

    key: str
    attrs: dict[str, Scalar] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.key, str) or not self.key:
            raise ValueError("item key must be a non-empty string")
        for k, v in self.attrs.items():
            if not isinstance(k, str) or not k:
                raise ValueError("attr names must be non-empty strings")
            _check_scalar(k, v)
        # store attrs sorted so construction order never shows through
        object.__setattr__(self, "attrs", dict(sorted(self.attrs.items())))


@dataclass(frozen=True)
class CategoryRecord:
    """All items collected for one category, plus collection metadata.

    ``note`` is an in-band annotation for states worth keeping alongside the
    data, e.g. "not applicable on linux" for platform-inapplicable
    categories; it never affects drift comparison.
    """

    category: Category
    items: tuple[Item, ...]
    collector_version: str
    collected_at: datetime
    note: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.category, Category):
            raise ValueError(f"bad category {self.category!r}")
        items = tuple(sorted(self.items, key=lambda i: i.key))
        keys = [i.key for i in items]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate item keys in {self.category.value}: {dupes}")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "collected_at", canon.truncate_to_second(self.collected_at))
        if not isinstance(self.collector_version, str) or not self.collector_version:
            raise ValueError("collector_version must be a non-empty string")
        if not isinstance(self.note, str):
            raise ValueError("note must be a string")


@dataclass(frozen=True)
class FileRecord:
    """Per-file identity: content hash plus the attribute quadruple."""

    path: str
    content_hash: str
    size: int
    mode: str
    owner: str
    group: str
    kind: str

    def __post_init__(self) -> None:
        if not isinstance(self.path, str) or not self.path:
            raise ValueError("path must be a non-empty string")
        if self.kind not in FILE_KINDS:
            raise ValueError(f"bad kind {self.kind!r} for {self.path}")
        if isinstance(self.size, bool) or not isinstance(self.size, int) or self.size < 0:
            raise ValueError(f"size must be a non-negative integer, got {self.size!r}")
        if not MODE_RE.match(self.mode):
            raise ValueError(f"mode must be 4 octal digits, got {self.mode!r}")
        if not isinstance(self.owner, str) or not isinstance(self.group, str):
            raise ValueError("owner and group must be strings")
        self._check_hash()

    def _check_hash(self) -> None:
        h = self.content_hash
        if self.kind == "file":
            if not (HEX64_RE.match(h) or h in (UNREADABLE, VOLATILE)):
                raise ValueError(f"bad content_hash for file {self.path}: {h!r}")
        elif self.kind == "symlink":
            if not (HEX64_RE.match(h) or h == UNREADABLE):
                raise ValueError(f"bad content_hash for symlink {self.path}: {h!r}")
        else:
            # directories and special files carry no content
            if h != "":
                raise ValueError(f"{self.kind} {self.path} must have empty content_hash")


@dataclass(frozen=True)
class Snapshot:
    """The full fingerprint of one host at one instant."""

    schema_version: int
    host_id: str
    os_family: str
    captured_at: datetime
    categories: dict[Category, CategoryRecord]
    file_tree: tuple[FileRecord, ...]
    tree_root_digest: str

    def __post_init__(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version!r}")
        if not isinstance(self.host_id, str) or not self.host_id:
            raise ValueError("host_id must be a non-empty string")
        if self.os_family not in OS_FAMILIES:
            raise ValueError(f"bad os_family {self.os_family!r}")
        object.__setattr__(self, "captured_at", canon.truncate_to_second(self.captured_at))
        for cat, record in self.categories.items():
            if not isinstance(cat, Category):
                raise ValueError(f"bad category key {cat!r}")
            if record.category is not cat:
                raise ValueError(f"record filed under {cat.value} is for {record.category.value}")
        if Category.FILE_INTEGRITY in self.categories:
            raise ValueError("file_integrity lives in file_tree, not categories")
        tree = tuple(sorted(self.file_tree, key=lambda r: r.path))
        paths = [r.path for r in tree]
        if len(set(paths)) != len(paths):
            dupes = sorted({p for p in paths if paths.count(p) > 1})
            raise ValueError(f"duplicate file_tree paths: {dupes}")
        object.__setattr__(self, "file_tree", tree)
        object.__setattr__(self, "categories", dict(sorted(self.categories.items(), key=lambda kv: kv[0].value)))
        if not HEX64_RE.match(self.tree_root_digest):
            raise ValueError(f"tree_root_digest must be 64 lowercase hex chars")

    def with_file_tree(self, records: tuple[FileRecord, ...], digest: str) -> "Snapshot":
        """A copy of this snapshot with the file-integrity tree filled in."""
        return replace(self, file_tree=records, tree_root_digest=digest)


# --- canonical encoding ---------------------------------------------------


def _item_to_obj(item: Item) -> dict:
    return {"attrs": dict(item.attrs), "key": item.key}


def _record_to_obj(record: CategoryRecord) -> dict:
    return {
        "collected_at": canon.format_timestamp(record.collected_at),
        "collector_version": record.collector_version,
        "items": [_item_to_obj(i) for i in record.items],
        "note": record.note,
    }


def _file_to_obj(rec: FileRecord) -> dict:
    return {
        "content_hash": rec.content_hash,
        "group": rec.group,
        "kind": rec.kind,
        "mode": rec.mode,
        "owner": rec.owner,
        "path": rec.path,
        "size": rec.size,
    }


def canonical_serialize(snapshot: Snapshot) -> bytes:
    """Deterministic byte encoding of a snapshot (the `.fps` payload)."""
    obj = {
        "captured_at": canon.format_timestamp(snapshot.captured_at),
        "categories": {c.value: _record_to_obj(r) for c, r in snapshot.categories.items()},
        "file_tree": [_file_to_obj(r) for r in snapshot.file_tree],
        "host_id": snapshot.host_id,
        "os_family": snapshot.os_family,
        "schema_version": snapshot.schema_version,
        "tree_root_digest": snapshot.tree_root_digest,
    }
    return canon.dumps(obj)


def _expect_dict(obj: Any, what: str, keys: set[str]) -> dict:
    if not isinstance(obj, dict):
        raise MalformedEncoding(f"{what} must be an object")
    if set(obj.keys()) != keys:
        raise MalformedEncoding(
            f"{what} must have exactly keys {sorted(keys)}, got {sorted(obj.keys())}"
        )
    return obj


def _expect_str(obj: Any, what: str) -> str:
    if not isinstance(obj, str):
        raise MalformedEncoding(f"{what} must be a string")
    return obj


def _item_from_obj(obj: Any) -> Item:
    d = _expect_dict(obj, "item", {"attrs", "key"})
    if not isinstance(d["attrs"], dict):
        raise MalformedEncoding("item attrs must be an object")
    return Item(key=_expect_str(d["key"], "item key"), attrs=d["attrs"])


def _record_from_obj(cat: Category, obj: Any) -> CategoryRecord:
    d = _expect_dict(obj, f"category record {cat.value}", {"collected_at", "collector_version", "items", "note"})
    if not isinstance(d["items"], list):
        raise MalformedEncoding("items must be an array")
    return CategoryRecord(
        category=cat,
        items=tuple(_item_from_obj(i) for i in d["items"]),
        collector_version=_expect_str(d["collector_version"], "collector_version"),
        collected_at=canon.parse_timestamp(_expect_str(d["collected_at"], "collected_at")),
        note=_expect_str(d["note"], "note"),
    )


def _file_from_obj(obj: Any) -> FileRecord:
    d = _expect_dict(obj, "file record", {"content_hash", "group", "kind", "mode", "owner", "path", "size"})
    size = d["size"]
    if isinstance(size, bool) or not isinstance(size, int):
        raise MalformedEncoding("file size must be an integer")
    return FileRecord(
        path=_expect_str(d["path"], "path"),
        content_hash=_expect_str(d["content_hash"], "content_hash"),
        size=size,
        mode=_expect_str(d["mode"], "mode"),
        owner=_expect_str(d["owner"], "owner"),
        group=_expect_str(d["group"], "group"),
        kind=_expect_str(d["kind"], "kind"),
    )


def canonical_deserialize(data: bytes, *, check_digest: bool = True) -> Snapshot:
    """Parse canonical snapshot bytes, enforcing strict canonical form.

    The input is accepted only if re-serializing the parsed value yields the
    exact input bytes; anything else is rejected as non-canonical. When
    ``check_digest`` is set (the default), the merkle tree digest is also
    recomputed from the file tree and compared.
    """
    obj = canon.loads(data)
    if not isinstance(obj, dict):
        raise MalformedEncoding("snapshot must be a JSON object")
    version = obj.get("schema_version")
    if isinstance(version, bool) or not isinstance(version, int):
        raise MalformedEncoding("schema_version must be an integer")
    if version != SCHEMA_VERSION:
        raise SchemaVersionUnsupported(f"schema_version {version} not supported (expected {SCHEMA_VERSION})")

    d = _expect_dict(
        obj,
        "snapshot",
        {"captured_at", "categories", "file_tree", "host_id", "os_family", "schema_version", "tree_root_digest"},
    )
    if not isinstance(d["categories"], dict):
        raise MalformedEncoding("categories must be an object")
    if not isinstance(d["file_tree"], list):
        raise MalformedEncoding("file_tree must be an array")

    categories: dict[Category, CategoryRecord] = {}
    for name, rec_obj in d["categories"].items():
        try:
            cat = Category(name)
        except ValueError as exc:
            raise MalformedEncoding(f"unknown category {name!r}") from exc
        categories[cat] = _record_from_obj(cat, rec_obj)

    try:
        snapshot = Snapshot(
            schema_version=version,
            host_id=_expect_str(d["host_id"], "host_id"),
            os_family=_expect_str(d["os_family"], "os_family"),
            captured_at=canon.parse_timestamp(_expect_str(d["captured_at"], "captured_at")),
            categories=categories,
            file_tree=tuple(_file_from_obj(f) for f in d["file_tree"]),
            tree_root_digest=_expect_str(d["tree_root_digest"], "tree_root_digest"),
        )
    except ValueError as exc:
        raise MalformedEncoding(str(exc)) from exc

    if canonical_serialize(snapshot) != data:
        raise NonCanonicalForm(
            "bytes are not the canonical encoding of the data they carry"
        )

    if check_digest:
        from . import integrity  # deferred: integrity imports this module

        recomputed = integrity.tree_root_digest(snapshot.file_tree)
        if recomputed != snapshot.tree_root_digest:
            raise MalformedEncoding(
                f"tree_root_digest {snapshot.tree_root_digest} does not match "
                f"file_tree (recomputed {recomputed})"
            )
    return snapshot
