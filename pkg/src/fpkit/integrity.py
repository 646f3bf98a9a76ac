"""File hashing, merkleized directory digests, and the tree walker.

The digest construction is a merkle layering over the flat, path-sorted file
records, so two trees compare equal exactly when every included leaf's
content hash and attribute quadruple (size, mode, owner, group) are equal.
Directory attribute changes are visible to the drift engine through the
records themselves but do not enter the digest; the encoding is:

    leaf       F\\x00<path>\\x00<content_hash>\\x00<mode>\\x00<owner>\\x00<group>\\x00<size>\\n
    subdir     D\\x00<path>\\x00<child digest>\\n
    directory  SHA-256( 0x01 || its children's lines, path-sorted )
    tree root  SHA-256( 0x02 || one D line per walk root, path-sorted )
"""

from __future__ import annotations

import grp
import hashlib
import os
import pwd
import stat as statmod
from dataclasses import dataclass, field

from . import paths
from .model import UNREADABLE, VOLATILE, FileRecord

CHUNK_SIZE = 1024 * 1024

DEFAULT_LINUX_ROOTS = (
    "/",
    "/bin",
    "/boot",
    "/dev",
    "/dev/log",
    "/etc",
    "/etc/cron",
    "/etc/passwd",
    "/etc/shadow",
    "/lib",
    "/lib64",
    "/root",
    "/root/.ssh",
    "/sbin",
    "/usr/lib",
    "/usr/local/bin",
    "/usr/local/bin/docker",
    "/usr/local/bin/docker-compose",
    "/usr/local/bin/notary",
    "/usr/local/lib",
    "/usr/local/sbin",
    "/var/log",
)

# Registry hives are virtual roots owned by the registry collector, never the walker.
DEFAULT_WINDOWS_ROOTS = (
    "C:\\",
    "C:\\$Recycle.Bin",
    "C:\\AppData",
    "C:\\Documents and Settings",
    "C:\\Program Files",
    "C:\\ProgramData",
    "C:\\Recovery",
    "C:\\System32",
    "C:\\Temp",
    "C:\\Users",
    "C:\\Windows",
)

IGNORE_FILE_NAME = ".fpsignore"


@dataclass(frozen=True)
class TreeSpec:
    """What to walk: roots, ignore globs, symlink policy, depth limit."""

    roots: tuple[str, ...]
    ignore_rules: tuple[str, ...] = ()
    follow_symlinks: bool = False
    max_depth: int | None = None

    def __post_init__(self) -> None:
        for root in self.roots:
            if not paths.is_absolute(root):
                raise ValueError(f"root must be absolute: {root!r}")
        for rule in self.ignore_rules:
            if rule.startswith("!"):
                raise ValueError(f"negation patterns are not supported: {rule!r}")
        # nested/duplicate roots collapse to the outermost so every path is
        # visited exactly once
        object.__setattr__(self, "roots", paths.dedupe_roots(list(self.roots)))
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")


def default_tree_spec(os_family: str) -> TreeSpec:
    roots = DEFAULT_LINUX_ROOTS if os_family == "linux" else DEFAULT_WINDOWS_ROOTS
    return TreeSpec(roots=roots)


def load_ignore_rules(data: bytes) -> tuple[str, ...]:
    """Parse a .fpsignore file: one glob per line, # comments, blanks skipped."""
    rules = []
    for raw in data.decode("utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rules.append(line)
    return tuple(rules)


@dataclass(frozen=True)
class DirectoryDigest:
    path: str
    digest: str


@dataclass(frozen=True)
class TreeStat:
    """Metadata for one entry, as seen by a TreeSource."""

    kind: str
    size: int
    mode: str
    owner: str
    group: str
    target: str = ""  # symlink target, when kind == "symlink"
    change_token: int = 0  # opaque; changes when the entry changes under us


@dataclass(frozen=True)
class WalkResult:
    records: tuple[FileRecord, ...]
    tree_root_digest: str
    missing_roots: tuple[str, ...]


# --- digest construction ---------------------------------------------------


def leaf_line(rec: FileRecord) -> bytes:
    fields = (rec.path, rec.content_hash, rec.mode, rec.owner, rec.group, str(rec.size))
    return b"F\x00" + b"\x00".join(f.encode("utf-8") for f in fields) + b"\n"


def dir_line(path: str, digest: str) -> bytes:
    return b"D\x00" + path.encode("utf-8") + b"\x00" + digest.encode("utf-8") + b"\n"


def _check_sorted_unique(records: tuple[FileRecord, ...] | list[FileRecord]) -> None:
    for a, b in zip(records, records[1:]):
        if a.path == b.path:
            raise ValueError(f"duplicate record path {a.path!r}")
        if a.path > b.path:
            raise ValueError(f"records not sorted: {a.path!r} after {b.path!r}")


def digest_tree(records: list[FileRecord] | tuple[FileRecord, ...], root: str) -> DirectoryDigest:
    """Merkle digest of the records under one root.

    Directory nodes come from explicit dir records plus every ancestor of a
    record path up to the root; a node with no children digests to
    SHA-256(0x01).
    """
    _check_sorted_unique(records)
    root = paths.normalize(root)
    for rec in records:
        if not paths.is_within(rec.path, root):
            raise ValueError(f"record {rec.path!r} is outside root {root!r}")

    dirs: set[str] = {root}
    leaf_children: dict[str, list[FileRecord]] = {}
    for rec in records:
        if rec.kind == "dir":
            dirs.add(rec.path)
            if rec.path != root:
                dirs.update(paths.ancestors_within(rec.path, root))
            continue
        parent = root if rec.path == root else paths.parent_of(rec.path)
        leaf_children.setdefault(parent, []).append(rec)
        if rec.path != root:
            dirs.update(paths.ancestors_within(rec.path, root))

    subdir_children: dict[str, list[str]] = {}
    for d in dirs:
        if d != root:
            subdir_children.setdefault(paths.parent_of(d), []).append(d)

    def node_digest(d: str) -> str:
        entries: list[tuple[str, bytes]] = []
        for rec in leaf_children.get(d, ()):
            entries.append((rec.path, leaf_line(rec)))
        for sub in subdir_children.get(d, ()):
            entries.append((sub, dir_line(sub, node_digest(sub))))
        entries.sort(key=lambda e: e[0])
        h = hashlib.sha256(b"\x01")
        for _, line in entries:
            h.update(line)
        return h.hexdigest()

    return DirectoryDigest(path=root, digest=node_digest(root))


def derive_roots(records: list[FileRecord] | tuple[FileRecord, ...]) -> list[str]:
    """Walk roots implied by a record set: paths with no recorded ancestor."""
    all_paths = {r.path for r in records}
    roots = []
    for p in sorted(all_paths):
        if not any(a in all_paths for a in paths.ancestors_within(p, _top_of(p)) if a != p):
            roots.append(p)
    return roots


def _top_of(path: str) -> str:
    return "/" if not paths.is_windows_path(path) else path[:3]


def tree_root_digest(records: list[FileRecord] | tuple[FileRecord, ...]) -> str:
    """Combined digest over all roots implied by the record set.

    The roots are derived from the records themselves (paths without a
    recorded ancestor), so the digest is recomputable from a snapshot's
    file_tree alone. An empty record set digests to SHA-256(0x02).
    """
    ordered = tuple(sorted(records, key=lambda r: r.path))
    _check_sorted_unique(ordered)
    h = hashlib.sha256(b"\x02")
    for root in derive_roots(ordered):
        under = [r for r in ordered if paths.is_within(r.path, root)]
        dd = digest_tree(under, root)
        h.update(dir_line(root, dd.digest))
    return h.hexdigest()


EMPTY_TREE_DIGEST = hashlib.sha256(b"\x02").hexdigest()


# --- tree sources ----------------------------------------------------------


class FilesystemTree:
    """Real filesystem access, optionally re-rooted under a base directory.

    With a base directory and ``os_family="windows"``, virtual paths like
    ``C:\\Temp\\x`` map to ``<base>/c/Temp/x`` — this is how recorded fixture
    trees stand in for live hosts of either family.
    """

    def __init__(self, base: str = "/", os_family: str = "linux"):
        self.base = os.path.abspath(base)
        self.os_family = os_family

    def _real(self, vpath: str) -> str:
        if self.os_family == "windows":
            drive = vpath[0].lower()
            rest = vpath[2:].lstrip("\\").replace("\\", "/")
            return os.path.join(self.base, drive, rest) if rest else os.path.join(self.base, drive)
        if self.base == "/":
            return vpath
        return os.path.join(self.base, vpath.lstrip("/"))

    def exists(self, vpath: str) -> bool:
        return os.path.lexists(self._real(vpath))

    def stat(self, vpath: str, follow: bool = False) -> TreeStat:
        real = self._real(vpath)
        st = os.stat(real) if follow else os.lstat(real)
        if statmod.S_ISDIR(st.st_mode):
            kind = "dir"
        elif statmod.S_ISLNK(st.st_mode):
            kind = "symlink"
        elif statmod.S_ISREG(st.st_mode):
            kind = "file"
        else:
            kind = "other"
        target = ""
        if kind == "symlink":
            try:
                target = os.readlink(real)
            except OSError:
                target = ""
        return TreeStat(
            kind=kind,
            size=st.st_size if kind == "file" else 0,
            mode=f"{statmod.S_IMODE(st.st_mode):04o}",
            owner=_owner_name(st.st_uid),
            group=_group_name(st.st_gid),
            target=target,
            change_token=st.st_mtime_ns,
        )

    def listdir(self, vpath: str) -> list[str]:
        return sorted(os.listdir(self._real(vpath)))

    def read_chunks(self, vpath: str):
        with open(self._real(vpath), "rb") as fh:
            while True:
                chunk = fh.read(CHUNK_SIZE)
                if not chunk:
                    return
                yield chunk

    def resolve_symlink(self, vpath: str) -> str:
        real = os.path.realpath(self._real(vpath))
        return real


def _owner_name(uid: int) -> str:
    try:
        return pwd.getpwuid(uid).pw_name
    except KeyError:
        return str(uid)


def _group_name(gid: int) -> str:
    try:
        return grp.getgrgid(gid).gr_name
    except KeyError:
        return str(gid)


@dataclass
class _MemoryNode:
    kind: str
    content: bytes = b""
    mode: str = "0644"
    owner: str = "root"
    group: str = "root"
    target: str = ""
    readable: bool = True
    version: int = 0


class MemoryTree:
    """In-memory tree for hermetic tests; same protocol as FilesystemTree."""

    def __init__(self, os_family: str = "linux"):
        self.os_family = os_family
        self._nodes: dict[str, _MemoryNode] = {}

    def add_dir(self, path: str, mode: str = "0755", owner: str = "root", group: str = "root"):
        self._ensure_parents(path)
        self._nodes[paths.normalize(path)] = _MemoryNode(kind="dir", mode=mode, owner=owner, group=group)
        return self

    def add_file(self, path: str, content: bytes = b"", mode: str = "0644",
                 owner: str = "root", group: str = "root"):
        self._ensure_parents(path)
        self._nodes[paths.normalize(path)] = _MemoryNode(
            kind="file", content=content, mode=mode, owner=owner, group=group)
        return self

    def add_symlink(self, path: str, target: str):
        self._ensure_parents(path)
        self._nodes[paths.normalize(path)] = _MemoryNode(kind="symlink", mode="0777", target=target)
        return self

    def add_other(self, path: str, mode: str = "0644"):
        self._ensure_parents(path)
        self._nodes[paths.normalize(path)] = _MemoryNode(kind="other", mode=mode)
        return self

    def set_unreadable(self, path: str):
        self._nodes[paths.normalize(path)].readable = False
        return self

    def set_content(self, path: str, content: bytes):
        node = self._nodes[paths.normalize(path)]
        node.content = content
        node.version += 1
        return self

    def remove(self, path: str):
        path = paths.normalize(path)
        for p in list(self._nodes):
            if paths.is_within(p, path):
                del self._nodes[p]
        return self

    def _ensure_parents(self, path: str) -> None:
        parent = paths.parent_of(path)
        while parent not in self._nodes and not paths.is_root(parent):
            self._nodes[parent] = _MemoryNode(kind="dir", mode="0755")
            parent = paths.parent_of(parent)
        if paths.is_root(parent) and parent not in self._nodes:
            self._nodes[parent] = _MemoryNode(kind="dir", mode="0755")

    def _node(self, vpath: str) -> _MemoryNode:
        try:
            return self._nodes[paths.normalize(vpath)]
        except KeyError:
            raise FileNotFoundError(vpath) from None

    def exists(self, vpath: str) -> bool:
        return paths.normalize(vpath) in self._nodes

    def stat(self, vpath: str, follow: bool = False) -> TreeStat:
        node = self._node(vpath)
        if follow and node.kind == "symlink":
            node = self._node(node.target)
        return TreeStat(
            kind=node.kind,
            size=len(node.content) if node.kind == "file" else 0,
            mode=node.mode,
            owner=node.owner,
            group=node.group,
            target=node.target,
            change_token=node.version,
        )

    def listdir(self, vpath: str) -> list[str]:
        base = paths.normalize(vpath)
        names = []
        for p in self._nodes:
            if p != base and paths.is_within(p, base) and paths.parent_of(p) == base:
                names.append(paths.basename_of(p))
        return sorted(names)

    def read_chunks(self, vpath: str):
        node = self._node(vpath)
        if node.kind == "symlink":  # open() on a real FS follows links
            node = self._node(node.target)
        if not node.readable:
            raise PermissionError(vpath)
        yield node.content

    def resolve_symlink(self, vpath: str) -> str:
        return self._node(vpath).target


# --- fingerprinting --------------------------------------------------------


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _hash_contents(tree, vpath: str) -> str:
    h = hashlib.sha256()
    for chunk in tree.read_chunks(vpath):
        h.update(chunk)
    return h.hexdigest()


def fingerprint_file(tree, vpath: str) -> FileRecord:
    """Hash one entry and capture its attribute quadruple atomically.

    The entry is re-stat'ed after hashing; if it changed underneath us we
    retry once and then record the literal "volatile" marker rather than a
    hash that describes no consistent state. Permission failures record
    "unreadable" — an auditable fact, not a crash.
    """
    st = tree.stat(vpath, follow=False)
    if st.kind == "dir" or st.kind == "other":
        return _record_from(vpath, st, "")
    if st.kind == "symlink":
        target = st.target or tree.resolve_symlink(vpath)
        return _record_from(vpath, st, sha256_hex(target.encode("utf-8")))

    for attempt in (0, 1):
        try:
            digest = _hash_contents(tree, vpath)
        except PermissionError:
            return _record_from(vpath, st, UNREADABLE)
        st2 = tree.stat(vpath, follow=False)
        if _stable(st, st2):
            return _record_from(vpath, st2, digest)
        st = st2
    return _record_from(vpath, st, VOLATILE)


def _stable(a: TreeStat, b: TreeStat) -> bool:
    return (a.kind, a.size, a.mode, a.owner, a.group, a.change_token) == (
        b.kind, b.size, b.mode, b.owner, b.group, b.change_token)


def _record_from(vpath: str, st: TreeStat, content_hash: str) -> FileRecord:
    return FileRecord(
        path=paths.normalize(vpath),
        content_hash=content_hash,
        size=st.size,
        mode=st.mode,
        owner=st.owner,
        group=st.group,
        kind=st.kind,
    )


class _IgnoreMatcher:
    def __init__(self, rules: tuple[str, ...]):
        self._rules = rules

    def __call__(self, vpath: str) -> bool:
        return any(paths.matches_glob(rule, vpath) for rule in self._rules)


def walk_and_fingerprint(tree, spec: TreeSpec) -> WalkResult:
    """Fingerprint every non-ignored entry under the spec's roots.

    Missing roots are reported, not fatal: their absence shows up as removals
    when diffed against a baseline where they existed.
    """
    ignored = _IgnoreMatcher(spec.ignore_rules)
    records: list[FileRecord] = []
    missing: list[str] = []
    seen_real: set[str] = set()  # loop guard when following symlinks

    def visit(vpath: str, depth: int) -> None:
        if ignored(vpath):
            return
        try:
            st = tree.stat(vpath, follow=False)
        except FileNotFoundError:
            return  # disappeared during the walk
        effective_kind = st.kind
        if st.kind == "symlink" and spec.follow_symlinks:
            try:
                st_t = tree.stat(vpath, follow=True)
            except (FileNotFoundError, OSError):
                st_t = None  # dangling link: record the link itself
            if st_t is not None:
                real = tree.resolve_symlink(vpath)
                if st_t.kind == "dir" and real in seen_real:
                    return  # already descended through this target
                seen_real.add(real)
                records.append(_record_from(vpath, st_t, "" if st_t.kind in ("dir", "other")
                                            else _safe_hash(tree, vpath, st_t)))
                effective_kind = st_t.kind
                if effective_kind == "dir":
                    _descend(vpath, depth)
                return
        records.append(fingerprint_file(tree, vpath))
        if effective_kind == "dir":
            _descend(vpath, depth)

    def _descend(vpath: str, depth: int) -> None:
        if spec.max_depth is not None and depth >= spec.max_depth:
            return
        try:
            names = tree.listdir(vpath)
        except PermissionError:
            return  # the directory's own record still lands; children unknown
        for name in names:
            visit(paths.join(vpath, name), depth + 1)

    for root in spec.roots:
        if not tree.exists(root):
            missing.append(root)
            continue
        visit(root, 0)

    records.sort(key=lambda r: r.path)
    _check_sorted_unique(records)
    digest = tree_root_digest(records)
    return WalkResult(records=tuple(records), tree_root_digest=digest, missing_roots=tuple(missing))


def _safe_hash(tree, vpath: str, st: TreeStat) -> str:
    try:
        return _hash_contents(tree, vpath)
    except PermissionError:
        return UNREADABLE
