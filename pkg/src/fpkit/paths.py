"""Separator-aware path helpers.

Snapshots can describe Linux trees (/etc/shadow) and Windows trees
(C:\\Temp\\foo.tmp) regardless of the platform the toolkit runs on, so none
of this goes through os.path. The flavor of a path or pattern is inferred
from its own text: a drive-letter prefix or backslash means Windows.
"""

from __future__ import annotations

import re

_DRIVE_RE = re.compile(r"^[A-Za-z]:(\\|$)")
_GLOB_CHARS = ("*", "?", "[")


def is_windows_path(path: str) -> bool:
    return bool(_DRIVE_RE.match(path)) or "\\" in path


def sep_for(path: str) -> str:
    return "\\" if is_windows_path(path) else "/"


def is_absolute(path: str) -> bool:
    if is_windows_path(path):
        return bool(_DRIVE_RE.match(path))
    return path.startswith("/")


def is_root(path: str) -> bool:
    """True for "/" or a bare drive root like "C:\\"."""
    if path == "/":
        return True
    return bool(re.fullmatch(r"[A-Za-z]:\\", path))


def normalize(path: str) -> str:
    """Strip a trailing separator unless the path IS a root."""
    if is_root(path):
        return path
    sep = sep_for(path)
    while path.endswith(sep) and not is_root(path):
        path = path[: -len(sep)]
    return path


def parent_of(path: str) -> str:
    """Parent directory; roots are their own parent."""
    path = normalize(path)
    if is_root(path):
        return path
    sep = sep_for(path)
    head, _, _ = path.rpartition(sep)
    if sep == "/":
        return head if head else "/"
    # windows: "C:\Temp".rpartition -> head "C:"; drive root keeps its slash
    if re.fullmatch(r"[A-Za-z]:", head):
        return head + "\\"
    return head


def basename_of(path: str) -> str:
    path = normalize(path)
    if is_root(path):
        return path
    return path.rpartition(sep_for(path))[2]


def join(parent: str, name: str) -> str:
    sep = sep_for(parent)
    if parent.endswith(sep):
        return parent + name
    return parent + sep + name


def is_within(path: str, root: str) -> bool:
    """True if *path* equals *root* or lies beneath it (component boundary)."""
    path = normalize(path)
    root_n = normalize(root)
    if path == root_n:
        return True
    prefix = root_n if root_n.endswith(sep_for(root_n)) else root_n + sep_for(root_n)
    return path.startswith(prefix)


def ancestors_within(path: str, root: str) -> list[str]:
    """Proper ancestors of *path* down to and including *root*, nearest first."""
    out = []
    cur = parent_of(path)
    root_n = normalize(root)
    while True:
        out.append(cur)
        if cur == root_n or is_root(cur):
            break
        cur = parent_of(cur)
    return out


def is_glob(pattern: str) -> bool:
    return any(c in pattern for c in _GLOB_CHARS)


def glob_to_regex(pattern: str) -> re.Pattern[str]:
    """Translate a glob into a full-match regex.

    `**` crosses separators, `*` and `?` stay within one path component.
    A pattern with no separator at all is a basename pattern and is matched
    against the last component only (handled by the caller via
    :func:`matches_glob`).
    """
    sep = sep_for(pattern)
    sep_re = re.escape(sep)
    out = []
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if ch == "*":
            if pattern[i : i + 2] == "**":
                out.append(".*")
                i += 2
                continue
            out.append(f"[^{sep_re}]*")
        elif ch == "?":
            out.append(f"[^{sep_re}]")
        else:
            out.append(re.escape(ch))
        i += 1
    return re.compile("".join(out) + r"\Z")


def matches_glob(pattern: str, path: str) -> bool:
    """Full-path glob match; separator-free patterns match the basename."""
    if sep_for(pattern) not in pattern and not is_windows_path(pattern):
        subject = basename_of(path)
    else:
        subject = normalize(path)
    return glob_to_regex(pattern).match(subject) is not None


def matches_prefix(pattern: str, path: str) -> bool:
    """Literal rule: matches the path itself and everything beneath it."""
    return is_within(path, pattern)


def dedupe_roots(roots: list[str]) -> tuple[str, ...]:
    """Drop duplicate roots and roots nested inside another root.

    The outermost root wins so each path is walked exactly once.
    """
    normalized = sorted({normalize(r) for r in roots})
    kept: list[str] = []
    for root in normalized:
        if not any(is_within(root, k) for k in kept):
            kept.append(root)
    return tuple(kept)
