"""Deterministic sandbox archives: gzip-compressed tar, byte-stable layout.

The same file set always compresses to the same bytes: entries are sorted,
all metadata is fixed (mtime 0, uid/gid 0, mode 0644), and the gzip header
carries no timestamp. Paths are confined both ways: compress refuses
traversal on input, decompress refuses hostile entries.
"""

from __future__ import annotations

import gzip
import io
import tarfile
import zlib

from gridgate.backend.errors import MalformedArchiveError, PathTraversalError

_COMPRESS_LEVEL = 9


def check_relative_path(path: str) -> None:
    """Reject any path that could escape an extraction directory."""
    if not isinstance(path, str) or not path:
        raise PathTraversalError("sandbox paths must be non-empty strings")
    if "\x00" in path:
        raise PathTraversalError(f"NUL byte in path {path!r}")
    if path.startswith("/") or path.startswith("\\"):
        raise PathTraversalError(f"absolute path {path!r}")
    if len(path) > 1 and path[1] == ":":  # windows drive spelling
        raise PathTraversalError(f"absolute path {path!r}")
    for part in path.replace("\\", "/").split("/"):
        if part in ("", ".", ".."):
            raise PathTraversalError(f"path {path!r} contains a {part or 'empty'!r} component")


def compress_sandbox(files: list[tuple[str, bytes]]) -> bytes:
    """Pack (relative path, content) pairs into one deterministic archive."""
    seen: set[str] = set()
    for path, _content in files:
        check_relative_path(path)
        if path in seen:
            raise ValueError(f"duplicate sandbox path {path!r}")
        seen.add(path)

    tar_buffer = io.BytesIO()
    with tarfile.open(fileobj=tar_buffer, mode="w", format=tarfile.PAX_FORMAT) as tar:
        for path, content in sorted(files):
            info = tarfile.TarInfo(name=path)
            info.size = len(content)
            info.mtime = 0
            info.uid = 0
            info.gid = 0
            info.uname = ""
            info.gname = ""
            info.mode = 0o644
            tar.addfile(info, io.BytesIO(content))

    out = io.BytesIO()
    with gzip.GzipFile(fileobj=out, mode="wb", compresslevel=_COMPRESS_LEVEL, mtime=0) as gz:
        gz.write(tar_buffer.getvalue())
    return out.getvalue()


def decompress_sandbox(archive: bytes) -> list[tuple[str, bytes]]:
    """Unpack an archive back to its (path, content) pairs, in archive order."""
    try:
        raw = gzip.decompress(bytes(archive))
    except (OSError, EOFError, zlib.error) as exc:
        raise MalformedArchiveError(f"not a gzip stream: {exc}") from exc
    files: list[tuple[str, bytes]] = []
    try:
        with tarfile.open(fileobj=io.BytesIO(raw), mode="r:") as tar:
            for member in tar:
                if member.isdir():
                    continue
                if not member.isreg():
                    raise MalformedArchiveError(
                        f"unsupported entry type for {member.name!r}"
                    )
                check_relative_path(member.name)
                handle = tar.extractfile(member)
                if handle is None:
                    raise MalformedArchiveError(f"unreadable entry {member.name!r}")
                files.append((member.name, handle.read()))
    except tarfile.TarError as exc:
        raise MalformedArchiveError(f"not a tar archive: {exc}") from exc
    return files
