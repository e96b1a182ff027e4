"""Small file helpers: atomic writes and self-describing CSV headers.

Every artifact the pipeline writes is reproducible byte for byte: no
timestamps, floats serialized with ``repr`` (shortest round trip), and
provenance (seed, config hash, version) carried in ``#``-prefixed comment
lines that readers skip.
"""

import os
import tempfile


def atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file + rename in the same dir."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def meta_lines(meta: dict | None) -> list[str]:
    """Render provenance metadata as CSV comment lines."""
    if not meta:
        return []
    return [f"# {key}={value}" for key, value in meta.items()]


def read_table(path: str) -> tuple[list[str], list[list[str]], dict]:
    """Read a comma-separated file, skipping blank and ``#`` comment lines.

    Returns (header fields, data rows as string fields, parsed meta dict).
    """
    header: list[str] | None = None
    rows: list[list[str]] = []
    meta: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            fields = [f.strip() for f in line.split(",")]
            if header is None:
                header = fields
            else:
                rows.append(fields)
    if header is None:
        header = []
    return header, rows, meta


def fmt(value: float) -> str:
    """Shortest exact decimal representation of a float."""
    return repr(float(value))
