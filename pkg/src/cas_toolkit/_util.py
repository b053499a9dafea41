"""Small shared helpers: worker counts, atomic writes, JSON framing."""

import json
import os
import tempfile

ENV_THREADS = "CAS_TOOLKIT_THREADS"


def worker_count(task_count=None):
    """Number of worker threads to use for a batch of independent tasks.

    Defaults to ``os.cpu_count()`` and is capped by the CAS_TOOLKIT_THREADS
    environment variable when set.  Never exceeds the task count and never
    drops below 1.  A malformed or non-positive override is ignored.
    """
    workers = os.cpu_count() or 1
    override = os.environ.get(ENV_THREADS)
    if override is not None:
        try:
            parsed = int(override)
        except ValueError:
            parsed = 0
        if parsed > 0:
            workers = min(workers, parsed)
    if task_count is not None:
        workers = min(workers, max(1, task_count))
    return max(1, workers)


def atomic_write_bytes(path, payload):
    """Write ``payload`` to ``path`` via a temp file and rename.

    The target either keeps its old content or receives the full new
    content; partial files are never left behind.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj):
    """Canonical JSON encoding used for files and fingerprints."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path, rows):
    lines = [dump_json(row) for row in rows]
    payload = "\n".join(lines)
    if lines:
        payload += "\n"
    atomic_write_text(path, payload)


def read_jsonl(path, error_cls):
    """Parse a JSONL file, raising ``error_cls`` with line context on failure."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise error_cls(f"{path}: line {lineno}: invalid JSON ({exc})") from exc
    return rows
