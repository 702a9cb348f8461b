"""Append-only, file-backed record log.

One JSON object per line, each carrying a monotonically increasing version.
State is whatever a fold over the records says it is, so replaying the file
from empty always reproduces the current store, and a crashed writer loses
at most the line it was writing. A store opened with no path lives purely
in memory (tests, what-if sandboxes).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator


@dataclass(frozen=True)
class StoreRecord:
    version: int
    kind: str
    payload: dict[str, Any]


class StoreCorruptError(ValueError):
    """The backing file is not a well-formed record log."""


def _encode(record: StoreRecord) -> str:
    return json.dumps(
        {"version": record.version, "kind": record.kind, "payload": record.payload},
        sort_keys=True,
        separators=(",", ":"),
    )


class PlanStore:
    """Single-writer, many-reader record log.

    Writes are serialized under one lock; readers get immutable snapshots,
    so a read never observes a half-applied write.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self._path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._records: tuple[StoreRecord, ...] = ()
        if self._path is not None and self._path.exists():
            self._records = tuple(self._load(self._path))

    @staticmethod
    def _load(path: Path) -> Iterator[StoreRecord]:
        expected = 1
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    raw = json.loads(line)
                    record = StoreRecord(
                        version=int(raw["version"]),
                        kind=str(raw["kind"]),
                        payload=dict(raw["payload"]),
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise StoreCorruptError(f"{path}:{lineno}: bad record: {exc}") from exc
                if record.version != expected:
                    raise StoreCorruptError(
                        f"{path}:{lineno}: version {record.version}, expected {expected}"
                    )
                expected += 1
                yield record

    @property
    def path(self) -> Path | None:
        return self._path

    @property
    def version(self) -> int:
        """Version of the newest record, 0 when empty."""
        with self._lock:
            return len(self._records)

    def append(self, kind: str, payload: dict[str, Any]) -> StoreRecord:
        if not kind:
            raise ValueError("record kind must be non-empty")
        with self._lock:
            record = StoreRecord(
                version=len(self._records) + 1, kind=kind, payload=payload
            )
            # crash safety: the file line lands before the in-memory state
            if self._path is not None:
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(_encode(record))
                    fh.write("\n")
            self._records = self._records + (record,)
            return record

    def snapshot(self) -> tuple[StoreRecord, ...]:
        """Every record, in version order; immutable."""
        with self._lock:
            return self._records

    def records(self, kind: str) -> tuple[StoreRecord, ...]:
        return tuple(r for r in self.snapshot() if r.kind == kind)

    def latest(self, kind: str) -> StoreRecord | None:
        for record in reversed(self.snapshot()):
            if record.kind == kind:
                return record
        return None
