"""Trace records: the canonical event log a simulation run writes.

The trace file is an append-only sequence of canonically encoded TraceEvent
records (each prefixed by the standard tag byte), so two runs of the same
scenario and seed must produce byte-identical files. Audits work over the
richer in-memory mirror, which keeps the full payload objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from . import serialize


@dataclass(frozen=True)
class TraceEvent:
    time: int
    seq: int
    src: str
    dest: str
    kind: str
    digest: bytes


@dataclass
class RichEvent:
    """In-memory mirror of one delivery: full payload plus what it produced."""

    time: int
    seq: int
    src: str
    dest: str
    payload: Any
    outputs: list = field(default_factory=list)  # (dest, payload) pairs
    notes: list = field(default_factory=list)  # (tag, *details) audit notes


class TraceWriter:
    def __init__(self):
        self.events: list[TraceEvent] = []
        self.rich: list[RichEvent] = []

    def record(self, rich: RichEvent, digest: bytes) -> None:
        self.rich.append(rich)
        self.events.append(
            TraceEvent(
                time=rich.time,
                seq=rich.seq,
                src=rich.src,
                dest=rich.dest,
                kind=type(rich.payload).__name__,
                digest=digest,
            )
        )

    def to_bytes(self) -> bytes:
        out = bytearray()
        for event in self.events:
            out += serialize.encode(event)
        return bytes(out)
