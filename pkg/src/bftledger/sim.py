"""Deterministic discrete-event network simulator.

Time is integer ticks (1000 ticks to one simulated second). A single seeded
RNG drives every random choice, and events are totally ordered by
(time, sequence), so one (scenario, seed) pair always produces the same run
byte for byte.

Message model: authenticated point-to-point. Client/authority traffic may be
dropped, duplicated, and reordered before the global stabilization time;
after it, delays are bounded and nothing is dropped. Internal cross-shard
traffic (an authority messaging itself) is never dropped but may be delayed,
duplicated, and reordered: handlers must be idempotent.

Authorities are reactive handlers. Clients are generator coroutines that
yield Sleep/Recv commands and send fire-and-forget messages through their
environment.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from .committee import value_digest
from .trace import RichEvent, TraceWriter

SECOND = 1000  # ticks


@dataclass(frozen=True)
class NetConfig:
    min_delay: int = 10
    max_delay: int = 120
    drop: float = 0.0
    dup: float = 0.0
    gst: int = 0  # after this tick, no drops and delays bounded by gst_bound
    gst_bound: int = 150
    xshard_min: int = 1
    xshard_max: int = 60
    xshard_dup: float = 0.0


@dataclass(frozen=True)
class Envelope:
    src: str
    dest: str
    seq: int
    reply_to: Optional[int]
    payload: Any


@dataclass(frozen=True)
class Sleep:
    until: int


@dataclass(frozen=True)
class Recv:
    deadline: Optional[int]  # absolute tick, or None to wait indefinitely


class ClientEnv:
    """The API a client script sees: send, broadcast, sleep, recv."""

    def __init__(self, sim: "Simulator", name: str):
        self._sim = sim
        self.name = name

    @property
    def now(self) -> int:
        return self._sim.now

    def send(self, dest: str, payload: Any, reply_to: Optional[int] = None) -> int:
        return self._sim.post(self.name, dest, payload, reply_to)

    def broadcast(self, payload: Any) -> list[int]:
        return [self.send(dest, payload) for dest in self._sim.authority_names]

    def sleep(self, dt: int) -> Sleep:
        return Sleep(until=self._sim.now + max(0, dt))

    def recv(self, timeout: Optional[int] = None) -> Recv:
        return Recv(deadline=None if timeout is None else self._sim.now + timeout)


@dataclass
class _ClientTask:
    gen: Any
    inbox: list = field(default_factory=list)
    waiting: Optional[Recv] = None
    wake_token: int = 0
    done: bool = False


class Simulator:
    def __init__(
        self,
        seed: int,
        net: NetConfig = NetConfig(),
        budget: int = 600 * SECOND,
    ):
        self.rng = random.Random(seed)
        self.net = net
        self.budget = budget
        self.now = 0
        self._seq = 0
        self._heap: list[tuple[int, int, Any]] = []
        self.authorities: dict[str, Any] = {}
        self.clients: dict[str, _ClientTask] = {}
        self.crash_at: dict[str, int] = {}
        self.withhold: dict[str, float] = {}
        self.outages: dict[str, list[tuple[int, int]]] = {}
        self.trace = TraceWriter()
        self.budget_exceeded = False
        self.stats = {"delivered": 0, "dropped": 0}

    # -- setup --

    @property
    def authority_names(self) -> list[str]:
        return list(self.authorities)

    def add_authority(self, authority) -> None:
        self.authorities[authority.name] = authority

    def add_client(self, name: str, script: Callable[[ClientEnv], Any]) -> None:
        env = ClientEnv(self, name)
        self.clients[name] = _ClientTask(gen=script(env))

    def start_client_at(self, name: str, time: int) -> None:
        self._schedule(time, ("start", name))

    # -- scheduling --

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _schedule(self, time: int, item: Any) -> None:
        heapq.heappush(self._heap, (time, self._next_seq(), item))

    def _out_of_service(self, name: str, t: int) -> bool:
        crash = self.crash_at.get(name)
        if crash is not None and t >= crash:
            return True
        for start, end in self.outages.get(name, ()):
            if start <= t < end:
                return True
        return False

    def post(self, src: str, dest: str, payload: Any, reply_to: Optional[int] = None) -> int:
        """Submit a message to the network; returns its id (even if dropped)."""
        seq = self._next_seq()
        internal = src == dest and dest in self.authorities
        if internal:
            delay = self.rng.randint(self.net.xshard_min, self.net.xshard_max)
            dup = self.rng.random() < self.net.xshard_dup
            drops = 0.0
        else:
            if self.now < self.net.gst:
                delay = self.rng.randint(self.net.min_delay, self.net.max_delay)
                drops = self.net.drop
            else:
                delay = self.rng.randint(self.net.min_delay, self.net.gst_bound)
                drops = 0.0
            dup = self.rng.random() < self.net.dup
            if self._out_of_service(src, self.now) or self.rng.random() < drops:
                self.stats["dropped"] += 1
                return seq
        envelope = Envelope(src=src, dest=dest, seq=seq, reply_to=reply_to, payload=payload)
        self._schedule(self.now + delay, ("deliver", envelope))
        if dup:
            extra = self.rng.randint(self.net.min_delay, self.net.max_delay)
            self._schedule(self.now + delay + extra, ("deliver", envelope))
        return seq

    # -- client plumbing --

    def _advance_client(self, name: str, value: Any) -> None:
        task = self.clients[name]
        if task.done:
            return
        try:
            command = task.gen.send(value)
        except StopIteration:
            task.done = True
            return
        while True:
            if isinstance(command, Sleep):
                task.waiting = None
                token = task.wake_token = task.wake_token + 1
                self._schedule(max(command.until, self.now), ("wake", name, token, None))
                return
            if isinstance(command, Recv):
                if task.inbox:
                    envelope = task.inbox.pop(0)
                    try:
                        command = task.gen.send(envelope)
                    except StopIteration:
                        task.done = True
                        return
                    continue
                task.waiting = command
                if command.deadline is not None:
                    token = task.wake_token = task.wake_token + 1
                    self._schedule(command.deadline, ("wake", name, token, "timeout"))
                return
            raise TypeError(f"client {name} yielded {command!r}")

    def _deliver_to_client(self, envelope: Envelope) -> None:
        task = self.clients[envelope.dest]
        if task.done:
            return
        if task.waiting is not None:
            task.waiting = None
            task.wake_token += 1  # invalidate any pending timeout
            self._advance_client(envelope.dest, envelope)
        else:
            task.inbox.append(envelope)

    # -- main loop --

    def _crashed(self, name: str, t: int) -> bool:
        crash = self.crash_at.get(name)
        return crash is not None and t >= crash

    def _deliver(self, envelope: Envelope) -> None:
        if envelope.dest in self.authorities:
            internal = envelope.src == envelope.dest
            # A partitioned authority keeps processing its own cross-shard
            # queue; a crashed one processes nothing.
            if self._crashed(envelope.dest, self.now):
                return
            if not internal and self._out_of_service(envelope.dest, self.now):
                return
            authority = self.authorities[envelope.dest]
            rich = RichEvent(
                time=self.now, seq=envelope.seq, src=envelope.src,
                dest=envelope.dest, payload=envelope.payload,
            )
            outputs, notes = authority.handle(envelope.src, envelope.payload, self.now)
            rich.outputs = list(outputs)
            rich.notes = list(notes)
            self.trace.record(rich, value_digest(envelope.payload))
            self.stats["delivered"] += 1
            for dest, payload in outputs:
                if dest != authority.name and self.rng.random() < self.withhold.get(authority.name, 0.0):
                    self.stats["dropped"] += 1
                    continue
                self.post(authority.name, dest, payload, reply_to=envelope.seq)
        elif envelope.dest in self.clients:
            rich = RichEvent(
                time=self.now, seq=envelope.seq, src=envelope.src,
                dest=envelope.dest, payload=envelope.payload,
            )
            self.trace.record(rich, value_digest(envelope.payload))
            self.stats["delivered"] += 1
            self._deliver_to_client(envelope)

    def run(self) -> None:
        while self._heap:
            time, _seq, item = self._heap[0]
            if time > self.budget:
                self.budget_exceeded = True
                break
            heapq.heappop(self._heap)
            self.now = max(self.now, time)
            kind = item[0]
            if kind == "deliver":
                self._deliver(item[1])
            elif kind == "start":
                self._advance_client(item[1], None)
            elif kind == "wake":
                _, name, token, reason = item
                task = self.clients[name]
                if task.done:
                    continue
                if reason == "timeout":
                    if task.waiting is not None and token == task.wake_token:
                        task.waiting = None
                        self._advance_client(name, None)
                else:
                    if token == task.wake_token:
                        self._advance_client(name, None)

    # -- post-run utilities --

    def honest_authorities(self) -> list:
        return [
            a
            for name, a in self.authorities.items()
            if a.honest and name not in self.crash_at
        ]

    def sync_deliver(self, messages: Iterable[Any], rounds: int = 12) -> None:
        """Deliver certified messages directly to every live honest authority,
        applying effects synchronously, until states stop changing. Used for
        the end-of-run full sync before consistency comparison."""
        targets = self.honest_authorities()
        for _ in range(rounds):
            before = [a.snapshot() for a in targets]
            for message in messages:
                for authority in targets:
                    self._apply_sync(authority, message)
            if [a.snapshot() for a in targets] == before:
                break

    def _apply_sync(self, authority, message) -> None:
        queue = [("sync", message)]
        while queue:
            src, payload = queue.pop(0)
            outputs, _notes = authority.handle(src, payload, self.now)
            for dest, out in outputs:
                if dest == authority.name:
                    queue.append((authority.name, out))
