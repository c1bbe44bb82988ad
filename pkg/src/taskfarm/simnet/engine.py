"""Deterministic discrete-event execution of a farm scenario.

Transport model
---------------
* Every message takes ``latency(channel)`` ticks from departure to arrival.
* Sends are synchronous: an actor's messages leave one at a time, and the
  next one departs only when the previous one has reached its receiver.
  Receivers always take an arriving message at once, so a rendezvous never
  waits on a busy receiver and cyclic waits cannot form.
* On arrival the receiver handles the message first; the sender is released
  afterwards. Together with the sequence-number tiebreak this makes
  same-tick orderings reproducible.
* Messages for a crashed or stopped actor are delivered and dropped, so a
  live sender is never wedged by a dead peer.

Work units carry the run they were issued in as transport metadata (not
part of the wire message). An output from an earlier run that reaches the
Collector after that run completed is a cross-run straggler: it is recorded
and discarded, or raises ``CrossRunStraggler`` under the ``error`` policy.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from ..actors import (COMPUTE_COMPLETE, Collector, Farmer, Mismatch, Mode,
                      Worker, invert, synthetic_camera)
from ..dispatcher import Dispatcher
from ..errors import FarmError
from ..protocol import (COLLECTOR, DISPATCHER, FARMER, Address, BlockAck,
                        BlockCouple, Message, NewRun, OutputCouple, Request,
                        Resume, Role, SlotAck, Stop, WorkCouple, worker)
from .metrics import Metrics, compute_metrics
from .scenario import Crash, FaultSpec, Rejoin, Scenario, Slowdown
from .trace import (Abandon, Alarm, CollectorStopped, ComputeDone, Detect,
                    EventTrace, FaultActivated, RunComplete, Straggler,
                    TraceRecord, Truncated, event_record)

log = logging.getLogger(__name__)


class DeadlockDetected(FarmError):
    """No events are pending but the farm has not shut down."""

    def __init__(self, message, result: "SimulationResult"):
        super().__init__(message)
        self.result = result

    @property
    def trace(self) -> EventTrace:
        return self.result.trace


class CrossRunStraggler(FarmError):
    def __init__(self, message, result: "SimulationResult"):
        super().__init__(message)
        self.result = result


class UnknownWorker(FarmError, KeyError):
    pass


class SimulationLimit(FarmError):
    """The scenario exceeded its ``max_events`` budget."""


@dataclass
class SimulationResult:
    trace: EventTrace
    metrics: Metrics
    artifacts: list[bytes]

    def __iter__(self):
        return iter((self.trace, self.metrics, self.artifacts))


def digest(block: bytes) -> bytes:
    return hashlib.blake2b(block, digest_size=16).digest()


WORKER_FUNCTIONS = {"invert": invert, "digest": digest}


@dataclass
class _Compute:
    token: int
    k: int
    epoch: int
    work_left: Fraction
    since: int
    factor: Fraction
    done_at: int


@dataclass
class _Port:
    """Outgoing side of one actor."""

    outbox: deque = field(default_factory=deque)
    busy: bool = False
    incarnation: int = 0


# event kinds, ordered only by (time, seq)
_ARRIVAL, _COMPUTE, _FAULT, _SLOWDOWN_END, _START, _STOP_AT = range(6)


class Simulation:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.now = 0
        self._seq = 0
        self._queue: list = []
        self._events = 0
        self.trace = EventTrace()
        fn = WORKER_FUNCTIONS[sc.worker_fn]
        self.farmer = Farmer(sc.m, synthetic_camera(sc.image_count, sc.image_size, sc.image_seed))
        self.dispatcher = Dispatcher(sc.m, sc.n, threshold=sc.threshold, seed=sc.seed)
        self.collector = Collector(sc.m)
        self.workers = {j: Worker(j, fn) for j in range(1, sc.n + 1)}
        self._worker_fn = fn
        self.crashed: set[int] = set()
        self.slowdowns: dict[int, list[Fraction]] = {j: [] for j in self.workers}
        self.computing: dict[int, _Compute] = {}
        self.ports: dict[Address, _Port] = {}
        self.dispatcher_epoch = 0
        self._tokens = 0
        self._jitter = random.Random(f"jitter:{sc.seed}")
        self._halted = False

    # -- scheduling ----------------------------------------------------------

    def _schedule(self, time: int, kind: int, payload) -> None:
        heapq.heappush(self._queue, (time, self._seq, kind, payload))
        self._seq += 1

    def _record(self, rec: TraceRecord) -> None:
        self.trace.append(rec)

    def _event(self, subject: Address, ev) -> None:
        self._record(event_record(self.now, subject, ev))

    def _port(self, addr: Address) -> _Port:
        port = self.ports.get(addr)
        if port is None:
            port = self.ports[addr] = _Port()
        return port

    def _latency(self, src: Address, dst: Address) -> int:
        channel = f"{src.role.name.lower()}->{dst.role.name.lower()}"
        return self.sc.latency.between(channel)

    def _send(self, src: Address, out, epoch: Optional[int] = None) -> None:
        port = self._port(src)
        for dst, msg in out:
            port.outbox.append((dst, msg, epoch))
        if not port.busy:
            self._depart(src, port)

    def _depart(self, src: Address, port: _Port) -> None:
        if not port.outbox:
            return
        dst, msg, epoch = port.outbox.popleft()
        port.busy = True
        self._schedule(self.now + self._latency(src, dst), _ARRIVAL,
                       (src, port.incarnation, dst, msg, epoch))

    def _release(self, src: Address, incarnation: int) -> None:
        port = self._port(src)
        if port.incarnation != incarnation:
            return
        port.busy = False
        self._depart(src, port)

    # -- main loop -----------------------------------------------------------

    def run(self) -> SimulationResult:
        sc = self.sc
        for fault in sc.faults:
            at = fault.start if isinstance(fault, Slowdown) else fault.at
            self._schedule(at, _FAULT, fault)
            if isinstance(fault, Slowdown) and fault.until is not None:
                self._schedule(fault.until, _SLOWDOWN_END, fault)
        if sc.stop_at is not None:
            self._schedule(sc.stop_at, _STOP_AT, None)
        self._schedule(0, _START, FARMER)
        for j in self.workers:
            self._schedule(0, _START, worker(j))

        while self._queue:
            time, _, kind, payload = heapq.heappop(self._queue)
            self.now = time
            self._events += 1
            if self._events > sc.max_events:
                raise SimulationLimit(f"more than {sc.max_events} events")
            if kind == _ARRIVAL:
                self._arrive(*payload)
            elif kind == _COMPUTE:
                self._compute_done(*payload)
            elif kind == _FAULT:
                self.inject_fault(payload)
            elif kind == _SLOWDOWN_END:
                self._end_slowdown(payload)
            elif kind == _START:
                self._start(payload)
            elif kind == _STOP_AT:
                self._truncate("stop_at")

        result = self.result()
        waiting = [name for name, done in (
            ("farmer", self.farmer.stopped),
            ("dispatcher", self.dispatcher.stopped),
            ("collector", self.collector.stopped)) if not done]
        if waiting:
            raise DeadlockDetected(
                f"no pending events at t={self.now}, still running: {', '.join(waiting)}; "
                f"live workers: {sorted(set(self.workers) - self.crashed)}", result)
        return result

    def result(self) -> SimulationResult:
        return SimulationResult(self.trace, compute_metrics(self.trace), list(self.collector.sink))

    def _start(self, addr: Address) -> None:
        if addr == FARMER:
            self._send(FARMER, self.farmer.bootstrap())
        elif addr.index not in self.crashed:
            self._send(addr, self.workers[addr.index].start())

    def _truncate(self, reason: str) -> None:
        if self.farmer.stopped:
            return
        self._event(FARMER, Truncated(reason))
        self._send(FARMER, self.farmer.external_stop())

    # -- delivery ------------------------------------------------------------

    def _arrive(self, src: Address, incarnation: int, dst: Address, msg: Message,
                epoch: Optional[int]) -> None:
        self._record(TraceRecord(self.now, src, dst, msg))
        if dst.role is Role.FARMER:
            self._to_farmer(msg)
        elif dst.role is Role.DISPATCHER:
            self._to_dispatcher(msg)
        elif dst.role is Role.WORKER:
            self._to_worker(dst.index, msg, epoch)
        elif dst.role is Role.COLLECTOR:
            self._to_collector(msg, epoch)
        self._release(src, incarnation)

    def _to_farmer(self, msg: Message) -> None:
        if self.farmer.stopped:
            return
        if isinstance(msg, BlockAck):
            self._send(FARMER, self.farmer.on_ack(msg.k))

    def _to_dispatcher(self, msg: Message) -> None:
        d = self.dispatcher
        if d.stopped:
            return
        if isinstance(msg, BlockCouple):
            self._send(DISPATCHER, d.on_block_couple(msg.k, msg.block))
        elif isinstance(msg, NewRun):
            self.dispatcher_epoch += 1
            self._send(DISPATCHER, d.on_new_run())
        elif isinstance(msg, Stop):
            self._send(DISPATCHER, d.on_stop())
        elif isinstance(msg, SlotAck):
            self._send(DISPATCHER, d.on_slot_ack(msg.k))
        elif isinstance(msg, Request):
            out, alarm = d.on_request(msg.j)
            self._send(DISPATCHER, out, epoch=self.dispatcher_epoch)
            if alarm is not None:
                self._event(DISPATCHER, Alarm(alarm.k, alarm.count))
                if self.sc.alarm_policy == "log":
                    log.warning("alarm: block %d picked %d times (threshold %d)",
                                alarm.k, alarm.count, d.threshold)
                elif self.sc.alarm_policy == "halt":
                    self._truncate("alarm")

    def _to_worker(self, j: int, msg: Message, epoch: Optional[int]) -> None:
        w = self.workers[j]
        if j in self.crashed or w.mode is Mode.STOPPED:
            return
        if w.mode is Mode.COMPUTING and isinstance(msg, (Resume, Stop)):
            job = self.computing.pop(j)
            if isinstance(msg, Resume):
                self._event(worker(j), Abandon(j, job.k))
        out = w.step(msg)
        if isinstance(msg, WorkCouple):
            self._begin_compute(j, msg.k, epoch)
        self._send(worker(j), out)

    def _to_collector(self, msg: Message, epoch: Optional[int]) -> None:
        c = self.collector
        if c.stopped:
            return
        if isinstance(msg, Stop):
            self._event(COLLECTOR, CollectorStopped(c.on_stop()))
            return
        if not isinstance(msg, OutputCouple):
            return
        current = c.runs_completed + 1
        if epoch is not None and epoch < current:
            self._event(COLLECTOR, Straggler(msg.k, epoch))
            if self.sc.straggler_policy == "error":
                raise CrossRunStraggler(
                    f"t={self.now}: output for block {msg.k} of run {epoch} "
                    f"arrived during run {current}", self.result())
            return
        before = len(c.verdicts)
        out, artifact = c.on_output(msg.k, msg.output)
        if len(c.verdicts) > before:
            self._event(COLLECTOR, Detect(msg.k, isinstance(c.verdicts[-1][1], Mismatch)))
        self._send(COLLECTOR, out)
        if artifact is not None:
            self._event(COLLECTOR, RunComplete(c.runs_completed))

    # -- computation ---------------------------------------------------------

    def _factor(self, j: int) -> Fraction:
        return math.prod(self.slowdowns[j], start=Fraction(1))

    def _begin_compute(self, j: int, k: int, epoch: Optional[int]) -> None:
        cm = self.sc.compute
        work = Fraction(cm.base) * cm.multipliers.get(j, Fraction(1))
        if cm.jitter:
            work += self._jitter.randint(0, cm.jitter)
        factor = self._factor(j)
        self._tokens += 1
        job = _Compute(self._tokens, k, epoch or 0, work, self.now, factor,
                       self.now + max(1, math.ceil(work * factor)))
        self.computing[j] = job
        self._schedule(job.done_at, _COMPUTE, (j, job.token))

    def _rescale(self, j: int) -> None:
        job = self.computing.get(j)
        if job is None:
            return
        new_factor = self._factor(j)
        job.work_left = max(Fraction(0), job.work_left - Fraction(self.now - job.since) / job.factor)
        job.since = self.now
        job.factor = new_factor
        done_at = self.now + math.ceil(job.work_left * new_factor)
        if done_at != job.done_at:
            self._tokens += 1
            job.token = self._tokens
            job.done_at = done_at
            self._schedule(done_at, _COMPUTE, (j, job.token))

    def _compute_done(self, j: int, token: int) -> None:
        job = self.computing.get(j)
        if job is None or job.token != token:
            return
        del self.computing[j]
        self._event(worker(j), ComputeDone(j, job.k))
        self._send(worker(j), self.workers[j].step(COMPUTE_COMPLETE), epoch=job.epoch)

    # -- faults --------------------------------------------------------------

    def inject_fault(self, fault: FaultSpec) -> None:
        j = fault.worker
        if j not in self.workers:
            raise UnknownWorker(j)
        addr = worker(j)
        if isinstance(fault, Crash):
            if j in self.crashed:
                return
            self._event(addr, FaultActivated("crash", j))
            self.crashed.add(j)
            self.computing.pop(j, None)
            port = self._port(addr)
            port.outbox.clear()
            port.busy = False
            port.incarnation += 1
        elif isinstance(fault, Rejoin):
            if j not in self.crashed:
                return
            self._event(addr, FaultActivated("rejoin", j))
            self.crashed.discard(j)
            self.workers[j] = Worker(j, self._worker_fn)
            self._send(addr, self.workers[j].start())
        elif isinstance(fault, Slowdown):
            self._event(addr, FaultActivated("slowdown", j, fault.factor))
            self.slowdowns[j].append(fault.factor)
            self._rescale(j)
        else:
            raise TypeError(f"not a fault: {fault!r}")

    def _end_slowdown(self, fault: Slowdown) -> None:
        j = fault.worker
        self._event(worker(j), FaultActivated("slowdown-end", j, fault.factor))
        self.slowdowns[j].remove(fault.factor)
        self._rescale(j)


def run_scenario(sc: Scenario) -> SimulationResult:
    """Run ``sc`` to quiescence and return its trace, metrics and artifacts."""
    return Simulation(sc).run()


def run_collecting(sc: Scenario) -> tuple[SimulationResult, Optional[FarmError]]:
    """Like ``run_scenario`` but return the partial result of a failed run with its error."""
    try:
        return run_scenario(sc), None
    except (DeadlockDetected, CrossRunStraggler) as exc:
        return exc.result, exc


@dataclass(frozen=True)
class Equal:
    pass


@dataclass(frozen=True)
class FirstDivergence:
    index: int


ReplayVerdict = Union[Equal, FirstDivergence]


def compare_traces(expected: list[TraceRecord], actual: list[TraceRecord]) -> ReplayVerdict:
    for i, (a, b) in enumerate(zip(expected, actual)):
        if a.encode() != b.encode():
            return FirstDivergence(i)
    if len(expected) != len(actual):
        return FirstDivergence(min(len(expected), len(actual)))
    return Equal()


def replay(trace: list[TraceRecord], sc: Scenario) -> ReplayVerdict:
    """Re-execute ``sc`` and compare the fresh trace with ``trace`` record by record."""
    result, _ = run_collecting(sc)
    return compare_traces(trace, result.trace)
