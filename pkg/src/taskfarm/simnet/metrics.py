"""Per-run and per-worker figures derived from an event trace alone."""

from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Optional

from ..protocol import (NewRun, Request, Role, Sleep, Stop, WorkCouple)
from .trace import (Abandon, Alarm, CollectorStopped, ComputeDone, Detect,
                    FaultActivated, RunComplete, Straggler)

RUN_HEADER = ["scenario", "run", "makespan_ticks", "redundant_assignments",
              "alarms", "duplicates", "mismatches"]
SUMMARY_HEADER = ["scenario", "runs_completed", "duplicate_outputs", "mismatches",
                  "partials_on_stop", "alarms", "redundant_assignments", "stragglers",
                  "end_ticks"]


@dataclass
class RunMetrics:
    run: int
    started_at: int
    makespan_ticks: Optional[int] = None
    redundant_assignments: int = 0
    alarms: int = 0
    duplicates: int = 0
    mismatches: int = 0
    assignments: Counter = field(default_factory=Counter)


@dataclass
class Metrics:
    runs: list[RunMetrics]
    runs_completed: int
    duplicate_outputs: int
    mismatches: int
    partials_on_stop: int
    alarms: int
    stragglers: int
    redundant_assignments: int
    busy_ticks: dict[int, int]
    end_ticks: int

    @property
    def utilization(self) -> dict[int, float]:
        if not self.end_ticks:
            return {j: 0.0 for j in self.busy_ticks}
        return {j: busy / self.end_ticks for j, busy in self.busy_ticks.items()}

    def runs_csv(self, scenario: str) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(RUN_HEADER)
        for r in self.runs:
            out.writerow([scenario, r.run, "" if r.makespan_ticks is None else r.makespan_ticks,
                          r.redundant_assignments, r.alarms, r.duplicates, r.mismatches])
        return buf.getvalue()

    def summary_csv(self, scenario: str) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(SUMMARY_HEADER)
        out.writerow([scenario, self.runs_completed, self.duplicate_outputs, self.mismatches,
                      self.partials_on_stop, self.alarms, self.redundant_assignments,
                      self.stragglers, self.end_ticks])
        return buf.getvalue()

    def utilization_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["worker", "busy_ticks", "utilization"])
        util = self.utilization
        for j in sorted(self.busy_ticks):
            out.writerow([j, self.busy_ticks[j], f"{util[j]:.6f}"])
        return buf.getvalue()


def compute_metrics(trace) -> Metrics:
    runs: dict[int, RunMetrics] = {}
    epoch = 0
    dispatcher_stopped = False
    # run in force when each outstanding request reached the dispatcher
    pending: dict[int, deque] = defaultdict(deque)
    collector_run = 1
    stragglers = 0
    partials = 0
    busy: dict[int, int] = defaultdict(int)
    started: dict[int, int] = {}
    crashed: set[int] = set()
    stopped: set[int] = set()

    def settle(j, t):
        if j in started:
            busy[j] += t - started.pop(j)

    for rec in trace:
        body = rec.body
        if rec.is_event:
            if isinstance(body, Alarm):
                if epoch in runs:
                    runs[epoch].alarms += 1
            elif isinstance(body, Detect):
                r = runs.get(collector_run)
                if r is not None:
                    r.duplicates += 1
                    r.mismatches += body.mismatch
            elif isinstance(body, RunComplete):
                r = runs.get(body.run)
                if r is not None:
                    r.makespan_ticks = rec.time - r.started_at
                collector_run = body.run + 1
            elif isinstance(body, Straggler):
                stragglers += 1
            elif isinstance(body, CollectorStopped):
                partials = body.partials
            elif isinstance(body, (ComputeDone, Abandon)):
                settle(body.worker, rec.time)
            elif isinstance(body, FaultActivated):
                if body.kind == "crash":
                    settle(body.worker, rec.time)
                    crashed.add(body.worker)
                elif body.kind == "rejoin":
                    crashed.discard(body.worker)
                    stopped.discard(body.worker)
                    pending[body.worker].clear()
            continue

        dst, src = rec.receiver, rec.sender
        if dst.role is Role.DISPATCHER and not dispatcher_stopped:
            if isinstance(body, NewRun):
                epoch += 1
                runs[epoch] = RunMetrics(epoch, rec.time)
            elif isinstance(body, Stop):
                dispatcher_stopped = True
            elif isinstance(body, Request):
                pending[body.j].append(epoch)
        elif dst.role is Role.WORKER and src.role is Role.DISPATCHER:
            j = dst.index
            if isinstance(body, (WorkCouple, Sleep)):
                asked_in = pending[j].popleft() if pending[j] else epoch
                if isinstance(body, WorkCouple):
                    if asked_in in runs:
                        runs[asked_in].assignments[body.k] += 1
                    if j not in crashed and j not in stopped:
                        started[j] = rec.time
            elif isinstance(body, Stop) and j not in crashed:
                settle(j, rec.time)
                stopped.add(j)

    end = trace[-1].time if len(trace) else 0
    for j in list(started):
        settle(j, end)
    ordered = [runs[e] for e in sorted(runs)]
    for r in ordered:
        r.redundant_assignments = sum(c - 1 for c in r.assignments.values() if c > 1)
    completed = sum(r.makespan_ticks is not None for r in ordered)
    return Metrics(
        runs=ordered,
        runs_completed=completed,
        duplicate_outputs=sum(r.duplicates for r in ordered),
        mismatches=sum(r.mismatches for r in ordered),
        partials_on_stop=partials,
        alarms=sum(r.alarms for r in ordered),
        stragglers=stragglers,
        redundant_assignments=sum(r.redundant_assignments for r in ordered),
        busy_ticks=dict(sorted(busy.items())),
        end_ticks=end,
    )
