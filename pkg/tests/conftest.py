import random
from collections import defaultdict, deque
from fractions import Fraction

import pytest

from taskfarm.protocol import (BlockCouple, NewRun, OutputCouple, Request, Role,
                               Sleep, SlotAck, Stop, WorkCouple)
from taskfarm.simnet import Crash, Rejoin, Scenario, Slowdown, run_scenario
from taskfarm.simnet.trace import Detect, Straggler


def random_faults(seed, n=4, horizon=300):
    """Crash/slowdown/rejoin schedule that never touches one designated survivor.

    The survivor may be slowed down but always finishes its blocks, so at
    every instant at least one worker is alive and making progress.
    """
    rng = random.Random(seed)
    survivor = rng.randrange(1, n + 1)
    faults = []
    for j in range(1, n + 1):
        if j == survivor:
            if rng.random() < 0.3:
                start = rng.randrange(horizon)
                faults.append(Slowdown(j, Fraction(rng.randint(2, 6)), start,
                                       start + rng.randint(1, 100)))
            continue
        roll = rng.random()
        if roll < 0.45:
            at = rng.randrange(horizon)
            faults.append(Crash(j, at))
            if rng.random() < 0.5:
                faults.append(Rejoin(j, at + rng.randint(1, 150)))
        elif roll < 0.85:
            start = rng.randrange(horizon)
            until = rng.choice([None, start + rng.randint(1, 200)])
            faults.append(Slowdown(j, Fraction(rng.randint(2, 12), rng.randint(1, 2)) + 1,
                                   start, until))
    return tuple(faults)


def freshness_replay(trace, m):
    """Rebuild the pick-counts from message records alone.

    Returns a list of violations of the minimum-count rule and of brand-new
    exclusivity. The i-th Request from worker j is answered by the i-th
    WorkCouple/Sleep on the dispatcher->worker j channel (channels are FIFO).
    """
    replies = defaultdict(deque)
    for rec in trace.messages():
        if rec.sender.role is Role.DISPATCHER and rec.receiver.role is Role.WORKER:
            if isinstance(rec.body, (WorkCouple, Sleep)):
                replies[rec.receiver.index].append(rec.body)
    s = [None] * m
    problems = []
    picks = 0
    for i, rec in enumerate(trace.messages()):
        if rec.receiver.role is not Role.DISPATCHER:
            continue
        body = rec.body
        if isinstance(body, Stop):
            break
        if isinstance(body, (BlockCouple, SlotAck)):
            s[body.k - 1] = None
        elif isinstance(body, NewRun):
            s = [0] * m
        elif isinstance(body, Request):
            reply = replies[body.j].popleft()
            enabled = [c for c in s if c is not None]
            if isinstance(reply, Sleep):
                if enabled:
                    problems.append((i, "Sleep while blocks enabled", list(s)))
                continue
            picks += 1
            before = s[reply.k - 1]
            if before is None or before != min(enabled):
                problems.append((i, f"block {reply.k} at {before}, minimum {min(enabled, default=None)}", list(s)))
                continue
            s[reply.k - 1] += 1
            if s[reply.k - 1] >= 2 and 0 in s:
                problems.append((i, f"block {reply.k} reached 2 while a brand-new block remains", list(s)))
    leftover = sum(len(q) for q in replies.values())
    if leftover:
        problems.append((None, f"{leftover} replies without a request", None))
    return problems, picks


def collection_check(result, m):
    """Exactly-once collection, judged from the trace."""
    trace = result.trace
    acks = [r.body.k for r in trace.messages()
            if r.sender.role is Role.COLLECTOR and isinstance(r.body, SlotAck)]
    runs = len(result.artifacts)
    problems = []
    if len(acks) != runs * m:
        problems.append(f"{len(acks)} SlotAcks for {runs} completed runs of {m} blocks")
    for r in range(runs):
        chunk = acks[r * m:(r + 1) * m]
        if sorted(chunk) != list(range(1, m + 1)):
            problems.append(f"run {r + 1}: SlotAcks {chunk}")
    outputs = 0
    stopped = False
    for rec in trace:
        if rec.is_event:
            continue
        if rec.receiver.role is Role.COLLECTOR:
            if isinstance(rec.body, Stop):
                stopped = True
            elif isinstance(rec.body, OutputCouple) and not stopped:
                outputs += 1
    detects = sum(1 for _ in trace.events(Detect))
    stragglers = sum(1 for _ in trace.events(Straggler))
    if outputs != len(acks) + detects + stragglers:
        problems.append(f"{outputs} outputs != {len(acks)} accepted + {detects} detected "
                        f"+ {stragglers} stragglers")
    if detects != result.metrics.duplicate_outputs:
        problems.append("duplicate count disagrees with detect records")
    return problems


@pytest.fixture(scope="session")
def suite_reference():
    base = Scenario(m=8, n=4, image_count=3, image_size=64, image_seed=11, seed=0)
    return base, run_scenario(base)
