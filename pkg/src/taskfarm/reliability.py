"""Series and parallel reliability of a farm of ``n`` identical workers.

``r`` is the probability that one worker has not failed at a fixed
evaluation time. Failures are assumed independent.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable

import numpy as np

from .errors import FarmError


class InvalidCount(FarmError, ValueError):
    pass


def _check(r: float, n: int) -> None:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"reliability {r} outside [0, 1]")
    if n < 1:
        raise InvalidCount(f"worker count must be >= 1, got {n}")


def series_reliability(r: float, n: int) -> float:
    """All ``n`` workers must survive: ``r**n``."""
    _check(r, n)
    return r ** n


def parallel_reliability(r: float, n: int) -> float:
    """At least one of ``n`` workers survives: ``1 - (1 - r)**n``."""
    _check(r, n)
    if n == 1:
        # avoids the rounding in 1 - (1 - r)
        return r
    return 1.0 - (1.0 - r) ** n


def emit_curves(n_values: Iterable[int], samples: int) -> str:
    """CSV of ``r,n,series,parallel`` over a uniform grid of ``samples`` points in [0, 1]."""
    n_values = list(n_values)
    if samples < 2:
        raise ValueError("samples must be >= 2")
    for n in n_values:
        if n < 1:
            raise InvalidCount(f"worker count must be >= 1, got {n}")
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["r", "n", "series", "parallel"])
    for n in n_values:
        for i in range(samples):
            r = i / (samples - 1)
            out.writerow([repr(r), n, repr(series_reliability(r, n)),
                          repr(parallel_reliability(r, n))])
    return buf.getvalue()


def monte_carlo_parallel(r: float, n: int, trials: int, seed=None,
                         batch: int = 1 << 16) -> float:
    """Fraction of trials in which at least one of ``n`` Bernoulli(``r``) workers survives."""
    _check(r, n)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    survived = 0
    left = trials
    while left:
        size = min(batch, left)
        alive = rng.random((size, n)) < r
        survived += int(alive.any(axis=1).sum())
        left -= size
    return survived / trials
