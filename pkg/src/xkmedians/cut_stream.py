"""Exponential-clock cut streams with lazy first-arrival realization.

Candidate cuts around an anchor form a marked Poisson process: arrival
rate 1 overall (divided by a normalizer N), each arrival carrying a
uniform coordinate, a uniform sign and an offset theta with theta^p
uniform on [0, N].  Splitting by (coordinate, sign) gives 2d independent
substreams; on a substream the arrival rate of offsets in (a, b] is
(b^p - a^p) / (2 d N).

A substream is realized lazily: for each queried offset y we store the
earliest event in (0, y].  A query between stored offsets either
inherits the right neighbor's event (when that event's offset already
covers y) or samples a fresh event for the uncovered atom: its offset
has theta^p uniform on the atom, and its timestamp is the right
neighbor's timestamp plus an independent exponential wait (memoryless
extension; beyond the frontier the wait starts at time zero).  The
resulting first arrivals are distributed exactly as in a direct
simulation of the stream, which `brute_force_stream_prefix` provides as
an independent testing oracle.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Cut, XkmediansError
from .rng import RngHandle

__all__ = [
    "CutEvent",
    "SubstreamIndex",
    "EarliestCutIndex",
    "new_index",
    "get_earliest_cut",
    "extend_substream",
    "brute_force_stream_prefix",
    "oracle_earliest_cut",
]


@dataclass(frozen=True)
class CutEvent:
    coordinate: int
    sign: int
    offset: float  # distance from the anchor along the axis, > 0
    timestamp: float


class SubstreamIndex:
    """Earliest-event index for one (coordinate, sign) substream."""

    def __init__(self, coordinate: int, sign: int, anchor_coord: float,
                 p: float, d: int, normalizer: float):
        self.coordinate = coordinate
        self.sign = sign
        self.anchor_coord = float(anchor_coord)
        self.p = float(p)
        self._lam0 = 1.0 / (2.0 * d)
        self._norm = float(normalizer)
        self._ys: list[float] = []            # queried offsets, ascending
        self._events: list[tuple[float, float]] = []  # (offset, timestamp) per y

    @property
    def frontier(self) -> float:
        return self._ys[-1] if self._ys else 0.0

    @property
    def entries(self) -> list[tuple[float, float, float]]:
        return [(y, ev[0], ev[1]) for y, ev in zip(self._ys, self._events)]

    def _rate(self, a: float, b: float) -> float:
        return self._lam0 * (b**self.p - a**self.p) / self._norm

    def query(self, y: float, rng: np.random.Generator) -> tuple[float, float]:
        """Earliest event in (0, y] as (offset, timestamp); realizes lazily."""
        if not y > 0.0:
            raise XkmediansError(f"substream query needs offset > 0, got {y}")
        pos = bisect_left(self._ys, y)
        if pos < len(self._ys) and self._ys[pos] == y:
            return self._events[pos]
        if pos < len(self._ys):
            right_off, right_time = self._events[pos]
            if right_off <= y:
                # The right neighbor's earliest event already separates y.
                self._ys.insert(pos, y)
                self._events.insert(pos, (right_off, right_time))
                return right_off, right_time
            base = right_time  # (prev, y] holds no event before right_time
        else:
            base = 0.0  # beyond the frontier: untouched territory
        prev = self._ys[pos - 1] if pos > 0 else 0.0
        lam = self._rate(prev, y)
        cand_time = base + rng.exponential(1.0 / lam)
        prev_p, y_p = prev**self.p, y**self.p
        cand_off = min(rng.uniform(prev_p, y_p) ** (1.0 / self.p), y)
        while not cand_off > prev:  # zero-measure boundary draws
            cand_off = min(rng.uniform(prev_p, y_p) ** (1.0 / self.p), y)
        if pos > 0 and self._events[pos - 1][1] <= cand_time:
            event = self._events[pos - 1]
        else:
            event = (cand_off, cand_time)
        self._ys.insert(pos, y)
        self._events.insert(pos, event)
        return event

    def window_scan(self, lo: float, hi: float, rng: np.random.Generator
                    ) -> tuple[Optional[tuple[float, float]], float]:
        """Inspect the offset window (lo, hi] without fresh realization.

        Between consecutive stored offsets the state is derivable: the
        right entry's event either lies inside that atom (its realized
        first arrival) or covers it from below, in which case the atom
        is only known to be clean before that entry's timestamp.
        Returns (earliest realized event inside the window or None,
        smallest clean-until bound among unrealized atoms in it).  Only
        the window's endpoints are realized (ordinary prefix queries).
        """
        if not 0.0 <= lo < hi:
            raise XkmediansError(f"bad window ({lo}, {hi}]")
        if lo > 0.0:
            self.query(lo, rng)
        self.query(hi, rng)
        start = bisect_left(self._ys, lo) + 1 if lo > 0.0 else 0
        stop = bisect_left(self._ys, hi)
        best: Optional[tuple[float, float]] = None
        min_clean = np.inf
        prev = lo
        for j in range(start, stop + 1):
            off, ts = self._events[j]
            if off > prev:  # realized first arrival of atom (prev, ys[j]]
                if best is None or ts < best[1]:
                    best = (off, ts)
            else:
                min_clean = min(min_clean, ts)
            prev = self._ys[j]
        return best, min_clean


class EarliestCutIndex:
    """Per-anchor bundle of 2d substreams with a private rng stream."""

    def __init__(self, anchor: np.ndarray, p: float, rng: RngHandle,
                 normalizer: float):
        if p < 1.0:
            raise XkmediansError(f"p must be >= 1, got {p}")
        if not normalizer > 0:
            raise XkmediansError("normalizer must be positive")
        self.anchor = np.asarray(anchor, dtype=np.float64)
        self.p = float(p)
        self.normalizer = float(normalizer)
        self.d = self.anchor.shape[0]
        self._gen = rng.generator
        self.substreams = {
            (i, s): SubstreamIndex(i, s, self.anchor[i], p, self.d, normalizer)
            for i in range(self.d)
            for s in (-1, 1)
        }

    def query_substream(self, coordinate: int, sign: int, y: float
                        ) -> tuple[float, float]:
        return self.substreams[(coordinate, sign)].query(y, self._gen)

    def earliest_event(self, c: np.ndarray
                       ) -> Optional[tuple[float, int, int, float]]:
        """Minimum-timestamp event separating c from the anchor.

        Returned as (timestamp, coordinate, sign, offset); None when c
        equals the anchor exactly.  Coordinates where c matches the
        anchor are skipped: no axis cut there can separate the pair.
        """
        c = np.asarray(c, dtype=np.float64)
        best: Optional[tuple[float, int, int, float]] = None
        for i in range(self.d):
            y = float(c[i] - self.anchor[i])
            if y == 0.0:
                continue
            sign = 1 if y > 0 else -1
            off, ts = self.query_substream(i, sign, abs(y))
            key = (ts, i, sign, off)
            if best is None or key < best:
                best = key
        return best

    def get_earliest_cut(self, c: np.ndarray) -> tuple[Cut, float]:
        best = self.earliest_event(np.asarray(c, dtype=np.float64))
        if best is None:
            raise XkmediansError("no separating cut exists: point equals anchor")
        ts, i, sign, off = best
        cut = Cut(i, float(self.anchor[i] + sign * off), sign, ts)
        return cut, ts

    def to_debug_dict(self) -> dict:
        return {
            f"{i},{s:+d}": [
                {"query": y, "offset": off, "timestamp": ts}
                for y, off, ts in sub.entries
            ]
            for (i, s), sub in sorted(self.substreams.items())
        }


def new_index(anchor, p: float, rng: RngHandle, normalizer: float
              ) -> EarliestCutIndex:
    return EarliestCutIndex(np.asarray(anchor, dtype=np.float64), p, rng, normalizer)


def get_earliest_cut(index: EarliestCutIndex, c) -> tuple[Cut, float]:
    return index.get_earliest_cut(np.asarray(c, dtype=np.float64))


def extend_substream(s: SubstreamIndex, y: float, rng: RngHandle
                     ) -> tuple[float, float]:
    return s.query(float(y), rng.generator)


def brute_force_stream_prefix(anchor, p: float, horizon: float, rng: RngHandle,
                              normalizer: float) -> list[CutEvent]:
    """Direct simulation of the global cut stream up to a time horizon.

    Serves as the independent oracle for the lazy index: unit-rate
    exponential inter-arrival gaps, each event marked with a uniform
    coordinate, a uniform sign and theta^p uniform on [0, N].
    """
    if not horizon > 0:
        raise XkmediansError("horizon must be positive")
    anchor = np.asarray(anchor, dtype=np.float64)
    d = anchor.shape[0]
    gen = rng.generator
    times: list[float] = []
    t = 0.0
    chunk = max(16, int(horizon) + 1)
    while t <= horizon:
        gaps = gen.exponential(1.0, chunk)
        for g in gaps:
            t += g
            if t > horizon:
                break
            times.append(t)
    m = len(times)
    coords = gen.integers(0, d, m)
    signs = gen.integers(0, 2, m) * 2 - 1
    offsets = (gen.uniform(0.0, normalizer, m)) ** (1.0 / p)
    return [
        CutEvent(int(coords[j]), int(signs[j]), float(offsets[j]), times[j])
        for j in range(m)
    ]


def oracle_earliest_cut(events: list[CutEvent], anchor, c
                        ) -> Optional[tuple[Cut, float]]:
    """Linear scan for the first event separating c from the anchor.

    Returns None when no event within the simulated horizon separates
    the pair ("beyond horizon").
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    diff = c - anchor
    for ev in events:
        y = diff[ev.coordinate]
        if y == 0.0:
            continue
        if (1 if y > 0 else -1) == ev.sign and ev.offset <= abs(y):
            cut = Cut(ev.coordinate,
                      float(anchor[ev.coordinate] + ev.sign * ev.offset),
                      ev.sign, ev.timestamp)
            return cut, ev.timestamp
    return None
