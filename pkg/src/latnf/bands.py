"""Band partition of the spectrum into short, well-separated intervals.

The spectrum is covered by an initial segment (index 0) followed by numbered
bands.  Interval ``n+1`` must start at least ``2 n^(-d/beta)`` above the end
of interval ``n`` (n >= 1), and every interval besides the initial segment is
at most 2 wide.  Construction is greedy left to right; when the greedy rule
cannot satisfy an invariant on a given truncation, the partition is returned
with the violation recorded as a diagnostic rather than raised.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

from .frequencies import SpectrumTable
from .lattice import Point


@dataclass(frozen=True, eq=False)
class BandPartition:
    """Closed intervals ``[lo, hi]``; index 0 is the initial segment."""

    intervals: Tuple[Tuple[float, float], ...]
    dim: int
    beta: float
    violations: Tuple[str, ...] = ()

    @property
    def nbands(self) -> int:
        return len(self.intervals)

    def gap_floor(self, n: int) -> float:
        """Required clearance above band ``n`` (n >= 1)."""
        if n < 1:
            raise ValueError("the gap rule applies to numbered bands only")
        return 2.0 * n ** (-self.dim / self.beta)

    def width(self, n: int) -> float:
        lo, hi = self.intervals[n]
        return hi - lo


def band_partition(table: SpectrumTable, dim: int = None, beta: float = None) -> BandPartition:
    """Greedy left-to-right banding of the tabulated spectrum.

    A new interval opens when the next distinct frequency clears the gap rule
    for the current band index, or when extending would stretch the band past
    width 2 (the latter case records a gap violation: diagnostics, not error).
    """
    if dim is None:
        dim = table.lattice.dim
    if beta is None:
        beta = table.beta
    distinct = sorted(set(float(v) for v in table.omegas))
    if not distinct:
        return BandPartition(intervals=(), dim=dim, beta=beta)
    intervals = [(distinct[0], distinct[0])]  # initial segment closes eagerly
    violations = []
    n = 0  # index of the last closed band
    i = 1
    while i < len(distinct):
        n += 1
        required = 2.0 * n ** (-dim / beta)
        lo = hi = distinct[i]
        i += 1
        while i < len(distinct):
            gap = distinct[i] - hi
            if gap >= required:
                break
            if distinct[i] - lo > 2.0:
                violations.append(
                    f"gap {gap:.6g} between bands {n} and {n + 1} is below the "
                    f"required {required:.6g} (band {n} closed at width cap)"
                )
                break
            hi = distinct[i]
            i += 1
        intervals.append((lo, hi))
    return BandPartition(
        intervals=tuple(intervals), dim=dim, beta=beta, violations=tuple(violations)
    )


def band_of(partition: BandPartition, omega: float) -> int:
    """Index of the closed interval containing ``omega`` (0 = initial segment)."""
    om = float(omega)
    starts = _interval_starts(partition)
    i = bisect.bisect_right(starts, om) - 1
    if i >= 0:
        lo, hi = partition.intervals[i]
        if lo <= om <= hi:
            return i
    raise ValueError(f"frequency {omega} is not covered by any band")


@lru_cache(maxsize=None)
def _interval_starts(partition: BandPartition) -> tuple:
    return tuple(lo for lo, _ in partition.intervals)


@lru_cache(maxsize=None)
def band_map(table: SpectrumTable, partition: BandPartition) -> Dict[Point, int]:
    """Band index of every tabulated point (cached)."""
    return {p: band_of(partition, float(om)) for p, om in zip(table.points, table.omegas)}


@dataclass(frozen=True)
class BandDiagnostics:
    widths_ok: bool
    gaps_ok: bool
    linear_growth_ok: bool  # informational: interval n+1 starts below 3n
    violations: Tuple[str, ...]


def check_band_invariants(partition: BandPartition) -> BandDiagnostics:
    """Exact check of the width and gap invariants; growth bound reported only."""
    violations = []
    widths_ok = True
    for n in range(1, partition.nbands):
        if partition.width(n) > 2.0:
            widths_ok = False
            violations.append(f"band {n} has width {partition.width(n):.6g} > 2")
    gaps_ok = True
    linear_ok = True
    for n in range(1, partition.nbands - 1):
        gap = partition.intervals[n + 1][0] - partition.intervals[n][1]
        if gap < partition.gap_floor(n):
            gaps_ok = False
            violations.append(
                f"gap above band {n} is {gap:.6g} < {partition.gap_floor(n):.6g}"
            )
        if partition.intervals[n + 1][0] >= 3.0 * n:
            linear_ok = False
    return BandDiagnostics(
        widths_ok=widths_ok,
        gaps_ok=gaps_ok,
        linear_growth_ok=linear_ok,
        violations=tuple(violations),
    )
