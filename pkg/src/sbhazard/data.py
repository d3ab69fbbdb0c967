"""Run-off triangles, event samples and discrete occurrence/exposure grids.

Conventions used throughout the package:

* A forward triangle stores ``counts[t, z]`` with ``t`` the reporting-delay
  cell and ``z`` the underwriting cell.  Observed cells satisfy
  ``t + z <= r0 - 1``.
* Reversing time maps delay cell ``t`` to ``r = r0 - 1 - t``.  In reversed
  coordinates the observed cells satisfy ``z <= r`` and right truncation of
  the delay becomes left truncation of the reversed time.
* Grids are indexed ``[reversed time, underwriting]`` so that axis ``k`` of
  every surface matches component ``k`` of a multiplicative fit.  All
  smoothing and integration happens in cell units (cell width 1).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "RunoffTriangle",
    "EventSample",
    "OccurrenceExposureGrid",
    "TriangleFormatError",
    "bin_events",
    "reverse_time",
    "build_occurrence_exposure",
    "occurrence_exposure_from_events",
    "load_triangle",
    "save_triangle",
    "load_events",
    "save_events",
]


class TriangleFormatError(ValueError):
    """Raised when a triangle or event file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _forward_support(r0: int) -> NDArray[np.bool_]:
    t, z = np.indices((r0, r0))
    return t + z <= r0 - 1


def _reversed_support(r0: int) -> NDArray[np.bool_]:
    r, z = np.indices((r0, r0))
    return z <= r


@dataclass(frozen=True)
class RunoffTriangle:
    """Claim counts on a triangular support.

    Parameters
    ----------
    counts : ndarray of int, shape (r0, r0)
        ``counts[t, z]``; in reversed form ``counts[r, z]``.
    r0 : int
        Number of cells along each axis.
    bin_width : float
        Time units per cell.
    reversed : bool
        Whether the first axis is reversed time.
    """

    counts: NDArray[np.int64]
    r0: int
    bin_width: float = 1.0
    reversed: bool = False

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if self.r0 < 1:
            raise ValueError("r0 must be at least 1")
        if counts.shape != (self.r0, self.r0):
            raise ValueError(f"counts must have shape ({self.r0}, {self.r0}), got {counts.shape}")
        if not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ValueError("counts must be integers")
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if np.any(counts[~self.support]):
            raise ValueError("counts found outside the triangular support")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def support(self) -> NDArray[np.bool_]:
        return _reversed_support(self.r0) if self.reversed else _forward_support(self.r0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def horizon(self) -> float:
        return self.r0 * self.bin_width

    def __eq__(self, other):
        if not isinstance(other, RunoffTriangle):
            return NotImplemented
        return (
            self.r0 == other.r0
            and self.bin_width == other.bin_width
            and self.reversed == other.reversed
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None


@dataclass(frozen=True)
class EventSample:
    """Observed claims as (delay, underwriting) pairs in time units.

    Every event satisfies ``delay >= 0``, ``underwriting >= 0`` and
    ``delay + underwriting <= horizon``.
    """

    delay: NDArray[np.float64]
    underwriting: NDArray[np.float64]
    horizon: float

    def __post_init__(self):
        delay = np.asarray(self.delay, dtype=float).reshape(-1)
        uw = np.asarray(self.underwriting, dtype=float).reshape(-1)
        if delay.shape != uw.shape:
            raise ValueError("delay and underwriting must have the same length")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        tol = 1e-9 * self.horizon
        bad = (delay < 0) | (uw < 0) | (delay + uw > self.horizon + tol) | ~np.isfinite(delay + uw)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(
                f"event {i} (delay={delay[i]!r}, underwriting={uw[i]!r}) lies outside "
                f"the triangle with horizon {self.horizon!r}"
            )
        delay.setflags(write=False)
        uw.setflags(write=False)
        object.__setattr__(self, "delay", delay)
        object.__setattr__(self, "underwriting", uw)

    def __len__(self):
        return self.delay.size


@dataclass(frozen=True)
class OccurrenceExposureGrid:
    """Paired occurrence and exposure surfaces in reversed-time coordinates.

    Arrays are indexed ``[r, z]`` (reversed time, underwriting), in cell
    units.  ``axes`` holds the cell-centre coordinates of each axis in time
    units.
    """

    occurrence: NDArray[np.float64]
    exposure: NDArray[np.float64]
    support: NDArray[np.bool_]
    bin_width: float = 1.0
    axes: tuple = field(default=())

    def __post_init__(self):
        occ = np.asarray(self.occurrence, dtype=float)
        exp_ = np.asarray(self.exposure, dtype=float)
        support = np.asarray(self.support, dtype=bool)
        if not (occ.shape == exp_.shape == support.shape):
            raise ValueError("occurrence, exposure and support must share a shape")
        if np.any(occ < 0) or np.any(exp_ < 0):
            raise ValueError("occurrence and exposure must be nonnegative")
        if np.any(occ[~support]) or np.any(exp_[~support]):
            raise ValueError("occurrence or exposure found outside the support")
        if not self.axes:
            axes = tuple((np.arange(n) + 0.5) * self.bin_width for n in occ.shape)
            object.__setattr__(self, "axes", axes)
        for a in (occ, exp_, support):
            a.setflags(write=False)
        object.__setattr__(self, "occurrence", occ)
        object.__setattr__(self, "exposure", exp_)
        object.__setattr__(self, "support", support)

    @property
    def shape(self):
        return self.occurrence.shape

    @property
    def n_events(self) -> float:
        return float(self.occurrence.sum())


def _grid_extent(horizon: float, bin_width: float) -> int:
    ratio = horizon / bin_width
    r0 = int(math.floor(ratio + 1e-9))
    if r0 < 1:
        raise ValueError("bin_width exceeds the horizon")
    if abs(ratio - r0) > 1e-9:
        warnings.warn(
            f"bin_width {bin_width} does not divide horizon {horizon}; "
            f"the partial final bin is dropped (r0={r0})",
            stacklevel=3,
        )
    return r0


def _cell_indices(sample: EventSample, bin_width: float, r0: int):
    t = np.floor(sample.delay / bin_width).astype(np.int64)
    z = np.floor(sample.underwriting / bin_width).astype(np.int64)
    # an event on the anti-diagonal corner of a cell belongs to the cell below it
    inside = sample.delay + sample.underwriting <= r0 * bin_width * (1 + 1e-9)
    edge = inside & (t + z >= r0)
    t = np.where(edge & (t > 0), t - 1, t)
    z = np.where(edge & (t + z >= r0), z - 1, z)
    keep = (t >= 0) & (z >= 0) & (t + z <= r0 - 1)
    return t, z, keep


def bin_events(sample: EventSample, bin_width: float) -> RunoffTriangle:
    """Aggregate events into a forward run-off triangle.

    Parameters
    ----------
    sample : EventSample
    bin_width : float
        Cell width in time units.  When it does not divide the horizon the
        partial final bin is dropped with a warning.

    Returns
    -------
    RunoffTriangle
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    r0 = _grid_extent(sample.horizon, bin_width)
    t, z, keep = _cell_indices(sample, bin_width, r0)
    dropped = np.flatnonzero(~keep)
    if dropped.size:
        exact = abs(sample.horizon / bin_width - r0) <= 1e-9
        if exact:
            i = int(dropped[0])
            raise ValueError(
                f"event {i} (delay={sample.delay[i]!r}, underwriting={sample.underwriting[i]!r}) "
                "falls outside the triangular support"
            )
        warnings.warn(f"{dropped.size} events in the dropped partial bin were discarded", stacklevel=2)
    counts = np.zeros((r0, r0), dtype=np.int64)
    np.add.at(counts, (t[keep], z[keep]), 1)
    return RunoffTriangle(counts, r0, bin_width)


def reverse_time(triangle: RunoffTriangle) -> RunoffTriangle:
    """Flip the delay axis, ``t -> r0 - 1 - t``.

    Applying the map twice returns the original triangle.
    """
    return RunoffTriangle(
        triangle.counts[::-1, :].copy(),
        triangle.r0,
        triangle.bin_width,
        reversed=not triangle.reversed,
    )


def build_occurrence_exposure(triangle: RunoffTriangle) -> OccurrenceExposureGrid:
    """Discrete occurrence and exposure from a run-off triangle.

    Occurrence is the reversed count surface.  Exposure at reversed cell
    ``r`` in underwriting row ``z`` is the number of claims of that row
    still at risk there, i.e. the tail sum of the reversed counts over
    ``r'' >= r``, restricted to the observable region ``z <= r``.

    A forward triangle is reversed first.
    """
    rev = triangle if triangle.reversed else reverse_time(triangle)
    occ = rev.counts.astype(float)
    tail = np.cumsum(occ[::-1, :], axis=0)[::-1, :]
    support = rev.support
    exposure = np.where(support, tail, 0.0)
    return OccurrenceExposureGrid(occ, exposure, support, rev.bin_width)


def occurrence_exposure_from_events(
    sample: EventSample, bin_width: float, censor_zero_delay: bool = False
) -> OccurrenceExposureGrid:
    """Occurrence and integrated exposure computed from exact event times.

    Each claim with underwriting time ``Z`` and reversed time
    ``T^R = horizon - delay`` is at risk on ``[Z, T^R]``.  The exposure of
    cell ``(r, z)`` is the total time at risk inside reversed cell ``r``
    for claims of underwriting cell ``z``, in cell units.  Unlike the
    count-based construction this does not assume that every claim is at
    risk over the whole of its entry and exit cells.

    With ``censor_zero_delay`` a claim reported at delay exactly zero keeps
    its exposure but adds no occurrence: its report falls on the closing
    edge of the reversed-time window ``[0, horizon)``.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    r0 = _grid_extent(sample.horizon, bin_width)
    t, z, keep = _cell_indices(sample, bin_width, r0)
    if np.any(~keep) and abs(sample.horizon / bin_width - r0) <= 1e-9:
        raise ValueError("event outside the triangular support")
    horizon = r0  # cell units
    entry = sample.underwriting[keep] / bin_width
    exit_ = np.clip(horizon - sample.delay[keep] / bin_width, entry, horizon)
    z = z[keep]
    r_out = (r0 - 1) - t[keep]

    occurrence = np.zeros((r0, r0))
    counted = sample.delay[keep] > 0 if censor_zero_delay else np.ones(z.size, dtype=bool)
    np.add.at(occurrence, (r_out[counted], z[counted]), 1.0)

    a_cell = np.minimum(np.floor(entry).astype(np.int64), r0 - 1)
    b_cell = np.minimum(np.floor(exit_).astype(np.int64), r0 - 1)
    exposure = np.zeros((r0 + 1, r0))
    same = a_cell == b_cell
    np.add.at(exposure, (a_cell[same], z[same]), exit_[same] - entry[same])
    a, b, zz = a_cell[~same], b_cell[~same], z[~same]
    np.add.at(exposure, (a, zz), a + 1 - entry[~same])
    np.add.at(exposure, (b, zz), exit_[~same] - b)
    # whole cells strictly between entry and exit cells, via a difference array
    diff = np.zeros((r0 + 1, r0))
    np.add.at(diff, (a + 1, zz), 1.0)
    np.add.at(diff, (b, zz), -1.0)
    exposure[:r0] += np.cumsum(diff, axis=0)[:r0]
    exposure = exposure[:r0]

    support = _reversed_support(r0)
    exposure = np.where(support, np.maximum(exposure, 0.0), 0.0)
    return OccurrenceExposureGrid(occurrence, exposure, support, bin_width)


# --- file formats ---------------------------------------------------------


def load_triangle(path, bin_width: float = 1.0) -> RunoffTriangle:
    """Read a forward triangle from CSV.

    Row ``i`` holds the counts of underwriting cell ``i`` for delay cells
    ``0 .. r0 - 1 - i``; trailing cells may be empty.  Lines starting with
    ``#`` are comments.  The number of data rows fixes ``r0``.
    """
    rows: list[tuple[int, list[str]]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            rows.append((lineno, next(csv.reader([stripped]))))
    r0 = len(rows)
    if r0 == 0:
        raise TriangleFormatError("no data rows")
    counts = np.zeros((r0, r0), dtype=np.int64)
    for z, (lineno, cells) in enumerate(rows):
        while cells and cells[-1].strip() == "":
            cells.pop()
        if len(cells) > r0:
            raise TriangleFormatError(f"row has {len(cells)} columns, expected at most {r0}", lineno)
        for t, cell in enumerate(cells):
            cell = cell.strip()
            if cell == "":
                if t <= r0 - 1 - z:
                    raise TriangleFormatError(f"missing count in column {t}", lineno)
                continue
            try:
                value = int(cell)
            except ValueError:
                raise TriangleFormatError(f"malformed count {cell!r} in column {t}", lineno) from None
            if value < 0:
                raise TriangleFormatError(f"negative count {value} in column {t}", lineno)
            if t + z > r0 - 1:
                if value != 0:
                    raise TriangleFormatError(
                        f"count in column {t} lies above the anti-diagonal", lineno
                    )
                continue
            counts[t, z] = value
        if len(cells) < r0 - z:
            raise TriangleFormatError(f"row has {len(cells)} columns, expected {r0 - z}", lineno)
    return RunoffTriangle(counts, r0, bin_width)


def save_triangle(triangle: RunoffTriangle, path) -> None:
    """Write a triangle in the format read by :func:`load_triangle`."""
    tri = reverse_time(triangle) if triangle.reversed else triangle
    buf = io.StringIO()
    buf.write(f"# r0={tri.r0} bin_width={tri.bin_width!r}\n")
    for z in range(tri.r0):
        row = [str(int(tri.counts[t, z])) for t in range(tri.r0 - z)]
        buf.write(",".join(row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def load_events(path, horizon: float) -> EventSample:
    """Read an event CSV with header ``delay,underwriting``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise TriangleFormatError("empty event file", 1) from None
        try:
            i_delay, i_uw = header.index("delay"), header.index("underwriting")
        except ValueError:
            raise TriangleFormatError("header must contain delay and underwriting", 1) from None
        delay, uw = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                delay.append(float(row[i_delay]))
                uw.append(float(row[i_uw]))
            except (ValueError, IndexError):
                raise TriangleFormatError(f"malformed event row {row!r}", lineno) from None
    try:
        return EventSample(np.array(delay), np.array(uw), horizon)
    except ValueError as err:
        raise TriangleFormatError(str(err)) from None


def save_events(sample: EventSample, path) -> None:
    buf = io.StringIO()
    buf.write("delay,underwriting\n")
    for d, u in zip(sample.delay, sample.underwriting):
        buf.write(f"{float(d)!r},{float(u)!r}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
