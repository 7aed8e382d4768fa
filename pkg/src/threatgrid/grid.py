"""Dynamic occupancy grid data model and the ``DOGM v1`` text frame format.

A frame stores its cells column-wise as numpy arrays (one array per state
field) so that masking a 300x300 grid is a handful of vectorized operations.
Single cells are materialized as :class:`CellState` on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

DEFAULT_CELL_SIZE = 0.2  # m
MASS_TOL = 1e-12


class FrameError(ValueError):
    """Invalid frame content."""


class FrameParseError(FrameError):
    """Base class for errors raised while reading the text frame format."""

    def __init__(self, message: str, line: int | None = None, cell: int | None = None):
        self.line = line
        self.cell = cell
        where = []
        if line is not None:
            where.append(f"line {line}")
        if cell is not None:
            where.append(f"cell {cell}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class HeaderError(FrameParseError):
    pass


class TruncatedFrameError(FrameParseError):
    pass


class CellFormatError(FrameParseError):
    pass


class MassConstraintError(FrameParseError):
    pass


class CovarianceError(FrameParseError):
    pass


@dataclass(frozen=True)
class CellState:
    """State of one grid cell.

    ``vel_cov`` holds the upper triangle ``(xx, xy, yy)`` of the symmetric
    2x2 velocity covariance.
    """

    m_occ: float
    m_free: float
    pos: tuple[float, float]
    vel: tuple[float, float]
    vel_cov: tuple[float, float, float]

    def __post_init__(self):
        msg = _mass_violation(self.m_occ, self.m_free)
        if msg:
            raise FrameError(msg)
        msg = _cov_violation(*self.vel_cov)
        if msg:
            raise FrameError(msg)

    @property
    def speed(self) -> float:
        return math.hypot(*self.vel)

    @property
    def cov_matrix(self) -> np.ndarray:
        xx, xy, yy = self.vel_cov
        return np.array([[xx, xy], [xy, yy]])


def _mass_violation(m_occ: float, m_free: float) -> str | None:
    if not (math.isfinite(m_occ) and math.isfinite(m_free)):
        return "non-finite belief mass"
    if m_occ < 0 or m_free < 0:
        return f"negative belief mass (m_occ={m_occ}, m_free={m_free})"
    if m_occ + m_free > 1 + MASS_TOL:
        return f"mass constraint violated: m_occ + m_free = {m_occ + m_free} > 1"
    return None


def _cov_violation(xx: float, xy: float, yy: float) -> str | None:
    if not all(math.isfinite(v) for v in (xx, xy, yy)):
        return "non-finite velocity covariance"
    if xx < 0 or yy < 0:
        return "velocity covariance has a negative diagonal"
    # relative slack: xx*yy and xy**2 round independently
    if xx * yy - xy * xy < -1e-12 * max(1.0, xx * yy):
        return "velocity covariance has a negative determinant"
    return None


def occupancy_probability(cell: CellState) -> float:
    """Pignistic occupancy probability: occupied mass plus half the unknown mass."""
    return cell.m_occ + 0.5 * (1.0 - cell.m_occ - cell.m_free)


def occupancy_probability_grid(m_occ: np.ndarray, m_free: np.ndarray) -> np.ndarray:
    return m_occ + 0.5 * (1.0 - m_occ - m_free)


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class GridFrame:
    """Timestamped, immutable 2D grid of cell states.

    Args:
        timestamp: seconds since scenario start.
        origin: world position of the center of cell (0, 0).
        cell_size: edge length ``a`` of a square cell, meters.
        m_occ, m_free: ``(height, width)`` belief masses.
        vel: ``(height, width, 2)`` cell velocities.
        vel_cov: ``(height, width, 3)`` covariance upper triangles ``(xx, xy, yy)``.

    Cell ``(row, col)`` sits at ``origin + (col * a, row * a)``.
    """

    __slots__ = ("timestamp", "origin", "cell_size", "m_occ", "m_free", "vel", "vel_cov", "_positions")

    def __init__(self, timestamp, origin, cell_size, m_occ, m_free, vel, vel_cov, validate=True):
        self.timestamp = float(timestamp)
        self.origin = (float(origin[0]), float(origin[1]))
        self.cell_size = float(cell_size)
        self.m_occ = _frozen(m_occ)
        self.m_free = _frozen(m_free)
        self.vel = _frozen(vel)
        self.vel_cov = _frozen(vel_cov)
        self._positions = None
        if validate:
            self.validate()

    @classmethod
    def empty(cls, width: int, height: int, origin=(0.0, 0.0), cell_size=DEFAULT_CELL_SIZE, timestamp=0.0):
        """All-unknown frame with zero velocity."""
        return cls(
            timestamp, origin, cell_size,
            np.zeros((height, width)), np.zeros((height, width)),
            np.zeros((height, width, 2)), np.zeros((height, width, 3)),
        )

    @property
    def height(self) -> int:
        return self.m_occ.shape[0]

    @property
    def width(self) -> int:
        return self.m_occ.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.m_occ.shape

    def validate(self) -> None:
        h, w = self.m_occ.shape if self.m_occ.ndim == 2 else (None, None)
        if h is None or h < 1 or w < 1:
            raise FrameError("mass arrays must be non-empty 2D grids")
        if self.m_free.shape != (h, w) or self.vel.shape != (h, w, 2) or self.vel_cov.shape != (h, w, 3):
            raise FrameError("cell arrays disagree in shape")
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise FrameError(f"timestamp must be finite and non-negative, got {self.timestamp}")
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise FrameError(f"cell size must be positive, got {self.cell_size}")
        if not all(math.isfinite(v) for v in self.origin):
            raise FrameError("origin must be finite")
        bad = ~np.isfinite(self.vel).all(axis=2)
        if bad.any():
            raise FrameError(f"cell {int(np.flatnonzero(bad)[0])}: non-finite velocity")
        mo, mf = self.m_occ.ravel(), self.m_free.ravel()
        bad = ~np.isfinite(mo) | ~np.isfinite(mf) | (mo < 0) | (mf < 0) | (mo + mf > 1 + MASS_TOL)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise MassConstraintError(_mass_violation(mo[i], mf[i]) or "mass constraint", cell=i)
        cov = self.vel_cov.reshape(-1, 3)
        xx, xy, yy = cov[:, 0], cov[:, 1], cov[:, 2]
        with np.errstate(invalid="ignore"):
            bad = ~np.isfinite(cov).all(axis=1) | (xx < 0) | (yy < 0) | (
                xx * yy - xy * xy < -1e-12 * np.maximum(1.0, xx * yy))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise CovarianceError(_cov_violation(*cov[i]) or "covariance", cell=i)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise IndexError(f"cell ({row}, {col}) outside {self.height}x{self.width} grid")
        return (self.origin[0] + col * self.cell_size, self.origin[1] + row * self.cell_size)

    @property
    def positions(self) -> np.ndarray:
        """``(height, width, 2)`` cell centers, computed once per frame."""
        if self._positions is None:
            a = self.cell_size
            xs = self.origin[0] + np.arange(self.width) * a
            ys = self.origin[1] + np.arange(self.height) * a
            pos = np.empty((self.height, self.width, 2))
            pos[..., 0] = xs[None, :]
            pos[..., 1] = ys[:, None]
            pos.setflags(write=False)
            self._positions = pos
        return self._positions

    def cell(self, row: int, col: int) -> CellState:
        pos = self.cell_center(row, col)
        return CellState(
            float(self.m_occ[row, col]), float(self.m_free[row, col]), pos,
            (float(self.vel[row, col, 0]), float(self.vel[row, col, 1])),
            tuple(float(v) for v in self.vel_cov[row, col]),
        )

    @property
    def cells(self) -> list[CellState]:
        """Row-major list of all cells. Slow on large grids; prefer the arrays."""
        return [self.cell(r, c) for r in range(self.height) for c in range(self.width)]

    def occupancy(self) -> np.ndarray:
        return occupancy_probability_grid(self.m_occ, self.m_free)

    def __eq__(self, other):
        if not isinstance(other, GridFrame):
            return NotImplemented
        return (
            self.timestamp == other.timestamp
            and self.origin == other.origin
            and self.cell_size == other.cell_size
            and self.shape == other.shape
            and np.array_equal(self.m_occ, other.m_occ)
            and np.array_equal(self.m_free, other.m_free)
            and np.array_equal(self.vel, other.vel)
            and np.array_equal(self.vel_cov, other.vel_cov)
        )

    __hash__ = None

    def __repr__(self):
        return (f"GridFrame(t={self.timestamp}, origin={self.origin}, a={self.cell_size}, "
                f"{self.width}x{self.height})")


# ---------------------------------------------------------------------------
# text format

MAGIC = "DOGM"
VERSION = "v1"


def _num(x: float) -> str:
    return repr(float(x))


def format_header(magic: str, timestamp: float, origin, cell_size: float, width: int, height: int) -> str:
    return " ".join([magic, VERSION, _num(timestamp), _num(origin[0]), _num(origin[1]),
                     _num(cell_size), str(width), str(height)])


def serialize_frame(frame: GridFrame) -> str:
    """Render a frame as ``DOGM v1`` text. Output ends with a newline."""
    lines = [format_header(MAGIC, frame.timestamp, frame.origin, frame.cell_size, frame.width, frame.height)]
    cols = np.column_stack([
        frame.m_occ.ravel(), frame.m_free.ravel(),
        frame.vel.reshape(-1, 2), frame.vel_cov.reshape(-1, 3),
    ])
    # float.__repr__ is the shortest string that round-trips exactly
    lines.extend(" ".join(map(repr, row)) for row in cols.tolist())
    return "\n".join(lines) + "\n"


def serialize_frames(frames) -> str:
    return "".join(serialize_frame(f) for f in frames)


def parse_header(line: str, lineno: int, magic: str = MAGIC):
    parts = line.split()
    if len(parts) != 8 or parts[0] != magic or parts[1] != VERSION:
        raise HeaderError(f"expected '{magic} {VERSION} <timestamp> <origin_x> <origin_y> "
                          f"<cell_size> <width> <height>', got {line.strip()!r}", line=lineno)
    try:
        t, ox, oy, a = (float(v) for v in parts[2:6])
        w, h = int(parts[6]), int(parts[7])
    except ValueError as exc:
        raise HeaderError(f"malformed header number: {exc}", line=lineno) from None
    if w < 1 or h < 1:
        raise HeaderError(f"grid dimensions must be positive, got {w}x{h}", line=lineno)
    if not (math.isfinite(t) and t >= 0):
        raise HeaderError(f"timestamp must be finite and non-negative, got {t}", line=lineno)
    if not (math.isfinite(a) and a > 0):
        raise HeaderError(f"cell size must be positive, got {a}", line=lineno)
    if not (math.isfinite(ox) and math.isfinite(oy)):
        raise HeaderError("origin must be finite", line=lineno)
    return t, (ox, oy), a, w, h


def iter_frames(text: str) -> Iterator[GridFrame]:
    """Parse a concatenated stream of frames lazily, one frame at a time.

    Blank lines between frames are ignored. Errors carry the 1-based line
    number and, for cell lines, the row-major cell index.
    """
    lines = text.splitlines()
    i, n = 0, len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        t, origin, a, w, h = parse_header(lines[i], i + 1)
        header_line = i + 1
        count = w * h
        body = lines[i + 1:i + 1 + count]
        if len(body) < count:
            raise TruncatedFrameError(f"frame declares {count} cells but only {len(body)} follow",
                                      line=header_line, cell=len(body))
        data = _parse_cells(body, header_line)
        i += 1 + count
        yield GridFrame(
            t, origin, a,
            data[:, 0].reshape(h, w), data[:, 1].reshape(h, w),
            data[:, 2:4].reshape(h, w, 2), data[:, 4:7].reshape(h, w, 3),
            validate=False,
        )


def _parse_cells(body: list[str], header_line: int) -> np.ndarray:
    rows = [line.split() for line in body]
    for k, parts in enumerate(rows):
        if len(parts) != 7:
            if parts and parts[0] == MAGIC:
                raise TruncatedFrameError(f"frame declares {len(body)} cells but only {k} follow",
                                          line=header_line + 1 + k, cell=k)
            raise CellFormatError(f"expected 7 numbers, got {len(parts)}", line=header_line + 1 + k, cell=k)
    try:
        data = np.array(rows, dtype=float)
    except ValueError:
        for k, parts in enumerate(rows):
            try:
                [float(v) for v in parts]
            except ValueError as exc:
                raise CellFormatError(str(exc), line=header_line + 1 + k, cell=k) from None
        raise
    data = data.reshape(len(body), 7)
    mo, mf = data[:, 0], data[:, 1]
    cov = data[:, 4:7]
    with np.errstate(invalid="ignore"):
        bad = (~np.isfinite(data).all(axis=1) | (mo < 0) | (mf < 0) | (mo + mf > 1 + MASS_TOL)
               | (cov[:, 0] < 0) | (cov[:, 2] < 0)
               | (cov[:, 0] * cov[:, 2] - cov[:, 1] ** 2 < -1e-12 * np.maximum(1.0, cov[:, 0] * cov[:, 2])))
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        line = header_line + 1 + k
        msg = _mass_violation(mo[k], mf[k])
        if msg:
            raise MassConstraintError(msg, line=line, cell=k)
        msg = _cov_violation(*cov[k])
        if msg:
            raise CovarianceError(msg, line=line, cell=k)
        raise CellFormatError("non-finite velocity", line=line, cell=k)
    return data


def parse_frames(text: str) -> list[GridFrame]:
    return list(iter_frames(text))


def parse_frame(text: str | bytes) -> GridFrame:
    """Parse exactly one frame."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    frames = parse_frames(text)
    if len(frames) != 1:
        raise HeaderError(f"expected exactly one frame, found {len(frames)}")
    return frames[0]
