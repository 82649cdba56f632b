"""Uniform dyadic box grids over a root box.

Every cell of a cover at depth ``d`` is addressed by an integer multi-index
with entries in ``[0, 2**d)``.  Internally the active cells are kept as a
sorted array of packed 64-bit codes, axis 0 most significant, so that code
order equals lexicographic index order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, EmptySelection, TooDeep, UnknownId

ADDRESS_BITS = 60


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo, hi]``; ``periodic_axes`` is a bitmask."""

    lo: tuple
    hi: tuple
    periodic_axes: int = 0

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise ConfigurationError("lo and hi must be non-empty and of equal length")
        if not all(np.isfinite(lo + hi)):
            raise ConfigurationError("box bounds must be finite")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ConfigurationError(f"degenerate box: lo={lo} hi={hi}")
        if self.periodic_axes >> len(lo):
            raise ConfigurationError("periodic bit set beyond box dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.upper + self.lower)

    @property
    def periodic(self) -> np.ndarray:
        return np.array([bool(self.periodic_axes >> i & 1) for i in range(self.dimension)])

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.width))

    def wrap(self, points):
        """Reduce coordinates on periodic axes into ``[lo, hi)``."""
        pts = np.array(points, dtype=float, copy=True)
        per = self.periodic
        if per.any():
            lo, w = self.lower[per], self.width[per]
            pts[..., per] = lo + np.mod(pts[..., per] - lo, w)
        return pts

    def contains(self, points, atol: float = 0.0) -> np.ndarray:
        """Closed membership test (periodic axes always match)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = (pts >= self.lower - atol) & (pts <= self.upper + atol)
        inside[:, self.periodic] = True
        return inside.all(axis=1)

    def enlarged(self, factor: float) -> "Box":
        half = 0.5 * factor * self.width
        return Box(self.center - half, self.center + half, self.periodic_axes)

    def displacement(self, a, b) -> np.ndarray:
        """Componentwise ``b - a`` using the shortest wrap on periodic axes."""
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        per = self.periodic
        if per.any():
            w = self.width[per]
            d[..., per] = d[..., per] - w * np.round(d[..., per] / w)
        return d

    def distance(self, a, b) -> np.ndarray:
        return np.linalg.norm(self.displacement(a, b), axis=-1)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "periodic_axes": self.periodic_axes}

    @classmethod
    def from_dict(cls, data: dict) -> "Box":
        return cls(tuple(data["lo"]), tuple(data["hi"]), int(data.get("periodic_axes", 0)))


class BoxId(NamedTuple):
    depth: int
    index: tuple


def _check_depth(depth: int, dim: int) -> None:
    if depth < 0:
        raise ConfigurationError("depth must be non-negative")
    if depth * dim > ADDRESS_BITS:
        raise TooDeep(f"depth {depth} in dimension {dim} exceeds {ADDRESS_BITS} address bits")


def pack(indices: np.ndarray, depth: int) -> np.ndarray:
    indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    dim = indices.shape[1]
    codes = np.zeros(len(indices), dtype=np.int64)
    for axis in range(dim):
        codes = (codes << depth) | indices[:, axis]
    return codes


def unpack(codes: np.ndarray, depth: int, dim: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty((len(codes), dim), dtype=np.int64)
    mask = (1 << depth) - 1
    rest = codes.copy()
    for axis in range(dim - 1, -1, -1):
        out[:, axis] = rest & mask
        rest >>= depth
    return out


@dataclass(frozen=True, eq=False)
class BoxCover:
    """Immutable set of active cells, all at one depth, of a root box."""

    root: Box
    depth: int
    codes: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_depth(self.depth, self.root.dimension)
        codes = np.unique(np.asarray(self.codes, dtype=np.int64))
        if len(codes) == 0:
            raise EmptySelection("a cover needs at least one active box")
        limit = 1 << (self.depth * self.dimension)
        if codes[0] < 0 or codes[-1] >= limit:
            raise UnknownId("box code out of range for depth")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def dimension(self) -> int:
        return self.root.dimension

    @property
    def cells_per_axis(self) -> int:
        return 1 << self.depth

    @property
    def cell_width(self) -> np.ndarray:
        return self.root.width / self.cells_per_axis

    @property
    def cell_diameter(self) -> float:
        return float(np.linalg.norm(self.cell_width))

    @property
    def active(self) -> list:
        return [BoxId(self.depth, tuple(int(v) for v in row)) for row in self.indices()]

    def indices(self, positions=None) -> np.ndarray:
        codes = self.codes if positions is None else self.codes[np.asarray(positions)]
        return unpack(codes, self.depth, self.dimension)

    def lower(self, positions=None) -> np.ndarray:
        return self.root.lower + self.indices(positions) * self.cell_width

    def upper(self, positions=None) -> np.ndarray:
        return self.root.lower + (self.indices(positions) + 1) * self.cell_width

    def centers(self, positions=None) -> np.ndarray:
        return self.root.lower + (self.indices(positions) + 0.5) * self.cell_width

    def box(self, box_id: BoxId) -> Box:
        pos = self.position(box_id)
        return Box(self.lower([pos])[0], self.upper([pos])[0])

    def code_of(self, box_id: BoxId) -> int:
        if box_id.depth != self.depth or len(box_id.index) != self.dimension:
            raise UnknownId(f"{box_id} does not belong to a depth-{self.depth} cover")
        idx = np.asarray(box_id.index, dtype=np.int64)
        if (idx < 0).any() or (idx >= self.cells_per_axis).any():
            raise UnknownId(f"{box_id} index out of range")
        return int(pack(idx[None, :], self.depth)[0])

    def positions_of_codes(self, codes) -> np.ndarray:
        """Positions of ``codes`` in the active array, -1 where inactive."""
        codes = np.asarray(codes, dtype=np.int64)
        pos = np.searchsorted(self.codes, codes)
        pos = np.minimum(pos, len(self.codes) - 1)
        return np.where(self.codes[pos] == codes, pos, -1)

    def position(self, box_id: BoxId) -> int:
        pos = int(self.positions_of_codes([self.code_of(box_id)])[0])
        if pos < 0:
            raise UnknownId(f"{box_id} is not active")
        return pos

    def box_id(self, position: int) -> BoxId:
        return BoxId(self.depth, tuple(int(v) for v in self.indices([position])[0]))

    def cell_indices_of_points(self, points) -> np.ndarray:
        """Per-axis cell index of each point, -1 rows when outside the root."""
        pts = self.root.wrap(np.atleast_2d(np.asarray(points, dtype=float)))
        rel = (pts - self.root.lower) / self.cell_width
        idx = np.floor(rel).astype(np.int64)
        # closed upper boundary on non-periodic axes
        n = self.cells_per_axis
        on_top = (pts == self.root.upper) & ~self.root.periodic
        idx[on_top] = n - 1
        idx[:, self.root.periodic] %= n
        bad = ((idx < 0) | (idx >= n)).any(axis=1) | ~np.isfinite(pts).all(axis=1)
        idx[bad] = -1
        return idx

    def locate_positions(self, points) -> np.ndarray:
        idx = self.cell_indices_of_points(points)
        out = np.full(len(idx), -1, dtype=np.int64)
        ok = idx[:, 0] >= 0
        if ok.any():
            out[ok] = self.positions_of_codes(pack(idx[ok], self.depth))
        return out


def full_cover(root: Box, depth: int) -> BoxCover:
    _check_depth(depth, root.dimension)
    return BoxCover(root, depth, np.arange(1 << (depth * root.dimension), dtype=np.int64))


def children_codes(codes: np.ndarray, depth: int, dim: int) -> np.ndarray:
    """Codes at ``depth + 1`` of all children of ``codes`` (at ``depth``)."""
    idx = unpack(codes, depth, dim)
    offsets = np.array(list(itertools.product((0, 1), repeat=dim)), dtype=np.int64)
    kids = (2 * idx)[:, None, :] + offsets[None, :, :]
    return pack(kids.reshape(-1, dim), depth + 1)


def parent_codes(codes: np.ndarray, depth: int, dim: int) -> np.ndarray:
    return pack(unpack(codes, depth, dim) // 2, depth - 1)


def _as_positions(cover: BoxCover, ids) -> np.ndarray:
    if isinstance(ids, np.ndarray) and ids.dtype.kind in "iu":
        pos = ids.astype(np.int64)
        if len(pos) and (pos.min() < 0 or pos.max() >= len(cover)):
            raise UnknownId("position out of range")
        return pos
    return np.array([cover.position(b) for b in ids], dtype=np.int64)


def subdivide(cover: BoxCover, ids) -> BoxCover:
    """Cover at ``depth + 1`` made of the children of ``ids``.

    ``ids`` is an iterable of :class:`BoxId` or an integer array of positions.
    """
    pos = _as_positions(cover, ids)
    if len(pos) == 0:
        raise EmptySelection("nothing selected for subdivision")
    kids = children_codes(cover.codes[pos], cover.depth, cover.dimension)
    return BoxCover(cover.root, cover.depth + 1, kids)


def locate(cover: BoxCover, x) -> Optional[BoxId]:
    pos = int(cover.locate_positions(np.atleast_1d(np.asarray(x, dtype=float))[None, :])[0])
    return None if pos < 0 else cover.box_id(pos)


def _gap_cells(cover: BoxCover, ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
    """Per-axis number of whole cells strictly between cells ``ia`` and ``ib``."""
    diff = np.abs(ib - ia)
    per = cover.root.periodic
    if per.any():
        n = cover.cells_per_axis
        diff[..., per] = np.minimum(diff[..., per], n - diff[..., per])
    return np.maximum(diff - 1, 0)


def gap_between(cover: BoxCover, pos_a, pos_b) -> np.ndarray:
    """Vectorised closed-box gap distance between active positions."""
    ia, ib = cover.indices(np.atleast_1d(pos_a)), cover.indices(np.atleast_1d(pos_b))
    return np.linalg.norm(_gap_cells(cover, ia, ib) * cover.cell_width, axis=1)


def center_between(cover: BoxCover, pos_a, pos_b) -> np.ndarray:
    ca, cb = cover.centers(np.atleast_1d(pos_a)), cover.centers(np.atleast_1d(pos_b))
    return cover.root.distance(ca, cb)


def gap_distance(cover: BoxCover, a: BoxId, b: BoxId) -> float:
    return float(gap_between(cover, [cover.position(a)], [cover.position(b)])[0])


def center_distance(cover: BoxCover, a: BoxId, b: BoxId) -> float:
    return float(center_between(cover, [cover.position(a)], [cover.position(b)])[0])


def offset_stencil(cover: BoxCover, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Non-zero cell offsets whose gap distance is at most ``radius``.

    Returns ``(offsets, gaps)``; gaps are measured in the same units as the root.
    """
    w = cover.cell_width
    reach = [int(np.floor(radius / wi + 1e-9)) + 1 for wi in w]
    n = cover.cells_per_axis
    ranges = []
    for axis, r in enumerate(reach):
        r = min(r, n - 1) if not cover.root.periodic[axis] else min(r, n // 2)
        ranges.append(range(-r, r + 1))
    offs = np.array([o for o in itertools.product(*ranges) if any(o)], dtype=np.int64)
    if len(offs) == 0:
        return offs.reshape(0, cover.dimension), np.zeros(0)
    gaps = np.linalg.norm(np.maximum(np.abs(offs) - 1, 0) * w, axis=1)
    keep = gaps <= radius * (1 + 1e-12)
    return offs[keep], gaps[keep]


def shifted_positions(cover: BoxCover, positions: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Positions of ``positions + offset`` for every offset; -1 when inactive.

    Result has shape ``(len(positions), len(offsets))``.
    """
    idx = cover.indices(positions)[:, None, :] + offsets[None, :, :]
    n = cover.cells_per_axis
    per = cover.root.periodic
    idx[..., per] %= n
    ok = ((idx >= 0) & (idx < n)).all(axis=2)
    out = np.full(ok.shape, -1, dtype=np.int64)
    if ok.any():
        out[ok] = cover.positions_of_codes(pack(idx[ok], cover.depth))
    return out


def touching_neighbors(cover: BoxCover, positions) -> np.ndarray:
    """Active positions sharing at least a corner with ``positions`` (inclusive)."""
    positions = np.asarray(positions, dtype=np.int64)
    if len(positions) == 0:
        return positions
    offs = np.array(list(itertools.product((-1, 0, 1), repeat=cover.dimension)), dtype=np.int64)
    nb = shifted_positions(cover, positions, offs).ravel()
    return np.unique(nb[nb >= 0])


def hull(cover: BoxCover, ids) -> Box:
    """Smallest box containing the listed cells.

    On periodic axes the smallest wrapped arc is returned, so ``hi`` may exceed
    the root's upper bound.
    """
    pos = _as_positions(cover, ids)
    if len(pos) == 0:
        raise EmptySelection("hull of an empty selection")
    idx = cover.indices(pos)
    w = cover.cell_width
    lo = cover.root.lower + idx.min(axis=0) * w
    hi = cover.root.lower + (idx.max(axis=0) + 1) * w
    n = cover.cells_per_axis
    for axis in np.flatnonzero(cover.root.periodic):
        occupied = np.unique(idx[:, axis])
        if len(occupied) == n:
            continue
        # the largest empty circular run is left out of the arc
        gaps = np.diff(np.concatenate([occupied, [occupied[0] + n]]))
        k = int(np.argmax(gaps))
        m = len(occupied)
        start = occupied[(k + 1) % m]
        stop = occupied[k] if k == m - 1 else occupied[k] + n
        lo[axis] = cover.root.lo[axis] + start * w[axis]
        hi[axis] = cover.root.lo[axis] + (stop + 1) * w[axis]
    return Box(lo, hi)
