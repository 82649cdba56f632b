"""Combinatorial outer approximation of a map on a box cover.

Two edge kinds live on the active boxes of a cover: *step* edges ``B -> B'``
when the (padded) image of ``B`` meets ``B'``, and symmetric *jump* edges
between boxes whose gap distance is at most ``epsilon``.  Boxes are referred
to by their position in ``cover.codes``.
"""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .boxcover import BoxCover, offset_stencil, pack, shifted_positions
from .errors import ConfigurationError, GraphTooLarge, NonFinite
from .systems import SemiFlowSpec, evaluate_batch

log = logging.getLogger(__name__)

MODES = ("sampled", "sampled+lipschitz-pad")
MAX_EDGES = 50_000_000
CACHE_ENV = "STREAMLAB_CACHE_DIR"


class Adjacency:
    """Sparse directed adjacency in CSR layout with optional edge weights."""

    def __init__(self, n: int, indptr, indices, weights=None):
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        if len(self.indptr) != self.n + 1 or self.indptr[-1] != len(self.indices):
            raise ValueError("malformed CSR arrays")

    @classmethod
    def from_pairs(cls, n: int, src, dst, weights=None) -> "Adjacency":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge endpoint out of range")
        key = src * n + dst
        key, first = np.unique(key, return_index=True)
        src, dst = key // n, key % n
        w = None if weights is None else np.asarray(weights, dtype=float)[first]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        return cls(n, np.cumsum(indptr), dst, w)

    @classmethod
    def from_matrix(cls, m) -> "Adjacency":
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.indptr, m.indices)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def pairs(self) -> np.ndarray:
        return np.stack([self.sources(), self.indices], axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def matrix(self) -> sp.csr_matrix:
        """0/1 matrix (weights dropped, so zero-gap edges survive)."""
        data = np.ones(self.nnz, dtype=np.int8)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def transpose(self) -> "Adjacency":
        return Adjacency.from_pairs(self.n, self.indices, self.sources(), self.weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Adjacency) or self.n != other.n:
            return NotImplemented
        same = np.array_equal(self.indptr, other.indptr) and np.array_equal(self.indices, other.indices)
        if self.weights is None or other.weights is None:
            return same and self.weights is None and other.weights is None
        return same and np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        return f"Adjacency(n={self.n}, nnz={self.nnz})"


@dataclass(eq=False)
class TransitionGraph:
    cover: BoxCover
    step: Adjacency
    jump: Adjacency
    epsilon: float
    mode: str = "sampled+lipschitz-pad"
    leaking: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.leaking is None:
            self.leaking = np.zeros(len(self.cover), dtype=bool)

    @property
    def n(self) -> int:
        return len(self.cover)

    def jump_centre_weights(self) -> np.ndarray:
        """Centre-to-centre length of every jump edge, aligned with ``jump.indices``."""
        c = self.cover.centers()
        return self.cover.root.distance(c[self.jump.sources()], c[self.jump.indices])


# step edges --------------------------------------------------------------------

def _sample_offsets(dim: int, per_axis: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, per_axis)
    mesh = np.meshgrid(*([t] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _local_lipschitz(root, img: np.ndarray, per_axis: int, spacing: np.ndarray) -> np.ndarray:
    """Largest finite-difference quotient among each box's samples."""
    nb, _, dim = img.shape
    grid = img.reshape((nb,) + (per_axis,) * dim + (dim,))
    best = np.zeros(nb)
    for axis in range(dim):
        d = root.displacement(0.0, np.diff(grid, axis=axis + 1))
        q = np.linalg.norm(d, axis=-1) / spacing[axis]
        best = np.maximum(best, q.reshape(nb, -1).max(axis=1))
    return best


def _image_hulls(system: SemiFlowSpec, cover: BoxCover, pos: np.ndarray, per_axis: int, padded: bool):
    root = cover.root
    w = cover.cell_width
    offs = _sample_offsets(cover.dimension, per_axis)
    lower = cover.lower(pos)
    pts = lower[:, None, :] + offs[None, :, :] * w
    flat = pts.reshape(-1, cover.dimension)
    try:
        img = evaluate_batch(system, flat)
    except NonFinite as exc:
        bad = pos[exc.index // len(offs)]
        raise NonFinite(f"step image of box {cover.box_id(int(bad))} is not finite", index=int(bad)) from None
    img = img.reshape(len(pos), len(offs), cover.dimension)
    # unwrap periodic axes around the image of the first sample
    anchor = img[:, :1, :]
    img = anchor + root.displacement(anchor, img)
    if not padded:
        return img, None, None
    spacing = w / (per_axis - 1)
    if system.lipschitz_hint is not None:
        lip = np.full(len(pos), float(system.lipschitz_hint))
    else:
        lip = 1.5 * _local_lipschitz(root, img, per_axis, spacing)
    pad = lip * 0.5 * float(np.linalg.norm(spacing))
    lo = img.min(axis=1) - pad[:, None]
    hi = img.max(axis=1) + pad[:, None]
    return img, lo, hi


def _cell_range(cover: BoxCover, lo: np.ndarray, hi: np.ndarray):
    root = cover.root
    n = cover.cells_per_axis
    w = cover.cell_width
    ilo = np.floor((lo - root.lower) / w).astype(np.int64)
    ihi = np.floor((hi - root.lower) / w).astype(np.int64)
    per = root.periodic
    outside = np.zeros(len(lo), dtype=bool)
    leak = np.zeros(len(lo), dtype=bool)
    for axis in range(cover.dimension):
        if per[axis]:
            full = ihi[:, axis] - ilo[:, axis] + 1 >= n
            ilo[full, axis] = 0
            ihi[full, axis] = n - 1
            continue
        leak |= (lo[:, axis] < root.lo[axis]) | (hi[:, axis] > root.hi[axis])
        outside |= (ihi[:, axis] < 0) | (ilo[:, axis] > n - 1)
        ilo[:, axis] = np.clip(ilo[:, axis], 0, n - 1)
        ihi[:, axis] = np.clip(ihi[:, axis], 0, n - 1)
    return ilo, ihi, outside, leak


def _enumerate_ranges(cover: BoxCover, src: np.ndarray, ilo: np.ndarray, ihi: np.ndarray):
    """All (source, target position) pairs for per-source cell index ranges."""
    ext = ihi - ilo + 1
    counts = np.prod(ext, axis=1)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    rep = np.repeat(np.arange(len(src)), counts)
    k = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    idx = np.empty((total, cover.dimension), dtype=np.int64)
    for axis in range(cover.dimension - 1, -1, -1):
        e = ext[rep, axis]
        idx[:, axis] = ilo[rep, axis] + k % e
        k //= e
    per = cover.root.periodic
    idx[:, per] %= cover.cells_per_axis
    tgt = cover.positions_of_codes(pack(idx, cover.depth))
    keep = tgt >= 0
    return src[rep[keep]], tgt[keep]


def build_step_edges(system: SemiFlowSpec, cover: BoxCover, samples_per_axis: Optional[int] = None,
                     mode: str = "sampled+lipschitz-pad", chunk: int = 1 << 16, max_edges: int = MAX_EDGES):
    """Outer step relation of ``system`` on ``cover``.

    Returns ``(adjacency, leaking)`` where ``leaking`` flags boxes whose padded
    image sticks out of the root box.  In padded mode the image of a box is the
    hull of its sample images grown by ``L * |spacing| / 2``, with ``L`` the
    local Lipschitz estimate (or ``system.lipschitz_hint``).
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}")
    if system.dimension != cover.dimension:
        raise ConfigurationError("system and cover dimensions differ")
    if samples_per_axis is None:
        samples_per_axis = 5 if cover.dimension == 1 else 3
    if samples_per_axis < 2:
        raise ConfigurationError("samples_per_axis must be at least 2")
    padded = mode != "sampled"
    per_box = samples_per_axis ** cover.dimension
    step = max(1, chunk // per_box)
    srcs, tgts = [], []
    leaking = np.zeros(len(cover), dtype=bool)
    budget = max_edges
    for start in range(0, len(cover), step):
        pos = np.arange(start, min(start + step, len(cover)))
        img, lo, hi = _image_hulls(system, cover, pos, samples_per_axis, padded)
        if padded:
            ilo, ihi, outside, leak = _cell_range(cover, lo, hi)
            leaking[pos] = leak
            budget -= int(np.prod(ihi - ilo + 1, axis=1)[~outside].sum())
            if budget < 0:
                raise GraphTooLarge(f"padded images exceed {max_edges} candidate edges at depth {cover.depth}; "
                                    "use sampled mode or a smaller lipschitz_hint")
            s, t = _enumerate_ranges(cover, pos[~outside], ilo[~outside], ihi[~outside])
        else:
            flat = img.reshape(-1, cover.dimension)
            t = cover.locate_positions(flat)
            s = np.repeat(pos, per_box)
            inside = cover.root.contains(flat)
            leaking[pos] = ~inside.reshape(len(pos), per_box).all(axis=1)
            s, t = s[t >= 0], t[t >= 0]
        srcs.append(s)
        tgts.append(t)
    src = np.concatenate(srcs) if srcs else np.zeros(0, np.int64)
    tgt = np.concatenate(tgts) if tgts else np.zeros(0, np.int64)
    return Adjacency.from_pairs(len(cover), src, tgt), leaking


def build_jump_edges(cover: BoxCover, epsilon: float) -> Adjacency:
    """Symmetric jump relation weighted by gap distance; no self edges."""
    if epsilon < 0:
        log.warning("negative epsilon %g treated as 0", epsilon)
        epsilon = 0.0
    offs, gaps = offset_stencil(cover, epsilon)
    n = len(cover)
    if len(offs) == 0:
        return Adjacency(n, np.zeros(n + 1, np.int64), np.zeros(0, np.int64), np.zeros(0))
    tgt = shifted_positions(cover, np.arange(n), offs)
    src = np.broadcast_to(np.arange(n)[:, None], tgt.shape)
    w = np.broadcast_to(gaps[None, :], tgt.shape)
    keep = (tgt >= 0) & (tgt != src)
    return Adjacency.from_pairs(n, src[keep], tgt[keep], w[keep])


def compose_step(graph: TransitionGraph, k: int) -> Adjacency:
    """Step relation of ``F^k``: paths of exactly ``k`` step edges."""
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    m = graph.step.matrix().astype(bool)
    out = m
    for _ in range(k - 1):
        out = (out @ m).astype(bool)
    return Adjacency.from_matrix(out)


# caching -----------------------------------------------------------------------

def _cache_key(system: SemiFlowSpec, cover: BoxCover, epsilon: float, mode: str, samples: int) -> str:
    h = hashlib.sha256()
    h.update(system.hash.encode())
    h.update(repr((cover.root.to_dict(), cover.depth, float(epsilon), mode, samples)).encode())
    h.update(cover.codes.tobytes())
    return h.hexdigest()[:24]


def _write_pairs(path: Path, cover: BoxCover, adj: Adjacency, weights: bool) -> None:
    pairs = cover.codes[adj.pairs()].astype("<i8")
    if weights:
        w = (adj.weights if adj.weights is not None else np.zeros(adj.nnz)).astype("<f8")
        rec = np.empty(adj.nnz, dtype=[("a", "<i8"), ("b", "<i8"), ("w", "<f8")])
        rec["a"], rec["b"], rec["w"] = pairs[:, 0], pairs[:, 1], w
    else:
        rec = np.empty(adj.nnz, dtype=[("a", "<i8"), ("b", "<i8")])
        rec["a"], rec["b"] = pairs[:, 0], pairs[:, 1]
    tmp = path.with_suffix(".tmp")
    rec.tofile(tmp)
    os.replace(tmp, path)


def _read_pairs(path: Path, cover: BoxCover, weights: bool) -> Adjacency:
    dt = [("a", "<i8"), ("b", "<i8")] + ([("w", "<f8")] if weights else [])
    rec = np.fromfile(path, dtype=dt)
    a = cover.positions_of_codes(rec["a"])
    b = cover.positions_of_codes(rec["b"])
    return Adjacency.from_pairs(len(cover), a, b, rec["w"] if weights else None)


def build_transition_graph(system: SemiFlowSpec, cover: BoxCover, epsilon: float,
                           mode: str = "sampled+lipschitz-pad", samples_per_axis: Optional[int] = None,
                           cache_dir=None) -> TransitionGraph:
    """Step and jump edges together, optionally through the on-disk cache.

    ``cache_dir`` defaults to the ``STREAMLAB_CACHE_DIR`` environment variable.
    """
    if samples_per_axis is None:
        samples_per_axis = 5 if cover.dimension == 1 else 3
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    if cache_dir:
        root = Path(cache_dir)
        root.mkdir(parents=True, exist_ok=True)
        key = _cache_key(system, cover, epsilon, mode, samples_per_axis)
        fs, fj, fl = root / f"{key}.step", root / f"{key}.jump", root / f"{key}.leak"
        if fs.exists() and fj.exists() and fl.exists():
            leaking = np.zeros(len(cover), dtype=bool)
            leaking[cover.positions_of_codes(np.fromfile(fl, dtype="<i8"))] = True
            return TransitionGraph(cover, _read_pairs(fs, cover, False), _read_pairs(fj, cover, True),
                                   float(epsilon), mode, leaking)
    step, leaking = build_step_edges(system, cover, samples_per_axis, mode)
    jump = build_jump_edges(cover, epsilon)
    graph = TransitionGraph(cover, step, jump, max(float(epsilon), 0.0), mode, leaking)
    if cache_dir:
        _write_pairs(fs, cover, step, False)
        _write_pairs(fj, cover, jump, True)
        cover.codes[leaking].astype("<i8").tofile(fl)
    return graph
