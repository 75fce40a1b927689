"""Dense sampling of a model over a rectangular window of at most three free
coordinates, with CSV and binary round-trip formats.

CSV layout: one header row naming the free coordinates ``x_<i>`` (``i`` is
the coordinate index in the model's flattened variable) followed by ``f``,
then one row per node in C order (last axis fastest).

Binary layout, all little-endian::

    bytes 0-7    magic b"SUBTGRID"
    bytes 8-9    uint16 format version (1)
    bytes 10-11  uint16 number of free axes d
    bytes 12-13  uint16 connectivity code (1 = face neighbours, 2 = full)
    bytes 14-15  reserved, zero
    then per axis: uint64 coordinate index, float64 lo, float64 hi, uint64 count
    then the node values as float64 in C order
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import BudgetError, NonFiniteError, ShapeError

FACE = "4-neighbor"
FULL = "8-neighbor"
CONNECTIVITY = (FACE, FULL)

MAGIC = b"SUBTGRID"
GRID_FORMAT_VERSION = 1
DEFAULT_NODE_BUDGET = 10_000_000


@dataclass(frozen=True)
class GridField:
    """Values of ``f`` on a regular grid.

    Attributes
    ----------
    bounds : tuple of (lo, hi)
        Window per free axis.
    resolution : tuple of int
        Node count per free axis.
    values : ndarray
        Shape ``resolution``.
    connectivity : str
        ``"4-neighbor"`` (axis-aligned neighbours, 2d in d dims) or
        ``"8-neighbor"`` (all 3^d - 1 neighbours).
    axes : tuple of int
        Model coordinate index of every free axis.
    base : ndarray or None
        Full point supplying the fixed coordinates.
    """

    bounds: tuple
    resolution: tuple
    values: np.ndarray
    connectivity: str = FULL
    axes: tuple = ()
    base: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        res = tuple(int(n) for n in self.resolution)
        if vals.shape != res:
            raise ShapeError(f"values shape {vals.shape} != resolution {res}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("grid values must be finite")
        if self.connectivity not in CONNECTIVITY:
            raise ValueError(f"connectivity must be one of {CONNECTIVITY}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds))
        if not self.axes:
            object.__setattr__(self, "axes", tuple(range(len(res))))

    @property
    def ndim(self):
        return len(self.resolution)

    @property
    def coords(self):
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.resolution)]

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.resolution))

    def node(self, index):
        """Coordinates of a node given its multi-index."""
        return np.array([c[i] for c, i in zip(self.coords, index)])

    # --- export -----------------------------------------------------------
    def to_csv(self, fh=None):
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{a}" for a in self.axes] + ["f"])
        mesh = np.meshgrid(*self.coords, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
        return fh.getvalue() if own else None

    def to_bytes(self):
        conn = 1 if self.connectivity == FACE else 2
        out = [MAGIC, struct.pack("<HHHH", GRID_FORMAT_VERSION, self.ndim, conn, 0)]
        for a, (lo, hi), n in zip(self.axes, self.bounds, self.resolution):
            out.append(struct.pack("<QddQ", a, lo, hi, n))
        out.append(self.values.astype("<f8").tobytes(order="C"))
        return b"".join(out)


def grid_from_bytes(data: bytes) -> GridField:
    if len(data) < 16 or data[:8] != MAGIC:
        raise ValueError("not a grid file (bad magic)")
    version, d, conn, _ = struct.unpack_from("<HHHH", data, 8)
    if version != GRID_FORMAT_VERSION:
        raise ValueError(f"unsupported grid format version {version}")
    off = 16
    axes, bounds, res = [], [], []
    for _ in range(d):
        a, lo, hi, n = struct.unpack_from("<QddQ", data, off)
        off += 32
        axes.append(a)
        bounds.append((lo, hi))
        res.append(n)
    count = int(np.prod(res))
    vals = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(res)
    return GridField(tuple(bounds), tuple(res), vals.astype(float),
                     FACE if conn == 1 else FULL, tuple(axes))


def grid_from_csv(fh, connectivity=FULL) -> GridField:
    text = fh.read() if hasattr(fh, "read") else str(fh)
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    body = np.array(rows[1:], dtype=float)
    d = len(header) - 1
    axes = tuple(int(h.split("_", 1)[1]) for h in header[:d])
    res, bounds = [], []
    for j in range(d):
        u = np.unique(body[:, j])
        res.append(u.size)
        bounds.append((u[0], u[-1]))
    return GridField(tuple(bounds), tuple(res), body[:, d].reshape(res), connectivity, axes)


def sample_grid(model, bounds, resolution, slice_spec=None, connectivity=None,
                node_budget=DEFAULT_NODE_BUDGET, chunk=1 << 16) -> GridField:
    """Evaluate ``model`` on a regular grid.

    Parameters
    ----------
    bounds : sequence of (lo, hi)
        One window per free coordinate.
    resolution : int or sequence of int
        Nodes per free axis, each >= 2.
    slice_spec : dict, optional
        ``{"fixed": {index: value, ...}}`` or ``{"base": point, "axes": [...]}``.
        Coordinates not listed as free are taken from ``base`` (zeros if
        absent) and overridden by ``fixed``. Without a slice all coordinates
        are free, which needs ``model.dim <= 3``.
    connectivity : str, optional
        Defaults to full neighbourhoods (``"8-neighbor"`` in 2-D).
    node_budget : int
        Largest admissible node count.
    """
    bounds = [tuple(map(float, b)) for b in bounds]
    d = len(bounds)
    if np.isscalar(resolution):
        resolution = [int(resolution)] * d
    resolution = [int(n) for n in resolution]
    if len(resolution) != d or d < 1:
        raise ShapeError("bounds and resolution must have the same positive length")
    if any(n < 2 for n in resolution):
        raise ShapeError("resolution must be >= 2 along every axis")
    if any(not hi > lo for lo, hi in bounds):
        raise ShapeError("every window needs lo < hi")
    spec = dict(slice_spec or {})
    fixed = {int(k): float(v) for k, v in (spec.get("fixed") or {}).items()}
    base = np.zeros(model.dim) if spec.get("base") is None else np.array(spec["base"], dtype=float)
    if base.shape != (model.dim,):
        raise ShapeError(f"slice base must have length {model.dim}")
    for k, v in fixed.items():
        base[k] = v
    axes = spec.get("axes")
    if axes is None:
        axes = [i for i in range(model.dim) if i not in fixed]
    axes = [int(a) for a in axes]
    if len(axes) != d:
        raise ShapeError(f"{len(axes)} free coordinates but {d} windows")
    if d > 3:
        raise ShapeError("at most three free coordinates")
    total = int(np.prod(resolution, dtype=np.int64))
    if total > node_budget:
        raise BudgetError(f"grid of {total} nodes exceeds budget {node_budget}")
    coords = [np.linspace(lo, hi, n) for (lo, hi), n in zip(bounds, resolution)]
    mesh = np.meshgrid(*coords, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.empty(total)
    for s in range(0, total, chunk):
        P = np.repeat(base[None], min(chunk, total - s), axis=0)
        P[:, axes] = flat[s:s + chunk]
        vals[s:s + chunk] = model.value_batch(P)
    return GridField(tuple(bounds), tuple(resolution), vals.reshape(resolution),
                     connectivity or FULL, tuple(axes), base)
