"""Connected components of discrete sublevel sets via union-find."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .grid import FACE


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def neighbour_offsets(ndim, connectivity):
    """Half of the neighbourhood (lexicographically positive offsets)."""
    out = []
    for off in itertools.product((-1, 0, 1), repeat=ndim):
        if not any(off):
            continue
        if connectivity == FACE and sum(map(abs, off)) != 1:
            continue
        # keep one of each +/- pair
        first = next(o for o in off if o)
        if first > 0:
            out.append(off)
    return out


@dataclass(frozen=True)
class ComponentLabeling:
    """Labels of the sublevel set ``[f <= level]`` on a grid.

    ``labels`` has the grid shape with -1 above the level and component ids
    ``0..component_count-1`` numbered by first appearance in C order.
    """

    level: float
    labels: np.ndarray
    component_count: int
    touches_boundary: tuple
    connectivity: str = ""

    def sizes(self):
        return np.bincount(self.labels[self.labels >= 0].ravel(), minlength=self.component_count)

    def component_of(self, index):
        return int(self.labels[tuple(index)])

    def to_dict(self):
        return {"level": self.level, "component_count": self.component_count,
                "touches_boundary": list(self.touches_boundary),
                "connectivity": self.connectivity,
                "shape": list(self.labels.shape), "labels": self.labels.ravel().tolist()}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        labels = np.array(d["labels"], dtype=np.int64).reshape(d["shape"])
        return cls(float(d["level"]), labels, int(d["component_count"]),
                   tuple(bool(b) for b in d["touches_boundary"]), d.get("connectivity", ""))


def label_mask(mask, connectivity):
    """Component labels of a boolean mask; returns (labels, count)."""
    mask = np.asarray(mask, dtype=bool)
    shape = mask.shape
    n = mask.size
    uf = UnionFind(n)
    idx = np.arange(n).reshape(shape)
    for off in neighbour_offsets(mask.ndim, connectivity):
        src = tuple(slice(max(-o, 0), s - max(o, 0)) for o, s in zip(off, shape))
        dst = tuple(slice(max(o, 0), s - max(-o, 0)) for o, s in zip(off, shape))
        both = mask[src] & mask[dst]
        for a, b in zip(idx[src][both], idx[dst][both]):
            uf.union(int(a), int(b))
    labels = np.full(n, -1, dtype=np.int64)
    roots = {}
    flat = mask.ravel()
    for i in range(n):
        if flat[i]:
            r = uf.find(i)
            if r not in roots:
                roots[r] = len(roots)
            labels[i] = roots[r]
    return labels.reshape(shape), len(roots)


def sublevel_components(field, level, connectivity=None) -> ComponentLabeling:
    """Label the connected components of ``[f <= level]`` on ``field``."""
    level = float(level)
    if not np.isfinite(level):
        raise ValueError("level must be finite")
    conn = connectivity or field.connectivity
    labels, count = label_mask(field.values <= level, conn)
    touches = np.zeros(count, dtype=bool)
    for ax in range(labels.ndim):
        for side in (0, -1):
            face = np.take(labels, side, axis=ax)
            touches[np.unique(face[face >= 0])] = True
    return ComponentLabeling(level, labels, count, tuple(bool(t) for t in touches), conn)
