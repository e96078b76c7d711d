"""Finite lattices in Z^d with the Euclidean metric, regions and enlargements."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "Lattice",
    "Region",
    "build_chain",
    "build_grid",
    "distance_to_region",
    "enlarge",
]


@dataclass(frozen=True)
class Lattice:
    """Ordered set of distinct integer sites in Z^d.

    Distances are Euclidean norms of coordinate differences. The pairwise
    distance table is computed once and shared read-only.
    """

    dim: int
    sites: tuple[tuple[int, ...], ...]
    _dist: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("lattice dimension must be positive")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError("lattice sites must be pairwise distinct")
        if any(len(s) != self.dim for s in self.sites):
            raise ValueError("site coordinates do not match the lattice dimension")
        coords = np.asarray(self.sites, dtype=float).reshape(len(self.sites), self.dim)
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        dist.setflags(write=False)
        object.__setattr__(self, "_dist", dist)

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def distances(self) -> np.ndarray:
        """Read-only |Λ|×|Λ| table of pairwise distances |x − y|."""
        return self._dist

    def distance(self, i: int, j: int) -> float:
        return float(self._dist[i, j])

    @property
    def diameter(self) -> float:
        return float(self._dist.max()) if len(self) else 0.0

    def region(self, indices: Iterable[int]) -> Region:
        return Region(self, indices)

    def full(self) -> Region:
        return Region(self, range(len(self)))

    def empty(self) -> Region:
        return Region(self, ())


class Region:
    """Sorted set of site indices of an owning lattice."""

    __slots__ = ("lattice", "indices")

    def __init__(self, lattice: Lattice, indices: Iterable[int]):
        idx = tuple(sorted(set(int(i) for i in indices)))
        if idx and (idx[0] < 0 or idx[-1] >= len(lattice)):
            raise IndexError(f"region indices {idx} out of range for {len(lattice)} sites")
        self.lattice = lattice
        self.indices = idx

    def __iter__(self):
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, i) -> bool:
        return int(i) in self.indices

    def __eq__(self, other) -> bool:
        if not isinstance(other, Region):
            return NotImplemented
        return self.indices == other.indices and self.lattice == other.lattice

    def __hash__(self) -> int:
        return hash((len(self.lattice), self.indices))

    def __repr__(self) -> str:
        return f"Region({list(self.indices)})"

    def complement(self) -> Region:
        members = set(self.indices)
        return Region(self.lattice, (i for i in range(len(self.lattice)) if i not in members))

    def union(self, other: Region) -> Region:
        return Region(self.lattice, self.indices + other.indices)

    def mask(self) -> np.ndarray:
        m = np.zeros(len(self.lattice), dtype=bool)
        m[list(self.indices)] = True
        return m

    def distance_to(self, other: Region) -> float:
        """dist(X, Y) = min over pairs; infinite if either region is empty."""
        if not self.indices or not other.indices:
            return float("inf")
        d = self.lattice.distances
        return float(d[np.ix_(self.indices, other.indices)].min())


def build_chain(length: int) -> Lattice:
    """Open chain with sites 0..length-1."""
    if length < 1:
        raise ValueError("chain length must be at least 1")
    return Lattice(1, tuple((i,) for i in range(length)))


def build_grid(dim: int, side: int) -> Lattice:
    """Hypercubic lattice with side**dim sites, row-major ordering.

    Only d in {1, 2} is supported; larger d blows up the Fock sectors long
    before the geometry becomes interesting.
    """
    if dim not in (1, 2):
        raise ValueError(f"grid dimension {dim} not supported (only 1 or 2)")
    if side < 1:
        raise ValueError("grid side must be at least 1")
    if dim == 1:
        return build_chain(side)
    return Lattice(2, tuple((i, j) for i in range(side) for j in range(side)))


def _distances_to(lat: Lattice, X: Region) -> np.ndarray:
    if not len(X):
        raise ValueError("distance to an empty region is undefined")
    return lat.distances[:, list(X.indices)].min(axis=1)


def distance_to_region(lat: Lattice, X: Region, x: int | None = None):
    """d_X(x) = min_{y in X} |x − y|.

    With ``x=None`` the whole vector over all sites is returned.
    """
    d = _distances_to(lat, X)
    if x is None:
        return d
    return float(d[x])


def enlarge(lat: Lattice, X: Region, eta: float) -> Region:
    """X_η = {x : d_X(x) <= η}."""
    if eta < 0:
        raise ValueError("enlargement radius must be nonnegative")
    d = _distances_to(lat, X)
    # tolerance keeps sqrt-rounded grid distances such as 2√2 on the right side
    return Region(lat, np.flatnonzero(d <= eta + 1e-12))
