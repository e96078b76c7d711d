"""Fixed-particle-number bosonic Fock sectors and sparse second-quantized operators.

Basis vectors are occupation tuples ``(m_0, ..., m_{L-1})`` with ``sum(m) == n``,
ordered lexicographically. Operators are ``scipy.sparse.csr_matrix`` instances
acting on one sector (or mapping between adjacent sectors for ladder operators).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .lattice import Region

__all__ = [
    "DEFAULT_DIM_CAP",
    "DimensionCapError",
    "FockSector",
    "LocalOperator",
    "SectorSplit",
    "annihilation",
    "composition_rank",
    "creation",
    "enumerate_sector",
    "is_hermitian",
    "is_localized_in",
    "number_operator",
    "one_body_operator",
    "read_triplets",
    "relative_number",
    "second_quantize",
    "sector_dimension",
    "spectral_projection_threshold",
    "split_sector",
    "support_check",
    "write_triplets",
]

DEFAULT_DIM_CAP = 10_000


class DimensionCapError(RuntimeError):
    """Raised when a requested sector exceeds the configured dimension cap."""


def sector_dimension(num_sites: int, n: int) -> int:
    """C(num_sites + n - 1, n), the number of ways to place n bosons on num_sites sites."""
    if num_sites == 0:
        return 1 if n == 0 else 0
    return math.comb(num_sites + n - 1, n)


def _compositions(num_sites: int, n: int) -> np.ndarray:
    """All occupation vectors with total n in ascending lexicographic order."""
    if num_sites == 0:
        return np.zeros((1 if n == 0 else 0, 0), dtype=np.int64)
    if num_sites == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        tail = _compositions(num_sites - 1, n - first)
        head = np.full((tail.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, tail]))
    return np.vstack(blocks)


@lru_cache(maxsize=256)
def _cumulative_counts(num_sites: int, n: int) -> np.ndarray:
    """cum[r, k] = Σ_{q ≤ k} dim(r sites, q particles) for r ≤ num_sites, k ≤ n."""
    cum = np.zeros((num_sites + 1, n + 1), dtype=np.int64)
    for r in range(num_sites + 1):
        cum[r] = np.cumsum([sector_dimension(r, q) for q in range(n + 1)])
    cum.setflags(write=False)
    return cum


def composition_rank(occupations: np.ndarray, n_max: int | None = None) -> np.ndarray:
    """Lexicographic rank of each occupation row among rows with the same total.

    Exact integer arithmetic bounded by the sector dimension, so it stays valid on
    long lattices where positional encodings overflow.
    """
    occ = np.atleast_2d(np.asarray(occupations, dtype=np.int64))
    rows, L = occ.shape
    if L == 0:
        return np.zeros(rows, dtype=np.int64)
    totals = occ.sum(axis=1)
    n_max = int(totals.max(initial=0)) if n_max is None else n_max
    cum = _cumulative_counts(L, n_max)
    rank = np.zeros(rows, dtype=np.int64)
    rem = totals.copy()
    for i in range(L - 1):
        r = L - i - 1
        m = occ[:, i]
        # compositions whose i-th entry is smaller: Σ_{v<m} dim(r, rem − v)
        rank += cum[r, rem] - cum[r, rem - m]
        rem = rem - m
    return rank


@dataclass(frozen=True)
class FockSector:
    """Occupation-number basis of the n-particle sector on ``num_sites`` sites."""

    num_sites: int
    n: int
    basis: np.ndarray = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self) -> int:
        return self.dim

    def index_of(self, occupation) -> int:
        occ = np.asarray(occupation, dtype=np.int64)
        if occ.shape != (self.num_sites,) or occ.sum() != self.n or (occ < 0).any():
            raise KeyError(f"{tuple(occ.tolist())} is not in the ({self.num_sites}, {self.n}) sector")
        return int(self.indices_of(occ[None, :])[0])

    def indices_of(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorized index lookup for rows of valid occupation vectors."""
        return composition_rank(occupations, self.n)

    def state(self, occupation) -> np.ndarray:
        """Normalized basis vector |m>."""
        v = np.zeros(self.dim, dtype=complex)
        v[self.index_of(occupation)] = 1.0
        return v


def enumerate_sector(num_sites: int, n: int, dim_cap: int = DEFAULT_DIM_CAP) -> FockSector:
    """Build the n-particle sector on ``num_sites`` sites.

    Raises
    ------
    DimensionCapError
        If C(num_sites + n - 1, n) exceeds ``dim_cap``.
    """
    if num_sites < 1:
        raise ValueError("a sector needs at least one site")
    if n < 0:
        raise ValueError("particle number must be nonnegative")
    dim = sector_dimension(num_sites, n)
    if dim > dim_cap:
        raise DimensionCapError(
            f"sector ({num_sites} sites, {n} particles) has dimension {dim} > cap {dim_cap}"
        )
    return _cached_sector(num_sites, n)


@lru_cache(maxsize=64)
def _cached_sector(num_sites: int, n: int) -> FockSector:
    basis = _compositions(num_sites, n)
    basis.setflags(write=False)
    return FockSector(num_sites, n, basis)


def _region_indices(X) -> list[int]:
    if isinstance(X, Region):
        return list(X.indices)
    return sorted(set(int(i) for i in X))


def annihilation(sector_n: FockSector, sector_nm1: FockSector, x: int) -> sp.csr_matrix:
    """a_x as a (dim_{n-1} × dim_n) matrix with <m - e_x| a_x |m> = sqrt(m_x)."""
    if sector_n.num_sites != sector_nm1.num_sites or sector_nm1.n != sector_n.n - 1:
        raise ValueError("annihilation needs sectors n and n-1 on the same sites")
    occ = sector_n.basis
    cols = np.flatnonzero(occ[:, x] > 0)
    target = occ[cols].copy()
    target[:, x] -= 1
    rows = sector_nm1.indices_of(target)
    vals = np.sqrt(occ[cols, x].astype(float))
    return sp.csr_matrix((vals, (rows, cols)), shape=(sector_nm1.dim, sector_n.dim))


def creation(sector_n: FockSector, sector_np1: FockSector, x: int) -> sp.csr_matrix:
    """a_x^* from the n sector into the n+1 sector."""
    return annihilation(sector_np1, sector_n, x).conj().T.tocsr()


def second_quantize(sector: FockSector, f) -> sp.csr_matrix:
    """dΓ(f) = Σ_x f(x) a_x^* a_x for a site weight ``f`` (array or callable on indices)."""
    if callable(f):
        weights = np.array([f(x) for x in range(sector.num_sites)])
    else:
        weights = np.asarray(f)
    if weights.shape != (sector.num_sites,):
        raise ValueError("site weight must be defined on every site")
    diag = sector.basis @ weights
    return sp.diags(diag, format="csr")


def number_operator(sector: FockSector, X) -> sp.csr_matrix:
    """N_X = Σ_{x∈X} n_x (diagonal)."""
    weights = np.zeros(sector.num_sites)
    weights[_region_indices(X)] = 1.0
    return second_quantize(sector, weights)


def relative_number(sector: FockSector, S) -> sp.csr_matrix:
    """N̄_S = N_S / N on a sector with n >= 1."""
    if sector.n == 0:
        raise ValueError("relative particle number is undefined in the vacuum sector")
    return number_operator(sector, S) / sector.n


def one_body_operator(sector: FockSector, M: np.ndarray) -> sp.csr_matrix:
    """dΓ(M) = Σ_{x,y} M_xy a_x^* a_y for a one-particle matrix M."""
    M = np.asarray(M)
    L = sector.num_sites
    if M.shape != (L, L):
        raise ValueError(f"one-body matrix must be {L}×{L}")
    occ = sector.basis
    rows, cols, vals = [], [], []
    diag = occ @ np.diag(M)
    rows.append(np.arange(sector.dim))
    cols.append(np.arange(sector.dim))
    vals.append(diag.astype(complex))
    for x, y in zip(*np.nonzero(M)):
        if x == y:
            continue
        src = np.flatnonzero(occ[:, y] > 0)
        tgt = occ[src].copy()
        tgt[:, y] -= 1
        tgt[:, x] += 1
        amp = np.sqrt(occ[src, y] * (occ[src, x] + 1.0))
        rows.append(sector.indices_of(tgt))
        cols.append(src)
        vals.append(M[x, y] * amp)
    out = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(sector.dim, sector.dim),
    )
    out.eliminate_zeros()
    return out


def spectral_projection_threshold(op, nu: float, direction: str = ">=") -> sp.csr_matrix:
    """0/1 diagonal projector onto eigenvalues of a diagonal operator with λ ≥ ν (or ≤ ν)."""
    op = sp.csr_matrix(op)
    off = op - sp.diags(op.diagonal())
    if off.count_nonzero() and abs(off).max() > 0:
        raise ValueError("threshold projections are only defined here for diagonal operators")
    d = op.diagonal().real
    # tolerance absorbs rounding in ratios such as 1/3 compared against ν
    if direction in (">=", "≥", "ge"):
        sel = d >= nu - 1e-12
    elif direction in ("<=", "≤", "le"):
        sel = d <= nu + 1e-12
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return sp.diags(sel.astype(float), format="csr")


def is_hermitian(op, atol: float = 1e-12) -> bool:
    if sp.issparse(op):
        diff = op - op.conj().T
        return diff.nnz == 0 or abs(diff).max() <= atol
    op = np.asarray(op)
    return bool(np.allclose(op, op.conj().T, atol=atol, rtol=0))


# ---------------------------------------------------------------------------
# splitting Λ = S ∪ S^c
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SectorSplit:
    """Factorization of an n-particle basis into (occupations on S, occupations on S^c).

    ``local_k[j]`` and ``local_index[j]`` locate the S-part of basis vector j inside the
    k-particle sector of S; ``rest_key[j]`` identifies the S^c-part. Because
    |m> = |m_S> ⊗ |m_{S^c}> holds exactly for normalized occupation states, no
    combinatorial amplitude factors appear.
    """

    sector: FockSector
    sites: tuple[int, ...]
    rest_sites: tuple[int, ...]
    local_sectors: tuple[FockSector, ...]
    local_k: np.ndarray
    local_index: np.ndarray
    rest_key: np.ndarray
    offsets: np.ndarray

    @property
    def reduced_dim(self) -> int:
        return int(self.offsets[-1])

    def reduced_index(self) -> np.ndarray:
        """Index of each basis vector's S-part in the direct sum ⊕_k (k-particle sector on S)."""
        return self.offsets[self.local_k] + self.local_index


def split_sector(sector: FockSector, S) -> SectorSplit:
    sites = tuple(_region_indices(S))
    if not sites:
        raise ValueError("cannot split off an empty region")
    rest = tuple(i for i in range(sector.num_sites) if i not in set(sites))
    occ_S = sector.basis[:, list(sites)]
    occ_R = sector.basis[:, list(rest)]
    local_sectors = tuple(_cached_sector(len(sites), k) for k in range(sector.n + 1))
    local_k = occ_S.sum(axis=1)
    local_index = np.empty(sector.dim, dtype=np.int64)
    for k, sec in enumerate(local_sectors):
        sel = local_k == k
        if sel.any():
            local_index[sel] = sec.indices_of(occ_S[sel])
    if rest:
        # rank within the complement's own sector, shifted by the sizes of lower sectors
        k_rest = occ_R.sum(axis=1)
        shift = np.concatenate([[0], np.cumsum([sector_dimension(len(rest), q) for q in range(sector.n + 1)])])
        rest_key = shift[k_rest] + composition_rank(occ_R, sector.n)
    else:
        rest_key = np.zeros(sector.dim, dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum([s.dim for s in local_sectors])])
    return SectorSplit(sector, sites, rest, local_sectors, local_k, local_index, rest_key, offsets)


class LocalOperator:
    """Particle-number-conserving operator localized in a region S.

    Stored as one block per local particle number k, each a matrix on the
    k-particle sector of S. Embedding into any global sector acts with the
    block on the S factor and as the identity on S^c, so the result always
    commutes with N and with every a_x^# for x outside S.
    """

    def __init__(self, sites: Sequence[int], blocks: Mapping[int, np.ndarray]):
        self.sites = tuple(_region_indices(sites))
        self.blocks = {int(k): np.asarray(b, dtype=complex) for k, b in blocks.items()}
        for k, b in self.blocks.items():
            d = sector_dimension(len(self.sites), k)
            if b.shape != (d, d):
                raise ValueError(f"block k={k} must be {d}×{d}, got {b.shape}")

    @classmethod
    def from_function(cls, sites, max_k: int, block_fn: Callable[[FockSector], np.ndarray]):
        sites = tuple(_region_indices(sites))
        return cls(sites, {k: block_fn(_cached_sector(len(sites), k)) for k in range(max_k + 1)})

    @classmethod
    def from_occupation_function(cls, sites, max_k: int, g: Callable[[np.ndarray], np.ndarray]):
        """Diagonal operator with value g(local occupation rows) on each local basis vector."""
        return cls.from_function(sites, max_k, lambda sec: np.diag(np.asarray(g(sec.basis), dtype=complex)))

    @property
    def max_k(self) -> int:
        return max(self.blocks)

    def norm(self, max_k: int | None = None) -> float:
        """Operator norm on states with at most ``max_k`` particles in S."""
        ks = [k for k in self.blocks if max_k is None or k <= max_k]
        return max(float(np.linalg.norm(self.blocks[k], 2)) if self.blocks[k].size else 0.0 for k in ks)

    def adjoint(self) -> LocalOperator:
        return LocalOperator(self.sites, {k: b.conj().T for k, b in self.blocks.items()})

    def map_blocks(self, fn: Callable[[int, np.ndarray], np.ndarray]) -> LocalOperator:
        return LocalOperator(self.sites, {k: fn(k, b) for k, b in self.blocks.items()})

    def on(self, sector: FockSector) -> sp.csr_matrix:
        """Matrix of the operator on a global n-particle sector."""
        if sector.n > self.max_k:
            raise ValueError(f"local blocks only cover k <= {self.max_k}, sector has n={sector.n}")
        split = split_sector(sector, self.sites)
        rows, cols, vals = [], [], []
        order = np.lexsort((split.local_index, split.rest_key, split.local_k))
        keys = np.stack([split.local_k[order], split.rest_key[order]], axis=1)
        boundaries = np.flatnonzero(np.any(np.diff(keys, axis=0) != 0, axis=1)) + 1
        for group in np.split(order, boundaries):
            k = int(split.local_k[group[0]])
            block = self.blocks[k]
            r, c = np.nonzero(block)
            rows.append(group[r])
            cols.append(group[c])
            vals.append(block[r, c])
        if not rows:
            return sp.csr_matrix((sector.dim, sector.dim), dtype=complex)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(sector.dim, sector.dim),
        )


def support_check(
    reps: Mapping[int, object],
    X,
    sectors: Mapping[int, FockSector],
    atol: float = 1e-10,
) -> bool:
    """True iff [A, a_x] and [A, a_x^*] vanish for every x outside X.

    ``reps`` maps particle numbers to matrices of A on the corresponding sector;
    every adjacent pair (n, n+1) present in both ``reps`` and ``sectors`` is tested.
    """
    inside = set(_region_indices(X))
    ns = sorted(n for n in reps if n in sectors)
    pairs = [(n, n + 1) for n in ns if n + 1 in reps]
    if not pairs:
        raise ValueError("support_check needs representations in two adjacent sectors")
    L = sectors[ns[0]].num_sites
    for lo, hi in pairs:
        A_lo = sp.csr_matrix(reps[lo])
        A_hi = sp.csr_matrix(reps[hi])
        for x in range(L):
            if x in inside:
                continue
            a = annihilation(sectors[hi], sectors[lo], x)
            comm = A_lo @ a - a @ A_hi
            if comm.nnz and abs(comm).max() > atol:
                return False
    return True


def is_localized_in(sector: FockSector, op, S, atol: float = 1e-10) -> bool:
    """Single-sector test that ``op`` has the form ⊕_k A_k ⊗ 1 for the split S ∪ S^c.

    No matrix elements may connect different configurations on S^c, and the block
    seen on S must not depend on which configuration S^c is in. When S^c is
    nonempty this is equivalent to [op, a_x^#] = 0 for all x outside S.
    """
    if not _region_indices(S):
        A = sp.csr_matrix(op)
        return abs(A - sp.identity(sector.dim) * A.diagonal().mean()).max() <= atol if sector.dim else True
    split = split_sector(sector, S)
    A = sp.coo_matrix(op)
    big = np.abs(A.data) > atol
    if np.any(split.rest_key[A.row[big]] != split.rest_key[A.col[big]]):
        return False
    dense = sp.csr_matrix(op)
    reference: dict[int, np.ndarray] = {}
    order = np.lexsort((split.local_index, split.rest_key))
    keys = split.rest_key[order]
    for group in np.split(order, np.flatnonzero(np.diff(keys)) + 1):
        k = int(split.local_k[group[0]])
        block = dense[group][:, group].toarray()
        if k not in reference:
            reference[k] = block
        elif np.abs(block - reference[k]).max(initial=0) > atol:
            return False
    return True


# ---------------------------------------------------------------------------
# plain-text triplet files
# ---------------------------------------------------------------------------


def write_triplets(path, op, hermitian: bool | None = None) -> None:
    """Write ``dim nnz hermitian`` then ``row col re im`` lines with 17 significant digits."""
    m = sp.coo_matrix(op)
    if m.shape[0] != m.shape[1]:
        raise ValueError("triplet files hold square operators")
    m.sum_duplicates()
    keep = m.data != 0
    rows, cols, data = m.row[keep], m.col[keep], np.asarray(m.data[keep], dtype=complex)
    order = np.lexsort((cols, rows))
    if hermitian is None:
        hermitian = is_hermitian(m.tocsr())
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {len(order)} {int(bool(hermitian))}\n")
        for i in order:
            fh.write(f"{rows[i]} {cols[i]} {data[i].real:.17g} {data[i].imag:.17g}\n")


def read_triplets(path) -> tuple[sp.csr_matrix, bool]:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: malformed header {header!r}")
        dim, nnz, herm = int(header[0]), int(header[1]), bool(int(header[2]))
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 4))
    if data.shape[0] != nnz:
        raise ValueError(f"{path}: header announces {nnz} entries, found {data.shape[0]}")
    op = sp.csr_matrix(
        (data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))),
        shape=(dim, dim),
    )
    if herm and not is_hermitian(op):
        raise ValueError(f"{path}: flagged hermitian but entries are not")
    return op, herm
