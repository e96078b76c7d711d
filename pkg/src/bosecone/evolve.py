"""Exact unitary dynamics on Fock sectors.

Small sectors (dim <= ``DENSE_LIMIT``) are propagated through a cached full
eigendecomposition; larger ones use ``scipy.sparse.linalg.expm_multiply``.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, expm_multiply

from .fock import FockSector, LocalOperator, enumerate_sector, is_hermitian, is_localized_in, split_sector
from .lattice import Lattice, Region
from .model import CouplingMatrix, build_hamiltonian

__all__ = [
    "DENSE_LIMIT",
    "QuantumState",
    "SpectralData",
    "commutator_expectation",
    "commutator_norm_on_state",
    "conjugate_state",
    "evolve_state",
    "evolve_times",
    "expectation",
    "fidelity",
    "ground_state_and_gap",
    "heisenberg_expectation",
    "heisenberg_operator",
    "local_hamiltonian_blocks",
    "localized_evolution",
    "localized_evolution_local",
    "partial_trace",
    "random_pure_state",
    "read_state",
    "spectral_data",
    "write_dense_matrix",
    "write_state",
]

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class QuantumState:
    """Pure vector or density matrix on one Fock sector."""

    sector: FockSector
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        d = self.sector.dim
        if data.shape not in ((d,), (d, d)):
            raise ValueError(f"state shape {data.shape} does not match sector dimension {d}")
        object.__setattr__(self, "data", data)

    @classmethod
    def pure(cls, sector: FockSector, vector, normalize: bool = False) -> QuantumState:
        v = np.asarray(vector, dtype=complex)
        if normalize:
            v = v / np.linalg.norm(v)
        elif abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("pure state is not normalized")
        return cls(sector, v)

    @classmethod
    def mixed(cls, sector: FockSector, rho) -> QuantumState:
        rho = np.asarray(rho, dtype=complex)
        if not np.allclose(rho, rho.conj().T, atol=1e-12, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-12:
            raise ValueError("density matrix does not have unit trace")
        if np.linalg.eigvalsh(rho).min() < -1e-12:
            raise ValueError("density matrix has negative eigenvalues")
        return cls(sector, rho)

    @classmethod
    def occupation(cls, sector: FockSector, occ) -> QuantumState:
        return cls(sector, sector.state(occ))

    @property
    def kind(self) -> str:
        return "pure" if self.data.ndim == 1 else "mixed"

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def norm(self) -> float:
        if self.is_pure:
            return float(np.linalg.norm(self.data))
        return float(np.trace(self.data).real)


def expectation(state: QuantumState, A) -> complex:
    """ω(A) = Tr(Aρ)."""
    if state.is_pure:
        psi = state.data
        return complex(np.vdot(psi, A @ psi))
    rho = state.data
    if sp.issparse(A):
        return complex((A @ rho).trace())
    return complex(np.einsum("ij,ji->", np.asarray(A), rho))


# ---------------------------------------------------------------------------
# spectral data and its cache
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gap: float
    degenerate: bool


_cache: dict[str, SpectralData] = {}
_cache_lock = threading.Lock()


def _fingerprint(H) -> str:
    H = sp.csr_matrix(H)
    H.sort_indices()
    digest = hashlib.sha1()
    digest.update(np.asarray(H.shape, dtype=np.int64).tobytes())
    digest.update(H.indptr.astype(np.int64).tobytes())
    digest.update(H.indices.astype(np.int64).tobytes())
    digest.update(np.asarray(H.data, dtype=complex).tobytes())
    return digest.hexdigest()


def spectral_data(H) -> SpectralData:
    """Full eigendecomposition, memoized by the matrix contents."""
    key = _fingerprint(H)
    hit = _cache.get(key)
    if hit is not None:
        return hit
    dense = H.toarray() if sp.issparse(H) else np.asarray(H)
    if not np.allclose(dense, dense.conj().T, atol=1e-12, rtol=0):
        raise ValueError("Hamiltonian is not Hermitian")
    evals, evecs = np.linalg.eigh(dense)
    gap = float(evals[1] - evals[0]) if len(evals) > 1 else float("inf")
    data = SpectralData(evals, evecs, gap, gap < 1e-10)
    with _cache_lock:
        _cache.setdefault(key, data)
    return _cache[key]


def ground_state_and_gap(H, dim_cap: int = 10_000) -> SpectralData:
    """Ground state and gap E_1 − E_0; ``degenerate`` flags gaps below 1e−10."""
    dim = H.shape[0]
    if dim > dim_cap:
        raise ValueError(f"dimension {dim} exceeds cap {dim_cap}")
    if dim <= DENSE_LIMIT or dim < 3:
        return spectral_data(H)
    if not is_hermitian(H):
        raise ValueError("Hamiltonian is not Hermitian")
    evals, evecs = eigsh(sp.csr_matrix(H), k=2, which="SA", tol=1e-12)
    order = np.argsort(evals)
    evals, evecs = evals[order], evecs[:, order]
    gap = float(evals[1] - evals[0])
    return SpectralData(evals, evecs, gap, gap < 1e-10)


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


def _propagate_vectors(H, vecs: np.ndarray, t: float) -> np.ndarray:
    """e^{-itH} applied to the columns of ``vecs``."""
    if t == 0:
        return vecs.copy()
    if H.shape[0] <= DENSE_LIMIT:
        sd = spectral_data(H)
        V = sd.eigenvectors
        return V @ (np.exp(-1j * t * sd.eigenvalues)[:, None] * (V.conj().T @ vecs))
    return expm_multiply(-1j * t * sp.csr_matrix(H), vecs)


def evolve_state(H, state: QuantumState, t: float) -> QuantumState:
    """Schrödinger evolution e^{−itH}ψ or e^{−itH}ρe^{itH}."""
    if H.shape[0] != state.sector.dim:
        raise ValueError("Hamiltonian and state live on different sectors")
    if state.is_pure:
        return QuantumState(state.sector, _propagate_vectors(H, state.data[:, None], t)[:, 0])
    U_rho = _propagate_vectors(H, state.data, t)
    rho_t = _propagate_vectors(H, U_rho.conj().T, t).conj().T
    return QuantumState(state.sector, 0.5 * (rho_t + rho_t.conj().T))


def evolve_times(H, state: QuantumState, times: Iterable[float]) -> list[QuantumState]:
    """Evolve one state to many times, sharing the cached eigendecomposition."""
    return [evolve_state(H, state, float(t)) for t in times]


def _unitary(H, t: float) -> np.ndarray:
    dim = H.shape[0]
    if dim <= DENSE_LIMIT:
        sd = spectral_data(H)
        V = sd.eigenvectors
        return (V * np.exp(-1j * t * sd.eigenvalues)) @ V.conj().T
    return expm_multiply(-1j * t * sp.csr_matrix(H), np.eye(dim, dtype=complex))


def heisenberg_operator(H, A, t: float) -> np.ndarray:
    """α_t(A) = e^{itH} A e^{−itH} as a dense matrix."""
    U = _unitary(H, t)
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    return U.conj().T @ A @ U


def heisenberg_expectation(H, state: QuantumState, A, t: float) -> complex:
    """ω_t(A) = ω(α_t(A)), evaluated through the Schrödinger-picture dual."""
    return expectation(evolve_state(H, state, t), A)


def commutator_expectation(H, state: QuantumState, A, B, t: float) -> complex:
    """ω([α_t(A), B])."""
    if state.is_pure:
        psi = state.data
        psi_t = _propagate_vectors(H, psi[:, None], t)[:, 0]
        b_psi = _propagate_vectors(H, (B @ psi)[:, None], t)[:, 0]
        bdag_psi = _propagate_vectors(H, (B.conj().T @ psi)[:, None], t)[:, 0]
        return complex(np.vdot(psi_t, A @ b_psi) - np.vdot(bdag_psi, A @ psi_t))
    At = heisenberg_operator(H, A, t)
    B = B.toarray() if sp.issparse(B) else np.asarray(B)
    rho = state.data
    return complex(np.trace(rho @ (At @ B - B @ At)))


def commutator_norm_on_state(H, state: QuantumState, A, B, t: float) -> float:
    """‖[α_t(A), B] ψ‖ for a pure state, i.e. sup over ‖C‖ ≤ 1 of |ω(C [α_t(A), B])|."""
    if not state.is_pure:
        raise ValueError("commutator norm on a state is defined here for pure states")
    psi = state.data
    U = lambda v, s: _propagate_vectors(H, v[:, None], s)[:, 0]
    first = U(A @ U(B @ psi, t), -t)
    second = B @ U(A @ U(psi, t), -t)
    return float(np.linalg.norm(first - second))


# ---------------------------------------------------------------------------
# localized evolution
# ---------------------------------------------------------------------------


def _sub_couplings(c: CouplingMatrix, S: Region) -> CouplingMatrix:
    idx = list(S.indices)
    sub = Lattice(c.lattice.dim, tuple(c.lattice.sites[i] for i in idx))
    return CouplingMatrix(sub, c.h[np.ix_(idx, idx)], c.w[np.ix_(idx, idx)])


def local_hamiltonian_blocks(c: CouplingMatrix, S: Region, max_k: int) -> LocalOperator:
    """H_S written on the local Fock space of S, one block per local particle number."""
    sub = _sub_couplings(c, S)
    blocks = {k: build_hamiltonian(sub, enumerate_sector(len(S), k)).toarray() for k in range(max_k + 1)}
    return LocalOperator(S.indices, blocks)


def localized_evolution_local(c: CouplingMatrix, S: Region, A: LocalOperator, t: float, max_k: int) -> LocalOperator:
    """α_t^S(A) computed inside F_S; returned as an operator localized in S."""
    if not set(A.sites) <= set(S.indices):
        raise ValueError(f"operator supported on {A.sites} is not localized in {S}")
    A_S = _extend_local(A, S.indices, max_k)
    H_S = local_hamiltonian_blocks(c, S, max_k)
    out = {}
    for k in range(max_k + 1):
        Hk = H_S.blocks[k]
        if Hk.size == 0:
            out[k] = A_S.blocks[k]
            continue
        evals, V = np.linalg.eigh(Hk)
        Uk = (V * np.exp(-1j * t * evals)) @ V.conj().T
        out[k] = Uk.conj().T @ A_S.blocks[k] @ Uk
    return LocalOperator(S.indices, out)


def _extend_local(A: LocalOperator, sites: tuple[int, ...], max_k: int) -> LocalOperator:
    """Re-express a local operator on a larger site set, acting as the identity on the added sites."""
    if tuple(A.sites) == tuple(sites):
        return A
    relabeled = LocalOperator([sites.index(s) for s in A.sites], A.blocks)
    blocks = {k: relabeled.on(enumerate_sector(len(sites), k)).toarray() for k in range(max_k + 1)}
    return LocalOperator(sites, blocks)


def localized_evolution(c: CouplingMatrix, S: Region, A, t: float, sector: FockSector) -> np.ndarray:
    """α_t^S(A) = e^{itH_S} A e^{−itH_S} on a global sector.

    ``A`` is either a :class:`LocalOperator` (support checked by site set) or a
    matrix on ``sector`` (support checked by :func:`is_localized_in`).
    """
    if isinstance(A, LocalOperator):
        if not set(A.sites) <= set(S.indices):
            raise ValueError(f"operator supported on {A.sites} is not localized in {S}")
        mat = A.on(sector).toarray()
    else:
        mat = A.toarray() if sp.issparse(A) else np.asarray(A)
        if not is_localized_in(sector, mat, S):
            raise ValueError(f"operator is not localized in {S}")
    H_S = build_hamiltonian(c.restricted(S), sector)
    return heisenberg_operator(H_S, mat, t)


# ---------------------------------------------------------------------------
# partial trace, fidelity, state control
# ---------------------------------------------------------------------------


def partial_trace(state: QuantumState, Y) -> np.ndarray:
    """[ρ]_Y on ⊕_{k=0..n} (k-particle sector of Y), blocks ordered by k."""
    sector = state.sector
    if isinstance(Y, Region) and len(Y) == 0:
        return np.ones((1, 1), dtype=complex)
    split = split_sector(sector, Y)
    row = split.reduced_index()
    # occupations on the complement already fix the local particle number
    _, col = np.unique(split.rest_key, return_inverse=True)
    ncol = int(col.max()) + 1

    def amplitude_matrix(vec):
        M = np.zeros((split.reduced_dim, ncol), dtype=complex)
        M[row, col] = vec
        return M

    if state.is_pure:
        Psi = amplitude_matrix(state.data)
        red = Psi @ Psi.conj().T
    else:
        w, V = np.linalg.eigh(state.data)
        red = np.zeros((split.reduced_dim, split.reduced_dim), dtype=complex)
        for p, v in zip(w, V.T):
            if p > 1e-15:
                Psi = amplitude_matrix(v)
                red += p * (Psi @ Psi.conj().T)
    return 0.5 * (red + red.conj().T)


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if w.min() < -1e-10:
        raise ValueError(f"matrix has eigenvalue {w.min():.3e} below −1e−10")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """F(ρ, σ) = ‖√ρ √σ‖_1 via eigen-square-roots and singular values."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError("density matrices act on different spaces")
    if np.array_equal(rho, sigma):
        # F(ρ, ρ) = Tr ρ; skip the square roots so the identity case is exact
        return float(min(1.0, np.trace(rho).real)) if abs(np.trace(rho).real - 1) > 1e-12 else 1.0
    s =np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False)
    return float(min(1.0, s.sum()))


def conjugate_state(state: QuantumState, U) -> QuantumState:
    """ρ ↦ UρU^* for a unitary U on the sector."""
    U = U.toarray() if sp.issparse(U) else np.asarray(U)
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-10, rtol=0):
        raise ValueError("conjugating operator is not unitary")
    if state.is_pure:
        return QuantumState(state.sector, U @ state.data)
    return QuantumState(state.sector, U @ state.data @ U.conj().T)


def random_pure_state(sector: FockSector, rng: np.random.Generator, support=None) -> QuantumState:
    """Normalized complex Gaussian vector, optionally restricted to basis indices ``support``."""
    v = rng.normal(size=sector.dim) + 1j * rng.normal(size=sector.dim)
    if support is not None:
        mask = np.zeros(sector.dim, dtype=bool)
        mask[support] = True
        v[~mask] = 0.0
    return QuantumState(sector, v / np.linalg.norm(v))


# ---------------------------------------------------------------------------
# text I/O
# ---------------------------------------------------------------------------


def write_state(path, state: QuantumState) -> None:
    if not state.is_pure:
        raise ValueError("vector files hold pure states")
    with open(path, "w") as fh:
        fh.write(f"{state.sector.dim}\n")
        for z in state.data:
            fh.write(f"{z.real:.17g} {z.imag:.17g}\n")


def read_state(path, sector: FockSector) -> QuantumState:
    with open(path) as fh:
        dim = int(fh.readline())
        data = np.loadtxt(fh, ndmin=2)
    if dim != sector.dim or data.shape != (dim, 2):
        raise ValueError(f"{path}: vector of dimension {dim} does not fit sector of dimension {sector.dim}")
    return QuantumState.pure(sector, data[:, 0] + 1j * data[:, 1], normalize=True)


def write_dense_matrix(path, M: np.ndarray) -> None:
    M = np.asarray(M, dtype=complex)
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row) + "\n")
