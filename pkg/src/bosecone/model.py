"""Coupling matrices, moment norms and the number-conserving boson Hamiltonian.

    H = Σ_{x,y} h_xy a_x^* a_y + ½ Σ_{x,y} a_x^* a_y^* w_xy a_y a_x
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .fock import FockSector, one_body_operator
from .lattice import Lattice, Region

__all__ = [
    "CouplingMatrix",
    "MomentReport",
    "build_hamiltonian",
    "finite_range_check",
    "interaction_diagonal",
    "kappa",
    "kappa_m",
    "moment_norm",
    "moment_report",
    "nearest_neighbor_couplings",
    "perturb_couplings",
    "power_law_couplings",
    "truncate_couplings",
]


@dataclass(frozen=True)
class CouplingMatrix:
    """Hermitian hopping ``h`` and real symmetric pair potential ``w`` on a lattice."""

    lattice: Lattice
    h: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        L = len(self.lattice)
        h = np.asarray(self.h, dtype=complex)
        w = np.asarray(self.w)
        if h.shape != (L, L) or w.shape != (L, L):
            raise ValueError(f"coupling matrices must be {L}×{L}")
        if not np.allclose(h, h.conj().T, atol=1e-14, rtol=0):
            raise ValueError("hopping matrix is not Hermitian")
        if np.iscomplexobj(w):
            if np.abs(w.imag).max(initial=0) > 1e-14:
                raise ValueError("pair potential must be real")
            w = w.real
        w = w.astype(float)
        if not np.allclose(w, w.T, atol=1e-14, rtol=0):
            raise ValueError("pair potential is not symmetric")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "w", w)

    def restricted(self, S) -> CouplingMatrix:
        """Couplings of H_S: entries outside S×S set to zero."""
        mask = np.zeros(len(self.lattice), dtype=bool)
        mask[list(S.indices if isinstance(S, Region) else S)] = True
        keep = np.outer(mask, mask)
        return CouplingMatrix(self.lattice, np.where(keep, self.h, 0), np.where(keep, self.w, 0))

    def scaled(self, hop: float = 1.0, interaction: float = 1.0) -> CouplingMatrix:
        return CouplingMatrix(self.lattice, hop * self.h, interaction * self.w)


def power_law_couplings(lat: Lattice, alpha: float, J: float = 1.0, U: float = 1.0) -> CouplingMatrix:
    """h_xy = J(1+|x−y|)^{−α} off the diagonal, w_xy = U(1+|x−y|)^{−α} with w_xx = U."""
    if alpha <= 0:
        raise ValueError("power-law exponent must be positive")
    decay = (1.0 + lat.distances) ** (-alpha)
    h = J * decay
    np.fill_diagonal(h, 0.0)
    w = U * decay
    np.fill_diagonal(w, U)
    return CouplingMatrix(lat, h, w)


def nearest_neighbor_couplings(lat: Lattice, J: float = 1.0, U: float = 0.0) -> CouplingMatrix:
    """Bose-Hubbard couplings: h_xy = J on unit-distance bonds, w = U on site."""
    nn = np.isclose(lat.distances, 1.0)
    h = np.where(nn, J, 0.0)
    w = U * np.eye(len(lat))
    return CouplingMatrix(lat, h, w)


def truncate_couplings(c: CouplingMatrix, R: float) -> CouplingMatrix:
    """Zero every hopping and interaction entry with |x − y| > R."""
    far = c.lattice.distances > R + 1e-12
    return CouplingMatrix(c.lattice, np.where(far, 0, c.h), np.where(far, 0, c.w))


def perturb_couplings(c: CouplingMatrix, strength: float, seed: int) -> CouplingMatrix:
    """Add a seeded uniform on-site potential in [−strength, strength] to the hopping diagonal."""
    rng = np.random.default_rng(seed)
    eps = rng.uniform(-strength, strength, size=len(c.lattice))
    return CouplingMatrix(c.lattice, c.h + np.diag(eps), c.w)


def _weighted_row_sup(u: np.ndarray, lat: Lattice, power: float) -> float:
    u = np.asarray(u)
    if u.shape != (len(lat), len(lat)):
        raise ValueError("matrix does not match the lattice")
    weight = lat.distances**power if power != 0 else np.ones_like(lat.distances)
    return float((np.abs(u) * weight).sum(axis=1).max(initial=0.0))


def moment_norm(u: np.ndarray, p: int, lat: Lattice) -> float:
    """‖u‖_p = sup_x Σ_y |u_xy| |x−y|^{p+1}."""
    if p < 1:
        raise ValueError("moment order p must be at least 1")
    return _weighted_row_sup(u, lat, p + 1)


def kappa(h: np.ndarray, lat: Lattice) -> float:
    """First moment κ = sup_x Σ_y |h_xy| |x−y|: the light-cone slope bound."""
    return _weighted_row_sup(h, lat, 1)


def kappa_m(h: np.ndarray, m: int, lat: Lattice) -> float:
    """κ^(m) = sup_x Σ_y |h_xy| |x−y|^m.

    For m = 0 the diagonal counts (|x−x|^0 = 1), i.e. κ^(0) is the sup row sum of |h|.
    """
    if m < 0:
        raise ValueError("moment order must be nonnegative")
    return _weighted_row_sup(h, lat, m)


def finite_range_check(u: np.ndarray, R: float, lat: Lattice) -> bool:
    """True iff u_xy = 0 exactly whenever |x − y| > R."""
    far = lat.distances > R + 1e-12
    return bool(np.all(np.asarray(u)[far] == 0))


@dataclass
class MomentReport:
    kappa: float
    kappa_p: dict = field(default_factory=dict)
    kappa_p_w: dict = field(default_factory=dict)
    kappa_m: list = field(default_factory=list)
    finite_range: float | None = None

    def to_json(self) -> str:
        d = asdict(self)
        d["kappa_p"] = {str(k): v for k, v in self.kappa_p.items()}
        d["kappa_p_w"] = {str(k): v for k, v in self.kappa_p_w.items()}
        return json.dumps(d, indent=2, sort_keys=True)


def moment_report(c: CouplingMatrix, ps=(1, 2, 3), m_max: int = 6, ranges=(1, 2, 3)) -> MomentReport:
    """κ, κ_p(h), κ_p(w) and κ^(m) for one coupling; finite_range is the smallest listed R that holds."""
    lat = c.lattice
    R = next((r for r in sorted(ranges) if finite_range_check(c.h, r, lat)), None)
    return MomentReport(
        kappa=kappa(c.h, lat),
        kappa_p={p: moment_norm(c.h, p, lat) for p in ps},
        kappa_p_w={p: moment_norm(c.w, p, lat) for p in ps},
        kappa_m=[kappa_m(c.h, m, lat) for m in range(m_max + 1)],
        finite_range=R,
    )


def interaction_diagonal(w: np.ndarray, occupations: np.ndarray) -> np.ndarray:
    """½ Σ_{x≠y} w_xy m_x m_y + ½ Σ_x w_xx m_x (m_x − 1) per occupation row."""
    m = np.asarray(occupations, dtype=float)
    off = w - np.diag(np.diag(w))
    pair = 0.5 * np.einsum("ix,xy,iy->i", m, off, m)
    onsite = 0.5 * (m * (m - 1.0)) @ np.diag(w)
    return pair + onsite


def build_hamiltonian(c: CouplingMatrix, sector: FockSector) -> sp.csr_matrix:
    """Sparse matrix of H on a fixed-N sector; hopping via dΓ(h), interaction diagonal."""
    if sector.num_sites != len(c.lattice):
        raise ValueError("sector and couplings live on different lattices")
    H = one_body_operator(sector, c.h)
    H = H + sp.diags(interaction_diagonal(c.w, sector.basis).astype(complex))
    H = sp.csr_matrix(H)
    H.eliminate_zeros()
    return H
