"""Cutoff functions, their certified derivative bounds, and ASTLO operators.

Two cutoff families live here. :class:`SmoothSwitch` is a monotone χ whose
derivative is an exponential bump on (a, b). :class:`BandLimitedCutoff` is
f = ∫φ̌⁴ for a compactly supported φ on (−1, 1), with the inverse transform

    φ̌(x) = (1/2π) ∫ φ(ξ) e^{iξx} dξ

evaluated by composite Gauss-Legendre quadrature. φ is rescaled so that
∫φ̌⁴ = 1, which makes f′ = u² hold exactly for u = φ̌².
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicHermiteSpline

from .fock import FockSector, second_quantize
from .lattice import Lattice, Region, distance_to_region
from .model import CouplingMatrix, build_hamiltonian, kappa

__all__ = [
    "AstloWeights",
    "BandLimitedCutoff",
    "BumpSpectrum",
    "SmoothSwitch",
    "TAYLOR_CONSTANT",
    "astlo_operator",
    "build_cutoff",
    "derived_family",
    "index_sets",
    "make_bump",
    "one_body_density",
    "product_bound_check",
    "rme_derivative_check",
    "rme_first_order_check",
    "supnorm_certificate",
    "symmetrized_taylor_rhs",
    "write_cutoff_samples",
]

# universal constant of the symmetrized Taylor bound
TAYLOR_CONSTANT = 32.0


def _bump(z: np.ndarray) -> np.ndarray:
    """exp(−1/(1−z²)) on (−1, 1), zero elsewhere."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


@dataclass(frozen=True)
class BumpSpectrum:
    """φ(ξ) = exp(−1/(1−((ξ−c)/w)²)) supported in (c−w, c+w) ⊆ (−1, 1), optionally times ξ^power."""

    center: float = 0.0
    halfwidth: float = 1.0
    power: int = 0

    def __post_init__(self):
        if self.halfwidth <= 0:
            raise ValueError("bump halfwidth must be positive")
        if abs(self.center) + self.halfwidth > 1 + 1e-15:
            raise ValueError("bump support must lie inside (−1, 1)")

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return _bump((xi - self.center) / self.halfwidth) * xi**self.power

    def times_power(self, k: int) -> BumpSpectrum:
        return BumpSpectrum(self.center, self.halfwidth, self.power + k)

    def samples(self, grid_size: int = 1025) -> tuple[np.ndarray, np.ndarray]:
        """Values on a uniform grid of [−1, 1]."""
        xi = np.linspace(-1.0, 1.0, grid_size)
        return xi, self(xi)


def make_bump(center: float = 0.0, halfwidth: float = 1.0) -> BumpSpectrum:
    return BumpSpectrum(center, halfwidth)


def _gauss_legendre(panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _cumulative(g: np.ndarray, dg: np.ndarray, h: float) -> np.ndarray:
    """Running integral of g on a uniform grid using the endpoint-corrected trapezoid rule."""
    inc = h * (g[:-1] + g[1:]) / 2 + h * h * (dg[:-1] - dg[1:]) / 12
    return np.concatenate([[0.0], np.cumsum(inc)])


def _leibniz_square(D: np.ndarray, j: int, k: int) -> np.ndarray:
    """k-th derivative of (g^{(j)})² given rows D[i] = g^{(i)}."""
    return sum(math.comb(k, i) * D[j + i] * D[j + k - i] for i in range(k + 1))


def _leibniz_fourth(D: np.ndarray, j: int, m: int) -> np.ndarray:
    """m-th derivative of (g^{(j)})⁴ by the multinomial rule."""
    total = np.zeros(D.shape[1:])
    for a in range(m + 1):
        for b in range(m - a + 1):
            for c in range(m - a - b + 1):
                d = m - a - b - c
                coef = math.factorial(m) // (math.factorial(a) * math.factorial(b) * math.factorial(c) * math.factorial(d))
                total = total + coef * D[j + a] * D[j + b] * D[j + c] * D[j + d]
    return total


class BandLimitedCutoff:
    """f(x) = ∫_{−∞}^x φ̌⁴ with ∫φ̌⁴ = 1, plus u = φ̌², u_k = (φ̌^{(k)})² and derivative data.

    Real-space data lives on a uniform grid over [−tail·T, tail·T]; the
    evaluators clamp f to 0 or 1 outside [−T, T].
    """

    def __init__(
        self,
        phi: Callable[[np.ndarray], np.ndarray],
        resolution: int = 1024,
        T: float = 20.0,
        k_max: int = 8,
        step: float = 0.02,
        tail: float = 10.0,
        derivative_orders: int | None = None,
    ):
        if resolution < 1024:
            raise ValueError("resolution must be at least 2**10 quadrature nodes")
        if T < 20:
            raise ValueError("evaluation domain half-width T must be at least 20")
        order = 32
        panels = max(1, math.ceil(resolution / order))
        self.phi = phi
        self.T = float(T)
        self.k_max = int(k_max)
        # orders needed by the sup-norm certificates (u_j^{(k)} up to j + k)
        self.orders = derivative_orders if derivative_orders is not None else self.k_max + 8
        self.nodes, self.qweights = _gauss_legendre(panels, order)
        self.phi_values = np.asarray(phi(self.nodes), dtype=float)
        if not np.any(self.phi_values):
            raise ValueError("φ vanishes identically")
        self.step = float(step)
        half = tail * self.T
        n = int(round(half / step))
        self.grid = np.arange(-n, n + 1) * step

        raw, phase = self._transform(self.grid, range(2), scale=1.0, phase=None)
        self.phase = phase
        Z = _cumulative(raw[0] ** 4, 4 * raw[0] ** 3 * raw[1], step)[-1]
        self.normalization_constant = float(Z)
        self.scale = Z ** -0.25
        self.D, _ = self._transform(self.grid, range(self.orders + 1), self.scale, phase)
        g = self.D[0] ** 4
        dg = 4 * self.D[0] ** 3 * self.D[1]
        self.F = _cumulative(g, dg, step)
        self._spline = CubicHermiteSpline(self.grid, self.F, g)
        self._Z: dict[int, float] = {}
        lo, hi = self._raw_f(-self.T), self._raw_f(self.T)
        if lo > 1e-6 or abs(hi - 1) > 1e-6:
            raise ValueError(f"quadrature residual too large: f(−T)={lo:.3e}, 1−f(T)={1 - hi:.3e}")

    # -- spectral evaluation -------------------------------------------------

    def _transform(self, x, orders, scale, phase):
        """Rows k ↦ (phase-rotated) φ̌^{(k)}(x) for the requested orders."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        orders = list(orders)
        cols = np.stack([self.qweights * self.phi_values * (1j * self.nodes) ** k for k in orders], axis=1)
        cols *= scale / (2 * np.pi)
        out = np.empty((len(orders), x.size), dtype=complex)
        chunk = 2048
        for start in range(0, x.size, chunk):
            sl = slice(start, start + chunk)
            out[:, sl] = (np.exp(1j * np.outer(x[sl], self.nodes)) @ cols).T
        if phase is None:
            # φ̌ must be real up to a global phase for φ̌⁴ to be a density
            i = np.argmax(np.abs(out[0]))
            phase = out[0, i] / abs(out[0, i])
        rotated = out / phase
        tol = 1e-10 * np.abs(rotated).max(initial=0) + 1e-300
        if np.abs(rotated.imag).max(initial=0) > tol:
            raise ValueError("φ̌ is not real up to a constant phase; φ must be even or odd")
        return rotated.real, phase

    def phi_check(self, x, k: int = 0) -> np.ndarray:
        """φ̌^{(k)} of the normalized φ at arbitrary points."""
        x = np.asarray(x, dtype=float)
        vals, _ = self._transform(x.ravel(), [k], self.scale, self.phase)
        return vals[0].reshape(x.shape)

    def u(self, x) -> np.ndarray:
        return self.phi_check(x, 0) ** 2

    def u_k(self, x, k: int) -> np.ndarray:
        """(φ̌^{(k)})²."""
        return self.phi_check(x, k) ** 2

    def f_prime(self, x) -> np.ndarray:
        """f′ = φ̌⁴ = u², zero outside [−T, T] to match the clamped f."""
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= self.T, self.u(x) ** 2, 0.0)

    def _raw_f(self, x):
        return self._spline(np.clip(x, self.grid[0], self.grid[-1]))

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x < -self.T, 0.0, np.where(x > self.T, 1.0, self._raw_f(np.clip(x, -self.T, self.T))))

    __call__ = f

    # -- grid derivatives ----------------------------------------------------

    def u_derivative_grid(self, j: int, k: int) -> np.ndarray:
        """u_j^{(k)} on the grid."""
        if j + k > self.orders:
            raise ValueError(f"derivative order {j + k} beyond cached order {self.orders}")
        return _leibniz_square(self.D, j, k)

    def moment_four(self, j: int) -> float:
        """Z_j = ∫(φ̌^{(j)})⁴ = ∫u_j²."""
        if j not in self._Z:
            g = self.D[j] ** 4
            dg = 4 * self.D[j] ** 3 * self.D[j + 1]
            self._Z[j] = float(_cumulative(g, dg, self.step)[-1])
        return self._Z[j]

    def f_derivative_grid(self, j: int, k: int) -> np.ndarray:
        """f_j^{(k)} = (u_j²)^{(k−1)} / ∫u_j² on the grid, k ≥ 1."""
        if k < 1:
            raise ValueError("f derivatives start at order 1")
        if j + k - 1 > self.orders:
            raise ValueError(f"derivative order {j + k - 1} beyond cached order {self.orders}")
        return _leibniz_fourth(self.D, j, k - 1) / self.moment_four(j)

    # -- the sup-norm constant C_f ------------------------------------------

    @cached_property
    def phi_l1(self) -> float:
        """∫|φ| for the normalized φ."""
        return float(self.scale * np.sum(self.qweights * np.abs(self.phi_values)))

    def C_f_for(self, j: int) -> float:
        """max((∫|φ|)²/(2π)², (∫|φ|)⁴/((2π)⁴ Z_j)); the second term carries f_j's normalization."""
        c_u = self.phi_l1**2 / (2 * np.pi) ** 2
        c_fj = self.phi_l1**4 / ((2 * np.pi) ** 4 * self.moment_four(j))
        return float(max(c_u, c_fj))

    @property
    def C_f(self) -> float:
        """Sup-norm constant for f itself and every u_j."""
        return self.C_f_for(0)


def build_cutoff(phi=None, resolution: int = 1024, T: float = 20.0, k_max: int = 8, **kw) -> BandLimitedCutoff:
    """Cutoff in class 𝓕 from a bump spectrum; the standard bump when ``phi`` is None."""
    return BandLimitedCutoff(phi if phi is not None else make_bump(), resolution=resolution, T=T, k_max=k_max, **kw)


_family_cache: dict = {}


def derived_family(c: BandLimitedCutoff, k: int):
    """(u_k, f_k): u_k = (φ̌^{(k)})² and f_k the normalized antiderivative of u_k².

    f_k is itself built as a band-limited cutoff from the spectrum ξ^k φ(ξ).
    """
    if not 0 <= k <= c.k_max:
        raise ValueError(f"derived family order {k} outside 0..{c.k_max}")
    u_k = lambda x: c.u_k(x, k)
    if k == 0:
        return u_k, c
    key = (id(c), k)
    if key not in _family_cache:
        base = c.phi
        phi_k = base.times_power(k) if isinstance(base, BumpSpectrum) else (lambda xi: base(xi) * np.asarray(xi) ** k)
        # spectral weight near the band edge grows with k, fattening the tails;
        # widen the domain until the normalization residual is met
        T = c.T
        while True:
            try:
                built = BandLimitedCutoff(phi_k, resolution=len(c.nodes), T=T, k_max=0, step=c.step, derivative_orders=2)
                break
            except ValueError as err:
                if "residual" not in str(err) or T >= 16 * c.T:
                    raise
                T *= 2
        _family_cache[key] = built
    return u_k, _family_cache[key]


# ---------------------------------------------------------------------------
# certified bounds
# ---------------------------------------------------------------------------


def supnorm_certificate(c: BandLimitedCutoff, j: int, k: int, slack: float = 1e-6) -> dict:
    """Measured ‖u_j^{(k)}‖_∞, ‖f_j^{(k)}‖_∞ against 2^k C_f and 4^{k−1} C_f, with C_f = C_f(j)."""
    if k < 1 or j < 0:
        raise ValueError("need j ≥ 0 and k ≥ 1")
    mu = float(np.abs(c.u_derivative_grid(j, k)).max())
    mf = float(np.abs(c.f_derivative_grid(j, k)).max())
    C = c.C_f_for(j)
    bu, bf = 2.0**k * C, 4.0 ** (k - 1) * C
    return {
        "j": j,
        "k": k,
        "C_f": C,
        "u": {"measured": mu, "bound": bu, "pass": mu <= bu + slack},
        "f": {"measured": mf, "bound": bf, "pass": mf <= bf + slack},
        "pass": mu <= bu + slack and mf <= bf + slack,
    }


def product_bound_check(c: BandLimitedCutoff, k: int, x, y, slack: float = 1e-8) -> dict:
    """Pointwise |f^{(k)}(x)| and |u u^{(k)}(x)| against their product-of-admissible bounds."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    D = np.stack([c.phi_check(x, i) for i in range(k + 1)])
    fk = _leibniz_fourth(D, 0, k - 1)
    uuk = D[0] ** 2 * _leibniz_square(D, 0, k)
    ux = np.stack([c.u_k(x, a) for a in range(k + 1)])
    uy = np.stack([c.u_k(y, a) for a in range(k + 1)])
    sym = (ux * uy + ux * (ux - uy)).sum(axis=0)
    rhs_f = 4.0**k * k * k * sym
    rhs_u = 2.0 ** (k - 1) * (k + 1) * sym
    ok_f = np.abs(fk) <= rhs_f + slack
    ok_u = np.abs(uuk) <= rhs_u + slack
    return {
        "k": k,
        "f_margin": float((rhs_f - np.abs(fk)).min()),
        "u_margin": float((rhs_u - np.abs(uuk)).min()),
        "pass": bool(ok_f.all() and ok_u.all()),
    }


def _compositions(m: int, l: int):
    """Compositions of m into l positive parts, lexicographic."""
    if l == 1:
        yield (m,)
        return
    for first in range(1, m - l + 2):
        for rest in _compositions(m - first, l - 1):
            yield (first,) + rest


def index_sets(l: int, m: int, guard: int = 10**6) -> list[tuple[tuple[int, ...], list[tuple[int, ...]]]]:
    """𝒦_{l,m} with, for each k, the list 𝒥_k = Π [0, k_i]."""
    if l < 1 or m < l:
        raise ValueError("need 1 ≤ l ≤ m")
    count = math.comb(m - 1, l - 1)
    if count > guard:
        raise ValueError(f"|K_{{{l},{m}}}| = {count} exceeds guard {guard}")
    out = []
    total = 0
    for k in _compositions(m, l):
        total += math.prod(ki + 1 for ki in k)
        if total > guard:
            raise ValueError(f"index enumeration exceeds guard {guard}")
        out.append((k, list(itertools.product(*(range(ki + 1) for ki in k)))))
    return out


def _taylor_coefficients(n: int) -> dict[int, np.ndarray]:
    """For each l, m: weight of u_J(x)u_J(y) summed over 𝒦_{l,m} × 𝒥, indexed by J."""
    table = {}
    for l in range(1, n):
        for m in range(l, n + 1):
            coef = np.zeros(m + 1)
            for k, js in index_sets(l, m):
                w = 1.0 / math.prod(math.factorial(ki - 1) for ki in k)
                for j in js:
                    coef[sum(j)] += w
            table[(l, m)] = coef
    return table


def taylor_remainder_factor(n: int) -> float:
    """4^n (1/n! + Σ_{l=2}^{n−1} (e/2)^l Σ_{m=l−1}^{n} 2^m)."""
    inner = sum((math.e / 2) ** l * sum(2.0**m for m in range(l - 1, n + 1)) for l in range(2, n))
    return 4.0**n * (1.0 / math.factorial(n) + inner)


def symmetrized_taylor_rhs(c: BandLimitedCutoff, x, y, n: int, C: float = TAYLOR_CONSTANT) -> np.ndarray:
    """Right-hand side of the symmetrized Taylor bound for |f(x) − f(y)|, broadcasting over x, y."""
    if n < 1:
        raise ValueError("expansion order must be at least 1")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    r = np.abs(x - y)
    # evaluate the spectral data once per distinct point
    pts, inv = np.unique(np.concatenate([x.ravel(), y.ravel()]), return_inverse=True)
    ix, iy = inv[: x.size].reshape(x.shape), inv[x.size :].reshape(y.shape)
    table = {J: c.u_k(pts, J) for J in range(n + 1)}
    ux = {J: v[ix] for J, v in table.items()}
    uy = {J: v[iy] for J, v in table.items()}
    out = r * ux[0] * uy[0]
    for (l, m), coef in _taylor_coefficients(n).items():
        prod = sum(coef[J] * ux[J] * uy[J] for J in range(m + 1) if coef[J])
        out = out + C * r * 4.0 ** (m - l) * r**m * prod
    return out + c.C_f * r ** (n + 1) * taylor_remainder_factor(n)


# ---------------------------------------------------------------------------
# switches and ASTLO weights
# ---------------------------------------------------------------------------


class SmoothSwitch:
    """Monotone χ with χ′ ∝ exp(−1/((μ−a)(b−μ))) on (a, b); χ = 0 left of a, 1 right of b."""

    def __init__(self, a: float, b: float, grid: int = 4001):
        if not 0 < a < b:
            raise ValueError("switch support must satisfy 0 < a < b")
        self.a, self.b = float(a), float(b)
        mu = np.linspace(a, b, grid)
        raw = self._raw_prime(mu)
        # cell integrals by 8-point Gauss-Legendre keep the table accurate to ~1e-14
        gx, gw = np.polynomial.legendre.leggauss(8)
        left, right = mu[:-1], mu[1:]
        half = (right - left) / 2
        pts = (left + right)[:, None] / 2 + half[:, None] * gx[None, :]
        cells = (self._raw_prime(pts) * gw[None, :]).sum(axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(cells)])
        self.norm = float(cum[-1])
        self._spline = CubicHermiteSpline(mu, cum / self.norm, raw / self.norm)

    def _raw_prime(self, mu):
        mu = np.asarray(mu, dtype=float)
        out = np.zeros_like(mu)
        inside = (mu > self.a) & (mu < self.b)
        m = mu[inside]
        out[inside] = np.exp(-1.0 / ((m - self.a) * (self.b - m)))
        return out

    def __call__(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float)
        inner = np.clip(self._spline(np.clip(mu, self.a, self.b)), 0.0, 1.0)
        return np.where(mu <= self.a, 0.0, np.where(mu >= self.b, 1.0, inner))

    def prime(self, mu) -> np.ndarray:
        return self._raw_prime(mu) / self.norm

    def sqrt_prime(self, mu) -> np.ndarray:
        return np.sqrt(self.prime(mu))


@dataclass(frozen=True)
class AstloWeights:
    """Site weights of dΓ(g(argument)).

    Region mode: argument (d_X(x) − v t)/s with v the ASTLO velocity v′.
    Radial mode: argument (ρ − v t − |x − center|)/s.
    """

    lattice: Lattice
    v: float
    s: float
    t: float
    region: Region | None = None
    center: int | None = None
    rho: float = 0.0

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("adiabatic scale s must be positive")
        if (self.region is None) == (self.center is None):
            raise ValueError("give exactly one of region or center")

    @property
    def mode(self) -> str:
        return "region" if self.region is not None else "radial"

    def arguments(self) -> np.ndarray:
        if self.region is not None:
            return (distance_to_region(self.lattice, self.region) - self.v * self.t) / self.s
        r = self.lattice.distances[self.center]
        return (self.rho - self.v * self.t - r) / self.s

    def values(self, profile: Callable) -> np.ndarray:
        w = np.asarray(profile(self.arguments()), dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("ASTLO weights must be finite")
        return w

    def at(self, t: float) -> AstloWeights:
        return AstloWeights(self.lattice, self.v, self.s, t, self.region, self.center, self.rho)


def astlo_operator(sector: FockSector, weights: AstloWeights, profile: Callable) -> sp.csr_matrix:
    """dΓ(profile(argument)) as a diagonal matrix on a sector."""
    return second_quantize(sector, weights.values(profile))


# ---------------------------------------------------------------------------
# recursive monotonicity checks
# ---------------------------------------------------------------------------


def one_body_density(sector: FockSector, psi: np.ndarray) -> np.ndarray:
    """γ_xy = ⟨ψ, a_x^* a_y ψ⟩."""
    from .fock import annihilation, enumerate_sector

    if sector.n == 0:
        return np.zeros((sector.num_sites, sector.num_sites), dtype=complex)
    lower = enumerate_sector(sector.num_sites, sector.n - 1, dim_cap=max(sector.dim, 1))
    phis = np.stack([annihilation(sector, lower, x) @ psi for x in range(sector.num_sites)])
    return phis.conj() @ phis.T


def rme_first_order_check(
    c: CouplingMatrix,
    sector: FockSector,
    cutoff: BandLimitedCutoff,
    weights: AstloWeights,
    psi: np.ndarray,
    slack: float = 1e-9,
) -> dict:
    """Σ_{x,y} |h_xy||x−y| u(x)u(y)|γ_xy| against κ⟨ψ, N_{f′,ts} ψ⟩."""
    lat = c.lattice
    args = weights.arguments()
    u = cutoff.u(args)
    gamma = one_body_density(sector, psi)
    M = np.abs(c.h) * lat.distances
    lhs = float(np.einsum("xy,x,y,xy->", M, u, u, np.abs(gamma)))
    fprime = cutoff.u(args) ** 2
    rhs = float(kappa(c.h, lat) * np.real(np.diag(gamma)) @ fprime)
    return {"lhs": lhs, "rhs": rhs, "pass": lhs <= rhs + slack}


def _default_times(lat: Lattice, X: Region, switch: SmoothSwitch, v_prime: float, s: float, count: int = 41):
    d = distance_to_region(lat, X)
    if v_prime <= 0:
        return np.zeros(1)
    lo = (d.min() - switch.b * s) / v_prime
    hi = (d.max() - switch.a * s) / v_prime
    return np.linspace(lo, hi, count)


def rme_derivative_check(
    c: CouplingMatrix,
    sector: FockSector,
    switch: SmoothSwitch,
    X: Region,
    v: float,
    s_values,
    times=None,
    v_prime: float | None = None,
    route: str = "sector",
) -> dict:
    """Minimal C*(s) with Dχ̂_ts ≤ −((v′−κ)/s) χ̂′_ts + C*(s)/s² N on the sector.

    ``route='sector'`` forms i[H, χ̂] + ∂_t χ̂ as a matrix on the sector;
    ``route='one-body'`` uses dΓ(K) with K = i[h, diag χ] and the fact that the
    top eigenvalue of dΓ(M) on n bosons is n λ_max(M). When ``times`` is None
    each s gets a window in which every site's argument sweeps across supp χ′.
    """
    lat = c.lattice
    k = kappa(c.h, lat)
    vp = (v + k) / 2 if v_prime is None else v_prime
    if not v > k:
        raise ValueError(f"velocity v={v} must exceed κ={k:.6g}")
    if switch.b > v - vp + 1e-12:
        raise ValueError(f"supp χ′ ⊂ ({switch.a}, {switch.b}) must lie in (0, v − v′) = (0, {v - vp:.6g})")
    d = distance_to_region(lat, X)
    H = build_hamiltonian(c, sector).toarray() if route == "sector" else None
    n = sector.n
    rows = []
    for s in s_values:
        ts = _default_times(lat, X, switch, vp, s) if times is None else np.asarray(times, dtype=float)
        worst = -np.inf
        norm_D = 0.0
        for t in ts:
            mu = (d - vp * t) / s
            chi = switch(mu)
            chi_p = switch.prime(mu)
            if route == "sector":
                occ = sector.basis
                chat = np.diag(occ @ chi)
                chat_p = np.diag(occ @ chi_p)
                D = 1j * (H @ chat - chat @ H) - (vp / s) * chat_p
                G = D + ((vp - k) / s) * chat_p
                top = np.linalg.eigvalsh(0.5 * (G + G.conj().T))[-1] / max(n, 1)
                norm_D = max(norm_D, float(np.linalg.norm(D, 2)))
            elif route == "one-body":
                K = 1j * c.h * (chi[None, :] - chi[:, None])
                G = K - (k / s) * np.diag(chi_p)
                top = np.linalg.eigvalsh(0.5 * (G + G.conj().T))[-1]
                Dm = K - (vp / s) * np.diag(chi_p)
                ev = np.linalg.eigvalsh(0.5 * (Dm + Dm.conj().T))
                norm_D = max(norm_D, n * float(np.abs(ev).max()))
            else:
                raise ValueError(f"unknown route {route!r}")
            worst = max(worst, top)
        rows.append({"s": float(s), "C_star": float(s * s * max(0.0, worst)), "top": float(worst), "norm_D": norm_D})
    ratios = []
    for a, b in zip(rows, rows[1:]):
        if a["C_star"] == 0:
            ratios.append(0.0 if b["C_star"] == 0 else math.inf)
        else:
            ratios.append(b["C_star"] / a["C_star"])
    return {"kappa": k, "v": v, "v_prime": vp, "rows": rows, "ratios": ratios}


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_cutoff_samples(path, profile: Callable, lo: float = -20.0, hi: float = 20.0, count: int = 2001) -> None:
    x = np.linspace(lo, hi, count)
    y = np.asarray(profile(x), dtype=float)
    with open(path, "w") as fh:
        for a, b in zip(x, y):
            fh.write(f"{a:.17g} {b:.17g}\n")


def certificates_json(c: BandLimitedCutoff, j_max: int = 4, k_max: int = 6) -> str:
    certs = [supnorm_certificate(c, j, k) for j in range(j_max + 1) for k in range(1, k_max + 1)]
    return json.dumps(certs, indent=2)
