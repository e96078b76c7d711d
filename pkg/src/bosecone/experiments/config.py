"""Flat ``key = value`` experiment configuration with per-theorem presets.

Keys are dotted (``lattice.size = 9``). Unknown keys are rejected. Every
value is coerced to the type of its schema default, and each problem is
reported with the offending line or key.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..fock import DEFAULT_DIM_CAP, FockSector, enumerate_sector
from ..lattice import Lattice, Region, build_chain, build_grid
from ..model import (
    CouplingMatrix,
    build_hamiltonian,
    kappa,
    nearest_neighbor_couplings,
    power_law_couplings,
    truncate_couplings,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "SCHEMA",
    "THEOREMS",
    "VELOCITY_MULTIPLE",
    "parse_config_text",
    "resolve_config",
]


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value, or violated threshold."""


# key -> (default, description). The default fixes the value type.
SCHEMA: dict[str, tuple[object, str]] = {
    "lattice.kind": ("chain", "chain or grid"),
    "lattice.size": (9, "chain length, or grid side"),
    "coupling.preset": ("power_law", "power_law, nearest_neighbor or zero (h = 0)"),
    "coupling.alpha": (3.5, "power-law decay exponent"),
    "coupling.J": (1.0, "hopping amplitude"),
    "coupling.U": (1.0, "interaction amplitude"),
    "coupling.range": (0.0, "truncate couplings beyond this distance; 0 keeps all"),
    "coupling.stagger": (0.0, "staggered on-site potential (-1)^x times this value"),
    "sector.n": (2, "particle number"),
    "region.X": ([0], "sites of X"),
    "region.Y": ([], "sites of Y; empty picks the shell at distance 2xi"),
    "region.Z": ([], "sites of Z (correlation harness)"),
    "region.edge_margin": (0, "minimum distance of probe regions from the lattice edge; 0 disables"),
    "velocity.factor": (1.25, "v as a multiple of kappa"),
    "velocity.v": (0.0, "absolute v; overrides velocity.factor when positive"),
    "p": (1.4, "decay order p"),
    "scales.eta": ([2.0, 3.0, 4.0, 5.0], "eta ladder"),
    "scales.xi": ([2.0, 3.0, 4.0], "xi ladder"),
    "scales.s": ([4.0, 8.0, 16.0, 32.0], "adiabatic scale ladder"),
    "scales.ell": ([6.0], "correlation length ladder"),
    "time.points": (40, "grid points per cone window"),
    "time.budget": (10.0, "time horizon for front and correlation scans"),
    "time.reference_factor": (2.0, "post-cone reference time as a multiple of dist/kappa"),
    "time.ratio": (0.9, "fixed t/(eta/v) ratio for the macroscopic decay fit"),
    "state.kind": ("random", "random, localized, occupation, mixture or ground"),
    "state.occupation": ([], "occupation tuple for state.kind = occupation"),
    "density.a": (0.5, "lower density clamp as a fraction of the mean density"),
    "density.b": (1.5, "upper density clamp as a fraction of the mean density"),
    "macro.nu": (0.3, "initial cloud threshold nu"),
    "macro.nu_prime": (0.6, "final cloud threshold nu'"),
    "probe.A": ("pair", "observable at X: occupied, pair, number or centered-number"),
    "probe.B": ("occupied", "observable at Y: occupied, pair, number or identity"),
    "control.ensemble": (1, "number of seeded unitaries"),
    "signal.r_points": (8, "grid points for the signal strength r"),
    "slope.fraction": (0.1, "arrival threshold as a fraction of the per-site maximum"),
    "slope.points": (400, "time grid points for the front scan"),
    "switch.a": (0.2, "left edge of supp chi' as a fraction of v - v'"),
    "switch.b": (0.8, "right edge of supp chi' as a fraction of v - v'"),
    "astlo.states": (20, "seeded states for the first-order RME check"),
    "astlo.grid": (101, "points per axis of the Taylor domination grid on [-5, 5]"),
    "tolerance.stability": (3.0, "allowed max/min ratio of fitted constants"),
    "tolerance.contrast": (10.0, "required inside/outside cone contrast"),
    "tolerance.signal": (1e-3, "outside-cone signal bound in units of |A||B|"),
    "tolerance.control": (1e-4, "outside-cone infidelity bound"),
    "tolerance.exponent_slack": (0.5, "fitted exponent must reach p minus this"),
    "tolerance.r2": (0.9, "fits below this R^2 are inconclusive"),
    "seed": (0, "rng seed"),
    "dim_cap": (DEFAULT_DIM_CAP, "largest admissible sector dimension"),
}

THEOREMS = (
    "mvb",
    "mvb-density",
    "macro",
    "lc",
    "lrb",
    "corr",
    "signal",
    "control",
    "gap",
    "slope",
    "astlo-certify",
)

# v must exceed this multiple of kappa
VELOCITY_MULTIPLE = {
    "mvb": 1.0,
    "mvb-density": 1.0,
    "macro": 1.0,
    "lc": 2.0,
    "lrb": 2.0,
    "signal": 4.0,
    "control": 8.0,
    "astlo-certify": 1.0,
}

PRESETS: dict[str, dict[str, object]] = {
    "mvb": {"region.X": [0, 1, 2], "state.kind": "random"},
    "mvb-density": {
        "coupling.preset": "nearest_neighbor",
        "sector.n": 3,
        "region.X": [3, 4, 5],
        "scales.eta": [2.0, 3.0, 4.0],
        "state.kind": "mixture",
    },
    "macro": {"sector.n": 3, "region.X": [0], "state.kind": "random"},
    "lc": {"lattice.size": 11, "region.X": [0, 1], "velocity.factor": 2.5, "state.kind": "localized"},
    "lrb": {
        "lattice.size": 11,
        "region.X": [0, 1],
        "scales.xi": [3.0],
        "velocity.factor": 2.5,
        "state.kind": "localized",
    },
    "corr": {
        "coupling.preset": "nearest_neighbor",
        "sector.n": 3,
        "region.X": [0, 1],
        "region.Y": [7, 8],
        "region.Z": [0, 1, 2, 6, 7, 8],
        "state.kind": "occupation",
        "state.occupation": [0, 0, 0, 1, 1, 1, 0, 0, 0],
        "probe.A": "occupied",
        "time.budget": 4.0,
    },
    "signal": {
        "lattice.size": 11,
        "region.X": [0, 1],
        "scales.xi": [3.0],
        "velocity.factor": 4.5,
        "state.kind": "localized",
    },
    "control": {
        "lattice.size": 11,
        "region.X": [0, 1],
        "scales.xi": [3.0],
        "velocity.factor": 8.5,
        "state.kind": "localized",
    },
    "gap": {
        "coupling.preset": "nearest_neighbor",
        "coupling.U": 20.0,
        "region.X": [0],
        "state.kind": "ground",
        "probe.A": "centered-number",
        "probe.B": "number",
    },
    "slope": {
        "lattice.size": 11,
        "coupling.preset": "nearest_neighbor",
        "sector.n": 1,
        "region.X": [0],
        "state.kind": "occupation",
        "state.occupation": [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    },
    "astlo-certify": {
        "lattice.size": 7,
        "coupling.preset": "nearest_neighbor",
        "coupling.U": 0.0,
        "region.X": [0],
        "velocity.factor": 2.0,
    },
}


def _coerce(key: str, raw, where: str):
    default = SCHEMA[key][0]
    try:
        if isinstance(default, list):
            if isinstance(raw, str):
                text = raw.strip().strip("[]")
                items = [s for s in text.replace(",", " ").split() if s]
            else:
                items = list(raw)
            if key in ("region.X", "region.Y", "region.Z", "state.occupation"):
                return [_num(x) for x in items]
            return [float(x) for x in items]
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(_num(raw))
        if isinstance(default, float):
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: cannot read {raw!r} as a value for {key}") from None


def _num(x):
    v = float(x)
    if v != int(v):
        raise ValueError(x)
    return int(v)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse ``key = value`` lines. ``#`` starts a comment."""
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value', got {body!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        out[key] = _coerce(key, value, where)
    return out


def _format_value(v) -> str:
    if isinstance(v, list):
        return "[" + ", ".join(repr(x) for x in v) + "]"
    return repr(v) if isinstance(v, float) else str(v)


@dataclass
class ExperimentConfig:
    """Resolved configuration of one harness run, with derived physics objects."""

    theorem: str
    values: dict[str, object]
    validate_physics: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, key: str):
        return self.values[key]

    def with_updates(self, **updates) -> ExperimentConfig:
        vals = dict(self.values)
        for k, v in updates.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            vals[key] = _coerce(key, v, "override")
        return resolve_config(self.theorem, vals, self.validate_physics)

    def echo(self) -> str:
        """Canonical text of every resolved key, sorted."""
        return "".join(f"{k} = {_format_value(self.values[k])}\n" for k in sorted(self.values))

    @property
    def config_hash(self) -> str:
        digest = hashlib.sha256(f"theorem = {self.theorem}\n{self.echo()}".encode())
        return digest.hexdigest()[:16]

    @cached_property
    def lattice(self) -> Lattice:
        if self["lattice.kind"] == "chain":
            return build_chain(self["lattice.size"])
        return build_grid(2, self["lattice.size"])

    @cached_property
    def couplings(self) -> CouplingMatrix:
        lat = self.lattice
        preset = self["coupling.preset"]
        if preset == "power_law":
            c = power_law_couplings(lat, self["coupling.alpha"], self["coupling.J"], self["coupling.U"])
        elif preset == "nearest_neighbor":
            c = nearest_neighbor_couplings(lat, self["coupling.J"], self["coupling.U"])
        else:
            c = CouplingMatrix(lat, np.zeros((len(lat), len(lat))), self["coupling.U"] * np.eye(len(lat)))
        if self["coupling.range"] > 0:
            c = truncate_couplings(c, self["coupling.range"])
        if self["coupling.stagger"]:
            stag = self["coupling.stagger"] * (-1.0) ** np.arange(len(lat))
            c = CouplingMatrix(lat, c.h + np.diag(stag), c.w)
        return c

    @cached_property
    def kappa(self) -> float:
        return kappa(self.couplings.h, self.lattice)

    @property
    def velocity(self) -> float:
        if self["velocity.v"] > 0:
            return float(self["velocity.v"])
        return float(self["velocity.factor"] * self.kappa)

    @cached_property
    def sector(self) -> FockSector:
        return enumerate_sector(len(self.lattice), self["sector.n"], dim_cap=self["dim_cap"])

    @cached_property
    def hamiltonian(self):
        return build_hamiltonian(self.couplings, self.sector)

    def region(self, key: str) -> Region:
        return self.lattice.region(self[key])

    @property
    def finite_range(self) -> bool:
        return self["coupling.preset"] in ("nearest_neighbor", "zero") or self["coupling.range"] > 0


def _validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    kinds = {"chain", "grid"}
    if v["lattice.kind"] not in kinds:
        raise ConfigError(f"lattice.kind must be one of {sorted(kinds)}")
    if v["lattice.size"] < 1:
        raise ConfigError("lattice.size must be positive")
    if v["coupling.preset"] not in ("power_law", "nearest_neighbor", "zero"):
        raise ConfigError(f"coupling.preset {v['coupling.preset']!r} is not a known preset")
    if v["sector.n"] < 0:
        raise ConfigError("sector.n must be nonnegative")
    if v["time.points"] < 2:
        raise ConfigError("time.points must be at least 2")
    L = len(cfg.lattice)
    for key in ("region.X", "region.Y", "region.Z"):
        bad = [i for i in v[key] if not 0 <= i < L]
        if bad:
            raise ConfigError(f"{key}: sites {bad} outside the lattice of {L} sites")
    if cfg.theorem != "astlo-certify" and not v["region.X"]:
        raise ConfigError("region.X must not be empty")
    if v["state.occupation"] and (len(v["state.occupation"]) != L or sum(v["state.occupation"]) != v["sector.n"]):
        raise ConfigError(f"state.occupation must have {L} entries summing to sector.n = {v['sector.n']}")
    margin = v["region.edge_margin"]
    if margin > 0 and cfg.lattice.dim == 1:
        for key in ("region.X", "region.Y"):
            near = [i for i in v[key] if min(i, L - 1 - i) < margin]
            if near:
                raise ConfigError(f"{key}: sites {near} closer than {margin} to the lattice edge")
    cfg.sector  # raises DimensionCapError past the cap
    if not cfg.validate_physics:
        return
    p = v["p"]
    if p < 1:
        raise ConfigError(f"p = {p} must be at least 1")
    if v["coupling.preset"] == "power_law" and v["coupling.range"] <= 0:
        limit = v["coupling.alpha"] - cfg.lattice.dim - 1
        if not p < limit:
            raise ConfigError(
                f"p = {p} is not admissible: need p < alpha - d - 1 = {limit:g} "
                f"(alpha = {v['coupling.alpha']:g}, d = {cfg.lattice.dim})"
            )
    m = VELOCITY_MULTIPLE.get(cfg.theorem)
    if m is not None:
        k = cfg.kappa
        if not cfg.velocity > m * k:
            raise ConfigError(
                f"{cfg.theorem}: velocity v = {cfg.velocity:.6g} must exceed {m:g}*kappa = {m * k:.6g} "
                f"(kappa = {k:.6g})"
            )
    if v["macro.nu_prime"] <= v["macro.nu"] and cfg.theorem == "macro":
        raise ConfigError("macro.nu_prime must exceed macro.nu")
    if cfg.theorem in VELOCITY_MULTIPLE and not cfg.velocity > 0:
        raise ConfigError(f"{cfg.theorem}: velocity must be positive")
    if not 0 < v["switch.a"] < v["switch.b"] <= 1:
        raise ConfigError("need 0 < switch.a < switch.b <= 1")


def resolve_config(theorem: str, overrides: dict | None = None, validate_physics: bool = True) -> ExperimentConfig:
    """Schema defaults, then the theorem preset, then ``overrides``; validated."""
    if theorem not in THEOREMS and theorem != "moments":
        raise ConfigError(f"unknown experiment {theorem!r}")
    values = {k: (list(d) if isinstance(d, list) else d) for k, (d, _) in SCHEMA.items()}
    values.update(PRESETS.get(theorem, {}))
    for k, raw in (overrides or {}).items():
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
        values[k] = _coerce(k, raw, f"key {k}")
    cfg = ExperimentConfig(theorem, values, validate_physics)
    _validate(cfg)
    return cfg
