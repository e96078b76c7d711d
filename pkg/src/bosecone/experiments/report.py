"""Experiment reports: per-point inequality instances, fits, and their serialization."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__

__all__ = [
    "ExperimentReport",
    "PowerFit",
    "Row",
    "code_version",
    "fit_power_law",
    "fmt_float",
]

ROW_COLUMNS = ("theorem", "scale", "t", "lhs", "rhs", "ratio", "pass")


def fmt_float(x) -> str:
    """Shortest round-trip text of a float (at most 17 significant digits)."""
    return repr(float(x))


def code_version() -> str:
    """Package version plus a digest of the package sources."""
    root = Path(__file__).resolve().parent.parent
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*.py")):
        digest.update(path.relative_to(root).as_posix().encode())
        digest.update(path.read_bytes())
    return f"{__version__}+{digest.hexdigest()[:12]}"


@dataclass(frozen=True)
class Row:
    """One inequality instance lhs ≤ rhs at a scale and time."""

    theorem: str
    scale: float
    t: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        d["pass"] = self.passed
        return d


@dataclass(frozen=True)
class PowerFit:
    """y ≈ A x^{−exponent} by least squares in log-log coordinates."""

    exponent: float
    prefactor: float
    r2: float
    points: int

    def conclusive(self, r2_min: float) -> bool:
        return self.points >= 2 and self.r2 >= r2_min


def fit_power_law(xs, ys) -> PowerFit | None:
    """Decay exponent of ys against xs; None if fewer than two positive points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0) & np.isfinite(ys)
    if keep.sum() < 2 or keep.sum() < len(ys):
        return None
    lx, ly = np.log(xs), np.log(ys)
    slope, icept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icept)
    spread = ((ly - ly.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / spread if spread > 0 else 1.0
    return PowerFit(float(-slope), float(np.exp(icept)), float(r2), int(len(xs)))


@dataclass
class ExperimentReport:
    """Outcome of one harness run.

    ``status`` is "pass", "fail" or "inconclusive". Every row is an
    inequality instance with both sides stored; ``constants`` holds the
    fitted C values and ``fits`` the exponent fits with their R².
    """

    theorem: str
    status: str
    rows: list[Row] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    heatmap: list[tuple[int, float, float]] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def header(self) -> str:
        p = self.provenance
        return f"# config_hash={p.get('config_hash', '')} code_version={p.get('code_version', '')} seed={p.get('seed', '')}\n"

    def to_json(self) -> str:
        fits = {k: (asdict(v) if isinstance(v, PowerFit) else v) for k, v in self.fits.items()}
        doc = {
            "theorem": self.theorem,
            "status": self.status,
            "rows": [r.as_dict() for r in self.rows],
            "constants": self.constants,
            "fits": fits,
            "extras": self.extras,
            "config": self.config,
            "provenance": self.provenance,
            "wall_clock": self.wall_clock,
        }
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True)

    def rows_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.rows:
            w.writerow([r.theorem, fmt_float(r.scale), fmt_float(r.t), fmt_float(r.lhs), fmt_float(r.rhs),
                        fmt_float(r.ratio), "true" if r.passed else "false"])
        return buf.getvalue()

    def heatmap_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("site", "t", "expectation"))
        for site, t, val in self.heatmap:
            w.writerow([site, fmt_float(t), fmt_float(val)])
        return buf.getvalue()

    def write(self, out_dir) -> list[Path]:
        """Write ``<theorem>.json``, ``<theorem>.csv`` and, if present, ``<theorem>_heatmap.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = self.theorem
        written = []
        for name, text in (
            (f"{stem}.json", self.to_json()),
            (f"{stem}.csv", self.rows_csv()),
        ):
            path = out / name
            path.write_text(text)
            written.append(path)
        if self.heatmap:
            path = out / f"{stem}_heatmap.csv"
            path.write_text(self.heatmap_csv())
            written.append(path)
        return written


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x
