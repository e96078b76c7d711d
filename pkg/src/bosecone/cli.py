"""Command-line entry point: parse a config, run harnesses, write reports and a plotting script."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .experiments import (
    HARNESSES,
    THEOREMS,
    ConfigError,
    ExperimentConfig,
    ExperimentError,
    ExperimentReport,
    code_version,
    parse_config_text,
    resolve_config,
    run_smoke,
)
from .fock import DimensionCapError
from .model import moment_report

__all__ = [
    "EXIT_CONFIG",
    "EXIT_FAIL",
    "EXIT_OK",
    "EXIT_RESOURCE",
    "RunManifest",
    "dispatch",
    "emit_plots",
    "load_json",
    "main",
    "parse_config",
]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3
SUBCOMMANDS = ("moments", "smoke", *THEOREMS, "all")
PLOT_SCRIPT = "plot_reports.py"
PLOT_SCRIPT_VERSION = 1


def parse_config(path, theorem: str, extra: dict | None = None) -> ExperimentConfig:
    """Read a flat config file and resolve it against the preset of ``theorem``.

    ``extra`` holds command-line overrides (seed, dim_cap) applied last.
    """
    overrides = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        overrides = parse_config_text(p.read_text(), str(p))
    overrides.update(extra or {})
    return resolve_config(theorem, overrides)


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    out_dir: Path
    seed: int | None = None
    deterministic: bool = False
    jobs: int = 1
    dim_cap: int | None = None
    configs: list[ExperimentConfig] = field(default_factory=list)

    def overrides(self) -> dict:
        out = {}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.dim_cap is not None:
            out["dim_cap"] = self.dim_cap
        return out


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _prepare_out_dir(out: Path) -> Path:
    """Create the output directory by renaming a finished temporary directory into place."""
    if out.is_dir():
        return out
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=out.parent, prefix=f".{out.name}."))
    try:
        os.rename(tmp, out)
    except OSError:
        tmp.rmdir()
        if not out.is_dir():
            raise
    return out


def _write_report(rep: ExperimentReport, out: Path, cfg: ExperimentConfig | None) -> None:
    header = rep.header()
    _atomic_write(out / f"{rep.theorem}.json", header + rep.to_json() + "\n")
    _atomic_write(out / f"{rep.theorem}.csv", rep.rows_csv())
    if rep.heatmap:
        _atomic_write(out / f"{rep.theorem}_heatmap.csv", rep.heatmap_csv())
    if cfg is not None:
        _atomic_write(out / f"{rep.theorem}.config", header + f"# experiment = {cfg.theorem}\n" + cfg.echo())


def load_json(path) -> dict:
    """Read a JSON artifact, skipping its leading provenance comment line."""
    text = Path(path).read_text()
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return json.loads(body)


def _run_one(cfg: ExperimentConfig) -> ExperimentReport:
    return HARNESSES[cfg.theorem](cfg)


def dispatch(manifest: RunManifest) -> int:
    """Run the manifest's command and write artifacts; returns the exit status."""
    out = _prepare_out_dir(manifest.out_dir)
    cmd = manifest.command
    if cmd == "moments":
        cfg = parse_config(manifest.config_path, "moments", manifest.overrides())
        rep = moment_report(cfg.couplings)
        header = f"# config_hash={cfg.config_hash} code_version={code_version()} seed={cfg['seed']}\n"
        _atomic_write(out / "moments.json", header + rep.to_json() + "\n")
        print(rep.to_json())
        return EXIT_OK
    if cmd == "smoke":
        seed = manifest.seed if manifest.seed is not None else 0
        reports = run_smoke(seed=seed, dim_cap=manifest.dim_cap)
        for rep in reports:
            _write_report(rep, out, None)
        emit_plots(out)
        return _summarize(reports)
    names = THEOREMS if cmd == "all" else (cmd,)
    if cmd == "all" and manifest.config_path is not None:
        raise ConfigError("'all' runs every preset; pass a config to a single experiment instead")
    configs = [parse_config(manifest.config_path, name, manifest.overrides()) for name in names]
    manifest.configs = configs
    jobs = 1 if manifest.deterministic else max(1, manifest.jobs)
    if jobs == 1:
        reports = [_run_one(cfg) for cfg in configs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_one, configs))  # map keeps config order
    for rep, cfg in zip(reports, configs):
        _write_report(rep, out, cfg)
    emit_plots(out)
    return _summarize(reports)


def _summarize(reports) -> int:
    for rep in reports:
        print(f"{rep.theorem}: {rep.status}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# ---------------------------------------------------------------------------
# plotting script
# ---------------------------------------------------------------------------

_PLOT_BODY = '''
import csv
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent


def read_rows(name, required):
    with open(HERE / name) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = list(csv.DictReader(lines))
    missing = [c for c in required if rows and c not in rows[0]]
    if missing:
        sys.exit(f"{name}: missing columns {missing}")
    return rows


def plot_heatmap(plt, name, kappa):
    rows = read_rows(name, ("site", "t", "expectation"))
    sites = sorted({int(r["site"]) for r in rows})
    times = sorted({float(r["t"]) for r in rows})
    grid = [[0.0] * len(sites) for _ in times]
    ti = {t: i for i, t in enumerate(times)}
    for r in rows:
        grid[ti[float(r["t"])]][int(r["site"])] = float(r["expectation"])
    fig, ax = plt.subplots()
    im = ax.imshow(grid, origin="lower", aspect="auto",
                   extent=(sites[0] - 0.5, sites[-1] + 0.5, times[0], times[-1]))
    if kappa:
        ax.plot([sites[0] + kappa * t for t in times], times, "w--", lw=1, label="slope kappa")
        ax.legend(loc="upper right")
    ax.set_xlabel("site")
    ax.set_ylabel("t")
    fig.colorbar(im, ax=ax, label="<n_x>")
    fig.savefig(HERE / (name[:-4] + ".png"), dpi=120)
    plt.close(fig)


def plot_ladder(plt, name, kappa):
    rows = read_rows(name, ("theorem", "scale", "t", "lhs", "rhs", "ratio", "pass"))
    if not rows:
        return
    scales = sorted({float(r["scale"]) for r in rows})
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    lhs = [max(float(r["lhs"]) for r in rows if float(r["scale"]) == s) for s in scales]
    rhs = [max(float(r["rhs"]) for r in rows if float(r["scale"]) == s) for s in scales]
    left.loglog(scales, [max(x, 1e-300) for x in lhs], "o-", label="max lhs")
    left.loglog(scales, [max(x, 1e-300) for x in rhs], "s--", label="max rhs")
    left.set_xlabel("scale")
    left.legend()
    for s in scales:
        pts = sorted((float(r["t"]), float(r["lhs"])) for r in rows if float(r["scale"]) == s)
        right.plot([p[0] for p in pts], [p[1] for p in pts], label=f"scale {s:g}")
        if kappa:
            right.axvline(s / kappa, color="grey", lw=0.5)
    right.set_xlabel("t (grey: scale / kappa)")
    right.set_ylabel("lhs")
    right.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(HERE / (name[:-4] + ".png"), dpi=120)
    plt.close(fig)


def main():
    if not HEATMAPS and not LADDERS:
        return
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    for name, kappa in HEATMAPS:
        plot_heatmap(plt, name, kappa)
    for name, kappa in LADDERS:
        plot_ladder(plt, name, kappa)


if __name__ == "__main__":
    main()
'''

_LADDER_COLUMNS = ("theorem", "scale", "t", "lhs", "rhs", "ratio", "pass")
_HEATMAP_COLUMNS = ("site", "t", "expectation")


def _csv_columns(path: Path) -> list[str]:
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                return [c.strip() for c in line.strip().split(",")]
    return []


def _kappa_for(csv_path: Path):
    stem = csv_path.name[: -len("_heatmap.csv")] if csv_path.name.endswith("_heatmap.csv") else csv_path.stem
    sidecar = csv_path.with_name(stem + ".json")
    if not sidecar.is_file():
        return None
    try:
        k = load_json(sidecar).get("extras", {}).get("kappa")
    except (ValueError, OSError):
        return None
    return k if isinstance(k, (int, float)) else None


def emit_plots(report_dir) -> Path:
    """Write a standalone matplotlib script that renders every CSV in ``report_dir``."""
    d = Path(report_dir)
    heatmaps, ladders, header = [], [], None
    for path in sorted(d.glob("*.csv")):
        cols = _csv_columns(path)
        want = _HEATMAP_COLUMNS if path.name.endswith("_heatmap.csv") else _LADDER_COLUMNS
        missing = [c for c in want if c not in cols]
        if missing:
            raise ValueError(f"{path}: missing CSV columns {missing}")
        if header is None:
            with open(path) as fh:
                first = fh.readline()
            header = first if first.startswith("# config_hash=") else None
        entry = (path.name, _kappa_for(path))
        (heatmaps if want is _HEATMAP_COLUMNS else ladders).append(entry)
    lines = [
        header or "# no reports in this directory\n",
        f"# plotting script version {PLOT_SCRIPT_VERSION}; renders the CSV reports next to it, no network access\n",
        f"HEATMAPS = {heatmaps!r}\n",
        f"LADDERS = {ladders!r}\n",
    ]
    script = d / PLOT_SCRIPT
    _atomic_write(script, "".join(lines) + _PLOT_BODY)
    return script


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bosecone", description="Exact light-cone experiments for lattice bosons.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", default=None, help="flat key = value config file")
        sp_.add_argument("--out", default="bosecone-out", help="output directory")
        sp_.add_argument("--seed", type=int, default=None, help="rng seed (overrides the config)")
        sp_.add_argument("--jobs", type=int, default=1, help="worker threads for independent runs")
        sp_.add_argument("--deterministic", action="store_true", help="single worker, reproducible outputs")
        sp_.add_argument("--dim-cap", type=int, default=None, help="largest sector dimension (default 10000)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    manifest = RunManifest(
        command=args.command,
        config_path=args.config,
        out_dir=Path(args.out),
        seed=args.seed,
        deterministic=args.deterministic,
        jobs=args.jobs,
        dim_cap=args.dim_cap,
    )
    try:
        return dispatch(manifest)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionCapError as err:
        print(f"resource cap: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except ExperimentError as err:
        print(f"experiment error ({args.command}): {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
