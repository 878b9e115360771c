"""Command-line entry point.

    intensive sweep --dim 1 --ls 400 --c 0.4999 --beta 1,5,10 --nb 10:50:5
    intensive phase-diagram --dim 2 --ls 20 --c 0.01:0.24:24 --beta 0.1:12:24
    intensive oracle-check

Every run writes ``results.csv`` (one row per sweep point or grid cell, with
a ``#``-commented config echo and unit-tagged header), ``results.json``
(rows plus nested fit diagnostics) and ``manifest.json`` (config, versions,
timestamp) into ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .analysis import (
    DEFAULT_OBSERVABLES,
    OBSERVABLES,
    SLOPE_SIGN,
    UNITS,
    PhaseDiagram,
    SweepSeries,
    block_observables,
    block_states,
    concordance,
    core_shell_fidelities,
    correlation_length,
    default_workers,
    map_ordered,
    padded_fidelity,
    phase_diagram,
    slope_fit,
    sweep_lattice,
)
from .blocks import BlockSelection, core_shell_split
from .certify import certification_suite, format_table
from .lattice import LatticeSpec

EXPERIMENTS = ("fidelity", "sweep", "core-shell", "padded", "correlation-length", "phase-diagram", "oracle-check")


class ConfigError(ValueError):
    def __init__(self, fieldname: str, message: str):
        super().__init__(f"--{fieldname}: {message}")
        self.field = fieldname


def parse_grid(text: str, kind: type = float) -> list:
    """``a,b,c`` lists or ``start:stop:count`` ranges (endpoints included)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range {text!r} must be start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError(f"range {text!r} needs a positive count")
        values = np.linspace(start, stop, count).tolist()
        if kind is int:
            ints = [int(round(v)) for v in values]
            if any(abs(i - v) > 1e-9 for i, v in zip(ints, values)):
                raise ValueError(f"range {text!r} does not produce integers")
            return ints
        return values
    return [kind(v) for v in text.split(",") if v.strip()]


def _beta(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "+inf", "infinity") else float(text)


@dataclass
class RunConfig:
    experiment: str
    dim: int = 1
    linear_size: int | None = None
    couplings: list[float] = field(default_factory=list)
    betas: list[float] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    observables: list[str] = field(default_factory=lambda: list(DEFAULT_OBSERVABLES))
    layers: list[int] = field(default_factory=lambda: [1])
    eps: int = 2
    hamiltonian: str = "effective"
    cutoff: int = 40
    out: str = "results"
    workers: int = 1
    seed: int = 0
    keep_going: bool = False

    def validate(self) -> None:
        """Check every module precondition before any work starts."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        if self.experiment == "oracle-check":
            if self.cutoff < 10:
                raise ConfigError("cutoff", "must be >= 10")
            if any(not b > 0 for b in self.betas):
                raise ConfigError("beta", "inverse temperatures must be positive")
            return
        if self.dim not in (1, 2):
            raise ConfigError("dim", "must be 1 or 2")
        if not self.couplings:
            raise ConfigError("c", "at least one coupling is required")
        if not self.betas:
            raise ConfigError("beta", "at least one inverse temperature is required")
        if any(not b > 0 for b in self.betas):
            raise ConfigError("beta", "inverse temperatures must be positive")
        for name, grid in (("c", self.couplings), ("beta", self.betas)):
            if self.experiment == "phase-diagram" and any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(name, "grid must be strictly increasing")
        if self.linear_size is None and (self.dim == 1 or self.experiment == "correlation-length"):
            raise ConfigError("ls", "a linear size is required here")
        for c in self.couplings:
            try:
                LatticeSpec(self.dim, self.linear_size or 3, c)
            except ValueError as exc:
                raise ConfigError("c", str(exc)) from exc
        if self.experiment == "correlation-length":
            return
        if not self.sizes:
            raise ConfigError("nb", "block sizes are required")
        if sorted(set(self.sizes)) != self.sizes:
            raise ConfigError("nb", "block sizes must be strictly increasing")
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise ConfigError("observables", f"unknown {sorted(bad)}")
        if self.experiment == "phase-diagram" and len(self.sizes) < 4:
            raise ConfigError("nb", "phase diagrams need at least 4 block sizes")
        if self.hamiltonian not in ("effective", "bare"):
            raise ConfigError("hamiltonian", "must be 'effective' or 'bare'")
        for size in self.sizes:
            try:
                spec = sweep_lattice(self.dim, self.couplings[0], size, self.linear_size)
                origin = self.eps if self.experiment == "padded" and self.eps >= 0 else 0
                sel = BlockSelection(spec, size, origin)
                if self.experiment == "core-shell":
                    for layers in self.layers:
                        core_shell_split(sel, layers)
                if self.experiment == "padded":
                    if self.eps < 0:
                        raise ConfigError("eps", "must be nonnegative")
                    sel.grown(self.eps)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError("nb", f"size {size}: {exc}") from exc


# --------------------------------------------------------------------------
# per-row tasks (module level so a process pool can pickle them)


def _fidelity_row(task: tuple) -> dict[str, Any]:
    dim, c, beta, size, ls = task
    spec = sweep_lattice(dim, c, size, ls)
    st = block_states(spec, BlockSelection(spec, size), beta)
    return block_observables(st, ["F_I"])


def _sweep_row(task: tuple) -> dict[str, Any]:
    dim, c, beta, size, ls, observables, layers = task
    spec = sweep_lattice(dim, c, size, ls)
    st = block_states(spec, BlockSelection(spec, size), beta)
    return block_observables(st, observables, layers)


def _core_shell_row(task: tuple) -> dict[str, Any]:
    dim, c, beta, size, ls, layer_list = task
    spec = sweep_lattice(dim, c, size, ls)
    st = block_states(spec, BlockSelection(spec, size), beta)
    row = block_observables(st, ["F_I"])
    for layers in layer_list:
        row[f"F_core_{layers}"], row[f"F_shell_{layers}"] = core_shell_fidelities(st, layers)
    return row


def _padded_row(task: tuple) -> dict[str, Any]:
    dim, c, beta, size, ls, eps, ham = task
    spec = sweep_lattice(dim, c, size, ls)
    # start eps sites in so the padded region fits without wrapping
    sel = BlockSelection(spec, size, origin=eps)
    return {"F_I": block_observables(block_states(spec, sel, beta), ["F_I"])["F_I"],
            "F_padded": padded_fidelity(spec, sel, beta, eps, ham)}


def _xi_row(task: tuple) -> dict[str, Any]:
    dim, c, beta, ls = task
    xi = correlation_length(LatticeSpec(dim, ls, c), beta)
    return {"xi": "uncorrelated" if xi is None else xi}


class _Guarded:
    """Picklable wrapper turning exceptions into an ``error`` field."""

    def __init__(self, func):
        self.func = func

    def __call__(self, task):
        try:
            return {**self.func(task), "error": ""}
        except Exception as exc:  # noqa: BLE001 - per-cell failures are data
            return {"error": f"{type(exc).__name__}: {exc}"}


# --------------------------------------------------------------------------
# output


COLUMN_UNITS = {
    "c": "coupling",
    "beta": "inverse-temperature",
    "size": "sites",
    "l_S": "sites",
    "F_I": "fidelity",
    "I": "nats",
    "E_N": "nats",
    "fidelity-of-cores": "fidelity",
    "fidelity-of-shells": "fidelity",
    "F_padded": "fidelity",
    "xi": "sites",
    "alpha_F": "fidelity/site",
    "alpha_I": "nats/site",
    "alpha_E": "nats/site",
    "error": "text",
    "flag": "text",
}


def _unit(col: str) -> str:
    if col.startswith(("F_core_", "F_shell_")):
        return "fidelity"
    return COLUMN_UNITS.get(col, UNITS.get(col, "1"))


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def config_echo(cfg: RunConfig, full: bool = False) -> dict[str, Any]:
    """Configuration as echoed into outputs.

    Results files omit ``out`` and ``workers`` since neither changes a single
    number; the manifest (``full=True``) keeps everything.
    """
    skip = () if full else ("out", "workers")
    return _json_safe({k: v for k, v in asdict(cfg).items() if k not in skip})


def render_csv(cfg: RunConfig, columns: Sequence[str], rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    buf.write(f"# intensive {__version__} experiment={cfg.experiment}\n")
    for key, value in config_echo(cfg).items():
        buf.write(f"# {key}={json.dumps(value)}\n")
    if cfg.experiment == "phase-diagram":
        buf.write("# slopes are magnitudes; signs: " + ", ".join(
            f"{k}:{'+' if SLOPE_SIGN[o] > 0 else '-'}" for k, o in (("alpha_F", "F_I"), ("alpha_I", "I"), ("alpha_E", "E_N"))
        ) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"{c}[{_unit(c)}]" for c in columns])
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def write_outputs(cfg: RunConfig, columns, rows, extra: dict[str, Any]) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(cfg, columns, rows))
    payload = {"experiment": cfg.experiment, "config": config_echo(cfg), "columns": list(columns),
               "rows": _json_safe(list(rows)), **_json_safe(extra)}
    with open(out / "results.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
    manifest = {
        "software": {"intensive": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "config": config_echo(cfg, full=True),
        "files": ["results.csv", "results.json"],
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return out


# --------------------------------------------------------------------------
# experiments


def _point_grid(cfg: RunConfig):
    for c in cfg.couplings:
        for beta in cfg.betas:
            for size in cfg.sizes:
                ls = sweep_lattice(cfg.dim, c, size, cfg.linear_size).linear_size
                yield {"c": c, "beta": beta, "size": size, "l_S": ls}


def _run_points(cfg: RunConfig, func, make_task) -> list[dict[str, Any]]:
    keys = list(_point_grid(cfg))
    results = map_ordered(_Guarded(func), [make_task(k) for k in keys], cfg.workers)
    return [{**k, **r} for k, r in zip(keys, results)]


def _series_from_rows(cfg: RunConfig, rows, observables) -> list[dict[str, Any]]:
    out = []
    for c in cfg.couplings:
        for beta in cfg.betas:
            pts = [r for r in rows if r["c"] == c and r["beta"] == beta and not r["error"]]
            for obs in observables:
                if len(pts) != len(cfg.sizes):
                    continue
                s = SweepSeries(obs, cfg.dim, c, beta, tuple(cfg.sizes), tuple(r[obs] for r in pts),
                                tuple(r["l_S"] for r in pts))
                entry = {"observable": obs, "c": c, "beta": beta, "abscissa": list(s.abscissa),
                         "values": list(s.values), "l_S": list(s.linear_sizes)}
                if len(cfg.sizes) >= 4:
                    entry["fit"] = slope_fit(s).as_dict()
                out.append(entry)
    return out


def run_experiment(cfg: RunConfig) -> tuple[list[str], list[dict[str, Any]], dict[str, Any]]:
    base = ["c", "beta", "size", "l_S"]
    if cfg.experiment == "fidelity":
        rows = _run_points(cfg, _fidelity_row, lambda k: (cfg.dim, k["c"], k["beta"], k["size"], cfg.linear_size))
        return base + ["F_I", "error"], rows, {}
    if cfg.experiment == "sweep":
        obs = tuple(cfg.observables)
        rows = _run_points(cfg, _sweep_row, lambda k: (cfg.dim, k["c"], k["beta"], k["size"], cfg.linear_size,
                                                       obs, cfg.layers[0]))
        return base + list(obs) + ["error"], rows, {"series": _series_from_rows(cfg, rows, obs)}
    if cfg.experiment == "core-shell":
        layers = tuple(cfg.layers)
        rows = _run_points(cfg, _core_shell_row, lambda k: (cfg.dim, k["c"], k["beta"], k["size"], cfg.linear_size,
                                                            layers))
        cols = ["F_I"] + [f"{p}_{L}" for L in layers for p in ("F_core", "F_shell")]
        return base + cols + ["error"], rows, {}
    if cfg.experiment == "padded":
        rows = _run_points(cfg, _padded_row, lambda k: (cfg.dim, k["c"], k["beta"], k["size"], cfg.linear_size,
                                                        cfg.eps, cfg.hamiltonian))
        return base + ["F_I", "F_padded", "error"], rows, {"eps": cfg.eps, "hamiltonian": cfg.hamiltonian}
    if cfg.experiment == "correlation-length":
        keys = [{"c": c, "beta": b, "l_S": cfg.linear_size} for c in cfg.couplings for b in cfg.betas]
        res = map_ordered(_Guarded(_xi_row), [(cfg.dim, k["c"], k["beta"], cfg.linear_size) for k in keys], cfg.workers)
        return ["c", "beta", "l_S", "xi", "error"], [{**k, **r} for k, r in zip(keys, res)], {}
    if cfg.experiment == "phase-diagram":
        diagram = phase_diagram(cfg.couplings, cfg.betas, cfg.sizes, cfg.linear_size, cfg.dim, cfg.workers)
        return _phase_rows(diagram)
    if cfg.experiment == "oracle-check":
        betas = cfg.betas or (0.5, 1.0, 2.0, 5.0)
        checks = certification_suite(betas, cfg.couplings or None, cfg.cutoff, seed=cfg.seed)
        rows = [{"quantity": ch.quantity, "beta": ch.beta, "c": ch.coupling, "gaussian": ch.gaussian,
                 "oracle": ch.oracle, "abs_error": ch.error, "status": ch.status,
                 "error": "" if ch.status == "pass" else ch.status} for ch in checks]
        cols = ["quantity", "beta", "c", "gaussian", "oracle", "abs_error", "status"]
        return cols, rows, {"table": format_table(checks)}
    raise ConfigError("experiment", cfg.experiment)


def _phase_rows(diagram: PhaseDiagram):
    rows = []
    for (i, j), cell in sorted(diagram.cells.items()):
        rows.append({
            "c": cell.coupling, "beta": cell.beta,
            "alpha_F": cell.alpha_F, "alpha_I": cell.alpha_I, "alpha_E": cell.alpha_E,
            "xi": "uncorrelated" if cell.uncorrelated else cell.xi,
            "flag": cell.flagged or "", "error": cell.error or "",
        })
    fits = {f"{i},{j}": cell.fits for (i, j), cell in sorted(diagram.cells.items()) if cell.fits}
    extra = {"fits": fits, "sign_convention": {"alpha_F": "F_I decreases", "alpha_I": "I increases",
                                                 "alpha_E": "E_N increases"}}
    if sum(1 for c in diagram.cells.values() if c.ok) >= 3:
        extra["rank_correlation_with_alpha_F"] = concordance(diagram)
    return ["c", "beta", "alpha_F", "alpha_I", "alpha_E", "xi", "flag", "error"], rows, extra


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intensive", description="Intensive temperature in harmonic lattices.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--dim", type=int, default=1 if name != "phase-diagram" else 2)
        p.add_argument("--ls", default=None,
                       help="linear lattice size; 'family' (2D) uses l_S = 2 l_B per point")
        p.add_argument("--c", default=None, help="coupling(s): list or start:stop:count")
        p.add_argument("--beta", default=None, help="inverse temperature(s): list or start:stop:count")
        p.add_argument("--nb", "--lb", dest="nb", default=None,
                       help="block sizes (n_B in 1D, l_B in 2D): list or start:stop:count")
        p.add_argument("--observables", default=",".join(DEFAULT_OBSERVABLES))
        p.add_argument("--layers", default="1", help="core/shell layers (list)")
        p.add_argument("--eps", type=int, default=2, help="padding layers for the padded reference")
        p.add_argument("--hamiltonian", choices=("effective", "bare"), default="effective")
        p.add_argument("--cutoff", type=int, default=40, help="Fock cutoff for oracle-check")
        p.add_argument("--out", default="results")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: $INTENSIVE_WORKERS or 1)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--keep-going", action="store_true", help="embed per-cell failures instead of aborting")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    def grid(name, text, kind):
        if text is None:
            return []
        try:
            if kind is _beta and ":" not in text:
                return [_beta(v) for v in text.split(",") if v.strip()]
            return parse_grid(text, float if kind is _beta else kind)
        except ValueError as exc:
            raise ConfigError(name, str(exc)) from exc

    ls: int | None
    if args.ls in (None, "family"):
        ls = None
    else:
        try:
            ls = int(args.ls)
        except ValueError as exc:
            raise ConfigError("ls", f"not an integer: {args.ls!r}") from exc
    if args.experiment == "phase-diagram" and args.ls is None:
        ls = 20
    sizes = grid("nb", args.nb, int)
    if args.experiment == "phase-diagram" and not sizes:
        sizes = [4, 6, 8, 10]
    return RunConfig(
        experiment=args.experiment,
        dim=args.dim,
        linear_size=ls,
        couplings=grid("c", args.c, float),
        betas=grid("beta", args.beta, _beta),
        sizes=sizes,
        observables=[o.strip() for o in args.observables.split(",") if o.strip()],
        layers=grid("layers", args.layers, int),
        eps=args.eps,
        hamiltonian=args.hamiltonian,
        cutoff=args.cutoff,
        out=args.out,
        workers=args.workers if args.workers is not None else default_workers(),
        seed=args.seed,
        keep_going=args.keep_going,
    )


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    cfg.validate()
    columns, rows, extra = run_experiment(cfg)
    failures = [r for r in rows if r.get("error")]
    if cfg.experiment == "oracle-check":
        print(extra.pop("table"), file=stdout)
        write_outputs(cfg, columns, rows, extra)
        return 1 if any(r["status"] == "fail" for r in rows) else 0
    if failures and not cfg.keep_going:
        for r in failures:
            print(f"error: {r['error']}", file=sys.stderr)
        return 1
    write_outputs(cfg, columns, rows, extra)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
