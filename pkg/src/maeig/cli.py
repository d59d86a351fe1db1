"""Command-line front end: run configuration, solvers, and result files.

Each run writes into its own directory: ``manifest.json`` (config echo, tool
version, timings, timestamp), ``summary.json`` (deterministic results -- no
timestamps, byte-identical across reruns of the same config and seed),
optional CSV convergence history, optional field dumps and plot data.

Exit codes: 0 success, 1 solver nonconvergence, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .dirichlet import ConvergenceError, SolverConfig, residual_sup, solve_dirichlet
from .fieldio import domain_hash, field_dump, write_field
from .geometry import (
    ConvexDomain,
    ConvexPolygon,
    Disk,
    Ellipse,
    GridError,
    Rectangle,
    apply_unimodular,
    build_grid,
    domain_spec,
)
from .operators import default_stencil, ma_det
from .spectral import SpectralConfig, solve_eigen, solve_system, sweep_p
from .verification import (
    cd1_invariant,
    check_amgm,
    check_minkowski_det,
    check_nibp,
    check_uvn_identity,
    distance_bound_report,
    random_spd_pairs,
    sup_bound_report,
    uniqueness_experiment,
)

__all__ = ["RunConfig", "ConfigError", "parse_domain", "run_command", "main"]

_SUBCOMMANDS = ("dirichlet", "eigen", "system", "sweep", "verify")
_ALL_CHECKS = (
    "nibp",
    "amgm",
    "uvn",
    "minkowski",
    "cd1",
    "sup_bounds",
    "distance_bounds",
    "uniqueness",
)


class ConfigError(ValueError):
    """Invalid run configuration; message pins the file/flag and value."""


@dataclass
class RunConfig:
    """Fully validated run description (flags win over config-file values)."""

    command: str
    domain: str = "disk:1"
    h: float = 0.0625
    k: int = 2
    penalty: float = 1.0
    tol_residual: float = 1e-8
    max_outer: int = 10_000
    damping: float = 1.0
    epsilon: float = 0.0
    newton: bool = True
    f_const: float = 1.0
    p: float = 2.0
    p_list: tuple[float, ...] = ()
    seed: int = 0
    seed_count: int = 3
    jobs: int = 1
    checks: tuple[str, ...] = ()
    out: str = ""
    dump_fields: bool = False
    history: bool = False
    emit_plot_data: bool = False

    def spectral_config(self) -> SpectralConfig:
        inner = SolverConfig(
            tol_residual=min(self.tol_residual, 1e-10),
            max_outer_iterations=self.max_outer,
            damping=self.damping,
            epsilon=self.epsilon,
            penalty=self.penalty,
            newton=self.newton,
        )
        return SpectralConfig(tol_residual=self.tol_residual, inner=inner)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            tol_residual=self.tol_residual,
            max_outer_iterations=self.max_outer,
            damping=self.damping,
            epsilon=self.epsilon,
            penalty=self.penalty,
            newton=self.newton,
        )


def parse_domain(spec: str) -> ConvexDomain:
    """Parse ``kind:params`` domain strings.

    disk:r | disk:cx,cy,r | square:s | rect:x0,y0,x1,y1 |
    ellipse:a,b[,rotation] | polygon:x1,y1;x2,y2;...
    """
    if ":" not in spec:
        raise ConfigError(f"domain {spec!r}: expected kind:params")
    kind, _, params = spec.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "disk":
            vals = [float(x) for x in params.split(",")]
            if len(vals) == 1:
                return Disk((0.0, 0.0), vals[0])
            if len(vals) == 3:
                return Disk((vals[0], vals[1]), vals[2])
            raise ConfigError(f"domain {spec!r}: disk takes r or cx,cy,r")
        if kind == "square":
            s = float(params)
            return Rectangle((0.0, 0.0), (s, s))
        if kind == "rect":
            x0, y0, x1, y1 = (float(x) for x in params.split(","))
            return Rectangle((x0, y0), (x1, y1))
        if kind == "ellipse":
            vals = [float(x) for x in params.split(",")]
            if len(vals) == 2:
                return Ellipse((0.0, 0.0), vals[0], vals[1])
            if len(vals) == 3:
                return Ellipse((0.0, 0.0), vals[0], vals[1], vals[2])
            raise ConfigError(f"domain {spec!r}: ellipse takes a,b[,rotation]")
        if kind == "polygon":
            verts = []
            for chunk in params.split(";"):
                x, y = (float(t) for t in chunk.split(","))
                verts.append((x, y))
            return ConvexPolygon(tuple(verts))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"domain {spec!r}: {exc}") from exc
    raise ConfigError(f"domain {spec!r}: unknown kind {kind!r}")


_BOOL_KEYS = {"newton", "dump_fields", "history", "emit_plot_data"}
_INT_KEYS = {"k", "max_outer", "seed", "seed_count", "jobs"}
_FLOAT_KEYS = {"h", "penalty", "tol_residual", "damping", "epsilon", "f_const", "p"}
_STR_KEYS = {"domain", "out"}


def _parse_config_file(path: str) -> dict:
    """Line-oriented ``key = value`` file; '#' starts a comment."""
    out: dict = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file ({exc})") from exc
    for ln, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        try:
            if key in _BOOL_KEYS:
                if val.lower() not in ("true", "false", "0", "1"):
                    raise ValueError("expected true/false")
                out[key] = val.lower() in ("true", "1")
            elif key in _INT_KEYS:
                out[key] = int(val)
            elif key in _FLOAT_KEYS:
                out[key] = float(val)
            elif key in _STR_KEYS:
                out[key] = val
            elif key == "p_list":
                out[key] = tuple(float(x) for x in val.split(","))
            elif key == "checks":
                out[key] = tuple(x.strip() for x in val.split(",") if x.strip())
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"{path}:{ln}: {exc}") from exc
    return out


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="maeig",
        description="Monge-Ampere Dirichlet / eigenvalue / coupled-system solver",
    )
    ap.add_argument("--version", action="version", version=f"maeig {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value run configuration file")
        sp.add_argument("--domain", help="domain spec, e.g. disk:1, square:1, ellipse:2,1")
        sp.add_argument("--h", type=float, help="grid spacing")
        sp.add_argument("--k", type=int, help="number of stencil direction pairs (>= 2)")
        sp.add_argument("--penalty", type=float, help="negative-part penalty of the scheme")
        sp.add_argument("--tol-residual", type=float, dest="tol_residual")
        sp.add_argument("--max-outer", type=int, dest="max_outer")
        sp.add_argument("--damping", type=float)
        sp.add_argument("--epsilon", type=float, help="smoothing in the Newton model")
        sp.add_argument("--no-newton", action="store_true", help="pure Gauss-Seidel sweeps")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default under $MAEIG_OUT or ./runs)")
        sp.add_argument("--dump-fields", action="store_true", dest="dump_fields")
        sp.add_argument("--history", action="store_true", help="write convergence CSV")
        sp.add_argument(
            "--emit-plot-data", action="store_true", dest="emit_plot_data",
            help="write (x, y, value) triples per output field",
        )

    sp = sub.add_parser("dirichlet", help="solve det D^2 u = f, u = 0 on the boundary")
    common(sp)
    sp.add_argument("--f", type=float, dest="f_const", help="constant right-hand side")

    sp = sub.add_parser("eigen", help="solve the eigenvalue problem")
    common(sp)

    sp = sub.add_parser("system", help="solve the coupled system at exponent p")
    common(sp)
    sp.add_argument("--p", type=float)

    sp = sub.add_parser("sweep", help="solve the system for a list of exponents")
    common(sp)
    sp.add_argument("--p-list", dest="p_list", help="comma-separated exponents")
    sp.add_argument("--jobs", type=int, help="parallel solves (cold starts when > 1)")

    sp = sub.add_parser("verify", help="run checks on a converged system solution")
    common(sp)
    sp.add_argument("--p", type=float)
    sp.add_argument("--checks", help=f"comma list from {', '.join(_ALL_CHECKS)}")
    sp.add_argument("--all", action="store_true", help="run every check")
    sp.add_argument("--seed-count", type=int, dest="seed_count")
    return ap


def _merge_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(_parse_config_file(args.config))
    for key in (
        "domain h k penalty tol_residual max_outer damping epsilon f_const p "
        "seed seed_count jobs out".split()
    ):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "no_newton", False):
        values["newton"] = False
    for key in ("dump_fields", "history", "emit_plot_data"):
        if getattr(args, key, False):
            values[key] = True
    if getattr(args, "p_list", None):
        if isinstance(args.p_list, str):
            try:
                values["p_list"] = tuple(float(x) for x in args.p_list.split(","))
            except ValueError as exc:
                raise ConfigError(f"--p-list: {exc}") from exc
    if getattr(args, "checks", None):
        values["checks"] = tuple(x.strip() for x in args.checks.split(",") if x.strip())
    if getattr(args, "all", False):
        values["checks"] = _ALL_CHECKS
    if args.command == "verify" and "k" not in values:
        # near-equality inequality margins sit below the 2-pair stencil's
        # directional bias; verification runs default to the 4-pair stencil
        values["k"] = 4
    cfg = RunConfig(command=args.command, **values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.h <= 0:
        raise ConfigError(f"h must be positive, got {cfg.h}")
    if cfg.k < 2:
        raise ConfigError(f"k must be >= 2, got {cfg.k}")
    if cfg.command in ("system", "verify") and cfg.p <= 0:
        raise ConfigError(f"p must be positive, got {cfg.p}")
    if cfg.command == "sweep" and not cfg.p_list:
        raise ConfigError("sweep needs --p-list")
    if cfg.command == "verify":
        for name in cfg.checks:
            if name not in _ALL_CHECKS:
                raise ConfigError(f"unknown check {name!r}; choose from {_ALL_CHECKS}")
        if not cfg.checks:
            raise ConfigError("verify needs --checks or --all")
    parse_domain(cfg.domain)


def _config_digest(cfg: RunConfig) -> str:
    import hashlib

    text = json.dumps(asdict(cfg), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:8]


def _run_dir(cfg: RunConfig) -> Path:
    if cfg.out:
        path = Path(cfg.out)
    else:
        root = Path(os.environ.get("MAEIG_OUT", "runs"))
        path = root / f"{cfg.command}-{_config_digest(cfg)}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_history_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")


def _emit_plot(path: Path, grid, field) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,value\n")
        for (x, y), v in zip(grid.nodes_xy, field):
            fh.write(f"{x:.17g},{y:.17g},{v:.17g}\n")


def _dump(outdir: Path, cfg: RunConfig, grid, domain, fields: dict) -> None:
    if cfg.dump_fields:
        for name, values in fields.items():
            write_field(outdir / f"{name}.field", field_dump(values, grid, name, domain))
    if cfg.emit_plot_data:
        for name, values in fields.items():
            _emit_plot(outdir / f"plot_{name}.csv", grid, values)


def _verify_records(cfg: RunConfig, grid, domain) -> list[dict]:
    spectral_cfg = cfg.spectral_config()
    sol = solve_system(grid, cfg.p, spectral_cfg)
    records = []
    for name in cfg.checks:
        if name == "nibp":
            rep = check_nibp(sol.u, sol.v, grid)
        elif name == "amgm":
            rep = check_amgm(sol.u, sol.v, grid)
        elif name == "uvn":
            rep = check_uvn_identity(sol.u, sol.v, grid)
        elif name == "minkowski":
            worst = None
            count = 1000
            for A, B in random_spd_pairs(count, seed=cfg.seed):
                r = check_minkowski_det(A, B)
                if worst is None or (r.margin or 0.0) < (worst.margin or 0.0) or not r.passed:
                    worst = r
                if not r.passed:
                    break
            rep = worst
            rep.details["pairs_tested"] = count
        elif name == "cd1":
            rep = cd1_invariant(sol, (0.5, 1.0, 2.0, 10.0))
        elif name == "sup_bounds":
            rep = sup_bound_report(sol, domain)
        elif name == "distance_bounds":
            rep = distance_bound_report(sol.u, domain, grid)
        elif name == "uniqueness":
            rep = uniqueness_experiment(
                grid, cfg.p, spectral_cfg, seed_count=cfg.seed_count, seed=cfg.seed
            )
        else:  # pragma: no cover - guarded by _validate
            raise ConfigError(f"unknown check {name!r}")
        records.append(rep.to_record())
    return records


def run_command(argv) -> int:
    """Execute one subcommand; returns the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t_start = time.time()
    try:
        cfg = _merge_config(args)
        domain = parse_domain(cfg.domain)
        grid = build_grid(domain, cfg.h, default_stencil(cfg.k))
    except (ConfigError, GridError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    outdir = _run_dir(cfg)
    summary: dict = {"command": cfg.command, "domain": domain_spec(domain), "h": cfg.h,
                     "k": cfg.k, "seed": cfg.seed, "interior_nodes": grid.num_interior}
    status = 0
    try:
        if cfg.command == "dirichlet":
            f = np.full(grid.num_interior, cfg.f_const)
            u = solve_dirichlet(grid, f, cfg.solver_config())
            summary.update(
                {
                    "f_const": cfg.f_const,
                    "residual": residual_sup(grid, u, f, penalty=cfg.penalty),
                    "u_min": float(u.min()),
                    "u_sup_norm": float(np.max(np.abs(u))),
                }
            )
            _dump(outdir, cfg, grid, domain, {"u": u})
        elif cfg.command == "eigen":
            pair = solve_eigen(grid, cfg.spectral_config())
            summary.update(
                {
                    "lambda": pair.lam,
                    "lambda_homogeneity": pair.history[-1][1],
                    "w_sup_norm": float(np.max(np.abs(pair.w))),
                    "iterations": pair.iterations,
                }
            )
            if cfg.history:
                _write_history_csv(
                    outdir / "history.csv",
                    ["lambda_rayleigh", "lambda_homogeneity", "dw_sup"],
                    pair.history,
                )
            _dump(outdir, cfg, grid, domain, {"w": pair.w})
        elif cfg.command == "system":
            sol = solve_system(grid, cfg.p, cfg.spectral_config())
            summary.update(_system_summary(sol))
            if cfg.history:
                _write_history_csv(
                    outdir / "history.csv",
                    ["sigma", "dv_sup", "residual1", "residual2"],
                    sol.history,
                )
            _dump(outdir, cfg, grid, domain, {"u": sol.u, "v": sol.v})
        elif cfg.command == "sweep":
            entries = sweep_p(grid, cfg.p_list, cfg.spectral_config(), jobs=cfg.jobs)
            summary["entries"] = [
                (
                    {"p": e.p, **_system_summary(e.solution)}
                    if e.ok
                    else {"p": e.p, "error": e.error}
                )
                for e in entries
            ]
            status = 0 if all(e.ok for e in entries) else 1
            for e in entries:
                if e.ok:
                    _dump(
                        outdir, cfg, grid, domain,
                        {f"u_p{e.p:g}": e.solution.u, f"v_p{e.p:g}": e.solution.v},
                    )
        elif cfg.command == "verify":
            records = _verify_records(cfg, grid, domain)
            summary["p"] = cfg.p
            summary["checks"] = records
            summary["all_passed"] = all(r["passed"] for r in records)
            status = 0 if summary["all_passed"] else 1
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        summary["error"] = str(exc)
        _write_json(outdir / "summary.json", summary)
        status = 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    else:
        _write_json(outdir / "summary.json", summary)

    manifest = {
        "version": __version__,
        "command": cfg.command,
        "config": asdict(cfg),
        "domain_hash": domain_hash(domain),
        "argv": list(argv),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_seconds": time.time() - t_start,
        "exit_code": status,
    }
    _write_json(outdir / "manifest.json", manifest)
    if cfg.command == "verify" and "checks" in summary:
        for rec in summary["checks"]:
            flag = "PASS" if rec["passed"] else "FAIL"
            print(f"{flag} {rec['check']}")
    print(f"wrote {outdir}/summary.json")
    return status


def _system_summary(sol) -> dict:
    return {
        "p": sol.p,
        "sigma": sol.sigma,
        "u_sup_norm": float(np.max(np.abs(sol.u))),
        "v_sup_norm": float(np.max(np.abs(sol.v))),
        "u_minus_v_sup": float(np.max(np.abs(sol.u - sol.v))),
        "residual1": float(np.max(np.abs(sol.res1_field))),
        "residual2": float(np.max(np.abs(sol.res2_field))),
        "iterations": sol.iterations,
    }


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
