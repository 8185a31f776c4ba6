"""Command-line entry point: ``fracheat <subcommand> --config run.json``.

Exit codes: 0 success, 2 invalid input or a check that could not run,
3 Picard iteration did not converge (outputs still written), 4 a check ran
and failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .core import SpaceGrid, TimeGrid, default_half_width
from .fraccalc import selftest
from .kernel import MediumParams, kernel_table
from .noise_field import NoiseEnsemble, NoiseSpec, write_bundle
from .solver import AffineCoefficient, SolverConfig, default_sigma, picard_solve
from .verify import BoundCheckParams, full_report, kernel_suite, summarize

EXIT_OK, EXIT_INVALID, EXIT_DIVERGED, EXIT_FAILED = 0, 2, 3, 4
SEED_ENV = "FRACHEAT_SEED"

REQUIRED = {
    "simulate-noise": ("H", "T", "N", "J", "seed"),
    "kernel-table": ("medium",),
    "verify-bounds": ("medium", "H", "T", "N", "M", "J", "seed"),
    "solve": ("medium", "H", "T", "N", "M", "J", "seed"),
    "fraccalc-selftest": (),
}

DEFAULTS = {
    "h1": 0.5, "h2": 1.0, "lam_exponent": 2.0, "tol": 1e-6, "p_max": 8,
    "delta": 0.5, "delta_prime": 0.4, "appendix_probes": 200, "lemma1_probes": 10_000,
    "allow_brownian": False, "dt": 0.5, "table_points": 41, "table_half_width": 3.0,
    "selftest_n": 1000,
}


class UsageError(Exception):
    """Configuration problem reported with exit code 2."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def load_config(path) -> dict:
    """Read a JSON config; a run manifest is accepted and replays its resolved config."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    return dict(raw.get("resolved_config", raw))


def resolve_config(command: str, raw: dict, seed: int | None = None,
                   allow_brownian: bool = False) -> tuple[dict, list[str]]:
    """Apply seed overrides and defaults; returns ``(config, notes)``.

    The seed comes from ``seed`` (command line), else the environment
    variable, else the file.
    """
    cfg = dict(raw)
    notes = []
    if seed is not None:
        cfg["seed"] = seed
    elif os.environ.get(SEED_ENV):
        try:
            cfg["seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer") from exc
    for key in REQUIRED[command]:
        if key not in cfg:
            raise UsageError(f"missing required config key: '{key}'")
    for key, val in DEFAULTS.items():
        cfg.setdefault(key, val)
    if allow_brownian:
        cfg["allow_brownian"] = True
    if "medium" in cfg:
        med = cfg["medium"]
        try:
            cfg["medium"] = {k: float(med[k]) for k in ("a1", "a2", "rho1", "rho2")}
        except (KeyError, TypeError) as exc:
            raise UsageError(f"medium needs a1, a2, rho1, rho2: {exc}") from exc
    if "M" in cfg and int(cfg["M"]) % 2 == 0:
        notes.append(f"M={cfg['M']} is even; using M={int(cfg['M']) + 1} so that 0 is a node")
        cfg["M"] = int(cfg["M"]) + 1
    if "H" in cfg and cfg.get("sigma") is None and float(cfg["H"]) > 0.5:
        cfg["sigma"] = default_sigma(float(cfg["H"]))
    if "T" in cfg and cfg.get("L") is None:
        a_max = max(cfg["medium"]["a1"], cfg["medium"]["a2"]) if "medium" in cfg else 1.0
        cfg["L"] = default_half_width(float(cfg["T"]), a_max)
    return cfg, notes


def _medium(cfg) -> MediumParams:
    m = cfg["medium"]
    return MediumParams(m["a1"], m["a2"], m["rho1"], m["rho2"])


def _noise(cfg) -> tuple[NoiseSpec, TimeGrid]:
    spec = NoiseSpec(int(cfg["J"]), float(cfg["H"]), float(cfg["L"]),
                     float(cfg["lam_exponent"]), bool(cfg["allow_brownian"]))
    return spec, TimeGrid(float(cfg["T"]), int(cfg["N"]))


def _solver_config(cfg, threads: int) -> SolverConfig:
    spec, tgrid = _noise(cfg)
    return SolverConfig(_medium(cfg), tgrid, SpaceGrid(float(cfg["L"]), int(cfg["M"])), spec,
                        AffineCoefficient(float(cfg["h1"]), float(cfg["h2"])),
                        float(cfg["sigma"]), float(cfg["tol"]), int(cfg["p_max"]), threads)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _manifest(out: Path, command: str, cfg: dict, files, started: float, notes, seeds=None,
              threads: int = 1) -> Path:
    man = {
        "command": command,
        "resolved_config": cfg,
        "version": _version(),
        "wall_clock_seconds": time.perf_counter() - started,
        "threads": threads,
        "seeds": seeds or {},
        "notes": notes,
        "outputs": {p.relative_to(out).as_posix(): _sha256(p) for p in files},
    }
    return _write_json(out / "manifest.json", _json_safe(man))


# -- subcommands ------------------------------------------------------------------

def cmd_simulate_noise(cfg: dict, out: Path, threads: int = 1) -> tuple[int, list[Path]]:
    spec, tgrid = _noise(cfg)
    ens = NoiseEnsemble.sample(spec, tgrid, int(cfg["seed"]))
    files = write_bundle(ens, out / "noise")
    return EXIT_OK, files


def cmd_kernel_table(cfg: dict, out: Path, threads: int = 1) -> tuple[int, list[Path]]:
    p = _medium(cfg)
    pts = np.linspace(-cfg["table_half_width"], cfg["table_half_width"], int(cfg["table_points"]))
    rows = kernel_table(float(cfg["dt"]), pts, pts, p)
    path = out / "kernel_table.csv"
    with open(path, "w") as fh:
        fh.write("x,y,G\n")
        for x, y, g in rows:
            fh.write(f"{x:.17g},{y:.17g},{g:.17g}\n")
    return EXIT_OK, [path]


def _check_params(cfg) -> BoundCheckParams:
    return BoundCheckParams(float(cfg["delta"]), float(cfg["delta_prime"]),
                            lemma1_probes=int(cfg["lemma1_probes"]),
                            appendix_probes=int(cfg["appendix_probes"]), seed=int(cfg["seed"]))


def cmd_verify_bounds(cfg: dict, out: Path, threads: int = 1) -> tuple[int, list[Path]]:
    params = _check_params(cfg)
    if cfg.get("kernel_only"):
        records = kernel_suite(_medium(cfg), params)
    else:
        scfg = _solver_config(cfg, threads)
        ens = NoiseEnsemble.sample(scfg.noise, scfg.tgrid, int(cfg["seed"]))
        records = full_report(scfg, ens, params)
    status = summarize(records)
    path = _write_json(out / "verify_bounds.json", _json_safe({"status": status, "checks": records}))
    code = {"ok": EXIT_OK, "failed": EXIT_FAILED, "rejected": EXIT_INVALID}[status]
    return code, [path]


def _write_field_csv(path: Path, u) -> None:
    t = u.tgrid.nodes
    x = u.xgrid.nodes
    with open(path, "w") as fh:
        fh.write("t,x,u\n")
        for i in range(len(t)):
            for k in range(len(x)):
                fh.write(f"{t[i]:.17g},{x[k]:.17g},{u.values[i, k]:.17g}\n")


def cmd_solve(cfg: dict, out: Path, threads: int = 1) -> tuple[int, list[Path]]:
    scfg = _solver_config(cfg, threads)
    ens = NoiseEnsemble.sample(scfg.noise, scfg.tgrid, int(cfg["seed"]))
    u, diag = picard_solve(scfg, ens)
    files = write_bundle(ens, out / "noise")
    sol = out / "solution.csv"
    _write_field_csv(sol, u)
    files.append(sol)
    files.append(_write_json(out / "diagnostics.json", _json_safe(diag.to_dict())))
    return (EXIT_OK if diag.converged else EXIT_DIVERGED), files


def cmd_fraccalc_selftest(cfg: dict, out: Path, threads: int = 1) -> tuple[int, list[Path]]:
    rep = selftest(int(cfg.get("selftest_n", 1000)))
    path = _write_json(out / "fraccalc_selftest.json", _json_safe(rep))
    return (EXIT_OK if rep["passed"] else EXIT_FAILED), [path]


COMMANDS = {
    "simulate-noise": cmd_simulate_noise,
    "kernel-table": cmd_kernel_table,
    "verify-bounds": cmd_verify_bounds,
    "solve": cmd_solve,
    "fraccalc-selftest": cmd_fraccalc_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracheat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config or a run manifest to replay")
        sp.add_argument("--seed", type=int, help=f"master seed (overrides {SEED_ENV} and the file)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
        sp.add_argument("--allow-brownian", action="store_true",
                        help="accept H = 1/2 for smoke runs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        if args.config is None and REQUIRED[args.command]:
            raise UsageError("--config is required for this command")
        raw = load_config(args.config) if args.config else {}
        cfg, notes = resolve_config(args.command, raw, args.seed, args.allow_brownian)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for note in notes:
            print(f"note: {note}", file=sys.stderr)
        code, files = COMMANDS[args.command](cfg, out, args.threads)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    seeds = {}
    if "seed" in cfg:
        seeds["master"] = int(cfg["seed"])
        noise_man = out / "noise" / "noise_manifest.json"
        if noise_man.exists() and args.command in ("simulate-noise", "solve"):
            seeds["components"] = json.loads(noise_man.read_text())["seeds"]
    _manifest(out, args.command, cfg, files, started, notes, seeds, args.threads)
    if code == EXIT_DIVERGED:
        print("error: Picard iteration did not reach tol within p_max", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
