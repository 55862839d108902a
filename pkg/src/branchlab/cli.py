"""Command line driver for the seeded, file-based experiments.

Every run resolves a JSON config over the built-in defaults, executes
one experiment, writes byte-reproducible JSON/CSV artifacts plus a
manifest into ``<output_dir>/<experiment>/``, and reports one line per
check.  Wall-clock numbers go to stdout only so that artifact files
stay identical across repeated runs with the same config and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .acceptance import canonical_bytes, run_all
from .errors import BranchLabError, ConfigInvalidError
from .experiments import (
    resolve_config,
    run_branch_mc,
    run_macro_scaling,
    run_mc_pathsum,
    run_measure,
    run_propagate,
    run_time_average,
)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalidError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalidError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalidError("config root must be a JSON object")
    return data


def _dispatch(cfg: dict, outdir: Path):
    exp = cfg["experiment"]
    if exp == "propagate":
        return run_propagate(cfg, outdir)
    if exp == "mc-pathsum":
        return run_mc_pathsum(cfg, outdir)
    if exp == "macro-scaling":
        return run_macro_scaling(cfg, outdir)
    if exp == "measure":
        return run_measure(cfg, outdir)
    if exp == "branch-mc":
        summary, timings, _ = run_branch_mc(cfg, outdir)
        return summary, timings
    if exp == "time-average":
        return run_time_average(cfg, outdir)
    if exp == "accept-all":
        return run_all(cfg)
    raise ConfigInvalidError(f"unknown experiment {exp!r}")


def _emit_checks(summary: dict, emit) -> bool:
    if "criteria" in summary:
        for crit in summary["criteria"]:
            status = "PASS" if crit["pass"] else "FAIL"
            emit(f"[{status}] criterion {crit['id']:>2}: {crit['name']}")
            for c in crit["checks"]:
                if not c["pass"]:
                    emit(
                        f"       failed {c['name']}: measured={c['measured']!r} "
                        f"target={c['target']}"
                    )
        return bool(summary["pass"])
    ok = True
    for c in summary["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        ok = ok and c["pass"]
        emit(f"[{status}] {c['name']}: measured={c['measured']!r} target={c['target']}")
    return ok


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="branchlab",
        description=(
            "Seeded numerical experiments on branch-resolved wave packet "
            "dynamics: propagator benchmarks, collective-width scaling, "
            "detector branching and trajectory-ensemble statistics."
        ),
    )
    parser.add_argument(
        "--config",
        metavar="PATH",
        default=None,
        help="JSON run config; missing keys fall back to built-in defaults",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--output", metavar="DIR", default=None, help="override the output directory"
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    args = parser.parse_args(argv)

    def emit(line: str):
        if not args.quiet:
            print(line)

    try:
        cfg = resolve_config(_load_config(args.config))
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.output is not None:
            cfg["output_dir"] = str(args.output)

        outdir = Path(cfg["output_dir"]) / cfg["experiment"]
        outdir.mkdir(parents=True, exist_ok=True)
        emit(f"experiment {cfg['experiment']} (seed {cfg['seed']}) -> {outdir}")

        summary, timings = _dispatch(cfg, outdir)
        (outdir / "summary.json").write_bytes(canonical_bytes(summary) + b"\n")
        artifacts = sorted(p.name for p in outdir.iterdir() if p.name != "manifest.json")
        manifest = {
            "package": {"name": "artifact", "version": __version__},
            "config": cfg,
            "artifacts": artifacts,
        }
        (outdir / "manifest.json").write_bytes(canonical_bytes(manifest) + b"\n")

        passed = _emit_checks(summary, emit)
        total = timings.get("total_s", sum(timings.values()))
        emit(f"wall clock: {total:.1f} s")
        emit("PASS" if passed else "FAIL")
        return 0 if passed else 1
    except BranchLabError as exc:
        _error_report(exc.code, str(exc))
        return 2
    except (ValueError, OSError) as exc:
        _error_report("invalid-input", str(exc))
        return 2


def _error_report(code: str, message: str):
    json.dump({"error": {"code": code, "message": message}}, sys.stderr)
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())
