"""End-to-end acceptance battery.

``run_core`` executes criteria 1 through 10 and returns a summary dict
that is byte-reproducible for a fixed configuration.  ``run_all`` runs
the core twice and adds the reproducibility criterion by comparing the
serialized summaries.
"""

from __future__ import annotations

import json
import time

from .experiments import (
    build_measure_scenario,
    run_branch_mc,
    run_macro_scaling,
    run_mc_pathsum,
    run_measure,
    run_propagate,
    run_revival,
    run_time_average,
)

TOTAL_BUDGET_S = 600.0


def canonical_bytes(summary: dict) -> bytes:
    return json.dumps(summary, sort_keys=True, indent=2).encode("utf-8")


def _criterion(cid: int, name: str, checks: list) -> dict:
    return {
        "id": cid,
        "name": name,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
    }


def _select(summary: dict, names) -> list:
    chosen = [c for c in summary["checks"] if c["name"] in names]
    if len(chosen) != len(names):
        missing = set(names) - {c["name"] for c in chosen}
        raise RuntimeError(f"missing checks: {sorted(missing)}")
    return chosen


def run_core(cfg: dict):
    """Criteria 1-10 once; returns (summary, timings)."""
    timings = {}

    s_prop, t = run_propagate(cfg)
    timings.update(t)
    s_rev, t = run_revival(cfg)
    timings.update(t)
    s_mc, t = run_mc_pathsum(cfg)
    timings.update(t)
    s_mac, t = run_macro_scaling(cfg)
    timings.update(t)

    t0 = time.perf_counter()
    scen = build_measure_scenario(cfg)
    timings["scenario_s"] = time.perf_counter() - t0
    s_meas, t = run_measure(cfg, scenario=scen)
    timings.update(t)
    s_bmc, t, extra = run_branch_mc(cfg, scenario=scen)
    timings.update(t)
    reference = {
        "fractions": s_bmc["report"]["fractions"],
        "stderr": s_bmc["report"]["stderr"],
    }
    s_ta, t = run_time_average(
        cfg, scenario=scen, frames=extra["frames"], reference=reference
    )
    timings.update(t)

    criteria = [
        _criterion(1, "free-packet-benchmark", s_prop["checks"]),
        _criterion(2, "harmonic-revival", s_rev["checks"]),
        _criterion(3, "mc-estimator-convergence", s_mc["checks"]),
        _criterion(4, "macro-width-scaling", s_mac["checks"]),
        _criterion(5, "signal-peak-weights", s_meas["checks"]),
        _criterion(
            6,
            "born-fractions",
            _select(
                s_bmc,
                [
                    "born_fraction_seeded",
                    "born_band_repeats",
                    "unassigned_fraction",
                    "runtime_under_2min",
                ],
            ),
        ),
        _criterion(
            7,
            "density-ratio-regimes",
            _select(s_bmc, ["kappa_before", "kappa_after_own", "kappa_after_other"]),
        ),
        _criterion(
            8,
            "branch-width-ratio",
            _select(s_bmc, ["width_ratio", "number_conservation"]),
        ),
        _criterion(
            9,
            "basin-quadrature",
            _select(s_ta, ["basin_fractions", "matches_ensemble_fractions"]),
        ),
        _criterion(10, "equivariance", _select(s_bmc, ["equivariance_ks"])),
    ]
    summary = {
        "seed": cfg["seed"],
        "criteria": criteria,
        "pass": all(c["pass"] for c in criteria),
    }
    return summary, timings


def run_all(cfg: dict):
    """Criteria 1-11; the core runs twice for the byte comparison."""
    t_start = time.perf_counter()
    first, timings_a = run_core(cfg)
    second, timings_b = run_core(cfg)
    identical = canonical_bytes(first) == canonical_bytes(second)
    elapsed = time.perf_counter() - t_start

    checks = [
        {
            "name": "summary_bytes_identical",
            "measured": bool(identical),
            "target": "two full runs serialize to identical JSON",
            "pass": bool(identical),
        },
        {
            "name": "runtime_under_10min",
            "measured": None,
            "target": "< 600 s wall clock",
            "pass": elapsed < TOTAL_BUDGET_S,
        },
    ]
    summary = dict(first)
    summary["criteria"] = list(first["criteria"]) + [
        _criterion(11, "reproducibility", checks)
    ]
    summary["pass"] = bool(first["pass"] and second["pass"] and all(
        c["pass"] for c in checks
    ))

    timings = {f"run1_{k}": v for k, v in timings_a.items()}
    timings.update({f"run2_{k}": v for k, v in timings_b.items()})
    timings["total_s"] = elapsed
    return summary, timings
