"""Configurable experiment drivers shared by the CLI and acceptance suite.

Each ``run_*`` function takes the full resolved configuration dict and
an optional output directory.  It returns a summary dict whose
``checks`` list carries {name, target, measured, pass} entries; wall
clock numbers are kept in a separate ``timings`` mapping so that the
summary itself is byte-reproducible for a fixed seed.
"""

from __future__ import annotations

import copy
import csv
import time

import numpy as np

from .ensemble import (
    analyze_ensemble,
    branch_basins,
    build_guidance,
    equivariance_check,
    evolve_ensemble,
    time_average_fraction,
)
from .errors import ConfigInvalidError
from .grids import (
    Potential,
    SpaceGrid,
    diagnostics,
    gaussian_packet,
    wavefunction_to_csv,
)
from .macro import MacroSystem, fluctuation_width, spreading_time
from .measurement import (
    DetectorModel,
    branch_evolve,
    peak_weights,
    separation_time,
)
from .pathsum import (
    PathSumConfig,
    ShortTimeKernel,
    monte_carlo_path_sum,
    path_sum_step,
    propagate_pathsum,
)
from .reference import (
    ReferenceConfig,
    analytic_oracle,
    l2_distance,
    propagate_reference,
)

EXPERIMENTS = (
    "propagate",
    "mc-pathsum",
    "macro-scaling",
    "measure",
    "branch-mc",
    "time-average",
    "accept-all",
)

DEFAULT_CONFIG = {
    "experiment": "accept-all",
    "seed": 42,
    "output_dir": "runs",
    "grid": {"x_min": -14.0, "x_max": 14.0, "n_points": 1024},
    "pathsum": {
        "dt": 1e-3,
        "scheme": "midpoint-potential",
        "T": 2.0,
        "sigma": 1.0,
        "x0": 0.0,
        "p0": 0.0,
        "mass": 1.0,
        "hbar": 1.0,
        "revival": {
            "omega": 1.0,
            "x0": 1.0,
            "n_steps": 1024,
        },
        "mc": {
            "dt": 0.5,
            "n_slices": 1,
            "n_replicas": 256,
            "n_repeats": 8,
            "rho_ell_ladder": [8.0, 16.0, 32.0, 64.0],
            "truncation_radius": 12.0,
            "sigma": 1.0,
            "p0": 0.4,
            "grid": {"x_min": -16.0, "x_max": 16.0, "n_points": 256},
        },
    },
    "macro": {
        "mu": 1.0,
        "scaled": {
            "sigma0": 1.0,
            "t": 0.5,
            "N_values": [100, 1000, 10000, 100000, 1000000],
        },
        "fixed": {
            "sigma0": 1.0,
            "growth": 1.1,
            "N_values": [10, 100, 1000, 10000],
        },
    },
    "detector": {
        "n_micro": 50,
        "mu": 1.0,
        "coupling": 1.0,
        "lambdas": [-1.0, 1.0],
        "probs": [0.3, 0.7],
        "omegas": [0.0, 0.0],
        "d_init": 0.4,
        "X_init": 0.0,
        "t_switch": 0.2,
        "threshold_multiple": 5.0,
        "horizon_factor": 1.55,
        "frame_dt": 0.005,
        "grid": {"x_min": -5.05, "x_max": 5.05, "n_points": 1024},
    },
    "ensemble": {
        "n_samples": 10000,
        "noise_epsilon": None,
        "seed_repeats": 100,
        "n_probes": 5,
        "basin_scan": 2001,
        "trajectory_stride": 0,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def _merge_validate(base: dict, override: dict, path: str = "") -> dict:
    """Recursively overlay ``override`` onto ``base``, rejecting unknown keys."""
    out = {}
    for key, base_val in base.items():
        if key not in override:
            out[key] = copy.deepcopy(base_val)
            continue
        val = override[key]
        if isinstance(base_val, dict) and isinstance(val, dict):
            out[key] = _merge_validate(base_val, val, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(val)
    for key in override:
        if key not in base:
            raise ConfigInvalidError(f"unknown config key {path}{key}")
    return out


def resolve_config(user: dict | None) -> dict:
    """Overlay a user config onto the defaults and sanity-check it."""
    cfg = _merge_validate(DEFAULT_CONFIG, user or {})
    if cfg["experiment"] not in EXPERIMENTS:
        raise ConfigInvalidError(
            f"unknown experiment {cfg['experiment']!r}; "
            f"choose one of {', '.join(EXPERIMENTS)}"
        )
    if not isinstance(cfg["seed"], int):
        raise ConfigInvalidError("seed must be an integer")
    return cfg


def _check(name: str, measured, target: str, ok: bool) -> dict:
    return {"name": name, "measured": measured, "target": target, "pass": bool(ok)}


def _space_grid(block: dict) -> SpaceGrid:
    return SpaceGrid(
        float(block["x_min"]), float(block["x_max"]), int(block["n_points"])
    )


def _child_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def _loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs)), np.log(np.asarray(ys)), 1)[0])


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------------------
# propagate: free-packet benchmark against both oracles.

def run_propagate(cfg: dict, outdir=None):
    ps = cfg["pathsum"]
    grid = _space_grid(cfg["grid"])
    t_start = time.perf_counter()
    psi0 = gaussian_packet(
        grid, ps["x0"], ps["p0"], ps["sigma"], mass=ps["mass"], hbar=ps["hbar"]
    )
    psi_T = propagate_pathsum(psi0, Potential.free(), ps["T"], ps["dt"], ps["scheme"])
    oracle = analytic_oracle(
        "free_gaussian",
        grid,
        ps["T"],
        x0=ps["x0"],
        p0=ps["p0"],
        sigma=ps["sigma"],
        mass=ps["mass"],
        hbar=ps["hbar"],
    )
    reference = propagate_reference(
        psi0, Potential.free(), ps["T"], ReferenceConfig(dt=ps["dt"])
    )
    elapsed = time.perf_counter() - t_start

    l2_oracle = l2_distance(psi_T, oracle)
    l2_reference = l2_distance(psi_T, reference)
    width = float(np.sqrt(diagnostics(psi_T)["var_x"]))
    spread = ps["hbar"] * ps["T"] / (2.0 * ps["mass"] * ps["sigma"] ** 2)
    width_target = ps["sigma"] * float(np.sqrt(1.0 + spread**2))

    checks = [
        _check("l2_vs_oracle", l2_oracle, "<= 1e-4", l2_oracle <= 1e-4),
        _check("l2_vs_reference", l2_reference, "<= 1e-4", l2_reference <= 1e-4),
        _check(
            "final_width",
            width,
            f"{width_target:.6f} +- 1e-3",
            abs(width - width_target) <= 1e-3,
        ),
        _check("runtime_under_30s", None, "< 30 s wall clock", elapsed < 30.0),
    ]
    summary = {
        "experiment": "propagate",
        "l2_vs_oracle": l2_oracle,
        "l2_vs_reference": l2_reference,
        "width": width,
        "width_target": width_target,
        "checks": checks,
    }
    timings = {"propagate_s": elapsed}
    if outdir is not None:
        wavefunction_to_csv(psi_T, outdir / "psi_final.csv")
    return summary, timings


# ---------------------------------------------------------------------------
# harmonic revival (part of accept-all).

def run_revival(cfg: dict, outdir=None):
    ps = cfg["pathsum"]
    rv = ps["revival"]
    omega = float(rv["omega"])
    mass, hbar = ps["mass"], ps["hbar"]
    x0 = float(rv["x0"])
    n_steps = int(rv["n_steps"])
    T = 2.0 * np.pi / omega
    dt = T / n_steps
    grid = _space_grid(cfg["grid"])
    sigma = float(np.sqrt(hbar / (2.0 * mass * omega)))

    t_start = time.perf_counter()
    psi0 = gaussian_packet(grid, x0, 0.0, sigma, mass=mass, hbar=hbar)
    psi_T = propagate_pathsum(
        psi0, Potential.harmonic(omega, mass=mass), T, dt, ps["scheme"]
    )
    elapsed = time.perf_counter() - t_start
    mean_x = diagnostics(psi_T)["mean_x"]
    err = abs(mean_x - x0)

    checks = [
        _check("revival_mean_x", err, "|<x>(T) - x0| <= 1e-3", err <= 1e-3),
    ]
    summary = {
        "experiment": "revival",
        "mean_x": mean_x,
        "x0": x0,
        "checks": checks,
    }
    return summary, {"revival_s": elapsed}


# ---------------------------------------------------------------------------
# mc-pathsum: sample-average estimator against the deterministic step.

def run_mc_pathsum(cfg: dict, outdir=None):
    ps = cfg["pathsum"]
    mc = ps["mc"]
    grid = _space_grid(mc["grid"])
    mass, hbar = ps["mass"], ps["hbar"]
    dt = float(mc["dt"])
    n_slices = int(mc["n_slices"])
    seed = cfg["seed"]

    t_start = time.perf_counter()
    psi0 = gaussian_packet(grid, 0.0, mc["p0"], mc["sigma"], mass=mass, hbar=hbar)
    kernel = ShortTimeKernel(
        dt=dt, mass=mass, potential=Potential.free(), hbar=hbar, scheme=ps["scheme"]
    )
    target = psi0
    for _ in range(n_slices):
        target = path_sum_step(target, kernel)

    # The per-rung rms deviation of a single replica-mean estimate is a
    # noisy observable (the output points share samples, so the effective
    # grid dof is small); pooling independent repeats tightens the fitted
    # slope without touching the estimator itself.
    ladder = [float(v) for v in mc["rho_ell_ladder"]]
    n_repeats = int(mc["n_repeats"])
    radius = mc["truncation_radius"]
    radius = None if radius is None else float(radius)
    rms_dev = []
    rms_err = []
    for k, rho_ell in enumerate(ladder):
        rho = rho_ell / kernel.ell_d
        dev2 = err2 = 0.0
        for j in range(n_repeats):
            result = monte_carlo_path_sum(
                psi0,
                Potential.free(),
                n_slices,
                dt,
                PathSumConfig(
                    rho=rho,
                    truncation_radius=radius,
                    seed=_child_seed(seed, 300 + 16 * k + j),
                    n_replicas=int(mc["n_replicas"]),
                ),
            )
            dev2 += float(np.mean(np.abs(result.estimate.amp - target.amp) ** 2))
            err2 += float(np.mean(result.stderr**2))
        rms_dev.append(float(np.sqrt(dev2 / n_repeats)))
        rms_err.append(float(np.sqrt(err2 / n_repeats)))
    elapsed = time.perf_counter() - t_start

    ratio = rms_dev[-1] / rms_err[-1]
    slope = _loglog_slope(ladder, rms_dev)
    checks = [
        _check(
            "deviation_within_3_stderr",
            ratio,
            "rms deviation / rms stderr <= 3 at the densest rung",
            ratio <= 3.0,
        ),
        _check(
            "error_density_slope",
            slope,
            "-0.5 +- 0.1",
            abs(slope + 0.5) <= 0.1,
        ),
    ]
    summary = {
        "experiment": "mc-pathsum",
        "rho_ell_ladder": ladder,
        "rms_deviation": rms_dev,
        "rms_stderr": rms_err,
        "slope": slope,
        "checks": checks,
    }
    if outdir is not None:
        _write_rows(
            outdir / "ladder.csv",
            ["rho_ell", "rms_deviation", "rms_stderr"],
            list(zip(ladder, rms_dev, rms_err)),
        )
    return summary, {"mc_pathsum_s": elapsed}


# ---------------------------------------------------------------------------
# macro-scaling: packet-width scaling laws in N.

def run_macro_scaling(cfg: dict, outdir=None):
    mac = cfg["macro"]
    mu = float(mac["mu"])
    t_start = time.perf_counter()

    scaled = mac["scaled"]
    widths = []
    for N in scaled["N_values"]:
        system = MacroSystem(
            n_micro=int(N),
            mu=mu,
            potential_X=Potential.free(),
            sigma0=float(scaled["sigma0"]),
            sigma_mode="scaled",
        )
        widths.append(fluctuation_width(system, float(scaled["t"])).measured)
    slope_width = _loglog_slope(scaled["N_values"], widths)

    fixed = mac["fixed"]
    times = []
    for N in fixed["N_values"]:
        system = MacroSystem(
            n_micro=int(N),
            mu=mu,
            potential_X=Potential.free(),
            sigma0=float(fixed["sigma0"]),
            sigma_mode="fixed",
        )
        times.append(spreading_time(system, growth=float(fixed["growth"])))
    slope_time = _loglog_slope(fixed["N_values"], times)
    elapsed = time.perf_counter() - t_start

    checks = [
        _check(
            "width_scaling_slope",
            slope_width,
            "-0.50 +- 0.02",
            abs(slope_width + 0.5) <= 0.02,
        ),
        _check(
            "spreading_time_slope",
            slope_time,
            "+1.00 +- 0.05",
            abs(slope_time - 1.0) <= 0.05,
        ),
    ]
    summary = {
        "experiment": "macro-scaling",
        "scaled_N": list(scaled["N_values"]),
        "scaled_width": widths,
        "width_slope": slope_width,
        "fixed_N": list(fixed["N_values"]),
        "spreading_time": times,
        "time_slope": slope_time,
        "checks": checks,
    }
    if outdir is not None:
        rows = [("scaled-width", int(n), w) for n, w in zip(scaled["N_values"], widths)]
        rows += [("spreading-time", int(n), t) for n, t in zip(fixed["N_values"], times)]
        _write_rows(outdir / "scaling.csv", ["quantity", "N", "value"], rows)
    return summary, {"macro_scaling_s": elapsed}


# ---------------------------------------------------------------------------
# shared measurement scenario.

def build_detector(cfg: dict) -> DetectorModel:
    det = cfg["detector"]
    probs = [float(p) for p in det["probs"]]
    total = sum(probs)
    if total <= 0:
        raise ConfigInvalidError("detector.probs must have positive mass")
    amplitudes = [np.sqrt(p / total) for p in probs]
    return DetectorModel(
        n_micro=int(det["n_micro"]),
        mu=float(det["mu"]),
        coupling=float(det["coupling"]),
        lambdas=tuple(float(v) for v in det["lambdas"]),
        amplitudes=tuple(amplitudes),
        omegas=tuple(float(v) for v in det["omegas"]),
        d_init=float(det["d_init"]),
        X_init=float(det["X_init"]),
        t_switch=float(det["t_switch"]),
    )


def build_measure_scenario(cfg: dict) -> dict:
    """Detector, horizon and evolved branches for the pinned scenario."""
    det_cfg = cfg["detector"]
    det = build_detector(cfg)
    taus = separation_time(det, float(det_cfg["threshold_multiple"]))
    tau_sep = max(taus.values())
    frame_dt = float(det_cfg["frame_dt"])
    horizon = det.t_switch + float(det_cfg["horizon_factor"]) * tau_sep
    n_frames = int(np.ceil(horizon / frame_dt - 1e-12))
    T_end = n_frames * frame_dt
    grid = _space_grid(det_cfg["grid"])
    branches = branch_evolve(det, T_end, frame_dt, grid=grid)
    return {
        "detector": det,
        "branches": branches,
        "separation_times": taus,
        "tau_sep": float(tau_sep),
        "T_end": float(T_end),
    }


# ---------------------------------------------------------------------------
# measure: branch trajectories, signal snapshots and peak weights.

def run_measure(cfg: dict, outdir=None, scenario: dict | None = None):
    t_start = time.perf_counter()
    scen = scenario or build_measure_scenario(cfg)
    det = scen["detector"]
    branches = scen["branches"]
    T_end = scen["T_end"]

    J = branches.signal(-1)
    d_T = float(det.pointer_width(T_end))
    weights = peak_weights(J, branches, d_T)
    probs = np.array([abs(c) ** 2 for c in branches.amplitudes])
    weight_err = float(np.max(np.abs(weights - probs)))

    overlap = 0.0
    for a in range(branches.n_branches):
        for b in range(a + 1, branches.n_branches):
            overlap = max(overlap, branches.overlap(a, b, -1))
    drift = branches.population_drift()
    elapsed = time.perf_counter() - t_start

    checks = [
        _check(
            "peak_weights",
            [float(w) for w in weights],
            "|c_a|^2 +- 1e-3 per branch",
            weight_err <= 1e-3,
        ),
        _check("branch_overlap", overlap, "< 1e-5", overlap < 1e-5),
        _check("population_drift", drift, "< 1e-10", drift < 1e-10),
    ]
    summary = {
        "experiment": "measure",
        "separation_times": {
            f"{a}-{b}": float(v) for (a, b), v in scen["separation_times"].items()
        },
        "T_end": T_end,
        "weights": [float(w) for w in weights],
        "probs": [float(p) for p in probs],
        "overlap": overlap,
        "population_drift": drift,
        "checks": checks,
    }
    if outdir is not None:
        t_nodes = branches.times.t
        rows = []
        for i, t in enumerate(t_nodes):
            rows.append(
                [float(t)]
                + [float(branches.centers[i, a]) for a in range(branches.n_branches)]
                + [float(det.pointer_width(t))]
            )
        header = (
            ["t"]
            + [f"X_{a}" for a in range(branches.n_branches)]
            + ["d_N"]
        )
        _write_rows(outdir / "trajectories.csv", header, rows)

        i_switch = int(np.searchsorted(t_nodes, det.t_switch, side="right") - 1)
        snaps = sorted({0, max(i_switch, 0), branches.n_frames // 2, branches.n_frames - 1})
        for i in snaps:
            rows = list(zip(branches.grid_X.x.tolist(), branches.signal(i).tolist()))
            _write_rows(outdir / f"signal_frame{i:05d}.csv", ["X", "J"], rows)
    return summary, {"measure_s": elapsed}


# ---------------------------------------------------------------------------
# branch-mc: trajectory ensemble, Born statistics, kappa, widths, KS.

def run_branch_mc(cfg: dict, outdir=None, scenario: dict | None = None):
    ens_cfg = cfg["ensemble"]
    seed = cfg["seed"]
    L = int(ens_cfg["n_samples"])
    t_start = time.perf_counter()
    scen = scenario or build_measure_scenario(cfg)
    branches = scen["branches"]
    frames = build_guidance(branches)
    noise_eps = ens_cfg["noise_epsilon"]
    noise_eps = None if noise_eps is None else float(noise_eps)

    ens = evolve_ensemble(frames, L, seed, noise_epsilon=noise_eps)
    report = analyze_ensemble(ens, branches)
    equiv = equivariance_check(ens, frames, n_probes=int(ens_cfg["n_probes"]))

    probs = np.array(report.probs)
    fractions = np.array(report.fractions)
    bands = 3.0 * np.sqrt(probs * (1.0 - probs) / L)
    main_in_band = bool(np.all(np.abs(fractions - probs) <= bands))

    repeats = int(ens_cfg["seed_repeats"])
    born = []
    n_in_band = 0
    for s in range(repeats):
        ens_s = evolve_ensemble(frames, L, s, noise_epsilon=noise_eps)
        labels = ens_s.branch_labels
        fr = np.array(
            [np.sum(labels == a) for a in range(branches.n_branches)], dtype=float
        ) / L
        ok = bool(np.all(np.abs(fr - probs) <= bands))
        n_in_band += ok
        born.append({"seed": s, "fractions": [float(v) for v in fr], "in_band": ok})
    elapsed = time.perf_counter() - t_start

    kappa = report.kappa
    kappa_before_err = float(
        np.max(np.abs(np.array(kappa["before"]) - fractions))
    )
    kappa_own_err = float(np.max(np.abs(np.array(kappa["after_own"]) - 1.0)))
    kappa_other_max = float(np.max(kappa["after_other"]))
    ratio = np.array(report.widths["ratio"])
    ratio_rel_err = float(np.max(np.abs(ratio / probs - 1.0)))
    numcons_max = float(np.max(np.abs(report.numcons_residual)))

    checks = [
        _check(
            "born_fraction_seeded",
            [float(v) for v in fractions],
            "within 3-sigma binomial band of |c_a|^2",
            main_in_band,
        ),
        _check(
            "born_band_repeats",
            n_in_band,
            f">= {repeats - 1} of {repeats} seeds in band",
            n_in_band >= repeats - 1,
        ),
        _check(
            "unassigned_fraction",
            report.unassigned / L,
            "< 1e-3",
            report.unassigned / L < 1e-3,
        ),
        _check(
            "kappa_before",
            [float(v) for v in kappa["before"]],
            "L_a/L +- 0.05",
            kappa_before_err <= 0.05,
        ),
        _check(
            "kappa_after_own",
            [float(v) for v in kappa["after_own"]],
            "1 +- 0.1",
            kappa_own_err <= 0.1,
        ),
        _check(
            "kappa_after_other",
            [float(v) for v in kappa["after_other"]],
            "<= 0.05",
            kappa_other_max <= 0.05,
        ),
        _check(
            "width_ratio",
            [float(v) for v in ratio],
            "|c_a|^2 +- 15% relative",
            ratio_rel_err <= 0.15,
        ),
        _check(
            "number_conservation",
            [float(v) for v in report.numcons_residual],
            "density x width matches counts +- 10%",
            numcons_max <= 0.10,
        ),
        _check(
            "equivariance_ks",
            equiv["worst"],
            f"< {equiv['band']:.6g} (99% band)",
            equiv["passed"],
        ),
        _check("runtime_under_2min", None, "< 120 s wall clock", elapsed < 120.0),
    ]
    summary = {
        "experiment": "branch-mc",
        "L": L,
        "seed": seed,
        "report": {
            "counts": list(report.counts),
            "fractions": list(report.fractions),
            "stderr": list(report.stderr),
            "probs": list(report.probs),
            "kappa": {k: list(v) for k, v in report.kappa.items()},
            "kappa_frozen": {k: list(v) for k, v in report.kappa_frozen.items()},
            "widths": {
                k: (list(v) if isinstance(v, tuple) else v)
                for k, v in report.widths.items()
            },
            "numcons_residual": list(report.numcons_residual),
            "unassigned": report.unassigned,
            "excluded": report.excluded,
            "reliable": list(report.reliable),
        },
        "equivariance": {
            "band": equiv["band"],
            "worst": equiv["worst"],
            "ks": {f"{t:.6f}": v for t, v in equiv["ks"].items()},
        },
        "born_in_band": n_in_band,
        "born_repeats": repeats,
        "checks": checks,
    }
    if outdir is not None:
        (outdir / "report.json").write_text(report.to_json(), encoding="utf-8")
        _write_rows(
            outdir / "born.csv",
            ["seed", "in_band"]
            + [f"fraction_{a}" for a in range(branches.n_branches)],
            [[row["seed"], int(row["in_band"])] + row["fractions"] for row in born],
        )
        stride = int(ens_cfg["trajectory_stride"])
        if stride > 0:
            t_nodes = branches.times.t
            rows = []
            for l in range(0, L, stride):
                for i in range(0, ens.n_frames, 10):
                    rows.append([l, float(t_nodes[i]), float(ens.trajectories[l, i])])
            _write_rows(outdir / "trajectories.csv", ["sample", "t", "Q"], rows)
    result = {"scenario": scen, "frames": frames, "ensemble": ens}
    return summary, {"branch_mc_s": elapsed}, result


# ---------------------------------------------------------------------------
# time-average: basin decomposition and initial-density quadrature.

def run_time_average(
    cfg: dict,
    outdir=None,
    scenario: dict | None = None,
    frames=None,
    reference: dict | None = None,
):
    ens_cfg = cfg["ensemble"]
    t_start = time.perf_counter()
    scen = scenario or build_measure_scenario(cfg)
    det = scen["detector"]
    branches = scen["branches"]
    if frames is None:
        frames = build_guidance(branches)

    basins = branch_basins(frames, n_scan=int(ens_cfg["basin_scan"]))
    psi0 = gaussian_packet(
        branches.grid_X,
        det.X_init,
        0.0,
        det.sigma0,
        mass=det.effective_mass,
        hbar=det.hbar,
    )
    fractions = time_average_fraction(frames, basins, psi0)
    probs = np.array([abs(c) ** 2 for c in branches.amplitudes])
    err = float(np.max(np.abs(fractions - probs)))
    elapsed = time.perf_counter() - t_start

    checks = [
        _check(
            "basin_fractions",
            [float(v) for v in fractions],
            "|c_a|^2 +- 0.005 per branch",
            err <= 0.005,
        ),
    ]
    if reference is not None:
        ref_fr = np.array(reference["fractions"])
        ref_se = np.array(reference["stderr"])
        gap = np.abs(fractions - ref_fr)
        ok = bool(np.all(gap <= 3.0 * np.maximum(ref_se, 1e-12)))
        checks.append(
            _check(
                "matches_ensemble_fractions",
                [float(v) for v in gap],
                "within 3 sigma of the ensemble fractions",
                ok,
            )
        )
    summary = {
        "experiment": "time-average",
        "fractions": [float(v) for v in fractions],
        "probs": [float(p) for p in probs],
        "basins": [
            {"x_lo": lo, "x_hi": hi, "label": lab} for lo, hi, lab in basins
        ],
        "checks": checks,
    }
    if outdir is not None:
        _write_rows(
            outdir / "basins.csv",
            ["x_lo", "x_hi", "label"],
            [[lo, hi, lab] for lo, hi, lab in basins],
        )
    return summary, {"time_average_s": elapsed}
