"""Deterministic sample trajectories through a branching measurement.

Each sample is a single pointer position Q transported by the velocity
field of the evolving state plus an optional small noise.  The velocity
is the ratio of the probability current to the density of the coherent
total; because the object factors of distinct branches are orthogonal,
both are plain weighted sums over branches with no interference terms:

    rho(X, t) = sum_a |c_a|^2 |Psi_a(X, t)|^2
    j(X, t)   = sum_a |c_a|^2 [ Vdot_a rho_a + (hbar/M) Im(chi* chi') ]

Transport by this field is equivariant: an ensemble drawn from
|Psi(.,0)|^2 stays distributed as the time-t density, which is what
turns branch-basin geometry into outcome statistics.  Samples never
split; after the branches separate each sample sits in exactly one
peak and stays there.

The selection dynamics inside the branching region is an
implementation choice of this laboratory (density-transport guidance),
not a claim inherited from the modeled theory; see the package
documentation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    BasinBoundaryUnresolvedError,
    InsufficientFramesError,
    NodeEncounteredError,
)
from .grids import SpaceGrid, TimeGrid, WaveFunction, _derivative_8th
from .measurement import BranchSet

#: Relative density floor below which a point counts as sitting in a node.
NODE_FLOOR = 1e-12

#: One-sided 99% Kolmogorov-Smirnov band coefficient (D_crit * sqrt(L)).
KS_COEFF_99 = 1.628


@dataclass(frozen=True, eq=False)
class GuidanceFrames:
    """Precomputed density, current and velocity tables on the lab grid.

    ``widths[i]`` is the full packet width d_N at frame i; ``centers``
    carries the branch positions with shape (n_frames, n_branches).
    """

    grid: SpaceGrid
    times: TimeGrid
    rho: np.ndarray = field(repr=False)
    current: np.ndarray = field(repr=False)
    velocity: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    widths: np.ndarray = field(repr=False)
    mass: float = 1.0
    hbar: float = 1.0
    t_switch: float = 0.0

    @property
    def n_frames(self) -> int:
        return self.rho.shape[0]

    @property
    def n_branches(self) -> int:
        return self.centers.shape[1]


def build_guidance(branches: BranchSet) -> GuidanceFrames:
    """Tabulate rho, j and v = j/rho for every frame of a branch set."""
    det = branches.detector
    M = det.effective_mass
    hbar = det.hbar
    x = branches.grid_X.x
    x_chi = branches.chi_grid.x
    dx_chi = branches.chi_grid.dx
    n_frames = branches.n_frames
    nb = branches.n_branches
    probs = np.array([abs(c) ** 2 for c in branches.amplitudes])

    rho = np.zeros((n_frames, x.size))
    cur = np.zeros_like(rho)
    for i in range(n_frames):
        chi = branches.chi_frames[i]
        rho_chi = np.abs(chi) ** 2
        dchi = _derivative_8th(chi, dx_chi)
        j_chi = (hbar / M) * np.imag(np.conj(chi) * dchi)
        for a in range(nb):
            xi = x - branches.centers[i, a]
            rho_a = np.interp(xi, x_chi, rho_chi, left=0.0, right=0.0)
            j_a = branches.velocities[i, a] * rho_a + np.interp(
                xi, x_chi, j_chi, left=0.0, right=0.0
            )
            rho[i] += probs[a] * rho_a
            cur[i] += probs[a] * j_a

    vel = np.zeros_like(rho)
    for i in range(n_frames):
        good = rho[i] > NODE_FLOOR * rho[i].max()
        vel[i, good] = cur[i, good] / rho[i, good]

    for arr in (rho, cur, vel):
        arr.setflags(write=False)
    return GuidanceFrames(
        grid=branches.grid_X,
        times=branches.times,
        rho=rho,
        current=cur,
        velocity=vel,
        centers=np.array(branches.centers),
        widths=np.asarray(det.pointer_width(branches.times.t), dtype=float),
        mass=M,
        hbar=hbar,
        t_switch=det.t_switch,
    )


def guidance_velocity(psi: WaveFunction, Q):
    """Velocity (hbar/m) Im(psi'/psi) at Q by local cubic interpolation.

    Centered fourth-order differences provide psi' on the grid; the
    ratio field is interpolated through the seven grid points around Q.
    Raises node-encountered when any of those points has amplitude
    below 1e-12 of the peak.
    """
    grid = psi.grid
    amp = psi.amp
    x = grid.x
    scale = float(np.max(np.abs(amp)))
    damp = _derivative_8th(amp, grid.dx)

    Q_arr = np.atleast_1d(np.asarray(Q, dtype=float))
    out = np.empty(Q_arr.shape)
    for k, q in enumerate(Q_arr):
        if not grid.x_min <= q <= grid.x_max:
            raise ValueError(f"Q={q!r} lies outside the grid")
        idx = int(round((q - grid.x_min) / grid.dx))
        lo = max(idx - 3, 0)
        hi = min(idx + 4, grid.n_points)
        window = slice(lo, hi)
        if np.any(np.abs(amp[window]) <= NODE_FLOOR * scale):
            raise NodeEncounteredError(
                f"amplitude below {NODE_FLOOR:g} of peak near Q={q:.6g}"
            )
        v_local = (psi.hbar / psi.mass) * np.imag(damp[window] / amp[window])
        out[k] = CubicSpline(x[window], v_local)(q)
    if np.isscalar(Q) or np.asarray(Q).ndim == 0:
        return float(out[0])
    return out


def _transport(frames: GuidanceFrames, Q0: np.ndarray, noise=None, record=False):
    """Advance points through every frame interval.

    Returns (Q_final, valid, trajectories|None).  Points that enter a
    density node (or leave the grid) are excluded and frozen in place.
    """
    x = frames.grid.x
    dx = frames.grid.dx
    dt = frames.times.dt
    n_steps = frames.n_frames - 1
    Q = np.array(Q0, dtype=float)
    valid = np.ones(Q.size, dtype=bool)
    traj = None
    if record:
        traj = np.empty((Q.size, n_steps + 1))
        traj[:, 0] = Q
    for i in range(n_steps):
        rho_i = frames.rho[i]
        floor = NODE_FLOOR * float(rho_i.max())
        rho_here = np.interp(Q, x, rho_i, left=0.0, right=0.0)
        valid &= rho_here >= floor
        # Heun step: predict with v(t_i), correct with v(t_{i+1}) at the
        # predicted point, so accelerating branches carry no O(dt) lag.
        v0 = np.interp(Q, x, frames.velocity[i])
        v1 = np.interp(Q + v0 * dt, x, frames.velocity[i + 1])
        dQ = 0.5 * (v0 + v1) * dt
        if noise is not None:
            dQ = dQ + noise[:, i]
        dQ = np.where(valid, dQ, 0.0)
        step_max = float(np.max(np.abs(dQ))) if dQ.size else 0.0
        if step_max >= 4.0 * dx:
            raise InsufficientFramesError(
                f"per-step displacement {step_max:.4g} exceeds 4 grid "
                f"spacings at step {i}; the frame series is too coarse"
            )
        Q = Q + dQ
        if record:
            traj[:, i + 1] = Q
    return Q, valid, traj


def _label_positions(Q, valid, centers, d_width):
    """Branch index for points within 2.5*d_width of exactly one center."""
    labels = np.full(Q.size, -1, dtype=int)
    dist = np.abs(Q[:, None] - np.asarray(centers)[None, :])
    inside = dist <= 2.5 * d_width
    n_in = inside.sum(axis=1)
    pick = valid & (n_in == 1)
    labels[pick] = np.argmax(inside[pick], axis=1)
    return labels


def _inverse_cdf(x, rho, u):
    w = 0.5 * (rho[1:] + rho[:-1]) * np.diff(x)
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    return np.interp(u, cdf, x)


@dataclass(frozen=True, eq=False)
class SampleEnsemble:
    """L transported samples with their seeds, labels and full paths."""

    L: int
    trajectories: np.ndarray = field(repr=False)
    seeds: np.ndarray = field(repr=False)
    branch_labels: np.ndarray = field(repr=False)
    times: TimeGrid
    excluded: np.ndarray = field(repr=False)
    seed: int = 0
    noise_epsilon: float = 0.0

    @property
    def n_frames(self) -> int:
        return self.trajectories.shape[1]

    @property
    def n_excluded(self) -> int:
        return int(np.sum(self.excluded))

    @property
    def n_unassigned(self) -> int:
        return int(np.sum(self.branch_labels < 0))

    def positions(self, i: int) -> np.ndarray:
        return self.trajectories[:, i]


def evolve_ensemble(
    frames: GuidanceFrames,
    L: int,
    seed: int,
    noise_epsilon: float | None = None,
) -> SampleEnsemble:
    """Transport L samples drawn from the initial density.

    Each sample owns a counter-based random stream keyed by a child of
    ``seed``, so results are bitwise reproducible for a fixed seed no
    matter how the loop is sliced.  The first draw of a stream places
    the sample by inverse CDF of the initial density; the remaining
    draws provide the per-step noise, standard deviation
    noise_epsilon * sqrt(dt).  When ``noise_epsilon`` is omitted it
    defaults to one twentieth of the initial packet width.
    """
    if L < 1:
        raise ValueError("evolve_ensemble needs L >= 1")
    if noise_epsilon is None:
        noise_epsilon = float(frames.widths[0]) / 20.0
    n_steps = frames.n_frames - 1
    dt = frames.times.dt

    seeds = np.random.SeedSequence(seed).generate_state(L, np.uint64)
    u = np.empty(L)
    draw_noise = noise_epsilon > 0.0
    noise = np.empty((L, n_steps)) if draw_noise else None
    for l in range(L):
        gen = np.random.Generator(np.random.Philox(key=int(seeds[l])))
        u[l] = gen.random()
        if draw_noise:
            noise[l] = gen.standard_normal(n_steps)
    if draw_noise:
        noise *= noise_epsilon * np.sqrt(dt)

    Q0 = _inverse_cdf(frames.grid.x, frames.rho[0], u)
    Q, valid, traj = _transport(frames, Q0, noise=noise, record=True)
    labels = _label_positions(Q, valid, frames.centers[-1], frames.widths[-1])
    traj.setflags(write=False)
    return SampleEnsemble(
        L=L,
        trajectories=traj,
        seeds=seeds,
        branch_labels=labels,
        times=frames.times,
        excluded=~valid,
        seed=int(seed),
        noise_epsilon=float(noise_epsilon),
    )


def labels_at_frame(
    ens: SampleEnsemble, frames: GuidanceFrames, i: int
) -> np.ndarray:
    """Branch labels recomputed from the positions at frame i."""
    Q = ens.positions(i)
    return _label_positions(
        Q, ~ens.excluded, frames.centers[i], float(frames.widths[i])
    )


def _kernel_weights(values, point, bandwidth):
    z = (np.asarray(values) - point) / bandwidth
    return np.exp(-0.5 * z**2)


def _count_ratio(Q, members, valid, point, bandwidth):
    """Kernel-weighted fraction of local samples belonging to a group."""
    w = _kernel_weights(Q[valid], point, bandwidth)
    den = float(w.sum())
    if den <= 0.0:
        return float("nan")
    num = float(w[members[valid]].sum())
    return num / den


def _kde_density(values, point, bandwidth):
    """Kernel density in samples per unit length at a point."""
    w = _kernel_weights(values, point, bandwidth)
    return float(w.sum()) / (bandwidth * np.sqrt(2.0 * np.pi))


def _mean_density_ratios(Q, masks, valid, bandwidth, max_probes=2048):
    """Valid-sample average of each group-to-total KDE density ratio.

    Transport sorts future group members by position, so the pointwise
    ratio depends on where it is probed; averaging it over the occupied
    packet measures the position-independent group share instead.
    Probes stride the sample index deterministically and the kernel
    sums run in chunks to bound memory.
    """
    pts_all = Q[valid]
    if pts_all.size == 0:
        return np.full(len(masks), float("nan"))
    stride = max(1, int(np.ceil(pts_all.size / max_probes)))
    probes = pts_all[::stride]
    n_probe = probes.size
    den = np.zeros(n_probe)
    nums = np.zeros((len(masks), n_probe))
    groups = [Q[m & valid] for m in masks]
    for lo in range(0, n_probe, 256):
        chunk = probes[lo : lo + 256, None]
        den[lo : lo + 256] = np.sum(
            np.exp(-0.5 * ((chunk - pts_all[None, :]) / bandwidth) ** 2), axis=1
        )
        for k, pts in enumerate(groups):
            if pts.size:
                nums[k, lo : lo + 256] = np.sum(
                    np.exp(-0.5 * ((chunk - pts[None, :]) / bandwidth) ** 2), axis=1
                )
    # Every probe is itself a valid sample, so den >= 1.
    return np.mean(nums / den, axis=1)


def kappa_profile(
    ens: SampleEnsemble,
    branches: BranchSet,
    frame: int,
    points,
    bandwidth: float | None = None,
) -> np.ndarray:
    """Group-to-total density ratio of each branch at given positions.

    Evaluated at one frame: kappa_a(X) is the kernel-weighted fraction
    of the samples near X that belong to group a.  Before branching it
    sits at L_a/L everywhere; afterwards it steps to 1 on the group's
    own peak and 0 on the others.
    """
    i = branches._frame_index(frame)
    if bandwidth is None:
        bandwidth = float(branches.detector.pointer_width(branches.frame_time(i))) / 4.0
    Q = ens.positions(i)
    valid = ~ens.excluded
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    out = np.empty((branches.n_branches, pts.size))
    for a in range(branches.n_branches):
        members = ens.branch_labels == a
        for k, p in enumerate(pts):
            out[a, k] = _count_ratio(Q, members, valid, p, bandwidth)
    return out


@dataclass(frozen=True)
class BranchReport:
    """Counts, densities and widths of a labeled ensemble."""

    L: int
    probs: tuple
    counts: tuple
    fractions: tuple
    stderr: tuple
    kappa: dict
    kappa_frozen: dict
    widths: dict
    numcons_residual: tuple
    unassigned: int
    excluded: int
    reliable: tuple

    def to_json(self, indent: int = 2) -> str:
        payload = {
            "L": self.L,
            "probs": list(self.probs),
            "counts": list(self.counts),
            "fractions": list(self.fractions),
            "stderr": list(self.stderr),
            "kappa": {k: list(v) for k, v in self.kappa.items()},
            "kappa_frozen": {k: list(v) for k, v in self.kappa_frozen.items()},
            "widths": {k: (list(v) if np.ndim(v) else v) for k, v in self.widths.items()},
            "numcons_residual": list(self.numcons_residual),
            "unassigned": self.unassigned,
            "excluded": self.excluded,
            "reliable": list(self.reliable),
        }
        return json.dumps(payload, sort_keys=True, indent=indent)


def analyze_ensemble(
    ens: SampleEnsemble,
    branches: BranchSet,
    amplitudes=None,
) -> BranchReport:
    """Branch statistics of a transported ensemble.

    Fractions come with binomial standard errors.  kappa holds the
    group-to-total density ratios: before branching as the packet
    average of the pointwise ratio (the group share is position
    independent only in aggregate once transport has sorted members),
    after branching pointwise at the group's own peak and at the other
    peaks; kappa_frozen additionally reports the peak densities against
    the frozen pre-branching reference density.  Group widths
    are reported both as plain standard deviations and as occupancy
    widths (count divided by the reference peak density), whose ratio
    to the pre-branching occupancy width realizes the width identity;
    the kernel estimator is cross-checked by the number-conservation
    residual (density x width / count - 1).  Groups with fewer than 30
    members are flagged unreliable.
    """
    det = branches.detector
    if amplitudes is None:
        amplitudes = branches.amplitudes
    probs = np.array([abs(c) ** 2 for c in amplitudes])
    nb = branches.n_branches
    L = ens.L
    labels = ens.branch_labels
    valid = ~ens.excluded

    counts = np.array(
        [int(np.sum(labels == a)) for a in range(nb)], dtype=int
    )
    fractions = counts / L
    stderr = np.sqrt(fractions * (1.0 - fractions) / L)
    unassigned = L - int(counts.sum())

    t_nodes = branches.times.t
    i_before = int(np.searchsorted(t_nodes, det.t_switch, side="right") - 1)
    i_before = max(i_before, 0)
    i_final = branches.n_frames - 1
    h_before = float(det.pointer_width(t_nodes[i_before])) / 4.0
    h_after = float(det.pointer_width(t_nodes[i_final])) / 4.0

    Q_before = ens.positions(i_before)
    Q_final = ens.positions(i_final)
    centers_final = branches.centers[i_final]
    X0 = det.X_init

    kappa_before = _mean_density_ratios(
        Q_before, [labels == a for a in range(nb)], valid, h_before
    )
    kappa_own = np.empty(nb)
    kappa_other = np.empty(nb)
    for a in range(nb):
        members = labels == a
        kappa_own[a] = _count_ratio(
            Q_final, members, valid, float(centers_final[a]), h_after
        )
        others = [
            _count_ratio(Q_final, members, valid, float(centers_final[b]), h_after)
            for b in range(nb)
            if b != a
        ]
        kappa_other[a] = max(others) if others else float("nan")

    # Reference density: all valid samples at the pre-branching peak.
    rho_ref = _kde_density(Q_before[valid], X0, h_before)
    occupancy_before = float(np.sum(valid)) / rho_ref

    std_before = np.full(nb, float("nan"))
    std_after = np.full(nb, float("nan"))
    occupancy_after = np.empty(nb)
    numcons = np.full(nb, float("nan"))
    frozen_own = np.empty(nb)
    frozen_other = np.empty(nb)
    for a in range(nb):
        members = (labels == a) & valid
        occupancy_after[a] = counts[a] / rho_ref
        dens_own = _kde_density(Q_final[members], float(centers_final[a]), h_after)
        frozen_own[a] = dens_own / rho_ref
        frozen_other[a] = max(
            (
                _kde_density(Q_final[members], float(centers_final[b]), h_after)
                for b in range(nb)
                if b != a
            ),
            default=float("nan"),
        ) / rho_ref
        if counts[a] >= 2:
            std_before[a] = float(np.std(Q_before[members]))
            std_after[a] = float(np.std(Q_final[members]))
            sigma_eff = np.sqrt(std_after[a] ** 2 + h_after**2)
            predicted = dens_own * np.sqrt(2.0 * np.pi) * sigma_eff
            numcons[a] = predicted / counts[a] - 1.0

    ratio = occupancy_after / occupancy_before
    reliable = counts >= 30

    return BranchReport(
        L=L,
        probs=tuple(float(p) for p in probs),
        counts=tuple(int(c) for c in counts),
        fractions=tuple(float(f) for f in fractions),
        stderr=tuple(float(s) for s in stderr),
        kappa={
            "before": tuple(float(v) for v in kappa_before),
            "after_own": tuple(float(v) for v in kappa_own),
            "after_other": tuple(float(v) for v in kappa_other),
        },
        kappa_frozen={
            "before": tuple(float(v) for v in kappa_before),
            "after_own": tuple(float(v) for v in frozen_own),
            "after_other": tuple(float(v) for v in frozen_other),
        },
        widths={
            "std_before": tuple(float(v) for v in std_before),
            "std_after": tuple(float(v) for v in std_after),
            "occupancy_after": tuple(float(v) for v in occupancy_after),
            "occupancy_before_all": float(occupancy_before),
            "ratio": tuple(float(v) for v in ratio),
        },
        numcons_residual=tuple(float(v) for v in numcons),
        unassigned=unassigned,
        excluded=ens.n_excluded,
        reliable=tuple(bool(b) for b in reliable),
    )


def branch_basins(frames: GuidanceFrames, n_scan: int = 2001) -> list:
    """Decompose the initial support into basins by noiseless transport.

    Returns a list of (x_lo, x_hi, label) intervals covering the
    support of the initial density, label -1 marking the sliver whose
    endpoints finish between peaks.  Boundaries are refined by
    bisection; structure finer than the scan (single-point islands) or
    than the grid spacing raises basin-boundary-unresolved.
    """
    x = frames.grid.x
    rho0 = frames.rho[0]
    support = rho0 > 1e-10 * float(rho0.max())
    lo = float(x[support][0])
    hi = float(x[support][-1])
    pts = np.linspace(lo, hi, n_scan)

    def final_labels(q):
        Qf, valid, _ = _transport(frames, q, noise=None, record=False)
        return _label_positions(Qf, valid, frames.centers[-1], frames.widths[-1])

    labels = final_labels(pts)

    def _runs(lab):
        change = np.nonzero(np.diff(lab) != 0)[0]
        starts = np.concatenate([[0], change + 1])
        ends = np.concatenate([change, [lab.size - 1]])
        return starts, ends

    # Runs of constant label.  An isolated unassigned point is a
    # separatrix sliver thinner than the scan spacing (a stagnation
    # point caught exactly by a scan node); drop it and refine across
    # the gap.  An isolated *labeled* point is genuine basin structure
    # below the scan resolution and is refused.
    starts, ends = _runs(labels)
    single = starts == ends
    if np.any(single):
        if np.any(labels[starts[single]] >= 0):
            raise BasinBoundaryUnresolvedError(
                "single-point basin island in the scan; basin structure "
                "is finer than the scan resolution"
            )
        keep = np.ones(pts.size, dtype=bool)
        keep[starts[single]] = False
        pts = pts[keep]
        labels = labels[keep]
        lo = float(pts[0])
        hi = float(pts[-1])
        starts, ends = _runs(labels)
        if np.any(starts == ends):
            raise BasinBoundaryUnresolvedError(
                "single-point basin island in the scan; basin structure "
                "is finer than the scan resolution"
            )

    # Refine each boundary between consecutive runs by bisection.
    left = pts[ends[:-1]].copy()
    right = pts[starts[1:]].copy()
    left_label = labels[ends[:-1]]
    for _ in range(50):
        if np.all(right - left < 1e-3 * frames.grid.dx):
            break
        mid = 0.5 * (left + right)
        lab_mid = final_labels(mid)
        go_left = lab_mid == left_label
        left = np.where(go_left, mid, left)
        right = np.where(go_left, right, mid)
    boundaries = 0.5 * (left + right)
    if np.any(np.diff(boundaries) < frames.grid.dx):
        raise BasinBoundaryUnresolvedError(
            "adjacent basin boundaries closer than one grid spacing"
        )

    edges = np.concatenate([[lo], boundaries, [hi]])
    return [
        (float(edges[k]), float(edges[k + 1]), int(labels[starts[k]]))
        for k in range(starts.size)
    ]


def time_average_fraction(
    frames: GuidanceFrames, basins: list, psi0: WaveFunction
) -> np.ndarray:
    """Initial-density mass of each branch basin, normalized to total.

    This is the long-run fraction of coarse steps a generic sample
    spends in each branch: by label permanence a sample contributes all
    its post-branching time to the branch owning its starting point.
    """
    x = psi0.grid.x
    rho0 = np.abs(psi0.amp) ** 2
    w = 0.5 * (rho0[1:] + rho0[:-1]) * np.diff(x)
    F = np.concatenate([[0.0], np.cumsum(w)])
    total = F[-1]

    nb = frames.n_branches
    out = np.zeros(nb)
    for x_lo, x_hi, label in basins:
        if label < 0:
            continue
        mass = np.interp(x_hi, x, F) - np.interp(x_lo, x, F)
        out[label] += mass
    return out / total


def ks_statistic(samples: np.ndarray, x: np.ndarray, rho: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between samples and a gridded density."""
    w = 0.5 * (rho[1:] + rho[:-1]) * np.diff(x)
    cdf = np.concatenate([[0.0], np.cumsum(w)])
    cdf /= cdf[-1]
    v = np.sort(np.asarray(samples, dtype=float))
    Fv = np.interp(v, x, cdf)
    n = v.size
    upper = np.max(np.arange(1, n + 1) / n - Fv)
    lower = np.max(Fv - np.arange(0, n) / n)
    return float(max(upper, lower))


def equivariance_check(
    ens: SampleEnsemble, frames: GuidanceFrames, n_probes: int = 5
) -> dict:
    """KS distance between the ensemble and the transported density.

    Probes n_probes frames spread over the run.  ``band`` is the 99%
    KS acceptance band for the valid sample count; ``passed`` requires
    every probe under the band.
    """
    valid = ~ens.excluded
    n_valid = int(np.sum(valid))
    idx = np.unique(
        np.round(np.linspace(0, frames.n_frames - 1, n_probes)).astype(int)
    )
    stats = {}
    for i in idx:
        stats[float(frames.times.t[i])] = ks_statistic(
            ens.trajectories[valid, i], frames.grid.x, frames.rho[i]
        )
    band = KS_COEFF_99 / np.sqrt(n_valid)
    worst = max(stats.values())
    return {
        "ks": stats,
        "band": float(band),
        "worst": float(worst),
        "passed": bool(worst < band),
    }
