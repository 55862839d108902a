"""Pointer-variable measurement model with per-outcome branch evolution.

A detector couples an object observable with eigenvalues lambda_a to a
collective pointer coordinate X through a linear force g*N*lambda_a
switched on at t_switch.  With object transitions frozen, each outcome
evolves independently under

    H_a = P^2 / (2 N mu) - g N lambda_a X,

so the joint state is a sum of branches c_a * phi_a(x) * Psi_a(X, t)
with orthogonal object factors.  For a linear pointer force the exact
solution factorizes into a classical part and a shared spreading
envelope:

    Psi_a(X, t) = exp{i [M Vdot_a (X - X_a) + S_a] / hbar} chi(X - X_a, t)

where X_a, Vdot_a, S_a follow uniformly accelerated closed forms and
chi is the free (force-less) evolution of the initial packet with mass
M = N mu.  The envelope is evolved once by the reference solver on a
small comoving grid and reused by every branch; this keeps the grid
free of the huge lab-frame phase gradients M*Vdot/hbar that a direct
evolution would need to resolve.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import (
    BranchesNotSeparatedError,
    BranchLeftGridError,
    NeverSeparatesError,
    UnresolvedPacketError,
)
from .grids import Potential, SpaceGrid, TimeGrid, gaussian_packet
from .reference import make_stepper

#: Envelope grid resolution, points per initial packet standard deviation.
CHI_POINTS_PER_SIGMA = 12

#: Envelope grid half-span in units of the widest packet deviation.
CHI_SPAN_SIGMAS = 8.0


@dataclass(frozen=True)
class DetectorModel:
    """Linear-coupling detector: N pointer microdegrees, one readout.

    ``d_init`` is the full width of the initial pointer packet (twice
    the Gaussian standard deviation); the same convention is used for
    the time-dependent ``pointer_width``.  ``amplitudes`` are the
    object-state coefficients c_a; their moduli squared must sum to 1.
    ``omegas`` are the frozen object phases (rad/time) attached to each
    branch; they cancel in every density and are carried for
    completeness.
    """

    n_micro: int
    mu: float
    coupling: float
    lambdas: tuple
    amplitudes: tuple
    d_init: float
    omegas: tuple | None = None
    X_init: float = 0.0
    t_switch: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        amp = tuple(complex(v) for v in self.amplitudes)
        if self.omegas is None:
            om = tuple(0.0 for _ in lam)
        else:
            om = tuple(float(v) for v in self.omegas)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "omegas", om)
        if self.n_micro < 1:
            raise ValueError("DetectorModel needs n_micro >= 1")
        if self.mu <= 0 or self.hbar <= 0:
            raise ValueError("DetectorModel needs mu > 0 and hbar > 0")
        if self.d_init <= 0:
            raise ValueError("DetectorModel needs d_init > 0")
        if not lam:
            raise ValueError("DetectorModel needs at least one branch")
        if len(amp) != len(lam) or len(om) != len(lam):
            raise ValueError("lambdas, amplitudes and omegas must align")
        total = sum(abs(c) ** 2 for c in amp)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(
                f"branch amplitudes must satisfy sum |c_a|^2 = 1 "
                f"(got {total!r})"
            )
        for a, b in itertools.combinations(lam, 2):
            if a == b:
                raise ValueError("eigenvalues must be pairwise distinct")

    @property
    def n_branches(self) -> int:
        return len(self.lambdas)

    @property
    def effective_mass(self) -> float:
        return self.n_micro * self.mu

    @property
    def sigma0(self) -> float:
        return 0.5 * self.d_init

    def pointer_width(self, t):
        """Full packet width 2*sigma(t) under free spreading."""
        s0 = self.sigma0
        M = self.effective_mass
        return self.d_init * np.sqrt(1.0 + (self.hbar * t / (2.0 * M * s0**2)) ** 2)

    def _tau(self, t):
        return np.clip(np.asarray(t, dtype=float) - self.t_switch, 0.0, None)

    def branch_center(self, a: int, t):
        """Classical pointer position X_a(t); N cancels."""
        tau = self._tau(t)
        acc = self.coupling * self.lambdas[a] / self.mu
        return self.X_init + 0.5 * acc * tau**2

    def branch_velocity(self, a: int, t):
        tau = self._tau(t)
        return self.coupling * self.lambdas[a] / self.mu * tau

    def branch_action(self, a: int, t):
        """Classical action along branch a, accumulated from t_switch."""
        tau = self._tau(t)
        g, lam = self.coupling, self.lambdas[a]
        return self.n_micro * (
            g**2 * lam**2 * tau**3 / (3.0 * self.mu) + g * lam * self.X_init * tau
        )


@dataclass(frozen=True, eq=False)
class BranchSet:
    """Branches of a measurement run, ordered by eigenvalue.

    ``chi_frames`` holds the shared spreading envelope on the comoving
    grid at every frame time; ``centers``, ``velocities`` and
    ``actions`` hold the per-branch classical data with shape
    (n_frames, n_branches).  Branch wave functions on the lab grid are
    materialized on demand by :meth:`branch_amp`.
    """

    detector: DetectorModel
    grid_X: SpaceGrid
    times: TimeGrid
    lambdas: tuple
    amplitudes: tuple
    omegas: tuple
    chi_grid: SpaceGrid
    chi_frames: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    velocities: np.ndarray = field(repr=False)
    actions: np.ndarray = field(repr=False)
    mean_offsets: np.ndarray = field(repr=False)

    @property
    def n_branches(self) -> int:
        return len(self.lambdas)

    @property
    def n_frames(self) -> int:
        return self.chi_frames.shape[0]

    def frame_time(self, i: int) -> float:
        return float(self.times.t[i])

    def _frame_index(self, i: int) -> int:
        n = self.n_frames
        if not -n <= i < n:
            raise IndexError(f"frame {i} out of range for {n} frames")
        return i % n

    def branch_amp(self, a: int, i: int) -> np.ndarray:
        """Branch wave function Psi_a at frame i on the lab grid."""
        i = self._frame_index(i)
        det = self.detector
        M = det.effective_mass
        hbar = det.hbar
        t = self.frame_time(i)
        xi = self.grid_X.x - self.centers[i, a]
        spline = CubicSpline(self.chi_grid.x, self.chi_frames[i])
        inside = (xi >= self.chi_grid.x_min) & (xi <= self.chi_grid.x_max)
        amp = np.zeros(self.grid_X.n_points, dtype=complex)
        amp[inside] = spline(xi[inside])
        phase = (
            M * self.velocities[i, a] * xi + self.actions[i, a]
        ) / hbar - self.omegas[a] * t
        return amp * np.exp(1j * phase)

    def mean_X(self, a: int, i: int) -> float:
        """Packet mean position of branch a at frame i."""
        i = self._frame_index(i)
        return float(self.centers[i, a] + self.mean_offsets[i])

    def signal(self, i: int) -> np.ndarray:
        """Pointer density J(X) of the coherent total at frame i.

        The object factors of distinct branches are orthogonal, so the
        x-integrated density is exactly the weighted sum of branch
        densities; no interference terms appear.
        """
        i = self._frame_index(i)
        J = np.zeros(self.grid_X.n_points)
        for a in range(self.n_branches):
            J += abs(self.amplitudes[a]) ** 2 * np.abs(self.branch_amp(a, i)) ** 2
        return J

    def overlap(self, a: int, b: int, i: int) -> float:
        """|<Psi_a|Psi_b>| at frame i on the lab grid."""
        i = self._frame_index(i)
        amp_a = self.branch_amp(a, i)
        amp_b = self.branch_amp(b, i)
        return float(abs(np.sum(np.conj(amp_a) * amp_b) * self.grid_X.dx))

    def population(self, a: int, i: int) -> float:
        """x-marginal population of outcome a at frame i."""
        i = self._frame_index(i)
        norm2 = float(
            np.sum(np.abs(self.chi_frames[i]) ** 2) * self.chi_grid.dx
        )
        return abs(self.amplitudes[a]) ** 2 * norm2

    def population_drift(self) -> float:
        """Largest |population - |c_a|^2| over all branches and frames."""
        norm2 = np.sum(np.abs(self.chi_frames) ** 2, axis=1) * self.chi_grid.dx
        drift = float(np.max(np.abs(norm2 - 1.0)))
        probs = [abs(c) ** 2 for c in self.amplitudes]
        return drift * max(probs)


def _sorted_branches(det: DetectorModel):
    order = sorted(range(det.n_branches), key=lambda a: det.lambdas[a])
    lam = tuple(det.lambdas[a] for a in order)
    amp = tuple(det.amplitudes[a] for a in order)
    om = tuple(det.omegas[a] for a in order)
    return order, lam, amp, om


def branch_evolve(
    det: DetectorModel,
    T: float,
    dt: float,
    grid: SpaceGrid | None = None,
) -> BranchSet:
    """Evolve every branch from t=0 to T with frame spacing dt.

    The envelope is propagated by the reference solver on an internal
    comoving grid; classical centers, velocities and actions follow
    their closed forms.  ``grid`` fixes the lab readout grid; when
    omitted a grid wide enough for every branch (with a 5-width margin)
    is built automatically.  The packet mean of each branch is checked
    against its classical trajectory to 1e-6.
    """
    if T <= 0:
        raise ValueError("branch_evolve needs T > 0")
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(abs(T), dt):
        raise ValueError(f"T={T!r} is not an integer multiple of dt={dt!r}")
    if n_steps < 1:
        raise ValueError("need at least one frame step")
    times = TimeGrid(t_start=0.0, dt=dt, n_steps=n_steps)
    t_nodes = times.t

    order, lam, amp, om = _sorted_branches(det)
    M = det.effective_mass
    hbar = det.hbar
    sigma0 = det.sigma0

    centers = np.empty((n_steps + 1, det.n_branches))
    velocities = np.empty_like(centers)
    actions = np.empty_like(centers)
    for k, a in enumerate(order):
        centers[:, k] = det.branch_center(a, t_nodes)
        velocities[:, k] = det.branch_velocity(a, t_nodes)
        actions[:, k] = det.branch_action(a, t_nodes)

    sigma_T = 0.5 * float(det.pointer_width(times.t_end))
    d_T = 2.0 * sigma_T

    if grid is None:
        pad = 5.0 * d_T
        lo = float(centers.min()) - pad
        hi = float(centers.max()) + pad
        n_pts = max(128, int(np.ceil((hi - lo) * 6.0 / sigma0)) + 1)
        grid = SpaceGrid(lo, hi, n_pts)
    else:
        if sigma0 < 3.0 * grid.dx:
            raise UnresolvedPacketError(
                f"packet width {sigma0:g} below 3 grid spacings {grid.dx:g}"
            )
        k_need = M * float(np.max(np.abs(velocities))) / hbar
        if k_need >= 0.85 * np.pi / grid.dx:
            raise UnresolvedPacketError(
                "branch phase gradient exceeds the resolvable band of the "
                "lab grid; refine the grid or lower the coupling"
            )
        margins = 5.0 * 0.5 * det.pointer_width(t_nodes)
        lo_needed = centers.min(axis=1) - margins
        hi_needed = centers.max(axis=1) + margins
        if float(lo_needed.min()) < grid.x_min or float(hi_needed.max()) > grid.x_max:
            raise BranchLeftGridError(
                "a branch trajectory leaves the lab grid before T; enlarge "
                "the grid or shorten the run"
            )

    # Comoving envelope grid: wide enough for the final spread packet.
    span = CHI_SPAN_SIGMAS * max(sigma_T, sigma0)
    n_chi = max(64, int(np.ceil(2.0 * span * CHI_POINTS_PER_SIGMA / sigma0)) + 1)
    chi_grid = SpaceGrid(-span, span, n_chi)
    chi0 = gaussian_packet(chi_grid, 0.0, 0.0, sigma0, mass=M, hbar=hbar)

    advance = make_stepper(chi_grid, Potential.free(), M, hbar, dt)
    chi_frames = np.empty((n_steps + 1, chi_grid.n_points), dtype=complex)
    chi_frames[0] = chi0.amp
    for i in range(n_steps):
        chi_frames[i + 1] = advance(chi_frames[i])
    chi_frames.setflags(write=False)

    dens = np.abs(chi_frames) ** 2
    total = dens.sum(axis=1)
    mean_offsets = (dens @ chi_grid.x) / total
    if float(np.max(np.abs(mean_offsets))) > 1e-6:
        raise RuntimeError(
            "envelope mean drifted beyond 1e-6 from the classical center; "
            "the branch evolution is under-resolved"
        )

    return BranchSet(
        detector=det,
        grid_X=grid,
        times=times,
        lambdas=lam,
        amplitudes=amp,
        omegas=om,
        chi_grid=chi_grid,
        chi_frames=chi_frames,
        centers=centers,
        velocities=velocities,
        actions=actions,
        mean_offsets=mean_offsets,
    )


def peak_weights(
    J: np.ndarray,
    branches: BranchSet,
    d_N: float,
    frame: int = -1,
) -> np.ndarray:
    """Integrate the signal J over a +-2.5*d_N window around each peak.

    Requires every pair of branch centers at the evaluation frame to be
    separated by more than 5*d_N; inside the branching region the
    window decomposition is meaningless and the call is refused.
    """
    i = branches._frame_index(frame)
    J = np.asarray(J, dtype=float)
    if J.shape != (branches.grid_X.n_points,):
        raise ValueError("signal array does not match the lab grid")
    centers = branches.centers[i]
    for a, b in itertools.combinations(range(branches.n_branches), 2):
        if abs(centers[a] - centers[b]) <= 5.0 * d_N:
            raise BranchesNotSeparatedError(
                f"branches {a} and {b} are {abs(centers[a] - centers[b]):.4g} "
                f"apart, below the 5*d_N = {5.0 * d_N:.4g} separation "
                "threshold; still inside the branching region"
            )
    x = branches.grid_X.x
    dx = branches.grid_X.dx
    weights = np.empty(branches.n_branches)
    for a in range(branches.n_branches):
        window = np.abs(x - centers[a]) <= 2.5 * d_N
        weights[a] = float(np.sum(J[window]) * dx)
    total = float(weights.sum())
    if not (1.0 - 1e-3 <= total <= 1.0 + 1e-9):
        raise RuntimeError(
            f"peak windows capture {total:.6f} of the signal instead of 1; "
            "the signal is not a cleanly branched unit-norm density"
        )
    return weights


def separation_time(det: DetectorModel, threshold_multiple: float = 5.0) -> dict:
    """Earliest time (from switch-on) each branch pair separates.

    Separation means the center gap (g|lambda_a - lambda_b|/(2 mu)) tau^2
    exceeding threshold_multiple times the spread packet width
    d_N(t_switch + tau).  Returns {(a, b): tau} for every pair, indices
    in eigenvalue-sorted order.
    """
    if threshold_multiple < 0:
        raise ValueError("threshold_multiple must be nonnegative")
    _, lam, _, _ = _sorted_branches(det)
    pairs = list(itertools.combinations(range(len(lam)), 2))
    if threshold_multiple == 0.0:
        return {pair: 0.0 for pair in pairs}

    out = {}
    for a, b in pairs:
        rate = det.coupling * abs(lam[a] - lam[b]) / (2.0 * det.mu)
        if rate <= 0.0:
            raise NeverSeparatesError(
                f"branches {a} and {b} never separate: zero coupling rate"
            )

        def gap_excess(tau):
            return rate * tau**2 - threshold_multiple * float(
                det.pointer_width(det.t_switch + tau)
            )

        tau_hi = np.sqrt(threshold_multiple * det.d_init / rate)
        for _ in range(200):
            if gap_excess(tau_hi) > 0.0:
                break
            tau_hi *= 2.0
        else:
            raise NeverSeparatesError(
                f"branches {a} and {b} never separate within the search "
                "budget; the coupling is too small"
            )
        out[(a, b)] = float(brentq(gap_excess, 0.0, tau_hi, xtol=1e-12, rtol=1e-14))
    return out
