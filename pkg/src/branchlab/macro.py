"""Collective-coordinate dynamics: stationary paths, fluctuation scaling,
signal functions and the classical-limit bookkeeping.

A collective coordinate X averaging N microscopic coordinates carries the
effective mass N*mu and the Lagrangian L = N mu Xdot^2 / 2 - N V(X).  The
N-body problem is never simulated; the center-of-mass reduction is exact
for potentials that depend on X alone, which is the regime treated here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigvalsh_tridiagonal, solve_banded

from .errors import (
    CausticDetectedError,
    DimensionTooLargeError,
    NewtonNoConvergenceError,
    UnsupportedCaseError,
)
from .grids import (
    Potential,
    SpaceGrid,
    TimeGrid,
    WaveFunction,
    diagnostics,
    gaussian_packet,
)
from .reference import ReferenceConfig, make_stepper, propagate_reference

SIGMA_MODES = ("fixed", "scaled")


@dataclass(frozen=True)
class MacroSystem:
    """N averaged microdegrees with single-particle mass mu.

    ``sigma_mode`` selects how the initial packet width is read:
    "fixed" takes sigma0 literally, "scaled" takes sigma0/sqrt(N) (the
    width of the mean of N i.i.d. coordinates of spread sigma0).  Both
    conventions appear in the scaling claims, so both are explicit.
    """

    n_micro: int
    mu: float
    potential_X: Potential
    sigma0: float
    sigma_mode: str = "fixed"
    hbar: float = 1.0

    def __post_init__(self):
        if self.n_micro < 1:
            raise ValueError("MacroSystem needs n_micro >= 1")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}")

    @property
    def effective_mass(self) -> float:
        return self.n_micro * self.mu

    @property
    def packet_width(self) -> float:
        if self.sigma_mode == "scaled":
            return self.sigma0 / np.sqrt(self.n_micro)
        return self.sigma0


@dataclass(frozen=True, eq=False)
class StationaryPath:
    """Discrete stationary-action path with its defect diagnostics."""

    times: TimeGrid
    X_values: np.ndarray
    action_value: float
    residual: float
    defects: np.ndarray

    def X_at(self, t):
        spline = CubicSpline(self.times.t, self.X_values)
        return spline(t)

    def V_at(self, t):
        spline = CubicSpline(self.times.t, self.X_values)
        return spline(t, 1)


def discrete_action(system: MacroSystem, times: TimeGrid, X: np.ndarray) -> float:
    """Trapezoid-potential discretization of N ∫ (mu Xdot^2/2 - V) dt."""
    dt = times.dt
    M = system.effective_mass
    v = np.diff(X) / dt
    pot = system.potential_X.value(X)
    kinetic = 0.5 * M * np.sum(v**2) * dt
    potential = system.n_micro * 0.5 * np.sum(pot[:-1] + pot[1:]) * dt
    return float(kinetic - potential)


def _el_defects(system: MacroSystem, dt: float, X: np.ndarray) -> np.ndarray:
    """Interior Euler-Lagrange defects of the discrete action.

    The curvature 2X_k - X_{k-1} - X_{k+1} is formed as a difference of
    consecutive steps; for smooth paths those subtractions are exact in
    floating point, so the defect stays resolvable near the storage
    granularity of X instead of the much larger eps * |X| cancellation
    floor of the three-term form.
    """
    M = system.effective_mass
    dV = system.potential_X.deriv(X[1:-1])
    steps = np.diff(X)
    curvature = steps[:-1] - steps[1:]
    return M * curvature / dt - system.n_micro * dt * dV


def stationary_path(
    system: MacroSystem,
    X0: float,
    V0: float,
    T: float,
    dt: float,
    max_iter: int = 100,
) -> StationaryPath:
    """Solve the discrete Euler-Lagrange equations for given X0, V0.

    The second-order launch condition
    X_1 = X_0 + V0 dt - (dt^2/2) V'(X_0)/mu fixes the first node
    directly, so the unknowns are X_2..X_n and the equations are the
    interior stationarity conditions at nodes 1..n-1.  Equation k
    involves X_{k-1}, X_k, X_{k+1}, which makes the Jacobian lower
    banded with bandwidth two.  Newton iteration starts from the
    straight line X0 + V0 t; for quadratic potentials it lands in one
    step.  After convergence the fixed-endpoint second variation is
    scanned for a vanishing eigenvalue, which signals a focal point
    where the stationary-phase picture degenerates.
    """
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(abs(T), dt):
        raise ValueError(f"T={T!r} is not an integer multiple of dt={dt!r}")
    if n < 2:
        raise ValueError("need at least two time steps")
    times = TimeGrid(t_start=0.0, dt=dt, n_steps=n)
    M = system.effective_mass
    N = system.n_micro
    mu = system.mu
    pot = system.potential_X

    X = X0 + V0 * times.t
    X[1] = X0 + V0 * dt - 0.5 * dt**2 * float(pot.deriv(np.array(X0))) / mu

    # Attainable floor: defects of any stored path are granular at the
    # ulp of X amplified by M/dt, so iterate until we land there or the
    # residual stops improving.
    eps = float(np.finfo(float).eps)
    floor = 8.0 * eps * (M / dt) * max(1.0, float(np.max(np.abs(X))))
    X_best = X.copy()
    res_best = np.inf
    prev_res = np.inf
    nn = n - 1
    for _ in range(max_iter):
        f = _el_defects(system, dt, X)
        res = float(np.max(np.abs(f)))
        if res < res_best:
            res_best = res
            X_best = X.copy()
        if res <= floor or res >= prev_res:
            break
        prev_res = res
        # Lower-banded Jacobian d f_k / d X_j in solve_banded layout,
        # rows k = 1..n-1, columns j = 2..n.
        d2V = pot.second_deriv(X[1:-1])
        ab = np.zeros((3, nn))
        ab[0, :] = -M / dt
        ab[1, : nn - 1] = 2.0 * M / dt - N * dt * d2V[1:]
        ab[2, : nn - 2] = -M / dt
        delta = solve_banded((2, 0), ab, f)
        X[2:] -= delta
    else:
        raise NewtonNoConvergenceError(
            f"no convergence after {max_iter} iterations "
            f"(last residual {res_best:.3e})",
            last_residual=res_best,
        )
    X = X_best

    defects = np.abs(_el_defects(system, dt, X))
    residual = float(defects.max()) if defects.size else 0.0
    action = discrete_action(system, times, X)
    if residual > 1e-10 * max(1.0, abs(action)):
        raise NewtonNoConvergenceError(
            f"converged residual {residual:.3e} violates the path contract",
            last_residual=residual,
        )

    _check_caustic(system, dt, X)

    full_defects = np.zeros(n + 1)
    full_defects[1:-1] = defects
    return StationaryPath(
        times=times,
        X_values=X,
        action_value=action,
        residual=residual,
        defects=full_defects,
    )


def _check_caustic(system: MacroSystem, dt: float, X: np.ndarray):
    """Raise if the fixed-endpoint second variation has a zero eigenvalue.

    The comparison scale is the smallest eigenvalue of the free (V=0)
    second variation, which is the natural size of a healthy spectrum;
    anything three orders of magnitude below it counts as singular.
    """
    n_int = X.size - 2
    if n_int < 1:
        return
    M = system.effective_mass
    diag = 2.0 * M / dt - system.n_micro * dt * system.potential_X.second_deriv(X[1:-1])
    off = np.full(n_int - 1, -M / dt)
    T_total = dt * (X.size - 1)
    free_min = 2.0 * M / dt * (1.0 - np.cos(np.pi * dt / T_total))
    thr = 1e-3 * free_min
    eigs = eigvalsh_tridiagonal(diag, off, select="v", select_range=(-thr, thr))
    if eigs.size:
        raise CausticDetectedError(
            "second variation of the action is singular along the path "
            "(focal point); the stationary-phase picture degenerates here"
        )


@dataclass(frozen=True)
class FluctuationWidth:
    """Measured and closed-form packet width, with their relative gap."""

    measured: float
    closed_form: float

    @property
    def rel_diff(self) -> float:
        return abs(self.measured - self.closed_form) / self.closed_form


def _width_grid(width: float, center: float, span_sigmas: float = 11.0) -> SpaceGrid:
    half = span_sigmas * width + abs(center)
    return SpaceGrid(center - half, center + half, 512)


def fluctuation_width(system: MacroSystem, t: float) -> FluctuationWidth:
    """Width of a Gaussian packet of the collective coordinate at time t.

    The closed form is the free spreading law
    sigma(t) = sigma0 sqrt(1 + (hbar t / (2 N mu sigma0^2))^2); the
    measured value comes from an actual reference-solver evolution.  Both
    are returned and must agree to 1e-4 relative.  Only potentials with
    zero curvature qualify (a constant force shifts the packet without
    touching its width); anything else has no closed form to compare to
    and is refused.
    """
    curv = system.potential_X.curvature
    if curv is None or curv != 0.0:
        raise UnsupportedCaseError(
            "fluctuation_width requires a zero-curvature potential"
        )
    M = system.effective_mass
    w0 = system.packet_width
    closed = w0 * np.sqrt(1.0 + (system.hbar * t / (2.0 * M * w0**2)) ** 2)
    if t == 0.0:
        return FluctuationWidth(measured=w0, closed_form=w0)

    # Force of the collective potential: X dynamics feel -V'(X)/mu.
    accel = -float(system.potential_X.deriv(np.array(0.0))) / system.mu
    drift = 0.5 * abs(accel) * t**2
    grid = _width_grid(max(w0, closed) + 0.5 * drift, 0.5 * accel * t**2)
    psi0 = gaussian_packet(grid, 0.0, 0.0, w0, mass=M, hbar=system.hbar)

    # The spreading clock is 2 M w0^2 / hbar; resolve it comfortably.
    spread_time = 2.0 * M * w0**2 / system.hbar
    dt = min(t / 64.0, spread_time / 50.0)
    n = int(np.ceil(t / dt))
    dt = t / n
    pot_macro = _macro_potential(system)
    psi = propagate_reference(psi0, pot_macro, t, ReferenceConfig(dt=dt))
    measured = float(np.sqrt(diagnostics(psi)["var_x"]))

    result = FluctuationWidth(measured=measured, closed_form=float(closed))
    if result.rel_diff > 1e-4:
        raise RuntimeError(
            f"measured width {measured:.8g} and closed form {closed:.8g} "
            "disagree beyond 1e-4 relative; the evolution is under-resolved"
        )
    return result


def _macro_potential(system: MacroSystem) -> Potential:
    """Potential energy of the collective coordinate, N * V(X)."""
    p = system.potential_X
    if p.kind == "free":
        return p
    if p.kind == "linear":
        return Potential.linear(system.n_micro * p.force)
    if p.kind == "harmonic":
        # N * (mu omega^2 / 2) (X-c)^2 written with the effective mass.
        return Potential.harmonic(p.omega, mass=system.n_micro * p.mass, center=p.center)
    raise UnsupportedCaseError("tabulated potentials have no closed-form scaling here")


def spreading_time(system: MacroSystem, growth: float = 1.1) -> float:
    """Time for the measured packet width to reach growth * sigma0.

    A single reference evolution records the width along the way; the
    crossing is found by interpolation.  A constant force displaces the
    packet without touching its width, so the evolution always runs in
    the force-free gauge.
    """
    if system.potential_X.curvature != 0.0:
        raise UnsupportedCaseError("spreading_time requires zero curvature")
    M = system.effective_mass
    w0 = system.packet_width
    predicted = 2.0 * M * w0**2 / system.hbar * np.sqrt(growth**2 - 1.0)
    t_max = 1.5 * predicted
    n_steps = 600
    dt = t_max / n_steps
    grid = _width_grid(w0 * (growth + 0.5), 0.0)
    psi0 = gaussian_packet(grid, 0.0, 0.0, w0, mass=M, hbar=system.hbar)
    target = growth * w0

    advance = make_stepper(grid, Potential.free(), M, system.hbar, dt)
    amp = np.array(psi0.amp, dtype=complex)
    x = grid.x
    dx = grid.dx

    prev_t, prev_w = 0.0, w0
    for step in range(1, n_steps + 1):
        amp = advance(amp)
        w = np.abs(amp) ** 2
        tot = w.sum() * dx
        mean = (w * x).sum() * dx / tot
        width = np.sqrt(((w * (x - mean) ** 2).sum() * dx / tot))
        t_now = step * dt
        if width >= target:
            # Linear interpolation of the crossing.
            frac = (target - prev_w) / (width - prev_w)
            return float(prev_t + frac * (t_now - prev_t))
        prev_t, prev_w = t_now, width
    raise RuntimeError("width never reached the growth target; extend t_max")


@dataclass(frozen=True, eq=False)
class JointWaveFunction:
    """Wave function on a product grid (object coordinate x, pointer X)."""

    grid_x: SpaceGrid
    grid_X: SpaceGrid
    amp: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amp, dtype=complex)
        if amp.shape != (self.grid_x.n_points, self.grid_X.n_points):
            raise ValueError("joint amplitude does not match the grids")
        amp.setflags(write=False)
        object.__setattr__(self, "amp", amp)

    def norm(self) -> float:
        return float(
            np.sqrt(np.sum(np.abs(self.amp) ** 2) * self.grid_x.dx * self.grid_X.dx)
        )


def signal_function(joint: JointWaveFunction) -> np.ndarray:
    """Observable pointer density J(X) = ∫ |Psi(x, X)|^2 dx.

    The input must be normalized on the product grid; J then integrates
    to 1 by construction.
    """
    n = joint.norm()
    if abs(n - 1.0) > 1e-8:
        raise ValueError(f"joint wave function is not normalized (norm {n:.6g})")
    return np.sum(np.abs(joint.amp) ** 2, axis=0) * joint.grid_x.dx


def generalized_signal(
    amp: np.ndarray,
    y_grids: list[SpaceGrid],
    f,
    bin_width: float,
    x_grid: SpaceGrid | None = None,
):
    """Signal J(X) for an averaged function X(y) = sum f(y_i) / n.

    ``amp`` holds the wave function on the product grid of (optionally) a
    leading object axis plus up to three microdegree axes; the |Psi|^2
    mass is binned by X(y).  Returns (bin centers, J), with J summing to
    the squared norm of the input over bins of width bin_width.
    """
    n = len(y_grids)
    if n > 3:
        raise DimensionTooLargeError("brute-force grids are capped at 3 coordinates")
    if n < 1:
        raise ValueError("need at least one microdegree grid")
    amp = np.asarray(amp, dtype=complex)
    expected = tuple(g.n_points for g in y_grids)
    measure = float(np.prod([g.dx for g in y_grids]))
    if x_grid is not None:
        if amp.shape != (x_grid.n_points,) + expected:
            raise ValueError("amplitude does not match (x, y...) grids")
        weights = np.sum(np.abs(amp) ** 2, axis=0) * x_grid.dx * measure
    else:
        if amp.shape != expected:
            raise ValueError("amplitude does not match the y grids")
        weights = np.abs(amp) ** 2 * measure

    axes = [f(g.x) for g in y_grids]
    X_of_y = np.zeros(expected)
    for i, vals in enumerate(axes):
        shape = [1] * n
        shape[i] = -1
        X_of_y = X_of_y + vals.reshape(shape)
    X_of_y = X_of_y / n

    lo = X_of_y.min() - 0.5 * bin_width
    hi = X_of_y.max() + 0.5 * bin_width
    n_bins = int(np.ceil((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)
    hist, _ = np.histogram(X_of_y.ravel(), bins=edges, weights=weights.ravel())
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, hist / bin_width


def _classical_trajectory(system: MacroSystem, X0: float, V0: float, t: float):
    """Exact classical (X, V) at time t for the supported potential kinds."""
    p = system.potential_X
    if p.kind == "free":
        return X0 + V0 * t, V0
    if p.kind == "linear":
        a = p.force / system.mu
        return X0 + V0 * t + 0.5 * a * t**2, V0 + a * t
    if p.kind == "harmonic":
        # Collective equation of motion: Xdd = -(V'/mu) = -(p.mass/mu) w^2 X.
        w = p.omega * np.sqrt(p.mass / system.mu)
        xc = p.center
        X = xc + (X0 - xc) * np.cos(w * t) + (V0 / w) * np.sin(w * t)
        V = -(X0 - xc) * w * np.sin(w * t) + V0 * np.cos(w * t)
        return X, V
    raise UnsupportedCaseError("classical limit check needs a quadratic potential")


def classical_limit_check(system: MacroSystem, path: StationaryPath, t: float) -> dict:
    """Compare the quantum packet against the classical stationary path.

    The packet is evolved in the frame sliding along the classical
    trajectory: for quadratic potentials the coherent factorization
    Psi(X, t) = exp(i (M Xdot (X - Xc) + S)/hbar) chi(X - Xc, t) is an
    exact identity, so the lab-frame moments assemble from the classical
    pair (Xc, Xdot) plus the numerically evolved envelope chi.  This is
    what keeps the check affordable at N up to 1e4, where the lab-frame
    phase gradient is far beyond any reasonable grid.

    Returns mean_X_error = |<X> - X_path(t)|, the raw kinetic gap
    energy_error = |<P^2/2M> - M Xdot^2/2| and the closed-form zero-point
    energy hbar^2/(8 M sigma0^2) it should equal for a width-stable
    envelope.
    """
    curv = system.potential_X.curvature
    if curv is None:
        raise UnsupportedCaseError("classical limit check needs a quadratic potential")
    M = system.effective_mass
    w0 = system.packet_width
    hbar = system.hbar
    X0 = float(path.X_values[0])
    dt_path = path.times.dt
    # Invert the launch condition of the discrete path to recover V0.
    a0 = -float(system.potential_X.deriv(np.array(X0))) / system.mu
    V0 = (path.X_values[1] - X0) / dt_path - 0.5 * dt_path * a0

    Xc, Vc = _classical_trajectory(system, X0, V0, t)

    # Envelope potential: quadratic remainder about the trajectory.
    if curv == 0.0:
        env_pot = Potential.free()
        spread = np.sqrt(1.0 + (hbar * t / (2.0 * M * w0**2)) ** 2)
        w_max = w0 * spread
    else:
        w_env = np.sqrt(curv / system.mu)
        env_pot = Potential.harmonic(w_env, mass=M)
        w_breathe = hbar / (2.0 * M * w_env * w0)
        w_max = max(w0, w_breathe)
    grid = SpaceGrid(-12.0 * w_max, 12.0 * w_max, 1024)
    chi0 = gaussian_packet(grid, 0.0, 0.0, w0, mass=M, hbar=hbar)
    if t > 0.0:
        n_steps = max(200, int(np.ceil(t / dt_path)))
        chi = propagate_reference(chi0, env_pot, t, ReferenceConfig(dt=t / n_steps))
    else:
        chi = chi0
    # Without a potential argument, mean_energy is the kinetic part alone.
    d = diagnostics(chi)

    mean_X = Xc + d["mean_x"]
    mean_X_error = abs(mean_X - float(path.X_at(t)))

    # <P^2>/2M in the lab frame assembles exactly from the sliding frame:
    # <p>_chi = 0 for these envelopes, so the cross term drops.
    kinetic = 0.5 * M * Vc**2 + d["mean_energy"]
    v_path = float(path.V_at(t))
    energy_error = abs(kinetic - 0.5 * M * v_path**2)
    # sigma0 is the position standard deviation, so <p^2> = hbar^2/(4 w0^2).
    zero_point = hbar**2 / (8.0 * M * w0**2)
    return {
        "mean_X_error": float(mean_X_error),
        "energy_error": float(energy_error),
        "zero_point": float(zero_point),
    }
