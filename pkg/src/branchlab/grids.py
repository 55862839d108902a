"""Spatial and temporal grids, wave functions, and basic observables.

All other modules build on the types defined here.  The conventions are
natural units (hbar defaults to 1), uniform grids, and hard-wall boxes:
amplitudes are expected to stay negligible near the grid edges, and the
propagators enforce that at run time.

Values are immutable after construction.  Operations return new objects,
which makes everything safe to share read-only across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    BoundaryContaminationError,
    PacketOutsideGridError,
    PacketTooNarrowError,
)


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform spatial grid with points x_min + k*dx, k = 0..n_points-1."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 16:
            raise ValueError("SpaceGrid needs at least 16 points")
        if not self.x_max > self.x_min:
            raise ValueError("SpaceGrid needs x_max > x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid.

    ``fine_ratio`` records how many unresolved fine steps one coarse step
    stands for.  It is carried as metadata only; nothing in the package
    simulates the fine scale.
    """

    t_start: float
    dt: float
    n_steps: int
    fine_ratio: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("TimeGrid needs dt > 0")
        if self.n_steps < 1:
            raise ValueError("TimeGrid needs n_steps >= 1")
        if self.fine_ratio < 1:
            raise ValueError("TimeGrid needs fine_ratio >= 1")

    @property
    def t(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * self.n_steps


@dataclass(frozen=True, eq=False)
class Potential:
    """Scalar potential V(x) with analytic derivatives where available.

    Supported kinds:

    - ``free``:      V = 0
    - ``harmonic``:  V = 0.5 * mass * omega**2 * (x - center)**2
    - ``linear``:    V = -force * x  (constant force ``force``)
    - ``custom``:    cubic-spline interpolation of tabulated values

    ``curvature`` is the constant second derivative for the polynomial
    kinds and None for tabulated potentials.
    """

    kind: str
    omega: float = 0.0
    mass: float = 1.0
    center: float = 0.0
    force: float = 0.0
    table_x: np.ndarray | None = None
    table_v: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "linear", "custom"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "custom":
            if self.table_x is None or self.table_v is None:
                raise ValueError("custom potential needs table_x and table_v")
            tx = np.asarray(self.table_x, dtype=float)
            tv = np.asarray(self.table_v, dtype=float)
            if tx.shape != tv.shape or tx.ndim != 1:
                raise ValueError("potential table shape mismatch")
            if not np.all(np.isfinite(tv)):
                raise ValueError("potential table contains non-finite values")
            object.__setattr__(self, "table_x", tx)
            object.__setattr__(self, "table_v", tv)
            object.__setattr__(self, "_spline", CubicSpline(tx, tv))

    @classmethod
    def free(cls) -> "Potential":
        return cls(kind="free")

    @classmethod
    def harmonic(cls, omega: float, mass: float = 1.0, center: float = 0.0) -> "Potential":
        return cls(kind="harmonic", omega=omega, mass=mass, center=center)

    @classmethod
    def linear(cls, force: float) -> "Potential":
        return cls(kind="linear", force=force)

    @classmethod
    def from_table(cls, grid: SpaceGrid, values: np.ndarray) -> "Potential":
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_points,):
            raise ValueError("tabulated potential must match the grid length")
        return cls(kind="custom", table_x=grid.x, table_v=values)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return 0.5 * self.mass * self.omega**2 * (x - self.center) ** 2
        if self.kind == "linear":
            return -self.force * x
        return self._spline(x)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "free":
            return np.zeros_like(x)
        if self.kind == "harmonic":
            return self.mass * self.omega**2 * (x - self.center)
        if self.kind == "linear":
            return np.full_like(x, -self.force)
        return self._spline(x, 1)

    def second_deriv(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "harmonic":
            return np.full_like(x, self.mass * self.omega**2)
        if self.kind in ("free", "linear"):
            return np.zeros_like(x)
        return self._spline(x, 2)

    @property
    def curvature(self) -> float | None:
        """Constant V'' for polynomial kinds, None for tabulated ones."""
        if self.kind == "harmonic":
            return self.mass * self.omega**2
        if self.kind in ("free", "linear"):
            return 0.0
        return None


@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex amplitudes on a SpaceGrid, units length**(-1/2).

    The amplitude array is copied and frozen at construction; non-finite
    entries are rejected outright.
    """

    grid: SpaceGrid
    amp: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        amp = np.array(self.amp, dtype=complex)
        if amp.shape != (self.grid.n_points,):
            raise ValueError("amplitude array does not match the grid")
        if not np.all(np.isfinite(amp.real)) or not np.all(np.isfinite(amp.imag)):
            raise ValueError("wave function contains non-finite amplitudes")
        amp.setflags(write=False)
        object.__setattr__(self, "amp", amp)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amp) ** 2) * self.grid.dx))

    def density(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def with_amp(self, amp: np.ndarray) -> "WaveFunction":
        return WaveFunction(self.grid, amp, mass=self.mass, hbar=self.hbar)


def normalize(psi: WaveFunction) -> WaveFunction:
    """Rescale so that sum |amp|^2 dx = 1.  Idempotent.

    A state whose norm already sits within a few ulps of one is returned
    unchanged, so repeated calls are bitwise stable.
    """
    n = psi.norm()
    if n == 0.0:
        raise ValueError("cannot normalize a zero wave function")
    if abs(n - 1.0) < 1e-14:
        return psi
    return psi.with_amp(psi.amp / n)


def gaussian_packet(
    grid: SpaceGrid,
    x0: float,
    p0: float,
    sigma: float,
    mass: float = 1.0,
    hbar: float = 1.0,
) -> WaveFunction:
    """Normalized Gaussian packet centered at x0 with phase exp(i p0 x / hbar).

    <x> = x0, Var(x) = sigma**2 and <p> = p0 up to quadrature error.  The
    packet must be resolvable (sigma >= 3 dx) and must fit inside the box
    with five standard deviations to spare on each side.
    """
    if sigma < 3.0 * grid.dx:
        raise PacketTooNarrowError(
            f"sigma={sigma:g} is below 3*dx={3 * grid.dx:g}"
        )
    if x0 - 5.0 * sigma < grid.x_min or x0 + 5.0 * sigma > grid.x_max:
        raise PacketOutsideGridError(
            f"packet at x0={x0:g} with sigma={sigma:g} does not fit "
            f"inside [{grid.x_min:g}, {grid.x_max:g}] with a 5 sigma margin"
        )
    x = grid.x
    amp = (2.0 * np.pi * sigma**2) ** (-0.25) * np.exp(
        -((x - x0) ** 2) / (4.0 * sigma**2) + 1j * p0 * x / hbar
    )
    return normalize(WaveFunction(grid, amp, mass=mass, hbar=hbar))


def _derivative_8th(amp: np.ndarray, dx: float) -> np.ndarray:
    """Eighth-order centered first derivative with hard-wall (zero) padding."""
    p = np.zeros(amp.size + 8, dtype=complex)
    p[4:-4] = amp
    out = (
        (4.0 / 5.0) * (p[5:-3] - p[3:-5])
        - (1.0 / 5.0) * (p[6:-2] - p[2:-6])
        + (4.0 / 105.0) * (p[7:-1] - p[1:-7])
        - (1.0 / 280.0) * (p[8:] - p[:-8])
    )
    return out / dx


def _second_derivative_8th(amp: np.ndarray, dx: float) -> np.ndarray:
    """Eighth-order centered second derivative with hard-wall (zero) padding."""
    p = np.zeros(amp.size + 8, dtype=complex)
    p[4:-4] = amp
    out = (
        (-205.0 / 72.0) * p[4:-4]
        + (8.0 / 5.0) * (p[5:-3] + p[3:-5])
        - (1.0 / 5.0) * (p[6:-2] + p[2:-6])
        + (8.0 / 315.0) * (p[7:-1] + p[1:-7])
        - (1.0 / 560.0) * (p[8:] + p[:-8])
    )
    return out / dx**2


def diagnostics(psi: WaveFunction, potential: Potential | None = None) -> dict:
    """Basic observables of a wave function.

    Returns a dict with keys norm, mean_x, var_x, mean_p, mean_energy and
    finite.  The norm is reported as-is; moments are taken over the
    normalized density.  Momentum and energy use centered finite
    differences of the amplitudes.  Nothing is raised for bad input, the
    ``finite`` flag just turns False.
    """
    amp = psi.amp
    finite = bool(np.all(np.isfinite(amp.real)) and np.all(np.isfinite(amp.imag)))
    if not finite:
        nan = float("nan")
        return {
            "norm": nan, "mean_x": nan, "var_x": nan,
            "mean_p": nan, "mean_energy": nan, "finite": False,
        }
    dx = psi.grid.dx
    x = psi.grid.x
    w = np.abs(amp) ** 2
    total = np.sum(w) * dx
    norm = float(np.sqrt(total))
    mean_x = float(np.sum(w * x) * dx / total)
    var_x = float(np.sum(w * (x - mean_x) ** 2) * dx / total)

    damp = _derivative_8th(amp, dx)
    d2amp = _second_derivative_8th(amp, dx)
    mean_p = float(
        np.real(np.sum(np.conj(amp) * (-1j * psi.hbar) * damp)) * dx / total
    )
    kinetic = float(
        np.real(np.sum(np.conj(amp) * (-(psi.hbar**2) / (2.0 * psi.mass)) * d2amp))
        * dx / total
    )
    if potential is None:
        pot = 0.0
    else:
        pot = float(np.sum(w * potential.value(x)) * dx / total)
    return {
        "norm": norm,
        "mean_x": mean_x,
        "var_x": var_x,
        "mean_p": mean_p,
        "mean_energy": kinetic + pot,
        "finite": True,
    }


def check_boundary(psi: WaveFunction, tol: float = 1e-8, edge_fraction: float = 0.05):
    """Hard-wall sanity check: |amp| must stay below tol in the outer edges.

    Every experiment is expected to keep its states away from the box
    walls; propagators call this periodically and raise if it fails.
    """
    n_edge = max(1, int(np.ceil(edge_fraction * psi.grid.n_points)))
    edge_max = float(
        max(np.max(np.abs(psi.amp[:n_edge])), np.max(np.abs(psi.amp[-n_edge:])))
    )
    if edge_max >= tol:
        raise BoundaryContaminationError(
            f"|amp|={edge_max:.3e} in the outer {edge_fraction:.0%} of the grid "
            f"(tolerance {tol:g}); enlarge the box or shorten the run"
        )


def wavefunction_to_csv(psi: WaveFunction, path):
    """Write columns x, re_amp, im_amp; the header records dx, mass, hbar.

    Floats are formatted with 17 significant digits so that a round trip
    through the file is exact.
    """
    data = np.column_stack([psi.grid.x, psi.amp.real, psi.amp.imag])
    header = (
        f"# dx={psi.grid.dx:.17g} mass={psi.mass:.17g} hbar={psi.hbar:.17g}\n"
        "x,re_amp,im_amp"
    )
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=header, comments="")


def wavefunction_from_csv(path) -> WaveFunction:
    """Read a wave function written by :func:`wavefunction_to_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError("missing wave function header line")
    meta = {}
    for tok in first[1:].split():
        key, _, val = tok.partition("=")
        meta[key] = float(val)
    data = np.loadtxt(path, delimiter=",", skiprows=2)
    x = data[:, 0]
    grid = SpaceGrid(float(x[0]), float(x[-1]), x.size)
    if abs(grid.dx - meta["dx"]) > 1e-12 * max(1.0, abs(meta["dx"])):
        raise ValueError("grid spacing in file header disagrees with the rows")
    amp = data[:, 1] + 1j * data[:, 2]
    return WaveFunction(grid, amp, mass=meta["mass"], hbar=meta["hbar"])
