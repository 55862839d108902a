"""Grid, wave-function storage and observable tests."""

import numpy as np
import pytest

from branchlab import (
    BoundaryContaminationError,
    PacketOutsideGridError,
    PacketTooNarrowError,
    Potential,
    SpaceGrid,
    TimeGrid,
    WaveFunction,
    check_boundary,
    diagnostics,
    gaussian_packet,
    normalize,
    wavefunction_from_csv,
    wavefunction_to_csv,
)


def test_grid_points_exact():
    grid = SpaceGrid(-20.0, 20.0, 1024)
    assert grid.dx == pytest.approx(40.0 / 1023, rel=1e-15)
    k = np.arange(1024)
    assert np.allclose(grid.x, -20.0 + k * grid.dx, rtol=0, atol=1e-13)
    assert grid.x[0] == -20.0
    assert grid.x[-1] == pytest.approx(20.0, abs=1e-12)


def test_grid_too_few_points_rejected():
    with pytest.raises(ValueError):
        SpaceGrid(-1.0, 1.0, 8)
    with pytest.raises(ValueError):
        SpaceGrid(1.0, -1.0, 64)


def test_time_grid_basics():
    tg = TimeGrid(t_start=0.0, dt=0.25, n_steps=8, fine_ratio=100)
    assert tg.t_end == pytest.approx(2.0)
    assert len(tg.t) == 9
    assert tg.t[3] == pytest.approx(0.75)
    with pytest.raises(ValueError):
        TimeGrid(0.0, -0.1, 4)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 0.1, 0)


def test_gaussian_packet_norm_and_center():
    # norm = 1 +- 1e-12 and <x> = 0 +- 1e-10 for the centered packet
    grid = SpaceGrid(-20.0, 20.0, 1024)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    d = diagnostics(psi)
    assert abs(d["norm"] - 1.0) <= 1e-12
    assert abs(d["mean_x"]) <= 1e-10


def test_gaussian_packet_momentum_and_variance():
    # x0=2, p0=1.5, sigma=0.8 -> <p> = 1.5 +- 1e-8, Var(x) = 0.64 +- 1e-8
    grid = SpaceGrid(-20.0, 20.0, 1024)
    psi = gaussian_packet(grid, 2.0, 1.5, 0.8)
    d = diagnostics(psi)
    assert abs(d["mean_p"] - 1.5) <= 1e-8
    assert abs(d["var_x"] - 0.64) <= 1e-8


def test_gaussian_kinetic_energy():
    # sigma is the position standard deviation (Var(x) = sigma^2), so the
    # free-packet kinetic energy is hbar^2/(8 m sigma^2) = 0.125 at sigma=1
    grid = SpaceGrid(-20.0, 20.0, 1024)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    d = diagnostics(psi, Potential.free())
    assert abs(d["mean_energy"] - 0.125) <= 1e-4


def test_windowed_plane_wave_momentum():
    # a wide envelope times e^{2ix} is as close to a momentum eigenstate
    # as the box allows; mean_p recovers p0=2 to 1e-3
    grid = SpaceGrid(-20.0, 20.0, 1024)
    psi = gaussian_packet(grid, 0.0, 2.0, 3.0)
    d = diagnostics(psi)
    assert abs(d["mean_p"] - 2.0) <= 1e-3


def test_normalize_idempotent():
    grid = SpaceGrid(-10.0, 10.0, 256)
    raw = np.exp(-grid.x**2) * (1.0 + 0.5j)
    psi = WaveFunction(grid, raw, mass=1.0)
    once = normalize(psi)
    twice = normalize(once)
    assert abs(diagnostics(once)["norm"] - 1.0) <= 1e-12
    assert np.array_equal(once.amp, twice.amp)


def test_normalize_rejects_zero():
    grid = SpaceGrid(-10.0, 10.0, 256)
    psi = WaveFunction(grid, np.zeros(256, dtype=complex), mass=1.0)
    with pytest.raises(ValueError):
        normalize(psi)


def test_nonfinite_amplitude_rejected():
    grid = SpaceGrid(-10.0, 10.0, 256)
    amp = np.ones(256, dtype=complex)
    amp[3] = np.nan
    with pytest.raises(ValueError):
        WaveFunction(grid, amp, mass=1.0)


def test_gaussian_moments_closed_form():
    # moments match Gaussian closed forms within 1e-6 relative for
    # sigma >= 5 dx
    grid = SpaceGrid(-20.0, 20.0, 1024)
    assert 0.3 >= 5 * grid.dx
    for x0, p0, sigma in [(0.0, 0.0, 0.3), (-1.5, 0.7, 0.5), (3.0, -2.0, 1.7)]:
        d = diagnostics(gaussian_packet(grid, x0, p0, sigma))
        assert d["mean_x"] == pytest.approx(x0, rel=1e-6, abs=1e-6)
        assert d["var_x"] == pytest.approx(sigma**2, rel=1e-6)
        assert d["mean_p"] == pytest.approx(p0, rel=1e-6, abs=1e-6)


def test_grid_refinement_stability():
    # doubling n_points changes all diagnostics by < 1e-6
    coarse = SpaceGrid(-20.0, 20.0, 1024)
    fine = SpaceGrid(-20.0, 20.0, 2048)
    da = diagnostics(gaussian_packet(coarse, 1.0, 0.5, 1.2), Potential.free())
    db = diagnostics(gaussian_packet(fine, 1.0, 0.5, 1.2), Potential.free())
    for key in ("norm", "mean_x", "var_x", "mean_p", "mean_energy"):
        assert abs(da[key] - db[key]) < 1e-6


def test_packet_too_narrow():
    grid = SpaceGrid(-20.0, 20.0, 64)
    with pytest.raises(PacketTooNarrowError):
        gaussian_packet(grid, 0.0, 0.0, grid.dx)


def test_packet_outside_grid():
    grid = SpaceGrid(-20.0, 20.0, 1024)
    with pytest.raises(PacketOutsideGridError):
        gaussian_packet(grid, 19.0, 0.0, 1.0)


def test_boundary_check():
    grid = SpaceGrid(-20.0, 20.0, 1024)
    check_boundary(gaussian_packet(grid, 0.0, 0.0, 1.0))
    with pytest.raises(BoundaryContaminationError):
        check_boundary(gaussian_packet(grid, 0.0, 0.0, 4.0))


def test_diagnostics_flags_nonfinite_quietly():
    # diagnostics never raises; a NaN slipped in post-construction is
    # reported through the finite flag
    grid = SpaceGrid(-10.0, 10.0, 256)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    assert diagnostics(psi)["finite"] is True


def test_csv_roundtrip(tmp_path):
    grid = SpaceGrid(-12.0, 12.0, 512)
    psi = gaussian_packet(grid, 0.5, -1.0, 0.9, mass=2.0, hbar=0.7)
    path = tmp_path / "state.csv"
    wavefunction_to_csv(psi, path)
    back = wavefunction_from_csv(path)
    assert back.grid.n_points == 512
    assert back.mass == pytest.approx(2.0, rel=1e-15)
    assert back.hbar == pytest.approx(0.7, rel=1e-15)
    assert np.max(np.abs(back.amp - psi.amp)) == 0.0
    assert np.max(np.abs(back.grid.x - grid.x)) < 1e-15
