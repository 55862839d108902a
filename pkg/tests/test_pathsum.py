"""Short-time kernel, transfer-step propagation and the sampled path sum."""

import numpy as np
import pytest

from branchlab import (
    AliasingDetectedError,
    DensityTooLowError,
    PathSumConfig,
    Potential,
    ReferenceConfig,
    ShortTimeKernel,
    SpaceGrid,
    WaveFunction,
    analytic_oracle,
    diagnostics,
    gaussian_packet,
    l2_distance,
    monte_carlo_path_sum,
    path_sum_step,
    propagate_pathsum,
    propagate_reference,
)


def test_kernel_magnitude_and_ell():
    kernel = ShortTimeKernel(dt=0.01, mass=1.0, potential=Potential.free())
    assert kernel.ell_d == pytest.approx(np.sqrt(2.0 * np.pi * 0.01), rel=1e-14)
    x = np.array([0.0, 0.3, -1.2])
    q = np.array([0.1, -0.5, 2.0])
    mags = np.abs(kernel.value(x, q))
    assert np.allclose(mags, 1.0 / kernel.ell_d, rtol=1e-13)


def test_step_preserves_interior_constant():
    # Fresnel normalization: a flat region maps to itself within 1e-3
    grid = SpaceGrid(-20.0, 20.0, 1024)
    x = grid.x
    amp = np.where(
        np.abs(x) <= 6.0,
        1.0,
        np.where(np.abs(x) >= 10.0, 0.0, np.cos(np.pi * (np.abs(x) - 6.0) / 8.0) ** 2),
    ).astype(complex)
    psi = WaveFunction(grid, amp, mass=1.0)
    kernel = ShortTimeKernel(dt=0.01, mass=1.0, potential=Potential.free())
    out = path_sum_step(psi, kernel)
    interior = np.abs(x) <= 4.0
    assert np.max(np.abs(out.amp[interior] - 1.0)) < 1e-3


def test_step_free_variance_growth():
    # Var after one free step: sigma^2 (1 + (hbar dt / (2 m sigma^2))^2)
    grid = SpaceGrid(-20.0, 20.0, 1024)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    kernel = ShortTimeKernel(dt=0.01, mass=1.0, potential=Potential.free())
    out = path_sum_step(psi, kernel)
    var = diagnostics(out)["var_x"]
    assert abs(var - 1.000025) <= 1e-6


def test_step_harmonic_center():
    # one step moves a coherent packet center to x0 cos(omega dt)
    grid = SpaceGrid(-20.0, 20.0, 1024)
    omega = 1.0
    sigma_c = np.sqrt(0.5 / omega)
    psi = gaussian_packet(grid, 1.0, 0.0, sigma_c)
    kernel = ShortTimeKernel(
        dt=0.01, mass=1.0, potential=Potential.harmonic(omega, mass=1.0)
    )
    out = path_sum_step(psi, kernel)
    assert abs(diagnostics(out)["mean_x"] - np.cos(0.01)) <= 1e-6


def test_propagate_free_width():
    grid = SpaceGrid(-14.0, 14.0, 1024)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    out = propagate_pathsum(psi, Potential.free(), T=2.0, dt=0.01)
    width = np.sqrt(diagnostics(out)["var_x"])
    assert abs(width - np.sqrt(2.0)) <= 1e-3


def test_propagate_harmonic_revival():
    grid = SpaceGrid(-14.0, 14.0, 1024)
    omega = 1.0
    psi = gaussian_packet(grid, 1.0, 0.0, np.sqrt(0.5 / omega))
    T = 2.0 * np.pi / omega
    out = propagate_pathsum(
        psi, Potential.harmonic(omega, mass=1.0), T=T, dt=T / 1024
    )
    assert abs(diagnostics(out)["mean_x"] - 1.0) <= 1e-3


def test_propagate_zero_time_identity():
    grid = SpaceGrid(-14.0, 14.0, 256)
    psi = gaussian_packet(grid, 0.0, 0.3, 1.0)
    out = propagate_pathsum(psi, Potential.free(), T=0.0, dt=0.01)
    assert np.array_equal(out.amp, psi.amp)


def test_propagate_requires_integer_steps():
    grid = SpaceGrid(-14.0, 14.0, 256)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        propagate_pathsum(psi, Potential.free(), T=0.35, dt=0.1)


def test_hundred_step_norm_drift():
    # cumulative drift before any renormalization stays under 1e-2
    grid = SpaceGrid(-20.0, 20.0, 1024)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    kernel = ShortTimeKernel(dt=0.01, mass=1.0, potential=Potential.free())
    for _ in range(100):
        psi = path_sum_step(psi, kernel)
    assert abs(psi.norm() - 1.0) < 1e-2


def test_oracle_equivalence_triangle_free():
    grid = SpaceGrid(-14.0, 14.0, 1024)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    oracle = analytic_oracle("free_gaussian", grid, 2.0, sigma=1.0)
    a = propagate_pathsum(psi, Potential.free(), T=2.0, dt=0.01)
    b = propagate_reference(psi, Potential.free(), 2.0, ReferenceConfig(dt=1e-3))
    d_ab = l2_distance(a, b)
    d_ao = l2_distance(a, oracle)
    d_bo = l2_distance(b, oracle)
    assert d_ao <= 1e-4 and d_bo <= 1e-4 and d_ab <= 1e-4
    # triangle consistency of the three pairwise distances
    assert d_ab <= d_ao + d_bo + 1e-12
    assert d_ao <= d_ab + d_bo + 1e-12
    assert d_bo <= d_ab + d_ao + 1e-12


def test_oracle_equivalence_harmonic():
    grid = SpaceGrid(-14.0, 14.0, 1024)
    omega = 1.0
    sigma_c = np.sqrt(0.5 / omega)
    psi = gaussian_packet(grid, 1.0, 0.0, sigma_c)
    pot = Potential.harmonic(omega, mass=1.0)
    T = 1.5
    oracle = analytic_oracle("harmonic_coherent", grid, T, x0=1.0, omega=omega)
    a = propagate_pathsum(psi, pot, T=T, dt=2.5e-3)
    b = propagate_reference(psi, pot, T, ReferenceConfig(dt=5e-4))
    assert l2_distance(a, oracle) <= 1e-4
    assert l2_distance(b, oracle) <= 1e-4
    assert l2_distance(a, b) <= 1e-4


def test_convergence_order_halving_dt():
    # halving dt shrinks the oracle error by at least 3.5x; the harmonic
    # case probes the midpoint phase (free propagation is exact in-band)
    grid = SpaceGrid(-14.0, 14.0, 1024)
    omega = 1.0
    psi = gaussian_packet(grid, 1.0, 0.0, np.sqrt(0.5 / omega))
    pot = Potential.harmonic(omega, mass=1.0)
    T = 1.0
    oracle = analytic_oracle("harmonic_coherent", grid, T, x0=1.0, omega=omega)
    err_coarse = l2_distance(propagate_pathsum(psi, pot, T, 0.02), oracle)
    err_fine = l2_distance(propagate_pathsum(psi, pot, T, 0.01), oracle)
    assert err_coarse / err_fine >= 3.5


def test_step_rejects_mass_mismatch():
    grid = SpaceGrid(-14.0, 14.0, 256)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0, mass=2.0)
    kernel = ShortTimeKernel(dt=0.01, mass=1.0, potential=Potential.free())
    with pytest.raises(ValueError):
        path_sum_step(psi, kernel)


def test_aliasing_out_of_band_state():
    # a packet whose carrier momentum sits past the resolvable band
    grid = SpaceGrid(-16.0, 16.0, 256)
    kmax = np.pi / grid.dx
    psi = gaussian_packet(grid, 0.0, 0.96 * kmax, 1.0)
    kernel = ShortTimeKernel(dt=0.01, mass=1.0, potential=Potential.free())
    with pytest.raises(AliasingDetectedError):
        path_sum_step(psi, kernel)


def test_aliasing_excessive_reach():
    # one enormous step would wrap the padded box
    grid = SpaceGrid(-16.0, 16.0, 256)
    psi = gaussian_packet(grid, 0.0, 0.0, 1.0)
    kernel = ShortTimeKernel(dt=20.0, mass=1.0, potential=Potential.free())
    with pytest.raises(AliasingDetectedError):
        path_sum_step(psi, kernel)


# --- sampled form ----------------------------------------------------------

MC_GRID = SpaceGrid(-16.0, 16.0, 256)
MC_DT = 0.5


def _mc_state():
    return gaussian_packet(MC_GRID, 0.0, 0.4, 1.0)


def _mc_target(n_slices):
    kernel = ShortTimeKernel(dt=MC_DT, mass=1.0, potential=Potential.free())
    psi = _mc_state()
    for _ in range(n_slices):
        psi = path_sum_step(psi, kernel)
    return psi


def test_mc_deviation_within_three_stderr():
    # one slice at rho*ell_d = 64 with 256 replicas
    kernel = ShortTimeKernel(dt=MC_DT, mass=1.0, potential=Potential.free())
    res = monte_carlo_path_sum(
        _mc_state(),
        Potential.free(),
        1,
        MC_DT,
        PathSumConfig(
            rho=64.0 / kernel.ell_d,
            truncation_radius=12.0,
            seed=1234,
            n_replicas=256,
        ),
    )
    target = _mc_target(1)
    rms_dev = np.sqrt(np.mean(np.abs(res.estimate.amp - target.amp) ** 2))
    rms_err = np.sqrt(np.mean(res.stderr**2))
    assert rms_dev <= 3.0 * rms_err


def test_mc_pointwise_unbiasedness():
    # at least 95% of grid points agree with the transfer step to 3 stderr
    kernel = ShortTimeKernel(dt=MC_DT, mass=1.0, potential=Potential.free())
    res = monte_carlo_path_sum(
        _mc_state(),
        Potential.free(),
        1,
        MC_DT,
        PathSumConfig(
            rho=16.0 / kernel.ell_d,
            truncation_radius=12.0,
            seed=777,
            n_replicas=256,
        ),
    )
    target = _mc_target(1)
    dev = np.abs(res.estimate.amp - target.amp)
    good = dev <= 3.0 * res.stderr
    assert np.mean(good) >= 0.95


def test_mc_error_density_slope():
    # quadrupling the density halves the rms deviation (slope -1/2);
    # four independent repeats per rung tame the realization scatter
    kernel = ShortTimeKernel(dt=MC_DT, mass=1.0, potential=Potential.free())
    target = _mc_target(1)
    ladder = [8.0, 64.0]
    devs = []
    for k, rho_ell in enumerate(ladder):
        acc = 0.0
        for j in range(4):
            res = monte_carlo_path_sum(
                _mc_state(),
                Potential.free(),
                1,
                MC_DT,
                PathSumConfig(
                    rho=rho_ell / kernel.ell_d,
                    truncation_radius=12.0,
                    seed=50 + 10 * k + j,
                    n_replicas=64,
                ),
            )
            acc += np.mean(np.abs(res.estimate.amp - target.amp) ** 2)
        devs.append(np.sqrt(acc / 4))
    slope = (np.log(devs[1]) - np.log(devs[0])) / (np.log(ladder[1]) - np.log(ladder[0]))
    assert abs(slope + 0.5) <= 0.1


def test_mc_deterministic_limit():
    # grid-quadrature flag reproduces the transfer step exactly
    res = monte_carlo_path_sum(
        _mc_state(),
        Potential.free(),
        2,
        MC_DT,
        PathSumConfig(rho=10.0, deterministic=True),
    )
    assert np.array_equal(res.estimate.amp, _mc_target(2).amp)
    assert np.all(res.stderr == 0.0)
    assert res.n_replicas == 0


def test_mc_density_floor():
    kernel = ShortTimeKernel(dt=MC_DT, mass=1.0, potential=Potential.free())
    with pytest.raises(DensityTooLowError):
        monte_carlo_path_sum(
            _mc_state(),
            Potential.free(),
            1,
            MC_DT,
            PathSumConfig(rho=3.9 / kernel.ell_d),
        )


def test_mc_slice_cap():
    cfg = PathSumConfig(rho=64.0)
    for bad in (0, 4):
        with pytest.raises(ValueError):
            monte_carlo_path_sum(_mc_state(), Potential.free(), bad, MC_DT, cfg)
