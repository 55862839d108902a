"""Shipped acceptance criteria, each at its stated tolerance.

The full suite (criteria 1-11) runs once per session through
``run_all`` on the default config; every test below asserts one
criterion and prints a single PASS/FAIL line with the measured values
(visible with ``pytest -s`` or in the captured output of a failure).
"""

import pytest

from branchlab.acceptance import run_all
from branchlab.experiments import default_config


@pytest.fixture(scope="session")
def acceptance():
    summary, timings = run_all(default_config())
    return summary


def _assert_criterion(summary, cid):
    crit = next(c for c in summary["criteria"] if c["id"] == cid)
    status = "PASS" if crit["pass"] else "FAIL"
    detail = "; ".join(
        f"{c['name']}={c['measured']!r} (target: {c['target']})"
        for c in crit["checks"]
    )
    print(f"[{status}] criterion {cid:>2} {crit['name']}: {detail}")
    assert crit["pass"], f"criterion {cid} {crit['name']} failed: {detail}"


def test_criterion_01_free_packet_benchmark(acceptance):
    _assert_criterion(acceptance, 1)


def test_criterion_02_harmonic_revival(acceptance):
    _assert_criterion(acceptance, 2)


def test_criterion_03_mc_estimator_convergence(acceptance):
    _assert_criterion(acceptance, 3)


def test_criterion_04_macro_width_scaling(acceptance):
    _assert_criterion(acceptance, 4)


def test_criterion_05_signal_peak_weights(acceptance):
    _assert_criterion(acceptance, 5)


def test_criterion_06_born_fractions(acceptance):
    _assert_criterion(acceptance, 6)


def test_criterion_07_density_ratio_regimes(acceptance):
    _assert_criterion(acceptance, 7)


def test_criterion_08_branch_width_ratio(acceptance):
    _assert_criterion(acceptance, 8)


def test_criterion_09_basin_quadrature(acceptance):
    _assert_criterion(acceptance, 9)


def test_criterion_10_equivariance(acceptance):
    _assert_criterion(acceptance, 10)


def test_criterion_11_reproducibility(acceptance):
    _assert_criterion(acceptance, 11)


def test_all_criteria_pass(acceptance):
    assert acceptance["pass"]
