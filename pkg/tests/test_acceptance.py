"""Acceptance criteria, one test per criterion, with stated tolerances.

Each test prints a single PASS line (visible with pytest -s) and enforces its
runtime cap.  Everything runs without the plotting component.
"""
import time

import numpy as np
import pytest

from settling.configs import (generate_cubic_lattice, generate_shifted_example,
                              uniform_density_for)
from settling.continuum import (ScalarGrid, defect_energy_series,
                                solve_defect_poisson)
from settling.freespace import (assemble_energy, sed_velocity_estimate,
                                stokes_velocity)
from settling.harness import fit_power_law, run
from settling.kernels import SphereField, sphere_field
from settling.periodic import a_per_estimate, lattice_energy
from settling.quadrature import sphere_rule

RESULTS = []


def record(name, value, elapsed, cap):
    line = f"ACCEPTANCE {name}: PASS ({value}; {elapsed:.1f}s < {cap}s)"
    RESULTS.append(line)
    print("\n" + line)
    assert elapsed < cap, f"{name} exceeded its runtime cap"


@pytest.fixture(scope="module")
def lattice_breakdowns():
    out = {}
    for M in (4, 6, 8):
        cfg = generate_cubic_lattice(M, 0.05)
        out[M] = (cfg, assemble_energy(cfg))
    return out


@pytest.mark.acceptance
def test_c1_single_sphere_exactness():
    t0 = time.perf_counter()
    pts, w = sphere_rule(50)
    for r in (0.01, 0.05, 0.1):
        sph = SphereField(np.zeros(3), r, np.array([0, 0, 1.0]))
        surf_avg = float(w @ sphere_field(r * pts, sph)[:, 2])
        v_st = stokes_velocity(r)
        assert abs(surf_avg - v_st) <= 1e-8 * v_st
    record("criterion 1 (single-sphere exactness)", "3 radii at 1e-8",
           time.perf_counter() - t0, 1.0)


@pytest.mark.acceptance
def test_c2_dilute_periodic_limit():
    t0 = time.perf_counter()
    rho = 1e-3
    val = 6 * np.pi * rho * lattice_energy(rho, tol=1e-6)
    assert 0.994 <= val <= 1.0
    record("criterion 2 (dilute periodic limit)", f"6 pi rho S = {val:.6f}",
           time.perf_counter() - t0, 10.0)


@pytest.mark.acceptance
def test_c3_hasimoto_coefficient():
    t0 = time.perf_counter()
    a, resid, info = a_per_estimate([0.02, 0.01, 0.005], tol=1e-6)
    assert 2.80 <= a <= 2.87
    record("criterion 3 (first-order coefficient)",
           f"a_per = {a:.4f}, residual {resid:.1e}",
           time.perf_counter() - t0, 60.0)


@pytest.mark.acceptance
def test_c4_torus_vs_freespace(lattice_breakdowns):
    t0 = time.perf_counter()
    S = lattice_energy(0.05, tol=1e-7)
    gaps = {}
    for M in (4, 8):
        cfg, bd = lattice_breakdowns[M]
        gaps[M] = abs(cfg.N ** (-2 / 3) * bd.total - S)
    assert gaps[8] < gaps[4]
    assert gaps[8] / S < 0.15
    record("criterion 4 (torus vs freespace)",
           f"gap(4) = {gaps[4]:.2e}, gap(8) = {gaps[8]:.2e}, rel {gaps[8]/S:.2e}",
           time.perf_counter() - t0, 600.0)


@pytest.mark.acceptance
def test_c5_well_prepared_boundedness(lattice_breakdowns):
    t0 = time.perf_counter()
    vst = stokes_velocity(0.05)
    devs = []
    for M in (4, 6, 8):
        cfg, bd = lattice_breakdowns[M]
        devs.append((M, abs(sed_velocity_estimate(bd) - vst)))
    fit = fit_power_law(devs)
    assert abs(fit.exponent) <= 0.15
    assert max(v for _, v in devs) < 1.0
    record("criterion 5 (well-prepared boundedness)",
           f"M-exponent = {fit.exponent:+.4f}, max dev {max(v for _, v in devs):.4f}",
           time.perf_counter() - t0, 900.0)


@pytest.mark.acceptance
def test_c6_ill_prepared_scaling():
    t0 = time.perf_counter()
    from settling.harness import ill_prepared_verdict
    ill = ill_prepared_verdict(M_list=(8, 12, 16))
    assert ill["self_convergence"] <= 0.10
    largest = ill["ratios"][16]
    assert abs(largest - 1.0) <= 0.10
    record("criterion 6 (ill-prepared scaling)",
           f"ratio(M=16) = {largest:.4f}, self-conv {ill['self_convergence']:.3f}",
           time.perf_counter() - t0, 1800.0)


@pytest.mark.acceptance
def test_c7_dual_norm_exponents():
    t0 = time.perf_counter()
    norms = {"rho_sigma": [], "sigma_n": []}
    for M in (10, 16, 25):
        cfg = generate_cubic_lattice(M, 0.05, cube_scale=0.8)
        grid = ScalarGrid(((0, 1), (0, 1), (0, 1)), 1.0 / (4 * M))
        rho, sigma, dens = grid.deposit_config_measures(
            cfg, uniform_density_for(cfg))
        norms["rho_sigma"].append((cfg.N, grid.dual_norm(rho - sigma)))
        norms["sigma_n"].append((cfg.N, grid.dual_norm(sigma - dens)))
    slopes = {k: fit_power_law(v).exponent for k, v in norms.items()}
    for k, s in slopes.items():
        assert -0.38 <= s <= -0.28, (k, s)
    record("criterion 7 (dual-norm exponents)",
           f"slopes rho-sigma {slopes['rho_sigma']:+.4f}, "
           f"sigma-n {slopes['sigma_n']:+.4f}",
           time.perf_counter() - t0, 1200.0)


@pytest.mark.acceptance
def test_c8_defect_energy():
    t0 = time.perf_counter()
    weight = 2 ** (1 / 3) * 0.25
    series = defect_energy_series(weight)
    sol = solve_defect_poisson(weight, n_grid=256)
    rel = abs(sol.energy - series) / series
    assert rel <= 0.01
    assert abs(defect_energy_series(1.0) - 0.1353) < 2e-4
    record("criterion 8 (defect energy vs series)",
           f"rel err {rel:.2e} at h = 1/256",
           time.perf_counter() - t0, 30.0)


@pytest.mark.acceptance
def test_c9_structure_formula(lattice_breakdowns):
    t0 = time.perf_counter()
    cfg, density = generate_shifted_example(4, 0.25, 0.05)
    bd = assemble_energy(cfg)
    e3 = defect_energy_series(density.defect_weight)
    est = sed_velocity_estimate(bd, continuum_energy=e3)
    target = cfg.N ** (-2 / 3) * bd.total + e3
    assert abs(est - target) <= 1e-12 * abs(target)   # bookkeeping identity
    resid = []
    for r in (0.02, 0.04, 0.08):
        c = generate_cubic_lattice(4, r)
        b = assemble_energy(c)
        resid.append((r, abs(sed_velocity_estimate(b) / stokes_velocity(r) - 1)))
    fit = fit_power_law(resid)
    assert fit.exponent >= 0.8
    record("criterion 9 (structure formula)",
           f"identity exact, r-exponent {fit.exponent:.3f}",
           time.perf_counter() - t0, 900.0)


@pytest.mark.acceptance
def test_c10_determinism(tmp_path):
    t0 = time.perf_counter()
    # pipeline-level: a sweep covering every pipeline, run twice, identical CSV
    sweep = {"sweep": [
        {"generator": "lattice", "M": 2, "r": 0.05,
         "pipelines": ["freespace", "torus", "metrics"]},
        {"generator": "shifted", "M": 2, "lambda": 0.25, "r": 0.05,
         "pipelines": ["freespace", "defect", "metrics"],
         "grid": {"defect_n": 64}},
        {"generator": "lattice", "M": 3, "r": 0.05,
         "pipelines": ["vstar", "empirical"],
         "grid": {"h": 1 / 6, "window": (-1.0, 2.0)}},
        {"generator": "poisson", "N": 25, "r": 0.05, "seed": 9,
         "pipelines": ["metrics"]},
    ]}
    run(sweep, out_dir=tmp_path / "run1")
    run(sweep, out_dir=tmp_path / "run2")
    b1 = (tmp_path / "run1" / "records.csv").read_bytes()
    b2 = (tmp_path / "run2" / "records.csv").read_bytes()
    assert b1 == b2
    # value-level: headline quantities recompute to identical floats
    assert lattice_energy(1e-3, tol=1e-6) == lattice_energy(1e-3, tol=1e-6)
    a1 = assemble_energy(generate_cubic_lattice(4, 0.05)).total
    a2 = assemble_energy(generate_cubic_lattice(4, 0.05)).total
    assert a1 == a2
    d1 = solve_defect_poisson(1.0, 128).energy
    assert d1 == solve_defect_poisson(1.0, 128).energy
    record("criterion 10 (determinism)",
           f"CSV bytes identical ({len(b1)} bytes), reruns bitwise equal",
           time.perf_counter() - t0, 600.0)


@pytest.mark.acceptance
def test_zz_summary():
    print("\n" + "=" * 72)
    for line in RESULTS:
        print(line)
    print("=" * 72)
    assert len(RESULTS) == 10
