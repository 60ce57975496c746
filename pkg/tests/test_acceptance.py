"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one ``ACCEPTANCE <name>: PASS/FAIL`` line (run with ``-s``
to see them all). Two assertions are known to fail against converged
numerics and are left red on purpose; the analysis behind both lives in the
project notes, and the printed lines carry the measured values.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from dynelim import (
    KET_M1,
    KET_P1,
    PulseSpec,
    Scheme,
    SystemParams,
    analytic_trajectory,
    exact_effective_rabi,
    four_pulse_unitary,
    gaussian_envelope,
    magnus_h1,
    magnus_h2,
    magnus_numeric,
    modulation_for_effective_area,
    propagate,
)
from dynelim.analysis import (
    RamseyConfig,
    coupling_scale_vs_mixing,
    coupling_scale_vs_phase,
    detuning_window,
    fit_fringe,
    pi_pulse_infidelity_map,
    ramsey_maps,
    ramsey_signal,
    wrap_phase,
)
from dynelim.pulses import H_TARGET

from conftest import de_spec

JOBS = 2
TWO_PI = 2.0 * math.pi


def report(name: str, ok: bool, detail: str) -> str:
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, flush=True)
    return line


# --------------------------------------------------------------------------
# Shared heavy computations.
# --------------------------------------------------------------------------

ANALYTIC_CASES = [
    (10.0, 10.0),
    (5.0, 10.0),
    (10.0, 14.0),
    (7.0, 12.0),
]


@pytest.fixture(scope="module")
def analytic_case_runs():
    runs = []
    for s_pi, omega_cycles in ANALYTIC_CASES:
        spec = de_spec(s_pi, omega_e=TWO_PI * omega_cycles)
        params = SystemParams(pulse=spec)
        numeric = propagate(params, -spec.window, spec.window, n_samples=513)
        closed = analytic_trajectory(numeric.times, params)
        runs.append((s_pi, omega_cycles, numeric, closed))
    return runs


@pytest.fixture(scope="module")
def fig2_map():
    s_grid = np.linspace(3.0, 12.0, 40) * math.pi
    knob_grid = TWO_PI * np.linspace(0.3, 9.0, 40)
    return pi_pulse_infidelity_map("de", s_grid, knob_grid, jobs=JOBS)


@pytest.fixture(scope="module")
def fig3_windows():
    out = {}
    for s_pi in (5.0, 10.0):
        for scheme in ("de", "ae"):
            out[(scheme, s_pi)] = detuning_window(scheme, s_pi * math.pi, 1e-4)
    return out


@pytest.fixture(scope="module")
def fig4_de_maps():
    s_grid = np.linspace(2.0, 14.0, 13) * math.pi
    delta_grid = TWO_PI * np.linspace(0.0, 30.0, 11)
    return ramsey_maps("de", s_grid, delta_grid, omega_e=TWO_PI * 10.0, jobs=JOBS)


@pytest.fixture(scope="module")
def fig4_ae_maps():
    s_grid = np.linspace(2.0, 14.0, 13) * math.pi
    delta_grid = TWO_PI * np.linspace(5.0, 15.0, 5)
    return ramsey_maps("ae", s_grid, delta_grid, jobs=JOBS)


# --------------------------------------------------------------------------
# Criteria.
# --------------------------------------------------------------------------

def test_unitarity_normalization(full_transfer_trajectory, analytic_case_runs):
    drifts = [full_transfer_trajectory.norm_drift]
    drifts += [numeric.norm_drift for _, _, numeric, _ in analytic_case_runs]
    detuned = SystemParams(pulse=de_spec(6.0, seff_pi=0.5), delta_1=3.0, delta_2=-1.0)
    drifts.append(propagate(detuned, -4.0, 4.0, n_samples=129).norm_drift)
    ae = SystemParams(pulse=PulseSpec(scheme=Scheme.AE, area=5 * math.pi), delta_1=20.0)
    drifts.append(propagate(ae, -4.0, 4.0, n_samples=129).norm_drift)
    worst = max(drifts)
    line = report("unitarity-normalization", worst < 1e-9,
                  f"worst |norm-1| = {worst:.2e}, bound 1e-9")
    assert worst < 1e-9, line


def test_fig1_population_transfer(full_transfer_trajectory):
    omega_e = modulation_for_effective_area(10 * math.pi, math.pi, 1.0)
    cycles = omega_e / TWO_PI
    final = full_transfer_trajectory.final_state()
    ok = (abs(cycles - 4.99) < 0.01
          and final.population(-1) >= 0.999
          and final.population(0) < 1e-3)
    line = report(
        "fig1-transfer", ok,
        f"(w_e/2pi)t_p = {cycles:.3f}, P(-1) = {final.population(-1):.6f}, "
        f"P(0) = {final.population(0):.2e}",
    )
    assert ok, line


def test_area_rule_consistency(rng):
    worst = 0.0
    for _ in range(20):
        s = rng.uniform(2, 12) * math.pi
        omega_e = rng.uniform(5, 80)
        t_p = rng.uniform(0.5, 2.0)
        peak = s / (math.sqrt(math.pi) * t_p)
        integral, _ = quad(
            lambda t: gaussian_envelope(t, peak, t_p) ** 2 / (4 * omega_e),
            -8 * t_p, 8 * t_p, epsabs=1e-14, epsrel=1e-12,
        )
        closed = math.sqrt(2) * s**2 / (8 * math.sqrt(math.pi) * omega_e * t_p)
        worst = max(worst, abs(integral - closed) / closed)
    line = report("area-rule", worst < 1e-6, f"worst relative error {worst:.2e}, bound 1e-6")
    assert worst < 1e-6, line


def test_analytic_solution_oracle(analytic_case_runs):
    worst_pop = 0.0
    worst_final_p0 = 0.0
    worst_closed_p0 = 0.0
    for s_pi, omega_cycles, numeric, closed in analytic_case_runs:
        worst_pop = max(worst_pop, float(np.max(np.abs(
            numeric.populations - closed.populations
        ))))
        worst_final_p0 = max(worst_final_p0, numeric.final_state().population(0))
        worst_closed_p0 = max(worst_closed_p0, closed.final_state().population(0))
    ok = worst_pop <= 1e-2 and worst_final_p0 < 1e-4 and worst_closed_p0 < 1e-12
    line = report(
        "analytic-oracle", ok,
        f"max population gap {worst_pop:.2e} (bound 1e-2), numeric final P0 "
        f"{worst_final_p0:.2e} (bound 1e-4), closed-form final P0 {worst_closed_p0:.2e}",
    )
    assert ok, line


def test_magnus_oracle_closed_form(rng):
    worst = 0.0
    for _ in range(20):
        spec = de_spec(rng.uniform(2, 10), omega_e=rng.uniform(10, 60))
        params = SystemParams(pulse=spec, delta_1=rng.uniform(-2, 2),
                              delta_2=rng.uniform(-2, 2))
        t_c = rng.uniform(-1, 1)
        closed = magnus_h1(params).matrix + magnus_h2(params, t_c).matrix
        numeric = magnus_numeric(2, params, t_c).matrix
        worst = max(worst, float(
            np.linalg.norm(closed - numeric) / np.linalg.norm(numeric)
        ))
    line = report("magnus-oracle-closed-form", worst <= 1e-8,
                  f"worst relative deviation {worst:.2e}, bound 1e-8")
    assert worst <= 1e-8, line


def test_magnus_third_order_target_structure():
    # Stated criterion: the third-order term at resonance is proportional to
    # the ground-ground coupling (off-components below 1e-6 of its norm).
    # Converged quadrature gives a pure Stokes-type operator instead
    # (-Omega^3/(8 w_e^2) H_s); a parity argument makes any ground-ground
    # component of an odd-order term impossible. Left red deliberately; the
    # analysis lives in the project notes.
    params = SystemParams(pulse=de_spec(6.0, omega_e=15.0))
    h3 = magnus_numeric(3, params, 0.0, cumulative=False).matrix
    coeff = np.vdot(H_TARGET, h3) / np.vdot(H_TARGET, H_TARGET)
    off = float(np.linalg.norm(h3 - coeff * H_TARGET))
    frac = off / float(np.linalg.norm(h3))
    ok = frac < 1e-6
    line = report(
        "magnus-third-order-structure", ok,
        f"off-target fraction {frac:.3f}, criterion < 1e-6; quadrature term is "
        f"Stokes-like (known discrepancy, see project notes)",
    )
    assert ok, line


def test_four_pulse_scaling():
    areas = [0.2, 0.1, 0.05, 0.025]
    norms = [
        np.linalg.norm(four_pulse_unitary(s, "exact").matrix
                       - four_pulse_unitary(s, "first_order").matrix)
        for s in areas
    ]
    ratios = [norms[i] / norms[i + 1] for i in range(len(norms) - 1)]
    ok = abs(ratios[-1] - 8.0) <= 0.5
    line = report("four-pulse-scaling", ok,
                  f"halving ratios {[f'{r:.3f}' for r in ratios]}, limit 8 +- 0.5")
    assert ok, line


def test_fig2_ridge_structure(fig2_map):
    s_grid = fig2_map.s_grid
    knob_grid = fig2_map.knob_grid
    minima = []
    for i in range(s_grid.size):
        row = fig2_map.infidelity[i]
        j = int(np.argmin(row))
        assert 0 < j < row.size - 1, "per-row minimum must be interior to the grid"
        c = np.polyfit(knob_grid[j - 1:j + 2], row[j - 1:j + 2], 2)
        minima.append(-c[1] / (2 * c[0]))
    minima = np.array(minima)
    exponent = np.polyfit(np.log(s_grid), np.log(minima), 1)[0]
    from scipy.stats import spearmanr

    rank_corr = spearmanr(s_grid**2, minima).statistic

    worst_p0 = 0.0
    for i in range(s_grid.size):
        if s_grid[i] < 8 * math.pi:
            continue
        spec = PulseSpec(scheme=Scheme.DE, area=float(s_grid[i]), omega_e=float(minima[i]))
        final = propagate(SystemParams(pulse=spec), -spec.window, spec.window,
                          n_samples=9).final_state()
        worst_p0 = max(worst_p0, final.population(0))
    ok = abs(exponent - 2.0) <= 0.1 and worst_p0 < 1e-5 and rank_corr > 0.99
    line = report(
        "fig2-structure", ok,
        f"ridge exponent {exponent:.3f} (2.0 +- 0.1), rank correlation "
        f"{rank_corr:.4f} (> 0.99), worst ridge final P0 {worst_p0:.2e} "
        f"(bound 1e-5) on a 40x40 grid",
    )
    assert ok, line


def test_fig3_window_ratios(fig3_windows):
    # Stated criterion: window ratios 3.9 (S = 5 pi) and 35.5 (S = 10 pi)
    # within +-15%. Converged numerics give ~8.7 at both areas: both schemes'
    # infidelity curves are smooth power laws in the added detuning (quartic
    # for the modulated scheme, quadratic for the detuned one), which forces
    # a nearly area-independent ratio. Left red deliberately; the variant
    # matrix that was ruled out is recorded in the project notes.
    ratios = {}
    for s_pi in (5.0, 10.0):
        ratios[s_pi] = (fig3_windows[("de", s_pi)].width
                        / fig3_windows[("ae", s_pi)].width)
    ok = abs(ratios[5.0] / 3.9 - 1) <= 0.15 and abs(ratios[10.0] / 35.5 - 1) <= 0.15
    line = report(
        "fig3-ratios", ok,
        f"measured {ratios[5.0]:.2f} vs 3.9 and {ratios[10.0]:.2f} vs 35.5 "
        f"(+-15%); converged value is area-independent (known discrepancy, "
        f"see project notes)",
    )
    assert ok, line


def test_fig4_fringes_and_maps(fig4_de_maps, fig4_ae_maps):
    scan = np.linspace(0.0, 4 * math.pi, 129)
    ideal_cfg = RamseyConfig(pulse=de_spec(10.0, omega_e=TWO_PI * 10.0),
                             phase_scan=scan)
    off_cfg = RamseyConfig(pulse=de_spec(5.0, omega_e=TWO_PI * 10.0),
                           delta_1=TWO_PI * 20.0, phase_scan=scan)
    ideal = ramsey_signal(ideal_cfg)
    off = ramsey_signal(off_cfg)
    fit_ideal = fit_fringe(ideal)
    fit_off = fit_fringe(off)
    norm_ideal = (ideal[:, 1] - fit_ideal.offset) / fit_ideal.contrast
    norm_off = (off[:, 1] - fit_off.offset) / fit_off.contrast
    pointwise = float(np.max(np.abs(norm_ideal - norm_off)))
    phase_gap = abs(wrap_phase(fit_ideal.phase_shift - fit_off.phase_shift))

    plateau = (fig4_de_maps.contrast >= 0.9 * fig4_de_maps.contrast.max()) & (
        fig4_de_maps.delta_grid[None, :] <= TWO_PI * 4.0
    )
    plateau_phase = float(np.nanmax(np.abs(fig4_de_maps.phase_shift[plateau])))

    s_opt = fig4_ae_maps.s_grid[np.argmax(fig4_ae_maps.contrast, axis=0)] / math.pi
    interior = s_opt < fig4_ae_maps.s_grid.max() / math.pi
    slope = np.polyfit(fig4_ae_maps.delta_grid[interior] / TWO_PI,
                       s_opt[interior], 1)[0]

    # Fringe degradation sets in once the detuning nears the modulation
    # frequency; with t_p = 500 us that crossover scales to ~10 kHz
    # ((Delta/2pi) t_p ~ 5). Contrast is still high at 3 cycles and has
    # collapsed by 9.
    row = int(np.argmin(np.abs(fig4_de_maps.s_grid - 10 * math.pi)))
    cyc = fig4_de_maps.delta_grid / TWO_PI
    pre_onset = float(fig4_de_maps.contrast[row, np.argmin(np.abs(cyc - 3.0))])
    post_onset = float(np.min(
        fig4_de_maps.contrast[row, (cyc >= 5.0) & (cyc <= 9.0)]
    ))

    ok = (pointwise <= 0.02 and phase_gap < 0.01
          and plateau_phase < 0.05 and slope > 0.0
          and pre_onset > 0.9 and post_onset < 0.5)
    line = report(
        "fig4-fringes", ok,
        f"normalized fringe gap {pointwise:.2e} (bound 0.02), phase gap "
        f"{phase_gap:.2e} rad (bound 0.01), plateau |dphi| {plateau_phase:.2e} "
        f"(bound 0.05), detuned-scheme optimum slope {slope:.2f} S_pi/cycle (> 0), "
        f"contrast {pre_onset:.3f} before / {post_onset:.3f} past the onset",
    )
    assert ok, line


def test_robustness_factors():
    phis = np.linspace(0.0, 1.2, 7)
    phase_scan = coupling_scale_vs_phase(phis, 10 * math.pi, TWO_PI * 10.0)
    phase_dev = float(np.max(np.abs(phase_scan[:, 1] / np.cos(phase_scan[:, 0]) - 1.0)))

    alphas = np.linspace(0.2, math.pi / 2 - 0.2, 7)
    mix_scan = coupling_scale_vs_mixing(alphas, 10 * math.pi, TWO_PI * 10.0)
    mix_dev = float(np.max(np.abs(mix_scan[:, 1] / np.sin(2 * mix_scan[:, 0]) - 1.0)))

    ok = phase_dev <= 0.02 and mix_dev <= 0.02
    line = report(
        "robustness-factors", ok,
        f"cos(phi) deviation {phase_dev:.2e}, sin(2 alpha) deviation "
        f"{mix_dev:.2e}, bounds 0.02",
    )
    assert ok, line
