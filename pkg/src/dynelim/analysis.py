"""Scalar metrics, Ramsey fringes and detuning-robustness quantification."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import KET_M1, KET_P1, StateVector, overlap
from .dynamics import SystemParams, Trajectory, free_evolution, propagate, propagate_unitary
from .errors import DegenerateFringeError, NoWindowError, ValidationError
from .pulses import PulseSpec, Scheme, modulation_for_effective_area

#: Contrast below which a fringe phase is meaningless.
DEGENERATE_CONTRAST = 1e-12


def infidelity(final, target) -> float:
    """1 - |<target|final>|^2, clipped against rounding."""
    val = 1.0 - abs(overlap(target, final)) ** 2
    return float(min(max(val, 0.0), 1.0))


def avg_intermediate_population(traj: Trajectory, t_lo: float, t_hi: float) -> float:
    """Trapezoidal average of the intermediate-state population over [t_lo, t_hi]."""
    if not (t_lo < t_hi):
        raise ValidationError("averaging window must have t_lo < t_hi")
    if t_lo < traj.times[0] - 1e-12 or t_hi > traj.times[-1] + 1e-12:
        raise ValidationError("averaging window must lie inside the trajectory span")
    p0 = traj.populations[:, 1]
    inside = (traj.times > t_lo) & (traj.times < t_hi)
    ts = np.concatenate([[t_lo], traj.times[inside], [t_hi]])
    ys = np.concatenate([
        [np.interp(t_lo, traj.times, p0)],
        p0[inside],
        [np.interp(t_hi, traj.times, p0)],
    ])
    return float(np.trapezoid(ys, ts) / (t_hi - t_lo))


def transfer_angle(state) -> float:
    """Ground-ground rotation angle from the final amplitudes, in [0, pi/2]."""
    amps = getattr(state, "amplitudes", state)
    return float(math.atan2(abs(amps[2]), abs(amps[0])))


def wrap_phase(phi: float) -> float:
    """Map an angle onto (-pi, pi]."""
    out = math.remainder(phi, 2.0 * math.pi)
    if out <= -math.pi:
        out += 2.0 * math.pi
    return out


# ---------------------------------------------------------------------------
# Fringe synthesis and fitting.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FringeFit:
    """Cosine-model parameters: contrast * cos(theta + phase) + offset."""

    contrast: float
    phase_shift: float
    offset: float
    residual: float


def fit_fringe(samples) -> FringeFit:
    """Linear least squares of y = a cos(theta) + b sin(theta) + c.

    Returns contrast sqrt(a^2+b^2), phase atan2(-b, a) in (-pi, pi], the
    offset and the RMS residual of the fit.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("fringe samples must be (theta, y) pairs")
    if arr.shape[0] < 3:
        raise ValidationError("need at least three fringe samples")
    theta, y = arr[:, 0], arr[:, 1]
    design = np.column_stack([np.cos(theta), np.sin(theta), np.ones_like(theta)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise ValidationError("fringe design matrix is rank deficient; scan a full period")
    a, b, c = coef
    contrast = float(np.hypot(a, b))
    if contrast < DEGENERATE_CONTRAST:
        raise DegenerateFringeError("fringe contrast is zero; phase undefined")
    residual = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    return FringeFit(contrast=contrast, phase_shift=wrap_phase(math.atan2(-b, a)),
                     offset=float(c), residual=residual)


def default_phase_scan(periods: int = 2, per_period: int = 64) -> np.ndarray:
    """Accumulated-phase grid covering the requested number of fringe periods."""
    return np.linspace(0.0, 2.0 * math.pi * periods, periods * per_period + 1)


@dataclass(frozen=True)
class RamseyConfig:
    """One Ramsey experiment: two identical pulses around a free evolution.

    The fringe is scanned in accumulated two-photon phase delta_2 * tau by
    varying delta_2 at fixed tau, so the single-photon phase of the free
    segment stays constant across one scan.
    """

    pulse: PulseSpec
    delta_1: float = 0.0
    delta_2: float = 0.0
    tau: float = 1.0
    phase_scan: np.ndarray = field(default_factory=default_phase_scan)

    def __post_init__(self):
        scan = np.asarray(self.phase_scan, dtype=float)
        object.__setattr__(self, "phase_scan", scan)
        if self.tau <= 0:
            raise ValidationError("free-evolution time must be positive to accumulate phase")
        span = float(scan.max() - scan.min()) if scan.size else 0.0
        if span < 4.0 * math.pi - 1e-9:
            raise ValidationError("phase scan must cover at least two fringe periods")
        if scan.size < 32.0 * span / (2.0 * math.pi):
            raise ValidationError("phase scan needs at least 32 samples per period")


def ramsey_signal(cfg: RamseyConfig, pulse_unitary=None, tol: float = 1e-9) -> np.ndarray:
    """Population difference P(+1) - P(-1) versus accumulated phase.

    The pulse propagator is computed once per configuration; the scanned
    two-photon detuning enters only through the free-evolution phase.
    """
    spec = cfg.pulse
    if pulse_unitary is None:
        params = SystemParams(pulse=spec, delta_1=cfg.delta_1, delta_2=cfg.delta_2)
        pulse_unitary = propagate_unitary(params, -spec.window, spec.window, tol=tol).matrix
    else:
        pulse_unitary = getattr(pulse_unitary, "matrix", pulse_unitary)
    out = np.empty((cfg.phase_scan.size, 2), dtype=float)
    psi0 = KET_P1
    for i, phase in enumerate(cfg.phase_scan):
        u_free = free_evolution(cfg.tau, cfg.delta_1, phase / cfg.tau).matrix
        psi = pulse_unitary @ (u_free @ (pulse_unitary @ psi0))
        out[i] = (phase, abs(psi[0]) ** 2 - abs(psi[2]) ** 2)
    return out


# ---------------------------------------------------------------------------
# Grid sweeps (map-style parallelism over independent points).
# ---------------------------------------------------------------------------

def _spec_for(scheme: Scheme, area: float, knob: float, t_p: float,
              base: PulseSpec | None = None) -> tuple[PulseSpec, float]:
    """Pulse spec and single-photon detuning for one grid point.

    The swept knob is the modulation frequency for the modulated scheme and
    the single-photon detuning for the unmodulated one.
    """
    kwargs = dict(scheme=scheme, area=area, t_p=t_p)
    if base is not None:
        kwargs.update(phi=base.phi, amp_p=base.amp_p, amp_s=base.amp_s, window=base.window)
    if scheme is Scheme.DE:
        return PulseSpec(omega_e=knob, **kwargs), 0.0
    return PulseSpec(**kwargs), knob


def _pi_pulse_point(task):
    scheme, area, knob, t_p, tol, want_pops = task
    spec, delta_1 = _spec_for(Scheme(scheme), area, knob, t_p)
    params = SystemParams(pulse=spec, delta_1=delta_1)
    if want_pops:
        traj = propagate(params, -spec.window, spec.window, n_samples=257, tol=tol)
        final = traj.final_state()
        avg_p0 = avg_intermediate_population(traj, -t_p / 2.0, t_p / 2.0)
        final_p0 = final.population(0)
    else:
        u = propagate_unitary(params, -spec.window, spec.window, tol=tol)
        final = StateVector(u.matrix[:, 0], norm_tol=1e-9)
        avg_p0 = math.nan
        final_p0 = final.population(0)
    return infidelity(final, KET_M1), avg_p0, final_p0


def _run_pool(worker, tasks, jobs):
    if jobs is not None and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, tasks, chunksize=4))
    return [worker(t) for t in tasks]


@dataclass
class InfidelityMap:
    """Pi-pulse infidelity over an (area, knob) grid, with optional populations."""

    s_grid: np.ndarray
    knob_grid: np.ndarray
    infidelity: np.ndarray
    avg_p0: np.ndarray | None = None
    final_p0: np.ndarray | None = None


def pi_pulse_infidelity_map(scheme, s_grid, knob_grid, t_p: float = 1.0,
                            jobs: int | None = None, populations: bool = False,
                            tol: float = 1e-9) -> InfidelityMap:
    """Infidelity of |+1> -> |-1> transfer over the (S, knob) grid.

    Resonant otherwise; the knob is the modulation frequency (modulated
    scheme) or the single-photon detuning (unmodulated scheme), in angular
    units.
    """
    scheme = Scheme(scheme)
    s_grid = np.asarray(s_grid, dtype=float)
    knob_grid = np.asarray(knob_grid, dtype=float)
    if s_grid.size == 0 or knob_grid.size == 0:
        raise ValidationError("grids must be non-empty")
    tasks = [
        (scheme.value, s, k, t_p, tol, populations)
        for s in s_grid for k in knob_grid
    ]
    results = _run_pool(_pi_pulse_point, tasks, jobs)
    shape = (s_grid.size, knob_grid.size)
    infid = np.array([r[0] for r in results]).reshape(shape)
    avg_p0 = np.array([r[1] for r in results]).reshape(shape) if populations else None
    final_p0 = np.array([r[2] for r in results]).reshape(shape)
    return InfidelityMap(s_grid, knob_grid, infid, avg_p0, final_p0)


def _ramsey_point(task):
    scheme, area, delta_1, omega_e, t_p, tau, scan, tol = task
    if Scheme(scheme) is Scheme.DE:
        spec = PulseSpec(scheme=Scheme.DE, area=area, t_p=t_p, omega_e=omega_e)
    else:
        spec = PulseSpec(scheme=Scheme.AE, area=area, t_p=t_p)
    cfg = RamseyConfig(pulse=spec, delta_1=delta_1, tau=tau, phase_scan=np.asarray(scan))
    try:
        fit = fit_fringe(ramsey_signal(cfg, tol=tol))
        return fit.contrast, fit.phase_shift
    except DegenerateFringeError:
        return 0.0, math.nan


@dataclass
class RamseyMaps:
    """Fringe contrast and excess phase over an (area, detuning) grid."""

    s_grid: np.ndarray
    delta_grid: np.ndarray
    contrast: np.ndarray
    phase_shift: np.ndarray
    reference_point: tuple[int, int]
    reference_phase: float


def ramsey_maps(scheme, s_grid, delta_grid, omega_e: float | None = None,
                t_p: float = 1.0, tau: float = 1.0, phase_scan=None,
                jobs: int | None = None, tol: float = 1e-9) -> RamseyMaps:
    """Contrast and phase-shift maps of the two-pulse Ramsey sequence.

    Phase shifts are reported relative to the fit at the maximum-contrast
    grid point, so the map shows excess phase only.
    """
    scheme = Scheme(scheme)
    s_grid = np.asarray(s_grid, dtype=float)
    delta_grid = np.asarray(delta_grid, dtype=float)
    scan = default_phase_scan() if phase_scan is None else np.asarray(phase_scan, dtype=float)
    tasks = [
        (scheme.value, s, d, omega_e, t_p, tau, scan, tol)
        for s in s_grid for d in delta_grid
    ]
    results = _run_pool(_ramsey_point, tasks, jobs)
    shape = (s_grid.size, delta_grid.size)
    contrast = np.array([r[0] for r in results]).reshape(shape)
    raw_phase = np.array([r[1] for r in results]).reshape(shape)
    ref_idx = np.unravel_index(int(np.argmax(contrast)), shape)
    ref_phase = float(raw_phase[ref_idx])
    excess = np.vectorize(
        lambda p: math.nan if math.isnan(p) else wrap_phase(p - ref_phase)
    )(raw_phase)
    return RamseyMaps(s_grid, delta_grid, contrast, excess, ref_idx, ref_phase)


# ---------------------------------------------------------------------------
# Detuning-robustness windows.
# ---------------------------------------------------------------------------

EQUAL_SUPERPOSITION_AREA = math.pi / 2.0


def _half_pulse_final(scheme: Scheme, area: float, knob: float, t_p: float,
                      extra_delta: float, tol: float) -> np.ndarray:
    spec, delta_1 = _spec_for(scheme, area, knob, t_p)
    params = SystemParams(pulse=spec, delta_1=delta_1 + extra_delta)
    u = propagate_unitary(params, -spec.window, spec.window, tol=tol)
    return u.matrix[:, 0]


def _phase_free_infidelity(amps: np.ndarray) -> float:
    # Best fidelity to (|+1> + e^{i chi}|-1>)/sqrt(2) over chi.
    val = 1.0 - 0.5 * (abs(amps[0]) + abs(amps[2])) ** 2
    return float(min(max(val, 0.0), 1.0))


def _golden_minimize(f, lo, hi, rel_tol=1e-5):
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - golden * (hi - lo)
    d = lo + golden * (hi - lo)
    fc, fd = f(c), f(d)
    while (hi - lo) > rel_tol * (abs(lo) + abs(hi)) / 2.0:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - golden * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + golden * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


@dataclass
class WindowResult:
    """Detuning window of one scheme at one pulse area."""

    scheme: Scheme
    area: float
    threshold: float
    reference_knob: float
    reference_infidelity: float
    target_phase: float
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower


def detuning_window(scheme, area: float, threshold: float, t_p: float = 1.0,
                    scan_limit: float | None = None, tol: float = 1e-9,
                    reference_knob: float | None = None) -> WindowResult:
    """Width of the added-detuning interval keeping the half-transfer pulse good.

    The pulse knob (modulation frequency or reference detuning) is first
    optimized at zero added detuning for the equal-superposition target; the
    target's relative phase is then frozen at the reference value, so
    detuning-induced phase errors count as infidelity. Edges are located by
    doubling brackets plus bisection to 1e-3 relative accuracy.
    """
    scheme = Scheme(scheme)
    if threshold <= 0:
        raise ValidationError("threshold must be positive")
    knob_guess = modulation_for_effective_area(area, EQUAL_SUPERPOSITION_AREA, t_p)
    if scan_limit is None:
        scan_limit = 2.0 * knob_guess
    if reference_knob is None:
        reference_knob = _golden_minimize(
            lambda k: _phase_free_infidelity(
                _half_pulse_final(scheme, area, k, t_p, 0.0, tol)
            ),
            0.75 * knob_guess, 1.25 * knob_guess,
        )
    ref_amps = _half_pulse_final(scheme, area, reference_knob, t_p, 0.0, tol)
    chi = float(np.angle(ref_amps[2] / ref_amps[0]))
    target = StateVector(np.array([1.0, 0.0, np.exp(1j * chi)]) / math.sqrt(2.0))

    def excess(offset: float) -> float:
        amps = _half_pulse_final(scheme, area, reference_knob, t_p, offset, tol)
        return infidelity(StateVector(amps, norm_tol=1e-9), target) - threshold

    at_zero = excess(0.0)
    if at_zero >= 0.0:
        raise NoWindowError(
            f"infidelity at zero added detuning already above threshold "
            f"({at_zero + threshold:.3e} >= {threshold:.3e})"
        )

    def edge(sign: float) -> float:
        step = min(0.02 * knob_guess, scan_limit / 4.0)
        inside = 0.0
        probe = sign * step
        while abs(probe) <= scan_limit:
            if excess(probe) >= 0.0:
                break
            inside = probe
            probe *= 2.0
        else:
            return sign * scan_limit
        lo, hi = inside, probe
        while abs(hi - lo) > 1e-3 * max(abs(hi), abs(lo), 1e-9):
            mid = 0.5 * (lo + hi)
            if excess(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    upper = edge(+1.0)
    lower = edge(-1.0)
    return WindowResult(
        scheme=scheme, area=area, threshold=threshold,
        reference_knob=float(reference_knob),
        reference_infidelity=float(at_zero + threshold),
        target_phase=chi, lower=float(lower), upper=float(upper),
    )


def detuning_scan(window: WindowResult, offsets, t_p: float = 1.0,
                  tol: float = 1e-9) -> np.ndarray:
    """Fixed-target infidelity versus added detuning for an optimized pulse."""
    target = StateVector(
        np.array([1.0, 0.0, np.exp(1j * window.target_phase)]) / math.sqrt(2.0)
    )
    out = np.empty((len(offsets), 2), dtype=float)
    for i, off in enumerate(offsets):
        amps = _half_pulse_final(window.scheme, window.area, window.reference_knob,
                                 t_p, float(off), tol)
        out[i] = (off, infidelity(StateVector(amps, norm_tol=1e-9), target))
    return out


# ---------------------------------------------------------------------------
# Effective-coupling scaling scans (modulation phase and amplitude mix).
# ---------------------------------------------------------------------------

def coupling_scale_vs_phase(phis, area: float, omega_e: float, t_p: float = 1.0,
                            tol: float = 1e-9) -> np.ndarray:
    """Transfer-angle ratio theta(phi)/theta(0) for a modulation phase scan."""
    base = PulseSpec(scheme=Scheme.DE, area=area, t_p=t_p, omega_e=omega_e)
    angles = []
    for phi in phis:
        spec = replace(base, phi=float(phi))
        params = SystemParams(pulse=spec)
        u = propagate_unitary(params, -spec.window, spec.window, tol=tol)
        angles.append(transfer_angle(u.matrix[:, 0]))
    ref_params = SystemParams(pulse=base)
    ref = transfer_angle(
        propagate_unitary(ref_params, -base.window, base.window, tol=tol).matrix[:, 0]
    )
    return np.column_stack([np.asarray(phis, dtype=float), np.array(angles) / ref])


def coupling_scale_vs_mixing(alphas, area: float, omega_e: float, t_p: float = 1.0,
                             tol: float = 1e-9) -> np.ndarray:
    """Transfer-angle ratio theta(alpha)/theta(pi/4) for an amplitude-mix scan."""
    angles = []
    for alpha in alphas:
        spec = PulseSpec.from_mixing_angle(
            float(alpha), scheme=Scheme.DE, area=area, t_p=t_p, omega_e=omega_e
        )
        params = SystemParams(pulse=spec)
        u = propagate_unitary(params, -spec.window, spec.window, tol=tol)
        angles.append(transfer_angle(u.matrix[:, 0]))
    ref_spec = PulseSpec.from_mixing_angle(
        math.pi / 4.0, scheme=Scheme.DE, area=area, t_p=t_p, omega_e=omega_e
    )
    ref = transfer_angle(
        propagate_unitary(SystemParams(pulse=ref_spec), -ref_spec.window,
                          ref_spec.window, tol=tol).matrix[:, 0]
    )
    return np.column_stack([np.asarray(alphas, dtype=float), np.array(angles) / ref])
