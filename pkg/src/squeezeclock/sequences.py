"""Pulse-sequence engine: presets, Monte Carlo shots, moment propagation.

A sequence is an ordered list of steps acting on one collective-spin
state per shot.  Two independent execution routes exist: ``run_shots``
samples the classical noise per shot and propagates real geometry
(nonlinear in the accrued phase), while ``propagate_moments`` carries an
augmented Gaussian covariance that treats the frozen detuning as an
extra latent variable.  The two must agree to statistical precision;
tests enforce that.

Readout convention: the final conversion pulse of a Ramsey sequence is
applied about the nominal mean-spin axis, which parks the mean on the
fringe zero crossing and maps accrued phase linearly into the measured
population difference.  A pulse about the orthogonal in-plane axis
would park the readout on a fringe extremum, where phase noise only
enters at second order and no variance-based squeezing estimate is
possible.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .states import (
    CollectiveSpinState,
    NoiseModel,
    apply_contrast_decay,
    apply_phase_diffusion,
    make_css,
    measure_sz,
    rotate,
    rotate_and_transport,
    shear,
)

__all__ = [
    "Pump",
    "Pulse",
    "Shear",
    "Wait",
    "Echo",
    "Readout",
    "SequenceError",
    "PresetParams",
    "ShotResult",
    "ZetaEstimate",
    "MomentForecast",
    "PRESET_KINDS",
    "solve_shear_strength",
    "preset_sequence",
    "validate_sequence",
    "run_shots",
    "estimate_zeta",
    "propagate_moments",
]

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])

PRESET_KINDS = (
    "css_ramsey",
    "phase_squeezed_ramsey",
    "number_squeezed_hold",
    "echo_ramsey",
)


class SequenceError(ValueError):
    """Malformed pulse sequence."""


@dataclass(frozen=True)
class Pump:
    """State preparation: fresh CSS at (theta, phi) with the given size."""

    theta: float
    phi: float
    s0: float
    contrast: float


@dataclass(frozen=True)
class Pulse:
    """Rigid rotation about a lab-frame unit axis (the local oscillator)."""

    axis: tuple[float, float, float]
    angle: float


@dataclass(frozen=True)
class Shear:
    """Cavity-feedback style shear about z (see states.shear)."""

    q: float
    excess_area: float = 0.0
    contrast_factor: float = 1.0


@dataclass(frozen=True)
class Wait:
    """Free evolution: detuning phase accrual and contrast decay."""

    duration: float


@dataclass(frozen=True)
class Echo:
    """Pi pulse about the nominal mean-spin equatorial axis."""

    axis: tuple[float, float, float]


@dataclass(frozen=True)
class Readout:
    """Destructive S_z measurement; must terminate the sequence."""


SequenceStep = Pump | Pulse | Shear | Wait | Echo | Readout


@dataclass(frozen=True)
class PresetParams:
    """Ensemble and squeezing parameters shared by the canned sequences.

    ``shear_q`` overrides the calibrated shear strength; when None the
    shear is solved so the squeezed presets read out ``zeta0_target`` at
    zero interrogation time, including the contrast cost of the shear.
    """

    s0: float = 1.5e4
    c_in: float = 0.9
    zeta0_target: float = 0.4
    excess_area: float = 2.0
    contrast_factor: float = 0.9
    shear_q: float | None = None


@dataclass(frozen=True)
class ShotResult:
    sz_sample: float
    contrast_at_readout: float
    sampled_detuning: float
    shot_index: int


@dataclass(frozen=True)
class ZetaEstimate:
    """Squeezing parameter from a set of shots, with chi^2 uncertainty."""

    zeta: float
    stderr: float
    contrast: float
    sample_variance: float
    n_shots: int


@dataclass(frozen=True)
class MomentForecast:
    """Readout statistics predicted by ensemble-moment propagation.

    ``classical_readout_var`` is the part of the measured S_z variance
    contributed by shot-to-shot detuning noise (spin^2 units); echo
    sequences drive it to zero.
    """

    mean_sz: float
    var_sz: float
    contrast: float
    zeta: float
    classical_readout_var: float


def solve_shear_strength(
    zeta0_target: float, excess_area: float, contrast_factor: float
) -> float:
    """Shear q such that the oriented state reads out ``zeta0_target``.

    The measured squeezing at zero interrogation time is
    ``lambda_min / (v0 * contrast_factor^2)``, so the narrow-axis
    eigenvalue factor must equal ``L = zeta0_target * contrast_factor^2``.
    For cov/v0 = [[1, q], [q, 1 + q^2 + excess_area]] the eigenvalue sum
    and product give q^2 = (1 + excess_area)/L + L - 2 - excess_area.
    """
    if not 0.0 < zeta0_target < 1.0:
        raise ValueError(f"zeta0_target must lie in (0, 1), got {zeta0_target}")
    lam = zeta0_target * contrast_factor**2
    q_sq = (1.0 + excess_area) / lam + lam - 2.0 - excess_area
    if q_sq <= 0.0:
        raise ValueError(
            f"no shear reaches zeta0={zeta0_target} with excess_area={excess_area}, "
            f"contrast_factor={contrast_factor}"
        )
    return math.sqrt(q_sq)


def _orientation_angles(params: PresetParams, q: float) -> tuple[float, float, float]:
    """Rotation angles about the mean axis aligning the squeezed ellipse.

    Returns (rho_number, rho_phase, lambda_min): the in-plane rotation by
    rho maps a tangent direction at angle gamma to gamma - rho, so the
    narrow eigenvector (angle gamma_min from the z-like axis) aligns with
    z under rho_number = gamma_min and with the azimuth under
    rho_phase = gamma_min - pi/2 (mod pi).
    """
    nominal = make_css(params.s0, math.pi, 0.0, params.c_in)
    nominal = rotate(nominal, _X, math.pi / 2.0)
    sheared = shear(nominal, q, params.excess_area, params.contrast_factor)
    eigvals, eigvecs = np.linalg.eigh(sheared.cov)
    narrow = eigvecs[:, 0]
    gamma = math.atan2(narrow[1], narrow[0])
    if gamma <= -math.pi / 2.0:
        gamma += math.pi
    elif gamma > math.pi / 2.0:
        gamma -= math.pi
    rho_number = gamma
    rho_phase = gamma - math.pi / 2.0
    if rho_phase <= -math.pi / 2.0:
        rho_phase += math.pi

    # guard the sign convention: the oriented covariance must place the
    # narrow eigenvalue in the intended slot
    lam_min, lam_max = eigvals[0], eigvals[1]
    num = rotate(sheared, _Y, rho_number)
    pha = rotate(sheared, _Y, rho_phase)
    tol = 1e-9 * lam_max
    if abs(num.cov[0, 0] - lam_min) > tol or abs(pha.cov[1, 1] - lam_min) > tol:
        raise RuntimeError("ellipse orientation convention violated")
    return rho_number, rho_phase, float(lam_min)


def preset_sequence(kind: str, t_r: float, params: PresetParams) -> list[SequenceStep]:
    """Build one of the four canned clock sequences.

    All presets pump into the spin-down pole and rotate to the equator
    with a pi/2 pulse about x, leaving the nominal mean along +y; every
    later mean-axis rotation is therefore a static pulse about y.
    """
    if kind not in PRESET_KINDS:
        raise SequenceError(f"unknown preset {kind!r}; choose from {PRESET_KINDS}")
    if t_r < 0:
        raise SequenceError(f"interrogation time must be >= 0, got {t_r}")
    y_axis = (0.0, 1.0, 0.0)
    head: list[SequenceStep] = [
        Pump(theta=math.pi, phi=0.0, s0=params.s0, contrast=params.c_in),
        Pulse(axis=(1.0, 0.0, 0.0), angle=math.pi / 2.0),
    ]
    if kind == "css_ramsey":
        return head + [
            Wait(t_r),
            Pulse(axis=y_axis, angle=math.pi / 2.0),
            Readout(),
        ]

    q = params.shear_q
    if q is None:
        q = solve_shear_strength(
            params.zeta0_target, params.excess_area, params.contrast_factor
        )
    rho_number, rho_phase, _ = _orientation_angles(params, q)
    squeeze: list[SequenceStep] = [
        Shear(q=q, excess_area=params.excess_area, contrast_factor=params.contrast_factor)
    ]
    if kind == "number_squeezed_hold":
        return head + squeeze + [
            Pulse(axis=y_axis, angle=rho_number),
            Wait(t_r),
            Readout(),
        ]
    if kind == "phase_squeezed_ramsey":
        return head + squeeze + [
            Pulse(axis=y_axis, angle=rho_phase),
            Wait(t_r),
            Pulse(axis=y_axis, angle=math.pi / 2.0),
            Readout(),
        ]
    # echo_ramsey: phase-squeezed sequence with the wait split around a
    # pi pulse about the nominal mean axis
    return head + squeeze + [
        Pulse(axis=y_axis, angle=rho_phase),
        Wait(t_r / 2.0),
        Echo(axis=y_axis),
        Wait(t_r / 2.0),
        Pulse(axis=y_axis, angle=math.pi / 2.0),
        Readout(),
    ]


def validate_sequence(steps: list[SequenceStep]) -> None:
    """Structural checks; raises SequenceError on violation."""
    if not steps or not isinstance(steps[0], Pump):
        raise SequenceError("sequence must start with a Pump step")
    if sum(isinstance(s, Pump) for s in steps) != 1:
        raise SequenceError("sequence must contain exactly one Pump step")
    n_readout = sum(isinstance(s, Readout) for s in steps)
    if n_readout != 1 or not isinstance(steps[-1], Readout):
        raise SequenceError("sequence must end with its single Readout step")
    for s in steps:
        if isinstance(s, Wait) and s.duration < 0:
            raise SequenceError(f"negative Wait duration {s.duration}")
        if isinstance(s, (Pulse, Echo)):
            norm = np.linalg.norm(s.axis)
            if abs(norm - 1.0) > 1e-9:
                raise SequenceError(f"pulse axis must be unit length, |axis| = {norm}")


def _run_single_shot(
    steps: list[SequenceStep],
    noise: NoiseModel,
    rng: np.random.Generator,
    shot_index: int,
    detuning: float | None = None,
) -> tuple[ShotResult, CollectiveSpinState]:
    """Monte Carlo execution of one shot; returns the result and final state.

    The detuning draw always consumes one standard normal even when
    var_omega is zero, so runs that differ only in var_omega share the
    remaining stream (useful for paired comparisons).
    """
    if detuning is None:
        detuning = float(rng.normal(0.0, 1.0)) * math.sqrt(noise.var_omega)
    state: CollectiveSpinState | None = None
    sample = math.nan
    for step in steps:
        if isinstance(step, Pump):
            state = make_css(step.s0, step.theta, step.phi, step.contrast)
            state = replace(state, detuning_offset=detuning)
        elif isinstance(step, Pulse):
            state = rotate(state, np.asarray(step.axis), step.angle)
        elif isinstance(step, Shear):
            state = shear(state, step.q, step.excess_area, step.contrast_factor)
        elif isinstance(step, Wait):
            state = apply_contrast_decay(
                state, step.duration, noise.t_coh, noise.contrast_decay_shape
            )
            state = apply_phase_diffusion(state, noise.var_omega, step.duration, monte_carlo=True)
        elif isinstance(step, Echo):
            state = rotate(state, np.asarray(step.axis), math.pi)
        elif isinstance(step, Readout):
            sample = measure_sz(state, noise.readout_var, rng)
    return (
        ShotResult(
            sz_sample=sample,
            contrast_at_readout=state.contrast,
            sampled_detuning=detuning,
            shot_index=shot_index,
        ),
        state,
    )


def _shot_rng(master_seed: int, shot_index: int) -> np.random.Generator:
    # one independent, order-free stream per shot: results depend only on
    # (master_seed, shot_index), never on scheduling
    return np.random.default_rng([master_seed, shot_index])


def run_shots(
    steps: list[SequenceStep],
    noise: NoiseModel,
    n_shots: int,
    master_seed: int,
    n_threads: int = 1,
    detunings: np.ndarray | None = None,
) -> list[ShotResult]:
    """Monte Carlo ensemble of independent shots.

    ``n_threads`` partitions the shot range across a thread pool and can
    only change wall-clock time: every shot owns an RNG stream keyed on
    (master_seed, shot_index), so outputs are identical for any thread
    count.  ``detunings`` optionally overrides the sampled per-shot
    detuning (used by the clock loop, which adds slow drift).
    """
    validate_sequence(steps)
    if n_shots <= 0:
        raise ValueError(f"n_shots must be positive, got {n_shots}")
    if n_threads <= 0:
        raise ValueError(f"n_threads must be positive, got {n_threads}")
    if detunings is not None and len(detunings) != n_shots:
        raise ValueError(f"need {n_shots} detunings, got {len(detunings)}")

    results: list[ShotResult | None] = [None] * n_shots

    def run_range(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            det = None if detunings is None else float(detunings[i])
            results[i] = _run_single_shot(steps, noise, _shot_rng(master_seed, i), i, det)[0]

    if n_threads == 1:
        run_range(0, n_shots)
    else:
        chunk = -(-n_shots // n_threads)
        bounds = [(lo, min(lo + chunk, n_shots)) for lo in range(0, n_shots, chunk)]
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(lambda b: run_range(*b), bounds))
    return results  # type: ignore[return-value]


def estimate_zeta(
    results: list[ShotResult],
    s0: float,
    c_in: float,
    readout_var: float = 0.0,
    subtract_readout_variance: bool = True,
) -> ZetaEstimate:
    """Squeezing parameter from measured samples.

    ``zeta = 2 Var(S_z) c_in / (s0 C^2)`` with C the mean contrast at
    readout; the known detection variance is subtracted first unless
    disabled.  The standard error follows from the chi^2 statistics of a
    sample variance: stderr = zeta * sqrt(2 / (n - 1)).
    """
    if len(results) < 2:
        raise ValueError("need at least two shots to estimate a variance")
    sz = np.array([r.sz_sample for r in results])
    contrast = float(np.mean([r.contrast_at_readout for r in results]))
    if contrast <= 0:
        raise ValueError("zero contrast at readout; zeta undefined")
    var = float(np.var(sz, ddof=1))
    if subtract_readout_variance:
        var = max(var - readout_var, 0.0)
    n = len(results)
    zeta = 2.0 * var * c_in / (s0 * contrast**2)
    return ZetaEstimate(
        zeta=zeta,
        stderr=zeta * math.sqrt(2.0 / (n - 1)),
        contrast=contrast,
        sample_variance=var,
        n_shots=n,
    )


def _propagate_augmented(
    steps: list[SequenceStep], noise: NoiseModel, var_omega: float
) -> tuple[CollectiveSpinState, float, np.ndarray]:
    state: CollectiveSpinState | None = None
    c_in = 1.0
    sigma = np.zeros((4, 4))

    def fold_classical() -> None:
        # convert accrued azimuth angle to a spin-unit displacement
        kappa = state.contrast * state.s0 * math.sin(state.mean_theta)
        f = np.eye(4)
        f[1, 2] = kappa
        f[2, 2] = 0.0
        sigma[:] = f @ sigma @ f.T

    for step in steps:
        if isinstance(step, Pump):
            state = make_css(step.s0, step.theta, step.phi, step.contrast)
            c_in = step.contrast
            sigma[:] = 0.0
            sigma[:2, :2] = state.cov
            sigma[3, 3] = var_omega
        elif isinstance(step, Pulse):
            fold_classical()
            state, o = rotate_and_transport(state, np.asarray(step.axis), step.angle)
            t = np.eye(4)
            t[:2, :2] = o
            sigma[:] = t @ sigma @ t.T
        elif isinstance(step, Shear):
            v0 = state.contrast * state.s0 / 2.0
            state = shear(state, step.q, step.excess_area, step.contrast_factor)
            t = np.eye(4)
            t[1, 0] = step.q
            sigma[:] = t @ sigma @ t.T
            sigma[1, 1] += step.excess_area * v0
        elif isinstance(step, Wait):
            state = apply_contrast_decay(
                state, step.duration, noise.t_coh, noise.contrast_decay_shape
            )
            t = np.eye(4)
            t[2, 3] = step.duration
            sigma[:] = t @ sigma @ t.T
        elif isinstance(step, Echo):
            state, o = rotate_and_transport(state, np.asarray(step.axis), math.pi)
            t = np.eye(4)
            t[:2, :2] = o
            t[2, 2] = -1.0
            sigma[:] = t @ sigma @ t.T
        elif isinstance(step, Readout):
            fold_classical()
    return state, c_in, sigma


def propagate_moments(steps: list[SequenceStep], noise: NoiseModel) -> MomentForecast:
    """Ensemble-moment propagation with the detuning as a latent variable.

    Tracks the joint covariance of (delta_sz, delta_sphi, a, omega) where
    ``a`` is the classical azimuth accrued from the frozen detuning omega.
    Waits add t*omega to a; an echo reflects a; pulses fold a into the
    azimuthal spin fluctuation with the current mean spin length before
    rotating.  The fold-at-pulse rule makes echo cancellation exact and
    keeps a invisible to a bare S_z readout, matching the Monte Carlo
    route shot for shot.
    """
    validate_sequence(steps)
    state, c_in, sigma = _propagate_augmented(steps, noise, noise.var_omega)
    quantum_plus_classical = float(sigma[0, 0])
    if noise.var_omega > 0.0:
        _, _, sigma_quantum = _propagate_augmented(steps, noise, 0.0)
        classical = quantum_plus_classical - float(sigma_quantum[0, 0])
    else:
        classical = 0.0
    mean_sz = state.contrast * state.s0 * math.cos(state.mean_theta)
    zeta = 2.0 * quantum_plus_classical * c_in / (state.s0 * state.contrast**2)
    return MomentForecast(
        mean_sz=mean_sz,
        var_sz=quantum_plus_classical + noise.readout_var,
        contrast=state.contrast,
        zeta=zeta,
        classical_readout_var=classical,
    )
