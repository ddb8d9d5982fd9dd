"""Closed-loop clock simulation and stability analysis.

Each clock cycle runs one Ramsey shot against a local oscillator whose
detuning is white shot-to-shot noise plus a slowly drifting component
(Ornstein-Uhlenbeck), converts the measured population difference to a
phase estimate and records one fractional frequency sample.  The Allan
deviation of that record is the figure of merit; a closed-form standard
quantum limit line provides the reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import chi2

from .sequences import PresetParams, preset_sequence
from .states import (
    CollectiveSpinState,
    NoiseModel,
    apply_contrast_decay,
    apply_phase_diffusion,
    make_css,
    rotate,
    shear,
)

__all__ = [
    "ClockConfig",
    "FrequencyRecord",
    "AllanCurve",
    "run_clock",
    "allan_deviation",
    "sql_reference",
    "white_frequency_noise",
    "random_walk_frequency_noise",
    "fit_loglog_slope",
    "RB87_HYPERFINE_HZ",
]

# ground-state hyperfine splitting of the standard microwave clock atom
RB87_HYPERFINE_HZ = 6.834682611e9

_Y = np.array([0.0, 1.0, 0.0])
_ASIN_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class ClockConfig:
    """Parameters of one simulated clock run.

    ``input_state`` selects the ensemble interrogated every cycle:
    ``"css"`` uses an unentangled state of contrast ``contrast``;
    ``"squeezed"`` uses a phase-squeezed input whose readout phase
    variance is ``zeta_net`` times that of an ideal full-contrast CSS
    clock with the same atom number (so the Allan variance gain over
    that reference is 1/zeta_net).  ``quantum_projection_noise`` exists
    for diagnostics: switching it off removes the quantum readout noise
    so the noise budget can be exercised term by term.
    """

    omega0: float = 2.0 * math.pi * RB87_HYPERFINE_HZ
    t_r: float = 200e-6
    t_cycle: float = 9.0
    n_cycles: int = 20000
    input_state: str = "css"
    s0: float = 1.75e4
    contrast: float = 1.0
    c_in: float = 0.9
    contrast_factor: float = 0.9
    excess_area: float = 2.0
    zeta_net: float = 1.0 / 2.8
    noise: NoiseModel = field(default_factory=NoiseModel)
    quantum_projection_noise: bool = True

    def __post_init__(self):
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if not 0.0 < self.t_r < self.t_cycle:
            raise ValueError(
                f"need 0 < t_r < t_cycle, got t_r={self.t_r}, t_cycle={self.t_cycle}"
            )
        if self.n_cycles < 2:
            raise ValueError(f"n_cycles must be at least 2, got {self.n_cycles}")
        if self.input_state not in ("css", "squeezed"):
            raise ValueError(f"input_state must be 'css' or 'squeezed', got {self.input_state!r}")
        if self.zeta_net < 0:
            raise ValueError(f"zeta_net must be >= 0, got {self.zeta_net}")

    @property
    def duty_factor(self) -> float:
        return self.t_r / self.t_cycle


@dataclass(frozen=True)
class FrequencyRecord:
    """Fractional frequency samples y_k from consecutive clock cycles."""

    y: np.ndarray
    t_cycle: float
    n_fringe_excursions: int = 0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or len(y) < 2:
            raise ValueError("y must be a 1-d array with at least two samples")
        if self.t_cycle <= 0:
            raise ValueError(f"t_cycle must be positive, got {self.t_cycle}")
        y = y.copy()
        y.flags.writeable = False
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class AllanCurve:
    """Overlapping Allan deviation with per-point confidence half-widths."""

    taus: np.ndarray
    sigma: np.ndarray
    ci: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        ci = np.asarray(self.ci, dtype=float)
        if not (taus.shape == sigma.shape == ci.shape) or taus.ndim != 1:
            raise ValueError("taus, sigma and ci must be 1-d arrays of equal length")
        if np.any(np.diff(taus) <= 0) or np.any(taus <= 0):
            raise ValueError("taus must be positive and strictly increasing")
        for name, arr in (("taus", taus), ("sigma", sigma), ("ci", ci)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _prepare_input_state(config: ClockConfig) -> CollectiveSpinState:
    """State at the start of the interrogation window (mean along +y).

    Mirrors the preparation prefix of the corresponding preset sequence:
    pump to the spin-down pole, pi/2 pulse about x, and for the squeezed
    input a calibrated shear plus orientation rotation.  Built once per
    run; only the wait and conversion depend on the cycle.
    """
    if config.input_state == "css":
        state = make_css(config.s0, math.pi, 0.0)
        state = rotate(state, np.array([1.0, 0.0, 0.0]), math.pi / 2.0)
        # static signal contrast: coherence loss shrinks the fringe but
        # leaves the projection noise at the full s0/2
        return replace(state, contrast=config.contrast)
    params = PresetParams(
        s0=config.s0,
        c_in=config.c_in,
        zeta0_target=config.zeta_net * config.c_in,
        excess_area=config.excess_area,
        contrast_factor=config.contrast_factor,
    )
    steps = preset_sequence("phase_squeezed_ramsey", 0.0, params)
    state = None
    for step in steps:
        name = type(step).__name__
        if name == "Pump":
            state = make_css(step.s0, step.theta, step.phi, step.contrast)
        elif name == "Pulse":
            state = rotate(state, np.asarray(step.axis), step.angle)
        elif name == "Shear":
            state = shear(state, step.q, step.excess_area, step.contrast_factor)
        elif name in ("Wait", "Readout"):
            break
    return state


def _ramsey_shot(
    state0: CollectiveSpinState,
    detuning: float,
    t_r: float,
    noise: NoiseModel,
    rng: np.random.Generator,
    projection_noise: bool,
) -> float:
    """One interrogation: wait, convert, measure.  Returns the S_z sample."""
    st = replace(state0, detuning_offset=detuning)
    st = apply_contrast_decay(st, t_r, noise.t_coh, noise.contrast_decay_shape)
    st = apply_phase_diffusion(st, 0.0, t_r, monte_carlo=True)
    st = rotate(st, _Y, math.pi / 2.0)
    mean = st.contrast * st.s0 * math.cos(st.mean_theta)
    var = (float(st.cov[0, 0]) if projection_noise else 0.0) + noise.readout_var
    return mean + float(rng.normal(0.0, 1.0)) * math.sqrt(var)


def run_clock(config: ClockConfig, master_seed: int) -> FrequencyRecord:
    """Simulate ``n_cycles`` consecutive clock cycles.

    Per cycle the oscillator detuning is a fresh white draw of variance
    ``noise.var_omega`` plus the current value of the drift process; the
    phase estimate ``asin(S_z / (C s0))`` (clamped just inside +-1, with
    fringe excursions counted) divided by ``omega0 * t_r`` gives the
    fractional frequency sample.  Every cycle owns the RNG stream
    (master_seed, cycle_index); the drift recursion consumes one
    innovation per cycle so the record is reproducible sample by sample.
    """
    state0 = _prepare_input_state(config)
    noise = config.noise
    # contrast the phase estimator divides by: the known model value at
    # readout time (operationally a calibration input)
    probe = apply_contrast_decay(state0, config.t_r, noise.t_coh, noise.contrast_decay_shape)
    c_read = probe.contrast

    drift_sigma = 0.0
    rho = 0.0
    if noise.drift.enabled:
        drift_sigma = 2.0 * math.pi * noise.drift.amplitude_hz(noise.field_coeff)
        rho = math.exp(-config.t_cycle / noise.drift.correlation_time_s)
    white_sigma = math.sqrt(noise.var_omega)

    y = np.empty(config.n_cycles)
    excursions = 0
    drift_value = 0.0
    scale = 1.0 / (config.omega0 * config.t_r)
    for k in range(config.n_cycles):
        rng = np.random.default_rng([master_seed, k])
        white = float(rng.normal(0.0, 1.0)) * white_sigma
        innovation = float(rng.normal(0.0, 1.0))
        if noise.drift.enabled:
            if k == 0:
                drift_value = drift_sigma * innovation  # stationary start
            else:
                drift_value = rho * drift_value + drift_sigma * math.sqrt(1.0 - rho * rho) * innovation
        sz = _ramsey_shot(
            state0, white + drift_value, config.t_r, noise, rng,
            config.quantum_projection_noise,
        )
        ratio = sz / (c_read * config.s0)
        if abs(ratio) >= 1.0:
            excursions += 1
            ratio = math.copysign(_ASIN_CLAMP, ratio)
        y[k] = math.asin(ratio) * scale
    return FrequencyRecord(y=y, t_cycle=config.t_cycle, n_fringe_excursions=excursions)


def _white_fm_edf(n_samples: int, m: int) -> float:
    """Equivalent degrees of freedom of the overlapping estimator.

    Standard white-frequency-noise approximation; conservative enough
    for the random-walk regime probed by the drift floor.
    """
    edf = (3.0 * (n_samples - 1) / (2.0 * m) - 2.0 * (n_samples - 2) / n_samples) * (
        4.0 * m * m
    ) / (4.0 * m * m + 5.0)
    return max(edf, 1.0)


def allan_deviation(record: FrequencyRecord, taus: np.ndarray) -> AllanCurve:
    """Overlapping Allan deviation at the requested averaging times.

    ``taus`` must be strictly increasing multiples of the cycle time,
    each short enough that at least one overlapping difference exists
    (tau <= n_samples * t_cycle / 2).  Confidence half-widths come from
    the chi-squared distribution of the variance estimate with the
    white-noise equivalent degrees of freedom (68 percent interval).
    """
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) == 0:
        raise ValueError("taus must be a non-empty 1-d array")
    if np.any(np.diff(taus) <= 0):
        raise ValueError("taus must be strictly increasing")
    y = record.y
    n = len(y)
    t0 = record.t_cycle
    # the estimator only sees differences; centering keeps the running
    # sums small so a constant record comes out exactly zero
    cum = np.concatenate([[0.0], np.cumsum(y - y.mean())])
    sigma = np.empty(len(taus))
    ci = np.empty(len(taus))
    for i, tau in enumerate(taus):
        m_float = tau / t0
        m = int(round(m_float))
        if m < 1 or abs(m_float - m) > 1e-6:
            raise ValueError(f"tau = {tau} is not a positive multiple of t_cycle = {t0}")
        if n - 2 * m + 1 < 1:
            raise ValueError(f"record too short for tau = {tau} ({n} samples)")
        # d_j = sum_{i=j+m}^{j+2m-1} y_i - sum_{i=j}^{j+m-1} y_i
        d = cum[2 * m :] - 2.0 * cum[m : n - m + 1] + cum[: n - 2 * m + 1]
        avar = float(np.sum(d * d)) / (2.0 * m * m * (n - 2 * m + 1))
        sigma[i] = math.sqrt(avar)
        edf = _white_fm_edf(n, m)
        lo = sigma[i] * math.sqrt(edf / chi2.ppf(1.0 - 0.15865, edf))
        hi = sigma[i] * math.sqrt(edf / chi2.ppf(0.15865, edf))
        ci[i] = 0.5 * (hi - lo)
    return AllanCurve(taus=taus, sigma=sigma, ci=ci)


def sql_reference(config: ClockConfig):
    """Projection-noise-limited stability of an ideal unentangled clock.

    Returns a callable sigma(tau) = (1 / (omega0 t_r)) sqrt(1 / (2 s0))
    sqrt(t_cycle / tau): full contrast, no technical noise, same atom
    number and duty cycle.
    """
    coeff = (
        math.sqrt(1.0 / (2.0 * config.s0))
        * math.sqrt(config.t_cycle)
        / (config.omega0 * config.t_r)
    )

    def sigma(tau):
        return coeff / np.sqrt(np.asarray(tau, dtype=float))

    return sigma


def white_frequency_noise(n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Independent Gaussian fractional frequency samples (slope -1/2)."""
    if n < 2 or sigma < 0:
        raise ValueError("need n >= 2 and sigma >= 0")
    return sigma * rng.standard_normal(n)


def random_walk_frequency_noise(
    n: int, step_sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Integrated Gaussian steps: random-walk frequency noise (slope +1/2)."""
    if n < 2 or step_sigma < 0:
        raise ValueError("need n >= 2 and step_sigma >= 0")
    return np.cumsum(step_sigma * rng.standard_normal(n))


def fit_loglog_slope(taus: np.ndarray, sigma: np.ndarray) -> float:
    """Least-squares slope of log10(sigma) against log10(tau)."""
    taus = np.asarray(taus, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(taus <= 0) or np.any(sigma <= 0):
        raise ValueError("taus and sigma must be positive for a log-log fit")
    return float(np.polyfit(np.log10(taus), np.log10(sigma), 1)[0])
