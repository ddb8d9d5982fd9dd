"""Gaussian moment representation of a collective spin ensemble.

A state is the mean spin direction on the Bloch sphere plus a 2x2
covariance of the transverse fluctuations, expressed in a local tangent
frame.  The first tangent axis points along decreasing polar angle (it
coincides with +z when the mean spin lies in the equatorial plane, hence
the name ``delta_sz``), the second along increasing azimuth.  All spin
quantities are in units of hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "CollectiveSpinState",
    "DriftProcess",
    "NoiseModel",
    "DegenerateStateError",
    "make_css",
    "rotate",
    "rotate_and_transport",
    "shear",
    "squeezing_parameter",
    "apply_phase_diffusion",
    "apply_contrast_decay",
    "measure_sz",
    "tangent_frame",
    "rotation_matrix",
]

_UNIT_TOL = 1e-9
_EQUATOR_TOL = 1e-6


class DegenerateStateError(ValueError):
    """Raised when an operation needs spin length or contrast that is absent."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class CollectiveSpinState:
    """Collective spin ensemble in the Gaussian (moment) approximation.

    Parameters
    ----------
    s0 : float
        Total spin length (half the effective atom number).
    mean_theta, mean_phi : float
        Polar and azimuthal angle of the mean spin direction, radians.
        theta is measured from +z.
    contrast : float
        Fringe contrast in [0, 1]; the mean spin vector has length
        ``contrast * s0``.
    cov : (2, 2) ndarray
        Symmetric covariance of (delta_sz, delta_sphi) in the local
        tangent frame, spin units squared.
    detuning_offset : float
        Frozen per-shot detuning in rad/s (Monte Carlo mode only;
        zero in ensemble-moment propagation).
    """

    s0: float
    mean_theta: float
    mean_phi: float
    contrast: float
    cov: np.ndarray
    detuning_offset: float = 0.0
    # cumulative time already spent in free evolution; only non-exponential
    # contrast decay shapes need it (they are not memoryless)
    wait_elapsed: float = 0.0

    def __post_init__(self):
        if self.s0 <= 0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError(f"contrast must lie in [0, 1], got {self.contrast}")
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError(f"cov must be 2x2, got shape {cov.shape}")
        # scalar symmetry and PSD checks (2x2: diagonal and determinant)
        a, b, c, d = cov[0, 0], cov[0, 1], cov[1, 0], cov[1, 1]
        scale = 1.0 + abs(a) + abs(b) + abs(d)
        if abs(b - c) > 1e-9 * scale:
            raise ValueError("cov must be symmetric")
        if a < -1e-9 * scale or d < -1e-9 * scale or a * d - b * c < -1e-9 * scale * scale:
            raise ValueError("cov must be positive semidefinite")
        object.__setattr__(self, "cov", _readonly(cov))

    @property
    def mean_direction(self) -> np.ndarray:
        st, ct = math.sin(self.mean_theta), math.cos(self.mean_theta)
        sp, cp = math.sin(self.mean_phi), math.cos(self.mean_phi)
        return np.array([st * cp, st * sp, ct])

    @property
    def mean_vector(self) -> np.ndarray:
        return self.contrast * self.s0 * self.mean_direction


@dataclass(frozen=True)
class DriftProcess:
    """Slow frequency drift, an Ornstein-Uhlenbeck process in absolute units.

    ``amplitude`` is the stationary standard deviation, in Hz when
    ``units == "hz"`` or in gauss when ``units == "gauss"`` (converted
    through the field sensitivity of the clock transition).
    """

    enabled: bool = False
    amplitude: float = 0.7
    units: str = "hz"
    correlation_time_s: float = 200.0

    def __post_init__(self):
        if self.units not in ("hz", "gauss"):
            raise ValueError(f"drift units must be 'hz' or 'gauss', got {self.units!r}")
        if self.amplitude < 0:
            raise ValueError(f"drift amplitude must be >= 0, got {self.amplitude}")
        if self.correlation_time_s <= 0:
            raise ValueError(
                f"drift correlation time must be positive, got {self.correlation_time_s}"
            )

    def amplitude_hz(self, field_coeff: float) -> float:
        if self.units == "gauss":
            return self.amplitude * field_coeff
        return self.amplitude


@dataclass(frozen=True)
class NoiseModel:
    """Classical and technical noise acting on the ensemble.

    Parameters
    ----------
    var_omega : float
        Variance of the shot-to-shot frozen detuning, (rad/s)^2.
    t_coh : float
        1/e coherence time of the contrast, seconds.  ``inf`` disables decay.
    readout_var : float
        Additive detection variance on S_z, spin units squared.
    field_coeff : float
        Frequency sensitivity to magnetic field, Hz per gauss; used only
        to convert drift amplitudes given in field units.
    drift : DriftProcess
        Slow drift of the clock frequency (see the clock module).
    contrast_decay_shape : str
        ``"exponential"`` (memoryless) or ``"gaussian"``; sensitivity knob.
    """

    var_omega: float = 0.0
    t_coh: float = math.inf
    readout_var: float = 0.0
    field_coeff: float = 3.7e3
    drift: DriftProcess = field(default_factory=DriftProcess)
    contrast_decay_shape: str = "exponential"

    def __post_init__(self):
        if self.var_omega < 0:
            raise ValueError(f"var_omega must be >= 0, got {self.var_omega}")
        if self.t_coh <= 0:
            raise ValueError(f"t_coh must be positive, got {self.t_coh}")
        if self.readout_var < 0:
            raise ValueError(f"readout_var must be >= 0, got {self.readout_var}")
        if self.contrast_decay_shape not in ("exponential", "gaussian"):
            raise ValueError(
                "contrast_decay_shape must be 'exponential' or 'gaussian', "
                f"got {self.contrast_decay_shape!r}"
            )


def tangent_frame(theta: float, phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent basis (u1, u2) at direction (theta, phi).

    u1 points along decreasing polar angle (equals +z for an equatorial
    mean), u2 along increasing azimuth.  Well defined at the poles as
    long as the stored azimuth is used consistently.
    """
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    u1 = np.array([-ct * cp, -ct * sp, st])
    u2 = np.array([-sp, cp, 0.0])
    return u1, u2


def rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Right-handed 3D rotation about ``axis`` by ``angle`` (Rodrigues)."""
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if abs(norm - 1.0) > _UNIT_TOL:
        raise ValueError(f"rotation axis must be unit length, |axis| = {norm}")
    k = axis / norm
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return math.cos(angle) * np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * np.outer(k, k)


def make_css(s0: float, theta: float, phi: float, contrast: float = 1.0) -> CollectiveSpinState:
    """Coherent spin state: isotropic transverse variance |<S>|/2.

    The projection noise of an ensemble with mean spin length
    ``contrast * s0`` is ``contrast * s0 / 2`` in each transverse
    direction; partial contrast models imperfect preparation.
    """
    if s0 <= 0:
        raise ValueError(f"s0 must be positive, got {s0}")
    if not 0.0 < contrast <= 1.0:
        raise ValueError(f"contrast must lie in (0, 1], got {contrast}")
    v0 = contrast * s0 / 2.0
    return CollectiveSpinState(
        s0=s0, mean_theta=theta, mean_phi=phi, contrast=contrast, cov=v0 * np.eye(2)
    )


def rotate_and_transport(
    state: CollectiveSpinState, axis: np.ndarray, angle: float
) -> tuple[CollectiveSpinState, np.ndarray]:
    """Rotate the state and also return the 2x2 tangent transport matrix.

    The transport matrix maps fluctuation components in the old tangent
    frame to components in the frame at the rotated mean; it is
    orthogonal, so the covariance spectrum is preserved.
    """
    rot = rotation_matrix(axis, angle)
    n_new = rot @ state.mean_direction
    nz = min(1.0, max(-1.0, n_new[2]))
    theta_new = math.acos(nz)
    phi_new = math.atan2(n_new[1], n_new[0]) if abs(nz) < 1.0 else 0.0

    u1_old, u2_old = tangent_frame(state.mean_theta, state.mean_phi)
    u1_new, u2_new = tangent_frame(theta_new, phi_new)
    r1, r2 = rot @ u1_old, rot @ u2_old
    o = np.array([[u1_new @ r1, u1_new @ r2], [u2_new @ r1, u2_new @ r2]])
    cov_new = o @ state.cov @ o.T
    cov_new = 0.5 * (cov_new + cov_new.T)
    return replace(state, mean_theta=theta_new, mean_phi=phi_new, cov=cov_new), o


def rotate(state: CollectiveSpinState, axis: np.ndarray, angle: float) -> CollectiveSpinState:
    """Rigid rotation of the state about a unit ``axis`` by ``angle``.

    The mean direction rotates right-handedly; the covariance is carried
    along by parallel transport between the tangent frames at the old and
    new mean.  Spectrum, s0 and contrast are unchanged.
    """
    return rotate_and_transport(state, axis, angle)[0]


def shear(
    state: CollectiveSpinState,
    q: float,
    excess_area: float = 0.0,
    contrast_factor: float = 1.0,
) -> CollectiveSpinState:
    """Phenomenological one-axis-twisting shear about z.

    Applies ``cov -> M cov M^T + diag(0, excess_area * v0)`` with
    ``M = [[1, 0], [q, 1]]`` and ``v0 = contrast * s0 / 2`` (the input
    projection noise), then multiplies the contrast by
    ``contrast_factor``.  ``q`` is the dimensionless shear of the
    normalized coordinates, so for a fresh CSS the narrow-axis variance
    is ``v0 * (1 + q^2/2 - sqrt(q^2 + q^4/4))`` at zero excess area.
    Requires the mean spin in the equatorial plane.
    """
    if abs(state.mean_theta - math.pi / 2.0) > _EQUATOR_TOL:
        raise ValueError(
            "shear requires an equatorial mean spin; "
            f"|mean_theta - pi/2| = {abs(state.mean_theta - math.pi / 2.0):.3e}"
        )
    if excess_area < 0:
        raise ValueError(f"excess_area must be >= 0, got {excess_area}")
    if not 0.0 < contrast_factor <= 1.0:
        raise ValueError(f"contrast_factor must lie in (0, 1], got {contrast_factor}")
    v0 = state.contrast * state.s0 / 2.0
    m = np.array([[1.0, 0.0], [q, 1.0]])
    cov_new = m @ state.cov @ m.T
    cov_new[1, 1] += excess_area * v0
    cov_new = 0.5 * (cov_new + cov_new.T)
    return replace(state, cov=cov_new, contrast=state.contrast * contrast_factor)


def squeezing_parameter(
    state: CollectiveSpinState, direction: np.ndarray, c_in: float
) -> float:
    """Metrological squeezing parameter along a tangent-frame direction.

    ``zeta = 2 * Var(S along direction) * c_in / (s0 * contrast^2)``;
    values below 1 certify entanglement-enhanced phase resolution.
    ``direction`` is a unit vector in (delta_sz, delta_sphi) components.
    """
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > _UNIT_TOL:
        raise ValueError(f"direction must be unit length, |d| = {norm}")
    if state.contrast <= 0.0:
        raise DegenerateStateError("squeezing parameter undefined at zero contrast")
    if not 0.0 < c_in <= 1.0:
        raise ValueError(f"c_in must lie in (0, 1], got {c_in}")
    var = float(d @ state.cov @ d)
    return 2.0 * var * c_in / (state.s0 * state.contrast**2)


def apply_phase_diffusion(
    state: CollectiveSpinState,
    var_omega: float,
    t: float,
    monte_carlo: bool = False,
) -> CollectiveSpinState:
    """Shot-to-shot frozen detuning accumulated over a time ``t``.

    Ensemble-moment mode inflates the azimuthal variance by
    ``(contrast * s0)^2 * var_omega * t^2`` and leaves the mean alone.
    Monte Carlo mode instead advances the azimuth by the state's frozen
    ``detuning_offset * t`` (the covariance is untouched; averaging over
    shots reproduces the inflated moments).
    """
    if var_omega < 0:
        raise ValueError(f"var_omega must be >= 0, got {var_omega}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if monte_carlo:
        # Rotation about z: the tangent frame co-rotates, cov components
        # are unchanged, only the azimuth advances.
        return replace(state, mean_phi=state.mean_phi + state.detuning_offset * t)
    amp = state.contrast * state.s0
    cov_new = np.array(state.cov)
    cov_new[1, 1] += amp * amp * var_omega * t * t
    return replace(state, cov=cov_new)


def _decay_factor(shape: str, t: float, t_coh: float, elapsed: float) -> float:
    if math.isinf(t_coh):
        return 1.0
    if shape == "exponential":
        return math.exp(-t / t_coh)
    # gaussian decay is not memoryless: the factor for a wait segment
    # depends on how much free evolution already elapsed
    return math.exp(-(((elapsed + t) / t_coh) ** 2) + (elapsed / t_coh) ** 2)


def apply_contrast_decay(
    state: CollectiveSpinState,
    t: float,
    t_coh: float,
    shape: str = "exponential",
) -> CollectiveSpinState:
    """Coherence loss over a time ``t``: contrast shrinks, cov is untouched.

    Single-atom dephasing about z preserves each atom's population, so
    the z variance is unchanged; the azimuthal variance in spin units is
    kept as well (the phase-angle uncertainty grows as the mean spin
    shortens).  ``shape`` selects exp(-t/t_coh) or exp(-(t/t_coh)^2).
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t_coh <= 0:
        raise ValueError(f"t_coh must be positive, got {t_coh}")
    if shape not in ("exponential", "gaussian"):
        raise ValueError(f"unknown contrast decay shape {shape!r}")
    factor = _decay_factor(shape, t, t_coh, state.wait_elapsed)
    return replace(
        state,
        contrast=state.contrast * factor,
        wait_elapsed=state.wait_elapsed + t,
    )


def measure_sz(
    state: CollectiveSpinState, readout_var: float, rng: np.random.Generator
) -> float:
    """One destructive population-difference measurement.

    Returns a Gaussian sample with mean ``contrast * s0 * cos(mean_theta)``
    and variance ``cov[0, 0] + readout_var`` (the first tangent axis is
    the measured quadrature; it coincides with z for equatorial states).
    """
    if readout_var < 0:
        raise ValueError(f"readout_var must be >= 0, got {readout_var}")
    mean = state.contrast * state.s0 * math.cos(state.mean_theta)
    var = float(state.cov[0, 0]) + readout_var
    return float(rng.normal(mean, math.sqrt(var)))
