"""Exact collective-spin states in the Dicke basis.

Small-ensemble reference implementation used to validate the Gaussian
moment propagation: coherent states, one-axis twisting and rigid
rotations computed without any linearization.  Amplitudes are stored
over m = -S..S; the construction works in log space so binomial weights
stay finite at large S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .states import make_css, rotation_matrix, shear, squeezing_parameter

__all__ = [
    "MAX_SPIN",
    "DickeState",
    "SpinMoments",
    "dicke_css",
    "evolve_oat",
    "rotate_dicke",
    "moments",
    "min_transverse_variance",
    "zeta_from_moments",
    "OracleRow",
    "compare_shear_to_exact",
]

MAX_SPIN = 2.0e3


def _check_spin(spin: float) -> float:
    if spin <= 0 or abs(2.0 * spin - round(2.0 * spin)) > 1e-9:
        raise ValueError(f"spin must be a positive multiple of 1/2, got {spin}")
    if spin > MAX_SPIN:
        raise ValueError(f"spin {spin} exceeds the supported maximum {MAX_SPIN:.0f}")
    return round(2.0 * spin) / 2.0


@dataclass(frozen=True)
class DickeState:
    """Normalized amplitude vector over S_z eigenstates m = -S..S."""

    spin: float
    amps: np.ndarray

    def __post_init__(self):
        spin = _check_spin(self.spin)
        amps = np.asarray(self.amps, dtype=complex)
        dim = int(round(2.0 * spin)) + 1
        if amps.shape != (dim,):
            raise ValueError(f"amps must have length {dim}, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"amps must be normalized, |amps| = {norm}")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "spin", spin)
        object.__setattr__(self, "amps", amps)

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(-self.spin, self.spin + 0.5)


@dataclass(frozen=True)
class SpinMoments:
    """First and symmetrized second moments of the spin vector."""

    mean: np.ndarray
    cov: np.ndarray


def dicke_css(spin: float, theta: float, phi: float) -> DickeState:
    """Coherent spin state from binomial amplitudes.

    amps_m = sqrt(C(2S, S+m)) cos^(S+m)(theta/2) sin^(S-m)(theta/2)
             exp(-i m phi)

    Standard polar convention: theta = 0 returns |m=+S> and the mean
    spin is S (sin t cos p, sin t sin p, cos t).
    """
    spin = _check_spin(spin)
    two_s = int(round(2.0 * spin))
    k = np.arange(two_s + 1)  # amplitude index; m = k - S
    cos_pow = k
    sin_pow = two_s - k
    half = theta / 2.0
    cos_h, sin_h = math.cos(half), math.sin(half)
    # log-space magnitudes keep the binomial weights finite at large S;
    # a zero cos/sin factor zeroes every amplitude carrying its power
    log_mag = 0.5 * (gammaln(two_s + 1) - gammaln(k + 1) - gammaln(two_s - k + 1))
    if cos_h != 0.0:
        log_mag = log_mag + cos_pow * math.log(abs(cos_h))
    else:
        log_mag = np.where(cos_pow > 0, -np.inf, log_mag)
    if sin_h != 0.0:
        log_mag = log_mag + sin_pow * math.log(abs(sin_h))
    else:
        log_mag = np.where(sin_pow > 0, -np.inf, log_mag)
    # theta outside [0, pi] flips signs of odd cos/sin powers
    sign = np.sign(cos_h) ** (cos_pow % 2) * np.sign(sin_h) ** (sin_pow % 2)
    amps = sign * np.exp(log_mag - log_mag.max()) * np.exp(-1j * (k - spin) * phi)
    amps = amps / np.linalg.norm(amps)
    return DickeState(spin=spin, amps=amps)


def evolve_oat(state: DickeState, mu: float) -> DickeState:
    """One-axis twisting exp(-i mu S_z^2): pure phases in the Dicke basis."""
    m = state.m_values
    return DickeState(spin=state.spin, amps=state.amps * np.exp(-1j * mu * m * m))


@lru_cache(maxsize=2)
def _sy_eigensystem(two_s: int):
    # S_y = P T P* with P = diag(exp(i pi m / 2)) and T real symmetric
    # tridiagonal with off-diagonal -c_m/2; eigh of T gives a numerically
    # exact unitary for exp(-i beta S_y) at any supported spin
    spin = two_s / 2.0
    m = np.arange(-spin, spin + 0.5)
    c = np.sqrt(spin * (spin + 1.0) - m[:-1] * (m[:-1] + 1.0))
    w, v = eigh_tridiagonal(np.zeros(two_s + 1), -0.5 * c)
    phases = np.exp(1j * math.pi * m / 2.0)
    return w, v, phases


def _apply_y_rotation(spin: float, amps: np.ndarray, beta: float) -> np.ndarray:
    w, v, p = _sy_eigensystem(int(round(2.0 * spin)))
    work = np.conj(p) * amps
    work = v @ (np.exp(-1j * beta * w) * (v.T @ work))
    return p * work


def _euler_zyz(rot: np.ndarray) -> tuple[float, float, float]:
    """Angles (alpha, beta, gamma) with rot = Rz(alpha) Ry(beta) Rz(gamma)."""
    cb = min(1.0, max(-1.0, rot[2, 2]))
    beta = math.acos(cb)
    if math.sin(beta) > 1e-12:
        alpha = math.atan2(rot[1, 2], rot[0, 2])
        gamma = math.atan2(rot[2, 1], -rot[2, 0])
    elif cb > 0:  # pure z rotation
        alpha, beta, gamma = math.atan2(rot[1, 0], rot[0, 0]), 0.0, 0.0
    else:  # rotation by pi about an equatorial axis composed with z
        alpha, beta, gamma = math.atan2(-rot[1, 0], -rot[0, 0]), math.pi, 0.0
    return alpha, beta, gamma


def rotate_dicke(state: DickeState, axis: np.ndarray, angle: float) -> DickeState:
    """Rigid rotation exp(-i angle axis.S); same handedness as the Gaussian op.

    Decomposed as Rz(alpha) Ry(beta) Rz(gamma); the y rotation uses the
    eigensystem of the tridiagonal S_y generator, which is unitary to
    machine precision for every supported spin.
    """
    alpha, beta, gamma = _euler_zyz(rotation_matrix(np.asarray(axis, dtype=float), angle))
    m = state.m_values
    amps = np.exp(-1j * gamma * m) * state.amps
    amps = _apply_y_rotation(state.spin, amps, beta)
    amps = np.exp(-1j * alpha * m) * amps
    # unitary to float error; renormalize so downstream checks stay exact
    return DickeState(spin=state.spin, amps=amps / np.linalg.norm(amps))


def _ladder_apply(state: DickeState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectors S_x|psi>, S_y|psi>, S_z|psi>."""
    spin, a = state.spin, state.amps
    m = state.m_values
    c = np.sqrt(spin * (spin + 1.0) - m[:-1] * (m[:-1] + 1.0))
    up = np.zeros_like(a)
    up[1:] = c * a[:-1]  # S_+
    dn = np.zeros_like(a)
    dn[:-1] = c * a[1:]  # S_-
    return 0.5 * (up + dn), -0.5j * (up - dn), m * a


def moments(state: DickeState) -> SpinMoments:
    """Mean spin vector and symmetrized 3x3 covariance, computed exactly."""
    sx, sy, sz = _ladder_apply(state)
    vecs = [sx, sy, sz]
    a = state.amps
    mean = np.array([np.real(np.vdot(a, v)) for v in vecs])
    cov = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            second = np.real(np.vdot(vecs[i], vecs[j]))
            cov[i, j] = cov[j, i] = second - mean[i] * mean[j]
    return SpinMoments(mean=mean, cov=cov)


def min_transverse_variance(mom: SpinMoments) -> float:
    """Smallest variance over directions perpendicular to the mean spin."""
    norm = np.linalg.norm(mom.mean)
    if norm == 0.0:
        raise ValueError("mean spin vanishes; transverse plane undefined")
    n = mom.mean / norm
    seed = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = seed - (seed @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    basis = np.stack([e1, e2])
    block = basis @ mom.cov @ basis.T
    return float(np.linalg.eigvalsh(block)[0])


def zeta_from_moments(mom: SpinMoments, spin: float, c_in: float = 1.0) -> float:
    """Squeezing parameter of an exact state: 2 Var_min c_in / (S C^2)."""
    contrast = np.linalg.norm(mom.mean) / spin
    if contrast <= 0:
        raise ValueError("zero mean spin; squeezing parameter undefined")
    return 2.0 * min_transverse_variance(mom) * c_in / (spin * contrast**2)


@dataclass(frozen=True)
class OracleRow:
    """One point of the Gaussian-shear vs exact-twisting comparison."""

    spin: float
    q_eff: float
    mu: float
    zeta_gaussian: float
    zeta_exact: float
    rel_discrepancy: float
    warn_only: bool


def compare_shear_to_exact(
    spins=(25, 50, 100),
    q_values=(0.25, 0.5, 1.0),
    warn_q: float = 1.0,
) -> list[OracleRow]:
    """Dual-route check of the phenomenological shear.

    For each spin S and effective shear q the exact route twists a CSS by
    mu = q / (2S) and evaluates zeta from exact moments; the Gaussian
    route applies the linearized shear to a moment-level CSS.  Rows with
    q above ``warn_q`` are marked warn-only: the Gaussian picture is
    expected to break down there.
    """
    rows = []
    for spin in spins:
        for q in q_values:
            mu = q / (2.0 * spin)
            exact = evolve_oat(dicke_css(spin, math.pi / 2.0, 0.0), mu)
            zeta_exact = zeta_from_moments(moments(exact), spin)
            gauss = shear(make_css(float(spin), math.pi / 2.0, 0.0, 1.0), q)
            eigvals, eigvecs = np.linalg.eigh(gauss.cov)
            direction = eigvecs[:, 0] / np.linalg.norm(eigvecs[:, 0])
            zeta_gauss = squeezing_parameter(gauss, direction, c_in=1.0)
            rel = abs(zeta_gauss - zeta_exact) / zeta_exact if zeta_exact > 0 else 0.0
            if q == 0.0:
                rel = abs(zeta_gauss - zeta_exact)
            rows.append(
                OracleRow(
                    spin=float(spin),
                    q_eff=float(q),
                    mu=mu,
                    zeta_gaussian=float(zeta_gauss),
                    zeta_exact=float(zeta_exact),
                    rel_discrepancy=float(rel),
                    warn_only=bool(q > warn_q),
                )
            )
    return rows
