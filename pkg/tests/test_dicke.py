"""Exact symmetric-subspace reference: CSS construction, twisting, rotations."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from squeezeclock.dicke import (
    MAX_SPIN,
    DickeState,
    compare_shear_to_exact,
    dicke_css,
    evolve_oat,
    min_transverse_variance,
    moments,
    rotate_dicke,
    zeta_from_moments,
)

spins = st.sampled_from([0.5, 1.0, 1.5, 2.0, 5.0, 12.5, 20.0])
thetas = st.floats(0.0, math.pi)
phis = st.floats(-math.pi, math.pi)


def spin_matrices(spin):
    """Dense S_x, S_y, S_z in the ascending m = -S..+S ordering of DickeState."""
    m = np.arange(-spin, spin + 0.5)
    dim = len(m)
    sz = np.diag(m)
    sp = np.zeros((dim, dim))
    for i in range(dim - 1):  # S+ |m> = c |m+1>
        sp[i + 1, i] = math.sqrt(spin * (spin + 1) - m[i] * (m[i] + 1))
    sx = 0.5 * (sp + sp.T)
    sy = -0.5j * (sp - sp.T)
    return sx, sy, sz


@given(spins, thetas, phis)
def test_css_is_normalized(spin, theta, phi):
    s = dicke_css(spin, theta, phi)
    assert abs(np.vdot(s.amps, s.amps).real - 1.0) < 1e-12


@given(spins, st.floats(0.05, math.pi - 0.05), phis)
def test_css_moments(spin, theta, phi):
    mom = moments(dicke_css(spin, theta, phi))
    n = np.array([
        math.sin(theta) * math.cos(phi),
        math.sin(theta) * math.sin(phi),
        math.cos(theta),
    ])
    assert np.allclose(mom.mean, spin * n, atol=1e-9 * spin)
    # transverse variance of a CSS is exactly S/2 in any transverse direction
    assert min_transverse_variance(mom) == pytest.approx(spin / 2.0, rel=1e-9)


def test_css_pole_states():
    north = dicke_css(10.0, 0.0, 0.4)
    assert abs(abs(north.amps[-1]) - 1.0) < 1e-12  # m = +S only
    south = dicke_css(10.0, math.pi, 0.4)
    assert abs(abs(south.amps[0]) - 1.0) < 1e-12


def test_css_zeta_is_unity():
    for spin in (25.0, 50.0, 100.0):
        mom = moments(dicke_css(spin, math.pi / 2.0, 0.0))
        assert abs(zeta_from_moments(mom, spin) - 1.0) < 1e-9


@given(spins, st.floats(0.0, 0.3))
def test_oat_preserves_norm_and_sz_variance(spin, mu):
    s = dicke_css(spin, math.pi / 2.0, 0.0)
    t = evolve_oat(s, mu)
    assert abs(np.vdot(t.amps, t.amps).real - 1.0) < 1e-12
    m0, m1 = moments(s), moments(t)
    assert m1.cov[2, 2] == pytest.approx(m0.cov[2, 2], rel=1e-9)
    assert m1.mean[2] == pytest.approx(0.0, abs=1e-9 * spin)


@given(st.sampled_from([2.0, 5.0, 10.0, 25.0]), st.floats(0.0, 0.5))
def test_oat_contrast_closed_form(spin, mu):
    # <S_x> after twisting an x-pointing CSS: S cos^(2S-1)(mu)
    t = evolve_oat(dicke_css(spin, math.pi / 2.0, 0.0), mu)
    want = spin * math.cos(mu) ** (int(2 * spin) - 1)
    assert moments(t).mean[0] == pytest.approx(want, abs=1e-9 * spin)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([0.5, 1.0, 2.5, 6.0]),
    thetas, phis,
    st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
        lambda v: np.linalg.norm(v) > 0.1
    ),
    st.floats(-math.pi, math.pi),
)
def test_rotation_matches_dense_exponential(spin, theta, phi, axis, angle):
    axis = np.asarray(axis) / np.linalg.norm(axis)
    state = dicke_css(spin, theta, phi)
    fast = rotate_dicke(state, axis, angle)
    sx, sy, sz = spin_matrices(spin)
    u = expm(-1j * angle * (axis[0] * sx + axis[1] * sy + axis[2] * sz))
    dense = u @ state.amps
    # global phase is unphysical: compare via overlap
    overlap = abs(np.vdot(dense, fast.amps))
    assert overlap == pytest.approx(1.0, abs=1e-10)


@given(st.sampled_from([5.0, 25.0]), thetas, phis)
def test_rotation_moves_moments_as_vectors(spin, theta, phi):
    state = dicke_css(spin, theta, phi)
    axis = np.array([0.0, 1.0, 0.0])
    angle = 0.7
    mom0 = moments(state)
    mom1 = moments(rotate_dicke(state, axis, angle))
    c, s = math.cos(angle), math.sin(angle)
    r = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    assert np.allclose(mom1.mean, r @ mom0.mean, atol=1e-9 * spin)
    assert np.allclose(mom1.cov, r @ mom0.cov @ r.T, atol=1e-8 * spin)


def test_moments_cov_is_symmetric_psd():
    t = evolve_oat(dicke_css(30.0, math.pi / 2.0, 0.3), 0.02)
    mom = moments(rotate_dicke(t, np.array([0.0, 0.0, 1.0]), 0.5))
    assert np.allclose(mom.cov, mom.cov.T, atol=1e-10)
    assert np.linalg.eigvalsh(mom.cov).min() > -1e-9


def test_oracle_comparison_default_grid():
    rows = compare_shear_to_exact((25.0, 50.0, 100.0), (0.25, 0.5, 1.0), warn_q=1.0)
    assert len(rows) == 9
    assert all(not r.warn_only for r in rows)
    worst = max(r.rel_discrepancy for r in rows)
    # deterministic: largest Gaussian-vs-exact gap sits at S=25, q=1
    assert worst == pytest.approx(0.0318, abs=5e-4)
    assert worst < 0.05
    exact_smaller = [r for r in rows if r.zeta_gaussian < r.zeta_exact]
    assert len(exact_smaller) == 9  # linearized shear is always optimistic here


def test_oracle_flags_strong_shear_as_warn_only():
    rows = compare_shear_to_exact((50.0,), (3.0,), warn_q=1.0)
    (row,) = rows
    assert row.warn_only
    assert row.rel_discrepancy > 0.05  # expected Gaussian breakdown, not a failure


def test_spin_validation():
    with pytest.raises(ValueError):
        dicke_css(0.3, 0.0, 0.0)  # not a multiple of 1/2
    with pytest.raises(ValueError):
        dicke_css(MAX_SPIN * 2, 0.0, 0.0)
    with pytest.raises(ValueError):
        DickeState(2.0, np.zeros(3))  # wrong amplitude count


def test_large_spin_css_stable():
    s = dicke_css(2.0e3, math.pi / 2.0, 0.0)
    assert np.all(np.isfinite(s.amps))
    mom = moments(s)
    assert mom.mean[0] == pytest.approx(2.0e3, rel=1e-9)
