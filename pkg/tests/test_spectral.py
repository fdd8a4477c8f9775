import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kmslab.background import Background, CauchyData, SurfaceLattice, central_gradient, random_data
from kmslab.spectral import (
    AssemblyError,
    SpectralDomainError,
    WeightedOperator,
    assemble_C,
    assemble_phase_space,
    bose,
    cosh_ratio,
    coth,
    inv_sqrt,
    power,
    sqrt,
    thermal_cos,
)


def flat_laplacian_eigs(n, length, mass2=1.0):
    # eigenvalues of the periodic three-point Laplacian: (2/dx)^2 sin^2(pi k / n)
    dx = length / n
    return np.sort(mass2 + (2 / dx) ** 2 * np.sin(np.pi * np.arange(n) / n) ** 2)


def test_flat16_spectrum_matches_fourier_oracle(flat16):
    lat, bg = flat16
    C = assemble_C(lat, bg)
    np.testing.assert_allclose(C.eigenvalues, flat_laplacian_eigs(16, 2 * math.pi), rtol=0, atol=1e-12)
    assert C.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    assert C.eigenvalues[-1] == pytest.approx(1 + 256 / math.pi**2, abs=1e-10)


def test_constant_mode_is_lowest(flat16):
    lat, bg = flat16
    C = assemble_C(lat, bg)
    u = C.eigenvectors[:, 0]
    np.testing.assert_allclose(np.abs(u), 1 / math.sqrt(2 * math.pi), rtol=1e-12)


def test_eigenvectors_are_weighted_orthonormal(preset):
    _, lat, bg = preset
    C = assemble_C(lat, bg)
    U = C.eigenvectors
    G = U.conj().T @ (lat.vol_weight[:, None] * U)
    np.testing.assert_allclose(G, np.eye(lat.n_sites), atol=1e-12)
    assert C.reconstruction_error() <= 1e-10 * np.linalg.norm(C.matrix)


def test_C_is_bounded_below_by_potential_term(preset):
    _, lat, bg = preset
    C = assemble_C(lat, bg)
    assert C.eigenvalues[0] >= np.min(bg.V * bg.lapse**2) - 1e-12


@given(st.integers(0, 2**32 - 1))
def test_sqrt_squares_to_C(seed):
    lat = SurfaceLattice(12, 3.0, h_xx=1.5)
    rng = np.random.default_rng(seed)
    bg = Background(lat, 1 + rng.random(12), 0.0, 0.5 + rng.random(12))
    C = assemble_C(lat, bg)
    f = rng.standard_normal(12)
    np.testing.assert_allclose(C.apply(sqrt(), C.apply(sqrt(), f)), C.matrix @ f, atol=1e-9 * np.linalg.norm(C.matrix @ f))
    np.testing.assert_allclose(C.apply(inv_sqrt(), C.apply(sqrt(), f)), f, atol=1e-12 * np.linalg.norm(f) * 100)
    g = rng.standard_normal(12)
    assert C.symmetry_defect(f, g) <= 1e-10 * np.linalg.norm(C.matrix)


def test_function_matrix_of_power_one_is_C(lapse16):
    lat, bg = lapse16
    C = assemble_C(lat, bg)
    np.testing.assert_allclose(C.function_matrix(power(1)), C.matrix, atol=1e-11)
    np.testing.assert_allclose(C.function_matrix(power(-1)) @ C.matrix, np.eye(16), atol=1e-11)


def test_kernel_sandwich_definition(lapse16):
    lat, bg = lapse16
    C = assemble_C(lat, bg)
    l, r = 1 + np.arange(16.0), np.cos(np.arange(16.0))
    K = C.kernel(inv_sqrt(), l, r)
    f = np.sin(np.arange(16.0))
    # (Q f)(x) = sum_y w_y K(x, y) f(y) with Q = diag(l) C^-1/2 diag(r)
    np.testing.assert_allclose(K @ (lat.vol_weight * f), l * C.apply(inv_sqrt(), r * f), atol=1e-12)


def test_domain_error_names_eigenvalue():
    op = WeightedOperator(np.diag([2.0, 0.0, -1.0]), np.ones(3))
    with pytest.raises(SpectralDomainError, match="eigenvalue"):
        op.apply(inv_sqrt(), np.ones(3))


def test_non_symmetric_operator_rejected():
    with pytest.raises(AssemblyError, match="not weighted-symmetric"):
        WeightedOperator(np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones(2))


@pytest.mark.parametrize("a", [0.1, 1.0, 5.0, 200.0])
def test_coth_stable(a):
    lam = np.array([0.25, 1.0, 9.0])
    want = 1 / np.tanh(a * np.sqrt(lam))
    with np.errstate(over="raise", divide="raise", invalid="raise"):
        got = coth(a)(lam)
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_bose_matches_textbook():
    lam = np.array([1.0, 4.0])
    np.testing.assert_allclose(bose(2.0)(lam), 1 / (np.exp(2 * np.sqrt(lam)) - 1), rtol=1e-14)
    with np.errstate(over="raise", divide="raise", invalid="raise"):
        assert bose(1e4)(lam)[0] == 0.0


def test_cosh_ratio_matches_direct():
    lam = np.array([0.3, 2.0, 7.0])
    s = np.sqrt(lam)
    np.testing.assert_allclose(cosh_ratio(0.4, 1.3)(lam), np.cosh(0.4 * s) / np.sinh(1.3 * s), rtol=1e-13)


@pytest.mark.parametrize("z", [0.0, 0.7, -1.3 - 0.2j, 2.0 - 0.5j, 0.3 - 1.0j])
@pytest.mark.parametrize("R", [1 / (2 * math.pi), 1.0])
def test_thermal_cos_matches_complex_cos(z, R):
    lam = np.array([0.5, 1.0, 3.0])
    want = [cmath.cos((z + 1j * math.pi * R) * math.sqrt(l)) / (2 * math.sqrt(l) * math.sinh(math.pi * R * math.sqrt(l))) for l in lam]
    np.testing.assert_allclose(thermal_cos(z, R)(lam), want, rtol=1e-12)


def test_thermal_cos_strip_and_ground_limit():
    with pytest.raises(SpectralDomainError):
        thermal_cos(0.3j, 1.0)
    lam = np.array([1.0, 4.0])
    g = thermal_cos(0.5 - 0.1j, math.inf)(lam)
    np.testing.assert_allclose(g, np.exp(-1j * (0.5 - 0.1j) * np.sqrt(lam)) / (2 * np.sqrt(lam)), rtol=1e-15)
    # large R approaches the ground kernel
    np.testing.assert_allclose(thermal_cos(0.5, 40.0)(lam), np.exp(-0.5j * np.sqrt(lam)) / (2 * np.sqrt(lam)), rtol=1e-12)


# --- phase space -------------------------------------------------------------


def test_A_equals_half_sigma_H(preset):
    _, lat, bg = preset
    ps = assemble_phase_space(lat, bg)
    assert ps.sigma_residual <= 1e-10
    assert np.min(ps.A_eigenvalues) > 0


def test_He_spectrum_is_pm_sqrt_C_when_static(static_preset):
    _, lat, bg = static_preset
    ps = assemble_phase_space(lat, bg)
    om = np.sqrt(assemble_C(lat, bg).eigenvalues)
    np.testing.assert_allclose(np.sort(ps.he_values[ps.pos]), om, rtol=1e-10)
    np.testing.assert_allclose(np.sort(-ps.he_values[ps.neg]), om, rtol=1e-10)


def test_He_spectrum_symmetric_with_shift(shift16):
    lat, bg = shift16
    ps = assemble_phase_space(lat, bg)
    # complex conjugation maps the +mu eigenspace to -mu
    np.testing.assert_allclose(np.sort(ps.he_values[ps.pos]), np.sort(-ps.he_values[ps.neg]), rtol=1e-10)
    assert ps.pos.sum() == ps.neg.sum() == 16
    assert ps.mass_gap() > 1.0


def test_projectors_partition_identity(shift16):
    lat, bg = shift16
    ps = assemble_phase_space(lat, bg)
    P = ps.P_plus + ps.P_minus
    np.testing.assert_allclose(P, np.eye(32), atol=1e-11)
    np.testing.assert_allclose(ps.P_plus @ ps.P_plus, ps.P_plus, atol=1e-11)


def test_energy_of_constant_is_pi(flat16):
    lat, bg = flat16
    ps = assemble_phase_space(lat, bg)
    assert ps.energy(CauchyData(np.ones(16), np.zeros(16))) == pytest.approx(math.pi, abs=1e-10)


def test_energy_matches_quadrature_of_integrand(shift16, rng):
    lat, bg = shift16
    ps = assemble_phase_space(lat, bg)
    d = random_data(lat, rng)
    n, dx = lat.n_sites, lat.spacing
    N, Nx, V, w, h = bg.lapse, bg.shift_vec, bg.V, lat.vol_weight, lat.h_xx
    p0, p1 = d.phi0, d.phi1
    E = 0.0
    for f in range(n):
        # face between sites f and f+1
        g = (p0[(f + 1) % n] - p0[f]) / dx
        coef = 0.5 * (N[f] * h[f] * w[f] + N[(f + 1) % n] * h[(f + 1) % n] * w[(f + 1) % n])
        E += 0.5 * coef * g * g
    Dc = central_gradient(lat) @ p0
    for i in range(n):
        E += 0.5 * w[i] * (V[i] * N[i] * p0[i] ** 2 + N[i] * p1[i] ** 2) + w[i] * p1[i] * Nx[i] * Dc[i]
    assert ps.energy(d) == pytest.approx(E, rel=1e-12)


def test_mass_gap_of_unit_mass_flat_circle():
    lat = SurfaceLattice(6, 1.0)
    bg = Background(lat, 1.0, 0.0, 1.0)
    ps = assemble_phase_space(lat, bg)
    assert ps.mass_gap() == pytest.approx(1.0, abs=1e-12)
