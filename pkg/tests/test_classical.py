import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kmslab.background import CauchyData, load_preset, random_data
from kmslab.classical import (
    Evolution,
    NonStaticError,
    commutator_kernel,
    commutator_kernel_evolved,
    energy,
    evolve,
    evolve_rk4,
    frequency_split,
    symplectic_form,
)
from kmslab.spectral import assemble_C, assemble_phase_space

EVOLUTIONS = {}


def evolution_for(name):
    if name not in EVOLUTIONS:
        lat, bg, _ = load_preset(name)
        ps = assemble_phase_space(lat, bg)
        EVOLUTIONS[name] = (lat, bg, ps, Evolution(ps))
    return EVOLUTIONS[name]


@pytest.mark.parametrize("name", ["FLAT16", "LAPSE16", "SHIFT16"])
def test_evolve_matches_rk4(name, rng):
    lat, bg, ps, ev = evolution_for(name)
    d = random_data(lat, rng)
    got = evolve(ev, d, 1.3)
    ref = evolve_rk4(ps, d, 1.3, steps=4000)
    np.testing.assert_allclose(got.vector(), ref.vector().real, atol=1e-9 * np.linalg.norm(d.vector()))


def test_evolve_real_in_real_out(shift16, rng):
    lat, bg = shift16
    _, _, _, ev = evolution_for("SHIFT16")
    out = evolve(ev, random_data(lat, rng), 0.4)
    assert not np.iscomplexobj(out.phi0)


def test_time_derivative_of_field(shift16, rng):
    # d/dt phi0 = N^x d_x phi0 + N phi1 at t = 0
    lat, bg = shift16
    _, _, ps, ev = evolution_for("SHIFT16")
    d = random_data(lat, rng)
    eps = 1e-5
    fd = (evolve(ev, d, eps).phi0 - evolve(ev, d, -eps).phi0) / (2 * eps)
    want = ps.G @ d.phi0 + bg.lapse * d.phi1
    np.testing.assert_allclose(fd, want, atol=1e-8 * np.linalg.norm(want))


@given(st.sampled_from(["FLAT16", "LAPSE16", "SHIFT16"]), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_group_law(name, s, t, seed):
    lat, bg, ps, ev = evolution_for(name)
    d = random_data(lat, np.random.default_rng(seed))
    a = evolve(ev, evolve(ev, d, s), t).vector()
    b = evolve(ev, d, s + t).vector()
    np.testing.assert_allclose(a, b, atol=1e-10 * np.linalg.norm(d.vector()))


@given(st.sampled_from(["FLAT16", "LAPSE16", "SHIFT16"]), st.floats(0, 10), st.integers(0, 2**32 - 1))
def test_energy_and_symplectic_form_conserved(name, t, seed):
    lat, bg, ps, ev = evolution_for(name)
    rng = np.random.default_rng(seed)
    d, e = random_data(lat, rng), random_data(lat, rng)
    E0 = energy(ps, d)
    assert abs(energy(ps, evolve(ev, d, t)) - E0) <= 1e-9 * E0
    s0 = symplectic_form(lat, d, e)
    s1 = symplectic_form(lat, evolve(ev, d, t), evolve(ev, e, t))
    assert abs(s1 - s0) <= 1e-9 * max(1.0, abs(s0))


def test_energy_of_zero_data_is_zero(flat16):
    lat, bg = flat16
    ps = assemble_phase_space(lat, bg)
    assert energy(ps, CauchyData(np.zeros(16), np.zeros(16))) == 0.0


def test_symplectic_form_antisymmetric(flat16, rng):
    lat, _ = flat16
    d, e = random_data(lat, rng), random_data(lat, rng)
    assert symplectic_form(lat, d, e) == pytest.approx(-symplectic_form(lat, e, d), abs=1e-14)
    assert symplectic_form(lat, d, d) == 0


# --- frequency split ---------------------------------------------------------


def test_split_of_time_symmetric_datum(lapse16, rng):
    lat, bg = lapse16
    C = assemble_C(lat, bg)
    phi0 = rng.standard_normal(16)
    fp, fm = frequency_split(C, bg, CauchyData(phi0, np.zeros(16)))
    np.testing.assert_allclose(fp, phi0 / 2, atol=1e-15)
    np.testing.assert_allclose(fm, phi0 / 2, atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_split_reconstructs_phi0(seed):
    lat, bg, _, _ = evolution_for("LAPSE16")
    C = assemble_C(lat, bg)
    d = random_data(lat, np.random.default_rng(seed), complex_=True)
    fp, fm = frequency_split(C, bg, d)
    np.testing.assert_allclose(fp + fm, d.phi0, atol=1e-13)


def test_single_mode_split(flat16):
    lat, bg = flat16
    C = assemble_C(lat, bg)
    k = 3
    u, lam = C.eigenvectors[:, k], C.eigenvalues[k]
    # phi1 = +i sqrt(lambda) u: f_- vanishes and f_+ = u
    fp, fm = frequency_split(C, bg, CauchyData(u, 1j * math.sqrt(lam) * u))
    np.testing.assert_allclose(fp, u, atol=1e-13)
    np.testing.assert_allclose(fm, 0, atol=1e-13)
    fp, fm = frequency_split(C, bg, CauchyData(u, -1j * math.sqrt(lam) * u))
    np.testing.assert_allclose(fp, 0, atol=1e-13)


def test_split_requires_static(shift16):
    lat, bg = shift16
    C = assemble_C(lat, bg)
    with pytest.raises(NonStaticError):
        frequency_split(C, bg, random_data(lat, np.random.default_rng(0)))


@pytest.mark.parametrize("t", [0.3, 1.7, 6.0])
def test_evolve_agrees_with_mode_solution(lapse16, rng, t):
    lat, bg = lapse16
    C = assemble_C(lat, bg)
    _, _, _, ev = evolution_for("LAPSE16")
    d = random_data(lat, rng)
    fp, fm = frequency_split(C, bg, d)
    sN = np.sqrt(bg.lapse)
    U, s = C.eigenvectors, np.sqrt(C.eigenvalues)

    def prop(sign, f):
        c = U.conj().T @ (lat.vol_weight * f / sN)
        return sN * (U @ (np.exp(sign * 1j * t * s) * c))

    phi_t = prop(+1, fp) + prop(-1, fm)
    np.testing.assert_allclose(evolve(ev, d, t).phi0, phi_t.real, atol=1e-9 * np.linalg.norm(d.vector()))


# --- commutator function -----------------------------------------------------


def test_commutator_zero_at_equal_times(lapse16):
    lat, bg = lapse16
    C = assemble_C(lat, bg)
    assert np.max(np.abs(commutator_kernel(C, bg, 0.0).matrix)) <= 1e-12


@given(st.floats(-6, 6))
def test_commutator_antisymmetry(dt):
    lat, bg, _, _ = evolution_for("LAPSE16")
    C = assemble_C(lat, bg)
    K = commutator_kernel(C, bg, dt).matrix
    np.testing.assert_allclose(K, -commutator_kernel(C, bg, -dt).matrix.T, atol=1e-12)


def test_commutator_time_derivative_is_delta(flat16):
    lat, bg = flat16
    C = assemble_C(lat, bg)
    target = np.diag(1 / lat.vol_weight)
    errs = []
    for eps in (1e-2, 5e-3):
        # derivative in the second time argument, dt = t - t'
        d = -(commutator_kernel(C, bg, eps).matrix - commutator_kernel(C, bg, -eps).matrix) / (2 * eps)
        errs.append(np.max(np.abs(d - target)))
    assert errs[1] < errs[0]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_commutator_solves_field_equation(lapse16):
    lat, bg = lapse16
    C = assemble_C(lat, bg)
    sN = np.sqrt(bg.lapse)
    eps, dt = 1e-3, 0.8
    E = lambda t: commutator_kernel(C, bg, t).matrix
    d2 = (E(dt + eps) - 2 * E(dt) + E(dt - eps)) / eps**2
    spatial = (sN[:, None] * C.matrix / sN[None, :]) @ E(dt)
    assert np.max(np.abs(d2 + spatial)) <= 1e-4 * np.max(np.abs(spatial))


@pytest.mark.parametrize("dt", [-2.3, 0.7, 4.1])
def test_commutator_closed_form_matches_evolution(lapse16, dt):
    lat, bg = lapse16
    C = assemble_C(lat, bg)
    _, _, _, ev = evolution_for("LAPSE16")
    np.testing.assert_allclose(commutator_kernel(C, bg, dt).matrix, commutator_kernel_evolved(ev, dt).matrix, atol=1e-12)


def test_commutator_from_sigma_of_point_data(shift16):
    # E(dt)(x, y) = sigma(T_{-dt}(0, -delta_x), (0, -delta_y)), checked entrywise
    lat, bg = shift16
    _, _, _, ev = evolution_for("SHIFT16")
    n, w = lat.n_sites, lat.vol_weight
    K = commutator_kernel_evolved(ev, 0.9).matrix
    for x, y in [(0, 0), (3, 5), (10, 2)]:
        dx = CauchyData(np.zeros(n), -np.eye(n)[x] / w[x])
        dy = CauchyData(np.zeros(n), -np.eye(n)[y] / w[y])
        assert K[x, y] == pytest.approx(symplectic_form(lat, evolve(ev, dx, -0.9), dy).real, abs=1e-12)
