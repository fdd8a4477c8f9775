"""The eleven acceptance criteria as callable checks.

Every check returns a CriterionResult; none raises on a failed comparison.
Seeds are explicit and all random data come from numpy Generators.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .background import Background, CauchyData, SurfaceLattice, load_preset, random_data
from .classical import Evolution, commutator_kernel, energy, symplectic_form, symplectic_matrix
from .euclid import CylinderLattice, green_closed_form, green_direct, green_mode_sum, wick_rotate
from .gibbs import build_fock, gibbs_weyl_expectation, project, quartic_coefficient
from .spectral import assemble_C, assemble_phase_space, inv_sqrt
from .thermal import (
    STATIC,
    STATIONARY,
    corrupt_state,
    ccr_defect,
    ground_state,
    kms_state,
    kms_verify,
    static_ground,
    static_kms,
    stationary_ground,
    stationary_kms,
    weyl_expectation,
)

DEFAULT_SEED = 20240611
PRESETS = ("FLAT16", "LAPSE16", "SHIFT16")
STATIC_PRESETS = ("FLAT16", "LAPSE16")


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:>2}. {self.name}: value={self.value:.3e} threshold={self.threshold:.3e} {self.detail}".rstrip()


def _preset(name: str) -> tuple[SurfaceLattice, Background]:
    lat, bg, _ = load_preset(name)
    return lat, bg


def _timed(fn: Callable[..., CriterionResult]) -> Callable[..., CriterionResult]:
    def wrapper(*args, **kwargs) -> CriterionResult:
        t0 = time.perf_counter()
        r = fn(*args, **kwargs)
        return CriterionResult(r.number, r.name, r.value, r.threshold, r.passed, r.detail, time.perf_counter() - t0)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _vec(d: CauchyData) -> np.ndarray:
    return d.vector()


@_timed
def ccr_closure(seed: int = DEFAULT_SEED, pairs: int = 50) -> CriterionResult:
    """Canonical commutator on 50 complex pairs for ground and KMS states of every preset."""
    worst = 0.0
    for k, name in enumerate(PRESETS):
        lat, bg = _preset(name)
        rng = np.random.default_rng([seed, 1, k])
        states = [ground_state(lat, bg), kms_state(lat, bg, 1.0), kms_state(lat, bg, 2 * math.pi)]
        if bg.is_static():
            states += [stationary_ground(lat, bg), stationary_kms(lat, bg, 1.0)]
        data = [(_vec(random_data(lat, rng, True)), _vec(random_data(lat, rng, True))) for _ in range(pairs)]
        for st in states:
            for f, g in data:
                worst = max(worst, ccr_defect(st, f, g))
    tol = 1e-10
    return CriterionResult(1, "CCR closure", worst, tol, worst <= tol, f"{len(PRESETS)} presets, {pairs} pairs")


def negative_control_datum(lat: SurfaceLattice, bg: Background) -> np.ndarray:
    """Field-slot datum (0, u_0), u_0 the lowest eigenvector of C (normalised)."""
    C = assemble_C(lat, bg)
    u = C.eigenvectors[:, 0].real
    return np.concatenate([np.zeros_like(u), u])


@_timed
def kms_boundary(seed: int = DEFAULT_SEED, pairs: int = 5) -> CriterionResult:
    """KMS boundary residuals on seeded pairs plus a corrupted-state negative control."""
    tol, control = 1e-9, 1e-3
    worst, weakest_control = 0.0, math.inf
    for k, name in enumerate(STATIC_PRESETS):
        lat, bg = _preset(name)
        rng = np.random.default_rng([seed, 2, k])
        data = [(_vec(random_data(lat, rng)), _vec(random_data(lat, rng))) for _ in range(pairs)]
        x = negative_control_datum(lat, bg)
        for beta in (0.5, 1.0, 2 * math.pi):
            st = kms_state(lat, bg, beta)
            bad = corrupt_state(st, 1.01)
            for t in (0.0, 0.7, 2.3):
                for f, g in data:
                    r = kms_verify(st, f, g, t)
                    worst = max(worst, r.one_particle, r.weyl, r.real_axis)
            weakest_control = min(weakest_control, kms_verify(bad, x, x, 0.7).one_particle)
    ok = worst <= tol and weakest_control > control
    return CriterionResult(
        2, "KMS boundary identity", worst, tol, ok, f"corrupted control min={weakest_control:.3e} (needs > {control:g})"
    )


def gibbs_test_data(lat: SurfaceLattice, bg: Background, modes: np.ndarray, rng: np.random.Generator, scale: float = 0.8):
    """Real data whose ground one-particle image lies in the span of ``modes``."""
    C = assemble_C(lat, bg)
    U = C.eigenvectors[:, modes].real
    sN = np.sqrt(bg.lapse)
    a, b = scale * rng.standard_normal(len(modes)), scale * rng.standard_normal(len(modes))
    return np.concatenate([sN * (U @ a), (U @ b) / sN])


@_timed
def gibbs_equivalence(seed: int = DEFAULT_SEED, samples: int = 5) -> CriterionResult:
    """Truncated Fock Gibbs state against the KMS Weyl functional (3 modes, n_max = 25, beta = 1)."""
    lat, bg = _preset("FLAT16")
    beta = 1.0
    g0 = ground_state(lat, bg)
    st = kms_state(lat, bg, beta)
    ft = build_fock(g0.frequencies, 3, 25, beta)
    rng = np.random.default_rng([seed, 3])
    worst_excess, worst_err, worst_quartic = -math.inf, 0.0, 0.0
    for _ in range(samples):
        f = gibbs_test_data(lat, bg, ft.modes, rng)
        budget = 1e-6 + ft.leakage_bound + project(ft, g0, f).discarded_weight
        err = abs(gibbs_weyl_expectation(ft, g0, f) - weyl_expectation(st, f))
        worst_err = max(worst_err, err)
        worst_excess = max(worst_excess, err - budget)
        worst_quartic = max(worst_quartic, quartic_coefficient(ft, g0, f))
    ok = worst_excess <= 0 and worst_quartic <= 1e-6
    return CriterionResult(
        3, "Gibbs/KMS equivalence", worst_err, 1e-6, ok, f"quartic={worst_quartic:.3e} leakage={ft.leakage_bound:.1e} dim={ft.dim}"
    )


@_timed
def wick_consistency() -> CriterionResult:
    """Wick-rotated kernels against the Lorentzian KMS state and commutator."""
    tol, tol_R = 1e-10, 1e-12
    worst, worst_E, worst_R = 0.0, 0.0, 0.0
    for name in STATIC_PRESETS:
        lat, bg = _preset(name)
        C = assemble_C(lat, bg)
        for R in (1 / (2 * math.pi), 1.0):
            wr = wick_rotate(bg, R, C)
            st = kms_state(lat, bg, 2 * math.pi * R)
            for dt in (0.0, 0.5, 1.7):
                worst = max(worst, float(np.max(np.abs(wr.omega(dt) - st.blocks(dt)[0, 0]))))
            for dt in (-1.7, -0.5, 0.0, 0.5, 1.7):
                E = commutator_kernel(C, bg, dt).matrix
                worst_E = max(worst_E, float(np.max(np.abs(wr.E_minus(dt) - wr.E_plus(dt) - E))))
        w1, w2 = wick_rotate(bg, 1.0, C), wick_rotate(bg, 2.0, C)
        for dt in (-1.7, -0.5, 0.5, 1.7):
            worst_R = max(
                worst_R,
                float(np.max(np.abs(w1.E_plus(dt) - w2.E_plus(dt)))),
                float(np.max(np.abs(w1.E_minus(dt) - w2.E_minus(dt)))),
            )
    ok = worst <= tol and worst_E <= tol and worst_R <= tol_R
    return CriterionResult(4, "Wick-rotation consistency", max(worst, worst_E), tol, ok, f"R-independence={worst_R:.3e} (<= {tol_R:g})")


def _euclid_errors(lat, bg, R: float):
    C = assemble_C(lat, bg)
    cf = green_closed_form(R, bg, C)
    beta = 2 * math.pi * R
    taus = (0.0, beta / 4, beta / 2)
    direct = []
    for nt in (128, 256, 512):
        g = green_direct(CylinderLattice(R, nt, lat), bg, C=C)
        direct.append(max(float(np.max(np.abs(g.kernel(t) - cf.kernel(t)))) for t in taus))
    modes = [float(np.max(np.abs(green_mode_sum(R, bg, n, C).kernel(0.0) - cf.kernel(0.0)))) for n in (100, 1000, 10000)]
    return direct, modes


@_timed
def euclid_convergence() -> CriterionResult:
    """Second-order convergence of the lattice Green's function and 1/n_max decay of the Matsubara sum."""
    ratios_d, ratios_m = [], []
    for name in STATIC_PRESETS:
        lat, bg = _preset(name)
        d, m = _euclid_errors(lat, bg, 1.0)
        ratios_d += [d[0] / d[1], d[1] / d[2]]
        ratios_m += [m[0] / m[1], m[1] / m[2]]
    ok = all(3 <= r <= 5 for r in ratios_d) and all(8 <= r <= 12 for r in ratios_m)
    worst = max(abs(r - 4) for r in ratios_d)
    det = "direct ratios " + ",".join(f"{r:.3f}" for r in ratios_d) + "; mode-sum ratios " + ",".join(f"{r:.3f}" for r in ratios_m)
    return CriterionResult(5, "Euclidean three-way agreement", worst, 1.0, ok, det)


@_timed
def zero_temperature_limit() -> CriterionResult:
    """||W^beta - W^0||_max against 2 exp(-beta omega_min) ||W^0||_max on FLAT16."""
    lat, bg = _preset("FLAT16")
    C = assemble_C(lat, bg)
    W0 = static_ground(lat, bg, C).blocks(0.0)
    om = math.sqrt(C.eigenvalues[0])
    worst = 0.0
    ok = True
    for beta in (10.0, 20.0, 40.0):
        diff = float(np.max(np.abs(static_kms(lat, bg, beta, C).blocks(0.0) - W0)))
        bound = 2 * math.exp(-beta * om) * float(np.max(np.abs(W0)))
        worst = max(worst, diff / bound)
        ok = ok and diff <= bound
    return CriterionResult(6, "beta -> inf limit", worst, 1.0, ok, "value is the largest ratio difference/bound")


def gapped_backgrounds(n: int = 16) -> list[tuple[SurfaceLattice, Background]]:
    """Backgrounds with V N = 0.5 at every site and v^2 / N >= 0.5."""
    lat = SurfaceLattice(n, 2 * math.pi)
    x = lat.coords
    out = []
    for v, w in ((np.ones(n), np.full(n, 0.5)), (2 + np.cos(x), 0.3 * np.sin(x)), (1.5 + 0.5 * np.sin(2 * x), np.zeros(n))):
        N = np.sqrt(v**2 + w**2)
        out.append((lat, Background(lat, v, w, 0.5 / N)))
    return out


@_timed
def mass_gap() -> CriterionResult:
    eps = 0.5
    gaps = []
    for lat, bg in gapped_backgrounds():
        N = bg.lapse
        assert np.all(bg.V * N >= eps - 1e-15) and np.all(bg.v**2 / N >= eps)
        gaps.append(assemble_phase_space(lat, bg).mass_gap())
    g = min(gaps)
    return CriterionResult(7, "Mass gap", g, eps - 1e-9, g >= eps - 1e-9, "gaps " + ",".join(f"{x:.4f}" for x in gaps))


@_timed
def conservation(seed: int = DEFAULT_SEED, samples: int = 4) -> CriterionResult:
    """Energy and symplectic drift of the exact flow on t in [0, 10]."""
    worst_E, worst_s = 0.0, 0.0
    times = np.linspace(0.0, 10.0, 21)
    for k, name in enumerate(PRESETS):
        lat, bg = _preset(name)
        ps = assemble_phase_space(lat, bg)
        ev = Evolution(ps)
        J = symplectic_matrix(lat)
        rng = np.random.default_rng([seed, 8, k])
        data = [(random_data(lat, rng), random_data(lat, rng)) for _ in range(samples)]
        for t in times:
            T = ev.matrix(t).real
            worst_s = max(worst_s, float(np.max(np.abs(T.T @ J @ T - J)) / np.max(np.abs(J))))
            for d, e in data:
                dt, et = CauchyData.from_vector(T @ d.vector()), CauchyData.from_vector(T @ e.vector())
                E0 = energy(ps, d)
                worst_E = max(worst_E, abs(energy(ps, dt) - E0) / E0)
                s0 = symplectic_form(lat, d, e)
                worst_s = max(worst_s, abs(symplectic_form(lat, dt, et) - s0) / abs(s0))
    tol = 1e-9
    return CriterionResult(8, "Energy and symplectic conservation", max(worst_E, worst_s), tol, max(worst_E, worst_s) <= tol,
                           f"energy={worst_E:.3e} symplectic={worst_s:.3e}")


@_timed
def construction_uniqueness() -> CriterionResult:
    """Static closed form against the H_e spectral construction: forms and block kernels."""
    worst = 0.0
    for name in STATIC_PRESETS:
        lat, bg = _preset(name)
        pairs = [(static_ground(lat, bg), stationary_ground(lat, bg))]
        pairs += [(static_kms(lat, bg, b), stationary_kms(lat, bg, b)) for b in (0.5, 1.0, 2 * math.pi)]
        for a, b in pairs:
            worst = max(worst, float(np.max(np.abs(a.form - b.form))))
            for dt in (0.0, 0.7):
                worst = max(worst, float(np.max(np.abs(a.blocks(dt) - b.blocks(dt)))))
    tol = 1e-9
    return CriterionResult(9, "Construction uniqueness", worst, tol, worst <= tol, f"{STATIC} vs {STATIONARY}")


def frequency_data(lat: SurfaceLattice, bg: Background, phi1: np.ndarray, sign: int) -> np.ndarray:
    """phi0 = sign * i N^1/2 C^-1/2 N^1/2 phi1 (sign = +1 gives f_+ = 0, sign = -1 gives f_- = 0)."""
    C = assemble_C(lat, bg)
    sN = np.sqrt(bg.lapse)
    phi0 = sign * 1j * sN * C.apply(inv_sqrt(), sN * phi1)
    return np.concatenate([phi0, phi1.astype(complex)])


@_timed
def frequency_purity(seed: int = DEFAULT_SEED, samples: int = 10) -> CriterionResult:
    """omega^0_2(conj d, d) for data with f_+ = 0; the f_- = 0 family is reported alongside."""
    lat, bg = _preset("FLAT16")
    g0 = ground_state(lat, bg)
    rng = np.random.default_rng([seed, 10])
    phis = [rng.standard_normal(lat.n_sites) for _ in range(samples)]
    plus0 = max(g0.two_point(np.conj(d), d).real for d in (frequency_data(lat, bg, p, +1) for p in phis))
    minus0 = max(g0.two_point(np.conj(d), d).real for d in (frequency_data(lat, bg, p, -1) for p in phis))
    tol = 1e-12
    return CriterionResult(10, "Ground-state frequency purity", plus0, tol, plus0 <= tol, f"(f_- = 0 family: {minus0:.3e})")


def bose_phi2(lat: SurfaceLattice, bg: Background, beta: float) -> np.ndarray:
    """Per-site sum_k N |u_k|^2 n_k / omega_k with the Bose factor n = 1/(exp(beta omega) - 1)."""
    C = assemble_C(lat, bg)
    om = np.sqrt(C.eigenvalues)
    n = 1.0 / np.expm1(beta * om)
    U = C.eigenvectors
    return bg.lapse * np.sum(np.abs(U) ** 2 * (n / om)[None, :], axis=1)


@_timed
def thermal_phi2(betas=(1.0, 2.0)) -> CriterionResult:
    from .thermal import thermal_observables

    lat, bg = _preset("FLAT16")
    worst = 0.0
    for beta in betas:
        obs = thermal_observables(lat, bg, beta)
        worst = max(worst, float(np.max(np.abs(obs.phi2 - bose_phi2(lat, bg, beta)))))
    tol = 1e-10
    return CriterionResult(11, "Thermal <:phi^2:>", worst, tol, worst <= tol, "against the Bose-Einstein mode sum")


CRITERIA: tuple[Callable[..., CriterionResult], ...] = (
    ccr_closure,
    kms_boundary,
    gibbs_equivalence,
    wick_consistency,
    euclid_convergence,
    zero_temperature_limit,
    mass_gap,
    conservation,
    construction_uniqueness,
    frequency_purity,
    thermal_phi2,
)


def run_all() -> list[CriterionResult]:
    return [c() for c in CRITERIA]
