"""Ground and KMS states of the free field as one-particle structures.

A state is stored as a matrix P taking site-basis Cauchy data to
coordinates of the one-particle space K, together with the real
frequencies of the one-particle Hamiltonian H in those coordinates
(K is always written in an eigenbasis of H). Then

    omega_2(f, f') = <P conj(f), P f'> = f^T M f',   M = P^H P,
    P T_{-t} = exp(i t H) P.

Canonical commutator: omega_2(f, f') - omega_2(f', f) = i sigma(f, f').
In the static closed form, with a = C^1/4 N^-1/2 f0 + i C^-1/4 N^1/2 f1 and
b = conj-structure (same with -i),

    ground:  p(f) = a / sqrt(2)                                H = sqrt C
    KMS:     p(f) = (n+1)^1/2 a / sqrt(2)  (+)  n^1/2 b / sqrt(2)     H = sqrt C (+) -sqrt C

with n = 1/(exp(beta sqrt C) - 1). The stationary route uses
p = sqrt(2) |H_e|^-1/2 P_- sqrt(A) d and its thermal doubling.

Block kernels W_ij(dt)(x, y) put i normal derivatives on the first slot at
time dt and j on the second slot at time 0; N^(+-1/2) density factors are
absorbed so that W_00 is the field correlation at points x, y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .background import Background, CauchyData, SurfaceLattice, as_vector, face_to_site, flux_coefficient, gradient_matrix
from .classical import Evolution, NonStaticError, symplectic_form, symplectic_matrix
from .spectral import PhaseSpaceOperator, WeightedOperator, assemble_C, assemble_phase_space, thermal_cos

GROUND = "ground"
KMS = "kms"
STATIC = "static_closed_form"
STATIONARY = "stationary_spectral"


class StateError(ValueError):
    pass


@dataclass(eq=False)
class TwoPointState:
    kind: str
    beta: float
    construction: str
    lattice: SurfaceLattice
    background: Background
    one_particle: np.ndarray
    frequencies: np.ndarray
    _C: Optional[WeightedOperator] = field(default=None, repr=False)
    _ps: Optional[PhaseSpaceOperator] = field(default=None, repr=False)
    _ev: Optional[Evolution] = field(default=None, repr=False)
    _M: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def C(self) -> WeightedOperator:
        if self._C is None:
            self._C = assemble_C(self.lattice, self.background)
        return self._C

    @property
    def phase_space(self) -> PhaseSpaceOperator:
        if self._ps is None:
            self._ps = assemble_phase_space(self.lattice, self.background)
        return self._ps

    @property
    def evolution(self) -> Evolution:
        if self._ev is None:
            self._ev = Evolution(self.phase_space)
        return self._ev

    @property
    def R(self) -> float:
        return self.beta / (2 * math.pi)

    @property
    def form(self) -> np.ndarray:
        if self._M is None:
            P = self.one_particle
            self._M = P.conj().T @ P
        return self._M

    def map(self, f) -> np.ndarray:
        return self.one_particle @ as_vector(f)

    def two_point(self, f, g) -> complex:
        return complex(as_vector(f) @ self.form @ as_vector(g))

    def blocks(self, dt: float = 0.0) -> np.ndarray:
        """Array of shape (2, 2, n, n) holding W_ij(dt)."""
        if self.construction == STATIC:
            return _closed_blocks(self.C, self.background, self.beta, dt)
        return evolved_blocks(self, dt)


def _site_point_data(lattice: SurfaceLattice) -> np.ndarray:
    """Columns: field point data (0, -delta_x), then normal-derivative data (delta_x, 0)."""
    n = lattice.n_sites
    Winv = np.diag(1.0 / lattice.vol_weight)
    Z = np.zeros((n, n))
    return np.block([[Z, Winv], [-Winv, Z]])


def evolved_blocks(state: TwoPointState, dt: float) -> np.ndarray:
    """W_ij(dt) = omega_2(T_{-dt} e_i(x), e_j(y)) from the state's form and the classical flow."""
    n = state.lattice.n_sites
    E = _site_point_data(state.lattice)
    T = state.evolution.matrix(-dt) if dt != 0 else np.eye(2 * n)
    W = E.T @ T.T @ state.form @ E
    return W.reshape(2, n, 2, n).transpose(0, 2, 1, 3)


def _closed_blocks(C: WeightedOperator, background: Background, beta: float, dt: float) -> np.ndarray:
    sN = np.sqrt(background.lapse)
    R = beta / (2 * math.pi)
    g = thermal_cos(dt, R)  # Q(dt) = C^-1/2 cos((dt + i pi R) sqrt C) / (2 sinh(pi R sqrt C))
    lam = C.eigenvalues
    s = np.sqrt(lam)
    q0 = g(lam)
    if np.isinf(beta):
        q1 = -0.5j * np.exp(-1j * dt * s)
    else:
        q1 = _thermal_sin(dt, R, lam)  # dQ/d(dt)
    q2 = -lam * q0  # d^2Q/d(dt)^2 = -C Q
    W = np.empty((2, 2) + (C.dim, C.dim), dtype=complex)
    W[0, 0] = C.kernel(lambda l: q0, sN, sN)
    W[1, 0] = C.kernel(lambda l: q1, 1 / sN, sN)
    W[0, 1] = C.kernel(lambda l: -q1, sN, 1 / sN)
    W[1, 1] = C.kernel(lambda l: -q2, 1 / sN, 1 / sN)
    return W


def _thermal_sin(dt: float, R: float, lam: np.ndarray) -> np.ndarray:
    """-sin((dt + i pi R) sqrt(lam)) / (2 sinh(pi R sqrt(lam))), the dt-derivative of Q."""
    s = np.sqrt(lam)
    c = np.pi * R
    # sin(a + ib) = (e^{i a - b} - e^{-i a + b}) / 2i with b = c
    num = np.exp(1j * dt * s - 2 * c * s) - np.exp(-1j * dt * s)
    return -num / (2j) / (1.0 - np.exp(-2 * c * s))


# --- constructions -----------------------------------------------------------


def _static_rows(C: WeightedOperator, background: Background, conj: bool = False) -> np.ndarray:
    N = background.lapse
    U = C.eigenvectors
    UW = U.conj().T * C.weights[None, :]
    l4 = C.eigenvalues ** 0.25
    sign = -1j if conj else 1j
    A0 = (l4[:, None] * UW) / np.sqrt(N)[None, :]
    A1 = sign * (UW / l4[:, None]) * np.sqrt(N)[None, :]
    return np.hstack([A0, A1]) / math.sqrt(2)


def _check_static(background: Background):
    if not background.is_static():
        raise NonStaticError("the closed-form construction needs a static background")


def static_ground(lattice, background, C=None) -> TwoPointState:
    _check_static(background)
    C = C or assemble_C(lattice, background)
    P = _static_rows(C, background)
    return TwoPointState(GROUND, math.inf, STATIC, lattice, background, P, np.sqrt(C.eigenvalues), _C=C)


def static_kms(lattice, background, beta: float, C=None) -> TwoPointState:
    _check_static(background)
    C = C or assemble_C(lattice, background)
    om = np.sqrt(C.eigenvalues)
    x = np.exp(-beta * om)
    up = 1.0 / np.sqrt(-np.expm1(-beta * om))
    dn = np.sqrt(x) * up
    P = np.vstack([up[:, None] * _static_rows(C, background), dn[:, None] * _static_rows(C, background, conj=True)])
    return TwoPointState(KMS, float(beta), STATIC, lattice, background, P, np.concatenate([om, -om]), _C=C)


def stationary_ground(lattice, background, ps=None) -> TwoPointState:
    ps = ps or assemble_phase_space(lattice, background)
    Y = ps.he_vectors_on[:, ps.neg]
    mu = np.abs(ps.he_values[ps.neg])
    P = math.sqrt(2) * (Y.conj().T @ ps.q_cl()) / np.sqrt(mu)[:, None]
    return TwoPointState(GROUND, math.inf, STATIONARY, lattice, background, P, mu, _ps=ps)


def stationary_kms(lattice, background, beta: float, ps=None) -> TwoPointState:
    ps = ps or assemble_phase_space(lattice, background)
    q = ps.q_cl()
    Ym = ps.he_vectors_on[:, ps.neg]
    Yp = ps.he_vectors_on[:, ps.pos]
    mm = np.abs(ps.he_values[ps.neg])
    mp = np.abs(ps.he_values[ps.pos])
    fm = math.sqrt(2) / np.sqrt(mm * -np.expm1(-beta * mm))
    fp = math.sqrt(2) * np.exp(-0.5 * beta * mp) / np.sqrt(mp * -np.expm1(-beta * mp))
    P = np.vstack([fm[:, None] * (Ym.conj().T @ q), fp[:, None] * (Yp.conj().T @ q)])
    return TwoPointState(KMS, float(beta), STATIONARY, lattice, background, P, np.concatenate([mm, -mp]), _ps=ps)


def ground_state(lattice, background, construction: Optional[str] = None) -> TwoPointState:
    """Closed form when the background is static, H_e construction otherwise."""
    if construction is None:
        construction = STATIC if background.is_static() else STATIONARY
    if construction == STATIC:
        return static_ground(lattice, background)
    if construction == STATIONARY:
        return stationary_ground(lattice, background)
    raise ValueError(f"unknown construction {construction!r}")


def kms_state(lattice, background, beta: float, construction: Optional[str] = None) -> TwoPointState:
    if not (beta > 0) or math.isinf(beta):
        raise StateError(f"beta must be positive and finite, got {beta!r}")
    if construction is None:
        construction = STATIC if background.is_static() else STATIONARY
    if construction == STATIC:
        return static_kms(lattice, background, beta)
    if construction == STATIONARY:
        return stationary_kms(lattice, background, beta)
    raise ValueError(f"unknown construction {construction!r}")


def corrupt_state(state: TwoPointState, factor: float = 1.01) -> TwoPointState:
    """Copy of the state whose W_00 block is multiplied by ``factor``.

    The extra weight is carried by a second copy of K restricted to the phi1
    slot, which multiplies M_11 (the field-field block) and nothing else.
    """
    n = state.lattice.n_sites
    P = state.one_particle
    extra = np.zeros_like(P)
    extra[:, n:] = math.sqrt(factor - 1.0) * P[:, n:]
    return TwoPointState(
        state.kind,
        state.beta,
        "corrupted",
        state.lattice,
        state.background,
        np.vstack([P, extra]),
        np.concatenate([state.frequencies, state.frequencies]),
        _C=state._C,
        _ps=state._ps,
        _ev=state._ev,
    )


# --- derived objects ---------------------------------------------------------


def time_dependent_kernel(state: TwoPointState, dt: float) -> np.ndarray:
    """Field-field kernel omega_2(phi(dt, x) phi(0, y)); static backgrounds only."""
    if not state.background.is_static():
        raise NonStaticError("closed-form time-dependent kernels need a static background; use evolved_kernel")
    return state.blocks(dt)[0, 0]


def evolved_kernel(state: TwoPointState, dt: float) -> np.ndarray:
    """Field-field kernel by conjugation with the classical flow (works with shift)."""
    return evolved_blocks(state, dt)[0, 0]


@dataclass(frozen=True)
class GaugeFunctional:
    """mu(f) = sum_i w_i (m0_i f0_i + m1_i f1_i)."""

    lattice: SurfaceLattice
    m0: np.ndarray
    m1: np.ndarray

    def __call__(self, f) -> float:
        f = f if isinstance(f, CauchyData) else CauchyData.from_vector(f)
        w = self.lattice.vol_weight
        return np.sum(w * (self.m0 * f.phi0 + self.m1 * f.phi1))

    @classmethod
    def zero(cls, lattice):
        n = lattice.n_sites
        return cls(lattice, np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class GaugedState:
    state: TwoPointState
    mu: GaugeFunctional


def gauge_transform(state, mu: GaugeFunctional) -> GaugedState:
    if isinstance(state, GaugedState):
        m = state.mu
        mu = GaugeFunctional(mu.lattice, mu.m0 + m.m0, mu.m1 + m.m1)
        state = state.state
    return GaugedState(state, mu)


def _real(f) -> np.ndarray:
    x = as_vector(f)
    if np.iscomplexobj(x):
        if np.any(x.imag):
            raise ValueError("Weyl generators need real Cauchy data")
        x = x.real
    return x


def weyl_expectation(state, f) -> complex:
    x = _real(f)
    if isinstance(state, GaugedState):
        return complex(np.exp(1j * state.mu(x)) * weyl_expectation(state.state, x))
    return complex(np.exp(-0.5 * state.two_point(x, x)))


def one_point(state, f, h: float = 1e-3) -> float:
    """omega_1(f) = -i d/ds log omega(W(s f)) at s = 0 (central difference)."""
    x = _real(f)
    lp = np.log(weyl_expectation(state, h * x))
    lm = np.log(weyl_expectation(state, -h * x))
    return float(np.real(-1j * (lp - lm) / (2 * h)))


def truncated_two_point(state, f, h: float = 1e-2) -> float:
    """-d^2/ds^2 log omega(W(s f)) at s = 0 (central difference; exact for quadratics)."""
    x = _real(f)
    lp = np.log(weyl_expectation(state, h * x))
    l0 = np.log(weyl_expectation(state, 0 * x))
    lm = np.log(weyl_expectation(state, -h * x))
    return float(np.real(-(lp - 2 * l0 + lm) / h**2))


@dataclass(frozen=True)
class KMSResidual:
    one_particle: float
    weyl: float
    real_axis: float
    F_boundary: complex
    target: complex

    def ok(self, tol: float) -> bool:
        return max(self.one_particle, self.weyl, self.real_axis) <= tol


def correlator(state: TwoPointState, f, g, z: complex) -> complex:
    """F(z) = <P conj(f), exp(i z H) P g>, entire in z at finite dimension."""
    a = state.map(np.conj(as_vector(f)))
    b = state.map(g)
    return complex(np.sum(np.conj(a) * np.exp(1j * z * state.frequencies) * b))


def kms_verify(state, f, g, t: float) -> KMSResidual:
    """Residuals of F(t + i beta) = omega(alpha_t(g) f) at the one-particle and Weyl level."""
    gauge = None
    if isinstance(state, GaugedState):
        gauge, state = state.mu, state.state
    if state.kind != KMS:
        raise StateError("kms_verify needs a KMS state (finite beta)")
    beta = state.beta
    x, y = _real(f), _real(g)
    T = state.evolution.matrix(-t).real
    yt = T @ y
    F_b = correlator(state, x, y, t + 1j * beta)
    target = state.two_point(yt, x)
    F_r = correlator(state, x, y, t)
    real = state.two_point(x, yt)
    scale = math.sqrt(max(state.two_point(x, x).real, 1e-300) * max(state.two_point(y, y).real, 1e-300))

    wx = weyl_expectation(state, x)
    wy = weyl_expectation(state, y)
    FW = wx * wy * np.exp(-F_b)
    sig = symplectic_form(state.lattice, CauchyData.from_vector(yt), CauchyData.from_vector(x))
    WW = np.exp(-0.5j * sig) * weyl_expectation(state, yt + x)
    if gauge is not None:
        FW *= np.exp(1j * (gauge(x) + gauge(yt)))
        WW *= np.exp(1j * (gauge(yt) + gauge(x)))
    return KMSResidual(
        one_particle=abs(F_b - target) / scale,
        weyl=abs(FW - WW),
        real_axis=abs(F_r - real) / scale,
        F_boundary=F_b,
        target=target,
    )


def ground_bound(state: TwoPointState, f, g, z: complex) -> tuple[float, float]:
    """|F(z)| and the Cauchy-Schwarz bound ||P conj f|| ||P g|| (valid for Im z >= 0)."""
    F = correlator(state, f, g, z)
    a = state.map(np.conj(as_vector(f)))
    b = state.map(g)
    return abs(F), float(np.linalg.norm(a) * np.linalg.norm(b))


def ccr_defect(state: TwoPointState, f, g) -> float:
    """|omega_2(f, g) - omega_2(g, f) - i sigma(f, g)|."""
    x, y = as_vector(f), as_vector(g)
    J = symplectic_matrix(state.lattice)
    return abs(state.two_point(x, y) - state.two_point(y, x) - 1j * (x @ J @ y))


@dataclass(frozen=True)
class ThermalObservables:
    phi2: np.ndarray
    energy_density: np.ndarray


def thermal_observables(lattice: SurfaceLattice, background: Background, beta: float) -> ThermalObservables:
    """Normal-ordered <phi^2> and energy density from the point-split difference beta minus ground."""
    if not background.is_static():
        raise NonStaticError("thermal observables need a static background")
    C = assemble_C(lattice, background)
    Wb = static_kms(lattice, background, beta, C=C).blocks(0.0) if math.isfinite(beta) else None
    W0 = static_ground(lattice, background, C=C).blocks(0.0)
    if Wb is None:
        Wb = W0
    dW = (Wb - W0).real
    phi2 = np.diag(dW[0, 0]).copy()
    N, V = background.lapse, background.V
    D = gradient_matrix(lattice)
    a = flux_coefficient(lattice, background)
    grad_faces = a * np.einsum("fi,ij,fj->f", D, dW[0, 0], D)
    grad = (face_to_site(lattice) @ grad_faces) / lattice.vol_weight
    eps = 0.5 * (N * np.diag(dW[1, 1]) + grad + V * N * phi2)
    return ThermalObservables(phi2, eps)
