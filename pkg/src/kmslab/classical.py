"""Classical Klein-Gordon dynamics on Cauchy data.

T_t = exp(i t H_cl) = sqrt(A)^-1 exp(i t H_e) sqrt(A) moves data forward in
Killing time: d/dt phi0 = N^x d_x phi0 + N phi1. The quantum time
translation alpha_t acts on test data by T_{-t}; thermal states are built
so that their one-particle maps intertwine T_{-t} with exp(i t H) and H >= 0
in the ground state.

Point fields are read off from data through the symplectic form
sigma(d, d') = sum w (phi0 phi1' - phi1 phi0'): the field at x is the
datum (0, -delta_x) and its normal derivative is (delta_x, 0).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import Background, CauchyData, SurfaceLattice, as_vector
from .spectral import PhaseSpaceOperator, WeightedOperator, inv_sqrt


class NonStaticError(ValueError):
    pass


class Evolution:
    """Exact spectral propagator T_t for a phase-space operator."""

    def __init__(self, ps: PhaseSpaceOperator):
        self.ps = ps
        Y = ps.he_vectors_on
        s2 = ps._s2
        self._left = (ps.sqrtA_inv_on @ Y) / s2[:, None]
        self._right = (Y.conj().T @ ps.sqrtA_on) * s2[None, :]
        self._mu = ps.he_values

    def matrix(self, t: complex) -> np.ndarray:
        """T_t in the site basis; complex t gives the entire continuation."""
        return (self._left * np.exp(1j * t * self._mu)) @ self._right

    def __call__(self, d, t: float) -> CauchyData:
        return evolve(self, d, t)


def evolve(ev: Evolution, d, t: float) -> CauchyData:
    x = as_vector(d)
    y = ev.matrix(t) @ x
    if np.isrealobj(x):
        y = y.real
    return CauchyData.from_vector(y)


def evolve_rk4(ps: PhaseSpaceOperator, d, t: float, steps: int = 2000) -> CauchyData:
    """Classical RK4 integration of d' = i H_cl d (test oracle only)."""
    M = 1j * ps.H_cl
    x = as_vector(d).astype(complex)
    h = t / steps
    for _ in range(steps):
        k1 = M @ x
        k2 = M @ (x + 0.5 * h * k1)
        k3 = M @ (x + 0.5 * h * k2)
        k4 = M @ (x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return CauchyData.from_vector(x)


def energy(ps: PhaseSpaceOperator, d) -> float:
    return ps.energy(d)


def symplectic_form(lattice: SurfaceLattice, d, e) -> complex:
    d = d if isinstance(d, CauchyData) else CauchyData.from_vector(d)
    e = e if isinstance(e, CauchyData) else CauchyData.from_vector(e)
    w = lattice.vol_weight
    return complex(np.sum(w * (d.phi0 * e.phi1 - d.phi1 * e.phi0)))


def symplectic_matrix(lattice: SurfaceLattice) -> np.ndarray:
    """J with sigma(d, e) = d^T J e."""
    W = np.diag(lattice.vol_weight)
    Z = np.zeros_like(W)
    return np.block([[Z, W], [-W, Z]])


def _require_static(background: Background, what: str):
    if not background.is_static():
        raise NonStaticError(f"{what} needs a static background (w = 0)")


def frequency_split(C: WeightedOperator, background: Background, d: CauchyData):
    """f_pm = (phi0 -+ i N^1/2 C^-1/2 N^1/2 phi1) / 2.

    The solution with data d is N^1/2 (exp(i t sqrt C) N^-1/2 f_plus
    + exp(-i t sqrt C) N^-1/2 f_minus).
    """
    _require_static(background, "frequency_split")
    sN = np.sqrt(background.lapse)
    y = sN * C.apply(inv_sqrt(), sN * d.phi1)
    return 0.5 * (d.phi0 - 1j * y), 0.5 * (d.phi0 + 1j * y)


@dataclass(frozen=True)
class CommutatorKernel:
    dt: float
    matrix: np.ndarray


def commutator_kernel(C: WeightedOperator, background: Background, dt: float) -> CommutatorKernel:
    """E(dt)(x, y) = -[N^1/2 C^-1/2 sin(dt sqrt C) N^1/2](x, y) with dt = t - t'."""
    _require_static(background, "closed-form commutator kernel")
    sN = np.sqrt(background.lapse)
    K = -C.kernel(lambda l: np.sin(dt * np.sqrt(l)) / np.sqrt(l), sN, sN)
    return CommutatorKernel(dt, K.real)


def commutator_kernel_evolved(ev: Evolution, dt: float) -> CommutatorKernel:
    """E(dt)(x, y) = sigma(T_{-dt}(0, -delta_x), (0, -delta_y)); any stationary background."""
    w = ev.ps.lattice.vol_weight
    n = w.shape[0]
    T = ev.matrix(-dt)
    T01 = T[:n, n:]
    return CommutatorKernel(dt, np.real(T01 / w[None, :]).T)
