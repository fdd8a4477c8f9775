"""Truncated Fock-space Gibbs state used as a brute-force oracle.

Each selected one-particle mode k carries an occupation ladder 0..n_max with
a* annihilating the top rung, so h = sum_k omega_k a*_k a_k is exactly
diagonal. The field operator of real data f is

    Phi(f) = a*(p(f)) + a(p(f)),   p = ground-state one-particle map,

and p already contains the 1/sqrt(2) of the usual mode normalization.

Operators of different modes act on different tensor factors, so Weyl
operators and Gibbs traces factorize into per-mode pieces. The default
"factorized" method exponentiates each (n_max+1)-dimensional factor densely;
"dense" builds the full Kronecker-product space and is kept for small
truncations as a cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .background import as_vector
from .thermal import GROUND, StateError, TwoPointState

DEFAULT_DIM_CAP = 20000
DENSE_DIM_CAP = 4096


class FockDimensionError(ValueError):
    pass


def ladder(n_max: int) -> np.ndarray:
    """Truncated annihilation operator on occupations 0..n_max."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


@dataclass(frozen=True, eq=False)
class FockTruncation:
    modes: np.ndarray
    omegas: np.ndarray
    n_max: int
    beta: float
    dim_cap: int = DEFAULT_DIM_CAP

    @property
    def m(self) -> int:
        return len(self.modes)

    @property
    def local_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.local_dim**self.m

    @property
    def leakage_bound(self) -> float:
        return math.exp(-self.beta * float(np.min(self.omegas)) * self.n_max)

    def local_h(self, k: int) -> np.ndarray:
        return self.omegas[k] * np.arange(self.local_dim, dtype=float)

    def h_diagonal(self) -> np.ndarray:
        """Diagonal of h on the full occupation basis (mode 0 is the slowest index)."""
        return reduce(lambda acc, k: np.add.outer(acc, self.local_h(k)).ravel(), range(1, self.m), self.local_h(0))

    def annihilator(self, k: int) -> np.ndarray:
        """a_k on the full space (dense; only for small truncations)."""
        self._require_dense()
        eye = np.eye(self.local_dim)
        factors = [ladder(self.n_max) if j == k else eye for j in range(self.m)]
        return reduce(np.kron, factors)

    def _require_dense(self):
        if self.dim > DENSE_DIM_CAP:
            raise FockDimensionError(f"dense Fock operators limited to dim {DENSE_DIM_CAP}, got {self.dim}")


def build_fock(
    frequencies: Sequence[float],
    m: int,
    n_max: int,
    beta: float,
    modes: Optional[Sequence[int]] = None,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> FockTruncation:
    """Select ``m`` modes (lowest frequencies unless ``modes`` is given) and truncate at ``n_max``."""
    om = np.asarray(frequencies, dtype=float)
    if modes is None:
        modes = np.argsort(om, kind="stable")[:m]
    modes = np.asarray(modes, dtype=int)
    if len(modes) != m:
        raise ValueError(f"expected {m} modes, got {len(modes)}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError("beta must be positive and finite")
    if (n_max + 1) ** m > dim_cap:
        raise FockDimensionError(f"Fock dimension {(n_max + 1) ** m} exceeds cap {dim_cap}")
    sel = om[modes]
    if np.any(sel <= 0):
        raise ValueError("selected modes must have positive frequency")
    return FockTruncation(modes, sel, n_max, float(beta), dim_cap)


def _local_weights(ft: FockTruncation, k: int, beta: float) -> np.ndarray:
    return np.exp(-beta * ft.local_h(k))


def partition_function(ft: FockTruncation) -> float:
    return float(np.sum(np.exp(-ft.beta * ft.h_diagonal())))


def partition_function_closed(ft: FockTruncation) -> float:
    return float(np.prod(1.0 / -np.expm1(-ft.beta * ft.omegas)))


def partition_bound(ft: FockTruncation) -> float:
    """m exp(-beta omega_min (n_max + 1)) Z, the allowed truncation gap."""
    return ft.m * math.exp(-ft.beta * float(np.min(ft.omegas)) * (ft.n_max + 1)) * partition_function_closed(ft)


def occupation(ft: FockTruncation, k: int) -> float:
    wts = _local_weights(ft, k, ft.beta)
    return float(np.sum(np.arange(ft.local_dim) * wts) / np.sum(wts))


@dataclass(frozen=True)
class ModeProjection:
    coefficients: np.ndarray
    discarded_weight: float


def _require_ground(ground: TwoPointState):
    if ground.kind != GROUND:
        raise StateError("the Fock construction is built on the ground-state one-particle map")


def project(ft: FockTruncation, ground: TwoPointState, f) -> ModeProjection:
    """p(f) on the selected modes and the norm of what falls outside them."""
    _require_ground(ground)
    c = ground.map(f)
    mask = np.ones(c.shape[0], dtype=bool)
    mask[ft.modes] = False
    return ModeProjection(c[ft.modes], float(np.linalg.norm(c[mask])))


def _local_field(ft: FockTruncation, c: complex, cbar_source: complex) -> np.ndarray:
    """c a* + conj(cbar_source) a on one mode."""
    a = ladder(ft.n_max)
    return c * a.T + np.conj(cbar_source) * a


def _local_weyl(ft: FockTruncation, c: complex) -> np.ndarray:
    return expm(1j * _local_field(ft, c, c))


def _real(f) -> np.ndarray:
    x = as_vector(f)
    if np.iscomplexobj(x):
        if np.any(x.imag):
            raise ValueError("Weyl generators need real Cauchy data")
        x = x.real
    return x


def weyl_factors(ft: FockTruncation, ground: TwoPointState, f) -> list[np.ndarray]:
    c = project(ft, ground, _real(f)).coefficients
    return [_local_weyl(ft, c[k]) for k in range(ft.m)]


def field_operator(ft: FockTruncation, ground: TwoPointState, f) -> np.ndarray:
    """Phi(f) on the full truncated space (dense path)."""
    ft._require_dense()
    x = as_vector(f)
    c = project(ft, ground, x).coefficients
    cb = project(ft, ground, np.conj(x)).coefficients
    out = np.zeros((ft.dim, ft.dim), dtype=complex)
    for k in range(ft.m):
        a = ft.annihilator(k)
        out += c[k] * a.T + np.conj(cb[k]) * a
    return out


def gibbs_weyl_expectation(ft: FockTruncation, ground: TwoPointState, f, method: str = "factorized") -> complex:
    """Tr(exp(-beta h) W(f)) / Z with W(f) = exp(i Phi(f)), f real."""
    x = _real(f)
    if method == "factorized":
        val = 1.0 + 0j
        for k, Wk in enumerate(weyl_factors(ft, ground, x)):
            wts = _local_weights(ft, k, ft.beta)
            val *= np.sum(wts * np.diag(Wk)) / np.sum(wts)
        return complex(val)
    if method == "dense":
        W = expm(1j * field_operator(ft, ground, x))
        wts = np.exp(-ft.beta * ft.h_diagonal())
        return complex(np.sum(wts * np.diag(W)) / np.sum(wts))
    raise ValueError(f"unknown method {method!r}")


def gibbs_two_point(ft: FockTruncation, ground: TwoPointState, f, g) -> complex:
    """Tr(exp(-beta h) Phi(f) Phi(g)) / Z; cross-mode terms vanish since <Phi_k> = 0."""
    x, y = as_vector(f), as_vector(g)
    cf, cfb = project(ft, ground, x).coefficients, project(ft, ground, np.conj(x)).coefficients
    cg, cgb = project(ft, ground, y).coefficients, project(ft, ground, np.conj(y)).coefficients
    total = 0j
    for k in range(ft.m):
        wts = _local_weights(ft, k, ft.beta)
        prod = _local_field(ft, cf[k], cfb[k]) @ _local_field(ft, cg[k], cgb[k])
        total += np.sum(wts * np.diag(prod)) / np.sum(wts)
    return complex(total)


def quartic_coefficient(ft: FockTruncation, ground: TwoPointState, f, scales=(0.5, 1.0, 1.5, 2.0)) -> float:
    """Least-squares fit of log omega(W(s f)) to a s^2 + b s^4; returns |b| (0 for a quasi-free state)."""
    x = _real(f)
    s = np.asarray(scales, dtype=float)
    y = np.array([np.log(gibbs_weyl_expectation(ft, ground, si * x)).real for si in s])
    coef, *_ = np.linalg.lstsq(np.column_stack([s**2, s**4]), y, rcond=None)
    return float(abs(coef[1]))


def gibbs_kms_check(
    ft: FockTruncation, ground: TwoPointState, f, g, t: float, beta_shift: Optional[float] = None
) -> float:
    """|F(t + i beta_shift) - omega(alpha_t(W(g)) W(f))| with F(z) = omega(W(f) alpha_z(W(g))).

    alpha_z(B) = exp(i z h) B exp(-i z h). beta_shift defaults to the
    truncation's beta; any other value is a negative control. Every
    exponential is kept with a non-positive real exponent.
    """
    s = ft.beta if beta_shift is None else float(beta_shift)
    if not 0 <= s <= ft.beta:
        raise ValueError("beta_shift must lie in [0, beta]")
    A = weyl_factors(ft, ground, f)
    B = weyl_factors(ft, ground, g)
    F, target = 1.0 + 0j, 1.0 + 0j
    for k in range(ft.m):
        hk = ft.local_h(k)
        ph = np.exp(1j * t * hk)
        Bt = ph[:, None] * B[k] * np.conj(ph)[None, :]
        wts = _local_weights(ft, k, ft.beta)
        Z = np.sum(wts)
        # Tr(e^{-beta h} A e^{izh} B e^{-izh}) = Tr(e^{-(beta-s)h} A e^{-sh} B_t), z = t + i s
        F *= np.trace((np.exp(-(ft.beta - s) * hk)[:, None] * A[k]) @ (np.exp(-s * hk)[:, None] * Bt)) / Z
        target *= np.trace((wts[:, None] * Bt) @ A[k]) / Z
    return float(abs(F - target))


def gibbs_kms_check_dense(ft: FockTruncation, ground: TwoPointState, f, g, t: float) -> float:
    """Same boundary identity on the full Kronecker space."""
    h = ft.h_diagonal()
    A = expm(1j * field_operator(ft, ground, _real(f)))
    B = expm(1j * field_operator(ft, ground, _real(g)))
    ph = np.exp(1j * t * h)
    Bt = ph[:, None] * B * np.conj(ph)[None, :]
    wts = np.exp(-ft.beta * h)
    Z = np.sum(wts)
    F = np.trace(A @ (wts[:, None] * Bt)) / Z
    target = np.trace((wts[:, None] * Bt) @ A) / Z
    return float(abs(F - target))
