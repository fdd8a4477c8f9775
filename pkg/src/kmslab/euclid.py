"""Imaginary-time cylinder, Euclidean Green's functions and the Wick rotation.

The cylinder is S^1 of circumference 2 pi R times the surface lattice, with
tau sites at a * 2 pi R / n_tau. In the coordinates where the field is
rescaled by sqrt(N) the Euclidean operator is B (x) 1 + 1 (x) C, B being
the periodic second difference. Green's functions are returned as point
kernels (densities stripped), so each representation carries the factor
N^1/2 on both sides, and at tau separation dt:

    G(dt) = N^1/2 cosh((dt - pi R) sqrt C) / (2 sqrt C sinh(pi R sqrt C)) N^1/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .background import Background, SurfaceLattice
from .classical import NonStaticError
from .spectral import WeightedOperator, assemble_C, thermal_cos


@dataclass(frozen=True)
class CylinderLattice:
    R: float
    n_tau: int
    surface: SurfaceLattice

    def __post_init__(self):
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ValueError("R must be positive and finite")
        if self.n_tau < 2 or self.n_tau % 2:
            raise ValueError("n_tau must be an even integer >= 2")

    @property
    def beta(self) -> float:
        return 2 * math.pi * self.R

    @property
    def spacing_tau(self) -> float:
        return self.beta / self.n_tau

    @property
    def n_total(self) -> int:
        return self.n_tau * self.surface.n_sites

    @property
    def weights(self) -> np.ndarray:
        return np.kron(np.full(self.n_tau, self.spacing_tau), self.surface.vol_weight)

    def matsubara_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the periodic second difference, (2/dtau)^2 sin^2(pi m / n_tau)."""
        m = np.arange(self.n_tau)
        return (2.0 / self.spacing_tau) ** 2 * np.sin(np.pi * m / self.n_tau) ** 2


def _require_static(background: Background):
    if not background.is_static():
        raise NonStaticError("the Wick rotation needs a static background: shift cross terms do not rotate")


def second_difference(n_tau: int, dtau: float) -> sp.csr_matrix:
    main = np.full(n_tau, 2.0)
    off = np.full(n_tau - 1, -1.0)
    B = sp.diags([main, off, off], [0, 1, -1], format="lil")
    B[0, n_tau - 1] += -1.0
    B[n_tau - 1, 0] += -1.0
    return (B.tocsr()) / dtau**2


def assemble_euclidean(cyl: CylinderLattice, background: Background, C: Optional[WeightedOperator] = None) -> sp.csr_matrix:
    """Sparse B (x) 1 + 1 (x) C, index a * n + i for tau site a and surface site i."""
    _require_static(background)
    C = C or assemble_C(cyl.surface, background)
    n = cyl.surface.n_sites
    B = second_difference(cyl.n_tau, cyl.spacing_tau)
    return (sp.kron(B, sp.identity(n)) + sp.kron(sp.identity(cyl.n_tau), sp.csr_matrix(C.matrix))).tocsr()


@dataclass(eq=False)
class EuclideanGreen:
    representation: str
    R: float
    kernel_fn: Callable[[float], np.ndarray]
    values: Optional[np.ndarray] = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    def kernel(self, dtau: float) -> np.ndarray:
        return self.kernel_fn(dtau)


def _reduce_tau(dtau: float, R: float) -> float:
    period = 2 * math.pi * R
    r = math.fmod(dtau, period)
    if r < 0:
        r += period
    return r


def _grid_lookup(values: np.ndarray, cyl: CylinderLattice):
    def k(dtau: float) -> np.ndarray:
        a = _reduce_tau(dtau, cyl.R) / cyl.spacing_tau
        ia = int(round(a))
        if abs(a - ia) > 1e-8:
            raise ValueError(f"tau separation {dtau} is not on the {cyl.n_tau}-site grid")
        return values[ia % cyl.n_tau]

    return k


def _delta_rhs(cyl: CylinderLattice, background: Background) -> np.ndarray:
    """Columns sqrt(N_j) delta_(0, j) with density deltas."""
    n = cyl.surface.n_sites
    rhs = np.zeros((cyl.n_total, n))
    rhs[np.arange(n), np.arange(n)] = np.sqrt(background.lapse) / (cyl.spacing_tau * cyl.surface.vol_weight)
    return rhs


def green_direct(
    cyl: CylinderLattice, background: Background, method: str = "modes", C: Optional[WeightedOperator] = None
) -> EuclideanGreen:
    """Lattice Green's function on the cylinder by per-Matsubara-mode dense solves or sparse LU."""
    _require_static(background)
    C = C or assemble_C(cyl.surface, background)
    n = cyl.surface.n_sites
    sN = np.sqrt(background.lapse)
    info = {"method": method}
    if method == "sparse":
        L = assemble_euclidean(cyl, background, C)
        rhs = _delta_rhs(cyl, background)
        try:
            X = splu(L.tocsc()).solve(rhs)
        except RuntimeError as e:
            raise RuntimeError(f"sparse factorization failed: {e}") from None
        info["residual"] = float(np.max(np.abs(L @ X - rhs)) / np.max(np.abs(rhs)))
        X = X.reshape(cyl.n_tau, n, n)
    elif method == "modes":
        lam = cyl.matsubara_eigenvalues()
        rhs0 = np.diag(sN / cyl.surface.vol_weight)
        Y = np.stack([np.linalg.solve(C.matrix + l * np.eye(n), rhs0) for l in lam])
        a = np.arange(cyl.n_tau)
        phase = np.cos(2 * np.pi * np.outer(a, np.arange(cyl.n_tau)) / cyl.n_tau)
        X = np.tensordot(phase, Y, axes=(1, 0)) / (cyl.n_tau * cyl.spacing_tau)
    else:
        raise ValueError(f"unknown method {method!r}")
    G = sN[None, :, None] * X
    return EuclideanGreen("direct", cyl.R, _grid_lookup(G, cyl), values=G, info=info)


def green_closed_form(R: float, background: Background, C: Optional[WeightedOperator] = None) -> EuclideanGreen:
    _require_static(background)
    C = C or assemble_C(background.lattice, background)
    sN = np.sqrt(background.lapse)

    def k(dtau: float) -> np.ndarray:
        t = _reduce_tau(dtau, R)
        return C.kernel(thermal_cos(-1j * t, R), sN, sN).real

    return EuclideanGreen("closed_form", R, k)


def green_mode_sum(R: float, background: Background, n_max: int, C: Optional[WeightedOperator] = None) -> EuclideanGreen:
    """Matsubara partial sum over |n| <= n_max; the tail at dtau = 0 is about R / (pi n_max)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    _require_static(background)
    C = C or assemble_C(background.lattice, background)
    sN = np.sqrt(background.lapse)
    nn = np.arange(1, n_max + 1, dtype=float)
    lam = C.eigenvalues

    def k(dtau: float) -> np.ndarray:
        t = _reduce_tau(dtau, R)
        c = np.cos(np.outer(nn, np.full_like(lam, t / R)))
        tail = 2 * np.sum(c / (R**2 * lam[None, :] + nn[:, None] ** 2), axis=0)
        vals = (R / (2 * math.pi)) * (1.0 / (R**2 * lam) + tail)
        return C.kernel(lambda l: vals, sN, sN).real

    return EuclideanGreen(f"mode_sum({n_max})", R, k, info={"n_max": n_max})


class WickRotation:
    """Real-time objects obtained from the continuation G^c(z) of the Euclidean kernel.

    For dt = t - t':
        E+(dt) = i theta(dt) (G^c(dt) - G^c(dt - 2 pi i R))
        E-(dt) = -i theta(-dt) (G^c(dt) - G^c(dt - 2 pi i R))
        E^F(dt) = i theta(dt) G^c(dt) + i theta(-dt) G^c(dt - 2 pi i R)
        omega(dt) = -i (E^F(dt) - E-(dt))
    with theta(0) = 1/2.
    """

    def __init__(self, background: Background, R: float, C: Optional[WeightedOperator] = None):
        _require_static(background)
        self.background = background
        self.R = R
        self.C = C or assemble_C(background.lattice, background)
        self._sN = np.sqrt(background.lapse)

    def Gc(self, z: complex) -> np.ndarray:
        """Continued kernel; Im z is brought into [-2 pi R, 0] by 2 pi i R periodicity."""
        z = complex(z)
        period = 2 * math.pi * self.R
        im_r = z.imag
        if im_r > 0 or im_r < -period:
            im_r = -math.fmod(-im_r, period)
            if im_r > 0:
                im_r -= period
        return self.C.kernel(thermal_cos(complex(z.real, im_r), self.R), self._sN, self._sN)

    def _jump(self, dt: float) -> np.ndarray:
        return self.Gc(dt) - self.Gc(complex(dt, -2 * math.pi * self.R))

    def E_plus(self, dt: float) -> np.ndarray:
        return 1j * _theta(dt) * self._jump(dt)

    def E_minus(self, dt: float) -> np.ndarray:
        return -1j * _theta(-dt) * self._jump(dt)

    def E_feynman(self, dt: float) -> np.ndarray:
        return 1j * _theta(dt) * self.Gc(dt) + 1j * _theta(-dt) * self.Gc(complex(dt, -2 * math.pi * self.R))

    def omega(self, dt: float) -> np.ndarray:
        return -1j * (self.E_feynman(dt) - self.E_minus(dt))


def _theta(x: float) -> float:
    return 1.0 if x > 0 else (0.0 if x < 0 else 0.5)


def wick_rotate(background: Background, R: float, C: Optional[WeightedOperator] = None) -> WickRotation:
    return WickRotation(background, R, C)


def klein_gordon_residual(kernel_fn: Callable[[float], np.ndarray], C: WeightedOperator, background: Background, dt: float, eps: float) -> float:
    """max |(d^2/dt^2 + N^1/2 C N^-1/2) K(dt)| with a central second difference in t."""
    sN = np.sqrt(background.lapse)
    K0 = kernel_fn(dt)
    d2 = (kernel_fn(dt + eps) - 2 * K0 + kernel_fn(dt - eps)) / eps**2
    spatial = (sN[:, None] * C.matrix / sN[None, :]) @ K0
    return float(np.max(np.abs(d2 + spatial)))
