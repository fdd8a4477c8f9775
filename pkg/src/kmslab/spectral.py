"""Weighted-symmetric operators on the lattice and their spectral calculus.

Operators act on site vectors and are symmetric in <f, g>_w = sum w conj(f) g.
They are diagonalised through the similarity M -> diag(sqrt w) M diag(1/sqrt w),
which turns weighted symmetry into ordinary Hermitian symmetry.

Phase space is the doubled space of Cauchy data (phi0, phi1) with the same
weights on both halves.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import linalg

from .background import (
    Background,
    CauchyData,
    SurfaceLattice,
    as_vector,
    central_gradient,
    flux_coefficient,
    gradient_matrix,
)


class SpectralDomainError(ValueError):
    pass


class AssemblyError(RuntimeError):
    pass


# --- spectral functions -------------------------------------------------------


@dataclass(frozen=True)
class SpectralFunction:
    """A scalar function of the eigenvalue, tagged for error messages."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    positive_only: bool = False
    params: tuple = ()

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if self.positive_only:
            bad = np.flatnonzero(lam <= 0)
            if bad.size:
                raise SpectralDomainError(
                    f"{self.name} is singular or undefined at eigenvalue {lam[bad[0]]!r} (index {bad[0]})"
                )
        return self.fn(lam)


def power(p: float) -> SpectralFunction:
    if float(p).is_integer() and p >= 0:
        return SpectralFunction(f"power({p})", lambda l: l ** int(p), params=(p,))
    return SpectralFunction(f"power({p})", lambda l: l**p, positive_only=True, params=(p,))


def sqrt() -> SpectralFunction:
    return SpectralFunction("sqrt", np.sqrt, positive_only=True)


def inv_sqrt() -> SpectralFunction:
    return SpectralFunction("inv_sqrt", lambda l: 1.0 / np.sqrt(l), positive_only=True)


def exp(t: float) -> SpectralFunction:
    """exp(-t * lambda)."""
    return SpectralFunction(f"exp({t})", lambda l: np.exp(-t * l), params=(t,))


def cos(z: complex) -> SpectralFunction:
    """cos(z * sqrt(lambda)), z may be complex."""
    return SpectralFunction(f"cos({z})", lambda l: np.cos(z * np.sqrt(l)), positive_only=True, params=(z,))


def sin(t: complex) -> SpectralFunction:
    return SpectralFunction(f"sin({t})", lambda l: np.sin(t * np.sqrt(l)), positive_only=True, params=(t,))


def cosh_ratio(a: float, b: float) -> SpectralFunction:
    """cosh(a sqrt(lambda)) / sinh(b sqrt(lambda)), evaluated without overflow for |a| <= b."""

    def f(l):
        s = np.sqrt(l)
        return (np.exp((abs(a) - b) * s) + np.exp((-abs(a) - b) * s)) / (1.0 - np.exp(-2 * b * s))

    return SpectralFunction(f"cosh_ratio({a},{b})", f, positive_only=True, params=(a, b))


def coth(a: float) -> SpectralFunction:
    """coth(a sqrt(lambda)) = 1 + 2 e / (1 - e) with e = exp(-2 a sqrt(lambda))."""

    def f(l):
        x = 2 * a * np.sqrt(l)
        return 1.0 + 2.0 * np.exp(-x) / -np.expm1(-x)

    return SpectralFunction(f"coth({a})", f, positive_only=True, params=(a,))


def bose(beta: float) -> SpectralFunction:
    def f(l):
        x = beta * np.sqrt(l)
        return np.exp(-x) / -np.expm1(-x)

    return SpectralFunction(f"bose({beta})", f, positive_only=True, params=(beta,))


def thermal_cos(z: complex, R: float) -> SpectralFunction:
    """cos((z + i pi R) sqrt(lambda)) / (2 sqrt(lambda) sinh(pi R sqrt(lambda))).

    Valid for Im z in [-2 pi R, 0], where every exponential below has a
    non-positive real exponent; R = inf gives exp(-i z sqrt(lambda)) / (2 sqrt(lambda)).
    """
    z = complex(z)
    if np.isinf(R):
        if z.imag > 0:
            raise SpectralDomainError("ground kernel needs Im z <= 0")
        return SpectralFunction(
            f"thermal_cos({z},inf)",
            lambda l: np.exp(-1j * z * np.sqrt(l)) / (2 * np.sqrt(l)),
            positive_only=True,
            params=(z, R),
        )
    b = z.imag + np.pi * R
    c = np.pi * R
    if abs(b) > c * (1 + 1e-12):
        raise SpectralDomainError(f"Im z = {z.imag} outside the strip [-2 pi R, 0]")

    def f(l):
        s = np.sqrt(l)
        num = np.exp(1j * z.real * s + (-b - c) * s) + np.exp(-1j * z.real * s + (b - c) * s)
        return num / (1.0 - np.exp(-2 * c * s)) / (2 * s)

    return SpectralFunction(f"thermal_cos({z},{R})", f, positive_only=True, params=(z, R))


FunctionLike = Union[SpectralFunction, Callable[[np.ndarray], np.ndarray]]


# --- weighted operators ------------------------------------------------------


class WeightedOperator:
    """Operator symmetric in a weighted inner product, fully diagonalised."""

    def __init__(self, matrix: np.ndarray, weights: np.ndarray, name: str = "", symmetry_tol: float = 1e-10):
        matrix = np.asarray(matrix)
        weights = np.asarray(weights, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != weights.shape[0]:
            raise AssemblyError("matrix must be square and match the weights")
        self.name = name
        self.dim = matrix.shape[0]
        self.weights = weights
        self.matrix = matrix
        sw = np.sqrt(weights)
        self._sw = sw
        S = sw[:, None] * matrix / sw[None, :]
        asym = np.linalg.norm(S - S.conj().T)
        scale = max(np.linalg.norm(S), 1.0)
        if asym > symmetry_tol * scale:
            raise AssemblyError(f"{name or 'operator'} is not weighted-symmetric (defect {asym:.3e})")
        H = 0.5 * (S + S.conj().T)
        try:
            lam, V = linalg.eigh(H)
        except linalg.LinAlgError as e:
            cond = np.linalg.cond(H)
            raise AssemblyError(f"eigensolver failed for {name or 'operator'} (condition number {cond:.3e}): {e}")
        self.eigenvalues = lam
        self._V = V
        self.eigenvectors = V / sw[:, None]

    @property
    def orthonormal_vectors(self) -> np.ndarray:
        """Eigenvectors in the coordinates sqrt(w) * f (ordinary orthonormal)."""
        return self._V

    def _values(self, fn: FunctionLike) -> np.ndarray:
        return np.asarray(fn(self.eigenvalues))

    def apply(self, fn: FunctionLike, f: np.ndarray) -> np.ndarray:
        c = self.eigenvectors.conj().T @ (self.weights * np.asarray(f))
        return self.eigenvectors @ (self._values(fn) * c)

    def function_matrix(self, fn: FunctionLike) -> np.ndarray:
        """fn(op) in the site basis."""
        U = self.eigenvectors
        return (U * self._values(fn)) @ (U.conj().T * self.weights)

    def kernel(self, fn: FunctionLike, left=None, right=None) -> np.ndarray:
        """Kernel of diag(left) fn(op) diag(right), densities stripped."""
        U = self.eigenvectors
        K = (U * self._values(fn)) @ U.conj().T
        if left is not None:
            K = np.asarray(left)[:, None] * K
        if right is not None:
            K = K * np.asarray(right)[None, :]
        return K

    def inner(self, f, g) -> complex:
        return complex(np.sum(self.weights * np.conj(f) * g))

    def symmetry_defect(self, f: np.ndarray, g: np.ndarray) -> float:
        M = self.matrix
        return abs(self.inner(f, M @ g) - self.inner(M @ f, g))

    def reconstruction_error(self) -> float:
        return float(np.linalg.norm(self.matrix - self.function_matrix(lambda l: l)))


def spectral_fn(op: WeightedOperator, fn: FunctionLike, f: np.ndarray) -> np.ndarray:
    return op.apply(fn, f)


def assemble_C(lattice: SurfaceLattice, background: Background) -> WeightedOperator:
    """sqrt(N) (-div N h grad) sqrt(N) + V N^2 in flux form."""
    N = background.lapse
    w = lattice.vol_weight
    D = gradient_matrix(lattice)
    a = flux_coefficient(lattice, background)
    sN = np.sqrt(N)
    L = (D.T * a) @ D
    C = (sN[:, None] * L * sN[None, :]) / w[:, None] + np.diag(background.V * N**2)
    return WeightedOperator(C, w, name="C")


def stiffness(lattice: SurfaceLattice, background: Background) -> np.ndarray:
    """-div N h grad in flux form (weighted-symmetric, positive semidefinite)."""
    D = gradient_matrix(lattice)
    a = flux_coefficient(lattice, background)
    return ((D.T * a) @ D) / lattice.vol_weight[:, None]


SIGMA_BLOCK = np.array([[0.0, -1.0], [1.0, 0.0]])


def sigma_matrix(n: int) -> np.ndarray:
    return np.kron(SIGMA_BLOCK, np.eye(n))


class PhaseSpaceOperator:
    """Classical Hamiltonian H_cl, energy operator A and H_e = 2i sqrt(A) sigma sqrt(A).

    Matrices named without suffix act on site-basis Cauchy data vectors
    (phi0, phi1); the ``*_on`` variants use orthonormal coordinates sqrt(w) * d.
    """

    def __init__(self, lattice: SurfaceLattice, background: Background, tol: float = 1e-10):
        self.lattice = lattice
        self.background = background
        n = lattice.n_sites
        self.n = n
        w = lattice.vol_weight
        N = background.lapse
        Nx = background.shift_vec
        V = background.V

        K = stiffness(lattice, background)
        G = Nx[:, None] * central_gradient(lattice)
        Gstar = (G.T * w[None, :]) / w[:, None]
        self.K, self.G, self.Gstar = K, G, Gstar

        I = np.eye(n)
        Z = np.zeros((n, n))
        self.H_cl = -1j * np.block([[G, np.diag(N)], [-(K + np.diag(V * N)), -Gstar]])
        self.A = 0.5 * np.block([[K + np.diag(V * N), Gstar], [G, np.diag(N)]])
        self.sigma = sigma_matrix(n)
        self.weights = np.concatenate([w, w])

        resid = np.linalg.norm(self.A - 0.5j * self.sigma @ self.H_cl)
        self.sigma_residual = float(resid)
        if resid > tol * max(1.0, np.linalg.norm(self.A)):
            raise AssemblyError(f"A differs from (i/2) sigma H_cl by {resid:.3e}")

        s2 = np.sqrt(self.weights)
        self._s2 = s2
        A_on = s2[:, None] * self.A / s2[None, :]
        A_on = 0.5 * (A_on + A_on.conj().T)
        a_lam, a_vec = linalg.eigh(A_on)
        if a_lam[0] < -1e-12 * max(1.0, a_lam[-1]):
            raise AssemblyError(f"A is not positive semidefinite (eigenvalue {a_lam[0]:.3e})")
        if a_lam[0] <= 0:
            raise AssemblyError("A is singular; the potential must be strictly positive")
        self.A_eigenvalues = a_lam
        self.sqrtA_on = (a_vec * np.sqrt(a_lam)) @ a_vec.conj().T
        self.sqrtA_inv_on = (a_vec / np.sqrt(a_lam)) @ a_vec.conj().T

        sig = self.sigma
        He_on = 2j * self.sqrtA_on @ sig @ self.sqrtA_on
        He_on = 0.5 * (He_on + He_on.conj().T)
        mu, Y = linalg.eigh(He_on)
        if np.min(np.abs(mu)) <= 0:
            raise AssemblyError("H_e has a kernel")
        self.He_on = He_on
        self.he_values = mu
        self.he_vectors_on = Y
        self.neg = mu < 0
        self.pos = mu > 0

    # coordinate changes
    def to_on(self, x: np.ndarray) -> np.ndarray:
        return self._s2 * x

    def from_on(self, x: np.ndarray) -> np.ndarray:
        return x / self._s2

    def _site(self, M_on: np.ndarray) -> np.ndarray:
        return M_on * (1.0 / self._s2)[:, None] * self._s2[None, :]

    @property
    def H_e(self) -> np.ndarray:
        return self._site(self.He_on)

    @property
    def sqrtA(self) -> np.ndarray:
        return self._site(self.sqrtA_on)

    def projector_on(self, sign: int) -> np.ndarray:
        Y = self.he_vectors_on[:, self.pos if sign > 0 else self.neg]
        return Y @ Y.conj().T

    @property
    def P_plus(self) -> np.ndarray:
        return self._site(self.projector_on(+1))

    @property
    def P_minus(self) -> np.ndarray:
        return self._site(self.projector_on(-1))

    def q_cl(self) -> np.ndarray:
        """sqrt(A) as a map from site-basis data to orthonormal coordinates."""
        return self.sqrtA_on * self._s2[None, :]

    def inner(self, d, e) -> complex:
        return complex(np.sum(self.weights * np.conj(as_vector(d)) * as_vector(e)))

    def energy(self, d) -> float:
        x = as_vector(d)
        return float(np.real(self.inner(x, self.A @ x)))

    def mass_gap(self) -> float:
        return float(np.min(np.abs(self.he_values)))


def assemble_phase_space(lattice: SurfaceLattice, background: Background) -> PhaseSpaceOperator:
    return PhaseSpaceOperator(lattice, background)
