"""Surface lattice, background fields and configuration loading.

The Cauchy surface is one-dimensional: a circle (periodic) or an interval
with zero boundary values (dirichlet). Sites sit at x_i = i*dx (periodic)
or (i+1)*dx (dirichlet) and integrals use the midpoint rule with weights
sqrt(h_xx)*dx.

Discrete delta functions follow the density convention e_i / vol_weight_i,
and every "kernel" returned by this package is a matrix K with
(Q f)(x) = sum_y vol_weight_y K(x, y) f(y).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np


class ConfigError(ValueError):
    """Malformed configuration (exit code 2)."""


class InvariantError(ValueError):
    """Data violating a physical invariant (exit code 3)."""


TOPOLOGIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class SurfaceLattice:
    n_sites: int
    length: float
    topology: str = "periodic"
    h_xx: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise InvariantError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise InvariantError(f"length must be positive, got {self.length}")
        if self.topology not in TOPOLOGIES:
            raise InvariantError(f"unknown topology {self.topology!r}")
        h = np.ones(self.n_sites) if self.h_xx is None else np.asarray(self.h_xx, dtype=float)
        if h.ndim == 0:
            h = np.full(self.n_sites, float(h))
        if h.shape != (self.n_sites,):
            raise InvariantError(f"h_xx must have length {self.n_sites}")
        bad = np.flatnonzero(~(h > 0))
        if bad.size:
            raise InvariantError(f"metric not positive: h_xx ≤ 0 at site {bad[0]}")
        h.setflags(write=False)
        object.__setattr__(self, "h_xx", h)

    @property
    def periodic(self) -> bool:
        return self.topology == "periodic"

    @property
    def spacing(self) -> float:
        if self.periodic:
            return self.length / self.n_sites
        return self.length / (self.n_sites + 1)

    @property
    def coords(self) -> np.ndarray:
        i = np.arange(self.n_sites)
        return i * self.spacing if self.periodic else (i + 1) * self.spacing

    @property
    def vol_weight(self) -> np.ndarray:
        return np.sqrt(self.h_xx) * self.spacing

    @property
    def n_faces(self) -> int:
        return self.n_sites if self.periodic else self.n_sites + 1

    def volume(self) -> float:
        return float(np.sum(self.vol_weight))


@dataclass(frozen=True)
class Background:
    """Stationary data (v, w, V) on a lattice; lapse and shift are derived."""

    lattice: SurfaceLattice
    v: np.ndarray
    w: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        n = self.lattice.n_sites
        for name in ("v", "w", "V"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim == 0:
                arr = np.full(n, float(arr))
            if arr.shape != (n,):
                raise InvariantError(f"{name} must have length {n}, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InvariantError(f"{name} has non-finite entries")
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        bad = np.flatnonzero(~(self.v > 0))
        if bad.size:
            raise InvariantError(f"v must be positive: v ≤ 0 at site {bad[0]}")
        bad = np.flatnonzero(~(self.V > 0))
        if bad.size:
            raise InvariantError(f"potential must be positive: V ≤ 0 at site {bad[0]}")
        bad = np.flatnonzero(self.lattice.h_xx * self.w**2 >= self.v**2)
        if bad.size:
            raise InvariantError(f"shift bound violated: h^{{xx}}w² ≥ v² at site {bad[0]}")

    def is_static(self) -> bool:
        return not np.any(self.w)

    @property
    def lapse(self) -> np.ndarray:
        if self.is_static():
            return self.v
        return np.sqrt(self.v**2 + self.lattice.h_xx * self.w**2)

    N = lapse

    @property
    def shift_vec(self) -> np.ndarray:
        return self.lattice.h_xx * self.w


@dataclass(frozen=True)
class CauchyData:
    phi0: np.ndarray
    phi1: np.ndarray

    def __post_init__(self):
        p0 = np.asarray(self.phi0)
        p1 = np.asarray(self.phi1)
        if p0.ndim != 1 or p0.shape != p1.shape:
            raise ValueError("phi0 and phi1 must be 1-d vectors of equal length")
        object.__setattr__(self, "phi0", p0)
        object.__setattr__(self, "phi1", p1)

    @property
    def n(self) -> int:
        return self.phi0.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.phi0, self.phi1])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "CauchyData":
        x = np.asarray(x)
        n = x.shape[0] // 2
        return cls(x[:n], x[n:])

    def conj(self) -> "CauchyData":
        return CauchyData(np.conj(self.phi0), np.conj(self.phi1))

    def is_real(self) -> bool:
        return not (np.iscomplexobj(self.phi0) and np.any(self.phi0.imag)) and not (
            np.iscomplexobj(self.phi1) and np.any(self.phi1.imag)
        )

    def __add__(self, other: "CauchyData") -> "CauchyData":
        return CauchyData(self.phi0 + other.phi0, self.phi1 + other.phi1)

    def __mul__(self, s) -> "CauchyData":
        return CauchyData(s * self.phi0, s * self.phi1)

    __rmul__ = __mul__


def as_vector(d) -> np.ndarray:
    return d.vector() if isinstance(d, CauchyData) else np.asarray(d)


@dataclass(frozen=True)
class RunParams:
    beta: float = 1.0
    R: float = 1.0 / (2 * math.pi)
    times: tuple = (0.0, 0.7, 2.3)
    tolerance: float = 1e-9
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if not (self.tolerance > 0):
            raise ConfigError("run.tolerance must be positive")
        if not all(math.isfinite(t) for t in self.times):
            raise ConfigError("run.times must be finite")
        if not (self.beta > 0):
            raise ConfigError("run.beta must be positive or 'inf'")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ConfigError("run.R must be positive and finite")


# --- discrete calculus -------------------------------------------------------


def gradient_matrix(lattice: SurfaceLattice) -> np.ndarray:
    """Forward difference from sites to faces, divided by the spacing.

    Face f of a periodic lattice sits between sites f and f+1. A dirichlet
    lattice has n+1 faces, the outer two touching the zero boundary values.
    """
    n, dx = lattice.n_sites, lattice.spacing
    if lattice.periodic:
        D = -np.eye(n) + np.roll(np.eye(n), 1, axis=1)
    else:
        D = np.zeros((n + 1, n))
        D[np.arange(n), np.arange(n)] = 1.0
        D[np.arange(1, n + 1), np.arange(n)] = -1.0
    return D / dx


def face_average(lattice: SurfaceLattice, values: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the two sites adjacent to each face.

    Boundary faces of a dirichlet lattice take the value of their only
    neighbouring site.
    """
    s = np.asarray(values, dtype=float)
    if lattice.periodic:
        return 0.5 * (s + np.roll(s, -1))
    out = np.empty(lattice.n_sites + 1)
    out[0], out[-1] = s[0], s[-1]
    out[1:-1] = 0.5 * (s[:-1] + s[1:])
    return out


def face_to_site(lattice: SurfaceLattice) -> np.ndarray:
    """Averaging matrix taking face values to sites (n x n_faces)."""
    n = lattice.n_sites
    F = np.zeros((n, lattice.n_faces))
    i = np.arange(n)
    if lattice.periodic:
        F[i, i] = 0.5
        F[i, (i - 1) % n] += 0.5
    else:
        F[i, i] = 0.5
        F[i, i + 1] = 0.5
    return F


def central_gradient(lattice: SurfaceLattice) -> np.ndarray:
    """Site-centred derivative: forward differences averaged back to sites."""
    return face_to_site(lattice) @ gradient_matrix(lattice)


def flux_coefficient(lattice: SurfaceLattice, background: Background) -> np.ndarray:
    """Face coefficient of the divergence-form gradient term, N h^xx sqrt(h) dx."""
    return face_average(lattice, background.lapse * lattice.h_xx * lattice.vol_weight)


def inner_product(lattice: SurfaceLattice, f, g) -> complex:
    f = np.asarray(f)
    g = np.asarray(g)
    if f.shape != (lattice.n_sites,) or g.shape != (lattice.n_sites,):
        raise ValueError(f"vectors must have length {lattice.n_sites}, got {f.shape} and {g.shape}")
    return complex(np.sum(lattice.vol_weight * np.conj(f) * g))


# --- configuration -----------------------------------------------------------

EXPRESSIONS = ("const", "cos", "shifted_cos")


def evaluate_field(spec: Any, x: np.ndarray, name: str) -> np.ndarray:
    """Per-site values from a literal array, a scalar or a named expression."""
    n = x.shape[0]
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.full(n, float(spec))
    if isinstance(spec, list):
        if len(spec) != n:
            raise ConfigError(f"{name}: expected {n} values, got {len(spec)}")
        try:
            return np.array([float(s) for s in spec])
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: array entries must be numbers") from None
    if isinstance(spec, dict):
        expr = spec.get("expr")
        params = spec.get("params", {}) or {}
        if not isinstance(params, dict):
            raise ConfigError(f"{name}.params must be an object")
        unknown = set(spec) - {"expr", "params"}
        if unknown:
            raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
        try:
            p = {k: float(v) for k, v in params.items()}
        except (TypeError, ValueError):
            raise ConfigError(f"{name}.params must be numeric") from None
        if expr == "const":
            _check_params(name, p, {"value"})
            return np.full(n, p.get("value", 1.0))
        if expr == "cos":
            _check_params(name, p, {"b", "k"})
            return p.get("b", 1.0) * np.cos(p.get("k", 1.0) * x)
        if expr == "shifted_cos":
            _check_params(name, p, {"a", "b", "k"})
            return p.get("a", 0.0) + p.get("b", 1.0) * np.cos(p.get("k", 1.0) * x)
        raise ConfigError(f"{name}.expr must be one of {EXPRESSIONS}, got {expr!r}")
    raise ConfigError(f"{name}: expected a number, an array or an expression object")


def _check_params(name, p, allowed):
    extra = set(p) - allowed
    if extra:
        raise ConfigError(f"{name}.params: unknown parameters {sorted(extra)}")


def _section(cfg: Mapping, key: str, required: bool = True) -> Mapping:
    sec = cfg.get(key)
    if sec is None:
        if required:
            raise ConfigError(f"missing section '{key}'")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{key}' must be an object")
    return sec


def parse_config(cfg: Mapping) -> tuple[SurfaceLattice, Background, RunParams]:
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be an object")
    unknown = set(cfg) - {"lattice", "background", "run", "name"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    lat = _section(cfg, "lattice")
    try:
        n = lat["n"]
        length = lat["length"]
    except KeyError as e:
        raise ConfigError(f"lattice.{e.args[0]} is required") from None
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError("lattice.n must be an integer")
    if not isinstance(length, (int, float)) or isinstance(length, bool):
        raise ConfigError("lattice.length must be a number")
    topology = lat.get("topology", "periodic")
    if topology not in TOPOLOGIES:
        raise ConfigError(f"lattice.topology must be one of {TOPOLOGIES}")
    if n < 2:
        raise ConfigError("lattice.n must be >= 2")
    if not length > 0:
        raise ConfigError("lattice.length must be positive")
    probe = SurfaceLattice(n, float(length), topology)
    h = evaluate_field(lat.get("h_xx", 1.0), probe.coords, "lattice.h_xx")
    lattice = SurfaceLattice(n, float(length), topology, h)

    bg = _section(cfg, "background")
    x = lattice.coords
    v = evaluate_field(bg.get("v", 1.0), x, "background.v")
    w = evaluate_field(bg.get("w", 0.0), x, "background.w")
    V = evaluate_field(bg.get("potential", 1.0), x, "background.potential")
    background = Background(lattice, v, w, V)

    run = parse_run(_section(cfg, "run", required=False))
    return lattice, background, run


def parse_run(run: Mapping) -> RunParams:
    def num(key, default):
        val = run.get(key, default)
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"run.{key} must be a number")
        return float(val)

    beta_raw = run.get("beta")
    R_raw = run.get("R")
    beta = None
    if beta_raw is not None:
        if beta_raw == "inf":
            beta = math.inf
        else:
            beta = num("beta", None)
    R = num("R", None) if R_raw is not None else None
    if beta is not None and R is not None and math.isfinite(beta):
        if abs(beta - 2 * math.pi * R) > 1e-12 * beta:
            raise ConfigError(f"run.beta={beta!r} inconsistent with 2*pi*R={2 * math.pi * R!r}")
    if beta is None:
        beta = 2 * math.pi * R if R is not None else 1.0
    if R is None:
        R = beta / (2 * math.pi) if math.isfinite(beta) else 1.0
    times = run.get("times", [0.0, 0.7, 2.3])
    if not isinstance(times, list) or not all(
        isinstance(t, (int, float)) and not isinstance(t, bool) for t in times
    ):
        raise ConfigError("run.times must be a list of numbers")
    seed = run.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not (0 <= seed < 2**64):
        raise ConfigError("run.seed must be a 64-bit non-negative integer")
    out = run.get("output_dir", "out")
    if not isinstance(out, str):
        raise ConfigError("run.output_dir must be a string")
    return RunParams(
        beta=beta,
        R=R,
        times=tuple(float(t) for t in times),
        tolerance=num("tolerance", 1e-9),
        seed=seed,
        output_dir=out,
    )


def load_config(path) -> tuple[SurfaceLattice, Background, RunParams]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_config(cfg)


PRESET_DIR = Path(__file__).parent / "presets"


def preset_names() -> list[str]:
    return sorted(p.stem.upper() for p in PRESET_DIR.glob("*.json"))


def load_preset(name: str) -> tuple[SurfaceLattice, Background, RunParams]:
    path = PRESET_DIR / f"{name.lower()}.json"
    if not path.exists():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return load_config(path)


def random_data(lattice: SurfaceLattice, rng: np.random.Generator, complex_: bool = False) -> CauchyData:
    n = lattice.n_sites
    if complex_:
        z = rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))
    else:
        z = rng.standard_normal((2, n))
    return CauchyData(z[0], z[1])
