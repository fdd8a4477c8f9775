"""Command-line driver: kmslab <subcommand> [--preset NAME | --config FILE] [options].

Exit codes: 0 success, 2 configuration error, 3 invariant violation,
4 a check failed, 5 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import acceptance
from .background import (
    CauchyData,
    ConfigError,
    InvariantError,
    RunParams,
    load_config,
    load_preset,
    preset_names,
    random_data,
)
from .classical import Evolution, NonStaticError, commutator_kernel, energy
from .euclid import CylinderLattice, green_closed_form, green_direct, green_mode_sum, wick_rotate
from .gibbs import (
    FockDimensionError,
    build_fock,
    gibbs_kms_check,
    gibbs_two_point,
    gibbs_weyl_expectation,
    occupation,
    partition_bound,
    partition_function,
    partition_function_closed,
    project,
    quartic_coefficient,
)
from .spectral import AssemblyError, SpectralDomainError, assemble_C, assemble_phase_space
from .thermal import StateError, ground_state, kms_state, kms_verify, weyl_expectation

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_CHECK, EXIT_INTERNAL = 0, 2, 3, 4, 5


class CheckFailure(RuntimeError):
    pass


# --- output ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write rows with 17 significant digits; the file appears atomically."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _beta(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        b = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a positive number or 'inf', got {text!r}") from None
    if not b > 0:
        raise argparse.ArgumentTypeError("beta must be positive")
    return b


# --- context -----------------------------------------------------------------


class Context:
    def __init__(self, args: argparse.Namespace):
        if args.config:
            self.lattice, self.background, run = load_config(args.config)
            self.label = Path(args.config).stem
        else:
            self.lattice, self.background, run = load_preset(args.preset)
            self.label = args.preset.upper()
        self.run = RunParams(
            beta=run.beta,
            R=run.R,
            times=run.times,
            tolerance=args.tolerance if args.tolerance is not None else run.tolerance,
            seed=args.seed if args.seed is not None else run.seed,
            output_dir=args.output_dir or run.output_dir,
        )
        if not self.run.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        self.out = Path(self.run.output_dir)

    def rng(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng([self.run.seed, *stream])


# --- subcommands -------------------------------------------------------------


def cmd_spectrum(ctx: Context, args) -> int:
    C = assemble_C(ctx.lattice, ctx.background)
    lam = C.eigenvalues
    write_csv(ctx.out / "spectrum.csv", ["k", "lambda", "omega"], [(k, l, math.sqrt(l)) for k, l in enumerate(lam)])
    ps = assemble_phase_space(ctx.lattice, ctx.background)
    he = np.sort(ps.he_values)
    write_csv(ctx.out / "he_spectrum.csv", ["k", "lambda"], list(enumerate(he)))
    return EXIT_OK


def _load_data(ctx: Context, spec: str) -> CauchyData:
    n = ctx.lattice.n_sites
    x = ctx.lattice.coords
    if spec == "random":
        return random_data(ctx.lattice, ctx.rng(1))
    if spec == "constant":
        return CauchyData(np.ones(n), np.zeros(n))
    if spec == "bump":
        c = 0.5 * ctx.lattice.length
        return CauchyData(np.exp(-((x - c) ** 2)), np.zeros(n))
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"--data must be random, constant, bump or a JSON file; {spec!r} not found")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    try:
        p0, p1 = np.asarray(obj["phi0"], dtype=float), np.asarray(obj["phi1"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: expected numeric arrays phi0 and phi1 ({e})") from None
    if p0.shape != (n,) or p1.shape != (n,):
        raise ConfigError(f"{path}: phi0 and phi1 must have length {n}")
    return CauchyData(p0, p1)


def cmd_evolve(ctx: Context, args) -> int:
    ps = assemble_phase_space(ctx.lattice, ctx.background)
    ev = Evolution(ps)
    d = _load_data(ctx, args.data)
    times = args.t if args.t is not None else list(ctx.run.times)
    rows = []
    for t in times:
        y = ev(d, t)
        E = energy(ps, y)
        for i in range(ctx.lattice.n_sites):
            p0, p1 = complex(y.phi0[i]), complex(y.phi1[i])
            rows.append((t, i, p0.real, p0.imag, p1.real, p1.imag, E))
    write_csv(ctx.out / "evolve.csv", ["t", "site", "re_phi0", "im_phi0", "re_phi1", "im_phi1", "energy"], rows)
    return EXIT_OK


def _state(ctx: Context, beta: float):
    if math.isinf(beta):
        return ground_state(ctx.lattice, ctx.background)
    return kms_state(ctx.lattice, ctx.background, beta)


def cmd_twopoint(ctx: Context, args) -> int:
    beta = args.beta if args.beta is not None else ctx.run.beta
    st = _state(ctx, beta)
    dts = args.dt if args.dt is not None else list(ctx.run.times)
    n = ctx.lattice.n_sites
    rows, brows = [], []
    for dt in dts:
        W = st.blocks(dt)
        for i in range(n):
            for j in range(n):
                v = complex(W[0, 0, i, j])
                rows.append((dt, i, j, v.real, v.imag))
        for a in range(2):
            for b in range(2):
                for i in range(n):
                    for j in range(n):
                        v = complex(W[a, b, i, j])
                        brows.append((dt, f"W{a}{b}", i, j, v.real, v.imag))
    write_csv(ctx.out / "twopoint.csv", ["dt", "i", "j", "re", "im"], rows)
    write_csv(ctx.out / "blocks.csv", ["dt", "block", "i", "j", "re", "im"], brows)
    return EXIT_OK


def cmd_kms_verify(ctx: Context, args) -> int:
    betas = args.beta if args.beta is not None else [ctx.run.beta]
    rng = ctx.rng(2)
    data = [(random_data(ctx.lattice, rng).vector(), random_data(ctx.lattice, rng).vector()) for _ in range(args.pairs)]
    tol = ctx.run.tolerance
    rows = []
    for beta in betas:
        st = kms_state(ctx.lattice, ctx.background, beta)
        for t in ctx.run.times:
            for p, (f, g) in enumerate(data):
                r = kms_verify(st, f, g, t)
                for kind, val in (("one_particle", r.one_particle), ("weyl", r.weyl), ("real_axis", r.real_axis)):
                    rows.append((f"beta={beta:g}:t={t:g}:pair={p}:{kind}", val, val <= tol))
    write_csv(ctx.out / "kms_report.csv", ["test_id", "residual", "pass"], rows)
    if not all(r[2] for r in rows):
        raise CheckFailure("kms-verify: residual above tolerance")
    return EXIT_OK


def cmd_euclid(ctx: Context, args) -> int:
    R = args.R if args.R is not None else ctx.run.R
    C = assemble_C(ctx.lattice, ctx.background)
    cf = green_closed_form(R, ctx.background, C)
    nt = args.n_tau
    g1 = green_direct(CylinderLattice(R, nt, ctx.lattice), ctx.background, C=C)
    g2 = green_direct(CylinderLattice(R, 2 * nt, ctx.lattice), ctx.background, C=C)
    m1 = green_mode_sum(R, ctx.background, args.n_max, C)
    m2 = green_mode_sum(R, ctx.background, 10 * args.n_max, C)
    beta = 2 * math.pi * R
    taus = [beta * a / 8 for a in range(5)]

    def err(a, b, t):
        return float(np.max(np.abs(a.kernel(t) - b.kernel(t))))

    rows = []
    for pair in args.compare:
        for t in taus:
            if pair == "direct:closed_form":
                e1, e2 = err(g1, cf, t), err(g2, cf, t)
                order = math.log2(e1 / e2) if e1 > 0 and e2 > 0 else float("nan")
            elif pair == "mode_sum:closed_form":
                e1, e2 = err(m1, cf, t), err(m2, cf, t)
                order = math.log10(e1 / e2) if e1 > 0 and e2 > 0 else float("nan")
            elif pair == "direct:mode_sum":
                e1, order = err(g1, m1, t), float("nan")
            else:
                raise ConfigError(f"unknown route pair {pair!r}")
            rows.append((pair, t, e1, order))
    write_csv(ctx.out / "euclid_report.csv", ["route_pair", "dtau", "max_abs_err", "conv_order_estimate"], rows)
    return EXIT_OK


def cmd_wick(ctx: Context, args) -> int:
    R = args.R if args.R is not None else ctx.run.R
    C = assemble_C(ctx.lattice, ctx.background)
    wr = wick_rotate(ctx.background, R, C)
    st = kms_state(ctx.lattice, ctx.background, 2 * math.pi * R)
    rows = []
    for dt in args.dt:
        E = commutator_kernel(C, ctx.background, dt).matrix
        th = 1.0 if dt > 0 else (0.0 if dt < 0 else 0.5)
        checks = (
            ("omega", wr.omega(dt), st.blocks(dt)[0, 0]),
            ("commutator", wr.E_minus(dt) - wr.E_plus(dt), E),
            ("E_plus", wr.E_plus(dt), -th * E),
            ("E_minus", wr.E_minus(dt), (1 - th) * E),
        )
        for name, a, b in checks:
            rows.append((name, dt, float(np.max(np.abs(a - b)))))
    write_csv(ctx.out / "wick_report.csv", ["object", "dt", "max_abs_err_vs_lorentzian"], rows)
    return EXIT_OK


def cmd_gibbs(ctx: Context, args) -> int:
    beta = args.beta if args.beta is not None else ctx.run.beta
    if not math.isfinite(beta):
        raise ConfigError("gibbs needs a finite beta")
    g0 = ground_state(ctx.lattice, ctx.background)
    st = kms_state(ctx.lattice, ctx.background, beta)
    ft = build_fock(g0.frequencies, args.modes, args.nmax, beta)
    leak = ft.leakage_bound
    tol = ctx.run.tolerance
    rng = ctx.rng(3)
    f = acceptance.gibbs_test_data(ctx.lattice, ctx.background, ft.modes, rng)
    g = acceptance.gibbs_test_data(ctx.lattice, ctx.background, ft.modes, rng)
    disc = project(ft, g0, f).discarded_weight + project(ft, g0, g).discarded_weight
    rows = []

    def add(check, value, reference, allowed):
        err = abs(value - reference)
        rows.append((check, value, reference, err, allowed, err <= allowed))

    Z = partition_function(ft)
    add("partition_function", Z, partition_function_closed(ft), partition_bound(ft) + tol * Z)
    nbar = 1.0 / math.expm1(beta * ft.omegas[0])
    add("occupation_mode0", occupation(ft, 0), nbar, leak * ft.n_max + tol)
    wv = gibbs_weyl_expectation(ft, g0, f)
    add("weyl_expectation", wv.real, weyl_expectation(st, f).real, 1e-6 + leak + disc)
    tp = gibbs_two_point(ft, g0, f, g)
    # a quadratic observable feels the cut through <a* a>, hence the rung count
    cf, cg = project(ft, g0, f).coefficients, project(ft, g0, g).coefficients
    quad = 2 * (ft.n_max + 1) * leak * float(np.linalg.norm(cf) * np.linalg.norm(cg))
    add("two_point_re", tp.real, st.two_point(f, g).real, 1e-6 + quad + disc)
    add("two_point_im", tp.imag, st.two_point(f, g).imag, 1e-6 + quad + disc)
    add("quartic_coefficient", quartic_coefficient(ft, g0, f), 0.0, 1e-6)
    for t in ctx.run.times:
        add(f"kms_t={t:g}", gibbs_kms_check(ft, g0, f, g, t), 0.0, 1e-7 + leak)
    write_csv(ctx.out / "gibbs_report.csv", ["check", "value", "reference", "abs_err", "leakage_bound", "pass"], rows)
    if not all(r[5] for r in rows):
        raise CheckFailure("gibbs: a check exceeded its error budget")
    return EXIT_OK


def cmd_report(ctx: Context, args) -> int:
    results = acceptance.run_all()
    rows = [(r.number, r.name, r.value, r.threshold, r.passed, r.detail) for r in results]
    write_csv(ctx.out / "report.csv", ["criterion", "name", "value", "threshold", "pass", "detail"], rows)
    for r in results:
        print(r.line())
    if not all(r.passed for r in results):
        raise CheckFailure("report: at least one acceptance criterion failed")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--preset", default="FLAT16", help=f"built-in configuration ({', '.join(preset_names())}); default FLAT16")
    src.add_argument("--config", help="path to a JSON configuration file")
    common.add_argument("--output-dir", help="directory for CSV output (default: run.output_dir of the config)")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--tolerance", type=float, help="override run.tolerance")

    p = argparse.ArgumentParser(prog="kmslab", description="Ground and thermal states of a lattice Klein-Gordon field.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", parents=[common], help="eigenvalues of C and H_e")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("evolve", parents=[common], help="evolve Cauchy data exactly")
    s.add_argument("--t", type=_floats, help="comma-separated times (default: run.times)")
    s.add_argument("--data", default="random", help="random, constant, bump, or a JSON file with phi0 and phi1")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("twopoint", parents=[common], help="two-point kernels of the ground or KMS state")
    s.add_argument("--beta", type=_beta, help="inverse temperature or 'inf' for the ground state (default: run.beta)")
    s.add_argument("--dt", type=_floats, help="comma-separated time separations (default: run.times)")
    s.set_defaults(func=cmd_twopoint)

    s = sub.add_parser("kms-verify", parents=[common], help="KMS boundary residuals on seeded data")
    s.add_argument("--beta", type=lambda v: [_beta(x) for x in v.split(",")], help="comma-separated inverse temperatures")
    s.add_argument("--pairs", type=int, default=5, help="number of seeded data pairs (default 5)")
    s.set_defaults(func=cmd_kms_verify)

    s = sub.add_parser("euclid", parents=[common], help="compare Euclidean Green's function routes")
    s.add_argument("--R", type=float, help="imaginary-time radius (default: run.R)")
    s.add_argument("--n-tau", type=int, default=128, help="imaginary-time sites, even (default 128)")
    s.add_argument("--n-max", type=int, default=1000, help="Matsubara cutoff (default 1000)")
    s.add_argument(
        "--compare",
        type=lambda v: [x.strip() for x in v.split(",")],
        default=["direct:closed_form", "mode_sum:closed_form", "direct:mode_sum"],
        help="comma-separated route pairs among direct:closed_form, mode_sum:closed_form, direct:mode_sum",
    )
    s.set_defaults(func=cmd_euclid)

    s = sub.add_parser("wick", parents=[common], help="Wick-rotated kernels against Lorentzian ones")
    s.add_argument("--R", type=float, help="imaginary-time radius (default: run.R)")
    s.add_argument("--dt", type=_floats, default=[-1.7, -0.5, 0.0, 0.5, 1.7], help="comma-separated time separations")
    s.set_defaults(func=cmd_wick)

    s = sub.add_parser("gibbs", parents=[common], help="truncated Fock-space Gibbs oracle")
    s.add_argument("--modes", type=int, default=3, help="number of lowest modes (default 3)")
    s.add_argument("--nmax", type=int, default=25, help="occupation cutoff per mode (default 25)")
    s.add_argument("--beta", type=_beta, help="inverse temperature (default: run.beta)")
    s.set_defaults(func=cmd_gibbs)

    s = sub.add_parser("report", parents=[common], help="run the acceptance suite and write report.csv")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        ctx = Context(args)
        return args.func(ctx, args)
    except (ConfigError, NonStaticError, StateError, FockDimensionError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantError, AssemblyError, SpectralDomainError) as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except CheckFailure as e:
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_CHECK
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
