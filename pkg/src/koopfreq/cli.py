"""Command-line interface: simulate, respond, sweep, validate.

Exit codes: 0 success, 2 configuration error, 3 divergence during
integration, 4 output never settled, 5 estimator cross-check failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import bode, dmd, lti, reference, response as rsp, sim
from . import expr as ex
from .plantfile import PlantFileError, load_plant
from .system import PlantSpec, SkewSystem, apply_generator

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NOT_STEADY = 4
EXIT_CROSS_CHECK = 5

RESPONSE_CSV_HEADER = "omega,order,re_H,im_H,gain_db,phase_deg,method,err,status"


class ConfigError(Exception):
    pass


def _parse_u0(text: str) -> complex:
    """'mag' or 'mag@phase_deg', e.g. '1' or '0.5@45'."""
    try:
        if "@" in text:
            mag_s, ph_s = text.split("@", 1)
            mag, ph = float(mag_s), math.radians(float(ph_s))
        else:
            mag, ph = float(text), 0.0
    except ValueError:
        raise ConfigError(f"bad --u0 {text!r}: use mag or mag@phase_deg") from None
    if mag <= 0:
        raise ConfigError("--u0 magnitude must be positive")
    return mag * complex(math.cos(ph), math.sin(ph))


def _parse_grid(text: str) -> bode.GridSpec:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"bad --omega-grid {text!r}: use min:max:points")
    try:
        return bode.GridSpec(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError as err:
        raise ConfigError(f"bad --omega-grid {text!r}: {err}") from None


def _parse_orders(texts: list[str]) -> list[rsp.OrderTag]:
    out = []
    for t in texts:
        try:
            out.append(rsp.OrderTag.parse(t))
        except ValueError as err:
            raise ConfigError(f"bad --order {t!r}: {err}") from None
    return out


def _parse_methods(text: str) -> tuple[str, ...]:
    methods = tuple(m.strip() for m in text.split(",") if m.strip())
    for m in methods:
        if m not in ("harm", "abel", "dmd"):
            raise ConfigError(f"unknown method {m!r}: choose from harm,abel,dmd")
    if not methods:
        raise ConfigError("--methods must name at least one method")
    return methods


def _load(args) -> PlantSpec:
    try:
        return load_plant(args.plant)
    except FileNotFoundError:
        raise ConfigError(f"plant file not found: {args.plant}") from None
    except PlantFileError as err:
        raise ConfigError(f"{args.plant}: {err}") from None


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dt(args, sysw: SkewSystem) -> float:
    step = args.dt if args.dt is not None else sysw.period / 256
    return min(step, sysw.period / 64)


def _fmt_c(z: complex) -> str:
    return f"{z.real:.9g}{z.imag:+.9g}j"


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    plant = _load(args)
    sysw = SkewSystem(plant, args.omega, _parse_u0(args.u0))
    x0 = _parse_x0(args.x0, plant.dim)
    T = max(args.horizon_periods * sysw.period, args.min_horizon)
    try:
        traj = sim.integrate(sysw, x0, T, _dt(args, sysw))
    except sim.NonFiniteState as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    report, _ = sim.detect_steady_state(traj, args.tol)

    out = _outdir(args)
    csv_path = out / "trajectory.csv"
    traj.to_csv(csv_path)
    print(f"plant: {plant.name}")
    print(f"omega: {sysw.omega:g}")
    print(f"u0: {_fmt_c(sysw.u0)}")
    print(f"samples: {len(traj.outputs)}")
    print(f"dt: {traj.dt:.15g}")
    print(f"periodic: {str(report.periodic).lower()}")
    if report.periodic:
        print(f"detected_period: {report.detected_period:.15g}")
        print(f"transient_end: {report.transient_end:.15g}")
    print(f"residual: {report.residual:.6g}")
    print(f"wrote: {csv_path}")
    return EXIT_OK if report.periodic else EXIT_NOT_STEADY


def _parse_x0(text: str, dim: int) -> list[complex]:
    if not text:
        return [0j] * dim
    try:
        vals = [complex(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"bad --x0 {text!r}: comma-separated numbers") from None
    if len(vals) != dim:
        raise ConfigError(f"--x0 has {len(vals)} entries, plant dim is {dim}")
    return vals


# ---------------------------------------------------------------------------
# respond
# ---------------------------------------------------------------------------

def cmd_respond(args) -> int:
    plant = _load(args)
    orders = _parse_orders(args.order or ["1"])
    methods = _parse_methods(args.methods)
    sysw = SkewSystem(plant, args.omega, _parse_u0(args.u0))
    T = max(args.horizon_periods * sysw.period, args.min_horizon)
    try:
        traj = sim.integrate(sysw, [0.0] * plant.dim, T, _dt(args, sysw))
    except sim.NonFiniteState as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED

    rows: list[str] = []
    any_cross_fail = False
    try:
        steady = sim.detect_steady_state(traj, args.tol)
        for order in orders:
            results = rsp.estimate(traj, order, methods, args.window,
                                   args.tol, dmd_delay=args.dmd_delay,
                                   steady=steady)
            primary = results[methods[0]]
            status = "ok"
            for m in methods[1:]:
                ok, rep = rsp.cross_check(primary, results[m], args.cross_tol)
                verdict = "ok" if ok else "FAIL"
                print(f"cross_check {order.label} {primary.method} vs "
                      f"{results[m].method}: {verdict} gap={rep.gap:.3g} "
                      f"(tol {rep.rel_tol:g})")
                if not ok:
                    any_cross_fail = True
                    status = "cross_check_failed"
            for m in methods:
                r = results[m]
                mag = abs(r.value)
                gain = 20 * math.log10(mag) if mag > 0 else -math.inf
                phase = math.degrees(math.atan2(r.value.imag, r.value.real)) if mag > 0 else 0.0
                print(f"order={order.label} method={r.method} "
                      f"H={_fmt_c(r.value)} |H|={mag:.9g} "
                      f"phase={phase:.6g}deg err={r.err_estimate:.3g}")
                rows.append(",".join([
                    f"{sysw.omega:.15g}", order.label, f"{r.value.real:.15g}",
                    f"{r.value.imag:.15g}",
                    f"{gain:.15g}" if math.isfinite(gain) else "",
                    f"{phase:.15g}", r.method, f"{r.err_estimate:.15g}", status]))
    except rsp.NotSteady as err:
        print(f"not steady: {err}", file=sys.stderr)
        return EXIT_NOT_STEADY

    out = _outdir(args)
    csv_path = out / "responses.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(RESPONSE_CSV_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")
    print(f"wrote: {csv_path}")
    return EXIT_CROSS_CHECK if any_cross_fail else EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def cmd_sweep(args) -> int:
    plant = _load(args)
    orders = _parse_orders(args.order or ["1"])
    methods = _parse_methods(args.methods)
    grid = _parse_grid(args.omega_grid)
    tables = bode.sweep(plant, orders, grid, _parse_u0(args.u0), methods,
                        horizon_periods=args.horizon_periods,
                        min_horizon=args.min_horizon, dt=args.dt,
                        window=args.window, tol=args.tol,
                        cross_tol=args.cross_tol, dmd_delay=args.dmd_delay)
    out = _outdir(args)
    for t in tables:
        fname = "bode_" + t.order.label.replace("/", "_") + ".csv"
        bode.emit_csv(t, out / fname)
        print(f"wrote: {out / fname}")
    svg_path = out / "bode.svg"
    bode.emit_svg(tables, svg_path)
    print(f"wrote: {svg_path}")

    statuses = {r.status for t in tables for r in t.rows}
    if "cross_check_failed" in statuses:
        return EXIT_CROSS_CHECK
    if "not_steady" in statuses:
        return EXIT_NOT_STEADY
    if "diverged" in statuses:
        return EXIT_DIVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _validate_checks(rng: np.random.Generator, a1: float, a2: float):
    """Yield (name, tol, observed) tuples; observed <= tol means pass."""

    # rotating-channel eigenpairs u^n and u^(1/n) under the generator
    carrier = PlantSpec.from_strings("carrier", 1, ("-x1",), "x1", {})
    sysw = SkewSystem(carrier, 1.3, 0.8 + 0.3j)
    worst = 0.0
    for n in (1, 2, 3):
        f = ex.Pow(ex.UVar(), n)
        lam = 1j * n * sysw.omega
        for _ in range(40):
            x = (_rand_c(rng),)
            u = _rand_c(rng, lo=0.3)
            got = apply_generator(sysw, f, x, u)
            want = lam * ex.evaluate(f, x, u)
            worst = max(worst, abs(got - want) / (1 + abs(want)))
    yield "rotation-harmonic-eigenpairs", 1e-10, worst

    worst = 0.0
    for n in (2, 3):
        from fractions import Fraction
        f = ex.Pow(ex.UVar(), Fraction(1, n))
        lam = 1j * sysw.omega / n
        for _ in range(40):
            x = (_rand_c(rng),)
            u = _rand_c(rng, lo=0.3)
            got = apply_generator(sysw, f, x, u)
            want = lam * ex.evaluate(f, x, u)
            worst = max(worst, abs(got - want) / (1 + abs(want)))
    yield "rotation-root-eigenpairs", 1e-10, worst

    # cascade eigenfunction identities
    casc = reference.QuadraticCascade(a1, a2, 1.0)
    plant = reference.to_plant_spec(casc)
    sysc = SkewSystem(plant, casc.omega, 1.0)
    phis = reference.eigenfunctions(casc)
    lams = (casc.a1, casc.a2, 1j * casc.omega)
    worst = 0.0
    for phi, lam in zip(phis, lams):
        for _ in range(40):
            x = (_rand_c(rng), _rand_c(rng))
            u = _rand_c(rng, lo=0.3)
            got = apply_generator(sysc, phi, x, u)
            want = lam * ex.evaluate(phi, x, u, plant.params)
            worst = max(worst, abs(got - want) / (1 + abs(want)))
    yield "cascade-eigenfunctions", 1e-10, worst

    # 1d linear plant against the closed form, both estimators
    lin = PlantSpec.from_strings("lin1d", 1, ("a*x1 + b*u",), "x1",
                                 {"a": -1.0, "b": 1.0})
    sysl = SkewSystem(lin, 1.0, 1.0)
    traj = sim.integrate(sysl, [0.0], 60 * sysl.period, sysl.period / 256)
    want = 1.0 / (1j * 1.0 - (-1.0))
    fund = rsp.OrderTag.harmonic(1)
    got_h = rsp.harmonic_average(traj, fund).value
    yield "lin1d-harmonic-average", 1e-6, abs(got_h - want)
    got_a = rsp.abel_residue(traj, fund).value
    yield "lin1d-abel-residue", 1e-3, abs(got_a - want)

    # cascade responses against closed forms
    trajc = sim.integrate(sysc, [0.0, 0.0], 60 * sysc.period, sysc.period / 256)
    h2 = rsp.harmonic_average(trajc, rsp.OrderTag.harmonic(2)).value
    want_h2 = reference.closed_form_response(casc, "x1", rsp.OrderTag.harmonic(2))
    yield "cascade-h2-harmonic-average", 1e-6, abs(h2 - want_h2)
    trajx2 = trajc.with_observable(ex.Var(2))
    h1 = rsp.harmonic_average(trajx2, rsp.OrderTag.harmonic(1)).value
    want_h1 = reference.closed_form_response(casc, "x2", rsp.OrderTag.harmonic(1))
    yield "cascade-h1-x2-harmonic-average", 1e-6, abs(h1 - want_h1)

    # dmd route on the settled window
    res_d = rsp.estimate(trajc, rsp.OrderTag.harmonic(2), ("dmd",))["dmd"]
    yield "cascade-h2-dmd", 1e-3, abs(res_d.value - want_h2)

    # random stable LTI: pipeline vs resolvent, eigenvector residuals
    plant3 = lti.random_stable_plant(rng, 3)
    spec3 = lti.to_plant_spec(plant3)
    sys3 = SkewSystem(spec3, 1.0, 1.0)
    traj3 = sim.integrate(sys3, [0.0] * 3, max(60 * sys3.period, 120.0),
                          min(sys3.period / 256, 0.02))
    got3 = rsp.harmonic_average(traj3, fund).value
    want3 = lti.lti_response(plant3, 1.0)
    yield "lti3-pipeline-vs-resolvent", 1e-5, abs(got3 - want3)
    chk = lti.skew_eigencheck(plant3, 1.0)
    yield "lti3-skew-eigenvectors", 1e-9, max(chk.left_residual, chk.right_residual)

    # lifted closure transfer identity
    worst = 0.0
    draws = 0
    while draws < 20:
        try:
            p = reference.QuadraticCascade(-rng.uniform(0.5, 3),
                                           -rng.uniform(0.5, 3),
                                           rng.uniform(0.2, 5))
        except (reference.DegenerateParameters, ValueError):
            continue
        draws += 1
        lift = reference.lifted_system(p)
        h2w = reference.closed_form_response(p, "x1", rsp.OrderTag.harmonic(2))
        worst = max(worst, abs(lift.transfer_from_u2(2j * p.omega) - h2w))
    yield "lifted-transfer-identity", 1e-12, worst

    # mode expansion vs integration
    worst = 0.0
    for _ in range(2):
        x0 = [_rand_c(rng), _rand_c(rng)]
        ph = rng.uniform(-math.pi, math.pi)
        u0 = complex(math.cos(ph), math.sin(ph))
        sysk = SkewSystem(plant, casc.omega, u0)
        trajk = sim.integrate(sysk, x0, 20.0, 1e-3)
        x1w, x2w = reference.kmd_reconstruct(casc, x0, u0, trajk.t)
        worst = max(worst,
                    float(np.abs(trajk.states[:, 0] - x1w).max()),
                    float(np.abs(trajk.states[:, 1] - x2w).max()))
    yield "kmd-reconstruction", 1e-6, worst

    # integrator order: halving dt cuts the terminal error ~16x
    ratio = _convergence_ratio(sysl)
    yield "rk4-convergence-ratio", 3.0, abs(ratio - 16.0)


def _rand_c(rng, lo: float = 0.0, hi: float = 1.5) -> complex:
    mag = rng.uniform(lo, hi)
    ph = rng.uniform(-math.pi, math.pi)
    return mag * complex(math.cos(ph), math.sin(ph))


def _exact_lin1d(a: float, b: float, omega: float, x0: complex, u0: complex,
                 t: float) -> complex:
    forced = b * u0 / (1j * omega - a)
    return (x0 - forced) * complex(np.exp(a * t)) \
        + forced * complex(np.exp(1j * omega * t))


def _convergence_ratio(sysl: SkewSystem) -> float:
    errs = []
    for divisor in (64, 128):
        traj = sim.integrate(sysl, [0.25 + 0.1j], 4 * sysl.period,
                             sysl.period / divisor)
        want = _exact_lin1d(-1.0, 1.0, sysl.omega, 0.25 + 0.1j, sysl.u0,
                            float(traj.t[-1]))
        errs.append(abs(traj.states[-1, 0] - want))
    return errs[0] / errs[1]


def cmd_validate(args) -> int:
    rng = np.random.default_rng(args.seed)
    a1, a2 = -1.0, -2.0
    if args.two_d:
        try:
            a1_s, a2_s = args.two_d.split(",")
            a1, a2 = float(a1_s), float(a2_s)
        except ValueError:
            raise ConfigError(f"bad --two-d {args.two_d!r}: use a1,a2") from None

    failures = 0
    try:
        reference.QuadraticCascade(a1, a2, 1.0)
    except reference.DegenerateParameters as err:
        print(f"FAIL  two-d-parameters: DegenerateParameters: {err}")
        return 1
    except ValueError as err:
        raise ConfigError(f"bad --two-d values: {err}") from None

    # the degenerate direction must be rejected
    try:
        reference.QuadraticCascade(2 * a2, a2, 1.0)
        print("FAIL  degenerate-rejection: a1 = 2*a2 was accepted")
        failures += 1
    except reference.DegenerateParameters:
        print("PASS  degenerate-rejection: a1 = 2*a2 raises DegenerateParameters")

    for name, tol, observed in _validate_checks(rng, a1, a2):
        ok = observed <= tol
        if not ok:
            failures += 1
        print(f"{'PASS' if ok else 'FAIL'}  {name}: observed {observed:.3g} "
              f"(tol {tol:g})")

    print(f"{'all checks passed' if failures == 0 else f'{failures} check(s) failed'}")
    return EXIT_OK if failures == 0 else 1


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, needs_plant: bool = True):
    if needs_plant:
        p.add_argument("--plant", required=True, help="plant definition file")
    p.add_argument("--u0", default="1", help="input amplitude: mag or mag@phase_deg")
    p.add_argument("--dt", type=float, default=None,
                   help="integration step (default: period/256, snapped)")
    p.add_argument("--horizon-periods", type=float, default=60.0,
                   help="integration horizon in forcing periods")
    p.add_argument("--min-horizon", type=float, default=0.0,
                   help="lower bound on the horizon in time units")
    p.add_argument("--tol", type=float, default=1e-7,
                   help="relative periodicity tolerance")
    p.add_argument("--window", type=int, default=8,
                   help="averaging window in slow periods")
    p.add_argument("--cross-tol", type=float, default=1e-2,
                   help="relative tolerance for method cross-checks")
    p.add_argument("--dmd-delay", type=int, default=8, help="dmd embedding depth")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="koopfreq",
        description="Frequency response of nonlinear plants under rotational "
                    "forcing: simulation, harmonic/subharmonic response "
                    "estimation, Bode sweeps, self-validation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate and test for steady state")
    _add_common(p)
    p.add_argument("--omega", type=float, required=True, help="forcing frequency")
    p.add_argument("--x0", default="", help="initial state, comma separated")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("respond", help="estimate responses at one frequency")
    _add_common(p)
    p.add_argument("--omega", type=float, required=True, help="forcing frequency")
    p.add_argument("--order", action="append", default=None,
                   help="response order: n or 1/n (repeatable, default 1)")
    p.add_argument("--methods", default="harm,abel",
                   help="comma list from harm,abel,dmd")
    p.set_defaults(fn=cmd_respond)

    p = sub.add_parser("sweep", help="sweep a frequency grid, write CSV + SVG")
    _add_common(p)
    p.add_argument("--omega-grid", required=True, help="min:max:points (log-spaced)")
    p.add_argument("--order", action="append", default=None,
                   help="response order: n or 1/n (repeatable, default 1)")
    p.add_argument("--methods", default="harm,abel",
                   help="comma list from harm,abel,dmd")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("validate", help="run the built-in correctness battery")
    p.add_argument("--seed", type=int, default=0, help="rng seed")
    p.add_argument("--two-d", default=None,
                   help="override cascade parameters as a1,a2")
    p.set_defaults(fn=cmd_validate)

    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ex.ExprError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
