"""Command-line entry point.

Subcommands ``verify-barrier``, ``solve``, ``experiment``, ``norm-check`` and
``schedule`` read an INI configuration, accept ``--set section.key=value``
overrides and write a JSON report plus CSV data into a fresh run directory
named ``<command>-<config hash>``.  Exit codes: 0 pass, 1 certified fail,
2 configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from dul import __version__
from dul.barriers import (
    InadmissibleConstants,
    SupercriticalBarrier,
    layer_grid,
    normal_derivative_check,
    select_params,
    verify_D1,
    verify_D2,
    verify_E1,
    verify_E2,
    window_times,
)
from dul.certificate import SCHEMA_VERSION, ClassCertificate, dumps
from dul.config import ConfigError, load_config
from dul.solver import BlowUp, CFLViolation, ProblemSpec, build_mesh
from dul.solver.io import SnapshotError, read_snapshot, write_csv, write_snapshot
from dul.solver.stepping import residual
from dul.weighted_norms import (
    NonFiniteSample,
    ScheduleTooLong,
    check_pointwise_growth,
    check_shell_class,
    check_supercritical_class,
    telescoping_schedule,
)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
ENV_OUTPUT = "DUL_OUTPUT_DIR"

log = logging.getLogger("dul")


class Outcome:
    """Result of a command: pass flag, JSON report and extra files."""

    def __init__(self, passed, report, files=None, writers=None):
        self.passed = bool(passed)
        self.report = report
        self.files = files or {}
        self.writers = writers or {}


def _envelope(command, cfg, passed, body):
    out = {"schema_version": SCHEMA_VERSION, "command": command, "pass": bool(passed),
           "config": cfg.values}
    out.update(body)
    return out


# ---------------------------------------------------------------------------
# verify-barrier


def _extra_samples(geom, eps, count, seed):
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.0, eps, count)
    d = d[d > 0]
    x, _ = geom.points_at_distance(d)
    return x


def cmd_verify_barrier(cfg, pmap=None):
    """Selector, invariants, layer and cutoff certificates, normal derivative."""
    geom = cfg.geometry()
    coef = cfg.coefficient()
    b = cfg["barrier"]
    try:
        barrier = select_params(coef, geom, b["eps"], b["tau"], theta=b["theta"], b=b["b"])
    except InadmissibleConstants as exc:
        raise ConfigError(f"barrier: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"coefficient.gamma / barrier: {exc}") from exc
    changes = {k: b[k] for k in ("alpha1", "delta") if b[k] is not None}
    if changes:
        barrier = barrier.with_overrides(**changes)
    super_ = isinstance(barrier, SupercriticalBarrier)
    eps_sweep = [e for e in b["eps_sweep"] if e < geom.eps0] or [min(b["eps_sweep"])]

    viol = barrier.violations()
    certs = [ClassCertificate("invariants", not viol, float(len(viol)), params=barrier.params(),
                              data={"violations": viol})]
    xs = layer_grid(geom, barrier.eps, b["n_space"])
    if b["random_samples"] > 0:
        xs = np.concatenate([xs, _extra_samples(geom, barrier.eps, b["random_samples"], cfg.get("seed.value"))])
    ts = window_times(barrier, b["n_time"])
    layer = verify_E1 if super_ else verify_D1
    certs.append(layer(barrier, coef, geom, xs=xs, ts=ts, pmap=pmap))
    cutoff = verify_E2 if super_ else verify_D2
    certs.append(cutoff(coef, geom, eps_sweep, n_space=b["n_space"]))
    certs.append(normal_derivative_check(barrier, geom, window_times(barrier, 10)))
    passed = all(c.passed for c in certs)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["claim", "pass", "worst_value", "worst_x", "worst_t", "grid_size"])
    for c in certs:
        wp = list(c.worst_point) + ["", ""]
        writer.writerow([c.claim, int(c.passed), repr(float(c.worst_value)), wp[0], wp[1], c.grid_size])
    body = {"regime": "supercritical" if super_ else "subcritical", "barrier": barrier.params(),
            "certificates": [c.to_dict() for c in certs]}
    return Outcome(passed, body, {"certificates.csv": buf.getvalue()})


# ---------------------------------------------------------------------------
# solve


def _discretization(cfg, default=None):
    from dul.experiments import Discretization

    s = cfg["solver"]
    if default is not None and "solver" not in cfg.present:
        return default
    return Discretization(s["n_nodes"], s["grading"], s["steps"], s["theta_scheme"], s["start_steps"])


def cmd_solve(cfg, pmap=None):
    """One trajectory with the configured treatment; writes a snapshot and CSV."""
    geom = cfg.geometry()
    coef = cfg.coefficient()
    s = cfg["solver"]
    treatment = cfg.treatment()
    disc = _discretization(cfg)
    try:
        mesh = build_mesh(geom, disc.n_nodes, disc.grading)
        spec = ProblemSpec(coef, s["T"], initial=s["u0"], treatment=treatment)
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc
    try:
        traj = disc.run(spec, mesh)
    except CFLViolation as exc:
        raise ConfigError(f"solver.steps: {exc}") from exc
    except BlowUp as exc:
        return Outcome(False, {"error": str(exc)})
    w = mesh.measure_weights
    mass = traj.values @ w
    res = residual(spec, mesh, traj) if traj.levels >= 3 else 0.0
    body = {
        "nodes": int(mesh.size),
        "levels": int(traj.levels),
        "min": float(traj.values.min()),
        "max": float(traj.values.max()),
        "mass_initial": float(mass[0]),
        "mass_final": float(mass[-1]),
        "max_mass_step": float(np.max(np.abs(np.diff(mass)))) if traj.levels > 1 else 0.0,
        "residual": res,
    }
    writers = {"trajectory.dul": lambda p: write_snapshot(p, traj)}
    if cfg.get("output.csv"):
        writers["trajectory.csv"] = lambda p: write_csv(p, traj, every=max(1, s["csv_every"]))
    return Outcome(bool(np.all(np.isfinite(traj.values))), body, writers=writers)


def _backend():
    from dul.solver import BACKEND

    return BACKEND


# ---------------------------------------------------------------------------
# experiment


def cmd_experiment(cfg, pmap=None):
    """Dispatch ``experiment.name`` to the experiment harness."""
    from dul import experiments as ex

    e = cfg["experiment"]
    name = e["name"]
    geom = cfg.geometry()
    form = cfg["coefficient"]["form"]
    files = {}
    try:
        if name == "uniqueness_probe":
            gamma = cfg.require("coefficient.gamma")
            T = e["T"] or ex.DEFAULT_T[form]
            rep = ex.uniqueness_probe(gamma, geom, tuple(e["g_pair"]), e["eps_sweep"], T, form,
                                      _discretization(cfg, ex.Discretization()), e["refine"], pmap=pmap)
            passed = rep.verdict != ex.INCONCLUSIVE and rep.stable is not False
            body, files["sweep.csv"] = rep.to_dict(), rep.to_csv()
        elif name == "form_threshold_contrast":
            rows = ex.form_threshold_contrast(geom, e["gammas"], e["T"], tuple(e["forms"]), e["eps_sweep"],
                                              _discretization(cfg, ex.Discretization()), pmap)
            flips = {f: ex.flip_location(rows, f) for f in e["forms"]}
            passed = all(v is not None for v in flips.values())
            body = {"flips": flips, "rows": [vars(r) for r in rows]}
            files["verdicts.csv"] = ex.contrast_csv(rows)
        elif name == "nonuniqueness_demo":
            gamma = cfg.require("coefficient.gamma")
            rep = ex.nonuniqueness_demo(gamma, geom, e["T"] or 1.0, _discretization(cfg, ex.SMOOTH))
            passed = rep.separation > ex.SEPARATION_MIN and max(rep.residuals) <= ex.RESIDUAL_TOL
            body = rep.to_dict()
            files["profiles.csv"] = _profiles_csv(rep)
        elif name == "iteration_replay":
            gamma = cfg.require("coefficient.gamma")
            tm = e["theta_or_mu"]
            if tm is None:
                tm = 1.0 if gamma > 2 else 4.0 - 2.0 * gamma + 0.2
            rep = ex.iteration_replay(gamma, geom, e["T"] or 0.5, tm,
                                      disc=_discretization(cfg, ex.Discretization()))
            passed = rep.all_hold and rep.tail_match < ex.TAIL_TOL
            body, files["rungs.csv"] = rep.to_dict(), ex.replay_csv(rep)
        elif name == "existence_bound_check":
            gamma = cfg.require("coefficient.gamma")
            rep = ex.existence_bound_check(gamma, e["beta"], e["tau_w"], e["T"] or 0.5, geom,
                                           _discretization(cfg, ex.Discretization()))
            passed, body = rep.stable, rep.to_dict()
        else:
            raise ConfigError(f"experiment.name {name!r} is not a known experiment")
    except ScheduleTooLong as exc:
        return Outcome(False, {"experiment": name, "error": str(exc)})
    except (ValueError, InadmissibleConstants) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"experiment ({name}): {exc}") from exc
    body = dict(body)
    body["experiment"] = name
    return Outcome(passed, body, files)


def _profiles_csv(rep):
    mesh = rep.u_a.mesh
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "u_a", "u_b"])
    for x, a, b in zip(mesh.nodes, rep.u_a.values[-1], rep.u_b.values[-1]):
        writer.writerow([repr(float(x)), repr(float(a)), repr(float(b))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# norm-check


def _snapshot_callable(field):
    nodes = np.asarray(field.nodes, dtype=float)

    def u(x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        out = np.empty(x.shape)
        for tv in np.unique(t):
            sel = t == tv
            out[sel] = np.interp(x[sel], nodes, field.at(float(tv)))
        return out

    return u


def cmd_norm_check(cfg, pmap=None):
    """Growth-class checks for a field loaded from a trajectory snapshot."""
    geom = cfg.geometry()
    n = cfg["norm"]
    path = cfg.require("norm.snapshot")
    snap = read_snapshot(path)
    lo, hi = (geom.x_lo, geom.x_hi) if geom.kind == "interval" else (0.0, geom.R)
    if snap.nodes.size and (snap.nodes.min() < lo or snap.nodes.max() > hi):
        raise ConfigError("norm.snapshot: nodes lie outside the configured geometry")
    field = snap.to_field(geom)
    T = n["T"] or float(snap.times[-1])
    if not (n["theta"] or n["mu"] or n["l"]):
        raise ConfigError("norm: set at least one of norm.theta, norm.mu, norm.l")
    gamma = cfg.get("coefficient.gamma")
    if (n["theta"] or n["mu"]) and gamma is None:
        raise ConfigError("missing required key coefficient.gamma")
    reports = []
    try:
        for th in n["theta"]:
            reports.append(check_supercritical_class(field, th, n["eps_sweep"], geom, T, gamma).to_dict())
        for mu in n["mu"]:
            reports.append(check_shell_class(field, mu, n["eps_sweep"], geom, T, gamma).to_dict())
        u = _snapshot_callable(field)
        for l in n["l"]:
            pg = check_pointwise_growth(u, l, geom, T, gamma=gamma)
            reports.append({"condition": "pointwise", "exponent_used": l, "pass": pg.holds, "fitted_C": pg.C_bar})
    except NonFiniteSample as exc:
        return Outcome(False, {"error": str(exc)})
    except ValueError as exc:
        raise ConfigError(f"norm: {exc}") from exc
    passed = all(r["pass"] for r in reports)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["condition", "exponent", "eps", "lhs", "bound"])
    for r in reports:
        for e, a, b in zip(r.get("eps", []), r.get("lhs", []), r.get("bound", [])):
            writer.writerow([r["condition"], repr(float(r["exponent_used"])), repr(e), repr(a), repr(b)])
    return Outcome(passed, {"snapshot": str(path), "T": T, "checks": reports}, {"growth.csv": buf.getvalue()})


# ---------------------------------------------------------------------------
# schedule


def cmd_schedule(cfg, pmap=None, stream=None):
    """Telescoping schedule; rows go to stdout and ``schedule.csv``."""
    s = cfg["schedule"]
    try:
        sched = telescoping_schedule(s["eps"], s["mu1"], s["mu2"], s["tau"], s["c_cap"],
                                     constant_cap=s["constant_cap"], max_rungs=s["max_rungs"])
    except ScheduleTooLong as exc:
        return Outcome(False, {"error": str(exc)})
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from exc
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "eps_k", "delta_k", "tau_k"])
    for k, e, d, t in sched.to_rows():
        writer.writerow([k, repr(e), repr(d), repr(t)])
    text = buf.getvalue()
    (stream or sys.stdout).write(text)
    body = {"k0": sched.k0, "tail_bound": sched.tail_bound, "majorant": sched.majorant,
            "partial_majorant": sched.partial_majorant, "tau": float(sched.tau),
            "exact_sum": sum(sched.delta_k) == sched.tau}
    return Outcome(True, body, {"schedule.csv": text})


COMMANDS = {
    "verify-barrier": cmd_verify_barrier,
    "solve": cmd_solve,
    "experiment": cmd_experiment,
    "norm-check": cmd_norm_check,
    "schedule": cmd_schedule,
}


# ---------------------------------------------------------------------------
# run directories and main


def run_directory(root, command, digest):
    """Fresh ``<command>-<digest>`` under ``root``; reruns get ``-1``, ``-2``, ..."""
    root = Path(root)
    base = root / f"{command}-{digest}"
    path, k = base, 0
    while path.exists():
        k += 1
        path = root / f"{base.name}-{k}"
    path.mkdir(parents=True)
    return path


def build_parser():
    parser = argparse.ArgumentParser(prog="dul", description="Degenerate-coefficient uniqueness laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0])
        p.add_argument("-c", "--config", help="INI configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a configuration key (repeatable)")
        p.add_argument("--jobs", type=int, default=1, help="worker threads for independent tasks")
        p.add_argument("--output", help="output root (overrides the environment and output.dir)")
    return parser


def _setup_log(path):
    handler = logging.FileHandler(path, encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return handler


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    text = None
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot read config {args.config}: {exc}", file=sys.stderr)
            return EXIT_IO
    try:
        cfg = load_config(text, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    root = args.output or os.environ.get(ENV_OUTPUT) or cfg.get("output.dir")
    fn = COMMANDS[args.command]
    pool = ThreadPoolExecutor(max_workers=args.jobs) if args.jobs > 1 else None
    pmap = (lambda f, items: list(pool.map(f, items))) if pool else None
    start = time.perf_counter()
    try:
        outcome = fn(cfg, pmap)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SnapshotError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if pool:
            pool.shutdown()
    elapsed = time.perf_counter() - start

    report = _envelope(args.command, cfg, outcome.passed, outcome.report)
    try:
        out = run_directory(root, args.command, cfg.digest(args.command))
        handler = _setup_log(out / "run.log")
        try:
            log.info("dul %s %s (solver backend %s)", __version__, args.command, _backend())
            log.info("argv %s", " ".join(sys.argv[1:] if argv is None else argv))
            log.info("elapsed %.3f s, pass=%s", elapsed, outcome.passed)
        finally:
            log.removeHandler(handler)
            handler.close()
        (out / "report.json").write_text(dumps(report), encoding="utf-8")
        for name, content in outcome.files.items():
            (out / name).write_text(content, encoding="utf-8")
        for name, write in outcome.writers.items():
            write(out / name)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"{args.command}: {'pass' if outcome.passed else 'FAIL'} -> {out}", file=sys.stderr)
    return EXIT_PASS if outcome.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
