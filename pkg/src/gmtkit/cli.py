"""Command line entry point ``gmt``.

Every subcommand reads a measure either from ``--measure FILE`` (JSON or CSV)
or from a generator spec in the ``--config`` JSON file (key ``measure``).
Flags given on the command line override values from the config file.
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .beta import beta_p, jones_wolff, square_function_lhs
from .corona import build_stopping, variational_minimize
from .errors import GmtError, InvalidArgument
from .experiments import EXPERIMENTS, capacity, dimscan, run_experiment
from .generators import generate
from .io import load_measure, measure_to_dict
from .lattice import LatticeParams, build_lattice, check_invariants
from .measure import Ball, density_stats, enclosing_ball, mass_in_ball
from .report import canonical_json, emit_report
from .riesz import KernelConfig, riesz_field, treecode_riesz


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _opt(args, cfg, name, default=None):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return cfg.get(name, default)


def _measure(args, cfg):
    if getattr(args, "measure", None):
        return load_measure(args.measure, cfg.get("h"))
    spec = cfg.get("measure")
    if spec is None:
        raise InvalidArgument("give --measure FILE or a 'measure' generator spec in --config")
    spec = dict(spec)
    if args.seed is not None:
        if spec.get("kind") != "atom_cloud":
            raise InvalidArgument("--seed only applies to the atom_cloud generator")
        spec["params"] = dict(spec.get("params", {}), seed=args.seed)
    return generate(spec)


def _ball(args, cfg, mu, prefix="", scale=1.0):
    c = _opt(args, cfg, prefix + "center")
    r = _opt(args, cfg, prefix + "radius")
    if c is None or r is None:
        b = enclosing_ball(mu).scaled(scale)
        c = b.center if c is None else c
        r = b.radius if r is None else r
    return Ball(np.asarray(c, dtype=float), float(r))


def _out(args, name):
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _emit(args, name, data):
    text = canonical_json(data)
    if args.out:
        _out(args, name).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- subcommands

def cmd_generate(args, cfg):
    spec = dict(cfg.get("measure", {}))
    if args.kind:
        spec = {"kind": args.kind, "params": json.loads(args.params or "{}")}
    if args.seed is not None:
        spec["params"] = dict(spec.get("params", {}), seed=args.seed)
    mu = generate(spec)
    _emit(args, "measure.json", measure_to_dict(mu))


def cmd_stats(args, cfg):
    mu = _measure(args, cfg)
    b = _ball(args, cfg, mu)
    st = density_stats(mu, b, float(_opt(args, cfg, "c", 4.0)))
    _emit(args, "stats.json", {"ball": {"center": b.center, "radius": b.radius},
                               "mass": mass_in_ball(mu, b), "theta": st.theta, "p_mu": st.p_mu,
                               "is_p_doubling": st.is_p_doubling, "constant": st.constant_used,
                               "atoms": len(mu), "h": mu.h})


def cmd_riesz(args, cfg):
    mu = _measure(args, cfg)
    ce = KernelConfig(float(_opt(args, cfg, "eps", 0.0)), bool(args.smooth or cfg.get("smooth", False)))
    if args.targets and not args.pv:
        targets = np.loadtxt(args.targets, delimiter=",", ndmin=2)
    else:
        targets = mu.points
    angle = _opt(args, cfg, "treecode")
    if angle is None:
        field = riesz_field(mu, targets, ce)
    else:
        field = treecode_riesz(mu, targets, ce, float(angle))
    lines = ["target," + ",".join(f"R{k}" for k in range(mu.d))]
    lines += [f"{i}," + ",".join(repr(float(v)) for v in row) for i, row in enumerate(field)]
    text = "\n".join(lines) + "\n"
    if args.out:
        _out(args, "riesz.csv").write_text(text)
    else:
        sys.stdout.write(text)


def cmd_beta(args, cfg):
    mu = _measure(args, cfg)
    b = _ball(args, cfg, mu)
    fit = beta_p(mu, b, float(_opt(args, cfg, "p", 2.0)))
    _emit(args, "beta.json", {"beta": fit.beta, "p": fit.p, "base": fit.base, "normal": fit.normal,
                              "empty": fit.empty, "converged": fit.converged, "objective": fit.objective})


def cmd_jw(args, cfg):
    mu = _measure(args, cfg)
    b = _ball(args, cfg, mu)
    if args.square:
        _emit(args, "jw.json", {"square_function_lhs": square_function_lhs(mu, b),
                                "ball": {"center": b.center, "radius": b.radius}})
        return
    r_min = float(_opt(args, cfg, "rmin", mu.h))
    r_max = float(_opt(args, cfg, "rmax", 2.0 * b.radius))
    _emit(args, "jw.json", {"center": b.center, "r_min": r_min, "r_max": r_max,
                            "jones_wolff": jones_wolff(mu, b.center, r_min, r_max)})


def _lattice_params(args, cfg):
    lp = dict(cfg.get("lattice", {}))
    if args.C0 is not None:
        lp["C0"] = args.C0
    if args.A0 is not None:
        lp["A0"] = args.A0
    if getattr(args, "depth", None) is not None:
        lp["max_depth"] = args.depth
    return LatticeParams(**lp)


def cmd_lattice(args, cfg):
    mu = _measure(args, cfg)
    lat = build_lattice(mu, _lattice_params(args, cfg))
    out = lat.to_dict()
    out["invariants"] = check_invariants(lat)
    out["cubes_per_level"] = [len(lev) for lev in lat.levels]
    _emit(args, "lattice.json", out)


def cmd_corona(args, cfg):
    mu = _measure(args, cfg)
    lat = build_lattice(mu, _lattice_params(args, cfg))
    b0 = _ball(args, cfg, mu, scale=0.5)
    fam = build_stopping(mu, lat, b0, float(_opt(args, cfg, "theta0", 0.05)),
                         float(_opt(args, cfg, "kappa0", 0.1)), float(_opt(args, cfg, "eps0", 0.05)))
    key = lambda Q: [int(Q.level), int(Q.index)]
    _emit(args, "corona.json", {
        "b0": {"center": b0.center, "radius": b0.radius},
        "fmax": [key(Q) for Q in fam.fmax], "ld": [key(Q) for Q in fam.ld],
        "stop": [key(Q) for Q in fam.stop_all], "stop0": [key(Q) for Q in fam.stop0],
        "r0_mass": fam.r0_mass, "stop0_mass": fam.stop0_mass, "threshold_met": fam.threshold_met,
        "constants": {"theta0": fam.theta0, "kappa0": fam.kappa0, "eps0": fam.eps0}})


def cmd_variational(args, cfg):
    mu = _measure(args, cfg)
    b0 = _ball(args, cfg, mu)
    b1 = _ball(args, cfg, mu, prefix="b1_", scale=0.25)
    if _opt(args, cfg, "b1_center") is None:
        # default B1 sits on the atom nearest the centre of B0, so it is never empty
        i = int(np.argmin(np.linalg.norm(mu.points - b0.center, axis=1)))
        b1 = Ball(mu.points[i].copy(), b1.radius)
    r0 = mu.ids_in(b0.scaled(1.5))
    st = variational_minimize(mu, r0, b1, int(_opt(args, cfg, "N", 3)), float(_opt(args, cfg, "p", 2.0)),
                              float(_opt(args, cfg, "lam", 0.5)), b0=b0)
    _emit(args, "variational.json", {
        "a": st.a, "F": st.F, "F1": st.F1, "sigma_p": st.sigma_p, "nu_b1": st.nu_b1, "mu_b1": st.mu_b1,
        "iterations": st.iterations, "line_search_failed": st.line_search_failed,
        "residual_max": st.residual_max, "residual_fraction": st.residual_fraction,
        "constants": {"p": st.p, "lambda": st.lam}})
    if args.out:
        log = ["iteration,F"] + [f"{i},{float(F)!r}" for i, F in enumerate(st.history)]
        _out(args, "variational_iterates.csv").write_text("\n".join(log) + "\n")


def _emit_report(args, rep, stem):
    if args.out:
        emit_report(rep, "json", _out(args, stem + ".json"))
        emit_report(rep, "csv", _out(args, stem + ".csv"))
    else:
        sys.stdout.write(canonical_json(rep.to_dict()))


def cmd_capacity(args, cfg):
    mu = _measure(args, cfg)
    rep = capacity(mu, _opt(args, cfg, "smear"), radius=_opt(args, cfg, "radius"))
    _emit_report(args, rep, "capacity")


def cmd_dimscan(args, cfg):
    mu = _measure(args, cfg)
    start = _ball(args, cfg, mu)
    rep = dimscan(mu, start, int(_opt(args, cfg, "m", 5)), _opt(args, cfg, "alpha"))
    _emit_report(args, rep, "dimscan")


def cmd_experiment(args, cfg):
    if args.name:
        cfg = dict(cfg, experiment=args.name)
    if cfg.get("experiment") not in EXPERIMENTS:
        raise InvalidArgument(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    if args.seed is not None and "measure" in cfg:
        cfg = dict(cfg)
        if cfg["measure"].get("kind") != "atom_cloud":
            raise InvalidArgument("--seed only applies to the atom_cloud generator")
        cfg["measure"] = dict(cfg["measure"], params=dict(cfg["measure"].get("params", {}), seed=args.seed))
    rep = run_experiment(cfg)
    _emit_report(args, rep, cfg["experiment"])


COMMANDS = {
    "generate": cmd_generate, "stats": cmd_stats, "riesz": cmd_riesz, "beta": cmd_beta, "jw": cmd_jw,
    "lattice": cmd_lattice, "corona": cmd_corona, "variational": cmd_variational,
    "capacity": cmd_capacity, "dimscan": cmd_dimscan, "experiment": cmd_experiment,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--threads", type=int, help="worker threads for kernel blocks")
    common.add_argument("--seed", type=int, help="seed for the atom_cloud generator")
    common.add_argument("--measure", help="measure file (.json or .csv)")

    ball = argparse.ArgumentParser(add_help=False)
    ball.add_argument("--center", type=float, nargs="+")
    ball.add_argument("--radius", type=float)

    p = argparse.ArgumentParser(prog="gmt", description="Multiscale statistics of discrete measures.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="build a measure from a generator spec")
    g.add_argument("--kind")
    g.add_argument("--params", help="JSON object of generator parameters")

    s = sub.add_parser("stats", parents=[common, ball], help="Theta, P and doubling test on a ball")
    s.add_argument("--c", type=float)

    r = sub.add_parser("riesz", parents=[common], help="Riesz transform at targets (CSV)")
    r.add_argument("--eps", type=float)
    r.add_argument("--smooth", action="store_true")
    r.add_argument("--pv", action="store_true", help="evaluate the self-excluded sums at the atoms")
    r.add_argument("--targets", help="CSV of target points")
    r.add_argument("--treecode", type=float, metavar="ANGLE")

    b = sub.add_parser("beta", parents=[common, ball], help="beta_p of a ball")
    b.add_argument("--p", type=float)

    j = sub.add_parser("jw", parents=[common, ball], help="Jones-Wolff potential or square function")
    j.add_argument("--rmin", type=float)
    j.add_argument("--rmax", type=float)
    j.add_argument("--square", action="store_true", help="integrate over the atoms of the ball")

    for name, helptext in (("lattice", "build the cube lattice"), ("corona", "stopping families")):
        q = sub.add_parser(name, parents=[common, ball], help=helptext)
        q.add_argument("--C0", type=float)
        q.add_argument("--A0", type=float)
        q.add_argument("--depth", type=int, help="maximum lattice depth")
        if name == "corona":
            q.add_argument("--theta0", type=float)
            q.add_argument("--kappa0", type=float)
            q.add_argument("--eps0", type=float)

    v = sub.add_parser("variational", parents=[common, ball], help="minimize the variational functional")
    v.add_argument("--b1-center", dest="b1_center", type=float, nargs="+")
    v.add_argument("--b1-radius", dest="b1_radius", type=float)
    v.add_argument("--N", type=int)
    v.add_argument("--p", type=float)
    v.add_argument("--lam", type=float)

    c = sub.add_parser("capacity", parents=[common], help="energy and capacity lower bound")
    c.add_argument("--smear", type=float)
    c.add_argument("--radius", type=float, help="compare against the sphere/circle closed form")

    d = sub.add_parser("dimscan", parents=[common, ball], help="ball-shrinking dimension scan")
    d.add_argument("--m", type=int)
    d.add_argument("--alpha", type=float)

    e = sub.add_parser("experiment", parents=[common], help="run an experiment from a config")
    e.add_argument("name", nargs="?", choices=EXPERIMENTS)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        threads = _opt(args, cfg, "threads")
        if threads is not None:
            kernels.set_threads(int(threads))
        COMMANDS[args.command](args, cfg)
    except (GmtError, ValueError, OSError) as exc:
        print(f"gmt {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
