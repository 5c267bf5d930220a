"""Command-line experiments emitting CSV or JSON tables.

Every output starts with a header echoing the full configuration as ``key = value``
lines, so an output file can be fed back through ``--config`` to reproduce it.
Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import subprocess
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import NumericalError, PushASEPError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
JSON_INT_LIMIT = 2 ** 53
CONFIG_LINE = re.compile(r"^#?\s*([A-Za-z_][\w-]*)\s*=\s*(.*?)\s*$")
NOT_ECHOED = ("config", "out", "func")
NEGATIVE_VALUE = re.compile(r"^-\.?\d")


class Table:
    def __init__(self, columns: Sequence[str], rows: List[Sequence] = None, report: Dict = None):
        self.columns = list(columns)
        self.rows = list(rows or [])
        self.report = dict(report or {})


# ---------------------------------------------------------------------------
# Formatting.

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _json_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        v = int(v)
        return json.dumps(str(v)) if abs(v) > JSON_INT_LIMIT else str(v)
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g") if math.isfinite(v) else "null"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(u) for u in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(u)}" for k, u in v.items()) + "}"
    return json.dumps(str(v))


def version_string() -> str:
    """Package version, with ``git describe`` appended when run from a checkout."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def echo(args: argparse.Namespace) -> Dict[str, str]:
    cfg = {"command": args.command}
    for k, v in sorted(vars(args).items()):
        if k in NOT_ECHOED or k == "command" or v is None:
            continue
        cfg[k] = _fmt(v)
    return cfg


def render(table: Table, args: argparse.Namespace) -> str:
    cfg = echo(args)
    buf = io.StringIO()
    if args.format == "json":
        head = {"version": version_string(), "seed": args.seed, "config": cfg}
        buf.write("{\n")
        buf.write(f'  "header": {_json_value(head)},\n')
        buf.write(f'  "report": {_json_value(table.report)},\n')
        buf.write(f'  "columns": {_json_value(table.columns)},\n')
        buf.write('  "rows": [')
        buf.write(",".join("\n    " + _json_value(list(r)) for r in table.rows))
        buf.write("\n  ]\n}\n")
        return buf.getvalue()
    buf.write(f"# version: {version_string()}\n")
    buf.write(f"# seed: {args.seed}\n")
    for k, v in cfg.items():
        buf.write(f"# {k} = {v}\n")
    for k, v in table.report.items():
        buf.write(f"# report {k}: {_fmt(v) if not isinstance(v, (list, tuple)) else ' '.join(map(_fmt, v))}\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Argument helpers.

def _ints(s: str) -> List[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _floats(s: str) -> List[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _range(s: str) -> List[int]:
    """'a:b' (inclusive) or a comma list."""
    if ":" in s:
        a, b = (int(v) for v in s.split(":"))
        if b < a:
            raise ValidationError(f"empty range {s}")
        return list(range(a, b + 1))
    return _ints(s)


def _points(s: str):
    """'n:t,n:t' -> list of SpaceTimePoint."""
    from .model import SpaceTimePoint
    out = []
    for item in s.split(","):
        n, t = item.split(":")
        out.append(SpaceTimePoint(int(n), float(t)))
    return out


def _plan(args):
    from .model import RatePlan
    speeds = _floats(args.speeds) if getattr(args, "speeds", None) else None
    return RatePlan.homogeneous(args.R, args.L, speeds)


def _germ(s: str):
    from .limits import PathGerm
    kind, _, val = s.partition(":")
    if kind == "fixed":
        return PathGerm.fixed_time(float(val or 0.0))
    if kind == "tagged":
        return PathGerm.tagged(float(val or 0.5))
    raise ValidationError("germ must be fixed:<theta> or tagged:<alpha>")


# ---------------------------------------------------------------------------
# Subcommands.

def cmd_green(args) -> Table:
    """green_function on all ordered terminal tuples within a displacement range."""
    from itertools import combinations
    from .model import ParticleConfig
    from .transition import green_function, master_equation_oracle
    plan = _plan(args)
    y = ParticleConfig(tuple(_ints(args.initial)))
    N = len(y)
    if N > 3:
        raise ValidationError("the green table enumerates at most 3 particles")
    if args.range < 0:
        raise ValidationError("range must be nonnegative")
    sites = range(y[-1] - args.range, y[0] + args.range + 1)
    configs = [tuple(sorted(c, reverse=True)) for c in combinations(sites, N)]
    configs.sort(reverse=True)
    oracle = master_equation_oracle(y, args.t, plan) if args.oracle else None
    cols = [f"x{k}" for k in range(1, N + 1)] + ["probability"] + (["oracle", "diff"] if oracle else [])
    rows = []
    for c in configs:
        p = green_function(y, c, args.t, plan)
        row = list(c) + [p]
        if oracle is not None:
            q = oracle.get(c, 0.0)
            row += [q, p - q]
        rows.append(row)
    return Table(cols, rows, {"total": math.fsum(r[N] for r in rows)})


def cmd_kernel(args) -> Table:
    from .kernels import (KernelSpec, correction_decay_rate, flat_correction, flat_kappa)
    from .model import ParticleConfig, SpaceTimePoint
    plan = _plan(args)
    p1, p2 = SpaceTimePoint(args.n1, args.t1), SpaceTimePoint(args.n2, args.t2)
    initial = ParticleConfig(tuple(_ints(args.initial))) if args.initial else None
    K = KernelSpec(args.variant, plan, initial).evaluator()
    xs1, xs2 = np.array(_range(args.x1)), np.array(_range(args.x2))
    block = np.asarray(K.block(p1, xs1, p2, xs2), dtype=float)
    report = {}
    cols = ["x1", "x2", "value"]
    compare = None
    if args.compare_general:
        if args.variant != "step":
            raise ValidationError("--compare-general applies to the step variant")
        from .kernels import GeneralKernel
        y = ParticleConfig.step(max(args.n1, args.n2))
        # the general family carries the conjugation (-1)^(n1 - n2) relative to step
        sign = (-1.0) ** (args.n1 - args.n2)
        compare = sign * np.asarray(GeneralKernel(plan, y).block(p1, xs1, p2, xs2), dtype=float)
        cols += ["general", "diff"]
    corr = args.correction is not None and args.variant == "flat"
    if args.correction is not None and not corr:
        raise ValidationError("--correction applies to the flat variant")
    if corr:
        cols += ["correction"]
        Ns = _range(args.decay) if args.decay else None
        if Ns:
            report["decay_rate"] = correction_decay_rate(p1, int(xs1[0]), p2, int(xs2[0]), Ns, plan=plan)
            report["kappa"] = flat_kappa()
    rows = []
    for i, x1 in enumerate(xs1):
        for j, x2 in enumerate(xs2):
            row = [int(x1), int(x2), float(block[i, j])]
            if compare is not None:
                row += [float(compare[i, j]), float(block[i, j] - compare[i, j])]
            if corr:
                row.append(flat_correction(p1, int(x1), p2, int(x2), args.correction, plan=plan))
            rows.append(row)
    return Table(cols, rows, report)


def cmd_fredholm(args) -> Table:
    from .fredholm import (ContinuumDetProblem, DiscreteDetProblem, fredholm_continuum,
                           fredholm_discrete)
    tol = args.tol if args.tol is not None else 1e-8
    if args.kind == "continuum":
        p = ContinuumDetProblem(_floats(args.times), _floats(args.thresholds), args.airy)
        res = fredholm_continuum(p, tol=tol)
        rows = [[q, L, v] for q, L, v in res.history]
        return Table(["order", "cutoff", "value"], rows, {"value": res.value})
    from .kernels import KernelSpec
    from .model import ParticleConfig, SpaceLikePath
    plan = _plan(args)
    initial = ParticleConfig(tuple(_ints(args.initial))) if args.initial else None
    K = KernelSpec(args.variant, plan, initial).evaluator()
    p = DiscreteDetProblem(SpaceLikePath(tuple(_points(args.points))), _ints(args.thresholds), K,
                           rho=args.rho)
    res = fredholm_discrete(p, tol=tol)
    report = {"value": res.value, "window": res.window}
    if args.replicas:
        from .simulator import SimConfig, Step, sample_space_like
        if args.variant != "step":
            raise ValidationError("Monte Carlo comparison is available for the step variant")
        N = max(q.n for q in p.path)
        est = sample_space_like(SimConfig(plan, Step(N), max(q.t for q in p.path), args.seed, args.replicas),
                                p.path, p.thresholds, threads=args.threads)
        report.update(mc=est.probability, mc_sigma=est.sigma, mc_ci_low=est.ci_low, mc_ci_high=est.ci_high)
    return Table(["window", "value"], [list(h) for h in res.history], report)


def _initial(spec: str):
    from .model import ParticleConfig
    from .simulator import Explicit, Flat, Step
    kind, _, rest = spec.partition(":")
    if kind == "step":
        return Step(int(rest))
    if kind == "flat":
        M, B = (int(v) for v in rest.split(":"))
        return Flat(M, B)
    if kind == "explicit":
        return Explicit(ParticleConfig(tuple(_ints(rest))))
    raise ValidationError("initial must be step:N, flat:M:B or explicit:y1,y2,...")


def cmd_simulate(args) -> Table:
    from .simulator import (SimConfig, kpz_exponent, sample_positions, simulate, terminal_chi2)
    if args.kpz:
        r = kpz_exponent(_floats(args.kpz), args.replicas, args.R, args.L, args.seed, threads=args.threads)
        rows = [[t, m, s] for t, m, s in zip(r.times, r.means, r.stds)]
        return Table(["T", "mean", "std"], rows,
                     {"slope": r.slope, "slope_stderr": r.slope_stderr, "buffer": r.buffer, "margin": r.margin})
    cfg = SimConfig(_plan(args), _initial(args.initial), args.t_max, args.seed, args.replicas)
    report = {}
    if args.trajectory:
        tr = simulate(cfg)
        tr.write_jsonl(args.trajectory)
        violations = 0
        for x in tr.replay():
            if np.any(np.diff(x) >= 0):
                violations += 1
        report.update(events=len(tr), exclusion_violations=violations,
                      left_moves=int(np.sum(tr.directions < 0)))
    if args.chi2:
        c = terminal_chi2(cfg, threads=args.threads)
        report.update(chi2=c.statistic, chi2_dof=c.dof, chi2_pvalue=c.pvalue)
    pts = _points(args.observe) if args.observe else [(n, cfg.t_max) for n in range(1, cfg.initial.observable + 1)]
    pos = sample_positions(cfg, pts, threads=args.threads).astype(float)
    rows = []
    for j, p in enumerate(pts):
        n, t = (p.n, p.t) if hasattr(p, "n") else p
        col = pos[:, j]
        rows.append([n, t, col.mean(), col.std(ddof=1) if len(col) > 1 else 0.0, col.min(), col.max()])
    if args.thresholds:
        from .simulator.engine import binomial_ci
        s = np.array(_floats(args.thresholds))
        if len(s) != len(pts):
            raise ValidationError("need one threshold per observation point")
        hits = int(np.all(pos >= s[None, :], axis=1).sum())
        lo, hi = binomial_ci(hits, cfg.replicas)
        report.update(probability=hits / cfg.replicas, ci_low=lo, ci_high=hi)
    return Table(["n", "t", "mean", "std", "min", "max"], rows, report)


def cmd_limit(args) -> Table:
    from .limits import convergence_study, flat_scaling, step_scaling
    germ = _germ(args.germ)
    if args.variant == "flat":
        par = flat_scaling(germ, args.R, args.L)
        report = {"S_v": par.S_v, "S_h": par.S_h, "v_mean": par.v_mean}
    else:
        par = step_scaling(germ, args.R, args.L)
        report = {"mu": par.mu, "S_v": par.S_v, "S_h": par.S_h, "sigma0": par.sigma0,
                  "sigma1": par.sigma1, "sigma2": par.sigma2, "kappa0": par.kappa0, "kappa1": par.kappa1}
    rows = []
    if args.Ts:
        study = convergence_study(args.variant, _floats(args.Ts), germ, args.R, args.L, args.u1, args.u2,
                                  _floats(args.grid), lattice=args.lattice)
        prev = None
        for r in study:
            rows.append([r.T, r.sup_error, r.worst[0], r.worst[1],
                         r.sup_error / prev if prev else float("nan")])
            prev = r.sup_error
    return Table(["T", "sup_error", "worst_s1", "worst_s2", "ratio"], rows, report)


# ---------------------------------------------------------------------------
# Parser.

def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", help="key = value file; command-line flags take precedence")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--tol", type=float)
    rates = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    rates.add_argument("--R", type=float, default=1.0, help="right clock rate")
    rates.add_argument("--L", type=float, default=1.0, help="left clock rate")
    rates.add_argument("--speeds", help="comma-separated particle speeds")

    p = argparse.ArgumentParser(prog="pushasep", description=__doc__.splitlines()[0], parents=[common],
                                allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("green", parents=[common, rates], help="transition probabilities", allow_abbrev=False)
    g.add_argument("--initial", default="0", help="initial positions, decreasing")
    g.add_argument("--t", type=float, default=1.0)
    g.add_argument("--range", type=int, default=5, help="sites beyond the initial span")
    g.add_argument("--oracle", type=_bool, default=False, help="add master-equation columns")
    g.set_defaults(func=cmd_green)

    k = sub.add_parser("kernel", parents=[common, rates], help="correlation kernel tables", allow_abbrev=False)
    k.add_argument("--variant", choices=("step", "flat", "general"), default="step")
    k.add_argument("--initial", help="initial positions for the general variant")
    k.add_argument("--n1", type=int, default=1)
    k.add_argument("--t1", type=float, default=1.0)
    k.add_argument("--n2", type=int, default=1)
    k.add_argument("--t2", type=float, default=1.0)
    k.add_argument("--x1", default="-3:3", help="a:b or list")
    k.add_argument("--x2", default="-3:3", help="a:b or list")
    k.add_argument("--compare-general", dest="compare_general", type=_bool, default=False)
    k.add_argument("--correction", type=int, help="flat: add the finite-N correction column")
    k.add_argument("--decay", help="flat: system sizes a:b for the fitted decay rate")
    k.set_defaults(func=cmd_kernel)

    f = sub.add_parser("fredholm", parents=[common, rates], help="joint distributions", allow_abbrev=False)
    f.add_argument("--kind", choices=("discrete", "continuum"), default="discrete")
    f.add_argument("--variant", choices=("step", "flat", "general"), default="step")
    f.add_argument("--initial", help="initial positions for the general variant")
    f.add_argument("--points", default="1:1.0", help="n:t,n:t,... space-like ordered")
    f.add_argument("--thresholds", default="0")
    f.add_argument("--rho", type=float, default=1.0)
    f.add_argument("--airy", choices=("airy1", "airy2"), default="airy2")
    f.add_argument("--times", default="0", help="continuum: increasing times")
    f.add_argument("--replicas", type=int, default=0, help="add a Monte Carlo estimate")
    f.set_defaults(func=cmd_fredholm)

    s = sub.add_parser("simulate", parents=[common, rates], help="Monte Carlo statistics", allow_abbrev=False)
    s.add_argument("--initial", default="step:3", help="step:N, flat:M:B or explicit:y1,y2,...")
    s.add_argument("--t-max", dest="t_max", type=float, default=1.0)
    s.add_argument("--replicas", type=int, default=1000)
    s.add_argument("--observe", help="n:t,... (default: every particle at t_max)")
    s.add_argument("--thresholds", help="joint event x_n(t) >= s for the observed points")
    s.add_argument("--trajectory", help="write one trajectory as JSON lines")
    s.add_argument("--chi2", type=_bool, default=False, help="test terminal law against the exact one")
    s.add_argument("--kpz", help="flat-IC fluctuation study at these times")
    s.set_defaults(func=cmd_simulate)

    lm = sub.add_parser("limit", parents=[common], help="scaling constants and convergence", allow_abbrev=False)
    lm.add_argument("--variant", choices=("flat", "step"), default="flat")
    lm.add_argument("--germ", default="fixed:0", help="fixed:<theta> or tagged:<alpha>")
    lm.add_argument("--R", type=float, default=1.0)
    lm.add_argument("--L", type=float, default=1.0)
    lm.add_argument("--Ts", help="comma-separated T values for the convergence table")
    lm.add_argument("--u1", type=float, default=0.0)
    lm.add_argument("--u2", type=float, default=1.0)
    lm.add_argument("--grid", default="-2,0,2")
    lm.add_argument("--lattice", type=_bool, default=False)
    lm.set_defaults(func=cmd_limit)
    for parser in [p, *sub.choices.values()]:
        # let "-3:3" and "-2,0" be values rather than options
        parser._negative_number_matcher = NEGATIVE_VALUE
    return p


def read_config(path: str) -> Dict[str, str]:
    """``key = value`` lines; a leading '#' is allowed so output headers can be reused."""
    out = {}
    for line in Path(path).read_text().splitlines():
        m = CONFIG_LINE.match(line.strip())
        if m:
            out[m.group(1).replace("-", "_")] = m.group(2)
    return out


def _subcommand_first(argv: List[str], commands) -> List[str]:
    """Move options given before the subcommand behind it; subparser defaults would
    otherwise overwrite them."""
    for i, a in enumerate(argv):
        if a in commands:
            return [a] + argv[:i] + argv[i + 1:]
    return argv


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    commands = parser._subparsers._group_actions[0].choices
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    argv = list(argv)
    if known.config is None:
        return parser.parse_args(_subcommand_first(argv, commands))
    try:
        cfg = read_config(known.config)
    except OSError as e:
        raise ValidationError(f"cannot read config: {e}") from e
    command = cfg.pop("command", None)
    if command and not any(a in commands for a in argv):
        argv = [command] + argv
    argv = _subcommand_first(argv, commands)
    args = parser.parse_args(argv)
    sub = commands[args.command]
    dests = {a.dest: a for a in sub._actions}
    explicit = set()
    for a in argv:  # flags given on the command line win over the file
        if a.startswith("--"):
            key = a[2:].split("=")[0]
            for act in sub._actions:
                if "--" + key in act.option_strings:
                    explicit.add(act.dest)
    for key, raw in cfg.items():
        if key in NOT_ECHOED or key in explicit:
            continue
        if key not in dests:
            raise ValidationError(f"unknown config key {key!r} for {args.command}")
        act = dests[key]
        try:
            val = act.type(raw) if act.type else raw
        except (TypeError, ValueError, argparse.ArgumentTypeError) as e:
            raise ValidationError(f"bad value for {key}: {raw!r}") from e
        if act.choices is not None and val not in act.choices:
            raise ValidationError(f"{key} must be one of {sorted(act.choices)}")
        setattr(args, key, val)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        table = args.func(args)
        text = render(table, args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, IndexError) as e:  # malformed lists and the like
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except PushASEPError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
