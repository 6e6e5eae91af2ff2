"""Command-line entry point.

Exit codes: 0 success (for ``solve``: certified minimiser), 1 validation or
I/O error, 2 no minimiser (dual supremum not attained), 3 certificate
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .convex import ConvexPiecewise, convex_envelope, legendre_conjugate
from .errors import CertificateFailure, NoMinimizer, ProblemFileError, SolverError
from .growth import check_growth
from .oracle import DPGrid, dp_minimize
from .pipeline import solve
from .problemfile import ProblemFile, load_problem
from .relaxed import solve_relaxed

log = logging.getLogger("noncoercive")

EXIT_OK, EXIT_INPUT, EXIT_NO_MINIMIZER, EXIT_CERTIFICATE = 0, 1, 2, 3


def _fmt(x) -> str:
    return "%.17g" % float(x)


def write_csv(path: Path, header: list[str], rows, config: dict) -> None:
    lines = ["# numerics: " + json.dumps(config, sort_keys=True), ",".join(header)]
    lines += [",".join(_fmt(x) if not isinstance(x, str) else x for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, record: dict) -> None:
    path.write_text(json.dumps(record, sort_keys=True, indent=2, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


def _columns(prefix: str, m: int) -> list[str]:
    return [prefix] if m == 1 else [f"{prefix}_{k + 1}" for k in range(m)]


def _trajectory_rows(t, u, v):
    # v[k] holds on [t[k], t[k+1]); the final node repeats the last velocity
    v_nodes = np.vstack([v, v[-1:]])
    for k in range(len(t)):
        yield [t[k], *u[k], *v_nodes[k]]


def _config(args, prob: ProblemFile) -> dict:
    cfg = prob.numerics.as_dict()
    cfg["command"] = args.command
    return cfg


def _apply_flags(args, prob: ProblemFile) -> None:
    num = prob.numerics
    if args.nodes is not None:
        num.nodes = args.nodes
    if args.chatter is not None:
        num.n_chatter = args.chatter
    if args.tol is not None:
        num.tol = args.tol
    if args.shells is not None:
        num.shells = args.shells


def cmd_solve(args, prob: ProblemFile, out: Path) -> int:
    spec, num = prob.spec, prob.numerics
    cfg = _config(args, prob)
    m = spec.dim
    if args.relaxed_only:
        try:
            rel = solve_relaxed(spec, num.nodes)
        except NoMinimizer as exc:
            write_json(out / "summary.json", {"status": "NoMinimizer", "message": str(exc), "numerics": cfg})
            print(f"NoMinimizer: {exc}", file=sys.stderr)
            return EXIT_NO_MINIMIZER
        rows = ([s, *b, *v] for s, b, v in zip(rel.s, rel.acc.B, rel.v))
        write_csv(out / "relaxed.csv", ["s", *_columns("B", m), *_columns("v", m)], rows, cfg)
        summary = {
            "c": rel.c.tolist(),
            "relaxed_cost": rel.relaxed_cost,
            "dual_value": rel.dual_value,
            "gap": rel.duality_gap,
            "numerics": cfg,
        }
        write_json(out / "summary.json", summary)
        return EXIT_OK

    tol_detach = num.tol * (1.0 + spec.f.value_range)
    try:
        res = solve(
            spec,
            nodes=num.nodes,
            n_chatter=num.n_chatter,
            shells=num.shells,
            tol_cert=num.tol_cert,
            tol_gap=num.tol_gap,
            tol_detach=tol_detach,
        )
    except NoMinimizer as exc:
        record = {
            "status": "NoMinimizer",
            "message": str(exc),
            "verdict": exc.verdict,
            "numerics": cfg,
        }
        write_json(out / "report.json", record)
        print(f"NoMinimizer (growth verdict {exc.verdict}): {exc}", file=sys.stderr)
        return EXIT_NO_MINIMIZER
    except CertificateFailure as exc:
        record = {"status": "CertificateFailure", "message": str(exc), "numerics": cfg}
        if exc.report is not None:
            record["report"] = exc.report.to_dict()
        write_json(out / "report.json", record)
        print(str(exc), file=sys.stderr)
        return EXIT_CERTIFICATE
    traj = res.trajectory
    header = ["t", *_columns("u", m), *_columns("v", m)]
    write_csv(out / "trajectory.csv", header, _trajectory_rows(traj.t, traj.u, traj.v), cfg)
    write_json(
        out / "report.json",
        {"status": "Minimizer", "report": res.report.to_dict(), "numerics": cfg},
    )
    print(
        f"cost_f={_fmt(res.report.cost_f)} dual={_fmt(res.report.dual_value)} "
        f"verdict={res.report.verdict}"
    )
    return EXIT_OK


def cmd_check_growth(args, prob: ProblemFile, out: Path) -> int:
    num = prob.numerics
    env = convex_envelope(prob.f)
    prof = check_growth(env, num.shells, num.threshold, num.min_decrease_shells)
    write_csv(out / "growth.csv", ["radius", "g_max", "verdict"], prof.rows(), _config(args, prob))
    print(prof.verdict.value)
    return EXIT_OK


def cmd_envelope(args, prob: ProblemFile, out: Path) -> int:
    env = convex_envelope(prob.f)
    conj = legendre_conjugate(env)
    cfg = _config(args, prob)
    if isinstance(env, ConvexPiecewise):
        write_csv(out / "envelope.csv", ["x", "f_env"], zip(env.x, env.y), cfg)
        write_csv(out / "conjugate.csv", ["p", "f_conj"], zip(conj.x, conj.y), cfg)
    else:
        write_csv(
            out / "envelope.csv",
            ["x_1", "x_2", "f_env"],
            ([*p, v] for p, v in zip(env.points, env.values)),
            cfg,
        )
        write_csv(
            out / "conjugate.csv",
            ["p_1", "p_2", "f_conj"],
            ([*p, v] for p, v in zip(conj.points, conj.values)),
            cfg,
        )
    return EXIT_OK


def cmd_oracle(args, prob: ProblemFile, out: Path) -> int:
    num = prob.numerics
    res = dp_minimize(prob.spec, DPGrid(num.oracle_steps, num.oracle_levels))
    cfg = _config(args, prob)
    write_csv(out / "oracle_trajectory.csv", ["t", "u", "v"], _trajectory_rows(res.t, res.u, res.v), cfg)
    write_json(
        out / "oracle.json",
        {
            "cost": res.cost,
            "allowance": res.allowance,
            "endpoint_error": res.endpoint_error,
            "numerics": cfg,
        },
    )
    print(f"oracle_cost={_fmt(res.cost)}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "check-growth": cmd_check_growth,
    "envelope": cmd_envelope,
    "oracle": cmd_oracle,
}


def _shell_list(text: str) -> list[float]:
    try:
        return [float(r) for r in text.split(",") if r.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad shell list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noncoercive",
        description="Non-convex, non-coercive 1-D variational problems via relaxation and chattering.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("file", help="YAML problem file")
    parser.add_argument("--nodes", type=int, help="time nodes for the relaxed solve")
    parser.add_argument("--chatter", type=int, help="chattering repetitions per detached run")
    parser.add_argument("--tol", type=float, help="relative detachment tolerance")
    parser.add_argument("--shells", type=_shell_list, help="comma-separated shell radii")
    parser.add_argument("--out", help="output directory (overrides outputs.dir)")
    parser.add_argument("--relaxed-only", action="store_true", help="solve: stop after the relaxed problem")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    need_all = args.command in ("solve", "oracle")
    try:
        prob = load_problem(args.file, require_all=need_all)
        _apply_flags(args, prob)
        out = Path(args.out or prob.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, prob, out)
    except ProblemFileError as exc:
        print(f"error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, ValueError) as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
