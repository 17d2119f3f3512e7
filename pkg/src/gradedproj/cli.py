"""Command-line front end.

Subcommands: refine, certify, decay, tables, stability, cr-check,
closure-bench, grading.  All flags are long-form, all randomness is fixed by
--seed, and identical configurations produce byte-identical outputs.  Every
output embeds the configuration, its hash, the library version and the
tolerances in effect.  Exit codes: 0 success, 2 a certified bound failed,
3 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np

from . import __version__
from .mesh import (
    SimplicialMesh,
    closure_benchmark,
    element_distance,
    grading_of,
    kuhn_initial_mesh,
    level_gap,
    marking_policy,
    write_element_report,
)
from .polyspace import CRSpace, LagrangeSpace
from .projection import Operators, measure_decay, write_decay_tsv
from .stability import (
    Weight,
    cr_dimension_thresholds,
    grading_value,
    max_operator,
    measure_weighted_stability,
    published_gradings,
    qnew_table,
    regularized_h_grading,
    stability_range,
    stability_table,
)

TOLERANCES = {
    "eigen_residual": 1e-9,
    "kappa_slack": 1e-8,
    "identity": 1e-12,
    "decay_slack": 1e-9,
}


class CliInputError(Exception):
    pass


def round4(x: float) -> str:
    """Four decimals, half-even, as a fixed-width string."""
    if x == math.inf:
        return "inf"
    return str(Decimal(repr(float(x))).quantize(Decimal("0.0001"), rounding=ROUND_HALF_EVEN))


def thread_cap() -> int:
    raw = os.environ.get("GP_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError as exc:
            raise CliInputError(f"invalid GP_THREADS value {raw!r}") from exc
    return os.cpu_count() or 1


def parallel_map(fn, items):
    cap = thread_cap()
    items = list(items)
    if cap == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))


def config_dict(args: argparse.Namespace) -> dict:
    out = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def effective_tolerances(args) -> dict:
    tols = dict(TOLERANCES)
    for item in getattr(args, "tolerance", None) or []:
        name, _, value = item.partition("=")
        if name not in tols or not value:
            raise CliInputError(f"unknown tolerance override {item!r} (known: {sorted(tols)})")
        try:
            tols[name] = float(value)
        except ValueError as exc:
            raise CliInputError(f"invalid tolerance value in {item!r}") from exc
    return tols


def output_meta(cfg: dict, tols: dict | None = None) -> dict:
    return {
        "config": cfg,
        "config_hash": config_hash(cfg),
        "version": __version__,
        "tolerances": tols or TOLERANCES,
    }


def tsv_header_lines(cfg: dict, tols: dict | None = None) -> list[str]:
    return [
        f"config: {json.dumps(cfg, sort_keys=True)}",
        f"config_hash: {config_hash(cfg)}",
        f"version: {__version__}",
        f"tolerances: {json.dumps(tols or TOLERANCES, sort_keys=True)}",
    ]


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def write_tsv(path: Path, header: list[str], columns: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


# -- mesh construction shared by the commands -----------------------------------


def build_mesh(args) -> SimplicialMesh:
    if getattr(args, "mesh", None):
        return SimplicialMesh.load(args.mesh)
    mesh = kuhn_initial_mesh(args.dim, getattr(args, "cells", 1))
    rounds = getattr(args, "rounds", 0)
    if rounds:
        pick = marking_policy(args.policy)
        rng = np.random.default_rng(args.seed)
        for _ in range(rounds):
            marked = pick(mesh, rng)
            if not marked:
                continue
            if args.alpha > 0:
                mesh.refine_lg(marked, args.alpha)
            else:
                mesh.refine_closure(marked)
    return mesh


def parse_degree(text: str):
    if text.upper() == "CR":
        return "CR"
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        value = int(text)
    except ValueError as exc:
        raise CliInputError(f"invalid degree {text!r}") from exc
    if value < 1:
        raise CliInputError("degree must be >= 1 or CR")
    return value


def make_space(mesh: SimplicialMesh, degree, zero_trace: bool):
    if degree == "CR":
        if zero_trace:
            raise CliInputError("zero-trace variant is only available for Lagrange spaces")
        return CRSpace(mesh)
    return LagrangeSpace(mesh, degree, zero_trace)


# -- subcommands --------------------------------------------------------------------


def cmd_refine(args) -> int:
    cfg = config_dict(args)
    mesh = build_mesh(args)
    out_dir = Path(args.out)
    payload = mesh.to_json_dict()
    payload["meta"] = output_meta(cfg)
    write_json(out_dir / "mesh.json", payload)

    dist_v = element_distance(mesh, "vertex")
    dist_f = element_distance(mesh, "face")
    gap_v = level_gap(mesh, dist_v)
    gap_f = level_gap(mesh, dist_f)
    rows = [
        ["elements", str(mesh.n_active)],
        ["vertices", str(len(mesh.coords))],
        ["max_level", str(mesh.max_level())],
        ["level_gap_vertex", str(gap_v)],
        ["level_gap_face", str(gap_f)],
        ["gamma_h_vertex", round4(2.0 ** (gap_v / mesh.dim))],
        ["gamma_h_face", round4(2.0 ** (gap_f / mesh.dim))],
        ["total_volume", round4(float(mesh.total_volume()))],
    ]
    write_tsv(out_dir / "grading_report.tsv", tsv_header_lines(cfg), ["key", "value"], rows)
    write_element_report(mesh, out_dir / "elements.tsv")

    if args.alpha > 0:
        if mesh.lg_violation(args.alpha) is not None:
            print("limited grading violated after refinement", file=sys.stderr)
            return 2
        if gap_v > args.alpha:
            print(f"vertex level gap {gap_v} exceeds alpha={args.alpha}", file=sys.stderr)
            return 2
    print(f"wrote {out_dir}/mesh.json ({mesh.n_active} elements, gamma_h={2.0**(gap_v/mesh.dim):.4f})")
    return 0


def cmd_certify(args) -> int:
    cfg = config_dict(args)
    tols = effective_tolerances(args)
    degree = parse_degree(args.degree)
    if degree == math.inf:
        raise CliInputError("certification needs a finite degree or CR")
    mesh = build_mesh(args)
    space = make_space(mesh, degree, args.zero_trace)
    ops = Operators(space)
    cert = ops.certify()
    payload = cert.to_json_dict({"elements": mesh.n_active, "dim": mesh.dim, "max_level": mesh.max_level()})
    payload["meta"] = output_meta(cfg, tols)
    out = Path(args.out) / "certificate.json"
    write_json(out, payload)
    print(
        f"kappa={cert.kappa:.6f} (bound {cert.bound_kappa:.6f}) q={cert.q:.6f} "
        f"lambda=[{cert.lambda_min:.6f},{cert.lambda_max:.6f}] residual={cert.residual:.2e}"
    )
    if cert.kappa > cert.bound_kappa + tols["kappa_slack"]:
        print("condition bound violated", file=sys.stderr)
        return 2
    if cert.residual > tols["eigen_residual"]:
        print("eigen residual too large", file=sys.stderr)
        return 2
    return 0


def cmd_decay(args) -> int:
    cfg = config_dict(args)
    degree = parse_degree(args.degree)
    mesh = build_mesh(args)
    space = make_space(mesh, degree, False)
    ops = Operators(space)
    kind = "face" if degree == "CR" else "vertex"
    dist = element_distance(mesh, kind)
    rng = np.random.default_rng(args.seed)
    source = [dist.ids[int(rng.integers(dist.n))]]
    shells = dist.from_source(source[0])
    deltas = sorted({int(x) for x in shells if x > 0})

    def one(delta):
        members = [dist.ids[i] for i in range(dist.n) if shells[i] == delta]
        return measure_decay(ops, dist, members, source, trials=args.trials, seed=args.seed + delta)

    rows = parallel_map(one, deltas)
    tols = effective_tolerances(args)
    out = Path(args.out) / "decay.tsv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_decay_tsv(out, rows, tsv_header_lines(cfg, tols))
    bad = [r for r in rows if r.exact_norm > r.bound + tols["decay_slack"]]
    jitter = 1e-12
    nonmono = [
        (a.delta, b.delta)
        for a, b in zip(rows, rows[1:])
        if b.exact_norm > a.exact_norm + jitter
    ]
    print(f"measured {len(rows)} shells up to delta={rows[-1].delta if rows else 0}; wrote {out}")
    if bad:
        print(f"decay bound violated at delta={[r.delta for r in bad]}", file=sys.stderr)
        return 2
    if nonmono:
        print(f"masked norms not monotone at {nonmono}", file=sys.stderr)
        return 2
    return 0


def cmd_tables(args) -> int:
    cfg = config_dict(args)
    header = tsv_header_lines(cfg)
    out_dir = Path(args.out)

    rows = [
        [str(row["K"])] + [round4(row[f"d{d}"]) for d in (1, 2, 3)]
        for row in qnew_table()
    ]
    write_tsv(out_dir / "table1_qnew.tsv", header, ["K", "d1", "d2", "d3"], rows)

    grid_2d = [("2^(1/2)", 2**0.5), ("2", 2.0), ("2^(3/2)", 2**1.5), ("4", 4.0)]
    rows = [
        [row["gamma_h"], str(row["K"]), row["Lp"], row["W1p"]]
        for row in stability_table(2, grid_2d)
    ]
    write_tsv(out_dir / "table2_stability_2d.tsv", header, ["gamma_h", "K", "Lp", "W1p"], rows)

    grid_3d = [("2^(1/3)", 2 ** (1 / 3)), ("2", 2.0)]
    rows = [
        [row["gamma_h"], str(row["K"]), row["Lp"], row["W1p"]]
        for row in stability_table(3, grid_3d)
    ]
    write_tsv(out_dir / "table3_stability_3d.tsv", header, ["gamma_h", "K", "Lp", "W1p"], rows)

    from .stability import w12_table

    rows = [[r["gamma_h"], r["K_range"]] for r in w12_table(2, grid_2d)]
    write_tsv(out_dir / "table5_w12_ranges_2d.tsv", header, ["gamma_h", "K_range"], rows)
    rows = [[r["gamma_h"], r["K_range"]] for r in w12_table(3, grid_3d)]
    write_tsv(out_dir / "table6_w12_ranges_3d.tsv", header, ["gamma_h", "K_range"], rows)

    thresholds = cr_dimension_thresholds(args.probe_limit)
    payload = {"thresholds": thresholds, "meta": output_meta(cfg)}
    write_json(out_dir / "cr_thresholds.json", payload)
    write_json(out_dir / "published_gradings.json", {"gradings": published_gradings(), "meta": output_meta(cfg)})
    print(f"wrote tables to {out_dir}/")
    return 0


def cmd_stability(args) -> int:
    cfg = config_dict(args)
    degree = parse_degree(args.degree)
    gamma_h = args.gamma_h
    if args.preset:
        if gamma_h is not None:
            raise CliInputError("--preset and --gamma-h are mutually exclusive")
        try:
            gamma_h = grading_value(args.preset, dim=args.dim, alpha=args.alpha)
        except KeyError as exc:
            raise CliInputError(f"unknown grading preset {args.preset!r}") from exc
    if gamma_h is None and degree != "CR":
        gamma_h = 2.0 ** (args.alpha / args.dim)
    p = math.inf if args.p.lower() in ("inf", "infinity") else float(args.p)
    verdict = stability_range(args.dim, degree, gamma_h, args.gamma_rho, args.kind, p)
    payload = verdict.to_json_dict()
    payload["meta"] = output_meta(cfg)
    failures = []
    if args.measure:
        if degree == math.inf:
            raise CliInputError("measurement needs a finite degree or CR")
        mesh = build_mesh(args)
        space = make_space(mesh, degree, False)
        ops = Operators(space)
        kind_dist = "face" if degree == "CR" else "vertex"
        dist = element_distance(mesh, kind_dist)
        rng = np.random.default_rng(args.seed)
        seed_elem = dist.ids[int(rng.integers(dist.n))]
        base = {s: 1.0 if s == seed_elem else 1e-9 for s in dist.ids}
        weight = Weight(max_operator(base, args.gamma_rho, dist), dist)
        result = measure_weighted_stability(ops, weight, p=p, kind=args.kind, seed=args.seed)
        payload["measurement"] = {
            "measured": result.measured,
            "bound": result.bound,
            "bound_applicable": result.bound_applicable,
            "passed": result.passed,
            "gamma_rho_actual": result.gamma_rho,
            "elements": mesh.n_active,
        }
        if result.passed is False:
            failures.append("weighted stability bound violated")
    out = Path(args.out) / "stability_verdict.json"
    write_json(out, payload)
    print(f"{verdict.kind} d={verdict.dim} K={verdict.degree}: interval {verdict.interval_text()}; wrote {out}")
    for msg in failures:
        print(msg, file=sys.stderr)
    return 2 if failures else 0


def cmd_cr_check(args) -> int:
    cfg = config_dict(args)
    tols = effective_tolerances(args)
    out_dir = Path(args.out)
    failures = []
    results = {}
    for d in (2, 3):
        mesh = kuhn_initial_mesh(d, 1)
        rng = np.random.default_rng(args.seed)
        for _ in range(args.rounds):
            ids = mesh.active_ids()
            marked = [s for s in ids if rng.random() < 0.3] or ids[:1]
            mesh.refine_lg(marked, 1)
        space = CRSpace(mesh)
        ops = Operators(space)
        cert = ops.certify()
        entry = cert.to_json_dict({"elements": mesh.n_active, "dim": d})
        if cert.kappa > cert.bound_kappa + tols["kappa_slack"]:
            failures.append(f"d={d}: kappa {cert.kappa} exceeds {cert.bound_kappa}")
        if d == 2:
            from .projection import _random_poly

            u = _random_poly(mesh, mesh.active_ids(), 1, np.random.default_rng(args.seed))
            diff = float(np.max(np.abs(ops.apply_C(u) - ops.project(u))))
            entry["c_equals_q_maxdiff"] = diff
            if diff > tols["identity"]:
                failures.append(f"d=2: C_CR != Q_CR (diff {diff:.2e})")
        results[f"d{d}"] = entry
    results["thresholds"] = cr_dimension_thresholds(args.probe_limit)
    if results["thresholds"]["lp_all_p_max_d"] != 35 or results["thresholds"]["w1p_all_p_max_d"] != 32:
        failures.append("dimension thresholds moved")
    payload = {"results": results, "meta": output_meta(cfg, tols)}
    write_json(out_dir / "cr_check.json", payload)
    print(f"wrote {out_dir}/cr_check.json")
    for msg in failures:
        print(msg, file=sys.stderr)
    return 2 if failures else 0


def cmd_closure_bench(args) -> int:
    cfg = config_dict(args)
    mesh = kuhn_initial_mesh(args.dim, args.cells)
    report = closure_benchmark(mesh, args.policy, args.rounds, alpha=args.alpha, seed=args.seed)
    ratios = report.ratios()
    rows = []
    for i in range(report.rounds):
        rows.append(
            [
                str(i),
                str(report.marked_per_round[i]),
                str(report.elements_per_round[i]),
                round4(ratios[i]) if report.marked_per_round[i] or i else "no-op",
            ]
        )
    final = report.ratio
    rows.append(["total", str(report.total_marked), str(report.elements_per_round[-1] if report.elements_per_round else mesh.n_active), "no-op" if final is None else round4(final)])
    out = Path(args.out) / "closure_bench.tsv"
    write_tsv(out, tsv_header_lines(cfg), ["round", "marked", "elements", "ratio"], rows)
    print(f"closure ratio: {'no-op' if final is None else f'{final:.4f}'}; wrote {out}")
    # no-growth-trend rule after burn-in (the cumulative ratio approaches its
    # bounded asymptote from below, so the first half of the run is excluded;
    # short runs are all transient and only report the envelope)
    burn_in = max(3, len(ratios) // 2)
    if len(ratios) < 24:
        print(f"run too short for the trend gate (needs >= 24 rounds, got {len(ratios)})")
        return 0
    for i in range(burn_in, len(ratios)):
        if max(ratios[: i + 1]) > 0 and ratios[i] > 1.05 * max(ratios[:i]):
            print(f"closure ratio growth trend at round {i}", file=sys.stderr)
            return 2
    return 0


def cmd_grading(args) -> int:
    cfg = config_dict(args)
    mesh = build_mesh(args)
    out_dir = Path(args.out)
    dist_v = element_distance(mesh, "vertex")
    dist_f = element_distance(mesh, "face")
    h = mesh.h_values()
    reg = regularized_h_grading(mesh, dist_v, gamma=2.0)
    payload = {
        "elements": mesh.n_active,
        "max_level": mesh.max_level(),
        "gamma_h_vertex": float(grading_of(h, dist_v)) if mesh.n_active > 1 else 1.0,
        "gamma_h_face": float(grading_of(h, dist_f)) if mesh.n_active > 1 else 1.0,
        "level_gap_vertex": level_gap(mesh, dist_v),
        "level_gap_face": level_gap(mesh, dist_f),
        "regularized_h": {
            "gamma": reg.gamma,
            "grading": reg.regularized_grading,
            "equivalence_ratio": reg.equivalence_ratio,
            "note": "measured evidence only; the grading-2 conjecture is never asserted",
        },
        "meta": output_meta(cfg),
    }
    write_json(out_dir / "grading.json", payload)
    write_element_report(mesh, out_dir / "elements.tsv")
    print(
        f"gamma_h vertex={payload['gamma_h_vertex']:.6f} face={payload['gamma_h_face']:.6f}; wrote {out_dir}/grading.json"
    )
    return 0


# -- parser ------------------------------------------------------------------------------


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(3, f"{self.prog}: error: {message}\n")


def _add_mesh_options(p, rounds_default=4):
    p.add_argument("--dim", type=int, default=2, help="space dimension")
    p.add_argument("--cells", type=int, default=1, help="initial cubes per axis")
    p.add_argument("--rounds", type=int, default=rounds_default, help="marking rounds")
    p.add_argument("--alpha", type=int, default=1, help="limited-grading parameter (0: plain closure)")
    p.add_argument("--policy", default="corner", help="marking policy: uniform | corner | random:<fraction>")
    p.add_argument("--mesh", default=None, help="load a mesh JSON instead of generating one")
    p.add_argument("--seed", type=int, default=0, help="seed fixing all randomness")
    p.add_argument("--tolerance", action="append", default=None, metavar="NAME=VALUE",
                   help="override a named tolerance (repeatable)")


def build_parser() -> Parser:
    parser = Parser(prog="gradedproj", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="generate and refine a mesh, write mesh + grading report")
    _add_mesh_options(p)
    p.add_argument("--out", default="out/refine")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("certify", help="spectral certificate for the approximating operator")
    _add_mesh_options(p)
    p.add_argument("--degree", default="1", help="polynomial degree or CR")
    p.add_argument("--zero-trace", action="store_true", help="zero trace on the marked boundary")
    p.add_argument("--out", default="out/certify")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("decay", help="masked-norm decay of the projection against the bound")
    _add_mesh_options(p)
    p.add_argument("--degree", default="1")
    p.add_argument("--trials", type=int, default=3, help="random samples per shell")
    p.add_argument("--out", default="out/decay")
    p.set_defaults(func=cmd_decay)

    p = sub.add_parser("tables", help="reproduce the published q and stability-range tables")
    p.add_argument("--probe-limit", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/tables")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("stability", help="analytic stability verdict, optionally measured")
    _add_mesh_options(p)
    p.add_argument("--degree", default="1")
    p.add_argument("--gamma-h", type=float, default=None, help="mesh size grading (default 2^(alpha/d))")
    p.add_argument("--preset", default=None, help="published grading preset: 2D-RGB | 2D-NVB+ | 2D-NVB- | 2D-RG | 2D-RG-GHS | BiSecLG")
    p.add_argument("--gamma-rho", type=float, default=1.0)
    p.add_argument("--kind", choices=["Lp", "W1p"], default="Lp")
    p.add_argument("--p", default="2")
    p.add_argument("--measure", action="store_true", help="also measure the weighted ratio on a mesh")
    p.add_argument("--out", default="out/stability")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("cr-check", help="Crouzeix-Raviart certificates and dimension thresholds")
    p.add_argument("--tolerance", action="append", default=None, metavar="NAME=VALUE",
                   help="override a named tolerance (repeatable)")
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--probe-limit", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/cr")
    p.set_defaults(func=cmd_cr_check)

    p = sub.add_parser("closure-bench", help="closure-overhead ratio over marking rounds")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--cells", type=int, default=1)
    p.add_argument("--rounds", type=int, default=8)
    p.add_argument("--alpha", type=int, default=1)
    p.add_argument("--policy", default="corner")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out/closure")
    p.set_defaults(func=cmd_closure_bench)

    p = sub.add_parser("grading", help="grading audit of a mesh")
    _add_mesh_options(p)
    p.add_argument("--out", default="out/grading")
    p.set_defaults(func=cmd_grading)

    return parser


def main(argv=None) -> int:
    from .mesh import MeshError
    from .polyspace import PolySpaceError
    from .projection import ProjectionError
    from .stability import StabilityError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CliInputError,
        MeshError,
        PolySpaceError,
        ProjectionError,
        StabilityError,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
