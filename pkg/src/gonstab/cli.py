"""Command-line interface: ``gonstab <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import atlas
from .blocks import TwoParamBlock, block_ids, bounding_blocks, reduced_block
from .coefficients import Scenario, block_coefficients, global_coefficients
from .errors import GonstabError
from .monodromy import E_CAP, block_report, gon_verdict
from .morse import (
    MINUS_ONE,
    ONE,
    BoundaryTwist,
    degenerate_curves,
    index_and_nullity,
    orientation_selftest,
    positivity_certificate,
)
from .reduction import central_configuration_residual, build_configuration, reduce_and_verify


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _emit(args, payload, text=None):
    if args.json or text is None:
        out = json.dumps(_jsonable(payload), indent=2)
    else:
        out = text
    if args.out and args.command not in ("sweep", "curves"):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out + "\n")
    else:
        print(out)


def _check_e(args, e):
    cap = 0.999999 if args.allow_extreme_e else E_CAP
    if not 0.0 <= e <= cap:
        raise GonstabError(f"e = {e} outside [0, {cap}]; pass --allow-extreme-e to go beyond {E_CAP}")
    return e


def _twist(text: str) -> BoundaryTwist:
    text = text.strip()
    if text == "1":
        return ONE
    if text == "-1":
        return MINUS_ONE
    if text.startswith("rho="):
        return BoundaryTwist(float(text[4:]))
    raise argparse.ArgumentTypeError("omega must be 1, -1 or rho=R")


def _range(text: str) -> np.ndarray:
    parts = [float(p) for p in text.split(":")]
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] <= 0:
        raise argparse.ArgumentTypeError("range must be lo:hi:step with step > 0")
    lo, hi, step = parts
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _values(text: str) -> np.ndarray:
    if ":" in text:
        return _range(text)
    return np.array([float(v) for v in text.split(",")])


# -- subcommands -------------------------------------------------------------------


def cmd_coeffs(args):
    scen = Scenario(args.n, args.m)
    g = global_coefficients(scen)
    blocks = {l: block_coefficients(scen, l).__dict__ for l in block_ids(args.n)}
    payload = {"n": args.n, "m": args.m, "global": g.__dict__, "blocks": blocks}
    lines = [f"n={args.n} m={args.m} sigma={g.sigma_n:.6f} lambda={g.lam:.6f} "
             f"d_check={g.d_check:.6f} d_hat={g.d_hat:.6f} 2Qmax={2 * g.q_max:.6f}"]
    for l, b in blocks.items():
        lines.append(f"  l={l}: P={b['P']:.6f} S={b['S']:.6f} Q={b['Q']:.6f} a={b['a']:.6f} b={b['b']:.6f}")
    _emit(args, payload, "\n".join(lines))
    return 0


def cmd_blocks(args):
    scen = Scenario(args.n, args.m)
    ids = [args.block] if args.block else block_ids(args.n)
    payload = {}
    for l in ids:
        lower, upper = bounding_blocks(scen, l)
        payload[l] = {
            "R": reduced_block(scen, l).R,
            "lower": [(b.alpha, b.beta) for b in lower],
            "upper": [(b.alpha, b.beta) for b in upper],
        }
    _emit(args, payload)
    return 0


def cmd_verify(args):
    ok = True
    rows = []
    for n in args.n:
        for m in args.m:
            rep = reduce_and_verify(n, m, raise_on_failure=False)
            blk, worst = rep.worst()
            good = max(rep.basis_residual, rep.commute_residual) <= 1e-10 and rep.off_block_residual <= 1e-9 and worst <= 1e-9
            ok &= good
            rows.append(rep.to_dict(full=args.full) | {"passed": good})
    text = "\n".join(
        f"n={r['n']} m={r['m']}: basis {r['basis_residual']:.1e} commute {r['commute_residual']:.1e} "
        f"off-block {r['off_block_residual']:.1e} closed-form {max(r['closed_form_residual'].values()):.1e} "
        f"{'ok' if r['passed'] else 'FAIL'}"
        for r in rows
    )
    _emit(args, {"passed": ok, "runs": rows}, text)
    return 0 if ok else 1


def cmd_monodromy(args):
    scen = Scenario(args.n, args.m, _check_e(args, args.e))
    if args.block:
        rep = block_report(scen, args.block, args.rel_tol)
        payload = {"n": args.n, "m": args.m, "e": args.e, "blocks": {args.block: rep.to_dict()}}
    else:
        payload = gon_verdict(scen, args.rel_tol).to_dict()
    _emit(args, payload)
    return 0


def _morse_payload(R, e, tw, args):
    res = index_and_nullity(R, e, tw, args.modes)
    out = {"phi": res.phi, "nu": res.nu, "min_eig": res.min_eig, "K": res.K, "converged": res.converged,
           "eps_null": res.eps_null, "omega": complex(tw.omega), "rho": tw.rho}
    if args.certificate:
        cert = positivity_certificate(R, e, args.rho_grid, args.modes, args.threads)
        out["certificate"] = {"label": cert.label, "positive": cert.is_positive_all_omega,
                              "min_margin": cert.min_margin, "worst_rho": cert.worst_rho}
    return out


def cmd_morse(args):
    e = _check_e(args, args.e)
    scen = Scenario(args.n, args.m, e)
    ids = [args.block] if args.block else block_ids(args.n)
    payload = {l: _morse_payload(reduced_block(scen, l).R, e, args.omega, args) for l in ids}
    _emit(args, {"n": args.n, "m": args.m, "e": e, "blocks": payload})
    return 0


def cmd_morse_ab(args):
    e = _check_e(args, args.e)
    _emit(args, {"alpha": args.alpha, "beta": args.beta, "e": e,
                 **_morse_payload(TwoParamBlock(args.alpha, args.beta).R, e, args.omega, args)})
    return 0


def cmd_curves(args):
    curves = degenerate_curves(args.alpha_range)
    rows = list(curves.rows())
    if args.out:
        import csv

        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "beta_curve_id", "beta", "nullity_check"])
            for a, cid, b, ok in rows:
                w.writerow([repr(a), cid, repr(b), str(ok).lower()])
    _emit(args, {"all_match": curves.all_match, "rows": len(rows), "out": args.out},
          f"{len(rows)} curve points, nullity checks {'all match' if curves.all_match else 'MISMATCH'}")
    return 0 if curves.all_match else 1


def cmd_thresholds(args):
    tables = [atlas.thresholds(n).to_dict() for n in args.n]
    lines = []
    for t in tables:
        lines.append(f"n={t['n']}  2Qmax={t['large_m_threshold']:.4f}")
        for l, b in t["blocks"].items():
            lb = "[" if b["closed_left"] else "("
            span = f"{lb}{b['lo']:.4f}, {b['hi']:.4f})" if b["nonempty"] else "empty"
            lines.append(f"  l={l}: {span}")
    _emit(args, tables, "\n".join(lines))
    return 0


def cmd_tables(args):
    which = ["sigma", "dcheck", "instability"] if args.which == "all" else [args.which]
    reps = [atlas.reproduce_tables(w, strict=False) for w in which]
    text = "\n".join(
        f"{r.which}: max deviation {r.max_deviation:.2e} (tolerance {r.tolerance:g}) "
        f"{'ok' if r.passed else 'MISMATCH at ' + r.worst[0]}"
        for r in reps
    )
    _emit(args, [r.to_dict() for r in reps], text)
    return 0 if all(r.passed for r in reps) else 1


def cmd_sweep(args):
    cfg = atlas.SweepConfig(mode=args.mode, rel_tol=args.rel_tol, K=args.modes,
                            rho_grid=args.rho_grid, certificates=not args.no_certificates,
                            allow_extreme_e=args.allow_extreme_e)
    cells = atlas.sweep(args.n, args.m_range, args.e_range, args.mode, cfg, workers=args.threads or 1)
    if args.out:
        atlas.write_sweep(cells, args.out, cfg, {"n": args.n})
    bad = [c for c in cells if c.consistent is False]
    payload = {"cells": len(cells), "inconsistent": len(bad), "out": args.out,
               "overall": {f"m={m:g},e={e:g}": v for (m, e), v in atlas.overall_by_cell(cells).items()}}
    if not args.out:
        payload["rows"] = [dict(zip(atlas.CSV_COLUMNS, c.csv_row())) for c in cells]
    _emit(args, payload)
    return 0 if not bad else 1


def run_selftest(verbose: bool = True) -> list[tuple[str, bool, str]]:
    results = []

    def record(name, ok, detail):
        results.append((name, bool(ok), detail))
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")

    for e in (0.0, 0.5, 0.9):
        rep = orientation_selftest(e)
        record(f"orientation e={e}", rep.passed,
               f"kernel residual {rep.residual:.1e}, flipped {rep.flipped_residual:.1e}")
    worst = max(central_configuration_residual(build_configuration(n, m))
                for n in range(2, 13) for m in (0.0, 0.1, 1.0, 10.0, 1000.0))
    record("central-configuration residual", worst <= 1e-9, f"max {worst:.1e}")
    for w in ("sigma", "dcheck"):
        r = atlas.reproduce_tables(w, strict=False)
        record(f"table {w}", r.max_deviation <= 5e-5, f"max deviation {r.max_deviation:.2e} at {r.worst[0]}")
    r = atlas.reproduce_tables("instability", strict=False)
    record("instability endpoints", r.passed, f"max deviation {r.max_deviation:.2e} at {r.worst[0]}")
    worst = 0.0
    for n in range(3, 13):
        for m in (0.1, 1.0, 10.0, 1000.0):
            rep = reduce_and_verify(n, m, raise_on_failure=False)
            worst = max(worst, rep.basis_residual, rep.commute_residual, rep.off_block_residual, rep.worst()[1])
    record("reduction fidelity", worst <= 1e-9, f"worst residual {worst:.1e}")
    facts_ok, detail = True, []
    for e in (0.0, 0.3, 0.6, 0.9):
        a = index_and_nullity(TwoParamBlock(0, 0).R, e, ONE)
        b = index_and_nullity(TwoParamBlock(0.5, 1.5).R, e, ONE)
        c = index_and_nullity(TwoParamBlock(0.5, 1.5).R, e, MINUS_ONE)
        got = ((a.phi, a.nu), (b.phi, b.nu), (c.phi, c.nu))
        ok = got == ((0, 2), (0, 3), (2, 0)) and a.converged and b.converged and c.converged
        facts_ok &= ok
        detail.append(f"e={e}:{'ok' if ok else got}")
    record("kernel facts", facts_ok, " ".join(detail))
    return results


def cmd_selftest(args):
    results = run_selftest(verbose=not args.json)
    ok = all(r[1] for r in results)
    if args.json:
        _emit(args, {"passed": ok, "checks": [{"name": a, "passed": b, "detail": c} for a, b, c in results]})
    return 0 if ok else 1


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit JSON")
    common.add_argument("--out", metavar="PATH", help="write output to PATH")
    common.add_argument("--rel-tol", type=float, default=1e-11, help="monodromy tolerance")
    common.add_argument("--modes", type=int, default=64, help="Fourier truncation K")
    common.add_argument("--rho-grid", type=int, default=64, help="rho samples for certificates")
    common.add_argument("--threads", type=int, default=None, help="worker count")
    common.add_argument("--allow-extreme-e", action="store_true", help=f"allow e above {E_CAP}")

    p = argparse.ArgumentParser(prog="gonstab", description="Linear stability of (1+n)-gon elliptic relative equilibria.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("coeffs", parents=[common], help="scalar coefficients")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=float, default=1.0)
    s.set_defaults(func=cmd_coeffs)

    s = sub.add_parser("blocks", parents=[common], help="reduced and comparison blocks")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=float, default=1.0)
    s.add_argument("--block", type=int)
    s.set_defaults(func=cmd_blocks)

    s = sub.add_parser("verify-reduction", parents=[common], help="check the block reduction")
    s.add_argument("--n", type=int, nargs="+", default=list(range(3, 13)))
    s.add_argument("--m", type=float, nargs="+", default=[0.1, 1.0, 10.0, 1000.0])
    s.add_argument("--full", action="store_true", help="include the block matrices")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("monodromy", parents=[common], help="monodromy multipliers and verdicts")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=float, required=True)
    s.add_argument("--e", type=float, default=0.0)
    s.add_argument("--block", type=int)
    s.set_defaults(func=cmd_monodromy)

    s = sub.add_parser("morse", parents=[common], help="omega-Morse index of the reduced blocks")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=float, required=True)
    s.add_argument("--e", type=float, default=0.0)
    s.add_argument("--omega", type=_twist, default=ONE, help="1, -1 or rho=R")
    s.add_argument("--block", type=int)
    s.add_argument("--certificate", action="store_true", help="add the sampled positivity certificate")
    s.set_defaults(func=cmd_morse)

    s = sub.add_parser("morse-ab", parents=[common], help="omega-Morse index of a two-parameter block")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--e", type=float, default=0.0)
    s.add_argument("--omega", type=_twist, default=ONE)
    s.add_argument("--certificate", action="store_true")
    s.set_defaults(func=cmd_morse_ab)

    s = sub.add_parser("curves", parents=[common], help="e = 0 degenerate curves")
    s.add_argument("--alpha-range", type=_range, default=_range("0:3:0.25"))
    s.set_defaults(func=cmd_curves)

    s = sub.add_parser("thresholds", parents=[common], help="closed-form instability intervals")
    s.add_argument("--n", type=int, nargs="+", default=list(range(3, 9)))
    s.set_defaults(func=cmd_thresholds)

    s = sub.add_parser("tables", parents=[common], help="reproduce the published tables")
    s.add_argument("--which", choices=["sigma", "dcheck", "instability", "all"], default="all")
    s.set_defaults(func=cmd_tables)

    s = sub.add_parser("sweep", parents=[common], help="(m, e) parameter sweep")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m-range", type=_values, required=True, help="lo:hi:step or comma list")
    s.add_argument("--e-range", type=_values, required=True, help="lo:hi:step or comma list")
    s.add_argument("--mode", choices=["closed_form", "monodromy", "both"], default="both")
    s.add_argument("--no-certificates", action="store_true")
    s.set_defaults(func=cmd_sweep, modes=32)

    s = sub.add_parser("selftest", parents=[common], help="orientation, residual and golden checks")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GonstabError as exc:
        print(f"gonstab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
