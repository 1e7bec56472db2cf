"""Batch verification driver.

Every check in the library is exposed as a subcommand running a grid of
cells; each cell emits one JSON record with inputs, outputs, margins and
wall time.  Exit status: 0 when every cell passes, 1 when any cell fails,
2 when nothing fails but some cells are skipped (infeasible under the
configured caps, or undecidable at the stored precision).  `check` mode
re-runs a previous report and confirms the pass/fail flags reproduce.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from math import gcd
from typing import Dict, List, Optional, Tuple

Frac = Fraction

DEFAULT_SEED = 20260
ODD_CAP = 10 ** 7
EVEN_CAP = 10 ** 8
KY_WORK_CAP = 2 * 10 ** 8

DEFAULT_GRID: Dict[str, List[int]] = {
    "p": [2, 3, 5, 7, 11, 13],
    "f": [1, 2],
    "n": list(range(2, 13)),
    "r": [1, 2, 3, 4],
    "r_even": [2, 4, 6],
    "r_sign": list(range(2, 21, 2)),
    "s": [],  # empty: adaptive under the enumeration cap
}

SUBCOMMANDS = ("verify-gauss", "count-points", "verify-lambda", "lt-check",
               "act-check", "audit-dims", "all")

CM_CELLS = ((3, 2), (3, 4), (4, 3), (5, 2))
SOLVER_CELLS = ((3, 2, 2), (4, 3, 1), (5, 2, 2))
ACT_Q = (2, 3, 4, 5)


def _json_default(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    raise TypeError(f"not serializable: {type(x).__name__}")


def _prime_powers_upto(cap: int) -> List[int]:
    out = []
    for q in range(2, cap + 1):
        m = min(d for d in range(2, q + 1) if q % d == 0)
        t = q
        while t % m == 0:
            t //= m
        if t == 1:
            out.append(q)
    return out


# ---------------------------------------------------------------------------
# cell runners; top level so a process pool can ship them


def _run_verify_gauss(cell: Dict, cfg: Dict) -> Dict:
    from .cyclotomic import CyclotomicInt, nontrivial_characters
    from .errors import EnumerationCapError
    from .finite_field import build_field
    from .quadratic_gauss import det_nu_class, gauss_sum_char, gauss_sum_form

    p, f, r = cell["p"], cell["f"], cell["r"]
    cap = cfg["cap_enum"] or EVEN_CAP
    k = build_field(p, f)
    q = k.order
    minus_q = CyclotomicInt.from_int(p, (1 if q % 4 == 1 else -1) * q)
    dclass = det_nu_class(r, k)
    checked = 0
    try:
        for psi in nontrivial_characters(k):
            g = gauss_sum_char(psi)
            form = gauss_sum_form(r, psi, k, cap=cap)
            if form != CyclotomicInt.from_int(p, dclass) * g ** r:
                return {"status": "fail", "outputs": {"clause": "closed_form",
                                                     "psi": psi.twist.idx}}
            if g * g != minus_q:
                return {"status": "fail", "outputs": {"clause": "square",
                                                     "psi": psi.twist.idx}}
            checked += 1
    except EnumerationCapError as e:
        return {"status": "skip", "outputs": {"reason": str(e)}}
    return {"status": "pass", "outputs": {"q": q, "characters": checked,
                                          "det_class": dclass}}


def _run_count_odd(cell: Dict, cfg: Dict) -> Dict:
    from .artin_schreier import ASVarietySpec, count_Xw, predict_count_odd
    from .errors import EnumerationCapError

    spec = ASVarietySpec(p=cell["p"], m=cell["m"], r=cell["r"], f=cell["f"])
    s = cell["s"]
    cap = cfg["cap_enum"] or ODD_CAP
    try:
        got = count_Xw(spec, s, cap=cap)
        want = predict_count_odd(spec, s, cap=cap)
    except EnumerationCapError as e:
        return {"status": "skip", "outputs": {"reason": str(e)}}
    ok = got == want
    return {"status": "pass" if ok else "fail",
            "outputs": {"count": got, "predicted": want}}


def _run_count_even(cell: Dict, cfg: Dict) -> Dict:
    from .artin_schreier import (ASVarietySpec, count_Xprime, count_Xw,
                                 predict_count_even, stratum_census)
    from .errors import EnumerationCapError

    spec = ASVarietySpec(p=2, m=cell["m"], r=cell["r"], f=cell["m"])
    s = cell["s"]
    cap = cfg["cap_enum"] or EVEN_CAP
    try:
        got = count_Xw(spec, s, cap=cap)
        want = predict_count_even(spec, s)
        prime = count_Xprime(spec, s, cap=cap)
        census = stratum_census(spec, s, cap=cap)
    except EnumerationCapError as e:
        return {"status": "skip", "outputs": {"reason": str(e)}}
    ok = got == want and prime == got and census["total"] == prime
    return {"status": "pass" if ok else "fail",
            "outputs": {"count": got, "predicted": want,
                        "auxiliary": prime, "census_total": census["total"]}}


def _run_count_sign(cell: Dict, cfg: Dict) -> Dict:
    from .artin_schreier import compute_Nr
    from .finite_field import jacobi

    r = cell["r"]
    nr = compute_Nr(r)
    got = -1 if nr % 2 else 1
    want = jacobi(2, r + 1)
    return {"status": "pass" if got == want else "fail",
            "outputs": {"N_r": nr, "sign": got, "symbol": want}}


def _run_verify_lambda(cell: Dict, cfg: Dict) -> Dict:
    from .correspondence import frobenius_scalar_check, verify_prop_ky

    p, f, n = cell["p"], cell["f"], cell["n"]
    q = p ** f
    work_cap = cfg["cap_enum"] or KY_WORK_CAP
    try:
        rep = verify_prop_ky(q, n, work_cap=work_cap)
    except ValueError as e:
        if "work cap" in str(e):
            return {"status": "skip", "outputs": {"reason": str(e)}}
        raise
    scalar = frobenius_scalar_check(q, n)
    ok = rep["ok"] and scalar["ok"]
    return {"status": "pass" if ok else "fail",
            "outputs": {"closed_form": rep["qua_ok"], "square": rep["gr_ok"],
                        "tame_constant": rep["lambda_ok"],
                        "scalar": scalar["ok"],
                        "lambda": repr(rep["lambda"])}}


def _run_lt_cm(cell: Dict, cfg: Dict) -> Dict:
    from .hahn_series import HahnSeries
    from .lubin_tate import LTContext, det_sum_eval

    q, n = cell["q"], cell["n"]
    cap = Frac(cfg["cap_precision"]) if cfg["cap_precision"] else None
    ctx = LTContext(q, n, cap=cap)
    try:
        cm = ctx.cm()  # raises if a valuation or the chain is off
    except RuntimeError as e:
        return {"status": "fail", "outputs": {"clause": "coordinates",
                                              "reason": str(e)}}
    ds = det_sum_eval(list(cm.coords), q, ctx.cap)
    le, lc = cm.lead.leading()
    ratio = ds * HahnSeries.monomial(ctx.field, -le, lc.inverse(), Frac(10 ** 9))
    defect = ratio - HahnSeries.one(ctx.field, ratio.cap)
    level = Frac(1, n)
    out = {"coordinates": "exact", "chain": "exact",
           "congruence_level": level, "defect_cap": defect.cap,
           "defect_v": defect.valuation(), "series_cap": ctx.cap}
    if defect.cap <= level:
        # the stored precision cannot decide the congruence either way
        out["reason"] = "congruence undecidable at the storage cap"
        return {"status": "skip", "outputs": out}
    dv = defect.valuation()
    ok = dv is None or dv > level
    return {"status": "pass" if ok else "fail", "outputs": out}


def _run_lt_solver(cell: Dict, cfg: Dict) -> Dict:
    from .lubin_tate import (LTContext, solvable_residue_tuples,
                             solve_affinoid_point, verify_reduction)

    q, n, rm = cell["q"], cell["n"], cell["res_mult"]
    samples = cfg["samples"] or 20
    ctx = LTContext(q, n, res_mult=rm)
    tuples = solvable_residue_tuples(ctx, limit=samples)
    if len(tuples) < samples:
        return {"status": "skip",
                "outputs": {"reason": f"only {len(tuples)} solvable tuples"}}
    margins = []
    clause_fail = False
    undecided = 0
    degenerate = 0
    for tb in tuples:
        pt = solve_affinoid_point(ctx, tb)
        rep = verify_reduction(ctx, pt)
        margins.append(rep["residual_margin"])
        if pt["degenerate"]:
            degenerate += 1
        # a clause fails only when a stored term visibly contradicts it;
        # an empty residual below a closed cap is undecided, not false
        if rep["residual_v"] is not None and rep["residual_v"] <= 0:
            clause_fail = True
        elif not rep["residual_ok"]:
            undecided += 1
        for key in ("principal_approx", "centered_approx"):
            cl = rep[key]
            if cl["undecidable"]:
                undecided += 1
            elif not cl["ok"]:
                clause_fail = True
    out = {"points": len(tuples), "min_residual_margin": min(margins),
           "degenerate_points": degenerate, "undecided_clauses": undecided}
    if clause_fail:
        return {"status": "fail", "outputs": out}
    if undecided:
        out["reason"] = "residual undecidable at the stored caps"
        return {"status": "skip", "outputs": out}
    return {"status": "pass", "outputs": out}


def _run_act_charpoly(cell: Dict, cfg: Dict) -> Dict:
    from .group_action import gL_matrix

    rep = gL_matrix(cell["q"], cell["n"])
    return {"status": "pass" if rep["matches"] else "fail",
            "outputs": {"charpoly": [c.idx for c in rep["charpoly"]]}}


def _run_act_congruence(cell: Dict, cfg: Dict) -> Dict:
    from .group_action import action_congruence_check
    from .lubin_tate import LTContext

    q, n, rm = cell["q"], cell["n"], cell["res_mult"]
    samples = cfg["samples"] or 10
    ctx = LTContext(q, n, res_mult=rm)
    rep = action_congruence_check(ctx, samples=samples, seed=cfg["seed"],
                                  max_points=2)
    out = {"rows": len(rep["rows"]), "failures": rep["failures"],
           "undecidable_clauses": rep["undecidable_clauses"],
           "fully_decided": rep["fully_decided"]}
    return {"status": "pass" if rep["ok"] else "fail", "outputs": out}


def _run_audit_dims(cell: Dict, cfg: Dict) -> Dict:
    from .correspondence import index_audit

    try:
        rep = index_audit(cell["q"], cell["n"])
    except ValueError as e:
        return {"status": "skip", "outputs": {"reason": str(e)}}
    return {"status": "pass" if rep["oracle_pass"] else "fail",
            "outputs": {"hl_index": rep["hl_index"], "dim_rho": rep["dim_rho"],
                        "n_q": rep["n_q"], "coset_count": rep["coset_count"]}}


RUNNERS = {
    "gauss": _run_verify_gauss,
    "count-odd": _run_count_odd,
    "count-even": _run_count_even,
    "count-sign": _run_count_sign,
    "lambda": _run_verify_lambda,
    "lt-cm": _run_lt_cm,
    "lt-solver": _run_lt_solver,
    "act-charpoly": _run_act_charpoly,
    "act-congruence": _run_act_congruence,
    "audit": _run_audit_dims,
}


def _execute(task: Tuple[str, str, Dict, Dict]) -> Dict:
    subcommand, kind, cell, cfg = task
    t0 = time.perf_counter()
    try:
        rec = RUNNERS[kind](cell, cfg)
    except Exception as e:  # an unexpected blowup is a failure, not a crash
        rec = {"status": "fail",
               "outputs": {"error": f"{type(e).__name__}: {e}"}}
    rec["subcommand"] = subcommand
    rec["kind"] = kind
    rec["cell"] = cell
    rec["seed"] = cfg["seed"]
    rec["wall_ms"] = round((time.perf_counter() - t0) * 1000, 3)
    return rec


# ---------------------------------------------------------------------------
# grid expansion


def _odd_ps(grid: Dict, bound: int) -> List[int]:
    return [p for p in grid["p"] if p % 2 and p <= bound]


def _cells_verify_gauss(grid: Dict, cfg: Dict) -> List[Tuple[str, Dict]]:
    out = []
    for p in _odd_ps(grid, 11):
        for f in [x for x in grid["f"] if x <= 2]:
            for r in [x for x in grid["r"] if x <= 4 and (x + 1) % p]:
                out.append(("gauss", {"p": p, "f": f, "r": r}))
    return out


def _adaptive_s(q: int, r: int, cap: int, explicit: List[int]) -> List[int]:
    if explicit:
        return explicit
    out = []
    s = 1
    while q ** (s * (r + 1)) <= cap:
        out.append(s)
        s += 1
    return out


def _cells_count_points(grid: Dict, cfg: Dict) -> List[Tuple[str, Dict]]:
    out = []
    odd_cap = cfg["cap_enum"] or ODD_CAP
    even_cap = cfg["cap_enum"] or EVEN_CAP
    for p in _odd_ps(grid, 11):
        for f in [x for x in grid["f"] if x <= 2]:
            for m in [x for x in grid["f"] if f % x == 0]:
                for r in [x for x in grid["r"] if (x + 1) % p]:
                    for s in _adaptive_s(p ** f, r, odd_cap, grid["s"]):
                        out.append(("count-odd", {"p": p, "f": f, "m": m,
                                                  "r": r, "s": s}))
    if 2 in grid["p"]:
        for m in [x for x in grid["f"] if x <= 2]:
            for r in grid["r_even"]:
                for s in _adaptive_s(2 ** m, r, even_cap, grid["s"]):
                    out.append(("count-even", {"m": m, "r": r, "s": s}))
        for r in grid["r_sign"]:
            out.append(("count-sign", {"r": r}))
    return out


def _cells_verify_lambda(grid: Dict, cfg: Dict) -> List[Tuple[str, Dict]]:
    out = []
    for p in _odd_ps(grid, 13):
        for f in [x for x in grid["f"] if x <= 2]:
            for n in [x for x in grid["n"] if 2 <= x <= 12 and x % p]:
                out.append(("lambda", {"p": p, "f": f, "n": n}))
    return out


def _cells_lt_check(grid: Dict, cfg: Dict) -> List[Tuple[str, Dict]]:
    out = [("lt-cm", {"q": q, "n": n}) for q, n in CM_CELLS]
    out += [("lt-solver", {"q": q, "n": n, "res_mult": rm})
            for q, n, rm in SOLVER_CELLS]
    return out


def _cells_act_check(grid: Dict, cfg: Dict) -> List[Tuple[str, Dict]]:
    out = []
    for q in ACT_Q:
        p = min(d for d in range(2, q + 1) if q % d == 0)
        for n in [x for x in grid["n"] if x <= 12 and x % p]:
            out.append(("act-charpoly", {"q": q, "n": n}))
    out += [("act-congruence", {"q": q, "n": n, "res_mult": rm})
            for q, n, rm in SOLVER_CELLS]
    return out


def _cells_audit_dims(grid: Dict, cfg: Dict) -> List[Tuple[str, Dict]]:
    out = []
    for q in _prime_powers_upto(9):
        p = min(d for d in range(2, q + 1) if q % d == 0)
        for n in range(2, 7):
            if n % p:
                out.append(("audit", {"q": q, "n": n}))
    return out


CELL_BUILDERS = {
    "verify-gauss": _cells_verify_gauss,
    "count-points": _cells_count_points,
    "verify-lambda": _cells_verify_lambda,
    "lt-check": _cells_lt_check,
    "act-check": _cells_act_check,
    "audit-dims": _cells_audit_dims,
}


def build_tasks(subcommand: str, grid: Dict, cfg: Dict) -> List[Tuple]:
    names = list(CELL_BUILDERS) if subcommand == "all" else [subcommand]
    tasks = []
    for name in names:
        for kind, cell in CELL_BUILDERS[name](grid, cfg):
            tasks.append((name, kind, cell, cfg))
    return tasks


# ---------------------------------------------------------------------------
# driver


def run_tasks(tasks: List[Tuple], threads: int) -> List[Dict]:
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_execute, tasks))
    return [_execute(t) for t in tasks]


def write_report(records: List[Dict], fmt: str, out_path: Optional[str]) -> None:
    sink = open(out_path, "w") if out_path else sys.stdout
    try:
        if fmt == "csv":
            import csv

            w = csv.writer(sink)
            w.writerow(["subcommand", "kind", "cell", "status", "wall_ms"])
            for r in records:
                w.writerow([r["subcommand"], r["kind"],
                            json.dumps(r["cell"], sort_keys=True),
                            r["status"], r["wall_ms"]])
        else:
            for r in records:
                sink.write(json.dumps(r, sort_keys=True,
                                      default=_json_default) + "\n")
    finally:
        if out_path:
            sink.close()


def exit_code(records: List[Dict]) -> int:
    statuses = {r["status"] for r in records}
    if "fail" in statuses:
        return 1
    if "skip" in statuses:
        return 2
    return 0


def summarize(records: List[Dict], code: int) -> str:
    n = len(records)
    fails = sum(r["status"] == "fail" for r in records)
    skips = sum(r["status"] == "skip" for r in records)
    return (f"{n} cells: {n - fails - skips} pass, {fails} fail, "
            f"{skips} skip; exit {code}")


def run_check_mode(report_path: str, threads: int) -> int:
    """Re-run every cell of a previous report; flags must reproduce."""
    with open(report_path) as fh:
        old = [json.loads(line) for line in fh if line.strip()]
    cfgs = {}
    tasks = []
    for rec in old:
        key = (rec["seed"], rec.get("samples"), rec.get("cap_enum"))
        cfg = cfgs.setdefault(key, {
            "seed": rec["seed"],
            "samples": rec.get("samples"),
            "cap_enum": rec.get("cap_enum"),
            "cap_precision": rec.get("cap_precision"),
        })
        tasks.append((rec["subcommand"], rec["kind"], rec["cell"], cfg))
    new = run_tasks(tasks, threads)
    mismatches = [
        (o["subcommand"], o["kind"], o["cell"], o["status"], r["status"])
        for o, r in zip(old, new) if o["status"] != r["status"]
    ]
    for m in mismatches:
        print(f"MISMATCH {m[0]}/{m[1]} {json.dumps(m[2], sort_keys=True)}: "
              f"was {m[3]}, now {m[4]}", file=sys.stderr)
    print(f"check: {len(old)} cells, {len(mismatches)} mismatches",
          file=sys.stderr)
    return 0 if not mismatches else 1


def _env(name: str, default=None):
    return os.environ.get(f"EPI_{name}", default)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="epipelagic",
        description="exact verification suite for the depth-one parameter "
                    "family and its geometric model")
    ap.add_argument("subcommand", choices=SUBCOMMANDS + ("check",))
    ap.add_argument("report", nargs="?", default=None,
                    help="report file to re-run (check mode only)")
    ap.add_argument("--grid", default=_env("GRID"),
                    help="JSON file overriding the default parameter grid")
    ap.add_argument("--cap-enum", type=int,
                    default=_env("CAP_ENUM"),
                    help="enumeration cap (points, form distributions)")
    ap.add_argument("--cap-precision", default=_env("CAP_PRECISION"),
                    help="series precision cap as a rational, e.g. 9/4")
    ap.add_argument("--samples", type=int, default=_env("SAMPLES"),
                    help="sample count (solver points, sampled actors)")
    ap.add_argument("--seed", type=int,
                    default=int(_env("SEED", DEFAULT_SEED)))
    ap.add_argument("--format", choices=("jsonl", "csv"),
                    default=_env("FORMAT", "jsonl"))
    ap.add_argument("--threads", type=int,
                    default=int(_env("THREADS", 1)))
    ap.add_argument("--out", default=_env("OUT"))
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    if args.subcommand == "check":
        if not args.report:
            print("check mode needs a report file", file=sys.stderr)
            return 1
        return run_check_mode(args.report, max(1, args.threads))
    grid = dict(DEFAULT_GRID)
    if args.grid:
        with open(args.grid) as fh:
            for key, val in json.load(fh).items():
                if key not in DEFAULT_GRID:
                    raise SystemExit(f"unknown grid key: {key}")
                grid[key] = list(val)
    if args.cap_enum is not None and int(args.cap_enum) <= 0:
        raise SystemExit("caps must be positive")
    cfg = {
        "seed": args.seed,
        "samples": int(args.samples) if args.samples is not None else None,
        "cap_enum": int(args.cap_enum) if args.cap_enum is not None else None,
        "cap_precision": args.cap_precision,
    }
    if cfg["samples"] is not None and cfg["samples"] <= 0:
        raise SystemExit("sample counts must be positive")
    tasks = build_tasks(args.subcommand, grid, cfg)
    records = run_tasks(tasks, max(1, args.threads))
    for rec in records:  # echo the knobs so check mode can rebuild them
        rec["samples"] = cfg["samples"]
        rec["cap_enum"] = cfg["cap_enum"]
        rec["cap_precision"] = cfg["cap_precision"]
    write_report(records, args.format, args.out)
    code = exit_code(records)
    print(summarize(records, code), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
