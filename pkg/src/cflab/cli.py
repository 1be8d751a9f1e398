"""``cflab`` command line.

Every subcommand prints a human-readable table, optionally writes CSV/JSON
with ``--out`` and a run manifest with ``--manifest``.  ``cflab rerun
MANIFEST`` repeats a recorded run.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from ._backend import backend_name, thread_cap

EXIT_OK, EXIT_FAIL, EXIT_UNDECIDED, EXIT_RESOURCE = 0, 1, 2, 3


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _positive(name, minimum=1):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {text!r}") from None
        if v < minimum:
            raise argparse.ArgumentTypeError(f"{name} must be >= {minimum}, got {v}")
        return v
    return parse


def _seed(text):
    v = _positive("seed", 0)(text)
    if v >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _write_rows(path, rows: List[dict]):
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(rows, indent=2, default=str) + "\n")
    else:
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return path


def _table(rows: List[dict], cols: List[str]):
    widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for r in rows:
        print("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in cols))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return "" if v is None else str(v)


# --------------------------------------------------------------------------
# subcommands

def cmd_measure(args) -> int:
    from .oracle import ResourceError, compare_en_e1, en_exact, oracle_estimate
    from .transfer import OperatorConfig, correlation_via_operator

    rows, status = [], EXIT_OK
    cfg = OperatorConfig(K=args.K, N=args.N)
    for n in args.n:
        if args.method in ("oracle", "both"):
            try:
                iv = en_exact(n, args.cutoff) if args.cutoff else oracle_estimate(n)
            except ResourceError as exc:
                print(f"error: resource guard: {exc}", file=sys.stderr)
                return EXIT_RESOURCE
            row = {"n": n, "method": "oracle", "provenance": "exact" if n == 1 else iv.method,
                   "value": iv.midpoint, "lower": iv.lo, "upper": iv.hi, "error": iv.width / 2,
                   "certified": iv.certified, "cutoff": iv.D, "ordering_vs_E1": None, "certificate": None}
            if n >= 2 and not args.no_compare:
                cmp = compare_en_e1(n)
                row["ordering_vs_E1"] = cmp.ordering
                row["certificate"] = cmp.certificate
                if not cmp.decided:
                    status = EXIT_UNDECIDED
            elif n == 1:
                row["ordering_vs_E1"] = "equal"
                row["decimal_50"] = iv.lower.decimal(50)
            rows.append(row)
        if args.method in ("operator", "both"):
            est = correlation_via_operator(n, cfg)
            rows.append({"n": n, "method": "operator", "provenance": "operator", "value": est.value,
                         "lower": est.value - est.error, "upper": est.value + est.error,
                         "error": est.error, "certified": False, "cutoff": cfg.K,
                         "ordering_vs_E1": None, "certificate": None})
    _table(rows, ["n", "method", "provenance", "value", "error", "ordering_vs_E1"])
    for r in rows:
        if r.get("certificate"):
            print(f"n={r['n']}: {r['ordering_vs_E1']} than mu(E_1); {r['certificate']}; "
                  f"printed '<' {'agrees' if r['ordering_vs_E1'] == 'less' else 'disagrees'}")
    if args.out:
        args.outputs.append(str(_write_rows(args.out, rows)))
    return status


def cmd_sample(args) -> int:
    from .sampler import GaussSampler
    from .streams import write_sidecar, write_stream

    sampler = GaussSampler(args.seed, kmax=args.kmax)
    digits = sampler.draw(args.count)
    try:
        path = write_stream(args.out, digits)
        meta = sampler.metadata(args.count)
        side = write_sidecar(path, meta)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    args.outputs += [str(path), str(side)]
    freq1 = float(np.mean(digits == 1)) if digits.size else float("nan")
    print(f"wrote {args.count} digits to {path} (seed {args.seed}); digit-1 frequency {freq1:.6f}")
    return EXIT_OK


def cmd_theorem(args) -> int:
    from .experiment import theorem_experiment
    from .transfer import MU_E1

    n = (args.digits - args.k) // args.m
    if n < 1:
        print(f"error: --digits must be at least m + k = {args.m + args.k}", file=sys.stderr)
        return EXIT_FAIL
    rep = theorem_experiment(args.seed, args.m, args.k, n, kmax=args.kmax, target_tol=args.tol)
    rows = [r.as_dict() for r in rep.rows]
    for r in rows:
        r["string"] = " ".join(map(str, r["string"]))
    _table(rows, ["string", "empirical", "target", "provenance", "stderr", "deviation"])
    pair = rep.pair
    print(f"[1,1] frequency {pair.empirical:.6f}; mu(E_{args.m}) = {pair.target:.10f} ({pair.provenance}); "
          f"mu(C_[1,1]) = {MU_E1:.10f}")
    if rep.gap_bound is not None:
        print(f"required separation from mu(C_[1,1]): >= {rep.gap_bound:.6f}")
    for name, ok in rep.checks.items():
        print(f"  {'PASS' if ok else 'FAIL'}  {name}")
    if args.out:
        out = Path(args.out)
        js = rep.to_json(out.with_suffix(".json"))
        cs = rep.to_csv(out.with_suffix(".csv"))
        args.outputs += [str(js), str(cs)]
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_wirsing(args) -> int:
    from .transfer import OperatorConfig, derivative_decay, verify_lemma_bound, wirsing_contraction_check

    cfg = OperatorConfig(K=args.K, N=args.N)
    rows = []
    for n in range(1, args.n_max + 1):
        rep = verify_lemma_bound(n, cfg, cross_check=not args.no_oracle)
        rows.append(rep.as_dict())
    _table(rows, ["n", "r_n_half", "bound", "numerical_error", "passed", "oracle_agrees"])
    con = wirsing_contraction_check(cfg)
    print(f"Ub = 1/(2(2+x)^2): max error {con.max_ub_error:.3e}")
    print(f"Ua <= a/2 at every node: {con.ua_le_half_a} (min margin {con.min_margin:.4g})")
    decay = derivative_decay(args.n_max, cfg)
    bound = decay[0] * 0.5 ** np.arange(args.n_max)
    decay_ok = bool(np.all(decay <= bound * (1 + 1e-9)))
    print(f"max|(1+x) g_n| <= 2^-(n-1) max|(1+x) g_1| for n <= {args.n_max}: {decay_ok}")
    ok = all(r["passed"] for r in rows) and con.ua_le_half_a and con.max_ub_error <= 1e-6 and decay_ok
    ok = ok and all(r["oracle_agrees"] is not False for r in rows)
    if args.out:
        args.outputs.append(str(_write_rows(args.out, rows)))
    return EXIT_OK if ok else EXIT_FAIL


def _family(name: str, m: int):
    from .skew import MarkerFamily
    if name == "rotation":
        return MarkerFamily.rotation(m)
    if name == "identity":
        return MarkerFamily.identity(m)
    if name == "swap":
        return MarkerFamily.digit_swap(1)
    raise ValueError(name)


def cmd_skew(args) -> int:
    from .sampler import sample_stream
    from .skew import equidistribution_report, is_transitive
    from .streams import stream_from_file

    fam = _family(args.family, args.m)
    tr = is_transitive(fam)
    print(f"family {fam.name}: transitive = {tr.transitive}")
    for (a, b), w in sorted(tr.witnesses.items()):
        print(f"  {a} -> {b}: digits {list(w)}")
    if tr.missing:
        print(f"  unreachable pairs: {tr.missing}")
    need = args.iterations + args.length - 1
    stream = stream_from_file(args.stream) if args.stream else sample_stream(args.seed, need)
    rep = equidistribution_report(stream, fam, args.start, args.length, args.iterations, args.dmax)
    rows = [{"string": " ".join(map(str, r.string)), "marker": r.marker, "empirical": r.empirical,
             "target": r.target, "stderr": r.stderr, "z_score": r.z_score} for r in rep.rows]
    _table(rows, ["string", "marker", "empirical", "target", "stderr", "z_score"])
    if args.out:
        args.outputs.append(str(rep.to_csv(args.out)))
    return EXIT_OK


def cmd_stats(args) -> int:
    import itertools
    from .core import cylinder_measure
    from .experiment import binomial_stderr, string_counts
    from .skew import window_codes
    from .streams import read_stream

    digits = read_stream(args.file)
    rows = []
    for length in range(1, args.length + 1):
        n = digits.size - length + 1
        if n < 1:
            break
        codes = window_codes(digits, length, args.dmax, n)
        counts = np.bincount(codes[codes >= 0], minlength=args.dmax ** length)
        for idx, s in enumerate(itertools.product(range(1, args.dmax + 1), repeat=length)):
            p = float(cylinder_measure(s))
            se = binomial_stderr(p, n, length)
            f = counts[idx] / n
            rows.append({"string": " ".join(map(str, s)), "count": int(counts[idx]), "empirical": f,
                         "target": p, "stderr": se, "z_score": (f - p) / se})
    if not rows:
        print(f"{args.file}: empty stream")
        return EXIT_OK
    print(f"{args.file}: {digits.size} digits")
    _table(rows, ["string", "count", "empirical", "target", "z_score"])
    if args.out:
        args.outputs.append(str(_write_rows(args.out, rows)))
    return EXIT_OK


def cmd_rerun(args) -> int:
    rec = json.loads(Path(args.manifest_file).read_text())
    return main(rec["argv"])


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cflab", description="Continued-fraction normality lab")
    p.add_argument("--version", action="version", version=f"cflab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="CSV or JSON output path")
        sp.add_argument("--manifest", help="write a run manifest JSON here")

    sp = sub.add_parser("measure", help="mu(E_n) from the oracle and/or the transfer operator")
    sp.add_argument("--n", type=_positive("n"), nargs="+", required=True)
    sp.add_argument("--cutoff", type=_positive("cutoff"), help="digit cutoff D for the enumeration oracle")
    sp.add_argument("--method", choices=("oracle", "operator", "both"), default="both")
    sp.add_argument("--K", type=_positive("K", 16), default=10_000)
    sp.add_argument("--N", type=_positive("N", 64), default=2048)
    sp.add_argument("--no-compare", action="store_true", help="skip the certified comparison with mu(E_1)")
    common(sp)
    sp.set_defaults(func=cmd_measure)

    sp = sub.add_parser("sample", help="write a Gauss-distributed digit stream (CFD1)")
    sp.add_argument("--seed", type=_seed, required=True)
    sp.add_argument("--count", type=_positive("count", 0), required=True)
    sp.add_argument("--kmax", type=_positive("kmax"), default=10**6)
    sp.add_argument("--out", required=True, help="CFD1 output path (sidecar JSON written next to it)")
    sp.add_argument("--manifest")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("theorem", help="[1,1] frequency along an arithmetic progression")
    sp.add_argument("--seed", type=_seed, required=True)
    sp.add_argument("--m", type=_positive("m"), required=True)
    sp.add_argument("--k", type=_positive("k"), default=1)
    sp.add_argument("--digits", type=_positive("digits"), default=2_000_001,
                    help="digits sampled from the parent stream")
    sp.add_argument("--kmax", type=_positive("kmax"), default=10**6)
    sp.add_argument("--tol", type=float, default=None,
                    help="tolerance for [1,1] against mu(E_m) (default: 4 widened standard errors)")
    common(sp)
    sp.set_defaults(func=cmd_theorem)

    sp = sub.add_parser("wirsing", help="band check for n=1..n_max and the Ua <= a/2 grid check")
    sp.add_argument("--n-max", type=_positive("n-max"), default=8)
    sp.add_argument("--K", type=_positive("K", 16), default=10_000)
    sp.add_argument("--N", type=_positive("N", 64), default=2048)
    sp.add_argument("--no-oracle", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_wirsing)

    sp = sub.add_parser("skew", help="transitivity and equidistribution of the augmented map")
    sp.add_argument("--family", choices=("rotation", "identity", "swap"), default="rotation")
    sp.add_argument("--m", type=_positive("m"), default=3)
    sp.add_argument("--seed", type=_seed, default=0)
    sp.add_argument("--stream", help="CFD1 file to use instead of sampling")
    sp.add_argument("--iterations", type=_positive("iterations"), default=10**6)
    sp.add_argument("--length", type=_positive("length"), default=1)
    sp.add_argument("--dmax", type=_positive("dmax"), default=3)
    sp.add_argument("--start", type=_positive("start"), default=1)
    common(sp)
    sp.set_defaults(func=cmd_skew)

    sp = sub.add_parser("stats", help="frequency table of a CFD1 stream")
    sp.add_argument("file")
    sp.add_argument("--length", type=_positive("length"), default=2)
    sp.add_argument("--dmax", type=_positive("dmax"), default=5)
    common(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    sp.add_argument("manifest_file")
    sp.set_defaults(func=cmd_rerun, manifest=None)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.outputs = []
    started = _now()
    status = args.func(args)
    if getattr(args, "manifest", None):
        params = {k: v for k, v in vars(args).items() if k not in ("func", "outputs", "manifest")}
        manifest = {
            "subcommand": args.command,
            "argv": [a for a in argv],
            "parameters": params,
            "seed": params.get("seed"),
            "tool_version": __version__,
            "backend": backend_name(),
            "threads": thread_cap(),
            "started_utc": started,
            "finished_utc": _now(),
            "outputs": args.outputs,
            "exit_code": status,
        }
        Path(args.manifest).write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
