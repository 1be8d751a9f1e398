"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline;
they are also printed under ``-v`` because capture is disabled for them.
"""
import json
import math
import time

import numpy as np
import pytest

from cflab.cli import main as cli_main
from cflab.core import MU_A as MU_A_EXACT, MU_E1 as MU_E1_EXACT, cylinder_measure
from cflab.experiment import pair_count_direct, pair_frequency_skew
from cflab.oracle import compare_en_e1, default_cutoffs, en_exact, en_refined, golden_en
from cflab.sampler import GaussSampler, prefix_probability
from cflab.skew import MarkerFamily, equidistribution_report, is_transitive, marker_trajectory
from cflab.streams import stream_from_digits
from cflab.transfer import (
    INDICATOR_A, MU_A, MU_E1, OperatorConfig, apply_transfer, correlation_via_operator, lemma_bound,
    wirsing_contraction_check,
)

# fixed before any run of this file; never changed afterwards
NORMALITY_SEED = 20240611      # criteria 7, 9, 10 (same as the conftest stream)
THEOREM_SEED = 1               # criterion 8


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail, elapsed=None):
        tail = "" if elapsed is None else f" [{elapsed:.1f}s]"
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}{tail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def stream_1e6():
    return GaussSampler(NORMALITY_SEED).draw(10**6 + 16)


def test_criterion_01_exact_constants(verdict):
    t = time.time()
    a, e1 = cylinder_measure((1,)), cylinder_measure((1, 1))
    from fractions import Fraction
    ok = (a.ratio == Fraction(4, 3) and e1.ratio == Fraction(10, 9)
          and a.decimal(12).startswith("0.415037499") and e1.decimal(12).startswith("0.152003093"))
    verdict(1, ok, f"mu(C_[1]) = log2({a.ratio}) = {a.decimal(12)}, mu(C_[1,1]) = log2({e1.ratio}) = "
                   f"{e1.decimal(12)}", time.time() - t)


def test_criterion_02_transfer_known_answers(verdict):
    t = time.time()
    cfg = OperatorConfig(N=2048)
    x = cfg.nodes
    one = apply_transfer(lambda y: np.ones_like(y), cfg)
    ind = apply_transfer(INDICATOR_A, cfg)
    e1 = float(np.max(np.abs(one.values - 1) - one.meta["tail_bound"]))
    e2 = float(np.max(np.abs(ind.values - 1 / (2 + x)) - ind.meta["tail_bound"]))
    tb = max(float(np.max(one.meta["tail_bound"])), float(np.max(ind.meta["tail_bound"])))
    ok = e1 <= 1e-8 and e2 <= 1e-8
    verdict(2, ok, f"max(|P1 - 1| - tail) = {e1:.2e}, max(|P1_A - 1/(2+x)| - tail) = {e2:.2e} "
                   f"(tail bound <= {tb:.1e}, N=2048)", time.time() - t)


def test_criterion_03_wirsing_contraction(verdict):
    t = time.time()
    con = wirsing_contraction_check(OperatorConfig(N=2048))
    ok = con.max_ub_error <= 1e-6 and con.ua_le_half_a
    verdict(3, ok, f"max|Ub - 1/(2(2+x)^2)| = {con.max_ub_error:.2e}; Ua <= a/2 at all nodes: "
                   f"{con.ua_le_half_a} (min margin {con.min_margin:.3g})", time.time() - t)


def test_criterion_04_lemma_band_and_oracle(verdict):
    t = time.time()
    lines, ok = [], True
    for n in range(1, 9):
        est = correlation_via_operator(n)
        dev = abs(MU_A - est.value / MU_A)
        inside = dev <= lemma_bound(n) + est.error / MU_A
        ok &= inside
        lines.append(f"n={n} dev={dev:.3e} bound={lemma_bound(n):.3e} {'ok' if inside else 'OUT'}")
    for n in range(2, 7):
        est = correlation_via_operator(n)
        cert = golden_en(n) if n == 2 else en_exact(n, default_cutoffs(n)[-1])
        good = cert.certified and cert.width < 1e-8 and cert.contains_value(est.value, est.error)
        ok &= good
        ref = en_refined(n)
        lines.append(f"n={n} certified width {cert.width:.2e} (D={cert.D}) "
                     f"{'ok' if good else 'TOO WIDE'}; estimated psi-recursion width {ref.width:.1e} "
                     f"contains operator value: {ref.contains_value(est.value, est.error)}")
    verdict(4, ok, "band n=1..8 and certified oracle n=2..6:\n  " + "\n  ".join(lines), time.time() - t)


def test_criterion_05_inequality_direction(verdict):
    t = time.time()
    parts, ok = [], True
    for n in (2, 3, 4):
        cmp = compare_en_e1(n)
        ok &= cmp.decided
        agree = "agrees" if cmp.agrees_with_printed_inequality else "DISAGREES"
        parts.append(f"n={n}: mu(E_n) {cmp.ordering} than mu(E_1) at D={cmp.interval.D} "
                     f"({agree} with printed '<')")
    verdict(5, ok, "; ".join(parts), time.time() - t)


def test_criterion_06_mixing_limit(verdict):
    t = time.time()
    est = correlation_via_operator(20)
    gap = abs(est.value - MU_A ** 2)
    verdict(6, gap <= 1e-3 and abs(MU_A ** 2 - 0.1722561) < 1e-7,
            f"mu(E_20) = {est.value:.10f}, mu(A)^2 = {MU_A ** 2:.10f}, |diff| = {gap:.2e}", time.time() - t)


def test_criterion_07_sampler_normality(verdict, stream_1e6):
    t = time.time()
    d = stream_1e6
    n = 10**6
    f1 = float(np.mean(d[:n] == 1))
    f11 = float(np.mean((d[:n] == 1) & (d[1:n + 1] == 1)))
    worst = 0.0
    import itertools
    for length in range(1, 5):
        for s in itertools.product(range(1, 5), repeat=length):
            worst = max(worst, abs(prefix_probability(s) - float(cylinder_measure(s).mpf(30))))
    ok = abs(f1 - 0.4150375) <= 0.002 and abs(f11 - 0.1520031) <= 0.0015 and worst <= 1e-10
    verdict(7, ok, f"seed {NORMALITY_SEED}: freq[1] = {f1:.6f}, freq[1,1] = {f11:.6f}, "
                   f"prefix consistency {worst:.1e}", time.time() - t)


def test_criterion_08_theorem_desk_scale(verdict, tmp_path):
    t = time.time()
    out = tmp_path / "theorem"
    code = cli_main(["theorem", "--seed", str(THEOREM_SEED), "--m", "2", "--k", "1",
                     "--digits", str(2 * 10**6 + 1), "--out", str(out)])
    body = json.loads(out.with_suffix(".json").read_text())
    rows = {tuple(r["string"]): r for r in body["rows"]}
    f11 = rows[(1, 1)]["empirical"]
    golden = golden_en(2).midpoint
    digits_ok = all(abs(rows[(d,)]["deviation"]) <= 4 for d in range(1, 6))
    ok = (code == 0 and body["manifest"]["n"] == 10**6 and abs(f11 - golden) <= 0.002
          and f11 - MU_E1 >= 0.0097 and digits_ok)
    verdict(8, ok, f"seed {THEOREM_SEED}, n=10^6: freq[1,1] = {f11:.6f}, golden mu(E_2) = {golden:.10f}, "
                   f"gap from mu(C_[1,1]) = {f11 - MU_E1:.4f}, digits 1..5 within 4 sigma: {digits_ok}, "
                   f"exit code {code}", time.time() - t)


def test_criterion_09_skew_product(verdict, stream_1e6):
    t = time.time()
    ok, notes = True, []
    for m in range(2, 7):
        fam = MarkerFamily.rotation(m)
        res = is_transitive(fam)
        wit_ok = len(res.witnesses) == m * m and all(
            marker_trajectory(w, fam, a)[-1] == b for (a, b), w in res.witnesses.items())
        ok &= bool(res) and wit_ok
    ident = is_transitive(MarkerFamily.identity(2))
    ok &= not ident
    rep = equidistribution_report(stream_from_digits(stream_1e6), MarkerFamily.rotation(3), 1, 1, 10**6)
    zs = [rep.row((1,), mk).z_score for mk in (1, 2, 3)]
    ok &= all(abs(z) <= 4 for z in zs)
    notes.append("rotation m=2..6 transitive with checked witnesses")
    notes.append(f"identity transitive: {bool(ident)}")
    notes.append("m=3 digit-1 z-scores " + ", ".join(f"{z:+.2f}" for z in zs))
    verdict(9, ok, "; ".join(notes), time.time() - t)


def test_criterion_10_counting_routes(verdict, stream_1e6):
    t = time.time()
    worst, ok = [], True
    for m, k in ((2, 1), (2, 2), (3, 1), (3, 3), (5, 4)):
        n = (stream_1e6.size - 2 * m - k) // m
        direct = pair_count_direct(stream_1e6, m, k, n) / n
        skew = pair_frequency_skew(stream_1e6, m, k, n)
        ok &= abs(direct - skew) <= 2 / n
        worst.append(f"(m={m},k={k}) |diff|*n = {abs(direct - skew) * n:.3g}")
    verdict(10, ok, "; ".join(worst) + " (tolerance 2)", time.time() - t)
