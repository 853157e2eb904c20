"""Acceptance suite: one test per criterion, printing PASS/FAIL per check.

Criteria 2, 3, 4, 7 and 8 contain checks that a numerically exact
implementation cannot satisfy at the stated tolerances: the reference
tables were produced with levels carrying ~1e-3 numerical error of their
own (the Example-2 tables are mutually consistent only at level 9.8389,
not at the printed 9.85, and the stop-loss component values do not
satisfy the decomposition identity to better than ~1.2e-3).  Those checks
are implemented faithfully and left red; the full analysis lives in
the project decisions ledger, and the diagnostic test below shows
the same tables reproduced once the reference's own levels are used.
"""

import math
import time

import numpy as np
import pytest
from scipy import special

from cmsum.crossing import GPair, crossing_set, extrema, sum_cdf, sum_quantile
from cmsum.decomposition import (
    approximation_report,
    stoploss_comonotonic,
    stoploss_countermonotonic,
    tvar_comonotonic,
    tvar_countermonotonic,
    tvar_simple,
    var_comonotonic,
)
from cmsum.marginals import (
    Degenerate,
    EmpiricalDiscrete,
    Gamma,
    Normal,
    Poisson,
    Uniform,
)
from cmsum.oracle import mc_measures, mc_sample, quad_stoploss, quad_tvar
from cmsum.transforms import lower_tail, ltvar, tvar, upper_tail


REF_EX1_U = [0.01328, 0.96358]
REF_EX2_U = [0.13337, 0.15843, 0.23781, 0.33971, 0.38404, 0.53079,
               0.55951, 0.69279, 0.73497, 0.81179, 0.87535, 0.89076]
REF_EX2_JUMP_INDICES = [1, 3, 5, 7, 9, 11]
REF_EX2_ALPHA = [0.83598, 0.46330, 0.22700, 0.16108, 0.31461, 0.76530]

_c9_elapsed: dict[str, float] = {}


def _check(failures, label, ok, detail):
    print(f"[acceptance] {'PASS' if ok else 'FAIL'} {label}: {detail}")
    if not ok:
        failures.append(f"{label}: {detail}")
    return ok


def _finish(failures):
    assert not failures, "; ".join(failures)


def test_c01_example1_quantile(pair_gamma_gamma):
    t0 = time.time()
    q = sum_quantile(pair_gamma_gamma, 0.95, 0.0)
    elapsed = time.time() - t0
    failures = []
    _check(failures, "C1 quantile", abs(q - 8.94) <= 0.01,
           f"sum_quantile(0.95, 0) = {q:.6f}, reference 8.94 +/- 0.01")
    _check(failures, "C1 runtime", elapsed < 1.0, f"{elapsed:.2f}s < 1s")
    _finish(failures)


def test_c02_example1_crossing_set(pair_gamma_gamma):
    t0 = time.time()
    x = sum_quantile(pair_gamma_gamma, 0.95, 0.0)
    cs = crossing_set(pair_gamma_gamma, x)
    elapsed = time.time() - t0
    failures = []
    _check(failures, "C2 count", cs.n == 2, f"n = {cs.n}, want 2")
    _check(failures, "C2 continuity", not any(p.is_jump for p in cs.points),
           "both crossings continuous")
    for j, (pt, ref) in enumerate(zip(cs.points, REF_EX1_U), start=1):
        d = abs(pt.u - ref)
        # u2 is red: the reference table was computed at level 8.9414, not
        # at the exact 0.95-quantile 8.93470 (its own quantile error); details in the ledger
        _check(failures, f"C2 u{j}", d <= 1e-4,
               f"u{j} = {pt.u:.6f} vs {ref} (diff {d:.1e}, tol 1e-4)")
    _check(failures, "C2 runtime", elapsed < 1.0, f"{elapsed:.2f}s < 1s")
    _finish(failures)


def test_c03_example2_quantile(pair_gamma_poisson):
    t0 = time.time()
    q = sum_quantile(pair_gamma_poisson, 0.5, 0.0)
    elapsed = time.time() - t0
    failures = []
    # red: the exact median is 9.83978 (verified by brute force and by the
    # reference's own alpha table, which implies level 9.8389); the printed
    # 9.85 is inconsistent with both; details in the ledger
    _check(failures, "C3 median", abs(q - 9.85) <= 0.01,
           f"sum_quantile(0.5, 0) = {q:.6f}, reference 9.85 +/- 0.01")
    _check(failures, "C3 runtime", elapsed < 1.0, f"{elapsed:.2f}s < 1s")
    _finish(failures)


def test_c04_example2_crossing_set(pair_gamma_poisson):
    t0 = time.time()
    x = sum_quantile(pair_gamma_poisson, 0.5, 0.0)
    cs = crossing_set(pair_gamma_poisson, x)
    elapsed = time.time() - t0
    failures = []
    _check(failures, "C4 count", cs.n == 12, f"n = {cs.n}, want 12")
    jumps = [j for j, pt in enumerate(cs.points, start=1) if pt.is_jump]
    _check(failures, "C4 jump indices", jumps == REF_EX2_JUMP_INDICES,
           f"jumps at {jumps}")
    for j, (pt, ref) in enumerate(zip(cs.points, REF_EX2_U), start=1):
        d = abs(pt.u - ref)
        # continuous-crossing u's are red by up to 1.9e-4: the reference
        # table sits at level 9.8389, not at the exact median; details in the ledger
        _check(failures, f"C4 u{j}", d <= 1e-4,
               f"u{j} = {pt.u:.6f} vs {ref} (diff {d:.1e}, tol 1e-4)")
    _check(failures, "C4 runtime", elapsed < 2.0, f"{elapsed:.2f}s < 2s")
    _finish(failures)


def test_c05_example2_alpha_weights(pair_gamma_poisson):
    t0 = time.time()
    x = sum_quantile(pair_gamma_poisson, 0.5, 0.0)
    cs = crossing_set(pair_gamma_poisson, x)
    elapsed = time.time() - t0
    alphas = [pt.alpha for pt in cs.points if pt.is_jump]
    failures = []
    for j, (a, ref) in enumerate(zip(alphas, REF_EX2_ALPHA), start=1):
        d = abs(a - ref)
        _check(failures, f"C5 alpha{j}", d <= 1e-3,
               f"alpha = {a:.5f} vs {ref} (diff {d:.1e}, tol 1e-3)")
    _check(failures, "C5 runtime", elapsed < 2.0, f"{elapsed:.2f}s < 2s")
    _finish(failures)


def test_c06_example2_tvar(pair_gamma_poisson):
    t0 = time.time()
    dec = tvar_countermonotonic(pair_gamma_poisson, 0.5, 0.0)
    elapsed = time.time() - t0
    failures = []
    _check(failures, "C6 tvar", abs(dec.total - 10.51) <= 0.01,
           f"total = {dec.total:.6f}, reference 10.51 +/- 0.01")
    _check(failures, "C6 runtime", elapsed < 2.0, f"{elapsed:.2f}s < 2s")
    _finish(failures)


def test_c07_example2_stoploss(pair_gamma_poisson):
    t0 = time.time()
    x = sum_quantile(pair_gamma_poisson, 0.5, 0.0)
    dec = stoploss_countermonotonic(pair_gamma_poisson, x, form="left_inverse")
    elapsed = time.time() - t0
    failures = []
    # the exact values at the exact median are total 0.334451,
    # leading 0.039020, s_sum 0.924835, jump part -0.629404; the reference's
    # total/s_sum/jump are red because its own component evaluations do not
    # satisfy the decomposition identity to better than ~1.2e-3; details in the ledger
    checks = [
        ("C7 total", dec.total, 0.33610),
        ("C7 leading", dec.leading_upper - dec.leading_lower, 0.03918),
        ("C7 s_sum", dec.s_sum, 0.92823),
        ("C7 jump part", dec.jump_correction + dec.j_sum, -0.63130),
    ]
    for label, got, ref in checks:
        d = abs(got - ref)
        _check(failures, label, d <= 5e-4,
               f"{got:.6f} vs {ref} (diff {d:.1e}, tol 5e-4)")
    _check(failures, "C7 runtime", elapsed < 2.0, f"{elapsed:.2f}s < 2s")
    _finish(failures)


def test_c08_figure3_approximation_maxima(pair_gamma_gamma, pair_gamma_poisson):
    t0 = time.time()
    grid = np.arange(1, 100) / 100.0
    rows1 = approximation_report(pair_gamma_gamma, grid)
    rows2 = approximation_report(pair_gamma_poisson, grid)
    elapsed = time.time() - t0
    failures = []
    e1 = max(-r.rel_err1 for r in rows1)
    e2 = max(-r.rel_err2 for r in rows1)
    s1 = max(r.spread_rel_err1 for r in rows1)
    f1 = max(-r.rel_err1 for r in rows2)
    s2 = max(r.spread_rel_err1 for r in rows2)
    _check(failures, "C8 ex1 t1~", 3.0 <= e1 <= 7.0, f"max underestimation {e1:.2f}% in [3,7]")
    _check(failures, "C8 ex1 t2~", 12.0 <= e2 <= 16.0, f"max underestimation {e2:.2f}% in [12,16]")
    _check(failures, "C8 ex2 t1~", 4.0 <= f1 <= 8.0, f"max underestimation {f1:.2f}% in [4,8]")
    _check(failures, "C8 ex1 spread", 60.0 <= s1 <= 80.0, f"max overestimation {s1:.2f}% in [60,80]")
    # red by 0.18 points: the exact curve reaches 50.18% at the p = 0.01
    # grid edge; the reference band was read off a figure; details in the ledger
    _check(failures, "C8 ex2 spread", 30.0 <= s2 <= 50.0, f"max overestimation {s2:.2f}% in [30,50]")
    _check(failures, "C8 runtime", elapsed < 30.0, f"{elapsed:.1f}s < 30s")
    _finish(failures)


# ---------------------------------------------------------------------------
# criterion 9: property suite (no reference numbers)

FIXTURE_PAIRS = [
    ("gamma-gamma", GPair(Gamma(4.0, 1.0), Gamma(3.0, 1.0))),
    ("gamma-poisson", GPair(Gamma(5.0, 1.0), Poisson(5.0))),
    ("normal-normal", GPair(Normal(0.0, 2.0), Normal(0.0, 1.0))),
    ("normal-gamma", GPair(Normal(1.0, 1.5), Gamma(2.0, 0.5))),
    ("poisson-gamma", GPair(Poisson(3.0), Gamma(2.0, 1.0))),
    ("discrete-discrete", GPair(EmpiricalDiscrete([0.0, 1.0], [0.3, 0.7]),
                                EmpiricalDiscrete([0.0, 2.0], [0.5, 0.5]))),
    ("degenerate-first", GPair(Degenerate(2.0), Gamma(3.0, 1.0))),
    ("degenerate-second", GPair(Gamma(3.0, 1.0), Degenerate(-1.0))),
]

ALL_MARGINALS = [
    Gamma(4.0, 1.0), Gamma(3.0, 1.0), Poisson(5.0), Normal(0.5, 1.5),
    Uniform(0.0, 1.0), Degenerate(2.0), EmpiricalDiscrete([1.0, 3.0], [0.25, 0.75]),
]


def _joint_retention_window(pair):
    lo, hi = extrema(pair)
    s1, s2 = pair.first.support(), pair.second.support()
    lo = max(lo, s1.lower + s2.lower)
    hi = min(hi, s1.upper + s2.upper)
    pad = 0.05 * (hi - lo)
    return lo + pad, hi - pad


def test_c09a_parity_and_links():
    t0 = time.time()
    failures = []
    worst_parity = worst_link = 0.0
    for m in ALL_MARGINALS:
        mean = m.mean()
        sup = m.support()
        lo = sup.lower if sup.lower_finite else m.quantile_left(1e-6) - 1.0
        hi = sup.upper if sup.upper_finite else m.quantile_left(1.0 - 1e-6) + 1.0
        for x in np.linspace(lo, hi, 100):
            x = float(x)
            worst_parity = max(worst_parity, abs(
                upper_tail(m, x) - lower_tail(m, x) - (mean - x)))
        for p in np.linspace(0.005, 0.995, 100):
            p = float(p)
            t, l = tvar(m, p), ltvar(m, p)
            for a in (0.0, 0.5, 1.0):
                q = m.quantile_alpha(p, a)
                worst_link = max(worst_link, abs(t - q - upper_tail(m, q) / (1.0 - p)))
                worst_link = max(worst_link, abs(l - q + lower_tail(m, q) / p))
    _check(failures, "C9a parity", worst_parity <= 1e-8, f"max gap {worst_parity:.2e}")
    _check(failures, "C9a tvar links", worst_link <= 1e-8, f"max gap {worst_link:.2e}")
    _c9_elapsed["a"] = time.time() - t0
    _finish(failures)


def test_c09b_comonotonic_additivity():
    t0 = time.time()
    failures = []
    worst = 0.0
    for _, pair in FIXTURE_PAIRS:
        for p in np.linspace(0.02, 0.98, 25):
            p = float(p)
            worst = max(worst, abs(
                var_comonotonic(pair, p)
                - pair.first.quantile_left(p) - pair.second.quantile_left(p)))
            worst = max(worst, abs(
                tvar_comonotonic(pair, p) - tvar(pair.first, p) - tvar(pair.second, p)))
    _check(failures, "C9b additivity", worst <= 1e-9, f"max gap {worst:.2e}")
    _c9_elapsed["b"] = time.time() - t0
    _finish(failures)


def test_c09c_countermonotonic_below_comonotonic():
    t0 = time.time()
    failures = []
    rng = np.random.default_rng(2024)
    draws = 0
    while draws < 200:
        name, pair = FIXTURE_PAIRS[int(rng.integers(len(FIXTURE_PAIRS)))]
        if rng.random() < 0.5:
            p = float(rng.uniform(0.05, 0.95))
            cm = tvar_countermonotonic(pair, p).total
            co = tvar_comonotonic(pair, p)
            _check(failures, f"C9c tvar {name} p={p:.3f}", cm <= co + 1e-9,
                   f"{cm:.8f} <= {co:.8f}")
        else:
            lo, hi = _joint_retention_window(pair)
            x = float(rng.uniform(lo, hi))
            cm = stoploss_countermonotonic(pair, x).total
            co = stoploss_comonotonic(pair, x).value
            _check(failures, f"C9c stoploss {name} x={x:.3f}", cm <= co + 1e-9,
                   f"{cm:.8f} <= {co:.8f}")
        draws += 1
    _c9_elapsed["c"] = time.time() - t0
    _finish(failures)


def test_c09d_stoploss_forms_agree():
    t0 = time.time()
    failures = []
    rng = np.random.default_rng(7)
    for name, pair in FIXTURE_PAIRS:
        lo, hi = extrema(pair)
        pad = 1e-3 * (hi - lo)
        worst = 0.0
        for x in rng.uniform(lo + pad, hi - pad, size=50):
            a = stoploss_countermonotonic(pair, float(x), form="left_inverse")
            b = stoploss_countermonotonic(pair, float(x), form="generalized_inverse")
            worst = max(worst, abs(a.total - b.total))
        _check(failures, f"C9d forms {name}", worst <= 1e-8, f"max gap {worst:.2e}")
    _c9_elapsed["d"] = time.time() - t0
    _finish(failures)


def test_c09e_s1_plus_s2_parity():
    t0 = time.time()
    failures = []
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        name, pair = FIXTURE_PAIRS[int(rng.integers(len(FIXTURE_PAIRS)))]
        lo, hi = extrema(pair)
        pad = 1e-3 * (hi - lo)
        x = float(rng.uniform(lo + pad, hi - pad))
        dec = stoploss_countermonotonic(pair, x)
        mean_sum = pair.first.mean() + pair.second.mean()
        worst = max(worst, abs(dec.s1 + dec.s2 - (mean_sum - x)))
    _check(failures, "C9e parity", worst <= 1e-8, f"max gap {worst:.2e}")
    _c9_elapsed["e"] = time.time() - t0
    _finish(failures)


def test_c09f_alpha_invariance():
    t0 = time.time()
    failures = []
    for name, pair in FIXTURE_PAIRS:
        for p in (0.25, 0.6, 0.9):
            totals = [tvar_countermonotonic(pair, p, a).total for a in (0.0, 0.5, 1.0)]
            gap = max(totals) - min(totals)
            _check(failures, f"C9f {name} p={p}", gap <= 1e-8, f"spread of totals {gap:.2e}")
    _c9_elapsed["f"] = time.time() - t0
    _finish(failures)


def test_c09g_totals_match_oracles():
    t0 = time.time()
    failures = []
    for name, pair in FIXTURE_PAIRS:
        p = 0.6
        dec = tvar_countermonotonic(pair, p)
        qv, qe = quad_tvar(pair, p)
        _check(failures, f"C9g tvar-vs-quad {name}",
               abs(dec.total - qv) <= max(1e-6, qe),
               f"analytic {dec.total:.8f} quad {qv:.8f}")
        x = sum_quantile(pair, p, 0.0)
        sl = stoploss_countermonotonic(pair, x)
        qv2, qe2 = quad_stoploss(pair, x)
        _check(failures, f"C9g stoploss-vs-quad {name}",
               abs(sl.total - qv2) <= max(1e-6, qe2),
               f"analytic {sl.total:.8f} quad {qv2:.8f}")
        samples = mc_sample(pair, 1_000_000, seed=99)
        est = mc_measures(samples, levels=[p], retentions=[x])
        _, mc_tv, tv_se = est["tvar"][0]
        _check(failures, f"C9g tvar-vs-mc {name}",
               abs(dec.total - mc_tv) <= 4.0 * tv_se,
               f"analytic {dec.total:.6f} mc {mc_tv:.6f} +/- {tv_se:.2g}")
        _, mc_sl, sl_se = est["stoploss"][0]
        _check(failures, f"C9g stoploss-vs-mc {name}",
               abs(sl.total - mc_sl) <= 4.0 * sl_se,
               f"analytic {sl.total:.6f} mc {mc_sl:.6f} +/- {sl_se:.2g}")
    _c9_elapsed["g"] = time.time() - t0
    total = sum(_c9_elapsed.values())
    _check(failures, "C9 runtime", total < 300.0,
           f"{total:.1f}s over parts {sorted(_c9_elapsed)} < 300s")
    _finish(failures)


def test_c10_monotone_case_exactness(pair_normal):
    t0 = time.time()
    failures = []
    for x in (-1.0, 0.0, 0.7):
        got = sum_cdf(pair_normal, x)
        _check(failures, f"C10 cdf x={x}", abs(got - float(special.ndtr(x))) <= 1e-9,
               f"{got:.12f} vs Phi({x})")
    for p in (0.5, 0.9, 0.99):
        z = float(special.ndtri(p))
        closed = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi) / (1.0 - p)
        full = tvar_countermonotonic(pair_normal, p).total
        simple = tvar_simple(pair_normal, p)
        _check(failures, f"C10 closed p={p}", abs(full - closed) <= 1e-9,
               f"theorem {full:.12f} vs closed {closed:.12f}")
        _check(failures, f"C10 corollary p={p}",
               simple is not None and abs(simple - full) <= 1e-9,
               f"two-term {simple} vs theorem {full:.12f}")
    elapsed = time.time() - t0
    _check(failures, "C10 runtime", elapsed < 1.0, f"{elapsed:.2f}s < 1s")
    _finish(failures)


def test_reference_implied_levels_diagnostic(pair_gamma_gamma, pair_gamma_poisson):
    """Supplementary (not a criterion): at the reference's own levels the
    machinery reproduces its tables.

    The Example-1 table matches E_{8.94} (the printed VaR); the Example-2
    table matches E at 9.83887, the level recovered from the published
    alpha weights (all six imply 9.8389 +/- 1e-4, not the printed 9.85).
    """
    cs1 = crossing_set(pair_gamma_gamma, 8.94)
    for pt, ref in zip(cs1.points, REF_EX1_U):
        assert abs(pt.u - ref) <= 1e-4

    x_implied = 9.83887
    cs2 = crossing_set(pair_gamma_poisson, x_implied)
    assert cs2.n == 12
    for pt, ref in zip(cs2.points, REF_EX2_U):
        assert abs(pt.u - ref) <= 1e-4
    alphas = [pt.alpha for pt in cs2.points if pt.is_jump]
    for a, ref in zip(alphas, REF_EX2_ALPHA):
        assert abs(a - ref) <= 1e-4

    # at the implied level the jump part matches the reference exactly and
    # the remaining component gaps (~1e-3) are the reference's own
    # tail-transform evaluation error
    dec = stoploss_countermonotonic(pair_gamma_poisson, x_implied)
    assert dec.jump_correction + dec.j_sum == pytest.approx(-0.63130, abs=5e-5)
    assert dec.leading_upper - dec.leading_lower == pytest.approx(0.03918, abs=2e-4)
    assert dec.s_sum == pytest.approx(0.92823, abs=1.5e-3)
    assert dec.total == pytest.approx(quad_stoploss(pair_gamma_poisson, x_implied)[0],
                                      abs=1e-6)
