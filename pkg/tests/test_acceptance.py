"""Acceptance criteria 1-5, one pass/fail line each.

Criterion 2 and 5 share four subprocess runs of the CLI at delta = 2^-13
(two configs, one and two worker threads).
"""
import json
import math
import os
import random
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

import oracles
import published as P
from conftest import CONFIGS
from ulamcert.certify import BoundMatrix, left_eigen_ab, spectral_radius_rho
from ulamcert.contraction import estimate_lambda2_escape, estimate_lambda2_mixing
from ulamcert.dynamics import Hole, linear_mod1, mod1_map, iterate_map
from ulamcert.lasota_yorke import ly_iterate, ly_one_step
from ulamcert.rigor import Interval, eval_jet, interval_arith, interval_elementary, parse_expr, substitute
from ulamcert.ulam import apply_hole_mask, approx_coefficients, build_ulam

# first certified desk-scale values, locked against regressions
LOCKED = {
    "lanford": {"n1": 11, "lambda2": 0.13089476711828973, "rho_hi": 0.25469103824318634},
    "escape": {"n1": 11, "lambda2": 0.47386167667253354, "rho_hi": 0.5395815805299566,
               "rate_lo": 0.05608739005876047},
}
LOCK_RTOL = 1e-9


# -- criterion 1 -----------------------------------------------------------------------

def test_criterion_1_published_reproduction(acceptance_line):
    failures, slowest = [], 0.0
    for name in P.INPUTS:
        t0 = time.perf_counter()
        _, ac, dc = P.build(name)
        table = P.table(name)
        slowest = max(slowest, time.perf_counter() - t0)
        (c_lo, c_hi), (d_lo, d_hi) = P.CD[name]
        checks = {
            "C": ac.C.overlaps(Interval(c_lo, c_hi)),
            "D": ac.D.overlaps(Interval(d_lo, d_hi)),
            "rho": dc.rho.overlaps(Interval(*P.RHO[name])) and dc.rho.hi - dc.rho.lo <= 1e-3,
            "a": dc.a.overlaps(Interval(*P.A_COEF[name])),
            "strong": abs(dc.strong_constant().hi / P.CONSTANTS[name][0] - 1) <= 5e-3,
            "weak": abs(dc.weak_constant().hi / P.CONSTANTS[name][1] - 1) <= 5e-3,
        }
        for h, ref in P.TABLES[name].items():
            r = table[h]
            got = (r.strong[0].hi, r.strong[1].hi, r.weak[0].hi, r.weak[1].hi)
            checks[f"h={h}"] = all(P.sig3(g, x) for g, x in zip(got, ref))
        failures += [f"{name}:{k}" for k, ok in checks.items() if not ok]
    ok = not failures and slowest < 1.0
    acceptance_line(1, ok, f"published C, D, rho, (a,b), constants, 12 table rows; "
                           f"slowest example {slowest:.3f}s; failures {failures}")
    assert ok


# -- criteria 2 and 5 ----------------------------------------------------------------------

def _cli(mode, config, threads):
    env = dict(os.environ, NUMBA_NUM_THREADS=str(max(threads, 2)))
    t0 = time.perf_counter()
    out = subprocess.run([sys.executable, "-m", "ulamcert", mode, "--config", os.path.join(CONFIGS, config),
                          "--threads", str(threads)], capture_output=True, text=True, env=env)
    return out.returncode, out.stdout, out.stderr, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_runs():
    runs = {}
    for name, mode, config in (("lanford", "mixing", "lanford.ini"), ("escape", "escape", "escape.ini")):
        runs[name] = {t: _cli(mode, config, t) for t in (1, 2)}
    return runs


def test_criterion_2_desk_scale(desk_runs, acceptance_line):
    details, ok = [], True
    for name in ("lanford", "escape"):
        code, out, err, secs = desk_runs[name][1]
        if code != 0:
            ok = False
            details.append(f"{name}: exit {code} {err.strip()[-200:]}")
            continue
        doc = json.loads(out)
        n1, lam2, rho = doc["n1"], float(doc["lambda2"][1]), float(doc["rho"][1])
        lock = LOCKED[name]
        good = (n1 <= 40 and lam2 <= 0.5 and rho < 1 and secs <= 1800 and n1 == lock["n1"]
                and math.isclose(lam2, lock["lambda2"], rel_tol=LOCK_RTOL)
                and math.isclose(rho, lock["rho_hi"], rel_tol=LOCK_RTOL))
        msg = f"{name}: n1={n1} lambda2<={lam2:.6g} rho<={rho:.6g} {secs:.0f}s"
        if name == "escape":
            rate = float(doc["escape_rate"][0])
            good = good and rate > 0 and math.isclose(rate, lock["rate_lo"], rel_tol=LOCK_RTOL)
            msg += f" rate>={rate:.5g}"
        else:
            msg += f" density L1 error<={float(doc['density']['l1_error'][1]):.4g}"
        ok = ok and good
        details.append(msg)
    acceptance_line(2, ok, "; ".join(details))
    assert ok


def test_criterion_5_determinism(desk_runs, acceptance_line):
    same = {name: desk_runs[name][1][1] == desk_runs[name][2][1] and desk_runs[name][1][0] == 0
            for name in desk_runs}
    ok = all(same.values())
    acceptance_line(5, ok, "byte-identical reports with --threads 1 and --threads 2: "
                           + ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in same.items()))
    assert ok


# -- criterion 3 -----------------------------------------------------------------------------

def _lemma_violations(a, ly, k, count, seed):
    ac = approx_coefficients(ly)
    C, D = Fraction(ac.C.hi), Fraction(ac.D.hi)
    P_ = oracles.ulam_matrix(a, k)
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        pieces = int(rng.integers(2, 12))
        cuts = sorted({Fraction(int(c), 97) for c in rng.integers(1, 97, pieces - 1)})
        breaks = [Fraction(0)] + cuts + [Fraction(1)]
        g = (breaks, [Fraction(int(v), 7) for v in rng.integers(-20, 21, len(breaks) - 1)])
        exact, disc = g, oracles.project(g, k)
        for n in (1, 2, 3):
            exact = oracles.transfer(a, exact)
            disc = oracles.matvec(P_, disc)
            err = oracles.l1_distance(exact, oracles.grid_function(disc))
            if err > Fraction(1, k) * (C * oracles.bv(g) + n * D * oracles.l1(g)):
                bad += 1
    return bad


def test_criterion_3_oracle_equivalence(acceptance_line):
    entry_failures, entries = 0, 0
    for slope in (Fraction(2), Fraction(23, 5)):
        m = linear_mod1(slope)
        for k in (8, 16, 32):
            u = build_ulam(m, k)
            P_ = oracles.ulam_matrix(slope, k)
            for j in range(k):
                for i in range(k):
                    e = u.entry(j + 1, i + 1)
                    entries += 1
                    if not Fraction(e.lo) <= P_[j][i] <= Fraction(e.hi):
                        entry_failures += 1
    a = Fraction(23, 5)
    lemma_bad = _lemma_violations(a, ly_iterate(ly_one_step(linear_mod1(a))), 16, 100, 3)
    ok = entry_failures == 0 and lemma_bad == 0
    acceptance_line(3, ok, f"{entry_failures}/{entries} entry failures; "
                           f"{lemma_bad} approximation-inequality violations over 100 densities x n<=3")
    assert ok


# -- criterion 4 -------------------------------------------------------------------------------

def _fuzz_intervals(cases, seed=20):
    rng = random.Random(seed)
    bad = 0

    def rand_frac():
        return Fraction(rng.uniform(-1e3, 1e3)) * Fraction(1, rng.choice([1, 3, 7, 10, 1000]))

    def sample(lo, hi):
        return lo + (hi - lo) * Fraction(rng.randint(0, 1000), 1000)

    for n in range(cases):
        a, b = sorted((rand_frac(), rand_frac()))
        c, d = sorted((rand_frac(), rand_frac()))
        x, y = Interval(a, b), Interval(c, d)
        p, q = sample(a, b), sample(c, d)
        op = n % 6
        if op < 4:
            name = ("add", "sub", "mul", "div")[op]
            if name == "div" and c <= 0 <= d:
                continue
            r = interval_arith(x, y, name)
            val = {"add": p + q, "sub": p - q, "mul": p * q, "div": p / q if q else None}[name]
            ok = Fraction(r.lo) <= val <= Fraction(r.hi)
        elif op == 4:
            xs = Interval(abs(a), abs(a) + abs(b))
            s = interval_elementary(xs, "sqrt")
            v = abs(a) + (abs(b)) * Fraction(rng.randint(0, 1000), 1000)
            ok = Fraction(s.lo) ** 2 <= v <= Fraction(s.hi) ** 2 and s.lo >= 0
        else:
            r = interval_elementary(x, "pow", 3)
            ok = Fraction(r.lo) <= p ** 3 <= Fraction(r.hi)
        bad += not ok
    return bad


def _chain_rule_failures(cases, seed=21):
    rng = random.Random(seed)
    inner = ["x*x", "0.5*x + 1/3", "abs(x - 1/2) + 2", "x/(2 + x*x)", "(x+1)^3", "(1+x*x)^(1/2)"]
    outer = ["2*x + 0.5*x*(1-x)", "x^2 - x", "(x+3)^(2/3)", "1/(1 + x*x)", "-x + x*x*x"]
    parsed = {t: parse_expr(t) for t in inner + outer}
    bad = 0
    for _ in range(cases):
        f, g = parsed[rng.choice(outer)], parsed[rng.choice(inner)]
        xi = Interval(Fraction(rng.randint(0, 1000), 1000))
        jg = eval_jet(g, xi)
        jf = eval_jet(f, jg.val)
        comp = eval_jet(substitute(f, g), xi)
        ok = (comp.d1.overlaps(jf.d1 * jg.d1)
              and comp.d2.overlaps(jf.d2 * jg.d1 * jg.d1 + jf.d1 * jg.d2))
        bad += not ok
    return bad


def _eigen_failures(cases, seed=22):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(cases):
        e = rng.random(4) * 10.0 ** rng.integers(-6, 3, 4) + 1e-9
        M = BoundMatrix(*(Interval(float(v)) for v in e))
        rho = spectral_radius_rho(M)
        a, b = left_eigen_ab(M, rho)
        ok = ((a * M.m11 + b * M.m21).overlaps(rho * a) and (a * M.m12 + b * M.m22).overlaps(rho * b)
              and (a + b).contains(1))
        bad += not ok
    return bad


def _dominance_failures(count=100):
    def measure(M, v, n):
        x = v.astype(np.longdouble)
        for _ in range(n):
            x = M @ x
        return float(np.abs(x).sum() / v.size)

    bad = 0
    rng = np.random.default_rng(23)
    lan2 = iterate_map(mod1_map("2*x + 0.5*x*(1-x)"), 2)
    u = build_ulam(lan2, 128)
    cc = estimate_lambda2_mixing(u, 0.5, 40)
    M = u.to_dense("mid").astype(np.longdouble)
    for _ in range(count):
        v = rng.standard_normal(128)
        v -= v.mean()
        v /= np.abs(v).sum() / 128
        bad += measure(M, v, cc.n1) > cc.lambda2.hi
    u = apply_hole_mask(build_ulam(linear_mod1(Fraction(23, 5)), 256), Hole.of("7/16", "9/16"))
    cc = estimate_lambda2_escape(u, 0.5, 40)
    M = u.to_dense("mid").astype(np.longdouble)
    for _ in range(count):
        v = rng.standard_normal(256)
        v /= np.abs(v).sum() / 256
        bad += measure(M, v, cc.n1) > cc.lambda2.hi
    return bad


def _column_sum_failures():
    lan = mod1_map("2*x + 0.5*x*(1-x)")
    maps = {"lanford": lan, "lanford2": iterate_map(lan, 2), "doubling": linear_mod1(2),
            "23/5": linear_mod1(Fraction(23, 5))}
    bad = 0
    for m in maps.values():
        for k in (8, 64, 1024):
            lo, hi = build_ulam(m, k).column_sums()
            bad += int(np.sum((lo > 1) | (hi < 1)))
    return bad


def test_criterion_4_property_suites(acceptance_line):
    counts = {
        "interval fuzz (1e5)": _fuzz_intervals(100_000),
        "jet chain rule (1e3)": _chain_rule_failures(1000),
        "eigen identity (1e3)": _eigen_failures(1000),
        "contraction dominance (2x100)": _dominance_failures(),
        "column sums": _column_sum_failures(),
    }
    ok = not any(counts.values())
    acceptance_line(4, ok, "; ".join(f"{k}: {v} violations" for k, v in counts.items()))
    assert ok
