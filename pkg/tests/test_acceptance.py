"""Acceptance suite: one test per criterion, each at its stated tolerance.

A line per criterion (PASS/FAIL plus the measured numbers) is printed in the
terminal summary by ``conftest.py``.
"""
import math
import time

import numpy as np
import pytest

from oracles import CROSS_CHECK_CASES, behavior_of, honest_point, lossy_realization
from postrand import certify as cert
from postrand import noniid as ni
from postrand.behaviors import ALICE, alice_detected, strategy_b, to_collins_gisin
from postrand.photonics import chsh_minentropy_bound, singlet_with_vacuum
from postrand.relaxation import build_guessing_sdp, export_sdpa, solve
from postrand.sdpa import parse_sdpa, solve_sdpa_cvxopt

pytestmark = pytest.mark.slow


class Check:
    """Collects named conditions so one failing test still reports every number."""

    def __init__(self, request):
        self.node = request.node
        self.failed = []
        self.notes = []
        self.t0 = time.perf_counter()

    def __call__(self, name, ok, value=""):
        self.notes.append(f"{name}={value}" if value != "" else name)
        if not ok:
            self.failed.append(name)

    def runtime(self, limit):
        dt = time.perf_counter() - self.t0
        self(f"runtime<={limit:g}s", dt <= limit, f"{dt:.3g}s")

    def done(self):
        self.node.acceptance_detail = "; ".join(self.notes)
        assert not self.failed, f"failed: {self.failed} ({self.node.acceptance_detail})"


@pytest.fixture
def check(request):
    return Check(request)


# combined table as printed, rows (x, a) and columns (y, b)
COMBINED = np.array([
    [1, .6919, .5000],
    [.2800, .0716, .0178],
    [.5000, .4681, .3722],
    [.2800, .0716, .2621],
    [.5000, .4681, .1279],
])


@pytest.mark.criterion(1, "CHSH min-entropy bound")
def test_criterion_01_chsh_bound(check):
    t0 = time.perf_counter()
    top, local, mid = chsh_minentropy_bound(2 * math.sqrt(2)), chsh_minentropy_bound(2.0), \
        chsh_minentropy_bound(2.414)
    dt = time.perf_counter() - t0
    check("f(2sqrt2)==1", top == 1.0, top)
    check("f(2)==0", local == 0.0, local)
    check("|f(2.414)-0.20|<=0.01", abs(mid - 0.20) <= 0.01, f"{mid:.4f}")
    check("runtime<1ms", dt < 1e-3, f"{dt * 1e6:.1f}us")
    check.done()


@pytest.mark.criterion(2, "two-day accounting")
def test_criterion_02_two_day(check):
    n = 1000
    acc = cert.two_day_accounting(n)
    check("per-day==N", acc.per_day == pytest.approx(n, rel=1e-6), f"{acc.per_day:.5f}")
    check("pooled(CHSH)<=0.45N", acc.pooled_chsh <= 0.45 * n, f"{acc.pooled_chsh:.1f}")
    check("pooled(full)<N", acc.pooled_full < acc.per_day, f"{acc.pooled_full:.1f}")
    check.runtime(1.0)
    check.done()


@pytest.mark.criterion(3, "source-efficiency model: (b)=(c)=(h), proportional to nu")
def test_criterion_03_proportional(check):
    res = cert.figure_scan(4, ("a", "b", "c", "h"))
    nus = np.array(res.grid)
    ra, rb, rc, rh = (res.rates(s) for s in "abch")
    check("grid 0.1..1.0", np.allclose(nus, np.arange(1, 11) / 10))
    check("|b-c|<=1e-6", np.max(np.abs(rb - rc)) <= 1e-6, f"{np.max(np.abs(rb - rc)):.2e}")
    check("|b-h|<=1e-5", np.max(np.abs(rb - rh)) <= 1e-5, f"{np.max(np.abs(rb - rh)):.2e}")
    check("a<=b+1e-6", np.all(ra <= rb + 1e-6), f"{np.max(ra - rb):.2e}")
    dev = np.max(np.abs(rb - nus * rb[-1]))
    check("b==nu*b(1)", dev <= 1e-6, f"{dev:.2e}")
    check.runtime(300)
    check.done()


@pytest.mark.criterion(4, "heralded equivalence")
def test_criterion_04_heralded_equivalence(check):
    for nu in (0.01, 0.4, 0.9):
        b = singlet_with_vacuum(nu)
        _, _, d = cert.heralded_equivalence_check(b, strategy_b(b.scenario))
        check(f"nu={nu}", d <= 1e-6, f"{d:.1e}")
    check.runtime(60)
    check.done()


@pytest.mark.criterion(5, "one-pair singlet detection thresholds")
def test_criterion_05_one_pair_thresholds(check):
    res = cert.figure_scan(2, ("a", "b", "c", "h"), grid=[0.80, 0.828, 0.85, 0.90])
    r = {s: dict(zip(res.grid, res.rates(s))) for s in "abch"}
    for eta in (0.80, 0.828):
        worst = max(r[s][eta] for s in "abch")
        check(f"eta={eta}:<=1e-6", worst <= 1e-6, f"{worst:.1e}")
    for s in "abh":
        check(f"{s}@0.85>1e-4", r[s][0.85] > 1e-4, f"{r[s][0.85]:.3e}")
    check("c@0.85<=1e-6", r["c"][0.85] <= 1e-6, f"{r['c'][0.85]:.1e}")
    check("c@0.90>0", r["c"][0.90] > 0, f"{r['c'][0.90]:.3e}")
    check.runtime(300)
    check.done()


@pytest.mark.criterion(6, "Eberhard configurations")
def test_criterion_06_eberhard(check):
    res = cert.figure_scan(3, ("b", "h"), grid=[0.60, 0.666, 0.70, 0.80, 0.90])
    rb = dict(zip(res.grid, res.rates("b")))
    rh = dict(zip(res.grid, res.rates("h")))
    for eta in (0.60, 0.666):
        worst = max(rb[eta], rh[eta])
        check(f"eta={eta}:<=1e-6", worst <= 1e-6, f"{worst:.1e}")
    check("b@0.70>1e-5", rb[0.70] > 1e-5, f"{rb[0.70]:.3e}")
    for eta in (0.70, 0.80, 0.90):
        d = abs(rb[eta] - rh[eta])
        check(f"|b-h|@{eta}<=1e-5", d <= 1e-5, f"{d:.1e}")
    check.runtime(600)
    check.done()


@pytest.mark.criterion(7, "SPDC source: (b) dominates, rate per time peaks at small nu")
def test_criterion_07_spdc(check):
    res = cert.figure_scan(1, ("a", "b", "c"), grid=[0.1, 0.3, 0.6, 1.0, 1.5])
    ra, rb, rc = (res.rates(s) for s in "abc")
    check("b>=a-1e-6", np.all(rb >= ra - 1e-6), f"{np.min(rb - ra):.2e}")
    check("b>=c-1e-6", np.all(rb >= rc - 1e-6), f"{np.min(rb - rc):.2e}")
    per_time = cert.rate_per_time(res.grid, rb)
    check("argmax f/nu at smallest nu", int(np.argmax(per_time)) == 0,
          np.array2string(per_time, precision=3))
    check.runtime(600)
    check.done()


@pytest.mark.criterion(8, "guessing bound on the combined table")
def test_criterion_08_combined_bound(check):
    b = ni.example2_expected_frequencies()
    # words of length 2 on Alice's side only: 39x39 blocks, already below the bound
    G = cert.guessing_probability(b, alice_detected(b.scenario), 0, 0, level=(2, 1))
    check("G<=0.9874+1e-4", G <= 0.9874 + 1e-4, f"{G:.6f}")
    check("G>0.95", G > 0.95)
    check.runtime(30)
    check.done()


@pytest.mark.criterion(9, "combined-table frequencies")
def test_criterion_09_frequencies(check):
    expected = ni.example2_expected_frequencies()
    dev = np.abs(to_collins_gisin(expected).to_matrix() - COMBINED).max()
    check("table<=1e-4", dev <= 1e-4, f"{dev:.1e}")
    n = 10_000_000
    f = ni.example2_frequencies(ni.example2_simulate(n=n, seed=7)).table[0, 0]
    p = expected.table[0, 0]
    z = np.abs(f - p) / np.maximum(np.sqrt(p * (1 - p) / n), 1e-300)
    z = np.where(p > 0, z, np.where(f > 0, np.inf, 0.0))
    check("3 sigma", np.all(z <= 3), f"max z={z.max():.2f}")
    check.runtime(120)
    check.done()


@pytest.mark.criterion(10, "blank-run imitation")
def test_criterion_10_blank_runs(check):
    n = 1_000_000
    rec = ni.example1_simulate(n, 2024)
    frac = float((rec.box == 1).mean())
    check("fraction=0.4+-0.002", abs(frac - 0.4) <= 0.002, f"{frac:.4f}")
    acc = ni.example1_accuracy(rec)
    check("decoder==1", acc == 1.0, acc)
    chi = ni.camouflage_test(ni.example1_frequencies(rec), n, singlet_with_vacuum(0.4))
    check("chi2 not rejected", chi.p_value > 1e-3, f"p={chi.p_value:.3f}")
    check.runtime(60)
    check.done()


@pytest.mark.criterion(11, "relaxation soundness")
def test_criterion_11_soundness(check):
    rng = np.random.default_rng(11)
    worst_gap, floor = np.inf, np.inf
    for k in range(20):
        comps = lossy_realization(rng.uniform(0.1, math.pi / 4), rng.uniform(-1.5, 1.5, 2),
                                  rng.uniform(-1.5, 1.5, 2), rng.uniform(0.7, 1), rng.uniform(0.7, 1))
        beh = behavior_of(comps)
        ps = strategy_b(beh.scenario) if k % 2 == 0 else alice_detected(beh.scenario)
        pr = build_guessing_sdp(beh, ps)
        Ys, lower = honest_point(pr, comps, ps, 0, 0)
        if np.abs(pr.constraint_residual(Ys)).max() > 1e-9:
            check(f"honest point {k} infeasible", False)
        res = solve(pr)
        worst_gap = min(worst_gap, res.value - lower)
        floor = min(floor, min(np.linalg.eigvalsh(B)[0] for B in res.blocks))
    check("lower<=optimum (20)", worst_gap >= -1e-7, f"min slack {worst_gap:.1e}")
    worst = 0.0
    for name, make in CROSS_CHECK_CASES.items():
        b, f = make()
        pr = build_guessing_sdp(b, f(b.scenario))
        res = solve(pr)
        value, status = solve_sdpa_cvxopt(parse_sdpa(export_sdpa(pr)))
        if status != "optimal" or not res.ok:
            check(f"{name} solved", False, status)
        worst = max(worst, abs(res.value - value))
        floor = min(floor, min(np.linalg.eigvalsh(B)[0] for B in res.blocks))
    check("cross-solver<=1e-6 (5)", worst <= 1e-6, f"{worst:.1e}")
    check("PSD floor>=-1e-7", floor >= -1e-7, f"{floor:.1e}")
    check.runtime(300)
    check.done()


@pytest.mark.criterion(12, "local model certifies nothing")
def test_criterion_12_local_zero(check):
    res = cert.figure_scan(2, ("a", "b", "c", "h"), grid=[0.6])
    for s in "abch":
        r = float(res.rates(s)[0])
        check(f"{s}<=1e-6", r <= 1e-6, f"{r:.1e}")
    b = cert.ModelConfig("one_pair", "eta", {"nu": 1.0}).behaviors(0.6)[0]
    r = cert.randomness_rate(b, strategy_b(b.scenario, ALICE)).rate
    check("alice mode<=1e-6", r <= 1e-6, f"{r:.1e}")
    check.runtime(60)
    check.done()
