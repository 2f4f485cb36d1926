"""Two memory-based sources whose post-selected statistics look i.i.d.

Both sources leak their outcomes to an adversary through the pattern of kept
and discarded runs, while their long-run frequency tables are ordinary
quantum behaviors that an i.i.d. certifier accepts.

* Example 1: a singlet box followed by ``2a + b`` forced double
  no-detections; the frequencies equal the singlet mixed with vacuum at
  weight 2/5.
* Example 2: three boxes ``P1, P2, P3`` chosen with probabilities
  ``q1, q2, q3``; after a ``P3`` run the next run reveals Alice's outcome
  through whether she outputs ``∅``.

Simulations always use the generation inputs ``x = y = 0``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats

from . import kernels
from .behaviors import CHSH_3x2, Behavior, CollinsGisinTable, Scenario, from_collins_gisin
from .kernels import NO_CLICK
from .photonics import singlet_with_vacuum

# the generation-input slice of each scenario, as its own one-input scenario
SLICE_3x3 = Scenario(1, 1)
SLICE_3x2 = Scenario(1, 1, bob_outcomes=("0", "1"), bob_no_detection=None)

EXAMPLE1_NU = 0.4


class DecodeError(ValueError):
    """A flag sequence that no example-1 source can have produced."""


class RunRecord(NamedTuple):
    index: int
    alice_outcome: int
    bob_outcome: int
    valid: bool
    box: int
    lam: int
    mu: int


@dataclass
class Records:
    """Columnar run records.

    ``a`` and ``b`` use the outcome codes 0, 1 and 2 (= ``∅``).  The hidden
    columns describe the source's internal state: ``box`` (example 1: 1 for
    a measurement run, 0 for a forced blank; example 2: 0-2 for ``P1..P3``,
    3 + λ for a follow-up run) and the shared variables ``lam``/``mu``
    (-1 where unused).
    """
    a: np.ndarray
    b: np.ndarray
    valid: np.ndarray
    box: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    example: int
    seed: int | None = None

    def __len__(self):
        return len(self.a)

    def __getitem__(self, i) -> RunRecord:
        return RunRecord(int(i), int(self.a[i]), int(self.b[i]), bool(self.valid[i]),
                         int(self.box[i]), int(self.lam[i]), int(self.mu[i]))

    def to_csv(self, reveal: bool = False) -> str:
        """CSV text; hidden-state columns only with ``reveal``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        labels = ("0", "1", "∅")
        header = ["index", "a", "b", "valid"]
        if reveal:
            header += ["box", "lambda", "mu"]
        w.writerow(header)
        for i in range(len(self)):
            row = [i, labels[self.a[i]], labels[self.b[i]], int(self.valid[i])]
            if reveal:
                row += [int(self.box[i]), int(self.lam[i]), int(self.mu[i])]
            w.writerow(row)
        return buf.getvalue()


def _counts_behavior(scenario: Scenario, a, b) -> Behavior:
    counts = np.zeros((scenario.n_a, scenario.n_b))
    np.add.at(counts, (a.astype(np.intp), b.astype(np.intp)), 1.0)
    return Behavior(scenario, (counts / counts.sum())[None, None])


# ---------------------------------------------------------------------------
# Example 1
# ---------------------------------------------------------------------------

_PAIRS_A = np.array([0, 0, 1, 1], np.int64)
_PAIRS_B = np.array([0, 1, 0, 1], np.int64)


def _singlet_cdf():
    p = singlet_with_vacuum(1.0).table[0, 0, :2, :2].ravel()
    return np.cumsum(p / p.sum())


def example1_simulate(n: int, seed: int | None = 0) -> Records:
    """``n`` runs: singlet measurements, each followed by ``2a + b`` blanks."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = np.random.default_rng(seed).random(n)
    a, b, meas, _ = kernels.example1_kernel(n, u, _singlet_cdf(), _PAIRS_A, _PAIRS_B)
    a = np.asarray(a, np.int8)
    b = np.asarray(b, np.int8)
    none = np.full(n, -1, np.int8)
    valid = ~((a == NO_CLICK) & (b == NO_CLICK))
    return Records(a, b, valid, np.asarray(meas, np.int8), none, none.copy(), 1, seed)


def example1_frequencies(records: Records) -> Behavior:
    """Empirical ``p(ab|00)`` as a one-input behavior over ``0, 1, ∅``."""
    if len(records) == 0:
        raise ValueError("no records")
    return _counts_behavior(SLICE_3x3, records.a, records.b)


def example1_decode(flags) -> np.ndarray:
    """Outcome guesses ``(a, b)`` for each kept run followed by a kept run.

    The number ``k`` of discarded runs after a kept run encodes its outcome
    as ``(k // 2, k % 2)``.  The last kept run is dropped because its gap
    may be cut short by the end of the sequence.
    """
    flags = np.asarray(flags, bool)
    idx = np.flatnonzero(flags)
    if idx.size == 0:
        return np.zeros((0, 2), np.int64)
    if idx[0] != 0:
        raise DecodeError("sequence starts with a discarded run")
    gaps = np.diff(idx) - 1
    tail = len(flags) - 1 - idx[-1]
    if gaps.size and gaps.max() > 3 or tail > 3:
        raise DecodeError("more than three consecutive discarded runs")
    return np.column_stack((gaps // 2, gaps % 2))


def example1_accuracy(records: Records) -> float:
    """Fraction of decoded measurement runs whose outcome is recovered."""
    guesses = example1_decode(records.valid)
    kept = np.flatnonzero(records.valid)[:len(guesses)]
    if len(kept) == 0:
        return float("nan")
    truth = np.column_stack((records.a[kept], records.b[kept]))
    return float(np.all(guesses == truth, axis=1).mean())


# ---------------------------------------------------------------------------
# Example 2
# ---------------------------------------------------------------------------

def _cg(rows):
    return CollinsGisinTable.from_matrix(CHSH_3x2, np.array(rows, float))


_P1 = [[1, .4453, .3121], [.6570, .1708, .0394], [0, 0, 0], [.3244, .0247, .2843], [.4942, .4195, .0277]]
_P2 = [[1, .8544, .7373], [0, 0, 0], [.8919, .8381, .7209], [.2619, .1165, .2617], [.4973, .4972, .2354]]
_P3 = [[1, .6042, .5429], [.3979, .0886, .0365], [.6021, .5156, .5064], [.4588, .1078, .4267],
       [.5412, .4964, .1162]]
_Q0 = [[1, .6663, .2038], [1, .6663, .2038], [0, 0, 0], [.2936, .1393, .1112], [.7064, .5270, .0926]]
_Q1 = [[1, .9996, .0015], [0, 0, 0], [1, .9996, .0015], [.0010, .0006, .0004], [.9990, .9990, .0011]]

# the published tables carry four decimals, so reconstruction is checked at that precision
TABLE_TOL = 1e-4


def bob_only(table: CollinsGisinTable) -> CollinsGisinTable:
    """Alice always outputs ``∅`` while Bob keeps his marginals."""
    sc = table.scenario
    return CollinsGisinTable(sc, np.zeros_like(table.alice), table.bob, np.zeros_like(table.joint))


@dataclass(frozen=True)
class Example2Params:
    q1: float = 0.4097
    q2: float = 0.4992
    q3: float = 0.0911
    p_lambda0: float = 0.0013
    boxes: tuple = field(default_factory=lambda: tuple(_cg(t) for t in (_P1, _P2, _P3)))
    follow_ups: tuple = field(default_factory=lambda: tuple(_cg(t) for t in (_Q0, _Q1)))

    def __post_init__(self):
        q = np.array([self.q1, self.q2, self.q3])
        if q.min() < 0 or abs(q.sum() - 1) > 1e-9:
            raise ValueError(f"selection frequencies must be a distribution, got {q}")
        if not 0 <= self.p_lambda0 <= 1:
            raise ValueError("p_lambda0 must lie in [0, 1]")
        if len(self.boxes) != 3 or len(self.follow_ups) != 2:
            raise ValueError("need three boxes and two follow-up boxes")
        for t in self.boxes + self.follow_ups:
            from_collins_gisin(t, TABLE_TOL)

    def behaviors(self):
        """``(P1, P2, P3), (P'0, P'1)`` as behaviors, clipped at zero."""
        conv = lambda t: from_collins_gisin(t, TABLE_TOL).cleaned()
        return tuple(map(conv, self.boxes)), tuple(map(conv, self.follow_ups))


def example2_expected_frequencies(params: Example2Params | None = None) -> Behavior:
    """Asymptotic frequency table of the example-2 source.

    Per selection cycle the source emits one box run plus, with probability
    ``q3``, one follow-up run that is an even mix of ``P'_λ`` and its
    Bob-only version.
    """
    params = params or Example2Params()
    q = (params.q1, params.q2, params.q3)
    lam = (params.p_lambda0, 1 - params.p_lambda0)
    m = sum(qj * t.to_matrix() for qj, t in zip(q, params.boxes))
    for pl, t in zip(lam, params.follow_ups):
        m = m + params.q3 * pl * (t.to_matrix() + bob_only(t).to_matrix()) / 2
    m = m / (params.q1 + params.q2 + 2 * params.q3)
    return from_collins_gisin(CollinsGisinTable.from_matrix(CHSH_3x2, m), TABLE_TOL)


def _slice_cdf(beh: Behavior):
    p = np.clip(beh.table[0, 0].ravel(), 0, None)
    return np.cumsum(p / p.sum())


def example2_simulate(params: Example2Params | None = None, n: int = 1000, seed: int | None = 0) -> Records:
    """``n`` runs of the example-2 source at inputs ``(0, 0)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    params = params or Example2Params()
    boxes, fols = params.behaviors()
    sel = np.cumsum([params.q1, params.q2, params.q3])
    box_cdf = np.array([_slice_cdf(b) for b in boxes + fols])
    bob_cdf = np.array([np.cumsum(f.bob_marginal()[0] / f.bob_marginal()[0].sum()) for f in fols])
    nb = CHSH_3x2.n_b
    box_a = np.arange(CHSH_3x2.n_a * nb, dtype=np.int64) // nb
    box_b = np.arange(CHSH_3x2.n_a * nb, dtype=np.int64) % nb
    rng = np.random.default_rng(seed)
    u_sel, u_out, u_lam, u_mu, u_fol = (rng.random(n) for _ in range(5))
    a, b, box, lam, mu, _, _ = kernels.example2_kernel(
        n, u_sel, u_out, u_lam, u_mu, u_fol, sel, box_cdf, box_a, box_b, bob_cdf, params.p_lambda0)
    a = np.asarray(a, np.int8)
    return Records(a, np.asarray(b, np.int8), a != NO_CLICK, np.asarray(box, np.int8),
                   np.asarray(lam, np.int8), np.asarray(mu, np.int8), 2, seed)


def example2_frequencies(records: Records) -> Behavior:
    """Empirical ``p(ab|00)`` as a one-input behavior (Alice ``0, 1, ∅``; Bob ``0, 1``)."""
    if len(records) == 0:
        raise ValueError("no records")
    return _counts_behavior(SLICE_3x2, records.a, records.b)


def example2_adversary_decode(records: Records) -> np.ndarray:
    """Adversary's guess of Alice's outcome on every kept run (-1 elsewhere).

    The adversary knows which box produced each run and the shared
    variables; it sees only keep/discard flags of the outputs.  ``P1`` never
    gives ``a = 1`` and ``P2`` never ``a = 0``.  After a ``P3`` run Alice
    goes silent exactly when her outcome differs from ``μ``.  A follow-up
    box ``P'_λ`` always answers ``a = λ``.
    """
    box = records.box.astype(np.int64)
    valid = records.valid
    g = np.full(len(records), -1, np.int64)
    g[box == 0] = 0
    g[box == 1] = 1
    g[box >= 3] = box[box >= 3] - 3
    p3 = np.flatnonzero(box[:-1] == 2)
    nxt = p3 + 1
    mu = records.mu[nxt].astype(np.int64)
    g[p3] = np.where(valid[nxt], mu, 1 - mu)
    # a P3 run cut off by the end of the record: best fixed guess
    if len(box) and box[-1] == 2:
        g[-1] = 1
    g[~valid] = -1
    return g


def example2_accuracy(records: Records) -> float:
    g = example2_adversary_decode(records)
    kept = records.valid
    if not kept.any():
        return float("nan")
    return float((g[kept] == records.a[kept]).mean())


# ---------------------------------------------------------------------------
# camouflage test
# ---------------------------------------------------------------------------

@dataclass
class ChiSquare:
    statistic: float
    dof: int
    p_value: float


def camouflage_test(empirical: Behavior, n: int, expected) -> ChiSquare:
    """Pearson test of observed counts against the expected ``p(ab|00)``.

    ``expected`` is a behavior (its ``(0, 0)`` slice is used) or an array.
    Cells with zero expected probability must be empty, otherwise the
    p-value is 0.
    """
    exp = expected.table[0, 0] if isinstance(expected, Behavior) else np.asarray(expected)
    exp = np.clip(exp.ravel(), 0, None)
    exp = exp / exp.sum()
    obs = np.rint(empirical.table[0, 0].ravel() * n)
    live = exp > 1e-12
    if obs[~live].sum() > 0:
        return ChiSquare(float("inf"), int(live.sum()) - 1, 0.0)
    res = stats.chisquare(obs[live], exp[live] * obs.sum())
    return ChiSquare(float(res.statistic), int(live.sum()) - 1, float(res.pvalue))


def example1_reference() -> Behavior:
    """The i.i.d. behavior example 1 imitates, sliced at ``(0, 0)``."""
    t = singlet_with_vacuum(EXAMPLE1_NU).table[:1, :1]
    return Behavior(SLICE_3x3, t)


def example2_reference(params: Example2Params | None = None) -> Behavior:
    return Behavior(SLICE_3x2, example2_expected_frequencies(params).table[:1, :1])


__all__ = [
    "DecodeError", "RunRecord", "Records", "Example2Params", "ChiSquare", "bob_only",
    "example1_simulate", "example1_frequencies", "example1_decode", "example1_accuracy",
    "example2_simulate", "example2_frequencies", "example2_expected_frequencies",
    "example2_adversary_decode", "example2_accuracy", "camouflage_test",
    "example1_reference", "example2_reference",
]
