"""Semidefinite relaxation of the post-selected guessing program.

The adversary splits the observed behavior into one subnormalized quantum
behavior per guess symbol.  Each piece is relaxed to a moment matrix indexed
by the local level-1 basis ``S_A x S_B`` with ``S_P = {1} ∪ {single
projectors of party P}`` (Collins-Gisin kept outcomes only).  Real symmetric
matrices suffice: the objective and all constraints are real.

Equality constraints come in two kinds:

* moment identifications inside a block (cells with the same canonical
  operator product are equal, orthogonal products vanish);
* decomposition rows: for every Collins-Gisin coordinate of the behavior the
  sum over blocks equals the observed value.  Rows for entries with a
  dropped outcome (``∅``) are linear combinations of these; whether the
  behavior itself satisfies them is checked once at build time and stored as
  ``SdpProblem.consistency_residual`` so the system handed to solvers keeps
  full row rank.

Block variables ``Y_k`` and constraints ``<F_i, Y> = c_i`` follow the
dual-form convention of the SDPA format, see :mod:`postrand.sdpa`.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .behaviors import (ALICE, PAIR, Behavior, PostSelection, Scenario, StructureError,
                        cg_residual, to_collins_gisin, valid_probability)

ALICE_PARTY = "A"
BOB_PARTY = "B"


# ---------------------------------------------------------------------------
# projector words and moment keys
# ---------------------------------------------------------------------------

def reduce_word(letters):
    """Canonical form of a product of one party's projectors.

    A letter is ``(input, outcome)``.  Adjacent letters sharing an input
    collapse (same outcome) or annihilate the word (different outcomes, the
    return value is then ``None``).
    """
    out = []
    for letter in letters:
        letter = (int(letter[0]), int(letter[1]))
        if out and out[-1][0] == letter[0]:
            if out[-1][1] != letter[1]:
                return None
            continue
        out.append(letter)
    return tuple(out)


@dataclass(frozen=True)
class ProjectorWord:
    party: str
    letters: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple((int(x), int(a)) for x, a in self.letters))

    def canonical(self):
        w = reduce_word(self.letters)
        return None if w is None else ProjectorWord(self.party, w)

    def adjoint(self):
        return ProjectorWord(self.party, self.letters[::-1])

    def __str__(self):
        if not self.letters:
            return "1"
        return "".join(f"{self.party}{a}|{x}" for x, a in self.letters)


def canonical_moment(alice_word, bob_word):
    """Key of the real moment <alice_word ⊗ bob_word>, or ``None`` if it vanishes.

    Words may be :class:`ProjectorWord` or plain letter tuples.  A product
    and its adjoint (both words reversed) share one key.
    """
    aw = alice_word.letters if isinstance(alice_word, ProjectorWord) else alice_word
    bw = bob_word.letters if isinstance(bob_word, ProjectorWord) else bob_word
    aw, bw = reduce_word(aw), reduce_word(bw)
    if aw is None or bw is None:
        return None
    return min((aw, bw), (aw[::-1], bw[::-1]))


def _party_words(n_inputs, n_outcomes, level):
    kept = [(x, a) for x in range(n_inputs) for a in range(n_outcomes - 1)]
    words = [()]
    frontier = [()]
    for _ in range(level):
        nxt = []
        for w in frontier:
            for letter in kept:
                if w and w[-1][0] == letter[0]:
                    continue
                nxt.append(w + (letter,))
        words.extend(nxt)
        frontier = nxt
    return words


def local_level1_basis(scenario: Scenario, level=1):
    """Monomial basis ``S_A x S_B`` (Alice index outer).

    ``level`` is the maximal word length per party, an int or an
    ``(alice, bob)`` pair; level 1 gives ``|S_P| = 1 + sum_x (|outcomes| - 1)``.
    """
    la, lb = (level, level) if isinstance(level, int) else level
    SA = _party_words(scenario.alice_inputs, scenario.n_a, la)
    SB = _party_words(scenario.bob_inputs, scenario.n_b, lb)
    return [(sa, sb) for sa in SA for sb in SB]


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockTemplate:
    """Cell-to-moment map shared by every block of one problem."""
    basis: list
    keys: list  # keys[i][j]; None for vanishing products
    representative: dict  # key -> (i, j), first upper-triangular cell holding it

    @property
    def size(self):
        return len(self.basis)

    @classmethod
    def build(cls, scenario: Scenario, level=1):
        basis = local_level1_basis(scenario, level)
        n = len(basis)
        keys = [[None] * n for _ in range(n)]
        rep = {}
        for i, (ai, bi) in enumerate(basis):
            for j, (aj, bj) in enumerate(basis):
                k = canonical_moment(ai[::-1] + aj, bi[::-1] + bj)
                keys[i][j] = k
                if j >= i and k is not None and k not in rep:
                    rep[k] = (i, j)
        return cls(basis, keys, rep)

    def cell(self, key):
        return self.representative[key]


@dataclass(frozen=True, eq=False)
class MomentBlock:
    label: object
    template: BlockTemplate

    @property
    def size(self):
        return self.template.size


@dataclass
class SolverConfig:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iters: int = 500
    dual_bound: bool = True
    solver: str = "CLARABEL"
    face_reduction: bool = True
    # largest data component a numerically found face may drop
    face_tol: float = 1e-6

    def __post_init__(self):
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(eq=False)
class SdpProblem:
    """``maximize <C, Y>  s.t.  <F_i, Y> = c_i,  Y = diag(Y_1..Y_K) ⪰ 0``.

    Linear functionals are stored sparsely over upper-triangular cells:
    ``Σ coef * Y[blk][i, j]`` with ``i <= j``.
    """
    blocks: list
    con_row: np.ndarray
    con_blk: np.ndarray
    con_i: np.ndarray
    con_j: np.ndarray
    con_val: np.ndarray
    rhs: np.ndarray
    obj_blk: np.ndarray
    obj_i: np.ndarray
    obj_j: np.ndarray
    obj_val: np.ndarray
    metadata: dict = field(default_factory=dict)
    consistency_residual: float = 0.0
    cg_keys: list = field(default_factory=list)
    cg_values: np.ndarray | None = None

    @property
    def template(self) -> BlockTemplate:
        return self.blocks[0].template

    @property
    def n_constraints(self):
        return int(self.rhs.shape[0])

    @property
    def block_sizes(self):
        return [b.size for b in self.blocks]

    def _flat_index(self, blk, i, j):
        sizes = np.array(self.block_sizes)
        offs = np.concatenate(([0], np.cumsum(sizes ** 2)))[:-1]
        # column-major within a block
        return offs[blk] + j * sizes[blk] + i

    def constraint_matrix(self) -> sp.csr_matrix:
        """Equality constraints as a sparse matrix over stacked column-major ``vec(Y_k)``."""
        total = sum(n * n for n in self.block_sizes)
        cols = self._flat_index(self.con_blk, self.con_i, self.con_j)
        return sp.csr_matrix((self.con_val, (self.con_row, cols)),
                             shape=(self.n_constraints, total))

    def objective_vector(self) -> np.ndarray:
        total = sum(n * n for n in self.block_sizes)
        c = np.zeros(total)
        np.add.at(c, self._flat_index(self.obj_blk, self.obj_i, self.obj_j), self.obj_val)
        return c

    def symmetric_matrices(self, weights=None):
        """``Σ_i w_i F_i`` (or the objective matrix ``C`` when ``weights`` is None)
        as a list of dense symmetric blocks."""
        out = [np.zeros((n, n)) for n in self.block_sizes]
        if weights is None:
            blk, ii, jj, val = self.obj_blk, self.obj_i, self.obj_j, self.obj_val
        else:
            blk, ii, jj = self.con_blk, self.con_i, self.con_j
            val = self.con_val * np.asarray(weights)[self.con_row]
        for b, i, j, v in zip(blk, ii, jj, val):
            if i == j:
                out[b][i, i] += v
            else:
                out[b][i, j] += v / 2
                out[b][j, i] += v / 2
        return out

    def objective_value(self, Ys) -> float:
        return float(sum(v * Ys[b][i, j] for b, i, j, v in
                         zip(self.obj_blk, self.obj_i, self.obj_j, self.obj_val)))

    def constraint_residual(self, Ys) -> np.ndarray:
        lhs = np.zeros(self.n_constraints)
        vals = np.array([Ys[b][i, j] for b, i, j in zip(self.con_blk, self.con_i, self.con_j)])
        np.add.at(lhs, self.con_row, self.con_val * vals)
        return lhs - self.rhs

    def scaled(self, factor: float) -> "SdpProblem":
        """Same feasible set, objective multiplied by ``factor``."""
        return SdpProblem(self.blocks, self.con_row, self.con_blk, self.con_i, self.con_j,
                          self.con_val, self.rhs, self.obj_blk, self.obj_i, self.obj_j,
                          self.obj_val * factor, dict(self.metadata), self.consistency_residual,
                          self.cg_keys, self.cg_values)

    def to_dict(self):
        return {
            "metadata": self.metadata,
            "block_sizes": self.block_sizes,
            "block_labels": [str(b.label) for b in self.blocks],
            "constraints": {
                "row": self.con_row.tolist(), "block": self.con_blk.tolist(),
                "i": self.con_i.tolist(), "j": self.con_j.tolist(),
                "value": self.con_val.tolist(), "rhs": self.rhs.tolist(),
            },
            "objective": {
                "block": self.obj_blk.tolist(), "i": self.obj_i.tolist(),
                "j": self.obj_j.tolist(), "value": self.obj_val.tolist(),
            },
            "consistency_residual": self.consistency_residual,
        }

    def dump_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# ---------------------------------------------------------------------------
# compiling the guessing program
# ---------------------------------------------------------------------------

def _party_expansion(x, a, n_outcomes):
    """Projector of outcome ``a`` at input ``x`` as {word: coef} over kept outcomes."""
    if a < n_outcomes - 1:
        return {((x, a),): 1.0}
    d = {(): 1.0}
    for k in range(n_outcomes - 1):
        d[((x, k),)] = -1.0
    return d


def entry_functional(scenario: Scenario, a, b, x, y):
    """p(ab|xy) as {moment key: coefficient} in Collins-Gisin coordinates."""
    out = {}
    for aw, ca in _party_expansion(x, a, scenario.n_a).items():
        for bw, cb in _party_expansion(y, b, scenario.n_b).items():
            k = canonical_moment(aw, bw)
            out[k] = out.get(k, 0.0) + ca * cb
    return out


def _cg_coordinates(behavior: Behavior):
    """Collins-Gisin coordinates of a behavior as {moment key: value}."""
    sc = behavior.scenario
    cg = to_collins_gisin(behavior)
    coords = {canonical_moment((), ()): 1.0}
    for x in range(sc.alice_inputs):
        for a in range(sc.n_a - 1):
            coords[canonical_moment(((x, a),), ())] = float(cg.alice[x, a])
    for y in range(sc.bob_inputs):
        for b in range(sc.n_b - 1):
            coords[canonical_moment((), ((y, b),))] = float(cg.bob[y, b])
    for x in range(sc.alice_inputs):
        for y in range(sc.bob_inputs):
            for a in range(sc.n_a - 1):
                for b in range(sc.n_b - 1):
                    coords[canonical_moment(((x, a),), ((y, b),))] = float(cg.joint[x, y, a, b])
    return coords


def build_guessing_sdp(behavior: Behavior, ps: PostSelection, x_bar: int = 0, y_bar: int = 0,
                       level=1, clean_tol: float | None = None) -> SdpProblem:
    """Relaxation of the adversary's guessing program for inputs (x_bar, y_bar).

    One moment-matrix block per guess symbol: each valid pair in ``pair``
    mode, each valid Alice outcome in ``alice`` mode.  The objective sums,
    over blocks, the probability that the block's guess is right.
    """
    sc = behavior.scenario
    if not ps.valid:
        raise StructureError("empty valid set")
    for a, b in ps.valid:
        if not (0 <= a < sc.n_a and 0 <= b < sc.n_b):
            raise StructureError(f"valid pair {(a, b)} outside the outcome alphabet")
    if not (0 <= x_bar < sc.alice_inputs and 0 <= y_bar < sc.bob_inputs):
        raise StructureError("generation inputs outside the scenario")
    tol = behavior.tolerance if clean_tol is None else clean_tol
    raw_min = float(behavior.table.min())
    if raw_min < 0 and raw_min >= -tol:
        behavior = behavior.cleaned()
    residual = cg_residual(behavior)

    tpl = BlockTemplate.build(sc, level)
    guesses = ps.guesses()
    blocks = [MomentBlock(g, tpl) for g in guesses]
    n = tpl.size

    rows, blk, ci, cj, cv, rhs = [], [], [], [], [], []
    r = 0
    # moment identifications
    for k in range(len(blocks)):
        for i in range(n):
            for j in range(i, n):
                key = tpl.keys[i][j]
                if key is None:
                    rows.append(r); blk.append(k); ci.append(i); cj.append(j); cv.append(1.0)
                    rhs.append(0.0)
                    r += 1
                    continue
                ri, rj = tpl.representative[key]
                if (ri, rj) == (i, j):
                    continue
                rows += [r, r]; blk += [k, k]; ci += [i, ri]; cj += [j, rj]; cv += [1.0, -1.0]
                rhs.append(0.0)
                r += 1
    # decomposition rows
    coords = _cg_coordinates(behavior)
    for key, value in coords.items():
        i, j = tpl.representative[key]
        for k in range(len(blocks)):
            rows.append(r); blk.append(k); ci.append(i); cj.append(j); cv.append(1.0)
        rhs.append(value)
        r += 1

    # objective
    acc = {}
    for k, g in enumerate(guesses):
        for a, b in sorted(ps.valid):
            if ps.target(a, b) != g:
                continue
            for key, c in entry_functional(sc, a, b, x_bar, y_bar).items():
                if key is None:
                    continue
                cell = (k,) + tpl.representative[key]
                acc[cell] = acc.get(cell, 0.0) + c
    cells = sorted(c for c, v in acc.items() if v != 0.0)
    obj = np.array([acc[c] for c in cells], dtype=float)
    ob = np.array([c[0] for c in cells], dtype=np.int64)
    oi = np.array([c[1] for c in cells], dtype=np.int64)
    oj = np.array([c[2] for c in cells], dtype=np.int64)

    meta = {
        "scenario": sc.to_dict(),
        "valid_set": sorted([list(v) for v in ps.valid]),
        "mode": ps.mode,
        "strategy": ps.label,
        "x_bar": x_bar,
        "y_bar": y_bar,
        "level": level,
        "p_valid": valid_probability(behavior, ps, x_bar, y_bar),
    }
    return SdpProblem(blocks, np.array(rows, np.int64), np.array(blk, np.int64),
                      np.array(ci, np.int64), np.array(cj, np.int64), np.array(cv, float),
                      np.array(rhs, float), ob, oi, oj, obj, meta, residual,
                      list(coords), np.array(list(coords.values())))


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

OPTIMAL = "optimal"
NEAR_OPTIMAL = "near-optimal"
FAILED = "failed"


@dataclass
class SolveResult:
    value: float
    status: str
    diagnostics: dict
    blocks: list | None = None

    @property
    def ok(self):
        return self.status in (OPTIMAL, NEAR_OPTIMAL)


@lru_cache(maxsize=16)
def _moment_map(template: BlockTemplate):
    """Dense ``(n², #keys)`` 0/1 matrix sending moments to column-major ``vec(Y)``."""
    n = template.size
    keys = list(template.representative)
    kid = {k: i for i, k in enumerate(keys)}
    E = np.zeros((n * n, len(keys)))
    for i in range(n):
        for j in range(n):
            k = template.keys[i][j]
            if k is not None:
                E[j * n + i, kid[k]] = 1.0
    return E, kid


def _key_vector(problem: SdpProblem, kid, blk=None):
    """Objective (``blk`` given) or right-hand side as a vector over moment keys."""
    tpl = problem.template
    out = np.zeros(len(kid))
    if blk is None:
        for key, v in zip(problem.cg_keys, problem.cg_values):
            out[kid[key]] = v
        return out
    sel = problem.obj_blk == blk
    for i, j, v in zip(problem.obj_i[sel], problem.obj_j[sel], problem.obj_val[sel]):
        out[kid[tpl.keys[i][j]]] += v
    return out


@dataclass(frozen=True, eq=False)
class Face:
    """Subspace holding the range of every feasible moment matrix.

    ``exposing`` is a PSD matrix orthogonal to all of them: its pairing with
    a moment matrix depends only on the Collins-Gisin coordinates, and
    evaluates to ``residual`` (numerically zero) on the observed behavior.
    """
    basis: np.ndarray
    exposing: np.ndarray
    residual: float

    @property
    def dim(self):
        return self.basis.shape[1]


def exposed_face(problem: SdpProblem, tol: float = 1e-9, rank_tol: float = 1e-5) -> Face | None:
    """Detect moment matrices forced to be singular by the observed behavior.

    Exact zeros in the behavior and self-testing points (a Tsirelson-type
    bound reached) leave the relaxation without strictly feasible points,
    which stalls interior-point solvers.  Minimizing ``<W, Ŷ>`` over unit
    trace PSD ``W`` whose pairing is fixed by the behavior finds such a
    direction; an interior-point solution is close to maximal rank, so one
    pass exposes the smallest face.
    """
    import cvxpy as cp

    E, kid = _moment_map(problem.template)
    n = problem.template.size
    cg = np.array([kid[k] for k in problem.cg_keys])
    free = np.setdiff1d(np.arange(len(kid)), cg)
    W = cp.Variable((n, n), PSD=True)
    agg = E.T @ cp.vec(W, order="F")
    aux = cp.Problem(cp.Minimize(problem.cg_values @ agg[cg]),
                     [agg[free] == 0, cp.trace(W) == 1])
    try:
        aux.solve(solver="CLARABEL", tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    except cp.error.SolverError:
        return None
    if aux.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or aux.value > tol:
        return None
    Wv = (W.value + W.value.T) / 2
    lam, U = np.linalg.eigh(Wv)
    rank = int((lam > rank_tol * lam[-1]).sum())
    if rank == 0:
        return None
    return Face(U[:, : n - rank], Wv, float(aux.value))


def _sym_basis(r):
    """Orthonormal basis of symmetric r x r matrices, as column-major vecs."""
    cols = []
    for j in range(r):
        for i in range(j + 1):
            v = np.zeros((r, r))
            if i == j:
                v[i, i] = 1.0
            else:
                v[i, j] = v[j, i] = np.sqrt(0.5)
            cols.append(v.reshape(-1, order="F"))
    return np.array(cols).T


def _clarabel_kw(config: SolverConfig):
    if config.solver == "CLARABEL":
        return dict(tol_gap_abs=config.gap_tol * 1e-2, tol_gap_rel=config.gap_tol * 1e-2,
                    tol_feas=config.feas_tol * 1e-2, max_iter=config.max_iters)
    if config.solver == "CVXOPT":
        return dict(abstol=config.gap_tol * 1e-2, reltol=config.gap_tol * 1e-2,
                    feastol=config.feas_tol * 1e-2, max_iters=config.max_iters)
    return {}


def certified_upper_bound(problem: SdpProblem, y: np.ndarray):
    """Upper bound on the maximum from equality multipliers ``y``.

    With ``S = Σ y_i F_i - C`` the weak-duality identity gives
    ``<C, Y> = c·y - <S, Y> <= c·y + max(0, -λ_min(S)) tr(Y)`` and every
    feasible ``Y`` has ``tr(Y) <= max block size`` (diagonal moments are
    bounded by the block weight and the weights sum to one).
    """
    S = problem.symmetric_matrices(y)
    C = problem.symmetric_matrices(None)
    lam = min(float(np.linalg.eigvalsh(s - c)[0]) for s, c in zip(S, C))
    trace_bound = max(problem.block_sizes)
    return float(problem.rhs @ y) + max(0.0, -lam) * trace_bound, lam


def _solve_full(problem, config, diag):
    import cvxpy as cp

    Ys = [cp.Variable((n, n), PSD=True) for n in problem.block_sizes]
    x = cp.hstack([cp.vec(Y, order="F") for Y in Ys])
    eq = problem.constraint_matrix() @ x == problem.rhs
    prob = cp.Problem(cp.Maximize(problem.objective_vector() @ x), [eq])
    prob.solve(solver=config.solver, **_clarabel_kw(config))
    diag["solver_status"] = prob.status
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or prob.value is None:
        return None
    blocks = [np.asarray(Y.value) for Y in Ys]
    diag["primal_residual"] = float(np.abs(problem.constraint_residual(blocks)).max())
    bound, lam = certified_upper_bound(problem, np.asarray(eq.dual_value, dtype=float))
    diag["min_dual_slack_eig"] = lam
    return float(prob.value), bound, blocks


def _solve_on_face(problem, face, config, diag, rank_tol=1e-5):
    """Solve with every block written as ``V Z_k V^T`` for the face basis ``V``.

    The bound returned is rigorous for the face-restricted program; it
    equals the full optimum when the face is exact.
    """
    import cvxpy as cp

    E, kid = _moment_map(problem.template)
    n = problem.template.size
    V = face.basis
    r = V.shape[1]
    Sb = _sym_basis(r)
    G = np.kron(V, V) @ Sb
    counts = E.sum(axis=0)
    moments = (E.T @ G) / counts[:, None]
    _, sv, vt = np.linalg.svd(G - E @ moments, full_matrices=False)
    Q = vt[: int((sv > rank_tol * max(sv[0], 1.0)).sum())]
    proj = np.eye(Sb.shape[1]) - Q.T @ Q
    cg = np.array([kid[k] for k in problem.cg_keys])
    D = moments[cg] @ proj
    ud, sd, _ = np.linalg.svd(D, full_matrices=False)
    kd = int((sd > rank_tol * sd[0]).sum())
    D_r = ud[:, :kd].T @ D
    p_r = ud[:, :kd].T @ problem.cg_values
    diag["face_dim"] = r
    diag["face_residual"] = face.residual
    diag["face_consistency"] = float(np.linalg.norm(ud[:, kd:].T @ problem.cg_values))
    if diag["face_consistency"] > config.face_tol:
        # small but nonzero probabilities were mistaken for zeros
        return None
    costs = [moments.T @ _key_vector(problem, kid, k) for k in range(len(problem.blocks))]

    Zs = [cp.Variable((r, r), PSD=True) for _ in problem.blocks]
    zs = [Sb.T @ cp.vec(Z, order="F") for Z in Zs]
    ident = [Q @ z == 0 for z in zs] if len(Q) else []
    dec = D_r @ sum(zs) == p_r
    prob = cp.Problem(cp.Maximize(sum(c @ z for c, z in zip(costs, zs))), ident + [dec])
    prob.solve(solver=config.solver, **_clarabel_kw(config))
    diag["solver_status"] = prob.status
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or prob.value is None:
        return None
    lam_dec = np.asarray(dec.dual_value, dtype=float)
    lam_min = np.inf
    for k, c in enumerate(costs):
        s = D_r.T @ lam_dec - c
        if ident:
            s = s + Q.T @ np.asarray(ident[k].dual_value, dtype=float)
        S = (Sb @ s).reshape(r, r, order="F")
        lam_min = min(lam_min, float(np.linalg.eigvalsh(S)[0]))
    diag["min_dual_slack_eig"] = lam_min
    bound = float(p_r @ lam_dec) + max(0.0, -lam_min) * n
    blocks = [V @ np.asarray(Z.value) @ V.T for Z in Zs]
    return float(prob.value), bound, blocks


def solve(problem: SdpProblem, config: SolverConfig | None = None) -> SolveResult:
    """Solve the relaxation and return a certified upper bound on its maximum."""
    import cvxpy as cp

    config = config or SolverConfig()
    diag = {"solver": config.solver, "n_constraints": problem.n_constraints,
            "block_sizes": problem.block_sizes,
            "consistency_residual": problem.consistency_residual}
    if problem.consistency_residual > config.feas_tol:
        diag["reason"] = ("infeasible: behavior is not normalized/no-signaling, the "
                          f"decomposition rows are inconsistent (residual {problem.consistency_residual:.3g})")
        return SolveResult(float("nan"), FAILED, diag)
    if not problem.obj_val.size:
        diag["reason"] = "zero objective"
        return SolveResult(0.0, OPTIMAL, diag)

    t0 = time.perf_counter()
    face = exposed_face(problem) if config.face_reduction else None
    out = None
    try:
        if face is not None:
            try:
                out = _solve_on_face(problem, face, config, diag)
            except cp.error.SolverError:
                out = None
            diag["face_used"] = out is not None
        if out is None:
            out = _solve_full(problem, config, diag)
    except cp.error.SolverError as exc:
        diag["reason"] = f"solver error: {exc}"
        return SolveResult(float("nan"), FAILED, diag)
    diag["solve_time"] = time.perf_counter() - t0
    if out is None:
        diag["reason"] = f"solver status {diag['solver_status']}"
        return SolveResult(float("nan"), FAILED, diag)
    primal, bound, blocks = out
    diag["primal_value"] = primal
    diag["dual_bound"] = bound
    diag["min_primal_eig"] = min(float(np.linalg.eigvalsh((B + B.T) / 2)[0]) for B in blocks)
    value = bound if config.dual_bound else primal
    gap = bound - primal
    diag["gap"] = gap
    rel = abs(gap) / max(1.0, abs(bound))
    if rel <= config.gap_tol:
        status = OPTIMAL
    elif rel <= 1e3 * config.gap_tol:
        status = NEAR_OPTIMAL
    else:
        diag["reason"] = f"duality gap {gap:.3g} too large"
        status = FAILED
    return SolveResult(value, status, diag, blocks)


def export_sdpa(problem: SdpProblem) -> str:
    """Sparse SDPA (``.dat-s``) text of the problem."""
    from .sdpa import write_sdpa
    return write_sdpa(problem)
