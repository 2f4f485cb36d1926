"""Sparse SDPA (``.dat-s``) input files.

Convention: ``maximize <F0, Y>  s.t.  <F_i, Y> = c_i,  Y ⪰ 0`` with block
diagonal ``Y``.  An SDPA solver reads the same file as the primal ``minimize
c·x  s.t.  Σ x_i F_i - F0 ⪰ 0``; by strong duality both optima coincide.
Entry lines are ``matno blkno i j value`` with 1-based indices and ``i <= j``.

The reader and the CVXOPT-based solver here share no code with
:mod:`postrand.relaxation`; they serve as an independent check of it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _fmt(v):
    return repr(float(v))


def write_sdpa(problem) -> str:
    """Text of an :class:`~postrand.relaxation.SdpProblem` in sparse SDPA format."""
    lines = [
        f"* {problem.metadata.get('strategy', '')} mode={problem.metadata.get('mode', '')}",
        str(problem.n_constraints),
        str(len(problem.blocks)),
        " ".join(str(n) for n in problem.block_sizes),
        " ".join(_fmt(v) for v in problem.rhs),
    ]

    def entries(matno, blk, ii, jj, vals):
        acc = {}
        for b, i, j, v in zip(blk, ii, jj, vals):
            key = (int(b), int(i), int(j))
            # off-diagonal coefficient c on Y_ij means c/2 in each symmetric slot
            acc[key] = acc.get(key, 0.0) + (v if i == j else v / 2)
        for (b, i, j), v in sorted(acc.items()):
            if v != 0.0:
                lines.append(f"{matno} {b + 1} {i + 1} {j + 1} {_fmt(v)}")

    entries(0, problem.obj_blk, problem.obj_i, problem.obj_j, problem.obj_val)
    order = np.argsort(problem.con_row, kind="stable")
    rows = problem.con_row[order]
    bounds = np.searchsorted(rows, np.arange(problem.n_constraints + 1))
    for r in range(problem.n_constraints):
        s = order[bounds[r]:bounds[r + 1]]
        entries(r + 1, problem.con_blk[s], problem.con_i[s], problem.con_j[s], problem.con_val[s])
    return "\n".join(lines) + "\n"


@dataclass
class SdpaData:
    """Parsed SDPA problem; ``matrices[k]`` holds ``(block, i, j, value)`` rows of ``F_k``."""
    c: np.ndarray
    block_sizes: list
    matrices: list

    @property
    def m(self):
        return len(self.c)

    def dense(self, k):
        """Symmetric dense blocks of ``F_k``."""
        out = [np.zeros((abs(n), abs(n))) for n in self.block_sizes]
        for b, i, j, v in self.matrices[k]:
            out[b][i, j] = v
            out[b][j, i] = v
        return out


def parse_sdpa(text: str) -> SdpaData:
    """Read sparse SDPA text.  Comment lines start with ``*`` or ``"``."""
    tokens = []
    for line in text.splitlines():
        s = line.strip()
        if not s or s[0] in '*"':
            continue
        tokens.append(s.replace(",", " ").replace("{", " ").replace("}", " ")
                      .replace("(", " ").replace(")", " ").split())
    m = int(tokens[0][0])
    nb = int(tokens[1][0])
    sizes = [int(t) for t in tokens[2][:nb]]
    c = []
    pos = 3
    while len(c) < m:
        c.extend(float(t) for t in tokens[pos])
        pos += 1
    mats = [[] for _ in range(m + 1)]
    for t in tokens[pos:]:
        k, b, i, j = (int(v) for v in t[:4])
        v = float(t[4])
        if i > j:
            i, j = j, i
        mats[k].append((b - 1, i - 1, j - 1, v))
    return SdpaData(np.array(c[:m]), sizes, mats)


def solve_sdpa_cvxopt(data: SdpaData, tol: float = 1e-9, max_iters: int = 200):
    """Optimum of a parsed problem computed by CVXOPT's conic solver.

    Solves ``minimize c·x  s.t.  Σ x_i F_i - F0 ⪰ 0`` and returns
    ``(value, status)``.
    """
    from cvxopt import matrix, solvers, spmatrix

    m = data.m
    Gs, hs = [], []
    for b, n in enumerate(data.block_sizes):
        n = abs(n)
        vals, rows, cols = [], [], []
        for k in range(1, m + 1):
            for bb, i, j, v in data.matrices[k]:
                if bb != b:
                    continue
                # column-major vec of -F_k
                vals.append(-v); rows.append(i + j * n); cols.append(k - 1)
                if i != j:
                    vals.append(-v); rows.append(j + i * n); cols.append(k - 1)
        Gs.append(spmatrix(vals, rows, cols, (n * n, m)))
        h = np.zeros((n, n))
        for bb, i, j, v in data.matrices[0]:
            if bb == b:
                h[i, j] = h[j, i] = -v
        hs.append(matrix(h))
    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol,
            "maxiters": max_iters}
    try:
        sol = solvers.sdp(matrix(data.c), Gs=Gs, hs=hs, options=opts)
    except (ArithmeticError, ValueError):
        # degenerate (facial) problems can break the scaling update
        return float("nan"), "failed"
    return float(sol["primal objective"]), sol["status"]
