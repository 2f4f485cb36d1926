"""Explicit quantum realizations used as feasibility oracles.

A realization is a list of components ``(weight, psi, A, B)`` where ``A[x][a]``
and ``B[y][b]`` are projectors on real qubit spaces (including the ``∅``
outcome as the last index).  Each component contributes the exact moment
matrix ``Γ_ij = <psi| O_i^T O_j |psi>`` built from the relaxation's basis,
so assigning whole components to guess blocks yields a feasible point of the
guessing program whose objective is known in closed form.
"""
import math

import numpy as np

from postrand.behaviors import ALICE, CHSH_3x3, Behavior, alice_detected, strategy_b, strategy_c
from postrand.noniid import example2_expected_frequencies
from postrand.photonics import one_pair_behavior, singlet_with_vacuum


def _proj(angle):
    v = np.array([math.cos(angle), math.sin(angle)])
    return np.outer(v, v)


def detector(angles, lost):
    """Projectors per input: outcome 0, 1, ∅.  A lost party always answers ∅."""
    I2, Z = np.eye(2), np.zeros((2, 2))
    if lost:
        return [[Z, Z, I2] for _ in angles]
    return [[_proj(t), I2 - _proj(t), Z] for t in angles]


def table(comp):
    _, psi, A, B = comp
    t = np.zeros((len(A), len(B), 3, 3))
    for x, Ax in enumerate(A):
        for y, By in enumerate(B):
            for a in range(3):
                for b in range(3):
                    t[x, y, a, b] = psi @ np.kron(Ax[a], By[b]) @ psi
    return t


def lossy_realization(theta, alice_angles, bob_angles, eta_a, eta_b):
    """``cos θ|00> + sin θ|11>`` with independent per-run losses as shared randomness."""
    psi = np.array([math.cos(theta), 0.0, 0.0, math.sin(theta)])
    comps = []
    for la, wa in ((False, eta_a), (True, 1 - eta_a)):
        for lb, wb in ((False, eta_b), (True, 1 - eta_b)):
            if wa * wb > 0:
                comps.append((wa * wb, psi, detector(alice_angles, la), detector(bob_angles, lb)))
    return comps


def behavior_of(components):
    return Behavior(CHSH_3x3, sum(w * table(c) for c in components for w in [c[0]]))


def _word_op(word, ops):
    M = np.eye(2)
    for x, a in word:
        M = M @ ops[x][a]
    return M


def moment_matrix(template, comp):
    _, psi, A, B = comp
    vecs = np.array([np.kron(_word_op(sa, A), _word_op(sb, B)) @ psi for sa, sb in template.basis])
    return vecs @ vecs.T


def honest_point(problem, components, ps, x_bar, y_bar):
    """Feasible blocks assigning each component to its most likely guess, and the objective."""
    tpl = problem.template
    guesses = ps.guesses()
    Ys = [np.zeros((tpl.size, tpl.size)) for _ in guesses]
    value = 0.0
    for comp in components:
        w = comp[0]
        t = table(comp)[x_bar, y_bar]
        score = {g: 0.0 for g in guesses}
        for a, b in ps.valid:
            score[ps.target(a, b)] += t[a, b]
        g = max(guesses, key=lambda k: score[k])
        Ys[guesses.index(g)] += w * moment_matrix(tpl, comp)
        value += w * score[g]
    return Ys, value


def noisy(b, w=0.9):
    sc = b.scenario
    return Behavior(sc, w * b.table + (1 - w) / (sc.n_a * sc.n_b))


# strictly feasible instances (noise or loss) that interior-point solvers handle
# without face reduction; (behavior, post-selection factory)
CROSS_CHECK_CASES = {
    "combined-table": lambda: (example2_expected_frequencies(), alice_detected),
    "one-pair-c": lambda: (one_pair_behavior(math.pi / 4, 0.9), strategy_c),
    "noisy-singlet-c": lambda: (noisy(singlet_with_vacuum(1.0)), strategy_c),
    "noisy-one-pair-alice": lambda: (noisy(one_pair_behavior(0.5, 0.9)), alice_detected),
    "noisy-singlet-b-alice": lambda: (noisy(singlet_with_vacuum(0.5), 0.95),
                                      lambda sc: strategy_b(sc, ALICE)),
}
