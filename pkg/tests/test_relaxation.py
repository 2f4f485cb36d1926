import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import behavior_of, honest_point, lossy_realization
from postrand.behaviors import (ALICE, CHSH_3x2, CHSH_3x3, Behavior, alice_detected, deterministic,
                                strategy_a, strategy_b, strategy_c)
from postrand.noniid import example2_expected_frequencies
from postrand.photonics import singlet_with_vacuum
from postrand.relaxation import (FAILED, OPTIMAL, BlockTemplate, ProjectorWord, SolverConfig,
                                 build_guessing_sdp, canonical_moment, local_level1_basis,
                                 reduce_word, solve)

SINGLET_G = (2 + math.sqrt(2)) / 8


def test_reduce_word():
    assert reduce_word([(0, 1), (0, 1), (1, 0)]) == ((0, 1), (1, 0))
    assert reduce_word([(0, 0), (0, 1)]) is None
    assert reduce_word([]) == ()


def test_canonical_moment():
    assert canonical_moment(((0, 0),), ((1, 0),)) == (((0, 0),), ((1, 0),))
    assert canonical_moment(((0, 0), (0, 1)), ()) is None
    # a product and its adjoint share a key
    k1 = canonical_moment(((0, 0), (1, 0)), ((0, 0), (1, 0)))
    k2 = canonical_moment(((1, 0), (0, 0)), ((1, 0), (0, 0)))
    assert k1 == k2
    w = ProjectorWord("A", [(0, 0), (0, 0)])
    assert w.canonical().letters == ((0, 0),)
    assert str(ProjectorWord("B")) == "1"


@pytest.mark.parametrize("scenario,level,size", [(CHSH_3x3, 1, 25), (CHSH_3x2, 1, 15),
                                                 (CHSH_3x3, (1, 2), 5 * 13)])
def test_basis_sizes(scenario, level, size):
    assert len(local_level1_basis(scenario, level)) == size


def test_two_outcome_basis_size():
    from postrand.behaviors import Scenario
    sc = Scenario(2, 2, ("0", "∅"), ("0", "∅"))
    assert len(local_level1_basis(sc)) == 9
    assert len(local_level1_basis(Scenario(1, 1, ("0", "∅"), ("0", "∅")))) == 4


def test_template_symmetric_keys():
    t = BlockTemplate.build(CHSH_3x3)
    n = t.size
    for i in range(n):
        for j in range(n):
            assert t.keys[i][j] == t.keys[j][i]
    assert t.keys[0][0] == ((), ())


@pytest.mark.parametrize("ps_factory,blocks", [(strategy_b, 8), (strategy_a, 9), (strategy_c, 4)])
def test_block_counts(ps_factory, blocks):
    b = singlet_with_vacuum(0.5)
    pr = build_guessing_sdp(b, ps_factory(b.scenario))
    assert len(pr.blocks) == blocks
    assert set(pr.block_sizes) == {25}


def test_combined_table_blocks():
    b = example2_expected_frequencies()
    pr = build_guessing_sdp(b, alice_detected(b.scenario))
    assert pr.block_sizes == [15, 15]
    assert pr.consistency_residual < 1e-4


def test_signaling_behavior_fails():
    t = singlet_with_vacuum(1.0).table.copy()
    t[0, 0, 0, 0] += 0.05
    t[0, 0, 1, 0] -= 0.05
    b = Behavior(CHSH_3x3, t)
    res = solve(build_guessing_sdp(b, strategy_b(b.scenario)))
    assert res.status == FAILED
    assert "consistency" in res.diagnostics["reason"] or "no-signaling" in res.diagnostics["reason"]


def test_deterministic_point_guessed_perfectly():
    b = deterministic(CHSH_3x3, [0, 1], [1, 0])
    res = solve(build_guessing_sdp(b, strategy_b(b.scenario)))
    assert res.ok and res.value == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("nu", [0.3, 1.0])
def test_singlet_analytic_value(nu):
    b = singlet_with_vacuum(nu)
    res = solve(build_guessing_sdp(b, strategy_b(b.scenario)))
    assert res.status == OPTIMAL
    assert res.value == pytest.approx(nu * SINGLET_G, abs=1e-6)


def test_higher_level_never_looser():
    comps = lossy_realization(0.5, (0.2, 1.1), (-0.3, 0.7), 0.9, 0.9)
    b = behavior_of(comps)
    ps = strategy_b(b.scenario)
    v1 = solve(build_guessing_sdp(b, ps, level=1)).value
    v2 = solve(build_guessing_sdp(b, ps, level=(1, 2))).value
    assert v2 <= v1 + 1e-7


def test_dual_bound_dominates_primal():
    b = behavior_of(lossy_realization(0.6, (0.0, 0.8), (0.4, -0.4), 0.85, 0.95))
    res = solve(build_guessing_sdp(b, strategy_b(b.scenario)))
    assert res.diagnostics["dual_bound"] >= res.diagnostics["primal_value"] - 1e-9


def test_face_reduction_is_exact_where_full_solve_is_loose():
    # the singlet-with-vacuum feasible set has no interior point
    b = singlet_with_vacuum(0.7)
    pr = build_guessing_sdp(b, strategy_b(b.scenario))
    face = solve(pr)
    full = solve(pr, SolverConfig(face_reduction=False))
    assert face.diagnostics["face_used"]
    assert face.value == pytest.approx(0.7 * SINGLET_G, abs=1e-7)
    # without the reduction the bound stays sound, only looser
    assert full.value >= 0.7 * SINGLET_G - 1e-7


_angle = st.floats(-1.5, 1.5)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.1, math.pi / 4), _angle, _angle, _angle, _angle, st.floats(0.7, 1.0),
       st.floats(0.7, 1.0), st.sampled_from(["b", "alice"]))
def test_honest_decomposition_is_feasible_and_below_optimum(theta, a0, a1, b0, b1, ea, eb, kind):
    comps = lossy_realization(theta, (a0, a1), (b0, b1), ea, eb)
    beh = behavior_of(comps)
    ps = strategy_b(beh.scenario) if kind == "b" else alice_detected(beh.scenario)
    pr = build_guessing_sdp(beh, ps)
    Ys, value = honest_point(pr, comps, ps, 0, 0)
    assert np.abs(pr.constraint_residual(Ys)).max() < 1e-10
    assert pr.objective_value(Ys) == pytest.approx(value, abs=1e-12)
    res = solve(pr)
    assert res.ok
    assert value <= res.value + 1e-7
    assert min(np.linalg.eigvalsh(B)[0] for B in res.blocks) >= -1e-7
