"""Bipartite behaviors p(ab|xy) with a distinguished no-detection outcome.

Tables are stored as arrays of shape ``(X, Y, A, B)`` indexed
``table[x, y, a, b]``.  Outcome *labels* (``"0"``, ``"1"``, ``"∅"``) only
matter for display and serialization; everything else works on indices.

The Collins-Gisin parametrization keeps all outcomes but the last one for
every input, so with the labels ``("0", "1", "∅")`` the no-detection outcome
is the one reconstructed by complementation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NO_DET = "∅"

PAIR = "pair"
ALICE = "alice"


class StructureError(ValueError):
    """Table shape does not match its scenario."""


class InfeasibleTableError(ValueError):
    """A Collins-Gisin table reconstructs to negative probabilities."""


class NotBlockStructuredError(ValueError):
    """Behavior is not a mixture of a valid block and a ∅∅ block."""


@dataclass(frozen=True)
class Scenario:
    alice_inputs: int
    bob_inputs: int
    alice_outcomes: tuple = ("0", "1", NO_DET)
    bob_outcomes: tuple = ("0", "1", NO_DET)
    alice_no_detection: str | None = NO_DET
    bob_no_detection: str | None = NO_DET

    def __post_init__(self):
        object.__setattr__(self, "alice_outcomes", tuple(str(o) for o in self.alice_outcomes))
        object.__setattr__(self, "bob_outcomes", tuple(str(o) for o in self.bob_outcomes))
        if self.alice_inputs < 1 or self.bob_inputs < 1:
            raise ValueError("input counts must be >= 1")
        for outs, nd in ((self.alice_outcomes, self.alice_no_detection),
                         (self.bob_outcomes, self.bob_no_detection)):
            if not outs or len(set(outs)) != len(outs):
                raise ValueError(f"outcome list must be non-empty and duplicate-free: {outs}")
            if nd is not None and nd not in outs:
                raise ValueError(f"no-detection label {nd!r} not among outcomes {outs}")

    @property
    def shape(self):
        return (self.alice_inputs, self.bob_inputs,
                len(self.alice_outcomes), len(self.bob_outcomes))

    @property
    def n_a(self):
        return len(self.alice_outcomes)

    @property
    def n_b(self):
        return len(self.bob_outcomes)

    def alice_index(self, label) -> int:
        return self.alice_outcomes.index(str(label))

    def bob_index(self, label) -> int:
        return self.bob_outcomes.index(str(label))

    @property
    def alice_nd_index(self):
        return None if self.alice_no_detection is None else self.alice_index(self.alice_no_detection)

    @property
    def bob_nd_index(self):
        return None if self.bob_no_detection is None else self.bob_index(self.bob_no_detection)

    def to_dict(self):
        return {
            "alice_inputs": self.alice_inputs,
            "bob_inputs": self.bob_inputs,
            "alice_outcomes": list(self.alice_outcomes),
            "bob_outcomes": list(self.bob_outcomes),
            "alice_no_detection": self.alice_no_detection,
            "bob_no_detection": self.bob_no_detection,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            alice_inputs=int(d["alice_inputs"]),
            bob_inputs=int(d["bob_inputs"]),
            alice_outcomes=tuple(d.get("alice_outcomes", ("0", "1", NO_DET))),
            bob_outcomes=tuple(d.get("bob_outcomes", ("0", "1", NO_DET))),
            alice_no_detection=d.get("alice_no_detection", NO_DET),
            bob_no_detection=d.get("bob_no_detection", NO_DET),
        )


CHSH_3x3 = Scenario(2, 2)
# Alice with a no-detection outcome, Bob binary (the non-i.i.d. second example)
CHSH_3x2 = Scenario(2, 2, bob_outcomes=("0", "1"), bob_no_detection=None)


@dataclass(frozen=True, eq=False)
class Behavior:
    scenario: Scenario
    table: np.ndarray
    tolerance: float = 1e-9

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != self.scenario.shape:
            raise StructureError(f"table shape {t.shape} != scenario shape {self.scenario.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __call__(self, a, b, x, y) -> float:
        return float(self.table[x, y, a, b])

    def alice_marginal(self):
        """P_A(a|x), averaged over Bob's inputs; shape ``(X, A)``."""
        return self.table.sum(axis=3).mean(axis=1)

    def bob_marginal(self):
        """P_B(b|y), averaged over Alice's inputs; shape ``(Y, B)``."""
        return self.table.sum(axis=2).mean(axis=0)

    def mix(self, other: "Behavior", weight: float) -> "Behavior":
        """``weight * self + (1 - weight) * other``."""
        return Behavior(self.scenario, weight * self.table + (1 - weight) * other.table,
                        max(self.tolerance, other.tolerance))

    def relabel(self, alice_perm=None, bob_perm=None) -> "Behavior":
        """Permute outcome indices; ``perm[i]`` is the new index of outcome ``i``."""
        t = self.table
        if alice_perm is not None:
            out = np.empty_like(t)
            out[:, :, list(alice_perm), :] = t
            t = out
        if bob_perm is not None:
            out = np.empty_like(t)
            out[:, :, :, list(bob_perm)] = t
            t = out
        return Behavior(self.scenario, t, self.tolerance)

    def cleaned(self) -> "Behavior":
        """Clip tiny negative entries to zero and renormalize each (x, y) slice."""
        t = np.clip(self.table, 0.0, None)
        t = t / t.sum(axis=(2, 3), keepdims=True)
        return Behavior(self.scenario, t, self.tolerance)

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict(),
            "entries": [float(v) for v in self.table.ravel()],
            "tolerance": self.tolerance,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, **kw)

    @classmethod
    def from_dict(cls, d):
        sc = Scenario.from_dict(d["scenario"])
        entries = np.asarray(d["entries"], dtype=float)
        if entries.size != int(np.prod(sc.shape)):
            raise StructureError(f"expected {int(np.prod(sc.shape))} entries, got {entries.size}")
        return cls(sc, entries.reshape(sc.shape), float(d.get("tolerance", 1e-9)))

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


def deterministic(scenario: Scenario, a_of_x: Sequence[int], b_of_y: Sequence[int]) -> Behavior:
    """Local deterministic behavior with outcome ``a_of_x[x]`` and ``b_of_y[y]``."""
    t = np.zeros(scenario.shape)
    for x in range(scenario.alice_inputs):
        for y in range(scenario.bob_inputs):
            t[x, y, a_of_x[x], b_of_y[y]] = 1.0
    return Behavior(scenario, t)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str  # "nonnegativity" | "normalization" | "no-signaling"
    where: tuple
    magnitude: float


def validate(behavior: Behavior, tolerance: float | None = None) -> list[Violation]:
    """Check nonnegativity, normalization and no-signaling.

    Returns the list of violated invariants (empty when the behavior is
    valid).  Each entry records the offending index and the size of the
    violation.
    """
    tol = behavior.tolerance if tolerance is None else tolerance
    t = behavior.table
    if t.shape != behavior.scenario.shape:
        raise StructureError("table shape does not match scenario")
    report = []
    for idx in zip(*np.nonzero(t < -tol)):
        report.append(Violation("nonnegativity", tuple(int(i) for i in idx), float(-t[idx])))
    norm = t.sum(axis=(2, 3))
    for x, y in zip(*np.nonzero(np.abs(norm - 1.0) > tol)):
        report.append(Violation("normalization", (int(x), int(y)), float(abs(norm[x, y] - 1.0))))
    pa = t.sum(axis=3)  # (X, Y, A)
    dev_a = np.abs(pa - pa[:, :1, :]).max(axis=1)  # (X, A)
    for x, a in zip(*np.nonzero(dev_a > tol)):
        report.append(Violation("no-signaling", ("alice", int(x), int(a)), float(dev_a[x, a])))
    pb = t.sum(axis=2)  # (X, Y, B)
    dev_b = np.abs(pb - pb[:1, :, :]).max(axis=0)  # (Y, B)
    for y, b in zip(*np.nonzero(dev_b > tol)):
        report.append(Violation("no-signaling", ("bob", int(y), int(b)), float(dev_b[y, b])))
    return report


def is_valid(behavior: Behavior, tolerance: float | None = None) -> bool:
    return not validate(behavior, tolerance)


# ---------------------------------------------------------------------------
# Collins-Gisin tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CollinsGisinTable:
    """Marginals and joint probabilities of all but the last outcome per input.

    ``alice[x, a]`` = P_A(a|x), ``bob[y, b]`` = P_B(b|y) and
    ``joint[x, y, a, b]`` = P(ab|xy) for kept outcomes ``a < A-1``, ``b < B-1``.
    """
    scenario: Scenario
    alice: np.ndarray
    bob: np.ndarray
    joint: np.ndarray

    def __post_init__(self):
        sc = self.scenario
        for name, shape in (("alice", (sc.alice_inputs, sc.n_a - 1)),
                            ("bob", (sc.bob_inputs, sc.n_b - 1)),
                            ("joint", (sc.alice_inputs, sc.bob_inputs, sc.n_a - 1, sc.n_b - 1))):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise StructureError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def kept_outcomes(self):
        sc = self.scenario
        return {
            "alice": [list(sc.alice_outcomes[:-1])] * sc.alice_inputs,
            "bob": [list(sc.bob_outcomes[:-1])] * sc.bob_inputs,
        }

    def to_matrix(self) -> np.ndarray:
        """Tabular layout: corner 1, Bob marginals on the first row, Alice
        marginals down the first column, joints inside.

        Rows after the first run over ``(x, a)`` with ``a`` fastest, columns
        after the first over ``(y, b)`` with ``b`` fastest.
        """
        sc = self.scenario
        ka, kb = sc.n_a - 1, sc.n_b - 1
        m = np.zeros((1 + sc.alice_inputs * ka, 1 + sc.bob_inputs * kb))
        m[0, 0] = 1.0
        m[0, 1:] = self.bob.ravel()
        m[1:, 0] = self.alice.ravel()
        # joint[x, y, a, b] -> row (x, a), col (y, b)
        m[1:, 1:] = self.joint.transpose(0, 2, 1, 3).reshape(sc.alice_inputs * ka, sc.bob_inputs * kb)
        return m

    @classmethod
    def from_matrix(cls, scenario: Scenario, matrix) -> "CollinsGisinTable":
        m = np.asarray(matrix, dtype=float)
        sc = scenario
        ka, kb = sc.n_a - 1, sc.n_b - 1
        expected = (1 + sc.alice_inputs * ka, 1 + sc.bob_inputs * kb)
        if m.shape != expected:
            raise StructureError(f"matrix shape {m.shape}, expected {expected}")
        alice = m[1:, 0].reshape(sc.alice_inputs, ka)
        bob = m[0, 1:].reshape(sc.bob_inputs, kb)
        joint = m[1:, 1:].reshape(sc.alice_inputs, ka, sc.bob_inputs, kb).transpose(0, 2, 1, 3)
        return cls(sc, alice, bob, joint)


def from_collins_gisin(cg: CollinsGisinTable, tolerance: float = 1e-9) -> Behavior:
    """Rebuild the full table by complementation.

    ``P(a, last|xy) = P_A(a|x) - sum_b P(ab|xy)`` and
    ``P(last, b|xy) = P_B(b|y) - sum_a P(ab|xy)``; the corner entry closes
    the normalization.
    """
    sc = cg.scenario
    X, Y, A, B = sc.shape
    t = np.zeros(sc.shape)
    t[:, :, :-1, :-1] = cg.joint
    t[:, :, :-1, -1] = cg.alice[:, None, :] - cg.joint.sum(axis=3)
    t[:, :, -1, :-1] = cg.bob[None, :, :] - cg.joint.sum(axis=2)
    t[:, :, -1, -1] = 1.0 - cg.alice.sum(axis=1)[:, None] - cg.bob.sum(axis=1)[None, :] \
        + cg.joint.sum(axis=(2, 3))
    if t.min() < -tolerance:
        idx = np.unravel_index(np.argmin(t), t.shape)
        raise InfeasibleTableError(f"entry p(a={idx[2]}, b={idx[3]} | x={idx[0]}, y={idx[1]}) "
                                   f"= {t[idx]:.6g} is negative")
    return Behavior(sc, t, tolerance)


def to_collins_gisin(behavior: Behavior) -> CollinsGisinTable:
    t = behavior.table
    return CollinsGisinTable(
        behavior.scenario,
        alice=behavior.alice_marginal()[:, :-1],
        bob=behavior.bob_marginal()[:, :-1],
        joint=t[:, :, :-1, :-1],
    )


def cg_residual(behavior: Behavior) -> float:
    """Largest entrywise gap between a table and its Collins-Gisin round trip.

    Zero exactly when the table is normalized and no-signaling.
    """
    back = from_collins_gisin(to_collins_gisin(behavior), tolerance=np.inf)
    return float(np.abs(back.table - behavior.table).max())


# ---------------------------------------------------------------------------
# post-selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PostSelection:
    """Valid outcome pairs (as index pairs) and the adversary's guess target.

    In ``pair`` mode the adversary guesses ``(a, b)``; in ``alice`` mode only
    ``a``.
    """
    valid: frozenset
    mode: str = PAIR
    label: str = ""

    def __post_init__(self):
        v = frozenset((int(a), int(b)) for a, b in self.valid)
        if not v:
            raise ValueError("valid set must be non-empty")
        if self.mode not in (PAIR, ALICE):
            raise ValueError(f"unknown target mode {self.mode!r}")
        object.__setattr__(self, "valid", v)

    def target(self, a: int, b: int):
        if (a, b) not in self.valid:
            raise KeyError((a, b))
        return (a, b) if self.mode == PAIR else a

    def guesses(self) -> list:
        """Sorted guess alphabet (one SDP block per guess)."""
        return sorted({self.target(a, b) for a, b in self.valid})

    def invalid(self, scenario: Scenario) -> frozenset:
        every = {(a, b) for a in range(scenario.n_a) for b in range(scenario.n_b)}
        return frozenset(every - self.valid)

    def with_mode(self, mode: str) -> "PostSelection":
        return PostSelection(self.valid, mode, self.label)


def _all_pairs(sc: Scenario):
    return [(a, b) for a in range(sc.n_a) for b in range(sc.n_b)]


def strategy_a(sc: Scenario, mode: str = PAIR) -> PostSelection:
    """Keep every outcome pair."""
    return PostSelection(frozenset(_all_pairs(sc)), mode, "a")


def strategy_b(sc: Scenario, mode: str = PAIR) -> PostSelection:
    """Discard double no-detections."""
    na, nb = sc.alice_nd_index, sc.bob_nd_index
    return PostSelection(frozenset(p for p in _all_pairs(sc) if p != (na, nb)), mode, "b")


def strategy_c(sc: Scenario, mode: str = PAIR) -> PostSelection:
    """Discard every run with a no-detection on either side."""
    na, nb = sc.alice_nd_index, sc.bob_nd_index
    return PostSelection(frozenset((a, b) for a, b in _all_pairs(sc) if a != na and b != nb),
                         mode, "c")


def alice_detected(sc: Scenario, mode: str = ALICE) -> PostSelection:
    """Keep runs where Alice's outcome is not ∅."""
    na = sc.alice_nd_index
    return PostSelection(frozenset((a, b) for a, b in _all_pairs(sc) if a != na), mode, "alice")


STRATEGIES = {"a": strategy_a, "b": strategy_b, "c": strategy_c}


def valid_probability(behavior: Behavior, ps: PostSelection, x: int = 0, y: int = 0) -> float:
    """Probability that a run with inputs (x, y) lands in the valid set."""
    t = behavior.table[x, y]
    return float(min(1.0, max(0.0, sum(t[a, b] for a, b in ps.valid))))


# ---------------------------------------------------------------------------
# block decomposition p = nu q + (1 - nu) r
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    nu: float
    valid_part: Behavior
    invalid_part: Behavior

    def recompose(self) -> Behavior:
        return self.valid_part.mix(self.invalid_part, self.nu)


def extract_block_decomposition(behavior: Behavior, ps: PostSelection,
                                tolerance: float = 1e-9) -> BlockDecomposition:
    """Split a behavior into a detection block and a ∅∅ block.

    Requires that every mixed pair (one detection, one ∅) has zero
    probability and that the ∅∅ weight does not depend on the inputs.
    """
    sc = behavior.scenario
    na, nb = sc.alice_nd_index, sc.bob_nd_index
    if na is None or nb is None:
        raise NotBlockStructuredError("both parties need a no-detection outcome")
    t = behavior.table
    mixed = max(float(np.delete(t[:, :, na, :], nb, axis=-1).max(initial=0.0)),
                float(np.delete(t[:, :, :, nb], na, axis=-1).max(initial=0.0)))
    if mixed > tolerance:
        raise NotBlockStructuredError(f"mixed detection/no-detection probability {mixed:.3g}")
    blank = t[:, :, na, nb]
    if float(blank.max() - blank.min()) > tolerance:
        raise NotBlockStructuredError("∅∅ probability depends on the inputs")
    nu = 1.0 - float(blank.mean())
    r = np.zeros(sc.shape)
    r[:, :, na, nb] = 1.0
    if nu <= tolerance:
        q = np.zeros(sc.shape)
        q[:, :, 0, 0] = 1.0  # arbitrary; carries zero weight
    else:
        q = t.copy()
        q[:, :, na, nb] = 0.0
        q = q / nu
    return BlockDecomposition(nu, Behavior(sc, q, behavior.tolerance), Behavior(sc, r))


def check_block_recomposition(behavior: Behavior, dec: BlockDecomposition) -> float:
    return float(np.abs(dec.recompose().table - behavior.table).max())
