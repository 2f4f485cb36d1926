"""Guessing probability, min-entropy and randomness rates; strategy scans."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import photonics as ph
from .behaviors import (ALICE, PAIR, STRATEGIES, Behavior, PostSelection, Scenario,
                        extract_block_decomposition,
                        strategy_a, strategy_b, valid_probability)
from .relaxation import SolverConfig, build_guessing_sdp, solve

STRATEGY_LABELS = ("a", "b", "c", "h")


class NoValidEventsError(ValueError):
    """The post-selected set has probability zero at the generation inputs."""


class SolverFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class RandomnessReport:
    p_valid: float
    guessing_probability: float | None
    min_entropy: float
    rate: float
    strategy: str
    status: str = "optimal"
    mode: str = PAIR
    flagged: bool = False
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def mode_probability(behavior: Behavior, ps: PostSelection, x_bar=0, y_bar=0) -> float:
    """Largest probability of a single guess symbol given a valid event."""
    pv = valid_probability(behavior, ps, x_bar, y_bar)
    if pv <= 0:
        return 0.0
    acc = {}
    for a, b in ps.valid:
        t = ps.target(a, b)
        acc[t] = acc.get(t, 0.0) + float(behavior.table[x_bar, y_bar, a, b])
    return max(acc.values()) / pv


def _guess(behavior, ps, x_bar, y_bar, config, level=1):
    pv = valid_probability(behavior, ps, x_bar, y_bar)
    if pv <= 0:
        raise NoValidEventsError("no valid events at the generation inputs")
    res = solve(build_guessing_sdp(behavior, ps, x_bar, y_bar, level=level), config)
    if not res.ok:
        raise SolverFailure(res.diagnostics.get("reason", res.status), res.diagnostics)
    floor = mode_probability(behavior, ps, x_bar, y_bar)
    G = min(1.0, max(floor, res.value / pv))
    return G, pv, res


def guessing_probability(behavior: Behavior, ps: PostSelection, x_bar: int = 0, y_bar: int = 0,
                         config: SolverConfig | None = None, level=1) -> float:
    """Adversary's guessing probability conditioned on a valid event.

    ``level`` selects the relaxation (see :func:`~postrand.relaxation.local_level1_basis`);
    every level gives a sound upper bound, higher ones a tighter one.
    """
    return _guess(behavior, ps, x_bar, y_bar, config, level)[0]


def randomness_rate(behavior: Behavior, ps: PostSelection, x_bar: int = 0, y_bar: int = 0,
                    config: SolverConfig | None = None, label: str | None = None,
                    level=1) -> RandomnessReport:
    """Certified min-entropy per run, ``p_valid * (-log2 G)``."""
    label = label or ps.label
    pv = valid_probability(behavior, ps, x_bar, y_bar)
    if pv <= 0:
        return RandomnessReport(0.0, None, 0.0, 0.0, label, "no-valid-events", ps.mode, True)
    G, pv, res = _guess(behavior, ps, x_bar, y_bar, config, level)
    H = max(0.0, -math.log2(G))
    return RandomnessReport(pv, G, H, pv * H, label, res.status, ps.mode, False, res.diagnostics)


def heralded_report(heralded: Behavior, heralding_probability: float, ps: PostSelection | None = None,
                    x_bar: int = 0, y_bar: int = 0, config: SolverConfig | None = None,
                    mode: str = PAIR) -> RandomnessReport:
    """Rate per source run when only heralded runs are measured.

    ``ps`` defaults to discarding double no-detections of heralded runs,
    which keeps every run when heralded pairs are always detected.
    """
    ps = ps or strategy_b(heralded.scenario, mode)
    if heralding_probability <= 0:
        return RandomnessReport(0.0, None, 0.0, 0.0, "h", "no-valid-events", ps.mode, True)
    rep = randomness_rate(heralded, ps, x_bar, y_bar, config, label="h")
    rep.diagnostics = dict(rep.diagnostics, heralding_probability=heralding_probability)
    rep.p_valid *= heralding_probability
    rep.rate = rep.p_valid * rep.min_entropy
    return rep


def heralded_rate(params: ph.SpdcParams, settings: ph.MeasurementSettings = ph.CHSH_SETTINGS,
                  ps: PostSelection | None = None, x_bar: int = 0, y_bar: int = 0,
                  config: SolverConfig | None = None, mode: str = PAIR) -> RandomnessReport:
    """Heralded-source rate of the SPDC model, normalized per source run."""
    beh, prob = ph.heralded_behavior(params, settings)
    return heralded_report(beh, prob, ps, x_bar, y_bar, config, mode)


def heralded_equivalence_check(behavior: Behavior, ps: PostSelection, x_bar: int = 0, y_bar: int = 0,
                               config: SolverConfig | None = None):
    """Compare G on the post-selected behavior with G on its detection block.

    Returns ``(lhs, rhs, |lhs - rhs|)``: ``lhs`` uses ``ps`` on the full
    behavior, ``rhs`` keeps every outcome of the detection block alone.
    """
    dec = extract_block_decomposition(behavior, ps)
    lhs = guessing_probability(behavior, ps, x_bar, y_bar, config)
    q = dec.valid_part
    rhs = guessing_probability(q, strategy_a(q.scenario, ps.mode), x_bar, y_bar, config)
    return lhs, rhs, abs(lhs - rhs)


def expected_output_length(n: int, behavior: Behavior, ps: PostSelection, x_bar: int = 0,
                           y_bar: int = 0, config: SolverConfig | None = None) -> float:
    """Average number of extractable bits from ``n`` runs."""
    if n < 0:
        raise ValueError("run count must be nonnegative")
    if n == 0:
        return 0.0
    return n * randomness_rate(behavior, ps, x_bar, y_bar, config).rate


def _fold(t, idx, axis):
    t = np.moveaxis(t, axis, 0)
    out = np.delete(t, idx, axis=0)
    out[0] = out[0] + t[idx]
    return np.moveaxis(out, 0, axis)


def bin_no_detections(behavior: Behavior) -> Behavior:
    """Merge each party's ``∅`` into outcome ``0`` (the +1 convention)."""
    sc = behavior.scenario
    t = behavior.table
    outs_a, outs_b = list(sc.alice_outcomes), list(sc.bob_outcomes)
    if sc.alice_nd_index is not None:
        t = _fold(t, sc.alice_nd_index, 2)
        del outs_a[sc.alice_nd_index]
    if sc.bob_nd_index is not None:
        t = _fold(t, sc.bob_nd_index, 3)
        del outs_b[sc.bob_nd_index]
    binned = Scenario(sc.alice_inputs, sc.bob_inputs, tuple(outs_a), tuple(outs_b), None, None)
    return Behavior(binned, t, behavior.tolerance)


@dataclass
class TwoDayAccounting:
    """Bits from two blocks of ``n`` runs: a maximal CHSH day, then a
    day of double no-detections."""
    n: int
    per_day: float
    pooled_chsh: float
    pooled_full: float
    pooled_S: float


def two_day_accounting(n: int, config: SolverConfig | None = None) -> TwoDayAccounting:
    """Alice's extractable bits when each day is processed alone versus pooled.

    ``pooled_chsh`` uses only the pooled CHSH value; ``pooled_full`` runs the
    guessing program on the pooled table.  Outcomes are binned with ``∅ -> 0``.
    """
    day1 = bin_no_detections(ph.singlet_with_vacuum(1.0))
    day2 = bin_no_detections(ph.singlet_with_vacuum(0.0))
    pooled = day1.mix(day2, 0.5)
    ps = strategy_a(day1.scenario, ALICE)
    per_day = (expected_output_length(n, day1, ps, config=config)
               + expected_output_length(n, day2, ps, config=config))
    S = ph.chsh_value(pooled)
    return TwoDayAccounting(n, per_day, 2 * n * ph.chsh_minentropy_bound(S),
                            expected_output_length(2 * n, pooled, ps, config=config), S)


def rate_per_time(nus, rates) -> np.ndarray:
    """Rate per unit time up to a constant: ``f(ν)/ν``."""
    nus = np.asarray(nus, dtype=float)
    if np.any(nus <= 0):
        raise ValueError("ν grid must exclude 0")
    return np.asarray(rates, dtype=float) / nus


# ---------------------------------------------------------------------------
# models and scans
# ---------------------------------------------------------------------------

MODELS = ("spdc", "singlet_vacuum", "one_pair", "eberhard")
_DEFAULTS = {
    "spdc": {"eta": 1.0, "nu": 0.1},
    "singlet_vacuum": {"nu": 0.5},
    "one_pair": {"theta": math.pi / 4, "eta": 1.0, "nu": 0.01},
    "eberhard": {"eta": 0.9, "nu": 0.01},
}


# Input pair used for generation.  For the lifted-CHSH settings this is the
# pair carrying the minus sign, where the outcomes are least predictable.
_INPUTS = {"spdc": (0, 0), "singlet_vacuum": (0, 0), "one_pair": (0, 0), "eberhard": (1, 1)}


@dataclass
class ModelConfig:
    """A behavior family and the parameter a scan varies."""
    model: str
    parameter: str
    fixed: dict = field(default_factory=dict)
    inputs: tuple | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.parameter not in _DEFAULTS[self.model]:
            raise ValueError(f"model {self.model} has no parameter {self.parameter!r}")
        for k in self.fixed:
            if k not in _DEFAULTS[self.model]:
                raise ValueError(f"model {self.model} has no parameter {k!r}")
        self.inputs = tuple(self.inputs) if self.inputs is not None else _INPUTS[self.model]

    def values(self, value):
        v = dict(_DEFAULTS[self.model])
        v.update(self.fixed)
        v[self.parameter] = float(value)
        return v

    def behaviors(self, value):
        """``(behavior, heralded behavior, heralding probability)`` at one grid point."""
        v = self.values(value)
        if self.model == "spdc":
            params = ph.SpdcParams.symmetric(v["nu"], v["eta"])
            beh = ph.detection_statistics(params, ph.CHSH_SETTINGS)
            her, prob = ph.heralded_behavior(params, ph.CHSH_SETTINGS)
            return beh, her, prob
        if self.model == "singlet_vacuum":
            return ph.singlet_with_vacuum(v["nu"]), ph.singlet_with_vacuum(1.0), v["nu"]
        if self.model == "one_pair":
            her = ph.one_pair_behavior(v["theta"], v["eta"])
        else:
            her = ph.eberhard_settings(v["eta"], strict=False).behavior()
        return ph.with_vacuum(her, v["nu"]), her, v["nu"]

    def to_dict(self):
        return {"model": self.model, "parameter": self.parameter, "fixed": self.fixed,
                "inputs": list(self.inputs)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["model"], d["parameter"], dict(d.get("fixed", {})), d.get("inputs"))


FIGURE_PRESETS = {
    1: (ModelConfig("spdc", "nu", {"eta": 1.0}),
        [0.02, 0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0, 1.25, 1.5]),
    2: (ModelConfig("one_pair", "eta", {"theta": math.pi / 4, "nu": 0.01}),
        [0.80, 0.82, 0.828, 0.835, 0.84, 0.845, 0.85, 0.855, 0.86, 0.87, 0.88, 0.9, 0.925, 0.95,
         0.975, 1.0]),
    3: (ModelConfig("eberhard", "eta", {"nu": 0.01}),
        [0.6, 0.64, 0.666, 0.68, 0.7, 0.72, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0]),
    4: (ModelConfig("singlet_vacuum", "nu"), [round(0.1 * k, 1) for k in range(1, 11)]),
}


@dataclass
class ScanResult:
    parameter: str
    grid: list
    strategies: list
    reports: list  # reports[i][strategy]
    model: dict
    solver: dict
    started: str
    finished: str

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")

    def rates(self, strategy):
        return np.array([r[strategy].rate for r in self.reports])

    def rows(self):
        for v, point in zip(self.grid, self.reports):
            for s in self.strategies:
                r = point[s]
                yield {"parameter": v, "strategy": s, "p_valid": r.p_valid,
                       "G": "" if r.guessing_probability is None else r.guessing_probability,
                       "H": r.min_entropy, "rate": r.rate, "status": r.status}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["parameter", "strategy", "p_valid", "G", "H", "rate", "status"],
                           lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow(row)
        return buf.getvalue()

    def to_json(self, **kw) -> str:
        return json.dumps({
            "parameter": self.parameter, "grid": self.grid, "strategies": self.strategies,
            "model": self.model, "solver": self.solver,
            "started": self.started, "finished": self.finished,
            "points": [{s: point[s].to_dict() for s in self.strategies} for point in self.reports],
        }, default=_jsonable, **kw)

    @property
    def failed(self):
        return [(v, s) for v, point in zip(self.grid, self.reports)
                for s in self.strategies if point[s].status == "failed"]


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _failed(label, mode, exc):
    diag = getattr(exc, "diagnostics", {}) or {}
    diag = dict(diag, reason=str(exc))
    return RandomnessReport(float("nan"), None, float("nan"), float("nan"), label, "failed", mode,
                            True, diag)


def scan_point(model: ModelConfig, value, strategies, config, mode=PAIR):
    x_bar, y_bar = model.inputs
    beh, her, prob = model.behaviors(value)
    out = {}
    for s in strategies:
        try:
            if s == "h":
                out[s] = heralded_report(her, prob, None, x_bar, y_bar, config, mode)
            else:
                ps = STRATEGIES[s](beh.scenario, mode)
                out[s] = randomness_rate(beh, ps, x_bar, y_bar, config)
        except (SolverFailure, NoValidEventsError) as exc:
            out[s] = _failed(s, mode, exc)
    return out


def _scan_point_args(args):
    return scan_point(*args)


def scan(model: ModelConfig, grid, strategies=STRATEGY_LABELS, config: SolverConfig | None = None,
         mode: str = PAIR, workers: int = 1) -> ScanResult:
    """Rates of each strategy over a parameter grid.

    Points are independent; with ``workers > 1`` they run in separate
    processes and are reassembled in grid order.
    """
    grid = [float(v) for v in grid]
    strategies = list(strategies)
    for s in strategies:
        if s not in STRATEGY_LABELS:
            raise ValueError(f"unknown strategy {s!r}")
    config = config or SolverConfig()
    started = datetime.now(timezone.utc).isoformat()
    jobs = [(model, v, strategies, config, mode) for v in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_scan_point_args, jobs))
    else:
        reports = [_scan_point_args(j) for j in jobs]
    finished = datetime.now(timezone.utc).isoformat()
    return ScanResult(model.parameter, grid, strategies, reports, model.to_dict(), asdict(config),
                      started, finished)


def figure_scan(figure: int, strategies=STRATEGY_LABELS, config=None, mode=PAIR, workers=1,
                grid=None) -> ScanResult:
    """Scan for one of the four standard comparisons (``figure`` in 1..4)."""
    model, default_grid = FIGURE_PRESETS[figure]
    return scan(model, grid if grid is not None else default_grid, strategies, config, mode, workers)


__all__ = [
    "ALICE", "PAIR", "FIGURE_PRESETS", "ModelConfig", "NoValidEventsError", "RandomnessReport",
    "ScanResult", "SolverFailure", "expected_output_length", "figure_scan", "guessing_probability",
    "heralded_equivalence_check", "heralded_rate", "heralded_report", "mode_probability",
    "randomness_rate", "rate_per_time", "scan", "scan_point", "bin_no_detections",
    "TwoDayAccounting", "two_day_accounting",
]
