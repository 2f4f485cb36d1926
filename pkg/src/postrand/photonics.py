"""Behaviors of photonic Bell tests.

The source is single-mode pulsed SPDC

    |psi> = c(g, gb) exp(tanh(g) aH+ bV+ - tanh(gb) aV+ bH+) |0>,
    c(g, gb) = sqrt(1 - tanh(g)^2) sqrt(1 - tanh(gb)^2),

so the amplitude of ``n`` pairs in the (aH, bV) arm and ``m`` pairs in the
(aV, bH) arm is ``c tanh(g)^n (-tanh(gb))^m``.  Each party rotates the
polarization by its setting angle, splits on a polarizing beam splitter and
watches two threshold detectors of efficiency ``eta``.  A click on detector 0
alone is outcome 0, detector 1 alone is outcome 1, anything else is ``∅``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

from . import kernels
from .behaviors import CHSH_3x3, Behavior, Scenario

DEFAULT_CUTOFF_CAP = 256
NORM_SLACK = 1e-10
EBERHARD_LIMIT = 2.0 / 3.0


class CutoffOverflowError(RuntimeError):
    """Fock truncation would need more photons per arm than allowed."""


class DegenerateHeraldingError(ValueError):
    """The source never emits a pair, so there is nothing to herald."""


class BelowThresholdError(ValueError):
    """No CHSH-type violation exists at this detection efficiency."""


@dataclass(frozen=True)
class SpdcParams:
    g: float
    g_bar: float
    eta: float = 1.0
    cutoff: int | None = None

    def __post_init__(self):
        if self.g < 0 or self.g_bar < 0:
            raise ValueError("squeezing parameters must be >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")

    @classmethod
    def symmetric(cls, nu: float, eta: float = 1.0, cutoff: int | None = None) -> "SpdcParams":
        """g = gb chosen so that the mean pair number is ``nu``."""
        g = math.asinh(math.sqrt(nu / 2.0))
        return cls(g, g, eta, cutoff)

    @property
    def theta(self) -> float:
        """Entanglement angle arctan(tanh gb / tanh g) of the one-pair term."""
        return math.atan2(math.tanh(self.g_bar), math.tanh(self.g))


@dataclass(frozen=True)
class MeasurementSettings:
    """Polarizer angles (radians) per input.

    ``swap_alice`` exchanges Alice's detector labels; with the default CHSH
    angles it makes the singlet correlators equal ``(-1)^(xy) / sqrt(2)``.
    """
    alice_angles: tuple = (0.0, math.pi / 4)
    bob_angles: tuple = (math.pi / 8, -math.pi / 8)
    swap_alice: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alice_angles", tuple(float(a) for a in self.alice_angles))
        object.__setattr__(self, "bob_angles", tuple(float(b) for b in self.bob_angles))
        if not self.alice_angles or not self.bob_angles:
            raise ValueError("need at least one angle per party")


CHSH_SETTINGS = MeasurementSettings()


def _scenario_for(settings: MeasurementSettings) -> Scenario:
    if len(settings.alice_angles) == 2 and len(settings.bob_angles) == 2:
        return CHSH_3x3
    return Scenario(len(settings.alice_angles), len(settings.bob_angles))


# ---------------------------------------------------------------------------
# SPDC state
# ---------------------------------------------------------------------------

def mean_pair_number(g: float, g_bar: float) -> float:
    return math.sinh(g) ** 2 + math.sinh(g_bar) ** 2


def _truncated_norm(t2: float, tb2: float, cutoff: int) -> float:
    return (1.0 - t2 ** (cutoff + 1)) * (1.0 - tb2 ** (cutoff + 1))


def required_cutoff(g: float, g_bar: float, slack: float = NORM_SLACK,
                    cap: int = DEFAULT_CUTOFF_CAP) -> int:
    """Smallest per-arm photon cutoff keeping truncation loss below ``slack``."""
    t2, tb2 = math.tanh(g) ** 2, math.tanh(g_bar) ** 2
    cutoff = 1
    while _truncated_norm(t2, tb2, cutoff) < 1.0 - slack:
        cutoff += 1
        if cutoff > cap:
            raise CutoffOverflowError(f"need more than {cap} photons per arm "
                                      f"(g={g:.4g}, g_bar={g_bar:.4g})")
    return cutoff


@dataclass(frozen=True, eq=False)
class FockState:
    """Truncated two-mode-squeezed state; ``amplitudes[n, m]`` real."""
    amplitudes: np.ndarray
    cutoff: int

    @property
    def norm(self) -> float:
        return float((self.amplitudes ** 2).sum())

    def amplitude(self, n: int, m: int) -> float:
        if n > self.cutoff or m > self.cutoff:
            return 0.0
        return float(self.amplitudes[n, m])


def spdc_state(g: float, g_bar: float, cutoff: int | None = None,
               cap: int = DEFAULT_CUTOFF_CAP) -> FockState:
    if g < 0 or g_bar < 0:
        raise ValueError("squeezing parameters must be >= 0")
    need = required_cutoff(g, g_bar, cap=cap)
    cutoff = need if cutoff is None else max(int(cutoff), need)
    t, tb = math.tanh(g), math.tanh(g_bar)
    c = math.sqrt(1.0 - t * t) * math.sqrt(1.0 - tb * tb)
    n = np.arange(cutoff + 1)
    amps = c * np.outer(t ** n, (-tb) ** n)
    return FockState(amps, cutoff)


# ---------------------------------------------------------------------------
# detection statistics
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _rotation(n_photons: int, phi: float) -> np.ndarray:
    return kernels.rotation_matrix(n_photons, phi)


@lru_cache(maxsize=4096)
def _clicks(n_photons: int, eta: float) -> np.ndarray:
    return kernels.click_weights(n_photons, eta)


def _state_statistics(state: FockState, eta: float, settings: MeasurementSettings,
                      skip_vacuum: bool = False) -> np.ndarray:
    """Unnormalized 3x3 outcome tables for every (x, y); vacuum optionally dropped."""
    amps = state.amplitudes
    C = state.cutoff
    X, Y = len(settings.alice_angles), len(settings.bob_angles)
    out = np.zeros((X, Y, 3, 3))
    for N in range(1 if skip_vacuum else 0, 2 * C + 1):
        n = np.arange(N + 1)
        ok = (n <= C) & (N - n <= C)
        sector = np.zeros(N + 1)
        sector[ok] = amps[n[ok], N - n[ok]]
        if not sector.any():
            continue
        D = _clicks(N, eta)
        for x, alpha in enumerate(settings.alice_angles):
            UA = _rotation(N, alpha)
            for y, beta in enumerate(settings.bob_angles):
                UB = _rotation(N, beta)
                out[x, y] += kernels.sector_joint(sector, UA, UB, D, D)
    if settings.swap_alice:
        out = out[:, :, [1, 0, 2], :]
    return out


def detection_statistics(params: SpdcParams, settings: MeasurementSettings = CHSH_SETTINGS) -> Behavior:
    """Full three-outcome behavior of the SPDC source with threshold detectors."""
    state = spdc_state(params.g, params.g_bar, params.cutoff)
    t = _state_statistics(state, params.eta, settings)
    t = t / t.sum(axis=(2, 3), keepdims=True)
    return Behavior(_scenario_for(settings), t)


def heralded_behavior(params: SpdcParams, settings: MeasurementSettings = CHSH_SETTINGS
                      ) -> tuple[Behavior, float]:
    """Behavior conditioned on at least one emitted pair, and the heralding probability."""
    state = spdc_state(params.g, params.g_bar, params.cutoff)
    p_herald = 1.0 - state.amplitude(0, 0) ** 2
    if p_herald <= 0.0:
        raise DegenerateHeraldingError("g = g_bar = 0: no pair is ever emitted")
    t = _state_statistics(state, params.eta, settings, skip_vacuum=True)
    t = t / t.sum(axis=(2, 3), keepdims=True)
    return Behavior(_scenario_for(settings), t), p_herald


def one_pair_sector(params: SpdcParams, settings: MeasurementSettings = CHSH_SETTINGS) -> Behavior:
    """Statistics of the exactly-one-pair component of the SPDC state, renormalized."""
    t, tb = math.tanh(params.g), math.tanh(params.g_bar)
    amps = np.zeros((2, 2))
    amps[1, 0], amps[0, 1] = t, -tb
    state = FockState(amps, 1)
    X, Y = len(settings.alice_angles), len(settings.bob_angles)
    out = np.zeros((X, Y, 3, 3))
    D = _clicks(1, params.eta)
    sector = np.array([amps[0, 1], amps[1, 0]])
    for x, alpha in enumerate(settings.alice_angles):
        for y, beta in enumerate(settings.bob_angles):
            out[x, y] = kernels.sector_joint(sector, _rotation(1, alpha), _rotation(1, beta), D, D)
    if settings.swap_alice:
        out = out[:, :, [1, 0, 2], :]
    out /= state.norm
    return Behavior(_scenario_for(settings), out)


# ---------------------------------------------------------------------------
# closed-form models
# ---------------------------------------------------------------------------

def singlet_with_vacuum(nu: float) -> Behavior:
    """Ideal CHSH singlet with probability ``nu``, vacuum (∅∅) otherwise."""
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"nu must lie in [0, 1], got {nu}")
    t = np.zeros(CHSH_3x3.shape)
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    t[x, y, a, b] = nu * 0.25 * (1 + (-1) ** (a + b + x * y) / math.sqrt(2))
            t[x, y, 2, 2] = 1.0 - nu
    return Behavior(CHSH_3x3, t)


def _pair_amplitudes(theta, alpha, beta):
    """Amplitudes <i_alpha, j_beta | cos(theta) HV - sin(theta) VH>, shape (2, 2)."""
    h = np.array([math.cos(alpha), -math.sin(alpha)]), np.array([math.cos(beta), -math.sin(beta)])
    v = np.array([math.sin(alpha), math.cos(alpha)]), np.array([math.sin(beta), math.cos(beta)])
    return math.cos(theta) * np.outer(h[0], v[1]) - math.sin(theta) * np.outer(v[0], h[1])


def one_pair_table(theta: float, eta: float, alice_angles, bob_angles,
                   swap_alice: bool = False) -> np.ndarray:
    X, Y = len(alice_angles), len(bob_angles)
    t = np.empty((X, Y, 3, 3))
    for x, alpha in enumerate(alice_angles):
        for y, beta in enumerate(bob_angles):
            P = _pair_amplitudes(theta, alpha, beta) ** 2
            t[x, y, :2, :2] = eta * eta * P
            t[x, y, :2, 2] = eta * (1 - eta) * P.sum(axis=1)
            t[x, y, 2, :2] = (1 - eta) * eta * P.sum(axis=0)
            t[x, y, 2, 2] = (1 - eta) ** 2
    if swap_alice:
        t = t[:, :, [1, 0, 2], :]
    return t


def one_pair_behavior(theta: float, eta: float,
                      settings: MeasurementSettings = CHSH_SETTINGS) -> Behavior:
    """Exactly one pair in ``cos(theta)|HV> - sin(theta)|VH>``, lossy threshold detection."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    t = one_pair_table(theta, eta, settings.alice_angles, settings.bob_angles, settings.swap_alice)
    return Behavior(_scenario_for(settings), t)


def with_vacuum(behavior: Behavior, nu: float) -> Behavior:
    """Mix ``behavior`` (weight ``nu``) with the deterministic ∅∅ table."""
    sc = behavior.scenario
    r = np.zeros(sc.shape)
    r[:, :, sc.alice_nd_index, sc.bob_nd_index] = 1.0
    return behavior.mix(Behavior(sc, r), nu)


# ---------------------------------------------------------------------------
# CHSH
# ---------------------------------------------------------------------------

def _signs(n_outcomes, nd_index):
    s = np.ones(n_outcomes)
    s[1] = -1.0  # outcome "1" -> -1; "0" and "∅" -> +1
    return s


def correlators(behavior: Behavior) -> np.ndarray:
    """E(x, y) with outcome 1 -> -1 and both 0 and ∅ -> +1."""
    sc = behavior.scenario
    sa = _signs(sc.n_a, sc.alice_nd_index)
    sb = _signs(sc.n_b, sc.bob_nd_index)
    return np.einsum("xyab,a,b->xy", behavior.table, sa, sb)


def chsh_value(behavior: Behavior) -> float:
    sc = behavior.scenario
    if sc.alice_inputs != 2 or sc.bob_inputs != 2:
        raise ValueError("CHSH needs two inputs per party")
    E = correlators(behavior)
    return float(E[0, 0] + E[0, 1] + E[1, 0] - E[1, 1])


def chsh_minentropy_bound(S: float) -> float:
    """Min-entropy per run certified by a CHSH value ``S`` alone."""
    S = abs(S)
    if S > 2 * math.sqrt(2) + 1e-12:
        raise ValueError(f"CHSH value {S} exceeds the quantum maximum 2*sqrt(2)")
    if S <= 2.0:
        return 0.0
    return max(0.0, 1.0 - math.log2(1.0 + math.sqrt(max(0.0, 2.0 - S * S / 4.0))))


# ---------------------------------------------------------------------------
# Eberhard configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EberhardConfig:
    theta: float
    alice_angles: tuple
    bob_angles: tuple
    eta: float
    j_value: float

    @property
    def settings(self) -> MeasurementSettings:
        return MeasurementSettings(self.alice_angles, self.bob_angles, swap_alice=False)

    def behavior(self) -> Behavior:
        return one_pair_behavior(self.theta, self.eta, self.settings)


THETA_MIN = 1e-4


def correlator_grid(theta: float, eta: float, alice_angles, bob_angles) -> np.ndarray:
    """E(alpha, beta) of the lossy one-pair state for every angle pair (∅ -> +1)."""
    al = np.asarray(alice_angles, float)[:, None]
    be = np.asarray(bob_angles, float)[None, :]
    ct, st = math.cos(theta), math.sin(theta)
    # amplitudes for detector pairs (i, j)
    amp = {
        (0, 0): ct * np.cos(al) * np.sin(be) - st * np.sin(al) * np.cos(be),
        (0, 1): ct * np.cos(al) * np.cos(be) + st * np.sin(al) * np.sin(be),
        (1, 0): -ct * np.sin(al) * np.sin(be) - st * np.cos(al) * np.cos(be),
        (1, 1): -ct * np.sin(al) * np.cos(be) + st * np.cos(al) * np.sin(be),
    }
    P = {k: v * v for k, v in amp.items()}
    pa1 = P[(1, 0)] + P[(1, 1)]
    pb1 = P[(0, 1)] + P[(1, 1)]
    # E = 1 - 2 P(A=-1) - 2 P(B=-1) + 4 P(A=-1, B=-1)
    return 1.0 - 2 * eta * pa1 - 2 * eta * pb1 + 4 * eta * eta * P[(1, 1)]


def lifted_chsh(params, eta: float) -> float:
    """CHSH value minus 2 of the lossy one-pair behavior (∅ counted as +1)."""
    theta, a0, a1, b0, b1 = params
    E = correlator_grid(theta, eta, [a0, a1], [b0, b1])
    return float(E[0, 0] + E[0, 1] + E[1, 0] - E[1, 1] - 2.0)


def eberhard_settings(eta: float, starts: int = 12, seed: int = 0,
                      strict: bool = True) -> EberhardConfig:
    """State and angles maximizing the lifted CHSH violation at efficiency ``eta``.

    Multi-start Nelder-Mead over (theta, alpha0, alpha1, beta0, beta1) with
    theta mapped smoothly into (0, pi/4].  With ``strict=False`` an efficiency at or
    below 2/3 returns the best (non-violating) configuration instead of
    raising.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if strict and eta <= EBERHARD_LIMIT:
        raise BelowThresholdError(f"eta = {eta} is at or below the Eberhard limit 2/3")
    rng = np.random.default_rng(seed)
    span = math.pi / 4 - THETA_MIN

    def unpack(p):
        # theta = THETA_MIN + span sin^2(u) keeps theta in (0, pi/4] smoothly
        return np.concatenate(([THETA_MIN + span * math.sin(p[0]) ** 2], p[1:]))

    def cost(p):
        return -lifted_chsh(unpack(p), eta)

    guesses = [np.array([math.pi / 2, 0.0, math.pi / 4, math.pi / 8, -math.pi / 8])]
    while len(guesses) < starts:
        guesses.append(np.concatenate(([rng.uniform(0.05, math.pi / 2)],
                                       rng.uniform(-math.pi / 2, math.pi / 2, 4))))
    best = None
    for g0 in guesses:
        res = optimize.minimize(cost, g0, method="Nelder-Mead",
                                options={"xatol": 1e-8, "fatol": 1e-14, "maxiter": 20000,
                                         "maxfev": 40000})
        if best is None or res.fun < best.fun:
            best = res
    p = unpack(best.x)
    theta = p[0]
    j = lifted_chsh(p, eta)
    return EberhardConfig(float(theta), (float(p[1]), float(p[2])),
                          (float(p[3]), float(p[4])), float(eta), j)
