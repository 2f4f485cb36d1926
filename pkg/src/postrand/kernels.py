"""Hot numeric loops, each with a numba and a pure-numpy implementation.

The public wrappers at the bottom pick the implementation according to
:data:`postrand._accel.USE_NUMBA`.  Both implementations consume exactly the
same inputs (random draws are made by the caller), so they return identical
results; ``tests/test_kernels.py`` checks this.

Outcome codes used throughout: 0, 1 for the two detectors, 2 for ``∅``.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

NO_CLICK = 2


# ---------------------------------------------------------------------------
# Fock space: polarization rotation of an N-photon two-mode state
# ---------------------------------------------------------------------------

@njit(cache=True)
def _rotation_matrix_nb(n_photons, phi):
    N = n_photons
    c = math.cos(phi)
    s = math.sin(phi)
    U = np.zeros((N + 1, N + 1))
    lf = np.empty(N + 1)
    for i in range(N + 1):
        lf[i] = math.lgamma(i + 1.0)
    for n in range(N + 1):
        m = N - n
        for i in range(n + 1):
            # H photon -> cos(phi) c0 - sin(phi) c1
            t1 = math.exp(lf[n] - lf[i] - lf[n - i]) * c ** i * (-s) ** (n - i)
            if t1 == 0.0:
                continue
            for j in range(m + 1):
                # V photon -> sin(phi) c0 + cos(phi) c1
                t2 = math.exp(lf[m] - lf[j] - lf[m - j]) * s ** j * c ** (m - j)
                k = i + j
                U[n, k] += t1 * t2
        for k in range(N + 1):
            U[n, k] *= math.exp(0.5 * (lf[k] + lf[N - k] - lf[n] - lf[m]))
    return U


def _rotation_matrix_np(n_photons, phi):
    N = n_photons
    c, s = math.cos(phi), math.sin(phi)
    lf = np.array([math.lgamma(i + 1.0) for i in range(N + 1)])
    U = np.zeros((N + 1, N + 1))
    for n in range(N + 1):
        m = N - n
        i = np.arange(n + 1)
        j = np.arange(m + 1)
        p1 = np.exp(lf[n] - lf[i] - lf[n - i]) * c ** i * (-s) ** (n - i)
        p2 = np.exp(lf[m] - lf[j] - lf[m - j]) * s ** j * c ** (m - j)
        U[n] = np.convolve(p1, p2)
    k = np.arange(N + 1)
    scale = np.exp(0.5 * (lf[k][None, :] + lf[N - k][None, :]
                          - lf[k][:, None] - lf[N - k][:, None]))
    return U * scale


# ---------------------------------------------------------------------------
# Threshold detectors: (k, N-k) photons on the two detectors -> {0, 1, ∅}
# ---------------------------------------------------------------------------

def click_weights(n_photons, eta):
    """Outcome distribution of a two-detector party for each photon split.

    Row ``k`` holds P(0), P(1), P(∅) when ``k`` photons reach detector 0 and
    ``n_photons - k`` reach detector 1.  Double clicks are binned with ``∅``.
    """
    k = np.arange(n_photons + 1)
    miss0 = (1.0 - eta) ** k
    miss1 = (1.0 - eta) ** (n_photons - k)
    out = np.empty((n_photons + 1, 3))
    out[:, 0] = (1.0 - miss0) * miss1
    out[:, 1] = miss0 * (1.0 - miss1)
    out[:, 2] = 1.0 - out[:, 0] - out[:, 1]
    return out


@njit(cache=True)
def _sector_joint_nb(amp, UA, UB, DA, DB):
    # amp[n]: amplitude of n photons in (aH, bV) and N-n in (aV, bH)
    N = amp.shape[0] - 1
    out = np.zeros((3, 3))
    for k in range(N + 1):
        for l in range(N + 1):
            a = 0.0
            for n in range(N + 1):
                if amp[n] != 0.0:
                    a += amp[n] * UA[n, k] * UB[N - n, l]
            p = a * a
            if p == 0.0:
                continue
            for oa in range(3):
                w = p * DA[k, oa]
                for ob in range(3):
                    out[oa, ob] += w * DB[l, ob]
    return out


def _sector_joint_np(amp, UA, UB, DA, DB):
    A = UA.T @ (amp[:, None] * UB[::-1, :])
    return DA.T @ (A * A) @ DB


# ---------------------------------------------------------------------------
# Non-i.i.d. source simulators
# ---------------------------------------------------------------------------

@njit(cache=True)
def _draw(cdf, u):
    k = 0
    last = cdf.shape[0] - 1
    while k < last and u >= cdf[k]:
        k += 1
    return k


@njit(cache=True)
def _example1_nb(n, u, cdf, a_of, b_of):
    a_out = np.full(n, NO_CLICK, np.int8)
    b_out = np.full(n, NO_CLICK, np.int8)
    meas = np.zeros(n, np.bool_)
    pos = 0
    i = 0
    while pos < n:
        k = _draw(cdf, u[i])
        i += 1
        a = a_of[k]
        b = b_of[k]
        a_out[pos] = a
        b_out[pos] = b
        meas[pos] = True
        pos += 1 + 2 * a + b
    return a_out, b_out, meas, i


def _example1_np(n, u, cdf, a_of, b_of):
    k = np.searchsorted(cdf, u, side="right")
    k = np.minimum(k, cdf.shape[0] - 1)
    a = a_of[k]
    b = b_of[k]
    starts = np.concatenate(([0], np.cumsum(1 + 2 * a.astype(np.int64) + b)))
    used = int(np.searchsorted(starts, n, side="left"))
    starts = starts[:used]
    a_out = np.full(n, NO_CLICK, np.int8)
    b_out = np.full(n, NO_CLICK, np.int8)
    meas = np.zeros(n, np.bool_)
    a_out[starts] = a[:used]
    b_out[starts] = b[:used]
    meas[starts] = True
    return a_out, b_out, meas, used


@njit(cache=True)
def _example2_nb(n, u_sel, u_out, u_lam, u_mu, u_fol, sel_cdf, box_cdf,
                 box_a, box_b, bob_cdf, p_lam0):
    # boxes 0,1,2 = P1,P2,P3; 3,4 = P'_0, P'_1
    a_out = np.empty(n, np.int8)
    b_out = np.empty(n, np.int8)
    box = np.empty(n, np.int8)
    lam = np.full(n, -1, np.int8)
    mu = np.full(n, -1, np.int8)
    pos = 0
    e = 0
    f = 0
    while pos < n:
        j = _draw(sel_cdf, u_sel[e])
        k = _draw(box_cdf[j], u_out[e])
        e += 1
        a = box_a[k]
        a_out[pos] = a
        b_out[pos] = box_b[k]
        box[pos] = j
        pos += 1
        if j != 2 or pos >= n:
            continue
        lm = 0 if u_lam[f] < p_lam0 else 1
        m = 0 if u_mu[f] < 0.5 else 1
        lam[pos] = lm
        mu[pos] = m
        box[pos] = 3 + lm
        if a == m:
            k = _draw(box_cdf[3 + lm], u_fol[f])
            a_out[pos] = box_a[k]
            b_out[pos] = box_b[k]
        else:
            a_out[pos] = NO_CLICK
            b_out[pos] = _draw(bob_cdf[lm], u_fol[f])
        f += 1
        pos += 1
    return a_out, b_out, box, lam, mu, e, f


def _example2_np(n, u_sel, u_out, u_lam, u_mu, u_fol, sel_cdf, box_cdf,
                 box_a, box_b, bob_cdf, p_lam0):
    j = np.minimum(np.searchsorted(sel_cdf, u_sel, side="right"), 2)
    k = np.empty(u_out.shape[0], np.int64)
    for jj in range(3):
        sel = j == jj
        k[sel] = np.searchsorted(box_cdf[jj], u_out[sel], side="right")
    k = np.minimum(k, box_cdf.shape[1] - 1)
    length = np.where(j == 2, 2, 1)
    starts = np.concatenate(([0], np.cumsum(length)))
    used = int(np.searchsorted(starts, n, side="left"))
    j, k, starts = j[:used], k[:used], starts[:used]
    a_out = np.empty(n, np.int8)
    b_out = np.empty(n, np.int8)
    box = np.empty(n, np.int8)
    lam = np.full(n, -1, np.int8)
    mu = np.full(n, -1, np.int8)
    a_first = box_a[k]
    a_out[starts] = a_first
    b_out[starts] = box_b[k]
    box[starts] = j
    fol = starts[(j == 2)] + 1
    a_prev = a_first[j == 2]
    keep = fol < n
    fol, a_prev = fol[keep], a_prev[keep]
    nf = fol.shape[0]
    lm = np.where(u_lam[:nf] < p_lam0, 0, 1)
    m = np.where(u_mu[:nf] < 0.5, 0, 1)
    lam[fol] = lm
    mu[fol] = m
    box[fol] = 3 + lm
    uf = u_fol[:nf]
    kf = np.empty(nf, np.int64)
    bf = np.empty(nf, np.int64)
    for l in range(2):
        sel = lm == l
        kf[sel] = np.searchsorted(box_cdf[3 + l], uf[sel], side="right")
        bf[sel] = np.searchsorted(bob_cdf[l], uf[sel], side="right")
    kf = np.minimum(kf, box_cdf.shape[1] - 1)
    bf = np.minimum(bf, bob_cdf.shape[1] - 1)
    same = a_prev == m
    a_out[fol] = np.where(same, box_a[kf], NO_CLICK)
    b_out[fol] = np.where(same, box_b[kf], bf)
    return a_out, b_out, box, lam, mu, used, nf


if USE_NUMBA:
    rotation_matrix = _rotation_matrix_nb
    sector_joint = _sector_joint_nb
    example1_kernel = _example1_nb
    example2_kernel = _example2_nb
else:
    rotation_matrix = _rotation_matrix_np
    sector_joint = _sector_joint_np
    example1_kernel = _example1_np
    example2_kernel = _example2_np
