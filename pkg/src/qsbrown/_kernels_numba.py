"""Compiled per-path Euler-Maruyama kernel.

Scalar transcription of the vectorized reference in ``_kernels_numpy``; the
two must consume random blocks in exactly the same order. Potentials are
dispatched by integer code (0 free, 1 gamma-type, 2 log-gamma); anything else
cannot run here and the driver falls back to the vectorized kernel.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install requirement
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_INV53 = 2.0**-53
_TWO_PI = 6.283185307179586


@njit(cache=True, inline="always")
def _block_normals(k0_init, k1_init, stream, blk):
    c0 = blk & _MASK32
    c1 = blk >> _SH32
    c2 = stream & _MASK32
    c3 = stream >> _SH32
    k0 = k0_init
    k1 = k1_init
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0 = (p1 >> _SH32) ^ c1 ^ k0
        c1 = p1 & _MASK32
        c2 = (p0 >> _SH32) ^ c3 ^ k1
        c3 = p0 & _MASK32
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    u1 = (((c0 << _SH32) | c1) >> _SH11) * _INV53
    u2 = (((c2 << _SH32) | c3) >> _SH11) * _INV53
    r = math.sqrt(-2.0 * math.log(1.0 - u1))
    th = _TWO_PI * u2
    return r * math.cos(th), r * math.sin(th)


@njit(cache=True, inline="always")
def _du(code, p0, p1, y):
    if code == 1:
        return p0 / y - p1
    if code == 2:
        return 0.5 * math.exp(-y) - 0.5 * p0
    return 0.0


@njit(cache=True, nogil=True)
def run_chunk(
    seed_lo,
    seed_hi,
    path0,
    x0,
    blk0,
    rec_steps,
    dt,
    mu,
    boundary,
    R,
    L,
    d,
    code,
    p0,
    p1,
    halfline,
    floor_eps,
    max_halvings,
    out,
    status,
):
    P, K = x0.shape
    nb = (K + 1) // 2
    one = np.int64(1) << np.int64(max_halvings)
    halvings = np.int64(0)
    x = np.empty(K)
    prop = np.empty(K)
    zbuf = np.empty(2 * nb)
    du = np.empty(max(K - 1, 1))
    for p in range(P):
        stream = np.uint64(path0 + p)
        blk = np.uint64(blk0)
        for kk in range(K):
            x[kk] = x0[p, kk]
        stuck = False
        step = np.int64(0)
        for ri in range(rec_steps.shape[0]):
            for _ in range(rec_steps[ri]):
                if stuck:
                    break
                rem = one
                h_int = one
                consec = 0
                while rem > 0:
                    ht = h_int if h_int < rem else rem
                    h = dt * (float(ht) / float(one))
                    sq = math.sqrt(h)
                    for j in range(nb):
                        z1, z2 = _block_normals(seed_lo, seed_hi, stream, blk)
                        blk += np.uint64(1)
                        zbuf[2 * j] = z1
                        zbuf[2 * j + 1] = z2
                    for l in range(K - 1):
                        du[l] = _du(code, p0, p1, x[l] - x[l + 1])
                    ok = True
                    for kk in range(K):
                        dr = mu[kk] + boundary[kk]
                        lmax = kk + d - 1
                        if lmax > K - 2:
                            lmax = K - 2
                        for l in range(kk, lmax + 1):
                            dr += du[l] * R[l, kk]
                        noise = 0.0
                        for j in range(kk + 1):
                            noise += L[kk, j] * zbuf[j]
                        prop[kk] = x[kk] + dr * h + sq * noise
                    if halfline:
                        for kk in range(K - 1):
                            if prop[kk] - prop[kk + 1] < floor_eps:
                                ok = False
                                break
                    if ok:
                        for kk in range(K):
                            x[kk] = prop[kk]
                        rem -= ht
                        consec = 0
                    else:
                        halvings += 1
                        consec += 1
                        if consec >= max_halvings or ht <= 1:
                            stuck = True
                            status[p] = step
                            break
                        h_int = ht >> 1
                step += 1
            for kk in range(K):
                out[ri, p, kk] = x[kk]
        if not stuck:
            status[p] = -1
    return halvings
