"""Vectorized Euler-Maruyama kernel (pure numpy reference backend).

Handles arbitrary Python potentials, so it also serves custom expression
models the compiled kernel cannot. Block accounting matches
``_kernels_numba.run_chunk`` draw for draw: every proposal for a path burns
ceil(K/2) blocks of its stream whether accepted or not.
"""

from __future__ import annotations

import numpy as np

from .rng import normal_matrix


def run_chunk(
    seed,
    path0,
    x0,
    blk0,
    rec_steps,
    dt,
    mu,
    boundary,
    R,
    L,
    dU,
    halfline,
    floor_eps,
    max_halvings,
    out,
    status,
):
    P, K = x0.shape
    nb = (K + 1) // 2
    one = np.int64(1) << np.int64(max_halvings)
    x = x0.astype(np.float64, copy=True)
    streams = (np.uint64(path0) + np.arange(P, dtype=np.uint64)).astype(np.uint64)
    blk = np.full(P, blk0, dtype=np.uint64)
    status.fill(-1)
    halvings = 0
    Lt = L.T.copy()
    step = 0
    for ri in range(len(rec_steps)):
        for _ in range(int(rec_steps[ri])):
            act = np.nonzero(status < 0)[0]
            if act.size:
                rem = np.full(act.size, one, dtype=np.int64)
                h_int = np.full(act.size, one, dtype=np.int64)
                consec = np.zeros(act.size, dtype=np.int64)
                while True:
                    ids = np.nonzero(rem > 0)[0]
                    if ids.size == 0:
                        break
                    rows = act[ids]
                    ht = np.minimum(h_int[ids], rem[ids])
                    h = dt * (ht.astype(np.float64) / float(one))
                    Z = normal_matrix(seed, streams[rows], blk[rows], K)
                    blk[rows] += np.uint64(nb)
                    xs = x[rows]
                    dr = np.broadcast_to(mu + boundary, (rows.size, K)).copy()
                    if K > 1:
                        y = xs[:, :-1] - xs[:, 1:]
                        dr += np.asarray(dU(y), dtype=np.float64) @ R
                    prop = xs + dr * h[:, None] + np.sqrt(h)[:, None] * (Z @ Lt)
                    if halfline and K > 1:
                        okm = np.all(prop[:, :-1] - prop[:, 1:] >= floor_eps, axis=1)
                    else:
                        okm = np.ones(rows.size, dtype=bool)
                    good = ids[okm]
                    x[act[good]] = prop[okm]
                    rem[good] -= ht[okm]
                    consec[good] = 0
                    if not okm.all():
                        bad = ids[~okm]
                        ht_bad = ht[~okm]
                        halvings += bad.size
                        consec[bad] += 1
                        dead = (consec[bad] >= max_halvings) | (ht_bad <= 1)
                        if dead.any():
                            status[act[bad[dead]]] = step
                            rem[bad[dead]] = 0
                        h_int[bad] = ht_bad >> 1
            step += 1
        out[ri] = x
    return halvings
