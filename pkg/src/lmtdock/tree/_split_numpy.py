"""Pure-numpy split kernel: prefix sufficient statistics along a sort order.

Gathers the rows into sorted order and runs one BLAS product per segment.
"""

from __future__ import annotations

import numpy as np


def segment_prefix_stats(Z, Y, order, bounds):
    """Prefix regression statistics at the given row counts of a sort order.

    Z: (n, dz) regressor matrix (whole dataset, C-contiguous).
    Y: (n, dy) targets.
    order: int64 row indices of this node sorted by the candidate feature.
    bounds: strictly increasing int64 positions into `order`, last == len(order).

    Returns (szz, szy, syy) where row b holds the statistics of the rows
    order[:bounds[b]]: szz is the upper triangle of Zs^T Zs packed row-major,
    szy the flattened (dz, dy) cross moments, syy the per-output squared sums.
    """
    Zs = Z[order]
    Ys = Y[order]
    dz = Zs.shape[1]
    dy = Ys.shape[1]
    nb = len(bounds)
    iu = np.triu_indices(dz)
    szz = np.empty((nb, dz * (dz + 1) // 2))
    szy = np.empty((nb, dz * dy))
    syy = np.empty((nb, dy))
    acc_zz = np.zeros((dz, dz))
    acc_zy = np.zeros((dz, dy))
    acc_yy = np.zeros(dy)
    start = 0
    for b, end in enumerate(bounds):
        if end > start:
            zi = Zs[start:end]
            yi = Ys[start:end]
            acc_zz += zi.T @ zi
            acc_zy += zi.T @ yi
            acc_yy += np.einsum("ij,ij->j", yi, yi)
            start = end
        szz[b] = acc_zz[iu]
        szy[b] = acc_zy.ravel()
        syy[b] = acc_yy
    return szz, szy, syy
