"""Pure-numpy fallback for the weighted group-demeaning kernel."""

import numpy as np


def demean_inplace(x, w, group_ids, group_counts, tol, max_sweeps):
    """Project out group means from every column of ``x``, in place.

    One sweep subtracts the weighted group mean of each column for every
    grouping dimension in turn (alternating projections).  Sweeps stop once
    the largest absolute change of any entry between consecutive sweeps
    falls below ``tol``.

    Parameters
    ----------
    x : ndarray, shape (n, k), float64, C-contiguous
        Columns to transform; overwritten with the within-transformed values.
    w : ndarray, shape (n,), float64
        Strictly positive observation weights.
    group_ids : sequence of ndarray, shape (n,), int64
        Dense group labels (0..G-1) for each grouping dimension.
    group_counts : sequence of int
        Number of groups per dimension.
    tol : float
        Sweep-to-sweep convergence threshold (max abs change).
    max_sweeps : int
        Hard cap on the number of sweeps.

    Returns
    -------
    int
        Number of sweeps performed.
    """
    n, k = x.shape
    wsums = [np.bincount(g, weights=w, minlength=ng) for g, ng in zip(group_ids, group_counts)]
    # Empty groups would divide by zero; guard keeps them inert.
    wsums = [np.where(s > 0.0, s, 1.0) for s in wsums]
    x_prev = np.empty_like(x)
    sweeps = 0
    for _ in range(max_sweeps):
        np.copyto(x_prev, x)
        for g, ng, ws in zip(group_ids, group_counts, wsums):
            for j in range(k):
                means = np.bincount(g, weights=w * x[:, j], minlength=ng) / ws
                x[:, j] -= means[g]
        sweeps += 1
        if np.abs(x - x_prev).max() < tol:
            break
    return sweeps
