"""Cyclic (periodic) banded linear solves.

The periodic matrix is split into its banded part plus the wrap-around
corner blocks; the banded part goes to LAPACK via ``solve_banded`` and the
corners are folded back in with the Woodbury identity.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve, solve_banded


def cyclic_to_dense(diagonals: dict[int, np.ndarray]) -> np.ndarray:
    """Dense matrix with ``A[j, (j+k) % n] = diagonals[k][j]``."""
    n = len(next(iter(diagonals.values())))
    A = np.zeros((n, n))
    rows = np.arange(n)
    for k, d in diagonals.items():
        np.add.at(A, (rows, (rows + k) % n), d)
    return A


def solve_cyclic_banded(diagonals: dict[int, np.ndarray], b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for a periodic banded ``A``.

    Parameters
    ----------
    diagonals : dict
        Offset ``k`` -> array ``d`` of length n, meaning ``A[j, (j+k) % n] = d[j]``.
        Offsets must satisfy ``|k| < n / 2``.
    b : ndarray, shape (n,) or (n, r)
    """
    n = len(b)
    l = max(0, -min(diagonals))
    u = max(0, max(diagonals))
    if 2 * max(l, u) + 1 > n:
        return solve(cyclic_to_dense(diagonals), b)
    ab = np.zeros((l + u + 1, n))
    # corners: entries whose column wrapped around
    rows, cols, vals = [], [], []
    for k, d in diagonals.items():
        j = np.arange(n)
        c = j + k
        inside = (c >= 0) & (c < n)
        ab[u - k, c[inside]] = d[inside]
        rows.append(j[~inside])
        cols.append(c[~inside] % n)
        vals.append(d[~inside])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    if rows.size == 0:
        return solve_banded((l, u), ab, b)
    # A = B + U V^T with U = e_rows * vals, V = e_cols
    ucols = np.unique(cols)
    U = np.zeros((n, ucols.size))
    col_index = {c: k for k, c in enumerate(ucols)}
    for r, c, v in zip(rows, cols, vals):
        U[r, col_index[c]] += v
    rhs = np.column_stack([b.reshape(n, -1), U])
    sol = solve_banded((l, u), ab, rhs)
    y = sol[:, : rhs.shape[1] - ucols.size]
    Z = sol[:, rhs.shape[1] - ucols.size:]
    small = np.eye(ucols.size) + Z[ucols]
    x = y - Z @ solve(small, y[ucols])
    return x.reshape(b.shape)
