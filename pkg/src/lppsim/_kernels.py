"""Numba kernels for the hot loops: weight hashing, DP sweeps, backtracking.

All kernels are compiled nogil so independent trials can run on a thread
pool; none of them touches shared mutable state.
"""

import numpy as np
from numba import boolean, njit, float64, int64, uint64

# splitmix64 increment; also used to key the per-coordinate hash chain.
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# (h >> 11) * 2^-53 maps a 64-bit hash to a uniform on [0, 1 - 2^-53].
_UNIFORM_SCALE = 2.0 ** -53


@njit(uint64(uint64), cache=True, nogil=True)
def mix64(z):
    """splitmix64 finalizer: bijective 64-bit scramble with full avalanche."""
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(uint64(uint64, int64, int64), cache=True, nogil=True)
def coord_hash(seed, x, y):
    """Stateless hash of (seed, x, y); coordinates enter as two's complement."""
    h = mix64(seed + uint64(GOLDEN_GAMMA))
    h = mix64((h ^ uint64(y)) + uint64(GOLDEN_GAMMA))
    h = mix64((h ^ uint64(x)) + uint64(GOLDEN_GAMMA))
    return h


@njit(float64(uint64, int64, int64), cache=True, nogil=True)
def uniform_at(seed, x, y):
    return (coord_hash(seed, x, y) >> uint64(11)) * _UNIFORM_SCALE


@njit((uint64, int64, int64, float64[:, :]), cache=True, nogil=True)
def fill_neg_uniforms(seed, x0, y0, out):
    """Write MINUS the uniform for lattice point (x0+i, y0+j) into out[j, i].

    The sign lets the caller apply np.log1p in place to get ln(1 - u); the
    y stage of the hash chain is hoisted out of the inner loop, bit-identical
    to calling uniform_at per cell.
    """
    ny, nx = out.shape
    h0 = mix64(seed + uint64(GOLDEN_GAMMA))
    for j in range(ny):
        hy = mix64((h0 ^ uint64(y0 + j)) + uint64(GOLDEN_GAMMA))
        for i in range(nx):
            h = mix64((hy ^ uint64(x0 + i)) + uint64(GOLDEN_GAMMA))
            out[j, i] = -((h >> uint64(11)) * _UNIFORM_SCALE)


@njit((float64[:, :],), cache=True, nogil=True)
def sweep_to_sink(v):
    """In-place reverse DP: on entry v holds weights, on exit passage times.

    v[j, i] becomes the maximal path weight from (i, j) to the top-right
    corner (the sink), moving only +x or +y.  Rows are processed in pairs
    with the lower row lagging one column, which interleaves two independent
    dependency chains (about 2x faster); every cell still computes exactly
    w + max(right, up), so the output is bit-identical to the naive sweep.
    """
    ny, nx = v.shape
    if nx == 1:
        for j in range(ny - 2, -1, -1):
            v[j, 0] += v[j + 1, 0]
        return
    for i in range(nx - 2, -1, -1):
        v[ny - 1, i] += v[ny - 1, i + 1]
    j = ny - 2
    while j >= 1:
        # row j up to column nx-2, and row j-1's right edge
        v[j, nx - 1] += v[j + 1, nx - 1]
        r = v[j, nx - 1]
        b = v[j + 1, nx - 2]
        v[j, nx - 2] += r if r >= b else b
        v[j - 1, nx - 1] += v[j, nx - 1]
        for i in range(nx - 3, -1, -1):
            r0 = v[j, i + 1]
            b0 = v[j + 1, i]
            v[j, i] += r0 if r0 >= b0 else b0
            r1 = v[j - 1, i + 2]
            b1 = v[j, i + 1]
            v[j - 1, i + 1] += r1 if r1 >= b1 else b1
        r1 = v[j - 1, 1]
        b1 = v[j, 0]
        v[j - 1, 0] += r1 if r1 >= b1 else b1
        j -= 2
    if j == 0:
        v[0, nx - 1] += v[1, nx - 1]
        for i in range(nx - 2, -1, -1):
            a = v[0, i + 1]
            b = v[1, i]
            v[0, i] += a if a >= b else b


@njit(int64[:](float64[:, :], int64, int64), cache=True, nogil=True)
def backtrack_xs(v, i0, j0):
    """Greedy path from (i0, j0) to the sink corner on a to-sink value grid.

    Returns the i-index at each step; the j-index is implied because every
    step increments i or j by one.  Ties step +x, the right-most convention.
    """
    ny, nx = v.shape
    n_steps = (nx - 1 - i0) + (ny - 1 - j0)
    xs = np.empty(n_steps + 1, np.int64)
    i, j = i0, j0
    xs[0] = i
    for t in range(1, n_steps + 1):
        if i == nx - 1:
            j += 1
        elif j == ny - 1:
            i += 1
        elif v[j, i + 1] >= v[j + 1, i]:
            i += 1
        else:
            j += 1
        xs[t] = i
    return xs


@njit(float64[:, :](float64[:, :], boolean[:, :]), cache=True, nogil=True)
def sweep_from_sources(w, is_source):
    """Forward DP: value[j, i] = max over sources a of T(a -> (i, j)).

    Cells unreachable from every source stay at -inf.
    """
    ny, nx = w.shape
    v = np.empty((ny, nx), np.float64)
    neg_inf = -np.inf
    for j in range(ny):
        for i in range(nx):
            m = neg_inf
            if i > 0 and v[j, i - 1] > m:
                m = v[j, i - 1]
            if j > 0 and v[j - 1, i] > m:
                m = v[j - 1, i]
            if is_source[j, i] and m < 0.0:
                m = 0.0
            v[j, i] = w[j, i] + m if m > neg_inf else neg_inf
    return v
