"""Fused single-pass kernel evaluation.

One pass over the embedding rows yields the kernel weights together with every
moment the analytic gradient needs. Rows are processed in fixed-size chunks and
each chunk writes its own partial sums, which are reduced afterwards in chunk
order, so results do not depend on how many threads numba uses.

The quadratic form is summed in ``LANES`` interleaved partial sums combined in a
fixed tree. That lets LLVM vectorize it without ``reassoc``, which would make
the summation order (and the last bits of every weight) depend on memory layout.
"""

import numba as nb
import numpy as np

# the system TBB is too old for numba; never probe it
nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

QUAD_CLAMP = 700.0
CHUNK_ROWS = 2048
LANES = 8

# scalar partial sums per chunk
S_K, S_KL, S_KQ, S_KLQ = 0, 1, 2, 3
# vector partial sums per chunk: k*t, k*l*t, k*t^2, k*l*t^2 with t = x - center
V_KT, V_KLT, V_KTT, V_KLTT = 0, 1, 2, 3


@nb.njit(parallel=True, cache=True, fastmath={"contract"})
def _fused_pass(X, center, precision, losses, want_grad, k_out, scal, vec):
    n, d = X.shape
    nchunks = scal.shape[0]
    spherical = precision.shape[0] == 1
    for ci in nb.prange(nchunks):
        lo = ci * CHUNK_ROWS
        hi = min(n, lo + CHUNK_ROWS)
        t = np.empty(d)
        w = np.empty(d)
        kt = np.zeros(d)
        klt = np.zeros(d)
        ktt = np.zeros(d)
        kltt = np.zeros(d)
        s_k = 0.0
        s_kl = 0.0
        s_kq = 0.0
        s_klq = 0.0
        full = d - d % LANES
        for i in range(lo, hi):
            for j in range(d):
                t[j] = X[i, j] - center[j]
            if spherical:
                for j in range(d):
                    w[j] = t[j] * t[j]
            else:
                for j in range(d):
                    w[j] = precision[j] * t[j] * t[j]
            a0 = a1 = a2 = a3 = a4 = a5 = a6 = a7 = 0.0
            for jb in range(0, full, LANES):
                a0 += w[jb]
                a1 += w[jb + 1]
                a2 += w[jb + 2]
                a3 += w[jb + 3]
                a4 += w[jb + 4]
                a5 += w[jb + 5]
                a6 += w[jb + 6]
                a7 += w[jb + 7]
            for j in range(full, d):
                a0 += w[j]
            q = ((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))
            if spherical:
                q *= 0.5 * precision[0]
            else:
                q *= 0.5
            clamped = q > QUAD_CLAMP
            if clamped:
                q = QUAD_CLAMP
            k = np.exp(-q)
            k_out[i] = k
            li = losses[i]
            kl = k * li
            s_k += k
            s_kl += kl
            if want_grad and not clamped:
                s_kq += k * q
                s_klq += kl * q
                for j in range(d):
                    kt[j] += k * t[j]
                    klt[j] += kl * t[j]
                if not spherical:
                    for j in range(d):
                        tt = t[j] * t[j]
                        ktt[j] += k * tt
                        kltt[j] += kl * tt
        scal[ci, S_K] = s_k
        scal[ci, S_KL] = s_kl
        scal[ci, S_KQ] = s_kq
        scal[ci, S_KLQ] = s_klq
        vec[ci, V_KT, :] = kt
        vec[ci, V_KLT, :] = klt
        vec[ci, V_KTT, :] = ktt
        vec[ci, V_KLTT, :] = kltt


def fused_pass(X, center, precision, losses, want_grad=True):
    """Return ``(weights, scalar_sums, vector_sums)`` reduced across chunks."""
    n, d = X.shape
    nchunks = (n + CHUNK_ROWS - 1) // CHUNK_ROWS
    k_out = np.empty(n, dtype=np.float64)
    scal = np.zeros((nchunks, 4), dtype=np.float64)
    vec = np.zeros((nchunks, 4, d), dtype=np.float64)
    _fused_pass(
        X,
        np.ascontiguousarray(center, dtype=np.float64),
        np.ascontiguousarray(precision, dtype=np.float64),
        losses,
        want_grad,
        k_out,
        scal,
        vec,
    )
    # sequential, chunk-ordered reduction
    scal_tot = np.zeros(4)
    vec_tot = np.zeros((4, d))
    for ci in range(nchunks):
        scal_tot += scal[ci]
        vec_tot += vec[ci]
    return k_out, scal_tot, vec_tot
