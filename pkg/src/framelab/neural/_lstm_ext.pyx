# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled plain-LSTM sequence kernels.

Same contract as ``_fallback.lstm_seq_forward`` / ``lstm_seq_backward``:
time-major float64 inputs, gate order ``i, f, g, o``.  The whole time loop
runs without the GIL; matrix products go through BLAS dgemm on row-major
buffers by computing the transposed product in column-major terms.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _sig(double z) noexcept nogil:
    cdef double e = exp(-fabs(z))
    return 1.0 / (1.0 + e) if z >= 0 else e / (1.0 + e)


cdef inline double _tanh(double z) noexcept nogil:
    # one exp instead of libm tanh, which is several times slower here
    cdef double e = exp(-2.0 * fabs(z))
    cdef double r = (1.0 - e) / (1.0 + e)
    return r if z >= 0 else -r


cdef inline void _gemm(char ta, char tb, int m, int n, int k,
                       double *a, int lda, double *b, int ldb,
                       double beta, double *c, int ldc) noexcept nogil:
    cdef double one = 1.0
    dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)


def lstm_seq_forward(xs, params):
    cdef double[:, :, ::1] X = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[:, ::1] Wx = np.ascontiguousarray(params["Wx"], dtype=np.float64)
    cdef double[:, ::1] Wh = np.ascontiguousarray(params["Wh"], dtype=np.float64)
    cdef double[::1] bias = np.ascontiguousarray(params["b"], dtype=np.float64).ravel()
    cdef int T = X.shape[0], B = X.shape[1], D = X.shape[2]
    cdef int H = Wh.shape[0], G = 4 * Wh.shape[0]
    if Wx.shape[0] != D or Wx.shape[1] != G or Wh.shape[1] != G or bias.shape[0] != G:
        raise ValueError(f"lstm kernel: shape mismatch {xs.shape} vs {params['Wx'].shape}")

    acts_arr = np.empty((T, B, G))
    cell_arr = np.empty((T, B, H))
    tcell_arr = np.empty((T, B, H))
    out_arr = np.empty((T, B, H))
    cdef double[:, :, ::1] A = acts_arr
    cdef double[:, :, ::1] C = cell_arr
    cdef double[:, :, ::1] TC = tcell_arr
    cdef double[:, :, ::1] Hs = out_arr
    cdef double[:, :, ::1] Z = np.empty((T, B, G))
    cdef int t, r, j
    cdef double cp, ig, fg, gg, og, c

    with nogil:
        # input projection for every step in one product
        _gemm(b'N', b'N', G, T * B, D, &Wx[0, 0], G, &X[0, 0, 0], D, 0.0, &Z[0, 0, 0], G)
        for t in range(T):
            if t > 0:
                _gemm(b'N', b'N', G, B, H, &Wh[0, 0], G, &Hs[t - 1, 0, 0], H, 1.0,
                      &Z[t, 0, 0], G)
            for r in range(B):
                for j in range(H):
                    ig = _sig(Z[t, r, j] + bias[j])
                    fg = _sig(Z[t, r, H + j] + bias[H + j])
                    gg = _tanh(Z[t, r, 2 * H + j] + bias[2 * H + j])
                    og = _sig(Z[t, r, 3 * H + j] + bias[3 * H + j])
                    cp = C[t - 1, r, j] if t > 0 else 0.0
                    c = fg * cp + ig * gg
                    A[t, r, j] = ig
                    A[t, r, H + j] = fg
                    A[t, r, 2 * H + j] = gg
                    A[t, r, 3 * H + j] = og
                    C[t, r, j] = c
                    TC[t, r, j] = _tanh(c)
                    Hs[t, r, j] = og * TC[t, r, j]
    cache = (np.asarray(X), np.asarray(Wx), np.asarray(Wh),
             acts_arr, cell_arr, tcell_arr, out_arr)
    return out_arr, cache


def lstm_seq_backward(d_out, cache):
    xs, wx, wh, acts_arr, cell_arr, tcell_arr, out_arr = cache
    cdef double[:, :, ::1] dH = np.ascontiguousarray(d_out, dtype=np.float64)
    cdef double[:, :, ::1] X = xs
    cdef double[:, ::1] Wx = wx
    cdef double[:, ::1] Wh = wh
    cdef double[:, :, ::1] A = acts_arr
    cdef double[:, :, ::1] C = cell_arr
    cdef double[:, :, ::1] TC = tcell_arr
    cdef double[:, :, ::1] Hs = out_arr
    cdef int T = X.shape[0], B = X.shape[1], D = X.shape[2]
    cdef int H = Wh.shape[0], G = 4 * Wh.shape[0]
    if dH.shape[0] != T or dH.shape[1] != B or dH.shape[2] != H:
        raise ValueError(f"lstm kernel: shape mismatch {d_out.shape} vs {out_arr.shape}")

    dx_arr = np.empty((T, B, D))
    dwx_arr = np.zeros((D, G))
    dwh_arr = np.zeros((H, G))
    db_arr = np.zeros((1, G))
    cdef double[:, :, ::1] dX = dx_arr
    cdef double[:, ::1] dWx = dwx_arr
    cdef double[:, ::1] dWh = dwh_arr
    cdef double[:, ::1] db = db_arr
    cdef double[:, :, ::1] dZ = np.empty((T, B, G))
    cdef double[:, ::1] dh = np.zeros((B, H))
    cdef double[:, ::1] dc = np.zeros((B, H))
    cdef int t, r, j
    cdef double ig, fg, gg, og, tc, dht, dct, cp

    with nogil:
        for t in range(T - 1, -1, -1):
            for r in range(B):
                for j in range(H):
                    ig = A[t, r, j]
                    fg = A[t, r, H + j]
                    gg = A[t, r, 2 * H + j]
                    og = A[t, r, 3 * H + j]
                    tc = TC[t, r, j]
                    cp = C[t - 1, r, j] if t > 0 else 0.0
                    dht = dH[t, r, j] + dh[r, j]
                    dct = dht * og * (1.0 - tc * tc) + dc[r, j]
                    dZ[t, r, j] = dct * gg * ig * (1.0 - ig)
                    dZ[t, r, H + j] = dct * cp * fg * (1.0 - fg)
                    dZ[t, r, 2 * H + j] = dct * ig * (1.0 - gg * gg)
                    dZ[t, r, 3 * H + j] = dht * tc * og * (1.0 - og)
                    dc[r, j] = dct * fg
            if t > 0:
                _gemm(b'N', b'T', G, H, B, &dZ[t, 0, 0], G, &Hs[t - 1, 0, 0], H, 1.0,
                      &dWh[0, 0], G)
            _gemm(b'T', b'N', H, B, G, &Wh[0, 0], G, &dZ[t, 0, 0], G, 0.0, &dh[0, 0], H)
        # input-side gradients for every step at once
        for t in range(T):
            for r in range(B):
                for j in range(G):
                    db[0, j] += dZ[t, r, j]
        _gemm(b'N', b'T', G, D, T * B, &dZ[0, 0, 0], G, &X[0, 0, 0], D, 0.0, &dWx[0, 0], G)
        _gemm(b'T', b'N', D, T * B, G, &Wx[0, 0], G, &dZ[0, 0, 0], G, 0.0, &dX[0, 0, 0], D)
    return dx_arr, {"Wx": dwx_arr, "Wh": dwh_arr, "b": db_arr}
