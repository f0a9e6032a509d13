"""Hot numeric kernels with numba and pure-numpy implementations.

Two loops dominate profile time and get a compiled lane: the causal IIR
difference equation and the per-trial accumulation of the canonical
correlation trace objective and its gradient. Everything else in the package
is batched LAPACK work where numba buys nothing.

The active lane is chosen per call through ``_backend.numba_enabled`` so the
``SPELLERSEC_NUMBA`` flag can be evaluated without re-importing.
"""

import numpy as np
from scipy import signal as _scipy_signal

from ._backend import numba_enabled

try:
    from numba import njit

    _HAS_NUMBA = True
except ImportError:  # pragma: no cover
    _HAS_NUMBA = False

    def njit(*args, **kwargs):  # pragma: no cover
        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


def _pad_ba(b, a):
    b = np.asarray(b, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    m = max(b.size, a.size)
    bp = np.zeros(m)
    ap = np.zeros(m)
    bp[: b.size] = b
    ap[: a.size] = a
    bp /= ap[0]
    ap /= ap[0]
    return bp, ap


@njit(cache=True)
def _iir_numba(b, a, x):
    n_ch, n_s = x.shape
    m = b.size
    y = np.empty((n_ch, n_s))
    z = np.empty(m - 1)
    for c in range(n_ch):
        z[:] = 0.0
        for n in range(n_s):
            xn = x[c, n]
            yn = b[0] * xn + z[0]
            for k in range(m - 2):
                z[k] = b[k + 1] * xn + z[k + 1] - a[k + 1] * yn
            z[m - 2] = b[m - 1] * xn - a[m - 1] * yn
            y[c, n] = yn
    return y


def _iir_numpy(b, a, x):
    return _scipy_signal.lfilter(b, a, x, axis=-1)


def iir_filter(b, a, x):
    """Causal IIR filtering along the last axis, zero initial state.

    Transposed direct-form II; both lanes realize the same difference
    equation.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    bp, ap = _pad_ba(b, a)
    if bp.size < 2:
        y = bp[0] * x
    elif numba_enabled() and _HAS_NUMBA:
        y = _iir_numba(bp, ap, x)
    else:
        y = _iir_numpy(bp, ap, x)
    return y[0] if squeeze else y


@njit(cache=True)
def _trace_grad_numba(windows, delta, yn, gy_inv, loading):
    n_tr, n_ch, n_s = windows.shape
    n_h = yn.shape[0]
    ident = np.eye(n_ch)
    total = 0.0
    grad = np.zeros((n_ch, n_s))
    a_mat = np.empty((n_ch, n_s))
    sd = np.empty(n_ch)
    for i in range(n_tr):
        for c in range(n_ch):
            mu = 0.0
            for t in range(n_s):
                mu += windows[i, c, t] + delta[c, t]
            mu /= n_s
            var = 0.0
            for t in range(n_s):
                d = windows[i, c, t] + delta[c, t] - mu
                a_mat[c, t] = d
                var += d * d
            var /= n_s
            if var <= 0.0:
                raise ValueError("constant channel in analysis window")
            s = np.sqrt(var)
            sd[c] = s
            for t in range(n_s):
                a_mat[c, t] /= s
        g_mat = a_mat @ a_mat.T
        tr_g = 0.0
        for c in range(n_ch):
            tr_g += g_mat[c, c]
        g_mat = g_mat + (loading * tr_g / n_ch) * ident
        p_mat = a_mat @ yn.T
        r1 = np.linalg.solve(g_mat, p_mat)
        r2 = p_mat @ gy_inv
        for c in range(n_ch):
            for h in range(n_h):
                total += r1[c, h] * r2[c, h]
        k_mat = r2 @ p_mat.T
        ga = np.linalg.solve(g_mat, a_mat)
        grad_a = 2.0 * np.linalg.solve(g_mat, r2 @ yn - k_mat @ ga)
        for c in range(n_ch):
            gbar = 0.0
            gadot = 0.0
            for t in range(n_s):
                gbar += grad_a[c, t]
                gadot += grad_a[c, t] * a_mat[c, t]
            gbar /= n_s
            gadot /= n_s
            for t in range(n_s):
                grad[c, t] += (grad_a[c, t] - gbar - a_mat[c, t] * gadot) / sd[c]
    return total, grad


def _trace_grad_numpy(windows, delta, yn, gy_inv, loading):
    n_tr, n_ch, n_s = windows.shape
    v = windows + delta[None, :, :]
    mu = v.mean(axis=2, keepdims=True)
    sd = v.std(axis=2, keepdims=True)
    if np.any(sd == 0.0):
        raise ValueError("constant channel in analysis window")
    a = (v - mu) / sd
    g = a @ a.transpose(0, 2, 1)
    tr_g = np.trace(g, axis1=1, axis2=2)
    g = g + (loading * tr_g / n_ch)[:, None, None] * np.eye(n_ch)[None]
    p = a @ yn.T
    r1 = np.linalg.solve(g, p)
    r2 = p @ gy_inv
    total = float(np.sum(r1 * r2))
    k = r2 @ p.transpose(0, 2, 1)
    ga = np.linalg.solve(g, a)
    grad_a = 2.0 * np.linalg.solve(g, r2 @ yn - k @ ga)
    gbar = grad_a.mean(axis=2, keepdims=True)
    gadot = (grad_a * a).mean(axis=2, keepdims=True)
    grad_v = (grad_a - gbar - a * gadot) / sd
    return total, grad_v.sum(axis=0)


def ssvep_trace_grad(windows, delta, yn, gy_inv, loading):
    """Summed trace objective and its gradient over a crafting set.

    Parameters
    ----------
    windows : ndarray
        Filtered analysis windows, shape [n_trials x n_channels x n_samples].
    delta : ndarray
        Shared perturbation added to every window, [n_channels x n_samples].
    yn : ndarray
        Z-normalized reference rows, [n_harm_rows x n_samples].
    gy_inv : ndarray
        Inverse of the loaded reference Gram matrix.
    loading : float
        Relative diagonal loading for the data Gram matrix.

    Returns
    -------
    total : float
        Sum over trials of tr(S) at the perturbed, z-normalized windows.
    grad : ndarray
        Gradient of ``total`` with respect to ``delta``, same shape as delta.
    """
    windows = np.ascontiguousarray(windows, dtype=np.float64)
    delta = np.ascontiguousarray(delta, dtype=np.float64)
    yn = np.ascontiguousarray(yn, dtype=np.float64)
    gy_inv = np.ascontiguousarray(gy_inv, dtype=np.float64)
    if numba_enabled() and _HAS_NUMBA:
        return _trace_grad_numba(windows, delta, yn, gy_inv, float(loading))
    return _trace_grad_numpy(windows, delta, yn, gy_inv, float(loading))
