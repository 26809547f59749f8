"""Pure-numpy fallback for the hot bank kernels.

Same call signatures as the compiled extension `harmclf._kernels`.  The bank
is passed in CSR form: `indptr[k]:indptr[k+1]` slices `indices` (pixel ids)
and `values` (integer frequencies stored as float64) for feature k.  The
`_lineage` variants receive, per feature, the id of the feature holding all
but the last support pixel (-1 for singletons), the last pixel itself, and
the support size; prefix ids always point to earlier features.

Feature k evaluated at a domain point x (already scaled to [0,pi]):
  cosine kind       prod_t cos(values[t] * x[indices[t]])
  holomorphic kind  exp(i * sum_t values[t] * x[indices[t]])
"""

import numpy as np

BACKEND = "python"

_CHUNK = 2_000_000  # max temporaries, in elements, for the grouped paths


def _check(X, indptr, indices, values):
    if X.ndim != 2:
        raise ValueError("X must be (N, n)")
    if indptr[0] != 0 or indptr[-1] != len(indices) or len(indices) != len(values):
        raise ValueError("inconsistent CSR bank")
    if np.any(np.diff(indptr) < 1):
        raise ValueError("bank features must have nonempty support")


def cos_design(X, indptr, indices, values):
    """Products of cosines over each feature's support; (N, K) float64."""
    _check(X, indptr, indices, values)
    out = np.empty((X.shape[0], len(indptr) - 1), dtype=np.float64)
    for lo in range(0, X.shape[0], max(1, _CHUNK // max(1, len(indices)))):
        hi = min(X.shape[0], lo + max(1, _CHUNK // max(1, len(indices))))
        terms = np.cos(values[None, :] * X[lo:hi, indices])
        out[lo:hi] = np.multiply.reduceat(terms, indptr[:-1], axis=1)
    return out


def phase_design(X, indptr, indices, values):
    """cos and sin of the support-sum phases; two (N, K) float64 arrays."""
    _check(X, indptr, indices, values)
    terms = values[None, :] * X[:, indices]
    phase = np.add.reduceat(terms, indptr[:-1], axis=1)
    return np.cos(phase), np.sin(phase)


def _by_size(sizes):
    for s in np.unique(sizes):
        yield int(s), np.nonzero(sizes == s)[0]


_SQRT2 = float(np.sqrt(2.0))


def cos_design_lineage(X, prefix, last, sizes, scales):
    ctab = np.cos(X)
    out = np.empty((X.shape[0], len(prefix)), dtype=np.float64)
    for s, feats in _by_size(sizes):
        if s == 1:
            out[:, feats] = _SQRT2 * ctab[:, last[feats]]
        else:
            out[:, feats] = (out[:, prefix[feats]] * scales[prefix[feats]]
                             * _SQRT2 * ctab[:, last[feats]])
        out[:, feats] /= scales[feats]
    return out


def holo_design_lineage(X, prefix, last, sizes, scales):
    ctab, stab = np.cos(X), np.sin(X)
    out = np.empty((X.shape[0], len(prefix)), dtype=np.complex128)
    for s, feats in _by_size(sizes):
        step = ctab[:, last[feats]] + 1j * stab[:, last[feats]]
        if s == 1:
            out[:, feats] = step
        else:
            out[:, feats] = out[:, prefix[feats]] * scales[prefix[feats]] * step
        out[:, feats] /= scales[feats]
    return out




def cos_input_grad(X, indptr, indices, values, G):
    """Scatter d(sum_k G[i,k] * prod-cos_k)/dx back onto pixels; (N, n)."""
    _check(X, indptr, indices, values)
    N, n = X.shape
    out = np.zeros((N, n), dtype=np.float64)
    rows = np.arange(N)[:, None, None]
    support_sizes = np.diff(indptr)
    for s, feats in _by_size(support_sizes):
        step = max(1, _CHUNK // (N * s))
        for lo in range(0, len(feats), step):
            fs = feats[lo:lo + step]
            cols = indices[indptr[fs][:, None] + np.arange(s)[None, :]]
            vals = values[indptr[fs][:, None] + np.arange(s)[None, :]]
            T = vals[None, :, :] * X[:, cols]
            C = np.cos(T)
            S = np.sin(T)
            # leave-one-out products via prefix/suffix cumprods
            pref = np.ones_like(C)
            suf = np.ones_like(C)
            if s > 1:
                pref[:, :, 1:] = np.cumprod(C[:, :, :-1], axis=2)
                suf[:, :, :-1] = np.cumprod(C[:, :, :0:-1], axis=2)[:, :, ::-1]
            contrib = G[:, fs, None] * (-vals[None, :, :] * S) * pref * suf
            np.add.at(out, (rows, cols[None, :, :]), contrib)
    return out


def phase_input_grad(n, indptr, indices, values, E):
    """Scatter sum_k E[i,k]*values onto each feature's support pixels; (N, n)."""
    N = E.shape[0]
    out = np.zeros((N, n), dtype=np.float64)
    rows = np.arange(N)[:, None, None]
    support_sizes = np.diff(indptr)
    for s, feats in _by_size(support_sizes):
        step = max(1, _CHUNK // (N * s))
        for lo in range(0, len(feats), step):
            fs = feats[lo:lo + step]
            cols = indices[indptr[fs][:, None] + np.arange(s)[None, :]]
            vals = values[indptr[fs][:, None] + np.arange(s)[None, :]]
            contrib = E[:, fs, None] * vals[None, :, :]
            np.add.at(out, (rows, cols[None, :, :]), contrib)
    return out


def holo_input_grad(n, indptr, indices, values, QW, PSI):
    """Phase-coefficient scatter with e = -Im(qw * psi); scales cancel."""
    E = np.ascontiguousarray(-(QW * PSI).imag)
    return phase_input_grad(n, indptr, indices, values, E)
