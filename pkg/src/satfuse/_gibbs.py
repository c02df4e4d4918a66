"""Numba kernels for collapsed Gibbs sampling.

All randomness enters through pre-generated uniform arrays, so results are
fully determined by the caller's numpy Generator and never depend on numba's
internal RNG state.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def train_sweep(tokens, doc_ptr, z, ndk, nkw, nk, alpha, beta, u):
    """One full collapsed-Gibbs sweep over every token.

    ``u`` holds one uniform draw per token for this sweep.  Counts are updated
    in place.
    """
    n_topics = ndk.shape[1]
    vbeta = beta * nkw.shape[1]
    cdf = np.empty(n_topics)
    n_docs = doc_ptr.shape[0] - 1
    for d in range(n_docs):
        for j in range(doc_ptr[d], doc_ptr[d + 1]):
            w = tokens[j]
            k = z[j]
            ndk[d, k] -= 1
            nkw[k, w] -= 1
            nk[k] -= 1
            total = 0.0
            for t in range(n_topics):
                total += (ndk[d, t] + alpha) * (nkw[t, w] + beta) / (nk[t] + vbeta)
                cdf[t] = total
            r = u[j] * total
            k = 0
            while k < n_topics - 1 and cdf[k] <= r:
                k += 1
            z[j] = k
            ndk[d, k] += 1
            nkw[k, w] += 1
            nk[k] += 1


@njit(cache=True)
def fold_in(tokens, phi, alpha, u, burn_in):
    """Infer a document-topic distribution with topic-word rows held fixed.

    ``u`` is (iterations + 1) x n_tokens: row 0 initializes assignments, the
    rest drive one sweep each.  Returns the average of the smoothed
    distribution over post-burn-in sweeps.
    """
    n_topics = phi.shape[0]
    n_tokens = tokens.shape[0]
    iterations = u.shape[0] - 1
    ndk = np.zeros(n_topics, dtype=np.int32)
    z = np.empty(n_tokens, dtype=np.int32)
    for j in range(n_tokens):
        k = int(u[0, j] * n_topics)
        if k >= n_topics:
            k = n_topics - 1
        z[j] = k
        ndk[k] += 1

    theta = np.zeros(n_topics)
    n_samples = 0
    cdf = np.empty(n_topics)
    denom = n_tokens + n_topics * alpha
    for it in range(iterations):
        for j in range(n_tokens):
            w = tokens[j]
            ndk[z[j]] -= 1
            total = 0.0
            for t in range(n_topics):
                total += (ndk[t] + alpha) * phi[t, w]
                cdf[t] = total
            r = u[it + 1, j] * total
            k = 0
            while k < n_topics - 1 and cdf[k] <= r:
                k += 1
            z[j] = k
            ndk[k] += 1
        if it >= burn_in:
            for t in range(n_topics):
                theta[t] += (ndk[t] + alpha) / denom
            n_samples += 1
    return theta / n_samples
