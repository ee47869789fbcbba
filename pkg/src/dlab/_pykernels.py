"""Pure-numpy versions of the hot kernels, used when the extension is absent."""

import numpy as np

LOG_2PI = 1.8378770664093453


def mixture_eval(x, means, variances, weights):
    """Return ``(log_density, responsibilities, score)`` for rows of ``x``."""
    inv = 1.0 / variances
    norm = np.log(weights) - 0.5 * np.sum(LOG_2PI + np.log(variances), axis=1)
    diff = means[None, :, :] - x[:, None, :]
    logc = norm[None, :] - 0.5 * np.einsum("nkd,nkd,kd->nk", diff, diff, inv)
    mx = logc.max(axis=1, keepdims=True)
    lse = mx + np.log(np.exp(logc - mx).sum(axis=1, keepdims=True))
    resp = np.exp(logc - lse)
    score = np.einsum("nk,nkd,kd->nd", resp, diff, inv)
    return lse[:, 0], resp, score


def softmax_affine_grad(x, W, b, label):
    """Gradient of ``log softmax(W x + b)[label]`` for rows of ``x``."""
    logits = x @ W.T + b
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return W[label][None, :] - p @ W
