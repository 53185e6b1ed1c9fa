"""Independent reference implementations used to cross-check the package.

Everything here recomputes a quantity from first principles: plain loops,
closed forms, or a different algorithm entirely (eigendecomposition instead
of SVD, direct densities instead of log-sum-exp). Nothing imports from
driftlab, so agreement between the two routes is meaningful.
"""

from __future__ import annotations

import numpy as np


def gmm_log_likelihood_naive(X, weights, means, variances):
    """Total log density via direct per-point, per-component products."""
    total = 0.0
    for x in X:
        density = 0.0
        for w, mu, var in zip(weights, means, variances):
            p = float(w)
            for d in range(len(x)):
                p *= np.exp(-0.5 * (x[d] - mu[d]) ** 2 / var[d]) / np.sqrt(2.0 * np.pi * var[d])
            density += p
        total += np.log(density)
    return total


def single_gaussian_mle(X, var_floor):
    """Closed-form diagonal Gaussian fit: sample mean, floored biased variance."""
    mean = X.mean(axis=0)
    var = np.maximum(((X - mean) ** 2).mean(axis=0), var_floor)
    return mean, var


def nearest_centroid_scan(X, centers):
    """Brute-force nearest centroid; strict < keeps the lowest index on ties."""
    out = np.empty(len(X), dtype=int)
    for i, x in enumerate(X):
        best, best_d2 = 0, np.inf
        for j, c in enumerate(centers):
            d2 = float(((x - c) ** 2).sum())
            if d2 < best_d2:
                best, best_d2 = j, d2
        out[i] = best
    return out


def pca_2d_reference(X):
    """Top-2 PCA through the covariance eigendecomposition.

    Returns (coords, components, explained_ratio) under the same sign
    convention as the package: the largest-magnitude entry of each
    component is positive.
    """
    Xc = X - X.mean(axis=0)
    evals, evecs = np.linalg.eigh(Xc.T @ Xc)
    order = np.argsort(evals)[::-1]
    components = evecs[:, order[:2]].T.copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    explained = evals[order[:2]] / evals.sum()
    return Xc @ components.T, components, explained


# ---------------------------------------------------------------------------
# A second, self-contained MLP forward pass. Used both to difference the
# loss numerically and to replay routing decisions point by point.
# ---------------------------------------------------------------------------


def mlp_logits(weights, biases, X):
    a = np.asarray(X, dtype=float)
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        a = a @ w + b
        if i < last:
            a = np.maximum(a, 0.0)
    return a


def mlp_cross_entropy(weights, biases, X, y):
    z = mlp_logits(weights, biases, X)
    z = z - z.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return -log_probs[np.arange(len(y)), y].mean()


def mlp_argmax(weights, biases, X):
    return np.argmax(mlp_logits(weights, biases, X), axis=1)


def numeric_mlp_grads(weights, biases, X, y, h=1e-6):
    """Central differences of the reference cross-entropy over every parameter."""
    grads = []
    for arr in list(weights) + list(biases):
        g = np.zeros_like(arr)
        for flat in range(arr.size):
            orig = arr.flat[flat]
            arr.flat[flat] = orig + h
            up = mlp_cross_entropy(weights, biases, X, y)
            arr.flat[flat] = orig - h
            down = mlp_cross_entropy(weights, biases, X, y)
            arr.flat[flat] = orig
            g.flat[flat] = (up - down) / (2.0 * h)
        grads.append(g)
    k = len(weights)
    return list(zip(grads[:k], grads[k:]))


def softmax_1d(z):
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def linear_softmax_grad(W, b, x, y):
    """Closed-form single-sample cross-entropy gradient of a linear model."""
    p = softmax_1d(x @ W + b)
    e = p.copy()
    e[y] -= 1.0
    return np.outer(x, e), e


def expected_fisher_linear_softmax(W, b, X):
    """Exact expected Fisher diagonal of a linear softmax model.

    E_{y~p}[g^2] per sample is x_d^2 p_c (1 - p_c) for weights and
    p_c (1 - p_c) for biases; averaged over the batch.
    """
    FW = np.zeros_like(W)
    Fb = np.zeros_like(b)
    for x in X:
        p = softmax_1d(x @ W + b)
        var = p * (1.0 - p)
        FW += np.outer(x ** 2, var)
        Fb += var
    return FW / len(X), Fb / len(X)


def reference_adam_trajectory(theta0, grad_fn, lr, steps,
                              beta1=0.9, beta2=0.999, eps=1e-8):
    """Textbook bias-corrected Adam on a flat parameter vector."""
    theta = np.asarray(theta0, dtype=float).copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trajectory = []
    for t in range(1, steps + 1):
        g = grad_fn(theta)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
        trajectory.append(theta.copy())
    return trajectory


def route_then_classify(router_params, expert_params, X):
    """Per-point expert-bank decomposition: argmax-route each sample, then
    ask only the routed expert. router_params is (weights, biases) or None
    for the constant route; expert_params is a list of (weights, biases).
    """
    X = np.asarray(X, dtype=float)
    preds = np.empty(len(X), dtype=int)
    for i in range(len(X)):
        xi = X[i : i + 1]
        if router_params is None:
            r = 0
        else:
            r = int(mlp_argmax(router_params[0], router_params[1], xi)[0])
        w, b = expert_params[r]
        preds[i] = int(mlp_argmax(w, b, xi)[0])
    return preds
