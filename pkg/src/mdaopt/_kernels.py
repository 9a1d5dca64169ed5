"""Hot loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature. Setting the
environment variable ``MDAOPT_DISABLE_NUMBA=1`` (or running without numba
installed) routes the public names to the numpy versions.
"""

import math
import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("MDAOPT_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


# alpha_k inequality scan ----------------------------------------------------


def _alpha(k, eta):
    a = math.sqrt(k + 2.0)
    b = math.sqrt(k + 1.0)
    return 1.0 / (eta * a * (a + b))


_alpha_nb = _njit(_alpha)


@_njit
def _alpha_scan_nb(eta, k_max):
    counts = np.zeros(5, dtype=np.int64)
    cur = _alpha_nb(0, eta)
    for k in range(k_max + 1):
        nxt = _alpha_nb(k + 1, eta)
        diff = nxt - cur
        if diff > 0.0:
            counts[0] += 1
        if cur > 1.0 / (2.0 * eta * (k + 1.0)):
            counts[1] += 1
        if diff > -1.0 / (4.0 * eta * (k + 2.0) ** 1.5 * math.sqrt(k + 3.0)):
            counts[2] += 1
        if cur * diff > 0.0:
            counts[3] += 1
        if nxt * diff > 0.0:
            counts[4] += 1
        cur = nxt
    return counts


def _alpha_scan_np(eta, k_max):
    k = np.arange(k_max + 2, dtype=np.float64)
    a = np.sqrt(k + 2.0)
    alpha = 1.0 / (eta * a * (a + np.sqrt(k + 1.0)))
    cur, nxt = alpha[:-1], alpha[1:]
    k = k[:-1]
    diff = nxt - cur
    return np.array(
        [
            np.count_nonzero(diff > 0.0),
            np.count_nonzero(cur > 1.0 / (2.0 * eta * (k + 1.0))),
            np.count_nonzero(diff > -1.0 / (4.0 * eta * (k + 2.0) ** 1.5 * np.sqrt(k + 3.0))),
            np.count_nonzero(cur * diff > 0.0),
            np.count_nonzero(nxt * diff > 0.0),
        ],
        dtype=np.int64,
    )


# binary logistic regression -------------------------------------------------


@_njit
def _logistic_nb(w, X, y, idx):
    d = X.shape[1]
    m = idx.shape[0]
    grad = np.zeros(d)
    loss = 0.0
    for r in range(m):
        i = idx[r]
        margin = 0.0
        for j in range(d):
            margin += X[i, j] * w[j]
        margin *= y[i]
        # log(1 + exp(-margin)) and its derivative, both overflow-safe
        if margin > 0.0:
            e = math.exp(-margin)
            loss += math.log1p(e)
            coef = -e / (1.0 + e)
        else:
            e = math.exp(margin)
            loss += -margin + math.log1p(e)
            coef = -1.0 / (1.0 + e)
        coef *= y[i]
        for j in range(d):
            grad[j] += coef * X[i, j]
    return loss / m, grad / m


def _logistic_np(w, X, y, idx):
    Xb = X[idx]
    yb = y[idx]
    margin = yb * (Xb @ w)
    loss = np.logaddexp(0.0, -margin).mean()
    coef = -yb * np.exp(-np.logaddexp(0.0, margin))
    return float(loss), Xb.T @ coef / len(idx)


# two-layer tanh network, softmax cross-entropy -----------------------------
# parameter layout: W1 (h, d_in), b1 (h), W2 (k, h), b2 (k), row-major


@_njit
def _mlp_nb(params, X, y, idx, n_hidden, n_classes):
    d_in = X.shape[1]
    h = n_hidden
    o1 = h * d_in
    o2 = o1 + h
    o3 = o2 + n_classes * h
    grad = np.zeros(params.shape[0])
    act = np.empty(h)
    logits = np.empty(n_classes)
    m = idx.shape[0]
    loss = 0.0
    for r in range(m):
        i = idx[r]
        for a in range(h):
            s = params[o1 + a]
            for j in range(d_in):
                s += params[a * d_in + j] * X[i, j]
            act[a] = math.tanh(s)
        top = -np.inf
        for c in range(n_classes):
            s = params[o3 + c]
            for a in range(h):
                s += params[o2 + c * h + a] * act[a]
            logits[c] = s
            if s > top:
                top = s
        norm = 0.0
        for c in range(n_classes):
            logits[c] = math.exp(logits[c] - top)
            norm += logits[c]
        label = y[i]
        loss += math.log(norm) - math.log(logits[label])
        for c in range(n_classes):
            delta = logits[c] / norm
            if c == label:
                delta -= 1.0
            grad[o3 + c] += delta
            for a in range(h):
                grad[o2 + c * h + a] += delta * act[a]
        for a in range(h):
            back = 0.0
            for c in range(n_classes):
                delta = logits[c] / norm
                if c == label:
                    delta -= 1.0
                back += delta * params[o2 + c * h + a]
            back *= 1.0 - act[a] * act[a]
            grad[o1 + a] += back
            for j in range(d_in):
                grad[a * d_in + j] += back * X[i, j]
    return loss / m, grad / m


def _mlp_np(params, X, y, idx, n_hidden, n_classes):
    d_in = X.shape[1]
    h = n_hidden
    o1 = h * d_in
    o2 = o1 + h
    o3 = o2 + n_classes * h
    W1 = params[:o1].reshape(h, d_in)
    b1 = params[o1:o2]
    W2 = params[o2:o3].reshape(n_classes, h)
    b2 = params[o3:]
    Xb = X[idx]
    yb = y[idx]
    m = len(idx)
    act = np.tanh(Xb @ W1.T + b1)
    logits = act @ W2.T + b2
    logits = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits).sum(axis=1))
    loss = float(np.mean(lse - logits[np.arange(m), yb]))
    delta = np.exp(logits - lse[:, None])
    delta[np.arange(m), yb] -= 1.0
    delta /= m
    back = (delta @ W2) * (1.0 - act * act)
    return loss, np.concatenate([(back.T @ Xb).ravel(), back.sum(0), (delta.T @ act).ravel(), delta.sum(0)])


numba_kernels = {
    "alpha_inequality_violations": _alpha_scan_nb,
    "logistic_loss_grad": _logistic_nb,
    "mlp_loss_grad": _mlp_nb,
}
numpy_kernels = {
    "alpha_inequality_violations": _alpha_scan_np,
    "logistic_loss_grad": _logistic_np,
    "mlp_loss_grad": _mlp_np,
}
_active = numba_kernels if USE_NUMBA else numpy_kernels

alpha_inequality_violations = _active["alpha_inequality_violations"]
logistic_loss_grad = _active["logistic_loss_grad"]
mlp_loss_grad = _active["mlp_loss_grad"]
