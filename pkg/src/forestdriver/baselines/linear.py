"""Multinomial logistic regression and one-vs-rest ridge classification."""
from __future__ import annotations

import numpy as np

from ..errors import ValidationError


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _one_hot(y, k):
    Y = np.zeros((len(y), k))
    Y[np.arange(len(y)), y] = 1.0
    return Y


def _check_strength(strength, norm):
    if not strength > 0:
        raise ValidationError(f"regularization strength must be > 0, got {strength}")
    if norm not in ("l1", "l2"):
        raise ValidationError(f"norm must be 'l1' or 'l2', got {norm!r}")


def logistic_loss_grad(W, b, X, Y, strength=0.0, norm="l2"):
    """Mean cross-entropy plus the smooth part of the penalty, with gradients.

    ``W`` is (d, k), ``b`` is (k,), ``Y`` is one-hot (n, k). The L2 penalty is
    ``strength / 2 * ||W||^2``; the L1 penalty is not differentiable and is left
    to the proximal step, so it is excluded here.
    """
    n = X.shape[0]
    Z = X @ W + b
    Zs = Z - Z.max(axis=1, keepdims=True)
    logp = Zs - np.log(np.exp(Zs).sum(axis=1, keepdims=True))
    loss = -(Y * logp).sum() / n
    G = (np.exp(logp) - Y) / n
    gW = X.T @ G
    gb = G.sum(axis=0)
    if norm == "l2" and strength:
        loss += 0.5 * strength * (W * W).sum()
        gW = gW + strength * W
    return loss, gW, gb


class LogisticRegression:
    """Softmax regression fit by (proximal) gradient descent.

    Objective: mean cross-entropy + ``strength/2 ||W||^2`` (L2) or
    ``strength ||W||_1`` (L1, soft-thresholding). The intercept is not
    penalized. The step is ``1 / L`` with ``L`` the standard curvature bound
    ``lambda_max(X^T X) / (2 n)`` of the softmax loss.
    """

    def __init__(self, strength=1.0, norm="l2", max_iter=1000, tol=1e-7, n_classes=4):
        _check_strength(strength, norm)
        self.strength = float(strength)
        self.norm = norm
        self.max_iter = max_iter
        self.tol = tol
        self.n_classes = n_classes
        self.W = self.b = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        k = self.n_classes
        Y = _one_hot(y, k)
        Xb = np.hstack([X, np.ones((n, 1))])
        lip = np.linalg.eigvalsh(Xb.T @ Xb / n).max() / 2.0
        if self.norm == "l2":
            lip += self.strength
        step = 1.0 / max(lip, 1e-12)
        W = np.zeros((d, k))
        b = np.zeros(k)
        # FISTA momentum on both blocks
        Wm, bm, t = W.copy(), b.copy(), 1.0
        for _ in range(self.max_iter):
            _, gW, gb = logistic_loss_grad(Wm, bm, X, Y, self.strength, self.norm)
            W_new = Wm - step * gW
            b_new = bm - step * gb
            if self.norm == "l1":
                thr = step * self.strength
                W_new = np.sign(W_new) * np.maximum(np.abs(W_new) - thr, 0.0)
            t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
            delta = max(np.abs(W_new - W).max(initial=0.0), np.abs(b_new - b).max())
            Wm = W_new + ((t - 1) / t_new) * (W_new - W)
            bm = b_new + ((t - 1) / t_new) * (b_new - b)
            W, b, t = W_new, b_new, t_new
            if delta < self.tol:
                break
        self.W, self.b = W, b
        return self

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def to_arrays(self):
        return {"W": self.W, "b": self.b}

    @classmethod
    def from_arrays(cls, arrays, **params):
        m = cls(**params)
        m.W, m.b = arrays["W"], arrays["b"]
        return m


class RidgeClassifier:
    """One-vs-rest least squares on +/-1 targets, decoded by argmax.

    L2: minimizes ``||Y - X W - b||^2 + strength ||W||^2`` in closed form via
    the normal equations ``(Xc^T Xc + strength I) W = Xc^T Yc`` on centered
    data. L1: the same squared loss with ``strength ||W||_1``, solved by cyclic
    coordinate descent.
    """

    def __init__(self, strength=1.0, norm="l2", max_iter=1000, tol=1e-8, n_classes=4):
        _check_strength(strength, norm)
        self.strength = float(strength)
        self.norm = norm
        self.max_iter = max_iter
        self.tol = tol
        self.n_classes = n_classes
        self.W = self.b = None

    def targets(self, y):
        return 2.0 * _one_hot(np.asarray(y, dtype=np.int64), self.n_classes) - 1.0

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        Y = self.targets(y)
        x_mean = X.mean(axis=0)
        y_mean = Y.mean(axis=0)
        Xc = X - x_mean
        Yc = Y - y_mean
        if self.norm == "l2":
            A = Xc.T @ Xc + self.strength * np.eye(X.shape[1])
            W = np.linalg.solve(A, Xc.T @ Yc)
        else:
            W = self._lasso(Xc, Yc)
        self.W = W
        self.b = y_mean - x_mean @ W
        return self

    def _lasso(self, Xc, Yc):
        d = Xc.shape[1]
        col_sq = (Xc * Xc).sum(axis=0)
        W = np.zeros((d, Yc.shape[1]))
        R = Yc.copy()
        half = self.strength / 2.0  # d/dw of ||.||^2 carries a factor 2
        for _ in range(self.max_iter):
            max_change = 0.0
            for j in range(d):
                if col_sq[j] == 0:
                    continue
                old = W[j].copy()
                rho = Xc[:, j] @ R + col_sq[j] * old
                new = np.sign(rho) * np.maximum(np.abs(rho) - half, 0.0) / col_sq[j]
                if np.any(new != old):
                    R -= np.outer(Xc[:, j], new - old)
                    W[j] = new
                    max_change = max(max_change, np.abs(new - old).max())
            if max_change < self.tol:
                break
        return W

    def normal_equation_residual(self, X, y):
        """Relative residual of the L2 normal equations at the fitted solution."""
        X = np.asarray(X, dtype=np.float64)
        Y = self.targets(y)
        Xc = X - X.mean(axis=0)
        Yc = Y - Y.mean(axis=0)
        lhs = (Xc.T @ Xc + self.strength * np.eye(X.shape[1])) @ self.W
        rhs = Xc.T @ Yc
        return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))

    def decision_function(self, X):
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def to_arrays(self):
        return {"W": self.W, "b": self.b}

    @classmethod
    def from_arrays(cls, arrays, **params):
        m = cls(**params)
        m.W, m.b = arrays["W"], arrays["b"]
        return m
