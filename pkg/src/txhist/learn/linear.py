"""Linear classifiers: multinomial logistic regression and a one-vs-rest
perceptron, both sample-weighted. Inputs are expected max-abs scaled."""

from __future__ import annotations

import numpy as np


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    n_classes: int,
    *,
    max_iter: int = 3000,
    tol: float = 1e-6,
    l2: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Full-batch gradient descent on weighted cross-entropy.

    The step is ``1/L`` for the smoothness bound ``L`` of the averaged loss,
    so iterations decrease it monotonically. Stops when the gradient norm
    drops below ``tol``. Returns ``(coef (F, K), intercept (K,), n_iter)``.
    """
    n, f = X.shape
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), y] = 1.0
    sw = w / w.sum()
    lipschitz = 0.5 * float(((X * X).sum(axis=1) + 1.0).max()) + l2
    step = 1.0 / lipschitz
    coef = np.zeros((f, n_classes))
    bias = np.zeros(n_classes)
    it = 0
    for it in range(1, max_iter + 1):
        R = (_softmax(X @ coef + bias) - Y) * sw[:, None]
        g_coef = X.T @ R + l2 * coef
        g_bias = R.sum(axis=0)
        if np.sqrt((g_coef**2).sum() + (g_bias**2).sum()) < tol:
            break
        coef -= step * g_coef
        bias -= step * g_bias
    return coef, bias, it


def fit_perceptron(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    n_classes: int,
    *,
    epochs: int = 50,
    learning_rate: float = 1.0,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """One-vs-rest perceptron; a mistake on sample ``i`` moves class ``k``'s
    hyperplane by ``learning_rate * w_i * (+-1) * x_i``."""
    n, f = X.shape
    coef = np.zeros((f, n_classes))
    bias = np.zeros(n_classes)
    signs = np.where(np.arange(n_classes)[None, :] == y[:, None], 1.0, -1.0)
    for _ in range(epochs):
        mistakes = 0
        for i in rng.permutation(n):
            x = X[i]
            s = signs[i]
            wrong = s * (x @ coef + bias) <= 0
            if wrong.any():
                mistakes += 1
                step = learning_rate * w[i] * s * wrong
                coef += np.outer(x, step)
                bias += step
        if mistakes == 0:
            break
    return coef, bias
