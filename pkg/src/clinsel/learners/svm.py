"""Linear SVM: L2-regularised hinge loss solved by dual coordinate descent.

The bias is handled by appending a constant-1 feature, so it is regularised
together with the weights. Coordinates are swept in index order every epoch.
"""

import numba
import numpy as np

C_DEFAULT = 1.0
GAP_TOL = 1e-4
MAX_EPOCHS = 1000


@numba.njit(cache=True)
def _primal_dual(Xa, ys, w, alpha, C):
    hinge = 0.0
    for i in range(Xa.shape[0]):
        m = 1.0 - ys[i] * (Xa[i] @ w)
        if m > 0:
            hinge += m
    ww = w @ w
    return 0.5 * ww + C * hinge, alpha.sum() - 0.5 * ww


@numba.njit(cache=True)
def _dual_cd(Xa, ys, C, tol, max_epochs):
    n, q = Xa.shape
    alpha = np.zeros(n)
    w = np.zeros(q)
    qdiag = np.empty(n)
    for i in range(n):
        qdiag[i] = Xa[i] @ Xa[i]
    gap = np.inf
    epochs = 0
    for epoch in range(max_epochs):
        epochs = epoch + 1
        for i in range(n):
            if qdiag[i] <= 0.0:
                continue
            g = ys[i] * (Xa[i] @ w) - 1.0
            a_new = min(max(alpha[i] - g / qdiag[i], 0.0), C)
            d = a_new - alpha[i]
            if d != 0.0:
                alpha[i] = a_new
                w += d * ys[i] * Xa[i]
        primal, dual = _primal_dual(Xa, ys, w, alpha, C)
        gap = primal - dual
        if gap <= tol * max(1.0, abs(primal)):
            break
    return w, alpha, gap, epochs


class LinearSVMModel:
    family = "linear_svm"

    def __init__(self, weights, intercept, gap, epochs):
        self.weights = weights
        self.intercept = intercept
        self.duality_gap = gap
        self.epochs = epochs

    @classmethod
    def fit(cls, X, y, C=C_DEFAULT, tol=GAP_TOL, max_epochs=MAX_EPOCHS):
        Xa = np.ascontiguousarray(np.column_stack([X, np.ones(X.shape[0])]), dtype=float)
        ys = np.where(np.asarray(y) > 0, 1.0, -1.0)
        w, _, gap, epochs = _dual_cd(Xa, ys, float(C), float(tol), int(max_epochs))
        return cls(w[:-1].copy(), float(w[-1]), float(gap), int(epochs))

    def score(self, X):
        # signed margin; AUC only needs the ordering
        return X @ self.weights + self.intercept
