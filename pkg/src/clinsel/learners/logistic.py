"""L2-regularised logistic regression fit by damped Newton steps."""

import numpy as np
from scipy.special import expit

LAMBDA = 1e-4
GRAD_TOL = 1e-8
MAX_ITER = 100
# keeps the Newton system solvable once the sigmoid saturates
HESS_JITTER = 1e-10


def objective(theta, X, y, lam=LAMBDA):
    """Penalised negative log-likelihood; theta = (intercept, weights...)."""
    z = theta[0] + X @ theta[1:]
    return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * theta[1:] @ theta[1:])


def gradient(theta, X, y, lam=LAMBDA):
    z = theta[0] + X @ theta[1:]
    r = expit(z) - y
    g = np.empty_like(theta)
    g[0] = r.sum()
    g[1:] = X.T @ r + lam * theta[1:]
    return g


def hessian(theta, X, lam=LAMBDA):
    z = theta[0] + X @ theta[1:]
    s = expit(z)
    w = s * (1.0 - s)
    Xa = np.column_stack([np.ones(X.shape[0]), X])
    H = (Xa * w[:, None]).T @ Xa
    H[1:, 1:] += lam * np.eye(X.shape[1])
    return H


def newton(X, y, lam=LAMBDA, tol=GRAD_TOL, max_iter=MAX_ITER):
    """Return (theta, objective trace, iterations). Steps are halved until the objective does not increase."""
    theta = np.zeros(X.shape[1] + 1)
    f = objective(theta, X, y, lam)
    trace = [f]
    it = 0
    for it in range(1, max_iter + 1):
        g = gradient(theta, X, y, lam)
        if np.max(np.abs(g)) < tol:
            break
        H = hessian(theta, X, lam)
        H[np.diag_indices_from(H)] += HESS_JITTER
        step = np.linalg.solve(H, g)
        # predicted decrease below rounding level of f: nothing left to gain
        if 0.5 * (g @ step) <= 1e-15 * max(1.0, abs(f)):
            break
        t = 1.0
        while True:
            cand = theta - t * step
            fc = objective(cand, X, y, lam)
            if fc <= f or t < 1e-10:
                break
            t *= 0.5
        if fc > f:
            break
        theta, f = cand, fc
        trace.append(f)
    return theta, trace, it


class LogisticModel:
    family = "logistic_regression"

    def __init__(self, theta, trace, n_iter):
        self.intercept = float(theta[0])
        self.weights = np.asarray(theta[1:], dtype=float)
        self.objective_trace = trace
        self.n_iter = n_iter

    @classmethod
    def fit(cls, X, y, lam=LAMBDA):
        return cls(*newton(X, y, lam))

    def decision(self, X):
        return self.intercept + X @ self.weights

    def score(self, X):
        return expit(self.decision(X))
