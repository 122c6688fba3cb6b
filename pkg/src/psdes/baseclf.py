"""Base classifiers for the pool: perceptron, multinomial logistic regression, Gaussian NB.

All models share the same surface: ``predict_proba`` returns an (n, L) matrix of
posteriors and ``predict`` its argmax, ties going to the lowest class index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numba import njit
from scipy.special import logsumexp, softmax


class Kind(str, Enum):
    PERCEPTRON = "perceptron"
    LOGISTIC_REGRESSION = "logistic_regression"
    GAUSSIAN_NB = "gaussian_nb"


DEFAULT_HYPERPARAMS: dict[Kind, dict[str, float]] = {
    Kind.PERCEPTRON: {"eta": 1.0, "max_epochs": 1000},
    Kind.LOGISTIC_REGRESSION: {"l2": 1.0, "max_iter": 200, "tol": 1e-5},
    Kind.GAUSSIAN_NB: {"var_smoothing": 1e-9},
}


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: Kind
    hyperparameters: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        params = dict(DEFAULT_HYPERPARAMS[kind])
        unknown = set(self.hyperparameters) - set(params)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {kind.value}: {sorted(unknown)}")
        params.update(self.hyperparameters)
        for key, value in params.items():
            if key == "var_smoothing" and value < 0:
                raise ValueError("var_smoothing must be non-negative")
            if key != "var_smoothing" and not value > 0:
                raise ValueError(f"{key} must be positive")
        object.__setattr__(self, "hyperparameters", params)


DEFAULT_SPECS = (
    ClassifierSpec(Kind.PERCEPTRON),
    ClassifierSpec(Kind.LOGISTIC_REGRESSION),
    ClassifierSpec(Kind.GAUSSIAN_NB),
)


def _as_matrix(x: np.ndarray, d: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected {d} features, got shape {x.shape}")
    return X, single


def _first_argmax(P: np.ndarray) -> np.ndarray:
    # np.argmax already returns the first maximal index
    return np.argmax(P, axis=1)


class TrainedClassifier:
    kind: Kind
    n_classes: int
    n_dims: int

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        X, single = _as_matrix(x, self.n_dims)
        P = self._proba(X)
        return P[0] if single else P

    def predict(self, x: np.ndarray) -> np.ndarray | int:
        X, single = _as_matrix(x, self.n_dims)
        labels = _first_argmax(self._proba(X))
        return int(labels[0]) if single else labels

    def parameters(self) -> dict[str, Any]:
        raise NotImplementedError


# --------------------------------------------------------------------------- perceptron


@njit(cache=True)
def _perceptron_epochs(X, T, W, b, eta, orders):
    """Run one epoch per row of ``orders``; return epochs run and whether an epoch was update-free."""
    n_cls = W.shape[0]
    d = X.shape[1]
    for e in range(orders.shape[0]):
        updates = 0
        for i in orders[e]:
            for c in range(n_cls):
                s = b[c]
                for j in range(d):
                    s += W[c, j] * X[i, j]
                if T[i, c] * s <= 0.0:
                    step = eta * T[i, c]
                    for j in range(d):
                        W[c, j] += step * X[i, j]
                    b[c] += step
                    updates += 1
        if updates == 0:
            return e + 1, True
    return orders.shape[0], False


class PerceptronModel(TrainedClassifier):
    """Linear threshold units; one unit for binary problems, one-vs-rest otherwise.

    There is no calibrated posterior, so ``predict_proba`` is one-hot.
    """

    kind = Kind.PERCEPTRON

    def __init__(self, weights: np.ndarray, bias: np.ndarray, n_classes: int, epochs: int = 0, converged: bool = False):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        self.n_classes = int(n_classes)
        self.n_dims = self.weights.shape[1]
        self.epochs = epochs
        self.converged = converged

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights.T + self.bias

    def _labels(self, X: np.ndarray) -> np.ndarray:
        S = self.decision_function(X)
        if self.n_classes == 2:
            return (S[:, 0] > 0).astype(np.int64)
        return _first_argmax(S)

    def _proba(self, X: np.ndarray) -> np.ndarray:
        P = np.zeros((X.shape[0], self.n_classes))
        P[np.arange(X.shape[0]), self._labels(X)] = 1.0
        return P

    def parameters(self):
        return {"n_classes": self.n_classes, "weights": self.weights, "bias": self.bias}


def _fit_perceptron(X, y, L, params, rng) -> PerceptronModel:
    n, d = X.shape
    if L == 2:
        T = np.where(y == 1, 1.0, -1.0)[:, None]
    else:
        T = np.where(y[:, None] == np.arange(L)[None, :], 1.0, -1.0)
    W = np.zeros((T.shape[1], d))
    b = np.zeros(T.shape[1])
    X = np.ascontiguousarray(X)
    T = np.ascontiguousarray(T)
    max_epochs = int(params["max_epochs"])
    done, converged, chunk = 0, False, 32
    while done < max_epochs and not converged:
        m = min(chunk, max_epochs - done)
        orders = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
        ran, converged = _perceptron_epochs(X, T, W, b, float(params["eta"]), orders)
        done += ran
        chunk = min(chunk * 2, 256)
    return PerceptronModel(W, b, L, done, converged)


# --------------------------------------------------------------------------- logistic regression


class LogisticModel(TrainedClassifier):
    kind = Kind.LOGISTIC_REGRESSION

    def __init__(self, weights: np.ndarray, bias: np.ndarray, loss_history: list[float] | None = None):
        self.weights = np.asarray(weights, dtype=float)
        self.bias = np.asarray(bias, dtype=float)
        self.n_classes, self.n_dims = self.weights.shape
        self.loss_history = loss_history or []

    def _proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(X @ self.weights.T + self.bias, axis=1)

    def parameters(self):
        return {"weights": self.weights, "bias": self.bias}


@njit(cache=True)
def _logistic_kernel(W, b, X, y, l2, with_grad):
    n, d = X.shape
    L = W.shape[0]
    gW = np.zeros_like(W)
    gb = np.zeros_like(b)
    z = np.empty(L)
    loss = 0.0
    for i in range(n):
        zmax = -np.inf
        zy = 0.0
        for c in range(L):
            acc = b[c]
            for j in range(d):
                acc += W[c, j] * X[i, j]
            z[c] = acc
            if c == y[i]:
                zy = acc
            if acc > zmax:
                zmax = acc
        total = 0.0
        for c in range(L):
            z[c] = np.exp(z[c] - zmax)
            total += z[c]
        loss += np.log(total) + zmax - zy
        if with_grad:
            for c in range(L):
                g = z[c] / total
                if c == y[i]:
                    g -= 1.0
                gb[c] += g
                for j in range(d):
                    gW[c, j] += g * X[i, j]
    reg = 0.0
    for c in range(L):
        for j in range(d):
            reg += W[c, j] * W[c, j]
            gW[c, j] += l2 * W[c, j]
    return loss + 0.5 * l2 * reg, gW, gb


def logistic_loss_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float, with_grad: bool = True):
    """Summed multinomial negative log-likelihood plus ``l2/2 * ||W||^2`` and its gradient.

    ``y`` holds integer labels. The bias is not penalised.
    """
    loss, gW, gb = _logistic_kernel(
        np.ascontiguousarray(W, dtype=float),
        np.ascontiguousarray(b, dtype=float),
        np.ascontiguousarray(X, dtype=float),
        np.ascontiguousarray(y, dtype=np.int64),
        float(l2),
        with_grad,
    )
    return (loss, gW, gb) if with_grad else (loss, None, None)


def _fit_logistic(X, y, L, params) -> LogisticModel:
    n, d = X.shape
    l2, tol, max_iter = float(params["l2"]), float(params["tol"]), int(params["max_iter"])
    W, b = np.zeros((L, d)), np.zeros(L)
    loss, gW, gb = logistic_loss_grad(W, b, X, y, l2)
    history = [loss]
    # inverse of a Lipschitz bound on the gradient (bias column included)
    step = 1.0 / (0.5 * (np.vdot(X, X) + n) + l2)
    prev = None
    for _ in range(max_iter):
        if max(np.abs(gW).max(initial=0.0), np.abs(gb).max()) <= tol:
            break
        gnorm2 = float(np.vdot(gW, gW) + np.vdot(gb, gb))
        if prev is not None:
            # Barzilai-Borwein trial step; backtracking below keeps descent monotone
            sW, sb, dW, db = W - prev[0], b - prev[1], gW - prev[2], gb - prev[3]
            sy = float(np.vdot(sW, dW) + np.vdot(sb, db))
            if sy > 0:
                step = float(np.vdot(sW, sW) + np.vdot(sb, sb)) / sy
        accepted = False
        for _ in range(60):
            W_new, b_new = W - step * gW, b - step * gb
            new_loss, _, _ = logistic_loss_grad(W_new, b_new, X, y, l2, with_grad=False)
            if new_loss <= loss - 1e-4 * step * gnorm2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        prev = (W, b, gW, gb)
        W, b = W_new, b_new
        loss, gW, gb = logistic_loss_grad(W, b, X, y, l2)
        history.append(loss)
    return LogisticModel(W, b, history)


# --------------------------------------------------------------------------- gaussian naive bayes


class GaussianNBModel(TrainedClassifier):
    kind = Kind.GAUSSIAN_NB

    def __init__(self, means: np.ndarray, variances: np.ndarray, priors: np.ndarray):
        self.means = np.asarray(means, dtype=float)
        self.variances = np.asarray(variances, dtype=float)
        self.priors = np.asarray(priors, dtype=float)
        self.n_classes, self.n_dims = self.means.shape

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            log_prior = np.log(self.priors)
        norm = -0.5 * np.sum(np.log(2.0 * np.pi * self.variances), axis=1)
        sq = ((X[:, None, :] - self.means[None, :, :]) ** 2 / self.variances[None, :, :]).sum(axis=2)
        return log_prior + norm - 0.5 * sq

    def _proba(self, X: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def parameters(self):
        return {"means": self.means, "variances": self.variances, "priors": self.priors}


def _fit_gaussian_nb(X, y, L, params) -> GaussianNBModel:
    n, d = X.shape
    eps = float(params["var_smoothing"]) * float(np.var(X, axis=0).max())
    if eps == 0.0:
        # all features constant: keep variances strictly positive
        eps = 1e-9
    means = np.zeros((L, d))
    variances = np.ones((L, d))
    counts = np.bincount(y, minlength=L).astype(float)
    for c in range(L):
        Xc = X[y == c]
        if len(Xc):
            means[c] = Xc.mean(axis=0)
            variances[c] = Xc.var(axis=0) + eps
    return GaussianNBModel(means, variances, counts / n)


# --------------------------------------------------------------------------- public surface


def fit(
    spec: ClassifierSpec,
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    n_classes: int | None = None,
) -> TrainedClassifier:
    """Train one base model. ``n_classes`` defaults to ``max(y) + 1``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) with n == len(y)")
    if np.isnan(X).any():
        raise ValueError("X contains NaN")
    if np.unique(y).size < 2:
        raise TrainingError("training labels contain a single class")
    L = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.min() < 0 or y.max() >= L:
        raise ValueError("labels outside [0, n_classes)")
    params = spec.hyperparameters
    if spec.kind is Kind.PERCEPTRON:
        return _fit_perceptron(X, y, L, params, rng)
    if spec.kind is Kind.LOGISTIC_REGRESSION:
        return _fit_logistic(X, y, L, params)
    return _fit_gaussian_nb(X, y, L, params)


def predict(clf: TrainedClassifier, x: np.ndarray):
    return clf.predict(x)


def predict_proba(clf: TrainedClassifier, x: np.ndarray) -> np.ndarray:
    return clf.predict_proba(x)


def from_parameters(kind: Kind | str, params: dict[str, Any]) -> TrainedClassifier:
    kind = Kind(kind)
    if kind is Kind.PERCEPTRON:
        return PerceptronModel(params["weights"], params["bias"], int(params["n_classes"]))
    if kind is Kind.LOGISTIC_REGRESSION:
        return LogisticModel(params["weights"], params["bias"])
    return GaussianNBModel(params["means"], params["variances"], params["priors"])
