"""Binary l2-regularized logistic regression with a damped Newton solver.

Objective: mean log-loss plus (l2/2)||w||^2 on the weights only, bias
unregularized. Both classes present makes the Hessian positive definite, so
the optimum is unique and training is run-to-run deterministic. Backtracking
line search keeps the recorded loss curve non-increasing at every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TrainingError(ValueError):
    """Bad training inputs."""


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 1e-4
    tol: float = 1e-6  # stop when the gradient infinity norm drops below this
    max_iters: int = 1000

    def __post_init__(self) -> None:
        if self.l2 < 0:
            raise TrainingError(f"l2 must be >= 0, got {self.l2}")
        if self.tol <= 0 or self.max_iters < 1:
            raise TrainingError("tol must be > 0 and max_iters >= 1")


@dataclass
class ClassifierModel:
    weights: np.ndarray
    bias: float
    loss_curve: list[float] = field(default_factory=list)
    n_iters: int = 0
    grad_inf_norm: float = float("inf")
    converged: bool = False

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def proba_matrix(self, x: np.ndarray) -> np.ndarray:
        """Positive-class probability for each row of a 2-D array."""
        return _sigmoid(self.decision_values(x))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # exp(-|z|) never overflows; both branches are the textbook stable forms.
    # Clamped away from {0, 1} so downstream entropies stay well defined.
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, 1e-15, 1.0 - 1e-15)


def loss_and_grad(
    w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Objective value and its gradient at (w, b). y must be +1/-1."""
    z = x @ w + b
    margins = y * z
    loss = float(np.mean(np.logaddexp(0.0, -margins))) + 0.5 * l2 * float(w @ w)
    # d/dz mean logaddexp(0,-yz) = (p - y01)/m with p = sigmoid(z)
    residual = _sigmoid(z) - (y > 0)
    m = x.shape[0]
    grad_w = x.T @ residual / m + l2 * w
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def predict_proba(model: ClassifierModel, x: np.ndarray) -> float | np.ndarray:
    """P(positive | x); scalar for a single vector, array for a matrix."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return float(_sigmoid(arr @ model.weights + model.bias))
    return model.proba_matrix(arr)


def train_classifier(
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig = TrainConfig(),
    init: tuple[np.ndarray, float] | None = None,
) -> ClassifierModel:
    """Fit by damped Newton; returns the model with its per-iteration losses.

    Args:
        x: (m, d) feature rows.
        y: (m,) labels in {-1, +1}; both classes must be present.
        init: optional (w0, b0) starting point, defaults to zeros.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise TrainingError(f"x {x.shape} and y {y.shape} do not align")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise TrainingError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise TrainingError("training set needs both classes")

    m, d = x.shape
    if init is None:
        w = np.zeros(d)
        b = 0.0
    else:
        w = np.asarray(init[0], dtype=np.float64).copy()
        b = float(init[1])
        if w.shape != (d,):
            raise TrainingError(f"init weights shape {w.shape} != ({d},)")

    xa = np.hstack([x, np.ones((m, 1))])
    reg = np.zeros(d + 1)
    reg[:d] = config.l2

    loss, grad_w, grad_b = loss_and_grad(w, b, x, y, config.l2)
    curve = [loss]
    grad = np.append(grad_w, grad_b)
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= config.tol:
            converged = True
            it -= 1
            break
        z = xa[:, :d] @ w + b
        p = _sigmoid(z)
        dvec = p * (1.0 - p)
        h = (xa.T * dvec) @ xa / m + np.diag(reg)
        try:
            step = np.linalg.solve(h, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(h + 1e-10 * np.eye(d + 1), grad)
        # backtracking keeps the curve monotone even when Newton overshoots
        descent = float(grad @ step)
        t = 1.0
        accepted = False
        for _ in range(60):
            w_new = w - t * step[:d]
            b_new = b - t * step[d]
            new_loss, new_gw, new_gb = loss_and_grad(w_new, b_new, x, y, config.l2)
            if new_loss <= loss - 1e-4 * t * descent or new_loss <= loss:
                accepted = True
                break
            t *= 0.5
        if not accepted:  # no float-representable progress left
            it -= 1
            break
        w, b, loss = w_new, b_new, new_loss
        grad = np.append(new_gw, new_gb)
        curve.append(loss)
    gnorm = float(np.max(np.abs(grad)))
    if gnorm <= config.tol:
        converged = True
    return ClassifierModel(
        weights=w,
        bias=float(b),
        loss_curve=curve,
        n_iters=it,
        grad_inf_norm=gnorm,
        converged=converged,
    )
