"""One-hidden-layer tanh network trained by full-batch gradient descent."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Standardizer

DIVERGENCE_LOSS = 1e6
MIN_LEARNING_RATE = 1e-12


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpParams:
    W1: np.ndarray  # (d, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h,)
    b2: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    @classmethod
    def unflat(cls, v: np.ndarray, d: int, h: int) -> MlpParams:
        i = d * h
        return cls(v[:i].reshape(d, h), v[i:i + h], v[i + h:i + 2 * h], float(v[-1]))

    def step(self, g: MlpParams, lr: float) -> MlpParams:
        return MlpParams(self.W1 - lr * g.W1, self.b1 - lr * g.b1, self.w2 - lr * g.w2, self.b2 - lr * g.b2)


def init_params(d: int, hidden: int, seed: int) -> MlpParams:
    """Scaled normal input weights; zero output layer so the untrained net predicts the target mean."""
    rng = np.random.default_rng(seed)
    return MlpParams(rng.normal(0.0, 1.0 / np.sqrt(d), (d, hidden)), np.zeros(hidden), np.zeros(hidden), 0.0)


def forward(p: MlpParams, Z: np.ndarray) -> np.ndarray:
    return np.tanh(Z @ p.W1 + p.b1) @ p.w2 + p.b2


def loss_and_grad(p: MlpParams, Z: np.ndarray, t: np.ndarray) -> tuple[float, MlpParams]:
    """Half mean squared error and its gradient by backpropagation."""
    n = t.size
    H = np.tanh(Z @ p.W1 + p.b1)
    r = H @ p.w2 + p.b2 - t
    loss = 0.5 * float(r @ r) / n
    g_out = r / n
    g_w2 = H.T @ g_out
    g_b2 = float(g_out.sum())
    g_pre = np.outer(g_out, p.w2) * (1.0 - H * H)
    return loss, MlpParams(Z.T @ g_pre, g_pre.sum(axis=0), g_w2, g_b2)


def train(Z: np.ndarray, t: np.ndarray, hidden: int, learning_rate: float, epochs: int,
          seed: int) -> tuple[MlpParams, np.ndarray, float]:
    """Gradient descent on standardized data.

    A step that raises the loss is undone and the learning rate halved, so the
    returned loss history is non-increasing.

    Returns
    -------
    params, losses, final_learning_rate
        ``losses[e]`` is the loss after ``e`` epochs.
    """
    p = init_params(Z.shape[1], hidden, seed)
    loss, g = loss_and_grad(p, Z, t)
    losses = [loss]
    lr = float(learning_rate)
    for _ in range(epochs):
        if lr < MIN_LEARNING_RATE:
            break
        q = p.step(g, lr)
        q_loss, q_g = loss_and_grad(q, Z, t)
        if not np.isfinite(q_loss) or q_loss > DIVERGENCE_LOSS:
            if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
                raise TrainingDiverged(f"loss {q_loss:.3g} at learning rate {lr:.3g}")
            lr *= 0.5
        elif q_loss > loss:
            lr *= 0.5
        else:
            p, loss, g = q, q_loss, q_g
        losses.append(loss)
    if loss > DIVERGENCE_LOSS:
        raise TrainingDiverged(f"final loss {loss:.3g} exceeds {DIVERGENCE_LOSS:.0e}")
    return p, np.array(losses), lr


@dataclass(frozen=True)
class MlpRegressor:
    params: MlpParams
    hidden: int
    learning_rate: float
    epochs: int
    seed: int
    x_std: Standardizer
    y_std: Standardizer
    final_loss: float

    family = "nn"

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, hidden: int = 8, learning_rate: float = 0.01,
            epochs: int = 2000, seed: int = 0) -> MlpRegressor:
        if hidden < 1 or learning_rate <= 0 or epochs < 0:
            raise ValueError("need hidden >= 1, learning_rate > 0, epochs >= 0")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        x_std = Standardizer.fit(X)
        y_std = Standardizer.fit(y[:, None])
        t = y_std.transform(y[:, None]).ravel()
        p, losses, _ = train(x_std.transform(X), t, int(hidden), learning_rate, int(epochs), int(seed))
        return cls(p, int(hidden), float(learning_rate), int(epochs), int(seed), x_std, y_std, float(losses[-1]))

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = forward(self.params, self.x_std.transform(np.atleast_2d(X)))
        return self.y_std.inverse(out[:, None]).ravel()

    def hyperparameters(self) -> dict:
        return {"hidden": self.hidden, "learning_rate": self.learning_rate, "epochs": self.epochs, "seed": self.seed}

    def to_dict(self) -> dict:
        return {
            "W1": self.params.W1.tolist(),
            "b1": self.params.b1.tolist(),
            "w2": self.params.w2.tolist(),
            "b2": self.params.b2,
            "x_std": self.x_std.to_dict(),
            "y_std": self.y_std.to_dict(),
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, d: dict, hyper: dict) -> MlpRegressor:
        h = int(hyper["hidden"])
        p = MlpParams(np.array(d["W1"], dtype=float).reshape(-1, h), np.array(d["b1"], dtype=float),
                      np.array(d["w2"], dtype=float), float(d["b2"]))
        return cls(p, h, float(hyper["learning_rate"]), int(hyper["epochs"]), int(hyper["seed"]),
                   Standardizer.from_dict(d["x_std"]), Standardizer.from_dict(d["y_std"]), float(d["final_loss"]))
