"""Adam training of MSE plus the layer-wise passivity penalty.

The penalty for layer ``l`` is ``max(n_in * nu_l / a - sum(W_l), 0)``; it
vanishes exactly when the layer meets its IIFP weight-sum condition.  By
default the penalty is rescaled on every batch so that its magnitude
matches the batch MSE, with the scale factor held constant during
differentiation.
"""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, IIFPError

log = logging.getLogger(__name__)


class TrainingDiverged(IIFPError):
    """The loss became non-finite."""


@dataclass
class TrainConfig:
    nu_target: float = 1.0
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0
    penalty_rescale: bool = True
    penalty_weight: float = 1.0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_adam: float = 1e-8

    def __post_init__(self):
        if not np.all(np.asarray(self.nu_target, dtype=float) > 0):
            raise ConfigError(f"nu_target must be positive, got {self.nu_target}")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and max_epochs >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


def _layer_nus(nu_target, depth):
    return np.broadcast_to(np.asarray(nu_target, dtype=np.float64), (depth,))


def iifp_penalty(model, nu_target=1.0):
    """Penalty value and its (sub)gradient with respect to each layer.

    Returns
    -------
    value : float
    grads : list of (dW, db) tuples; dW is -1 everywhere in violating
        layers and 0 elsewhere (also 0 at equality), db is always 0.
    """
    if isinstance(nu_target, TrainConfig):
        nu_target = nu_target.nu_target
    nus = _layer_nus(nu_target, model.depth)
    a = model.slope_a
    value = 0.0
    grads = []
    for layer, nu in zip(model.layers, nus):
        w = layer.weights
        gap = w.shape[1] * nu / a - float(np.sum(w))
        if gap > 0.0:
            value += gap
            grads.append((-np.ones_like(w), np.zeros_like(layer.bias)))
        else:
            grads.append((np.zeros_like(w), np.zeros_like(layer.bias)))
    return value, grads


def penalty_scale(mse, penalty, cfg):
    if cfg.penalty_rescale:
        return mse / max(penalty, 1e-12) if penalty > 0.0 else 0.0
    return cfg.penalty_weight


def total_loss(model, x, targets, cfg):
    """``MSE + lambda * penalty`` on a batch; returns ``(loss, mse, penalty, lambda)``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 0:
        raise ContractError("loss requested for an empty batch")
    pred = model.forward(x).output
    t = np.asarray(targets, dtype=np.float64).reshape(pred.shape)
    mse = float(np.mean((pred - t) ** 2))
    pen, _ = iifp_penalty(model, cfg.nu_target)
    lam = penalty_scale(mse, pen, cfg)
    return mse + lam * pen, mse, pen, lam


def loss_and_grad(model, x, targets, cfg):
    """Total loss and its flat gradient, ``lambda`` treated as a constant."""
    mse, grads = model.mse_gradients(x, targets)
    pen, pgrads = iifp_penalty(model, cfg.nu_target)
    lam = penalty_scale(mse, pen, cfg)
    g = model.flatten_grads(grads)
    if lam != 0.0 and pen > 0.0:
        g = g + lam * model.flatten_grads(pgrads)
    return mse + lam * pen, mse, pen, lam, g


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_adam: float = 1e-8

    @classmethod
    def for_model(cls, model, cfg=None):
        n = model.get_flat().size
        kw = {}
        if cfg is not None:
            kw = dict(
                learning_rate=cfg.learning_rate,
                beta1=cfg.beta1,
                beta2=cfg.beta2,
                epsilon_adam=cfg.epsilon_adam,
            )
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_update(theta, grad, state):
    """One bias-corrected Adam step; updates ``state`` in place, returns new parameters."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.first_moment.shape or theta.shape != grad.shape:
        raise ContractError("gradient shape does not match optimiser state")
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    state.first_moment = b1 * state.first_moment + (1.0 - b1) * grad
    state.second_moment = b2 * state.second_moment + (1.0 - b2) * grad * grad
    m_hat = state.first_moment / (1.0 - b1**state.step_count)
    v_hat = state.second_moment / (1.0 - b2**state.step_count)
    return theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon_adam)


def adam_step(state, model, grads):
    """Apply one Adam update to ``model`` in place.

    ``grads`` is either a flat gradient or a per-layer list of ``(dW, db)``.
    """
    if isinstance(grads, list):
        grads = model.flatten_grads(grads)
    model.set_flat(adam_update(model.get_flat(), grads, state))
    return model, state


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    columns = ("epoch", "train_mse", "val_mse", "penalty", "lambda")

    def append(self, **row):
        self.rows.append(row)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([r["epoch"]] + [repr(float(r[c])) for c in self.columns[1:]])


def mse(model, x, targets):
    pred = model.predict(x)
    return float(np.mean((pred - np.asarray(targets, dtype=np.float64)) ** 2))


def train(model, train_set, val_set, cfg=None):
    """Fit ``model`` with mini-batch Adam and early stopping on validation MSE.

    ``train_set`` and ``val_set`` are ``(features, targets)`` pairs or
    objects with ``features``/``targets`` attributes.  The input model is
    left untouched; the returned copy holds the parameters of the epoch
    with the lowest validation MSE (epoch 0 is the initialisation).

    Returns
    -------
    model : MlpModel
    log : TrainingLog
        Per-epoch train MSE, validation MSE, penalty and last batch lambda.
    """
    cfg = cfg or TrainConfig()
    x_tr, t_tr = _unpack(train_set)
    x_va, t_va = _unpack(val_set)
    if len(x_tr) == 0 or len(x_va) == 0:
        raise ContractError("training and validation splits must be non-empty")

    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    state = AdamState.for_model(model, cfg)
    theta = model.get_flat()
    history = TrainingLog()

    best_val = mse(model, x_va, t_va)
    best_theta = theta.copy()
    pen0, _ = iifp_penalty(model, cfg.nu_target)
    history.append(epoch=0, train_mse=mse(model, x_tr, t_tr), val_mse=best_val, penalty=pen0, **{"lambda": 0.0})
    history.best_epoch = 0
    since_best = 0

    n = len(x_tr)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        lam = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, _, _, lam, g = loss_and_grad(model, x_tr[idx], t_tr[idx], cfg)
            if not math.isfinite(loss) or not np.all(np.isfinite(g)):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}; lower the learning rate or check the data scaling"
                )
            theta = adam_update(theta, g, state)
            model.set_flat(theta)

        val = mse(model, x_va, t_va)
        pen, _ = iifp_penalty(model, cfg.nu_target)
        history.append(epoch=epoch, train_mse=mse(model, x_tr, t_tr), val_mse=val, penalty=pen, **{"lambda": lam})
        if not math.isfinite(val):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        if val < best_val:
            best_val, best_theta, since_best = val, theta.copy(), 0
            history.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= cfg.patience:
                history.stopped_early = True
                log.info("early stop at epoch %d (best %d)", epoch, history.best_epoch)
                break

    model.set_flat(best_theta)
    return model, history


def _unpack(split):
    if hasattr(split, "features"):
        return np.asarray(split.features, dtype=np.float64), np.asarray(split.targets, dtype=np.float64)
    x, t = split
    return np.asarray(x, dtype=np.float64), np.asarray(t, dtype=np.float64)
