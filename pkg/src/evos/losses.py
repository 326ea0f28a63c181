"""Training objectives on Dirichlet parameters, with closed-form gradients.

All losses are written directly in alpha-space.  ``alpha`` is a (n, K) or
(K,) float64 array with entries >= 1; ``y`` is a one-hot array of the same
shape.  Per-sample losses are returned (no mean reduction); the trainer
averages over the batch.

The three trainable objectives are

    standard_ce : plain cross-entropy on softmax probabilities (handled in
                  the trainer; this module only provides ``ce_loss``),
    un          : expected cross-entropy under the Dirichlet plus an
                  annealed KL regularizer toward the uniform Dirichlet,
    tun         : ``un`` plus a temperature-scaled belief cross-entropy.

The KL term sees an "adjusted" concentration in which the true class is
reset to 1, so only misleading (off-class) evidence is penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import digamma, log_gamma, trigamma

PROB_FLOOR = 1e-12  # clamp for logs of probabilities / beliefs

LOSS_KINDS = ("ce", "unce", "kl", "un", "tce", "tun")


@dataclass(frozen=True)
class Schedule:
    """Per-epoch annealing state for the KL weight and the temperature.

    Both ramp linearly over ``anneal_epochs`` epochs:
        kl_weight   = min(1, epoch / anneal_epochs)        in [0, 1]
        temperature = 0.01 + 0.99 * min(1, epoch / anneal_epochs)
    """

    epoch: int
    anneal_epochs: int = 10
    kl_weight: float = 0.0
    temperature: float = 0.01

    @classmethod
    def for_epoch(cls, epoch: int, anneal_epochs: int = 10) -> "Schedule":
        if epoch < 0 or anneal_epochs < 1:
            raise ValueError("Schedule: epoch >= 0 and anneal_epochs >= 1 required")
        ramp = min(1.0, epoch / anneal_epochs)
        return cls(
            epoch=epoch,
            anneal_epochs=anneal_epochs,
            kl_weight=ramp,
            temperature=0.01 + 0.99 * ramp,
        )


def _check_pair(a: np.ndarray, y: np.ndarray):
    if a.shape != y.shape:
        raise ValueError("alpha and one-hot labels must have the same shape")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite alpha")
    rows = y.sum(axis=-1)
    if not np.allclose(rows, 1.0) or np.any((y != 0.0) & (y != 1.0)):
        raise ValueError("labels must be one-hot")


def ce_loss(probs, y):
    """Cross-entropy -sum_k y_k ln p_k with p clamped at 1e-12."""
    p = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError("probs and labels must have the same shape")
    return -np.sum(y * np.log(np.clip(p, PROB_FLOOR, None)), axis=-1)


def evidential_ce(alpha, y):
    """Expected cross-entropy under Dirichlet(alpha):
    sum_k y_k (psi(S) - psi(alpha_k))."""
    a = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_pair(a, y)
    strength = a.sum(axis=-1, keepdims=True)
    return np.sum(y * (digamma(strength) - digamma(a)), axis=-1)


def adjusted_alpha(alpha, y):
    """Remove the true-class concentration: alpha_hat = y + (1 - y) * alpha.

    The true class entry becomes exactly 1; off-class entries are untouched.
    """
    a = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_pair(a, y)
    return y + (1.0 - y) * a


def kl_to_uniform(alpha_hat):
    """KL( Dirichlet(alpha_hat) || Dirichlet(1, ..., 1) ), elementwise over
    leading axes.  Zero iff alpha_hat is all ones."""
    a = np.asarray(alpha_hat, dtype=np.float64)
    if np.any(a < 1.0) or not np.all(np.isfinite(a)):
        raise ValueError("kl_to_uniform: alpha_hat must be finite and >= 1")
    k = a.shape[-1]
    total = a.sum(axis=-1, keepdims=True)
    return (
        log_gamma(np.squeeze(total, axis=-1))
        - log_gamma(float(k))
        - np.sum(log_gamma(a), axis=-1)
        + np.sum((a - 1.0) * (digamma(a) - digamma(total)), axis=-1)
    )


def un_loss(alpha, y, kl_weight: float):
    """Evidential cross-entropy plus weighted KL on the adjusted alpha."""
    return evidential_ce(alpha, y) + kl_weight * kl_to_uniform(adjusted_alpha(alpha, y))


def tempered_ce(beliefs, y, temperature: float):
    """Temperature-scaled belief cross-entropy: -sum_k y_k ln(b_k / tau).

    Deliberately unnormalized; for temperature < 1 and b_k > tau this is
    negative.  Beliefs are clamped at 1e-12 before the log, nothing else.
    """
    if not 0.0 < temperature <= 1.0:
        raise ValueError("tempered_ce: temperature must be in (0, 1]")
    b = np.asarray(beliefs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if b.shape != y.shape:
        raise ValueError("beliefs and labels must have the same shape")
    return -np.sum(y * np.log(np.clip(b, PROB_FLOOR, None) / temperature), axis=-1)


def _beliefs(alpha):
    return (alpha - 1.0) / alpha.sum(axis=-1, keepdims=True)


def tun_loss(alpha, y, schedule: Schedule):
    """un_loss plus the tempered belief cross-entropy, both from the same alpha."""
    a = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return un_loss(a, y, schedule.kl_weight) + tempered_ce(
        _beliefs(a), y, schedule.temperature
    )


def per_sample_loss(kind: str, alpha, y, schedule: Schedule):
    """Dispatch on the loss selector; returns per-sample losses."""
    a = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if kind == "ce":
        strength = a.sum(axis=-1, keepdims=True)
        return ce_loss(a / strength, y)
    if kind == "unce":
        return evidential_ce(a, y)
    if kind == "kl":
        return kl_to_uniform(adjusted_alpha(a, y))
    if kind == "un":
        return un_loss(a, y, schedule.kl_weight)
    if kind == "tce":
        return tempered_ce(_beliefs(a), y, schedule.temperature)
    if kind == "tun":
        return tun_loss(a, y, schedule)
    raise ValueError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# closed-form gradients with respect to alpha


def _grad_ce(a, y):
    # L = ln S - sum_k y_k ln alpha_k ; flat (zero) where the clamp is active
    strength = a.sum(axis=-1, keepdims=True)
    g = 1.0 / strength - y / a
    clamped = np.sum(y * a, axis=-1, keepdims=True) / strength < PROB_FLOOR
    return np.where(clamped, 0.0, g)


def _grad_unce(a, y):
    strength = a.sum(axis=-1, keepdims=True)
    return trigamma(strength) - y * trigamma(a)


def _grad_kl(a, y):
    a_hat = y + (1.0 - y) * a
    total = a_hat.sum(axis=-1, keepdims=True)
    k = a.shape[-1]
    inner = (a_hat - 1.0) * trigamma(a_hat) - (total - k) * trigamma(total)
    return (1.0 - y) * inner


def _grad_tce(a, y):
    strength = a.sum(axis=-1, keepdims=True)
    evid_true = np.sum(y * (a - 1.0), axis=-1, keepdims=True)  # alpha_c - 1
    belief_true = evid_true / strength
    off = 1.0 / strength
    with np.errstate(divide="ignore", invalid="ignore"):
        on = -(strength - evid_true) / (evid_true * strength)
    g = np.where(y == 1.0, on, off)
    return np.where(belief_true < PROB_FLOOR, 0.0, g)


def loss_grad_alpha(kind: str, alpha, y, schedule: Schedule):
    """d(per-sample loss)/d(alpha), same shape as alpha.

    Matches the corresponding ``per_sample_loss`` entry exactly (same
    clamping), so central finite differences agree away from clamp edges.
    """
    a = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_pair(a, y)
    if kind == "ce":
        return _grad_ce(a, y)
    if kind == "unce":
        return _grad_unce(a, y)
    if kind == "kl":
        return _grad_kl(a, y)
    if kind == "un":
        return _grad_unce(a, y) + schedule.kl_weight * _grad_kl(a, y)
    if kind == "tce":
        return _grad_tce(a, y)
    if kind == "tun":
        return (
            _grad_unce(a, y)
            + schedule.kl_weight * _grad_kl(a, y)
            + _grad_tce(a, y)
        )
    raise ValueError(f"unknown loss kind {kind!r}")
