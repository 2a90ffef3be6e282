"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .modules import Parameter


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    step: int,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update; ``step`` counts from 1 for bias correction."""
    b1, b2 = betas
    m *= b1
    m += (1.0 - b1) * grad
    v *= b2
    v += (1.0 - b2) * grad * grad
    m_hat = m / (1.0 - b1**step)
    v_hat = v / (1.0 - b2**step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def epoch_lr_factor(schedule: str, epoch: int, total_epochs: int, floor: float = 0.05) -> float:
    """Multiplicative learning-rate factor for 1-indexed ``epoch`` of ``total_epochs``.

    ``cosine`` anneals from 1 at the first epoch to ``floor`` at the last;
    ``constant`` always returns 1.
    """
    if schedule == "constant":
        return 1.0
    if schedule != "cosine":
        raise ValueError(f"unknown lr schedule {schedule!r}; choose 'cosine' or 'constant'")
    if total_epochs <= 1:
        return 1.0
    progress = (epoch - 1) / (total_epochs - 1)
    return floor + (1.0 - floor) * 0.5 * (1.0 + np.cos(np.pi * progress))


class Adam:
    def __init__(
        self,
        params: list[Parameter],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        if not 0.0 <= betas[0] < 1.0 or not 0.0 <= betas[1] < 1.0:
            raise ValueError(f"betas must lie in [0, 1), got {betas}")
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.step_count += 1
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            adam_step(p.data, p.grad, m, v, self.step_count, self.lr, self.betas, self.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
