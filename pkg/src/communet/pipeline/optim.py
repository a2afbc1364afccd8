"""Adam with bias correction and a constant learning rate."""

from __future__ import annotations

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


def adam_step(params, grads, moments, step, lr, beta1=BETA1, beta2=BETA2, eps=EPS):
    """Update ``params`` and ``moments`` in place for 1-based ``step``.

    ``params`` and ``grads`` map names to arrays; ``moments`` maps names to
    ``(m, v)`` pairs.  Parameters without a gradient are left untouched.
    Returns ``(params, moments)`` for convenience.
    """
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    bc1 = 1.0 - beta1**step
    bc2 = 1.0 - beta2**step
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            continue
        m, v = moments[name]
        dt = theta.dtype.type
        m *= dt(beta1)
        m += dt(1.0 - beta1) * g
        v *= dt(beta2)
        v += dt(1.0 - beta2) * (g * g)
        m_hat = m / dt(bc1)
        v_hat = v / dt(bc2)
        theta -= dt(lr) * m_hat / (np.sqrt(v_hat) + dt(eps))
    return params, moments


class Adam:
    """Adam over a dict of :class:`~communet.nn.Tensor` parameters."""

    def __init__(self, params, lr=1e-3):
        self.params = params
        self.lr = lr
        self.step_count = 0
        self.moments = {
            name: (np.zeros_like(p.data), np.zeros_like(p.data)) for name, p in params.items()
        }

    def step(self) -> None:
        self.step_count += 1
        adam_step(
            {n: p.data for n, p in self.params.items()},
            {n: p.grad for n, p in self.params.items()},
            self.moments,
            self.step_count,
            self.lr,
        )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None
