"""Adam with bias correction."""

import numpy as np

from .errors import ShapeError


def adam_step(params, grads, state, t, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update.

    ``params``/``grads`` map names to arrays; ``state`` maps names to
    ``(m, v)`` pairs (zeros before the first step).  Returns new
    ``(params, state)``; inputs are not modified.  ``t`` counts from 1.
    """
    if t < 1:
        raise ValueError(f"step index must be >= 1, got {t}")
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_params, new_state = {}, {}
    for name, theta in params.items():
        g = grads[name]
        m, v = state[name]
        if not (theta.shape == g.shape == m.shape == v.shape):
            raise ShapeError(f"adam: shape mismatch for {name}: {theta.shape}, {g.shape}, {m.shape}, {v.shape}")
        dt = theta.dtype.type
        m = dt(beta1) * m + dt(1.0 - beta1) * g
        v = dt(beta2) * v + dt(1.0 - beta2) * (g * g)
        m_hat = m / dt(bc1)
        v_hat = v / dt(bc2)
        new_params[name] = theta - dt(lr) * m_hat / (np.sqrt(v_hat) + dt(eps))
        new_state[name] = (m, v)
    return new_params, new_state


def bias_corrected_moments(state, t, beta1=0.9, beta2=0.999):
    return {name: (m / (1.0 - beta1 ** t), v / (1.0 - beta2 ** t)) for name, (m, v) in state.items()}


class Adam:
    """Applies :func:`adam_step` to a dict of parameter Tensors in place."""

    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = {k: (np.zeros_like(p.data), np.zeros_like(p.data)) for k, p in params.items()}
        self.t = 0

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.t += 1
        values = {k: p.data for k, p in self.params.items()}
        grads = {k: (np.zeros_like(p.data) if p.grad is None else p.grad.astype(p.data.dtype))
                 for k, p in self.params.items()}
        values, self.state = adam_step(values, grads, self.state, self.t,
                                       self.lr, self.beta1, self.beta2, self.eps)
        for k, p in self.params.items():
            p.data = values[k]
