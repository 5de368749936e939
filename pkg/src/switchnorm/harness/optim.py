from __future__ import annotations

import numpy as np


class SGD:
    """SGD with heavy-ball momentum and one weight-decay coefficient per group.

    For each parameter ``p`` in decay group ``g``::

        v <- momentum * v + (grad + decay[g] * p)
        p <- p - lr * v
    """

    def __init__(self, params, lr: float, momentum: float = 0.9,
                 weight_decay: dict[str, float] | None = None):
        self.params = list(params)  # (name, group, array) triples
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = dict(weight_decay or {})
        self.velocity = {name: np.zeros_like(arr) for name, _, arr in self.params}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, group, p in self.params:
            g = grads[name]
            decay = self.weight_decay.get(group, 0.0)
            if decay:
                g = g + decay * p
            v = self.velocity[name]
            v *= self.momentum
            v += g
            p -= self.lr * v
