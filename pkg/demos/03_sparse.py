"""
Sparse selection
================

Replacing the softmax by an argmax turns the layer into whichever single
normalizer has the largest logit.
"""

import numpy as np

from switchnorm import AffineParams, Rng, SnParams, normalize_forward, sn_forward, sn_sparsify
from switchnorm import tensor_randn

rng = Rng(2)
x = tensor_randn(rng, 4, 3, 5, 5)
params = SnParams(np.ones(3), np.zeros(3), np.array([0.1, 0.9, 0.3]), np.array([2.0, 0.0, 0.0]))
sparse = sn_sparsify(params)
print("mean weights     ", sparse.w_mu)
print("variance weights ", sparse.w_var)

# matching logits for both triplets give back a plain normalizer
for k, scope in enumerate(("in", "ln", "bn")):
    lam = np.zeros(3)
    lam[k] = 1.0
    y, _ = sn_forward(x, sn_sparsify(SnParams(np.ones(3), np.zeros(3), lam, lam.copy())))
    ref = normalize_forward(x, scope, AffineParams.identity(3))
    print(f"argmax {scope}: max diff {np.abs(y - ref).max():.1e}")
