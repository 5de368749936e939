"""
One switchable layer, forward and backward
==========================================

A layer mixes the three sets of statistics with softmax weights, one triplet for
means and one for variances.  The hand-written backward pass is checked against
central differences.
"""

import numpy as np

from switchnorm import Rng, SnParams, sn_backward, sn_forward, tensor_randn
from switchnorm.harness import gradcheck

rng = Rng(1)
x = tensor_randn(rng, 8, 4, 6, 6)
params = SnParams.init(4)
params.lambda_mu[:] = [0.5, -0.2, 1.0]
params.lambda_var[:] = [-1.0, 0.3, 0.0]
print("mean weights     ", np.round(params.w_mu, 4))
print("variance weights ", np.round(params.w_var, 4))

y, cache = sn_forward(x, params)
print("output per-channel mean", np.round(y.mean(axis=(0, 2, 3)), 4))

grads = sn_backward(np.ones_like(y) / y.size, cache, params)
# gradients on each triplet live on the tangent of the simplex
print("d lambda_mu sums to", f"{grads.d_lambda_mu.sum():.1e}")

result = gradcheck((2, 3, 4, 4), seed=7)
for group, err in result.errors.items():
    print(f"  {group:<11s} relative error {err:.2e}")
print("gradcheck passed:", result.passed(1e-5))
