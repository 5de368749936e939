"""
Sharing moments across normalizer scopes
========================================

Instance statistics are computed once per (sample, channel).  Layer and batch
statistics are then just averages of those moments, so no second pass over the
tensor is needed.
"""

import numpy as np

from switchnorm import Rng, Scope, stats_direct, stats_reuse, tensor_randn

rng = Rng(0)
x = tensor_randn(rng, 4, 3, 5, 5, mean=2.0, std=1.5)

s_in, s_ln, s_bn = stats_reuse(x)
print("IN mean shape", s_in.mu.shape, " LN", s_ln.mu.shape, " BN", s_bn.mu.shape)

# compare against computing each scope from scratch
for reused in (s_in, s_ln, s_bn):
    direct = stats_direct(x, reused.scope)
    print(f"{reused.scope.value}: max |mu diff| = {np.abs(reused.mu - direct.mu).max():.1e}"
          f"  max |var diff| = {np.abs(reused.var - direct.var).max():.1e}")

# group norm sits between LN (one group) and IN (one group per channel)
gn = stats_direct(x, Scope.GN, group_count=1)
print("GN with one group equals LN:", np.allclose(gn.mu[:, 0], s_ln.mu))

# with a single sample the batch collapses onto the instance
s_in1, _, s_bn1 = stats_reuse(x[:1])
print("N=1, BN == IN:", np.allclose(s_bn1.var, s_in1.var[0], atol=1e-12))
