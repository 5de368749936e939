"""
How minibatch size moves the learned weights
============================================

Small minibatches give noisy batch statistics, so the layers lean towards layer
statistics.  Large minibatches make the batch branch attractive.  This takes a
few minutes with the default settings.
"""

import sys

from switchnorm.harness import TrainConfig, batch_size_sweep

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
report = batch_size_sweep(TrainConfig(steps=steps), [2, 32], range(5))

print("seed   w_bn(2)  w_bn(32)  w_ln(2)  w_ln(32)")
for seed in range(5):
    small, large = report.run(2, seed), report.run(32, seed)
    print(f"{seed:4d}  {small.w_bn:8.3f}  {large.w_bn:8.3f}  {small.w_ln:7.3f}  {large.w_ln:8.3f}")
print(report.summary())
