"""
Calibrating batch statistics for inference
==========================================

After training, the batch-norm branch needs fixed statistics.  A moving average
is tracked during training.  Batch averaging instead freezes the network and
averages statistics over a few fresh minibatches.
"""

from dataclasses import replace

from switchnorm.harness import TrainConfig, run_experiment

cfg = TrainConfig(steps=600, lr_decay_at=400, seed=0)
result = run_experiment(cfg, checkpoint_every=200)

print("step  batch-avg  moving-avg")
for step, ba, ma in result.checkpoints:
    print(f"{step:4d}  {ba:9.4f}  {ma:10.4f}")
print(f"train accuracy {result.acc_train:.4f}")

# fewer calibration batches give noisier estimates
for batches in (1, 5, 50):
    r = run_experiment(replace(cfg, sample_batches=batches))
    print(f"{batches:3d} calibration batches -> test accuracy {r.acc_batch_average:.4f}")
