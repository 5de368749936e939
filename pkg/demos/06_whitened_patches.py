"""
Instance norm on whitened inputs
================================

When the patches feeding a linear filter are whitened, normalizing each
filter response over the patches is the same as dividing the filter by its
norm.  Layer norm only matches this when all filters share a norm.
"""

import numpy as np

from switchnorm import Rng
from switchnorm.analysis import verify_remark1_in, verify_remark1_ln

for seed in range(3):
    e_in = verify_remark1_in(Rng(seed), 4, 8, 256, 2.0, -1.0)
    e_ln = verify_remark1_ln(Rng(seed), 4, 8, 256, 2.0, -1.0)
    print(f"seed {seed}: IN identity error {e_in:.1e}   LN gap {e_ln:.3f}")

# equal-norm filters still leave a gap against the summed-norm form
w = 2.0 * np.eye(8)[:4]
print("orthogonal filters, LN gap", f"{verify_remark1_ln(Rng(0), 4, 8, 256, 1.0, 0.0, filters=w):.3f}")
