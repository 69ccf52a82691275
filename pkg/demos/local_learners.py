"""The two learners that live at each node, run on their own.

Follow-the-Leader predicts the running mean under the square loss.  The
self-confident weighted majority mixes the constant-0 and constant-1 experts
under the absolute loss.  Both are compared with the best constant chosen in
hindsight.
"""

import math

import numpy as np

from locadapt import LossKind
from locadapt.learners import LN2, WM_REGRET_CONSTANT, FtlState, WmState, local_best

rng = np.random.default_rng(0)

labels = np.clip(0.7 + 0.2 * rng.standard_normal(2000), 0, 1)
ftl, loss = FtlState(), 0.0
for y in labels:
    loss += 0.5 * (y - ftl.predict()) ** 2
    ftl.update(y)
best_c, best = local_best(ftl, LossKind.SQUARE)
T = len(labels)
print(f"FTL  : loss {loss:.3f}, best constant {best_c:.3f} with {best:.3f}, "
      f"regret {loss - best:.3f} (log-bound {8 * math.log(math.e * T):.1f})")

bits = (rng.random(2000) < 0.2).astype(float)
wm, loss = WmState(), 0.0
for y in bits:
    loss += abs(y - wm.predict())
    wm.update(y)
best_c, best = local_best(wm, LossKind.ABSOLUTE)
envelope = 2 * math.sqrt(2 * LN2 * best) + WM_REGRET_CONSTANT * LN2
print(f"WM   : loss {loss:.1f}, best expert {best_c:.0f} with {best:.0f}, "
      f"regret {loss - best:.2f} (first-order bound {envelope:.2f})")
