# NMP and tracking bounds against the look-ahead n_d for the Case I plant.
# Requirements: numpy, matplotlib
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from uioinv import cases
from uioinv.estimator import design_inverse, nmp_error_bound
from uioinv.tracker import tracking_error_bound

d = design_inverse(cases.case1_plant())
nds = np.arange(1, 31)
nmp = [nmp_error_bound(d.zero_dyn, d.sys, k) for k in nds]
trk = [tracking_error_bound(d.sys, d.partition, d.zero_dyn, k) for k in nds]

fig, ax = plt.subplots(figsize=(6, 4))
ax.semilogy(nds, nmp, "o-", label="NMP state bound")
ax.semilogy(nds, trk, "s-", label="tracking bound")
ax.semilogy(nds, nmp[0] * (1 / 1.5) ** (nds - 1), "k--", lw=0.8, label="slope 1/1.5")
ax.set_xlabel("n_d")
ax.set_ylabel("bound (unit-energy input)")
ax.legend()
ax.grid(True, which="both", alpha=0.3)
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else "bound_curve.png"
fig.savefig(out, dpi=120)
print("saved", out)
