"""Ideal-Grover fidelity against mode-matching efficiency for k=1..4 and the 0.99 thresholds."""
import numpy as np

from _common import parser, write
from grover_carving.channels import mismatch_fidelity_closed, mismatch_threshold

args = parser(__doc__).parse_args()
zetas = np.linspace(0.9, 1.0, 201)
cols = {"zeta": zetas}
for k in range(1, 5):
    cols[f"F_k{k}"] = np.array([mismatch_fidelity_closed(k, z) for z in zetas])
    print(f"k={k}: F >= 0.99 for zeta >= {mismatch_threshold(k):.5f}")
write(args.out, "mismatch.csv", cols)
