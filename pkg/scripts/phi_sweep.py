"""chi_m fidelity against the CSS angle (N=40, m=0..4, C=100, w=0.1)."""
import math

import numpy as np

from _common import parser, write
from grover_carving.experiments import sweep_phi, worst_case_phi

args = parser(__doc__).parse_args()
phis = np.linspace(0.0, math.pi, 181)
cols = {"phi": phis}
for m in range(5):
    res = sweep_phi(40, m, phis, d=math.inf if m == 0 else None)
    cols[f"F_m{m}"] = res.fidelity
    print(f"m={m}: argmin {res.argmin():.4f}, worst-case angle {worst_case_phi(40, m):.4f}")
write(args.out, "phi_sweep.csv", cols)
