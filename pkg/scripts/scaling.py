"""Infidelity of chi_0 and chi_m against C with the fitted log-log slopes (N=15, w=0)."""
import numpy as np

from _common import parser, write
from grover_carving.experiments import fit_scaling

args = parser(__doc__).parse_args()
C_grid = np.logspace(2, 5, 13)
cols = {"C": C_grid}
for mode in ("unheralded", "heralded"):
    for m in range(4):
        fit = fit_scaling(m, 15, mode, C_grid, w=0.0)
        cols[f"infid_{mode}_m{m}"] = fit.infidelity
        print(f"{mode} m={m}: slope {fit.slope:.3f} (residual {fit.residual:.3f})")
write(args.out, "scaling.csv", cols)
