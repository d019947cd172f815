"""Probabilistic carving against deterministic Grover preparation (N=40, C=1e3)."""
import numpy as np

from _common import parser, write
from grover_carving.experiments import carving_baseline, carving_ideal_success, optimize_steps

args = parser(__doc__).parse_args()
C = 1e3
ms = np.arange(1, 21)
rows = {"m": ms, "carving_infidelity": [], "carving_success": [], "ideal_success": [],
        "grover_fidelity": [], "grover_steps": []}
for m in ms:
    carve = carving_baseline(40, int(m), C)
    grover = optimize_steps(40, int(m), C=C, w=0.0)
    rows["carving_infidelity"].append(carve.infidelity)
    rows["carving_success"].append(carve.success_probability)
    rows["ideal_success"].append(carving_ideal_success(40, int(m)))
    rows["grover_fidelity"].append(grover.fidelity)
    rows["grover_steps"].append(grover.steps)
write(args.out, "carving.csv", {k: np.asarray(v) for k, v in rows.items()})
