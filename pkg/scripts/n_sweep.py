"""Grover fidelity against N for m=1 (C=100, w=0.1)."""
import numpy as np

from _common import parser, write
from grover_carving.experiments import sweep_N

args = parser(__doc__).parse_args()
res = sweep_N(1, range(15, 51), workers=args.workers)
print(f"spread {np.ptp(res.fidelity):.4f}")
write(args.out, "n_sweep.csv", res.columns())
