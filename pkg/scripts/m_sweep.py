"""Grover fidelity against m for N=40, unheralded and heralded (C=100, w=0.1)."""
from _common import parser, write
from grover_carving.experiments import sweep_m

args = parser(__doc__).parse_args()
cols = {}
for mode in ("unheralded", "heralded"):
    res = sweep_m(40, range(1, 40), herald_mode=mode, workers=args.workers)
    cols["m"] = res.grid
    cols[f"F_{mode}"] = res.fidelity
    cols[f"P_{mode}"] = res.success_probability
    cols[f"k_{mode}"] = res.steps
write(args.out, "m_sweep.csv", cols)
