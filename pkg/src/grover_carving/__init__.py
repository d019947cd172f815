"""Deterministic Dicke, GHZ and Cat state preparation by Grover iteration in cavity QED."""
__version__ = "0.1.0"

from .dicke import (
    DickeKet,
    LiouvilleState,
    css_state,
    dicke_overlap,
    ghz_state,
    pure_fidelity,
    wigner_rotation,
)
from .grover import (
    ProtocolPlan,
    build_cat_grover,
    build_dicke_grover,
    build_ghz_grover,
    min_steps_exact,
    plan_dicke,
    plan_dicke_long,
    solve_rotation_angle,
)
from .cavity import CavityParams, DiagonalSuperop, Wavepacket, build_superop


__all__ = [
    "CavityParams", "DiagonalSuperop", "DickeKet", "LiouvilleState", "ProtocolPlan", "Wavepacket",
    "build_cat_grover", "build_dicke_grover", "build_ghz_grover", "build_superop", "css_state",
    "dicke_overlap", "ghz_state", "min_steps_exact", "plan_dicke", "plan_dicke_long",
    "pure_fidelity", "solve_rotation_angle", "wigner_rotation",
]
