"""Channels on Dicke-basis density matrices: mode mismatch, cavity superoperators, Grover steps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cavity import DiagonalSuperop
from .dicke import DickeKet, LiouvilleState, devectorize, trace_of, vectorize, wigner_rotation
from .grover import PhaseInversion, ProtocolPlan, hadamard_dicke

LOSS_FLOOR = 1e-15


class TotalLossError(RuntimeError):
    """Heralded branch has (numerically) zero probability."""


# --- mode mismatch ------------------------------------------------------------

def _as_matrix(rho):
    if isinstance(rho, LiouvilleState):
        return rho.matrix(), True
    return np.asarray(rho, dtype=complex), False


def _wrap(mat, was_state):
    return LiouvilleState.from_matrix(mat) if was_state else mat


def _conjugate(mat, op):
    op = np.asarray(op)
    if op.ndim == 1:
        return op[:, None] * mat * op.conj()[None, :]
    return op @ mat @ op.conj().T


def apply_mismatch(rho, chi, zeta: float):
    """zeta chi rho chi^dag + (1 - zeta) rho.

    ``chi`` is a unitary matrix or the diagonal of a diagonal one. ``rho`` is a
    density matrix or a LiouvilleState; the output has the same type.
    """
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"mode-matching efficiency must lie in [0, 1], got {zeta!r}")
    mat, was_state = _as_matrix(rho)
    out = zeta * _conjugate(mat, chi) + (1.0 - zeta) * mat
    return _wrap(out, was_state)


@dataclass(frozen=True)
class MismatchChannel:
    zeta: float
    inner: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"mode-matching efficiency must lie in [0, 1], got {self.zeta!r}")

    def __call__(self, rho):
        return apply_mismatch(rho, self.inner, self.zeta)


def _special_closed(k: int, z: float) -> float:
    if k == 1:
        return (1 + 3 * z**2) / 4
    if k == 2:
        r5 = math.sqrt(5)
        return ((5 + 3 * r5) * z**4 - 8 * r5 * z**3 + 6 * r5 * z**2 - r5 + 3) / 8
    if k == 3:
        s1, s3, c2 = math.sin(math.pi / 14), math.sin(3 * math.pi / 14), math.cos(math.pi / 7)
        poly = (
            2 * z**6 * (10 + 4 * s1 + 13 * s3 + 19 * c2)
            - 16 * z**5 * (3 + s1 + 4 * s3 + 6 * c2)
            + z**4 * (54 + 10 * s1 + 64 * s3 + 108 * c2)
            - 32 * z**3 * (1 + s3 + 2 * c2)
            + 12 * z**2 * (1 + s3 + 2 * c2)
            + 1
        )
        return s1**2 * poly
    s, c1, c2 = math.sin(math.pi / 18), math.cos(math.pi / 9), math.cos(2 * math.pi / 9)
    poly = (
        z**8 * (104 + 28 * s + 138 * c1 + 108 * c2)
        + z**7 * (-348 - 96 * s - 480 * c1 - 360 * c2)
        + z**6 * (523 + 136 * s + 760 * c1 + 530 * c2)
        + z**5 * (-448 - 96 * s - 704 * c1 - 448 * c2)
        + z**4 * (240 + 30 * s + 420 * c1 + 240 * c2)
        + z**3 * (-80 - 160 * c1 - 80 * c2)
        + z**2 * (20 + 40 * c1 + 20 * c2)
        + 1
    )
    return s**2 * poly


def _general_closed(k: int, z: float, theta: float) -> float:
    c = lambda j: math.cos(j * theta)  # noqa: E731
    base = 0.5 * (1 - c(1))
    if k == 1:
        return 0.5 * z**2 * (c(1) - c(3)) + base
    if k == 2:
        return (
            0.5 * z**4 * (2 * c(1) - 2 * c(1) * c(4))
            + 0.5 * z**3 * (8 * c(1) * c(2) - 8 * c(1))
            + 0.5 * z**2 * (6 * c(1) - 6 * c(1) * c(2))
            + base
        )
    if k == 3:
        return (
            0.5 * z**6 * (5 * c(1) - c(3) - 3 * c(5) - c(7))
            + 0.5 * z**5 * (-16 * c(1) + 8 * c(3) + 8 * c(5))
            + 0.5 * z**4 * (22 * c(1) - 17 * c(3) - 5 * c(5))
            + 0.5 * z**3 * (16 * c(3) - 16 * c(1))
            + 0.5 * z**2 * (6 * c(1) - 6 * c(3))
            + base
        )
    return (
        0.5 * z**8 * (14 * c(1) - 8 * c(5) - 5 * c(7) - c(9))
        + 0.5 * z**7 * (-60 * c(1) + 12 * c(3) + 36 * c(5) + 12 * c(7))
        + 0.5 * z**6 * (115 * c(1) - 47 * c(3) - 61 * c(5) - 7 * c(7))
        + 0.5 * z**5 * (-128 * c(1) + 80 * c(3) + 48 * c(5))
        + 0.5 * z**4 * (90 * c(1) - 75 * c(3) - 15 * c(5))
        + 0.5 * z**3 * (40 * c(3) - 40 * c(1))
        + 0.5 * z**2 * (10 * c(1) - 10 * c(3))
        + base
    )


def mismatch_fidelity_closed(k: int, zeta: float, theta: float | None = None) -> float:
    """Target fidelity after k mismatched Dicke Grover steps (two events per step).

    With ``theta=None`` the special angle theta/2 = pi/(2(2k+1)) form is used;
    otherwise the general-theta polynomial.
    """
    if k not in (1, 2, 3, 4):
        raise ValueError(f"closed forms exist for k = 1..4 only, got {k!r}")
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"mode-matching efficiency must lie in [0, 1], got {zeta!r}")
    if theta is None:
        return _special_closed(k, zeta)
    return _general_closed(k, zeta, theta)


def mismatch_fidelity_recursive(k: int, zeta: float, theta: float) -> float:
    """Same quantity from explicit channel application in the 2-d target/complement plane."""
    s, c = math.sin(theta / 2), math.cos(theta / 2)
    psi_i = np.array([s, c])
    chi_t = np.diag([-1.0, 1.0])
    chi_i = np.eye(2) - 2 * np.outer(psi_i, psi_i)
    rho = np.outer(psi_i, psi_i).astype(complex)
    for _ in range(k):
        rho = apply_mismatch(rho, chi_t, zeta)
        rho = apply_mismatch(rho, chi_i, zeta)
    return float(rho[0, 0].real)


def mismatch_threshold(k: int, target: float = 0.99) -> float:
    """Smallest zeta with special-angle fidelity >= target."""
    from scipy.optimize import brentq

    return float(brentq(lambda z: mismatch_fidelity_closed(k, z) - target, 0.5, 1.0, xtol=1e-14))


# --- schedules of ideal inversions, for mismatch studies ------------------------

@dataclass(frozen=True)
class ScheduleEvent:
    kind: str  # "unitary" or "inversion"
    op: np.ndarray


def _inv(n, *targets):
    return ScheduleEvent("inversion", PhaseInversion(n, tuple(targets)).diag)


def _uni(mat):
    return ScheduleEvent("unitary", np.asarray(mat))


def step_schedule(plan: ProtocolPlan) -> list[ScheduleEvent]:
    """One Grover step as alternating basis changes and photon-implemented inversions."""
    n = plan.n_qubits
    if plan.alpha != math.pi:
        raise ValueError("mismatch schedules are defined for standard inversions only")
    if plan.kind == "dicke":
        rot = wigner_rotation(n, plan.phi).matrix
        return [_inv(n, plan.m), _uni(rot.T), _inv(n, 0), _uni(rot)]
    if plan.kind == "ghz":
        if plan.variant == "hadamard":
            b_in = b_out = hadamard_dicke(n)
        else:
            angle = plan.phi if plan.variant == "exact" else math.pi / 2
            rot = wigner_rotation(n, angle).matrix
            b_in, b_out = rot, rot.T
        return [_inv(n, 0), _inv(n, n), _uni(b_in), _inv(n, plan.m), _uni(b_out)]
    if plan.kind == "cat":
        if plan.variant == "projector":
            raise ValueError("the projector cat inversion has no photon implementation")
        r1 = wigner_rotation(n, plan.phi).matrix
        r2 = wigner_rotation(n, -2 * plan.phi).matrix
        return [_uni(r1), _inv(n, 0), _uni(r2), _inv(n, 0), _uni(r1), _inv(n, plan.m)]
    raise ValueError(f"unknown plan kind {plan.kind!r}")


def schedule_unitary(events) -> np.ndarray:
    """Product of the schedule with every inversion ideal (zeta = 1)."""
    dim = events[0].op.shape[0]
    out = np.eye(dim, dtype=complex)
    for ev in events:
        op = np.diag(ev.op) if ev.op.ndim == 1 else ev.op
        out = op @ out
    return out


def run_schedule(rho: np.ndarray, events, zeta: float, steps: int) -> np.ndarray:
    mat = np.asarray(rho, dtype=complex)
    for _ in range(steps):
        for ev in events:
            mat = _conjugate(mat, ev.op) if ev.kind == "unitary" else apply_mismatch(mat, ev.op, zeta)
    return mat


def mismatch_events_per_step(plan: ProtocolPlan) -> int:
    return sum(ev.kind == "inversion" for ev in step_schedule(plan))


# --- cavity superoperators ------------------------------------------------------

def apply_superop(state: LiouvilleState, sup: DiagonalSuperop) -> LiouvilleState:
    if state.n_qubits != sup.n_qubits:
        raise ValueError(
            f"state has N={state.n_qubits} but superoperator has N={sup.n_qubits}"
        )
    return LiouvilleState(state.n_qubits, state.vec * sup.entries)


def apply_rotation_conjugation(state: LiouvilleState, rot) -> LiouvilleState:
    """R rho R^dag on the reshaped vector; ``rot`` is a matrix or WignerRotation."""
    mat = getattr(rot, "matrix", rot)
    rho = devectorize(state.vec)
    return LiouvilleState(state.n_qubits, vectorize(mat @ rho @ mat.conj().T))


def dense_superop(sup: DiagonalSuperop) -> np.ndarray:
    """(N+1)^2 x (N+1)^2 matrix form, for cross-checks on small N."""
    return np.diag(sup.entries)


def dense_conjugation(mat: np.ndarray) -> np.ndarray:
    """A rho A^dag as the superoperator kron(A, conj(A)) (row-major vec)."""
    return np.kron(mat, np.asarray(mat).conj())


def blend_mismatch(sup: DiagonalSuperop, zeta: float) -> DiagonalSuperop:
    """Mismatched fraction reflects without touching the atoms: zeta K + (1 - zeta) 1."""
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"mode-matching efficiency must lie in [0, 1], got {zeta!r}")
    return DiagonalSuperop(sup.n_qubits, zeta * sup.entries + (1 - zeta), sup.herald_mode)


@dataclass(frozen=True)
class PhysicalGroverStep:
    """R(phi) K(0) R(-phi) K(delta_omega_m) in Liouville space."""

    phi: float
    target: DiagonalSuperop
    zero: DiagonalSuperop
    herald_mode: str = "unheralded"
    rotation: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.target.n_qubits != self.zero.n_qubits:
            raise ValueError("superoperators act on different qubit numbers")
        if self.target.herald_mode != self.herald_mode or self.zero.herald_mode != self.herald_mode:
            raise ValueError("superoperator herald modes disagree with the step")
        object.__setattr__(self, "rotation", wigner_rotation(self.target.n_qubits, self.phi).matrix)

    @property
    def n_qubits(self) -> int:
        return self.target.n_qubits

    def dense(self) -> np.ndarray:
        rot = self.rotation
        return (
            dense_conjugation(rot) @ dense_superop(self.zero)
            @ dense_conjugation(rot.T) @ dense_superop(self.target)
        )


def physical_grover_apply(state: LiouvilleState, step: PhysicalGroverStep, k: int,
                          record=None) -> LiouvilleState:
    """k physical Grover steps. ``record`` (a list) receives the trace after each step."""
    if k < 1:
        raise ValueError("k must be at least 1")
    rot = step.rotation
    tgt = step.target.matrix()
    zero = step.zero.matrix()
    rho = devectorize(state.vec)
    for _ in range(k):
        rho = rho * tgt
        rho = rot.T @ rho @ rot
        rho = rho * zero
        rho = rot @ rho @ rot.T
        if record is not None:
            record.append(float(np.trace(rho).real))
    return LiouvilleState(state.n_qubits, vectorize(rho))


def herald_metrics(state: LiouvilleState, target: DickeKet) -> tuple[float, float]:
    """(trace-normalised fidelity, success probability)."""
    prob = trace_of(state)
    if prob < LOSS_FLOOR:
        raise TotalLossError(f"heralded branch probability {prob:.3e} below {LOSS_FLOOR}")
    ideal = vectorize(target.projector())
    return float(np.vdot(ideal, state.vec).real) / prob, prob


def x_flip_all(state):
    """Global X on every qubit: |m> -> |N-m> on both density-matrix indices."""
    mat, was_state = _as_matrix(state)
    return _wrap(mat[::-1, ::-1].copy(), was_state)
