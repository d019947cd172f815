"""Error-free Grover protocols for Dicke, GHZ and Cat targets."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dicke import (
    DickeKet,
    css_state,
    dicke_overlap,
    ghz_state,
    hadamard_dicke,
    log_binom,
    max_dicke_overlap_sq,
    optimal_css_angle,
    wigner_rotation,
)


class ExistenceViolated(ValueError):
    """No rotation angle reaches the overlap needed for exact preparation in k steps."""


class InadmissibleSteps(ValueError):
    """Step count below the minimum for which the modified phase exists."""


class NoAdmissibleSeed(ValueError):
    pass


def exact_overlap(k: int) -> float:
    """Overlap amplitude that lands on the target after exactly k iterations."""
    return math.sin(math.pi / (2 * (2 * k + 1)))


def grover_fidelity(theta: float, k: int) -> float:
    return math.sin((2 * k + 1) * theta / 2) ** 2


def steps_for_overlap(theta: float) -> float:
    return math.pi / (2 * theta) - 0.5


def round_steps(k_real: float) -> int:
    """Nearest non-zero integer."""
    return max(1, int(math.floor(k_real + 0.5)))


def long_phase(theta: float, k: int) -> float:
    """Phase alpha making k+1 modified iterations exact."""
    arg = math.sin(math.pi / (4 * k + 6)) / math.sin(theta / 2)
    if arg > 1 + 1e-14:
        k_min = min_long_steps(theta)
        raise InadmissibleSteps(f"k={k} is below the admissible minimum {k_min} for theta={theta}")
    return 2 * math.asin(min(arg, 1.0))


def min_long_steps(theta: float) -> int:
    return int((math.pi - theta) // (2 * theta))


# --- phase inversions -------------------------------------------------------

@dataclass(frozen=True)
class PhaseInversion:
    """Diagonal inversion chi_m(alpha) on one or more Dicke components."""

    n_qubits: int
    targets: tuple
    alpha: float = math.pi

    @property
    def diag(self) -> np.ndarray:
        d = np.ones(self.n_qubits + 1, dtype=complex)
        # exact -1 for the standard inversion, not exp(i pi)
        d[list(self.targets)] = -1.0 if self.alpha == math.pi else np.exp(1j * self.alpha)
        return d

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag)


def inversion(n_qubits: int, *targets: int, alpha: float = math.pi) -> np.ndarray:
    return PhaseInversion(n_qubits, tuple(targets), alpha).matrix()


def projector_inversion(ket: np.ndarray, alpha: float = math.pi) -> np.ndarray:
    """1 - (1 - e^{i alpha}) |psi><psi|."""
    ket = np.asarray(ket, dtype=complex)
    return np.eye(ket.size, dtype=complex) - (1 - np.exp(1j * alpha)) * np.outer(ket, ket.conj())


def iterate(step: np.ndarray, amps: np.ndarray, k: int) -> np.ndarray:
    out = np.asarray(amps, dtype=complex)
    for _ in range(k):
        out = step @ out
    return out


def overlap_fidelity(amps: np.ndarray, target: np.ndarray) -> float:
    return float(abs(np.vdot(target, amps)) ** 2)


# --- Dicke --------------------------------------------------------------------

def solve_rotation_angle(n_qubits: int, m: int, k: int) -> list[float]:
    """Angles phi in [0, pi] with <m|R(phi)^N|0> = sin(pi / (2(2k+1))), ascending."""
    if not 0 <= m <= n_qubits:
        raise ValueError(f"excitation number {m} outside 0..{n_qubits}")
    if k < 1:
        raise ValueError("k must be a positive integer")
    x = exact_overlap(k)
    if max_dicke_overlap_sq(n_qubits, m) < x * x:
        raise ExistenceViolated(
            f"|{m}> with N={n_qubits} cannot be prepared exactly in {k} step(s): "
            f"max squared overlap {max_dicke_overlap_sq(n_qubits, m):.6g} < {x * x:.6g}"
        )
    peak = optimal_css_angle(n_qubits, m)

    def f(phi):
        return dicke_overlap(n_qubits, m, phi) - x

    f_peak = f(peak)
    if f_peak == 0.0:
        return [peak]
    roots = []
    if peak > 0 and f(0.0) < 0:
        roots.append(brentq(f, 0.0, peak, xtol=1e-14, rtol=1e-15, maxiter=500))
    if peak < math.pi and f(math.pi) < 0:
        roots.append(brentq(f, peak, math.pi, xtol=1e-14, rtol=1e-15, maxiter=500))
    return sorted(roots)


def min_steps_exact(n_qubits: int, m: int) -> int:
    """Fewest integer steps that prepare |m> exactly from a rotated product state."""
    if not 1 <= m <= n_qubits - 1:
        raise ValueError(f"need 1 <= m <= N-1, got m={m}, N={n_qubits}")
    best = max_dicke_overlap_sq(n_qubits, m)
    # sin(pi/(2(2k+1)))^2 <= best  <=>  k >= pi/(4 asin(sqrt(best))) - 1/2
    k = max(1, math.ceil(math.pi / (4 * math.asin(math.sqrt(best))) - 0.5 - 1e-12))
    while exact_overlap(k) ** 2 > best:
        k += 1
    while k > 1 and exact_overlap(k - 1) ** 2 <= best:
        k -= 1
    return k


def build_dicke_grover(n_qubits: int, m: int, phi: float, alpha: float = math.pi) -> np.ndarray:
    """G = R(phi) chi_0(alpha) R(-phi) chi_m(alpha)."""
    rot = wigner_rotation(n_qubits, phi).matrix
    chi0 = PhaseInversion(n_qubits, (0,), alpha).diag
    chim = PhaseInversion(n_qubits, (m,), alpha).diag
    return (rot * chi0[None, :]) @ rot.T * chim[None, :]


def build_hadamard_grover(n_qubits: int, m: int, alpha: float = math.pi) -> np.ndarray:
    """Textbook iteration H chi_0 H chi_m starting from the uniform superposition."""
    had = hadamard_dicke(n_qubits)
    chi0 = PhaseInversion(n_qubits, (0,), alpha).diag
    chim = PhaseInversion(n_qubits, (m,), alpha).diag
    return (had * chi0[None, :]) @ had * chim[None, :]


def hadamard_overlap_theta(n_qubits: int, m: int) -> float:
    s = math.exp(0.5 * float(log_binom(n_qubits, m)) - 0.5 * n_qubits * math.log(2))
    return 2 * math.asin(s)


@dataclass(frozen=True)
class ProtocolPlan:
    kind: str
    n_qubits: int
    m: int
    steps: int
    phi: float
    alpha: float = math.pi
    predicted_fidelity: float = 1.0
    variant: str = "exact"
    roots: tuple = ()
    inversions: tuple = ()
    phi_cat: float | None = None
    parity: int = 1
    prelude: "ProtocolPlan | None" = None
    notes: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "n_qubits": self.n_qubits,
            "m": self.m,
            "steps": self.steps,
            "phi": self.phi,
            "alpha": self.alpha,
            "predicted_fidelity": self.predicted_fidelity,
            "variant": self.variant,
            "roots": list(self.roots),
            "inversions": list(self.inversions),
        }
        if self.phi_cat is not None:
            out["phi_cat"] = self.phi_cat
            out["parity"] = "+" if self.parity > 0 else "-"
        if self.prelude is not None:
            out["prelude"] = self.prelude.as_dict()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def plan_dicke(n_qubits: int, m: int, k: int | None = None, root: int = 0) -> ProtocolPlan:
    """Exact few-step plan for |m>; the smaller root is used unless ``root=1``."""
    if m in (0, n_qubits):
        phi = 0.0 if m == 0 else math.pi
        return ProtocolPlan("dicke", n_qubits, m, 0, phi, roots=(phi,), inversions=())
    if k is None:
        k = min_steps_exact(n_qubits, m)
    roots = solve_rotation_angle(n_qubits, m, k)
    phi = roots[min(root, len(roots) - 1)]
    theta = 2 * math.asin(dicke_overlap(n_qubits, m, phi))
    return ProtocolPlan(
        "dicke", n_qubits, m, k, phi,
        predicted_fidelity=grover_fidelity(theta, k),
        roots=tuple(roots), inversions=(f"chi_{m}", "chi_0"),
    )


def plan_dicke_long(n_qubits: int, m: int, phi: float | None = None) -> ProtocolPlan:
    """Modified-phase plan: k+1 iterations with chi(alpha) from an arbitrary CSS.

    ``phi=None`` uses the Hadamard start (phi = pi/2).
    """
    if phi is None:
        phi = math.pi / 2
    theta = 2 * math.asin(abs(dicke_overlap(n_qubits, m, phi)))
    k = min_long_steps(theta)
    alpha = long_phase(theta, k)
    return ProtocolPlan(
        "dicke", n_qubits, m, k + 1, phi, alpha=alpha, variant="long-phase",
        predicted_fidelity=1.0, inversions=(f"chi_{m}(alpha)", "chi_0(alpha)"),
    )


def run_dicke(plan: ProtocolPlan) -> np.ndarray:
    start = css_state(plan.n_qubits, plan.phi).amps
    if plan.steps == 0:
        return start
    step = build_dicke_grover(plan.n_qubits, plan.m, plan.phi, plan.alpha)
    return iterate(step, start, plan.steps)


# --- GHZ ----------------------------------------------------------------------

def _nearest_with_parity(n_qubits: int, parity: int, weight) -> int:
    cands = [m for m in range(n_qubits + 1) if m % 2 == parity]
    best = max(weight(m) for m in cands)
    return min(m for m in cands if weight(m) >= best * (1 - 1e-12))


def _ghz_seed(n_qubits: int, parity: int) -> int:
    return _nearest_with_parity(n_qubits, parity, lambda m: float(log_binom(n_qubits, m)))


def ghz_overlap_exact(n_qubits: int, phi: float) -> float:
    """<N/2| R(phi)^N |GHZ> for N/2 even."""
    half = n_qubits // 2
    log_val = (
        0.5 * math.log(2) + 0.5 * float(log_binom(n_qubits, half))
        + half * (math.log(abs(math.cos(phi / 2)) + 1e-300) + math.log(abs(math.sin(phi / 2)) + 1e-300))
    )
    return math.exp(log_val)


def ghz_min_steps(n_qubits: int, m: int | None = None) -> int:
    """Smallest k with C(N,m)/2^(N-1) >= sin^2(pi/(2(2k+1)))."""
    if m is None:
        m = n_qubits // 2
    best = math.exp(float(log_binom(n_qubits, m)) - (n_qubits - 1) * math.log(2))
    k = 1
    while exact_overlap(k) ** 2 > best:
        k += 1
    return k


def _ghz_common_overlap(n_qubits: int, m: int) -> float:
    return math.exp(0.5 * float(log_binom(n_qubits, m)) - 0.5 * (n_qubits - 1) * math.log(2))


def build_ghz_grover(n_qubits: int, variant: str = "hadamard", use_long_phase: bool = False):
    """Two-part GHZ protocol. Returns (plan, part-2 step unitary, part-2 initial amps).

    variant: ``"hadamard"``, ``"exact"`` or ``"y-basis"``.
    """
    notes = []
    if variant == "exact" and (n_qubits % 2 or (n_qubits // 2) % 2):
        warnings.warn(
            f"exact GHZ variant needs N/2 even (N={n_qubits}); falling back to the "
            "Hadamard variant with an even seed near N/2",
            stacklevel=2,
        )
        notes.append("parity fallback: exact -> hadamard")
        variant = "hadamard"

    ghz = ghz_state(n_qubits).amps
    chi_t = PhaseInversion(n_qubits, (0, n_qubits)).diag

    if variant == "exact":
        m = n_qubits // 2
        k = ghz_min_steps(n_qubits, m)
        x = exact_overlap(k)

        def f(phi):
            return ghz_overlap_exact(n_qubits, phi) - x

        peak = math.pi / 2
        if f(peak) < 0:
            raise ExistenceViolated(f"GHZ overlap condition has no solution for k={k}")
        roots = [peak] if f(peak) == 0 else [
            brentq(f, 1e-12, peak, xtol=1e-14, rtol=1e-15),
            brentq(f, peak, math.pi - 1e-12, xtol=1e-14, rtol=1e-15),
        ]
        phi = roots[0]
        rot = wigner_rotation(n_qubits, phi).matrix
        start = rot.T[:, m]  # R(-phi)|m>
        chi_i = PhaseInversion(n_qubits, (m,)).diag
        step = (rot.T * chi_i[None, :]) @ rot * chi_t[None, :]
        alpha = math.pi
        theta = 2 * math.asin(min(1.0, abs(np.vdot(ghz, start))))
        inversions = ("chi_0", f"chi_{n_qubits}", f"chi_{m}")
    elif variant in ("hadamard", "y-basis"):
        parity = 0 if variant == "hadamard" else n_qubits % 2
        m = _ghz_seed(n_qubits, parity)
        if m != n_qubits // 2 or n_qubits % 2:
            notes.append(f"seed m={m} chosen for parity")
        theta = 2 * math.asin(_ghz_common_overlap(n_qubits, m))
        if use_long_phase:
            k_min = min_long_steps(theta)
            alpha = long_phase(theta, k_min)
            k = k_min + 1
        else:
            alpha = math.pi
            k = round_steps(steps_for_overlap(theta))
        chi_i = PhaseInversion(n_qubits, (m,), alpha).diag
        chi_t = PhaseInversion(n_qubits, (0, n_qubits), alpha).diag
        if variant == "hadamard":
            basis = hadamard_dicke(n_qubits)
            phi = math.pi / 2
            start = basis[:, m]
            step = (basis * chi_i[None, :]) @ basis * chi_t[None, :]
        else:
            rot = wigner_rotation(n_qubits, math.pi / 2).matrix
            phi = -math.pi / 2
            start = rot.T[:, m]
            step = (rot.T * chi_i[None, :]) @ rot * chi_t[None, :]
        roots = (phi,)
        inversions = ("chi_0", f"chi_{n_qubits}", f"chi_{m}")
    else:
        raise ValueError(f"unknown GHZ variant {variant!r}")

    prelude = plan_dicke(n_qubits, m) if 0 < m < n_qubits else None
    fid = 1.0 if alpha != math.pi else grover_fidelity(theta, k)
    plan = ProtocolPlan(
        "ghz", n_qubits, m, k, phi, alpha=alpha, predicted_fidelity=fid,
        variant=variant, roots=tuple(roots), inversions=inversions,
        prelude=prelude, notes=tuple(notes),
    )
    return plan, step, np.asarray(start, dtype=complex)


def run_two_part(plan: ProtocolPlan, step: np.ndarray, start: np.ndarray, from_product: bool = True):
    """Execute the protocol; with ``from_product`` the seed Dicke state is itself prepared."""
    amps = np.asarray(start, dtype=complex)
    if from_product and plan.prelude is not None:
        seed = run_dicke(plan.prelude)
        basis_change = _seed_basis_change(plan)
        amps = basis_change @ seed
    return iterate(step, amps, plan.steps)


def _seed_basis_change(plan: ProtocolPlan) -> np.ndarray:
    n = plan.n_qubits
    if plan.kind == "cat":
        return np.eye(n + 1)
    if plan.variant == "hadamard":
        return hadamard_dicke(n)
    return wigner_rotation(n, plan.phi).matrix if plan.variant == "y-basis" else (
        wigner_rotation(n, plan.phi).matrix.T
    )


# --- Cat ----------------------------------------------------------------------

def css_overlap(n_qubits: int, phi: float) -> float:
    """<phi|-phi> for N-qubit coherent spin states."""
    return math.cos(phi) ** n_qubits


def cat_state(n_qubits: int, phi: float, parity: int = 1) -> DickeKet:
    plus = css_state(n_qubits, phi).amps
    minus = css_state(n_qubits, -phi).amps
    vec = plus + parity * minus
    norm = np.linalg.norm(vec)
    if norm < 1e-14:
        raise ValueError("cat state vanishes for these parameters")
    return DickeKet(n_qubits, vec / norm)


def cat_seed_overlap(n_qubits: int, m: int, phi: float, parity: int = 1) -> float:
    if (m % 2) != (0 if parity > 0 else 1):
        return 0.0
    denom = math.sqrt(2 + 2 * parity * css_overlap(n_qubits, phi))
    return 2 / denom * dicke_overlap(n_qubits, m, phi)


def cat_inversion_approx(n_qubits: int, phi: float) -> np.ndarray:
    """chi_phi chi_-phi = R(phi) chi_0 R(-2 phi) chi_0 R(phi)."""
    r1 = wigner_rotation(n_qubits, phi).matrix
    r2 = wigner_rotation(n_qubits, -2 * phi).matrix
    chi0 = PhaseInversion(n_qubits, (0,)).diag
    return (r1 * chi0[None, :]) @ (r2 * chi0[None, :]) @ r1


def build_cat_grover(
    n_qubits: int,
    phi_cat: float,
    parity: int = 1,
    max_steps: int = 4,
    fidelity_goal: float = 0.9,
    exact_inversion: bool = False,
):
    """Cat-state protocol seeded by a Dicke state.

    Scans seeds of matching parity and k <= max_steps, keeping the highest
    predicted ideal fidelity (ties: fewer steps, then smaller m). The step
    uses chi_phi chi_-phi unless ``exact_inversion`` asks for the projector.
    Returns (plan, step unitary, seed amplitudes).
    """
    target = cat_state(n_qubits, phi_cat, parity).amps
    candidates = []
    for m in range(n_qubits + 1):
        s = cat_seed_overlap(n_qubits, m, phi_cat, parity)
        if s <= 0:
            continue
        theta = 2 * math.asin(min(1.0, s))
        for k in range(1, max_steps + 1):
            candidates.append((grover_fidelity(theta, k), k, m, theta))
    if not candidates:
        raise NoAdmissibleSeed("no seed Dicke state overlaps the requested cat state")
    best_f = max(c[0] for c in candidates)
    if best_f < fidelity_goal:
        raise NoAdmissibleSeed(
            f"best predicted cat fidelity {best_f:.4f} below goal {fidelity_goal} with k <= {max_steps}"
        )
    fid, k, m, theta = min(
        (c for c in candidates if c[0] >= best_f - 1e-9), key=lambda c: (c[1], c[2])
    )
    chi_m = PhaseInversion(n_qubits, (m,)).diag
    chi_cat = projector_inversion(target) if exact_inversion else cat_inversion_approx(n_qubits, phi_cat)
    step = chi_m[:, None] * chi_cat
    start = np.zeros(n_qubits + 1, dtype=complex)
    start[m] = 1.0
    prelude = plan_dicke(n_qubits, m) if 0 < m < n_qubits else None
    plan = ProtocolPlan(
        "cat", n_qubits, m, k, phi_cat, predicted_fidelity=fid,
        variant="projector" if exact_inversion else "css-pair",
        inversions=(f"chi_{phi_cat:+.6g}", f"chi_{-phi_cat:+.6g}", f"chi_{m}"),
        phi_cat=phi_cat, parity=parity, prelude=prelude,
        notes=(f"approximation overlap cos^2N(phi)={css_overlap(n_qubits, phi_cat) ** 2:.3e}",),
    )
    return plan, step, start
