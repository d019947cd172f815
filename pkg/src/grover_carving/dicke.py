"""Permutation-symmetric (Dicke) basis: kets, global rotations, Liouville vectors.

Density matrices are vectorized row by row, ``vec(rho)[i*(N+1)+j] = rho[i, j]``,
so that ``vec(A @ B @ C) == kron(A, C.T) @ vec(B)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, xlogy

# tolerances shared across the package
TOL_STRUCT = 1e-10
TOL_ALG = 1e-12


def log_binom(n, k):
    """log C(n, k), finite for n in the thousands."""
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _check_n(n_qubits: int) -> int:
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise ValueError(f"number of qubits must be a positive integer, got {n_qubits!r}")
    return int(n_qubits)


@dataclass(frozen=True)
class DickeKet:
    """Pure state in the (N+1)-dimensional symmetric subspace."""

    n_qubits: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.n_qubits + 1,):
            raise ValueError(f"expected {self.n_qubits + 1} amplitudes, got shape {amps.shape}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > TOL_ALG * max(1, self.n_qubits):
            raise ValueError(f"ket is not normalized (norm^2 = {norm!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis(cls, n_qubits: int, m: int) -> "DickeKet":
        n_qubits = _check_n(n_qubits)
        if not 0 <= m <= n_qubits:
            raise ValueError(f"excitation number {m} outside 0..{n_qubits}")
        amps = np.zeros(n_qubits + 1, dtype=complex)
        amps[m] = 1.0
        return cls(n_qubits, amps)

    def projector(self) -> np.ndarray:
        return np.outer(self.amps, self.amps.conj())

    def liouville(self) -> "LiouvilleState":
        return LiouvilleState(self.n_qubits, vectorize(self.projector()))


@dataclass(frozen=True)
class LiouvilleState:
    """Vectorized density matrix. May be sub-normalized (heralded branches)."""

    n_qubits: int
    vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=complex)
        if vec.shape != ((self.n_qubits + 1) ** 2,):
            raise ValueError(
                f"expected vector of length {(self.n_qubits + 1) ** 2}, got shape {vec.shape}"
            )
        mat = vec.reshape(self.n_qubits + 1, self.n_qubits + 1)
        scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
        if np.abs(mat - mat.conj().T).max(initial=0.0) > TOL_STRUCT * scale:
            raise ValueError("density matrix is not Hermitian")
        vec.flags.writeable = False
        object.__setattr__(self, "vec", vec)

    @property
    def dim(self) -> int:
        return self.n_qubits + 1

    def matrix(self) -> np.ndarray:
        return devectorize(self.vec)

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "LiouvilleState":
        rho = np.asarray(rho)
        return cls(rho.shape[0] - 1, vectorize(rho))


@dataclass(frozen=True)
class WignerRotation:
    n_qubits: int
    angle: float
    matrix: np.ndarray


def vectorize(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"vectorize needs a square matrix, got shape {rho.shape}")
    return rho.reshape(-1).astype(complex, copy=True)


def devectorize(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec)
    dim = int(round(np.sqrt(vec.size)))
    if vec.ndim != 1 or dim * dim != vec.size:
        raise ValueError(f"vector of length {vec.size} is not a vectorized square matrix")
    return vec.reshape(dim, dim).copy()


def _amplitude_table(n_qubits: int, ns: np.ndarray, phi: float) -> np.ndarray:
    """sqrt(C(N,n)) cos^(N-n)(phi/2) sin^n(phi/2), evaluated in log space."""
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    ns = np.asarray(ns, dtype=float)
    log_mag = 0.5 * log_binom(n_qubits, ns) + xlogy(n_qubits - ns, abs(c)) + xlogy(ns, abs(s))
    sign = np.where((c < 0) & ((n_qubits - ns) % 2 == 1), -1.0, 1.0)
    sign = sign * np.where((s < 0) & (ns % 2 == 1), -1.0, 1.0)
    return sign * np.exp(log_mag)


def css_state(n_qubits: int, phi: float) -> DickeKet:
    """Coherent spin state R(phi)^N |0...0> in the Dicke basis."""
    n_qubits = _check_n(n_qubits)
    amps = _amplitude_table(n_qubits, np.arange(n_qubits + 1), phi)
    return DickeKet(n_qubits, amps)


def dicke_overlap(n_qubits: int, m: int, phi: float) -> float:
    """<m| R(phi)^N |0...0>."""
    n_qubits = _check_n(n_qubits)
    if not 0 <= m <= n_qubits:
        raise ValueError(f"excitation number {m} outside 0..{n_qubits}")
    # scalar path: root finders call this thousands of times
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    if (c == 0 and m < n_qubits) or (s == 0 and m > 0):
        return 0.0
    log_mag = 0.5 * (math.lgamma(n_qubits + 1) - math.lgamma(m + 1) - math.lgamma(n_qubits - m + 1))
    if m < n_qubits:
        log_mag += (n_qubits - m) * math.log(abs(c))
    if m > 0:
        log_mag += m * math.log(abs(s))
    sign = -1.0 if (c < 0 and (n_qubits - m) % 2) else 1.0
    if s < 0 and m % 2:
        sign = -sign
    return sign * math.exp(log_mag)


def optimal_css_angle(n_qubits: int, m: int) -> float:
    """Rotation angle maximizing the overlap of the CSS with |m>."""
    return float(np.arccos((n_qubits - 2 * m) / n_qubits))


def max_dicke_overlap_sq(n_qubits: int, m: int) -> float:
    """C(N,m) (1-m/N)^(N-m) (m/N)^m, the largest achievable squared overlap."""
    p = m / n_qubits
    return float(np.exp(log_binom(n_qubits, m) + xlogy(n_qubits - m, 1 - p) + xlogy(m, p)))


@lru_cache(maxsize=64)
def _jy_eigensystem(n_qubits: int):
    # R(phi) = exp(phi * A) with A real antisymmetric tridiagonal; H = iA is Hermitian.
    n = np.arange(n_qubits)
    off = 0.5 * np.sqrt((n + 1.0) * (n_qubits - n))
    A = np.zeros((n_qubits + 1, n_qubits + 1))
    A[n + 1, n] = off
    A[n, n + 1] = -off
    evals, evecs = np.linalg.eigh(1j * A)
    return evals, evecs


def wigner_rotation(n_qubits: int, phi: float) -> WignerRotation:
    """Global y rotation R(phi)^N restricted to the Dicke basis.

    Built from the spectral decomposition of the collective generator, which
    stays well conditioned for hundreds of qubits where factorial sums overflow.
    """
    n_qubits = _check_n(n_qubits)
    evals, evecs = _jy_eigensystem(n_qubits)
    mat = (evecs * np.exp(-1j * phi * evals)) @ evecs.conj().T
    mat = np.ascontiguousarray(mat.real)
    mat.flags.writeable = False
    return WignerRotation(n_qubits, float(phi), mat)


def wigner_small_d_factorial(n_qubits: int, phi: float) -> np.ndarray:
    """Reference d^{N/2} matrix from the explicit factorial sum (small N only)."""
    from math import comb, cos, sin, sqrt

    dim = n_qubits + 1
    c, s = cos(phi / 2), sin(phi / 2)
    out = np.zeros((dim, dim))
    for a in range(dim):
        for b in range(dim):
            # <a| R |b>: b excitations in, a out; k of the b excited qubits stay excited
            total = 0.0
            for k in range(max(0, a + b - n_qubits), min(a, b) + 1):
                flips_up = a - k
                flips_down = b - k
                total += (
                    comb(b, k) * comb(n_qubits - b, flips_up)
                    * c ** (k + n_qubits - b - flips_up) * s ** (flips_up + flips_down)
                    * (-1) ** flips_down
                )
            out[a, b] = total * sqrt(comb(n_qubits, b) / comb(n_qubits, a))
    return out


def hadamard_dicke(n_qubits: int) -> np.ndarray:
    """H^N in the Dicke basis, using H = R_y(pi/2) Z."""
    rot = wigner_rotation(n_qubits, np.pi / 2).matrix
    return rot * ((-1.0) ** np.arange(n_qubits + 1))[None, :]


def ghz_state(n_qubits: int) -> DickeKet:
    amps = np.zeros(n_qubits + 1, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return DickeKet(n_qubits, amps)


def identity_vec(n_qubits: int) -> np.ndarray:
    return vectorize(np.eye(n_qubits + 1))


def trace_of(state: LiouvilleState) -> float:
    """vec(1) . rho; the success probability for heralded branches."""
    return float(np.dot(identity_vec(state.n_qubits), state.vec).real)


def pure_fidelity(state: LiouvilleState, target: DickeKet) -> float:
    if state.n_qubits != target.n_qubits:
        raise ValueError("state and target live on different qubit numbers")
    ideal = vectorize(target.projector())
    return float(np.vdot(ideal, state.vec).real)
