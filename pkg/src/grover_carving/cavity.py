"""Single-sided cavity QED scattering and wavepacket-averaged Kraus superoperators.

A photon reflected off a cavity containing ``n`` coupled atoms leaves through one
of four channels (reflection, transmission, atomic emission, mirror loss). The
Kraus operators are diagonal in the Dicke basis, so the averaged superoperator
is an (N+1) x (N+1) table of ``<x_n(w) x_l(w)*>`` indexed like ``rho``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import roots_hermite, wofz

CHANNELS = ("r", "t", "a", "m")
HERALD_MODES = ("unheralded", "heralded")

DEFAULT_NODES = 64
MAX_NODES = 512
QUAD_TOL = 1e-10
APPROX_REGIME = 1e-3


class QuadratureError(RuntimeError):
    """Gauss-Hermite averaging did not settle within MAX_NODES."""

    def __init__(self, achieved: float, nodes: int):
        self.achieved = achieved
        self.nodes = nodes
        super().__init__(
            f"quadrature not converged after {nodes} nodes (last change {achieved:.3e})"
        )


class ApproximationRegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CavityParams:
    """Rates of the atom-cavity system.

    ``delta`` is the atom-cavity detuning. ``delta == 0`` is the resonant case,
    i.e. infinite Dicke resolution d. Negative detunings are rejected because
    the shifted-resonance root below picks the cavity branch only for delta >= 0.
    """

    g: float
    kappa_r: float = 1.0
    kappa_t: float = 0.0
    kappa_m: float = 0.0
    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa_r", "kappa_t", "kappa_m", "gamma", "delta"):
            val = getattr(self, name)
            if not np.isfinite(val):
                raise ValueError(f"{name} must be finite, got {val!r}")
            if val < 0:
                raise ValueError(f"{name} must be non-negative, got {val!r}")
        if self.g <= 0:
            raise ValueError("coupling g must be positive")
        if self.kappa <= 0:
            raise ValueError("total cavity decay must be positive")

    @property
    def kappa(self) -> float:
        return self.kappa_r + self.kappa_t + self.kappa_m

    @property
    def cooperativity(self) -> float:
        return self.g**2 / (self.kappa * self.gamma) if self.gamma > 0 else math.inf

    @property
    def resolution(self) -> float:
        """d = g^2/(delta kappa); infinite on resonance."""
        return math.inf if self.delta == 0 else self.g**2 / (self.delta * self.kappa)

    @property
    def dispersive_shift(self) -> float:
        """Omega = g^2/delta, the per-atom shift of the cavity line."""
        return math.inf if self.delta == 0 else self.g**2 / self.delta

    @classmethod
    def from_dimensionless(cls, C: float, d: float = math.inf, *, kappa_r: float = 1.0,
                           kappa_t: float = 0.0, kappa_m: float = 0.0,
                           gamma: float = 1.0) -> "CavityParams":
        if C <= 0:
            raise ValueError("cooperativity must be positive")
        if d <= 0:
            raise ValueError("resolution d must be positive (use math.inf for delta = 0)")
        kappa = kappa_r + kappa_t + kappa_m
        g = math.sqrt(C * kappa * gamma)
        delta = 0.0 if math.isinf(d) else g**2 / (d * kappa)
        return cls(g, kappa_r, kappa_t, kappa_m, gamma, delta)

    def with_resolution(self, d: float) -> "CavityParams":
        if d <= 0:
            raise ValueError("resolution d must be positive")
        return replace(self, delta=0.0 if math.isinf(d) else self.g**2 / (d * self.kappa))

    def normalized(self) -> tuple["CavityParams", float]:
        """Rescale every rate so kappa = 1; returns (params, scale)."""
        k = self.kappa
        return (
            CavityParams(self.g / k, self.kappa_r / k, self.kappa_t / k, self.kappa_m / k,
                         self.gamma / k, self.delta / k),
            k,
        )


@dataclass(frozen=True)
class Wavepacket:
    """Gaussian spectral intensity centred at ``center`` with std ``width``."""

    center: float = 0.0
    width: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.center) and np.isfinite(self.width)):
            raise ValueError("wavepacket centre and width must be finite")
        if self.width < 0:
            raise ValueError("wavepacket width must be non-negative")

    def relative_width(self, kappa: float = 1.0) -> float:
        """w = sigma / kappa."""
        return self.width / kappa

    def intensity(self, omega):
        """|Phi(omega)|^2; only defined for width > 0."""
        if self.width == 0:
            raise ValueError("monochromatic wavepacket has no density")
        x = (np.asarray(omega) - self.center) / self.width
        return np.exp(-0.5 * x * x) / (math.sqrt(2 * math.pi) * self.width)


@dataclass(frozen=True)
class DiagonalSuperop:
    """Diagonal Liouville superoperator, stored in the same row-major order as vec(rho)."""

    n_qubits: int
    entries: np.ndarray
    herald_mode: str = "unheralded"

    def __post_init__(self):
        if self.herald_mode not in HERALD_MODES:
            raise ValueError(f"herald_mode must be one of {HERALD_MODES}")
        ent = np.asarray(self.entries, dtype=complex).reshape(-1)
        dim = self.n_qubits + 1
        if ent.shape != (dim * dim,):
            raise ValueError(f"expected {dim * dim} entries, got {ent.size}")
        mat = ent.reshape(dim, dim)
        if not np.allclose(mat, mat.conj().T, atol=1e-12, rtol=0):
            raise ValueError("superoperator table is not Hermitian")
        ent.flags.writeable = False
        object.__setattr__(self, "entries", ent)

    def matrix(self) -> np.ndarray:
        return self.entries.reshape(self.n_qubits + 1, self.n_qubits + 1)

    def populations(self) -> np.ndarray:
        return self.matrix().diagonal().real.copy()


def _denominator(n, omega, p: CavityParams):
    atom = 1j * p.delta + 1j * omega + p.gamma
    return atom, n * p.g**2 + atom * (1j * omega + p.kappa)


def scattering_amplitudes(n, omega, params: CavityParams):
    """(r, t, a, m) amplitudes for ``n`` coupled atoms at photon detuning ``omega``.

    Broadcasts over ``n`` and ``omega``.
    """
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("coupled-atom count must be non-negative")
    omega = np.asarray(omega, dtype=float)
    p = params
    atom, den = _denominator(n, omega, p)
    # with no atoms the atomic factor cancels; this also covers gamma = 0 at omega = -delta
    empty = n == 0
    atom = np.where(empty, 1.0, atom)
    den = np.where(empty, 1j * omega + p.kappa, den)
    r = 1 - 2 * p.kappa_r * atom / den
    t = 2 * math.sqrt(p.kappa_r * p.kappa_t) * atom / den
    a = 2 * math.sqrt(p.kappa_r * p.gamma) * np.sqrt(n) * p.g / den
    m = 2 * math.sqrt(p.kappa_r * p.kappa_m) * atom / den
    return r, t, a, m


def _channel_amplitude(channel: str, n, omega, params):
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    return scattering_amplitudes(n, omega, params)[CHANNELS.index(channel)]


def shifted_resonance(n, params: CavityParams):
    """Cavity-branch photon detuning at which r_n is closest to -1."""
    p = params
    n = np.asarray(n, dtype=float)
    disc = 4 * p.g**2 * n - (p.gamma + 1j * p.delta - p.kappa + p.kappa_r) ** 2
    root = 0.5 * (1j * p.gamma - p.delta + 1j * (p.kappa - p.kappa_r) + np.sqrt(disc + 0j))
    out = root.real
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=16)
def _hermite_rule(nodes: int):
    t, w = roots_hermite(nodes)
    return t, w / math.sqrt(math.pi)


def _amp_table(ns, omegas, params, channels):
    return [_channel_amplitude(ch, ns[:, None], omegas[None, :], params) for ch in channels]


def _averaged_table(ns, wavepacket: Wavepacket, params: CavityParams, channels,
                    nodes: int = DEFAULT_NODES, tol: float = QUAD_TOL) -> np.ndarray:
    """sum_ch <x_n x_l*> over the wavepacket, for every pair in ``ns``."""
    ns = np.asarray(ns, dtype=float)
    if wavepacket.width == 0:
        amps = _amp_table(ns, np.array([wavepacket.center]), params, channels)
        return sum(x @ x.conj().T for x in amps)

    def rule(k):
        t, w = _hermite_rule(k)
        omegas = wavepacket.center + math.sqrt(2) * wavepacket.width * t
        amps = _amp_table(ns, omegas, params, channels)
        return sum((x * w[None, :]) @ x.conj().T for x in amps)

    prev = rule(nodes)
    change = math.inf
    while nodes < MAX_NODES:
        nodes *= 2
        cur = rule(nodes)
        change = float(np.max(np.abs(cur - prev)))
        if change < tol:
            return cur
        prev = cur
    raise QuadratureError(change, nodes)


def averaged_kraus_element(channel: str, n: int, l: int, wavepacket: Wavepacket,
                           params: CavityParams) -> complex:
    """Wavepacket average of x_n(w) x_l(w)* for one channel."""
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    tab = _averaged_table([n, l], wavepacket, params, (channel,))
    return complex(tab[0, 1])


def _erfcx(z):
    # exp(z^2) erfc(z) = w(iz), stable for complex arguments
    return wofz(1j * np.asarray(z, dtype=complex))


def approx_regime(n: int, l: int, wavepacket: Wavepacket, params: CavityParams) -> dict:
    """Dimensionless small parameters controlling the closed-form averages.

    dispersive: m g^2/delta^2, shift: m g^2/(delta kappa), detuned: (|Omega_c|+sigma)/delta,
    with m = max(n, l). The closed forms carry an error of order
    dispersive * max(shift, 1) plus detuned^2.
    """
    p = params
    top = max(n, l)
    if p.delta == 0:
        return {"dispersive": math.inf if top else 0.0, "shift": math.inf if top else 0.0,
                "detuned": math.inf}
    return {
        "dispersive": top * p.g**2 / p.delta**2,
        "shift": top * p.g**2 / (p.delta * p.kappa),
        "detuned": (abs(wavepacket.center) + wavepacket.width) / p.delta,
    }


APPROX_POLICY = {"dispersive": APPROX_REGIME, "shift": 0.5, "detuned": 0.02}


def in_approx_regime(n: int, l: int, wavepacket: Wavepacket, params: CavityParams) -> bool:
    reg = approx_regime(n, l, wavepacket, params)
    return all(reg[k] <= APPROX_POLICY[k] for k in APPROX_POLICY)


def averaged_kraus_approx(channel: str, n: int, l: int, wavepacket: Wavepacket,
                          params: CavityParams) -> complex:
    """Closed-form average using amplitudes with the atomic detuning frozen at delta.

    Exact Gaussian average of the frozen-detuning amplitudes (partial fractions
    plus ``<1/(a + i w)> = sqrt(pi/2)/sigma * erfcx(a/(sqrt(2) sigma))``). Emits
    ApproximationRegimeWarning outside APPROX_POLICY.
    """
    if channel not in CHANNELS:
        raise ValueError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    p = params
    sigma = wavepacket.width
    if sigma <= 0:
        raise ValueError("closed forms need a finite wavepacket width")
    if p.delta == 0:
        raise ValueError("closed forms need a nonzero atom-cavity detuning")
    reg = approx_regime(n, l, wavepacket, params)
    bad = {k: v for k, v in reg.items() if v > APPROX_POLICY[k]}
    if bad:
        warnings.warn(
            "closed-form average used outside its regime: "
            + ", ".join(f"{k}={v:.3g}" for k, v in bad.items()),
            ApproximationRegimeWarning,
            stacklevel=2,
        )
    gd = p.gamma - 1j * p.delta
    lor = p.gamma**2 + p.delta**2
    oc = wavepacket.center

    def f1(x):
        return (p.g**2 * x + gd * (p.kappa - 1j * oc)) / (math.sqrt(2) * sigma * gd)

    # l is the conjugated index
    bracket = _erfcx(f1(l)) + _erfcx(np.conj(f1(n)))
    den = sigma * (2 * p.kappa * lor + p.g**2 * (p.gamma * (l + n) + 1j * p.delta * (l - n)))

    def f3(x):
        return 2 * math.sqrt(2 * math.pi) * p.kappa_r * x * lor / den

    if channel == "r":
        f2 = -math.sqrt(2 * math.pi) * p.kappa_r / sigma + 2 * math.sqrt(2 * math.pi) * p.kappa_r**2 * lor / den
        return complex(1 + bracket * f2)
    if channel == "t":
        return complex(bracket * f3(p.kappa_t))
    if channel == "m":
        return complex(bracket * f3(p.kappa_m))
    return complex(bracket * f3(math.sqrt(n * l) * p.g**2 * p.gamma / lor))


def build_superop(center_m: int, wavepacket_width: float, params: CavityParams,
                  herald_mode: str = "unheralded", *, n_qubits: int,
                  center: float | None = None) -> DiagonalSuperop:
    """Averaged superoperator implementing the physical chi_m.

    ``wavepacket_width`` is sigma in the same units as ``params``. The packet is
    centred on the shifted resonance of ``center_m`` unless ``center`` is given.
    For ``center_m == 0`` the atoms are put on resonance with the cavity.
    """
    if herald_mode not in HERALD_MODES:
        raise ValueError(f"herald_mode must be one of {HERALD_MODES}")
    if not 0 <= center_m <= n_qubits:
        raise ValueError(f"target excitation {center_m} outside 0..{n_qubits}")
    p, scale = params.normalized()
    if center_m == 0:
        p = replace(p, delta=0.0)
    oc = shifted_resonance(center_m, p) if center is None else center / scale
    packet = Wavepacket(oc, wavepacket_width / scale)
    channels = CHANNELS if herald_mode == "unheralded" else ("r",)
    table = _averaged_table(np.arange(n_qubits + 1), packet, p, channels)
    table = 0.5 * (table + table.conj().T)
    return DiagonalSuperop(n_qubits, table.reshape(-1), herald_mode)


def ideal_superop(center_m: int, n_qubits: int) -> DiagonalSuperop:
    """chi_m (x) chi_m* as a diagonal table."""
    s = np.ones(n_qubits + 1)
    s[center_m] = -1
    return DiagonalSuperop(n_qubits, np.outer(s, s).reshape(-1))
