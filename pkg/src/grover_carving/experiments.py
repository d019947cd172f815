"""Optimizers, parameter sweeps, scaling fits and the probabilistic carving baseline."""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .cavity import CavityParams, build_superop, scattering_amplitudes, shifted_resonance
from .channels import (
    PhysicalGroverStep,
    apply_rotation_conjugation,
    apply_superop,
    blend_mismatch,
    herald_metrics,
    physical_grover_apply,
    step_schedule,
    x_flip_all,
)
from .dicke import DickeKet, LiouvilleState, css_state, dicke_overlap, max_dicke_overlap_sq
from .grover import (
    ExistenceViolated,
    ProtocolPlan,
    _seed_basis_change,
    min_steps_exact,
    solve_rotation_angle,
)

# figure parameters: kappa = kappa_r = 1, gamma = 1, g = 10 (C = 100), w = 0.1
FIGURE_PARAMS = CavityParams(g=10.0, kappa_r=1.0, kappa_t=0.0, kappa_m=0.0, gamma=1.0)
FIGURE_W = 0.1

SEED_EXPONENT = {"unheralded": 0.25, "heralded": 1.0 / 3.0}
WINDOW = 8.0
COARSE_POINTS = 17
FALLBACK_POINTS = 64
PHI_WINDOW = 0.3


class NonUnimodalWarning(UserWarning):
    pass


class DegenerateFitError(ValueError):
    pass


def worst_case_phi(n_qubits: int, m: int) -> float:
    """CSS angle giving the lowest chi_m fidelity (numerical minimum 1.5/sqrt(N) for m = 0)."""
    if m == 0:
        return 1.5 / math.sqrt(n_qubits)
    return math.acos((n_qubits - 2 * m) / n_qubits)


def cavity_at(C: float, d: float, template: CavityParams = FIGURE_PARAMS) -> CavityParams:
    """Template with cooperativity C (through g) and resolution d."""
    if C <= 0:
        raise ValueError("cooperativity must be positive")
    g = math.sqrt(C * template.kappa * template.gamma)
    return replace(template, g=g, delta=0.0).with_resolution(d)


def seed_resolution(m: int, C: float, herald_mode: str) -> float:
    if m == 0:
        return math.inf
    return (C / m) ** SEED_EXPONENT[herald_mode]


# --- single inversion -------------------------------------------------------------

def inversion_fidelity(n_qubits: int, m: int, phi: float, C: float, d: float, w: float = 0.0,
                       herald_mode: str = "unheralded",
                       template: CavityParams = FIGURE_PARAMS) -> tuple[float, float]:
    """(fidelity, success probability) of the physical chi_m on the CSS at angle phi."""
    params = cavity_at(C, d, template)
    sup = build_superop(m, w * params.kappa, params, herald_mode, n_qubits=n_qubits)
    css = css_state(n_qubits, phi)
    out = apply_superop(css.liouville(), sup)
    ideal = css.amps.copy()
    ideal[m] *= -1
    return herald_metrics(out, DickeKet(n_qubits, ideal))


# --- 1-d maximisation on log d ------------------------------------------------------

@dataclass(frozen=True)
class DetuningOpt:
    d: float
    fidelity: float
    seed: float
    seed_fidelity: float
    method: str


def _maximize_log(f, seed: float, window: float = WINDOW) -> DetuningOpt:
    """Maximise f(d) on [seed/window, seed*window] in log d.

    Coarse grid to bracket a single interior peak, then golden-section refinement.
    Several peaks (or a peak at the window edge) fall back to a dense grid.
    """
    lo, hi = math.log(seed / window), math.log(seed * window)
    xs = np.linspace(lo, hi, COARSE_POINTS)
    vals = np.array([f(math.exp(x)) for x in xs])
    seed_val = f(seed)
    interior = [i for i in range(1, len(xs) - 1) if vals[i] >= vals[i - 1] and vals[i] >= vals[i + 1]]
    if len(interior) == 1:
        i = interior[0]
        res = minimize_scalar(lambda x: -f(math.exp(x)), bracket=(xs[i - 1], xs[i], xs[i + 1]),
                              method="golden", tol=1e-6)
        best_x, best_v, method = float(res.x), -float(res.fun), "golden"
        if not lo <= best_x <= hi or best_v < vals[i]:
            best_x, best_v = float(xs[i]), float(vals[i])
    else:
        if len(interior) > 1:
            warnings.warn(
                f"fidelity profile in d has {len(interior)} local maxima; using grid fallback",
                NonUnimodalWarning,
                stacklevel=3,
            )
        grid = np.linspace(lo, hi, FALLBACK_POINTS)
        gvals = np.array([f(math.exp(x)) for x in grid])
        j = int(np.argmax(gvals))
        best_x, best_v, method = float(grid[j]), float(gvals[j]), "grid"
    if best_v < seed_val:
        return DetuningOpt(seed, seed_val, seed, seed_val, "seed")
    return DetuningOpt(math.exp(best_x), best_v, seed, seed_val, method)


def optimize_detuning(m: int, C: float, herald_mode: str = "unheralded",
                      params_template: CavityParams = FIGURE_PARAMS, n_qubits: int = 40,
                      w: float = 0.0, phi: float | None = None) -> DetuningOpt:
    """Resolution d maximising the chi_m fidelity on the worst-case CSS."""
    if m == 0:
        f0 = inversion_fidelity(n_qubits, 0, worst_case_phi(n_qubits, 0) if phi is None else phi,
                                C, math.inf, w, herald_mode, params_template)[0]
        return DetuningOpt(math.inf, f0, math.inf, f0, "resonant")
    if phi is None:
        phi = worst_case_phi(n_qubits, m)

    def fid(d):
        return inversion_fidelity(n_qubits, m, phi, C, d, w, herald_mode, params_template)[0]

    return _maximize_log(fid, seed_resolution(m, C, herald_mode))


# --- full Grover simulation ---------------------------------------------------------

@dataclass(frozen=True)
class GroverRun:
    n_qubits: int
    m: int
    steps: int
    phi: float
    d: float
    fidelity: float
    success_probability: float
    herald_mode: str
    flipped: bool = False
    traces: tuple = ()
    state: LiouvilleState | None = field(default=None, repr=False, compare=False)


def simulate_dicke(n_qubits: int, m: int, steps: int, phi: float, C: float, d: float,
                   w: float = FIGURE_W, herald_mode: str = "unheralded",
                   template: CavityParams = FIGURE_PARAMS, zeta: float = 1.0) -> GroverRun:
    """Physical Grover preparation of |m> from the CSS at angle phi.

    For m > N/2 the run prepares |N - m> (``phi`` refers to that protocol) and
    then flips every qubit. ``zeta < 1`` blends the mode-mismatch channel into
    every photon (extension: mismatch on top of the nonideal cavity).
    """
    flipped = m > n_qubits / 2
    m_run = n_qubits - m if flipped else m
    params = cavity_at(C, d, template)
    tgt = build_superop(m_run, w * params.kappa, params, herald_mode, n_qubits=n_qubits)
    zero = _zero_superop(n_qubits, C, w, herald_mode, template)
    if zeta != 1.0:
        tgt, zero = blend_mismatch(tgt, zeta), blend_mismatch(zero, zeta)
    step = PhysicalGroverStep(phi, tgt, zero, herald_mode)
    traces: list = []
    out = physical_grover_apply(css_state(n_qubits, phi).liouville(), step, steps, record=traces)
    if flipped:
        out = x_flip_all(out)
    fid, prob = herald_metrics(out, DickeKet.basis(n_qubits, m))
    return GroverRun(n_qubits, m, steps, phi, d, fid, prob, herald_mode, flipped, tuple(traces),
                     out)


_ZERO_CACHE: dict = {}


def _zero_superop(n_qubits, C, w, herald_mode, template):
    key = (n_qubits, C, w, herald_mode, template)
    if key not in _ZERO_CACHE:
        params = cavity_at(C, math.inf, template)
        _ZERO_CACHE[key] = build_superop(0, w * params.kappa, params, herald_mode, n_qubits=n_qubits)
        if len(_ZERO_CACHE) > 256:
            _ZERO_CACHE.pop(next(iter(_ZERO_CACHE)))
    return _ZERO_CACHE[key]


def simulate_protocol(plan: ProtocolPlan, target: DickeKet, C: float, d: float,
                      w: float = FIGURE_W, herald_mode: str = "unheralded",
                      template: CavityParams = FIGURE_PARAMS, zeta: float = 1.0,
                      start: np.ndarray | None = None) -> GroverRun:
    """Run any plan photon by photon: every inversion event becomes a cavity superoperator.

    Inversions of |0> use the resonant cavity, all others the detuned one at
    resolution d. ``start`` gives the initial amplitudes (CSS at ``plan.phi``
    for Dicke plans); with ``start=None`` a plan with a prelude first prepares
    its seed Dicke state physically.
    """
    n = plan.n_qubits
    cache: dict = {}

    def superop(c):
        if c not in cache:
            params = cavity_at(C, math.inf if c == 0 else d, template)
            sup = build_superop(c, w * params.kappa, params, herald_mode, n_qubits=n)
            cache[c] = blend_mismatch(sup, zeta) if zeta != 1.0 else sup
        return cache[c]

    if start is not None:
        state = DickeKet(n, np.asarray(start, dtype=complex)).liouville()
    elif plan.kind == "dicke":
        state = css_state(n, plan.phi).liouville()
    elif plan.prelude is not None:
        seed = DickeKet.basis(n, plan.prelude.m)
        pre = simulate_protocol(plan.prelude, seed, C, d, w, herald_mode, template, zeta)
        state = apply_rotation_conjugation(pre.state, _seed_basis_change(plan))
    else:
        raise ValueError("plan without prelude needs explicit start amplitudes")

    events = step_schedule(plan)
    traces = []
    for _ in range(plan.steps):
        for ev in events:
            if ev.kind == "unitary":
                state = apply_rotation_conjugation(state, ev.op)
                continue
            for c in np.flatnonzero(ev.op.real < 0):
                state = apply_superop(state, superop(int(c)))
        traces.append(float(np.trace(state.matrix()).real))
    fid, prob = herald_metrics(state, target)
    return GroverRun(n, plan.m, plan.steps, plan.phi, d, fid, prob, herald_mode,
                     traces=tuple(traces), state=state)


def optimize_steps(n_qubits: int, m: int, C: float = 100.0, w: float = FIGURE_W,
                   herald_mode: str = "unheralded", template: CavityParams = FIGURE_PARAMS,
                   extra_steps: int = 3, optimize_d: bool = True,
                   d: float | None = None, free_phi: bool = False) -> GroverRun:
    """Best physical Grover run over k in [k_min, k_min + extra_steps] and both CSS roots.

    For m > N/2 the protocol prepares |N - m> and flips every qubit.
    ``free_phi`` then re-optimises phi at the winning (k, d) instead of keeping
    the exact-overlap root.
    """
    if not 1 <= m <= n_qubits - 1:
        raise ValueError(f"need 1 <= m <= N-1, got m={m}, N={n_qubits}")
    m_run = n_qubits - m if m > n_qubits / 2 else m
    k_min = min_steps_exact(n_qubits, m_run)
    best = None
    for k in range(k_min, k_min + extra_steps + 1):
        try:
            roots = solve_rotation_angle(n_qubits, m_run, k)
        except ExistenceViolated:
            continue
        for phi in roots:
            def fid(dd, k=k, phi=phi):
                return simulate_dicke(n_qubits, m, k, phi, C, dd, w, herald_mode, template).fidelity

            if d is not None:
                dd = d
            elif optimize_d:
                dd = _maximize_log(fid, seed_resolution(m_run, C, herald_mode)).d
            else:
                dd = seed_resolution(m_run, C, herald_mode)
            run = simulate_dicke(n_qubits, m, k, phi, C, dd, w, herald_mode, template)
            if best is None or run.fidelity > best.fidelity + 1e-12:
                best = run
    if free_phi and best is not None:
        lo, hi = max(0.0, best.phi - PHI_WINDOW), min(math.pi, best.phi + PHI_WINDOW)
        res = minimize_scalar(
            lambda p: -simulate_dicke(n_qubits, m, best.steps, p, C, best.d, w, herald_mode,
                                      template).fidelity,
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
        run = simulate_dicke(n_qubits, m, best.steps, float(res.x), C, best.d, w, herald_mode,
                             template)
        if run.fidelity > best.fidelity:
            best = run
    return best


# --- scaling fits ------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    C: np.ndarray
    infidelity: np.ndarray
    slope: float
    intercept: float
    residual: float
    d: np.ndarray
    m: int
    n_qubits: int
    herald_mode: str
    w: float
    trimmed: int = 0

    def as_dict(self) -> dict:
        return {
            "m": self.m, "n_qubits": self.n_qubits, "herald_mode": self.herald_mode,
            "w": self.w, "slope": self.slope, "intercept": self.intercept,
            "residual": self.residual, "trimmed": self.trimmed,
        }


def fit_scaling(m: int, n_qubits: int = 15, herald_mode: str = "unheralded",
                C_grid=None, w: float = 0.0, template: CavityParams = FIGURE_PARAMS,
                trim: int = 0) -> ScalingFit:
    """Log-log slope of the chi_m infidelity against C, with d optimised at each C."""
    if C_grid is None:
        C_grid = np.logspace(2, 5, 7)
    C_grid = np.asarray(C_grid, dtype=float)
    if C_grid.size < 5 or np.any(C_grid <= 0):
        raise DegenerateFitError("need at least five positive cooperativities")
    if w > 0.01:
        warnings.warn("wavepacket width above 0.01 can mask the cooperativity power law",
                      stacklevel=2)
    infid, ds = [], []
    phi = worst_case_phi(n_qubits, m)
    for C in C_grid:
        opt = optimize_detuning(m, C, herald_mode, template, n_qubits, w, phi)
        infid.append(1.0 - opt.fidelity)
        ds.append(opt.d)
    infid = np.array(infid)
    keep = slice(trim, C_grid.size - trim) if trim else slice(None)
    x, y = np.log10(C_grid[keep]), np.log10(np.maximum(infid[keep], 1e-300))
    if x.size < 5 or np.ptp(x) < 1.0:
        raise DegenerateFitError("fit must span at least one decade with five points")
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0])) if res.size else 0.0
    return ScalingFit(C_grid, infid, float(slope), float(intercept), residual, np.array(ds),
                      m, n_qubits, herald_mode, w, trim)


# --- sweeps ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    axis: str
    grid: np.ndarray
    fidelity: np.ndarray
    success_probability: np.ndarray
    steps: np.ndarray
    d: np.ndarray
    phi: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0:
            raise ValueError("empty sweep grid")
        if g.size > 1 and not (np.all(np.diff(g) > 0) or np.all(np.diff(g) < 0)):
            raise ValueError("sweep grid must be strictly monotone")
        for name in ("fidelity", "success_probability", "steps", "d", "phi"):
            if np.asarray(getattr(self, name)).shape != g.shape:
                raise ValueError(f"{name} does not have one entry per grid point")

    def argmin(self) -> float:
        return float(self.grid[int(np.argmin(self.fidelity))])

    def columns(self) -> dict:
        return {
            self.axis: self.grid, "fidelity": self.fidelity,
            "success_probability": self.success_probability, "steps": self.steps,
            "d": self.d, "phi": self.phi,
        }


def sweep_phi(n_qubits: int, m: int, phis=None, C: float = 100.0, d: float | None = None,
              w: float = FIGURE_W, herald_mode: str = "unheralded",
              template: CavityParams = FIGURE_PARAMS) -> SweepResult:
    """chi_m fidelity against the CSS angle at fixed d (seed value by default)."""
    if phis is None:
        phis = np.linspace(0.0, math.pi, 181)
    phis = np.asarray(phis, dtype=float)
    if d is None:
        d = seed_resolution(m, C, herald_mode)
    fids, probs = [], []
    for phi in phis:
        f, p = inversion_fidelity(n_qubits, m, phi, C, d, w, herald_mode, template)
        fids.append(f)
        probs.append(p)
    n = phis.size
    return SweepResult(
        "phi", phis, np.array(fids), np.array(probs), np.zeros(n, dtype=int),
        np.full(n, d), phis.copy(),
        {"n_qubits": n_qubits, "m": m, "C": C, "w": w, "herald_mode": herald_mode},
    )


def ordered_map(fn, items, workers: int = 1) -> list:
    """Map over independent sweep points; results keep the input order."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _optimize_at(point, **kw):
    n_qubits, m = point
    return optimize_steps(n_qubits, m, **kw)


def _runs_to_sweep(axis, grid, runs, meta):
    return SweepResult(
        axis, np.asarray(grid, dtype=float),
        np.array([r.fidelity for r in runs]), np.array([r.success_probability for r in runs]),
        np.array([r.steps for r in runs]), np.array([r.d for r in runs]),
        np.array([r.phi for r in runs]), meta,
    )


def sweep_m(n_qubits: int, ms=None, C: float = 100.0, w: float = FIGURE_W,
            herald_mode: str = "unheralded", template: CavityParams = FIGURE_PARAMS,
            optimize_d: bool = True, workers: int = 1) -> SweepResult:
    if ms is None:
        ms = range(1, n_qubits)
    ms = list(ms)
    task = partial(_optimize_at, C=C, w=w, herald_mode=herald_mode, template=template,
                   optimize_d=optimize_d)
    runs = ordered_map(task, [(n_qubits, m) for m in ms], workers)
    return _runs_to_sweep("m", ms, runs, {"n_qubits": n_qubits, "C": C, "w": w,
                                         "herald_mode": herald_mode})


def sweep_N(m: int, ns=None, C: float = 100.0, w: float = FIGURE_W,
            herald_mode: str = "unheralded", template: CavityParams = FIGURE_PARAMS,
            optimize_d: bool = True, workers: int = 1) -> SweepResult:
    if ns is None:
        ns = range(15, 51)
    ns = list(ns)
    task = partial(_optimize_at, C=C, w=w, herald_mode=herald_mode, template=template,
                   optimize_d=optimize_d)
    runs = ordered_map(task, [(n, m) for n in ns], workers)
    return _runs_to_sweep("N", ns, runs, {"m": m, "C": C, "w": w, "herald_mode": herald_mode})


# --- carving baseline ----------------------------------------------------------------

@dataclass(frozen=True)
class CarvingResult:
    state: DickeKet
    success_probability: float
    infidelity: float
    d: float
    phi: float


def carving_projection(n_qubits: int, m: int, phi: float, params: CavityParams):
    """Transmission-heralded projection of the CSS; returns (ket, probability)."""
    amps = css_state(n_qubits, phi).amps
    t = scattering_amplitudes(np.arange(n_qubits + 1), shifted_resonance(m, params), params)[1]
    out = t * amps
    prob = float(np.vdot(out, out).real)
    if prob <= 0:
        raise ValueError("no transmission: carving branch has zero probability")
    return DickeKet(n_qubits, out / math.sqrt(prob)), prob


def carving_baseline(n_qubits: int, m: int, C: float = 1000.0,
                     template: CavityParams | None = None, phi: float | None = None,
                     d: float | None = None, d_grid=None) -> CarvingResult:
    """Probabilistic carving in a two-sided symmetric cavity.

    The resolution d minimising the infidelity is picked from ``d_grid`` unless given.
    """
    if template is None:
        template = CavityParams(g=1.0, kappa_r=0.5, kappa_t=0.5, kappa_m=0.0, gamma=1.0)
    if template.kappa_t <= 0:
        raise ValueError("carving needs a transmitting (two-sided) cavity")
    if phi is None:
        phi = worst_case_phi(n_qubits, m)

    def attempt(dd):
        params = cavity_at(C, dd, template)
        ket, prob = carving_projection(n_qubits, m, phi, params)
        return ket, prob, 1.0 - abs(ket.amps[m]) ** 2

    if d is None:
        if d_grid is None:
            d_grid = np.geomspace(0.1, 10 * math.sqrt(C), 121)
        d = float(min(d_grid, key=lambda dd: attempt(dd)[2]))
    ket, prob, infid = attempt(d)
    return CarvingResult(ket, prob, infid, d, phi)


def carving_ideal_success(n_qubits: int, m: int) -> float:
    """|<m|CSS>|^2 at the optimal angle, the success rate of a perfect carving filter."""
    return max_dicke_overlap_sq(n_qubits, m)


def stirling_success(m: int) -> float:
    return 1.0 / math.sqrt(2 * math.pi * m)


def dicke_population(n_qubits: int, m: int, phi: float) -> float:
    return dicke_overlap(n_qubits, m, phi) ** 2
