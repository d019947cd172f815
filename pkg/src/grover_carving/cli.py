"""Command-line front end: plan, simulate, sweep, fit-scaling, baseline.

Every command accepts ``--config FILE`` (a flat JSON document with the keys of
:class:`RunConfig`); explicit flags override the file. Tabular output goes to a
CSV file with a header row plus a JSON sidecar echoing the full config.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cavity import HERALD_MODES, CavityParams, QuadratureError
from .channels import TotalLossError, mismatch_fidelity_closed
from .dicke import ghz_state, max_dicke_overlap_sq
from .experiments import (
    FIGURE_PARAMS,
    DegenerateFitError,
    carving_baseline,
    carving_ideal_success,
    fit_scaling,
    optimize_detuning,
    optimize_steps,
    seed_resolution,
    simulate_dicke,
    simulate_protocol,
    sweep_m,
    sweep_N,
    sweep_phi,
    worst_case_phi,
)
from .grover import (
    ExistenceViolated,
    InadmissibleSteps,
    NoAdmissibleSeed,
    build_cat_grover,
    build_ghz_grover,
    cat_state,
    exact_overlap,
    min_steps_exact,
    plan_dicke,
    plan_dicke_long,
)

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_CONVERGENCE = 0, 2, 3, 4
COMMANDS = ("plan", "simulate", "sweep", "fit-scaling", "baseline")
STATES = ("dicke", "ghz", "cat")
SWEEP_AXES = ("phi", "m", "N", "zeta")
RAW_RATES = ("g", "kappa_r", "kappa_t", "kappa_m", "gamma", "delta")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "simulate"
    state: str = "dicke"
    n_qubits: int = 40
    m: int | None = 1
    phi_cat: float | None = None
    parity: int = 1
    variant: str = "exact"
    long_phase: bool = False
    free_phi: bool = False
    steps: int | None = None
    root: int | None = None
    phi: float | None = None
    C: float = 100.0
    d: float | None = None
    w: float = 0.1
    g: float | None = None
    kappa_r: float | None = None
    kappa_t: float | None = None
    kappa_m: float | None = None
    gamma: float | None = None
    delta: float | None = None
    herald_mode: str = "unheralded"
    zeta: float = 1.0
    axis: str | None = None
    grid: list | None = None
    k_values: list = field(default_factory=lambda: [1, 2, 3, 4])
    C_grid: list | None = None
    trim: int = 0
    workers: int = 1
    seed: int = 0
    output: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def has_raw_rates(self) -> bool:
        return any(getattr(self, k) is not None for k in RAW_RATES)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {self.command!r}")
        if self.state not in STATES:
            raise ConfigError(f"state must be one of {STATES}, got {self.state!r}")
        if self.herald_mode not in HERALD_MODES:
            raise ConfigError(f"herald_mode must be one of {HERALD_MODES}")
        if not isinstance(self.n_qubits, int) or self.n_qubits < 2:
            raise ConfigError(f"n_qubits must be an integer >= 2, got {self.n_qubits!r}")
        if self.state == "dicke" and self.command in ("plan", "simulate", "baseline"):
            if self.m is None or not 1 <= self.m <= self.n_qubits - 1:
                raise ConfigError(f"m must satisfy 1 <= m <= N-1 (N={self.n_qubits}), got {self.m!r}")
        if self.state == "cat" and self.phi_cat is None:
            raise ConfigError("cat targets need phi_cat")
        if self.parity not in (1, -1):
            raise ConfigError("parity must be +1 or -1")
        if not self.C > 0:
            raise ConfigError(f"cooperativity must be positive, got {self.C!r}")
        if self.d is not None and not self.d > 0:
            raise ConfigError(f"resolution d must be positive, got {self.d!r}")
        if self.w < 0:
            raise ConfigError("wavepacket width w must be non-negative")
        if not 0.0 <= self.zeta <= 1.0:
            raise ConfigError(f"zeta must lie in [0, 1], got {self.zeta!r}")
        if self.steps is not None and self.steps < 1:
            raise ConfigError("steps must be a positive integer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.command == "sweep":
            if self.axis not in SWEEP_AXES:
                raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {self.axis!r}")
            if self.grid is not None and len(self.grid) == 0:
                raise ConfigError("sweep grid is empty")
        if self.C_grid is not None and len(self.C_grid) == 0:
            raise ConfigError("C_grid is empty")
        return self

    def cavity(self) -> tuple[CavityParams, float, float | None]:
        """(template, C, d). Raw rates win over (C, d) when both are given."""
        if not self.has_raw_rates():
            return FIGURE_PARAMS, self.C, self.d
        if self.g is None:
            raise ConfigError("raw cavity rates need g")
        base = FIGURE_PARAMS
        kw = {k: getattr(self, k) if getattr(self, k) is not None else getattr(base, k)
              for k in RAW_RATES}
        try:
            params = CavityParams(**kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        warnings.warn("raw cavity rates given; C and d are derived from them", stacklevel=2)
        d = params.resolution if self.delta is not None else None
        return params, params.cooperativity, d


# --- output ------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def csv_text(columns: dict) -> str:
    names = list(columns)
    rows = zip(*(np.asarray(columns[k]).tolist() for k in names))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def write_outputs(cfg: RunConfig, result: dict, columns: dict | None) -> None:
    """CSV (when tabular) plus the JSON sidecar; nothing is written without ``output``."""
    if cfg.output is None:
        return
    path = Path(cfg.output)
    sidecar = path.with_suffix(".json")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if columns is not None:
            path.write_text(csv_text(columns), encoding="utf-8", newline="\n")
        doc = {"version": __version__, "config": cfg.to_dict(), "result": _jsonable(result)}
        sidecar.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8",
                           newline="\n")
    except OSError as exc:
        raise ConfigError(f"cannot write output {path}: {exc}") from exc


def load_sidecar(path) -> RunConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunConfig.from_dict(doc["config"])


# --- commands ----------------------------------------------------------------------

def _existence_report(n: int, m: int) -> dict:
    best = max_dicke_overlap_sq(n, m)
    return {
        "max_overlap_sq": best,
        "required_overlap_sq": {k: exact_overlap(k) ** 2 for k in range(1, 5)},
        "min_steps": min_steps_exact(n, m),
    }


def cmd_plan(cfg: RunConfig) -> tuple[dict, dict | None]:
    n = cfg.n_qubits
    if cfg.state == "dicke":
        if cfg.long_phase:
            plan = plan_dicke_long(n, cfg.m, cfg.phi)
        else:
            plan = plan_dicke(n, cfg.m, cfg.steps, cfg.root or 0)
        out = plan.as_dict()
        out["existence"] = _existence_report(n, cfg.m)
    elif cfg.state == "ghz":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            plan, _, _ = build_ghz_grover(n, cfg.variant, cfg.long_phase)
        out = plan.as_dict()
        out["warnings"] = [str(w.message) for w in caught]
    else:
        plan, _, _ = build_cat_grover(n, cfg.phi_cat, cfg.parity)
        out = plan.as_dict()
    return out, None


def _run_dicke(cfg: RunConfig, template: CavityParams, C: float, d: float | None):
    n, m = cfg.n_qubits, cfg.m
    if cfg.steps is None and cfg.phi is None and cfg.root is None:
        run = optimize_steps(n, m, C, cfg.w, cfg.herald_mode, template, d=d,
                             free_phi=cfg.free_phi)
        if cfg.zeta != 1.0:
            run = simulate_dicke(n, m, run.steps, run.phi, C, run.d, cfg.w, cfg.herald_mode,
                                 template, cfg.zeta)
        return run
    m_run = n - m if m > n / 2 else m
    k = cfg.steps if cfg.steps is not None else min_steps_exact(n, m_run)
    if cfg.phi is not None:
        phi = cfg.phi
    else:
        phi = plan_dicke(n, m_run, k, cfg.root or 0).phi
    if d is None:
        d = seed_resolution(m_run, C, cfg.herald_mode)
    return simulate_dicke(n, m, k, phi, C, d, cfg.w, cfg.herald_mode, template, cfg.zeta)


def cmd_simulate(cfg: RunConfig) -> tuple[dict, dict | None]:
    template, C, d = cfg.cavity()
    if cfg.state == "dicke":
        run = _run_dicke(cfg, template, C, d)
    else:
        if cfg.state == "ghz":
            plan, _, _ = build_ghz_grover(cfg.n_qubits, cfg.variant)
            target = ghz_state(cfg.n_qubits)
        else:
            plan, _, _ = build_cat_grover(cfg.n_qubits, cfg.phi_cat, cfg.parity)
            target = cat_state(cfg.n_qubits, cfg.phi_cat, cfg.parity)
        if d is None:
            d = seed_resolution(plan.m, C, cfg.herald_mode)
        run = simulate_protocol(plan, target, C, d, cfg.w, cfg.herald_mode, template, cfg.zeta)
    result = {
        "state": cfg.state, "n_qubits": run.n_qubits, "m": run.m, "steps": run.steps,
        "phi": run.phi, "d": run.d, "fidelity": run.fidelity,
        "success_probability": run.success_probability, "herald_mode": run.herald_mode,
        "flipped": run.flipped, "traces": list(run.traces),
    }
    columns = {"step": np.arange(1, len(run.traces) + 1), "trace": np.array(run.traces)}
    return result, columns


def _grid(cfg: RunConfig, default):
    return np.asarray(cfg.grid if cfg.grid is not None else default, dtype=float)


def cmd_sweep(cfg: RunConfig) -> tuple[dict, dict]:
    template, C, d = cfg.cavity()
    n = cfg.n_qubits
    if cfg.axis == "zeta":
        zetas = _grid(cfg, np.linspace(0.9, 1.0, 101))
        cols = {"zeta": zetas}
        for k in cfg.k_values:
            cols[f"F_k{k}"] = np.array([mismatch_fidelity_closed(int(k), z) for z in zetas])
        return {"axis": "zeta", "points": int(zetas.size)}, cols
    if cfg.axis == "phi":
        m = cfg.m if cfg.m is not None else 1
        res = sweep_phi(n, m, _grid(cfg, np.linspace(0.0, math.pi, 181)), C, d, cfg.w,
                        cfg.herald_mode, template)
        meta = {"axis": "phi", "argmin": res.argmin(), "worst_case_phi": worst_case_phi(n, m)}
    elif cfg.axis == "m":
        ms = [int(x) for x in _grid(cfg, range(1, n))]
        res = sweep_m(n, ms, C, cfg.w, cfg.herald_mode, template, workers=cfg.workers)
        meta = {"axis": "m"}
    else:
        ns = [int(x) for x in _grid(cfg, range(15, 51))]
        m = cfg.m if cfg.m is not None else 1
        res = sweep_N(m, ns, C, cfg.w, cfg.herald_mode, template, workers=cfg.workers)
        meta = {"axis": "N", "spread": float(np.ptp(res.fidelity))}
    meta["metadata"] = res.metadata
    return meta, res.columns()


def cmd_fit_scaling(cfg: RunConfig) -> tuple[dict, dict]:
    template, _, _ = cfg.cavity()
    C_grid = np.asarray(cfg.C_grid if cfg.C_grid is not None else np.logspace(2, 5, 7), dtype=float)
    m = cfg.m if cfg.m is not None else 1
    fit = fit_scaling(m, cfg.n_qubits, cfg.herald_mode, C_grid, cfg.w, template, cfg.trim)
    cols = {"C": fit.C, "infidelity": fit.infidelity, "d": fit.d}
    return fit.as_dict(), cols


def cmd_baseline(cfg: RunConfig) -> tuple[dict, dict]:
    n, m = cfg.n_qubits, cfg.m
    template = None
    if cfg.has_raw_rates():
        template, C, _ = cfg.cavity()
    else:
        C = cfg.C
    carve = carving_baseline(n, m, C, template, cfg.phi, cfg.d)
    # Grover reference at the same cooperativity, one-sided figure cavity
    m_run = n - m if m > n / 2 else m
    grover = optimize_steps(n, m, C, cfg.w, cfg.herald_mode, FIGURE_PARAMS,
                            d=optimize_detuning(m_run, C, cfg.herald_mode, n_qubits=n, w=cfg.w).d)
    result = {
        "carving_infidelity": carve.infidelity,
        "carving_success_probability": carve.success_probability,
        "carving_mean_repeats": 1.0 / carve.success_probability,
        "carving_ideal_success": carving_ideal_success(n, m),
        "carving_d": carve.d, "phi": carve.phi,
        "grover_fidelity": grover.fidelity, "grover_steps": grover.steps,
        "grover_success_probability": grover.success_probability,
    }
    cols = {k: np.array([v]) for k, v in result.items()}
    return result, cols


HANDLERS = {
    "plan": cmd_plan, "simulate": cmd_simulate, "sweep": cmd_sweep,
    "fit-scaling": cmd_fit_scaling, "baseline": cmd_baseline,
}


# --- argument parsing -----------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--n-qubits", "-N", dest="n_qubits", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--state", choices=STATES)
    p.add_argument("--phi-cat", dest="phi_cat", type=float)
    p.add_argument("--parity", type=int, choices=(1, -1))
    p.add_argument("--C", dest="C", type=float, help="cooperativity")
    p.add_argument("--d", type=float, help="Dicke resolution g^2/(Delta kappa)")
    p.add_argument("--w", type=float, help="wavepacket width relative to kappa")
    for name in RAW_RATES:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float,
                       help="raw rate override (wins over C, d)")
    p.add_argument("--herald", dest="herald_mode", choices=HERALD_MODES)
    p.add_argument("--zeta", type=float, help="mode-matching efficiency")
    p.add_argument("--steps", type=int)
    p.add_argument("--root", type=int, choices=(0, 1))
    p.add_argument("--phi", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o", help="CSV path; a .json sidecar is written next to it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grover-carving", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="ideal protocol parameters")
    _common(p)
    tgt = p.add_mutually_exclusive_group()
    tgt.add_argument("--dicke", nargs=2, type=int, metavar=("N", "M"))
    tgt.add_argument("--ghz", type=int, metavar="N")
    tgt.add_argument("--cat", nargs=2, metavar=("N", "PHI"))
    p.add_argument("--variant", choices=("hadamard", "exact", "y-basis"))
    p.add_argument("--long-phase", dest="long_phase", action="store_true", default=None)

    p = sub.add_parser("simulate", help="end-to-end physical simulation")
    _common(p)
    p.add_argument("--variant", choices=("hadamard", "exact", "y-basis"))
    p.add_argument("--free-phi", dest="free_phi", action="store_true", default=None,
                   help="re-optimise phi at the chosen (k, d)")

    p = sub.add_parser("sweep", help="fidelity sweeps over phi, m, N or zeta")
    _common(p)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--grid", type=float, nargs="*")
    p.add_argument("--k-values", dest="k_values", type=int, nargs="+")

    p = sub.add_parser("fit-scaling", help="log-log infidelity slope against C")
    _common(p)
    p.add_argument("--C-grid", dest="C_grid", type=float, nargs="+")
    p.add_argument("--trim", type=int)

    p = sub.add_parser("baseline", help="probabilistic carving compared with Grover")
    _common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    data["command"] = args.command
    if args.command == "plan":
        if args.dicke:
            data.update(state="dicke", n_qubits=args.dicke[0], m=args.dicke[1])
        elif args.ghz is not None:
            data.update(state="ghz", n_qubits=args.ghz, m=None)
        elif args.cat:
            try:
                data.update(state="cat", n_qubits=int(args.cat[0]), phi_cat=float(args.cat[1]))
            except ValueError as exc:
                raise ConfigError(f"--cat expects N PHI: {exc}") from exc
    skip = {"config", "command", "dicke", "ghz", "cat"}
    for key, val in vars(args).items():
        if key not in skip and val is not None:
            data[key] = val
    try:
        cfg = RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = config_from_args(args)
        result, columns = HANDLERS[cfg.command](cfg)
        write_outputs(cfg, result, columns)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, (ExistenceViolated, InadmissibleSteps, NoAdmissibleSeed)):
            print(f"infeasible target: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        if isinstance(exc, DegenerateFitError):
            print(f"convergence failure: {exc}", file=sys.stderr)
            return EXIT_CONVERGENCE
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, TotalLossError, RuntimeError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    print(json.dumps(_jsonable(result), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
