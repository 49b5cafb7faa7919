"""Experiment layer: protocol runs, step-size calibration, order and
perturbation-scaling probes, and cross-scheme benchmarks."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from kgsplit.evolve import BlowUpError, SamplingPlan, WorkCounter, evolve
from kgsplit.lattice import Lattice, State, central_excitation, make_lattice, total_energy
from kgsplit.observables import diagnostics
from kgsplit.schemes import Scheme, StageKind, catalog_scheme

log = logging.getLogger(__name__)

ROUNDOFF_FLOOR = 1e-13
BENCH_JOBS_ENV = "KGSPLIT_BENCH_JOBS"

# (scheme, tau) pairs from the three figure groupings of the reference experiment
FIG1 = (("SBAB2", 0.016), ("SABA2", 0.0185), ("ABA82", 0.032))
FIG2 = (("SABA2wc", 0.165), ("ABAH864", 0.355), ("Sz4", 0.084), ("SBAB2Y4", 0.13), ("ABA82", 0.032))
FIG3 = (("SABA2Y4", 0.1255), ("SBAB2wc", 0.134), ("ABAH864", 0.355), ("ABA864", 0.4855), ("FRo4", 0.084))
FIGURES = {"fig1": FIG1, "fig2": FIG2, "fig3": FIG3}


class CalibrationError(RuntimeError):
    pass


class ShrinkRangeError(RuntimeError):
    """Measured errors sit at the rounding floor; the probe needs larger steps."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    scheme: str
    tau: float
    n: int = 1000
    w: float = 4.0
    seed: int = 1
    energy: float = 0.4
    t_end: float = 1e5
    samples: int = 60
    out: str | None = None

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if self.samples < 2:
            raise ConfigError(f"samples must be >= 2, got {self.samples}")
        if not self.energy > 0:
            raise ConfigError(f"energy must be positive, got {self.energy}")
        if self.n < 1 or not self.w > 0:
            raise ConfigError(f"need n >= 1 and w > 0, got n={self.n}, w={self.w}")

    def shared_key(self) -> tuple:
        return (self.n, self.w, self.seed, self.energy, self.t_end)


@dataclass(frozen=True)
class ObservationRecord:
    t: float
    ree: float
    m2: float
    p: float
    ibar: float
    grad_evals: int
    corrector_evals: int
    wall_seconds: float


@dataclass(frozen=True)
class BenchRow:
    scheme: str
    tau: float
    max_ree: float
    final_m2: float
    final_p: float
    wall_seconds: float
    grad_evals_per_unit_time: float
    b_evals_per_unit_time: float
    steps: int
    exclusive: bool = True
    failure: str | None = None


@dataclass
class RunResult:
    config: RunConfig
    records: list[ObservationRecord]
    summary: BenchRow
    failure: str | None = None


def _summarize(cfg: RunConfig, scheme: Scheme, records, work: WorkCounter, horizon: float, failure) -> BenchRow:
    last = records[-1]
    t = horizon if horizon > 0 else cfg.t_end
    return BenchRow(
        scheme=cfg.scheme,
        tau=cfg.tau,
        max_ree=max(r.ree for r in records),
        final_m2=last.m2,
        final_p=last.p,
        wall_seconds=work.wall_seconds,
        grad_evals_per_unit_time=work.grad_evals / t,
        # a corrector kick evaluates grad B once before its Hessian product
        b_evals_per_unit_time=(work.grad_evals + work.corrector_evals) / t,
        steps=work.steps,
        failure=failure,
    )


def run_experiment(cfg: RunConfig, lat: Lattice | None = None) -> RunResult:
    """Single-site excitation on a disordered chain, observed at log-spaced times."""
    scheme = catalog_scheme(cfg.scheme)
    lat = lat if lat is not None else make_lattice(cfg.n, cfg.w, cfg.seed)
    st0 = central_excitation(lat, cfg.energy)
    e0 = total_energy(lat, st0)
    plan = SamplingPlan.log_spaced(cfg.tau, cfg.t_end, cfg.samples)
    work = WorkCounter()
    records: list[ObservationRecord] = []

    def observe(t: float, st: State) -> None:
        d = diagnostics(lat, st, e0, t)
        records.append(
            ObservationRecord(t, d.ree, d.m2, d.p, d.ibar, work.grad_evals, work.corrector_evals, work.wall_seconds)
        )

    failure = None
    try:
        evolve(scheme, lat, st0, cfg.tau, plan, observe, work)
    except BlowUpError as exc:
        failure = f"blowup t={exc.t!r} max_abs={exc.max_abs:.3e}"
        log.warning("%s tau=%s: %s", cfg.scheme, cfg.tau, failure)
    horizon = work.steps * cfg.tau
    return RunResult(cfg, records, _summarize(cfg, scheme, records, work, horizon, failure), failure)


# -- calibration ----------------------------------------------------------------


def max_ree(scheme: Scheme, lat: Lattice, st0: State, tau: float, horizon: float, samples: int = 1000) -> float:
    """Largest relative energy error seen at ``samples`` evenly spaced instants
    (plus log-spaced early ones); infinite if the run blows up."""
    e0 = total_energy(lat, st0)
    times = np.concatenate([np.linspace(0.0, horizon, samples + 1)[1:], np.geomspace(tau, horizon, 50)])
    plan = SamplingPlan.from_times(tau, times)
    worst = 0.0

    def observe(t: float, st: State) -> None:
        nonlocal worst
        worst = max(worst, abs(total_energy(lat, st) - e0) / e0)

    try:
        evolve(scheme, lat, st0, tau, plan, observe)
    except BlowUpError:
        return math.inf
    return worst if math.isfinite(worst) else math.inf


def calibrate_tau(
    scheme: Scheme | str,
    lat: Lattice,
    target_ree: float = 1e-5,
    horizon: float = 1e3,
    energy: float = 0.4,
    bracket: tuple[float, float] = (1e-3, 1.0),
    resolution: float = 0.02,
) -> float:
    """Largest step (to ``resolution`` relative) whose max REe up to ``horizon`` stays below target.

    Bisects in log(tau) and assumes the max error grows with tau.
    """
    if not target_ree > 0:
        raise ValueError("target_ree must be positive")
    scheme = catalog_scheme(scheme) if isinstance(scheme, str) else scheme
    st0 = central_excitation(lat, energy)
    lo, hi = bracket
    if max_ree(scheme, lat, st0, hi, horizon) <= target_ree:
        return hi
    if max_ree(scheme, lat, st0, lo, horizon) > target_ree:
        raise CalibrationError(f"{scheme.name}: REe target {target_ree:g} not met even at tau={lo:g}")
    while hi / lo > 1.0 + resolution:
        mid = math.sqrt(lo * hi)
        if max_ree(scheme, lat, st0, mid, horizon) <= target_ree:
            lo = mid
        else:
            hi = mid
    log.info("calibrated %s: tau=%.5g", scheme.name, lo)
    return lo


# -- order and perturbation probes -----------------------------------------------


def smooth_state(n: int, q_amp: float = 0.6, p_amp: float = 0.3) -> State:
    """Low-mode standing-wave state used by the convergence probes."""
    x = np.arange(1, n + 1) / (n + 1)
    return State(q_amp * np.sin(np.pi * x), p_amp * np.sin(2 * np.pi * x))


def _probe_lattice() -> Lattice:
    return make_lattice(32, 4.0, seed=1)


@dataclass(frozen=True)
class OrderFit:
    scheme: str
    slope: float
    taus: tuple[float, ...]
    rees: tuple[float, ...]


def measure_order(
    scheme: Scheme | str,
    lat: Lattice | None = None,
    taus=None,
    horizon: float = 10.0,
    state: State | None = None,
) -> OrderFit:
    """Least-squares slope of log(max REe) against log(tau), observing every step."""
    scheme = catalog_scheme(scheme) if isinstance(scheme, str) else scheme
    lat = lat if lat is not None else _probe_lattice()
    state = state if state is not None else smooth_state(lat.n)
    taus = np.geomspace(0.02, 0.2, 5) if taus is None else np.asarray(taus, dtype=np.float64)
    if taus.size < 4 or taus.max() / taus.min() < 10 * (1 - 1e-12):
        raise ValueError("need at least 4 step sizes spanning a decade")
    rees = []
    for tau in taus:
        nsteps = int(round(horizon / tau))
        rees.append(max_ree(scheme, lat, state, float(tau), nsteps * tau, samples=nsteps))
    rees = np.array(rees)
    if rees.min() < ROUNDOFF_FLOOR:
        raise ShrinkRangeError(f"{scheme.name}: REe {rees.min():.1e} at tau={taus[rees.argmin()]:g} is at roundoff")
    slope = float(np.polyfit(np.log(taus), np.log(rees), 1)[0])
    return OrderFit(scheme.name, slope, tuple(map(float, taus)), tuple(map(float, rees)))


def epsilon_scaling_probe(
    scheme: Scheme | str,
    scale: float = 1e-2,
    tau: float = 0.2,
    horizon: float = 0.4,
    lat: Lattice | None = None,
    state: State | None = None,
) -> float:
    """Ratio max REe(B scaled by ``scale``) / max REe(B scaled by ``scale/2``).

    For ``H = A + eps*B`` a ratio near 2**k says the eps**k error term
    dominates.  The default state is fast and small-amplitude so that the
    kinetic part really dominates over the short horizon.
    """
    if not 0 < scale <= 1:
        raise ValueError(f"scale must lie in (0, 1], got {scale}")
    scheme = catalog_scheme(scheme) if isinstance(scheme, str) else scheme
    lat = lat if lat is not None else _probe_lattice()
    state = state if state is not None else smooth_state(lat.n, q_amp=0.1, p_amp=2.0)
    full = max_ree(scheme, lat.with_b_scale(scale), state, tau, horizon, samples=int(round(horizon / tau)))
    half = max_ree(scheme, lat.with_b_scale(scale / 2), state, tau, horizon, samples=int(round(horizon / tau)))
    if min(full, half) < ROUNDOFF_FLOOR:
        raise ShrinkRangeError(f"{scheme.name}: REe {min(full, half):.1e} is at roundoff")
    return full / half


# -- benchmarks -------------------------------------------------------------------


def figure_configs(figure: str, **overrides) -> list[RunConfig]:
    try:
        pairs = FIGURES[figure]
    except KeyError:
        raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}") from None
    return [RunConfig(scheme=s, tau=t, **overrides) for s, t in pairs]


def _run_row(cfg: RunConfig) -> RunResult:
    return run_experiment(cfg)


def bench_jobs() -> int:
    try:
        return max(1, int(os.environ.get(BENCH_JOBS_ENV, "1")))
    except ValueError:
        return 1


def bench_suite(cfgs, jobs: int | None = None) -> tuple[list[BenchRow], list[RunResult]]:
    """Run every config on one shared realization and rank by loop wall time.

    With ``jobs > 1`` runs execute in separate processes and the rows are
    marked non-exclusive, since concurrent runs perturb each other's timing.
    """
    cfgs = list(cfgs)
    if not cfgs:
        raise ConfigError("empty benchmark suite")
    keys = {c.shared_key() for c in cfgs}
    if len(keys) != 1:
        raise ConfigError(f"benchmark configs disagree on (n, w, seed, energy, t_end): {sorted(keys)}")
    jobs = min(jobs or bench_jobs(), len(cfgs), os.cpu_count() or 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_row, cfgs))
    else:
        results = [_run_row(c) for c in cfgs]
    rows = [replace(r.summary, exclusive=jobs == 1) for r in results]
    order = sorted(range(len(rows)), key=lambda i: rows[i].wall_seconds)
    return [rows[i] for i in order], [results[i] for i in order]


def format_bench_table(rows) -> str:
    head = f"{'scheme':10s} {'tau':>8s} {'max_REe':>10s} {'m2':>10s} {'P':>8s} {'wall_s':>9s} {'gradB/t':>9s} {'B+C/t':>9s}"
    lines = [head]
    for r in rows:
        lines.append(
            f"{r.scheme:10s} {r.tau:8.4g} {r.max_ree:10.3e} {r.final_m2:10.4g} {r.final_p:8.4g} "
            f"{r.wall_seconds:9.3f} {r.grad_evals_per_unit_time:9.2f} {r.b_evals_per_unit_time:9.2f}"
            + (f"  FAILED {r.failure}" if r.failure else "")
        )
    return "\n".join(lines)


def bench_row_dict(row: BenchRow) -> dict:
    return asdict(row)
