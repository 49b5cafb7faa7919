"""Time stepping: apply a scheme's stages to the lattice flows.

``step`` composes the numpy flow maps from :mod:`kgsplit.lattice` and is the
reference definition.  ``evolve`` runs the same stage sequence inside a
compiled loop so that protocol-length runs (10^5 time units, 10^6+ steps) take
seconds rather than hours; the two paths agree to rounding.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from kgsplit.lattice import Lattice, State, _check, flow_a, flow_b, flow_corrector
from kgsplit.schemes import Scheme, StageKind, require_valid

BLOWUP_LIMIT = 1e10
_KIND_CODE = {StageKind.DRIFT_A: 0, StageKind.KICK_B: 1, StageKind.CORRECTOR_C: 2}


class BlowUpError(RuntimeError):
    def __init__(self, t: float, max_abs: float, state: State):
        super().__init__(f"blow-up at t={t!r}: max |q|,|p| = {max_abs:.3e}")
        self.t = t
        self.max_abs = max_abs
        self.state = state


@dataclass
class WorkCounter:
    """Exact work accounting; ``wall_seconds`` covers the integration loop only."""

    grad_evals: int = 0
    corrector_evals: int = 0
    steps: int = 0
    wall_seconds: float = 0.0

    def add_steps(self, scheme: Scheme, nsteps: int) -> None:
        self.steps += nsteps
        self.grad_evals += nsteps * scheme.count(StageKind.KICK_B)
        self.corrector_evals += nsteps * scheme.count(StageKind.CORRECTOR_C)


@dataclass(frozen=True)
class SamplingPlan:
    """Observation instants as integer step counts of a fixed ``tau``."""

    tau: float
    steps: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.steps or self.steps[0] != 0:
            raise ValueError("a sampling plan starts at t = 0")
        if any(b <= a for a, b in zip(self.steps, self.steps[1:])):
            raise ValueError("sampling steps must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.steps, dtype=np.float64) * self.tau

    @property
    def horizon(self) -> float:
        return self.steps[-1] * self.tau

    @classmethod
    def from_times(cls, tau: float, times) -> "SamplingPlan":
        snapped = sorted({0, *(int(round(t / tau)) for t in times)})
        return cls(tau, tuple(snapped))

    @classmethod
    def endpoints(cls, tau: float, t_end: float) -> "SamplingPlan":
        return cls.from_times(tau, [t_end])

    @classmethod
    def log_spaced(cls, tau: float, t_end: float, samples: int = 60, t_first: float = 1.0):
        """``samples`` log-spaced times from ``t_first`` to ``t_end``, plus t = 0."""
        if samples < 2:
            raise ValueError("need at least 2 samples")
        t_first = min(t_first, t_end)
        return cls.from_times(tau, np.geomspace(t_first, t_end, samples))


def _compiled_stages(scheme: Scheme) -> tuple[np.ndarray, np.ndarray]:
    kinds = np.array([_KIND_CODE[s.kind] for s in scheme.stages], dtype=np.int64)
    coeffs = np.array([s.coeff for s in scheme.stages], dtype=np.float64)
    return kinds, coeffs


def step(scheme: Scheme, lat: Lattice, st: State, tau: float, work: WorkCounter | None = None) -> State:
    """Advance ``st`` by one step of size ``tau`` (which may be negative)."""
    require_valid(scheme)
    if tau == 0:
        raise ValueError("tau must be non-zero")
    for stage in scheme.stages:
        if stage.kind is StageKind.DRIFT_A:
            st = flow_a(st, stage.coeff * tau)
        elif stage.kind is StageKind.KICK_B:
            st = flow_b(lat, st, stage.coeff * tau)
        else:
            st = flow_corrector(lat, st, stage.coeff * tau**3)
    if work is not None:
        work.add_steps(scheme, 1)
    return st


@njit(cache=True)
def _grad(eps, w, bscale, q, g):
    n = q.size
    for i in range(n):
        left = q[i - 1] if i > 0 else 0.0
        right = q[i + 1] if i < n - 1 else 0.0
        lap = 2.0 * q[i] - right - left
        g[i] = bscale * (eps[i] * q[i] + q[i] ** 3 + lap / w)


@njit(cache=True)
def _advance(kinds, coeffs, eps, w, bscale, q, p, tau, nsteps, limit, g, hg):
    """Run ``nsteps`` whole steps in place; return (steps done, blew up)."""
    n = q.size
    tau3 = tau * tau * tau
    for k in range(nsteps):
        for j in range(kinds.size):
            kind = kinds[j]
            if kind == 0:
                s = coeffs[j] * tau
                for i in range(n):
                    q[i] = q[i] + s * p[i]
            elif kind == 1:
                s = coeffs[j] * tau
                _grad(eps, w, bscale, q, g)
                for i in range(n):
                    p[i] = p[i] - s * g[i]
            else:
                s = coeffs[j] * tau3
                _grad(eps, w, bscale, q, g)
                for i in range(n):
                    left = g[i - 1] if i > 0 else 0.0
                    right = g[i + 1] if i < n - 1 else 0.0
                    diag = eps[i] + 3.0 * q[i] ** 2 + 2.0 / w
                    hg[i] = bscale * (diag * g[i] - (right + left) / w)
                for i in range(n):
                    p[i] = p[i] - s * (2.0 * hg[i])
        if (k & 15) == 15 or k == nsteps - 1:
            for i in range(n):
                if not (abs(q[i]) <= limit and abs(p[i]) <= limit):
                    return k + 1, True
    return nsteps, False


_warm = False


def _warm_kernel() -> None:
    """Compile (or load from cache) the kernel once, outside any timed region."""
    global _warm
    if not _warm:
        z = np.zeros(1)
        eps = np.ones(1)
        eps.setflags(write=False)  # Lattice.eps is read-only, a distinct numba type
        _advance(np.zeros(1, dtype=np.int64), z.copy(), eps, 1.0, 1.0, z.copy(), z.copy(), 0.1, 1, BLOWUP_LIMIT, z.copy(), z.copy())
        _warm = True


@dataclass
class EvolveResult:
    state: State
    work: WorkCounter
    observe_seconds: float = 0.0
    samples: int = 0


Observer = Callable[[float, State], None]


def evolve(
    scheme: Scheme,
    lat: Lattice,
    st0: State,
    tau: float,
    plan: SamplingPlan,
    observer: Observer | None = None,
    work: WorkCounter | None = None,
) -> EvolveResult:
    """Integrate from t = 0 through every plan time, calling ``observer(t, state)`` at each.

    ``work`` is updated in place before each observer call, so an observer
    holding a reference to it sees the counts and loop time at that instant.
    Raises :class:`BlowUpError` if any coordinate leaves [-1e10, 1e10].
    """
    require_valid(scheme)
    _check(lat, st0.q, st0.p)
    if plan.tau != tau:
        raise ValueError(f"plan was snapped for tau={plan.tau}, not {tau}")
    work = work if work is not None else WorkCounter()
    _warm_kernel()
    kinds, coeffs = _compiled_stages(scheme)
    q, p = st0.q.copy(), st0.p.copy()
    g, hg = np.empty_like(q), np.empty_like(q)
    observe_seconds = 0.0
    done = 0
    for target in plan.steps:
        todo = target - done
        if todo > 0:
            t0 = time.perf_counter()
            ran, blew = _advance(kinds, coeffs, lat.eps, lat.w, lat.b_scale, q, p, tau, todo, BLOWUP_LIMIT, g, hg)
            work.wall_seconds += time.perf_counter() - t0
            work.add_steps(scheme, ran)
            done += ran
            if blew:
                z = np.abs(np.concatenate([q, p]))
                max_abs = float(z.max()) if np.all(np.isfinite(z)) else math.inf
                raise BlowUpError(done * tau, max_abs, State(q, p))
        if observer is not None:
            t0 = time.perf_counter()
            observer(target * tau, State(q.copy(), p.copy()))
            observe_seconds += time.perf_counter() - t0
    return EvolveResult(State(q, p), work, observe_seconds, len(plan.steps))
