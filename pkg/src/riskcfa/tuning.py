"""Offline tuning of the D-LA wind discount: simulation objectives, grid search, SGD."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import risk
from .forecast import DIRECTION, STOPPING, stream
from .policy import DLAPolicy, Theta
from .sim import Instance, run_scenario


class TuningError(RuntimeError):
    pass


class ObjectiveKind(str, enum.Enum):
    EXPECTED_COST = "expected_cost"
    CVAR_COST = "cvar_cost"
    BPOE_LOSS = "bpoe_loss"


@dataclass(frozen=True)
class TuningObjective:
    kind: ObjectiveKind = ObjectiveKind.EXPECTED_COST
    alpha: float = 0.0
    zeta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.zeta < 0:
            raise ValueError(f"zeta must be >= 0, got {self.zeta}")

    def aggregate(self, costs, losses) -> float:
        if self.kind is ObjectiveKind.EXPECTED_COST:
            return float(np.mean(costs))
        if self.kind is ObjectiveKind.CVAR_COST:
            return risk.cvar(costs, self.alpha)
        return risk.bpoe(losses, self.zeta)


def episode_outcome(theta: Theta, omega: int, instance: Instance, seed: int,
                    backend: str = "simplex") -> tuple[float, float]:
    """Total (cost, unserved load) of D-LA(theta) on truth path ``omega``."""
    tr = run_scenario(DLAPolicy(theta, backend), instance, seed, omega)
    return tr.total_cost, tr.total_loss


def episode_cost(theta: Theta, omega: int, instance: Instance, seed: int, backend: str = "simplex") -> float:
    return episode_outcome(theta, omega, instance, seed, backend)[0]


def episode_loss(theta: Theta, omega: int, instance: Instance, seed: int, backend: str = "simplex") -> float:
    return episode_outcome(theta, omega, instance, seed, backend)[1]


def outcomes(theta: Theta, omegas: Sequence[int], instance: Instance, seed: int,
             backend: str = "simplex") -> tuple[np.ndarray, np.ndarray]:
    pairs = [episode_outcome(theta, w, instance, seed, backend) for w in omegas]
    return np.array([c for c, _ in pairs]), np.array([l for _, l in pairs])


def evaluate_objective(objective: TuningObjective, theta: Theta, instance: Instance, sample_count: int,
                       seed: int, backend: str = "simplex") -> float:
    """Estimate the objective on truth paths ``0..sample_count-1`` of ``seed``.

    Every theta sees the same paths for a given seed (common random numbers).
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    costs, losses = outcomes(theta, range(sample_count), instance, seed, backend)
    return objective.aggregate(costs, losses)


@dataclass
class TuningReport:
    theta_final: Theta
    objective_trace: list            # (iteration, estimate)
    theta_trace: list                # theta vector per iteration
    gradient_norm_trace: list = field(default_factory=list)
    stop_iteration: Optional[int] = None
    averaged_gradient_trace: list = field(default_factory=list)   # G-bar^0 .. G-bar^R
    outcomes: dict = field(default_factory=dict)   # grid point -> (costs, losses)


def tune_grid(objective: TuningObjective, grid: Sequence[Theta], instance: Instance, sample_count: int,
              seed: int, backend: str = "simplex") -> TuningReport:
    """Exhaustive search; the first grid point wins ties."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid is empty")
    trace, thetas, outs = [], [], {}
    for i, th in enumerate(grid):
        costs, losses = outcomes(th, range(sample_count), instance, seed, backend)
        outs[th] = (costs, losses)
        trace.append((i, objective.aggregate(costs, losses)))
        thetas.append(th.as_vector())
    best = min(range(len(grid)), key=lambda i: (trace[i][1], i))
    return TuningReport(grid[best], trace, thetas, outcomes=outs)


# ---------------------------------------------------------------------------
# smoothed stochastic gradient (zeroth-order) tuning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """``scale * (k + offset) ** -power`` for iteration ``k >= 1``."""

    scale: float
    power: float = 0.0
    offset: float = 0.0

    def __call__(self, k: int) -> float:
        return self.scale * (k + self.offset) ** (-self.power)


@dataclass(frozen=True)
class SgdConfig:
    iterations: int = 2000
    batch_size: int = 10
    smoothing: Schedule = Schedule(0.1, 0.25)
    step: Schedule = Schedule(0.5, 0.25)
    averaging: Schedule = Schedule(1.0, 0.5, 1.0)
    theta0: tuple = (1.0,)
    seed: int = 0
    # stopping iteration R is drawn uniformly from {stop_low .. N}; None -> ceil(N/2)
    stop_low: Optional[int] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be >= 1")
        if not self.scale > 0:
            raise ValueError("objective scale must be positive")
        lo = self.stop_low if self.stop_low is not None else math.ceil(self.iterations / 2)
        if not 1 <= lo <= self.iterations:
            raise ValueError(f"stop_low must lie in [1, {self.iterations}]")

    def draw_stop(self) -> int:
        lo = self.stop_low if self.stop_low is not None else math.ceil(self.iterations / 2)
        return int(stream(self.seed, STOPPING).integers(lo, self.iterations + 1))


BatchObjective = Callable[[np.ndarray, Sequence[int]], float]


def tune_sgd(batch_objective: BatchObjective, config: SgdConfig, lookup: Optional[bool] = None) -> TuningReport:
    """Randomised stochastic gradient with Gaussian smoothing.

    ``batch_objective(theta, omegas)`` returns the objective estimate on the
    scenario batch ``omegas``; both evaluations of an iteration share the
    batch and the single search direction.  For an expected-cost objective
    this equals the per-scenario difference quotient averaged over the batch.
    Iterates are projected onto ``theta >= 0``.  ``lookup`` defaults to
    true for vector-valued ``theta0``.
    """
    cfg = config
    theta = np.maximum(np.asarray(cfg.theta0, dtype=float), 0.0)
    g_bar = np.zeros_like(theta)
    R = cfg.draw_stop()
    if lookup is None:
        lookup = theta.size > 1
    trace, thetas, gnorms, gbars = [], [theta.copy()], [], [g_bar.copy()]
    for k in range(1, R + 1):
        eta, psi, phi = cfg.smoothing(k), cfg.step(k), cfg.averaging(k)
        for name, v in (("smoothing", eta), ("step", psi), ("averaging", phi)):
            if not 0 < v < 1:
                raise TuningError(f"{name} schedule left (0, 1) at iteration {k}: {v}")
        theta_y = theta - psi * g_bar
        theta = np.maximum((1 - phi) * theta + phi * theta_y, 0.0)
        upsilon = stream(cfg.seed, DIRECTION, k).standard_normal(theta.size)
        omegas = [cfg.batch_size * (k - 1) + i for i in range(cfg.batch_size)]
        f0 = batch_objective(theta, omegas) / cfg.scale
        f1 = batch_objective(theta + eta * upsilon, omegas) / cfg.scale
        if not (math.isfinite(f0) and math.isfinite(f1)):
            raise TuningError(f"non-finite objective at iteration {k} (seed {cfg.seed})")
        grad = (f1 - f0) / eta * upsilon
        g_bar = (1 - phi) * g_bar + phi * grad
        trace.append((k, f0 * cfg.scale))
        thetas.append(theta.copy())
        gnorms.append(float(np.linalg.norm(grad)))
        gbars.append(g_bar.copy())
    return TuningReport(Theta.from_vector(theta, lookup), trace, thetas, gnorms, R, gbars)


def quadratic_objective(target) -> BatchObjective:
    """Deterministic ``sum((theta - target)^2)``, for checking the optimiser."""
    target = np.asarray(target, dtype=float)

    def f(theta, omegas):
        return float(np.sum((np.asarray(theta) - target) ** 2))

    return f


def simulation_objective(objective: TuningObjective, instance: Instance, seed: int, lookup: bool,
                         backend: str = "simplex") -> BatchObjective:
    """Batch objective over closed-loop D-LA episodes.

    Perturbed points may have negative entries; they are clamped at zero
    before simulation since a negative wind budget has no meaning.
    """

    def f(theta, omegas):
        th = Theta.from_vector(np.maximum(np.asarray(theta, dtype=float), 0.0), lookup)
        costs, losses = outcomes(th, omegas, instance, seed, backend)
        return objective.aggregate(costs, losses)

    return f
