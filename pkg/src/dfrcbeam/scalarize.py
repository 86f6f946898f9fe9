"""Scalarization of the two-objective (radar, communication) design.

Both objectives are normalized to comparable units before scalarizing:
v_norm = (v - offset) / scale, with (offset, scale) typically taken from two
single-objective pre-solves so the best value maps to 0 and the value at the
other objective's optimum maps to 1. Three scalarizations are supported:
weighted sum, epsilon-constraint and min-max; the constrained forms reach
the nonconvex solvers as smooth quadratic penalties with a growing weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RADAR_METRICS = ("ssme", "neg_radar_mi")
COMM_METRICS = ("mmse", "neg_se")


@dataclass(frozen=True)
class Normalizer:
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0):
            raise ValueError("normalizer scale must be positive")

    def __call__(self, v: float) -> float:
        return (v - self.offset) / self.scale


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which radar/comm metrics to minimize and how to normalize them."""

    radar_metric: str = "ssme"
    comm_metric: str = "mmse"
    radar_norm: Normalizer = field(default_factory=Normalizer)
    comm_norm: Normalizer = field(default_factory=Normalizer)

    def __post_init__(self):
        if self.radar_metric not in RADAR_METRICS:
            raise ValueError(f"radar_metric must be one of {RADAR_METRICS}")
        if self.comm_metric not in COMM_METRICS:
            raise ValueError(f"comm_metric must be one of {COMM_METRICS}")


def normalize_metrics(raw_radar: float, raw_comm: float, spec: ObjectiveSpec):
    """Map raw metric values into normalized comparable units."""
    return spec.radar_norm(raw_radar), spec.comm_norm(raw_comm)


@dataclass(frozen=True)
class WeightedSum:
    w_radar: float
    w_comm: float

    def __post_init__(self):
        if self.w_radar < 0 or self.w_comm < 0:
            raise ValueError("weights must be nonnegative")
        if abs(self.w_radar + self.w_comm - 1.0) > 1e-9:
            raise ValueError("weights must add up to 1")


@dataclass(frozen=True)
class EpsilonConstraint:
    primary: str             # "radar" or "comm"
    epsilon: float           # bound on the *other* (secondary) objective

    def __post_init__(self):
        if self.primary not in ("radar", "comm"):
            raise ValueError("primary must be 'radar' or 'comm'")
        if not np.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")


@dataclass(frozen=True)
class MinMax:
    pass


EPSILON_UNBOUNDED = 1e18    # sentinel: constraint effectively inactive


class InfeasibleEpsilonError(ValueError):
    def __init__(self, gap: float):
        super().__init__(f"epsilon constraint certified infeasible, gap {gap:.6g}")
        self.gap = gap


def weighted_sum(f_radar_norm: float, f_comm_norm: float,
                 w_radar: float, w_comm: float) -> float:
    """w_radar * f_radar + w_comm * f_comm on normalized values."""
    if w_radar < 0 or w_comm < 0:
        raise ValueError("weights must be nonnegative")
    return w_radar * f_radar_norm + w_comm * f_comm_norm


@dataclass
class ScalarizedProblem:
    """Single-objective problem description consumed by the solvers.

    value() is the reported scalar objective; solver_weights() returns the
    effective per-metric weights of the current (possibly penalized)
    smooth objective at the given normalized metric values.
    """

    objective: ObjectiveSpec
    scalarization: object

    def value(self, f_radar_norm: float, f_comm_norm: float) -> float:
        s = self.scalarization
        if isinstance(s, WeightedSum):
            return weighted_sum(f_radar_norm, f_comm_norm, s.w_radar, s.w_comm)
        if isinstance(s, EpsilonConstraint):
            return f_radar_norm if s.primary == "radar" else f_comm_norm
        return max(f_radar_norm, f_comm_norm)

    def solver_weights(self, f_radar_norm: float, f_comm_norm: float,
                       mu: float):
        """Effective (w_radar, w_comm) of the smooth penalty objective."""
        s = self.scalarization
        if isinstance(s, WeightedSum):
            return s.w_radar, s.w_comm
        if isinstance(s, EpsilonConstraint):
            if s.primary == "radar":
                return 1.0, 2.0 * mu * max(0.0, f_comm_norm - s.epsilon)
            return 2.0 * mu * max(0.0, f_radar_norm - s.epsilon), 1.0
        eta = minmax_level(f_radar_norm, f_comm_norm, mu)
        return (2.0 * mu * max(0.0, f_radar_norm - eta),
                2.0 * mu * max(0.0, f_comm_norm - eta))

    def penalty_value(self, f_radar_norm: float, f_comm_norm: float,
                      mu: float) -> float:
        """The smooth objective actually descended by the solvers."""
        s = self.scalarization
        if isinstance(s, WeightedSum):
            return weighted_sum(f_radar_norm, f_comm_norm, s.w_radar, s.w_comm)
        if isinstance(s, EpsilonConstraint):
            if s.primary == "radar":
                return f_radar_norm + mu * max(0.0, f_comm_norm - s.epsilon) ** 2
            return f_comm_norm + mu * max(0.0, f_radar_norm - s.epsilon) ** 2
        eta = minmax_level(f_radar_norm, f_comm_norm, mu)
        return (eta + mu * max(0.0, f_radar_norm - eta) ** 2
                + mu * max(0.0, f_comm_norm - eta) ** 2)

    def post_check(self, f_radar_norm: float, f_comm_norm: float,
                   tol: float = 1e-6):
        """Constraint bookkeeping at a returned solution."""
        s = self.scalarization
        out = {"eta": max(f_radar_norm, f_comm_norm), "feasible": True,
               "violation": 0.0}
        if isinstance(s, EpsilonConstraint):
            secondary = f_comm_norm if s.primary == "radar" else f_radar_norm
            out["violation"] = max(0.0, secondary - s.epsilon)
            out["feasible"] = out["violation"] <= tol
        return out


def minmax_level(f1: float, f2: float, mu: float) -> float:
    """Optimal auxiliary level eta of min eta + mu * sum max(0, f_i - eta)^2."""
    hi, lo = (f1, f2) if f1 >= f2 else (f2, f1)
    eta = hi - 1.0 / (2.0 * mu)
    if eta >= lo:
        return eta
    return 0.5 * (hi + lo) - 1.0 / (4.0 * mu)


def weighted_problem(objective: ObjectiveSpec, w_radar: float) -> ScalarizedProblem:
    return ScalarizedProblem(objective, WeightedSum(w_radar, 1.0 - w_radar))


def epsilon_wrap(objective: ObjectiveSpec, primary: str, epsilon: float,
                 secondary_min_norm: float = 0.0,
                 tol: float = 1e-6) -> ScalarizedProblem:
    """Constrain the secondary objective to epsilon (normalized units).

    With pre-solve normalizers the secondary's unconstrained minimum is 0;
    epsilon below that minimum (beyond tol) is certified infeasible.
    """
    if secondary_min_norm > epsilon + tol:
        raise InfeasibleEpsilonError(secondary_min_norm - epsilon)
    return ScalarizedProblem(objective, EpsilonConstraint(primary, epsilon))


def minmax_wrap(objective: ObjectiveSpec) -> ScalarizedProblem:
    """min eta subject to both normalized objectives <= eta."""
    return ScalarizedProblem(objective, MinMax())


def make_problem(objective: ObjectiveSpec, scalarization) -> ScalarizedProblem:
    if isinstance(scalarization, EpsilonConstraint):
        return epsilon_wrap(objective, scalarization.primary, scalarization.epsilon)
    return ScalarizedProblem(objective, scalarization)
