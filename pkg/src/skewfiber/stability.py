"""Admissible perturbation families and quantitative stability of fixed points.

A family is a direction of change (fiber offsets, Bernoulli weights, or
both) applied at magnitude delta to a base system; the alphabet, transition
matrix and metric parameter never change.  The admissibility budget R(delta)
is measured, not assumed: it is the larger of the jacobian-weight
discrepancy and the fiber-map supremum gap.  The sweep computes invariant
disintegrations along a descending delta grid and reports the variation
Delta(delta) against the modulus R(delta) |log delta|.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .measures import pushforward, wk_distance
from .skew import FiberMapSpec, SystemSpec, c1_constant
from .symbolic import BaseWeights, base_gap_estimate, cylinder_mass, jacobian_weight
from .transfer import (
    ConvergenceError,
    change_between,
    combine_disintegrations,
    fixed_point,
    lip_constant,
    norm_inf,
    transfer_apply,
)

__all__ = [
    "PerturbationFamily",
    "AdmissibilityRow",
    "AdmissibilityReport",
    "StabilityRow",
    "SweepResult",
    "realize",
    "admissibility_report",
    "fiber_op_gap",
    "operator_gap",
    "bu_estimate",
    "stability_sweep",
    "sweep_to_csv",
]

KINDS = ("fiber_shift", "base_weights", "combined")


@dataclass
class PerturbationFamily:
    """Perturbation direction around a base system with validity radius delta_max."""

    base: SystemSpec
    kind: str
    fiber_direction: np.ndarray | None = None
    weight_direction: np.ndarray | None = None
    delta_max: float = 0.2
    k5: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        n = self.base.n_symbols
        if self.kind in ("fiber_shift", "combined"):
            self.fiber_direction = np.asarray(self.fiber_direction, dtype=float)
            if self.fiber_direction.shape != (n,):
                raise ValueError("fiber direction needs one offset change per symbol")
        if self.kind in ("base_weights", "combined"):
            if self.base.weights.kind != "bernoulli":
                raise ValueError("base-weight perturbations require Bernoulli weights")
            self.weight_direction = np.asarray(self.weight_direction, dtype=float)
            if self.weight_direction.shape != (n,):
                raise ValueError("weight direction needs one entry per symbol")
            if abs(self.weight_direction.sum()) > 1e-12:
                raise ValueError("weight direction must sum to zero")
        if not 0.0 < self.delta_max < 1.0:
            raise ValueError("delta_max must lie in (0, 1)")


def realize(fam, delta):
    """System at perturbation size delta; delta = 0 returns the base exactly.

    The alphabet, transition matrix and theta are reused unchanged; offsets
    and Bernoulli weights move along the family direction.  Construction
    re-runs all hypothesis checks, so a delta that breaks the contraction or
    the unit-interval range fails here with the violated constraint.
    """
    if delta < 0.0 or delta >= fam.delta_max and delta != 0.0:
        raise ValueError(f"delta must lie in [0, {fam.delta_max}), got {delta}")
    if delta == 0.0:
        return fam.base
    base = fam.base
    maps = base.fiber_maps
    if fam.kind in ("fiber_shift", "combined"):
        maps = [
            FiberMapSpec(fm.slope, fm.offset + delta * shift, fm.offset_table)
            for fm, shift in zip(maps, fam.fiber_direction)
        ]
    weights = base.weights
    if fam.kind in ("base_weights", "combined"):
        weights = BaseWeights.bernoulli(weights.p + delta * fam.weight_direction)
    return SystemSpec(base.matrix, base.theta, weights, maps, base.offset_depth)


@dataclass
class AdmissibilityRow:
    delta: float
    jacobian_gap: float  # U2.1 quantity
    fiber_gap: float  # U2.2 quantity
    density_ratio: float  # finite-depth U3 proxy
    c1: float  # A2 quantity
    base_rate: float  # A1 envelope rate
    base_constant: float

    @property
    def r_delta(self):
        return max(self.jacobian_gap, self.fiber_gap)


@dataclass
class AdmissibilityReport:
    rows: list
    sup_c1: float
    sup_density_ratio: float
    a1_rate: float
    a1_constant: float

    @property
    def c1_finite(self):
        return math.isfinite(self.sup_c1)

    def r_of(self, delta):
        for row in self.rows:
            if row.delta == delta:
                return row.r_delta
        raise KeyError(delta)


def _jacobian_gap(sys0, sys_d):
    matrix = sys0.matrix
    worst = 0.0
    for w in matrix.words(1):
        total = 0.0
        for i in range(matrix.n_symbols):
            if matrix.entries[i, w[0]]:
                total += abs(
                    jacobian_weight(sys_d.weights, i, w) - jacobian_weight(sys0.weights, i, w)
                )
        worst = max(worst, total)
    return worst


def _fiber_gap(sys0, sys_d, y_points=5):
    ys = np.linspace(0.0, 1.0, y_points)
    worst = 0.0
    for u in sys0.matrix.words(sys0.offset_depth):
        t0, td = sys0.branch_map(u), sys_d.branch_map(u)
        worst = max(worst, float(np.abs((t0.a - td.a) * ys + (t0.b - td.b)).max()))
    return worst


def admissibility_report(fam, deltas, u3_depth=6, gap_depth=3, gap_iters=8):
    """Measured admissibility quantities on a delta grid.

    Per delta: the summed jacobian-weight discrepancy maximized over target
    symbols, the supremum gap of the fiber maps over the offset cylinders,
    the largest depth-``u3_depth`` cylinder mass ratio against the base, the
    regularity constant of the realized system, and a base spectral-gap
    envelope fit.  R(delta) is the larger of the first two.
    """
    if len(deltas) == 0:
        raise ValueError("need a nonempty delta grid")
    rows = []
    for delta in deltas:
        sys_d = realize(fam, delta)
        ratio = 1.0
        for w in fam.base.matrix.words(u3_depth):
            ratio = max(
                ratio, cylinder_mass(sys_d.weights, w) / cylinder_mass(fam.base.weights, w)
            )
        rate, constant = base_gap_estimate(
            sys_d.weights, sys_d.matrix, sys_d.theta, depth=gap_depth, iters=gap_iters
        )
        rows.append(
            AdmissibilityRow(
                delta=float(delta),
                jacobian_gap=_jacobian_gap(fam.base, sys_d),
                fiber_gap=_fiber_gap(fam.base, sys_d),
                density_ratio=ratio,
                c1=c1_constant(sys_d),
                base_rate=rate,
                base_constant=constant,
            )
        )
    return AdmissibilityReport(
        rows=rows,
        sup_c1=max(row.c1 for row in rows),
        sup_density_ratio=max(row.density_ratio for row in rows),
        a1_rate=max(row.base_rate for row in rows),
        a1_constant=max(row.base_constant for row in rows),
    )


def fiber_op_gap(sys0, sys_d, dis):
    """Largest fiberwise pushforward gap between two systems on one input.

    For every working word the same source fiber is pushed through both
    branch maps; the lemma bound is R(delta) times the largest fiber norm.
    """
    worst = 0.0
    for s, mu in dis.fibers.items():
        a = pushforward(mu, sys0.branch_map(s))
        b = pushforward(mu, sys_d.branch_map(s))
        worst = max(worst, wk_distance(a, b))
    return worst


def operator_gap(fam, delta, mu_delta):
    """Fiberwise norm of (F0* - Fdelta*) applied to the perturbed fixed point."""
    sys_d = realize(fam, delta)
    lhs = transfer_apply(fam.base, mu_delta)
    rhs = transfer_apply(sys_d, mu_delta)
    return norm_inf(combine_disintegrations(1.0, lhs, -1.0, rhs))


def bu_estimate(fam, deltas, depth=3, tol=1e-6, grid=2048):
    """Largest disintegration Lipschitz constant among the fixed points on the grid."""
    worst = 0.0
    for delta in deltas:
        sys_d = realize(fam, delta)
        res = fixed_point(sys_d, depth=depth, tol=tol, grid=grid)
        worst = max(worst, lip_constant(res.disintegration, sys_d.theta))
    return worst


@dataclass
class StabilityRow:
    delta: float
    r_delta: float
    variation: float
    ratio: float
    err_bound: float
    iterations: int
    failed: bool = False
    message: str = ""


@dataclass
class SweepResult:
    rows: list
    ratio_bound: float
    base_result: object = field(repr=False)
    report: AdmissibilityReport = field(repr=False)


def stability_sweep(fam, deltas, depth, tol, grid, threads=1, u3_depth=6):
    """Invariant-measure variation along a descending delta grid.

    Each delta owns an independent fixed-point computation (parallelizable);
    rows carry the measured variation Delta(delta) = ||mu_delta - mu_0||_inf,
    the measured R(delta), the ratio Delta / (R |log delta|), and the sum of
    the two fixed-point certificates.  A failed fixed point flags its row and
    the sweep continues.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0.0 for d in deltas):
        raise ValueError("sweep deltas must be positive; delta = 0 is the base system")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("sweep deltas must be sorted descending")
    report = admissibility_report(fam, deltas, u3_depth=u3_depth)
    base_res = fixed_point(fam.base, depth=depth, tol=tol, grid=grid)

    def one(delta):
        try:
            res = fixed_point(realize(fam, delta), depth=depth, tol=tol, grid=grid)
        except (ConvergenceError, ValueError) as exc:
            return StabilityRow(delta, report.r_of(delta), math.nan, math.nan, math.nan, 0,
                                failed=True, message=str(exc))
        variation = change_between(res.disintegration, base_res.disintegration)
        r_delta = report.r_of(delta)
        ratio = variation / (r_delta * abs(math.log(delta)))
        err = res.certified_error + base_res.certified_error
        return StabilityRow(delta, r_delta, variation, ratio, err, res.iterations)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, deltas))
    else:
        rows = [one(d) for d in deltas]
    good = [row.ratio for row in rows if not row.failed]
    bound = max(good) if good else math.nan
    return SweepResult(rows=rows, ratio_bound=bound, base_result=base_res, report=report)


def sweep_to_csv(result):
    lines = ["delta,R_delta,Delta,ratio,err_bound,iterations"]
    for row in result.rows:
        lines.append(
            f"{row.delta!r},{row.r_delta!r},{row.variation!r},{row.ratio!r},"
            f"{row.err_bound!r},{row.iterations}"
        )
    return "\n".join(lines) + "\n"
