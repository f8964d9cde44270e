"""Large-sample partial-identification bounds for per-trial stratum effects.

Each observed (z, s) cell of a trial is a mixture of at most two latent
strata.  For a two-part Bernoulli mixture with overall mean p0 and known
mixing proportion a, the component means are only partially identified:

    p1 in [max(0, 1 - (1-p0)/a), min(1, p0/a)],

and symmetrically with 1-a for the other component.  Without monotonicity
the stratum proportions themselves are only known up to the one-dimensional
feasible region

    pi_sbars in R_r = [max(0, P01-P11), min(P01, P10)],

so the effect bounds optimize the mixture bounds over R_r.  Each bound is
monotone along R_r, and its extremum lands exactly where the stratum's
proportion is smallest: w_ss = P01-P10, w_ssbar = P11-P01,
w_sbarsbar = P10-P01, w_sbars = P01-P11.  A non-positive w means the
stratum can be empty somewhere in R_r and the bound is the vacuous [-1, 1].
With monotonicity the proportions are point identified (w_ss = P01,
w_ssbar = P11-P01, w_sbarsbar = P10) and no optimization is needed; the
monotone bounds coincide with the non-monotone conditional bounds at
pi_sbars = 0.

One caveat: the percentile bootstrap used for the interval estimates can be
inconsistent for partially identified parameters; it is provided as the
conventional easy-to-implement procedure, not as uniformly valid inference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyArmError, ParameterError
from .model import (
    ObservedCounts,
    ObservedDistribution,
    Stratum,
    observed_distribution,
)
from .rng import RngStream

__all__ = [
    "StratumBounds",
    "BoundsResult",
    "mixture_bounds",
    "psace_bounds_monotone",
    "psace_bounds_nonmonotone",
    "bootstrap_bounds",
]

_VACUOUS_TOL = 1e-12

# (z=1 cell, z=0 cell) feeding delta_1u and delta_0u for each stratum.
_CELLS = {
    Stratum.SS: ((1, 1), (0, 1)),
    Stratum.SSBAR: ((1, 1), (0, 0)),
    Stratum.SBARSBAR: ((1, 0), (0, 0)),
    Stratum.SBARS: ((1, 0), (0, 1)),
}


def mixture_bounds(p0: float, alpha: float):
    """Component-mean intervals for a Bernoulli mixture p0 = a*p1 + (1-a)*p2.

    Returns ``(interval_p1, interval_p2)``; the second is None when a = 1
    (the second component carries no mass).  a = 0 raises, since the first
    component is then undefined.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ParameterError("mixture mean must lie in [0, 1]")
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("mixing proportion must lie in [0, 1]")
    if alpha == 0.0:
        raise ParameterError("undefined component: mixing proportion is zero")
    p1 = (max(0.0, 1.0 - (1.0 - p0) / alpha), min(1.0, p0 / alpha))
    if alpha == 1.0:
        return p1, None
    beta = 1.0 - alpha
    p2 = (max(0.0, 1.0 - (1.0 - p0) / beta), min(1.0, p0 / beta))
    return p1, p2


@dataclass(frozen=True)
class StratumBounds:
    lower: float
    upper: float
    informative: bool


@dataclass(frozen=True)
class BoundEstimate:
    """Point bounds for one stratum plus bootstrap interval endpoints."""

    lower: float
    upper: float
    ci_lower: float
    ci_upper: float
    informative: bool


@dataclass(frozen=True)
class BoundsResult:
    trial: int
    monotonicity: bool
    estimates: dict
    n_boot: int
    n_skipped: int
    skip_warning: bool
    seed: int
    level: float


_VACUOUS = StratumBounds(-1.0, 1.0, False)


def _component_interval(omega1: float, omega0: float, w: float):
    """Mean interval for a component of proportion w whose cell has y-mass (omega1, omega0)."""
    if w <= 0.0:
        return 0.0, 1.0
    return max(0.0, 1.0 - omega0 / w), min(1.0, omega1 / w)


def _stratum_bounds(omega1, omega0, stratum: Stratum, w: float) -> StratumBounds:
    if w <= 0.0:
        return _VACUOUS
    (z1, s1), (z0, s0) = _CELLS[stratum]
    lo1, hi1 = _component_interval(omega1[z1, s1], omega0[z1, s1], w)
    lo0, hi0 = _component_interval(omega1[z0, s0], omega0[z0, s0], w)
    if lo1 > hi1 + _VACUOUS_TOL or lo0 > hi0 + _VACUOUS_TOL:
        # The empirical distribution is infeasible for the stratum layout
        # (possible in resamples); report the uninformative interval.
        return _VACUOUS
    lower = max(-1.0, lo1 - hi0)
    upper = min(1.0, hi1 - lo0)
    informative = not (lower <= -1.0 + _VACUOUS_TOL and upper >= 1.0 - _VACUOUS_TOL)
    return StratumBounds(lower, upper, informative)


def _trial_slices(dist: ObservedDistribution, r: int):
    if not 0 <= r < dist.n_trials:
        raise ParameterError(f"trial index {r} out of range")
    p = dist.p_s[:, :, r]
    omega1 = dist.omega[:, :, 1, r]
    omega0 = dist.omega[:, :, 0, r]
    return p, omega1, omega0


def psace_bounds_monotone(dist: ObservedDistribution, r: int) -> dict:
    """Closed-form bounds for ACE_ss, ACE_ssbar, ACE_sbarsbar under monotonicity.

    Strata whose identified proportion is non-positive (including data
    inconsistent with monotonicity, P11 < P01) come back flagged vacuous.
    """
    p, omega1, omega0 = _trial_slices(dist, r)
    weights = {
        Stratum.SS: p[0, 1],
        Stratum.SSBAR: p[1, 1] - p[0, 1],
        Stratum.SBARSBAR: p[1, 0],
    }
    return {u: _stratum_bounds(omega1, omega0, u, w) for u, w in weights.items()}


def psace_bounds_nonmonotone(dist: ObservedDistribution, r: int) -> dict:
    """Closed-form bounds for all four strata without monotonicity.

    The optimization over the feasible pi_sbars region reduces to the
    minimal feasible proportion of each stratum; a stratum that can be
    empty yields the vacuous [-1, 1].
    """
    p, omega1, omega0 = _trial_slices(dist, r)
    weights = {
        Stratum.SS: p[0, 1] - p[1, 0],
        Stratum.SSBAR: p[1, 1] - p[0, 1],
        Stratum.SBARSBAR: p[1, 0] - p[0, 1],
        Stratum.SBARS: p[0, 1] - p[1, 1],
    }
    return {u: _stratum_bounds(omega1, omega0, u, w) for u, w in weights.items()}


def _point_bounds(dist: ObservedDistribution, r: int, monotonicity: bool) -> dict:
    if monotonicity:
        return psace_bounds_monotone(dist, r)
    return psace_bounds_nonmonotone(dist, r)


def bootstrap_bounds(
    counts: ObservedCounts,
    r: int,
    monotonicity: bool,
    n_boot: int,
    seed: int,
    level: float = 0.95,
) -> BoundsResult:
    """Percentile-bootstrap interval around the per-trial bound estimates.

    Resampling is stratified by treatment arm within the trial (arm sizes
    held fixed, multinomial over the (s, y) cells), matching the randomized
    design.  The interval reports the lower-tail percentile of the lower
    bounds and the upper-tail percentile of the upper bounds.  Replicates
    are addressed by independent sub-streams, so results do not depend on
    execution order.
    """
    if n_boot < 1:
        raise ParameterError("n_boot must be at least 1")
    if not 0.0 < level < 1.0:
        raise ParameterError("level must lie in (0, 1)")
    table = counts.counts[:, :, :, r : r + 1]
    arm = table.sum(axis=(1, 2, 3))
    if np.any(arm == 0):
        z = int(np.argwhere(arm == 0)[0][0])
        raise EmptyArmError(f"empty arm: z={z}, trial r={r + 1}")

    point = _point_bounds(observed_distribution(ObservedCounts(table)), 0, monotonicity)
    strata = list(point)
    cell_probs = [table[z].ravel() / arm[z] for z in (0, 1)]

    stream = RngStream(seed)
    lowers = np.empty((n_boot, len(strata)))
    uppers = np.empty((n_boot, len(strata)))
    n_skipped = 0
    kept = 0
    for b in range(n_boot):
        gen = stream.split("bootstrap", r, b).generator
        rep = np.empty_like(table)
        for z in (0, 1):
            rep[z] = gen.multinomial(arm[z], cell_probs[z]).reshape(2, 2, 1)
        try:
            dist = observed_distribution(ObservedCounts(rep))
        except EmptyArmError:
            n_skipped += 1
            continue
        rep_bounds = _point_bounds(dist, 0, monotonicity)
        for j, u in enumerate(strata):
            lowers[kept, j] = rep_bounds[u].lower
            uppers[kept, j] = rep_bounds[u].upper
        kept += 1
    if kept == 0:
        raise EmptyArmError("all bootstrap replicates were skipped")

    tail = 100.0 * (1.0 - level) / 2.0
    ci_lo = np.percentile(lowers[:kept], tail, axis=0)
    ci_hi = np.percentile(uppers[:kept], 100.0 - tail, axis=0)
    estimates = {
        u: BoundEstimate(
            lower=point[u].lower,
            upper=point[u].upper,
            ci_lower=float(ci_lo[j]),
            ci_upper=float(ci_hi[j]),
            informative=point[u].informative,
        )
        for j, u in enumerate(strata)
    }
    return BoundsResult(
        trial=r,
        monotonicity=monotonicity,
        estimates=estimates,
        n_boot=n_boot,
        n_skipped=n_skipped,
        skip_warning=n_skipped > 0.1 * n_boot,
        seed=seed,
        level=level,
    )
