"""Closed-form identification from trial pairs and local-identifiability diagnostics.

With monotonicity the stratum proportions are identified from the surrogate
margins, the two pure cells identify delta_{1,sbarsbar} and delta_{0,ss}
directly, and any trial pair whose stratum mixes are not proportional
identifies the remaining deltas through two 2x2 linear solves.  Without
monotonicity there are no closed forms; identification is diagnosed locally
through the column rank of the Jacobian of the observed-cell probability map
(the non-monotone model additionally needs at least three trials before the
parameter count even fits inside the free observed frequencies), and the
population system is inverted numerically.

Trial indices in this API are 0-based; user-facing labels add 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .em import run_em
from .errors import ParameterError, RatioDegeneracyError
from .model import (
    ObservedDistribution,
    ParameterSet,
    Stratum,
    active_strata,
    cell_probabilities,
    compatible_strata,
    mixture_means,
)

__all__ = [
    "MomentEstimates",
    "IdentifiabilityReport",
    "InversionResult",
    "moment_estimators_two_trials",
    "check_ratio_variation",
    "local_identifiability",
    "invert_population_system",
]

_DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class MomentEstimates:
    delta: np.ndarray  # (2, 4), SBARS column NaN
    pi: np.ndarray  # (n_trials, 4)
    pair: tuple
    clamped: bool


@dataclass(frozen=True)
class IdentifiabilityReport:
    n_params: int
    n_free_frequencies: int
    jacobian_rank: int
    full_rank: bool
    singular_values: tuple
    ratio_variation: dict
    trial_count_ok: bool
    monotonicity: bool
    notes: tuple


@dataclass(frozen=True)
class InversionResult:
    params: ParameterSet
    residual: float
    exact: bool
    estimated: tuple
    clamped: bool


def _monotone_pi_from_margins(dist: ObservedDistribution) -> np.ndarray:
    """pi identified by the surrogate margins under monotonicity."""
    pi = np.zeros((dist.n_trials, 4))
    pi[:, Stratum.SBARSBAR] = dist.p_s[1, 0, :]
    pi[:, Stratum.SS] = dist.p_s[0, 1, :]
    pi[:, Stratum.SSBAR] = 1.0 - pi[:, Stratum.SBARSBAR] - pi[:, Stratum.SS]
    return pi


def check_ratio_variation(pi, tol: float = 1e-10) -> dict:
    """Cross-multiplied ratio-variation conditions for every trial pair.

    Condition (a) compares the ss : ssbar mix across the pair, condition (b)
    the ssbar : sbarsbar mix.  Cross-multiplication avoids dividing by a
    zero proportion.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 2 or pi.shape[1] < 3:
        raise ParameterError("pi must be (n_trials, >=3)")
    ss, ssb, sbsb = pi[:, Stratum.SS], pi[:, Stratum.SSBAR], pi[:, Stratum.SBARSBAR]
    out = {}
    for i in range(pi.shape[0]):
        for j in range(i + 1, pi.shape[0]):
            a = abs(ss[i] * ssb[j] - ss[j] * ssb[i]) > tol
            b = abs(ssb[i] * sbsb[j] - ssb[j] * sbsb[i]) > tol
            out[(i, j)] = (a, b)
    return out


def moment_estimators_two_trials(dist: ObservedDistribution, r1: int, r2: int) -> MomentEstimates:
    """Closed-form delta estimates from one trial pair under the monotone model.

    delta_{1,sbarsbar} and delta_{0,ss} come from the pure cells directly;
    the two mixed cells give 2x2 linear systems across the pair.  Estimates
    pushed outside [0, 1] by sampling noise are clamped and flagged.
    """
    if r1 == r2:
        raise ParameterError("need two distinct trials")
    pi = _monotone_pi_from_margins(dist)
    ss, ssb, sbsb = pi[:, Stratum.SS], pi[:, Stratum.SSBAR], pi[:, Stratum.SBARSBAR]

    det_a = ss[r1] * ssb[r2] - ss[r2] * ssb[r1]
    det_b = sbsb[r1] * ssb[r2] - sbsb[r2] * ssb[r1]
    if abs(det_a) <= _DEGENERACY_TOL or abs(det_b) <= _DEGENERACY_TOL:
        raise RatioDegeneracyError(
            f"trials ({r1 + 1}, {r2 + 1}) have proportional stratum mixes; "
            "the ratio-variation condition fails for this pair"
        )

    w11 = dist.omega[1, 1, 1, :]  # P(Y=1, S=1 | Z=1, R=r)
    w10_1 = dist.omega[1, 0, 1, :]  # P(Y=1, S=0 | Z=1, R=r)
    w11_0 = dist.omega[0, 1, 1, :]  # P(Y=1, S=1 | Z=0, R=r)
    w10_0 = dist.omega[0, 0, 1, :]  # P(Y=1, S=0 | Z=0, R=r)

    def _direct(numer, denom):
        for r in (r1, r2):
            if denom[r] > _DEGENERACY_TOL:
                return numer[r] / denom[r]
        raise RatioDegeneracyError(
            f"stratum proportion vanishes in both trials ({r1 + 1}, {r2 + 1})"
        )

    delta = np.full((2, 4), np.nan)
    delta[1, Stratum.SBARSBAR] = _direct(w10_1, sbsb)
    delta[0, Stratum.SS] = _direct(w11_0, ss)
    delta[1, Stratum.SS] = (ssb[r2] * w11[r1] - ssb[r1] * w11[r2]) / det_a
    delta[1, Stratum.SSBAR] = (ss[r1] * w11[r2] - ss[r2] * w11[r1]) / det_a
    delta[0, Stratum.SBARSBAR] = (ssb[r2] * w10_0[r1] - ssb[r1] * w10_0[r2]) / det_b
    delta[0, Stratum.SSBAR] = (sbsb[r1] * w10_0[r2] - sbsb[r2] * w10_0[r1]) / det_b

    act = [int(u) for u in active_strata(True)]
    clamped = bool(np.any(delta[:, act] < 0) or np.any(delta[:, act] > 1))
    if clamped:
        warnings.warn(
            "moment estimate outside [0, 1]; clamped (sampling noise or model misfit)",
            RuntimeWarning,
            stacklevel=2,
        )
        clipped = delta.copy()
        clipped[:, act] = np.clip(delta[:, act], 0.0, 1.0)
        delta = clipped
    return MomentEstimates(delta=delta, pi=pi, pair=(r1, r2), clamped=clamped)


class _Chart:
    """Minimal free coordinates for the parameter simplices.

    One p coordinate and one pi coordinate per trial are implied by the
    sum-to-one constraints; which ones are dropped is configurable so rank
    computations can be checked for chart independence.
    """

    def __init__(self, params: ParameterSet, drop_trial: int = -1, drop_stratum: int = -1):
        self.monotonicity = params.monotonicity
        self.n_trials = params.n_trials
        self.active = [int(u) for u in active_strata(params.monotonicity)]
        self.k = len(self.active)
        self.drop_trial = range(self.n_trials)[drop_trial]
        self.drop_stratum = self.active[drop_stratum]
        self.p_idx = [r for r in range(self.n_trials) if r != self.drop_trial]
        self.pi_idx = [u for u in self.active if u != self.drop_stratum]
        self.n_params = (
            len(self.p_idx) + self.n_trials + len(self.pi_idx) * self.n_trials + 2 * self.k
        )

    def pack(self, params: ParameterSet) -> np.ndarray:
        parts = [params.p[self.p_idx], params.alpha]
        parts.append(params.pi[:, self.pi_idx].ravel())
        parts.append(params.delta[:, self.active].ravel())
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray) -> ParameterSet:
        n_r, k = self.n_trials, self.k
        i = 0
        p = np.empty(n_r)
        p[self.p_idx] = x[i : i + n_r - 1]
        p[self.drop_trial] = 1.0 - p[self.p_idx].sum()
        i += n_r - 1
        alpha = x[i : i + n_r]
        i += n_r
        pi = np.zeros((n_r, 4))
        free = x[i : i + (k - 1) * n_r].reshape(n_r, k - 1)
        pi[:, self.pi_idx] = free
        pi[:, self.drop_stratum] = 1.0 - free.sum(axis=1)
        i += (k - 1) * n_r
        delta = np.full((2, 4), np.nan)
        delta[:, self.active] = x[i : i + 2 * k].reshape(2, k)
        return ParameterSet(p=p, alpha=alpha, pi=pi, delta=delta,
                            monotonicity=self.monotonicity, validate=False)


def local_identifiability(
    params: ParameterSet,
    *,
    fd_step: float = 1e-6,
    rank_rtol: float = 1e-8,
    drop_trial: int = -1,
    drop_stratum: int = -1,
) -> IdentifiabilityReport:
    """Numeric rank of the probability-map Jacobian at the given parameters.

    Central differences with step ``fd_step`` on the free coordinates; the
    rank counts singular values above ``rank_rtol`` times the largest.  The
    report also carries the pairwise ratio-variation checks and whether the
    trial count satisfies the necessary condition (two trials with
    monotonicity, three without).
    """
    chart = _Chart(params, drop_trial=drop_trial, drop_stratum=drop_stratum)
    x0 = chart.pack(params)
    m = 8 * params.n_trials
    jac = np.empty((m, chart.n_params))
    for i in range(chart.n_params):
        hi = x0.copy()
        lo = x0.copy()
        hi[i] += fd_step
        lo[i] -= fd_step
        f_hi = cell_probabilities(chart.unpack(hi)).ravel()
        f_lo = cell_probabilities(chart.unpack(lo)).ravel()
        jac[:, i] = (f_hi - f_lo) / (2.0 * fd_step)
    sv = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(sv > rank_rtol * sv[0])) if sv[0] > 0 else 0

    needed = 2 if params.monotonicity else 3
    trial_count_ok = params.n_trials >= needed
    notes = []
    if not trial_count_ok:
        notes.append(
            f"{params.n_trials} trial(s) cannot locally identify the "
            f"{'monotone' if params.monotonicity else 'non-monotone'} model "
            f"(needs at least {needed})"
        )
    n_free = 8 * params.n_trials - 1
    if chart.n_params > n_free:
        notes.append(
            f"{chart.n_params} parameters exceed the {n_free} free observed frequencies"
        )
    return IdentifiabilityReport(
        n_params=chart.n_params,
        n_free_frequencies=n_free,
        jacobian_rank=rank,
        full_rank=rank == chart.n_params,
        singular_values=tuple(float(s) for s in sv),
        ratio_variation=check_ratio_variation(params.pi),
        trial_count_ok=trial_count_ok,
        monotonicity=params.monotonicity,
        notes=tuple(notes),
    )


def _conditional_cells(params: ParameterSet) -> np.ndarray:
    """P(Z=z, S=s, Y=y | R=r), which does not involve p."""
    arm = np.stack([1.0 - params.alpha, params.alpha])
    return arm[:, None, None, :] * mixture_means(params)


def _solve_delta_linear(q, alpha, pi, monotonicity):
    """Least-squares delta given the design and stratum proportions (linear)."""
    n_trials = q.shape[3]
    act = [int(u) for u in active_strata(monotonicity)]
    col = {(z, u): 2 * act.index(u) + z for u in act for z in (0, 1)}
    rows, rhs = [], []
    arm = np.stack([1.0 - alpha, alpha])
    for z in (0, 1):
        for s in (0, 1):
            strata = compatible_strata(z, s, monotonicity)
            for r in range(n_trials):
                row = np.zeros(2 * len(act))
                for u in strata:
                    row[col[(z, int(u))]] = arm[z, r] * pi[r, int(u)]
                rows.append(row)
                rhs.append(q[z, s, 1, r])
    sol, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(rhs), rcond=None)
    delta = np.full((2, 4), np.nan)
    for (z, u), j in col.items():
        delta[z, u] = sol[j]
    return delta


def _polish(q, alpha, pi0, delta0, monotonicity):
    """Gauss-Newton refinement of (pi, delta) on the free coordinates."""
    n_trials = q.shape[3]
    act = [int(u) for u in active_strata(monotonicity)]
    k = len(act)

    def build(x):
        free = x[: (k - 1) * n_trials].reshape(n_trials, k - 1)
        pi = np.zeros((n_trials, 4))
        pi[:, act[: k - 1]] = free
        pi[:, act[-1]] = 1.0 - free.sum(axis=1)
        delta = np.full((2, 4), np.nan)
        delta[:, act] = x[(k - 1) * n_trials :].reshape(2, k)
        return ParameterSet(p=np.full(n_trials, 1.0 / n_trials), alpha=alpha, pi=pi,
                            delta=delta, monotonicity=monotonicity, validate=False)

    def resid(x):
        return (_conditional_cells(build(x)) - q).ravel()

    x0 = np.concatenate([pi0[:, act[: k - 1]].ravel(), delta0[:, act].ravel()])
    fit = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    out = build(fit.x)
    return out.pi, out.delta


def invert_population_system(
    probs,
    monotonicity: bool,
    *,
    alpha=None,
    pi=None,
    p=None,
    seed: int = 0,
    n_starts: int = 8,
    residual_tol: float = 1e-6,
) -> InversionResult:
    """Solve the observed-cell decomposition for the unknown parameters.

    ``probs`` holds P(Z=z, S=s, Y=y | R=r) with each trial block summing
    to 1.  alpha is identified directly from the treated block; known
    pi reduces the system to a linear solve for delta; otherwise the
    monotone template identifies pi from the margins, and the non-monotone
    template is fitted by multi-start EM on the population table followed by
    a Gauss-Newton polish.  The residual is the l2 norm over all cells;
    above ``residual_tol`` the result is flagged as having no exact solution
    (model misfit).

    p is not determined by trial-conditional probabilities; it is passed
    through (uniform when omitted).
    """
    q = np.asarray(probs, dtype=float)
    if q.ndim != 4 or q.shape[:3] != (2, 2, 2):
        raise ParameterError("probs must have shape (2, 2, 2, n_trials)")
    n_trials = q.shape[3]
    block = q.sum(axis=(0, 1, 2))
    if np.any(np.abs(block - 1.0) > 1e-9):
        raise ParameterError("each trial block of probs must sum to 1")
    if np.any(q < 0):
        raise ParameterError("probabilities must be non-negative")

    estimated = []
    if alpha is None:
        alpha = q[1].sum(axis=(0, 1))
        estimated.append("alpha")
    else:
        alpha = np.asarray(alpha, dtype=float)
    p_out = np.full(n_trials, 1.0 / n_trials) if p is None else np.asarray(p, dtype=float)

    if pi is not None:
        pi_arr = np.asarray(pi, dtype=float)
        delta = _solve_delta_linear(q, alpha, pi_arr, monotonicity)
        estimated.append("delta")
    elif monotonicity:
        if np.any(alpha <= 0) or np.any(alpha >= 1):
            raise ParameterError("both arms must be populated to identify pi from margins")
        dist_pi = np.zeros((n_trials, 4))
        dist_pi[:, Stratum.SBARSBAR] = q[1, 0, :, :].sum(axis=0) / alpha
        dist_pi[:, Stratum.SS] = q[0, 1, :, :].sum(axis=0) / (1.0 - alpha)
        dist_pi[:, Stratum.SSBAR] = 1.0 - dist_pi[:, Stratum.SBARSBAR] - dist_pi[:, Stratum.SS]
        pi_arr = dist_pi
        delta = _solve_delta_linear(q, alpha, pi_arr, monotonicity)
        estimated.extend(["pi", "delta"])
    else:
        fit = run_em(
            q / n_trials,
            monotonicity,
            tol=1e-13,
            max_iter=20_000,
            n_starts=n_starts,
            seed=seed,
        )
        pi_arr, delta = _polish(q, alpha, fit.params.pi, fit.params.delta, monotonicity)
        estimated.extend(["pi", "delta"])

    act = [int(u) for u in active_strata(monotonicity)]
    clamped = bool(
        np.any(delta[:, act] < -1e-9)
        or np.any(delta[:, act] > 1 + 1e-9)
        or np.any(pi_arr[:, act] < -1e-9)
    )
    delta = delta.copy()
    delta[:, act] = np.clip(delta[:, act], 0.0, 1.0)
    pi_arr = np.clip(pi_arr, 0.0, None)
    pi_arr = pi_arr / pi_arr.sum(axis=1, keepdims=True)

    params = ParameterSet(p=p_out, alpha=alpha, pi=pi_arr, delta=delta,
                          monotonicity=monotonicity)
    residual = float(np.linalg.norm(_conditional_cells(params) - q))
    return InversionResult(
        params=params,
        residual=residual,
        exact=residual <= residual_tol,
        estimated=tuple(estimated),
        clamped=clamped,
    )
