"""Goodness-of-fit against the saturated multinomial: LRT and posterior predictive checks.

The saturated model puts a free probability on every observed (z, s, y, r)
cell, so its MLE is the vector of empirical frequencies.  The structured
models are nested inside it with

    df = 4*N_R - 6   (monotone)      [(8N_R - 1) - (4N_R + 5)]
    df = 3*N_R - 8   (non-monotone)  [(8N_R - 1) - (5N_R + 7)]

spare degrees of freedom, which must be positive for the test to exist.

The posterior predictive p-value draws replicate tables from the fitted
posterior, recomputes the same likelihood-ratio discrepancy on each (the
model refit warm-starts at the drawn parameters plus a few random restarts),
and reports the fraction of replicates whose discrepancy exceeds the
observed one, counting exact ties one half.  Small values flag misfit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy
from scipy.stats import chi2

from .em import EmConfig, run_em
from .errors import ParameterError, UntestableModelError
from .gibbs import PosteriorDraws
from .model import as_count_array, cell_probabilities
from .rng import RngStream

__all__ = [
    "GofReport",
    "degrees_of_freedom",
    "saturated_log_likelihood",
    "lrt",
    "posterior_predictive_p",
]

_NEGATIVE_T_SLACK = 1e-6


@dataclass(frozen=True)
class GofReport:
    model: str
    statistic: float
    df: int
    p_value: float
    ppp: float | None = None
    n_rep: int | None = None
    n_dropped: int = 0
    flags: tuple = ()


def degrees_of_freedom(n_trials: int, monotonicity: bool) -> int:
    return 4 * n_trials - 6 if monotonicity else 3 * n_trials - 8


def _posterior_mean_params(draws: PosteriorDraws):
    """Posterior-mean parameters (simplex means stay on the simplex)."""
    from .model import ParameterSet

    return ParameterSet(
        p=draws.pooled(draws.p).mean(axis=0),
        alpha=draws.pooled(draws.alpha).mean(axis=0),
        pi=draws.pooled(draws.pi).mean(axis=0),
        delta=draws.pooled(draws.delta).mean(axis=0),
        monotonicity=draws.monotonicity,
    )


def saturated_log_likelihood(counts) -> float:
    """Log-likelihood of the saturated multinomial at its MLE (empirical frequencies)."""
    n = as_count_array(counts)
    total = n.sum()
    if total <= 0:
        raise ParameterError("total count must be positive")
    return float(xlogy(n, n / total).sum())


def _lrt_statistic(counts, model_ll: float) -> tuple[float, tuple]:
    t = 2.0 * (saturated_log_likelihood(counts) - model_ll)
    flags = ()
    if t < 0.0:
        if t < -_NEGATIVE_T_SLACK:
            flags = ("negative_statistic_beyond_slack",)
        t = 0.0
    return t, flags


def lrt(counts, monotonicity: bool, em_config: EmConfig | None = None, seed: int = 0) -> GofReport:
    """Likelihood-ratio test of the structured model against the saturated one."""
    n = as_count_array(counts)
    df = degrees_of_freedom(n.shape[3], monotonicity)
    if df <= 0:
        needed = 2 if monotonicity else 3
        raise UntestableModelError(
            f"the {'monotone' if monotonicity else 'non-monotone'} model has no spare "
            f"degrees of freedom with {n.shape[3]} trial(s); it needs at least {needed} "
            f"trials (df = {df})"
        )
    em_config = em_config or EmConfig()
    fit = run_em(n, monotonicity, seed=seed, **em_config.kwargs())
    t, flags = _lrt_statistic(n, fit.log_likelihood)
    return GofReport(
        model="monotone" if monotonicity else "nonmonotone",
        statistic=t,
        df=df,
        p_value=float(chi2.sf(t, df)),
        flags=flags,
    )


def posterior_predictive_p(
    counts,
    monotonicity: bool,
    draws: PosteriorDraws,
    n_rep: int,
    em_config: EmConfig | None = None,
    seed: int = 0,
    warm_restarts: int = 5,
    discrepancy: str = "realized",
) -> GofReport:
    """Posterior predictive check with a saturated-vs-model discrepancy.

    For each of ``n_rep`` (evenly thinned) posterior draws a replicate table
    is regenerated in full, R and Z margins included, at the observed total
    size; ppp is the fraction of replicates whose discrepancy exceeds the
    observed one (exact ties count one half), so small values flag misfit.

    ``discrepancy="realized"`` (default) compares, within each draw,
    2(l_sat(y) - l(theta; y)) between replicate and observed data.  It needs
    no refitting and concentrates near one half under a well-specified
    model.  ``discrepancy="refit"`` plugs the replicate MLE back in (the
    classical LRT statistic recomputed per replicate, warm-started at the
    drawn parameters plus ``warm_restarts`` random restarts; the observed
    side warm-starts at the posterior mean and spread draws).  Being an
    asymptotic pivot, its ppp is close to a classical p-value, roughly
    uniform rather than concentrated, and it costs an EM run per replicate.
    Refit replicates that fail to converge are dropped and counted; more
    than 10% drops is flagged.
    """
    n = as_count_array(counts)
    total = int(round(n.sum()))
    if draws.n_draws * draws.n_chains == 0:
        raise ParameterError("draws must be non-empty")
    pooled_total = draws.n_draws * draws.n_chains
    if n_rep > pooled_total:
        raise ParameterError("n_rep exceeds the number of available draws")
    if draws.monotonicity != monotonicity:
        raise ParameterError("draws were sampled under the other model")
    if discrepancy not in ("realized", "refit"):
        raise ParameterError('discrepancy must be "realized" or "refit"')

    em_config = em_config or EmConfig()
    stream = RngStream(seed)
    df = degrees_of_freedom(n.shape[3], monotonicity)
    sat_obs = saturated_log_likelihood(n)
    # Evenly spaced draw indices; the step is >= 1 so they are distinct.
    idx = np.floor(np.linspace(0, pooled_total, n_rep, endpoint=False)).astype(int)

    flags = ()
    exceed = 0.0
    kept = 0
    dropped = 0
    obs_discrepancies = []

    if discrepancy == "refit":
        obs_starts = [_posterior_mean_params(draws)]
        for flat in np.floor(np.linspace(0, pooled_total, 3, endpoint=False)).astype(int):
            obs_starts.append(draws.parameter_set(flat // draws.n_draws, flat % draws.n_draws))
        obs_fit = run_em(
            n,
            monotonicity,
            seed=stream.split("observed"),
            extra_starts=obs_starts,
            **em_config.kwargs(),
        )
        t_obs, flags = _lrt_statistic(n, obs_fit.log_likelihood)
        obs_discrepancies.append(t_obs)

    for j, flat in enumerate(idx):
        params = draws.parameter_set(flat // draws.n_draws, flat % draws.n_draws)
        gen = stream.split("replicate", j).generator
        probs = cell_probabilities(params).ravel()
        rep = gen.multinomial(total, probs / probs.sum()).reshape(n.shape)
        if discrepancy == "realized":
            from .model import observed_log_likelihood

            d_obs = 2.0 * (sat_obs - observed_log_likelihood(n, params))
            d_rep = 2.0 * (
                saturated_log_likelihood(rep) - observed_log_likelihood(rep, params)
            )
            obs_discrepancies.append(d_obs)
        else:
            rep_fit = run_em(
                rep,
                monotonicity,
                tol=em_config.tol,
                max_iter=em_config.max_iter,
                n_starts=warm_restarts,
                seed=stream.split("replicate-em", j),
                extra_starts=(params,),
                include_barycenter=False,
            )
            if not rep_fit.converged:
                dropped += 1
                continue
            d_obs = obs_discrepancies[0]
            d_rep, _ = _lrt_statistic(rep, rep_fit.log_likelihood)
        if d_rep > d_obs:
            exceed += 1.0
        elif d_rep == d_obs:
            exceed += 0.5
        kept += 1
    if kept == 0:
        raise ParameterError("all posterior predictive replicates were dropped")
    if dropped > 0.1 * (kept + dropped):
        flags = flags + ("many_replicates_dropped",)

    statistic = float(np.median(obs_discrepancies))
    return GofReport(
        model="monotone" if monotonicity else "nonmonotone",
        statistic=statistic,
        df=df,
        p_value=float(chi2.sf(statistic, df)) if df > 0 else float("nan"),
        ppp=exceed / kept,
        n_rep=kept,
        n_dropped=dropped,
        flags=flags,
    )
