"""Maximum likelihood via EM, treating the stratum membership as missing data.

The E-step distributes each observed cell count over its compatible strata
in proportion to pi_ur * delta_zu^y (1 - delta_zu)^(1-y); cells that are
compatible with a single stratum (the monotone (1,0) and (0,1) cells) are
assigned deterministically.  The M-step is the closed-form ratio update of
the complete-data likelihood.  The observed log-likelihood is non-decreasing
along the iteration, which the result object records as a trace.

The likelihood is in general multimodal (the model is only locally
identified), so run_em is multi-start by default: random simplex starts
plus one barycenter start, best final likelihood wins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .model import (
    CELL_PLANS,
    ParameterSet,
    as_count_array,
    observed_log_likelihood,
)
from .rng import RngStream

__all__ = ["EmConfig", "EmResult", "e_step", "m_step", "run_em"]


@dataclass(frozen=True)
class EmConfig:
    """Knobs for a multi-start EM run."""

    tol: float = 1e-8
    max_iter: int = 5000
    n_starts: int = 20

    def kwargs(self) -> dict:
        return {"tol": self.tol, "max_iter": self.max_iter, "n_starts": self.n_starts}


@dataclass
class EmResult:
    params: ParameterSet
    log_likelihood: float
    iterations: int
    converged: bool
    trace: np.ndarray
    settings: dict = field(default_factory=dict)


def _e_step_arrays(n, pi, delta, monotonicity, warn=True):
    (za, sa, ua, ub), determined = CELL_PLANS[monotonicity]
    n_trials = n.shape[3]
    out = np.zeros((2, 4, 2, n_trials))
    for z, s, u in determined:
        out[z, u, :, :] = n[z, s, :, :]
    da = delta[za, ua][:, None]
    db = delta[za, ub][:, None]
    ta = np.stack([1.0 - da, da], axis=1)  # (cells, 2, 1)
    tb = np.stack([1.0 - db, db], axis=1)
    wa = pi.T[ua][:, None, :] * ta
    wb = pi.T[ub][:, None, :] * tb
    tot = wa + wb
    cell_counts = n[za, sa]
    bad = tot <= 0.0
    if warn and np.any(bad & (cell_counts > 0)):
        warnings.warn(
            "zero-weight cell with positive count; responsibilities split equally",
            RuntimeWarning,
            stacklevel=3,
        )
    resp = np.where(bad, 0.5, wa / np.where(bad, 1.0, tot))
    first = cell_counts * resp
    out[za, ua] = first
    out[za, ub] = cell_counts - first
    return out


def e_step(counts, params: ParameterSet) -> np.ndarray:
    """Expected complete table n[z, u, y, r] given the observed counts.

    Each observed cell distributes over its compatible strata in proportion
    to pi_ur * delta_zu^y (1-delta_zu)^(1-y); the second component is the
    exact complement, so cell counts are conserved.  A 0/0 responsibility
    (both mixture weights zero under a positive count) is defined as an
    equal split and reported as a RuntimeWarning.
    """
    n = as_count_array(counts)
    return _e_step_arrays(n, params.pi, params.delta, params.monotonicity)


def m_step(
    expected: np.ndarray,
    monotonicity: bool,
    prev: ParameterSet | None = None,
    validate: bool = True,
) -> ParameterSet:
    """Closed-form update from an expected complete table.

    Ratios with zero denominators keep the previous parameter value (0.5 /
    uniform when there is no previous value) and raise a RuntimeWarning.
    """
    n = np.asarray(expected, dtype=float)
    if np.any(n < 0):
        raise ParameterError("expected counts must be non-negative")
    n_trials = n.shape[3]
    n_r = n.sum(axis=(0, 1, 2))
    total = n_r.sum()
    if total <= 0:
        raise ParameterError("expected table has no mass")

    p = n_r / total
    frozen = False

    alpha = np.empty(n_trials)
    pi = np.zeros((n_trials, 4))
    trial_ok = n_r > 0
    n1_r = n[1].sum(axis=(0, 1))
    n_ur = n.sum(axis=(0, 2)).T  # (R, 4)
    alpha[trial_ok] = n1_r[trial_ok] / n_r[trial_ok]
    pi[trial_ok] = n_ur[trial_ok] / n_r[trial_ok, None]
    if not np.all(trial_ok):
        frozen = True
        for r in np.nonzero(~trial_ok)[0]:
            alpha[r] = prev.alpha[r] if prev is not None else 0.5
            pi[r] = prev.pi[r] if prev is not None else _uniform_pi(monotonicity)

    k = 3 if monotonicity else 4
    n_zu1 = n[:, :k, 1, :].sum(axis=2)
    n_zu = n[:, :k].sum(axis=(2, 3))
    delta = np.full((2, 4), np.nan)
    ok = n_zu > 0
    with np.errstate(invalid="ignore"):
        delta[:, :k] = np.where(ok, n_zu1 / np.where(ok, n_zu, 1.0), np.nan)
    if not np.all(ok):
        frozen = True
        fallback = prev.delta[:, :k] if prev is not None else np.full((2, k), 0.5)
        delta[:, :k] = np.where(ok, delta[:, :k], fallback)
    if frozen:
        warnings.warn(
            "zero denominator in M-step; parameter kept at previous value",
            RuntimeWarning,
            stacklevel=2,
        )
    return ParameterSet(
        p=p, alpha=alpha, pi=pi, delta=delta, monotonicity=monotonicity, validate=validate
    )


def _uniform_pi(monotonicity: bool) -> np.ndarray:
    row = np.zeros(4)
    k = 3 if monotonicity else 4
    row[:k] = 1.0 / k
    return row


def _empirical_design(n: np.ndarray):
    """Closed-form p and alpha (their MLEs do not involve the latent strata)."""
    n_r = n.sum(axis=(0, 1, 2))
    total = n_r.sum()
    p = np.where(n_r > 0, n_r / total, 1.0 / n_r.size)
    p = p / p.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(n_r > 0, n[1].sum(axis=(0, 1)) / np.maximum(n_r, 1e-300), 0.5)
    return p, alpha


def _start(n: np.ndarray, monotonicity: bool, gen) -> ParameterSet:
    n_trials = n.shape[3]
    p, alpha = _empirical_design(n)
    k = 3 if monotonicity else 4
    pi = np.zeros((n_trials, 4))
    delta = np.full((2, 4), np.nan)
    if gen is None:  # barycenter start
        pi[:, :k] = 1.0 / k
        delta[:, :k] = 0.5
    else:
        pi[:, :k] = gen.dirichlet(np.ones(k), size=n_trials)
        delta[:, :k] = gen.uniform(size=(2, k))
    return ParameterSet(p=p, alpha=alpha, pi=pi, delta=delta, monotonicity=monotonicity)


def _em_from(counts_arr, init: ParameterSet, tol: float, max_iter: int):
    params = init
    trace = [observed_log_likelihood(counts_arr, params)]
    converged = False
    iterations = 0
    for _ in range(max_iter):
        expected = _e_step_arrays(
            counts_arr, params.pi, params.delta, params.monotonicity, warn=False
        )
        params = m_step(expected, params.monotonicity, prev=params, validate=False)
        ll = observed_log_likelihood(counts_arr, params)
        trace.append(ll)
        iterations += 1
        if np.isfinite(ll) and np.isfinite(trace[-2]) and abs(ll - trace[-2]) < tol:
            converged = True
            break
    return params, np.asarray(trace), iterations, converged


def run_em(
    counts,
    monotonicity: bool,
    *,
    tol: float = 1e-8,
    max_iter: int = 5000,
    n_starts: int = 20,
    seed: int = 0,
    extra_starts=(),
    include_barycenter: bool = True,
) -> EmResult:
    """Best-likelihood EM fit over random starts plus one barycenter start.

    ``extra_starts`` accepts explicit ParameterSets (e.g. a warm start);
    callers with good warm starts can drop the barycenter start.
    Deterministic given ``seed``.  With fewer trials than the model needs
    for identification (2 with monotonicity, 3 without) the run proceeds
    but warns that estimates may be non-identified.
    """
    n = as_count_array(counts)
    n_trials = n.shape[3]
    needed = 2 if monotonicity else 3
    if n_trials < needed:
        warnings.warn(
            f"{n_trials} trial(s) but the {'monotone' if monotonicity else 'non-monotone'} "
            f"model needs at least {needed} for identification; estimates may be non-identified",
            RuntimeWarning,
            stacklevel=2,
        )
    if n_starts < 0:
        raise ParameterError("n_starts must be non-negative")

    stream = seed if isinstance(seed, RngStream) else RngStream(seed)
    inits = [_start(n, monotonicity, None)] if include_barycenter else []
    inits.extend(
        _start(n, monotonicity, stream.split("em-start", i).generator)
        for i in range(n_starts)
    )
    inits.extend(extra_starts)
    if not inits:
        raise ParameterError("no EM starts configured")

    best = None
    for init in inits:
        params, trace, iterations, converged = _em_from(n, init, tol, max_iter)
        ll = trace[-1]
        if best is None or ll > best[1]:
            best = (params, ll, iterations, converged, trace)
    params, ll, iterations, converged, trace = best
    # the loop skips validation for speed; re-validate the winner
    params = ParameterSet(
        p=params.p, alpha=params.alpha, pi=params.pi, delta=params.delta,
        monotonicity=params.monotonicity,
    )
    return EmResult(
        params=params,
        log_likelihood=float(ll),
        iterations=iterations,
        converged=converged,
        trace=trace,
        settings={
            "tol": tol,
            "max_iter": max_iter,
            "n_starts": n_starts,
            "n_extra_starts": len(tuple(extra_starts)),
            "seed": stream.seed,
        },
    )
