"""Hierarchical sensitivity analysis relaxing the shared-effects assumption.

Instead of a single delta_zu across trials, each trial gets its own
endpoint probability on the logit scale,

    Y | Z=z, U=u, R=r ~ Bernoulli(delta_zur),
    logit(delta_zur)  ~ Normal(mu_zu, sigma^2),

with sigma a fixed sensitivity knob (sigma -> 0 recovers the homogeneous
model; this sampler refuses sigma = 0, for which run_gibbs is the right
tool).  Priors: p ~ Dirichlet(1,...,1), alpha_r ~ Uniform(0,1), pi_r ~
Dirichlet(1,1,1,1), mu_zu ~ Uniform(-5, 5); the mu truncation keeps the
logits in a numerically comfortable range while leaving delta essentially
unrestricted (expit(+-5) ~ 0.007/0.993).

The eta = logit(delta) full conditional,

    log p(eta | .) = -n0*eta - (eta - mu)^2 / (2 sigma^2) - n*log(1 + e^-eta) + const,

is strictly log-concave, so each eta is updated with a Metropolized
Independence Sampler whose Gaussian proposal is centered at the
Newton-Raphson mode with the negative inverse curvature as variance.
The mu full conditional is an exact truncated Normal (inverse-CDF draw).

Pooled effect summaries are inverse-logit contrasts of the mu centers,
labelled as such; they are center-scale summaries, not mixture means.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .errors import NumericalError, ParameterError
from .gibbs import _impute
from .model import Stratum, _freeze, as_count_array
from .rng import RngStream, sample_truncated_normal

__all__ = [
    "HierarchicalState",
    "HierarchicalDraws",
    "draw_centers",
    "eta_full_conditional_logdensity",
    "eta_mode",
    "mis_step",
    "run_hierarchical_gibbs",
    "summarize_hierarchical",
]

MU_BOUND = 5.0
SIGMA_GRID = (0.05, 0.2, 0.5)


@dataclass(frozen=True)
class HierarchicalState:
    """One state of the hierarchical sampler."""

    p: np.ndarray  # (R,)
    alpha: np.ndarray  # (R,)
    pi: np.ndarray  # (R, 4)
    eta: np.ndarray  # (2, 4, R) logits of delta_zur
    mu: np.ndarray  # (2, 4) in [-MU_BOUND, MU_BOUND]
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")
        if np.any(np.abs(self.mu) > MU_BOUND + 1e-12):
            raise ParameterError(f"mu must lie in [-{MU_BOUND}, {MU_BOUND}]")

    @property
    def delta(self) -> np.ndarray:
        return expit(self.eta)


def eta_full_conditional_logdensity(eta, n1, n0, mu, sigma) -> np.ndarray | float:
    """Unnormalized log density of eta given counts and its Normal center.

    Strictly concave for any non-negative counts: the second derivative is
    -1/sigma^2 - n * e^-eta / (1 + e^-eta)^2 < 0.
    """
    if np.any(np.asarray(sigma) <= 0):
        raise ParameterError("sigma must be positive")
    eta = np.asarray(eta, dtype=float)
    n = np.asarray(n1, dtype=float) + np.asarray(n0, dtype=float)
    return (
        -np.asarray(n0, dtype=float) * eta
        - (eta - mu) ** 2 / (2.0 * sigma**2)
        - n * np.logaddexp(0.0, -eta)
    )


def _grad(eta, n1, n0, mu, sigma):
    n = n1 + n0
    return -n0 - (eta - mu) / sigma**2 + n * expit(-eta)


def _curv(eta, n1, n0, sigma):
    n = n1 + n0
    return -1.0 / sigma**2 - n * expit(eta) * expit(-eta)


def _mode_arrays(n1, n0, mu, sigma, max_iter=100):
    """Vectorized Newton-Raphson mode of the eta full conditional.

    Cells that fail to converge fall back to bisection on the gradient
    (the gradient is strictly decreasing, so the root is unique).
    """
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    n = n1 + n0
    mu_b = np.broadcast_to(np.asarray(mu, dtype=float), n.shape)
    eta = np.where(n > 0, logit((n1 + 0.5) / (n + 1.0)), mu_b).astype(float)
    scale = np.maximum(1.0, n)
    for _ in range(max_iter):
        g = _grad(eta, n1, n0, mu_b, sigma)
        if np.all(np.abs(g) <= 1e-10 * scale):
            break
        h = _curv(eta, n1, n0, sigma)
        eta = eta - np.clip(g / h, -10.0, 10.0)
    g = _grad(eta, n1, n0, mu_b, sigma)
    bad = np.abs(g) > 1e-8 * scale
    used_fallback = bool(np.any(bad))
    if used_fallback:
        flat = eta.reshape(-1)
        for idx in np.argwhere(bad.reshape(-1)).ravel():
            flat[idx] = _bisect_mode(
                n1.reshape(-1)[idx], n0.reshape(-1)[idx], mu_b.reshape(-1)[idx], sigma
            )
        eta = flat.reshape(eta.shape)
    var = -1.0 / _curv(eta, n1, n0, sigma)
    return eta, var, used_fallback


def _bisect_mode(n1, n0, mu, sigma, tol=1e-12, max_iter=200):
    lo, hi = mu - 1.0, mu + 1.0
    width = 1.0
    while _grad(lo, n1, n0, mu, sigma) < 0:
        width *= 2.0
        lo -= width
        if width > 1e8:
            raise NumericalError("could not bracket the eta mode from below")
    width = 1.0
    while _grad(hi, n1, n0, mu, sigma) > 0:
        width *= 2.0
        hi += width
        if width > 1e8:
            raise NumericalError("could not bracket the eta mode from above")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if _grad(mid, n1, n0, mu, sigma) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def eta_mode(n1, n0, mu, sigma):
    """Mode and proposal variance (negative inverse curvature) of the eta conditional."""
    mode, var, _ = _mode_arrays(np.asarray(n1, float), np.asarray(n0, float), mu, sigma)
    if np.ndim(n1) == 0:
        return float(mode), float(var)
    return mode, var


def _mis_update(eta, n1, n0, mu, sigma, gen):
    """One Metropolized-Independence update for each cell; returns (eta, accepted)."""
    mode, var, _ = _mode_arrays(n1, n0, mu, sigma)
    sd = np.sqrt(var)
    proposal = mode + sd * gen.standard_normal(size=np.shape(eta))
    log_target_prop = eta_full_conditional_logdensity(proposal, n1, n0, mu, sigma)
    log_target_cur = eta_full_conditional_logdensity(eta, n1, n0, mu, sigma)
    log_q_prop = -((proposal - mode) ** 2) / (2.0 * var)
    log_q_cur = -((eta - mode) ** 2) / (2.0 * var)
    log_ratio = (log_target_prop - log_q_prop) - (log_target_cur - log_q_cur)
    accept = np.log(gen.uniform(size=np.shape(eta))) < log_ratio
    return np.where(accept, proposal, eta), accept


def draw_centers(eta, sigma, rng):
    """Exact truncated-Normal draw of the mu centers given the logits.

    The full conditional is Normal(mean over trials of eta, sigma^2 / N_R)
    truncated to [-MU_BOUND, MU_BOUND], sampled by inverse CDF.
    """
    eta = np.asarray(eta, dtype=float)
    gen = rng.generator if isinstance(rng, RngStream) else rng
    return sample_truncated_normal(
        eta.mean(axis=-1), sigma / np.sqrt(eta.shape[-1]), -MU_BOUND, MU_BOUND, gen
    )


def mis_step(eta, n1, n0, mu, sigma, rng):
    """Public single-step MIS update; works on scalars or arrays."""
    gen = rng.generator if isinstance(rng, RngStream) else rng
    new, accepted = _mis_update(
        np.asarray(eta, dtype=float),
        np.asarray(n1, dtype=float),
        np.asarray(n0, dtype=float),
        np.asarray(mu, dtype=float),
        sigma,
        gen,
    )
    if np.ndim(eta) == 0:
        return float(new), bool(accepted)
    return new, accepted


@dataclass(frozen=True)
class HierarchicalDraws:
    """Stored draws of the hierarchical sampler plus MIS acceptance rates.

    Immutable once returned; safe to share across concurrent consumers.
    """

    p: np.ndarray  # (chains, draws, R)
    alpha: np.ndarray  # (chains, draws, R)
    pi: np.ndarray  # (chains, draws, R, 4)
    eta: np.ndarray  # (chains, draws, 2, 4, R)
    mu: np.ndarray  # (chains, draws, 2, 4)
    sigma: float
    acceptance: np.ndarray  # (2, 4, R) MIS acceptance rates over all iterations
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p", "alpha", "pi", "eta", "mu", "acceptance"):
            object.__setattr__(self, name, _freeze(np.asarray(getattr(self, name), dtype=float)))

    @property
    def n_chains(self) -> int:
        return self.p.shape[0]

    @property
    def n_draws(self) -> int:
        return self.p.shape[1]

    @property
    def n_trials(self) -> int:
        return self.p.shape[2]

    @property
    def delta(self) -> np.ndarray:
        return expit(self.eta)

    @property
    def ace_by_trial(self) -> np.ndarray:
        """Per-draw, per-trial ACE_ur = delta_1ur - delta_0ur, shape (C, T, 4, R)."""
        d = self.delta
        return d[:, :, 1] - d[:, :, 0]

    @property
    def ace_pooled(self) -> np.ndarray:
        """Center-scale effect expit(mu_1u) - expit(mu_0u), shape (C, T, 4)."""
        m = expit(self.mu)
        return m[:, :, 1] - m[:, :, 0]

    def pooled(self, values: np.ndarray) -> np.ndarray:
        return values.reshape((-1,) + values.shape[2:])


def run_hierarchical_gibbs(
    counts,
    sigma: float,
    *,
    iterations: int,
    burn_in: int,
    thin: int = 1,
    chains: int = 1,
    seed: int = 0,
) -> HierarchicalDraws:
    """Gibbs sampler for the trial-specific (non-monotone) hierarchical model.

    Each iteration imputes the strata with the trial-specific deltas in the
    odds, draws p / alpha / pi conjugately, draws each mu_zu from its exact
    truncated-Normal conditional, and refreshes every eta_zur with one MIS
    step.  sigma = 0 is refused: use the homogeneous sampler instead.
    """
    if sigma <= 0:
        raise ParameterError("sigma must be positive; for sigma = 0 use run_gibbs")
    if not iterations > burn_in >= 0:
        raise ParameterError("need iterations > burn_in >= 0")
    if thin < 1 or chains < 1:
        raise ParameterError("thin and chains must be positive")
    n = as_count_array(counts)
    n_trials = n.shape[3]
    stream = seed if isinstance(seed, RngStream) else RngStream(seed)

    kept = len(range(burn_in, iterations, thin))
    p_out = np.empty((chains, kept, n_trials))
    a_out = np.empty((chains, kept, n_trials))
    pi_out = np.empty((chains, kept, n_trials, 4))
    eta_out = np.empty((chains, kept, 2, 4, n_trials))
    mu_out = np.empty((chains, kept, 2, 4))
    accepted = np.zeros((2, 4, n_trials))

    for c in range(chains):
        gen = stream.split("chain", c).generator
        pi = gen.dirichlet(np.ones(4), size=n_trials)
        alpha = gen.uniform(size=n_trials)
        p = gen.dirichlet(np.ones(n_trials))
        mu = gen.uniform(-MU_BOUND, MU_BOUND, size=(2, 4))
        eta = mu[:, :, None] + sigma * gen.standard_normal(size=(2, 4, n_trials))
        j = 0
        for t in range(iterations):
            delta = expit(eta)
            complete = _impute(n, pi, delta, False, gen, warn=False)
            n_r = complete.sum(axis=(0, 1, 2))
            n1_r = complete[1].sum(axis=(0, 1))
            p = gen.dirichlet(n_r + 1.0)
            alpha = gen.beta(n1_r + 1.0, n_r - n1_r + 1.0)
            g = gen.standard_gamma(complete.sum(axis=(0, 2)).T + 1.0)
            pi = g / g.sum(axis=1, keepdims=True)
            n_zu1r = complete[:, :, 1, :]
            n_zu0r = complete[:, :, 0, :]
            mu = draw_centers(eta, sigma, gen)
            eta, acc = _mis_update(eta, n_zu1r, n_zu0r, mu[:, :, None], sigma, gen)
            accepted += acc
            if t >= burn_in and (t - burn_in) % thin == 0:
                p_out[c, j] = p
                a_out[c, j] = alpha
                pi_out[c, j] = pi
                eta_out[c, j] = eta
                mu_out[c, j] = mu
                j += 1

    meta = {
        "chains": chains,
        "iterations": iterations,
        "burn_in": burn_in,
        "thin": thin,
        "seed": stream.seed,
        "sigma": sigma,
        "mu_bound": MU_BOUND,
        "init": "prior",
    }
    return HierarchicalDraws(
        p=p_out,
        alpha=a_out,
        pi=pi_out,
        eta=eta_out,
        mu=mu_out,
        sigma=sigma,
        acceptance=accepted / (chains * iterations),
        meta=meta,
    )


def summarize_hierarchical(draws: HierarchicalDraws, quantiles=(0.025, 0.5, 0.975)) -> dict:
    """Quantile rows for per-trial effects and the pooled center-scale effects.

    Pooled rows (``ace_mu[...]``) contrast the inverse-logit mu centers and
    are labelled on that scale; they are not mixture means over trials.
    """
    if draws.n_draws == 0:
        raise ParameterError("no draws to summarize")
    quantiles = tuple(sorted(quantiles))
    out = {}

    def add(name, values, effect=True):
        flat = np.asarray(values).ravel()
        row = {"mean": float(flat.mean())}
        qs = np.quantile(flat, quantiles)
        for q, v in zip(quantiles, qs):
            row[f"q{100 * q:g}"] = float(v)
        if effect:
            row["excludes_zero"] = bool(qs[0] > 0.0 or qs[-1] < 0.0)
        out[name] = row

    pooled = draws.ace_pooled
    by_trial = draws.ace_by_trial
    for u in Stratum:
        add(f"ace_mu[{u.label}]", pooled[:, :, u])
        for r in range(draws.n_trials):
            add(f"ace[{u.label},{r + 1}]", by_trial[:, :, u, r])
    return out
