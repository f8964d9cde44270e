"""Posterior simulation by data augmentation under flat Dirichlet/Beta priors.

The sampler alternates (i) imputing the latent stratum composition of each
ambiguous observed cell from its Bernoulli posterior odds and (ii) drawing
all parameters from their conjugate full conditionals given the completed
table.  Because units within an observed cell are exchangeable, imputation
is done with one binomial draw per cell rather than per unit, which is the
exact same distribution at a fraction of the cost.

Priors are fixed at Dirichlet/Beta with all parameters 1; the initial state
is drawn from the prior.  Chains use independent sub-streams of the seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .model import (
    CELL_PLANS,
    ParameterSet,
    PsaceSummary,
    Stratum,
    _freeze,
    active_strata,
    as_count_array,
)
from .rng import RngStream

__all__ = [
    "GibbsConfig",
    "PosteriorDraws",
    "impute_strata",
    "draw_parameters",
    "run_gibbs",
    "summarize",
    "gelman_rubin",
    "gelman_rubin_all",
    "mode_count",
]


@dataclass(frozen=True)
class GibbsConfig:
    """Chain length settings for a posterior run."""

    iterations: int = 20_000
    burn_in: int = 4_000
    thin: int = 1
    chains: int = 1

    def kwargs(self) -> dict:
        return {
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "chains": self.chains,
        }


def _impute(n, pi, delta, monotonicity, gen, warn=True):
    """One imputation pass: complete table n[z, u, y, r] from counts and parameters.

    ``delta`` may be (2, 4) or trial-specific (2, 4, R); one batched binomial
    draw covers every ambiguous cell.
    """
    (za, sa, ua, ub), determined = CELL_PLANS[monotonicity]
    n_trials = n.shape[3]
    out = np.zeros((2, 4, 2, n_trials))
    for z, s, u in determined:
        out[z, u, :, :] = n[z, s, :, :]

    da = delta[za, ua]
    db = delta[za, ub]
    if delta.ndim == 2:
        da = da[:, None]
        db = db[:, None]
    # y axis in the middle: (cells, 2, R)
    ta = np.stack([1.0 - da, da], axis=1)
    tb = np.stack([1.0 - db, db], axis=1)
    wa = pi.T[ua][:, None, :] * ta
    wb = pi.T[ub][:, None, :] * tb
    tot = wa + wb
    cell_counts = n[za, sa]
    bad = tot <= 0.0
    if warn and np.any(bad & (cell_counts > 0)):
        warnings.warn(
            "zero-weight cell with positive count; strata drawn with equal probability",
            RuntimeWarning,
            stacklevel=3,
        )
    prob = np.where(bad, 0.5, wa / np.where(bad, 1.0, tot))
    first = gen.binomial(cell_counts.astype(np.int64), prob)
    out[za, ua] = first
    out[za, ub] = cell_counts - first
    return out


def _draw(complete, monotonicity, gen):
    """Conjugate draws (p, alpha, pi, delta) given a complete table."""
    n = complete
    n_trials = n.shape[3]
    k = 3 if monotonicity else 4
    n_r = n.sum(axis=(0, 1, 2))
    n1_r = n[1].sum(axis=(0, 1))
    p = gen.dirichlet(n_r + 1.0)
    alpha = gen.beta(n1_r + 1.0, n_r - n1_r + 1.0)
    n_ur = n.sum(axis=(0, 2)).T  # (R, 4)
    g = gen.standard_gamma(n_ur[:, :k] + 1.0)
    pi = np.zeros((n_trials, 4))
    pi[:, :k] = g / g.sum(axis=1, keepdims=True)
    n_zu1 = n[:, :, 1, :].sum(axis=2)
    n_zu0 = n[:, :, 0, :].sum(axis=2)
    delta = np.full((2, 4), np.nan)
    delta[:, :k] = gen.beta(n_zu1[:, :k] + 1.0, n_zu0[:, :k] + 1.0)
    return p, alpha, pi, delta


def impute_strata(counts, params: ParameterSet, rng) -> np.ndarray:
    """Draw a complete (z, u, y, r) table given observed counts and parameters.

    Monotonicity-determined cells are imputed deterministically; ambiguous
    cells use one binomial draw each with the stated posterior odds.
    """
    n = as_count_array(counts)
    gen = rng.generator if isinstance(rng, RngStream) else rng
    return _impute(n, params.pi, params.delta, params.monotonicity, gen)


def draw_parameters(complete, monotonicity: bool, rng) -> ParameterSet:
    """Draw (p, alpha, pi, delta) from their flat-prior full conditionals."""
    n = np.asarray(complete, dtype=float)
    if np.any(n < 0):
        raise ParameterError("complete counts must be non-negative")
    gen = rng.generator if isinstance(rng, RngStream) else rng
    p, alpha, pi, delta = _draw(n, monotonicity, gen)
    # Values are valid by construction; skip re-validation in the hot path.
    return ParameterSet(p=p, alpha=alpha, pi=pi, delta=delta, monotonicity=monotonicity, validate=False)


@dataclass(frozen=True)
class PosteriorDraws:
    """Stored post-burn-in draws, per chain, plus derived effect summaries.

    Immutable once returned (the arrays are marked read-only), so instances
    are safe to share across concurrent consumers.
    """

    p: np.ndarray  # (chains, draws, R)
    alpha: np.ndarray  # (chains, draws, R)
    pi: np.ndarray  # (chains, draws, R, 4)
    delta: np.ndarray  # (chains, draws, 2, 4)
    monotonicity: bool
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("p", "alpha", "pi", "delta"):
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
    def active(self):
        return active_strata(self.monotonicity)

    @property
    def ace(self) -> np.ndarray:
        """Per-draw ACE_u, shape (chains, draws, 4); NaN on an excluded stratum."""
        return self.delta[:, :, 1, :] - self.delta[:, :, 0, :]

    @property
    def ace_s(self) -> np.ndarray:
        return self.pi[:, :, :, Stratum.SSBAR] - self.pi[:, :, :, Stratum.SBARS]

    @property
    def ace_y(self) -> np.ndarray:
        act = list(self.active)
        return np.einsum("ctru,ctu->ctr", self.pi[:, :, :, act], self.ace[:, :, act])

    def parameter_set(self, chain: int, draw: int) -> ParameterSet:
        return ParameterSet(
            p=self.p[chain, draw],
            alpha=self.alpha[chain, draw],
            pi=self.pi[chain, draw],
            delta=self.delta[chain, draw],
            monotonicity=self.monotonicity,
        )

    def psace_summary(self, chain: int, draw: int) -> PsaceSummary:
        return PsaceSummary(
            ace=self.ace[chain, draw],
            ace_s=self.ace_s[chain, draw],
            ace_y=self.ace_y[chain, draw],
        )

    def pooled(self, values: np.ndarray) -> np.ndarray:
        """Flatten the chain axis of a (chains, draws, ...) array."""
        return values.reshape((-1,) + values.shape[2:])


def run_gibbs(
    counts,
    monotonicity: bool,
    *,
    iterations: int,
    burn_in: int,
    thin: int = 1,
    chains: int = 1,
    seed: int = 0,
) -> PosteriorDraws:
    """Run the data-augmentation sampler and keep post-burn-in (thinned) draws."""
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
    d_out = np.empty((chains, kept, 2, 4))

    zero = np.zeros((2, 4, 2, n_trials))
    for c in range(chains):
        gen = stream.split("chain", c).generator
        p, alpha, pi, delta = _draw(zero, monotonicity, gen)  # prior initial state
        j = 0
        for t in range(iterations):
            complete = _impute(n, pi, delta, monotonicity, gen, warn=False)
            p, alpha, pi, delta = _draw(complete, monotonicity, gen)
            if t >= burn_in and (t - burn_in) % thin == 0:
                p_out[c, j] = p
                a_out[c, j] = alpha
                pi_out[c, j] = pi
                d_out[c, j] = delta
                j += 1

    meta = {
        "chains": chains,
        "iterations": iterations,
        "burn_in": burn_in,
        "thin": thin,
        "seed": stream.seed,
        "init": "prior",
        "prior": "Dirichlet/Beta(1,...,1)",
    }
    return PosteriorDraws(
        p=p_out, alpha=a_out, pi=pi_out, delta=d_out, monotonicity=monotonicity, meta=meta
    )


def _quantile_key(q: float) -> str:
    return f"q{100 * q:g}"


def summarize(draws: PosteriorDraws, quantiles=(0.025, 0.5, 0.975)) -> dict:
    """Order-statistic (linear interpolation) quantiles for every scalar.

    Effect rows additionally carry an ``excludes_zero`` flag computed from
    the extreme requested quantiles.  Trials are labelled 1-based.
    """
    if draws.n_draws == 0 or draws.n_chains == 0:
        raise ParameterError("no draws to summarize")
    quantiles = tuple(sorted(quantiles))
    out = {}

    def add(name, values, effect=False):
        flat = np.asarray(values).ravel()
        row = {"mean": float(flat.mean())}
        qs = np.quantile(flat, quantiles)
        for q, v in zip(quantiles, qs):
            row[_quantile_key(q)] = float(v)
        if effect:
            row["excludes_zero"] = bool(qs[0] > 0.0 or qs[-1] < 0.0)
        out[name] = row

    act = list(draws.active)
    for r in range(draws.n_trials):
        add(f"p[{r + 1}]", draws.p[:, :, r])
        add(f"alpha[{r + 1}]", draws.alpha[:, :, r])
        for u in act:
            add(f"pi[{r + 1},{Stratum(u).label}]", draws.pi[:, :, r, u])
    for z in (0, 1):
        for u in act:
            add(f"delta[{z},{Stratum(u).label}]", draws.delta[:, :, z, u])
    ace = draws.ace
    for u in act:
        add(f"ace[{Stratum(u).label}]", ace[:, :, u], effect=True)
    for r in range(draws.n_trials):
        add(f"ace_s[{r + 1}]", draws.ace_s[:, :, r], effect=True)
        add(f"ace_y[{r + 1}]", draws.ace_y[:, :, r], effect=True)
    return out


def gelman_rubin(chain_values: np.ndarray) -> float:
    """Potential scale reduction factor for one scalar across chains.

    ``chain_values`` has shape (chains, draws).  Zero within-chain variance
    is defined as 1.0 when the chains also agree, +inf otherwise.
    """
    x = np.asarray(chain_values, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ParameterError("need at least two chains")
    m, n = x.shape
    if n < 10:
        raise ParameterError("need at least 10 draws per chain")
    w = x.var(axis=1, ddof=1).mean()
    b_over_n = x.mean(axis=1).var(ddof=1)
    if w == 0.0:
        return 1.0 if b_over_n == 0.0 else float("inf")
    return float(np.sqrt(((n - 1) / n * w + b_over_n) / w))


def gelman_rubin_all(draws: PosteriorDraws) -> dict:
    """PSRF for every stored scalar, keyed like ``summarize``."""
    if draws.n_chains < 2:
        raise ParameterError("need at least two chains for the diagnostic")
    out = {}
    act = list(draws.active)
    for r in range(draws.n_trials):
        out[f"p[{r + 1}]"] = gelman_rubin(draws.p[:, :, r])
        out[f"alpha[{r + 1}]"] = gelman_rubin(draws.alpha[:, :, r])
        for u in act:
            out[f"pi[{r + 1},{Stratum(u).label}]"] = gelman_rubin(draws.pi[:, :, r, u])
    for z in (0, 1):
        for u in act:
            out[f"delta[{z},{Stratum(u).label}]"] = gelman_rubin(draws.delta[:, :, z, u])
    ace = draws.ace
    for u in act:
        out[f"ace[{Stratum(u).label}]"] = gelman_rubin(ace[:, :, u])
    return out


def mode_count(samples, bins: int = 40, rel_prominence: float = 0.10) -> int:
    """Count histogram modes with a fixed bandwidth (heuristic unimodality check).

    This is a stand-in diagnostic: a locally-but-not-globally identified
    parameter must show a multimodal posterior, so a single mode supports
    (but does not prove) global identification.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("no samples")
    hist, _ = np.histogram(x, bins=bins)
    sm = np.convolve(hist.astype(float), np.ones(3) / 3.0, mode="same")
    floor = rel_prominence * sm.max()
    peaks = 0
    i = 0
    n = len(sm)
    while i < n:
        left = sm[i - 1] if i > 0 else -np.inf
        if sm[i] > left:
            j = i
            while j + 1 < n and sm[j + 1] == sm[j]:
                j += 1
            right = sm[j + 1] if j + 1 < n else -np.inf
            if sm[j] > right and sm[i] >= floor:
                peaks += 1
            i = j + 1
        else:
            i += 1
    return peaks
