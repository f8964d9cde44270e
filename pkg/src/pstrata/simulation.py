"""Scenario catalogue, data generation, and estimator evaluation.

The built-in scenarios are the standard simulation designs for this model
family: monotone designs with 2/3/5 trials and non-monotone designs with
3/4/5 trials, all with trial weights 1/N_R, plus heterogeneous variants of
the three-trial designs where the trial-specific endpoint probabilities are
offset around their centers by a heterogeneity parameter d:

    delta_zu1 = mu_zu - (-1)^z d,  delta_zu2 = mu_zu,  delta_zu3 = mu_zu + (-1)^z d,

so the per-trial effects are mu contrasts +2d, +0, -2d.  Evaluation scores
bias and RMSE of the ML point estimates and coverage of the posterior
credible intervals against the (center) truth, replicate by replicate with
independent sub-streams, so reports are independent of execution order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .em import EmConfig, run_em
from .errors import ParameterError
from .gibbs import GibbsConfig, run_gibbs
from .model import (
    ObservedCounts,
    ParameterSet,
    Stratum,
    active_strata,
    delta_from_vector,
    pi_from_rows,
    surrogate_value,
)
from .rng import RngStream

__all__ = [
    "Scenario",
    "EvalReport",
    "builtin_scenarios",
    "generate_dataset",
    "evaluate",
]

_DELTA_MONO = (0.8, 0.5, 0.7, 0.3, 0.6, 0.1)
_DELTA_NONMONO = (0.8, 0.5, 0.7, 0.3, 0.6, 0.1, 0.5, 0.2)

_PI_MONO = {
    2: ([(0.7, 0.2, 0.1), (0.1, 0.2, 0.7)], (0.4, 0.6)),
    3: ([(0.8, 0.1, 0.1), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8)], (0.4, 0.5, 0.6)),
    5: (
        [(0.8, 0.1, 0.1), (0.6, 0.3, 0.1), (0.3, 0.2, 0.5), (0.1, 0.3, 0.6), (0.1, 0.1, 0.8)],
        (0.3, 0.4, 0.5, 0.6, 0.7),
    ),
}
_PI_NONMONO = {
    3: (
        [(0.6, 0.2, 0.1, 0.1), (0.1, 0.6, 0.2, 0.1), (0.1, 0.1, 0.6, 0.2)],
        (0.4, 0.5, 0.6),
    ),
    4: (
        [
            (0.6, 0.2, 0.1, 0.1),
            (0.1, 0.6, 0.2, 0.1),
            (0.1, 0.1, 0.6, 0.2),
            (0.2, 0.3, 0.2, 0.3),
        ],
        (0.4, 0.5, 0.6, 0.7),
    ),
    5: (
        [
            (0.6, 0.2, 0.1, 0.1),
            (0.1, 0.6, 0.2, 0.1),
            (0.3, 0.2, 0.3, 0.2),
            (0.4, 0.1, 0.4, 0.1),
            (0.1, 0.1, 0.6, 0.2),
        ],
        (0.3, 0.4, 0.5, 0.6, 0.7),
    ),
}

_HET_D_VALUES = (0.01, 0.025, 0.05)


@dataclass(frozen=True)
class Scenario:
    """Generating design: stratum mixes, assignment rates, endpoint probabilities.

    ``delta`` holds the shared endpoint probabilities, or the centers mu_zu
    when d > 0 (heterogeneous variants need exactly three trials).  Trial
    weights are uniform.
    """

    name: str
    monotonicity: bool
    pi: np.ndarray  # (R, 4)
    alpha: np.ndarray  # (R,)
    delta: np.ndarray  # (2, 4); centers when d != 0
    d: float = 0.0
    n_per_trial: int = 500

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        delta = np.asarray(self.delta, dtype=float)
        if pi.ndim != 2 or pi.shape[1] != 4 or alpha.shape != (pi.shape[0],):
            raise ParameterError("pi must be (R, 4) with matching alpha")
        if self.d != 0.0 and pi.shape[0] != 3:
            raise ParameterError("heterogeneous scenarios are defined for exactly 3 trials")
        act = [int(u) for u in active_strata(self.monotonicity)]
        by_trial = self._delta_by_trial(delta)
        if np.any(by_trial[:, act, :] < 0) or np.any(by_trial[:, act, :] > 1):
            raise ParameterError("heterogeneity offsets push delta outside [0, 1]")
        if self.n_per_trial < 1:
            raise ParameterError("n_per_trial must be positive")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "delta", delta)

    @property
    def n_trials(self) -> int:
        return self.pi.shape[0]

    @property
    def p(self) -> np.ndarray:
        return np.full(self.n_trials, 1.0 / self.n_trials)

    def _delta_by_trial(self, delta) -> np.ndarray:
        out = np.repeat(delta[:, :, None], self.n_trials, axis=2)
        if self.d != 0.0:
            sign_z = np.array([-1.0, 1.0])  # -(-1)^z
            offsets = np.array([1.0, 0.0, -1.0])  # trial 1, 2, 3
            out = out + self.d * sign_z[:, None, None] * offsets[None, None, :]
        return out

    @property
    def delta_by_trial(self) -> np.ndarray:
        """Trial-specific endpoint probabilities, shape (2, 4, R)."""
        return self._delta_by_trial(np.asarray(self.delta, dtype=float))

    @property
    def ace(self) -> np.ndarray:
        """Evaluation truth: the center contrasts delta_1u - delta_0u, shape (4,)."""
        return self.delta[1] - self.delta[0]

    def params(self) -> ParameterSet:
        """The homogeneous ParameterSet (only defined when d = 0)."""
        if self.d != 0.0:
            raise ParameterError("a heterogeneous scenario has no single ParameterSet")
        return ParameterSet(
            p=self.p,
            alpha=self.alpha,
            pi=self.pi,
            delta=self.delta,
            monotonicity=self.monotonicity,
        )


def builtin_scenarios() -> dict:
    """Named catalogue: Table-style homogeneous designs plus heterogeneity variants."""
    out = {}
    for n_r, (rows, alphas) in _PI_MONO.items():
        out[f"monotone-{n_r}"] = Scenario(
            name=f"monotone-{n_r}",
            monotonicity=True,
            pi=pi_from_rows(rows, True),
            alpha=np.asarray(alphas),
            delta=delta_from_vector(_DELTA_MONO, True),
        )
    for n_r, (rows, alphas) in _PI_NONMONO.items():
        out[f"nonmonotone-{n_r}"] = Scenario(
            name=f"nonmonotone-{n_r}",
            monotonicity=False,
            pi=pi_from_rows(rows, False),
            alpha=np.asarray(alphas),
            delta=delta_from_vector(_DELTA_NONMONO, False),
        )
    for d in _HET_D_VALUES:
        for kind in ("monotone", "nonmonotone"):
            base = out[f"{kind}-3"]
            name = f"{kind}-3-d{d}"
            out[name] = replace(base, name=name, d=d)
    return out


def generate_dataset(scenario: Scenario, seed, n_per_trial: int | None = None) -> ObservedCounts:
    """Draw one dataset: R categorical, Z | R Bernoulli, U | R categorical,
    Y | Z, U (, R) Bernoulli, S read off the stratum.  Deterministic given seed.
    """
    stream = seed if isinstance(seed, RngStream) else RngStream(seed)
    gen = stream.generator
    n_total = (n_per_trial or scenario.n_per_trial) * scenario.n_trials
    delta = scenario.delta_by_trial
    act = [int(u) for u in active_strata(scenario.monotonicity)]

    counts = np.zeros((2, 2, 2, scenario.n_trials), dtype=np.int64)
    trial_sizes = gen.multinomial(n_total, scenario.p)
    for r, n_r in enumerate(trial_sizes):
        n_treated = gen.binomial(n_r, scenario.alpha[r])
        for z, n_z in ((1, n_treated), (0, n_r - n_treated)):
            if n_z == 0:
                continue
            strata_counts = gen.multinomial(n_z, scenario.pi[r, act])
            for u, n_u in zip(act, strata_counts):
                if n_u == 0:
                    continue
                n_y1 = gen.binomial(n_u, delta[z, u, r])
                s = surrogate_value(z, Stratum(u))
                counts[z, s, 1, r] += n_y1
                counts[z, s, 0, r] += n_u - n_y1
    return ObservedCounts(counts)


@dataclass(frozen=True)
class EvalReport:
    """Aggregated bias / RMSE / coverage per stratum plus replicate-level rows."""

    scenario: str
    n_replicates: int
    n_failed: int
    fail_warning: bool
    truth: dict
    bias: dict
    rmse: dict
    coverage: dict
    replicates: list = field(default_factory=list)


def _replicate(scenario, em_config, gibbs_config, level, seed, index):
    stream = RngStream(seed).split("replicate", index)
    counts = generate_dataset(scenario, stream.split("data"))
    act = [int(u) for u in active_strata(scenario.monotonicity)]

    fit = run_em(
        counts, scenario.monotonicity, seed=stream.split("em"), **em_config.kwargs()
    )
    est = fit.params.delta[1] - fit.params.delta[0]

    draws = run_gibbs(
        counts, scenario.monotonicity, seed=stream.split("gibbs"), **gibbs_config.kwargs()
    )
    tail = (1.0 - level) / 2.0
    row = {"replicate": index}
    for u in act:
        label = Stratum(u).label
        lo, hi = np.quantile(draws.pooled(draws.ace[:, :, u]), [tail, 1.0 - tail])
        row[f"est_{label}"] = float(est[u])
        row[f"lo_{label}"] = float(lo)
        row[f"hi_{label}"] = float(hi)
    return row


def evaluate(
    scenario: Scenario,
    n_replicates: int,
    *,
    em_config: EmConfig | None = None,
    gibbs_config: GibbsConfig | None = None,
    level: float = 0.95,
    seed: int = 0,
    n_jobs: int = 1,
) -> EvalReport:
    """Bias/RMSE of the MLEs and credible-interval coverage over replicates.

    Under heterogeneity the scoring truth is the center contrast.  A failed
    replicate is recorded and excluded; more than 5% failures is flagged.
    """
    if n_replicates < 1:
        raise ParameterError("n_replicates must be positive")
    em_config = em_config or EmConfig()
    gibbs_config = gibbs_config or GibbsConfig()
    args = [(scenario, em_config, gibbs_config, level, seed, i) for i in range(n_replicates)]

    rows = []
    n_failed = 0
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = pool.map(_replicate_star, args)
            for res in results:
                if res is None:
                    n_failed += 1
                else:
                    rows.append(res)
    else:
        for a in args:
            res = _replicate_star(a)
            if res is None:
                n_failed += 1
            else:
                rows.append(res)
    if not rows:
        raise ParameterError("every replicate failed")
    rows.sort(key=lambda r: r["replicate"])

    act = [int(u) for u in active_strata(scenario.monotonicity)]
    truth = {Stratum(u).label: float(scenario.ace[u]) for u in act}
    bias, rmse, coverage = {}, {}, {}
    for u in act:
        label = Stratum(u).label
        est = np.array([r[f"est_{label}"] for r in rows])
        lo = np.array([r[f"lo_{label}"] for r in rows])
        hi = np.array([r[f"hi_{label}"] for r in rows])
        err = est - truth[label]
        bias[label] = float(err.mean())
        rmse[label] = float(np.sqrt((err**2).mean()))
        coverage[label] = float(np.mean((lo <= truth[label]) & (truth[label] <= hi)))
    return EvalReport(
        scenario=scenario.name,
        n_replicates=len(rows),
        n_failed=n_failed,
        fail_warning=n_failed > 0.05 * n_replicates,
        truth=truth,
        bias=bias,
        rmse=rmse,
        coverage=coverage,
        replicates=rows,
    )


def _replicate_star(args):
    try:
        return _replicate(*args)
    except Exception:
        return None
