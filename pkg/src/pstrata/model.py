"""Data model and forward probability map for multi-trial surrogate studies.

The observed data are 2x2x2xN_R contingency tables over (treatment Z,
binary surrogate S, binary endpoint Y, trial R).  Each unit belongs to a
latent stratum u = (S(1), S(0)); the model parameters are

    p_r     = P(R = r)
    alpha_r = P(Z = 1 | R = r)
    pi_ur   = P(U = u | R = r)
    delta_zu = P(Y = 1 | Z = z, U = u)           (shared across trials)

and the observed-cell probabilities decompose as

    P(Z=z, S=s, Y=y, R=r)
        = p_r * alpha_r^z (1-alpha_r)^(1-z)
          * sum_{u in O(z,s)} pi_ur * delta_zu^y (1-delta_zu)^(1-y),

where O(z, s) is the set of strata compatible with observing S=s under
arm z.  Under the monotone model the stratum with S(1)=0, S(0)=1 is
excluded, which makes the cells (z=1, s=0) and (z=0, s=1) pure
(single-stratum) rather than two-component mixtures.

Trials are indexed 1..N_R in user-facing labels and 0-based internally.
All functions here are pure and inputs are treated as immutable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy.special import xlogy

from .errors import EmptyArmError, ParameterError, SupportError

SIMPLEX_TOL = 1e-9
RENORM_TOL = 1e-12


class Stratum(IntEnum):
    """Latent classes (S(1), S(0)): SS=(1,1), SSBAR=(1,0), SBARSBAR=(0,0), SBARS=(0,1)."""

    SS = 0
    SSBAR = 1
    SBARSBAR = 2
    SBARS = 3

    @property
    def label(self) -> str:
        return self.name.lower()


ALL_STRATA = tuple(Stratum)
MONOTONE_STRATA = (Stratum.SS, Stratum.SSBAR, Stratum.SBARSBAR)

# Strata compatible with an observed (z, s) cell, without monotonicity.
_COMPATIBLE = {
    (1, 1): (Stratum.SS, Stratum.SSBAR),
    (1, 0): (Stratum.SBARSBAR, Stratum.SBARS),
    (0, 1): (Stratum.SS, Stratum.SBARS),
    (0, 0): (Stratum.SSBAR, Stratum.SBARSBAR),
}


def active_strata(monotonicity: bool) -> tuple[Stratum, ...]:
    return MONOTONE_STRATA if monotonicity else ALL_STRATA


def compatible_strata(z: int, s: int, monotonicity: bool) -> tuple[Stratum, ...]:
    """O(z, s): strata whose potential surrogate S(z) equals s."""
    strata = _COMPATIBLE[(z, s)]
    if monotonicity:
        strata = tuple(u for u in strata if u is not Stratum.SBARS)
    return strata


def surrogate_value(z: int, stratum: Stratum) -> int:
    """The surrogate S(z) a unit in this stratum shows under arm z."""
    if z == 1:
        return 1 if stratum in (Stratum.SS, Stratum.SSBAR) else 0
    return 1 if stratum in (Stratum.SS, Stratum.SBARS) else 0


def _cell_plan(monotonicity: bool):
    """Index arrays for the two-component cells and the single-stratum cells."""
    ambiguous = []
    determined = []
    for z in (0, 1):
        for s in (0, 1):
            strata = compatible_strata(z, s, monotonicity)
            if len(strata) == 1:
                determined.append((z, s, int(strata[0])))
            else:
                ambiguous.append((z, s, int(strata[0]), int(strata[1])))
    cols = tuple(np.array(col) for col in zip(*ambiguous))
    return cols, determined


CELL_PLANS = {flag: _cell_plan(flag) for flag in (False, True)}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _check_simplex(rows: np.ndarray, what: str) -> np.ndarray:
    """Validate simplex rows to SIMPLEX_TOL; renormalize only within RENORM_TOL."""
    if np.any(rows < -SIMPLEX_TOL) or np.any(rows > 1 + SIMPLEX_TOL):
        raise ParameterError(f"{what} entries must lie in [0, 1]")
    rows = np.clip(rows, 0.0, 1.0)
    sums = rows.sum(axis=-1)
    err = np.abs(sums - 1.0)
    if np.any(err > SIMPLEX_TOL):
        raise ParameterError(f"{what} must sum to 1 (max deviation {err.max():.3g})")
    fix = err <= RENORM_TOL
    if rows.ndim == 1:
        return rows / sums if fix else rows
    out = rows.copy()
    out[fix] = rows[fix] / sums[fix, None]
    return out


@dataclass(frozen=True)
class ParameterSet:
    """Full parameter vector (p, alpha, pi, delta) under a monotonicity flag.

    pi has shape (n_trials, 4) with the SBARS column identically zero under
    monotonicity; delta has shape (2, 4) indexed [z, stratum] with the SBARS
    column NaN under monotonicity (it must never enter a computation there).
    """

    p: np.ndarray
    alpha: np.ndarray
    pi: np.ndarray
    delta: np.ndarray
    monotonicity: bool
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        delta = np.asarray(self.delta, dtype=float)
        if self.validate:
            if p.ndim != 1 or p.size < 1:
                raise ParameterError("p must be a non-empty vector")
            r = p.size
            if alpha.shape != (r,):
                raise ParameterError("alpha must have one entry per trial")
            if pi.shape != (r, 4):
                raise ParameterError("pi must have shape (n_trials, 4)")
            if delta.shape != (2, 4):
                raise ParameterError("delta must have shape (2, 4)")
            p = _check_simplex(p, "p")
            if np.any(alpha < -SIMPLEX_TOL) or np.any(alpha > 1 + SIMPLEX_TOL):
                raise ParameterError("alpha entries must lie in [0, 1]")
            alpha = np.clip(alpha, 0.0, 1.0)
            if self.monotonicity:
                if np.any(np.abs(pi[:, Stratum.SBARS]) > SIMPLEX_TOL):
                    raise ParameterError("pi[SBARS] must be zero under monotonicity")
                pi = pi.copy()
                pi[:, Stratum.SBARS] = 0.0
            pi = _check_simplex(pi, "pi")
            active = list(active_strata(self.monotonicity))
            d_act = delta[:, active]
            if np.any(~np.isfinite(d_act)) or np.any(d_act < 0) or np.any(d_act > 1):
                raise ParameterError("delta entries must lie in [0, 1]")
            if self.monotonicity:
                delta = delta.copy()
                delta[:, Stratum.SBARS] = np.nan
        object.__setattr__(self, "p", _freeze(p))
        object.__setattr__(self, "alpha", _freeze(alpha))
        object.__setattr__(self, "pi", _freeze(pi))
        object.__setattr__(self, "delta", _freeze(delta))

    @property
    def n_trials(self) -> int:
        return self.p.size

    @property
    def active(self) -> tuple[Stratum, ...]:
        return active_strata(self.monotonicity)

    @classmethod
    def random(cls, n_trials: int, monotonicity: bool, rng) -> "ParameterSet":
        """Uniform draw on the parameter simplices, for tests and EM starts."""
        gen = rng.generator if hasattr(rng, "generator") else rng
        k = 3 if monotonicity else 4
        pi = np.zeros((n_trials, 4))
        pi[:, :k] = gen.dirichlet(np.ones(k), size=n_trials)
        delta = np.full((2, 4), np.nan)
        delta[:, :k] = gen.uniform(size=(2, k))
        return cls(
            p=gen.dirichlet(np.ones(n_trials)),
            alpha=gen.uniform(size=n_trials),
            pi=pi,
            delta=delta,
            monotonicity=monotonicity,
        )


def delta_from_vector(values, monotonicity: bool) -> np.ndarray:
    """Build the (2, 4) delta array from the conventional flat ordering.

    The ordering alternates arms within strata: (d1_ss, d0_ss, d1_ssbar,
    d0_ssbar, d1_sbarsbar, d0_sbarsbar[, d1_sbars, d0_sbars]).
    """
    values = np.asarray(values, dtype=float)
    expected = 6 if monotonicity else 8
    if values.shape != (expected,):
        raise ParameterError(f"expected {expected} delta values, got {values.shape}")
    delta = np.full((2, 4), np.nan)
    order = MONOTONE_STRATA if monotonicity else ALL_STRATA
    for i, u in enumerate(order):
        delta[1, u] = values[2 * i]
        delta[0, u] = values[2 * i + 1]
    return delta


def pi_from_rows(rows, monotonicity: bool) -> np.ndarray:
    """Build the (n_trials, 4) pi array from per-trial rows in stratum order."""
    rows = np.asarray(rows, dtype=float)
    k = 3 if monotonicity else 4
    if rows.ndim != 2 or rows.shape[1] != k:
        raise ParameterError(f"expected rows of length {k}")
    pi = np.zeros((rows.shape[0], 4))
    pi[:, :k] = rows
    return pi


@dataclass(frozen=True)
class ObservedCounts:
    """Contingency table of observed frequencies, indexed [z, s, y, r]."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 4 or counts.shape[:3] != (2, 2, 2) or counts.shape[3] < 1:
            raise ParameterError("counts must have shape (2, 2, 2, n_trials)")
        if not np.issubdtype(counts.dtype, np.integer):
            as_int = np.round(counts).astype(np.int64)
            if not np.allclose(counts, as_int):
                raise ParameterError("counts must be integers")
            counts = as_int
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ParameterError("counts must be non-negative")
        if counts.sum() <= 0:
            raise ParameterError("total count must be positive")
        empty = np.nonzero(counts.sum(axis=(1, 2)) == 0)
        for z, r in zip(*empty):
            warnings.warn(
                f"no observations in arm z={z} of trial {r + 1}",
                RuntimeWarning,
                stacklevel=2,
            )
        object.__setattr__(self, "counts", _freeze(counts))

    @property
    def n_trials(self) -> int:
        return self.counts.shape[3]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def arm_totals(self) -> np.ndarray:
        """Per-(z, r) totals, shape (2, n_trials)."""
        return self.counts.sum(axis=(1, 2))

    @classmethod
    def from_units(cls, trial, z, s, y, n_trials=None) -> "ObservedCounts":
        """Tabulate unit-level records; ``trial`` uses 1-based labels."""
        trial = np.asarray(trial, dtype=np.int64)
        z = np.asarray(z, dtype=np.int64)
        s = np.asarray(s, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if n_trials is None:
            n_trials = int(trial.max())
        counts = np.zeros((2, 2, 2, n_trials), dtype=np.int64)
        np.add.at(counts, (z, s, y, trial - 1), 1)
        return cls(counts)


def as_count_array(counts) -> np.ndarray:
    """Accept ObservedCounts or a raw (2,2,2,R) array; returns float array."""
    if isinstance(counts, ObservedCounts):
        return counts.counts.astype(float)
    arr = np.asarray(counts, dtype=float)
    if arr.ndim != 4 or arr.shape[:3] != (2, 2, 2):
        raise ParameterError("counts must have shape (2, 2, 2, n_trials)")
    if np.any(arr < 0):
        raise ParameterError("counts must be non-negative")
    return arr


@dataclass(frozen=True)
class ObservedDistribution:
    """Empirical (or population) conditional distributions per trial.

    p_s[z, s, r]    = P(S=s | Z=z, R=r)
    q_y1[z, s, r]   = P(Y=1 | Z=z, S=s, R=r), NaN where the cell is empty
    omega[z, s, y, r] = P(Y=y, S=s | Z=z, R=r)
    """

    p_s: np.ndarray
    q_y1: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_s", _freeze(np.asarray(self.p_s, dtype=float)))
        object.__setattr__(self, "q_y1", _freeze(np.asarray(self.q_y1, dtype=float)))
        object.__setattr__(self, "omega", _freeze(np.asarray(self.omega, dtype=float)))

    @property
    def n_trials(self) -> int:
        return self.p_s.shape[2]


def observed_distribution(counts: ObservedCounts, allow_empty: bool = False) -> ObservedDistribution:
    """Empirical conditional frequencies from a count table.

    With ``allow_empty=False`` an arm (z, r) with no observations raises
    EmptyArmError; undefined q entries on empty (z, s, r) cells are NaN
    either way (their omega mass is exactly zero, so downstream algebra
    never needs them).
    """
    n = as_count_array(counts)
    arm = n.sum(axis=(1, 2))  # (2, R)
    if not allow_empty and np.any(arm == 0):
        z, r = np.argwhere(arm == 0)[0]
        raise EmptyArmError(f"empty arm: z={z}, trial r={r + 1}")
    with np.errstate(invalid="ignore", divide="ignore"):
        p_s = n.sum(axis=2) / arm[:, None, :]
        q_y1 = n[:, :, 1, :] / n.sum(axis=2)
        omega = n / arm[:, None, None, :]
    return ObservedDistribution(p_s=p_s, q_y1=q_y1, omega=omega)


def population_distribution(params: ParameterSet) -> ObservedDistribution:
    """Exact conditional distribution implied by a parameter set."""
    cells = cell_probabilities(params)  # joint over (z, s, y, r)
    cond = cells / params.p[None, None, None, :]
    arm = cond.sum(axis=(1, 2))  # (2, R): alpha / 1-alpha
    with np.errstate(invalid="ignore", divide="ignore"):
        omega = cond / arm[:, None, None, :]
        p_s = omega.sum(axis=2)
        q_y1 = omega[:, :, 1, :] / p_s
    return ObservedDistribution(p_s=p_s, q_y1=q_y1, omega=omega)


def mixture_means(params: ParameterSet) -> np.ndarray:
    """sum_{u in O(z,s)} pi_ur * delta_zu^y (1-delta_zu)^(1-y), shape (2,2,2,R)."""
    out = np.zeros((2, 2, 2, params.n_trials))
    for z in (0, 1):
        for s in (0, 1):
            for u in compatible_strata(z, s, params.monotonicity):
                d = params.delta[z, u]
                out[z, s, 1, :] += params.pi[:, u] * d
                out[z, s, 0, :] += params.pi[:, u] * (1.0 - d)
    return out


def cell_probabilities(params: ParameterSet) -> np.ndarray:
    """Joint observed-cell probabilities P(Z=z, S=s, Y=y, R=r), shape (2,2,2,R).

    The output sums to 1 and marginalizes back to p and alpha exactly.
    """
    mix = mixture_means(params)
    arm = np.stack([1.0 - params.alpha, params.alpha])  # (2, R)
    return params.p[None, None, None, :] * arm[:, None, None, :] * mix


def observed_log_likelihood(counts, params: ParameterSet) -> float:
    """Multinomial log-likelihood sum N_zsyr log P(z,s,y,r) with 0*log 0 = 0.

    Returns -inf exactly when some positive count sits on a zero-probability
    cell; optimizers treat that sentinel as "reject".
    """
    n = as_count_array(counts)
    probs = cell_probabilities(params)
    if np.any((n > 0) & (probs <= 0.0)):
        return float("-inf")
    return float(xlogy(n, probs).sum())


def complete_log_likelihood(complete, params: ParameterSet) -> float:
    """Log-likelihood of a complete (z, u, y, r) table, up to the multinomial constant.

    The table must respect the model support: under monotonicity no mass may
    sit on the excluded stratum.
    """
    n = np.asarray(complete, dtype=float)
    if n.shape != (2, 4, 2, params.n_trials):
        raise ParameterError("complete table must have shape (2, 4, 2, n_trials)")
    if np.any(n < 0):
        raise ParameterError("complete counts must be non-negative")
    if params.monotonicity and n[:, Stratum.SBARS].sum() > 0:
        raise SupportError("monotone model excludes the SBARS stratum")
    n_r = n.sum(axis=(0, 1, 2))
    n_zr = n.sum(axis=(1, 2))
    n_ur = n.sum(axis=(0, 2))  # (4, R)
    n_zu = n.sum(axis=3)  # (2, 4, 2) -> [z, u, y]
    ll = xlogy(n_r, params.p).sum()
    ll += xlogy(n_zr[1], params.alpha).sum() + xlogy(n_zr[0], 1.0 - params.alpha).sum()
    ll += xlogy(n_ur.T, params.pi).sum()
    active = list(params.active)
    d = params.delta[:, active]
    ll += xlogy(n_zu[:, active, 1], d).sum() + xlogy(n_zu[:, active, 0], 1.0 - d).sum()
    # xlogy(n, 0) is -inf for n > 0, which is the wanted sentinel.
    return float(ll)


@dataclass(frozen=True)
class PsaceSummary:
    """Per-stratum effects ACE_u and per-trial effects ACE^S_r, ACE^Y_r."""

    ace: np.ndarray  # (4,), NaN on the excluded stratum under monotonicity
    ace_s: np.ndarray  # (R,)
    ace_y: np.ndarray  # (R,)

    def __post_init__(self):
        object.__setattr__(self, "ace", _freeze(np.asarray(self.ace, dtype=float)))
        object.__setattr__(self, "ace_s", _freeze(np.asarray(self.ace_s, dtype=float)))
        object.__setattr__(self, "ace_y", _freeze(np.asarray(self.ace_y, dtype=float)))


def psace_summary(params: ParameterSet) -> PsaceSummary:
    """ACE_u = delta_1u - delta_0u, ACE^S_r = pi_ssbar - pi_sbars, ACE^Y_r = sum_u ACE_u pi_ur."""
    ace = params.delta[1] - params.delta[0]
    ace_s = params.pi[:, Stratum.SSBAR] - params.pi[:, Stratum.SBARS]
    active = list(params.active)
    ace_y = params.pi[:, active] @ ace[active]
    return PsaceSummary(ace=ace, ace_s=ace_s, ace_y=ace_y)
