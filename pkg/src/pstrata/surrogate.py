"""Surrogate-validity evaluation and endpoint-effect prediction for new trials.

A valid surrogate should show no endpoint effect in the strata the treatment
does not move (causal necessity, strata ss and sbarsbar) and a nonzero
effect in the strata it does move (causal sufficiency, ssbar and sbars).
Here those are operationalized through posterior credible intervals:
necessity holds when the interval covers zero, sufficiency when it excludes
zero.

For a new trial where only the surrogate effect is observed, the endpoint
effect is the product ACE^S * ACE_ssbar under monotonicity, and otherwise
bracketed by closed-form bounds whose direction flips with the sign of
ACE_ssbar + ACE_sbars.  That same sum condition is what rules out the
surrogate paradox (a positive surrogate effect coexisting with a negative
endpoint effect) when monotonicity cannot be assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AbsentStratumError, ParameterError
from .gibbs import PosteriorDraws
from .model import ParameterSet, Stratum, psace_summary

__all__ = [
    "SurrogateVerdict",
    "ParadoxReport",
    "stratum_ace",
    "evaluate_surrogate",
    "predict_ace_y_monotone",
    "predict_ace_y_bounds",
    "sign_conclusion",
    "sign_conclusion_posterior",
    "paradox_check",
]

_NECESSITY_STRATA = (Stratum.SS, Stratum.SBARSBAR)
_SUFFICIENCY_STRATA = (Stratum.SSBAR, Stratum.SBARS)


@dataclass(frozen=True)
class SurrogateVerdict:
    """Interval-based necessity/sufficiency calls from posterior draws."""

    necessity: dict  # stratum label -> interval covers zero
    sufficiency: dict  # stratum label -> interval excludes zero
    sum_condition: float | None  # P(ACE_ssbar + ACE_sbars >= 0); None under monotonicity
    intervals: dict  # stratum label -> (lo, hi)
    medians: dict
    level: float


@dataclass(frozen=True)
class ParadoxReport:
    ace_s: float
    ace_y: float
    paradox: bool


def stratum_ace(draws: PosteriorDraws, stratum: Stratum) -> np.ndarray:
    """Pooled per-draw ACE for one stratum; absent strata raise."""
    if stratum not in draws.active:
        raise AbsentStratumError(
            f"stratum {stratum.label} is excluded by the monotone model"
        )
    return draws.pooled(draws.ace[:, :, stratum])


def evaluate_surrogate(draws: PosteriorDraws, level: float = 0.95) -> SurrogateVerdict:
    """Necessity/sufficiency verdicts from central credible intervals.

    Under the monotone model the sbars entries are simply absent (and the
    sum condition undefined); asking for them explicitly via stratum_ace
    raises AbsentStratumError.
    """
    if not 0.0 < level < 1.0:
        raise ParameterError("level must lie in (0, 1)")
    tail = (1.0 - level) / 2.0
    necessity = {}
    sufficiency = {}
    intervals = {}
    medians = {}
    for u in draws.active:
        values = stratum_ace(draws, u)
        lo, hi = np.quantile(values, [tail, 1.0 - tail])
        intervals[u.label] = (float(lo), float(hi))
        medians[u.label] = float(np.median(values))
        if u in _NECESSITY_STRATA:
            necessity[u.label] = bool(lo <= 0.0 <= hi)
        else:
            sufficiency[u.label] = bool(lo > 0.0 or hi < 0.0)
    if draws.monotonicity:
        sum_condition = None
    else:
        total = stratum_ace(draws, Stratum.SSBAR) + stratum_ace(draws, Stratum.SBARS)
        sum_condition = float(np.mean(total >= 0.0))
    return SurrogateVerdict(
        necessity=necessity,
        sufficiency=sufficiency,
        sum_condition=sum_condition,
        intervals=intervals,
        medians=medians,
        level=level,
    )


def predict_ace_y_monotone(ace_s_new: float, ace_ssbar: float) -> float:
    """Endpoint effect in a new monotone trial: ACE^S times ACE_ssbar."""
    if not 0.0 <= ace_s_new <= 1.0:
        raise ParameterError("a monotone surrogate effect is a proportion in [0, 1]")
    return ace_s_new * ace_ssbar


def predict_ace_y_bounds(ace_s_new: float, ace_ssbar: float, ace_sbars: float):
    """Bounds on the new-trial endpoint effect without monotonicity.

    Requires a positive surrogate effect; for a negative one, relabel the
    surrogate as 1 - S first.  The interval is

        [ACE^S * ACE_ssbar,
         (ACE_ssbar + ACE_sbars)/2 + ACE^S * (ACE_ssbar - ACE_sbars)/2]

    when ACE_ssbar + ACE_sbars >= 0, and the reversed pair otherwise.
    """
    if not 0.0 < ace_s_new <= 1.0:
        raise ParameterError(
            "need a surrogate effect in (0, 1]; relabel the surrogate as 1-S if it is negative"
        )
    at_product = ace_s_new * ace_ssbar
    at_corner = (ace_ssbar + ace_sbars) / 2.0 + ace_s_new * (ace_ssbar - ace_sbars) / 2.0
    if ace_ssbar + ace_sbars >= 0.0:
        return at_product, at_corner
    return at_corner, at_product


def sign_conclusion(ace_s_sign: str, ace_ssbar: float, ace_sbars, monotonicity: bool) -> str:
    """Sign of the new-trial endpoint effect, assuming causal necessity.

    ``ace_s_sign`` is "positive" or "zero".  Returns "positive", "zero" or
    "indeterminate"; without monotonicity a positive conclusion additionally
    needs ACE_ssbar + ACE_sbars >= 0.
    """
    if ace_s_sign not in ("positive", "zero"):
        raise ParameterError('ace_s_sign must be "positive" or "zero"')
    if monotonicity:
        if ace_s_sign == "zero":
            return "zero"
        return "positive" if ace_ssbar > 0.0 else "indeterminate"
    if ace_s_sign == "positive" and ace_ssbar > 0.0 and ace_ssbar + ace_sbars >= 0.0:
        return "positive"
    return "indeterminate"


def sign_conclusion_posterior(draws: PosteriorDraws, ace_s_sign: str) -> dict:
    """Posterior probabilities of each sign verdict, applying the rule per draw."""
    ssbar = stratum_ace(draws, Stratum.SSBAR)
    if draws.monotonicity:
        verdicts = [
            sign_conclusion(ace_s_sign, float(v), None, True) for v in ssbar
        ]
    else:
        sbars = stratum_ace(draws, Stratum.SBARS)
        verdicts = [
            sign_conclusion(ace_s_sign, float(a), float(b), False)
            for a, b in zip(ssbar, sbars)
        ]
    out = {"positive": 0.0, "zero": 0.0, "indeterminate": 0.0}
    for v in verdicts:
        out[v] += 1.0
    return {k: v / len(verdicts) for k, v in out.items()}


def paradox_check(params: ParameterSet, r: int) -> ParadoxReport:
    """Does trial r of this parameter set exhibit the surrogate paradox?

    The paradox is a positive surrogate effect with a negative endpoint
    effect; causal necessity is deliberately not assumed here.
    """
    if not 0 <= r < params.n_trials:
        raise ParameterError(f"trial index {r} out of range")
    summary = psace_summary(params)
    ace_s = float(summary.ace_s[r])
    ace_y = float(summary.ace_y[r])
    return ParadoxReport(ace_s=ace_s, ace_y=ace_y, paradox=ace_s > 0.0 and ace_y < 0.0)
