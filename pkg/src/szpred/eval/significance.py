"""Chance-level alarm probability and the random-predictor p-value."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ValidationError


def chance_alarm_probability(fpr: float, sop_hours: float) -> float:
    """Probability that a Poisson alarm process of rate ``fpr`` (/h) fires in one SOP.

    ``1 - exp(-fpr * sop_hours)``.
    """
    if not fpr >= 0:
        raise ValidationError(f"fpr must be non-negative, got {fpr}")
    if not sop_hours > 0:
        raise ValidationError(f"sop must be positive, got {sop_hours} h")
    if math.isinf(fpr):
        return 1.0
    return -math.expm1(-fpr * sop_hours)


def _log_binom(n: int, j: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)


def random_predictor_pvalue(k: int, K: int, P: float) -> float:
    """Probability of predicting at least ``k`` of ``K`` seizures by chance.

    Upper binomial tail ``sum_{j>=k} C(K, j) P^j (1-P)^(K-j)``, accumulated
    in log space.
    """
    if int(k) != k or int(K) != K:
        raise ValidationError("k and K must be integers")
    k, K = int(k), int(K)
    if K < 0 or k < 0:
        raise ValidationError(f"k and K must be non-negative, got k={k}, K={K}")
    if k > K:
        raise ValidationError(f"k={k} predicted seizures exceeds K={K}")
    if not 0 <= P <= 1:
        raise ValidationError(f"P must be in [0, 1], got {P}")
    if k == 0 or P == 1:
        return 1.0
    if P == 0:
        return 0.0
    lp, lq = math.log(P), math.log1p(-P)
    terms = [_log_binom(K, j) + j * lp + (K - j) * lq for j in range(k, K + 1)]
    top = max(terms)
    total = math.exp(top) * math.fsum(math.exp(t - top) for t in terms)
    return min(max(total, 0.0), 1.0)


def predicted_count(sensitivity_pct: float, K: int) -> int:
    """Seizure count behind a rounded sensitivity percentage."""
    return int(round(sensitivity_pct / 100.0 * K))


def worst_case_pvalue(predicted, fprs, K: int, sop_hours: float) -> float:
    """p-value with the minimum predicted count and maximum FPR across repeats."""
    k = int(min(predicted))
    fpr = float(max(fprs))
    return random_predictor_pvalue(k, K, chance_alarm_probability(fpr, sop_hours))


def _window_hits(fpr, sop_hours, trials, rng, lead_hours):
    """Per trial: does a Poisson alarm process hit ``[lead, lead + sop)``?"""
    if fpr == 0:
        return np.zeros(trials, dtype=bool)
    horizon = lead_hours + sop_hours
    mean = fpr * horizon
    n_gaps = int(np.ceil(mean + 10 * np.sqrt(mean + 1) + 10))
    arrivals = np.cumsum(rng.exponential(1.0 / fpr, size=(trials, n_gaps)), axis=1)
    if np.any(arrivals[:, -1] < horizon):
        raise RuntimeError("simulated too few alarm gaps to cover the horizon")
    return np.any((arrivals >= lead_hours) & (arrivals < horizon), axis=1)


def simulate_alarm_probability(fpr: float, sop_hours: float, trials: int, rng,
                               lead_hours: float = 2.0) -> float:
    """Monte-Carlo fraction of trials with at least one alarm inside an SOP.

    Alarms are a homogeneous Poisson process (exponential gaps) started
    ``lead_hours`` before the SOP window opens.
    """
    return float(_window_hits(fpr, sop_hours, trials, rng, lead_hours).mean())


def simulate_pvalue(k: int, K: int, fpr: float, sop_hours: float, trials: int, rng,
                    lead_hours: float = 2.0) -> float:
    """Monte-Carlo fraction of trials where chance alarms hit at least ``k`` of ``K`` SOPs."""
    hits = np.zeros(trials, dtype=np.int64)
    for _ in range(K):
        hits += _window_hits(fpr, sop_hours, trials, rng, lead_hours)
    return float(np.mean(hits >= k))
