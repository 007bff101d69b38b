"""Q-function, the closed-form false-detection expression and Monte Carlo aggregates."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np
from scipy import special, stats
from statsmodels.stats.proportion import proportion_confint

from fusion.detection import LocalPerformance, vote_log_ratios
from models import (
    CurveLabel,
    Hypothesis,
    MetricsError,
    RocPoint,
    ScenarioConfig,
    SnrSweepRow,
    TrialRecord,
    split_variant,
)

logger = logging.getLogger(__name__)


def q_function(x):
    """Standard normal tail probability, Q(x) = erfc(x / sqrt 2) / 2."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def analytic_pf0(
    r: np.ndarray,
    decisions: np.ndarray,
    gains: np.ndarray,
    antennas: int,
    power: float,
    noise_variance: float,
    p_false_alarm: float,
) -> float:
    """Closed-form false detection probability, evaluated per sensor and averaged.

    Q((r_m - sqrt(N d_m rho) x_m / Sigma_e) / sqrt((M (1 - P_F) + Sigma_e^2) / 2)).
    """
    r = np.asarray(r, dtype=float)
    M = r.size
    denom_sq = 0.5 * (M * (1.0 - p_false_alarm) + noise_variance)
    if denom_sq <= 0 or noise_variance <= 0:
        raise MetricsError(
            f"non-positive normaliser: M(1-P_F)={M * (1.0 - p_false_alarm)}, Sigma_e^2={noise_variance}"
        )
    sigma_e = math.sqrt(noise_variance)
    centre = np.sqrt(antennas * np.asarray(gains, dtype=float) * power) * np.asarray(decisions) / sigma_e
    return float(np.mean(q_function((r - centre) / math.sqrt(denom_sq))))


def wilson_half_width(successes, trials):
    lo, hi = proportion_confint(successes, trials, alpha=0.05, method="wilson")
    return (np.asarray(hi) - np.asarray(lo)) / 2.0


def threshold_grid(sensors: int, points: int = 201) -> np.ndarray:
    """Uniform grid over [-M ln10 - 1, M ln10 + 1]."""
    span = sensors * math.log(10.0) + 1.0
    return np.linspace(-span, span, points)


def _exceed_counts(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    ordered = np.sort(values)
    return len(ordered) - np.searchsorted(ordered, thresholds, side="right")


def estimate_roc(
    llr_h1: Sequence[float],
    llr_h0: Sequence[float],
    thresholds: Iterable[float],
    label: CurveLabel,
) -> list[RocPoint]:
    """Empirical (Pd0, Pf0) at each threshold, with Wilson 95% half-widths."""
    h1 = np.asarray(llr_h1, dtype=float)
    h0 = np.asarray(llr_h0, dtype=float)
    if h1.size == 0 or h0.size == 0:
        raise MetricsError(
            f"ROC needs both hypotheses populated (H1: {h1.size}, H0: {h0.size}) for {label.scaling}/{label.detector}"
        )
    t = np.asarray(list(thresholds), dtype=float)
    det = _exceed_counts(h1, t)
    fa = _exceed_counts(h0, t)
    det_ci = wilson_half_width(det, h1.size)
    fa_ci = wilson_half_width(fa, h0.size)
    return [
        RocPoint(
            **label.model_dump(),
            threshold=float(t[i]),
            pd0=float(det[i] / h1.size),
            pf0=float(fa[i] / h0.size),
            pd0_ci=float(det_ci[i]),
            pf0_ci=float(fa_ci[i]),
            trials_h1=int(h1.size),
            trials_h0=int(h0.size),
        )
        for i in range(len(t))
    ]


def estimate_pfd_vs_snr(records: Sequence[TrialRecord], config: ScenarioConfig) -> list[SnrSweepRow]:
    """Error probability at threshold 0 per (variant, noise kind, SNR).

    Misses and false alarms are averaged with equal priors.
    """
    if not records:
        raise MetricsError("no trial records to aggregate")
    counts: dict[tuple[str, str, float], list[int]] = defaultdict(lambda: [0, 0, 0, 0])
    for rec in records:
        for key, decision in rec.decision.items():
            c = counts[(key, rec.noise_kind.value, rec.snr_db)]
            wrong = int(decision != rec.hypothesis.value)
            if rec.hypothesis is Hypothesis.H1:
                c[0] += wrong
                c[1] += 1
            else:
                c[2] += wrong
                c[3] += 1

    rows = []
    for (key, noise_kind, snr_db), (miss, n1, false, n0) in sorted(counts.items()):
        rates = [k / n for k, n in ((miss, n1), (false, n0)) if n]
        pfd = float(np.mean(rates))
        errors, trials = miss + false, n1 + n0
        scaling, detector = split_variant(key)
        rows.append(
            SnrSweepRow(
                scaling=scaling,
                detector=detector,
                noise_kind=noise_kind,
                p_imp=config.p_imp,
                snr_db=snr_db,
                pfd=pfd,
                pfd_ci=float(wilson_half_width(errors, trials)),
                trials=trials,
                errors=errors,
            )
        )
    return rows


def _best_pd_at(points: Sequence[RocPoint], pf: float, slack: float) -> tuple[float, float]:
    eligible = [p for p in points if p.pf0 <= pf + slack]
    if not eligible:
        return 0.0, 0.0
    best = max(eligible, key=lambda p: p.pd0)
    return best.pd0, best.pd0_ci


def roc_dominates(better: Sequence[RocPoint], worse: Sequence[RocPoint]) -> bool:
    """True if ``better`` reaches at least ``worse``'s Pd0 at each of its Pf0 values, within CIs."""
    for p in worse:
        pd, ci = _best_pd_at(better, p.pf0, p.pf0_ci)
        if pd + ci + p.pd0_ci < p.pd0:
            return False
    return True


def fusion_error_floor(local: LocalPerformance, sensors: int) -> float:
    """Error probability of fusing error-free local decisions at threshold 0.

    Lambda only depends on the number k of +1 votes, so the 2^M decision
    patterns collapse onto binomial counts.
    """
    k = np.arange(sensors + 1)
    pos, neg = vote_log_ratios(local)
    llr = k * pos + (sensors - k) * neg
    says_h1 = llr > 0
    miss = float(np.sum(stats.binom.pmf(k, sensors, local.p_detect)[~says_h1]))
    false = float(np.sum(stats.binom.pmf(k, sensors, local.p_false_alarm)[says_h1]))
    return 0.5 * (miss + false)
