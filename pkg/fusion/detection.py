"""Massive-MIMO receivers and log-likelihood-ratio decision fusion."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from channel.deployment import ChannelRealization
from models import DegenerateChannelError, DetectorKind, FusionError, Hypothesis

logger = logging.getLogger(__name__)

LLR_CLAMP = 50.0
DEGENERATE_GAIN = 1e-12


@dataclass(frozen=True)
class LocalPerformance:
    p_detect: float
    p_false_alarm: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_false_alarm <= self.p_detect <= 1.0:
            raise FusionError(
                f"need 0 <= P_F <= P_D <= 1, got P_D={self.p_detect}, P_F={self.p_false_alarm}"
            )


@dataclass(frozen=True)
class FusionStatistic:
    detector: DetectorKind
    r: np.ndarray
    gains: np.ndarray  # d_m


@dataclass(frozen=True)
class DetectorParams:
    detector: DetectorKind
    gains: np.ndarray
    antennas: int
    power: float
    noise_variance: float  # Sigma_e^2 of the complex noise


def _gram_diagonal(a: np.ndarray) -> np.ndarray:
    d = np.real(np.einsum("nm,nm->m", a.conj(), a)) / a.shape[0]
    if np.any(d < DEGENERATE_GAIN):
        raise DegenerateChannelError(f"channel column with gain {d.min():.3e} below {DEGENERATE_GAIN}")
    return d


def detect(
    recovered, chan: ChannelRealization, detector: DetectorKind, gain: float = 1.0
) -> FusionStatistic:
    """Per-sensor statistics r_m from the recovered slots Y_hat (N x M).

    MF: Re{sigma_hat g_m^H Y_hat[:, m]}.
    ZF: Re{[D^-1 (sigma_hat G)^H Y_hat]_mm} with D = (sigma_hat G)^H (sigma_hat G) / N,
    reporting d_m = 1 / [D^-1]_mm as the effective gain.
    """
    y = np.atleast_2d(getattr(recovered, "samples", recovered))
    a = gain * chan.gains
    N, M = a.shape
    if y.shape != (N, M):
        raise FusionError(f"recovered slots {y.shape} do not match channel {a.shape}")
    d = _gram_diagonal(a)

    if detector in (DetectorKind.MF, DetectorKind.MRC):
        r = np.real(np.einsum("nm,nm->m", a.conj(), y))
        return FusionStatistic(detector=detector, r=r, gains=d)

    if detector is DetectorKind.ZF:
        if N < M:
            raise FusionError(f"zero forcing needs N >= M, got N={N}, M={M}")
        gram = a.conj().T @ a / N
        try:
            inv = np.linalg.inv(gram)
        except np.linalg.LinAlgError as e:
            raise DegenerateChannelError(f"singular channel Gram matrix: {e}") from e
        inv_diag = np.real(np.diag(inv))
        if np.any(inv_diag <= 0) or not np.all(np.isfinite(inv_diag)):
            raise DegenerateChannelError("ill-conditioned channel Gram matrix")
        r = np.real(np.diag(inv @ (a.conj().T @ y)))
        return FusionStatistic(detector=detector, r=r, gains=1.0 / inv_diag)

    raise FusionError(f"unknown detector {detector!r}")


def benchmark_mrc(received: np.ndarray, chan: ChannelRealization) -> FusionStatistic:
    """No-WPDM baseline: all sensors share one observation y, r = Re{G^H y}."""
    y = np.asarray(received).reshape(-1)
    a = chan.gains
    if y.shape[0] != a.shape[0]:
        raise FusionError(f"observation of length {y.shape[0]} for {a.shape[0]} antennas")
    d = _gram_diagonal(a)
    r = np.real(a.conj().T @ y)
    return FusionStatistic(detector=DetectorKind.MRC, r=r, gains=d)


def _moments(x: int, params: DetectorParams) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(params.gains, dtype=float)
    if np.any(d <= 0):
        raise FusionError("detector gains must be positive")
    if params.noise_variance <= 0:
        raise FusionError(f"noise variance must be positive, got {params.noise_variance}")
    N = params.antennas
    if params.detector is DetectorKind.ZF:
        mean = np.full_like(d, N * np.sqrt(params.power) * x)
        var = N * params.noise_variance / (2.0 * d)
    else:
        mean = N * d * np.sqrt(params.power) * x
        var = N * d * params.noise_variance / 2.0
    return mean, var


def log_conditional_pdf(r: np.ndarray, x: int, params: DetectorParams) -> np.ndarray:
    """log psi(r_m | x_m) under the Gaussian approximation of the receiver output."""
    mean, var = _moments(x, params)
    return stats.norm.logpdf(np.asarray(r, dtype=float), loc=mean, scale=np.sqrt(var))


def conditional_pdf(r: np.ndarray, x: int, params: DetectorParams) -> np.ndarray:
    return np.exp(log_conditional_pdf(r, x, params))


def llr_terms(r: np.ndarray, local: LocalPerformance, params: DetectorParams) -> np.ndarray:
    """Per-sensor log-likelihood ratios, each clamped to +-LLR_CLAMP."""
    log_pos = log_conditional_pdf(r, 1, params)
    log_neg = log_conditional_pdf(r, -1, params)
    with np.errstate(divide="ignore"):
        log_pd, log_md = np.log(local.p_detect), np.log1p(-local.p_detect)
        log_pf, log_nf = np.log(local.p_false_alarm), np.log1p(-local.p_false_alarm)
    num = np.logaddexp(log_pos + log_pd, log_neg + log_md)
    den = np.logaddexp(log_pos + log_pf, log_neg + log_nf)
    with np.errstate(invalid="ignore"):
        terms = num - den
    # both branches -inf only when P_D = P_F in {0, 1}
    terms = np.where(np.isnan(terms), 0.0, terms)
    return np.clip(terms, -LLR_CLAMP, LLR_CLAMP)


def llr_fusion(r: np.ndarray, local: LocalPerformance, params: DetectorParams) -> float:
    """Global statistic Lambda: the sum of independent per-sensor LLRs."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise FusionError("llr fusion needs a non-empty statistic vector")
    return float(np.sum(llr_terms(r, local, params)))


def global_decision(llr: float, threshold: float = 0.0) -> Hypothesis:
    """H1 when Lambda is strictly above the threshold; ties go to H0."""
    if not np.isfinite(threshold):
        raise FusionError(f"threshold must be finite, got {threshold}")
    return Hypothesis.H1 if llr > threshold else Hypothesis.H0


def vote_log_ratios(local: LocalPerformance) -> tuple[float, float]:
    """Per-vote LLRs (for a +1 vote, for a -1 vote), clamped like llr_terms.

    A certain sensor (P_F = 0 or P_D = 1) saturates at +-LLR_CLAMP instead of
    going infinite.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log(local.p_detect) - np.log(local.p_false_alarm)
        neg = np.log1p(-local.p_detect) - np.log1p(-local.p_false_alarm)
    ratios = np.nan_to_num(np.array([pos, neg]), nan=0.0, posinf=LLR_CLAMP, neginf=-LLR_CLAMP)
    pos, neg = np.clip(ratios, -LLR_CLAMP, LLR_CLAMP)
    return float(pos), float(neg)


def ideal_llr(decisions: np.ndarray, local: LocalPerformance) -> float:
    """Lambda when every local decision reaches the fusion centre intact."""
    x = np.asarray(decisions)
    pos, neg = vote_log_ratios(local)
    return float(np.sum(np.where(x > 0, pos, neg)))
