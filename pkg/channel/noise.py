"""Impulsive noise: Middleton Class A, Bernoulli-Gaussian and plain Gaussian."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from models import NoiseCalibration, NoiseKind, NoiseModelSpec

logger = logging.getLogger(__name__)

CLASS_A_TERMS = 5
CALIBRATION_CHUNK = 1_000_000


@dataclass(frozen=True)
class NoiseRealization:
    samples: np.ndarray
    impulsive: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.samples.shape


def combined_variance(spec: NoiseModelSpec) -> float:
    """Closed-form aggregate variance Sigma_e^2 used by the receivers.

    Class A: Sigma_w^2 + sum_{gamma=1..5} Sigma_I^2 / (gamma A)
    Bernoulli-Gaussian: Sigma_w^2 + M Sigma_I^2 / rho
    """
    sw2 = spec.gaussian_variance
    si2 = spec.impulsive_variance
    if spec.kind is NoiseKind.CLASS_A:
        return sw2 + sum(si2 / (gamma * spec.impulse_index) for gamma in range(1, CLASS_A_TERMS + 1))
    if spec.kind is NoiseKind.BERNOULLI_GAUSSIAN:
        return sw2 + spec.sensors * si2 / spec.bernoulli_p
    return sw2


def expected_sqrt_kappa(impulse_index: float) -> float:
    """E[sqrt(kappa)] for kappa ~ Poisson(A) conditioned on kappa >= 1."""
    upper = int(stats.poisson.isf(1e-16, impulse_index)) + 10
    k = np.arange(1, upper + 1)
    pmf = stats.poisson.pmf(k, impulse_index)
    return float(np.sum(np.sqrt(k) * pmf) / (1.0 - stats.poisson.pmf(0, impulse_index)))


def mixture_variance(spec: NoiseModelSpec) -> float:
    """Per-sample variance E|e|^2 of the simulated mixture."""
    sw2 = spec.gaussian_variance
    si2 = spec.impulsive_variance
    if spec.kind is NoiseKind.CLASS_A:
        impulsive = expected_sqrt_kappa(spec.impulse_index) * si2 / spec.impulse_index
    elif spec.kind is NoiseKind.BERNOULLI_GAUSSIAN:
        impulsive = spec.bernoulli_p * spec.occurrence * si2
    else:
        return sw2
    return (1.0 - spec.p_imp) * sw2 + spec.p_imp * impulsive


def sample_noise(
    spec: NoiseModelSpec, shape: tuple[int, ...], rng: np.random.Generator
) -> NoiseRealization:
    """Circular complex noise; each sample is impulsive with probability p_imp.

    Class A impulses draw kappa from a zero-truncated Poisson(A) by inverse
    CDF and use variance sqrt(kappa) Sigma_I^2 / A. Bernoulli-Gaussian
    impulses fire with probability rho and variance occurrence * Sigma_I^2.
    """
    shape = tuple(shape)
    variance = np.full(shape, spec.gaussian_variance)
    if spec.kind is NoiseKind.GAUSSIAN:
        impulsive = np.zeros(shape, dtype=bool)
    else:
        impulsive = rng.random(shape) < spec.p_imp
        count = int(impulsive.sum())
        if spec.kind is NoiseKind.CLASS_A:
            p0 = stats.poisson.pmf(0, spec.impulse_index)
            q = np.minimum(p0 + rng.random(count) * (1.0 - p0), np.nextafter(1.0, 0.0))
            kappa = np.maximum(stats.poisson.ppf(q, spec.impulse_index), 1.0)
            variance[impulsive] = np.sqrt(kappa) * spec.impulsive_variance / spec.impulse_index
        else:
            gate = rng.random(count) < spec.bernoulli_p
            variance[impulsive] = np.where(gate, spec.occurrence * spec.impulsive_variance, 0.0)
    scale = np.sqrt(variance / 2.0)
    samples = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return NoiseRealization(samples=samples, impulsive=impulsive)


def calibrate_noise(
    spec: NoiseModelSpec,
    samples: int,
    rng: np.random.Generator,
    tolerance: float = 0.05,
) -> NoiseCalibration:
    """Empirical variance and excess kurtosis of ``samples`` noise draws."""
    if samples < 2:
        raise ValueError("calibration needs at least two samples")
    real = np.empty(samples)
    power = 0.0
    impulsive = 0
    done = 0
    while done < samples:
        n = min(CALIBRATION_CHUNK, samples - done)
        draw = sample_noise(spec, (n,), rng)
        real[done : done + n] = draw.samples.real
        power += float(np.sum(np.abs(draw.samples) ** 2))
        impulsive += int(draw.impulsive.sum())
        done += n

    expected = mixture_variance(spec)
    empirical = power / samples
    rel = (empirical - expected) / expected if expected > 0 else empirical
    kurtosis = float(stats.kurtosis(real, fisher=True))
    ok = abs(rel) <= tolerance
    if spec.kind is NoiseKind.GAUSSIAN or spec.p_imp == 0.0:
        ok = ok and abs(kurtosis) <= tolerance
    if not ok:
        logger.warning(
            f"{spec.kind.value} noise off calibration: variance {empirical:.4f} vs {expected:.4f}, "
            f"kurtosis {kurtosis:.4f}"
        )
    return NoiseCalibration(
        kind=spec.kind,
        p_imp=spec.p_imp,
        samples=samples,
        expected_variance=expected,
        empirical_variance=empirical,
        relative_error=rel,
        excess_kurtosis=kurtosis,
        impulsive_fraction=impulsive / samples,
        tolerance=tolerance,
        within_tolerance=ok,
    )
