"""Prototype filter design, the wavelet-packet tree and root scaling functions.

Filters are designed in discrete time (one tap per symbol interval T0);
everything continuous-time lives in :class:`ScalingFunction`.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from models import FilterDesignError, FilterDiagnostics, ScalingKind, TreeError

logger = logging.getLogger(__name__)

TOL_ORTH = 0.05
TOL_PROTOTYPE = 0.075
SHANNON_EXTENT = 16.0
MAX_GRID_STEP = 1.0 / 8.0


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


def regularity(vanishing_moments: int, bandwidth: float) -> int:
    """K0 = 2K - 1 - ceil(2 log2 B)."""
    # rounded so that B = sqrt(2) lands on an exact integer
    return 2 * vanishing_moments - 1 - math.ceil(round(2.0 * math.log2(bandwidth), 9))


def lag_correlation(a: np.ndarray, b: np.ndarray, lag: int) -> float:
    """sum_q a[q + lag] * b[q]."""
    full = signal.correlate(a, b, mode="full", method="direct")
    idx = lag + len(b) - 1
    if idx < 0 or idx >= len(full):
        return 0.0
    return float(full[idx])


@dataclass(frozen=True)
class PrototypeFilterPair:
    h: np.ndarray
    g: np.ndarray
    vanishing_moments: int
    bandwidth: float
    delay: float

    @property
    def length(self) -> int:
        return len(self.h)

    @property
    def regularity(self) -> int:
        return regularity(self.vanishing_moments, self.bandwidth)

    @property
    def residuals(self) -> np.ndarray:
        """Self-correlation of h at the non-zero even shifts 2, 4, ..."""
        full = signal.correlate(self.h, self.h, mode="full", method="direct")
        centre = self.length - 1
        shifts = range(2, self.length, 2)
        return np.array([full[centre + s] for s in shifts], dtype=float)

    @property
    def orthonormality_residual(self) -> float:
        res = self.residuals
        return float(np.max(np.abs(res))) if res.size else 0.0


def design_prototype_filters(
    filter_length: int, vanishing_moments: int, bandwidth: float
) -> PrototypeFilterPair:
    """Sampled-sinc low-pass prototype h and its alternating-flip high-pass g.

    h[q] = sinc(q - D) with D = (Q - 1) / (4B), normalised to unit energy;
    g[q] = (-1)^q h[Q - 1 - q].
    """
    Q, K, B = filter_length, vanishing_moments, bandwidth
    if not isinstance(Q, (int, np.integer)) or Q < 2 or Q % 2:
        raise FilterDesignError(f"filter length must be a positive even integer, got {Q}")
    if not 1 <= K <= Q // 2:
        raise FilterDesignError(f"vanishing moments must lie in [1, {Q // 2}], got {K}")
    if not B > 0:
        raise FilterDesignError(f"bandwidth must be positive, got {B}")
    k0 = regularity(K, B)
    if k0 < 1:
        raise FilterDesignError(
            f"regularity K0 = 2K - 1 - ceil(2 log2 B) = {k0} for K={K}, B={B}; need K0 >= 1"
        )

    delay = (Q - 1) / (4.0 * B)
    q = np.arange(Q)
    h = np.sinc(q - delay)
    energy = float(np.sum(h**2))
    if energy <= 0.0:
        raise FilterDesignError("prototype filter has zero energy")
    h = h / math.sqrt(energy)
    g = ((-1.0) ** q) * h[::-1]

    pair = PrototypeFilterPair(
        h=_frozen(h), g=_frozen(g), vanishing_moments=K, bandwidth=B, delay=delay
    )
    residual = pair.orthonormality_residual
    if residual > TOL_PROTOTYPE:
        logger.warning(
            f"prototype orthonormality residual {residual:.4f} exceeds {TOL_PROTOTYPE}"
        )
    logger.debug(f"designed Q={Q} K={K} B={B:.4f}: D={delay:.5f}, residual={residual:.4f}")
    return pair


def _upsample(taps: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return taps
    out = np.zeros((len(taps) - 1) * factor + 1)
    out[::factor] = taps
    return out


@dataclass(frozen=True)
class WaveletPacketTree:
    pair: PrototypeFilterPair
    groups: int
    levels: int
    leaf_filters: tuple[np.ndarray, ...]

    @property
    def leaf_shift(self) -> int:
        """Sensor spacing inside a group, in symbol intervals (2^L)."""
        return 2**self.levels

    def slot_durations(self, symbol_interval: float) -> tuple[float, ...]:
        return tuple((2**level) * symbol_interval for level in range(1, self.levels + 1))

    def leaf(self, group: int) -> np.ndarray:
        if not 0 <= group < self.groups:
            raise TreeError(f"group {group} outside [0, {self.groups})")
        return self.leaf_filters[group]


def build_packet_tree(pair: PrototypeFilterPair, groups: int) -> WaveletPacketTree:
    """Full binary packet tree with one leaf per group.

    Leaf z follows the binary expansion of z (most significant bit first):
    stage i uses h for a 0 bit and g for a 1 bit, upsampled by 2^(i-1).
    Unused leaves pad the tree when Z is not a power of two.
    """
    if groups < 2:
        raise TreeError(f"need at least two groups, got {groups}")
    levels = (groups - 1).bit_length()
    leaves = []
    for z in range(groups):
        bits = format(z, f"0{levels}b")
        taps = np.ones(1)
        for stage, bit in enumerate(bits):
            stage_filter = pair.h if bit == "0" else pair.g
            taps = np.convolve(taps, _upsample(stage_filter, 2**stage))
        leaves.append(_frozen(taps))
    return WaveletPacketTree(pair=pair, groups=groups, levels=levels, leaf_filters=tuple(leaves))


def leaf_cross_correlation_max(tree: WaveletPacketTree, max_multiple: int = 4) -> float:
    """Largest |sum_q f_a[q + j 2^L] f_b[q]| over distinct leaves and |j| <= max_multiple."""
    shift = tree.leaf_shift
    worst = 0.0
    for a in range(tree.groups):
        for b in range(tree.groups):
            if a == b:
                continue
            fa, fb = tree.leaf_filters[a], tree.leaf_filters[b]
            full = signal.correlate(fa, fb, mode="full", method="direct")
            for j in range(-max_multiple, max_multiple + 1):
                idx = j * shift + len(fb) - 1
                if 0 <= idx < len(full):
                    worst = max(worst, abs(float(full[idx])))
    return worst


def filter_diagnostics(
    pair: PrototypeFilterPair,
    tree: WaveletPacketTree,
    tol_orth: float = TOL_ORTH,
    tol_prototype: float = TOL_PROTOTYPE,
) -> FilterDiagnostics:
    prototype = pair.orthonormality_residual
    leaves = leaf_cross_correlation_max(tree)
    ok = prototype <= tol_prototype and leaves <= tol_orth
    if not ok:
        logger.warning(
            f"filter residuals out of tolerance: prototype={prototype:.4f} (<= {tol_prototype}), "
            f"leaves={leaves:.4f} (<= {tol_orth})"
        )
    return FilterDiagnostics(
        filter_length=pair.length,
        vanishing_moments=pair.vanishing_moments,
        bandwidth=pair.bandwidth,
        delay=pair.delay,
        regularity=pair.regularity,
        groups=tree.groups,
        levels=tree.levels,
        prototype_residuals=[float(r) for r in pair.residuals],
        prototype_residual=prototype,
        leaf_cross_correlation_max=leaves,
        tol_orth=tol_orth,
        tol_prototype=tol_prototype,
        within_tolerance=ok,
    )


def scaling_values(kind: ScalingKind, t: np.ndarray, extent: float = SHANNON_EXTENT) -> np.ndarray:
    """phi(t) for the three root scaling functions, t in symbol intervals."""
    t = np.asarray(t, dtype=float)
    if kind is ScalingKind.HAAR:
        return ((t >= 0.0) & (t < 1.0)).astype(float)
    if kind is ScalingKind.SHANNON:
        return np.where(np.abs(t) <= extent, np.sinc(t), 0.0)
    if kind is ScalingKind.SPLINE:
        return np.clip(1.0 - np.abs(t), 0.0, None)
    raise ValueError(f"unknown scaling function {kind!r}")


def scaling_support(kind: ScalingKind, extent: float = SHANNON_EXTENT) -> tuple[float, float]:
    if kind is ScalingKind.HAAR:
        return 0.0, 1.0
    if kind is ScalingKind.SHANNON:
        return -extent, extent
    return -1.0, 1.0


@dataclass(frozen=True)
class ScalingFunction:
    kind: ScalingKind
    grid_step: float
    t_min: float
    samples: np.ndarray
    extent: float = SHANNON_EXTENT

    @property
    def grid(self) -> np.ndarray:
        return self.t_min + self.grid_step * np.arange(len(self.samples))

    @property
    def support(self) -> tuple[float, float]:
        return scaling_support(self.kind, self.extent)

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        return scaling_values(self.kind, t, self.extent)


def sample_scaling_function(
    kind: ScalingKind, grid_step: float, extent: float = SHANNON_EXTENT
) -> ScalingFunction:
    """Sample phi on a uniform grid over its support.

    Haar is sampled on [0, 1); the spline and the truncated sinc on their
    closed supports.
    """
    kind = ScalingKind(kind)
    if not grid_step > 0:
        raise ValueError(f"grid step must be positive, got {grid_step}")
    lo, hi = scaling_support(kind, extent)
    width = hi - lo
    if kind is ScalingKind.HAAR:
        count = math.ceil(width / grid_step - 1e-9)
    else:
        count = math.floor(width / grid_step + 1e-9) + 1
    t = lo + grid_step * np.arange(count)
    return ScalingFunction(
        kind=kind,
        grid_step=grid_step,
        t_min=lo,
        samples=_frozen(scaling_values(kind, t, extent)),
        extent=extent,
    )


@dataclass(frozen=True)
class AutocorrelationTable:
    lags: np.ndarray
    values: np.ndarray

    def value_at(self, lag: float) -> float:
        idx = np.flatnonzero(np.isclose(self.lags, lag, atol=1e-12))
        if idx.size:
            return float(self.values[idx[0]])
        order = np.argsort(self.lags)
        return float(np.interp(lag, self.lags[order], self.values[order], left=0.0, right=0.0))


def autocorrelation(sf: ScalingFunction, lags) -> AutocorrelationTable:
    """R_phi(tau) normalised so that R_phi(0) = 1, at the requested lags.

    Computed as a discrete correlation on the sampling grid and linearly
    interpolated between grid lags; zero outside the support.
    """
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    if lags.size == 0:
        raise ValueError("autocorrelation needs at least one lag")
    if sf.grid_step > MAX_GRID_STEP:
        raise ValueError(f"grid step {sf.grid_step} too coarse, need <= {MAX_GRID_STEP}")
    full = signal.correlate(sf.samples, sf.samples, mode="full")
    n = len(sf.samples)
    zero = full[n - 1]
    if zero <= 0:
        raise ValueError("scaling function has zero energy on its grid")
    grid_lags = sf.grid_step * np.arange(-(n - 1), n)
    values = np.interp(lags, grid_lags, full / zero, left=0.0, right=0.0)
    return AutocorrelationTable(lags=_frozen(lags), values=_frozen(values))
