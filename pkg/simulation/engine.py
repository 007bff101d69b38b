"""Per-trial pipeline and parallel Monte Carlo campaigns.

Every random draw comes from a counter-based Philox stream keyed on
(master_seed, draw index, hypothesis, stage), so a trial is reproducible on
its own and results do not depend on how trials are spread over workers.
Geometry, fading and local decisions are shared across SNR points and
noise kinds (common random numbers); noise draws are shared across SNR
points and scaled.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from channel.deployment import ChannelRealization, apply_mac, deploy, draw_channel
from channel.noise import calibrate_noise, combined_variance, sample_noise
from fusion.detection import (
    DetectorParams,
    FusionStatistic,
    LocalPerformance,
    benchmark_mrc,
    detect,
    global_decision,
    llr_fusion,
)
from fusion.metrics import (
    analytic_pf0,
    estimate_pfd_vs_snr,
    estimate_roc,
    fusion_error_floor,
    roc_dominates,
    threshold_grid,
)
from models import (
    BENCHMARK_SCALING,
    AnalyticPoint,
    CurveLabel,
    DetectorKind,
    Diagnostics,
    FilterDiagnostics,
    Hypothesis,
    NoiseKind,
    ReproductionCheck,
    ResultSet,
    RocPoint,
    ScalingKind,
    ScenarioConfig,
    SnrSweepRow,
    TrialError,
    TrialRecord,
    variant_key,
)
from wavelets.coding import (
    SensorDecisionFrame,
    correlation_gain,
    encode_group,
    encode_without_wpdm,
    multiplex_groups,
    project_without_wpdm,
    reconstruct,
)
from wavelets.filters import (
    ScalingFunction,
    WaveletPacketTree,
    build_packet_tree,
    design_prototype_filters,
    filter_diagnostics,
    sample_scaling_function,
)

logger = logging.getLogger(__name__)

CHUNK_SIZE = 250
NOISE_FLOOR = 1e-12
CALIBRATION_SAMPLES = 100_000
GAIN_TARGET = 10.0
GAIN_PARTIAL = 5.0
MIN_ERROR_EVENTS = 50
BENCHMARK_KEY = variant_key(BENCHMARK_SCALING, DetectorKind.MRC.value)


class Stage(IntEnum):
    GEOMETRY = 0
    CHANNEL = 1
    DECISIONS = 2
    NOISE = 3
    BENCHMARK_NOISE = 4
    CALIBRATION = 5


def stream(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key)))
    )


@dataclass(frozen=True)
class TrialKey:
    trial_id: int
    noise_index: int
    snr_index: int
    hypothesis: Hypothesis
    draw: int


def trials_per_point(config: ScenarioConfig) -> int:
    return 2 * config.trials_per_point


def total_trials(config: ScenarioConfig) -> int:
    return len(config.noise_kinds) * len(config.snr_grid_db) * trials_per_point(config)


def decode_trial(config: ScenarioConfig, trial_id: int) -> TrialKey:
    """Trial ids enumerate noise kind, then SNR, then hypothesis (H1 first), then draw."""
    if not 0 <= trial_id < total_trials(config):
        raise ValueError(f"trial id {trial_id} outside [0, {total_trials(config)})")
    T = config.trials_per_point
    point, within = divmod(trial_id, 2 * T)
    noise_index, snr_index = divmod(point, len(config.snr_grid_db))
    hyp_index, draw = divmod(within, T)
    return TrialKey(
        trial_id=trial_id,
        noise_index=noise_index,
        snr_index=snr_index,
        hypothesis=Hypothesis.H1 if hyp_index == 0 else Hypothesis.H0,
        draw=draw,
    )


@dataclass(frozen=True)
class PipelineAssets:
    tree: WaveletPacketTree
    scaling: dict[ScalingKind, ScalingFunction]
    gains: dict[ScalingKind, np.ndarray]
    local: LocalPerformance
    filters: FilterDiagnostics


_ASSETS: dict[str, PipelineAssets] = {}


def build_assets(config: ScenarioConfig) -> PipelineAssets:
    """Filters, tree, scaling functions and waveform gains; cached per config."""
    key = config.config_hash()
    cached = _ASSETS.get(key)
    if cached is not None:
        return cached
    pair = design_prototype_filters(config.filter_length, config.vanishing_moments, config.bandwidth)
    tree = build_packet_tree(pair, config.groups)
    scaling = {
        kind: sample_scaling_function(kind, 1.0 / 64.0, config.shannon_extent)
        for kind in config.scaling_kinds
    }
    gains = {
        kind: np.array([correlation_gain(tree, sf, z, config.timing_offset) for z in range(tree.groups)])
        for kind, sf in scaling.items()
    }
    assets = PipelineAssets(
        tree=tree,
        scaling=scaling,
        gains=gains,
        local=LocalPerformance(config.p_detect, config.p_false_alarm),
        filters=filter_diagnostics(pair, tree, config.tol_orth, config.tol_prototype),
    )
    _ASSETS[key] = assets
    return assets


def generate_local_decisions(
    hypothesis: Hypothesis, local: LocalPerformance, sensors: int, rng: np.random.Generator
) -> np.ndarray:
    """x_m = +1 with probability P_D under H1 and P_F under H0, else -1."""
    p = local.p_detect if hypothesis is Hypothesis.H1 else local.p_false_alarm
    return np.where(rng.random(sensors) < p, 1, -1).astype(np.int8)


def noise_variance_for(config: ScenarioConfig, channel: ChannelRealization, snr_db: float) -> float:
    """Sigma_e^2 such that rho * mean(lambda) / Sigma_e^2 equals the SNR."""
    return channel.power * float(np.mean(channel.large_scale)) / 10.0 ** (snr_db / 10.0)


def run_trial(
    config: ScenarioConfig, trial_id: int, assets: Optional[PipelineAssets] = None
) -> TrialRecord:
    key = decode_trial(config, trial_id)
    noise_kind = config.noise_kinds[key.noise_index]
    snr_db = config.snr_grid_db[key.snr_index]
    try:
        return _simulate(config, assets or build_assets(config), key)
    except Exception as e:
        raise TrialError(trial_id, snr_db, noise_kind.value, e) from e


def _simulate(config: ScenarioConfig, assets: PipelineAssets, key: TrialKey) -> TrialRecord:
    seed = config.master_seed
    hyp = int(key.hypothesis.value)
    noise_kind = config.noise_kinds[key.noise_index]
    snr_db = config.snr_grid_db[key.snr_index]
    tree = assets.tree
    Z, M, N = config.groups, config.sensors_per_group, config.antennas
    osf = config.oversampling
    target = key.draw % Z

    geom = deploy(config, stream(seed, key.draw, Stage.GEOMETRY))
    channels = draw_channel(geom, config, stream(seed, key.draw, Stage.CHANNEL))

    decision_rng = stream(seed, key.draw, hyp, Stage.DECISIONS)
    decisions = {target: generate_local_decisions(key.hypothesis, assets.local, M, decision_rng)}
    active = [target]
    if config.simulate_all_groups:
        for z in range(Z):
            if z == target:
                continue
            other = Hypothesis.H1 if decision_rng.random() < 0.5 else Hypothesis.H0
            decisions[z] = generate_local_decisions(other, assets.local, M, decision_rng)
        active = list(range(Z))
    chan = ChannelRealization.stack([channels[z] for z in active])
    own = channels[target]

    if config.noiseless:
        spec, sigma_e2 = None, NOISE_FLOOR
    else:
        sigma_e2 = noise_variance_for(config, own, snr_db)
        base = config.noise_spec(noise_kind)
        spec = base.with_gaussian_variance(sigma_e2 / combined_variance(base))

    record = TrialRecord(
        trial_id=key.trial_id,
        group=target,
        hypothesis=key.hypothesis,
        noise_kind=noise_kind,
        snr_db=snr_db,
        decisions=[int(x) for x in decisions[target]],
    )

    for kind in config.scaling_kinds:
        sf = assets.scaling[kind]
        frames = [
            encode_group(
                SensorDecisionFrame(z, tree.levels, decisions[z], config.symbol_interval), tree, sf, osf
            )
            for z in active
        ]
        mux = multiplex_groups(frames)
        noise = None
        if spec is not None:
            noise_rng = stream(seed, key.draw, hyp, key.noise_index, Stage.NOISE)
            noise = sample_noise(spec, (N, mux.sensor_waveforms.shape[1]), noise_rng)
        received = apply_mac(mux, chan, noise)
        recovered = reconstruct(received, tree, sf, target, M, osf, config.timing_offset)
        for detector in config.detectors:
            stat = detect(recovered, own, detector, float(assets.gains[kind][target]))
            _fuse(record, variant_key(kind.value, detector.value), stat, assets, config, sigma_e2)

    if config.include_benchmark:
        bare = np.vstack([encode_without_wpdm(decisions[z], osf) for z in active])
        noise = None
        if spec is not None:
            noise_rng = stream(seed, key.draw, hyp, key.noise_index, Stage.BENCHMARK_NOISE)
            noise = sample_noise(spec, (N, osf), noise_rng)
        observed = project_without_wpdm(apply_mac(bare, chan, noise), osf)
        _fuse(record, BENCHMARK_KEY, benchmark_mrc(observed, own), assets, config, sigma_e2)
    return record


def _fuse(
    record: TrialRecord,
    key: str,
    stat: FusionStatistic,
    assets: PipelineAssets,
    config: ScenarioConfig,
    sigma_e2: float,
) -> None:
    params = DetectorParams(
        detector=stat.detector,
        gains=stat.gains,
        antennas=config.antennas,
        power=config.power,
        noise_variance=sigma_e2,
    )
    llr = llr_fusion(stat.r, assets.local, params)
    record.llr[key] = llr
    record.decision[key] = int(global_decision(llr, 0.0).value)
    record.analytic_pf0[key] = analytic_pf0(
        stat.r,
        np.asarray(record.decisions),
        stat.gains,
        config.antennas,
        config.power,
        sigma_e2,
        config.p_false_alarm,
    )


def _run_chunk(config_json: str, trial_ids: list[int]) -> list[TrialRecord]:
    config = ScenarioConfig.model_validate_json(config_json)
    assets = build_assets(config)
    return [run_trial(config, t, assets) for t in trial_ids]


def _chunks(config: ScenarioConfig) -> list[tuple[int, list[int]]]:
    """(point index, trial ids) in trial-id order."""
    per_point = trials_per_point(config)
    out = []
    for point in range(len(config.noise_kinds) * len(config.snr_grid_db)):
        ids = list(range(point * per_point, (point + 1) * per_point))
        for start in range(0, len(ids), CHUNK_SIZE):
            out.append((point, ids[start : start + CHUNK_SIZE]))
    return out


def run_campaign(config: ScenarioConfig, workers: int = 1) -> ResultSet:
    """Run every trial of the campaign and aggregate the tables.

    Chunks are reassembled in trial-id order, so the result is the same for
    any worker count. A failing trial stops the campaign and flags the
    result set as partial.
    """
    assets = build_assets(config)
    chunks = _chunks(config)
    results: list[Optional[list[TrialRecord]]] = [None] * len(chunks)
    remaining = defaultdict(int)
    for point, _ in chunks:
        remaining[point] += 1
    partial = False

    logger.info(
        f"campaign {config.config_hash()[:12]}: {total_trials(config)} trials, "
        f"{len(chunks)} chunks, {workers} worker(s)"
    )

    def _done(idx: int) -> None:
        point = chunks[idx][0]
        remaining[point] -= 1
        if remaining[point] == 0:
            noise_index, snr_index = divmod(point, len(config.snr_grid_db))
            logger.info(
                f"point done: noise={config.noise_kinds[noise_index].value} "
                f"snr={config.snr_grid_db[snr_index]} dB ({trials_per_point(config)} trials)"
            )

    if workers <= 1:
        for idx, (_, ids) in enumerate(chunks):
            try:
                results[idx] = [run_trial(config, t, assets) for t in ids]
            except TrialError:
                logger.exception(f"campaign aborted at chunk {idx}")
                partial = True
                break
            _done(idx)
    else:
        payload = config.model_dump_json()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_chunk, payload, ids): idx for idx, (_, ids) in enumerate(chunks)}
            for future in as_completed(futures):
                idx = futures[future]
                try:
                    results[idx] = future.result()
                except Exception:
                    logger.exception(f"campaign aborted at chunk {idx}")
                    partial = True
                    for f in futures:
                        f.cancel()
                    break
                _done(idx)

    records = [rec for chunk in results if chunk for rec in chunk]
    return aggregate(config, records, partial=partial, assets=assets)


def aggregate(
    config: ScenarioConfig,
    records: list[TrialRecord],
    partial: bool = False,
    assets: Optional[PipelineAssets] = None,
) -> ResultSet:
    assets = assets or build_assets(config)
    thresholds = threshold_grid(config.sensors_per_group, config.threshold_points)
    llrs: dict[tuple, list[float]] = defaultdict(list)
    analytic: dict[tuple, list[float]] = defaultdict(list)
    for rec in records:
        for key, value in rec.llr.items():
            llrs[(rec.noise_kind, rec.snr_db, key, rec.hypothesis)].append(value)
            if rec.hypothesis is Hypothesis.H0:
                analytic[(rec.noise_kind, rec.snr_db, key)].append(rec.analytic_pf0[key])

    roc: list[RocPoint] = []
    analytic_points: list[AnalyticPoint] = []
    for noise_kind in config.noise_kinds:
        for snr_db in config.snr_grid_db:
            for key in config.variant_keys():
                h1 = llrs.get((noise_kind, snr_db, key, Hypothesis.H1), [])
                h0 = llrs.get((noise_kind, snr_db, key, Hypothesis.H0), [])
                if h1 and h0:
                    scaling, detector = key.split("/", 1)
                    label = CurveLabel(
                        scaling=scaling,
                        detector=detector,
                        noise_kind=noise_kind.value,
                        p_imp=config.p_imp,
                        snr_db=snr_db,
                    )
                    roc.extend(estimate_roc(h1, h0, thresholds, label))
                values = analytic.get((noise_kind, snr_db, key))
                if values:
                    analytic_points.append(
                        AnalyticPoint(
                            variant=key,
                            noise_kind=noise_kind.value,
                            snr_db=snr_db,
                            pf0=float(np.mean(values)),
                        )
                    )

    pfd = estimate_pfd_vs_snr(records, config) if records else []
    diagnostics = Diagnostics(
        config_hash=config.config_hash(),
        seed=config.master_seed,
        filters=assets.filters,
        waveform_gains={k.value: [float(g) for g in v] for k, v in assets.gains.items()},
        fusion_floor=fusion_error_floor(assets.local, config.sensors_per_group),
        noise_calibration=_calibrations(config),
        analytic_pf0=analytic_points,
        reproduction=reproduction_checks(config, roc, pfd),
    )
    return ResultSet(
        config=config,
        config_hash=config.config_hash(),
        seed=config.master_seed,
        roc=roc,
        pfd_vs_snr=pfd,
        diagnostics=diagnostics,
        trials_executed=len(records),
        partial=partial,
    )


def _calibrations(config: ScenarioConfig):
    if config.noiseless:
        return []
    return [
        calibrate_noise(
            config.noise_spec(kind), CALIBRATION_SAMPLES, stream(config.master_seed, i, Stage.CALIBRATION)
        )
        for i, kind in enumerate(config.noise_kinds)
    ]


def _curves(roc: list[RocPoint]) -> dict[tuple, list[RocPoint]]:
    curves: dict[tuple, list[RocPoint]] = defaultdict(list)
    for p in roc:
        curves[(p.noise_kind, p.snr_db, p.scaling, p.detector)].append(p)
    return curves


def reproduction_checks(
    config: ScenarioConfig, roc: list[RocPoint], pfd: list[SnrSweepRow]
) -> list[ReproductionCheck]:
    """Qualitative trend checks, reported in diagnostics and never asserted."""
    checks: list[ReproductionCheck] = []
    curves = _curves(roc)
    scalings = [s.value for s in config.scaling_kinds]

    for noise_kind in config.noise_kinds:
        for snr_db in config.snr_grid_db:
            point = (noise_kind.value, snr_db)
            if {DetectorKind.MF, DetectorKind.ZF} <= set(config.detectors):
                for s in scalings:
                    zf, mf = curves.get((*point, s, "zf")), curves.get((*point, s, "mf"))
                    if zf and mf:
                        ok = roc_dominates(zf, mf)
                        checks.append(
                            ReproductionCheck(
                                name="zf_dominates_mf",
                                noise_kind=noise_kind.value,
                                snr_db=snr_db,
                                status="reproduced" if ok else "not_reproduced",
                                detail={"scaling": s},
                            )
                        )
            for d in config.detectors:
                for s in scalings:
                    mine = curves.get((*point, s, d.value))
                    if not mine or len(scalings) < 2:
                        continue
                    beaten_by = [
                        o
                        for o in scalings
                        if o != s
                        and curves.get((*point, o, d.value))
                        and roc_dominates(curves[(*point, o, d.value)], mine)
                        and not roc_dominates(mine, curves[(*point, o, d.value)])
                    ]
                    checks.append(
                        ReproductionCheck(
                            name="scaling_non_dominance",
                            noise_kind=noise_kind.value,
                            snr_db=snr_db,
                            status="dominated" if beaten_by else "not_dominated",
                            detail={"scaling": s, "detector": d.value, "dominated_by": ",".join(beaten_by)},
                        )
                    )

    if config.include_benchmark:
        wpdm_detector = "zf" if DetectorKind.ZF in config.detectors else config.detectors[0].value
        for noise_kind in config.noise_kinds:
            checks.append(_wpdm_gain(noise_kind, wpdm_detector, pfd))
    return checks


def _wpdm_gain(noise_kind: NoiseKind, detector: str, pfd: list[SnrSweepRow]) -> ReproductionCheck:
    """Benchmark-to-WPDM error ratio over the SNR grid (both counted at threshold 0)."""
    rows = [r for r in pfd if r.noise_kind == noise_kind.value]
    bench = {r.snr_db: r for r in rows if r.detector == DetectorKind.MRC.value}
    ratios = []
    for r in rows:
        b = bench.get(r.snr_db)
        if r.detector != detector or b is None or r.errors == 0:
            continue
        enough = r.errors >= MIN_ERROR_EVENTS and b.errors >= MIN_ERROR_EVENTS
        ratios.append((b.pfd / r.pfd, enough, r.snr_db))

    detail: dict[str, float | str] = {"detector": detector}
    if not ratios:
        status = "not_evaluated"
    else:
        best, _, snr_db = max(ratios)
        detail.update({"best_ratio": best, "snr_db": snr_db})
        if any(ratio >= GAIN_TARGET and enough for ratio, enough, _ in ratios):
            status = "reproduced"
        elif best >= GAIN_PARTIAL:
            status = "partial"
        else:
            status = "not_reproduced"
    return ReproductionCheck(name="wpdm_gain", noise_kind=noise_kind.value, status=status, detail=detail)


def override(config: ScenarioConfig, **updates) -> ScenarioConfig:
    """Validated copy of ``config`` with ``updates`` applied (None values ignored)."""
    data = config.model_dump()
    data.update({k: v for k, v in updates.items() if v is not None})
    return ScenarioConfig.model_validate(data)
