"""Synthetic best-effort workload catalog.

Twelve BE profiles span the resource-sensitivity space. Two are reserved for
controller training: a bandwidth-flooding worst case and a balanced profile.
The remaining ten are held out for evaluation, so controllers and predictors
never see them before test time. Predictor training mixes are built from
variations of the two training profiles only, which keeps the hold-out set
genuinely unseen end to end.
"""

from __future__ import annotations

from dataclasses import replace

from .simenv import BEWorkloadSpec

TRAINING_BE = ("mem_flood", "balanced")


def be_catalog() -> dict:
    profiles = [
        # training profiles
        BEWorkloadSpec("mem_flood", llc_sensitivity=0.3, mbw_sensitivity=0.9, freq_sensitivity=0.3,
                       mbw_aggressiveness=0.95, counter_shift={"offcore_requests": 1.2}),
        BEWorkloadSpec("balanced", llc_sensitivity=0.5, mbw_sensitivity=0.5, freq_sensitivity=0.5,
                       mbw_aggressiveness=0.55),
        # hold-out profiles
        BEWorkloadSpec("cache_churn", llc_sensitivity=0.9, mbw_sensitivity=0.4, freq_sensitivity=0.4,
                       mbw_aggressiveness=0.5, counter_shift={"l2_code_reads": 1.15}),
        BEWorkloadSpec("bw_surge", llc_sensitivity=0.2, mbw_sensitivity=0.8, freq_sensitivity=0.3,
                       mbw_aggressiveness=1.0, counter_shift={"offcore_buffer_full": 1.2}),
        BEWorkloadSpec("compute_dense", llc_sensitivity=0.2, mbw_sensitivity=0.2, freq_sensitivity=0.9,
                       mbw_aggressiveness=0.15),
        BEWorkloadSpec("stream_copy", llc_sensitivity=0.25, mbw_sensitivity=0.85, freq_sensitivity=0.35,
                       mbw_aggressiveness=0.85, counter_shift={"offcore_requests": 1.1}),
        BEWorkloadSpec("graph_walk", llc_sensitivity=0.7, mbw_sensitivity=0.6, freq_sensitivity=0.4,
                       mbw_aggressiveness=0.5, counter_shift={"frontend_stall_retired": 1.1}),
        BEWorkloadSpec("kv_scan", llc_sensitivity=0.6, mbw_sensitivity=0.7, freq_sensitivity=0.45,
                       mbw_aggressiveness=0.7),
        BEWorkloadSpec("vid_encode", llc_sensitivity=0.45, mbw_sensitivity=0.5, freq_sensitivity=0.7,
                       mbw_aggressiveness=0.45, counter_shift={"instructions_retired": 0.95}),
        BEWorkloadSpec("ml_infer", llc_sensitivity=0.5, mbw_sensitivity=0.6, freq_sensitivity=0.6,
                       mbw_aggressiveness=0.55, counter_shift={"offcore_requests": 0.9}),
        BEWorkloadSpec("zip_pack", llc_sensitivity=0.4, mbw_sensitivity=0.3, freq_sensitivity=0.5,
                       mbw_aggressiveness=0.3),
        BEWorkloadSpec("fluid_grid", llc_sensitivity=0.55, mbw_sensitivity=0.75, freq_sensitivity=0.4,
                       mbw_aggressiveness=0.8, counter_shift={"unhalted_cycles": 1.05}),
    ]
    return {p.name: p for p in profiles}


def eval_be_names() -> list:
    return [n for n in be_catalog() if n not in TRAINING_BE]


def predictor_mixes() -> list:
    """Nine co-scheduling mixes derived from the two training profiles."""
    cat = be_catalog()
    flood, bal = cat["mem_flood"], cat["balanced"]
    return [
        ("flood_full", [flood]),
        ("flood_mid", [replace(flood, mbw_aggressiveness=0.7)]),
        ("flood_low", [replace(flood, mbw_aggressiveness=0.4, counter_shift={"offcore_requests": 1.05})]),
        ("balanced_full", [bal]),
        ("balanced_hot", [replace(bal, mbw_aggressiveness=0.8, counter_shift={"l2_code_reads": 1.1})]),
        ("balanced_cool", [replace(bal, mbw_aggressiveness=0.35)]),
        ("flood_plus_balanced", [replace(flood, mbw_aggressiveness=0.8), replace(bal, mbw_aggressiveness=0.45)]),
        ("cache_heavy_variant", [replace(bal, llc_sensitivity=0.85, mbw_aggressiveness=0.6)]),
        ("near_idle", [replace(bal, mbw_aggressiveness=0.1)]),
    ]
