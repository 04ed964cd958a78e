"""End-to-end experiment stages with hash-based resumability.

Stage order: select-features -> collect -> train-predictor -> train-agent ->
evaluate, plus compare and emit-plots on demand. Each stage writes its
artifacts plus a stage.hash fingerprint of the relevant config sections and
upstream hashes; rerunning a completed stage is a no-op.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .agent import StateNormalizer, select_checkpoint, train_loop
from .baselines import BOSearchPolicy, twig_reward  # noqa: F401  (twig reward re-exported for harness users)
from .bdq import BDQNetwork
from .config import ExperimentConfig
from .featsel import build_decoy_catalog, default_probe_mixes, run_selection_pipeline
from .metrics import audit_log, bucket_counts, compute_metrics, emit_plot_data, write_metrics_csv
from .qospred import ProfilingDataset, TwoLevelPredictor, collect_training_data, evaluate_leave_one_mix_out, train_predictor
from .runner import GreedyAgentPolicy, read_eval_log, run_episode
from .simenv import SimEnv
from .workloads import be_catalog, predictor_mixes

log = logging.getLogger("qosalloc")

CONTROLLER_PREDICTIVE = "predictive"
CONTROLLER_REACTIVE = "reactive"
CONTROLLER_BO = "bo_search"


class StageError(Exception):
    """A pipeline stage failed; upstream artifacts remain intact."""


def _stage_done(stage_dir: Path, digest: str, artifacts, marker: str = "stage.hash") -> bool:
    marker_path = stage_dir / marker
    if not marker_path.exists() or marker_path.read_text().strip() != digest:
        return False
    return all((stage_dir / a).exists() for a in artifacts)


def _finish(stage_dir: Path, digest: str, marker: str = "stage.hash") -> None:
    (stage_dir / marker).write_text(digest)


def _chain(*parts: str) -> str:
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


def make_env(cfg: ExperimentConfig, be_specs, seed: int) -> SimEnv:
    return SimEnv(cfg.node_config(), [cfg.hp_spec()], be_specs, seed=seed)


def _sub_seed(*entropy) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


# -- stages ---------------------------------------------------------------------


def stage_select_features(cfg: ExperimentConfig):
    out = cfg.out_dir / "features"
    digest = _chain(cfg.section_hash("node", "hp", "featsel"))
    artifacts = ("report.json", "catalog.csv")
    if _stage_done(out, digest, artifacts):
        log.info("select-features: up to date")
        return out / "report.json", digest
    out.mkdir(parents=True, exist_ok=True)
    f = cfg.raw["featsel"]
    catalog, labels = build_decoy_catalog(
        cfg.node_config(), cfg.hp_spec(), default_probe_mixes(),
        samples_per_mix=f["samples_per_mix"], seed=cfg.seed, window_s=f["window_s"],
    )
    report = run_selection_pipeline(
        catalog, labels, k=f["k"], min_rate=f["min_rate"], min_cv=f["min_cv"],
        shadow_rounds=f["shadow_rounds"], shadow_cutoff=f["shadow_cutoff"],
        max_log10_shift=f["max_log10_shift"], seed=cfg.seed,
    )
    catalog.to_csv(out / "catalog.csv")
    report.save(out / "report.json")
    _finish(out, digest)
    log.info("select-features: %d counters selected", len(report.final))
    return out / "report.json", digest


def stage_collect(cfg: ExperimentConfig):
    out = cfg.out_dir / "dataset"
    digest = _chain(cfg.section_hash("node", "hp", "predictor"))
    if _stage_done(out, digest, ("dataset.csv",)):
        log.info("collect: up to date")
        return out / "dataset.csv", digest
    out.mkdir(parents=True, exist_ok=True)
    pc = cfg.predictor_config()
    data = collect_training_data(
        lambda be_specs, seed: make_env(cfg, be_specs, seed),
        predictor_mixes(),
        samples_per_mix=pc.samples_per_mix,
        window_s=pc.window_s,
        seed=cfg.seed,
        demand_levels=pc.demand_levels,
    )
    data.to_csv(out / "dataset.csv")
    _finish(out, digest)
    log.info("collect: %d rows across %d mixes", len(data), len(data.mixes))
    return out / "dataset.csv", digest


def stage_train_predictor(cfg: ExperimentConfig):
    dataset_path, upstream = stage_collect(cfg)
    out = cfg.out_dir / "predictor"
    digest = _chain(cfg.section_hash("predictor"), upstream)
    artifacts = ("predictor.json", "lomo.csv")
    if _stage_done(out, digest, artifacts):
        log.info("train-predictor: up to date")
        return out / "predictor.json", digest
    out.mkdir(parents=True, exist_ok=True)
    data = ProfilingDataset.from_csv(dataset_path)
    pc = cfg.predictor_config()
    predictor = train_predictor(data, pc)
    predictor.save(out / "predictor.json")
    report = evaluate_leave_one_mix_out(data, pc)
    report.to_csv(out / "lomo.csv")
    _finish(out, digest)
    log.info("train-predictor: F1=%.3f critical MAE=%.1f", report.mean_f1, report.mean_critical_mae)
    return out / "predictor.json", digest


def stage_eval_predictor(cfg: ExperimentConfig):
    """Leave-one-mix-out report for the two-level predictor and its one-level ablation."""
    dataset_path, upstream = stage_collect(cfg)
    out = cfg.out_dir / "predictor"
    digest = _chain(cfg.section_hash("predictor"), upstream, "ablation")
    if _stage_done(out, digest, ("ablation.csv",), marker="ablation.hash"):
        log.info("eval-predictor: up to date")
        return out / "ablation.csv", digest
    out.mkdir(parents=True, exist_ok=True)
    data = ProfilingDataset.from_csv(dataset_path)
    pc = cfg.predictor_config()
    two = evaluate_leave_one_mix_out(data, pc, levels=2)
    one = evaluate_leave_one_mix_out(data, pc, levels=1)
    import csv as _csv

    with open(out / "ablation.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["config", "f1", "critical_mae", "full_mae", "large_mispredictions"])
        w.writerow(["two_level", f"{two.mean_f1:.6g}", f"{two.mean_critical_mae:.6g}", f"{two.mean_full_mae:.6g}", two.total_large_mispredictions])
        w.writerow(["one_level", "n/a", f"{one.mean_critical_mae:.6g}", f"{one.mean_full_mae:.6g}", one.total_large_mispredictions])
        improvement = 1.0 - two.mean_critical_mae / one.mean_critical_mae
        w.writerow(["critical_mae_improvement", f"{improvement:.6g}", "", "", ""])
    _finish(out, digest, marker="ablation.hash")
    log.info("eval-predictor: two-level critical MAE %.1f vs one-level %.1f", two.mean_critical_mae, one.mean_critical_mae)
    return out / "ablation.csv", digest


def _training_be_schedule(cfg: ExperimentConfig):
    catalog = be_catalog()
    names = cfg.raw["evaluation"]["be_training"]
    every = int(cfg.raw["agent"]["be_switch_every"])
    steps = cfg.agent_config().max_steps
    schedule = []
    for i, start in enumerate(range(0, max(steps, 1), every)):
        schedule.append((start, [catalog[names[i % len(names)]]]))
    return schedule


def stage_train_agents(cfg: ExperimentConfig):
    predictor_path, upstream = stage_train_predictor(cfg)
    dataset_path, _ = stage_collect(cfg)
    out = cfg.out_dir / "agents"
    digest = _chain(cfg.section_hash("node", "hp", "trace", "agent", "reward"), upstream)
    artifacts = ("selected.json", "norm.json")
    if _stage_done(out, digest, artifacts):
        log.info("train-agent: up to date")
        return out / "selected.json", digest
    out.mkdir(parents=True, exist_ok=True)

    data = ProfilingDataset.from_csv(dataset_path)
    norm = StateNormalizer.fit(data.features(), data.labels())
    (out / "norm.json").write_text(json.dumps(norm.to_dict()))
    predictor = TwoLevelPredictor.load(predictor_path)

    agent_cfg = cfg.agent_config()
    reward_cfg = cfg.reward_config()
    schedule = _training_be_schedule(cfg)
    window = int(cfg.raw["agent"]["checkpoint_window"])
    selected = {}
    for kind, pred in ((CONTROLLER_PREDICTIVE, predictor), (CONTROLLER_REACTIVE, None)):
        env = make_env(cfg, schedule[0][1], seed=_sub_seed(cfg.seed, 1))
        result = train_loop(
            env, pred, agent_cfg, reward_cfg, norm, out / kind, seed=_sub_seed(cfg.seed, 2), be_schedule=schedule,
        )
        step = select_checkpoint(result.log_rows, window=window, checkpoint_steps=result.checkpoint_steps)
        selected[kind] = {"checkpoint": step, "path": str(out / kind / f"ckpt_{step}.json")}
        log.info("train-agent[%s]: selected checkpoint %d", kind, step)
    (out / "selected.json").write_text(json.dumps(selected, indent=2))
    _finish(out, digest)
    return out / "selected.json", digest


def _load_agents(cfg: ExperimentConfig):
    agents_dir = cfg.out_dir / "agents"
    selected = json.loads((agents_dir / "selected.json").read_text())
    norm = StateNormalizer.from_dict(json.loads((agents_dir / "norm.json").read_text()))
    predictor = TwoLevelPredictor.load(cfg.out_dir / "predictor" / "predictor.json")
    nets = {kind: BDQNetwork.load(info["path"]) for kind, info in selected.items()}
    return nets, norm, predictor


def _controllers(cfg: ExperimentConfig):
    names = [CONTROLLER_PREDICTIVE, CONTROLLER_REACTIVE]
    if cfg.raw["evaluation"]["include_bo_in_compare"]:
        names.append(CONTROLLER_BO)
    return names


def _eval_log_path(cfg: ExperimentConfig, controller: str, be: str, seed: int) -> Path:
    return cfg.out_dir / "eval" / controller / f"{be}_{seed}.csv"


def stage_evaluate(cfg: ExperimentConfig):
    _, upstream = stage_train_agents(cfg)
    out = cfg.out_dir / "eval"
    digest = _chain(cfg.section_hash("evaluation", "bo"), upstream)
    if _stage_done(out, digest, ("metrics.csv",)):
        log.info("evaluate: up to date")
        return out / "metrics.csv", digest
    out.mkdir(parents=True, exist_ok=True)

    nets, norm, predictor = _load_agents(cfg)
    catalog = be_catalog()
    ev = cfg.raw["evaluation"]
    node = cfg.node_config()
    smoothing = cfg.agent_config().smoothing_window
    target = cfg.hp_spec().qos_target_dpps
    entries = []
    for seed in ev["seeds"]:
        for be_name in ev["be_eval"]:
            be = catalog[be_name]
            env_seed = _sub_seed(cfg.seed, seed, sorted(catalog).index(be_name))
            for controller in _controllers(cfg):
                env = make_env(cfg, [be], seed=env_seed)
                if controller == CONTROLLER_BO:
                    policy = BOSearchPolicy(node, cfg.bo_config(), cfg.reward_config(), target, np.random.default_rng(_sub_seed(env_seed, 9)))
                else:
                    policy = GreedyAgentPolicy(
                        nets[controller],
                        predictor if controller == CONTROLLER_PREDICTIVE else None,
                        norm,
                        smoothing_window=smoothing,
                    )
                rows = run_episode(env, policy, ev["episode_intervals"], log_path=_eval_log_path(cfg, controller, be_name, seed))
                audit_log(rows, node)
                entries.append((controller, be_name, seed, compute_metrics(rows, target)))
        log.info("evaluate: finished seed %s", seed)
    write_metrics_csv(out / "metrics.csv", entries)
    _finish(out, digest)
    return out / "metrics.csv", digest


def stage_compare(cfg: ExperimentConfig):
    metrics_path, upstream = stage_evaluate(cfg)
    out = cfg.out_dir / "compare"
    digest = _chain(upstream)
    artifacts = ("comparison.csv", "buckets.csv", "seed_medians.csv")
    if _stage_done(out, digest, artifacts):
        log.info("compare: up to date")
        return out, digest
    out.mkdir(parents=True, exist_ok=True)

    ev = cfg.raw["evaluation"]
    target = cfg.hp_spec().qos_target_dpps
    controllers = _controllers(cfg)

    # per-(controller, BE) metrics pooled over seeds, Table-style
    import csv as _csv

    from .metrics import MetricsReport, aggregate_reports, geomean

    per_be: dict = {c: {} for c in controllers}
    per_seed_overall: dict = {c: {} for c in controllers}
    for controller in controllers:
        for be_name in ev["be_eval"]:
            seed_reports = []
            for seed in ev["seeds"]:
                rows = read_eval_log(_eval_log_path(cfg, controller, be_name, seed))
                report = compute_metrics(rows, target)
                seed_reports.append(report)
                per_seed_overall[controller].setdefault(seed, []).append(report)
            per_be[controller][be_name] = aggregate_reports(seed_reports)

    with open(out / "comparison.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["controller", "be", "n_intervals", "n_violations", "violation_pct", "tardiness", "be_perf", "power_eff"])
        for controller in controllers:
            for be_name in ev["be_eval"]:
                w.writerow([controller, be_name, *per_be[controller][be_name].as_row()])
            w.writerow([controller, "ALL", *aggregate_reports(per_be[controller].values()).as_row()])

    with open(out / "seed_medians.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["controller", "median_violation_pct", "median_tardiness", "median_be_perf", "median_power_eff"])
        for controller in controllers:
            overall = [aggregate_reports(reports) for reports in per_seed_overall[controller].values()]
            tard = [r.tardiness for r in overall if r.tardiness is not None]
            w.writerow(
                [
                    controller,
                    f"{float(np.median([r.violation_pct for r in overall])):.10g}",
                    "n/a" if not tard else f"{float(np.median(tard)):.10g}",
                    f"{float(np.median([r.be_perf for r in overall])):.10g}",
                    f"{float(np.median([r.power_eff for r in overall])):.10g}",
                ]
            )

    with open(out / "buckets.csv", "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["controller", "bucket", "count", "avg_dpps", "sampling_count"])
        for controller in controllers:
            pooled: list = []
            for be_name in ev["be_eval"]:
                for seed in ev["seeds"]:
                    pooled.extend(read_eval_log(_eval_log_path(cfg, controller, be_name, seed)))
            for label, stats in bucket_counts(pooled).items():
                w.writerow([controller, label, stats["count"], f"{stats['avg_dpps']:.10g}", stats["sampling_count"]])
    _finish(out, digest)
    return out, digest


def stage_emit_plots(cfg: ExperimentConfig):
    metrics_path, upstream = stage_evaluate(cfg)
    out = cfg.out_dir / "plots"
    digest = _chain(upstream)
    if _stage_done(out, digest, ()) and any(out.glob("*.csv")):
        log.info("emit-plots: up to date")
        return out, digest
    out.mkdir(parents=True, exist_ok=True)
    ev = cfg.raw["evaluation"]
    for controller in _controllers(cfg):
        for be_name in ev["be_eval"]:
            for seed in ev["seeds"]:
                rows = read_eval_log(_eval_log_path(cfg, controller, be_name, seed))
                emit_plot_data(rows, out / f"{controller}_{be_name}_{seed}.csv")
    _finish(out, digest)
    return out, digest


STAGES = {
    "select-features": stage_select_features,
    "collect": stage_collect,
    "train-predictor": stage_train_predictor,
    "eval-predictor": stage_eval_predictor,
    "train-agent": stage_train_agents,
    "evaluate": stage_evaluate,
    "compare": stage_compare,
    "emit-plots": stage_emit_plots,
}


def run_pipeline(cfg: ExperimentConfig):
    """Execute the training stages in order; artifacts land under cfg.out_dir."""
    for name in ("select-features", "collect", "train-predictor", "train-agent", "evaluate"):
        run_stage(cfg, name)


def run_stage(cfg: ExperimentConfig, name: str):
    if name not in STAGES:
        raise StageError(f"unknown stage {name!r}")
    try:
        return STAGES[name](cfg)
    except StageError:
        raise
    except Exception as e:  # stage failures must not corrupt earlier artifacts
        raise StageError(f"stage {name} failed: {e}") from e
