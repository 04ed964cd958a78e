"""Hierarchical performance-counter selection.

Five progressively stricter steps trim a counter catalog down to a compact
feature list: (1) drop rare and low-variance counters, (2) drop counters less
informative than their randomly permuted shadows, (3) drop counters whose
distribution shifts by orders of magnitude across co-scheduled mixes, (4) drop
problematic counter classes outright, (5) greedy forward selection down to the
requested count. Survivor sets are nested across steps and every elimination
carries a machine-readable reason.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boosting import fit_boosted
from .simenv import COUNTER_NAMES, BEWorkloadSpec, SimEnv

CLASS_TAGS = ("fixed", "general", "coherency", "specialized-isa", "nonstandard-component")
PROBLEM_TAGS = ("coherency", "specialized-isa", "nonstandard-component")

# Table-style tags for the six informative counters: the first two use
# dedicated fixed counters, the rest are general-purpose programmable ones.
INFORMATIVE_TAGS = dict(zip(COUNTER_NAMES, ("fixed", "fixed", "general", "general", "general", "general")))


@dataclass
class CatalogEntry:
    name: str
    class_tag: str
    samples: dict  # mix id -> 1-D array of per-window mean rates

    def __post_init__(self):
        if self.class_tag not in CLASS_TAGS:
            raise ValueError(f"unknown class tag {self.class_tag!r}")
        self.samples = {m: np.asarray(v, dtype=float) for m, v in self.samples.items()}
        for m, v in self.samples.items():
            if len(v) < 1:
                raise ValueError(f"counter {self.name} has no samples for mix {m}")


@dataclass
class CounterCatalog:
    entries: list

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate counter names in catalog")

    @property
    def names(self):
        return [e.name for e in self.entries]

    @property
    def mixes(self):
        mixes = []
        for e in self.entries:
            for m in e.samples:
                if m not in mixes:
                    mixes.append(m)
        return mixes

    def entry(self, name: str) -> CatalogEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def matrix(self, names=None) -> np.ndarray:
        """Feature matrix with rows ordered by (mix, time)."""
        names = list(names) if names is not None else self.names
        cols = []
        for name in names:
            e = self.entry(name)
            cols.append(np.concatenate([e.samples[m] for m in self.mixes]))
        return np.stack(cols, axis=1)

    def to_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["counter", "mix", "t_s", "value"])
            for e in self.entries:
                for m, series in e.samples.items():
                    for t, v in enumerate(series):
                        w.writerow([e.name, m, t, f"{v:.10g}"])

    @classmethod
    def from_csv(cls, path, class_tags=None) -> "CounterCatalog":
        """Rebuild a catalog from `counter,mix,t_s,value` rows."""
        class_tags = class_tags or {}
        data: dict = {}
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header != ["counter", "mix", "t_s", "value"]:
                raise ValueError(f"bad catalog header: {header}")
            for name, mix, _t, value in r:
                data.setdefault(name, {}).setdefault(mix, []).append(float(value))
        entries = [
            CatalogEntry(name=name, class_tag=class_tags.get(name, "general"), samples=mixes)
            for name, mixes in data.items()
        ]
        return cls(entries)


@dataclass
class SelectionReport:
    step_survivors: dict = field(default_factory=dict)  # step number -> names
    eliminated: dict = field(default_factory=dict)  # name -> "step<k>:<reason>"
    final: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "step_survivors": {str(k): v for k, v in self.step_survivors.items()},
            "eliminated": self.eliminated,
            "final": self.final,
            "warnings": self.warnings,
        }

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "SelectionReport":
        d = json.loads(Path(path).read_text())
        return cls(
            step_survivors={int(k): v for k, v in d["step_survivors"].items()},
            eliminated=d["eliminated"],
            final=d["final"],
            warnings=d["warnings"],
        )


# -- step 1 --------------------------------------------------------------------


def filter_rare_low_variance(catalog: CounterCatalog, min_rate: float = 1.0, min_cv: float = 0.01):
    """Drop counters with mean rate < min_rate or coefficient of variation < min_cv.

    Operates on a single-mix sample window (the catalog's first mix).
    """
    mix = catalog.mixes[0]
    survivors, reasons = [], {}
    for e in catalog.entries:
        series = e.samples[mix]
        mean = float(series.mean())
        cv = float(series.std() / mean) if mean > 0 else 0.0
        if mean < min_rate:
            reasons[e.name] = f"rare_event:mean_rate={mean:.3g}"
        elif cv < min_cv:
            reasons[e.name] = f"low_variance:cv={cv:.3g}"
        else:
            survivors.append(e.name)
    return survivors, reasons


# -- step 2 --------------------------------------------------------------------


def shadow_feature_elimination(
    X,
    y,
    feature_names,
    rounds: int = 5,
    cutoff: float = 1.0,
    seed: int = 0,
    estimators: int = 30,
    depth: int = 3,
    lr: float = 0.2,
    subsample: float = 0.7,
):
    """Drop features less informative than randomly permuted shadow copies.

    Each round appends one fresh permuted shadow per surviving feature, fits a
    boosted regressor on a row subsample, and removes features whose split-gain
    importance falls below cutoff * max shadow importance. Subsampling keeps
    rounds quasi-independent, so a chance-aligned noise column cannot ride one
    lucky draw through every round. The set counts as stable once two
    consecutive rounds drop nothing. Returns (survivors, reasons, warned).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) < 100:
        raise ValueError("shadow elimination needs at least 100 rows")
    names = list(feature_names)
    if np.ptp(y) == 0.0:
        return names, {}, True  # degenerate targets carry no information
    rng = np.random.default_rng(seed)
    reasons = {}
    current = list(range(X.shape[1]))
    clean_rounds = 0
    for _ in range(rounds):
        if not current or clean_rounds >= 2:
            break
        rows = rng.choice(len(y), size=max(int(subsample * len(y)), 50), replace=False)
        Xc = X[np.ix_(rows, current)]
        ys = y[rows]
        shadows = np.stack([rng.permutation(Xc[:, j]) for j in range(Xc.shape[1])], axis=1)
        model = fit_boosted(np.hstack([Xc, shadows]), ys, estimators=estimators, depth=depth, lr=lr)
        imp = model.feature_importance()
        real, shadow = imp[: Xc.shape[1]], imp[Xc.shape[1] :]
        threshold = cutoff * float(shadow.max())
        keep = [j for pos, j in enumerate(current) if real[pos] >= threshold]
        for pos, j in enumerate(current):
            if j not in keep:
                reasons[names[j]] = f"below_shadow:importance={real[pos]:.4g},threshold={threshold:.4g}"
        clean_rounds = clean_rounds + 1 if len(keep) == len(current) else 0
        current = keep
    return [names[j] for j in current], reasons, False


# -- step 3 --------------------------------------------------------------------


def distribution_shift_filter(catalog: CounterCatalog, names=None, max_log10_shift: float = 2.0):
    """Drop counters whose per-mix medians span >= max_log10_shift decades."""
    if len(catalog.mixes) < 2:
        raise ValueError("shift filter needs at least two mixes")
    names = list(names) if names is not None else catalog.names
    survivors, reasons = [], {}
    for name in names:
        e = catalog.entry(name)
        medians = np.array([np.median(e.samples[m]) for m in catalog.mixes])
        medians = np.maximum(medians, 1e-9)
        shift = float(np.log10(medians.max() / medians.min()))
        if shift >= max_log10_shift:
            reasons[name] = f"distribution_shift:log10={shift:.3g}"
        else:
            survivors.append(name)
    return survivors, reasons


# -- step 4 --------------------------------------------------------------------


def exclude_problem_classes(catalog: CounterCatalog, names=None):
    """Drop coherency, specialized-ISA, and non-standard-component counters."""
    names = list(names) if names is not None else catalog.names
    survivors, reasons = [], {}
    for name in names:
        tag = catalog.entry(name).class_tag
        if tag in PROBLEM_TAGS:
            reasons[name] = f"problem_class:{tag}"
        else:
            survivors.append(name)
    return survivors, reasons


# -- step 5 --------------------------------------------------------------------


def _cv_mae(X, y, order, folds=3):
    mae = 0.0
    splits = np.array_split(order, folds)
    for i in range(folds):
        test = splits[i]
        train = np.concatenate([splits[j] for j in range(folds) if j != i])
        model = fit_boosted(X[train], y[train], estimators=15, depth=2, lr=0.2)
        mae += float(np.mean(np.abs(model.predict(X[test]) - y[test])))
    return mae / folds


def stepwise_select(X, y, feature_names, k: int, seed: int = 0, folds: int = 3):
    """Greedy forward selection by cross-validated MAE of a small boosted model."""
    if k <= 0:
        raise ValueError("k must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    names = list(feature_names)
    if k > len(names):
        raise ValueError(f"k={k} exceeds {len(names)} candidate features")
    order = np.random.default_rng(seed).permutation(len(y))
    chosen: list[int] = []
    remaining = list(range(len(names)))
    while len(chosen) < k:
        best_j, best_score = None, np.inf
        for j in remaining:
            score = _cv_mae(X[:, chosen + [j]], y, order, folds=folds)
            if score < best_score - 1e-12:
                best_j, best_score = j, score
        chosen.append(best_j)
        remaining.remove(best_j)
    return [names[j] for j in chosen]


# -- pipeline --------------------------------------------------------------------


def run_selection_pipeline(
    catalog: CounterCatalog,
    y,
    k: int = 6,
    min_rate: float = 1.0,
    min_cv: float = 0.01,
    shadow_rounds: int = 5,
    shadow_cutoff: float = 1.0,
    max_log10_shift: float = 2.0,
    seed: int = 0,
) -> SelectionReport:
    """Run all five steps in order; survivor sets are nested by construction."""
    report = SelectionReport()

    s1, r1 = filter_rare_low_variance(catalog, min_rate=min_rate, min_cv=min_cv)
    report.step_survivors[1] = s1
    report.eliminated.update({n: f"step1:{r}" for n, r in r1.items()})

    X = catalog.matrix(s1)
    s2, r2, warned = shadow_feature_elimination(
        X, y, s1, rounds=shadow_rounds, cutoff=shadow_cutoff, seed=seed
    )
    if warned:
        report.warnings.append("degenerate_targets:shadow_step_skipped")
    report.step_survivors[2] = s2
    report.eliminated.update({n: f"step2:{r}" for n, r in r2.items()})

    s3, r3 = distribution_shift_filter(catalog, s2, max_log10_shift=max_log10_shift)
    report.step_survivors[3] = s3
    report.eliminated.update({n: f"step3:{r}" for n, r in r3.items()})

    s4, r4 = exclude_problem_classes(catalog, s3)
    report.step_survivors[4] = s4
    report.eliminated.update({n: f"step4:{r}" for n, r in r4.items()})

    k_eff = min(k, len(s4))
    if k_eff < k:
        report.warnings.append(f"requested_k={k}_but_only_{len(s4)}_candidates")
    final = stepwise_select(catalog.matrix(s4), y, s4, k=k_eff, seed=seed) if k_eff else []
    report.step_survivors[5] = final
    for n in s4:
        if n not in final:
            report.eliminated[n] = "step5:not_among_top_k"
    report.final = final
    return report


# -- simulator-backed catalog -----------------------------------------------------


def default_probe_mixes():
    """Three co-scheduling mixes spanning calm to stormy BE bandwidth pressure."""
    return [
        ("mix0", [BEWorkloadSpec(name="calm", mbw_aggressiveness=0.25, counter_shift={"offcore_requests": 0.9})]),
        ("mix1", [BEWorkloadSpec(name="mid", mbw_aggressiveness=0.6)]),
        ("mix2", [BEWorkloadSpec(name="stormy", mbw_aggressiveness=0.95, counter_shift={"l2_code_reads": 1.15})]),
    ]


def build_decoy_catalog(node, hp_spec, be_mixes, samples_per_mix: int = 220, seed: int = 0, window_s: float = 50.0):
    """Profile the simulator across mixes and pad the catalog with decoys.

    `be_mixes` is a list of (mix_id, [BEWorkloadSpec]) pairs. Each sample draws
    a uniform random action and demand level, profiles a window, and records
    the window-mean counters plus the worst-case drop-rate label. Nine decoy
    counters are appended: rare, constant, two pure-noise, two cross-mix
    shifted, and three tagged problem classes. Returns (catalog, labels) with
    rows ordered by (mix, sample).
    """
    if len(be_mixes) < 2:
        raise ValueError("decoy catalog needs at least two mixes")
    rng = np.random.default_rng(seed)
    per_mix: dict[str, np.ndarray] = {}
    labels = []
    n_mixes = len(be_mixes)
    for mix_no, (mix_id, be_specs) in enumerate(be_mixes):
        env = SimEnv(node, [hp_spec], be_specs, seed=int(rng.integers(2**63)))
        sizes = env.node.branch_sizes
        rows = np.empty((samples_per_mix, len(COUNTER_NAMES)))
        for s in range(samples_per_mix):
            action = tuple(int(rng.integers(0, b)) for b in sizes)
            demand = float(rng.uniform(0.15, 0.95)) * hp_spec.peak_demand_pps
            res = env.profile(env.apply_action(action), window_s=window_s, demand_pps=demand)
            rows[s] = res.counters[0].as_array()
            labels.append(float(res.worst_qos[0]))
        per_mix[mix_id] = rows

    def informative(idx):
        return {m: per_mix[m][:, idx] for m in per_mix}

    def noise_like(scale, sigma):
        return {m: rng.lognormal(np.log(scale), sigma, size=samples_per_mix) for m in per_mix}

    def scaled(idx, factor, jitter=0.1):
        return {
            m: per_mix[m][:, idx] * factor * rng.lognormal(0.0, jitter, size=samples_per_mix) for m in per_mix
        }

    def shifted(idx, decades):
        out = {}
        for mix_no, m in enumerate(per_mix):
            mix_factor = 10.0 ** (decades * mix_no / max(n_mixes - 1, 1))
            out[m] = per_mix[m][:, idx] * mix_factor * rng.lognormal(0.0, 0.05, size=samples_per_mix)
        return out

    entries = [
        CatalogEntry(name, INFORMATIVE_TAGS[name], informative(i)) for i, name in enumerate(COUNTER_NAMES)
    ]
    entries += [
        CatalogEntry("machine_clears_rare", "general", noise_like(0.1, 0.5)),
        CatalogEntry("fixed_ref_cycles_const", "general", {m: np.full(samples_per_mix, 5e6) for m in per_mix}),
        CatalogEntry("uop_queue_noise_a", "general", noise_like(2e6, 1.0)),
        CatalogEntry("dtlb_walk_noise_b", "general", noise_like(8e5, 1.0)),
        CatalogEntry("shifted_mem_uops", "general", shifted(4, 3.0)),
        CatalogEntry("shifted_port_util", "general", shifted(2, 2.5)),
        CatalogEntry("rfo_snoop_requests", "coherency", scaled(4, 0.35)),
        CatalogEntry("avx512_fma_ops", "specialized-isa", scaled(0, 0.15)),
        CatalogEntry("lsd_delivered_uops", "nonstandard-component", scaled(0, 0.05)),
    ]
    return CounterCatalog(entries), np.asarray(labels)
