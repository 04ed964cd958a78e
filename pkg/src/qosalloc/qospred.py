"""Two-level worst-case QoS predictor.

A binary classifier routes each counter vector to one of two boosted
regressors: a fine-grained model trained only on the critical label range
(zero up to the classifier threshold) and a coarse-grained model trained on
the full range. Inputs are log10(1+x) transformed and standardized with
statistics frozen at training time. Includes offline training-data collection
against the simulator and leave-one-mix-out evaluation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boosting import BoostedModel, fit_boosted
from .simenv import COUNTER_NAMES, CounterVector, SimEnv

FORMAT_VERSION = 1


@dataclass
class PredictorConfig:
    threshold_dpps: float = 250.0
    classifier_estimators: int = 20
    classifier_depth: int = 2
    coarse_estimators: int = 20
    coarse_depth: int = 3
    fine_estimators: int = 30
    fine_depth: int = 3
    learning_rate: float = 0.2
    window_s: float = 100.0
    samples_per_mix: int = 500
    min_side_rows: int = 50
    include_allocation: bool = False
    demand_levels: tuple = (0.2, 0.35, 0.5, 0.65, 0.8, 0.95)  # fractions of peak demand
    # optional: fit the full-range regressor on log10(1+y) so a misclassified
    # in-range vector cannot inherit a catastrophic-scale output
    log_coarse_labels: bool = False

    def __post_init__(self):
        if self.threshold_dpps <= 0:
            raise ValueError("threshold_dpps must be positive")
        for n in (self.classifier_estimators, self.coarse_estimators, self.fine_estimators):
            if n < 1:
                raise ValueError("estimator counts must be >= 1")
        if len(self.demand_levels) < 3:
            raise ValueError("need at least three demand levels")


@dataclass
class ProfilingRow:
    mix: str
    demand_pps: float
    counters: np.ndarray  # six rates, COUNTER_NAMES order
    action: tuple  # five branch indices
    label_dpps: float
    mean_dpps: float = float("nan")  # window-mean drops; informational only


@dataclass
class ProfilingDataset:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def mixes(self) -> list:
        seen = []
        for r in self.rows:
            if r.mix not in seen:
                seen.append(r.mix)
        return seen

    def labels(self) -> np.ndarray:
        return np.array([r.label_dpps for r in self.rows])

    def features(self, include_allocation: bool = False) -> np.ndarray:
        X = np.stack([r.counters for r in self.rows])
        if include_allocation:
            A = np.array([r.action for r in self.rows], dtype=float)
            X = np.hstack([X, A])
        return X

    def subset(self, keep) -> "ProfilingDataset":
        return ProfilingDataset([self.rows[i] for i in keep])

    def to_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["mix", "demand_pps", *COUNTER_NAMES, "action_llc", "action_mbw", "action_hpcf", "action_becf", "action_ucf", "label_dpps"]
            )
            for r in self.rows:
                w.writerow(
                    [r.mix, f"{r.demand_pps:.10g}"]
                    + [f"{v:.10g}" for v in r.counters]
                    + list(r.action)
                    + [f"{r.label_dpps:.10g}"]
                )

    @classmethod
    def from_csv(cls, path) -> "ProfilingDataset":
        rows = []
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            expected = ["mix", "demand_pps", *COUNTER_NAMES, "action_llc", "action_mbw", "action_hpcf", "action_becf", "action_ucf", "label_dpps"]
            if header != expected:
                raise ValueError(f"bad dataset header: {header}")
            for row in r:
                rows.append(
                    ProfilingRow(
                        mix=row[0],
                        demand_pps=float(row[1]),
                        counters=np.array([float(v) for v in row[2:8]]),
                        action=tuple(int(v) for v in row[8:13]),
                        label_dpps=float(row[13]),
                    )
                )
        return cls(rows)


def collect_training_data(env_factory, mixes, samples_per_mix: int, window_s: float = 100.0, seed: int = 0, demand_levels=(0.25, 0.5, 0.75, 0.95)) -> ProfilingDataset:
    """Sample (allocation, demand) points per mix and label them with the
    worst-case drop rate observed over the profiling window.

    `env_factory(be_specs, seed)` must return a fresh SimEnv; `mixes` is a list
    of (mix_id, [BEWorkloadSpec]) pairs.
    """
    if not mixes:
        raise ValueError("at least one mix required")
    rng = np.random.default_rng(seed)
    rows = []
    for mix_id, be_specs in mixes:
        env: SimEnv = env_factory(be_specs, int(rng.integers(2**63)))
        sizes = env.node.branch_sizes
        peak = env.hp_specs[0].peak_demand_pps
        for _ in range(samples_per_mix):
            action = tuple(int(rng.integers(0, b)) for b in sizes)
            demand = float(rng.choice(demand_levels)) * peak
            res = env.profile(env.apply_action(action), window_s=window_s, demand_pps=demand)
            rows.append(
                ProfilingRow(
                    mix=mix_id,
                    demand_pps=demand,
                    counters=res.counters[0].as_array(),
                    action=action,
                    label_dpps=float(res.worst_qos[0]),
                    mean_dpps=float(res.mean_qos[0]),
                )
            )
    return ProfilingDataset(rows)


@dataclass
class NormStats:
    """log10(1+x) + standardization statistics frozen at training time."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "NormStats":
        Z = np.log10(1.0 + np.asarray(X, dtype=float))
        return cls(mean=Z.mean(axis=0), std=np.maximum(Z.std(axis=0), 1e-9))

    def transform(self, X: np.ndarray) -> np.ndarray:
        Z = np.log10(1.0 + np.asarray(X, dtype=float))
        return (Z - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=np.asarray(d["mean"]), std=np.asarray(d["std"]))


@dataclass
class TwoLevelPredictor:
    classifier: BoostedModel | None
    fine: BoostedModel | None
    coarse: BoostedModel
    stats: NormStats
    threshold_dpps: float
    include_allocation: bool = False
    fallback: bool = False  # single-regressor mode when one side lacked rows
    log_coarse: bool = True  # coarse model predicts log10(1+dpps)

    def _coarse_value(self, z) -> float:
        raw = self.coarse.predict_one(z)
        if self.log_coarse:
            return 10.0 ** min(raw, 12.0) - 1.0  # exponent guard; labels are dpps-scale
        return raw

    def _features(self, counters, action=None) -> np.ndarray:
        if isinstance(counters, CounterVector):
            x = counters.as_array()
        else:
            x = np.asarray(counters, dtype=float)
        if self.include_allocation:
            if action is None:
                raise ValueError("allocation-augmented predictor needs action indices")
            x = np.concatenate([x, np.asarray(action, dtype=float)])
        if not np.all(np.isfinite(x)):
            raise ValueError("counter inputs must be finite")
        return self.stats.transform(x.reshape(1, -1))

    def predict(self, counters, action=None) -> float:
        z = self._features(counters, action)[0]
        if self.fallback or self.classifier is None:
            return max(self._coarse_value(z), 0.0)
        p_above = self.classifier.predict_one(z)
        value = self._coarse_value(z) if p_above >= 0.5 else self.fine.predict_one(z)
        return max(value, 0.0)

    def route_is_fine(self, counters, action=None) -> bool:
        if self.fallback or self.classifier is None:
            return False
        z = self._features(counters, action)[0]
        return self.classifier.predict_one(z) < 0.5

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "two_level_qos_predictor",
            "threshold_dpps": self.threshold_dpps,
            "include_allocation": self.include_allocation,
            "fallback": self.fallback,
            "log_coarse": self.log_coarse,
            "stats": self.stats.to_dict(),
            "classifier": None if self.classifier is None else self.classifier.to_dict(),
            "fine": None if self.fine is None else self.fine.to_dict(),
            "coarse": self.coarse.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwoLevelPredictor":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported predictor format {d.get('format_version')!r}")
        return cls(
            classifier=None if d["classifier"] is None else BoostedModel.from_dict(d["classifier"]),
            fine=None if d["fine"] is None else BoostedModel.from_dict(d["fine"]),
            coarse=BoostedModel.from_dict(d["coarse"]),
            stats=NormStats.from_dict(d["stats"]),
            threshold_dpps=d["threshold_dpps"],
            include_allocation=d["include_allocation"],
            fallback=d["fallback"],
            log_coarse=d["log_coarse"],
        )

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "TwoLevelPredictor":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_predictor(data: ProfilingDataset, cfg: PredictorConfig, levels: int = 2) -> TwoLevelPredictor:
    """Train the classifier + fine/coarse regressors (or a one-level ablation).

    Falls back to a single coarse regressor when either side of the threshold
    holds fewer than cfg.min_side_rows rows.
    """
    if len(data) == 0:
        raise ValueError("empty training dataset")
    X_raw = data.features(cfg.include_allocation)
    y = data.labels()
    stats = NormStats.fit(X_raw)
    Z = stats.transform(X_raw)
    above = y > cfg.threshold_dpps

    coarse_y = np.log10(1.0 + y) if cfg.log_coarse_labels else y
    coarse = fit_boosted(Z, coarse_y, estimators=cfg.coarse_estimators, depth=cfg.coarse_depth, lr=cfg.learning_rate)
    one_level = TwoLevelPredictor(
        classifier=None,
        fine=None,
        coarse=coarse,
        stats=stats,
        threshold_dpps=cfg.threshold_dpps,
        include_allocation=cfg.include_allocation,
        fallback=True,
        log_coarse=cfg.log_coarse_labels,
    )
    if levels == 1:
        return one_level
    if min(int(above.sum()), int((~above).sum())) < cfg.min_side_rows:
        return one_level  # not enough rows to fit both sides

    classifier = fit_boosted(
        Z, above.astype(float), estimators=cfg.classifier_estimators, depth=cfg.classifier_depth,
        lr=cfg.learning_rate, objective="logistic",
    )
    fine = fit_boosted(
        Z[~above], y[~above], estimators=cfg.fine_estimators, depth=cfg.fine_depth, lr=cfg.learning_rate
    )
    return TwoLevelPredictor(
        classifier=classifier,
        fine=fine,
        coarse=coarse,
        stats=stats,
        threshold_dpps=cfg.threshold_dpps,
        include_allocation=cfg.include_allocation,
        fallback=False,
        log_coarse=cfg.log_coarse_labels,
    )


def predict_qos(pred: TwoLevelPredictor, counters, action=None) -> float:
    """Route through the classifier and clamp the regression output at zero."""
    return pred.predict(counters, action)


def f1_score(truth: np.ndarray, predicted: np.ndarray) -> float:
    tp = int(np.sum(truth & predicted))
    fp = int(np.sum(~truth & predicted))
    fn = int(np.sum(truth & ~predicted))
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn) if tp else 0.0


@dataclass
class FoldMetrics:
    mix: str
    n_rows: int
    f1: float
    critical_mae: float
    full_mae: float
    large_mispredictions: int


@dataclass
class LomoReport:
    folds: list
    threshold_dpps: float

    @property
    def mean_f1(self):
        vals = [f.f1 for f in self.folds if not np.isnan(f.f1)]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_critical_mae(self):
        vals = [f.critical_mae for f in self.folds if not np.isnan(f.critical_mae)]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def mean_full_mae(self):
        return float(np.mean([f.full_mae for f in self.folds]))

    @property
    def total_large_mispredictions(self):
        return int(sum(f.large_mispredictions for f in self.folds))

    def to_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mix", "n_rows", "f1", "critical_mae", "full_mae", "large_mispredictions"])
            for f in self.folds:
                w.writerow([f.mix, f.n_rows, f"{f.f1:.6g}", f"{f.critical_mae:.6g}", f"{f.full_mae:.6g}", f.large_mispredictions])
            w.writerow(["aggregate", sum(f.n_rows for f in self.folds), f"{self.mean_f1:.6g}",
                        f"{self.mean_critical_mae:.6g}", f"{self.mean_full_mae:.6g}", self.total_large_mispredictions])


def evaluate_leave_one_mix_out(data: ProfilingDataset, cfg: PredictorConfig, levels: int = 2, large_error_dpps: float = 50.0) -> LomoReport:
    """Per-mix folds: train on the other mixes, report F1 and MAE on the fold."""
    mixes = data.mixes
    if len(mixes) < 2:
        raise ValueError("leave-one-mix-out needs at least two mixes")
    folds = []
    for mix in mixes:
        test_idx = [i for i, r in enumerate(data.rows) if r.mix == mix]
        train_idx = [i for i, r in enumerate(data.rows) if r.mix != mix]
        model = train_predictor(data.subset(train_idx), cfg, levels=levels)
        test = data.subset(test_idx)
        y = test.labels()
        preds = np.array([model.predict(r.counters, r.action if cfg.include_allocation else None) for r in test.rows])
        above_true = y > cfg.threshold_dpps
        if model.fallback:
            f1 = float("nan")
        else:
            above_pred = np.array(
                [not model.route_is_fine(r.counters, r.action if cfg.include_allocation else None) for r in test.rows]
            )
            f1 = f1_score(above_true, above_pred)
        err = np.abs(preds - y)
        critical = y <= cfg.threshold_dpps
        folds.append(
            FoldMetrics(
                mix=mix,
                n_rows=len(test_idx),
                f1=f1,
                critical_mae=float(err[critical].mean()) if np.any(critical) else float("nan"),
                full_mae=float(err.mean()),
                large_mispredictions=int(np.sum(err > large_error_dpps)),
            )
        )
    return LomoReport(folds=folds, threshold_dpps=cfg.threshold_dpps)
