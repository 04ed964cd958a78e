import numpy as np
import pytest

from qosalloc.featsel import (
    CatalogEntry,
    CounterCatalog,
    SelectionReport,
    build_decoy_catalog,
    default_probe_mixes,
    distribution_shift_filter,
    exclude_problem_classes,
    filter_rare_low_variance,
    run_selection_pipeline,
    shadow_feature_elimination,
    stepwise_select,
)
from qosalloc.simenv import COUNTER_NAMES, HPWorkloadSpec, NodeConfig


def make_catalog(entries):
    return CounterCatalog([CatalogEntry(n, tag, samples) for n, tag, samples in entries])


def synth_informative(rng, n=300):
    """Six informative columns plus targets they jointly determine."""
    X = rng.normal(size=(n, 6)) + 2.0
    y = 2 * X[:, 0] + X[:, 1] ** 2 - X[:, 2] + 0.5 * X[:, 3] * X[:, 4] + X[:, 5] + 0.1 * rng.normal(size=n)
    return X, y


# -- step 1 ---------------------------------------------------------------


def test_constant_counter_dropped():
    cat = make_catalog(
        [
            ("const", "general", {"m0": np.full(50, 7.0)}),
            ("live", "general", {"m0": np.linspace(1, 100, 50)}),
        ]
    )
    survivors, reasons = filter_rare_low_variance(cat)
    assert survivors == ["live"]
    assert reasons["const"].startswith("low_variance")


def test_rare_counter_dropped():
    rng = np.random.default_rng(0)
    cat = make_catalog(
        [
            ("rare", "general", {"m0": rng.uniform(0.05, 0.15, 50)}),
            ("busy", "general", {"m0": rng.uniform(1e5, 2e5, 50)}),
        ]
    )
    survivors, reasons = filter_rare_low_variance(cat, min_rate=1.0)
    assert survivors == ["busy"]
    assert reasons["rare"].startswith("rare_event")


def test_informative_six_survive_step_one():
    cat, _ = build_decoy_catalog(NodeConfig(), HPWorkloadSpec(), default_probe_mixes(), samples_per_mix=60, seed=0)
    survivors, _ = filter_rare_low_variance(cat)
    assert set(COUNTER_NAMES) <= set(survivors)


# -- step 2 ---------------------------------------------------------------


def test_pure_noise_dropped_in_most_seeded_runs():
    dropped = 0
    runs = 20
    for seed in range(runs):
        rng = np.random.default_rng(seed)
        X, y = synth_informative(rng)
        X = np.hstack([X, rng.normal(size=(len(X), 1))])
        names = [f"f{i}" for i in range(6)] + ["noise"]
        survivors, _, warned = shadow_feature_elimination(X, y, names, seed=seed)
        assert not warned
        dropped += "noise" not in survivors
    assert dropped >= 0.95 * runs


def test_deterministic_driver_always_survives():
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        x0 = rng.normal(size=400)
        X = np.stack([x0, rng.normal(size=400), rng.normal(size=400)], axis=1)
        y = 3.0 * x0
        survivors, _, _ = shadow_feature_elimination(X, y, ["driver", "n1", "n2"], seed=seed)
        assert "driver" in survivors


def test_degenerate_targets_warn_and_pass_through():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(150, 1))
    survivors, reasons, warned = shadow_feature_elimination(X, np.zeros(150), ["only"])
    assert warned and survivors == ["only"] and reasons == {}


def test_shadow_requires_enough_rows():
    with pytest.raises(ValueError):
        shadow_feature_elimination(np.ones((10, 2)), np.ones(10), ["a", "b"])


# -- step 3 ---------------------------------------------------------------


def test_shift_filter_keeps_stable_and_mild_shift():
    rng = np.random.default_rng(2)
    stable = {m: rng.lognormal(10, 0.2, 40) for m in ("m0", "m1", "m2")}
    tenfold = {"m0": rng.lognormal(10, 0.1, 40), "m1": rng.lognormal(10, 0.1, 40) * 10.0}
    cat = make_catalog([("stable", "general", stable)])
    survivors, _ = distribution_shift_filter(cat)
    assert survivors == ["stable"]
    cat10 = make_catalog([("tenfold", "general", tenfold)])
    survivors, _ = distribution_shift_filter(cat10, max_log10_shift=2.0)
    assert survivors == ["tenfold"]  # exactly one decade is below the two-decade bar


def test_shift_filter_drops_large_shift():
    rng = np.random.default_rng(3)
    big = {"m0": rng.lognormal(5, 0.1, 40), "m1": rng.lognormal(5, 0.1, 40) * 1000.0}
    cat = make_catalog([("decoy", "general", big)])
    survivors, reasons = distribution_shift_filter(cat)
    assert survivors == []
    assert reasons["decoy"].startswith("distribution_shift")


def test_shift_filter_needs_two_mixes():
    cat = make_catalog([("x", "general", {"m0": np.ones(5)})])
    with pytest.raises(ValueError):
        distribution_shift_filter(cat)


# -- step 4 ---------------------------------------------------------------


def test_problem_classes_excluded():
    samples = {"m0": np.ones(5)}
    cat = make_catalog(
        [
            ("snoop", "coherency", samples),
            ("vec", "specialized-isa", samples),
            ("lsd", "nonstandard-component", samples),
            ("ipc", "fixed", samples),
            ("misc", "general", samples),
        ]
    )
    survivors, reasons = exclude_problem_classes(cat)
    assert survivors == ["ipc", "misc"]
    assert reasons["snoop"] == "problem_class:coherency"


def test_no_tagged_decoys_identity():
    cat = make_catalog([("a", "fixed", {"m0": np.ones(5)}), ("b", "general", {"m0": np.ones(5)})])
    survivors, reasons = exclude_problem_classes(cat)
    assert survivors == ["a", "b"] and reasons == {}


# -- step 5 ---------------------------------------------------------------


def test_stepwise_exhaustive_returns_all_ordered():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(150, 3))
    y = 5 * X[:, 1] + X[:, 0]
    order = stepwise_select(X, y, ["a", "b", "c"], k=3, seed=0)
    assert sorted(order) == ["a", "b", "c"]
    assert order[0] == "b"  # dominant driver picked first


def test_stepwise_finds_true_pair_first():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(200, 10))
    y = 4.0 * X[:, 3] + 2.0 * X[:, 7] + 0.05 * rng.normal(size=200)
    names = [f"f{i}" for i in range(10)]
    picked = stepwise_select(X, y, names, k=2, seed=0)
    assert set(picked) == {"f3", "f7"}
    assert picked[0] == "f3"


def test_stepwise_single_feature_and_bad_k():
    X = np.linspace(0, 1, 50).reshape(-1, 1)
    y = X[:, 0]
    assert stepwise_select(X, y, ["solo"], k=1) == ["solo"]
    with pytest.raises(ValueError):
        stepwise_select(X, y, ["solo"], k=0)
    with pytest.raises(ValueError):
        stepwise_select(X, y, ["solo"], k=2)


# -- pipeline ---------------------------------------------------------------


def test_pipeline_recovers_informative_six_and_nests():
    cat, y = build_decoy_catalog(NodeConfig(), HPWorkloadSpec(), default_probe_mixes(), samples_per_mix=220, seed=0)
    report = run_selection_pipeline(cat, y, k=6, seed=0)
    assert set(report.final) == set(COUNTER_NAMES)
    for step in range(1, 5):
        assert set(report.step_survivors[step + 1]) <= set(report.step_survivors[step])
    dropped = set(cat.names) - set(report.final)
    assert dropped == set(report.eliminated)
    for reason in report.eliminated.values():
        assert reason.split(":")[0] in {"step1", "step2", "step3", "step4", "step5"}


def test_report_round_trip(tmp_path):
    report = SelectionReport(step_survivors={1: ["a"], 2: ["a"]}, eliminated={"b": "step1:rare_event"}, final=["a"])
    path = tmp_path / "report.json"
    report.save(path)
    back = SelectionReport.load(path)
    assert back.step_survivors == report.step_survivors
    assert back.final == ["a"]


def test_catalog_csv_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    cat = make_catalog(
        [
            ("alpha", "fixed", {"m0": rng.uniform(1, 2, 10), "m1": rng.uniform(1, 2, 10)}),
            ("beta", "coherency", {"m0": rng.uniform(5, 9, 10), "m1": rng.uniform(5, 9, 10)}),
        ]
    )
    path = tmp_path / "catalog.csv"
    cat.to_csv(path)
    back = CounterCatalog.from_csv(path, class_tags={"alpha": "fixed", "beta": "coherency"})
    assert back.names == cat.names
    assert np.allclose(back.matrix(), cat.matrix())
    assert back.entry("beta").class_tag == "coherency"
