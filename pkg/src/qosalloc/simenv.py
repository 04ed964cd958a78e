"""Discrete-time model of a compute node co-scheduling HP and BE workloads.

One or more high-priority (HP) packet-processing workloads share a node with
best-effort (BE) workloads under a partitioned resource allocation: last-level
cache ways, per-workload memory-bandwidth caps, separate HP/BE core
frequencies, and a node-wide uncore frequency. Each control step advances a
fixed number of one-second substeps and reports measured QoS (packet drops per
second), normalized BE throughput, normalized power, and synthetic
performance-counter rates for every HP workload.

The drop-rate model is a logistic saturation ramp in load ratio
(demand / effective capacity) with a step cliff multiplier once the HP falls
below a bandwidth or cache knee, plus Bernoulli-triggered lognormal transient
spikes whose amplitude grows with contention. All randomness flows from
per-environment seeded generators; identical (seed, config, action sequence)
produce bit-identical trajectories.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COUNTER_NAMES = (
    "instructions_retired",
    "unhalted_cycles",
    "frontend_stall_retired",
    "l2_code_reads",
    "offcore_requests",
    "offcore_buffer_full",
)

# Saturation half-constants for the capacity and BE-throughput curves.
_LLC_HALF = 0.25
_MBW_HALF = 0.35
_BE_HALF = 0.35


def _norm_sat(x, half):
    """Concave saturating response, 0 at x=0 and exactly 1 at x=1."""
    return x * (1.0 + half) / (x + half)


@dataclass
class NodeConfig:
    """Static platform description: allocatable units and level lists."""

    total_llc_ways: int = 8
    mbw_levels: tuple = (10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    core_freq_levels: tuple = (1.0, 1.4, 1.8, 2.0, 2.2, 2.5, 2.7)
    uncore_freq_levels: tuple = (1.6, 1.8, 2.0, 2.2, 2.4)
    control_interval_s: float = 3.0
    substeps_per_interval: int = 100
    min_ways_clamp: bool = False  # optional two-way-per-workload floor
    max_ipc_bound: float = 4.0
    counter_noise_sigma: float = 0.05

    def __post_init__(self):
        if self.total_llc_ways < 2:
            raise ValueError("total_llc_ways must be >= 2")
        if self.substeps_per_interval < 1:
            raise ValueError("substeps_per_interval must be >= 1")
        for name in ("mbw_levels", "core_freq_levels", "uncore_freq_levels"):
            levels = tuple(getattr(self, name))
            setattr(self, name, levels)
            if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
                raise ValueError(f"{name} must be strictly increasing")

    @property
    def branch_sizes(self):
        """Per-knob action counts: LLC, MBW, HPCF, BECF, UCF."""
        return (
            self.total_llc_ways,
            len(self.mbw_levels),
            len(self.core_freq_levels),
            len(self.core_freq_levels),
            len(self.uncore_freq_levels),
        )


@dataclass
class DiurnalParams:
    """Synthetic day-cycle demand: base + amplitude*sin + Gaussian noise."""

    base_pps: float = 1.3e6
    amplitude_pps: float = 9.0e5
    period_s: float = 86400.0
    phase_rad: float = 0.0
    noise_std_pps: float = 3.0e4

    def __post_init__(self):
        if self.period_s <= 0:
            raise ValueError("period_s must be positive")


def diurnal_demand(t_s, params: DiurnalParams, noise=0.0):
    """Demand (pps) at time t_s; `noise` is an externally drawn offset."""
    raw = (
        params.base_pps
        + params.amplitude_pps * np.sin(2.0 * np.pi * np.asarray(t_s, dtype=float) / params.period_s + params.phase_rad)
        + noise
    )
    return np.maximum(raw, 0.0)


@dataclass
class DemandTrace:
    """Per-second packet demand; either loaded from CSV or synthesized."""

    values: np.ndarray
    sample_period_s: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("trace values must be one-dimensional")
        if np.any(self.values < 0):
            raise ValueError("trace values must be non-negative")

    def __len__(self):
        return len(self.values)

    @classmethod
    def from_params(cls, params: DiurnalParams, n_seconds: int, seed: int) -> "DemandTrace":
        rng = np.random.default_rng(seed)
        noise = rng.normal(0.0, params.noise_std_pps, size=n_seconds) if params.noise_std_pps > 0 else 0.0
        t = np.arange(n_seconds, dtype=float)
        return cls(values=diurnal_demand(t, params, noise))

    @classmethod
    def from_csv(cls, path) -> "DemandTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:2] != ["t_s", "pps"]:
                raise ValueError(f"bad trace header in {path}: {header}")
            values = [float(row[1]) for row in reader]
        return cls(values=np.asarray(values))

    def to_csv(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", "pps"])
            for t, v in enumerate(self.values):
                writer.writerow([t, f"{v:.6f}"])


@dataclass
class HPWorkloadSpec:
    """A high-priority packet-processing workload and its contention shape."""

    qos_target_dpps: float = 1000.0
    demand_trace: DemandTrace | DiurnalParams | None = None
    cliff_mbw_knee: float = 0.6  # fraction of current MBW need
    cliff_llc_knee: int = 2  # ways; below this the drop rate explodes
    cliff_gain: float = 30.0
    transient_spike_prob: float = 0.02  # per substep
    transient_spike_scale: float = 900.0  # dpps
    spike_sigma: float = 1.0
    peak_demand_pps: float = 2.5e6
    mbw_need_peak: float = 0.85  # fraction of node MBW needed at peak demand
    ramp_width: float = 0.035  # logistic width of the saturation ramp
    capacity_margin: float = 1.5  # full-allocation capacity over peak demand

    def __post_init__(self):
        if self.qos_target_dpps <= 0:
            raise ValueError("qos_target_dpps must be positive")
        if not 0.0 <= self.transient_spike_prob <= 1.0:
            raise ValueError("transient_spike_prob must be in [0, 1]")
        if self.cliff_gain < 1.0:
            raise ValueError("cliff_gain must be >= 1")


@dataclass
class BEWorkloadSpec:
    """A best-effort workload profile: resource sensitivities and MBW appetite."""

    name: str
    llc_sensitivity: float = 0.5
    mbw_sensitivity: float = 0.5
    freq_sensitivity: float = 0.5
    mbw_aggressiveness: float = 0.6
    counter_shift: dict = field(default_factory=dict)  # per-counter multiplier

    def __post_init__(self):
        for v in (self.llc_sensitivity, self.mbw_sensitivity, self.freq_sensitivity):
            if v < 0:
                raise ValueError("sensitivities must be >= 0")
        if not 0.0 < self.mbw_aggressiveness <= 1.0:
            raise ValueError("mbw_aggressiveness must be in (0, 1]")


@dataclass(frozen=True)
class ResourceAllocation:
    """Concrete per-workload split of the four allocation knobs (single HP)."""

    hp_llc_ways: int
    be_llc_ways: int
    hp_mbw_cap: int
    be_mbw_cap: int
    hp_core_freq: float
    be_core_freq: float
    uncore_freq: float

    def validate(self, node: NodeConfig) -> None:
        if self.hp_llc_ways + self.be_llc_ways != node.total_llc_ways:
            raise ValueError("LLC partition does not cover the node")
        if self.hp_mbw_cap not in node.mbw_levels:
            raise ValueError(f"hp_mbw_cap {self.hp_mbw_cap} not a configured level")
        if self.hp_core_freq not in node.core_freq_levels or self.be_core_freq not in node.core_freq_levels:
            raise ValueError("core frequency not a configured level")
        if self.uncore_freq not in node.uncore_freq_levels:
            raise ValueError("uncore frequency not a configured level")


@dataclass(frozen=True)
class NodeAllocation:
    """Node-level allocation for any number of HP workloads.

    `hp_llc_ways`, `hp_mbw_cap`, `hp_core_freq` hold one entry per HP; the BE
    side and uncore frequency are shared.
    """

    hp_llc_ways: tuple
    hp_mbw_cap: tuple
    hp_core_freq: tuple
    be_llc_ways: int
    be_mbw_cap: int
    be_core_freq: float
    uncore_freq: float

    @property
    def n_hp(self):
        return len(self.hp_llc_ways)

    def validate(self, node: NodeConfig) -> None:
        if sum(self.hp_llc_ways) + self.be_llc_ways != node.total_llc_ways:
            raise ValueError("LLC partition does not cover the node")
        if self.be_llc_ways < 0:
            raise ValueError("negative BE LLC share")

    def hp_view(self, i: int) -> ResourceAllocation:
        return ResourceAllocation(
            hp_llc_ways=self.hp_llc_ways[i],
            be_llc_ways=self.be_llc_ways,
            hp_mbw_cap=self.hp_mbw_cap[i],
            be_mbw_cap=self.be_mbw_cap,
            hp_core_freq=self.hp_core_freq[i],
            be_core_freq=self.be_core_freq,
            uncore_freq=self.uncore_freq,
        )

    @classmethod
    def single(cls, alloc: ResourceAllocation) -> "NodeAllocation":
        return cls(
            hp_llc_ways=(alloc.hp_llc_ways,),
            hp_mbw_cap=(alloc.hp_mbw_cap,),
            hp_core_freq=(alloc.hp_core_freq,),
            be_llc_ways=alloc.be_llc_ways,
            be_mbw_cap=alloc.be_mbw_cap,
            be_core_freq=alloc.be_core_freq,
            uncore_freq=alloc.uncore_freq,
        )


def be_mbw_from_hp(hp_mbw_cap: int) -> int:
    """Overlapping-knob rule: high HP caps throttle the BE and vice versa."""
    return 110 - hp_mbw_cap


def allocation_from_indices(node: NodeConfig, llc: int, mbw: int, hpcf: int, becf: int, ucf: int) -> ResourceAllocation:
    """Map the five branch indices onto concrete levels (single HP)."""
    sizes = node.branch_sizes
    for name, idx, size in zip(("llc", "mbw", "hpcf", "becf", "ucf"), (llc, mbw, hpcf, becf, ucf), sizes):
        if not 0 <= idx < size:
            raise IndexError(f"{name} index {idx} out of range [0, {size})")
    hp_ways = llc
    if node.min_ways_clamp:
        hp_ways = min(max(hp_ways, 2), node.total_llc_ways - 2)
    hp_cap = node.mbw_levels[mbw]
    return ResourceAllocation(
        hp_llc_ways=hp_ways,
        be_llc_ways=node.total_llc_ways - hp_ways,
        hp_mbw_cap=hp_cap,
        be_mbw_cap=be_mbw_from_hp(hp_cap),
        hp_core_freq=node.core_freq_levels[hpcf],
        be_core_freq=node.core_freq_levels[becf],
        uncore_freq=node.uncore_freq_levels[ucf],
    )


@dataclass(frozen=True)
class CounterVector:
    """Synthetic per-HP performance-counter rates (events per second)."""

    instructions_retired: float
    unhalted_cycles: float
    frontend_stall_retired: float
    l2_code_reads: float
    offcore_requests: float
    offcore_buffer_full: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in COUNTER_NAMES], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "CounterVector":
        return cls(**dict(zip(COUNTER_NAMES, (float(v) for v in arr))))

    def validate(self, max_ipc_bound: float = 4.0) -> None:
        arr = self.as_array()
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("counter rates must be finite and non-negative")
        if self.instructions_retired > self.unhalted_cycles * max_ipc_bound:
            raise ValueError("instructions_retired exceeds the IPC bound")


@dataclass
class StepOutcome:
    """Everything the node reports for one control interval."""

    measured_qos: np.ndarray  # per HP: worst-substep drop rate (dpps)
    mean_qos: np.ndarray  # per HP: interval-mean drop rate (dpps)
    be_ips_norm: float
    power_norm: float
    counters: list  # CounterVector per HP
    hp_demand: np.ndarray  # per HP: interval-mean demand (pps)


@dataclass
class ProfileResult:
    """Offline profiling of one (allocation, demand) point over a window."""

    worst_qos: np.ndarray  # per HP: max substep dpps over the window
    mean_qos: np.ndarray
    counters: list  # CounterVector per HP, window means
    be_ips_norm: float
    power_norm: float
    substep_qos: list | None = None  # per HP: raw per-substep dpps recordings


class SimEnv:
    """Seedable co-scheduling node simulator advanced one control interval at a time."""

    def __init__(self, node: NodeConfig, hp_specs, be_specs, seed: int):
        if not hp_specs:
            raise ValueError("at least one HP workload spec is required")
        self.node = node
        self.hp_specs = list(hp_specs)
        self.be_specs = list(be_specs)
        self.seed = int(seed)
        ss = np.random.SeedSequence(self.seed)
        demand_ss, dyn_ss, prof_ss = ss.spawn(3)
        self._demand_ss = demand_ss
        self._rng = np.random.default_rng(dyn_ss)
        self._profile_rng = np.random.default_rng(prof_ss)
        self._demand: list[np.ndarray] = []
        self._t = 0  # substep cursor (seconds)
        self._n_substeps = 0
        self.reset()

    # -- lifecycle ---------------------------------------------------------

    def reset(self, n_intervals: int | None = None) -> StepOutcome:
        """Materialize demand and run one bootstrap interval at the default allocation."""
        n_intervals = n_intervals if n_intervals is not None else 4000
        need = (n_intervals + 1) * self.node.substeps_per_interval
        demand_rngs = np.random.SeedSequence(self.seed).spawn(3)[0].spawn(max(len(self.hp_specs), 1))
        self._demand = []
        for spec, child in zip(self.hp_specs, demand_rngs):
            trace = spec.demand_trace
            if trace is None:
                trace = DiurnalParams()
            if isinstance(trace, DiurnalParams):
                trace = DemandTrace.from_params(trace, need, seed=child.generate_state(1)[0])
            if len(trace) < need:
                raise ValueError(f"demand trace too short: {len(trace)} < {need} substeps")
            self._demand.append(trace.values)
        self._n_substeps = need
        self._t = 0
        # dynamics RNG restarts with the seed so reset() reproduces trajectories
        ss = np.random.SeedSequence(self.seed)
        _, dyn_ss, prof_ss = ss.spawn(3)
        self._rng = np.random.default_rng(dyn_ss)
        self._profile_rng = np.random.default_rng(prof_ss)
        return self.step(self.default_allocation())

    def switch_be(self, be_specs) -> None:
        """Swap the co-scheduled BE set without touching time or RNG state."""
        self.be_specs = list(be_specs)

    @property
    def time_s(self) -> int:
        return self._t

    @property
    def intervals_remaining(self) -> int:
        return (self._n_substeps - self._t) // self.node.substeps_per_interval

    def default_allocation(self) -> NodeAllocation:
        """All-maximum HP allocation: full cache, full bandwidth, top frequencies."""
        node = self.node
        n = len(self.hp_specs)
        ways = node.total_llc_ways - 1 if n == 1 else (node.total_llc_ways - 1) // n
        cap = node.mbw_levels[-1]
        return NodeAllocation(
            hp_llc_ways=(ways,) * n,
            hp_mbw_cap=(cap,) * n,
            hp_core_freq=(node.core_freq_levels[-1],) * n,
            be_llc_ways=node.total_llc_ways - ways * n,
            be_mbw_cap=be_mbw_from_hp(cap),
            be_core_freq=node.core_freq_levels[-1],
            uncore_freq=node.uncore_freq_levels[-1],
        )

    def apply_action(self, indices) -> ResourceAllocation:
        """Translate one 5-index action into a validated allocation (single HP)."""
        llc, mbw, hpcf, becf, ucf = indices
        alloc = allocation_from_indices(self.node, llc, mbw, hpcf, becf, ucf)
        alloc.validate(self.node)
        return alloc

    # -- dynamics ----------------------------------------------------------

    def step(self, alloc) -> StepOutcome:
        """Advance substeps_per_interval one-second substeps under `alloc`."""
        node_alloc = self._coerce(alloc)
        node_alloc.validate(self.node)
        n_sub = self.node.substeps_per_interval
        if self._t + n_sub > self._n_substeps:
            raise RuntimeError("demand trace exhausted; reset() with a longer episode")
        worst = np.empty(len(self.hp_specs))
        mean = np.empty(len(self.hp_specs))
        demand = np.empty(len(self.hp_specs))
        counters = []
        for i, spec in enumerate(self.hp_specs):
            d = self._demand[i][self._t : self._t + n_sub]
            dpps, ctr = self._hp_interval(spec, node_alloc.hp_view(i), d, self._rng)
            worst[i] = dpps.max()
            mean[i] = min(dpps.mean(), worst[i])  # guard summation roundoff
            demand[i] = d.mean()
            counters.append(ctr)
        self._t += n_sub
        return StepOutcome(
            measured_qos=worst,
            mean_qos=mean,
            be_ips_norm=self._be_ips(node_alloc),
            power_norm=self._power(node_alloc),
            counters=counters,
            hp_demand=demand,
        )

    def profile(self, alloc, window_s: float = 100.0, demand_pps=None) -> ProfileResult:
        """Offline oracle: hold demand and allocation fixed for `window_s` seconds.

        Uses a dedicated RNG stream so profiling does not perturb the main
        trajectory. Labels for predictor training come from `worst_qos`.
        """
        if window_s < self.node.control_interval_s:
            raise ValueError("window must cover at least one control interval")
        node_alloc = self._coerce(alloc)
        node_alloc.validate(self.node)
        n = int(round(window_s))
        worst = np.empty(len(self.hp_specs))
        mean = np.empty(len(self.hp_specs))
        counters = []
        series = []
        for i, spec in enumerate(self.hp_specs):
            if demand_pps is None:
                level = self._demand[i][min(self._t, self._n_substeps - 1)]
            elif np.ndim(demand_pps) == 0:
                level = float(demand_pps)
            else:
                level = float(demand_pps[i])
            d = np.full(n, level)
            dpps, ctr = self._hp_interval(spec, node_alloc.hp_view(i), d, self._profile_rng)
            worst[i] = dpps.max()
            mean[i] = min(dpps.mean(), worst[i])  # guard summation roundoff
            counters.append(ctr)
            series.append(dpps)
        return ProfileResult(
            worst_qos=worst,
            mean_qos=mean,
            counters=counters,
            be_ips_norm=self._be_ips(node_alloc),
            power_norm=self._power(node_alloc),
            substep_qos=series,
        )

    def worst_case_qos(self, alloc, window_s: float = 100.0, demand_pps=None):
        """Max per-substep drop rate over the window (scalar for one HP)."""
        res = self.profile(alloc, window_s=window_s, demand_pps=demand_pps)
        return float(res.worst_qos[0]) if len(self.hp_specs) == 1 else res.worst_qos

    # -- model internals ----------------------------------------------------

    def _coerce(self, alloc) -> NodeAllocation:
        if isinstance(alloc, NodeAllocation):
            return alloc
        if isinstance(alloc, ResourceAllocation):
            return NodeAllocation.single(alloc)
        raise TypeError(f"unsupported allocation type {type(alloc)!r}")

    def _be_pressure(self, view: ResourceAllocation) -> float:
        """Fraction of node MBW the BE side actually consumes."""
        if not self.be_specs:
            return 0.0
        aggr = max(b.mbw_aggressiveness for b in self.be_specs)
        return (view.be_mbw_cap / 100.0) * aggr

    def _capacity(self, spec: HPWorkloadSpec, view: ResourceAllocation):
        node = self.node
        be_use = self._be_pressure(view)
        llc_frac = view.hp_llc_ways / node.total_llc_ways
        f_llc = _norm_sat(llc_frac, _LLC_HALF)
        hp_mbw_eff = (view.hp_mbw_cap / 100.0) * (1.0 - 0.45 * be_use)
        f_mbw = _norm_sat(hp_mbw_eff, _MBW_HALF)
        f_cf = (view.hp_core_freq / node.core_freq_levels[-1]) ** 0.8
        f_ucf = (view.uncore_freq / node.uncore_freq_levels[-1]) ** 0.4
        cap = spec.peak_demand_pps * spec.capacity_margin * f_llc * f_mbw * f_cf * f_ucf
        return cap, hp_mbw_eff, f_llc

    def _hp_interval(self, spec: HPWorkloadSpec, view: ResourceAllocation, demand: np.ndarray, rng):
        """Per-substep drop rates and interval-mean counters for one HP."""
        node = self.node
        n = len(demand)
        cap, hp_mbw_eff, f_llc = self._capacity(spec, view)
        rho = demand / max(cap, 1e-9)
        base = demand / (1.0 + np.exp(-(rho - 1.0) / spec.ramp_width))

        need = spec.mbw_need_peak * demand / spec.peak_demand_pps
        below_mbw_knee = hp_mbw_eff < spec.cliff_mbw_knee * need
        below_llc_knee = view.hp_llc_ways < spec.cliff_llc_knee
        gain = np.where(below_mbw_knee | below_llc_knee, spec.cliff_gain, 1.0)

        mbw_ratio = need / (hp_mbw_eff + 1e-9)
        stress = 0.55 * np.minimum(rho, 2.0) + 0.45 * np.minimum(mbw_ratio, 2.2) / 1.1
        amp = spec.transient_spike_scale * 0.5 * stress**2
        if spec.transient_spike_prob > 0:
            hits = rng.random(n) < spec.transient_spike_prob
            mags = rng.lognormal(0.0, spec.spike_sigma, size=n)
            spikes = hits * mags * amp
        else:
            spikes = 0.0
        dpps = np.minimum(base * gain + spikes, demand)

        counters = self._counters(spec, view, demand, rho, mbw_ratio, f_llc, dpps, rng)
        return dpps, counters

    def _counters(self, spec, view, demand, rho, mbw_ratio, f_llc, dpps, rng):
        node = self.node
        d_frac = demand / spec.peak_demand_pps
        starve = 1.0 - f_llc
        busy = np.clip(rho, 0.05, 1.0)
        be_use = self._be_pressure(view)

        cycles = np.full_like(demand, view.hp_core_freq * 1e9)  # poll-mode cores never halt
        ipc = 0.15 + 2.2 * busy * (1.0 - 0.35 * starve) / (1.0 + 0.6 * np.maximum(mbw_ratio - 0.7, 0.0))
        instr = cycles * ipc
        stall = instr * 0.015 * (0.15 + 2.8 * starve)
        # code fetches ride on the uncore clock: the one observable for UCF
        ucf_slow = (node.uncore_freq_levels[-1] / view.uncore_freq) ** 1.5
        l2_code = 6.0e5 * (0.6 + 0.5 * starve) * ucf_slow * (0.3 + 0.7 * d_frac)
        offcore = 3.0e6 * d_frac * (1.0 + 1.2 * starve) + 1.2e6 * be_use
        squash = mbw_ratio**2 / (1.0 + np.exp(-(mbw_ratio - 0.75) / 0.08))
        buf_full = 2.0e5 * (d_frac + 0.05) * 4.0 * squash

        raw = np.stack([instr, cycles, stall, l2_code, offcore, buf_full], axis=1)
        sigma = node.counter_noise_sigma
        if sigma > 0:
            raw = raw * rng.lognormal(0.0, sigma, size=raw.shape)
        mean = raw.mean(axis=0)
        # shift models per-BE counter-distribution changes across co-schedules
        for b in self.be_specs:
            for name, factor in b.counter_shift.items():
                mean[COUNTER_NAMES.index(name)] *= factor
        mean[0] = min(mean[0], mean[1] * node.max_ipc_bound * 0.999)
        vec = CounterVector.from_array(mean)
        vec.validate(node.max_ipc_bound)
        return vec

    def _be_ips(self, alloc: NodeAllocation) -> float:
        if not self.be_specs:
            return 0.0
        node = self.node

        def g(x, s):
            s = min(max(s, 0.0), 1.0)
            return (1.0 - s) + s * _norm_sat(x, _BE_HALF)

        vals = []
        for b in self.be_specs:
            v = (
                g(alloc.be_llc_ways / node.total_llc_ways, b.llc_sensitivity)
                * g(alloc.be_mbw_cap / 100.0, b.mbw_sensitivity)
                * g(alloc.be_core_freq / node.core_freq_levels[-1], b.freq_sensitivity)
                * g(alloc.uncore_freq / node.uncore_freq_levels[-1], 0.5 * b.freq_sensitivity)
            )
            vals.append(v)
        return float(np.clip(np.mean(vals), 0.0, 1.0))

    def _power(self, alloc: NodeAllocation) -> float:
        node = self.node
        f_max = node.core_freq_levels[-1]
        u_max = node.uncore_freq_levels[-1]
        hp_f = float(np.mean(alloc.hp_core_freq))
        core = (hp_f**3 + alloc.be_core_freq**3) / (2.0 * f_max**3)
        uncore = alloc.uncore_freq**3 / u_max**3
        return float(np.clip(0.7 * core + 0.3 * uncore, 0.0, 1.0))


def init_env(node: NodeConfig, hp_specs, be_specs, seed: int) -> SimEnv:
    """Build a simulator in its defined initial state (all-max-HP bootstrap)."""
    return SimEnv(node, hp_specs, be_specs, seed)
