"""Platform presets, workloads and synthetic ground truth for the case study.

The four presets cross a slow/fast node cache (Linux page cache disabled or
enabled) with a slow/fast WAN interface (1 or 10 Gbit/s).  Every preset has
one compute site with three nodes of 12, 12 and 24 cores.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .engine import (
    RATE_FIELDS,
    PlatformConfig,
    Scenario,
    WorkloadSpec,
    run_scenario,
)
from .errors import ConfigurationError
from .metrics import GroundTruthSet, TruthEntry, node_averages, scenario_key
from .params import ParameterSpace, ParameterSpec, validate_point
from .units import to_base

NODES = (12, 12, 24)
LAN_BW = 10e9 / 8  # 10 Gbit/s site network
RAM_BW = 1e9  # 1 GB/s page cache
PARAM_LOW = 2.0**20
PARAM_HIGH = 2.0**36

ICD_VALUES = tuple(round(0.1 * i, 1) for i in range(11))
SUBSET_ICDS = (0.0, 0.3, 0.5, 0.7, 1.0)

# (B, b) pairs in bytes, coarsest first
GRANULARITIES = ((1e10, 1e8), (1e9, 1e7), (1e8, 1e6), (1e7, 1e5))


@dataclass(frozen=True)
class PlatformPreset:
    label: str
    wan_interface: float  # bit/s
    page_cache: bool
    nodes: tuple = NODES
    lan_bw: float = LAN_BW
    ram_bw: float = RAM_BW


PRESETS = {
    "SCFN": PlatformPreset("SCFN", 10e9, False),
    "FCFN": PlatformPreset("FCFN", 10e9, True),
    "SCSN": PlatformPreset("SCSN", 1e9, False),
    "FCSN": PlatformPreset("FCSN", 1e9, True),
}

# Manually calibrated values, in the units of default_space().  The WAN value
# for the fast-network platforms is the slow one scaled by the interface ratio.
BASELINE = {
    "SCSN": {"core_speed": 1970e6, "disk_bw": 17e6 * 8, "lan_bw": 10e9, "wan_bw": 1.15e9},
    "FCSN": {"core_speed": 1970e6, "disk_bw": 17e6 * 8, "lan_bw": 10e9, "wan_bw": 1.15e9},
    "SCFN": {"core_speed": 1970e6, "disk_bw": 17e6 * 8, "lan_bw": 10e9, "wan_bw": 11.5e9},
    "FCFN": {"core_speed": 1970e6, "disk_bw": 17e6 * 8, "lan_bw": 10e9, "wan_bw": 11.5e9},
}


def get_preset(label: str) -> PlatformPreset:
    try:
        return PRESETS[label.upper()]
    except KeyError:
        raise ConfigurationError(
            f"unknown platform {label!r}; valid labels: {', '.join(PRESETS)}"
        ) from None


def baseline_point(label: str) -> dict:
    return dict(BASELINE[get_preset(label).label])


def preset(label: str) -> PlatformConfig:
    """Platform template for a preset.

    Fixed fields (nodes, LAN, page cache speed, page cache flag) come from the
    preset; the calibratable rates are placeholders holding the baseline
    values and are expected to be overwritten with :func:`apply_point`.
    """
    pr = get_preset(label)
    base = BASELINE[pr.label]
    return PlatformConfig(
        core_speed=base["core_speed"],
        disk_bw=base["disk_bw"] / 8,
        lan_bw=pr.lan_bw,
        wan_bw=base["wan_bw"] / 8,
        ram_bw=pr.ram_bw,
        page_cache_enabled=pr.page_cache,
        nodes=pr.nodes,
    )


def default_space(include_ram: bool = False) -> ParameterSpace:
    specs = [
        ParameterSpec("core_speed", "flop/s", PARAM_LOW, PARAM_HIGH),
        ParameterSpec("disk_bw", "bit/s", PARAM_LOW, PARAM_HIGH),
        ParameterSpec("lan_bw", "bit/s", PARAM_LOW, PARAM_HIGH),
        ParameterSpec("wan_bw", "bit/s", PARAM_LOW, PARAM_HIGH),
    ]
    if include_ram:
        specs.append(ParameterSpec("ram_bw", "byte/s", PARAM_LOW, PARAM_HIGH))
    return ParameterSpace(specs)


# Workloads.  The full-scale one is the ground-truth workload; desk scale
# keeps its structure at a fraction of the cost.
FLOPS_PER_BYTE = 1.0
DESK_WORKLOAD = WorkloadSpec(n_jobs=6, files_per_job=4, file_size=16e6, flops_per_byte=FLOPS_PER_BYTE)
FULL_WORKLOAD = WorkloadSpec(n_jobs=48, files_per_job=20, file_size=427e6, flops_per_byte=FLOPS_PER_BYTE)
DESK_GRANULARITY = (16e6, 1.6e6)
DESK_TRUTH_GRANULARITY = (1e6, 1e5)
FULL_GRANULARITY = (1e8, 1e6)


def template_scenario(label: str, paper_scale: bool = False, granularity=None) -> Scenario:
    workload = FULL_WORKLOAD if paper_scale else DESK_WORKLOAD
    B, b = granularity or (FULL_GRANULARITY if paper_scale else DESK_GRANULARITY)
    return Scenario(preset(label), workload, 0.0, B, b)


def apply_point(scenario: Scenario, point: Mapping[str, float], space: ParameterSpace) -> Scenario:
    """Substitute calibrated parameter values (in their spec units) into a scenario."""
    changes = {}
    for spec in space:
        if spec.name not in RATE_FIELDS:
            raise ConfigurationError(
                f"parameter {spec.name!r} does not map to a platform rate ({', '.join(RATE_FIELDS)})"
            )
        changes[spec.name] = to_base(point[spec.name], spec.unit)
    return scenario.with_platform(**changes)


@dataclass(frozen=True)
class TruthConfig:
    preset: str
    hidden_point: dict
    icd_list: tuple = ICD_VALUES
    truth_granularity: tuple = DESK_TRUTH_GRANULARITY
    noise_stddev: float = 0.0
    noise_seed: int = 0
    workload: WorkloadSpec = DESK_WORKLOAD
    space: ParameterSpace = field(default_factory=default_space)

    def __post_init__(self):
        get_preset(self.preset)
        icds = [float(x) for x in self.icd_list]
        if any(not (0.0 <= x <= 1.0) for x in icds):
            raise ConfigurationError(f"icd values must lie in [0, 1]: {icds}")
        if len({round(x, 9) for x in icds}) != len(icds):
            raise ConfigurationError(f"icd values must be unique: {icds}")
        if self.noise_stddev < 0:
            raise ConfigurationError("noise_stddev must be >= 0")
        validate_point(self.space, self.hidden_point)

    def scenario(self) -> Scenario:
        B, b = self.truth_granularity
        base = Scenario(preset(self.preset), self.workload, 0.0, B, b)
        return apply_point(base, self.hidden_point, self.space)


def default_truth_config(label: str, **overrides) -> TruthConfig:
    """Truth config whose hidden point is the preset's baseline fixture."""
    return TruthConfig(preset=get_preset(label).label, hidden_point=baseline_point(label), **overrides)


def generate_ground_truth(config: TruthConfig) -> GroundTruthSet:
    """Simulate the hidden point for each ICD and perturb node averages.

    Each node average is multiplied by ``exp(N(0, noise_stddev))``; draws are
    taken in ICD order, then node order, from ``noise_seed``.
    """
    rng = np.random.default_rng(config.noise_seed)
    base = config.scenario()
    entries = []
    for icd in config.icd_list:
        trace = run_scenario(base.with_icd(float(icd)))
        avgs = node_averages(trace, len(base.platform.nodes))
        per_node = {}
        for node, value in avgs.per_node.items():
            if config.noise_stddev > 0:
                value = value * float(np.exp(rng.normal(0.0, config.noise_stddev)))
            per_node[node] = value
        entries.append(TruthEntry(scenario_key(config.preset, icd), replace(avgs, per_node=per_node)))
    return GroundTruthSet(entries)


def icd_subsets(icds: Sequence[float], size: int) -> list[tuple]:
    return list(combinations(icds, size))
