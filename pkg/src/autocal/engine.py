"""Fluid discrete-event simulator of jobs reading cached or remote input files.

Each job runs on one core and consumes its input files in order.  Input data
moves in ``buffer_size`` chunks through a short chain of I/O stages that
depends on where the file lives:

* pre-cached file: local HDD read;
* remote file, page cache on: WAN+LAN transfer, then a read from RAM;
* remote file, page cache off: WAN+LAN transfer, HDD write, HDD read.

Each stage of a job is a server working through chunks in order, so chunk
``c + 1`` can be in transfer while chunk ``c`` is being written.  Compute runs
on ``block_size`` blocks once all their bytes are delivered.  Every transfer
is a fluid flow; flows sharing a resource (WAN, site LAN, per-node HDD and
RAM) get max-min fair rates, recomputed at each flow start or completion.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Mapping

from .errors import ConfigurationError, GranularityError
from .fairshare import fill_classes
from .units import to_base

DEFAULT_RAM_BW = 1e9
DEFAULT_MAX_EVENTS = 2_000_000

RATE_FIELDS = ("core_speed", "disk_bw", "lan_bw", "wan_bw", "ram_bw")
_BASE_UNITS = {
    "core_speed": "flop/s",
    "disk_bw": "byte/s",
    "lan_bw": "byte/s",
    "wan_bw": "byte/s",
    "ram_bw": "byte/s",
}


@dataclass(frozen=True)
class PlatformConfig:
    core_speed: float
    disk_bw: float
    lan_bw: float
    wan_bw: float
    ram_bw: float = DEFAULT_RAM_BW
    page_cache_enabled: bool = False
    nodes: tuple = (12, 12, 24)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(c) for c in self.nodes))
        for name in RATE_FIELDS:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"platform {name} must be a positive finite rate, got {v!r}")
        if not self.nodes:
            raise ConfigurationError("platform needs at least one node")
        if any(c < 1 for c in self.nodes):
            raise ConfigurationError(f"every node needs at least one core, got {list(self.nodes)}")

    @property
    def total_cores(self) -> int:
        return sum(self.nodes)


@dataclass(frozen=True)
class WorkloadSpec:
    n_jobs: int
    files_per_job: int
    file_size: float
    flops_per_byte: float

    def __post_init__(self):
        if self.n_jobs < 0 or self.files_per_job < 0:
            raise ConfigurationError("job and file counts must be >= 0")
        if self.files_per_job > 0 and not (self.file_size > 0):
            raise ConfigurationError("file_size must be > 0 when jobs read files")
        if self.flops_per_byte < 0:
            raise ConfigurationError("flops_per_byte must be >= 0")


@dataclass(frozen=True)
class Scenario:
    platform: PlatformConfig
    workload: WorkloadSpec
    icd: float
    block_size: float
    buffer_size: float

    def __post_init__(self):
        if not (0.0 <= self.icd <= 1.0):
            raise ConfigurationError(f"icd must lie in [0, 1], got {self.icd}")
        if not (self.buffer_size >= 1):
            raise ConfigurationError(f"buffer_size must be >= 1 byte, got {self.buffer_size}")
        if not (self.block_size >= self.buffer_size):
            raise ConfigurationError(
                f"block_size ({self.block_size}) must be >= buffer_size ({self.buffer_size})"
            )

    def with_platform(self, **changes) -> "Scenario":
        return replace(self, platform=replace(self.platform, **changes))

    def with_icd(self, icd: float) -> "Scenario":
        return replace(self, icd=icd)

    def with_granularity(self, block_size: float, buffer_size: float) -> "Scenario":
        return replace(self, block_size=block_size, buffer_size=buffer_size)


@dataclass(frozen=True)
class JobRecord:
    job_id: int
    node_index: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Trace:
    jobs: tuple = ()
    event_count: int = 0

    @property
    def makespan(self) -> float:
        if not self.jobs:
            return 0.0
        return max(j.end for j in self.jobs) - min(j.start for j in self.jobs)


def _ceil_div(x: float, y: float) -> int:
    # 16e6 / 1.6e6 is 10.000000000000002 in floating point
    q = x / y
    r = round(q)
    if abs(q - r) <= 1e-9 * max(1.0, abs(q)):
        return int(r)
    return math.ceil(q)


def count_events(file_size: float, block_size: float, buffer_size: float) -> int:
    """Per-file event budget: one event per compute block plus one per chunk."""
    if block_size < 1 or buffer_size < 1:
        raise ConfigurationError("block and buffer sizes must be >= 1 byte")
    return _ceil_div(file_size, block_size) + _ceil_div(file_size, buffer_size)


def cached_file_count(icd: float, files_per_job: int) -> int:
    # round half up; Python's round() would send 2.5 to 2
    return int(math.floor(icd * files_per_job + 0.5))


def placement(nodes, n_jobs: int) -> list[tuple[int, int]]:
    """(node, slot) for every job: round-robin over nodes, one job per core.

    Cores are enumerated by taking core ``r`` of every node that has one,
    for r = 0, 1, ...; job ``i`` gets the ``i``-th core of that enumeration
    (wrapping around, so surplus jobs queue behind earlier ones).
    """
    cores = []
    for r in range(max(nodes)):
        for n, c in enumerate(nodes):
            if r < c:
                cores.append(n)
    return [(cores[i % len(cores)], i % len(cores)) for i in range(n_jobs)]


# Stage kinds
_NET, _DWRITE, _DREAD, _MREAD = 0, 1, 2, 3


class _Flow:
    __slots__ = ("fid", "remaining", "cls", "rate", "job", "kind", "item")

    def __init__(self, fid, amount, cls, rate, job, kind, item):
        self.fid = fid
        self.remaining = amount
        self.cls = cls
        self.rate = rate
        self.job = job
        self.kind = kind
        self.item = item


class _Job:
    """Pipeline state for one job: per-kind chunk queues plus the compute stage."""

    __slots__ = (
        "jid", "node", "slot", "start", "end", "paths", "sizes", "queues", "qpos", "busy",
        "stage", "block_of", "outstanding", "block_flops", "next_block", "computing",
    )

    def __init__(self, jid, node, slot, scenario: Scenario, n_cached: int):
        wl = scenario.workload
        s = float(wl.file_size)
        b = float(scenario.buffer_size)
        B = float(scenario.block_size)
        page_cache = scenario.platform.page_cache_enabled
        self.jid = jid
        self.node = node
        self.slot = slot
        self.start = 0.0
        self.end = None
        self.paths = []
        self.sizes = []
        self.block_of = []
        self.outstanding = []
        self.block_flops = []
        gates = {}
        for f in range(wl.files_per_job):
            if f < n_cached:
                path = (_DREAD,)
            elif page_cache:
                path = (_NET, _MREAD)
            else:
                path = (_NET, _DWRITE, _DREAD)
            n_blocks = _ceil_div(s, B)
            first_chunk = len(self.paths)
            for k in range(n_blocks):
                hi = min(s, (k + 1) * B)
                self.block_flops.append((hi - k * B) * wl.flops_per_byte)
                # chunks of one file finish their last stage in order, so a
                # block only waits on the chunk holding its final byte
                self.outstanding.append(1)
                gates[first_chunk + _ceil_div(hi, b) - 1] = len(self.outstanding) - 1
            for c in range(_ceil_div(s, b)):
                self.paths.append(path)
                self.sizes.append(min(s, (c + 1) * b) - c * b)
        self.block_of = [gates.get(c, -1) for c in range(len(self.paths))]
        self.queues = [[], [], [], []]
        for c, path in enumerate(self.paths):
            for kind in path:
                self.queues[kind].append(c)
        self.qpos = [0, 0, 0, 0]
        self.busy = [False, False, False, False]
        self.stage = [0] * len(self.paths)
        self.next_block = 0
        self.computing = False


class _Simulation:
    def __init__(self, scenario: Scenario, max_events: int):
        p = scenario.platform
        wl = scenario.workload
        self.scenario = scenario
        self.max_events = max_events
        n_nodes = len(p.nodes)
        # resources: 0 WAN, 1 LAN, then per node (disk, ram)
        self.capacities = [p.wan_bw, p.lan_bw]
        for _ in range(n_nodes):
            self.capacities += [p.disk_bw, p.ram_bw]
        # classes: 0 network path, then per node (disk, ram)
        self.class_resources = [(0, 1)]
        for n in range(n_nodes):
            self.class_resources += [(2 + 2 * n,), (3 + 2 * n,)]
        self.counts = [0] * len(self.class_resources)
        self.class_rates = [0.0] * len(self.class_resources)
        self._memo = {}
        self.core_speed = p.core_speed
        self.flows = []
        self.dirty = False
        self.now = 0.0
        self.events = 0
        self._fid = 0

        n_cached = cached_file_count(scenario.icd, wl.files_per_job)
        self.jobs = []
        self.slot_queue = {}
        for jid, (node, slot) in enumerate(placement(p.nodes, wl.n_jobs)):
            job = _Job(jid, node, slot, scenario, n_cached)
            self.jobs.append(job)
            self.slot_queue.setdefault(slot, []).append(job)

    def _class_for(self, job, kind):
        if kind == _NET:
            return 0
        if kind == _MREAD:
            return 2 + 2 * job.node
        return 1 + 2 * job.node

    def _start_flow(self, job, kind, item, amount):
        self._fid += 1
        if kind is None:
            flow = _Flow(self._fid, amount, -1, self.core_speed, job, None, item)
        else:
            cls = self._class_for(job, kind)
            flow = _Flow(self._fid, amount, cls, 0.0, job, kind, item)
            self.counts[cls] += 1
            self.dirty = True
        self.flows.append(flow)

    def _advance_job(self, job):
        paths = job.paths
        stage = job.stage
        for kind in (_NET, _DWRITE, _DREAD, _MREAD):
            if job.busy[kind]:
                continue
            q = job.queues[kind]
            pos = job.qpos[kind]
            if pos >= len(q):
                continue
            c = q[pos]
            if paths[c][stage[c]] == kind:
                job.busy[kind] = True
                self._start_flow(job, kind, c, job.sizes[c])
        if not job.computing and job.next_block < len(job.outstanding):
            k = job.next_block
            if job.outstanding[k] == 0:
                job.computing = True
                self._start_flow(job, None, k, job.block_flops[k])

    def _begin(self, job):
        job.start = self.now
        if not job.outstanding:
            job.end = self.now
            self._job_done(job)
            return
        self._advance_job(job)

    def _job_done(self, job):
        waiting = self.slot_queue[job.slot]
        if waiting:
            self._begin(waiting.pop(0))

    def _complete(self, flow):
        job = flow.job
        if flow.kind is None:
            job.computing = False
            job.next_block += 1
            if job.next_block == len(job.outstanding):
                job.end = self.now
                self._job_done(job)
                return
        else:
            kind = flow.kind
            c = flow.item
            self.counts[flow.cls] -= 1
            self.dirty = True
            job.busy[kind] = False
            job.qpos[kind] += 1
            job.stage[c] += 1
            if job.stage[c] == len(job.paths[c]) and job.block_of[c] >= 0:
                job.outstanding[job.block_of[c]] -= 1
        self._advance_job(job)

    def _reshare(self):
        key = tuple(self.counts)
        rates = self._memo.get(key)
        if rates is None:
            rates = fill_classes(self.class_resources, self.counts, self.capacities)
            self._memo[key] = rates
        for f in self.flows:
            if f.cls >= 0:
                f.rate = rates[f.cls]
        self.dirty = False

    def run(self) -> Trace:
        heads = [queue.pop(0) for queue in self.slot_queue.values()]
        for job in sorted(heads, key=lambda j: j.jid):
            self._begin(job)

        flows = self.flows
        while flows:
            if self.dirty:
                self._reshare()
            dt = min(f.remaining / f.rate for f in flows)
            limit = dt * (1 + 1e-12) + 1e-15
            done = []
            keep = []
            for f in flows:
                if f.remaining / f.rate <= limit:
                    done.append(f)
                else:
                    f.remaining -= f.rate * dt
                    keep.append(f)
            self.now += dt
            self.flows = flows = keep
            self.events += len(done)
            if self.events > self.max_events:
                raise GranularityError(
                    f"simulation exceeded {self.max_events} events; increase block/buffer sizes"
                )
            for f in done:
                self._complete(f)
            flows = self.flows

        records = tuple(
            JobRecord(j.jid, j.node, j.start, j.end if j.end is not None else j.start)
            for j in self.jobs
        )
        return Trace(records, self.events)


def estimate_events(scenario: Scenario) -> int:
    wl = scenario.workload
    if wl.n_jobs == 0 or wl.files_per_job == 0:
        return 0
    per_file = count_events(wl.file_size, scenario.block_size, scenario.buffer_size)
    # worst case path has three stages per chunk
    extra = 2 * _ceil_div(wl.file_size, scenario.buffer_size)
    return wl.n_jobs * wl.files_per_job * (per_file + extra)


def run_scenario(scenario: Scenario, seed: int = 0, max_events: int = DEFAULT_MAX_EVENTS) -> Trace:
    """Simulate ``scenario`` and return the per-job trace.

    The engine has no stochastic component; ``seed`` is accepted so callers
    can treat every simulator uniformly and is otherwise unused.
    """
    est = estimate_events(scenario)
    if est > max_events:
        raise GranularityError(
            f"scenario needs ~{est} events (cap {max_events}); "
            "increase block_size and/or buffer_size"
        )
    return _Simulation(scenario, max_events).run()


# ---------------------------------------------------------------------------
# JSON wire formats


def _rate(value, unit_hint, field_name):
    if isinstance(value, Mapping):
        try:
            return to_base(value["value"], value["unit"])
        except KeyError as exc:
            raise ConfigurationError(f"{field_name}: rate object needs value and unit") from exc
    if unit_hint:
        return to_base(value, unit_hint)
    return float(value)


def platform_from_dict(d: Mapping[str, Any]) -> PlatformConfig:
    """Parse a platform object.

    Rates are bare numbers in byte/s (flop/s for ``core_speed``) unless a
    ``units`` map names another unit, e.g. ``{"disk_bw": "bit/s"}``, or the
    rate is given as ``{"value": 1.15, "unit": "Gbit/s"}``.
    """
    units = d.get("units", {}) or {}
    try:
        kwargs = {}
        for name in RATE_FIELDS:
            if name in d:
                kwargs[name] = _rate(d[name], units.get(name), name)
            elif name != "ram_bw":
                raise ConfigurationError(f"platform is missing {name!r}")
        page_cache = d.get("page_cache", d.get("page_cache_enabled", False))
        return PlatformConfig(
            page_cache_enabled=bool(page_cache),
            nodes=tuple(int(c) for c in d.get("nodes", (12, 12, 24))),
            **kwargs,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"malformed platform: {exc}") from exc


def platform_to_dict(p: PlatformConfig) -> dict:
    return {
        "core_speed": p.core_speed,
        "disk_bw": p.disk_bw,
        "lan_bw": p.lan_bw,
        "wan_bw": p.wan_bw,
        "ram_bw": p.ram_bw,
        "page_cache": p.page_cache_enabled,
        "nodes": list(p.nodes),
        "units": dict(_BASE_UNITS),
    }


def scenario_from_dict(d: Mapping[str, Any]) -> Scenario:
    try:
        wl = d["workload"]
        workload = WorkloadSpec(
            n_jobs=int(wl["n_jobs"]),
            files_per_job=int(wl["files_per_job"]),
            file_size=float(wl["file_size"]),
            flops_per_byte=float(wl["flops_per_byte"]),
        )
        return Scenario(
            platform=platform_from_dict(d["platform"]),
            workload=workload,
            icd=float(d.get("icd", 0.0)),
            block_size=float(d["block_size"]),
            buffer_size=float(d["buffer_size"]),
        )
    except KeyError as exc:
        raise ConfigurationError(f"scenario is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"malformed scenario: {exc}") from exc


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "platform": platform_to_dict(s.platform),
        "workload": asdict(s.workload),
        "icd": s.icd,
        "block_size": s.block_size,
        "buffer_size": s.buffer_size,
    }


def trace_to_dict(t: Trace) -> dict:
    return {
        "jobs": [
            {"id": j.job_id, "node": j.node_index, "start": j.start, "end": j.end} for j in t.jobs
        ],
        "event_count": t.event_count,
    }


def trace_from_dict(d: Mapping[str, Any]) -> Trace:
    try:
        jobs = tuple(
            JobRecord(int(j["id"]), int(j["node"]), float(j["start"]), float(j["end"]))
            for j in d["jobs"]
        )
        count = int(d.get("event_count", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed trace: {exc}") from exc
    for j in jobs:
        if not (j.end >= j.start >= 0):
            raise ConfigurationError(f"job {j.job_id}: invalid times start={j.start} end={j.end}")
    return Trace(jobs, count)


def dumps_trace(t: Trace) -> str:
    return json.dumps(trace_to_dict(t), sort_keys=True)
