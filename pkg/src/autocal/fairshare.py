"""Max-min fair bandwidth allocation by progressive filling."""

from __future__ import annotations

from typing import Hashable, Iterable, Mapping, Sequence

from .errors import ConfigurationError

_TIE = 1e-12


def fill_classes(
    class_resources: Sequence[Sequence[int]],
    counts: Sequence[int],
    capacities: Sequence[float],
) -> list[float]:
    """Per-flow rate for each flow class.

    A class is a set of flows sharing the exact same resources; ``counts[k]``
    flows belong to class ``k``.  Flows of one class always receive equal
    rates under max-min fairness, so the fill runs over classes rather than
    individual flows.  Classes with a zero count get rate 0.
    """
    n = len(class_resources)
    rates = [0.0] * n
    remaining = list(capacities)
    active = [k for k in range(n) if counts[k] > 0]
    while active:
        load = {}
        for k in active:
            c = counts[k]
            for r in class_resources[k]:
                load[r] = load.get(r, 0) + c
        share = min(remaining[r] / l for r, l in load.items())
        if share < 0:
            share = 0.0
        limit = share * (1 + _TIE) + _TIE
        saturated = {r for r, l in load.items() if remaining[r] / l <= limit}
        still = []
        for k in active:
            res = class_resources[k]
            if any(r in saturated for r in res):
                rates[k] = share
                used = share * counts[k]
                for r in res:
                    remaining[r] -= used
            else:
                still.append(k)
        active = still
    return rates


def max_min_share(
    capacities: Mapping[Hashable, float], flows: Iterable[Iterable[Hashable]]
) -> list[float]:
    """Max-min fair rate of every flow.

    ``flows`` lists, per flow, the resources it traverses.  Returns rates in
    flow order.

    >>> max_min_share({"L1": 10.0, "L2": 2.0}, [["L1"], ["L1", "L2"]])
    [8.0, 2.0]
    """
    ids = {}
    caps = []
    for res, cap in capacities.items():
        if not (cap > 0):
            raise ConfigurationError(f"resource {res!r} has non-positive capacity {cap}")
        ids[res] = len(caps)
        caps.append(float(cap))

    class_of = {}
    class_resources = []
    counts = []
    flow_class = []
    for i, flow in enumerate(flows):
        key = []
        for res in flow:
            if res not in ids:
                raise ConfigurationError(f"flow {i} references unknown resource {res!r}")
            key.append(ids[res])
        if not key:
            raise ConfigurationError(f"flow {i} uses no resource")
        key = tuple(sorted(set(key)))
        k = class_of.get(key)
        if k is None:
            k = class_of[key] = len(class_resources)
            class_resources.append(key)
            counts.append(0)
        counts[k] += 1
        flow_class.append(k)

    per_class = fill_classes(class_resources, counts, caps)
    return [per_class[k] for k in flow_class]
