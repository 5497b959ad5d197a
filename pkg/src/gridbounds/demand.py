"""Per-node hourly demand boxes from matching-day-type history.

Bounds rule: lower(h) = min(0, lowest matching-day injection at hour h),
upper(h) = max(1 kW equivalent, highest matching-day injection at hour h).
Matching days share the target day's weekday/weekend type within a hard
35-calendar-day lookback; a day with any missing hour for a node is skipped
entirely for that node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .history import LoadHistory

LOOKBACK_DAYS = 35  # "past 5 weeks"


class NoHistory(Exception):
    def __init__(self, node: int):
        self.node = node
        super().__init__(f"no usable matching-day history for node {node}")


@dataclass
class DemandBox:
    p_upper: np.ndarray  # (24, C) p.u.
    p_lower: np.ndarray  # (24, C) p.u.

    def hour(self, h: int) -> tuple[np.ndarray, np.ndarray]:
        return self.p_lower[h], self.p_upper[h]


def compute_demand_bounds(history: LoadHistory, target_day: int,
                          floor_pu: float) -> DemandBox:
    """Demand box for ``target_day`` (day index just past the history)."""
    if not floor_pu > 0:
        raise ValueError("floor_pu must be > 0")
    t_type = history.day_type(target_day)
    first = max(0, target_day - LOOKBACK_DAYS)
    days = [d for d in range(first, min(target_day, history.n_days))
            if history.day_type(d) == t_type]
    c = len(history.consumer_ids)
    p_upper = np.empty((24, c))
    p_lower = np.empty((24, c))
    for k in range(c):
        usable = [d for d in days if not np.isnan(history.p[d, :, k]).any()]
        if not usable:
            raise NoHistory(history.consumer_ids[k])
        block = history.p[usable, :, k]  # (n_usable, 24)
        p_lower[:, k] = np.minimum(0.0, block.min(axis=0))
        p_upper[:, k] = np.maximum(floor_pu, block.max(axis=0))
    return DemandBox(p_upper, p_lower)
