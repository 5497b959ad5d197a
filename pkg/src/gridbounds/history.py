"""Hourly net-injection history used for demand bounds and reactive-bound fits.

Values are stored per-unit; CSV files exchange kW/kVAr. Timestamps in CSV are
absolute hour indices from the start of the record (day*24 + hour); day types
derive from ``start_weekday`` (0 = Monday, weekends are days 5 and 6 of each
week). Missing hours appear as NaN and are written as absent rows.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

WEEKDAY = "weekday"
WEEKEND = "weekend"


@dataclass
class LoadHistory:
    consumer_ids: tuple[int, ...]
    start_weekday: int = 0
    p: np.ndarray = field(default=None)  # (n_days, 24, C) p.u.
    q: np.ndarray = field(default=None)

    def __post_init__(self):
        c = len(self.consumer_ids)
        if self.p is None:
            self.p = np.zeros((0, 24, c))
        if self.q is None:
            self.q = np.zeros((0, 24, c))

    @property
    def n_days(self) -> int:
        return self.p.shape[0]

    def day_type(self, day: int) -> str:
        return WEEKEND if (self.start_weekday + day) % 7 >= 5 else WEEKDAY

    def append_day(self, p_hourly: np.ndarray, q_hourly: np.ndarray) -> None:
        self.p = np.concatenate([self.p, p_hourly[None]], axis=0)
        self.q = np.concatenate([self.q, q_hourly[None]], axis=0)

    def to_csv(self, base_power_kva: float) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["node_id", "timestamp", "p_kw", "q_kvar"])
        for d in range(self.n_days):
            for h in range(24):
                for c, nid in enumerate(self.consumer_ids):
                    pv = self.p[d, h, c]
                    if np.isnan(pv):
                        continue
                    w.writerow([nid, d * 24 + h,
                                f"{pv * base_power_kva:.6f}",
                                f"{self.q[d, h, c] * base_power_kva:.6f}"])
        return buf.getvalue()

    @staticmethod
    def from_csv(text: str, consumer_ids: tuple[int, ...], base_power_kva: float,
                 start_weekday: int = 0) -> "LoadHistory":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            return LoadHistory(consumer_ids, start_weekday)
        n_days = max(int(r["timestamp"]) for r in rows) // 24 + 1
        c = len(consumer_ids)
        p = np.full((n_days, 24, c), np.nan)
        q = np.full((n_days, 24, c), np.nan)
        col = {nid: k for k, nid in enumerate(consumer_ids)}
        for r in rows:
            ts = int(r["timestamp"])
            k = col[int(r["node_id"])]
            p[ts // 24, ts % 24, k] = float(r["p_kw"]) / base_power_kva
            q[ts // 24, ts % 24, k] = float(r["q_kvar"]) / base_power_kva
        return LoadHistory(consumer_ids, start_weekday, p, q)
