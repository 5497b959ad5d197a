"""Time-of-use tariff with peak / part-peak / off-peak periods."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

STEPS_PER_DAY = 96
STEPS_PER_HOUR = 4

PEAK = "peak"
PART = "part_peak"
OFF = "off_peak"


@dataclass(frozen=True)
class TOUTariff:
    peak_hours: tuple[int, int]                   # [start, end) hour of day
    part_peak_hours: tuple[tuple[int, int], ...]  # list of [start, end) ranges
    rates: dict = field(default_factory=lambda: {PEAK: 0.55, PART: 0.26, OFF: 0.20})

    def period_of_hour(self, hour: int) -> str:
        if self.peak_hours[0] <= hour < self.peak_hours[1]:
            return PEAK
        for s, e in self.part_peak_hours:
            if s <= hour < e:
                return PART
        return OFF

    def period_of_step(self, t: int) -> str:
        return self.period_of_hour((t % STEPS_PER_DAY) // STEPS_PER_HOUR)

    def rate_of_step(self, t: int) -> float:
        return self.rates[self.period_of_step(t)]

    def rate_of_hour(self, hour: int) -> float:
        return self.rates[self.period_of_hour(hour)]

    def peak_steps(self) -> tuple[int, int]:
        """Peak window as within-day step indices [start, end)."""
        return (self.peak_hours[0] * STEPS_PER_HOUR,
                self.peak_hours[1] * STEPS_PER_HOUR)

    def cheapest_rate(self) -> float:
        return min(self.rates.values())

    def to_dict(self) -> dict:
        return {"peak_hours": list(self.peak_hours),
                "part_peak_hours": [list(x) for x in self.part_peak_hours],
                "rates": dict(self.rates)}

    @staticmethod
    def from_dict(d: dict) -> "TOUTariff":
        return TOUTariff(tuple(d["peak_hours"]),
                         tuple(tuple(x) for x in d["part_peak_hours"]),
                         dict(d["rates"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "TOUTariff":
        return TOUTariff.from_dict(json.loads(text))
