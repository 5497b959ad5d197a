"""Reliability, peak-load and cost metrics over simulation traces.

Voltage: violation when any sliding 1-hour mean deviates more than 5% from
nominal. Transformers: violation when any sliding 2-hour mean apparent power
exceeds 120% of rating. Windows slide one 15-minute step at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STEPS_PER_HOUR = 4
VOLTAGE_WINDOW = 4       # steps (1 hour)
TRANSFORMER_WINDOW = 8   # steps (2 hours)
VOLTAGE_LIMIT_PCT = 5.0
TRANSFORMER_LIMIT_PCT = 120.0


@dataclass
class ViolationReport:
    voltage_flags: np.ndarray      # (n_nodes,) bool
    voltage_worst_pct: np.ndarray  # worst windowed-mean deviation, percent
    transformer_flags: np.ndarray
    transformer_worst_pct: np.ndarray  # worst windowed-mean loading, percent of rating
    peak_kw: float
    cost_per_node: np.ndarray = field(default=None)

    @property
    def voltage_violation_pct(self) -> float:
        return 100.0 * float(self.voltage_flags.mean()) if self.voltage_flags.size else 0.0

    @property
    def transformer_overload_pct(self) -> float:
        return 100.0 * float(self.transformer_flags.mean()) if self.transformer_flags.size else 0.0


def _sliding_means(trace: np.ndarray, window: int) -> np.ndarray:
    """Means over every contiguous window, sliding by one step; (n_windows, cols)."""
    t = trace.shape[0]
    if t < window:
        raise ValueError(f"trace of {t} steps shorter than window {window}")
    cum = np.cumsum(np.vstack([np.zeros((1,) + trace.shape[1:]), trace]), axis=0)
    return (cum[window:] - cum[:-window]) / window


def voltage_violations(v_trace: np.ndarray, nominal: float = 1.0,
                       window: int = VOLTAGE_WINDOW):
    """Per-node (flag, worst windowed deviation %) from a (steps, nodes) trace."""
    means = _sliding_means(np.asarray(v_trace, dtype=float), window)
    dev_pct = 100.0 * np.abs(means - nominal) / nominal
    worst = dev_pct.max(axis=0)
    return worst > VOLTAGE_LIMIT_PCT, worst


def transformer_overloads(tau_trace: np.ndarray, ratings_sq: np.ndarray,
                          window: int = TRANSFORMER_WINDOW):
    """Per-transformer (flag, worst windowed loading %) from squared-flow trace."""
    apparent = np.sqrt(np.asarray(tau_trace, dtype=float))
    rating = np.sqrt(np.asarray(ratings_sq, dtype=float))
    means = _sliding_means(apparent, window)
    load_pct = 100.0 * means / rating
    worst = load_pct.max(axis=0)
    return worst > TRANSFORMER_LIMIT_PCT, worst


def electricity_cost(net_p: np.ndarray, tariff, base_power_kva: float,
                     delta_hours: float, supply_box=None,
                     discount: float = 0.8) -> np.ndarray:
    """Per-node cost in currency units over a (steps, nodes) net-injection trace.

    With a supply box, hours whose mean net injection stays inside that hour's
    bounds are billed at discount * rate (all four steps); exports are credited
    at the same effective rate. Without bounds, the full TOU rate applies.
    """
    net_p = np.asarray(net_p, dtype=float)
    steps, n = net_p.shape
    cost = np.zeros(n)
    for t in range(steps):
        hour = (t % 96) // STEPS_PER_HOUR
        rate = tariff.rate_of_step(t)
        eff = np.full(n, rate)
        if supply_box is not None:
            h0 = t - t % STEPS_PER_HOUR
            hour_mean = net_p[h0:h0 + STEPS_PER_HOUR].mean(axis=0)
            in_bounds = ((hour_mean >= supply_box.p_l[hour] - 1e-9)
                         & (hour_mean <= supply_box.p_u[hour] + 1e-9))
            eff = np.where(in_bounds, discount * rate, rate)
        cost += eff * net_p[t] * base_power_kva * delta_hours
    return cost


def peak_load(substation_p: np.ndarray, base_power_kva: float) -> float:
    """Max substation real power over the trace, kW."""
    return float(np.max(substation_p) * base_power_kva)
