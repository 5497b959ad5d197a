"""Hourly upper/lower reactive-power bounds as linear functions of real power.

One scalar quantile regression per consumer node and hour of day, fitted by
pinball loss at the requested percentiles (0.90 upper / 0.10 lower by
default), so the bound coverage matches the percentile semantics directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .history import LoadHistory


class InsufficientData(Exception):
    def __init__(self, node: int, hour: int, count: int, needed: int):
        self.node = node
        self.hour = hour
        super().__init__(f"node {node}, hour {hour}: {count} samples < {needed} required")


@dataclass
class ReactiveBoundModel:
    """Diagonal per-node maps q = slope*p + intercept, indexed by hour of day."""
    slope_u: np.ndarray  # (24, C)
    icpt_u: np.ndarray
    slope_l: np.ndarray
    icpt_l: np.ndarray

    def upper(self, hour: int, p: np.ndarray) -> np.ndarray:
        return self.slope_u[hour] * p + self.icpt_u[hour]

    def lower(self, hour: int, p: np.ndarray) -> np.ndarray:
        return self.slope_l[hour] * p + self.icpt_l[hour]

    def hour_maps(self, hour: int):
        return (self.slope_u[hour], self.icpt_u[hour],
                self.slope_l[hour], self.icpt_l[hour])

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k).tolist() for k in
                           ("slope_u", "icpt_u", "slope_l", "icpt_l")}, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ReactiveBoundModel":
        d = json.loads(text)
        return ReactiveBoundModel(**{k: np.array(v) for k, v in d.items()})


def pinball_fit(p: np.ndarray, q: np.ndarray, tau: float,
                slope_penalty: float = 0.02) -> tuple[float, float]:
    """Quantile regression q ~ slope*p + intercept at quantile ``tau``.

    Exact LP formulation: residual split u - v with pinball weights, plus a
    small L1 penalty on the slope. The penalty is negligible when the p
    samples spread enough to identify the slope, but pins it near zero for
    tightly clustered hours, where an unpenalized fit extrapolates wildly at
    the p = 0 corner the supply-box program always evaluates.
    Returns (slope, intercept).
    """
    n = p.size
    # variables: [alpha, beta_pos, beta_neg, u(n), v(n)]
    cost = np.concatenate([[0.0, slope_penalty, slope_penalty],
                           np.full(n, tau), np.full(n, 1.0 - tau)])
    A_eq = np.zeros((n, 3 + 2 * n))
    A_eq[:, 0] = 1.0
    A_eq[:, 1] = p
    A_eq[:, 2] = -p
    A_eq[np.arange(n), 3 + np.arange(n)] = 1.0
    A_eq[np.arange(n), 3 + n + np.arange(n)] = -1.0
    bounds = [(None, None)] + [(0, None)] * (2 + 2 * n)
    res = linprog(cost, A_eq=A_eq, b_eq=q, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"quantile regression LP failed: {res.message}")
    return float(res.x[1] - res.x[2]), float(res.x[0])


def fit_reactive_bounds(history: LoadHistory, upper_pct: float = 0.90,
                        lower_pct: float = 0.10,
                        min_samples: int = 20) -> ReactiveBoundModel:
    """Fit per node-hour upper/lower reactive maps from (p, q) history."""
    c = len(history.consumer_ids)
    out = {k: np.zeros((24, c)) for k in ("slope_u", "icpt_u", "slope_l", "icpt_l")}
    for k in range(c):
        for h in range(24):
            p = history.p[:, h, k]
            q = history.q[:, h, k]
            keep = ~(np.isnan(p) | np.isnan(q))
            p, q = p[keep], q[keep]
            if p.size < min_samples:
                raise InsufficientData(history.consumer_ids[k], h, p.size, min_samples)
            su, iu = pinball_fit(p, q, upper_pct)
            sl, il = pinball_fit(p, q, lower_pct)
            out["slope_u"][h, k], out["icpt_u"][h, k] = su, iu
            out["slope_l"][h, k], out["icpt_l"][h, k] = sl, il
    return ReactiveBoundModel(**out)
