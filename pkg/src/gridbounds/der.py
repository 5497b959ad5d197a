"""DER unit models: stationary storage, EV charging, flexible thermal load.

Shared dynamics Q(t) = Q(t-1) + eff_c*delta*c - eff_d*delta*d, with d = 0 for
EVs and thermal and eff_c = 1 for thermal. Powers are p.u., energies p.u.-hours
on the network base. Each unit owns its state; exactly one controller mutates
a given fleet.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_TOL = 1e-8
STEPS_PER_DAY = 96


class BoundsViolation(Exception):
    pass


@dataclass
class StorageUnit:
    capacity: float          # p.u.-hours
    c_max: float             # p.u.
    d_max: float
    eff_c: float
    eff_d: float
    q: float = 0.0

    kind = "storage"

    def power_limits(self, t: int) -> tuple[float, float]:
        return self.c_max, self.d_max

    def soc_limits(self, t: int) -> tuple[float, float]:
        return 0.0, self.capacity

    def required_final(self, t: int):
        return None


@dataclass
class EVCharger:
    c_max: float
    windows: tuple[tuple[int, int, float], ...]  # (start, end, energy), steps inclusive
    eff_c: float = 1.0
    eff_d: float = 0.0
    d_max: float = 0.0
    q: float = 0.0
    delta: float = 0.25

    kind = "ev"

    def window_at(self, t: int):
        for w in self.windows:
            if w[0] <= t <= w[1]:
                return w
        return None

    def begin_step(self, t: int) -> None:
        """Reset the session charge at every window start (vehicle arrives empty)."""
        w = self.window_at(t)
        if w is not None and t == w[0]:
            self.q = 0.0

    def power_limits(self, t: int) -> tuple[float, float]:
        return (self.c_max if self.window_at(t) else 0.0), 0.0

    def soc_limits(self, t: int) -> tuple[float, float]:
        w = self.window_at(t)
        if w is None:
            return self.q, self.q  # parked elsewhere; state frozen
        start, end, energy = w
        deliver_rest = self.eff_c * self.c_max * self.delta * (end - t)
        q_min = max(0.0, energy - deliver_rest)
        q_max = min(energy, self.eff_c * self.c_max * self.delta * (t - start + 1))
        return q_min, q_max

    def required_final(self, t: int):
        w = self.window_at(t)
        if w is not None and t == w[1]:
            return w[2]
        return None


@dataclass
class ThermalFlexLoad:
    u_base: np.ndarray       # baseline power per global step (p.u.)
    phi: float               # shiftable fraction of the day's thermal energy
    u_max: float
    delta: float = 0.25
    q: float = 0.0           # cumulative energy today
    _state_day: int = field(default=0, repr=False)
    _cache_day: int = field(default=-1, repr=False)
    _cum: np.ndarray = field(default=None, repr=False)

    kind = "thermal"
    eff_c = 1.0
    eff_d = 0.0
    c_max = None  # varies; use power_limits
    d_max = 0.0

    def day_cum(self, t: int) -> np.ndarray:
        """Cumulative baseline energy over t's day (length T_d + 1); pure."""
        day = t // STEPS_PER_DAY
        if day != self._cache_day:
            sl = self.u_base[day * STEPS_PER_DAY:(day + 1) * STEPS_PER_DAY]
            self._cum = np.concatenate([[0.0], np.cumsum(sl) * self.delta])
            self._cache_day = day
        return self._cum

    def begin_step(self, t: int) -> None:
        day = t // STEPS_PER_DAY
        if day != self._state_day:
            self.q = 0.0
            self._state_day = day

    def power_limits(self, t: int) -> tuple[float, float]:
        return self.u_max, 0.0

    def soc_limits(self, t: int) -> tuple[float, float]:
        k = t % STEPS_PER_DAY + 1  # within-day step, 1-based
        return thermal_envelope_from_cum(self.day_cum(t), k, self.phi,
                                         self.u_max, self.delta)

    def required_final(self, t: int):
        return None


def thermal_envelope_from_cum(cum: np.ndarray, k: int, phi: float, u_max: float,
                              delta: float) -> tuple[float, float]:
    """Thermal energy envelope at within-day step k (1..T_d).

    Upper: baseline shifted up by phi * daily energy, capped at the day total.
    Lower: baseline shifted down, floored at 0 and at what must already be
    consumed for the remaining power capacity to reach the day total.
    """
    t_d = len(cum) - 1
    q_day = cum[t_d]
    q_base = cum[k]
    q_max = min(q_base + phi * q_day, q_day)
    q_min = max(0.0, q_base - phi * q_day, q_day - (t_d - k) * delta * u_max)
    return q_min, q_max


def thermal_envelope(load: ThermalFlexLoad, t: int) -> tuple[float, float]:
    return load.soc_limits(t)


def step_dynamics(unit, c: float, d: float, delta: float, t: int | None = None) -> float:
    """Apply one step of the shared DER dynamics; validates limits exactly.

    Returns the new state of energy. Raises BoundsViolation if the commanded
    powers or the post-state leave their envelopes (beyond float dust, which
    is clamped). Pass the step index ``t`` for units whose limits are
    time-varying (EV windows, thermal day envelope).
    """
    if c < -_TOL or d < -_TOL:
        raise BoundsViolation(f"{unit.kind}: negative power c={c} d={d}")
    if t is not None:
        c_cap, d_cap = unit.power_limits(t)
        q_min, q_max = unit.soc_limits(t)
    else:
        c_cap = getattr(unit, "c_max", None)
        d_cap = getattr(unit, "d_max", None)
        q_min, q_max = 0.0, getattr(unit, "capacity", np.inf)
    if c_cap is not None and c > c_cap + _TOL:
        raise BoundsViolation(f"{unit.kind}: charge {c} above limit {c_cap}")
    if d_cap is not None and d > d_cap + _TOL:
        raise BoundsViolation(f"{unit.kind}: discharge {d} above limit {d_cap}")
    q_new = unit.q + unit.eff_c * delta * max(c, 0.0) - unit.eff_d * delta * max(d, 0.0)
    if q_new < q_min - _TOL or q_new > q_max + _TOL:
        raise BoundsViolation(
            f"{unit.kind}: state {q_new:.6g} outside [{q_min:.6g}, {q_max:.6g}]")
    unit.q = min(max(q_new, q_min), q_max)
    return unit.q
