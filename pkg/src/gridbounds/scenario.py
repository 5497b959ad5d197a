"""Seeded scenario generation: load profiles, PV, storage, EVs, flexible
thermal loads and the TOU tariff for a given network.

Load shapes are sinusoid/bump composites plus seeded noise with weekday and
weekend variants, scaled so each node's mean daily peak matches its
ref_peak_kw. PV is a clear-sky bell with daily cloud factors, sized by an
energy ratio drawn in [0.4, 0.9]. Storage exists only at PV nodes (capacity
0.4-0.8 of mean daily PV energy, c-rate 0.5, round-trip efficiency 0.86). EVs
come from a two-block home-evening / work-daytime window generator and are
added until the EV energy share reaches the requested penetration. The tariff
peak window is centered on the most frequent network peak hour.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .der import EVCharger, StorageUnit, ThermalFlexLoad
from .network import Network
from .tariff import TOUTariff

STEPS_PER_DAY = 96
EV_CHARGER_KW = 6.3
ROUND_TRIP_EFF = 0.86
THERMAL_SHARE = 0.35  # fraction of the baseline shape that is thermal


@dataclass
class Knobs:
    pv: float = 0.0        # fraction of consumer nodes with PV
    ev: float = 0.0        # EV energy as a share of total network energy
    storage: float = 0.0   # fraction of PV nodes with storage
    phi: float = 0.0       # shiftable fraction of thermal energy

    def to_dict(self):
        return {"pv": self.pv, "ev": self.ev, "storage": self.storage, "phi": self.phi}

    @staticmethod
    def from_dict(d):
        return Knobs(**d)


@dataclass
class Scenario:
    network: Network
    days: int
    seed: int
    start_weekday: int
    knobs: Knobs
    tariff: TOUTariff
    base_load: np.ndarray      # (steps, C) nonneg uncontrollable real, p.u.
    thermal_base: np.ndarray   # (steps, C) nonneg thermal baseline, p.u.
    pv_gen: np.ndarray         # (steps, C) nonneg PV generation, p.u.
    pf_tan: np.ndarray         # (C,) tan(acos(pf)) of the uncontrollable load
    storage_specs: dict = field(default_factory=dict)  # node -> dict
    ev_specs: dict = field(default_factory=dict)       # node -> list of dicts
    thermal_specs: dict = field(default_factory=dict)  # node -> dict

    THERMAL_TAN = math.tan(math.acos(0.92))

    @property
    def n_steps(self) -> int:
        return self.base_load.shape[0]

    def has_thermal_units(self) -> bool:
        return bool(self.thermal_specs)

    def uncontrollable(self) -> tuple[np.ndarray, np.ndarray]:
        """(p, q) uncontrollable injections, excluding any unitized thermal."""
        p = self.base_load - self.pv_gen
        q = self.base_load * self.pf_tan
        if not self.has_thermal_units():
            p = p + self.thermal_base
            q = q + self.thermal_base * self.THERMAL_TAN
        return p, q

    def build_fleets(self) -> dict[int, list]:
        """Fresh DER units (stateful) for one simulation run."""
        delta = self.network.timestep_hours
        fleets: dict[int, list] = {nid: [] for nid in self.network.consumer_ids}
        for nid, spec in self.storage_specs.items():
            fleets[nid].append(StorageUnit(
                capacity=spec["capacity"], c_max=spec["c_max"], d_max=spec["d_max"],
                eff_c=spec["eff_c"], eff_d=spec["eff_d"], q=0.0))
        for nid, evs in self.ev_specs.items():
            for spec in evs:
                fleets[nid].append(EVCharger(
                    c_max=spec["c_max"],
                    windows=tuple(tuple(w) for w in spec["windows"]),
                    eff_c=spec.get("eff_c", 1.0), delta=delta))
        for nid, spec in self.thermal_specs.items():
            k = self.network.consumer_index[nid]
            fleets[nid].append(ThermalFlexLoad(
                u_base=self.thermal_base[:, k].copy(), phi=spec["phi"],
                u_max=spec["u_max"], delta=delta))
        return fleets

    def to_json(self) -> str:
        doc = {
            "network": json.loads(self.network.to_json()),
            "days": self.days,
            "seed": self.seed,
            "start_weekday": self.start_weekday,
            "knobs": self.knobs.to_dict(),
            "tariff": self.tariff.to_dict(),
            "pf_tan": np.round(self.pf_tan, 9).tolist(),
            "base_load": np.round(self.base_load, 9).tolist(),
            "thermal_base": np.round(self.thermal_base, 9).tolist(),
            "pv_gen": np.round(self.pv_gen, 9).tolist(),
            "storage_specs": {str(k): v for k, v in self.storage_specs.items()},
            "ev_specs": {str(k): v for k, v in self.ev_specs.items()},
            "thermal_specs": {str(k): v for k, v in self.thermal_specs.items()},
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Scenario":
        doc = json.loads(text)
        return Scenario(
            network=Network.from_json(json.dumps(doc["network"])),
            days=doc["days"], seed=doc["seed"],
            start_weekday=doc["start_weekday"],
            knobs=Knobs.from_dict(doc["knobs"]),
            tariff=TOUTariff.from_dict(doc["tariff"]),
            base_load=np.array(doc["base_load"]),
            thermal_base=np.array(doc["thermal_base"]),
            pv_gen=np.array(doc["pv_gen"]),
            pf_tan=np.array(doc["pf_tan"]),
            storage_specs={int(k): v for k, v in doc["storage_specs"].items()},
            ev_specs={int(k): v for k, v in doc["ev_specs"].items()},
            thermal_specs={int(k): v for k, v in doc["thermal_specs"].items()},
        )


def _daily_shape(rng, hours: np.ndarray, weekend: bool) -> np.ndarray:
    """Normalized (peak ~1) within-day shape."""
    def bump(center, width):
        return np.exp(-0.5 * ((hours - center) / width) ** 2)

    if weekend:
        shape = 0.45 + 0.35 * bump(13.0, 3.5) + 0.45 * bump(19.5, 2.5)
    else:
        shape = 0.40 + 0.25 * bump(7.5, 1.5) + 0.60 * bump(19.0, 2.2)
    return shape / shape.max()


def profiles_from_csv(text: str, consumer_ids: tuple[int, ...],
                      base_power_kva: float) -> np.ndarray:
    """Read user-supplied load profiles: node_id, timestamp, p_kw rows.

    Timestamps are absolute 15-minute step indices from the record start; the
    result is a dense (steps, C) per-unit array covering whole days. All
    node/step cells must be present.
    """
    import csv as _csv
    import io as _io

    rows = list(_csv.DictReader(_io.StringIO(text)))
    if not rows:
        raise ValueError("empty profile CSV")
    n_steps = max(int(r["timestamp"]) for r in rows) + 1
    if n_steps % STEPS_PER_DAY:
        raise ValueError("profile CSV must cover whole days of 96 steps")
    col = {nid: k for k, nid in enumerate(consumer_ids)}
    out = np.full((n_steps, len(consumer_ids)), np.nan)
    for r in rows:
        out[int(r["timestamp"]), col[int(r["node_id"])]] = \
            float(r["p_kw"]) / base_power_kva
    if np.isnan(out).any():
        raise ValueError("profile CSV has missing node/step cells")
    return out


def generate_scenario(net: Network, knobs: Knobs, seed: int, days: int,
                      start_weekday: int = 0,
                      base_profiles: np.ndarray | None = None) -> Scenario:
    """Deterministic scenario for ``days`` days (generate one spare trailing
    day beyond what will be simulated so 2-day lookaheads stay in range).

    ``base_profiles`` (steps, C, p.u.) replaces the synthetic load shapes with
    user-supplied data (see profiles_from_csv); PV, DERs and the tariff are
    still synthesized around them.
    """
    rng = np.random.default_rng(seed)
    c = net.n_consumers
    steps = days * STEPS_PER_DAY
    delta = net.timestep_hours
    hours = (np.arange(STEPS_PER_DAY) + 0.5) * delta

    ref_peak = np.array([
        (n.ref_peak_kw if n.ref_peak_kw is not None else 5.0)
        for n in net.nodes if n.kind == "consumer"
    ]) / net.base_power_kva

    pf = rng.uniform(0.90, 0.95, c)
    pf_tan = np.tan(np.arccos(pf))

    if base_profiles is not None:
        if base_profiles.shape != (steps, c):
            raise ValueError(f"base_profiles must be shaped ({steps}, {c})")
        total = base_profiles.copy()
    else:
        # baseline load, weekday/weekend variants, daily + step noise
        total = np.zeros((steps, c))
        for k in range(c):
            phase = rng.uniform(-0.7, 0.7)
            for d in range(days):
                weekend = (start_weekday + d) % 7 >= 5
                shape = _daily_shape(rng, hours - phase, weekend)
                day_scale = rng.uniform(0.85, 1.15)
                noise = rng.lognormal(0.0, 0.06, STEPS_PER_DAY)
                total[d * STEPS_PER_DAY:(d + 1) * STEPS_PER_DAY, k] = \
                    shape * day_scale * noise
        # scale so the mean daily peak hits ref_peak
        for k in range(c):
            daily_peaks = total[:, k].reshape(days, STEPS_PER_DAY).max(axis=1)
            total[:, k] *= ref_peak[k] / daily_peaks.mean()

    thermal_base = THERMAL_SHARE * total
    base_load = total - thermal_base

    # PV assignment and profiles
    pv_gen = np.zeros((steps, c))
    n_pv = int(round(knobs.pv * c))
    pv_nodes = sorted(rng.choice(c, size=n_pv, replace=False).tolist())
    clear = np.clip(np.sin(np.pi * (hours - 6.5) / 13.0), 0.0, None) ** 2
    for k in pv_nodes:
        ratio = rng.uniform(0.4, 0.9)
        prof = np.zeros(steps)
        for d in range(days):
            cloud = rng.uniform(0.6, 1.0)
            wiggle = rng.lognormal(0.0, 0.08, STEPS_PER_DAY)
            prof[d * STEPS_PER_DAY:(d + 1) * STEPS_PER_DAY] = clear * cloud * wiggle
        node_daily = total[:, k].sum() * delta / days
        pv_daily = prof.sum() * delta / days
        pv_gen[:, k] = prof * (ratio * node_daily / pv_daily)

    # storage at a fraction of PV nodes
    storage_specs = {}
    eff = math.sqrt(ROUND_TRIP_EFF)
    n_st = int(round(knobs.storage * len(pv_nodes)))
    for k in (pv_nodes[:n_st] if n_st else []):
        nid = net.consumer_ids[k]
        pv_daily = pv_gen[:, k].sum() * delta / days
        cap = rng.uniform(0.4, 0.8) * pv_daily
        storage_specs[nid] = {
            "capacity": cap, "c_max": 0.5 * cap, "d_max": 0.5 * cap,
            "eff_c": eff, "eff_d": eff,
        }

    # EVs until the energy share reaches the knob
    ev_specs: dict[int, list] = {}
    ev_cmax = EV_CHARGER_KW / net.base_power_kva
    base_energy = total.sum() * delta
    ev_energy = 0.0
    guard = 0
    while knobs.ev > 0 and guard < 10 * c + 100:
        guard += 1
        share = ev_energy / (base_energy + ev_energy)
        if share >= knobs.ev - 1e-9:
            break
        k = int(rng.integers(0, c))
        at_home = rng.random() < 0.5
        windows = []
        added = 0.0
        if at_home:
            for d in range(days - 1):
                start = d * STEPS_PER_DAY + int(rng.integers(68, 77))   # 17:00-19:00
                end = (d + 1) * STEPS_PER_DAY + int(rng.integers(22, 35))  # 05:30-08:30
                energy = rng.uniform(5.0, 9.0) / net.base_power_kva
                energy = min(energy, ev_cmax * delta * (end - start + 1))
                windows.append((start, end, energy))
                added += energy
        else:
            for d in range(days):
                start = d * STEPS_PER_DAY + int(rng.integers(36, 41))   # 09:00-10:00
                end = d * STEPS_PER_DAY + int(rng.integers(64, 69))     # 16:00-17:00
                energy = rng.uniform(3.5, 7.0) / net.base_power_kva
                energy = min(energy, ev_cmax * delta * (end - start + 1))
                windows.append((start, end, energy))
                added += energy
        nid = net.consumer_ids[k]
        ev_specs.setdefault(nid, []).append(
            {"c_max": ev_cmax, "windows": windows, "eff_c": 1.0})
        ev_energy += added

    # flexible thermal units
    thermal_specs = {}
    if knobs.phi > 0:
        for k in range(c):
            nid = net.consumer_ids[k]
            thermal_specs[nid] = {
                "phi": knobs.phi,
                "u_max": float(thermal_base[:, k].max()),
            }

    # tariff peak window centered on the modal network peak hour
    network_total = total.sum(axis=1).reshape(days, STEPS_PER_DAY)
    peak_hours = (network_total.argmax(axis=1) * delta).astype(int)
    vals, counts = np.unique(peak_hours, return_counts=True)
    mode_hour = int(vals[counts.argmax()])
    ps = max(2, min(mode_hour - 2, 19))
    tariff = TOUTariff(
        peak_hours=(ps, ps + 4),
        part_peak_hours=((max(0, ps - 3), ps), (ps + 4, min(24, ps + 6))),
    )

    return Scenario(
        network=net, days=days, seed=seed, start_weekday=start_weekday,
        knobs=knobs, tariff=tariff, base_load=base_load,
        thermal_base=thermal_base, pv_gen=pv_gen, pf_tan=pf_tan,
        storage_specs=storage_specs, ev_specs=ev_specs,
        thermal_specs=thermal_specs,
    )
