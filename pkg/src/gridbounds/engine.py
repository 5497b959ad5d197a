"""Simulation engine: warm-up history, model fits, day-ahead bounds, per-step
dispatch, oracle validation and metric accumulation.

Pipeline per scenario: 35 warm-up days run under the cost-greedy local
heuristic build the load history (demand bounds need the 5-week lookback);
the linearized network model is fitted once per scenario from seeded oracle
samples; then each evaluation day computes demand bounds from the trailing
history, solves the 24 hourly supply-box programs (bounds controller), and
dispatches every 15-minute step, validating the result with the nonlinear
power-flow oracle. Reports are a pure function of the run configuration;
wall-clock timings go to a separate file.
"""

from __future__ import annotations

import copy
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .bookends import CentralWeights, centralized_dispatch, local_heuristic_dispatch
from .demand import compute_demand_bounds
from .der import step_dynamics
from .dispatch import LCState, LCWeights, dispatch_step
from .history import LoadHistory
from .linmodel import fit_linear_model, split_pos_neg
from .powerflow import Injection, solve_pf
from .reactive import fit_reactive_bounds
from .scenario import Scenario
from .supply import compute_day_ahead_bounds

STEPS_PER_DAY = 96
STEPS_PER_HOUR = 4

CONTROLLERS = ("bounds", "central", "local")


@dataclass
class RunConfig:
    scenario: Scenario
    controller: str = "bounds"
    eval_days: int = 5
    warmup_days: int = 35
    fit_samples: int = 500
    gc_tol: float = 1e-6
    pf_tol: float = 1e-8
    discount: float = 0.8
    lc_weights: LCWeights = field(default_factory=LCWeights)
    central_weights: CentralWeights = field(default_factory=CentralWeights)
    central_lookahead_days: int = 2

    def validate(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.controller!r}")
        if min(self.gc_tol, self.pf_tol) <= 0:
            raise ValueError("tolerances must be > 0")
        need = self.warmup_days + self.eval_days + 1
        if self.scenario.days < need:
            raise ValueError(
                f"scenario holds {self.scenario.days} days; run needs {need}")


@dataclass
class SimulationReport:
    controller: str
    seed: int
    eval_days: int
    per_day: list
    summary: dict
    traces: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> str:
        return json.dumps({
            "controller": self.controller,
            "seed": self.seed,
            "eval_days": self.eval_days,
            "per_day": self.per_day,
            "summary": self.summary,
        }, indent=1, sort_keys=True)


class _Sim:
    """One scenario's shared state across controller runs."""

    def __init__(self, config: RunConfig):
        self.cfg = config
        self.scn = config.scenario
        self.net = self.scn.network
        self.delta = self.net.timestep_hours
        self.p_unc, self.q_unc = self.scn.uncontrollable()
        self.history: LoadHistory | None = None
        self.fleets_after_warmup = None
        self.model = None
        self.split = None
        self.rmodel = None

    # -- shared preparation --------------------------------------------------

    def prepare(self) -> None:
        self._warmup()
        self._fit_models()

    def _warmup(self) -> None:
        cfg = self.cfg
        self.history = LoadHistory(self.net.consumer_ids,
                                   self.scn.start_weekday)
        fleets = self.scn.build_fleets()
        for day in range(cfg.warmup_days):
            day_net_p, day_net_q = self._run_day_heuristic(fleets, day)
            self._append_history(self.history, day_net_p, day_net_q)
        self.fleets_after_warmup = fleets

    def _run_day_heuristic(self, fleets, day):
        net_p = np.zeros((STEPS_PER_DAY, self.net.n_consumers))
        net_q = np.zeros_like(net_p)
        for s in range(STEPS_PER_DAY):
            t = day * STEPS_PER_DAY + s
            for k, nid in enumerate(self.net.consumer_ids):
                fleet = fleets.get(nid, [])
                c, d = local_heuristic_dispatch(fleet, self.scn.tariff, t, self.delta)
                net_p[s, k], net_q[s, k] = self._node_net(k, t, fleet, c, d)
        return net_p, net_q

    def _node_net(self, k, t, fleet, c, d):
        p = self.p_unc[t, k] + float(np.sum(c) - np.sum(d))
        q = self.q_unc[t, k]
        for i, u in enumerate(fleet):
            if u.kind == "thermal":
                q += Scenario.THERMAL_TAN * c[i]
        return p, q

    @staticmethod
    def _append_history(history: LoadHistory, day_net_p, day_net_q) -> None:
        hp = day_net_p.reshape(24, STEPS_PER_HOUR, -1).mean(axis=1)
        hq = day_net_q.reshape(24, STEPS_PER_HOUR, -1).mean(axis=1)
        history.append_day(hp, hq)

    def _fit_models(self) -> None:
        cfg = self.cfg
        rng = np.random.default_rng(np.random.SeedSequence([self.scn.seed, 7001]))
        lo = np.nanmin(self.history.p, axis=(0, 1))
        hi = np.nanmax(self.history.p, axis=(0, 1))
        span = np.maximum(hi - lo, 0.01)
        lo_q = np.nanmin(self.history.q, axis=(0, 1))
        hi_q = np.nanmax(self.history.q, axis=(0, 1))
        span_q = np.maximum(hi_q - lo_q, 0.005)
        samples = []
        for _ in range(cfg.fit_samples):
            p = rng.uniform(lo - 0.3 * span, hi + 0.3 * span)
            q = rng.uniform(lo_q - 0.3 * span_q, hi_q + 0.3 * span_q)
            inj = Injection.from_consumers(self.net, p, q)
            samples.append((inj, solve_pf(self.net, inj, tol=cfg.pf_tol)))
        self.model = fit_linear_model(self.net, samples)
        self.split = split_pos_neg(self.model)
        self.rmodel = fit_reactive_bounds(self.history)

    # -- controller runs -----------------------------------------------------

    def run_controller(self, controller: str) -> SimulationReport:
        cfg = self.cfg
        net = self.net
        fleets = copy.deepcopy(self.fleets_after_warmup)
        history = copy.deepcopy(self.history)
        n_c = net.n_consumers

        per_day = []
        dispatch_rows = []
        all_supply = []
        v_all, tau_all, sub_all, net_all, netq_all = [], [], [], [], []
        timings = {"gc_seconds": 0.0, "central_seconds": 0.0}

        for d_eval in range(cfg.eval_days):
            day = cfg.warmup_days + d_eval
            t0 = day * STEPS_PER_DAY
            supply = None
            plan = None
            if controller == "bounds":
                tic = time.perf_counter()
                demand = compute_demand_bounds(
                    history, day, floor_pu=net.kw_to_pu(1.0))
                supply = compute_day_ahead_bounds(
                    net, self.split, self.rmodel, demand,
                    tol=cfg.gc_tol, on_error="fallback")
                timings["gc_seconds"] += time.perf_counter() - tic
                all_supply.append(supply)
            elif controller == "central":
                tic = time.perf_counter()
                horizon = min(cfg.central_lookahead_days * STEPS_PER_DAY,
                              self.scn.n_steps - t0)
                plan = centralized_dispatch(
                    net, self.model, fleets, self.p_unc[t0:t0 + horizon],
                    self.q_unc[t0:t0 + horizon], self.scn.tariff, t0, horizon,
                    keep=STEPS_PER_DAY, weights=cfg.central_weights)
                timings["central_seconds"] += time.perf_counter() - tic

            day_out = self._run_day(controller, fleets, day, supply, plan,
                                    dispatch_rows)
            day_net_p, day_net_q, day_v, day_tau, day_sub = day_out
            self._append_history(history, day_net_p, day_net_q)
            v_all.append(day_v)
            tau_all.append(day_tau)
            sub_all.append(day_sub)
            net_all.append(day_net_p)
            netq_all.append(day_net_q)

            vflags, vworst = metrics.voltage_violations(day_v)
            if len(net.transformers):
                tflags, tworst = metrics.transformer_overloads(day_tau, net.tau_max)
            else:
                tflags = np.zeros(0, bool)
                tworst = np.zeros(0)
            cost = metrics.electricity_cost(
                day_net_p, self.scn.tariff, net.base_power_kva, self.delta,
                supply_box=supply, discount=cfg.discount)
            cost_undisc = metrics.electricity_cost(
                day_net_p, self.scn.tariff, net.base_power_kva, self.delta)
            per_day.append({
                "day": day,
                "voltage_violation_pct": 100.0 * float(vflags.mean()),
                "voltage_worst_pct": float(vworst.max()),
                "transformer_overload_pct":
                    100.0 * float(tflags.mean()) if tflags.size else 0.0,
                "transformer_worst_pct":
                    float(tworst.max()) if tworst.size else 0.0,
                "peak_kw": metrics.peak_load(day_sub, net.base_power_kva),
                "cost_total": float(cost.sum()),
                "cost_undiscounted_total": float(cost_undisc.sum()),
                "gc_fallback_hours":
                    list(supply.fallback_hours) if supply is not None else [],
            })

        summary = self._summarize(per_day)
        report = SimulationReport(
            controller=controller, seed=self.scn.seed,
            eval_days=cfg.eval_days, per_day=per_day, summary=summary)
        report.traces = {
            "v": np.vstack(v_all), "tau": np.vstack(tau_all),
            "substation_p": np.concatenate(sub_all),
            "net_p": np.vstack(net_all),
            "net_q": np.vstack(netq_all),
            "supply_boxes": all_supply,
            "dispatch_rows": dispatch_rows,
            "timings": timings,
        }
        return report

    def _run_day(self, controller, fleets, day, supply, plan, dispatch_rows):
        net = self.net
        n_c = net.n_consumers
        net_p = np.zeros((STEPS_PER_DAY, n_c))
        net_q = np.zeros_like(net_p)
        v = np.zeros((STEPS_PER_DAY, net.n_nodes))
        tau = np.zeros((STEPS_PER_DAY, len(net.transformers)))
        sub = np.zeros(STEPS_PER_DAY)
        states: dict[int, LCState] = {}
        unit_index = None
        if plan is not None:
            unit_index = {}
            for j, (nid, _) in enumerate(plan.units):
                unit_index.setdefault(nid, []).append(j)

        for s in range(STEPS_PER_DAY):
            t = day * STEPS_PER_DAY + s
            hour = s // STEPS_PER_HOUR
            for k, nid in enumerate(net.consumer_ids):
                fleet = fleets.get(nid, [])
                p_unc_tk = self.p_unc[t, k]
                if controller == "local":
                    c, d = local_heuristic_dispatch(fleet, self.scn.tariff,
                                                    t, self.delta)
                elif controller == "central":
                    c = np.zeros(len(fleet))
                    d = np.zeros(len(fleet))
                    for pos, j in enumerate(unit_index.get(nid, [])):
                        u = fleet[pos]
                        if hasattr(u, "begin_step"):
                            u.begin_step(t)
                        ci, di = plan.c[s, j], plan.d[s, j]
                        req = u.required_final(t)
                        if req is not None:
                            ci = (req - u.q) / (u.eff_c * self.delta)
                        ci = min(max(ci, 0.0), u.power_limits(t)[0])
                        di = min(max(di, 0.0), u.power_limits(t)[1])
                        step_dynamics(u, ci, di, self.delta, t=t)
                        c[pos], d[pos] = ci, di
                else:  # bounds
                    if s % STEPS_PER_HOUR == 0:
                        states[nid] = LCState(
                            p_u=supply.p_u[hour, k], p_l=supply.p_l[hour, k],
                            weights=self.cfg.lc_weights)
                    res = dispatch_step(states[nid], fleet, p_unc_tk, t,
                                        self.delta, tariff=self.scn.tariff)
                    c, d = res.c, res.d
                net_p[s, k], net_q[s, k] = self._node_net(k, t, fleet, c, d)
                for i, u in enumerate(fleet):
                    dispatch_rows.append({
                        "day": day, "step": t, "node": nid, "unit": i,
                        "kind": u.kind, "c_kw": c[i] * net.base_power_kva,
                        "d_kw": d[i] * net.base_power_kva,
                        "soc_kwh": u.q * net.base_power_kva,
                    })
            inj = Injection.from_consumers(net, net_p[s], net_q[s])
            sol = solve_pf(net, inj, tol=self.cfg.pf_tol)
            v[s] = sol.v
            tau[s] = sol.tau
            sub[s] = sol.substation_p
        return net_p, net_q, v, tau, sub

    @staticmethod
    def _summarize(per_day: list) -> dict:
        def mean(key):
            return float(np.mean([d[key] for d in per_day]))

        return {
            "mean_daily_transformer_overload_pct": mean("transformer_overload_pct"),
            "mean_daily_voltage_violation_pct": mean("voltage_violation_pct"),
            "peak_kw": float(max(d["peak_kw"] for d in per_day)),
            "total_cost": float(sum(d["cost_total"] for d in per_day)),
            "total_cost_undiscounted":
                float(sum(d["cost_undiscounted_total"] for d in per_day)),
            "gc_fallback_hour_count":
                int(sum(len(d["gc_fallback_hours"]) for d in per_day)),
        }


def run(config: RunConfig) -> SimulationReport:
    """Run one controller on one scenario."""
    config.validate()
    sim = _Sim(config)
    sim.prepare()
    return sim.run_controller(config.controller)


def run_compare(config: RunConfig,
                controllers=CONTROLLERS) -> dict[str, SimulationReport]:
    """Run several controllers sharing warm-up history and fitted models."""
    config.validate()
    sim = _Sim(config)
    sim.prepare()
    return {ctrl: sim.run_controller(ctrl) for ctrl in controllers}


def run_ensemble(configs: list[RunConfig]) -> dict:
    """Aggregate multiple seeded runs: mean and standard error per metric."""
    if len(configs) < 2:
        raise ValueError("ensemble needs at least 2 seeds")
    reports = [run(c) for c in configs]
    return {"reports": reports, "stats": ensemble_stats(reports)}


def ensemble_stats(reports: list[SimulationReport]) -> dict:
    keys = reports[0].summary.keys()
    out = {}
    for key in keys:
        vals = np.array([r.summary[key] for r in reports], dtype=float)
        out[key] = {
            "mean": float(vals.mean()),
            "se": float(vals.std(ddof=1) / math.sqrt(len(vals)))
            if len(vals) > 1 else 0.0,
        }
    return out


def write_outputs(report: SimulationReport, outdir: str) -> None:
    """report.json, violations.csv, dispatch.csv, timings.json."""
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w") as f:
        f.write(report.to_json())
    with open(os.path.join(outdir, "violations.csv"), "w") as f:
        f.write("day,voltage_violation_pct,voltage_worst_pct,"
                "transformer_overload_pct,transformer_worst_pct,peak_kw,"
                "cost_total\n")
        for d in report.per_day:
            f.write(f"{d['day']},{d['voltage_violation_pct']},"
                    f"{d['voltage_worst_pct']},{d['transformer_overload_pct']},"
                    f"{d['transformer_worst_pct']},{d['peak_kw']},"
                    f"{d['cost_total']}\n")
    rows = report.traces.get("dispatch_rows", [])
    with open(os.path.join(outdir, "dispatch.csv"), "w") as f:
        f.write("day,step,node,unit,kind,c_kw,d_kw,soc_kwh\n")
        for r in rows:
            f.write(f"{r['day']},{r['step']},{r['node']},{r['unit']},"
                    f"{r['kind']},{r['c_kw']:.6f},{r['d_kw']:.6f},"
                    f"{r['soc_kwh']:.6f}\n")
    with open(os.path.join(outdir, "timings.json"), "w") as f:
        json.dump(report.traces.get("timings", {}), f, indent=1, sort_keys=True)
